//! Posterior mode by Gaussian kernel density estimation.

use serde::Serialize;

use super::quantile_sorted;
use crate::error::{domain, Result};

const GRID: usize = 512;
const MIN_DRAWS: usize = 1000;
/// Kernel support in bandwidths.
const CUTOFF: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModeEstimate {
    pub mode: f64,
    pub bandwidth: f64,
    /// The mode lies within two bandwidths of 0 or 1, where the estimate is
    /// biased inwards.
    pub at_boundary: bool,
}

/// Mode of a Gaussian KDE with Silverman's bandwidth, searched over the grid
/// `(i + 0.5) / 512`.
pub fn posterior_mode(draws: &[f64]) -> Result<ModeEstimate> {
    if draws.len() < MIN_DRAWS {
        return domain(format!("need at least {MIN_DRAWS} draws, got {}", draws.len()));
    }
    let mut v = draws.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let iqr = quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = (0.9 * spread * n.powf(-0.2)).max(1.0 / GRID as f64);

    let mut best = (f64::NEG_INFINITY, 0.5);
    for i in 0..GRID {
        let x = (i as f64 + 0.5) / GRID as f64;
        let lo = v.partition_point(|&d| d < x - CUTOFF * h);
        let hi = v.partition_point(|&d| d <= x + CUTOFF * h);
        let f: f64 = v[lo..hi].iter().map(|&d| (-0.5 * ((x - d) / h).powi(2)).exp()).sum();
        if f > best.0 {
            best = (f, x);
        }
    }
    let mode = best.1;
    Ok(ModeEstimate {
        mode,
        bandwidth: h,
        at_boundary: mode < 2.0 * h || mode > 1.0 - 2.0 * h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Beta, Distribution};

    fn beta_draws(a: f64, b: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = crate::rng::stream(seed, 0);
        let d = Beta::new(a, b).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn interior_modes() {
        let m = posterior_mode(&beta_draws(2.0, 7.0, 100_000, 1)).unwrap();
        assert!((m.mode - 1.0 / 7.0).abs() < 0.02, "{m:?}");
        assert!(!m.at_boundary);
        let m = posterior_mode(&beta_draws(5.0, 5.0, 100_000, 2)).unwrap();
        assert!((m.mode - 0.5).abs() < 0.02, "{m:?}");
    }

    #[test]
    fn monotone_density_flags_boundary() {
        let m = posterior_mode(&beta_draws(1.0, 5.0, 20_000, 3)).unwrap();
        assert!(m.mode > 0.0 && m.mode < 0.05, "{m:?}");
        assert!(m.at_boundary);
    }

    #[test]
    fn too_few_draws() {
        assert!(posterior_mode(&[0.5; 999]).is_err());
    }

    #[test]
    fn deterministic_and_handles_constant_samples() {
        let d = beta_draws(3.0, 4.0, 2000, 4);
        assert_eq!(posterior_mode(&d).unwrap(), posterior_mode(&d).unwrap());
        let m = posterior_mode(&[0.3; 1000]).unwrap();
        assert!((m.mode - 0.3).abs() < 1.0 / 512.0);
    }
}
