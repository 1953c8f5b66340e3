//! Bayesian experimental design over inner-outer plots.
//!
//! A design `Π(m, r)` is judged by the Kullback-Leibler divergence from the
//! prior to the posterior of `p` that its observed cluster produces. The
//! posterior is approximated by a Beta fit to an S1 chain, so the divergence
//! from a uniform prior is minus the fitted Beta's differential entropy.

mod progressive;
mod special;
mod utility;

pub use progressive::{progressive_chain, ProgressiveConfig, ProgressiveResult};
pub use special::{digamma, ln_beta};
pub use utility::{cluster_utility, expected_utility, instructive_utility, mc_expected_utility, UtilityEstimate};

use std::fmt;

use serde::Serialize;

use crate::error::{domain, Result};
use crate::inference::PriorSpec;
use crate::lattice::Plot;

/// The inner-outer plot `Π(m, r)` on `ℤ²` with side `m + 4r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Design {
    pub m: u32,
    pub r: u32,
}

impl Design {
    pub fn new(m: u32, r: u32) -> Result<Design> {
        if m.is_multiple_of(2) {
            return domain(format!("inner side {m} must be odd"));
        }
        Ok(Design { m, r })
    }

    pub fn side(&self) -> u32 {
        self.m + 4 * self.r
    }

    pub fn plot(&self) -> Result<Plot> {
        Plot::inner_outer(2, self.m, self.r)
    }

    pub fn label(&self) -> String {
        format!("m{}r{}", self.m, self.r)
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.m, self.r)
    }
}

/// All designs of side `n`, by decreasing inner side.
pub fn design_space(n: u32) -> Result<Vec<Design>> {
    if n.is_multiple_of(2) || n < 3 {
        return domain(format!("plot side {n} must be odd and at least 3"));
    }
    Ok((0..=(n - 1) / 4).map(|r| Design { m: n - 4 * r, r }).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

const FIT_FLOOR: f64 = 1e-3;
const MIN_FIT_DRAWS: usize = 100;

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<BetaParams> {
        if alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite() {
            Ok(BetaParams { alpha, beta })
        } else {
            domain(format!("invalid beta parameters ({alpha}, {beta})"))
        }
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        (self.alpha - 1.0) * x.ln() + (self.beta - 1.0) * (-x).ln_1p() - ln_beta(self.alpha, self.beta)
    }
}

/// Method-of-moments Beta fit, each parameter floored at 1e-3.
pub fn fit_beta(draws: &[f64]) -> Result<BetaParams> {
    if draws.len() < MIN_FIT_DRAWS {
        return domain(format!("need at least {MIN_FIT_DRAWS} draws, got {}", draws.len()));
    }
    if draws.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
        return domain("draws must lie strictly inside (0,1)");
    }
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if !(var > 1e-15 * mean * (1.0 - mean)) {
        return domain("sample variance is zero");
    }
    let c = mean * (1.0 - mean) / var - 1.0;
    Ok(BetaParams {
        alpha: (mean * c).max(FIT_FLOOR),
        beta: ((1.0 - mean) * c).max(FIT_FLOOR),
    })
}

/// Differential entropy in nats:
/// `ln B(α,β) - (α-1)ψ(α) - (β-1)ψ(β) + (α+β-2)ψ(α+β)`.
pub fn beta_entropy(bp: BetaParams) -> f64 {
    let BetaParams { alpha: a, beta: b } = bp;
    ln_beta(a, b) - (a - 1.0) * digamma(a) - (b - 1.0) * digamma(b) + (a + b - 2.0) * digamma(a + b)
}

/// `D_KL(posterior ‖ prior)` for a Beta or uniform prior.
///
/// Against the uniform prior this is `-beta_entropy(posterior)`; against
/// `Beta(a, b)` the cross-entropy term follows from
/// `E[ln p] = ψ(α) - ψ(α+β)`. A point-mass prior does not cover the
/// posterior's support and is rejected.
pub fn kl_posterior_vs_prior(posterior: BetaParams, prior: PriorSpec) -> Result<f64> {
    let kl = match prior {
        PriorSpec::Uniform => -beta_entropy(posterior),
        PriorSpec::Beta { .. } => {
            let (a0, b0) = prior.beta_shape()?;
            let BetaParams { alpha, beta } = posterior;
            let s = digamma(alpha + beta);
            let e_ln_p = digamma(alpha) - s;
            let e_ln_q = digamma(beta) - s;
            -beta_entropy(posterior) - (a0 - 1.0) * e_ln_p - (b0 - 1.0) * e_ln_q + ln_beta(a0, b0)
        }
        PriorSpec::PointMass(_) => return domain("a point-mass prior does not cover the posterior support"),
    };
    Ok(kl.max(0.0))
}

/// `D_KL(posterior ‖ prior)` by 512-point Gauss-Legendre quadrature for a
/// prior given by its log density on (0,1).
pub fn kl_quadrature(posterior: BetaParams, ln_prior: impl Fn(f64) -> f64) -> f64 {
    special::gauss_legendre()
        .iter()
        .map(|&(x, w)| {
            let lf = posterior.ln_pdf(x);
            w * lf.exp() * (lf - ln_prior(x))
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Beta, Distribution};

    /// `∫_0^1 g(ln x, ln(1-x)) dx` by tanh-sinh quadrature.
    fn tanh_sinh(g: impl Fn(f64, f64) -> f64) -> f64 {
        let h = 1.0 / 128.0;
        let mut sum = 0.0;
        let k_max = (4.5 / h) as i64;
        for k in -k_max..=k_max {
            let t = k as f64 * h;
            let u = std::f64::consts::FRAC_PI_2 * t.sinh();
            let ln_x = -(-2.0 * u).exp().ln_1p();
            let ln_1mx = -(2.0 * u).exp().ln_1p();
            let dx = std::f64::consts::FRAC_PI_4 * t.cosh() / u.cosh().powi(2);
            let v = g(ln_x, ln_1mx) * dx;
            if v.is_finite() {
                sum += v;
            }
        }
        sum * h
    }

    fn entropy_oracle(a: f64, b: f64) -> f64 {
        let ln_z = tanh_sinh(|lx, ly| ((a - 1.0) * lx + (b - 1.0) * ly).exp()).ln();
        tanh_sinh(|lx, ly| {
            let lf = (a - 1.0) * lx + (b - 1.0) * ly - ln_z;
            -lf * lf.exp()
        })
    }

    #[test]
    fn design_spaces() {
        let d19: Vec<(u32, u32)> = design_space(19).unwrap().iter().map(|d| (d.m, d.r)).collect();
        assert_eq!(d19, vec![(19, 0), (15, 1), (11, 2), (7, 3), (3, 4)]);
        let d11: Vec<(u32, u32)> = design_space(11).unwrap().iter().map(|d| (d.m, d.r)).collect();
        assert_eq!(d11, vec![(11, 0), (7, 1), (3, 2)]);
        assert_eq!(design_space(3).unwrap(), vec![Design { m: 3, r: 0 }]);
        assert!(design_space(10).is_err());
        for d in design_space(19).unwrap() {
            assert_eq!(d.side(), 19);
        }
    }

    #[test]
    fn entropy_matches_quadrature_on_grid() {
        let grid = [0.5, 1.0, 2.0, 5.0, 10.0, 20.0];
        for &a in &grid {
            for &b in &grid {
                let got = beta_entropy(BetaParams::new(a, b).unwrap());
                let want = entropy_oracle(a, b);
                assert!((got - want).abs() < 1e-8, "({a},{b}): {got} vs {want}");
            }
        }
        assert!(beta_entropy(BetaParams::new(1.0, 1.0).unwrap()).abs() < 1e-14);
        assert!((beta_entropy(BetaParams::new(2.0, 2.0).unwrap()) + 0.1252).abs() < 2e-4);
    }

    #[test]
    fn kl_against_uniform_and_beta() {
        let post = BetaParams::new(2.0, 7.0).unwrap();
        let kl = kl_posterior_vs_prior(post, PriorSpec::Uniform).unwrap();
        assert!((kl - 0.700).abs() < 5e-4, "{kl}");
        assert!((kl + entropy_oracle(2.0, 7.0)).abs() < 1e-8);
        assert!(kl_posterior_vs_prior(BetaParams::new(1.0, 1.0).unwrap(), PriorSpec::Uniform).unwrap() < 1e-12);
        assert!(kl_posterior_vs_prior(post, PriorSpec::PointMass(0.5)).is_err());

        // closed form vs quadrature vs tanh-sinh oracle
        let prior = PriorSpec::Beta { a: 3.0, b: 2.5 };
        let closed = kl_posterior_vs_prior(post, prior).unwrap();
        let quad = kl_quadrature(post, |x| prior.ln_pdf(x).unwrap());
        let ln_b0 = ln_beta(3.0, 2.5);
        let oracle = tanh_sinh(|lx, ly| {
            let lf = lx + 6.0 * ly + 56f64.ln();
            let lg = 2.0 * lx + 1.5 * ly - ln_b0;
            lf.exp() * (lf - lg)
        });
        assert!((closed - oracle).abs() < 1e-9, "{closed} vs {oracle}");
        assert!((quad - oracle).abs() < 1e-9, "{quad} vs {oracle}");
        let same = kl_posterior_vs_prior(BetaParams::new(3.0, 2.5).unwrap(), prior).unwrap();
        assert!(same < 1e-12);
    }

    #[test]
    fn kl_is_nonnegative() {
        for a in [0.3, 1.0, 4.0, 40.0] {
            for b in [0.3, 1.0, 4.0, 40.0] {
                let post = BetaParams::new(a, b).unwrap();
                assert!(kl_posterior_vs_prior(post, PriorSpec::Uniform).unwrap() >= 0.0);
                assert!(kl_posterior_vs_prior(post, PriorSpec::Beta { a: 2.0, b: 0.7 }).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn beta_fit_by_moments() {
        let mut rng = crate::rng::stream(5, 0);
        let d = Beta::new(2.0, 7.0).unwrap();
        let draws: Vec<f64> = (0..1_000_000).map(|_| d.sample(&mut rng)).collect();
        let f = fit_beta(&draws).unwrap();
        assert!((f.alpha / 2.0 - 1.0).abs() < 0.05 && (f.beta / 7.0 - 1.0).abs() < 0.05, "{f:?}");

        let mirrored: Vec<f64> = draws[..5000].iter().flat_map(|&x| [x, 1.0 - x]).collect();
        let f = fit_beta(&mirrored).unwrap();
        assert!((f.alpha - f.beta).abs() < 1e-9 * f.alpha);

        assert!(fit_beta(&[0.3; 500]).is_err());
        assert!(fit_beta(&draws[..99]).is_err());
        let mut bad = draws[..200].to_vec();
        bad[0] = 1.0;
        assert!(fit_beta(&bad).is_err());
    }

    #[test]
    fn designs_build_plots() {
        let p = Design::new(7, 1).unwrap().plot().unwrap();
        assert_eq!(p.node_count().unwrap(), 105);
        assert!(Design::new(4, 1).is_err());
        assert_eq!(Design::new(3, 2).unwrap().to_string(), "(3,2)");
    }
}
