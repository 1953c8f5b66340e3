use perc_core::design::{expected_utility, instructive_utility, progressive_chain, ProgressiveConfig};
use perc_core::{ChainConfig, Design, PriorSpec};

fn short() -> ChainConfig {
    ChainConfig { iterations: 5_000, burn_in: 500, thin: 5, ..Default::default() }
}

#[test]
fn near_degenerate_sampling_prior_matches_instructive() {
    let d = Design { m: 5, r: 0 };
    let a = instructive_utility(d, 0.4, 200, &short(), 3).unwrap();
    let b = expected_utility(d, PriorSpec::Beta { a: 4e5, b: 6e5 }, PriorSpec::Uniform, 200, &short(), 4).unwrap();
    let se = (a.std_error.unwrap().powi(2) + b.std_error.unwrap().powi(2)).sqrt();
    assert!((a.mean - b.mean).abs() <= 3.0 * se, "{} vs {} (se {se})", a.mean, b.mean);
}

#[test]
fn duplicated_design_is_visited_equally() {
    let d = Design { m: 3, r: 0 };
    let runs: Vec<f64> = (0..10)
        .map(|seed| {
            let cfg = ProgressiveConfig {
                iterations: 2_000,
                burn_in: 100,
                inner: ChainConfig { iterations: 2_000, burn_in: 200, thin: 2, ..Default::default() },
                seed,
                ..Default::default()
            };
            progressive_chain(&[d, d], &cfg).unwrap().frequencies[0]
        })
        .collect();
    let mean = runs.iter().sum::<f64>() / runs.len() as f64;
    let var = runs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (runs.len() - 1) as f64;
    let se = (var / runs.len() as f64).sqrt();
    assert!((mean - 0.5).abs() <= 3.0 * se, "{mean} ± {se}");
}

#[test]
fn instructive_estimates_are_reproducible() {
    let d = Design { m: 3, r: 0 };
    let a = instructive_utility(d, 0.6, 8, &short(), 11).unwrap();
    let b = instructive_utility(d, 0.6, 8, &short(), 11).unwrap();
    assert_eq!(a.per_replicate, b.per_replicate);
    assert_eq!(a.m, 8);
}
