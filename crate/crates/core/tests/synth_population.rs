use granular::data::{synth_generate, SynthConfig};
use granular::feedback::{empirical_cdf, OrdinalScale};
use granular::stats::mean;

fn column_scores(m: &granular::FeedbackMatrix, unit: usize) -> Vec<i32> {
    m.row(unit).to_vec()
}

#[test]
fn simulated_workers_match_the_analytic_population() {
    for scale in [OrdinalScale::eleven_point(), OrdinalScale::five_point(), OrdinalScale::binary()] {
        let config = SynthConfig {
            num_units: 3,
            num_workers: 1_000_000,
            scale: scale.clone(),
            unit_polarization_spread: 0.6,
            worker_bias_spread: 0.2,
            seed: 12,
            ..SynthConfig::default()
        };
        let (m, truth) = synth_generate(&config).unwrap();
        for (t, p) in truth.iter().enumerate() {
            let emp = empirical_cdf(&column_scores(&m, t), &scale).unwrap();
            let dist = emp.values().iter().zip(p.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(dist <= 0.005, "scale {:?}, unit {t}: l-inf {dist}", scale.raw_labels());
        }
    }
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Correlation, over workers, between scores given to two repeated units.
fn repeat_correlation(bias: f64) -> f64 {
    let config = SynthConfig {
        num_units: 2,
        num_workers: 5000,
        repeats: 1,
        worker_bias_spread: bias,
        seed: 3,
        ..SynthConfig::default()
    };
    let (m, _) = synth_generate(&config).unwrap();
    let a: Vec<f64> = m.row(0).iter().map(|&s| f64::from(s)).collect();
    let b: Vec<f64> = m.row(1).iter().map(|&s| f64::from(s)).collect();
    pearson(&a, &b)
}

#[test]
fn worker_bias_makes_one_workers_scores_informative() {
    assert!(repeat_correlation(0.3) > 0.2);
    // 5 sigma for a null correlation on 5000 pairs
    assert!(repeat_correlation(0.0).abs() < 5.0 / 5000f64.sqrt());
}

#[test]
fn worker_columns_are_exchangeable_in_law() {
    let seeds = 400;
    let (mut first, mut last) = (Vec::new(), Vec::new());
    for seed in 0..seeds {
        let config = SynthConfig {
            num_units: 20,
            num_workers: 6,
            worker_bias_spread: 0.3,
            seed,
            ..SynthConfig::default()
        };
        let (m, _) = synth_generate(&config).unwrap();
        let col = |k: usize| mean(&(0..20).map(|t| f64::from(m.score(t, k))).collect::<Vec<_>>());
        first.push(col(0));
        last.push(col(5));
    }
    let diff: Vec<f64> = first.iter().zip(&last).map(|(a, b)| a - b).collect();
    let sd = granular::stats::std_population(&diff);
    let se = sd / (seeds as f64).sqrt();
    assert!(mean(&diff).abs() < 5.0 * se, "mean difference {} vs se {se}", mean(&diff));
}
