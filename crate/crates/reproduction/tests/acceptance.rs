//! Acceptance checks. Each criterion prints one PASS / FAIL / SKIP line; the
//! process exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use granular::data::{ingest, noise_stats, SynthConfig, FEEDBACK_FILE, MANIFEST_FILE};
use granular::evaluation::{bootstrap_ci, invert_curves, uniform_grid, BootstrapConfig, LossCurve};
use granular::feedback::{
    coarsen_5pt_label, empirical_cdf, output_cdf, prior_q0, split_workers, Environment, EnvironmentView, Granularity,
    ELEVEN_TO_FIVE,
};
use granular::losses::{cumulative_log_loss, standard_log_loss, LossKind};
use granular::nn::{check_gradients, Matrix, MlpConfig, Mode, Network};
use granular::pipeline::{self, DatasetSource, MlpOverrides, RunConfig, RESULTS_FILE};
use granular::policies::{regavg_predict, Policy, PolicyKind, RegAvgPolicy, SlPolicy, SlbPolicy};
use granular::seed::rng_for;
use granular::{Cdf, FeedbackMatrix, OrdinalScale, Pmf};
use granular_reproduction::{brute_force_regavg, discrete_quantile, is_valid_cdf, run, two_env_bootstrap_law, Outcome};
use rand::Rng;

const DATASET_ENV: &str = "GRANULAR_DATASET_DIR";

fn jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn quiet(_: &str) {}

fn table_one() -> Outcome {
    let target = Cdf::new(vec![0.0, 0.0, 1.0]).unwrap();
    let q = Cdf::new(vec![0.005, 0.995, 1.0]).unwrap();
    let q_alt = Cdf::new(vec![0.99, 0.995, 1.0]).unwrap();
    let cum_q = cumulative_log_loss(&target, &q).unwrap();
    let cum_alt = cumulative_log_loss(&target, &q_alt).unwrap();
    let want_q = -0.5 * (0.995f64.ln() + 0.005f64.ln());
    let want_alt = -0.5 * (0.01f64.ln() + 0.005f64.ln());

    let p = Pmf::new(vec![0.0, 0.0, 1.0]).unwrap();
    let std_q = standard_log_loss(&p, &Pmf::new(vec![0.005, 0.99, 0.005]).unwrap()).unwrap();
    let std_alt = standard_log_loss(&p, &Pmf::new(vec![0.99, 0.005, 0.005]).unwrap()).unwrap();
    let want_std = -(0.005f64.ln());

    let errs = [
        (cum_q - want_q).abs(),
        (cum_alt - want_alt).abs(),
        (std_q - want_std).abs(),
        (std_alt - want_std).abs(),
    ];
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    Outcome::check(
        worst <= 1e-9,
        format!("cumlog {cum_q:.6} / {cum_alt:.6}, stdlog {std_q:.6} / {std_alt:.6}, worst error {worst:.1e}"),
    )
}

fn table_three() -> Outcome {
    let mut problems = Vec::new();
    for col in 0..5 {
        let mut tenths = 0i64;
        for row in &ELEVEN_TO_FIVE {
            let t = row[col] * 10.0;
            if (t - t.round()).abs() > 1e-12 {
                problems.push(format!("entry {} of column {col} is not a whole tenth", row[col]));
            }
            tenths += t.round() as i64;
        }
        if tenths != 22 {
            problems.push(format!("column {col} sums to {tenths} tenths"));
        }
    }

    const DRAWS: usize = 1_000_000;
    let mut worst_z: f64 = 0.0;
    for (i, row) in ELEVEN_TO_FIVE.iter().enumerate() {
        let raw = i as i32 - 5;
        let mut rng = rng_for(2024, "acceptance-coarsen", &[i as u64]);
        let mut counts = [0usize; 5];
        for _ in 0..DRAWS {
            counts[(coarsen_5pt_label(raw, &mut rng).unwrap() + 2) as usize] += 1;
        }
        for (j, (&c, &p)) in counts.iter().zip(row).enumerate() {
            let expect = DRAWS as f64 * p;
            let sd = (DRAWS as f64 * p * (1.0 - p)).sqrt();
            if sd == 0.0 {
                if c as f64 != expect {
                    problems.push(format!("score {raw} hit column {j} {c} times, expected {expect}"));
                }
                continue;
            }
            let z = (c as f64 - expect).abs() / sd;
            worst_z = worst_z.max(z);
            if z > 5.0 {
                problems.push(format!("score {raw} column {j}: {c} draws, z = {z:.2}"));
            }
        }
    }
    if problems.is_empty() {
        Outcome::Pass(format!("every column sums to 22 tenths; worst sampled |z| {worst_z:.2}"))
    } else {
        Outcome::Fail(problems.join("; "))
    }
}

fn gradient_fidelity() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let mut detail = Vec::new();
    for i in 0..12usize {
        let hidden_layers = 1 + i % 2;
        let output_dim = [2, 5, 11][i % 3];
        let mode = if (i / 6) % 2 == 0 { Mode::Train } else { Mode::Eval };
        let batch = 3 + i % 5;
        let input_dim = 1 + i % 4;
        let config = MlpConfig {
            input_dim,
            output_dim,
            hidden_layers,
            hidden_size: 4 + i,
            dropout_p: 0.2,
            learning_rate: 0.01,
            weight_decay: 0.0,
            batch_size: batch,
            patience: 8,
            max_epochs: 1,
            val_fraction: 0.1,
            seed: 100 + i as u64,
        };
        let mut net = Network::new(config).unwrap();
        let mut rng = rng_for(i as u64, "acceptance-gradients", &[]);
        // fresh shifts are all zero; move them off the ReLU kinks
        for p in net.params_mut() {
            for v in p.iter_mut() {
                *v += 0.3 * (rng.random::<f64>() - 0.5);
            }
        }
        let x: Vec<f64> = (0..batch * input_dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let x = Matrix::from_vec(batch, input_dim, x).unwrap();
        let mut y = Vec::with_capacity(batch * output_dim);
        for _ in 0..batch {
            let mut row: Vec<f64> = (0..output_dim).map(|_| rng.random::<f64>()).collect();
            row.sort_by(f64::total_cmp);
            row[output_dim - 1] = 1.0;
            y.extend(row);
        }
        let y = Matrix::from_vec(batch, output_dim, y).unwrap();
        let check = check_gradients(&net, &x, &y, mode, 1e-5, i as u64).unwrap();
        worst = worst.max(check.max_relative_error);
        cases += 1;
        if check.max_relative_error >= 1e-4 {
            detail.push(format!(
                "case {i} ({hidden_layers} layers, |Y| = {output_dim}, {mode:?}): {:.2e}",
                check.max_relative_error
            ));
        }
    }
    if detail.is_empty() {
        Outcome::Pass(format!("{cases} configurations, worst relative error {worst:.2e}"))
    } else {
        Outcome::Fail(detail.join("; "))
    }
}

fn regavg_oracle() -> Outcome {
    let scales = [OrdinalScale::binary(), OrdinalScale::five_point(), OrdinalScale::eleven_point()];
    let mut rng = rng_for(7, "acceptance-regavg", &[]);
    let mut worst: f64 = 0.0;
    let mut endpoint_misses = 0;
    for case in 0..1000 {
        let scale = &scales[case % 3];
        let labels = scale.raw_labels();
        let mut q0: Vec<f64> = (0..scale.len()).map(|_| rng.random::<f64>()).collect();
        q0.sort_by(f64::total_cmp);
        let last = q0.len() - 1;
        q0[last] = 1.0;
        let q0 = Cdf::new(q0).unwrap();
        let gamma: f64 = rng.random();
        let k = rng.random_range(1..=30);
        let scores: Vec<i32> = (0..k).map(|_| labels[rng.random_range(0..labels.len())]).collect();

        let got = regavg_predict(&q0, gamma, &scores, scale).unwrap();
        let want = brute_force_regavg(q0.values(), gamma, &scores, scale);
        for (g, w) in got.values().iter().zip(&want) {
            worst = worst.max((g - w).abs());
        }

        let at_zero = regavg_predict(&q0, 0.0, &scores, scale).unwrap();
        let at_one = regavg_predict(&q0, 1.0, &scores, scale).unwrap();
        if at_zero != empirical_cdf(&scores, scale).unwrap() || at_one != q0 {
            endpoint_misses += 1;
        }
    }
    Outcome::check(
        worst <= 1e-12 && endpoint_misses == 0,
        format!("1000 cases, worst deviation {worst:.1e}, endpoint mismatches {endpoint_misses}"),
    )
}

fn matching_oracle() -> Outcome {
    let ks: Vec<usize> = (2..=18).collect();
    let reference: Vec<f64> = ks.iter().map(|&k| 1.0 / k as f64).collect();
    let challenger: Vec<f64> = ks.iter().map(|&k| 1.0 / (2.0 * k as f64)).collect();
    let grid = uniform_grid(2.0, 18.0, 100).unwrap();
    let (required, _) = invert_curves(&ks, &reference, &challenger, &grid).unwrap();
    let step = (18.0 - 2.0) / 99.0;
    let tol = 0.1616;
    let errs: Vec<(f64, f64)> = grid.iter().zip(&required).map(|(&g, &k)| (g, (k - g / 2.0).abs())).collect();
    let misses: Vec<&(f64, f64)> = errs.iter().filter(|(_, e)| *e > tol).collect();
    let worst = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    // g / 2 is below the smallest K whenever g < 4, so those points can
    // never be recovered from curves that start at K = 2
    let in_range: Vec<&(f64, f64)> = errs.iter().filter(|(g, _)| g / 2.0 >= 2.0).collect();
    let worst_in_range = in_range.iter().map(|e| e.1).fold(0.0, f64::max);
    let detail = format!(
        "{} of 100 grid points off by more than {tol} (worst {worst:.4}, step {step:.4}); \
         over the {} points with g/2 >= 2 the worst error is {worst_in_range:.4}",
        misses.len(),
        in_range.len()
    );
    Outcome::check(misses.is_empty(), detail)
}

fn bootstrap_enumeration() -> Outcome {
    let ks = vec![2, 4, 8];
    let rows = vec![vec![0.9, 0.6, 0.45], vec![0.7, 0.5, 0.2]];
    let curve = LossCurve::new("p", ks.clone(), vec![0, 1], rows.clone()).unwrap();
    let mut problems = Vec::new();
    let mut worst_rel: f64 = 0.0;
    for confidence in [0.95, 0.8, 0.4] {
        let config = BootstrapConfig {
            resamples: 100_000,
            confidence,
            seed: 11,
        };
        let sampled = bootstrap_ci(&curve, &config).unwrap();
        let alpha = (1.0 - confidence) / 2.0;
        for (col, &(lo, hi)) in sampled.iter().enumerate() {
            let law = two_env_bootstrap_law(rows[0][col], rows[1][col]);
            let exact_lo = discrete_quantile(&law, alpha);
            let exact_hi = discrete_quantile(&law, 1.0 - alpha);
            for (s, e) in [(lo, exact_lo), (hi, exact_hi)] {
                let rel = (s - e).abs() / e.abs();
                worst_rel = worst_rel.max(rel);
                if rel > 0.01 {
                    problems.push(format!("confidence {confidence}, K = {}: sampled {s}, enumerated {e}", ks[col]));
                }
            }
        }
    }
    let same = LossCurve::new("p", ks.clone(), vec![0, 1], vec![rows[0].clone(), rows[0].clone()]).unwrap();
    for (lo, hi) in bootstrap_ci(&same, &BootstrapConfig::default()).unwrap() {
        if hi - lo != 0.0 {
            problems.push(format!("identical environments gave width {}", hi - lo));
        }
    }
    if problems.is_empty() {
        Outcome::Pass(format!("worst relative endpoint gap {worst_rel:.1e}; identical environments give zero width"))
    } else {
        Outcome::Fail(problems.join("; "))
    }
}

fn dataset_statistics() -> Outcome {
    let Some(dir) = std::env::var_os(DATASET_ENV) else {
        return Outcome::Skip(format!("set {DATASET_ENV} to a directory with {FEEDBACK_FILE} and {MANIFEST_FILE}"));
    };
    let dir = Path::new(&dir);
    let matrix = match ingest(&dir.join(FEEDBACK_FILE), &dir.join(MANIFEST_FILE)) {
        Ok(m) => m,
        Err(e) => return Outcome::Fail(format!("ingest failed: {e}")),
    };
    let stats = match noise_stats(&matrix) {
        Ok(s) => s,
        Err(e) => return Outcome::Fail(format!("noise statistics failed: {e}")),
    };
    let expected = [
        ("mean", stats.mean, 1.54),
        ("std", stats.std, 0.74),
        ("min", stats.min, 0.45),
        ("p25", stats.p25, 1.04),
        ("median", stats.median, 1.45),
        ("p75", stats.p75, 1.84),
        ("max", stats.max, 4.18),
    ];
    let mut problems: Vec<String> = expected
        .iter()
        .filter(|(_, got, want)| (got - want).abs() > 0.02)
        .map(|(name, got, want)| format!("{name} {got:.3} vs {want}"))
        .collect();
    if matrix.num_units() != 1020 || matrix.num_workers() != 39 {
        problems.push(format!("{} units x {} workers", matrix.num_units(), matrix.num_workers()));
    }
    let summary = expected.iter().map(|(n, g, _)| format!("{n} {g:.3}")).collect::<Vec<_>>().join(", ");
    if problems.is_empty() {
        Outcome::Pass(format!("1020 x 39; {summary}"))
    } else {
        Outcome::Fail(problems.join("; "))
    }
}

fn desk_run(granularity: Granularity, out: &Path) -> f64 {
    let config = RunConfig {
        dataset: DatasetSource::Synth(SynthConfig::default()),
        granularity,
        policies: vec![PolicyKind::RegAvg, PolicyKind::Sl],
        k_min: 2,
        k_max: 18,
        train_envs: 10,
        eval_envs: 10,
        ..RunConfig::default()
    };
    let results = pipeline::run(&config, out, jobs(), &quiet).unwrap();
    let m = results.matching.iter().find(|m| m.curve.challenger == "sl").expect("sl matching curve");
    m.k_required_at_ref
}

fn desk_reproduction() -> Outcome {
    let synth = SynthConfig::default();
    if synth.worker_bias_spread <= 0.0 {
        return Outcome::Fail("the default generator has no worker bias".into());
    }
    let dir = tempfile::tempdir().unwrap();
    let mut k = BTreeMap::new();
    for g in [Granularity::Two, Granularity::Five, Granularity::Eleven] {
        let out = dir.path().join(format!("g{}", g.points()));
        k.insert(g.points(), desk_run(g, &out));
    }
    let (k2, k5, k11) = (k[&2], k[&5], k[&11]);
    let near_parity = (18.0 - k2).abs() <= 0.15 * 18.0;
    let ordered = k5 < k2 && k11 <= k5;
    Outcome::check(
        near_parity && ordered,
        format!(
            "matched K at 18: 2-point {k2:.2} (advantage {:.2}), 5-point {k5:.2} ({:.2}), 11-point {k11:.2} ({:.2})",
            18.0 / k2,
            18.0 / k5,
            18.0 / k11
        ),
    )
}

fn random_matrix(scale: &OrdinalScale, units: usize, workers: usize, seed: u64) -> FeedbackMatrix {
    let labels = scale.raw_labels();
    let mut rng = rng_for(seed, "acceptance-sweep", &[labels.len() as u64]);
    let scores = (0..units * workers).map(|_| labels[rng.random_range(0..labels.len())]).collect();
    FeedbackMatrix::new(
        scores,
        scale.clone(),
        (0..units).map(|i| format!("u{i}")).collect(),
        (0..workers).map(|i| format!("w{i}")).collect(),
        Vec::new(),
    )
    .unwrap()
}

fn cdf_validity_sweep() -> Outcome {
    const UNITS: usize = 1000;
    let ks = [1usize, 3, 6];
    let losses = [
        LossKind::CumulativeLog,
        LossKind::StandardLog,
        LossKind::PrefIgnoreNeutral,
        LossKind::PrefKeepNeutral,
    ];
    let mut problems = Vec::new();
    let mut predictions = 0usize;
    for g in [Granularity::Two, Granularity::Five, Granularity::Eleven] {
        let scale = g.scale();
        let matrix = random_matrix(&scale, UNITS, 9, g.points() as u64);
        let split = split_workers(9, 3, 5).unwrap();
        let env = Environment::identity(0, split.input_len());
        let view = EnvironmentView::new(&matrix, &split, &env).unwrap();
        let mut template = MlpConfig::for_granularity(g, 1, scale.len());
        template.max_epochs = 5;
        template.seed = 3;

        let mut rng = rng_for(9, "acceptance-gammas", &[g.points() as u64]);
        let gammas = ks.iter().map(|&k| (k, rng.random::<f64>())).collect();
        let regavg = RegAvgPolicy::new(prior_q0(&matrix, &split).unwrap(), gammas);
        let sl = SlPolicy::fit(&matrix, &split, std::slice::from_ref(&env), &ks, &template, 5).unwrap();
        let slb = SlbPolicy::fit(&matrix, &split, std::slice::from_ref(&env), &ks, &template, 5).unwrap();
        let policies: [&dyn Policy; 3] = [&regavg, &sl, &slb];

        for policy in policies {
            for &k in &ks {
                for unit in 0..UNITS {
                    let pred = policy.predict(&view, k, unit).unwrap();
                    predictions += 1;
                    if !is_valid_cdf(&pred, 1e-9) {
                        problems.push(format!("{} {}-point K = {k} unit {unit}: {:?}", policy.name(), g.points(), pred));
                    }
                    let target = output_cdf(&matrix, &split, unit).unwrap();
                    for loss in losses {
                        match loss.evaluate(&scale, &target, &pred) {
                            Ok(v) if v.is_finite() => {}
                            other => problems.push(format!(
                                "{} {}-point K = {k} unit {unit}: {} loss {other:?}",
                                policy.name(),
                                g.points(),
                                loss.flag()
                            )),
                        }
                    }
                }
            }
        }
    }
    if problems.is_empty() {
        Outcome::Pass(format!("{predictions} predictions valid, all four losses finite"))
    } else {
        let n = problems.len();
        problems.truncate(5);
        Outcome::Fail(format!("{n} problems, first: {}", problems.join("; ")))
    }
}

fn determinism() -> Outcome {
    let config = RunConfig {
        dataset: DatasetSource::Synth(SynthConfig {
            num_units: 300,
            num_workers: 15,
            seed: 4,
            ..SynthConfig::default()
        }),
        granularity: Granularity::Five,
        policies: vec![PolicyKind::RegAvg, PolicyKind::Sl, PolicyKind::Slb],
        k_min: 2,
        k_max: 6,
        train_envs: 3,
        eval_envs: 3,
        output_size: 5,
        mlp: MlpOverrides {
            max_epochs: Some(20),
            ..MlpOverrides::default()
        },
        seed: 17,
        ..RunConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let read = |name: &str| {
        let out = dir.path().join(name);
        pipeline::run(&config, &out, jobs(), &quiet).unwrap();
        std::fs::read(out.join(RESULTS_FILE)).unwrap()
    };
    let first = read("first");
    let second = read("second");
    Outcome::check(
        first == second,
        format!("results files of {} and {} bytes", first.len(), second.len()),
    )
}

fn main() {
    let criteria: Vec<(&'static str, Option<Duration>, fn() -> Outcome)> = vec![
        ("loss motivation table", Some(Duration::from_secs(1)), table_one),
        ("coarsening table", Some(Duration::from_secs(10)), table_three),
        ("gradient fidelity", Some(Duration::from_secs(60)), gradient_fidelity),
        ("regularized averaging oracle", None, regavg_oracle),
        ("matching-curve inversion oracle", None, matching_oracle),
        ("bootstrap by enumeration", None, bootstrap_enumeration),
        ("dataset noise statistics", None, dataset_statistics),
        ("desk-scale synthetic reproduction", Some(Duration::from_secs(30 * 60)), desk_reproduction),
        ("CDF validity sweep", None, cdf_validity_sweep),
        ("end-to-end determinism", None, determinism),
    ];
    let total = criteria.len();
    let mut failed = 0;
    for (i, (title, budget, f)) in criteria.into_iter().enumerate() {
        let report = run(i + 1, title, budget, f);
        println!("{}", report.line());
        if matches!(report.outcome, Outcome::Fail(_)) {
            failed += 1;
        }
    }
    println!("acceptance: {total} criteria, {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
