//! End-to-end experiment runs: split, coarsen, prior, gamma tuning, loss
//! curves, bootstrap intervals and matching curves, written to an output
//! directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{ingest, synth_generate, SynthConfig};
use crate::error::{Error, Result};
use crate::evaluation::{advantage, bootstrap_ci, matching_curve, run_experiment, BootstrapConfig, LossCurve, MatchingCurve};
use crate::feedback::{prior_q0, sample_environments, split_workers, Cdf, EnvRole, FeedbackMatrix, Granularity};
use crate::losses::LossKind;
use crate::nn::MlpConfig;
use crate::policies::{tune_gamma, GammaTuneResult, Policy, PolicyKind, RegAvgPolicy, SlPolicy, SlbPolicy, GAMMA_GRID};
use crate::seed::derive_seed;

pub const SCHEMA_VERSION: u32 = 1;
pub const RESULTS_FILE: &str = "results.json";
pub const LOSSES_FILE: &str = "losses.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSource {
    Csv { csv: PathBuf, manifest: PathBuf },
    Synth(SynthConfig),
}

/// Optional replacements for the per-granularity MLP defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden_layers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropout_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_decay: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_fraction: Option<f64>,
}

impl MlpOverrides {
    pub fn apply(&self, mut c: MlpConfig) -> MlpConfig {
        if let Some(v) = self.hidden_layers {
            c.hidden_layers = v;
        }
        if let Some(v) = self.hidden_size {
            c.hidden_size = v;
        }
        if let Some(v) = self.dropout_p {
            c.dropout_p = v;
        }
        if let Some(v) = self.learning_rate {
            c.learning_rate = v;
        }
        if let Some(v) = self.weight_decay {
            c.weight_decay = v;
        }
        if let Some(v) = self.batch_size {
            c.batch_size = v;
        }
        if let Some(v) = self.patience {
            c.patience = v;
        }
        if let Some(v) = self.max_epochs {
            c.max_epochs = v;
        }
        if let Some(v) = self.val_fraction {
            c.val_fraction = v;
        }
        c
    }
}

/// Everything that determines a run's results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    pub granularity: Granularity,
    /// The first listed policy is the matching reference unless RegAvg is
    /// present, in which case RegAvg is.
    pub policies: Vec<PolicyKind>,
    pub loss: LossKind,
    pub k_min: usize,
    pub k_max: usize,
    pub train_envs: usize,
    pub eval_envs: usize,
    pub gamma_grid: Vec<f64>,
    pub output_size: usize,
    pub folds: usize,
    pub mlp: MlpOverrides,
    pub bootstrap: BootstrapConfig,
    pub grid_size: usize,
    pub seed: u64,
    /// Seed of the input/output worker split; defaults to one derived from `seed`.
    pub split_seed: Option<u64>,
    /// Directory of SL / SL_b checkpoints: loaded when present, written after training otherwise.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::Synth(SynthConfig::default()),
            granularity: Granularity::Eleven,
            policies: vec![PolicyKind::RegAvg, PolicyKind::Sl],
            loss: LossKind::CumulativeLog,
            k_min: 2,
            k_max: 18,
            train_envs: 30,
            eval_envs: 30,
            gamma_grid: GAMMA_GRID.to_vec(),
            output_size: 19,
            folds: 5,
            mlp: MlpOverrides::default(),
            bootstrap: BootstrapConfig::default(),
            grid_size: 100,
            seed: 0,
            split_seed: None,
            checkpoint_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            context: path.display().to_string(),
            source,
        })
    }

    pub fn k_values(&self) -> Vec<usize> {
        (self.k_min..=self.k_max).collect()
    }

    pub fn reference_policy(&self) -> Option<PolicyKind> {
        if self.policies.contains(&PolicyKind::RegAvg) {
            Some(PolicyKind::RegAvg)
        } else {
            self.policies.first().copied()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() {
            return Err(Error::invalid("no policies selected"));
        }
        let mut seen = self.policies.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.policies.len() {
            return Err(Error::invalid("a policy is listed twice"));
        }
        if self.k_min == 0 || self.k_min >= self.k_max {
            return Err(Error::invalid(format!("K range {}..={} needs 1 <= k_min < k_max", self.k_min, self.k_max)));
        }
        if self.train_envs == 0 || self.eval_envs == 0 {
            return Err(Error::invalid("environment counts must be positive"));
        }
        if self.gamma_grid.is_empty() || self.gamma_grid.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(Error::invalid("gamma grid must be nonempty with values in [0, 1]"));
        }
        if self.grid_size < 2 {
            return Err(Error::invalid("grid_size must be at least 2"));
        }
        self.bootstrap.validate()
    }

    fn mlp_template(&self, output_dim: usize) -> Result<MlpConfig> {
        let mut c = self.mlp.apply(MlpConfig::for_granularity(self.granularity, self.k_max, output_dim));
        c.seed = derive_seed(self.seed, "mlp", &[]);
        c.validate()?;
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub units: usize,
    pub workers: usize,
    pub input_size: usize,
    pub output_size: usize,
    pub scale_labels: Vec<i32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveResult {
    #[serde(flatten)]
    pub curve: LossCurve,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchingResult {
    #[serde(flatten)]
    pub curve: MatchingCurve,
    pub k_ref: f64,
    pub k_required_at_ref: f64,
    pub advantage_at_ref: f64,
}

impl MatchingResult {
    pub fn new(curve: MatchingCurve) -> Result<Self> {
        let k_ref = *curve.grid.last().expect("grid is nonempty");
        let k_required_at_ref = *curve.k_required.last().expect("grid is nonempty");
        Ok(Self {
            advantage_at_ref: advantage(k_ref, k_required_at_ref)?,
            curve,
            k_ref,
            k_required_at_ref,
        })
    }
}

/// Contents of `results.json`. A failed run keeps whatever stages finished
/// and sets `complete` to false.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResults {
    pub schema_version: u32,
    pub complete: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: RunConfig,
    pub dataset: Option<DatasetSummary>,
    pub q0: Option<Cdf>,
    pub gamma: Option<GammaTuneResult>,
    pub curves: Vec<CurveResult>,
    pub matching: Vec<MatchingResult>,
}

impl RunResults {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let r: RunResults = serde_json::from_str(&text).map_err(|source| Error::Json {
            context: path.display().to_string(),
            source,
        })?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::data(format!("{}: unsupported schema version {}", path.display(), r.schema_version)));
        }
        Ok(r)
    }

    pub fn curve(&self, policy: &str) -> Option<&LossCurve> {
        self.curves.iter().map(|c| &c.curve).find(|c| c.policy == policy)
    }
}

fn load_dataset(source: &DatasetSource) -> Result<FeedbackMatrix> {
    match source {
        DatasetSource::Csv { csv, manifest } => ingest(csv, manifest),
        DatasetSource::Synth(cfg) => Ok(synth_generate(cfg)?.0),
    }
}

fn fit_or_load_sl(dir: Option<&Path>, fit: impl FnOnce() -> Result<SlPolicy>) -> Result<SlPolicy> {
    match dir {
        Some(d) if d.join("index.json").exists() => SlPolicy::load(d),
        Some(d) => {
            let p = fit()?;
            p.save(d)?;
            Ok(p)
        }
        None => fit(),
    }
}

fn fit_or_load_slb(dir: Option<&Path>, fit: impl FnOnce() -> Result<SlbPolicy>) -> Result<SlbPolicy> {
    match dir {
        Some(d) if d.join("index.json").exists() => SlbPolicy::load(d),
        Some(d) => {
            let p = fit()?;
            p.save(d)?;
            Ok(p)
        }
        None => fit(),
    }
}

fn stages(config: &RunConfig, results: &mut RunResults, log: &(dyn Fn(&str) + Sync)) -> Result<()> {
    config.validate().map_err(Error::at_stage("config"))?;
    let ks = config.k_values();

    log("loading dataset");
    let raw = load_dataset(&config.dataset).map_err(Error::at_stage("load"))?;

    log("splitting workers");
    let split_seed = config.split_seed.unwrap_or_else(|| derive_seed(config.seed, "split", &[]));
    let split = split_workers(raw.num_workers(), config.output_size, split_seed).map_err(Error::at_stage("split"))?;
    if config.k_max > split.input_len() {
        return Err(Error::at_stage("split")(Error::invalid(format!(
            "k_max = {} exceeds the {} input workers",
            config.k_max,
            split.input_len()
        ))));
    }

    log("coarsening");
    let matrix = config
        .granularity
        .apply(&raw, derive_seed(config.seed, "coarsen", &[]))
        .map_err(Error::at_stage("coarsen"))?;
    results.dataset = Some(DatasetSummary {
        units: matrix.num_units(),
        workers: matrix.num_workers(),
        input_size: split.input_len(),
        output_size: split.output_len(),
        scale_labels: matrix.scale().raw_labels().to_vec(),
    });

    let q0 = prior_q0(&matrix, &split).map_err(Error::at_stage("prior"))?;
    results.q0 = Some(q0.clone());

    let env_seed = derive_seed(config.seed, "environments", &[]);
    let train_envs =
        sample_environments(split.input_len(), config.train_envs, env_seed, EnvRole::Train).map_err(Error::at_stage("environments"))?;
    let eval_envs =
        sample_environments(split.input_len(), config.eval_envs, env_seed, EnvRole::Eval).map_err(Error::at_stage("environments"))?;

    let template = config.mlp_template(matrix.scale().len()).map_err(Error::at_stage("config"))?;
    let mut policies: Vec<Box<dyn Policy>> = Vec::new();
    for &kind in &config.policies {
        match kind {
            PolicyKind::RegAvg => {
                log("tuning gamma");
                let mut tuned = GammaTuneResult::default();
                for &k in &ks {
                    let r = tune_gamma(&matrix, &split, &q0, &train_envs, k, config.loss, &config.gamma_grid)
                        .map_err(Error::at_stage("tune"))?;
                    tuned.merge(r);
                }
                policies.push(Box::new(RegAvgPolicy::new(q0.clone(), tuned.per_k_gamma.clone())));
                results.gamma = Some(tuned);
            }
            PolicyKind::Sl => {
                log("training SL");
                let dir = config.checkpoint_dir.as_ref().map(|d| d.join("sl"));
                let p = fit_or_load_sl(dir.as_deref(), || {
                    SlPolicy::fit(&matrix, &split, &eval_envs, &ks, &template, config.folds)
                })
                .map_err(Error::at_stage("train"))?;
                policies.push(Box::new(p));
            }
            PolicyKind::Slb => {
                log("training SL_b");
                let dir = config.checkpoint_dir.as_ref().map(|d| d.join("slb"));
                let p = fit_or_load_slb(dir.as_deref(), || {
                    SlbPolicy::fit(&matrix, &split, &eval_envs, &ks, &template, config.folds)
                })
                .map_err(Error::at_stage("train"))?;
                policies.push(Box::new(p));
            }
        }
    }

    for p in &policies {
        log(&format!("evaluating {}", p.name()));
        let curve = run_experiment(&matrix, &split, &eval_envs, p.as_ref(), &ks, config.loss).map_err(Error::at_stage("evaluate"))?;
        let ci = bootstrap_ci(&curve, &config.bootstrap).map_err(Error::at_stage("bootstrap"))?;
        results.curves.push(CurveResult {
            ci_low: ci.iter().map(|c| c.0).collect(),
            ci_high: ci.iter().map(|c| c.1).collect(),
            curve,
        });
    }

    log("matching");
    let reference = config.reference_policy().expect("validated nonempty").name();
    let ref_curve = results.curve(reference).expect("reference was evaluated").clone();
    let challengers: Vec<LossCurve> = results
        .curves
        .iter()
        .map(|c| c.curve.clone())
        .filter(|c| c.policy != reference)
        .collect();
    for ch in challengers {
        let m = matching_curve(&ref_curve, &ch, config.grid_size, &config.bootstrap).map_err(Error::at_stage("matching"))?;
        results.matching.push(MatchingResult::new(m).map_err(Error::at_stage("matching"))?);
    }
    Ok(())
}

/// Runs every stage with at most `jobs` worker threads and writes
/// `results.json`, `losses.csv` and one `matching_<challenger>.csv` per
/// challenger under `out_dir`. Results do not depend on `jobs`.
pub fn run(config: &RunConfig, out_dir: &Path, jobs: usize, log: &(dyn Fn(&str) + Sync)) -> Result<RunResults> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {jobs} worker threads: {e}")))?;
    let mut results = RunResults {
        schema_version: SCHEMA_VERSION,
        complete: false,
        error: None,
        config: config.clone(),
        dataset: None,
        q0: None,
        gamma: None,
        curves: Vec::new(),
        matching: Vec::new(),
    };
    let outcome = pool.install(|| stages(config, &mut results, log));
    match &outcome {
        Ok(()) => results.complete = true,
        Err(e) => results.error = Some(e.to_string()),
    }
    write_outputs(&results, out_dir).map_err(Error::at_stage("write"))?;
    outcome.map(|()| results)
}

pub fn write_results_json(results: &RunResults, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(results).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn write_matching_csv(m: &MatchingCurve, path: &Path) -> Result<()> {
    let ctx = || path.display().to_string();
    let mut w = csv::Writer::from_path(path).map_err(|source| Error::Csv { context: ctx(), source })?;
    w.write_record(["grid_k", "required_k", "ci_low", "ci_high"])
        .map_err(|source| Error::Csv { context: ctx(), source })?;
    for i in 0..m.grid.len() {
        w.write_record([m.grid[i], m.k_required[i], m.ci_low[i], m.ci_high[i]].map(|v| v.to_string()))
            .map_err(|source| Error::Csv { context: ctx(), source })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_outputs(results: &RunResults, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_results_json(results, &out_dir.join(RESULTS_FILE))?;

    let path = out_dir.join(LOSSES_FILE);
    let ctx = || path.display().to_string();
    let mut w = csv::Writer::from_path(&path).map_err(|source| Error::Csv { context: ctx(), source })?;
    w.write_record(["policy", "env", "k", "loss"])
        .map_err(|source| Error::Csv { context: ctx(), source })?;
    for c in &results.curves {
        let c = &c.curve;
        for (e, row) in c.env_ids.iter().zip(&c.per_env_loss) {
            for (k, v) in c.k_values.iter().zip(row) {
                w.write_record([c.policy.clone(), e.to_string(), k.to_string(), v.to_string()])
                    .map_err(|source| Error::Csv { context: ctx(), source })?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    for m in &results.matching {
        write_matching_csv(&m.curve, &out_dir.join(format!("matching_{}.csv", m.curve.challenger)))?;
    }
    Ok(())
}
