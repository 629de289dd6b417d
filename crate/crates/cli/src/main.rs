use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use granular::data::{export_canonical, ingest, noise_stats, read_manifest, synth_generate, write_truth, SynthConfig};
use granular::evaluation::{matching_curve, BootstrapConfig};
use granular::feedback::Granularity;
use granular::losses::LossKind;
use granular::pipeline::{self, DatasetSource, MatchingResult, RunConfig, RunResults};
use granular::policies::PolicyKind;
use granular::Error;
use serde_json::json;

#[derive(Parser)]
#[command(name = "granular", version, about = "Aggregation experiments on granular ordinal feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a feedback CSV + manifest and write the canonical copy.
    Ingest(IngestArgs),
    /// Generate a synthetic dataset and its population CDFs.
    Synth(SynthArgs),
    /// Coarsen an 11-point dataset to 5 or 2 points.
    Coarsen(CoarsenArgs),
    /// Worker noise statistics over repeated task units.
    Stats(StatsArgs),
    /// Run the full experiment pipeline.
    Run(Box<RunArgs>),
    /// Recompute a matching curve from a results file.
    Match(MatchArgs),
}

#[derive(Args)]
struct DatasetArgs {
    /// Long-format CSV with header unit_id,worker_id,score.
    #[arg(long)]
    csv: PathBuf,
    /// JSON manifest (scale_labels, repeated_pairs, split_seed).
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// JSON file with generator settings; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    units: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Scale points: 2, 5 or 11.
    #[arg(long)]
    points: Option<Granularity>,
    #[arg(long)]
    location_spread: Option<f64>,
    #[arg(long)]
    polarization_spread: Option<f64>,
    #[arg(long)]
    bias_spread: Option<f64>,
    #[arg(long)]
    noise_spread: Option<f64>,
    #[arg(long)]
    noise_floor: Option<f64>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CoarsenArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Target granularity: 2 or 5.
    #[arg(long)]
    granularity: Granularity,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Where to write the per-worker table (worker_id,delta).
    #[arg(long)]
    per_worker: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, requires = "manifest")]
    csv: Option<PathBuf>,
    #[arg(long, requires = "csv")]
    manifest: Option<PathBuf>,
    /// Synthetic generator config (JSON) used when no CSV is given.
    #[arg(long, conflicts_with = "csv")]
    synth_config: Option<PathBuf>,
    #[arg(long, conflicts_with = "csv")]
    units: Option<usize>,
    #[arg(long, conflicts_with = "csv")]
    workers: Option<usize>,
    #[arg(long)]
    granularity: Option<Granularity>,
    /// Comma-separated: regavg, sl, slb.
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<PolicyKind>>,
    /// cumlog, stdlog, pref1 or pref2.
    #[arg(long)]
    loss: Option<LossKind>,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    train_envs: Option<usize>,
    #[arg(long)]
    eval_envs: Option<usize>,
    #[arg(long)]
    output_size: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    resamples: Option<usize>,
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    split_seed: Option<u64>,
    /// SL / SL_b checkpoints: reused when present, written otherwise.
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
    /// Worker threads; results are identical for any value.
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MatchArgs {
    /// results.json from a previous run.
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    reference: String,
    #[arg(long)]
    challenger: String,
    #[arg(long, default_value_t = 100)]
    grid_size: usize,
    #[arg(long)]
    resamples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination (grid_k,required_k,ci_low,ci_high).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn read_synth_config(path: &Path) -> granular::Result<SynthConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })
}

fn cmd_ingest(args: IngestArgs) -> granular::Result<()> {
    let m = ingest(&args.dataset.csv, &args.dataset.manifest)?;
    let seed = read_manifest(&args.dataset.manifest)?.split_seed;
    export_canonical(&m, seed, &args.out)?;
    eprintln!("wrote canonical dataset to {}", args.out.display());
    print_json(&json!({
        "units": m.num_units(),
        "workers": m.num_workers(),
        "repeated_pairs": m.repeated_pairs().len(),
        "scale_labels": m.scale().raw_labels(),
    }));
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> granular::Result<()> {
    let mut c: SynthConfig = match &args.config {
        Some(p) => read_synth_config(p)?,
        None => SynthConfig::default(),
    };
    if let Some(v) = args.units {
        c.num_units = v;
    }
    if let Some(v) = args.workers {
        c.num_workers = v;
    }
    if let Some(g) = args.points {
        c.scale = g.scale();
    }
    if let Some(v) = args.location_spread {
        c.unit_location_spread = v;
    }
    if let Some(v) = args.polarization_spread {
        c.unit_polarization_spread = v;
    }
    if let Some(v) = args.bias_spread {
        c.worker_bias_spread = v;
    }
    if let Some(v) = args.noise_spread {
        c.worker_noise_spread = v;
    }
    if let Some(v) = args.noise_floor {
        c.worker_noise_floor = v;
    }
    if let Some(v) = args.repeats {
        c.repeats = v;
    }
    if let Some(v) = args.seed {
        c.seed = v;
    }
    let (m, truth) = synth_generate(&c)?;
    export_canonical(&m, None, &args.out)?;
    write_truth(&m, &truth, &args.out.join("truth.csv"))?;
    eprintln!("wrote synthetic dataset to {}", args.out.display());
    print_json(&json!({
        "units": m.num_units(),
        "workers": m.num_workers(),
        "repeated_pairs": m.repeated_pairs().len(),
        "seed": c.seed,
    }));
    Ok(())
}

fn cmd_coarsen(args: CoarsenArgs) -> granular::Result<()> {
    let m = ingest(&args.dataset.csv, &args.dataset.manifest)?;
    if args.granularity == Granularity::Eleven {
        return Err(Error::InvalidInput("coarsening targets are 2 or 5 points".into()));
    }
    let out = args.granularity.apply(&m, args.seed)?;
    let seed = read_manifest(&args.dataset.manifest)?.split_seed;
    export_canonical(&out, seed, &args.out)?;
    print_json(&json!({
        "units": out.num_units(),
        "workers": out.num_workers(),
        "scale_labels": out.scale().raw_labels(),
    }));
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> granular::Result<()> {
    let m = ingest(&args.dataset.csv, &args.dataset.manifest)?;
    let s = noise_stats(&m)?;
    if let Some(path) = &args.per_worker {
        let mut text = String::from("worker_id,delta\n");
        for (w, d) in &s.per_worker_delta {
            text.push_str(&format!("{w},{d}\n"));
        }
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
    }
    print_json(&json!({
        "repeated_pairs": m.repeated_pairs().len(),
        "mean": s.mean,
        "std": s.std,
        "min": s.min,
        "p25": s.p25,
        "median": s.median,
        "p75": s.p75,
        "max": s.max,
    }));
    Ok(())
}

fn resolve_run_config(args: &RunArgs) -> granular::Result<RunConfig> {
    let mut c = match &args.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let (Some(csv), Some(manifest)) = (&args.csv, &args.manifest) {
        c.dataset = DatasetSource::Csv {
            csv: csv.clone(),
            manifest: manifest.clone(),
        };
    } else {
        if let Some(p) = &args.synth_config {
            c.dataset = DatasetSource::Synth(read_synth_config(p)?);
        }
        if args.units.is_some() || args.workers.is_some() {
            let mut s = match &c.dataset {
                DatasetSource::Synth(s) => s.clone(),
                DatasetSource::Csv { .. } => SynthConfig::default(),
            };
            s.num_units = args.units.unwrap_or(s.num_units);
            s.num_workers = args.workers.unwrap_or(s.num_workers);
            c.dataset = DatasetSource::Synth(s);
        }
    }
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = &args.$field {
                c.$field = v.clone();
            }
        )*};
    }
    set!(granularity, policies, loss, k_min, k_max, train_envs, eval_envs, output_size, folds, seed);
    if args.split_seed.is_some() {
        c.split_seed = args.split_seed;
    }
    if args.checkpoint_dir.is_some() {
        c.checkpoint_dir = args.checkpoint_dir.clone();
    }
    if let Some(v) = args.max_epochs {
        c.mlp.max_epochs = Some(v);
    }
    if let Some(v) = args.resamples {
        c.bootstrap.resamples = v;
    }
    if let Some(v) = args.grid_size {
        c.grid_size = v;
    }
    Ok(c)
}

fn cmd_run(args: &RunArgs) -> granular::Result<()> {
    let config = resolve_run_config(args)?;
    let results = pipeline::run(&config, &args.out, args.jobs, &|msg| eprintln!("[run] {msg}"))?;
    let summary: Vec<_> = results
        .matching
        .iter()
        .map(|m| {
            json!({
                "reference": m.curve.reference,
                "challenger": m.curve.challenger,
                "k_ref": m.k_ref,
                "k_required": m.k_required_at_ref,
                "advantage": m.advantage_at_ref,
            })
        })
        .collect();
    print_json(&json!({
        "out": args.out,
        "complete": results.complete,
        "matching": summary,
    }));
    Ok(())
}

fn cmd_match(args: MatchArgs) -> granular::Result<()> {
    let results = RunResults::load(&args.results)?;
    let find = |name: &str| {
        results
            .curve(name)
            .ok_or_else(|| Error::InvalidInput(format!("no curve for policy `{name}` in {}", args.results.display())))
    };
    let reference = find(&args.reference)?;
    let challenger = find(&args.challenger)?;
    let bootstrap = BootstrapConfig {
        resamples: args.resamples.unwrap_or(results.config.bootstrap.resamples),
        seed: args.seed.unwrap_or(results.config.bootstrap.seed),
        ..results.config.bootstrap
    };
    let m = MatchingResult::new(matching_curve(reference, challenger, args.grid_size, &bootstrap)?)?;
    if let Some(out) = &args.out {
        pipeline::write_matching_csv(&m.curve, out)?;
    }
    print_json(&json!({
        "reference": m.curve.reference,
        "challenger": m.curve.challenger,
        "k_ref": m.k_ref,
        "k_required": m.k_required_at_ref,
        "advantage": m.advantage_at_ref,
        "unattained_points": m.curve.unattained.iter().filter(|&&u| u).count(),
    }));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Coarsen(a) => cmd_coarsen(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Run(a) => cmd_run(&a),
        Command::Match(a) => cmd_match(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
