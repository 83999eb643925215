//! `mdp` — build and audit mapping-distorted image datasets.
//!
//! Every subcommand wraps exactly one library operation; `--json` switches the
//! output to machine-readable form. Exit codes: 0 success, 1 user error
//! (flags, files, infeasible requests), 2 internal error.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use mdp_core::dataset::{assign_pairs, make_synthetic, Dataset, ImageShape, PairingPolicy};
use mdp_core::error::{Error, Result};
use mdp_core::evaluate::{
    leak_fingerprint, mean_ssim, train_consumer, transfer_eval, SsimConfig,
};
use mdp_core::forge::{
    build_augmented_dataset, build_mdp_dataset, DistanceKind, ModifiedDataset, PgdConfig,
};
use mdp_core::model::{
    init_model, Architecture, FeatureLayer, ModelConfig, ModelParams, TrainConfig,
};
use mdp_core::pipeline::{derive_seed, run_experiment, ExperimentConfig};

/// l-inf budget that also accepts `inf`/`none` for the unbounded [0,1]-box
/// variant.
#[derive(Debug, Clone, Copy)]
struct Epsilon(Option<f64>);

impl FromStr for Epsilon {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "inf" | "none" | "unbounded" => Ok(Epsilon(None)),
            other => other
                .parse::<f64>()
                .map(|v| Epsilon(Some(v)))
                .map_err(|_| format!("expected a number or `inf`, got `{other}`")),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "mdp",
    version,
    about = "Build and audit mapping-distorted image datasets",
    propagate_version = true
)]
struct Cli {
    /// Emit machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,

    /// Cap worker threads for example-level parallelism (defaults to all
    /// cores; ignored when built without the `parallel` feature).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic dataset.
    Synth(SynthArgs),
    /// Train the reference model on a clean dataset.
    TrainRef(TrainRefArgs),
    /// Forge a modified dataset by PGD feature matching.
    Forge(ForgeArgs),
    /// Forge a T-pass augmented modified dataset.
    Augment(AugmentArgs),
    /// Train a fresh consumer on a modified dataset and report clean-test accuracy.
    Eval(EvalArgs),
    /// Mean/min SSIM between modified images and their selected sources.
    Ssim(SsimArgs),
    /// Utility evaluation across an architecture family.
    Transfer(TransferArgs),
    /// Agreement rate between a suspect model and the distorted labels.
    LeakCheck(LeakCheckArgs),
    /// Run the full experiment recipe from a JSON config.
    Run(RunArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Number of classes.
    #[arg(long, default_value_t = 3)]
    classes: usize,
    /// Images per class.
    #[arg(long = "per-class", default_value_t = 100)]
    per_class: usize,
    #[arg(long, default_value_t = 16)]
    height: usize,
    #[arg(long, default_value_t = 16)]
    width: usize,
    #[arg(long, default_value_t = 1)]
    channels: usize,
    /// Half-width of the uniform pixel noise.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// Generator seed (falls back to MDP_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Output path for the MDPD file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainRefArgs {
    /// Clean training dataset (MDPD).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "conv-small")]
    arch: Architecture,
    /// Feature layer exposed for forging.
    #[arg(long, default_value = "penultimate")]
    features: FeatureLayer,
    #[arg(long, default_value_t = 15)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    /// Training seed (falls back to MDP_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Output path for the checkpoint.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ForgeArgs {
    /// Source dataset (MDPD).
    #[arg(long)]
    data: PathBuf,
    /// Reference model checkpoint.
    #[arg(long)]
    model: PathBuf,
    /// PGD iterations.
    #[arg(long, default_value_t = 100)]
    steps: u32,
    /// PGD step size in [0,1] pixel units.
    #[arg(long = "step-size", default_value_t = 0.1)]
    step_size: f64,
    /// l-inf budget around the selected image (`inf` disables the ball).
    #[arg(long, default_value = "0.03137254901960784")]
    eps: Epsilon,
    /// Feature-distance order (2 or inf).
    #[arg(long = "p", default_value = "2")]
    distance: DistanceKind,
    /// How selected images are drawn (any | different-class).
    #[arg(long, default_value = "different-class")]
    pairing: PairingPolicy,
    /// Plain gradient steps instead of sign steps.
    #[arg(long = "plain-grad")]
    plain_grad: bool,
    /// Pairing seed (falls back to MDP_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Output path for the modified dataset.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AugmentArgs {
    #[command(flatten)]
    forge: ForgeArgs,
    /// Number of independent forging passes (T).
    #[arg(long, default_value_t = 2)]
    passes: u32,
}

#[derive(Args)]
struct EvalArgs {
    /// Modified dataset to train on.
    #[arg(long)]
    modified: PathBuf,
    /// Clean test dataset.
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value = "conv-small")]
    arch: Architecture,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    /// Consumer training seed (falls back to MDP_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Optionally persist the trained consumer checkpoint.
    #[arg(long = "save-model")]
    save_model: Option<PathBuf>,
}

#[derive(Args)]
struct SsimArgs {
    /// Modified dataset.
    #[arg(long)]
    modified: PathBuf,
    /// Source dataset the selected indices resolve in.
    #[arg(long)]
    source: PathBuf,
    /// Odd window size; picked from the image size when absent.
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Args)]
struct TransferArgs {
    #[arg(long)]
    modified: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Comma-separated architecture list (at least two).
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "conv-small,conv-wide,conv-deep"
    )]
    archs: Vec<Architecture>,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct LeakCheckArgs {
    /// Suspect model checkpoint.
    #[arg(long)]
    model: PathBuf,
    /// Modified dataset whose distorted labels the suspect is checked against.
    #[arg(long)]
    modified: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long, required_unless_present = "print_default_config")]
    config: Option<PathBuf>,
    /// Override config values by dotted path, e.g. `--set pgd.steps=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Redirect the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the default desk-scale config and exit.
    #[arg(long = "print-default-config")]
    print_default_config: bool,
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    if let Some(jobs) = cli.jobs {
        mdp_core::par::configure_threads(jobs);
    }
    let json = cli.json;
    match dispatch(cli.command, json) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_user_error() {
                1
            } else {
                2
            }
        }
    }
}

fn dispatch(command: Command, json: bool) -> Result<()> {
    match command {
        Command::Synth(args) => cmd_synth(args, json),
        Command::TrainRef(args) => cmd_train_ref(args, json),
        Command::Forge(args) => cmd_forge(args, json),
        Command::Augment(args) => cmd_augment(args, json),
        Command::Eval(args) => cmd_eval(args, json),
        Command::Ssim(args) => cmd_ssim(args, json),
        Command::Transfer(args) => cmd_transfer(args, json),
        Command::LeakCheck(args) => cmd_leak_check(args, json),
        Command::Run(args) => cmd_run(args, json),
    }
}

/// `--seed` wins, then the MDP_SEED environment variable, then 0.
fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("MDP_SEED") {
        Ok(text) => text.trim().parse::<u64>().map_err(|_| {
            Error::InvalidArgument(format!("MDP_SEED value `{text}` is not an unsigned integer"))
        }),
        Err(_) => Ok(0),
    }
}

fn emit(json: bool, value: serde_json::Value, human: String) {
    if json {
        println!("{}", serde_json::to_string_pretty(&value).expect("report serializes"));
    } else {
        print!("{human}");
    }
}

fn cmd_synth(args: SynthArgs, json: bool) -> Result<()> {
    let seed = resolve_seed(args.seed)?;
    let shape = ImageShape::new(args.height, args.width, args.channels);
    let ds = make_synthetic(args.classes, args.per_class, shape, args.noise, seed)?;
    let digest = ds.save(&args.out)?;
    emit(
        json,
        serde_json::json!({
            "path": args.out,
            "sha256": digest,
            "images": ds.len(),
            "classes": ds.num_classes(),
            "shape": shape.to_string(),
            "seed": seed,
        }),
        format!(
            "wrote {} ({} images, {} classes, {})\nsha256 {}\n",
            args.out.display(),
            ds.len(),
            ds.num_classes(),
            shape,
            digest
        ),
    );
    Ok(())
}

fn cmd_train_ref(args: TrainRefArgs, json: bool) -> Result<()> {
    let seed = resolve_seed(args.seed)?;
    let data = Dataset::load(&args.data)?;
    let config = ModelConfig {
        arch: args.arch,
        input_shape: data.shape(),
        num_classes: data.num_classes(),
        feature_layer: args.features,
    };
    let tc = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch,
        learning_rate: args.lr,
        momentum: args.momentum,
        seed,
    };
    let fresh = init_model(config, derive_seed(seed, "init"))?;
    let (model, history) = fresh.train(&data, &tc)?;
    let digest = model.save(&args.out)?;
    let (loss, accuracy) =
        (history.final_loss().unwrap_or(f64::NAN), history.final_accuracy().unwrap_or(f64::NAN));
    emit(
        json,
        serde_json::json!({
            "path": args.out,
            "sha256": digest,
            "arch": args.arch.to_string(),
            "train_loss": loss,
            "train_accuracy": accuracy,
            "epochs": args.epochs,
            "seed": seed,
        }),
        format!(
            "trained {} on {} ({} epochs)\ntrain loss {:.4}, train accuracy {:.4}\nwrote {} (sha256 {})\n",
            args.arch,
            args.data.display(),
            args.epochs,
            loss,
            accuracy,
            args.out.display(),
            digest
        ),
    );
    Ok(())
}

fn pgd_config_from(args: &ForgeArgs) -> PgdConfig {
    PgdConfig {
        steps: args.steps,
        step_size: args.step_size,
        epsilon: args.eps.0,
        distance: args.distance,
        sign_steps: !args.plain_grad,
    }
}

fn forge_summary(
    json: bool,
    out: &std::path::Path,
    digest: &str,
    modified: &ModifiedDataset,
    seed: u64,
) {
    emit(
        json,
        serde_json::json!({
            "path": out,
            "sha256": digest,
            "examples": modified.len(),
            "passes": modified.passes(),
            "mean_initial_distance": modified.mean_initial_distance(),
            "mean_final_distance": modified.mean_final_distance(),
            "seed": seed,
        }),
        format!(
            "forged {} examples in {} pass(es)\nmean feature distance {:.4} -> {:.4}\nwrote {} (sha256 {})\n",
            modified.len(),
            modified.passes(),
            modified.mean_initial_distance(),
            modified.mean_final_distance(),
            out.display(),
            digest
        ),
    );
}

fn cmd_forge(args: ForgeArgs, json: bool) -> Result<()> {
    let seed = resolve_seed(args.seed)?;
    let data = Dataset::load(&args.data)?;
    let model = ModelParams::load(&args.model)?;
    let cfg = pgd_config_from(&args);
    let pairing = assign_pairs(&data, args.pairing, seed)?;
    let modified = build_mdp_dataset(&model, &data, &pairing, &cfg)?;
    let digest = modified.save(&args.out)?;
    forge_summary(json, &args.out, &digest, &modified, seed);
    Ok(())
}

fn cmd_augment(args: AugmentArgs, json: bool) -> Result<()> {
    let seed = resolve_seed(args.forge.seed)?;
    let data = Dataset::load(&args.forge.data)?;
    let model = ModelParams::load(&args.forge.model)?;
    let cfg = pgd_config_from(&args.forge);
    let modified =
        build_augmented_dataset(&model, &data, args.forge.pairing, args.passes, &cfg, seed)?;
    let digest = modified.save(&args.forge.out)?;
    forge_summary(json, &args.forge.out, &digest, &modified, seed);
    Ok(())
}

fn cmd_eval(args: EvalArgs, json: bool) -> Result<()> {
    let seed = resolve_seed(args.seed)?;
    let modified = ModifiedDataset::load(&args.modified)?;
    let test = Dataset::load(&args.test)?;
    let config = ModelConfig {
        arch: args.arch,
        input_shape: modified.shape(),
        num_classes: modified.num_classes(),
        feature_layer: FeatureLayer::Penultimate,
    };
    let tc = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch,
        learning_rate: args.lr,
        momentum: args.momentum,
        seed,
    };
    let consumer = train_consumer(&modified, &config, &tc)?;
    let accuracy = consumer.evaluate(&test)?;
    let saved = match &args.save_model {
        Some(path) => Some((path.clone(), consumer.save(path)?)),
        None => None,
    };
    emit(
        json,
        serde_json::json!({
            "arch": args.arch.to_string(),
            "clean_test_accuracy": accuracy,
            "seed": seed,
            "saved_model": saved.as_ref().map(|(p, h)| serde_json::json!({"path": p, "sha256": h})),
        }),
        {
            let mut text = format!("clean-test accuracy of {}: {:.4}\n", args.arch, accuracy);
            if let Some((path, digest)) = &saved {
                text.push_str(&format!("wrote {} (sha256 {})\n", path.display(), digest));
            }
            text
        },
    );
    Ok(())
}

fn cmd_ssim(args: SsimArgs, json: bool) -> Result<()> {
    let modified = ModifiedDataset::load(&args.modified)?;
    let source = Dataset::load(&args.source)?;
    let cfg = match args.window {
        Some(w) => SsimConfig::with_window(w),
        None => SsimConfig::for_shape(source.shape()),
    };
    let stats = mean_ssim(&modified, &source, &cfg)?;
    emit(
        json,
        serde_json::json!({
            "mean": stats.mean,
            "min": stats.min,
            "window": cfg.window,
            "examples": modified.len(),
        }),
        format!(
            "ssim over {} pairs (window {}): mean {:.4}, min {:.4}\n",
            modified.len(),
            cfg.window,
            stats.mean,
            stats.min
        ),
    );
    Ok(())
}

fn cmd_transfer(args: TransferArgs, json: bool) -> Result<()> {
    let seed = resolve_seed(args.seed)?;
    let modified = ModifiedDataset::load(&args.modified)?;
    let test = Dataset::load(&args.test)?;
    let configs: Vec<ModelConfig> = args
        .archs
        .iter()
        .map(|arch| ModelConfig {
            arch: *arch,
            input_shape: modified.shape(),
            num_classes: modified.num_classes(),
            feature_layer: FeatureLayer::Penultimate,
        })
        .collect();
    let tc = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch,
        learning_rate: args.lr,
        momentum: args.momentum,
        seed,
    };
    let table = transfer_eval(&modified, &configs, &test, &tc)?;
    let mut text = String::new();
    let width = table.iter().map(|t| t.architecture.len()).max().unwrap_or(0);
    for entry in &table {
        text.push_str(&format!("{:<width$}  {:.4}\n", entry.architecture, entry.accuracy));
    }
    emit(json, serde_json::json!({ "transfer": table, "seed": seed }), text);
    Ok(())
}

fn cmd_leak_check(args: LeakCheckArgs, json: bool) -> Result<()> {
    let suspect = ModelParams::load(&args.model)?;
    let modified = ModifiedDataset::load(&args.modified)?;
    let agreement = leak_fingerprint(&suspect, &modified)?;
    let chance = 1.0 / modified.num_classes() as f64;
    emit(
        json,
        serde_json::json!({
            "agreement": agreement,
            "chance": chance,
            "examples": modified.len(),
        }),
        format!(
            "distorted-label agreement: {:.4} over {} examples (chance {:.4})\n",
            agreement,
            modified.len(),
            chance
        ),
    );
    Ok(())
}

/// Applies one `key=value` override onto the config JSON by dotted path.
/// Values parse as JSON scalars, falling back to plain strings.
fn apply_override(root: &mut serde_json::Value, spec: &str) -> Result<()> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| {
        Error::InvalidArgument(format!("override `{spec}` is not of the form key=value"))
    })?;
    let mut node = &mut *root;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        node = node.get_mut(part).ok_or_else(|| {
            Error::InvalidArgument(format!("override path `{key}` has no component `{part}`"))
        })?;
    }
    let leaf = parts.last().expect("split always yields a component");
    let object = node.as_object_mut().ok_or_else(|| {
        Error::InvalidArgument(format!("override path `{key}` does not address an object field"))
    })?;
    let value =
        serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    object.insert(leaf.to_string(), value);
    Ok(())
}

fn cmd_run(args: RunArgs, json: bool) -> Result<()> {
    if args.print_default_config {
        print!("{}", ExperimentConfig::desk_default().to_json_pretty()?);
        return Ok(());
    }
    let path = args.config.expect("clap enforces --config");
    let text = std::fs::read_to_string(&path)?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    for spec in &args.overrides {
        apply_override(&mut value, spec)?;
    }
    if let Some(out) = &args.out {
        value["output_dir"] = serde_json::json!(out);
    }
    let cfg = ExperimentConfig::from_json(&value.to_string())?;
    let report = run_experiment(&cfg)?;
    emit(
        json,
        serde_json::to_value(&report)?,
        format!(
            "{}report written to {}\n",
            report.render_table(),
            cfg.output_dir.join("report.json").display()
        ),
    );
    Ok(())
}
