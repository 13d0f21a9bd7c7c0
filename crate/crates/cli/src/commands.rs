use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use vbll_core::inference::predictions_csv;
use vbll_core::rng::{self, role_seed};
use vbll_core::selection::confusion_csv;
use vbll_core::{
    evaluate, generate_synthetic, load_csv, smote_oversample, stratified_split, threshold_sweep,
    train_from, uncertainty_scores, write_csv, EvalSettings, LayerInit, Measure, SplitRatios,
    SummaryReport, VBLinearLayer,
};

use crate::config::RunConfig;
use crate::error::CliError;

fn parse_list<T: std::str::FromStr>(flag: &str, raw: &str) -> Result<Vec<T>, CliError> {
    raw.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| CliError::validation(format!("--{flag}: cannot parse `{v}`")))
        })
        .collect()
}

fn require_out(out: Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    out.ok_or_else(|| CliError::validation(format!("--out <{what}> is required")))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    /// One count for every class, or a comma-separated list.
    #[arg(long)]
    per_class: Option<String>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
}

pub fn gen(args: GenArgs, mut cfg: RunConfig, out: Option<PathBuf>) -> Result<(), CliError> {
    let out = require_out(out, "file")?;
    let syn = &mut cfg.synthetic;
    if let Some(k) = args.classes {
        syn.num_classes = k;
        if syn.samples_per_class.len() != k {
            let n = syn.samples_per_class.first().copied().unwrap_or(1000);
            syn.samples_per_class = vec![n; k];
        }
    }
    if let Some(d) = args.dim {
        syn.feature_dim = d;
    }
    if let Some(raw) = args.per_class {
        let counts: Vec<usize> = parse_list("per-class", &raw)?;
        syn.samples_per_class = if counts.len() == 1 {
            vec![counts[0]; syn.num_classes]
        } else {
            counts
        };
    }
    if let Some(s) = args.separation {
        syn.class_separation = s;
    }
    if let Some(s) = args.noise {
        syn.noise_scale = s;
    }
    let ds = generate_synthetic(syn, role_seed(cfg.seed, "gen"))?;
    write_csv(&ds, &out)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    input: PathBuf,
    /// `train,val,test` fractions.
    #[arg(long)]
    ratios: Option<String>,
}

pub fn split(args: SplitArgs, mut cfg: RunConfig, out: Option<PathBuf>) -> Result<(), CliError> {
    let dir = require_out(out, "dir")?;
    if let Some(raw) = args.ratios {
        let r: Vec<f64> = parse_list("ratios", &raw)?;
        if r.len() != 3 {
            return Err(CliError::validation("--ratios needs three values"));
        }
        cfg.split = SplitRatios::new(r[0], r[1], r[2])?;
    }
    let ds = load_csv(&args.input)?;
    let (tr, va, te) = stratified_split(&ds, &cfg.split, role_seed(cfg.seed, "split"))?;
    ensure_dir(&dir)?;
    write_csv(&tr, dir.join("train.csv"))?;
    write_csv(&va, dir.join("val.csv"))?;
    write_csv(&te, dir.join("test.csv"))?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct BalanceArgs {
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated per-class targets (default: largest class count).
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    k_neighbors: Option<usize>,
}

pub fn balance(
    args: BalanceArgs,
    mut cfg: RunConfig,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let out = require_out(out, "file")?;
    if let Some(raw) = args.target {
        cfg.balance.target_counts = Some(parse_list("target", &raw)?);
    }
    if let Some(k) = args.k_neighbors {
        cfg.balance.k_neighbors = k;
    }
    let ds = load_csv(&args.input)?;
    let target = cfg.balance.target_counts.clone().unwrap_or_else(|| {
        let max = ds.class_counts().into_iter().max().unwrap_or(0);
        vec![max; ds.num_classes()]
    });
    let balanced = smote_oversample(
        &ds,
        &target,
        cfg.balance.k_neighbors,
        role_seed(cfg.seed, "balance"),
    )?;
    write_csv(&balanced, &out)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    val: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Flipout passes per minibatch.
    #[arg(long)]
    train_mc: Option<usize>,
    /// Early-stopping patience in epochs.
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    prior_scale: Option<f64>,
}

pub fn train(args: TrainArgs, mut cfg: RunConfig, out: Option<PathBuf>) -> Result<(), CliError> {
    let dir = require_out(out, "dir")?;
    let t = &mut cfg.train;
    if let Some(v) = args.epochs {
        t.epochs = v;
    }
    if let Some(v) = args.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = args.lr {
        t.learning_rate = v;
    }
    if let Some(v) = args.train_mc {
        t.train_mc_samples = v;
    }
    if args.patience.is_some() {
        t.early_stop_patience = args.patience;
    }
    if let Some(v) = args.prior_scale {
        cfg.init.prior_scale = v;
    }
    t.seed = role_seed(cfg.seed, "train");
    t.validate()?;

    let tr = load_csv(&args.train)?;
    let va = load_csv(&args.val)?;
    tr.check_compatible(&va)?;
    let layer = VBLinearLayer::init(
        tr.feature_dim(),
        tr.num_classes(),
        &cfg.init,
        role_seed(cfg.seed, "init"),
    )?;
    let (layer, trace) = train_from(layer, &tr, &va, &cfg.train)?;
    ensure_dir(&dir)?;
    layer.save(dir.join("model.json"))?;
    write(&dir.join("trace.csv"), &trace.to_csv())?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct InferenceArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// confidence, entropy or mutual_info.
    #[arg(long)]
    measure: Option<Measure>,
    /// Monte Carlo weight draws.
    #[arg(long)]
    mc_samples: Option<usize>,
}

impl InferenceArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(m) = self.measure {
            cfg.measure = m;
        }
        if let Some(s) = self.mc_samples {
            cfg.mc_samples = s;
        }
    }

    fn load(&self) -> Result<(VBLinearLayer, vbll_core::FeatureDataset), CliError> {
        let layer = VBLinearLayer::load(&self.model)?;
        let ds = load_csv(&self.data)?;
        if ds.feature_dim() != layer.feature_dim() || ds.num_classes() != layer.num_classes() {
            return Err(CliError::validation(format!(
                "model is K={} D={}, data is K={} D={}",
                layer.num_classes(),
                layer.feature_dim(),
                ds.num_classes(),
                ds.feature_dim()
            )));
        }
        Ok((layer, ds))
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    inference: InferenceArgs,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    ece_bins: Option<usize>,
    /// Compute ECE on accepted samples only.
    #[arg(long)]
    ece_accepted_only: bool,
    /// Also write every Monte Carlo draw to posterior.csv.
    #[arg(long)]
    posterior: bool,
}

pub fn eval(args: EvalArgs, mut cfg: RunConfig, out: Option<PathBuf>) -> Result<(), CliError> {
    let dir = require_out(out, "dir")?;
    args.inference.apply(&mut cfg);
    if let Some(t) = args.threshold {
        cfg.threshold = t;
    }
    if let Some(b) = args.ece_bins {
        cfg.ece_bins = b;
    }
    cfg.ece_accepted_only |= args.ece_accepted_only;
    let (layer, ds) = args.inference.load()?;

    let settings = EvalSettings {
        mc_samples: cfg.mc_samples,
        threshold: cfg.threshold,
        measure: cfg.measure,
        ece_bins: cfg.ece_bins,
        histogram_bins: cfg.histogram_bins,
        ece_accepted_only: cfg.ece_accepted_only,
    };
    let result = evaluate(&layer, &ds, &settings, role_seed(cfg.seed, "inference"))?;
    let summary = SummaryReport::from_evaluation(&result, cfg.seed);

    ensure_dir(&dir)?;
    write(&dir.join("summary.json"), &summary.to_json())?;
    write(&dir.join("calibration.json"), &result.calibration.to_json())?;
    write(
        &dir.join("predictions.csv"),
        &predictions_csv(&result.predictions, &result.scores, ds.labels()),
    )?;
    write(&dir.join("histogram.csv"), &result.histogram.to_csv())?;
    write(
        &dir.join("confusion_all.csv"),
        &confusion_csv(&result.rejection.confusion_all),
    )?;
    write(
        &dir.join("confusion_accepted.csv"),
        &confusion_csv(&result.rejection.confusion_accepted),
    )?;
    if args.posterior {
        write(
            &dir.join("posterior.csv"),
            &result.predictions.posterior_csv(),
        )?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    inference: InferenceArgs,
    /// Comma-separated, strictly increasing thresholds.
    #[arg(long)]
    grid: Option<String>,
}

pub fn sweep(args: SweepArgs, mut cfg: RunConfig, out: Option<PathBuf>) -> Result<(), CliError> {
    let out = require_out(out, "file")?;
    args.inference.apply(&mut cfg);
    if let Some(raw) = &args.grid {
        cfg.grid = parse_list("grid", raw)?;
    }
    let (layer, ds) = args.inference.load()?;
    let pred = vbll_core::predictive_posterior(
        &layer,
        &ds,
        cfg.mc_samples,
        role_seed(cfg.seed, "inference"),
    )?;
    let scores = uncertainty_scores(&pred);
    let curve = threshold_sweep(
        &scores,
        pred.predicted(),
        ds.labels(),
        &cfg.grid,
        cfg.measure,
        ds.num_classes(),
    )?;
    write(&out, &curve.to_csv())
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 4)]
    dim: usize,
    #[arg(long, default_value_t = 8)]
    batch: usize,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    /// Training-set size used for the KL weight.
    #[arg(long, default_value_t = 32)]
    n_train: usize,
}

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

pub fn gradcheck(args: GradcheckArgs, cfg: RunConfig) -> Result<(), CliError> {
    if args.classes < 2 || args.dim < 1 || args.batch < 1 || args.n_train < args.batch {
        return Err(CliError::validation(
            "gradcheck needs classes >= 2, dim >= 1, 1 <= batch <= n-train",
        ));
    }
    if args.step.is_nan() || args.step <= 0.0 {
        return Err(CliError::validation("--step must be positive"));
    }
    let seed = role_seed(cfg.seed, "gradcheck");
    let init = LayerInit {
        mu_init_scale: 1.0,
        rho_init: 0.0,
        prior_scale: 1.0,
    };
    let mut layer = VBLinearLayer::init(args.dim, args.classes, &init, seed)?;
    let mut r = rng::stream_at(seed, &[1]);
    for rho in layer.weight_rho.iter_mut().chain(layer.bias_rho.iter_mut()) {
        *rho = r.random_range(-3.0..0.0);
    }
    let x = Array2::from_shape_simple_fn((args.batch, args.dim), || {
        r.sample::<f64, _>(StandardNormal)
    });
    let labels: Vec<usize> = (0..args.batch)
        .map(|_| r.random_range(0..args.classes))
        .collect();

    let err = vbll_core::gradcheck(&layer, x.view(), &labels, args.n_train, args.step, seed)?;
    println!("max relative error: {err:.2e}");
    if err <= GRADCHECK_TOLERANCE {
        Ok(())
    } else {
        Err(CliError::numerical(format!(
            "gradient check failed: {err:.2e} exceeds {GRADCHECK_TOLERANCE:e}"
        )))
    }
}
