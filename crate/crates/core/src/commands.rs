//! The `fit`, `predict`, `bench` and `synth` subcommands.
//!
//! Argument structs derive `clap::Args` so the binary only has to dispatch;
//! every command is also callable directly with an output sink.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use crate::archive::{load_model, ModelArchive};
use crate::classifier::{evaluate, fit, FittedModel, Method, PcaFitOn, PipelineConfig, VariationSource};
use crate::dataio::{
    generate_synthetic, load_dataset, read_dataset, save_dataset, split, write_atomic, Protocol, Split, SplitSpec,
    SynthSpec,
};
use crate::error::{Error, Result};
use crate::matrixcore::FeatureMatrix;
use crate::ssgmm::{CovMode, EmConfig, PriorsMode};

#[derive(Debug, Parser)]
#[command(
    name = "s3rc",
    version,
    about = "Semi-supervised sparse representation classification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model on a dataset with labeled and unlabeled rows.
    Fit(FitArgs),
    /// Classify every row of a dataset with a fitted model.
    Predict(PredictArgs),
    /// Compare methods under identical splits.
    Bench(BenchArgs),
    /// Write a synthetic dataset and its ground-truth record.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PriorsArg {
    Proportional,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CovModeArg {
    Identity,
    Diagonal,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PcaFitArg {
    All,
    Labeled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    Transductive,
    Inductive,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::Transductive => Protocol::Transductive,
            ProtocolArg::Inductive => Protocol::Inductive,
        }
    }
}

/// Knobs shared by `fit` and `bench`.
#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    #[arg(long, default_value_t = 0.005, allow_hyphen_values = true)]
    pub lambda: f64,
    /// Maximum number of principal components.
    #[arg(long = "pca-dim", default_value_t = 300)]
    pub pca_dim: usize,
    #[arg(long = "cov-mode", value_enum, default_value_t = CovModeArg::Diagonal)]
    pub cov_mode: CovModeArg,
    /// Maximum EM iterations.
    #[arg(long = "max-iter", default_value_t = 50)]
    pub max_iter: usize,
    /// Relative log-likelihood tolerance for EM.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = PriorsArg::Proportional)]
    pub priors: PriorsArg,
    /// centroid, prototype, generic or file:<path>.
    #[arg(long, default_value = "centroid", value_parser = parse_variation)]
    pub variation: VariationSource,
    /// Generic dataset for `--variation generic`.
    #[arg(long)]
    pub generic: Option<PathBuf>,
    #[arg(long = "pca-fit", value_enum, default_value_t = PcaFitArg::All)]
    pub pca_fit: PcaFitArg,
}

fn parse_variation(s: &str) -> std::result::Result<VariationSource, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl PipelineArgs {
    pub fn config(&self, method: Method) -> PipelineConfig {
        PipelineConfig {
            method,
            lambda: self.lambda,
            pca_dim: self.pca_dim,
            em: EmConfig {
                max_iters: self.max_iter,
                rel_tol: self.tol,
                cov_mode: match self.cov_mode {
                    CovModeArg::Identity => CovMode::Identity,
                    CovModeArg::Diagonal => CovMode::Diagonal,
                    CovModeArg::Full => CovMode::Full,
                },
                ..EmConfig::default()
            },
            priors_mode: match self.priors {
                PriorsArg::Proportional => PriorsMode::LabeledProportion,
                PriorsArg::Uniform => PriorsMode::Uniform,
            },
            variation_source: self.variation.clone(),
            pca_fit_on: match self.pca_fit {
                PcaFitArg::All => PcaFitOn::All,
                PcaFitArg::Labeled => PcaFitOn::Labeled,
            },
            ..PipelineConfig::default()
        }
    }

    fn generic(&self) -> Result<Option<FeatureMatrix>> {
        self.generic.as_ref().map(load_dataset).transpose()
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Dataset CSV; `?` rows are unlabeled.
    pub dataset: PathBuf,
    /// Model archive to write.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Text report; defaults to the archive path with a `.report.txt` suffix.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value = "s3rc", value_parser = parse_method)]
    pub method: Method,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    pub model: PathBuf,
    pub dataset: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Labeled dataset to split; the synthetic generator is used when absent.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "src,esrc,ssrc,s3rc", value_parser = parse_method)]
    pub methods: Vec<Method>,
    #[arg(long, value_enum, default_value_t = ProtocolArg::Transductive)]
    pub protocol: ProtocolArg,
    /// Seed for the split (and the generator, unless `--synth-seed` is given).
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Labeled samples per class when splitting a dataset.
    #[arg(long = "labeled-per-class", default_value_t = 2)]
    pub labeled_per_class: usize,
    /// Share of each class's unlabeled pool held out (inductive only).
    #[arg(long = "test-fraction", default_value_t = 0.5)]
    pub test_fraction: f64,
    #[command(flatten)]
    pub synth: SynthSpecArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SynthSpecArgs {
    #[arg(long = "classes", default_value_t = 10)]
    pub num_classes: usize,
    #[arg(long, default_value_t = 50)]
    pub dim: usize,
    #[arg(long = "atoms", default_value_t = 8)]
    pub num_atoms: usize,
    #[arg(long = "n-labeled", default_value_t = 2)]
    pub n_labeled: usize,
    #[arg(long = "n-unlabeled", default_value_t = 20)]
    pub n_unlabeled: usize,
    #[arg(long, default_value_t = 0.6)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.4)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.02)]
    pub sigma: f64,
    #[arg(long = "synth-seed")]
    pub synth_seed: Option<u64>,
}

impl SynthSpecArgs {
    pub fn spec(&self, default_seed: u64) -> SynthSpec {
        SynthSpec {
            num_classes: self.num_classes,
            dim: self.dim,
            num_atoms: self.num_atoms,
            labeled_per_class: self.n_labeled,
            unlabeled_per_class: self.n_unlabeled,
            eta: self.eta,
            rho: self.rho,
            sigma: self.sigma,
            seed: self.synth_seed.unwrap_or(default_seed),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Dataset CSV to write.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Ground-truth JSON; defaults to the dataset path with a `.json` extension.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[command(flatten)]
    pub spec: SynthSpecArgs,
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Fit(a) => cmd_fit(&a, stdout).map(|_| ()),
        Command::Predict(a) => cmd_predict(&a.model, &a.dataset, stdout).map(|_| ()),
        Command::Bench(a) => cmd_bench(&a, stdout).map(|_| ()),
        Command::Synth(a) => cmd_synth(&a, stdout),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

/// Fits, writes the archive and the report, and echoes the report.
pub fn cmd_fit(args: &FitArgs, out: &mut dyn Write) -> Result<FittedModel> {
    let cfg = args.pipeline.config(args.method);
    let train = load_dataset(&args.dataset)?;
    let generic = args.pipeline.generic()?;
    let start = Instant::now();
    let model = fit(&train, generic.as_ref(), &cfg)?;
    let elapsed = start.elapsed().as_secs_f64();

    write_atomic(&args.out, ModelArchive::from_model(&model).to_json().as_bytes())?;
    let report = fit_report(&model, &train, elapsed);
    let report_path = args
        .report
        .clone()
        .unwrap_or_else(|| suffixed(&args.out, ".report.txt"));
    write_atomic(&report_path, report.as_bytes())?;
    emit(out, &report)?;
    Ok(model)
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn fit_report(model: &FittedModel, train: &FeatureMatrix, seconds: f64) -> String {
    let labeled = train.labels().iter().filter(|l| l.is_some()).count();
    let mut r = String::new();
    let _ = writeln!(r, "method\t{}", model.config.method);
    let _ = writeln!(r, "classes\t{}", model.num_classes());
    let _ = writeln!(
        r,
        "samples\t{}\tlabeled\t{labeled}\tunlabeled\t{}",
        train.len(),
        train.len() - labeled
    );
    let _ = writeln!(r, "pca_dim\t{}", model.pca.output_dim());
    let _ = writeln!(r, "gallery_columns\t{}", model.gallery.len());
    let _ = writeln!(r, "variation_columns\t{}", model.variation.len());
    let _ = writeln!(r, "excluded_samples\t{}", model.excluded.len());
    if let Some(t) = &model.trace {
        let _ = writeln!(r, "em_iterations\t{}", t.iterations);
        let _ = writeln!(r, "em_converged\t{}", t.converged);
        let _ = writeln!(r, "iteration\tlog_likelihood");
        for (i, ll) in t.log_likelihoods.iter().enumerate() {
            let _ = writeln!(r, "{i}\t{ll:.6}");
        }
    }
    let _ = writeln!(r, "fit_seconds\t{seconds:.3}");
    r
}

/// Writes `index,label,best_residual,second_residual` for every row and
/// returns the row count.
pub fn cmd_predict(model_path: &Path, dataset_path: &Path, out: &mut dyn Write) -> Result<usize> {
    let model = load_model(model_path)?;
    let file = read_dataset(dataset_path)?;
    if file.dim != model.pca.input_dim() {
        return Err(Error::dim(
            format!("feature dimension of {}", dataset_path.display()),
            model.pca.input_dim(),
            file.dim,
        ));
    }
    let results = model.predict(&file.matrix())?;
    let mut text = String::new();
    for (i, r) in results.iter().enumerate() {
        let _ = writeln!(
            text,
            "{i},{},{:?},{:?}",
            model.classes[r.label],
            r.best_residual(),
            r.second_residual()
        );
    }
    emit(out, &text)?;
    Ok(results.len())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: Method,
    pub correct: usize,
    pub total: usize,
    pub rate: f64,
    pub em_iterations: Option<usize>,
}

/// Training matrix with everything outside `split.labeled` unlabeled, and
/// the test columns with their true classes.
pub fn bench_partition(
    data: &DMatrix<f64>,
    truth: &[usize],
    classes: &[String],
    split: &Split,
) -> Result<(FeatureMatrix, DMatrix<f64>, Vec<usize>)> {
    let mut cols = split.labeled.clone();
    cols.extend(&split.unlabeled_train);
    let labels = split
        .labeled
        .iter()
        .map(|&j| Some(truth[j]))
        .chain(split.unlabeled_train.iter().map(|_| None))
        .collect();
    let train = FeatureMatrix::new(data.select_columns(&cols), labels, classes.to_vec())?;
    let test = data.select_columns(&split.test);
    let test_truth = split.test.iter().map(|&j| truth[j]).collect();
    Ok((train, test, test_truth))
}

/// Runs every requested method on the same split and writes a
/// tab-separated table preceded by a seed and configuration echo.
pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<Vec<BenchRow>> {
    if args.methods.is_empty() {
        return Err(Error::Config("no methods requested".into()));
    }
    let protocol: Protocol = args.protocol.into();
    let mut head = String::new();
    let _ = writeln!(head, "# seed\t{}", args.seed);
    let _ = writeln!(
        head,
        "# protocol\t{}",
        serde_json::to_string(&protocol).unwrap_or_default().trim_matches('"')
    );

    let (data, truth, classes, split) = match &args.dataset {
        Some(path) => {
            let x = load_dataset(path)?;
            let spec = SplitSpec {
                labeled_per_class: args.labeled_per_class,
                test_fraction: args.test_fraction,
            };
            let s = split(&x, protocol, &spec, args.seed)?;
            let _ = writeln!(head, "# data\t{}", path.display());
            // Rows without a label never reach the test set, so any class works here.
            let truth = x.labels().iter().map(|l| l.unwrap_or(0)).collect();
            (x.data().clone(), truth, x.classes().to_vec(), s)
        }
        None => {
            let spec = args.synth.spec(args.seed);
            let synth = generate_synthetic(&spec)?;
            let s = synth.truth.split(protocol, args.test_fraction, args.seed)?;
            let _ = writeln!(
                head,
                "# data\tsynthetic\t{}",
                serde_json::to_string(&spec).map_err(|e| Error::Config(e.to_string()))?
            );
            (
                synth.features.data().clone(),
                synth.truth.labels.clone(),
                synth.features.classes().to_vec(),
                s,
            )
        }
    };
    let base = args.pipeline.config(Method::S3rc);
    let _ = writeln!(
        head,
        "# config\t{}",
        serde_json::to_string(&base).map_err(|e| Error::Config(e.to_string()))?
    );
    let (train, test, test_truth) = bench_partition(&data, &truth, &classes, &split)?;
    let generic = args.pipeline.generic()?;

    let mut rows = Vec::new();
    let mut table = head;
    let _ = writeln!(table, "method\trate\tcorrect\ttotal\tem_iterations");
    for &method in &args.methods {
        let cfg = PipelineConfig { method, ..base.clone() };
        let model = fit(&train, generic.as_ref(), &cfg)?;
        let predicted = model.predict_labels(&test)?;
        let e = evaluate(&predicted, &test_truth, classes.len())?;
        let iters = model.trace.as_ref().map(|t| t.iterations);
        let _ = writeln!(
            table,
            "{method}\t{:.2}\t{}\t{}\t{}",
            100.0 * e.rate,
            e.correct,
            e.total,
            iters.map_or("-".to_string(), |i| i.to_string())
        );
        rows.push(BenchRow {
            method,
            correct: e.correct,
            total: e.total,
            rate: e.rate,
            em_iterations: iters,
        });
    }
    emit(out, &table)?;
    Ok(rows)
}

/// Writes the dataset CSV and the ground-truth JSON sidecar.
pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let spec = args.spec.spec(args.seed);
    let data = generate_synthetic(&spec)?;
    save_dataset(&args.out, &data.features)?;
    let truth_path = args.truth.clone().unwrap_or_else(|| args.out.with_extension("json"));
    let mut json = serde_json::to_string_pretty(&data.truth).map_err(|e| Error::Config(e.to_string()))?;
    json.push('\n');
    write_atomic(&truth_path, json.as_bytes())?;
    emit(
        out,
        &format!(
            "wrote {} samples to {} and ground truth to {}\n",
            data.features.len(),
            args.out.display(),
            truth_path.display()
        ),
    )
}
