//! `quest` command-line front end.
//!
//! Subcommands:
//!
//! * `encode`  - one image to a code-map PGM plus a JSON sidecar
//! * `extract` - manifest to feature CSV
//! * `cv`      - feature CSV to a cross-validation report directory
//! * `compare` - manifest to QUEST vs LBP comparison on a shared fold plan
//! * `synth`   - write the synthetic grating corpus
//!
//! Exit status: 0 success, 1 internal error, 2 I/O or undecodable input,
//! 3 image too small, 4 manifest/CSV schema, 5 configuration.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classifier::{
    run_cross_validation, train_ovo, ClassifierConfig, ClassifierKind, CvReport, SvmParams,
};
use crate::dataset::{load_manifest, make_plan, FoldPlan, Protocol, SampleRecord};
use crate::descriptor::{encode_map, DescriptorKind, QuadAssignment, QuestConfig};
use crate::features::{read_feature_csv, write_feature_csv, FeatureMatrix, RegionGrid};
use crate::imageio::encode_pgm;
use crate::pipeline::{extract_records, read_image, PipelineConfig};
use crate::synthetic::{generate_gratings, write_corpus, GratingSpec};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "quest", version, about = "QUEST descriptor feature extraction and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode one image into a descriptor code map (PGM) with a JSON sidecar.
    Encode {
        input: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Scale QUEST codes by 4 for viewing.
        #[arg(long)]
        visualize: bool,
    },
    /// Extract region-histogram features for every manifest record into CSV.
    Extract {
        manifest: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Cross-validate a classifier on a feature CSV.
    Cv {
        features: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Compare QUEST against LBP on the same fold plan.
    Compare {
        manifest: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write the synthetic grating corpus (PGM files + manifest.jsonl).
    Synth {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long, default_value_t = 6)]
        classes: usize,
        #[arg(long, default_value_t = 10)]
        subjects: usize,
        #[arg(long, default_value_t = 60)]
        per_class: usize,
        #[arg(long, default_value_t = 10.0)]
        noise: f64,
        #[arg(long, default_value = "synthetic")]
        output: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, default_value = "quest")]
    pub descriptor: DescriptorKind,
    #[arg(long, default_value = "v3")]
    pub quad_assignment: QuadAssignment,
    /// Side length of the normalized region of interest.
    #[arg(long, default_value_t = 128)]
    pub size: usize,
    /// Regions per side of the histogram grid.
    #[arg(long, default_value_t = 8)]
    pub grid: usize,
    #[arg(long, default_value = "subject-kfold")]
    pub protocol: Protocol,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value = "svm")]
    pub classifier: ClassifierKind,
    /// SVM regularization constant.
    #[arg(long = "c", default_value_t = 1.0)]
    pub c: f64,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl Default for RunArgs {
    fn default() -> Self {
        RunArgs {
            descriptor: DescriptorKind::Quest,
            quad_assignment: QuadAssignment::ByThree,
            size: 128,
            grid: 8,
            protocol: Protocol::SubjectKFold,
            folds: 5,
            repeats: 5,
            seed: 42,
            classifier: ClassifierKind::Svm,
            c: 1.0,
            threads: None,
            output: None,
        }
    }
}

/// Everything that affects results. Embedded in every artifact; the worker
/// count is deliberately absent because it never changes an output byte.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub descriptor: DescriptorKind,
    pub quad_assignment: QuadAssignment,
    pub size: usize,
    pub grid: usize,
    pub protocol: Protocol,
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub classifier: ClassifierKind,
    pub c: f64,
    pub epochs: usize,
}

impl RunConfig {
    pub fn from_args(args: &RunArgs) -> Result<Self> {
        for (name, v) in [
            ("size", args.size),
            ("grid", args.grid),
            ("folds", args.folds),
            ("repeats", args.repeats),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("--{name} must be at least 1")));
            }
        }
        if args.threads == Some(0) {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        if !(args.c > 0.0 && args.c.is_finite()) {
            return Err(Error::Config(format!("--c must be positive, got {}", args.c)));
        }
        if args.size < 3 {
            return Err(Error::Config("--size must be at least 3".into()));
        }
        Ok(RunConfig {
            descriptor: args.descriptor,
            quad_assignment: args.quad_assignment,
            size: args.size,
            grid: args.grid,
            protocol: args.protocol,
            folds: args.folds,
            repeats: args.repeats,
            seed: args.seed,
            classifier: args.classifier,
            c: args.c,
            epochs: SvmParams::default().epochs,
        })
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            descriptor: self.descriptor,
            quest: QuestConfig::new(self.quad_assignment),
            size: self.size,
            grid: RegionGrid::square(self.grid),
        }
    }

    pub fn classifier_config(&self) -> ClassifierConfig {
        ClassifierConfig {
            kind: self.classifier,
            svm: SvmParams {
                c: self.c,
                epochs: self.epochs,
            },
            seed: self.seed,
        }
    }

    fn protocol_summary(&self) -> String {
        match self.protocol {
            Protocol::SubjectKFold => format!("subject-kfold k={}", self.folds),
            Protocol::RandomHoldout => format!("random-holdout 80/20 x{}", self.repeats),
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn sidecar_path(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn read_manifest(path: &Path) -> Result<(Vec<SampleRecord>, PathBuf)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let records = load_manifest(std::io::BufReader::new(file))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((records, base))
}

#[derive(Serialize)]
struct EncodeSidecar<'a> {
    artifact: &'static str,
    source: String,
    width: usize,
    height: usize,
    code_range: usize,
    /// "raw" codes, or "x4" when QUEST codes were scaled for display.
    pixel_mode: &'static str,
    config: &'a RunConfig,
}

pub fn cmd_encode(input: &Path, config: &RunConfig, output: &Path, visualize: bool) -> Result<()> {
    let img = read_image(input)?;
    let map = encode_map(&img, config.descriptor, &QuestConfig::new(config.quad_assignment))?;
    write_file(output, encode_pgm(&map.to_image(visualize)))?;
    let sidecar = EncodeSidecar {
        artifact: "codemap",
        source: file_name(input),
        width: map.width(),
        height: map.height(),
        code_range: map.code_range(),
        pixel_mode: if visualize && config.descriptor == DescriptorKind::Quest {
            "x4"
        } else {
            "raw"
        },
        config,
    };
    write_file(&sidecar_path(output, ".json"), to_json(&sidecar))
}

#[derive(Debug, Serialize, Deserialize)]
struct FeaturesSidecar {
    artifact: String,
    source: String,
    rows: usize,
    dim: usize,
    config: RunConfig,
}

fn write_features(output: &Path, matrix: &FeatureMatrix, source: &Path, config: &RunConfig) -> Result<()> {
    let file = fs::File::create(output).map_err(|e| Error::io(output, e))?;
    write_feature_csv(std::io::BufWriter::new(file), matrix)?;
    let meta = FeaturesSidecar {
        artifact: "features".into(),
        source: file_name(source),
        rows: matrix.len(),
        dim: matrix.dim(),
        config: *config,
    };
    write_file(&sidecar_path(output, ".meta.json"), to_json(&meta))
}

pub fn cmd_extract(manifest: &Path, config: &RunConfig, output: &Path) -> Result<()> {
    let (records, base) = read_manifest(manifest)?;
    let matrix = extract_records(&records, &base, &[config.pipeline()])?
        .pop()
        .expect("one matrix per config");
    write_features(output, &matrix, manifest, config)
}

fn check_classes(features: &FeatureMatrix) -> Result<()> {
    let n = features.classes().len();
    if n < 2 {
        return Err(Error::Config(format!(
            "cross-validation needs at least 2 classes, found {n}"
        )));
    }
    Ok(())
}

fn build_plan(features: &FeatureMatrix, config: &RunConfig) -> Result<FoldPlan> {
    make_plan(
        config.protocol,
        &features.subjects,
        config.folds,
        config.repeats,
        config.seed,
    )
    .map_err(|e| match e {
        Error::Size(msg) => Error::Config(msg),
        other => other,
    })
}

#[derive(Serialize)]
struct ReportFile<'a> {
    artifact: &'static str,
    descriptor: DescriptorKind,
    input: String,
    config: &'a RunConfig,
    report: &'a CvReport,
}

/// Write report.json, plan.json, confusion.csv (+ sidecar) and confusion.txt.
fn write_cv_outputs(
    dir: &Path,
    input: &Path,
    config: &RunConfig,
    plan: &FoldPlan,
    report: &CvReport,
) -> Result<()> {
    create_dir(dir)?;
    let file = ReportFile {
        artifact: "cv-report",
        descriptor: config.descriptor,
        input: file_name(input),
        config,
        report,
    };
    write_file(&dir.join("report.json"), to_json(&file))?;
    write_file(&dir.join("plan.json"), to_json(plan))?;
    let csv_path = dir.join("confusion.csv");
    write_file(&csv_path, report.pooled.to_csv())?;
    write_file(
        &sidecar_path(&csv_path, ".meta.json"),
        to_json(&serde_json::json!({"artifact": "confusion", "config": config})),
    )?;
    let caption = format!(
        "Confusion matrix of {} ({} classes, {}, {}, seed {})",
        config.descriptor.display_name(),
        report.pooled.labels.len(),
        config.classifier,
        config.protocol_summary(),
        config.seed,
    );
    write_file(&dir.join("confusion.txt"), report.pooled.render_table(&caption))
}

/// Prefer the descriptor settings recorded alongside the CSV, if any.
fn merge_feature_sidecar(features_path: &Path, config: &RunConfig) -> RunConfig {
    let meta = fs::read_to_string(sidecar_path(features_path, ".meta.json"))
        .ok()
        .and_then(|t| serde_json::from_str::<FeaturesSidecar>(&t).ok());
    match meta {
        Some(m) => RunConfig {
            descriptor: m.config.descriptor,
            quad_assignment: m.config.quad_assignment,
            size: m.config.size,
            grid: m.config.grid,
            ..*config
        },
        None => *config,
    }
}

/// Returns the report so callers can print or inspect it.
pub fn cmd_cv(features_path: &Path, config: &RunConfig, report_dir: &Path) -> Result<CvReport> {
    let file = fs::File::open(features_path).map_err(|e| Error::io(features_path, e))?;
    let features = read_feature_csv(std::io::BufReader::new(file))?;
    let config = merge_feature_sidecar(features_path, config);
    check_classes(&features)?;
    let plan = build_plan(&features, &config)?;
    let report = run_cross_validation(&plan, &features, &config.classifier_config())?;
    write_cv_outputs(report_dir, features_path, &config, &plan, &report)?;
    if config.classifier == ClassifierKind::Svm {
        let rows: Vec<&[f64]> = features.rows.iter().map(Vec::as_slice).collect();
        let labels: Vec<&str> = features.labels.iter().map(String::as_str).collect();
        let model = train_ovo(&rows, &labels, &config.classifier_config().svm, config.seed)?;
        #[derive(Serialize)]
        struct ModelFile<'a> {
            artifact: &'static str,
            config: &'a RunConfig,
            model: &'a crate::classifier::MultiClassModel,
        }
        let out = ModelFile {
            artifact: "model",
            config: &config,
            model: &model,
        };
        write_file(&report_dir.join("model.json"), to_json(&out))?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub method: String,
    pub mean_accuracy: f64,
}

pub fn render_comparison(rows: &[ComparisonRow], config: &RunConfig) -> String {
    let mut out = String::from("Method\tAccuracy\n");
    for r in rows {
        out.push_str(&format!("{}\t{:.2}\n", r.method, r.mean_accuracy));
    }
    out.push_str(&format!(
        "\nMean recognition accuracy (%), {}, {}, seed {}\n",
        config.classifier,
        config.protocol_summary(),
        config.seed
    ));
    out
}

pub fn cmd_compare(manifest: &Path, config: &RunConfig, report_dir: &Path) -> Result<Vec<ComparisonRow>> {
    let (records, base) = read_manifest(manifest)?;
    let methods = [DescriptorKind::Lbp, DescriptorKind::Quest];
    let configs: Vec<PipelineConfig> = methods
        .iter()
        .map(|&d| config.pipeline().with_descriptor(d))
        .collect();
    let matrices = extract_records(&records, &base, &configs)?;
    check_classes(&matrices[0])?;
    // One plan for both descriptors: it depends only on subjects and seed.
    let plan = build_plan(&matrices[0], config)?;
    create_dir(report_dir)?;
    let mut rows = Vec::new();
    for (&method, features) in methods.iter().zip(&matrices) {
        let cfg = RunConfig {
            descriptor: method,
            ..*config
        };
        let report = run_cross_validation(&plan, features, &cfg.classifier_config())?;
        write_cv_outputs(&report_dir.join(method.to_string()), manifest, &cfg, &plan, &report)?;
        rows.push(ComparisonRow {
            method: method.display_name().to_string(),
            mean_accuracy: report.mean_accuracy,
        });
    }
    write_file(&report_dir.join("comparison.txt"), render_comparison(&rows, config))?;
    let summary = serde_json::json!({
        "artifact": "comparison",
        "input": file_name(manifest),
        "config": config,
        "rows": rows
            .iter()
            .map(|r| serde_json::json!({"method": r.method, "mean_accuracy": (r.mean_accuracy * 100.0).round() / 100.0}))
            .collect::<Vec<Value>>(),
    });
    write_file(&report_dir.join("comparison.json"), to_json(&summary))?;
    Ok(rows)
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(f)
}

fn default_output(run: &RunArgs, fallback: impl FnOnce() -> PathBuf) -> PathBuf {
    run.output.clone().unwrap_or_else(fallback)
}

/// Execute a parsed command, printing results to stdout.
pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Encode { input, run, visualize } => {
            let config = RunConfig::from_args(&run)?;
            let output = default_output(&run, || input.with_extension("codes.pgm"));
            with_threads(run.threads, || cmd_encode(&input, &config, &output, visualize))?;
            println!("wrote {}", output.display());
        }
        Command::Extract { manifest, run } => {
            let config = RunConfig::from_args(&run)?;
            let output = default_output(&run, || PathBuf::from("features.csv"));
            with_threads(run.threads, || cmd_extract(&manifest, &config, &output))?;
            println!("wrote {}", output.display());
        }
        Command::Cv { features, run } => {
            let config = RunConfig::from_args(&run)?;
            let output = default_output(&run, || PathBuf::from("report"));
            let report = with_threads(run.threads, || cmd_cv(&features, &config, &output))?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!("mean accuracy: {:.2}", report.mean_accuracy);
        }
        Command::Compare { manifest, run } => {
            let config = RunConfig::from_args(&run)?;
            let output = default_output(&run, || PathBuf::from("comparison"));
            let rows = with_threads(run.threads, || cmd_compare(&manifest, &config, &output))?;
            print!("{}", render_comparison(&rows, &config));
        }
        Command::Synth {
            seed,
            size,
            classes,
            subjects,
            per_class,
            noise,
            output,
        } => {
            let spec = GratingSpec {
                classes,
                subjects,
                images_per_class: per_class,
                size,
                noise_sigma: noise,
                seed,
            };
            write_corpus(&output, &generate_gratings(&spec)?)?;
            println!("wrote {}", output.join("manifest.jsonl").display());
        }
    }
    Ok(())
}

/// Parse `args` and run; returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 5,
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
