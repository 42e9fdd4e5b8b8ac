use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use morphage::comparator::{FaceComparator, HogComparator};
use morphage::dataset::{
    parse_manifest, read_pairs, read_split, select_pairs, split_dataset, split_with_counts, write_pairs, write_split,
    DatasetManifest, ManifestOptions, Partition,
};
use morphage::fileio::write_atomic;
use morphage::iso::{self, det_report, read_score_set, score_set_from_records, Label, OperatingMode};
use morphage::mad::{self, read_features, write_features, ExtractorConfig, MadModel, TrainOptions};
use morphage::morph::{generate_morphs, read_jobs, write_jobs, DEFAULT_ALPHAS};
use morphage::pipeline::{self, ExperimentMode, RunConfig};
use morphage::svg::{emit_box_svg, emit_scatter_svg, ScatterReport};
use morphage::synth::{write_synthetic_set, SynthConfig};
use morphage::vuln::{
    build_vulnerability_report, score_morphs, split_by_alpha, CalibrationResult, VulnerabilityScoreTable,
};
use morphage::{Error, Result};

#[derive(Parser)]
#[command(name = "morphage", version, about = "Face morph generation, vulnerability metrics and morphing attack detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Manifests and subject splits.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Morph pair selection.
    #[command(subcommand)]
    Pairs(PairsCmd),
    /// Morph generation.
    #[command(subcommand)]
    Morph(MorphCmd),
    /// Comparator thresholds and FMMPMR / MMPMR.
    #[command(subcommand)]
    Vuln(VulnCmd),
    /// Morphing attack detectors.
    #[command(subcommand)]
    Mad(MadCmd),
    /// Reports from score files.
    #[command(subcommand)]
    Report(ReportCmd),
    /// Runs the whole pipeline from a configuration file.
    Run(RunArgs),
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Seeded train/dev/test split of the manifest subjects.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1, default_value = "0.25,0.5,0.25")]
        ratios: Vec<f64>,
        /// Explicit partition sizes instead of ratios.
        #[arg(long, value_delimiter = ',', num_args = 1, conflicts_with = "ratios")]
        counts: Option<Vec<usize>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Writes the procedural synthetic face set.
    Synth {
        #[arg(long, default_value_t = 12)]
        subjects: usize,
        #[arg(long, default_value_t = 256)]
        size: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 4.0)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum PairsCmd {
    /// Same-gender pairs per partition above the calibrated pairing threshold.
    Select {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        split: PathBuf,
        #[arg(long, default_value_t = 0.001)]
        far_target: f64,
        /// Fixed pairing threshold; skips calibration.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, default_value_t = 4)]
        max_per_subject: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum MorphCmd {
    /// Morphs every pair at every alpha into `--out`, with `jobs.txt`.
    Generate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1)]
        alpha: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum VulnCmd {
    /// Verification threshold from probe-vs-reference impostor scores.
    Calibrate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1, default_value = "3")]
        probe_sessions: Vec<u32>,
        #[arg(long, default_value_t = 0.001)]
        far_target: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compares morphs against probes of both contributing subjects.
    Score {
        #[arg(long)]
        manifest: PathBuf,
        /// Morph job file written by `morph generate`.
        #[arg(long)]
        jobs: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1, default_value = "3")]
        probe_sessions: Vec<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-alpha and pooled FMMPMR / MMPMR as JSON.
    Report {
        #[arg(long)]
        scores: PathBuf,
        #[command(flatten)]
        tau: TauArgs,
        /// Alphas expected in the breakdown; missing ones are flagged.
        #[arg(long, value_delimiter = ',', num_args = 1)]
        alpha: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct TauArgs {
    /// Calibration file with `tau=`.
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long)]
    tau: Option<f64>,
}

impl TauArgs {
    fn resolve(&self) -> Result<f64> {
        match (&self.calibration, self.tau) {
            (Some(p), _) => Ok(CalibrationResult::load(p)?.tau),
            (None, Some(t)) => Ok(t),
            (None, None) => Err(Error::Contract("threshold required".into())),
        }
    }
}

#[derive(Args)]
struct ExtractorArgs {
    /// `lbp`, `bsif` or `hog`, optionally followed by `key=value` parameters.
    #[arg(long, default_value = "lbp")]
    extractor: String,
}

impl ExtractorArgs {
    fn config(&self) -> Result<ExtractorConfig> {
        ExtractorConfig::parse(&self.extractor)
    }
}

#[derive(Subcommand)]
enum MadCmd {
    /// Features of one partition: bona fide session images and its morphs.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        split: PathBuf,
        #[arg(long)]
        jobs: PathBuf,
        #[arg(long, default_value = "train")]
        partition: Partition,
        #[command(flatten)]
        extractor: ExtractorArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Linear SVM; with `--dev`, also the operating thresholds.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', num_args = 1, default_value = "1,5,10")]
        apcer_targets: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Scores a feature file with a trained model.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum ReportCmd {
    /// D-EER, BPCER at APCER targets and the DET table of a score file.
    Det {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1, default_value = "1,5,10")]
        apcer_targets: Vec<f64>,
        /// `dev` uses the model's development thresholds, `direct` the
        /// evaluated scores themselves.
        #[arg(long, default_value = "direct")]
        mode: OperatingMode,
        #[arg(long, required_if_eq("mode", "dev"))]
        model: Option<PathBuf>,
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Scatter plot of subject-1 vs subject-2 scores, optionally a box plot.
    Scatter {
        #[arg(long)]
        scores: PathBuf,
        #[command(flatten)]
        tau: TauArgs,
        /// Restrict to morphs of one alpha.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        box_plot: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',', num_args = 1)]
    alpha: Option<Vec<f64>>,
    /// Pairing and verification FAR target.
    #[arg(long)]
    far_target: Option<f64>,
    /// Restricts detection to one extractor.
    #[arg(long)]
    extractor: Option<String>,
    #[arg(long, value_delimiter = ',', num_args = 1)]
    apcer_targets: Option<Vec<f64>>,
    #[arg(long)]
    mode: Option<ExperimentMode>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn manifest(path: &Path) -> Result<DatasetManifest> {
    parse_manifest(path, ManifestOptions::default())
}

fn dataset(cmd: DatasetCmd) -> Result<()> {
    match cmd {
        DatasetCmd::Split {
            manifest: m,
            ratios,
            counts,
            seed,
            out,
        } => {
            let m = parse_manifest(&m, ManifestOptions { check_files: false, ..Default::default() })?;
            let split = match counts {
                Some(c) => {
                    let c: [usize; 3] = c
                        .try_into()
                        .map_err(|_| Error::Contract("--counts needs three values".into()))?;
                    split_with_counts(&m, c, seed)?
                }
                None => {
                    let r: [f64; 3] = ratios
                        .try_into()
                        .map_err(|_| Error::Contract("--ratios needs three values".into()))?;
                    split_dataset(&m, r, seed)?
                }
            };
            write_split(&split, &out)?;
            let [a, b, c] = split.sizes();
            println!("train={a} dev={b} test={c}");
        }
        DatasetCmd::Synth {
            subjects,
            size,
            seed,
            noise,
            out,
        } => {
            let path = write_synthetic_set(
                &out,
                &SynthConfig {
                    subjects,
                    size,
                    seed,
                    noise_sigma: noise,
                },
            )?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn pairs(cmd: PairsCmd) -> Result<()> {
    let PairsCmd::Select {
        manifest: m,
        split,
        far_target,
        threshold,
        max_per_subject,
        out,
    } = cmd;
    let m = manifest(&m)?;
    let split = read_split(&split)?;
    let comparator = HogComparator::default();
    let tau = match threshold {
        Some(t) => t,
        None => {
            let c = pipeline::pairing_calibration(&m, &comparator, far_target)?;
            c.save(&out.with_extension("calibration.txt"))?;
            c.tau
        }
    };
    let sel = select_pairs(&m, &split, &comparator, tau, max_per_subject)?;
    for (id, e) in &sel.item_errors {
        eprintln!("warning: {id}: {e}");
    }
    write_pairs(&sel.pairs, &out)?;
    println!("{} pairs at threshold {tau}", sel.pairs.len());
    Ok(())
}

fn morph(cmd: MorphCmd) -> Result<()> {
    let MorphCmd::Generate {
        manifest: m,
        pairs,
        alpha,
        out,
    } = cmd;
    let m = manifest(&m)?;
    let pairs = read_pairs(&pairs)?;
    let alphas = alpha.unwrap_or_else(|| DEFAULT_ALPHAS.to_vec());
    let batch = generate_morphs(&m, &pairs, &alphas, &out)?;
    write_jobs(&batch.records, &out.join("jobs.txt"))?;
    for (id, e) in &batch.failures {
        eprintln!("warning: {id}: {e}");
    }
    println!("{} morphs, {} failures", batch.records.len(), batch.failures.len());
    Ok(())
}

fn vuln(cmd: VulnCmd) -> Result<()> {
    let comparator = HogComparator::default();
    match cmd {
        VulnCmd::Calibrate {
            manifest: m,
            probe_sessions,
            far_target,
            out,
        } => {
            let c = pipeline::verification_calibration(&manifest(&m)?, &comparator, &probe_sessions, far_target)?;
            c.save(&out)?;
            println!("tau={} ({} impostor scores)", c.tau, c.impostor_count);
        }
        VulnCmd::Score {
            manifest: m,
            jobs,
            probe_sessions,
            out,
        } => {
            let records = read_jobs(&jobs)?;
            let root = jobs.parent().unwrap_or(Path::new(""));
            let s = score_morphs(&records, root, &manifest(&m)?, &comparator, &probe_sessions)?;
            for (id, e) in &s.excluded {
                eprintln!("warning: {id} excluded: {e}");
            }
            s.table.save(&out)?;
            println!("{} attempts over {} morphs", s.table.attempt_count(), s.table.morph_count());
        }
        VulnCmd::Report {
            scores,
            tau,
            alpha,
            out,
        } => {
            let table = VulnerabilityScoreTable::load(&scores)?;
            let parts = split_by_alpha(&table)?;
            let alphas = alpha.unwrap_or_else(|| parts.iter().map(|p| p.0).collect());
            let slots: Vec<_> = alphas
                .iter()
                .map(|&a| (a, parts.iter().find(|p| p.0 == a).map(|p| &p.1)))
                .collect();
            let r = build_vulnerability_report(&slots, tau.resolve()?, comparator.name())?;
            write_atomic(&out, r.to_json().as_bytes())?;
            println!("FMMPMR {}% MMPMR {}%", r.fmmpmr_percent, r.mmpmr_percent);
        }
    }
    Ok(())
}

fn mad_cmd(cmd: MadCmd) -> Result<()> {
    match cmd {
        MadCmd::Extract {
            manifest: m,
            split,
            jobs,
            partition,
            extractor,
            out,
        } => {
            let m = manifest(&m)?;
            let split = read_split(&split)?;
            let records = read_jobs(&jobs)?;
            let root = jobs.parent().unwrap_or(Path::new(""));
            let samples = pipeline::mad_samples(&m, &split, &records, root, partition);
            let config = extractor.config()?;
            let rows = pipeline::extract_samples(&config, &samples)?;
            write_features(&config, &rows, &out)?;
            println!("{} feature vectors", rows.len());
        }
        MadCmd::Train {
            features,
            dev,
            apcer_targets,
            c,
            seed,
            out,
        } => {
            let (config, rows) = read_features(&features)?;
            let feats: Vec<_> = rows.iter().map(|r| r.feature.clone()).collect();
            let labels: Vec<Label> = rows.iter().map(|r| r.label).collect();
            let options = TrainOptions { c, seed, ..Default::default() };
            let mut model = mad::train_svm(&config, &feats, &labels, options)?;
            let acc = pipeline::decision_accuracy(&pipeline::score_rows(&model, &rows)?);
            if let Some(dev) = dev {
                let (_, dev_rows) = read_features(&dev)?;
                let scored = pipeline::score_rows(&model, &dev_rows)?;
                let labeled: Vec<_> = scored.iter().map(|r| (r.label, r.score)).collect();
                model = mad::select_operating_thresholds(&model, &labeled, &apcer_targets)?;
            }
            model.save(&out)?;
            println!("training accuracy {acc}");
        }
        MadCmd::Eval { model, features, out } => {
            let model = MadModel::load(&model)?;
            let (_, rows) = read_features(&features)?;
            let scored = pipeline::score_rows(&model, &rows)?;
            iso::write_score_set(&scored, &out)?;
            println!("{} scores", scored.len());
        }
    }
    Ok(())
}

fn report(cmd: ReportCmd) -> Result<()> {
    match cmd {
        ReportCmd::Det {
            scores,
            apcer_targets,
            mode,
            model,
            table,
            out,
        } => {
            let set = score_set_from_records(&read_score_set(&scores)?)?;
            let thresholds: Vec<(f64, f64)> = match &model {
                Some(p) => MadModel::load(p)?
                    .thresholds
                    .iter()
                    .map(|t| (t.apcer_target, t.threshold))
                    .collect(),
                None => Vec::new(),
            };
            let r = det_report(&set, &apcer_targets, mode, &thresholds)?;
            write_atomic(&out, r.to_json().as_bytes())?;
            if let Some(t) = table {
                write_atomic(&t, r.det_table().as_bytes())?;
            }
            println!("D-EER {}%", r.eer_percent);
        }
        ReportCmd::Scatter {
            scores,
            tau,
            alpha,
            box_plot,
            out,
        } => {
            let tau = tau.resolve()?;
            let mut table = VulnerabilityScoreTable::load(&scores)?;
            if let Some(a) = alpha {
                table = split_by_alpha(&table)?
                    .into_iter()
                    .find(|p| p.0 == a)
                    .map(|p| p.1)
                    .ok_or_else(|| Error::Contract(format!("no morphs with alpha {a}")))?;
            }
            if table.k() != 2 {
                return Err(Error::Contract(format!("scatter plot needs two subjects, table has {}", table.k())));
            }
            let points: Vec<(f64, f64)> = table.attempts().map(|(_, _, s)| (s[0], s[1])).collect();
            if let Some(b) = box_plot {
                let groups = vec![
                    ("subject 1".to_string(), points.iter().map(|p| p.0).collect()),
                    ("subject 2".to_string(), points.iter().map(|p| p.1).collect()),
                ];
                emit_box_svg(&groups, "comparison scores", &b)?;
            }
            let r = ScatterReport::new(points, tau, "morph vs probe scores");
            emit_scatter_svg(&r, &out)?;
            println!("top-right {}/{}", r.quadrants.top_right, r.quadrants.total());
        }
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(a) = args.alpha {
        cfg.alphas = a;
    }
    if let Some(f) = args.far_target {
        cfg.pairing_far_target = f;
        cfg.verification_far_target = f;
    }
    if let Some(e) = args.extractor {
        cfg.extractors = vec![ExtractorConfig::parse(&e)?];
    }
    if let Some(t) = args.apcer_targets {
        cfg.apcer_targets = t;
    }
    if let Some(m) = args.mode {
        cfg.mode = m;
    }
    if let Some(o) = args.out {
        cfg.output = o;
    }
    let s = pipeline::run(&cfg, &HogComparator::default())?;
    println!(
        "FMMPMR {}% MMPMR {}% ({} morphs)",
        s.train_data.fmmpmr_percent, s.train_data.mmpmr_percent, s.train_data.morphs
    );
    for m in &s.mad {
        println!("{}: D-EER {}%", m.extractor, m.test_eer_percent);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Dataset(c) => dataset(c),
        Command::Pairs(c) => pairs(c),
        Command::Morph(c) => morph(c),
        Command::Vuln(c) => vuln(c),
        Command::Mad(c) => mad_cmd(c),
        Command::Report(c) => report(c),
        Command::Run(a) => run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
