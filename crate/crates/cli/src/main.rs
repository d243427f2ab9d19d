use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ppg_triage::config::{MetricLevel, RunConfig};
use ppg_triage::eval::{format_summary_table, run_experiment};
use ppg_triage::features::{Family, FeatureCatalog};
use ppg_triage::fiducials::write_fiducials_csv;
use ppg_triage::io::{self, BinaryLabel};
use ppg_triage::pipeline::{extract_cohort, ScreeningLog};
use ppg_triage::synth::{synth_cohort, CohortSpec};
use ppg_triage::{Error, ErrorKind, Result};

#[derive(Parser)]
#[command(
    name = "ppg-triage",
    version,
    about = "PPG stroke-triage pipeline: synthesize, extract, evaluate"
)]
struct Cli {
    /// Worker threads (default: available cores). Output does not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort (manifest and sample files).
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the spec file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Filter, screen and extract features into a matrix.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Also write per-beat fiducial indices.
        #[arg(long)]
        debug_fiducials: bool,
    },
    /// Run the repeated split evaluation on a feature matrix.
    Evaluate {
        #[arg(long)]
        matrix: PathBuf,
        /// Screening log from `extract`, copied into the report.
        #[arg(long)]
        screening: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated subset of MOR,BRV,META,ALL.
        #[arg(long, value_delimiter = ',')]
        families: Option<Vec<Family>>,
        #[arg(long)]
        metric_level: Option<MetricLevel>,
    },
    /// Print the feature catalog as CSV.
    Catalog {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn load_spec(path: &Path, seed: Option<u64>) -> Result<CohortSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut table: toml::Table = toml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
    if let Some(seed) = seed {
        let seed =
            i64::try_from(seed).map_err(|_| Error::Config(format!("seed {seed} is too large")))?;
        table.insert("seed".into(), toml::Value::Integer(seed));
    }
    if !table.contains_key("seed") {
        return Err(Error::Config(
            "synth requires a seed (spec key `seed` or --seed)".into(),
        ));
    }
    let spec: CohortSpec = table.try_into().map_err(|e: toml::de::Error| {
        Error::Config(format!("{}: {}", path.display(), e.message()))
    })?;
    spec.validate()?;
    Ok(spec)
}

fn cmd_synth(spec: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let spec = load_spec(spec, seed)?;
    let cohort = synth_cohort(&spec)?;
    let manifest = io::write_cohort(out, &cohort)?;
    let c1 = cohort
        .iter()
        .filter(|r| r.binary_label() == BinaryLabel::C1)
        .count();
    println!(
        "{c1} C1 / {} C0 recordings written to {}",
        cohort.len() - c1,
        manifest.display()
    );
    Ok(())
}

fn cmd_extract(manifest: &Path, common: &Common, debug_fiducials: bool) -> Result<()> {
    let config = load_config(common.config.as_deref())?;
    let cohort = io::load_cohort(manifest)?;
    let ex = extract_cohort(&cohort, &config, debug_fiducials)?;
    let matrix_path = common.out.join("features.csv");
    io::write_matrix(&ex.matrix, &matrix_path)?;
    io::write_json(&common.out.join("screening.json"), &ex.screening)?;
    if debug_fiducials {
        write_fiducials_csv(&common.out.join("fiducials.csv"), &ex.fiducials)?;
    }
    let s = &ex.screening.summary;
    let reasons: Vec<String> = s
        .by_reason
        .iter()
        .map(|(k, v)| format!("{k}: {v}"))
        .collect();
    println!(
        "{} windows from {} recordings: {} kept, {} excluded{}",
        s.total,
        cohort.len(),
        s.kept,
        s.excluded,
        if reasons.is_empty() {
            String::new()
        } else {
            format!(" ({})", reasons.join(", "))
        }
    );
    for skipped in &ex.screening.skipped_recordings {
        println!("skipped {}: {}", skipped.patient_id, skipped.reason);
    }
    println!(
        "{} rows written to {}",
        ex.matrix.n_rows(),
        matrix_path.display()
    );
    Ok(())
}

fn cmd_evaluate(
    matrix: &Path,
    screening: Option<&Path>,
    common: &Common,
    seed: Option<u64>,
    families: Option<Vec<Family>>,
    metric_level: Option<MetricLevel>,
) -> Result<()> {
    let mut config = load_config(common.config.as_deref())?;
    if seed.is_some() {
        config.seed = seed;
    }
    if let Some(f) = families {
        config.families = f;
    }
    if let Some(m) = metric_level {
        config.metric_level = m;
    }
    if config.seed.is_none() {
        return Err(Error::Config(
            "evaluate requires a seed (config key `seed` or --seed)".into(),
        ));
    }
    let matrix = io::read_matrix(matrix)?;
    let mut report = run_experiment(&matrix, &config)?;
    if let Some(path) = screening {
        let log: ScreeningLog = io::read_json(path)?;
        report.screening = Some(log.summary);
    }
    let out = &common.out;
    io::write_report(&report, &out.join("report.json"))?;
    io::write_text(&out.join("summary.csv"), &io::format_summary_csv(&report))?;
    io::write_text(&out.join("roc.csv"), &io::format_roc_csv(&report))?;
    io::write_text(
        &out.join("selection_frequency.csv"),
        &io::format_selection_csv(&report),
    )?;
    io::write_json(&out.join("distributions.json"), &report.distributions)?;
    print!("{}", format_summary_table(&report));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Error::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    }
    match cli.command {
        Command::Synth { spec, out, seed } => cmd_synth(&spec, &out, seed),
        Command::Extract {
            manifest,
            common,
            debug_fiducials,
        } => cmd_extract(&manifest, &common, debug_fiducials),
        Command::Evaluate {
            matrix,
            screening,
            common,
            seed,
            families,
            metric_level,
        } => cmd_evaluate(
            &matrix,
            screening.as_deref(),
            &common,
            seed,
            families,
            metric_level,
        ),
        Command::Catalog { out } => {
            let csv = FeatureCatalog::standard().to_csv();
            match out {
                Some(p) => io::write_text(&p, &csv),
                None => {
                    print!("{csv}");
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (tag, code) = match e.kind() {
                ErrorKind::Config => ("config", 2),
                ErrorKind::Data => ("data", 3),
                ErrorKind::Degenerate => ("degenerate", 4),
            };
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{tag}]: {msg}");
            ExitCode::from(code)
        }
    }
}
