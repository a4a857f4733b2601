use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fairaudit::balance::{plan_rebalance, priors, sample_priors, Strategy};
use fairaudit::grouping::apply_grouping;
use fairaudit::ingest::{
    parse_predictions, parse_subjects, validate, write_predictions_csv, write_subjects_csv,
    RecordFilter,
};
use fairaudit::report::{build_audit, render_plan, render_report, Format, Provenance};
use fairaudit::simulator::{reference_roster, simulate, Model, SimSpec, DEFAULT_SAMPLES_PER_SUBJECT};
use fairaudit::{Attribute, Modality, PredictionRecord, Roster};

#[derive(Debug, Parser)]
#[command(name = "fairaudit", version, about = "Group fairness audits for identification logs")]
struct Cli {
    /// Worker threads (defaults to rayon's choice). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-group performance and DPD / EOD for a prediction log.
    Audit(AuditArgs),
    /// Generate a synthetic prediction log.
    Simulate(SimulateArgs),
    /// Rebalancing plan for one demographic attribute.
    Plan(PlanArgs),
    /// Check a prediction log against a roster.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[arg(long)]
    subjects: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    /// Comma-separated attributes; `a+b` audits the intersection of a and b.
    #[arg(long, value_delimiter = ',', default_value = "age,gender,ethnicity")]
    group_by: Vec<String>,
    #[arg(long, default_value = "table")]
    format: String,
    /// e.g. `modality=thermal,masked=yes`
    #[arg(long)]
    filter: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    model: String,
    /// Accuracy for `--model accuracy`.
    #[arg(long)]
    p: Option<f64>,
    /// Per-group accuracy for `--model group-accuracy`, as LABEL=P.
    #[arg(long = "group-p")]
    group_p: Vec<String>,
    /// Attribute the `--group-p` labels refer to.
    #[arg(long)]
    group_by: Option<String>,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_SAMPLES_PER_SUBJECT)]
    samples_per_subject: u64,
    #[arg(long, conflicts_with = "reference_roster")]
    subjects: Option<PathBuf>,
    #[arg(long)]
    reference_roster: bool,
    #[arg(long, default_value = "visual")]
    modality: String,
    #[arg(long)]
    masked: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[arg(long)]
    subjects: PathBuf,
    /// Balance sample counts from this log instead of subject counts.
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long)]
    attribute: String,
    #[arg(long)]
    strategy: String,
    #[arg(long, default_value = "table")]
    format: String,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    subjects: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
}

/// Exit 1: invalid input or spec. Exit 2: I/O failure.
#[derive(Debug)]
enum CliError {
    Invalid(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Writes via a temporary file in the same directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn load_roster(path: &Path) -> Result<(Roster, Vec<u8>), CliError> {
    let bytes = read(path)?;
    let roster = parse_subjects(bytes.as_slice())
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    Ok((roster, bytes))
}

fn load_log(path: &Path, roster: &Roster) -> Result<(Vec<PredictionRecord>, Vec<u8>), CliError> {
    let bytes = read(path)?;
    let parsed = parse_predictions(bytes.as_slice(), roster)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    for w in &parsed.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok((parsed.value, bytes))
}

fn parse_attributes(names: &[String]) -> Result<Vec<Attribute>, CliError> {
    names
        .iter()
        .filter(|n| !n.trim().is_empty())
        .map(|n| n.trim().parse::<Attribute>().map_err(invalid))
        .collect()
}

fn audit(args: AuditArgs) -> Result<(), CliError> {
    let format: Format = args.format.parse().map_err(invalid)?;
    let filter: RecordFilter = match &args.filter {
        Some(f) => f.parse().map_err(invalid)?,
        None => RecordFilter::default(),
    };
    let attributes = parse_attributes(&args.group_by)?;
    let (roster, subjects_bytes) = load_roster(&args.subjects)?;
    let (log, predictions_bytes) = load_log(&args.predictions, &roster)?;
    let log = filter.apply(log);
    let report = build_audit(
        &roster,
        &log,
        &attributes,
        &Provenance {
            subjects_bytes: &subjects_bytes,
            predictions_bytes: &predictions_bytes,
            filter: filter.to_string(),
        },
    )
    .map_err(invalid)?;
    let rendered = render_report(&report, format);
    match &args.out {
        Some(path) => write_atomic(path, &rendered),
        None => std::io::stdout()
            .write_all(&rendered)
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

fn parse_group_p(entries: &[String]) -> Result<BTreeMap<String, f64>, CliError> {
    entries
        .iter()
        .map(|e| {
            let (label, p) = e
                .rsplit_once('=')
                .ok_or_else(|| invalid(format!("--group-p '{e}' must look like LABEL=P")))?;
            let p: f64 = p
                .parse()
                .map_err(|_| invalid(format!("--group-p '{e}': '{p}' is not a number")))?;
            Ok((label.to_owned(), p))
        })
        .collect()
}

fn simulate_cmd(args: SimulateArgs) -> Result<(), CliError> {
    let model = match args.model.as_str() {
        "perfect" => Model::Perfect,
        "uniform" => Model::Uniform,
        "accuracy" => Model::Accuracy(
            args.p
                .ok_or_else(|| invalid("--model accuracy requires --p"))?,
        ),
        "group-accuracy" => {
            let attribute = args
                .group_by
                .as_deref()
                .ok_or_else(|| invalid("--model group-accuracy requires --group-by"))?
                .parse()
                .map_err(invalid)?;
            Model::GroupAccuracy {
                attribute,
                probabilities: parse_group_p(&args.group_p)?,
            }
        }
        other => {
            return Err(invalid(format!(
                "unknown model '{other}' (expected perfect, uniform, accuracy or group-accuracy)"
            )))
        }
    };
    if args.p.is_some() && !matches!(model, Model::Accuracy(_)) {
        return Err(invalid("--p only applies to --model accuracy"));
    }
    if !args.group_p.is_empty() && !matches!(model, Model::GroupAccuracy { .. }) {
        return Err(invalid("--group-p only applies to --model group-accuracy"));
    }
    let modality = Modality::parse(&args.modality)
        .ok_or_else(|| invalid(format!("invalid modality '{}'", args.modality)))?;
    let roster = match (&args.subjects, args.reference_roster) {
        (Some(path), false) => load_roster(path)?.0,
        (None, true) => reference_roster(),
        _ => return Err(invalid("exactly one of --subjects or --reference-roster is required")),
    };

    let mut spec = SimSpec::new(roster, model, args.seed).with_samples(args.samples_per_subject);
    spec.modality = modality;
    spec.masked = args.masked;
    let log = simulate(&spec).map_err(invalid)?;

    fs::create_dir_all(&args.out).map_err(|e| CliError::Io(format!("{}: {e}", args.out.display())))?;
    let mut predictions = Vec::new();
    write_predictions_csv(&log, &mut predictions).map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&args.out.join("predictions.csv"), &predictions)?;
    if args.reference_roster {
        let mut subjects = Vec::new();
        write_subjects_csv(&spec.roster, &mut subjects).map_err(|e| CliError::Io(e.to_string()))?;
        write_atomic(&args.out.join("subjects.csv"), &subjects)?;
    }
    eprintln!(
        "wrote {} records for {} subjects to {}",
        log.len(),
        spec.roster.len(),
        args.out.display()
    );
    Ok(())
}

fn plan(args: PlanArgs) -> Result<(), CliError> {
    let format: Format = args.format.parse().map_err(invalid)?;
    let strategy: Strategy = args.strategy.parse().map_err(invalid)?;
    let attribute: Attribute = args.attribute.parse().map_err(invalid)?;
    let (roster, _) = load_roster(&args.subjects)?;
    let grouping = apply_grouping(&roster, &attribute).map_err(invalid)?;
    let dist = match &args.predictions {
        Some(path) => {
            let (log, _) = load_log(path, &roster)?;
            sample_priors(&log, &roster, &grouping)
        }
        None => priors(&roster, &grouping),
    }
    .map_err(invalid)?;
    let plan = plan_rebalance(&dist, strategy).map_err(invalid)?;
    std::io::stdout()
        .write_all(&render_plan(&plan, &attribute.to_string(), format))
        .map_err(|e| CliError::Io(e.to_string()))
}

fn validate_cmd(args: ValidateArgs) -> Result<(), CliError> {
    let (roster, _) = load_roster(&args.subjects)?;
    let (log, _) = load_log(&args.predictions, &roster)?;
    let report = validate(&log, &roster);
    let mut out = String::new();
    out.push_str(&format!("subjects: {}  records: {}\n", roster.len(), log.len()));
    for (attribute, totals) in &report.group_samples {
        let parts: Vec<String> = totals.iter().map(|(l, n)| format!("{l}={n}")).collect();
        out.push_str(&format!("{attribute}: {}\n", parts.join(" ")));
    }
    let (min, max) = report
        .subject_samples
        .values()
        .fold((u64::MAX, 0), |(lo, hi), &n| (lo.min(n), hi.max(n)));
    if !report.subject_samples.is_empty() {
        out.push_str(&format!("samples per subject: min {min} max {max}\n"));
    }
    for w in &report.warnings {
        out.push_str(&format!("warning: {w}\n"));
    }
    for v in &report.violations {
        out.push_str(&format!("violation: {v}\n"));
    }
    print!("{out}");
    if report.is_valid() {
        Ok(())
    } else {
        Err(CliError::Invalid(format!("{} violation(s)", report.violations.len())))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Audit(a) => audit(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Plan(a) => plan(a),
        Command::Validate(a) => validate_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = match &e {
                CliError::Invalid(m) | CliError::Io(m) => m,
            };
            eprintln!("error: {msg}");
            ExitCode::from(e.exit_code())
        }
    }
}
