//! `koopman-pde` command line: dataset generation, spectra, identification
//! and sampling-time sweeps. Owns every file format.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Field, Grid1D};
use crate::identify::{
    direct_identify, lifting_identify, ts_convergence_study, GenerationParams, IdentificationResult,
};
use crate::koopman::{fit_dataset, spectrum};
use crate::observables::{build_burgers_basis, FunctionalSpec, WeightSpec};
use crate::operators::{Dictionary, TermRecord};
use crate::simulate::{
    generate_pairs_with, Boundary, InitialConditionFamily, IntegratorSettings, Model, Provenance,
    SnapshotDataset,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_BLOW_UP: i32 = 2;
pub const EXIT_INSUFFICIENT_DATA: i32 = 3;
pub const EXIT_LOGM_BRANCH: i32 = 4;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_PRECONDITION: i32 = 65;

#[derive(Parser, Debug)]
#[command(
    name = "koopman-pde",
    version,
    about = "Koopman spectra and lifting identification for PDE and graphon dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate a model from random initial conditions and write snapshot pairs.
    Simulate(SimulateArgs),
    /// Fit the Koopman matrix on a dataset and write its spectrum.
    Spectrum(SpectrumArgs),
    /// Estimate dictionary coefficients from a dataset.
    Identify(IdentifyArgs),
    /// Repeat lifting identification over decreasing sampling times.
    SweepTs(SweepArgs),
}

#[derive(Args, Debug)]
struct GenerationArgs {
    /// burgers, pde1, graphon, heat or custom:<path>
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 50)]
    pairs: usize,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Grid points; defaults to the model file's grid, 128 for pde1, 256 otherwise.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    generation: GenerationArgs,
    #[arg(long)]
    ts: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[arg(long)]
    data: PathBuf,
    /// burgers:<seed> or file:<path>
    #[arg(long)]
    basis: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum MethodArg {
    Lifting,
    Direct,
}

#[derive(Args, Debug)]
struct IdentifyArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    dict: PathBuf,
    /// e.g. bump:5, power:2, constant, sine:1+sine:2 or inline JSON
    #[arg(long)]
    weight: String,
    #[arg(long, value_enum, default_value_t = MethodArg::Lifting)]
    method: MethodArg,
    /// Dictionary file with true coefficients.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    generation: GenerationArgs,
    #[arg(long)]
    dict: PathBuf,
    #[arg(long)]
    weight: String,
    /// Comma-separated, strictly decreasing.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    ts_list: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

/// A failure with its process exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = exit_code(&e);
        let mut message = e.to_string();
        if code == EXIT_LOGM_BRANCH {
            message.push_str("; reduce --ts");
        }
        Failure { code, message }
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::BlowUp { .. } => EXIT_BLOW_UP,
        Error::InsufficientData { .. } => EXIT_INSUFFICIENT_DATA,
        Error::BranchCut { .. } => EXIT_LOGM_BRANCH,
        Error::Precondition(_) | Error::RankDeficient { .. } => EXIT_PRECONDITION,
        Error::Functional { source, .. } | Error::Study { source, .. } => exit_code(source),
        _ => EXIT_FAILURE,
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Identify(a) => cmd_identify(a),
        Command::SweepTs(a) => cmd_sweep_ts(a),
    };
    match outcome {
        Ok(summary) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(summary.as_bytes());
            EXIT_OK
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

// ---- file formats ----

#[derive(Serialize, Deserialize)]
struct PairRecord {
    u: Vec<f64>,
    u_next: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    grid: Grid1D,
    sampling_time: f64,
    provenance: Provenance,
    pairs: Vec<PairRecord>,
}

pub fn dataset_to_json(dataset: &SnapshotDataset) -> Result<String> {
    let file = DatasetFile {
        grid: dataset.grid,
        sampling_time: dataset.sampling_time,
        provenance: dataset.provenance.clone(),
        pairs: dataset
            .pairs
            .iter()
            .map(|(u, v)| PairRecord {
                u: u.values().to_vec(),
                u_next: v.values().to_vec(),
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&file)? + "\n")
}

pub fn dataset_from_json(text: &str) -> Result<SnapshotDataset> {
    let file: DatasetFile = serde_json::from_str(text)?;
    file.grid.validate()?;
    let tag = |values: Vec<f64>| -> Result<Field> {
        let f = Field::new(file.grid, values)?;
        match file.provenance.boundary {
            Boundary::DirichletZero => f.into_dirichlet(),
            Boundary::None => Ok(f),
        }
    };
    let pairs = file
        .pairs
        .into_iter()
        .map(|p| Ok((tag(p.u)?, tag(p.u_next)?)))
        .collect::<Result<Vec<_>>>()?;
    SnapshotDataset::new(file.grid, file.sampling_time, pairs, file.provenance)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DictionaryFile {
    List(Vec<TermRecord>),
    Wrapped { terms: Vec<TermRecord> },
}

/// A dictionary file is a JSON list of term records, optionally wrapped as
/// `{"terms": [...]}`.
pub fn dictionary_from_json(text: &str) -> Result<Dictionary> {
    let records = match serde_json::from_str::<DictionaryFile>(text)? {
        DictionaryFile::List(r) | DictionaryFile::Wrapped { terms: r } => r,
    };
    Dictionary::from_records(records)
}

pub fn dictionary_to_json(dict: &Dictionary) -> Result<String> {
    Ok(serde_json::to_string_pretty(&dict.records())? + "\n")
}

/// Custom model file: `{"name", "grid", "boundary", "terms", "family"}`.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    #[serde(default = "custom_name")]
    name: String,
    grid: Grid1D,
    boundary: Boundary,
    terms: Vec<TermRecord>,
    #[serde(default)]
    family: Option<InitialConditionFamily>,
}

fn custom_name() -> String {
    "custom".into()
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn load_model(spec: &str, grid: Option<usize>) -> Result<(Model, InitialConditionFamily), Failure> {
    if let Some(path) = spec.strip_prefix("custom:") {
        let file: ModelFile = serde_json::from_str(&read(Path::new(path))?).map_err(Error::from)?;
        let mut g = file.grid;
        if let Some(n) = grid {
            g = Grid1D::new(g.x_min, g.x_max, n)?;
        }
        let family = file
            .family
            .or_else(|| InitialConditionFamily::for_model(&file.name))
            .ok_or_else(|| {
                Failure::usage("custom model needs a `family` for its initial conditions")
            })?;
        let dict = Dictionary::from_records(file.terms)?;
        return Ok((Model::new(file.name, dict, g, file.boundary)?, family));
    }
    let model = Model::builtin(spec, grid)?.ok_or_else(|| {
        Failure::usage(format!(
            "unknown model {spec:?}; expected burgers, pde1, graphon, heat or custom:<path>"
        ))
    })?;
    let family = InitialConditionFamily::for_model(spec).expect("built-in models have a family");
    Ok((model, family))
}

fn parse_weight(text: &str) -> Result<WeightSpec, Failure> {
    WeightSpec::parse(text).map_err(|e| Failure::usage(format!("--weight: {e}")))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

// ---- commands ----

fn cmd_simulate(a: SimulateArgs) -> Result<String, Failure> {
    let g = &a.generation;
    let (model, family) = load_model(&g.model, g.grid)?;
    let trajectories = g.trajectories.unwrap_or(g.pairs.min(10));
    let dataset = generate_pairs_with(
        &model,
        family,
        trajectories,
        g.pairs,
        a.ts,
        g.seed,
        &IntegratorSettings::default(),
    )?;
    write_atomic(&a.out, dataset_to_json(&dataset)?.as_bytes())?;
    Ok(format!(
        "model {}: m = {}, trajectories = {}, grid = {} points on [{}, {}], t_s = {}\nwrote {}\n",
        model.name,
        dataset.len(),
        trajectories,
        model.grid.num_points,
        model.grid.x_min,
        model.grid.x_max,
        a.ts,
        a.out.display()
    ))
}

fn cmd_spectrum(a: SpectrumArgs) -> Result<String, Failure> {
    let dataset = dataset_from_json(&read(&a.data)?)?;
    let basis: Vec<FunctionalSpec> = if let Some(seed) = a.basis.strip_prefix("burgers:") {
        let seed = seed
            .parse()
            .map_err(|_| Failure::usage(format!("--basis: bad seed {seed:?}")))?;
        build_burgers_basis(seed)
    } else if let Some(path) = a.basis.strip_prefix("file:") {
        serde_json::from_str(&read(Path::new(path))?).map_err(Error::from)?
    } else {
        return Err(Failure::usage(
            "--basis expects burgers:<seed> or file:<path>",
        ));
    };
    let fit = fit_dataset(&dataset, &basis)?;
    let spec = spectrum(&fit)?;

    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record([
        "re_lambda_L",
        "im_lambda_L",
        "re_lambda_U",
        "im_lambda_U",
        "residual_score",
    ])
    .map_err(Error::from)?;
    for r in &spec.records {
        csv.write_record([
            fmt_opt(r.lambda_l.map(|l| l.re)),
            fmt_opt(r.lambda_l.map(|l| l.im)),
            r.lambda_u.re.to_string(),
            r.lambda_u.im.to_string(),
            r.residual_score.to_string(),
        ])
        .map_err(Error::from)?;
    }
    let bytes = csv.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(&a.out, &bytes)?;

    let mut out = format!(
        "m = {}, n = {}, rank = {}, fit residual = {:.3e}\nlowest-residual generator eigenvalues:\n",
        dataset.len(),
        fit.dim(),
        fit.rank_used,
        fit.residual
    );
    for r in spec.records.iter().take(5) {
        match r.lambda_l {
            Some(l) => writeln!(
                out,
                "  {:>12.6} {:+.6}i   residual {:.3e}",
                l.re, l.im, r.residual_score
            ),
            None => writeln!(
                out,
                "  (λ_U = {} on the negative axis)   residual {:.3e}",
                r.lambda_u, r.residual_score
            ),
        }
        .ok();
    }
    writeln!(out, "wrote {}", a.out.display()).ok();
    Ok(out)
}

fn cmd_identify(a: IdentifyArgs) -> Result<String, Failure> {
    let weight = parse_weight(&a.weight)?;
    let dataset = dataset_from_json(&read(&a.data)?)?;
    let dict = dictionary_from_json(&read(&a.dict)?)?;
    let truth = match &a.truth {
        Some(p) => {
            let t = dictionary_from_json(&read(p)?)?;
            if t.coefficients().is_none() {
                return Err(Failure::usage("--truth dictionary has no coefficients"));
            }
            Some(t)
        }
        None => None,
    };
    let result = match a.method {
        MethodArg::Lifting => lifting_identify(&dataset, &dict, &weight)?,
        MethodArg::Direct => direct_identify(&dataset, &dict, &weight)?,
    };
    write_atomic(&a.out, &identification_csv(&result, truth.as_ref())?)?;

    let mut out = format!(
        "method {:?}: m = {}, n = {}, t_s = {}\n",
        result.method,
        dataset.len(),
        result.estimates.len(),
        result.t_s
    )
    .to_lowercase();
    if result.diagnostics.ill_conditioned {
        writeln!(
            out,
            "warning: eigenvector matrix of U is ill-conditioned (cond ≈ {:.2e}); estimates may be inaccurate",
            result.diagnostics.logm_condition.unwrap_or(f64::NAN)
        )
        .ok();
    }
    if let Some(t) = &truth {
        writeln!(out, "max abs error: {}", result.max_abs_error(t)).ok();
    }
    writeln!(out, "wrote {}", a.out.display()).ok();
    Ok(out)
}

/// Rows in the order of the caller's dictionary.
fn identification_csv(
    result: &IdentificationResult,
    truth: Option<&Dictionary>,
) -> Result<Vec<u8>> {
    let mut rows: Vec<usize> = (0..result.estimates.len()).collect();
    rows.sort_by_key(|&i| result.original_index[i]);
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record([
        "term_index",
        "term_descriptor",
        "c_true",
        "c_hat",
        "abs_error",
    ])?;
    for i in rows {
        let term = result.dictionary.terms()[i];
        let c_hat = result.estimates[i];
        let c_true = truth.map(|t| t.coefficient_of(&term));
        csv.write_record([
            result.original_index[i].to_string(),
            term.to_string(),
            fmt_opt(c_true),
            c_hat.to_string(),
            fmt_opt(c_true.map(|c| (c_hat - c).abs())),
        ])?;
    }
    csv.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn cmd_sweep_ts(a: SweepArgs) -> Result<String, Failure> {
    if a.ts_list.len() < 3 {
        return Err(Failure::usage(format!(
            "--ts-list needs at least 3 sampling times, got {}",
            a.ts_list.len()
        )));
    }
    let weight = parse_weight(&a.weight)?;
    let g = &a.generation;
    let (model, family) = load_model(&g.model, g.grid)?;
    let dict = dictionary_from_json(&read(&a.dict)?)?;
    let params = GenerationParams {
        family,
        num_trajectories: g.trajectories.unwrap_or(g.pairs.min(10)),
        num_pairs: g.pairs,
        seed: g.seed,
        settings: IntegratorSettings::default(),
    };
    let report = ts_convergence_study(&model, &dict, &weight, &a.ts_list, &params)?;

    let mut csv = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["ts".to_string(), "max_abs_error".to_string()];
    header.extend(report.terms.iter().map(|t| t.to_string()));
    csv.write_record(&header).map_err(Error::from)?;
    for e in &report.entries {
        let mut row = vec![e.t_s.to_string(), e.max_error.to_string()];
        row.extend(e.errors.iter().map(|v| v.to_string()));
        csv.write_record(&row).map_err(Error::from)?;
    }
    let bytes = csv.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(&a.out, &bytes)?;

    let mut out = String::new();
    for e in &report.entries {
        writeln!(
            out,
            "t_s = {:<10} max abs error = {:.6e}",
            e.t_s, e.max_error
        )
        .ok();
    }
    let decreasing = report
        .entries
        .windows(2)
        .all(|w| w[1].max_error < w[0].max_error);
    let verdict = match (report.converging, decreasing) {
        (true, true) => "converging (monotone decrease)",
        (true, false) => "converging (not monotone)",
        (false, _) => "not converging",
    };
    writeln!(out, "verdict: {verdict}\nwrote {}", a.out.display()).ok();
    Ok(out)
}
