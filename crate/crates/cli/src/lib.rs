//! Command-line front end for the `censpin` library.
//!
//! [`run`] parses arguments, dispatches a subcommand and returns the exit code together
//! with everything that would be printed, so the binary and the tests share one path.

pub mod format;
pub mod verify;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use censpin::bethe::{
    count_solutions, magnetization_of_m, solve_hom_qpoly, solve_inhom_newton, BetheError, BetheModel,
    BetheOptions, BetheState,
};
use censpin::dynamics::{run_timeseries_cached, prepare, uniform_grid, Observable};
use censpin::modes::{Method, ModeCache};
use censpin::oracle::{build_dense, oracle_timeseries, MAX_DIM};
use censpin::quantum::QuantumError;
use censpin::sector::{build_sector, full_spectrum, Level};
use censpin::{HalfInt, InhomModelParams, ModelParams, SectorKey};

use format::{csv_string, json_string, sig12, Pair};

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Input(String),
    Numeric(String),
    NoSolutions(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::NoSolutions(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numeric(m) | CliError::NoSolutions(m) => m,
        }
    }
}

impl From<QuantumError> for CliError {
    fn from(e: QuantumError) -> Self {
        CliError::Input(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "censpin", version, about = "Spin-s central spin model: spectra, Bethe roots and dynamics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Energy levels from the (j, m) block decomposition.
    Spectrum(SpectrumArgs),
    /// Bethe roots with M rapidities (homogeneous, or inhomogeneous with --epsilons).
    Bethe(BetheArgs),
    /// Number of Bethe solutions per M and the level-count sum rule.
    Count(CountArgs),
    /// Central-spin observables for a coherent bath state.
    Evolve(EvolveArgs),
    /// Cross-check every module against the dense oracle.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Central spin as an integer or half-integer, e.g. 1/2, 1, 3/2.
    #[arg(long = "s", value_parser = parse_spin)]
    pub s: HalfInt,
    /// Number of bath spins.
    #[arg(long = "N")]
    pub n: Option<usize>,
    /// Coupling constant.
    #[arg(long = "A", default_value_t = 1.0, allow_negative_numbers = true)]
    pub a: f64,
    /// Magnetic field.
    #[arg(long = "B", default_value_t = 1.0, allow_negative_numbers = true)]
    pub b: f64,
}

impl ModelArgs {
    fn bath(&self) -> Result<usize, CliError> {
        self.n.ok_or_else(|| CliError::Input("--N is required".into()))
    }

    fn params(&self) -> Result<ModelParams, CliError> {
        Ok(ModelParams::new(self.s, self.bath()?, self.a, self.b)?)
    }
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Args, Debug, Clone)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Restrict to one block, given as "j,m".
    #[arg(long)]
    pub sector: Option<String>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct BetheArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of Bethe roots.
    #[arg(long = "M")]
    pub m: usize,
    /// File with one real per line, or an inline comma-separated list; eps0 first.
    #[arg(long, allow_hyphen_values = true)]
    pub epsilons: Option<String>,
    #[arg(long, default_value_t = 200)]
    pub starts: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol_newton: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_bethe: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol_root: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct CountArgs {
    #[arg(long = "s", value_parser = parse_spin)]
    pub s: HalfInt,
    #[arg(long = "N")]
    pub n: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Polar angle of the bath coherent state: radians, or a multiple of pi like "0.5pi".
    #[arg(long, default_value = "0.5pi", value_parser = parse_theta)]
    pub theta: f64,
    #[arg(long, default_value_t = 40.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 4000)]
    pub t_steps: usize,
    /// Comma-separated subset of entropy, purity, sz, sminus2, loschmidt, norm.
    #[arg(long, default_value = "entropy,purity,sz,sminus2,loschmidt")]
    pub observables: String,
    #[arg(long, default_value = "spectral", value_parser = parse_method)]
    pub method: Method,
    /// Compare every column against the dense oracle.
    #[arg(long)]
    pub verify: bool,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_verify: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "0.5pi", value_parser = parse_theta)]
    pub theta: f64,
    #[arg(long, default_value_t = 10.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 50)]
    pub t_steps: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Random starts per M for the Bethe check.
    #[arg(long, default_value_t = 40)]
    pub starts: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn parse_spin(s: &str) -> Result<HalfInt, String> {
    s.parse::<HalfInt>().map_err(|e| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

/// Radians, or `<x>pi`, `<x>*pi`, `pi/<y>`, with `π` accepted for `pi`.
pub fn parse_theta(text: &str) -> Result<f64, String> {
    let t = text.trim().replace('π', "pi");
    let bad = || format!("invalid angle {text:?}");
    let value = if let Some(rest) = t.strip_prefix("pi/") {
        std::f64::consts::PI / rest.trim().parse::<f64>().map_err(|_| bad())?
    } else if let Some(coef) = t.strip_suffix("pi") {
        let coef = coef.trim().trim_end_matches('*').trim();
        let c = match coef {
            "" => 1.0,
            "-" => -1.0,
            c => c.parse::<f64>().map_err(|_| bad())?,
        };
        c * std::f64::consts::PI
    } else {
        t.parse::<f64>().map_err(|_| bad())?
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}

/// What a command produced: the main output and a human-readable note for stderr.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub body: String,
    pub note: String,
    pub code: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome { code: 2, stdout: String::new(), stderr: text }
            } else {
                Outcome { code: 0, stdout: text, stderr: String::new() }
            };
        }
    };
    let (result, output) = match &cli.command {
        Command::Spectrum(a) => (cmd_spectrum(a), a.out.output.clone()),
        Command::Bethe(a) => (cmd_bethe(a), a.out.output.clone()),
        Command::Count(a) => (cmd_count(a), a.out.output.clone()),
        Command::Evolve(a) => (cmd_evolve(a), a.out.output.clone()),
        Command::Verify(a) => (cmd_verify(a), a.output.clone()),
    };
    match result {
        Err(e) => Outcome { code: e.code(), stdout: String::new(), stderr: format!("error: {}\n", e.message()) },
        Ok(rep) => match output {
            Some(path) => match std::fs::write(&path, &rep.body) {
                Ok(()) => Outcome { code: rep.code, stdout: String::new(), stderr: rep.note },
                Err(e) => Outcome {
                    code: 2,
                    stdout: String::new(),
                    stderr: format!("error: cannot write {}: {e}\n", path.display()),
                },
            },
            None => Outcome { code: rep.code, stdout: rep.body, stderr: rep.note },
        },
    }
}

#[derive(Serialize)]
struct LevelRow {
    j: HalfInt,
    m: HalfInt,
    energy: f64,
    multiplicity: u128,
}

#[derive(Serialize)]
struct SpectrumJson<'a> {
    params: &'a ModelParams,
    levels: Vec<LevelRow>,
}

pub fn cmd_spectrum(args: &SpectrumArgs) -> Result<Report, CliError> {
    let p = args.model.params()?;
    let levels: Vec<Level> = match &args.sector {
        Some(text) => {
            let key = parse_sector(text)?;
            key.validate(p.s, p.n_bath)?;
            let block = build_sector(&p, key).map_err(|e| CliError::Numeric(e.to_string()))?;
            let multiplicity = censpin::quantum::bath_spin_multiplicity(p.n_bath, key.j);
            block.energies.iter().map(|&energy| Level { j: key.j, m: key.m, energy, multiplicity }).collect()
        }
        None => full_spectrum(&p).map_err(|e| CliError::Numeric(e.to_string()))?,
    };
    if levels.iter().any(|l| !l.energy.is_finite()) {
        return Err(CliError::Numeric("non-finite energy".into()));
    }
    let body = match args.out.format {
        Format::Csv => csv_string(
            &["j", "m", "E", "multiplicity"],
            levels.iter().map(|l| vec![l.j.to_string(), l.m.to_string(), sig12(l.energy), l.multiplicity.to_string()]),
        ),
        Format::Json => json_string(&SpectrumJson {
            params: &p,
            levels: levels
                .iter()
                .map(|l| LevelRow { j: l.j, m: l.m, energy: l.energy, multiplicity: l.multiplicity })
                .collect(),
        }),
    };
    Ok(Report { body, ..Default::default() })
}

fn parse_sector(text: &str) -> Result<SectorKey, CliError> {
    let bad = || CliError::Input(format!("--sector expects \"j,m\", got {text:?}"));
    let (j, m) = text.split_once(',').ok_or_else(bad)?;
    let j: HalfInt = j.trim().parse().map_err(|_| bad())?;
    let m: HalfInt = m.trim().parse().map_err(|_| bad())?;
    Ok(SectorKey::new(j, m))
}

fn parse_epsilons(text: &str) -> Result<Vec<f64>, CliError> {
    let path = std::path::Path::new(text);
    let content = if path.is_file() {
        std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {text}: {e}")))?
    } else {
        text.replace(',', "\n")
    };
    content
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.parse::<f64>().map_err(|_| CliError::Input(format!("invalid epsilon {l:?}"))))
        .collect()
}

#[derive(Serialize)]
struct StateJson {
    roots: Vec<Pair>,
    energy: f64,
    residual: f64,
}

#[derive(Serialize)]
struct BetheJson<'a> {
    params: &'a BetheModel,
    #[serde(rename = "M")]
    m_roots: usize,
    m: HalfInt,
    found: usize,
    expected: u128,
    singular: usize,
    states: Vec<StateJson>,
}

fn bethe_error(e: BetheError) -> CliError {
    match e {
        BetheError::NoSolutionFound { .. } => CliError::NoSolutions(e.to_string()),
        BetheError::RootCount { .. } | BetheError::ZeroCoupling => CliError::Input(e.to_string()),
        _ => CliError::Numeric(e.to_string()),
    }
}

pub fn cmd_bethe(args: &BetheArgs) -> Result<Report, CliError> {
    let opts = BetheOptions {
        starts: args.starts,
        seed: args.seed,
        tol_newton: args.tol_newton,
        tol_bethe: args.tol_bethe,
        tol_root: args.tol_root,
        ..BetheOptions::default()
    };
    let s = args.model.s;
    let mut note = String::new();
    let (model, states, singular) = match &args.epsilons {
        Some(text) => {
            let eps = parse_epsilons(text)?;
            if eps.len() < 2 {
                return Err(CliError::Input("--epsilons needs eps0 and at least one eps_j".into()));
            }
            if let Some(n) = args.model.n {
                if n != eps.len() - 1 {
                    return Err(CliError::Input(format!("--N {n} but {} bath epsilons", eps.len() - 1)));
                }
            }
            let p = InhomModelParams::new(s, args.model.b, eps[0], eps[1..].to_vec())?;
            let (states, distinct) = solve_inhom_newton(&p, args.m, &opts).map_err(bethe_error)?;
            if !distinct {
                note.push_str("warning: degenerate epsilons, the solution count is not rigorous\n");
            }
            (BetheModel::Inhomogeneous(p), states, 0)
        }
        None => {
            let p = args.model.params()?;
            let rep = solve_hom_qpoly(&p, args.m, &opts).map_err(bethe_error)?;
            let states: Vec<BetheState> = rep.solutions.into_iter().map(|s| s.state).collect();
            (BetheModel::Homogeneous(p), states, rep.singular)
        }
    };
    let n_bath = match &model {
        BetheModel::Homogeneous(p) => p.n_bath,
        BetheModel::Inhomogeneous(p) => p.n_bath(),
    };
    let expected = count_solutions(s, n_bath, args.m);
    note.push_str(&format!(
        "found {} of {} expected solutions ({} singular candidates excluded)\n",
        states.len(),
        expected,
        singular
    ));
    let body = match args.out.format {
        Format::Csv => {
            let mut rows = Vec::new();
            for (i, st) in states.iter().enumerate() {
                let head = vec![i.to_string(), sig12(st.energy), sig12(st.residual_inf)];
                if st.roots.is_empty() {
                    rows.push([head.clone(), vec![String::new(); 3]].concat());
                }
                for (a, z) in st.roots.iter().enumerate() {
                    rows.push([head.clone(), vec![a.to_string(), sig12(z.re), sig12(z.im)]].concat());
                }
            }
            csv_string(&["state", "energy", "residual", "root", "re", "im"], rows)
        }
        Format::Json => json_string(&BetheJson {
            params: &model,
            m_roots: args.m,
            m: magnetization_of_m(s, n_bath, args.m),
            found: states.len(),
            expected,
            singular,
            states: states
                .iter()
                .map(|st| StateJson {
                    roots: st.roots.iter().map(|&z| z.into()).collect(),
                    energy: st.energy,
                    residual: st.residual_inf,
                })
                .collect(),
        }),
    };
    Ok(Report { body, note, code: 0 })
}

#[derive(Serialize)]
struct CountRow {
    #[serde(rename = "M")]
    m_roots: usize,
    m: HalfInt,
    count: u128,
}

#[derive(Serialize)]
struct CountJson {
    s: HalfInt,
    #[serde(rename = "N")]
    n: usize,
    rows: Vec<CountRow>,
    total: u128,
    expected: u128,
    pass: bool,
}

pub fn cmd_count(args: &CountArgs) -> Result<Report, CliError> {
    let p = ModelParams::new(args.s, args.n, 1.0, 1.0)?;
    let rows: Vec<CountRow> = (0..=args.n + args.s.twice() as usize)
        .map(|m| CountRow { m_roots: m, m: magnetization_of_m(args.s, args.n, m), count: count_solutions(args.s, args.n, m) })
        .collect();
    let total: u128 = rows.iter().map(|r| r.count).sum();
    let expected = p.hilbert_dim();
    let pass = total == expected;
    let verdict = if pass { "PASS" } else { "FAIL" };
    let note = format!("total {total}, expected (2s+1)2^N = {expected}: {verdict}\n");
    let body = match args.out.format {
        Format::Csv => csv_string(
            &["M", "m", "count"],
            rows.iter().map(|r| vec![r.m_roots.to_string(), r.m.to_string(), r.count.to_string()]),
        ),
        Format::Json => json_string(&CountJson { s: args.s, n: args.n, rows, total, expected, pass }),
    };
    Ok(Report { body, note, code: if pass { 0 } else { 1 } })
}

#[derive(Serialize)]
struct SeriesJson<'a> {
    observable: Observable,
    values: &'a [f64],
}

#[derive(Serialize)]
struct EvolveJson<'a> {
    params: &'a ModelParams,
    theta: f64,
    times: &'a [f64],
    series: Vec<SeriesJson<'a>>,
}

fn parse_observables(text: &str) -> Result<Vec<Observable>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Observable>().map_err(|e| CliError::Input(e.to_string())))
        .collect()
}

pub fn cmd_evolve(args: &EvolveArgs) -> Result<Report, CliError> {
    let p = args.model.params()?;
    if !args.t_max.is_finite() || args.t_max < 0.0 {
        return Err(CliError::Input("--t-max must be finite and non-negative".into()));
    }
    let obs = parse_observables(&args.observables)?;
    let times = uniform_grid(args.t_max, args.t_steps);
    let cache = ModeCache::build(&p, args.method).map_err(|e| CliError::Numeric(e.to_string()))?;
    let prep = prepare(args.theta, p.n_bath);
    let ts = run_timeseries_cached(&cache, &prep, &times, &obs).map_err(|e| CliError::Numeric(e.to_string()))?;
    let mut note = String::new();
    let mut code = 0;
    if args.verify {
        if p.hilbert_dim() > MAX_DIM as u128 {
            return Err(CliError::Input(format!("--verify needs (2s+1)2^N <= {MAX_DIM}")));
        }
        let dm = build_dense(&p).map_err(|e| CliError::Input(e.to_string()))?;
        let exact = oracle_timeseries(&dm, args.theta, &times, &obs).map_err(|e| CliError::Numeric(e.to_string()))?;
        for (i, o) in obs.iter().enumerate() {
            let dev = ts.values[i].iter().zip(&exact[i]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let ok = dev <= args.tol_verify;
            if !ok {
                code = 1;
            }
            note.push_str(&format!("{o}: max deviation {dev:.3e} {}\n", if ok { "PASS" } else { "FAIL" }));
        }
    }
    let body = match args.out.format {
        Format::Csv => {
            let header: Vec<&str> = std::iter::once("t").chain(obs.iter().map(|o| o.name())).collect();
            csv_string(
                &header,
                ts.times.iter().enumerate().map(|(k, &t)| {
                    std::iter::once(sig12(t)).chain(ts.values.iter().map(|v| sig12(v[k]))).collect()
                }),
            )
        }
        Format::Json => json_string(&EvolveJson {
            params: &p,
            theta: args.theta,
            times: &ts.times,
            series: obs.iter().zip(&ts.values).map(|(&observable, v)| SeriesJson { observable, values: v }).collect(),
        }),
    };
    Ok(Report { body, note, code })
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<Report, CliError> {
    let p = args.model.params()?;
    if p.hilbert_dim() > MAX_DIM as u128 {
        return Err(CliError::Input(format!("verify needs (2s+1)2^N <= {MAX_DIM}")));
    }
    let times = uniform_grid(args.t_max, args.t_steps);
    let opts = BetheOptions { starts: args.starts, seed: args.seed, ..BetheOptions::default() };
    let report = verify::verify_model(&p, args.theta, &times, &opts, args.seed)?;
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    let note = if failed.is_empty() {
        format!("all {} checks PASS\n", report.checks.len())
    } else {
        format!("FAIL: {}\n", failed.join(", "))
    };
    Ok(Report { body: json_string(&report), note, code: if report.pass { 0 } else { 1 } })
}
