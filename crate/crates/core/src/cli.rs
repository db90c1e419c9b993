//! Command-line front end: configuration, dispatch, and artifacts.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use crate::bubble::{self, evaluate_corpus, load_corpus, Fixture, HypothesisThresholds};
use crate::continuation::{
    no_bubble_scan, run_continuation, ContinuationSchedule, CurvatureTarget, MassSample,
};
use crate::error::{invalid, CmlError, Result};
use crate::field::{io, Chart};
use crate::green::singular_part;
use crate::measure::{flux_profile, Divisor, CONCENTRATION_THRESHOLD};
use crate::point::Point;
use crate::report::{self, RunReport};
use crate::solver::{uniqueness_probe, CurvatureSpec, Problem, SolverOptions};

#[derive(Debug, Parser)]
#[command(
    name = "cml",
    version,
    about = "Singular Liouville solver and bubble-tree diagnostics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for report.json, CSV series and grids.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Grid size per axis (power of two, at least 8).
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Newton residual tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Seed for randomized probes.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Solve the singular Liouville equation on the torus.
    Solve,
    /// Cone-to-cusp continuation.
    ContinueCusp,
    /// Solve, then scan disks for curvature concentration.
    Scan,
    /// Three-circle check on a fixture.
    ThreeCircle,
    /// Neck area profile on a fixture.
    Neck,
    /// Bubble-tree area identity on a fixture.
    AreaIdentity,
    /// Re-emit a report and its CSV series.
    Report {
        /// Path to a report.json written earlier.
        input: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::ContinueCusp => "continue-cusp",
            Command::Scan => "scan",
            Command::ThreeCircle => "three-circle",
            Command::Neck => "neck",
            Command::AreaIdentity => "area-identity",
            Command::Report { .. } => "report",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub x: f64,
    pub y: f64,
    pub beta: f64,
}

fn default_grid() -> usize {
    128
}
fn default_tol() -> f64 {
    1e-10
}
fn default_curvature() -> f64 {
    -1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Constant curvature, used unless `curvature_grid` is set.
    #[serde(default = "default_curvature")]
    pub curvature: f64,
    /// CMLGRID1 file with a torus curvature sample.
    pub curvature_grid: Option<PathBuf>,
    /// Pinching constant Λ for a rough curvature target.
    pub lambda: Option<f64>,
    #[serde(default)]
    pub atoms: Vec<AtomConfig>,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            grid: default_grid(),
            tol: default_tol(),
            curvature: default_curvature(),
            curvature_grid: None,
            lambda: None,
            atoms: Vec::new(),
        }
    }
}

fn default_stages() -> u32 {
    10
}
fn yes() -> bool {
    true
}
fn default_cusps() -> Vec<AtomConfig> {
    vec![AtomConfig {
        x: 0.5,
        y: 0.5,
        beta: -1.0,
    }]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuationConfig {
    #[serde(default = "default_stages")]
    pub stages: u32,
    #[serde(default = "yes")]
    pub warm_start: bool,
    /// Target divisor; weight −1 marks a cusp.
    #[serde(default = "default_cusps")]
    pub atoms: Vec<AtomConfig>,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        ContinuationConfig {
            stages: default_stages(),
            warm_start: true,
            atoms: default_cusps(),
        }
    }
}

fn default_radii() -> Vec<f64> {
    vec![0.0625, 0.125, 0.25]
}
fn default_threshold() -> f64 {
    CONCENTRATION_THRESHOLD
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            radii: default_radii(),
            threshold: default_threshold(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniquenessConfig {
    /// Random restarts after the main solve (0 disables the probe).
    #[serde(default)]
    pub trials: usize,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureConfig {
    pub path: Option<PathBuf>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
}

/// Contents of the `--config` file. Relative paths are resolved against
/// the file's directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub continuation: ContinuationConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default)]
    pub uniqueness: UniquenessConfig,
    #[serde(default)]
    pub fixture: FixtureConfig,
}

impl RunConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| invalid(format!("config: {e}")))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.out.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.problem.curvature_grid.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.fixture.path.as_mut() {
            resolve(p);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        RunConfig::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Applies command-line overrides and checks the invariants.
    fn finish(mut self, cli: &Cli) -> Result<Self> {
        if let Some(n) = cli.grid {
            self.problem.grid = n;
        }
        if let Some(t) = cli.tol {
            self.problem.tol = t;
        }
        if cli.seed.is_some() {
            self.seed = cli.seed;
        }
        if cli.out.is_some() {
            self.out = cli.out.clone();
        }
        let n = self.problem.grid;
        if n < 8 || !n.is_power_of_two() {
            return Err(invalid(format!(
                "grid size {n} must be a power of two and at least 8"
            )));
        }
        if !(self.problem.tol > 0.0) {
            return Err(invalid("tolerance must be positive"));
        }
        for p in [&self.problem.curvature_grid, &self.fixture.path]
            .into_iter()
            .flatten()
        {
            if !p.exists() {
                return Err(invalid(format!(
                    "referenced file {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(self)
    }
}

/// Outcome of a successful run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    HypothesisViolation,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::HypothesisViolation => 2,
        }
    }
}

fn divisor(atoms: &[AtomConfig]) -> Result<Divisor> {
    let pts = atoms.iter().map(|a| Point::new(a.x, a.y)).collect();
    let ws = atoms.iter().map(|a| a.beta).collect();
    Divisor::new(pts, ws)
}

fn curvature_target(p: &ProblemConfig) -> Result<CurvatureTarget> {
    match &p.curvature_grid {
        Some(path) => {
            let field = io::read_grid(path)?;
            if field.chart() != Chart::Torus {
                return Err(invalid("curvature grid must be a torus sample"));
            }
            Ok(CurvatureTarget::Grid {
                field,
                lambda: p.lambda.unwrap_or(1.0),
            })
        }
        None => Ok(CurvatureTarget::Constant(p.curvature)),
    }
}

fn curvature_spec(p: &ProblemConfig) -> Result<CurvatureSpec> {
    match curvature_target(p)? {
        CurvatureTarget::Constant(c) => CurvatureSpec::constant(c),
        CurvatureTarget::Grid { field, lambda } => {
            let spec = CurvatureSpec::grid(field)?;
            match p.lambda {
                Some(_) => spec.with_bounds(-lambda, -1.0 / lambda),
                None => Ok(spec),
            }
        }
    }
}

fn solver_options(p: &ProblemConfig) -> SolverOptions {
    SolverOptions {
        tol: p.tol,
        ..Default::default()
    }
}

fn load_fixture(cfg: &RunConfig) -> Result<Fixture> {
    let path = cfg
        .fixture
        .path
        .as_ref()
        .ok_or_else(|| invalid("this command needs [fixture] path in the config"))?;
    Fixture::load(path)
}

fn out_dir(cfg: &RunConfig, command: &str) -> PathBuf {
    cfg.out
        .clone()
        .unwrap_or_else(|| PathBuf::from("cml-out").join(command))
}

/// Parses `args`, runs the command, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            eprintln!("cml {}: error: {e}", cli.command.name());
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            1
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    if let Command::Report { input } = &cli.command {
        return rerun_report(input, cli.out.as_deref());
    }
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    }
    .finish(cli)?;
    let name = cli.command.name();
    let out = out_dir(&cfg, name);
    let mut rep = RunReport::new(name);
    let suite = cfg.fixture.path.as_ref().is_some_and(|p| p.is_dir());
    match &cli.command {
        Command::ThreeCircle | Command::Neck | Command::AreaIdentity if suite => {
            run_suite(&cfg, &out, &mut rep)?
        }
        Command::Solve => solve(&cfg, &out, &mut rep)?,
        Command::ContinueCusp => continue_cusp(&cfg, &mut rep)?,
        Command::Scan => scan(&cfg, &mut rep)?,
        Command::ThreeCircle => three_circle(&cfg, &mut rep)?,
        Command::Neck => neck(&cfg, &mut rep)?,
        Command::AreaIdentity => area_identity(&cfg, &mut rep)?,
        Command::Report { .. } => unreachable!("handled above"),
    }
    let outcome = if rep.hypothesis_violation {
        Outcome::HypothesisViolation
    } else {
        Outcome::Success
    };
    rep.exit_code = outcome.exit_code();
    let path = report::write_report(&rep, &out)?;
    println!("{}", path.display());
    Ok(outcome)
}

fn solve(cfg: &RunConfig, out: &Path, rep: &mut RunReport) -> Result<()> {
    let p = &cfg.problem;
    let div = divisor(&p.atoms)?;
    let problem = Problem::new(curvature_spec(p)?, singular_part(&div, p.grid)?)?;
    let sol = problem.solve(&problem.default_guess()?, &solver_options(p))?;
    std::fs::create_dir_all(out)?;
    io::write_grid(&sol.v, &out.join("v.cmlgrid"))?;
    if let Some(&p0) = div.points().first() {
        // Flux of u = S + v around the first atom, from four cells out to 1/4.
        let h = 1.0 / p.grid as f64;
        let mut radii = Vec::new();
        let mut r = 0.25;
        while r > 4.0 * h {
            radii.push(r);
            r *= 0.5;
        }
        radii.reverse();
        rep.flux = Some(flux_profile(&sol.conformal_factor(), p0, &radii)?);
    }
    let probe = if cfg.uniqueness.trials > 0 {
        Some(uniqueness_probe(
            &problem,
            cfg.uniqueness.trials,
            cfg.seed.unwrap_or(0),
            &solver_options(p),
        )?)
    } else {
        None
    };
    rep.details = json!({ "solution": sol.summary(), "uniqueness": probe });
    Ok(())
}

fn continue_cusp(cfg: &RunConfig, rep: &mut RunReport) -> Result<()> {
    let c = &cfg.continuation;
    let target = divisor(&c.atoms)?;
    let sched =
        ContinuationSchedule::cusp_default(&target, &curvature_target(&cfg.problem)?, c.stages)?
            .with_warm_start(c.warm_start);
    let run = run_continuation(&sched, cfg.problem.grid, &solver_options(&cfg.problem))?;
    rep.stages = run.stages.clone();
    rep.details = json!({
        "extrapolated_area": run.extrapolated_area,
        "extrapolation_error": run.extrapolation_error,
        "final": run.last.summary(),
    });
    Ok(())
}

fn scan(cfg: &RunConfig, rep: &mut RunReport) -> Result<()> {
    let p = &cfg.problem;
    let div = divisor(&p.atoms)?;
    let problem = Problem::new(curvature_spec(p)?, singular_part(&div, p.grid)?)?;
    let sol = problem.solve(&problem.default_guess()?, &solver_options(p))?;
    let scan = no_bubble_scan(
        &MassSample::from_solution(&sol),
        &cfg.scan.radii,
        cfg.scan.threshold,
    )?;
    rep.details = json!({ "solution": sol.summary(), "scan": scan });
    Ok(())
}

fn thresholds(cfg: &RunConfig) -> HypothesisThresholds {
    let d = HypothesisThresholds::default();
    HypothesisThresholds {
        lambda1: cfg.fixture.lambda1.unwrap_or(d.lambda1),
        lambda2: cfg.fixture.lambda2.unwrap_or(d.lambda2),
    }
}

fn three_circle(cfg: &RunConfig, rep: &mut RunReport) -> Result<()> {
    let fx = load_fixture(cfg)?;
    let tc = fx
        .three_circle
        .as_ref()
        .ok_or_else(|| invalid(format!("fixture {} has no [three_circle]", fx.name)))?;
    let r = bubble::three_circle_check(&fx.family, tc.k, tc.kappa, tc.length, tc.offset)?;
    rep.hypothesis_violation = r.hypothesis_violated();
    rep.details = json!({ "fixture": fx.name, "three_circle": r, "closed_form_error": r.closed_form_error() });
    Ok(())
}

fn neck(cfg: &RunConfig, rep: &mut RunReport) -> Result<()> {
    let fx = load_fixture(cfg)?;
    let nk = fx
        .neck
        .as_ref()
        .ok_or_else(|| invalid(format!("fixture {} has no [neck]", fx.name)))?;
    let prof = bubble::neck_area_profile(&fx.family.member(nk.k)?, nk.center, nk.r_in, nk.r_out)?;
    let sign = fx.family.sign_class();
    rep.hypothesis_violation = sign == bubble::SignClass::Violating;
    rep.annuli = prof.annuli.clone();
    rep.details =
        json!({ "fixture": fx.name, "sign_class": sign, "sup": prof.sup, "total": prof.total });
    Ok(())
}

fn area_identity(cfg: &RunConfig, rep: &mut RunReport) -> Result<()> {
    let fx = load_fixture(cfg)?;
    let r = bubble::area_identity_check(
        &fx.family,
        &fx.blowup_sequences()?,
        fx.window,
        &fx.indices(),
        thresholds(cfg),
    )?;
    rep.hypothesis_violation = r.hypothesis_violation;
    rep.details = json!({ "fixture": fx.name, "area_identity": r });
    Ok(())
}

/// Runs every fixture of a corpus directory in parallel. Each fixture gets
/// its own output directory; the top-level report holds one row per fixture.
fn run_suite(cfg: &RunConfig, out: &Path, rep: &mut RunReport) -> Result<()> {
    let dir = cfg
        .fixture
        .path
        .as_ref()
        .expect("suite mode needs a directory");
    let fixtures = load_corpus(dir)?;
    if fixtures.is_empty() {
        return Err(invalid(format!("no fixtures in {}", dir.display())));
    }
    let rows = evaluate_corpus(&fixtures, thresholds(cfg));
    let mut json_rows = Vec::new();
    for (fx, row) in fixtures.iter().zip(rows) {
        let row = row.map_err(|e| invalid(format!("fixture {}: {e}", fx.name)))?;
        let mut sub = RunReport::new(&rep.command);
        sub.hypothesis_violation = row.hypothesis_violation;
        sub.exit_code = if row.hypothesis_violation { 2 } else { 0 };
        sub.annuli = row
            .neck
            .as_ref()
            .map(|n| n.annuli.clone())
            .unwrap_or_default();
        sub.details = json!({ "fixture": row });
        report::write_report(&sub, &out.join(&fx.name))?;
        rep.hypothesis_violation |= row.hypothesis_violation;
        json_rows.push(serde_json::to_value(&row).map_err(|e| invalid(e.to_string()))?);
    }
    rep.details = json!({ "corpus": dir, "rows": json_rows });
    Ok(())
}

fn rerun_report(input: &Path, out: Option<&Path>) -> Result<Outcome> {
    let text = std::fs::read_to_string(input)
        .map_err(|e| CmlError::InvalidInput(format!("{}: {e}", input.display())))?;
    let rep = RunReport::read(input)?;
    let dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| input.parent().unwrap_or(Path::new(".")).to_path_buf());
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join(report::REPORT_JSON), report::reemit(&text)?)?;
    report::emit_plot_data(&rep, &dir)?;
    println!("{}", dir.join(report::REPORT_JSON).display());
    Ok(Outcome::Success)
}
