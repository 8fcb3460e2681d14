//! Scenario files and the command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::envelope::concavify;
use crate::error::{Error, Result};
use crate::numeric::ext_serde;
use crate::oracle::{brute_solve, grid_resolution, BruteResult, DiscreteInstance, Objective};
use crate::solver::{eval_g, solve, Classification, Plan, Problem, Side, SolveReport};
use crate::statespace::{
    normal_quantile, Atom, BenchmarkMap, ExpectationEngine, PiecewiseMap, PricingKernel, StateDistribution,
    DEFAULT_NODES,
};
use crate::utility::{
    AffineFamily, Custom, Digital, ModifiedSShaped, Piece, PiecewiseUtility, SShaped, TwoPiece, UtilityFamily,
};
use crate::varapp::{
    plan_benchmark, superiority_region, top_region, var_solution, var_solve_with, VarPlan, VarScenario, VarSolution, XiInterval,
};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "distribution", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateSpec {
    StandardNormal,
    Uniform { lo: f64, hi: f64 },
    Discrete { atoms: Vec<Atom> },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LognormalParams {
    pub r: f64,
    pub theta: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "form", content = "params", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelSpec {
    Lognormal(LognormalParams),
    Identity,
    Constant { value: f64 },
    Piecewise(PiecewiseMap),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeParams {
    pub k: f64,
    pub p: f64,
    #[serde(default)]
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DigitalParams {
    #[serde(default = "one")]
    pub height: f64,
    #[serde(default)]
    pub floor: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomParams {
    pub pieces: Vec<Piece>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "kebab-case", deny_unknown_fields)]
pub enum UtilitySpec {
    TwoPiece,
    SShaped(ShapeParams),
    ModifiedSShaped(ShapeParams),
    Digital(DigitalParams),
    Affine(AffineFamily),
    Custom(CustomParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum PlanChoice {
    I,
    II,
    III,
    #[serde(rename = "all")]
    All,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub plan: Option<PlanChoice>,
    pub levels: Option<[f64; 4]>,
    pub w: Option<f64>,
    pub constant: Option<Vec<f64>>,
    pub components: Option<Vec<PiecewiseMap>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub x0: f64,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineKind {
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSpec {
    pub mode: EngineKind,
    pub nodes: Option<usize>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub grid: Option<Vec<f64>>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub report: Option<String>,
    pub g_curve: Option<String>,
    pub envelope: Option<String>,
    pub solution_curve: Option<String>,
}

/// A scenario file; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub state: StateSpec,
    pub kernel: KernelSpec,
    pub utility: UtilitySpec,
    #[serde(default)]
    pub benchmark: BenchmarkSpec,
    pub problem: ProblemSpec,
    pub engine: Option<EngineSpec>,
    pub oracle: Option<OracleSpec>,
    #[serde(default)]
    pub outputs: OutputSpec,
}

fn key_error(e: serde_path_to_error::Error<serde_json::Error>) -> Error {
    let path = e.path().to_string();
    let msg = e.inner().to_string();
    let missing = msg.strip_prefix("missing field `").and_then(|m| m.split('`').next());
    let key = match (missing, path.as_str()) {
        (Some(f), ".") => f.to_string(),
        (Some(f), p) => format!("{p}.{f}"),
        (None, p) => p.to_string(),
    };
    Error::Scenario(format!("{key}: {msg}"))
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let s: Self = serde_path_to_error::deserialize(de).map_err(key_error)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Scenario(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<()> {
        if !self.problem.x0.is_finite() {
            return Err(Error::Scenario("problem.x0: must be finite".into()));
        }
        if let Some(a) = self.problem.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::Scenario(format!("problem.alpha: must lie in (0, 1), got {a}")));
            }
        }
        let b = &self.benchmark;
        let given = [b.plan.is_some(), b.constant.is_some(), b.components.is_some()];
        if given.iter().filter(|g| **g).count() > 1 {
            return Err(Error::Scenario("benchmark: give one of plan, constant or components".into()));
        }
        if b.plan.is_some() && (b.levels.is_none() || b.w.is_none()) {
            let key = if b.levels.is_none() { "levels" } else { "w" };
            return Err(Error::Scenario(format!("benchmark.{key}: required with a plan")));
        }
        self.distribution()?;
        self.pricing()?;
        self.family()?;
        Ok(())
    }

    pub fn distribution(&self) -> Result<StateDistribution> {
        let d = match &self.state {
            StateSpec::StandardNormal => Ok(StateDistribution::StandardNormal),
            StateSpec::Uniform { lo, hi } => StateDistribution::uniform(*lo, *hi),
            StateSpec::Discrete { atoms } => StateDistribution::discrete(atoms.clone()),
        };
        d.map_err(|e| Error::Scenario(format!("state: {e}")))
    }

    pub fn pricing(&self) -> Result<PricingKernel> {
        let k = match &self.kernel {
            KernelSpec::Lognormal(p) => PricingKernel::lognormal(p.r, p.theta, p.horizon),
            KernelSpec::Identity => Ok(PricingKernel::Identity),
            KernelSpec::Constant { value } => Ok(PricingKernel::Explicit(PiecewiseMap::constant(*value))),
            KernelSpec::Piecewise(m) => PiecewiseMap::new(m.pieces().to_vec()).map(PricingKernel::Explicit),
        };
        k.map_err(|e| Error::Scenario(format!("kernel.params: {e}")))
    }

    pub fn family(&self) -> Result<Arc<dyn UtilityFamily>> {
        let wrap = |e: Error| Error::Scenario(format!("utility.params: {e}"));
        Ok(match &self.utility {
            UtilitySpec::TwoPiece => Arc::new(TwoPiece),
            UtilitySpec::SShaped(s) => Arc::new(SShaped::new(s.k, s.p).map_err(wrap)?),
            UtilitySpec::ModifiedSShaped(s) => {
                if !(s.mu >= 0.0) {
                    return Err(Error::Scenario("utility.params.mu: must be nonnegative".into()));
                }
                Arc::new(ModifiedSShaped { base: SShaped::new(s.k, s.p).map_err(wrap)?, mu: s.mu })
            }
            UtilitySpec::Digital(d) => Arc::new(Digital { height: d.height, floor: d.floor }),
            UtilitySpec::Affine(a) => Arc::new(*a),
            UtilitySpec::Custom(c) => Arc::new(Custom(PiecewiseUtility::new(c.pieces.clone()).map_err(wrap)?)),
        })
    }

    fn plan_scenario(&self, plan: VarPlan) -> Result<VarScenario> {
        let b = &self.benchmark;
        let (levels, w) = (b.levels.expect("validated"), b.w.expect("validated"));
        self.var_scenario(plan, levels, w)
    }

    /// The scenario read as a probability-constrained plan comparison.
    pub fn var_scenario(&self, plan: VarPlan, levels: [f64; 4], w: f64) -> Result<VarScenario> {
        let (k, p) = match &self.utility {
            UtilitySpec::SShaped(s) | UtilitySpec::ModifiedSShaped(s) => (s.k, s.p),
            _ => return Err(Error::Scenario("utility.family: var-solve needs s-shaped".into())),
        };
        let KernelSpec::Lognormal(m) = &self.kernel else {
            return Err(Error::Scenario("kernel.form: var-solve needs lognormal".into()));
        };
        if self.state != StateSpec::StandardNormal {
            return Err(Error::Scenario("state.distribution: var-solve needs standard-normal".into()));
        }
        let alpha = self
            .problem
            .alpha
            .ok_or_else(|| Error::Scenario("problem.alpha: required by var-solve".into()))?;
        let s = VarScenario {
            p,
            k,
            r: m.r,
            theta: m.theta,
            horizon: m.horizon,
            x0: self.problem.x0,
            plan,
            levels,
            w,
            alpha,
        };
        s.validate().map_err(|e| Error::Scenario(format!("benchmark: {e}")))?;
        Ok(s)
    }

    pub fn benchmark_map(&self) -> Result<BenchmarkMap> {
        let b = &self.benchmark;
        if let Some(plan) = b.plan {
            let plan = match plan {
                PlanChoice::I => VarPlan::I,
                PlanChoice::II => VarPlan::II,
                PlanChoice::III => VarPlan::III,
                PlanChoice::All => {
                    return Err(Error::Scenario("benchmark.plan: \"all\" is for var-solve only".into()))
                }
            };
            return Ok(plan_benchmark(plan, b.levels.expect("validated"), b.w.expect("validated")));
        }
        if let Some(c) = &b.constant {
            return Ok(BenchmarkMap::constant(c));
        }
        if let Some(c) = &b.components {
            let mut maps = Vec::new();
            for m in c {
                maps.push(
                    PiecewiseMap::new(m.pieces().to_vec())
                        .map_err(|e| Error::Scenario(format!("benchmark.components: {e}")))?,
                );
            }
            return Ok(BenchmarkMap::new(maps));
        }
        Ok(BenchmarkMap::none())
    }

    pub fn engine(&self, flags: &EngineFlags) -> ExpectationEngine {
        let spec = self.engine.as_ref();
        let seed = flags.seed.or(spec.and_then(|e| e.seed)).unwrap_or(0);
        if let Some(n) = flags.samples {
            return ExpectationEngine::monte_carlo(n, seed);
        }
        if let Some(n) = flags.nodes {
            return ExpectationEngine::quadrature(n);
        }
        match spec {
            Some(EngineSpec { mode: EngineKind::MonteCarlo, samples, .. }) => {
                ExpectationEngine::monte_carlo(samples.unwrap_or(100_000), seed)
            }
            Some(EngineSpec { nodes, .. }) => ExpectationEngine::quadrature(nodes.unwrap_or(DEFAULT_NODES)),
            None => ExpectationEngine::default(),
        }
    }

    pub fn problem(&self, flags: &EngineFlags) -> Result<Problem> {
        Problem::new(
            self.distribution()?,
            self.pricing()?,
            self.family()?,
            self.benchmark_map()?,
            self.problem.x0,
            self.engine(flags),
        )
    }
}

/// Engine overrides from the command line.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineFlags {
    pub nodes: Option<usize>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Parser)]
#[command(name = "euopt", about = "Budget-constrained expected-utility optimizer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub nodes: Option<usize>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the budget problem.
    Solve,
    /// Bind the probability constraint for one plan or all three.
    VarSolve,
    /// Tabulate g over a multiplier range.
    GCurve {
        #[arg(long = "lambda-min")]
        lambda_min: Option<f64>,
        #[arg(long = "lambda-max")]
        lambda_max: Option<f64>,
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Tabulate the utility and its concave envelope per benchmark region.
    EnvelopeDump,
    /// Brute-force a discrete scenario under U and its envelope.
    Oracle,
}

/// Exit status: 0 success, 2 infeasible or unreachable, 1 error.
pub fn main_with(args: impl IntoIterator<Item = impl Into<OsString> + Clone>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    if let Some(n) = std::env::var("OPTIMIZER_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Infeasible { .. } | Error::ConstraintUnreachable { .. } => 2,
                _ => 1,
            }
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    let path = cli
        .scenario
        .as_ref()
        .ok_or_else(|| Error::Scenario("--scenario is required".into()))?;
    let scenario = ScenarioFile::load(path)?;
    let flags = EngineFlags { nodes: cli.nodes, samples: cli.samples, seed: cli.seed };
    fs::create_dir_all(&cli.out).map_err(|e| io_err(&cli.out, e))?;
    let out = Outputs { dir: cli.out.clone(), names: scenario.outputs.clone() };
    match &cli.command {
        Command::Solve => run_solve(&scenario, &flags, &out),
        Command::VarSolve => run_var(&scenario, &flags, &out),
        Command::GCurve { lambda_min, lambda_max, points } => {
            run_g_curve(&scenario, &flags, &out, *lambda_min, *lambda_max, *points)
        }
        Command::EnvelopeDump => run_envelope(&scenario, &flags, &out),
        Command::Oracle => run_oracle(&scenario, &flags, &out),
    }
}

struct Outputs {
    dir: PathBuf,
    names: OutputSpec,
}

impl Outputs {
    fn path(&self, chosen: &Option<String>, default: &str) -> PathBuf {
        self.dir.join(chosen.as_deref().unwrap_or(default))
    }

    fn report(&self) -> PathBuf {
        self.path(&self.names.report, "report.json")
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Scenario(format!("{}: {e}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn num(v: f64) -> String {
    ext_serde::format(v)
}

/// States at which solution curves are tabulated.
fn curve_states(dist: &StateDistribution) -> Vec<f64> {
    const N: usize = 400;
    match dist {
        StateDistribution::StandardNormal => {
            (0..N).map(|i| normal_quantile((i as f64 + 0.5) / N as f64)).collect()
        }
        StateDistribution::Uniform { lo, hi } => {
            (0..N).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / N as f64).collect()
        }
        StateDistribution::Discrete(atoms) => atoms.iter().map(|a| a.value).collect(),
    }
}

fn plan_label(p: &Plan) -> &'static str {
    match p {
        Plan::Selection { side: Side::Lower, .. } => "lower",
        Plan::Selection { side: Side::Upper, .. } => "upper",
        Plan::Floor => "floor",
        Plan::Bliss => "bliss",
        Plan::Shifted { .. } => "shifted",
        Plan::Window { .. } => "window",
        Plan::Atoms { .. } => "atoms",
    }
}

fn status_of(c: Classification) -> i32 {
    if c == Classification::Infeasible {
        2
    } else {
        0
    }
}

fn run_solve(s: &ScenarioFile, flags: &EngineFlags, out: &Outputs) -> Result<i32> {
    let p = s.problem(flags)?;
    let rep = solve(&p)?;
    write_json(&out.report(), &rep)?;
    if let Some(sol) = rep.solution() {
        let label = plan_label(sol.plan());
        let mut rows = Vec::new();
        for w in curve_states(p.dist()) {
            rows.push((p.xi(w), sol.eval(w)?));
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        write_rows(
            &out.path(&out.names.solution_curve, "solution_curve.csv"),
            &["xi", "x_star", "plan"],
            rows.into_iter().map(|(xi, x)| vec![num(xi), num(x), label.to_string()]),
        )?;
    }
    summary(&rep);
    Ok(status_of(rep.classification))
}

fn summary(rep: &SolveReport) {
    let mut line = format!("classification={:?} case={}", rep.classification, rep.case);
    if let Some(l) = rep.lambda_star {
        line += &format!(" lambda*={l}");
    }
    if let Some(m) = rep.mu_star {
        line += &format!(" mu*={m}");
    }
    line += &format!(" value={}", num(rep.optimal_value));
    let _ = writeln!(std::io::stdout(), "{line}");
}

#[derive(Serialize)]
struct PlanEntry {
    plan: &'static str,
    report: SolveReport,
}

#[derive(Serialize)]
struct Comparison {
    ii_over_i: Vec<XiInterval>,
    iii_over_ii: Vec<XiInterval>,
    ii_over_iii: Vec<XiInterval>,
    i_on_top: Vec<XiInterval>,
}

#[derive(Serialize)]
struct PlanSet {
    plans: Vec<PlanEntry>,
    comparison: Comparison,
}

fn run_var(s: &ScenarioFile, flags: &EngineFlags, out: &Outputs) -> Result<i32> {
    let choice = s
        .benchmark
        .plan
        .ok_or_else(|| Error::Scenario("benchmark.plan: required by var-solve".into()))?;
    let plans: Vec<VarPlan> = match choice {
        PlanChoice::I => vec![VarPlan::I],
        PlanChoice::II => vec![VarPlan::II],
        PlanChoice::III => vec![VarPlan::III],
        PlanChoice::All => VarPlan::ALL.to_vec(),
    };
    let engine = s.engine(flags);
    let mut entries = Vec::new();
    let mut sols: Vec<VarSolution> = Vec::new();
    for plan in plans {
        let vs = s.plan_scenario(plan)?;
        let rep = var_solve_with(&vs, &engine)?;
        summary(&rep);
        sols.push(var_solution(&vs, &rep)?);
        entries.push(PlanEntry { plan: plan.name(), report: rep });
    }
    let mut rows = Vec::new();
    for sol in &sols {
        let mut pts: Vec<(f64, f64)> = curve_states(&StateDistribution::StandardNormal)
            .into_iter()
            .map(|w| (sol.scenario().xi(w), sol.x_at_state(w)))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        rows.extend(pts.into_iter().map(|(xi, x)| vec![num(xi), num(x), sol.plan.name().to_string()]));
    }
    write_rows(&out.path(&out.names.solution_curve, "solution_curve.csv"), &["xi", "x_star", "plan"], rows)?;
    if sols.len() == 3 {
        let set = PlanSet {
            comparison: Comparison {
                ii_over_i: superiority_region(&sols[1], &sols[0]),
                iii_over_ii: superiority_region(&sols[2], &sols[1]),
                ii_over_iii: superiority_region(&sols[1], &sols[2]),
                i_on_top: top_region(&sols[0], &[&sols[1], &sols[2]]),
            },
            plans: entries,
        };
        write_json(&out.report(), &set)?;
    } else {
        write_json(&out.report(), &entries[0].report)?;
    }
    Ok(0)
}

fn run_g_curve(
    s: &ScenarioFile,
    flags: &EngineFlags,
    out: &Outputs,
    lo: Option<f64>,
    hi: Option<f64>,
    points: usize,
) -> Result<i32> {
    let p = s.problem(flags)?;
    let l0 = p.lambda0();
    let (dlo, dhi) = if l0 > 0.0 && l0.is_finite() { (0.5 * l0, 3.0 * l0) } else { (0.01, 10.0) };
    let (lo, hi) = (lo.unwrap_or(dlo), hi.unwrap_or(dhi));
    if !(lo >= 0.0 && hi >= lo) {
        return Err(Error::Scenario(format!("--lambda-min/--lambda-max: need 0 <= {lo} <= {hi}")));
    }
    let n = points.max(2);
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let l = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        rows.push(vec![num(l), num(eval_g(&p, l)?)]);
    }
    write_rows(&out.path(&out.names.g_curve, "g_curve.csv"), &["lambda", "g"], rows)?;
    Ok(0)
}

fn run_envelope(s: &ScenarioFile, flags: &EngineFlags, out: &Outputs) -> Result<i32> {
    let p = s.problem(flags)?;
    let mut rows = Vec::new();
    for (i, (lo, hi, local)) in p.regions().enumerate() {
        let probe = if lo.is_finite() { lo } else if hi.is_finite() { hi - 1.0 } else { 0.0 };
        let b = match local {
            Some(l) => l.b.clone(),
            None => p.benchmark().eval(probe),
        };
        let u = p.family().utility(&b)?;
        let env = concavify(&u)?;
        let bps = u.breakpoints();
        let start = if u.lower_bound().is_finite() { u.lower_bound() } else { bps.first().copied().unwrap_or(0.0) - 10.0 };
        let far = bps.iter().copied().filter(|x| x.is_finite()).fold(start, f64::max);
        let end = start + 2.0 * (far - start) + 10.0;
        let label = b.iter().map(|v| num(*v)).collect::<Vec<_>>().join(";");
        const N: usize = 400;
        for k in 0..=N {
            let x = start + (end - start) * k as f64 / N as f64;
            rows.push(vec![i.to_string(), label.clone(), num(x), num(u.eval(x)), num(env.eval(x))]);
        }
    }
    write_rows(&out.path(&out.names.envelope, "envelope.csv"), &["region", "b", "x", "u", "envelope"], rows)?;
    Ok(0)
}

#[derive(Serialize)]
struct OracleReport {
    utility: BruteResult,
    envelope: BruteResult,
    resolution: f64,
}

fn run_oracle(s: &ScenarioFile, flags: &EngineFlags, out: &Outputs) -> Result<i32> {
    let p = s.problem(flags)?;
    let spec = s.oracle.clone().unwrap_or_default();
    let grid = match (spec.grid, spec.lo, spec.hi, spec.steps) {
        (Some(g), ..) => g,
        (None, Some(lo), Some(hi), Some(n)) if n >= 1 && hi > lo => {
            (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
        }
        _ => return Err(Error::Scenario("oracle.grid: give a grid or lo, hi and steps".into())),
    };
    let inst = DiscreteInstance::from_problem(&p, grid)?;
    let family = s.family()?;
    let rep = OracleReport {
        utility: brute_solve(&inst, family.as_ref(), Objective::Utility)?,
        envelope: brute_solve(&inst, family.as_ref(), Objective::Envelope)?,
        resolution: grid_resolution(&inst, family.as_ref())?,
    };
    let _ = writeln!(
        std::io::stdout(),
        "value(U)={} value(envelope)={} resolution={}",
        rep.utility.value, rep.envelope.value, rep.resolution
    );
    write_json(&out.report(), &rep)?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_PIECE: &str = r#"{
        "state": {"distribution": "uniform", "lo": 1, "hi": 2},
        "kernel": {"form": "identity"},
        "utility": {"family": "two-piece"},
        "problem": {"x0": 0.3888888888888889}
    }"#;

    #[test]
    fn parses_minimal() {
        let s = ScenarioFile::parse(TWO_PIECE).unwrap();
        assert_eq!(s.state, StateSpec::Uniform { lo: 1.0, hi: 2.0 });
        let p = s.problem(&EngineFlags::default()).unwrap();
        assert_eq!(p.lambda0(), 1.0);
    }

    #[test]
    fn names_missing_key() {
        let text = TWO_PIECE.replace("\"x0\": 0.3888888888888889", "\"alpha\": 0.1");
        let e = ScenarioFile::parse(&text).unwrap_err().to_string();
        assert!(e.contains("problem.x0"), "{e}");
    }

    #[test]
    fn rejects_unknown_key() {
        let text = TWO_PIECE.replace("\"lo\": 1", "\"lo\": 1, \"low\": 1");
        let e = ScenarioFile::parse(&text).unwrap_err().to_string();
        assert!(e.contains("state"), "{e}");
        let text = TWO_PIECE.replace("\"problem\"", "\"extra\": 1, \"problem\"");
        assert!(ScenarioFile::parse(&text).unwrap_err().to_string().contains("extra"));
    }

    #[test]
    fn plan_benchmark() {
        let text = r#"{
            "state": {"distribution": "standard-normal"},
            "kernel": {"form": "lognormal", "params": {"r": 0.03, "theta": 0.3, "T": 10}},
            "utility": {"family": "s-shaped", "params": {"k": 2.25, "p": 0.5}},
            "benchmark": {"plan": "II", "levels": [60, 70, 40, 50], "w": -1},
            "problem": {"x0": 30, "alpha": 0.05}
        }"#;
        let s = ScenarioFile::parse(text).unwrap();
        let b = s.benchmark_map().unwrap();
        assert_eq!(b.eval(0.0), vec![60.0, 50.0]);
        assert_eq!(b.eval(-2.0), vec![60.0, 40.0]);
        let v = s.plan_scenario(VarPlan::III).unwrap();
        assert_eq!(v.alpha, 0.05);
    }
}
