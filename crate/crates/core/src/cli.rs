//! The `fuchs` command-line front end.
//!
//! Exit codes: 0 success or Fuchsian, 1 negative verdict (not Fuchsian,
//! obstruction, failed verification), 2 undecidable at the given caps,
//! 3 unreadable input, 4 any other error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use crate::bb::{flatness_experiment, formal_solve, numeric_integrate, BbSystem, IntegrateOptions};
use crate::cauchy::{check_ts_orders, derive_cauchy_system, reduce_to_bb};
use crate::error::Error;
use crate::hypersurface::{random_fuchsian, FormKind, Hypersurface, Status};
use crate::ode::{associate, verify_segre_solutions, OdeCaps, SingularODE};
use crate::scalar::{GaussRat, C64};
use crate::serial::{self, Document, SerialCoeff};
use crate::solver::{solve_formal_map, SolveOutcome};
use crate::transform::{check_low_terms, push_forward, push_forward_general, verify_transformation_identity, CauchyData};
use crate::jet::UNCAPPED;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_UNDECIDED: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_ERROR: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Arith {
    Exact,
    Float64,
}

#[derive(Parser, Debug)]
#[command(name = "fuchs", version, about = "Fuchsian hypersurfaces, their ODEs, formal maps and Briot-Bouquet systems")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// JSON file with defaults for the flags below
    #[arg(long, global = true, env = "FUCHS_CONFIG")]
    pub config: Option<PathBuf>,
    /// Truncation order (meaning depends on the command)
    #[arg(long, global = true)]
    pub order: Option<u32>,
    #[arg(long, global = true, value_enum)]
    pub arith: Option<Arith>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for multi-file commands
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Run the self-check of the command on its own output
    #[arg(long, global = true)]
    pub verify: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fuchsian-type test of hypersurface or ODE files
    Check { paths: Vec<PathBuf> },
    /// Associated ODE of a hypersurface
    Associate {
        path: PathBuf,
        /// Extra degrees beyond the caps that decide the ODE test
        #[arg(long, default_value_t = 0)]
        margin: u32,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Push an ODE forward along a map
    Pushforward {
        #[arg(long)]
        ode: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Normalized formal map from the source ODE to the target ODE
    SolveMap {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// JSON object of free coefficient values
        #[arg(long)]
        free: Option<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Residual of the transformation rule for a map
    VerifyMap {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        map: PathBuf,
    },
    /// Singular system satisfied by the Cauchy data of maps between two ODEs
    DeriveCauchy {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Map whose low-order data shifts the order checks
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Briot-Bouquet form of the Cauchy system around a map's data
    ReduceBb {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Formal solution of a Briot-Bouquet system
    BbSolve {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        free: Option<PathBuf>,
    },
    /// Integrate a Briot-Bouquet system towards the singular point
    BbIntegrate(Trajectory),
    /// Lower bound |y(x)| >= C~ x^C along a trajectory
    BbFlatness(Trajectory),
    /// Random Fuchsian hypersurface in real form
    Random {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        cap: Option<u32>,
        #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
        epsilon: i8,
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct Trajectory {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long = "from")]
    pub a: f64,
    #[arg(long = "to")]
    pub x_min: f64,
    /// Terminal values, `re` or `re,im`
    #[arg(long, num_args = 1.., allow_negative_numbers = true, required = true)]
    pub y0: Vec<String>,
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long, default_value_t = 20)]
    pub per_decade: u32,
}

/// Effective settings after merging the config file and flags.
#[derive(Clone, Debug, PartialEq)]
pub struct JobConfig {
    pub arith: Arith,
    pub order: Option<u32>,
    pub seed: u64,
    pub jobs: usize,
    pub rtol: f64,
    pub verify: bool,
}

impl Default for JobConfig {
    fn default() -> Self {
        JobConfig { arith: Arith::Exact, order: None, seed: 0, jobs: 1, rtol: 1e-10, verify: false }
    }
}

impl JobConfig {
    pub fn resolve(g: &Global) -> Result<Self, Failure> {
        let mut c = JobConfig::default();
        if let Some(p) = &g.config {
            let text = read(p)?;
            let v: Value = serde_json::from_str(&text).map_err(|e| Failure::input(p, e.to_string()))?;
            let bad = |k: &str| Failure::input(p, format!("bad value for `{k}`"));
            if let Some(a) = v.get("arith") {
                c.arith = match a.as_str() {
                    Some("exact") => Arith::Exact,
                    Some("float64") => Arith::Float64,
                    _ => return Err(bad("arith")),
                };
            }
            if let Some(x) = v.get("order") {
                c.order = Some(x.as_u64().ok_or_else(|| bad("order"))? as u32);
            }
            if let Some(x) = v.get("seed") {
                c.seed = x.as_u64().ok_or_else(|| bad("seed"))?;
            }
            if let Some(x) = v.get("jobs") {
                c.jobs = x.as_u64().ok_or_else(|| bad("jobs"))? as usize;
            }
            if let Some(x) = v.get("rtol") {
                c.rtol = x.as_f64().ok_or_else(|| bad("rtol"))?;
            }
        }
        if let Some(a) = g.arith {
            c.arith = a;
        }
        if g.order.is_some() {
            c.order = g.order;
        }
        if let Some(s) = g.seed {
            c.seed = s;
        }
        if let Some(j) = g.jobs {
            c.jobs = j;
        }
        c.verify |= g.verify;
        c.jobs = c.jobs.max(1);
        Ok(c)
    }
}

/// An error with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(path: &Path, msg: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_INPUT, message: format!("{}: {msg}", path.display()) }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse(_) | Error::Io(_) => EXIT_INPUT,
            _ => EXIT_ERROR,
        };
        Failure { code, message: e.to_string() }
    }
}

/// What a command prints and returns.
#[derive(Debug, Default)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
}

fn read(p: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(p).map_err(|e| Failure::input(p, e))
}

fn load<C: SerialCoeff>(p: &Path) -> Result<Document<C>, Failure> {
    serial::from_str(&read(p)?).map_err(|e| match e {
        Error::Parse(_) => Failure::input(p, e),
        other => Failure { code: EXIT_INPUT, message: format!("{}: {other}", p.display()) },
    })
}

fn load_ode<C: SerialCoeff>(p: &Path) -> Result<SingularODE<C>, Failure> {
    match load(p)? {
        Document::Ode(e) => Ok(e),
        d => Err(Failure::input(p, format!("expected an ODE file, found a {} file", d.kind()))),
    }
}

fn load_bb<C: SerialCoeff>(p: &Path) -> Result<BbSystem<C>, Failure> {
    match load(p)? {
        Document::Bb(s, _) => Ok(s),
        d => Err(Failure::input(p, format!("expected a Briot-Bouquet file, found a {} file", d.kind()))),
    }
}

fn load_params<C: SerialCoeff>(p: Option<&PathBuf>) -> Result<BTreeMap<String, C>, Failure> {
    match p {
        None => Ok(BTreeMap::new()),
        Some(p) => serial::params_from_str(&read(p)?).map_err(|e| Failure::input(p, e)),
    }
}

/// Writes `text` to `out`, or returns it for standard output.
fn emit(out: Option<&PathBuf>, text: String, report: &mut String) -> Result<(), Failure> {
    match out {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| Failure::input(p, e))?;
            let _ = writeln!(report, "wrote {}", p.display());
        }
        None => report.push_str(&text),
    }
    Ok(())
}

fn status_code(s: Status) -> i32 {
    s.exit_code()
}

fn check_one<C: SerialCoeff>(p: &Path) -> (i32, String) {
    let doc = match load::<C>(p) {
        Ok(d) => d,
        Err(f) => return (f.code, f.message),
    };
    let rep = match &doc {
        Document::Hypersurface(h) => h.check_fuchsian(),
        Document::Ode(e) => e.check_fuchsian(),
        d => return (EXIT_INPUT, format!("{}: cannot check a {} file", p.display(), d.kind())),
    };
    (status_code(rep.status), format!("{}: {} (m = {})", p.display(), rep, m_of(&doc)))
}

fn m_of<C: SerialCoeff>(d: &Document<C>) -> u32 {
    match d {
        Document::Hypersurface(h) => h.m,
        Document::Ode(e) => e.m,
        _ => 0,
    }
}

fn cmd_check<C: SerialCoeff>(paths: &[PathBuf], jobs: usize) -> Outcome {
    let mut results: Vec<Option<(i32, String)>> = vec![None; paths.len()];
    let chunk = paths.len().div_ceil(jobs).max(1);
    std::thread::scope(|s| {
        for (ps, rs) in paths.chunks(chunk).zip(results.chunks_mut(chunk)) {
            s.spawn(move || {
                for (p, r) in ps.iter().zip(rs) {
                    *r = Some(check_one::<C>(p));
                }
            });
        }
    });
    let mut out = Outcome::default();
    for (code, msg) in results.into_iter().flatten() {
        out.code = out.code.max(code);
        out.stdout.push_str(&msg);
        out.stdout.push('\n');
    }
    out
}

fn cmd_associate<C: SerialCoeff>(path: &Path, margin: u32, out: Option<&PathBuf>, verify: bool) -> Result<Outcome, Failure> {
    let h: Hypersurface<C> = match load(path)? {
        Document::Hypersurface(h) => h,
        d => return Err(Failure::input(path, format!("expected a hypersurface file, found a {} file", d.kind()))),
    };
    let t = h.convert(FormKind::Exponential)?;
    let e = associate(&t, OdeCaps::with_margin(h.m, margin))?;
    let mut o = Outcome::default();
    if verify {
        let r = verify_segre_solutions(&t, &e, [UNCAPPED; 3], e.phi().total_cap())?;
        if let Some((mono, c)) = r.leading() {
            let _ = writeln!(o.stdout, "segre check failed: leading residual {c} at {mono:?}");
            o.code = EXIT_NEGATIVE;
            return Ok(o);
        }
        let _ = writeln!(o.stdout, "segre check passed");
    }
    emit(out, serial::to_string(&Document::Ode(e)), &mut o.stdout)?;
    Ok(o)
}

fn cmd_pushforward<C: SerialCoeff>(ode: &Path, map: &Path, out: Option<&PathBuf>) -> Result<Outcome, Failure> {
    let e_star = load_ode::<C>(ode)?;
    let e = match load(map)? {
        Document::Map(h) => push_forward(&e_star, &h)?,
        Document::GeneralMap(h) => push_forward_general(&e_star, &h)?,
        d => return Err(Failure::input(map, format!("expected a map file, found a {} file", d.kind()))),
    };
    let mut o = Outcome::default();
    let low = check_low_terms(&e_star, &e);
    for v in &low {
        let _ = writeln!(o.stdout, "low-order identity: {v}");
    }
    emit(out, serial::to_string(&Document::Ode(e)), &mut o.stdout)?;
    Ok(o)
}

fn cmd_solve_map(cfg: &JobConfig, source: &Path, target: &Path, free: Option<&PathBuf>, out: Option<&PathBuf>) -> Result<Outcome, Failure> {
    let e_star = load_ode::<GaussRat>(source)?;
    let e = load_ode::<GaussRat>(target)?;
    let params = load_params::<GaussRat>(free)?;
    let mut o = Outcome::default();
    let solved = solve_formal_map(&e_star, &e, &params, cfg.order).map_err(|err| match err {
        Error::Truncation(msg) => Failure {
            code: EXIT_ERROR,
            message: format!("truncation too low: {msg} (associate with --margin 2 or more from a hypersurface with a larger --cap)"),
        },
        other => other.into(),
    })?;
    match solved {
        SolveOutcome::Solved(s) => {
            let _ = writeln!(o.stdout, "solved to degree {} in w", s.order);
            for (k, v) in &s.free {
                let _ = writeln!(o.stdout, "free {k} = {v}");
            }
            if cfg.verify {
                let r = verify_transformation_identity(&e_star, &e, &s.map)?;
                let _ = writeln!(o.stdout, "transformation rule residual: {}", if r.is_zero() { "zero" } else { "nonzero" });
                if !r.is_zero() {
                    o.code = EXIT_NEGATIVE;
                }
            }
            emit(out, serial::to_string(&Document::Map(s.map)), &mut o.stdout)?;
        }
        SolveOutcome::Obstructed(ob) => {
            let _ = writeln!(o.stdout, "{ob}");
            o.code = EXIT_NEGATIVE;
        }
    }
    Ok(o)
}

fn cmd_verify_map<C: SerialCoeff>(source: &Path, target: &Path, map: &Path) -> Result<Outcome, Failure> {
    let e_star = load_ode::<C>(source)?;
    let e = load_ode::<C>(target)?;
    let h = match load(map)? {
        Document::Map(h) => h,
        d => return Err(Failure::input(map, format!("expected a normalized map file, found a {} file", d.kind()))),
    };
    let r = verify_transformation_identity(&e_star, &e, &h)?;
    let mut o = Outcome::default();
    match r.leading() {
        None => {
            let _ = writeln!(o.stdout, "residual vanishes on the common truncation");
        }
        Some((mono, c)) => {
            let _ = writeln!(o.stdout, "nonzero residual: leading coefficient {c} at z^{} w^{} zeta^{}", mono[0], mono[1], mono[2]);
            o.code = EXIT_NEGATIVE;
        }
    }
    Ok(o)
}

fn data_of<C: SerialCoeff>(p: &Path) -> Result<CauchyData<C>, Failure> {
    match load(p)? {
        Document::Map(h) => Ok(h.cauchy_data()),
        d => Err(Failure::input(p, format!("expected a normalized map file, found a {} file", d.kind()))),
    }
}

fn cmd_derive_cauchy<C: SerialCoeff>(cfg: &JobConfig, source: &Path, target: &Path, data: Option<&PathBuf>, out: Option<&PathBuf>) -> Result<Outcome, Failure> {
    let e_star = load_ode::<C>(source)?;
    let e = load_ode::<C>(target)?;
    let total = cfg.order.unwrap_or(4);
    let cs = derive_cauchy_system(&e_star, &e, total)?;
    let shift = data.map(|p| data_of::<C>(p)).transpose()?;
    let rep = check_ts_orders(&cs, shift.as_ref())?;
    let mut o = Outcome::default();
    for c in &rep.checks {
        let _ = writeln!(o.stdout, "{c}");
    }
    o.code = if !rep.holds() {
        EXIT_NEGATIVE
    } else if !rep.decided() {
        EXIT_UNDECIDED
    } else {
        EXIT_OK
    };
    emit(out, serial::to_string(&Document::Cauchy(cs)), &mut o.stdout)?;
    Ok(o)
}

fn cmd_reduce_bb<C: SerialCoeff>(cfg: &JobConfig, source: &Path, target: &Path, data: &Path, out: Option<&PathBuf>) -> Result<Outcome, Failure> {
    let e_star = load_ode::<C>(source)?;
    let e = load_ode::<C>(target)?;
    let h = data_of::<C>(data)?;
    let r = reduce_to_bb(&e_star, &e, &h, cfg.order.unwrap_or(1))?;
    let sys = BbSystem::new(r.q.clone())?;
    let mut o = Outcome::default();
    let _ = writeln!(o.stdout, "Briot-Bouquet system of dimension {} known to degree {}", sys.n, sys.known_order());
    emit(out, serial::to_string(&Document::Bb(sys, Some(r))), &mut o.stdout)?;
    Ok(o)
}

fn cmd_bb_solve<C: SerialCoeff>(cfg: &JobConfig, system: &Path, free: Option<&PathBuf>) -> Result<Outcome, Failure> {
    let sys = load_bb::<C>(system)?;
    let params = load_params::<C>(free)?;
    let order = cfg.order.unwrap_or_else(|| sys.known_order().min(10)).max(1);
    let sol = formal_solve(&sys, order, &params)?;
    let mut o = Outcome::default();
    let r = &sol.resonance;
    let _ = writeln!(o.stdout, "resonances (k <= {}): {:?}", r.probed, r.resonances);
    for ev in &r.eigenvalues {
        let _ = writeln!(o.stdout, "eigenvalue {:.12} +- {:.1e}", ev.center, ev.radius);
    }
    for p in &sol.free {
        let _ = writeln!(o.stdout, "free {} = {}", p.name, p.value);
    }
    for (k, a) in sol.coeffs.iter().enumerate() {
        let row: Vec<String> = a.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(o.stdout, "{}\t{}", k + 1, row.join("\t"));
    }
    if let Some(k) = sol.inconsistent_at {
        let _ = writeln!(o.stdout, "inconsistent at level {k}: no power series solution vanishing at 0");
        o.code = EXIT_NEGATIVE;
    } else {
        let _ = writeln!(o.stdout, "growth max |a_k|^(1/k) = {:.6e}", sol.growth());
    }
    Ok(o)
}

fn parse_y0(vals: &[String]) -> Result<Vec<Complex64>, Failure> {
    vals.iter()
        .map(|s| {
            let parts: Vec<&str> = s.split(',').collect();
            let f = |t: &str| t.trim().parse::<f64>().map_err(|_| Failure { code: EXIT_INPUT, message: format!("bad value `{s}` for --y0") });
            match parts.as_slice() {
                [re] => Ok(Complex64::new(f(re)?, 0.0)),
                [re, im] => Ok(Complex64::new(f(re)?, f(im)?)),
                _ => Err(Failure { code: EXIT_INPUT, message: format!("bad value `{s}` for --y0") }),
            }
        })
        .collect()
}

fn options(cfg: &JobConfig, t: &Trajectory) -> IntegrateOptions {
    IntegrateOptions { rtol: t.rtol.unwrap_or(cfg.rtol), samples_per_decade: t.per_decade, ..IntegrateOptions::default() }
}

fn cmd_bb_integrate<C: SerialCoeff>(cfg: &JobConfig, t: &Trajectory) -> Result<Outcome, Failure> {
    let sys = load_bb::<C>(&t.system)?;
    let y0 = parse_y0(&t.y0)?;
    let tr = numeric_integrate(&sys, &y0, t.a, t.x_min, options(cfg, t))?;
    let mut o = Outcome::default();
    let head: Vec<String> = (1..=sys.n).flat_map(|i| [format!("re_y{i}"), format!("im_y{i}")]).collect();
    let _ = writeln!(o.stdout, "x\t{}", head.join("\t"));
    for (x, y) in tr.xs.iter().zip(&tr.ys) {
        let row: Vec<String> = y.iter().flat_map(|z| [format!("{:.15e}", z.re), format!("{:.15e}", z.im)]).collect();
        let _ = writeln!(o.stdout, "{x:.15e}\t{}", row.join("\t"));
    }
    Ok(o)
}

fn cmd_bb_flatness<C: SerialCoeff>(cfg: &JobConfig, t: &Trajectory) -> Result<Outcome, Failure> {
    let sys = load_bb::<C>(&t.system)?;
    let y0 = parse_y0(&t.y0)?;
    let r = flatness_experiment(&sys, &y0, t.a, t.x_min, options(cfg, t))?;
    let mut o = Outcome::default();
    let _ = writeln!(o.stdout, "x\tnorm_y\tbound\tmargin");
    for (x, ny, b) in &r.rows {
        let _ = writeln!(o.stdout, "{x:.15e}\t{ny:.15e}\t{b:.15e}\t{:.15e}", ny / b);
    }
    let _ = writeln!(
        o.stdout,
        "C = {:.12e}, C~ = {:.12e}, tube radius {:.6e}, margin {:.12e}: bound {}",
        r.c,
        r.c_tilde,
        r.tube,
        r.margin,
        if r.holds() { "holds" } else { "fails" }
    );
    o.code = if r.holds() { EXIT_OK } else { EXIT_NEGATIVE };
    Ok(o)
}

fn cmd_random(cfg: &JobConfig, m: u32, cap: Option<u32>, epsilon: i8, density: f64, out: Option<&PathBuf>) -> Result<Outcome, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cap = cap.unwrap_or(crate::hypersurface::default_cap(m));
    let h = random_fuchsian(m, epsilon, cap, density, &mut rng)?;
    let mut o = Outcome::default();
    emit(out, serial::to_string(&Document::Hypersurface(h)), &mut o.stdout)?;
    Ok(o)
}

macro_rules! by_arith {
    ($cfg:expr, $f:ident ( $($arg:expr),* )) => {
        match $cfg.arith {
            Arith::Exact => $f::<GaussRat>($($arg),*),
            Arith::Float64 => $f::<C64>($($arg),*),
        }
    };
}

pub fn execute(cli: &Cli) -> Result<Outcome, Failure> {
    let cfg = JobConfig::resolve(&cli.global)?;
    let exact_only = |what: &str| -> Result<(), Failure> {
        if cfg.arith == Arith::Float64 {
            return Err(Failure { code: EXIT_ERROR, message: format!("{what} runs in exact arithmetic only") });
        }
        Ok(())
    };
    match &cli.command {
        Command::Check { paths } => {
            if paths.is_empty() {
                return Err(Failure { code: EXIT_INPUT, message: "no input files".into() });
            }
            let mut o = by_arith!(cfg, cmd_check(paths, cfg.jobs));
            if cfg.arith == Arith::Float64 {
                o.stdout.push_str("(float64 verdicts use a zero tolerance)\n");
            }
            Ok(o)
        }
        Command::Associate { path, margin, out } => by_arith!(cfg, cmd_associate(path, *margin, out.as_ref(), cfg.verify)),
        Command::Pushforward { ode, map, out } => by_arith!(cfg, cmd_pushforward(ode, map, out.as_ref())),
        Command::SolveMap { source, target, free, out } => {
            exact_only("solve-map")?;
            cmd_solve_map(&cfg, source, target, free.as_ref(), out.as_ref())
        }
        Command::VerifyMap { source, target, map } => by_arith!(cfg, cmd_verify_map(source, target, map)),
        Command::DeriveCauchy { source, target, data, out } => {
            by_arith!(cfg, cmd_derive_cauchy(&cfg, source, target, data.as_ref(), out.as_ref()))
        }
        Command::ReduceBb { source, target, data, out } => by_arith!(cfg, cmd_reduce_bb(&cfg, source, target, data, out.as_ref())),
        Command::BbSolve { system, free } => by_arith!(cfg, cmd_bb_solve(&cfg, system, free.as_ref())),
        Command::BbIntegrate(t) => by_arith!(cfg, cmd_bb_integrate(&cfg, t)),
        Command::BbFlatness(t) => by_arith!(cfg, cmd_bb_flatness(&cfg, t)),
        Command::Random { m, cap, epsilon, density, out } => {
            exact_only("random")?;
            cmd_random(&cfg, *m, *cap, *epsilon, *density, out.as_ref())
        }
    }
}

/// Parses `args` (including the program name), runs the command and prints.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(o) => {
            // a closed pipe (`| head`) is not an error of the command
            let _ = std::io::stdout().write_all(o.stdout.as_bytes());
            o.code
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
