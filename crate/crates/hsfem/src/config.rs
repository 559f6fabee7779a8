//! Run configuration: a flat `key = value` text format with `#` comments,
//! full validation, and `HSFEM_`-prefixed environment overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::assembly::Fem2Quadrature;
use crate::error::{Error, Result};
use crate::model::{GrowthLaw, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Divided-difference diagonal coefficients; right-angled meshes.
    Fem,
    /// Scalar k n^(k-1) coefficient; nonobtuse meshes. The paper's Algorithm 1.
    Fem2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialDatum {
    /// alpha * exp(-(x^2+y^2)), nodal-interpolated and clamped to [0, N_max].
    Gaussian,
    /// Spatially constant datum (monotonicity studies).
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldFormat {
    Vtk,
    Csv,
    Both,
}

#[derive(Debug, Clone, Copy)]
pub struct MeshSpec {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone)]
pub struct OutputOptions {
    /// Field dump cadence in steps; must stay positive.
    pub every: usize,
    /// Additional dump times.
    pub times: Vec<f64>,
    pub format: FieldFormat,
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter_factor: usize,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mesh: MeshSpec,
    pub model: ModelParams,
    pub scheme: Scheme,
    pub initial: InitialDatum,
    pub fem2_quadrature: Fem2Quadrature,
    pub output: OutputOptions,
    pub solver: SolverOptions,
    /// Complementarity-residual cadence in steps.
    pub complementarity_every: usize,
    pub energy_check: bool,
    pub clamp_report: bool,
    /// Abort with an invariant-violation error instead of only recording.
    pub strict: bool,
}

impl RunConfig {
    /// The reference parameter set of the experiments: alpha = P_max = 1,
    /// k = 100, nu = 0.5, tau = 1e-5 on a 100x100 grid of (-10,10)^2.
    pub fn reference() -> RunConfig {
        RunConfig {
            mesh: MeshSpec {
                x0: -10.0,
                x1: 10.0,
                y0: -10.0,
                y1: 10.0,
                nx: 100,
                ny: 100,
            },
            model: ModelParams {
                k: 100,
                nu: 0.5,
                p_max: 1.0,
                growth: GrowthLaw::arctan_default(),
                alpha: 1.0,
                tau: 1e-5,
                t_final: 0.1,
            },
            scheme: Scheme::Fem2,
            initial: InitialDatum::Gaussian,
            fem2_quadrature: Fem2Quadrature::VertexAverage,
            output: OutputOptions {
                every: 1000,
                times: Vec::new(),
                format: FieldFormat::Vtk,
                dir: None,
            },
            solver: SolverOptions {
                tol: crate::solver::DEFAULT_TOL,
                max_iter_factor: 10,
            },
            complementarity_every: 1,
            energy_check: true,
            clamp_report: true,
            strict: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.mesh.x1 > self.mesh.x0) || !(self.mesh.y1 > self.mesh.y0) {
            problems.push("mesh extents must be positive (x1 > x0, y1 > y0)".to_string());
        }
        if self.mesh.nx == 0 || self.mesh.ny == 0 {
            problems.push("nx and ny must be at least 1".to_string());
        }
        if self.output.every == 0 {
            problems.push("output_every must be positive".to_string());
        }
        if self.complementarity_every == 0 {
            problems.push("complementarity_every must be positive".to_string());
        }
        if !(self.solver.tol > 0.0) {
            problems.push(format!("solver_tol must be positive, got {}", self.solver.tol));
        }
        if self.solver.max_iter_factor == 0 {
            problems.push("solver_max_iter_factor must be positive".to_string());
        }
        if let InitialDatum::Constant(c) = self.initial {
            if !(c >= 0.0) {
                problems.push(format!("initial_value must be nonnegative, got {c}"));
            }
        }
        if let Some(t) = self.output.times.iter().find(|t| !(**t >= 0.0)) {
            problems.push(format!("output_times entries must be nonnegative, got {t}"));
        }
        if let Err(e) = self.model.validate() {
            problems.push(e.to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    pub fn steps(&self) -> usize {
        if self.model.t_final <= 0.0 {
            0
        } else {
            (self.model.t_final / self.model.tau - 1e-9).ceil() as usize
        }
    }

    /// Echo the resolved configuration as the same key = value format.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let m = &self.mesh;
        let p = &self.model;
        use std::fmt::Write;
        let _ = writeln!(s, "x0 = {}\nx1 = {}\ny0 = {}\ny1 = {}", m.x0, m.x1, m.y0, m.y1);
        let _ = writeln!(s, "nx = {}\nny = {}", m.nx, m.ny);
        let _ = writeln!(s, "k = {}\nnu = {}\nP_max = {}\nalpha = {}", p.k, p.nu, p.p_max, p.alpha);
        let _ = writeln!(s, "tau = {:e}\nt_final = {}", p.tau, p.t_final);
        if let GrowthLaw::Arctan { scale, slope } = &p.growth {
            let _ = writeln!(s, "growth_scale = {scale:.17}\ngrowth_slope = {slope}");
        }
        let _ = writeln!(
            s,
            "scheme = {}",
            match self.scheme {
                Scheme::Fem => "fem",
                Scheme::Fem2 => "fem2",
            }
        );
        let _ = writeln!(
            s,
            "initial = {}",
            match self.initial {
                InitialDatum::Gaussian => "gaussian".to_string(),
                InitialDatum::Constant(c) => format!("constant\ninitial_value = {c}"),
            }
        );
        let _ = writeln!(
            s,
            "fem2_quadrature = {}",
            match self.fem2_quadrature {
                Fem2Quadrature::VertexAverage => "vertex",
                Fem2Quadrature::Centroid => "centroid",
            }
        );
        let _ = writeln!(s, "output_every = {}", self.output.every);
        if !self.output.times.is_empty() {
            let times: Vec<String> = self.output.times.iter().map(|t| t.to_string()).collect();
            let _ = writeln!(s, "output_times = {}", times.join(","));
        }
        let _ = writeln!(
            s,
            "field_format = {}",
            match self.output.format {
                FieldFormat::Vtk => "vtk",
                FieldFormat::Csv => "csv",
                FieldFormat::Both => "both",
            }
        );
        let _ = writeln!(s, "solver_tol = {:e}", self.solver.tol);
        let _ = writeln!(s, "solver_max_iter_factor = {}", self.solver.max_iter_factor);
        let _ = writeln!(s, "complementarity_every = {}", self.complementarity_every);
        let _ = writeln!(s, "energy_check = {}", self.energy_check);
        let _ = writeln!(s, "clamp_report = {}", self.clamp_report);
        let _ = writeln!(s, "strict = {}", self.strict);
        s
    }
}

const REQUIRED_KEYS: [&str; 7] = ["k", "nu", "P_max", "tau", "nx", "ny", "alpha"];

const KNOWN_KEYS: [&str; 26] = [
    "x0",
    "x1",
    "y0",
    "y1",
    "nx",
    "ny",
    "k",
    "nu",
    "P_max",
    "alpha",
    "tau",
    "t_final",
    "scheme",
    "initial",
    "initial_value",
    "growth_scale",
    "growth_slope",
    "output_every",
    "output_times",
    "field_format",
    "out",
    "solver_tol",
    "solver_max_iter_factor",
    "fem2_quadrature",
    "complementarity_every",
    "energy_check",
];
// clamp_report and strict complete the key set below; the array split keeps
// rustfmt from folding the list into an unreadable single line.
const KNOWN_KEYS_TAIL: [&str; 2] = ["clamp_report", "strict"];

fn is_known(key: &str) -> bool {
    KNOWN_KEYS.contains(&key) || KNOWN_KEYS_TAIL.contains(&key)
}

/// Parse a config file, then apply HSFEM_* environment overrides from the
/// process environment.
pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    parse_config_with_env(path, |key| {
        std::env::var(format!("HSFEM_{}", key.to_uppercase())).ok()
    })
}

/// Same as [`parse_config`] with an explicit override source (testable).
pub fn parse_config_with_env(
    path: impl AsRef<Path>,
    env: impl Fn(&str) -> Option<String>,
) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::io(path.as_ref(), e))?;
    parse_config_str(&text, env)
}

pub fn parse_config_str(
    text: &str,
    env: impl Fn(&str) -> Option<String>,
) -> Result<RunConfig> {
    let pairs = parse_pairs(text)?;
    config_from_pairs(&pairs, env)
}

/// Whether a key exists in the configuration schema.
pub fn is_known_key(key: &str) -> bool {
    is_known(key)
}

/// Parse the `key = value` lines of a config file into a map, rejecting
/// malformed lines, unknown keys and duplicates (all reported together).
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut pairs: BTreeMap<String, String> = BTreeMap::new();
    let mut problems = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            problems.push(format!("line {}: expected `key = value`, got `{line}`", lineno + 1));
            continue;
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !is_known(&key) {
            problems.push(format!("line {}: unknown key `{key}`", lineno + 1));
            continue;
        }
        if pairs.insert(key.clone(), value).is_some() {
            problems.push(format!("line {}: duplicate key `{key}`", lineno + 1));
        }
    }
    if !problems.is_empty() {
        return Err(Error::Config(problems.join("; ")));
    }
    Ok(pairs)
}

/// Resolve a key map (plus environment overrides, which beat map values and
/// may supply missing keys) into a validated configuration.
pub fn config_from_pairs(
    pairs: &BTreeMap<String, String>,
    env: impl Fn(&str) -> Option<String>,
) -> Result<RunConfig> {
    let mut pairs = pairs.clone();
    for key in KNOWN_KEYS.iter().chain(KNOWN_KEYS_TAIL.iter()) {
        if let Some(v) = env(key) {
            pairs.insert((*key).to_string(), v);
        }
    }
    let missing: Vec<String> = REQUIRED_KEYS
        .iter()
        .filter(|req| !pairs.contains_key(**req))
        .map(|req| format!("missing required key `{req}`"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Config(missing.join("; ")));
    }
    build_config(&pairs)
}

fn build_config(pairs: &BTreeMap<String, String>) -> Result<RunConfig> {
    let mut problems: Vec<String> = Vec::new();
    let mut cfg = RunConfig::reference();

    macro_rules! set {
        ($key:literal, $parse:expr, $slot:expr) => {
            if let Some(raw) = pairs.get($key) {
                match $parse(raw.as_str()) {
                    Ok(v) => $slot = v,
                    Err(msg) => problems.push(format!("key `{}`: {msg}", $key)),
                }
            }
        };
    }

    let f64p = |raw: &str| raw.parse::<f64>().map_err(|_| format!("`{raw}` is not a number"));
    let usizep =
        |raw: &str| raw.parse::<usize>().map_err(|_| format!("`{raw}` is not a nonnegative integer"));
    let u32p = |raw: &str| raw.parse::<u32>().map_err(|_| format!("`{raw}` is not a nonnegative integer"));
    let boolp = |raw: &str| match raw {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(format!("`{raw}` is not a boolean")),
    };

    set!("x0", f64p, cfg.mesh.x0);
    set!("x1", f64p, cfg.mesh.x1);
    set!("y0", f64p, cfg.mesh.y0);
    set!("y1", f64p, cfg.mesh.y1);
    set!("nx", usizep, cfg.mesh.nx);
    set!("ny", usizep, cfg.mesh.ny);
    set!("k", u32p, cfg.model.k);
    set!("nu", f64p, cfg.model.nu);
    set!("P_max", f64p, cfg.model.p_max);
    set!("alpha", f64p, cfg.model.alpha);
    set!("tau", f64p, cfg.model.tau);
    set!("t_final", f64p, cfg.model.t_final);
    set!("output_every", usizep, cfg.output.every);
    set!("solver_tol", f64p, cfg.solver.tol);
    set!("solver_max_iter_factor", usizep, cfg.solver.max_iter_factor);
    set!("complementarity_every", usizep, cfg.complementarity_every);
    set!("energy_check", boolp, cfg.energy_check);
    set!("clamp_report", boolp, cfg.clamp_report);
    set!("strict", boolp, cfg.strict);

    let mut growth_scale = None;
    let mut growth_slope = None;
    if let Some(raw) = pairs.get("growth_scale") {
        match f64p(raw) {
            Ok(v) => growth_scale = Some(v),
            Err(msg) => problems.push(format!("key `growth_scale`: {msg}")),
        }
    }
    if let Some(raw) = pairs.get("growth_slope") {
        match f64p(raw) {
            Ok(v) => growth_slope = Some(v),
            Err(msg) => problems.push(format!("key `growth_slope`: {msg}")),
        }
    }
    if growth_scale.is_some() || growth_slope.is_some() {
        let (mut scale, mut slope) = (200.0 / std::f64::consts::PI, 4.0);
        if let GrowthLaw::Arctan { scale: s, slope: b } = cfg.model.growth {
            scale = s;
            slope = b;
        }
        cfg.model.growth = GrowthLaw::Arctan {
            scale: growth_scale.unwrap_or(scale),
            slope: growth_slope.unwrap_or(slope),
        };
    }

    if let Some(raw) = pairs.get("scheme") {
        match raw.as_str() {
            "fem" => cfg.scheme = Scheme::Fem,
            "fem2" => cfg.scheme = Scheme::Fem2,
            other => problems.push(format!("key `scheme`: `{other}` is not one of fem, fem2")),
        }
    }
    if let Some(raw) = pairs.get("initial") {
        match raw.as_str() {
            "gaussian" => cfg.initial = InitialDatum::Gaussian,
            "constant" => {
                let mut value = 0.3;
                if let Some(rv) = pairs.get("initial_value") {
                    match f64p(rv) {
                        Ok(v) => value = v,
                        Err(msg) => problems.push(format!("key `initial_value`: {msg}")),
                    }
                }
                cfg.initial = InitialDatum::Constant(value);
            }
            other => problems.push(format!("key `initial`: `{other}` is not one of gaussian, constant")),
        }
    } else if pairs.contains_key("initial_value") {
        problems.push("key `initial_value` requires `initial = constant`".to_string());
    }
    if let Some(raw) = pairs.get("fem2_quadrature") {
        match raw.as_str() {
            "vertex" => cfg.fem2_quadrature = Fem2Quadrature::VertexAverage,
            "centroid" => cfg.fem2_quadrature = Fem2Quadrature::Centroid,
            other => {
                problems.push(format!("key `fem2_quadrature`: `{other}` is not one of vertex, centroid"))
            }
        }
    }
    if let Some(raw) = pairs.get("field_format") {
        match raw.as_str() {
            "vtk" => cfg.output.format = FieldFormat::Vtk,
            "csv" => cfg.output.format = FieldFormat::Csv,
            "both" => cfg.output.format = FieldFormat::Both,
            other => problems.push(format!("key `field_format`: `{other}` is not one of vtk, csv, both")),
        }
    }
    if let Some(raw) = pairs.get("output_times") {
        let mut times = Vec::new();
        for item in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match f64p(item) {
                Ok(v) => times.push(v),
                Err(msg) => problems.push(format!("key `output_times`: {msg}")),
            }
        }
        cfg.output.times = times;
    }
    if let Some(raw) = pairs.get("out") {
        if !raw.is_empty() {
            cfg.output.dir = Some(PathBuf::from(raw));
        }
    }

    if !problems.is_empty() {
        return Err(Error::Config(problems.join("; ")));
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parameter-sweep description.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub base: RunConfig,
    /// For k-sweeps: per-value nx = ny overriding the base mesh, so h can
    /// shrink while k grows.
    pub nx_schedule: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Alpha,
    Nu,
    K,
    PMax,
}

impl SweepParam {
    pub fn parse(name: &str) -> Result<SweepParam> {
        match name {
            "alpha" => Ok(SweepParam::Alpha),
            "nu" => Ok(SweepParam::Nu),
            "k" => Ok(SweepParam::K),
            "P_max" | "p_max" => Ok(SweepParam::PMax),
            other => Err(Error::Config(format!(
                "`{other}` is not a sweepable parameter (alpha, nu, k, P_max)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::Nu => "nu",
            SweepParam::K => "k",
            SweepParam::PMax => "P_max",
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep value list must not be empty".into()));
        }
        if self.param == SweepParam::K {
            for v in &self.values {
                if v.fract() != 0.0 || *v < 2.0 {
                    return Err(Error::Config(format!(
                        "k sweep values must be integers >= 2, got {v}"
                    )));
                }
            }
        }
        if let Some(sched) = &self.nx_schedule {
            if self.param != SweepParam::K {
                return Err(Error::Config("an nx schedule only applies to k sweeps".into()));
            }
            if sched.len() != self.values.len() {
                return Err(Error::Config(format!(
                    "nx schedule length {} does not match value count {}",
                    sched.len(),
                    self.values.len()
                )));
            }
            if sched.iter().any(|&n| n == 0) {
                return Err(Error::Config("nx schedule entries must be positive".into()));
            }
        }
        self.base.validate()
    }

    /// The member configuration for value index i.
    pub fn member(&self, i: usize) -> RunConfig {
        let mut cfg = self.base.clone();
        let v = self.values[i];
        match self.param {
            SweepParam::Alpha => cfg.model.alpha = v,
            SweepParam::Nu => cfg.model.nu = v,
            SweepParam::K => cfg.model.k = v as u32,
            SweepParam::PMax => cfg.model.p_max = v,
        }
        if let Some(sched) = &self.nx_schedule {
            cfg.mesh.nx = sched[i];
            cfg.mesh.ny = sched[i];
        }
        cfg
    }
}
