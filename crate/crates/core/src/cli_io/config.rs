//! Flat `section.key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Every key must be known and may
//! appear once. Reals accept plain decimals or multiples of `pi` such as
//! `2*pi`, `pi/4` or `0.5*pi`.
//!
//! | key | default |
//! |-----|---------|
//! | `grid.n_side` | required |
//! | `grid.length` | `2*pi` |
//! | `frank.k1`, `frank.k2`, `frank.k3` | required |
//! | `frank.k4` | `0` |
//! | `gilbert.alpha`, `gilbert.beta` | required; renormalized if `alpha^2 + beta^2` is within `1e-6` of 1 |
//! | `solver.t_end` | required |
//! | `solver.cfl_safety` | `0.4` |
//! | `solver.dt` | the stability limit for `cfl_safety` |
//! | `solver.scheme` | `rk4` (or `heun`) |
//! | `solver.friedrich_cutoff` | `none` |
//! | `solver.renormalize_every` | `1` without a cutoff, `0` with one |
//! | `solver.output_stride` | `1` |
//! | `solver.rhs_form` | `standard` (or `projected`) |
//! | `diagnostics.R` | `max(L/16, 2 dx)` |
//! | `diagnostics.center_stride` | `max(1, N/32)` |
//! | `diagnostics.epsilon0` | `1` |
//! | `diagnostics.epsilon1` | `0.1` |
//! | `diagnostics.monotonicity_radius` | `L/16` |
//! | `initial.kind` | required: `constant`, `twisted_stripe`, `bubble`, `random_smooth` |
//! | `initial.background` | `0, 0, 1` (constant, bubble) |
//! | `initial.amplitude` | required (twisted_stripe, random_smooth) |
//! | `initial.mode` | `1` (twisted_stripe) |
//! | `initial.scale` | `L/16` (bubble) |
//! | `initial.center` | grid center (bubble) |
//! | `initial.modes` | `3` (random_smooth) |
//! | `initial.seed` | `0` |
//! | `initial.perturbation` | `0`: size of a smooth seeded perturbation added before normalizing |
//! | `output.directory` | `out` |
//! | `output.snapshot_stride` | `1`: snapshot every this many outputs, plus the last |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::diagnostics::RecordSettings;
use crate::dynamics::{cfl_limit, RhsForm, Scheme, SolverConfig, DEFAULT_CFL};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, Vec3};
use crate::initial::{default_bubble_scale, grid_center, InitialDatum};
use crate::oseen_frank::{FrankConstants, GilbertParams};

/// `alpha^2 + beta^2` may miss 1 by this much and still be renormalized.
pub const GILBERT_TOLERANCE: f64 = 1e-6;

const KEYS: &[&str] = &[
    "grid.n_side",
    "grid.length",
    "frank.k1",
    "frank.k2",
    "frank.k3",
    "frank.k4",
    "gilbert.alpha",
    "gilbert.beta",
    "solver.dt",
    "solver.t_end",
    "solver.scheme",
    "solver.renormalize_every",
    "solver.friedrich_cutoff",
    "solver.cfl_safety",
    "solver.output_stride",
    "solver.rhs_form",
    "diagnostics.R",
    "diagnostics.center_stride",
    "diagnostics.epsilon0",
    "diagnostics.epsilon1",
    "diagnostics.monotonicity_radius",
    "initial.kind",
    "initial.background",
    "initial.amplitude",
    "initial.mode",
    "initial.scale",
    "initial.center",
    "initial.modes",
    "initial.seed",
    "initial.perturbation",
    "output.directory",
    "output.snapshot_stride",
];

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsConfig {
    pub radius: f64,
    pub center_stride: usize,
    pub epsilon0: f64,
    pub epsilon1: f64,
    pub monotonicity_radius: f64,
}

impl DiagnosticsConfig {
    pub fn record_settings(&self) -> RecordSettings {
        RecordSettings {
            local_radius: self.radius,
            center_stride: self.center_stride,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialConfig {
    pub datum: InitialDatum,
    pub seed: u64,
    pub perturbation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub snapshot_stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub frank: FrankConstants,
    pub gilbert: GilbertParams,
    pub solver: SolverConfig,
    pub diagnostics: DiagnosticsConfig,
    pub initial: InitialConfig,
    pub output: OutputConfig,
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, &path.display().to_string())
}

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

struct Parser<'a> {
    path: &'a str,
    entries: BTreeMap<String, Entry>,
}

impl Parser<'_> {
    fn error(&self, line: usize, field: &str, message: impl Into<String>) -> Error {
        Error::Config {
            path: self.path.to_string(),
            line,
            field: field.to_string(),
            message: message.into(),
        }
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }

    fn raw(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.line, e.value.clone())
        })
    }

    fn parsed<T>(&mut self, key: &str, parse: impl Fn(&str) -> Option<T>, what: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => parse(&v)
                .map(Some)
                .ok_or_else(|| self.error(line, key, format!("expected {what}, got `{v}`"))),
        }
    }

    fn real(&mut self, key: &str) -> Result<Option<f64>> {
        self.parsed(key, parse_real, "a real number")
    }

    fn required_real(&mut self, key: &str) -> Result<f64> {
        self.real(key)?
            .ok_or_else(|| self.error(0, key, "required key is missing"))
    }

    fn uint(&mut self, key: &str) -> Result<Option<u64>> {
        self.parsed(key, |v| v.parse::<u64>().ok(), "a non-negative integer")
    }

    fn vec3(&mut self, key: &str) -> Result<Option<Vec3>> {
        self.parsed(
            key,
            |v| {
                let p: Vec<f64> = v.split(',').map(parse_real).collect::<Option<_>>()?;
                (p.len() == 3).then(|| [p[0], p[1], p[2]])
            },
            "three comma-separated reals",
        )
    }

    fn point(&mut self, key: &str) -> Result<Option<[f64; 2]>> {
        self.parsed(
            key,
            |v| {
                let p: Vec<f64> = v.split(',').map(parse_real).collect::<Option<_>>()?;
                (p.len() == 2).then(|| [p[0], p[1]])
            },
            "two comma-separated reals",
        )
    }

    /// Attach a validation failure to the line of `key`.
    fn at<T>(&self, key: &str, r: Result<T>) -> Result<T> {
        r.map_err(|e| self.error(self.line_of(key), key, e.to_string()))
    }
}

/// Parse `pi`, `<r>*pi`, `<r>pi`, `pi/<r>`, `<r>*pi/<r>` or a plain real.
pub fn parse_real(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Some(v);
    }
    let pi = std::f64::consts::PI;
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.trim(), Some(b.trim().parse::<f64>().ok()?)),
        None => (s, None),
    };
    let coef = num.strip_suffix("pi")?.trim_end();
    let coef = coef.strip_suffix('*').unwrap_or(coef).trim();
    let c = if coef.is_empty() { 1.0 } else { coef.parse::<f64>().ok()? };
    Some(match den {
        Some(d) => c * pi / d,
        None => c * pi,
    })
}

pub fn parse_config(text: &str, path: &str) -> Result<RunConfig> {
    let mut p = Parser {
        path,
        entries: BTreeMap::new(),
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(p.error(line, content, "expected `section.key = value`"));
        };
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(p.error(line, key, "unknown key"));
        }
        if let Some(prev) = p.entries.get(key) {
            return Err(p.error(line, key, format!("duplicate key, first set on line {}", prev.line)));
        }
        p.entries.insert(
            key.to_string(),
            Entry {
                line,
                value: value.trim().to_string(),
                used: false,
            },
        );
    }

    let n_side = p
        .uint("grid.n_side")?
        .ok_or_else(|| p.error(0, "grid.n_side", "required key is missing"))?;
    let length = p.real("grid.length")?.unwrap_or(2.0 * std::f64::consts::PI);
    let grid = p.at("grid.n_side", GridSpec::new(n_side as usize, length))?;

    let k1 = p.required_real("frank.k1")?;
    let k2 = p.required_real("frank.k2")?;
    let k3 = p.required_real("frank.k3")?;
    let k4 = p.real("frank.k4")?.unwrap_or(0.0);
    let frank = p.at("frank.k1", FrankConstants::new(k1, k2, k3, k4))?;

    let alpha = p.required_real("gilbert.alpha")?;
    let beta = p.required_real("gilbert.beta")?;
    let gilbert = GilbertParams::new(alpha, beta)
        .or_else(|_| GilbertParams::normalized(alpha, beta, GILBERT_TOLERANCE));
    let gilbert = p.at("gilbert.beta", gilbert)?;

    let solver = parse_solver(&mut p, &grid, &frank)?;
    let diagnostics = parse_diagnostics(&mut p, &grid)?;
    let initial = parse_initial(&mut p, &grid)?;

    let directory = p.raw("output.directory").map_or(PathBuf::from("out"), |(_, v)| PathBuf::from(v));
    let snapshot_stride = p.uint("output.snapshot_stride")?.unwrap_or(1);
    if snapshot_stride == 0 {
        return Err(p.error(p.line_of("output.snapshot_stride"), "output.snapshot_stride", "must be at least 1"));
    }

    if let Some((key, e)) = p.entries.iter().find(|(_, e)| !e.used) {
        return Err(p.error(e.line, key, "key does not apply to this configuration"));
    }
    Ok(RunConfig {
        grid,
        frank,
        gilbert,
        solver,
        diagnostics,
        initial,
        output: OutputConfig {
            directory,
            snapshot_stride: snapshot_stride as usize,
        },
    })
}

fn parse_solver(p: &mut Parser<'_>, grid: &GridSpec, k: &FrankConstants) -> Result<SolverConfig> {
    let t_end = p.required_real("solver.t_end")?;
    let cfl_safety = p.real("solver.cfl_safety")?.unwrap_or(DEFAULT_CFL);
    let dt = match p.real("solver.dt")? {
        Some(dt) => dt,
        None => cfl_limit(grid, k, cfl_safety),
    };
    let scheme = p
        .parsed(
            "solver.scheme",
            |v| match v {
                "rk4" => Some(Scheme::Rk4),
                "heun" => Some(Scheme::Heun),
                _ => None,
            },
            "`rk4` or `heun`",
        )?
        .unwrap_or(Scheme::Rk4);
    let rhs_form = p
        .parsed(
            "solver.rhs_form",
            |v| match v {
                "standard" => Some(RhsForm::Standard),
                "projected" => Some(RhsForm::Projected),
                _ => None,
            },
            "`standard` or `projected`",
        )?
        .unwrap_or(RhsForm::Standard);
    let cutoff = p
        .parsed(
            "solver.friedrich_cutoff",
            |v| if v == "none" { Some(None) } else { parse_real(v).map(Some) },
            "a real number or `none`",
        )?
        .flatten();
    let renormalize_every = p
        .uint("solver.renormalize_every")?
        .unwrap_or(if cutoff.is_some() { 0 } else { 1 });
    let output_stride = p.uint("solver.output_stride")?.unwrap_or(1);
    let config = SolverConfig {
        dt,
        t_end,
        scheme,
        renormalize_every: renormalize_every as usize,
        friedrich_cutoff: cutoff,
        cfl_safety,
        output_stride: output_stride as usize,
        rhs_form,
        keep_states: false,
    };
    let key = if p.entries.contains_key("solver.dt") { "solver.dt" } else { "solver.t_end" };
    p.at(key, config.validate(grid, k))?;
    Ok(config)
}

fn parse_diagnostics(p: &mut Parser<'_>, grid: &GridSpec) -> Result<DiagnosticsConfig> {
    let defaults = RecordSettings::for_grid(grid);
    let radius = p.real("diagnostics.R")?.unwrap_or(defaults.local_radius);
    p.at("diagnostics.R", crate::diagnostics::check_radius(grid, radius))?;
    let center_stride = p.uint("diagnostics.center_stride")?.unwrap_or(defaults.center_stride as u64);
    if center_stride == 0 {
        return Err(p.error(p.line_of("diagnostics.center_stride"), "diagnostics.center_stride", "must be at least 1"));
    }
    let epsilon0 = p.real("diagnostics.epsilon0")?.unwrap_or(1.0);
    let epsilon1 = p.real("diagnostics.epsilon1")?.unwrap_or(0.1);
    for (key, v) in [("diagnostics.epsilon0", epsilon0), ("diagnostics.epsilon1", epsilon1)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(p.error(p.line_of(key), key, "must be positive"));
        }
    }
    let monotonicity_radius = p
        .real("diagnostics.monotonicity_radius")?
        .unwrap_or(grid.length() / 16.0);
    p.at(
        "diagnostics.monotonicity_radius",
        crate::diagnostics::check_radius(grid, 2.0 * monotonicity_radius),
    )?;
    Ok(DiagnosticsConfig {
        radius,
        center_stride: center_stride as usize,
        epsilon0,
        epsilon1,
        monotonicity_radius,
    })
}

fn parse_initial(p: &mut Parser<'_>, grid: &GridSpec) -> Result<InitialConfig> {
    let (line, kind) = p
        .raw("initial.kind")
        .ok_or_else(|| p.error(0, "initial.kind", "required key is missing"))?;
    let seed = p.uint("initial.seed")?.unwrap_or(0);
    let perturbation = p.real("initial.perturbation")?.unwrap_or(0.0);
    if !(perturbation >= 0.0 && perturbation.is_finite()) {
        return Err(p.error(p.line_of("initial.perturbation"), "initial.perturbation", "must be non-negative"));
    }
    let e3 = [0.0, 0.0, 1.0];
    let datum = match kind.as_str() {
        "constant" => InitialDatum::Constant {
            background: p.vec3("initial.background")?.unwrap_or(e3),
        },
        "twisted_stripe" => InitialDatum::TwistedStripe {
            amplitude: p.required_real("initial.amplitude")?,
            mode: p.uint("initial.mode")?.unwrap_or(1) as u32,
        },
        "bubble" => InitialDatum::Bubble {
            scale: p.real("initial.scale")?.unwrap_or(default_bubble_scale(grid)),
            center: p.point("initial.center")?.unwrap_or(grid_center(grid)),
            background: p.vec3("initial.background")?.unwrap_or(e3),
        },
        "random_smooth" => InitialDatum::RandomSmooth {
            amplitude: p.required_real("initial.amplitude")?,
            modes: p.uint("initial.modes")?.unwrap_or(3) as u32,
            seed,
        },
        other => {
            return Err(p.error(
                line,
                "initial.kind",
                format!("unknown kind `{other}`; expected constant, twisted_stripe, bubble or random_smooth"),
            ))
        }
    };
    // Surface datum errors (ranges, resolution) at load time.
    p.at("initial.kind", crate::initial::generate_initial(&datum, *grid).map(|_| ()))?;
    Ok(InitialConfig {
        datum,
        seed,
        perturbation,
    })
}

impl RunConfig {
    /// Canonical text form with every default resolved; parsing it yields an
    /// equal configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let v3 = |v: Vec3| format!("{}, {}, {}", v[0], v[1], v[2]);
        kv("grid.n_side", self.grid.n_side().to_string());
        kv("grid.length", self.grid.length().to_string());
        kv("frank.k1", self.frank.k1.to_string());
        kv("frank.k2", self.frank.k2.to_string());
        kv("frank.k3", self.frank.k3.to_string());
        kv("frank.k4", self.frank.k4.to_string());
        kv("gilbert.alpha", self.gilbert.alpha.to_string());
        kv("gilbert.beta", self.gilbert.beta.to_string());
        let sv = &self.solver;
        kv("solver.dt", sv.dt.to_string());
        kv("solver.t_end", sv.t_end.to_string());
        kv("solver.scheme", sv.scheme.name().to_string());
        kv("solver.renormalize_every", sv.renormalize_every.to_string());
        kv(
            "solver.friedrich_cutoff",
            sv.friedrich_cutoff.map_or("none".to_string(), |c| c.to_string()),
        );
        kv("solver.cfl_safety", sv.cfl_safety.to_string());
        kv("solver.output_stride", sv.output_stride.to_string());
        kv("solver.rhs_form", sv.rhs_form.name().to_string());
        let d = &self.diagnostics;
        kv("diagnostics.R", d.radius.to_string());
        kv("diagnostics.center_stride", d.center_stride.to_string());
        kv("diagnostics.epsilon0", d.epsilon0.to_string());
        kv("diagnostics.epsilon1", d.epsilon1.to_string());
        kv("diagnostics.monotonicity_radius", d.monotonicity_radius.to_string());
        kv("initial.kind", self.initial.datum.kind().to_string());
        match &self.initial.datum {
            InitialDatum::Constant { background } => kv("initial.background", v3(*background)),
            InitialDatum::TwistedStripe { amplitude, mode } => {
                kv("initial.amplitude", amplitude.to_string());
                kv("initial.mode", mode.to_string());
            }
            InitialDatum::Bubble {
                scale,
                center,
                background,
            } => {
                kv("initial.scale", scale.to_string());
                kv("initial.center", format!("{}, {}", center[0], center[1]));
                kv("initial.background", v3(*background));
            }
            InitialDatum::RandomSmooth { amplitude, modes, .. } => {
                kv("initial.amplitude", amplitude.to_string());
                kv("initial.modes", modes.to_string());
            }
        }
        kv("initial.seed", self.initial.seed.to_string());
        kv("initial.perturbation", self.initial.perturbation.to_string());
        kv("output.directory", self.output.directory.display().to_string());
        kv("output.snapshot_stride", self.output.snapshot_stride.to_string());
        s
    }

    /// Replace the seed of the initial datum (and of its perturbation).
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.initial.seed = seed;
        if let InitialDatum::RandomSmooth { seed: s, .. } = &mut self.initial.datum {
            *s = seed;
        }
        self
    }

    /// Replace `t_end`, keeping `dt`.
    pub fn with_t_end(mut self, t_end: f64) -> Result<Self> {
        self.solver.t_end = t_end;
        self.solver.validate(&self.grid, &self.frank)?;
        Ok(self)
    }
}
