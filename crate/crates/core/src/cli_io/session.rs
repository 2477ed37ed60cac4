//! Run directories and the commands that read and write them.
//!
//! A run directory holds `config.txt` (the resolved configuration),
//! `manifest.txt`, `records.csv` and `snapshots/step_<index>.snap`. One
//! writer at a time is enforced by a `.lock` file; readers take no lock.

use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use crate::cli_io::config::{load_config, RunConfig};
use crate::cli_io::records::{read_records, write_records, FlagThresholds};
use crate::cli_io::snapshot::{read_snapshot, write_snapshot};
use crate::diagnostics::{hbar, EnergyRecord};
use crate::dynamics::{run, run_from, SimState, Trajectory, TrajectoryStatus};
use crate::error::{invalid, Error, Result};
use crate::grid::{normalize, DirectorField, VectorField3};
use crate::initial::{build_initial, generate_initial, InitialDatum};
use crate::littlewood_paley::{build_partition, decompose, weak_metric_fields, DyadicPartition};
use crate::oseen_frank::FrankConstants;
use crate::spectral::{forward_transform, inverse_transform};

pub const CONFIG_FILE: &str = "config.txt";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const RECORDS_FILE: &str = "records.csv";
pub const SNAPSHOT_DIR: &str = "snapshots";
const LOCK_FILE: &str = ".lock";

/// Seed offset separating the perturbation noise from the datum's own seed.
const PERTURBATION_SALT: u64 = 0x7e57_ab1e_5eed;

/// Exclusive write access to a run directory, released on drop.
#[derive(Debug)]
pub struct DirectoryLock {
    path: PathBuf,
}

impl DirectoryLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(invalid(format!(
                "{} is locked by another writer (remove {} if it is stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DirectoryLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// The configured initial datum, plus `perturbation` times a smooth seeded
/// field before renormalizing.
pub fn initial_field(cfg: &RunConfig) -> Result<DirectorField> {
    let n0 = generate_initial(&cfg.initial.datum, cfg.grid)?;
    if cfg.initial.perturbation == 0.0 {
        return Ok(n0);
    }
    let noise = build_initial(
        &InitialDatum::RandomSmooth {
            amplitude: 0.5,
            modes: 3,
            seed: cfg.initial.seed.wrapping_add(PERTURBATION_SALT),
        },
        cfg.grid,
    )?;
    let mut f = n0.into_field();
    for (v, g) in f.values_mut().iter_mut().zip(noise.values()) {
        v[0] += cfg.initial.perturbation * g[0];
        v[1] += cfg.initial.perturbation * g[1];
        v[2] += cfg.initial.perturbation * (g[2] - 1.0);
    }
    normalize(&f)
}

pub fn snapshot_path(dir: &Path, step: u64) -> PathBuf {
    dir.join(SNAPSHOT_DIR).join(format!("step_{step:010}.snap"))
}

fn thresholds(cfg: &RunConfig) -> FlagThresholds {
    FlagThresholds {
        epsilon0: cfg.diagnostics.epsilon0,
        epsilon1: cfg.diagnostics.epsilon1,
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub status: TrajectoryStatus,
    pub records: Vec<EnergyRecord>,
    pub steps: u64,
}

fn integrate_into(
    dir: &Path,
    cfg: &RunConfig,
    start: Option<(SimState, Vec<EnergyRecord>)>,
    command: &str,
    progress: &mut dyn FnMut(&EnergyRecord),
) -> Result<RunSummary> {
    std::fs::create_dir_all(dir.join(SNAPSHOT_DIR))?;
    std::fs::write(dir.join(CONFIG_FILE), cfg.to_text())?;
    let total = cfg.solver.total_steps();
    let stride = cfg.solver.output_stride as u64;
    let snap_every = cfg.output.snapshot_stride as u64;
    let mut last_step = start.as_ref().map_or(0, |(s, _)| s.step_index);
    let mut observer = |s: &SimState, r: &EnergyRecord| -> Result<()> {
        last_step = s.step_index;
        progress(r);
        let on_cadence = s.step_index % stride == 0 && (s.step_index / stride) % snap_every == 0;
        if !r.blowup && (on_cadence || s.step_index == total) {
            write_snapshot(&snapshot_path(dir, s.step_index), s.time, &s.n)?;
        }
        Ok(())
    };
    let settings = cfg.diagnostics.record_settings();
    let traj = match start {
        None => run(&initial_field(cfg)?, &cfg.solver, &cfg.frank, &cfg.gilbert, &settings, &mut observer)?,
        Some((state, prior)) => {
            run_from(state, prior, &cfg.solver, &cfg.frank, &cfg.gilbert, &settings, &mut observer)?
        }
    };
    write_records(&dir.join(RECORDS_FILE), &traj.records, &thresholds(cfg))?;
    std::fs::write(dir.join(MANIFEST_FILE), manifest(cfg, command, &traj, last_step))?;
    Ok(RunSummary {
        status: traj.status,
        records: traj.records,
        steps: last_step,
    })
}

fn manifest(cfg: &RunConfig, command: &str, traj: &Trajectory, steps: u64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "program = ollg {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "command = {command}");
    let _ = writeln!(s, "platform = {} {}", std::env::consts::OS, std::env::consts::ARCH);
    let status = match traj.status {
        TrajectoryStatus::Completed => "completed".to_string(),
        TrajectoryStatus::BlowUp { step } => format!("blowup at step {step}"),
    };
    let _ = writeln!(s, "status = {status}");
    let _ = writeln!(s, "steps = {steps}");
    let _ = writeln!(s, "outputs = {}", traj.records.len());
    let _ = writeln!(s, "note = outputs are bit-reproducible for a fixed binary and platform, at any thread count");
    s.push_str("\n[config]\n");
    s.push_str(&cfg.to_text());
    s
}

/// Integrate `cfg` from its initial datum into a fresh directory.
pub fn run_directory(cfg: &RunConfig, dir: &Path, progress: &mut dyn FnMut(&EnergyRecord)) -> Result<RunSummary> {
    let _lock = DirectoryLock::acquire(dir)?;
    if dir.join(RECORDS_FILE).exists() {
        return Err(invalid(format!(
            "{} already holds a run; use restart or another output directory",
            dir.display()
        )));
    }
    integrate_into(dir, cfg, None, "run", progress)
}

/// Snapshot steps present in a run directory, ascending.
pub fn list_snapshots(dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let mut out = Vec::new();
    let snap_dir = dir.join(SNAPSHOT_DIR);
    if !snap_dir.exists() {
        return Ok(out);
    }
    for entry in std::fs::read_dir(snap_dir)? {
        let path = entry?.path();
        let step = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("step_"))
            .and_then(|n| n.strip_suffix(".snap"))
            .and_then(|n| n.parse::<u64>().ok());
        if let Some(step) = step {
            out.push((step, path));
        }
    }
    out.sort();
    Ok(out)
}

/// Continue a run from one of its snapshots (the latest by default),
/// optionally to a new end time. Rows and snapshots after the restart point
/// are replaced; the continuation is bit-identical to an uninterrupted run
/// whose outputs include the restart step.
pub fn restart_directory(
    dir: &Path,
    snapshot: Option<&Path>,
    until: Option<f64>,
    progress: &mut dyn FnMut(&EnergyRecord),
) -> Result<RunSummary> {
    let _lock = DirectoryLock::acquire(dir)?;
    let mut cfg = load_config(&dir.join(CONFIG_FILE))?;
    if let Some(t) = until {
        cfg = cfg.with_t_end(t)?;
    }
    let path = match snapshot {
        Some(p) => p.to_path_buf(),
        None => list_snapshots(dir)?
            .pop()
            .map(|(_, p)| p)
            .ok_or_else(|| invalid(format!("no snapshots in {}", dir.display())))?,
    };
    let snap = read_snapshot(&path)?;
    cfg.grid.check_same(snap.field.grid())?;
    let step = (snap.time / cfg.solver.dt).round() as u64;
    if step as f64 * cfg.solver.dt != snap.time {
        return Err(Error::Snapshot {
            path,
            message: format!("time {} is not a step of dt = {}", snap.time, cfg.solver.dt),
        });
    }
    let mut prior = read_records(&dir.join(RECORDS_FILE))?;
    prior.retain(|r| r.t <= snap.time);
    let anchor = prior
        .last()
        .filter(|r| r.t == snap.time && !r.blowup)
        .ok_or_else(|| invalid(format!("records.csv has no row at the snapshot time {}", snap.time)))?;
    let state = SimState::restore(
        snap.field,
        step,
        anchor.dissipation_cum,
        anchor.blowup_integral,
        &cfg.solver,
        &cfg.frank,
        &cfg.gilbert,
    )?;
    for (s, p) in list_snapshots(dir)? {
        if s > step {
            std::fs::remove_file(p)?;
        }
    }
    integrate_into(dir, &cfg, Some((state, prior)), "restart", progress)
}

/// One row of a weak-metric comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub t: f64,
    pub w: f64,
    pub hbar: f64,
    /// Trapezoidal `int_0^t hbar`.
    pub hbar_integral: f64,
    /// `W(t) / (W(t0) exp(C int hbar))`.
    pub bound_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    /// Smallest `C` with `W(t) <= W(t0) exp(C int_t0^t hbar)` at every row.
    pub c_fit: f64,
}

/// Weak metric between paired states with the Gronwall fit. States must
/// carry their tendency in `last_rhs`.
pub fn compare_states(
    pairs: &[(&SimState, &SimState)],
    partition: &DyadicPartition,
    k: &FrankConstants,
    s: f64,
) -> Result<CompareReport> {
    if pairs.is_empty() {
        return Err(invalid("no matched states to compare"));
    }
    let mut rows: Vec<CompareRow> = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        if a.time != b.time {
            return Err(invalid(format!("unmatched times {} and {}", a.time, b.time)));
        }
        let w = weak_metric_fields(&a.n, &b.n, partition, k, s)?.total;
        let h = hbar(&a.n, &b.n, &a.last_rhs, &b.last_rhs)?;
        let integral = match rows.last() {
            Some(p) => p.hbar_integral + 0.5 * (a.time - p.t) * (p.hbar + h),
            None => 0.0,
        };
        rows.push(CompareRow {
            t: a.time,
            w,
            hbar: h,
            hbar_integral: integral,
            bound_ratio: f64::NAN,
        });
    }
    let w0 = rows[0].w;
    let c_fit = if w0 == 0.0 {
        if rows.iter().all(|r| r.w == 0.0) {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        rows[1..]
            .iter()
            .filter(|r| r.hbar_integral > 0.0)
            .map(|r| (r.w / w0).ln() / r.hbar_integral)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let c_fit = if c_fit == f64::NEG_INFINITY { 0.0 } else { c_fit };
    for r in &mut rows {
        r.bound_ratio = if w0 == 0.0 {
            if r.w == 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            r.w / (w0 * (c_fit * r.hbar_integral).exp())
        };
    }
    Ok(CompareReport { rows, c_fit })
}

fn load_states(dir: &Path, cfg: &RunConfig) -> Result<Vec<SimState>> {
    list_snapshots(dir)?
        .into_iter()
        .map(|(step, p)| {
            let snap = read_snapshot(&p)?;
            cfg.grid.check_same(snap.field.grid())?;
            let mut s = SimState::restore(snap.field, step, 0.0, 0.0, &cfg.solver, &cfg.frank, &cfg.gilbert)?;
            s.time = snap.time;
            Ok(s)
        })
        .collect()
}

/// Compare two run directories at their common snapshot times, using the
/// elastic constants of the first.
pub fn compare_directories(a: &Path, b: &Path, s: f64) -> Result<CompareReport> {
    let ca = load_config(&a.join(CONFIG_FILE))?;
    let cb = load_config(&b.join(CONFIG_FILE))?;
    if ca.grid != cb.grid {
        return Err(invalid(format!(
            "grids differ: N = {}, L = {} against N = {}, L = {}",
            ca.grid.n_side(),
            ca.grid.length(),
            cb.grid.n_side(),
            cb.grid.length()
        )));
    }
    let sa = load_states(a, &ca)?;
    let sb = load_states(b, &cb)?;
    let pairs: Vec<(&SimState, &SimState)> = sa
        .iter()
        .filter_map(|x| sb.iter().find(|y| y.time == x.time).map(|y| (x, y)))
        .collect();
    compare_states(&pairs, &build_partition(ca.grid)?, &ca.frank, s)
}

pub fn format_compare(report: &CompareReport) -> String {
    let mut s = format!("# C_fit = {:.16e}\nt,W,hbar,hbar_integral,bound_ratio\n", report.c_fit);
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.t, r.w, r.hbar, r.hbar_integral, r.bound_ratio
        );
    }
    s
}

/// `sum_i ||Delta_j d_i n||_2^2` per block.
pub fn gradient_block_energies(n: &VectorField3, partition: &DyadicPartition) -> Result<Vec<(i32, f64)>> {
    let spec = forward_transform(n);
    let mut out: Vec<(i32, f64)> = partition.indices().map(|j| (j, 0.0)).collect();
    for axis in 0..2 {
        let d = inverse_transform(&spec.derivative(axis));
        for (slot, (_, e)) in out.iter_mut().zip(decompose(&d, partition)?.energies()) {
            slot.1 += e;
        }
    }
    Ok(out)
}

/// Per-block gradient energy at every snapshot of a run directory.
pub fn spectrum_directory(dir: &Path) -> Result<Vec<(f64, i32, f64)>> {
    let cfg = load_config(&dir.join(CONFIG_FILE))?;
    let partition = build_partition(cfg.grid)?;
    let mut rows = Vec::new();
    for (_, p) in list_snapshots(dir)? {
        let snap = read_snapshot(&p)?;
        for (j, e) in gradient_block_energies(&snap.field, &partition)? {
            rows.push((snap.time, j, e));
        }
    }
    Ok(rows)
}

pub fn format_spectrum(rows: &[(f64, i32, f64)]) -> String {
    let mut s = String::from("t,j,energy\n");
    for (t, j, e) in rows {
        let _ = writeln!(s, "{t:.16e},{j},{e:.16e}");
    }
    s
}
