//! Explicit time integration of `dn/dt = alpha n x (h x n) + beta n x h`, its
//! projected form and the mollified (Friedrich) approximate system.

use crate::diagnostics::{self, EnergyRecord, RecordSettings};
use crate::error::{invalid, Result};
use crate::grid::{cross3, dot3, normalize, DirectorField, GridSpec, Vec3, VectorField3};
use crate::oseen_frank::{
    check_unit, molecular_field_from_spectrum, FieldForm, FrankConstants, GilbertParams,
};
use crate::spectral::{check_cutoff, forward_transform, inverse_transform, low_pass_spectral};

/// Default CFL safety factor.
pub const DEFAULT_CFL: f64 = 0.4;

/// A state whose smallest `|n|` drops below this is treated as blown up.
pub const BLOWUP_NORM: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Rk4,
    Heun,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Rk4 => "rk4",
            Scheme::Heun => "heun",
        }
    }
}

/// Right-hand side integrated by [`step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhsForm {
    /// `alpha n x (h x n) + beta n x h`
    Standard,
    /// `alpha n x (h x n) + beta n x ((n x h) x n)`
    Projected,
}

impl RhsForm {
    pub fn name(self) -> &'static str {
        match self {
            RhsForm::Standard => "standard",
            RhsForm::Projected => "projected",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    /// Renormalize after every `m`-th step; 0 disables renormalization.
    pub renormalize_every: usize,
    /// Mollifier cutoff; `None` integrates the unmollified system.
    pub friedrich_cutoff: Option<f64>,
    pub cfl_safety: f64,
    pub output_stride: usize,
    pub rhs_form: RhsForm,
    /// Keep the field at every output in the trajectory.
    pub keep_states: bool,
}

/// `cfl_safety dx^2 / (8 a pi^2)`.
pub fn cfl_limit(grid: &GridSpec, k: &FrankConstants, cfl_safety: f64) -> f64 {
    let dx = grid.spacing();
    cfl_safety * dx * dx / (8.0 * k.a() * std::f64::consts::PI * std::f64::consts::PI)
}

impl SolverConfig {
    /// RK4 with the CFL time step, renormalization after every step, output
    /// every step.
    pub fn new(grid: &GridSpec, k: &FrankConstants, t_end: f64) -> Result<Self> {
        let config = Self {
            dt: cfl_limit(grid, k, DEFAULT_CFL),
            t_end,
            scheme: Scheme::Rk4,
            renormalize_every: 1,
            friedrich_cutoff: None,
            cfl_safety: DEFAULT_CFL,
            output_stride: 1,
            rhs_form: RhsForm::Standard,
            keep_states: true,
        };
        config.validate(grid, k)?;
        Ok(config)
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_output_stride(mut self, stride: usize) -> Self {
        self.output_stride = stride;
        self
    }

    pub fn with_renormalize_every(mut self, m: usize) -> Self {
        self.renormalize_every = m;
        self
    }

    /// Mollified system; renormalization is switched off, as the approximate
    /// system evolves `|n|` freely.
    pub fn with_friedrich_cutoff(mut self, cutoff: f64) -> Self {
        self.friedrich_cutoff = Some(cutoff);
        self.renormalize_every = 0;
        self
    }

    pub fn with_rhs_form(mut self, form: RhsForm) -> Self {
        self.rhs_form = form;
        self
    }

    pub fn with_keep_states(mut self, keep: bool) -> Self {
        self.keep_states = keep;
        self
    }

    pub fn validate(&self, grid: &GridSpec, k: &FrankConstants) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(invalid(format!("t_end must be positive, got {}", self.t_end)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(invalid(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        if self.output_stride == 0 {
            return Err(invalid("output_stride must be at least 1"));
        }
        if let Some(c) = self.friedrich_cutoff {
            check_cutoff(c)?;
        }
        let limit = cfl_limit(grid, k, self.cfl_safety);
        if self.dt > limit * (1.0 + 1e-12) {
            return Err(invalid(format!(
                "dt = {:e} exceeds the stability limit {limit:e} (cfl_safety {})",
                self.dt, self.cfl_safety
            )));
        }
        Ok(())
    }

    /// Number of steps taken to reach `t_end`.
    pub fn total_steps(&self) -> u64 {
        ((self.t_end / self.dt) * (1.0 + 1e-12)).floor() as u64
    }
}

/// Integrator state. `n` is unit-norm except on mollified or
/// non-renormalized runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub time: f64,
    pub step_index: u64,
    pub n: VectorField3,
    /// Tendency `dn/dt` at `n`.
    pub last_rhs: VectorField3,
    /// `alpha int_0^t ||dn/dt||_2^2 ds`, integrated with the stages of the scheme.
    pub dissipation_cum: f64,
    /// `int_0^t ||grad n||_inf^2 ds`, trapezoidal over steps.
    pub blowup_integral: f64,
    /// `||grad n||_inf` at `n`.
    pub grad_sup: f64,
}

impl SimState {
    /// State at `t = 0`. Mollified runs start from `J n0`.
    pub fn initial(
        n0: &DirectorField,
        config: &SolverConfig,
        k: &FrankConstants,
        g: &GilbertParams,
    ) -> Result<Self> {
        let n = match config.friedrich_cutoff {
            Some(c) => {
                check_cutoff(c)?;
                inverse_transform(&low_pass_spectral(&forward_transform(n0.as_field()), c))
            }
            None => n0.as_field().clone(),
        };
        Self::restore(n, 0, 0.0, 0.0, config, k, g)
    }

    /// Rebuild a state from its field and accumulated integrals; the cached
    /// tendency and gradient bound are recomputed, so the result equals the
    /// state the original run held at `step_index`.
    pub fn restore(
        n: VectorField3,
        step_index: u64,
        dissipation_cum: f64,
        blowup_integral: f64,
        config: &SolverConfig,
        k: &FrankConstants,
        g: &GilbertParams,
    ) -> Result<Self> {
        if !n.is_finite() {
            return Err(invalid("state contains non-finite values"));
        }
        let last_rhs = evaluate(&n, config, k, g);
        let grad_sup = diagnostics::grad_sup(&n);
        Ok(Self {
            time: step_index as f64 * config.dt,
            step_index,
            n,
            last_rhs,
            dissipation_cum,
            blowup_integral,
            grad_sup,
        })
    }

    pub fn director(&self) -> Result<DirectorField> {
        DirectorField::with_tolerance(self.n.clone(), 1e-9)
    }
}

#[inline]
fn standard_at(v: Vec3, h: Vec3, g: &GilbertParams) -> Vec3 {
    let damp = cross3(v, cross3(h, v));
    let gyro = cross3(v, h);
    [
        g.alpha * damp[0] + g.beta * gyro[0],
        g.alpha * damp[1] + g.beta * gyro[1],
        g.alpha * damp[2] + g.beta * gyro[2],
    ]
}

#[inline]
fn projected_at(v: Vec3, h: Vec3, g: &GilbertParams) -> Vec3 {
    let damp = cross3(v, cross3(h, v));
    let gyro = cross3(v, cross3(cross3(v, h), v));
    [
        g.alpha * damp[0] + g.beta * gyro[0],
        g.alpha * damp[1] + g.beta * gyro[1],
        g.alpha * damp[2] + g.beta * gyro[2],
    ]
}

fn standard_raw(n: &VectorField3, k: &FrankConstants, g: &GilbertParams) -> VectorField3 {
    let h = molecular_field_from_spectrum(n, &forward_transform(n), k, FieldForm::Reduced);
    n.zip_map(&h, |v, hv| standard_at(v, hv, g))
}

/// `alpha n x (h x n) + beta n x h` for a unit field.
pub fn rhs(n: &DirectorField, k: &FrankConstants, g: &GilbertParams) -> Result<VectorField3> {
    check_unit(n)?;
    Ok(standard_raw(n.as_field(), k, g))
}

/// `alpha n x (h x n) + beta n x ((n x h) x n)`; `n` need not be unit.
pub fn rhs_projected(n: &VectorField3, k: &FrankConstants, g: &GilbertParams) -> VectorField3 {
    let h = molecular_field_from_spectrum(n, &forward_transform(n), k, FieldForm::Reduced);
    n.zip_map(&h, |v, hv| projected_at(v, hv, g))
}

/// Mollified system: with `m = J n` and `H` the molecular field of `m` in
/// divergence form, returns `J(alpha m x (H x m) + beta m x ((m x H) x m))`.
pub fn rhs_friedrich(
    n: &VectorField3,
    k: &FrankConstants,
    g: &GilbertParams,
    cutoff: f64,
) -> Result<VectorField3> {
    check_cutoff(cutoff)?;
    Ok(friedrich_raw(n, k, g, cutoff))
}

fn friedrich_raw(n: &VectorField3, k: &FrankConstants, g: &GilbertParams, cutoff: f64) -> VectorField3 {
    let ms = low_pass_spectral(&forward_transform(n), cutoff);
    let m = inverse_transform(&ms);
    let h = molecular_field_from_spectrum(&m, &ms, k, FieldForm::Divergence);
    let inner = m.zip_map(&h, |v, hv| projected_at(v, hv, g));
    inverse_transform(&low_pass_spectral(&forward_transform(&inner), cutoff))
}

/// Tendency integrated under `config`.
pub fn evaluate(
    n: &VectorField3,
    config: &SolverConfig,
    k: &FrankConstants,
    g: &GilbertParams,
) -> VectorField3 {
    match (config.friedrich_cutoff, config.rhs_form) {
        (Some(c), _) => friedrich_raw(n, k, g, c),
        (None, RhsForm::Standard) => standard_raw(n, k, g),
        (None, RhsForm::Projected) => rhs_projected(n, k, g),
    }
}

/// Smallest `|n|` over the grid, NaN-propagating.
pub fn min_norm(n: &VectorField3) -> f64 {
    let mut m = f64::INFINITY;
    for &v in n.values() {
        let r = dot3(v, v).sqrt();
        if r.is_nan() {
            return f64::NAN;
        }
        m = m.min(r);
    }
    m
}

/// Whether a field shows the numerical blow-up signal.
pub fn is_blown_up(n: &VectorField3) -> bool {
    let m = min_norm(n);
    !n.is_finite() || !(m >= BLOWUP_NORM)
}

fn combine(n: &VectorField3, dt: f64, k: &VectorField3) -> VectorField3 {
    let mut out = n.clone();
    out.axpy(dt, k);
    out
}

/// Advance one step. Returns the new state, which may be non-finite; callers
/// check [`is_blown_up`].
pub fn step(
    state: &SimState,
    config: &SolverConfig,
    k: &FrankConstants,
    g: &GilbertParams,
) -> SimState {
    let dt = config.dt;
    let n = &state.n;
    let k1 = &state.last_rhs;
    // The dissipation rate is integrated with the same stages as the state.
    let (mut next, mean_rate) = match config.scheme {
        Scheme::Rk4 => {
            let k2 = evaluate(&combine(n, 0.5 * dt, k1), config, k, g);
            let k3 = evaluate(&combine(n, 0.5 * dt, &k2), config, k, g);
            let k4 = evaluate(&combine(n, dt, &k3), config, k, g);
            let mut out = n.clone();
            let w = dt / 6.0;
            for (i, o) in out.values_mut().iter_mut().enumerate() {
                for c in 0..3 {
                    o[c] += w * (k1[i][c] + 2.0 * k2[i][c] + 2.0 * k3[i][c] + k4[i][c]);
                }
            }
            let rate = (k1.norm_l2_sq() + 2.0 * k2.norm_l2_sq() + 2.0 * k3.norm_l2_sq() + k4.norm_l2_sq()) / 6.0;
            (out, rate)
        }
        Scheme::Heun => {
            let k2 = evaluate(&combine(n, dt, k1), config, k, g);
            let mut out = n.clone();
            for (i, o) in out.values_mut().iter_mut().enumerate() {
                for c in 0..3 {
                    o[c] += 0.5 * dt * (k1[i][c] + k2[i][c]);
                }
            }
            (out, 0.5 * (k1.norm_l2_sq() + k2.norm_l2_sq()))
        }
    };
    let step_index = state.step_index + 1;
    if config.renormalize_every > 0 && step_index % config.renormalize_every as u64 == 0 {
        if let Ok(d) = normalize(&next) {
            next = d.into_field();
        }
    }
    let finite = next.is_finite();
    let last_rhs = if finite {
        evaluate(&next, config, k, g)
    } else {
        VectorField3::from_raw(*next.grid(), vec![[f64::NAN; 3]; next.grid().len()])
    };
    let grad_sup = if finite {
        diagnostics::grad_sup(&next)
    } else {
        f64::NAN
    };
    SimState {
        time: step_index as f64 * dt,
        step_index,
        dissipation_cum: state.dissipation_cum + g.alpha * dt * mean_rate,
        blowup_integral: state.blowup_integral
            + 0.5 * dt * (state.grad_sup * state.grad_sup + grad_sup * grad_sup),
        grad_sup,
        n: next,
        last_rhs,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryStatus {
    Completed,
    /// Non-finite values or `|n| < 0.5` appeared at this step.
    BlowUp { step: u64 },
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Fields at the output times (empty unless `keep_states`).
    pub states: Vec<SimState>,
    pub records: Vec<EnergyRecord>,
    pub config: SolverConfig,
    pub status: TrajectoryStatus,
}

impl Trajectory {
    pub fn is_flagged(&self) -> bool {
        matches!(self.status, TrajectoryStatus::BlowUp { .. })
    }

    pub fn final_state(&self) -> Option<&SimState> {
        self.states.last()
    }
}

/// Called with every output state and its record.
pub type Observer<'a> = dyn FnMut(&SimState, &EnergyRecord) -> Result<()> + 'a;

/// Integrate from `initial` to `t_end`.
pub fn run(
    initial: &DirectorField,
    config: &SolverConfig,
    k: &FrankConstants,
    g: &GilbertParams,
    settings: &RecordSettings,
    observer: &mut Observer<'_>,
) -> Result<Trajectory> {
    config.validate(initial.grid(), k)?;
    let state = SimState::initial(initial, config, k, g)?;
    run_from(state, Vec::new(), config, k, g, settings, observer)
}

/// Continue from `state`. `prior` holds the records already produced for
/// outputs before `state`; they are kept verbatim and take part in the
/// centered differences of the energy residual.
pub fn run_from(
    mut state: SimState,
    prior: Vec<EnergyRecord>,
    config: &SolverConfig,
    k: &FrankConstants,
    g: &GilbertParams,
    settings: &RecordSettings,
    observer: &mut Observer<'_>,
) -> Result<Trajectory> {
    config.validate(state.n.grid(), k)?;
    let total = config.total_steps();
    let mut records = prior;
    let mut states = Vec::new();
    let mut status = TrajectoryStatus::Completed;

    let resumed = !records.is_empty();
    if !resumed {
        let rec = diagnostics::record(&state, k, g, settings)?;
        observer(&state, &rec)?;
        records.push(rec);
        if config.keep_states {
            states.push(state.clone());
        }
    }
    while state.step_index < total {
        state = step(&state, config, k, g);
        if is_blown_up(&state.n) {
            status = TrajectoryStatus::BlowUp {
                step: state.step_index,
            };
            let rec = EnergyRecord::blown_up(state.time, state.dissipation_cum, state.blowup_integral);
            observer(&state, &rec)?;
            records.push(rec);
            break;
        }
        if state.step_index % config.output_stride as u64 == 0 || state.step_index == total {
            let rec = diagnostics::record(&state, k, g, settings)?;
            observer(&state, &rec)?;
            records.push(rec);
            if config.keep_states {
                states.push(state.clone());
            }
        }
    }
    diagnostics::finalize_records(&mut records, g);
    Ok(Trajectory {
        states,
        records,
        config: config.clone(),
        status,
    })
}
