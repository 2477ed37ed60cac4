//! Energy-law bookkeeping, local Dirichlet energies and concentration
//! detection.

use crate::dynamics::{SimState, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::grid::{cross3, dot3, DirectorField, GridSpec, ScalarField, VectorField3};
use crate::oseen_frank::{
    breakdown_from_gradient, gradient_of, molecular_field_from_spectrum, EnergyBreakdown,
    FieldForm, FrankConstants, GilbertParams,
};
use crate::spectral::{forward_transform, SpectralField};

/// One diagnostics row.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRecord {
    pub t: f64,
    pub energy: EnergyBreakdown,
    /// `alpha int_0^t ||dn/dt||_2^2`
    pub dissipation_cum: f64,
    /// `alpha |d(E + dissipation_cum)/dt|` by differences over outputs.
    pub identity_residual_energy: f64,
    /// `|<dn/dt, n x h> - beta ||dn/dt||^2| / max(||dn/dt||^2, 1e-12)`
    pub identity_residual_beta: f64,
    pub grad_sup: f64,
    /// `int_0^t ||grad n||_inf^2`
    pub blowup_integral: f64,
    /// `int |grad^2 n|^2`
    pub h2_norm_sq: f64,
    /// `int |grad n|^4`
    pub l4_grad: f64,
    pub local_max: f64,
    pub local_argmax: [f64; 2],
    pub blowup: bool,
}

impl EnergyRecord {
    /// Terminal row of a flagged run: only the time and the accumulated
    /// integrals are meaningful.
    pub fn blown_up(t: f64, dissipation_cum: f64, blowup_integral: f64) -> Self {
        let nan = f64::NAN;
        Self {
            t,
            energy: EnergyBreakdown {
                splay: nan,
                twist_bend_k2: nan,
                twist_bend_k3: nan,
                null_lagrangian: nan,
                total: nan,
                dirichlet_part: nan,
                v_part: nan,
            },
            dissipation_cum,
            identity_residual_energy: nan,
            identity_residual_beta: nan,
            grad_sup: nan,
            blowup_integral,
            h2_norm_sq: nan,
            l4_grad: nan,
            local_max: nan,
            local_argmax: [nan, nan],
            blowup: true,
        }
    }
}

/// Disk radius and center lattice used for the per-record local energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordSettings {
    pub local_radius: f64,
    pub center_stride: usize,
}

impl RecordSettings {
    /// `R = max(L/16, 2 dx)` sampled every `max(1, N/32)` nodes.
    pub fn for_grid(grid: &GridSpec) -> Self {
        Self {
            local_radius: (grid.length() / 16.0).max(2.0 * grid.spacing()),
            center_stride: default_stride(grid),
        }
    }
}

pub fn default_stride(grid: &GridSpec) -> usize {
    (grid.n_side() / 32).max(1)
}

/// `|grad n|^2 = |d1 n|^2 + |d2 n|^2` from spectral derivatives.
pub fn gradient_density(n: &VectorField3) -> ScalarField {
    let g = gradient_of(&forward_transform(n));
    density_from(&g.d1, &g.d2)
}

fn density_from(d1: &VectorField3, d2: &VectorField3) -> ScalarField {
    let values = d1
        .values()
        .iter()
        .zip(d2.values())
        .map(|(&a, &b)| dot3(a, a) + dot3(b, b))
        .collect();
    ScalarField::from_values(*d1.grid(), values).expect("grid-sized buffer")
}

/// `||grad n||_inf`, the pointwise Frobenius norm maximized over the grid.
pub fn grad_sup(n: &VectorField3) -> f64 {
    gradient_density(n).max_abs().sqrt()
}

/// `int |grad^2 n|^2` by Parseval.
fn h2_from_spectrum(s: &SpectralField) -> f64 {
    let grid = *s.grid();
    let n = grid.n_side();
    let mut sum = 0.0;
    for c in 0..3 {
        let plane = s.component(c);
        for m2 in 0..n {
            let k2 = grid.derivative_wavenumber(m2);
            for m1 in 0..n {
                let k1 = grid.derivative_wavenumber(m1);
                let w = k1 * k1 + k2 * k2;
                sum += w * w * plane[m2 * n + m1].norm_sqr();
            }
        }
    }
    sum * grid.cell_area() / (n * n) as f64
}

/// `int |grad^2 n|^2`.
pub fn h2_norm_sq(n: &VectorField3) -> f64 {
    h2_from_spectrum(&forward_transform(n))
}

/// `int |grad n|^4`.
pub fn l4_grad(n: &VectorField3) -> f64 {
    let d = gradient_density(n);
    d.values().iter().map(|v| v * v).sum::<f64>() * d.grid().cell_area()
}

/// Diagnostics for one state; the energy residual is filled in by
/// [`finalize_records`].
pub fn record(
    state: &SimState,
    k: &FrankConstants,
    g: &GilbertParams,
    settings: &RecordSettings,
) -> Result<EnergyRecord> {
    let n = &state.n;
    let spec = forward_transform(n);
    let grad = gradient_of(&spec);
    let energy = breakdown_from_gradient(n, &grad, k);
    let h = molecular_field_from_spectrum(n, &spec, k, FieldForm::Reduced);
    let rate = &state.last_rhs;
    let nxh = n.zip_map(&h, cross3);
    let rate_sq = rate.norm_l2_sq();
    let beta_residual = (rate.inner(&nxh) - g.beta * rate_sq).abs() / rate_sq.max(1e-12);
    let density = density_from(&grad.d1, &grad.d2);
    let l4 = density.values().iter().map(|v| v * v).sum::<f64>() * n.grid().cell_area();
    let map = local_energy_from_density(&density, settings.local_radius, settings.center_stride)?;
    Ok(EnergyRecord {
        t: state.time,
        energy,
        dissipation_cum: state.dissipation_cum,
        identity_residual_energy: 0.0,
        identity_residual_beta: beta_residual,
        grad_sup: state.grad_sup,
        blowup_integral: state.blowup_integral,
        h2_norm_sq: h2_from_spectrum(&spec),
        l4_grad: l4,
        local_max: map.max_value,
        local_argmax: map.argmax,
        blowup: false,
    })
}

/// Fill `identity_residual_energy` with `alpha |d(E + D)/dt|`, centered in
/// the interior and one-sided at the ends of the unflagged rows. Uses only
/// quantities that are written to the records file.
pub fn finalize_records(records: &mut [EnergyRecord], g: &GilbertParams) {
    let good: Vec<usize> = (0..records.len()).filter(|&i| !records[i].blowup).collect();
    let conserved = |r: &EnergyRecord| r.energy.total + r.dissipation_cum;
    let residuals: Vec<f64> = (0..good.len())
        .map(|p| {
            if good.len() < 2 {
                return 0.0;
            }
            let (a, b) = if p == 0 {
                (good[0], good[1])
            } else if p + 1 == good.len() {
                (good[p - 1], good[p])
            } else {
                (good[p - 1], good[p + 1])
            };
            let (ra, rb) = (&records[a], &records[b]);
            g.alpha * ((conserved(rb) - conserved(ra)) / (rb.t - ra.t)).abs()
        })
        .collect();
    for (p, &i) in good.iter().enumerate() {
        records[i].identity_residual_energy = residuals[p];
    }
}

/// `E_R` on a lattice of centers.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalEnergyMap {
    pub radius: f64,
    pub stride: usize,
    pub centers: Vec<[f64; 2]>,
    pub values: Vec<f64>,
    pub max_value: f64,
    pub argmax: [f64; 2],
}

/// `E_R(x) = int_{B_R(x)} |grad n|^2` at every `stride`-th node, as disk sums
/// in the torus metric.
pub fn local_energy_map(n: &DirectorField, radius: f64, stride: usize) -> Result<LocalEnergyMap> {
    local_energy_from_density(&gradient_density(n.as_field()), radius, stride)
}

pub fn check_radius(grid: &GridSpec, radius: f64) -> Result<()> {
    let lo = 2.0 * grid.spacing();
    let hi = grid.length() / 4.0;
    if !(radius >= lo * (1.0 - 1e-12) && radius <= hi * (1.0 + 1e-12)) {
        return Err(invalid(format!(
            "radius {radius} outside [2 dx, L/4] = [{lo}, {hi}]"
        )));
    }
    Ok(())
}

pub fn local_energy_from_density(
    density: &ScalarField,
    radius: f64,
    stride: usize,
) -> Result<LocalEnergyMap> {
    let grid = *density.grid();
    check_radius(&grid, radius)?;
    if stride == 0 {
        return Err(invalid("stride must be at least 1"));
    }
    let n = grid.n_side() as isize;
    let dx = grid.spacing();
    let reach = (radius / dx).floor() as isize + 1;
    let mut offsets = Vec::new();
    for o2 in -reach..=reach {
        for o1 in -reach..=reach {
            let d2 = ((o1 * o1 + o2 * o2) as f64) * dx * dx;
            if d2 <= radius * radius * (1.0 + 1e-12) {
                offsets.push((o1, o2));
            }
        }
    }
    let values_in = density.values();
    let mut centers = Vec::new();
    let mut values = Vec::new();
    for i2 in (0..grid.n_side()).step_by(stride) {
        for i1 in (0..grid.n_side()).step_by(stride) {
            let mut sum = 0.0;
            for &(o1, o2) in &offsets {
                let j1 = (i1 as isize + o1).rem_euclid(n) as usize;
                let j2 = (i2 as isize + o2).rem_euclid(n) as usize;
                sum += values_in[grid.index(j1, j2)];
            }
            centers.push(grid.position(grid.index(i1, i2)));
            values.push(sum * grid.cell_area());
        }
    }
    let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
    for (i, &v) in values.iter().enumerate() {
        if v > best {
            best = v;
            arg = i;
        }
    }
    Ok(LocalEnergyMap {
        radius,
        stride,
        argmax: centers[arg],
        max_value: best,
        centers,
        values,
    })
}

fn states_of(trajectory: &Trajectory, at_least: usize) -> Result<&[SimState]> {
    if trajectory.states.len() < at_least {
        return Err(invalid(format!(
            "trajectory keeps {} states, need at least {at_least}",
            trajectory.states.len()
        )));
    }
    Ok(&trajectory.states)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityViolation {
    pub t: f64,
    pub center: [f64; 2],
    /// `E_R(t) - E_2R(0) - C0 t E0 / R^2`
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityAudit {
    /// `max (E_R(t, x) - E_2R(0, x)) R^2 / (t E0)` over positive numerators.
    pub c0_empirical: f64,
    /// Empty unless a reference constant was supplied.
    pub violations: Vec<MonotonicityViolation>,
}

/// Measure the constant in `E_R(t; x) <= E_2R(0; x) + C0 t E0 / R^2`.
pub fn monotonicity_audit(trajectory: &Trajectory, radius: f64) -> Result<MonotonicityAudit> {
    monotonicity_audit_against(trajectory, radius, None)
}

/// As [`monotonicity_audit`], also listing the samples that exceed the bound
/// with a reference constant `c0`.
pub fn monotonicity_audit_against(
    trajectory: &Trajectory,
    radius: f64,
    c0: Option<f64>,
) -> Result<MonotonicityAudit> {
    let states = states_of(trajectory, 3)?;
    let grid = *states[0].n.grid();
    check_radius(&grid, 2.0 * radius)?;
    let e0 = trajectory.records.first().map(|r| r.energy.total).unwrap_or(0.0);
    if !(e0 > 0.0) {
        return Err(Error::Undefined(
            "monotonicity audit needs positive initial energy".into(),
        ));
    }
    let stride = default_stride(&grid);
    let d0 = gradient_density(&states[0].n);
    let wide = local_energy_from_density(&d0, 2.0 * radius, stride)?;
    let mut c_max: f64 = 0.0;
    let mut violations = Vec::new();
    for s in &states[1..] {
        if !(s.time > 0.0) {
            continue;
        }
        let map = local_energy_from_density(&gradient_density(&s.n), radius, stride)?;
        for (i, (&v, &v0)) in map.values.iter().zip(&wide.values).enumerate() {
            let num = v - v0;
            if num > 0.0 {
                c_max = c_max.max(num * radius * radius / (s.time * e0));
            }
            if let Some(c) = c0 {
                let excess = num - c * s.time * e0 / (radius * radius);
                if excess > 0.0 {
                    violations.push(MonotonicityViolation {
                        t: s.time,
                        center: map.centers[i],
                        excess,
                    });
                }
            }
        }
    }
    Ok(MonotonicityAudit {
        c0_empirical: c_max,
        violations,
    })
}

/// `max_t int|grad n|^4 / (sup_x E_R * (int|grad^2 n|^2 + R^-2 int|grad n|^2))`.
pub fn struwe_ratio(trajectory: &Trajectory, radius: f64) -> Result<f64> {
    let states = states_of(trajectory, 1)?;
    let grid = *states[0].n.grid();
    let stride = default_stride(&grid);
    let mut best: Option<f64> = None;
    for s in states {
        let density = gradient_density(&s.n);
        let map = local_energy_from_density(&density, radius, stride)?;
        let l4 = density.values().iter().map(|v| v * v).sum::<f64>() * grid.cell_area();
        let rhs = map.max_value * (h2_norm_sq(&s.n) + density.integral() / (radius * radius));
        if rhs > 0.0 {
            let r = l4 / rhs;
            best = Some(best.map_or(r, |b: f64| b.max(r)));
        }
    }
    best.ok_or_else(|| Error::Undefined("struwe ratio has zero denominator".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationEvent {
    pub t: f64,
    pub location: [f64; 2],
    pub energy: f64,
    pub radius: f64,
    pub threshold: f64,
}

/// Times at which `max_x E_R` crosses `epsilon0`; after firing, the detector
/// re-arms only once the maximum has dropped below `epsilon0 / 2`.
pub fn concentration_scan(
    trajectory: &Trajectory,
    epsilon0: f64,
    radius: f64,
) -> Result<Vec<ConcentrationEvent>> {
    if !(epsilon0 > 0.0) {
        return Err(invalid(format!("epsilon0 must be positive, got {epsilon0}")));
    }
    let states = states_of(trajectory, 1)?;
    let grid = *states[0].n.grid();
    let stride = default_stride(&grid);
    let mut maxima = Vec::with_capacity(states.len());
    for s in states {
        let map = local_energy_from_density(&gradient_density(&s.n), radius, stride)?;
        maxima.push((s.time, map.max_value, map.argmax));
    }
    Ok(scan_maxima(&maxima, epsilon0, radius))
}

/// Hysteresis detector over `(t, max E_R, argmax)` samples.
pub fn scan_maxima(maxima: &[(f64, f64, [f64; 2])], epsilon0: f64, radius: f64) -> Vec<ConcentrationEvent> {
    let mut armed = true;
    let mut events = Vec::new();
    for &(t, value, location) in maxima {
        if armed && value > epsilon0 {
            events.push(ConcentrationEvent {
                t,
                location,
                energy: value,
                radius,
                threshold: epsilon0,
            });
            armed = false;
        } else if !armed && value < 0.5 * epsilon0 {
            armed = true;
        }
    }
    events
}

/// `1 + ||(grad n1, grad n2)||_4^4 + ||(dt n1, dt n2)||_2^2
///  + ||(grad n1, grad n2)||_{H^1}^2`, where `||(f, g)||_p^p` is
/// `||f||_p^p + ||g||_p^p` and `||grad n||_{H^1}^2 = ||grad n||_2^2 + ||grad^2 n||_2^2`.
pub fn hbar(
    n1: &VectorField3,
    n2: &VectorField3,
    dn1: &VectorField3,
    dn2: &VectorField3,
) -> Result<f64> {
    let grid = n1.grid();
    for f in [n2, dn1, dn2] {
        grid.check_same(f.grid())?;
    }
    let part = |n: &VectorField3, dn: &VectorField3| {
        let density = gradient_density(n);
        let l4 = density.values().iter().map(|v| v * v).sum::<f64>() * grid.cell_area();
        l4 + dn.norm_l2_sq() + density.integral() + h2_norm_sq(n)
    };
    Ok(1.0 + part(n1, dn1) + part(n2, dn2))
}
