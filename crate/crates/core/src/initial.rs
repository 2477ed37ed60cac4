//! Initial director fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::grid::{cross3, dot3, norm3, normalize, scale3, DirectorField, GridSpec, Vec3, VectorField3};
use crate::spectral::spectral_tail;

/// Largest admissible spectral content beyond `RESOLVED_FRACTION * k_max`,
/// relative to the peak coefficient.
pub const TAIL_TOLERANCE: f64 = 1e-10;
pub const RESOLVED_FRACTION: f64 = 2.0 / 3.0;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialDatum {
    /// `n = b` everywhere.
    Constant { background: Vec3 },
    /// Director varying along `x1` only, twisting about `x1` and tilting
    /// towards it: `n = (sin psi, cos psi cos theta, cos psi sin theta)` with
    /// `theta = A sin(m k0 x1)` and `psi = (A/2) cos(m k0 x1)`.
    TwistedStripe { amplitude: f64, mode: u32 },
    /// Degree-one bubble of scale `lambda` sitting on background `b`.
    Bubble {
        scale: f64,
        center: [f64; 2],
        background: Vec3,
    },
    /// `normalize(e3 + A g)` where `g` is a random trigonometric polynomial
    /// with integer frequencies `|m|_inf <= modes` and `|g_c| <= 1/sqrt(3)`.
    RandomSmooth { amplitude: f64, modes: u32, seed: u64 },
}

impl InitialDatum {
    pub fn kind(&self) -> &'static str {
        match self {
            InitialDatum::Constant { .. } => "constant",
            InitialDatum::TwistedStripe { .. } => "twisted_stripe",
            InitialDatum::Bubble { .. } => "bubble",
            InitialDatum::RandomSmooth { .. } => "random_smooth",
        }
    }
}

/// Generate a unit director field and check it is resolved on `grid`.
///
/// Bubbles are exempt from the spectral-tail check: at the small end of the
/// admissible scale range they are resolved only to a few digits.
pub fn generate_initial(datum: &InitialDatum, grid: GridSpec) -> Result<DirectorField> {
    let n = build_initial(datum, grid)?;
    if !matches!(datum, InitialDatum::Bubble { .. }) {
        let tail = spectral_tail(n.as_field(), RESOLVED_FRACTION);
        if tail > TAIL_TOLERANCE {
            return Err(invalid(format!(
                "{} datum is under-resolved on N = {}: spectral tail {tail:.3e} > {TAIL_TOLERANCE:e}",
                datum.kind(),
                grid.n_side()
            )));
        }
    }
    Ok(n)
}

/// Same as [`generate_initial`] without the resolution check.
pub fn build_initial(datum: &InitialDatum, grid: GridSpec) -> Result<DirectorField> {
    match *datum {
        InitialDatum::Constant { background } => {
            DirectorField::constant(grid, unit_background(background)?)
        }
        InitialDatum::TwistedStripe { amplitude, mode } => twisted_stripe(grid, amplitude, mode),
        InitialDatum::Bubble {
            scale,
            center,
            background,
        } => bubble(grid, scale, center, background),
        InitialDatum::RandomSmooth {
            amplitude,
            modes,
            seed,
        } => random_smooth(grid, amplitude, modes, seed),
    }
}

fn unit_background(b: Vec3) -> Result<Vec3> {
    let r = norm3(b);
    if !(r.is_finite() && r > 0.0) {
        return Err(invalid(format!("background {b:?} is not a direction")));
    }
    Ok(if (r - 1.0).abs() <= 1e-15 { b } else { scale3(1.0 / r, b) })
}

fn twisted_stripe(grid: GridSpec, amplitude: f64, mode: u32) -> Result<DirectorField> {
    if !amplitude.is_finite() || mode == 0 {
        return Err(invalid("twisted_stripe needs a finite amplitude and mode >= 1"));
    }
    let k = mode as f64 * grid.k0();
    let f = VectorField3::from_fn(grid, |x| {
        let theta = amplitude * (k * x[0]).sin();
        let psi = 0.5 * amplitude * (k * x[0]).cos();
        [psi.sin(), psi.cos() * theta.cos(), psi.cos() * theta.sin()]
    });
    normalize(&f)
}

/// Width of the Gaussian that confines the bubble profile to one period.
fn bubble_envelope(grid: &GridSpec) -> f64 {
    grid.length() / 16.0
}

fn bubble(grid: GridSpec, scale: f64, center: [f64; 2], background: Vec3) -> Result<DirectorField> {
    let lo = 4.0 * grid.spacing();
    let hi = grid.length() / 8.0;
    if !(scale >= lo * (1.0 - 1e-12) && scale <= hi * (1.0 + 1e-12)) {
        return Err(invalid(format!(
            "bubble scale {scale} outside [{lo}, {hi}] (4 dx to L/8)"
        )));
    }
    if !(center[0].is_finite() && center[1].is_finite()) {
        return Err(invalid("bubble center must be finite"));
    }
    let b = unit_background(background)?;
    let sigma = bubble_envelope(&grid);
    let f = VectorField3::from_fn(grid, |x| {
        let w = grid.torus_displacement(center, x);
        let r2 = w[0] * w[0] + w[1] * w[1];
        // Inverse stereographic map of the rational profile rho/r, with rho
        // damped so that n reaches the background well inside the period.
        let rho = scale * (-r2 / (2.0 * sigma * sigma)).exp();
        let d = r2 + rho * rho;
        let v = [2.0 * rho * w[0] / d, 2.0 * rho * w[1] / d, (r2 - rho * rho) / d];
        rotate_pole_to(v, b)
    });
    normalize(&f)
}

/// Rotation taking `e3` to `b`, applied to `v`.
fn rotate_pole_to(v: Vec3, b: Vec3) -> Vec3 {
    let e3 = [0.0, 0.0, 1.0];
    let c = b[2];
    if c >= 1.0 - 1e-15 {
        return v;
    }
    if c <= -1.0 + 1e-15 {
        // Half-turn about e1.
        return [v[0], -v[1], -v[2]];
    }
    let axis = cross3(e3, b);
    let s = norm3(axis);
    let u = scale3(1.0 / s, axis);
    let uv = cross3(u, v);
    let ud = dot3(u, v);
    [
        v[0] * c + uv[0] * s + u[0] * ud * (1.0 - c),
        v[1] * c + uv[1] * s + u[1] * ud * (1.0 - c),
        v[2] * c + uv[2] * s + u[2] * ud * (1.0 - c),
    ]
}

fn random_smooth(grid: GridSpec, amplitude: f64, modes: u32, seed: u64) -> Result<DirectorField> {
    if !(0.0..1.0).contains(&amplitude) {
        return Err(invalid(format!(
            "random_smooth amplitude {amplitude} outside [0, 1)"
        )));
    }
    if modes == 0 {
        return Err(invalid("random_smooth needs modes >= 1"));
    }
    let terms = random_terms(modes as i64, seed);
    let k0 = grid.k0();
    let scale = amplitude / 3f64.sqrt();
    let f = VectorField3::from_fn(grid, |x| {
        let mut v = [0.0, 0.0, 1.0];
        for t in &terms {
            let arg = k0 * (t.m[0] as f64 * x[0] + t.m[1] as f64 * x[1]);
            let (s, c) = arg.sin_cos();
            for i in 0..3 {
                v[i] += scale * (t.cos[i] * c + t.sin[i] * s);
            }
        }
        v
    });
    normalize(&f)
}

struct Term {
    m: [i64; 2],
    cos: Vec3,
    sin: Vec3,
}

/// Coefficients in a fixed frequency order, so a seed names the same
/// continuum field on every grid that resolves it. Each component is scaled
/// to unit coefficient sum, which bounds it by one pointwise.
fn random_terms(modes: i64, seed: u64) -> Vec<Term> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::new();
    for m2 in 0..=modes {
        for m1 in -modes..=modes {
            if m2 == 0 && m1 <= 0 {
                continue;
            }
            let weight = 1.0 / (1.0 + (m1 * m1 + m2 * m2) as f64);
            let mut draw = || -> Vec3 {
                [
                    weight * rng.gen_range(-1.0..1.0),
                    weight * rng.gen_range(-1.0..1.0),
                    weight * rng.gen_range(-1.0..1.0),
                ]
            };
            let cos = draw();
            let sin = draw();
            terms.push(Term { m: [m1, m2], cos, sin });
        }
    }
    for c in 0..3 {
        let total: f64 = terms.iter().map(|t| t.cos[c].abs() + t.sin[c].abs()).sum();
        if total > 0.0 {
            for t in &mut terms {
                t.cos[c] /= total;
                t.sin[c] /= total;
            }
        }
    }
    terms
}

/// Centre of the grid, the default bubble location.
pub fn grid_center(grid: &GridSpec) -> [f64; 2] {
    [0.5 * grid.length(), 0.5 * grid.length()]
}

/// Reference scale of the bubble used by the scenario suite, `L/16`.
pub fn default_bubble_scale(grid: &GridSpec) -> f64 {
    grid.length() / 16.0
}
