//! Fourier transforms on the periodic grid and the differential operators
//! realized as Fourier multipliers.
//!
//! The forward transform is unnormalized, `F(k) = sum_x f(x) exp(-i k.x)`; the
//! inverse carries the `1/N^2`. Derivative symbols zero the Nyquist bin so
//! that derivatives of real fields stay real.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};
use crate::grid::{GridSpec, ScalarField, VectorField3};
use crate::profile;

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut cache = cache.lock().unwrap_or_else(|e| e.into_inner());
    cache
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// In-place 2-D transform of one or more consecutive `n x n` planes.
fn fft2_planes(buf: &mut [Complex64], n: usize, inverse: bool) {
    let plans = plans(n);
    let fft = if inverse { &plans.inverse } else { &plans.forward };
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(buf, &mut scratch);
    for plane in buf.chunks_exact_mut(n * n) {
        transpose(plane, n);
    }
    fft.process_with_scratch(buf, &mut scratch);
    for plane in buf.chunks_exact_mut(n * n) {
        transpose(plane, n);
    }
}

/// Wavenumbers of one lattice mode.
#[derive(Debug, Clone, Copy)]
pub struct Mode {
    /// Full physical wavenumber (Nyquist bin kept, negative).
    pub k: [f64; 2],
    /// Derivative symbol wavenumber (Nyquist bin zeroed).
    pub d: [f64; 2],
}

impl Mode {
    #[inline]
    pub fn norm(&self) -> f64 {
        self.k[0].hypot(self.k[1])
    }
}

fn modes(grid: &GridSpec) -> impl Iterator<Item = Mode> + '_ {
    let n = grid.n_side();
    (0..n * n).map(move |idx| {
        let (m1, m2) = (idx % n, idx / n);
        Mode {
            k: [grid.wavenumber(m1), grid.wavenumber(m2)],
            d: [grid.derivative_wavenumber(m1), grid.derivative_wavenumber(m2)],
        }
    })
}

/// Complex Fourier coefficients of a 3-component field, stored as three
/// `N x N` planes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); 3 * grid.len()],
        }
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Plane of component `c`.
    #[inline]
    pub fn component(&self, c: usize) -> &[Complex64] {
        let len = self.grid.len();
        &self.coeffs[c * len..(c + 1) * len]
    }

    #[inline]
    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let len = self.grid.len();
        &mut self.coeffs[c * len..(c + 1) * len]
    }

    /// Coefficient of component `c` at FFT bins `(m1, m2)`.
    #[inline]
    pub fn coefficient(&self, c: usize, m1: usize, m2: usize) -> Complex64 {
        self.component(c)[self.grid.index(m1, m2)]
    }

    /// `sum_k |F(k)|^2 / N^2`, equal to `sum_x |f(x)|^2` by Parseval.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.grid.len() as f64
    }

    /// Apply a per-mode map to the three components of every mode.
    pub fn map_modes(&self, f: impl Fn(Mode, [Complex64; 3]) -> [Complex64; 3]) -> Self {
        let len = self.grid.len();
        let mut out = Self::zeros(self.grid);
        for (idx, mode) in modes(&self.grid).enumerate() {
            let v = [
                self.coeffs[idx],
                self.coeffs[len + idx],
                self.coeffs[2 * len + idx],
            ];
            let w = f(mode, v);
            out.coeffs[idx] = w[0];
            out.coeffs[len + idx] = w[1];
            out.coeffs[2 * len + idx] = w[2];
        }
        out
    }

    /// Multiply every component by a real scalar symbol.
    pub fn multiply(&self, symbol: impl Fn(Mode) -> f64) -> Self {
        self.map_modes(|m, v| {
            let s = symbol(m);
            [v[0] * s, v[1] * s, v[2] * s]
        })
    }

    /// Multiply by the radial symbol `m(|k|)`.
    pub fn radial(&self, symbol: impl Fn(f64) -> f64) -> Self {
        self.multiply(|m| symbol(m.norm()))
    }

    /// `d/dx_axis` with `axis` in `{0, 1}`.
    pub fn derivative(&self, axis: usize) -> Self {
        self.map_modes(|m, v| {
            let ik = Complex64::new(0.0, m.d[axis]);
            [ik * v[0], ik * v[1], ik * v[2]]
        })
    }

    pub fn laplacian(&self) -> Self {
        self.multiply(|m| -(m.d[0] * m.d[0] + m.d[1] * m.d[1]))
    }

    /// Planar curl: `(d2 f3, -d1 f3, d1 f2 - d2 f1)`.
    pub fn curl(&self) -> Self {
        self.map_modes(|m, v| {
            let i1 = Complex64::new(0.0, m.d[0]);
            let i2 = Complex64::new(0.0, m.d[1]);
            [i2 * v[2], -i1 * v[2], i1 * v[1] - i2 * v[0]]
        })
    }

    /// `grad div f` (third component is zero).
    pub fn grad_div(&self) -> Self {
        self.map_modes(|m, v| {
            let i1 = Complex64::new(0.0, m.d[0]);
            let i2 = Complex64::new(0.0, m.d[1]);
            let div = i1 * v[0] + i2 * v[1];
            [i1 * div, i2 * div, Complex64::new(0.0, 0.0)]
        })
    }

    pub fn curl_curl(&self) -> Self {
        self.curl().curl()
    }

    /// Divergence `d1 f1 + d2 f2` as scalar coefficients.
    pub fn divergence(&self) -> Vec<Complex64> {
        let len = self.grid.len();
        modes(&self.grid)
            .enumerate()
            .map(|(idx, m)| {
                Complex64::new(0.0, m.d[0]) * self.coeffs[idx]
                    + Complex64::new(0.0, m.d[1]) * self.coeffs[len + idx]
            })
            .collect()
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Self) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * s;
        }
    }

    /// Largest coefficient modulus among modes with `|k| > radius`.
    pub fn max_beyond(&self, radius: f64) -> f64 {
        let len = self.grid.len();
        let mut best = 0.0f64;
        for (idx, m) in modes(&self.grid).enumerate() {
            if m.norm() > radius {
                for c in 0..3 {
                    best = best.max(self.coeffs[c * len + idx].norm());
                }
            }
        }
        best
    }

    /// Largest coefficient modulus over all modes.
    pub fn max_modulus(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Largest violation of `F(-k) = conj(F(k))`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.n_side();
        let mut worst = 0.0f64;
        for c in 0..3 {
            let plane = self.component(c);
            for m2 in 0..n {
                for m1 in 0..n {
                    let a = plane[m2 * n + m1];
                    let b = plane[((n - m2) % n) * n + (n - m1) % n];
                    worst = worst.max((a - b.conj()).norm());
                }
            }
        }
        worst
    }
}

/// Index of the mode `-k` for the bin at `idx`.
#[inline]
fn mirror(idx: usize, n: usize) -> usize {
    let (m1, m2) = (idx % n, idx / n);
    ((n - m2) % n) * n + (n - m1) % n
}

/// Forward transform of a real 3-component field. The first two components
/// share one complex transform and are separated by Hermitian symmetry.
pub fn forward_transform(f: &VectorField3) -> SpectralField {
    let grid = *f.grid();
    let n = grid.n_side();
    let len = grid.len();
    let mut buf = vec![Complex64::new(0.0, 0.0); 2 * len];
    for (idx, v) in f.values().iter().enumerate() {
        buf[idx] = Complex64::new(v[0], v[1]);
        buf[len + idx] = Complex64::new(v[2], 0.0);
    }
    fft2_planes(&mut buf, n, false);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); 3 * len];
    for idx in 0..len {
        let z = buf[idx];
        let zc = buf[mirror(idx, n)].conj();
        coeffs[idx] = 0.5 * (z + zc);
        coeffs[len + idx] = Complex64::new(0.0, -0.5) * (z - zc);
    }
    coeffs[2 * len..].copy_from_slice(&buf[len..]);
    SpectralField { grid, coeffs }
}

/// Inverse transform; the imaginary part (round-off for Hermitian input) is
/// discarded. Only the Hermitian part of each component contributes to the
/// real part, so the first two components are symmetrized and share one
/// complex transform.
pub fn inverse_transform(s: &SpectralField) -> VectorField3 {
    let grid = s.grid;
    let n = grid.n_side();
    let len = grid.len();
    let mut buf = vec![Complex64::new(0.0, 0.0); 2 * len];
    let (a, rest) = s.coeffs.split_at(len);
    let (b, c) = rest.split_at(len);
    for idx in 0..len {
        let m = mirror(idx, n);
        let ah = 0.5 * (a[idx] + a[m].conj());
        let bh = 0.5 * (b[idx] + b[m].conj());
        buf[idx] = ah + Complex64::new(0.0, 1.0) * bh;
    }
    buf[len..].copy_from_slice(c);
    fft2_planes(&mut buf, n, true);
    let scale = 1.0 / len as f64;
    let values = (0..len)
        .map(|i| [buf[i].re * scale, buf[i].im * scale, buf[len + i].re * scale])
        .collect();
    VectorField3::from_raw(grid, values)
}

/// Inverse transform checked against a target grid.
pub fn inverse_transform_on(s: &SpectralField, grid: &GridSpec) -> Result<VectorField3> {
    s.grid.check_same(grid)?;
    Ok(inverse_transform(s))
}

pub(crate) fn inverse_scalar(mut buf: Vec<Complex64>, grid: &GridSpec) -> Vec<f64> {
    fft2_planes(&mut buf, grid.n_side(), true);
    let scale = 1.0 / grid.len() as f64;
    buf.iter().map(|c| c.re * scale).collect()
}

/// Spatial axis of a planar derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X1,
    X2,
}

impl Axis {
    #[inline]
    pub fn index(self) -> usize {
        match self {
            Axis::X1 => 0,
            Axis::X2 => 1,
        }
    }
}

impl TryFrom<usize> for Axis {
    type Error = crate::error::Error;

    /// Axes are numbered 1 and 2.
    fn try_from(axis: usize) -> Result<Self> {
        match axis {
            1 => Ok(Axis::X1),
            2 => Ok(Axis::X2),
            _ => Err(invalid(format!(
                "axis must be 1 or 2 (x3-derivatives vanish), got {axis}"
            ))),
        }
    }
}

/// `d f / d x_axis` with `axis` in `{1, 2}`.
pub fn spectral_derivative(f: &VectorField3, axis: usize) -> Result<VectorField3> {
    let axis = Axis::try_from(axis)?;
    Ok(inverse_transform(
        &forward_transform(f).derivative(axis.index()),
    ))
}

/// First and second order differential quantities of a field.
#[derive(Debug, Clone)]
pub struct VectorCalculus {
    /// `gradient[i] = d f / d x_{i+1}`.
    pub gradient: [VectorField3; 2],
    pub divergence: ScalarField,
    pub curl: VectorField3,
    pub laplacian: VectorField3,
    pub grad_div: VectorField3,
    pub curl_curl: VectorField3,
}

pub fn vector_calculus(f: &VectorField3) -> VectorCalculus {
    let grid = *f.grid();
    let s = forward_transform(f);
    VectorCalculus {
        gradient: [
            inverse_transform(&s.derivative(0)),
            inverse_transform(&s.derivative(1)),
        ],
        divergence: ScalarField::from_values(grid, inverse_scalar(s.divergence(), &grid))
            .expect("grid-sized buffer"),
        curl: inverse_transform(&s.curl()),
        laplacian: inverse_transform(&s.laplacian()),
        grad_div: inverse_transform(&s.grad_div()),
        curl_curl: inverse_transform(&s.curl_curl()),
    }
}

/// The mollifier `J f = F^-1( m(|k| / cutoff) F f )`: modes with
/// `|k| <= cutoff` pass unchanged, modes with `|k| >= 2 cutoff` are removed.
/// A larger cutoff mollifies less.
pub fn low_pass_filter(f: &VectorField3, cutoff: f64) -> Result<VectorField3> {
    check_cutoff(cutoff)?;
    Ok(inverse_transform(&low_pass_spectral(
        &forward_transform(f),
        cutoff,
    )))
}

pub(crate) fn check_cutoff(cutoff: f64) -> Result<()> {
    if !(cutoff.is_finite() && cutoff > 0.0) {
        return Err(invalid(format!("cutoff must be positive, got {cutoff}")));
    }
    Ok(())
}

pub(crate) fn low_pass_spectral(s: &SpectralField, cutoff: f64) -> SpectralField {
    s.radial(|k| profile::mollifier(k / cutoff))
}

/// Relative spectral tail: the largest coefficient beyond `fraction * k_max`
/// divided by the largest coefficient overall.
pub fn spectral_tail(f: &VectorField3, fraction: f64) -> f64 {
    let s = forward_transform(f);
    let peak = s.max_modulus();
    if peak == 0.0 {
        return 0.0;
    }
    s.max_beyond(fraction * f.grid().k_max()) / peak
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_band_limited(grid: GridSpec, kmax: i64, seed: u64) -> VectorField3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut terms = Vec::new();
        for _ in 0..12 {
            let k = [rng.gen_range(-kmax..=kmax), rng.gen_range(-kmax..=kmax)];
            let amp: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let phase: f64 = rng.gen_range(0.0..2.0 * PI);
            terms.push((k, amp, phase));
        }
        let k0 = grid.k0();
        VectorField3::from_fn(grid, |x| {
            let mut v = [0.0; 3];
            for (k, amp, ph) in &terms {
                let arg = k0 * (k[0] as f64 * x[0] + k[1] as f64 * x[1]) + ph;
                for c in 0..3 {
                    v[c] += amp[c] * arg.cos();
                }
            }
            v
        })
    }

    fn rel_l2(a: &VectorField3, b: &VectorField3) -> f64 {
        (a - b).norm_l2() / b.norm_l2().max(1e-300)
    }

    #[test]
    fn constant_field_is_pure_mean_mode() {
        let g = GridSpec::new(8, 2.0 * PI).unwrap();
        let s = forward_transform(&VectorField3::constant(g, [0.0, 0.0, 1.0]));
        assert!((s.coefficient(2, 0, 0).re - 64.0).abs() < 1e-12);
        let rest: f64 = s.component(2)[1..].iter().map(|c| c.norm()).sum();
        assert!(rest < 1e-12);
        assert!(s.component(0).iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn sine_has_two_modes_matching_direct_dft() {
        // Direct DFT summation oracle at N = 8.
        let n = 8;
        let l = 3.0;
        let g = GridSpec::new(n, l).unwrap();
        let f = VectorField3::from_fn(g, |x| [(2.0 * PI * x[0] / l).sin(), 0.0, 0.0]);
        let s = forward_transform(&f);
        for m2 in 0..n {
            for m1 in 0..n {
                let mut direct = Complex64::new(0.0, 0.0);
                for i2 in 0..n {
                    for i1 in 0..n {
                        let v = f[g.index(i1, i2)][0];
                        let arg = -2.0 * PI * ((m1 * i1 + m2 * i2) as f64) / n as f64;
                        direct += Complex64::from_polar(v, arg);
                    }
                }
                let got = s.coefficient(0, m1, m2);
                assert!((got - direct).norm() < 1e-11);
                let expected = if m2 == 0 && (m1 == 1 || m1 == n - 1) {
                    (n * n) as f64 / 2.0
                } else {
                    0.0
                };
                assert!((got.norm() - expected).abs() < 1e-11, "{m1} {m2}");
            }
        }
    }

    #[test]
    fn roundtrip_and_parseval() {
        let g = GridSpec::new(32, 2.0 * PI).unwrap();
        for seed in 0..100 {
            let f = random_band_limited(g, 10, seed);
            let s = forward_transform(&f);
            assert!(s.hermitian_defect() < 1e-9 * s.max_modulus());
            let back = inverse_transform(&s);
            assert!(rel_l2(&back, &f) < 1e-12);
            let phys: f64 = f.values().iter().map(|v| v.iter().map(|c| c * c).sum::<f64>()).sum();
            assert!((s.energy() - phys).abs() <= 1e-12 * phys);
        }
    }

    #[test]
    fn derivative_of_sine() {
        let l = 2.5;
        let g = GridSpec::new(32, l).unwrap();
        let k = 2.0 * PI / l;
        let f = VectorField3::from_fn(g, |x| [(k * x[0]).sin(), 0.0, 2.0]);
        let d1 = spectral_derivative(&f, 1).unwrap();
        let d2 = spectral_derivative(&f, 2).unwrap();
        for (i, v) in d1.values().iter().enumerate() {
            let x = g.position(i);
            assert!((v[0] - k * (k * x[0]).cos()).abs() < 1e-10);
            assert_eq!(v[2], 0.0);
        }
        assert!(d2.max_abs() < 1e-12);
        assert!(spectral_derivative(&f, 0).is_err());
        assert!(spectral_derivative(&f, 3).is_err());
    }

    #[test]
    fn derivative_of_constant_is_exactly_zero() {
        let g = GridSpec::new(16, 1.0).unwrap();
        let f = VectorField3::constant(g, [0.3, -0.2, 0.9]);
        assert_eq!(spectral_derivative(&f, 1).unwrap().max_abs(), 0.0);
        let vc = vector_calculus(&f);
        assert_eq!(vc.curl.max_abs(), 0.0);
    }

    #[test]
    fn divergence_of_planar_rotation_field() {
        // n = (cos t, sin t, 0), t = sin(2 pi x1 / L): div n = -sin t * dt/dx1.
        let l = 2.0 * PI;
        let g = GridSpec::new(64, l).unwrap();
        let theta = |x: [f64; 2]| (2.0 * PI * x[0] / l).sin();
        let f = VectorField3::from_fn(g, |x| [theta(x).cos(), theta(x).sin(), 0.0]);
        let vc = vector_calculus(&f);
        for i in 0..g.len() {
            let x = g.position(i);
            let dt = 2.0 * PI / l * (2.0 * PI * x[0] / l).cos();
            let expected = -theta(x).sin() * dt;
            assert!((vc.divergence[i] - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn laplacian_splits_into_grad_div_minus_curl_curl() {
        let g = GridSpec::new(32, 2.0 * PI).unwrap();
        for seed in 0..10 {
            let f = random_band_limited(g, 12, 100 + seed);
            let vc = vector_calculus(&f);
            let rhs = &vc.grad_div - &vc.curl_curl;
            assert!(rel_l2(&rhs, &vc.laplacian) < 1e-10);
        }
    }

    #[test]
    fn derivative_commutes_with_mollifier() {
        let g = GridSpec::new(32, 2.0 * PI).unwrap();
        let f = random_band_limited(g, 15, 7);
        let a = spectral_derivative(&low_pass_filter(&f, 5.0).unwrap(), 1).unwrap();
        let b = low_pass_filter(&spectral_derivative(&f, 1).unwrap(), 5.0).unwrap();
        assert!((&a - &b).max_abs() < 1e-12 * f.max_abs().max(1.0) * 16.0);
    }

    #[test]
    fn low_pass_limits() {
        let g = GridSpec::new(32, 2.0 * PI).unwrap();
        let f = random_band_limited(g, 15, 11);
        assert!(low_pass_filter(&f, 0.0).is_err());
        assert!(low_pass_filter(&f, -1.0).is_err());
        let all = low_pass_filter(&f, 2.0 * g.k_max()).unwrap();
        assert!(rel_l2(&all, &f) < 1e-12);
        // Only the mean survives when 2 * cutoff is below the first mode.
        let mean = low_pass_filter(&f, 0.4 * g.k0()).unwrap();
        let m = f.mean();
        for v in mean.values() {
            for c in 0..3 {
                assert!((v[c] - m[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn low_pass_attenuates_plane_wave_by_profile() {
        let g = GridSpec::new(32, 2.0 * PI).unwrap();
        let cutoff = 4.0;
        // |k| = 6 = 1.5 * cutoff
        let f = VectorField3::from_fn(g, |x| [(6.0 * x[0]).cos(), 0.0, 0.0]);
        let out = low_pass_filter(&f, cutoff).unwrap();
        let factor = profile::mollifier(1.5);
        assert!(factor > 0.0 && factor < 1.0);
        assert!(rel_l2(&out, &f.scaled(factor)) < 1e-12);
    }

    #[test]
    fn low_pass_idempotent_below_cutoff() {
        let g = GridSpec::new(32, 2.0 * PI).unwrap();
        let f = random_band_limited(g, 3, 5);
        let out = low_pass_filter(&f, 6.0).unwrap();
        assert!(rel_l2(&out, &f) < 1e-12);
    }
}
