//! Periodic grids and the real-valued fields that live on them.
//!
//! The plane is discretized as an `N x N` torus of side `L`. Nodes are stored
//! row-major with the `x1` index running fastest, so node `(i1, i2)` lives at
//! `i2 * N + i1`. Vector fields keep their three components contiguous per
//! node. Derivatives in the `x3` direction are identically zero.

use std::f64::consts::PI;
use std::ops::{Add, Index, Mul, Sub};

use crate::error::{invalid, Error, Result};

/// Construction-time tolerance on `| |n| - 1 |` for [`DirectorField`].
pub const UNIT_TOLERANCE: f64 = 1e-12;

/// Smallest vector length `normalize` accepts.
pub const NORMALIZE_FLOOR: f64 = 1e-8;

pub type Vec3 = [f64; 3];

#[inline]
pub fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross3(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm3(a: Vec3) -> f64 {
    dot3(a, a).sqrt()
}

#[inline]
pub fn scale3(s: f64, a: Vec3) -> Vec3 {
    [s * a[0], s * a[1], s * a[2]]
}

#[inline]
pub fn add3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Periodic `n_side x n_side` discretization of a square of side `length`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n_side: usize,
    length: f64,
}

impl GridSpec {
    pub fn new(n_side: usize, length: f64) -> Result<Self> {
        if n_side < 8 || n_side % 2 != 0 {
            return Err(invalid(format!(
                "n_side must be even and at least 8, got {n_side}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(invalid(format!("length must be positive, got {length}")));
        }
        Ok(Self { n_side, length })
    }

    #[inline]
    pub fn n_side(&self) -> usize {
        self.n_side
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.length
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.length / self.n_side as f64
    }

    /// Quadrature weight `dx^2` of one node.
    #[inline]
    pub fn cell_area(&self) -> f64 {
        let dx = self.spacing();
        dx * dx
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_side * self.n_side
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Fundamental wavenumber `2 pi / L`.
    #[inline]
    pub fn k0(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Largest axis wavenumber magnitude, `pi N / L` (the Nyquist frequency).
    #[inline]
    pub fn k_max(&self) -> f64 {
        self.k0() * (self.n_side / 2) as f64
    }

    /// Largest wavenumber magnitude on the lattice (a corner of the box).
    #[inline]
    pub fn k_lattice_max(&self) -> f64 {
        self.k_max() * std::f64::consts::SQRT_2
    }

    /// Signed integer frequency of FFT bin `m`, in `-N/2 .. N/2 - 1`.
    #[inline]
    pub fn frequency(&self, m: usize) -> i64 {
        let n = self.n_side as i64;
        let m = m as i64;
        if m < n / 2 {
            m
        } else {
            m - n
        }
    }

    /// Physical wavenumber of FFT bin `m` (Nyquist bin included, negative).
    #[inline]
    pub fn wavenumber(&self, m: usize) -> f64 {
        self.k0() * self.frequency(m) as f64
    }

    /// Derivative symbol wavenumber: like [`Self::wavenumber`] but the
    /// Nyquist bin is zeroed.
    #[inline]
    pub fn derivative_wavenumber(&self, m: usize) -> f64 {
        if m == self.n_side / 2 {
            0.0
        } else {
            self.wavenumber(m)
        }
    }

    /// Physical coordinates of node `idx`.
    #[inline]
    pub fn position(&self, idx: usize) -> [f64; 2] {
        let dx = self.spacing();
        [(idx % self.n_side) as f64 * dx, (idx / self.n_side) as f64 * dx]
    }

    #[inline]
    pub fn index(&self, i1: usize, i2: usize) -> usize {
        i2 * self.n_side + i1
    }

    /// Minimal-image displacement `y - x` on the torus.
    #[inline]
    pub fn torus_displacement(&self, x: [f64; 2], y: [f64; 2]) -> [f64; 2] {
        let l = self.length;
        let wrap = |d: f64| d - l * (d / l).round();
        [wrap(y[0] - x[0]), wrap(y[1] - x[1])]
    }

    #[inline]
    pub fn torus_distance(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        let d = self.torus_displacement(x, y);
        d[0].hypot(d[1])
    }

    pub(crate) fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(invalid(format!(
                "grid mismatch: {}x{} (L={}) vs {}x{} (L={})",
                self.n_side, self.n_side, self.length, other.n_side, other.n_side, other.length
            )));
        }
        Ok(())
    }
}

/// Real scalar field on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `dx^2 * sum f`.
    pub fn integral(&self) -> f64 {
        self.grid.cell_area() * self.values.iter().sum::<f64>()
    }

    /// `dx^2 * sum f^2`.
    pub fn norm_l2_sq(&self) -> f64 {
        self.grid.cell_area() * self.values.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Multiply a scalar field into a vector field node by node.
    pub fn times(&self, v: &VectorField3) -> VectorField3 {
        debug_assert_eq!(self.grid, *v.grid());
        VectorField3 {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(v.values())
                .map(|(&s, &x)| scale3(s, x))
                .collect(),
        }
    }
}

impl Index<usize> for ScalarField {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Real 3-vector field on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField3 {
    grid: GridSpec,
    values: Vec<Vec3>,
}

impl VectorField3 {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![[0.0; 3]; grid.len()],
        }
    }

    pub fn constant(grid: GridSpec, v: Vec3) -> Self {
        Self {
            grid,
            values: vec![v; grid.len()],
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<Vec3>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "expected {} nodes, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values
            .iter()
            .position(|v| !v.iter().all(|c| c.is_finite()))
        {
            return Err(invalid(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    /// Like [`Self::from_values`] without the finiteness scan. Used on
    /// solver-internal buffers where blow-up is detected separately.
    pub(crate) fn from_raw(grid: GridSpec, values: Vec<Vec3>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 2]) -> Vec3) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [Vec3] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Vec3> {
        self.values
    }

    pub fn component(&self, c: usize) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|v| v[c]).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|c| c.is_finite()))
    }

    /// Pointwise `|f|`.
    pub fn magnitude(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| norm3(v)).collect(),
        }
    }

    /// Largest `| |f(x)| - 1 |` over the grid.
    pub fn unit_deviation(&self) -> f64 {
        self.values
            .iter()
            .fold(0.0, |m, &v| m.max((norm3(v) - 1.0).abs()))
    }

    /// `dx^2 * sum |f|^2`.
    pub fn norm_l2_sq(&self) -> f64 {
        self.grid.cell_area() * self.values.iter().map(|&v| dot3(v, v)).sum::<f64>()
    }

    pub fn norm_l2(&self) -> f64 {
        self.norm_l2_sq().sqrt()
    }

    /// `(dx^2 * sum |f|^p)^(1/p)` for finite `p`.
    pub fn norm_lp(&self, p: f64) -> f64 {
        let s: f64 = self.values.iter().map(|&v| norm3(v).powf(p)).sum();
        (self.grid.cell_area() * s).powf(1.0 / p)
    }

    /// `max |f(x)|`.
    pub fn norm_sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &v| m.max(norm3(v)))
    }

    /// Largest absolute entry over all components.
    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0, |m, c| m.max(c.abs()))
    }

    /// `dx^2 * sum a . b`.
    pub fn inner(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.grid.cell_area()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| dot3(a, b))
                .sum::<f64>()
    }

    pub fn map(&self, f: impl Fn(Vec3) -> Vec3) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(Vec3, Vec3) -> Vec3) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| scale3(s, v))
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Self) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            a[0] += s * b[0];
            a[1] += s * b[1];
            a[2] += s * b[2];
        }
    }

    /// Grid-wise mean of each component.
    pub fn mean(&self) -> Vec3 {
        let mut m = [0.0; 3];
        for v in &self.values {
            m = add3(m, *v);
        }
        scale3(1.0 / self.values.len() as f64, m)
    }
}

impl Index<usize> for VectorField3 {
    type Output = Vec3;
    fn index(&self, i: usize) -> &Vec3 {
        &self.values[i]
    }
}

impl Add for &VectorField3 {
    type Output = VectorField3;
    fn add(self, rhs: &VectorField3) -> VectorField3 {
        self.zip_map(rhs, add3)
    }
}

impl Sub for &VectorField3 {
    type Output = VectorField3;
    fn sub(self, rhs: &VectorField3) -> VectorField3 {
        self.zip_map(rhs, sub3)
    }
}

impl Mul<&VectorField3> for f64 {
    type Output = VectorField3;
    fn mul(self, rhs: &VectorField3) -> VectorField3 {
        rhs.scaled(self)
    }
}

/// A vector field with `|n(x)| = 1` at every node, to [`UNIT_TOLERANCE`].
#[derive(Debug, Clone, PartialEq)]
pub struct DirectorField(VectorField3);

impl DirectorField {
    /// Wrap a field that is already unit-norm.
    pub fn new(field: VectorField3) -> Result<Self> {
        Self::with_tolerance(field, UNIT_TOLERANCE)
    }

    pub fn with_tolerance(field: VectorField3, tolerance: f64) -> Result<Self> {
        if !field.is_finite() {
            return Err(invalid("director field has non-finite entries"));
        }
        let deviation = field.unit_deviation();
        if deviation > tolerance {
            return Err(Error::NonUnitField {
                deviation,
                tolerance,
            });
        }
        Ok(Self(field))
    }

    pub fn constant(grid: GridSpec, b: Vec3) -> Result<Self> {
        Self::new(VectorField3::constant(grid, b))
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        self.0.grid()
    }

    #[inline]
    pub fn as_field(&self) -> &VectorField3 {
        &self.0
    }

    #[inline]
    pub fn values(&self) -> &[Vec3] {
        self.0.values()
    }

    pub fn into_field(self) -> VectorField3 {
        self.0
    }
}

impl AsRef<VectorField3> for DirectorField {
    fn as_ref(&self) -> &VectorField3 {
        &self.0
    }
}

impl AsRef<VectorField3> for VectorField3 {
    fn as_ref(&self) -> &VectorField3 {
        self
    }
}

/// Pointwise `a . b`.
pub fn dot(a: &VectorField3, b: &VectorField3) -> Result<ScalarField> {
    a.grid().check_same(b.grid())?;
    Ok(ScalarField {
        grid: *a.grid(),
        values: a
            .values()
            .iter()
            .zip(b.values())
            .map(|(&x, &y)| dot3(x, y))
            .collect(),
    })
}

/// Pointwise `a x b`.
pub fn cross(a: &VectorField3, b: &VectorField3) -> Result<VectorField3> {
    a.grid().check_same(b.grid())?;
    Ok(a.zip_map(b, cross3))
}

/// Project every node onto the unit sphere.
pub fn normalize(f: &VectorField3) -> Result<DirectorField> {
    let mut values = Vec::with_capacity(f.values().len());
    for (node, &v) in f.values().iter().enumerate() {
        let norm = norm3(v);
        if !(norm >= NORMALIZE_FLOOR) {
            return Err(Error::DegenerateField { node, norm });
        }
        // Leave already-unit nodes untouched so normalization is idempotent
        // bit for bit.
        if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
            values.push(v);
        } else {
            values.push(scale3(1.0 / norm, v));
        }
    }
    Ok(DirectorField(VectorField3 {
        grid: *f.grid(),
        values,
    }))
}
