//! Brute-force variational derivative of a finite-difference Oseen-Frank
//! energy, used as an independent check on the closed-form molecular field.
//!
//! The discrete energy is `E = dx^2 sum_x W(n(x), D1 n(x), D2 n(x))` with
//! central difference operators `D1`, `D2`. Perturbing one node changes the
//! density only at that node and at the nodes whose stencils reach it, so each
//! difference quotient re-evaluates a handful of densities instead of the whole
//! sum.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::grid::{DirectorField, GridSpec, Vec3, VectorField3};
use crate::oseen_frank::{check_unit, density_at, FrankConstants};

/// Default accuracy order of the difference operators.
pub const DEFAULT_ORDER: usize = 10;

pub const MIN_STEP: f64 = 1e-8;
pub const MAX_STEP: f64 = 1e-4;

/// Antisymmetric central-difference weights `w_j`, `j = 1..`, with
/// `D f_i = sum_j w_j (f_{i+j} - f_{i-j}) / dx`.
fn weights(order: usize) -> Result<&'static [f64]> {
    Ok(match order {
        2 => &[0.5],
        4 => &[2.0 / 3.0, -1.0 / 12.0],
        6 => &[0.75, -0.15, 1.0 / 60.0],
        8 => &[0.8, -0.2, 4.0 / 105.0, -1.0 / 280.0],
        10 => &[5.0 / 6.0, -5.0 / 21.0, 5.0 / 84.0, -5.0 / 504.0, 1.0 / 1260.0],
        _ => return Err(invalid(format!("difference order {order} not in {{2, 4, 6, 8, 10}}"))),
    })
}

fn shift(n: usize, i: usize, j: isize) -> usize {
    (i as isize + j).rem_euclid(n as isize) as usize
}

/// Central-difference first derivatives of `f` along both axes.
pub fn fd_gradient(f: &VectorField3, order: usize) -> Result<[VectorField3; 2]> {
    let w = weights(order)?;
    let grid = *f.grid();
    let n = grid.n_side();
    let inv = 1.0 / grid.spacing();
    let v = f.values();
    let mut d1 = vec![[0.0; 3]; grid.len()];
    let mut d2 = vec![[0.0; 3]; grid.len()];
    for i2 in 0..n {
        for i1 in 0..n {
            let idx = grid.index(i1, i2);
            let mut a = [0.0; 3];
            let mut b = [0.0; 3];
            for (j, &wj) in w.iter().enumerate() {
                let j = j as isize + 1;
                let p1 = v[grid.index(shift(n, i1, j), i2)];
                let m1 = v[grid.index(shift(n, i1, -j), i2)];
                let p2 = v[grid.index(i1, shift(n, i2, j))];
                let m2 = v[grid.index(i1, shift(n, i2, -j))];
                for c in 0..3 {
                    a[c] += wj * (p1[c] - m1[c]);
                    b[c] += wj * (p2[c] - m2[c]);
                }
            }
            d1[idx] = [a[0] * inv, a[1] * inv, a[2] * inv];
            d2[idx] = [b[0] * inv, b[1] * inv, b[2] * inv];
        }
    }
    Ok([VectorField3::from_values(grid, d1)?, VectorField3::from_values(grid, d2)?])
}

/// Total finite-difference energy.
pub fn fd_energy(f: &VectorField3, k: &FrankConstants, order: usize) -> Result<f64> {
    let [d1, d2] = fd_gradient(f, order)?;
    let sum: f64 = (0..f.grid().len())
        .map(|i| density_at(k, f[i], d1[i], d2[i]))
        .sum();
    Ok(sum * f.grid().cell_area())
}

/// `-dE/dn` by Richardson-extrapolated central differences in `step`, with
/// difference operators of [`DEFAULT_ORDER`].
pub fn variational_oracle(n: &DirectorField, k: &FrankConstants, step: f64) -> Result<VectorField3> {
    variational_oracle_with_order(n, k, step, DEFAULT_ORDER)
}

pub fn variational_oracle_with_order(
    n: &DirectorField,
    k: &FrankConstants,
    step: f64,
    order: usize,
) -> Result<VectorField3> {
    check_unit(n)?;
    if !(MIN_STEP..=MAX_STEP).contains(&step) {
        return Err(invalid(format!(
            "oracle step {step:e} outside [{MIN_STEP:e}, {MAX_STEP:e}]"
        )));
    }
    let w = weights(order)?;
    let field = n.as_field();
    let grid = *field.grid();
    let [d1, d2] = fd_gradient(field, order)?;
    let ctx = Context {
        grid,
        w,
        inv_dx: 1.0 / grid.spacing(),
        k: *k,
        n: field.values(),
        d1: d1.values(),
        d2: d2.values(),
    };
    let values: Vec<Vec3> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let mut out = [0.0; 3];
            for (l, o) in out.iter_mut().enumerate() {
                let coarse = ctx.quotient(idx, l, step);
                let fine = ctx.quotient(idx, l, 0.5 * step);
                *o = -(4.0 * fine - coarse) / 3.0;
            }
            out
        })
        .collect();
    VectorField3::from_values(grid, values)
}

struct Context<'a> {
    grid: GridSpec,
    w: &'static [f64],
    inv_dx: f64,
    k: FrankConstants,
    n: &'a [Vec3],
    d1: &'a [Vec3],
    d2: &'a [Vec3],
}

impl Context<'_> {
    /// `(E(n + s e_l 1_x) - E(n - s e_l 1_x)) / (2 s dx^2)`.
    fn quotient(&self, idx: usize, l: usize, s: f64) -> f64 {
        let n_side = self.grid.n_side();
        let (i1, i2) = (idx % n_side, idx / n_side);
        let density = |y: usize, dn: f64, dd1: f64, dd2: f64| {
            let mut nv = self.n[y];
            let mut a = self.d1[y];
            let mut b = self.d2[y];
            nv[l] += dn;
            a[l] += dd1;
            b[l] += dd2;
            density_at(&self.k, nv, a, b)
        };
        let mut total = density(idx, s, 0.0, 0.0) - density(idx, -s, 0.0, 0.0);
        for (j, &wj) in self.w.iter().enumerate() {
            let j = j as isize + 1;
            let c = wj * s * self.inv_dx;
            // Node y = x - j e_a sees n(x) with weight +w_j, y = x + j e_a with -w_j.
            let y = self.grid.index(shift(n_side, i1, -j), i2);
            total += density(y, 0.0, c, 0.0) - density(y, 0.0, -c, 0.0);
            let y = self.grid.index(shift(n_side, i1, j), i2);
            total += density(y, 0.0, -c, 0.0) - density(y, 0.0, c, 0.0);
            let y = self.grid.index(i1, shift(n_side, i2, -j));
            total += density(y, 0.0, 0.0, c) - density(y, 0.0, 0.0, -c);
            let y = self.grid.index(i1, shift(n_side, i2, j));
            total += density(y, 0.0, 0.0, -c) - density(y, 0.0, 0.0, c);
        }
        total / (2.0 * s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::normalize;
    use crate::testutil::random_unit_field;
    use std::f64::consts::PI;

    #[test]
    fn step_range_enforced() {
        let g = GridSpec::new(8, 1.0).unwrap();
        let n = DirectorField::constant(g, [0.0, 0.0, 1.0]).unwrap();
        let k = FrankConstants::isotropic(1.0).unwrap();
        assert!(variational_oracle(&n, &k, 1e-9).is_err());
        assert!(variational_oracle(&n, &k, 1e-3).is_err());
        assert!(variational_oracle_with_order(&n, &k, 1e-6, 3).is_err());
        assert!(variational_oracle(&n, &k, 1e-6).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn local_quotient_matches_full_energy_difference() {
        let grid = GridSpec::new(16, 2.0 * PI).unwrap();
        let n = random_unit_field(grid, 2, 0.6, 5);
        let k = FrankConstants::new(1.0, 2.0, 3.0, 0.7).unwrap();
        let s = 1e-4;
        for order in [2, 6, 10] {
            let oracle = variational_oracle_with_order(&n, &k, s, order).unwrap();
            for &(idx, l) in &[(0usize, 0usize), (37, 1), (200, 2)] {
                let full = |sign: f64, step: f64| {
                    let mut v = n.as_field().clone();
                    v.values_mut()[idx][l] += sign * step;
                    fd_energy(&v, &k, order).unwrap()
                };
                let q = |step: f64| (full(1.0, step) - full(-1.0, step)) / (2.0 * step * grid.cell_area());
                let direct = -(4.0 * q(0.5 * s) - q(s)) / 3.0;
                let scale = oracle.max_abs();
                assert!((oracle[idx][l] - direct).abs() <= 1e-6 * scale, "{order} {idx} {l}");
            }
        }
    }

    #[test]
    fn fd_gradient_of_plane_wave_converges() {
        let grid = GridSpec::new(32, 2.0 * PI).unwrap();
        let f = VectorField3::from_fn(grid, |x| [x[0].sin(), (2.0 * x[1]).cos(), 0.0]);
        let mut prev = f64::INFINITY;
        for order in [2, 4, 6, 8, 10] {
            let [d1, d2] = fd_gradient(&f, order).unwrap();
            let mut err: f64 = 0.0;
            for i in 0..grid.len() {
                let x = grid.position(i);
                err = err.max((d1[i][0] - x[0].cos()).abs());
                err = err.max((d2[i][1] + 2.0 * (2.0 * x[1]).sin()).abs());
            }
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-5, "{prev}");
    }

    #[test]
    fn k4_does_not_reach_oracle() {
        let grid = GridSpec::new(16, 2.0 * PI).unwrap();
        let n = random_unit_field(grid, 2, 0.6, 8);
        let a = variational_oracle(&n, &FrankConstants::new(1.0, 2.0, 3.0, 0.0).unwrap(), 1e-5).unwrap();
        let b = variational_oracle(&n, &FrankConstants::new(1.0, 2.0, 3.0, 4.0).unwrap(), 1e-5).unwrap();
        assert!((&a - &b).max_abs() <= 1e-7 * a.max_abs());
    }

    #[test]
    fn stripe_oracle_has_expected_symmetry() {
        // A field depending on x1 only has an oracle depending on x1 only.
        let grid = GridSpec::new(16, 2.0 * PI).unwrap();
        let f = VectorField3::from_fn(grid, |x| [0.3 * x[0].sin(), 0.2, 1.0]);
        let n = normalize(&f).unwrap();
        let o = variational_oracle(&n, &FrankConstants::new(1.0, 2.0, 3.0, 0.0).unwrap(), 1e-5).unwrap();
        for i1 in 0..16 {
            for i2 in 1..16 {
                for c in 0..3 {
                    let d = o[grid.index(i1, i2)][c] - o[grid.index(i1, 0)][c];
                    assert!(d.abs() <= 1e-8 * (1.0 + o.max_abs()));
                }
            }
        }
    }
}
