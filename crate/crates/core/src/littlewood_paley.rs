//! Dyadic frequency decomposition on the Fourier lattice, Besov norms, the
//! weak Oseen-Frank metric and measured Bernstein constants.
//!
//! Frequencies are physical wavenumbers `k0 m`, so on a box of side `2 pi`
//! the lattice frequencies are the integer vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::grid::{cross3, dot3, DirectorField, GridSpec, Vec3, VectorField3};
use crate::oseen_frank::FrankConstants;
use crate::profile::{chi, phi};
use crate::spectral::{forward_transform, inverse_transform, SpectralField};

/// `chi` and the dilates `phi(2^-j .)`, `j = 0..=j_max`, on one grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicPartition {
    grid: GridSpec,
    j_max: i32,
}

pub const J_MIN: i32 = -1;

/// Partition for `grid`, with `j_max` the largest `j` such that
/// `2^j 3/4` does not exceed the largest lattice wavenumber. The top block
/// then reaches past every lattice frequency.
pub fn build_partition(grid: GridSpec) -> Result<DyadicPartition> {
    let top = grid.k_lattice_max();
    let j_max = (top * 4.0 / 3.0).log2().floor() as i32;
    if j_max < 1 {
        return Err(invalid(format!(
            "grid resolves wavenumbers up to {top}, too few for two dyadic blocks"
        )));
    }
    Ok(DyadicPartition { grid, j_max })
}

impl DyadicPartition {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    /// Block indices `-1..=j_max`.
    pub fn indices(&self) -> impl Iterator<Item = i32> {
        J_MIN..=self.j_max
    }

    /// Symbol of `Delta_j` at wavenumber magnitude `r`.
    pub fn symbol(&self, j: i32, r: f64) -> f64 {
        if j < 0 {
            chi(r)
        } else {
            phi(r * 0.5f64.powi(j))
        }
    }

    /// Symbol of `S_j = chi(2^-j D)`.
    pub fn low_symbol(&self, j: i32, r: f64) -> f64 {
        chi(r * 0.5f64.powi(j))
    }

    /// `max |1 - sum_j symbol_j|` over every lattice frequency.
    pub fn unity_residual(&self) -> f64 {
        let n = self.grid.n_side();
        let mut worst: f64 = 0.0;
        for m2 in 0..n {
            for m1 in 0..n {
                let r = self.grid.wavenumber(m1).hypot(self.grid.wavenumber(m2));
                let s: f64 = self.indices().map(|j| self.symbol(j, r)).sum();
                worst = worst.max((1.0 - s).abs());
            }
        }
        worst
    }

    fn check(&self, f: &VectorField3) -> Result<()> {
        self.grid.check_same(f.grid())
    }

    fn apply(&self, j: i32, s: &SpectralField) -> VectorField3 {
        inverse_transform(&s.radial(|r| self.symbol(j, r)))
    }

    /// `Delta_j f`.
    pub fn block(&self, f: &VectorField3, j: i32) -> Result<VectorField3> {
        self.check(f)?;
        if !(J_MIN..=self.j_max).contains(&j) {
            return Err(invalid(format!("block {j} outside -1..={}", self.j_max)));
        }
        Ok(self.apply(j, &forward_transform(f)))
    }
}

/// `Delta_j f` for `j = -1..=j_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSet {
    pub blocks: Vec<VectorField3>,
}

impl BlockSet {
    pub fn j_max(&self) -> i32 {
        self.blocks.len() as i32 - 2
    }

    pub fn block(&self, j: i32) -> &VectorField3 {
        &self.blocks[(j + 1) as usize]
    }

    /// `S_j f = sum_{-1 <= k <= j-1} Delta_k f`.
    pub fn partial_sum(&self, j: i32) -> VectorField3 {
        let mut out = VectorField3::zeros(*self.blocks[0].grid());
        for k in J_MIN..j.min(self.j_max() + 1) {
            out.axpy(1.0, self.block(k));
        }
        out
    }

    pub fn reconstruct(&self) -> VectorField3 {
        self.partial_sum(self.j_max() + 1)
    }

    /// `||Delta_j f||_2^2` per block.
    pub fn energies(&self) -> Vec<(i32, f64)> {
        self.blocks
            .iter()
            .enumerate()
            .map(|(i, b)| (i as i32 - 1, b.norm_l2_sq()))
            .collect()
    }
}

pub fn decompose(f: &VectorField3, p: &DyadicPartition) -> Result<BlockSet> {
    p.check(f)?;
    let s = forward_transform(f);
    let blocks = p.indices().collect::<Vec<_>>().into_par_iter().map(|j| p.apply(j, &s)).collect();
    Ok(BlockSet { blocks })
}

/// A Lebesgue exponent supported by the Besov norm.
fn lp_norm(f: &VectorField3, p: f64) -> Result<f64> {
    if p == 2.0 || p == 4.0 {
        Ok(f.norm_lp(p))
    } else if p == f64::INFINITY {
        Ok(f.norm_sup())
    } else {
        Err(invalid(format!("Lebesgue exponent {p} not in {{2, 4, inf}}")))
    }
}

/// `sup_j 2^(j s) ||Delta_j f||_p`, with `p` in `{2, 4, inf}` and `q = inf`.
pub fn besov_norm(f: &VectorField3, partition: &DyadicPartition, s: f64, p: f64, q: f64) -> Result<f64> {
    if q != f64::INFINITY {
        return Err(invalid(format!("only q = inf is supported, got {q}")));
    }
    lp_norm(f, p)?;
    if !(s > -2.0 && s < 2.0) {
        return Err(invalid(format!("smoothness {s} outside (-2, 2)")));
    }
    let blocks = decompose(f, partition)?;
    let mut best: f64 = 0.0;
    for j in partition.indices() {
        best = best.max(2f64.powf(j as f64 * s) * lp_norm(blocks.block(j), p)?);
    }
    Ok(best)
}

/// One measured Bernstein constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernsteinConstant {
    /// Derivative order `|alpha|`.
    pub order: u32,
    pub p: f64,
    pub q: f64,
    /// `false`: `||d^alpha f||_q / (R^(|alpha| + 2(1/p - 1/q)) ||f||_p)`.
    /// `true`: `R^|alpha| ||f||_p / sup_beta ||d^beta f||_p`.
    pub reverse: bool,
    pub constant: f64,
}

/// The `(order, p, q, reverse)` cases measured by [`bernstein_audit`].
pub const BERNSTEIN_CASES: [(u32, f64, f64, bool); 8] = [
    (0, 2.0, 2.0, false),
    (0, 4.0, 4.0, false),
    (0, 2.0, 4.0, false),
    (0, 2.0, f64::INFINITY, false),
    (1, 2.0, 2.0, false),
    (1, 4.0, 4.0, false),
    (1, 2.0, f64::INFINITY, false),
    (1, 2.0, 2.0, true),
];

pub const DEFAULT_BERNSTEIN_SEED: u64 = 0x0b3e_5731;

pub fn bernstein_audit(partition: &DyadicPartition, trials: usize) -> Result<Vec<BernsteinConstant>> {
    bernstein_audit_seeded(partition, trials, DEFAULT_BERNSTEIN_SEED)
}

/// Maximum ratio over `trials` seeded random fields, each confined to one
/// annular block `j >= 0` whose scale is `R = 2^j`.
pub fn bernstein_audit_seeded(
    partition: &DyadicPartition,
    trials: usize,
    seed: u64,
) -> Result<Vec<BernsteinConstant>> {
    if trials < 10 {
        return Err(invalid(format!("bernstein audit needs at least 10 trials, got {trials}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<(i32, u64)> = (0..trials)
        .map(|_| (rng.gen_range(0..=partition.j_max()), rng.gen()))
        .collect();
    let per_trial: Vec<Vec<f64>> = samples
        .into_par_iter()
        .map(|(j, s)| {
            let f = random_block_field(partition, j, s);
            let spec = forward_transform(&f);
            let d = [inverse_transform(&spec.derivative(0)), inverse_transform(&spec.derivative(1))];
            let r = 2f64.powi(j);
            BERNSTEIN_CASES
                .iter()
                .map(|&(order, p, q, reverse)| {
                    let np = lp_norm(&f, p).unwrap();
                    if reverse {
                        let sup = lp_norm(&d[0], p).unwrap().max(lp_norm(&d[1], p).unwrap());
                        return r * np / sup;
                    }
                    let scale = r.powf(order as f64 + 2.0 * (1.0 / p - 1.0 / q)) * np;
                    if order == 0 {
                        lp_norm(&f, q).unwrap() / scale
                    } else {
                        lp_norm(&d[0], q).unwrap().max(lp_norm(&d[1], q).unwrap()) / scale
                    }
                })
                .collect()
        })
        .collect();
    Ok(BERNSTEIN_CASES
        .iter()
        .enumerate()
        .map(|(i, &(order, p, q, reverse))| BernsteinConstant {
            order,
            p,
            q,
            reverse,
            constant: per_trial.iter().map(|t| t[i]).fold(0.0, f64::max),
        })
        .collect())
}

/// `Delta_j` applied to seeded white noise.
pub fn random_block_field(partition: &DyadicPartition, j: i32, seed: u64) -> VectorField3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = *partition.grid();
    let values = (0..grid.len())
        .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
        .collect();
    let noise = VectorField3::from_values(grid, values).expect("grid-sized buffer");
    partition.apply(j, &forward_transform(&noise))
}

/// Seeded white noise on the whole lattice.
pub fn random_field(grid: GridSpec, seed: u64) -> VectorField3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len())
        .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
        .collect();
    VectorField3::from_values(grid, values).expect("grid-sized buffer")
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockMetric {
    pub j: i32,
    /// `int W^j`, or `||Delta_{-1} dn||_2^2` for `j = -1`.
    pub integral: f64,
    /// `2^(-2 j s) int W^j` (unweighted for `j = -1`).
    pub weighted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakMetric {
    pub total: f64,
    pub per_block: Vec<BlockMetric>,
}

/// `sup_{j >= 0} 2^(-2 j s) int W^j + ||Delta_{-1} dn||_2^2` with
/// `dn = n1 - n2` and
/// `W^j = a|grad g|^2 + (k1-a)(div g)^2 + (k2-a)|n2 x curl g|^2 + (k3-a)(n2 . curl g)^2`,
/// `g = Delta_j dn`. The director `n2` weights the last two terms, so the
/// metric is not symmetric in its arguments.
pub fn weak_metric(
    n1: &DirectorField,
    n2: &DirectorField,
    partition: &DyadicPartition,
    k: &FrankConstants,
    s: f64,
) -> Result<WeakMetric> {
    weak_metric_fields(n1.as_field(), n2.as_field(), partition, k, s)
}

/// [`weak_metric`] for fields that need not be unit length, such as
/// mollified trajectories.
pub fn weak_metric_fields(
    n1: &VectorField3,
    n2: &VectorField3,
    partition: &DyadicPartition,
    k: &FrankConstants,
    s: f64,
) -> Result<WeakMetric> {
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid(format!("metric smoothness {s} outside (0, 1)")));
    }
    partition.check(n1)?;
    partition.check(n2)?;
    let a = k.a();
    let delta = n1 - n2;
    let spec = forward_transform(&delta);
    let cell = partition.grid.cell_area();
    let per_block: Vec<BlockMetric> = partition
        .indices()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|j| {
            let b = spec.radial(|r| partition.symbol(j, r));
            if j < 0 {
                let e = inverse_transform(&b).norm_l2_sq();
                return BlockMetric { j, integral: e, weighted: e };
            }
            let d1 = inverse_transform(&b.derivative(0));
            let d2 = inverse_transform(&b.derivative(1));
            let curl = inverse_transform(&b.curl());
            let mut sum = 0.0;
            for i in 0..d1.grid().len() {
                let (g1, g2, c, m): (Vec3, Vec3, Vec3, Vec3) = (d1[i], d2[i], curl[i], n2[i]);
                let grad = dot3(g1, g1) + dot3(g2, g2);
                let div = g1[0] + g2[1];
                let x = cross3(m, c);
                let dotc = dot3(m, c);
                sum += a * grad
                    + (k.k1 - a) * div * div
                    + (k.k2 - a) * dot3(x, x)
                    + (k.k3 - a) * dotc * dotc;
            }
            let integral = sum * cell;
            BlockMetric { j, integral, weighted: 2f64.powf(-2.0 * j as f64 * s) * integral }
        })
        .collect();
    let low = per_block[0].weighted;
    let high = per_block[1..].iter().map(|b| b.weighted).fold(0.0, f64::max);
    Ok(WeakMetric { total: high + low, per_block })
}
