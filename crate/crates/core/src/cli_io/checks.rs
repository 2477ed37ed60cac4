//! Quick invariant suite behind `check-invariants`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::cli_io::records::{format_records, parse_records, FlagThresholds};
use crate::cli_io::snapshot::{decode, encode};
use crate::diagnostics::RecordSettings;
use crate::dynamics::{rhs, run, SolverConfig};
use crate::error::Result;
use crate::grid::{cross3, dot3, GridSpec};
use crate::initial::{build_initial, InitialDatum};
use crate::littlewood_paley::{build_partition, decompose, random_field, weak_metric};
use crate::oseen_frank::{
    molecular_field, positivity_check, wp_trace_identity, FrankConstants, GilbertParams,
};
use crate::spectral::{forward_transform, inverse_transform};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

fn outcome(name: &'static str, value: f64, tolerance: f64) -> CheckOutcome {
    // NaN must fail.
    let value = if value.is_nan() { f64::INFINITY } else { value };
    CheckOutcome { name, value, tolerance }
}

fn field(grid: GridSpec, seed: u64) -> Result<crate::grid::DirectorField> {
    build_initial(
        &InitialDatum::RandomSmooth {
            amplitude: 0.4,
            modes: 2,
            seed,
        },
        grid,
    )
}

/// Each check reports a nonnegative defect against its tolerance.
pub fn check_invariants(n_side: usize) -> Result<Vec<CheckOutcome>> {
    let grid = GridSpec::new(n_side, 2.0 * PI)?;
    let k = FrankConstants::new(1.0, 2.0, 3.0, 0.5)?;
    let mut out = Vec::new();

    let mut classical: f64 = 0.0;
    let iso = FrankConstants::isotropic(1.0)?;
    for seed in 0..5 {
        let n = field(grid, seed)?;
        let h = molecular_field(&n, &iso)?;
        let lap = inverse_transform(&forward_transform(n.as_field()).laplacian()).scaled(2.0);
        classical = classical.max((&h - &lap).norm_l2() / lap.norm_l2());
    }
    out.push(outcome("isotropic_field_is_twice_laplacian", classical, 1e-10));

    let n = field(grid, 11)?;
    // Aliasing-limited at small N; converges spectrally under refinement.
    out.push(outcome("trace_identity", wp_trace_identity(&n, &k)?.residual, 1e-6));

    let positive = positivity_check(&k, 200)?;
    out.push(outcome("positivity_form", if positive { 0.0 } else { 1.0 }, 0.0));

    let g = GilbertParams::new(0.6, 0.8)?;
    let r = rhs(&n, &k, &g)?;
    let h = molecular_field(&n, &k)?;
    let nxh = n.as_field().zip_map(&h, cross3);
    let gilbert = (r.inner(&nxh) - g.beta * r.norm_l2_sq()).abs() / r.norm_l2_sq().max(1e-12);
    out.push(outcome("gilbert_identity", gilbert, 1e-10));
    let tangency = r
        .values()
        .iter()
        .zip(n.values())
        .map(|(a, b)| dot3(*a, *b).abs())
        .fold(0.0, f64::max)
        / r.max_abs().max(1e-300);
    out.push(outcome("tendency_is_tangent", tangency, 1e-12));

    let p = build_partition(grid)?;
    out.push(outcome("partition_of_unity", p.unity_residual(), 1e-10));
    let mut recon: f64 = 0.0;
    let mut ortho: f64 = 0.0;
    for seed in 0..5 {
        let f = random_field(grid, seed);
        let b = decompose(&f, &p)?;
        recon = recon.max((&b.reconstruct() - &f).norm_l2() / f.norm_l2());
        for j in p.indices() {
            for l in p.indices().filter(|&l| l >= j + 2) {
                ortho = ortho.max(p.block(b.block(j), l)?.norm_l2() / f.norm_l2());
            }
        }
    }
    out.push(outcome("block_reconstruction", recon, 1e-10));
    out.push(outcome("block_almost_orthogonality", ortho, 1e-12));
    out.push(outcome("weak_metric_of_equal_fields", weak_metric(&n, &n, &p, &k, 0.5)?.total, 0.0));

    let cfg = SolverConfig::new(&grid, &k, 0.02)?.with_keep_states(false);
    let settings = RecordSettings::for_grid(&grid);
    let gf = GilbertParams::gradient_flow();
    let a = run(&n, &cfg, &k, &gf, &settings, &mut |_, _| Ok(()))?;
    let b = run(&n, &cfg, &k, &gf, &settings, &mut |_, _| Ok(()))?;
    let th = FlagThresholds { epsilon0: 1.0, epsilon1: 0.1 };
    let text = format_records(&a.records, &th);
    out.push(outcome(
        "determinism",
        if text == format_records(&b.records, &th) { 0.0 } else { 1.0 },
        0.0,
    ));
    let e0 = a.records[0].energy.total;
    let balance = a
        .records
        .iter()
        .map(|r| (r.energy.total + r.dissipation_cum - e0).abs() / e0)
        .fold(0.0, f64::max);
    out.push(outcome("energy_balance", balance, 1e-4));
    let increase = a
        .records
        .windows(2)
        .map(|w| (w[1].energy.total - w[0].energy.total).max(0.0) / e0)
        .fold(0.0, f64::max);
    out.push(outcome("energy_nonincreasing", increase, 1e-12));

    let back = parse_records(&text, Path::new("records.csv"))?;
    out.push(outcome(
        "records_round_trip",
        if format_records(&back, &th) == text { 0.0 } else { 1.0 },
        0.0,
    ));
    let bytes = encode(0.125, n.as_field());
    let snap = decode(&bytes, Path::new("snapshot"))?;
    let same = snap.field == *n.as_field() && encode(snap.time, &snap.field) == bytes;
    out.push(outcome("snapshot_round_trip", if same { 0.0 } else { 1.0 }, 0.0));
    Ok(out)
}

/// `check,status,value,tolerance` lines.
pub fn format_checks(checks: &[CheckOutcome]) -> String {
    let mut s = String::from("check,status,value,tolerance\n");
    for c in checks {
        let status = if c.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(s, "{},{status},{:.3e},{:.1e}", c.name, c.value, c.tolerance);
    }
    s
}
