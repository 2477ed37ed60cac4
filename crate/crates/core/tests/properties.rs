use std::f64::consts::PI;
use std::path::Path;

use proptest::prelude::*;

use ollg::cli_io::records::{format_records, parse_records, FlagThresholds};
use ollg::cli_io::snapshot::{decode, encode};
use ollg::diagnostics::{finalize_records, EnergyRecord, RecordSettings};
use ollg::dynamics::{run, SolverConfig};
use ollg::grid::{normalize, GridSpec, VectorField3};
use ollg::initial::{build_initial, InitialDatum};
use ollg::littlewood_paley::{
    bernstein_audit, build_partition, decompose, random_block_field, random_field, weak_metric_fields,
};
use ollg::spectral::{low_pass_filter, spectral_derivative};
use ollg::{EnergyBreakdown, FrankConstants, GilbertParams};

fn grid(n: usize) -> GridSpec {
    GridSpec::new(n, 2.0 * PI).unwrap()
}

fn side() -> impl Strategy<Value = usize> {
    prop_oneof![Just(16usize), Just(32), Just(64)]
}

fn constants() -> impl Strategy<Value = FrankConstants> {
    (0.2..5.0f64, 0.2..5.0f64, 0.2..5.0f64, -3.0..3.0f64)
        .prop_map(|(k1, k2, k3, k4)| FrankConstants::new(k1, k2, k3, k4).unwrap())
}

/// Fields whose nodes stay away from the origin.
fn free_field(n: usize) -> impl Strategy<Value = VectorField3> {
    let node = (0.1..3.0f64, -1.0..1.0f64, 0.0..2.0 * PI).prop_map(|(r, z, phi)| {
        let s = (1.0 - z * z).sqrt();
        [r * s * phi.cos(), r * s * phi.sin(), r * z]
    });
    prop::collection::vec(node, n * n).prop_map(move |v| VectorField3::from_values(grid(n), v).unwrap())
}

fn rel(a: &VectorField3, b: &VectorField3) -> f64 {
    (a - b).norm_l2() / b.norm_l2().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn normalize_is_idempotent(f in free_field(8)) {
        let once = normalize(&f).unwrap();
        let twice = normalize(once.as_field()).unwrap();
        prop_assert_eq!(&once, &twice);
        let doubled = normalize(&once.as_field().scaled(2.0)).unwrap();
        prop_assert!(rel(doubled.as_field(), once.as_field()) <= 1e-15);
    }

    #[test]
    fn blocks_reconstruct_and_separate(n in side(), seed in any::<u64>()) {
        let p = build_partition(grid(n)).unwrap();
        let f = random_field(grid(n), seed);
        let b = decompose(&f, &p).unwrap();
        prop_assert!(rel(&b.reconstruct(), &f) <= 1e-10);
        for j in p.indices() {
            for l in p.indices().filter(|&l| (l - j).abs() >= 2) {
                prop_assert!(p.block(b.block(j), l).unwrap().norm_l2() <= 1e-12 * f.norm_l2());
            }
        }
    }

    #[test]
    fn blocks_commute_with_multipliers(n in side(), seed in any::<u64>(), cut in 0.1..1.5f64, axis in 1usize..3) {
        let g = grid(n);
        let p = build_partition(g).unwrap();
        let f = random_field(g, seed);
        let cutoff = cut * g.k_max();
        for j in p.indices() {
            let block = p.block(&f, j).unwrap();
            let a = spectral_derivative(&block, axis).unwrap();
            let b = p.block(&spectral_derivative(&f, axis).unwrap(), j).unwrap();
            prop_assert!((&a - &b).norm_l2() <= 1e-12 * g.k_max() * f.norm_l2());
            let a = low_pass_filter(&block, cutoff).unwrap();
            let b = p.block(&low_pass_filter(&f, cutoff).unwrap(), j).unwrap();
            prop_assert!((&a - &b).norm_l2() <= 1e-12 * f.norm_l2());
        }
    }

    /// A single-block difference `dn = Delta_j0 g` with `j0 >= 1` has
    /// `c 2^((2 - 2s) j0) ||dn||^2 <= W <= C 2^((2 - 2s) j0) ||dn||^2`, with
    /// `c / a` and `C / max(k)` measured in [0.9, 2.05] over N = 32..128.
    #[test]
    fn weak_metric_is_sandwiched_by_sobolev(
        n in side(),
        k in constants(),
        s in 0.05..0.95f64,
        seed in any::<u64>(),
        pick in 0.0..1.0f64,
    ) {
        let g = grid(n);
        let p = build_partition(g).unwrap();
        let j0 = 1 + (pick * p.j_max() as f64) as i32;
        let j0 = j0.min(p.j_max());
        let dn = random_block_field(&p, j0, seed);
        prop_assert!(p.block(&dn, -1).unwrap().norm_l2() <= 1e-12 * dn.norm_l2());
        let n2 = build_initial(&InitialDatum::RandomSmooth { amplitude: 0.6, modes: 2, seed }, g).unwrap();
        let n1 = n2.as_field() + &dn;
        let w = weak_metric_fields(&n1, n2.as_field(), &p, &k, s).unwrap().total;
        let base = 2f64.powf((2.0 - 2.0 * s) * j0 as f64) * dn.norm_l2_sq();
        prop_assert!(w >= 0.5 * k.a() * base, "lower ratio {}", w / (k.a() * base));
        prop_assert!(w <= 4.0 * k.max_k() * base, "upper ratio {}", w / (k.max_k() * base));
    }

    #[test]
    fn snapshots_round_trip(f in free_field(8), time in 0.0..1e3f64) {
        let bytes = encode(time, &f);
        let back = decode(&bytes, Path::new("x.snap")).unwrap();
        prop_assert_eq!(back.time, time);
        prop_assert_eq!(&back.field, &f);
        prop_assert_eq!(encode(back.time, &back.field), bytes);
    }

    #[test]
    fn records_round_trip(rows in prop::collection::vec(prop::array::uniform16(-1e300..1e300f64), 1..6)) {
        let records: Vec<EnergyRecord> = rows
            .iter()
            .map(|v| EnergyRecord {
                t: v[0],
                energy: EnergyBreakdown {
                    splay: v[2],
                    twist_bend_k2: v[3],
                    twist_bend_k3: v[4],
                    null_lagrangian: v[5],
                    total: v[1],
                    dirichlet_part: f64::NAN,
                    v_part: f64::NAN,
                },
                dissipation_cum: v[6],
                identity_residual_energy: v[7],
                identity_residual_beta: v[8],
                grad_sup: v[9],
                blowup_integral: v[10],
                h2_norm_sq: v[11],
                l4_grad: v[12],
                local_max: v[13],
                local_argmax: [v[14], v[15]],
                blowup: false,
            })
            .collect();
        let th = FlagThresholds { epsilon0: 1.0, epsilon1: 0.1 };
        let text = format_records(&records, &th);
        let back = parse_records(&text, Path::new("records.csv")).unwrap();
        prop_assert_eq!(back.len(), records.len());
        for (a, b) in back.iter().zip(&records) {
            prop_assert_eq!(a.t, b.t);
            prop_assert_eq!(a.energy.total, b.energy.total);
            prop_assert_eq!(a.dissipation_cum, b.dissipation_cum);
            prop_assert_eq!(a.local_argmax, b.local_argmax);
        }
        prop_assert_eq!(format_records(&back, &th), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// The energy-law residual recomputed from the CSV alone matches the
    /// in-process value.
    #[test]
    fn records_file_is_self_sufficient(seed in any::<u64>(), alpha in 0.1..1.0f64, stride in 1usize..6) {
        let g = grid(16);
        let k = FrankConstants::new(1.0, 2.0, 3.0, 0.0).unwrap();
        let gilbert = GilbertParams::new(alpha, (1.0 - alpha * alpha).sqrt()).unwrap();
        let n0 = build_initial(&InitialDatum::RandomSmooth { amplitude: 0.4, modes: 2, seed }, g).unwrap();
        let cfg = SolverConfig::new(&g, &k, 0.02).unwrap().with_output_stride(stride).with_keep_states(false);
        let t = run(&n0, &cfg, &k, &gilbert, &RecordSettings::for_grid(&g), &mut |_, _| Ok(())).unwrap();
        let th = FlagThresholds { epsilon0: 1.0, epsilon1: 0.1 };
        let mut back = parse_records(&format_records(&t.records, &th), Path::new("records.csv")).unwrap();
        for r in &mut back {
            r.identity_residual_energy = f64::NAN;
        }
        finalize_records(&mut back, &gilbert);
        let scale = t.records.iter().map(|r| r.identity_residual_energy).fold(0.0, f64::max).max(1e-300);
        for (a, b) in back.iter().zip(&t.records) {
            prop_assert!((a.identity_residual_energy - b.identity_residual_energy).abs() <= 1e-12 * scale);
        }
    }
}

#[test]
fn bernstein_constants_are_grid_stable() {
    let coarse = bernstein_audit(&build_partition(grid(64)).unwrap(), 300).unwrap();
    let fine = bernstein_audit(&build_partition(grid(128)).unwrap(), 300).unwrap();
    for (a, b) in coarse.iter().zip(&fine) {
        let drift = (a.constant - b.constant).abs() / b.constant;
        assert!(drift <= 0.1, "{a:?} vs {b:?}: drift {drift}");
    }
}
