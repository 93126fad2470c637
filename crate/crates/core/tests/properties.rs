use proptest::prelude::*;

use kpl_core::history::{emit_history, read_history, HistoryFormat};
use kpl_core::matrix_market::{read_matrix_market, write_matrix_market};
use kpl_core::solvers::IterationRecord;
use kpl_core::sparse::{spmv, SparseMatrix};
use kpl_core::stability::{
    matrix_2norm, modeled_gap_evolution, modeled_gap_unrolled, parse_grid, propagation_matrix,
    propagation_matrix_var, propagation_product, psi, CoefficientHistory, GapModelMode, ShiftModel,
};

fn coefficient_history(max_len: usize) -> impl Strategy<Value = CoefficientHistory> {
    (1..=max_len).prop_flat_map(|len| {
        (
            prop::collection::vec(0.05f64..1.0, len),
            prop::collection::vec(0.0f64..1.5, len),
        )
            .prop_map(|(a, b)| CoefficientHistory::new(a, b).unwrap())
    })
}

/// Random symmetric matrix given by its lower-triangle entries.
fn symmetric_triplets() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
    (1usize..12).prop_flat_map(|n| {
        let entry = (0..n, 0..n, -10.0f64..10.0).prop_map(|(i, j, v)| (i.max(j), i.min(j), v));
        (Just(n), prop::collection::vec(entry, 0..3 * n))
    })
}

fn mirrored(entries: &[(usize, usize, f64)]) -> Vec<(usize, usize, f64)> {
    let mut all = Vec::new();
    for &(i, j, v) in entries {
        all.push((i, j, v));
        if i != j {
            all.push((j, i, v));
        }
    }
    all
}

fn optional_real() -> impl Strategy<Value = Option<f64>> {
    prop_oneof![
        Just(None),
        any::<f64>()
            .prop_filter("finite", |v| v.is_finite())
            .prop_map(Some)
    ]
}

fn record() -> impl Strategy<Value = IterationRecord> {
    (
        0usize..10_000,
        prop::array::uniform4(optional_real()),
        -1e300f64..1e300,
        prop::array::uniform5(optional_real()),
    )
        .prop_map(
            |(iter, [alpha, beta, gamma, delta], rn, [rt, f, g, h, j])| IterationRecord {
                iter,
                alpha,
                beta,
                gamma,
                delta,
                rnorm_recursive: rn.abs(),
                rnorm_true: rt,
                gap_f: f,
                gap_g: g,
                gap_h: h,
                gap_j: j,
            },
        )
}

proptest! {
    #[test]
    fn triplet_matrices_are_symmetric((n, entries) in symmetric_triplets()) {
        let a = SparseMatrix::from_triplets(n, &mirrored(&entries)).unwrap();
        let d = a.to_dense();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(d[i][j].to_bits(), d[j][i].to_bits());
            }
        }
        let v: Vec<f64> = (0..n).map(|k| (k as f64 * 0.37).sin()).collect();
        let w = spmv(&a, &v).unwrap();
        for i in 0..n {
            let want: f64 = (0..n).map(|j| d[i][j] * v[j]).sum();
            prop_assert!((w[i] - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn matrix_market_round_trip((n, entries) in symmetric_triplets()) {
        let a = SparseMatrix::from_triplets(n, &mirrored(&entries)).unwrap();
        let mut buf = Vec::new();
        write_matrix_market(&a, &mut buf).unwrap();
        let b = read_matrix_market(buf.as_slice()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn first_column_is_e1(alpha in -5.0f64..5.0, beta in -5.0f64..5.0,
                          sp in -5.0f64..5.0, sc in -5.0f64..5.0) {
        for p in [propagation_matrix(alpha, beta, sc), propagation_matrix_var(alpha, beta, sp, sc)] {
            prop_assert_eq!(p.get(0, 0), 1.0);
            for r in 1..4 {
                prop_assert_eq!(p.get(r, 0), 0.0);
            }
        }
        let p0 = propagation_matrix(alpha, beta, 0.0);
        prop_assert_eq!(p0.get(2, 1), 0.0);
        prop_assert_eq!(p0.get(2, 2), 1.0);
        prop_assert_eq!(propagation_matrix_var(alpha, beta, sc, sc), propagation_matrix(alpha, beta, sc));
    }

    #[test]
    fn products_keep_e1_and_psi_is_at_least_one(h in coefficient_history(25), sigma in 0.0f64..6.0) {
        let i = h.len();
        let p = propagation_product(&h, 1, i, sigma).unwrap();
        prop_assert_eq!(p.get(0, 0), 1.0);
        for r in 1..4 {
            prop_assert_eq!(p.get(r, 0), 0.0);
        }
        prop_assert!(psi(&h, i, sigma).unwrap() >= 1.0);
    }

    #[test]
    fn running_product_matches_direct_products(h in coefficient_history(20), sigma in 0.0f64..6.0) {
        let i = h.len();
        let direct = (1..=i)
            .map(|j| matrix_2norm(&propagation_product(&h, j, i, sigma).unwrap()))
            .fold(0.0, f64::max);
        let running = psi(&h, i, sigma).unwrap();
        prop_assert!((running - direct).abs() <= 1e-13 * direct, "{} vs {}", running, direct);
    }

    #[test]
    fn forward_and_unrolled_gap_models_agree(
        h in coefficient_history(20),
        sigma in 0.0f64..4.0,
        seed in prop::array::uniform4(-1.0f64..1.0),
    ) {
        let eps: Vec<[f64; 4]> = (0..h.len())
            .map(|k| seed.map(|s| s * ((k + 1) as f64).cos()))
            .collect();
        let sh = ShiftModel::Constant(sigma);
        let fwd = modeled_gap_evolution(&h, &eps, seed, sh, GapModelMode::Signed).unwrap();
        for i in 1..=h.len() {
            let un = modeled_gap_unrolled(&h, &eps, seed, sh, i).unwrap();
            let scale = un.iter().chain(&fwd[i - 1]).fold(1.0f64, |m, v| m.max(v.abs()));
            for c in 0..4 {
                prop_assert!((un[c] - fwd[i - 1][c]).abs() <= 1e-12 * scale);
            }
        }
        // homogeneous case is exactly the product applied to pi_1
        let zeros = vec![[0.0; 4]; h.len()];
        let hom = modeled_gap_evolution(&h, &zeros, seed, sh, GapModelMode::Signed).unwrap();
        let p = propagation_product(&h, 1, h.len(), sigma).unwrap();
        let want = p.apply(&seed);
        let got = hom.last().unwrap();
        for c in 0..4 {
            prop_assert!((got[c] - want[c]).abs() <= 1e-12 * (1.0 + want[c].abs()));
        }
    }

    #[test]
    fn history_round_trips_bitwise(recs in prop::collection::vec(record(), 1..20)) {
        for fmt in [HistoryFormat::Csv, HistoryFormat::Json] {
            let mut buf = Vec::new();
            emit_history(&recs, fmt, &mut buf).unwrap();
            let back = read_history(buf.as_slice(), fmt).unwrap();
            prop_assert_eq!(back.len(), recs.len());
            for (a, b) in back.iter().zip(&recs) {
                prop_assert!(a.bitwise_eq(b), "{:?} vs {:?}", a, b);
            }
        }
    }

    #[test]
    fn grids_are_inclusive(lo in 0u32..20, step in 1u32..8, count in 0u32..50) {
        let (lo, step) = (lo as f64 * 0.25, step as f64 * 0.125);
        let hi = lo + count as f64 * step;
        let g = parse_grid(&format!("{lo}:{step}:{hi}")).unwrap();
        prop_assert_eq!(g.len(), count as usize + 1);
        prop_assert_eq!(*g.last().unwrap(), hi);
    }
}
