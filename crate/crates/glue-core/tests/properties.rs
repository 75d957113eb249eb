use glue_core::cylinder::{CircleFft, Section};
use glue_core::decay::{gamma_c, three_interval_bound, xi_of_gamma};
use glue_core::floer_op::{linearize, Equation};
use glue_core::flow::{dim_identity_check, fredholm_index, fredholm_index_family};
use glue_core::preglue::{flat_toy, preglue, AdiabaticParams};
use glue_core::target::fs_distance;
use glue_core::C64;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn c64() -> impl Strategy<Value = C64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| C64::new(a, b))
}

fn point(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec(c64(), n)
}

/// Sum of extremal profiles `a e^{−c'k} + b e^{−c'(N−k)}` with `c' ≥ c`.
fn admissible(c: f64) -> impl Strategy<Value = Vec<f64>> {
    (3usize..24, prop::collection::vec((0.0..2.0f64, 0.0..1.0f64, 0.0..1.0f64), 1..4)).prop_map(move |(n, terms)| {
        (0..=n)
            .map(|k| {
                terms
                    .iter()
                    .map(|&(dc, a, b)| a * (-(c + dc) * k as f64).exp() + b * (-(c + dc) * (n - k) as f64).exp())
                    .sum()
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn three_interval_conclusion_on_admissible((c, x) in (0.2..4.0f64).prop_flat_map(|c| (Just(c), admissible(c)))) {
        let rep = three_interval_bound(&x, gamma_c(c)).unwrap();
        prop_assert!(rep.holds_hypothesis);
        prop_assert!(rep.conclusion_holds);
    }

    #[test]
    fn three_interval_scale_invariant(x in prop::collection::vec(0.0..1.0f64, 3..20), s in 1e-6..1e6f64, g in 0.05..0.49f64) {
        let a = three_interval_bound(&x, g).unwrap();
        let y: Vec<f64> = x.iter().map(|v| v * s).collect();
        let b = three_interval_bound(&y, g).unwrap();
        prop_assert_eq!(a.holds_hypothesis, b.holds_hypothesis);
        prop_assert_eq!(a.conclusion_holds, b.conclusion_holds);
        for (p, q) in a.bound.iter().zip(&b.bound) {
            prop_assert!((p * s - q).abs() <= 1e-12 * q.abs().max(1e-300));
        }
    }

    #[test]
    fn decay_base_inverts_gamma(c in 0.01..10.0f64) {
        prop_assert!((xi_of_gamma(gamma_c(c)).ln() - c).abs() < 1e-9);
    }

    #[test]
    fn fs_distance_metric_axioms(z in point(2), w in point(2), v in point(2)) {
        let dzw = fs_distance(&z, &w);
        prop_assert!(dzw >= 0.0);
        prop_assert!((dzw - fs_distance(&w, &z)).abs() < 1e-13);
        prop_assert!(fs_distance(&z, &z) < 1e-7);
        prop_assert!(dzw <= fs_distance(&z, &v) + fs_distance(&v, &w) + 1e-12);
        prop_assert!(dzw <= std::f64::consts::FRAC_PI_2 + 1e-15);
    }

    #[test]
    fn fs_distance_below_chord(z in point(3), w in point(3)) {
        let chord: f64 = z.iter().zip(&w).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let big = z.iter().map(|a| a.norm_sqr()).sum::<f64>().max(w.iter().map(|a| a.norm_sqr()).sum());
        let d = fs_distance(&z, &w);
        prop_assert!(d <= chord + 1e-12);
        prop_assert!(d <= std::f64::consts::FRAC_PI_2 * chord / (1.0 + big).sqrt() + 1e-12);
    }

    #[test]
    fn fft_round_trip(log_n in 2u32..7, dim in 1usize..4, seed in prop::collection::vec(c64(), 64 * 3)) {
        let n_t = 1usize << log_n;
        let slice: Vec<C64> = seed.into_iter().take(n_t * dim).collect();
        let fft = CircleFft::new(n_t);
        let mut coeffs = vec![C64::default(); n_t * dim];
        let mut back = vec![C64::default(); n_t * dim];
        fft.analyze(&slice, dim, &mut coeffs);
        fft.synthesize(&coeffs, dim, &mut back);
        for (a, b) in slice.iter().zip(&back) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn dim_identity_random(n in 1usize..6, da in 0usize..6, db in 0usize..6, vals in prop::collection::vec(-1.0..1.0f64, 72)) {
        let (da, db) = (da.min(n), db.min(n));
        let a = DMatrix::from_fn(n, da, |i, j| vals[i * 6 + j]);
        let b = DMatrix::from_fn(n, db, |i, j| vals[36 + i * 6 + j]);
        let d = dim_identity_check(&a, &b, n);
        prop_assert_eq!(d.lhs, d.rhs_plus);
    }

    #[test]
    fn family_index_adds_one(a in -5i64..5, b in -5i64..5, c in -3i64..3, d in -3i64..3) {
        prop_assert_eq!(fredholm_index_family(a, b, c, d), fredholm_index(a, b, c, d) + 1);
        prop_assert_eq!(fredholm_index(a, b, c, d) - fredholm_index(b, a, c, d), 2 * (a - b));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn linearization_is_linear(s in -3.0..3.0f64, k1 in 0u32..4, k2 in 0u32..4, ph in 0.0..6.0f64) {
        let cfg = flat_toy().unwrap();
        let p = AdiabaticParams::standard(0.25);
        let u = preglue(&cfg, &p).unwrap();
        let op = linearize(&u, &Equation::of_config(&cfg, &p)).unwrap();
        let lay = op.layout();
        let tau = std::f64::consts::TAU;
        let x = Section::from_fn(lay, |t, th| vec![C64::from_polar((-0.1 * t * t).exp(), tau * k1 as f64 * th + ph); 2]);
        let y = Section::from_fn(lay, |t, th| vec![C64::new((0.3 * t).sin(), (tau * k2 as f64 * th).cos()); 2]);
        let mut comb = y.clone();
        comb.axpy(s, &x);
        let lhs = op.apply(&comb).unwrap();
        let mut rhs = op.apply(&y).unwrap();
        rhs.axpy(s, &op.apply(&x).unwrap());
        let scale = rhs.max_abs().max(1.0);
        prop_assert!(lhs.sub(&rhs).max_abs() <= 1e-11 * scale);
    }
}
