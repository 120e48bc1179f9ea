use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use wasscc::certify::{certify_opt, certify_pess, empirical_cvar, Verdict};
use wasscc::coeff::{c_opt, c_pess, Mode};
use wasscc::gaussian::{gaussian_cvar, std_cdf, std_quantile, ProbLevel};
use wasscc::individual::{soc_membership, IndividualInstance};
use wasscc::joint::{phi, var_f, ProductionInstance};
use wasscc::model::{AmbiguitySpec, GaussianReference};

fn p(v: f64) -> ProbLevel {
    ProbLevel::new(v).unwrap()
}

fn reference(d: usize, entries: &[f64]) -> GaussianReference {
    let l = DMatrix::from_fn(d, d, |i, j| entries[i * d + j]);
    let cov = &l * l.transpose() + DMatrix::identity(d, d) * 0.2;
    GaussianReference::new(DVector::from_fn(d, |i, _| entries[d * d + i]), cov).unwrap()
}

fn instance(reference: GaussianReference, b0: f64, amb: AmbiguitySpec) -> IndividualInstance {
    let d = reference.dim();
    IndividualInstance::new(
        reference,
        DVector::zeros(d),
        DMatrix::identity(d, d),
        b0,
        DVector::zeros(d),
        amb,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quantile_inverts_cdf(q in 1e-12f64..(1.0 - 1e-12)) {
        let z = std_quantile(p(q));
        prop_assert!((std_cdf(z) - q).abs() <= 1e-12 * q.max(1e-3));
    }

    #[test]
    fn cvar_dominates_quantile(tail in 1e-6f64..0.999) {
        prop_assert!(gaussian_cvar(p(tail)) >= std_quantile(p(1.0 - tail)) - 1e-12);
    }

    #[test]
    fn coefficients_move_apart_with_radius(eps in 0.02f64..0.45, d1 in 1e-4f64..0.3, d2 in 1e-4f64..0.3) {
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        let e = p(eps);
        prop_assert!(c_pess(e, hi).unwrap().c >= c_pess(e, lo).unwrap().c - 1e-9);
        prop_assert!(c_opt(e, hi).unwrap().c <= c_opt(e, lo).unwrap().c + 1e-9);
        prop_assert!(c_opt(e, lo).unwrap().c <= c_pess(e, lo).unwrap().c + 1e-9);
    }

    #[test]
    fn empirical_cvar_is_a_tail_mean_bound(values in prop::collection::vec(-10f64..10.0, 2..200), tail in 0.01f64..0.99) {
        let cv = empirical_cvar(&values, p(tail));
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        prop_assert!(cv <= max + 1e-12);
        prop_assert!(cv >= mean - 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn certificates_are_deterministic_and_affine_in_delta(
        entries in prop::collection::vec(-1f64..1.0, 12),
        eps in 0.05f64..0.3,
        delta in 0.0f64..0.2,
        seed in 0u64..1000,
    ) {
        let r = reference(3, &entries);
        let x = DVector::from_column_slice(&entries[9..12]);
        let b0 = x.dot(r.mean()) + 2.0;
        let base = instance(r.clone(), b0, AmbiguitySpec::new(0.0, eps).unwrap());
        let shifted = instance(r, b0, AmbiguitySpec::new(delta, eps).unwrap());
        let a = certify_pess(&base, &x, 4000, seed).unwrap();
        prop_assert_eq!(&a, &certify_pess(&base, &x, 4000, seed).unwrap());
        let b = certify_pess(&shifted, &x, 4000, seed).unwrap();
        prop_assert!((b.statistic - a.statistic - delta / eps).abs() <= 1e-9 * (1.0 + a.statistic.abs()));
        let a = certify_opt(&base, &x, 4000, seed).unwrap();
        let b = certify_opt(&shifted, &x, 4000, seed).unwrap();
        prop_assert!((b.statistic - a.statistic - delta / (1.0 - eps)).abs() <= 1e-9 * (1.0 + a.statistic.abs()));
    }

    #[test]
    fn certify_agrees_with_soc_membership_away_from_the_boundary(
        entries in prop::collection::vec(-1f64..1.0, 12),
        eps in 0.05f64..0.3,
        delta in 0.01f64..0.2,
        offset in prop_oneof![-2.0f64..-0.3, 0.3f64..2.0],
        pessimistic: bool,
    ) {
        let r = reference(3, &entries);
        let x = DVector::from_column_slice(&entries[9..12]);
        prop_assume!(x.norm() > 0.1);
        let amb = AmbiguitySpec::new(delta, eps).unwrap();
        let mode = if pessimistic { Mode::Pessimistic } else { Mode::Optimistic };
        let c = wasscc::coeff::coefficient(mode, amb.eps, delta).unwrap();
        let scale = (r.sqrt_cov() * &x).norm();
        let inst = instance(r.clone(), x.dot(r.mean()) + (c + offset) * scale, amb);
        let member = soc_membership(&inst, &x, mode).unwrap();
        let cert = match mode {
            Mode::Pessimistic => certify_pess(&inst, &x, 50_000, 17).unwrap(),
            Mode::Optimistic => certify_opt(&inst, &x, 50_000, 17).unwrap(),
        };
        let expected = if member.feasible { Verdict::Pass } else { Verdict::Fail };
        prop_assert_eq!(cert.verdict, expected);
    }

    #[test]
    fn phi_peaks_at_var(seed in 0u64..500, eps in 0.05f64..0.3, frac in 0.3f64..1.0, step in 0.05f64..0.5) {
        let inst = ProductionInstance::random(seed, 4, 3, 40.0, AmbiguitySpec::new(0.0, eps).unwrap()).unwrap();
        let x = DVector::from_element(4, frac * inst.upper);
        let v = var_f(&inst, &x, p(eps)).unwrap();
        prop_assume!(v > 0.0);
        let top = phi(&inst, &x, v);
        prop_assert!(top >= phi(&inst, &x, v * (1.0 - step)) - 1e-9);
        prop_assert!(top >= phi(&inst, &x, v * (1.0 + step)) - 1e-9);
    }
}
