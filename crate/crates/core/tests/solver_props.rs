use proptest::prelude::*;

use gave::problems::gen_certified;
use gave::solver::{
    inms_solve, nms_solve, relative_res, theta_at, InitialGuess, InnerSolver, SolverConfig,
    ThetaSchedule,
};
use gave::splittings::{build_splitting, OmegaSpec, SplittingKind};

fn kind_strategy() -> impl Strategy<Value = SplittingKind> {
    prop_oneof![
        Just(SplittingKind::Picard),
        Just(SplittingKind::Mn),
        Just(SplittingKind::Nj),
        Just(SplittingKind::Ngs),
        (0.2..1.8f64).prop_map(|alpha| SplittingKind::Nsor { alpha }),
        (0.2..1.8f64, 0.0..1.0f64).prop_map(|(alpha, t)| SplittingKind::Naor { alpha, beta: t * alpha }),
        Just(SplittingKind::Hss),
        Just(SplittingKind::Nmn),
        (0.2..1.8f64).prop_map(|gamma| SplittingKind::Drs { gamma }),
    ]
}

fn omega_for(kind: SplittingKind, w: f64) -> OmegaSpec {
    match kind {
        SplittingKind::Picard | SplittingKind::Drs { .. } => OmegaSpec::Zero,
        _ => OmegaSpec::ScalarTimesIdentity(w),
    }
}

fn max_abs_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn known_solution_is_a_fixed_point(
        n in 4usize..40,
        seed in any::<u64>(),
        kind in kind_strategy(),
        w in 0.1..2.0f64,
    ) {
        let p = gen_certified(n, seed, 1.0, 10.0).unwrap();
        let xs = p.known_solution.clone().unwrap();
        let omega = omega_for(kind, w);
        let s = build_splitting(&p.a, kind, &omega).unwrap();
        let cfg = SolverConfig {
            tol: f64::MIN_POSITIVE,
            k_max: 1,
            x0: InitialGuess::Vector(xs.clone()),
            ..SolverConfig::default()
        };
        let r = nms_solve(&p, &s, &omega, &cfg).unwrap();
        prop_assert!(max_abs_diff(&r.x, &xs) <= 1e-10);
    }

    #[test]
    fn decaying_theta_is_bounded_and_nonincreasing(l_max in 0usize..40, k in 0usize..2000) {
        let s = ThetaSchedule::Decaying { l_max };
        let (t0, t1) = (theta_at(s, k), theta_at(s, k + 1));
        prop_assert!(t0 > 0.0 && t0 <= 0.5);
        prop_assert!(t1 <= t0);
        let expected = 0.5f64.min(1.0 / (k.saturating_sub(l_max)).max(1) as f64);
        prop_assert_eq!(t0, expected);
    }

    #[test]
    fn every_inexact_step_satisfies_its_condition(
        n in 10usize..80,
        seed in any::<u64>(),
        kind in prop_oneof![Just(SplittingKind::Nj), Just(SplittingKind::Ngs), Just(SplittingKind::Mn)],
        theta in prop_oneof![Just(None), (0.0..0.6f64).prop_map(Some)],
    ) {
        let p = gen_certified(n, seed, 1.0, 10.0).unwrap();
        let omega = OmegaSpec::ScalarTimesIdentity(0.5);
        let s = build_splitting(&p.a, kind, &omega).unwrap();
        let cfg = SolverConfig {
            theta: theta.map_or(ThetaSchedule::default(), ThetaSchedule::Constant),
            inner: InnerSolver::Lsqr { max_inner: Some(20 * n) },
            audit: true,
            ..SolverConfig::default()
        };
        let r = inms_solve(&p, &s, &omega, &cfg).unwrap();
        prop_assert!(r.converged);
        prop_assert!(r.warnings.is_empty(), "{:?}", r.warnings);
    }

    #[test]
    fn reported_res_matches_recomputation(
        n in 4usize..60,
        seed in any::<u64>(),
        kind in kind_strategy(),
        inexact in any::<bool>(),
    ) {
        let p = gen_certified(n, seed, 1.0, 10.0).unwrap();
        let omega = omega_for(kind, 1.0);
        let s = build_splitting(&p.a, kind, &omega).unwrap();
        let cfg = if inexact { SolverConfig::inexact() } else { SolverConfig::default() };
        // some NAOR/NSOR parameter draws need not converge; the report must still be honest
        let cfg = SolverConfig { k_max: 60, ..cfg };
        match gave::solver::solve(&p, &s, &omega, &cfg) {
            Ok(r) => {
                prop_assert_eq!(r.final_res, relative_res(&p, &r.x).unwrap());
                prop_assert_eq!(r.converged, r.final_res <= cfg.tol);
                prop_assert!(r.iterations <= cfg.k_max);
                if !inexact {
                    prop_assert!(r.inner_iters.is_empty());
                } else {
                    prop_assert_eq!(r.inner_iters.len(), r.iterations);
                }
            }
            Err(e) => prop_assert!(e.is_numerical(), "{e}"),
        }
    }
}
