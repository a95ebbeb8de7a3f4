//! Property tests for the structural invariants: unitarity of propagation,
//! Bessel recurrences, zone folding, concurrence range, and double
//! stochasticity of the overlap matrix.

use proptest::prelude::*;

use spectroscope::dissipation::concurrence;
use spectroscope::floquet::{floquet_modes, fold_into_zone, s_matrix};
use spectroscope::model::{exact_uncoupled_basis, hamiltonian_at, Drive, SystemParams};
use spectroscope::numerics::bessel::bessel_j;
use spectroscope::numerics::linalg::{c64, unitarity_defect, CMat4};
use spectroscope::numerics::propagate;
use spectroscope::rwa::detuning;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bessel_recurrence_holds(n in 1i64..40, x in 0.1f64..50.0) {
        let lhs = bessel_j(n - 1, x) + bessel_j(n + 1, x);
        let rhs = 2.0 * n as f64 / x * bessel_j(n, x);
        prop_assert!((lhs - rhs).abs() <= 1e-9);
    }

    #[test]
    fn bessel_parity(n in 0i64..30, x in 0.0f64..60.0) {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!((bessel_j(-n, x) - sign * bessel_j(n, x)).abs() < 1e-14);
    }

    #[test]
    fn zone_fold_is_congruent_and_in_range(x in -50.0f64..50.0, omega in 0.1f64..5.0) {
        let folded = fold_into_zone(x, omega);
        prop_assert!(folded >= -omega / 2.0 && folded < omega / 2.0);
        let k = (x - folded) / omega;
        prop_assert!((k - k.round()).abs() < 1e-9);
    }

    #[test]
    fn detuning_is_nearest_harmonic(value in -30.0f64..30.0, omega in 0.2f64..4.0) {
        let (k, delta) = detuning(value, omega);
        prop_assert!(delta >= -omega / 2.0 && delta < omega / 2.0);
        prop_assert!((value + k as f64 * omega - delta).abs() < 1e-10);
    }

    #[test]
    fn concurrence_stays_in_range(seed in any::<u64>()) {
        // Random trace-one positive matrix from a Ginibre draw.
        let mut s = seed.max(1);
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        let g = CMat4::from_fn(|_, _| c64(next(), next()));
        let mut rho = &g * g.adjoint();
        let tr = rho.trace();
        rho /= tr;
        let c = concurrence(&rho);
        prop_assert!((0.0..=1.0 + 1e-9).contains(&c), "C = {c}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn propagation_preserves_unitarity(
        eps1 in 0.3f64..3.0,
        ratio in 0.5f64..2.5,
        g in -0.3f64..0.3,
        amplitude in 0.0f64..8.0,
        tol_exp in -12.0f64..-7.0,
    ) {
        let tol = 10f64.powf(tol_exp);
        let p = SystemParams::new(eps1, ratio * eps1, 0.1, 0.15, g).unwrap();
        let d = Drive::new(amplitude, 1.0, 0.0).unwrap();
        let u = propagate(
            |t| hamiltonian_at(&p, &d, t),
            CMat4::identity(),
            0.0,
            d.period(),
            tol,
        )
        .unwrap();
        prop_assert!(
            unitarity_defect(&u) <= 10.0 * tol,
            "defect {:.2e} at tol {:.1e}",
            unitarity_defect(&u),
            tol
        );
    }

    #[test]
    fn overlap_matrix_is_doubly_stochastic(
        eps1 in 0.31f64..2.9,
        g in 0.02f64..0.25,
    ) {
        let p = SystemParams::new(eps1, 2.0 * eps1, 0.1, 0.15, g).unwrap();
        let d = Drive::new(5.0, 1.0, 0.0).unwrap();
        let sol = floquet_modes(&p, &d, 1e-10).unwrap();
        let basis = exact_uncoupled_basis(&p).unwrap();
        let table = s_matrix(&sol, &basis).unwrap();
        for i in 0..4 {
            let row: f64 = table.s[i].iter().sum();
            let col: f64 = (0..4).map(|j| table.s[j][i]).sum();
            prop_assert!((row - 1.0).abs() <= 1e-8, "row sum {row}");
            prop_assert!((col - 1.0).abs() <= 1e-8, "col sum {col}");
            let prow: f64 = table.pbar[i].iter().sum();
            let pcol: f64 = (0..4).map(|j| table.pbar[j][i]).sum();
            prop_assert!((prow - 1.0).abs() <= 1e-6 && (pcol - 1.0).abs() <= 1e-6);
            for j in 0..4 {
                prop_assert!((0.0..=1.0).contains(&table.s[i][j]));
                prop_assert!((-1e-12..=1.0 + 1e-9).contains(&table.pbar[i][j]));
            }
        }
    }
}
