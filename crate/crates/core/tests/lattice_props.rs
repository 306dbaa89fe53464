use homog::lattice::Lattice;
use proptest::prelude::*;
use std::f64::consts::PI;

fn basis_2d() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (0.5f64..3.0, -1.0f64..1.0, -1.0f64..1.0, 0.5f64..3.0).prop_map(|(a, b, c, d)| vec![vec![a, b], vec![c, d]])
}

fn regular(b: &[Vec<f64>]) -> bool {
    (b[0][0] * b[1][1] - b[0][1] * b[1][0]).abs() > 0.2
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dual_pairing_is_two_pi_delta(basis in basis_2d().prop_filter("regular", |b| regular(b))) {
        let lat = Lattice::new(basis).unwrap();
        for (l, b) in lat.dual_basis.iter().enumerate() {
            for (j, a) in lat.basis.iter().enumerate() {
                let p: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let want = if l == j { 2.0 * PI } else { 0.0 };
                prop_assert!((p - want).abs() < 1e-9);
            }
        }
        prop_assert!((lat.cell_volume * lat.dual_cell_volume - (2.0 * PI).powi(2)).abs() < 1e-8);
    }

    #[test]
    fn r0_scales_inversely(basis in basis_2d().prop_filter("regular", |b| regular(b)), c in 0.25f64..4.0) {
        let lat = Lattice::new(basis.clone()).unwrap();
        let scaled: Vec<Vec<f64>> = basis.iter().map(|v| v.iter().map(|x| c * x).collect()).collect();
        let big = Lattice::new(scaled).unwrap();
        prop_assert!((big.r0 * c - lat.r0).abs() < 1e-9 * lat.r0.max(1.0));
    }

    #[test]
    fn fold_lands_in_zone_by_a_dual_vector(
        basis in basis_2d().prop_filter("regular", |b| regular(b)),
        k in prop::collection::vec(-20.0f64..20.0, 2),
    ) {
        let lat = Lattice::new(basis).unwrap();
        let f = lat.fold(&k);
        prop_assert!(lat.in_zone(&f));
        let diff: Vec<f64> = k.iter().zip(&f).map(|(a, b)| a - b).collect();
        for u in lat.dual_coords(&diff) {
            prop_assert!((u - u.round()).abs() < 1e-8);
        }
    }

    #[test]
    fn zone_contains_the_r0_ball(theta in 0.0f64..(2.0 * PI), basis in basis_2d().prop_filter("regular", |b| regular(b))) {
        let lat = Lattice::new(basis).unwrap();
        let dir = [theta.cos(), theta.sin()];
        prop_assert!(lat.zone_extent(&dir) + 1e-12 >= lat.r0);
        let k: Vec<f64> = dir.iter().map(|x| x * lat.r0 * 0.999).collect();
        prop_assert!(lat.in_zone(&k));
    }
}

#[test]
fn collinear_basis_is_rejected() {
    assert!(Lattice::new(vec![vec![1.0, 2.0], vec![2.0, 4.0]]).is_err());
}
