use homog::cell::solve_cell;
use homog::estimates::cauchy::{cauchy_dense_oracle, cauchy_error, CauchyData, ForcingPiece, ModeVector};
use homog::fields::{random_trig_field, BlochSymbol, FieldBundle};
use homog::lattice::Lattice;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn block_solution_matches_dense_torus(
        seed in 0u64..1000,
        scale in 2usize..=4,
        tau in 0.2f64..2.0,
        a in -1.0f64..1.0,
        b in -1.0f64..1.0,
        j in 1i64..5,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lat = Lattice::cubic(1);
        let g = random_trig_field(&lat, 1, 2, &[true], true, &mut rng).unwrap();
        let bundle = FieldBundle::new(BlochSymbol::gradient(1).unwrap(), g).unwrap();
        let g0 = solve_cell(&bundle.g, &bundle.symbol, 16).unwrap().g0;
        let data = CauchyData {
            phi: vec![ModeVector { mode: vec![j], value: vec![[a, b]] }, ModeVector::real(vec![-1], &[0.5])],
            psi: vec![ModeVector::real(vec![2], &[b])],
            forcing: vec![ForcingPiece { start: 0.0, end: tau / 2.0, data: vec![ModeVector::real(vec![1], &[a])] }],
        };
        let blocks = cauchy_error(&bundle, &g0, &data, tau, scale, 1.0, 4).unwrap();
        let dense = cauchy_dense_oracle(&bundle, &g0, &data, tau, scale, 1.0, 4).unwrap();
        prop_assert!((blocks.error - dense.error).abs() < 1e-8, "{} vs {}", blocks.error, dense.error);
        prop_assert!((blocks.data_norm - dense.data_norm).abs() < 1e-12);
    }
}
