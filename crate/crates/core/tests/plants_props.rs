mod common;

use gne_core::plants::{eip_probe, PlantModel, SpringLaw};
use nalgebra::DVector;
use proptest::prelude::*;

fn catalog() -> Vec<PlantModel> {
    vec![
        PlantModel::integrator(1).unwrap(),
        PlantModel::integrator(3).unwrap(),
        PlantModel::pi_cascade(1, 1.0, 0.5).unwrap(),
        PlantModel::pi_cascade(2, 2.0, 0.3).unwrap(),
        PlantModel::flexible_robot(1.0, 1.0, 1.0, SpringLaw::LinearPlusAtan).unwrap(),
        PlantModel::flexible_robot(2.0, 0.5, 0.3, SpringLaw::Linear { stiffness: 4.0 }).unwrap(),
    ]
}

fn vec_of(len: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-5.0f64..5.0, len).prop_map(DVector::from_vec)
}

proptest! {
    #![proptest_config(common::config(202))]

    #[test]
    fn regulator_is_an_equilibrium_with_the_requested_output(ybar in vec_of(3)) {
        for p in catalog() {
            let yb = ybar.rows(0, p.action_dim()).into_owned();
            let x = p.regulator(&yb);
            prop_assert!(p.drift(&x).norm() <= 1e-9);
            prop_assert!((p.output(&x) - &yb).norm() <= 1e-9);
        }
    }

    #[test]
    fn output_is_input_matrix_transpose_times_storage_gradient(x in vec_of(6)) {
        for p in catalog() {
            let xs = x.rows(0, p.state_dim()).into_owned();
            if let Some(grad) = p.storage_gradient(&xs) {
                let y = p.input_matrix().transpose() * grad;
                prop_assert!((p.output(&xs) - y).norm() <= 1e-9);
            }
        }
    }

    #[test]
    fn dissipation_inequality_holds_on_samples(
        ybar in vec_of(3),
        samples in prop::collection::vec((vec_of(6), vec_of(3)), 20),
    ) {
        for p in catalog() {
            if p.storage_gradient(&DVector::zeros(p.state_dim())).is_none() {
                continue;
            }
            let xbar = p.regulator(&ybar.rows(0, p.action_dim()).into_owned());
            let s: Vec<_> = samples
                .iter()
                .map(|(x, u)| (x.rows(0, p.state_dim()).into_owned(), u.rows(0, p.action_dim()).into_owned()))
                .collect();
            let rep = eip_probe(&p, &xbar, &s).unwrap();
            prop_assert!(rep.max_violation <= 1e-9, "{:?}: {}", p.kind(), rep.max_violation);
        }
    }
}
