//! Checks the leg dynamics at a few configurations: passivity of `Ṁ − 2C`,
//! inverse dynamics against the assembled terms, and force recovery from torques.

use contact_imm::dynamics::{contact_jacobian, dynamics_terms, inverse_dynamics, mass_matrix, LegModel};
use contact_imm::observers::pseudo_wrench;
use nalgebra::{DVector, Matrix3xX, Vector3};

fn main() -> contact_imm::Result<()> {
    let model = LegModel::default();
    let h = 1e-6;
    for (q, qd) in [([0.0, 0.8, -1.6], [0.5, -1.0, 2.0]), ([0.3, 0.2, -0.9], [-2.0, 0.4, 1.5])] {
        let terms = dynamics_terms(&model, &q, &qd)?;
        let step = |s: f64| -> Vec<f64> { q.iter().zip(&qd).map(|(a, b)| a + s * b).collect() };
        let mdot = (mass_matrix(&model, &step(h)) - mass_matrix(&model, &step(-h))) / (2.0 * h);
        let skew = (mdot - &terms.coriolis - terms.coriolis.transpose()).norm();

        let qdd = [1.0, -2.0, 0.5];
        let rnea = inverse_dynamics(&model, &q, &qd, &qdd);
        let assembled = &terms.mass * DVector::from_column_slice(&qdd) + terms.coriolis.clone() * DVector::from_column_slice(&qd) + &terms.gravity;

        let (jac, foot) = contact_jacobian(&model, &q)?;
        let f0 = Vector3::new(-15.0, 2.0, 30.0);
        let still = dynamics_terms(&model, &q, &[0.0; 3])?;
        let f = pseudo_wrench(&still.mass, &jac, &Matrix3xX::zeros(3), &DVector::zeros(3), &(-(jac.transpose() * f0)))?;

        println!("q = {q:?}, foot at {:.3?}", foot.as_slice());
        println!("  ‖Ṁ − C − Cᵀ‖ = {skew:.2e}");
        println!("  RNEA vs M q̈ + C q̇ + g: {:.2e}", (rnea - assembled).amax());
        println!("  force recovery error: {:.2e} N (cond {:.1})", (f.force - f0).norm(), f.condition);
    }
    Ok(())
}
