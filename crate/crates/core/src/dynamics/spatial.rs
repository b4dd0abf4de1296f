//! Plücker-coordinate helpers. All quantities are expressed in world axes about
//! the world origin, with motion vectors ordered `[angular; linear]`.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};

pub(crate) fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Motion cross-product operator `v ×`.
pub(crate) fn crm(v: &Vector6<f64>) -> Matrix6<f64> {
    let w = skew(&v.fixed_rows::<3>(0).into_owned());
    let u = skew(&v.fixed_rows::<3>(3).into_owned());
    let mut out = Matrix6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&w);
    out.fixed_view_mut::<3, 3>(3, 0).copy_from(&u);
    out.fixed_view_mut::<3, 3>(3, 3).copy_from(&w);
    out
}

/// Force cross-product operator `v ×*`.
pub(crate) fn crf(v: &Vector6<f64>) -> Matrix6<f64> {
    -crm(v).transpose()
}

/// Spatial inertia about the world origin of a body with mass `m`, COM at `c`
/// and rotational inertia `inertia_com` (world axes, about the COM).
pub(crate) fn body_inertia(m: f64, c: &Vector3<f64>, inertia_com: &Matrix3<f64>) -> Matrix6<f64> {
    let cx = skew(c);
    let mut out = Matrix6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(inertia_com + m * cx * cx.transpose()));
    out.fixed_view_mut::<3, 3>(0, 3).copy_from(&(m * cx));
    out.fixed_view_mut::<3, 3>(3, 0).copy_from(&(m * cx.transpose()));
    out.fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&(m * Matrix3::identity()));
    out
}

/// Motion subspace of a revolute joint with unit axis `axis` through point `origin`.
pub(crate) fn revolute_subspace(axis: &Vector3<f64>, origin: &Vector3<f64>) -> Vector6<f64> {
    let lin = origin.cross(axis);
    Vector6::new(axis.x, axis.y, axis.z, lin.x, lin.y, lin.z)
}
