use nalgebra::{Matrix2, Vector2};

use crate::mesh::Point;

/// Rotation by +90 degrees, `(a, b) -> (-b, a)`.
pub fn rot(v: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-v.y, v.x)
}

/// Gradients of the three barycentric coordinates of a counter-clockwise triangle.
pub fn barycentric_gradients(c: &[Point; 3], area: f64) -> [Vector2<f64>; 3] {
    let s = 0.5 / area;
    std::array::from_fn(|i| {
        let p = c[(i + 1) % 3];
        let q = c[(i + 2) % 3];
        Vector2::new(p.y - q.y, q.x - p.x) * s
    })
}

pub fn barycentric_coordinates(c: &[Point; 3], x: Point) -> [f64; 3] {
    let det = (c[1] - c[0]).perp(&(c[2] - c[0]));
    let l1 = (x - c[0]).perp(&(c[2] - c[0])) / det;
    let l2 = (c[1] - c[0]).perp(&(x - c[0])) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// `v^T M v`.
pub fn quad_form(m: &Matrix2<f64>, v: &Vector2<f64>) -> f64 {
    v.dot(&(m * v))
}

/// `u^T M v`.
pub fn bilinear(u: &Vector2<f64>, m: &Matrix2<f64>, v: &Vector2<f64>) -> f64 {
    u.dot(&(m * v))
}

/// Eigenvalues `(min, max)` of a symmetric 2x2 matrix.
pub fn sym_eigenvalues(m: &Matrix2<f64>) -> (f64, f64) {
    let mean = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let half_diff = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let rad = half_diff.hypot(off);
    (mean - rad, mean + rad)
}
