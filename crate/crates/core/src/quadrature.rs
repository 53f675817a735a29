//! Quadrature rules on triangles and intervals.

use crate::error::{Error, Result};
use crate::mesh::Point;

/// A rule on the reference simplex in barycentric coordinates. Weights sum to one,
/// so integrals are `area * sum(w_i f(x_i))`.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

fn orbit(points: &mut Vec<[f64; 3]>, weights: &mut Vec<f64>, a: f64, w: f64) {
    let b = 1.0 - 2.0 * a;
    points.extend([[a, a, b], [a, b, a], [b, a, a]]);
    weights.extend([w, w, w]);
}

impl TriangleRule {
    pub fn centroid() -> Self {
        TriangleRule { points: vec![[1.0 / 3.0; 3]], weights: vec![1.0] }
    }

    /// Three interior points, exact for degree 2.
    pub fn degree2() -> Self {
        let mut r = TriangleRule { points: Vec::new(), weights: Vec::new() };
        orbit(&mut r.points, &mut r.weights, 1.0 / 6.0, 1.0 / 3.0);
        r
    }

    /// Symmetric 6-point rule, exact for degree 4.
    #[allow(clippy::excessive_precision)]
    pub fn degree4() -> Self {
        let mut r = TriangleRule { points: Vec::new(), weights: Vec::new() };
        orbit(
            &mut r.points,
            &mut r.weights,
            0.445_948_490_915_964_886_318_329_253_883,
            0.223_381_589_678_011_465_695_007_008_433,
        );
        orbit(
            &mut r.points,
            &mut r.weights,
            0.091_576_213_509_770_743_459_571_463_402_2,
            0.109_951_743_655_321_867_638_326_324_900,
        );
        r
    }

    /// 7-point rule, exact for degree 5.
    pub fn degree5() -> Self {
        let s = 15f64.sqrt();
        let mut r = TriangleRule { points: vec![[1.0 / 3.0; 3]], weights: vec![9.0 / 40.0] };
        orbit(&mut r.points, &mut r.weights, (6.0 - s) / 21.0, (155.0 - s) / 1200.0);
        orbit(&mut r.points, &mut r.weights, (6.0 + s) / 21.0, (155.0 + s) / 1200.0);
        r
    }

    /// Collapsed (conical product) Gauss rule with `n * n` points, exact for degree `2n - 2`.
    pub fn conical(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let mut r = TriangleRule { points: Vec::with_capacity(n * n), weights: Vec::with_capacity(n * n) };
        for i in 0..n {
            let u = x[i];
            for j in 0..n {
                let v = x[j] * (1.0 - u);
                r.points.push([1.0 - u - v, u, v]);
                // Reference area is 1/2, weights normalised to sum one.
                r.weights.push(2.0 * w[i] * w[j] * (1.0 - u));
            }
        }
        r
    }

    /// Smallest built-in rule exact for polynomials of the given degree.
    pub fn with_degree(order: usize) -> Result<Self> {
        match order {
            0 => Err(Error::UnsupportedQuadOrder(0)),
            1 => Ok(Self::centroid()),
            2 => Ok(Self::degree2()),
            3 | 4 => Ok(Self::degree4()),
            5 => Ok(Self::degree5()),
            6..=40 => Ok(Self::conical(order / 2 + 1)),
            _ => Err(Error::UnsupportedQuadOrder(order)),
        }
    }

    pub fn integrate<T, F>(&self, corners: &[Point; 3], area: f64, mut f: F) -> T
    where
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
        F: FnMut(Point, [f64; 3]) -> T,
    {
        let mut acc = T::default();
        for (b, &w) in self.points.iter().zip(&self.weights) {
            let x = corners[0] * b[0] + corners[1] * b[1] + corners[2] * b[2];
            acc = acc + f(x, *b) * w;
        }
        acc * area
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Splits a triangle into pieces graded geometrically toward corner `vertex`.
///
/// Each level peels a trapezoid off the current triangle, shrinking it by `ratio`
/// about the corner; the innermost piece is returned last.
pub fn graded_pieces(corners: &[Point; 3], vertex: usize, levels: usize, ratio: f64) -> Vec<[Point; 3]> {
    let p = corners[vertex];
    let mut b = corners[(vertex + 1) % 3];
    let mut c = corners[(vertex + 2) % 3];
    let mut pieces = Vec::with_capacity(2 * levels + 1);
    for _ in 0..levels {
        let bs = p + (b - p) * ratio;
        let cs = p + (c - p) * ratio;
        pieces.push([bs, b, c]);
        pieces.push([bs, c, cs]);
        b = bs;
        c = cs;
    }
    pieces.push([p, b, c]);
    pieces
}

pub fn triangle_area(c: &[Point; 3]) -> f64 {
    0.5 * ((c[1] - c[0]).perp(&(c[2] - c[0]))).abs()
}
