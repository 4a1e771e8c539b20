//! Fixed-capacity vectors and matrices for dimensions one through three.
//!
//! All points live in a `[f64; 3]` regardless of the active dimension `n`;
//! constructors zero the unused trailing components, so dot products and
//! norms can always run over the full array.  The active dimension is
//! carried by the field or operator, not by the value.

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// A point or direction, padded with zeros beyond the active dimension.
pub type Vector = [f64; MAX_DIM];

/// A symmetric matrix, padded with zeros beyond the active dimension.
pub type Matrix = [[f64; MAX_DIM]; MAX_DIM];

/// The zero vector.
pub const ZERO: Vector = [0.0; MAX_DIM];

/// Builds a vector from the first `n` entries of `coords`, zero-padding the
/// rest.
pub fn vector(coords: &[f64]) -> Vector {
    let mut v = ZERO;
    for (slot, &c) in v.iter_mut().zip(coords) {
        *slot = c;
    }
    v
}

/// Component-wise sum.
pub fn add(a: Vector, b: Vector) -> Vector {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// Component-wise difference.
pub fn sub(a: Vector, b: Vector) -> Vector {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Scalar multiple.
pub fn scale(t: f64, a: Vector) -> Vector {
    [t * a[0], t * a[1], t * a[2]]
}

/// `x + t * d`, the workhorse for walking along rays.
pub fn axpy(x: Vector, t: f64, d: Vector) -> Vector {
    [x[0] + t * d[0], x[1] + t * d[1], x[2] + t * d[2]]
}

/// Euclidean inner product.
pub fn dot(a: Vector, b: Vector) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Euclidean norm.
pub fn norm(a: Vector) -> f64 {
    dot(a, a).sqrt()
}

/// `a / |a|`, or `None` when `|a| <= floor`.
pub fn normalize(a: Vector, floor: f64) -> Option<Vector> {
    let len = norm(a);
    if len <= floor {
        None
    } else {
        Some(scale(1.0 / len, a))
    }
}

/// Matrix-vector product.
pub fn mat_vec(m: &Matrix, v: Vector) -> Vector {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

/// Quadratic form `v^T M v`.
pub fn quad_form(m: &Matrix, v: Vector) -> f64 {
    dot(v, mat_vec(m, v))
}

/// Trace of the leading `n x n` block.
pub fn trace(m: &Matrix, n: usize) -> f64 {
    (0..n).map(|i| m[i][i]).sum()
}

/// The in-plane direction perpendicular to `axis`, for dimension two.
pub fn perp2(axis: Vector) -> Vector {
    [-axis[1], axis[0], 0.0]
}

/// Two unit vectors completing a unit `axis` to an orthonormal frame in
/// dimension three.
pub fn orthonormal_complement(axis: Vector) -> (Vector, Vector) {
    let pivot = if axis[0].abs() <= axis[1].abs().min(axis[2].abs()) {
        [1.0, 0.0, 0.0]
    } else if axis[1].abs() <= axis[2].abs() {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let raw = sub(pivot, scale(dot(pivot, axis), axis));
    let e1 = scale(1.0 / norm(raw), raw);
    let e2 = [
        axis[1] * e1[2] - axis[2] * e1[1],
        axis[2] * e1[0] - axis[0] * e1[2],
        axis[0] * e1[1] - axis[1] * e1[0],
    ];
    (e1, e2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn vector_zero_pads() {
        let v = vector(&[1.0, 2.0]);
        assert_eq!(v, [1.0, 2.0, 0.0]);
    }

    #[test]
    fn axpy_walks_rays() {
        let x = vector(&[1.0, -1.0, 0.5]);
        let d = vector(&[0.0, 1.0, 0.0]);
        assert_eq!(axpy(x, 2.0, d), [1.0, 1.0, 0.5]);
    }

    #[test]
    fn quad_form_matches_manual_expansion() {
        let m: Matrix = [[2.0, 1.0, 0.0], [1.0, 3.0, 0.0], [0.0, 0.0, 1.0]];
        let v = vector(&[1.0, 2.0, 0.0]);
        assert_relative_eq!(quad_form(&m, v), 2.0 + 4.0 + 12.0 + 0.0);
    }

    #[test]
    fn complement_is_orthonormal() {
        let axis = normalize(vector(&[0.3, -0.4, 0.87]), 0.0).unwrap();
        let (e1, e2) = orthonormal_complement(axis);
        assert_relative_eq!(norm(e1), 1.0, epsilon = 1e-14);
        assert_relative_eq!(norm(e2), 1.0, epsilon = 1e-14);
        assert_relative_eq!(dot(axis, e1), 0.0, epsilon = 1e-14);
        assert_relative_eq!(dot(axis, e2), 0.0, epsilon = 1e-14);
        assert_relative_eq!(dot(e1, e2), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn perp2_rotates_a_quarter_turn() {
        let axis = vector(&[0.6, 0.8]);
        let t = perp2(axis);
        assert_relative_eq!(dot(axis, t), 0.0);
        assert_relative_eq!(norm(t), 1.0);
        assert_eq!(t[2], 0.0);
    }

    #[test]
    fn normalize_rejects_short_vectors() {
        assert!(normalize(vector(&[1e-13, 0.0, 0.0]), 1e-12).is_none());
    }
}
