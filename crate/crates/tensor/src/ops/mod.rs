//! Differentiable primitives. Each op validates its shape contract and
//! returns a dimension error naming the offending shapes instead of
//! broadcasting implicitly.

pub mod attention;
pub mod conv;
pub mod elementwise;
pub mod linalg;
pub mod norm;
pub mod reduce;
pub mod shape;

/// `(outer, axis extent, inner)` split of a row-major shape around `axis`.
pub(crate) fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}
