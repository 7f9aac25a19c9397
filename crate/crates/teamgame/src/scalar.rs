//! Scalar abstraction shared by every numeric routine in the crate.

use nalgebra::RealField;
use num_traits::FromPrimitive;

/// Real scalar type the solver runs on.
///
/// `f64` and `f32` both qualify. The bound collects what the linear algebra
/// needs (`RealField`), conversion from literals (`FromPrimitive`), and `Copy`
/// so matrix code stays free of explicit clones.
pub trait Real: RealField + FromPrimitive + Copy {}

impl<T: RealField + FromPrimitive + Copy> Real for T {}

/// Converts an `f64` constant into the working scalar type.
///
/// Panics only if the target type cannot represent ordinary finite constants,
/// which no `RealField` implementation in practice refuses.
#[inline]
pub fn scalar<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("finite constant must be representable")
}

/// Converts a working scalar back to `f64` for reporting and serialization.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    nalgebra::try_convert(x).unwrap_or(f64::NAN)
}

/// Nested-array view of a matrix for JSON output, rows outermost.
pub fn matrix_rows<T: Real>(m: &nalgebra::DMatrix<T>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| to_f64(m[(i, j)])).collect())
        .collect()
}

/// Rebuilds a matrix from nested rows, checking the expected shape.
pub fn matrix_from_rows<T: Real>(
    name: &str,
    rows: &[Vec<f64>],
    nrows: usize,
    ncols: usize,
) -> crate::error::Result<nalgebra::DMatrix<T>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(crate::error::Error::Dimension(format!(
            "{name} must be {nrows}x{ncols}, got {}x{}",
            rows.len(),
            rows.first().map_or(0, Vec::len)
        )));
    }
    Ok(nalgebra::DMatrix::from_fn(nrows, ncols, |i, j| scalar(rows[i][j])))
}
