//! Floating-point abstraction shared by every numeric module.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar used for tensors, networks and environments: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Significant decimal digits needed for a lossless text round trip.
    const SIGNIFICANT_DIGITS: usize;

    /// Converts an `f64` constant. Every finite `f64` maps to some value of
    /// the target type, so this never fails for literals.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `C ← A·B + C` for an `m×k` by `k×n` product with arbitrary row and
    /// column strides (in elements), so transposed operands need no copy.
    #[allow(clippy::too_many_arguments)]
    fn gemm_acc(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        a_strides: (isize, isize),
        b: &[Self],
        b_strides: (isize, isize),
        c: &mut [Self],
        c_strides: (isize, isize),
    );
}

/// Checks that every strided access of a `rows×cols` view stays in `len`.
fn view_fits(len: usize, rows: usize, cols: usize, (rs, cs): (isize, isize)) -> bool {
    if rows == 0 || cols == 0 {
        return true;
    }
    rs >= 0 && cs >= 0 && (rows - 1) * (rs as usize) + (cols - 1) * (cs as usize) < len
}

macro_rules! impl_scalar {
    ($t:ty, $digits:expr, $gemm:path) => {
        impl Scalar for $t {
            const SIGNIFICANT_DIGITS: usize = $digits;

            fn gemm_acc(
                m: usize,
                k: usize,
                n: usize,
                a: &[Self],
                a_strides: (isize, isize),
                b: &[Self],
                b_strides: (isize, isize),
                c: &mut [Self],
                c_strides: (isize, isize),
            ) {
                assert!(view_fits(a.len(), m, k, a_strides), "lhs view out of bounds");
                assert!(view_fits(b.len(), k, n, b_strides), "rhs view out of bounds");
                assert!(view_fits(c.len(), m, n, c_strides), "output view out of bounds");
                // SAFETY: the three views were bounds-checked above and `c`
                // is borrowed mutably, so it cannot alias `a` or `b`.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        1.0,
                        a.as_ptr(),
                        a_strides.0,
                        a_strides.1,
                        b.as_ptr(),
                        b_strides.0,
                        b_strides.1,
                        1.0,
                        c.as_mut_ptr(),
                        c_strides.0,
                        c_strides.1,
                    )
                }
            }
        }
    };
}

impl_scalar!(f32, 9, matrixmultiply::sgemm);
impl_scalar!(f64, 17, matrixmultiply::dgemm);

/// Formats `x` in scientific notation with enough digits to parse back to
/// the identical bit pattern.
pub fn format_exact<T: Scalar>(x: T) -> String {
    format!("{:.*e}", T::SIGNIFICANT_DIGITS - 1, x)
}
