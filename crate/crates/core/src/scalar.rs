//! Scalar abstraction for the numerical core.
//!
//! Grids, fields, and the descent machinery are generic over [`Scalar`] so
//! they can be instantiated at `f32` or `f64`. The crate-root aliases pin the
//! double-precision instantiation that the CLI and the certification tests
//! use; single precision is supported but far too coarse for the certified
//! tolerances and is only smoke-tested.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the core is generic over.
///
/// `num_traits::Float` supplies arithmetic and the elementary functions,
/// `FloatConst` supplies π. `Serialize` is part of the bound so report types
/// can derive serialization without repeating where-clauses at every use.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + serde::Serialize
    + Send
    + Sync
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Embeds an `f64` literal into the working scalar type.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal must embed into the scalar type")
}

/// Best-effort `f64` view of a scalar, for diagnostics and error messages.
#[inline]
pub fn as_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Compensated (Kahan) accumulator; keeps long quadrature sums accurate
/// even at single precision.
#[derive(Clone, Copy, Debug)]
pub(crate) struct KahanSum<T> {
    sum: T,
    carry: T,
}

impl<T: Scalar> KahanSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            carry: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, term: T) {
        let y = term - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> T {
        self.sum
    }
}
