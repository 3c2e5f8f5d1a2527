//! Numeric abstraction for pricing so the DAG and brute-force routes can be
//! compared exactly on rational duals.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use num_rational::Ratio;
use num_traits::Zero;

pub trait Scalar:
    Copy
    + Debug
    + PartialOrd
    + Zero
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    fn from_int(v: i64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f64 {
    fn from_int(v: i64) -> Self {
        v as f64
    }

    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for Ratio<i64> {
    fn from_int(v: i64) -> Self {
        Ratio::from_integer(v)
    }

    fn to_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}
