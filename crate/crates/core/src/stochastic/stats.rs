//! Order-independent accumulation for mergeable Monte Carlo tallies.
//!
//! Partial sums from different workers must merge to the same bits no
//! matter how the path-index range was partitioned, and floating-point
//! addition rounds differently under different association. Samples are
//! therefore snapped to a fixed `2⁻⁶²` grid and summed in 128-bit
//! integers: integer addition is exactly associative and commutative,
//! so any reduction tree yields the same total. The snapping error
//! (about `2e-19` per sample) sits far below Monte Carlo noise at any
//! feasible path count.

use num_complex::Complex64;

use crate::error::{Error, Result};

const GRID: f64 = (1u64 << 62) as f64;
/// Samples at or above this magnitude would overflow the tick range.
const MAX_SAMPLE: f64 = 9.2e18; // 2^63

/// A sum of `f64` samples on the fixed grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FixedPointSum {
    ticks: i128,
}

impl FixedPointSum {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) -> Result<()> {
        if !v.is_finite() || v.abs() >= MAX_SAMPLE {
            return Err(Error::Numeric(format!(
                "sample {v:e} outside accumulator range"
            )));
        }
        let ticks = (v * GRID).round() as i128;
        self.ticks = self
            .ticks
            .checked_add(ticks)
            .ok_or_else(|| Error::Numeric("accumulator overflow".into()))?;
        Ok(())
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        self.ticks = self
            .ticks
            .checked_add(other.ticks)
            .ok_or_else(|| Error::Numeric("accumulator overflow".into()))?;
        Ok(())
    }

    pub fn value(&self) -> f64 {
        self.ticks as f64 / GRID
    }
}

/// Real and imaginary parts summed on the fixed grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ComplexFixedSum {
    re: FixedPointSum,
    im: FixedPointSum,
}

impl ComplexFixedSum {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn add(&mut self, z: Complex64) -> Result<()> {
        self.re.add(z.re)?;
        self.im.add(z.im)
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        self.re.merge(&other.re)?;
        self.im.merge(&other.im)
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn snapping_error_is_tiny() {
        let mut s = FixedPointSum::zero();
        let vals = [0.1, -0.7, 3.25, 1e-9, -2.5e-7];
        for &v in &vals {
            s.add(v).unwrap();
        }
        let plain: f64 = vals.iter().sum();
        assert!((s.value() - plain).abs() < 1e-15);
    }

    #[test]
    fn rejects_out_of_range_samples() {
        let mut s = FixedPointSum::zero();
        assert!(s.add(f64::NAN).is_err());
        assert!(s.add(1e19).is_err());
        assert!(s.add(f64::INFINITY).is_err());
    }

    proptest! {
        #[test]
        fn order_independent(values in proptest::collection::vec(-1e3f64..1e3, 1..50), split in 0usize..50) {
            let split = split.min(values.len());
            // sequential
            let mut whole = FixedPointSum::zero();
            for &v in &values {
                whole.add(v).unwrap();
            }
            // split at an arbitrary point, merge the parts
            let mut left = FixedPointSum::zero();
            let mut right = FixedPointSum::zero();
            for &v in &values[..split] {
                left.add(v).unwrap();
            }
            for &v in &values[split..] {
                right.add(v).unwrap();
            }
            let mut merged_lr = left;
            merged_lr.merge(&right).unwrap();
            let mut merged_rl = right;
            merged_rl.merge(&left).unwrap();
            prop_assert_eq!(whole, merged_lr);
            prop_assert_eq!(merged_lr, merged_rl);
        }

        #[test]
        fn reversal_is_bit_exact(values in proptest::collection::vec(-1e6f64..1e6, 1..40)) {
            let mut fwd = FixedPointSum::zero();
            let mut rev = FixedPointSum::zero();
            for &v in &values {
                fwd.add(v).unwrap();
            }
            for &v in values.iter().rev() {
                rev.add(v).unwrap();
            }
            prop_assert_eq!(fwd, rev);
        }
    }
}
