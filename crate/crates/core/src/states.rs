//! Binary state enumeration and log-space arithmetic.
//!
//! A state of `q` binary variables is packed into an integer index: element
//! `s` of the bit vector is bit `s` of the index (element 0 is the least
//! significant bit).

use crate::error::{Error, Result, MAX_BINARY};

/// A configuration of `q` binary variables, packed into an integer index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitState {
    index: u32,
    q: u8,
}

impl BitState {
    pub fn from_index(index: u32, q: usize) -> Result<Self> {
        check_capacity(q)?;
        if q < 32 && (index as u64) >= (1u64 << q) {
            return Err(Error::InvalidInput(format!(
                "state index {index} out of range for q = {q}"
            )));
        }
        Ok(BitState { index, q: q as u8 })
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        check_capacity(bits.len())?;
        let index = bits
            .iter()
            .enumerate()
            .fold(0u32, |acc, (s, &b)| acc | ((b as u32) << s));
        Ok(BitState {
            index,
            q: bits.len() as u8,
        })
    }

    /// Builds a state from 0/1 values; anything else is rejected.
    pub fn from_u8(bits: &[u8]) -> Result<Self> {
        let bools = bits
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::InvalidInput(format!("binary value {other} not in {{0, 1}}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_bits(&bools)
    }

    #[inline]
    pub fn index(&self) -> usize {
        self.index as usize
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.q as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.q == 0
    }

    #[inline]
    pub fn bit(&self, s: usize) -> bool {
        (self.index >> s) & 1 == 1
    }

    pub fn bits(&self) -> Vec<bool> {
        (0..self.len()).map(|s| self.bit(s)).collect()
    }

    /// The state as a 0.0/1.0 vector.
    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.len()).map(|s| bit_f64(self.index as usize, s)).collect()
    }
}

#[inline]
pub(crate) fn bit_f64(index: usize, s: usize) -> f64 {
    ((index >> s) & 1) as f64
}

pub(crate) fn check_capacity(q: usize) -> Result<()> {
    if q > MAX_BINARY {
        Err(Error::Capacity { q })
    } else {
        Ok(())
    }
}

/// All `2^q` states in ascending index order.
pub fn enumerate_states(q: usize) -> Result<Vec<BitState>> {
    check_capacity(q)?;
    Ok((0..1u32 << q)
        .map(|index| BitState { index, q: q as u8 })
        .collect())
}

/// Max-shifted log-sum-exp. Returns `-inf` for an empty slice or all `-inf`.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Streaming log-sum-exp accumulator.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSumExp {
    max: f64,
    sum: f64,
}

impl LogSumExp {
    pub fn new() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    #[inline]
    pub fn push(&mut self, v: f64) {
        if v == f64::NEG_INFINITY {
            return;
        }
        if v <= self.max {
            self.sum += (v - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - v).exp() + 1.0;
            self.max = v;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
