//! Q4.27 fixed-point arithmetic.
//!
//! A 32-bit two's-complement word with 1 sign bit, 4 integer bits and 27
//! fraction bits. Every operation takes an [`OverflowPolicy`] that decides what
//! happens when the exact result leaves `[-16, 16 - 2^-27]`.

use std::fmt;

use thiserror::Error;

/// Number of fraction bits.
pub const FRAC_BITS: u32 = 27;

/// Value of one raw unit, `2^-27`.
pub const EPSILON: f64 = 1.0 / (1u64 << FRAC_BITS) as f64;

const SCALE: f64 = (1u64 << FRAC_BITS) as f64;

/// What to do when a result does not fit in 32 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum OverflowPolicy {
    /// Two's-complement wrap-around, like a bare hardware adder.
    #[default]
    Wrap,
    /// Clamp to the nearest representable value.
    Saturate,
    /// Report an error.
    Trap,
}

impl std::str::FromStr for OverflowPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "wrap" => Ok(Self::Wrap),
            "saturate" => Ok(Self::Saturate),
            "trap" => Ok(Self::Trap),
            other => Err(format!("unknown overflow policy `{other}`")),
        }
    }
}

impl fmt::Display for OverflowPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Wrap => "wrap",
            Self::Saturate => "saturate",
            Self::Trap => "trap",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum FxError {
    #[error("{0} is outside the Q4.27 range [-16, 16)")]
    OutOfRange(f64),
    #[error("fixed-point overflow in {0}")]
    Overflow(&'static str),
}

/// A Q4.27 fixed-point number.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Fx32(i32);

impl Fx32 {
    pub const ZERO: Fx32 = Fx32(0);
    pub const ONE: Fx32 = Fx32(1 << FRAC_BITS);
    pub const MIN: Fx32 = Fx32(i32::MIN);
    pub const MAX: Fx32 = Fx32(i32::MAX);

    #[inline]
    pub const fn from_raw(raw: i32) -> Self {
        Fx32(raw)
    }

    #[inline]
    pub const fn to_raw(self) -> i32 {
        self.0
    }

    /// Converts a real number with round-to-nearest-even.
    ///
    /// Values outside the range are wrapped, clamped or rejected according to
    /// `policy`. Non-finite input is always rejected.
    pub fn from_real(r: f64, policy: OverflowPolicy) -> Result<Self, FxError> {
        if !r.is_finite() {
            return Err(FxError::OutOfRange(r));
        }
        let scaled = (r * SCALE).round_ties_even();
        if scaled >= i32::MIN as f64 && scaled <= i32::MAX as f64 {
            return Ok(Fx32(scaled as i32));
        }
        match policy {
            OverflowPolicy::Trap => Err(FxError::OutOfRange(r)),
            OverflowPolicy::Saturate => Ok(if scaled < 0.0 { Self::MIN } else { Self::MAX }),
            OverflowPolicy::Wrap => {
                let m = scaled.rem_euclid(4_294_967_296.0);
                Ok(Fx32(m as u64 as u32 as i32))
            }
        }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.0 as f64 * EPSILON
    }

    #[inline]
    fn resolve(wide: i64, policy: OverflowPolicy, op: &'static str) -> Result<Self, FxError> {
        match i32::try_from(wide) {
            Ok(v) => Ok(Fx32(v)),
            Err(_) => match policy {
                OverflowPolicy::Wrap => Ok(Fx32(wide as i32)),
                OverflowPolicy::Saturate => Ok(if wide < 0 { Self::MIN } else { Self::MAX }),
                OverflowPolicy::Trap => Err(FxError::Overflow(op)),
            },
        }
    }

    #[inline]
    pub fn add(self, rhs: Self, policy: OverflowPolicy) -> Result<Self, FxError> {
        Self::resolve(self.0 as i64 + rhs.0 as i64, policy, "add")
    }

    #[inline]
    pub fn sub(self, rhs: Self, policy: OverflowPolicy) -> Result<Self, FxError> {
        Self::resolve(self.0 as i64 - rhs.0 as i64, policy, "sub")
    }

    /// Full 64-bit product, arithmetic shift right by 27 (rounds toward -inf).
    #[inline]
    pub fn mul(self, rhs: Self, policy: OverflowPolicy) -> Result<Self, FxError> {
        Self::resolve((self.0 as i64 * rhs.0 as i64) >> FRAC_BITS, policy, "mul")
    }

    #[inline]
    pub fn neg(self, policy: OverflowPolicy) -> Result<Self, FxError> {
        Self::resolve(-(self.0 as i64), policy, "neg")
    }

    /// Multiply by 0.5 through an arithmetic shift. Never overflows.
    #[inline]
    pub const fn half(self) -> Self {
        Fx32(self.0 >> 1)
    }

    pub fn wrapping_add(self, rhs: Self) -> Self {
        Fx32(self.0.wrapping_add(rhs.0))
    }

    pub fn wrapping_mul(self, rhs: Self) -> Self {
        Fx32(((self.0 as i64 * rhs.0 as i64) >> FRAC_BITS) as i32)
    }

    /// Eight-digit upper-case hexadecimal of the raw word.
    pub fn to_hex(self) -> String {
        format!("{:08X}", self.0 as u32)
    }
}

impl fmt::Debug for Fx32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fx32({} = 0x{})", self.to_f64(), self.to_hex())
    }
}

impl fmt::Display for Fx32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.to_f64(), f)
    }
}
