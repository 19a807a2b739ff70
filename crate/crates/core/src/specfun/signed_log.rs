use std::ops::Mul;

/// A real number held as `sign * exp(log_magnitude)`.
///
/// Exact zero is `sign == 0` with `log_magnitude == -inf`; the two always travel together.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignedLog {
    log_magnitude: f64,
    sign: i8,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog {
        log_magnitude: f64::NEG_INFINITY,
        sign: 0,
    };
    pub const ONE: SignedLog = SignedLog {
        log_magnitude: 0.0,
        sign: 1,
    };

    /// Builds a value from its parts. A `-inf` magnitude or zero sign yields exact zero.
    pub fn new(log_magnitude: f64, sign: i8) -> Self {
        if sign == 0 || log_magnitude == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            SignedLog {
                log_magnitude,
                sign: sign.signum(),
            }
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            SignedLog {
                log_magnitude: x.abs().ln(),
                sign: if x > 0.0 { 1 } else { -1 },
            }
        }
    }

    pub fn to_f64(self) -> f64 {
        if self.sign == 0 {
            0.0
        } else {
            f64::from(self.sign) * self.log_magnitude.exp()
        }
    }

    pub fn log_magnitude(self) -> f64 {
        self.log_magnitude
    }

    pub fn sign(self) -> i8 {
        self.sign
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    /// Multiplies the magnitude by `exp(delta)`.
    pub fn scale_log(self, delta: f64) -> Self {
        Self::new(self.log_magnitude + delta, self.sign)
    }
}

impl Mul for SignedLog {
    type Output = SignedLog;
    fn mul(self, rhs: SignedLog) -> SignedLog {
        SignedLog::new(self.log_magnitude + rhs.log_magnitude, self.sign * rhs.sign)
    }
}
