use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly::Polynomial;
use crate::error::{Error, Result};

/// Relative magnitude below which a denominator value counts as a pole.
pub const POLE_TOL: f64 = 1e-12;

/// `num(s) / den(s)`. Arithmetic never cancels common factors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRational", into = "RawRational")]
pub struct RationalFunction {
    num: Polynomial,
    den: Polynomial,
}

#[derive(Serialize, Deserialize)]
struct RawRational {
    num: Polynomial,
    den: Polynomial,
}

impl TryFrom<RawRational> for RationalFunction {
    type Error = Error;
    fn try_from(raw: RawRational) -> Result<Self> {
        RationalFunction::new(raw.num, raw.den)
    }
}

impl From<RationalFunction> for RawRational {
    fn from(r: RationalFunction) -> Self {
        RawRational { num: r.num, den: r.den }
    }
}

impl RationalFunction {
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        Ok(Self { num, den })
    }

    pub fn from_poly(p: Polynomial) -> Self {
        Self { num: p, den: Polynomial::one() }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_poly(Polynomial::from_real(&[c]))
    }

    pub fn zero() -> Self {
        Self::from_poly(Polynomial::zero())
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    /// Convenience constructor from real ascending coefficients.
    pub fn from_real(num: &[f64], den: &[f64]) -> Result<Self> {
        Self::new(Polynomial::from_real(num), Polynomial::from_real(den))
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Evaluate; `None` when `s` is a pole within [`POLE_TOL`].
    pub fn try_eval(&self, s: Complex64) -> Option<Complex64> {
        let d = self.den.eval(s);
        if d.norm() <= POLE_TOL * self.den.eval_abs(s) {
            return None;
        }
        Some(self.num.eval(s) / d)
    }

    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        self.try_eval(s).ok_or(Error::Pole { row: 0, col: 0, s_re: s.re, s_im: s.im })
    }

    pub fn add(&self, rhs: &Self) -> Self {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        if self.den == rhs.den {
            return Self { num: &self.num + &rhs.num, den: self.den.clone() };
        }
        if rhs.den.is_constant() {
            let k = rhs.den.leading();
            return Self { num: &self.num.scale(k) + &(&rhs.num * &self.den), den: self.den.scale(k) };
        }
        if self.den.is_constant() {
            return rhs.add(self);
        }
        Self {
            num: &(&self.num * &rhs.den) + &(&rhs.num * &self.den),
            den: &self.den * &rhs.den,
        }
    }

    pub fn neg(&self) -> Self {
        Self { num: -&self.num, den: self.den.clone() }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return Self::zero();
        }
        Self { num: &self.num * &rhs.num, den: &self.den * &rhs.den }
    }

    pub fn div(&self, rhs: &Self) -> Result<Self> {
        if rhs.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        Ok(Self { num: &self.num * &rhs.den, den: &self.den * &rhs.num })
    }

    pub fn scale(&self, k: f64) -> Self {
        Self { num: self.num.scale(Complex64::new(k, 0.0)), den: self.den.clone() }
    }
}
