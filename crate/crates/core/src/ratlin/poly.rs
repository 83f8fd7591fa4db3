use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::de::{self, SeqAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// Polynomial in `s` with complex coefficients in ascending powers.
///
/// Trailing (highest-power) exact zeros are trimmed on construction, so the
/// zero polynomial is the empty coefficient list.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.last().is_some_and(|c| *c == Complex64::new(0.0, 0.0)) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![c])
    }

    pub fn one() -> Self {
        Self::constant(Complex64::new(1.0, 0.0))
    }

    /// The monomial `s`.
    pub fn s() -> Self {
        Self::from_real(&[0.0, 1.0])
    }

    /// `lead · Π (s - r)`.
    pub fn from_roots(roots: &[Complex64], lead: Complex64) -> Self {
        let mut p = Self::constant(lead);
        for &r in roots {
            p = &p * &Self::new(vec![-r, Complex64::new(1.0, 0.0)]);
        }
        p
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs.last().copied().unwrap_or_default()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    pub fn norm_inf(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Drop high-order coefficients below `tol * ‖p‖∞`.
    pub fn trim_relative(&self, tol: f64) -> Self {
        let floor = tol * self.norm_inf();
        let mut coeffs = self.coeffs.clone();
        while coeffs.last().is_some_and(|c| c.norm() <= floor) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    /// `Σ |c_k| |s|^k`, the magnitude scale used for relative pole tests.
    pub fn eval_abs(&self, s: Complex64) -> f64 {
        let r = s.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn scale(&self, k: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * k).collect())
    }

    /// Long division: `self = q · divisor + r` with `deg r < deg divisor`.
    pub fn div_rem(&self, divisor: &Self) -> Result<(Self, Self)> {
        let dd = divisor.degree().ok_or(Error::ZeroDenominator)?;
        let mut rem = self.coeffs.clone();
        if rem.len() <= dd {
            return Ok((Self::zero(), self.clone()));
        }
        let lead = divisor.leading();
        let mut quot = vec![Complex64::new(0.0, 0.0); rem.len() - dd];
        for k in (0..quot.len()).rev() {
            let q = rem[k + dd] / lead;
            quot[k] = q;
            for (j, &d) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= q * d;
            }
            rem[k + dd] = Complex64::new(0.0, 0.0);
        }
        rem.truncate(dd);
        Ok((Self::new(quot), Self::new(rem)))
    }

    /// All roots with multiplicity, by companion-matrix eigenvalues after
    /// radius balancing, polished with Newton steps on the original
    /// coefficients. Ordered by descending real part, then imaginary part.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let n = match self.degree() {
            Some(n) if n >= 1 => n,
            _ => return Err(Error::NoRoots),
        };
        // Exact zero roots from vanishing low-order coefficients.
        let shift = self.coeffs.iter().take_while(|c| c.norm() == 0.0).count();
        let mut roots = vec![Complex64::new(0.0, 0.0); shift];
        let reduced = &self.coeffs[shift..];
        let m = n - shift;
        if m > 0 {
            let lead = reduced[m];
            // s = rho·t maps the root radius to O(1).
            let rho = (0..m)
                .map(|k| (reduced[k] / lead).norm().powf(1.0 / (m - k) as f64))
                .fold(0.0_f64, f64::max);
            let rho = if rho > 0.0 && rho.is_finite() { rho } else { 1.0 };
            let monic: Vec<Complex64> = (0..m)
                .map(|k| reduced[k] / lead * rho.powi(k as i32 - m as i32))
                .collect();
            let mut companion = CMatrix::zeros(m, m);
            for i in 1..m {
                companion[(i, i - 1)] = Complex64::new(1.0, 0.0);
            }
            for (i, &c) in monic.iter().enumerate() {
                companion[(i, m - 1)] = -c;
            }
            let eig = linalg::eigenvalues(&companion)?;
            roots.extend(eig.into_iter().map(|t| t * rho));
        }
        let dp = self.derivative();
        for r in roots.iter_mut() {
            *r = self.polish(&dp, *r);
        }
        linalg::sort_desc_re(&mut roots);
        Ok(roots)
    }

    fn polish(&self, dp: &Self, mut r: Complex64) -> Complex64 {
        let mut best = self.eval(r).norm();
        for _ in 0..4 {
            let d = dp.eval(r);
            if d.norm() == 0.0 || best == 0.0 {
                break;
            }
            let cand = r - self.eval(r) / d;
            let val = self.eval(cand).norm();
            if val.is_finite() && val < best {
                r = cand;
                best = val;
            } else {
                break;
            }
        }
        r
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let zero = Complex64::new(0.0, 0.0);
        Polynomial::new(
            (0..n)
                .map(|k| {
                    self.coeffs.get(k).copied().unwrap_or(zero) + rhs.coeffs.get(k).copied().unwrap_or(zero)
                })
                .collect(),
        )
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| -c).collect())
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() != 0.0)
            .map(|(k, c)| match k {
                0 => format!("({c})"),
                1 => format!("({c})s"),
                _ => format!("({c})s^{k}"),
            })
            .collect();
        write!(f, "{}", terms.join(" + "))
    }
}

// Coefficients travel as a list of `[re, im]` pairs; bare numbers are accepted
// on input as real coefficients.
impl Serialize for Polynomial {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.coeffs.iter().map(|c| [c.re, c.im]).collect();
        pairs.serialize(serializer)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Scalar {
    Real(f64),
    Pair([f64; 2]),
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct CoeffVisitor;
        impl<'de> Visitor<'de> for CoeffVisitor {
            type Value = Polynomial;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a list of coefficients (numbers or [re, im] pairs), ascending powers")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Polynomial, A::Error> {
                let mut coeffs = Vec::new();
                while let Some(s) = seq.next_element::<Scalar>()? {
                    coeffs.push(match s {
                        Scalar::Real(x) => Complex64::new(x, 0.0),
                        Scalar::Pair([re, im]) => Complex64::new(re, im),
                    });
                }
                if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                    return Err(de::Error::custom("non-finite coefficient"));
                }
                Ok(Polynomial::new(coeffs))
            }
        }
        deserializer.deserialize_seq(CoeffVisitor)
    }
}

/// Free-function form of [`Polynomial::roots`].
pub fn poly_roots(p: &Polynomial) -> Result<Vec<Complex64>> {
    p.roots()
}
