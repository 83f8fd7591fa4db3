use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly::Polynomial;
use super::rational::RationalFunction;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Largest dimension handled by the fraction-free cofactor routines.
pub const MAX_SYMBOLIC_DIM: usize = 8;

/// Relative distance at which a closed-loop root is flagged as coinciding
/// with an open-loop denominator root.
pub const CANCELLATION_TOL: f64 = 1e-6;

/// Dense matrix of rational functions in `s`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<RationalFunction>>", into = "Vec<Vec<RationalFunction>>")]
pub struct TransferMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<RationalFunction>,
}

impl TryFrom<Vec<Vec<RationalFunction>>> for TransferMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<RationalFunction>>) -> Result<Self> {
        TransferMatrix::from_rows(rows)
    }
}

impl From<TransferMatrix> for Vec<Vec<RationalFunction>> {
    fn from(m: TransferMatrix) -> Self {
        m.entries.chunks(m.cols).map(|r| r.to_vec()).collect()
    }
}

impl TransferMatrix {
    pub fn from_rows(rows: Vec<Vec<RationalFunction>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(|row| row.len()).unwrap_or(0);
        if r == 0 || c == 0 {
            return Err(Error::Shape("transfer matrix must be non-empty".into()));
        }
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged transfer matrix rows".into()));
        }
        Ok(Self { rows: r, cols: c, entries: rows.into_iter().flatten().collect() })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> RationalFunction) -> Self {
        let entries = (0..rows * cols).map(|k| f(k / cols, k % cols)).collect();
        Self { rows, cols, entries }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { RationalFunction::one() } else { RationalFunction::zero() })
    }

    /// `f(s)·I`.
    pub fn scalar_identity(n: usize, f: &RationalFunction) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { f.clone() } else { RationalFunction::zero() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &RationalFunction {
        &self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[RationalFunction] {
        &self.entries
    }

    /// Entry-wise evaluation.
    pub fn eval(&self, s: Complex64) -> Result<CMatrix> {
        let mut out = CMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self
                    .get(i, j)
                    .try_eval(s)
                    .ok_or(Error::Pole { row: i, col: j, s_re: s.re, s_im: s.im })?;
            }
        }
        Ok(out)
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::Shape(format!(
                "cannot add {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(Self::from_fn(self.rows, self.cols, |i, j| self.get(i, j).add(rhs.get(i, j))))
    }

    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(Self::from_fn(self.rows, rhs.cols, |i, j| {
            (0..self.cols).fold(RationalFunction::zero(), |acc, k| acc.add(&self.get(i, k).mul(rhs.get(k, j))))
        }))
    }

    fn check_square_small(&self) -> Result<usize> {
        if self.rows != self.cols {
            return Err(Error::Shape(format!("{}x{} matrix is not square", self.rows, self.cols)));
        }
        if self.rows > MAX_SYMBOLIC_DIM {
            return Err(Error::DimensionTooLarge { dim: self.rows, max: MAX_SYMBOLIC_DIM });
        }
        Ok(self.rows)
    }

    /// Distinct non-constant denominators, in first-appearance order.
    fn distinct_denominators(&self) -> Vec<&Polynomial> {
        let mut out: Vec<&Polynomial> = Vec::new();
        for e in &self.entries {
            if !e.is_zero() && !e.den().is_constant() && !out.contains(&e.den()) {
                out.push(e.den());
            }
        }
        out
    }

    /// Polynomial matrix `d·M` for a common denominator `d` given as a list
    /// of factors, where every entry denominator is one of the factors (up to
    /// a constant) or divides their product.
    fn clear_denominators(&self, d: &Polynomial) -> Result<Vec<Vec<Polynomial>>> {
        let mut out = vec![vec![Polynomial::zero(); self.cols]; self.rows];
        for i in 0..self.rows {
            for j in 0..self.cols {
                let e = self.get(i, j);
                if e.is_zero() {
                    continue;
                }
                let (q, r) = d.div_rem(e.den())?;
                if r.norm_inf() > 1e-8 * d.norm_inf() {
                    return Err(Error::Numerical(format!(
                        "common denominator does not divide entry ({i}, {j}) (remainder {:.3e})",
                        r.norm_inf()
                    )));
                }
                out[i][j] = &e.num().clone() * &q;
            }
        }
        Ok(out)
    }

    /// Exact rational determinant and inverse via fraction-free cofactor
    /// expansion. The inverse entries all carry the determinant's cleared
    /// numerator as denominator.
    pub fn det_inv(&self) -> Result<(RationalFunction, TransferMatrix)> {
        let n = self.check_square_small()?;
        // Product of distinct denominators: exact, possibly non-minimal.
        let d = self
            .distinct_denominators()
            .into_iter()
            .fold(Polynomial::one(), |acc, den| &acc * den);
        let e = self.clear_denominators(&d)?;
        let det_e = poly_det(&e);
        if is_negligible(&det_e, &e) {
            return Err(Error::StructurallySingular);
        }
        let d_pow = (0..n).fold(Polynomial::one(), |acc, _| &acc * &d);
        let det = RationalFunction::new(det_e.clone(), d_pow)?;
        let mut inv = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                // inv_ij = d · cof_ji(E) / det(E)
                let minor: Vec<Vec<Polynomial>> = (0..n)
                    .filter(|&r| r != j)
                    .map(|r| (0..n).filter(|&c| c != i).map(|c| e[r][c].clone()).collect())
                    .collect();
                let mut cof = if n == 1 { Polynomial::one() } else { poly_det(&minor) };
                if (i + j) % 2 == 1 {
                    cof = -&cof;
                }
                row.push(RationalFunction::new(&d * &cof, det_e.clone())?);
            }
            inv.push(row);
        }
        Ok((det, TransferMatrix::from_rows(inv)?))
    }

    /// Least common denominator of all entries, assembled from merged
    /// denominator roots (maximum multiplicity per root cluster).
    pub fn least_common_denominator(&self) -> Result<Polynomial> {
        let mut clusters: Vec<(Complex64, usize)> = Vec::new();
        let mut all_real = true;
        for den in self.distinct_denominators() {
            all_real &= den.coeffs().iter().all(|c| c.im == 0.0);
            let mut local: Vec<(Complex64, usize)> = Vec::new();
            for r in den.roots()? {
                match local.iter_mut().find(|(v, _)| roots_coincide(*v, r)) {
                    Some(entry) => entry.1 += 1,
                    None => local.push((r, 1)),
                }
            }
            for (r, m) in local {
                match clusters.iter_mut().find(|(v, _)| roots_coincide(*v, r)) {
                    Some(entry) => entry.1 = entry.1.max(m),
                    None => clusters.push((r, m)),
                }
            }
        }
        let roots: Vec<Complex64> = clusters.iter().flat_map(|&(r, m)| std::iter::repeat_n(r, m)).collect();
        let lcd = Polynomial::from_roots(&roots, Complex64::new(1.0, 0.0));
        if all_real {
            Ok(Polynomial::new(lcd.coeffs().iter().map(|c| Complex64::new(c.re, 0.0)).collect()))
        } else {
            Ok(lcd)
        }
    }

    /// Closed-loop poles of unity negative feedback around `self` (the loop
    /// gain `L`): roots of the numerator of `det(I + L)` after clearing the
    /// least common denominator of the entries.
    pub fn closed_loop_poles(&self) -> Result<ClosedLoopPoles> {
        let n = self.check_square_small()?;
        let m = self.add(&TransferMatrix::identity(n))?;
        let d = m.least_common_denominator()?;
        let e = m.clear_denominators(&d)?;
        let char_poly = poly_det(&e);
        if is_negligible(&char_poly, &e) {
            return Err(Error::DegenerateLoop);
        }
        let char_poly = char_poly.trim_relative(1e-14);
        let den_roots = if d.is_constant() { Vec::new() } else { d.roots()? };
        let roots = if char_poly.is_constant() { Vec::new() } else { char_poly.roots()? };
        let poles = roots
            .into_iter()
            .map(|value| ClosedLoopPole {
                value,
                potential_cancellation: den_roots.iter().any(|&q| roots_coincide(q, value)),
            })
            .collect();
        Ok(ClosedLoopPoles { poles, characteristic: char_poly, denominator_roots: den_roots })
    }
}

fn roots_coincide(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= CANCELLATION_TOL * a.norm().max(b.norm()).max(1e-6)
}

/// `true` when `p` is zero relative to the Hadamard-type scale of `e`.
fn is_negligible(p: &Polynomial, e: &[Vec<Polynomial>]) -> bool {
    if p.is_zero() {
        return true;
    }
    let scale: f64 = e
        .iter()
        .map(|row| row.iter().map(|x| x.norm_inf()).fold(0.0, f64::max))
        .product();
    p.norm_inf() <= 1e-12 * scale
}

/// Determinant of a polynomial matrix by Laplace expansion memoized over
/// column subsets: every term is a product of entries, no division.
pub fn poly_det(m: &[Vec<Polynomial>]) -> Polynomial {
    let n = m.len();
    if n == 0 {
        return Polynomial::one();
    }
    let full = (1usize << n) - 1;
    let mut memo: Vec<Option<Polynomial>> = vec![None; 1 << n];
    memo[0] = Some(Polynomial::one());
    fn go(m: &[Vec<Polynomial>], mask: usize, memo: &mut Vec<Option<Polynomial>>) -> Polynomial {
        if let Some(p) = &memo[mask] {
            return p.clone();
        }
        let n = m.len();
        let row = n - mask.count_ones() as usize;
        let mut acc = Polynomial::zero();
        let mut seen = 0;
        for col in 0..n {
            if mask & (1 << col) == 0 {
                continue;
            }
            let entry = &m[row][col];
            if !entry.is_zero() {
                let sub = go(m, mask & !(1 << col), memo);
                let term = entry * &sub;
                acc = if seen % 2 == 0 { &acc + &term } else { &acc - &term };
            }
            seen += 1;
        }
        memo[mask] = Some(acc.clone());
        acc
    }
    go(m, full, &mut memo)
}

#[derive(Clone, Debug)]
pub struct ClosedLoopPole {
    pub value: Complex64,
    /// Coincides with a root of the cleared denominator.
    pub potential_cancellation: bool,
}

#[derive(Clone, Debug)]
pub struct ClosedLoopPoles {
    /// Ordered by descending real part.
    pub poles: Vec<ClosedLoopPole>,
    pub characteristic: Polynomial,
    pub denominator_roots: Vec<Complex64>,
}

impl ClosedLoopPoles {
    /// Root of maximal real part among those not flagged as cancellations;
    /// falls back to all roots when every one is flagged.
    pub fn dominant(&self) -> Option<Complex64> {
        self.poles
            .iter()
            .find(|p| !p.potential_cancellation)
            .or(self.poles.first())
            .map(|p| p.value)
    }
}
