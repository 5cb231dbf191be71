//! Compensated (two-float) arithmetic for the encode/decode chain and the
//! eavesdropper's belief.
//!
//! Reference-difference coding is algebraically exact but numerically
//! ill-conditioned in two places. The decoder replays products of weighting
//! powers whose spectral radius exceeds the plant's, so rounding injected
//! into a packet or a stored reference is amplified by (ρ(L)/ρ(A_u))^k; in
//! plain f64 the reconstruction error at step k grows past 1e-10 relative
//! within a few dozen steps. The eavesdropper's conditional covariance mixes
//! unstable diagonals that grow like ρ(L)^2k with order-one stable entries
//! inside one matrix, so every f64 product leaks ε·(unstable scale) of
//! absolute error into the stable block — order one within a hundred steps.
//! Carrying packets, decoded references, and the filter belief as unevaluated
//! hi + lo pairs pushes each injection from ε down to ε², which keeps both
//! chains at real-arithmetic quality over every horizon the crate targets.

use crate::error::{Error, Result};
use crate::matops::{Mat, Vector};

/// Error-free sum: s + e equals a + b exactly. (Knuth's TwoSum.)
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Error-free sum assuming |a| ≥ |b|.
#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let e = b - (s - a);
    (s, e)
}

/// Error-free product via fused multiply-add.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

/// A double word: the value is hi + lo with |lo| ≤ ulp(hi)/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl Dd {
    #[inline]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn zero() -> Dd {
        Dd::from_f64(0.0)
    }

    #[inline]
    pub fn add(self, other: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, other.hi);
        let (hi, lo) = quick_two_sum(s, e + self.lo + other.lo);
        Dd { hi, lo }
    }

    #[inline]
    pub fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    #[inline]
    pub fn sub(self, other: Dd) -> Dd {
        self.add(other.neg())
    }

    #[inline]
    pub fn mul(self, other: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, other.hi);
        let (hi, lo) = quick_two_sum(p, e + self.hi * other.lo + self.lo * other.hi);
        Dd { hi, lo }
    }

    /// Long division with two correction terms, accurate to ~ε² relative.
    #[inline]
    pub fn div(self, other: Dd) -> Dd {
        let q1 = self.hi / other.hi;
        let r1 = self.sub(other.mul(Dd::from_f64(q1)));
        let q2 = r1.hi / other.hi;
        let r2 = r1.sub(other.mul(Dd::from_f64(q2)));
        let q3 = r2.hi / other.hi;
        let (s, e) = two_sum(q1, q2);
        let (hi, lo) = quick_two_sum(s, e + q3);
        Dd { hi, lo }
    }

    /// Exact scaling by a power of two (hi and lo scale independently).
    #[inline]
    pub fn half(self) -> Dd {
        Dd {
            hi: 0.5 * self.hi,
            lo: 0.5 * self.lo,
        }
    }
}

/// A vector of double words, stored as parallel hi/lo columns.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CompVec {
    pub hi: Vector,
    pub lo: Vector,
}

impl CompVec {
    pub fn from_f64(v: &Vector) -> CompVec {
        CompVec {
            hi: v.clone(),
            lo: Vector::zeros(v.len()),
        }
    }

    pub fn len(&self) -> usize {
        self.hi.len()
    }

    #[inline]
    pub fn get(&self, i: usize) -> Dd {
        Dd {
            hi: self.hi[i],
            lo: self.lo[i],
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, d: Dd) {
        self.hi[i] = d.hi;
        self.lo[i] = d.lo;
    }

    pub fn add(&self, other: &CompVec) -> CompVec {
        let mut out = CompVec::from_f64(&Vector::zeros(self.len()));
        for i in 0..self.len() {
            out.set(i, self.get(i).add(other.get(i)));
        }
        out
    }

    /// v − self, with v an exact f64 vector.
    pub fn sub_from(&self, v: &Vector) -> CompVec {
        let mut out = CompVec::from_f64(&Vector::zeros(self.len()));
        for i in 0..self.len() {
            out.set(i, Dd::from_f64(v[i]).sub(self.get(i)));
        }
        out
    }

    pub fn segment(&self, start: usize, len: usize) -> CompVec {
        CompVec {
            hi: self.hi.rows(start, len).into_owned(),
            lo: self.lo.rows(start, len).into_owned(),
        }
    }

    pub fn set_segment(&mut self, start: usize, v: &CompVec) {
        self.hi.rows_mut(start, v.len()).copy_from(&v.hi);
        self.lo.rows_mut(start, v.len()).copy_from(&v.lo);
    }
}

/// A matrix of double words, stored as parallel hi/lo blocks.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CompMat {
    pub hi: Mat,
    pub lo: Mat,
}

impl CompMat {
    pub fn from_f64(m: &Mat) -> CompMat {
        CompMat {
            hi: m.clone(),
            lo: Mat::zeros(m.nrows(), m.ncols()),
        }
    }

    pub fn zeros(r: usize, c: usize) -> CompMat {
        CompMat::from_f64(&Mat::zeros(r, c))
    }

    pub fn identity(n: usize) -> CompMat {
        CompMat::from_f64(&Mat::identity(n, n))
    }

    pub fn transpose(&self) -> CompMat {
        CompMat {
            hi: self.hi.transpose(),
            lo: self.lo.transpose(),
        }
    }

    pub fn add(&self, other: &CompMat) -> CompMat {
        let mut out = CompMat::zeros(self.hi.nrows(), self.hi.ncols());
        for i in 0..self.hi.nrows() {
            for j in 0..self.hi.ncols() {
                out.set(i, j, self.get(i, j).add(other.get(i, j)));
            }
        }
        out
    }

    pub fn sub(&self, other: &CompMat) -> CompMat {
        let mut out = CompMat::zeros(self.hi.nrows(), self.hi.ncols());
        for i in 0..self.hi.nrows() {
            for j in 0..self.hi.ncols() {
                out.set(i, j, self.get(i, j).sub(other.get(i, j)));
            }
        }
        out
    }

    /// (M + Mᵀ)/2, with the halving exact.
    pub fn symmetrize(&self) -> CompMat {
        let n = self.hi.nrows();
        let mut out = CompMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, self.get(i, j).add(self.get(j, i)).half());
            }
        }
        out
    }

    pub fn block(&self, i: usize, j: usize, r: usize, c: usize) -> CompMat {
        CompMat {
            hi: self.hi.view((i, j), (r, c)).into_owned(),
            lo: self.lo.view((i, j), (r, c)).into_owned(),
        }
    }

    pub fn set_block(&mut self, i: usize, j: usize, b: &CompMat) {
        let (r, c) = (b.hi.nrows(), b.hi.ncols());
        self.hi.view_mut((i, j), (r, c)).copy_from(&b.hi);
        self.lo.view_mut((i, j), (r, c)).copy_from(&b.lo);
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Dd {
        Dd {
            hi: self.hi[(i, j)],
            lo: self.lo[(i, j)],
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, d: Dd) {
        self.hi[(i, j)] = d.hi;
        self.lo[(i, j)] = d.lo;
    }

    pub fn matmul(&self, other: &CompMat) -> CompMat {
        let (n, m) = (self.hi.nrows(), other.hi.ncols());
        let inner = self.hi.ncols();
        let mut out = CompMat::from_f64(&Mat::zeros(n, m));
        for i in 0..n {
            for j in 0..m {
                let mut acc = Dd::zero();
                for k in 0..inner {
                    acc = acc.add(self.get(i, k).mul(other.get(k, j)));
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn matvec(&self, v: &CompVec) -> CompVec {
        let n = self.hi.nrows();
        let mut out = CompVec::from_f64(&Vector::zeros(n));
        for i in 0..n {
            let mut acc = Dd::zero();
            for k in 0..v.len() {
                acc = acc.add(self.get(i, k).mul(v.get(k)));
            }
            out.set(i, acc);
        }
        out
    }
}

/// base^exp by repeated squaring in compensated arithmetic, with the same
/// 1e150 magnitude guard as the plain-f64 power.
pub(crate) fn comp_power(base: &Mat, exp: u64) -> Result<CompMat> {
    let mut result = CompMat::identity(base.nrows());
    if exp == 0 {
        return Ok(result);
    }
    let mut b = CompMat::from_f64(base);
    let mut e = exp;
    loop {
        if e & 1 == 1 {
            result = result.matmul(&b);
            guard(&result, exp)?;
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        b = b.matmul(&b);
        guard(&b, exp)?;
    }
    Ok(result)
}

fn guard(m: &CompMat, exp: u64) -> Result<()> {
    let mag = crate::matops::max_norm(&m.hi);
    if !mag.is_finite() || mag > 1e150 {
        return Err(Error::Overflow {
            context: format!("matrix power with exponent {exp} exceeds 1e150"),
        });
    }
    Ok(())
}

/// Solve A·X = B by Gaussian elimination with partial pivoting, carried out
/// entirely in compensated arithmetic (pivots are chosen on the hi words).
pub(crate) fn comp_solve(a: &CompMat, b: &CompMat, context: &'static str) -> Result<CompMat> {
    let n = a.hi.nrows();
    debug_assert_eq!(a.hi.ncols(), n);
    debug_assert_eq!(b.hi.nrows(), n);
    let m = b.hi.ncols();
    let mut aa = a.clone();
    let mut bb = b.clone();
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if aa.get(r, col).hi.abs() > aa.get(piv, col).hi.abs() {
                piv = r;
            }
        }
        let pivot_mag = aa.get(piv, col).hi.abs();
        if pivot_mag.is_nan() || pivot_mag < f64::MIN_POSITIVE {
            return Err(Error::SingularMatrix { context });
        }
        if piv != col {
            for j in 0..n {
                let tmp = aa.get(col, j);
                aa.set(col, j, aa.get(piv, j));
                aa.set(piv, j, tmp);
            }
            for j in 0..m {
                let tmp = bb.get(col, j);
                bb.set(col, j, bb.get(piv, j));
                bb.set(piv, j, tmp);
            }
        }
        let d = aa.get(col, col);
        for r in (col + 1)..n {
            let f = aa.get(r, col).div(d);
            aa.set(r, col, Dd::zero());
            if f.hi == 0.0 && f.lo == 0.0 {
                continue;
            }
            for j in (col + 1)..n {
                aa.set(r, j, aa.get(r, j).sub(f.mul(aa.get(col, j))));
            }
            for j in 0..m {
                bb.set(r, j, bb.get(r, j).sub(f.mul(bb.get(col, j))));
            }
        }
    }
    let mut x = CompMat::zeros(n, m);
    for j in 0..m {
        for r in (0..n).rev() {
            let mut acc = bb.get(r, j);
            for c in (r + 1)..n {
                acc = acc.sub(aa.get(r, c).mul(x.get(c, j)));
            }
            x.set(r, j, acc.div(aa.get(r, r)));
        }
    }
    Ok(x)
}
