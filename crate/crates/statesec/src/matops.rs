//! Dense real-matrix utilities and matrix-equation kernels.
//!
//! Everything operates on small dense matrices (n ≤ 10 in practice). The
//! kernels are the discrete Lyapunov solve, one step of the covariance-form
//! Riccati recursion P⁺ = LPL' − LPH'(HPH'+Q)⁻¹HPL', its information-form
//! dual Y⁺ = (L')⁻¹YL⁻¹ + (L')⁻¹H'Q⁻¹HL⁻¹, the low-rank inversion identity,
//! and integer matrix powers with an overflow guard.
//!
//! All functions are pure; symmetric outputs are re-symmetrized as
//! (M + M')/2 to suppress drift across long recursions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense real matrix used across the crate.
pub type Mat = DMatrix<f64>;
/// Dense real column vector.
pub type Vector = DVector<f64>;

/// Largest entry magnitude; 0 for empty matrices.
pub fn max_norm(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// True when every entry is finite.
pub fn all_finite(m: &Mat) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// (M + M')/2.
pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// ‖M − M'‖_max ≤ 1e-9 · (1 + ‖M‖_max).
pub fn is_symmetric(m: &Mat) -> bool {
    m.nrows() == m.ncols() && max_norm(&(m - m.transpose())) <= 1e-9 * (1.0 + max_norm(m))
}

/// Lower Cholesky factor of a symmetric matrix, or `None` when any pivot
/// falls at or below `pivot_tol` · max(1, ‖M‖_max), i.e. when M is not
/// numerically positive definite at that threshold.
pub fn cholesky_lower(m: &Mat, pivot_tol: f64) -> Option<Mat> {
    let n = m.nrows();
    if m.ncols() != n {
        return None;
    }
    let floor = pivot_tol * max_norm(m).max(1.0);
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= floor || !d.is_finite() {
            return None;
        }
        let root = d.sqrt();
        l[(j, j)] = root;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / root;
        }
    }
    Some(l)
}

/// Symmetric positive-definite test: symmetry plus factorization success
/// with pivot threshold 1e-12.
pub fn is_spd(m: &Mat) -> bool {
    is_symmetric(m) && cholesky_lower(&symmetrize(m), 1e-12).is_some()
}

/// Eigenvalue magnitudes (unsorted), via the real Schur form.
pub fn eigenvalue_magnitudes(m: &Mat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).collect()
}

/// Largest eigenvalue magnitude; 0 for empty matrices.
pub fn spectral_radius(m: &Mat) -> f64 {
    eigenvalue_magnitudes(m).into_iter().fold(0.0, f64::max)
}

/// Smallest eigenvalue of a symmetric matrix; 0 for empty matrices.
pub fn min_symmetric_eigenvalue(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// |det(M/s)| with s = max(1e-300, ‖M‖_max): a scale-free singularity score.
pub fn scaled_det(m: &Mat) -> f64 {
    let s = max_norm(m).max(1e-300);
    m.map(|x| x / s).determinant().abs()
}

/// Solve A·X = B by LU with partial pivoting.
pub fn solve(a: &Mat, b: &Mat) -> Result<Mat> {
    let x = a.clone().lu().solve(b).ok_or(Error::SingularMatrix {
        context: "LU solve",
    })?;
    if !all_finite(&x) {
        return Err(Error::SingularMatrix {
            context: "LU solve produced non-finite entries",
        });
    }
    Ok(x)
}

/// Matrix inverse by LU.
pub fn inverse(a: &Mat) -> Result<Mat> {
    let inv = a
        .clone()
        .try_inverse()
        .ok_or(Error::SingularMatrix { context: "inverse" })?;
    if !all_finite(&inv) {
        return Err(Error::SingularMatrix {
            context: "inverse produced non-finite entries",
        });
    }
    Ok(inv)
}

fn require_square_pair(a: &Mat, b: &Mat, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() || b.nrows() != b.ncols() || a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "{what}: {}x{} vs {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            ),
        });
    }
    Ok(())
}

/// Unique P ≻ 0 with P = As·P·As' + Qs, for ρ(As) < 1 and Qs ≻ 0.
///
/// Fixed-point iteration from P = Qs; each sweep contracts the error by
/// ρ(As)², so the residual stop ‖P − AsPAs' − Qs‖_max ≤ 1e-12·max(1, ‖P‖_max)
/// is reached quickly at the dimensions in scope. Caps at 10000 sweeps and
/// reports failure if the residual is still above 1e-10·max(1, ‖P‖_max).
pub fn solve_discrete_lyapunov(a_s: &Mat, q_s: &Mat) -> Result<Mat> {
    require_square_pair(a_s, q_s, "Lyapunov solve")?;
    let rho = spectral_radius(a_s);
    if rho >= 1.0 - 1e-9 {
        return Err(Error::NotStable { rho });
    }
    if !is_spd(q_s) {
        return Err(Error::NotPositiveDefinite {
            context: "Lyapunov forcing term",
        });
    }
    let mut p = q_s.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..10_000 {
        p = symmetrize(&(a_s * &p * a_s.transpose() + q_s));
        residual = max_norm(&(&p - a_s * &p * a_s.transpose() - q_s));
        if residual <= 1e-12 * max_norm(&p).max(1.0) {
            break;
        }
    }
    if residual > 1e-10 * max_norm(&p).max(1.0) {
        return Err(Error::ConvergenceFailure {
            context: "discrete Lyapunov fixed point",
            residual,
        });
    }
    Ok(p)
}

/// One covariance-form Riccati step: L·P·L' − L·P·H'(H·P·H' + Q)⁻¹H·P·L'.
pub fn riccati_bound_step(pbar: &Mat, l: &Mat, h: &Mat, q: &Mat) -> Result<Mat> {
    require_square_pair(pbar, q, "Riccati step")?;
    require_square_pair(l, h, "Riccati step weighting")?;
    if !is_spd(q) {
        return Err(Error::NotPositiveDefinite {
            context: "Riccati step noise covariance",
        });
    }
    let lp = l * pbar;
    let hp = h * pbar;
    let innovation = symmetrize(&(&hp * h.transpose() + q));
    // X = (HPH' + Q)⁻¹ · (HPL'), so the correction is (LPH')·X.
    let x = solve(&innovation, &(&hp * l.transpose()))?;
    let next = symmetrize(&(&lp * l.transpose() - &lp * h.transpose() * x));
    if !all_finite(&next) {
        return Err(Error::Overflow {
            context: "Riccati step produced non-finite entries".into(),
        });
    }
    Ok(next)
}

/// One information-form step: (L')⁻¹·Y·L⁻¹ + (L')⁻¹H'·Qinv·H·L⁻¹.
///
/// Requires L invertible (scale-free |det| above 1e-12); Y only needs to be
/// positive semidefinite.
pub fn lyapunov_info_step(ybar: &Mat, l: &Mat, h: &Mat, qinv: &Mat) -> Result<Mat> {
    require_square_pair(ybar, qinv, "information step")?;
    require_square_pair(l, h, "information step weighting")?;
    if scaled_det(l) <= 1e-12 {
        return Err(Error::SingularMatrix {
            context: "information step weighting matrix",
        });
    }
    let forcing = ybar + h.transpose() * qinv * h;
    // X = (L')⁻¹·(Y + H'Qinv H), then the result is X·L⁻¹ = ((L')⁻¹ X')'.
    let x = solve(&l.transpose(), &forcing)?;
    let next = symmetrize(&solve(&l.transpose(), &x.transpose())?.transpose());
    if !all_finite(&next) {
        return Err(Error::Overflow {
            context: "information step produced non-finite entries".into(),
        });
    }
    Ok(next)
}

/// (B + U·C·V)⁻¹ computed as B⁻¹ − B⁻¹U(C⁻¹ + VB⁻¹U)⁻¹VB⁻¹.
pub fn inversion_lemma(b: &Mat, u: &Mat, c: &Mat, v: &Mat) -> Result<Mat> {
    let b_inv = inverse(b)?;
    let c_inv = inverse(c)?;
    let inner = c_inv + v * &b_inv * u;
    let inner_inv = inverse(&inner)?;
    Ok(&b_inv - &b_inv * u * inner_inv * v * &b_inv)
}

/// Mᵐ by repeated squaring; M⁰ = I. Fails once any intermediate entry
/// magnitude exceeds 1e150 (long gaps with an expanding weighting matrix).
pub fn matrix_power(m: &Mat, power: u64) -> Result<Mat> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: format!("matrix power of {}x{}", n, m.ncols()),
        });
    }
    let guard = |candidate: &Mat| -> Result<()> {
        if max_norm(candidate) > 1e150 || !all_finite(candidate) {
            Err(Error::Overflow {
                context: format!("matrix power {power}"),
            })
        } else {
            Ok(())
        }
    };
    let mut result = Mat::identity(n, n);
    if power == 0 {
        return Ok(result);
    }
    let mut base = m.clone();
    guard(&base)?;
    let mut remaining = power;
    loop {
        if remaining & 1 == 1 {
            result = &result * &base;
            guard(&result)?;
        }
        remaining >>= 1;
        if remaining == 0 {
            break;
        }
        base = &base * &base;
        guard(&base)?;
    }
    Ok(result)
}
