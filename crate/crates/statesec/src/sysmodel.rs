//! System validation, partitioning, and open-loop prediction.
//!
//! A system is the triple (A, Q, Σ0): dynamics x_{k+1} = A·x_k + w_{k+1}
//! with w ~ N(0, Q) and x_0 ~ N(0, Σ0). The dynamics matrix must arrive in
//! real Jordan block order with every unstable state (|λ| > 1) listed before
//! every stable state (|λ| < 1) and no coupling between the two groups; no
//! eigenvalue may sit on (or within 1e-9 of) the unit circle, and A must be
//! invertible. Validation never computes a Jordan decomposition — it only
//! checks the declared structure, since numerical Jordan forms are
//! ill-conditioned.
//!
//! Open-loop prediction is the estimate an observer forms with no channel
//! output at all: covariance P⁺ = A·P·A' + Q seeded at Σ0, or the equivalent
//! information recursion Y⁺ = G − G(G + W)⁻¹G with G = (A')⁻¹·Y·A⁻¹ and
//! W = Q⁻¹, whose fixed point Y∞ has rank n_s and encodes the steady-state
//! stable-block covariance.

use crate::error::{Error, Result};
use crate::matops::{self, Mat};

/// A validated system (A, Q, Σ0) with its unstable/stable partition.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedSystem {
    a: Mat,
    q: Mat,
    sigma0: Mat,
    n_u: usize,
    n_s: usize,
    eig_mags: Vec<f64>,
}

impl PartitionedSystem {
    /// Dynamics matrix A.
    pub fn a(&self) -> &Mat {
        &self.a
    }

    /// Process noise covariance Q.
    pub fn q(&self) -> &Mat {
        &self.q
    }

    /// Initial state covariance Σ0.
    pub fn sigma0(&self) -> &Mat {
        &self.sigma0
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Number of unstable states (|λ| > 1), listed first.
    pub fn n_u(&self) -> usize {
        self.n_u
    }

    /// Number of stable states (|λ| < 1), listed last.
    pub fn n_s(&self) -> usize {
        self.n_s
    }

    /// Per-state eigenvalue magnitudes in state order.
    pub fn eig_mags(&self) -> &[f64] {
        &self.eig_mags
    }

    /// Unstable diagonal block A_u (n_u × n_u).
    pub fn a_u(&self) -> Mat {
        self.a.view((0, 0), (self.n_u, self.n_u)).into_owned()
    }

    /// Stable diagonal block A_s (n_s × n_s).
    pub fn a_s(&self) -> Mat {
        self.a
            .view((self.n_u, self.n_u), (self.n_s, self.n_s))
            .into_owned()
    }

    /// Stable-block noise covariance Q_s (n_s × n_s).
    pub fn q_s(&self) -> Mat {
        self.q
            .view((self.n_u, self.n_u), (self.n_s, self.n_s))
            .into_owned()
    }

    /// Cross noise covariance Q₁₂ (n_u × n_s).
    pub fn q_12(&self) -> Mat {
        self.q
            .view((0, self.n_u), (self.n_u, self.n_s))
            .into_owned()
    }
}

/// Steady state of the open-loop information recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyInfo {
    /// n×n information matrix: zero except the lower-right stable block,
    /// which equals P_s_inf⁻¹.
    pub y_inf: Mat,
    /// Steady-state stable-block covariance (n_s × n_s), the unique
    /// positive-definite solution of P = A_s·P·A_s' + Q_s.
    pub p_s_inf: Mat,
}

/// Per-state |λ| of a real-Jordan-ordered matrix, read off the diagonal and
/// the 2×2 rotation blocks. Also validates the lower-triangular structure:
/// subdiagonal entries may be nonzero only inside a well-formed rotation
/// block [[re, im], [-im, re]].
fn jordan_state_magnitudes(a: &Mat) -> Result<Vec<f64>> {
    let n = a.nrows();
    let scale = matops::max_norm(a).max(1.0);
    let mut mags = Vec::with_capacity(n);
    let mut rotation_subdiag = vec![false; n];
    let mut i = 0;
    while i < n {
        if i + 1 < n && a[(i + 1, i)] != 0.0 {
            let re = a[(i, i)];
            let im = a[(i, i + 1)];
            let re_ok = (a[(i + 1, i + 1)] - re).abs() <= 1e-12 * scale;
            let im_ok = (a[(i + 1, i)] + im).abs() <= 1e-12 * scale;
            if !re_ok || !im_ok {
                return Err(Error::NotBlockOrdered {
                    context: format!("rows {i}..={} are not a rotation block", i + 1),
                });
            }
            let mag = re.hypot(im);
            mags.push(mag);
            mags.push(mag);
            rotation_subdiag[i + 1] = true;
            i += 2;
        } else {
            mags.push(a[(i, i)].abs());
            i += 1;
        }
    }
    for row in 0..n {
        for col in 0..row {
            if a[(row, col)] != 0.0 && !(col + 1 == row && rotation_subdiag[row]) {
                return Err(Error::NotBlockOrdered {
                    context: format!("nonzero entry below the diagonal at ({row}, {col})"),
                });
            }
        }
    }
    Ok(mags)
}

/// Validate (A, Q, Σ0) and infer the unstable/stable partition.
///
/// Rejects eigenvalues within 1e-9 of the unit circle, singular A
/// (|λ| < 1e-9), indefinite Q or Σ0, interleaved unstable/stable states,
/// and any coupling between the unstable and stable blocks.
pub fn validate_system(a: &Mat, q: &Mat, sigma0: &Mat) -> Result<PartitionedSystem> {
    let n = a.nrows();
    if n == 0 {
        return Err(Error::DimensionMismatch {
            context: "empty system".into(),
        });
    }
    if a.ncols() != n
        || q.nrows() != n
        || q.ncols() != n
        || sigma0.nrows() != n
        || sigma0.ncols() != n
    {
        return Err(Error::DimensionMismatch {
            context: format!(
                "A {}x{}, Q {}x{}, Sigma0 {}x{}",
                a.nrows(),
                a.ncols(),
                q.nrows(),
                q.ncols(),
                sigma0.nrows(),
                sigma0.ncols()
            ),
        });
    }
    if !matops::is_spd(q) {
        return Err(Error::NotPositiveDefinite {
            context: "process noise covariance Q",
        });
    }
    if !matops::is_spd(sigma0) {
        return Err(Error::NotPositiveDefinite {
            context: "initial covariance Sigma0",
        });
    }
    let eig_mags = jordan_state_magnitudes(a)?;
    for &mag in &eig_mags {
        if (mag - 1.0).abs() <= 1e-9 {
            return Err(Error::UnitCircleEigenvalue { magnitude: mag });
        }
        if mag < 1e-9 {
            return Err(Error::SingularA { magnitude: mag });
        }
    }
    let n_u = eig_mags.iter().take_while(|&&m| m > 1.0).count();
    if let Some(pos) = eig_mags[n_u..].iter().position(|&m| m > 1.0) {
        return Err(Error::NotBlockOrdered {
            context: format!("unstable state {} listed after a stable state", n_u + pos),
        });
    }
    for i in 0..n_u {
        for j in n_u..n {
            if a[(i, j)] != 0.0 || a[(j, i)] != 0.0 {
                return Err(Error::NotBlockOrdered {
                    context: format!("unstable/stable blocks coupled at ({i}, {j})"),
                });
            }
        }
    }
    Ok(PartitionedSystem {
        a: a.clone(),
        q: q.clone(),
        sigma0: sigma0.clone(),
        n_u,
        n_s: n - n_u,
        eig_mags,
    })
}

/// Ā = A + δ·Σᵢ eᵢeᵢ' over the given zero diagonal positions.
///
/// Each index must name a (numerically) zero diagonal entry; use this to
/// nudge zero eigenvalues off the origin before validation. δ is never
/// chosen automatically — pick it at the call site.
pub fn perturb_singular(a: &Mat, indices: &[usize], delta: f64) -> Result<Mat> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            context: format!("perturbing {}x{}", a.nrows(), a.ncols()),
        });
    }
    if delta <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "perturbation delta must be positive, got {delta}"
        )));
    }
    let mut out = a.clone();
    for &idx in indices {
        if idx >= a.nrows() || a[(idx, idx)].abs() >= 1e-9 {
            return Err(Error::BadIndex { index: idx });
        }
        out[(idx, idx)] += delta;
    }
    Ok(out)
}

/// One open-loop covariance step: A·P·A' + Q, re-symmetrized.
/// Seed the recursion at P = Σ0.
pub fn open_loop_cov_step(p: &Mat, sys: &PartitionedSystem) -> Result<Mat> {
    if p.nrows() != sys.n() || p.ncols() != sys.n() {
        return Err(Error::DimensionMismatch {
            context: format!("open-loop step on {}x{}", p.nrows(), p.ncols()),
        });
    }
    Ok(matops::symmetrize(
        &(sys.a() * p * sys.a().transpose() + sys.q()),
    ))
}

/// L = A + Q·(A')⁻¹·Y, the secrecy weighting induced by an information
/// matrix Y.
pub(crate) fn secrecy_weighting(sys: &PartitionedSystem, y: &Mat) -> Result<Mat> {
    Ok(sys.a() + sys.q() * matops::solve(&sys.a().transpose(), y)?)
}

/// Steady state of the open-loop information recursion.
///
/// Solves the stable-block Lyapunov equation, assembles Y∞ with the inverse
/// in its lower-right block, and checks that Y∞ is indeed a fixed point of
/// the information recursion induced by the weighting L = A + Q(A')⁻¹Y∞
/// before returning.
pub fn steady_info_matrix(sys: &PartitionedSystem) -> Result<SteadyInfo> {
    let n = sys.n();
    let mut y_inf = Mat::zeros(n, n);
    let p_s_inf = if sys.n_s() == 0 {
        Mat::zeros(0, 0)
    } else {
        let p = matops::solve_discrete_lyapunov(&sys.a_s(), &sys.q_s())?;
        let y_s = matops::inverse(&p)?;
        y_inf
            .view_mut((sys.n_u(), sys.n_u()), (sys.n_s(), sys.n_s()))
            .copy_from(&matops::symmetrize(&y_s));
        p
    };
    let l = secrecy_weighting(sys, &y_inf)?;
    let h = sys.a() - &l;
    let q_inv = matops::inverse(sys.q())?;
    let image = matops::lyapunov_info_step(&y_inf, &l, &h, &q_inv)?;
    let residual = matops::max_norm(&(&image - &y_inf));
    if residual > 1e-9 * matops::max_norm(&y_inf).max(1.0) {
        return Err(Error::ConvergenceFailure {
            context: "steady-state information fixed point",
            residual,
        });
    }
    Ok(SteadyInfo { y_inf, p_s_inf })
}

/// One open-loop information step: Y⁺ = G − G(G + W)⁻¹G with
/// G = (A')⁻¹·Y·A⁻¹ and W = Q⁻¹. Accepts any Y ⪰ 0 (the steady state Y∞ is
/// singular whenever unstable states exist); the inner solve only needs
/// G + W ≻ 0. Dual to [`open_loop_cov_step`] through matrix inversion.
pub fn open_loop_info_step(y: &Mat, sys: &PartitionedSystem) -> Result<Mat> {
    if y.nrows() != sys.n() || y.ncols() != sys.n() {
        return Err(Error::DimensionMismatch {
            context: format!("open-loop information step on {}x{}", y.nrows(), y.ncols()),
        });
    }
    let a_t = sys.a().transpose();
    let x = matops::solve(&a_t, y)?;
    let g = matops::symmetrize(&matops::solve(&a_t, &x.transpose())?.transpose());
    let w = matops::inverse(sys.q())?;
    let correction = matops::solve(&(&g + &w), &g)?;
    let next = matops::symmetrize(&(&g - &g * correction));
    if !matops::all_finite(&next) {
        return Err(Error::Overflow {
            context: "open-loop information step produced non-finite entries".into(),
        });
    }
    Ok(next)
}

/// Limit behavior of the open-loop information recursion's gain.
#[derive(Debug, Clone)]
pub struct GainLimits {
    /// ‖K_h − K∞‖_max at the final iterate, K∞ = −(L')⁻¹H'.
    pub k_gain_error: f64,
    /// ‖(F − K_h·F) − (L')⁻¹‖_max at the final iterate, F = (A')⁻¹.
    pub closed_map_error: f64,
    /// Gain K at the final iterate, K = G(G + W)⁻¹.
    pub k_gain: Mat,
    /// Limit gain −(L')⁻¹H'.
    pub k_limit: Mat,
    /// Limit closed map (L')⁻¹.
    pub closed_map_limit: Mat,
}

/// Iterate the information recursion from Σ0⁻¹ for `horizon` steps and
/// compare the final gain K = G(G + W)⁻¹ and closed map F − K·F against
/// their limits −(L')⁻¹H' and (L')⁻¹.
pub fn gain_limit_diagnostics(sys: &PartitionedSystem, horizon: usize) -> Result<GainLimits> {
    if horizon == 0 {
        return Err(Error::InvalidArgument(
            "gain diagnostics need at least one step".into(),
        ));
    }
    let steady = steady_info_matrix(sys)?;
    let l = secrecy_weighting(sys, &steady.y_inf)?;
    let h = sys.a() - &l;
    let lt_inv = matops::inverse(&l.transpose())?;
    let k_limit = -(&lt_inv * h.transpose());
    let mut y = matops::inverse(sys.sigma0())?;
    for _ in 0..horizon {
        y = open_loop_info_step(&y, sys)?;
    }
    let f = matops::inverse(&sys.a().transpose())?;
    let g = matops::symmetrize(&(&f * &y * f.transpose()));
    let w = matops::inverse(sys.q())?;
    // K = G(G+W)⁻¹ = ((G+W)⁻¹G)' since both factors are symmetric.
    let k_gain = matops::solve(&(&g + &w), &g)?.transpose();
    let closed = &f - &k_gain * &f;
    Ok(GainLimits {
        k_gain_error: matops::max_norm(&(&k_gain - &k_limit)),
        closed_map_error: matops::max_norm(&(&closed - &lt_inv)),
        k_gain,
        k_limit,
        closed_map_limit: lt_inv,
    })
}
