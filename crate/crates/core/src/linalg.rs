//! Dense complex linear algebra shared by the simulator and the estimator.
//!
//! Vectors and matrices are plain `nalgebra` dynamic types over `Complex64`.
//! Every routine here is a pure function of its inputs.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{dim_mismatch, Error, Result};

pub type C64 = Complex64;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

/// Unitarity tolerance on `‖U†U − I‖_F`.
pub const UNITARITY_TOL: f64 = 1e-10;
/// Relative Hermiticity tolerance on `‖H − H†‖_F / ‖H‖_F`.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Relative floor on the smallest eigenvalue of a positive-definite system.
pub const PD_FLOOR: f64 = 1e-12;
/// Norms below this are treated as zero.
pub const ZERO_NORM: f64 = 1e-14;
/// Eigenvalues above `-PSD_FLOOR` are accepted as nonnegative.
pub const PSD_FLOOR: f64 = 1e-12;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Choice of operator norm used to normalize measurement operators.
#[derive(Debug, Clone, PartialEq)]
pub enum NormKind {
    /// Largest singular value.
    Spectral,
    /// Square root of the sum of squared entry moduli.
    Frobenius,
    /// `√⟨ψ|M†M|ψ⟩` evaluated at the carried reference state.
    StateDependent(CVector),
}

impl NormKind {
    pub fn name(&self) -> &'static str {
        match self {
            NormKind::Spectral => "spectral",
            NormKind::Frobenius => "frobenius",
            NormKind::StateDependent(_) => "state_dependent",
        }
    }
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Conjugate transpose.
pub fn adjoint(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn ensure_finite(m: &CMatrix, what: &'static str) -> Result<()> {
    if all_finite(m) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// `(M + M†) / 2`.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// `‖M − M†‖_F`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint()).norm()
}

/// `‖U†U − I‖_F`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.ncols();
    (u.adjoint() * u - CMatrix::identity(n, n)).norm()
}

pub fn is_unitary(u: &CMatrix, tol: f64) -> bool {
    u.is_square() && unitarity_defect(u) <= tol
}

fn require_square(m: &CMatrix, what: &str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(dim_mismatch(
            what,
            "square matrix",
            format!("{}x{}", m.nrows(), m.ncols()),
        ))
    }
}

fn require_hermitian(m: &CMatrix) -> Result<()> {
    let defect = hermiticity_defect(m);
    if defect > HERMITIAN_TOL * m.norm() {
        return Err(Error::NonHermitianInput { defect });
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix: real eigenvalues and a unitary
/// matrix of eigenvectors (columns). The input is symmetrized first.
pub fn hermitian_eigh(h: &CMatrix) -> Result<(DVector<f64>, CMatrix)> {
    require_square(h, "Hermitian eigendecomposition")?;
    ensure_finite(h, "Hermitian eigendecomposition input")?;
    let eig = SymmetricEigen::new(hermitize(h));
    Ok((eig.eigenvalues, eig.eigenvectors))
}

/// `exp(−i H t / ħ)` for Hermitian `H`, via `H = V Λ V†`.
pub fn hermitian_expm(h: &CMatrix, t: f64, hbar: f64) -> Result<CMatrix> {
    require_square(h, "matrix exponential")?;
    if !(hbar > 0.0) || !hbar.is_finite() || !t.is_finite() {
        return Err(Error::BadConfig(format!(
            "matrix exponential needs finite t and hbar > 0 (t = {t}, hbar = {hbar})"
        )));
    }
    require_hermitian(h)?;
    let (vals, vecs) = hermitian_eigh(h)?;
    let phases = vals.map(|e| C64::from_polar(1.0, -e * t / hbar));
    let mut scaled = vecs.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    let u = scaled * vecs.adjoint();
    let defect = unitarity_defect(&u);
    if defect > UNITARITY_TOL {
        return Err(Error::NotUnitary { defect });
    }
    Ok(u)
}

pub fn spectral_norm(m: &CMatrix) -> f64 {
    m.singular_values().max()
}

pub fn operator_norm(m: &CMatrix, kind: &NormKind) -> Result<f64> {
    let norm = match kind {
        NormKind::Spectral => spectral_norm(m),
        NormKind::Frobenius => m.norm(),
        NormKind::StateDependent(psi) => {
            if psi.len() != m.ncols() {
                return Err(dim_mismatch("state-dependent norm", m.ncols(), psi.len()));
            }
            // √⟨ψ|M†M|ψ⟩ = ‖Mψ‖
            (m * psi).norm()
        }
    };
    if !(norm >= ZERO_NORM) {
        return Err(Error::ZeroNorm { norm });
    }
    Ok(norm)
}

/// Solves `S X = B` for Hermitian positive-definite `S`.
pub fn solve_hermitian_pd(s: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    require_square(s, "Hermitian PD solve")?;
    if b.nrows() != s.nrows() {
        return Err(dim_mismatch("right-hand side rows", s.nrows(), b.nrows()));
    }
    ensure_finite(s, "system matrix")?;
    let s = hermitize(s);
    let scale = s.diagonal().iter().fold(0.0_f64, |acc, z| acc.max(z.re));
    if !(scale > 0.0) {
        return Err(Error::SingularSystem(format!(
            "largest diagonal entry {scale:.3e}"
        )));
    }
    let chol = Cholesky::new(s)
        .ok_or_else(|| Error::SingularSystem("Cholesky factorization failed".into()))?;
    // Each squared pivot bounds the smallest eigenvalue from above. A
    // negative Schur complement shows up as an imaginary pivot, so Re(z²)
    // keeps its sign.
    let min_pivot = chol
        .l_dirty()
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |acc, z| acc.min((z * z).re));
    if min_pivot <= PD_FLOOR * scale {
        return Err(Error::SingularSystem(format!(
            "smallest pivot {min_pivot:.3e} against scale {scale:.3e}"
        )));
    }
    Ok(chol.solve(b))
}

/// Factor `L` with `L L† = Q` for Hermitian positive-semidefinite `Q`.
pub fn psd_factor(q: &CMatrix) -> Result<CMatrix> {
    require_square(q, "covariance")?;
    check_hermitian_psd(q)?;
    let (vals, vecs) = hermitian_eigh(q)?;
    let mut l = vecs;
    for (j, mut col) in l.column_iter_mut().enumerate() {
        col *= C64::from(vals[j].max(0.0).sqrt());
    }
    Ok(l)
}

/// Hermitian within 1e−10 (absolute, scaled up for large matrices) and no
/// eigenvalue below `-PSD_FLOOR`.
pub fn check_hermitian_psd(q: &CMatrix) -> Result<()> {
    require_square(q, "covariance")?;
    ensure_finite(q, "covariance")?;
    let defect = hermiticity_defect(q);
    if defect > HERMITIAN_TOL * q.norm().max(1.0) {
        return Err(Error::NonHermitianInput { defect });
    }
    let min = hermitize(q).symmetric_eigenvalues().min();
    if min < -PSD_FLOOR {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    Ok(())
}

/// Number of singular values above `rel_tol · σ_max`.
pub fn numerical_rank(m: &CMatrix, rel_tol: f64) -> usize {
    let sv = m.singular_values();
    let max = sv.max();
    if max <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Real trace of a (Hermitian) matrix.
pub fn trace_re(m: &CMatrix) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}
