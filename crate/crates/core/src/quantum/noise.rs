//! Additive Gaussian state and measurement noise.
//!
//! Noise is circularly-symmetric complex Gaussian: for covariance `C`,
//! `n = L z` with `L L† = C` and `z` standard complex normal, so that
//! `E[n n†] = C` and the real and imaginary parts each carry half the variance.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::state::StateVector;
use crate::error::{dim_mismatch, Result};
use crate::linalg::{check_hermitian_psd, psd_factor, CMatrix, CVector, C64};

/// Whether the estimator adds `Q` in its time update or treats state noise as
/// already folded into the output noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessNoiseMode {
    Explicit,
    #[default]
    OutputFolded,
}

impl ProcessNoiseMode {
    pub fn name(self) -> &'static str {
        match self {
            ProcessNoiseMode::Explicit => "explicit",
            ProcessNoiseMode::OutputFolded => "output_folded",
        }
    }
}

/// Constant state-noise covariance `Q` (d×d) and measurement-noise
/// covariance `R` (observable dimension).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    q: CMatrix,
    r: CMatrix,
    process_noise_mode: ProcessNoiseMode,
}

impl NoiseSpec {
    pub fn new(q: CMatrix, r: CMatrix, process_noise_mode: ProcessNoiseMode) -> Result<Self> {
        check_hermitian_psd(&q)?;
        check_hermitian_psd(&r)?;
        Ok(Self {
            q,
            r,
            process_noise_mode,
        })
    }

    /// `Q = σ_q² I_d`, `R = σ_r² I_m`.
    pub fn isotropic(
        d: usize,
        observable_dim: usize,
        sigma_q: f64,
        sigma_r: f64,
        process_noise_mode: ProcessNoiseMode,
    ) -> Result<Self> {
        Self::new(
            CMatrix::identity(d, d).scale(sigma_q * sigma_q),
            CMatrix::identity(observable_dim, observable_dim).scale(sigma_r * sigma_r),
            process_noise_mode,
        )
    }

    pub fn noiseless(d: usize, observable_dim: usize) -> Self {
        Self {
            q: CMatrix::zeros(d, d),
            r: CMatrix::zeros(observable_dim, observable_dim),
            process_noise_mode: ProcessNoiseMode::default(),
        }
    }

    pub fn q(&self) -> &CMatrix {
        &self.q
    }

    pub fn r(&self) -> &CMatrix {
        &self.r
    }

    pub fn process_noise_mode(&self) -> ProcessNoiseMode {
        self.process_noise_mode
    }
}

pub(crate) fn is_zero(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re == 0.0 && z.im == 0.0)
}

/// Precomputed sampler for a fixed covariance. A zero covariance draws
/// nothing from the stream.
#[derive(Debug, Clone)]
pub struct GaussianNoise {
    factor: Option<CMatrix>,
    dim: usize,
}

impl GaussianNoise {
    pub fn new(cov: &CMatrix) -> Result<Self> {
        check_hermitian_psd(cov)?;
        let factor = if is_zero(cov) {
            None
        } else {
            Some(psd_factor(cov)?)
        };
        Ok(Self {
            factor,
            dim: cov.nrows(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_silent(&self) -> bool {
        self.factor.is_none()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<CVector> {
        let factor = self.factor.as_ref()?;
        let z = standard_complex_normal(self.dim, rng);
        Some(factor * z)
    }

    /// Adds one draw to `v` in place.
    pub fn perturb<R: Rng + ?Sized>(&self, v: &mut CVector, rng: &mut R) {
        if let Some(n) = self.draw(rng) {
            *v += n;
        }
    }
}

/// `n` i.i.d. entries with `E|z|² = 1`, real and imaginary parts drawn in
/// that order for each entry.
pub fn standard_complex_normal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    CVector::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
    })
}

/// `ψ + n`, `n ~ CN(0, Q)`. The result is not renormalized; with `Q = 0`
/// the input is returned unchanged.
pub fn inject_state_noise<R: Rng + ?Sized>(
    psi: &StateVector,
    q: &CMatrix,
    rng: &mut R,
) -> Result<StateVector> {
    if q.shape() != (psi.dim(), psi.dim()) {
        return Err(dim_mismatch("state noise covariance", psi.dim(), q.nrows()));
    }
    let noise = GaussianNoise::new(q)?;
    if noise.is_silent() {
        return Ok(psi.clone());
    }
    let mut ket = psi.ket().clone();
    noise.perturb(&mut ket, rng);
    Ok(StateVector::unnormalized(ket))
}

/// `H|ψ⟩ + v`, `v ~ CN(0, R)`.
pub fn observe<R: Rng + ?Sized>(
    psi: &StateVector,
    h: &CMatrix,
    r: &CMatrix,
    rng: &mut R,
) -> Result<CVector> {
    if h.ncols() != psi.dim() {
        return Err(dim_mismatch(
            "observation matrix columns",
            psi.dim(),
            h.ncols(),
        ));
    }
    if r.shape() != (h.nrows(), h.nrows()) {
        return Err(dim_mismatch(
            "measurement noise covariance",
            h.nrows(),
            r.nrows(),
        ));
    }
    let noise = GaussianNoise::new(r)?;
    let mut y = h * psi.ket();
    noise.perturb(&mut y, rng);
    Ok(y)
}
