use crate::error::{Error, Result};
use crate::linalg::{CVector, C64, ONE};

/// Tolerance on `|‖ψ‖ − 1|` for a state to count as normalized.
pub const NORMALIZATION_TOL: f64 = 1e-10;

/// A ket of probability amplitudes.
///
/// States built through [`StateVector::new`] are checked to be unit vectors.
/// States produced by additive noise carry `normalized = false`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    ket: CVector,
    normalized: bool,
}

impl StateVector {
    /// Wraps a unit-norm ket, failing with `NotNormalized` otherwise.
    pub fn new(ket: CVector) -> Result<Self> {
        check_finite(&ket)?;
        if ket.is_empty() {
            return Err(Error::ZeroVector);
        }
        let norm = ket.norm();
        if (norm - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self {
            ket,
            normalized: true,
        })
    }

    /// Scales an arbitrary nonzero ket to unit norm.
    pub fn normalize(ket: CVector) -> Result<Self> {
        check_finite(&ket)?;
        let norm = ket.norm();
        if !(norm > 0.0) {
            return Err(Error::ZeroVector);
        }
        Ok(Self {
            ket: ket.unscale(norm),
            normalized: true,
        })
    }

    /// Wraps a ket without any norm requirement.
    pub fn unnormalized(ket: CVector) -> Self {
        Self {
            ket,
            normalized: false,
        }
    }

    /// Keeps the `normalized` flag only if `was_normalized` and the norm is
    /// still within tolerance.
    pub fn carry(ket: CVector, was_normalized: bool) -> Self {
        let normalized = was_normalized && (ket.norm() - 1.0).abs() <= NORMALIZATION_TOL;
        Self { ket, normalized }
    }

    /// Computational basis state `|k⟩` in dimension `d`.
    pub fn basis(d: usize, k: usize) -> Self {
        assert!(k < d, "basis index {k} out of range for dimension {d}");
        let mut ket = CVector::zeros(d);
        ket[k] = ONE;
        Self {
            ket,
            normalized: true,
        }
    }

    /// Equal-weight superposition `Σ_k |k⟩ / √d`.
    pub fn uniform(d: usize) -> Self {
        assert!(d > 0, "dimension must be positive");
        let amp = C64::from(1.0 / (d as f64).sqrt());
        Self {
            ket: CVector::from_element(d, amp),
            normalized: true,
        }
    }

    pub fn ket(&self) -> &CVector {
        &self.ket
    }

    pub fn into_ket(self) -> CVector {
        self.ket
    }

    pub fn dim(&self) -> usize {
        self.ket.len()
    }

    pub fn norm(&self) -> f64 {
        self.ket.norm()
    }

    /// Whether the state was constructed as (or restored to) a unit vector.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Returns a unit-norm copy; `normalized` is set again.
    pub fn renormalized(&self) -> Result<Self> {
        Self::normalize(self.ket.clone())
    }
}

fn check_finite(ket: &CVector) -> Result<()> {
    if ket.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("state amplitudes"))
    }
}

/// Actual-norm check used by operations that require a physical state.
pub(crate) fn require_normalized(psi: &StateVector) -> Result<()> {
    let norm = psi.norm();
    if (norm - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized { norm });
    }
    Ok(())
}
