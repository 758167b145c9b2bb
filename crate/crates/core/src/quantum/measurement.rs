//! Measurement operators, Born-rule probabilities and normalized observables.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::state::{require_normalized, StateVector};
use crate::error::{dim_mismatch, Error, Result};
use crate::linalg::{ensure_finite, operator_norm, CMatrix, NormKind, ZERO_NORM};

/// Tolerance on `‖Σ_m M_m†M_m − I‖_F`.
pub const COMPLETENESS_TOL: f64 = 1e-8;

/// Tolerance for clamping rounding noise in probabilities to `[0, 1]`.
const PROBABILITY_CLAMP_TOL: f64 = 1e-10;

/// How the per-outcome observables are handed to the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    /// All normalized operators stacked into one joint measurement matrix.
    #[default]
    Stacked,
    /// One independent estimator per operator, reported separately.
    Battery,
}

impl FusionMode {
    pub fn name(self) -> &'static str {
        match self {
            FusionMode::Stacked => "stacked",
            FusionMode::Battery => "battery",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOperator {
    pub label: String,
    pub op: CMatrix,
}

/// A complete set of labeled measurement operators.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementModel {
    operators: Vec<MeasurementOperator>,
    norm_kind: NormKind,
    mode: FusionMode,
}

/// `‖Σ_m M_m†M_m − I‖_F`; operators must be square and share a dimension.
pub fn completeness_defect(ops: &[CMatrix]) -> Result<f64> {
    let d = ops
        .first()
        .ok_or_else(|| Error::BadConfig("measurement model has no operators".into()))?
        .nrows();
    let mut sum = CMatrix::identity(d, d).scale(-1.0);
    for op in ops {
        if op.shape() != (d, d) {
            return Err(dim_mismatch(
                "measurement operator",
                format!("{d}x{d}"),
                format!("{}x{}", op.nrows(), op.ncols()),
            ));
        }
        sum += op.adjoint() * op;
    }
    Ok(sum.norm())
}

impl MeasurementModel {
    pub fn new(
        operators: Vec<MeasurementOperator>,
        norm_kind: NormKind,
        mode: FusionMode,
    ) -> Result<Self> {
        for m in &operators {
            ensure_finite(&m.op, "measurement operator")?;
        }
        let ops: Vec<CMatrix> = operators.iter().map(|m| m.op.clone()).collect();
        let defect = completeness_defect(&ops)?;
        if defect > COMPLETENESS_TOL {
            return Err(Error::IncompleteMeasurement { defect });
        }
        if let NormKind::StateDependent(psi) = &norm_kind {
            if psi.len() != ops[0].nrows() {
                return Err(dim_mismatch("reference state", ops[0].nrows(), psi.len()));
            }
        }
        Ok(Self {
            operators,
            norm_kind,
            mode,
        })
    }

    /// Computational-basis projectors `|k⟩⟨k|`, labeled `a0 … a{d-1}`.
    pub fn projective(d: usize, norm_kind: NormKind, mode: FusionMode) -> Result<Self> {
        let operators = (0..d)
            .map(|k| {
                let mut op = CMatrix::zeros(d, d);
                op[(k, k)] = 1.0.into();
                MeasurementOperator {
                    label: format!("a{k}"),
                    op,
                }
            })
            .collect();
        Self::new(operators, norm_kind, mode)
    }

    pub fn operators(&self) -> &[MeasurementOperator] {
        &self.operators
    }

    pub fn norm_kind(&self) -> &NormKind {
        &self.norm_kind
    }

    pub fn mode(&self) -> FusionMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.operators[0].op.nrows()
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    /// Each operator divided by its norm under the model's `norm_kind`.
    pub fn normalized_operators(&self) -> Result<Vec<CMatrix>> {
        self.operators
            .iter()
            .map(|m| normalized_operator(&m.op, &self.norm_kind))
            .collect()
    }

    /// Observation matrices the estimator runs on: one stacked matrix, or one
    /// per operator in battery mode.
    pub fn observation_matrices(&self) -> Result<Vec<CMatrix>> {
        match self.mode {
            FusionMode::Stacked => Ok(vec![stacked_observable(self)?]),
            FusionMode::Battery => self.normalized_operators(),
        }
    }

    /// Rows of the observable handed to the estimator (per channel).
    pub fn observable_dim(&self) -> usize {
        match self.mode {
            FusionMode::Stacked => self.len() * self.dim(),
            FusionMode::Battery => self.dim(),
        }
    }
}

/// Born probability `⟨ψ|M†M|ψ⟩`.
pub fn outcome_probability(psi: &StateVector, m: &CMatrix) -> Result<f64> {
    require_normalized(psi)?;
    if m.ncols() != psi.dim() {
        return Err(dim_mismatch(
            "measurement operator columns",
            psi.dim(),
            m.ncols(),
        ));
    }
    let p = (m * psi.ket()).norm_squared();
    if p > 1.0 && p <= 1.0 + PROBABILITY_CLAMP_TOL {
        return Ok(1.0);
    }
    Ok(p)
}

/// `M|ψ⟩ / √⟨ψ|M†M|ψ⟩`.
pub fn post_measurement_state(psi: &StateVector, m: &CMatrix) -> Result<StateVector> {
    let probability = outcome_probability(psi, m)?;
    if probability <= ZERO_NORM {
        return Err(Error::ZeroProbabilityBranch { probability });
    }
    StateVector::normalize(m * psi.ket())
}

/// Draws an outcome with Born probabilities and returns its label and the
/// collapsed state.
pub fn sample_outcome<R: Rng + ?Sized>(
    psi: &StateVector,
    model: &MeasurementModel,
    rng: &mut R,
) -> Result<(String, StateVector)> {
    let probabilities = model
        .operators()
        .iter()
        .map(|m| outcome_probability(psi, &m.op))
        .collect::<Result<Vec<f64>>>()?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut chosen = None;
    for (k, &p) in probabilities.iter().enumerate() {
        acc += p;
        if u < acc && p > ZERO_NORM {
            chosen = Some(k);
            break;
        }
    }
    // Rounding can leave the cumulative sum just below u; fall back to the
    // last outcome that is actually possible.
    let k = match chosen {
        Some(k) => k,
        None => probabilities
            .iter()
            .rposition(|&p| p > ZERO_NORM)
            .ok_or(Error::ZeroProbabilityBranch { probability: 0.0 })?,
    };
    let m = &model.operators()[k];
    Ok((m.label.clone(), post_measurement_state(psi, &m.op)?))
}

/// `M / ‖M‖` for the chosen norm.
pub fn normalized_operator(m: &CMatrix, kind: &NormKind) -> Result<CMatrix> {
    let norm = operator_norm(m, kind)?;
    Ok(m.unscale(norm))
}

/// Vertical stack of all normalized operators: a `(n·d) × d` matrix.
pub fn stacked_observable(model: &MeasurementModel) -> Result<CMatrix> {
    let blocks = model.normalized_operators()?;
    let d = model.dim();
    let mut stacked = CMatrix::zeros(blocks.len() * d, d);
    for (k, block) in blocks.iter().enumerate() {
        stacked.view_mut((k * d, 0), (d, d)).copy_from(block);
    }
    Ok(stacked)
}
