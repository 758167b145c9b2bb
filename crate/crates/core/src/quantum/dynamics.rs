//! Unitary dynamics and the full description of a simulated system.

use rand::Rng;

use super::measurement::{FusionMode, MeasurementModel};
use super::noise::{standard_complex_normal, NoiseSpec};
use super::state::StateVector;
use crate::error::{dim_mismatch, Error, Result};
use crate::linalg::{ensure_finite, hermitian_expm, unitarity_defect, CMatrix, C64};

/// Tolerance on `‖U†U − I‖_F` for user-supplied propagators.
pub const SUPPLIED_UNITARY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum Dynamics {
    /// A fixed one-step propagator.
    Unitary(CMatrix),
    /// `U = exp(−i H dt / ħ)`.
    Hamiltonian { h: CMatrix, dt: f64, hbar: f64 },
}

impl Dynamics {
    pub fn dim(&self) -> usize {
        match self {
            Dynamics::Unitary(u) => u.nrows(),
            Dynamics::Hamiltonian { h, .. } => h.nrows(),
        }
    }

    /// One-step propagator.
    pub fn propagator(&self) -> Result<CMatrix> {
        match self {
            Dynamics::Unitary(u) => Ok(u.clone()),
            Dynamics::Hamiltonian { h, dt, hbar } => hermitian_expm(h, *dt, *hbar),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Dynamics::Unitary(u) => {
                ensure_finite(u, "unitary")?;
                if !u.is_square() {
                    return Err(dim_mismatch(
                        "unitary",
                        "square matrix",
                        format!("{}x{}", u.nrows(), u.ncols()),
                    ));
                }
                let defect = unitarity_defect(u);
                if defect > SUPPLIED_UNITARY_TOL {
                    return Err(Error::NotUnitary { defect });
                }
                Ok(())
            }
            Dynamics::Hamiltonian { dt, hbar, .. } => {
                if !(*dt > 0.0) || !dt.is_finite() {
                    return Err(Error::BadConfig(format!("dt must be positive, got {dt}")));
                }
                if !(*hbar > 0.0) || !hbar.is_finite() {
                    return Err(Error::BadConfig(format!(
                        "hbar must be positive, got {hbar}"
                    )));
                }
                // Hermiticity and shape are checked by building the propagator.
                self.propagator().map(|_| ())
            }
        }
    }
}

/// Everything the simulated quantum computer needs: dynamics, measurement,
/// noise and the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    dynamics: Dynamics,
    measurement: MeasurementModel,
    noise: NoiseSpec,
    initial_state: StateVector,
    renormalize_after_state_noise: bool,
}

impl SystemSpec {
    pub fn new(
        dynamics: Dynamics,
        measurement: MeasurementModel,
        noise: NoiseSpec,
        initial_state: StateVector,
    ) -> Result<Self> {
        let d = initial_state.dim();
        if !initial_state.is_normalized() {
            return Err(Error::NotNormalized {
                norm: initial_state.norm(),
            });
        }
        if dynamics.dim() != d {
            return Err(dim_mismatch("dynamics dimension", d, dynamics.dim()));
        }
        dynamics.validate()?;
        if measurement.dim() != d {
            return Err(dim_mismatch("measurement dimension", d, measurement.dim()));
        }
        if noise.q().nrows() != d {
            return Err(dim_mismatch("state noise covariance", d, noise.q().nrows()));
        }
        let r_dim = noise.r().nrows();
        let stacked_dim = measurement.len() * d;
        let r_ok = match measurement.mode() {
            FusionMode::Stacked => r_dim == stacked_dim,
            FusionMode::Battery => r_dim == d || r_dim == stacked_dim,
        };
        if !r_ok {
            return Err(dim_mismatch(
                "measurement noise covariance",
                measurement.observable_dim(),
                r_dim,
            ));
        }
        Ok(Self {
            dynamics,
            measurement,
            noise,
            initial_state,
            renormalize_after_state_noise: false,
        })
    }

    /// Restore unit norm after each state-noise injection.
    pub fn with_renormalization(mut self, on: bool) -> Self {
        self.renormalize_after_state_noise = on;
        self
    }

    pub fn dim(&self) -> usize {
        self.initial_state.dim()
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn measurement(&self) -> &MeasurementModel {
        &self.measurement
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn initial_state(&self) -> &StateVector {
        &self.initial_state
    }

    pub fn renormalize_after_state_noise(&self) -> bool {
        self.renormalize_after_state_noise
    }

    pub fn propagator(&self) -> Result<CMatrix> {
        self.dynamics.propagator()
    }

    /// Measurement-noise covariance seen by estimator channel `k`.
    pub fn channel_noise(&self, k: usize) -> CMatrix {
        let r = self.noise.r();
        let d = self.dim();
        match self.measurement.mode() {
            FusionMode::Stacked => r.clone(),
            FusionMode::Battery if r.nrows() == d => r.clone(),
            FusionMode::Battery => r.view((k * d, k * d), (d, d)).into_owned(),
        }
    }
}

/// `U|ψ⟩` for the system's one-step propagator.
pub fn evolve(spec: &SystemSpec, psi: &StateVector) -> Result<StateVector> {
    if psi.dim() != spec.dim() {
        return Err(dim_mismatch("state dimension", spec.dim(), psi.dim()));
    }
    let ket = spec.propagator()? * psi.ket();
    Ok(if psi.is_normalized() {
        StateVector::new(ket)?
    } else {
        StateVector::unnormalized(ket)
    })
}

/// Haar-distributed `d×d` unitary: QR of a complex Ginibre matrix with the
/// phases of `R`'s diagonal moved into `Q`.
pub fn haar_random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    assert!(d >= 1, "dimension must be positive");
    let z = CMatrix::from_column_slice(d, d, standard_complex_normal(d * d, rng).as_slice());
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            C64::from(1.0)
        };
        col *= phase;
    }
    q
}
