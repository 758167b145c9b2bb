//! Complex recursive least squares and the state estimator built on it.
//!
//! One step runs in predictor–corrector order:
//!
//! ```text
//! x⁻ = A x̂                      P⁻ = A P A†  (+ Q, noisy/explicit)
//! K  = P⁻ H† (B + H P⁻ H†)⁻¹     B = λI (noiseless) or R (noisy)
//! ε⁻ = y − H x⁻
//! x̂  = x⁻ + K ε⁻
//! P  = λ⁻¹ (I − K H) P⁻          (no λ⁻¹ in noisy mode)
//! ```
//!
//! All transposes of the real-valued derivation become conjugate transposes.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};
use crate::linalg::{
    check_hermitian_psd, ensure_finite, hermitize, solve_hermitian_pd, CMatrix, CVector,
};
use crate::quantum::ProcessNoiseMode;

/// Diagonal loading, relative to the largest diagonal entry, applied to the
/// innovation covariance when its first solve is rejected as singular.
pub const INNOVATION_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMode {
    /// Forgetting-factor RLS: `λI` in the gain, `λ⁻¹` in the covariance update.
    #[default]
    NoiselessRls,
    /// Kalman form: `R` in the gain, no forgetting.
    NoisyKalman,
}

impl EstimatorMode {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorMode::NoiselessRls => "noiseless_rls",
            EstimatorMode::NoisyKalman => "noisy_kalman",
        }
    }
}

/// Sign of the correction term. Only `Plus` is a working estimator; `Minus`
/// exists so tests can show the sign matters.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrectionSign {
    #[default]
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// Forgetting factor, `0 < λ ≤ 1`.
    pub lambda: f64,
    /// Initial covariance scale: `P₀ = δ I`.
    pub delta: f64,
    pub mode: EstimatorMode,
    /// Measurement-noise covariance assumed by the noisy gain.
    pub r: Option<CMatrix>,
    /// State-noise covariance added in the explicit time update.
    pub q: Option<CMatrix>,
    pub process_noise_mode: ProcessNoiseMode,
    #[doc(hidden)]
    pub correction_sign: CorrectionSign,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            lambda: 0.99,
            delta: 1e6,
            mode: EstimatorMode::NoiselessRls,
            r: None,
            q: None,
            process_noise_mode: ProcessNoiseMode::OutputFolded,
            correction_sign: CorrectionSign::Plus,
        }
    }
}

impl EstimatorConfig {
    pub fn noiseless(lambda: f64, delta: f64) -> Result<Self> {
        let config = Self {
            lambda,
            delta,
            ..Self::default()
        };
        config.validate()?;
        Ok(config)
    }

    pub fn noisy(
        delta: f64,
        r: CMatrix,
        q: Option<CMatrix>,
        process_noise_mode: ProcessNoiseMode,
    ) -> Result<Self> {
        let config = Self {
            lambda: 1.0,
            delta,
            mode: EstimatorMode::NoisyKalman,
            r: Some(r),
            q,
            process_noise_mode,
            correction_sign: CorrectionSign::Plus,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::BadConfig(format!(
                "forgetting factor must lie in (0, 1], got {}",
                self.lambda
            )));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::BadConfig(format!(
                "delta must be a positive finite number, got {}",
                self.delta
            )));
        }
        if let Some(r) = &self.r {
            check_hermitian_psd(r)?;
        }
        if let Some(q) = &self.q {
            check_hermitian_psd(q)?;
        }
        Ok(())
    }

    fn adds_process_noise(&self) -> bool {
        self.mode == EstimatorMode::NoisyKalman
            && self.process_noise_mode == ProcessNoiseMode::Explicit
    }
}

/// Estimate, covariance and the last step's intermediate quantities.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EstimatorState {
    pub x_hat: CVector,
    pub p: CMatrix,
    pub t: u64,
    /// A priori estimate `x⁻` of the last step.
    pub last_prior: CVector,
    pub last_gain: CMatrix,
    /// A priori innovation `ε⁻` of the last step.
    pub last_innovation: CVector,
    /// Number of steps whose gain needed diagonal loading.
    pub regularized_solves: u64,
}

impl EstimatorState {
    pub fn dim(&self) -> usize {
        self.x_hat.len()
    }
}

pub fn init(config: &EstimatorConfig, d: usize, x0: CVector) -> Result<EstimatorState> {
    config.validate()?;
    if d == 0 {
        return Err(Error::BadConfig("state dimension must be positive".into()));
    }
    if x0.len() != d {
        return Err(dim_mismatch("initial estimate", d, x0.len()));
    }
    ensure_finite(
        &CMatrix::from_column_slice(d, 1, x0.as_slice()),
        "initial estimate",
    )?;
    Ok(EstimatorState {
        last_prior: x0.clone(),
        x_hat: x0,
        p: CMatrix::identity(d, d).scale(config.delta),
        t: 0,
        last_gain: CMatrix::zeros(d, 0),
        last_innovation: CVector::zeros(0),
        regularized_solves: 0,
    })
}

/// Time update: `x⁻ = A x̂`, `P⁻ = A P A†` plus `Q` in explicit noisy mode.
pub fn predict(
    state: &EstimatorState,
    a: &CMatrix,
    config: &EstimatorConfig,
) -> Result<(CVector, CMatrix)> {
    let d = state.dim();
    if a.shape() != (d, d) {
        return Err(dim_mismatch(
            "plant matrix",
            format!("{d}x{d}"),
            format!("{}x{}", a.nrows(), a.ncols()),
        ));
    }
    let x_minus = a * &state.x_hat;
    let mut p_minus = a * &state.p * a.adjoint();
    if config.adds_process_noise() {
        if let Some(q) = &config.q {
            if q.shape() != (d, d) {
                return Err(dim_mismatch("state noise covariance", d, q.nrows()));
            }
            p_minus += q;
        }
    }
    Ok((x_minus, hermitize(&p_minus)))
}

/// Filter gain `K = P⁻ H† (B + H P⁻ H†)⁻¹`, `d × m`.
pub fn gain(p_minus: &CMatrix, h: &CMatrix, config: &EstimatorConfig) -> Result<CMatrix> {
    gain_with_loading(p_minus, h, config).map(|(k, _)| k)
}

fn gain_with_loading(
    p_minus: &CMatrix,
    h: &CMatrix,
    config: &EstimatorConfig,
) -> Result<(CMatrix, bool)> {
    let d = p_minus.nrows();
    let m = h.nrows();
    if h.ncols() != d || !p_minus.is_square() {
        return Err(dim_mismatch("observation matrix columns", d, h.ncols()));
    }
    if h.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
        return Ok((CMatrix::zeros(d, m), false));
    }
    let bracket = match config.mode {
        EstimatorMode::NoiselessRls => CMatrix::identity(m, m).scale(config.lambda),
        EstimatorMode::NoisyKalman => {
            let r = config.r.as_ref().ok_or_else(|| {
                Error::BadConfig("noisy mode needs a measurement noise covariance".into())
            })?;
            if r.shape() != (m, m) {
                return Err(dim_mismatch("measurement noise covariance", m, r.nrows()));
            }
            r.clone()
        }
    };
    let hp = h * p_minus;
    let s = bracket + &hp * h.adjoint();
    // K† = S⁻¹ H P⁻ since S and P⁻ are Hermitian.
    match solve_hermitian_pd(&s, &hp) {
        Ok(x) => Ok((x.adjoint(), false)),
        Err(Error::SingularSystem(_)) => {
            let max_diag = s.diagonal().iter().fold(0.0_f64, |acc, z| acc.max(z.re));
            if !(max_diag > 0.0) {
                return Err(Error::SingularInnovationCovariance);
            }
            debug!(
                "innovation covariance singular; loading diagonal by {:.3e}",
                INNOVATION_FLOOR * max_diag
            );
            let loaded = s + CMatrix::identity(m, m).scale(INNOVATION_FLOOR * max_diag);
            let x = solve_hermitian_pd(&loaded, &hp)
                .map_err(|_| Error::SingularInnovationCovariance)?;
            Ok((x.adjoint(), true))
        }
        Err(e) => Err(e),
    }
}

/// A priori innovation `ε⁻ = y − H x⁻`.
pub fn innovate(y: &CVector, h: &CMatrix, x_minus: &CVector) -> Result<CVector> {
    if h.ncols() != x_minus.len() {
        return Err(dim_mismatch(
            "observation matrix columns",
            x_minus.len(),
            h.ncols(),
        ));
    }
    if h.nrows() != y.len() {
        return Err(dim_mismatch("observable length", h.nrows(), y.len()));
    }
    Ok(y - h * x_minus)
}

/// `x̂ = x⁻ + K ε⁻`.
pub fn correct(x_minus: &CVector, k: &CMatrix, eps: &CVector) -> Result<CVector> {
    correct_signed(x_minus, k, eps, CorrectionSign::Plus)
}

fn correct_signed(
    x_minus: &CVector,
    k: &CMatrix,
    eps: &CVector,
    sign: CorrectionSign,
) -> Result<CVector> {
    if k.shape() != (x_minus.len(), eps.len()) {
        return Err(dim_mismatch(
            "gain",
            format!("{}x{}", x_minus.len(), eps.len()),
            format!("{}x{}", k.nrows(), k.ncols()),
        ));
    }
    let delta = k * eps;
    Ok(match sign {
        CorrectionSign::Plus => x_minus + delta,
        CorrectionSign::Minus => x_minus - delta,
    })
}

/// `P = λ⁻¹ (I − K H) P⁻` (noiseless) or `(I − K H) P⁻` (noisy), then
/// symmetrized.
pub fn update_covariance(
    k: &CMatrix,
    h: &CMatrix,
    p_minus: &CMatrix,
    config: &EstimatorConfig,
) -> Result<CMatrix> {
    let d = p_minus.nrows();
    if k.nrows() != d || h.ncols() != d || k.ncols() != h.nrows() {
        return Err(dim_mismatch(
            "gain/observation shapes",
            format!("K {d}x{} with H {}x{d}", h.nrows(), h.nrows()),
            format!(
                "K {}x{} with H {}x{}",
                k.nrows(),
                k.ncols(),
                h.nrows(),
                h.ncols()
            ),
        ));
    }
    let reduced = (CMatrix::identity(d, d) - k * h) * p_minus;
    let p = match config.mode {
        EstimatorMode::NoiselessRls => reduced.unscale(config.lambda),
        EstimatorMode::NoisyKalman => reduced,
    };
    Ok(hermitize(&p))
}

/// One full predict/gain/innovate/correct/update cycle.
pub fn step(
    state: EstimatorState,
    a: &CMatrix,
    h: &CMatrix,
    y: &CVector,
    config: &EstimatorConfig,
) -> Result<EstimatorState> {
    let (x_minus, p_minus) = predict(&state, a, config)?;
    let eps = innovate(y, h, &x_minus)?;
    let (k, loaded) = gain_with_loading(&p_minus, h, config)?;
    let x_hat = correct_signed(&x_minus, &k, &eps, config.correction_sign)?;
    let p = update_covariance(&k, h, &p_minus, config)?;
    Ok(EstimatorState {
        x_hat,
        p,
        t: state.t + 1,
        last_prior: x_minus,
        last_gain: k,
        last_innovation: eps,
        regularized_solves: state.regularized_solves + u64::from(loaded),
    })
}

/// Wiener solution `x = R_MM⁻¹ r_MY`.
pub fn wiener_solution(r_mm: &CMatrix, r_my: &CVector) -> Result<CVector> {
    let rhs = CMatrix::from_column_slice(r_my.len(), 1, r_my.as_slice());
    let x = solve_hermitian_pd(r_mm, &rhs)?;
    Ok(x.column(0).into_owned())
}

/// Exponentially windowed correlation updates:
/// `R = λ R_prev + H†H`, `r = λ r_prev + H†y`.
pub fn correlation_updates(
    r_prev: &CMatrix,
    cross_prev: &CVector,
    h: &CMatrix,
    y: &CVector,
    lambda: f64,
) -> Result<(CMatrix, CVector)> {
    let d = h.ncols();
    if r_prev.shape() != (d, d) || cross_prev.len() != d {
        return Err(dim_mismatch("correlation accumulators", d, r_prev.nrows()));
    }
    if y.len() != h.nrows() {
        return Err(dim_mismatch("observable length", h.nrows(), y.len()));
    }
    let ht = h.adjoint();
    Ok((
        r_prev.scale(lambda) + &ht * h,
        cross_prev.scale(lambda) + ht * y,
    ))
}

/// A sequence of `(H_k, y_k)` observations over one state dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationBatch {
    steps: Vec<(CMatrix, CVector)>,
}

impl ObservationBatch {
    pub fn new(steps: Vec<(CMatrix, CVector)>) -> Result<Self> {
        let d = steps
            .first()
            .ok_or_else(|| Error::BadConfig("observation batch is empty".into()))?
            .0
            .ncols();
        for (k, (h, y)) in steps.iter().enumerate() {
            if h.ncols() != d {
                return Err(dim_mismatch(&format!("H_{k} columns"), d, h.ncols()));
            }
            if y.len() != h.nrows() {
                return Err(dim_mismatch(&format!("y_{k} length"), h.nrows(), y.len()));
            }
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[(CMatrix, CVector)] {
        &self.steps
    }

    pub fn dim(&self) -> usize {
        self.steps[0].0.ncols()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Direct minimizer of
/// `Σ_k λ^{T−k} ‖y_k − H_k x‖² + λ^T δ⁻¹ ‖x − x₀‖²`
/// from the normal equations and a single LU solve. Independent of the
/// recursive path; used to check it.
pub fn batch_weighted_ls_oracle(
    batch: &ObservationBatch,
    lambda: f64,
    delta: f64,
    x0: &CVector,
) -> Result<CVector> {
    let d = batch.dim();
    if x0.len() != d {
        return Err(dim_mismatch("prior mean", d, x0.len()));
    }
    let big_t = batch.len() as i32;
    let prior_weight = lambda.powi(big_t) / delta;
    let mut normal = CMatrix::identity(d, d).scale(prior_weight);
    let mut rhs = x0.scale(prior_weight);
    for (k, (h, y)) in batch.steps().iter().enumerate() {
        let w = lambda.powi(big_t - (k as i32 + 1));
        let ht = h.adjoint();
        normal += (&ht * h).scale(w);
        rhs += (ht * y).scale(w);
    }
    normal
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSystem("regularized normal matrix".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, C64, ONE, ZERO};
    use crate::quantum::haar_random_unitary;
    use crate::rng::seeded;

    fn scalar(v: f64) -> CMatrix {
        CMatrix::from_element(1, 1, C64::from(v))
    }

    fn vec1(v: C64) -> CVector {
        CVector::from_element(1, v)
    }

    #[test]
    fn init_examples() {
        let cfg = EstimatorConfig::noiseless(1.0, 100.0).unwrap();
        let s = init(&cfg, 2, CVector::zeros(2)).unwrap();
        assert_eq!(s.p, CMatrix::identity(2, 2).scale(100.0));
        assert_eq!(s.x_hat, CVector::zeros(2));
        assert_eq!(s.t, 0);

        let cfg = EstimatorConfig::noiseless(1.0, 1.0).unwrap();
        let mut e1 = CVector::zeros(4);
        e1[0] = ONE;
        let s = init(&cfg, 4, e1.clone()).unwrap();
        assert_eq!(s.p, CMatrix::identity(4, 4));
        assert_eq!(s.x_hat, e1);
    }

    #[test]
    fn init_rejects_bad_config() {
        assert!(matches!(
            EstimatorConfig::noiseless(1.0, 0.0),
            Err(Error::BadConfig(_))
        ));
        assert!(matches!(
            EstimatorConfig::noiseless(0.0, 1.0),
            Err(Error::BadConfig(_))
        ));
        assert!(matches!(
            EstimatorConfig::noiseless(1.5, 1.0),
            Err(Error::BadConfig(_))
        ));
        let cfg = EstimatorConfig {
            delta: 0.0,
            ..EstimatorConfig::default()
        };
        assert!(matches!(
            init(&cfg, 2, CVector::zeros(2)),
            Err(Error::BadConfig(_))
        ));
        let ok = EstimatorConfig::default();
        assert!(matches!(
            init(&ok, 2, CVector::zeros(3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn predict_identity_plant() {
        let cfg = EstimatorConfig::default();
        let mut s = init(&cfg, 2, CVector::from_vec(vec![c(1.0, 2.0), c(-0.5, 0.0)])).unwrap();
        s.p = CMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(3.0, 0.0)]);
        let (x, p) = predict(&s, &CMatrix::identity(2, 2), &cfg).unwrap();
        assert_eq!(x, s.x_hat);
        assert_eq!(p, s.p);
    }

    #[test]
    fn predict_unitary_keeps_identity_covariance() {
        let cfg = EstimatorConfig::noiseless(1.0, 1.0).unwrap();
        let s = init(&cfg, 3, CVector::zeros(3)).unwrap();
        let u = haar_random_unitary(3, &mut seeded(2));
        let (_, p) = predict(&s, &u, &cfg).unwrap();
        assert!((p - CMatrix::identity(3, 3)).norm() < 1e-10);
    }

    #[test]
    fn predict_adds_q_in_explicit_mode() {
        let cfg = EstimatorConfig::noisy(
            3.0,
            scalar(1.0),
            Some(scalar(1.0)),
            ProcessNoiseMode::Explicit,
        )
        .unwrap();
        let s = init(&cfg, 1, CVector::zeros(1)).unwrap();
        let (_, p) = predict(&s, &scalar(2.0), &cfg).unwrap();
        assert!((p[(0, 0)].re - 13.0).abs() < 1e-14);

        let folded = EstimatorConfig {
            process_noise_mode: ProcessNoiseMode::OutputFolded,
            ..cfg
        };
        let (_, p) = predict(&s, &scalar(2.0), &folded).unwrap();
        assert!((p[(0, 0)].re - 12.0).abs() < 1e-14);
    }

    #[test]
    fn gain_examples() {
        let cfg = EstimatorConfig::noiseless(0.5, 1.0).unwrap();
        let k = gain(&scalar(1.0), &scalar(2.0), &cfg).unwrap();
        // 1·2 / (0.5 + 2·1·2)
        assert!((k[(0, 0)].re - 2.0 / 4.5).abs() < 1e-15);
        assert!((k[(0, 0)].re - 0.4444).abs() < 1e-4);

        let delta = 7.0;
        let cfg = EstimatorConfig::noiseless(1.0, delta).unwrap();
        let p = CMatrix::identity(3, 3).scale(delta);
        let k = gain(&p, &CMatrix::identity(3, 3), &cfg).unwrap();
        let expected = CMatrix::identity(3, 3).scale(delta / (1.0 + delta));
        assert!((&k - &expected).norm() < 1e-14);
        // multiply back: K (λI + P) = P
        assert!((&k * (CMatrix::identity(3, 3) + &p) - &p).norm() < 1e-12);

        let k = gain(&p, &CMatrix::zeros(2, 3), &cfg).unwrap();
        assert_eq!(k, CMatrix::zeros(3, 2));
    }

    #[test]
    fn noisy_gain_uses_r() {
        let cfg =
            EstimatorConfig::noisy(1.0, scalar(3.0), None, ProcessNoiseMode::OutputFolded).unwrap();
        let k = gain(&scalar(1.0), &scalar(1.0), &cfg).unwrap();
        assert!((k[(0, 0)].re - 0.25).abs() < 1e-15);
        let missing = EstimatorConfig { r: None, ..cfg };
        assert!(matches!(
            gain(&scalar(1.0), &scalar(1.0), &missing),
            Err(Error::BadConfig(_))
        ));
    }

    #[test]
    fn singular_innovation_gets_loaded() {
        // R = 0 with a rank-deficient stacked H makes S singular.
        let cfg = EstimatorConfig::noisy(
            1.0,
            CMatrix::zeros(4, 4),
            None,
            ProcessNoiseMode::OutputFolded,
        )
        .unwrap();
        let h = CMatrix::from_row_slice(4, 2, &[ONE, ZERO, ZERO, ZERO, ZERO, ZERO, ZERO, ONE]);
        let (k, loaded) = gain_with_loading(&CMatrix::identity(2, 2), &h, &cfg).unwrap();
        assert!(loaded);
        // K H ≈ I: the observation pins the state exactly.
        assert!((&k * &h - CMatrix::identity(2, 2)).norm() < 1e-8);
    }

    #[test]
    fn innovate_examples() {
        let h = CMatrix::from_row_slice(2, 2, &[ONE, c(0.0, 1.0), ZERO, c(2.0, 0.0)]);
        let x = CVector::from_vec(vec![c(1.0, -1.0), c(0.5, 0.5)]);
        assert_eq!(innovate(&(&h * &x), &h, &x).unwrap(), CVector::zeros(2));
        let y = CVector::from_vec(vec![ONE, ZERO]);
        assert_eq!(
            innovate(&y, &CMatrix::identity(2, 2), &CVector::zeros(2)).unwrap(),
            y
        );
        let e = innovate(&vec1(c(0.0, 1.0)), &scalar(1.0), &vec1(ONE)).unwrap();
        assert_eq!(e[0], c(-1.0, 1.0));
        assert!(innovate(&CVector::zeros(3), &h, &x).is_err());
    }

    #[test]
    fn correct_examples() {
        let x = CVector::from_vec(vec![c(1.0, 2.0), c(3.0, 0.0)]);
        let k = CMatrix::from_row_slice(2, 1, &[c(0.1, 0.0), c(0.0, 0.3)]);
        assert_eq!(correct(&x, &k, &CVector::zeros(1)).unwrap(), x);
        assert_eq!(
            correct(&x, &CMatrix::zeros(2, 1), &vec1(c(5.0, 5.0))).unwrap(),
            x
        );
        let out = correct(&vec1(ONE), &scalar(0.5), &vec1(C64::from(0.2))).unwrap();
        assert!((out[0].re - 1.1).abs() < 1e-15);
        assert!(correct(&x, &CMatrix::zeros(3, 1), &vec1(ONE)).is_err());
    }

    #[test]
    fn covariance_update_examples() {
        let cfg = EstimatorConfig::noiseless(1.0, 1.0).unwrap();
        let p =
            CMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.5, 0.5), c(0.5, -0.5), c(1.0, 0.0)]);
        let out =
            update_covariance(&CMatrix::zeros(2, 2), &CMatrix::identity(2, 2), &p, &cfg).unwrap();
        assert_eq!(out, p);

        let cfg = EstimatorConfig::noiseless(0.5, 1.0).unwrap();
        let out = update_covariance(&scalar(0.5), &scalar(1.0), &scalar(1.0), &cfg).unwrap();
        assert!((out[(0, 0)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn covariance_update_matches_information_form() {
        // λ = 1, H = I: P = (P⁻⁻¹ + I)⁻¹
        let cfg = EstimatorConfig::noiseless(1.0, 1.0).unwrap();
        let mut rng = seeded(17);
        let g = crate::quantum::standard_complex_normal(16, &mut rng);
        let g = CMatrix::from_column_slice(4, 4, g.as_slice());
        let p_minus = &g * g.adjoint() + CMatrix::identity(4, 4).scale(0.5);
        let h = CMatrix::identity(4, 4);
        let k = gain(&p_minus, &h, &cfg).unwrap();
        let p = update_covariance(&k, &h, &p_minus, &cfg).unwrap();
        let oracle = (p_minus.try_inverse().unwrap() + CMatrix::identity(4, 4))
            .try_inverse()
            .unwrap();
        assert!((p - oracle).norm() < 1e-8);
    }

    #[test]
    fn large_delta_single_step_recovers_state() {
        let cfg = EstimatorConfig::noiseless(1.0, 1e6).unwrap();
        let truth = CVector::from_vec(vec![c(0.3, -0.2), c(0.1, 0.9)]);
        let s = init(&cfg, 2, CVector::zeros(2)).unwrap();
        let id = CMatrix::identity(2, 2);
        let s = step(s, &id, &id, &truth, &cfg).unwrap();
        assert!((&s.x_hat - &truth).norm() <= 1e-5 * truth.norm());
        assert_eq!(s.t, 1);
        assert_eq!(s.last_gain.shape(), (2, 2));
    }

    #[test]
    fn self_consistent_observations_follow_the_plant() {
        let cfg = EstimatorConfig::noiseless(0.9, 10.0).unwrap();
        let a = haar_random_unitary(3, &mut seeded(8));
        let h = CMatrix::identity(3, 3);
        let mut s = init(
            &cfg,
            3,
            CVector::from_vec(vec![ONE, c(0.0, 1.0), c(-1.0, 0.5)]),
        )
        .unwrap();
        for _ in 0..20 {
            let expected = &a * &s.x_hat;
            let y = &h * &expected;
            s = step(s, &a, &h, &y, &cfg).unwrap();
            assert!((&s.x_hat - &expected).norm() < 1e-12);
            assert!(s.last_innovation.norm() < 1e-12);
        }
    }

    #[test]
    fn wiener_examples() {
        let r = CVector::from_vec(vec![c(1.0, 1.0), c(-2.0, 0.0)]);
        assert_eq!(wiener_solution(&CMatrix::identity(2, 2), &r).unwrap(), r);
        let x = wiener_solution(
            &CMatrix::identity(2, 2).scale(2.0),
            &CVector::from_vec(vec![c(2.0, 0.0), c(4.0, 0.0)]),
        )
        .unwrap();
        assert!((x - CVector::from_vec(vec![c(1.0, 0.0), c(2.0, 0.0)])).norm() < 1e-15);
        assert!(matches!(
            wiener_solution(&CMatrix::zeros(2, 2), &r),
            Err(Error::SingularSystem(_))
        ));
    }

    #[test]
    fn correlation_update_examples() {
        let (r, _) = correlation_updates(
            &CMatrix::zeros(2, 2),
            &CVector::zeros(2),
            &CMatrix::identity(2, 2),
            &CVector::zeros(2),
            1.0,
        )
        .unwrap();
        assert_eq!(r, CMatrix::identity(2, 2));
        let (r, x) = correlation_updates(
            &CMatrix::identity(2, 2),
            &CVector::from_element(2, ONE),
            &CMatrix::zeros(3, 2),
            &CVector::zeros(3),
            0.5,
        )
        .unwrap();
        assert_eq!(r, CMatrix::identity(2, 2).scale(0.5));
        assert_eq!(x, CVector::from_element(2, C64::from(0.5)));
    }

    #[test]
    fn batch_validates_shapes() {
        assert!(ObservationBatch::new(vec![]).is_err());
        let bad = vec![
            (CMatrix::identity(2, 2), CVector::zeros(2)),
            (CMatrix::identity(3, 3), CVector::zeros(3)),
        ];
        assert!(matches!(
            ObservationBatch::new(bad),
            Err(Error::DimensionMismatch(_))
        ));
        let bad = vec![(CMatrix::identity(2, 2), CVector::zeros(3))];
        assert!(ObservationBatch::new(bad).is_err());
    }

    #[test]
    fn oracle_examples() {
        let y = CVector::from_vec(vec![c(0.4, -0.1), c(2.0, 1.0)]);
        let batch = ObservationBatch::new(vec![(CMatrix::identity(2, 2), y.clone())]).unwrap();
        let x = batch_weighted_ls_oracle(&batch, 1.0, 1e12, &CVector::zeros(2)).unwrap();
        assert!((x - &y).norm() < 1e-5);

        let x0 = CVector::from_vec(vec![c(1.0, 2.0), c(-3.0, 0.5)]);
        let zeros = (0..5)
            .map(|_| (CMatrix::zeros(3, 2), CVector::from_element(3, ONE)))
            .collect();
        let batch = ObservationBatch::new(zeros).unwrap();
        let x = batch_weighted_ls_oracle(&batch, 0.9, 10.0, &x0).unwrap();
        assert!((x - x0).norm() < 1e-12);
    }
}
