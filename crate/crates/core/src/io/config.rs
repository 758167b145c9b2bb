//! TOML experiment configuration.
//!
//! Complex numbers are written as `[re, im]` pairs and matrices as arrays of
//! rows of such pairs. Operators may instead name a preset (`"H"`) or a
//! Kronecker product of presets (`["H", "I"]`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{EstimatorConfig, EstimatorMode};
use crate::linalg::{c, CMatrix, CVector, NormKind};
use crate::quantum::{
    haar_random_unitary, kron_presets, preset, standard_complex_normal, Dynamics, FusionMode,
    MeasurementModel, MeasurementOperator, NoiseSpec, ProcessNoiseMode, StateVector, SystemSpec,
};
use crate::rng::seeded;

pub const SCHEMA_VERSION: u32 = 1;

pub type ComplexPair = [f64; 2];
pub type MatrixRows = Vec<Vec<ComplexPair>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub system: SystemSection,
    #[serde(default)]
    pub estimator: EstimatorSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub dim: usize,
    pub initial_state: Vec<ComplexPair>,
    pub dynamics: DynamicsSection,
    pub measurement: MeasurementSection,
    #[serde(default)]
    pub noise: NoiseSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsForm {
    Unitary,
    Hamiltonian,
}

/// Exactly one of `preset`, `kron` or `matrix` must be given.
struct MatrixSource<'a> {
    preset: Option<&'a String>,
    kron: Option<&'a Vec<String>>,
    matrix: Option<&'a MatrixRows>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    pub form: DynamicsForm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kron: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixRows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKindName {
    #[default]
    Spectral,
    Frobenius,
    StateDependent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSection {
    #[serde(default)]
    pub norm_kind: NormKindName,
    /// Surrogate state used by the state-dependent norm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_state: Option<Vec<ComplexPair>>,
    #[serde(default)]
    pub mode: FusionMode,
    pub operators: Vec<OperatorSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSection {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kron: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixRows>,
}

/// Isotropic `σ` values and full covariance matrices are mutually exclusive
/// per covariance. Anything left out is zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<MatrixRows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<MatrixRows>,
    #[serde(default)]
    pub renormalize_after_state_noise: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub lambda: f64,
    pub delta: f64,
    #[serde(default)]
    pub mode: EstimatorMode,
    #[serde(default)]
    pub process_noise_mode: ProcessNoiseMode,
    /// Defaults to the uniform superposition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_estimate: Option<Vec<ComplexPair>>,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        let d = EstimatorConfig::default();
        Self {
            lambda: d.lambda,
            delta: d.delta,
            mode: d.mode,
            process_noise_mode: d.process_noise_mode,
            initial_estimate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub steps: usize,
    pub n_seeds: usize,
    pub seed_base: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records_csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    #[serde(default)]
    pub log_states: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            steps: 200,
            n_seeds: 100,
            seed_base: 0,
            records_csv: None,
            summary: None,
            log_states: false,
        }
    }
}

/// A validated configuration turned into runtime objects.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub system: SystemSpec,
    pub estimator: EstimatorConfig,
    pub initial_estimate: Option<CVector>,
    pub run: RunSection,
}

/// Parses and validates. Syntax and type errors are `Parse`; semantic
/// problems are `Validation` naming the offending field.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = toml::from_str(text)
        .map_err(|e| Error::Parse(e.message().to_string() + span_hint(text, e.span()).as_str()))?;
    config.build()?;
    Ok(config)
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(s) => {
            let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        None => String::new(),
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn invalid(field: &str, err: Error) -> Error {
    match err {
        Error::Validation { .. } => err,
        other => Error::validation(field, other.to_string()),
    }
}

fn vector_from_pairs(field: &str, pairs: &[ComplexPair], d: usize) -> Result<CVector> {
    if pairs.len() != d {
        return Err(Error::validation(
            field,
            format!("expected {d} entries, found {}", pairs.len()),
        ));
    }
    if pairs.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::validation(field, "entries must be finite"));
    }
    Ok(CVector::from_iterator(
        d,
        pairs.iter().map(|p| c(p[0], p[1])),
    ))
}

fn matrix_from_rows(field: &str, rows: &MatrixRows, d: usize) -> Result<CMatrix> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::validation(
            field,
            format!("expected a {d}x{d} matrix"),
        ));
    }
    if rows.iter().flatten().flatten().any(|v| !v.is_finite()) {
        return Err(Error::validation(field, "entries must be finite"));
    }
    Ok(CMatrix::from_fn(d, d, |i, j| {
        c(rows[i][j][0], rows[i][j][1])
    }))
}

pub fn matrix_to_rows(m: &CMatrix) -> MatrixRows {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect()
}

pub fn vector_to_pairs(v: &CVector) -> Vec<ComplexPair> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

impl MatrixSource<'_> {
    fn resolve(&self, field: &str, d: usize) -> Result<CMatrix> {
        let given = [
            self.preset.is_some(),
            self.kron.is_some(),
            self.matrix.is_some(),
        ];
        if given.iter().filter(|g| **g).count() != 1 {
            return Err(Error::validation(
                field,
                "give exactly one of `preset`, `kron` or `matrix`",
            ));
        }
        let m = if let Some(name) = &self.preset {
            preset(name).ok_or_else(|| {
                Error::validation(
                    format!("{field}.preset"),
                    format!("unknown preset `{name}`"),
                )
            })?
        } else if let Some(names) = &self.kron {
            kron_presets(names).map_err(|e| invalid(&format!("{field}.kron"), e))?
        } else {
            return matrix_from_rows(&format!("{field}.matrix"), self.matrix.expect("checked"), d);
        };
        if m.nrows() != d {
            return Err(Error::validation(
                field,
                format!("operator is {0}x{0}, system dimension is {d}", m.nrows()),
            ));
        }
        Ok(m)
    }
}

fn covariance(
    field: &str,
    sigma: Option<f64>,
    full: Option<&MatrixRows>,
    d: usize,
) -> Result<CMatrix> {
    match (sigma, full) {
        (Some(_), Some(_)) => Err(Error::validation(
            field,
            "give either a sigma or a full matrix, not both",
        )),
        (Some(s), None) => {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::validation(
                    field,
                    format!("sigma must be non-negative, got {s}"),
                ));
            }
            Ok(CMatrix::identity(d, d).scale(s * s))
        }
        (None, Some(rows)) => matrix_from_rows(field, rows, d),
        (None, None) => Ok(CMatrix::zeros(d, d)),
    }
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Validates every field and builds the runtime objects.
    pub fn build(&self) -> Result<Experiment> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::validation(
                "schema_version",
                format!(
                    "unsupported version {}, expected {SCHEMA_VERSION}",
                    self.schema_version
                ),
            ));
        }
        let sys = &self.system;
        let d = sys.dim;
        if d == 0 {
            return Err(Error::validation("system.dim", "must be at least 1"));
        }
        let psi0 = vector_from_pairs("system.initial_state", &sys.initial_state, d)?;
        let psi0 = StateVector::new(psi0).map_err(|e| invalid("system.initial_state", e))?;

        let dynamics = self.build_dynamics(d)?;
        let measurement = self.build_measurement(d)?;
        let est = &self.estimator;

        let noise = &sys.noise;
        let q = covariance("system.noise.q", noise.sigma_q, noise.q.as_ref(), d)?;
        let r_dim = match measurement.mode() {
            FusionMode::Stacked => measurement.observable_dim(),
            FusionMode::Battery => d,
        };
        let r = covariance("system.noise.r", noise.sigma_r, noise.r.as_ref(), r_dim)?;
        let noise_spec =
            NoiseSpec::new(q, r, est.process_noise_mode).map_err(|e| invalid("system.noise", e))?;
        let system = SystemSpec::new(dynamics, measurement, noise_spec, psi0)
            .map_err(|e| invalid("system", e))?
            .with_renormalization(noise.renormalize_after_state_noise);

        if !(est.lambda > 0.0 && est.lambda <= 1.0) {
            return Err(Error::validation(
                "estimator.lambda",
                format!("must lie in (0, 1], got {}", est.lambda),
            ));
        }
        if !(est.delta > 0.0) || !est.delta.is_finite() {
            return Err(Error::validation(
                "estimator.delta",
                format!("must be positive and finite, got {}", est.delta),
            ));
        }
        let estimator = EstimatorConfig {
            lambda: est.lambda,
            delta: est.delta,
            mode: est.mode,
            process_noise_mode: est.process_noise_mode,
            ..EstimatorConfig::default()
        };
        let initial_estimate = est
            .initial_estimate
            .as_ref()
            .map(|pairs| vector_from_pairs("estimator.initial_estimate", pairs, d))
            .transpose()?;

        if self.run.steps == 0 {
            return Err(Error::validation("run.steps", "must be at least 1"));
        }
        if self.run.n_seeds == 0 {
            return Err(Error::validation("run.n_seeds", "must be at least 1"));
        }
        Ok(Experiment {
            system,
            estimator,
            initial_estimate,
            run: self.run.clone(),
        })
    }

    fn build_dynamics(&self, d: usize) -> Result<Dynamics> {
        let dy = &self.system.dynamics;
        let m = MatrixSource {
            preset: dy.preset.as_ref(),
            kron: dy.kron.as_ref(),
            matrix: dy.matrix.as_ref(),
        }
        .resolve("system.dynamics", d)?;
        let dynamics = match dy.form {
            DynamicsForm::Unitary => {
                if dy.dt.is_some() || dy.hbar.is_some() {
                    return Err(Error::validation(
                        "system.dynamics",
                        "`dt` and `hbar` only apply to the hamiltonian form",
                    ));
                }
                Dynamics::Unitary(m)
            }
            DynamicsForm::Hamiltonian => Dynamics::Hamiltonian {
                h: m,
                dt: dy.dt.ok_or_else(|| {
                    Error::validation("system.dynamics.dt", "required for the hamiltonian form")
                })?,
                hbar: dy.hbar.unwrap_or(1.0),
            },
        };
        // Surface unitarity/Hermiticity problems under the dynamics field.
        let probe = MeasurementModel::projective(d, NormKind::Spectral, FusionMode::Stacked)?;
        SystemSpec::new(
            dynamics.clone(),
            probe,
            NoiseSpec::noiseless(d, d * d),
            StateVector::basis(d, 0),
        )
        .map_err(|e| invalid("system.dynamics", e))?;
        Ok(dynamics)
    }

    fn build_measurement(&self, d: usize) -> Result<MeasurementModel> {
        let ms = &self.system.measurement;
        if ms.operators.is_empty() {
            return Err(Error::validation(
                "system.measurement.operators",
                "at least one operator is required",
            ));
        }
        let mut operators = Vec::with_capacity(ms.operators.len());
        for (i, op) in ms.operators.iter().enumerate() {
            let field = format!("system.measurement.operators[{i}]");
            if op.label.is_empty() {
                return Err(Error::validation(
                    format!("{field}.label"),
                    "must not be empty",
                ));
            }
            if operators
                .iter()
                .any(|m: &MeasurementOperator| m.label == op.label)
            {
                return Err(Error::validation(
                    format!("{field}.label"),
                    format!("duplicate label `{}`", op.label),
                ));
            }
            operators.push(MeasurementOperator {
                label: op.label.clone(),
                op: MatrixSource {
                    preset: op.preset.as_ref(),
                    kron: op.kron.as_ref(),
                    matrix: op.matrix.as_ref(),
                }
                .resolve(&field, d)?,
            });
        }
        let norm_kind = match (ms.norm_kind, &ms.reference_state) {
            (NormKindName::Spectral, None) => NormKind::Spectral,
            (NormKindName::Frobenius, None) => NormKind::Frobenius,
            (NormKindName::StateDependent, Some(pairs)) => NormKind::StateDependent(
                vector_from_pairs("system.measurement.reference_state", pairs, d)?,
            ),
            (NormKindName::StateDependent, None) => {
                return Err(Error::validation(
                    "system.measurement.reference_state",
                    "required by the state_dependent norm",
                ))
            }
            (_, Some(_)) => {
                return Err(Error::validation(
                    "system.measurement.reference_state",
                    "only used by the state_dependent norm",
                ))
            }
        };
        let model = MeasurementModel::new(operators, norm_kind, ms.mode)
            .map_err(|e| invalid("system.measurement.operators", e))?;
        // Every normalized operator must be computable up front.
        model
            .normalized_operators()
            .map_err(|e| invalid("system.measurement.operators", e))?;
        Ok(model)
    }
}

/// Random test system: Haar propagator, computational-basis projectors,
/// random initial state. `sigma_r > 0` selects the noisy estimator.
pub fn gen_system(dim: usize, seed: u64, sigma_r: f64) -> Result<ExperimentConfig> {
    if dim == 0 {
        return Err(Error::validation("dim", "must be at least 1"));
    }
    if !(sigma_r >= 0.0) || !sigma_r.is_finite() {
        return Err(Error::validation(
            "sigma_r",
            format!("must be non-negative, got {sigma_r}"),
        ));
    }
    let mut rng = seeded(seed);
    let u = haar_random_unitary(dim, &mut rng);
    let psi = standard_complex_normal(dim, &mut rng);
    let psi = &psi / c(psi.norm(), 0.0);
    let operators = (0..dim)
        .map(|k| OperatorSection {
            label: format!("a{k}"),
            preset: None,
            kron: None,
            matrix: Some(matrix_to_rows(&CMatrix::from_fn(dim, dim, |i, j| {
                c(if i == k && j == k { 1.0 } else { 0.0 }, 0.0)
            }))),
        })
        .collect();
    let noisy = sigma_r > 0.0;
    let config = ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        system: SystemSection {
            dim,
            initial_state: vector_to_pairs(&psi),
            dynamics: DynamicsSection {
                form: DynamicsForm::Unitary,
                preset: None,
                kron: None,
                matrix: Some(matrix_to_rows(&u)),
                dt: None,
                hbar: None,
            },
            measurement: MeasurementSection {
                norm_kind: NormKindName::Spectral,
                reference_state: None,
                mode: FusionMode::Stacked,
                operators,
            },
            noise: NoiseSection {
                sigma_r: noisy.then_some(sigma_r),
                ..NoiseSection::default()
            },
        },
        estimator: EstimatorSection {
            lambda: if noisy { 1.0 } else { 0.99 },
            mode: if noisy {
                EstimatorMode::NoisyKalman
            } else {
                EstimatorMode::NoiselessRls
            },
            ..EstimatorSection::default()
        },
        run: RunSection {
            seed_base: seed,
            ..RunSection::default()
        },
    };
    config.build()?;
    Ok(config)
}
