//! Closed-loop runs of the simulated system against the estimator, plus the
//! metrics and Monte Carlo comparison against a memoryless pseudo-inverse.

use std::time::Instant;

use nalgebra::SVD;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};
use crate::estimator::{self, EstimatorConfig, EstimatorMode, EstimatorState};
use crate::linalg::{hermitize, numerical_rank, trace_re, CMatrix, CVector};
use crate::quantum::{stacked_observable, FusionMode, GaussianNoise, StateVector, SystemSpec};
use crate::rng::{derive_seed, seeded, SimRng};

/// Relative singular-value cutoff for the pseudo-inverse baseline.
pub const RANK_TOL: f64 = 1e-10;

/// Both methods below this steady-state MSE count as a tie.
pub const TIE_MSE: f64 = 1e-12;

/// One estimator step as seen from outside.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub t: u64,
    pub psi_true: StateVector,
    pub y_observed: CVector,
    pub psi_hat: StateVector,
    /// `‖x⁻ − ψ‖` for the a priori estimate.
    pub apriori_err: f64,
    /// `‖x̂ − ψ‖` for the a posteriori estimate.
    pub aposteriori_err: f64,
    pub fidelity: f64,
    pub gain_fro: f64,
    pub trace_p: f64,
    /// `y − H x⁻`.
    pub innovation_prior: CVector,
    /// `y − H x̂`.
    pub innovation_post: CVector,
    /// Pseudo-inverse reconstruction from the same observable, when the
    /// observation matrix has full column rank.
    pub raw_estimate: Option<CVector>,
}

/// True-state evolution without any estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRecord {
    pub t: u64,
    pub psi: StateVector,
    pub norm: f64,
    /// Born probabilities of each operator, evaluated on `ψ / ‖ψ‖`.
    pub probabilities: Vec<f64>,
}

/// Phase-invariant overlap `|⟨ψ|ψ̂⟩|² / (‖ψ‖² ‖ψ̂‖²)`.
pub fn fidelity(psi: &CVector, psi_hat: &CVector) -> Result<f64> {
    if psi.len() != psi_hat.len() {
        return Err(dim_mismatch("fidelity operands", psi.len(), psi_hat.len()));
    }
    let (n1, n2) = (psi.norm_squared(), psi_hat.norm_squared());
    if !(n1 > 0.0 && n2 > 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(psi.dotc(psi_hat).norm_sqr() / (n1 * n2))
}

/// Moore–Penrose pseudo-inverse of a full-column-rank matrix.
pub fn pseudo_inverse(h: &CMatrix) -> Result<CMatrix> {
    let rank = numerical_rank(h, RANK_TOL);
    if rank < h.ncols() {
        return Err(Error::RankDeficient {
            rank,
            cols: h.ncols(),
        });
    }
    let svd = SVD::new(h.clone(), true, true);
    let cutoff = RANK_TOL * svd.singular_values.max();
    svd.pseudo_inverse(cutoff)
        .map_err(|e| Error::SingularSystem(e.to_string()))
}

/// Memoryless reconstruction `x = H⁺ y`.
pub fn pseudo_inverse_baseline(y: &CVector, h: &CMatrix) -> Result<CVector> {
    if y.len() != h.nrows() {
        return Err(dim_mismatch("observable length", h.nrows(), y.len()));
    }
    Ok(pseudo_inverse(h)? * y)
}

struct Channel {
    label: String,
    h: CMatrix,
    noise: GaussianNoise,
    config: EstimatorConfig,
    state: EstimatorState,
    pinv: Option<CMatrix>,
}

/// Resumable closed loop: true dynamics, noisy observation and one estimator
/// per channel (one channel in stacked mode).
///
/// Each step draws, in order, the state noise and then the measurement noise
/// of every channel from a single seeded stream, so running `s₁` steps and
/// then `s₂ − s₁` more is identical to running `s₂` steps at once.
pub struct TrajectoryRunner {
    a: CMatrix,
    state_noise: GaussianNoise,
    renormalize: bool,
    psi: StateVector,
    channels: Vec<Channel>,
    rng: SimRng,
    t: u64,
}

impl TrajectoryRunner {
    /// Starts from the system's initial state with the uniform initial
    /// estimate `(1, …, 1)/√d`. Where `config` leaves `R` or `Q` unset, the
    /// system's true covariances are used.
    pub fn new(spec: &SystemSpec, config: &EstimatorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let d = spec.dim();
        let x0 = StateVector::uniform(d).into_ket();
        let measurement = spec.measurement();
        let labels: Vec<String> = match measurement.mode() {
            FusionMode::Stacked => vec!["stacked".to_string()],
            FusionMode::Battery => measurement
                .operators()
                .iter()
                .map(|m| m.label.clone())
                .collect(),
        };
        let mut channels = Vec::with_capacity(labels.len());
        for (k, (label, h)) in labels
            .into_iter()
            .zip(measurement.observation_matrices()?)
            .enumerate()
        {
            let r = spec.channel_noise(k);
            let mut cfg = config.clone();
            if cfg.r.is_none() {
                cfg.r = Some(r.clone());
            }
            if cfg.q.is_none() {
                cfg.q = Some(spec.noise().q().clone());
            }
            if cfg.mode == EstimatorMode::NoisyKalman {
                let r_cfg = cfg.r.as_ref().expect("set above");
                if r_cfg.nrows() != h.nrows() {
                    return Err(dim_mismatch("estimator R", h.nrows(), r_cfg.nrows()));
                }
            }
            let state = estimator::init(&cfg, d, x0.clone())?;
            channels.push(Channel {
                label,
                pinv: pseudo_inverse(&h).ok(),
                noise: GaussianNoise::new(&r)?,
                h,
                config: cfg,
                state,
            });
        }
        Ok(Self {
            a: spec.propagator()?,
            state_noise: GaussianNoise::new(spec.noise().q())?,
            renormalize: spec.renormalize_after_state_noise(),
            psi: spec.initial_state().clone(),
            channels,
            rng: seeded(seed),
            t: 0,
        })
    }

    /// Restarts every channel's estimator from `x0`.
    pub fn with_initial_estimate(mut self, x0: CVector) -> Result<Self> {
        for ch in &mut self.channels {
            ch.state = estimator::init(&ch.config, self.psi.dim(), x0.clone())?;
        }
        Ok(self)
    }

    pub fn labels(&self) -> Vec<&str> {
        self.channels.iter().map(|c| c.label.as_str()).collect()
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn truth(&self) -> &StateVector {
        &self.psi
    }

    pub fn estimator_state(&self, channel: usize) -> &EstimatorState {
        &self.channels[channel].state
    }

    /// Advances one step and returns one record per channel.
    pub fn step(&mut self) -> Result<Vec<TrajectoryRecord>> {
        let mut ket = &self.a * self.psi.ket();
        let psi = if self.state_noise.is_silent() {
            StateVector::carry(ket, self.psi.is_normalized())
        } else {
            self.state_noise.perturb(&mut ket, &mut self.rng);
            if self.renormalize {
                StateVector::normalize(ket)?
            } else {
                StateVector::unnormalized(ket)
            }
        };

        let mut records = Vec::with_capacity(self.channels.len());
        for ch in &mut self.channels {
            let mut y = &ch.h * psi.ket();
            ch.noise.perturb(&mut y, &mut self.rng);
            let prev = std::mem::take(&mut ch.state);
            ch.state = estimator::step(prev, &self.a, &ch.h, &y, &ch.config)?;
            let st = &ch.state;
            let x_hat = st.x_hat.clone();
            records.push(TrajectoryRecord {
                t: self.t + 1,
                apriori_err: (&st.last_prior - psi.ket()).norm(),
                aposteriori_err: (&x_hat - psi.ket()).norm(),
                fidelity: fidelity(psi.ket(), &x_hat).unwrap_or(0.0),
                gain_fro: st.last_gain.norm(),
                trace_p: trace_re(&hermitize(&st.p)),
                innovation_prior: st.last_innovation.clone(),
                innovation_post: &y - &ch.h * &x_hat,
                raw_estimate: ch.pinv.as_ref().map(|p| p * &y),
                psi_true: psi.clone(),
                psi_hat: StateVector::unnormalized(x_hat),
                y_observed: y,
            });
        }
        self.psi = psi;
        self.t += 1;
        Ok(records)
    }

    /// Runs `n` steps, appending channel `k`'s records to `sinks[k]`. On
    /// error the sinks hold every record up to the failing step.
    pub fn advance(&mut self, n: usize, sinks: &mut [Vec<TrajectoryRecord>]) -> Result<()> {
        if sinks.len() != self.channels.len() {
            return Err(dim_mismatch(
                "record sinks",
                self.channels.len(),
                sinks.len(),
            ));
        }
        for _ in 0..n {
            for (sink, rec) in sinks.iter_mut().zip(self.step()?) {
                sink.push(rec);
            }
        }
        Ok(())
    }
}

fn require_steps(steps: usize) -> Result<()> {
    if steps == 0 {
        return Err(Error::BadConfig("at least one step is required".into()));
    }
    Ok(())
}

/// Closed-loop run with a single joint (stacked) estimator.
pub fn run_trajectory(
    spec: &SystemSpec,
    config: &EstimatorConfig,
    steps: usize,
    seed: u64,
) -> Result<Vec<TrajectoryRecord>> {
    run_trajectory_from(spec, config, None, steps, seed)
}

/// [`run_trajectory`] with an explicit initial estimate (uniform if `None`).
pub fn run_trajectory_from(
    spec: &SystemSpec,
    config: &EstimatorConfig,
    x0: Option<&CVector>,
    steps: usize,
    seed: u64,
) -> Result<Vec<TrajectoryRecord>> {
    require_steps(steps)?;
    if spec.measurement().mode() != FusionMode::Stacked {
        return Err(Error::BadConfig(
            "battery-mode systems produce one record stream per operator; use run_battery".into(),
        ));
    }
    let mut runner = start(spec, config, x0, seed)?;
    let mut sinks = vec![Vec::with_capacity(steps)];
    runner.advance(steps, &mut sinks)?;
    Ok(sinks.pop().expect("one channel"))
}

fn start(
    spec: &SystemSpec,
    config: &EstimatorConfig,
    x0: Option<&CVector>,
    seed: u64,
) -> Result<TrajectoryRunner> {
    let runner = TrajectoryRunner::new(spec, config, seed)?;
    match x0 {
        Some(x0) => runner.with_initial_estimate(x0.clone()),
        None => Ok(runner),
    }
}

/// Closed-loop run with one independent estimator per measurement operator.
pub fn run_battery(
    spec: &SystemSpec,
    config: &EstimatorConfig,
    x0: Option<&CVector>,
    steps: usize,
    seed: u64,
) -> Result<Vec<(String, Vec<TrajectoryRecord>)>> {
    require_steps(steps)?;
    let mut runner = start(spec, config, x0, seed)?;
    let labels: Vec<String> = runner.labels().into_iter().map(String::from).collect();
    let mut sinks = vec![Vec::with_capacity(steps); labels.len()];
    runner.advance(steps, &mut sinks)?;
    Ok(labels.into_iter().zip(sinks).collect())
}

/// Evolves the true state (with state noise) and reports Born probabilities,
/// without measuring or estimating.
pub fn simulate(spec: &SystemSpec, steps: usize, seed: u64) -> Result<Vec<SimulationRecord>> {
    require_steps(steps)?;
    let a = spec.propagator()?;
    let noise = GaussianNoise::new(spec.noise().q())?;
    let mut rng = seeded(seed);
    let mut psi = spec.initial_state().clone();
    let mut out = Vec::with_capacity(steps);
    for t in 1..=steps as u64 {
        let mut ket = &a * psi.ket();
        psi = if noise.is_silent() {
            StateVector::carry(ket, psi.is_normalized())
        } else {
            noise.perturb(&mut ket, &mut rng);
            if spec.renormalize_after_state_noise() {
                StateVector::normalize(ket)?
            } else {
                StateVector::unnormalized(ket)
            }
        };
        let norm = psi.norm();
        let probabilities = spec
            .measurement()
            .operators()
            .iter()
            .map(|m| (&m.op * psi.ket()).norm_squared() / (norm * norm))
            .collect();
        out.push(SimulationRecord {
            t,
            psi: psi.clone(),
            norm,
            probabilities,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Apriori,
    Aposteriori,
}

/// Monte Carlo estimate of `E[ε ε†]` at every step, averaging over runs.
pub fn error_covariance_estimate(
    runs: &[Vec<TrajectoryRecord>],
    which: ErrorKind,
) -> Result<Vec<CMatrix>> {
    if runs.len() < 2 {
        return Err(Error::InsufficientRuns {
            required: 2,
            got: runs.len(),
        });
    }
    let steps = runs[0].len();
    if let Some(bad) = runs.iter().find(|r| r.len() != steps) {
        return Err(dim_mismatch("run length", steps, bad.len()));
    }
    let pick = |rec: &TrajectoryRecord| match which {
        ErrorKind::Apriori => rec.innovation_prior.clone(),
        ErrorKind::Aposteriori => rec.innovation_post.clone(),
    };
    (0..steps)
        .map(|t| {
            let samples: Vec<CVector> = runs.iter().map(|r| pick(&r[t])).collect();
            mean_outer_product(&samples)
        })
        .collect()
}

/// `(1/n) Σ v v†`, symmetrized.
pub fn mean_outer_product(samples: &[CVector]) -> Result<CMatrix> {
    let m = samples
        .first()
        .ok_or(Error::InsufficientRuns {
            required: 1,
            got: 0,
        })?
        .len();
    let mut acc = CMatrix::zeros(m, m);
    for v in samples {
        if v.len() != m {
            return Err(dim_mismatch("sample length", m, v.len()));
        }
        acc += v * v.adjoint();
    }
    Ok(hermitize(&acc.unscale(samples.len() as f64)))
}

/// Number of trailing steps averaged for steady-state MSE: the last 25%
/// (rounded up, at least one).
pub fn mse_window(steps: usize) -> usize {
    steps.div_ceil(4).max(1)
}

/// Mean of `‖x̂ − ψ‖²` over the steady-state window.
pub fn steady_state_mse(records: &[TrajectoryRecord]) -> f64 {
    window(records)
        .iter()
        .map(|r| r.aposteriori_err * r.aposteriori_err)
        .sum::<f64>()
        / window(records).len().max(1) as f64
}

/// Mean of `‖H⁺y − ψ‖²` over the steady-state window, if the baseline ran.
pub fn steady_state_raw_mse(records: &[TrajectoryRecord]) -> Option<f64> {
    let w = window(records);
    let mut sum = 0.0;
    for r in w {
        let raw = r.raw_estimate.as_ref()?;
        sum += (raw - r.psi_true.ket()).norm_squared();
    }
    Some(sum / w.len().max(1) as f64)
}

fn window(records: &[TrajectoryRecord]) -> &[TrajectoryRecord] {
    let n = mse_window(records.len()).min(records.len());
    &records[records.len() - n..]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    RawPseudoInverse,
    Ose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: BaselineKind,
    pub mean_mse: f64,
    pub std_mse: f64,
    pub mean_final_fidelity: f64,
    pub per_seed_mse: Vec<f64>,
    pub per_seed_final_fidelity: Vec<f64>,
}

/// Echo of the settings a summary was produced with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub dim: usize,
    pub n_operators: usize,
    pub norm_kind: String,
    pub fusion_mode: String,
    pub estimator_mode: String,
    pub lambda: f64,
    pub delta: f64,
    pub process_noise_mode: String,
    pub trace_q: f64,
    pub trace_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n_seeds: usize,
    pub steps: usize,
    pub seed_base: u64,
    pub mse_window: usize,
    pub methods: Vec<MethodSummary>,
    /// Fraction of seeds on which the estimator's MSE beat the baseline's.
    pub paired_improvement_fraction: f64,
    /// Both methods reached MSE ≤ 1e−12 (noiseless limit).
    pub degenerate_tie: bool,
    pub config: ConfigEcho,
    pub wall_time_s: f64,
}

impl RunSummary {
    pub fn method(&self, kind: BaselineKind) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == kind)
    }
}

/// Per-seed outcome of a paired run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedOutcome {
    pub ose_mse: f64,
    pub raw_mse: f64,
    pub ose_final_fidelity: f64,
    pub raw_final_fidelity: f64,
}

/// Runs one seed; both methods see the same observable stream.
pub fn evaluate_seed(
    spec: &SystemSpec,
    config: &EstimatorConfig,
    x0: Option<&CVector>,
    steps: usize,
    seed: u64,
) -> Result<SeedOutcome> {
    let records = run_trajectory_from(spec, config, x0, steps, seed)?;
    let last = records.last().expect("steps >= 1");
    let Some(raw_mse) = steady_state_raw_mse(&records) else {
        let h = stacked_observable(spec.measurement())?;
        return Err(Error::RankDeficient {
            rank: numerical_rank(&h, RANK_TOL),
            cols: h.ncols(),
        });
    };
    let raw_last = last.raw_estimate.as_ref().expect("baseline present");
    Ok(SeedOutcome {
        ose_mse: steady_state_mse(&records),
        raw_mse,
        ose_final_fidelity: last.fidelity,
        raw_final_fidelity: fidelity(last.psi_true.ket(), raw_last).unwrap_or(0.0),
    })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Paired Monte Carlo comparison of the estimator against the per-step
/// pseudo-inverse. Seed `i` is `seed_base + i`; seeds run in parallel and
/// are aggregated in index order.
pub fn monte_carlo_compare(
    spec: &SystemSpec,
    config: &EstimatorConfig,
    n_seeds: usize,
    steps: usize,
    seed_base: u64,
) -> Result<RunSummary> {
    monte_carlo_compare_from(spec, config, None, n_seeds, steps, seed_base)
}

/// [`monte_carlo_compare`] with an explicit initial estimate.
pub fn monte_carlo_compare_from(
    spec: &SystemSpec,
    config: &EstimatorConfig,
    x0: Option<&CVector>,
    n_seeds: usize,
    steps: usize,
    seed_base: u64,
) -> Result<RunSummary> {
    if n_seeds < 2 {
        return Err(Error::InsufficientRuns {
            required: 2,
            got: n_seeds,
        });
    }
    require_steps(steps)?;
    let started = Instant::now();
    let outcomes = (0..n_seeds as u64)
        .into_par_iter()
        .map(|i| evaluate_seed(spec, config, x0, steps, derive_seed(seed_base, i)))
        .collect::<Result<Vec<_>>>()?;

    let ose_mse: Vec<f64> = outcomes.iter().map(|o| o.ose_mse).collect();
    let raw_mse: Vec<f64> = outcomes.iter().map(|o| o.raw_mse).collect();
    let ose_fid: Vec<f64> = outcomes.iter().map(|o| o.ose_final_fidelity).collect();
    let raw_fid: Vec<f64> = outcomes.iter().map(|o| o.raw_final_fidelity).collect();
    let summarize = |method, mse: Vec<f64>, fid: Vec<f64>| {
        let (mean_mse, std_mse) = mean_std(&mse);
        let (mean_final_fidelity, _) = mean_std(&fid);
        MethodSummary {
            method,
            mean_mse,
            std_mse,
            mean_final_fidelity,
            per_seed_mse: mse,
            per_seed_final_fidelity: fid,
        }
    };
    let improved = outcomes.iter().filter(|o| o.ose_mse < o.raw_mse).count();
    let ose = summarize(BaselineKind::Ose, ose_mse, ose_fid);
    let raw = summarize(BaselineKind::RawPseudoInverse, raw_mse, raw_fid);
    let degenerate_tie = ose.mean_mse <= TIE_MSE && raw.mean_mse <= TIE_MSE;
    let measurement = spec.measurement();
    Ok(RunSummary {
        n_seeds,
        steps,
        seed_base,
        mse_window: mse_window(steps),
        paired_improvement_fraction: improved as f64 / n_seeds as f64,
        degenerate_tie,
        methods: vec![raw, ose],
        config: ConfigEcho {
            dim: spec.dim(),
            n_operators: measurement.len(),
            norm_kind: measurement.norm_kind().name().to_string(),
            fusion_mode: measurement.mode().name().to_string(),
            estimator_mode: config.mode.name().to_string(),
            lambda: config.lambda,
            delta: config.delta,
            process_noise_mode: config.process_noise_mode.name().to_string(),
            trace_q: trace_re(spec.noise().q()),
            trace_r: trace_re(spec.noise().r()),
        },
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}
