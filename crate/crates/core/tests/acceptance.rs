//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line for
//! each and exits non-zero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use ose_core::estimator::{
    self, batch_weighted_ls_oracle, CorrectionSign, EstimatorConfig, ObservationBatch,
};
use ose_core::harness::{monte_carlo_compare, mse_window, run_trajectory, BaselineKind};
use ose_core::io::{load_config, parse_config, records_csv};
use ose_core::linalg::{hermitian_expm, spectral_norm, NormKind};
use ose_core::quantum::{
    haar_random_unitary, outcome_probability, sample_outcome, Dynamics, FusionMode,
    MeasurementModel, MeasurementOperator, NoiseSpec, ProcessNoiseMode, StateVector, SystemSpec,
};
use ose_core::rng::seeded;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// 1. Iterated steps against the exponentially weighted batch solution.
fn rls_matches_batch() -> Outcome {
    let mut rng = seeded(0xA11CE);
    let lambdas = [0.9, 0.99, 1.0];
    let deltas = [1.0, 1e3];
    let trials = 240;
    let mut worst: f64 = 0.0;
    let mut worst_vs_test_oracle: f64 = 0.0;
    for trial in 0..trials {
        let lambda = lambdas[trial % 3];
        let delta = deltas[(trial / 3) % 2];
        let d = rng.random_range(1..=6);
        let t = rng.random_range(1..=30);
        let x0 = random_vector(d, &mut rng);
        let steps: Vec<(M, V)> = (0..t)
            .map(|_| {
                let m = rng.random_range(1..=d);
                (random_matrix(m, d, &mut rng), random_vector(m, &mut rng))
            })
            .collect();
        let config = EstimatorConfig::noiseless(lambda, delta).unwrap();
        let a = M::identity(d, d);
        let mut state = estimator::init(&config, d, x0.clone()).unwrap();
        for (h, y) in &steps {
            state = estimator::step(state, &a, h, y, &config).unwrap();
        }
        let batch = ObservationBatch::new(steps.clone()).unwrap();
        let oracle = batch_weighted_ls_oracle(&batch, lambda, delta, &x0).unwrap();
        let independent = weighted_ls(&steps, lambda, delta, &x0);
        worst = worst.max((&state.x_hat - &oracle).norm() / oracle.norm());
        worst_vs_test_oracle =
            worst_vs_test_oracle.max((&state.x_hat - &independent).norm() / independent.norm());
    }
    let err = worst.max(worst_vs_test_oracle);
    outcome(
        err <= 1e-8,
        format!("{trials} systems, max rel err {worst:.2e} (batch op), {worst_vs_test_oracle:.2e} (SVD oracle)"),
    )
}

// 2. P_T against the inverted information matrix.
fn information_form() -> Outcome {
    let mut rng = seeded(0xB0B);
    let cases = 60;
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let d = rng.random_range(1..=6);
        let t = rng.random_range(1..=30);
        let delta = if case % 2 == 0 { 1.0 } else { 1e3 };
        let config = EstimatorConfig::noiseless(1.0, delta).unwrap();
        let a = M::identity(d, d);
        let mut state = estimator::init(&config, d, V::zeros(d)).unwrap();
        let mut info = M::identity(d, d).unscale(delta);
        for _ in 0..t {
            let m = rng.random_range(1..=d);
            let h = random_matrix(m, d, &mut rng);
            let y = random_vector(m, &mut rng);
            info += h.adjoint() * &h;
            state = estimator::step(state, &a, &h, &y, &config).unwrap();
        }
        let p_oracle = gauss_jordan_inverse(&info);
        worst = worst.max((&state.p - &p_oracle).norm());
    }
    outcome(
        worst <= 1e-8,
        format!("{cases} cases, max Frobenius err {worst:.2e}"),
    )
}

/// Fraction of seeds reaching fidelity ≥ 1 − 1e−6 at step 50, per dimension.
fn convergence_rates(sign: CorrectionSign) -> Vec<(usize, f64)> {
    let dims = [2, 4, 8];
    let seeds = 100u64;
    dims.iter()
        .map(|&d| {
            let mut hits = 0;
            for seed in 0..seeds {
                let mut rng = seeded(1_000 * d as u64 + seed);
                let u = haar_random_unitary(d, &mut rng);
                let psi0 = StateVector::new(random_state(d, &mut rng)).unwrap();
                let model =
                    MeasurementModel::projective(d, NormKind::Spectral, FusionMode::Stacked)
                        .unwrap();
                let spec = SystemSpec::new(
                    Dynamics::Unitary(u),
                    model,
                    NoiseSpec::noiseless(d, d * d),
                    psi0,
                )
                .unwrap();
                let config = EstimatorConfig {
                    correction_sign: sign,
                    ..EstimatorConfig::default()
                };
                let records = run_trajectory(&spec, &config, 50, seed).unwrap();
                let last = records.last().unwrap();
                let f = fidelity(last.psi_true.ket(), last.psi_hat.ket());
                if f.is_finite() && f >= 1.0 - 1e-6 {
                    hits += 1;
                }
            }
            (d, hits as f64 / seeds as f64)
        })
        .collect()
}

fn describe_rates(rates: &[(usize, f64)]) -> String {
    rates
        .iter()
        .map(|(d, r)| format!("d={d}: {:.0}%", r * 100.0))
        .collect::<Vec<_>>()
        .join(", ")
}

// 3. Noiseless closed loop.
fn noiseless_convergence() -> Outcome {
    let rates = convergence_rates(CorrectionSign::Plus);
    let pass = rates.iter().all(|(_, r)| *r >= 0.95);
    outcome(pass, format!("converged seeds {}", describe_rates(&rates)))
}

// 4. Propagators, Born rule, sampling, completeness.
fn quantum_kernels() -> Outcome {
    let mut rng = seeded(0xC0FFEE);
    let mut notes = Vec::new();
    let mut pass = true;

    let mut expm_err: f64 = 0.0;
    let mut unit_err: f64 = 0.0;
    for _ in 0..200 {
        let d = rng.random_range(1..=6);
        let h = random_hermitian(d, &mut rng);
        let hbar = rng.random_range(0.5..2.0);
        let target: f64 = rng.random_range(0.05..1.0);
        let t = target * hbar / spectral_norm(&h).max(1e-12);
        let u = hermitian_expm(&h, t, hbar).unwrap();
        expm_err = expm_err.max((&u - taylor_expm(&h, t, hbar, 20)).norm());
        unit_err = unit_err.max(unitarity_defect(&u));
        unit_err = unit_err.max(unitarity_defect(&haar_random_unitary(d, &mut rng)));
    }
    pass &= expm_err <= 1e-9 && unit_err <= 1e-10;
    notes.push(format!(
        "expm vs Taylor {expm_err:.1e}, unitarity {unit_err:.1e}"
    ));

    let mut born_err: f64 = 0.0;
    let mut prob_err: f64 = 0.0;
    for _ in 0..1000 {
        let d = rng.random_range(1..=6);
        let n = rng.random_range(1..=4);
        let kraus = random_kraus(d, n, &mut rng);
        let psi = random_state(d, &mut rng);
        let state = StateVector::new(psi.clone()).unwrap();
        let mut sum = 0.0;
        for m in &kraus {
            let p = outcome_probability(&state, m).unwrap();
            prob_err = prob_err.max((p - (m * &psi).norm_squared()).abs());
            sum += p;
        }
        born_err = born_err.max((sum - 1.0).abs());
    }
    pass &= born_err <= 1e-8 && prob_err <= 1e-12;
    notes.push(format!("Born sum err {born_err:.1e}"));

    let d = 3;
    let kraus = random_kraus(d, 4, &mut rng);
    let psi = random_state(d, &mut rng);
    let ops: Vec<MeasurementOperator> = kraus
        .iter()
        .enumerate()
        .map(|(i, m)| MeasurementOperator {
            label: format!("m{i}"),
            op: m.clone(),
        })
        .collect();
    let model = MeasurementModel::new(ops, NormKind::Spectral, FusionMode::Stacked).unwrap();
    let state = StateVector::new(psi.clone()).unwrap();
    let samples = 100_000usize;
    let mut counts = [0usize; 4];
    for _ in 0..samples {
        let (label, _) = sample_outcome(&state, &model, &mut rng).unwrap();
        counts[label[1..].parse::<usize>().unwrap()] += 1;
    }
    let mut worst_sigma: f64 = 0.0;
    for (m, count) in kraus.iter().zip(counts) {
        let p = (m * &psi).norm_squared();
        let sd = (samples as f64 * p * (1.0 - p)).sqrt();
        worst_sigma = worst_sigma.max((count as f64 - samples as f64 * p).abs() / sd);
    }
    pass &= worst_sigma <= 3.0;
    notes.push(format!("sampling max {worst_sigma:.2} sigma"));

    let p = projectors(2);
    let single = vec![MeasurementOperator {
        label: "p0".into(),
        op: p[0].clone(),
    }];
    let pair = vec![
        MeasurementOperator {
            label: "p0".into(),
            op: p[0].clone(),
        },
        MeasurementOperator {
            label: "p1".into(),
            op: p[1].clone(),
        },
    ];
    let rejects = MeasurementModel::new(single, NormKind::Spectral, FusionMode::Stacked).is_err();
    let accepts = MeasurementModel::new(pair, NormKind::Spectral, FusionMode::Stacked).is_ok();
    pass &= rejects && accepts;
    notes.push(format!(
        "{{P0}} rejected: {rejects}, {{P0,P1}} accepted: {accepts}"
    ));

    outcome(pass, notes.join("; "))
}

// 5. Paired comparison against the per-step pseudo-inverse.
fn noisy_advantage() -> Outcome {
    let sigma = 0.05;
    let steps = 200;
    let seeds = 100;
    let mut pass = true;
    let mut notes = Vec::new();
    for d in [2usize, 4] {
        let mut rng = seeded(77 + d as u64);
        let u = haar_random_unitary(d, &mut rng);
        let psi0 = StateVector::new(random_state(d, &mut rng)).unwrap();
        let model =
            MeasurementModel::projective(d, NormKind::Spectral, FusionMode::Stacked).unwrap();
        let noise =
            NoiseSpec::isotropic(d, d * d, 0.0, sigma, ProcessNoiseMode::OutputFolded).unwrap();
        let spec = SystemSpec::new(Dynamics::Unitary(u), model, noise, psi0).unwrap();
        let config = EstimatorConfig::noisy(
            1e6,
            M::identity(d * d, d * d).scale(sigma * sigma),
            None,
            ProcessNoiseMode::OutputFolded,
        )
        .unwrap();
        let seed_base = 5_000;
        let summary = monte_carlo_compare(&spec, &config, seeds, steps, seed_base).unwrap();

        // Recompute both MSEs per seed from the raw observation stream.
        let w = mse_window(steps);
        let mut ose = Vec::with_capacity(seeds);
        let mut raw = Vec::with_capacity(seeds);
        for i in 0..seeds as u64 {
            let records = run_trajectory(&spec, &config, steps, seed_base + i).unwrap();
            let h = ose_core::quantum::stacked_observable(spec.measurement()).unwrap();
            let svd = h.clone().svd(true, true);
            let tail = &records[steps - w..];
            let mut e_ose = 0.0;
            let mut e_raw = 0.0;
            for r in tail {
                let psi = r.psi_true.ket();
                e_ose += (r.psi_hat.ket() - psi).norm_squared();
                e_raw += (svd.solve(&r.y_observed, 1e-14).unwrap() - psi).norm_squared();
            }
            ose.push(e_ose / w as f64);
            raw.push(e_raw / w as f64);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let improved = ose.iter().zip(&raw).filter(|(o, r)| o < r).count() as f64 / seeds as f64;
        let reported_ose = summary.method(BaselineKind::Ose).unwrap();
        let reported_raw = summary.method(BaselineKind::RawPseudoInverse).unwrap();
        let consistent = (reported_ose.mean_mse - mean(&ose)).abs() <= 1e-12 * mean(&ose).max(1.0)
            && (reported_raw.mean_mse - mean(&raw)).abs() <= 1e-12 * mean(&raw).max(1.0)
            && (summary.paired_improvement_fraction - improved).abs() < 1e-15;
        pass &= consistent && mean(&ose) < mean(&raw) && improved >= 0.9;
        notes.push(format!(
            "d={d}: ose {:.3e} vs raw {:.3e}, improved on {:.0}%{}",
            mean(&ose),
            mean(&raw),
            improved * 100.0,
            if consistent {
                ""
            } else {
                " (summary mismatch)"
            }
        ));
    }
    outcome(pass, notes.join("; "))
}

// 6. Byte-identical records and config round-trips.
fn determinism_and_serialization() -> Outcome {
    let corpus = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut entries: Vec<_> = std::fs::read_dir(&corpus)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    entries.sort();
    let mut pass = !entries.is_empty();
    let mut round_trips = 0;
    let mut identical = 0;
    let mut runs = 0;
    for path in &entries {
        let config = load_config(path).unwrap();
        let again = parse_config(&config.to_toml().unwrap()).unwrap();
        if again == config {
            round_trips += 1;
        } else {
            pass = false;
        }
        let exp = config.build().unwrap();
        if exp.system.measurement().mode() != FusionMode::Stacked {
            continue;
        }
        runs += 1;
        let csv = |seed| {
            let records = run_trajectory(&exp.system, &exp.estimator, 40, seed).unwrap();
            records_csv(&records, true).unwrap()
        };
        let (a, b) = (csv(7), csv(7));
        // Noiseless systems draw nothing from the stream, so only noisy
        // ones must react to the seed.
        let noisy = exp.system.noise().q().norm() > 0.0 || exp.system.noise().r().norm() > 0.0;
        if a == b && (!noisy || a != csv(8)) {
            identical += 1;
        } else {
            pass = false;
        }
    }
    outcome(
        pass,
        format!(
            "{round_trips}/{} configs round-trip, {identical}/{runs} runs byte-identical per seed",
            entries.len()
        ),
    )
}

// 7. The minus-sign correction must break criterion 3.
fn minus_sign_breaks_convergence() -> Outcome {
    let rates = convergence_rates(CorrectionSign::Minus);
    let criterion_3_fails = rates.iter().any(|(_, r)| *r < 0.95);
    outcome(
        criterion_3_fails,
        format!(
            "minus-sign variant converged seeds {}; criterion 3 fails: {criterion_3_fails}",
            describe_rates(&rates)
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        (
            "1 rls-batch equivalence",
            rls_matches_batch,
            Duration::from_secs(30),
        ),
        (
            "2 information-form covariance",
            information_form,
            Duration::from_secs(10),
        ),
        (
            "3 noiseless convergence",
            noiseless_convergence,
            Duration::from_secs(60),
        ),
        (
            "4 quantum kernels",
            quantum_kernels,
            Duration::from_secs(30),
        ),
        (
            "5 noisy-mode advantage",
            noisy_advantage,
            Duration::from_secs(60),
        ),
        (
            "6 determinism and serialization",
            determinism_and_serialization,
            Duration::from_secs(5),
        ),
        (
            "7 sign regression guard",
            minus_sign_breaks_convergence,
            Duration::from_secs(10),
        ),
    ];
    let mut failures = 0;
    for (name, run, budget) in criteria {
        let started = Instant::now();
        let result = run();
        let elapsed = started.elapsed();
        let status = if result.pass { "PASS" } else { "FAIL" };
        let timing = if elapsed > budget {
            " [over time budget]"
        } else {
            ""
        };
        println!(
            "criterion {name}: {status} ({}) in {:.2}s{timing}",
            result.detail,
            elapsed.as_secs_f64()
        );
        if !result.pass {
            failures += 1;
        }
    }
    if failures == 0 {
        println!("acceptance: all 7 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria failed");
        ExitCode::FAILURE
    }
}
