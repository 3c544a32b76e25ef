//! End-to-end acceptance criteria A1 to A9. Runs without the libtest harness
//! so every criterion prints exactly one PASS/FAIL line; the process exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;

use ordered_async::analysis::geometric_chi_square;
use ordered_async::analysis::{f1_scores, ClassCounts};
use ordered_async::delay::{Component, DelaySpec};
use ordered_async::experiment::{cmd_sweep, ExperimentConfig};
use ordered_async::objective::{DomainSpec, MixtureComponentSpec, ObjectiveSpec, QuadraticSpec};
use ordered_async::optim::{theorem1_params, MethodSpec};
use ordered_async::simulator::{replay_check, run, RecordOptions, RunTrace, SimConfig, StepDetail};
use ordered_async::Vector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

/// Every (config, trace) pair produced by the suite, replayed by A9.
#[derive(Default)]
struct Ledger {
    runs: Vec<(SimConfig, RunTrace)>,
}

impl Ledger {
    fn run(&mut self, cfg: SimConfig) -> Result<RunTrace, ordered_async::Error> {
        let trace = run(&cfg)?;
        self.runs.push((cfg, trace.clone()));
        Ok(trace)
    }
}

fn details(trace: &RunTrace) -> &[StepDetail] {
    trace.details.as_deref().expect("details recorded")
}

fn sim(objective: ObjectiveSpec, method: MethodSpec, workers: usize, iterations: usize, seed: u64) -> SimConfig {
    SimConfig {
        objective,
        domain: None,
        delay: DelaySpec::new(0.1),
        method,
        iterations,
        workers,
        seed,
        snapshot_stride: None,
        initial_point: None,
        tail_fraction: 0.1,
        record: RecordOptions { details: true },
    }
}

struct A1Case {
    objective: ObjectiveSpec,
    workers: usize,
    beta: f64,
    eta: f64,
    seed: u64,
}

/// Random quadratic with curvature in `[0.2, 2]` and minimizer inside the
/// half-unit ball, so the same objective fits the unit-ball runs of A3.
fn a1_cases() -> Vec<A1Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA1);
    (0..20)
        .map(|i| {
            let d = rng.random_range(1..=10);
            let diagonal: Vec<f64> = (0..d).map(|_| rng.random_range(0.2..2.0)).collect();
            let raw: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            let radius = rng.random_range(0.0..0.5);
            let center = raw.iter().map(|v| v / norm * radius).collect();
            let l = diagonal.iter().cloned().fold(0.0, f64::max);
            A1Case {
                objective: ObjectiveSpec::Quadratic(QuadraticSpec {
                    diagonal: Some(diagonal),
                    center: Some(center),
                    noise_stddev: rng.random_range(0.1..1.0),
                    ..Default::default()
                }),
                workers: [2, 4, 8][i % 3],
                beta: rng.random_range(0.02..0.5),
                eta: 0.1 / l,
                seed: 1000 + i as u64,
            }
        })
        .collect()
}

/// Direct sum over arrived dispatch indices, coded from the trace alone:
/// `Σ_{k ∈ [t] ∖ 𝒯(t)} β(1−β)^{t−k} g_k`, keeping the first index-1 arrival.
fn direct_sum_momentum(trace: &RunTrace, beta: f64) -> Vec<Vector> {
    let mut arrived: BTreeMap<usize, Vector> = BTreeMap::new();
    let mut out = Vec::new();
    for (rec, det) in trace.records.iter().zip(details(trace)) {
        arrived.entry(rec.dispatch_iteration).or_insert_with(|| det.gradient.clone());
        let t = rec.t;
        let mut m = Vector::zeros(det.gradient.len());
        for (&k, g) in &arrived {
            m += g * (beta * (1.0 - beta).powi((t - k) as i32));
        }
        out.push(m);
    }
    out
}

fn rel(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn a1_a3(ledger: &mut Ledger) -> (Outcome, Outcome) {
    let mut worst_a1: f64 = 0.0;
    let mut pending_ok = true;
    let mut worst_identity: f64 = 0.0;
    let mut worst_contraction: f64 = 0.0;
    let mut worst_bias: f64 = 0.0;
    let mut bias_bound_ok = true;
    for case in a1_cases() {
        let cfg = sim(
            case.objective.clone(),
            MethodSpec::OrderedMomentum {
                eta: Some(case.eta),
                beta: Some(case.beta),
            },
            case.workers,
            200,
            case.seed,
        );
        let trace = match ledger.run(cfg.clone()) {
            Ok(t) => t,
            Err(e) => return (Err(e.into()), Err("A1 run failed".into())),
        };
        let objective = cfg.objective.build().expect("valid objective");
        let oracle = direct_sum_momentum(&trace, case.beta);
        for ((rec, det), m_direct) in trace.records.iter().zip(details(&trace)).zip(&oracle) {
            let m = det.buffer.as_ref().expect("momentum buffer");
            worst_a1 = worst_a1.max(rel(m, m_direct));
            pending_ok &= rec.pending_size < case.workers && det.pending.len() == rec.pending_size;

            // Virtual momentum fills every missing index with ∇f(x_t).
            let t = rec.t;
            let grad = objective.grad_full(&det.iterate_before).expect("gradient");
            let mut missing: Vec<usize> = det.pending.iter().copied().filter(|&k| k > 1).collect();
            missing.dedup();
            let discount = |k: usize| case.beta * (1.0 - case.beta).powi((t - k) as i32);
            let mut m_hat = m_direct.clone();
            for &k in &missing {
                m_hat += &grad * discount(k);
            }
            let bias = m - &m_hat;
            let closed: Vector = -missing.iter().map(|&k| &grad * discount(k)).fold(Vector::zeros(grad.len()), |a, b| a + b);
            let scale = m.norm().max(grad.norm()).max(1e-300);
            worst_bias = worst_bias.max((&bias - &closed).norm() / scale);
            let bound = (case.workers - 1) as f64 * case.beta * grad.norm();
            bias_bound_ok &= bias.norm() <= bound * (1.0 + 1e-12) + 1e-15;
        }

        // Same objective on the unit ball with ordered μ².
        let mut mu2 = cfg.clone();
        mu2.method = MethodSpec::OrderedMu2 {
            eta: Some(1e-4),
            beta: None,
            gamma: None,
        };
        let d = objective.dim();
        mu2.domain = Some(DomainSpec {
            center: vec![0.0; d],
            radius: 1.0,
        });
        let trace = match ledger.run(mu2) {
            Ok(t) => t,
            Err(e) => return (Err("A3 run failed".into()), Err(e.into())),
        };
        let dets = details(&trace);
        let diameter = 2.0;
        let mut weighted = dets[0].iterate_before.clone();
        let mut alpha_sum = 1.0;
        for (i, det) in dets.iter().enumerate() {
            let alpha_next = (i + 2) as f64;
            let w = det.descent_after.as_ref().expect("descent iterate");
            weighted += w * alpha_next;
            alpha_sum += alpha_next;
            let average = &weighted / alpha_sum;
            worst_identity = worst_identity.max(rel(&det.iterate_after, &average));
            let step = (&det.iterate_after - &det.iterate_before).norm();
            worst_contraction = worst_contraction.max(step / (alpha_next / alpha_sum * diameter));
            pending_ok &= trace.records[i].pending_size < trace.metadata.workers;
        }
    }
    let a1 = Ok((
        worst_a1 <= 1e-9,
        format!("max relative error {worst_a1:.2e} over 20 configs (tolerance 1e-9)"),
    ));
    let a3 = Ok((
        pending_ok && worst_identity <= 1e-9 && worst_contraction <= 1.0 + 1e-12 && worst_bias <= 1e-9 && bias_bound_ok,
        format!(
            "|T(t)| ≤ M−1: {pending_ok}; average identity {worst_identity:.2e}; \
             step / bound ≤ {worst_contraction:.4}; bias closed form {worst_bias:.2e}; bias bound: {bias_bound_ok}"
        ),
    ));
    (a1, a3)
}

fn quad4() -> ObjectiveSpec {
    ObjectiveSpec::Quadratic(QuadraticSpec {
        diagonal: Some(vec![1.5, 1.0, 0.5, 0.25]),
        center: Some(vec![0.5, -0.5, 1.0, 0.0]),
        noise_stddev: 0.5,
        ..Default::default()
    })
}

fn a2(ledger: &mut Ledger) -> Outcome {
    let (eta, beta) = (0.05, 0.3);
    let trace = ledger.run(sim(
        quad4(),
        MethodSpec::OrderedMomentum {
            eta: Some(eta),
            beta: Some(beta),
        },
        1,
        200,
        21,
    ))?;
    let dets = details(&trace);
    let mut m = Vector::zeros(4);
    let mut x = dets[0].iterate_before.clone();
    let mut worst_momentum: f64 = 0.0;
    for d in dets {
        m = &m * (1.0 - beta) + &d.gradient * beta;
        x -= &m * eta;
        worst_momentum = worst_momentum.max((&x - &d.iterate_after).amax());
    }

    // Synchronous Anytime + STORM with α_t = t and shared-sample correction.
    let eta = 2e-3;
    let trace = ledger.run(sim(
        quad4(),
        MethodSpec::OrderedMu2 {
            eta: Some(eta),
            beta: None,
            gamma: None,
        },
        1,
        200,
        22,
    ))?;
    let dets = details(&trace);
    let mut d_t = Vector::zeros(4);
    let mut w = dets[0].iterate_before.clone();
    let mut num = w.clone();
    let mut den = 1.0;
    let mut worst_mu2: f64 = 0.0;
    for (i, d) in dets.iter().enumerate() {
        let t = (i + 1) as f64;
        // Normalised STORM estimate d_t, with q_t = t · d_t.
        d_t = match &d.prev_gradient {
            Some(prev) if i > 0 => &d.gradient + (&d_t - prev) * ((t - 1.0) / t),
            _ => d.gradient.clone(),
        };
        w -= &d_t * (eta * t);
        num += &w * (t + 1.0);
        den += t + 1.0;
        worst_mu2 = worst_mu2.max((&num / den - &d.iterate_after).amax());
    }
    Ok((
        worst_momentum <= 1e-12 && worst_mu2 <= 1e-12,
        format!("momentum {worst_momentum:.2e}, anytime+STORM {worst_mu2:.2e} (tolerance 1e-12)"),
    ))
}

fn nonconvex() -> ObjectiveSpec {
    ObjectiveSpec::Nonconvex {
        base: QuadraticSpec {
            diagonal: Some(vec![0.1, 0.05]),
            center: Some(vec![0.0, 0.0]),
            noise_stddev: 1.0,
            ..Default::default()
        },
        squash_scale: 0.45,
    }
}

/// `r` with `f((r, r)) − f* = 1`, by bisection.
fn unit_gap_start(objective: &ObjectiveSpec) -> f64 {
    let f = objective.build().expect("valid objective");
    let gap = |r: f64| f.value(&Vector::from_vec(vec![r, r])).unwrap() - 1.0;
    let (mut lo, mut hi) = (0.0, 1.0);
    while gap(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn a4(ledger: &mut Ledger) -> Outcome {
    let objective = nonconvex();
    let r = unit_gap_start(&objective);
    let x1 = Vector::from_vec(vec![r, r]);
    let c = objective.build()?.theory_constants(&x1)?;
    let (l, delta, sigma) = (c.smoothness, c.delta_gap()?, c.sigma()?);
    let unit = |v: f64| (v - 1.0).abs() <= 1e-9;
    let mut means = Vec::new();
    for t in [2_000, 8_000] {
        let p = theorem1_params(l, delta, sigma, t, 4)?;
        let mut total = 0.0;
        for seed in 0..10 {
            let mut cfg = sim(
                objective.clone(),
                MethodSpec::OrderedMomentum {
                    eta: Some(p.eta),
                    beta: Some(p.beta),
                },
                4,
                t,
                seed,
            );
            cfg.initial_point = Some(vec![r, r]);
            cfg.record = RecordOptions::default();
            total += ledger.run(cfg)?.avg_sq_grad_norm();
        }
        means.push(total / 10.0);
    }
    let ratio = means[1] / means[0];
    Ok((
        unit(l) && unit(delta) && unit(sigma) && ratio <= 0.6,
        format!(
            "L = {l:.3}, Δ = {delta:.3}, σ = {sigma:.3}; avg ‖∇f‖² {:.4} at T=2000, {:.4} at T=8000, ratio {ratio:.3} (≤ 0.6)",
            means[0], means[1]
        ),
    ))
}

fn a5(ledger: &mut Ledger) -> Outcome {
    let component = |weight: f64, x: f64| MixtureComponentSpec {
        weight,
        quadratic: QuadraticSpec {
            diagonal: Some(vec![1.0, 1.0]),
            center: Some(vec![x, 0.0]),
            noise_stddev: 1.0,
            ..Default::default()
        },
    };
    let objective = ObjectiveSpec::Mixture {
        components: vec![component(0.1, 1.0), component(0.9, -1.0)],
    };
    let mixture_min = Vector::from_vec(vec![-0.8, 0.0]);
    let fast_min = Vector::from_vec(vec![-1.0, 0.0]);
    let built = objective.build()?;
    let exact = built.theory_constants(&Vector::zeros(2))?.minimizer()?.clone();
    if (&exact - &mixture_min).norm() > 1e-12 {
        return Ok((false, format!("mixture minimizer {exact:?} differs from (−0.8, 0)")));
    }
    let methods = [
        MethodSpec::OrderedMomentum {
            eta: Some(0.01),
            beta: Some(0.01),
        },
        MethodSpec::DelayFiltered {
            eta: 0.01,
            max_delay: 7.0,
        },
    ];
    let mut tail_gap = [0.0; 2];
    let mut final_to_mix = 0.0;
    let mut final_to_fast = 0.0;
    for (i, method) in methods.iter().enumerate() {
        for seed in 0..5 {
            let mut cfg = sim(objective.clone(), method.clone(), 7, 10_000, seed);
            cfg.record = RecordOptions::default();
            let trace = ledger.run(cfg)?;
            let tail = Vector::from_vec(trace.tail_average.clone());
            tail_gap[i] += (&tail - &mixture_min).norm() / 5.0;
            if i == 1 {
                let last = Vector::from_vec(trace.final_iterate.clone());
                final_to_mix += (&last - &mixture_min).norm() / 5.0;
                final_to_fast += (&last - &fast_min).norm() / 5.0;
            }
        }
    }
    let ratio = tail_gap[0] / tail_gap[1];
    Ok((
        ratio <= 0.5 && final_to_fast < final_to_mix,
        format!(
            "distance to x*: ordered {:.4}, filtered {:.4}, ratio {ratio:.3} (≤ 0.5); \
             filtered final iterate to fast minimizer {final_to_fast:.4} vs mixture {final_to_mix:.4}",
            tail_gap[0], tail_gap[1]
        ),
    ))
}

fn a6() -> Outcome {
    let mut cfg = ExperimentConfig::from_toml_str(include_str!("../configs/lr_robustness.toml"))?;
    let dir = tempfile::tempdir()?;
    cfg.output_dir = dir.path().to_path_buf();
    cfg.report.checks.clear();
    let outcome = cmd_sweep(&cfg)?;
    let window: Vec<f64> = cfg.eta_grid()?.expect("window axis");
    let span = window.last().unwrap() / window[0];
    // The window ratio should be of order √T + M.
    let order = (cfg.problem.iterations as f64).sqrt() + cfg.problem.workers as f64;
    let ratio_of = |name: &str| {
        outcome
            .summary
            .methods
            .iter()
            .find(|m| m.method == name)
            .map(|m| m.robustness_ratio)
            .unwrap_or(f64::NAN)
    };
    let (mu2, vanilla) = (ratio_of("ordered-mu2"), ratio_of("vanilla"));
    Ok((
        mu2 <= 3.0 && vanilla >= 10.0 && (0.5..=2.0).contains(&(span / order)),
        format!(
            "{} step sizes spanning ×{span:.1} (√T + M = {order:.0}); worst/best excess loss: ordered-mu2 {mu2:.2} (≤ 3), vanilla {vanilla:.2} (≥ 10 or diverged)",
            window.len()
        ),
    ))
}

fn a7(ledger: &mut Ledger) -> Outcome {
    let mut cfg = sim(quad4(), MethodSpec::Vanilla { eta: 0.01 }, 7, 10_000, 77);
    cfg.record = RecordOptions::default();
    let trace = ledger.run(cfg.clone())?;
    let model = cfg.delay.build(7)?;
    let n = trace.records.len() as f64;
    let slow: Vec<f64> = trace.records.iter().filter(|r| r.component == Component::Slow).map(|r| r.tau as f64).collect();
    let fast: Vec<f64> = trace.records.iter().filter(|r| r.component == Component::Fast).map(|r| r.tau as f64).collect();
    let fraction = slow.len() as f64 / n;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let delay_ratio = mean(&slow) / mean(&fast);
    let mut min_p: f64 = 1.0;
    for (w, &p) in model.arrival_probs().iter().enumerate() {
        let waits: Vec<u64> = trace.records.iter().filter(|r| r.worker_id == w).map(|r| r.wait).collect();
        min_p = min_p.min(geometric_chi_square(&waits, p).p_value);
    }
    Ok((
        (0.09..=0.11).contains(&fraction) && delay_ratio >= 3.0 && min_p >= 0.01,
        format!(
            "slow fraction {fraction:.4} (in [0.09, 0.11]); mean delay slow/fast {delay_ratio:.2} (≥ 3); \
             smallest per-worker chi-square p {min_p:.3} (≥ 0.01)"
        ),
    ))
}

/// F1 recomputed from raw label vectors via precision and recall.
fn reference_f1(truth: &[usize], pred: &[usize], classes: usize) -> Vec<f64> {
    (0..classes)
        .map(|c| {
            let hits = truth.iter().zip(pred).filter(|&(&t, &p)| t == c && p == c).count() as f64;
            let predicted = pred.iter().filter(|&&p| p == c).count() as f64;
            let actual = truth.iter().filter(|&&t| t == c).count() as f64;
            if hits == 0.0 {
                return 0.0;
            }
            let precision = hits / predicted;
            let recall = hits / actual;
            2.0 * precision * recall / (precision + recall)
        })
        .collect()
}

fn a8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA8);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let classes = rng.random_range(2..8);
        let n = rng.random_range(1..300);
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let pred: Vec<usize> = truth
            .iter()
            .map(|&t| if rng.random_bool(0.6) { t } else { rng.random_range(0..classes) })
            .collect();
        let mut counts = vec![ClassCounts::default(); classes];
        for (&t, &p) in truth.iter().zip(&pred) {
            if t == p {
                counts[t].tp += 1;
            } else {
                counts[p].fp += 1;
                counts[t].fn_ += 1;
            }
        }
        let got = f1_scores(&counts);
        let want = reference_f1(&truth, &pred, classes);
        let want_macro = want.iter().sum::<f64>() / classes as f64;
        for (g, w) in got.per_class.iter().zip(&want) {
            if !approx::relative_eq!(*g, *w, epsilon = 1e-15, max_relative = 1e-14) {
                worst = worst.max((g - w).abs());
            }
        }
        if !approx::relative_eq!(got.macro_f1, want_macro, epsilon = 1e-15, max_relative = 1e-14) {
            worst = worst.max((got.macro_f1 - want_macro).abs());
        }
    }
    Ok((worst == 0.0, format!("50 random tables, largest disagreement beyond rounding {worst:.1e}")))
}

fn a9(ledger: &Ledger) -> Outcome {
    let mut identical = 0;
    let mut failures = Vec::new();
    for (cfg, trace) in &ledger.runs {
        match replay_check(trace, cfg)? {
            o if o.is_identical() => identical += 1,
            o => failures.push(format!("seed {}: {o:?}", cfg.seed)),
        }
    }
    let mut bytes_equal = true;
    for (cfg, trace) in ledger.runs.iter().step_by(7) {
        let mut a = Vec::new();
        let mut b = Vec::new();
        trace.write_csv(&mut a)?;
        run(cfg)?.write_csv(&mut b)?;
        bytes_equal &= a == b;
    }
    Ok((
        failures.is_empty() && bytes_equal,
        format!(
            "{identical}/{} runs replay identically; step CSVs byte-identical: {bytes_equal}{}",
            ledger.runs.len(),
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join(", ")) }
        ),
    ))
}

fn report(name: &str, outcome: Outcome) -> bool {
    match outcome {
        Ok((passed, detail)) => {
            println!("{} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
            passed
        }
        Err(e) => {
            println!("FAIL {name}: error: {e}");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut ledger = Ledger::default();
    let (a1, a3) = a1_a3(&mut ledger);
    let results = [
        report("A1 oracle equivalence", a1),
        report("A2 synchronous reduction", a2(&mut ledger)),
        report("A3 structural invariants", a3),
        report("A4 nonconvex rate scaling", a4(&mut ledger)),
        report("A5 data-dependent bias", a5(&mut ledger)),
        report("A6 learning-rate robustness", a6()),
        report("A7 delay model fidelity", a7(&mut ledger)),
        report("A8 metric correctness", a8()),
        report("A9 determinism", a9(&ledger)),
    ];
    let failed = results.iter().filter(|&&ok| !ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
