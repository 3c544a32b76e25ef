//! Small-scale invariant suite behind the `validate` subcommand.
//!
//! Every check is deterministic (fixed seeds) and sized so the whole suite
//! finishes in seconds: `T ≤ 500`, `d ≤ 10`, `M ≤ 8`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    anytime_checks, bias_closed_form, f1_scores, geometric_chi_square, gradient_bound_violations,
    pending_sizes_from_records, relative_error, unrolled_momentum, virtual_momentum_and_bias,
    ClassCounts,
};
use crate::delay::{Component, DelayModel, DelaySpec};
use crate::error::Result;
use crate::objective::{
    DomainSpec, LogisticObjective, MixtureComponentSpec, Objective, ObjectiveSpec,
    QuadraticSpec, SyntheticClassification,
};
use crate::optim::{MethodSpec, Optimizer, StalenessWeighting};
use crate::simulator::{replay_check, ReplayOutcome, RecordOptions, RunTrace, SimConfig, Simulation};
use crate::Vector;

/// Deliberate defects for checking that the suite can fail.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mutation {
    #[default]
    None,
    /// Ordered momentum weighs a delayed gradient by `β(1−β)^{τ+1}`.
    OrderedWeight,
    /// Delay thresholds are halved, so slow samples are over-drawn.
    Thresholds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl InvariantResult {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

fn mutated_delay(model: DelayModel, mutation: Mutation) -> Result<DelayModel> {
    if mutation != Mutation::Thresholds || model.thresholds().iter().any(Option::is_none) {
        return Ok(model);
    }
    let halved = model.thresholds().iter().map(|t| t.unwrap() * 0.5).collect();
    DelayModel::from_parts(model.arrival_probs().to_vec(), model.slow_weight(), halved)
}

fn build(cfg: &SimConfig, mutation: Mutation) -> Result<Simulation> {
    let mut sim = cfg.build()?;
    if mutation == Mutation::OrderedWeight {
        if let Optimizer::OrderedMomentum(s) = sim.optimizer {
            sim.optimizer = Optimizer::OrderedMomentum(s.with_weighting(StalenessWeighting::OffByOne));
        }
    }
    sim.delay = mutated_delay(sim.delay, mutation)?;
    Ok(sim)
}

fn quadratic_spec(d: usize, noise: f64) -> QuadraticSpec {
    QuadraticSpec {
        diagonal: Some((0..d).map(|i| 0.5 + i as f64 / d as f64).collect()),
        center: Some((0..d).map(|i| if i % 2 == 0 { 0.3 } else { -0.2 }).collect()),
        noise_stddev: noise,
        ..Default::default()
    }
}

fn base_config(method: MethodSpec, workers: usize, iterations: usize, seed: u64) -> SimConfig {
    SimConfig {
        objective: ObjectiveSpec::Quadratic(quadratic_spec(4, 1.0)),
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

fn momentum(beta: f64) -> MethodSpec {
    MethodSpec::OrderedMomentum {
        eta: Some(0.05),
        beta: Some(beta),
    }
}

fn mu2(eta: f64) -> MethodSpec {
    MethodSpec::OrderedMu2 {
        eta: Some(eta),
        beta: None,
        gamma: None,
    }
}

fn random_psd(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let b = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    &b * b.transpose() / d as f64
}

fn random_unit(d: usize, rng: &mut ChaCha8Rng) -> Vector {
    let v = Vector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let n = v.norm();
    v / n
}

fn sample_objectives() -> Result<Vec<Objective>> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let a = random_psd(6, &mut rng);
    let rows: Vec<Vec<f64>> = (0..6).map(|i| (0..6).map(|j| a[(i, j)]).collect()).collect();
    let quad = ObjectiveSpec::Quadratic(QuadraticSpec {
        matrix: Some(rows),
        linear: Some(vec![0.1, -0.3, 0.2, 0.0, 0.5, -0.1]),
        noise_stddev: 0.5,
        ..Default::default()
    });
    let mixture = ObjectiveSpec::Mixture {
        components: vec![
            MixtureComponentSpec {
                weight: 0.1,
                quadratic: quadratic_spec(3, 0.5),
            },
            MixtureComponentSpec {
                weight: 0.9,
                quadratic: QuadraticSpec {
                    diagonal: Some(vec![2.0, 1.0, 0.5]),
                    center: Some(vec![-1.0, 0.0, 1.0]),
                    noise_stddev: 0.2,
                    ..Default::default()
                },
            },
        ],
    };
    let nonconvex = ObjectiveSpec::Nonconvex {
        base: QuadraticSpec {
            diagonal: Some(vec![0.1, 0.05]),
            center: Some(vec![0.0, 0.0]),
            noise_stddev: 1.0,
            ..Default::default()
        },
        squash_scale: 0.45,
    };
    let logistic = ObjectiveSpec::Logistic(SyntheticClassification {
        samples: 120,
        features: 3,
        classes: 3,
        slow_classes: vec![0],
        slow_fraction: 0.1,
        separation: 2.0,
        l2_reg: 1e-2,
        noise_stddev: 0.0,
        data_seed: 3,
    });
    [quad, mixture, nonconvex, logistic].iter().map(|s| s.build()).collect()
}

fn check_objectives() -> Result<Vec<InvariantResult>> {
    let objectives = sample_objectives()?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut out = Vec::new();

    // Curvature along random directions never exceeds L.
    let mut worst: f64 = 0.0;
    for obj in &objectives {
        let d = obj.dim();
        for _ in 0..100 {
            let x = Vector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let v = random_unit(d, &mut rng);
            let h = 1e-5;
            let gp = obj.grad_full(&(&x + &v * h))?;
            let gm = obj.grad_full(&(&x - &v * h))?;
            let curvature = (gp - gm).dot(&v) / (2.0 * h);
            worst = worst.max(curvature / obj.smoothness());
        }
    }
    out.push(InvariantResult::new(
        "objective.smoothness-bound",
        worst <= 1.0 + 1e-6,
        format!("max directional curvature / L = {worst:.6}"),
    ));

    let Objective::Mixture(mix) = &objectives[1] else {
        unreachable!()
    };
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = Vector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut sum = Vector::zeros(3);
        for (c, w) in mix.components().iter().zip(mix.weights()) {
            sum += c.gradient(&x)? * *w;
        }
        worst = worst.max((mix.gradient(&x)? - sum).norm());
    }
    out.push(InvariantResult::new(
        "objective.mixture-gradient",
        worst <= 1e-12,
        format!("max deviation {worst:.3e}"),
    ));

    let mut worst: f64 = 0.0;
    for obj in &objectives[..3] {
        let xs = obj.theory_constants(&Vector::zeros(obj.dim()))?.minimizer()?.clone();
        worst = worst.max(obj.grad_full(&xs)?.norm());
    }
    out.push(InvariantResult::new(
        "objective.minimizer-stationary",
        worst <= 1e-9,
        format!("max ‖∇f(x*)‖ = {worst:.3e}"),
    ));

    let Objective::Logistic(log) = &objectives[3] else {
        unreachable!()
    };
    let worst = logistic_fd_error(log, &mut rng)?;
    out.push(InvariantResult::new(
        "objective.logistic-gradient",
        worst <= 1e-6,
        format!("max relative finite-difference error {worst:.3e}"),
    ));
    Ok(out)
}

fn logistic_fd_error(obj: &LogisticObjective, rng: &mut ChaCha8Rng) -> Result<f64> {
    let d = obj.dim();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = Vector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let g = obj.gradient(&x)?;
        let h = 1e-5;
        let fd = Vector::from_fn(d, |i, _| {
            let mut e = Vector::zeros(d);
            e[i] = h;
            (obj.value(&(&x + &e)).unwrap() - obj.value(&(&x - &e)).unwrap()) / (2.0 * h)
        });
        worst = worst.max((g - &fd).norm() / fd.norm().max(1e-8));
    }
    Ok(worst)
}

fn check_delay(mutation: Mutation) -> Result<Vec<InvariantResult>> {
    let model = mutated_delay(DelayModel::standard(7, 0.1)?, mutation)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let per_worker = 100_000 / 7;
    let mut slow_total = 0usize;
    let mut worst_worker_z: f64 = 0.0;
    let mut worst_fit: f64 = 1.0;
    for (i, &p) in model.arrival_probs().iter().enumerate() {
        let tickets: Vec<_> = (0..per_worker).map(|_| model.draw(i, &mut rng)).collect();
        let slow = tickets.iter().filter(|t| t.component == Component::Slow).count();
        slow_total += slow;
        let frac = slow as f64 / per_worker as f64;
        worst_worker_z = worst_worker_z.max((frac - 0.1).abs() / (0.09 / per_worker as f64).sqrt());
        let waits: Vec<u64> = tickets.iter().take(10_000).map(|t| t.wait).collect();
        worst_fit = worst_fit.min(geometric_chi_square(&waits, p).p_value);
    }
    let pooled = slow_total as f64 / (per_worker * 7) as f64;
    let mut out = vec![InvariantResult::new(
        "delay.distribution-preservation",
        (0.096..=0.104).contains(&pooled) && worst_worker_z <= 4.0,
        format!("pooled slow fraction {pooled:.4}, worst per-worker z = {worst_worker_z:.2}"),
    )];
    out.push(InvariantResult::new(
        "delay.geometric-waits",
        worst_fit >= 0.01,
        format!("smallest per-worker chi-square p-value {worst_fit:.4}"),
    ));

    let mut slow = Vec::new();
    let mut fast = Vec::new();
    for seed in 0..5 {
        let cfg = SimConfig {
            record: RecordOptions::default(),
            ..base_config(MethodSpec::Vanilla { eta: 0.01 }, 7, 500, seed)
        };
        let trace = build(&cfg, mutation)?.run()?;
        for r in &trace.records {
            match r.component {
                Component::Slow => slow.push(r.tau as f64),
                Component::Fast => fast.push(r.tau as f64),
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let ratio = mean(&slow) / mean(&fast);
    out.push(InvariantResult::new(
        "delay.staleness-separation",
        ratio >= 3.0,
        format!("mean slow delay / mean fast delay = {ratio:.2}"),
    ));
    Ok(out)
}

fn details_of(trace: &RunTrace) -> &[crate::simulator::StepDetail] {
    trace.details.as_deref().expect("suite records details")
}

fn check_momentum(mutation: Mutation) -> Result<Vec<InvariantResult>> {
    let mut out = Vec::new();
    let mut worst: f64 = 0.0;
    let mut bias_identity: f64 = 0.0;
    let mut bias_bound_ok = true;
    for (seed, (workers, beta)) in [(2, 0.1), (4, 0.2), (8, 0.05), (4, 0.5)].into_iter().enumerate() {
        let cfg = base_config(momentum(beta), workers, 200, seed as u64);
        let trace = build(&cfg, mutation)?.run()?;
        let unrolled = unrolled_momentum(&trace, beta)?;
        for (u, d) in unrolled.iter().zip(details_of(&trace)) {
            let rec = d.buffer.as_ref().expect("momentum buffer");
            worst = worst.max(relative_error(rec, u, 1e-300));
        }
        let objective = cfg.objective.build()?;
        for t in 1..=trace.records.len() {
            let e = virtual_momentum_and_bias(&trace, &objective, beta, t)?;
            let closed = bias_closed_form(&e.missing, beta, t, &e.full_gradient);
            let scale = e.momentum.norm().max(e.full_gradient.norm()).max(1e-12);
            bias_identity = bias_identity.max((&e.bias - &closed).norm() / scale);
            let bound = (workers - 1) as f64 * beta * e.full_gradient.norm();
            bias_bound_ok &= e.bias.norm() <= bound * (1.0 + 1e-9) + 1e-12;
        }
    }
    out.push(InvariantResult::new(
        "optim.unrolled-equivalence",
        worst <= 1e-9,
        format!("max relative deviation {worst:.3e}"),
    ));
    out.push(InvariantResult::new(
        "analysis.bias-closed-form",
        bias_identity <= 1e-9 && bias_bound_ok,
        format!("max relative deviation {bias_identity:.3e}; bound holds: {bias_bound_ok}"),
    ));

    // One worker: classical momentum on the recorded gradients.
    let beta = 0.3;
    let cfg = base_config(momentum(beta), 1, 200, 5);
    let trace = build(&cfg, mutation)?.run()?;
    let mut m = Vector::zeros(4);
    let mut x = details_of(&trace)[0].iterate_before.clone();
    let mut worst: f64 = 0.0;
    for d in details_of(&trace) {
        m = &d.gradient * beta + &m * (1.0 - beta);
        x -= &m * 0.05;
        worst = worst.max((&x - &d.iterate_after).amax());
    }
    let mut worst_mu2: f64 = 0.0;
    let eta = 1e-3;
    let trace = build(&base_config(mu2(eta), 1, 200, 6), mutation)?.run()?;
    let details = details_of(&trace);
    let mut q = Vector::zeros(4);
    let mut w = details[0].iterate_before.clone();
    let mut x = w.clone();
    let mut alpha_sum = 1.0;
    for (i, d) in details.iter().enumerate() {
        let t = (i + 1) as f64;
        q += &d.gradient * t;
        if let Some(prev) = &d.prev_gradient {
            q -= prev * (t - 1.0);
        }
        w -= &q * eta;
        alpha_sum += t + 1.0;
        x += (&w - &x) * ((t + 1.0) / alpha_sum);
        worst_mu2 = worst_mu2.max((&x - &d.iterate_after).amax());
    }
    out.push(InvariantResult::new(
        "optim.synchronous-reduction",
        worst <= 1e-12 && worst_mu2 <= 1e-12,
        format!("momentum {worst:.3e}, anytime-storm {worst_mu2:.3e}"),
    ));
    Ok(out)
}

fn check_structure(mutation: Mutation) -> Result<Vec<InvariantResult>> {
    let mut out = Vec::new();
    let mut pending_ok = true;
    let mut conservation_ok = true;
    let mut identity: f64 = 0.0;
    let mut contraction: f64 = 0.0;
    let mut grad_bound_violations = 0;
    for (seed, workers) in [2usize, 4, 8].into_iter().enumerate() {
        let mut cfg = base_config(mu2(2e-4), workers, 300, seed as u64);
        cfg.domain = Some(DomainSpec {
            center: vec![0.0; 4],
            radius: 1.0,
        });
        let trace = build(&cfg, mutation)?.run()?;
        let sizes = pending_sizes_from_records(&trace.records, workers)?;
        pending_ok &= sizes.iter().all(|&s| s < workers);
        pending_ok &= sizes
            .iter()
            .zip(&trace.records)
            .all(|(s, r)| *s == r.pending_size);
        let issued: usize = trace.metadata.dispatches.iter().sum();
        conservation_ok &= issued == trace.records.len() + trace.metadata.in_flight_at_end;
        let check = anytime_checks(&trace, 2.0)?;
        identity = identity.max(check.max_identity_error);
        contraction = contraction.max(check.max_contraction_ratio);
        let objective = cfg.objective.build()?;
        let f_star = objective.theory_constants(&Vector::zeros(4))?.f_star()?;
        grad_bound_violations +=
            gradient_bound_violations(&trace.records, objective.smoothness(), f_star).len();
    }
    out.push(InvariantResult::new(
        "simulator.pending-bound",
        pending_ok,
        "|𝒯(t)| ≤ M−1, rebuilt from arrivals",
    ));
    out.push(InvariantResult::new(
        "simulator.dispatch-conservation",
        conservation_ok,
        "in-flight + processed = issued",
    ));
    out.push(InvariantResult::new(
        "optim.anytime-average",
        identity <= 1e-9 && contraction <= 1.0 + 1e-12,
        format!("identity error {identity:.3e}, contraction ratio {contraction:.4}"),
    ));
    out.push(InvariantResult::new(
        "analysis.gradient-bound",
        grad_bound_violations == 0,
        format!("{grad_bound_violations} violations of ‖∇f‖² ≤ 2L(f − f*)"),
    ));
    Ok(out)
}

fn check_metrics() -> InvariantResult {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut ok = f1_scores(&[ClassCounts { tp: 3, fp: 1, fn_: 2 }]).macro_f1 == 6.0 / 9.0;
    ok &= f1_scores(&[ClassCounts::default()]).macro_f1 == 0.0;
    for _ in 0..50 {
        let classes = rng.random_range(1..6);
        let counts: Vec<ClassCounts> = (0..classes)
            .map(|_| ClassCounts {
                tp: rng.random_range(0..20),
                fp: rng.random_range(0..20),
                fn_: rng.random_range(0..20),
            })
            .collect();
        let f = f1_scores(&counts);
        ok &= (0.0..=1.0).contains(&f.macro_f1);
    }
    InvariantResult::new("analysis.f1", ok, "formula examples and [0, 1] range")
}

fn check_determinism() -> Result<InvariantResult> {
    let cfg = SimConfig {
        record: RecordOptions::default(),
        ..base_config(momentum(0.2), 4, 200, 17)
    };
    let trace = crate::simulator::run(&cfg)?;
    let same = replay_check(&trace, &cfg)?;
    let shifted = replay_check(&trace, &cfg.with_seed(18))?;
    let mut a = Vec::new();
    let mut b = Vec::new();
    trace.write_csv(&mut a)?;
    crate::simulator::run(&cfg)?.write_csv(&mut b)?;
    let ok = same == ReplayOutcome::Identical
        && shifted == (ReplayOutcome::Diverged { first_iteration: 1 })
        && a == b;
    Ok(InvariantResult::new(
        "simulator.determinism",
        ok,
        format!("replay {same:?}, seed+1 {shifted:?}, csv identical: {}", a == b),
    ))
}

/// Runs every invariant and returns one result per check, in a fixed order.
pub fn invariant_suite(mutation: Mutation) -> Result<Vec<InvariantResult>> {
    let mut out = check_objectives()?;
    out.extend(check_delay(mutation)?);
    out.extend(check_momentum(mutation)?);
    out.extend(check_structure(mutation)?);
    out.push(check_metrics());
    out.push(check_determinism()?);
    Ok(out)
}

/// Runs the suite and prints one `PASS`/`FAIL` line per invariant.
pub fn cmd_validate(mutation: Mutation) -> Result<Vec<InvariantResult>> {
    let results = invariant_suite(mutation)?;
    for r in &results {
        println!(
            "{} {:<34} {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
    }
    Ok(results)
}

