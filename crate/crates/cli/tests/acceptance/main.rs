//! Acceptance suite: runs every criterion on the synthetic testbed and prints
//! one PASS/FAIL line per criterion. Exits non-zero if any criterion fails.

mod toy;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use anyhow::{ensure, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqids::attacks::{
    evaluate_attack, AdversarialResult, AttackConstraints, AttackMethod, AttackSummary, CwConfig,
    PgdConfig, DEFAULT_DELTA,
};
use seqids::classifier::{evaluate, train, train_feature_dropout, EncodedFlow, Model, TrainConfig};
use seqids::defenses::{adversarial_training, train_reduced, AdvTrainConfig, ReduceMode};
use seqids::explain::{
    conditional_pdp, confidence_per_step, importance_dropout, mutual_information,
    mutual_information_from_counts, sequential_pdp, shared_info_from_accuracies, ClassFilter,
};
use seqids::flowdata::schema::{DST_PORT, IAT, PACKET_LENGTH, SRC_PORT};
use seqids::flowdata::{split_dataset, synth_generate, Dataset, Flow, SynthConfig};
use seqids::rnn::{confidence, grad_check, GradCheckConfig, ModelParams};
use seqids::robustness::{ars_from_distances, compute_ars, ArsSchedule};

const SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        pass,
        detail: detail.into(),
    })
}

/// Default synthetic dataset, its split and the baseline model, plus CW runs
/// shared by several criteria.
struct Testbed {
    dataset: Dataset,
    train: Dataset,
    test: Dataset,
    model: Model,
    train_time: Duration,
    cw: BTreeMap<u64, Vec<AdversarialResult>>,
}

fn train_config() -> TrainConfig {
    TrainConfig {
        seed: SEED,
        ..TrainConfig::default()
    }
}

fn kappa_key(kappa: f64) -> u64 {
    kappa.to_bits()
}

impl Testbed {
    fn new() -> Result<Testbed> {
        let dataset = synth_generate(&SynthConfig::default(), SEED)?;
        let (train_set, test) = split_dataset(&dataset, SEED)?;
        let start = Instant::now();
        let model = train(&train_set, &train_config())?;
        Ok(Testbed {
            dataset,
            train: train_set,
            test,
            model,
            train_time: start.elapsed(),
            cw: BTreeMap::new(),
        })
    }

    fn attack_flows(&self) -> Vec<Flow> {
        self.test.attack_flows().cloned().collect()
    }

    fn cw(&mut self, kappa: f64) -> Result<&[AdversarialResult]> {
        if !self.cw.contains_key(&kappa_key(kappa)) {
            let method = AttackMethod::Cw(CwConfig {
                kappa,
                ..CwConfig::default()
            });
            let report = evaluate_attack(&self.model, &self.attack_flows(), &method)?;
            self.cw.insert(kappa_key(kappa), report.results);
        }
        Ok(&self.cw[&kappa_key(kappa)])
    }
}

fn gradient_check(_: &mut Testbed) -> Result<Outcome> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let trials = 100;
    for trial in 0..trials {
        let config = GradCheckConfig {
            layers: rng.random_range(1..=3),
            hidden: rng.random_range(1..=8),
            steps: rng.random_range(1..=10),
            ..GradCheckConfig::default()
        };
        worst = worst.max(grad_check(&config, trial)?.max_rel_error());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-4 && secs < 60.0,
        format!("{trials} trials, max relative error {worst:.2e}, {secs:.1} s"),
    )
}

fn classifier_sanity(tb: &mut Testbed) -> Result<Outcome> {
    let types = tb.dataset.categories().iter().filter(|c| *c != "benign").count();
    ensure!(tb.dataset.len() >= 1000 && types >= 3, "testbed too small");
    let accuracy = evaluate(&tb.model, &tb.test)?.flow.accuracy;
    let start = Instant::now();
    let again = train(&tb.train, &train_config())?;
    let total = tb.train_time + start.elapsed();
    let same = again.to_bytes()? == tb.model.to_bytes()?;
    outcome(
        accuracy >= 0.95 && same && total.as_secs() < 300,
        format!(
            "flow accuracy {accuracy:.4} on {} test flows, retrain identical: {same}, {:.1} s for two runs",
            tb.test.len(),
            total.as_secs_f64()
        ),
    )
}

fn feasible(model: &Model, flow: &Flow, r: &AdversarialResult) -> Result<bool> {
    let enc = model.normalize(flow)?;
    let c = AttackConstraints::new(flow, &enc.x, &model.schema)?;
    let mut again = r.adversarial.clone();
    c.project(&mut again)?;
    let constant_kept = flow
        .packets
        .iter()
        .zip(&r.adversarial_flow.packets)
        .all(|(a, b)| (a.src_port, a.dst_port, a.protocol, a.direction) == (b.src_port, b.dst_port, b.protocol, b.direction));
    Ok(again == r.adversarial && c.is_feasible(&r.adversarial) && constant_kept)
}

fn constraint_feasibility(tb: &mut Testbed) -> Result<Outcome> {
    let flows = tb.attack_flows();
    let cw = tb.cw(1.0)?.to_vec();
    let pgd = evaluate_attack(&tb.model, &flows, &AttackMethod::PgdLinf(PgdConfig::default()))?.results;
    let fgsm = evaluate_attack(
        &tb.model,
        &flows,
        &AttackMethod::Fgsm {
            epsilon: 1.0,
            delta: DEFAULT_DELTA,
        },
    )?
    .results;
    let mut bad = 0;
    let mut checked = 0;
    for results in [&cw, &pgd, &fgsm] {
        for (flow, r) in flows.iter().zip(results.iter()) {
            checked += 1;
            if !feasible(&tb.model, flow, r)? {
                bad += 1;
            }
        }
    }
    outcome(bad == 0, format!("{checked} returned flows from cw, pgd and fgsm, {bad} infeasible"))
}

fn cw_success_semantics(tb: &mut Testbed) -> Result<Outcome> {
    let flows = tb.attack_flows();
    let mut successes = 0;
    let mut worst: f64 = 1.0;
    for kappa in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let results = tb.cw(kappa)?.to_vec();
        for (flow, r) in flows.iter().zip(&results) {
            if !r.success {
                continue;
            }
            successes += 1;
            let enc = tb.model.normalize(flow)?;
            let z = tb.model.final_logit(&EncodedFlow {
                x: r.adversarial.clone(),
                directions: enc.directions,
            })?;
            worst = worst.min(1.0 - confidence(z));
        }
    }
    outcome(
        successes > 0 && worst >= 0.5498,
        format!("{successes} successful CW samples over five kappas, lowest benign confidence {worst:.4}"),
    )
}

/// Per flow, the closest success over the given kappas, else the last result.
fn escalated(runs: &[Vec<AdversarialResult>]) -> Vec<AdversarialResult> {
    (0..runs[0].len())
        .map(|i| {
            runs.iter()
                .map(|r| &r[i])
                .filter(|r| r.success)
                .min_by(|a, b| a.distance.total_cmp(&b.distance))
                .unwrap_or(&runs[runs.len() - 1][i])
                .clone()
        })
        .collect()
}

fn attack_ordering(tb: &mut Testbed) -> Result<Outcome> {
    let flows = tb.attack_flows();
    ensure!(flows.len() >= 200, "only {} attack flows", flows.len());
    let runs = [tb.cw(1.0)?.to_vec(), tb.cw(4.0)?.to_vec(), tb.cw(16.0)?.to_vec()];
    let cw = AttackSummary::from_results(&escalated(&runs));
    let epsilon = cw.mean_linf.context("no CW success")?;
    let pgd = evaluate_attack(
        &tb.model,
        &flows,
        &AttackMethod::PgdLinf(PgdConfig {
            epsilon,
            ..PgdConfig::default()
        }),
    )?
    .overall;
    let fgsm = evaluate_attack(
        &tb.model,
        &flows,
        &AttackMethod::Fgsm {
            epsilon,
            delta: DEFAULT_DELTA,
        },
    )?
    .overall;
    let (c, p, f) = (cw.success_ratio, pgd.success_ratio, fgsm.success_ratio);
    outcome(
        c >= p - 0.03 && p >= f - 0.03,
        format!(
            "{} flows, epsilon {epsilon:.4}: cw {c:.3}, pgd {p:.3}, fgsm {f:.3}",
            flows.len()
        ),
    )
}

fn kappa_monotonicity(tb: &mut Testbed) -> Result<Outcome> {
    let kappas = [0.25, 0.5, 1.0, 2.0, 4.0];
    let runs: Vec<Vec<AdversarialResult>> = kappas
        .iter()
        .map(|&k| tb.cw(k).map(<[_]>::to_vec))
        .collect::<Result<_>>()?;
    let counts: Vec<usize> = runs
        .iter()
        .map(|r| r.iter().filter(|r| r.detected_before() && r.success).count())
        .collect();
    let monotone = counts.windows(2).all(|w| w[1] + 1 >= w[0]);
    let common: Vec<usize> = (0..runs[0].len())
        .filter(|&i| runs.iter().all(|r| r[i].detected_before() && r[i].success))
        .collect();
    ensure!(!common.is_empty(), "no flow succeeds at every kappa");
    let means: Vec<f64> = runs
        .iter()
        .map(|r| common.iter().map(|&i| r[i].distance).sum::<f64>() / common.len() as f64)
        .collect();
    let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = means.iter().copied().fold(0.0, f64::max);
    let spread = (hi - lo) / lo;
    outcome(
        monotone && spread <= 0.05,
        format!(
            "successes {counts:?} of {} detected; common set of {} has mean L1 {} (spread {:.2}%)",
            runs[0].iter().filter(|r| r.detected_before()).count(),
            common.len(),
            means.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>().join("/"),
            100.0 * spread
        ),
    )
}

fn ars_oracle(distances: &[f64]) -> f64 {
    let k = distances.len().div_ceil(2);
    let mut finite: Vec<f64> = distances.iter().copied().filter(|d| d.is_finite()).collect();
    if finite.len() < k {
        return f64::INFINITY;
    }
    finite.sort_by(|a, b| a.partial_cmp(b).unwrap());
    finite[..k].iter().sum::<f64>() / k as f64
}

fn ars_equivalence(_: &mut Testbed) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=25);
        let d: Vec<f64> = (0..n)
            .map(|_| match rng.random_range(0..4) {
                0 => f64::INFINITY,
                1 => f64::from(rng.random_range(0..5u8)),
                _ => rng.random_range(0.0..10.0),
            })
            .collect();
        let got = ars_from_distances(&d)?;
        if got != ars_oracle(&d) {
            mismatches += 1;
        }
    }
    let model = toy::toy_model(11);
    let cases = toy::toy_cases(&model, 6, 12);
    ensure!(cases.len() == 6, "only {} toy cases", cases.len());
    let grid: Vec<f64> = cases.iter().map(|c| c.1).collect();
    let expected = ars_oracle(&grid);
    let flows: Vec<Flow> = cases.into_iter().map(|c| c.0).collect();
    let got = compute_ars(&model, &flows, &ArsSchedule::default())?.ars;
    let rel = (got - expected).abs() / expected;
    outcome(
        mismatches == 0 && rel <= 0.05,
        format!("1000 multisets, {mismatches} mismatches; toy ARS {got:.4} vs grid {expected:.4} ({:.2}%)", 100.0 * rel),
    )
}

fn cw_near_optimal(_: &mut Testbed) -> Result<Outcome> {
    let model = toy::toy_model(11);
    let cases = toy::toy_cases(&model, 40, 13);
    ensure!(cases.len() >= 20, "only {} toy cases", cases.len());
    let cfg = CwConfig::default();
    let mut close = 0;
    let mut worst: f64 = 0.0;
    for (flow, grid) in &cases {
        let r = seqids::attacks::cw_attack(&model, flow, &cfg)?;
        let ratio = if r.success { r.distance / grid } else { f64::INFINITY };
        worst = worst.max(ratio);
        if ratio <= 1.05 {
            close += 1;
        }
    }
    let share = close as f64 / cases.len() as f64;
    outcome(
        share >= 0.9,
        format!(
            "{close}/{} toy flows within 1.05x of the grid minimum (worst ratio {worst:.3})",
            cases.len()
        ),
    )
}

fn dropout_validity(tb: &mut Testbed) -> Result<Outcome> {
    let dropout = train_feature_dropout(&tb.train, &train_config())?;
    let base = evaluate(&tb.model, &tb.test)?.flow.accuracy;
    let acc = evaluate(&dropout, &tb.test)?.flow.accuracy;
    let table = importance_dropout(&dropout, &tb.test)?;
    let mut scores: Vec<(f64, usize)> = table.entries.iter().map(|e| (e.score, e.index)).collect();
    scores.sort_by(|a, b| b.0.total_cmp(&a.0));
    let strict_top = scores[0].1 == DST_PORT && scores[0].0 > scores[1].0;
    let noise = table.score(SRC_PORT).context("src_port missing")?;
    outcome(
        (base - acc).abs() <= 0.01 && strict_top && noise.abs() <= 0.01,
        format!(
            "accuracy {acc:.4} vs {base:.4}; top drop {} {:.4} (next {:.4}); src_port drop {noise:.4}",
            table.entries[scores[0].1].feature, scores[0].0, scores[1].0
        ),
    )
}

fn shared_information(_: &mut Testbed) -> Result<Outcome> {
    let hand = [
        ((0.99, 0.98, 0.98, 0.95), Some(2.0)),
        ((0.9, 0.8, 0.85, 0.75), Some(1.0)),
        ((0.8, 0.7, 0.6, 0.6), Some(2.0 / 3.0)),
        ((0.9, 0.9, 0.9, 0.8), None),
    ];
    let arithmetic = hand.iter().all(|&((b, i, j, p), want)| {
        match (shared_info_from_accuracies(b, i, j, p), want) {
            (Some(g), Some(w)) => (g - w).abs() <= 1e-12,
            (None, None) => true,
            _ => false,
        }
    });
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = 0;
    for _ in 0..10_000 {
        let base = rng.random_range(0.5..1.0);
        let di = rng.random_range(0.0051..0.2);
        let dj = rng.random_range(0.0051..0.2);
        let pair = f64::max(di, dj) + rng.random_range(0.0..0.2);
        match shared_info_from_accuracies(base, base - di, base - dj, base - pair) {
            Some(s) if s >= 0.5 => {}
            _ => violations += 1,
        }
    }
    outcome(
        arithmetic && violations == 0,
        format!("hand tuples exact: {arithmetic}; lower bound violated in {violations} of 10000 draws"),
    )
}

fn mutual_information_values(_: &mut Testbed) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 10_000;
    let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let y: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    let independent = mutual_information(&x, &y, 16)?;
    let bits: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..2u8))).collect();
    let copy: Vec<bool> = bits.iter().map(|&b| b > 0.5).collect();
    let dependent = mutual_information(&bits, &copy, 16)?;
    let table = mutual_information_from_counts(&[vec![0.4, 0.1], vec![0.1, 0.4]])?;
    outcome(
        independent <= 0.02 && (dependent - 1.0).abs() <= 0.05 && (table - 0.2781).abs() <= 1e-4,
        format!("independent {independent:.4}, copy {dependent:.4}, 2x2 table {table:.6} bits"),
    )
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn last_confidence(model: &Model, flow: &Flow) -> Result<f64> {
    Ok(*model.confidences(&model.normalize(flow)?, None)?.last().unwrap())
}

/// Mean, min and max over flows of `predict` at each grid value.
fn brute_force(flows: &[Flow], grid: &[f64], predict: impl Fn(&Flow, f64) -> Result<f64>) -> Result<[Vec<f64>; 3]> {
    let mut out = [Vec::new(), Vec::new(), Vec::new()];
    for &w in grid {
        let v: Vec<f64> = flows.iter().map(|f| predict(f, w)).collect::<Result<_>>()?;
        out[0].push(v.iter().sum::<f64>() / v.len() as f64);
        out[1].push(v.iter().copied().fold(f64::INFINITY, f64::min));
        out[2].push(v.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    Ok(out)
}

fn pdp_correctness(tb: &mut Testbed) -> Result<Outcome> {
    let mut constant = tb.model.clone();
    constant.params = ModelParams::zeros(2, 4, tb.model.input_width())?;
    let hb = constant.params.head_bias_index();
    constant.params.values_mut()[hb] = 0.7;
    let flat = |v: &[f64]| v.iter().all(|&m| m == v[0]);
    let c = conditional_pdp(&constant, &tb.test, &ClassFilter::All, DST_PORT, None)?;
    let s = sequential_pdp(&constant, &tb.test, &ClassFilter::All, IAT, 1, None, None)?;
    let constant_ok = flat(&c.mean) && flat(&c.min) && flat(&c.max) && flat(&s.mean) && flat(&s.min) && flat(&s.max);

    let mut worst: f64 = 0.0;
    let mut datasets = 0;
    for offset in [0, 100, 200] {
        let flows: Vec<Flow> = tb.test.flows[offset..offset + 5].to_vec();
        let small = tb.test.with_flows(flows.clone());
        let ports = [21.0, 80.0, 443.0, 2000.0, 40000.0];
        let got = conditional_pdp(&tb.model, &small, &ClassFilter::All, DST_PORT, Some(&ports))?;
        let want = brute_force(&flows, &ports, |f, w| {
            let mut g = f.clone();
            for p in &mut g.packets {
                p.dst_port = w as u16;
            }
            last_confidence(&tb.model, &g)
        })?;
        worst = worst
            .max(max_abs_diff(&got.mean, &want[0]))
            .max(max_abs_diff(&got.min, &want[1]))
            .max(max_abs_diff(&got.max, &want[2]));

        for (feature, t, grid) in [
            (IAT, 1, vec![0.0, 0.002, 0.1, 1.0, 3.0]),
            (PACKET_LENGTH, 2, vec![60.0, 74.0, 120.0, 600.0]),
        ] {
            let long: Vec<Flow> = flows.iter().filter(|f| f.len() > t).cloned().collect();
            if long.is_empty() {
                continue;
            }
            let got = sequential_pdp(&tb.model, &small, &ClassFilter::All, feature, t, Some(&grid), None)?;
            let want = brute_force(&long, &grid, |f, w| {
                let mut g = f.clone();
                g.packets.truncate(t + 1);
                let mut v = g.packets[t].to_features();
                v[feature] = w;
                g.packets[t] = seqids::flowdata::PacketFeatureVector::from_features(&v)?;
                last_confidence(&tb.model, &g)
            })?;
            worst = worst
                .max(max_abs_diff(&got.mean, &want[0]))
                .max(max_abs_diff(&got.min, &want[1]))
                .max(max_abs_diff(&got.max, &want[2]));
        }
        datasets += 1;
    }
    outcome(
        constant_ok && worst <= 1e-9,
        format!("constant model flat: {constant_ok}; {datasets} five-flow datasets, max deviation {worst:.2e}"),
    )
}

fn confidence_trend(tb: &mut Testbed) -> Result<Outcome> {
    let curve = confidence_per_step(&tb.model, &tb.test, &ClassFilter::Attack)?;
    let counts_ok = curve.points.windows(2).all(|w| w[1].count <= w[0].count);
    let last = tb
        .test
        .attack_flows()
        .map(Flow::len)
        .filter(|&n| n >= 2)
        .min()
        .context("no multi-packet attack flow")?
        - 1;
    let (first, end) = (curve.points[0].mean, curve.points[last].mean);
    outcome(
        end > first && counts_ok,
        format!("mean attack confidence {first:.3} at the first step, {end:.3} at step {} (last common); counts non-increasing: {counts_ok}", last + 1),
    )
}

fn feature_reduction(tb: &mut Testbed) -> Result<Outcome> {
    let flows = tb.attack_flows();
    let controlled: HashMap<&str, bool> = flows.iter().map(|f| (f.id.as_str(), f.fully_controlled)).collect();
    let ratio = |rs: &[AdversarialResult], fc: bool| {
        let rs: Vec<&AdversarialResult> = rs.iter().filter(|r| controlled[r.flow_id.as_str()] == fc).collect();
        let before = rs.iter().filter(|r| r.detected_before()).count();
        let flipped = rs.iter().filter(|r| r.detected_before() && r.success).count();
        if before == 0 {
            0.0
        } else {
            flipped as f64 / before as f64
        }
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for mode in [ReduceMode::BothDirections, ReduceMode::AttackerDirectionOnly] {
        let model = train_reduced(&tb.train, mode, &train_config())?;
        let cw: Vec<Vec<AdversarialResult>> = [1.0, 4.0, 16.0]
            .iter()
            .map(|&kappa| {
                let m = AttackMethod::Cw(CwConfig {
                    kappa,
                    ..CwConfig::default()
                });
                Ok(evaluate_attack(&model, &flows, &m)?.results)
            })
            .collect::<Result<_>>()?;
        let runs = [
            ("cw", escalated(&cw)),
            ("pgd", evaluate_attack(&model, &flows, &AttackMethod::PgdLinf(PgdConfig::default()))?.results),
            (
                "fgsm",
                evaluate_attack(
                    &model,
                    &flows,
                    &AttackMethod::Fgsm {
                        epsilon: 1.0,
                        delta: DEFAULT_DELTA,
                    },
                )?
                .results,
            ),
        ];
        for (name, results) in &runs {
            let (other, full) = (ratio(results, false), ratio(results, true));
            pass &= match mode {
                ReduceMode::BothDirections => other == 0.0 && full == 0.0,
                ReduceMode::AttackerDirectionOnly => other == 0.0 && full > 0.0,
            };
            parts.push(format!("{} {name} {other:.3}/{full:.3}", mode.name()));
        }
    }
    outcome(pass, format!("success ratio other/fully controlled: {}", parts.join(", ")))
}

fn adversarial_training_effect(tb: &mut Testbed) -> Result<Outcome> {
    let start = Instant::now();
    let config = AdvTrainConfig {
        train: train_config(),
        ..AdvTrainConfig::default()
    };
    let held_out = tb.attack_flows();
    let out = adversarial_training(&tb.train, &held_out, &config, SEED)?;
    let secs = start.elapsed().as_secs_f64();
    let base_acc = evaluate(&out.baseline, &tb.test)?.flow.accuracy;
    let acc = evaluate(&out.model, &tb.test)?.flow.accuracy;
    let base_ars = out.trajectory[0].ars;
    let last = out.trajectory.last().context("empty trajectory")?;
    let cycles = out.trajectory.len() - 1;
    let ars_ok = base_ars.is_finite() && last.ars > base_ars && last.ars >= 1.25 * base_ars;
    outcome(
        cycles >= 5 && ars_ok && (acc - base_acc).abs() <= 0.01 && secs < 900.0,
        format!(
            "{cycles} cycles: ARS {base_ars:.4} -> {}, flow accuracy {base_acc:.4} -> {acc:.4}, {secs:.0} s",
            if last.ars.is_finite() { format!("{:.4}", last.ars) } else { "inf".into() }
        ),
    )
}

const PIPELINE: &[&[&str]] = &[
    &["synth"],
    &["train"],
    &["train", "--feature-dropout"],
    &["eval"],
    &["attack", "--method", "cw"],
    &["attack", "--method", "pgd"],
    &["attack", "--method", "fgsm"],
    &["ars"],
    &["explain", "--method", "weights"],
    &["explain", "--method", "perturb"],
    &["explain", "--method", "dropout"],
    &["explain", "--method", "shared"],
    &["explain", "--method", "mi"],
    &["explain", "--method", "pdp"],
    &["explain", "--method", "seqpdp"],
    &["explain", "--method", "confidence"],
    &["explain", "--method", "profile"],
    &["defend", "--mode", "reduce-both"],
    &["defend", "--mode", "reduce-forward"],
    &["defend", "--mode", "advtrain"],
    &["export-plot"],
];

const PIPELINE_CONFIG: &str = "seed = 7\n[ars]\nsamples = 20\n[defense]\nepochs = 20\n";

fn run_pipeline(dir: &Path, config: &Path) -> Result<BTreeMap<String, Vec<u8>>> {
    for args in PIPELINE {
        let status = Command::new(env!("CARGO_BIN_EXE_seqids"))
            .arg("--config")
            .arg(config)
            .arg("--output-dir")
            .arg(dir)
            .args(*args)
            .output()?;
        ensure!(
            status.status.success(),
            "seqids {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&status.stderr)
        );
    }
    let mut files = BTreeMap::new();
    for sub in ["", "plots"] {
        for entry in std::fs::read_dir(dir.join(sub))? {
            let path = entry?.path();
            if path.is_file() {
                let name = path.strip_prefix(dir)?.to_string_lossy().into_owned();
                files.insert(name, std::fs::read(&path)?);
            }
        }
    }
    Ok(files)
}

fn reproducibility(_: &mut Testbed) -> Result<Outcome> {
    let tmp = tempfile::tempdir()?;
    let config = tmp.path().join("run.toml");
    std::fs::write(&config, PIPELINE_CONFIG)?;
    let a = run_pipeline(&tmp.path().join("a"), &config)?;
    let b = run_pipeline(&tmp.path().join("b"), &config)?;
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    outcome(
        a.len() == b.len() && differing.is_empty(),
        format!(
            "{} commands, {} artifacts per run, differing: {:?}",
            PIPELINE.len(),
            a.len(),
            differing
        ),
    )
}

type Criterion = fn(&mut Testbed) -> Result<Outcome>;

const CRITERIA: [(&str, Criterion); 16] = [
    ("gradient check", gradient_check),
    ("classifier sanity", classifier_sanity),
    ("constraint feasibility", constraint_feasibility),
    ("CW success semantics", cw_success_semantics),
    ("attack ordering", attack_ordering),
    ("kappa monotonicity", kappa_monotonicity),
    ("ARS oracle equivalence", ars_equivalence),
    ("CW near-optimality", cw_near_optimal),
    ("feature dropout validity", dropout_validity),
    ("shared-information score", shared_information),
    ("mutual information", mutual_information_values),
    ("PDP correctness", pdp_correctness),
    ("confidence per step", confidence_trend),
    ("feature reduction", feature_reduction),
    ("adversarial training", adversarial_training_effect),
    ("reproducibility", reproducibility),
];

fn main() {
    let only: Vec<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|n| n.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut testbed = Testbed::new().expect("testbed builds");
    let mut failed = 0;
    for (k, (name, check)) in CRITERIA.iter().enumerate() {
        let number = k + 1;
        if !only.is_empty() && !only.contains(&number) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match check(&mut testbed) {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e:#}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} {number:>2} {name}: {detail} [{:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
