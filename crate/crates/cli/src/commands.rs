use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

use seqids::attacks::{evaluate_attack, AttackMethod, AttackSummary};
use seqids::classifier::{
    evaluate, train, train_feature_dropout, write_history_csv, MetricsReport, Model,
};
use seqids::defenses::{adversarial_training, select_held_out, train_reduced, ReduceMode};
use seqids::explain::{
    conditional_pdp, confidence_per_step, feature_sequence_profile, importance_dropout,
    importance_perturbation, importance_weights, sensitivity_mutual_information, sequential_pdp,
    shared_info_score, ClassFilter, ImportanceTable, MiConfig,
};
use seqids::flowdata::{
    assemble_flows, parse_packet_csv, read_dataset, split_dataset, synth_generate, write_dataset,
    Dataset,
};
use seqids::robustness::compute_ars;

use crate::config::{config_error, RunConfig};
use crate::output::Artifacts;
use crate::{plot, AttackChoice, Command, DefenseChoice, ExplainChoice};

pub fn execute(command: &Command, cfg: &RunConfig) -> anyhow::Result<Artifacts> {
    let mut art = Artifacts::default();
    match command {
        Command::Ingest { input } => ingest(input, &mut art)?,
        Command::Synth => synth(cfg, &mut art)?,
        Command::Train {
            feature_dropout, ..
        } => train_cmd(cfg, *feature_dropout, &mut art)?,
        Command::Eval => eval(cfg, &mut art)?,
        Command::Attack { method, .. } => attack(cfg, *method, &mut art)?,
        Command::Ars { .. } => ars(cfg, &mut art)?,
        Command::Explain { method, .. } => explain(cfg, *method, &mut art)?,
        Command::Defend { mode } => defend(cfg, *mode, &mut art)?,
        Command::ExportPlot => {
            for (name, bytes) in plot::scripts(&cfg.paths.output_dir)? {
                art.add(name, bytes);
            }
        }
    }
    Ok(art)
}

#[derive(Serialize)]
struct DatasetSummary {
    flows: usize,
    packets: usize,
    per_category: BTreeMap<String, usize>,
}

fn summarize(ds: &Dataset) -> DatasetSummary {
    let mut per_category = BTreeMap::new();
    for f in &ds.flows {
        *per_category.entry(f.category().to_string()).or_default() += 1;
    }
    DatasetSummary {
        flows: ds.len(),
        packets: ds.packet_count(),
        per_category,
    }
}

fn read_input(path: &Path, role: &str, art: &mut Artifacts) -> anyhow::Result<Vec<u8>> {
    let bytes = fs::read(path).with_context(|| format!("reading {role} {}", path.display()))?;
    art.input(role, &bytes);
    Ok(bytes)
}

fn load_dataset(cfg: &RunConfig, art: &mut Artifacts) -> anyhow::Result<Dataset> {
    let path = cfg.paths.dataset();
    let bytes = read_input(&path, "dataset", art)?;
    let (ds, _) = read_dataset(bytes.as_slice())
        .with_context(|| format!("parsing dataset {}", path.display()))?;
    Ok(ds)
}

fn load_model(cfg: &RunConfig, art: &mut Artifacts) -> anyhow::Result<Model> {
    load_model_from(&cfg.paths.model(), art)
}

fn load_model_from(path: &Path, art: &mut Artifacts) -> anyhow::Result<Model> {
    let bytes = read_input(path, "model", art)?;
    Model::from_bytes(&bytes).with_context(|| format!("parsing model {}", path.display()))
}

fn test_split(cfg: &RunConfig, art: &mut Artifacts) -> anyhow::Result<(Dataset, Dataset)> {
    let ds = load_dataset(cfg, art)?;
    Ok(split_dataset(&ds, cfg.seed)?)
}

fn add_dataset(art: &mut Artifacts, ds: &Dataset, prefix: &str) -> anyhow::Result<()> {
    art.add_with("dataset.json", |w| write_dataset(w, ds, None))?;
    art.add_json(format!("{prefix}_summary.json"), &summarize(ds))
}

fn ingest(input: &Path, art: &mut Artifacts) -> anyhow::Result<()> {
    let bytes = read_input(input, "packets", art)?;
    let records = parse_packet_csv(bytes.as_slice())
        .with_context(|| format!("parsing {}", input.display()))?;
    let ds = Dataset::new(assemble_flows(&records)?);
    add_dataset(art, &ds, "ingest")
}

fn synth(cfg: &RunConfig, art: &mut Artifacts) -> anyhow::Result<()> {
    let ds = synth_generate(&cfg.synth, cfg.seed)?;
    add_dataset(art, &ds, "synth")
}

fn add_metrics(art: &mut Artifacts, stem: &str, report: &MetricsReport) -> anyhow::Result<()> {
    art.add_with(format!("{stem}.json"), |w| report.write_json(w))?;
    art.add_with(format!("{stem}.csv"), |w| report.write_csv(w))
}

fn train_cmd(cfg: &RunConfig, feature_dropout: bool, art: &mut Artifacts) -> anyhow::Result<()> {
    let (train_set, test) = test_split(cfg, art)?;
    let tc = cfg.train_config(feature_dropout);
    let (model, suffix) = if feature_dropout {
        (train_feature_dropout(&train_set, &tc)?, "_dropout")
    } else {
        (train(&train_set, &tc)?, "")
    };
    art.add(format!("model{suffix}.bin"), model.to_bytes()?);
    art.add_with(format!("history{suffix}.csv"), |w| {
        write_history_csv(&model.history, w)
    })?;
    add_metrics(art, &format!("train{suffix}_metrics"), &evaluate(&model, &test)?)
}

fn eval(cfg: &RunConfig, art: &mut Artifacts) -> anyhow::Result<()> {
    let model = load_model(cfg, art)?;
    let (_, test) = test_split(cfg, art)?;
    add_metrics(art, "metrics", &evaluate(&model, &test)?)
}

fn attack_method(cfg: &RunConfig, choice: AttackChoice) -> AttackMethod {
    match choice {
        AttackChoice::Cw => AttackMethod::Cw(cfg.attack.cw),
        AttackChoice::Pgd => AttackMethod::PgdLinf(cfg.attack.pgd),
        AttackChoice::Fgsm => AttackMethod::Fgsm {
            epsilon: cfg.attack.fgsm_epsilon,
            delta: cfg.attack.fgsm_delta,
        },
    }
}

fn attack(cfg: &RunConfig, choice: AttackChoice, art: &mut Artifacts) -> anyhow::Result<()> {
    let model = load_model(cfg, art)?;
    let (_, test) = test_split(cfg, art)?;
    let report = evaluate_attack(&model, &test.flows, &attack_method(cfg, choice))?;
    let stem = match choice {
        AttackChoice::Cw => "attack_cw",
        AttackChoice::Pgd => "attack_pgd",
        AttackChoice::Fgsm => "attack_fgsm",
    };
    art.add_with(format!("{stem}.json"), |w| report.write_json(w))?;
    art.add_with(format!("{stem}.csv"), |w| report.write_csv(w))
}

fn ars_limit(cfg: &RunConfig) -> usize {
    if cfg.ars.samples == 0 {
        usize::MAX
    } else {
        cfg.ars.samples
    }
}

fn ars(cfg: &RunConfig, art: &mut Artifacts) -> anyhow::Result<()> {
    let model = load_model(cfg, art)?;
    let (_, test) = test_split(cfg, art)?;
    let samples = select_held_out(&test.flows, ars_limit(cfg));
    let report = compute_ars(&model, &samples, &cfg.ars_schedule())?;
    art.add_with("ars.json", |w| report.write_json(w))?;
    art.add_with("ars_rounds.csv", |w| report.write_rounds_csv(w))
}

fn feature_index(names: &[String], name: &str) -> anyhow::Result<usize> {
    names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| config_error(format!("unknown feature `{name}`")))
}

fn add_table(art: &mut Artifacts, stem: &str, t: &ImportanceTable) -> anyhow::Result<()> {
    art.add_with(format!("{stem}.json"), |w| t.write_json(w))?;
    art.add_with(format!("{stem}.csv"), |w| t.write_csv(w))
}

fn explain(cfg: &RunConfig, method: ExplainChoice, art: &mut Artifacts) -> anyhow::Result<()> {
    let class = ClassFilter::parse(&cfg.explain.class);
    let feature = |default: &str| cfg.explain.feature.clone().unwrap_or_else(|| default.to_string());

    if method == ExplainChoice::Profile {
        let (_, test) = test_split(cfg, art)?;
        let f = feature_index(&test.schema.names, &feature("iat"))?;
        let p = feature_sequence_profile(&test, &class, f)?;
        art.add_with("explain_profile.json", |w| p.write_json(w))?;
        return art.add_with("explain_profile.csv", |w| p.write_csv(w));
    }

    let model = match (method, &cfg.paths.model) {
        (ExplainChoice::Dropout | ExplainChoice::Shared, None) => {
            load_model_from(&cfg.paths.output_dir.join("model_dropout.bin"), art)?
        }
        _ => load_model(cfg, art)?,
    };
    let (_, test) = test_split(cfg, art)?;
    let names = &model.schema.names;
    match method {
        ExplainChoice::Weights => add_table(art, "explain_weights", &importance_weights(&model)),
        ExplainChoice::Perturb => add_table(
            art,
            "explain_perturb",
            &importance_perturbation(&model, &test, cfg.seed)?,
        ),
        ExplainChoice::Dropout => {
            add_table(art, "explain_dropout", &importance_dropout(&model, &test)?)
        }
        ExplainChoice::Mi => add_table(
            art,
            "explain_mi",
            &sensitivity_mutual_information(
                &model,
                &test,
                &MiConfig {
                    bins: cfg.explain.mi_bins,
                },
            )?,
        ),
        ExplainChoice::Shared => {
            let i = feature_index(names, &cfg.explain.pair[0])?;
            let j = feature_index(names, &cfg.explain.pair[1])?;
            art.add_json("explain_shared.json", &shared_info_score(&model, &test, i, j)?)
        }
        ExplainChoice::Pdp => {
            let f = feature_index(names, &feature("dst_port"))?;
            let c = conditional_pdp(&model, &test, &class, f, None)?;
            art.add_with("explain_pdp.json", |w| c.write_json(w))?;
            art.add_with("explain_pdp.csv", |w| c.write_csv(w))
        }
        ExplainChoice::Seqpdp => {
            let f = feature_index(names, &feature("iat"))?;
            let adversarial = if cfg.explain.adversarial {
                let report = evaluate_attack(&model, &test.flows, &AttackMethod::Cw(cfg.attack.cw))?;
                let flows: Vec<_> = report
                    .results
                    .into_iter()
                    .filter(|r| r.success)
                    .map(|r| r.adversarial_flow)
                    .filter(|f| class.matches(f))
                    .collect();
                Some(flows)
            } else {
                None
            };
            let c = sequential_pdp(&model, &test, &class, f, cfg.explain.step, None, adversarial.as_deref())?;
            art.add_with("explain_seqpdp.json", |w| c.write_json(w))?;
            art.add_with("explain_seqpdp.csv", |w| c.write_csv(w))
        }
        ExplainChoice::Confidence => {
            let c = confidence_per_step(&model, &test, &class)?;
            art.add_with("explain_confidence.json", |w| c.write_json(w))?;
            art.add_with("explain_confidence.csv", |w| c.write_csv(w))
        }
        ExplainChoice::Profile => unreachable!("handled above"),
    }
}

#[derive(Serialize)]
struct ReductionReport {
    mode: ReduceMode,
    metrics: MetricsReport,
    attacks: BTreeMap<&'static str, AttackOutcome>,
}

#[derive(Serialize)]
struct AttackOutcome {
    overall: AttackSummary,
    per_type: BTreeMap<String, AttackSummary>,
}

#[derive(Serialize)]
struct AdvTrainReport<'a> {
    original_size: usize,
    augmented_size: usize,
    held_out_ids: &'a [String],
    baseline: MetricsReport,
    hardened: MetricsReport,
    trajectory: &'a [seqids::defenses::CycleRecord],
}

fn defend(cfg: &RunConfig, mode: DefenseChoice, art: &mut Artifacts) -> anyhow::Result<()> {
    let (train_set, test) = test_split(cfg, art)?;
    let reduce = match mode {
        DefenseChoice::ReduceBoth => ReduceMode::BothDirections,
        DefenseChoice::ReduceForward => ReduceMode::AttackerDirectionOnly,
        DefenseChoice::Advtrain => {
            let out = adversarial_training(&train_set, &test.flows, &cfg.adv_train_config(), cfg.seed)?;
            art.add("model_advtrain.bin", out.model.to_bytes()?);
            art.add_with("advtrain_trajectory.csv", |w| out.write_trajectory_csv(w))?;
            let report = AdvTrainReport {
                original_size: out.original_size,
                augmented_size: out.augmented_size,
                held_out_ids: &out.held_out_ids,
                baseline: evaluate(&out.baseline, &test)?,
                hardened: evaluate(&out.model, &test)?,
                trajectory: &out.trajectory,
            };
            return art.add_json("defend_advtrain.json", &report);
        }
    };
    let stem = match reduce {
        ReduceMode::BothDirections => "reduce_both",
        ReduceMode::AttackerDirectionOnly => "reduce_forward",
    };
    let model = train_reduced(&train_set, reduce, &cfg.train_config(false))?;
    let metrics = evaluate(&model, &test)?;
    let mut attacks = BTreeMap::new();
    for (name, method) in [
        ("cw", AttackMethod::Cw(cfg.attack.cw)),
        ("pgd_linf", AttackMethod::PgdLinf(cfg.attack.pgd)),
        (
            "fgsm",
            AttackMethod::Fgsm {
                epsilon: cfg.attack.fgsm_epsilon,
                delta: cfg.attack.fgsm_delta,
            },
        ),
    ] {
        let r = evaluate_attack(&model, &test.flows, &method)?;
        attacks.insert(
            name,
            AttackOutcome {
                overall: r.overall,
                per_type: r.per_type,
            },
        );
    }
    art.add(format!("model_{stem}.bin"), model.to_bytes()?);
    add_metrics(art, &format!("defend_{stem}_metrics"), &metrics)?;
    art.add_json(
        format!("defend_{stem}.json"),
        &ReductionReport {
            mode: reduce,
            metrics,
            attacks,
        },
    )
}
