//! Experiment reports behind the CLI: dataset ingestion, simulation, data-layer
//! and human-layer analyses, and list metrics.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context};
use recstudy_core::elicitation::LIKERT_POINTS;
use recstudy_core::metrics::{agreement_summary, AgreementSummary, ListMetricsReport};
use recstudy_core::simulation::{DataLayerReport, MappedRecord, SimulationReport};
use recstudy_core::{
    BenchmarkDataset, DatasetStats, ItemId, Phase, PreferenceVector, SimilarityMeasure, UserId,
};
use serde::{Deserialize, Serialize};

use crate::formats::DatasetRef;
use crate::service::model::{AnswerValue, SessionState};
use crate::service::results::{StudyResults, RESULTS_SCHEMA};

pub const DATASET_STATS_SCHEMA: &str = "recstudy.dataset-stats/1";
pub const SIMULATION_SCHEMA: &str = "recstudy.simulation/1";
pub const DATA_LAYER_SCHEMA: &str = "recstudy.data-layer/1";
pub const LIST_METRICS_SCHEMA: &str = "recstudy.list-metrics/1";
pub const HUMAN_LAYER_SCHEMA: &str = "recstudy.human-layer/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStatsOutput {
    pub schema: String,
    pub dataset: DatasetRef,
    pub stats: DatasetStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutput {
    pub schema: String,
    pub dataset: DatasetRef,
    pub recommendations: Option<PathBuf>,
    pub report: SimulationReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataLayerOutput {
    pub schema: String,
    /// Schema of the input document.
    pub source: String,
    pub report: DataLayerReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ListMetricsOutput {
    pub schema: String,
    pub report: ListMetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticipantAgreement {
    pub participant: usize,
    pub mapped_user: Option<UserId>,
    pub summary: AgreementSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanLayerOutput {
    pub schema: String,
    pub study_id: String,
    pub points: u8,
    /// Answer counts for points 1 to `points`.
    pub distribution: Vec<usize>,
    pub overall: Option<AgreementSummary>,
    pub participants: Vec<ParticipantAgreement>,
}

pub fn dataset_stats(dataset_ref: &DatasetRef, dataset: &BenchmarkDataset) -> DatasetStatsOutput {
    DatasetStatsOutput {
        schema: DATASET_STATS_SCHEMA.to_string(),
        dataset: dataset_ref.clone(),
        stats: dataset.stats(),
    }
}

fn rated_item(question_id: &str) -> Option<ItemId> {
    question_id.strip_prefix("rate-")?.parse().ok().map(ItemId)
}

/// Data-layer records of every mapped participant in a study export,
/// labeled `participant-{n}`.
pub fn records_from_results(results: &StudyResults) -> Vec<MappedRecord> {
    results
        .participants
        .iter()
        .filter_map(|p| {
            let mapping = p.mapping.as_ref()?;
            let initial = p.responses.iter().find(|r| r.phase == Phase::Initial)?;
            let preference: PreferenceVector = initial
                .answers
                .iter()
                .filter_map(|a| match a.answer {
                    AnswerValue::Rating(v) => Some((rated_item(&a.question_id)?, v)),
                    _ => None,
                })
                .collect();
            Some(MappedRecord {
                label: format!("participant-{}", p.participant),
                preference,
                mapped_user: mapping.mapped_user,
            })
        })
        .collect()
}

/// A parsed `data-layer` input: the dataset it refers to and its records.
pub struct MappedInput {
    pub source: String,
    pub dataset: DatasetRef,
    pub records: Vec<MappedRecord>,
}

/// Reads either a simulation report or a study results export.
pub fn read_mapped_input(text: &str) -> anyhow::Result<MappedInput> {
    let value: serde_json::Value = serde_json::from_str(text).context("input is not JSON")?;
    let schema = value
        .get("schema")
        .and_then(|s| s.as_str())
        .unwrap_or_default()
        .to_string();
    if schema == SIMULATION_SCHEMA {
        let sim: SimulationOutput = serde_json::from_value(value)?;
        Ok(MappedInput {
            source: schema,
            dataset: sim.dataset,
            records: sim.report.mapped_records(),
        })
    } else if schema == RESULTS_SCHEMA {
        let results: StudyResults = serde_json::from_value(value)?;
        Ok(MappedInput {
            source: schema,
            dataset: results.spec.dataset.clone(),
            records: records_from_results(&results),
        })
    } else {
        bail!("unsupported input schema '{schema}'; expected {SIMULATION_SCHEMA} or {RESULTS_SCHEMA}")
    }
}

pub fn data_layer(
    input: &MappedInput,
    dataset: &BenchmarkDataset,
    measure: SimilarityMeasure,
) -> anyhow::Result<DataLayerOutput> {
    let report = recstudy_core::simulation::run_data_layer(dataset, &input.records, measure)?;
    Ok(DataLayerOutput {
        schema: DATA_LAYER_SCHEMA.to_string(),
        source: input.source.clone(),
        report,
    })
}

/// Agreement of completed validation-mode participants with their proxy,
/// aggregated as mean, median and top-2-box.
pub fn human_layer(results: &StudyResults) -> HumanLayerOutput {
    let mut all = Vec::new();
    let mut participants = Vec::new();
    for p in &results.participants {
        if p.state != SessionState::Done {
            continue;
        }
        let answers: Vec<u8> = p
            .responses
            .iter()
            .filter(|r| r.phase == Phase::Validation)
            .flat_map(|r| &r.answers)
            .filter_map(|a| match a.answer {
                AnswerValue::Likert(n) => Some(n),
                _ => None,
            })
            .collect();
        if let Some(summary) = agreement_summary(&answers, LIKERT_POINTS) {
            participants.push(ParticipantAgreement {
                participant: p.participant,
                mapped_user: p.mapping.as_ref().map(|m| m.mapped_user),
                summary,
            });
        }
        all.extend(answers);
    }
    let mut distribution = vec![0; LIKERT_POINTS as usize];
    for &a in &all {
        if (1..=LIKERT_POINTS).contains(&a) {
            distribution[a as usize - 1] += 1;
        }
    }
    HumanLayerOutput {
        schema: HUMAN_LAYER_SCHEMA.to_string(),
        study_id: results.study_id.clone(),
        points: LIKERT_POINTS,
        distribution,
        overall: agreement_summary(&all, LIKERT_POINTS),
        participants,
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// One row per simulated user.
pub fn write_simulation_csv<W: Write>(report: &SimulationReport, out: W) -> csv::Result<()> {
    let mut w = csv_writer(out);
    w.write_record([
        "user",
        "answered",
        "skipped",
        "mapped_user",
        "score",
        "overlap",
        "tie_count",
        "correct_strict",
        "correct_tie_inclusive",
    ])?;
    for u in &report.users {
        w.write_record([
            u.user.to_string(),
            u.answered.to_string(),
            u.skipped.to_string(),
            opt(u.mapped_user),
            opt(u.score),
            opt(u.overlap),
            opt(u.tie_count),
            u.correct_strict.to_string(),
            u.correct_tie_inclusive.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per (label, user) list.
pub fn write_list_metrics_csv<W: Write>(report: &ListMetricsReport, out: W) -> csv::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["label", "user", "length", "diversity", "novelty"])?;
    for m in &report.lists {
        w.write_record([
            m.label.clone(),
            m.user.to_string(),
            m.length.to_string(),
            m.diversity.to_string(),
            m.novelty.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per data-layer record.
pub fn write_data_layer_csv<W: Write>(report: &DataLayerReport, out: W) -> csv::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["label", "mapped_user", "score"])?;
    for r in &report.per_record {
        w.write_record([r.label.clone(), r.mapped_user.to_string(), opt(r.score)])?;
    }
    w.flush()?;
    Ok(())
}
