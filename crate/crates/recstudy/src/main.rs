use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use recstudy::config::Config;
use recstudy::formats::{self, DatasetRef};
use recstudy::harness;
use recstudy::service::results::StudyResults;
use recstudy::service::StudyService;
use recstudy_core::demo::{generate_demo_recommendations, DemoGenerator};
use recstudy_core::metrics::list_metrics;
use recstudy_core::simulation::{
    run_recommendation_layer, ElicitationConfig, NoiseModel, SimulationConfig, TiePolicy,
    UserSample,
};
use recstudy_core::{
    CandidateFilter, MappingConfig, RatingScale, SelectionStrategy, SimilarityMeasure, UserId,
};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "recstudy", version, about = "Recommender user studies on benchmark datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct DatasetArgs {
    /// Ratings CSV, or a directory with ratings.csv and optionally movies.csv.
    #[arg(long)]
    dataset: PathBuf,
    /// Items CSV; overrides movies.csv found next to the ratings.
    #[arg(long)]
    items: Option<PathBuf>,
    /// Rating scale as `min:max:step`, or `half-stars` / `five-stars`.
    #[arg(long, default_value = "half-stars", value_parser = parse_scale)]
    scale: RatingScale,
}

impl DatasetArgs {
    fn dataset_ref(&self) -> DatasetRef {
        let mut r = DatasetRef::from_path(&self.dataset, self.scale);
        if self.items.is_some() {
            r.items = self.items.clone();
        }
        r
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Popularity,
    PopularityEntropy,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum Measure {
    Cosine,
    Pearson,
    Imad,
}

impl From<Measure> for SimilarityMeasure {
    fn from(m: Measure) -> Self {
        match m {
            Measure::Cosine => SimilarityMeasure::CosineOverOverlap,
            Measure::Pearson => SimilarityMeasure::PearsonOverOverlap,
            Measure::Imad => SimilarityMeasure::InverseMeanAbsDiff,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Noise {
    None,
    Gaussian,
    Drop,
}

#[derive(Clone, Copy, ValueEnum)]
enum Ties {
    Strict,
    TieInclusive,
}

#[derive(Clone, Copy, ValueEnum)]
enum Candidates {
    All,
    WithRecs,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dataset and print its statistics.
    Ingest {
        #[command(flatten)]
        data: DatasetArgs,
        /// Also validate a recommendations file against the dataset.
        #[arg(long)]
        recs: Option<PathBuf>,
    },
    /// Write a demo recommendations file.
    GenRecs {
        #[command(flatten)]
        data: DatasetArgs,
        /// `LABEL=top-popularity` or `LABEL=random-unseen[:SEED]`; give two.
        #[arg(long = "list", required = true, value_parser = parse_generator)]
        lists: Vec<(String, DemoGenerator)>,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recommendation-layer simulation: dataset users answer the questionnaire.
    Simulate {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        recs: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "popularity")]
        strategy: Strategy,
        /// Seed of the random elicitation strategy.
        #[arg(long, default_value_t = 0)]
        strategy_seed: u64,
        #[arg(long, default_value_t = 50)]
        k: usize,
        #[arg(long, value_enum, default_value = "cosine")]
        measure: Measure,
        #[arg(long, default_value_t = 3)]
        min_overlap: usize,
        /// Candidate pool; defaults to users with recommendations when
        /// `--recs` is given, otherwise all users.
        #[arg(long, value_enum)]
        candidates: Option<Candidates>,
        /// A sample size, or a comma-separated list of user ids. A single id
        /// is written with a `u` prefix, as in `u7`.
        #[arg(long, default_value = "500")]
        sample: String,
        #[arg(long, value_enum, default_value = "none")]
        noise: Noise,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0.0)]
        drop: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "tie-inclusive")]
        tie_policy: Ties,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-user rows as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Data-layer analysis of a simulation report or a study export.
    DataLayer {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "cosine")]
        measure: Measure,
        /// Overrides the dataset named in the input.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value = "half-stars", value_parser = parse_scale)]
        scale: RatingScale,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Diversity and novelty of every recommendation list.
    ListMetrics {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        recs: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Agreement summaries of a validation-mode study export.
    HumanLayer {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the study service. Configured through RECSTUDY_* variables.
    Serve,
}

fn parse_scale(s: &str) -> Result<RatingScale, String> {
    match s {
        "half-stars" => Ok(RatingScale::HALF_STARS),
        "five-stars" => Ok(RatingScale::FIVE_STARS),
        _ => {
            let parts: Vec<f64> = s
                .split(':')
                .map(|p| p.parse::<f64>().map_err(|e| e.to_string()))
                .collect::<Result<_, _>>()?;
            let [min, max, step] = parts[..] else {
                return Err("expected min:max:step".into());
            };
            RatingScale::new(min, max, step).map_err(|e| e.to_string())
        }
    }
}

fn parse_generator(s: &str) -> Result<(String, DemoGenerator), String> {
    let (label, kind) = s.split_once('=').ok_or("expected LABEL=GENERATOR")?;
    let generator = match kind.split_once(':') {
        None if kind == "top-popularity" => DemoGenerator::TopPopularity,
        None if kind == "random-unseen" => DemoGenerator::RandomUnseen { seed: 0 },
        Some(("random-unseen", seed)) => DemoGenerator::RandomUnseen {
            seed: seed.parse().map_err(|_| format!("bad seed '{seed}'"))?,
        },
        _ => return Err(format!("unknown generator '{kind}'")),
    };
    Ok((label.to_string(), generator))
}

fn parse_sample(s: &str) -> anyhow::Result<UserSample> {
    if s.contains(',') || s.starts_with('u') {
        let ids = s
            .split(',')
            .map(|p| p.trim().trim_start_matches('u').parse().map(UserId))
            .collect::<Result<Vec<_>, _>>()
            .context("--sample list must hold user ids")?;
        return Ok(UserSample::Explicit(ids));
    }
    Ok(UserSample::Size(s.parse().context("--sample must be a count or an id list")?))
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> anyhow::Result<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn load_dataset(r: &DatasetRef) -> anyhow::Result<recstudy_core::BenchmarkDataset> {
    r.load().map_err(|e| anyhow::anyhow!("{e}"))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest { data, recs } => {
            let r = data.dataset_ref();
            let dataset = load_dataset(&r)?;
            if dataset.is_metadata_incomplete() {
                eprintln!("warning: some rated items have no metadata and render by id");
            }
            if let Some(path) = recs {
                let sets = formats::load_recommendation_file(&path, &dataset)?;
                eprintln!(
                    "recommendations: labels {:?}, {} users",
                    sets.labels(),
                    sets.user_count()
                );
            }
            write_json(&harness::dataset_stats(&r, &dataset), None)
        }
        Command::GenRecs { data, lists, n, out } => {
            if lists.len() != 2 {
                bail!("give exactly two --list options, one per algorithm label");
            }
            let dataset = load_dataset(&data.dataset_ref())?;
            let mut rows = Vec::new();
            for (label, generator) in &lists {
                rows.extend(generate_demo_recommendations(&dataset, *generator, n, label)?);
            }
            let mut w = output(out.as_deref())?;
            formats::write_recommendations(&mut w, rows)?;
            w.flush()?;
            Ok(())
        }
        Command::Simulate {
            data,
            recs,
            strategy,
            strategy_seed,
            k,
            measure,
            min_overlap,
            candidates,
            sample,
            noise,
            sigma,
            drop,
            seed,
            tie_policy,
            out,
            csv,
        } => {
            let r = data.dataset_ref();
            let dataset = load_dataset(&r)?;
            let sets = recs
                .as_deref()
                .map(|p| formats::load_recommendation_file(p, &dataset))
                .transpose()?;
            let candidate_filter = match candidates {
                Some(Candidates::All) => CandidateFilter::AllUsers,
                Some(Candidates::WithRecs) => CandidateFilter::UsersWithRecommendations,
                None if sets.is_some() => CandidateFilter::UsersWithRecommendations,
                None => CandidateFilter::AllUsers,
            };
            let config = SimulationConfig {
                sample: parse_sample(&sample)?,
                elicitation: ElicitationConfig {
                    strategy: match strategy {
                        Strategy::Popularity => SelectionStrategy::Popularity,
                        Strategy::PopularityEntropy => SelectionStrategy::PopularityEntropy,
                        Strategy::Random => SelectionStrategy::Random {
                            seed: strategy_seed,
                        },
                    },
                    k,
                },
                mapping: MappingConfig {
                    measure: measure.into(),
                    min_overlap,
                    candidate_filter,
                },
                noise: match noise {
                    Noise::None => NoiseModel::None,
                    Noise::Gaussian => NoiseModel::Gaussian { sigma },
                    Noise::Drop => NoiseModel::DropAnswers { probability: drop },
                },
                seed,
                tie_policy: match tie_policy {
                    Ties::Strict => TiePolicy::StrictArgmax,
                    Ties::TieInclusive => TiePolicy::TieInclusive,
                },
            };
            let report = run_recommendation_layer(&dataset, sets.as_ref(), &config)?;
            let s = &report.summary;
            eprintln!(
                "sampled {} skipped {} evaluated {}: accuracy {} (strict {}, tie-inclusive {})",
                s.sampled,
                s.skipped,
                s.evaluated,
                fmt_opt(s.accuracy),
                fmt_opt(s.strict_accuracy),
                fmt_opt(s.tie_inclusive_accuracy)
            );
            if let Some(path) = csv {
                harness::write_simulation_csv(&report, File::create(&path)?)?;
            }
            let output = harness::SimulationOutput {
                schema: harness::SIMULATION_SCHEMA.to_string(),
                dataset: r,
                recommendations: recs,
                report,
            };
            write_json(&output, out.as_deref())
        }
        Command::DataLayer {
            input,
            measure,
            dataset,
            scale,
            out,
            csv,
        } => {
            let text = std::fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let parsed = harness::read_mapped_input(&text)?;
            let r = match dataset {
                Some(path) => DatasetRef::from_path(&path, scale),
                None => parsed.dataset.clone(),
            };
            let ds = load_dataset(&r)?;
            let report = harness::data_layer(&parsed, &ds, measure.into())?;
            if let Some(path) = csv {
                harness::write_data_layer_csv(&report.report, File::create(&path)?)?;
            }
            write_json(&report, out.as_deref())
        }
        Command::ListMetrics {
            data,
            recs,
            out,
            csv,
        } => {
            let dataset = load_dataset(&data.dataset_ref())?;
            let sets = formats::load_recommendation_file(&recs, &dataset)?;
            let report = list_metrics(&dataset, &sets)?;
            if let Some(path) = csv {
                harness::write_list_metrics_csv(&report, File::create(&path)?)?;
            }
            write_json(
                &harness::ListMetricsOutput {
                    schema: harness::LIST_METRICS_SCHEMA.to_string(),
                    report,
                },
                out.as_deref(),
            )
        }
        Command::HumanLayer { input, out } => {
            let text = std::fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let results = StudyResults::from_json(&text).context("input is not a study export")?;
            write_json(&harness::human_layer(&results), out.as_deref())
        }
        Command::Serve => serve(),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into())
}

fn serve() -> anyhow::Result<()> {
    let config = Config::from_env()?;
    config.ensure_data_dir()?;
    let service = StudyService::open(
        config.open_store()?,
        config.open_dispatcher()?,
        config.service_options()?,
    )?;
    let app = recstudy::http::router(Arc::new(service), config.static_dir.clone());
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&config.bind)
            .await
            .with_context(|| format!("binding {}", config.bind))?;
        tracing::info!(bind = %config.bind, data_dir = %config.data_dir.display(), "serving");
        recstudy::http::serve(listener, app).await?;
        Ok(())
    })
}

fn main() {
    tracing_subscriber::fmt()
        .with_writer(io::stderr)
        .init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
