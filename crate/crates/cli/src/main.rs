//! `linkintent` command-line driver.

mod commands;
mod config;
mod output;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use linkintent::annotations::StudyPhase;
use linkintent::eval::Gain;
use linkintent::rerank::StatsScope;

use crate::config::Overrides;

#[derive(Debug, Parser)]
#[command(
    name = "linkintent",
    version,
    about = "URL-sharing intent analytics and intent-aware retrieval"
)]
pub struct Cli {
    /// Experiment config file (TOML). Relative paths inside it resolve
    /// against its directory.
    #[arg(long, global = true, env = "LINKINTENT_CONFIG")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate the taxonomy or map labels from earlier taxonomies.
    Taxonomy {
        #[command(subcommand)]
        action: TaxonomyAction,
    },
    /// Validate a JSONL corpus and write the accepted records.
    Ingest(IngestArgs),
    /// Tweet type, length and reaction distributions per intent.
    Stats(StatsArgs),
    /// Per-item consensus outcomes for five-rater annotations.
    Consensus(ConsensusArgs),
    /// Fleiss' kappa and outcome histogram; optional Cohen's kappa.
    Agreement(AgreementArgs),
    /// Deduplicate intention codes and consolidate worker groupings.
    Codebook(CodebookArgs),
    /// Label unlabeled tweets with the experimental keyword rules.
    Classify(ClassifyArgs),
    /// Build and save an index snapshot.
    Index(IndexArgs),
    /// BM25 baseline run over a topic file or a single query.
    Search(SearchArgs),
    /// Intent-aware reranking of a baseline run.
    Rerank(StageArgs),
    /// Drop or demote intent-misaligned results of a run.
    Filter(FilterArgs),
    /// nDCG@k and MAP for one or more runs.
    Eval(EvalArgs),
    /// search, rerank, filter and eval in one go.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Subcommand)]
pub enum TaxonomyAction {
    /// Check structure and print category/class counts.
    Validate {
        #[arg(long)]
        taxonomy: Option<PathBuf>,
    },
    /// Map a label from an earlier taxonomy onto the six categories.
    Map {
        /// alhadi2011, gomezadorno2014 or java2007.
        #[arg(long)]
        source: String,
        #[arg(long)]
        label: String,
        #[arg(long)]
        mappings: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Where to write the accepted records; defaults to `<out-dir>/corpus.jsonl`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Treat rejected lines as an error.
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Tweet label file (`tweet_id<TAB>label`).
    #[arg(long, conflicts_with = "annotations")]
    pub labels: Option<PathBuf>,
    /// Crowd annotation file; items are grouped by consensus outcome.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long, default_value = "study1")]
    pub phase: StudyPhase,
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConsensusArgs {
    /// Annotation file (`item_id, rater_id, label, study_phase`).
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value = "study1")]
    pub phase: StudyPhase,
    /// Report how many no-consensus items gain a majority in this phase.
    #[arg(long)]
    pub compare: Option<StudyPhase>,
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value = "study1")]
    pub phase: StudyPhase,
    /// Two rater ids for pairwise Cohen's kappa over items both labeled.
    #[arg(long, num_args = 2, value_names = ["RATER_A", "RATER_B"])]
    pub cohen: Option<Vec<String>>,
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CodebookArgs {
    /// Code list (`code_id<TAB>text`).
    #[arg(long)]
    pub codes: Option<PathBuf>,
    /// Worker groupings, one JSON object per line.
    #[arg(long)]
    pub groupings: PathBuf,
    /// Minimum number of agreeing workers; defaults to a strict majority.
    #[arg(long)]
    pub threshold: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    /// Only emit labels at or above this confidence.
    #[arg(long, default_value_t = 0.0)]
    pub min_confidence: f64,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Snapshot path; defaults to the configured index path or
    /// `<out-dir>/index.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub include_linked_docs: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Inputs and parameters shared by the retrieval commands.
#[derive(Debug, Args, Clone, Default)]
pub struct RetrievalArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Load this index snapshot instead of indexing the corpus.
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub topics: Option<PathBuf>,
    /// Tweet and query label files; repeatable.
    #[arg(long = "labels")]
    pub labels: Vec<PathBuf>,
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    #[arg(long)]
    pub policy: Option<PathBuf>,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Candidates retrieved per topic.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub k1: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub include_linked_docs: bool,
    #[arg(long)]
    pub stats_scope: Option<StatsScope>,
    /// Times the intent text is appended during augmentation.
    #[arg(long)]
    pub repetition: Option<usize>,
    /// Fill missing tweet labels with the experimental keyword rules.
    #[arg(long)]
    pub heuristic: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl RetrievalArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            k: self.k,
            k1: self.k1,
            b: self.b,
            include_linked_docs: self.include_linked_docs,
            stats_scope: self.stats_scope,
            repetition: self.repetition,
            gain: None,
            output_dir: self.out_dir.clone(),
        }
    }
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    /// Run one ad hoc query and print the ranking instead of writing a run.
    #[arg(long)]
    pub query: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StageArgs {
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    /// Input run; defaults to `<out-dir>/baseline.run`.
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub stage: StageArgs,
    /// Demote misaligned results by this penalty instead of dropping them.
    #[arg(long)]
    pub demote: Option<f64>,
    /// Run tag written to the output run.
    #[arg(long)]
    pub tag: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    /// Runs to compare as NAME=PATH; repeatable. Order is kept in the table.
    #[arg(long = "run", required = true, value_parser = parse_named_run)]
    pub runs: Vec<(String, PathBuf)>,
    #[arg(long)]
    pub gain: Option<Gain>,
    #[arg(long)]
    pub cutoff: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    #[arg(long)]
    pub gain: Option<Gain>,
}

fn parse_named_run(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.to_string(), PathBuf::from(path)))
        }
        _ => Err(format!("expected NAME=PATH, got {s:?}")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
