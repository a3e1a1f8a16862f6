use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use linkintent::annotations::{
    agreement_delta, agreement_report, classify_phase, cohens_kappa, intention_distribution,
    interpretation_band, AnnotationFile, ConsensusOutcome, Kappa,
};
use linkintent::codebook::{
    consensus_grouping, consensus_merge, dedupe_exact, load_codes, load_groupings, Threshold,
};
use linkintent::corpus::{corpus_stats, Corpus, IntentGroup};
use linkintent::eval::{evaluate_runs, load_topics, EvalOptions, Qrels, RunFile, Topic};
use linkintent::index::{IndexFields, InvertedIndex, Tokenizer, TokenizerConfig};
use linkintent::intent::{HeuristicClassifier, LabelStore};
use linkintent::rerank::{AlignmentPolicy, PolicyAction, Reranker};
use linkintent::taxonomy::{PriorMappings, PriorSource, Taxonomy};

use crate::config::{Overrides, RunConfig};
use crate::output::write_atomic;
use crate::pipeline::{
    fill_heuristic_labels, filter_topics, rerank_topics, search_topics, BASELINE_FILTERED_TAG,
    BASELINE_TAG, INTENT_FILTERED_TAG, INTENT_TAG,
};
use crate::{
    AgreementArgs, ClassifyArgs, Cli, CodebookArgs, Command, ConsensusArgs, EvalArgs, FilterArgs,
    IndexArgs, IngestArgs, PipelineArgs, RetrievalArgs, SearchArgs, StageArgs, StatsArgs,
    TaxonomyAction,
};

const DEFAULT_TAXONOMY: &str = "data/taxonomy.toml";
const DEFAULT_MAPPINGS: &str = "data/prior_mappings.tsv";
const DEFAULT_POLICY: &str = "data/alignment_policy.toml";
const DEFAULT_RULES: &str = "data/heuristic_rules.toml";

pub fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut ctx = Ctx { cfg };
    match cli.command {
        Command::Taxonomy { action } => ctx.taxonomy(action),
        Command::Ingest(a) => ctx.ingest(a),
        Command::Stats(a) => ctx.stats(a),
        Command::Consensus(a) => ctx.consensus(a),
        Command::Agreement(a) => ctx.agreement(a),
        Command::Codebook(a) => ctx.codebook(a),
        Command::Classify(a) => ctx.classify(a),
        Command::Index(a) => ctx.index(a),
        Command::Search(a) => ctx.search(a),
        Command::Rerank(a) => ctx.rerank(a),
        Command::Filter(a) => ctx.filter(a),
        Command::Eval(a) => ctx.eval(a),
        Command::Pipeline(a) => ctx.pipeline(a),
    }
}

fn warn(msg: impl std::fmt::Display) {
    eprintln!("warning: {msg}");
}

fn pick(flag: &Option<PathBuf>, configured: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| configured.clone())
        .ok_or_else(|| anyhow!("no {what} given (use --{what} or set it in the config)"))
}

fn pick_or(flag: &Option<PathBuf>, configured: &Option<PathBuf>, default: &str) -> PathBuf {
    flag.clone()
        .or_else(|| configured.clone())
        .unwrap_or_else(|| PathBuf::from(default))
}

fn kappa_text(k: Kappa) -> String {
    match k {
        Kappa::Value(v) => format!("{v:.4}"),
        Kappa::Undefined => "undefined".to_string(),
    }
}

fn write_report(path: &Path, contents: &str) -> Result<()> {
    write_atomic(path, contents)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// Everything the retrieval commands need, loaded once.
struct Retrieval {
    taxonomy: Taxonomy,
    corpus: Corpus,
    index: InvertedIndex,
    store: LabelStore,
}

struct Ctx {
    cfg: RunConfig,
}

impl Ctx {
    fn out_dir(&self, flag: &Option<PathBuf>) -> PathBuf {
        flag.clone().unwrap_or_else(|| self.cfg.output_dir.clone())
    }

    fn load_taxonomy(&self, flag: &Option<PathBuf>) -> Result<Taxonomy> {
        let path = pick_or(flag, &self.cfg.paths.taxonomy, DEFAULT_TAXONOMY);
        Taxonomy::load(&path).with_context(|| format!("loading taxonomy {}", path.display()))
    }

    fn load_corpus(&self, flag: &Option<PathBuf>) -> Result<Corpus> {
        let path = pick(flag, &self.cfg.paths.corpus, "corpus")?;
        let report = Corpus::ingest(&path)?;
        for e in &report.rejected {
            warn(format!("{}: {e}", path.display()));
        }
        Ok(report.corpus)
    }

    fn load_labels(&self, flags: &[PathBuf], taxonomy: &Taxonomy) -> Result<LabelStore> {
        let paths = if flags.is_empty() {
            &self.cfg.paths.labels
        } else {
            flags
        };
        let mut store = LabelStore::default();
        for p in paths {
            store
                .merge_file(p, taxonomy)
                .with_context(|| format!("loading labels {}", p.display()))?;
        }
        Ok(store)
    }

    fn load_topics(&self, flag: &Option<PathBuf>) -> Result<Vec<Topic>> {
        let path = pick(flag, &self.cfg.paths.topics, "topics")?;
        load_topics(&path).with_context(|| format!("loading topics {}", path.display()))
    }

    fn load_annotations(&self, path: &Path, taxonomy: &Taxonomy) -> Result<AnnotationFile> {
        Ok(AnnotationFile::load(path, taxonomy)?)
    }

    fn apply(&mut self, o: &Overrides) -> Result<()> {
        o.apply(&mut self.cfg);
        self.cfg.validate()
    }

    fn retrieval(&self, args: &RetrievalArgs) -> Result<Retrieval> {
        let taxonomy = self.load_taxonomy(&args.taxonomy)?;
        let corpus = self.load_corpus(&args.corpus)?;
        let fields = IndexFields {
            include_linked_docs: self.cfg.retrieval.include_linked_docs,
        };
        let snapshot = args
            .index
            .clone()
            .or_else(|| self.cfg.paths.index.clone().filter(|p| p.exists()));
        let index = match snapshot {
            Some(p) => {
                let idx = InvertedIndex::load_snapshot(&p)
                    .with_context(|| format!("loading index {}", p.display()))?;
                if idx.n_docs() != corpus.len()
                    || idx.doc_ids().iter().any(|d| corpus.get(d).is_none())
                {
                    bail!("index {} was not built from this corpus", p.display());
                }
                if idx.fields() != fields {
                    warn(format!(
                        "index {} was built with include_linked_docs = {}",
                        p.display(),
                        idx.fields().include_linked_docs
                    ));
                }
                idx
            }
            None => {
                InvertedIndex::build(&corpus, Tokenizer::new(TokenizerConfig::default()), fields)
            }
        };
        let mut store = self.load_labels(&args.labels, &taxonomy)?;
        if args.heuristic {
            let path = pick_or(&args.rules, &self.cfg.paths.rules, DEFAULT_RULES);
            let classifier = HeuristicClassifier::load(&path, &taxonomy)?;
            let added = fill_heuristic_labels(&classifier, &corpus, &mut store);
            warn(format!(
                "experimental: {added} tweet labels filled by heuristic rules {}",
                classifier.version
            ));
        }
        Ok(Retrieval {
            taxonomy,
            corpus,
            index,
            store,
        })
    }

    fn load_policy(&self, flag: &Option<PathBuf>) -> Result<AlignmentPolicy> {
        let path = pick_or(flag, &self.cfg.paths.policy, DEFAULT_POLICY);
        AlignmentPolicy::load(&path).with_context(|| format!("loading policy {}", path.display()))
    }

    fn taxonomy(&mut self, action: TaxonomyAction) -> Result<()> {
        match action {
            TaxonomyAction::Validate { taxonomy } => {
                let t = self.load_taxonomy(&taxonomy)?;
                println!(
                    "taxonomy {}: {} categories / {} classes",
                    t.version,
                    t.categories().len(),
                    t.class_count()
                );
                for c in t.categories() {
                    println!("  {:<10} {:<40} {} classes", c.id, c.name, c.classes.len());
                }
                Ok(())
            }
            TaxonomyAction::Map {
                source,
                label,
                mappings,
            } => {
                let path = pick_or(&mappings, &self.cfg.paths.mappings, DEFAULT_MAPPINGS);
                let table = PriorMappings::load(&path)?;
                let source: PriorSource = source.parse()?;
                for c in table.map_prior(source, &label)? {
                    println!("{c}");
                }
                Ok(())
            }
        }
    }

    fn ingest(&mut self, a: IngestArgs) -> Result<()> {
        let path = pick(&a.corpus, &self.cfg.paths.corpus, "corpus")?;
        let report = Corpus::ingest(&path)?;
        for e in &report.rejected {
            warn(format!("{}: {e}", path.display()));
        }
        println!(
            "accepted {} records, rejected {} lines",
            report.corpus.len(),
            report.rejected.len()
        );
        if a.strict && !report.rejected.is_empty() {
            bail!("{} lines rejected", report.rejected.len());
        }
        let out = a
            .out
            .unwrap_or_else(|| self.out_dir(&a.out_dir).join("corpus.jsonl"));
        write_report(&out, &report.corpus.to_jsonl())
    }

    fn stats(&mut self, a: StatsArgs) -> Result<()> {
        let corpus = self.load_corpus(&a.corpus)?;
        let groups: Option<BTreeMap<String, IntentGroup>> = match (&a.labels, &a.annotations) {
            (Some(labels), _) => {
                let taxonomy = self.load_taxonomy(&a.taxonomy)?;
                let store = LabelStore::load(labels, &taxonomy)?;
                Some(
                    store
                        .tweet_labels
                        .iter()
                        .map(|(id, l)| (id.clone(), IntentGroup::from_label(l)))
                        .collect(),
                )
            }
            (None, Some(ann)) => {
                let taxonomy = self.load_taxonomy(&a.taxonomy)?;
                let file = self.load_annotations(ann, &taxonomy)?;
                let outcomes = classify_phase(file.phase(a.phase))?;
                Some(
                    outcomes
                        .iter()
                        .map(|(id, o)| (id.clone(), IntentGroup::from_outcome(o)))
                        .collect(),
                )
            }
            (None, None) => None,
        };
        let table = corpus_stats(&corpus, groups.as_ref())?;
        print!("{}", table.render());
        write_report(&self.out_dir(&a.out_dir).join("stats.tsv"), &table.to_tsv())
    }

    fn consensus(&mut self, a: ConsensusArgs) -> Result<()> {
        let taxonomy = self.load_taxonomy(&a.taxonomy)?;
        let file = self.load_annotations(&a.labels, &taxonomy)?;
        let outcomes = classify_phase(file.phase(a.phase))?;
        if outcomes.is_empty() {
            bail!("no {} items in {}", a.phase, a.labels.display());
        }
        let out_dir = self.out_dir(&a.out_dir);

        let mut tsv = String::from("item_id\toutcome\tlabel\tnc_un\n");
        let mut kinds: BTreeMap<&str, usize> = BTreeMap::new();
        for (id, o) in &outcomes {
            *kinds.entry(o.kind.name()).or_default() += 1;
            let label = o.label().map_or("-".to_string(), |l| l.to_string());
            let _ = writeln!(tsv, "{id}\t{}\t{label}\t{}", o.kind.name(), o.is_nc_un);
        }
        write_report(&out_dir.join("consensus.tsv"), &tsv)?;

        let dist = intention_distribution(&outcomes);
        let mut dtsv = String::from("label\tpercent\n");
        for (l, p) in &dist.by_label {
            let _ = writeln!(dtsv, "{l}\t{p:.1}");
        }
        let _ = writeln!(dtsv, "no_high_consensus\t{:.1}", dist.no_high_consensus);
        let _ = writeln!(dtsv, "nc_un\t{:.1}", dist.nc_un);
        write_report(&out_dir.join("distribution.tsv"), &dtsv)?;

        println!("{} items ({})", outcomes.len(), a.phase);
        for (k, n) in &kinds {
            println!("  {k:<20} {n}");
        }
        println!("high-consensus intentions (% of items):");
        for (l, p) in &dist.by_label {
            println!("  {:<40} {p:>5.1}", l.to_string());
        }
        println!(
            "  {:<40} {:>5.1}",
            "no high consensus", dist.no_high_consensus
        );
        println!("  {:<40} {:>5.1}", "NC-UN", dist.nc_un);
        let nc_un: Vec<&str> = outcomes
            .iter()
            .filter(|(_, o)| o.is_nc_un)
            .map(|(id, _)| id.as_str())
            .collect();
        println!(
            "NC-UN items: {}",
            if nc_un.is_empty() {
                "none".to_string()
            } else {
                nc_un.join(", ")
            }
        );

        if let Some(phase) = a.compare {
            let after: BTreeMap<String, ConsensusOutcome> = classify_phase(file.phase(phase))?
                .into_iter()
                .filter(|(id, _)| outcomes.contains_key(id))
                .collect();
            let before: BTreeMap<String, ConsensusOutcome> = outcomes
                .into_iter()
                .filter(|(id, _)| after.contains_key(id))
                .collect();
            let delta = agreement_delta(&before, &after)?;
            println!(
                "{} -> {}: {} of {} NC-UN items gained a majority ({:.1}%) over {} shared items",
                a.phase,
                phase,
                delta.gained_majority,
                delta.nc_un_before,
                delta.gain_pct,
                delta.n_items
            );
            let mut t = String::from("item_id\tbefore\tafter\tgained_majority\n");
            for tr in &delta.transitions {
                let _ = writeln!(
                    t,
                    "{}\t{}\t{}\t{}",
                    tr.item_id,
                    tr.before.kind.name(),
                    tr.after.kind.name(),
                    tr.gained_majority()
                );
            }
            write_report(&out_dir.join("delta.tsv"), &t)?;
        }
        Ok(())
    }

    fn agreement(&mut self, a: AgreementArgs) -> Result<()> {
        let taxonomy = self.load_taxonomy(&a.taxonomy)?;
        let file = self.load_annotations(&a.labels, &taxonomy)?;
        let report = agreement_report(file.phase(a.phase))?;
        let mut tsv = String::from("metric\tvalue\n");
        println!(
            "Fleiss' kappa ({}): {} [{}]",
            a.phase,
            kappa_text(report.fleiss_kappa),
            report.interpretation_band
        );
        println!(
            "  {} items, {} raters per item, {} labels observed",
            report.n_items, report.n_raters, report.n_categories
        );
        let _ = writeln!(tsv, "fleiss_kappa\t{}", kappa_text(report.fleiss_kappa));
        let _ = writeln!(tsv, "band\t{}", report.interpretation_band);
        let _ = writeln!(tsv, "items\t{}", report.n_items);
        let _ = writeln!(tsv, "raters\t{}", report.n_raters);
        let _ = writeln!(tsv, "labels\t{}", report.n_categories);

        match classify_phase(file.phase(a.phase)) {
            Ok(outcomes) => {
                let mut kinds: BTreeMap<&str, usize> = BTreeMap::new();
                for o in outcomes.values() {
                    *kinds.entry(o.kind.name()).or_default() += 1;
                }
                println!("  outcome histogram:");
                for (k, n) in &kinds {
                    println!("    {k:<20} {n}");
                    let _ = writeln!(tsv, "{k}\t{n}");
                }
            }
            Err(e) => warn(format!("no outcome histogram: {e}")),
        }

        if let Some(pair) = &a.cohen {
            let (ra, rb) = (&pair[0], &pair[1]);
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for set in file.phase(a.phase) {
                let find = |r: &str| set.labels.iter().find(|(id, _)| id == r).map(|(_, l)| l);
                if let (Some(x), Some(y)) = (find(ra), find(rb)) {
                    xs.push(x.clone());
                    ys.push(y.clone());
                }
            }
            let k = cohens_kappa(&xs, &ys)?;
            println!(
                "Cohen's kappa {ra} vs {rb}: {} [{}] over {} items",
                kappa_text(k),
                interpretation_band(k),
                xs.len()
            );
            let _ = writeln!(tsv, "cohen_kappa\t{}", kappa_text(k));
        }
        write_report(&self.out_dir(&a.out_dir).join("agreement.tsv"), &tsv)
    }

    fn codebook(&mut self, a: CodebookArgs) -> Result<()> {
        let out_dir = self.out_dir(&a.out_dir);
        if let Some(codes) = &a.codes {
            let codes = load_codes(codes)?;
            let d = dedupe_exact(&codes);
            println!(
                "{} codes, {} after removing exact duplicates",
                codes.len(),
                d.kept.len()
            );
            let mut t = String::from("code_id\tkept_as\n");
            for (c, k) in &d.remap {
                let _ = writeln!(t, "{c}\t{k}");
            }
            write_report(&out_dir.join("codebook_dedupe.tsv"), &t)?;
        }
        let groupings = load_groupings(&a.groupings)?;
        let threshold = a
            .threshold
            .map_or(Threshold::StrictMajority, Threshold::AtLeast);
        let merged = consensus_merge(&groupings, threshold)?;
        let groups = consensus_grouping(&groupings, threshold)?;
        println!(
            "{} workers; identity merge kept {} classes ({} codes merged away)",
            groupings.len(),
            merged.classes.len(),
            merged.discarded
        );
        println!("{} consensus groups:", groups.len());
        let join = |s: &std::collections::BTreeSet<u32>| {
            s.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
        };
        let mut t = String::from("group\tname\tcodes\n");
        for (i, g) in groups.iter().enumerate() {
            println!("  {:>3} {:<30} {}", i + 1, g.name, join(&g.codes));
            let _ = writeln!(t, "{}\t{}\t{}", i + 1, g.name, join(&g.codes));
        }
        write_report(&out_dir.join("codebook_groups.tsv"), &t)?;
        let mut m = String::from("class\tcodes\n");
        for (i, c) in merged.classes.iter().enumerate() {
            let _ = writeln!(m, "{}\t{}", i + 1, join(c));
        }
        write_report(&out_dir.join("codebook_merge.tsv"), &m)
    }

    fn classify(&mut self, a: ClassifyArgs) -> Result<()> {
        let taxonomy = self.load_taxonomy(&a.taxonomy)?;
        let corpus = self.load_corpus(&a.corpus)?;
        let path = pick_or(&a.rules, &self.cfg.paths.rules, DEFAULT_RULES);
        let classifier = HeuristicClassifier::load(&path, &taxonomy)?;
        warn(format!(
            "experimental heuristic labels (rules {}); not a substitute for gold labels",
            classifier.version
        ));
        let mut labels = String::new();
        let mut report = String::from("tweet_id\tlabel\tconfidence\n");
        let (mut labeled, mut uncertain) = (0, 0);
        for r in corpus.records().iter().filter(|r| r.has_urls()) {
            let (label, conf) = classifier.classify(r);
            let _ = writeln!(report, "{}\t{label}\t{conf:.4}", r.id);
            if label.is_uncertain() || conf < a.min_confidence {
                uncertain += 1;
            } else {
                labeled += 1;
                let _ = writeln!(labels, "{}\t{label}", r.id);
            }
        }
        println!("{labeled} tweets labeled, {uncertain} left unlabeled");
        let out_dir = self.out_dir(&a.out_dir);
        write_report(&out_dir.join("heuristic_labels.tsv"), &labels)?;
        write_report(&out_dir.join("heuristic_report.tsv"), &report)
    }

    fn index(&mut self, a: IndexArgs) -> Result<()> {
        if a.include_linked_docs {
            self.cfg.retrieval.include_linked_docs = true;
        }
        let corpus = self.load_corpus(&a.corpus)?;
        let index = InvertedIndex::build(
            &corpus,
            Tokenizer::new(TokenizerConfig::default()),
            IndexFields {
                include_linked_docs: self.cfg.retrieval.include_linked_docs,
            },
        );
        println!(
            "indexed {} documents, {} terms, average length {:.2}",
            index.n_docs(),
            index.terms().count(),
            index.avg_doc_len()
        );
        let out = a
            .out
            .or_else(|| self.cfg.paths.index.clone())
            .unwrap_or_else(|| self.out_dir(&a.out_dir).join("index.json"));
        write_report(&out, &index.to_snapshot_string())
    }

    fn search(&mut self, a: SearchArgs) -> Result<()> {
        self.apply(&a.retrieval.overrides())?;
        let r = self.retrieval(&a.retrieval)?;
        let (params, k) = (self.cfg.bm25, self.cfg.retrieval.k);
        if let Some(q) = &a.query {
            let list = r.index.search(&params, &r.index.tokenize_query(q), k);
            for (i, e) in list.entries.iter().enumerate() {
                println!("{}\t{}\t{:.6}", i + 1, e.doc_id, e.score);
            }
            return Ok(());
        }
        let topics = self.load_topics(&a.retrieval.topics)?;
        let run = search_topics(&r.index, &params, &topics, k);
        let out = a
            .out
            .unwrap_or_else(|| self.cfg.output_dir.join("baseline.run"));
        println!("{} topics, top {k}", topics.len());
        write_report(&out, &run.to_trec_string(BASELINE_TAG))
    }

    fn rerank(&mut self, a: StageArgs) -> Result<()> {
        self.apply(&a.retrieval.overrides())?;
        let r = self.retrieval(&a.retrieval)?;
        let topics = self.load_topics(&a.retrieval.topics)?;
        let input = a
            .run
            .unwrap_or_else(|| self.cfg.output_dir.join("baseline.run"));
        let baseline =
            RunFile::load(&input).with_context(|| format!("reading run {}", input.display()))?;
        let reranker = Reranker {
            taxonomy: &r.taxonomy,
            index: &r.index,
            corpus: &r.corpus,
            params: self.cfg.bm25,
            options: self.cfg.rerank,
        };
        let (run, report) = rerank_topics(&reranker, &topics, &baseline, &r.store)?;
        report_rerank(&report);
        let out = a
            .out
            .unwrap_or_else(|| self.cfg.output_dir.join("intent.run"));
        write_report(&out, &run.to_trec_string(INTENT_TAG))
    }

    fn filter(&mut self, a: FilterArgs) -> Result<()> {
        let stage = a.stage;
        self.apply(&stage.retrieval.overrides())?;
        let taxonomy = self.load_taxonomy(&stage.retrieval.taxonomy)?;
        let store = self.load_labels(&stage.retrieval.labels, &taxonomy)?;
        let topics = self.load_topics(&stage.retrieval.topics)?;
        let mut policy = self.load_policy(&stage.retrieval.policy)?;
        if let Some(p) = a.demote {
            if !(0.0..=1.0).contains(&p) {
                bail!("demote penalty must be in [0, 1]");
            }
            policy = policy.with_action(PolicyAction::Demote(p));
        }
        let input = stage
            .run
            .unwrap_or_else(|| self.cfg.output_dir.join("intent.run"));
        let run =
            RunFile::load(&input).with_context(|| format!("reading run {}", input.display()))?;
        let (filtered, dropped) = filter_topics(&policy, &topics, &run, &store);
        println!("{dropped} misaligned results dropped");
        let out = stage
            .out
            .unwrap_or_else(|| self.cfg.output_dir.join("filtered.run"));
        let tag = a.tag.unwrap_or_else(|| "filtered".to_string());
        write_report(&out, &filtered.to_trec_string(&tag))
    }

    fn eval(&mut self, a: EvalArgs) -> Result<()> {
        if let Some(g) = a.gain {
            self.cfg.eval.gain = g;
        }
        if let Some(c) = a.cutoff {
            self.cfg.eval.cutoff = c;
        }
        self.cfg.validate()?;
        let qrels_path = pick(&a.qrels, &self.cfg.paths.qrels, "qrels")?;
        let qrels = Qrels::load(&qrels_path)
            .with_context(|| format!("reading qrels {}", qrels_path.display()))?;
        let mut runs = Vec::with_capacity(a.runs.len());
        for (name, path) in &a.runs {
            let run =
                RunFile::load(path).with_context(|| format!("reading run {}", path.display()))?;
            runs.push((name.clone(), run));
        }
        self.write_comparison(&qrels, &runs, &self.out_dir(&a.out_dir))
    }

    fn write_comparison(
        &self,
        qrels: &Qrels,
        runs: &[(String, RunFile)],
        out_dir: &Path,
    ) -> Result<()> {
        let cmp = evaluate_runs(
            runs,
            qrels,
            EvalOptions {
                cutoff: self.cfg.eval.cutoff,
                gain: self.cfg.eval.gain,
            },
        );
        print!("{}", cmp.render());
        write_report(&out_dir.join("comparison.txt"), &cmp.render())?;
        write_report(&out_dir.join("comparison.tsv"), &cmp.to_tsv())?;
        write_report(&out_dir.join("per_topic.tsv"), &cmp.per_topic_tsv())
    }

    fn pipeline(&mut self, a: PipelineArgs) -> Result<()> {
        let mut o = a.retrieval.overrides();
        o.gain = a.gain;
        self.apply(&o)?;
        let r = self.retrieval(&a.retrieval)?;
        let topics = self.load_topics(&a.retrieval.topics)?;
        let policy = self.load_policy(&a.retrieval.policy)?;
        let qrels_path = pick(&a.qrels, &self.cfg.paths.qrels, "qrels")?;
        let qrels = Qrels::load(&qrels_path)
            .with_context(|| format!("reading qrels {}", qrels_path.display()))?;
        let out_dir = self.cfg.output_dir.clone();

        let baseline = search_topics(&r.index, &self.cfg.bm25, &topics, self.cfg.retrieval.k);
        let reranker = Reranker {
            taxonomy: &r.taxonomy,
            index: &r.index,
            corpus: &r.corpus,
            params: self.cfg.bm25,
            options: self.cfg.rerank,
        };
        let (intent, report) = rerank_topics(&reranker, &topics, &baseline, &r.store)?;
        report_rerank(&report);
        let (baseline_filtered, dropped_b) = filter_topics(&policy, &topics, &baseline, &r.store);
        let (intent_filtered, dropped_i) = filter_topics(&policy, &topics, &intent, &r.store);
        println!(
            "{} topics, top {}; filtering dropped {dropped_b} baseline and {dropped_i} reranked results",
            topics.len(),
            self.cfg.retrieval.k
        );

        let runs = [
            ("baseline.run", BASELINE_TAG, baseline),
            (
                "baseline_filtered.run",
                BASELINE_FILTERED_TAG,
                baseline_filtered,
            ),
            ("intent.run", INTENT_TAG, intent),
            ("intent_filtered.run", INTENT_FILTERED_TAG, intent_filtered),
        ];
        for (file, tag, run) in &runs {
            write_report(&out_dir.join(file), &run.to_trec_string(tag))?;
        }
        let named: Vec<(String, RunFile)> = runs
            .into_iter()
            .map(|(_, tag, run)| (tag.to_string(), run))
            .collect();
        self.write_comparison(&qrels, &named, &out_dir)
    }
}

fn report_rerank(report: &crate::pipeline::RerankReport) {
    if !report.topics_without_label.is_empty() {
        warn(format!(
            "topics without a query label kept baseline order: {}",
            report.topics_without_label.join(", ")
        ));
    }
    if report.unlabeled_candidates > 0 {
        warn(format!(
            "{} candidates with links had no intent label and were scored unaugmented",
            report.unlabeled_candidates
        ));
    }
}
