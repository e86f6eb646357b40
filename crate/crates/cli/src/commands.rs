//! Subcommand implementations. Each stage reads its inputs from the
//! artifact store and writes exactly one primary artifact.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicBool, Ordering};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tabtext_core::corpus::{Corpus, Passage, Question, Table};
use tabtext_core::extractor::ExtractorTraining;
use tabtext_core::metrics::{evaluate, hits_curve, Prediction, Report};
use tabtext_core::open_domain::{
    build_passage_index, build_table_index, link_table, retrieve_tables, TableIndex,
};
use tabtext_core::pipeline::{self, dedup_toggles, Mapper, Scorer, Toggles};
use tabtext_core::reranker::{RerankWeights, TuneOutcome};
use tabtext_core::row_retriever::{rank_rows, RowScorerModel};
use tabtext_core::supervision::{AmbiguityStats, SupervisionBag};
use tabtext_core::synth::{generate, SynthConfig};

use crate::artifact::{Kind, Store};
use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::io::{read_jsonl, write_json, write_jsonl, write_text};
use crate::table::{fmt_opt, render};

static QUIET: AtomicBool = AtomicBool::new(false);

/// Silences progress output on stdout. Errors still go to stderr.
pub fn set_quiet(on: bool) {
    QUIET.store(on, Ordering::Relaxed);
}

macro_rules! say {
    ($($t:tt)*) => {
        if !QUIET.load(Ordering::Relaxed) {
            print!($($t)*);
        }
    };
}

macro_rules! sayln {
    ($($t:tt)*) => {
        if !QUIET.load(Ordering::Relaxed) {
            println!($($t)*);
        }
    };
}

/// Runs per-question work on the current rayon pool, keeping order.
#[derive(Debug, Clone, Copy, Default)]
pub struct RayonMapper;

impl Mapper for RayonMapper {
    fn map<R: Send>(&self, n: usize, f: &(dyn Fn(usize) -> R + Sync)) -> Vec<R> {
        (0..n).into_par_iter().map(f).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusPayload {
    pub tables: Vec<Table>,
    pub passages: Vec<Passage>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct QuestionSets {
    pub train: Vec<Question>,
    pub dev: Vec<Question>,
    pub test: Vec<Question>,
}

impl QuestionSets {
    fn splits(&self) -> [(&'static str, &[Question]); 3] {
        [("train", &self.train), ("dev", &self.dev), ("test", &self.test)]
    }

    fn splits_mut(&mut self) -> [&mut Vec<Question>; 3] {
        [&mut self.train, &mut self.dev, &mut self.test]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BagsPayload {
    pub train: Vec<SupervisionBag>,
    pub dev: Vec<SupervisionBag>,
    pub test: Vec<SupervisionBag>,
    pub train_stats: AmbiguityStats,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RerankerPayload {
    pub weights: RerankWeights,
    pub tuned: Option<TuneOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitHits {
    pub split: String,
    pub questions: usize,
    pub hits: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrievedTables {
    pub question_id: String,
    pub tables: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrievalPayload {
    pub k: usize,
    pub results: Vec<RetrievedTables>,
    pub hits: Vec<SplitHits>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatsOutput {
    pub questions: usize,
    pub answerable: usize,
    pub bag_sizes: BTreeMap<usize, usize>,
    pub bag_size_percent: BTreeMap<usize, f64>,
    pub multi_row_percent: f64,
    pub multi_span_percent: f64,
    pub multi_span_selector: String,
    pub budget: usize,
    pub mean_context_tokens: f64,
    pub over_budget_percent: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalOutput {
    pub report: Report,
    pub retrieval_hits: Option<Vec<SplitHits>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationEntry {
    pub toggles: String,
    pub report: Report,
}

pub const HITS_KS: [usize; 3] = [1, 5, 10];

pub struct Ctx {
    pub cfg: Config,
    pub store: Store,
}

impl Ctx {
    pub fn new(cfg: Config, force: bool) -> Self {
        let store = Store {
            dir: cfg.out_dir.clone(),
            config_hash: cfg.hash(),
            force,
        };
        Ctx { cfg, store }
    }

    fn corpus(&self) -> CliResult<Corpus> {
        let p: CorpusPayload = self.store.load(Kind::Corpus)?;
        Ok(Corpus::new(p.tables, p.passages)?)
    }

    fn raw_questions(&self) -> CliResult<QuestionSets> {
        self.store.load(Kind::Questions)
    }

    /// Questions with table ids resolved. Missing ids come from the top
    /// retrieved table; in open-domain mode dev and test always do, so only
    /// training sees gold tables.
    fn questions(&self) -> CliResult<QuestionSets> {
        let mut qs = self.raw_questions()?;
        let od = self.cfg.open_domain;
        let needs = od || qs.splits().iter().any(|(_, q)| q.iter().any(|q| q.table_id.is_none()));
        if !needs {
            return Ok(qs);
        }
        let r: RetrievalPayload = self.store.load(Kind::Retrieval)?;
        let top: BTreeMap<&str, &str> = r
            .results
            .iter()
            .filter_map(|x| x.tables.first().map(|t| (x.question_id.as_str(), t.0.as_str())))
            .collect();
        for (i, split) in qs.splits_mut().into_iter().enumerate() {
            let replace_all = od && i > 0;
            for q in split.iter_mut().filter(|q| replace_all || q.table_id.is_none()) {
                q.table_id = top.get(q.id.as_str()).map(|t| t.to_string());
            }
        }
        Ok(qs)
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

/// Reads and validates the configured corpus and question files.
pub fn read_inputs(cfg: &Config) -> CliResult<(Corpus, QuestionSets)> {
    let tables: Vec<Table> = read_jsonl(&cfg.tables)?;
    let passages: Vec<Passage> = read_jsonl(&cfg.passages)?;
    let corpus = Corpus::new(tables, passages)?;
    let mut qs = QuestionSets::default();
    let paths = [&cfg.train, &cfg.dev, &cfg.test];
    for (split, path) in qs.splits_mut().into_iter().zip(paths) {
        *split = read_jsonl(path)?;
    }
    let mut seen = BTreeSet::new();
    for (name, split) in qs.splits() {
        for q in split {
            if !seen.insert(q.id.clone()) {
                return Err(data_err(format!("{name}: duplicate question id {}", q.id)));
            }
            if let Some(t) = &q.table_id {
                if corpus.table(t).is_none() {
                    return Err(data_err(format!("{name}: question {} names unknown table {t}", q.id)));
                }
            }
        }
    }
    for q in &qs.train {
        if q.answer_text.is_none() {
            return Err(tabtext_core::Error::MissingAnswer(q.id.clone()).into());
        }
    }
    Ok((corpus, qs))
}

pub fn ingest(ctx: &Ctx) -> CliResult<()> {
    let (corpus, qs) = read_inputs(&ctx.cfg)?;
    let (tables, passages) = corpus.into_parts();
    sayln!(
        "ingested {} tables, {} passages, {}/{}/{} train/dev/test questions",
        tables.len(),
        passages.len(),
        qs.train.len(),
        qs.dev.len(),
        qs.test.len()
    );
    ctx.store.save(Kind::Corpus, &CorpusPayload { tables, passages })?;
    ctx.store.save(Kind::Questions, &qs)?;
    Ok(())
}

pub fn stats(ctx: &Ctx, mapper: &RayonMapper) -> CliResult<()> {
    let corpus = ctx.corpus()?;
    let qs = ctx.questions()?;
    let train: Vec<Question> = qs.train.iter().filter(|q| q.table_id.is_some()).cloned().collect();
    let bags = pipeline::supervise(&corpus, &train, mapper)?;
    let model: Option<RowScorerModel> = ctx.store.load_optional(Kind::RowModel)?;
    let scorer = Scorer::for_toggles(&corpus, ctx.cfg.toggles());
    let pcfg = ctx.cfg.pipeline();
    let builder = pipeline::builder(&corpus, &scorer, &pcfg);

    // The row whose context and span count we report: the retriever's
    // top positive row when a model exists, else the first positive row.
    let selected: Vec<Option<usize>> = mapper.map(bags.len(), &|i| {
        let bag = &bags[i];
        let first = bag.positive_rows.iter().next().copied()?;
        let Some(m) = &model else { return Some(first) };
        let table = corpus.table(&bag.table_id)?;
        let scores = m.score_rows(&builder, &train[i], table);
        rank_rows(&scores, scores.len())
            .into_iter()
            .map(|(r, _)| r)
            .find(|r| bag.contains(*r))
            .or(Some(first))
    });
    let lengths: Vec<usize> = mapper
        .map(bags.len(), &|i| {
            let table = corpus.table(&bags[i].table_id)?;
            selected[i].map(|r| builder.full_extraction_sequence(table, r).len())
        })
        .into_iter()
        .flatten()
        .collect();
    let sel_map: BTreeMap<&str, usize> = bags
        .iter()
        .zip(&selected)
        .filter_map(|(b, s)| s.map(|s| (b.question_id.as_str(), s)))
        .collect();
    let st = AmbiguityStats::compute(&bags, |b| sel_map.get(b.question_id.as_str()).copied());
    let n = lengths.len().max(1) as f64;
    let budget = ctx.cfg.budget;
    let out = StatsOutput {
        questions: st.total,
        answerable: st.answerable,
        bag_size_percent: st.percentages(),
        multi_row_percent: st.multi_row_rate(),
        multi_span_percent: st.multi_span_rate(),
        bag_sizes: st.row_counts.clone(),
        multi_span_selector: if model.is_some() { "retriever" } else { "first-positive-row" }.into(),
        budget,
        mean_context_tokens: lengths.iter().sum::<usize>() as f64 / n,
        over_budget_percent: 100.0 * lengths.iter().filter(|&&l| l > budget).count() as f64 / n,
    };
    let rows: Vec<Vec<String>> = out
        .bag_sizes
        .iter()
        .map(|(k, c)| vec![k.to_string(), c.to_string(), format!("{:.2}", out.bag_size_percent[k])])
        .collect();
    let mut text = render(&["rows in bag", "questions", "percent"], &rows);
    text.push_str(&format!(
        "\nquestions {}  answerable {}\nmulti-row {:.2}%  multi-span {:.2}% ({})\nmean context {:.1} tokens, {:.2}% over {}\n",
        out.questions,
        out.answerable,
        out.multi_row_percent,
        out.multi_span_percent,
        out.multi_span_selector,
        out.mean_context_tokens,
        out.over_budget_percent,
        budget
    ));
    say!("{text}");
    sayln!("{}", serde_json::to_string(&out).map_err(data_err)?);
    ctx.store.save(Kind::Stats, &out)?;
    Ok(())
}

pub fn index_tables(ctx: &Ctx) -> CliResult<()> {
    let corpus = ctx.corpus()?;
    let index = build_table_index(corpus.tables(), ctx.cfg.bm25());
    sayln!("indexed {} tables, {} terms", index.bm25.len(), index.bm25.postings.len());
    ctx.store.save(Kind::TableIndex, &index)?;
    Ok(())
}

pub fn retrieve(ctx: &Ctx, mapper: &RayonMapper) -> CliResult<()> {
    let index: TableIndex = ctx.store.load(Kind::TableIndex)?;
    let qs = ctx.raw_questions()?;
    let k = ctx.cfg.retrieve_k.max(*HITS_KS.iter().max().unwrap_or(&1));
    let mut results = Vec::new();
    let mut hits = Vec::new();
    for (name, split) in qs.splits() {
        let ranked: Vec<Vec<(String, f64)>> = mapper.map(split.len(), &|i| retrieve_tables(&split[i].text, &index, k));
        let (with_gold, gold): (Vec<Vec<String>>, Vec<String>) = split
            .iter()
            .zip(&ranked)
            .filter_map(|(q, r)| q.table_id.clone().map(|g| (r.iter().map(|t| t.0.clone()).collect(), g)))
            .unzip();
        if !gold.is_empty() {
            hits.push(SplitHits {
                split: name.into(),
                questions: gold.len(),
                hits: hits_curve(&with_gold, &gold, &HITS_KS),
            });
        }
        results.extend(split.iter().zip(ranked).map(|(q, tables)| RetrievedTables {
            question_id: q.id.clone(),
            tables,
        }));
    }
    say!("{}", hits_table(&hits));
    ctx.store.save(Kind::Retrieval, &RetrievalPayload { k, results, hits })?;
    Ok(())
}

fn hits_table(hits: &[SplitHits]) -> String {
    let headers: Vec<String> = std::iter::once("split".to_string())
        .chain(std::iter::once("questions".to_string()))
        .chain(HITS_KS.iter().map(|k| format!("HITS@{k}")))
        .collect();
    let rows: Vec<Vec<String>> = hits
        .iter()
        .map(|h| {
            let mut r = vec![h.split.clone(), h.questions.to_string()];
            r.extend(h.hits.iter().map(|(_, v)| format!("{v:.2}")));
            r
        })
        .collect();
    render(&headers.iter().map(String::as_str).collect::<Vec<_>>(), &rows)
}

pub fn link(ctx: &Ctx, mapper: &RayonMapper) -> CliResult<()> {
    let corpus = ctx.corpus()?;
    let index = build_passage_index(corpus.passages(), ctx.cfg.bm25());
    let n = ctx.cfg.links_per_cell;
    let tables: Vec<Table> = mapper.map(corpus.tables().len(), &|i| link_table(&corpus.tables()[i], &index, n, None));
    let links: usize = tables
        .iter()
        .flat_map(|t| t.rows.iter().flatten())
        .map(|c| c.links.len())
        .sum();
    sayln!("linked {} tables with {links} cell links", tables.len());
    let (_, passages) = corpus.into_parts();
    ctx.store.save(Kind::PassageIndex, &index)?;
    ctx.store.save(Kind::Corpus, &CorpusPayload { tables, passages })?;
    Ok(())
}

fn answered(questions: &[Question]) -> Vec<Question> {
    questions
        .iter()
        .filter(|q| q.answer_text.is_some() && q.table_id.is_some())
        .cloned()
        .collect()
}

pub fn supervise(ctx: &Ctx, mapper: &RayonMapper) -> CliResult<()> {
    let corpus = ctx.corpus()?;
    let qs = ctx.questions()?;
    let train = pipeline::supervise(&corpus, &answered(&qs.train), mapper)?;
    let dev = pipeline::supervise(&corpus, &answered(&qs.dev), mapper)?;
    let test = pipeline::supervise(&corpus, &answered(&qs.test), mapper)?;
    let train_stats = tabtext_core::supervision::ambiguity_stats(&train);
    sayln!(
        "supervised {} train questions: {} answerable, {:.2}% multi-row",
        train_stats.total,
        train_stats.answerable,
        train_stats.multi_row_rate()
    );
    ctx.store.save(
        Kind::Bags,
        &BagsPayload {
            train,
            dev,
            test,
            train_stats,
        },
    )?;
    Ok(())
}

pub fn train_rr(ctx: &Ctx, mapper: &RayonMapper) -> CliResult<()> {
    let corpus = ctx.corpus()?;
    let qs = ctx.questions()?;
    let bags: BagsPayload = ctx.store.load(Kind::Bags)?;
    let pcfg = ctx.cfg.pipeline();
    let scorer = Scorer::for_toggles(&corpus, pcfg.toggles);
    let b = pipeline::builder(&corpus, &scorer, &pcfg);
    let rows = pipeline::row_instances(&b, &qs.train, &bags.train, mapper)?;
    let model = pipeline::train_rows(&rows, &pcfg)?;
    sayln!(
        "trained row retriever on {} bags ({:?} loss)",
        rows.iter().filter(|r| r.bag.is_answerable()).count(),
        pcfg.row_config().loss
    );
    ctx.store.save(Kind::RowModel, &model)?;
    Ok(())
}

pub fn train_ae(ctx: &Ctx, mapper: &RayonMapper) -> CliResult<()> {
    let corpus = ctx.corpus()?;
    let qs = ctx.questions()?;
    let bags: BagsPayload = ctx.store.load(Kind::Bags)?;
    let model: RowScorerModel = ctx.store.load(Kind::RowModel)?;
    let pcfg = ctx.cfg.pipeline();
    let scorer = Scorer::for_toggles(&corpus, pcfg.toggles);
    let b = pipeline::builder(&corpus, &scorer, &pcfg);
    let rows = pipeline::row_instances(&b, &qs.train, &bags.train, mapper)?;
    let ext = pipeline::extraction_instances(&b, &qs.train, &rows, &model, &pcfg, mapper)?;
    let trained = pipeline::train_extractor(&ext, &pcfg)?;
    sayln!(
        "trained answer extractor on {} instances ({} single-span, {} multi-span)",
        ext.len(),
        trained.report.single_span,
        trained.report.multi_span
    );
    ctx.store.save(Kind::Extractor, &trained)?;
    Ok(())
}

pub fn tune_reranker(ctx: &Ctx, mapper: &RayonMapper) -> CliResult<()> {
    let pcfg = ctx.cfg.pipeline();
    let payload = if pcfg.toggles.rsr {
        let corpus = ctx.corpus()?;
        let qs = ctx.questions()?;
        let rr: RowScorerModel = ctx.store.load(Kind::RowModel)?;
        let ae: ExtractorTraining = ctx.store.load(Kind::Extractor)?;
        let scorer = Scorer::for_toggles(&corpus, pcfg.toggles);
        let b = pipeline::builder(&corpus, &scorer, &pcfg);
        let dev = answered(&qs.dev);
        let cands = pipeline::candidates(&b, &dev, &rr, &ae.model, &pcfg, mapper)?;
        let tuned = pipeline::tune(&dev, &cands, &pcfg)?;
        RerankerPayload {
            weights: pipeline::weights_for(tuned.as_ref()),
            tuned,
        }
    } else {
        RerankerPayload {
            weights: RerankWeights::top1(),
            tuned: None,
        }
    };
    let w = payload.weights;
    match &payload.tuned {
        Some(t) => sayln!(
            "reranker weights ({:.2}, {:.2}, {:.2}) with K={} K'={}: dev EM {:.2} F1 {:.2}",
            w.w[0],
            w.w[1],
            w.w[2],
            w.k,
            w.k_prime,
            100.0 * t.best.em,
            100.0 * t.best.f1
        ),
        None => sayln!("reranker disabled: top row, top span"),
    }
    ctx.store.save(Kind::Reranker, &payload)?;
    Ok(())
}

pub fn predict(ctx: &Ctx, mapper: &RayonMapper) -> CliResult<()> {
    let corpus = ctx.corpus()?;
    let qs = ctx.questions()?;
    let rr: RowScorerModel = ctx.store.load(Kind::RowModel)?;
    let ae: ExtractorTraining = ctx.store.load(Kind::Extractor)?;
    let rk: RerankerPayload = ctx.store.load(Kind::Reranker)?;
    let pcfg = ctx.cfg.pipeline();
    let scorer = Scorer::for_toggles(&corpus, pcfg.toggles);
    let b = pipeline::builder(&corpus, &scorer, &pcfg);
    let test: Vec<Question> = qs.test.iter().filter(|q| q.table_id.is_some()).cloned().collect();
    if test.len() < qs.test.len() {
        log::warn!("{} test questions have no table and were skipped", qs.test.len() - test.len());
    }
    let cands = pipeline::candidates(&b, &test, &rr, &ae.model, &pcfg, mapper)?;
    let preds = pipeline::predict(&cands, &rk.weights);
    sayln!("predicted {} answers", preds.len());
    ctx.store.save(Kind::Predictions, &preds)?;
    Ok(())
}

pub fn eval(ctx: &Ctx) -> CliResult<()> {
    let qs = ctx.questions()?;
    let preds: Vec<Prediction> = ctx.store.load(Kind::Predictions)?;
    let bags: BagsPayload = ctx.store.load(Kind::Bags)?;
    let gold = answered(&qs.test);
    let bag_map: BTreeMap<String, BTreeSet<usize>> = bags
        .test
        .into_iter()
        .map(|b| (b.question_id, b.positive_rows))
        .collect();
    let preds: Vec<Prediction> = preds
        .into_iter()
        .filter(|p| gold.iter().any(|q| q.id == p.question_id))
        .collect();
    let report = evaluate(&preds, &gold, Some(&bag_map))?;
    let retrieval: Option<RetrievalPayload> = ctx.store.load_optional(Kind::Retrieval)?;
    let out = EvalOutput {
        report,
        retrieval_hits: retrieval.map(|r| r.hits),
    };
    let text = report_text(&out);
    say!("{text}");
    ctx.store.save(Kind::Report, &out)?;
    write_text(&ctx.store.dir.join("report.txt"), &text)?;
    Ok(())
}

pub fn report_text(out: &EvalOutput) -> String {
    let r = &out.report;
    let bucket = |name: &str, b: Option<&tabtext_core::metrics::Bucket>| {
        vec![
            name.to_string(),
            b.map_or("0".into(), |b| b.count.to_string()),
            fmt_opt(b.map(|b| b.em)),
            fmt_opt(b.map(|b| b.f1)),
        ]
    };
    let rows = vec![
        bucket("Table", r.table.as_ref()),
        bucket("Passage", r.passage.as_ref()),
        bucket("Total", Some(&r.total)),
    ];
    let mut text = render(&["bucket", "questions", "EM", "F1"], &rows);
    text.push_str(&format!(
        "unanswered {}  row accuracy {}\n",
        r.unanswered,
        fmt_opt(r.row_accuracy)
    ));
    if let Some(h) = &out.retrieval_hits {
        text.push('\n');
        text.push_str(&hits_table(h));
    }
    text
}

pub fn ablate(cfg: &Config, requested: &[String], mapper: &RayonMapper) -> CliResult<()> {
    let names: Vec<String> = if requested.is_empty() {
        cfg.ablate.clone()
    } else {
        requested.to_vec()
    };
    let sets = names
        .iter()
        .map(|n| Toggles::parse(n).map_err(|e| CliError::Usage(e.to_string())))
        .collect::<CliResult<Vec<_>>>()?;
    let (kept, dropped) = dedup_toggles(&sets);
    for d in &dropped {
        let msg = format!("duplicate toggle set {d} ignored");
        log::warn!("{msg}");
        eprintln!("warning: {msg}");
    }
    let (corpus, qs) = read_inputs(cfg)?;
    let (train, dev, test) = (answered(&qs.train), answered(&qs.dev), answered(&qs.test));
    let base = cfg.pipeline();
    let rows = pipeline::ablation_matrix(&corpus, &train, &dev, &test, &base, &kept, mapper)?;
    let entries: Vec<AblationEntry> = rows
        .into_iter()
        .map(|r| AblationEntry {
            toggles: r.toggles.to_string(),
            report: r.report,
        })
        .collect();
    let text = ablation_text(&entries);
    say!("{text}");
    write_json(&cfg.out_dir.join("ablation.json"), &entries)?;
    write_text(&cfg.out_dir.join("ablation.txt"), &text)?;
    Ok(())
}

pub fn ablation_text(entries: &[AblationEntry]) -> String {
    let rows: Vec<Vec<String>> = entries
        .iter()
        .map(|e| {
            let t = Toggles::parse(&e.toggles).unwrap_or(Toggles::none());
            let mut r = vec![e.toggles.clone()];
            for on in [t.mil, t.rf, t.mst, t.rsr, t.pf] {
                r.push(if on { "x" } else { "" }.to_string());
            }
            r.push(format!("{:.2}", e.report.total.em));
            r.push(format!("{:.2}", e.report.total.f1));
            r.push(fmt_opt(e.report.row_accuracy));
            r
        })
        .collect();
    render(
        &["config", "MIL", "RF", "MST", "RSR", "PF", "EM", "F1", "row acc"],
        &rows,
    )
}

/// Writes a synthetic benchmark plus a ready-to-run config into `dir`.
pub fn synth(dir: &Path, cfg: &SynthConfig) -> CliResult<()> {
    let bench = generate(cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    let (tables, passages) = bench.corpus.clone().into_parts();
    write_jsonl(&dir.join("tables.jsonl"), &tables)?;
    write_jsonl(&dir.join("passages.jsonl"), &passages)?;
    for (name, split) in [
        ("train.jsonl", tabtext_core::synth::Split::Train),
        ("dev.jsonl", tabtext_core::synth::Split::Dev),
        ("test.jsonl", tabtext_core::synth::Split::Test),
    ] {
        write_jsonl(&dir.join(name), &bench.split(split))?;
    }
    write_jsonl(&dir.join("gold.jsonl"), &bench.gold)?;
    write_json(&dir.join("synth.json"), cfg)?;
    let run_cfg = Config::default();
    write_text(&dir.join(crate::config::DEFAULT_CONFIG), &run_cfg.to_toml())?;
    sayln!(
        "wrote {} tables, {} passages, {} questions to {}",
        tables.len(),
        passages.len(),
        bench.questions.len(),
        dir.display()
    );
    Ok(())
}

/// Stage order for `run`.
pub fn stages(open_domain: bool) -> Vec<&'static str> {
    let mut s = vec!["ingest"];
    if open_domain {
        s.extend(["index-tables", "link", "retrieve"]);
    }
    s.extend(["supervise", "train-rr", "train-ae", "tune-reranker", "predict", "eval"]);
    s
}

pub fn run_stage(ctx: &Ctx, stage: &str, mapper: &RayonMapper) -> CliResult<()> {
    log::info!("stage {stage}");
    match stage {
        "ingest" => ingest(ctx),
        "stats" => stats(ctx, mapper),
        "index-tables" => index_tables(ctx),
        "retrieve" => retrieve(ctx, mapper),
        "link" => link(ctx, mapper),
        "supervise" => supervise(ctx, mapper),
        "train-rr" => train_rr(ctx, mapper),
        "train-ae" => train_ae(ctx, mapper),
        "tune-reranker" => tune_reranker(ctx, mapper),
        "predict" => predict(ctx, mapper),
        "eval" => eval(ctx),
        other => Err(CliError::Usage(format!("unknown stage {other}"))),
    }
}
