use std::collections::BTreeSet;

use proptest::prelude::*;
use tabtext_core::bm25::{idf, term_score, Bm25Index, Bm25Params};
use tabtext_core::context::{filter_passages, LinearizationCost, SegmentTag, SimilarityScorer, TokenSequence};
use tabtext_core::corpus::{retrieval_unit, split_table, Cell, Corpus, Passage, Question, Table};
use tabtext_core::extractor::{
    context_answer_spans, span_loss_grad, train_answer_extractor, ExtractionInstance, ExtractorTrainConfig,
    FEATURE_DIM,
};
use tabtext_core::math::SparseVec;
use tabtext_core::metrics::{exact_match, f1_token, hits_at_k};
use tabtext_core::optim::GradBuffer;
use tabtext_core::row_retriever::{all_positive_loss, bag_loss_grad, mil_loss, BagLoss};
use tabtext_core::text::{normalize_answer, tokenize};

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Minimum positive cross-entropy plus summed negative cross-entropy,
/// written out directly.
fn brute_mil(probs: &[f64], positives: &BTreeSet<usize>) -> f64 {
    let mut best = f64::INFINITY;
    let mut neg = 0.0;
    for (r, &p) in probs.iter().enumerate() {
        let p = p.clamp(1e-7, 1.0 - 1e-7);
        if positives.contains(&r) {
            best = best.min(-p.ln());
        } else {
            neg += -(1.0 - p).ln();
        }
    }
    best + neg
}

fn bag_strategy() -> impl Strategy<Value = (Vec<f64>, BTreeSet<usize>)> {
    (1usize..8).prop_flat_map(|n| {
        (
            prop::collection::vec(-4.0f64..4.0, n),
            prop::collection::btree_set(0..n, 1..=n),
        )
    })
}

proptest! {
    #[test]
    fn mil_matches_brute_force((logits, pos) in bag_strategy()) {
        let probs: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
        let got = mil_loss(&probs, &pos).unwrap();
        prop_assert!((got - brute_mil(&probs, &pos)).abs() < 1e-9);
        prop_assert!(got <= all_positive_loss(&probs, &pos) + 1e-12);
    }

    #[test]
    fn bag_gradients_match_finite_differences((logits, pos) in bag_strategy(), naive in any::<bool>()) {
        let loss = if naive { BagLoss::AllPositive } else { BagLoss::MultiInstance };
        // Keep the argmin positive well separated so the loss is smooth.
        let probs: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
        let mut ps: Vec<f64> = pos.iter().map(|&r| probs[r]).collect();
        ps.sort_by(|a, b| b.partial_cmp(a).unwrap());
        prop_assume!(ps.len() < 2 || ps[0] - ps[1] > 1e-3);
        let (_, g) = bag_loss_grad(&logits, &pos, loss, true);
        let h = 1e-5;
        for r in 0..logits.len() {
            let mut up = logits.clone();
            up[r] += h;
            let mut dn = logits.clone();
            dn[r] -= h;
            let fd = (bag_loss_grad(&up, &pos, loss, true).0 - bag_loss_grad(&dn, &pos, loss, true).0) / (2.0 * h);
            let denom = fd.abs().max(g[r].abs()).max(1e-8);
            prop_assert!((fd - g[r]).abs() / denom < 1e-4 || (fd - g[r]).abs() < 1e-8, "row {r}: fd {fd} vs {}", g[r]);
        }
    }

    #[test]
    fn span_gradient_matches_finite_differences(
        n in 2usize..6,
        raw in prop::collection::vec(prop::collection::vec((0u32..6, -1.0f64..1.0), 1..4), 6),
        params_raw in prop::collection::vec(-0.5f64..0.5, 12),
        gs in 0usize..6,
        ge in 0usize..6,
    ) {
        let feats: Vec<Option<SparseVec>> = raw.into_iter().take(n).map(|e| Some(SparseVec::from_unsorted(e))).collect();
        let (gs, ge) = (gs % n, ge % n);
        let mut params = vec![0.0; 2 * FEATURE_DIM + 2];
        params[..6].copy_from_slice(&params_raw[..6]);
        params[FEATURE_DIM..FEATURE_DIM + 6].copy_from_slice(&params_raw[6..12]);
        let mut buf = GradBuffer::default();
        span_loss_grad(&params, &feats, (gs, ge), &mut buf);
        let grad = buf.drain_merged();
        let h = 1e-5;
        for (j, g) in grad {
            let mut up = params.clone();
            up[j] += h;
            let mut dn = params.clone();
            dn[j] -= h;
            let mut scratch = GradBuffer::default();
            let fd = (span_loss_grad(&up, &feats, (gs, ge), &mut scratch)
                - span_loss_grad(&dn, &feats, (gs, ge), &mut scratch))
                / (2.0 * h);
            let denom = fd.abs().max(g.abs()).max(1e-8);
            prop_assert!((fd - g).abs() / denom < 1e-4 || (fd - g).abs() < 1e-8);
        }
    }

    #[test]
    fn split_table_partitions_rows(rows in 1usize..6, cols in 1usize..4) {
        let t = Table {
            id: "t".into(),
            meta: "m".into(),
            headers: (0..cols).map(|c| format!("h{c}")).collect(),
            rows: (0..rows).map(|r| (0..cols).map(|c| Cell::new(format!("r{r}c{c}"))).collect()).collect(),
        };
        let units = split_table(&t);
        prop_assert_eq!(units.len(), rows);
        for (r, u) in units.iter().enumerate() {
            prop_assert_eq!(u.row_index, r);
            prop_assert_eq!(&u.cells, &t.rows[r]);
        }
    }

    #[test]
    fn passage_filter_keeps_a_fitting_prefix(
        lens in prop::collection::vec(1usize..30, 1..6),
        scores in prop::collection::vec(0.0f64..1.0, 6),
        budget in 1usize..120,
        extra in 0usize..40,
    ) {
        let passages: Vec<Passage> = lens
            .iter()
            .enumerate()
            .map(|(i, &l)| Passage { id: format!("p{i}"), title: String::new(), text: vec!["w"; l].join(" ") })
            .collect();
        let links: Vec<String> = passages.iter().map(|p| p.id.clone()).collect();
        let link_refs: Vec<&str> = links.iter().map(String::as_str).collect();
        let table = Table {
            id: "t".into(),
            meta: String::new(),
            headers: vec!["h".into()],
            rows: vec![vec![Cell::linked("x", &link_refs)]],
        };
        let corpus = Corpus::new(vec![table.clone()], passages.clone()).unwrap();
        let q = Question { id: "q".into(), text: "w".into(), answer_text: None, table_id: Some("t".into()) };
        let scorer = Fixed(scores.clone());
        let unit = retrieval_unit(&table, 0);
        let cost = LinearizationCost { fixed: 5, per_passage: 1 };
        let kept = filter_passages(&q, &unit, &corpus, &scorer, cost, budget);
        let kept_more = filter_passages(&q, &unit, &corpus, &scorer, cost, budget + extra);

        let mut order: Vec<usize> = (0..links.len()).collect();
        order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
        let sorted: Vec<String> = order.iter().map(|&i| links[i].clone()).collect();
        prop_assert_eq!(&sorted[..kept.len()], &kept[..]);
        prop_assert!(kept_more.len() >= kept.len());
        prop_assert_eq!(&kept_more[..kept.len()], &kept[..]);
        let used: usize = 5 + kept.iter().map(|id| corpus.passage_tokens(id).len() + 1).sum::<usize>();
        match kept.len() {
            0 => prop_assert!(5 >= budget),
            1 => {}
            _ => prop_assert!(used <= budget),
        }
    }

    #[test]
    fn normalization_is_idempotent(s in "[a-zA-Z0-9 ,.!?'-]{0,30}") {
        let n = normalize_answer(&s);
        prop_assert_eq!(normalize_answer(&n), n);
    }

    #[test]
    fn metrics_are_symmetric_and_bounded(a in "[a-c ]{0,12}", b in "[a-c ]{0,12}") {
        prop_assert_eq!(exact_match(&a, &b), exact_match(&b, &a));
        prop_assert!((f1_token(&a, &b) - f1_token(&b, &a)).abs() < 1e-12);
        let f = f1_token(&a, &b);
        prop_assert!((0.0..=1.0).contains(&f));
        if exact_match(&a, &b) == 1.0 {
            prop_assert_eq!(f, 1.0);
        }
    }

    #[test]
    fn bm25_absent_terms_score_zero(docs in prop::collection::vec("[a-e]( [a-e]){0,6}", 1..5)) {
        let ix = Bm25Index::build(docs.iter().enumerate().map(|(i, d)| (format!("d{i}"), tokenize(d))), Bm25Params::default());
        let q = tokenize("x y z");
        prop_assert!(ix.scores(&q).iter().all(|&s| s == 0.0));
        for (i, d) in docs.iter().enumerate() {
            let toks: BTreeSet<String> = tokenize(d).into_iter().collect();
            let absent: Vec<String> = ["a", "b", "c", "d", "e"].iter().map(|s| s.to_string()).filter(|t| !toks.contains(t)).collect();
            prop_assert_eq!(ix.score(&absent, i), 0.0);
        }
    }

    #[test]
    fn bm25_extra_occurrence_never_lowers_score(tf in 0u32..20, extra_len in 0u32..50, avg in 1.0f64..60.0, n in 1usize..100, df_frac in 0.0f64..1.0) {
        let df = ((n as f64 * df_frac) as usize).max(1).min(n);
        let w = idf(n, df);
        prop_assert!(w >= 0.0);
        let dl = tf + extra_len;
        let p = Bm25Params::default();
        prop_assert!(term_score(tf + 1, dl + 1, avg, w, p) >= term_score(tf, dl, avg, w, p));
    }

    #[test]
    fn hits_monotone_in_k(
        ranked in prop::collection::vec(prop::collection::vec(0u8..8, 0..8), 1..10),
        gold in prop::collection::vec(0u8..8, 10),
    ) {
        let ranked: Vec<Vec<String>> = ranked.iter().map(|r| r.iter().map(|t| format!("t{t}")).collect()).collect();
        let gold: Vec<String> = gold.iter().take(ranked.len()).map(|t| format!("t{t}")).collect();
        let mut last = 0.0;
        for k in 1..=9 {
            let h = hits_at_k(&ranked, &gold, k);
            prop_assert!(h >= last);
            last = h;
        }
    }
}

struct Fixed(Vec<f64>);

impl SimilarityScorer for Fixed {
    fn score(&self, _question: &str, passage: &Passage) -> f64 {
        let i: usize = passage.id[1..].parse().unwrap();
        self.0[i]
    }
}

fn passage_context(text: &str) -> TokenSequence {
    let mut ctx = TokenSequence::new();
    ctx.extend(SegmentTag::Header(0), ["team"]);
    ctx.push(SegmentTag::Separator, "is");
    ctx.extend(SegmentTag::Cell(0), ["philadelphia"]);
    ctx.push(SegmentTag::Separator, ".");
    ctx.push_passage("P", &tokenize(text));
    ctx
}

fn instance(id: &str, question: &str, text: &str, answer: &str) -> ExtractionInstance {
    let context = passage_context(text);
    ExtractionInstance {
        question_id: id.into(),
        table_id: "t".into(),
        question: question.into(),
        row: 0,
        gold_spans: context_answer_spans(&context, answer),
        context,
    }
}

#[test]
fn denoising_prefers_the_context_supported_occurrence() {
    let teams = ["ravens", "giants", "saints", "colts", "packers", "broncos", "rams", "chiefs"];
    let fillers = ["founded in 1933", "play at home", "wear green shirts", "moved west once"];
    let mut data = Vec::new();
    for (i, team) in teams.iter().enumerate() {
        let a = fillers[i % fillers.len()];
        let b = fillers[(i + 1) % fillers.len()];
        let text = format!("{a} . in {} the {team} won the super bowl . {b}", 2000 + i);
        let q = format!("which team won the {} super bowl", 2000 + i);
        data.push(instance(&format!("s{i}"), &q, &text, team));
    }
    let eagles = instance(
        "eagles",
        "which team won the 2018 super bowl",
        "the eagles were founded in 1933 . in 2018 the eagles won the super bowl . the eagles play at home",
        "eagles",
    );
    assert_eq!(eagles.gold_spans.len(), 3);
    data.push(eagles);

    let out = train_answer_extractor(&data, &ExtractorTrainConfig::default()).unwrap();
    assert_eq!(out.report.multi_span, 1);
    assert_eq!(out.report.choices[0].chosen, 1);

    let init = out.initial.unwrap();
    let e = data.last().unwrap();
    let losses: Vec<f64> = e
        .gold_spans
        .iter()
        .map(|&g| init.span_loss(&e.question, &e.context, g))
        .collect();
    assert!(losses[1] < losses[0] && losses[1] < losses[2], "{losses:?}");
}
