use std::collections::HashSet;

mod common;

use common::two_shift_oracle;
use proptest::prelude::*;
use rbmtkit::annotate::{
    annotate_catcl, default_bracketed_labels, linearize_tree, ParseTree, CLOSE_BRACKET, OPEN_BRACKET,
};
use rbmtkit::corpus::{parse_token_line, render_token_line, AlignmentSet, StatsAccumulator};
use rbmtkit::entity::{
    project_spans, restore_tags, tag_entities, AttentionMatrix, EntitySpan, ReplacementSidecar, SidecarRecord, TagMode,
    TagOptions,
};
use rbmtkit::lexicon::{build_ambiguity_index, parse_lexicon, TermDictionary};
use rbmtkit::metrics::{
    bleu, bootstrap_significance, chrf, levenshtein, sentence_bleu, ter, ter_breakdown, BleuOptions, BootstrapOptions,
    ChrfOptions, Metric, TerOptions,
};
use rbmtkit::pipeline::{cap_vocabulary, exclusion_set, select_focused, FocusPredicate, LineHash};
use rbmtkit::subword::{bpe_apply, bpe_learn, bpe_undo, MarkerMode};
use rbmtkit::{AnnotatedToken, ParallelPair, Sentence};

fn words(text: &[String]) -> Sentence {
    Sentence::new(text.iter().map(AnnotatedToken::new).collect())
}

fn word() -> impl Strategy<Value = String> {
    "[a-e]{1,6}"
}

fn sentence(max: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(word(), 1..max)
}

fn small_vocab_sentence(max: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(
        prop::sample::select(vec!["a", "b", "c"]).prop_map(str::to_string),
        1..max,
    )
}

fn annotated(arity: usize) -> impl Strategy<Value = Sentence> {
    prop::collection::vec(
        ("[a-zA-Z0-9.,]{1,5}", prop::collection::vec("[A-Z_+-]{1,4}", arity)),
        1..10,
    )
    .prop_map(|toks| {
        Sentence::new(
            toks.into_iter()
                .map(|(s, f)| AnnotatedToken::with_features(s, f))
                .collect(),
        )
    })
}

/// A sentence with non-overlapping spans, built from plain tokens and
/// labelled segments.
fn spanned() -> impl Strategy<Value = (Sentence, Vec<EntitySpan>)> {
    let segment = prop_oneof![
        word().prop_map(|w| (vec![w], None)),
        (
            prop::collection::vec(word(), 1..4),
            prop::sample::select(vec!["MED", "PERSON", "MISC"])
        )
            .prop_map(|(ws, l)| (ws, Some(l))),
    ];
    prop::collection::vec(segment, 1..8).prop_map(|segments| {
        let mut tokens = Vec::new();
        let mut spans = Vec::new();
        for (ws, label) in segments {
            let start = tokens.len();
            tokens.extend(ws.into_iter().map(AnnotatedToken::new));
            if let Some(l) = label {
                spans.push(EntitySpan::new(start, tokens.len(), l));
            }
        }
        (Sentence::new(tokens), spans)
    })
}

/// Trees whose leaves always hang under a preterminal.
fn tree() -> impl Strategy<Value = ParseTree> {
    let labels = prop::sample::select(vec!["NP", "PP", "VP", "S", "CLS", "AP", "X"]);
    let pre = (prop::sample::select(vec!["DT", "NN", "VB", "IN"]), word())
        .prop_map(|(t, w)| ParseTree::node(t, vec![ParseTree::leaf(w)]));
    let inner = pre.prop_recursive(4, 24, 4, move |child| {
        (labels.clone(), prop::collection::vec(child, 1..4)).prop_map(|(l, cs)| ParseTree::node(l, cs))
    });
    inner.prop_map(|t| ParseTree::node("S", vec![t]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn token_line_round_trip(s in (0usize..3).prop_flat_map(annotated), sep in prop::sample::select(vec!['\u{FFE8}', '|'])) {
        let line = render_token_line(&s, sep).unwrap();
        prop_assert_eq!(parse_token_line(&line, sep).unwrap(), s);
    }

    #[test]
    fn stats_merge_equals_whole(corpus in prop::collection::vec(sentence(8), 1..12), cut in 0usize..12) {
        let cut = cut.min(corpus.len());
        let sentences: Vec<Sentence> = corpus.iter().map(|c| words(c)).collect();
        let mut whole = StatsAccumulator::new();
        let (mut left, mut right) = (StatsAccumulator::new(), StatsAccumulator::new());
        for (i, s) in sentences.iter().enumerate() {
            whole.add_words(s);
            whole.add_subwords(s);
            let part = if i < cut { &mut left } else { &mut right };
            part.add_words(s);
            part.add_subwords(s);
        }
        prop_assert_eq!(left.merge(right).finish(), whole.finish());
    }

    #[test]
    fn lexicon_parser_total(text in "[()\" ;a-zA-Z:\n\\\\-]{0,60}") {
        let _ = parse_lexicon(&text);
    }

    #[test]
    fn annotate_keeps_surfaces(s in sentence(10)) {
        let lex = parse_lexicon("(\"a\" NST CL (P-S))\n(\"ab\" VST CL (S-01))").unwrap();
        let index = build_ambiguity_index(lex);
        let sent = words(&s);
        let out = annotate_catcl(&sent, &index);
        prop_assert_eq!(out.len(), sent.len());
        prop_assert!(out.surfaces().eq(sent.surfaces()));
        prop_assert!(out.tokens.iter().all(|t| t.features.len() == 2));
    }

    #[test]
    fn linearize_balanced_in_order(t in tree()) {
        let lin = linearize_tree(&t, &default_bracketed_labels());
        let mut depth = 0i64;
        for s in lin.surfaces() {
            if s == OPEN_BRACKET { depth += 1 }
            if s == CLOSE_BRACKET { depth -= 1 }
            prop_assert!(depth >= 0);
        }
        prop_assert_eq!(depth, 0);
        let leaves: Vec<&str> = lin.surfaces().filter(|s| *s != OPEN_BRACKET && *s != CLOSE_BRACKET).collect();
        prop_assert_eq!(leaves, t.leaves());
        prop_assert!(lin.tokens.iter().all(|tok| tok.features.len() == 1));
    }

    #[test]
    fn bpe_round_trip(corpus in prop::collection::vec(sentence(8), 1..10), merges in 0usize..40,
                      prefix in any::<bool>()) {
        let marker = if prefix { MarkerMode::Prefix } else { MarkerMode::Suffix };
        let sentences: Vec<Sentence> = corpus
            .iter()
            .map(|c| Sentence::new(c.iter().map(|w| AnnotatedToken::with_features(w.clone(), [w.len().to_string()])).collect()))
            .collect();
        let model = bpe_learn(&sentences, merges, 1).with_marker(marker);
        for s in &sentences {
            let seg = bpe_apply(s, &model);
            prop_assert!(seg.len() >= s.len());
            let undone = bpe_undo(&seg, marker);
            prop_assert_eq!(undone.dangling, 0);
            prop_assert_eq!(&undone.sentence, s);
        }
    }

    #[test]
    fn tagging_lengths((sent, spans) in spanned()) {
        let replace = TagOptions { mode: TagMode::Replace, ..TagOptions::default() };
        let (out, sidecar) = tag_entities(&sent, &spans, &replace).unwrap();
        let width: usize = spans.iter().map(EntitySpan::width).sum();
        prop_assert_eq!(out.len(), sent.len() - width + spans.len());
        prop_assert_eq!(sidecar.len(), spans.len());
        let (feat, side) = tag_entities(&sent, &spans, &TagOptions::default()).unwrap();
        prop_assert_eq!(feat.len(), sent.len());
        prop_assert!(side.is_empty());
        prop_assert!(feat.surfaces().eq(sent.surfaces()));
    }

    #[test]
    fn projection_in_bounds((src, spans) in spanned(), tgt_len in 1usize..12,
                            links in prop::collection::vec((0usize..40, 0usize..40), 0..30)) {
        let alignments: AlignmentSet = links.into_iter().map(|(s, t)| (s % src.len(), t % tgt_len)).collect();
        let projected = project_spans(&spans, &alignments, tgt_len);
        for w in projected.spans.windows(2) {
            prop_assert!(w[0].end <= w[1].start);
        }
        for s in &projected.spans {
            prop_assert!(s.start < s.end && s.end <= tgt_len);
        }
    }

    #[test]
    fn one_hot_restoration_consumes_every_tag(
        (sent, spans) in spanned(),
        fillers in prop::collection::vec(word(), 0..6),
        order_seed in any::<u64>(),
        in_dict in prop::collection::vec(any::<bool>(), 8),
    ) {
        let options = TagOptions { mode: TagMode::Replace, ..TagOptions::default() };
        let (source, sidecar) = tag_entities(&sent, &spans, &options).unwrap();
        let labels: HashSet<String> = ["MED", "PERSON", "MISC"].iter().map(|s| s.to_string()).collect();
        let tag_cols: Vec<usize> = (0..source.len()).filter(|&i| labels.contains(&source.tokens[i].surface)).collect();

        // the hypothesis visits the source tags in a seeded order, padded with fillers
        let mut order: Vec<usize> = (0..tag_cols.len()).collect();
        let mut x = order_seed;
        for i in (1..order.len()).rev() {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (x >> 33) as usize % (i + 1));
        }
        let mut hyp = Vec::new();
        let mut rows = Vec::new();
        let mut expected = Vec::new();
        let mut dict = TermDictionary::new();
        for (i, &k) in order.iter().enumerate() {
            if let Some(f) = fillers.get(i) {
                hyp.push(AnnotatedToken::new(f.clone()));
                rows.push(vec![1.0 / source.len() as f64; source.len()]);
                expected.push(f.clone());
            }
            let record = &sidecar.records[k];
            hyp.push(AnnotatedToken::new(record.label.clone()));
            let mut row = vec![0.0; source.len()];
            row[tag_cols[k]] = 1.0;
            rows.push(row);
            let phrase: Vec<String> = record.phrase.split(' ').map(str::to_string).collect();
            if in_dict[k % in_dict.len()] {
                let target = vec![format!("T{k}")];
                dict.insert(phrase, record.label.clone(), target.clone());
                expected.extend(target);
            } else {
                expected.extend(phrase);
            }
        }
        let attention = AttentionMatrix::new(rows).unwrap();
        let (out, report) = restore_tags(&Sentence::new(hyp), &source, &sidecar, &attention, &dict, &labels).unwrap();
        prop_assert!(out.surfaces().all(|s| !labels.contains(s)));
        prop_assert_eq!(report.restored + report.copied, tag_cols.len());
        prop_assert_eq!(report.reused + report.deleted, 0);
        prop_assert_eq!(out.surfaces().map(str::to_string).collect::<Vec<_>>(), expected);
    }

    #[test]
    fn metric_bounds_and_identity(h in sentence(12), r in sentence(12)) {
        let (hyp, reference) = (words(&h), words(&r));
        let b = sentence_bleu(&hyp, &reference, BleuOptions::default());
        let c = chrf(&hyp, &reference, ChrfOptions::default());
        let t = ter(&hyp, &reference, TerOptions::default()).unwrap();
        prop_assert!((0.0..=100.0).contains(&b));
        prop_assert!((0.0..=100.0).contains(&c));
        prop_assert!(t >= 0.0);
        prop_assert!((sentence_bleu(&reference, &reference, BleuOptions::default()) - 100.0).abs() < 1e-9);
        prop_assert!((chrf(&reference, &reference, ChrfOptions::default()) - 100.0).abs() < 1e-9);
        prop_assert_eq!(ter(&reference, &reference, TerOptions::default()).unwrap(), 0.0);
    }

    #[test]
    fn ter_shift_bounds(h in small_vocab_sentence(7), r in small_vocab_sentence(7)) {
        let (hyp, reference) = (words(&h), words(&r));
        let hs: Vec<&str> = h.iter().map(String::as_str).collect();
        let rs: Vec<&str> = r.iter().map(String::as_str).collect();
        let lev = levenshtein(&hs, &rs);
        let plain = ter(&hyp, &reference, TerOptions::no_shifts()).unwrap();
        prop_assert_eq!(plain, lev as f64 / rs.len() as f64);
        let edits = ter_breakdown(&hyp, &reference, TerOptions::default());
        let greedy = edits.shifts + edits.distance;
        prop_assert!(greedy <= lev);
        if edits.shifts <= 2 {
            prop_assert!(greedy >= two_shift_oracle(&hs, &rs));
        }
    }

    #[test]
    fn chrf_ignores_token_boundaries(h in sentence(8), r in sentence(8), cuts in prop::collection::vec(any::<bool>(), 64)) {
        let joined: String = h.concat();
        let mut resplit = Vec::new();
        let mut cur = String::new();
        for (i, ch) in joined.chars().enumerate() {
            cur.push(ch);
            if cuts[i % cuts.len()] {
                resplit.push(std::mem::take(&mut cur));
            }
        }
        if !cur.is_empty() {
            resplit.push(cur);
        }
        let reference = words(&r);
        let a = chrf(&words(&h), &reference, ChrfOptions::default());
        let b = chrf(&words(&resplit), &reference, ChrfOptions::default());
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn corpus_bleu_order_free(pairs in prop::collection::vec((sentence(10), sentence(10)), 1..8), rot in 0usize..8) {
        let hyps: Vec<Sentence> = pairs.iter().map(|(h, _)| words(h)).collect();
        let refs: Vec<Sentence> = pairs.iter().map(|(_, r)| words(r)).collect();
        let k = rot % hyps.len();
        let (mut h2, mut r2) = (hyps.clone(), refs.clone());
        h2.rotate_left(k);
        r2.rotate_left(k);
        h2.reverse();
        r2.reverse();
        let a = bleu(&hyps, &refs, BleuOptions::default()).unwrap();
        let b = bleu(&h2, &r2, BleuOptions::default()).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn cap_vocabulary_idempotent(corpus in prop::collection::vec(sentence(8), 1..10), size in 0usize..12) {
        let sentences: Vec<Sentence> = corpus.iter().map(|c| words(c)).collect();
        let (once, vocab) = cap_vocabulary(&sentences, size, "<unk>");
        let (twice, vocab2) = cap_vocabulary(&once, size, "<unk>");
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(vocab, vocab2);
        let distinct: HashSet<&str> = once.iter().flat_map(|s| s.surfaces()).filter(|s| *s != "<unk>").collect();
        prop_assert!(distinct.len() <= size);
    }

    #[test]
    fn selection_avoids_exclusions(corpus in prop::collection::vec(small_vocab_sentence(4), 1..20),
                                   excluded in prop::collection::vec(small_vocab_sentence(4), 0..10)) {
        let pairs: Vec<ParallelPair> = corpus
            .iter()
            .enumerate()
            .map(|(id, c)| ParallelPair { id, source: words(c), target: words(c) })
            .collect();
        let lines: Vec<String> = excluded.iter().map(|e| e.join(" ")).collect();
        let exclusion = exclusion_set(lines.iter().map(String::as_str));
        let predicate = FocusPredicate::surface_set(["a"]).unwrap();
        let picked = select_focused(&pairs, None, &predicate, &exclusion).unwrap();
        let mut seen = HashSet::new();
        for p in &picked {
            let hash = LineHash::of(&p.source.surface_text());
            prop_assert!(!exclusion.contains(&hash));
            prop_assert!(seen.insert(hash));
            prop_assert!(p.source.surfaces().any(|s| s == "a"));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn bootstrap_is_deterministic(pairs in prop::collection::vec((sentence(8), sentence(8), sentence(8)), 2..10),
                                  seed in any::<u64>()) {
        let a: Vec<Sentence> = pairs.iter().map(|p| words(&p.0)).collect();
        let b: Vec<Sentence> = pairs.iter().map(|p| words(&p.1)).collect();
        let r: Vec<Sentence> = pairs.iter().map(|p| words(&p.2)).collect();
        let options = BootstrapOptions { sample_size: 20, iterations: 50, alpha: 0.05, seed };
        let metric = Metric::Bleu(BleuOptions::default());
        let first = bootstrap_significance(&a, &b, &r, metric, options).unwrap();
        let second = bootstrap_significance(&a, &b, &r, metric, options).unwrap();
        prop_assert_eq!(first, second);
        prop_assert!((0.0..=1.0).contains(&first.p_value));
    }
}

#[test]
fn sidecar_records_round_trip() {
    let sidecar = ReplacementSidecar {
        records: vec![
            SidecarRecord {
                label: "MED".into(),
                phrase: "blood vessel".into(),
            },
            SidecarRecord {
                label: "PERSON".into(),
                phrase: "juan".into(),
            },
        ],
    };
    assert_eq!(ReplacementSidecar::from_line(&sidecar.to_line()).unwrap(), sidecar);
}
