//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test -p rbmtkit --test acceptance`.

mod common;

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::{fixture, rbmtkit, run_invocation, stderr, two_shift_oracle, ALL_SUBCOMMANDS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rbmtkit::annotate::{
    annotate_catcl, default_bracketed_labels, disambiguate_catcl, linearize_tree, parse_bracketed_tree, PosTagMap,
};
use rbmtkit::corpus::{render_token_line, AlignmentSet};
use rbmtkit::entity::{
    duplicate_augment, restore_tags, tag_entities, AttentionMatrix, EntitySpan, SidecarRecord, TagMode, TagOptions,
};
use rbmtkit::lexicon::{build_ambiguity_index, parse_lexicon, TermDictionary};
use rbmtkit::metrics::{
    bootstrap_significance, chrf, count_unks, sentence_bleu, ter, ter_breakdown, BleuOptions, BootstrapOptions,
    ChrfOptions, Metric, TerOptions,
};
use rbmtkit::pipeline::{Config, Translator};
use rbmtkit::subword::{bpe_apply, bpe_learn, bpe_undo, MarkerMode, DEFAULT_MAX_MERGES};
use rbmtkit::{AnnotatedToken, ParallelPair, Sentence};

/// Sentence-level BLEU anchors: absolute tolerance in BLEU points.
const BLEU_TOLERANCE: f64 = 1.0;
/// chrF anchors: absolute tolerance in chrF points.
const CHRF_TOLERANCE: f64 = 1.0;
/// TER anchors: absolute tolerance on the edit rate.
const TER_TOLERANCE: f64 = 0.02;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($fmt)+));
        }
    };
}

fn words(text: &str) -> Sentence {
    Sentence::from_words(text)
}

fn read(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

fn c1_ambiguity_classes() -> Outcome {
    let index = build_ambiguity_index(parse_lexicon(&read("snake.lsp")).map_err(|e| e.to_string())?);
    let snake = words("snake");
    let plain = annotate_catcl(&snake, &index);
    let cat = &plain.tokens[0].features[0];
    ensure!(cat == "NST_VST", "CAT {cat:?}");
    let mut map = PosTagMap::new();
    map.insert("NN", ["NST"]);
    let dis = disambiguate_catcl(&snake, &["NN"], &map, &index).map_err(|e| e.to_string())?;
    let (cat, cl) = (&dis.tokens[0].features[0], &dis.tokens[0].features[1]);
    ensure!(cat == "NST" && cl == "P-S+S-01", "disambiguated {cat:?} {cl:?}");
    Ok(format!(
        "CAT {}, disambiguated {cat} / {cl}",
        plain.tokens[0].features[0]
    ))
}

fn c2_tree_linearization() -> Outcome {
    let tree = parse_bracketed_tree(read("example_tree.txt").trim()).map_err(|e| e.to_string())?;
    let tree = tree.without_leaves("$").ok_or("empty tree")?;
    let lin = linearize_tree(&tree, &default_bracketed_labels());
    let text = lin.surface_text();
    ensure!(
        text == "⦅ I own ⦅ the house ⦆ ⦅ down ⦅ the street ⦆ ⦆ ⦆",
        "surfaces {text:?}"
    );
    let house = lin.tokens.iter().find(|t| t.surface == "house").ok_or("no house")?;
    ensure!(house.features == ["NP"], "house features {:?}", house.features);
    Ok(text)
}

fn c3_entity_tagging() -> Outcome {
    let s = words("He should discuss it with his cardiologist .");
    let spans = [EntitySpan::new(6, 7, "MED")];
    let (feat, _) = tag_entities(&s, &spans, &TagOptions::default()).map_err(|e| e.to_string())?;
    let feat = render_token_line(&feat, '|').map_err(|e| e.to_string())?;
    ensure!(
        feat == "He|GEN should|GEN discuss|GEN it|GEN with|GEN his|GEN cardiologist|MED .|GEN",
        "feature form {feat:?}"
    );
    let replace = TagOptions {
        mode: TagMode::Replace,
        ..TagOptions::default()
    };
    let (rep, sidecar) = tag_entities(&s, &spans, &replace).map_err(|e| e.to_string())?;
    ensure!(
        rep.surface_text() == "He should discuss it with his MED .",
        "replace form {:?}",
        rep.surface_text()
    );
    ensure!(
        sidecar.records
            == [SidecarRecord {
                label: "MED".into(),
                phrase: "cardiologist".into()
            }],
        "sidecar {:?}",
        sidecar.records
    );
    Ok("feature and replace forms exact".into())
}

fn c4_duplication_count() -> Outcome {
    let (total, with_spans) = (9919, 98);
    let pair = ParallelPair {
        id: 0,
        source: words("el cardiólogo"),
        target: words("the cardiologist"),
    };
    let alignments: AlignmentSet = [(0, 0), (1, 1)].into_iter().collect();
    let span = [EntitySpan::new(1, 2, "MED")];
    let none: Vec<EntitySpan> = Vec::new();
    // span-bearing pairs spread evenly through the corpus
    let corpus: Vec<(&ParallelPair, &[EntitySpan], &AlignmentSet)> = (0..total)
        .map(|i| {
            let spans = if i % 101 == 0 && i / 101 < with_spans {
                &span[..]
            } else {
                &none[..]
            };
            (&pair, spans, &alignments)
        })
        .collect();
    ensure!(
        corpus.iter().filter(|c| !c.1.is_empty()).count() == with_spans,
        "fixture has wrong span count"
    );
    let mut counts = Vec::new();
    for mode in [TagMode::Feature, TagMode::Replace] {
        let options = TagOptions {
            mode,
            ..TagOptions::default()
        };
        let out = duplicate_augment(corpus.iter().copied(), &options).map_err(|e| e.to_string())?;
        ensure!(out.len() == 10017, "{mode:?} mode emitted {}", out.len());
        counts.push(out.len());
    }
    Ok(format!(
        "{total} pairs, {with_spans} with spans -> {} emitted",
        counts[0]
    ))
}

fn c5_restoration() -> Outcome {
    let labels: HashSet<String> = ["PERSON", "LOCATION", "MED"].iter().map(|s| s.to_string()).collect();
    let label_list = ["PERSON", "LOCATION", "MED"];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let replace = TagOptions {
        mode: TagMode::Replace,
        ..TagOptions::default()
    };

    // mock translator: uppercases plain words and copies tag tokens
    let translator = |lines: &[String]| -> Result<Vec<String>, rbmtkit::pipeline::PipelineError> {
        Ok(lines
            .iter()
            .map(|l| {
                l.split(' ')
                    .map(|w| {
                        if labels.contains(w) {
                            w.to_string()
                        } else {
                            w.to_uppercase()
                        }
                    })
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect())
    };

    let mut restored = 0;
    for _ in 0..1000 {
        let mut tokens = Vec::new();
        let mut spans = Vec::new();
        for _ in 0..rng.random_range(1..6) {
            if rng.random_bool(0.4) {
                let start = tokens.len();
                for _ in 0..rng.random_range(1..4) {
                    tokens.push(AnnotatedToken::new(format!("e{}", rng.random_range(0..50))));
                }
                spans.push(EntitySpan::new(start, tokens.len(), label_list[rng.random_range(0..3)]));
            } else {
                tokens.push(AnnotatedToken::new(format!("w{}", rng.random_range(0..50))));
            }
        }
        let (source, sidecar) = tag_entities(&Sentence::new(tokens), &spans, &replace).map_err(|e| e.to_string())?;
        let mut dict = TermDictionary::new();
        for r in &sidecar.records {
            let phrase: Vec<String> = r.phrase.split(' ').map(str::to_string).collect();
            dict.insert(
                phrase,
                r.label.clone(),
                vec![format!("<{}>", r.phrase.replace(' ', "_"))],
            );
        }
        let hyp = words(
            &translator
                .translate(&[source.surface_text()])
                .map_err(|e| e.to_string())?[0],
        );
        let n = source.len();
        let attention = AttentionMatrix::new(
            (0..n)
                .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
        )
        .map_err(|e| e.to_string())?;
        let (out, report) =
            restore_tags(&hyp, &source, &sidecar, &attention, &dict, &labels).map_err(|e| e.to_string())?;
        ensure!(out.surfaces().all(|s| !labels.contains(s)), "residual tag in {out}");
        ensure!(
            report.restored == sidecar.len(),
            "restored {} of {}",
            report.restored,
            sidecar.len()
        );
        let inserted: Vec<&str> = out.surfaces().filter(|s| s.starts_with('<')).collect();
        let expected: Vec<String> = sidecar
            .records
            .iter()
            .map(|r| format!("<{}>", r.phrase.replace(' ', "_")))
            .collect();
        ensure!(inserted == expected, "replacements {inserted:?} != {expected:?}");
        restored += report.restored;
    }

    // two tags of one label: the first hypothesis tag takes its most
    // attended source tag, the second takes the other
    let two = HashSet::from(["MED".to_string()]);
    let source = words("MED y MED");
    let sidecar = rbmtkit::entity::ReplacementSidecar {
        records: vec![
            SidecarRecord {
                label: "MED".into(),
                phrase: "p0".into(),
            },
            SidecarRecord {
                label: "MED".into(),
                phrase: "p1".into(),
            },
        ],
    };
    let hyp = words("MED x MED");
    for _ in 0..100 {
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|_| {
                let raw: Vec<f64> = (0..3).map(|_| rng.random::<f64>() + 1e-3).collect();
                let sum: f64 = raw.iter().sum();
                raw.into_iter().map(|w| w / sum).collect()
            })
            .collect();
        // enumerated oracle over both assignments of hypothesis tags to
        // source tags (columns 0 and 2), first tag's preference dominating
        let assignments = [[0usize, 1usize], [1, 0]];
        let col = [0usize, 2usize];
        let oracle = assignments
            .iter()
            .max_by(|a, b| {
                rows[0][col[a[0]]]
                    .partial_cmp(&rows[0][col[b[0]]])
                    .unwrap()
                    .then_with(|| b[0].cmp(&a[0]))
            })
            .unwrap();
        let attention = AttentionMatrix::new(rows.clone()).map_err(|e| e.to_string())?;
        let (out, _) = restore_tags(&hyp, &source, &sidecar, &attention, &TermDictionary::new(), &two)
            .map_err(|e| e.to_string())?;
        let want = format!("p{} x p{}", oracle[0], oracle[1]);
        ensure!(
            out.surface_text() == want,
            "got {out}, oracle {want}, attention {rows:?}"
        );
    }
    Ok(format!(
        "1000 sentences, {restored} tags restored, 100 two-tag cases match"
    ))
}

fn levenshtein_brute(a: &[&str], b: &[&str]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

/// Hypothesis/reference pairs where the greedy search must find the best
/// edit sequence of at most two shifts.
const TER_REGRESSION: &[(&str, &str, f64)] = &[
    ("a b c d", "a c b d", 0.25),
    ("a b c d", "a b c d", 0.0),
    ("d e a b c", "a b c d e", 0.2),
    ("c a b", "a b c", 1.0 / 3.0),
    ("a x b c", "a b c x", 0.25),
    ("the cat sat on the mat", "on the mat the cat sat", 1.0 / 6.0),
    ("a b c d e f", "d e f a b c", 1.0 / 6.0),
    ("a b", "c d", 1.0),
    ("a b c", "a b", 0.5),
    ("a c b e d", "a b c d e", 0.4),
];

fn c6_metric_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let vocab = ["a", "b", "c", "d", "e", "f", "g", "h"];
    let draw = |rng: &mut ChaCha8Rng| -> Vec<&str> {
        let n = rng.random_range(1..=10);
        (0..n).map(|_| vocab[rng.random_range(0..vocab.len())]).collect()
    };
    for i in 0..10_000 {
        let (h, r) = (draw(&mut rng), draw(&mut rng));
        let (hyp, reference) = (words(&h.join(" ")), words(&r.join(" ")));
        let b = sentence_bleu(&hyp, &reference, BleuOptions::default());
        let c = chrf(&hyp, &reference, ChrfOptions::default());
        let t = ter(&hyp, &reference, TerOptions::default()).map_err(|e| e.to_string())?;
        ensure!(
            (0.0..=100.0).contains(&b) && (0.0..=100.0).contains(&c) && t >= 0.0,
            "pair {i}: bounds"
        );
        ensure!(
            sentence_bleu(&reference, &reference, BleuOptions::default()) == 100.0
                && chrf(&reference, &reference, ChrfOptions::default()) == 100.0
                && ter(&reference, &reference, TerOptions::default()).unwrap() == 0.0,
            "pair {i}: identity"
        );
        let plain = ter(&hyp, &reference, TerOptions::no_shifts()).unwrap();
        let brute = levenshtein_brute(&h, &r) as f64 / r.len() as f64;
        ensure!(
            plain.to_bits() == brute.to_bits(),
            "pair {i}: no-shift {plain} vs {brute}"
        );
        ensure!(t <= plain, "pair {i}: greedy {t} above no-shift {plain}");
    }
    for (h, r, want) in TER_REGRESSION {
        let (hyp, reference) = (words(h), words(r));
        let e = ter_breakdown(&hyp, &reference, TerOptions::default());
        let hs: Vec<&str> = h.split(' ').collect();
        let rs: Vec<&str> = r.split(' ').collect();
        let oracle = two_shift_oracle(&hs, &rs);
        ensure!(
            e.shifts + e.distance == oracle,
            "{h:?} vs {r:?}: greedy {e:?}, oracle {oracle}"
        );
        let t = ter(&hyp, &reference, TerOptions::default()).unwrap();
        ensure!((t - want).abs() < 1e-12, "{h:?} vs {r:?}: TER {t}, expected {want}");
    }
    Ok(format!("10000 random pairs, {} oracle cases", TER_REGRESSION.len()))
}

/// Lowercases and splits off commas and full stops.
fn tokenize(text: &str) -> Sentence {
    words(&text.to_lowercase().replace(',', " ,").replace('.', " ."))
}

fn c7_score_anchors() -> Outcome {
    let reference =
        tokenize("Despite an easing of price increases in the second half of 2008, prices remain at very high levels.");
    let rows = [
        (
            "Despite the increases in prices in the second half of 2008, prices remain very high.",
            47.48,
            0.35,
        ),
        (
            "Although increases in prices were lower in the second half of 2008, prices remain high.",
            44.50,
            0.45,
        ),
        (
            "Despite the fact that price increases were lower in the second half of 2008, prices remain very high.",
            48.25,
            0.35,
        ),
    ];
    let mut report = Vec::new();
    for (hyp, want_bleu, want_ter) in rows {
        let hyp = tokenize(hyp);
        let b = sentence_bleu(&hyp, &reference, BleuOptions::default());
        let t = ter(&hyp, &reference, TerOptions::default()).unwrap();
        ensure!((b - want_bleu).abs() <= BLEU_TOLERANCE, "BLEU {b:.2} vs {want_bleu}");
        ensure!((t - want_ter).abs() <= TER_TOLERANCE, "TER {t:.4} vs {want_ter}");
        report.push(format!("BLEU {b:.2} TER {t:.2}"));
    }
    let reference = tokenize("Care should be taken to ensure that a blood vessel has not been entered.");
    let hyp = tokenize("You must be careful not to go through a glass of blood.");
    let c = chrf(&hyp, &reference, ChrfOptions::default());
    let t = ter(&hyp, &reference, TerOptions::default()).unwrap();
    ensure!((c - 18.21).abs() <= CHRF_TOLERANCE, "chrF {c:.2} vs 18.21");
    ensure!((t - 0.7333).abs() <= TER_TOLERANCE, "TER {t:.4} vs 0.7333");
    report.push(format!("terminology chrF {c:.2} TER {t:.4}"));
    Ok(report.join("; "))
}

fn c8_bootstrap() -> Outcome {
    let lines = |name: &str| -> Vec<Sentence> { read(name).lines().map(words).collect() };
    let (refs, hyp_b) = (lines("ref.txt"), lines("hyp_b.txt"));
    let options = BootstrapOptions {
        sample_size: 100,
        iterations: 1000,
        alpha: 0.05,
        seed: 8,
    };
    let metric = Metric::Bleu(BleuOptions::default());
    let same = bootstrap_significance(&hyp_b, &hyp_b, &refs, metric, options).map_err(|e| e.to_string())?;
    ensure!(
        same.win_fraction == 0.5 && !same.significant,
        "self comparison {same:?}"
    );
    let dom = bootstrap_significance(&refs, &hyp_b, &refs, metric, options).map_err(|e| e.to_string())?;
    ensure!(dom.p_value == 0.0 && dom.significant, "dominance {dom:?}");
    let runs: Vec<String> = (0..3)
        .map(|_| {
            format!(
                "{:?}",
                bootstrap_significance(&hyp_b, &refs, &refs, metric, options).unwrap()
            )
        })
        .collect();
    ensure!(runs[0] == runs[1] && runs[1] == runs[2], "reruns differ: {runs:?}");
    Ok(format!(
        "self win_fraction {}, dominance p {}",
        same.win_fraction, dom.p_value
    ))
}

fn c9_bpe() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let random_sentence = |rng: &mut ChaCha8Rng| -> Sentence {
        let n = rng.random_range(1..12);
        Sentence::new(
            (0..n)
                .map(|_| {
                    let len = rng.random_range(1..9);
                    let w: String = (0..len).map(|_| (b'a' + rng.random_range(0..6u8)) as char).collect();
                    AnnotatedToken::with_features(w, [format!("F{}", rng.random_range(0..3))])
                })
                .collect(),
        )
    };
    let train: Vec<Sentence> = (0..2000).map(|_| random_sentence(&mut rng)).collect();
    let test: Vec<Sentence> = (0..10_000).map(|_| random_sentence(&mut rng)).collect();
    let learned = bpe_learn(&train, 500, 2);
    for marker in [MarkerMode::Suffix, MarkerMode::Prefix] {
        let model = learned.clone().with_marker(marker);
        for (i, s) in test.iter().enumerate() {
            let undone = bpe_undo(&bpe_apply(s, &model), marker);
            ensure!(
                undone.dangling == 0 && &undone.sentence == s,
                "{marker} sentence {i}: {s}"
            );
        }
    }
    let first = bpe_learn(&[words("aa aa ab")], 1, 2);
    ensure!(
        first.merges() == [("a".to_string(), "a</w>".to_string())],
        "first merge {:?}",
        first.merges()
    );
    ensure!(Config::default().max_merges == 32_000, "default cap");
    // a corpus with far more mergeable pairs than the cap
    let rich: Vec<Sentence> = (0..5000)
        .map(|_| {
            let w: Vec<String> = (0..8)
                .map(|_| {
                    let len = rng.random_range(4..11);
                    (0..len).map(|_| (b'a' + rng.random_range(0..26u8)) as char).collect()
                })
                .collect();
            words(&w.join(" "))
        })
        .collect();
    let capped = bpe_learn(&rich, DEFAULT_MAX_MERGES, 1);
    ensure!(capped.len() == DEFAULT_MAX_MERGES, "learned {} merges", capped.len());
    Ok(format!("10000 sentences x 2 markers, cap reached at {}", capped.len()))
}

fn c10_unk_accounting() -> Outcome {
    let count = |name: &str| {
        let s: Vec<Sentence> = read(name).lines().map(words).collect();
        count_unks(&s, "<unk>")
    };
    ensure!(count("hyp_b.txt") == 6, "hyp_b.txt: {}", count("hyp_b.txt"));
    ensure!(count("unk_hyp.txt") == 3, "unk_hyp.txt: {}", count("unk_hyp.txt"));
    let out = rbmtkit([
        "unk-replace",
        "--hyp",
        &fixture("unk_hyp.txt"),
        "--source",
        &fixture("unk_src.txt"),
        "--attention",
        &fixture("unk_attn.jsonl"),
        "--table",
        &fixture("unk_table.tsv"),
    ]);
    ensure!(out.status.success(), "unk-replace failed: {}", stderr(&out));
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    ensure!(!text.contains("<unk>"), "residual unk in {text:?}");
    ensure!(
        text == "the glass vessel\njohn lives in madrid\nhello\n",
        "output {text:?}"
    );
    Ok("hyp_b 6, unk_hyp 3, 0 after replacement".into())
}

fn c11_determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for inv in ALL_SUBCOMMANDS {
        let first = run_invocation(inv, a.path());
        let second = run_invocation(inv, b.path());
        ensure!(first == second, "{} output differs between runs", inv.name);
    }
    Ok(format!("{} subcommands byte-identical", ALL_SUBCOMMANDS.len()))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("ambiguity classes", c1_ambiguity_classes),
        ("tree linearization", c2_tree_linearization),
        ("entity tagging", c3_entity_tagging),
        ("duplication count", c4_duplication_count),
        ("tag restoration", c5_restoration),
        ("metric properties", c6_metric_properties),
        ("score anchors", c7_score_anchors),
        ("bootstrap", c8_bootstrap),
        ("bpe", c9_bpe),
        ("unk accounting", c10_unk_accounting),
        ("determinism", c11_determinism),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} ({secs:.1}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
