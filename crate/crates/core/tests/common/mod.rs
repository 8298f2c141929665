#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rbmtkit::metrics::{apply_shift, levenshtein};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

pub fn fixture(name: &str) -> String {
    fixtures().join(name).display().to_string()
}

pub fn rbmtkit<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_rbmtkit"))
        .args(args)
        .output()
        .expect("spawn rbmtkit")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// One invocation per subcommand. `{F}` expands to the fixture directory,
/// `{O}` to an output directory. Every listed output file is written by
/// the command; stdout is captured as well.
pub struct Invocation {
    pub name: &'static str,
    pub args: &'static [&'static str],
    pub outputs: &'static [&'static str],
}

pub const ALL_SUBCOMMANDS: &[Invocation] = &[
    Invocation {
        name: "annotate",
        args: &[
            "--separator",
            "|",
            "annotate",
            "--lexicon",
            "{F}/lexicon.lsp",
            "{F}/words.txt",
            "-o",
            "{O}/out",
        ],
        outputs: &["out"],
    },
    Invocation {
        name: "disambiguate",
        args: &[
            "disambiguate",
            "--lexicon",
            "{F}/lexicon.lsp",
            "--tags",
            "{F}/pos.txt",
            "{F}/words.txt",
            "-o",
            "{O}/out",
        ],
        outputs: &["out"],
    },
    Invocation {
        name: "pos-annotate",
        args: &[
            "pos-annotate",
            "--tags",
            "{F}/pos.txt",
            "{F}/words.txt",
            "-o",
            "{O}/out",
        ],
        outputs: &["out"],
    },
    Invocation {
        name: "linearize",
        args: &["linearize", "{F}/trees.txt", "-o", "{O}/out"],
        outputs: &["out"],
    },
    Invocation {
        name: "bpe-learn",
        args: &[
            "--set",
            "min_frequency=1",
            "bpe-learn",
            "{F}/src.txt",
            "-o",
            "{O}/model",
        ],
        outputs: &["model"],
    },
    Invocation {
        name: "bpe-apply",
        args: &["bpe-apply", "--model", "{F}/bpe.model", "{F}/src.txt", "-o", "{O}/out"],
        outputs: &["out"],
    },
    Invocation {
        name: "bpe-undo",
        args: &["bpe-undo", "{F}/segmented.txt", "-o", "{O}/out"],
        outputs: &["out"],
    },
    Invocation {
        name: "entity-tag",
        args: &[
            "--set",
            "tag_mode=replace",
            "entity-tag",
            "--spans",
            "{F}/spans.txt",
            "{F}/src.txt",
            "--sidecar",
            "{O}/side",
            "-o",
            "{O}/out",
        ],
        outputs: &["out", "side"],
    },
    Invocation {
        name: "prepare-pairs",
        args: &[
            "--set",
            "tag_mode=replace",
            "prepare-pairs",
            "--source",
            "{F}/src.txt",
            "--target",
            "{F}/tgt.txt",
            "--spans",
            "{F}/spans.txt",
            "--align",
            "{F}/align.txt",
            "--out-source",
            "{O}/s",
            "--out-target",
            "{O}/t",
        ],
        outputs: &["s", "t"],
    },
    Invocation {
        name: "duplicate",
        args: &[
            "duplicate",
            "--source",
            "{F}/src.txt",
            "--target",
            "{F}/tgt.txt",
            "--spans",
            "{F}/spans.txt",
            "--align",
            "{F}/align.txt",
            "--out-source",
            "{O}/s",
            "--out-target",
            "{O}/t",
        ],
        outputs: &["s", "t"],
    },
    Invocation {
        name: "restore",
        args: &[
            "restore",
            "--hyp",
            "{F}/rs_hyp.txt",
            "--source",
            "{F}/rs_src.txt",
            "--sidecar",
            "{F}/rs_side.txt",
            "--attention",
            "{F}/rs_attn.jsonl",
            "--dict",
            "{F}/terms.tsv",
            "-o",
            "{O}/out",
        ],
        outputs: &["out"],
    },
    Invocation {
        name: "phrase-table",
        args: &[
            "phrase-table",
            "--source",
            "{F}/src.txt",
            "--target",
            "{F}/tgt.txt",
            "--align",
            "{F}/align.txt",
            "-o",
            "{O}/out",
        ],
        outputs: &["out"],
    },
    Invocation {
        name: "unk-replace",
        args: &[
            "unk-replace",
            "--hyp",
            "{F}/unk_hyp.txt",
            "--source",
            "{F}/unk_src.txt",
            "--attention",
            "{F}/unk_attn.jsonl",
            "--table",
            "{F}/unk_table.tsv",
            "-o",
            "{O}/out",
        ],
        outputs: &["out"],
    },
    Invocation {
        name: "cap-vocab",
        args: &[
            "--set",
            "vocab_size=5",
            "cap-vocab",
            "{F}/tgt.txt",
            "--vocab",
            "{O}/vocab",
            "-o",
            "{O}/out",
        ],
        outputs: &["out", "vocab"],
    },
    Invocation {
        name: "select-testset",
        args: &[
            "--set",
            "seed=3",
            "select-testset",
            "--source",
            "{F}/src.txt",
            "--target",
            "{F}/tgt.txt",
            "--span-presence",
            "--spans",
            "{F}/spans.txt",
            "--take-random",
            "2",
            "--out-source",
            "{O}/s",
            "--out-target",
            "{O}/t",
            "--out-spans",
            "{O}/sp",
        ],
        outputs: &["s", "t", "sp"],
    },
    Invocation {
        name: "stats",
        args: &[
            "stats",
            "{F}/src.txt",
            "--subwords",
            "{F}/segmented.txt",
            "-o",
            "{O}/out",
        ],
        outputs: &["out"],
    },
    Invocation {
        name: "score",
        args: &[
            "score",
            "--hyp",
            "{F}/hyp_b.txt",
            "--ref",
            "{F}/ref.txt",
            "--sentence",
            "--json",
            "-o",
            "{O}/out",
        ],
        outputs: &["out"],
    },
    Invocation {
        name: "significance",
        args: &[
            "--set",
            "iterations=200",
            "significance",
            "--hyp-a",
            "{F}/hyp_a.txt",
            "--hyp-b",
            "{F}/hyp_b.txt",
            "--ref",
            "{F}/ref.txt",
            "--json",
            "-o",
            "{O}/out",
        ],
        outputs: &["out"],
    },
    Invocation {
        name: "backtranslate",
        args: &[
            "backtranslate",
            "{F}/tgt.txt",
            "--command",
            "tr a-z A-Z < {input} > {output}",
            "--out-source",
            "{O}/s",
            "--out-target",
            "{O}/t",
        ],
        outputs: &["s", "t"],
    },
    Invocation {
        name: "validate",
        args: &[
            "validate",
            "--source",
            "{F}/src.txt",
            "--target",
            "{F}/tgt.txt",
            "--align",
            "{F}/align.txt",
            "--spans",
            "{F}/spans.txt",
        ],
        outputs: &[],
    },
];

pub fn expand(args: &[&str], out_dir: &Path) -> Vec<String> {
    let f = fixtures().display().to_string();
    let o = out_dir.display().to_string();
    args.iter().map(|a| a.replace("{F}", &f).replace("{O}", &o)).collect()
}

/// Runs an invocation into `out_dir`; returns stdout followed by every
/// output file's bytes.
pub fn run_invocation(inv: &Invocation, out_dir: &Path) -> Vec<u8> {
    let out = rbmtkit(expand(inv.args, out_dir));
    assert!(out.status.success(), "{} failed: {}", inv.name, stderr(&out));
    let mut bytes = out.stdout.clone();
    for name in inv.outputs {
        bytes.extend(std::fs::read(out_dir.join(name)).unwrap_or_else(|e| panic!("{}: {name}: {e}", inv.name)));
    }
    bytes
}

/// Fewest edits over every sequence of at most two unrestricted shifts.
pub fn two_shift_oracle(h: &[&str], r: &[&str]) -> usize {
    fn one_shift<'a>(h: &[&'a str]) -> Vec<Vec<&'a str>> {
        let mut out = Vec::new();
        for start in 0..h.len() {
            for len in 1..=h.len() - start {
                for dest in 0..=h.len() - len {
                    if dest != start {
                        out.push(apply_shift(h, start, len, dest));
                    }
                }
            }
        }
        out
    }
    let mut best = levenshtein(h, r);
    for once in one_shift(h) {
        best = best.min(1 + levenshtein(&once, r));
        for twice in one_shift(&once) {
            best = best.min(2 + levenshtein(&twice, r));
        }
    }
    best
}
