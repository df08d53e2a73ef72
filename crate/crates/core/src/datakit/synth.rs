//! Seeded good/bad function pairs in the style of the Juliet test cases.
//!
//! Each pair shares its identifiers, literals and filler statements. The good
//! variant adds exactly one guarding control structure around the flawed
//! operation.

use std::collections::BTreeMap;
use std::fmt::{self, Write};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::label::{LabeledFunction, Origin};
use super::manifest::{DatasetManifest, ManifestEntry};
use super::Label;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cwe {
    DivideZero,
    NullDeref,
    StackOverflow,
}

impl Cwe {
    pub const ALL: [Cwe; 3] = [Cwe::DivideZero, Cwe::NullDeref, Cwe::StackOverflow];

    pub fn tag(self) -> &'static str {
        match self {
            Cwe::DivideZero => "CWE369",
            Cwe::NullDeref => "CWE476",
            Cwe::StackOverflow => "CWE121",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Cwe::DivideZero => "divide_zero",
            Cwe::NullDeref => "null_deref",
            Cwe::StackOverflow => "stack_overflow",
        }
    }
}

impl fmt::Display for Cwe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Cwe {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Cwe::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown CWE template `{s}` (expected divide_zero, null_deref or stack_overflow)"))
    }
}

const VALUE_NAMES: &[&str] = &["data", "value", "input", "amount", "divisor", "number", "level", "factor", "ratio"];
const PARAM_NAMES: &[&str] = &["Data", "Input", "Value", "Param", "Source", "Arg"];
const RESULT_NAMES: &[&str] = &["result", "quotient", "output", "scaled", "answer"];
const POINTER_NAMES: &[&str] = &["ptr", "buffer", "cell", "slot", "node", "mem"];
const ARRAY_NAMES: &[&str] = &["buf", "table", "arr", "items", "block", "storage"];
const INDEX_NAMES: &[&str] = &["idx", "pos", "offset", "where", "slot"];
const LOOP_NAMES: &[&str] = &["i", "j", "k", "n"];
const MESSAGES: &[&str] = &["Benign, fixed string", "Starting operation", "Finished setup", "Checking state", "Done"];

struct Ctx<'r> {
    rng: &'r mut ChaCha8Rng,
}

impl Ctx<'_> {
    fn pick(&mut self, pool: &[&'static str]) -> &'static str {
        pool.choose(self.rng).copied().expect("non-empty pool")
    }

    /// A name from `pool` not already in `taken`.
    fn fresh(&mut self, pool: &[&'static str], taken: &mut Vec<&'static str>) -> &'static str {
        let free: Vec<&'static str> = pool.iter().copied().filter(|n| !taken.contains(n)).collect();
        let name = free.choose(self.rng).copied().expect("pool larger than names taken");
        taken.push(name);
        name
    }

    fn filler(&mut self, k: usize) -> String {
        match self.rng.gen_range(0..5) {
            0 => format!("int tmp{k} = {};\nprintIntLine(tmp{k} + {});\n", self.rng.gen_range(0..500), self.rng.gen_range(1..9)),
            1 => format!("printLine(\"{}\");\n", self.pick(MESSAGES)),
            2 => format!("char ch{k} = '{}';\nprintHexCharLine(ch{k});\n", (b'a' + self.rng.gen_range(0..26)) as char),
            3 => format!("long total{k} = {}L;\nprintLongLine(total{k});\n", self.rng.gen_range(1000..100000)),
            _ => format!("double scale{k} = {}.{};\nprintDoubleLine(scale{k} * 2.0);\n", self.rng.gen_range(0..50), self.rng.gen_range(1..99)),
        }
    }

    fn fillers(&mut self, start: usize, max: usize) -> Vec<String> {
        let n = self.rng.gen_range(0..=max);
        (start..start + n).map(|k| self.filler(k)).collect()
    }
}

struct Pair {
    bad: String,
    good: String,
}

fn function(storage: &str, name: &str, params: &str, head: &str, body: &str, tail: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{storage}void {name}({params})\n{{");
    for part in [head, body, tail] {
        s.push_str(part);
    }
    s.push_str("}\n");
    s
}

fn divide_zero(cx: &mut Ctx<'_>, name: &str, pre: &str, post: &str) -> Pair {
    let mut taken = Vec::new();
    let param = cx.fresh(PARAM_NAMES, &mut taken);
    let v = cx.fresh(VALUE_NAMES, &mut taken);
    let r = cx.fresh(RESULT_NAMES, &mut taken);
    let storage = if cx.rng.gen_bool(0.5) { "static " } else { "" };
    let numerator = cx.rng.gen_range(2..1000);
    let (ty, compute, guard) = match cx.rng.gen_range(0..3) {
        0 => ("float", format!("int {r} = (int)({numerator}.0/{v});"), format!("if(fabs({v}) > 0.000001)")),
        1 => ("double", format!("int {r} = (int)({numerator}.0/{v});"), format!("if(fabs({v}) > 0.000001)")),
        _ => ("int", format!("int {r} = {numerator} / {v};"), format!("if({v} != 0)")),
    };
    let head = format!("{ty} {v} = {param};\n{pre}");
    let params = format!("{ty} {param}");
    let flawed = format!("{compute}\nprintIntLine({r});\n");
    let bad_body = format!("{{\n/* POTENTIAL FLAW: Possibly divide by zero */\n{flawed}}}\n");
    let good_body = format!(
        "{guard}\n{{\n{flawed}}}\nelse\n{{\nprintLine(\"This would result in a divide by zero\");\n}}\n"
    );
    Pair {
        bad: function(storage, &format!("{name}_bad"), &params, &head, &bad_body, post),
        good: function(storage, &format!("{name}_good"), &params, &head, &good_body, post),
    }
}

fn null_deref(cx: &mut Ctx<'_>, name: &str, pre: &str, post: &str) -> Pair {
    let mut taken = Vec::new();
    let p = cx.fresh(POINTER_NAMES, &mut taken);
    let count = cx.fresh(VALUE_NAMES, &mut taken);
    let (ty, print, lit) = match cx.rng.gen_range(0..3) {
        0 => ("int", "printIntLine", cx.rng.gen_range(1..500).to_string()),
        1 => ("long", "printLongLine", format!("{}L", cx.rng.gen_range(1..50000))),
        _ => ("double", "printDoubleLine", format!("{}.5", cx.rng.gen_range(0..100))),
    };
    let head = format!("{ty} * {p} = NULL;\n{pre}{p} = ({ty} *)malloc({count} * sizeof({ty}));\n");
    let params = format!("int {count}");
    let use_it = format!("{p}[0] = {lit};\n{print}({p}[0]);\n");
    let bad_body = format!("/* FLAW: malloc result is not checked */\n{use_it}");
    let good_body = format!("if ({p} != NULL)\n{{\n{use_it}}}\n");
    let tail = format!("free({p});\n{post}");
    Pair {
        bad: function("", &format!("{name}_bad"), &params, &head, &bad_body, &tail),
        good: function("", &format!("{name}_good"), &params, &head, &good_body, &tail),
    }
}

fn stack_overflow(cx: &mut Ctx<'_>, name: &str, pre: &str, post: &str) -> Pair {
    let mut taken = Vec::new();
    let buf = cx.fresh(ARRAY_NAMES, &mut taken);
    let idx = cx.fresh(INDEX_NAMES, &mut taken);
    let i = cx.pick(LOOP_NAMES);
    let size = cx.rng.gen_range(4..64);
    let lit = cx.rng.gen_range(1..1000);
    let init = if cx.rng.gen_bool(0.5) {
        format!("for ({i} = 0; {i} < {size}; {i}++)\n{{\n{buf}[{i}] = 0;\n}}\n")
    } else {
        format!("memset({buf}, 0, {size} * sizeof(int));\n")
    };
    let head = format!("int {i};\nint {buf}[{size}];\n{pre}{init}");
    let params = format!("int {idx}");
    let write = format!("{buf}[{idx}] = {lit};\nprintIntLine({buf}[{idx}]);\n");
    let bad_body = format!("/* POTENTIAL FLAW: index is not range-checked */\n{write}");
    let good_body = format!(
        "if ({idx} >= 0 && {idx} < {size})\n{{\n{write}}}\nelse\n{{\nprintLine(\"ERROR: Array index is out-of-bounds\");\n}}\n"
    );
    Pair {
        bad: function("", &format!("{name}_bad"), &params, &head, &bad_body, post),
        good: function("", &format!("{name}_good"), &params, &head, &good_body, post),
    }
}

/// `n_pairs` bad/good pairs (bad first within each pair), deterministic in `seed`.
pub fn synth_generate(cwe: Cwe, n_pairs: usize, seed: u64) -> Vec<LabeledFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(2 * n_pairs);
    for n in 0..n_pairs {
        let mut cx = Ctx { rng: &mut rng };
        let stem = format!("{}_{}_{:04}", cwe.tag(), cwe.as_str(), n);
        let pre = cx.fillers(0, 2).concat();
        let post = cx.fillers(2, 2).concat();
        let pair = match cwe {
            Cwe::DivideZero => divide_zero(&mut cx, &stem, &pre, &post),
            Cwe::NullDeref => null_deref(&mut cx, &stem, &pre, &post),
            Cwe::StackOverflow => stack_overflow(&mut cx, &stem, &pre, &post),
        };
        for (label, source) in [(Label::Bad, pair.bad), (Label::Good, pair.good)] {
            out.push(LabeledFunction {
                name: format!("{stem}_{label}"),
                source,
                label,
                cwe: cwe.tag().to_string(),
                origin: Origin::Synthetic,
                file: Some(format!("{stem}.c")),
            });
        }
    }
    out
}

/// Writes functions grouped by file into `dir` together with `manifest.json`.
pub fn write_corpus(dir: &Path, functions: &[LabeledFunction]) -> crate::Result<DatasetManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: BTreeMap<String, String> = BTreeMap::new();
    let mut entries = Vec::with_capacity(functions.len());
    for f in functions {
        let file = f.file.clone().unwrap_or_else(|| format!("{}.c", f.name));
        let text = files.entry(file.clone()).or_default();
        if !text.is_empty() {
            text.push('\n');
        }
        text.push_str(&f.source);
        entries.push(ManifestEntry { file, function: f.name.clone(), label: f.label, cwe: f.cwe.clone() });
    }
    for (name, text) in &files {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    let mut manifest = DatasetManifest::new(entries);
    manifest.save(&dir.join("manifest.json"))?;
    manifest.base_dir = dir.to_path_buf();
    Ok(manifest)
}
