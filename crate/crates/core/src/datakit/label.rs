use std::collections::BTreeSet;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{Label, LabelError};
use crate::frontend::{parse_unit, FunctionAst};

/// Support and library functions that do not count as user-defined calls.
const SUPPORT_FUNCTIONS: &[&str] = &[
    "abort", "atoi", "atol", "calloc", "exit", "fabs", "fclose", "fgets", "fopen", "free", "globalReturnsFalse",
    "globalReturnsTrue", "globalReturnsTrueOrFalse", "malloc", "memcpy", "memmove", "memset", "printDoubleLine",
    "printf", "printFloatLine", "printHexCharLine", "printIntLine", "printLine", "printLongLine",
    "printLongLongLine", "printSizeTLine", "printStructLine", "printUnsignedLine", "printWLine", "printWcharLine",
    "puts", "rand", "realloc", "snprintf", "sprintf", "sqrt", "srand", "strcat", "strcpy", "strlen", "strncat",
    "strncpy", "time", "wcscpy", "wcslen", "wcsncpy",
];

pub fn default_allowlist() -> BTreeSet<String> {
    SUPPORT_FUNCTIONS.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Sard,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledFunction {
    pub name: String,
    pub source: String,
    pub label: Label,
    pub cwe: String,
    pub origin: Origin,
    /// File the function came from, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
}

/// One translation unit's text and the path it is reported under.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub path: String,
    pub text: String,
}

fn tail(name: &str) -> &str {
    name.rsplit("::").next().unwrap_or(name)
}

/// True when `f` calls a function defined in its own translation unit that is
/// not on the support allowlist.
pub fn detect_user_defined_calls(
    f: &FunctionAst,
    unit_functions: &BTreeSet<String>,
    allowlist: &BTreeSet<String>,
) -> bool {
    f.callees.iter().any(|c| {
        let defined = unit_functions.contains(c) || unit_functions.iter().any(|u| tail(u) == c);
        defined && !allowlist.contains(c)
    })
}

fn naming_label(name: &str) -> (bool, bool) {
    let lower = name.to_ascii_lowercase();
    (lower.contains("bad"), lower.contains("good"))
}

/// Root functions of already-parsed units, labeled by name: `bad` or `good`
/// anywhere in the name, case-insensitively. Unmarked functions are dropped.
pub fn label_functions(
    units: &[(String, Vec<FunctionAst>)],
    cwe: impl Fn(&str) -> String,
    allowlist: &BTreeSet<String>,
) -> Result<Vec<LabeledFunction>, LabelError> {
    let mut out = Vec::new();
    for (path, functions) in units {
        let defined: BTreeSet<String> = functions.iter().map(|f| f.name.clone()).collect();
        for f in functions {
            let label = match naming_label(&f.name) {
                (true, true) => return Err(LabelError::Ambiguous { file: path.clone(), function: f.name.clone() }),
                (true, false) => Label::Bad,
                (false, true) => Label::Good,
                (false, false) => continue,
            };
            if detect_user_defined_calls(f, &defined, allowlist) {
                continue;
            }
            out.push(LabeledFunction {
                name: f.name.clone(),
                source: f.text.clone(),
                label,
                cwe: cwe(path),
                origin: Origin::Sard,
                file: Some(path.clone()),
            });
        }
    }
    Ok(out)
}

/// CWE tag taken from the first `CWE<digits>` run in a path, or "unknown".
fn cwe_from_path(path: &str) -> String {
    let upper = path.to_ascii_uppercase();
    let mut rest = upper.as_str();
    while let Some(i) = rest.find("CWE") {
        let digits: String = rest[i + 3..].chars().take_while(|c| c.is_ascii_digit()).collect();
        if !digits.is_empty() {
            return format!("CWE{digits}");
        }
        rest = &rest[i + 3..];
    }
    "unknown".to_string()
}

/// Parses and labels raw sources. Units that fail to parse are skipped with a warning.
pub fn label_sources(units: &[SourceUnit], allowlist: &BTreeSet<String>) -> Result<Vec<LabeledFunction>, LabelError> {
    let mut parsed = Vec::new();
    for u in units {
        match parse_unit(&u.text) {
            Ok(fs) => parsed.push((u.path.clone(), fs)),
            Err(e) => warn!("skipping {}: {e}", u.path),
        }
    }
    label_functions(&parsed, cwe_from_path, allowlist)
}
