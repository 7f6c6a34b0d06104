//! Query results and report emission: a human-readable table form and a
//! machine-readable JSON form with fixed key order. Identical scenarios
//! always produce byte-identical machine output.

use serde::{Deserialize, Serialize};

/// Everything a run produces, in scenario query order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: u32,
    pub scenario_digest: String,
    pub tolerance: f64,
    pub consistency_tolerance: f64,
    pub results: Vec<QueryResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    /// Canonical echo of the query, e.g. `probs family=F2 prune=true`.
    pub query: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<ResultValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<QueryError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryError {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResultValue {
    Probs(ProbTable),
    Conditional(ConditionalResult),
    Consistency(ConsistencyResult),
    Compat(CompatResult),
    Refine(RefineResult),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbTable {
    pub family: String,
    pub pruned: bool,
    pub dropped_mass: f64,
    pub total: f64,
    pub entries: Vec<ProbEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbEntry {
    pub history: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalResult {
    pub family: String,
    pub target: String,
    pub given: String,
    pub probability: f64,
    pub given_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyResult {
    pub family: String,
    pub consistent: bool,
    pub worst_off_diagonal: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offending: Option<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatResult {
    pub left: String,
    pub right: String,
    pub compatible: bool,
    /// `commutation` or `merged_consistency`.
    pub checked_by: String,
    pub worst: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offending: Option<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineResult {
    pub left: String,
    pub right: String,
    pub labels: Vec<String>,
    pub ranks: Vec<usize>,
}

impl Report {
    pub fn has_errors(&self) -> bool {
        self.results.iter().any(|r| r.error.is_some())
    }

    /// Machine form: structured JSON, fixed key order, newline-terminated.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Report, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Human form: aligned tables, probabilities to 12 significant digits,
    /// values below `display_tol` printed as 0 with the raw value attached.
    pub fn to_human(&self, display_tol: f64) -> String {
        let mut out = String::new();
        out.push_str("chq report\n");
        out.push_str(&format!("scenario digest: {}\n", self.scenario_digest));
        out.push_str(&format!(
            "tolerance: {:e}   consistency tolerance: {:e}\n",
            self.tolerance, self.consistency_tolerance
        ));
        if self.results.is_empty() {
            out.push_str("0 queries\n");
            return out;
        }
        out.push_str(&format!("{} queries\n", self.results.len()));
        for (i, r) in self.results.iter().enumerate() {
            out.push('\n');
            out.push_str(&format!("[{}] {}\n", i + 1, r.query));
            if let Some(err) = &r.error {
                out.push_str(&format!("    ERROR {}: {}\n", err.kind, err.message));
                continue;
            }
            match r.result.as_ref().expect("result or error") {
                ResultValue::Probs(t) => {
                    let width = t
                        .entries
                        .iter()
                        .map(|e| e.history.len())
                        .max()
                        .unwrap_or(7)
                        .max(7);
                    out.push_str(&format!("    {:width$}  probability\n", "history"));
                    for e in &t.entries {
                        out.push_str(&format!(
                            "    {:width$}  {}\n",
                            e.history,
                            fmt_prob(e.probability, display_tol)
                        ));
                    }
                    out.push_str(&format!("    total {}", fmt_sig(t.total)));
                    if t.pruned {
                        out.push_str(&format!(
                            "   (pruned; dropped mass {})",
                            fmt_sig(t.dropped_mass)
                        ));
                    }
                    out.push('\n');
                }
                ResultValue::Conditional(c) => {
                    out.push_str(&format!(
                        "    Pr({} | {}) = {}   (Pr[given] = {})\n",
                        c.target,
                        c.given,
                        fmt_prob(c.probability, display_tol),
                        fmt_prob(c.given_probability, display_tol)
                    ));
                }
                ResultValue::Consistency(c) => {
                    let verdict = if c.consistent {
                        "consistent"
                    } else {
                        "INCONSISTENT"
                    };
                    out.push_str(&format!(
                        "    {} (worst off-diagonal {}",
                        verdict,
                        fmt_sig(c.worst_off_diagonal)
                    ));
                    if let Some((a, b)) = &c.offending {
                        if !c.consistent {
                            out.push_str(&format!(", between `{a}` and `{b}`"));
                        }
                    }
                    out.push_str(")\n");
                }
                ResultValue::Compat(c) => {
                    let verdict = if c.compatible {
                        "compatible"
                    } else {
                        "INCOMPATIBLE"
                    };
                    out.push_str(&format!(
                        "    {} (checked by {}, worst {}",
                        verdict,
                        c.checked_by,
                        fmt_sig(c.worst)
                    ));
                    if let Some((a, b)) = &c.offending {
                        if !c.compatible {
                            out.push_str(&format!(", between `{a}` and `{b}`"));
                        }
                    }
                    out.push_str(")\n");
                }
                ResultValue::Refine(rf) => {
                    out.push_str(&format!(
                        "    refinement of {} and {}: {} projectors\n",
                        rf.left,
                        rf.right,
                        rf.labels.len()
                    ));
                    let width = rf.labels.iter().map(String::len).max().unwrap_or(5).max(5);
                    out.push_str(&format!("    {:width$}  rank\n", "label"));
                    for (l, k) in rf.labels.iter().zip(&rf.ranks) {
                        out.push_str(&format!("    {:width$}  {k}\n", l));
                    }
                }
            }
        }
        out
    }
}

/// 12 significant digits; plain decimal where reasonable, scientific
/// otherwise.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.11e}", x);
    let (_, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..12).contains(&exp) {
        format!("{:.*}", (11 - exp).max(0) as usize, x)
    } else {
        sci
    }
}

/// Probabilities below the display tolerance print as exact 0 with the raw
/// value annotated.
pub fn fmt_prob(x: f64, display_tol: f64) -> String {
    if x != 0.0 && x.abs() < display_tol {
        format!("0 (raw {x:.3e})")
    } else {
        fmt_sig(x)
    }
}
