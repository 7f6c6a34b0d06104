//! Framework compatibility and the single framework rule.
//!
//! Two PDIs are compatible when every projector of one commutes with every
//! projector of the other; only then do they possess a common refinement
//! (all nonzero products P_jQ_k) and only then may their descriptions be
//! combined. Incompatible combinations are refused with a report — never
//! merged silently.

use std::sync::Arc;

use thiserror::Error;

use crate::hilbert::{HilbertError, Pdi, Projector};
use crate::histories::{HistoryError, HistoryFamily};
use crate::linalg::Tolerance;

#[derive(Debug, Error)]
pub enum FrameworkError {
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error("PDIs live on different spaces")]
    SpaceMismatch,
    #[error("families use different schedules or initial data")]
    ScheduleMismatch,
    #[error(
        "single framework rule: incompatible frameworks cannot be combined \
         (worst commutator {worst:.3e}{pair})",
        worst = report.worst,
        pair = report
            .offending
            .as_ref()
            .map(|(a, b)| format!(", between `{a}` and `{b}`"))
            .unwrap_or_default()
    )]
    Incompatible { report: CompatibilityReport },
}

/// How a compatibility verdict was reached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CompatibilityKind {
    /// Pairwise commutators of two PDIs.
    Commutation,
    /// Commutation passed but the merged family failed the consistency check.
    MergedConsistency,
}

/// Verdict of a compatibility check, with the worst violating magnitude:
/// a commutator max-norm, or the worst decoherence off-diagonal when the
/// verdict comes from the merged-family consistency check.
#[derive(Debug, Clone)]
pub struct CompatibilityReport {
    pub compatible: bool,
    pub worst: f64,
    pub offending: Option<(String, String)>,
    pub kind: CompatibilityKind,
}

/// Check [P_j, Q_k] = 0 for every pair, to max-norm tolerance.
pub fn pdis_compatible(
    p: &Pdi,
    q: &Pdi,
    tol: Tolerance,
) -> Result<CompatibilityReport, FrameworkError> {
    if **p.space() != **q.space() {
        return Err(FrameworkError::SpaceMismatch);
    }
    let mut worst = 0.0_f64;
    let mut offending = None;
    for pj in p.projectors() {
        for qk in q.projectors() {
            let norm = pj
                .matrix()
                .commutator(qk.matrix())
                .map_err(HilbertError::from)?
                .max_norm();
            if norm > worst {
                worst = norm;
                offending = Some((pj.label().to_string(), qk.label().to_string()));
            }
        }
    }
    Ok(CompatibilityReport {
        compatible: worst <= tol.eps,
        worst,
        offending,
        kind: CompatibilityKind::Commutation,
    })
}

/// Common refinement of two compatible PDIs: all products P_jQ_k with
/// nonzero trace, labeled `Pj∧Qk`. Incompatible inputs are refused — this
/// is the single-framework-rule enforcement point.
pub fn common_refinement(p: &Pdi, q: &Pdi, tol: Tolerance) -> Result<Pdi, FrameworkError> {
    let report = pdis_compatible(p, q, tol)?;
    if !report.compatible {
        return Err(FrameworkError::Incompatible { report });
    }
    let mut elements = Vec::new();
    for pj in p.projectors() {
        for qk in q.projectors() {
            let product = pj
                .matrix()
                .matmul(qk.matrix())
                .map_err(HilbertError::from)?;
            if product.trace().re <= tol.eps {
                continue;
            }
            let label = if p.len() == 1 || pj.label() == qk.label() {
                qk.label().to_string()
            } else if q.len() == 1 {
                pj.label().to_string()
            } else {
                format!("{}∧{}", pj.label(), qk.label())
            };
            elements.push(Projector::new(pj.space(), product, label, tol)?);
        }
    }
    Ok(Pdi::new(elements, tol)?)
}

/// Compatibility of two multi-time families: the per-time PDIs must commute
/// at every shared event time, and the merged family (pointwise common
/// refinements) must itself pass the consistency check at `consistency_tol`.
pub fn families_compatible(
    f: &HistoryFamily,
    g: &HistoryFamily,
    tol: Tolerance,
    consistency_tol: f64,
) -> Result<CompatibilityReport, FrameworkError> {
    let same_schedule = Arc::ptr_eq(f.schedule(), g.schedule())
        || (f.schedule().space() == g.schedule().space()
            && f.schedule().grid() == g.schedule().grid()
            && f.schedule()
                .steps()
                .iter()
                .zip(g.schedule().steps())
                .all(|(a, b)| a.max_abs_diff(b) <= tol.eps));
    if !same_schedule
        || f.initial_state().max_abs_diff(g.initial_state()) > tol.eps
        || f.initial_projector()
            .matrix()
            .max_abs_diff(g.initial_projector().matrix())
            > tol.eps
    {
        return Err(FrameworkError::ScheduleMismatch);
    }

    // Pointwise commutation, then pointwise refinement.
    let mut merged_events: Vec<(usize, Pdi)> = Vec::new();
    let mut times: Vec<usize> = f
        .event_times()
        .iter()
        .chain(g.event_times())
        .copied()
        .collect();
    times.sort_unstable();
    times.dedup();
    for t in times {
        let in_f = f.event_times().iter().position(|&et| et == t);
        let in_g = g.event_times().iter().position(|&et| et == t);
        let merged = match (in_f, in_g) {
            (Some(kf), Some(kg)) => {
                let pf = &f.pdis()[kf];
                let pg = &g.pdis()[kg];
                let report = pdis_compatible(pf, pg, tol)?;
                if !report.compatible {
                    return Ok(report);
                }
                common_refinement(pf, pg, tol)?
            }
            (Some(kf), None) => f.pdis()[kf].clone(),
            (None, Some(kg)) => g.pdis()[kg].clone(),
            (None, None) => unreachable!(),
        };
        merged_events.push((t, merged));
    }

    let merged = HistoryFamily::new(
        format!("{}∨{}", f.label(), g.label()),
        Arc::clone(f.schedule()),
        f.initial_projector().clone(),
        f.initial_state().clone(),
        merged_events,
        tol,
    )?;
    let consistency = merged.check_consistency(consistency_tol)?;
    Ok(CompatibilityReport {
        compatible: consistency.consistent,
        worst: consistency.worst,
        offending: consistency.offending,
        kind: CompatibilityKind::MergedConsistency,
    })
}

/// Convenience: merged-family construction for callers that want the
/// refined family itself, not just the verdict.
pub fn merge_families(
    f: &HistoryFamily,
    g: &HistoryFamily,
    tol: Tolerance,
    consistency_tol: f64,
) -> Result<HistoryFamily, FrameworkError> {
    let report = families_compatible(f, g, tol, consistency_tol)?;
    if !report.compatible {
        return Err(FrameworkError::Incompatible { report });
    }
    let mut merged_events: Vec<(usize, Pdi)> = Vec::new();
    let mut times: Vec<usize> = f
        .event_times()
        .iter()
        .chain(g.event_times())
        .copied()
        .collect();
    times.sort_unstable();
    times.dedup();
    for t in times {
        let in_f = f.event_times().iter().position(|&et| et == t);
        let in_g = g.event_times().iter().position(|&et| et == t);
        let merged = match (in_f, in_g) {
            (Some(kf), Some(kg)) => common_refinement(&f.pdis()[kf], &g.pdis()[kg], tol)?,
            (Some(kf), None) => f.pdis()[kf].clone(),
            (None, Some(kg)) => g.pdis()[kg].clone(),
            (None, None) => unreachable!(),
        };
        merged_events.push((t, merged));
    }
    Ok(HistoryFamily::new(
        format!("{}∨{}", f.label(), g.label()),
        Arc::clone(f.schedule()),
        f.initial_projector().clone(),
        f.initial_state().clone(),
        merged_events,
        tol,
    )?)
}
