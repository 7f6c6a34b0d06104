//! History families and the extended Born rule.
//!
//! A history is an initial projector followed by projectors at later grid
//! times; its chain operator interleaves those projectors with the interval
//! unitaries. The decoherence functional D(i,j) = ⟨ψ₀|K_i†K_j|ψ₀⟩ decides
//! whether a family is consistent (all off-diagonals vanish to tolerance,
//! the medium-decoherence condition); only then are the diagonal weights
//! handed out as probabilities.
//!
//! Family evaluation is independent per history; results are always
//! reported in history-index order.

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::dynamics::{DynamicsError, UnitarySchedule};
use crate::hilbert::{HilbertError, Pdi, Projector};
use crate::linalg::{ComplexMatrix, ComplexVector, LinalgError, Tolerance};

/// Default tolerance for consistency checks: looser than the algebraic
/// tolerance to absorb accumulated matrix-product error.
pub const DEFAULT_CONSISTENCY_TOL: f64 = 1e-8;

/// Ceiling on the history count of one family (Cartesian product of the
/// per-time PDI sizes).
pub const MAX_HISTORIES: usize = 4096;

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("history/family objects live on different spaces ({0})")]
    SpaceMismatch(&'static str),
    #[error("initial state is not normalized: ‖ψ₀‖² = {norm_sqr}")]
    UnnormalizedState { norm_sqr: f64 },
    #[error("initial state is not supported by the initial projector: residual {residual:.3e}")]
    InitialSupport { residual: f64 },
    #[error("event time {t} outside 1..={n}")]
    EventTimeOutOfRange { t: usize, n: usize },
    #[error("more than one event at time index {0}")]
    DuplicateEventTime(usize),
    #[error("event times must be strictly increasing")]
    UnsortedEventTimes,
    #[error("family would contain {count} histories (cap {cap})")]
    TooManyHistories { count: usize, cap: usize },
    #[error("the PDI at time {0} is incomplete; families are built from full PDIs")]
    IncompletePdi(usize),
    #[error("family `{}` is inconsistent: worst off-diagonal {:.3e} > {tol:.1e}", report.family, report.worst)]
    Inconsistent { report: ConsistencyReport, tol: f64 },
    #[error("no event time {0} in this family")]
    UnknownEventTime(usize),
    #[error("no projector labeled `{label}` at time {t} in this family")]
    UnknownEventLabel { t: usize, label: String },
    #[error("conditioning event has probability {prob:.3e} ≤ {tol:.1e}; conditional undefined")]
    ZeroConditioningEvent { prob: f64, tol: f64 },
    #[error("pruning removed every projector at time {0}")]
    PruneEmptied(usize),
    #[error("history index {index} out of range ({count} histories)")]
    HistoryIndex { index: usize, count: usize },
}

/// One history: an initial projector and an ordered set of later events.
#[derive(Debug, Clone)]
pub struct History {
    initial: Projector,
    events: Vec<(usize, Projector)>,
    label: String,
}

impl History {
    pub fn new(
        initial: Projector,
        events: Vec<(usize, Projector)>,
        label: impl Into<String>,
    ) -> Result<Self, HistoryError> {
        for (i, (t, p)) in events.iter().enumerate() {
            if *t == 0 {
                return Err(HistoryError::EventTimeOutOfRange { t: *t, n: 0 });
            }
            if i > 0 {
                let prev = events[i - 1].0;
                if *t == prev {
                    return Err(HistoryError::DuplicateEventTime(*t));
                }
                if *t < prev {
                    return Err(HistoryError::UnsortedEventTimes);
                }
            }
            if p.space() != initial.space() && **p.space() != **initial.space() {
                return Err(HistoryError::SpaceMismatch("history events"));
            }
        }
        Ok(History {
            initial,
            events,
            label: label.into(),
        })
    }

    pub fn initial(&self) -> &Projector {
        &self.initial
    }

    pub fn events(&self) -> &[(usize, Projector)] {
        &self.events
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn event_at(&self, t: usize) -> Option<&Projector> {
        self.events.iter().find(|(et, _)| *et == t).map(|(_, p)| p)
    }

    /// Chain operator K = F_{t_n} U(t_{n−1}→t_n) ⋯ F_{t_1} U(t_0→t_1) P_init,
    /// with identity projectors at unconstrained times, over the full grid.
    pub fn chain_operator(
        &self,
        schedule: &UnitarySchedule,
    ) -> Result<ComplexMatrix, HistoryError> {
        self.check_schedule(schedule)?;
        let mut k = self.initial.matrix().clone();
        for t in 1..=schedule.n_intervals() {
            k = schedule.steps()[t - 1].matmul(&k)?;
            if let Some(p) = self.event_at(t) {
                k = p.matrix().matmul(&k)?;
            }
        }
        Ok(k)
    }

    /// K(h)|ψ⟩ computed by sequential matrix-vector products.
    pub fn chain_state(
        &self,
        schedule: &UnitarySchedule,
        state: &ComplexVector,
    ) -> Result<ComplexVector, HistoryError> {
        self.check_schedule(schedule)?;
        let mut phi = self.initial.matrix().mul_vec(state)?;
        for t in 1..=schedule.n_intervals() {
            phi = schedule.steps()[t - 1].mul_vec(&phi)?;
            if let Some(p) = self.event_at(t) {
                phi = p.matrix().mul_vec(&phi)?;
            }
        }
        Ok(phi)
    }

    /// Extended-Born weight w = ‖K(h)|ψ₀⟩‖² for a normalized initial state.
    pub fn weight(
        &self,
        schedule: &UnitarySchedule,
        state: &ComplexVector,
        tol: Tolerance,
    ) -> Result<f64, HistoryError> {
        let norm_sqr = state.norm_sqr();
        if (norm_sqr - 1.0).abs() > tol.eps {
            return Err(HistoryError::UnnormalizedState { norm_sqr });
        }
        Ok(self.chain_state(schedule, state)?.norm_sqr())
    }

    fn check_schedule(&self, schedule: &UnitarySchedule) -> Result<(), HistoryError> {
        if **self.initial.space() != **schedule.space() {
            return Err(HistoryError::SpaceMismatch("history vs schedule"));
        }
        let n = schedule.n_intervals();
        if let Some((t, _)) = self.events.iter().find(|(t, _)| *t > n) {
            return Err(HistoryError::EventTimeOutOfRange { t: *t, n });
        }
        Ok(())
    }
}

/// Verdict of a consistency check.
#[derive(Debug, Clone)]
pub struct ConsistencyReport {
    pub family: String,
    pub consistent: bool,
    /// Largest |D(i,j)| over i ≠ j.
    pub worst: f64,
    /// History labels realizing the worst off-diagonal, if any pair exists.
    pub offending: Option<(String, String)>,
}

/// Probabilities assigned to the histories of a consistent family, in
/// history-index order.
#[derive(Debug, Clone)]
pub struct WeightTable {
    pub family: String,
    pub entries: Vec<(String, f64)>,
}

impl WeightTable {
    pub fn get(&self, label: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, w)| *w)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w).sum()
    }
}

/// Conjunction of per-time element constraints, e.g. `z+@t1 ∧ Da*@t3`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventPredicate {
    pub constraints: Vec<(usize, String)>,
}

impl EventPredicate {
    pub fn single(t: usize, label: impl Into<String>) -> Self {
        EventPredicate {
            constraints: vec![(t, label.into())],
        }
    }
}

/// A family of histories: one full PDI per event time over a fixed
/// schedule and pure initial state; the histories are every tuple drawn
/// from the per-time PDIs.
#[derive(Debug, Clone)]
pub struct HistoryFamily {
    label: String,
    schedule: Arc<UnitarySchedule>,
    initial_projector: Projector,
    initial_state: ComplexVector,
    event_times: Vec<usize>,
    pdis: Vec<Pdi>,
    pruned: bool,
    dropped_mass: f64,
}

impl HistoryFamily {
    pub fn new(
        label: impl Into<String>,
        schedule: Arc<UnitarySchedule>,
        initial_projector: Projector,
        initial_state: ComplexVector,
        events: Vec<(usize, Pdi)>,
        tol: Tolerance,
    ) -> Result<Self, HistoryError> {
        let label = label.into();
        let space = schedule.space();
        if **initial_projector.space() != **space {
            return Err(HistoryError::SpaceMismatch("initial projector"));
        }
        let norm_sqr = initial_state.norm_sqr();
        if (norm_sqr - 1.0).abs() > tol.eps {
            return Err(HistoryError::UnnormalizedState { norm_sqr });
        }
        let projected = initial_projector.matrix().mul_vec(&initial_state)?;
        let residual = projected.max_abs_diff(&initial_state);
        if residual > 10.0 * tol.eps {
            return Err(HistoryError::InitialSupport { residual });
        }

        let n = schedule.n_intervals();
        let mut event_times = Vec::with_capacity(events.len());
        let mut pdis = Vec::with_capacity(events.len());
        let mut count = 1usize;
        for (i, (t, pdi)) in events.into_iter().enumerate() {
            if t == 0 || t > n {
                return Err(HistoryError::EventTimeOutOfRange { t, n });
            }
            if i > 0 {
                let prev = event_times[i - 1];
                if t == prev {
                    return Err(HistoryError::DuplicateEventTime(t));
                }
                if t < prev {
                    return Err(HistoryError::UnsortedEventTimes);
                }
            }
            if **pdi.space() != **space {
                return Err(HistoryError::SpaceMismatch("family PDI"));
            }
            if !pdi.is_complete() {
                return Err(HistoryError::IncompletePdi(t));
            }
            count = count.saturating_mul(pdi.len());
            if count > MAX_HISTORIES {
                return Err(HistoryError::TooManyHistories {
                    count,
                    cap: MAX_HISTORIES,
                });
            }
            event_times.push(t);
            pdis.push(pdi);
        }
        Ok(HistoryFamily {
            label,
            schedule,
            initial_projector,
            initial_state,
            event_times,
            pdis,
            pruned: false,
            dropped_mass: 0.0,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn schedule(&self) -> &Arc<UnitarySchedule> {
        &self.schedule
    }

    pub fn initial_projector(&self) -> &Projector {
        &self.initial_projector
    }

    pub fn initial_state(&self) -> &ComplexVector {
        &self.initial_state
    }

    pub fn event_times(&self) -> &[usize] {
        &self.event_times
    }

    pub fn pdis(&self) -> &[Pdi] {
        &self.pdis
    }

    pub fn is_pruned(&self) -> bool {
        self.pruned
    }

    /// Total weight removed by pruning (0 for an unpruned family).
    pub fn dropped_mass(&self) -> f64 {
        self.dropped_mass
    }

    pub fn len(&self) -> usize {
        self.pdis.iter().map(Pdi::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-time element indices of history `index`, most significant first.
    fn multi_index(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0usize; self.pdis.len()];
        for (k, pdi) in self.pdis.iter().enumerate().rev() {
            out[k] = index % pdi.len();
            index /= pdi.len();
        }
        out
    }

    /// Canonical label, e.g. `w2a@t2,Da*@t3`; the bare initial label when
    /// the family has no events.
    pub fn history_label(&self, index: usize) -> String {
        let mi = self.multi_index(index);
        if mi.is_empty() {
            return self.initial_projector.label().to_string();
        }
        mi.iter()
            .enumerate()
            .map(|(k, &e)| {
                format!(
                    "{}@t{}",
                    self.pdis[k].projectors()[e].label(),
                    self.event_times[k]
                )
            })
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn history_labels(&self) -> Vec<String> {
        (0..self.len()).map(|i| self.history_label(i)).collect()
    }

    /// Materialize history `index` as a standalone [`History`].
    pub fn history(&self, index: usize) -> Result<History, HistoryError> {
        if index >= self.len() {
            return Err(HistoryError::HistoryIndex {
                index,
                count: self.len(),
            });
        }
        let mi = self.multi_index(index);
        let events = mi
            .iter()
            .enumerate()
            .map(|(k, &e)| (self.event_times[k], self.pdis[k].projectors()[e].clone()))
            .collect();
        History::new(
            self.initial_projector.clone(),
            events,
            self.history_label(index),
        )
    }

    /// K_i|ψ₀⟩ for every history, in index order.
    pub fn chain_states(&self) -> Result<Vec<ComplexVector>, HistoryError> {
        let n = self.schedule.n_intervals();
        let count = self.len();
        let mut out = Vec::with_capacity(count);
        for index in 0..count {
            let mi = self.multi_index(index);
            let mut phi = self
                .initial_projector
                .matrix()
                .mul_vec(&self.initial_state)?;
            for t in 1..=n {
                phi = self.schedule.steps()[t - 1].mul_vec(&phi)?;
                if let Some(k) = self.event_times.iter().position(|&et| et == t) {
                    phi = self.pdis[k].projectors()[mi[k]].matrix().mul_vec(&phi)?;
                }
            }
            out.push(phi);
        }
        Ok(out)
    }

    /// D(i,j) = ⟨ψ₀|K_i†K_j|ψ₀⟩.
    pub fn decoherence_functional(&self, i: usize, j: usize) -> Result<Complex64, HistoryError> {
        let count = self.len();
        for index in [i, j] {
            if index >= count {
                return Err(HistoryError::HistoryIndex { index, count });
            }
        }
        let phi_i = self
            .history(i)?
            .chain_state(&self.schedule, &self.initial_state)?;
        let phi_j = self
            .history(j)?
            .chain_state(&self.schedule, &self.initial_state)?;
        Ok(phi_i.inner(&phi_j)?)
    }

    /// Medium-decoherence check: consistent iff max_{i≠j} |D(i,j)| ≤ tol.
    pub fn check_consistency(&self, tol: f64) -> Result<ConsistencyReport, HistoryError> {
        let states = self.chain_states()?;
        let mut worst = 0.0_f64;
        let mut offending = None;
        for i in 0..states.len() {
            for j in (i + 1)..states.len() {
                let d = states[i].inner(&states[j])?.norm();
                if d > worst {
                    worst = d;
                    offending = Some((self.history_label(i), self.history_label(j)));
                }
            }
        }
        Ok(ConsistencyReport {
            family: self.label.clone(),
            consistent: worst <= tol,
            worst,
            offending,
        })
    }

    /// Extended Born rule: diagonal weights of a consistent family.
    /// Refused (with the report) when the family fails the check.
    pub fn assign_probabilities(&self, tol: f64) -> Result<WeightTable, HistoryError> {
        let report = self.check_consistency(tol)?;
        if !report.consistent {
            return Err(HistoryError::Inconsistent { report, tol });
        }
        let states = self.chain_states()?;
        let entries = states
            .iter()
            .enumerate()
            .map(|(i, phi)| (self.history_label(i), phi.norm_sqr()))
            .collect();
        Ok(WeightTable {
            family: self.label.clone(),
            entries,
        })
    }

    fn resolve_predicate(
        &self,
        predicate: &EventPredicate,
    ) -> Result<Vec<(usize, usize)>, HistoryError> {
        predicate
            .constraints
            .iter()
            .map(|(t, label)| {
                let k = self
                    .event_times
                    .iter()
                    .position(|et| et == t)
                    .ok_or(HistoryError::UnknownEventTime(*t))?;
                let e = self.pdis[k]
                    .projectors()
                    .iter()
                    .position(|p| p.label() == label)
                    .ok_or_else(|| HistoryError::UnknownEventLabel {
                        t: *t,
                        label: label.clone(),
                    })?;
                Ok((k, e))
            })
            .collect()
    }

    /// Probability of the union of histories matching `predicate`, for a
    /// consistent family.
    pub fn event_probability(
        &self,
        predicate: &EventPredicate,
        tol: f64,
    ) -> Result<f64, HistoryError> {
        let table = self.assign_probabilities(tol)?;
        let constraints = self.resolve_predicate(predicate)?;
        let mut p = 0.0;
        for (i, (_, w)) in table.entries.iter().enumerate() {
            let mi = self.multi_index(i);
            if constraints.iter().all(|&(k, e)| mi[k] == e) {
                p += w;
            }
        }
        Ok(p)
    }

    /// Pr(target ∧ given) / Pr(given), events being unions of histories
    /// matching the predicates. The family must be consistent and the
    /// conditioning event must have probability above `tol`.
    pub fn conditional(
        &self,
        target: &EventPredicate,
        given: &EventPredicate,
        tol: f64,
    ) -> Result<f64, HistoryError> {
        let table = self.assign_probabilities(tol)?;
        let target_c = self.resolve_predicate(target)?;
        let given_c = self.resolve_predicate(given)?;
        let matches = |index: usize, constraints: &[(usize, usize)]| {
            let mi = self.multi_index(index);
            constraints.iter().all(|&(k, e)| mi[k] == e)
        };
        let mut p_given = 0.0;
        let mut p_joint = 0.0;
        for (i, (_, w)) in table.entries.iter().enumerate() {
            if matches(i, &given_c) {
                p_given += w;
                if matches(i, &target_c) {
                    p_joint += w;
                }
            }
        }
        if p_given <= tol {
            return Err(HistoryError::ZeroConditioningEvent { prob: p_given, tol });
        }
        Ok(p_joint / p_given)
    }

    /// Drop per-time projectors that occur only in histories of weight
    /// ≤ tol, and rebuild the family from the survivors. Remaining
    /// histories keep their weights; the removed mass is recorded.
    pub fn prune_zero(&self, tol: f64) -> Result<HistoryFamily, HistoryError> {
        let states = self.chain_states()?;
        let weights: Vec<f64> = states.iter().map(ComplexVector::norm_sqr).collect();

        let mut keep: Vec<Vec<bool>> = self.pdis.iter().map(|pdi| vec![false; pdi.len()]).collect();
        for (i, w) in weights.iter().enumerate() {
            if *w > tol {
                for (k, &e) in self.multi_index(i).iter().enumerate() {
                    keep[k][e] = true;
                }
            }
        }

        let mut pdis = Vec::with_capacity(self.pdis.len());
        for (k, pdi) in self.pdis.iter().enumerate() {
            let kept: Vec<Projector> = pdi
                .projectors()
                .iter()
                .enumerate()
                .filter(|(e, _)| keep[k][*e])
                .map(|(_, p)| p.clone())
                .collect();
            if kept.is_empty() {
                return Err(HistoryError::PruneEmptied(self.event_times[k]));
            }
            if kept.len() == pdi.len() {
                pdis.push(pdi.clone());
            } else {
                pdis.push(Pdi::incomplete(Arc::clone(pdi.space()), kept));
            }
        }

        let mut dropped_mass = 0.0;
        for (i, w) in weights.iter().enumerate() {
            let mi = self.multi_index(i);
            if mi.iter().enumerate().any(|(k, &e)| !keep[k][e]) {
                dropped_mass += w;
            }
        }

        let pruned_any = pdis
            .iter()
            .zip(&self.pdis)
            .any(|(new, old)| new.len() != old.len());
        Ok(HistoryFamily {
            label: self.label.clone(),
            schedule: Arc::clone(&self.schedule),
            initial_projector: self.initial_projector.clone(),
            initial_state: self.initial_state.clone(),
            event_times: self.event_times.clone(),
            pdis,
            pruned: self.pruned || pruned_any,
            dropped_mass: self.dropped_mass + dropped_mass,
        })
    }
}

/// Largest singular value, via the spectrum of K†K.
pub fn operator_norm(k: &ComplexMatrix, tol: Tolerance) -> Result<f64, HistoryError> {
    let gram = k.adjoint().matmul(k)?;
    let eig = gram.hermitian_eig(Tolerance {
        eps: tol.eps.max(1e-12),
    })?;
    Ok(eig.eigenvalues[0].max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::SternGerlachModel;
    use crate::linalg::c64;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn sg() -> SternGerlachModel {
        SternGerlachModel::build(c64(0.6, 0.0), c64(0.8, 0.0), tol()).unwrap()
    }

    fn detector_pdi(model: &SternGerlachModel) -> Pdi {
        Pdi::new(
            [
                ("Da*Db", "Da*"),
                ("DaDb*", "Db*"),
                ("DaDb", "none"),
                ("Da*Db*", "both"),
            ]
            .iter()
            .map(|(name, label)| model.projector(name).unwrap().clone().with_label(*label))
            .collect(),
            tol(),
        )
        .unwrap()
    }

    fn family_f2(model: &SternGerlachModel) -> HistoryFamily {
        let position = Pdi::new(
            vec![
                model.projector("w2a").unwrap().clone(),
                model.projector("w2b").unwrap().clone(),
                model
                    .projector("w2a")
                    .unwrap()
                    .matrix()
                    .add(model.projector("w2b").unwrap().matrix())
                    .map(|m| {
                        let id = ComplexMatrix::identity(40).unwrap();
                        Projector::new(model.space(), id.sub(&m).unwrap(), "w2rest", tol()).unwrap()
                    })
                    .unwrap(),
            ],
            tol(),
        )
        .unwrap();
        HistoryFamily::new(
            "F2",
            Arc::new(model.schedule().clone()),
            model.projector("psi0").unwrap().clone(),
            model.state(0).clone(),
            vec![(2, position), (3, detector_pdi(model))],
            tol(),
        )
        .unwrap()
    }

    #[test]
    fn chain_of_identity_history_is_propagator() {
        let model = sg();
        let h = History::new(model.projector("psi0").unwrap().clone(), vec![], "unit").unwrap();
        let k = h.chain_operator(model.schedule()).unwrap();
        let want = model
            .schedule()
            .propagator(0, 3)
            .unwrap()
            .matmul(model.projector("psi0").unwrap().matrix())
            .unwrap();
        assert!(k.max_abs_diff(&want) < 1e-13);
    }

    #[test]
    fn unitary_track_history_has_unit_norm_chain() {
        let model = sg();
        let events = (1..=3)
            .map(|j| (j, model.projector(&format!("psi{j}")).unwrap().clone()))
            .collect();
        let h = History::new(model.projector("psi0").unwrap().clone(), events, "track").unwrap();
        let k = h.chain_operator(model.schedule()).unwrap();
        let sigma = operator_norm(&k, tol()).unwrap();
        assert!((sigma - 1.0).abs() < 1e-10);
    }

    #[test]
    fn complement_event_kills_the_chain() {
        let model = sg();
        let not_psi1 = model
            .projector("psi1")
            .unwrap()
            .complement("not_psi1", tol())
            .unwrap();
        let events = vec![
            (1, not_psi1),
            (2, model.projector("psi2").unwrap().clone()),
            (3, model.projector("psi3").unwrap().clone()),
        ];
        let h = History::new(model.projector("psi0").unwrap().clone(), events, "dead").unwrap();
        let k = h.chain_operator(model.schedule()).unwrap();
        assert!(k.max_norm() < 1e-12);
    }

    #[test]
    fn weight_examples() {
        let model = sg();
        let h = History::new(
            model.projector("psi0").unwrap().clone(),
            vec![(3, model.projector("Da*Db").unwrap().clone())],
            "a-click",
        )
        .unwrap();
        let w = h.weight(model.schedule(), model.state(0), tol()).unwrap();
        assert!((w - 0.36).abs() < 1e-12);

        let dead = History::new(
            model.projector("psi0").unwrap().clone(),
            vec![
                (2, model.projector("w2a").unwrap().clone()),
                (3, model.projector("DaDb*").unwrap().clone()),
            ],
            "blocked",
        )
        .unwrap();
        let w = dead
            .weight(model.schedule(), model.state(0), tol())
            .unwrap();
        assert!(w < 1e-20);

        let trivial =
            History::new(model.projector("psi0").unwrap().clone(), vec![], "one").unwrap();
        let w = trivial
            .weight(model.schedule(), model.state(0), tol())
            .unwrap();
        assert!((w - 1.0).abs() < 1e-12);

        let unnormalized = model.state(0).scaled(c64(2.0, 0.0));
        assert!(matches!(
            trivial.weight(model.schedule(), &unnormalized, tol()),
            Err(HistoryError::UnnormalizedState { .. })
        ));
    }

    #[test]
    fn f2_probabilities_match_born_values() {
        let model = sg();
        let family = family_f2(&model);
        assert_eq!(family.len(), 12);
        let report = family.check_consistency(DEFAULT_CONSISTENCY_TOL).unwrap();
        assert!(report.consistent, "worst = {}", report.worst);

        let table = family
            .assign_probabilities(DEFAULT_CONSISTENCY_TOL)
            .unwrap();
        assert!((table.total() - 1.0).abs() < 1e-10);
        assert!((table.get("w2a@t2,Da*@t3").unwrap() - 0.36).abs() < 1e-12);
        assert!((table.get("w2b@t2,Db*@t3").unwrap() - 0.64).abs() < 1e-12);
        assert!(table.get("w2a@t2,Db*@t3").unwrap() < 1e-20);
        assert!(table.get("w2b@t2,Da*@t3").unwrap() < 1e-20);
    }

    #[test]
    fn f2_prunes_to_four_histories() {
        let model = sg();
        let family = family_f2(&model);
        let pruned = family.prune_zero(DEFAULT_CONSISTENCY_TOL).unwrap();
        assert!(pruned.is_pruned());
        assert_eq!(pruned.len(), 4);
        assert!(pruned.dropped_mass() < 1e-12);
        let labels = pruned.history_labels();
        assert_eq!(
            labels,
            vec![
                "w2a@t2,Da*@t3",
                "w2a@t2,Db*@t3",
                "w2b@t2,Da*@t3",
                "w2b@t2,Db*@t3",
            ]
        );
        // Weights unchanged by pruning.
        let table = pruned
            .assign_probabilities(DEFAULT_CONSISTENCY_TOL)
            .unwrap();
        assert!((table.get("w2a@t2,Da*@t3").unwrap() - 0.36).abs() < 1e-12);
        assert!((table.get("w2b@t2,Db*@t3").unwrap() - 0.64).abs() < 1e-12);
    }

    #[test]
    fn prune_keeps_fully_occupied_family() {
        let model = sg();
        let spin = Pdi::new(
            vec![
                model.projector("z+").unwrap().clone(),
                model.projector("z-").unwrap().clone(),
            ],
            tol(),
        )
        .unwrap();
        let family = HistoryFamily::new(
            "spin-only",
            Arc::new(model.schedule().clone()),
            model.projector("psi0").unwrap().clone(),
            model.state(0).clone(),
            vec![(1, spin)],
            tol(),
        )
        .unwrap();
        let pruned = family.prune_zero(DEFAULT_CONSISTENCY_TOL).unwrap();
        assert!(!pruned.is_pruned());
        assert_eq!(pruned.len(), 2);
    }

    #[test]
    fn eigenstate_prunes_silent_detector() {
        let model = SternGerlachModel::build(c64(0.0, 0.0), c64(1.0, 0.0), tol()).unwrap();
        let family = HistoryFamily::new(
            "F1-ish",
            Arc::new(model.schedule().clone()),
            model.projector("psi0").unwrap().clone(),
            model.state(0).clone(),
            vec![(3, detector_pdi(&model))],
            tol(),
        )
        .unwrap();
        let pruned = family.prune_zero(DEFAULT_CONSISTENCY_TOL).unwrap();
        assert_eq!(pruned.len(), 1);
        assert_eq!(pruned.history_labels(), vec!["Db*@t3"]);
    }

    #[test]
    fn conditional_certainties() {
        let model = sg();
        let family = family_f2(&model);
        let p = family
            .conditional(
                &EventPredicate::single(2, "w2a"),
                &EventPredicate::single(3, "Da*"),
                DEFAULT_CONSISTENCY_TOL,
            )
            .unwrap();
        assert!((p - 1.0).abs() < 1e-12);

        // Conditioning on an impossible event is refused.
        let up = SternGerlachModel::build(c64(1.0, 0.0), c64(0.0, 0.0), tol()).unwrap();
        let family = HistoryFamily::new(
            "F1",
            Arc::new(up.schedule().clone()),
            up.projector("psi0").unwrap().clone(),
            up.state(0).clone(),
            vec![(3, detector_pdi(&up))],
            tol(),
        )
        .unwrap();
        assert!(matches!(
            family.conditional(
                &EventPredicate::single(3, "Da*"),
                &EventPredicate::single(3, "Db*"),
                DEFAULT_CONSISTENCY_TOL,
            ),
            Err(HistoryError::ZeroConditioningEvent { .. })
        ));
    }

    #[test]
    fn decoherence_functional_properties() {
        let model = sg();
        let family = family_f2(&model);
        for i in 0..4 {
            let d = family.decoherence_functional(i, i).unwrap();
            let w = family
                .history(i)
                .unwrap()
                .weight(model.schedule(), model.state(0), tol())
                .unwrap();
            assert!((d.re - w).abs() < 1e-12 && d.im.abs() < 1e-14);
        }
        let d01 = family.decoherence_functional(0, 1).unwrap();
        let d10 = family.decoherence_functional(1, 0).unwrap();
        assert!((d01 - d10.conj()).norm() < 1e-14);
        // The two detector outcomes cannot interfere.
        let d = family.decoherence_functional(0, 7).unwrap();
        assert!(d.norm() < 1e-12);
    }

    #[test]
    fn single_time_families_are_consistent() {
        let model = sg();
        let family = HistoryFamily::new(
            "t3-only",
            Arc::new(model.schedule().clone()),
            model.projector("psi0").unwrap().clone(),
            model.state(0).clone(),
            vec![(3, detector_pdi(&model))],
            tol(),
        )
        .unwrap();
        let report = family.check_consistency(DEFAULT_CONSISTENCY_TOL).unwrap();
        assert!(report.consistent);
        assert!(report.worst < 1e-12);
    }

    #[test]
    fn family_rejects_bad_inputs() {
        let model = sg();
        let unnormalized = model.state(0).scaled(c64(0.5, 0.0));
        assert!(matches!(
            HistoryFamily::new(
                "bad",
                Arc::new(model.schedule().clone()),
                model.projector("psi0").unwrap().clone(),
                unnormalized,
                vec![],
                tol(),
            ),
            Err(HistoryError::UnnormalizedState { .. })
        ));
        // State outside the initial projector's support.
        assert!(matches!(
            HistoryFamily::new(
                "bad",
                Arc::new(model.schedule().clone()),
                model.projector("psi1").unwrap().clone(),
                model.state(0).clone(),
                vec![],
                tol(),
            ),
            Err(HistoryError::InitialSupport { .. })
        ));
        // Event beyond the grid.
        assert!(matches!(
            HistoryFamily::new(
                "bad",
                Arc::new(model.schedule().clone()),
                model.projector("psi0").unwrap().clone(),
                model.state(0).clone(),
                vec![(7, detector_pdi(&model))],
                tol(),
            ),
            Err(HistoryError::EventTimeOutOfRange { .. })
        ));
    }
}
