//! Standard history families for the built-in models, and the deliberately
//! inconsistent interference counterexample used to exercise the
//! consistency checker's failure path.

use std::sync::Arc;

use crate::dynamics::{
    unitary_completion, CrossedBeamModel, SternGerlachModel, TimeGrid, UnitarySchedule,
};
use crate::hilbert::{HilbertSpace, Pdi, Projector};
use crate::histories::{HistoryError, HistoryFamily};
use crate::linalg::{c64, ComplexMatrix, ComplexVector, Tolerance};

impl SternGerlachModel {
    fn named(&self, name: &str) -> Projector {
        self.projector(name)
            .unwrap_or_else(|| panic!("model projector `{name}` missing"))
            .clone()
    }

    /// Detector-outcome PDI at the final time: the joint refinement of the
    /// two detector sample spaces, labeled `Da*`, `Db*`, `none`, `both`.
    pub fn detector_pdi(&self, tol: Tolerance) -> Result<Pdi, HistoryError> {
        Ok(Pdi::new(
            vec![
                self.named("Da*Db").with_label("Da*"),
                self.named("DaDb*").with_label("Db*"),
                self.named("DaDb").with_label("none"),
                self.named("Da*Db*").with_label("both"),
            ],
            tol,
        )?)
    }

    /// Packet-position PDI at t₂: `{[w2a], [w2b], rest}`.
    pub fn position_pdi(&self, tol: Tolerance) -> Result<Pdi, HistoryError> {
        let w2a = self.named("w2a");
        let w2b = self.named("w2b");
        let id = ComplexMatrix::identity(self.space().total_dim())?;
        let rest = Projector::new(
            self.space(),
            id.sub(&w2a.matrix().add(w2b.matrix())?)?,
            "rest",
            tol,
        )?;
        Ok(Pdi::new(vec![w2a, w2b, rest], tol)?)
    }

    /// Spin PDI `{[z+], [z-]}` embedded in the full space.
    pub fn spin_pdi(&self, tol: Tolerance) -> Result<Pdi, HistoryError> {
        Ok(Pdi::new(vec![self.named("z+"), self.named("z-")], tol)?)
    }

    fn family(
        &self,
        label: &str,
        events: Vec<(usize, Pdi)>,
        tol: Tolerance,
    ) -> Result<HistoryFamily, HistoryError> {
        HistoryFamily::new(
            label,
            Arc::new(self.schedule().clone()),
            self.named("psi0"),
            self.state(0).clone(),
            events,
            tol,
        )
    }

    /// The unitary-track family: `{[psi_j], I−[psi_j]}` at each of t₁, t₂, t₃.
    /// Only the history following the Schrödinger evolution has weight.
    pub fn family_unitary(&self, tol: Tolerance) -> Result<HistoryFamily, HistoryError> {
        let events = (1..=3)
            .map(|j| Ok((j, Pdi::implicit(&self.named(&format!("psi{j}")), tol)?)))
            .collect::<Result<Vec<_>, HistoryError>>()?;
        self.family("Fu", events, tol)
    }

    /// Measurement-outcome family: unitary track until the detectors fire.
    pub fn family_detector(&self, tol: Tolerance) -> Result<HistoryFamily, HistoryError> {
        let events = vec![
            (1, Pdi::implicit(&self.named("psi1"), tol)?),
            (2, Pdi::implicit(&self.named("psi2"), tol)?),
            (3, self.detector_pdi(tol)?),
        ];
        self.family("F1", events, tol)
    }

    /// Which-path family: packet position at t₂, detector outcomes at t₃.
    pub fn family_path(&self, tol: Tolerance) -> Result<HistoryFamily, HistoryError> {
        let events = vec![(2, self.position_pdi(tol)?), (3, self.detector_pdi(tol)?)];
        self.family("F2", events, tol)
    }

    /// Retrodiction family: spin value at t₁, detector outcomes at t₃.
    pub fn family_spin(&self, tol: Tolerance) -> Result<HistoryFamily, HistoryError> {
        let events = vec![(1, self.spin_pdi(tol)?), (3, self.detector_pdi(tol)?)];
        self.family("F3", events, tol)
    }

    /// Fu, F1, F2, F3 in order.
    pub fn standard_families(&self, tol: Tolerance) -> Result<Vec<HistoryFamily>, HistoryError> {
        Ok(vec![
            self.family_unitary(tol)?,
            self.family_detector(tol)?,
            self.family_path(tol)?,
            self.family_spin(tol)?,
        ])
    }
}

impl CrossedBeamModel {
    fn named(&self, name: &str) -> Projector {
        self.projector(name)
            .unwrap_or_else(|| panic!("model projector `{name}` missing"))
            .clone()
    }

    /// Slit PDI at t₁: `{[A], [B], rest}`.
    pub fn slit_pdi(&self, tol: Tolerance) -> Result<Pdi, HistoryError> {
        let a = self.named("A");
        let b = self.named("B");
        let id = ComplexMatrix::identity(self.space().total_dim())?;
        let rest = Projector::new(
            self.space(),
            id.sub(&a.matrix().add(b.matrix())?)?,
            "rest",
            tol,
        )?;
        Ok(Pdi::new(vec![a, b, rest], tol)?)
    }

    /// Detector-outcome PDI at t₃, labeled `Ca*`, `Cb*`, `none`, `both`.
    pub fn detector_pdi(&self, tol: Tolerance) -> Result<Pdi, HistoryError> {
        Ok(Pdi::new(
            vec![
                self.named("Ca*Cb").with_label("Ca*"),
                self.named("CaCb*").with_label("Cb*"),
                self.named("CaCb").with_label("none"),
                self.named("Ca*Cb*").with_label("both"),
            ],
            tol,
        )?)
    }

    /// Which-slit family: slit passage at t₁, detector outcomes at t₃.
    pub fn family_slit(&self, tol: Tolerance) -> Result<HistoryFamily, HistoryError> {
        HistoryFamily::new(
            "Fslit",
            Arc::new(self.schedule().clone()),
            Projector::from_ket(self.space(), self.initial_state(), "psi0", tol)?,
            self.initial_state().clone(),
            vec![(1, self.slit_pdi(tol)?), (3, self.detector_pdi(tol)?)],
            tol,
        )
    }
}

/// A two-step interferometer with no which-path record: the slit packets
/// recombine coherently, so the which-slit family fails the consistency
/// check outright (worst off-diagonal 1/4).
#[derive(Debug, Clone)]
pub struct InterferenceCounterexample {
    space: Arc<HilbertSpace>,
    schedule: Arc<UnitarySchedule>,
    initial: ComplexVector,
    family: HistoryFamily,
}

impl InterferenceCounterexample {
    pub fn build(tol: Tolerance) -> Result<Self, HistoryError> {
        let space = HilbertSpace::from_parts(&[("path", &["source", "A", "B", "out_a", "out_b"])])?;
        let dim = space.total_dim();
        let ket = |label: &str| space.product_ket(&[("path", label)]);
        let half = c64(std::f64::consts::FRAC_1_SQRT_2, 0.0);

        // Slit screen: source → (A + B)/√2.
        let split = ket("A")?.add(&ket("B")?)?.scaled(half);
        let u01 = unitary_completion(&[(ket("source")?, split)], dim, tol)?;

        // Recombiner at the crossing: the two packets interfere into the
        // output ports instead of being recorded.
        let sum = ket("out_a")?.add(&ket("out_b")?)?.scaled(half);
        let diff = ket("out_a")?.sub(&ket("out_b")?)?.scaled(half);
        let u12 = unitary_completion(&[(ket("A")?, sum), (ket("B")?, diff)], dim, tol)?;

        let schedule = Arc::new(UnitarySchedule::new(
            Arc::clone(&space),
            TimeGrid::unit(2)?,
            vec![u01, u12],
            tol,
        )?);

        let initial = ket("source")?;
        let slits = Pdi::new(
            vec![
                space.basis_projector("path", &["A"], "A", tol)?,
                space.basis_projector("path", &["B"], "B", tol)?,
                space.basis_projector("path", &["source", "out_a", "out_b"], "rest", tol)?,
            ],
            tol,
        )?;
        let outputs = Pdi::new(
            vec![
                space.basis_projector("path", &["out_a"], "out_a", tol)?,
                space.basis_projector("path", &["out_b"], "out_b", tol)?,
                space.basis_projector("path", &["source", "A", "B"], "rest", tol)?,
            ],
            tol,
        )?;
        let family = HistoryFamily::new(
            "Finterf",
            Arc::clone(&schedule),
            Projector::from_ket(&space, &initial, "psi0", tol)?,
            initial.clone(),
            vec![(1, slits), (2, outputs)],
            tol,
        )?;

        Ok(InterferenceCounterexample {
            space,
            schedule,
            initial,
            family,
        })
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        &self.space
    }

    pub fn schedule(&self) -> &Arc<UnitarySchedule> {
        &self.schedule
    }

    pub fn initial_state(&self) -> &ComplexVector {
        &self.initial
    }

    pub fn family(&self) -> &HistoryFamily {
        &self.family
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histories::{EventPredicate, DEFAULT_CONSISTENCY_TOL};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn sg() -> SternGerlachModel {
        SternGerlachModel::build(c64(0.6, 0.0), c64(0.8, 0.0), tol()).unwrap()
    }

    #[test]
    fn all_standard_families_are_consistent() {
        let model = sg();
        for family in model.standard_families(tol()).unwrap() {
            let report = family.check_consistency(DEFAULT_CONSISTENCY_TOL).unwrap();
            assert!(
                report.consistent,
                "{} inconsistent: worst {}",
                family.label(),
                report.worst
            );
        }
    }

    #[test]
    fn unitary_family_has_single_live_history() {
        let model = sg();
        let fu = model.family_unitary(tol()).unwrap();
        assert_eq!(fu.len(), 8);
        let table = fu.assign_probabilities(DEFAULT_CONSISTENCY_TOL).unwrap();
        let live: Vec<_> = table.entries.iter().filter(|(_, w)| *w > 1e-10).collect();
        assert_eq!(live.len(), 1);
        assert_eq!(live[0].0, "psi1@t1,psi2@t2,psi3@t3");
        assert!((live[0].1 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn detector_family_reproduces_born_weights() {
        let model = sg();
        let f1 = model.family_detector(tol()).unwrap();
        let table = f1.assign_probabilities(DEFAULT_CONSISTENCY_TOL).unwrap();
        assert!((table.total() - 1.0).abs() < 1e-10);
        assert!((table.get("psi1@t1,psi2@t2,Da*@t3").unwrap() - 0.36).abs() < 1e-12);
        assert!((table.get("psi1@t1,psi2@t2,Db*@t3").unwrap() - 0.64).abs() < 1e-12);
        assert!(table.get("psi1@t1,psi2@t2,both@t3").unwrap() < 1e-20);
    }

    #[test]
    fn spin_family_retrodicts_preparation() {
        let model = sg();
        let f3 = model.family_spin(tol()).unwrap();
        let p = f3
            .conditional(
                &EventPredicate::single(1, "z+"),
                &EventPredicate::single(3, "Da*"),
                DEFAULT_CONSISTENCY_TOL,
            )
            .unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        let p = f3
            .conditional(
                &EventPredicate::single(1, "z-"),
                &EventPredicate::single(3, "Db*"),
                DEFAULT_CONSISTENCY_TOL,
            )
            .unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn crossed_beam_slit_inference() {
        let model = CrossedBeamModel::build(tol()).unwrap();
        let family = model.family_slit(tol()).unwrap();
        let report = family.check_consistency(DEFAULT_CONSISTENCY_TOL).unwrap();
        assert!(report.consistent);
        let p = family
            .conditional(
                &EventPredicate::single(1, "B"),
                &EventPredicate::single(3, "Ca*"),
                DEFAULT_CONSISTENCY_TOL,
            )
            .unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        let p = family
            .conditional(
                &EventPredicate::single(1, "A"),
                &EventPredicate::single(3, "Cb*"),
                DEFAULT_CONSISTENCY_TOL,
            )
            .unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interference_counterexample_is_inconsistent() {
        let cx = InterferenceCounterexample::build(tol()).unwrap();
        let report = cx
            .family()
            .check_consistency(DEFAULT_CONSISTENCY_TOL)
            .unwrap();
        assert!(!report.consistent);
        assert!(report.worst >= 0.1);
        assert!((report.worst - 0.25).abs() < 1e-12);
        // Probability assignment is refused.
        assert!(cx
            .family()
            .assign_probabilities(DEFAULT_CONSISTENCY_TOL)
            .is_err());
    }
}
