//! Discrete-time unitary dynamics: time grids, piecewise unitary schedules,
//! deterministic unitary completion of partially specified maps, and
//! builders for the two concrete measurement models — a Stern-Gerlach
//! apparatus with two detectors, and a crossed-beam double slit.
//!
//! Times are abstract labels; there is no Hamiltonian integration. Each
//! interval carries one dense unitary, and models are assembled by
//! completing the physically specified transitions to full unitaries with
//! Gram-Schmidt over the remaining canonical basis in index order, so every
//! build is reproducible bit for bit.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::hilbert::{HilbertError, HilbertSpace, Projector};
use crate::linalg::{c64, ComplexMatrix, ComplexVector, LinalgError, Tolerance};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error("time grid must contain at least two strictly increasing times")]
    GridTooShort,
    #[error("time grid is not strictly increasing at position {0}")]
    GridNotIncreasing(usize),
    #[error("schedule needs {expected} step unitaries, got {got}")]
    StepCount { expected: usize, got: usize },
    #[error("step {interval} (t{interval} → t{next}) is not unitary within {eps:.1e}", next = interval + 1)]
    StepNotUnitary { interval: usize, eps: f64 },
    #[error("step {interval} has dimension {got}, space has {expected}")]
    StepDimension {
        interval: usize,
        expected: usize,
        got: usize,
    },
    #[error("time index range {from}..{to} invalid for {n} intervals")]
    IndexOutOfRange { from: usize, to: usize, n: usize },
    #[error("state dimension {got} does not match space dimension {expected}")]
    StateDimension { expected: usize, got: usize },
    #[error("amplitudes not normalized: |α|² + |β|² = {norm_sqr}")]
    AmplitudeNormalization { norm_sqr: f64 },
    #[error("completion {side} vectors are not orthonormal: worst Gram residual {residual:.3e}")]
    CompletionNotOrthonormal { side: &'static str, residual: f64 },
    #[error("completion map is inconsistent: ⟨u{i}|u{j}⟩ ≠ ⟨v{i}|v{j}⟩ (difference {diff:.3e})")]
    CompletionInconsistent { i: usize, j: usize, diff: f64 },
    #[error("completion input/output counts differ: {inputs} vs {outputs}")]
    CompletionCountMismatch { inputs: usize, outputs: usize },
    #[error("completion pair {0} has wrong dimension")]
    CompletionDimension(usize),
    #[error("could not extend completion basis to the full space (got {got} of {expected})")]
    CompletionSpan { expected: usize, got: usize },
}

/// Strictly increasing sequence t₀ < t₁ < … < t_n with n ≥ 1 intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self, DynamicsError> {
        if times.len() < 2 {
            return Err(DynamicsError::GridTooShort);
        }
        for (i, w) in times.windows(2).enumerate() {
            if !w[0].is_finite() || !w[1].is_finite() || w[0] >= w[1] {
                return Err(DynamicsError::GridNotIncreasing(i + 1));
            }
        }
        Ok(TimeGrid { times })
    }

    /// Grid 0, 1, …, n.
    pub fn unit(n_intervals: usize) -> Result<Self, DynamicsError> {
        TimeGrid::new((0..=n_intervals).map(|i| i as f64).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_intervals(&self) -> usize {
        self.times.len() - 1
    }
}

/// One validated unitary per grid interval on a fixed space.
#[derive(Debug, Clone)]
pub struct UnitarySchedule {
    space: Arc<HilbertSpace>,
    grid: TimeGrid,
    steps: Vec<ComplexMatrix>,
}

impl UnitarySchedule {
    pub fn new(
        space: Arc<HilbertSpace>,
        grid: TimeGrid,
        steps: Vec<ComplexMatrix>,
        tol: Tolerance,
    ) -> Result<Self, DynamicsError> {
        if steps.len() != grid.n_intervals() {
            return Err(DynamicsError::StepCount {
                expected: grid.n_intervals(),
                got: steps.len(),
            });
        }
        for (k, u) in steps.iter().enumerate() {
            if !u.is_square() || u.rows() != space.total_dim() {
                return Err(DynamicsError::StepDimension {
                    interval: k,
                    expected: space.total_dim(),
                    got: u.rows(),
                });
            }
            if !u.is_unitary(tol)? {
                return Err(DynamicsError::StepNotUnitary {
                    interval: k,
                    eps: tol.eps,
                });
            }
        }
        Ok(UnitarySchedule { space, grid, steps })
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        &self.space
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn steps(&self) -> &[ComplexMatrix] {
        &self.steps
    }

    pub fn n_intervals(&self) -> usize {
        self.steps.len()
    }

    /// Apply the interval unitaries from time index `from` to `to` in order.
    pub fn evolve(
        &self,
        state: &ComplexVector,
        from: usize,
        to: usize,
    ) -> Result<ComplexVector, DynamicsError> {
        if from > to || to > self.n_intervals() {
            return Err(DynamicsError::IndexOutOfRange {
                from,
                to,
                n: self.n_intervals(),
            });
        }
        if state.dim() != self.space.total_dim() {
            return Err(DynamicsError::StateDimension {
                expected: self.space.total_dim(),
                got: state.dim(),
            });
        }
        let mut out = state.clone();
        for k in from..to {
            out = self.steps[k].mul_vec(&out)?;
        }
        Ok(out)
    }

    /// Dense propagator U(t_from → t_to).
    pub fn propagator(&self, from: usize, to: usize) -> Result<ComplexMatrix, DynamicsError> {
        if from > to || to > self.n_intervals() {
            return Err(DynamicsError::IndexOutOfRange {
                from,
                to,
                n: self.n_intervals(),
            });
        }
        let mut out = ComplexMatrix::identity(self.space.total_dim())?;
        for k in from..to {
            out = self.steps[k].matmul(&out)?;
        }
        Ok(out)
    }
}

/// Deterministic unitary agreeing with a partial map u_i ↦ v_i.
///
/// Inputs and outputs must each be orthonormal within `tol.eps`. The
/// unconstrained complement is filled by Gram-Schmidt over the canonical
/// basis in index order on both sides, paired in order.
pub fn unitary_completion(
    pairs: &[(ComplexVector, ComplexVector)],
    dim: usize,
    tol: Tolerance,
) -> Result<ComplexMatrix, DynamicsError> {
    for (i, (u, v)) in pairs.iter().enumerate() {
        if u.dim() != dim || v.dim() != dim {
            return Err(DynamicsError::CompletionDimension(i));
        }
    }
    let inputs: Vec<&ComplexVector> = pairs.iter().map(|(u, _)| u).collect();
    let outputs: Vec<&ComplexVector> = pairs.iter().map(|(_, v)| v).collect();
    check_orthonormal(&inputs, "input", tol)?;
    check_orthonormal(&outputs, "output", tol)?;
    for i in 0..pairs.len() {
        for j in 0..pairs.len() {
            let gu = inputs[i].inner(inputs[j])?;
            let gv = outputs[i].inner(outputs[j])?;
            let diff = (gu - gv).norm();
            if diff > 2.0 * tol.eps {
                return Err(DynamicsError::CompletionInconsistent { i, j, diff });
            }
        }
    }

    let in_basis = extend_basis(&inputs, dim)?;
    let out_basis = extend_basis(&outputs, dim)?;
    if in_basis.len() != dim || out_basis.len() != dim {
        return Err(DynamicsError::CompletionSpan {
            expected: dim,
            got: in_basis.len().min(out_basis.len()),
        });
    }

    // U = Σ |out_k⟩⟨in_k|
    let mut u = ComplexMatrix::zeros(dim, dim)?;
    for (win, wout) in in_basis.iter().zip(&out_basis) {
        u = u.add(&wout.outer(win))?;
    }
    Ok(u)
}

fn check_orthonormal(
    vecs: &[&ComplexVector],
    side: &'static str,
    tol: Tolerance,
) -> Result<(), DynamicsError> {
    let mut worst = 0.0_f64;
    for (i, a) in vecs.iter().enumerate() {
        for (j, b) in vecs.iter().enumerate() {
            let g = a.inner(b).expect("dims checked");
            let want = if i == j {
                Complex64::ONE
            } else {
                Complex64::ZERO
            };
            worst = worst.max((g - want).norm());
        }
    }
    if worst > tol.eps {
        return Err(DynamicsError::CompletionNotOrthonormal {
            side,
            residual: worst,
        });
    }
    Ok(())
}

/// Extend an orthonormal set to a full basis by sweeping the canonical
/// basis in index order, orthogonalized twice.
fn extend_basis(given: &[&ComplexVector], dim: usize) -> Result<Vec<ComplexVector>, DynamicsError> {
    let mut basis: Vec<ComplexVector> = given.iter().map(|v| (*v).clone()).collect();
    for k in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut w = ComplexVector::basis(dim, k)?;
        for _ in 0..2 {
            for b in &basis {
                let overlap = b.inner(&w)?;
                w = w.sub(&b.scaled(overlap))?;
            }
        }
        if w.norm() > 1e-6 {
            basis.push(w.normalized()?);
        }
    }
    Ok(basis)
}

/// Stern-Gerlach measurement model: a five-mode particle path, a spin-half
/// degree of freedom, and two detectors, evolving over (t₀, t₁, t₂, t₃).
///
/// The particle is routed into the dedicated `abs` mode when a detector
/// fires, keeping the space fixed across the whole run; the spin is carried
/// along unchanged after absorption.
#[derive(Debug, Clone)]
pub struct SternGerlachModel {
    alpha: Complex64,
    beta: Complex64,
    space: Arc<HilbertSpace>,
    schedule: UnitarySchedule,
    states: Vec<ComplexVector>,
    projectors: BTreeMap<String, Projector>,
}

impl SternGerlachModel {
    pub fn build(alpha: Complex64, beta: Complex64, tol: Tolerance) -> Result<Self, DynamicsError> {
        let norm_sqr = alpha.norm_sqr() + beta.norm_sqr();
        if (norm_sqr - 1.0).abs() > tol.eps {
            return Err(DynamicsError::AmplitudeNormalization { norm_sqr });
        }
        let space = HilbertSpace::from_parts(&[
            ("particle", &["w0", "w1", "w2a", "w2b", "abs"]),
            ("spin", &["z+", "z-"]),
            ("Da", &["ready", "trig"]),
            ("Db", &["ready", "trig"]),
        ])?;
        let dim = space.total_dim();

        let ket = |p: &str, s: &str, da: &str, db: &str| {
            space.product_ket(&[("particle", p), ("spin", s), ("Da", da), ("Db", db)])
        };

        // t0 → t1: the wave packet drifts w0 → w1, spin and detectors untouched.
        let mut pairs = Vec::new();
        for s in ["z+", "z-"] {
            for da in ["ready", "trig"] {
                for db in ["ready", "trig"] {
                    pairs.push((ket("w0", s, da, db)?, ket("w1", s, da, db)?));
                }
            }
        }
        let u01 = unitary_completion(&pairs, dim, tol)?;

        // t1 → t2: the field gradient splits the packet by spin.
        let mut pairs = Vec::new();
        for da in ["ready", "trig"] {
            for db in ["ready", "trig"] {
                pairs.push((ket("w1", "z+", da, db)?, ket("w2a", "z+", da, db)?));
                pairs.push((ket("w1", "z-", da, db)?, ket("w2b", "z-", da, db)?));
            }
        }
        let u12 = unitary_completion(&pairs, dim, tol)?;

        // t2 → t3: each packet is absorbed by its detector, which triggers.
        let pairs = vec![
            (
                ket("w2a", "z+", "ready", "ready")?,
                ket("abs", "z+", "trig", "ready")?,
            ),
            (
                ket("w2b", "z-", "ready", "ready")?,
                ket("abs", "z-", "ready", "trig")?,
            ),
        ];
        let u23 = unitary_completion(&pairs, dim, tol)?;

        let schedule = UnitarySchedule::new(
            Arc::clone(&space),
            TimeGrid::unit(3)?,
            vec![u01, u12, u23],
            tol,
        )?;

        let chi_up = ket("w0", "z+", "ready", "ready")?;
        let chi_dn = ket("w0", "z-", "ready", "ready")?;
        let psi0 = chi_up.scaled(alpha).add(&chi_dn.scaled(beta))?;
        let mut states = vec![psi0.clone()];
        for j in 1..=3 {
            states.push(schedule.evolve(&psi0, 0, j)?);
        }

        let mut projectors = BTreeMap::new();
        for (j, psi) in states.iter().enumerate() {
            projectors.insert(
                format!("psi{j}"),
                Projector::from_ket(&space, psi, format!("psi{j}"), tol)?,
            );
        }
        for (name, sub, labels) in [
            ("w2a", "particle", vec!["w2a"]),
            ("w2b", "particle", vec!["w2b"]),
            ("z+", "spin", vec!["z+"]),
            ("z-", "spin", vec!["z-"]),
            ("Da", "Da", vec!["ready"]),
            ("Da*", "Da", vec!["trig"]),
            ("Db", "Db", vec!["ready"]),
            ("Db*", "Db", vec!["trig"]),
        ] {
            projectors.insert(
                name.to_string(),
                space.basis_projector(sub, &labels, name, tol)?,
            );
        }
        for (name, a, b) in [
            ("Da*Db", "Da*", "Db"),
            ("DaDb*", "Da", "Db*"),
            ("DaDb", "Da", "Db"),
            ("Da*Db*", "Da*", "Db*"),
        ] {
            let product = projectors[a].matrix().matmul(projectors[b].matrix())?;
            projectors.insert(
                name.to_string(),
                Projector::new(&space, product, name, tol)?,
            );
        }

        Ok(SternGerlachModel {
            alpha,
            beta,
            space,
            schedule,
            states,
            projectors,
        })
    }

    pub fn alpha(&self) -> Complex64 {
        self.alpha
    }

    pub fn beta(&self) -> Complex64 {
        self.beta
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        &self.space
    }

    pub fn schedule(&self) -> &UnitarySchedule {
        &self.schedule
    }

    /// |Ψ_j⟩ for j = 0..=3.
    pub fn state(&self, j: usize) -> &ComplexVector {
        &self.states[j]
    }

    pub fn projector(&self, name: &str) -> Option<&Projector> {
        self.projectors.get(name)
    }

    pub fn projectors(&self) -> &BTreeMap<String, Projector> {
        &self.projectors
    }

    pub fn named_states(&self) -> BTreeMap<String, ComplexVector> {
        self.states
            .iter()
            .enumerate()
            .map(|(j, s)| (format!("psi{j}"), s.clone()))
            .collect()
    }
}

/// Crossed-beam double slit: packets from slits A (upper) and B (lower) are
/// bent, cross in vacuum, and fly on to detectors on the opposite sides —
/// the A packet reaches C^b and the B packet reaches C^a.
#[derive(Debug, Clone)]
pub struct CrossedBeamModel {
    space: Arc<HilbertSpace>,
    schedule: UnitarySchedule,
    initial: ComplexVector,
    projectors: BTreeMap<String, Projector>,
}

const CB_PATH: [&str; 7] = ["source", "A", "B", "up", "down", "at_Ca", "at_Cb"];

impl CrossedBeamModel {
    pub fn build(tol: Tolerance) -> Result<Self, DynamicsError> {
        let space = HilbertSpace::from_parts(&[
            ("path", &CB_PATH),
            ("Ca", &["ready", "trig"]),
            ("Cb", &["ready", "trig"]),
        ])?;
        let dim = space.total_dim();
        let nd = 4; // detector block size

        let path_index = |label: &str| CB_PATH.iter().position(|l| *l == label).unwrap();

        // t0 → t1: the slit screen splits the source packet symmetrically.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut p7 = ComplexMatrix::identity(7)?;
        let (i_src, i_a, i_b) = (path_index("source"), path_index("A"), path_index("B"));
        p7[(i_src, i_src)] = c64(0.0, 0.0);
        p7[(i_a, i_src)] = c64(s, 0.0);
        p7[(i_b, i_src)] = c64(s, 0.0);
        p7[(i_src, i_a)] = c64(s, 0.0);
        p7[(i_a, i_a)] = c64(0.5, 0.0);
        p7[(i_b, i_a)] = c64(-0.5, 0.0);
        p7[(i_src, i_b)] = c64(s, 0.0);
        p7[(i_a, i_b)] = c64(-0.5, 0.0);
        p7[(i_b, i_b)] = c64(0.5, 0.0);
        let u01 = p7.tensor(&ComplexMatrix::identity(nd)?)?;

        // t1 → t2: beams bend toward the crossing region: A descends, B rises.
        let mut q7 = ComplexMatrix::zeros(7, 7)?;
        for (from, to) in [
            ("source", "source"),
            ("A", "down"),
            ("B", "up"),
            ("down", "A"),
            ("up", "B"),
            ("at_Ca", "at_Ca"),
            ("at_Cb", "at_Cb"),
        ] {
            q7[(path_index(to), path_index(from))] = Complex64::ONE;
        }
        let u12 = q7.tensor(&ComplexMatrix::identity(nd)?)?;

        // t2 → t3: packets pass the crossing untouched and trigger the
        // detector they arrive at: down-going → C^b, up-going → C^a.
        let mut u23 = ComplexMatrix::zeros(dim, dim)?;
        for idx in 0..dim {
            let d = space.digits(idx);
            let (path, ca, cb) = (d[0], d[1], d[2]);
            let image = match CB_PATH[path] {
                "down" => space.index_of(&[path_index("at_Cb"), ca, 1 - cb]),
                "at_Cb" => space.index_of(&[path_index("down"), ca, 1 - cb]),
                "up" => space.index_of(&[path_index("at_Ca"), 1 - ca, cb]),
                "at_Ca" => space.index_of(&[path_index("up"), 1 - ca, cb]),
                _ => idx,
            };
            u23[(image, idx)] = Complex64::ONE;
        }

        let schedule = UnitarySchedule::new(
            Arc::clone(&space),
            TimeGrid::unit(3)?,
            vec![u01, u12, u23],
            tol,
        )?;

        let initial = space.product_ket(&[("path", "source"), ("Ca", "ready"), ("Cb", "ready")])?;

        let mut projectors = BTreeMap::new();
        for label in CB_PATH {
            projectors.insert(
                label.to_string(),
                space.basis_projector("path", &[label], label, tol)?,
            );
        }
        for (name, sub, label) in [
            ("Ca", "Ca", "ready"),
            ("Ca*", "Ca", "trig"),
            ("Cb", "Cb", "ready"),
            ("Cb*", "Cb", "trig"),
        ] {
            projectors.insert(
                name.to_string(),
                space.basis_projector(sub, &[label], name, tol)?,
            );
        }
        for (name, a, b) in [
            ("Ca*Cb", "Ca*", "Cb"),
            ("CaCb*", "Ca", "Cb*"),
            ("CaCb", "Ca", "Cb"),
            ("Ca*Cb*", "Ca*", "Cb*"),
        ] {
            let product = projectors[a].matrix().matmul(projectors[b].matrix())?;
            projectors.insert(
                name.to_string(),
                Projector::new(&space, product, name, tol)?,
            );
        }

        Ok(CrossedBeamModel {
            space,
            schedule,
            initial,
            projectors,
        })
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        &self.space
    }

    pub fn schedule(&self) -> &UnitarySchedule {
        &self.schedule
    }

    /// |source, ready, ready⟩.
    pub fn initial_state(&self) -> &ComplexVector {
        &self.initial
    }

    pub fn projector(&self, name: &str) -> Option<&Projector> {
        self.projectors.get(name)
    }

    pub fn projectors(&self) -> &BTreeMap<String, Projector> {
        &self.projectors
    }

    /// The A↔B, up↔down, C^a↔C^b reflection, as a permutation matrix.
    /// Conjugating every step unitary by it leaves the schedule invariant.
    pub fn reflection_swap(&self) -> Result<ComplexMatrix, DynamicsError> {
        let dim = self.space.total_dim();
        let swap_path = |p: usize| match CB_PATH[p] {
            "A" => 2,
            "B" => 1,
            "up" => 4,
            "down" => 3,
            "at_Ca" => 6,
            "at_Cb" => 5,
            _ => p,
        };
        let mut m = ComplexMatrix::zeros(dim, dim)?;
        for idx in 0..dim {
            let d = self.space.digits(idx);
            let image = self.space.index_of(&[swap_path(d[0]), d[2], d[1]]);
            m[(image, idx)] = Complex64::ONE;
        }
        Ok(m)
    }

    /// Basis ket localized at one slit, detectors ready. Feed it to
    /// `schedule().evolve(…, 1, 3)` to propagate from the slit plane.
    pub fn slit_state(&self, slit: &str) -> Result<ComplexVector, DynamicsError> {
        Ok(self
            .space
            .product_ket(&[("path", slit), ("Ca", "ready"), ("Cb", "ready")])?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(vec![0.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 0.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 1.0, 0.5]).is_err());
        let g = TimeGrid::unit(3).unwrap();
        assert_eq!(g.n_intervals(), 3);
    }

    #[test]
    fn completion_empty_map_is_identity() {
        let u = unitary_completion(&[], 2, tol()).unwrap();
        assert_eq!(u, ComplexMatrix::identity(2).unwrap());
    }

    #[test]
    fn completion_fully_specified_swap() {
        let e0 = ComplexVector::basis(2, 0).unwrap();
        let e1 = ComplexVector::basis(2, 1).unwrap();
        let u = unitary_completion(&[(e0.clone(), e1.clone()), (e1, e0)], 2, tol()).unwrap();
        let want = ComplexMatrix::new(
            2,
            2,
            vec![
                Complex64::ZERO,
                Complex64::ONE,
                Complex64::ONE,
                Complex64::ZERO,
            ],
        )
        .unwrap();
        assert_eq!(u, want);
    }

    #[test]
    fn completion_rejects_bad_inputs() {
        let e0 = ComplexVector::basis(2, 0).unwrap();
        let long = e0.scaled(c64(2.0, 0.0));
        assert!(matches!(
            unitary_completion(&[(long, e0.clone())], 2, tol()),
            Err(DynamicsError::CompletionNotOrthonormal { .. })
        ));
        let e1 = ComplexVector::basis(2, 1).unwrap();
        assert!(matches!(
            unitary_completion(&[(e0.clone(), e0.clone()), (e0.clone(), e1)], 2, tol()),
            Err(DynamicsError::CompletionNotOrthonormal { .. })
        ));
    }

    #[test]
    fn sg_steps_are_unitary() {
        let model = SternGerlachModel::build(c64(0.6, 0.0), c64(0.8, 0.0), tol()).unwrap();
        for u in model.schedule().steps() {
            assert!(u.is_unitary(tol()).unwrap());
            let gram = u.adjoint().matmul(u).unwrap();
            assert!(gram.max_abs_diff(&ComplexMatrix::identity(40).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn sg_rejects_unnormalized_amplitudes() {
        assert!(matches!(
            SternGerlachModel::build(c64(1.0, 0.0), c64(1.0, 0.0), tol()),
            Err(DynamicsError::AmplitudeNormalization { .. })
        ));
    }

    #[test]
    fn sg_eigenstate_detector_probabilities() {
        let up = SternGerlachModel::build(c64(1.0, 0.0), c64(0.0, 0.0), tol()).unwrap();
        let psi3 = up.state(3);
        let da = up.projector("Da*").unwrap();
        let p = psi3.inner(&da.matrix().mul_vec(psi3).unwrap()).unwrap();
        assert!((p.re - 1.0).abs() < 1e-12 && p.im.abs() < 1e-14);

        let dn = SternGerlachModel::build(c64(0.0, 0.0), c64(1.0, 0.0), tol()).unwrap();
        let psi3 = dn.state(3);
        let db = dn.projector("Db*").unwrap();
        let p = psi3.inner(&db.matrix().mul_vec(psi3).unwrap()).unwrap();
        assert!((p.re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sg_born_rule_values() {
        let model = SternGerlachModel::build(c64(0.6, 0.0), c64(0.8, 0.0), tol()).unwrap();
        let psi3 = model.state(3);
        let pa = psi3
            .inner(
                &model
                    .projector("Da*")
                    .unwrap()
                    .matrix()
                    .mul_vec(psi3)
                    .unwrap(),
            )
            .unwrap();
        let pb = psi3
            .inner(
                &model
                    .projector("Db*")
                    .unwrap()
                    .matrix()
                    .mul_vec(psi3)
                    .unwrap(),
            )
            .unwrap();
        assert!((pa.re - 0.36).abs() < 1e-12);
        assert!((pb.re - 0.64).abs() < 1e-12);
        // Joint exclusion: both detectors never fire together.
        let joint = psi3
            .inner(
                &model
                    .projector("Da*Db*")
                    .unwrap()
                    .matrix()
                    .mul_vec(psi3)
                    .unwrap(),
            )
            .unwrap();
        assert!(joint.norm() < 1e-14);
    }

    #[test]
    fn sg_early_states_carry_spin_unchanged() {
        let model = SternGerlachModel::build(c64(0.6, 0.0), c64(0.8, 0.0), tol()).unwrap();
        // At t1 the packet has drifted but the spin superposition and the
        // ready detectors are untouched.
        let want = {
            let up = model
                .space()
                .product_ket(&[
                    ("particle", "w1"),
                    ("spin", "z+"),
                    ("Da", "ready"),
                    ("Db", "ready"),
                ])
                .unwrap()
                .scaled(c64(0.6, 0.0));
            let dn = model
                .space()
                .product_ket(&[
                    ("particle", "w1"),
                    ("spin", "z-"),
                    ("Da", "ready"),
                    ("Db", "ready"),
                ])
                .unwrap()
                .scaled(c64(0.8, 0.0));
            up.add(&dn).unwrap()
        };
        assert!(want.max_abs_diff(model.state(1)) < 1e-12);
    }

    #[test]
    fn sg_midpoint_state_structure() {
        let model = SternGerlachModel::build(c64(0.6, 0.0), c64(0.8, 0.0), tol()).unwrap();
        let want = {
            let a = model
                .space()
                .product_ket(&[
                    ("particle", "w2a"),
                    ("spin", "z+"),
                    ("Da", "ready"),
                    ("Db", "ready"),
                ])
                .unwrap()
                .scaled(c64(0.6, 0.0));
            let b = model
                .space()
                .product_ket(&[
                    ("particle", "w2b"),
                    ("spin", "z-"),
                    ("Da", "ready"),
                    ("Db", "ready"),
                ])
                .unwrap()
                .scaled(c64(0.8, 0.0));
            a.add(&b).unwrap()
        };
        let overlap = want.inner(model.state(2)).unwrap();
        assert!((overlap.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sg_psi3_does_not_commute_with_detector_projectors() {
        let model = SternGerlachModel::build(c64(0.6, 0.0), c64(0.8, 0.0), tol()).unwrap();
        let psi3 = model.projector("psi3").unwrap();
        for name in ["Da*", "Da", "Db*", "Db"] {
            let comm = psi3
                .matrix()
                .commutator(model.projector(name).unwrap().matrix())
                .unwrap();
            assert!(comm.max_norm() > 0.1, "committed with {name}");
        }
    }

    #[test]
    fn evolve_norm_preservation_and_noop() {
        let model = SternGerlachModel::build(c64(0.6, 0.0), c64(0.8, 0.0), tol()).unwrap();
        let psi0 = model.state(0);
        assert_eq!(model.schedule().evolve(psi0, 2, 2).unwrap(), *psi0);
        for j in 0..=3 {
            let s = model.schedule().evolve(psi0, 0, j).unwrap();
            assert!((s.norm() - 1.0).abs() < 1e-12);
        }
        assert!(model.schedule().evolve(psi0, 0, 4).is_err());
        let short = ComplexVector::basis(2, 0).unwrap();
        assert!(matches!(
            model.schedule().evolve(&short, 0, 1),
            Err(DynamicsError::StateDimension { .. })
        ));
    }

    #[test]
    fn adjoint_of_model_unitaries_inverts_them() {
        let model = SternGerlachModel::build(c64(0.6, 0.0), c64(0.8, 0.0), tol()).unwrap();
        for u in model.schedule().steps() {
            let prod = u.adjoint().matmul(u).unwrap();
            assert!(prod.max_abs_diff(&ComplexMatrix::identity(40).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn crossed_beam_routing() {
        let model = CrossedBeamModel::build(tol()).unwrap();
        // Slit B → C^a triggers with certainty.
        let from_b = model.slit_state("B").unwrap();
        let out = model.schedule().evolve(&from_b, 1, 3).unwrap();
        let ca = model.projector("Ca*").unwrap();
        let p = out.inner(&ca.matrix().mul_vec(&out).unwrap()).unwrap();
        assert!((p.re - 1.0).abs() < 1e-12);
        // Slit A → C^b, the mirror case.
        let from_a = model.slit_state("A").unwrap();
        let out = model.schedule().evolve(&from_a, 1, 3).unwrap();
        let cb = model.projector("Cb*").unwrap();
        let p = out.inner(&cb.matrix().mul_vec(&out).unwrap()).unwrap();
        assert!((p.re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn crossed_beam_symmetric_superposition() {
        let model = CrossedBeamModel::build(tol()).unwrap();
        let sym = model
            .slit_state("A")
            .unwrap()
            .add(&model.slit_state("B").unwrap())
            .unwrap()
            .scaled(c64(std::f64::consts::FRAC_1_SQRT_2, 0.0));
        let out = model.schedule().evolve(&sym, 1, 3).unwrap();
        for name in ["Ca*", "Cb*"] {
            let p = out
                .inner(
                    &model
                        .projector(name)
                        .unwrap()
                        .matrix()
                        .mul_vec(&out)
                        .unwrap(),
                )
                .unwrap();
            assert!((p.re - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn crossed_beam_reflection_symmetry() {
        let model = CrossedBeamModel::build(tol()).unwrap();
        let s = model.reflection_swap().unwrap();
        assert!(s.is_unitary(tol()).unwrap());
        for u in model.schedule().steps() {
            let conj = s.matmul(u).unwrap().matmul(&s).unwrap();
            assert!(conj.max_abs_diff(u) < 1e-12);
        }
    }

    #[test]
    fn source_evolution_reaches_detectors_evenly() {
        let model = CrossedBeamModel::build(tol()).unwrap();
        let out = model
            .schedule()
            .evolve(model.initial_state(), 0, 3)
            .unwrap();
        for name in ["Ca*", "Cb*"] {
            let p = out
                .inner(
                    &model
                        .projector(name)
                        .unwrap()
                        .matrix()
                        .mul_vec(&out)
                        .unwrap(),
                )
                .unwrap();
            assert!((p.re - 0.5).abs() < 1e-12);
        }
    }
}
