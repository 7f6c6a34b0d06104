//! Labeled tensor-product Hilbert spaces, quantum properties as projectors,
//! projective decompositions of the identity (PDIs), and observables with
//! their spectral PDIs.
//!
//! A PDI is the engine's notion of a quantum sample space: mutually
//! orthogonal nonzero projectors that sum to the identity. Every projector
//! is validated at construction — Hermitian, idempotent, integral trace —
//! so downstream code can rely on the algebra without re-checking.

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{ComplexMatrix, ComplexVector, LinalgError, Tolerance, DIM_CAP};

/// Default gap used to decide when two numerical eigenvalues are "the same"
/// when reading a PDI off an observable's spectrum.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum HilbertError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("a Hilbert space needs at least one subsystem")]
    EmptySpace,
    #[error("duplicate subsystem name `{0}`")]
    DuplicateSubsystem(String),
    #[error("duplicate basis label `{label}` in subsystem `{subsystem}`")]
    DuplicateBasisLabel { subsystem: String, label: String },
    #[error("subsystem `{subsystem}` needs exactly {dim} basis labels, got {got}")]
    BasisLabelCount {
        subsystem: String,
        dim: usize,
        got: usize,
    },
    #[error("space dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("projector `{label}` is not Hermitian: residual {residual:.3e}")]
    NotHermitian { label: String, residual: f64 },
    #[error("projector `{label}` is not idempotent: max |P² − P| = {residual:.3e}")]
    NotIdempotent { label: String, residual: f64 },
    #[error("projector `{label}` trace {trace:.6} is not a nonnegative integer within tolerance")]
    TraceNotIntegral { label: String, trace: f64 },
    #[error("objects live on different spaces ({context})")]
    SpaceMismatch { context: &'static str },
    #[error("unknown subsystem `{0}`")]
    UnknownSubsystem(String),
    #[error("subsystem `{0}` appears out of order relative to the target space")]
    SubsystemOrder(String),
    #[error("subsystem `{0}` has different dimension or basis labels in the target space")]
    SubsystemShape(String),
    #[error("unknown basis label `{label}` in subsystem `{subsystem}`")]
    UnknownBasisLabel { subsystem: String, label: String },
    #[error("no basis label assigned for subsystem `{0}`")]
    MissingAssignment(String),
    #[error("PDI completeness failure: max |Σ P_j − I| = {residual:.3e}")]
    PdiCompleteness { residual: f64 },
    #[error(
        "PDI orthogonality failure between `{left}` and `{right}`: max |P_j P_k| = {norm:.3e}"
    )]
    PdiOrthogonality {
        left: String,
        right: String,
        norm: f64,
    },
    #[error("PDI contains the zero projector `{0}`")]
    PdiZeroProjector(String),
    #[error("a PDI needs at least one projector")]
    PdiEmpty,
    #[error("observable is not Hermitian: residual {residual:.3e}")]
    ObservableNotHermitian { residual: f64 },
}

/// One labeled tensor factor of a composite space.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsystem {
    name: String,
    basis_labels: Vec<String>,
}

impl Subsystem {
    pub fn new(name: impl Into<String>, basis_labels: Vec<String>) -> Result<Self, HilbertError> {
        let name = name.into();
        if basis_labels.is_empty() {
            return Err(HilbertError::BasisLabelCount {
                subsystem: name,
                dim: 1,
                got: 0,
            });
        }
        for (i, l) in basis_labels.iter().enumerate() {
            if basis_labels[..i].contains(l) {
                return Err(HilbertError::DuplicateBasisLabel {
                    subsystem: name,
                    label: l.clone(),
                });
            }
        }
        Ok(Subsystem { name, basis_labels })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.basis_labels.len()
    }

    pub fn basis_labels(&self) -> &[String] {
        &self.basis_labels
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.basis_labels.iter().position(|l| l == label)
    }
}

/// Ordered composite of labeled subsystems. The basis index of the composite
/// space is the mixed-radix encoding of per-subsystem indices in declared
/// order (first subsystem most significant).
#[derive(Debug, Clone, PartialEq)]
pub struct HilbertSpace {
    subsystems: Vec<Subsystem>,
    total_dim: usize,
}

impl HilbertSpace {
    pub fn new(subsystems: Vec<Subsystem>) -> Result<Arc<Self>, HilbertError> {
        if subsystems.is_empty() {
            return Err(HilbertError::EmptySpace);
        }
        let mut total_dim = 1usize;
        for (i, s) in subsystems.iter().enumerate() {
            if subsystems[..i].iter().any(|t| t.name == s.name) {
                return Err(HilbertError::DuplicateSubsystem(s.name.clone()));
            }
            total_dim = total_dim.saturating_mul(s.dim());
            if total_dim > DIM_CAP {
                return Err(HilbertError::DimensionCap {
                    dim: total_dim,
                    cap: DIM_CAP,
                });
            }
        }
        Ok(Arc::new(HilbertSpace {
            subsystems,
            total_dim,
        }))
    }

    /// Convenience: subsystems given as (name, basis labels) pairs.
    pub fn from_parts(parts: &[(&str, &[&str])]) -> Result<Arc<Self>, HilbertError> {
        let subsystems = parts
            .iter()
            .map(|(name, labels)| {
                Subsystem::new(*name, labels.iter().map(|s| s.to_string()).collect())
            })
            .collect::<Result<Vec<_>, _>>()?;
        HilbertSpace::new(subsystems)
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn subsystem(&self, name: &str) -> Option<&Subsystem> {
        self.subsystems.iter().find(|s| s.name == name)
    }

    fn dims(&self) -> Vec<usize> {
        self.subsystems.iter().map(|s| s.dim()).collect()
    }

    /// Decompose a composite basis index into per-subsystem indices.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let dims = self.dims();
        let mut out = vec![0usize; dims.len()];
        for (k, d) in dims.iter().enumerate().rev() {
            out[k] = index % d;
            index /= d;
        }
        out
    }

    /// Recompose per-subsystem indices into the composite basis index.
    pub fn index_of(&self, digits: &[usize]) -> usize {
        self.subsystems
            .iter()
            .zip(digits)
            .fold(0usize, |acc, (s, &d)| acc * s.dim() + d)
    }

    /// Basis ket for a full assignment of one label per subsystem.
    pub fn product_ket(&self, assignment: &[(&str, &str)]) -> Result<ComplexVector, HilbertError> {
        let mut digits = Vec::with_capacity(self.subsystems.len());
        for s in &self.subsystems {
            let (_, label) = assignment
                .iter()
                .find(|(name, _)| *name == s.name)
                .ok_or_else(|| HilbertError::MissingAssignment(s.name.clone()))?;
            let idx = s
                .label_index(label)
                .ok_or_else(|| HilbertError::UnknownBasisLabel {
                    subsystem: s.name.clone(),
                    label: label.to_string(),
                })?;
            digits.push(idx);
        }
        for (name, _) in assignment {
            if self.subsystem(name).is_none() {
                return Err(HilbertError::UnknownSubsystem(name.to_string()));
            }
        }
        Ok(ComplexVector::basis(
            self.total_dim,
            self.index_of(&digits),
        )?)
    }

    /// Human-readable label of a composite basis index, e.g. `w0⊗z+⊗ready⊗ready`.
    pub fn basis_label(&self, index: usize) -> String {
        self.digits(index)
            .iter()
            .zip(&self.subsystems)
            .map(|(&d, s)| s.basis_labels[d].as_str())
            .collect::<Vec<_>>()
            .join("⊗")
    }

    /// Projector onto a set of basis labels of one subsystem, tensor-padded
    /// with the identity everywhere else.
    pub fn basis_projector(
        self: &Arc<Self>,
        subsystem: &str,
        labels: &[&str],
        label: impl Into<String>,
        tol: Tolerance,
    ) -> Result<Projector, HilbertError> {
        let sub = self
            .subsystem(subsystem)
            .ok_or_else(|| HilbertError::UnknownSubsystem(subsystem.to_string()))?;
        let mut diag = vec![0.0; sub.dim()];
        for l in labels {
            let idx = sub
                .label_index(l)
                .ok_or_else(|| HilbertError::UnknownBasisLabel {
                    subsystem: subsystem.to_string(),
                    label: l.to_string(),
                })?;
            diag[idx] = 1.0;
        }
        let small_space = HilbertSpace::new(vec![sub.clone()])?;
        let small = Projector::new(&small_space, ComplexMatrix::diag_real(&diag)?, label, tol)?;
        small.embed(self, tol)
    }
}

/// A quantum property: a validated orthogonal projector on a specific space.
#[derive(Debug, Clone)]
pub struct Projector {
    space: Arc<HilbertSpace>,
    matrix: ComplexMatrix,
    label: String,
    rank: usize,
}

impl Projector {
    /// Validates P = P†, P² = P, and integral trace, all within `tol.eps`.
    pub fn new(
        space: &Arc<HilbertSpace>,
        matrix: ComplexMatrix,
        label: impl Into<String>,
        tol: Tolerance,
    ) -> Result<Self, HilbertError> {
        let label = label.into();
        if !matrix.is_square() || matrix.rows() != space.total_dim() {
            return Err(HilbertError::DimensionMismatch {
                context: "projector matrix",
                expected: space.total_dim(),
                got: matrix.rows(),
            });
        }
        let herm_residual = matrix.max_abs_diff(&matrix.adjoint());
        if herm_residual > tol.eps {
            return Err(HilbertError::NotHermitian {
                label,
                residual: herm_residual,
            });
        }
        let square = matrix.matmul(&matrix)?;
        let idem_residual = square.max_abs_diff(&matrix);
        if idem_residual > tol.eps {
            return Err(HilbertError::NotIdempotent {
                label,
                residual: idem_residual,
            });
        }
        let trace = matrix.trace().re;
        let rank = trace.round();
        if (trace - rank).abs() > tol.eps || rank < 0.0 {
            return Err(HilbertError::TraceNotIntegral { label, trace });
        }
        Ok(Projector {
            space: Arc::clone(space),
            matrix,
            label,
            rank: rank as usize,
        })
    }

    /// Rank-1 projector |ψ⟩⟨ψ|/⟨ψ|ψ⟩ onto the ray of `state`.
    pub fn from_ket(
        space: &Arc<HilbertSpace>,
        state: &ComplexVector,
        label: impl Into<String>,
        tol: Tolerance,
    ) -> Result<Self, HilbertError> {
        if state.dim() != space.total_dim() {
            return Err(HilbertError::DimensionMismatch {
                context: "ket projector",
                expected: space.total_dim(),
                got: state.dim(),
            });
        }
        let unit = state.normalized()?;
        Projector::new(space, unit.outer(&unit), label, tol)
    }

    /// Identity projector on `space`.
    pub fn identity(
        space: &Arc<HilbertSpace>,
        label: impl Into<String>,
        tol: Tolerance,
    ) -> Result<Self, HilbertError> {
        Projector::new(
            space,
            ComplexMatrix::identity(space.total_dim())?,
            label,
            tol,
        )
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        &self.space
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_zero(&self) -> bool {
        self.rank == 0
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// I − P, labeled by the caller.
    pub fn complement(
        &self,
        label: impl Into<String>,
        tol: Tolerance,
    ) -> Result<Self, HilbertError> {
        let id = ComplexMatrix::identity(self.space.total_dim())?;
        Projector::new(&self.space, id.sub(&self.matrix)?, label, tol)
    }

    /// Tensor-pad with the identity on every subsystem of `target` that this
    /// projector's space does not mention. The projector's subsystems must
    /// appear in `target` in the same relative order, with identical
    /// dimensions and basis labels.
    pub fn embed(&self, target: &Arc<HilbertSpace>, tol: Tolerance) -> Result<Self, HilbertError> {
        if **target == *self.space {
            return Ok(Projector {
                space: Arc::clone(target),
                matrix: self.matrix.clone(),
                label: self.label.clone(),
                rank: self.rank,
            });
        }
        // Match source subsystems to target positions, preserving order.
        let mut positions = Vec::with_capacity(self.space.subsystems().len());
        let mut cursor = 0usize;
        for sub in self.space.subsystems() {
            let found = target.subsystems()[cursor..]
                .iter()
                .position(|t| t.name() == sub.name());
            match found {
                Some(offset) => {
                    let pos = cursor + offset;
                    if target.subsystems()[pos] != *sub {
                        return Err(HilbertError::SubsystemShape(sub.name().to_string()));
                    }
                    positions.push(pos);
                    cursor = pos + 1;
                }
                None => {
                    // Distinguish "absent" from "present but out of order".
                    if target.subsystem(sub.name()).is_some() {
                        return Err(HilbertError::SubsystemOrder(sub.name().to_string()));
                    }
                    return Err(HilbertError::UnknownSubsystem(sub.name().to_string()));
                }
            }
        }

        let n = target.total_dim();
        let mut out = ComplexMatrix::zeros(n, n)?;
        let row_digits: Vec<Vec<usize>> = (0..n).map(|i| target.digits(i)).collect();
        let matched: Vec<bool> = {
            let mut v = vec![false; target.subsystems().len()];
            for &p in &positions {
                v[p] = true;
            }
            v
        };
        for (r, rd) in row_digits.iter().enumerate() {
            for (c, cd) in row_digits.iter().enumerate() {
                if matched
                    .iter()
                    .enumerate()
                    .any(|(k, &m)| !m && rd[k] != cd[k])
                {
                    continue;
                }
                let pr: Vec<usize> = positions.iter().map(|&p| rd[p]).collect();
                let pc: Vec<usize> = positions.iter().map(|&p| cd[p]).collect();
                out[(r, c)] = self.matrix[(self.space.index_of(&pr), self.space.index_of(&pc))];
            }
        }
        Projector::new(target, out, self.label.clone(), tol)
    }
}

/// Projective decomposition of the identity: the engine's quantum sample
/// space. `complete` is false only for families that have been pruned.
#[derive(Debug, Clone)]
pub struct Pdi {
    space: Arc<HilbertSpace>,
    projectors: Vec<Projector>,
    complete: bool,
}

impl Pdi {
    /// Validate mutual orthogonality, completeness, and non-triviality.
    pub fn new(projectors: Vec<Projector>, tol: Tolerance) -> Result<Self, HilbertError> {
        let first = projectors.first().ok_or(HilbertError::PdiEmpty)?;
        let space = Arc::clone(first.space());
        for p in &projectors {
            if *p.space().as_ref() != *space {
                return Err(HilbertError::SpaceMismatch {
                    context: "PDI projectors",
                });
            }
            if p.is_zero() {
                return Err(HilbertError::PdiZeroProjector(p.label().to_string()));
            }
        }
        for (i, p) in projectors.iter().enumerate() {
            for q in &projectors[i + 1..] {
                let norm = p.matrix().matmul(q.matrix())?.max_norm();
                if norm > tol.eps {
                    return Err(HilbertError::PdiOrthogonality {
                        left: p.label().to_string(),
                        right: q.label().to_string(),
                        norm,
                    });
                }
            }
        }
        let mut sum = ComplexMatrix::zeros(space.total_dim(), space.total_dim())?;
        for p in &projectors {
            sum = sum.add(p.matrix())?;
        }
        let residual = sum.max_abs_diff(&ComplexMatrix::identity(space.total_dim())?);
        if residual > tol.eps {
            return Err(HilbertError::PdiCompleteness { residual });
        }
        Ok(Pdi {
            space,
            projectors,
            complete: true,
        })
    }

    /// Orthogonal but deliberately incomplete set, produced by pruning.
    pub(crate) fn incomplete(space: Arc<HilbertSpace>, projectors: Vec<Projector>) -> Self {
        Pdi {
            space,
            projectors,
            complete: false,
        }
    }

    /// The implicit framework {P, I−P} of a single property; the complement
    /// is dropped when P is the identity.
    pub fn implicit(p: &Projector, tol: Tolerance) -> Result<Self, HilbertError> {
        let complement = p.complement(format!("not_{}", p.label()), tol)?;
        if complement.is_zero() {
            Pdi::new(vec![p.clone()], tol)
        } else {
            Pdi::new(vec![p.clone(), complement], tol)
        }
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        &self.space
    }

    pub fn projectors(&self) -> &[Projector] {
        &self.projectors
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn labels(&self) -> Vec<&str> {
        self.projectors.iter().map(|p| p.label()).collect()
    }

    pub fn by_label(&self, label: &str) -> Option<&Projector> {
        self.projectors.iter().find(|p| p.label() == label)
    }
}

/// Hermitian operator with its spectral PDI available on demand.
#[derive(Debug, Clone)]
pub struct Observable {
    space: Arc<HilbertSpace>,
    matrix: ComplexMatrix,
}

impl Observable {
    pub fn new(
        space: &Arc<HilbertSpace>,
        matrix: ComplexMatrix,
        tol: Tolerance,
    ) -> Result<Self, HilbertError> {
        if !matrix.is_square() || matrix.rows() != space.total_dim() {
            return Err(HilbertError::DimensionMismatch {
                context: "observable matrix",
                expected: space.total_dim(),
                got: matrix.rows(),
            });
        }
        let residual = matrix.max_abs_diff(&matrix.adjoint());
        if residual > tol.eps {
            return Err(HilbertError::ObservableNotHermitian { residual });
        }
        Ok(Observable {
            space: Arc::clone(space),
            matrix,
        })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        &self.space
    }

    /// Spectral decomposition A = Σ a_j P_j with each eigenvalue listed once.
    ///
    /// Numerical eigenvalues closer than `cluster_tol` are grouped into one
    /// spectral projector; the reported eigenvalue is the cluster mean.
    /// Returns eigenvalues in descending order with the matching PDI.
    pub fn spectral_pdi(
        &self,
        tol: Tolerance,
        cluster_tol: f64,
    ) -> Result<(Vec<f64>, Pdi), HilbertError> {
        let eig = self.matrix.hermitian_eig(tol)?;
        let n = eig.eigenvalues.len();
        let mut clusters: Vec<(f64, Vec<usize>)> = Vec::new();
        for k in 0..n {
            match clusters.last_mut() {
                Some((value, members))
                    if (eig.eigenvalues[k] - eig.eigenvalues[*members.last().unwrap()]).abs()
                        <= cluster_tol =>
                {
                    members.push(k);
                    *value = members.iter().map(|&m| eig.eigenvalues[m]).sum::<f64>()
                        / members.len() as f64;
                }
                _ => clusters.push((eig.eigenvalues[k], vec![k])),
            }
        }
        let mut values = Vec::with_capacity(clusters.len());
        let mut projectors = Vec::with_capacity(clusters.len());
        for (value, members) in clusters {
            let mut sum = ComplexMatrix::zeros(n, n)?;
            for &m in &members {
                sum = sum.add(&eig.eigenvectors[m].outer(&eig.eigenvectors[m]))?;
            }
            // Spectral projectors carry ~machine-precision dust from the
            // eigensolver, so validation floors the tolerance at 1e-12.
            let ptol = Tolerance {
                eps: tol.eps.max(1e-12),
            };
            projectors.push(Projector::new(&self.space, sum, format!("{value}"), ptol)?);
            values.push(value);
        }
        let ptol = Tolerance {
            eps: tol.eps.max(1e-12),
        };
        Ok((values, Pdi::new(projectors, ptol)?))
    }
}

/// Complex amplitude pair (α, β) normalized on the spin Bloch circle;
/// convenience for tests and model builders.
pub fn spin_ket(alpha: Complex64, beta: Complex64) -> Result<ComplexVector, LinalgError> {
    ComplexVector::new(vec![alpha, beta])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn spin_space() -> Arc<HilbertSpace> {
        HilbertSpace::from_parts(&[("spin", &["z+", "z-"])]).unwrap()
    }

    fn zp(space: &Arc<HilbertSpace>) -> Projector {
        Projector::new(
            space,
            ComplexMatrix::diag_real(&[1.0, 0.0]).unwrap(),
            "z+",
            tol(),
        )
        .unwrap()
    }

    fn zm(space: &Arc<HilbertSpace>) -> Projector {
        Projector::new(
            space,
            ComplexMatrix::diag_real(&[0.0, 1.0]).unwrap(),
            "z-",
            tol(),
        )
        .unwrap()
    }

    fn xp(space: &Arc<HilbertSpace>) -> Projector {
        let m = ComplexMatrix::new(
            2,
            2,
            vec![c64(0.5, 0.0), c64(0.5, 0.0), c64(0.5, 0.0), c64(0.5, 0.0)],
        )
        .unwrap();
        Projector::new(space, m, "x+", tol()).unwrap()
    }

    #[test]
    fn make_space_cases() {
        assert_eq!(spin_space().total_dim(), 2);
        let sg = HilbertSpace::from_parts(&[
            ("particle", &["w0", "w1", "w2a", "w2b", "abs"]),
            ("spin", &["z+", "z-"]),
            ("Da", &["ready", "trig"]),
            ("Db", &["ready", "trig"]),
        ])
        .unwrap();
        assert_eq!(sg.total_dim(), 40);
        assert!(matches!(
            HilbertSpace::new(vec![]),
            Err(HilbertError::EmptySpace)
        ));
        let dup = HilbertSpace::from_parts(&[("a", &["0"]), ("a", &["0"])]);
        assert!(matches!(dup, Err(HilbertError::DuplicateSubsystem(_))));
    }

    #[test]
    fn space_dimension_cap() {
        let qubits: Vec<(String, Vec<String>)> = (0..13)
            .map(|i| (format!("q{i}"), vec!["0".to_string(), "1".to_string()]))
            .collect();
        let subsystems = qubits
            .into_iter()
            .map(|(n, l)| Subsystem::new(n, l).unwrap())
            .collect();
        assert!(matches!(
            HilbertSpace::new(subsystems),
            Err(HilbertError::DimensionCap { .. })
        ));
    }

    #[test]
    fn mixed_radix_roundtrip() {
        let sg = HilbertSpace::from_parts(&[
            ("particle", &["w0", "w1", "w2a", "w2b", "abs"]),
            ("spin", &["z+", "z-"]),
            ("Da", &["ready", "trig"]),
            ("Db", &["ready", "trig"]),
        ])
        .unwrap();
        for i in 0..40 {
            assert_eq!(sg.index_of(&sg.digits(i)), i);
        }
        let ket = sg
            .product_ket(&[
                ("particle", "w2a"),
                ("spin", "z+"),
                ("Da", "ready"),
                ("Db", "ready"),
            ])
            .unwrap();
        // index = ((2*2 + 0)*2 + 0)*2 + 0 = 16
        assert_eq!(ket[16], c64(1.0, 0.0));
        assert_eq!(ket.norm(), 1.0);
    }

    #[test]
    fn ket_projector_cases() {
        let space = spin_space();
        let e1 = ComplexVector::basis(2, 0).unwrap();
        let p = Projector::from_ket(&space, &e1, "z+", tol()).unwrap();
        assert_eq!(p.matrix(), zp(&space).matrix());
        assert_eq!(p.rank(), 1);

        let plus = ComplexVector::new(vec![
            c64(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            c64(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        ])
        .unwrap();
        let px = Projector::from_ket(&space, &plus, "x+", tol()).unwrap();
        assert!(px.matrix().max_abs_diff(xp(&space).matrix()) < 1e-15);

        let scaled = e1.scaled(c64(2.0, 0.0));
        let p2 = Projector::from_ket(&space, &scaled, "z+", tol()).unwrap();
        assert_eq!(p2.matrix(), p.matrix());

        let zero = ComplexVector::zeros(2).unwrap();
        assert!(Projector::from_ket(&space, &zero, "bad", tol()).is_err());
    }

    #[test]
    fn projector_validation_failures() {
        let space = spin_space();
        let not_idem = ComplexMatrix::diag_real(&[0.5, 0.5]).unwrap();
        assert!(matches!(
            Projector::new(&space, not_idem, "half", tol()),
            Err(HilbertError::NotIdempotent { .. })
        ));
        let not_herm = ComplexMatrix::new(
            2,
            2,
            vec![
                Complex64::ONE,
                c64(0.1, 0.0),
                Complex64::ZERO,
                Complex64::ZERO,
            ],
        )
        .unwrap();
        assert!(matches!(
            Projector::new(&space, not_herm, "skew", tol()),
            Err(HilbertError::NotHermitian { .. })
        ));
    }

    #[test]
    fn embed_spin_into_pair() {
        let space = spin_space();
        let target =
            HilbertSpace::from_parts(&[("spin", &["z+", "z-"]), ("Da", &["ready", "trig"])])
                .unwrap();
        let embedded = zp(&space).embed(&target, tol()).unwrap();
        let want = ComplexMatrix::diag_real(&[1.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(embedded.matrix(), &want);
        assert_eq!(embedded.rank(), 2);
    }

    #[test]
    fn embed_same_space_is_noop() {
        let space = spin_space();
        let p = zp(&space);
        let q = p.embed(&space, tol()).unwrap();
        assert_eq!(p.matrix(), q.matrix());
    }

    #[test]
    fn embed_order_and_unknown_errors() {
        let ab = HilbertSpace::from_parts(&[("a", &["0", "1"]), ("b", &["0", "1"])]).unwrap();
        let ba = HilbertSpace::from_parts(&[("b", &["0", "1"]), ("a", &["0", "1"])]).unwrap();
        let p = Projector::identity(&ab, "I", tol()).unwrap();
        assert!(matches!(
            p.embed(&ba, tol()),
            Err(HilbertError::SubsystemOrder(_))
        ));
        let c = HilbertSpace::from_parts(&[("c", &["0", "1"])]).unwrap();
        let pc = Projector::identity(&c, "I", tol()).unwrap();
        assert!(matches!(
            pc.embed(&ab, tol()),
            Err(HilbertError::UnknownSubsystem(_))
        ));
    }

    #[test]
    fn embed_leading_subsystem_matches_kron() {
        let particle =
            HilbertSpace::from_parts(&[("particle", &["w0", "w1", "w2a", "w2b", "abs"])]).unwrap();
        let sg = HilbertSpace::from_parts(&[
            ("particle", &["w0", "w1", "w2a", "w2b", "abs"]),
            ("spin", &["z+", "z-"]),
            ("Da", &["ready", "trig"]),
            ("Db", &["ready", "trig"]),
        ])
        .unwrap();
        let w2a = Projector::new(
            &particle,
            ComplexMatrix::diag_real(&[0.0, 0.0, 1.0, 0.0, 0.0]).unwrap(),
            "w2a",
            tol(),
        )
        .unwrap();
        let embedded = w2a.embed(&sg, tol()).unwrap();
        let kron = w2a
            .matrix()
            .tensor(&ComplexMatrix::identity(8).unwrap())
            .unwrap();
        assert_eq!(embedded.matrix(), &kron);
        assert_eq!(embedded.rank(), 8);
    }

    #[test]
    fn embed_nonadjacent_subsystem() {
        // Embed a projector on (a, c) into (a, b, c): identity is padded in
        // the middle, exercising the non-contiguous index arithmetic.
        let ac = HilbertSpace::from_parts(&[("a", &["0", "1"]), ("c", &["0", "1"])]).unwrap();
        let abc =
            HilbertSpace::from_parts(&[("a", &["0", "1"]), ("b", &["0", "1"]), ("c", &["0", "1"])])
                .unwrap();
        let ket = ac.product_ket(&[("a", "1"), ("c", "0")]).unwrap();
        let p = Projector::from_ket(&ac, &ket, "p", tol()).unwrap();
        let embedded = p.embed(&abc, tol()).unwrap();
        assert_eq!(embedded.rank(), 2);
        // |1b0⟩ for b ∈ {0,1} spans the embedded subspace.
        for b in ["0", "1"] {
            let v = abc
                .product_ket(&[("a", "1"), ("b", b), ("c", "0")])
                .unwrap();
            let pv = embedded.matrix().mul_vec(&v).unwrap();
            assert!(pv.max_abs_diff(&v) < 1e-12);
        }
    }

    #[test]
    fn validate_pdi_cases() {
        let space = spin_space();
        let ok = Pdi::new(vec![zp(&space), zm(&space)], tol()).unwrap();
        assert_eq!(ok.len(), 2);
        assert!(ok.is_complete());

        let err = Pdi::new(vec![zp(&space), xp(&space)], tol()).unwrap_err();
        assert!(matches!(err, HilbertError::PdiOrthogonality { .. }));

        let err = Pdi::new(vec![zp(&space)], tol()).unwrap_err();
        assert!(matches!(err, HilbertError::PdiCompleteness { .. }));
    }

    #[test]
    fn implicit_framework() {
        let space = spin_space();
        let pdi = Pdi::implicit(&zp(&space), tol()).unwrap();
        assert_eq!(pdi.labels(), vec!["z+", "not_z+"]);
        let id = Projector::identity(&space, "I", tol()).unwrap();
        let trivial = Pdi::implicit(&id, tol()).unwrap();
        assert_eq!(trivial.len(), 1);
    }

    #[test]
    fn observable_spectral_pdi_sz() {
        let space = spin_space();
        let sz = Observable::new(
            &space,
            ComplexMatrix::diag_real(&[0.5, -0.5]).unwrap(),
            tol(),
        )
        .unwrap();
        let (values, pdi) = sz.spectral_pdi(tol(), DEFAULT_CLUSTER_TOL).unwrap();
        assert_eq!(values, vec![0.5, -0.5]);
        assert_eq!(pdi.projectors()[0].matrix(), zp(&space).matrix());
        assert_eq!(pdi.projectors()[1].matrix(), zm(&space).matrix());
    }

    #[test]
    fn observable_degenerate_identity() {
        let space = spin_space();
        let id = Observable::new(&space, ComplexMatrix::identity(2).unwrap(), tol()).unwrap();
        let (values, pdi) = id.spectral_pdi(tol(), DEFAULT_CLUSTER_TOL).unwrap();
        assert_eq!(values.len(), 1);
        assert!((values[0] - 1.0).abs() < 1e-14);
        assert_eq!(pdi.len(), 1);
        assert_eq!(pdi.projectors()[0].rank(), 2);
    }

    #[test]
    fn observable_eigenvalue_clustering() {
        let space = HilbertSpace::from_parts(&[("m", &["0", "1", "2"])]).unwrap();
        let a = Observable::new(
            &space,
            ComplexMatrix::diag_real(&[1.0, 1.0 + 1e-13, 2.0]).unwrap(),
            tol(),
        )
        .unwrap();
        let (values, pdi) = a.spectral_pdi(tol(), DEFAULT_CLUSTER_TOL).unwrap();
        assert_eq!(values.len(), 2);
        assert!((values[0] - 2.0).abs() < 1e-12);
        assert!((values[1] - 1.0).abs() < 1e-12);
        assert_eq!(pdi.projectors()[0].rank(), 1);
        assert_eq!(pdi.projectors()[1].rank(), 2);
    }

    #[test]
    fn incompatible_spin_properties_do_not_commute() {
        let space = spin_space();
        let comm = zp(&space).matrix().commutator(xp(&space).matrix()).unwrap();
        assert!(comm.max_norm() >= 0.4);
        assert!((comm.max_norm() - 0.5).abs() < 1e-12);
    }
}
