//! Shared test support: seeded random generators for states, unitaries,
//! observables, and history families, plus the sequential-projection
//! oracle that cross-checks chain-operator weights by an independent
//! route.

#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use chq::dynamics::{unitary_completion, TimeGrid, UnitarySchedule};
use chq::hilbert::{HilbertSpace, Observable, Pdi, Projector, Subsystem};
use chq::histories::HistoryFamily;
use chq::linalg::{c64, ComplexMatrix, ComplexVector, Tolerance};
use chq::Complex64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tol() -> Tolerance {
    Tolerance::default()
}

pub fn random_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Normalized random state.
pub fn random_state(dim: usize, rng: &mut ChaCha8Rng) -> ComplexVector {
    loop {
        let v = ComplexVector::new((0..dim).map(|_| random_complex(rng)).collect()).unwrap();
        if v.norm() > 0.3 {
            return v.normalized().unwrap();
        }
    }
}

/// Random full orthonormal basis via repeated orthogonalization.
pub fn random_orthonormal_basis(dim: usize, rng: &mut ChaCha8Rng) -> Vec<ComplexVector> {
    let mut basis: Vec<ComplexVector> = Vec::with_capacity(dim);
    while basis.len() < dim {
        let mut w = ComplexVector::new((0..dim).map(|_| random_complex(rng)).collect()).unwrap();
        for _ in 0..2 {
            for b in &basis {
                let overlap = b.inner(&w).unwrap();
                w = w.sub(&b.scaled(overlap)).unwrap();
            }
        }
        if w.norm() > 1e-3 {
            basis.push(w.normalized().unwrap());
        }
    }
    basis
}

/// Random unitary built by completing a fully specified random
/// orthonormal map.
pub fn random_unitary(dim: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let inputs = random_orthonormal_basis(dim, rng);
    let outputs = random_orthonormal_basis(dim, rng);
    let pairs: Vec<(ComplexVector, ComplexVector)> = inputs.into_iter().zip(outputs).collect();
    unitary_completion(&pairs, dim, tol()).unwrap()
}

pub fn random_hermitian(dim: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let m = ComplexMatrix::new(
        dim,
        dim,
        (0..dim * dim).map(|_| random_complex(rng)).collect(),
    )
    .unwrap();
    m.add(&m.adjoint()).unwrap().scaled(c64(0.5, 0.0))
}

/// Random PDI with (generically) degenerate spectrum: integer eigenvalues
/// in 0..3 conjugated by a random unitary, then read back through the
/// spectral decomposition.
pub fn random_pdi(space: &Arc<HilbertSpace>, rng: &mut ChaCha8Rng) -> Pdi {
    let dim = space.total_dim();
    let values: Vec<f64> = (0..dim).map(|_| rng.gen_range(0..3) as f64).collect();
    let u = random_unitary(dim, rng);
    let a = u
        .matmul(&ComplexMatrix::diag_real(&values).unwrap())
        .unwrap()
        .matmul(&u.adjoint())
        .unwrap();
    let obs = Observable::new(space, a, tol()).unwrap();
    let (_, pdi) = obs.spectral_pdi(tol(), 1e-6).unwrap();
    pdi
}

/// One random evaluation instance: a small space, a short random
/// schedule, random per-time PDIs, and a pure initial state.
pub struct RandomInstance {
    pub space: Arc<HilbertSpace>,
    pub schedule: Arc<UnitarySchedule>,
    pub initial: ComplexVector,
    pub family: HistoryFamily,
}

pub fn random_instance(seed: u64) -> RandomInstance {
    let mut r = rng(seed);
    const DIM_CHOICES: &[&[usize]] = &[
        &[2],
        &[3],
        &[4],
        &[5],
        &[6],
        &[7],
        &[8],
        &[2, 2],
        &[2, 3],
        &[2, 4],
        &[2, 2, 2],
    ];
    let dims = DIM_CHOICES[r.gen_range(0..DIM_CHOICES.len())];
    let subsystems = dims
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            Subsystem::new(format!("s{i}"), (0..d).map(|k| format!("b{k}")).collect()).unwrap()
        })
        .collect();
    let space = HilbertSpace::new(subsystems).unwrap();
    let dim = space.total_dim();

    let n_intervals = r.gen_range(1..=3usize);
    let steps = (0..n_intervals)
        .map(|_| random_unitary(dim, &mut r))
        .collect();
    let schedule = Arc::new(
        UnitarySchedule::new(
            Arc::clone(&space),
            TimeGrid::unit(n_intervals).unwrap(),
            steps,
            tol(),
        )
        .unwrap(),
    );

    let n_events = r.gen_range(1..=n_intervals);
    let mut times: Vec<usize> = (1..=n_intervals).collect();
    while times.len() > n_events {
        let drop = r.gen_range(0..times.len());
        times.remove(drop);
    }
    let events: Vec<(usize, Pdi)> = times
        .into_iter()
        .map(|t| (t, random_pdi(&space, &mut r)))
        .collect();

    let initial = random_state(dim, &mut r);
    let initial_projector = Projector::from_ket(&space, &initial, "psi0", tol()).unwrap();
    let family = HistoryFamily::new(
        format!("random{seed}"),
        Arc::clone(&schedule),
        initial_projector,
        initial.clone(),
        events,
        tol(),
    )
    .unwrap();

    RandomInstance {
        space,
        schedule,
        initial,
        family,
    }
}

/// Independent probability oracle: explicit sequential projection with
/// renormalization. The probability of a history is the product of the
/// per-step conditional probabilities ‖F U ψ‖² along its branch.
pub fn oracle_history_probability(
    schedule: &UnitarySchedule,
    initial_projector: &ComplexMatrix,
    initial_state: &ComplexVector,
    events: &[(usize, ComplexMatrix)],
) -> f64 {
    let mut state = initial_projector.mul_vec(initial_state).unwrap();
    let mut probability = state.norm_sqr() / initial_state.norm_sqr();
    if probability < 1e-300 {
        return 0.0;
    }
    state = state.normalized().unwrap();
    for t in 1..=schedule.n_intervals() {
        state = schedule.steps()[t - 1].mul_vec(&state).unwrap();
        if let Some((_, projector)) = events.iter().find(|(et, _)| *et == t) {
            let projected = projector.mul_vec(&state).unwrap();
            let p = projected.norm_sqr();
            probability *= p;
            if probability < 1e-300 {
                return 0.0;
            }
            state = projected.normalized().unwrap();
        }
    }
    probability
}
