//! Dense Hamiltonian on the truncated basis and exact propagation by
//! eigendecomposition.
//!
//! Basis order: `(e,0), (e,1), …, (e,N), (g,0), …, (g,N)`. The diagonal
//! blocks are `ω₀ + ω_λ a†a` and `ω_λ a†a`; both off-diagonal blocks are the
//! Hermitian coupling `X = −i(ga − g*a†)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::{FockAmplitudes, ModelParams, Trajectory};

/// Per-pair residual bound `‖Hv − λv‖ ≤ RESIDUAL_TOL · ‖H‖`.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Bound on `max |V†V − I|`.
pub const ORTHONORMALITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    n_max: usize,
    entries: DMatrix<C64>,
}

impl HamiltonianMatrix {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    /// Wrap an arbitrary square matrix, for diagnostics.
    pub fn from_entries(n_max: usize, entries: DMatrix<C64>) -> Result<Self> {
        let dim = 2 * (n_max + 1);
        if entries.nrows() != dim || entries.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: entries.nrows(),
            });
        }
        Ok(Self { n_max, entries })
    }

    pub fn excited_index(&self, n: usize) -> usize {
        n
    }

    pub fn ground_index(&self, n: usize) -> usize {
        self.n_max + 1 + n
    }

    /// H ψ in the stacked basis.
    pub fn apply(&self, state: &FockAmplitudes) -> Result<Vec<C64>> {
        if state.n_max() != self.n_max {
            return Err(Error::DimensionMismatch {
                expected: self.n_max,
                got: state.n_max(),
            });
        }
        let v = DVector::from_vec(state.to_stacked());
        Ok((&self.entries * v).iter().copied().collect())
    }

    /// ⟨ψ|H|ψ⟩; the imaginary residue is returned alongside for checking.
    pub fn expectation(&self, state: &FockAmplitudes) -> Result<(f64, f64)> {
        let hv = self.apply(state)?;
        let z: C64 = state
            .to_stacked()
            .iter()
            .zip(&hv)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok((z.re, z.im))
    }

    /// Largest absolute entry.
    pub fn max_norm(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

pub fn build_hamiltonian(params: &ModelParams, n_max: usize) -> HamiltonianMatrix {
    let levels = n_max + 1;
    let dim = 2 * levels;
    let mut h = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
    let g = params.g();
    let i = C64::i();
    for n in 0..levels {
        let photons = n as f64 * params.omega_lambda();
        h[(n, n)] = C64::new(params.omega0() + photons, 0.0);
        h[(levels + n, levels + n)] = C64::new(photons, 0.0);
    }
    // ⟨n|X|n+1⟩ = −ig√(n+1) and its conjugate ⟨n+1|X|n⟩ = +ig*√(n+1),
    // placed in both off-diagonal blocks
    for n in 0..n_max {
        let upper = -i * g * ((n + 1) as f64).sqrt();
        let lower = upper.conj();
        h[(n, levels + n + 1)] = upper;
        h[(levels + n + 1, n)] = upper.conj();
        h[(levels + n, n + 1)] = upper;
        h[(n + 1, levels + n)] = upper.conj();
        debug_assert_eq!(lower, i * g.conj() * ((n + 1) as f64).sqrt());
    }
    let built = HamiltonianMatrix { n_max, entries: h };
    debug_assert_eq!(hermiticity_defect(&built), 0.0);
    built
}

/// max |H_ij − conj(H_ji)|.
pub fn hermiticity_defect(h: &HamiltonianMatrix) -> f64 {
    let m = &h.entries;
    let dim = m.nrows();
    let mut worst: f64 = 0.0;
    for r in 0..dim {
        for c in r..dim {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    n_max: usize,
    /// Ascending.
    eigenvalues: Vec<f64>,
    /// Columns are eigenvectors, in the order of `eigenvalues`.
    eigenvectors: DMatrix<C64>,
}

impl SpectralDecomposition {
    /// Diagonalize and verify residual and orthonormality bounds.
    pub fn new(h: &HamiltonianMatrix) -> Result<Self> {
        let defect = hermiticity_defect(h);
        if defect > 0.0 {
            return Err(Error::Eigen(format!("matrix is not Hermitian (defect {defect:e})")));
        }
        let eig = h
            .entries
            .clone()
            .try_symmetric_eigen(f64::EPSILON, 10_000)
            .ok_or_else(|| Error::Eigen("eigen-solver did not converge".into()))?;
        let dim = h.dim();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let eigenvectors = DMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
        let decomp = Self {
            n_max: h.n_max,
            eigenvalues,
            eigenvectors,
        };

        let scale = h.max_norm().max(f64::MIN_POSITIVE);
        let residual = decomp.max_residual(h);
        if residual > RESIDUAL_TOL * scale * (dim as f64).sqrt() {
            return Err(Error::Eigen(format!("eigenpair residual {residual:e} too large")));
        }
        let ortho = decomp.orthonormality_defect();
        if ortho > ORTHONORMALITY_TOL * (dim as f64).sqrt() {
            return Err(Error::Eigen(format!("eigenvectors not orthonormal ({ortho:e})")));
        }
        Ok(decomp)
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<C64> {
        &self.eigenvectors
    }

    /// Eigenvector `k` as amplitudes.
    pub fn eigenstate(&self, k: usize) -> Result<FockAmplitudes> {
        let col: Vec<C64> = self.eigenvectors.column(k).iter().copied().collect();
        FockAmplitudes::from_stacked(&col)
    }

    /// max over pairs of ‖H v − λ v‖₂.
    pub fn max_residual(&self, h: &HamiltonianMatrix) -> f64 {
        let hv = &h.entries * &self.eigenvectors;
        (0..self.eigenvalues.len())
            .map(|k| {
                let lambda = self.eigenvalues[k];
                hv.column(k)
                    .iter()
                    .zip(self.eigenvectors.column(k).iter())
                    .map(|(a, v)| (a - v * lambda).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// max |V†V − I|.
    pub fn orthonormality_defect(&self) -> f64 {
        let gram = self.eigenvectors.adjoint() * &self.eigenvectors;
        let dim = gram.nrows();
        let mut worst: f64 = 0.0;
        for r in 0..dim {
            for c in 0..dim {
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((gram[(r, c)] - target).norm());
            }
        }
        worst
    }

    /// Cache `V†ψ₀` for repeated propagation of one initial state.
    pub fn propagator(&self, initial: &FockAmplitudes) -> Result<Propagator<'_>> {
        if initial.n_max() != self.n_max {
            return Err(Error::DimensionMismatch {
                expected: self.n_max,
                got: initial.n_max(),
            });
        }
        let psi = DVector::from_vec(initial.to_stacked());
        let coefficients = self.eigenvectors.adjoint() * psi;
        Ok(Propagator {
            decomp: self,
            coefficients,
        })
    }
}

/// `ψ(t) = V e^{−iΛt} V† ψ₀` for a fixed `ψ₀`.
pub struct Propagator<'a> {
    decomp: &'a SpectralDecomposition,
    coefficients: DVector<C64>,
}

impl Propagator<'_> {
    pub fn at(&self, t: f64) -> FockAmplitudes {
        let phased = DVector::from_iterator(
            self.coefficients.len(),
            self.coefficients
                .iter()
                .zip(&self.decomp.eigenvalues)
                .map(|(c, &lambda)| c * C64::from_polar(1.0, -lambda * t)),
        );
        let psi = &self.decomp.eigenvectors * phased;
        let v: Vec<C64> = psi.iter().copied().collect();
        FockAmplitudes::from_stacked(&v).expect("propagated state keeps the basis layout")
    }
}

/// Exact state at time `t`.
pub fn propagate(
    decomp: &SpectralDecomposition,
    initial: &FockAmplitudes,
    t: f64,
) -> Result<FockAmplitudes> {
    Ok(decomp.propagator(initial)?.at(t))
}

/// Exact states at `times` with the channels of [`crate::fock::simulate_fock`].
pub fn oracle_trajectory(
    initial: &FockAmplitudes,
    params: &ModelParams,
    times: &[f64],
    tail_levels: usize,
) -> Result<Trajectory<FockAmplitudes>> {
    if let Some(t) = times.iter().find(|t| !t.is_finite()) {
        return Err(Error::Domain(format!("sample time must be finite, got {t}")));
    }
    let decomp = SpectralDecomposition::new(&build_hamiltonian(params, initial.n_max()))?;
    let propagator = decomp.propagator(initial)?;
    let states = times.iter().map(|&t| propagator.at(t)).collect();
    let trajectory = Trajectory::from_samples(times.to_vec(), states)?;
    crate::fock::attach_channels(trajectory, params, tail_levels)
}
