//! Exact entangled dynamics on a truncated photon-number basis.
//!
//! Integrated in the lab frame:
//!
//! ```text
//! db_n/dt = −i(ω₀ + nω_λ) b_n − g√(n+1) c_{n+1} + g*√n c_{n−1}
//! dc_n/dt = −i nω_λ c_n       − g√(n+1) b_{n+1} + g*√n b_{n−1}
//! ```
//!
//! Terms reaching index −1 or `n_max + 1` are dropped, which keeps the
//! truncated generator anti-Hermitian and the norm exactly conserved; the
//! cutoff error shows up only as weight in the top levels.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::integrator::{self, StepControl};
use crate::model::{
    FockAmplitudes, InitialSpec, ModelParams, Series, Trajectory, TruncationMode,
    DEFAULT_TAIL_THRESHOLD,
};
use crate::observables::{
    energy_expectation, excited_probability, field_expectation, mean_photon_number,
};
use crate::spectral::{build_hamiltonian, SpectralDecomposition};

/// Tolerance on the initial norm accepted by [`simulate_fock`].
pub const INITIAL_NORM_TOL: f64 = 1e-10;

/// RK4 steps per period of the fastest scale in default Fock runs.
pub const DEFAULT_STEPS_PER_PERIOD: f64 = 200.0;

/// Which couplings enter the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Couplings {
    #[default]
    Full,
    /// Drop the anti-rotating terms σ⁺a† and σ⁻a. Used to compare against
    /// the rotating-wave reference.
    RotatingOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockDerivative {
    pub d_b: Vec<C64>,
    pub d_c: Vec<C64>,
}

/// Precomputed generator for a fixed cutoff, acting on the flat layout
/// `(b_0, …, b_N, c_0, …, c_N)` with interleaved real and imaginary parts.
#[derive(Debug, Clone)]
pub struct FockGenerator {
    omega0: f64,
    omega_lambda: f64,
    g: C64,
    couplings: Couplings,
    sqrt: Vec<f64>,
}

impl FockGenerator {
    pub fn new(params: &ModelParams, n_max: usize, couplings: Couplings) -> Self {
        Self {
            omega0: params.omega0(),
            omega_lambda: params.omega_lambda(),
            g: params.g(),
            couplings,
            sqrt: (0..=n_max + 1).map(|n| (n as f64).sqrt()).collect(),
        }
    }

    pub fn levels(&self) -> usize {
        self.sqrt.len() - 1
    }

    /// Evaluate the derivative of `y` into `out`.
    pub fn apply(&self, y: &[f64], out: &mut [f64]) {
        let levels = self.levels();
        let off = 2 * levels;
        let at = |k: usize| C64::new(y[2 * k], y[2 * k + 1]);
        let (g, gc) = (self.g, self.g.conj());
        let full = self.couplings == Couplings::Full;
        for n in 0..levels {
            let b = at(n);
            let c = at(levels + n);
            let photons = n as f64 * self.omega_lambda;
            // −iE·z = (E·z.im, −E·z.re)
            let e_b = self.omega0 + photons;
            let mut db = C64::new(e_b * b.im, -e_b * b.re);
            let mut dc = C64::new(photons * c.im, -photons * c.re);
            if n + 1 < levels {
                let s = self.sqrt[n + 1];
                db -= g * s * at(levels + n + 1);
                if full {
                    dc -= g * s * at(n + 1);
                }
            }
            if n > 0 {
                let s = self.sqrt[n];
                if full {
                    db += gc * s * at(levels + n - 1);
                }
                dc += gc * s * at(n - 1);
            }
            out[2 * n] = db.re;
            out[2 * n + 1] = db.im;
            out[off + 2 * n] = dc.re;
            out[off + 2 * n + 1] = dc.im;
        }
    }
}

pub fn encode(state: &FockAmplitudes) -> Vec<f64> {
    state
        .excited()
        .iter()
        .chain(state.ground())
        .flat_map(|z| [z.re, z.im])
        .collect()
}

pub fn decode(y: &[f64]) -> Result<FockAmplitudes> {
    let v: Vec<C64> = y.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect();
    FockAmplitudes::from_stacked(&v)
}

pub fn fock_rhs(state: &FockAmplitudes, params: &ModelParams) -> FockDerivative {
    fock_rhs_with(state, params, Couplings::Full)
}

pub fn fock_rhs_with(
    state: &FockAmplitudes,
    params: &ModelParams,
    couplings: Couplings,
) -> FockDerivative {
    let generator = FockGenerator::new(params, state.n_max(), couplings);
    let y = encode(state);
    let mut out = vec![0.0; y.len()];
    generator.apply(&y, &mut out);
    let d = decode(&out).expect("derivative has the state's layout");
    FockDerivative {
        d_b: d.excited().to_vec(),
        d_c: d.ground().to_vec(),
    }
}

/// Probability weight in the top `k` photon levels.
pub fn tail_mass(state: &FockAmplitudes, k: usize) -> Result<f64> {
    state.tail_mass(k)
}

/// Fixed RK4 with [`DEFAULT_STEPS_PER_PERIOD`] steps per period of
/// [`fastest_frequency`].
pub fn default_control(params: &ModelParams, n_max: usize) -> StepControl {
    StepControl::fixed(TAU / fastest_frequency(params, n_max) / DEFAULT_STEPS_PER_PERIOD)
}

/// Gershgorin bound on the spectrum of the truncated Hamiltonian,
/// `ω₀ + n_max·ω_λ + 2|g|√(n_max + 1)`.
///
/// Lab-frame amplitudes of level n rotate at about `ω₀ + n·ω_λ`, so the top
/// retained level, not the Rabi frequency, sets the step.
pub fn fastest_frequency(params: &ModelParams, n_max: usize) -> f64 {
    let coupling = 2.0 * params.g().norm() * ((n_max + 1) as f64).sqrt();
    params.omega0() + n_max as f64 * params.omega_lambda() + coupling
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockConfig {
    /// `None` selects [`default_control`].
    pub control: Option<StepControl>,
    pub couplings: Couplings,
    /// Number of top photon levels monitored for truncation overflow.
    pub tail_levels: usize,
    /// `None` disables the overflow check.
    pub tail_tol: Option<f64>,
}

impl Default for FockConfig {
    fn default() -> Self {
        Self {
            control: None,
            couplings: Couplings::Full,
            tail_levels: 1,
            tail_tol: Some(DEFAULT_TAIL_THRESHOLD),
        }
    }
}

fn check_tail(state: &FockAmplitudes, t: f64, config: &FockConfig) -> Result<()> {
    let Some(threshold) = config.tail_tol else {
        return Ok(());
    };
    let k = config.tail_levels.clamp(1, state.n_max() + 1);
    let tail = state.tail_mass(k)?;
    if tail > threshold {
        return Err(Error::TruncationOverflow {
            t,
            tail,
            threshold,
            n_max: state.n_max(),
        });
    }
    Ok(())
}

/// Integrate the amplitude equations over `[0, t_end]` and attach the
/// standard channels (see [`attach_channels`]).
pub fn simulate_fock(
    initial: &FockAmplitudes,
    params: &ModelParams,
    t_end: f64,
    config: &FockConfig,
) -> Result<Trajectory<FockAmplitudes>> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Domain(format!("t_end must be non-negative, got {t_end}")));
    }
    let norm_sq = initial.norm_squared();
    if !((norm_sq - 1.0).abs() <= INITIAL_NORM_TOL) {
        return Err(Error::Normalization {
            norm_sq,
            tol: INITIAL_NORM_TOL,
        });
    }
    check_tail(initial, 0.0, config)?;

    let control = config
        .control
        .unwrap_or_else(|| default_control(params, initial.n_max()));
    let generator = FockGenerator::new(params, initial.n_max(), config.couplings);
    let report = integrator::integrate(
        |_t, y: &[f64], out: &mut [f64]| generator.apply(y, out),
        &encode(initial),
        0.0,
        t_end,
        &control,
    )?;
    let trajectory = report.trajectory.try_map_states(|y| decode(&y))?;
    for (t, st) in trajectory.times().iter().zip(trajectory.states()) {
        check_tail(st, *t, config)?;
    }
    attach_channels(trajectory, params, config.tail_levels)
}

/// Attach `p_excited`, `mean_photons`, `norm_sq`, `energy`, `field` (complex
/// ⟨a⟩) and `tail_mass` (top `tail_levels` levels).
pub fn attach_channels(
    mut trajectory: Trajectory<FockAmplitudes>,
    params: &ModelParams,
    tail_levels: usize,
) -> Result<Trajectory<FockAmplitudes>> {
    let states = trajectory.states().to_vec();
    let real = |f: &dyn Fn(&FockAmplitudes) -> f64| Series::Real(states.iter().map(f).collect());
    trajectory.add_channel("p_excited", real(&excited_probability))?;
    trajectory.add_channel("mean_photons", real(&mean_photon_number))?;
    trajectory.add_channel("norm_sq", real(&FockAmplitudes::norm_squared))?;
    trajectory.add_channel("energy", real(&|s| energy_expectation(s, params)))?;
    trajectory.add_channel(
        "field",
        Series::Complex(states.iter().map(field_expectation).collect()),
    )?;
    trajectory.add_channel(
        "tail_mass",
        real(&|s| {
            s.tail_mass(tail_levels.clamp(1, s.n_max() + 1))
                .unwrap_or(f64::NAN)
        }),
    )?;
    Ok(trajectory)
}

/// Number of uniformly spaced times at which [`auto_truncate`] compares
/// excited-state probabilities.
pub const AUTO_TRUNCATE_SAMPLES: usize = 401;

/// Smallest cutoff from a doubling search whose excited-state probability
/// changes by less than `tol` (sup-norm over [`AUTO_TRUNCATE_SAMPLES`] times
/// on `[0, t_end]`) when the cutoff is doubled.
///
/// The search starts at `max(2, minimum representable cutoff)` and fails
/// with [`Error::Resource`] once the doubled cutoff would exceed `ceiling`.
/// Each candidate is propagated exactly by eigendecomposition, so the
/// comparison carries no step error.
pub fn auto_truncate(
    initial: &InitialSpec,
    params: &ModelParams,
    t_end: f64,
    tol: f64,
    ceiling: usize,
) -> Result<usize> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Domain(format!("t_end must be non-negative, got {t_end}")));
    }
    let times: Vec<f64> = (0..AUTO_TRUNCATE_SAMPLES)
        .map(|k| t_end * k as f64 / (AUTO_TRUNCATE_SAMPLES - 1) as f64)
        .collect();
    let series = |n_max: usize| -> Result<Vec<f64>> {
        let state = initial.build(n_max, TruncationMode::Lenient)?;
        let decomp = SpectralDecomposition::new(&build_hamiltonian(params, n_max))?;
        let propagator = decomp.propagator(&state)?;
        Ok(times
            .iter()
            .map(|&t| excited_probability(&propagator.at(t)))
            .collect())
    };

    let mut n = initial.min_n_max(DEFAULT_TAIL_THRESHOLD).max(2);
    let mut current = None;
    loop {
        if 2 * n > ceiling {
            return Err(Error::Resource(format!(
                "cutoff search exceeded ceiling {ceiling} (last tried n_max = {n})"
            )));
        }
        let coarse = match current.take() {
            Some(s) => s,
            None => series(n)?,
        };
        let fine = series(2 * n)?;
        let diff = coarse
            .iter()
            .zip(&fine)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if diff < tol {
            return Ok(n);
        }
        current = Some(fine);
        n *= 2;
    }
}
