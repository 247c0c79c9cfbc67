//! Closed-form rotating-wave solution.
//!
//! With the anti-rotating couplings removed the Hamiltonian splits into 2×2
//! blocks pairing `b_n` with `c_{n+1}`:
//!
//! ```text
//! H_n = [ ω₀ + nω_λ      κ_n        ]     κ_n = −i g √(n+1)
//!       [ κ_n*           (n+1)ω_λ   ]
//! ```
//!
//! `c_0` is uncoupled (energy zero) and, on a truncated basis, so is
//! `b_{n_max}`. Blocks are evolved in the lab frame so amplitudes compare
//! directly with the integrated Fock dynamics.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock;
use crate::model::{FockAmplitudes, ModelParams, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RwaBlock {
    /// Photon index of the excited-state member.
    pub n: usize,
    /// Generalized Rabi frequency `√((Δ/2)² + |g|²(n+1))`.
    pub rabi: f64,
}

impl RwaBlock {
    pub fn new(n: usize, params: &ModelParams) -> Self {
        let half_detuning = 0.5 * params.detuning();
        let coupling = params.g().norm() * ((n + 1) as f64).sqrt();
        Self {
            n,
            rabi: half_detuning.hypot(coupling),
        }
    }
}

/// `(b_n(t), c_{n+1}(t))` from `(b_init, c_init)` at `t = 0`.
pub fn rwa_block_evolve(
    n: usize,
    b_init: C64,
    c_init: C64,
    params: &ModelParams,
    t: f64,
) -> (C64, C64) {
    let i = C64::i();
    let n1 = (n + 1) as f64;
    let e_b = params.omega0() + n as f64 * params.omega_lambda();
    let e_c = n1 * params.omega_lambda();
    let mean = 0.5 * (e_b + e_c);
    let d = 0.5 * (e_b - e_c);
    let kappa = -i * params.g() * n1.sqrt();
    let rabi = RwaBlock::new(n, params).rabi;

    let cos = (rabi * t).cos();
    // sin(Ωt)/Ω → t as Ω → 0
    let sinc = if rabi > 0.0 { (rabi * t).sin() / rabi } else { t };
    let phase = C64::from_polar(1.0, -mean * t);

    let b = phase * ((cos - i * d * sinc) * b_init - i * kappa * sinc * c_init);
    let c = phase * (-i * kappa.conj() * sinc * b_init + (cos + i * d * sinc) * c_init);
    (b, c)
}

/// Full state at time `t`, assembled block by block.
pub fn rwa_propagate(initial: &FockAmplitudes, params: &ModelParams, t: f64) -> FockAmplitudes {
    let n_max = initial.n_max();
    let b0 = initial.excited();
    let c0 = initial.ground();
    let mut out = FockAmplitudes::zeros(n_max);
    for n in 0..n_max {
        let (b, c) = rwa_block_evolve(n, b0[n], c0[n + 1], params, t);
        out.excited_mut()[n] = b;
        out.ground_mut()[n + 1] = c;
    }
    let top = params.omega0() + n_max as f64 * params.omega_lambda();
    out.excited_mut()[n_max] = b0[n_max] * C64::from_polar(1.0, -top * t);
    out.ground_mut()[0] = c0[0];
    out
}

/// `Σ_n |b_n(t)|²` under the rotating-wave dynamics.
pub fn rwa_excited_probability(initial: &FockAmplitudes, params: &ModelParams, t: f64) -> f64 {
    crate::observables::excited_probability(&rwa_propagate(initial, params, t))
}

/// Evaluate the closed form at `times` and attach the same channels as
/// [`fock::simulate_fock`].
pub fn rwa_trajectory(
    initial: &FockAmplitudes,
    params: &ModelParams,
    times: &[f64],
    tail_levels: usize,
) -> Result<Trajectory<FockAmplitudes>> {
    if let Some(t) = times.iter().find(|t| !t.is_finite()) {
        return Err(Error::Domain(format!("sample time must be finite, got {t}")));
    }
    let states = times
        .iter()
        .map(|&t| rwa_propagate(initial, params, t))
        .collect();
    let trajectory = Trajectory::from_samples(times.to_vec(), states)?;
    fock::attach_channels(trajectory, params, tail_levels)
}
