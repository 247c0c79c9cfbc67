//! Entanglement-free dynamics in the reduced variables `(α, β, s)`.
//!
//! ```text
//! dα/dt = −iω_λ α + g*(β + β*)
//! dβ/dt = −iω₀ β + (gα − g*α*) s
//! ds/dt = 2 (gα − g*α*)(β − β*)
//! ```
//!
//! The inversion `s` is integrated as its own variable instead of being
//! recovered as `±√(1 − 4|β|²)`, so no branch has to be tracked when `β`
//! passes through its maximum. `s² + 4|β|² = 1` is then a conserved quantity
//! that the driver monitors.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::integrator::{self, StepControl};
use crate::model::{MeanFieldState, ModelParams, Series, Trajectory};
use crate::observables::unwrap_phase;

/// Tolerance on the initial constraint accepted by [`simulate_meanfield`].
pub const INITIAL_CONSTRAINT_TOL: f64 = 1e-10;

/// Default sample-wise constraint drift that aborts a run.
pub const DEFAULT_DRIFT_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldDerivative {
    pub d_alpha: C64,
    pub d_beta: C64,
    pub d_s: f64,
}

/// `gα − g*α*`, purely imaginary by construction.
fn coupling_drive(alpha: C64, g: C64) -> C64 {
    let w = g * alpha;
    w - w.conj()
}

pub fn meanfield_rhs(state: &MeanFieldState, params: &ModelParams) -> MeanFieldDerivative {
    let MeanFieldState { alpha, beta, s } = *state;
    let g = params.g();
    let i = C64::i();
    let drive = coupling_drive(alpha, g);

    let d_alpha = -i * params.omega_lambda() * alpha + g.conj() * (beta + beta.conj());
    let d_beta = -i * params.omega0() * beta + drive * s;
    let d_s = 2.0 * drive * (beta - beta.conj());
    debug_assert!(
        d_s.im.abs() < 1e-14 * (1.0 + alpha.norm()),
        "ds/dt has imaginary residue {}",
        d_s.im
    );

    MeanFieldDerivative {
        d_alpha,
        d_beta,
        d_s: d_s.re,
    }
}

/// Equations of motion written directly for the conjugate variables
/// `(α*, β* = b*c, s)`, as obtained from ⟨a†⟩ and ⟨σ⁺⟩.
///
/// Returns `(dα*/dt, dβ*/dt, ds/dt)`; it must agree with the componentwise
/// conjugate of [`meanfield_rhs`].
pub fn conjugate_rhs(
    alpha_conj: C64,
    beta_conj: C64,
    s: f64,
    params: &ModelParams,
) -> MeanFieldDerivative {
    let g = params.g();
    let i = C64::i();
    let alpha = alpha_conj.conj();
    let beta = beta_conj.conj();
    let drive = g * alpha - g.conj() * alpha_conj;
    // (|c|² − |b|²) = −s
    let d_alpha = i * params.omega_lambda() * alpha_conj + g * (beta + beta_conj);
    let d_beta = -s * drive + i * params.omega0() * beta_conj;
    let d_s = 2.0 * drive * (beta - beta_conj);
    MeanFieldDerivative {
        d_alpha,
        d_beta,
        d_s: d_s.re,
    }
}

/// |s² + 4|β|² − 1|.
pub fn constraint_defect(state: &MeanFieldState) -> f64 {
    state.constraint_defect()
}

/// Mean-field energy `ω_λ|α|² + ω₀(1 + s)/2 + 2 Re β · ⟨−i(ga − g*a†)⟩`,
/// conserved by the equations above.
pub fn meanfield_energy(state: &MeanFieldState, params: &ModelParams) -> f64 {
    let coupling = 2.0 * (params.g() * state.alpha).im;
    params.omega_lambda() * state.alpha.norm_sqr()
        + 0.5 * params.omega0() * (1.0 + state.s)
        + 2.0 * state.beta.re * coupling
}

pub fn encode(state: &MeanFieldState) -> [f64; 5] {
    [
        state.alpha.re,
        state.alpha.im,
        state.beta.re,
        state.beta.im,
        state.s,
    ]
}

pub fn decode(y: &[f64]) -> MeanFieldState {
    MeanFieldState {
        alpha: C64::new(y[0], y[1]),
        beta: C64::new(y[2], y[3]),
        s: y[4],
    }
}

/// Rescale `(β, s)` back onto `s² + 4|β|² = 1`.
pub fn project_onto_constraint(state: &mut MeanFieldState) {
    let r = (state.s * state.s + 4.0 * state.beta.norm_sqr()).sqrt();
    if r > 0.0 {
        state.s /= r;
        state.beta /= r;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldConfig {
    /// `None` selects [`default_control`].
    pub control: Option<StepControl>,
    /// Rescale onto the constraint manifold after every step.
    pub projection: bool,
    pub drift_limit: f64,
}

impl Default for MeanFieldConfig {
    fn default() -> Self {
        Self {
            control: None,
            projection: false,
            drift_limit: DEFAULT_DRIFT_LIMIT,
        }
    }
}

/// RK4 steps per period of the fastest scale in default mean-field runs.
/// The nonlinear system drifts off `s² + 4|β|² = 1` as dt⁵; 800 keeps the
/// defect below 1e-8 over 50 time units up to g ≈ 0.4 ω.
pub const DEFAULT_STEPS_PER_PERIOD: f64 = 800.0;

/// Fixed RK4 with [`DEFAULT_STEPS_PER_PERIOD`] steps per period of the
/// fastest scale, `max(ω₀, ω_λ, 2|g|√(1 + |α₀|²))`.
pub fn default_control(params: &ModelParams, initial: &MeanFieldState) -> StepControl {
    let coupling = 2.0 * params.g().norm() * (1.0 + initial.alpha.norm_sqr()).sqrt();
    let fastest = params.omega0().max(params.omega_lambda()).max(coupling);
    StepControl::fixed(TAU / fastest / DEFAULT_STEPS_PER_PERIOD)
}

/// Integrate from `initial` over `[0, t_end]`.
///
/// Channels: `alpha` (complex), `alpha_abs`, `alpha_re`, `alpha_im`, `beta`
/// (complex), `beta_abs`, `beta_phase` (unwrapped arg β; omitted when β
/// vanishes at a sample), `s`, `b_abs`, `c_abs`, `constraint_defect`,
/// `energy`.
pub fn simulate_meanfield(
    initial: &MeanFieldState,
    params: &ModelParams,
    t_end: f64,
    config: &MeanFieldConfig,
) -> Result<Trajectory<MeanFieldState>> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Domain(format!("t_end must be non-negative, got {t_end}")));
    }
    let defect = initial.constraint_defect();
    if !(defect <= INITIAL_CONSTRAINT_TOL) {
        return Err(Error::Normalization {
            norm_sq: initial.s * initial.s + 4.0 * initial.beta.norm_sqr(),
            tol: INITIAL_CONSTRAINT_TOL,
        });
    }
    let control = config
        .control
        .unwrap_or_else(|| default_control(params, initial));

    let params = *params;
    let rhs = move |_t: f64, y: &[f64], out: &mut [f64]| {
        let d = meanfield_rhs(&decode(y), &params);
        out.copy_from_slice(&[d.d_alpha.re, d.d_alpha.im, d.d_beta.re, d.d_beta.im, d.d_s]);
    };
    let projection = config.projection;
    let project = move |y: &mut [f64]| {
        if projection {
            let mut st = decode(y);
            project_onto_constraint(&mut st);
            y.copy_from_slice(&encode(&st));
        }
    };
    let report = integrator::integrate_projected(rhs, project, &encode(initial), 0.0, t_end, &control)?;
    let trajectory = report.trajectory.try_map_states(|y| Ok(decode(&y)))?;

    for (t, st) in trajectory.times().iter().zip(trajectory.states()) {
        let defect = st.constraint_defect();
        if !(defect <= config.drift_limit) {
            return Err(Error::ConstraintDrift {
                t: *t,
                defect,
                limit: config.drift_limit,
            });
        }
    }
    attach_channels(trajectory, &params)
}

fn attach_channels(
    mut trajectory: Trajectory<MeanFieldState>,
    params: &ModelParams,
) -> Result<Trajectory<MeanFieldState>> {
    let states = trajectory.states().to_vec();
    let real = |f: &dyn Fn(&MeanFieldState) -> f64| Series::Real(states.iter().map(f).collect());
    let alphas: Vec<C64> = states.iter().map(|s| s.alpha).collect();
    let betas: Vec<C64> = states.iter().map(|s| s.beta).collect();

    trajectory.add_channel("alpha", Series::Complex(alphas))?;
    trajectory.add_channel("alpha_abs", real(&|s| s.alpha.norm()))?;
    trajectory.add_channel("alpha_re", real(&|s| s.alpha.re))?;
    trajectory.add_channel("alpha_im", real(&|s| s.alpha.im))?;
    trajectory.add_channel("beta", Series::Complex(betas.clone()))?;
    trajectory.add_channel("beta_abs", real(&|s| s.beta.norm()))?;
    if let Ok(phase) = unwrap_phase(&betas) {
        trajectory.add_channel("beta_phase", Series::Real(phase))?;
    }
    trajectory.add_channel("s", real(&|s| s.s))?;
    trajectory.add_channel("b_abs", real(&|s| s.excited_amplitude()))?;
    trajectory.add_channel("c_abs", real(&|s| s.ground_amplitude()))?;
    trajectory.add_channel("constraint_defect", real(&|s| s.constraint_defect()))?;
    trajectory.add_channel("energy", real(&|s| meanfield_energy(s, params)))?;
    Ok(trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn atomic_eigenstates_without_field_are_stationary() {
        let p = ModelParams::new(3.0, 7.0, c(0.4, -0.9)).unwrap();
        for s in [-1.0, 1.0] {
            let d = meanfield_rhs(&MeanFieldState::new(c(0.0, 0.0), c(0.0, 0.0), s), &p);
            assert_eq!(d.d_alpha, c(0.0, 0.0));
            assert_eq!(d.d_beta, c(0.0, 0.0));
            assert_eq!(d.d_s, 0.0);
        }
    }

    #[test]
    fn hand_evaluated_derivative() {
        let p = ModelParams::real(10.0, 10.0, 0.1).unwrap();
        let d = meanfield_rhs(&MeanFieldState::new(c(0.0, 1.0), c(0.3, 0.0), 0.8), &p);
        assert!(close(d.d_alpha, c(10.06, 0.0), 1e-12), "{:?}", d.d_alpha);
        assert!(close(d.d_beta, c(0.0, -2.84), 1e-12), "{:?}", d.d_beta);
        assert_eq!(d.d_s, 0.0);
    }

    #[test]
    fn constraint_defect_cases() {
        let a = c(0.7, -0.1);
        assert_eq!(constraint_defect(&MeanFieldState::new(a, c(0.0, 0.0), 1.0)), 0.0);
        assert_eq!(constraint_defect(&MeanFieldState::new(a, c(0.5, 0.0), 0.0)), 0.0);
        assert_eq!(constraint_defect(&MeanFieldState::new(a, c(0.5, 0.0), 1.0)), 1.0);
    }

    #[test]
    fn zero_horizon_returns_initial() {
        let p = ModelParams::real(10.0, 10.0, 0.1).unwrap();
        let seed = MeanFieldState::default_seed(&p);
        let tr = simulate_meanfield(&seed, &p, 0.0, &MeanFieldConfig::default()).unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr.states()[0], seed);
    }

    #[test]
    fn rejects_invalid_initial_state() {
        let p = ModelParams::real(10.0, 10.0, 0.1).unwrap();
        let bad = MeanFieldState::new(c(1.0, 0.0), c(0.5, 0.0), 0.5);
        assert!(matches!(
            simulate_meanfield(&bad, &p, 1.0, &MeanFieldConfig::default()),
            Err(Error::Normalization { .. })
        ));
        let seed = MeanFieldState::default_seed(&p);
        assert!(simulate_meanfield(&seed, &p, -1.0, &MeanFieldConfig::default()).is_err());
    }

    #[test]
    fn drift_guard_trips_on_coarse_steps() {
        let p = ModelParams::real(10.0, 10.0, 4.0).unwrap();
        let seed = MeanFieldState::default_seed(&p);
        let config = MeanFieldConfig {
            control: Some(StepControl::fixed(0.05)),
            ..Default::default()
        };
        assert!(matches!(
            simulate_meanfield(&seed, &p, 20.0, &config),
            Err(Error::ConstraintDrift { .. })
        ));
        let projected = MeanFieldConfig {
            projection: true,
            ..config
        };
        let tr = simulate_meanfield(&seed, &p, 20.0, &projected).unwrap();
        let max = tr.real_channel("constraint_defect").unwrap().iter().fold(0.0f64, |m, &d| m.max(d));
        assert!(max < 1e-14);
    }

    #[test]
    fn default_run_conserves_constraint_and_energy() {
        let p = ModelParams::real(10.0, 10.0, 4.0).unwrap();
        let seed = MeanFieldState::default_seed(&p);
        let tr = simulate_meanfield(&seed, &p, 10.0, &MeanFieldConfig::default()).unwrap();
        let defect = tr.real_channel("constraint_defect").unwrap();
        assert!(defect.iter().all(|&d| d < 1e-8));
        let energy = tr.real_channel("energy").unwrap();
        let e0 = energy[0];
        assert!(energy.iter().all(|e| ((e - e0) / e0).abs() < 1e-8));
        assert!(tr.real_channel("beta_phase").is_some());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn state() -> impl Strategy<Value = MeanFieldState> {
            (-3.0f64..3.0, -3.0f64..3.0, 0.0f64..std::f64::consts::PI, 0.0f64..TAU).prop_map(
                |(ar, ai, theta, phi)| {
                    // s = cos θ, |β| = sin θ / 2
                    MeanFieldState::new(
                        c(ar, ai),
                        C64::from_polar(0.5 * theta.sin(), phi),
                        theta.cos(),
                    )
                },
            )
        }

        fn params() -> impl Strategy<Value = ModelParams> {
            (0.1f64..20.0, 0.1f64..20.0, -5.0f64..5.0, -5.0f64..5.0)
                .prop_map(|(w0, wl, gr, gi)| ModelParams::new(w0, wl, c(gr, gi)).unwrap())
        }

        proptest! {
            #[test]
            fn tangent_to_constraint(st in state(), p in params()) {
                let d = meanfield_rhs(&st, &p);
                let rate = 2.0 * st.s * d.d_s + 8.0 * (st.beta.conj() * d.d_beta).re;
                let scale = 1.0 + d.d_s.abs() + d.d_beta.norm();
                prop_assert!(rate.abs() < 1e-12 * scale);
            }

            #[test]
            fn inversion_rate_is_exactly_real(st in state(), p in params()) {
                let drive = coupling_drive(st.alpha, p.g());
                let ds = 2.0 * drive * (st.beta - st.beta.conj());
                prop_assert!(ds.im.abs() < 1e-14 * (1.0 + st.alpha.norm()));
                prop_assert_eq!(drive.re, 0.0);
            }

            #[test]
            fn conjugate_equations_agree(st in state(), p in params()) {
                let d = meanfield_rhs(&st, &p);
                let dc = conjugate_rhs(st.alpha.conj(), st.beta.conj(), st.s, &p);
                prop_assert!(close(dc.d_alpha, d.d_alpha.conj(), 1e-13 * (1.0 + d.d_alpha.norm())));
                prop_assert!(close(dc.d_beta, d.d_beta.conj(), 1e-13 * (1.0 + d.d_beta.norm())));
                prop_assert!((dc.d_s - d.d_s).abs() <= 1e-13 * (1.0 + d.d_s.abs()));
            }

            #[test]
            fn time_reversal_symmetry(st in state(), p in params()) {
                // conjugated state with g ↦ −g* runs the same motion backwards
                let reversed = p.with_coupling(-p.g().conj()).unwrap();
                let conj = MeanFieldState::new(st.alpha.conj(), st.beta.conj(), st.s);
                let d = meanfield_rhs(&st, &p);
                let dr = meanfield_rhs(&conj, &reversed);
                prop_assert!(close(dr.d_alpha, -d.d_alpha.conj(), 1e-13 * (1.0 + d.d_alpha.norm())));
                prop_assert!(close(dr.d_beta, -d.d_beta.conj(), 1e-13 * (1.0 + d.d_beta.norm())));
                prop_assert!((dr.d_s + d.d_s).abs() <= 1e-13 * (1.0 + d.d_s.abs()));
            }

            #[test]
            fn energy_is_stationary(st in state(), p in params()) {
                let d = meanfield_rhs(&st, &p);
                let g = p.g();
                let coupling = 2.0 * (g * st.alpha).im;
                let d_coupling = 2.0 * (g * d.d_alpha).im;
                let rate = p.omega_lambda() * 2.0 * (st.alpha.conj() * d.d_alpha).re
                    + 0.5 * p.omega0() * d.d_s
                    + 2.0 * (d.d_beta.re * coupling + st.beta.re * d_coupling);
                let scale = 1.0 + p.omega0() + p.omega_lambda() * (1.0 + st.alpha.norm_sqr()) + g.norm() * (1.0 + st.alpha.norm());
                prop_assert!(rate.abs() < 1e-12 * scale * scale, "rate {}", rate);
            }
        }
    }
}
