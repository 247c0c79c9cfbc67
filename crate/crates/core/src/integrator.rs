//! Explicit ODE integration over flat real vectors.
//!
//! Complex systems are stored as interleaved `(re, im)` pairs; the encoding
//! belongs to each dynamics module. Two drivers are provided: fixed-step
//! classical RK4 and an adaptive Dormand–Prince 5(4) pair.
//!
//! Sampling never interpolates. A fixed-step run records the step whose
//! index is nearest to each requested sample time; an adaptive run records
//! the accepted step nearest to it. The first and last times are always
//! recorded.

use crate::error::{Error, Result};
use crate::model::Trajectory;

pub type FlatState = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepControl {
    Fixed {
        dt: f64,
        /// `None` records every step.
        sample_interval: Option<f64>,
    },
    Adaptive {
        rtol: f64,
        atol: f64,
        dt_min: f64,
        dt_max: f64,
        sample_interval: Option<f64>,
    },
}

impl StepControl {
    pub fn fixed(dt: f64) -> Self {
        StepControl::Fixed {
            dt,
            sample_interval: None,
        }
    }

    pub fn sample_interval(&self) -> Option<f64> {
        match *self {
            StepControl::Fixed { sample_interval, .. }
            | StepControl::Adaptive { sample_interval, .. } => sample_interval,
        }
    }

    pub fn with_sample_interval(self, interval: Option<f64>) -> Self {
        match self {
            StepControl::Fixed { dt, .. } => StepControl::Fixed {
                dt,
                sample_interval: interval,
            },
            StepControl::Adaptive {
                rtol,
                atol,
                dt_min,
                dt_max,
                ..
            } => StepControl::Adaptive {
                rtol,
                atol,
                dt_min,
                dt_max,
                sample_interval: interval,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
            }
        };
        if let Some(h) = self.sample_interval() {
            positive("sample_interval", h)?;
        }
        match *self {
            StepControl::Fixed { dt, .. } => positive("dt", dt),
            StepControl::Adaptive {
                rtol,
                atol,
                dt_min,
                dt_max,
                ..
            } => {
                positive("rtol", rtol)?;
                positive("atol", atol)?;
                positive("dt_min", dt_min)?;
                positive("dt_max", dt_max)?;
                if dt_min > dt_max {
                    return Err(Error::Domain(format!(
                        "dt_min ({dt_min}) exceeds dt_max ({dt_max})"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Result of one integration run.
#[derive(Debug, Clone)]
pub struct IntegrationReport {
    pub trajectory: Trajectory<FlatState>,
    pub accepted: usize,
    pub rejected: usize,
    /// Sum over accepted steps of the max-norm local error estimate. Zero for
    /// fixed-step runs, which carry no estimator.
    pub error_estimate: f64,
}

fn check_finite(v: &[f64], t: f64) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { t })
    }
}

struct Rk4Work {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Work {
    fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    fn step<F>(&mut self, rhs: &mut F, y: &mut [f64], t: f64, dt: f64) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let half = 0.5 * dt;
        rhs(t, y, &mut self.k1);
        check_finite(&self.k1, t)?;
        for ((tmp, y), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k1) {
            *tmp = y + half * k;
        }
        rhs(t + half, &self.tmp, &mut self.k2);
        check_finite(&self.k2, t)?;
        for ((tmp, y), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k2) {
            *tmp = y + half * k;
        }
        rhs(t + half, &self.tmp, &mut self.k3);
        check_finite(&self.k3, t)?;
        for ((tmp, y), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k3) {
            *tmp = y + dt * k;
        }
        rhs(t + dt, &self.tmp, &mut self.k4);
        check_finite(&self.k4, t)?;
        let sixth = dt / 6.0;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        check_finite(y, t)
    }
}

/// One classical RK4 step of size `dt` from `(t, y)`.
pub fn rk4_step<F>(rhs: &mut F, y: &[f64], t: f64, dt: f64) -> Result<FlatState>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    let mut out = y.to_vec();
    Rk4Work::new(y.len()).step(rhs, &mut out, t, dt)?;
    Ok(out)
}

fn check_span(t0: f64, t1: f64) -> Result<()> {
    if !(t0.is_finite() && t1.is_finite()) || t1 < t0 {
        return Err(Error::Domain(format!("invalid time span [{t0}, {t1}]")));
    }
    Ok(())
}

/// Step layout of a fixed-step run.
struct FixedGrid {
    t0: f64,
    t1: f64,
    dt: f64,
    n_steps: usize,
    sample_interval: Option<f64>,
}

impl FixedGrid {
    fn new(t0: f64, t1: f64, dt: f64, sample_interval: Option<f64>) -> Self {
        let ratio = (t1 - t0) / dt;
        let mut full_steps = ratio.floor();
        // absorb rounding so an exact multiple does not produce a sliver step
        if ratio - full_steps > 1.0 - 1e-9 {
            full_steps += 1.0;
        }
        let full_steps = full_steps as usize;
        let exact = (ratio - full_steps as f64).abs() < 1e-9;
        Self {
            t0,
            t1,
            dt,
            n_steps: full_steps + usize::from(!exact),
            sample_interval,
        }
    }

    /// End time of step `i` (`time(0) = t0`).
    fn time(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.t1
        } else {
            self.t0 + i as f64 * self.dt
        }
    }

    fn sample_index(&self, k: usize) -> usize {
        match self.sample_interval {
            Some(h) => {
                let nominal = self.t0 + k as f64 * h;
                let i = ((nominal - self.t0) / self.dt).round() as usize;
                // the shortened last step may sit closer to the nominal time
                if i + 1 >= self.n_steps
                    && (nominal - self.t1).abs() < (nominal - self.time(i.min(self.n_steps))).abs()
                {
                    self.n_steps
                } else {
                    i
                }
            }
            None => k,
        }
    }

    /// Whether step `i` is recorded; advances the sample counter `k`.
    fn records(&self, i: usize, k: &mut usize) -> bool {
        if i == self.n_steps {
            return true;
        }
        if self.sample_index(*k) > i {
            return false;
        }
        while self.sample_index(*k) <= i {
            *k += 1;
        }
        true
    }
}

/// Times recorded by a fixed-step run over `[t0, t1]`, without integrating.
pub fn fixed_sample_times(
    t0: f64,
    t1: f64,
    dt: f64,
    sample_interval: Option<f64>,
) -> Result<Vec<f64>> {
    StepControl::Fixed { dt, sample_interval }.validate()?;
    check_span(t0, t1)?;
    let grid = FixedGrid::new(t0, t1, dt, sample_interval);
    let mut times = vec![t0];
    let mut k = 1;
    for i in 1..=grid.n_steps {
        if grid.records(i, &mut k) {
            times.push(grid.time(i));
        }
    }
    Ok(times)
}

/// Fixed-step RK4 from `t0` to `t1`.
///
/// Step `i` ends at `t0 + i·dt`; when `dt` does not divide the span the last
/// step is shortened to land on `t1`.
pub fn integrate_fixed<F>(
    rhs: F,
    y0: &[f64],
    t0: f64,
    t1: f64,
    control: &StepControl,
) -> Result<IntegrationReport>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    integrate_fixed_projected(rhs, |_: &mut [f64]| {}, y0, t0, t1, control)
}

/// [`integrate_fixed`] with a projection applied after every step.
pub fn integrate_fixed_projected<F, P>(
    mut rhs: F,
    mut project: P,
    y0: &[f64],
    t0: f64,
    t1: f64,
    control: &StepControl,
) -> Result<IntegrationReport>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    P: FnMut(&mut [f64]),
{
    control.validate()?;
    check_span(t0, t1)?;
    let StepControl::Fixed {
        dt,
        sample_interval,
    } = *control
    else {
        return Err(Error::Domain("integrate_fixed requires a fixed step control".into()));
    };
    check_finite(y0, t0)?;

    let grid = FixedGrid::new(t0, t1, dt, sample_interval);
    let mut trajectory = Trajectory::new();
    trajectory.push(t0, y0.to_vec())?;
    let mut y = y0.to_vec();
    let mut work = Rk4Work::new(y.len());
    let mut k = 1;
    for i in 1..=grid.n_steps {
        let t = grid.time(i - 1);
        let t_new = grid.time(i);
        work.step(&mut rhs, &mut y, t, t_new - t)?;
        project(&mut y);
        if grid.records(i, &mut k) {
            trajectory.push(t_new, y.clone())?;
        }
    }
    let n_steps = grid.n_steps;

    Ok(IntegrationReport {
        trajectory,
        accepted: n_steps,
        rejected: 0,
        error_estimate: 0.0,
    })
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b* (fifth minus embedded fourth order weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct DopriWork {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    err: Vec<f64>,
}

impl DopriWork {
    fn new(dim: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
            y_new: vec![0.0; dim],
            err: vec![0.0; dim],
        }
    }

    /// Attempt a step; fills `y_new` and `err`.
    fn attempt<F>(&mut self, rhs: &mut F, y: &[f64], t: f64, h: f64) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = y.len();
        let Self { k, tmp, y_new, err } = self;
        rhs(t, y, &mut k[0]);
        let stages: [(f64, &[f64]); 5] = [
            (C2, &[A21]),
            (C3, &[A31, A32]),
            (C4, &[A41, A42, A43]),
            (C5, &[A51, A52, A53, A54]),
            (1.0, &[A61, A62, A63, A64, A65]),
        ];
        for (s, (c, row)) in stages.iter().enumerate() {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, a) in row.iter().enumerate() {
                    acc += a * k[j][i];
                }
                tmp[i] = y[i] + h * acc;
            }
            let (done, rest) = k.split_at_mut(s + 1);
            let _ = done;
            rhs(t + c * h, tmp, &mut rest[0]);
        }
        for i in 0..n {
            y_new[i] = y[i]
                + h * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i] + B6 * k[5][i]);
        }
        rhs(t + h, y_new, &mut k[6]);
        for i in 0..n {
            err[i] = h
                * (E1 * k[0][i]
                    + E3 * k[2][i]
                    + E4 * k[3][i]
                    + E5 * k[4][i]
                    + E6 * k[5][i]
                    + E7 * k[6][i]);
        }
        check_finite(y_new, t)?;
        check_finite(err, t)
    }
}

/// Adaptive Dormand–Prince 5(4) integration with RMS error control.
///
/// The first step tries `dt_max`. After each attempt the step becomes
/// `dt · clamp(0.9 · err^(−1/5), 0.2, 5)`, clamped to `[dt_min, dt_max]`.
/// A rejected step already at `dt_min` fails with [`Error::StepUnderflow`].
pub fn integrate_adaptive<F>(
    rhs: F,
    y0: &[f64],
    t0: f64,
    t1: f64,
    control: &StepControl,
) -> Result<IntegrationReport>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    integrate_adaptive_projected(rhs, |_: &mut [f64]| {}, y0, t0, t1, control)
}

pub fn integrate_adaptive_projected<F, P>(
    mut rhs: F,
    mut project: P,
    y0: &[f64],
    t0: f64,
    t1: f64,
    control: &StepControl,
) -> Result<IntegrationReport>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    P: FnMut(&mut [f64]),
{
    control.validate()?;
    check_span(t0, t1)?;
    let StepControl::Adaptive {
        rtol,
        atol,
        dt_min,
        dt_max,
        sample_interval,
    } = *control
    else {
        return Err(Error::Domain("integrate_adaptive requires an adaptive step control".into()));
    };
    check_finite(y0, t0)?;

    let dim = y0.len();
    let mut work = DopriWork::new(dim);
    let mut trajectory = Trajectory::new();
    trajectory.push(t0, y0.to_vec())?;

    let mut y = y0.to_vec();
    let mut t = t0;
    let mut dt = dt_max;
    let mut accepted = 0;
    let mut rejected = 0;
    let mut error_estimate = 0.0;
    let mut next_sample = 1usize;

    while t < t1 {
        let h = dt.min(t1 - t);
        let last = h >= t1 - t;
        work.attempt(&mut rhs, &y, t, h)?;
        let err = if dim == 0 {
            0.0
        } else {
            let sum: f64 = (0..dim)
                .map(|i| {
                    let scale = atol + rtol * y[i].abs().max(work.y_new[i].abs());
                    (work.err[i] / scale).powi(2)
                })
                .sum();
            (sum / dim as f64).sqrt()
        };
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };

        if err <= 1.0 {
            accepted += 1;
            error_estimate += work.err.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            let t_new = if last { t1 } else { t + h };
            let mut y_new = work.y_new.clone();
            project(&mut y_new);
            match sample_interval {
                None => trajectory.push(t_new, y_new.clone())?,
                Some(interval) => loop {
                    let target = t0 + next_sample as f64 * interval;
                    if target > t_new || target >= t1 {
                        break;
                    }
                    let (ts, ys) = if (target - t).abs() < (t_new - target).abs() {
                        (t, &y)
                    } else {
                        (t_new, &y_new)
                    };
                    if trajectory.last().map_or(true, |(tl, _)| ts > tl) && ts < t1 {
                        trajectory.push(ts, ys.clone())?;
                    }
                    next_sample += 1;
                },
            }
            t = t_new;
            y = y_new;
            dt = (h * factor).clamp(dt_min, dt_max);
        } else {
            rejected += 1;
            if h <= dt_min {
                return Err(Error::StepUnderflow { t, dt: h });
            }
            dt = (h * factor).max(dt_min);
        }
    }
    if t1 > t0 && trajectory.last().map(|(tl, _)| tl) != Some(t1) {
        trajectory.push(t1, y)?;
    }

    Ok(IntegrationReport {
        trajectory,
        accepted,
        rejected,
        error_estimate,
    })
}

/// Dispatch on the step-control mode.
pub fn integrate<F>(
    rhs: F,
    y0: &[f64],
    t0: f64,
    t1: f64,
    control: &StepControl,
) -> Result<IntegrationReport>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    integrate_projected(rhs, |_: &mut [f64]| {}, y0, t0, t1, control)
}

pub fn integrate_projected<F, P>(
    rhs: F,
    project: P,
    y0: &[f64],
    t0: f64,
    t1: f64,
    control: &StepControl,
) -> Result<IntegrationReport>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    P: FnMut(&mut [f64]),
{
    match control {
        StepControl::Fixed { .. } => integrate_fixed_projected(rhs, project, y0, t0, t1, control),
        StepControl::Adaptive { .. } => {
            integrate_adaptive_projected(rhs, project, y0, t0, t1, control)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn exp_rhs(_: f64, y: &[f64], out: &mut [f64]) {
        out[0] = y[0];
    }

    // ẏ = −i y as (re, im)
    fn rot_rhs(_: f64, y: &[f64], out: &mut [f64]) {
        out[0] = y[1];
        out[1] = -y[0];
    }

    #[test]
    fn zero_rhs_leaves_state() {
        let y = rk4_step(&mut |_, _: &[f64], o: &mut [f64]| o.fill(0.0), &[1.0, -2.0], 0.0, 0.3)
            .unwrap();
        assert_eq!(y, vec![1.0, -2.0]);
    }

    #[test]
    fn rk4_exponential_tableau() {
        // 1 + h + h²/2 + h³/6 + h⁴/24 at h = 0.1
        let expected = 1.0 + 0.1 + 0.005 + 0.001 / 6.0 + 0.0001 / 24.0;
        let y = rk4_step(&mut exp_rhs, &[1.0], 0.0, 0.1).unwrap();
        assert!((y[0] - expected).abs() < 1e-15);
        assert!((y[0] - 1.1051708333333333).abs() < 1e-15);
        assert!((y[0] - 0.1f64.exp()).abs() < 1e-7);
    }

    #[test]
    fn rk4_rotation_returns_after_one_period() {
        let n = 200;
        let dt = TAU / n as f64;
        let report =
            integrate_fixed(rot_rhs, &[1.0, 0.0], 0.0, TAU, &StepControl::fixed(dt)).unwrap();
        let (t, y) = report.trajectory.last().unwrap();
        assert_eq!(t, TAU);
        let err = ((y[0] - 1.0).powi(2) + y[1].powi(2)).sqrt();
        // global error ~ T·dt⁴/120
        assert!(err < TAU * dt.powi(4) / 100.0, "err = {err}");
    }

    #[test]
    fn rk4_rejects_non_positive_dt() {
        assert!(rk4_step(&mut exp_rhs, &[1.0], 0.0, 0.0).is_err());
    }

    #[test]
    fn empty_span_gives_single_sample() {
        let r = integrate_fixed(exp_rhs, &[1.0], 2.0, 2.0, &StepControl::fixed(0.1)).unwrap();
        assert_eq!(r.trajectory.times(), &[2.0]);
        assert_eq!(r.trajectory.states()[0], vec![1.0]);
        let a = StepControl::Adaptive {
            rtol: 1e-6,
            atol: 1e-9,
            dt_min: 1e-6,
            dt_max: 0.1,
            sample_interval: None,
        };
        let r = integrate_adaptive(exp_rhs, &[1.0], 2.0, 2.0, &a).unwrap();
        assert_eq!(r.trajectory.len(), 1);
    }

    #[test]
    fn partial_last_step_lands_on_end() {
        let r = integrate_fixed(exp_rhs, &[1.0], 0.0, 1.05, &StepControl::fixed(0.1)).unwrap();
        let times = r.trajectory.times();
        assert_eq!(times.len(), 12);
        assert_eq!(*times.last().unwrap(), 1.05);
        assert!((times[10] - 1.0).abs() < 1e-15);
        assert!((r.trajectory.states()[11][0] - 1.05f64.exp()).abs() < 1e-5);
    }

    #[test]
    fn sampling_picks_nearest_steps() {
        let control = StepControl::Fixed {
            dt: 0.01,
            sample_interval: Some(0.1),
        };
        let r = integrate_fixed(exp_rhs, &[1.0], 0.0, 1.0, &control).unwrap();
        let times = r.trajectory.times();
        assert_eq!(times.len(), 11);
        for (k, t) in times.iter().enumerate() {
            assert!((t - 0.1 * k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn sample_interval_shorter_than_step_does_not_duplicate() {
        let control = StepControl::Fixed {
            dt: 0.1,
            sample_interval: Some(0.03),
        };
        let r = integrate_fixed(exp_rhs, &[1.0], 0.0, 1.0, &control).unwrap();
        assert_eq!(r.trajectory.len(), 11);
    }

    #[test]
    fn sample_times_match_integration() {
        for (t1, dt, h) in [(1.0, 0.01, Some(0.1)), (1.05, 0.1, None), (2.0, 0.07, Some(0.3))] {
            let control = StepControl::Fixed {
                dt,
                sample_interval: h,
            };
            let r = integrate_fixed(exp_rhs, &[1.0], 0.0, t1, &control).unwrap();
            assert_eq!(r.trajectory.times(), fixed_sample_times(0.0, t1, dt, h).unwrap());
        }
    }

    #[test]
    fn last_sample_lands_on_end_without_duplicate() {
        for dt in [0.0301, 0.0299, 0.0249] {
            let times = fixed_sample_times(0.0, 1.0, dt, Some(0.25)).unwrap();
            assert_eq!(times.len(), 5, "dt {dt}: {times:?}");
            assert_eq!(*times.last().unwrap(), 1.0);
            assert!(times.windows(2).all(|w| w[1] - w[0] > 0.25 - dt));
        }
    }

    #[test]
    fn nan_reports_failing_time() {
        let rhs = |t: f64, _: &[f64], o: &mut [f64]| {
            o[0] = if t >= 0.5 { f64::NAN } else { 1.0 };
        };
        let err = integrate_fixed(rhs, &[0.0], 0.0, 1.0, &StepControl::fixed(0.1)).unwrap_err();
        match err {
            Error::NonFinite { t } => assert!((0.35..=0.5).contains(&t), "t = {t}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn harmonic_oscillator_error_drops_by_sixteen() {
        let err_at = |dt: f64| {
            let r = integrate_fixed(rot_rhs, &[1.0, 0.0], 0.0, 10.0, &StepControl::fixed(dt))
                .unwrap();
            let (t, y) = r.trajectory.last().unwrap();
            ((y[0] - t.cos()).powi(2) + (y[1] + t.sin()).powi(2)).sqrt()
        };
        let ratio = err_at(0.1) / err_at(0.05);
        assert!((ratio - 16.0).abs() < 0.25 * 16.0, "ratio = {ratio}");
    }

    #[test]
    fn nonlinear_convergence_order() {
        // logistic ẏ = y(1 − y), y(0) = 0.1; exact y = 1/(1 + 9e^{−t})
        let rhs = |_: f64, y: &[f64], o: &mut [f64]| o[0] = y[0] * (1.0 - y[0]);
        let exact = 1.0 / (1.0 + 9.0 * (-4.0f64).exp());
        let err = |dt: f64| {
            let r = integrate_fixed(rhs, &[0.1], 0.0, 4.0, &StepControl::fixed(dt)).unwrap();
            (r.trajectory.last().unwrap().1[0] - exact).abs()
        };
        let (e1, e2, e3) = (err(0.2), err(0.1), err(0.05));
        let p1 = (e1 / e2).log2();
        let p2 = (e2 / e3).log2();
        assert!((3.7..=4.3).contains(&p1), "order {p1}");
        assert!((3.7..=4.3).contains(&p2), "order {p2}");
    }

    #[test]
    fn fixed_runs_are_bitwise_deterministic() {
        let run = || {
            integrate_fixed(rot_rhs, &[0.3, 0.7], 0.0, 3.3, &StepControl::fixed(0.013)).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.trajectory, b.trajectory);
    }

    #[test]
    fn adaptive_zero_rhs_uses_dt_max() {
        let control = StepControl::Adaptive {
            rtol: 1e-8,
            atol: 1e-10,
            dt_min: 1e-6,
            dt_max: 0.25,
            sample_interval: None,
        };
        let r = integrate_adaptive(|_, _: &[f64], o: &mut [f64]| o.fill(0.0), &[1.0], 0.0, 1.0, &control)
            .unwrap();
        assert_eq!(r.trajectory.times(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(r.rejected, 0);
    }

    #[test]
    fn adaptive_with_pinned_step_matches_fixed_grid() {
        let d = 0.05;
        let control = StepControl::Adaptive {
            rtol: 1e-6,
            atol: 1e-8,
            dt_min: d,
            dt_max: d,
            sample_interval: None,
        };
        let r = integrate_adaptive(rot_rhs, &[1.0, 0.0], 0.0, 1.0, &control).unwrap();
        assert_eq!(r.accepted, 20);
        for (k, t) in r.trajectory.times().iter().enumerate() {
            assert!((t - k as f64 * d).abs() < 1e-12);
        }
    }

    #[test]
    fn adaptive_underflow() {
        let control = StepControl::Adaptive {
            rtol: 1e-14,
            atol: 1e-14,
            dt_min: 0.5,
            dt_max: 0.5,
            sample_interval: None,
        };
        let err = integrate_adaptive(exp_rhs, &[1.0], 0.0, 5.0, &control).unwrap_err();
        assert!(matches!(err, Error::StepUnderflow { .. }));
    }

    #[test]
    fn adaptive_error_estimate_bounds_true_error() {
        // linear suite: decay, growth, rotation
        let control = StepControl::Adaptive {
            rtol: 1e-7,
            atol: 1e-10,
            dt_min: 1e-8,
            dt_max: 1.0,
            sample_interval: None,
        };
        for lambda in [-1.0, -3.0, 0.5] {
            let r = integrate_adaptive(
                move |_, y: &[f64], o: &mut [f64]| o[0] = lambda * y[0],
                &[1.0],
                0.0,
                5.0,
                &control,
            )
            .unwrap();
            let truth = (r.trajectory.last().unwrap().1[0] - (5.0 * lambda).exp()).abs();
            assert!(truth <= 10.0 * r.error_estimate, "λ={lambda}: {truth} vs {}", r.error_estimate);
        }
        let r = integrate_adaptive(rot_rhs, &[1.0, 0.0], 0.0, 20.0, &control).unwrap();
        let y = &r.trajectory.last().unwrap().1;
        let truth = ((y[0] - 20f64.cos()).powi(2) + (y[1] + 20f64.sin()).powi(2)).sqrt();
        assert!(truth <= 10.0 * r.error_estimate, "{truth} vs {}", r.error_estimate);
    }

    #[test]
    fn adaptive_samples_are_increasing_and_include_end() {
        let control = StepControl::Adaptive {
            rtol: 1e-9,
            atol: 1e-12,
            dt_min: 1e-9,
            dt_max: 0.5,
            sample_interval: Some(0.1),
        };
        let r = integrate_adaptive(rot_rhs, &[1.0, 0.0], 0.0, 3.0, &control).unwrap();
        let times = r.trajectory.times();
        assert_eq!(times[0], 0.0);
        assert_eq!(*times.last().unwrap(), 3.0);
        assert!(times.windows(2).all(|w| w[1] > w[0]));
        let y = &r.trajectory.last().unwrap().1;
        assert!((y[0] - 3f64.cos()).abs() < 1e-7);
    }

    #[test]
    fn invalid_controls() {
        assert!(StepControl::fixed(0.0).validate().is_err());
        let bad = StepControl::Adaptive {
            rtol: 1e-6,
            atol: 1e-6,
            dt_min: 1.0,
            dt_max: 0.1,
            sample_interval: None,
        };
        assert!(bad.validate().is_err());
        assert!(integrate_fixed(exp_rhs, &[1.0], 1.0, 0.0, &StepControl::fixed(0.1)).is_err());
    }
}
