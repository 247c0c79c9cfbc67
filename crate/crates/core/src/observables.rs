//! Derived quantities and signal diagnostics.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::{FockAmplitudes, ModelParams};

/// Deviation score above which a signal is classified as non-sinusoidal.
pub const NON_SINUSOIDAL_THRESHOLD: f64 = 0.05;
/// Upper bound on the deviation score of strong-coupling acceptance runs.
pub const SCR_MAX_DEVIATION: f64 = 0.02;
/// Lower bound on the deviation score of ultrastrong-coupling acceptance runs.
pub const UCR_MIN_DEVIATION: f64 = 0.15;

/// Minimum number of samples accepted by [`sinusoid_deviation`].
pub const MIN_FIT_SAMPLES: usize = 16;

/// Σ |b_n|².
pub fn excited_probability(state: &FockAmplitudes) -> f64 {
    state.excited().iter().map(|b| b.norm_sqr()).sum()
}

/// Σ |c_n|².
pub fn ground_probability(state: &FockAmplitudes) -> f64 {
    state.ground().iter().map(|c| c.norm_sqr()).sum()
}

/// ⟨a⟩ = Σ √(n+1) (b_n* b_{n+1} + c_n* c_{n+1}).
pub fn field_expectation(state: &FockAmplitudes) -> C64 {
    let (b, c) = (state.excited(), state.ground());
    (0..state.n_max())
        .map(|n| {
            ((n + 1) as f64).sqrt() * (b[n].conj() * b[n + 1] + c[n].conj() * c[n + 1])
        })
        .sum()
}

/// Σ n (|b_n|² + |c_n|²).
pub fn mean_photon_number(state: &FockAmplitudes) -> f64 {
    state
        .excited()
        .iter()
        .zip(state.ground())
        .enumerate()
        .map(|(n, (b, c))| n as f64 * (b.norm_sqr() + c.norm_sqr()))
        .sum()
}

/// (X v)_n with X = −i(ga − g*a†).
fn apply_coupling(g: C64, v: &[C64], n: usize) -> C64 {
    let i = C64::i();
    let mut out = C64::new(0.0, 0.0);
    if n + 1 < v.len() {
        out += -i * g * ((n + 1) as f64).sqrt() * v[n + 1];
    }
    if n > 0 {
        out += i * g.conj() * (n as f64).sqrt() * v[n - 1];
    }
    out
}

/// ⟨ψ|H|ψ⟩ summed term by term.
pub fn energy_expectation(state: &FockAmplitudes, params: &ModelParams) -> f64 {
    let (b, c) = (state.excited(), state.ground());
    let g = params.g();
    let mut diag = 0.0;
    let mut cross = C64::new(0.0, 0.0);
    for n in 0..b.len() {
        let photons = n as f64 * params.omega_lambda();
        diag += (params.omega0() + photons) * b[n].norm_sqr() + photons * c[n].norm_sqr();
        cross += b[n].conj() * apply_coupling(g, c, n) + c[n].conj() * apply_coupling(g, b, n);
    }
    let scale = 1.0 + diag.abs() + cross.norm();
    debug_assert!(
        cross.im.abs() <= 1e-12 * scale * state.norm_squared().max(1.0),
        "energy has imaginary residue {}",
        cross.im
    );
    diag + cross.re
}

/// Principal arguments adjusted by multiples of 2π so that consecutive
/// differences lie in (−π, π].
pub fn unwrap_phase(series: &[C64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(series.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for (index, z) in series.iter().enumerate() {
        if z.re == 0.0 && z.im == 0.0 {
            return Err(Error::ZeroSample { index });
        }
        let raw = z.arg();
        if let Some(p) = prev {
            let mut delta = raw + offset - p;
            while delta > PI {
                offset -= 2.0 * PI;
                delta -= 2.0 * PI;
            }
            while delta <= -PI {
                offset += 2.0 * PI;
                delta += 2.0 * PI;
            }
        }
        let value = raw + offset;
        out.push(value);
        prev = Some(value);
    }
    Ok(out)
}

/// Least-squares line `intercept + slope·t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
}

pub fn linear_fit(times: &[f64], values: &[f64]) -> Result<LinearFit> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            got: values.len(),
        });
    }
    if times.len() < 2 {
        return Err(Error::DegenerateSignal("linear fit needs two samples".into()));
    }
    let n = times.len() as f64;
    let t_mean = times.iter().sum::<f64>() / n;
    let y_mean = values.iter().sum::<f64>() / n;
    let (mut stt, mut sty) = (0.0, 0.0);
    for (t, y) in times.iter().zip(values) {
        stt += (t - t_mean).powi(2);
        sty += (t - t_mean) * (y - y_mean);
    }
    if stt == 0.0 {
        return Err(Error::DegenerateSignal("all sample times coincide".into()));
    }
    let slope = sty / stt;
    let intercept = y_mean - slope * t_mean;
    let residual_rms = (times
        .iter()
        .zip(values)
        .map(|(t, y)| (y - intercept - slope * t).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(LinearFit {
        slope,
        intercept,
        residual_rms,
    })
}

/// Best single-sinusoid model `offset + amplitude·cos(omega·t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidFit {
    pub offset: f64,
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
    pub residual_rms: f64,
    /// RMS of the raw signal, offset included.
    pub signal_rms: f64,
}

impl SinusoidFit {
    /// `residual_rms / signal_rms`; 0 for a perfect sinusoid.
    pub fn score(&self) -> f64 {
        self.residual_rms / self.signal_rms
    }

    pub fn is_non_sinusoidal(&self) -> bool {
        self.score() > NON_SINUSOIDAL_THRESHOLD
    }
}

/// Number of leading samples that share the first sample spacing (relative
/// tolerance 1e-6). A trajectory whose final step was shortened to land on
/// the end time has one trailing irregular sample.
pub fn uniform_prefix_len(times: &[f64]) -> usize {
    if times.len() < 3 {
        return times.len();
    }
    let dt = times[1] - times[0];
    let mut len = 2;
    while len < times.len() {
        let expected = times[0] + len as f64 * dt;
        if (times[len] - expected).abs() > 1e-6 * dt.abs() {
            break;
        }
        len += 1;
    }
    len
}

struct Fitter<'a> {
    t: Vec<f64>,
    y: &'a [f64],
}

#[derive(Clone, Copy)]
struct Candidate {
    omega: f64,
    offset: f64,
    cos: f64,
    sin: f64,
    residual_rms: f64,
}

impl Fitter<'_> {
    fn offset_only(&self) -> Candidate {
        let n = self.y.len() as f64;
        let mean = self.y.iter().sum::<f64>() / n;
        let rss: f64 = self.y.iter().map(|y| (y - mean).powi(2)).sum();
        Candidate {
            omega: 0.0,
            offset: mean,
            cos: 0.0,
            sin: 0.0,
            residual_rms: (rss / n).sqrt(),
        }
    }

    fn at(&self, omega: f64) -> Candidate {
        let mut ata = Matrix3::zeros();
        let mut atb = Vector3::zeros();
        for (&t, &y) in self.t.iter().zip(self.y) {
            let (s, c) = (omega * t).sin_cos();
            let row = Vector3::new(1.0, c, s);
            ata += row * row.transpose();
            atb += row * y;
        }
        let Some(coef) = ata.lu().solve(&atb) else {
            return self.offset_only();
        };
        let n = self.y.len() as f64;
        let rss: f64 = self
            .t
            .iter()
            .zip(self.y)
            .map(|(&t, &y)| {
                let (s, c) = (omega * t).sin_cos();
                (y - coef[0] - coef[1] * c - coef[2] * s).powi(2)
            })
            .sum();
        let fit = Candidate {
            omega,
            offset: coef[0],
            cos: coef[1],
            sin: coef[2],
            residual_rms: (rss / n).sqrt(),
        };
        if fit.residual_rms.is_finite() {
            fit
        } else {
            self.offset_only()
        }
    }

    /// Golden-section search for the residual minimum on `[lo, hi]`.
    fn refine(&self, lo: f64, hi: f64) -> Candidate {
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (lo.max(0.0), hi);
        let mut x1 = b - ratio * (b - a);
        let mut x2 = a + ratio * (b - a);
        let mut f1 = self.at(x1);
        let mut f2 = self.at(x2);
        for _ in 0..80 {
            if f1.residual_rms <= f2.residual_rms {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - ratio * (b - a);
                f1 = self.at(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + ratio * (b - a);
                f2 = self.at(x2);
            }
            if b - a <= 1e-13 * b.max(1.0) {
                break;
            }
        }
        if f1.residual_rms <= f2.residual_rms {
            f1
        } else {
            f2
        }
    }
}

/// Increasing times whose gaps stay within 50% of the mean gap. The last gap
/// only has to be positive, since a run may shorten its final step.
fn nearly_uniform(times: &[f64]) -> bool {
    let n = times.len();
    let body = &times[..n - 1];
    let mean = (body[body.len() - 1] - body[0]) / (body.len() - 1) as f64;
    mean > 0.0
        && body
            .windows(2)
            .all(|w| ((w[1] - w[0]) - mean).abs() <= 0.5 * mean)
        && times[n - 1] > times[n - 2]
}

/// Fit the best single sinusoid to a uniformly sampled signal.
///
/// Sampling jitter of up to half a spacing is tolerated (sample times
/// snapped to an integration grid); the frequency search uses the mean
/// spacing and the fits use the exact times.
///
/// Candidate frequencies come from the largest peaks of the zero-padded DFT
/// of the mean-removed signal. Each one is refined by golden-section search
/// on the residual, with offset, amplitude and phase obtained by linear least
/// squares at every trial frequency. The constant model (ω = 0) is always a
/// candidate.
pub fn sinusoid_deviation(times: &[f64], signal: &[f64]) -> Result<SinusoidFit> {
    if times.len() != signal.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            got: signal.len(),
        });
    }
    if times.len() < MIN_FIT_SAMPLES {
        return Err(Error::Domain(format!(
            "sinusoid fit needs at least {MIN_FIT_SAMPLES} samples, got {}",
            times.len()
        )));
    }
    if !nearly_uniform(times) {
        return Err(Error::Domain("sinusoid fit requires uniformly spaced samples".into()));
    }
    let n = signal.len();
    let signal_rms = (signal.iter().map(|y| y * y).sum::<f64>() / n as f64).sqrt();
    if !(signal_rms >= 1e-14) {
        return Err(Error::DegenerateSignal(format!("signal RMS {signal_rms:e}")));
    }

    let t0 = times[0];
    let dt = (times[n - 2] - t0) / (n - 2) as f64;
    let fitter = Fitter {
        t: times.iter().map(|t| t - t0).collect(),
        y: signal,
    };

    let mean = signal.iter().sum::<f64>() / n as f64;
    let padded = (8 * n).next_power_of_two();
    let mut buf: Vec<C64> = signal
        .iter()
        .map(|y| C64::new(y - mean, 0.0))
        .chain(std::iter::repeat(C64::new(0.0, 0.0)))
        .take(padded)
        .collect();
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    let mags: Vec<f64> = buf[..=padded / 2].iter().map(|z| z.norm()).collect();
    let bin = 2.0 * PI / (padded as f64 * dt);

    let mut peaks: Vec<usize> = (1..mags.len() - 1)
        .filter(|&k| mags[k] >= mags[k - 1] && mags[k] >= mags[k + 1] && mags[k] > 0.0)
        .collect();
    peaks.sort_by(|&a, &b| mags[b].total_cmp(&mags[a]).then(a.cmp(&b)));
    peaks.truncate(5);

    let mut best = fitter.offset_only();
    for k in peaks {
        let omega = k as f64 * bin;
        let fit = fitter.refine(omega - bin, omega + bin);
        if fit.residual_rms < best.residual_rms {
            best = fit;
        }
    }

    // a cos ωt' + b sin ωt' = A cos(ωt' + φ), φ = atan2(−b, a); shift t' = t − t0
    let amplitude = best.cos.hypot(best.sin);
    let phase = if amplitude > 0.0 {
        (-best.sin).atan2(best.cos) - best.omega * t0
    } else {
        0.0
    };
    Ok(SinusoidFit {
        offset: best.offset,
        amplitude,
        omega: best.omega,
        phase,
        residual_rms: best.residual_rms,
        signal_rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Atom;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * dt).collect()
    }

    /// Dense frequency scan with linear least squares at every grid point.
    fn brute_force_score(t: &[f64], y: &[f64], max_omega: f64, points: usize) -> f64 {
        let fitter = Fitter { t: t.to_vec(), y };
        let rms = (y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64).sqrt();
        let mut best = fitter.offset_only().residual_rms;
        for k in 1..=points {
            best = best.min(fitter.at(max_omega * k as f64 / points as f64).residual_rms);
        }
        best / rms
    }

    #[test]
    fn probabilities_of_basis_states() {
        assert_eq!(excited_probability(&FockAmplitudes::basis(0, 4, Atom::Excited).unwrap()), 1.0);
        assert_eq!(excited_probability(&FockAmplitudes::basis(5, 6, Atom::Ground).unwrap()), 0.0);
        let mut s = FockAmplitudes::zeros(3);
        s.excited_mut()[0] = c(FRAC_1_SQRT_2, 0.0);
        s.ground_mut()[0] = c(FRAC_1_SQRT_2, 0.0);
        assert!((excited_probability(&s) - 0.5).abs() < 1e-15);
        assert_eq!(excited_probability(&s) + ground_probability(&s), s.norm_squared());
    }

    #[test]
    fn field_expectation_cases() {
        for n in 0..5 {
            let s = FockAmplitudes::basis(n, 6, Atom::Excited).unwrap();
            assert_eq!(field_expectation(&s), c(0.0, 0.0));
        }
        let mut s = FockAmplitudes::zeros(3);
        s.excited_mut()[0] = c(FRAC_1_SQRT_2, 0.0);
        s.excited_mut()[1] = c(FRAC_1_SQRT_2, 0.0);
        assert!((field_expectation(&s) - c(0.5, 0.0)).norm() < 1e-15);

        let alpha = c(1.2, -0.7);
        let coh = FockAmplitudes::coherent(alpha, 40, Atom::Ground, Default::default()).unwrap();
        assert!((field_expectation(&coh) - alpha).norm() < 1e-10);
    }

    #[test]
    fn mean_photon_number_cases() {
        assert_eq!(mean_photon_number(&FockAmplitudes::basis(0, 4, Atom::Excited).unwrap()), 0.0);
        assert_eq!(mean_photon_number(&FockAmplitudes::basis(3, 4, Atom::Ground).unwrap()), 3.0);
        let coh = FockAmplitudes::coherent(c(2.0, 0.0), 40, Atom::Excited, Default::default())
            .unwrap();
        assert!((mean_photon_number(&coh) - 4.0).abs() < 1e-10);
    }

    #[test]
    fn energy_expectation_cases() {
        let p = ModelParams::new(2.5, 1.5, c(0.3, 0.2)).unwrap();
        let e0 = FockAmplitudes::basis(0, 5, Atom::Excited).unwrap();
        assert_eq!(energy_expectation(&e0, &p), 2.5);
        let g4 = FockAmplitudes::basis(4, 5, Atom::Ground).unwrap();
        assert_eq!(energy_expectation(&g4, &p), 6.0);

        let p = ModelParams::real(1.0, 1.0, 0.7).unwrap();
        let mut s = FockAmplitudes::zeros(2);
        s.excited_mut()[0] = c(FRAC_1_SQRT_2, 0.0);
        s.ground_mut()[1] = c(FRAC_1_SQRT_2, 0.0);
        assert!((energy_expectation(&s, &p) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unwrap_cases() {
        let theta = 2.7;
        let constant = vec![C64::from_polar(1.0, theta); 10];
        assert!(unwrap_phase(&constant).unwrap().iter().all(|p| (p - theta).abs() < 1e-15));

        let omega = 3.0;
        let t = grid(2000, 0.01);
        let series: Vec<C64> = t.iter().map(|t| C64::from_polar(1.0, -omega * t)).collect();
        let phase = unwrap_phase(&series).unwrap();
        for (p, t) in phase.iter().zip(&t) {
            assert!((p + omega * t).abs() < 1e-9);
        }

        let with_zero = [c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        assert_eq!(unwrap_phase(&with_zero), Err(Error::ZeroSample { index: 1 }));
    }

    #[test]
    fn exact_cosine_fits_itself() {
        let t = grid(500, 0.02);
        let y: Vec<f64> = t.iter().map(|t| 0.3 + 1.7 * (4.1 * t + 0.6).cos()).collect();
        let fit = sinusoid_deviation(&t, &y).unwrap();
        assert!(fit.score() < 1e-6, "score {}", fit.score());
        assert!((fit.omega - 4.1).abs() < 1e-8);
        assert!((fit.amplitude - 1.7).abs() < 1e-8);
        assert!((fit.offset - 0.3).abs() < 1e-8);
        let wrapped = (fit.phase - 0.6).rem_euclid(2.0 * PI);
        assert!(wrapped < 1e-6 || 2.0 * PI - wrapped < 1e-6);
    }

    #[test]
    fn fit_phase_accounts_for_time_origin() {
        let t: Vec<f64> = grid(400, 0.05).iter().map(|t| t + 7.0).collect();
        let y: Vec<f64> = t.iter().map(|t| (2.0 * t - 1.0).cos()).collect();
        let fit = sinusoid_deviation(&t, &y).unwrap();
        let model = |t: f64| fit.offset + fit.amplitude * (fit.omega * t + fit.phase).cos();
        assert!(t.iter().zip(&y).all(|(t, y)| (model(*t) - y).abs() < 1e-6));
    }

    #[test]
    fn constant_signal() {
        let t = grid(64, 0.1);
        let y = vec![0.42; 64];
        let fit = sinusoid_deviation(&t, &y).unwrap();
        assert!(fit.amplitude < 1e-12);
        assert!(fit.score() < 1e-12);
        assert!((fit.offset - 0.42).abs() < 1e-15);
    }

    #[test]
    fn two_incommensurate_cosines() {
        let t = grid(1000, 0.05);
        let y: Vec<f64> = t
            .iter()
            .map(|t| (1.0 * t).cos() + (2f64.sqrt() * 1.9 * t).cos())
            .collect();
        let fit = sinusoid_deviation(&t, &y).unwrap();
        let brute = brute_force_score(&t, &y, 6.0, 60_000);
        assert!(brute > 0.3, "brute {brute}");
        assert!(fit.score() > 0.3);
        assert!(fit.score() <= brute + 1e-6, "fit {} vs brute {brute}", fit.score());
    }

    #[test]
    fn fit_matches_brute_force_on_damped_signal() {
        let t = grid(800, 0.025);
        let y: Vec<f64> = t.iter().map(|t| (-0.1 * t).exp() * (5.0 * t).sin() + 0.2).collect();
        let fit = sinusoid_deviation(&t, &y).unwrap();
        let brute = brute_force_score(&t, &y, 20.0, 100_000);
        assert!(fit.score() <= brute + 1e-6, "fit {} vs brute {brute}", fit.score());
        assert!(fit.score() > 0.05);
    }

    #[test]
    fn fit_input_validation() {
        let t = grid(10, 0.1);
        assert!(sinusoid_deviation(&t, &[1.0; 10]).is_err());
        let t = grid(32, 0.1);
        assert!(matches!(
            sinusoid_deviation(&t, &[0.0; 32]),
            Err(Error::DegenerateSignal(_))
        ));
        let mut irregular = grid(32, 0.1);
        irregular[20] += 0.06;
        assert!(sinusoid_deviation(&irregular, &[1.0; 32]).is_err());
        let mut backwards = grid(32, 0.1);
        backwards[31] = backwards[30];
        assert!(sinusoid_deviation(&backwards, &[1.0; 32]).is_err());
    }

    #[test]
    fn jittered_sampling_is_accepted() {
        // sample times snapped to a step of 0.003 from a nominal spacing of 0.01
        let step = 0.003;
        let mut t: Vec<f64> = (0..2000).map(|k| (0.01 * k as f64 / step).round() * step).collect();
        t.push(t[t.len() - 1] + 0.001);
        let y: Vec<f64> = t.iter().map(|t| (2.0 * t).cos().powi(2)).collect();
        let fit = sinusoid_deviation(&t, &y).unwrap();
        assert!(fit.score() < 1e-9, "{}", fit.score());
        assert!((fit.omega - 4.0).abs() < 1e-9);
    }

    #[test]
    fn uniform_prefix_detects_short_last_step() {
        let mut t = grid(10, 0.5);
        t.push(4.7);
        assert_eq!(uniform_prefix_len(&t), 10);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let t = grid(50, 0.2);
        let y: Vec<f64> = t.iter().map(|t| 3.0 - 2.0 * t).collect();
        let fit = linear_fit(&t, &y).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-12);
        assert!((fit.intercept - 3.0).abs() < 1e-12);
        assert!(fit.residual_rms < 1e-12);
    }
}
