//! Parameter set, state representations and initial-state constructors shared
//! by every dynamics backend.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Default tail-mass threshold used when certifying a photon-number cutoff.
pub const DEFAULT_TAIL_THRESHOLD: f64 = 1e-12;

/// Tolerance on `|b|² + |c|² = 1` accepted by [`MeanFieldState::from_product`].
pub const PRODUCT_NORM_TOL: f64 = 1e-10;

/// Atom frequency, cavity frequency and complex coupling (ħ = 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    omega0: f64,
    omega_lambda: f64,
    g: C64,
}

impl ModelParams {
    pub fn new(omega0: f64, omega_lambda: f64, g: C64) -> Result<Self> {
        if !(omega0.is_finite() && omega_lambda.is_finite() && g.re.is_finite() && g.im.is_finite())
        {
            return Err(Error::Domain("model parameters must be finite".into()));
        }
        if omega0 <= 0.0 {
            return Err(Error::Domain(format!("omega0 must be positive, got {omega0}")));
        }
        if omega_lambda <= 0.0 {
            return Err(Error::Domain(format!(
                "omega_lambda must be positive, got {omega_lambda}"
            )));
        }
        Ok(Self {
            omega0,
            omega_lambda,
            g,
        })
    }

    /// Shorthand for a real coupling constant.
    pub fn real(omega0: f64, omega_lambda: f64, g: f64) -> Result<Self> {
        Self::new(omega0, omega_lambda, C64::new(g, 0.0))
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn omega_lambda(&self) -> f64 {
        self.omega_lambda
    }

    pub fn g(&self) -> C64 {
        self.g
    }

    /// Δ = ω₀ − ω_λ.
    pub fn detuning(&self) -> f64 {
        self.omega0 - self.omega_lambda
    }

    /// Γ = ω₀ + ω_λ.
    pub fn sum_frequency(&self) -> f64 {
        self.omega0 + self.omega_lambda
    }

    /// Copy with a different coupling, keeping both frequencies.
    pub fn with_coupling(&self, g: C64) -> Result<Self> {
        Self::new(self.omega0, self.omega_lambda, g)
    }
}

/// Validating constructor for [`ModelParams`].
pub fn make_params(omega0: f64, omega_lambda: f64, g: C64) -> Result<ModelParams> {
    ModelParams::new(omega0, omega_lambda, g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Atom {
    Excited,
    Ground,
}

/// How to treat probability weight lost beyond the photon-number cutoff when
/// building a coherent state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruncationMode {
    /// Fail if the discarded tail exceeds `tail_tol`.
    Strict { tail_tol: f64 },
    /// Always renormalize the retained amplitudes.
    Lenient,
}

impl Default for TruncationMode {
    fn default() -> Self {
        TruncationMode::Strict {
            tail_tol: DEFAULT_TAIL_THRESHOLD,
        }
    }
}

/// Reduced variables of the product (unentangled) ansatz.
///
/// `alpha` is the field expectation ⟨a⟩, `beta = b c*` the atomic coherence
/// and `s = |b|² − |c|²` the population inversion. Valid states satisfy
/// `s² + 4|β|² = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldState {
    pub alpha: C64,
    pub beta: C64,
    pub s: f64,
}

impl MeanFieldState {
    pub fn new(alpha: C64, beta: C64, s: f64) -> Self {
        Self { alpha, beta, s }
    }

    /// Reduce atomic amplitudes `(b, c)` and a field expectation to `(α, β, s)`.
    pub fn from_product(b: C64, c: C64, alpha: C64) -> Result<Self> {
        let norm_sq = b.norm_sqr() + c.norm_sqr();
        if !norm_sq.is_finite() || (norm_sq - 1.0).abs() > PRODUCT_NORM_TOL {
            return Err(Error::Normalization {
                norm_sq,
                tol: PRODUCT_NORM_TOL,
            });
        }
        Ok(Self {
            alpha,
            beta: b * c.conj(),
            s: b.norm_sqr() - c.norm_sqr(),
        })
    }

    /// Default seed for the mean-field runs: one field quantum (α = 1) with
    /// the atom placed on the rotating-wave nonlinear normal mode of that
    /// field amplitude.
    ///
    /// With `x = √5 − 2` the seed is `s = −x`, `β = −i √x · g/|g|`. Under the
    /// rotating-wave truncation this configuration rotates rigidly, so any
    /// non-sinusoidal motion comes from the anti-rotating terms alone. For
    /// `g = 0` the phase factor defaults to 1.
    pub fn default_seed(params: &ModelParams) -> Self {
        let x = 5f64.sqrt() - 2.0;
        let g = params.g();
        let phase = if g.norm() > 0.0 { g / g.norm() } else { C64::new(1.0, 0.0) };
        Self {
            alpha: C64::new(1.0, 0.0),
            beta: C64::new(0.0, -x.sqrt()) * phase,
            s: -x,
        }
    }

    /// |s² + 4|β|² − 1|.
    pub fn constraint_defect(&self) -> f64 {
        (self.s * self.s + 4.0 * self.beta.norm_sqr() - 1.0).abs()
    }

    /// |b| recovered from the inversion, `√((1 + s)/2)`.
    pub fn excited_amplitude(&self) -> f64 {
        (0.5 * (1.0 + self.s)).max(0.0).sqrt()
    }

    /// |c| recovered from the inversion, `√((1 − s)/2)`.
    pub fn ground_amplitude(&self) -> f64 {
        (0.5 * (1.0 - self.s)).max(0.0).sqrt()
    }
}

/// Amplitudes `b_n` (atom excited) and `c_n` (atom ground) on the photon
/// numbers `0..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockAmplitudes {
    b: Vec<C64>,
    c: Vec<C64>,
}

impl FockAmplitudes {
    pub fn new(b: Vec<C64>, c: Vec<C64>) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::Domain("amplitude vectors must be non-empty".into()));
        }
        if b.len() != c.len() {
            return Err(Error::DimensionMismatch {
                expected: b.len(),
                got: c.len(),
            });
        }
        Ok(Self { b, c })
    }

    pub fn zeros(n_max: usize) -> Self {
        Self {
            b: vec![C64::new(0.0, 0.0); n_max + 1],
            c: vec![C64::new(0.0, 0.0); n_max + 1],
        }
    }

    /// `|e, n⟩` or `|g, n⟩`.
    pub fn basis(n: usize, n_max: usize, atom: Atom) -> Result<Self> {
        if n > n_max {
            return Err(Error::Index {
                index: n,
                limit: n_max,
            });
        }
        let mut state = Self::zeros(n_max);
        state.channel_mut(atom)[n] = C64::new(1.0, 0.0);
        Ok(state)
    }

    /// Coherent field `|α_c⟩` on the chosen atomic level, truncated at `n_max`
    /// and renormalized.
    ///
    /// Amplitudes follow the recurrence `a_{n+1} = a_n α/√(n+1)` from
    /// `a_0 = e^{−|α|²/2}`.
    pub fn coherent(alpha: C64, n_max: usize, atom: Atom, mode: TruncationMode) -> Result<Self> {
        if !(alpha.re.is_finite() && alpha.im.is_finite()) {
            return Err(Error::Domain("coherent amplitude must be finite".into()));
        }
        let mut amps = Vec::with_capacity(n_max + 1);
        let mut amp = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
        for n in 0..=n_max {
            amps.push(amp);
            amp = amp * alpha / ((n + 1) as f64).sqrt();
        }
        let tail = coherent_tail_mass(alpha, n_max);
        if let TruncationMode::Strict { tail_tol } = mode {
            if tail > tail_tol {
                return Err(Error::Truncation {
                    n_max,
                    tail,
                    threshold: tail_tol,
                });
            }
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Truncation {
                n_max,
                tail,
                threshold: 0.0,
            });
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        let mut state = Self::zeros(n_max);
        *state.channel_mut(atom) = amps;
        Ok(state)
    }

    pub fn n_max(&self) -> usize {
        self.b.len() - 1
    }

    pub fn excited(&self) -> &[C64] {
        &self.b
    }

    pub fn ground(&self) -> &[C64] {
        &self.c
    }

    pub fn excited_mut(&mut self) -> &mut [C64] {
        &mut self.b
    }

    pub fn ground_mut(&mut self) -> &mut [C64] {
        &mut self.c
    }

    fn channel_mut(&mut self, atom: Atom) -> &mut Vec<C64> {
        match atom {
            Atom::Excited => &mut self.b,
            Atom::Ground => &mut self.c,
        }
    }

    /// Σ (|b_n|² + |c_n|²).
    pub fn norm_squared(&self) -> f64 {
        self.b
            .iter()
            .zip(&self.c)
            .map(|(b, c)| b.norm_sqr() + c.norm_sqr())
            .sum()
    }

    /// Probability weight in the top `k` photon levels.
    pub fn tail_mass(&self, k: usize) -> Result<f64> {
        let levels = self.b.len();
        if k == 0 || k > levels {
            return Err(Error::Index {
                index: k,
                limit: levels,
            });
        }
        Ok((levels - k..levels)
            .map(|n| self.b[n].norm_sqr() + self.c[n].norm_sqr())
            .sum())
    }

    /// Scale to unit norm. Fails on the zero vector.
    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm_squared().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Normalization {
                norm_sq: norm * norm,
                tol: 0.0,
            });
        }
        Ok(Self {
            b: self.b.iter().map(|z| z / norm).collect(),
            c: self.c.iter().map(|z| z / norm).collect(),
        })
    }

    /// Stacked vector `(b_0..b_N, c_0..c_N)`, the ordering used by the dense
    /// Hamiltonian.
    pub fn to_stacked(&self) -> Vec<C64> {
        self.b.iter().chain(&self.c).copied().collect()
    }

    pub fn from_stacked(v: &[C64]) -> Result<Self> {
        if v.is_empty() || v.len() % 2 != 0 {
            return Err(Error::DimensionMismatch {
                expected: 2 * (v.len() / 2).max(1),
                got: v.len(),
            });
        }
        let half = v.len() / 2;
        Self::new(v[..half].to_vec(), v[half..].to_vec())
    }

    /// Largest componentwise modulus difference between two states.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.b.len() != other.b.len() {
            return Err(Error::DimensionMismatch {
                expected: self.b.len(),
                got: other.b.len(),
            });
        }
        Ok(self
            .b
            .iter()
            .zip(&other.b)
            .chain(self.c.iter().zip(&other.c))
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max))
    }
}

/// Probability weight a coherent state places above `n_max`, summed
/// term-by-term rather than as `1 − Σ` to keep precision for tiny tails.
pub fn coherent_tail_mass(alpha: C64, n_max: usize) -> f64 {
    let mean = alpha.norm_sqr();
    let mut weight = (-mean).exp();
    for n in 1..=n_max {
        weight *= mean / n as f64;
    }
    let mut tail = 0.0;
    let mut n = n_max + 1;
    let cap = n_max + 1000 + (20.0 * (mean + 10.0)) as usize;
    while n < cap {
        weight *= mean / n as f64;
        tail += weight;
        if (n as f64) > mean && (weight <= 1e-18 * tail || weight < 1e-300) {
            break;
        }
        n += 1;
    }
    tail
}

/// Declarative initial condition for Fock-space runs, independent of the
/// cutoff it will be materialized at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialSpec {
    Basis { n: usize, atom: Atom },
    Coherent { alpha: C64, atom: Atom },
}

impl InitialSpec {
    pub fn build(&self, n_max: usize, mode: TruncationMode) -> Result<FockAmplitudes> {
        match *self {
            InitialSpec::Basis { n, atom } => FockAmplitudes::basis(n, n_max, atom),
            InitialSpec::Coherent { alpha, atom } => {
                FockAmplitudes::coherent(alpha, n_max, atom, mode)
            }
        }
    }

    pub fn atom(&self) -> Atom {
        match *self {
            InitialSpec::Basis { atom, .. } | InitialSpec::Coherent { atom, .. } => atom,
        }
    }

    /// Cutoff used when none is configured: `4⌈|α|²⌉ + 20` for coherent
    /// starts, `n + 20` for number states.
    pub fn default_n_max(&self) -> usize {
        match *self {
            InitialSpec::Basis { n, .. } => n + 20,
            InitialSpec::Coherent { alpha, .. } => 4 * alpha.norm_sqr().ceil() as usize + 20,
        }
    }

    /// Smallest cutoff at which the state itself is representable: the
    /// occupied level for number states, the strict tail bound for coherent
    /// states.
    pub fn min_n_max(&self, tail_tol: f64) -> usize {
        match *self {
            InitialSpec::Basis { n, .. } => n,
            InitialSpec::Coherent { alpha, .. } => {
                let mut n = 0;
                while coherent_tail_mass(alpha, n) > tail_tol {
                    n += 1;
                }
                n
            }
        }
    }

    /// Field expectation ⟨a⟩ of the initial field, used to seed the
    /// mean-field model.
    pub fn field_expectation(&self) -> C64 {
        match *self {
            InitialSpec::Basis { .. } => C64::new(0.0, 0.0),
            InitialSpec::Coherent { alpha, .. } => alpha,
        }
    }
}

/// A named per-sample observable channel.
#[derive(Debug, Clone, PartialEq)]
pub enum Series {
    Real(Vec<f64>),
    Complex(Vec<C64>),
}

impl Series {
    pub fn len(&self) -> usize {
        match self {
            Series::Real(v) => v.len(),
            Series::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_real(&self) -> Option<&[f64]> {
        match self {
            Series::Real(v) => Some(v),
            Series::Complex(_) => None,
        }
    }

    pub fn as_complex(&self) -> Option<&[C64]> {
        match self {
            Series::Complex(v) => Some(v),
            Series::Real(_) => None,
        }
    }
}

/// Time-ordered samples of a state plus derived observable channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    times: Vec<f64>,
    states: Vec<S>,
    channels: Vec<(String, Series)>,
}

impl<S> Default for Trajectory<S> {
    fn default() -> Self {
        Self {
            times: Vec::new(),
            states: Vec::new(),
            channels: Vec::new(),
        }
    }
}

impl<S> Trajectory<S> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_samples(times: Vec<f64>, states: Vec<S>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                got: states.len(),
            });
        }
        if let Some(w) = times.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::Domain(format!(
                "sample times must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self {
            times,
            states,
            channels: Vec::new(),
        })
    }

    /// Append a sample. Only valid before channels are attached.
    pub fn push(&mut self, t: f64, state: S) -> Result<()> {
        if !self.channels.is_empty() {
            return Err(Error::Domain("cannot append samples after channels are attached".into()));
        }
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::Domain(format!(
                    "sample times must be strictly increasing ({last} then {t})"
                )));
            }
        }
        self.times.push(t);
        self.states.push(state);
        Ok(())
    }

    pub fn add_channel(&mut self, name: impl Into<String>, series: Series) -> Result<()> {
        let name = name.into();
        if series.len() != self.times.len() {
            return Err(Error::DimensionMismatch {
                expected: self.times.len(),
                got: series.len(),
            });
        }
        if self.channel(&name).is_some() {
            return Err(Error::Domain(format!("duplicate channel {name}")));
        }
        self.channels.push((name, series));
        Ok(())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &S)> {
        self.times.last().copied().zip(self.states.last())
    }

    pub fn channels(&self) -> &[(String, Series)] {
        &self.channels
    }

    pub fn channel(&self, name: &str) -> Option<&Series> {
        self.channels
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
    }

    pub fn real_channel(&self, name: &str) -> Option<&[f64]> {
        self.channel(name).and_then(Series::as_real)
    }

    pub fn complex_channel(&self, name: &str) -> Option<&[C64]> {
        self.channel(name).and_then(Series::as_complex)
    }

    /// Convert every state, keeping times and channels.
    pub fn try_map_states<T>(self, f: impl FnMut(S) -> Result<T>) -> Result<Trajectory<T>> {
        let states = self.states.into_iter().map(f).collect::<Result<Vec<_>>>()?;
        Ok(Trajectory {
            times: self.times,
            states,
            channels: self.channels,
        })
    }
}
