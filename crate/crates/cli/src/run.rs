//! Run orchestration: simulate, summarize, write artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cqed::fock::{self, simulate_fock, Couplings, FockConfig};
use cqed::integrator::{fixed_sample_times, StepControl};
use cqed::meanfield::{simulate_meanfield, MeanFieldConfig};
use cqed::observables::sinusoid_deviation;
use cqed::rwa::rwa_trajectory;
use cqed::spectral::oracle_trajectory;
use cqed::{FockAmplitudes, MeanFieldState, Series, Trajectory, TruncationMode};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{resolved_json, ConfigError, Cutoff, Initial, Model, RunSpec};
use crate::output::{trajectory_json, write_csv, OutputError};
use crate::svg::{render_svg_plot, PlotError, PlotSeries};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] cqed::Error),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("plot: {0}")]
    Plot(#[from] PlotError),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Io { .. } => EXIT_IO,
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Numerical(_) | RunError::Output(_) | RunError::Plot(_) => EXIT_NUMERICAL,
        }
    }
}

/// Run diagnostics written to `summary.json`.
///
/// For mean-field runs `norm_defect_max` is the largest `|s² + 4|β|² − 1|`
/// and the deviation score is taken on `Re α`; Fock-space runs use `|‖ψ‖² − 1|`
/// and `P_e`. Fields that do not apply are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub norm_defect_max: f64,
    pub energy_drift_rel: f64,
    pub deviation_score: Option<f64>,
    pub dominant_omega: Option<f64>,
    pub tail_mass_max: Option<f64>,
    pub n_max_used: Option<usize>,
    pub wall_seconds: Option<f64>,
}

pub enum Computed {
    MeanField(Trajectory<MeanFieldState>),
    Fock {
        trajectory: Trajectory<FockAmplitudes>,
        n_max: usize,
    },
}

impl Computed {
    fn times(&self) -> &[f64] {
        match self {
            Computed::MeanField(t) => t.times(),
            Computed::Fock { trajectory, .. } => trajectory.times(),
        }
    }

    fn channel(&self, name: &str) -> Option<&Series> {
        match self {
            Computed::MeanField(t) => t.channel(name),
            Computed::Fock { trajectory, .. } => trajectory.channel(name),
        }
    }

    fn real(&self, name: &str) -> &[f64] {
        self.channel(name)
            .and_then(Series::as_real)
            .expect("backend attaches its standard channels")
    }
}

fn fock_spec(spec: &RunSpec) -> Result<cqed::InitialSpec, RunError> {
    match spec.initial {
        Initial::Fock(s) => Ok(s),
        Initial::MeanField(_) => Err(ConfigError::Semantic {
            field: "initial.kind".into(),
            message: format!("model `{}` needs a Fock-space initial state", spec.model.name()),
        }
        .into()),
    }
}

/// Cutoff and initial amplitudes of a Fock-space run.
pub fn prepare_fock(spec: &RunSpec) -> Result<(usize, FockAmplitudes, StepControl), RunError> {
    let initial = fock_spec(spec)?;
    let tr = &spec.truncation;
    let n_max = match tr.cutoff {
        Cutoff::Fixed(n) => n,
        Cutoff::Auto => {
            fock::auto_truncate(&initial, &spec.params, spec.t_end, tr.auto_tol, tr.auto_ceiling)?
        }
    };
    let state = initial.build(
        n_max,
        TruncationMode::Strict {
            tail_tol: tr.tail_tol,
        },
    )?;
    let control = match spec.control {
        Some(c) => c,
        None => fock::default_control(&spec.params, n_max),
    };
    Ok((n_max, state, control))
}

fn check_tail(traj: &Trajectory<FockAmplitudes>, tol: f64) -> Result<(), RunError> {
    let tails = traj.real_channel("tail_mass").unwrap_or(&[]);
    if let Some((k, &tail)) = tails.iter().enumerate().find(|(_, &v)| !(v <= tol)) {
        return Err(cqed::Error::TruncationOverflow {
            t: traj.times()[k],
            tail,
            threshold: tol,
            n_max: traj.states()[k].n_max(),
        }
        .into());
    }
    Ok(())
}

fn fixed_times(spec: &RunSpec, control: &StepControl) -> Result<Vec<f64>, RunError> {
    match *control {
        StepControl::Fixed {
            dt,
            sample_interval,
        } => Ok(fixed_sample_times(0.0, spec.t_end, dt, sample_interval)?),
        StepControl::Adaptive { .. } => Err(ConfigError::Semantic {
            field: "time".into(),
            message: format!("model `{}` needs a fixed step", spec.model.name()),
        }
        .into()),
    }
}

/// Run the selected backend.
pub fn simulate(spec: &RunSpec) -> Result<Computed, RunError> {
    if let Initial::MeanField(state) = spec.initial {
        if spec.model != Model::Meanfield {
            return Err(fock_spec(spec).unwrap_err());
        }
        let config = MeanFieldConfig {
            control: spec.control,
            ..Default::default()
        };
        return Ok(Computed::MeanField(simulate_meanfield(
            &state,
            &spec.params,
            spec.t_end,
            &config,
        )?));
    }
    let (n_max, state, control) = prepare_fock(spec)?;
    let tr = &spec.truncation;
    let trajectory = match spec.model {
        Model::Fock | Model::Meanfield => {
            let config = FockConfig {
                control: Some(control),
                couplings: Couplings::Full,
                tail_levels: tr.tail_levels,
                tail_tol: Some(tr.tail_tol),
            };
            simulate_fock(&state, &spec.params, spec.t_end, &config)?
        }
        Model::Oracle => {
            let times = fixed_times(spec, &control)?;
            oracle_trajectory(&state, &spec.params, &times, tr.tail_levels)?
        }
        Model::Rwa => {
            let times = fixed_times(spec, &control)?;
            rwa_trajectory(&state, &spec.params, &times, tr.tail_levels)?
        }
    };
    check_tail(&trajectory, tr.tail_tol)?;
    Ok(Computed::Fock { trajectory, n_max })
}

fn max_abs(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, |m, v| if v.abs() > m || v.is_nan() { v.abs() } else { m })
}

fn deviation(times: &[f64], signal: &[f64]) -> (Option<f64>, Option<f64>) {
    match sinusoid_deviation(times, signal) {
        Ok(fit) => (Some(fit.score()), Some(fit.omega)),
        Err(_) => (None, None),
    }
}

pub fn summarize(computed: &Computed) -> Summary {
    let times = computed.times();
    let energy = computed.real("energy");
    let e0 = energy[0];
    let scale = if e0.abs() > 0.0 { e0.abs() } else { 1.0 };
    let energy_drift_rel = max_abs(energy.iter().map(|e| e - e0)) / scale;
    match computed {
        Computed::MeanField(_) => {
            let (deviation_score, dominant_omega) =
                deviation(times, computed.real("alpha_re"));
            Summary {
                norm_defect_max: max_abs(computed.real("constraint_defect").iter().copied()),
                energy_drift_rel,
                deviation_score,
                dominant_omega,
                tail_mass_max: None,
                n_max_used: None,
                wall_seconds: None,
            }
        }
        Computed::Fock { n_max, .. } => {
            let (deviation_score, dominant_omega) =
                deviation(times, computed.real("p_excited"));
            Summary {
                norm_defect_max: max_abs(computed.real("norm_sq").iter().map(|n| n - 1.0)),
                energy_drift_rel,
                deviation_score,
                dominant_omega,
                tail_mass_max: Some(max_abs(computed.real("tail_mass").iter().copied())),
                n_max_used: Some(*n_max),
                wall_seconds: None,
            }
        }
    }
}

/// A named file and its full contents.
pub type Artifact = (String, String);

fn to_json_line<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    text
}

fn plot_channel(
    title: &str,
    name: &str,
    times: &[f64],
    series: &Series,
) -> Result<String, PlotError> {
    let lines = match series {
        Series::Real(v) => vec![PlotSeries::new(name, times.to_vec(), v.clone())],
        Series::Complex(v) => vec![
            PlotSeries::new(format!("Re {name}"), times.to_vec(), v.iter().map(|z| z.re).collect()),
            PlotSeries::new(format!("Im {name}"), times.to_vec(), v.iter().map(|z| z.im).collect()),
        ],
    };
    render_svg_plot(&lines, "t", name, title)
}

/// Every file a run produces, in a fixed order.
pub fn artifacts(
    spec: &RunSpec,
    computed: &Computed,
    summary: &Summary,
) -> Result<Vec<Artifact>, RunError> {
    let mut files = vec![("resolved_config.json".to_string(), resolved_json(spec))];
    let (csv, json) = match computed {
        Computed::MeanField(t) => (
            spec.output.csv.then(|| write_csv(t, &spec.channels)).transpose()?,
            spec.output.json.then(|| trajectory_json(t, &spec.channels)).transpose()?,
        ),
        Computed::Fock { trajectory: t, .. } => (
            spec.output.csv.then(|| write_csv(t, &spec.channels)).transpose()?,
            spec.output.json.then(|| trajectory_json(t, &spec.channels)).transpose()?,
        ),
    };
    if let Some(text) = csv {
        files.push(("trajectory.csv".into(), text));
    }
    if let Some(text) = json {
        files.push(("trajectory.json".into(), text));
    }
    if spec.output.svg {
        for name in &spec.channels {
            let series = computed
                .channel(name)
                .ok_or_else(|| OutputError::MissingChannel(name.clone()))?;
            let title = format!("{}: {name}", spec.model.name());
            files.push((
                format!("{name}.svg"),
                plot_channel(&title, name, computed.times(), series)?,
            ));
        }
    }
    files.push(("summary.json".into(), to_json_line(summary)));
    Ok(files)
}

pub fn write_artifacts(dir: &Path, files: &[Artifact]) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|source| RunError::Io { path, source })?;
    }
    Ok(())
}

/// Simulate, summarize and write all artifacts to `spec.output.dir`.
pub fn run(spec: &RunSpec) -> Result<Summary, RunError> {
    let start = Instant::now();
    let computed = simulate(spec)?;
    let mut summary = summarize(&computed);
    if spec.output.timing {
        summary.wall_seconds = Some(start.elapsed().as_secs_f64());
    }
    let files = artifacts(spec, &computed, &summary)?;
    write_artifacts(&spec.output.dir, &files)?;
    Ok(summary)
}

/// Cross-differences between the three Fock-space backends, sampled at the
/// integrator's output times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    pub amplitude_fock_oracle: f64,
    pub amplitude_fock_rwa: f64,
    pub amplitude_oracle_rwa: f64,
    pub p_excited_fock_oracle: f64,
    pub p_excited_fock_rwa: f64,
    pub p_excited_oracle_rwa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub n_max_used: usize,
    pub samples: usize,
    pub deltas: Deltas,
    pub fock: Summary,
    pub oracle: Summary,
    pub rwa: Summary,
}

pub struct Comparison {
    pub report: CompareReport,
    pub fock: Trajectory<FockAmplitudes>,
    pub oracle: Trajectory<FockAmplitudes>,
    pub rwa: Trajectory<FockAmplitudes>,
}

fn sup_amplitude(a: &Trajectory<FockAmplitudes>, b: &Trajectory<FockAmplitudes>) -> f64 {
    max_abs(
        a.states()
            .iter()
            .zip(b.states())
            .map(|(x, y)| x.max_abs_diff(y).expect("same cutoff")),
    )
}

fn sup_p(a: &Trajectory<FockAmplitudes>, b: &Trajectory<FockAmplitudes>) -> f64 {
    let pa = a.real_channel("p_excited").expect("p_excited");
    let pb = b.real_channel("p_excited").expect("p_excited");
    max_abs(pa.iter().zip(pb).map(|(x, y)| x - y))
}

/// Integrate, propagate exactly and evaluate the rotating-wave solution on
/// one spec.
pub fn compare(spec: &RunSpec) -> Result<Comparison, RunError> {
    if spec.model == Model::Meanfield {
        return Err(ConfigError::Semantic {
            field: "model".into(),
            message: "compare needs a Fock-space model".into(),
        }
        .into());
    }
    let (n_max, state, control) = prepare_fock(spec)?;
    let tr = &spec.truncation;
    let config = FockConfig {
        control: Some(control),
        couplings: Couplings::Full,
        tail_levels: tr.tail_levels,
        tail_tol: Some(tr.tail_tol),
    };
    let fock = simulate_fock(&state, &spec.params, spec.t_end, &config)?;
    let oracle = oracle_trajectory(&state, &spec.params, fock.times(), tr.tail_levels)?;
    check_tail(&oracle, tr.tail_tol)?;
    let rwa = rwa_trajectory(&state, &spec.params, fock.times(), tr.tail_levels)?;

    let summary = |t: &Trajectory<FockAmplitudes>| {
        summarize(&Computed::Fock {
            trajectory: t.clone(),
            n_max,
        })
    };
    let report = CompareReport {
        n_max_used: n_max,
        samples: fock.len(),
        deltas: Deltas {
            amplitude_fock_oracle: sup_amplitude(&fock, &oracle),
            amplitude_fock_rwa: sup_amplitude(&fock, &rwa),
            amplitude_oracle_rwa: sup_amplitude(&oracle, &rwa),
            p_excited_fock_oracle: sup_p(&fock, &oracle),
            p_excited_fock_rwa: sup_p(&fock, &rwa),
            p_excited_oracle_rwa: sup_p(&oracle, &rwa),
        },
        fock: summary(&fock),
        oracle: summary(&oracle),
        rwa: summary(&rwa),
    };
    Ok(Comparison {
        report,
        fock,
        oracle,
        rwa,
    })
}

pub fn compare_artifacts(spec: &RunSpec, cmp: &Comparison) -> Result<Vec<Artifact>, RunError> {
    let mut merged: Trajectory<()> =
        Trajectory::from_samples(cmp.fock.times().to_vec(), vec![(); cmp.fock.len()])?;
    let names = ["p_excited_fock", "p_excited_oracle", "p_excited_rwa"];
    for (name, t) in names.iter().zip([&cmp.fock, &cmp.oracle, &cmp.rwa]) {
        let p = t.real_channel("p_excited").expect("p_excited").to_vec();
        merged.add_channel(*name, Series::Real(p))?;
    }
    let channels: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let mut files = vec![
        ("resolved_config.json".to_string(), resolved_json(spec)),
        ("compare.csv".to_string(), write_csv(&merged, &channels)?),
    ];
    if spec.output.svg {
        let lines: Vec<PlotSeries> = ["fock", "oracle", "rwa"]
            .iter()
            .zip(&names)
            .map(|(label, name)| {
                PlotSeries::new(
                    *label,
                    merged.times().to_vec(),
                    merged.real_channel(name).expect("merged").to_vec(),
                )
            })
            .collect();
        files.push((
            "compare_p_excited.svg".into(),
            render_svg_plot(&lines, "t", "P_e", "excited-state probability")?,
        ));
    }
    files.push(("compare.json".into(), to_json_line(&cmp.report)));
    Ok(files)
}

pub fn run_compare(spec: &RunSpec) -> Result<CompareReport, RunError> {
    let cmp = compare(spec)?;
    let files = compare_artifacts(spec, &cmp)?;
    write_artifacts(&spec.output.dir, &files)?;
    Ok(cmp.report)
}
