//! JSON run configuration.
//!
//! The file is parsed strictly (unknown keys are errors) into [`ConfigFile`],
//! which mirrors the on-disk schema with optional fields, and then resolved
//! into a [`RunSpec`] with every default filled in. [`resolved_json`] writes
//! a resolved spec back out in the same schema; parsing that output yields
//! the same spec.

use std::path::PathBuf;

use cqed::integrator::StepControl;
use cqed::model::DEFAULT_TAIL_THRESHOLD;
use cqed::{fock, meanfield, Atom, InitialSpec, MeanFieldState, ModelParams, C64};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid `{field}`: {message}")]
    Semantic { field: String, message: String },
}

fn semantic(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Semantic {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Meanfield,
    Fock,
    Oracle,
    Rwa,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Meanfield => "meanfield",
            Model::Fock => "fock",
            Model::Oracle => "oracle",
            Model::Rwa => "rwa",
        }
    }

    /// Channels the model can produce.
    pub fn channels(self) -> &'static [&'static str] {
        match self {
            Model::Meanfield => MEANFIELD_CHANNELS,
            _ => FOCK_CHANNELS,
        }
    }

    fn default_channels(self) -> &'static [&'static str] {
        match self {
            Model::Meanfield => &["alpha", "beta", "s", "constraint_defect", "energy"],
            _ => &["p_excited", "mean_photons", "norm_sq", "energy"],
        }
    }
}

pub const FOCK_CHANNELS: &[&str] = &[
    "p_excited",
    "mean_photons",
    "norm_sq",
    "energy",
    "field",
    "tail_mass",
];

pub const MEANFIELD_CHANNELS: &[&str] = &[
    "alpha",
    "alpha_abs",
    "alpha_re",
    "alpha_im",
    "beta",
    "beta_abs",
    "beta_phase",
    "s",
    "b_abs",
    "c_abs",
    "constraint_defect",
    "energy",
];

// ---- on-disk schema ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<Model>,
    pub params: ParamsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSection>,
    pub time: TimeSection,
    #[serde(default)]
    pub truncation: TruncationSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub omega0: f64,
    pub omega_lambda: f64,
    pub g_re: f64,
    #[serde(default)]
    pub g_im: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AtomName {
    Excited,
    Ground,
}

impl From<AtomName> for Atom {
    fn from(a: AtomName) -> Self {
        match a {
            AtomName::Excited => Atom::Excited,
            AtomName::Ground => Atom::Ground,
        }
    }
}

impl From<Atom> for AtomName {
    fn from(a: Atom) -> Self {
        match a {
            Atom::Excited => AtomName::Excited,
            Atom::Ground => AtomName::Ground,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSection {
    Basis {
        n: usize,
        atom: AtomName,
    },
    Coherent {
        alpha_re: f64,
        #[serde(default)]
        alpha_im: f64,
        atom: AtomName,
    },
    Meanfield {
        alpha_re: f64,
        alpha_im: f64,
        beta_re: f64,
        beta_im: f64,
        s: f64,
    },
    /// The documented mean-field seed for the configured coupling.
    DefaultSeed,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_interval: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum AutoTag {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
enum CutoffRepr {
    Fixed(usize),
    Auto(AutoTag),
}

/// Photon-number cutoff: an explicit `n_max` or `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "CutoffRepr", into = "CutoffRepr")]
pub enum Cutoff {
    Fixed(usize),
    Auto,
}

impl From<CutoffRepr> for Cutoff {
    fn from(r: CutoffRepr) -> Self {
        match r {
            CutoffRepr::Fixed(n) => Cutoff::Fixed(n),
            CutoffRepr::Auto(_) => Cutoff::Auto,
        }
    }
}

impl From<Cutoff> for CutoffRepr {
    fn from(c: Cutoff) -> Self {
        match c {
            Cutoff::Fixed(n) => CutoffRepr::Fixed(n),
            Cutoff::Auto => CutoffRepr::Auto(AutoTag::Auto),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<Cutoff>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_levels: Option<usize>,
    /// P_e tolerance of the cutoff search.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auto_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auto_ceiling: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<bool>,
}

// ---- resolved spec ----

pub const DEFAULT_AUTO_TOL: f64 = 1e-4;
pub const DEFAULT_AUTO_CEILING: usize = 512;
pub const DEFAULT_RTOL: f64 = 1e-9;
pub const DEFAULT_ATOL: f64 = 1e-12;
pub const DEFAULT_DT_MIN: f64 = 1e-12;
pub const DEFAULT_OUTPUT_DIR: &str = "out";

#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    Fock(InitialSpec),
    MeanField(MeanFieldState),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    pub cutoff: Cutoff,
    pub tail_tol: f64,
    pub tail_levels: usize,
    pub auto_tol: f64,
    pub auto_ceiling: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub csv: bool,
    pub json: bool,
    pub svg: bool,
    pub dir: PathBuf,
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub model: Model,
    pub params: ModelParams,
    pub initial: Initial,
    pub t_end: f64,
    /// `None` only for Fock-space runs with an automatic cutoff: the default
    /// step depends on the cutoff and is chosen once the search finishes.
    pub control: Option<StepControl>,
    pub truncation: Truncation,
    pub output: Output,
    pub channels: Vec<String>,
}

/// Parse and resolve a config whose `model` key is required.
pub fn parse_config(text: &str) -> Result<RunSpec, ConfigError> {
    resolve(parse_file(text)?, None)
}

/// Strict parse into the on-disk schema.
pub fn parse_file(text: &str) -> Result<ConfigFile, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let parsed: Result<ConfigFile, _> = serde_path_to_error::deserialize(de);
    let file = parsed.map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        json_error(&path, inner)
    })?;
    Ok(file)
}

pub(crate) fn json_error(path: &str, err: serde_json::Error) -> ConfigError {
    use serde_json::error::Category;
    match err.classify() {
        Category::Data => {
            let message = strip_position(&err.to_string());
            let field = match unknown_field_name(&message) {
                Some(name) if path == "." => name,
                Some(name) if !path.ends_with(&name) => format!("{path}.{name}"),
                _ => path.to_string(),
            };
            ConfigError::Semantic { field, message }
        }
        _ => ConfigError::Parse {
            line: err.line(),
            column: err.column(),
            message: strip_position(&err.to_string()),
        },
    }
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

fn unknown_field_name(message: &str) -> Option<String> {
    let rest = message.strip_prefix("unknown field `")?;
    Some(rest[..rest.find('`')?].to_string())
}

fn positive(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(semantic(field, format!("must be positive and finite, got {v}")))
    }
}

fn finite(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(semantic(field, format!("must be finite, got {v}")))
    }
}

/// Fill defaults and check consistency. `model` supplies the model when the
/// file has none; a file that names a different one is rejected.
pub fn resolve(file: ConfigFile, model: Option<Model>) -> Result<RunSpec, ConfigError> {
    let model = match (file.model, model) {
        (Some(a), Some(b)) if a != b => {
            return Err(semantic(
                "model",
                format!("config selects `{}` but `{}` was requested", a.name(), b.name()),
            ))
        }
        (Some(m), _) | (None, Some(m)) => m,
        (None, None) => return Err(semantic("model", "missing")),
    };

    let p = &file.params;
    let omega0 = positive("params.omega0", p.omega0)?;
    let omega_lambda = positive("params.omega_lambda", p.omega_lambda)?;
    let g = C64::new(finite("params.g_re", p.g_re)?, finite("params.g_im", p.g_im)?);
    let params =
        ModelParams::new(omega0, omega_lambda, g).map_err(|e| semantic("params", e.to_string()))?;

    let initial = resolve_initial(model, file.initial.as_ref(), &params)?;

    let tr = &file.truncation;
    let tail_tol = positive("truncation.tail_tol", tr.tail_tol.unwrap_or(DEFAULT_TAIL_THRESHOLD))?;
    let tail_levels = tr.tail_levels.unwrap_or(1);
    if tail_levels == 0 {
        return Err(semantic("truncation.tail_levels", "must be at least 1"));
    }
    let cutoff = match (&initial, tr.n_max) {
        (Initial::Fock(spec), None) => Cutoff::Fixed(spec.default_n_max()),
        (Initial::Fock(InitialSpec::Basis { n, .. }), Some(Cutoff::Fixed(n_max))) if *n > n_max => {
            return Err(semantic(
                "truncation.n_max",
                format!("{n_max} is below the occupied level {n}"),
            ))
        }
        (_, Some(c)) => c,
        (Initial::MeanField(_), None) => Cutoff::Auto,
    };
    let truncation = Truncation {
        cutoff,
        tail_tol,
        tail_levels,
        auto_tol: positive("truncation.auto_tol", tr.auto_tol.unwrap_or(DEFAULT_AUTO_TOL))?,
        auto_ceiling: tr.auto_ceiling.unwrap_or(DEFAULT_AUTO_CEILING),
    };

    let t_end = finite("time.t_end", file.time.t_end)?;
    if t_end < 0.0 {
        return Err(semantic("time.t_end", format!("must be non-negative, got {t_end}")));
    }
    let control = resolve_control(model, &file.time, &params, &initial, &truncation)?;

    let out = &file.output;
    let output = Output {
        csv: out.csv.unwrap_or(true),
        json: out.json.unwrap_or(false),
        svg: out.svg.unwrap_or(false),
        dir: PathBuf::from(out.dir.clone().unwrap_or_else(|| DEFAULT_OUTPUT_DIR.into())),
        timing: out.timing.unwrap_or(false),
    };

    let channels = match &file.channels {
        None => model.default_channels().iter().map(|s| s.to_string()).collect(),
        Some(list) => {
            if list.is_empty() {
                return Err(semantic("channels", "must name at least one channel"));
            }
            for (k, name) in list.iter().enumerate() {
                if !model.channels().contains(&name.as_str()) {
                    return Err(semantic(
                        &format!("channels[{k}]"),
                        format!("unknown channel `{name}` for model `{}`", model.name()),
                    ));
                }
                if list[..k].contains(name) {
                    return Err(semantic(&format!("channels[{k}]"), format!("duplicate `{name}`")));
                }
            }
            list.clone()
        }
    };

    Ok(RunSpec {
        model,
        params,
        initial,
        t_end,
        control,
        truncation,
        output,
        channels,
    })
}

fn resolve_initial(
    model: Model,
    section: Option<&InitialSection>,
    params: &ModelParams,
) -> Result<Initial, ConfigError> {
    let fock_spec = |s: &InitialSection| -> Result<Option<InitialSpec>, ConfigError> {
        Ok(match *s {
            InitialSection::Basis { n, atom } => Some(InitialSpec::Basis {
                n,
                atom: atom.into(),
            }),
            InitialSection::Coherent {
                alpha_re,
                alpha_im,
                atom,
            } => Some(InitialSpec::Coherent {
                alpha: C64::new(
                    finite("initial.alpha_re", alpha_re)?,
                    finite("initial.alpha_im", alpha_im)?,
                ),
                atom: atom.into(),
            }),
            _ => None,
        })
    };

    if model != Model::Meanfield {
        let default = InitialSection::Basis {
            n: 0,
            atom: AtomName::Excited,
        };
        return match fock_spec(section.unwrap_or(&default))? {
            Some(spec) => Ok(Initial::Fock(spec)),
            None => Err(semantic(
                "initial.kind",
                format!("model `{}` needs a basis or coherent initial state", model.name()),
            )),
        };
    }

    let state = match section {
        None | Some(InitialSection::DefaultSeed) => MeanFieldState::default_seed(params),
        Some(InitialSection::Meanfield {
            alpha_re,
            alpha_im,
            beta_re,
            beta_im,
            s,
        }) => MeanFieldState::new(
            C64::new(finite("initial.alpha_re", *alpha_re)?, finite("initial.alpha_im", *alpha_im)?),
            C64::new(finite("initial.beta_re", *beta_re)?, finite("initial.beta_im", *beta_im)?),
            finite("initial.s", *s)?,
        ),
        // product state with the atom in a level and the field at ⟨a⟩
        Some(other) => {
            let spec = fock_spec(other)?.expect("basis or coherent");
            let s = match spec.atom() {
                Atom::Excited => 1.0,
                Atom::Ground => -1.0,
            };
            MeanFieldState::new(spec.field_expectation(), C64::new(0.0, 0.0), s)
        }
    };
    let defect = state.constraint_defect();
    if !(defect <= meanfield::INITIAL_CONSTRAINT_TOL) {
        return Err(semantic(
            "initial",
            format!("s² + 4|β|² must equal 1 (off by {defect:e})"),
        ));
    }
    Ok(Initial::MeanField(state))
}

fn resolve_control(
    model: Model,
    time: &TimeSection,
    params: &ModelParams,
    initial: &Initial,
    truncation: &Truncation,
) -> Result<Option<StepControl>, ConfigError> {
    let sample_interval = time
        .sample_interval
        .map(|h| positive("time.sample_interval", h))
        .transpose()?;
    let adaptive_key = [
        ("time.rtol", time.rtol),
        ("time.atol", time.atol),
        ("time.dt_min", time.dt_min),
        ("time.dt_max", time.dt_max),
    ]
    .into_iter()
    .find(|(_, v)| v.is_some());

    if let Some((key, _)) = adaptive_key {
        if time.dt.is_some() {
            return Err(semantic("time.dt", format!("cannot be combined with `{key}`")));
        }
        if matches!(model, Model::Oracle | Model::Rwa) {
            return Err(semantic(
                key,
                format!("model `{}` is evaluated on a fixed time grid", model.name()),
            ));
        }
        let dt_max = time.dt_max.unwrap_or(if time.t_end > 0.0 { time.t_end / 100.0 } else { 1.0 });
        let control = StepControl::Adaptive {
            rtol: positive("time.rtol", time.rtol.unwrap_or(DEFAULT_RTOL))?,
            atol: positive("time.atol", time.atol.unwrap_or(DEFAULT_ATOL))?,
            dt_min: positive("time.dt_min", time.dt_min.unwrap_or(DEFAULT_DT_MIN))?,
            dt_max: positive("time.dt_max", dt_max)?,
            sample_interval,
        };
        control.validate().map_err(|e| semantic("time", e.to_string()))?;
        return Ok(Some(control));
    }

    let dt = match time.dt {
        Some(dt) => Some(positive("time.dt", dt)?),
        None => match (initial, truncation.cutoff) {
            (Initial::MeanField(state), _) => {
                Some(fixed_dt(meanfield::default_control(params, state)))
            }
            (Initial::Fock(_), Cutoff::Fixed(n_max)) => {
                Some(fixed_dt(fock::default_control(params, n_max)))
            }
            (Initial::Fock(_), Cutoff::Auto) => None,
        },
    };
    Ok(dt.map(|dt| StepControl::Fixed {
        dt,
        sample_interval,
    }))
}

fn fixed_dt(control: StepControl) -> f64 {
    match control {
        StepControl::Fixed { dt, .. } => dt,
        StepControl::Adaptive { dt_max, .. } => dt_max,
    }
}

impl RunSpec {
    /// Sample interval requested in the config, independent of the stepper.
    pub fn sample_interval(&self) -> Option<f64> {
        self.control.and_then(|c| c.sample_interval())
    }

    /// The spec written back in the on-disk schema with every default made
    /// explicit.
    pub fn to_file(&self) -> ConfigFile {
        let initial = match self.initial {
            Initial::Fock(InitialSpec::Basis { n, atom }) => InitialSection::Basis {
                n,
                atom: atom.into(),
            },
            Initial::Fock(InitialSpec::Coherent { alpha, atom }) => InitialSection::Coherent {
                alpha_re: alpha.re,
                alpha_im: alpha.im,
                atom: atom.into(),
            },
            Initial::MeanField(st) => InitialSection::Meanfield {
                alpha_re: st.alpha.re,
                alpha_im: st.alpha.im,
                beta_re: st.beta.re,
                beta_im: st.beta.im,
                s: st.s,
            },
        };
        let mut time = TimeSection {
            t_end: self.t_end,
            ..Default::default()
        };
        match self.control {
            Some(StepControl::Fixed {
                dt,
                sample_interval,
            }) => {
                time.dt = Some(dt);
                time.sample_interval = sample_interval;
            }
            Some(StepControl::Adaptive {
                rtol,
                atol,
                dt_min,
                dt_max,
                sample_interval,
            }) => {
                time.rtol = Some(rtol);
                time.atol = Some(atol);
                time.dt_min = Some(dt_min);
                time.dt_max = Some(dt_max);
                time.sample_interval = sample_interval;
            }
            None => {}
        }
        let tr = &self.truncation;
        let o = &self.output;
        ConfigFile {
            model: Some(self.model),
            params: ParamsSection {
                omega0: self.params.omega0(),
                omega_lambda: self.params.omega_lambda(),
                g_re: self.params.g().re,
                g_im: self.params.g().im,
            },
            initial: Some(initial),
            time,
            truncation: TruncationSection {
                n_max: Some(tr.cutoff),
                tail_tol: Some(tr.tail_tol),
                tail_levels: Some(tr.tail_levels),
                auto_tol: Some(tr.auto_tol),
                auto_ceiling: Some(tr.auto_ceiling),
            },
            output: OutputSection {
                csv: Some(o.csv),
                json: Some(o.json),
                svg: Some(o.svg),
                dir: Some(o.dir.to_string_lossy().into_owned()),
                timing: Some(o.timing),
            },
            channels: Some(self.channels.clone()),
        }
    }
}

/// Pretty JSON of the resolved spec, newline-terminated.
pub fn resolved_json(spec: &RunSpec) -> String {
    let mut text = serde_json::to_string_pretty(&spec.to_file()).expect("config serializes");
    text.push('\n');
    text
}

/// Template config for `model`, printed by `--seed-config`.
pub fn seed_config(model: Model) -> String {
    let (params, initial, t_end, channels) = match model {
        Model::Meanfield => (
            ParamsSection {
                omega0: 10.0,
                omega_lambda: 10.0,
                g_re: 0.1,
                g_im: 0.0,
            },
            InitialSection::DefaultSeed,
            50.0,
            vec!["alpha_re", "alpha_im", "beta_abs", "beta_phase", "s"],
        ),
        _ => (
            ParamsSection {
                omega0: 100.0,
                omega_lambda: 100.0,
                g_re: 1.0,
                g_im: 0.0,
            },
            InitialSection::Basis {
                n: 0,
                atom: AtomName::Excited,
            },
            3.0 * std::f64::consts::PI,
            vec!["p_excited", "mean_photons", "norm_sq", "energy"],
        ),
    };
    let file = ConfigFile {
        model: Some(model),
        params,
        initial: Some(initial),
        time: TimeSection {
            t_end,
            sample_interval: Some(0.01),
            ..Default::default()
        },
        truncation: TruncationSection {
            n_max: (model != Model::Meanfield).then_some(Cutoff::Fixed(20)),
            ..Default::default()
        },
        output: OutputSection {
            csv: Some(true),
            json: Some(false),
            svg: Some(true),
            dir: Some(DEFAULT_OUTPUT_DIR.into()),
            timing: Some(false),
        },
        channels: Some(channels.into_iter().map(String::from).collect()),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("config serializes");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG4: &str = r#"{
        "model": "fock",
        "params": {"omega0": 100, "omega_lambda": 100, "g_re": 1},
        "initial": {"kind": "basis", "n": 0, "atom": "excited"},
        "time": {"t_end": 9.42}
    }"#;

    #[test]
    fn minimal_fock_config() {
        let spec = parse_config(FIG4).unwrap();
        assert_eq!(spec.model, Model::Fock);
        assert_eq!(spec.params, ModelParams::real(100.0, 100.0, 1.0).unwrap());
        assert_eq!(
            spec.initial,
            Initial::Fock(InitialSpec::Basis {
                n: 0,
                atom: Atom::Excited
            })
        );
        assert_eq!(spec.truncation.cutoff, Cutoff::Fixed(20));
        assert_eq!(
            spec.control,
            Some(fock::default_control(&spec.params, 20))
        );
        assert!(spec.output.csv && !spec.output.json && !spec.output.svg);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = r#"{"model": "fock", "params": {"omega0": 1, "omega_lambda": 1, "g_re": 1, "gama": 2}, "time": {"t_end": 1}}"#;
        match parse_config(text).unwrap_err() {
            ConfigError::Semantic { field, message } => {
                assert_eq!(field, "params.gama");
                assert!(message.contains("gama"));
            }
            other => panic!("{other:?}"),
        }
        let top = r#"{"model": "fock", "gama": 1, "params": {"omega0": 1, "omega_lambda": 1, "g_re": 1}, "time": {"t_end": 1}}"#;
        assert!(matches!(parse_config(top).unwrap_err(),
            ConfigError::Semantic { field, .. } if field == "gama"));
    }

    #[test]
    fn empty_input_is_parse_error() {
        assert!(matches!(
            parse_config("").unwrap_err(),
            ConfigError::Parse { line: 1, .. }
        ));
    }

    #[test]
    fn syntax_error_reports_position() {
        let text = "{\n  \"model\": \"fock\",\n  \"params\": {\"omega0\": 1,,}\n}";
        match parse_config(text).unwrap_err() {
            ConfigError::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert!(column > 10);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_errors_name_fields() {
        let cases = [
            (r#""params": {"omega0": -1, "omega_lambda": 1, "g_re": 1}"#, "params.omega0"),
            (r#""params": {"omega0": 1, "omega_lambda": 0, "g_re": 1}"#, "params.omega_lambda"),
        ];
        for (params, field) in cases {
            let text = format!(r#"{{"model": "fock", {params}, "time": {{"t_end": 1}}}}"#);
            assert!(matches!(parse_config(&text).unwrap_err(),
                ConfigError::Semantic { field: f, .. } if f == field));
        }
        let bad_dt = r#"{"model": "fock", "params": {"omega0": 1, "omega_lambda": 1, "g_re": 1}, "time": {"t_end": 1, "dt": 0.1, "rtol": 1e-6}}"#;
        assert!(matches!(parse_config(bad_dt).unwrap_err(),
            ConfigError::Semantic { field, .. } if field == "time.dt"));
        let bad_channel = r#"{"model": "fock", "params": {"omega0": 1, "omega_lambda": 1, "g_re": 1}, "time": {"t_end": 1}, "channels": ["p_excited", "beta"]}"#;
        assert!(matches!(parse_config(bad_channel).unwrap_err(),
            ConfigError::Semantic { field, .. } if field == "channels[1]"));
        let bad_kind = r#"{"model": "oracle", "params": {"omega0": 1, "omega_lambda": 1, "g_re": 1}, "initial": {"kind": "default_seed"}, "time": {"t_end": 1}}"#;
        assert!(matches!(parse_config(bad_kind).unwrap_err(),
            ConfigError::Semantic { field, .. } if field == "initial.kind"));
        let off_manifold = r#"{"model": "meanfield", "params": {"omega0": 1, "omega_lambda": 1, "g_re": 1}, "initial": {"kind": "meanfield", "alpha_re": 0, "alpha_im": 0, "beta_re": 0.5, "beta_im": 0, "s": 0.5}, "time": {"t_end": 1}}"#;
        assert!(matches!(parse_config(off_manifold).unwrap_err(),
            ConfigError::Semantic { field, .. } if field == "initial"));
    }

    #[test]
    fn model_must_match_subcommand() {
        let file = parse_file(FIG4).unwrap();
        assert!(resolve(file.clone(), Some(Model::Oracle)).is_err());
        assert!(resolve(file, Some(Model::Fock)).is_ok());
        let no_model = r#"{"params": {"omega0": 1, "omega_lambda": 1, "g_re": 1}, "time": {"t_end": 1}}"#;
        assert!(parse_config(no_model).is_err());
        let spec = resolve(parse_file(no_model).unwrap(), Some(Model::Rwa)).unwrap();
        assert_eq!(spec.model, Model::Rwa);
    }

    #[test]
    fn resolved_echo_round_trips() {
        let texts = [
            FIG4.to_string(),
            r#"{"model": "meanfield", "params": {"omega0": 10, "omega_lambda": 8, "g_re": 0.1, "g_im": 0.05}, "time": {"t_end": 50, "sample_interval": 0.05}}"#.into(),
            r#"{"model": "fock", "params": {"omega0": 1.25, "omega_lambda": 1.25, "g_re": 1}, "initial": {"kind": "coherent", "alpha_re": 3, "atom": "excited"}, "time": {"t_end": 5, "rtol": 1e-8}, "truncation": {"n_max": "auto"}}"#.into(),
            r#"{"model": "rwa", "params": {"omega0": 2, "omega_lambda": 2, "g_re": 0.3}, "time": {"t_end": 1, "dt": 0.001}, "truncation": {"n_max": 7}, "output": {"json": true, "dir": "x/y"}, "channels": ["field"]}"#.into(),
        ];
        for text in texts {
            let spec = parse_config(&text).unwrap();
            let echo = resolved_json(&spec);
            assert_eq!(parse_config(&echo).unwrap(), spec, "{echo}");
            assert_eq!(resolved_json(&parse_config(&echo).unwrap()), echo);
        }
    }

    #[test]
    fn auto_cutoff_leaves_step_open() {
        let text = r#"{"model": "fock", "params": {"omega0": 1, "omega_lambda": 1, "g_re": 1}, "time": {"t_end": 1}, "truncation": {"n_max": "auto"}}"#;
        let spec = parse_config(text).unwrap();
        assert_eq!(spec.truncation.cutoff, Cutoff::Auto);
        assert_eq!(spec.control, None);
        let bad = text.replace("\"auto\"", "\"automatic\"");
        assert!(matches!(parse_config(&bad).unwrap_err(),
            ConfigError::Semantic { field, .. } if field == "truncation.n_max"));
    }

    #[test]
    fn meanfield_defaults_to_documented_seed() {
        let text = r#"{"model": "meanfield", "params": {"omega0": 10, "omega_lambda": 10, "g_re": 4}, "time": {"t_end": 50}}"#;
        let spec = parse_config(text).unwrap();
        assert_eq!(
            spec.initial,
            Initial::MeanField(MeanFieldState::default_seed(&spec.params))
        );
        let coherent = r#"{"model": "meanfield", "params": {"omega0": 10, "omega_lambda": 10, "g_re": 4}, "initial": {"kind": "coherent", "alpha_re": 2, "alpha_im": 1, "atom": "ground"}, "time": {"t_end": 50}}"#;
        let spec = parse_config(coherent).unwrap();
        assert_eq!(
            spec.initial,
            Initial::MeanField(MeanFieldState::new(C64::new(2.0, 1.0), C64::new(0.0, 0.0), -1.0))
        );
    }

    #[test]
    fn seed_configs_parse() {
        for model in [Model::Meanfield, Model::Fock, Model::Oracle, Model::Rwa] {
            let spec = parse_config(&seed_config(model)).unwrap();
            assert_eq!(spec.model, model);
        }
    }
}
