//! Parameter sweeps over ω₀, ω_λ and |g|.
//!
//! Grid points are independent runs of a template config. They may execute
//! concurrently, but rows are always emitted in grid order (ω₀ outermost,
//! |g| innermost) and each point is computed deterministically, so the table
//! does not depend on the worker count.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{json_error, resolve, ConfigError, ConfigFile};
use crate::output::format_float;
use crate::run::{simulate, summarize, write_artifacts, Artifact, RunError, Summary};
use cqed::C64;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_lambda: Option<Vec<f64>>,
    /// Coupling magnitudes; the template's phase of g is kept.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub template: ConfigFile,
    #[serde(default)]
    pub grid: GridSection,
}

pub fn parse_sweep(text: &str) -> Result<SweepFile, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        json_error(&path, err.into_inner())
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub omega0: f64,
    pub omega_lambda: f64,
    pub g_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub omega0: f64,
    pub omega_lambda: f64,
    pub g_abs: f64,
    /// `None` when the point failed; see `error`.
    pub summary: Option<Summary>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn failed(&self) -> bool {
        self.summary.is_none()
    }
}

/// Points in emission order.
pub fn grid_points(sweep: &SweepFile) -> Result<Vec<GridPoint>, ConfigError> {
    let p = &sweep.template.params;
    let g0 = C64::new(p.g_re, p.g_im).norm();
    let axis = |name: &str, values: &Option<Vec<f64>>, default: f64| match values {
        None => Ok(vec![default]),
        Some(v) if v.is_empty() => Err(ConfigError::Semantic {
            field: format!("grid.{name}"),
            message: "axis must have at least one value".into(),
        }),
        Some(v) => match v.iter().position(|x| !x.is_finite()) {
            Some(k) => Err(ConfigError::Semantic {
                field: format!("grid.{name}[{k}]"),
                message: "must be finite".into(),
            }),
            None => Ok(v.clone()),
        },
    };
    let w0 = axis("omega0", &sweep.grid.omega0, p.omega0)?;
    let wl = axis("omega_lambda", &sweep.grid.omega_lambda, p.omega_lambda)?;
    let g = axis("g", &sweep.grid.g, g0)?;
    if sweep.template.model.is_none() {
        return Err(ConfigError::Semantic {
            field: "template.model".into(),
            message: "missing".into(),
        });
    }
    let mut points = Vec::with_capacity(w0.len() * wl.len() * g.len());
    for &omega0 in &w0 {
        for &omega_lambda in &wl {
            for &g_abs in &g {
                points.push(GridPoint {
                    omega0,
                    omega_lambda,
                    g_abs,
                });
            }
        }
    }
    Ok(points)
}

/// Template with the point's parameters substituted.
pub fn point_config(template: &ConfigFile, point: &GridPoint) -> ConfigFile {
    let mut file = template.clone();
    let g = C64::new(file.params.g_re, file.params.g_im);
    let phase = if g.norm() > 0.0 { g / g.norm() } else { C64::new(1.0, 0.0) };
    let g_new = phase * point.g_abs;
    file.params.omega0 = point.omega0;
    file.params.omega_lambda = point.omega_lambda;
    file.params.g_re = g_new.re;
    file.params.g_im = g_new.im;
    file
}

fn evaluate(template: &ConfigFile, index: usize, point: &GridPoint) -> SweepRow {
    let outcome = resolve(point_config(template, point), None)
        .map_err(RunError::from)
        .and_then(|spec| simulate(&spec))
        .map(|computed| summarize(&computed));
    let (summary, error) = match outcome {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e.to_string())),
    };
    SweepRow {
        index,
        omega0: point.omega0,
        omega_lambda: point.omega_lambda,
        g_abs: point.g_abs,
        summary,
        error,
    }
}

/// Evaluate every grid point with at most `jobs` workers (0: one per core).
pub fn sweep(file: &SweepFile, jobs: usize) -> Result<Vec<SweepRow>, RunError> {
    let points = grid_points(file)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| RunError::Io {
            path: PathBuf::from("<thread pool>"),
            source: std::io::Error::other(e),
        })?;
    Ok(pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(k, p)| evaluate(&file.template, k, p))
            .collect()
    }))
}

fn cell(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

/// One row per grid point, failures flagged in `status` and `error`.
pub fn sweep_csv(rows: &[SweepRow]) -> Result<String, RunError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record([
        "index",
        "omega0",
        "omega_lambda",
        "g_abs",
        "status",
        "norm_defect_max",
        "energy_drift_rel",
        "deviation_score",
        "dominant_omega",
        "tail_mass_max",
        "n_max_used",
        "error",
    ])
    .map_err(crate::output::OutputError::from)?;
    for r in rows {
        let s = r.summary.as_ref();
        w.write_record([
            r.index.to_string(),
            format_float(r.omega0),
            format_float(r.omega_lambda),
            format_float(r.g_abs),
            if r.failed() { "failed" } else { "ok" }.to_string(),
            cell(s.map(|s| s.norm_defect_max)),
            cell(s.map(|s| s.energy_drift_rel)),
            cell(s.and_then(|s| s.deviation_score)),
            cell(s.and_then(|s| s.dominant_omega)),
            cell(s.and_then(|s| s.tail_mass_max)),
            s.and_then(|s| s.n_max_used).map(|n| n.to_string()).unwrap_or_default(),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(crate::output::OutputError::from)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| crate::output::OutputError::from(csv::Error::from(e.into_error())))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn sweep_artifacts(rows: &[SweepRow]) -> Result<Vec<Artifact>, RunError> {
    let mut json = serde_json::to_string_pretty(rows).expect("rows serialize");
    json.push('\n');
    Ok(vec![
        ("sweep.csv".into(), sweep_csv(rows)?),
        ("sweep.json".into(), json),
    ])
}

/// Run the sweep and write `sweep.csv` and `sweep.json` to `dir`.
pub fn run_sweep(file: &SweepFile, jobs: usize, dir: &std::path::Path) -> Result<Vec<SweepRow>, RunError> {
    let rows = sweep(file, jobs)?;
    write_artifacts(dir, &sweep_artifacts(&rows)?)?;
    Ok(rows)
}

/// Template printed by `sweep --seed-config`.
pub fn seed_sweep() -> String {
    let template = crate::config::parse_file(&crate::config::seed_config(crate::config::Model::Fock))
        .expect("seed config parses");
    let file = SweepFile {
        template: ConfigFile {
            time: crate::config::TimeSection {
                t_end: 50.0,
                sample_interval: Some(0.05),
                ..Default::default()
            },
            params: crate::config::ParamsSection {
                omega0: 10.0,
                omega_lambda: 10.0,
                g_re: 1.0,
                g_im: 0.0,
            },
            truncation: crate::config::TruncationSection {
                n_max: Some(crate::config::Cutoff::Fixed(40)),
                ..Default::default()
            },
            ..template
        },
        grid: GridSection {
            omega0: None,
            omega_lambda: None,
            g: Some(vec![0.01, 0.1, 1.0, 4.0]),
        },
    };
    let mut text = serde_json::to_string_pretty(&file).expect("sweep serializes");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(grid: &str) -> SweepFile {
        parse_sweep(&format!(
            r#"{{"template": {{"model": "rwa", "params": {{"omega0": 2, "omega_lambda": 2, "g_re": 0, "g_im": 0.5}},
                "time": {{"t_end": 2, "dt": 0.01}}, "truncation": {{"n_max": 5}}}}, "grid": {grid}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn grid_order_is_row_major() {
        let f = file(r#"{"omega0": [1, 2], "g": [0.1, 0.2, 0.3]}"#);
        let pts = grid_points(&f).unwrap();
        assert_eq!(pts.len(), 6);
        assert_eq!((pts[0].omega0, pts[0].g_abs), (1.0, 0.1));
        assert_eq!((pts[2].omega0, pts[2].g_abs), (1.0, 0.3));
        assert_eq!((pts[3].omega0, pts[3].g_abs), (2.0, 0.1));
        assert!(pts.iter().all(|p| p.omega_lambda == 2.0));
    }

    #[test]
    fn coupling_phase_is_kept() {
        let f = file(r#"{"g": [2]}"#);
        let pts = grid_points(&f).unwrap();
        let cfg = point_config(&f.template, &pts[0]);
        assert_eq!((cfg.params.g_re, cfg.params.g_im), (0.0, 2.0));
    }

    #[test]
    fn empty_axis_is_rejected() {
        let f = file(r#"{"omega0": []}"#);
        assert!(matches!(grid_points(&f).unwrap_err(),
            ConfigError::Semantic { field, .. } if field == "grid.omega0"));
        let bad = parse_sweep(r#"{"template": {"model": "rwa", "params": {"omega0": 1, "omega_lambda": 1, "g_re": 1}, "time": {"t_end": 1}}, "grid": {"gg": [1]}}"#);
        assert!(matches!(bad.unwrap_err(), ConfigError::Semantic { field, .. } if field == "grid.gg"));
    }

    #[test]
    fn failed_point_is_isolated() {
        let f = file(r#"{"omega0": [1, -1, 3]}"#);
        let rows = sweep(&f, 2).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(!rows[0].failed() && rows[1].failed() && !rows[2].failed());
        assert!(rows[1].error.as_ref().unwrap().contains("params.omega0"));
        let csv = sweep_csv(&rows).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().nth(2).unwrap().contains(",failed,"));
    }

    #[test]
    fn worker_count_does_not_change_rows() {
        let f = file(r#"{"omega0": [1, 2], "g": [0.1, 0.5, 1.0]}"#);
        assert_eq!(sweep(&f, 1).unwrap(), sweep(&f, 4).unwrap());
    }

    #[test]
    fn seed_sweep_parses() {
        let f = parse_sweep(&seed_sweep()).unwrap();
        assert_eq!(grid_points(&f).unwrap().len(), 4);
    }
}
