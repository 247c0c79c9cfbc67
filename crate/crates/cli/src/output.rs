//! Trajectory serialization.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so every
//! value parses back to the identical `f64`.

use cqed::{Series, Trajectory};
use serde_json::{json, Map, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("channel `{0}` is not present in the trajectory")]
    MissingChannel(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Shortest decimal that parses back to `x`.
pub fn format_float(x: f64) -> String {
    format!("{x:?}")
}

fn lookup<'a, S>(traj: &'a Trajectory<S>, name: &str) -> Result<&'a Series, OutputError> {
    traj.channel(name)
        .ok_or_else(|| OutputError::MissingChannel(name.to_string()))
}

/// CSV with a `t` column followed by the requested channels. Complex
/// channels become `<name>_re`, `<name>_im`. Lines end in LF.
pub fn write_csv<S>(traj: &Trajectory<S>, channels: &[String]) -> Result<String, OutputError> {
    let series = channels
        .iter()
        .map(|c| lookup(traj, c))
        .collect::<Result<Vec<_>, _>>()?;

    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    for (name, s) in channels.iter().zip(&series) {
        match s {
            Series::Real(_) => header.push(name.clone()),
            Series::Complex(_) => {
                header.push(format!("{name}_re"));
                header.push(format!("{name}_im"));
            }
        }
    }
    w.write_record(&header)?;
    for (k, t) in traj.times().iter().enumerate() {
        let mut row = vec![format_float(*t)];
        for s in &series {
            match s {
                Series::Real(v) => row.push(format_float(v[k])),
                Series::Complex(v) => {
                    row.push(format_float(v[k].re));
                    row.push(format_float(v[k].im));
                }
            }
        }
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

/// Columnar JSON: `{"t": [...], "channels": {name: [...] | {"re": [...],
/// "im": [...]}}}`. Object keys are sorted.
pub fn trajectory_json<S>(traj: &Trajectory<S>, channels: &[String]) -> Result<String, OutputError> {
    let mut map = Map::new();
    for name in channels {
        let value = match lookup(traj, name)? {
            Series::Real(v) => json!(v),
            Series::Complex(v) => json!({
                "re": v.iter().map(|z| z.re).collect::<Vec<_>>(),
                "im": v.iter().map(|z| z.im).collect::<Vec<_>>(),
            }),
        };
        map.insert(name.clone(), value);
    }
    let doc = json!({ "t": traj.times(), "channels": Value::Object(map) });
    let mut text = serde_json::to_string(&doc).expect("finite floats serialize");
    text.push('\n');
    Ok(text)
}

#[cfg(test)]
mod tests {
    use cqed::C64;

    use super::*;

    fn sample(n: usize) -> Trajectory<()> {
        let times: Vec<f64> = (0..n).map(|k| 0.1 * k as f64).collect();
        let mut t = Trajectory::from_samples(times, vec![(); n]).unwrap();
        t.add_channel("p", Series::Real((0..n).map(|k| 1.0 / (k + 3) as f64).collect()))
            .unwrap();
        t.add_channel(
            "z",
            Series::Complex((0..n).map(|k| C64::new(k as f64, -1e-300)).collect()),
        )
        .unwrap();
        t
    }

    #[test]
    fn one_sample_gives_header_and_row() {
        let text = write_csv(&sample(1), &["p".into()]).unwrap();
        assert_eq!(text, "t,p\n0.0,0.3333333333333333\n");
    }

    #[test]
    fn complex_channels_split() {
        let text = write_csv(&sample(2), &["z".into(), "p".into()]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,z_re,z_im,p");
        assert_eq!(lines.next().unwrap(), "0.0,0.0,-1e-300,0.3333333333333333");
        assert!(!text.contains('\r'));
    }

    #[test]
    fn values_round_trip() {
        let traj = sample(7);
        let text = write_csv(&traj, &["p".into()]).unwrap();
        let parsed: Vec<f64> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        assert_eq!(parsed, traj.real_channel("p").unwrap());
    }

    #[test]
    fn missing_channel_is_named() {
        let err = write_csv(&sample(2), &["q".into()]).unwrap_err();
        assert!(err.to_string().contains("`q`"));
        assert!(trajectory_json(&sample(2), &["q".into()]).is_err());
    }

    #[test]
    fn json_layout() {
        let text = trajectory_json(&sample(2), &["p".into(), "z".into()]).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["t"][1], json!(0.1));
        assert_eq!(v["channels"]["z"]["re"][1], json!(1.0));
        assert_eq!(v["channels"]["p"][0], json!(1.0 / 3.0));
    }
}
