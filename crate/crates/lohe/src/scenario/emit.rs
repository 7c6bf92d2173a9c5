//! CSV and JSON emission. Frames go to CSV with a fixed column order and
//! full double precision; the run summary goes to pretty JSON.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::diagnostics::DiagnosticsFrame;
use crate::error::Result;

fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        // 17 significant digits round-trips any double
        format!("{x:.16e}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    fmt_f64(x.unwrap_or(f64::NAN))
}

/// Column order: t, D_U, D_V, S_U, S_V, L, F, E, V_lt, defect, then one
/// column per active monitor slack. Missing optional values print as NaN.
pub fn frames_to_csv(frames: &[DiagnosticsFrame], monitor_names: &[String]) -> String {
    let mut out = String::new();
    out.push_str("t,D_U,D_V,S_U,S_V,L,F,E,V_lt,defect");
    for name in monitor_names {
        let _ = write!(out, ",slack_{name}");
    }
    out.push('\n');
    for f in frames {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(f.t),
            fmt_f64(f.d_u),
            fmt_f64(f.d_v),
            fmt_f64(f.s_u),
            fmt_f64(f.s_v),
            fmt_f64(f.l),
            fmt_opt(f.f),
            fmt_f64(f.e),
            fmt_opt(f.v_lt),
            fmt_f64(f.defect),
        );
        for name in monitor_names {
            let _ = write!(out, ",{}", fmt_opt(f.monitor_slack.get(name).copied()));
        }
        out.push('\n');
    }
    out
}

pub fn write_frames_csv(
    path: &Path,
    frames: &[DiagnosticsFrame],
    monitor_names: &[String],
) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, frames_to_csv(frames, monitor_names))?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn csv_layout() {
        let frame = DiagnosticsFrame {
            t: 0.5,
            d_u: 1.0,
            d_v: 2.0,
            s_u: 3.0,
            s_v: 4.0,
            l: 10.0,
            f: None,
            e: 0.25,
            v_lt: Some(0.25),
            defect: 1e-14,
            monitor_slack: BTreeMap::from([("l-total".to_string(), 0.125)]),
        };
        let text = frames_to_csv(&[frame], &["l-total".to_string()]);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,D_U,D_V,S_U,S_V,L,F,E,V_lt,defect,slack_l-total");
        let row = lines.next().unwrap();
        assert!(row.contains("NaN"));
        assert!(row.starts_with("5.0000000000000000e-1,1.0000000000000000e0"));
        assert!(row.ends_with("1.2500000000000000e-1"));
    }
}
