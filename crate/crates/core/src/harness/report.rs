//! Plot-ready CSV and manifest emission.
//!
//! Files are plain text with `\n` line endings, a header row, and floats
//! rendered as full-precision scientific notation, so a rerun with the same
//! seed produces byte-identical bytes. No timestamps, no locale formatting.

use std::fmt::Write as _;
use std::path::Path;

use crate::dynamics::Trajectory;
use crate::error::Result;
use crate::model::sigmoid;
use crate::policy::KlRewardPoint;
use crate::train::TrainTrace;

/// Full-precision float form used in every CSV cell.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Trace rows as `epoch,empirical_loss,population_loss,r_0..r_{K-1}`.
/// `comment` lines (if any) are prefixed with `#` above the header.
pub fn trace_csv(trace: &TrainTrace, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    out.push_str("epoch,empirical_loss,population_loss");
    for a in 0..trace.num_arms {
        let _ = write!(out, ",r_{a}");
    }
    out.push('\n');
    for rec in &trace.records {
        let _ = write!(
            out,
            "{},{},{}",
            rec.epoch,
            fmt_float(rec.empirical_loss),
            fmt_float(rec.population_loss)
        );
        for v in &rec.rewards {
            let _ = write!(out, ",{}", fmt_float(*v));
        }
        out.push('\n');
    }
    out
}

/// Curve rows as `lambda,kl,true_reward,proxy_reward`.
pub fn curve_csv(points: &[KlRewardPoint], comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    out.push_str("lambda,kl,true_reward,proxy_reward\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_float(p.lambda),
            fmt_float(p.kl),
            fmt_float(p.true_reward),
            fmt_float(p.proxy_reward)
        );
    }
    out
}

/// Trajectory rows as `t,d,y,sigma_d`.
pub fn trajectory_csv(trajectory: &Trajectory, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    out.push_str("t,d,y,sigma_d\n");
    for s in trajectory.states() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_float(s.t),
            fmt_float(s.d),
            fmt_float(s.y),
            fmt_float(sigmoid(s.d))
        );
    }
    out
}

/// Flat `key=value` manifest, one entry per line, in the order given.
pub fn manifest_text(entries: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in entries {
        let _ = writeln!(out, "{k}={v}");
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::TraceRecord;

    #[test]
    fn float_format_is_stable_and_lossless() {
        let v = 0.1 + 0.2;
        let s = fmt_float(v);
        assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
        assert_eq!(fmt_float(f64::NAN), "NaN");
    }

    #[test]
    fn trace_csv_shape() {
        let trace = TrainTrace {
            num_arms: 3,
            records: vec![TraceRecord {
                epoch: 0,
                empirical_loss: 2.0f64.ln(),
                population_loss: f64::NAN,
                rewards: vec![0.0, 0.5, -0.5],
            }],
            converged_at: None,
            final_epoch: 0,
        };
        let csv = trace_csv(&trace, &["estimator=mle".to_string()]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("# estimator=mle"));
        assert_eq!(lines.next(), Some("epoch,empirical_loss,population_loss,r_0,r_1,r_2"));
        let row = lines.next().unwrap();
        assert!(row.starts_with("0,"));
        assert_eq!(row.split(',').count(), 6);
        assert!(row.contains("NaN"));
    }

    #[test]
    fn write_creates_parent_dirs() {
        let dir = std::env::temp_dir().join(format!("prefband_report_{}", std::process::id()));
        let path = dir.join("nested/deep/file.csv");
        write_text(&path, "a,b\n1,2\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "a,b\n1,2\n");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
