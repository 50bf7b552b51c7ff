//! CSV and JSON artifacts, and re-checking of trajectory files on disk.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{DECIMATE_FROM_N0, DEFAULT_DECIMATION};
use crate::density::RTrajectory;
use crate::diagnostics::{check_convexity_sampled, ANALYTIC_TOLERANCE};
use crate::report::{Check, ExperimentReport};

pub const TRAJECTORY_SUFFIX: &str = ".trajectory.csv";
pub const CHECK_REPORT: &str = "check.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub n: u64,
    #[serde(rename = "R")]
    pub r: f64,
    pub remaining: u64,
    pub mean_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub replica: u64,
    pub n: u64,
    pub r_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub n: u64,
    pub mean_r: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRow {
    pub region: String,
    pub vaccines: u64,
    pub predicted_infections: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: u64,
    pub cost: u64,
}

/// Serializes rows (header from the first row's field names).
pub fn csv_bytes<T: Serialize>(rows: &[T]) -> csv::Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    writer.into_inner().map_err(|e| e.into_error().into())
}

/// CSV with an explicit header, for tables that may be empty.
pub fn csv_table<T: Serialize>(header: &[&str], rows: &[T]) -> csv::Result<Vec<u8>> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    writer.write_record(header)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.into_inner().map_err(|e| e.into_error().into())
}

/// Rows kept per `decimate` steps when not set explicitly.
pub fn default_decimation(n0: u64) -> u64 {
    if n0 >= DECIMATE_FROM_N0 {
        DEFAULT_DECIMATION
    } else {
        1
    }
}

/// Every `decimate`-th step, plus the crossing and the last step.
pub fn trajectory_rows(traj: &RTrajectory, decimate: u64) -> Vec<TrajectoryRow> {
    let decimate = decimate.max(1);
    let last = traj.len().saturating_sub(1) as u64;
    (0..traj.len())
        .filter(|&i| {
            let n = i as u64;
            n.is_multiple_of(decimate) || n == last || Some(n) == traj.hit_step
        })
        .map(|i| TrajectoryRow {
            n: i as u64,
            r: traj.values[i],
            remaining: traj.remaining[i],
            mean_s: traj.mean_s[i],
        })
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error("no `*{TRAJECTORY_SUFFIX}` files in {0}")]
    Missing(PathBuf),
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>, ArtifactError> {
    let csv_err = |source| ArtifactError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let rows = reader
        .deserialize()
        .collect::<Result<Vec<TrajectoryRow>, _>>()
        .map_err(csv_err)?;
    Ok(rows)
}

/// Trajectory files in `dir`, sorted by name.
pub fn trajectory_files(dir: &Path) -> Result<Vec<PathBuf>, ArtifactError> {
    let io = |source| ArtifactError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let is_trajectory = path
            .file_name()
            .and_then(|f| f.to_str())
            .is_some_and(|f| f.ends_with(TRAJECTORY_SUFFIX));
        if is_trajectory && path.is_file() {
            files.push(path);
        }
    }
    if files.is_empty() {
        return Err(ArtifactError::Missing(dir.to_path_buf()));
    }
    files.sort();
    Ok(files)
}

/// Convexity, monotone decay and the ratio bound on the rows of one file.
/// Rows may be decimated.
pub fn check_rows(rows: &[TrajectoryRow]) -> Result<Vec<Check>, String> {
    if rows.len() < 3 {
        return Err(format!("need at least 3 rows, got {}", rows.len()));
    }
    let steps: Vec<u64> = rows.iter().map(|r| r.n).collect();
    let values: Vec<f64> = rows.iter().map(|r| r.r).collect();
    let n0 = rows[0].n + rows[0].remaining;
    if let Some(row) = rows.iter().find(|r| r.n + r.remaining != n0) {
        return Err(format!("row n = {} has n + remaining != {n0}", row.n));
    }
    let convexity = check_convexity_sampled(&steps, &values).map_err(|e| e.to_string())?;

    let mut checks = vec![Check::upper(
        "convexity",
        convexity.max_violation,
        convexity.tolerance,
        Some(convexity.location),
    )];

    let (mut worst_rise, mut rise_at) = (f64::NEG_INFINITY, steps[0]);
    for w in rows.windows(2) {
        let rise = w[1].r - w[0].r;
        if rise > worst_rise {
            worst_rise = rise;
            rise_at = w[1].n;
        }
    }
    checks.push(Check::upper(
        "non_increasing",
        worst_rise,
        ANALYTIC_TOLERANCE,
        Some(rise_at),
    ));

    // R(n2) / R(n1) <= (N0 - n2) / (N0 - n1) for consecutive rows and for the
    // first positive step against the last.
    let mut pairs: Vec<(usize, usize)> = (0..rows.len() - 1).map(|i| (i, i + 1)).collect();
    pairs.push((0, rows.len() - 1));
    let (mut worst, mut worst_at) = (f64::NEG_INFINITY, steps[0]);
    for (i, j) in pairs {
        let (a, b) = (&rows[i], &rows[j]);
        if a.n == 0 || b.n >= n0 || !(a.r > 0.0) {
            continue;
        }
        let excess = b.r / a.r - (n0 - b.n) as f64 / (n0 - a.n) as f64;
        if excess > worst {
            worst = excess;
            worst_at = b.n;
        }
    }
    if worst.is_finite() {
        checks.push(Check::upper("ratio_bound", worst, ANALYTIC_TOLERANCE, Some(worst_at)));
    }
    Ok(checks)
}

/// Re-checks every trajectory file in `dir`.
pub fn check_dir(dir: &Path) -> Result<Vec<ExperimentReport>, ArtifactError> {
    let mut reports = Vec::new();
    for path in trajectory_files(dir)? {
        let rows = read_trajectory(&path)?;
        let checks = check_rows(&rows).map_err(|reason| ArtifactError::Malformed {
            path: path.clone(),
            reason,
        })?;
        let name = path.file_name().and_then(|f| f.to_str()).unwrap_or_default();
        reports.push(ExperimentReport::new(
            name.trim_end_matches(TRAJECTORY_SUFFIX),
            "trajectory_file",
            checks,
            vec![name.to_string()],
        ));
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(values: &[f64], n0: u64) -> Vec<TrajectoryRow> {
        values
            .iter()
            .enumerate()
            .map(|(n, &r)| TrajectoryRow {
                n: n as u64,
                r,
                remaining: n0 - n as u64,
                mean_s: 0.1,
            })
            .collect()
    }

    #[test]
    fn linear_rows_pass() {
        let values: Vec<f64> = (0..10).map(|n| 3.0 * (100 - n) as f64 / 100.0).collect();
        let checks = check_rows(&rows(&values, 100)).unwrap();
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");
    }

    #[test]
    fn corrupted_row_is_located() {
        let mut values: Vec<f64> = (0..10).map(|n| 3.0 * (100 - n) as f64 / 100.0).collect();
        values[6] -= 0.05;
        let checks = check_rows(&rows(&values, 100)).unwrap();
        let convexity = &checks[0];
        assert!(!convexity.passed);
        // The first window (n, n + 1, n + 2) containing the dent.
        assert_eq!(convexity.location, Some(4));
    }

    #[test]
    fn inconsistent_population_is_malformed() {
        let mut r = rows(&[3.0, 2.0, 1.5], 100);
        r[2].remaining = 7;
        assert!(check_rows(&r).is_err());
        assert!(check_rows(&r[..2]).is_err());
    }

    #[test]
    fn decimation_keeps_crossing_and_tail() {
        let traj = RTrajectory {
            n0: 20,
            values: (0..12).map(|n| 3.0 - 0.25 * n as f64).collect(),
            remaining: (0..12).map(|n| 20 - n).collect(),
            mean_s: vec![0.1; 12],
            hit_step: Some(9),
            hit_fraction: Some(0.45),
            first_differences: vec![0.25; 11],
        };
        let kept: Vec<u64> = trajectory_rows(&traj, 5).iter().map(|r| r.n).collect();
        assert_eq!(kept, vec![0, 5, 9, 10, 11]);
        assert_eq!(trajectory_rows(&traj, 1).len(), 12);
        assert_eq!(default_decimation(99_999), 1);
        assert_eq!(default_decimation(100_000), 1000);
    }

    #[test]
    fn csv_layout() {
        let bytes = csv_bytes(&[TrajectoryRow {
            n: 0,
            r: 3.0,
            remaining: 10,
            mean_s: 0.5,
        }])
        .unwrap();
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            "n,R,remaining,mean_s\n0,3.0,10,0.5\n"
        );
        let empty: Vec<SweepRow> = Vec::new();
        assert_eq!(csv_table(&["param", "cost"], &empty).unwrap(), b"param,cost\n");
    }
}
