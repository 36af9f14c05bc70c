//! Comma-separated value exports, all with a header row and re-parseable
//! by the readers in this module. Floats use the shortest round-trip
//! representation so regression pinning is exact.

use crate::controller::ControlGains;
use crate::error::Error;
use crate::grid::Grid;
use crate::lyapunov::NormConstants;
use crate::simulator::{EventRecord, LogRow, TrajectoryLog};
use crate::table::Table2D;
use crate::Result;
use std::fmt::Write as _;
use std::path::Path;

/// Which half of a table carries data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableDomain {
    LowerTriangle,
    UpperTriangle,
    Square,
}

/// One row per grid node: `x, y, value`.
pub fn write_table_csv(path: &Path, table: &Table2D, domain: TableDomain, grid: &Grid) -> Result<()> {
    let mut s = String::from("x,y,value\n");
    let n = table.n();
    for i in 0..n {
        let (j0, j1) = match domain {
            TableDomain::LowerTriangle => (0, i),
            TableDomain::UpperTriangle => (i, n - 1),
            TableDomain::Square => (0, n - 1),
        };
        for j in j0..=j1 {
            let _ = writeln!(s, "{},{},{}", grid.x(i), grid.x(j), table.get(i, j));
        }
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// One row per node: `x, value`.
pub fn write_profile_csv(path: &Path, profile: &[f64], grid: &Grid) -> Result<()> {
    let mut s = String::from("x,value\n");
    for (i, v) in profile.iter().enumerate() {
        let _ = writeln!(s, "{},{}", grid.x(i), v);
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Vector-valued profile: `x, component, value`.
pub fn write_vector_profile_csv(
    path: &Path,
    profile: &[nalgebra::RowDVector<f64>],
    grid: &Grid,
) -> Result<()> {
    let mut s = String::from("x,component,value\n");
    for (i, row) in profile.iter().enumerate() {
        for c in 0..row.ncols() {
            let _ = writeln!(s, "{},{},{}", grid.x(i), c, row[c]);
        }
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Gain profiles in one file: `y, m1, m2, m3`; the ODE gain goes to a
/// companion `component, value` file.
pub fn write_gains_csv(dir: &Path, gains: &ControlGains, grid: &Grid) -> Result<()> {
    let mut s = String::from("y,m1,m2,m3\n");
    for i in 0..gains.m1.len() {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            grid.x(i),
            gains.m1[i],
            gains.m2[i],
            gains.m3[i]
        );
    }
    std::fs::write(dir.join("gains.csv"), s)?;
    let mut s4 = String::from("component,value\n");
    for c in 0..gains.m4.ncols() {
        let _ = writeln!(s4, "{},{}", c, gains.m4[c]);
    }
    std::fs::write(dir.join("gain_m4.csv"), s4)?;
    Ok(())
}

/// Norm constants and the overshoot coefficient: `name, value`.
pub fn write_norms_csv(path: &Path, nc: &NormConstants) -> Result<()> {
    let mut s = String::from("name,value\n");
    for (name, v) in [
        ("eta1", nc.eta1),
        ("eta2", nc.eta2),
        ("eta3", nc.eta3),
        ("eta4", nc.eta4),
        ("eta5", nc.eta5),
        ("eta6", nc.eta6),
        ("xi1", nc.xi1),
        ("xi2", nc.xi2),
        ("xi3", nc.xi3),
        ("xi4", nc.xi4),
        ("upsilon", nc.upsilon),
    ] {
        let _ = writeln!(s, "{name},{v}");
    }
    std::fs::write(path, s)?;
    Ok(())
}

fn trajectory_header(m: usize) -> String {
    let mut h = String::from("t,omega,v_lyap");
    for c in 0..m {
        let _ = write!(h, ",x{c}");
    }
    h.push_str(",z1,w0,v1,u,dhat,event_flag\n");
    h
}

/// Trajectory table: `t, Omega, V, X..., z1, w0, v1, U, Dhat, event_flag`.
pub fn write_trajectory_csv(path: &Path, log: &TrajectoryLog) -> Result<()> {
    let m = log.rows.first().map(|r| r.x.len()).unwrap_or(0);
    let mut s = trajectory_header(m);
    for r in &log.rows {
        let _ = write!(s, "{},{},{}", r.t, r.omega, r.v_lyap);
        for c in &r.x {
            let _ = write!(s, ",{c}");
        }
        let _ = writeln!(
            s,
            ",{},{},{},{},{},{}",
            r.z1,
            r.w0,
            r.v1,
            r.u,
            r.dhat,
            if r.event { 1 } else { 0 }
        );
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Companion events table with identifier diagnostics per event: the mode
/// actually used, its window integrals, the raw and clamped candidates,
/// and whether the candidate replaced the previous estimate or was
/// discarded by the acceptance margin.
pub fn write_events_csv(path: &Path, events: &[EventRecord]) -> Result<()> {
    let mut s = String::from(
        "t,dhat,upsilon_hat,mode_used,g_energy,h_cross,raw_candidate,clamped_candidate,accepted\n",
    );
    for e in events {
        let (mode, g, h, raw, clamped, acc) = match &e.outcome {
            Some(o) => {
                let used = o.used_mode.map(|n| n.to_string()).unwrap_or_default();
                let diag = o
                    .used_mode
                    .and_then(|n| o.per_mode.iter().find(|m| m.n == n));
                (
                    used,
                    diag.map(|d| d.g_energy.to_string()).unwrap_or_default(),
                    diag.map(|d| d.h_cross.to_string()).unwrap_or_default(),
                    o.raw_candidate.map(|r| r.to_string()).unwrap_or_default(),
                    o.clamped_candidate.map(|r| r.to_string()).unwrap_or_default(),
                    o.accepted.to_string(),
                )
            }
            None => Default::default(),
        };
        let _ = writeln!(
            s,
            "{},{},{},{mode},{g},{h},{raw},{clamped},{acc}",
            e.t, e.dhat, e.upsilon_hat
        );
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Read back a trajectory file written by [`write_trajectory_csv`].
pub fn read_trajectory_csv(path: &Path) -> Result<Vec<LogRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::config_top("empty trajectory file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    let m = cols.iter().filter(|c| c.starts_with('x')).count();
    let expect = 9 + m;
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != expect {
            return Err(Error::config(
                idx + 2,
                format!("expected {expect} columns, got {}", parts.len()),
            ));
        }
        let pf = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::config(idx + 2, format!("bad number `{s}`")))
        };
        rows.push(LogRow {
            t: pf(parts[0])?,
            omega: pf(parts[1])?,
            v_lyap: pf(parts[2])?,
            x: parts[3..3 + m].iter().map(|s| pf(s)).collect::<Result<_>>()?,
            z1: pf(parts[3 + m])?,
            w0: pf(parts[4 + m])?,
            v1: pf(parts[5 + m])?,
            u: pf(parts[6 + m])?,
            dhat: pf(parts[7 + m])?,
            event: parts[8 + m].trim() == "1",
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        let log = TrajectoryLog {
            rows: vec![
                LogRow {
                    t: 0.0,
                    omega: 65.310971,
                    v_lyap: 1.5e-3,
                    x: vec![1.13],
                    z1: 0.1,
                    w0: -8.0,
                    v1: 0.0,
                    u: 123.456789,
                    dhat: 0.25,
                    event: false,
                },
                LogRow {
                    t: 3.12,
                    omega: 1.0 / 3.0,
                    v_lyap: 2e6,
                    x: vec![-0.5],
                    z1: f64::MIN_POSITIVE,
                    w0: 0.0,
                    v1: -1.25e4,
                    u: 0.1 + 0.2,
                    dhat: 1.0,
                    event: true,
                },
            ],
            events: vec![],
            snapshots: vec![],
        };
        write_trajectory_csv(&path, &log).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,omega,v_lyap,x0,z1,w0,v1,u,dhat,event_flag"));
        let rows = read_trajectory_csv(&path).unwrap();
        assert_eq!(rows, log.rows);
    }

    #[test]
    fn table_csv_has_header_and_triangle_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.csv");
        let g = Grid::spatial_only(3);
        let mut t = Table2D::zeros(3);
        t.fill_lower(|i, j| (i + j) as f64);
        write_table_csv(&path, &t, TableDomain::LowerTriangle, &g).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,y,value");
        // 1 + 2 + 3 nodes in the lower triangle of a 3-grid.
        assert_eq!(lines.len(), 1 + 6);
    }
}
