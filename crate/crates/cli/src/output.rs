//! CSV and JSON emission. Numbers use the shortest representation that
//! reads back to the same binary64 value.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use pebm_core::experiments::{ErrorSeries, IsoErrorGrid, IterationGrid, Trajectory};

use crate::CliError;

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Config(format!("{}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    pub fn write_json(&self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("output serializes");
        text.push('\n');
        self.write(name, &text)
    }
}

fn push_row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(',');
        }
        first = false;
        write!(out, "{v}").expect("writing to a String");
    }
    out.push('\n');
}

/// One row per completed step; the initial state is not repeated.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t");
    for i in 1..=3 {
        for j in 1..=3 {
            write!(out, ",F{i}{j}").unwrap();
        }
    }
    for (i, j) in UPPER {
        write!(out, ",sigma{}{}", i + 1, j + 1).unwrap();
    }
    out.push_str(",xi,det_Ci,s,s_d,newton_iters\n");
    for p in traj.points.iter().skip(1) {
        let mut row = vec![p.t];
        row.extend((0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|ij| p.f[ij]));
        row.extend(UPPER.iter().map(|&(i, j)| p.cauchy.get(i, j)));
        row.extend([p.xi, p.state.ci.det(), p.state.s, p.state.sd, p.newton_iterations as f64]);
        push_row(&mut out, row);
    }
    out
}

const UPPER: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

pub fn error_csv(series: &ErrorSeries) -> String {
    let mut out = String::from("t,error\n");
    for &(t, e) in &series.points {
        push_row(&mut out, [t, e]);
    }
    out
}

/// Grid with `F12` values across the top and `F11` values down the left.
pub fn grid_csv(f11: &[f64], f12: &[f64], value: impl Fn(usize, usize) -> f64) -> String {
    let mut out = String::from("F11\\F12");
    for v in f12 {
        write!(out, ",{v}").unwrap();
    }
    out.push('\n');
    for (i, a) in f11.iter().enumerate() {
        push_row(&mut out, std::iter::once(*a).chain((0..f12.len()).map(|j| value(i, j))));
    }
    out
}

pub fn isoerror_csv(g: &IsoErrorGrid) -> String {
    grid_csv(&g.f11, &g.f12, |i, j| g.errors[i][j])
}

pub fn iterations_csv(g: &IterationGrid) -> String {
    grid_csv(&g.f11, &g.f12, |i, j| {
        let c = &g.cells[i][j];
        if c.failed {
            f64::NAN
        } else {
            c.newton_iterations as f64
        }
    })
}

pub fn cost_csv(g: &IterationGrid) -> String {
    grid_csv(&g.f11, &g.f12, |i, j| {
        let c = &g.cells[i][j];
        if c.failed {
            f64::NAN
        } else {
            c.matrix_ops as f64
        }
    })
}

pub fn failure_log(failures: &[String]) -> String {
    failures.iter().map(|f| format!("{f}\n")).collect()
}
