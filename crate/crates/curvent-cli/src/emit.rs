//! CSV emitters for the curves the reports only summarize, plus the
//! one file-writing helper everything shares.

use std::fs;
use std::path::Path;

use curvent::{CanonicalRatio, CoupledPaths, EntropyCurve};

use crate::CliError;

pub fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    }
    fs::write(path, content).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn distance_csv(paths: &CoupledPaths) -> String {
    let mut out = String::from("t,distance\n");
    for (t, d) in paths.times.iter().zip(&paths.distances) {
        out.push_str(&format!("{t},{d}\n"));
    }
    out
}

pub fn entropy_csv(curve: &EntropyCurve) -> String {
    let mut out = String::from("t,entropy,envelope\n");
    for ((t, e), env) in curve.times.iter().zip(&curve.entropy).zip(&curve.envelope) {
        out.push_str(&format!("{t},{e},{env}\n"));
    }
    out
}

pub fn sphere_csv(sweep: &[CanonicalRatio]) -> String {
    let mut out = String::from("i,j,coverage,ratio\n");
    for row in sweep {
        out.push_str(&format!("{},{},{},{}\n", row.i, row.j, row.coverage, row.ratio));
    }
    out
}
