//! CSV and manifest emission for scenario runs.
//!
//! All floats are written with Rust's shortest round-trip formatting
//! ('.' decimal separator), every file carries a header row, and rows are
//! newline-terminated, so identical runs produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hysteresis::{HysteresisLoop, PersistenceVerdict};
use crate::integrator::Trajectory;
use crate::scenario::config::ScenarioConfig;
use crate::spectral::SpectrumComparison;
use crate::verification::VerificationReport;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const LOOPS_FILE: &str = "loops.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SPECTRUM_FILE: &str = "spectrum.csv";
pub const VERIFY_FILE: &str = "verify.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

/// Long-format state samples: one row per node per recorded time.
#[derive(Debug, Clone)]
pub struct TrajectoryCsv {
    buf: String,
}

impl TrajectoryCsv {
    pub fn new() -> TrajectoryCsv {
        TrajectoryCsv { buf: String::from("t,node_index,x,m1,m2,m3\n") }
    }

    /// Append one trajectory's samples, shifting times by `t_offset`.
    /// `skip_first` drops the initial sample (used when chaining phases, so
    /// the seam state is not written twice).
    pub fn append(&mut self, traj: &Trajectory, t_offset: f64, skip_first: bool) {
        let mesh = traj.mesh();
        let start = usize::from(skip_first);
        for (i, &t) in traj.times().iter().enumerate().skip(start) {
            let t = t + t_offset;
            for (j, v) in traj.state_values(i).iter().enumerate() {
                writeln!(
                    self.buf,
                    "{t},{j},{},{},{},{}",
                    mesh.node(j),
                    v.x,
                    v.y,
                    v.z
                )
                .expect("writing to a String cannot fail");
            }
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, &self.buf)?;
        Ok(())
    }
}

impl Default for TrajectoryCsv {
    fn default() -> Self {
        TrajectoryCsv::new()
    }
}

/// Scalar diagnostics per recorded time.
#[derive(Debug, Clone)]
pub struct DiagnosticsCsv {
    buf: String,
}

impl DiagnosticsCsv {
    pub fn new() -> DiagnosticsCsv {
        DiagnosticsCsv { buf: String::from("t,l2_dist,h1_dist,lyapunov,norm_drift,energy\n") }
    }

    pub fn append(&mut self, traj: &Trajectory, t_offset: f64, skip_first: bool) {
        let start = usize::from(skip_first);
        for d in traj.diagnostics().iter().skip(start) {
            writeln!(
                self.buf,
                "{},{},{},{},{},{}",
                d.t + t_offset,
                d.l2_dist,
                d.h1_dist,
                d.lyapunov,
                d.norm_drift,
                d.energy
            )
            .expect("writing to a String cannot fail");
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, &self.buf)?;
        Ok(())
    }
}

impl Default for DiagnosticsCsv {
    fn default() -> Self {
        DiagnosticsCsv::new()
    }
}

/// Input-output samples of every loop in a sweep, in sweep order.
pub fn write_loops_csv(path: &Path, loops: &[HysteresisLoop]) -> Result<()> {
    let mut buf = String::from("omega,input,output,sample_index\n");
    for lp in loops {
        let omega = lp.omega();
        for (i, (input, output)) in lp.samples().iter().enumerate() {
            writeln!(buf, "{omega},{input},{output},{i}")
                .expect("writing to a String cannot fail");
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Area-vs-frequency table. The verdict column carries the sweep-level
/// persistence verdict on every row (empty when no verdict was computed,
/// e.g. a single-frequency sweep).
pub fn write_summary_csv(
    path: &Path,
    loops: &[HysteresisLoop],
    verdict: Option<&PersistenceVerdict>,
) -> Result<()> {
    let word = match verdict {
        Some(v) if v.persistent => "persistent",
        Some(_) => "not_persistent",
        None => "",
    };
    let mut buf = String::from("omega,area,verdict\n");
    for lp in loops {
        writeln!(buf, "{},{},{word}", lp.omega(), lp.area())
            .expect("writing to a String cannot fail");
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Analytic-vs-discrete eigenvalue table: the discrete zero cluster first,
/// then each analytic entry with its matched discrete value (empty cells
/// when unmatched), then unclaimed discrete values as `surplus` rows.
pub fn write_spectrum_csv(path: &Path, cmp: &SpectrumComparison) -> Result<()> {
    let mut buf =
        String::from("family,index,analytic_re,analytic_im,discrete_re,discrete_im,rel_error\n");
    for (i, z) in cmp.zero_cluster.iter().enumerate() {
        writeln!(buf, "zero,{i},0,0,{},{},", z.re, z.im)
            .expect("writing to a String cannot fail");
    }
    for m in &cmp.matches {
        let (dre, dim, rel) = match (m.discrete, m.relative_error) {
            (Some(d), Some(r)) => (d.re.to_string(), d.im.to_string(), r.to_string()),
            _ => (String::new(), String::new(), String::new()),
        };
        writeln!(
            buf,
            "{},{},{},{},{dre},{dim},{rel}",
            m.label, m.index, m.analytic.re, m.analytic.im
        )
        .expect("writing to a String cannot fail");
    }
    for (i, z) in cmp.surplus.iter().enumerate() {
        writeln!(buf, "surplus,{i},,,{},{},", z.re, z.im)
            .expect("writing to a String cannot fail");
    }
    fs::write(path, buf)?;
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Pass/fail table of the verification checks.
pub fn write_verify_csv(path: &Path, report: &VerificationReport) -> Result<()> {
    let mut buf = String::from("check,passed,trials,worst,bound,detail\n");
    for c in &report.checks {
        writeln!(
            buf,
            "{},{},{},{},{},{}",
            c.name,
            c.passed,
            c.trials,
            c.worst,
            c.bound,
            csv_field(&c.detail)
        )
        .expect("writing to a String cannot fail");
    }
    fs::write(path, buf)?;
    Ok(())
}

/// `[run]` section of a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub kind: String,
    pub toolkit_version: String,
    pub wall_time_seconds: f64,
    /// False when the run was truncated by a numerical failure.
    pub completed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blow_up: Option<String>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
}

/// Record of one run: what happened, plus the full resolved configuration,
/// so the manifest alone reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub run: RunSection,
    pub config: ScenarioConfig,
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let text = toml::to_string_pretty(manifest)
        .map_err(|e| Error::Config(format!("serializing manifest: {e}")))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
