//! Output directory with CSV curves and JSON summaries.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use treedet_core::evaluate::ExponentFit;
use treedet_core::rates::BoundReport;

use crate::error::{CliError, Result};

/// Where reports go. CSV files start with a `# generated <time>` line
/// unless timestamps are suppressed.
#[derive(Debug, Clone)]
pub struct OutputDir {
    root: PathBuf,
    timestamp: bool,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>, timestamp: bool) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
        Ok(OutputDir { root, timestamp })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let p = self.path(name);
        crate::formats::write_json(&p, value)?;
        Ok(p)
    }

    pub fn csv<I>(&self, name: &str, header: &[&str], rows: I) -> Result<PathBuf>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let p = self.path(name);
        let mut buf = Vec::new();
        if self.timestamp {
            writeln!(buf, "# generated {}", chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
                .expect("writing to memory");
        }
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(header)?;
            for r in rows {
                w.write_record(&r)?;
            }
            w.flush().map_err(|e| CliError::io(&p, e))?;
        }
        fs::write(&p, buf).map_err(|e| CliError::io(&p, e))?;
        Ok(p)
    }

    pub fn bound_report(&self, name: &str, report: &BoundReport) -> Result<PathBuf> {
        let rows = report.rows.iter().map(|r| {
            vec![
                r.node.to_string(),
                r.level.to_string(),
                r.leaves.to_string(),
                r.preds.to_string(),
                r.kind.as_str().to_string(),
                num(r.value),
            ]
        });
        self.csv(name, &["node_id", "level", "l", "p", "bound_type", "bound_value"], rows)
    }

    pub fn exponent_fit(&self, name: &str, fit: &ExponentFit) -> Result<PathBuf> {
        let rows = fit.points.iter().map(|p| {
            vec![
                p.n.to_string(),
                p.leaves.to_string(),
                num(p.alpha),
                num(p.type_i),
                num(p.type_ii),
                num(p.ln_type_ii / p.leaves as f64),
            ]
        });
        self.csv(name, &["n", "l_f", "alpha", "type_I", "type_II", "log_beta_over_lf"], rows)
    }
}

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// JSON summary of a fit against a target exponent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub target_exponent: f64,
    pub tolerance: f64,
    pub verdict: &'static str,
}

impl FitSummary {
    pub fn new(fit: &ExponentFit, target: f64, tolerance: f64) -> Self {
        let pass = (fit.fit.slope - target).abs() <= tolerance;
        FitSummary {
            slope: fit.fit.slope,
            intercept: fit.fit.intercept,
            r2: fit.fit.r2,
            target_exponent: target,
            tolerance,
            verdict: if pass { "pass" } else { "fail" },
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == "pass"
    }
}
