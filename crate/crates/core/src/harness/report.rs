use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::study::ReferenceCheck;
use crate::error::{invalid, Result};
use crate::nonnewtonian::{NonlinearSolveTrace, StressModelSpec};

/// `log2(e[i] / e[i+1])` per consecutive pair; `None` marks a pair with a
/// zero, negative or non-finite error.
pub fn compute_eoc(errors: &[f64], hs: &[f64]) -> Result<Vec<Option<f64>>> {
    if errors.len() != hs.len() || errors.len() < 2 {
        return Err(invalid("compute_eoc needs equal-length error and h lists with at least two entries"));
    }
    for w in hs.windows(2) {
        if !((w[0] / w[1] - 2.0).abs() <= 1e-12) {
            return Err(invalid(format!("mesh sizes must halve exactly, got {} then {}", w[0], w[1])));
        }
    }
    Ok(errors
        .windows(2)
        .map(|w| {
            let ok = |e: f64| e > 0.0 && e.is_finite();
            if ok(w[0]) && ok(w[1]) {
                Some((w[0] / w[1]).log2())
            } else {
                None
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentStamp {
    pub package: String,
    pub version: String,
    pub os: String,
    pub arch: String,
    pub debug_assertions: bool,
}

impl Default for EnvironmentStamp {
    fn default() -> Self {
        Self {
            package: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            debug_assertions: cfg!(debug_assertions),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    /// Subdivisions per cube edge; `h = 1 / n`.
    pub n: usize,
    pub h: f64,
    pub velocity_dofs: usize,
    pub pressure_dofs: usize,
    pub errors: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Linear or nonlinear iterations spent on the level.
    pub iterations: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub case: String,
    pub model: Option<StressModelSpec>,
    pub error_names: Vec<String>,
    pub ratio_names: Vec<String>,
    pub levels: Vec<LevelRow>,
    /// `eoc[c][i]` between levels `i` and `i + 1` of error column `c`.
    pub eoc: Vec<Vec<Option<f64>>>,
    pub traces: Vec<NonlinearSolveTrace>,
    #[serde(default)]
    pub reference_checks: Vec<ReferenceCheck>,
    pub notes: Vec<String>,
    pub environment: EnvironmentStamp,
}

impl StudyReport {
    pub fn new(case: &str, model: Option<StressModelSpec>, error_names: &[&str], ratio_names: &[&str]) -> Self {
        Self {
            case: case.into(),
            model,
            error_names: error_names.iter().map(|s| s.to_string()).collect(),
            ratio_names: ratio_names.iter().map(|s| s.to_string()).collect(),
            eoc: vec![Vec::new(); error_names.len()],
            ..Self::default()
        }
    }

    pub fn push_level(&mut self, row: LevelRow) -> Result<()> {
        if row.errors.len() != self.error_names.len() || row.ratios.len() != self.ratio_names.len() {
            return Err(invalid("level row does not match the report columns"));
        }
        self.levels.push(row);
        self.refresh_eoc()
    }

    fn refresh_eoc(&mut self) -> Result<()> {
        if self.levels.len() < 2 {
            self.eoc = vec![Vec::new(); self.error_names.len()];
            return Ok(());
        }
        let hs: Vec<f64> = self.levels.iter().map(|r| r.h).collect();
        self.eoc = (0..self.error_names.len())
            .map(|c| compute_eoc(&self.levels.iter().map(|r| r.errors[c]).collect::<Vec<_>>(), &hs))
            .collect::<Result<_>>()?;
        Ok(())
    }

    pub fn error_column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.error_names.iter().position(|n| n == name)?;
        Some(self.levels.iter().map(|r| r.errors[c]).collect())
    }

    pub fn eoc_column(&self, name: &str) -> Option<&[Option<f64>]> {
        let c = self.error_names.iter().position(|n| n == name)?;
        Some(&self.eoc[c])
    }

    pub fn ratio_column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.ratio_names.iter().position(|n| n == name)?;
        Some(self.levels.iter().map(|r| r.ratios[c]).collect())
    }

    /// One header row, then one row per level. Timing is left out so that
    /// identical runs give identical bytes.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,n,h,velocity_dofs,pressure_dofs");
        for n in &self.error_names {
            let _ = write!(s, ",{n}");
        }
        for n in &self.error_names {
            let _ = write!(s, ",eoc_{n}");
        }
        for n in &self.ratio_names {
            let _ = write!(s, ",{n}");
        }
        s.push_str(",iterations\n");
        for (i, r) in self.levels.iter().enumerate() {
            let _ = write!(s, "{i},{},{:.12e},{},{}", r.n, r.h, r.velocity_dofs, r.pressure_dofs);
            for e in &r.errors {
                let _ = write!(s, ",{e:.12e}");
            }
            for col in &self.eoc {
                match i.checked_sub(1).and_then(|j| col.get(j)) {
                    Some(Some(v)) => {
                        let _ = write!(s, ",{v:.6}");
                    }
                    Some(None) => s.push_str(",undefined"),
                    None => s.push(','),
                }
            }
            for v in &r.ratios {
                let _ = write!(s, ",{v:.12e}");
            }
            let _ = writeln!(s, ",{}", r.iterations);
        }
        s
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}
