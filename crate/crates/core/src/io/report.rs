//! Run reports: a JSON document written by every command, successful or not.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::Result;
use crate::estimates::EstimateReport;
use crate::grid::GridSpec;
use crate::solver::SolveReport;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub n: usize,
    pub m: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub h: Vec<f64>,
    pub nodes: usize,
    pub unknowns: usize,
}

impl From<&GridSpec> for GridMeta {
    fn from(g: &GridSpec) -> Self {
        Self {
            n: g.n(),
            m: g.m(),
            lo: g.lo().to_vec(),
            hi: g.hi().to_vec(),
            h: g.spacings(),
            nodes: g.len(),
            unknowns: g.interior_len(),
        }
    }
}

/// One accepted continuation step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub t: f64,
    pub newton_iters: usize,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub phases: BTreeMap<String, f64>,
}

/// Non-finite numbers serialize as `null`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub command: String,
    pub status: RunStatus,
    pub exit_code: i32,
    pub error: Option<String>,
    pub grid: Option<GridMeta>,
    pub convergence: Vec<TraceEntry>,
    pub solve: Option<SolveReport>,
    pub estimates: Option<EstimateReport>,
    pub timing: Timing,
    pub config: Option<Value>,
    /// Command-specific results.
    pub details: Map<String, Value>,
}

impl ReportDoc {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            status: RunStatus::Ok,
            exit_code: 0,
            error: None,
            grid: None,
            convergence: Vec::new(),
            solve: None,
            estimates: None,
            timing: Timing::default(),
            config: None,
            details: Map::new(),
        }
    }

    pub fn set_solve(&mut self, report: &SolveReport) {
        self.convergence =
            report.steps.iter().map(|s| TraceEntry { t: s.t, newton_iters: s.newton_iters, residual: s.residual }).collect();
        self.solve = Some(report.clone());
    }

    pub fn fail(&mut self, exit_code: i32, message: impl Into<String>) {
        self.status = RunStatus::Failed;
        self.exit_code = exit_code;
        self.error = Some(message.into());
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.details.insert(key.to_string(), v);
    }
}

pub fn write_report(report: &ReportDoc, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<ReportDoc> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
