//! JSON problem files, plan files and run reports.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domains::ProblemSpec;
use crate::error::FtsError;
use crate::model::Plan;
use crate::planners::{Outcome, PlannerConfig, RunResult, RunStats};

pub fn parse_problem(text: &str) -> Result<ProblemSpec, FtsError> {
    serde_json::from_str(text).map_err(|e| FtsError::InvalidSpec(e.to_string()))
}

pub fn load_problem(path: &Path) -> Result<ProblemSpec, FtsError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| FtsError::InvalidSpec(format!("{}: {e}", path.display())))?;
    parse_problem(&text)
}

pub fn problem_json(spec: &ProblemSpec) -> String {
    serde_json::to_string_pretty(spec).expect("problem specs serialize")
}

pub fn parse_plan(text: &str) -> Result<Plan, FtsError> {
    // accept either a bare plan or a full run report
    if let Ok(report) = serde_json::from_str::<RunReport>(text) {
        return report
            .plan
            .ok_or_else(|| FtsError::MalformedPlan("report contains no plan".into()));
    }
    serde_json::from_str(text).map_err(|e| FtsError::MalformedPlan(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub outcome: Outcome,
    pub plan: Option<Plan>,
    pub stats: RunStats,
    pub seed: u64,
    pub config: PlannerConfig,
}

impl RunReport {
    pub fn new(result: &RunResult, config: &PlannerConfig) -> Self {
        Self {
            outcome: result.outcome,
            plan: result.plan.clone(),
            stats: result.stats.clone(),
            seed: config.seed,
            config: config.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}
