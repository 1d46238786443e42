//! Qualitative risk: the 5x5 likelihood/consequence matrix, obstacle
//! assessments and the coverage check.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{GoalModel, ModelError, NodeData, Violation, DO_NOTHING};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Likelihood {
    Rare,
    Unlikely,
    Possible,
    Likely,
    AlmostCertain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Consequence {
    Insignificant,
    Minor,
    Moderate,
    Major,
    Catastrophic,
}

/// L (low) < M (medium) < H (high) < E (extreme) < V (very extreme).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RiskLevel {
    L,
    M,
    H,
    E,
    V,
}

impl Likelihood {
    pub const ALL: [Likelihood; 5] = [Self::Rare, Self::Unlikely, Self::Possible, Self::Likely, Self::AlmostCertain];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Rare => "rare",
            Self::Unlikely => "unlikely",
            Self::Possible => "possible",
            Self::Likely => "likely",
            Self::AlmostCertain => "almost-certain",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Self::Rare => "Rare",
            Self::Unlikely => "Unlikely",
            Self::Possible => "Possible",
            Self::Likely => "Likely",
            Self::AlmostCertain => "Almost Certain",
        }
    }
}

impl Consequence {
    pub const ALL: [Consequence; 5] =
        [Self::Insignificant, Self::Minor, Self::Moderate, Self::Major, Self::Catastrophic];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Insignificant => "insignificant",
            Self::Minor => "minor",
            Self::Moderate => "moderate",
            Self::Major => "major",
            Self::Catastrophic => "catastrophic",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Self::Insignificant => "Insignificant",
            Self::Minor => "Minor",
            Self::Moderate => "Moderate",
            Self::Major => "Major",
            Self::Catastrophic => "Catastrophic",
        }
    }
}

impl RiskLevel {
    pub const ALL: [RiskLevel; 5] = [Self::L, Self::M, Self::H, Self::E, Self::V];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::L => "L",
            Self::M => "M",
            Self::H => "H",
            Self::E => "E",
            Self::V => "V",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Self::L => "low",
            Self::M => "medium",
            Self::H => "high",
            Self::E => "extreme",
            Self::V => "very extreme",
        }
    }
}

fn squash(s: &str) -> String {
    s.chars().filter(|c| !matches!(c, '-' | '_' | ' ')).collect::<String>().to_ascii_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {what} `{value}`")]
pub struct ParseLevelError {
    pub what: &'static str,
    pub value: String,
}

impl FromStr for Likelihood {
    type Err = ParseLevelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = squash(s);
        Self::ALL
            .into_iter()
            .find(|l| squash(l.as_str()) == key)
            .ok_or_else(|| ParseLevelError { what: "likelihood", value: s.to_string() })
    }
}

impl FromStr for Consequence {
    type Err = ParseLevelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = squash(s);
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == key)
            .ok_or_else(|| ParseLevelError { what: "consequence", value: s.to_string() })
    }
}

impl FromStr for RiskLevel {
    type Err = ParseLevelError;

    /// Accepts the letter (`H`) or the spelled-out level (`high`,
    /// `very-extreme`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = squash(s);
        Self::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(&key) || squash(r.describe()) == key)
            .ok_or_else(|| ParseLevelError { what: "risk level", value: s.to_string() })
    }
}

impl fmt::Display for Likelihood {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Consequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for RiskLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

use RiskLevel::{E, H, L, M, V};

/// Rows by likelihood (rare first), columns by consequence (insignificant
/// first).
const MATRIX: [[RiskLevel; 5]; 5] = [
    [L, L, M, H, H],
    [L, L, M, H, E],
    [L, M, H, E, E],
    [M, H, H, E, V],
    [H, H, E, E, V],
];

/// Looks up the risk level for a likelihood and consequence.
pub fn risk_of(likelihood: Likelihood, consequence: Consequence) -> RiskLevel {
    MATRIX[likelihood as usize][consequence as usize]
}

/// A superseded assessment kept in the history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorAssessment {
    pub likelihood: Likelihood,
    pub consequence: Consequence,
    pub computed: RiskLevel,
    #[serde(rename = "override", default, skip_serializing_if = "Option::is_none")]
    pub override_level: Option<RiskLevel>,
    #[serde(default)]
    pub note: String,
    /// Catalogue id of the tactic (attached to the same obstacle) whose
    /// application prompted the reassessment that replaced this entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motivating_tactic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskAssessment {
    pub likelihood: Likelihood,
    pub consequence: Consequence,
    pub computed: RiskLevel,
    #[serde(rename = "override", default, skip_serializing_if = "Option::is_none")]
    pub override_level: Option<RiskLevel>,
    /// Who judged and on what domain information.
    #[serde(default)]
    pub note: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<PriorAssessment>,
}

impl RiskAssessment {
    pub fn new(likelihood: Likelihood, consequence: Consequence, note: &str) -> Self {
        RiskAssessment {
            likelihood,
            consequence,
            computed: risk_of(likelihood, consequence),
            override_level: None,
            note: note.to_string(),
            history: Vec::new(),
        }
    }

    /// The override when present, the matrix value otherwise.
    pub fn effective(&self) -> RiskLevel {
        self.override_level.unwrap_or(self.computed)
    }

    fn archived(&self, motivating_tactic: Option<String>) -> PriorAssessment {
        PriorAssessment {
            likelihood: self.likelihood,
            consequence: self.consequence,
            computed: self.computed,
            override_level: self.override_level,
            note: self.note.clone(),
            motivating_tactic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RiskError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("a risk override requires a note")]
    OverrideWithoutNote,
    #[error("tactic `{tactic}` does not resolve obstacle `{obstacle}`")]
    TacticNotOnObstacle { tactic: String, obstacle: String },
    #[error("obstacle `{0}` has no assessment to revise")]
    NoPriorAssessment(String),
}

/// Rates an obstacle node. A previous assessment moves into the history.
pub fn assess(
    model: &mut GoalModel,
    node: &str,
    likelihood: Likelihood,
    consequence: Consequence,
    note: &str,
    override_level: Option<RiskLevel>,
) -> Result<RiskAssessment, RiskError> {
    if override_level.is_some() && note.trim().is_empty() {
        return Err(RiskError::OverrideWithoutNote);
    }
    let obstacle = model.obstacle_mut(node)?;
    let mut next = RiskAssessment::new(likelihood, consequence, note);
    next.override_level = override_level;
    if let Some(prev) = obstacle.assessment.take() {
        next.history = prev.history.clone();
        next.history.push(prev.archived(None));
    }
    obstacle.assessment = Some(next.clone());
    Ok(next)
}

/// Revises an assessment after `tactic_node` (attached to the same
/// obstacle) was applied.
pub fn reassess_after_tactic(
    model: &mut GoalModel,
    node: &str,
    tactic_node: &str,
    likelihood: Likelihood,
    consequence: Consequence,
    note: &str,
) -> Result<RiskAssessment, RiskError> {
    model.obstacle(node).ok_or_else(|| match model.contains(node) {
        true => ModelError::NotAnObstacle(node.to_string()),
        false => ModelError::UnknownNode(node.to_string()),
    })?;
    let tactic = model.tactic(tactic_node).ok_or_else(|| match model.contains(tactic_node) {
        true => ModelError::NotATactic(tactic_node.to_string()),
        false => ModelError::UnknownNode(tactic_node.to_string()),
    })?;
    let tactic_ref = tactic.repo_ref.clone();
    if model.parent(tactic_node).as_deref() != Some(node) {
        return Err(RiskError::TacticNotOnObstacle { tactic: tactic_node.to_string(), obstacle: node.to_string() });
    }
    let obstacle = model.obstacle_mut(node)?;
    let prev = obstacle.assessment.take().ok_or_else(|| RiskError::NoPriorAssessment(node.to_string()))?;
    let mut next = RiskAssessment::new(likelihood, consequence, note);
    next.history = prev.history.clone();
    next.history.push(prev.archived(Some(tactic_ref)));
    obstacle.assessment = Some(next.clone());
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageStatus {
    Covered,
    Uncovered,
    Unassessed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageReason {
    /// At least one attached tactic (T41 only with its note).
    Tactic,
    /// Effective risk below the threshold.
    BelowThreshold,
    /// Every refinement child is covered.
    Children,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObstacleVerdict {
    pub node: String,
    pub name: String,
    pub status: CoverageStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<CoverageReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effective_risk: Option<RiskLevel>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tactics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub threshold: RiskLevel,
    pub verdicts: Vec<ObstacleVerdict>,
    pub violations: Vec<Violation>,
}

impl CheckReport {
    pub fn with_status(&self, status: CoverageStatus) -> Vec<&str> {
        self.verdicts.iter().filter(|v| v.status == status).map(|v| v.node.as_str()).collect()
    }

    pub fn uncovered(&self) -> Vec<&str> {
        self.with_status(CoverageStatus::Uncovered)
    }

    pub fn unassessed(&self) -> Vec<&str> {
        self.with_status(CoverageStatus::Unassessed)
    }

    pub fn verdict(&self, node: &str) -> Option<&ObstacleVerdict> {
        self.verdicts.iter().find(|v| v.node == node)
    }

    /// No uncovered or unassessed obstacle and no structural violation.
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.verdicts.iter().all(|v| v.status == CoverageStatus::Covered)
    }
}

/// Judges every obstacle against `threshold` (the default is
/// [`RiskLevel::H`]). Obstacles are serious when their effective risk is at
/// or above the threshold.
pub fn coverage_check(model: &GoalModel, threshold: RiskLevel) -> CheckReport {
    let views = model.views();
    let mut memo: HashMap<&str, CoverageStatus> = HashMap::new();
    let mut verdicts = Vec::new();
    // Reverse preorder visits every child before its parent.
    for view in views.iter().rev() {
        let NodeData::Obstacle(obstacle) = &view.data else { continue };
        let mut tactics = Vec::new();
        let mut child_status = Vec::new();
        for c in &view.children {
            match model.data(c) {
                Some(NodeData::Tactic(t)) if t.repo_ref != DO_NOTHING || !t.note.trim().is_empty() => {
                    tactics.push(t.repo_ref.clone())
                }
                Some(NodeData::Obstacle(_)) => child_status.push(memo.get(c.as_str()).copied()),
                _ => {}
            }
        }
        let effective = obstacle.assessment.as_ref().map(RiskAssessment::effective);
        let children_covered =
            !child_status.is_empty() && child_status.iter().all(|s| *s == Some(CoverageStatus::Covered));
        let (status, reason) = if !tactics.is_empty() {
            (CoverageStatus::Covered, Some(CoverageReason::Tactic))
        } else if effective.is_some_and(|r| r < threshold) {
            (CoverageStatus::Covered, Some(CoverageReason::BelowThreshold))
        } else if children_covered {
            (CoverageStatus::Covered, Some(CoverageReason::Children))
        } else if effective.is_some() || child_status.contains(&Some(CoverageStatus::Uncovered)) {
            (CoverageStatus::Uncovered, None)
        } else {
            (CoverageStatus::Unassessed, None)
        };
        memo.insert(view.id.as_str(), status);
        verdicts.push(ObstacleVerdict {
            node: view.id.clone(),
            name: obstacle.name.clone(),
            status,
            reason,
            effective_risk: effective,
            tactics,
        });
    }
    verdicts.reverse();
    CheckReport { threshold, verdicts, violations: model.validate_structure() }
}
