//! The identify, assess and resolve loop.
//!
//! A [`Session`] wraps a goal model with an append-only audit journal and a
//! revision counter. Every mutation goes through [`Session::execute`], which
//! applies a [`Command`] atomically: on error the session is left untouched.
//! Commands are stored in the journal, so a session can be rebuilt by
//! replaying it.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{GoalModel, GoalPattern, ModelError, NodeData, NodeKind, ObstacleOrigin, ObstacleSpec};
use crate::repository::{id_number, MigrationType, Repository};
use crate::risk::{self, coverage_check, Consequence, Likelihood, RiskAssessment, RiskError, RiskLevel};

/// Procedure step an action belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Step {
    /// Specify cloud migration goals.
    #[serde(rename = "1")]
    SpecifyGoals,
    /// Identify obstacles.
    #[serde(rename = "2.1")]
    IdentifyObstacles,
    /// Assess obstacles.
    #[serde(rename = "2.2")]
    AssessObstacles,
    /// Resolve goal obstacles.
    #[serde(rename = "2.3")]
    ResolveObstacles,
}

impl Step {
    pub fn label(self) -> &'static str {
        match self {
            Step::SpecifyGoals => "1",
            Step::IdentifyObstacles => "2.1",
            Step::AssessObstacles => "2.2",
            Step::ResolveObstacles => "2.3",
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reassessment {
    pub likelihood: Likelihood,
    pub consequence: Consequence,
    #[serde(default)]
    pub note: String,
}

/// An obstacle raised by applying a tactic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntroducedObstacle {
    /// Attachment point; defaults to the obstacle the tactic resolves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    pub origin: ObstacleSpec,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TacticEffects {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reassessment: Option<Reassessment>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub introduced: Vec<IntroducedObstacle>,
}

/// A mutating operation. Journalled verbatim in the audit log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Command {
    AddGoal {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        parent: Option<String>,
        pattern: GoalPattern,
        descriptor: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        repo_ref: Option<String>,
    },
    AttachObstacle {
        target: String,
        origin: ObstacleSpec,
    },
    RenameObstacle {
        node: String,
        name: String,
    },
    AttachTactic {
        node: String,
        tactic: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        #[serde(default)]
        note: String,
    },
    Assess {
        node: String,
        likelihood: Likelihood,
        consequence: Consequence,
        #[serde(default)]
        note: String,
        #[serde(rename = "override", default, skip_serializing_if = "Option::is_none")]
        override_level: Option<RiskLevel>,
    },
    Reassess {
        node: String,
        tactic_node: String,
        likelihood: Likelihood,
        consequence: Consequence,
        #[serde(default)]
        note: String,
    },
    ApplyTactic {
        node: String,
        tactic: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        #[serde(default)]
        note: String,
        #[serde(default)]
        effects: TacticEffects,
    },
    RemoveSubtree {
        node: String,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::AddGoal { .. } => "add_goal",
            Command::AttachObstacle { .. } => "attach_obstacle",
            Command::RenameObstacle { .. } => "rename_obstacle",
            Command::AttachTactic { .. } => "attach_tactic",
            Command::Assess { .. } => "assess",
            Command::Reassess { .. } => "reassess",
            Command::ApplyTactic { .. } => "apply_tactic",
            Command::RemoveSubtree { .. } => "remove_subtree",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditEntry {
    pub step: Step,
    pub action: String,
    pub subject: Vec<String>,
    pub timestamp: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
    /// Present on the first entry written by each command.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
}

/// What a command produced.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Outcome {
    pub revision: u64,
    /// Ids of created nodes, in creation order.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub created: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assessment: Option<RiskAssessment>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub removed: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error("no goal is linked to the repository; add a goal with a repository reference (G1-G10) first")]
    NoRepositoryGoals,
    #[error("replay diverged at journal entry {0}: {1}")]
    Replay(usize, String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub session_id: String,
    pub repository_version: String,
    model: GoalModel,
    audit: Vec<AuditEntry>,
    revision: u64,
}

impl Session {
    /// Opens a session on an empty model at revision 0.
    pub fn start(
        session_id: &str,
        name: &str,
        migration_type: MigrationType,
        repo: &Repository,
    ) -> Result<Session, SessionError> {
        let model = GoalModel::new(name, migration_type)?;
        let audit = vec![AuditEntry {
            step: Step::SpecifyGoals,
            action: "start_session".into(),
            subject: vec![],
            timestamp: Utc::now(),
            note: format!("session started for migration type {migration_type}"),
            command: None,
        }];
        Ok(Session {
            session_id: session_id.to_string(),
            repository_version: repo.version().to_string(),
            model,
            audit,
            revision: 0,
        })
    }

    /// Reassembles a persisted session without re-running its journal.
    pub(crate) fn from_parts(
        session_id: String,
        repository_version: String,
        model: GoalModel,
        audit: Vec<AuditEntry>,
        revision: u64,
    ) -> Session {
        Session { session_id, repository_version, model, audit, revision }
    }

    pub fn name(&self) -> &str {
        self.model.name()
    }

    pub fn migration_type(&self) -> MigrationType {
        self.model.migration_type()
    }

    pub fn model(&self) -> &GoalModel {
        &self.model
    }

    pub fn audit(&self) -> &[AuditEntry] {
        &self.audit
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    /// Applies a command atomically and journals it.
    pub fn execute(&mut self, repo: &Repository, command: Command) -> Result<Outcome, SessionError> {
        let mut model = self.model.clone();
        let (entries, mut outcome) = apply(&mut model, repo, &command)?;
        let now = Utc::now();
        let mut first = true;
        for (step, action, subject, note) in entries {
            self.audit.push(AuditEntry {
                step,
                action,
                subject,
                timestamp: now,
                note,
                command: first.then(|| command.clone()),
            });
            first = false;
        }
        self.model = model;
        self.revision += 1;
        outcome.revision = self.revision;
        Ok(outcome)
    }

    /// Re-executes the journalled commands on a fresh session.
    pub fn replay(&self, repo: &Repository) -> Result<Session, SessionError> {
        let mut fresh = Session::start(&self.session_id, self.name(), self.migration_type(), repo)?;
        for (i, entry) in self.audit.iter().enumerate() {
            if let Some(cmd) = &entry.command {
                fresh
                    .execute(repo, cmd.clone())
                    .map_err(|e| SessionError::Replay(i, e.to_string()))?;
            }
        }
        Ok(fresh)
    }

    pub fn suggest_obstacles(&self, repo: &Repository) -> Result<Vec<Suggestion>, SessionError> {
        suggest_obstacles(&self.model, repo)
    }

    pub fn suggest_tactics(&self, repo: &Repository, node: &str) -> Result<TacticSuggestions, SessionError> {
        suggest_tactics(&self.model, repo, node)
    }

    pub fn step_status(&self, threshold: RiskLevel) -> StepStatus {
        let mut status = step_status(&self.model, threshold);
        status.last_step = self.audit.iter().skip(1).last().map(|e| e.step);
        status
    }
}

type Entry = (Step, String, Vec<String>, String);

fn entry(step: Step, action: &str, subject: Vec<String>, note: &str) -> Entry {
    (step, action.to_string(), subject, note.to_string())
}

fn apply(model: &mut GoalModel, repo: &Repository, command: &Command) -> Result<(Vec<Entry>, Outcome), SessionError> {
    let mut outcome = Outcome::default();
    let mut entries = Vec::new();
    match command {
        Command::AddGoal { parent, pattern, descriptor, repo_ref } => {
            let id = model.add_goal(repo, parent.as_deref(), *pattern, descriptor, repo_ref.as_deref())?;
            entries.push(entry(Step::SpecifyGoals, "add_goal", vec![id.clone()], ""));
            outcome.created.push(id);
        }
        Command::AttachObstacle { target, origin } => {
            let id = model.attach_obstacle(repo, target, origin.clone())?;
            entries.push(entry(Step::IdentifyObstacles, "attach_obstacle", vec![target.clone(), id.clone()], ""));
            outcome.created.push(id);
        }
        Command::RenameObstacle { node, name } => {
            model.rename_obstacle(node, name)?;
            entries.push(entry(Step::IdentifyObstacles, "rename_obstacle", vec![node.clone()], name));
        }
        Command::AttachTactic { node, tactic, label, note } => {
            let id = model.attach_tactic(repo, node, tactic, label.as_deref(), note)?;
            entries.push(entry(Step::ResolveObstacles, "attach_tactic", vec![node.clone(), id.clone()], note));
            outcome.created.push(id);
        }
        Command::Assess { node, likelihood, consequence, note, override_level } => {
            let a = risk::assess(model, node, *likelihood, *consequence, note, *override_level)?;
            entries.push(entry(Step::AssessObstacles, "assess", vec![node.clone()], note));
            outcome.assessment = Some(a);
        }
        Command::Reassess { node, tactic_node, likelihood, consequence, note } => {
            let a = risk::reassess_after_tactic(model, node, tactic_node, *likelihood, *consequence, note)?;
            entries.push(entry(Step::AssessObstacles, "reassess", vec![node.clone(), tactic_node.clone()], note));
            outcome.assessment = Some(a);
        }
        Command::ApplyTactic { node, tactic, label, note, effects } => {
            let obstacle_key = model.key_of(node).ok_or_else(|| ModelError::UnknownNode(node.clone()))?;
            let mut targets = Vec::with_capacity(effects.introduced.len());
            for intro in &effects.introduced {
                let key = match &intro.target {
                    Some(t) => model.key_of(t).ok_or_else(|| ModelError::UnknownNode(t.clone()))?,
                    None => obstacle_key,
                };
                targets.push(key);
            }
            let tactic_id = model.attach_tactic(repo, node, tactic, label.as_deref(), note)?;
            let tactic_key = model.key_of(&tactic_id).expect("just attached");
            let mut steps = vec![(Step::ResolveObstacles, "apply_tactic", vec![tactic_key], note.clone())];
            if let Some(r) = &effects.reassessment {
                let a = risk::reassess_after_tactic(model, node, &tactic_id, r.likelihood, r.consequence, &r.note)?;
                outcome.assessment = Some(a);
                steps.push((Step::AssessObstacles, "reassess", vec![tactic_key], r.note.clone()));
            }
            let mut created = vec![tactic_key];
            for (intro, target) in effects.introduced.iter().zip(targets) {
                let key = model.attach_obstacle_at(repo, target, intro.origin.clone())?;
                let (t, o) = (model.id_of(tactic_key).expect("live").to_string(), model.id_of(key).expect("live").to_string());
                model.link_introduced(&t, &o)?;
                created.push(key);
                steps.push((Step::IdentifyObstacles, "introduce_obstacle", vec![target, key], String::new()));
            }
            // Ids are read back only now that the model is in its final shape.
            let id = |k| model.id_of(k).expect("live").to_string();
            let obstacle_id = id(obstacle_key);
            for (step, action, keys, note) in steps {
                let mut subject = vec![obstacle_id.clone()];
                if action == "introduce_obstacle" {
                    subject = keys.iter().map(|k| id(*k)).collect();
                } else {
                    subject.extend(keys.iter().map(|k| id(*k)));
                }
                entries.push(entry(step, action, subject, &note));
            }
            outcome.created = created.into_iter().map(id).collect();
        }
        Command::RemoveSubtree { node } => {
            let step = match model.data(node).map(NodeData::kind) {
                Some(NodeKind::Goal) => Step::SpecifyGoals,
                Some(NodeKind::Obstacle) => Step::IdentifyObstacles,
                Some(NodeKind::Tactic) => Step::ResolveObstacles,
                None => return Err(ModelError::UnknownNode(node.clone()).into()),
            };
            let removed = model.remove_subtree(node)?;
            entries.push(entry(step, "remove_subtree", vec![node.clone()], ""));
            outcome.removed = Some(removed);
        }
    }
    Ok((entries, outcome))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionKind {
    Obstacle,
    Tactic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub kind: SuggestionKind,
    pub repo_id: String,
    pub name: String,
    /// Model goals (distinct repository goal ids) the obstacle impacts.
    pub matched_goals: usize,
    pub study_count: usize,
    pub universal: bool,
    /// Model nodes the suggestion applies to.
    pub targets: Vec<String>,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TacticSuggestions {
    pub suggestions: Vec<Suggestion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notice: Option<String>,
}

/// Repository obstacles that threaten the model's repository-linked goals
/// and apply to its migration type, minus those already instantiated
/// anywhere beneath a matching goal.
pub fn suggest_obstacles(model: &GoalModel, repo: &Repository) -> Result<Vec<Suggestion>, SessionError> {
    let goal_nodes: Vec<(String, String)> = model
        .ids_of_kind(NodeKind::Goal)
        .into_iter()
        .filter_map(|id| model.goal(&id).and_then(|g| g.repo_ref.clone()).map(|r| (id, r)))
        .collect();
    if goal_nodes.is_empty() {
        return Err(SessionError::NoRepositoryGoals);
    }
    let linked: BTreeSet<&str> = goal_nodes.iter().map(|(_, r)| r.as_str()).collect();
    // (repository obstacle, repository goal of some goal above it)
    let mut instantiated: HashSet<(String, String)> = HashSet::new();
    for id in model.ids_of_kind(NodeKind::Obstacle) {
        let Some(NodeData::Obstacle(o)) = model.data(&id) else { continue };
        let ObstacleOrigin::Evidential { obstacle } = &o.origin else { continue };
        let mut cur = model.nearest_goal(&id);
        while let Some(goal) = cur {
            if let Some(r) = model.goal(&goal).and_then(|g| g.repo_ref.clone()) {
                instantiated.insert((obstacle.clone(), r));
            }
            cur = model.parent(&goal);
        }
    }
    let mt = model.migration_type();
    let mut out: Vec<Suggestion> = repo
        .obstacles()
        .iter()
        .filter(|o| o.migration_types.contains(&mt))
        .filter_map(|o| {
            let matched: Vec<&str> =
                o.impacted_goals.iter().map(String::as_str).filter(|g| linked.contains(g)).collect();
            if matched.is_empty() {
                return None;
            }
            if matched.iter().any(|g| instantiated.contains(&(o.id.clone(), g.to_string()))) {
                return None;
            }
            let targets: Vec<String> = goal_nodes
                .iter()
                .filter(|(_, r)| matched.contains(&r.as_str()))
                .map(|(id, _)| id.clone())
                .collect();
            Some(Suggestion {
                kind: SuggestionKind::Obstacle,
                repo_id: o.id.clone(),
                name: o.name.clone(),
                matched_goals: matched.len(),
                study_count: o.source_studies.len(),
                universal: false,
                rationale: format!(
                    "impacts {} (goal nodes {}); applies to migration type {mt}; reported by {} studies",
                    matched.join(", "),
                    targets.join(", "),
                    o.source_studies.len()
                ),
                targets,
            })
        })
        .collect();
    out.sort_by_key(|s| (std::cmp::Reverse(s.matched_goals), std::cmp::Reverse(s.study_count), id_number(&s.repo_id)));
    Ok(out)
}

/// Tactics for an obstacle node: those catalogued against its nearest
/// repository obstacle first, then the universal ones, skipping tactics
/// already attached to the node.
pub fn suggest_tactics(model: &GoalModel, repo: &Repository, node: &str) -> Result<TacticSuggestions, SessionError> {
    if model.obstacle(node).is_none() {
        return Err(match model.contains(node) {
            true => ModelError::NotAnObstacle(node.to_string()),
            false => ModelError::UnknownNode(node.to_string()),
        }
        .into());
    }
    let attached: HashSet<String> =
        model.children(node).iter().filter_map(|c| model.tactic(c)).map(|t| t.repo_ref.clone()).collect();
    let anchor = model.nearest_repo_obstacle(node);
    let suggestion = |t: &crate::repository::TacticEntry, rationale: String| Suggestion {
        kind: SuggestionKind::Tactic,
        repo_id: t.id.clone(),
        name: t.name.clone(),
        matched_goals: 0,
        study_count: t.source_studies.len(),
        universal: t.universal,
        targets: vec![node.to_string()],
        rationale,
    };
    let by_rank = |a: &Suggestion| (std::cmp::Reverse(a.study_count), id_number(&a.repo_id));
    let mut specific: Vec<Suggestion> = match &anchor {
        Some(o) => repo
            .tactics()
            .iter()
            .filter(|t| t.related_obstacles.contains(o) && !attached.contains(&t.id))
            .map(|t| suggestion(t, format!("catalogued against {o} ({}, {})", t.category, t.name)))
            .collect(),
        None => Vec::new(),
    };
    specific.sort_by_key(by_rank);
    let mut universal: Vec<Suggestion> = repo
        .universal_tactics()
        .filter(|t| !attached.contains(&t.id))
        .map(|t| suggestion(t, format!("applicable to every obstacle ({})", t.category)))
        .collect();
    universal.sort_by_key(by_rank);
    let notice = anchor.is_none().then(|| {
        format!("`{node}` has no repository ancestor; only universally applicable tactics are suggested")
    });
    specific.extend(universal);
    Ok(TacticSuggestions { suggestions: specific, notice })
}

/// Progress summary over a model.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStatus {
    pub goals: usize,
    /// Goals with no obstacle anywhere beneath them.
    pub unobstructed_goals: usize,
    pub unassessed_obstacles: usize,
    pub uncovered_obstacles: usize,
    pub violations: usize,
    pub threshold: Option<RiskLevel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_step: Option<Step>,
}

pub fn step_status(model: &GoalModel, threshold: RiskLevel) -> StepStatus {
    let report = coverage_check(model, threshold);
    let goals = model.ids_of_kind(NodeKind::Goal);
    let unobstructed = goals
        .iter()
        .filter(|g| {
            let mut stack = model.children(g);
            while let Some(c) = stack.pop() {
                match model.data(&c) {
                    Some(NodeData::Obstacle(_)) => return false,
                    Some(NodeData::Goal(_)) => stack.extend(model.children(&c)),
                    _ => {}
                }
            }
            true
        })
        .count();
    StepStatus {
        goals: goals.len(),
        unobstructed_goals: unobstructed,
        unassessed_obstacles: report.unassessed().len(),
        uncovered_obstacles: report.uncovered().len(),
        violations: report.violations.len(),
        threshold: Some(threshold),
        last_step: None,
    }
}
