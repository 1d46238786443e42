//! `.session.json` documents.
//!
//! Nodes are stored flat, in preorder, each naming its parent. Ids are
//! positional, so on load they are recomputed and must match the stored
//! ones. Assessments and the audit journal are stored alongside.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{GoalModel, GoalNode, GoalPattern, NodeData, NodeKey, ObstacleNode, ObstacleOrigin, TacticNode};
use crate::procedure::{AuditEntry, Session};
use crate::repository::{MigrationType, Repository};
use crate::risk::RiskAssessment;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SessionDocError {
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("session document schema violation: {0}")]
    Schema(String),
    #[error("unsupported session format_version {0} (this build reads version {FORMAT_VERSION})")]
    UnsupportedVersion(u64),
    #[error("session refers to `{0}`, which the loaded dataset does not contain")]
    DanglingReference(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionDocument {
    format_version: u32,
    session_id: String,
    name: String,
    migration_type: MigrationType,
    repository_version: String,
    revision: u64,
    nodes: Vec<NodeRecord>,
    #[serde(default)]
    assessments: Vec<AssessmentRecord>,
    audit: Vec<AuditEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum NodeRecord {
    Goal {
        id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        parent: Option<String>,
        pattern: GoalPattern,
        descriptor: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        repo_ref: Option<String>,
    },
    Obstacle {
        id: String,
        parent: String,
        name: String,
        origin: ObstacleOrigin,
    },
    Tactic {
        id: String,
        parent: String,
        repo_ref: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        #[serde(default, skip_serializing_if = "String::is_empty")]
        note: String,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        introduces: Vec<String>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AssessmentRecord {
    node: String,
    assessment: RiskAssessment,
}

/// A session read from disk plus any non-fatal findings.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSession {
    pub session: Session,
    pub warnings: Vec<String>,
}

pub fn session_to_json(session: &Session) -> String {
    let model = session.model();
    let mut nodes = Vec::new();
    let mut assessments = Vec::new();
    for v in model.views() {
        let record = match v.data {
            NodeData::Goal(g) => NodeRecord::Goal {
                id: v.id.clone(),
                parent: v.parent,
                pattern: g.pattern,
                descriptor: g.descriptor,
                repo_ref: g.repo_ref,
            },
            NodeData::Obstacle(o) => {
                if let Some(a) = o.assessment {
                    assessments.push(AssessmentRecord { node: v.id.clone(), assessment: a });
                }
                NodeRecord::Obstacle {
                    id: v.id.clone(),
                    parent: v.parent.unwrap_or_default(),
                    name: o.name,
                    origin: o.origin,
                }
            }
            NodeData::Tactic(t) => NodeRecord::Tactic {
                id: v.id.clone(),
                parent: v.parent.unwrap_or_default(),
                repo_ref: t.repo_ref,
                label: t.label,
                note: t.note,
                introduces: v.introduced,
            },
        };
        nodes.push(record);
    }
    let doc = SessionDocument {
        format_version: FORMAT_VERSION,
        session_id: session.session_id.clone(),
        name: session.name().to_string(),
        migration_type: session.migration_type(),
        repository_version: session.repository_version.clone(),
        revision: session.revision(),
        nodes,
        assessments,
        audit: session.audit().to_vec(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("session document serializes");
    s.push('\n');
    s
}

/// Parses a session document, checking ids against `repo`. A different
/// dataset version is tolerated with a warning as long as every reference
/// still resolves.
pub fn session_from_json(text: &str, repo: &Repository) -> Result<LoadedSession, SessionDocError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| SessionDocError::Schema(e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| SessionDocError::Schema("missing field `format_version`".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(SessionDocError::UnsupportedVersion(version));
    }
    let doc: SessionDocument = serde_json::from_value(value).map_err(|e| SessionDocError::Schema(e.to_string()))?;

    let mut warnings = Vec::new();
    if doc.repository_version != repo.version() {
        warnings.push(format!(
            "session was recorded against dataset {} but dataset {} is loaded; ids resolved best effort",
            doc.repository_version,
            repo.version()
        ));
    }

    let mut model = GoalModel::new(&doc.name, doc.migration_type).map_err(|e| SessionDocError::Schema(e.to_string()))?;
    let mut keys: HashMap<String, NodeKey> = HashMap::new();
    let mut links = Vec::new();
    for record in doc.nodes {
        let (id, parent, data) = match record {
            NodeRecord::Goal { id, parent, pattern, descriptor, repo_ref } => {
                if let Some(r) = &repo_ref {
                    require(repo.goal(r).is_some(), r)?;
                }
                (id, parent, NodeData::Goal(GoalNode { pattern, descriptor, repo_ref }))
            }
            NodeRecord::Obstacle { id, parent, name, origin } => {
                if let Some(r) = origin.repo_obstacle() {
                    require(repo.obstacle(r).is_some(), r)?;
                }
                (id, Some(parent), NodeData::Obstacle(ObstacleNode { name, origin, assessment: None }))
            }
            NodeRecord::Tactic { id, parent, repo_ref, label, note, introduces } => {
                require(repo.tactic(&repo_ref).is_some(), &repo_ref)?;
                links.push((id.clone(), introduces));
                (id, Some(parent), NodeData::Tactic(TacticNode { repo_ref, label, note }))
            }
        };
        let parent_key = match &parent {
            Some(p) => Some(*keys.get(p).ok_or_else(|| {
                SessionDocError::Schema(format!("node `{id}` names parent `{p}`, which is not listed before it"))
            })?),
            None => None,
        };
        if keys.contains_key(&id) {
            return Err(SessionDocError::Schema(format!("node id `{id}` listed twice")));
        }
        let key = model.insert_raw(parent_key, data);
        keys.insert(id, key);
    }
    for (id, key) in &keys {
        let actual = model.id_of(*key).unwrap_or_default();
        if actual != id {
            return Err(SessionDocError::Schema(format!("node `{id}` sits where id `{actual}` is expected")));
        }
    }
    for (tactic, targets) in links {
        for t in targets {
            let target = *keys
                .get(&t)
                .ok_or_else(|| SessionDocError::Schema(format!("tactic `{tactic}` introduces unknown node `{t}`")))?;
            model.link_raw(keys[&tactic], target);
        }
    }
    for a in doc.assessments {
        let node = model
            .obstacle_mut(&a.node)
            .map_err(|_| SessionDocError::Schema(format!("assessment for `{}`, which is not an obstacle", a.node)))?;
        node.assessment = Some(a.assessment);
    }
    if let Some(v) = model.validate_structure().first() {
        return Err(SessionDocError::Schema(format!("model is not well formed: {v}")));
    }
    let session = Session::from_parts(doc.session_id, doc.repository_version, model, doc.audit, doc.revision);
    Ok(LoadedSession { session, warnings })
}

fn require(ok: bool, id: &str) -> Result<(), SessionDocError> {
    if ok {
        Ok(())
    } else {
        Err(SessionDocError::DanglingReference(id.to_string()))
    }
}

pub fn write_session(session: &Session, path: &Path) -> Result<(), SessionDocError> {
    std::fs::write(path, session_to_json(session))
        .map_err(|source| SessionDocError::Io { path: path.to_path_buf(), source })
}

pub fn read_session(path: &Path, repo: &Repository) -> Result<LoadedSession, SessionDocError> {
    let text = std::fs::read_to_string(path).map_err(|source| SessionDocError::Io { path: path.to_path_buf(), source })?;
    session_from_json(&text, repo)
}
