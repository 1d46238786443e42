#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;

use cloudgate_core::formats::parse_model_text;
use cloudgate_core::model::NodeData;
use cloudgate_core::{Command, GoalModel, MigrationType, Repository, Session};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn repo() -> Repository {
    Repository::bundled()
}

pub fn load_gom(name: &str, repo: &Repository) -> GoalModel {
    let text = std::fs::read_to_string(fixture(name)).unwrap();
    parse_model_text(&text, repo).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn case_study_2_commands() -> Vec<Command> {
    let text = std::fs::read_to_string(fixture("case-study-2.commands.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn case_study_2(repo: &Repository) -> Session {
    let mut s = Session::start("ddp", "DDP", MigrationType::IV, repo).unwrap();
    for (i, cmd) in case_study_2_commands().into_iter().enumerate() {
        s.execute(repo, cmd).unwrap_or_else(|e| panic!("command {i}: {e}"));
    }
    s
}

/// Structural fingerprint: ids, parents, node payloads without assessment
/// history, and introduced links.
pub fn fingerprint(model: &GoalModel) -> Vec<String> {
    let mut out = vec![format!("{} {}", model.name(), model.migration_type())];
    for mut v in model.views() {
        if let NodeData::Obstacle(o) = &mut v.data {
            if let Some(a) = &mut o.assessment {
                a.history.clear();
            }
        }
        out.push(format!("{:?} {:?} {:?} {:?} {:?}", v.id, v.parent, v.data, v.children, v.introduced));
    }
    out
}
