//! Seeded generators for property suites.
//!
//! Commands are drawn against the current model so most of them succeed;
//! a small share is deliberately broken to exercise the failure paths.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{GoalModel, GoalPattern, NodeKind, ObstacleSpec, DO_NOTHING};
use crate::procedure::{Command, IntroducedObstacle, Reassessment, Session, TacticEffects};
use crate::repository::{MigrationType, Repository};
use crate::risk::{Consequence, Likelihood, RiskLevel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const WORDS: &[&str] = &[
    "latency", "billing", "tenant", "queue", "replica", "Azure", "S3", "région", "peak load", "legacy ERP",
];
const AWKWARD: &[&str] = &["\"quoted\"", "back\\slash", "two\nlines", "# not a comment", "{ braces }", "tab\there"];

/// Short free text, sometimes with characters the DSL has to escape.
pub fn text<R: Rng>(rng: &mut R) -> String {
    let n = rng.gen_range(1..=3);
    let mut parts: Vec<&str> = (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect();
    if rng.gen_bool(0.2) {
        parts.push(AWKWARD.choose(rng).unwrap());
    }
    parts.join(" ")
}

fn pick<R: Rng, T: Clone>(rng: &mut R, items: &[T]) -> T {
    items.choose(rng).expect("non-empty").clone()
}

fn repo_id<R: Rng>(rng: &mut R, prefix: char, max: u32) -> String {
    format!("{prefix}{}", rng.gen_range(1..=max))
}

/// Draws one command suited to the current state of `model`.
pub fn command<R: Rng>(rng: &mut R, model: &GoalModel) -> Command {
    let goals = model.ids_of_kind(NodeKind::Goal);
    let obstacles = model.ids_of_kind(NodeKind::Obstacle);
    let tactics = model.ids_of_kind(NodeKind::Tactic);
    let all = model.preorder();

    let roll = rng.gen_range(0..100);
    if goals.is_empty() || roll < 12 {
        let parent = if !goals.is_empty() && rng.gen_bool(0.4) { Some(pick(rng, &goals)) } else { None };
        return Command::AddGoal {
            parent,
            pattern: pick(rng, &GoalPattern::ALL),
            descriptor: text(rng),
            repo_ref: rng.gen_bool(0.8).then(|| repo_id(rng, 'G', 10)),
        };
    }
    if obstacles.is_empty() || roll < 40 {
        let targets: Vec<&String> = goals.iter().chain(obstacles.iter()).collect();
        let target = (*targets.choose(rng).unwrap()).clone();
        let origin = if rng.gen_bool(0.65) {
            ObstacleSpec::Evidential {
                obstacle: repo_id(rng, 'O', 67),
                name: rng.gen_bool(0.2).then(|| text(rng)),
            }
        } else {
            let ancestor = if obstacles.contains(&target) && rng.gen_bool(0.3) {
                model.nearest_repo_obstacle(&target)
            } else {
                None
            };
            ObstacleSpec::Domain { name: text(rng), ancestor }
        };
        return Command::AttachObstacle { target, origin };
    }
    let obstacle = pick(rng, &obstacles);
    match roll {
        40..=59 => {
            let override_level = rng.gen_bool(0.15).then(|| pick(rng, &RiskLevel::ALL));
            let note = if override_level.is_some() || rng.gen_bool(0.2) { text(rng) } else { String::new() };
            Command::Assess {
                node: obstacle,
                likelihood: pick(rng, &Likelihood::ALL),
                consequence: pick(rng, &Consequence::ALL),
                note,
                override_level,
            }
        }
        60..=74 => {
            let tactic = repo_id(rng, 'T', 45);
            let note = if tactic == DO_NOTHING || rng.gen_bool(0.2) { text(rng) } else { String::new() };
            Command::AttachTactic {
                node: obstacle,
                tactic,
                label: rng.gen_bool(0.3).then(|| text(rng)),
                note,
            }
        }
        75..=85 => {
            let introduced = (0..rng.gen_range(0..=2))
                .map(|_| IntroducedObstacle {
                    target: rng.gen_bool(0.3).then(|| pick(rng, &obstacles)),
                    origin: if rng.gen_bool(0.5) {
                        ObstacleSpec::evidential(repo_id(rng, 'O', 67))
                    } else {
                        ObstacleSpec::domain(text(rng))
                    },
                })
                .collect();
            let reassessment = rng.gen_bool(0.4).then(|| Reassessment {
                likelihood: pick(rng, &Likelihood::ALL),
                consequence: pick(rng, &Consequence::ALL),
                note: text(rng),
            });
            Command::ApplyTactic {
                node: obstacle,
                tactic: repo_id(rng, 'T', 45),
                label: None,
                note: text(rng),
                effects: TacticEffects { reassessment, introduced },
            }
        }
        86..=89 if !tactics.is_empty() => {
            let tactic_node = pick(rng, &tactics);
            Command::Reassess {
                node: model.parent(&tactic_node).unwrap_or(obstacle),
                tactic_node,
                likelihood: pick(rng, &Likelihood::ALL),
                consequence: pick(rng, &Consequence::ALL),
                note: text(rng),
            }
        }
        90..=92 => Command::RenameObstacle { node: obstacle, name: text(rng) },
        93..=95 => Command::RemoveSubtree { node: pick(rng, &all) },
        // Broken on purpose.
        _ => match rng.gen_range(0..4) {
            0 => Command::AttachTactic { node: obstacle, tactic: "T99".into(), label: None, note: String::new() },
            1 => Command::AttachObstacle { target: "nowhere".into(), origin: ObstacleSpec::evidential("O1") },
            2 => Command::AttachTactic { node: obstacle, tactic: DO_NOTHING.into(), label: None, note: String::new() },
            _ => Command::ApplyTactic {
                node: obstacle,
                tactic: "T2".into(),
                label: None,
                note: String::new(),
                effects: TacticEffects {
                    reassessment: None,
                    introduced: vec![IntroducedObstacle { target: None, origin: ObstacleSpec::evidential("O999") }],
                },
            },
        },
    }
}

/// A session after `ops` drawn commands; failed commands leave no trace.
pub fn session(seed: u64, repo: &Repository, ops: usize) -> Session {
    let mut rng = rng(seed);
    let mt = pick(&mut rng, &MigrationType::ALL);
    let mut s = Session::start(&format!("s{seed}"), &format!("random {seed}"), mt, repo).expect("valid name");
    for _ in 0..ops {
        let cmd = command(&mut rng, s.model());
        let _ = s.execute(repo, cmd);
    }
    s
}

/// A well-formed model of moderate size.
pub fn model(seed: u64, repo: &Repository) -> GoalModel {
    let mut rng = rng(seed);
    let ops = rng.gen_range(0..40);
    session(seed, repo, ops).model().clone()
}
