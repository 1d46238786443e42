mod common;

use std::collections::BTreeSet;

use cloudgate_core::procedure::{IntroducedObstacle, Reassessment, TacticEffects};
use cloudgate_core::{
    Command, Consequence, GoalPattern, Likelihood, MigrationType, ObstacleSpec, RiskLevel, Session, SessionError, Step,
};

fn goal(descriptor: &str, repo_ref: Option<&str>) -> Command {
    Command::AddGoal {
        parent: None,
        pattern: GoalPattern::Achieve,
        descriptor: descriptor.into(),
        repo_ref: repo_ref.map(str::to_string),
    }
}

fn attach(target: &str, obstacle: &str) -> Command {
    Command::AttachObstacle { target: target.into(), origin: ObstacleSpec::evidential(obstacle) }
}

#[test]
fn start_session() {
    let repo = common::repo();
    let s = Session::start("st", "SpringTrader", MigrationType::V, &repo).unwrap();
    assert_eq!(s.revision(), 0);
    assert!(s.model().is_empty());
    assert_eq!(s.audit().len(), 1);
    assert_eq!(s.audit()[0].step, Step::SpecifyGoals);
    assert_eq!(s.repository_version, repo.version());
    Session::start("ddp", "DDP", MigrationType::IV, &repo).unwrap();
}

#[test]
fn fresh_status_is_all_zero() {
    let repo = common::repo();
    let s = Session::start("x", "x", MigrationType::V, &repo).unwrap();
    let st = s.step_status(RiskLevel::H);
    assert_eq!(
        (st.goals, st.unobstructed_goals, st.unassessed_obstacles, st.uncovered_obstacles, st.violations, st.last_step),
        (0, 0, 0, 0, 0, None)
    );
}

#[test]
fn obstacle_suggestions_for_interoperability() {
    let repo = common::repo();
    let mut s = Session::start("st", "SpringTrader", MigrationType::V, &repo).unwrap();
    s.execute(&repo, goal("Keeping system interoperable", Some("G6"))).unwrap();
    let ids: BTreeSet<String> = s.suggest_obstacles(&repo).unwrap().into_iter().map(|x| x.repo_id).collect();
    for o in ["O19", "O20", "O21", "O22", "O23"] {
        assert!(ids.contains(o), "{o} missing");
    }
    s.execute(&repo, attach("g1", "O21")).unwrap();
    let after = s.suggest_obstacles(&repo).unwrap();
    assert!(after.iter().all(|x| x.repo_id != "O21"));
    assert!(after.iter().all(|x| !x.rationale.is_empty() && x.targets == vec!["g1"]));
}

#[test]
fn instantiation_under_a_sub_goal_counts() {
    let repo = common::repo();
    let mut s = Session::start("st", "st", MigrationType::V, &repo).unwrap();
    s.execute(&repo, goal("Keeping system interoperable", Some("G6"))).unwrap();
    s.execute(
        &repo,
        Command::AddGoal { parent: Some("g1".into()), pattern: GoalPattern::Achieve, descriptor: "data".into(), repo_ref: None },
    )
    .unwrap();
    s.execute(&repo, attach("g1.1", "O21")).unwrap();
    assert!(s.suggest_obstacles(&repo).unwrap().iter().all(|x| x.repo_id != "O21"));
}

#[test]
fn custom_goals_alone_give_guidance() {
    let repo = common::repo();
    let mut s = Session::start("x", "x", MigrationType::V, &repo).unwrap();
    s.execute(&repo, goal("Happy users", None)).unwrap();
    assert!(matches!(s.suggest_obstacles(&repo), Err(SessionError::NoRepositoryGoals)));
}

#[test]
fn domain_obstacles_inherit_tactics() {
    let repo = common::repo();
    let m = common::load_gom("s3-database.gom", &repo);
    let ids = |node: &str| -> Vec<String> {
        cloudgate_core::procedure::suggest_tactics(&m, &repo, node)
            .unwrap()
            .suggestions
            .into_iter()
            .filter(|s| !s.universal)
            .map(|s| s.repo_id)
            .collect()
    };
    let specific = ids("O27");
    assert_eq!(ids("O27_1"), specific);
    let set: BTreeSet<&str> = specific.iter().map(String::as_str).collect();
    assert_eq!(set, BTreeSet::from(["T18", "T24", "T25", "T26", "T27", "T44"]));

    let all = cloudgate_core::procedure::suggest_tactics(&m, &repo, "O27_1").unwrap();
    let first_universal = all.suggestions.iter().position(|s| s.universal).unwrap();
    assert_eq!(first_universal, specific.len());
    assert!(all.notice.is_none());
}

#[test]
fn novel_obstacles_get_a_notice() {
    let repo = common::repo();
    let mut s = Session::start("x", "x", MigrationType::V, &repo).unwrap();
    s.execute(&repo, goal("Keeping system availability", Some("G1"))).unwrap();
    s.execute(&repo, Command::AttachObstacle { target: "g1".into(), origin: ObstacleSpec::domain("Operator error") })
        .unwrap();
    let t = s.suggest_tactics(&repo, "N1").unwrap();
    assert!(t.notice.is_some());
    assert!(t.suggestions.iter().all(|x| x.universal));
}

#[test]
fn failed_operations_leave_the_session_untouched() {
    let repo = common::repo();
    let mut s = common::case_study_2(&repo);
    let before = s.clone();
    let err = s.execute(
        &repo,
        Command::ApplyTactic {
            node: "O48".into(),
            tactic: "T99".into(),
            label: None,
            note: String::new(),
            effects: TacticEffects::default(),
        },
    );
    assert!(err.is_err());
    assert_eq!(s, before);

    // The second introduced obstacle is bad, so the first must not stick.
    let err = s.execute(
        &repo,
        Command::ApplyTactic {
            node: "O46".into(),
            tactic: "T22".into(),
            label: None,
            note: String::new(),
            effects: TacticEffects {
                reassessment: Some(Reassessment { likelihood: Likelihood::Rare, consequence: Consequence::Minor, note: String::new() }),
                introduced: vec![
                    IntroducedObstacle { target: None, origin: ObstacleSpec::evidential("O5") },
                    IntroducedObstacle { target: None, origin: ObstacleSpec::evidential("O68") },
                ],
            },
        },
    );
    assert!(err.is_err());
    assert_eq!(s, before);
}

#[test]
fn apply_with_reassessment_journals_every_step() {
    let repo = common::repo();
    let mut s = common::case_study_2(&repo);
    let before = s.audit().len();
    let out = s
        .execute(
            &repo,
            Command::ApplyTactic {
                node: "O46".into(),
                tactic: "T22".into(),
                label: None,
                note: "isolate browser tenants".into(),
                effects: TacticEffects {
                    reassessment: Some(Reassessment { likelihood: Likelihood::Unlikely, consequence: Consequence::Moderate, note: String::new() }),
                    introduced: vec![IntroducedObstacle { target: None, origin: ObstacleSpec::domain("Tenant cache misses") }],
                },
            },
        )
        .unwrap();
    let steps: Vec<Step> = s.audit()[before..].iter().map(|e| e.step).collect();
    assert_eq!(steps, vec![Step::ResolveObstacles, Step::AssessObstacles, Step::IdentifyObstacles]);
    assert_eq!(out.assessment.unwrap().computed, RiskLevel::M);
    assert_eq!(s.model().obstacle("O46").unwrap().assessment.as_ref().unwrap().history.len(), 1);
    assert_eq!(s.step_status(RiskLevel::H).last_step, Some(Step::IdentifyObstacles));
}

#[test]
fn commands_serialise_stably() {
    let commands = common::case_study_2_commands();
    let text = serde_json::to_string(&commands).unwrap();
    let back: Vec<Command> = serde_json::from_str(&text).unwrap();
    assert_eq!(back, commands);
}
