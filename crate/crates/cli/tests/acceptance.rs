//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command as Process;

use cloudgate_core::formats::{format_model_text, parse_model_text};
use cloudgate_core::model::{NodeData, NodeKind, ViolationRule};
use cloudgate_core::repository::{ObstacleFilter, TacticFilter};
use cloudgate_core::risk::{assess, CoverageReason, CoverageStatus};
use cloudgate_core::{
    coverage_check, risk_of, Command, Consequence, Likelihood, MigrationType, Repository, RiskLevel, Session, Step,
    TacticCategory,
};

type Criterion = fn() -> String;

fn main() {
    let criteria: [(&str, Criterion); 6] = [
        ("risk matrix exactness", risk_matrix),
        ("case study 1 replay", case_study_1),
        ("case study 2 replay", case_study_2),
        ("repository integrity", repository_integrity),
        ("query goldens", query_goldens),
        ("property suites", property_suites),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        match catch_unwind(AssertUnwindSafe(check)) {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(payload) => {
                failed += 1;
                let msg = payload
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panicked".into());
                println!("FAIL  {name}: {}", msg.replace('\n', " | "));
            }
        }
    }
    let _ = std::panic::take_hook();
    println!("{} of {} criteria passed", 6 - failed, 6);
    if failed > 0 {
        std::process::exit(1);
    }
}

/// Runs the built binary and returns its exit code.
fn cli_exit(args: &[&str]) -> i32 {
    let out = Process::new(env!("CARGO_BIN_EXE_cloudgate")).args(args).output().expect("binary runs");
    out.status.code().expect("exited normally")
}

fn computed(m: &cloudgate_core::GoalModel, id: &str) -> RiskLevel {
    m.obstacle(id).unwrap_or_else(|| panic!("{id} missing")).assessment.as_ref().unwrap().computed
}

fn risk_matrix() -> String {
    use Consequence::*;
    use Likelihood::*;
    // The published grid, top row first, read as text.
    let printed = [
        (AlmostCertain, "H H E E V"),
        (Likely, "M H H E V"),
        (Possible, "L M H E E"),
        (Unlikely, "L L M H E"),
        (Rare, "L L M H H"),
    ];
    let columns = [Insignificant, Minor, Moderate, Major, Catastrophic];
    let mut cells = 0;
    for (l, row) in printed {
        for (c, letter) in columns.iter().zip(row.split(' ')) {
            assert_eq!(risk_of(l, *c).as_str(), letter, "{l} x {c}");
            cells += 1;
        }
    }
    assert_eq!(cells, 25);
    assert_eq!(risk_of(AlmostCertain, Major), RiskLevel::E);
    assert_eq!(risk_of(Possible, Insignificant), RiskLevel::L);
    assert_eq!(risk_of(Rare, Catastrophic), RiskLevel::H);
    assert_eq!(risk_of(Likely, Catastrophic), RiskLevel::V);
    for l in Likelihood::ALL {
        for w in Consequence::ALL.windows(2) {
            assert!(risk_of(l, w[0]) <= risk_of(l, w[1]), "not monotone in consequence at {l}");
        }
    }
    for c in Consequence::ALL {
        for w in Likelihood::ALL.windows(2) {
            assert!(risk_of(w[0], c) <= risk_of(w[1], c), "not monotone in likelihood at {c}");
        }
    }
    "25 cells exact, monotone in both axes".into()
}

fn case_study_1() -> String {
    let repo = common::repo();
    let before = common::fixture("case-study-1.gom");
    let mut m = common::load_gom("case-study-1.gom", &repo);
    assert_eq!(m.root_ids().len(), 3);
    for o in ["O51", "O50", "O21"] {
        assert_eq!(computed(&m, o), RiskLevel::E, "{o}");
    }
    assert_eq!(computed(&m, "O3"), RiskLevel::M, "O3 computed");
    let a = assess(
        &mut m,
        "O3",
        Likelihood::Possible,
        Consequence::Minor,
        "transient faults are rare and recovered by the platform",
        Some(RiskLevel::L),
    )
    .unwrap();
    assert_eq!((a.computed, a.effective()), (RiskLevel::M, RiskLevel::L), "O3 override");

    let report = coverage_check(&m, RiskLevel::H);
    assert_eq!(report.uncovered(), ["O51", "O50", "O21"]);
    assert_eq!(cli_exit(&["check", "--model", before.to_str().unwrap(), "--threshold", "high"]), 1, "check before tactics");

    for (o, t) in [("O51", "T7"), ("O50", "T6"), ("O21", "T12"), ("O3", "T18"), ("O3", "T23")] {
        m.attach_tactic(&repo, o, t, None, "").unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let after = dir.path().join("resolved.gom");
    std::fs::write(&after, format_model_text(&m).unwrap()).unwrap();
    assert_eq!(cli_exit(&["check", "--model", after.to_str().unwrap(), "--threshold", "high"]), 0, "check after tactics");
    let shipped = common::fixture("case-study-1-resolved.gom");
    assert_eq!(common::fingerprint(&m), common::fingerprint(&common::load_gom("case-study-1-resolved.gom", &repo)));
    assert_eq!(cli_exit(&["check", "--model", shipped.to_str().unwrap()]), 0);
    "O51/O50/O21 = E, O3 computed M overridden to L, check exits 1 then 0".into()
}

fn case_study_2() -> String {
    use Consequence::*;
    use Likelihood::*;
    let repo = common::repo();
    let s = common::case_study_2(&repo);
    let m = s.model();
    let cells = [
        ("O33", AlmostCertain, Major, RiskLevel::E),
        ("O44", Likely, Moderate, RiskLevel::H),
        ("O21", AlmostCertain, Moderate, RiskLevel::E),
        ("O50", AlmostCertain, Moderate, RiskLevel::E),
        ("O42", Likely, Moderate, RiskLevel::H),
        ("O29_1", Likely, Moderate, RiskLevel::H),
        ("O29_2", Likely, Moderate, RiskLevel::H),
        ("O29_3", Likely, Moderate, RiskLevel::H),
        ("O27", Likely, Major, RiskLevel::E),
        ("O43", Likely, Moderate, RiskLevel::H),
        ("O28", Likely, Moderate, RiskLevel::H),
        ("O46", Likely, Moderate, RiskLevel::H),
        ("O47_1", Possible, Insignificant, RiskLevel::L),
    ];
    for (id, l, c, level) in cells {
        let a = m.obstacle(id).unwrap_or_else(|| panic!("{id} missing")).assessment.clone().unwrap();
        assert_eq!((a.likelihood, a.consequence, a.computed), (l, c, level), "{id}");
    }
    let o48 = m.obstacle("O48").unwrap().assessment.clone().unwrap();
    assert_eq!(o48.history[0].computed, RiskLevel::E, "O48 before substitution");
    assert_eq!(o48.likelihood, Possible, "O48 after substitution");

    // Replay up to the substitution and watch what it does.
    let commands = common::case_study_2_commands();
    let at = commands
        .iter()
        .position(|c| matches!(c, Command::ApplyTactic { node, tactic, .. } if node == "O48" && tactic == "T3"))
        .expect("T3 applied to O48");
    let mut partial = Session::start("ddp", "DDP", MigrationType::IV, &repo).unwrap();
    for c in &commands[..at] {
        partial.execute(&repo, c.clone()).unwrap();
    }
    let mark = partial.audit().len();
    partial.execute(&repo, commands[at].clone()).unwrap();
    assert_eq!(partial.model().introduced("O48:T3"), ["O44", "O49"]);
    let steps: Vec<Step> = partial.audit()[mark..].iter().map(|e| e.step).collect();
    assert_eq!(steps.first(), Some(&Step::ResolveObstacles));
    assert!(steps[1..].iter().all(|s| *s == Step::IdentifyObstacles) && steps.len() == 3, "{steps:?}");

    let report = coverage_check(m, RiskLevel::H);
    assert!(report.passed(), "uncovered: {:?}, unassessed: {:?}", report.uncovered(), report.unassessed());
    let v = report.verdict("O47_1").unwrap();
    assert_eq!((v.status, v.reason), (CoverageStatus::Covered, Some(CoverageReason::Tactic)));
    assert_eq!(v.tactics, ["T41"]);
    match m.data("O47_1:T41") {
        Some(NodeData::Tactic(t)) => assert!(!t.note.trim().is_empty(), "T41 needs its note"),
        other => panic!("O47_1:T41 is {other:?}"),
    }
    format!("{} cells match, T3 on O48 raises O44 and O49 with a 2.3 -> 2.1 re-entry, final check covers all", cells.len())
}

fn repository_integrity() -> String {
    let repo = Repository::bundled();
    let counts = (repo.goals().len(), repo.obstacles().len(), repo.tactics().len(), repo.studies().len());
    assert_eq!(counts, (10, 67, 45, 112));
    let report = repo.integrity_check();
    assert!(report.errors.is_empty(), "{:?}", report.errors);

    let mut seen = BTreeSet::new();
    for cat in TacticCategory::ALL {
        let members: Vec<&str> =
            repo.tactics().iter().filter(|t| t.category == cat).map(|t| t.id.as_str()).collect();
        assert!(!members.is_empty(), "{cat} is empty");
        for id in members {
            assert!(seen.insert(id.to_string()), "{id} in two categories");
        }
    }
    let all: BTreeSet<String> = (1..=45).map(|n| format!("T{n}")).collect();
    assert_eq!(seen, all, "categories do not cover T1..T45");

    let universal: BTreeSet<&str> = repo.universal_tactics().map(|t| t.id.as_str()).collect();
    assert_eq!(universal, BTreeSet::from(["T1", "T2", "T3", "T36", "T37", "T38", "T41"]));
    assert!(report.warnings.iter().any(|w| w.starts_with("T22")), "T22 caveat missing");
    format!("10/67/45/112 entries, 0 errors, 7 categories partition T1..T45, {} warnings", report.warnings.len())
}

fn query_goldens() -> String {
    let repo = Repository::bundled();
    let tactics = |o: &str| -> BTreeSet<String> {
        let f = TacticFilter { obstacle: Some(o.into()), category: None, include_universal: false };
        repo.query_tactics(&f).unwrap().into_iter().map(|m| m.tactic.id.clone()).collect()
    };
    let set = |ids: &[&str]| ids.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    assert_eq!(tactics("O21"), set(&["T5", "T6", "T12"]));
    assert_eq!(tactics("O3"), set(&["T18", "T23"]));
    let g6: BTreeSet<String> = repo
        .query_obstacles(&ObstacleFilter { goal: Some("G6".into()), ..Default::default() })
        .unwrap()
        .into_iter()
        .map(|o| o.id.clone())
        .collect();
    assert!(set(&["O19", "O20", "O21", "O22", "O23"]).is_subset(&g6), "{g6:?}");
    let f = TacticFilter { obstacle: None, category: Some(TacticCategory::GoalMitigation), include_universal: true };
    let mitigation: BTreeSet<String> = repo.query_tactics(&f).unwrap().into_iter().map(|m| m.tactic.id.clone()).collect();
    assert_eq!(mitigation, set(&["T38", "T39", "T40"]));
    "O21 -> {T5,T6,T12}, O3 -> {T18,T23}, G6 covers O19..O23, goal mitigation = {T38,T39,T40}".into()
}

const OPS: usize = 60;

fn property_suites() -> String {
    let repo = Repository::bundled();

    for seed in 0..1000u64 {
        let m = cloudgate_core::testkit::model(seed, &repo);
        let text = format_model_text(&m).unwrap();
        let again = parse_model_text(&text, &repo).unwrap_or_else(|e| panic!("round trip seed {seed}: {e}"));
        assert_eq!(common::fingerprint(&again), common::fingerprint(&m), "round trip seed {seed}");
        assert_eq!(format_model_text(&again).unwrap(), text, "canonical text seed {seed}");
    }

    for seed in 0..200u64 {
        let s = cloudgate_core::testkit::session(seed, &repo, OPS);
        let m = s.model();
        match common::oracle::obstacle_suggestions(m, &repo) {
            None => assert!(s.suggest_obstacles(&repo).is_err(), "seed {seed}"),
            Some(expected) => {
                let got: Vec<String> = s.suggest_obstacles(&repo).unwrap().into_iter().map(|x| x.repo_id).collect();
                assert_eq!(got, expected, "obstacle suggestions seed {seed}");
            }
        }
        for node in m.ids_of_kind(NodeKind::Obstacle) {
            let got: Vec<String> =
                s.suggest_tactics(&repo, &node).unwrap().suggestions.into_iter().map(|x| x.repo_id).collect();
            assert_eq!(got, common::oracle::tactic_suggestions(m, &repo, &node), "tactic suggestions seed {seed} {node}");
        }

        let replayed = s.replay(&repo).unwrap();
        assert_eq!(replayed.model(), s.model(), "replay seed {seed}");
        assert_eq!(replayed.revision(), s.revision(), "replay revision seed {seed}");
    }

    let mut failures = 0;
    for seed in 0..200u64 {
        let mut rng = cloudgate_core::testkit::rng(seed);
        let mut s = Session::start("p", "properties", MigrationType::IV, &repo).unwrap();
        for _ in 0..OPS {
            let cmd = cloudgate_core::testkit::command(&mut rng, s.model());
            let before = s.clone();
            match s.execute(&repo, cmd) {
                Err(_) => {
                    failures += 1;
                    assert_eq!(s, before, "failed command changed the session, seed {seed}");
                }
                Ok(_) => assert_eq!(s.revision(), before.revision() + 1),
            }
            let v = s.model().validate_structure();
            assert!(!v.iter().any(|x| x.rule == ViolationRule::Acyclicity), "cycle at seed {seed}: {v:?}");
            assert!(v.is_empty(), "violation at seed {seed}: {v:?}");
        }
    }
    assert!(failures > 0, "no injected failure was exercised");
    format!(
        "1000 round trips, 200 suggestion sessions, 200 replays, {failures} injected failures left no trace, 12000 ops stayed acyclic"
    )
}
