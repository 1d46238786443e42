mod common;

use std::collections::BTreeSet;

use cloudgate_core::risk::{assess, reassess_after_tactic, CoverageReason, CoverageStatus, RiskError};
use cloudgate_core::{coverage_check, risk_of, testkit, Consequence, GoalModel, Likelihood, ObstacleSpec, RiskLevel};

/// Rows Rare..AlmostCertain, columns Insignificant..Catastrophic, as
/// printed in the source matrix (which lists AlmostCertain first).
const PRINTED: [&str; 5] = ["LLMHH", "LLMHE", "LMHEE", "MHHEV", "HHEEV"];

fn level(c: char) -> RiskLevel {
    match c {
        'L' => RiskLevel::L,
        'M' => RiskLevel::M,
        'H' => RiskLevel::H,
        'E' => RiskLevel::E,
        'V' => RiskLevel::V,
        _ => unreachable!(),
    }
}

#[test]
fn matrix_matches_printed_cells() {
    for (i, l) in Likelihood::ALL.into_iter().enumerate() {
        for (j, c) in Consequence::ALL.into_iter().enumerate() {
            let expected = level(PRINTED[i].chars().nth(j).unwrap());
            assert_eq!(risk_of(l, c), expected, "{l:?} x {c:?}");
        }
    }
}

#[test]
fn quoted_cells() {
    assert_eq!(risk_of(Likelihood::AlmostCertain, Consequence::Major), RiskLevel::E);
    assert_eq!(risk_of(Likelihood::Possible, Consequence::Insignificant), RiskLevel::L);
    assert_eq!(risk_of(Likelihood::Rare, Consequence::Catastrophic), RiskLevel::H);
    assert_eq!(risk_of(Likelihood::Likely, Consequence::Catastrophic), RiskLevel::V);
}

#[test]
fn matrix_is_monotone_in_both_axes() {
    for l in Likelihood::ALL {
        for c in Consequence::ALL {
            for l2 in Likelihood::ALL.into_iter().filter(|x| *x >= l) {
                assert!(risk_of(l2, c) >= risk_of(l, c));
            }
            for c2 in Consequence::ALL.into_iter().filter(|x| *x >= c) {
                assert!(risk_of(l, c2) >= risk_of(l, c));
            }
        }
    }
}

#[test]
fn level_spellings() {
    assert_eq!("high".parse::<RiskLevel>().unwrap(), RiskLevel::H);
    assert_eq!("extreme".parse::<RiskLevel>().unwrap(), RiskLevel::E);
    assert_eq!("very-extreme".parse::<RiskLevel>().unwrap(), RiskLevel::V);
    assert_eq!("almost-certain".parse::<Likelihood>().unwrap(), Likelihood::AlmostCertain);
    assert!("sometimes".parse::<Likelihood>().is_err());
}

fn one_obstacle() -> (GoalModel, String) {
    let repo = common::repo();
    let mut m = GoalModel::new("m", cloudgate_core::MigrationType::IV).unwrap();
    let g = m.add_goal(&repo, None, cloudgate_core::GoalPattern::Achieve, "x", Some("G6")).unwrap();
    let o = m.attach_obstacle(&repo, &g, ObstacleSpec::evidential("O21")).unwrap();
    (m, o)
}

#[test]
fn override_needs_a_note() {
    let (mut m, o) = one_obstacle();
    let err = assess(&mut m, &o, Likelihood::Possible, Consequence::Minor, " ", Some(RiskLevel::L)).unwrap_err();
    assert_eq!(err, RiskError::OverrideWithoutNote);
    assert!(m.obstacle(&o).unwrap().assessment.is_none());
    let a = assess(&mut m, &o, Likelihood::Possible, Consequence::Minor, "why", Some(RiskLevel::L)).unwrap();
    assert_eq!((a.computed, a.effective()), (RiskLevel::M, RiskLevel::L));
}

#[test]
fn history_grows_once_per_reassessment() {
    let repo = common::repo();
    let (mut m, o) = one_obstacle();
    assess(&mut m, &o, Likelihood::AlmostCertain, Consequence::Major, "", None).unwrap();
    let t = m.attach_tactic(&repo, &o, "T12", None, "").unwrap();
    let pairs = [
        (Likelihood::Likely, Consequence::Major),
        (Likelihood::Possible, Consequence::Moderate),
        (Likelihood::Unlikely, Consequence::Minor),
    ];
    for (n, (l, c)) in pairs.into_iter().enumerate() {
        let a = reassess_after_tactic(&mut m, &o, &t, l, c, "").unwrap();
        assert_eq!(a.history.len(), n + 1);
        assert_eq!(a.history.last().unwrap().motivating_tactic.as_deref(), Some("T12"));
    }
}

#[test]
fn reassessment_without_prior_fails() {
    let repo = common::repo();
    let (mut m, o) = one_obstacle();
    let t = m.attach_tactic(&repo, &o, "T12", None, "").unwrap();
    let err = reassess_after_tactic(&mut m, &o, &t, Likelihood::Rare, Consequence::Minor, "").unwrap_err();
    assert!(matches!(err, RiskError::NoPriorAssessment(_)));
}

#[test]
fn coverage_rules() {
    let repo = common::repo();
    let (mut m, o) = one_obstacle();
    let report = coverage_check(&m, RiskLevel::H);
    assert_eq!(report.verdict(&o).unwrap().status, CoverageStatus::Unassessed);
    assert!(!report.passed());

    assess(&mut m, &o, Likelihood::AlmostCertain, Consequence::Major, "", None).unwrap();
    assert_eq!(coverage_check(&m, RiskLevel::H).uncovered(), vec![o.as_str()]);
    assert!(coverage_check(&m, RiskLevel::V).passed());

    m.attach_tactic(&repo, &o, "T41", None, "accepted by the product owner").unwrap();
    let v = coverage_check(&m, RiskLevel::H);
    assert_eq!(v.verdict(&o).unwrap().reason, Some(CoverageReason::Tactic));
}

#[test]
fn parents_are_covered_through_their_children() {
    let repo = common::repo();
    let (mut m, o) = one_obstacle();
    let a = m.attach_obstacle(&repo, &o, ObstacleSpec::domain("a")).unwrap();
    let b = m.attach_obstacle(&repo, &o, ObstacleSpec::domain("b")).unwrap();
    assess(&mut m, &a, Likelihood::Rare, Consequence::Minor, "", None).unwrap();
    let r = coverage_check(&m, RiskLevel::H);
    assert_eq!(r.verdict(&b).unwrap().status, CoverageStatus::Unassessed);
    assert_eq!(r.verdict(&o).unwrap().status, CoverageStatus::Unassessed);

    assess(&mut m, &b, Likelihood::Likely, Consequence::Major, "", None).unwrap();
    let r = coverage_check(&m, RiskLevel::H);
    assert_eq!(r.verdict(&o).unwrap().status, CoverageStatus::Uncovered);

    m.attach_tactic(&repo, &b, "T12", None, "").unwrap();
    let r = coverage_check(&m, RiskLevel::H);
    assert_eq!(r.verdict(&o).unwrap().reason, Some(CoverageReason::Children));
    assert!(r.passed());
}

/// Obstacles that are uncovered because their own rating reaches the
/// threshold and nothing resolves them.
fn risk_driven_uncovered(m: &GoalModel, t: RiskLevel) -> BTreeSet<String> {
    coverage_check(m, t)
        .verdicts
        .into_iter()
        .filter(|v| v.status == CoverageStatus::Uncovered && v.tactics.is_empty())
        .filter(|v| v.effective_risk.is_some_and(|r| r >= t))
        .map(|v| v.node)
        .collect()
}

fn assert_threshold_monotone(m: &GoalModel) {
    for pair in RiskLevel::ALL.windows(2) {
        let low = risk_driven_uncovered(m, pair[0]);
        let high = risk_driven_uncovered(m, pair[1]);
        assert!(high.is_subset(&low), "{:?} -> {:?}: {high:?} not within {low:?}", pair[0], pair[1]);
    }
}

#[test]
fn raising_the_threshold_never_adds_uncovered_obstacles() {
    let repo = common::repo();
    for f in ["case-study-1.gom", "case-study-1-resolved.gom", "s3-database.gom"] {
        assert_threshold_monotone(&common::load_gom(f, &repo));
    }
    assert_threshold_monotone(common::case_study_2(&repo).model());
    for seed in 0..200 {
        assert_threshold_monotone(&testkit::model(seed, &repo));
    }
}
