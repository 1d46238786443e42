//! Brute-force re-derivations used as test oracles. Written against the
//! public model API only, without calling the code under test.

use std::collections::{BTreeSet, HashSet};

use cloudgate_core::model::{NodeData, ObstacleOrigin};
use cloudgate_core::{GoalModel, Repository};

fn num(id: &str) -> u32 {
    id[1..].parse().unwrap()
}

fn goal_refs_above(m: &GoalModel, id: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut cur = m.parent(id);
    while let Some(p) = cur {
        if let Some(r) = m.goal(&p).and_then(|g| g.repo_ref.clone()) {
            out.insert(r);
        }
        cur = m.parent(&p);
    }
    out
}

/// Ordered repository ids the obstacle suggestions should list, or `None`
/// when the model has no repository-linked goal.
pub fn obstacle_suggestions(m: &GoalModel, repo: &Repository) -> Option<Vec<String>> {
    let views = m.views();
    let linked: BTreeSet<String> = views
        .iter()
        .filter_map(|v| match &v.data {
            NodeData::Goal(g) => g.repo_ref.clone(),
            _ => None,
        })
        .collect();
    if linked.is_empty() {
        return None;
    }
    let mut rows = Vec::new();
    for o in repo.obstacles() {
        if !o.migration_types.contains(&m.migration_type()) {
            continue;
        }
        let matched: BTreeSet<String> = o.impacted_goals.iter().filter(|g| linked.contains(*g)).cloned().collect();
        if matched.is_empty() {
            continue;
        }
        let taken = views.iter().any(|v| {
            matches!(&v.data, NodeData::Obstacle(n)
                if matches!(&n.origin, ObstacleOrigin::Evidential { obstacle } if *obstacle == o.id))
                && !goal_refs_above(m, &v.id).is_disjoint(&matched)
        });
        if !taken {
            rows.push((matched.len(), o.source_studies.len(), o.id.clone()));
        }
    }
    rows.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)).then(num(&a.2).cmp(&num(&b.2))));
    Some(rows.into_iter().map(|r| r.2).collect())
}

/// Ordered tactic ids suggested for an obstacle node.
pub fn tactic_suggestions(m: &GoalModel, repo: &Repository, node: &str) -> Vec<String> {
    let mut anchor = None;
    let mut cur = Some(node.to_string());
    while let Some(id) = cur {
        let Some(o) = m.obstacle(&id) else { break };
        let found = match &o.origin {
            ObstacleOrigin::Evidential { obstacle } => Some(obstacle.clone()),
            ObstacleOrigin::Domain { ancestor } => ancestor.clone(),
        };
        if found.is_some() {
            anchor = found;
            break;
        }
        cur = m.parent(&id);
    }
    let attached: HashSet<String> =
        m.children(node).iter().filter_map(|c| m.tactic(c)).map(|t| t.repo_ref.clone()).collect();
    let rank = |ids: &mut Vec<(usize, String)>| {
        ids.sort_by(|a, b| b.0.cmp(&a.0).then(num(&a.1).cmp(&num(&b.1))));
    };
    let mut specific: Vec<(usize, String)> = repo
        .tactics()
        .iter()
        .filter(|t| anchor.as_ref().is_some_and(|a| t.related_obstacles.contains(a)) && !attached.contains(&t.id))
        .map(|t| (t.source_studies.len(), t.id.clone()))
        .collect();
    let mut universal: Vec<(usize, String)> = repo
        .tactics()
        .iter()
        .filter(|t| t.universal && !attached.contains(&t.id))
        .map(|t| (t.source_studies.len(), t.id.clone()))
        .collect();
    rank(&mut specific);
    rank(&mut universal);
    specific.into_iter().chain(universal).map(|r| r.1).collect()
}

/// Number of nodes a removal of `id` must take with it: children and
/// introduced obstacles, transitively.
pub fn owned_count(m: &GoalModel, id: &str) -> usize {
    let mut seen = BTreeSet::new();
    let mut stack = vec![id.to_string()];
    while let Some(n) = stack.pop() {
        if seen.insert(n.clone()) {
            stack.extend(m.children(&n));
            stack.extend(m.introduced(&n));
        }
    }
    seen.len()
}

/// What a `.gom` text declares, found by indentation alone.
#[derive(Debug, Default, PartialEq)]
pub struct Census {
    pub goals: usize,
    pub roots: usize,
    pub obstacles: usize,
    pub obstructions: usize,
}

pub fn census(text: &str) -> Census {
    let mut c = Census::default();
    // Keyword of the innermost open declaration at each depth.
    let mut open: Vec<&str> = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim_start();
        if trimmed.starts_with('#') || trimmed.is_empty() || trimmed == "}" {
            continue;
        }
        let depth = (line.len() - trimmed.len()) / 2;
        let keyword = trimmed.split_whitespace().next().unwrap();
        open.truncate(depth);
        match keyword {
            "goal" => {
                c.goals += 1;
                c.roots += usize::from(depth == 0);
            }
            "obstacle" => {
                c.obstacles += 1;
                c.obstructions += usize::from(open.last() == Some(&"goal"));
            }
            _ => {}
        }
        open.push(keyword);
    }
    c
}
