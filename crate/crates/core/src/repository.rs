//! The evidential repository: goals, obstacles, resolution tactics and the
//! studies they were distilled from.
//!
//! The catalogue is immutable once loaded. A canonical dataset ships inside
//! the crate (`data/repository.json`); alternative datasets can be loaded
//! from disk as long as they pass [`Repository::integrity_check`].

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const BUNDLED_DATASET: &str = include_str!("../data/repository.json");

pub const GOAL_COUNT: usize = 10;
pub const OBSTACLE_COUNT: usize = 67;
pub const TACTIC_COUNT: usize = 45;
pub const STUDY_COUNT: usize = 112;

/// The five ways a legacy system can be made cloud-enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MigrationType {
    /// Business logic on IaaS, data kept on premises.
    I,
    /// Components replaced by SaaS services.
    II,
    /// Database moved to a cloud data store.
    III,
    /// Database converted to a cloud database solution.
    IV,
    /// Whole stack encapsulated in virtual machines.
    V,
}

impl MigrationType {
    pub const ALL: [MigrationType; 5] = [Self::I, Self::II, Self::III, Self::IV, Self::V];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::I => "I",
            Self::II => "II",
            Self::III => "III",
            Self::IV => "IV",
            Self::V => "V",
        }
    }
}

impl fmt::Display for MigrationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MigrationType {
    type Err = RepositoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| RepositoryError::UnknownMigrationType(s.to_string()))
    }
}

/// Resolution tactic categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TacticCategory {
    GoalServiceMigrationSubstitution,
    ObstaclePrevention,
    ObstacleReduction,
    GoalWeakening,
    GoalRestoration,
    GoalMitigation,
    DoNothing,
}

impl TacticCategory {
    pub const ALL: [TacticCategory; 7] = [
        Self::GoalServiceMigrationSubstitution,
        Self::ObstaclePrevention,
        Self::ObstacleReduction,
        Self::GoalWeakening,
        Self::GoalRestoration,
        Self::GoalMitigation,
        Self::DoNothing,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::GoalServiceMigrationSubstitution => "GoalServiceMigrationSubstitution",
            Self::ObstaclePrevention => "ObstaclePrevention",
            Self::ObstacleReduction => "ObstacleReduction",
            Self::GoalWeakening => "GoalWeakening",
            Self::GoalRestoration => "GoalRestoration",
            Self::GoalMitigation => "GoalMitigation",
            Self::DoNothing => "DoNothing",
        }
    }
}

impl fmt::Display for TacticCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TacticCategory {
    type Err = RepositoryError;

    /// Accepts the canonical name or a case-insensitive kebab/snake spelling
    /// (`goal-mitigation`, `goal_mitigation`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let squashed: String = s
            .chars()
            .filter(|c| *c != '-' && *c != '_')
            .collect::<String>()
            .to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|c| c.as_str().to_ascii_lowercase() == squashed)
            .ok_or_else(|| RepositoryError::UnknownCategory(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalEntry {
    pub id: String,
    pub name: String,
    pub definition: String,
    pub source_studies: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub data_quality_notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleEntry {
    pub id: String,
    pub name: String,
    pub definition: String,
    pub impacted_goals: Vec<String>,
    pub migration_types: Vec<MigrationType>,
    pub source_studies: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub data_quality_notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TacticEntry {
    pub id: String,
    pub name: String,
    pub definition: String,
    pub related_obstacles: Vec<String>,
    /// Applicable to every obstacle.
    pub universal: bool,
    pub category: TacticCategory,
    pub source_studies: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub data_quality_notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyEntry {
    pub id: String,
    pub citation: String,
    pub year: i32,
}

/// Kind of catalogue identifier, told apart by its prefix letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Goal,
    Obstacle,
    Tactic,
    Study,
}

impl EntryKind {
    fn max(self) -> u32 {
        match self {
            Self::Goal => GOAL_COUNT as u32,
            Self::Obstacle => OBSTACLE_COUNT as u32,
            Self::Tactic => TACTIC_COUNT as u32,
            Self::Study => STUDY_COUNT as u32,
        }
    }

    fn catalogue(self) -> &'static str {
        match self {
            Self::Goal => "goals",
            Self::Obstacle => "obstacles",
            Self::Tactic => "tactics",
            Self::Study => "studies",
        }
    }
}

/// Splits a canonical identifier (`O21`) into kind and number.
///
/// Canonical means uppercase prefix, no leading zeros, number >= 1. Range
/// checks against the catalogue sizes are left to the caller.
pub fn parse_repo_id(id: &str) -> Option<(EntryKind, u32)> {
    let mut chars = id.chars();
    let kind = match chars.next()? {
        'G' => EntryKind::Goal,
        'O' => EntryKind::Obstacle,
        'T' => EntryKind::Tactic,
        'S' => EntryKind::Study,
        _ => return None,
    };
    let digits = chars.as_str();
    if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let n: u32 = digits.parse().ok()?;
    Some((kind, n))
}

/// Numeric suffix of an identifier, used for natural ordering.
pub fn id_number(id: &str) -> u32 {
    parse_repo_id(id).map(|(_, n)| n).unwrap_or(u32::MAX)
}

/// A borrowed catalogue entry of any kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Entry<'a> {
    Goal(&'a GoalEntry),
    Obstacle(&'a ObstacleEntry),
    Tactic(&'a TacticEntry),
    Study(&'a StudyEntry),
}

impl Entry<'_> {
    pub fn id(&self) -> &str {
        match self {
            Entry::Goal(e) => &e.id,
            Entry::Obstacle(e) => &e.id,
            Entry::Tactic(e) => &e.id,
            Entry::Study(e) => &e.id,
        }
    }
}

/// Where to load a dataset from.
#[derive(Debug, Clone, Default)]
pub enum DatasetSource {
    #[default]
    Bundled,
    Path(PathBuf),
}

#[derive(Debug, Error)]
pub enum RepositoryError {
    #[error("failed to read dataset {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset schema violation at {record}: {message}")]
    Schema { record: String, message: String },
    #[error("dataset integrity check failed: {}", .0.first().map(ToString::to_string).unwrap_or_default())]
    Integrity(Vec<IntegrityIssue>),
    #[error("malformed identifier `{0}`")]
    MalformedId(String),
    #[error("no catalogue entry `{0}`")]
    NotFound(String),
    #[error("unknown goal `{0}`")]
    UnknownGoal(String),
    #[error("unknown obstacle `{0}`")]
    UnknownObstacle(String),
    #[error("unknown tactic `{0}`")]
    UnknownTactic(String),
    #[error("unknown migration type `{0}` (expected I, II, III, IV or V)")]
    UnknownMigrationType(String),
    #[error("unknown tactic category `{0}`")]
    UnknownCategory(String),
}

/// One broken repository invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "issue", rename_all = "snake_case")]
pub enum IntegrityIssue {
    CountMismatch { catalogue: String, expected: usize, actual: usize },
    MalformedId { catalogue: String, id: String },
    DuplicateId { id: String },
    DuplicateName { id: String, name: String },
    DanglingReference { record: String, field: String, missing: String },
    EmptySet { record: String, field: String },
    DuplicateSetMember { record: String, field: String, member: String },
    UniversalMismatch { record: String, message: String },
    YearOutOfRange { record: String, year: i32 },
}

impl fmt::Display for IntegrityIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::CountMismatch { catalogue, expected, actual } => {
                write!(f, "{catalogue}: expected {expected} entries, found {actual}")
            }
            Self::MalformedId { catalogue, id } => write!(f, "{catalogue}: malformed id `{id}`"),
            Self::DuplicateId { id } => write!(f, "duplicate id `{id}`"),
            Self::DuplicateName { id, name } => write!(f, "{id}: duplicate goal name `{name}`"),
            Self::DanglingReference { record, field, missing } => {
                write!(f, "{record}.{field}: dangling reference to `{missing}`")
            }
            Self::EmptySet { record, field } => write!(f, "{record}.{field}: must not be empty"),
            Self::DuplicateSetMember { record, field, member } => {
                write!(f, "{record}.{field}: `{member}` listed twice")
            }
            Self::UniversalMismatch { record, message } => write!(f, "{record}: {message}"),
            Self::YearOutOfRange { record, year } => {
                write!(f, "{record}: year {year} outside 2006-2017")
            }
        }
    }
}

/// Result of [`Repository::integrity_check`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IntegrityReport {
    pub errors: Vec<IntegrityIssue>,
    /// Transcription caveats, one line per data quality note.
    pub warnings: Vec<String>,
}

impl IntegrityReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObstacleFilter {
    pub goal: Option<String>,
    pub migration_type: Option<MigrationType>,
    pub text: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TacticFilter {
    pub obstacle: Option<String>,
    pub category: Option<TacticCategory>,
    pub include_universal: bool,
}

/// A tactic returned by [`Repository::query_tactics`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TacticMatch<'a> {
    pub tactic: &'a TacticEntry,
    /// Included because it applies to every obstacle rather than through a
    /// catalogued relation.
    pub via_universal: bool,
}

#[derive(Serialize)]
struct DatasetOut<'a> {
    version: &'a str,
    goals: &'a [GoalEntry],
    obstacles: &'a [ObstacleEntry],
    tactics: &'a [TacticEntry],
    studies: &'a [StudyEntry],
}

/// The immutable, cross-linked catalogue.
#[derive(Debug, Clone)]
pub struct Repository {
    version: String,
    goals: Vec<GoalEntry>,
    obstacles: Vec<ObstacleEntry>,
    tactics: Vec<TacticEntry>,
    studies: Vec<StudyEntry>,
    index: HashMap<String, (EntryKind, usize)>,
}

impl PartialEq for Repository {
    fn eq(&self, other: &Self) -> bool {
        self.version == other.version
            && self.goals == other.goals
            && self.obstacles == other.obstacles
            && self.tactics == other.tactics
            && self.studies == other.studies
    }
}

/// Loads and validates a dataset.
pub fn load_repository(source: &DatasetSource) -> Result<Repository, RepositoryError> {
    match source {
        DatasetSource::Bundled => Repository::from_json_str(BUNDLED_DATASET),
        DatasetSource::Path(path) => Repository::from_path(path),
    }
}

impl Repository {
    /// The canonical dataset compiled into the crate.
    pub fn bundled() -> Repository {
        Repository::from_json_str(BUNDLED_DATASET).expect("bundled dataset is valid")
    }

    /// Raw bytes of the bundled dataset.
    pub fn bundled_json() -> &'static str {
        BUNDLED_DATASET
    }

    pub fn from_path(path: &Path) -> Result<Repository, RepositoryError> {
        let text = std::fs::read_to_string(path).map_err(|source| RepositoryError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Repository::from_json_str(&text)
    }

    /// Parses and validates a dataset document.
    pub fn from_json_str(text: &str) -> Result<Repository, RepositoryError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| RepositoryError::Schema {
            record: "<document>".into(),
            message: e.to_string(),
        })?;
        let obj = value.as_object().ok_or_else(|| RepositoryError::Schema {
            record: "<document>".into(),
            message: "top level must be an object".into(),
        })?;
        for key in obj.keys() {
            if !matches!(key.as_str(), "version" | "goals" | "obstacles" | "tactics" | "studies") {
                return Err(RepositoryError::Schema {
                    record: "<document>".into(),
                    message: format!("unknown field `{key}`"),
                });
            }
        }
        let version = obj
            .get("version")
            .and_then(|v| v.as_str())
            .ok_or_else(|| RepositoryError::Schema {
                record: "<document>".into(),
                message: "missing string field `version`".into(),
            })?
            .to_string();
        let repo = Repository::from_catalogues(
            version,
            section(obj, "goals")?,
            section(obj, "obstacles")?,
            section(obj, "tactics")?,
            section(obj, "studies")?,
        );
        let report = repo.integrity_check();
        if !report.errors.is_empty() {
            return Err(RepositoryError::Integrity(report.errors));
        }
        Ok(repo)
    }

    /// Builds a repository without validating it. Use
    /// [`Repository::integrity_check`] to inspect the result.
    pub fn from_catalogues(
        version: String,
        goals: Vec<GoalEntry>,
        obstacles: Vec<ObstacleEntry>,
        tactics: Vec<TacticEntry>,
        studies: Vec<StudyEntry>,
    ) -> Repository {
        let mut index = HashMap::new();
        let kinds = [
            (EntryKind::Goal, goals.iter().map(|e| e.id.clone()).collect::<Vec<_>>()),
            (EntryKind::Obstacle, obstacles.iter().map(|e| e.id.clone()).collect()),
            (EntryKind::Tactic, tactics.iter().map(|e| e.id.clone()).collect()),
            (EntryKind::Study, studies.iter().map(|e| e.id.clone()).collect()),
        ];
        for (kind, ids) in kinds {
            for (pos, id) in ids.into_iter().enumerate() {
                index.entry(id).or_insert((kind, pos));
            }
        }
        Repository { version, goals, obstacles, tactics, studies, index }
    }

    /// Decomposes the repository back into its catalogues.
    pub fn into_catalogues(
        self,
    ) -> (String, Vec<GoalEntry>, Vec<ObstacleEntry>, Vec<TacticEntry>, Vec<StudyEntry>) {
        (self.version, self.goals, self.obstacles, self.tactics, self.studies)
    }

    pub fn to_json_string(&self) -> String {
        let out = DatasetOut {
            version: &self.version,
            goals: &self.goals,
            obstacles: &self.obstacles,
            tactics: &self.tactics,
            studies: &self.studies,
        };
        let mut s = serde_json::to_string_pretty(&out).expect("dataset serializes");
        s.push('\n');
        s
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn goals(&self) -> &[GoalEntry] {
        &self.goals
    }

    pub fn obstacles(&self) -> &[ObstacleEntry] {
        &self.obstacles
    }

    pub fn tactics(&self) -> &[TacticEntry] {
        &self.tactics
    }

    pub fn studies(&self) -> &[StudyEntry] {
        &self.studies
    }

    pub fn goal(&self, id: &str) -> Option<&GoalEntry> {
        match self.index.get(id) {
            Some((EntryKind::Goal, pos)) => self.goals.get(*pos),
            _ => None,
        }
    }

    pub fn obstacle(&self, id: &str) -> Option<&ObstacleEntry> {
        match self.index.get(id) {
            Some((EntryKind::Obstacle, pos)) => self.obstacles.get(*pos),
            _ => None,
        }
    }

    pub fn tactic(&self, id: &str) -> Option<&TacticEntry> {
        match self.index.get(id) {
            Some((EntryKind::Tactic, pos)) => self.tactics.get(*pos),
            _ => None,
        }
    }

    pub fn study(&self, id: &str) -> Option<&StudyEntry> {
        match self.index.get(id) {
            Some((EntryKind::Study, pos)) => self.studies.get(*pos),
            _ => None,
        }
    }

    /// Exact, case-sensitive lookup by canonical id.
    pub fn get_entry(&self, id: &str) -> Result<Entry<'_>, RepositoryError> {
        if parse_repo_id(id).is_none() {
            return Err(RepositoryError::MalformedId(id.to_string()));
        }
        let entry = match self.index.get(id) {
            Some((EntryKind::Goal, pos)) => self.goals.get(*pos).map(Entry::Goal),
            Some((EntryKind::Obstacle, pos)) => self.obstacles.get(*pos).map(Entry::Obstacle),
            Some((EntryKind::Tactic, pos)) => self.tactics.get(*pos).map(Entry::Tactic),
            Some((EntryKind::Study, pos)) => self.studies.get(*pos).map(Entry::Study),
            None => None,
        };
        entry.ok_or_else(|| RepositoryError::NotFound(id.to_string()))
    }

    /// Obstacles matching every supplied clause, most-cited first.
    pub fn query_obstacles(&self, filter: &ObstacleFilter) -> Result<Vec<&ObstacleEntry>, RepositoryError> {
        if let Some(goal) = &filter.goal {
            if self.goal(goal).is_none() {
                return Err(RepositoryError::UnknownGoal(goal.clone()));
            }
        }
        let needle = filter.text.as_ref().map(|t| t.to_lowercase());
        let mut out: Vec<&ObstacleEntry> = self
            .obstacles
            .iter()
            .filter(|o| filter.goal.as_ref().is_none_or(|g| o.impacted_goals.contains(g)))
            .filter(|o| filter.migration_type.is_none_or(|t| o.migration_types.contains(&t)))
            .filter(|o| {
                needle.as_ref().is_none_or(|n| {
                    o.name.to_lowercase().contains(n) || o.definition.to_lowercase().contains(n)
                })
            })
            .collect();
        out.sort_by_key(|o| (std::cmp::Reverse(o.source_studies.len()), id_number(&o.id)));
        Ok(out)
    }

    /// Tactics matching the filter, most-cited first.
    ///
    /// Without an obstacle clause every tactic is a candidate. With one, the
    /// candidates are the tactics catalogued against that obstacle plus, when
    /// `include_universal` is set, the universal tactics.
    pub fn query_tactics(&self, filter: &TacticFilter) -> Result<Vec<TacticMatch<'_>>, RepositoryError> {
        if let Some(o) = &filter.obstacle {
            if self.obstacle(o).is_none() {
                return Err(RepositoryError::UnknownObstacle(o.clone()));
            }
        }
        let mut out: Vec<TacticMatch<'_>> = self
            .tactics
            .iter()
            .filter_map(|t| match &filter.obstacle {
                None => Some(TacticMatch { tactic: t, via_universal: false }),
                Some(o) if t.related_obstacles.contains(o) => Some(TacticMatch { tactic: t, via_universal: false }),
                Some(_) if filter.include_universal && t.universal => {
                    Some(TacticMatch { tactic: t, via_universal: true })
                }
                Some(_) => None,
            })
            .filter(|m| filter.category.is_none_or(|c| m.tactic.category == c))
            .collect();
        out.sort_by_key(|m| (std::cmp::Reverse(m.tactic.source_studies.len()), id_number(&m.tactic.id)));
        Ok(out)
    }

    /// Tactics flagged as applicable to every obstacle.
    pub fn universal_tactics(&self) -> impl Iterator<Item = &TacticEntry> {
        self.tactics.iter().filter(|t| t.universal)
    }

    /// Checks every catalogue invariant. Never fails; problems are reported.
    pub fn integrity_check(&self) -> IntegrityReport {
        let mut errors = Vec::new();
        let counts = [
            ("goals", GOAL_COUNT, self.goals.len()),
            ("obstacles", OBSTACLE_COUNT, self.obstacles.len()),
            ("tactics", TACTIC_COUNT, self.tactics.len()),
            ("studies", STUDY_COUNT, self.studies.len()),
        ];
        for (catalogue, expected, actual) in counts {
            if expected != actual {
                errors.push(IntegrityIssue::CountMismatch { catalogue: catalogue.into(), expected, actual });
            }
        }

        let mut seen = BTreeSet::new();
        let all_ids = self
            .goals
            .iter()
            .map(|e| (EntryKind::Goal, &e.id))
            .chain(self.obstacles.iter().map(|e| (EntryKind::Obstacle, &e.id)))
            .chain(self.tactics.iter().map(|e| (EntryKind::Tactic, &e.id)))
            .chain(self.studies.iter().map(|e| (EntryKind::Study, &e.id)));
        for (kind, id) in all_ids {
            match parse_repo_id(id) {
                Some((k, n)) if k == kind && n <= kind.max() => {}
                _ => errors.push(IntegrityIssue::MalformedId { catalogue: kind.catalogue().into(), id: id.clone() }),
            }
            if !seen.insert(id.as_str()) {
                errors.push(IntegrityIssue::DuplicateId { id: id.clone() });
            }
        }

        let mut names = BTreeSet::new();
        for g in &self.goals {
            if !names.insert(g.name.as_str()) {
                errors.push(IntegrityIssue::DuplicateName { id: g.id.clone(), name: g.name.clone() });
            }
            self.check_refs(&mut errors, &g.id, "source_studies", &g.source_studies, EntryKind::Study);
        }
        for o in &self.obstacles {
            if o.impacted_goals.is_empty() {
                errors.push(IntegrityIssue::EmptySet { record: o.id.clone(), field: "impacted_goals".into() });
            }
            if o.migration_types.is_empty() {
                errors.push(IntegrityIssue::EmptySet { record: o.id.clone(), field: "migration_types".into() });
            }
            let mut types = BTreeSet::new();
            for t in &o.migration_types {
                if !types.insert(*t) {
                    errors.push(IntegrityIssue::DuplicateSetMember {
                        record: o.id.clone(),
                        field: "migration_types".into(),
                        member: t.to_string(),
                    });
                }
            }
            self.check_refs(&mut errors, &o.id, "impacted_goals", &o.impacted_goals, EntryKind::Goal);
            self.check_refs(&mut errors, &o.id, "source_studies", &o.source_studies, EntryKind::Study);
        }
        for t in &self.tactics {
            if t.universal && !t.related_obstacles.is_empty() {
                errors.push(IntegrityIssue::UniversalMismatch {
                    record: t.id.clone(),
                    message: "universal tactic lists specific obstacles".into(),
                });
            }
            if t.category == TacticCategory::DoNothing && !t.universal {
                errors.push(IntegrityIssue::UniversalMismatch {
                    record: t.id.clone(),
                    message: "do-nothing tactic must be universal".into(),
                });
            }
            self.check_refs(&mut errors, &t.id, "related_obstacles", &t.related_obstacles, EntryKind::Obstacle);
            self.check_refs(&mut errors, &t.id, "source_studies", &t.source_studies, EntryKind::Study);
        }
        for s in &self.studies {
            if !(2006..=2017).contains(&s.year) {
                errors.push(IntegrityIssue::YearOutOfRange { record: s.id.clone(), year: s.year });
            }
        }

        let notes = self
            .goals
            .iter()
            .map(|e| (&e.id, &e.data_quality_notes))
            .chain(self.obstacles.iter().map(|e| (&e.id, &e.data_quality_notes)))
            .chain(self.tactics.iter().map(|e| (&e.id, &e.data_quality_notes)));
        let warnings = notes
            .flat_map(|(id, notes)| notes.iter().map(move |n| format!("{id}: {n}")))
            .collect();

        IntegrityReport { errors, warnings }
    }

    fn check_refs(
        &self,
        errors: &mut Vec<IntegrityIssue>,
        record: &str,
        field: &str,
        refs: &[String],
        kind: EntryKind,
    ) {
        let mut seen = BTreeSet::new();
        for r in refs {
            if !seen.insert(r.as_str()) {
                errors.push(IntegrityIssue::DuplicateSetMember {
                    record: record.into(),
                    field: field.into(),
                    member: r.clone(),
                });
            }
            let resolves = matches!(self.index.get(r), Some((k, _)) if *k == kind);
            if !resolves {
                errors.push(IntegrityIssue::DanglingReference {
                    record: record.into(),
                    field: field.into(),
                    missing: r.clone(),
                });
            }
        }
    }
}

fn section<T: serde::de::DeserializeOwned>(
    obj: &serde_json::Map<String, serde_json::Value>,
    key: &str,
) -> Result<Vec<T>, RepositoryError> {
    let items = obj.get(key).and_then(|v| v.as_array()).ok_or_else(|| RepositoryError::Schema {
        record: "<document>".into(),
        message: format!("missing array field `{key}`"),
    })?;
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            T::deserialize(item).map_err(|e| {
                let id = item.get("id").and_then(|v| v.as_str()).unwrap_or("?");
                RepositoryError::Schema { record: format!("{key}[{i}] ({id})"), message: e.to_string() }
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids<'a>(it: impl IntoIterator<Item = &'a str>) -> BTreeSet<&'a str> {
        it.into_iter().collect()
    }

    #[test]
    fn bundled_counts() {
        let repo = Repository::bundled();
        assert_eq!(
            (repo.goals().len(), repo.obstacles().len(), repo.tactics().len(), repo.studies().len()),
            (10, 67, 45, 112)
        );
        assert!(repo.integrity_check().is_clean());
    }

    #[test]
    fn get_entry_examples() {
        let repo = Repository::bundled();
        match repo.get_entry("O1").unwrap() {
            Entry::Obstacle(o) => {
                assert_eq!(o.name, "Cloud outage");
                assert!(o.definition.starts_with("A cloud service may suffer from outages"));
            }
            other => panic!("unexpected {other:?}"),
        }
        match repo.get_entry("T41").unwrap() {
            Entry::Tactic(t) => {
                assert_eq!(t.name, "Do nothing");
                assert!(t.definition.starts_with("Leave obstacle unresolved"));
                assert_eq!(t.category, TacticCategory::DoNothing);
                assert!(t.universal);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(repo.get_entry("G11"), Err(RepositoryError::NotFound(_))));
        assert!(matches!(repo.get_entry("o1"), Err(RepositoryError::MalformedId(_))));
        assert!(matches!(repo.get_entry("O01"), Err(RepositoryError::MalformedId(_))));
    }

    #[test]
    fn obstacle_queries() {
        let repo = Repository::bundled();
        let g6 = repo
            .query_obstacles(&ObstacleFilter { goal: Some("G6".into()), ..Default::default() })
            .unwrap();
        let got = ids(g6.iter().map(|o| o.id.as_str()));
        assert!(ids(["O19", "O20", "O21", "O22", "O23"]).is_subset(&got));

        let t2 = repo
            .query_obstacles(&ObstacleFilter { migration_type: Some(MigrationType::II), ..Default::default() })
            .unwrap();
        assert!(t2.iter().any(|o| o.id == "O5"));
        let t1 = repo
            .query_obstacles(&ObstacleFilter { migration_type: Some(MigrationType::I), ..Default::default() })
            .unwrap();
        assert!(!t1.iter().any(|o| o.id == "O5"));

        let none = repo
            .query_obstacles(&ObstacleFilter {
                goal: Some("G6".into()),
                text: Some("zzz-no-match".into()),
                ..Default::default()
            })
            .unwrap();
        assert!(none.is_empty());

        assert!(matches!(
            repo.query_obstacles(&ObstacleFilter { goal: Some("G11".into()), ..Default::default() }),
            Err(RepositoryError::UnknownGoal(_))
        ));
    }

    #[test]
    fn text_filter_is_case_insensitive() {
        let repo = Repository::bundled();
        let hits = repo
            .query_obstacles(&ObstacleFilter { text: Some("CLOUD OUTAGE".into()), ..Default::default() })
            .unwrap();
        assert!(hits.iter().any(|o| o.id == "O1"));
    }

    #[test]
    fn tactic_queries() {
        let repo = Repository::bundled();
        let specific = |o: &str| {
            repo.query_tactics(&TacticFilter { obstacle: Some(o.into()), ..Default::default() })
                .unwrap()
                .into_iter()
                .map(|m| m.tactic.id.clone())
                .collect::<BTreeSet<_>>()
        };
        assert_eq!(specific("O21"), ["T5", "T6", "T12"].map(String::from).into());
        assert_eq!(specific("O3"), ["T18", "T23"].map(String::from).into());

        let mitigation = repo
            .query_tactics(&TacticFilter { category: Some(TacticCategory::GoalMitigation), ..Default::default() })
            .unwrap();
        let got: BTreeSet<_> = mitigation.iter().map(|m| m.tactic.id.as_str()).collect();
        assert_eq!(got, ids(["T38", "T39", "T40"]));

        let with_universal = repo
            .query_tactics(&TacticFilter { obstacle: Some("O21".into()), include_universal: true, ..Default::default() })
            .unwrap();
        assert_eq!(with_universal.len(), 3 + 7);
        assert_eq!(with_universal.iter().filter(|m| m.via_universal).count(), 7);

        assert!(matches!(
            repo.query_tactics(&TacticFilter { obstacle: Some("O99".into()), ..Default::default() }),
            Err(RepositoryError::UnknownObstacle(_))
        ));
    }

    #[test]
    fn ordering_prefers_more_studies_then_lower_id() {
        let repo = Repository::bundled();
        let all = repo.query_obstacles(&ObstacleFilter::default()).unwrap();
        for pair in all.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            assert!(
                a.source_studies.len() > b.source_studies.len()
                    || (a.source_studies.len() == b.source_studies.len() && id_number(&a.id) < id_number(&b.id))
            );
        }
    }

    #[test]
    fn dangling_tactic_relation_is_rejected() {
        let (v, g, o, mut t, s) = Repository::bundled().into_catalogues();
        t[4].related_obstacles.push("O99".into());
        let repo = Repository::from_catalogues(v, g, o, t, s);
        let json = repo.to_json_string();
        match Repository::from_json_str(&json) {
            Err(RepositoryError::Integrity(issues)) => {
                assert!(issues.contains(&IntegrityIssue::DanglingReference {
                    record: "T5".into(),
                    field: "related_obstacles".into(),
                    missing: "O99".into(),
                }));
            }
            other => panic!("expected integrity error, got {other:?}"),
        }
    }

    #[test]
    fn missing_obstacle_is_a_count_mismatch() {
        let (v, g, mut o, mut t, s) = Repository::bundled().into_catalogues();
        o.pop();
        for tactic in &mut t {
            tactic.related_obstacles.retain(|r| r != "O67");
        }
        let repo = Repository::from_catalogues(v, g, o, t, s);
        let report = repo.integrity_check();
        assert_eq!(
            report.errors,
            vec![IntegrityIssue::CountMismatch { catalogue: "obstacles".into(), expected: 67, actual: 66 }]
        );
    }

    #[test]
    fn duplicate_id_is_one_error() {
        let (v, g, mut o, mut t, s) = Repository::bundled().into_catalogues();
        o[66].id = "O1".into();
        for tactic in &mut t {
            tactic.related_obstacles.retain(|r| r != "O67");
        }
        let report = Repository::from_catalogues(v, g, o, t, s).integrity_check();
        assert_eq!(report.errors, vec![IntegrityIssue::DuplicateId { id: "O1".into() }]);
    }

    #[test]
    fn dangling_goal_is_one_error() {
        let (v, g, mut o, t, s) = Repository::bundled().into_catalogues();
        o[4].impacted_goals.push("G0".into());
        let report = Repository::from_catalogues(v, g, o, t, s).integrity_check();
        assert_eq!(
            report.errors,
            vec![IntegrityIssue::DanglingReference {
                record: "O5".into(),
                field: "impacted_goals".into(),
                missing: "G0".into(),
            }]
        );
    }

    #[test]
    fn schema_error_names_record_and_field() {
        let json = Repository::bundled_json().replacen("\"name\": \"Cloud outage\",", "", 1);
        match Repository::from_json_str(&json) {
            Err(RepositoryError::Schema { record, message }) => {
                assert_eq!(record, "obstacles[0] (O1)");
                assert!(message.contains("name"), "{message}");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn bundled_round_trips_byte_stable() {
        let repo = Repository::bundled();
        assert_eq!(repo.to_json_string(), Repository::bundled_json());
    }

    #[test]
    fn parses_migration_types_and_categories() {
        assert_eq!("IV".parse::<MigrationType>().unwrap(), MigrationType::IV);
        assert!("VI".parse::<MigrationType>().is_err());
        assert_eq!("goal-mitigation".parse::<TacticCategory>().unwrap(), TacticCategory::GoalMitigation);
        assert_eq!("DoNothing".parse::<TacticCategory>().unwrap(), TacticCategory::DoNothing);
        assert!("nothing".parse::<TacticCategory>().is_err());
    }
}
