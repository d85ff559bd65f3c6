//! Shared domain vocabulary: user archetypes, scenario entries, agent
//! responses, user profiles, episodic records, and the evaluation axes.
//!
//! Everything here is an immutable value record, safe to share across
//! concurrent evaluation workers. Canonical serialization is JSON with
//! snake_case field names; [`EpisodicRecord`] additionally maps onto the CSV
//! columns `timestamp,user_id,event_type,payload_summary,latency_ms,flags`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Errors from domain-level operations.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum DomainError {
    /// `pseudonymize` requires a non-empty salt.
    #[error("salt must be non-empty")]
    EmptySalt,
    /// A string did not name a known axis.
    #[error("unknown axis: {0}")]
    UnknownAxis(String),
}

// ---------------------------------------------------------------------------
// Archetypes and entry enums
// ---------------------------------------------------------------------------

/// The four household user archetypes. Every scenario entry and user profile
/// carries exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserArchetype {
    Child,
    Elderly,
    Neurodivergent,
    TypicalAdult,
}

impl UserArchetype {
    pub const ALL: [UserArchetype; 4] = [
        UserArchetype::Child,
        UserArchetype::Elderly,
        UserArchetype::Neurodivergent,
        UserArchetype::TypicalAdult,
    ];

    /// Inclusive age band for generation and validation. Child 6–17,
    /// Elderly 65 and up, everyone else 18–64.
    pub fn age_band(self) -> (u32, u32) {
        match self {
            UserArchetype::Child => (6, 17),
            UserArchetype::Elderly => (65, u32::MAX),
            _ => (18, 64),
        }
    }

    pub fn contains_age(self, age: u32) -> bool {
        let (lo, hi) = self.age_band();
        age >= lo && age <= hi
    }

    pub fn label(self) -> &'static str {
        match self {
            UserArchetype::Child => "child",
            UserArchetype::Elderly => "elderly",
            UserArchetype::Neurodivergent => "neurodivergent",
            UserArchetype::TypicalAdult => "typical_adult",
        }
    }
}

/// Scenario domain category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    DailyTasks,
    Education,
    Entertainment,
    Health,
    Emergencies,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::DailyTasks,
        Category::Education,
        Category::Entertainment,
        Category::Health,
        Category::Emergencies,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Category::DailyTasks => "daily_tasks",
            Category::Education => "education",
            Category::Entertainment => "entertainment",
            Category::Health => "health",
            Category::Emergencies => "emergencies",
        }
    }
}

/// Query urgency. `Emergency` is reserved for the `Emergencies` category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Urgency {
    Low,
    Medium,
    High,
    Emergency,
}

impl Urgency {
    /// Scheduling rank; higher is served first.
    pub fn rank(self) -> u8 {
        match self {
            Urgency::Low => 0,
            Urgency::Medium => 1,
            Urgency::High => 2,
            Urgency::Emergency => 3,
        }
    }
}

// ---------------------------------------------------------------------------
// ScenarioEntry
// ---------------------------------------------------------------------------

/// One synthetic query record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEntry {
    pub id: String,
    pub archetype: UserArchetype,
    pub age: u32,
    pub query: String,
    pub category: Category,
    pub urgency: Urgency,
    pub expected_response: String,
    #[serde(default)]
    pub constraints: Vec<String>,
    #[serde(default = "default_language")]
    pub language: String,
    #[serde(default)]
    pub concurrent_group: Option<String>,
}

fn default_language() -> String {
    "en-US".to_string()
}

/// Outcome of entry/profile validation: empty means ok, otherwise the full
/// list of violated invariants (never just the first).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub violations: Vec<String>,
}

impl ValidationResult {
    pub fn ok() -> Self {
        Self::default()
    }

    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every per-entry invariant and reports all violations. Total:
/// never aborts on arbitrary field contents.
pub fn validate_entry(entry: &ScenarioEntry) -> ValidationResult {
    let mut violations = Vec::new();
    if entry.id.trim().is_empty() {
        violations.push("id empty".to_string());
    }
    if !entry.archetype.contains_age(entry.age) {
        let (lo, hi) = entry.archetype.age_band();
        if hi == u32::MAX {
            violations.push(format!(
                "age outside archetype band: {} not in {}+ for {}",
                entry.age,
                lo,
                entry.archetype.label()
            ));
        } else {
            violations.push(format!(
                "age outside archetype band: {} not in {}-{} for {}",
                entry.age,
                lo,
                hi,
                entry.archetype.label()
            ));
        }
    }
    if entry.query.trim().is_empty() {
        violations.push("query empty".to_string());
    }
    if entry.expected_response.trim().is_empty() {
        violations.push("expected_response empty".to_string());
    }
    if entry.language.trim().is_empty()
        || !entry
            .language
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-')
    {
        violations.push(format!("language tag malformed: {:?}", entry.language));
    }
    if let Some(group) = &entry.concurrent_group {
        if group.trim().is_empty() {
            violations.push("concurrent_group empty".to_string());
        }
    }
    ValidationResult { violations }
}

/// Cross-entry invariants over a batch: unique ids, and entries sharing a
/// concurrent group must have distinct archetypes or distinct ids.
pub fn validate_batch(entries: &[ScenarioEntry]) -> ValidationResult {
    let mut violations = Vec::new();
    let mut seen = BTreeMap::new();
    for entry in entries {
        if let Some(prev) = seen.insert(entry.id.clone(), entry.archetype) {
            violations.push(format!(
                "duplicate id {} (archetype {})",
                entry.id,
                prev.label()
            ));
        }
    }
    let mut groups: BTreeMap<&str, Vec<&ScenarioEntry>> = BTreeMap::new();
    for entry in entries {
        if let Some(group) = &entry.concurrent_group {
            groups.entry(group.as_str()).or_default().push(entry);
        }
    }
    for (group, members) in groups {
        for (i, a) in members.iter().enumerate() {
            for b in &members[i + 1..] {
                if a.archetype == b.archetype && a.id == b.id {
                    violations.push(format!(
                        "group {group} contains duplicate entry {} with archetype {}",
                        a.id,
                        a.archetype.label()
                    ));
                }
            }
        }
    }
    ValidationResult { violations }
}

// ---------------------------------------------------------------------------
// AgentResponse
// ---------------------------------------------------------------------------

/// Who produced a response under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Producer {
    SingleAgent,
    MultiAgentBaseline,
    External,
}

/// A response to one scenario entry, ready for evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentResponse {
    pub entry_id: String,
    pub text: String,
    pub latency_ms: f64,
    pub producer: Producer,
}

// ---------------------------------------------------------------------------
// UserProfile
// ---------------------------------------------------------------------------

/// How much the agent may execute without confirmation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutonomyMode {
    Manual,
    Assisted,
    Autonomous,
}

/// Consent switches carried by every profile. `parental_reporting` must be
/// set (true or false) for child profiles.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsentFlags {
    pub data_logging: bool,
    #[serde(default)]
    pub parental_reporting: Option<bool>,
}

/// A household member. The pseudonym stands in for the real name everywhere
/// a record leaves the hub.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub pseudonym: String,
    pub archetype: UserArchetype,
    pub age_band: String,
    pub language: String,
    pub autonomy_mode: AutonomyMode,
    #[serde(default)]
    pub preferences: BTreeMap<String, String>,
    #[serde(default)]
    pub consent: ConsentFlags,
}

pub fn validate_profile(profile: &UserProfile) -> ValidationResult {
    let mut violations = Vec::new();
    if profile.pseudonym == profile.user_id {
        violations.push("pseudonym equals user_id".to_string());
    }
    if profile.archetype == UserArchetype::Child && profile.consent.parental_reporting.is_none() {
        violations.push("child profile missing parental_reporting consent".to_string());
    }
    ValidationResult { violations }
}

const NICK_ADJECTIVES: [&str; 32] = [
    "Amber", "Brave", "Calm", "Clever", "Cozy", "Daring", "Eager", "Fuzzy", "Gentle", "Golden",
    "Happy", "Jolly", "Keen", "Lively", "Lucky", "Mellow", "Merry", "Nimble", "Patient", "Plucky",
    "Quiet", "Rosy", "Silver", "Snug", "Spry", "Steady", "Sunny", "Swift", "Tidy", "Velvet",
    "Wise", "Zesty",
];

const NICK_ANIMALS: [&str; 32] = [
    "Badger", "Bee", "Crane", "Deer", "Dove", "Duck", "Falcon", "Fawn", "Finch", "Fox", "Hare",
    "Heron", "Koala", "Lark", "Lemur", "Lynx", "Mole", "Newt", "Otter", "Owl", "Panda", "Quail",
    "Robin", "Seal", "Sparrow", "Stork", "Swan", "Tapir", "Vole", "Weasel", "Wren", "Yak",
];

/// Returns a copy of the profile whose pseudonym is a keyed digest of the
/// user id rendered as a readable nickname. Deterministic: the same
/// `(user_id, salt)` always yields the same pseudonym. No lookup table is
/// kept, so there is nothing to leak.
pub fn pseudonymize(profile: &UserProfile, salt: &[u8]) -> Result<UserProfile, DomainError> {
    if salt.is_empty() {
        return Err(DomainError::EmptySalt);
    }
    let mut hasher = Sha256::new();
    hasher.update(salt);
    hasher.update([0x1f]);
    hasher.update(profile.user_id.as_bytes());
    let digest = hasher.finalize();
    let adjective = NICK_ADJECTIVES[(digest[0] % 32) as usize];
    let animal = NICK_ANIMALS[(digest[1] % 32) as usize];
    let mut pseudonym = format!(
        "{}{}-{:02x}{:02x}{:02x}{:02x}",
        adjective, animal, digest[2], digest[3], digest[4], digest[5]
    );
    if pseudonym == profile.user_id {
        pseudonym.push_str("-p");
    }
    let mut out = profile.clone();
    out.pseudonym = pseudonym;
    Ok(out)
}

// ---------------------------------------------------------------------------
// EpisodicRecord
// ---------------------------------------------------------------------------

/// Kind of an episodic log row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    Query,
    Response,
    Flag,
    Alert,
    Report,
}

impl EventType {
    pub fn label(self) -> &'static str {
        match self {
            EventType::Query => "query",
            EventType::Response => "response",
            EventType::Flag => "flag",
            EventType::Alert => "alert",
            EventType::Report => "report",
        }
    }
}

impl FromStr for EventType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "query" => Ok(EventType::Query),
            "response" => Ok(EventType::Response),
            "flag" => Ok(EventType::Flag),
            "alert" => Ok(EventType::Alert),
            "report" => Ok(EventType::Report),
            other => Err(format!("unknown event type: {other}")),
        }
    }
}

/// One row of the episodic memory log. Timestamps must be non-decreasing
/// within one log file; the writer in the harness enforces that.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodicRecord {
    pub timestamp: NaiveDateTime,
    pub user_id: String,
    pub event_type: EventType,
    pub payload_summary: String,
    #[serde(default)]
    pub latency_ms: Option<f64>,
    #[serde(default)]
    pub flags: Vec<String>,
}

pub const EPISODIC_CSV_HEADER: &str =
    "timestamp,user_id,event_type,payload_summary,latency_ms,flags";

const EPISODIC_TS_FORMAT: &str = "%Y-%m-%dT%H:%M:%S%.3f";

impl EpisodicRecord {
    /// CSV field values in canonical column order. Flags are joined with
    /// `;`, a missing latency renders as the empty string.
    pub fn csv_fields(&self) -> [String; 6] {
        [
            self.timestamp.format(EPISODIC_TS_FORMAT).to_string(),
            self.user_id.clone(),
            self.event_type.label().to_string(),
            self.payload_summary.clone(),
            self.latency_ms.map(|v| v.to_string()).unwrap_or_default(),
            self.flags.join(";"),
        ]
    }

    pub fn from_csv_fields(fields: &[String]) -> Result<Self, String> {
        if fields.len() != 6 {
            return Err(format!("expected 6 CSV fields, got {}", fields.len()));
        }
        let timestamp = NaiveDateTime::parse_from_str(&fields[0], EPISODIC_TS_FORMAT)
            .map_err(|e| format!("bad timestamp {:?}: {e}", fields[0]))?;
        let event_type = fields[2].parse::<EventType>()?;
        let latency_ms = if fields[4].is_empty() {
            None
        } else {
            Some(fields[4].parse::<f64>().map_err(|e| e.to_string())?)
        };
        let flags = if fields[5].is_empty() {
            Vec::new()
        } else {
            fields[5].split(';').map(str::to_string).collect()
        };
        Ok(Self {
            timestamp,
            user_id: fields[1].clone(),
            event_type,
            payload_summary: fields[3].clone(),
            latency_ms,
            flags,
        })
    }
}

// ---------------------------------------------------------------------------
// Evaluation axes
// ---------------------------------------------------------------------------

/// The eight evaluation dimensions, in canonical (weight-table) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    ResponseAccuracy,
    TrustAndSafety,
    UserAdaptation,
    ClarityAndTone,
    ConcurrencyHandling,
    HallucinationDetection,
    RelevanceCoherence,
    LinguisticQuality,
}

impl Axis {
    pub const ALL: [Axis; 8] = [
        Axis::ResponseAccuracy,
        Axis::TrustAndSafety,
        Axis::UserAdaptation,
        Axis::ClarityAndTone,
        Axis::ConcurrencyHandling,
        Axis::HallucinationDetection,
        Axis::RelevanceCoherence,
        Axis::LinguisticQuality,
    ];

    /// snake_case key used in verdict JSON and config files.
    pub fn key(self) -> &'static str {
        match self {
            Axis::ResponseAccuracy => "response_accuracy",
            Axis::TrustAndSafety => "trust_and_safety",
            Axis::UserAdaptation => "user_adaptation",
            Axis::ClarityAndTone => "clarity_and_tone",
            Axis::ConcurrencyHandling => "concurrency_handling",
            Axis::HallucinationDetection => "hallucination_detection",
            Axis::RelevanceCoherence => "relevance_coherence",
            Axis::LinguisticQuality => "linguistic_quality",
        }
    }

    /// Human-readable column header used in summary tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Axis::ResponseAccuracy => "Response Accuracy",
            Axis::TrustAndSafety => "Trust and Safety",
            Axis::UserAdaptation => "User Adaptation",
            Axis::ClarityAndTone => "Clarity and Tone",
            Axis::ConcurrencyHandling => "Concurrency Handling",
            Axis::HallucinationDetection => "Hallucination Detection",
            Axis::RelevanceCoherence => "Relevance and Coherence",
            Axis::LinguisticQuality => "Linguistic Quality",
        }
    }
}

impl FromStr for Axis {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Axis::ALL
            .into_iter()
            .find(|a| a.key() == s)
            .ok_or_else(|| DomainError::UnknownAxis(s.to_string()))
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}
