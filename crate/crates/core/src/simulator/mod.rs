//! Deterministic household world: device state, a single-agent arbitration
//! policy (query analysis, ethical filter, fairness scheduling, action
//! memory), a multi-agent baseline without the filter or scheduler, autonomy
//! enforcement, and parental flagging/reports.
//!
//! The event loop is strictly single-threaded and deterministic; only the
//! wall-clock latency fields touch real time. `strip_wall_times` zeroes them
//! for byte-level comparisons.

pub mod fixtures;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    AutonomyMode, Category, EpisodicRecord, EventType, Urgency, UserArchetype, UserProfile,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
    #[error("parental reporting consent missing or withheld for {0}")]
    NoConsent(String),
}

// ---------------------------------------------------------------------------
// Household state
// ---------------------------------------------------------------------------

/// One device snapshot. Device ids key the household map; every device also
/// knows its room so commands can be scoped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeviceState {
    Light {
        room: String,
        brightness: u8,
    },
    Audio {
        room: String,
        volume: u8,
        content: String,
    },
    Tv {
        room: String,
        power: bool,
        channel: String,
    },
    Thermostat {
        room: String,
        setpoint_c: f64,
    },
}

impl DeviceState {
    pub fn room(&self) -> &str {
        match self {
            DeviceState::Light { room, .. }
            | DeviceState::Audio { room, .. }
            | DeviceState::Tv { room, .. }
            | DeviceState::Thermostat { room, .. } => room,
        }
    }
}

/// Wrapping quiet-hours range, e.g. 22:00 to 07:00.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuietHours {
    pub start: NaiveTime,
    pub end: NaiveTime,
}

impl QuietHours {
    pub fn contains(&self, t: NaiveTime) -> bool {
        if self.start <= self.end {
            t >= self.start && t < self.end
        } else {
            t >= self.start || t < self.end
        }
    }
}

/// A household member and where they currently are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occupant {
    pub profile: UserProfile,
    pub room: String,
}

/// The world the arbiter acts on. One authoritative value per device
/// attribute; all writes are serialized through the decision log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdState {
    pub devices: BTreeMap<String, DeviceState>,
    pub clock: NaiveDateTime,
    pub quiet_hours: QuietHours,
    pub occupants: Vec<Occupant>,
    pub shared_rooms: BTreeSet<String>,
}

impl HouseholdState {
    pub fn occupant(&self, user_id: &str) -> Option<&Occupant> {
        self.occupants.iter().find(|o| o.profile.user_id == user_id)
    }

    fn device_of_kind_in_room(&self, kind: DeviceKind, room: &str) -> Option<&str> {
        self.devices
            .iter()
            .find(|(_, d)| d.room() == room && kind.matches(d))
            .map(|(id, _)| id.as_str())
    }

    fn devices_of_kind(&self, kind: DeviceKind) -> Vec<String> {
        self.devices
            .iter()
            .filter(|(_, d)| kind.matches(d))
            .map(|(id, _)| id.clone())
            .collect()
    }

    fn shared_device_of_kind(&self, kind: DeviceKind) -> Option<&str> {
        self.devices
            .iter()
            .find(|(_, d)| self.shared_rooms.contains(d.room()) && kind.matches(d))
            .map(|(id, _)| id.as_str())
    }

    /// Applies one command. Unknown devices are ignored (commands are built
    /// against this state, so that indicates a logic error upstream).
    pub fn apply(&mut self, command: &DeviceCommand) {
        let Some(device) = self.devices.get_mut(&command.device_id) else {
            return;
        };
        match (&command.action, device) {
            (DeviceAction::SetBrightness(v), DeviceState::Light { brightness, .. }) => {
                *brightness = *v;
            }
            (DeviceAction::SetVolume(v), DeviceState::Audio { volume, .. }) => *volume = *v,
            (DeviceAction::SetContent(c), DeviceState::Audio { content, .. }) => {
                *content = c.clone();
            }
            (DeviceAction::SetPower(p), DeviceState::Tv { power, .. }) => *power = *p,
            (DeviceAction::SetChannel(c), DeviceState::Tv { channel, .. }) => {
                *channel = c.clone();
            }
            (DeviceAction::SetSetpoint(s), DeviceState::Thermostat { setpoint_c, .. }) => {
                *setpoint_c = *s;
            }
            _ => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DeviceKind {
    Light,
    Audio,
    Tv,
}

impl DeviceKind {
    fn matches(self, device: &DeviceState) -> bool {
        matches!(
            (self, device),
            (DeviceKind::Light, DeviceState::Light { .. })
                | (DeviceKind::Audio, DeviceState::Audio { .. })
                | (DeviceKind::Tv, DeviceState::Tv { .. })
        )
    }
}

// ---------------------------------------------------------------------------
// Events and intents
// ---------------------------------------------------------------------------

/// Household intent classes covered by the action memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    PlayMedia,
    AdjustLight,
    AdjustVolume,
    ShutdownAll,
    Reminder,
    InfoRequest,
    EmergencyHelp,
}

/// One timestamped user query. The intent is assigned by the analyze step
/// before arbitration; `expected_keywords` feed compliance scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEvent {
    pub timestamp: NaiveDateTime,
    pub user_id: String,
    pub text: String,
    pub archetype: UserArchetype,
    pub urgency: Urgency,
    #[serde(default)]
    pub intent: Option<Intent>,
    #[serde(default)]
    pub expected_keywords: Vec<String>,
    #[serde(default)]
    pub category: Option<Category>,
}

fn contains_any(text: &str, needles: &[&str]) -> bool {
    needles.iter().any(|n| text.contains(n))
}

/// Keyword/rule intent classification; deterministic by construction. The
/// LLM lives only behind the judge and generation endpoints.
pub fn analyze_query(text: &str, urgency: Urgency) -> Option<Intent> {
    let t = text.to_lowercase();
    if urgency == Urgency::Emergency
        || contains_any(
            &t,
            &[
                "emergency",
                "fire",
                "smoke",
                "fell",
                "fallen",
                "can't breathe",
                "chest",
                "dizzy",
                "911",
                "burning",
                "leaking",
                "alarm",
                "panic",
            ],
        )
    {
        return Some(Intent::EmergencyHelp);
    }
    if contains_any(
        &t,
        &[
            "turn everything off",
            "shut everything",
            "everything off",
            "turn it all off",
            "shut down the house",
        ],
    ) {
        return Some(Intent::ShutdownAll);
    }
    if contains_any(&t, &["remind", "reminder", "don't let me forget"]) {
        return Some(Intent::Reminder);
    }
    if contains_any(&t, &["light", "lights", "lamp"]) {
        return Some(Intent::AdjustLight);
    }
    if contains_any(
        &t,
        &[
            "volume",
            "too loud",
            "loud music",
            "quieter",
            "louder",
            "mute",
            "turn it down",
        ],
    ) {
        return Some(Intent::AdjustVolume);
    }
    if contains_any(
        &t,
        &[
            "play", "music", "song", "movie", "show", "film", "watch", "match", "tv",
        ],
    ) {
        return Some(Intent::PlayMedia);
    }
    if contains_any(
        &t,
        &[
            "help me",
            "how do i",
            "how can i",
            "what",
            "when",
            "tell me",
            "step",
            "checklist",
            "?",
        ],
    ) {
        return Some(Intent::InfoRequest);
    }
    None
}

// ---------------------------------------------------------------------------
// Commands and decisions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceAction {
    SetBrightness(u8),
    SetVolume(u8),
    SetContent(String),
    SetPower(bool),
    SetChannel(String),
    SetSetpoint(f64),
}

impl DeviceAction {
    /// Attribute name for conflict detection. Two writes conflict when they
    /// target the same (device, attribute) with different values.
    pub fn attribute(&self) -> &'static str {
        match self {
            DeviceAction::SetBrightness(_) => "brightness",
            DeviceAction::SetVolume(_) => "volume",
            DeviceAction::SetContent(_) => "content",
            DeviceAction::SetPower(_) => "power",
            DeviceAction::SetChannel(_) => "channel",
            DeviceAction::SetSetpoint(_) => "setpoint",
        }
    }

    fn numeric_value(&self) -> Option<f64> {
        match self {
            DeviceAction::SetBrightness(v) | DeviceAction::SetVolume(v) => Some(*v as f64),
            DeviceAction::SetSetpoint(s) => Some(*s),
            _ => None,
        }
    }

    fn with_numeric(&self, value: f64) -> DeviceAction {
        match self {
            DeviceAction::SetBrightness(_) => {
                DeviceAction::SetBrightness(value.round().clamp(0.0, 100.0) as u8)
            }
            DeviceAction::SetVolume(_) => {
                DeviceAction::SetVolume(value.round().clamp(0.0, 100.0) as u8)
            }
            DeviceAction::SetSetpoint(_) => DeviceAction::SetSetpoint(value),
            other => other.clone(),
        }
    }

    fn value_repr(&self) -> String {
        match self {
            DeviceAction::SetBrightness(v) | DeviceAction::SetVolume(v) => v.to_string(),
            DeviceAction::SetContent(c) | DeviceAction::SetChannel(c) => c.clone(),
            DeviceAction::SetPower(p) => p.to_string(),
            DeviceAction::SetSetpoint(s) => s.to_string(),
        }
    }
}

/// One device write, tagged with the intent that produced it (risk
/// classification keys off the origin).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceCommand {
    pub device_id: String,
    pub action: DeviceAction,
    pub origin: Intent,
}

/// Risk class for autonomy enforcement. Shutdowns are high-risk; lighting,
/// volume, and playback changes are low-risk. Purchases and door locks,
/// when modeled, belong in the high class too.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Risk {
    Low,
    High,
}

pub fn command_risk(command: &DeviceCommand) -> Risk {
    match command.origin {
        Intent::ShutdownAll => Risk::High,
        _ => Risk::Low,
    }
}

/// How a decision's commands were dispatched under the user's autonomy mode.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecutionPlan {
    pub executed: Vec<DeviceCommand>,
    pub proposed: Vec<DeviceCommand>,
    pub consent_required: Vec<DeviceCommand>,
}

/// Splits a decision's commands by autonomy mode: Manual proposes only,
/// Assisted executes low-risk and defers high-risk to consent, Autonomous
/// executes everything except safety-flagged commands, which always require
/// consent.
pub fn apply_autonomy(decision: &ArbitrationDecision, mode: AutonomyMode) -> ExecutionPlan {
    let mut plan = ExecutionPlan::default();
    let safety_flagged = decision.flags.iter().any(|f| f.starts_with("safety:"));
    for command in &decision.commands {
        if safety_flagged {
            plan.consent_required.push(command.clone());
            continue;
        }
        match mode {
            AutonomyMode::Manual => plan.proposed.push(command.clone()),
            AutonomyMode::Assisted => match command_risk(command) {
                Risk::Low => plan.executed.push(command.clone()),
                Risk::High => plan.consent_required.push(command.clone()),
            },
            AutonomyMode::Autonomous => plan.executed.push(command.clone()),
        }
    }
    plan
}

/// The per-user outcome of one arbitration window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbitrationDecision {
    pub user_id: String,
    pub request_text: String,
    pub response: String,
    pub commands: Vec<DeviceCommand>,
    pub explanation: String,
    pub consent_required: bool,
    pub flags: Vec<String>,
    /// Simulated ticks; deterministic under seed.
    pub decision_latency_ms: f64,
    /// Measured wall time; excluded from canonical comparisons.
    pub wall_latency_ms: f64,
}

// ---------------------------------------------------------------------------
// Policy
// ---------------------------------------------------------------------------

/// Where a command template lands relative to the requesting user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    OwnRoom,
    SharedRoom,
    AllRooms,
}

/// One candidate command shape in the action memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandTemplate {
    Brightness {
        scope: Scope,
        level: u8,
    },
    Volume {
        scope: Scope,
        level: u8,
    },
    AudioPlay {
        scope: Scope,
        content: String,
        volume: u8,
    },
    TvShow {
        scope: Scope,
    },
    AllOff,
}

/// Action-memory rule: candidates for an intent, optionally gated on query
/// keywords. The first matching rule per intent wins; a rule with no
/// keywords is the intent's default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRule {
    pub intent: Intent,
    pub requires_any: Vec<String>,
    pub commands: Vec<CommandTemplate>,
}

/// Static policy configuration: the action memory catalog, safety lexicon,
/// vulnerability priority weights, quiet-hours caps, and the starvation
/// bound for deferred requests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub action_memory: Vec<ActionRule>,
    pub safety_lexicon: BTreeMap<String, Vec<String>>,
    pub vulnerability_weights: BTreeMap<UserArchetype, f64>,
    pub quiet_volume_cap: u8,
    pub quiet_brightness_cap: u8,
    /// A pending non-emergency request must be served within this many
    /// windows.
    pub starvation_bound: u32,
    /// Window width in seconds; events within the width of the window start
    /// are treated as simultaneous. Zero groups identical timestamps only.
    pub window_width_secs: i64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        let action_memory = vec![
            ActionRule {
                intent: Intent::PlayMedia,
                requires_any: ["movie", "show", "film", "watch", "match", "tv"]
                    .map(str::to_string)
                    .to_vec(),
                commands: vec![CommandTemplate::TvShow {
                    scope: Scope::SharedRoom,
                }],
            },
            ActionRule {
                intent: Intent::PlayMedia,
                requires_any: vec![],
                commands: vec![CommandTemplate::AudioPlay {
                    scope: Scope::OwnRoom,
                    content: "music".to_string(),
                    volume: 60,
                }],
            },
            ActionRule {
                intent: Intent::AdjustLight,
                requires_any: vec!["full".to_string()],
                commands: vec![CommandTemplate::Brightness {
                    scope: Scope::OwnRoom,
                    level: 100,
                }],
            },
            ActionRule {
                intent: Intent::AdjustLight,
                requires_any: ["dark", "off"].map(str::to_string).to_vec(),
                commands: vec![CommandTemplate::Brightness {
                    scope: Scope::OwnRoom,
                    level: 0,
                }],
            },
            ActionRule {
                intent: Intent::AdjustLight,
                requires_any: ["bright", "brighter", "more light"]
                    .map(str::to_string)
                    .to_vec(),
                commands: vec![CommandTemplate::Brightness {
                    scope: Scope::OwnRoom,
                    level: 90,
                }],
            },
            ActionRule {
                intent: Intent::AdjustLight,
                requires_any: ["dim", "darker", "soft", "lower"]
                    .map(str::to_string)
                    .to_vec(),
                commands: vec![CommandTemplate::Brightness {
                    scope: Scope::OwnRoom,
                    level: 20,
                }],
            },
            ActionRule {
                intent: Intent::AdjustLight,
                requires_any: vec![],
                commands: vec![CommandTemplate::Brightness {
                    scope: Scope::OwnRoom,
                    level: 60,
                }],
            },
            ActionRule {
                intent: Intent::AdjustVolume,
                requires_any: ["louder", "raise", "turn it up"]
                    .map(str::to_string)
                    .to_vec(),
                commands: vec![CommandTemplate::Volume {
                    scope: Scope::OwnRoom,
                    level: 80,
                }],
            },
            ActionRule {
                intent: Intent::AdjustVolume,
                requires_any: vec![],
                commands: vec![CommandTemplate::Volume {
                    scope: Scope::OwnRoom,
                    level: 15,
                }],
            },
            ActionRule {
                intent: Intent::ShutdownAll,
                requires_any: vec![],
                commands: vec![CommandTemplate::AllOff],
            },
            ActionRule {
                intent: Intent::Reminder,
                requires_any: vec![],
                commands: vec![],
            },
            ActionRule {
                intent: Intent::InfoRequest,
                requires_any: vec![],
                commands: vec![],
            },
            ActionRule {
                intent: Intent::EmergencyHelp,
                requires_any: vec![],
                commands: vec![CommandTemplate::Brightness {
                    scope: Scope::AllRooms,
                    level: 100,
                }],
            },
        ];
        let safety_lexicon = [
            (
                "self_harm",
                vec![
                    "hurt myself",
                    "kill myself",
                    "cut myself",
                    "end my life",
                    "self harm",
                ],
            ),
            (
                "adult_content",
                vec!["porn", "explicit video", "adult video", "18+"],
            ),
            (
                "substances",
                vec![
                    "beer",
                    "vodka",
                    "whiskey",
                    "cigarette",
                    "vape",
                    "weed",
                    "alcohol",
                    "drugs",
                ],
            ),
            (
                "exploitation",
                vec![
                    "send photos to a stranger",
                    "share my address",
                    "meet a stranger",
                    "keep it secret from my parents",
                ],
            ),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.into_iter().map(str::to_string).collect()))
        .collect();
        let vulnerability_weights = [
            (UserArchetype::Elderly, 3.0),
            (UserArchetype::Neurodivergent, 3.0),
            (UserArchetype::Child, 2.0),
            (UserArchetype::TypicalAdult, 1.0),
        ]
        .into_iter()
        .collect();
        Self {
            action_memory,
            safety_lexicon,
            vulnerability_weights,
            quiet_volume_cap: 20,
            quiet_brightness_cap: 60,
            starvation_bound: 2,
            window_width_secs: 0,
        }
    }
}

impl PolicyConfig {
    fn rule_for(&self, intent: Intent, text_lower: &str) -> Option<&ActionRule> {
        self.action_memory
            .iter()
            .filter(|r| r.intent == intent)
            .find(|r| {
                r.requires_any.is_empty()
                    || r.requires_any
                        .iter()
                        .any(|k| text_lower.contains(k.as_str()))
            })
    }

    fn safety_hit(&self, text_lower: &str) -> Option<&str> {
        self.safety_lexicon.iter().find_map(|(category, phrases)| {
            phrases
                .iter()
                .any(|p| text_lower.contains(p.as_str()))
                .then_some(category.as_str())
        })
    }

    fn vulnerability(&self, archetype: UserArchetype) -> f64 {
        self.vulnerability_weights
            .get(&archetype)
            .copied()
            .unwrap_or(1.0)
    }
}

// ---------------------------------------------------------------------------
// Window log and simulation log
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    SingleAgent,
    MultiAgentBaseline,
}

/// Two agents writing contradictory values to one device attribute in the
/// same window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictRecord {
    pub device_id: String,
    pub attribute: String,
    pub values: Vec<String>,
    pub users: Vec<String>,
}

/// An executed write or response that broke a hard constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationRecord {
    pub kind: String,
    pub user_id: String,
    pub detail: String,
}

/// A deferred request served in this window, with how many windows it
/// waited.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingGrant {
    pub user_id: String,
    pub waited_windows: u32,
}

/// Everything one concurrency window produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowLog {
    pub timestamp: NaiveDateTime,
    pub events: Vec<QueryEvent>,
    pub decisions: Vec<ArbitrationDecision>,
    /// Final executed writes, one per device attribute, in apply order.
    pub writes: Vec<DeviceCommand>,
    pub proposed: Vec<DeviceCommand>,
    pub consent_pending: Vec<DeviceCommand>,
    pub conflicts: Vec<ConflictRecord>,
    pub violations: Vec<ViolationRecord>,
    pub grants: Vec<PendingGrant>,
}

/// Full run record: replaying `writes` window by window against
/// `initial_state` reproduces `final_state` exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationLog {
    pub architecture: Architecture,
    pub seed: u64,
    pub initial_state: HouseholdState,
    pub windows: Vec<WindowLog>,
    pub episodic: Vec<EpisodicRecord>,
    pub final_state: HouseholdState,
}

impl SimulationLog {
    /// Zeroes measured wall-clock fields so logs can be compared byte for
    /// byte across runs.
    pub fn strip_wall_times(&mut self) {
        for window in &mut self.windows {
            for decision in &mut window.decisions {
                decision.wall_latency_ms = 0.0;
            }
        }
        for record in &mut self.episodic {
            if record.event_type == EventType::Response {
                record.latency_ms = record.latency_ms.map(|_| 0.0);
            }
        }
    }

    /// Applies the logged writes to the initial state.
    pub fn replay_final_state(&self) -> HouseholdState {
        let mut state = self.initial_state.clone();
        for window in &self.windows {
            state.clock = window.timestamp;
            for write in &window.writes {
                state.apply(write);
            }
        }
        state
    }

    pub fn decision_count(&self) -> usize {
        self.windows.iter().map(|w| w.decisions.len()).sum()
    }

    pub fn violation_count(&self) -> usize {
        self.windows.iter().map(|w| w.violations.len()).sum()
    }

    pub fn conflict_count(&self) -> usize {
        self.windows.iter().map(|w| w.conflicts.len()).sum()
    }

    /// JSON-lines export: a meta line, one line per window, a final line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let meta = serde_json::json!({
            "meta": {
                "architecture": self.architecture,
                "seed": self.seed,
                "initial_state": self.initial_state,
            }
        });
        out.push_str(&meta.to_string());
        out.push('\n');
        for window in &self.windows {
            out.push_str(&serde_json::json!({ "window": window }).to_string());
            out.push('\n');
        }
        out.push_str(&serde_json::json!({ "final_state": self.final_state }).to_string());
        out.push('\n');
        out
    }
}

// ---------------------------------------------------------------------------
// The arbiter
// ---------------------------------------------------------------------------

struct PendingRequest {
    event: QueryEvent,
    waited_windows: u32,
}

struct ScheduledItem {
    event: QueryEvent,
    waited: u32,
    arrival: usize,
    from_pending: bool,
}

struct DraftDecision {
    item_index: usize,
    user_id: String,
    request_text: String,
    response: String,
    commands: Vec<DeviceCommand>,
    notes: Vec<String>,
    flags: Vec<String>,
    queued: bool,
}

/// Single-agent arbitration engine. Holds the pending queue across windows
/// so deferred requests age toward the starvation bound.
pub struct Arbiter {
    policy: PolicyConfig,
    pending: Vec<PendingRequest>,
    rng: ChaCha8Rng,
}

impl Arbiter {
    pub fn new(policy: PolicyConfig, seed: u64) -> Self {
        Self {
            policy,
            pending: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }

    /// Oldest pending wait in windows, for starvation monitoring.
    pub fn max_pending_age(&self) -> u32 {
        self.pending
            .iter()
            .map(|p| p.waited_windows)
            .max()
            .unwrap_or(0)
    }

    /// Arbitrates one concurrency window: every event gets exactly one
    /// decision; pending requests from earlier windows compete with aging
    /// priority and are granted when their resource frees up.
    pub fn arbitrate_window(
        &mut self,
        events: &[QueryEvent],
        state: &mut HouseholdState,
        window_ts: NaiveDateTime,
    ) -> WindowLog {
        state.clock = window_ts;
        let quiet = state.quiet_hours.contains(window_ts.time());

        let mut items: Vec<ScheduledItem> = Vec::new();
        for (i, pending) in self.pending.drain(..).enumerate() {
            items.push(ScheduledItem {
                event: pending.event,
                waited: pending.waited_windows + 1,
                arrival: i,
                from_pending: true,
            });
        }
        let base = items.len();
        for (i, event) in events.iter().enumerate() {
            items.push(ScheduledItem {
                event: event.clone(),
                waited: 0,
                arrival: base + i,
                from_pending: false,
            });
        }

        // Fairness scheduling: starvation boost, then urgency, then
        // vulnerability weight, then longest waiting, then arrival order.
        let bound = self.policy.starvation_bound;
        let policy = &self.policy;
        items.sort_by(|a, b| {
            let starved_a = a.waited >= bound;
            let starved_b = b.waited >= bound;
            starved_b
                .cmp(&starved_a)
                .then(b.event.urgency.rank().cmp(&a.event.urgency.rank()))
                .then(
                    policy
                        .vulnerability(b.event.archetype)
                        .partial_cmp(&policy.vulnerability(a.event.archetype))
                        .unwrap(),
                )
                .then(b.waited.cmp(&a.waited))
                .then(a.arrival.cmp(&b.arrival))
        });

        let mut drafts: Vec<DraftDecision> = Vec::new();
        let mut wall_times: Vec<f64> = Vec::new();
        for (index, item) in items.iter().enumerate() {
            let started = Instant::now();
            let draft = self.draft_decision(index, item, state, quiet);
            drafts.push(draft);
            wall_times.push(started.elapsed().as_secs_f64() * 1000.0);
        }

        // Conflict merge over the drafted commands, in scheduling order:
        // numeric clashes compromise to the mean, exclusive clashes defer the
        // later requester to the pending queue. One write per attribute.
        let mut final_writes: Vec<DeviceCommand> = Vec::new();
        let mut owner_of: BTreeMap<(String, &'static str), (usize, usize)> = BTreeMap::new();
        let mut requeue: Vec<usize> = Vec::new();
        let mut compromise_notes: Vec<(usize, String)> = Vec::new();
        for (draft_index, draft) in drafts.iter_mut().enumerate() {
            if draft.flags.iter().any(|f| f.starts_with("safety:")) {
                continue;
            }
            let commands = draft.commands.clone();
            // Exclusive attributes (content, channel, power) cannot be
            // compromised: losing any of them defers the whole request.
            let lost_exclusive = commands.iter().any(|command| {
                let key = (command.device_id.clone(), command.action.attribute());
                owner_of.get(&key).is_some_and(|&(write_index, _)| {
                    final_writes[write_index].action != command.action
                        && command.action.numeric_value().is_none()
                })
            });
            if lost_exclusive {
                requeue.push(draft_index);
                continue;
            }
            let mut kept: Vec<DeviceCommand> = Vec::new();
            for command in commands {
                let key = (command.device_id.clone(), command.action.attribute());
                match owner_of.get(&key) {
                    None => {
                        owner_of.insert(key, (final_writes.len(), draft_index));
                        final_writes.push(command.clone());
                        kept.push(command);
                    }
                    Some(&(write_index, owner_index)) => {
                        if final_writes[write_index].action == command.action {
                            kept.push(command);
                            continue;
                        }
                        let existing_action = final_writes[write_index].action.clone();
                        let (a, b) = (
                            existing_action.numeric_value().expect("checked numeric"),
                            command.action.numeric_value().expect("checked numeric"),
                        );
                        let merged = existing_action.with_numeric((a + b) / 2.0);
                        let note = format!(
                            "shared_room_compromise: {} {} values {} and {} merged to {}",
                            command.device_id,
                            command.action.attribute(),
                            existing_action.value_repr(),
                            command.action.value_repr(),
                            merged.value_repr()
                        );
                        final_writes[write_index].action = merged.clone();
                        let mut updated = command.clone();
                        updated.action = merged;
                        kept.push(updated);
                        compromise_notes.push((draft_index, note.clone()));
                        compromise_notes.push((owner_index, note));
                    }
                }
            }
            draft.commands = kept;
        }
        for (draft_index, note) in compromise_notes {
            if !drafts[draft_index].notes.contains(&note) {
                drafts[draft_index].notes.push(note);
            }
        }
        // Every decision's copy of a merged write reflects the final value.
        for draft in drafts.iter_mut() {
            for command in draft.commands.iter_mut() {
                if let Some(&(write_index, _)) =
                    owner_of.get(&(command.device_id.clone(), command.action.attribute()))
                {
                    command.action = final_writes[write_index].action.clone();
                }
            }
        }

        // Losers of exclusive-resource conflicts wait in the pending queue.
        for &draft_index in &requeue {
            let item = &items[drafts[draft_index].item_index];
            self.pending.push(PendingRequest {
                event: item.event.clone(),
                waited_windows: item.waited,
            });
            let draft = &mut drafts[draft_index];
            draft.commands.clear();
            draft.queued = true;
            draft.response =
                "That device is busy right now — you're next in line, I'll switch over shortly."
                    .to_string();
            draft
                .notes
                .push("deferred: exclusive device busy".to_string());
        }

        let mut grants: Vec<PendingGrant> = Vec::new();
        for draft in &drafts {
            let item = &items[draft.item_index];
            if item.from_pending && !draft.queued {
                grants.push(PendingGrant {
                    user_id: item.event.user_id.clone(),
                    waited_windows: item.waited,
                });
            }
        }

        // Assemble decisions in scheduling order. A pending re-entry only
        // produces a new decision row when it is finally granted; its
        // original "queued" decision already answered the event.
        let mut decisions: Vec<ArbitrationDecision> = Vec::new();
        for (i, draft) in drafts.iter().enumerate() {
            let item = &items[draft.item_index];
            if item.from_pending && draft.queued {
                continue;
            }
            let mut flags = draft.flags.clone();
            let mut response = draft.response.clone();
            let mut explanation = if draft.notes.is_empty() {
                "no constraints applied".to_string()
            } else {
                draft.notes.join("; ")
            };
            if item.from_pending {
                flags.push("deferred-grant".to_string());
                let tv_room = state
                    .shared_device_of_kind(DeviceKind::Tv)
                    .and_then(|id| state.devices.get(id))
                    .map(|d| d.room().to_string())
                    .unwrap_or_else(|| "shared".to_string());
                response =
                    format!("Thanks for waiting — switching the {tv_room} TV to your pick now.");
                explanation = format!(
                    "served after waiting {} window(s); {}",
                    item.waited, explanation
                );
            }
            let latency = 4.0
                + 2.0 * draft.commands.len() as f64
                + 3.0 * draft.notes.len() as f64
                + self.rng.gen_range(0..4) as f64;
            decisions.push(ArbitrationDecision {
                user_id: draft.user_id.clone(),
                request_text: draft.request_text.clone(),
                response,
                commands: draft.commands.clone(),
                explanation,
                consent_required: false,
                flags,
                decision_latency_ms: latency,
                wall_latency_ms: wall_times[i],
            });
        }

        WindowLog {
            timestamp: window_ts,
            events: events.to_vec(),
            decisions,
            writes: final_writes,
            proposed: Vec::new(),
            consent_pending: Vec::new(),
            conflicts: Vec::new(),
            violations: Vec::new(),
            grants,
        }
    }

    /// Builds the pre-merge decision for one scheduled item: safety screen,
    /// intent analysis, action-memory candidates, ethical filter.
    fn draft_decision(
        &mut self,
        item_index: usize,
        item: &ScheduledItem,
        state: &HouseholdState,
        quiet: bool,
    ) -> DraftDecision {
        let event = &item.event;
        let text_lower = event.text.to_lowercase();
        let mut draft = DraftDecision {
            item_index,
            user_id: event.user_id.clone(),
            request_text: event.text.clone(),
            response: String::new(),
            commands: Vec::new(),
            notes: Vec::new(),
            flags: Vec::new(),
            queued: false,
        };

        if let Some(category) = self.policy.safety_hit(&text_lower) {
            draft.flags.push(format!("safety:{category}"));
            draft.notes.push(format!("safety_block:{category}"));
            draft.response = if event.archetype == UserArchetype::Child {
                "I can't help with that. Let's pause and talk to a trusted adult — I've flagged this so you get support."
                    .to_string()
            } else {
                "I can't help with that request — let's find a safer option together.".to_string()
            };
            return draft;
        }

        let intent = event
            .intent
            .or_else(|| analyze_query(&event.text, event.urgency));
        let Some(intent) = intent else {
            draft.response =
                "I didn't catch that — could you tell me more about what you need?".to_string();
            draft
                .notes
                .push("unknown_intent: clarification requested".to_string());
            return draft;
        };

        let own_room = state
            .occupant(&event.user_id)
            .map(|o| o.room.clone())
            .unwrap_or_default();
        // A room named in the query overrides the requester's own room.
        let target_room = state
            .devices
            .values()
            .map(|d| d.room().to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .find(|room| text_lower.contains(room.as_str()))
            .unwrap_or(own_room);

        let rule = self
            .policy
            .rule_for(intent, &text_lower)
            .expect("every intent has a default action rule");
        let multi_user = state.occupants.len() > 1;

        let mut response = String::new();
        for template in &rule.commands {
            match template {
                CommandTemplate::Brightness { scope, level } => {
                    let mut level = *level;
                    if quiet
                        && level > self.policy.quiet_brightness_cap
                        && intent != Intent::EmergencyHelp
                    {
                        level = self.policy.quiet_brightness_cap;
                        draft
                            .notes
                            .push(format!("quiet_hours_brightness_cap: limited to {level}"));
                    }
                    for device_id in
                        self.resolve_scope(state, DeviceKind::Light, *scope, &target_room)
                    {
                        draft.commands.push(DeviceCommand {
                            device_id,
                            action: DeviceAction::SetBrightness(level),
                            origin: intent,
                        });
                    }
                    if intent != Intent::EmergencyHelp {
                        response = format!("Lights in the {target_room} set to {level}.");
                    }
                }
                CommandTemplate::Volume { scope, level } => {
                    let mut level = *level;
                    if quiet && level > self.policy.quiet_volume_cap {
                        level = self.policy.quiet_volume_cap;
                        draft
                            .notes
                            .push(format!("quiet_hours_volume_cap: limited to {level}"));
                    }
                    for device_id in
                        self.resolve_scope(state, DeviceKind::Audio, *scope, &target_room)
                    {
                        draft.commands.push(DeviceCommand {
                            device_id,
                            action: DeviceAction::SetVolume(level),
                            origin: intent,
                        });
                    }
                    response = if level >= 50 {
                        format!("Raising the volume in the {target_room} to {level}.")
                    } else {
                        format!("Turning the volume in the {target_room} down to {level}.")
                    };
                }
                CommandTemplate::AudioPlay {
                    scope,
                    content,
                    volume,
                } => {
                    let mut volume = *volume;
                    let mut room = target_room.clone();
                    let mut scope = *scope;
                    if quiet {
                        if volume > self.policy.quiet_volume_cap {
                            volume = self.policy.quiet_volume_cap;
                            draft
                                .notes
                                .push(format!("quiet_hours_volume_cap: limited to {volume}"));
                        }
                        if state.shared_rooms.contains(&room) {
                            if let Some(occupant) = state.occupant(&event.user_id) {
                                room = occupant.room.clone();
                                scope = Scope::OwnRoom;
                                draft.notes.push(
                                    "localized_playback: routed to your room for quiet hours"
                                        .to_string(),
                                );
                            }
                        }
                    }
                    for device_id in self.resolve_scope(state, DeviceKind::Audio, scope, &room) {
                        draft.commands.push(DeviceCommand {
                            device_id: device_id.clone(),
                            action: DeviceAction::SetContent(content.clone()),
                            origin: intent,
                        });
                        draft.commands.push(DeviceCommand {
                            device_id,
                            action: DeviceAction::SetVolume(volume),
                            origin: intent,
                        });
                    }
                    response = if quiet {
                        format!(
                            "I'll play music softly in the {room} now — volume {volume} to keep things quiet."
                        )
                    } else {
                        format!("I'll play music in the {room} now at volume {volume} — enjoy!")
                    };
                }
                CommandTemplate::TvShow { scope } => {
                    for device_id in self.resolve_scope(state, DeviceKind::Tv, *scope, &target_room)
                    {
                        let tv_room = state
                            .devices
                            .get(&device_id)
                            .map(|d| d.room().to_string())
                            .unwrap_or_default();
                        draft.commands.push(DeviceCommand {
                            device_id: device_id.clone(),
                            action: DeviceAction::SetPower(true),
                            origin: intent,
                        });
                        draft.commands.push(DeviceCommand {
                            device_id,
                            action: DeviceAction::SetChannel(format!("pick-by-{}", event.user_id)),
                            origin: intent,
                        });
                        response = format!("Starting your show on the {tv_room} TV now.");
                    }
                }
                CommandTemplate::AllOff => {
                    let scoped_room = if multi_user {
                        draft.notes.push(
                            "scoped_shutdown: other household members are active".to_string(),
                        );
                        Some(target_room.clone())
                    } else {
                        None
                    };
                    for (device_id, device) in &state.devices {
                        if let Some(room) = &scoped_room {
                            if device.room() != room {
                                continue;
                            }
                        }
                        match device {
                            DeviceState::Light { .. } => draft.commands.push(DeviceCommand {
                                device_id: device_id.clone(),
                                action: DeviceAction::SetBrightness(0),
                                origin: intent,
                            }),
                            DeviceState::Audio { .. } => {
                                draft.commands.push(DeviceCommand {
                                    device_id: device_id.clone(),
                                    action: DeviceAction::SetVolume(0),
                                    origin: intent,
                                });
                                draft.commands.push(DeviceCommand {
                                    device_id: device_id.clone(),
                                    action: DeviceAction::SetContent("off".to_string()),
                                    origin: intent,
                                });
                            }
                            DeviceState::Tv { .. } => draft.commands.push(DeviceCommand {
                                device_id: device_id.clone(),
                                action: DeviceAction::SetPower(false),
                                origin: intent,
                            }),
                            DeviceState::Thermostat { .. } => {}
                        }
                    }
                    response = if multi_user {
                        format!(
                            "Turning off the devices in the {target_room} for sleep — other rooms stay as they are."
                        )
                    } else {
                        "Turning everything off across the house.".to_string()
                    };
                }
            }
        }

        draft.response = match intent {
            Intent::Reminder => "Reminder saved — I'll prompt you at the right time.".to_string(),
            Intent::InfoRequest => {
                "Here's what I found: the details are on your screen, step by step.".to_string()
            }
            Intent::EmergencyHelp => {
                draft.flags.push("emergency".to_string());
                draft
                    .notes
                    .push("emergency_priority: lights raised".to_string());
                "Emergency help is on the way — lights are on and I'm staying with you.".to_string()
            }
            _ if response.is_empty() => "Done.".to_string(),
            _ => response,
        };
        draft
    }

    fn resolve_scope(
        &self,
        state: &HouseholdState,
        kind: DeviceKind,
        scope: Scope,
        room: &str,
    ) -> Vec<String> {
        match scope {
            Scope::OwnRoom => state
                .device_of_kind_in_room(kind, room)
                .or_else(|| state.shared_device_of_kind(kind))
                .map(|id| vec![id.to_string()])
                .unwrap_or_default(),
            Scope::SharedRoom => state
                .shared_device_of_kind(kind)
                .or_else(|| state.device_of_kind_in_room(kind, room))
                .map(|id| vec![id.to_string()])
                .unwrap_or_default(),
            Scope::AllRooms => state.devices_of_kind(kind),
        }
    }
}

/// Stateless single-window arbitration: fresh pending queue, the given
/// state is not mutated.
pub fn arbitrate(
    events: &[QueryEvent],
    state: &HouseholdState,
    policy: &PolicyConfig,
) -> Vec<ArbitrationDecision> {
    let mut arbiter = Arbiter::new(policy.clone(), 0);
    let mut scratch = state.clone();
    let ts = events.first().map(|e| e.timestamp).unwrap_or(state.clock);
    arbiter.arbitrate_window(events, &mut scratch, ts).decisions
}

// ---------------------------------------------------------------------------
// Constraint checking
// ---------------------------------------------------------------------------

/// Flags executed writes that break quiet-hours caps. Emergency-origin
/// brightness raises are exempt.
pub fn write_violations(
    writes: &[(DeviceCommand, String)],
    clock: NaiveDateTime,
    quiet_hours: &QuietHours,
    policy: &PolicyConfig,
) -> Vec<ViolationRecord> {
    let mut violations = Vec::new();
    if !quiet_hours.contains(clock.time()) {
        return violations;
    }
    for (command, user_id) in writes {
        match command.action {
            DeviceAction::SetVolume(v) if v > policy.quiet_volume_cap => {
                violations.push(ViolationRecord {
                    kind: "quiet_hours_volume".to_string(),
                    user_id: user_id.clone(),
                    detail: format!("{} volume {v} over cap", command.device_id),
                });
            }
            DeviceAction::SetBrightness(v)
                if v > policy.quiet_brightness_cap && command.origin != Intent::EmergencyHelp =>
            {
                violations.push(ViolationRecord {
                    kind: "quiet_hours_brightness".to_string(),
                    user_id: user_id.clone(),
                    detail: format!("{} brightness {v} over cap", command.device_id),
                });
            }
            _ => {}
        }
    }
    violations
}

// ---------------------------------------------------------------------------
// Trace runners
// ---------------------------------------------------------------------------

fn group_windows(
    trace: &[QueryEvent],
    width_secs: i64,
) -> Result<Vec<(NaiveDateTime, Vec<QueryEvent>)>, SimError> {
    let mut windows: Vec<(NaiveDateTime, Vec<QueryEvent>)> = Vec::new();
    let mut last_ts: Option<NaiveDateTime> = None;
    for event in trace {
        if let Some(last) = last_ts {
            if event.timestamp < last {
                return Err(SimError::MalformedTrace(format!(
                    "timestamps decrease at {} for user {}",
                    event.timestamp, event.user_id
                )));
            }
        }
        last_ts = Some(event.timestamp);
        match windows.last_mut() {
            Some((start, events)) if (event.timestamp - *start).num_seconds() <= width_secs => {
                events.push(event.clone());
            }
            _ => windows.push((event.timestamp, vec![event.clone()])),
        }
    }
    Ok(windows)
}

fn query_records(events: &[QueryEvent]) -> Vec<EpisodicRecord> {
    events
        .iter()
        .map(|event| EpisodicRecord {
            timestamp: event.timestamp,
            user_id: event.user_id.clone(),
            event_type: EventType::Query,
            payload_summary: event.text.clone(),
            latency_ms: None,
            flags: Vec::new(),
        })
        .collect()
}

/// Runs the single-agent policy over a trace. Deterministic under seed
/// except for the measured wall-time fields.
pub fn run_trace(
    trace: &[QueryEvent],
    initial_state: &HouseholdState,
    policy: &PolicyConfig,
    autonomy: &BTreeMap<String, AutonomyMode>,
    seed: u64,
) -> Result<SimulationLog, SimError> {
    for event in trace {
        let occupant = initial_state
            .occupant(&event.user_id)
            .ok_or_else(|| SimError::MalformedTrace(format!("unknown user {}", event.user_id)))?;
        if occupant.profile.archetype != event.archetype {
            return Err(SimError::MalformedTrace(format!(
                "archetype mismatch for {}",
                event.user_id
            )));
        }
    }
    let windows = group_windows(trace, policy.window_width_secs)?;
    let mut arbiter = Arbiter::new(policy.clone(), seed);
    let mut state = initial_state.clone();
    let mut log_windows = Vec::new();
    let mut episodic = Vec::new();

    for (window_ts, events) in windows {
        episodic.extend(query_records(&events));
        let mut window = arbiter.arbitrate_window(&events, &mut state, window_ts);

        // Autonomy enforcement: only executed commands reach the device
        // state; the merged write list shrinks to what actually executed.
        let mut executed: Vec<DeviceCommand> = Vec::new();
        let mut proposed: Vec<DeviceCommand> = Vec::new();
        let mut consent: Vec<DeviceCommand> = Vec::new();
        for decision in &mut window.decisions {
            let mode = autonomy
                .get(&decision.user_id)
                .copied()
                .or_else(|| {
                    state
                        .occupant(&decision.user_id)
                        .map(|o| o.profile.autonomy_mode)
                })
                .unwrap_or(AutonomyMode::Assisted);
            let plan = apply_autonomy(decision, mode);
            decision.consent_required = !plan.consent_required.is_empty();
            executed.extend(plan.executed);
            proposed.extend(plan.proposed);
            consent.extend(plan.consent_required);
        }
        let is_executed = |write: &DeviceCommand| {
            executed
                .iter()
                .any(|c| c.device_id == write.device_id && c.action == write.action)
        };
        window.writes.retain(|w| is_executed(w));
        window.proposed = proposed;
        window.consent_pending = consent;

        for write in &window.writes {
            state.apply(write);
        }

        let attributed: Vec<(DeviceCommand, String)> = window
            .decisions
            .iter()
            .flat_map(|d| {
                d.commands
                    .iter()
                    .filter(|c| is_executed(c))
                    .map(|c| (c.clone(), d.user_id.clone()))
            })
            .collect();
        window.violations = write_violations(&attributed, window_ts, &state.quiet_hours, policy);

        for decision in &window.decisions {
            for flag in &decision.flags {
                if let Some(category) = flag.strip_prefix("safety:") {
                    episodic.push(EpisodicRecord {
                        timestamp: window_ts,
                        user_id: decision.user_id.clone(),
                        event_type: EventType::Flag,
                        payload_summary: format!("safety lexicon hit: {category}"),
                        latency_ms: None,
                        flags: vec![flag.clone()],
                    });
                    let is_child = state
                        .occupant(&decision.user_id)
                        .map(|o| o.profile.archetype == UserArchetype::Child)
                        .unwrap_or(false);
                    if is_child {
                        episodic.push(EpisodicRecord {
                            timestamp: window_ts,
                            user_id: decision.user_id.clone(),
                            event_type: EventType::Alert,
                            payload_summary: format!(
                                "immediate parental alert: {category} content in child query"
                            ),
                            latency_ms: None,
                            flags: vec![flag.clone(), "parental-alert".to_string()],
                        });
                    }
                }
            }
            episodic.push(EpisodicRecord {
                timestamp: window_ts,
                user_id: decision.user_id.clone(),
                event_type: EventType::Response,
                payload_summary: decision.response.clone(),
                latency_ms: Some(decision.wall_latency_ms),
                flags: decision.flags.clone(),
            });
        }

        log_windows.push(window);
    }

    Ok(SimulationLog {
        architecture: Architecture::SingleAgent,
        seed,
        initial_state: initial_state.clone(),
        windows: log_windows,
        episodic,
        final_state: state,
    })
}

fn baseline_response(agent: &str, intent: Option<Intent>) -> String {
    let body = match intent {
        Some(Intent::PlayMedia) => "Playing media now.",
        Some(Intent::AdjustLight) => "Adjusting the lights.",
        Some(Intent::AdjustVolume) => "Changing the volume.",
        Some(Intent::ShutdownAll) => "Turning everything off.",
        Some(Intent::Reminder) => "Reminder created; a prompt is set.",
        Some(Intent::InfoRequest) => "Here is some information.",
        Some(Intent::EmergencyHelp) => "Contacting help.",
        None => "I did not understand.",
    };
    format!("[{agent}] {body}")
}

/// Runs the multi-agent baseline: one sub-agent per archetype proposes
/// device writes independently, with no shared ethical filter and no
/// scheduler. Conflicting same-window writes are logged as coordination
/// conflicts and resolved last-write-wins; quiet-hours breaches and
/// unfiltered unsafe responses are logged as violations.
pub fn run_multi_agent_baseline(
    trace: &[QueryEvent],
    initial_state: &HouseholdState,
    policy: &PolicyConfig,
    assignment: &BTreeMap<UserArchetype, String>,
    seed: u64,
) -> Result<SimulationLog, SimError> {
    let windows = group_windows(trace, policy.window_width_secs)?;
    let mut state = initial_state.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log_windows = Vec::new();
    let mut episodic = Vec::new();

    for (window_ts, events) in windows {
        state.clock = window_ts;
        episodic.extend(query_records(&events));
        let mut decisions = Vec::new();
        let mut writes: Vec<(DeviceCommand, String)> = Vec::new();
        let mut violations = Vec::new();

        for event in &events {
            let started = Instant::now();
            let agent = assignment
                .get(&event.archetype)
                .cloned()
                .unwrap_or_else(|| "agent".to_string());
            let text_lower = event.text.to_lowercase();
            let intent = event
                .intent
                .or_else(|| analyze_query(&event.text, event.urgency));

            if let Some(category) = policy.safety_hit(&text_lower) {
                // No shared filter: the sub-agent answers anyway.
                violations.push(ViolationRecord {
                    kind: "unsafe_response".to_string(),
                    user_id: event.user_id.clone(),
                    detail: format!("{category} query answered without screening"),
                });
            }

            let mut commands = Vec::new();
            if let Some(intent) = intent {
                if let Some(rule) = policy.rule_for(intent, &text_lower) {
                    let own_room = state
                        .occupant(&event.user_id)
                        .map(|o| o.room.clone())
                        .unwrap_or_default();
                    for template in &rule.commands {
                        baseline_expand(template, intent, event, &own_room, &state, &mut commands);
                    }
                }
            }
            for command in &commands {
                writes.push((command.clone(), event.user_id.clone()));
            }
            decisions.push(ArbitrationDecision {
                user_id: event.user_id.clone(),
                request_text: event.text.clone(),
                response: baseline_response(&agent, intent),
                commands,
                explanation: format!("independent sub-agent {agent}, no shared filter"),
                consent_required: false,
                flags: Vec::new(),
                decision_latency_ms: 6.0 + rng.gen_range(0..6) as f64,
                wall_latency_ms: started.elapsed().as_secs_f64() * 1000.0,
            });
        }

        // Coordination conflicts: same attribute, different values.
        let mut by_attribute: BTreeMap<(String, &'static str), Vec<(String, String)>> =
            BTreeMap::new();
        for (command, user) in &writes {
            by_attribute
                .entry((command.device_id.clone(), command.action.attribute()))
                .or_default()
                .push((command.action.value_repr(), user.clone()));
        }
        let mut conflicts = Vec::new();
        for ((device_id, attribute), entries) in by_attribute {
            let distinct: BTreeSet<&str> = entries.iter().map(|(v, _)| v.as_str()).collect();
            if distinct.len() > 1 {
                conflicts.push(ConflictRecord {
                    device_id,
                    attribute: attribute.to_string(),
                    values: entries.iter().map(|(v, _)| v.clone()).collect(),
                    users: entries.iter().map(|(_, u)| u.clone()).collect(),
                });
            }
        }

        // Last write wins, applied in arrival order.
        for (command, _) in &writes {
            state.apply(command);
        }
        violations.extend(write_violations(
            &writes,
            window_ts,
            &state.quiet_hours,
            policy,
        ));

        for decision in &decisions {
            episodic.push(EpisodicRecord {
                timestamp: window_ts,
                user_id: decision.user_id.clone(),
                event_type: EventType::Response,
                payload_summary: decision.response.clone(),
                latency_ms: Some(decision.wall_latency_ms),
                flags: Vec::new(),
            });
        }

        log_windows.push(WindowLog {
            timestamp: window_ts,
            events,
            decisions,
            writes: writes.into_iter().map(|(c, _)| c).collect(),
            proposed: Vec::new(),
            consent_pending: Vec::new(),
            conflicts,
            violations,
            grants: Vec::new(),
        });
    }

    Ok(SimulationLog {
        architecture: Architecture::MultiAgentBaseline,
        seed,
        initial_state: initial_state.clone(),
        windows: log_windows,
        episodic,
        final_state: state,
    })
}

fn baseline_expand(
    template: &CommandTemplate,
    intent: Intent,
    event: &QueryEvent,
    own_room: &str,
    state: &HouseholdState,
    commands: &mut Vec<DeviceCommand>,
) {
    match template {
        CommandTemplate::Brightness { level, .. } => {
            if let Some(id) = state
                .device_of_kind_in_room(DeviceKind::Light, own_room)
                .or_else(|| state.shared_device_of_kind(DeviceKind::Light))
            {
                commands.push(DeviceCommand {
                    device_id: id.to_string(),
                    action: DeviceAction::SetBrightness(*level),
                    origin: intent,
                });
            }
        }
        CommandTemplate::Volume { level, .. } => {
            if let Some(id) = state
                .device_of_kind_in_room(DeviceKind::Audio, own_room)
                .or_else(|| state.shared_device_of_kind(DeviceKind::Audio))
            {
                commands.push(DeviceCommand {
                    device_id: id.to_string(),
                    action: DeviceAction::SetVolume(*level),
                    origin: intent,
                });
            }
        }
        CommandTemplate::AudioPlay {
            content, volume, ..
        } => {
            if let Some(id) = state
                .device_of_kind_in_room(DeviceKind::Audio, own_room)
                .or_else(|| state.shared_device_of_kind(DeviceKind::Audio))
            {
                commands.push(DeviceCommand {
                    device_id: id.to_string(),
                    action: DeviceAction::SetContent(content.clone()),
                    origin: intent,
                });
                commands.push(DeviceCommand {
                    device_id: id.to_string(),
                    action: DeviceAction::SetVolume(*volume),
                    origin: intent,
                });
            }
        }
        CommandTemplate::TvShow { .. } => {
            if let Some(id) = state.shared_device_of_kind(DeviceKind::Tv) {
                commands.push(DeviceCommand {
                    device_id: id.to_string(),
                    action: DeviceAction::SetPower(true),
                    origin: intent,
                });
                commands.push(DeviceCommand {
                    device_id: id.to_string(),
                    action: DeviceAction::SetChannel(format!("pick-by-{}", event.user_id)),
                    origin: intent,
                });
            }
        }
        CommandTemplate::AllOff => {
            // Unscoped: the baseline shuts the whole house down.
            for (device_id, device) in &state.devices {
                match device {
                    DeviceState::Light { .. } => commands.push(DeviceCommand {
                        device_id: device_id.clone(),
                        action: DeviceAction::SetBrightness(0),
                        origin: intent,
                    }),
                    DeviceState::Audio { .. } => {
                        commands.push(DeviceCommand {
                            device_id: device_id.clone(),
                            action: DeviceAction::SetVolume(0),
                            origin: intent,
                        });
                        commands.push(DeviceCommand {
                            device_id: device_id.clone(),
                            action: DeviceAction::SetContent("off".to_string()),
                            origin: intent,
                        });
                    }
                    DeviceState::Tv { .. } => commands.push(DeviceCommand {
                        device_id: device_id.clone(),
                        action: DeviceAction::SetPower(false),
                        origin: intent,
                    }),
                    DeviceState::Thermostat { .. } => {}
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Parent reports
// ---------------------------------------------------------------------------

/// 21:00 daily digest of a child's activity, plus the immediate alerts that
/// already fired at their original timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParentReport {
    pub child_id: String,
    pub date: NaiveDate,
    pub generated_at: NaiveDateTime,
    pub query_count: usize,
    pub by_category: BTreeMap<String, usize>,
    pub flagged: Vec<String>,
    pub alerts: Vec<EpisodicRecord>,
}

/// Aggregates one child's day from a simulation log. Requires the child's
/// parental-reporting consent; the report itself is stamped 21:00.
pub fn parent_report(
    log: &SimulationLog,
    child_id: &str,
    day: NaiveDate,
) -> Result<ParentReport, SimError> {
    let occupant = log
        .initial_state
        .occupant(child_id)
        .ok_or_else(|| SimError::NoConsent(format!("{child_id}: unknown user")))?;
    if occupant.profile.consent.parental_reporting != Some(true) {
        return Err(SimError::NoConsent(child_id.to_string()));
    }

    let mut report = ParentReport {
        child_id: child_id.to_string(),
        date: day,
        generated_at: day.and_time(NaiveTime::from_hms_opt(21, 0, 0).unwrap()),
        query_count: 0,
        by_category: BTreeMap::new(),
        flagged: Vec::new(),
        alerts: Vec::new(),
    };
    for window in &log.windows {
        if window.timestamp.date() != day {
            continue;
        }
        for event in &window.events {
            if event.user_id != child_id {
                continue;
            }
            report.query_count += 1;
            let key = event
                .category
                .map(|c| c.label().to_string())
                .unwrap_or_else(|| "uncategorized".to_string());
            *report.by_category.entry(key).or_insert(0) += 1;
        }
        for decision in &window.decisions {
            if decision.user_id == child_id {
                report.flagged.extend(
                    decision
                        .flags
                        .iter()
                        .filter(|f| f.starts_with("safety:"))
                        .cloned(),
                );
            }
        }
    }
    report.alerts = log
        .episodic
        .iter()
        .filter(|r| {
            r.user_id == child_id && r.event_type == EventType::Alert && r.timestamp.date() == day
        })
        .cloned()
        .collect();
    Ok(report)
}
