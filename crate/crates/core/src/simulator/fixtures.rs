//! Canned household, traces, and agent assignments for simulator runs and
//! the comparison suite.
//!
//! The four-user midnight trace is the canonical conflict scenario: a child
//! asking for playful music, an adult wanting brighter lights, an elderly
//! user wanting everything off for sleep, and a neurodivergent user asking
//! for the music volume to come down, all in one window during quiet hours.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};

use crate::domain::{AutonomyMode, Category, ConsentFlags, Urgency, UserArchetype, UserProfile};
use crate::simulator::{DeviceState, HouseholdState, Occupant, QueryEvent, QuietHours};

/// Name of the canonical four-user midnight conflict trace.
pub const MIDNIGHT_CONFLICT_TRACE: &str = "midnight-conflict";
/// Name of the full scripted conflict suite (a day of windows).
pub const CONFLICT_SUITE_TRACE: &str = "conflict-suite";

pub const SUITE_DATE: NaiveDate = match NaiveDate::from_ymd_opt(2025, 3, 1) {
    Some(d) => d,
    None => panic!("valid date"),
};

fn at(hour: u32, minute: u32) -> NaiveDateTime {
    SUITE_DATE.and_time(NaiveTime::from_hms_opt(hour, minute, 0).unwrap())
}

fn profile(
    user_id: &str,
    pseudonym: &str,
    archetype: UserArchetype,
    age_band: &str,
    autonomy: AutonomyMode,
    parental_reporting: Option<bool>,
) -> UserProfile {
    UserProfile {
        user_id: user_id.to_string(),
        pseudonym: pseudonym.to_string(),
        archetype,
        age_band: age_band.to_string(),
        language: "en-US".to_string(),
        autonomy_mode: autonomy,
        preferences: BTreeMap::new(),
        consent: ConsentFlags {
            data_logging: true,
            parental_reporting,
        },
    }
}

/// Five occupants across four rooms, quiet hours 22:00-07:00. The elderly
/// user runs Autonomous so scoped shutdowns execute; everyone else runs
/// Assisted.
pub fn default_household() -> HouseholdState {
    let mut devices = BTreeMap::new();
    devices.insert(
        "light_living_room".to_string(),
        DeviceState::Light {
            room: "living room".to_string(),
            brightness: 40,
        },
    );
    devices.insert(
        "light_kids_room".to_string(),
        DeviceState::Light {
            room: "kids room".to_string(),
            brightness: 30,
        },
    );
    devices.insert(
        "light_bedroom".to_string(),
        DeviceState::Light {
            room: "bedroom".to_string(),
            brightness: 25,
        },
    );
    devices.insert(
        "light_study".to_string(),
        DeviceState::Light {
            room: "study".to_string(),
            brightness: 35,
        },
    );
    devices.insert(
        "audio_living_room".to_string(),
        DeviceState::Audio {
            room: "living room".to_string(),
            volume: 30,
            content: "off".to_string(),
        },
    );
    devices.insert(
        "audio_kids_room".to_string(),
        DeviceState::Audio {
            room: "kids room".to_string(),
            volume: 25,
            content: "off".to_string(),
        },
    );
    devices.insert(
        "audio_bedroom".to_string(),
        DeviceState::Audio {
            room: "bedroom".to_string(),
            volume: 20,
            content: "off".to_string(),
        },
    );
    devices.insert(
        "audio_study".to_string(),
        DeviceState::Audio {
            room: "study".to_string(),
            volume: 45,
            content: "music".to_string(),
        },
    );
    devices.insert(
        "tv_living_room".to_string(),
        DeviceState::Tv {
            room: "living room".to_string(),
            power: false,
            channel: "news".to_string(),
        },
    );
    devices.insert(
        "thermostat_living_room".to_string(),
        DeviceState::Thermostat {
            room: "living room".to_string(),
            setpoint_c: 21.0,
        },
    );

    let occupants = vec![
        Occupant {
            profile: profile(
                "child1",
                "SunnyOtter-4fd2",
                UserArchetype::Child,
                "6-17",
                AutonomyMode::Assisted,
                Some(true),
            ),
            room: "kids room".to_string(),
        },
        Occupant {
            profile: profile(
                "adult1",
                "SteadyHeron-9a01",
                UserArchetype::TypicalAdult,
                "18-64",
                AutonomyMode::Assisted,
                None,
            ),
            room: "living room".to_string(),
        },
        Occupant {
            profile: profile(
                "adult2",
                "QuietFinch-77b3",
                UserArchetype::TypicalAdult,
                "18-64",
                AutonomyMode::Assisted,
                None,
            ),
            room: "living room".to_string(),
        },
        Occupant {
            profile: profile(
                "elderly1",
                "GoldenWren-c2e8",
                UserArchetype::Elderly,
                "65+",
                AutonomyMode::Autonomous,
                None,
            ),
            room: "bedroom".to_string(),
        },
        Occupant {
            profile: profile(
                "neuro1",
                "CalmLynx-5d19",
                UserArchetype::Neurodivergent,
                "18-64",
                AutonomyMode::Assisted,
                None,
            ),
            room: "study".to_string(),
        },
    ];

    HouseholdState {
        devices,
        clock: at(0, 0),
        quiet_hours: QuietHours {
            start: NaiveTime::from_hms_opt(22, 0, 0).unwrap(),
            end: NaiveTime::from_hms_opt(7, 0, 0).unwrap(),
        },
        occupants,
        shared_rooms: BTreeSet::from(["living room".to_string()]),
    }
}

#[allow(clippy::too_many_arguments)]
fn event(
    ts: NaiveDateTime,
    user_id: &str,
    archetype: UserArchetype,
    urgency: Urgency,
    text: &str,
    keywords: &[&str],
    category: Category,
) -> QueryEvent {
    QueryEvent {
        timestamp: ts,
        user_id: user_id.to_string(),
        text: text.to_string(),
        archetype,
        urgency,
        intent: None,
        expected_keywords: keywords.iter().map(|k| k.to_string()).collect(),
        category: Some(category),
    }
}

/// The four conflicting queries arriving in one midnight window.
pub fn midnight_conflict_trace() -> Vec<QueryEvent> {
    use Category::*;
    use UserArchetype::*;
    vec![
        event(
            at(0, 0),
            "child1",
            Child,
            Urgency::Medium,
            "Play some fun music right now, I need something fun.",
            &["music", "quiet", "room"],
            Entertainment,
        ),
        event(
            at(0, 0),
            "adult1",
            TypicalAdult,
            Urgency::Medium,
            "Make the lights brighter.",
            &["lights", "living", "room"],
            DailyTasks,
        ),
        event(
            at(0, 0),
            "elderly1",
            Elderly,
            Urgency::High,
            "Please turn everything off, I want to sleep.",
            &["off", "bedroom", "sleep"],
            DailyTasks,
        ),
        event(
            at(0, 0),
            "neuro1",
            Neurodivergent,
            Urgency::Medium,
            "I've got some loud music, I need it lower.",
            &["volume", "study", "15"],
            Entertainment,
        ),
    ]
}

/// A full scripted day: the midnight window plus twenty-one more windows of
/// singles, compromises, exclusive-device contention, a flagged child query,
/// and emergencies.
pub fn conflict_suite() -> Vec<QueryEvent> {
    use Category::*;
    use UserArchetype::*;
    let mut trace = midnight_conflict_trace();
    trace.extend(vec![
        // 00:15 play-vs-rest again, two users.
        event(
            at(0, 15),
            "child1",
            Child,
            Urgency::Low,
            "Can you play one more fun song for me?",
            &["music", "quiet", "room"],
            Entertainment,
        ),
        event(
            at(0, 15),
            "elderly1",
            Elderly,
            Urgency::Medium,
            "Please turn the volume down, I want to rest.",
            &["volume", "bedroom", "15"],
            Health,
        ),
        // 01:00 single dim request.
        event(
            at(1, 0),
            "neuro1",
            Neurodivergent,
            Urgency::Low,
            "The study light is too harsh, please dim it.",
            &["lights", "study", "set"],
            DailyTasks,
        ),
        // 02:00 single info request.
        event(
            at(2, 0),
            "adult1",
            TypicalAdult,
            Urgency::Low,
            "What is the plan for tomorrow?",
            &["found", "details", "screen"],
            DailyTasks,
        ),
        // 07:30 child chore guidance, daytime.
        event(
            at(7, 30),
            "child1",
            Child,
            Urgency::Low,
            "Can you help me make my bed?",
            &["screen", "step", "details"],
            DailyTasks,
        ),
        // 08:00 elderly reminder.
        event(
            at(8, 0),
            "elderly1",
            Elderly,
            Urgency::Medium,
            "Remind me to take my pills at nine.",
            &["reminder", "prompt", "time"],
            Health,
        ),
        // 09:00 flagged child query (substances lexicon).
        event(
            at(9, 0),
            "child1",
            Child,
            Urgency::Low,
            "Can I try some beer?",
            &["adult", "support"],
            Health,
        ),
        // 10:00 brightness tug-of-war in the shared living room.
        event(
            at(10, 0),
            "adult1",
            TypicalAdult,
            Urgency::Medium,
            "Set the living room lights to full.",
            &["lights", "living", "set"],
            DailyTasks,
        ),
        event(
            at(10, 0),
            "adult2",
            TypicalAdult,
            Urgency::Medium,
            "Make the living room lights dark, completely off.",
            &["lights", "living", "set"],
            DailyTasks,
        ),
        // 11:00 neuro step guidance.
        event(
            at(11, 0),
            "neuro1",
            Neurodivergent,
            Urgency::Low,
            "Give me a checklist to tidy the study.",
            &["screen", "step", "details"],
            DailyTasks,
        ),
        // 12:00 shared TV contention: child wins on vulnerability, adult queues.
        event(
            at(12, 0),
            "adult1",
            TypicalAdult,
            Urgency::Medium,
            "Put the match on the TV.",
            &["busy", "next", "line"],
            Entertainment,
        ),
        event(
            at(12, 0),
            "child1",
            Child,
            Urgency::Medium,
            "Turn on my show on the TV please.",
            &["show", "tv", "living"],
            Entertainment,
        ),
        // 12:30 queued TV grant lands here; plus an unrelated info request.
        event(
            at(12, 30),
            "elderly1",
            Elderly,
            Urgency::Low,
            "When is my doctor visit?",
            &["found", "details", "screen"],
            Health,
        ),
        // 13:00 volume raise in the shared room.
        event(
            at(13, 0),
            "adult2",
            TypicalAdult,
            Urgency::Low,
            "Raise the volume in the living room.",
            &["volume", "living", "80"],
            Entertainment,
        ),
        // 14:00 neuro reminder.
        event(
            at(14, 0),
            "neuro1",
            Neurodivergent,
            Urgency::Low,
            "Remind me to drink water every hour.",
            &["reminder", "prompt", "time"],
            Health,
        ),
        // 15:00 child education question.
        event(
            at(15, 0),
            "child1",
            Child,
            Urgency::Low,
            "How do I practice my math facts?",
            &["screen", "step", "details"],
            Education,
        ),
        // 16:00 elderly emergency.
        event(
            at(16, 0),
            "elderly1",
            Elderly,
            Urgency::Emergency,
            "I have fallen in the kitchen and cannot get up.",
            &["emergency", "help", "lights"],
            Emergencies,
        ),
        // 17:00 adult daytime music in the shared room.
        event(
            at(17, 0),
            "adult1",
            TypicalAdult,
            Urgency::Low,
            "Play some jazz music in the living room.",
            &["music", "living", "enjoy"],
            Entertainment,
        ),
        // 18:00 neuro lowers the shared room volume.
        event(
            at(18, 0),
            "neuro1",
            Neurodivergent,
            Urgency::Medium,
            "The living room music is too loud, turn it down.",
            &["volume", "living", "15"],
            Entertainment,
        ),
        // 19:00 child TV show, no contention.
        event(
            at(19, 0),
            "child1",
            Child,
            Urgency::Low,
            "Can we watch a silly show on the TV?",
            &["show", "tv", "living"],
            Entertainment,
        ),
        // 20:00 adult adjusts the bedroom lights for the elderly user.
        event(
            at(20, 0),
            "adult2",
            TypicalAdult,
            Urgency::Low,
            "Dim the lights in the bedroom, please.",
            &["lights", "bedroom", "set"],
            DailyTasks,
        ),
        // 22:30 quiet hours: playful request gets capped, baseline violates.
        event(
            at(22, 30),
            "child1",
            Child,
            Urgency::Low,
            "Play a loud dance song right now!",
            &["music", "quiet", "room"],
            Entertainment,
        ),
        // 23:00 elderly shutdown.
        event(
            at(23, 0),
            "elderly1",
            Elderly,
            Urgency::High,
            "Turn everything off, bedtime.",
            &["off", "bedroom", "sleep"],
            DailyTasks,
        ),
        // 23:30 neuro alarm distress.
        event(
            at(23, 30),
            "neuro1",
            Neurodivergent,
            Urgency::High,
            "My alarm keeps blaring and I cannot think.",
            &["emergency", "help", "lights"],
            Emergencies,
        ),
    ]);
    trace
}

/// Default per-archetype sub-agent naming for the multi-agent baseline.
pub fn default_assignment() -> BTreeMap<UserArchetype, String> {
    [
        (UserArchetype::Child, "agent-q".to_string()),
        (UserArchetype::TypicalAdult, "agent-m".to_string()),
        (UserArchetype::Neurodivergent, "agent-l".to_string()),
        (UserArchetype::Elderly, "agent-g".to_string()),
    ]
    .into_iter()
    .collect()
}

/// Autonomy overrides used by the comparison suite (empty: profiles rule).
pub fn default_autonomy() -> BTreeMap<String, AutonomyMode> {
    BTreeMap::new()
}

/// Resolves a named trace fixture.
pub fn named_trace(name: &str) -> Option<Vec<QueryEvent>> {
    match name {
        MIDNIGHT_CONFLICT_TRACE => Some(midnight_conflict_trace()),
        CONFLICT_SUITE_TRACE => Some(conflict_suite()),
        _ => None,
    }
}
