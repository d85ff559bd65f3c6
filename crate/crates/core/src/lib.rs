//! Desk-scale benchmark harness for multi-user household AI agents.
//!
//! The crate covers the full loop: seeded synthetic scenario generation,
//! hybrid judge+heuristic multi-axis response evaluation, a deterministic
//! single-agent arbitration simulator with a multi-agent baseline, and the
//! fairness/safety/latency statistics used to compare the two.
//!
//! Module map:
//!
//! - [`domain`]: shared vocabulary: archetypes, scenario entries, profiles,
//!   episodic records, evaluation axes.
//! - [`scenario`]: seeded batch generator with category quotas, archetype
//!   phrasing styles, and concurrent-group interleaving.
//! - [`detectors`]: regex detection of hallucination artifacts, weird
//!   symbols, irrelevant keywords, and formatting anomalies.
//! - [`readability`]: sentence statistics, Flesch Reading Ease, and the
//!   four-component 100-point readability score.
//! - [`heuristics`]: optimistic per-axis fallback scorers.
//! - [`judge`]: pluggable judge client, verdict parsing, piecewise raw-score
//!   normalization, multi-run orchestration, fallback trigger.
//! - [`scoring`]: weight normalization, weighted totals, interpretive
//!   categories, completion, and the evaluation pipeline.
//! - [`simulator`]: household world, single-agent arbitration policy,
//!   multi-agent baseline, autonomy modes, parental flagging/reports.
//! - [`metrics`]: disparate impact ratio, compliance/violation rates,
//!   latency percentiles, paired t / Wilcoxon / Cohen's kappa.

pub mod detectors;
pub mod domain;
pub mod heuristics;
pub mod judge;
pub mod metrics;
pub mod readability;
pub mod scenario;
pub mod scoring;
pub mod simulator;

pub use domain::{
    AgentResponse, Axis, Category, EpisodicRecord, EventType, Producer, ScenarioEntry, Urgency,
    UserArchetype, UserProfile,
};
