//! Seeded synthetic scenario generation: archetype/category quotas, tailored
//! phrasing styles per archetype, and the single/concurrent mix with
//! conflict-tag injection.
//!
//! Generation is a pure function of the config (including its seed): the
//! same config yields bit-identical batches. Multiple batches can run
//! concurrently as long as each has its own seed.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    validate_batch, validate_entry, Category, ScenarioEntry, Urgency, UserArchetype,
};
use crate::judge::{ChatMessage, ChatRequest, EndpointConfig, JudgeClient};
use crate::readability::{count_syllables, word_tokens};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("no template for ({0:?}, {1:?})")]
    MissingTemplate(UserArchetype, Category),
    #[error("quota sums to {quota_sum}, batch total is {total}")]
    InfeasibleQuota { quota_sum: usize, total: usize },
    #[error("not enough entries for archetype-diverse grouping: {0}")]
    NotEnoughEntries(String),
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("bad template bank: {0}")]
    BadBank(String),
    #[error("bank is not valid JSON: {0}")]
    BadJson(#[from] serde_json::Error),
    #[error("authoring endpoint failed: {0}")]
    Endpoint(String),
}

// ---------------------------------------------------------------------------
// Template bank
// ---------------------------------------------------------------------------

/// Query and expected-response templates for one (archetype, category) pair.
/// Templates may reference slot lists as `{slot_name}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemplatePair {
    pub queries: Vec<String>,
    pub responses: Vec<String>,
}

/// Per-archetype template bank with shared slot lists.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemplateBank {
    pub style_tags: BTreeMap<UserArchetype, String>,
    pub slots: BTreeMap<String, Vec<String>>,
    pub templates: BTreeMap<UserArchetype, BTreeMap<Category, TemplatePair>>,
}

const DEFAULT_BANK_JSON: &str = include_str!("../data/template_bank.json");

/// Child queries must stay within this syllable bound per word; the bank
/// validator enforces it over templates and every slot value they can pull.
pub const CHILD_SYLLABLE_BOUND: usize = 2;

impl TemplateBank {
    pub fn from_json(json: &str) -> Result<Self, ScenarioError> {
        let bank: TemplateBank = serde_json::from_str(json)?;
        bank.validate(CHILD_SYLLABLE_BOUND)?;
        Ok(bank)
    }

    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_BANK_JSON).expect("embedded template bank is valid")
    }

    pub fn pair(
        &self,
        archetype: UserArchetype,
        category: Category,
    ) -> Result<&TemplatePair, ScenarioError> {
        self.templates
            .get(&archetype)
            .and_then(|by_category| by_category.get(&category))
            .filter(|pair| !pair.queries.is_empty() && !pair.responses.is_empty())
            .ok_or(ScenarioError::MissingTemplate(archetype, category))
    }

    pub fn style_tag(&self, archetype: UserArchetype) -> &str {
        self.style_tags
            .get(&archetype)
            .map(String::as_str)
            .unwrap_or("plain")
    }

    /// Checks bank invariants: every pair populated, slot references resolve,
    /// neurodivergent responses are enumerated step lists, and child query
    /// templates (plus any slot value they reference) respect the syllable
    /// bound.
    pub fn validate(&self, child_bound: usize) -> Result<(), ScenarioError> {
        for archetype in UserArchetype::ALL {
            for category in Category::ALL {
                let pair = self.pair(archetype, category)?;
                for template in pair.queries.iter().chain(pair.responses.iter()) {
                    for slot in slot_refs(template) {
                        if !self.slots.contains_key(slot) {
                            return Err(ScenarioError::BadBank(format!(
                                "template {template:?} references unknown slot {slot:?}"
                            )));
                        }
                    }
                }
            }
        }
        let neuro = &self.templates[&UserArchetype::Neurodivergent];
        for (category, pair) in neuro {
            for response in &pair.responses {
                let steps = response
                    .lines()
                    .filter(|l| {
                        let t = l.trim_start();
                        t.chars()
                            .next()
                            .map(|c| c.is_ascii_digit())
                            .unwrap_or(false)
                            && t.contains(". ")
                    })
                    .count();
                if steps < 2 {
                    return Err(ScenarioError::BadBank(format!(
                        "neurodivergent {category:?} response is not an enumerated step list"
                    )));
                }
            }
        }
        let child = &self.templates[&UserArchetype::Child];
        for (category, pair) in child {
            for query in &pair.queries {
                self.check_child_words(query, child_bound, *category)?;
            }
        }
        Ok(())
    }

    fn check_child_words(
        &self,
        template: &str,
        bound: usize,
        category: Category,
    ) -> Result<(), ScenarioError> {
        let mut texts = vec![strip_slots(template)];
        for slot in slot_refs(template) {
            texts.extend(self.slots[slot].iter().cloned());
        }
        for text in texts {
            for word in word_tokens(&text) {
                if count_syllables(word) > bound {
                    return Err(ScenarioError::BadBank(format!(
                        "child {category:?} template word {word:?} exceeds {bound} syllables"
                    )));
                }
            }
        }
        Ok(())
    }
}

impl Default for TemplateBank {
    fn default() -> Self {
        Self::builtin()
    }
}

fn slot_refs(template: &str) -> Vec<&str> {
    let mut refs = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let Some(close) = rest[open..].find('}') else {
            break;
        };
        refs.push(&rest[open + 1..open + close]);
        rest = &rest[open + close + 1..];
    }
    refs
}

fn strip_slots(template: &str) -> String {
    let mut out = String::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        match rest[open..].find('}') {
            Some(close) => rest = &rest[open + close + 1..],
            None => {
                rest = "";
                break;
            }
        }
    }
    out.push_str(rest);
    out
}

fn fill_slots(template: &str, bank: &TemplateBank, rng: &mut ChaCha8Rng) -> String {
    let mut out = String::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let Some(close) = rest[open..].find('}') else {
            out.push_str(&rest[open..]);
            return out;
        };
        let name = &rest[open + 1..open + close];
        match bank.slots.get(name).and_then(|values| values.choose(rng)) {
            Some(value) => out.push_str(value),
            None => out.push_str(name),
        }
        rest = &rest[open + close + 1..];
    }
    out.push_str(rest);
    out
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

/// Category quota: evenly balanced, or explicit per-category counts which
/// must sum to the batch total.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryQuota {
    Balanced,
    Explicit(BTreeMap<Category, usize>),
}

/// A pair of archetypes whose co-presence in a group marks a scripted
/// conflict of intents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictPair {
    pub first: UserArchetype,
    pub second: UserArchetype,
    pub tag: String,
}

/// The fixed conflict table: play-noise against rest-quiet, bright against
/// dim, and shared-device contention.
pub fn default_conflict_pairs() -> Vec<ConflictPair> {
    vec![
        ConflictPair {
            first: UserArchetype::Child,
            second: UserArchetype::Elderly,
            tag: "play-noise-vs-rest-quiet".to_string(),
        },
        ConflictPair {
            first: UserArchetype::TypicalAdult,
            second: UserArchetype::Neurodivergent,
            tag: "bright-vs-dim".to_string(),
        },
        ConflictPair {
            first: UserArchetype::Child,
            second: UserArchetype::TypicalAdult,
            tag: "shared-device".to_string(),
        },
    ]
}

/// Batch generation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub total: usize,
    /// Target fraction of entries carrying a concurrent group.
    pub concurrent_fraction: f64,
    pub category_quota: CategoryQuota,
    pub seed: u64,
    pub conflict_pairs: Vec<ConflictPair>,
    pub language: String,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            total: 1000,
            concurrent_fraction: 0.70,
            category_quota: CategoryQuota::Balanced,
            seed: 7,
            conflict_pairs: default_conflict_pairs(),
            language: "en-US".to_string(),
        }
    }
}

impl GenerationConfig {
    fn category_counts(&self) -> Result<Vec<(Category, usize)>, ScenarioError> {
        match &self.category_quota {
            CategoryQuota::Balanced => {
                let per = self.total / Category::ALL.len();
                let remainder = self.total % Category::ALL.len();
                Ok(Category::ALL
                    .into_iter()
                    .enumerate()
                    .map(|(i, c)| (c, per + usize::from(i < remainder)))
                    .collect())
            }
            CategoryQuota::Explicit(map) => {
                let quota_sum: usize = map.values().sum();
                if quota_sum != self.total {
                    return Err(ScenarioError::InfeasibleQuota {
                        quota_sum,
                        total: self.total,
                    });
                }
                Ok(Category::ALL
                    .into_iter()
                    .map(|c| (c, map.get(&c).copied().unwrap_or(0)))
                    .collect())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

fn generation_age(archetype: UserArchetype, rng: &mut ChaCha8Rng) -> u32 {
    match archetype {
        UserArchetype::Child => rng.gen_range(6..=17),
        UserArchetype::Elderly => rng.gen_range(65..=95),
        _ => rng.gen_range(18..=64),
    }
}

fn generation_urgency(category: Category, rng: &mut ChaCha8Rng) -> Urgency {
    if category == Category::Emergencies {
        return Urgency::Emergency;
    }
    match rng.gen_range(0..10u8) {
        0..=4 => Urgency::Low,
        5..=7 => Urgency::Medium,
        _ => Urgency::High,
    }
}

/// Generates a batch: quotas met, archetypes round-robin then shuffled,
/// queries and expected responses from the bank, and the configured fraction
/// of entries interleaved into concurrent groups.
pub fn generate_batch(
    config: &GenerationConfig,
    bank: &TemplateBank,
) -> Result<Vec<ScenarioEntry>, ScenarioError> {
    if !(0.0..=1.0).contains(&config.concurrent_fraction) {
        return Err(ScenarioError::BadConfig(format!(
            "concurrent_fraction {} outside [0, 1]",
            config.concurrent_fraction
        )));
    }
    let counts = config.category_counts()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut entries = Vec::with_capacity(config.total);
    let mut archetype_cursor = 0usize;
    for (category, count) in counts {
        for _ in 0..count {
            let archetype = UserArchetype::ALL[archetype_cursor % UserArchetype::ALL.len()];
            archetype_cursor += 1;
            let pair = bank.pair(archetype, category)?;
            let query_template = pair.queries.choose(&mut rng).unwrap();
            let response_template = pair.responses.choose(&mut rng).unwrap();
            let query = fill_slots(query_template, bank, &mut rng);
            let expected_response = fill_slots(response_template, bank, &mut rng);
            entries.push(ScenarioEntry {
                id: String::new(),
                archetype,
                age: generation_age(archetype, &mut rng),
                query,
                category,
                urgency: generation_urgency(category, &mut rng),
                expected_response,
                constraints: vec![format!("style:{}", bank.style_tag(archetype))],
                language: config.language.clone(),
                concurrent_group: None,
            });
        }
    }

    entries.shuffle(&mut rng);
    for (i, entry) in entries.iter_mut().enumerate() {
        entry.id = format!("e{i:06}");
    }

    let target = (config.total as f64 * config.concurrent_fraction).round() as usize;
    assign_groups(&mut entries, target, None, &config.conflict_pairs, &mut rng)?;

    debug_assert!(entries.iter().all(|e| validate_entry(e).is_ok()));
    debug_assert!(validate_batch(&entries).is_ok());
    Ok(entries)
}

/// Assigns concurrent groups over ungrouped entries until roughly `target`
/// entries are grouped. Each group draws from the two largest archetype
/// buckets first, which guarantees at least two distinct archetypes per
/// group. `fixed_size` pins every group to one size; otherwise sizes vary
/// from 2 to 4.
fn assign_groups(
    entries: &mut [ScenarioEntry],
    target: usize,
    fixed_size: Option<usize>,
    conflict_pairs: &[ConflictPair],
    rng: &mut ChaCha8Rng,
) -> Result<usize, ScenarioError> {
    let mut buckets: BTreeMap<UserArchetype, Vec<usize>> = BTreeMap::new();
    for (i, entry) in entries.iter().enumerate() {
        buckets.entry(entry.archetype).or_default().push(i);
    }

    let mut grouped = 0usize;
    let mut group_seq = 0usize;
    while grouped + 2 <= target {
        let mut size = fixed_size.unwrap_or_else(|| rng.gen_range(2..=4));
        size = size.min(target - grouped).max(2);

        // Two largest buckets first, so the group always spans two archetypes.
        let mut order: Vec<UserArchetype> = buckets
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(&a, _)| a)
            .collect();
        order.sort_by_key(|a| std::cmp::Reverse(buckets[a].len()));
        if order.len() < 2 {
            break;
        }
        let mut members = vec![
            buckets.get_mut(&order[0]).unwrap().remove(0),
            buckets.get_mut(&order[1]).unwrap().remove(0),
        ];
        while members.len() < size {
            let Some(largest) = buckets
                .iter()
                .filter(|(_, v)| !v.is_empty())
                .max_by_key(|(_, v)| v.len())
                .map(|(&a, _)| a)
            else {
                break;
            };
            members.push(buckets.get_mut(&largest).unwrap().remove(0));
        }

        let group_id = format!("g{group_seq:04}");
        group_seq += 1;
        for &i in &members {
            entries[i].concurrent_group = Some(group_id.clone());
        }
        grouped += members.len();

        if let Some(pair) = conflict_pairs.iter().find(|p| {
            members.iter().any(|&i| entries[i].archetype == p.first)
                && members.iter().any(|&i| entries[i].archetype == p.second)
        }) {
            let first = members
                .iter()
                .copied()
                .find(|&i| entries[i].archetype == pair.first)
                .unwrap();
            let second = members
                .iter()
                .copied()
                .find(|&i| entries[i].archetype == pair.second)
                .unwrap();
            for i in [first, second] {
                entries[i]
                    .constraints
                    .push(format!("conflict:{}", pair.tag));
            }
        }
    }
    Ok(grouped)
}

/// Assigns concurrent groups of exactly `group_size` over the given entries,
/// injecting conflict tags where a configured pair matches. Deterministic
/// under the config seed. Entries that cannot join a diverse group keep
/// `concurrent_group = None`.
pub fn interleave_concurrent(
    mut entries: Vec<ScenarioEntry>,
    group_size: usize,
    config: &GenerationConfig,
) -> Result<Vec<ScenarioEntry>, ScenarioError> {
    assert!(
        group_size >= 2,
        "interleave_concurrent requires group_size >= 2"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let target = entries.len() - entries.len() % group_size;
    let grouped = assign_groups(
        &mut entries,
        target,
        Some(group_size),
        &config.conflict_pairs,
        &mut rng,
    )?;
    if grouped == 0 {
        return Err(ScenarioError::NotEnoughEntries(format!(
            "{} entries across {} archetypes cannot form a group of {}",
            entries.len(),
            entries
                .iter()
                .map(|e| e.archetype)
                .collect::<std::collections::BTreeSet<_>>()
                .len(),
            group_size
        )));
    }
    Ok(entries)
}

// ---------------------------------------------------------------------------
// Template authoring pass-through
// ---------------------------------------------------------------------------

/// Authoring aid, off the generation path: asks an endpoint to draft
/// candidate query templates for one (archetype, category) pair. Drafts go
/// through human review into the bank file; `generate_batch` itself stays
/// template-driven and deterministic.
pub fn draft_templates_via_endpoint(
    client: &dyn JudgeClient,
    endpoint: &EndpointConfig,
    archetype: UserArchetype,
    category: Category,
    count: usize,
) -> Result<Vec<String>, ScenarioError> {
    let request = ChatRequest {
        model: endpoint.model_name.clone(),
        messages: vec![
            ChatMessage {
                role: "system".to_string(),
                content: "You draft short household assistant queries, one per line.".to_string(),
            },
            ChatMessage {
                role: "user".to_string(),
                content: format!(
                    "Write {count} short queries a {} user might ask about {}. Plain text, one per line, no numbering.",
                    archetype.label(),
                    category.label()
                ),
            },
        ],
        temperature: if endpoint.deterministic { 0.0 } else { 0.7 },
    };
    let body = client
        .complete(&request)
        .map_err(|e| ScenarioError::Endpoint(e.to_string()))?;
    Ok(body
        .lines()
        .map(|line| {
            line.trim()
                .trim_start_matches(|c: char| c.is_ascii_digit() || c == '.' || c == '-')
                .trim()
                .to_string()
        })
        .filter(|line| !line.is_empty())
        .take(count)
        .collect())
}

// ---------------------------------------------------------------------------
// Distribution report
// ---------------------------------------------------------------------------

/// A per-category mismatch between quota and observed count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotaDeviation {
    pub category: Category,
    pub expected: usize,
    pub actual: usize,
}

/// Direct counts over a batch plus quota deviations beyond tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub total: usize,
    pub per_category: BTreeMap<Category, usize>,
    pub per_archetype: BTreeMap<UserArchetype, usize>,
    pub concurrent_fraction: f64,
    pub quota_deviations: Vec<QuotaDeviation>,
    pub concurrent_within_tolerance: bool,
}

/// Tolerance on the measured concurrent fraction, in absolute terms.
pub const CONCURRENT_FRACTION_TOLERANCE: f64 = 0.02;

/// Counts categories, archetypes, and grouped entries, flagging quota
/// deviations beyond tolerance (exact for explicit quotas, plus or minus one
/// for balanced quotas).
pub fn validate_distribution(
    batch: &[ScenarioEntry],
    config: &GenerationConfig,
) -> DistributionReport {
    let mut per_category: BTreeMap<Category, usize> =
        Category::ALL.into_iter().map(|c| (c, 0)).collect();
    let mut per_archetype: BTreeMap<UserArchetype, usize> =
        UserArchetype::ALL.into_iter().map(|a| (a, 0)).collect();
    let mut grouped = 0usize;
    for entry in batch {
        *per_category.get_mut(&entry.category).unwrap() += 1;
        *per_archetype.get_mut(&entry.archetype).unwrap() += 1;
        if entry.concurrent_group.is_some() {
            grouped += 1;
        }
    }
    let concurrent_fraction = if batch.is_empty() {
        0.0
    } else {
        grouped as f64 / batch.len() as f64
    };

    let mut quota_deviations = Vec::new();
    if let Ok(counts) = config.category_counts() {
        let tolerance = match config.category_quota {
            CategoryQuota::Balanced => 1,
            CategoryQuota::Explicit(_) => 0,
        };
        for (category, expected) in counts {
            let actual = per_category[&category];
            if expected.abs_diff(actual) > tolerance {
                quota_deviations.push(QuotaDeviation {
                    category,
                    expected,
                    actual,
                });
            }
        }
    }

    let concurrent_within_tolerance = batch.is_empty()
        || (concurrent_fraction - config.concurrent_fraction).abs()
            <= CONCURRENT_FRACTION_TOLERANCE;

    DistributionReport {
        total: batch.len(),
        per_category,
        per_archetype,
        concurrent_fraction,
        quota_deviations,
        concurrent_within_tolerance,
    }
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

/// One entry per line, canonical JSON.
pub fn to_jsonl(entries: &[ScenarioEntry]) -> String {
    let mut out = String::new();
    for entry in entries {
        out.push_str(&serde_json::to_string(entry).expect("entries serialize"));
        out.push('\n');
    }
    out
}

pub fn from_jsonl(data: &str) -> Result<Vec<ScenarioEntry>, serde_json::Error> {
    data.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// CSV export with one row per entry; constraints are joined with `;`.
pub fn to_csv(entries: &[ScenarioEntry]) -> String {
    let mut out = String::from(
        "id,archetype,age,query,category,urgency,expected_response,constraints,language,concurrent_group\n",
    );
    for e in entries {
        let urgency = serde_json::to_value(e.urgency).unwrap();
        let row = [
            e.id.clone(),
            e.archetype.label().to_string(),
            e.age.to_string(),
            e.query.clone(),
            e.category.label().to_string(),
            urgency.as_str().unwrap().to_string(),
            e.expected_response.clone(),
            e.constraints.join(";"),
            e.language.clone(),
            e.concurrent_group.clone().unwrap_or_default(),
        ];
        out.push_str(
            &row.iter()
                .map(|f| csv_escape(f))
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(total: usize, seed: u64) -> GenerationConfig {
        GenerationConfig {
            total,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn builtin_bank_validates() {
        TemplateBank::builtin()
            .validate(CHILD_SYLLABLE_BOUND)
            .unwrap();
    }

    #[test]
    fn balanced_1000_batch_hits_quotas_and_mix() {
        let bank = TemplateBank::builtin();
        let batch = generate_batch(&config(1000, 7), &bank).unwrap();
        assert_eq!(batch.len(), 1000);
        let report = validate_distribution(&batch, &config(1000, 7));
        for (category, count) in &report.per_category {
            assert!(
                (199..=201).contains(count),
                "{category:?} got {count} entries"
            );
        }
        assert!(report.quota_deviations.is_empty());
        assert!(
            (report.concurrent_fraction - 0.70).abs() <= 0.02,
            "fraction {}",
            report.concurrent_fraction
        );
        assert!(report.concurrent_within_tolerance);
        for entry in &batch {
            assert!(validate_entry(entry).is_ok(), "{entry:?}");
        }
        assert!(validate_batch(&batch).is_ok());
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let bank = TemplateBank::builtin();
        let a = generate_batch(&config(300, 99), &bank).unwrap();
        let b = generate_batch(&config(300, 99), &bank).unwrap();
        assert_eq!(to_jsonl(&a), to_jsonl(&b));
        let c = generate_batch(&config(300, 100), &bank).unwrap();
        assert_ne!(to_jsonl(&a), to_jsonl(&c));
    }

    #[test]
    fn zero_total_gives_empty_batch() {
        let bank = TemplateBank::builtin();
        let batch = generate_batch(&config(0, 1), &bank).unwrap();
        assert!(batch.is_empty());
    }

    #[test]
    fn explicit_quotas_met_exactly_or_rejected() {
        let bank = TemplateBank::builtin();
        let mut quota = BTreeMap::new();
        quota.insert(Category::Health, 7);
        quota.insert(Category::Education, 3);
        let cfg = GenerationConfig {
            total: 10,
            category_quota: CategoryQuota::Explicit(quota.clone()),
            ..Default::default()
        };
        let batch = generate_batch(&cfg, &bank).unwrap();
        let report = validate_distribution(&batch, &cfg);
        assert_eq!(report.per_category[&Category::Health], 7);
        assert_eq!(report.per_category[&Category::Education], 3);
        assert!(report.quota_deviations.is_empty());

        let bad = GenerationConfig {
            total: 11,
            category_quota: CategoryQuota::Explicit(quota),
            ..Default::default()
        };
        assert!(matches!(
            generate_batch(&bad, &bank),
            Err(ScenarioError::InfeasibleQuota { .. })
        ));
    }

    #[test]
    fn child_queries_respect_syllable_bound() {
        let bank = TemplateBank::builtin();
        let batch = generate_batch(&config(400, 11), &bank).unwrap();
        for entry in batch.iter().filter(|e| e.archetype == UserArchetype::Child) {
            for word in word_tokens(&entry.query) {
                assert!(
                    count_syllables(word) <= CHILD_SYLLABLE_BOUND,
                    "child query word {word:?} in {:?}",
                    entry.query
                );
            }
        }
    }

    #[test]
    fn groups_span_at_least_two_archetypes() {
        let bank = TemplateBank::builtin();
        let batch = generate_batch(&config(500, 3), &bank).unwrap();
        let mut groups: BTreeMap<&str, Vec<&ScenarioEntry>> = BTreeMap::new();
        for entry in &batch {
            if let Some(g) = &entry.concurrent_group {
                groups.entry(g).or_default().push(entry);
            }
        }
        assert!(!groups.is_empty());
        for (gid, members) in groups {
            assert!(members.len() >= 2, "group {gid} too small");
            let archetypes: std::collections::BTreeSet<_> =
                members.iter().map(|e| e.archetype).collect();
            assert!(archetypes.len() >= 2, "group {gid} is mono-archetype");
        }
    }

    fn plain_entry(id: &str, archetype: UserArchetype) -> ScenarioEntry {
        ScenarioEntry {
            id: id.to_string(),
            archetype,
            age: match archetype {
                UserArchetype::Child => 10,
                UserArchetype::Elderly => 70,
                _ => 30,
            },
            query: "Please help with the evening routine.".to_string(),
            category: Category::DailyTasks,
            urgency: Urgency::Low,
            expected_response: "Evening routine started.".to_string(),
            constraints: vec![],
            language: "en-US".to_string(),
            concurrent_group: None,
        }
    }

    #[test]
    fn interleave_four_archetypes_yields_conflict_tagged_group() {
        let entries = vec![
            plain_entry("a", UserArchetype::Child),
            plain_entry("b", UserArchetype::Elderly),
            plain_entry("c", UserArchetype::Neurodivergent),
            plain_entry("d", UserArchetype::TypicalAdult),
        ];
        let out = interleave_concurrent(entries, 4, &config(4, 5)).unwrap();
        let gid = out[0].concurrent_group.clone().unwrap();
        assert!(out
            .iter()
            .all(|e| e.concurrent_group.as_ref() == Some(&gid)));
        // Child and Elderly share the group, so the play-vs-rest tag lands.
        let tagged: Vec<_> = out
            .iter()
            .filter(|e| {
                e.constraints
                    .iter()
                    .any(|c| c == "conflict:play-noise-vs-rest-quiet")
            })
            .collect();
        assert_eq!(tagged.len(), 2);
    }

    #[test]
    fn interleave_same_archetype_only_fails() {
        let entries = vec![
            plain_entry("a", UserArchetype::Child),
            plain_entry("b", UserArchetype::Child),
        ];
        assert!(matches!(
            interleave_concurrent(entries, 2, &config(2, 5)),
            Err(ScenarioError::NotEnoughEntries(_))
        ));
    }

    #[test]
    fn interleave_is_deterministic_under_seed() {
        let entries: Vec<ScenarioEntry> = (0..12)
            .map(|i| plain_entry(&format!("e{i}"), UserArchetype::ALL[i % 4]))
            .collect();
        let a = interleave_concurrent(entries.clone(), 3, &config(12, 21)).unwrap();
        let b = interleave_concurrent(entries, 3, &config(12, 21)).unwrap();
        assert_eq!(to_jsonl(&a), to_jsonl(&b));
    }

    #[test]
    fn distribution_flags_all_education_batch() {
        let batch: Vec<ScenarioEntry> = (0..100)
            .map(|i| {
                let mut e = plain_entry(&format!("e{i}"), UserArchetype::ALL[i % 4]);
                e.category = Category::Education;
                e
            })
            .collect();
        let report = validate_distribution(&batch, &config(100, 1));
        // Education over quota plus four categories at deficit.
        assert_eq!(report.quota_deviations.len(), 5);
        let deficits = report
            .quota_deviations
            .iter()
            .filter(|d| d.actual < d.expected)
            .count();
        assert_eq!(deficits, 4);
    }

    #[test]
    fn empty_batch_gives_zero_report() {
        let report = validate_distribution(&[], &config(0, 1));
        assert_eq!(report.total, 0);
        assert!(report.per_category.values().all(|&c| c == 0));
        assert!(report.quota_deviations.is_empty());
    }

    #[test]
    fn jsonl_round_trip() {
        let bank = TemplateBank::builtin();
        let batch = generate_batch(&config(50, 13), &bank).unwrap();
        let jsonl = to_jsonl(&batch);
        let back = from_jsonl(&jsonl).unwrap();
        assert_eq!(back, batch);
    }

    #[test]
    fn authoring_pass_through_drafts_templates() {
        let client = crate::judge::MockJudgeClient::constant(
            "1. Can you dim the hallway light?\n2. Please queue a calm playlist.\n- extra line",
        );
        let drafts = draft_templates_via_endpoint(
            &client,
            &EndpointConfig::default(),
            UserArchetype::Elderly,
            Category::DailyTasks,
            2,
        )
        .unwrap();
        assert_eq!(
            drafts,
            vec![
                "Can you dim the hallway light?".to_string(),
                "Please queue a calm playlist.".to_string(),
            ]
        );
    }

    #[test]
    fn csv_escapes_embedded_commas() {
        let mut entry = plain_entry("e1", UserArchetype::Child);
        entry.query = "Play a song, please, now".to_string();
        let csv = to_csv(&[entry]);
        assert!(csv.contains("\"Play a song, please, now\""));
    }
}
