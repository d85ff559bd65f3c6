//! Pattern-based detection of hallucination artifacts, weird symbol runs,
//! irrelevant keywords, and formatting anomalies, plus the severity score.
//!
//! All detectors are pure functions over a compiled [`DetectionConfig`], so
//! scanning parallelizes freely across responses.

use std::collections::BTreeMap;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Category, ScenarioEntry};

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("pattern {name} failed to compile: {source}")]
    BadPattern {
        name: String,
        #[source]
        source: regex::Error,
    },
    #[error("irrelevant-keyword lexicon for {0:?} is empty")]
    EmptyLexicon(Category),
    #[error("config is not valid JSON: {0}")]
    BadJson(#[from] serde_json::Error),
}

/// Kinds of detected issues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    Hallucination,
    WeirdChars,
    IrrelevantKeyword,
    Anomaly,
}

/// Byte-range evidence for one detected issue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueSpan {
    pub kind: IssueKind,
    pub start: usize,
    pub end: usize,
}

/// Issue tallies plus their evidence spans. Counts always equal the number
/// of spans of each kind; construct through [`IssueCounts::from_spans`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueCounts {
    pub hallucinations: usize,
    pub weird_chars: usize,
    pub irrelevant_keywords: usize,
    pub anomalies: usize,
    pub spans: Vec<IssueSpan>,
}

impl IssueCounts {
    pub fn from_spans(spans: Vec<IssueSpan>) -> Self {
        let mut counts = IssueCounts {
            spans,
            ..Default::default()
        };
        for span in &counts.spans {
            match span.kind {
                IssueKind::Hallucination => counts.hallucinations += 1,
                IssueKind::WeirdChars => counts.weird_chars += 1,
                IssueKind::IrrelevantKeyword => counts.irrelevant_keywords += 1,
                IssueKind::Anomaly => counts.anomalies += 1,
            }
        }
        counts
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_clean(&self) -> bool {
        self.hallucinations == 0
            && self.weird_chars == 0
            && self.irrelevant_keywords == 0
            && self.anomalies == 0
    }
}

/// On-disk shape of the detection config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionConfigFile {
    pub url_pattern: String,
    pub phone_pattern: String,
    pub fabricated_patterns: Vec<String>,
    pub weird_char_pattern: String,
    pub irrelevant_keywords: BTreeMap<Category, Vec<String>>,
    #[serde(default = "default_run_len")]
    pub repeated_char_run: usize,
    #[serde(default = "default_true")]
    pub detect_broken_markup: bool,
    #[serde(default = "default_true")]
    pub detect_truncated_sentence: bool,
}

fn default_run_len() -> usize {
    6
}

fn default_true() -> bool {
    true
}

/// Compiled detection config. All patterns are verified at construction.
#[derive(Debug)]
pub struct DetectionConfig {
    url: Regex,
    phone: Regex,
    fabricated: Vec<Regex>,
    weird: Regex,
    irrelevant: BTreeMap<Category, Vec<Regex>>,
    repeated_char_run: usize,
    detect_broken_markup: bool,
    detect_truncated_sentence: bool,
}

const DEFAULT_DETECTION_JSON: &str = include_str!("../data/detection.json");

impl DetectionConfig {
    pub fn from_file_config(file: &DetectionConfigFile) -> Result<Self, DetectorError> {
        let compile = |name: &str, pattern: &str| {
            Regex::new(pattern).map_err(|source| DetectorError::BadPattern {
                name: name.to_string(),
                source,
            })
        };
        let mut fabricated = Vec::new();
        for (i, p) in file.fabricated_patterns.iter().enumerate() {
            fabricated.push(compile(&format!("fabricated[{i}]"), p)?);
        }
        let mut irrelevant = BTreeMap::new();
        for category in Category::ALL {
            let words = file
                .irrelevant_keywords
                .get(&category)
                .filter(|w| !w.is_empty())
                .ok_or(DetectorError::EmptyLexicon(category))?;
            let compiled = words
                .iter()
                .map(|w| {
                    compile(
                        &format!("irrelevant[{}]", category.label()),
                        &format!(r"(?i)\b{}\b", regex::escape(w)),
                    )
                })
                .collect::<Result<Vec<_>, _>>()?;
            irrelevant.insert(category, compiled);
        }
        Ok(Self {
            url: compile("url_pattern", &file.url_pattern)?,
            phone: compile("phone_pattern", &file.phone_pattern)?,
            fabricated,
            weird: compile("weird_char_pattern", &file.weird_char_pattern)?,
            irrelevant,
            repeated_char_run: file.repeated_char_run.max(2),
            detect_broken_markup: file.detect_broken_markup,
            detect_truncated_sentence: file.detect_truncated_sentence,
        })
    }

    pub fn from_json(json: &str) -> Result<Self, DetectorError> {
        let file: DetectionConfigFile = serde_json::from_str(json)?;
        Self::from_file_config(&file)
    }

    /// The built-in config shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_DETECTION_JSON).expect("embedded detection config is valid")
    }
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Keeps the earliest non-overlapping spans among candidates of one kind.
fn dedupe_spans(mut candidates: Vec<(usize, usize)>, kind: IssueKind) -> Vec<IssueSpan> {
    candidates.sort();
    let mut out: Vec<IssueSpan> = Vec::new();
    for (start, end) in candidates {
        if out.last().map(|s| start >= s.end).unwrap_or(true) {
            out.push(IssueSpan { kind, start, end });
        }
    }
    out
}

fn repeated_run_spans(text: &str, min_len: usize) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut run_char: Option<char> = None;
    let mut run_start = 0usize;
    let mut run_len = 0usize;
    let close_run = |start: usize, end: usize, len: usize, spans: &mut Vec<(usize, usize)>| {
        if len >= min_len {
            spans.push((start, end));
        }
    };
    let mut last_end = 0usize;
    for (i, c) in text.char_indices() {
        if Some(c) == run_char {
            run_len += 1;
        } else {
            close_run(run_start, i, run_len, &mut spans);
            run_char = Some(c);
            run_start = i;
            run_len = 1;
        }
        last_end = i + c.len_utf8();
    }
    close_run(run_start, last_end, run_len, &mut spans);
    spans
}

fn broken_markup_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    // Odd number of ``` fences means one never closed.
    let fences: Vec<usize> = text.match_indices("```").map(|(i, _)| i).collect();
    if fences.len() % 2 == 1 {
        let at = *fences.last().unwrap();
        spans.push((at, at + 3));
    }
    // Unbalanced brackets/parens: flag the first unmatched opener or closer.
    for (open, close) in [('(', ')'), ('[', ']')] {
        let mut stack = Vec::new();
        let mut flagged = false;
        for (i, c) in text.char_indices() {
            if c == open {
                stack.push(i);
            } else if c == close && stack.pop().is_none() && !flagged {
                spans.push((i, i + c.len_utf8()));
                flagged = true;
            }
        }
        if let Some(&i) = stack.first() {
            if !flagged {
                spans.push((i, i + open.len_utf8()));
            }
        }
    }
    spans
}

fn truncated_tail_span(text: &str) -> Option<(usize, usize)> {
    let trimmed = text.trim_end();
    if trimmed.is_empty() {
        return None;
    }
    let last = trimmed.chars().last().unwrap();
    if matches!(
        last,
        '.' | '!' | '?' | '…' | ':' | ';' | ')' | ']' | '"' | '\''
    ) {
        return None;
    }
    // Only call it truncated when the tail looks like prose being cut off.
    let tail_words = trimmed
        .rsplit('\n')
        .next()
        .map(crate::readability::word_tokens)
        .unwrap_or_default();
    if tail_words.len() < 3 {
        return None;
    }
    let start = trimmed
        .char_indices()
        .rev()
        .take(20)
        .last()
        .map(|(i, _)| i)
        .unwrap_or(0);
    Some((start, trimmed.len()))
}

/// Scans one response against the entry it answers. Deterministic; spans of
/// one kind never overlap; irrelevant keywords are counted only against the
/// entry's category lexicon.
pub fn scan(text: &str, entry: &ScenarioEntry, config: &DetectionConfig) -> IssueCounts {
    let mut spans = Vec::new();

    let mut hallucination: Vec<(usize, usize)> = Vec::new();
    for regex in [&config.url, &config.phone]
        .into_iter()
        .chain(config.fabricated.iter())
    {
        hallucination.extend(regex.find_iter(text).map(|m| (m.start(), m.end())));
    }
    spans.extend(dedupe_spans(hallucination, IssueKind::Hallucination));

    let weird: Vec<(usize, usize)> = config
        .weird
        .find_iter(text)
        .map(|m| (m.start(), m.end()))
        .collect();
    spans.extend(dedupe_spans(weird, IssueKind::WeirdChars));

    let mut irrelevant: Vec<(usize, usize)> = Vec::new();
    if let Some(words) = config.irrelevant.get(&entry.category) {
        for regex in words {
            irrelevant.extend(regex.find_iter(text).map(|m| (m.start(), m.end())));
        }
    }
    spans.extend(dedupe_spans(irrelevant, IssueKind::IrrelevantKeyword));

    let mut anomalies = repeated_run_spans(text, config.repeated_char_run);
    if config.detect_broken_markup {
        anomalies.extend(broken_markup_spans(text));
    }
    if config.detect_truncated_sentence {
        anomalies.extend(truncated_tail_span(text));
    }
    spans.extend(dedupe_spans(anomalies, IssueKind::Anomaly));

    IssueCounts::from_spans(spans)
}

/// Severity in [0, 100], where 100 means clean text. The penalty is
/// `10*hallucinations + 5*weird + 15*irrelevant + 3*anomalies` clamped to
/// [0, 100], and the returned value is `100 - penalty`.
pub fn severity(counts: &IssueCounts) -> f64 {
    let penalty = 10.0 * counts.hallucinations as f64
        + 5.0 * counts.weird_chars as f64
        + 15.0 * counts.irrelevant_keywords as f64
        + 3.0 * counts.anomalies as f64;
    100.0 - penalty.clamp(0.0, 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Category, Urgency, UserArchetype};

    fn entry(category: Category) -> ScenarioEntry {
        ScenarioEntry {
            id: "e1".to_string(),
            archetype: UserArchetype::TypicalAdult,
            age: 40,
            query: "What should I do?".to_string(),
            category,
            urgency: Urgency::Low,
            expected_response: "Something sensible.".to_string(),
            constraints: vec![],
            language: "en-US".to_string(),
            concurrent_group: None,
        }
    }

    #[test]
    fn phone_and_url_are_two_hallucinations() {
        let config = DetectionConfig::builtin();
        let text = "Call 555-123-4567 or see http://x.test";
        let counts = scan(text, &entry(Category::Health), &config);
        assert_eq!(counts.hallucinations, 2);
        // Cross-check the two spans against an independent scan.
        let phone_at = text.find("555").unwrap();
        let url_at = text.find("http").unwrap();
        let hall: Vec<_> = counts
            .spans
            .iter()
            .filter(|s| s.kind == IssueKind::Hallucination)
            .collect();
        assert_eq!(hall.len(), 2);
        assert_eq!(hall[0].start, phone_at);
        assert_eq!(hall[1].start, url_at);
    }

    #[test]
    fn empty_text_is_all_zero() {
        let counts = scan("", &entry(Category::Education), &DetectionConfig::builtin());
        assert!(counts.is_clean());
        assert!(counts.spans.is_empty());
    }

    #[test]
    fn snowman_run_is_weird_and_anomalous() {
        let counts = scan(
            "Take your medicine at 8am ☃☃☃☃☃☃",
            &entry(Category::Health),
            &DetectionConfig::builtin(),
        );
        assert!(counts.weird_chars >= 1);
        assert!(counts.anomalies >= 1);
        // The six snowmen are one contiguous run, not six code points.
        assert_eq!(counts.weird_chars, 1);
    }

    #[test]
    fn irrelevant_keywords_use_entry_category_lexicon() {
        let config = DetectionConfig::builtin();
        let text = "You hit the jackpot! Visit the casino tonight.";
        let health = scan(text, &entry(Category::Health), &config);
        assert_eq!(health.irrelevant_keywords, 2);
        // The entertainment lexicon has different words; none match here.
        let entertainment = scan(text, &entry(Category::Entertainment), &config);
        assert_eq!(entertainment.irrelevant_keywords, 0);
    }

    #[test]
    fn counts_always_equal_spans_per_kind() {
        let config = DetectionConfig::builtin();
        let text = "See http://a.test [12] and call 555-123-4567 aaaaaaa ((";
        let counts = scan(text, &entry(Category::DailyTasks), &config);
        for (kind, count) in [
            (IssueKind::Hallucination, counts.hallucinations),
            (IssueKind::WeirdChars, counts.weird_chars),
            (IssueKind::IrrelevantKeyword, counts.irrelevant_keywords),
            (IssueKind::Anomaly, counts.anomalies),
        ] {
            assert_eq!(
                counts.spans.iter().filter(|s| s.kind == kind).count(),
                count
            );
        }
    }

    #[test]
    fn spans_within_a_kind_never_overlap() {
        let config = DetectionConfig::builtin();
        let text = "http://a.test/555-123-4567 and 555-123-4567 [1][2]";
        let counts = scan(text, &entry(Category::Education), &config);
        let mut by_kind: BTreeMap<IssueKind, Vec<&IssueSpan>> = BTreeMap::new();
        for span in &counts.spans {
            by_kind.entry(span.kind).or_default().push(span);
        }
        for spans in by_kind.values() {
            for pair in spans.windows(2) {
                assert!(pair[0].end <= pair[1].start, "overlap: {pair:?}");
            }
        }
    }

    #[test]
    fn truncated_tail_is_an_anomaly() {
        let config = DetectionConfig::builtin();
        let counts = scan(
            "First do the dishes. Then you should probably",
            &entry(Category::DailyTasks),
            &config,
        );
        assert!(counts.anomalies >= 1);
        let clean = scan(
            "First do the dishes. Then rest a while.",
            &entry(Category::DailyTasks),
            &config,
        );
        assert_eq!(clean.anomalies, 0);
    }

    #[test]
    fn severity_closed_form() {
        assert_eq!(severity(&IssueCounts::zero()), 100.0);
        let one_each = IssueCounts {
            hallucinations: 1,
            weird_chars: 1,
            ..Default::default()
        };
        assert_eq!(severity(&one_each), 85.0);
        let saturated = IssueCounts {
            irrelevant_keywords: 3,
            anomalies: 20,
            ..Default::default()
        };
        // 45 + 60 = 105 clamps to 100.
        assert_eq!(severity(&saturated), 0.0);
    }

    #[test]
    fn severity_monotone_under_issue_injection() {
        let base = IssueCounts {
            hallucinations: 2,
            weird_chars: 1,
            irrelevant_keywords: 0,
            anomalies: 3,
            spans: vec![],
        };
        let s0 = severity(&base);
        for bump in 0..4 {
            let mut more = base.clone();
            match bump {
                0 => more.hallucinations += 1,
                1 => more.weird_chars += 1,
                2 => more.irrelevant_keywords += 1,
                _ => more.anomalies += 1,
            }
            assert!(severity(&more) <= s0);
        }
    }

    #[test]
    fn concatenation_keeps_position_independent_counts() {
        let config = DetectionConfig::builtin();
        let e = entry(Category::Health);
        let a = "Visit http://a.test for the jackpot draw ☃☃☃☃☃☃.";
        let b = "Call 555-123-4567 to claim a casino bonus.";
        let joined = format!("{a}\n{b}");
        let ca = scan(a, &e, &config);
        let cb = scan(b, &e, &config);
        let cj = scan(&joined, &e, &config);
        assert!(cj.hallucinations >= ca.hallucinations.max(cb.hallucinations));
        assert!(cj.hallucinations >= ca.hallucinations + cb.hallucinations - 1);
        assert!(cj.weird_chars >= ca.weird_chars);
        assert!(cj.weird_chars >= cb.weird_chars);
        assert!(cj.irrelevant_keywords >= ca.irrelevant_keywords);
        assert!(cj.irrelevant_keywords >= cb.irrelevant_keywords);
    }

    #[test]
    fn builtin_config_compiles_and_rejects_bad_patterns() {
        let _ = DetectionConfig::builtin();
        let bad = r#"{
            "url_pattern": "([",
            "phone_pattern": "x",
            "fabricated_patterns": [],
            "weird_char_pattern": "x",
            "irrelevant_keywords": {
                "daily_tasks": ["a"], "education": ["a"], "entertainment": ["a"],
                "health": ["a"], "emergencies": ["a"]
            }
        }"#;
        assert!(DetectionConfig::from_json(bad).is_err());
    }
}
