//! Sentence statistics, Flesch Reading Ease, and the four-component
//! 100-point readability score.
//!
//! The tokenizer is deliberately simple and frozen: sentence boundaries at
//! `.!?` followed by whitespace or end of text, words are whitespace-split
//! tokens containing alphanumerics, syllables are contiguous `aeiouy` groups
//! with a silent trailing `e` dropped and a minimum of one per word. Every
//! expected value in the test suite is hand-counted under these exact rules.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReadabilityError {
    #[error("text is empty")]
    EmptyText,
    #[error("zero denominator: sentences and words must both be at least 1")]
    ZeroDenominator,
}

/// Raw counts extracted from a text.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextStats {
    pub sentences: usize,
    pub words: usize,
    pub syllables: usize,
    /// Words of three or more syllables.
    pub complex_words: usize,
    /// Lines starting with `-`, `*`, or `N.` followed by whitespace.
    pub list_markers: usize,
    /// Chunks separated by blank lines.
    pub paragraphs: usize,
}

/// Strips a whitespace token down to its word core: leading/trailing
/// non-alphanumeric characters removed. Returns `None` when nothing
/// alphanumeric remains.
fn word_core(token: &str) -> Option<&str> {
    let start = token.find(|c: char| c.is_alphanumeric())?;
    let end = token.rfind(|c: char| c.is_alphanumeric())?;
    let mut iter = token[end..].char_indices();
    iter.next();
    let end = end + iter.next().map(|(i, _)| i).unwrap_or(token.len() - end);
    Some(&token[start..end])
}

/// Counts syllables in one word: contiguous `aeiouy` groups over the
/// lowercased letters, one trailing silent `e` dropped, minimum 1.
pub fn count_syllables(word: &str) -> usize {
    let letters: Vec<char> = word
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(|c| c.to_lowercase())
        .collect();
    if letters.is_empty() {
        return 1;
    }
    let trimmed: &[char] = if letters.len() > 1 && *letters.last().unwrap() == 'e' {
        &letters[..letters.len() - 1]
    } else {
        &letters[..]
    };
    let is_vowel = |c: char| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y');
    let mut groups = 0;
    let mut in_group = false;
    for &c in trimmed {
        if is_vowel(c) {
            if !in_group {
                groups += 1;
            }
            in_group = true;
        } else {
            in_group = false;
        }
    }
    groups.max(1)
}

/// Word tokens of a text under the frozen tokenizer.
pub fn word_tokens(text: &str) -> Vec<&str> {
    text.split_whitespace().filter_map(word_core).collect()
}

fn is_list_marker_line(line: &str) -> bool {
    let trimmed = line.trim_start();
    let rest = if let Some(r) = trimmed
        .strip_prefix('-')
        .or_else(|| trimmed.strip_prefix('*'))
    {
        r
    } else {
        let digits = trimmed.chars().take_while(|c| c.is_ascii_digit()).count();
        if digits == 0 {
            return false;
        }
        match trimmed[digits..].strip_prefix('.') {
            Some(r) => r,
            None => return false,
        }
    };
    rest.starts_with(char::is_whitespace) && rest.trim().chars().any(|c| !c.is_whitespace())
}

/// Computes all text statistics in one pass over the frozen tokenizer rules.
pub fn text_stats(text: &str) -> Result<TextStats, ReadabilityError> {
    if text.trim().is_empty() {
        return Err(ReadabilityError::EmptyText);
    }

    let mut words = 0usize;
    let mut syllables = 0usize;
    let mut complex_words = 0usize;
    for token in word_tokens(text) {
        words += 1;
        let s = count_syllables(token);
        syllables += s;
        if s >= 3 {
            complex_words += 1;
        }
    }

    // A sentence boundary is a `.`, `!` or `?` followed by whitespace or end
    // of text; a segment only counts as a sentence if it contains a word.
    let mut sentences = 0usize;
    let mut segment_has_word = false;
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            segment_has_word = true;
        }
        let terminal = matches!(c, '.' | '!' | '?');
        let at_boundary = terminal && chars.get(i + 1).map(|n| n.is_whitespace()).unwrap_or(true);
        if at_boundary && segment_has_word {
            sentences += 1;
            segment_has_word = false;
        }
    }
    if segment_has_word {
        sentences += 1;
    }

    let list_markers = text.lines().filter(|l| is_list_marker_line(l)).count();

    let mut paragraphs = 0usize;
    let mut in_paragraph = false;
    for line in text.lines() {
        if line.trim().is_empty() {
            in_paragraph = false;
        } else {
            if !in_paragraph {
                paragraphs += 1;
            }
            in_paragraph = true;
        }
    }

    Ok(TextStats {
        sentences,
        words,
        syllables,
        complex_words,
        list_markers,
        paragraphs,
    })
}

/// Flesch Reading Ease, unclamped:
/// `206.835 - 1.015*(words/sentences) - 84.6*(syllables/words)`.
pub fn flesch(stats: &TextStats) -> Result<f64, ReadabilityError> {
    if stats.sentences == 0 || stats.words == 0 {
        return Err(ReadabilityError::ZeroDenominator);
    }
    let words = stats.words as f64;
    let sentences = stats.sentences as f64;
    let syllables = stats.syllables as f64;
    Ok(206.835 - 1.015 * (words / sentences) - 84.6 * (syllables / words))
}

/// Per-component readability breakdown. Each component is worth up to 25
/// points; the total is capped at 100.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadabilityBreakdown {
    /// Sentence length: 25 at <= 20 words/sentence, linear to 0 at >= 40.
    pub sentence_length: f64,
    /// Complex-word ratio: 25 at <= 0.10, linear to 0 at >= 0.40.
    pub complex_ratio: f64,
    /// Flesch Reading Ease clamped to [0, 100], scaled to [0, 25].
    pub flesch_ease: f64,
    /// 12.5 for at least one list marker plus 12.5 for at least two paragraphs.
    pub structure: f64,
    pub total: f64,
    /// Set when the text has letters but none from the Latin script; the
    /// Flesch component is zeroed in that case.
    pub non_latin_script: bool,
}

fn ramp_down(value: f64, full_until: f64, zero_at: f64) -> f64 {
    if value <= full_until {
        25.0
    } else if value >= zero_at {
        0.0
    } else {
        25.0 * (zero_at - value) / (zero_at - full_until)
    }
}

/// Computes the four-component breakdown for a text.
pub fn readability_breakdown(text: &str) -> Result<ReadabilityBreakdown, ReadabilityError> {
    let stats = text_stats(text)?;
    let non_latin =
        text.chars().any(|c| c.is_alphabetic()) && !text.chars().any(|c| c.is_ascii_alphabetic());

    let sentence_length = if stats.sentences == 0 {
        0.0
    } else {
        ramp_down(stats.words as f64 / stats.sentences as f64, 20.0, 40.0)
    };

    let complex_ratio = if stats.words == 0 {
        0.0
    } else {
        ramp_down(stats.complex_words as f64 / stats.words as f64, 0.10, 0.40)
    };

    let flesch_ease = if non_latin {
        0.0
    } else {
        match flesch(&stats) {
            Ok(fre) => 25.0 * fre.clamp(0.0, 100.0) / 100.0,
            Err(_) => 0.0,
        }
    };

    let structure =
        12.5 * f64::from(stats.list_markers >= 1) + 12.5 * f64::from(stats.paragraphs >= 2);

    let total = (sentence_length + complex_ratio + flesch_ease + structure).min(100.0);
    Ok(ReadabilityBreakdown {
        sentence_length,
        complex_ratio,
        flesch_ease,
        structure,
        total,
        non_latin_script: non_latin,
    })
}

/// Total readability score in [0, 100].
pub fn readability_score(text: &str) -> Result<f64, ReadabilityError> {
    Ok(readability_breakdown(text)?.total)
}
