//! Cohort fairness, compliance/safety rates, latency percentiles, and the
//! study's statistical tests: paired t, exact Wilcoxon signed-rank, and
//! Cohen's kappa.
//!
//! The paired-t p-value goes through the regularized incomplete beta
//! function (Lentz continued fraction); the Wilcoxon exact regime uses the
//! signed-rank sum distribution built by dynamic programming over doubled
//! midranks, switching to the tie-corrected normal approximation above
//! n = 25. Both paths are cross-checked against independent brute-force
//! oracles in the integration tests.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::UserArchetype;
use crate::heuristics::{containment, HeuristicConfig};
use crate::simulator::SimulationLog;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("cohort {0:?} has no served requests")]
    EmptyCohort(UserArchetype),
    #[error("no cohorts present")]
    NoCohorts,
    #[error("log contains no decisions")]
    EmptyLog,
    #[error("samples have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),
}

// ---------------------------------------------------------------------------
// Cohort outcomes and the disparate impact ratio
// ---------------------------------------------------------------------------

/// Per-cohort tallies feeding fairness and latency statistics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CohortStats {
    pub served: usize,
    pub satisfied: usize,
    pub violations: usize,
    pub latencies_ms: Vec<f64>,
}

/// Outcomes grouped by archetype.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CohortOutcomes {
    pub cohorts: BTreeMap<UserArchetype, CohortStats>,
}

/// Containment level at which a response counts as satisfying its
/// expected keywords (same metric the heuristics use).
pub const SATISFACTION_THRESHOLD: f64 = 0.5;

/// Builds cohort outcomes from a simulation log. A decision satisfies its
/// event when the response contains at least half of the expected keywords;
/// events without keywords are excluded from the satisfaction tally.
/// Deferred-grant decisions are follow-ups, not fresh answers, and are
/// skipped.
pub fn cohort_outcomes(log: &SimulationLog, heuristics: &HeuristicConfig) -> CohortOutcomes {
    let mut outcomes = CohortOutcomes::default();
    for window in &log.windows {
        for event in &window.events {
            let Some(decision) = window.decisions.iter().find(|d| {
                d.user_id == event.user_id && !d.flags.iter().any(|f| f == "deferred-grant")
            }) else {
                continue;
            };
            let stats = outcomes.cohorts.entry(event.archetype).or_default();
            stats.served += 1;
            stats.latencies_ms.push(decision.wall_latency_ms);
            if !event.expected_keywords.is_empty() {
                let keywords = event.expected_keywords.join(" ");
                if containment(&keywords, &decision.response, &heuristics.stop_words)
                    >= SATISFACTION_THRESHOLD
                {
                    stats.satisfied += 1;
                }
            }
        }
        for violation in &window.violations {
            if let Some(occupant) = log.initial_state.occupant(&violation.user_id) {
                outcomes
                    .cohorts
                    .entry(occupant.profile.archetype)
                    .or_default()
                    .violations += 1;
            }
        }
    }
    outcomes
}

/// Disparate impact ratio: the minimum cohort satisfaction rate divided by
/// the maximum. 1.0 means perfectly even treatment; when every cohort has
/// rate zero the ratio is defined as 1.0 (evenly zero).
pub fn disparate_impact(outcomes: &CohortOutcomes) -> Result<f64, MetricsError> {
    if outcomes.cohorts.is_empty() {
        return Err(MetricsError::NoCohorts);
    }
    let mut rates = Vec::new();
    for (&archetype, stats) in &outcomes.cohorts {
        if stats.served == 0 {
            return Err(MetricsError::EmptyCohort(archetype));
        }
        rates.push(stats.satisfied as f64 / stats.served as f64);
    }
    let min = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = rates.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(1.0);
    }
    Ok(min / max)
}

// ---------------------------------------------------------------------------
// Rates and percentiles
// ---------------------------------------------------------------------------

/// Compliance, safety, and latency summary for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatesSummary {
    pub compliance: f64,
    pub safety_violation_rate: f64,
    pub latency_p50_ms: f64,
    pub latency_p95_ms: f64,
    pub decisions: usize,
    pub violations: usize,
}

/// Nearest-rank percentile: the smallest value with at least `p` percent of
/// the sample at or below it. `p` must be in (0, 100].
pub fn percentile_nearest_rank(samples: &[f64], p: f64) -> f64 {
    assert!(!samples.is_empty(), "percentile of empty sample");
    assert!(p > 0.0 && p <= 100.0, "percentile {p} out of range");
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Compliance (satisfied over keyword-bearing served events), safety
/// violation rate (violations over decisions), and nearest-rank latency
/// percentiles over the measured wall times.
pub fn rates(
    log: &SimulationLog,
    heuristics: &HeuristicConfig,
) -> Result<RatesSummary, MetricsError> {
    let decisions = log.decision_count();
    if decisions == 0 {
        return Err(MetricsError::EmptyLog);
    }
    let outcomes = cohort_outcomes(log, heuristics);
    let mut keyword_served = 0usize;
    let mut satisfied = 0usize;
    let mut latencies = Vec::new();
    for window in &log.windows {
        for event in &window.events {
            if !event.expected_keywords.is_empty() {
                keyword_served += 1;
            }
        }
        for decision in &window.decisions {
            latencies.push(decision.wall_latency_ms);
        }
    }
    for stats in outcomes.cohorts.values() {
        satisfied += stats.satisfied;
    }
    let violations = log.violation_count();
    Ok(RatesSummary {
        compliance: if keyword_served == 0 {
            1.0
        } else {
            satisfied as f64 / keyword_served as f64
        },
        safety_violation_rate: violations as f64 / decisions as f64,
        latency_p50_ms: percentile_nearest_rank(&latencies, 50.0),
        latency_p95_ms: percentile_nearest_rank(&latencies, 95.0),
        decisions,
        violations,
    })
}

// ---------------------------------------------------------------------------
// Statistical tests
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatMethod {
    PairedT,
    WilcoxonSigned,
    CohenKappa,
}

/// Result of one statistical test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub method: StatMethod,
}

mod special {
    //! Minimal special functions for the test statistics: Lanczos
    //! log-gamma, the regularized incomplete beta via Lentz's continued
    //! fraction, and the error-function based normal CDF.

    const LANCZOS_G: f64 = 7.0;
    // Coefficients kept at published precision.
    #[allow(clippy::excessive_precision, clippy::inconsistent_digit_grouping)]
    const LANCZOS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];

    pub fn ln_gamma(x: f64) -> f64 {
        if x < 0.5 {
            // Reflection for the left half-plane.
            let pi = std::f64::consts::PI;
            return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
        }
        let x = x - 1.0;
        let mut acc = LANCZOS[0];
        for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + LANCZOS_G + 0.5;
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }

    fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
        const MAX_ITER: usize = 300;
        const EPS: f64 = 3e-16;
        const FPMIN: f64 = 1e-300;
        let qab = a + b;
        let qap = a + 1.0;
        let qam = a - 1.0;
        let mut c = 1.0;
        let mut d = 1.0 - qab * x / qap;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        d = 1.0 / d;
        let mut h = d;
        for m in 1..=MAX_ITER {
            let m = m as f64;
            let m2 = 2.0 * m;
            let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
            d = 1.0 + aa * d;
            if d.abs() < FPMIN {
                d = FPMIN;
            }
            c = 1.0 + aa / c;
            if c.abs() < FPMIN {
                c = FPMIN;
            }
            d = 1.0 / d;
            h *= d * c;
            let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
            d = 1.0 + aa * d;
            if d.abs() < FPMIN {
                d = FPMIN;
            }
            c = 1.0 + aa / c;
            if c.abs() < FPMIN {
                c = FPMIN;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        h
    }

    /// Regularized incomplete beta function I_x(a, b).
    pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let ln_front =
            ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
        let front = ln_front.exp();
        if x < (a + 1.0) / (a + b + 2.0) {
            front * beta_continued_fraction(a, b, x) / a
        } else {
            1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
        }
    }

    /// Abramowitz-Stegun 7.1.26 rational approximation, |error| < 1.5e-7.
    fn erf(x: f64) -> f64 {
        let sign = if x < 0.0 { -1.0 } else { 1.0 };
        let x = x.abs();
        let t = 1.0 / (1.0 + 0.327_591_1 * x);
        let y = 1.0
            - (((((1.061_405_429 * t - 1.453_152_027) * t) + 1.421_413_741) * t - 0.284_496_736)
                * t
                + 0.254_829_592)
                * t
                * (-x * x).exp();
        sign * y
    }

    pub fn normal_cdf(x: f64) -> f64 {
        0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
    }
}

/// Two-tailed paired t-test. The p-value is computed through the
/// t-distribution CDF via the continued-fraction incomplete beta.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<StatResult, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(MetricsError::DegenerateSample(format!(
            "{n} pairs, need at least 2"
        )));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n as f64 - 1.0);
    if var == 0.0 {
        return Err(MetricsError::DegenerateSample(
            "differences have zero variance".to_string(),
        ));
    }
    let t = mean / (var / n as f64).sqrt();
    let df = (n - 1) as f64;
    let p = special::reg_inc_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0);
    Ok(StatResult {
        statistic: t,
        p_value: p,
        n,
        method: StatMethod::PairedT,
    })
}

/// Midranks of the absolute differences, doubled so ties (.5 steps) stay
/// integral.
fn doubled_midranks(abs_diffs: &[f64]) -> Vec<u64> {
    let n = abs_diffs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| abs_diffs[i].partial_cmp(&abs_diffs[j]).unwrap());
    let mut doubled = vec![0u64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && abs_diffs[order[j + 1]] == abs_diffs[order[i]] {
            j += 1;
        }
        // Ranks i+1 ..= j+1 share the midrank; doubled it is (i+j+2).
        let doubled_rank = (i + j + 2) as u64;
        for &k in &order[i..=j] {
            doubled[k] = doubled_rank;
        }
        i = j + 1;
    }
    doubled
}

/// Two-tailed Wilcoxon signed-rank test. Zero differences are dropped
/// (standard signed-rank convention); the exact distribution is used for
/// n <= 25 and the tie-corrected normal approximation beyond that. The
/// statistic reported is W+, the positive-rank sum.
pub fn wilcoxon_signed(a: &[f64], b: &[f64]) -> Result<StatResult, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n < 5 {
        return Err(MetricsError::DegenerateSample(format!(
            "{n} non-zero differences, need at least 5"
        )));
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let doubled = doubled_midranks(&abs);
    let w_plus_doubled: u64 = diffs
        .iter()
        .zip(&doubled)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    let w_plus = w_plus_doubled as f64 / 2.0;

    let p = if n <= 25 {
        // Exact: distribution of the doubled rank sum over all 2^n sign
        // assignments, built by DP. Counts fit f64 exactly (2^25 < 2^53).
        let total: u64 = doubled.iter().sum();
        let mut dist = vec![0.0f64; total as usize + 1];
        dist[0] = 1.0;
        for &r in &doubled {
            for s in (r as usize..dist.len()).rev() {
                dist[s] += dist[s - r as usize];
            }
        }
        let denom = (n as f64).exp2();
        let observed = w_plus_doubled as usize;
        let p_le: f64 = dist[..=observed].iter().sum::<f64>() / denom;
        let p_ge: f64 = dist[observed..].iter().sum::<f64>() / denom;
        (2.0 * p_le.min(p_ge)).min(1.0)
    } else {
        let n_f = n as f64;
        let mean = n_f * (n_f + 1.0) / 4.0;
        // Tie correction: sum of (t^3 - t) over tie-group sizes t.
        let mut tie_term = 0.0;
        let mut sorted = abs.clone();
        sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i;
            while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            tie_term += t * t * t - t;
            i = j + 1;
        }
        let var = n_f * (n_f + 1.0) * (2.0 * n_f + 1.0) / 24.0 - tie_term / 48.0;
        let z = (w_plus - mean) / var.sqrt();
        (2.0 * (1.0 - special::normal_cdf(z.abs()))).clamp(0.0, 1.0)
    };

    Ok(StatResult {
        statistic: w_plus,
        p_value: p,
        n,
        method: StatMethod::WilcoxonSigned,
    })
}

/// Cohen's kappa between two equal-length label sequences, with the
/// large-sample null-hypothesis z-test for the p-value. Annotation
/// agreement reports should flag kappa below 0.7.
pub fn cohen_kappa<T: Ord>(a: &[T], b: &[T]) -> Result<StatResult, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n == 0 {
        return Err(MetricsError::DegenerateLabels("no labels".to_string()));
    }
    let mut categories: Vec<&T> = a.iter().chain(b.iter()).collect();
    categories.sort();
    categories.dedup();
    if categories.len() < 2 {
        return Err(MetricsError::DegenerateLabels(
            "need at least 2 observed categories".to_string(),
        ));
    }
    let index_of = |label: &T| categories.binary_search(&label).unwrap();
    let k = categories.len();
    let mut marg_a = vec![0.0f64; k];
    let mut marg_b = vec![0.0f64; k];
    let mut agree = 0usize;
    for (x, y) in a.iter().zip(b) {
        marg_a[index_of(x)] += 1.0;
        marg_b[index_of(y)] += 1.0;
        if x == y {
            agree += 1;
        }
    }
    let n_f = n as f64;
    for m in marg_a.iter_mut().chain(marg_b.iter_mut()) {
        *m /= n_f;
    }
    let p_o = agree as f64 / n_f;
    let p_e: f64 = marg_a.iter().zip(&marg_b).map(|(x, y)| x * y).sum();
    if (1.0 - p_e).abs() < 1e-12 {
        return Err(MetricsError::DegenerateLabels(
            "expected agreement is 1".to_string(),
        ));
    }
    let kappa = (p_o - p_e) / (1.0 - p_e);

    // Fleiss large-sample variance of kappa under the null of chance
    // agreement.
    let cross: f64 = marg_a
        .iter()
        .zip(&marg_b)
        .map(|(x, y)| x * y * (x + y))
        .sum();
    let var0 = (p_e + p_e * p_e - cross) / (n_f * (1.0 - p_e) * (1.0 - p_e));
    let p_value = if var0 <= 0.0 {
        if kappa.abs() < 1e-12 {
            1.0
        } else {
            0.0
        }
    } else {
        let z = kappa / var0.sqrt();
        (2.0 * (1.0 - special::normal_cdf(z.abs()))).clamp(0.0, 1.0)
    };

    Ok(StatResult {
        statistic: kappa,
        p_value,
        n,
        method: StatMethod::CohenKappa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::fixtures::{
        conflict_suite, default_assignment, default_autonomy, default_household,
    };
    use crate::simulator::{run_multi_agent_baseline, run_trace, PolicyConfig};

    fn outcomes(rates: &[(UserArchetype, usize, usize)]) -> CohortOutcomes {
        let mut out = CohortOutcomes::default();
        for &(archetype, served, satisfied) in rates {
            out.cohorts.insert(
                archetype,
                CohortStats {
                    served,
                    satisfied,
                    violations: 0,
                    latencies_ms: vec![],
                },
            );
        }
        out
    }

    #[test]
    fn dir_is_one_when_rates_equal() {
        let out = outcomes(&[
            (UserArchetype::Child, 10, 9),
            (UserArchetype::Elderly, 20, 18),
            (UserArchetype::Neurodivergent, 30, 27),
            (UserArchetype::TypicalAdult, 40, 36),
        ]);
        assert!((disparate_impact(&out).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dir_matches_hand_computed_ratio() {
        let out = outcomes(&[
            (UserArchetype::Child, 100, 90),
            (UserArchetype::Elderly, 100, 85),
            (UserArchetype::Neurodivergent, 100, 100),
            (UserArchetype::TypicalAdult, 100, 95),
        ]);
        assert!((disparate_impact(&out).unwrap() - 0.85).abs() < 1e-12);
    }

    #[test]
    fn dir_rejects_empty_cohort() {
        let out = outcomes(&[(UserArchetype::Child, 0, 0), (UserArchetype::Elderly, 5, 5)]);
        assert_eq!(
            disparate_impact(&out).unwrap_err(),
            MetricsError::EmptyCohort(UserArchetype::Child)
        );
    }

    #[test]
    fn dir_is_scale_invariant() {
        let base = outcomes(&[
            (UserArchetype::Child, 10, 7),
            (UserArchetype::Elderly, 20, 11),
        ]);
        let scaled = outcomes(&[
            (UserArchetype::Child, 30, 21),
            (UserArchetype::Elderly, 60, 33),
        ]);
        assert!(
            (disparate_impact(&base).unwrap() - disparate_impact(&scaled).unwrap()).abs() < 1e-12
        );
    }

    #[test]
    fn percentile_nearest_rank_examples() {
        let samples: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(percentile_nearest_rank(&samples, 50.0), 50.0);
        assert_eq!(percentile_nearest_rank(&samples, 95.0), 95.0);
        assert_eq!(percentile_nearest_rank(&samples, 100.0), 100.0);
        assert_eq!(percentile_nearest_rank(&[42.0], 50.0), 42.0);
    }

    #[test]
    fn one_violation_in_fourteen_decisions_rates_point_0714() {
        let state = default_household();
        let policy = PolicyConfig::default();
        let heuristics = HeuristicConfig::builtin();
        // Build a log with exactly 14 decisions and trim violations to 1.
        let trace: Vec<_> = conflict_suite().into_iter().take(14).collect();
        let mut log =
            run_multi_agent_baseline(&trace, &state, &policy, &default_assignment(), 1).unwrap();
        assert_eq!(log.decision_count(), 14);
        let mut kept = 0;
        for window in &mut log.windows {
            window.violations.retain(|_| {
                kept += 1;
                kept <= 1
            });
        }
        assert_eq!(log.violation_count(), 1);
        let summary = rates(&log, &heuristics).unwrap();
        assert!((summary.safety_violation_rate - 1.0 / 14.0).abs() < 1e-12);
        assert!((summary.safety_violation_rate - 0.0714).abs() < 5e-5);
    }

    #[test]
    fn rates_are_permutation_invariant_over_windows() {
        let state = default_household();
        let policy = PolicyConfig::default();
        let heuristics = HeuristicConfig::builtin();
        let log = run_trace(&conflict_suite(), &state, &policy, &default_autonomy(), 7).unwrap();
        let forward = rates(&log, &heuristics).unwrap();
        let mut reversed = log.clone();
        reversed.windows.reverse();
        let backward = rates(&reversed, &heuristics).unwrap();
        assert_eq!(forward.compliance, backward.compliance);
        assert_eq!(
            forward.safety_violation_rate,
            backward.safety_violation_rate
        );
        assert_eq!(forward.latency_p50_ms, backward.latency_p50_ms);
    }

    #[test]
    fn baseline_rates_show_violations_single_agent_none() {
        let state = default_household();
        let policy = PolicyConfig::default();
        let heuristics = HeuristicConfig::builtin();
        let trace = conflict_suite();
        let single = run_trace(&trace, &state, &policy, &default_autonomy(), 7).unwrap();
        let baseline =
            run_multi_agent_baseline(&trace, &state, &policy, &default_assignment(), 7).unwrap();
        let single_rates = rates(&single, &heuristics).unwrap();
        let baseline_rates = rates(&baseline, &heuristics).unwrap();
        assert_eq!(single_rates.safety_violation_rate, 0.0);
        assert!(baseline_rates.safety_violation_rate > 0.0);
        assert!(single_rates.compliance > baseline_rates.compliance);

        let single_dir = disparate_impact(&cohort_outcomes(&single, &heuristics)).unwrap();
        let baseline_dir = disparate_impact(&cohort_outcomes(&baseline, &heuristics)).unwrap();
        assert!(single_dir >= baseline_dir);
    }

    #[test]
    fn paired_t_identical_samples_degenerate() {
        let a = [1.0, 2.0, 3.0];
        assert!(matches!(
            paired_ttest(&a, &a),
            Err(MetricsError::DegenerateSample(_))
        ));
    }

    #[test]
    fn paired_t_constant_shift_degenerate() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 3.0, 4.0, 5.0, 6.0];
        assert!(matches!(
            paired_ttest(&a, &b),
            Err(MetricsError::DegenerateSample(_))
        ));
    }

    #[test]
    fn paired_t_three_point_fixture() {
        // diffs {0.1, -0.2, -0.2}: mean -0.1, sd 0.1*sqrt(3), t = -1,
        // p = I_{2/3}(1, 1/2) = 1 - sqrt(1/3).
        let a = [1.1, 2.0, 2.9];
        let b = [1.0, 2.2, 3.1];
        let result = paired_ttest(&a, &b).unwrap();
        assert!(
            (result.statistic + 1.0).abs() < 1e-12,
            "t = {}",
            result.statistic
        );
        let expected_p = 1.0 - (1.0f64 / 3.0).sqrt();
        assert!(
            (result.p_value - expected_p).abs() < 1e-12,
            "p = {} vs {expected_p}",
            result.p_value
        );
    }

    #[test]
    fn paired_t_zero_t_gives_p_one() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 1.0, 4.0, 3.0];
        let result = paired_ttest(&a, &b).unwrap();
        assert_eq!(result.statistic, 0.0);
        assert!((result.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wilcoxon_symmetric_differences_give_p_one() {
        let a = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let b = [1.0, -1.0, 2.0, -2.0, 3.0, -3.0];
        let result = wilcoxon_signed(&a, &b).unwrap();
        assert_eq!(result.p_value, 1.0);
        // W+ sits at the distribution center n(n+1)/4 = 10.5.
        assert!((result.statistic - 10.5).abs() < 1e-12);
    }

    #[test]
    fn wilcoxon_all_positive_n5_is_exact_pow2() {
        let a = [2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 1.0, 1.0, 1.0, 1.0];
        let result = wilcoxon_signed(&a, &b).unwrap();
        assert!(
            (result.p_value - 0.0625).abs() < 1e-15,
            "p = {}",
            result.p_value
        );
        assert_eq!(result.statistic, 15.0);
    }

    #[test]
    fn wilcoxon_drops_zero_differences() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let b = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        assert!(matches!(
            wilcoxon_signed(&a, &b),
            Err(MetricsError::DegenerateSample(_))
        ));
        // Three non-zero differences after dropping zeros: still degenerate.
        let c = [1.5, 2.0, 3.0, 4.5, 5.0, 6.5, 7.0];
        assert!(matches!(
            wilcoxon_signed(&a, &c),
            Err(MetricsError::DegenerateSample(_))
        ));
    }

    #[test]
    fn wilcoxon_normal_approximation_regime() {
        let a: Vec<f64> = (1..=30).map(|i| i as f64).collect();
        let b: Vec<f64> = (1..=30)
            .map(|i| i as f64 + if i % 3 == 0 { 1.5 } else { -0.5 })
            .collect();
        let result = wilcoxon_signed(&a, &b).unwrap();
        assert!(result.p_value > 0.0 && result.p_value <= 1.0);
        assert_eq!(result.n, 30);
    }

    #[test]
    fn kappa_identical_labels_is_one() {
        let labels: Vec<String> = ["a", "b", "a", "c", "b", "a"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let result = cohen_kappa(&labels, &labels).unwrap();
        assert!((result.statistic - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kappa_single_label_is_degenerate() {
        let labels = vec!["same"; 10];
        assert!(matches!(
            cohen_kappa(&labels, &labels),
            Err(MetricsError::DegenerateLabels(_))
        ));
    }

    #[test]
    fn kappa_independent_uniform_labels_near_zero() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let a: Vec<u8> = (0..4000).map(|_| rng.gen_range(0..4u8)).collect();
        let b: Vec<u8> = (0..4000).map(|_| rng.gen_range(0..4u8)).collect();
        let result = cohen_kappa(&a, &b).unwrap();
        assert!(
            result.statistic.abs() < 0.05,
            "kappa = {}",
            result.statistic
        );
    }

    #[test]
    fn ln_gamma_matches_known_values() {
        // Gamma(5) = 24, Gamma(0.5) = sqrt(pi).
        assert!((special::ln_gamma(5.0) - 24.0f64.ln()).abs() < 1e-12);
        assert!((special::ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
    }
}
