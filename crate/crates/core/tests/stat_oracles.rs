//! Independent brute-force oracles for the statistical tests.
//!
//! The paired-t reference integrates the unnormalized t density with
//! adaptive Simpson quadrature (no gamma functions anywhere, so the route is
//! fully independent of the continued-fraction implementation), plus two
//! closed forms for df = 1 and df = 2. The Wilcoxon reference enumerates
//! all 2^n sign assignments.

use homeval::metrics::{paired_ttest, wilcoxon_signed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Adaptive Simpson quadrature
// ---------------------------------------------------------------------------

fn simpson_segment(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson_segment(fa, flm, fm, a, m);
    let right = simpson_segment(fm, frm, fb, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        left + right + delta / 15.0
    } else {
        adaptive_step(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
            + adaptive_step(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
    }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson_segment(fa, fm, fb, a, b);
    adaptive_step(f, a, b, fa, fm, fb, whole, eps, 48)
}

/// Integrates the unnormalized t density from `from` to infinity via the
/// substitution x = from + s/(1-s).
fn tail_integral(df: f64, from: f64) -> f64 {
    let g = move |x: f64| (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
    let transformed = move |s: f64| {
        let one_minus = 1.0 - s;
        g(from + s / one_minus) / (one_minus * one_minus)
    };
    adaptive_simpson(&transformed, 0.0, 1.0 - 1e-12, 1e-14)
}

/// Two-tailed paired-t p-value by quadrature: the normalization constant is
/// itself computed numerically, so no gamma function enters this path.
fn t_p_quadrature(t: f64, df: f64) -> f64 {
    let upper = tail_integral(df, t.abs());
    let half_mass = tail_integral(df, 0.0);
    (upper / half_mass).min(1.0)
}

// ---------------------------------------------------------------------------
// Paired t against the oracle
// ---------------------------------------------------------------------------

#[test]
fn paired_t_matches_quadrature_on_100_random_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    while checked < 100 {
        let n = rng.gen_range(4..30usize);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let b: Vec<f64> = a.iter().map(|x| x + rng.gen_range(-2.0..2.0)).collect();
        let Ok(result) = paired_ttest(&a, &b) else {
            continue;
        };
        let oracle = t_p_quadrature(result.statistic, (n - 1) as f64);
        assert!(
            (result.p_value - oracle).abs() < 1e-9,
            "n={n} t={} p={} oracle={oracle}",
            result.statistic,
            result.p_value
        );
        checked += 1;
    }
}

#[test]
fn paired_t_matches_closed_forms_for_small_df() {
    // df = 1: p = 1 - (2/pi) * atan(|t|).  df = 2: p = 1 - |t|/sqrt(t^2+2).
    for (a, b) in [
        (vec![1.0, 3.0], vec![0.5, 1.0]),
        (vec![0.2, -0.4], vec![0.0, 0.3]),
    ] {
        let result = paired_ttest(&a, &b).unwrap();
        let expected = 1.0 - (2.0 / std::f64::consts::PI) * result.statistic.abs().atan();
        assert!(
            (result.p_value - expected).abs() < 1e-12,
            "df=1: {} vs {expected}",
            result.p_value
        );
    }
    for (a, b) in [
        (vec![1.0, 2.0, 4.0], vec![0.5, 2.5, 2.0]),
        (vec![5.0, 4.0, 1.0], vec![4.0, 4.5, 2.0]),
    ] {
        let result = paired_ttest(&a, &b).unwrap();
        let t = result.statistic.abs();
        let expected = 1.0 - t / (t * t + 2.0).sqrt();
        assert!(
            (result.p_value - expected).abs() < 1e-12,
            "df=2: {} vs {expected}",
            result.p_value
        );
    }
}

// ---------------------------------------------------------------------------
// Wilcoxon exact against full enumeration
// ---------------------------------------------------------------------------

/// Midranks computed independently (insertion-style, no shared code).
fn oracle_midranks(abs: &[f64]) -> Vec<f64> {
    let n = abs.len();
    let mut ranks = vec![0.0; n];
    for i in 0..n {
        let below = abs.iter().filter(|&&v| v < abs[i]).count();
        let equal = abs.iter().filter(|&&v| v == abs[i]).count();
        // Average of ranks below+1 ..= below+equal.
        ranks[i] = below as f64 + (equal as f64 + 1.0) / 2.0;
    }
    ranks
}

/// Exact two-tailed Wilcoxon p by enumerating every sign assignment.
fn wilcoxon_p_enumeration(diffs: &[f64]) -> (f64, f64) {
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = oracle_midranks(&abs);
    let observed: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    let n = diffs.len();
    let mut count_le = 0u64;
    let mut count_ge = 0u64;
    for mask in 0u64..(1u64 << n) {
        let w: f64 = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| ranks[i])
            .sum();
        if w <= observed {
            count_le += 1;
        }
        if w >= observed {
            count_ge += 1;
        }
    }
    let total = (1u64 << n) as f64;
    let p_le = count_le as f64 / total;
    let p_ge = count_ge as f64 / total;
    (observed, (2.0 * p_le.min(p_ge)).min(1.0))
}

#[test]
fn wilcoxon_exact_matches_enumeration_for_all_n_up_to_12() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for n in 5..=12usize {
        for case in 0..6 {
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let b: Vec<f64> = a
                .iter()
                .map(|x| {
                    // Mix in exact ties on |d| now and then.
                    if case % 2 == 0 && rng.gen_bool(0.3) {
                        x - 1.5
                    } else {
                        x + rng.gen_range(-3.0..3.0)
                    }
                })
                .collect();
            let diffs: Vec<f64> = a
                .iter()
                .zip(&b)
                .map(|(x, y)| x - y)
                .filter(|d| *d != 0.0)
                .collect();
            if diffs.len() < 5 {
                continue;
            }
            let result = wilcoxon_signed(&a, &b).unwrap();
            let (oracle_w, oracle_p) = wilcoxon_p_enumeration(&diffs);
            assert_eq!(result.statistic, oracle_w, "n={n} case={case}");
            assert_eq!(result.p_value, oracle_p, "n={n} case={case} W={oracle_w}");
        }
    }
}

#[test]
fn wilcoxon_all_positive_n5_fixture_matches_enumeration() {
    let a = [2.0, 3.0, 4.0, 5.0, 6.0];
    let b = [1.0, 1.0, 1.0, 1.0, 1.0];
    let result = wilcoxon_signed(&a, &b).unwrap();
    let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let (_, oracle_p) = wilcoxon_p_enumeration(&diffs);
    assert_eq!(result.p_value, oracle_p);
    assert_eq!(result.p_value, 0.0625);
}
