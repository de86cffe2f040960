//! Three-way outcome probabilities from two independent Poisson goal counts
//! (the Skellam distribution of their difference) and score sampling.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

/// Smallest intensity used anywhere a Poisson rate is required.
pub const MIN_INTENSITY: f64 = 1e-6;

/// Goal grids are truncated here unless the intensities call for more.
const BASE_GOAL_BOUND: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchIntensities {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl MatchIntensities {
    /// Rates below [`MIN_INTENSITY`] are raised to it.
    ///
    /// # Panics
    /// On non-finite input.
    pub fn new(lambda1: f64, lambda2: f64) -> Self {
        assert!(
            lambda1.is_finite() && lambda2.is_finite(),
            "intensities must be finite: ({lambda1}, {lambda2})"
        );
        MatchIntensities {
            lambda1: lambda1.max(MIN_INTENSITY),
            lambda2: lambda2.max(MIN_INTENSITY),
        }
    }

    pub fn swapped(self) -> Self {
        MatchIntensities {
            lambda1: self.lambda2,
            lambda2: self.lambda1,
        }
    }

    pub fn scaled(self, factor: f64) -> Self {
        MatchIntensities::new(self.lambda1 * factor, self.lambda2 * factor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeProbs {
    pub win1: f64,
    pub draw: f64,
    pub win2: f64,
}

impl OutcomeProbs {
    pub fn as_array(&self) -> [f64; 3] {
        [self.win1, self.draw, self.win2]
    }
}

fn goal_bound(lambda: f64) -> usize {
    let needed = lambda + 12.0 * lambda.sqrt() + 20.0;
    BASE_GOAL_BOUND.max(needed.ceil() as usize)
}

/// P(G = 0..=bound) for G ~ Po(lambda), by the multiplicative recurrence.
pub fn poisson_pmf_table(lambda: f64, bound: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(bound + 1);
    let mut cur = (-lambda).exp();
    p.push(cur);
    for k in 1..=bound {
        cur *= lambda / k as f64;
        p.push(cur);
    }
    p
}

/// P(G1 - G2 = k) as a truncated sum over the second team's goals.
pub fn skellam_pmf(k: i64, lambda1: f64, lambda2: f64) -> f64 {
    let m = MatchIntensities::new(lambda1, lambda2);
    let bound = goal_bound(m.lambda1.max(m.lambda2)) + k.unsigned_abs() as usize;
    let p1 = poisson_pmf_table(m.lambda1, bound);
    let p2 = poisson_pmf_table(m.lambda2, bound);
    let start = if k < 0 { (-k) as usize } else { 0 };
    (start..=bound)
        .filter_map(|j| {
            let i = j as i64 + k;
            (i >= 0 && (i as usize) <= bound).then(|| p1[i as usize] * p2[j])
        })
        .sum()
}

/// Closed form `exp(-(l1+l2)) (l1/l2)^(k/2) I_k(2 sqrt(l1 l2))`.
pub fn skellam_pmf_bessel(k: i64, lambda1: f64, lambda2: f64) -> f64 {
    let m = MatchIntensities::new(lambda1, lambda2);
    let x = 2.0 * (m.lambda1 * m.lambda2).sqrt();
    let log_front = -(m.lambda1 + m.lambda2) + 0.5 * k as f64 * (m.lambda1 / m.lambda2).ln();
    (log_front + ln_bessel_i(k.unsigned_abs(), x)).exp()
}

/// ln I_n(x) for integer order and x > 0, from the power series summed
/// relative to its largest term.
pub fn ln_bessel_i(n: u64, x: f64) -> f64 {
    let n = n as f64;
    let half_ln = (0.5 * x).ln();
    let ln_term = |m: f64| (2.0 * m + n) * half_ln - ln_gamma(m + 1.0) - ln_gamma(m + n + 1.0);
    let terms: Vec<f64> = (0..400).map(|m| ln_term(m as f64)).collect();
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Lanczos approximation (g = 7, n = 9).
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Sum over the strict lower triangle of the joint goal grid: P(G1 > G2).
fn first_wins(p1: &[f64], p2: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut cdf2 = 0.0;
    for i in 1..p1.len() {
        cdf2 += p2[i - 1];
        total += p1[i] * cdf2;
    }
    total
}

/// (P(K > 0), P(K = 0), P(K < 0)) for K = G1 - G2.
///
/// The three parts are evaluated on the same truncated grid and normalized,
/// and the second team's win probability is computed by the same routine
/// with the arguments swapped, so equal intensities give bit-equal wins.
pub fn outcome_probs(m: MatchIntensities) -> OutcomeProbs {
    let m = MatchIntensities::new(m.lambda1, m.lambda2);
    let bound = goal_bound(m.lambda1.max(m.lambda2));
    let p1 = poisson_pmf_table(m.lambda1, bound);
    let p2 = poisson_pmf_table(m.lambda2, bound);
    let win1 = first_wins(&p1, &p2);
    let win2 = first_wins(&p2, &p1);
    let draw: f64 = p1.iter().zip(&p2).map(|(a, b)| a * b).sum();
    let total = win1 + draw + win2;
    OutcomeProbs {
        win1: win1 / total,
        draw: draw / total,
        win2: win2 / total,
    }
}

/// Draw from Po(lambda): sequential-search inversion below 10, the
/// transformed-rejection sampler of `rand_distr` above.
pub fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u32 {
    let lambda = lambda.max(MIN_INTENSITY);
    if lambda < 10.0 {
        let u: f64 = rng.random();
        let mut k = 0u32;
        let mut p = (-lambda).exp();
        let mut cdf = p;
        while u > cdf && k < 1_000 {
            k += 1;
            p *= lambda / k as f64;
            cdf += p;
            if p == 0.0 {
                break;
            }
        }
        k
    } else {
        let d = Poisson::new(lambda).expect("positive finite rate");
        d.sample(rng) as u32
    }
}

pub fn sample_score<R: Rng + ?Sized>(m: MatchIntensities, rng: &mut R) -> (u32, u32) {
    let g1 = sample_poisson(m.lambda1, rng);
    let g2 = sample_poisson(m.lambda2, rng);
    (g1, g2)
}
