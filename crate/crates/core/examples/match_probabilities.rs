//! Three-way match probabilities from two Poisson goal intensities, with
//! the goal-difference distribution from the Bessel-function closed form.
//!
//! cargo run --release --example match_probabilities

use eurocast::match_prob::{outcome_probs, skellam_pmf, skellam_pmf_bessel, MatchIntensities};

fn main() {
    println!("{:>6} {:>6} {:>7} {:>7} {:>7}", "lam1", "lam2", "win1", "draw", "win2");
    for (l1, l2) in [(1.0, 1.0), (1.8, 0.9), (2.6, 0.5), (0.3, 3.5), (0.05, 8.0)] {
        let p = outcome_probs(MatchIntensities::new(l1, l2));
        println!("{l1:>6.2} {l2:>6.2} {:>7.4} {:>7.4} {:>7.4}", p.win1, p.draw, p.win2);
    }

    println!("\ngoal difference for (1.8, 0.9):");
    for k in -3..=4 {
        let direct = skellam_pmf(k, 1.8, 0.9);
        let bessel = skellam_pmf_bessel(k, 1.8, 0.9);
        println!("{k:>3} {direct:.8} {bessel:.8} {:+.1e}", direct - bessel);
    }
}
