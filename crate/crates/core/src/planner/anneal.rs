//! Argmax over a small discrete score vector, by annealing or by scan.

use rand::Rng;

use crate::rng::SimRng;

/// Simulated annealing over indices of `scores`, maximizing.
///
/// Starts at a random index; each iteration jumps to a uniformly drawn other
/// index and accepts it if the score improves, or otherwise if
/// `exp(delta / t_k) > omega` with `t_k = t0 / (k + 1)` and `omega ~ U(0, 1)`.
/// Returns the best index visited; equal scores resolve to the lower index.
pub fn anneal_argmax(scores: &[f64], t0: f64, k_max: u32, rng: &mut SimRng) -> usize {
    assert!(!scores.is_empty(), "annealing needs at least one candidate");
    let n = scores.len();
    if n == 1 {
        return 0;
    }
    let mut current = rng.random_range(0..n);
    let mut best = current;
    for k in 0..k_max {
        let t = t0 / (f64::from(k) + 1.0);
        let mut next = rng.random_range(0..n - 1);
        if next >= current {
            next += 1;
        }
        let delta = scores[next] - scores[current];
        let accept = delta > 0.0 || (delta / t).exp() > rng.random::<f64>();
        if accept {
            current = next;
            if scores[current] > scores[best] || (scores[current] == scores[best] && current < best) {
                best = current;
            }
        }
    }
    best
}

/// Index of the first maximum.
pub fn exhaustive_argmax(scores: &[f64]) -> usize {
    assert!(!scores.is_empty(), "argmax of an empty score vector");
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}
