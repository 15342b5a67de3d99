use rand::Rng;

use crate::quantum_math::{purify_once, purify_success_probability, Fidelity};
use crate::topology::{sample_initial_fidelity, HopProfile};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeOutcome {
    /// Fidelity of the surviving pairs, or `None` if the batch ran out.
    pub fidelity: Option<Fidelity>,
    pub pairs_consumed: u64,
}

/// Runs `rounds` rounds of pairwise purification over `allocated` pairs that
/// all start at `f0`. A round pairs survivors two at a time; each attempt
/// keeps one pair with the success probability at the current fidelity and
/// an unpaired leftover is dropped. Every allocated pair counts as consumed.
pub fn purification_cascade<R: Rng + ?Sized>(f0: Fidelity, rounds: u32, allocated: u64, rng: &mut R) -> CascadeOutcome {
    let mut alive = allocated;
    let mut f = f0;
    for _ in 0..rounds {
        let p = purify_success_probability(f);
        let attempts = alive / 2;
        alive = (0..attempts).filter(|_| rng.random_bool(p)).count() as u64;
        f = purify_once(f);
        if alive == 0 {
            break;
        }
    }
    CascadeOutcome {
        fidelity: (alive > 0).then_some(f),
        pairs_consumed: allocated,
    }
}

/// Draws one initial fidelity for the hop and runs the cascade on it.
pub fn run_purification_cascade<R: Rng + ?Sized>(
    hop: &HopProfile,
    rounds: u32,
    allocated: u64,
    rng: &mut R,
) -> CascadeOutcome {
    let f0 = sample_initial_fidelity(hop, rng);
    purification_cascade(f0, rounds, allocated, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum_math::purify_rounds;
    use crate::rng::{substream, Stream};
    use crate::topology::NodeId;

    /// Survival probability by exact recursion over the binomial number of
    /// successes per round.
    fn survival_oracle(f0: f64, rounds: u32, allocated: u64) -> f64 {
        let mut dist = vec![0.0; allocated as usize + 1];
        dist[allocated as usize] = 1.0;
        let mut f = f0;
        for _ in 0..rounds {
            let g = 1.0 - f;
            let p = f * f + 2.0 * f * g / 3.0 + 5.0 * g * g / 9.0;
            let mut next = vec![0.0; dist.len()];
            for (m, &w) in dist.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let n = m / 2;
                let mut coef = 1.0;
                for (k, slot) in next.iter_mut().enumerate().take(n + 1) {
                    if k > 0 {
                        coef *= (n - k + 1) as f64 / k as f64;
                    }
                    *slot += w * coef * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32);
                }
            }
            dist = next;
            f = (f * f + g * g / 9.0) / p;
        }
        1.0 - dist[0]
    }

    #[test]
    fn perfect_pairs_always_survive() {
        let mut rng = substream(1, Stream::Cascade, &[]);
        let out = purification_cascade(Fidelity::ONE, 1, 10, &mut rng);
        assert_eq!(out.fidelity, Some(Fidelity::ONE));
        assert_eq!(out.pairs_consumed, 10);
    }

    #[test]
    fn surviving_fidelity_is_deterministic() {
        let f0 = Fidelity::new(0.85).unwrap();
        let expected = purify_rounds(f0, 2);
        for seed in 0..200 {
            let mut rng = substream(seed, Stream::Cascade, &[]);
            let out = purification_cascade(f0, 2, 30, &mut rng);
            assert_eq!(out.pairs_consumed, 30);
            if let Some(f) = out.fidelity {
                assert_eq!(f, expected);
            }
        }
    }

    #[test]
    fn too_few_pairs_deplete() {
        let mut rng = substream(1, Stream::Cascade, &[]);
        let out = purification_cascade(Fidelity::ONE, 3, 4, &mut rng);
        assert_eq!(out.fidelity, None);
        assert_eq!(out.pairs_consumed, 4);
    }

    #[test]
    fn oracle_sanity() {
        assert_eq!(survival_oracle(1.0, 3, 8), 1.0);
        assert_eq!(survival_oracle(1.0, 3, 7), 0.0);
        let depletion = 1.0 - survival_oracle(0.75, 3, 60);
        assert!((depletion - 6.917353e-3).abs() < 1e-8, "{depletion}");
    }

    #[test]
    fn matches_oracle() {
        let trials = 20_000;
        for (f0, rounds, n) in [(0.6, 3, 20u64), (0.75, 2, 10), (0.5, 1, 2)] {
            let mut rng = substream(9, Stream::Cascade, &[rounds as u64, n]);
            let f = Fidelity::new(f0).unwrap();
            let hits = (0..trials)
                .filter(|_| purification_cascade(f, rounds, n, &mut rng).fidelity.is_some())
                .count();
            let p = survival_oracle(f0, rounds, n);
            let se = (p * (1.0 - p) / trials as f64).sqrt();
            let est = hits as f64 / trials as f64;
            assert!((est - p).abs() <= 4.0 * se + 1e-12, "{f0} {rounds} {n}: {est} vs {p}");
        }
    }

    #[test]
    fn hop_draw_then_cascade() {
        let hop = HopProfile::new(NodeId(0), NodeId(1), 0.05, 1.0).unwrap();
        let hop = HopProfile { fidelity_stddev: 0.0, ..hop };
        let mut rng = substream(2, Stream::Cascade, &[]);
        let out = run_purification_cascade(&hop, 1, 10, &mut rng);
        let expected = purify_once(Fidelity::new(0.95).unwrap());
        assert_eq!(out.fidelity, Some(expected));
    }
}
