//! Closed-form Werner-state fidelity algebra.
//!
//! Everything here is a pure function of scalar fidelities: one round of
//! pairwise purification and its success probability, iterated purification,
//! the end-to-end fidelity of a swapped repeater chain, and the two inverse
//! solvers that turn an end-to-end threshold into a per-hop target.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values this close to the `[0, 1]` boundary are clamped instead of rejected.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

/// Fidelity of a two-qubit state with the ideal Bell state.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Fidelity(f64);

impl Fidelity {
    pub const ONE: Fidelity = Fidelity(1.0);
    /// Purification threshold; Werner states at or below it are not distillable.
    pub const HALF: Fidelity = Fidelity(0.5);
    /// The maximally mixed state.
    pub const MIXED: Fidelity = Fidelity(0.25);

    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::Domain(format!("fidelity {value} is not finite")));
        }
        if !(-BOUNDARY_TOLERANCE..=1.0 + BOUNDARY_TOLERANCE).contains(&value) {
            return Err(Error::Domain(format!("fidelity {value} outside [0, 1]")));
        }
        Ok(Fidelity(value.clamp(0.0, 1.0)))
    }

    /// Clamps into `[0, 1]`. For values that are fidelities by construction
    /// (closed-form outputs, sampled draws), not for user input.
    pub fn saturating(value: f64) -> Self {
        debug_assert!(!value.is_nan());
        Fidelity(value.clamp(0.0, 1.0))
    }

    /// Fidelity of the Werner state `p |phi><phi| + (1 - p) I / 4`.
    pub fn from_werner_parameter(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("Werner parameter {p} outside [0, 1]")));
        }
        Fidelity::new(p + (1.0 - p) / 4.0)
    }

    /// Inverse of [`Fidelity::from_werner_parameter`]; negative below 1/4.
    pub fn werner_parameter(self) -> f64 {
        (4.0 * self.0 - 1.0) / 3.0
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Rejects fidelities at or below the purification threshold.
    pub fn ensure_purifiable(self) -> Result<Self> {
        if self.0 > 0.5 {
            Ok(self)
        } else {
            Err(Error::Domain(format!(
                "fidelity {} is not above the purification threshold 0.5",
                self.0
            )))
        }
    }
}

impl fmt::Display for Fidelity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl TryFrom<f64> for Fidelity {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Fidelity::new(value)
    }
}

/// Imperfections of the local operations used for entanglement swapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateParameters {
    pub two_qubit_gate_fidelity: f64,
    pub measurement_fidelity: f64,
}

impl Default for GateParameters {
    fn default() -> Self {
        GateParameters {
            two_qubit_gate_fidelity: 0.98,
            measurement_fidelity: 0.99,
        }
    }
}

impl GateParameters {
    pub fn new(two_qubit_gate_fidelity: f64, measurement_fidelity: f64) -> Result<Self> {
        let gate = GateParameters {
            two_qubit_gate_fidelity,
            measurement_fidelity,
        };
        gate.validate()?;
        Ok(gate)
    }

    pub fn validate(&self) -> Result<()> {
        let p2 = self.two_qubit_gate_fidelity;
        let eta = self.measurement_fidelity;
        if !(p2 > 0.0 && p2 <= 1.0) {
            return Err(Error::Parameter(format!(
                "two-qubit gate fidelity {p2} outside (0, 1]"
            )));
        }
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::Parameter(format!(
                "measurement fidelity {eta} outside (0, 1]"
            )));
        }
        let k = self.attenuation();
        if !(k > 0.0 && k <= 1.0) {
            return Err(Error::Parameter(format!(
                "swap attenuation {k} outside (0, 1]; measurement fidelity must exceed 0.5"
            )));
        }
        Ok(())
    }

    /// Per-swap attenuation factor `p2 (4 eta^2 - 1) / 3`.
    #[inline]
    pub fn attenuation(&self) -> f64 {
        let eta = self.measurement_fidelity;
        self.two_qubit_gate_fidelity * (4.0 * eta * eta - 1.0) / 3.0
    }
}

/// Purified fidelities of consecutive hops joined by swaps.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    hop_fidelities: Vec<Fidelity>,
    gate: GateParameters,
}

impl ChainSpec {
    pub fn new(hop_fidelities: Vec<Fidelity>, gate: GateParameters) -> Result<Self> {
        if hop_fidelities.is_empty() {
            return Err(Error::Domain("chain has no hops".into()));
        }
        gate.validate()?;
        Ok(ChainSpec {
            hop_fidelities,
            gate,
        })
    }

    pub fn hop_fidelities(&self) -> &[Fidelity] {
        &self.hop_fidelities
    }

    pub fn gate(&self) -> GateParameters {
        self.gate
    }

    pub fn hop_count(&self) -> usize {
        self.hop_fidelities.len()
    }
}

/// Denominator of one purification step, which is also its success probability.
#[inline]
fn success_polynomial(f: f64) -> f64 {
    let g = 1.0 - f;
    f * f + (2.0 / 3.0) * f * g + (5.0 / 9.0) * g * g
}

/// One round of pairwise purification of two Werner pairs at fidelity `f`.
pub fn purify_once(f: Fidelity) -> Fidelity {
    let f = f.value();
    let g = 1.0 - f;
    Fidelity::saturating((f * f + g * g / 9.0) / success_polynomial(f))
}

/// Probability that one purification attempt at fidelity `f` keeps its pair.
pub fn purify_success_probability(f: Fidelity) -> f64 {
    success_polynomial(f.value())
}

/// Applies [`purify_once`] `rounds` times; zero rounds is the identity.
pub fn purify_rounds(f0: Fidelity, rounds: u32) -> Fidelity {
    (0..rounds).fold(f0, |f, _| purify_once(f))
}

/// End-to-end fidelity after swapping a chain of purified hops.
pub fn chain_fidelity(spec: &ChainSpec) -> Fidelity {
    let swaps = (spec.hop_count() - 1) as i32;
    let product: f64 = spec
        .hop_fidelities
        .iter()
        .map(|f| f.werner_parameter())
        .product();
    Fidelity::saturating(0.25 + 0.75 * spec.gate.attenuation().powi(swaps) * product)
}

/// The weakest hop, an upper bound on [`chain_fidelity`] when every hop is at
/// least 1/4 and the gate parameters are at most one.
pub fn min_hop_fidelity_bound(spec: &ChainSpec) -> Fidelity {
    spec.hop_fidelities
        .iter()
        .copied()
        .fold(Fidelity::ONE, |acc, f| if f < acc { f } else { acc })
}

fn check_threshold(threshold: Fidelity, hops: usize) -> Result<()> {
    if hops == 0 {
        return Err(Error::Domain("hop count must be at least 1".into()));
    }
    if threshold.value() < 0.25 {
        return Err(Error::Domain(format!(
            "threshold {threshold} below the mixed-state fidelity 0.25"
        )));
    }
    Ok(())
}

fn finish_solve(required: f64) -> Result<Fidelity> {
    if required > 1.0 + BOUNDARY_TOLERANCE {
        Err(Error::InfeasibleTarget { required })
    } else {
        Ok(Fidelity::saturating(required))
    }
}

/// Smallest fidelity one hop needs so the chain meets `threshold`, assuming
/// the other `hops - 1` hops all sit at `best_other_hop`.
pub fn solve_target_hop_fidelity_min(
    threshold: Fidelity,
    hops: usize,
    best_other_hop: Fidelity,
    gate: GateParameters,
) -> Result<Fidelity> {
    check_threshold(threshold, hops)?;
    gate.validate()?;
    if best_other_hop.value() <= 0.25 {
        return Err(Error::Domain(format!(
            "best other hop fidelity {best_other_hop} must exceed 0.25"
        )));
    }
    let others = (hops - 1) as i32;
    let scale = 0.75 * gate.attenuation().powi(others) * best_other_hop.werner_parameter().powi(others);
    let x = (threshold.value() - 0.25) / scale;
    finish_solve((3.0 * x + 1.0) / 4.0)
}

/// Common fidelity every hop needs so the chain meets `threshold`.
pub fn solve_target_hop_fidelity_uniform(
    threshold: Fidelity,
    hops: usize,
    gate: GateParameters,
) -> Result<Fidelity> {
    check_threshold(threshold, hops)?;
    gate.validate()?;
    let swaps = (hops - 1) as i32;
    let y = (threshold.value() - 0.25) / (0.75 * gate.attenuation().powi(swaps));
    finish_solve((3.0 * y.powf(1.0 / hops as f64) + 1.0) / 4.0)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    fn fid(v: f64) -> Fidelity {
        Fidelity::new(v).unwrap()
    }

    fn chain(values: &[f64]) -> ChainSpec {
        ChainSpec::new(values.iter().map(|&v| fid(v)).collect(), GateParameters::default()).unwrap()
    }

    #[test]
    fn fidelity_construction() {
        assert!(Fidelity::new(-0.1).is_err());
        assert!(Fidelity::new(1.1).is_err());
        assert!(Fidelity::new(f64::NAN).is_err());
        assert_eq!(Fidelity::new(1.0 + 1e-13).unwrap().value(), 1.0);
        assert_eq!(Fidelity::new(-1e-13).unwrap().value(), 0.0);
        assert!(fid(0.5).ensure_purifiable().is_err());
        assert!(fid(0.51).ensure_purifiable().is_ok());
    }

    #[test]
    fn werner_parameter_mapping() {
        assert_eq!(Fidelity::from_werner_parameter(1.0).unwrap().value(), 1.0);
        assert_eq!(Fidelity::from_werner_parameter(0.0).unwrap().value(), 0.25);
        let f = Fidelity::from_werner_parameter(0.6).unwrap();
        assert_abs_diff_eq!(f.werner_parameter(), 0.6, epsilon = 1e-15);
    }

    #[test]
    fn purify_once_examples() {
        assert_eq!(purify_once(Fidelity::ONE).value(), 1.0);
        assert_abs_diff_eq!(purify_once(Fidelity::HALF).value(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(purify_once(fid(0.7)).value(), 0.5 / 0.68, epsilon = 1e-12);
    }

    #[test]
    fn success_probability_examples() {
        assert_abs_diff_eq!(purify_success_probability(fid(0.5)), 5.0 / 9.0, epsilon = 1e-12);
        assert_eq!(purify_success_probability(Fidelity::ONE), 1.0);
        assert_abs_diff_eq!(
            purify_success_probability(fid(0.8)),
            0.64 + 0.32 / 3.0 + 0.2 / 9.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn purify_rounds_examples() {
        assert_eq!(purify_rounds(fid(0.9), 0).value(), 0.9);
        assert_abs_diff_eq!(purify_rounds(Fidelity::HALF, 3).value(), 0.5, epsilon = 1e-15);
        // 0.5/0.68 fed through the closed form a second time.
        let f1 = 0.5 / 0.68;
        let f2 = (f1 * f1 + (1.0 - f1) * (1.0 - f1) / 9.0)
            / (f1 * f1 + 2.0 / 3.0 * f1 * (1.0 - f1) + 5.0 / 9.0 * (1.0 - f1) * (1.0 - f1));
        assert_abs_diff_eq!(purify_rounds(fid(0.7), 2).value(), f2, epsilon = 1e-12);
        assert_abs_diff_eq!(f2, 0.773171, epsilon = 1e-6);
    }

    #[test]
    fn chain_fidelity_examples() {
        for &f in &[0.3, 0.7, 0.99] {
            let spec = ChainSpec::new(vec![fid(f)], GateParameters::new(0.5, 0.8).unwrap()).unwrap();
            assert_abs_diff_eq!(chain_fidelity(&spec).value(), f, epsilon = 1e-12);
        }
        let expected = 0.25 + 0.75 * (0.98 * (4.0 * 0.99 * 0.99 - 1.0) / 3.0) * (2.6f64 / 3.0).powi(2);
        assert_abs_diff_eq!(chain_fidelity(&chain(&[0.9, 0.9])).value(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(chain_fidelity(&chain(&[0.25, 0.97])).value(), 0.25, epsilon = 1e-15);
        assert!(ChainSpec::new(vec![], GateParameters::default()).is_err());
    }

    #[test]
    fn min_bound_examples() {
        assert_eq!(min_hop_fidelity_bound(&chain(&[0.9, 0.8, 0.95])).value(), 0.8);
        let single = chain(&[0.7]);
        assert_eq!(min_hop_fidelity_bound(&single).value(), 0.7);
        assert_abs_diff_eq!(chain_fidelity(&single).value(), 0.7, epsilon = 1e-15);
        let pair = chain(&[0.9, 0.9]);
        assert!(chain_fidelity(&pair) < min_hop_fidelity_bound(&pair));
    }

    #[test]
    fn solver_min_examples() {
        let gate = GateParameters::default();
        let f = solve_target_hop_fidelity_min(fid(0.83), 1, fid(0.9), gate).unwrap();
        assert_abs_diff_eq!(f.value(), 0.83, epsilon = 1e-12);

        let k = gate.attenuation();
        let x = 0.58 / (0.75 * k);
        let f = solve_target_hop_fidelity_min(fid(0.83), 2, Fidelity::ONE, gate).unwrap();
        assert_abs_diff_eq!(f.value(), (3.0 * x + 1.0) / 4.0, epsilon = 1e-12);
        let back = chain_fidelity(&ChainSpec::new(vec![f, Fidelity::ONE], gate).unwrap());
        assert_abs_diff_eq!(back.value(), 0.83, epsilon = 1e-12);

        match solve_target_hop_fidelity_min(fid(0.99), 3, fid(0.9), gate) {
            Err(Error::InfeasibleTarget { required }) => assert!(required > 1.0),
            other => panic!("expected infeasible, got {other:?}"),
        }
        assert!(matches!(
            solve_target_hop_fidelity_min(fid(0.2), 2, fid(0.9), gate),
            Err(Error::Domain(_))
        ));
        assert!(solve_target_hop_fidelity_min(fid(0.83), 0, fid(0.9), gate).is_err());
    }

    #[test]
    fn solver_uniform_examples() {
        let gate = GateParameters::default();
        let f = solve_target_hop_fidelity_uniform(fid(0.83), 1, gate).unwrap();
        assert_abs_diff_eq!(f.value(), 0.83, epsilon = 1e-12);
        let f = solve_target_hop_fidelity_uniform(fid(0.83), 2, gate).unwrap();
        let back = chain_fidelity(&ChainSpec::new(vec![f, f], gate).unwrap());
        assert_abs_diff_eq!(back.value(), 0.83, epsilon = 1e-10);
        for n in 1..6 {
            let f = solve_target_hop_fidelity_uniform(Fidelity::MIXED, n, gate).unwrap();
            assert_abs_diff_eq!(f.value(), 0.25, epsilon = 1e-15);
        }
        assert!(matches!(
            solve_target_hop_fidelity_uniform(fid(0.999), 8, gate),
            Err(Error::InfeasibleTarget { .. })
        ));
    }

    #[test]
    fn gate_validation() {
        assert!(GateParameters::new(0.0, 0.99).is_err());
        assert!(GateParameters::new(0.98, 1.01).is_err());
        assert!(GateParameters::new(0.98, 0.5).is_err());
        let k = GateParameters::default().attenuation();
        assert!(k > 0.0 && k <= 1.0);
    }

    proptest! {
        #[test]
        fn purification_improves_above_threshold(f in 0.5000001f64..0.9999999) {
            prop_assert!(purify_once(fid(f)).value() > f);
        }

        #[test]
        fn purification_monotone(a in 0.5f64..1.0, b in 0.5f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(purify_once(fid(lo)) <= purify_once(fid(hi)));
            prop_assert!(purify_success_probability(fid(lo)) <= purify_success_probability(fid(hi)));
        }

        #[test]
        fn rounds_compose(f in 0.0f64..=1.0, a in 0u32..4, b in 0u32..4) {
            let lhs = purify_rounds(fid(f), a + b);
            let rhs = purify_rounds(purify_rounds(fid(f), a), b);
            prop_assert_eq!(lhs.value(), rhs.value());
        }

        #[test]
        fn chain_bounded_by_weakest_hop(hops in prop::collection::vec(0.5f64..=1.0, 1..8)) {
            let spec = chain(&hops);
            prop_assert!(chain_fidelity(&spec) <= min_hop_fidelity_bound(&spec));
        }

        #[test]
        fn solvers_round_trip(
            threshold in 0.26f64..0.99,
            n in 1usize..6,
            best in 0.8f64..=1.0,
            p2 in 0.95f64..=1.0,
            eta in 0.95f64..=1.0,
        ) {
            let gate = GateParameters::new(p2, eta).unwrap();
            if let Ok(f) = solve_target_hop_fidelity_min(fid(threshold), n, fid(best), gate) {
                let mut hops = vec![fid(best); n - 1];
                hops.push(f);
                let back = chain_fidelity(&ChainSpec::new(hops, gate).unwrap());
                prop_assert!((back.value() - threshold).abs() < 1e-10);
            }
            if let Ok(f) = solve_target_hop_fidelity_uniform(fid(threshold), n, gate) {
                let back = chain_fidelity(&ChainSpec::new(vec![f; n], gate).unwrap());
                prop_assert!((back.value() - threshold).abs() < 1e-10);
            }
        }
    }
}
