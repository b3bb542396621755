//! Control sequences `u_n → u`.

use serde::{Deserialize, Serialize};

use crate::chain::MarkovControl;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceRule {
    /// `u_n(x) = round(u(x) / 2⁻ⁿ) · 2⁻ⁿ`.
    GridRound,
    /// `u_n` is the `n`-th listed control.
    Explicit(Vec<MarkovControl>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSequenceRule {
    pub target: MarkovControl,
    pub rule: SequenceRule,
}

impl ControlSequenceRule {
    pub fn grid_round(target: MarkovControl) -> Self {
        Self { target, rule: SequenceRule::GridRound }
    }

    pub fn explicit(target: MarkovControl, controls: Vec<MarkovControl>) -> Result<Self> {
        if let Some(bad) = controls.iter().find(|u| u.len() != target.len()) {
            return Err(Error::DimensionMismatch { expected: target.len(), found: bad.len() });
        }
        Ok(Self { target, rule: SequenceRule::Explicit(controls) })
    }

    /// Indices at which the sequence is defined, capped at `max_n` for grid rounding.
    pub fn indices(&self, max_n: usize) -> Vec<usize> {
        match &self.rule {
            SequenceRule::GridRound => (1..=max_n).collect(),
            SequenceRule::Explicit(list) => (0..list.len()).collect(),
        }
    }
}

/// The `n`-th control of the sequence.
pub fn generate_sequence(rule: &ControlSequenceRule, n: usize) -> Result<MarkovControl> {
    match &rule.rule {
        SequenceRule::GridRound => {
            let step = 0.5f64.powi(i32::try_from(n).map_err(|_| Error::InvalidArgument("index too large".into()))?);
            Ok(MarkovControl::new(
                rule.target.values().iter().map(|&a| ((a / step).round() * step).clamp(0.0, 1.0)).collect(),
            ))
        }
        SequenceRule::Explicit(list) => list
            .get(n)
            .cloned()
            .ok_or_else(|| Error::InvalidArgument(format!("explicit sequence has no index {n}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_target_at_step_one_eighth() {
        let rule = ControlSequenceRule::grid_round(MarkovControl::new(vec![0.1, 0.3, 0.5, 0.7, 0.9]));
        let u3 = generate_sequence(&rule, 3).unwrap();
        assert_eq!(u3.values(), &[0.125, 0.25, 0.5, 0.75, 0.875]);
    }

    #[test]
    fn zero_target_stays_zero() {
        let rule = ControlSequenceRule::grid_round(MarkovControl::constant(4, 0.0));
        for n in 0..20 {
            assert_eq!(generate_sequence(&rule, n).unwrap().values(), &[0.0; 4]);
        }
    }

    #[test]
    fn explicit_sequence_lookup() {
        let target = MarkovControl::constant(2, 0.5);
        let list = vec![MarkovControl::constant(2, 0.0), MarkovControl::constant(2, 0.5)];
        let rule = ControlSequenceRule::explicit(target, list.clone()).unwrap();
        assert_eq!(rule.indices(99), vec![0, 1]);
        assert_eq!(generate_sequence(&rule, 1).unwrap(), list[1]);
        assert!(generate_sequence(&rule, 2).is_err());
        assert!(ControlSequenceRule::explicit(MarkovControl::constant(3, 0.0), list).is_err());
    }

    proptest! {
        #[test]
        fn rounding_error_is_half_a_step(target in prop::collection::vec(0.0f64..=1.0, 1..8), n in 0usize..30) {
            let rule = ControlSequenceRule::grid_round(MarkovControl::new(target));
            let un = generate_sequence(&rule, n).unwrap();
            prop_assert!(un.max_distance(&rule.target) <= 0.5f64.powi(n as i32 + 1) + 1e-15);
            prop_assert!(un.values().iter().all(|a| (0.0..=1.0).contains(a)));
        }
    }
}
