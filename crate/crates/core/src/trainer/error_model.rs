use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dialogue::{Intent, SemanticFrame, SlotStatus, UserIntent};
use crate::error::{KrdsError, Result};

/// Noise injected between the patient and the tracker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub slot_error_rate: f64,
    pub intent_error_rate: f64,
}

impl Default for ErrorModel {
    fn default() -> Self {
        ErrorModel {
            slot_error_rate: 0.05,
            intent_error_rate: 0.05,
        }
    }
}

impl ErrorModel {
    pub fn none() -> Self {
        ErrorModel {
            slot_error_rate: 0.0,
            intent_error_rate: 0.0,
        }
    }

    pub fn new(slot_error_rate: f64, intent_error_rate: f64) -> Result<Self> {
        let ok = |r: f64| (0.0..=1.0).contains(&r);
        if !ok(slot_error_rate) || !ok(intent_error_rate) {
            return Err(KrdsError::Config(format!(
                "error rates must lie in [0, 1], got slot {slot_error_rate}, intent {intent_error_rate}"
            )));
        }
        Ok(ErrorModel {
            slot_error_rate,
            intent_error_rate,
        })
    }

    pub fn is_noiseless(&self) -> bool {
        self.slot_error_rate == 0.0 && self.intent_error_rate == 0.0
    }
}

/// With the intent rate, swaps a user intent for a different one; each slot
/// independently moves to a different status with the slot rate.
pub fn corrupt_frame<R: Rng + ?Sized>(
    frame: &SemanticFrame,
    em: &ErrorModel,
    rng: &mut R,
) -> SemanticFrame {
    let mut out = frame.clone();
    if em.is_noiseless() {
        return out;
    }
    if let Intent::User(u) = frame.intent {
        if rng.gen::<f64>() < em.intent_error_rate {
            let others: Vec<UserIntent> = UserIntent::ALL.into_iter().filter(|&x| x != u).collect();
            out.intent = Intent::User(*others.choose(rng).expect("five intents"));
        }
    }
    for status in out.slots.values_mut() {
        if rng.gen::<f64>() < em.slot_error_rate {
            let others: Vec<SlotStatus> = SlotStatus::ALL
                .into_iter()
                .filter(|&x| x != *status)
                .collect();
            *status = *others.choose(rng).expect("three statuses");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frame() -> SemanticFrame {
        SemanticFrame::user(UserIntent::RequestDisease)
            .with_slot("a", SlotStatus::True)
            .with_slot("b", SlotStatus::False)
            .with_slot("c", SlotStatus::NotSure)
    }

    #[test]
    fn zero_noise_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(
                corrupt_frame(&frame(), &ErrorModel::none(), &mut rng),
                frame()
            );
        }
    }

    #[test]
    fn full_noise_changes_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let em = ErrorModel::new(1.0, 1.0).unwrap();
        let f = frame();
        for _ in 0..100 {
            let c = corrupt_frame(&f, &em, &mut rng);
            assert_ne!(c.intent, f.intent);
            for (k, v) in &c.slots {
                assert_ne!(*v, f.slots[k]);
            }
        }
    }

    #[test]
    fn flip_fraction_matches_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let em = ErrorModel::new(0.05, 0.0).unwrap();
        let f = SemanticFrame::user(UserIntent::ConfirmSymptom).with_slot("a", SlotStatus::True);
        let n = 100_000;
        let flips = (0..n)
            .filter(|_| corrupt_frame(&f, &em, &mut rng).slots["a"] != SlotStatus::True)
            .count();
        let frac = flips as f64 / n as f64;
        assert!((frac - 0.05).abs() < 0.005, "flip fraction {frac}");
    }

    #[test]
    fn rates_validated() {
        assert!(ErrorModel::new(1.5, 0.0).is_err());
        assert!(ErrorModel::new(0.0, -0.1).is_err());
    }
}
