//! Running observation normalization.
//!
//! Welford running mean/variance over the unmasked observation slots.
//! Masked slots never contribute statistics and always normalize to an
//! exact zero, so a masked observation stays masked after normalization.
//! The state ships inside checkpoints and is frozen during evaluation.

use crate::env::{Observation, ObservationMask, OBS_DIM};

#[derive(Clone, Debug, PartialEq)]
pub struct ObsNormalizer {
    pub mask: ObservationMask,
    pub mean: [f64; OBS_DIM],
    /// Sum of squared deviations (Welford's M2).
    pub m2: [f64; OBS_DIM],
    pub count: f64,
}

const CLIP: f64 = 10.0;

impl ObsNormalizer {
    pub fn new(mask: ObservationMask) -> Self {
        ObsNormalizer {
            mask,
            mean: [0.0; OBS_DIM],
            m2: [0.0; OBS_DIM],
            count: 0.0,
        }
    }

    fn masked(&self, slot: usize) -> bool {
        Observation::masked_slots(self.mask).contains(&slot)
    }

    /// Accumulate one raw observation vector.
    pub fn update(&mut self, v: &[f64; OBS_DIM]) {
        self.count += 1.0;
        for i in 0..OBS_DIM {
            if self.masked(i) {
                continue;
            }
            let delta = v[i] - self.mean[i];
            self.mean[i] += delta / self.count;
            self.m2[i] += delta * (v[i] - self.mean[i]);
        }
    }

    /// Normalize (without updating). Masked slots come out exactly zero.
    pub fn normalize(&self, v: &[f64; OBS_DIM]) -> [f64; OBS_DIM] {
        let mut out = [0.0; OBS_DIM];
        for i in 0..OBS_DIM {
            if self.masked(i) {
                continue;
            }
            out[i] = if self.count < 2.0 {
                v[i]
            } else {
                let var = self.m2[i] / self.count;
                ((v[i] - self.mean[i]) / (var.sqrt() + 1e-8)).clamp(-CLIP, CLIP)
            };
        }
        out
    }

    /// Update, then normalize (the rollout path).
    pub fn observe(&mut self, v: &[f64; OBS_DIM]) -> [f64; OBS_DIM] {
        self.update(v);
        self.normalize(v)
    }
}
