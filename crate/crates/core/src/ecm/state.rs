use super::EcmError;

/// Instantaneous model state: the four electrode stoichiometries plus the
/// simulation clock.
///
/// Stoichiometries are stored as (z1_neg, z1_pos, z2_neg, z2_pos). Total
/// lithium inventory `sum_k (z_k_neg * Qn + z_k_pos * Qp)` is conserved by the
/// dynamics unless a terminal-driven saturation clip engages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcmState {
    pub z: [f64; 4],
    /// Seconds since protocol start.
    pub t: f64,
}

impl EcmState {
    pub fn new(z: [f64; 4], t: f64) -> Result<Self, EcmError> {
        let names = ["z1_neg", "z1_pos", "z2_neg", "z2_pos"];
        for (i, &zi) in z.iter().enumerate() {
            if !zi.is_finite() {
                return Err(EcmError::NonFiniteState);
            }
            if !(0.0..=1.0).contains(&zi) {
                return Err(EcmError::StoichiometryOutOfRange {
                    name: names[i],
                    value: zi,
                });
            }
        }
        Ok(Self { z, t })
    }

    pub fn z_neg(&self, subcell: usize) -> f64 {
        self.z[2 * subcell]
    }

    pub fn z_pos(&self, subcell: usize) -> f64 {
        self.z[2 * subcell + 1]
    }
}
