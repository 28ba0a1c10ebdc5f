use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{EcmError, ElectrodeCurve, ElectrodeKind};

/// Full parameter set of the two-sub-cell circuit.
///
/// Only the independent quantities are stored; derived resistances and
/// per-sub-cell capacities are exposed through methods so they can never
/// drift out of sync:
///
/// - sub-cell 1 branch resistance `R1 = k * R2` (per electrode),
/// - bridge resistance `Re = ke * R2`,
/// - effective terminal resistance at symmetric state `R0 = 2k/(k+1) * R2`,
/// - per-sub-cell capacities `Qn = q_max_neg / 2`, `Qp = q_max_neg / (2 r_np)`.
#[derive(Debug, Clone)]
pub struct EcmParameters {
    /// Branch resistance of sub-cell 2, per electrode, in ohms.
    pub r2_branch: f64,
    /// Resistance ratio R1/R2 between the sub-cells (>= 1).
    pub k: f64,
    /// Bridge-to-branch resistance ratio Re/R2.
    pub ke: f64,
    /// Total negative-electrode capacity in ampere-hours, split equally
    /// across the two sub-cells.
    pub q_max_neg: f64,
    /// Negative-to-positive capacity ratio.
    pub r_np: f64,
    pub ocp_neg: ElectrodeCurve,
    pub ocp_pos: ElectrodeCurve,
    /// Initial stoichiometries (z1_neg, z1_pos, z2_neg, z2_pos).
    pub z0: [f64; 4],
}

impl EcmParameters {
    pub fn new(
        r2_branch: f64,
        k: f64,
        ke: f64,
        q_max_neg: f64,
        r_np: f64,
        ocp_neg: ElectrodeCurve,
        ocp_pos: ElectrodeCurve,
        z0: [f64; 4],
    ) -> Result<Self, EcmError> {
        let positive = |name: &'static str, value: f64| {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(EcmError::NonPositive { name, value })
            }
        };
        positive("r2_branch", r2_branch)?;
        positive("ke", ke)?;
        positive("q_max_neg", q_max_neg)?;
        positive("r_np", r_np)?;
        if !(k >= 1.0) || !k.is_finite() {
            return Err(EcmError::KBelowOne(k));
        }
        if ocp_neg.kind() != ElectrodeKind::Negative {
            return Err(EcmError::WrongElectrodeKind {
                expected: ElectrodeKind::Negative,
                got: ocp_neg.kind(),
            });
        }
        if ocp_pos.kind() != ElectrodeKind::Positive {
            return Err(EcmError::WrongElectrodeKind {
                expected: ElectrodeKind::Positive,
                got: ocp_pos.kind(),
            });
        }
        let names = ["z1_neg", "z1_pos", "z2_neg", "z2_pos"];
        for (i, &z) in z0.iter().enumerate() {
            if !(0.0..=1.0).contains(&z) {
                return Err(EcmError::StoichiometryOutOfRange {
                    name: names[i],
                    value: z,
                });
            }
        }
        Ok(Self {
            r2_branch,
            k,
            ke,
            q_max_neg,
            r_np,
            ocp_neg,
            ocp_pos,
            z0,
        })
    }

    /// Branch resistance of sub-cell `idx` (0 or 1), per electrode, ohms.
    pub fn branch_resistance(&self, idx: usize) -> f64 {
        match idx {
            0 => self.k * self.r2_branch,
            1 => self.r2_branch,
            _ => panic!("sub-cell index must be 0 or 1"),
        }
    }

    /// Bridge resistance between the two electrolyte mid-nodes, ohms.
    pub fn bridge_resistance(&self) -> f64 {
        self.ke * self.r2_branch
    }

    /// Effective terminal resistance when both sub-cells sit at the same
    /// stoichiometries: 2k/(k+1) * R2.
    pub fn effective_resistance(&self) -> f64 {
        2.0 * self.k / (self.k + 1.0) * self.r2_branch
    }

    /// Per-sub-cell negative-electrode capacity, Ah.
    pub fn q_neg_subcell(&self) -> f64 {
        self.q_max_neg / 2.0
    }

    /// Per-sub-cell positive-electrode capacity, Ah.
    pub fn q_pos_subcell(&self) -> f64 {
        self.q_max_neg / (2.0 * self.r_np)
    }

    /// Load parameters from a `key = value` text file. OCP table paths are
    /// resolved relative to the parameter file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, EcmError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| EcmError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let fail = |message: String| EcmError::ParamsFile {
            path: path.display().to_string(),
            message,
        };
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| fail(format!("line {}: expected `key = value`", lineno + 1)))?;
            kv.insert(key.trim().to_string(), value.trim().to_string());
        }
        let num = |key: &str| -> Result<f64, EcmError> {
            kv.get(key)
                .ok_or_else(|| fail(format!("missing key `{key}`")))?
                .parse()
                .map_err(|_| fail(format!("key `{key}` is not a number")))
        };
        let curve_path = |key: &str| -> Result<std::path::PathBuf, EcmError> {
            let rel = kv
                .get(key)
                .ok_or_else(|| fail(format!("missing key `{key}`")))?;
            let base = path.parent().unwrap_or_else(|| Path::new("."));
            Ok(base.join(rel))
        };
        let ocp_neg = ElectrodeCurve::from_table_file(curve_path("ocp_neg")?, ElectrodeKind::Negative)?;
        let ocp_pos = ElectrodeCurve::from_table_file(curve_path("ocp_pos")?, ElectrodeKind::Positive)?;
        Self::new(
            num("r2_branch_ohm")?,
            num("k")?,
            num("ke")?,
            num("q_max_neg_ah")?,
            num("r_np")?,
            ocp_neg,
            ocp_pos,
            [
                num("z1_neg_0")?,
                num("z1_pos_0")?,
                num("z2_neg_0")?,
                num("z2_pos_0")?,
            ],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn toy_curves() -> (ElectrodeCurve, ElectrodeCurve) {
        let neg = ElectrodeCurve::new(
            vec![(0.0, 1.2), (0.1, 0.25), (0.9, 0.09), (1.0, 0.05)],
            ElectrodeKind::Negative,
        )
        .unwrap();
        let pos = ElectrodeCurve::new(
            vec![(0.0, 4.1), (0.05, 3.6), (0.95, 3.40), (1.0, 2.2)],
            ElectrodeKind::Positive,
        )
        .unwrap();
        (neg, pos)
    }

    fn params() -> EcmParameters {
        let (neg, pos) = toy_curves();
        EcmParameters::new(0.08815, 1.7, 505.0, 1.227, 1.064, neg, pos, [0.001, 0.752, 0.104, 0.983])
            .unwrap()
    }

    #[test]
    fn derived_quantities() {
        let p = params();
        assert_relative_eq!(p.branch_resistance(0), 1.7 * 0.08815, epsilon = 1e-15);
        assert_relative_eq!(p.branch_resistance(1), 0.08815, epsilon = 1e-15);
        assert_relative_eq!(p.bridge_resistance(), 505.0 * 0.08815, epsilon = 1e-12);
        // 2k/(k+1) R2 rounds to the documented 111 mOhm
        assert_relative_eq!(p.effective_resistance(), 0.111, epsilon = 5e-5);
        assert_relative_eq!(p.q_neg_subcell(), 0.6135, epsilon = 1e-12);
        assert_relative_eq!(p.q_pos_subcell(), 1.227 / 2.128, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_values() {
        let (neg, pos) = toy_curves();
        assert!(EcmParameters::new(0.0, 1.7, 505.0, 1.227, 1.064, neg.clone(), pos.clone(), [0.0; 4]).is_err());
        let (neg, pos) = toy_curves();
        assert!(EcmParameters::new(0.1, 0.9, 505.0, 1.227, 1.064, neg.clone(), pos.clone(), [0.0; 4]).is_err());
        let (neg, pos) = toy_curves();
        assert!(EcmParameters::new(0.1, 1.7, 505.0, 1.227, 1.064, neg, pos, [0.0, 0.5, 1.2, 0.5]).is_err());
        let (neg, pos) = toy_curves();
        // curves swapped
        assert!(EcmParameters::new(0.1, 1.7, 505.0, 1.227, 1.064, pos.clone(), neg.clone(), [0.5; 4]).is_err());
    }
}
