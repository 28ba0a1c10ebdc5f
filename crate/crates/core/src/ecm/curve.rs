use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use super::EcmError;

/// Which electrode a curve describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElectrodeKind {
    Negative,
    Positive,
}

impl fmt::Display for ElectrodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElectrodeKind::Negative => write!(f, "negative"),
            ElectrodeKind::Positive => write!(f, "positive"),
        }
    }
}

/// Tabulated open-circuit potential of one electrode versus Li/Li+, as a
/// function of its stoichiometry `z` (fractional lithiation, 0 = empty,
/// 1 = full).
///
/// Samples are strictly increasing in `z` and the potential is non-increasing
/// in `z` for both electrode kinds: lithiating an electrode lowers its
/// potential, delithiating raises it. Evaluation interpolates linearly and
/// clamps `z` to the tabulated span; there is no extrapolation beyond the
/// endpoints.
#[derive(Debug, Clone)]
pub struct ElectrodeCurve {
    z: Vec<f64>,
    potential: Vec<f64>,
    kind: ElectrodeKind,
}

impl ElectrodeCurve {
    pub fn new(
        samples: impl IntoIterator<Item = (f64, f64)>,
        kind: ElectrodeKind,
    ) -> Result<Self, EcmError> {
        let (z, potential): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
        if z.len() < 2 {
            return Err(EcmError::TooFewSamples(z.len()));
        }
        for i in 0..z.len() {
            if !z[i].is_finite() || !potential[i].is_finite() {
                return Err(EcmError::NonFiniteSample(i));
            }
            if i > 0 {
                if z[i] <= z[i - 1] {
                    return Err(EcmError::NonIncreasingZ {
                        index: i,
                        z: z[i],
                        prev: z[i - 1],
                    });
                }
                if potential[i] > potential[i - 1] {
                    return Err(EcmError::NonMonotonePotential {
                        index: i,
                        potential: potential[i],
                        prev: potential[i - 1],
                    });
                }
            }
        }
        Ok(Self { z, potential, kind })
    }

    pub fn kind(&self) -> ElectrodeKind {
        self.kind
    }

    pub fn z_min(&self) -> f64 {
        self.z[0]
    }

    pub fn z_max(&self) -> f64 {
        *self.z.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires >= 2 samples
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.z.iter().copied().zip(self.potential.iter().copied())
    }

    /// Potential at stoichiometry `z`, linearly interpolated, with `z` clamped
    /// to the tabulated span.
    pub fn potential_at(&self, z: f64) -> f64 {
        let z = z.clamp(self.z[0], *self.z.last().unwrap());
        // partition_point returns the first index with table z > query z
        let hi = self.z.partition_point(|&v| v <= z);
        if hi == 0 {
            return self.potential[0];
        }
        if hi == self.z.len() {
            return *self.potential.last().unwrap();
        }
        let lo = hi - 1;
        let w = (z - self.z[lo]) / (self.z[hi] - self.z[lo]);
        self.potential[lo] + w * (self.potential[hi] - self.potential[lo])
    }

    /// Load a curve from a plain-text table: one `z<TAB>potential_V` pair per
    /// line, `#` starts a comment, lines sorted by `z`.
    pub fn from_table_file(path: impl AsRef<Path>, kind: ElectrodeKind) -> Result<Self, EcmError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| EcmError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut samples = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let bad = |message: &str| EcmError::OcpFile {
                path: path.display().to_string(),
                line: lineno + 1,
                message: message.to_string(),
            };
            let z: f64 = parts
                .next()
                .ok_or_else(|| bad("missing stoichiometry column"))?
                .parse()
                .map_err(|_| bad("stoichiometry is not a number"))?;
            let v: f64 = parts
                .next()
                .ok_or_else(|| bad("missing potential column"))?
                .parse()
                .map_err(|_| bad("potential is not a number"))?;
            if parts.next().is_some() {
                return Err(bad("expected exactly two columns"));
            }
            samples.push((z, v));
        }
        Self::new(samples, kind)
    }

    /// Write the curve in the same format `from_table_file` reads.
    pub fn write_table_file(&self, path: impl AsRef<Path>) -> Result<(), EcmError> {
        let path = path.as_ref();
        let mut out = String::new();
        out.push_str(&format!("# {} electrode open-circuit potential\n", self.kind));
        out.push_str("# z\tpotential_V\n");
        for (z, v) in self.samples() {
            out.push_str(&format!("{z:.6}\t{v:.6}\n"));
        }
        let mut f = fs::File::create(path).map_err(|source| EcmError::Io {
            path: path.display().to_string(),
            source,
        })?;
        f.write_all(out.as_bytes()).map_err(|source| EcmError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ramp() -> ElectrodeCurve {
        ElectrodeCurve::new(
            vec![(0.0, 1.0), (0.5, 0.6), (1.0, 0.1)],
            ElectrodeKind::Negative,
        )
        .unwrap()
    }

    #[test]
    fn interpolates_between_samples() {
        let c = ramp();
        assert_relative_eq!(c.potential_at(0.25), 0.8, epsilon = 1e-15);
        assert_relative_eq!(c.potential_at(0.75), 0.35, epsilon = 1e-15);
    }

    #[test]
    fn exact_at_sample_points() {
        let c = ramp();
        assert_eq!(c.potential_at(0.0), 1.0);
        assert_eq!(c.potential_at(0.5), 0.6);
        assert_eq!(c.potential_at(1.0), 0.1);
    }

    #[test]
    fn clamps_outside_span() {
        let c = ramp();
        assert_eq!(c.potential_at(-3.0), 1.0);
        assert_eq!(c.potential_at(7.0), 0.1);
    }

    #[test]
    fn rejects_short_and_unsorted_tables() {
        assert!(matches!(
            ElectrodeCurve::new(vec![(0.0, 1.0)], ElectrodeKind::Negative),
            Err(EcmError::TooFewSamples(1))
        ));
        assert!(matches!(
            ElectrodeCurve::new(
                vec![(0.0, 1.0), (0.5, 0.8), (0.5, 0.7)],
                ElectrodeKind::Negative
            ),
            Err(EcmError::NonIncreasingZ { index: 2, .. })
        ));
        assert!(matches!(
            ElectrodeCurve::new(
                vec![(0.0, 1.0), (0.5, 1.2)],
                ElectrodeKind::Positive
            ),
            Err(EcmError::NonMonotonePotential { index: 1, .. })
        ));
    }

    #[test]
    fn table_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.tsv");
        let c = ramp();
        c.write_table_file(&path).unwrap();
        let back = ElectrodeCurve::from_table_file(&path, ElectrodeKind::Negative).unwrap();
        for (a, b) in c.samples().zip(back.samples()) {
            assert_relative_eq!(a.0, b.0, epsilon = 1e-6);
            assert_relative_eq!(a.1, b.1, epsilon = 1e-6);
        }
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.tsv");
        std::fs::write(&path, "# header\n\n0.0\t1.0 # inline\n1.0\t0.0\n").unwrap();
        let c = ElectrodeCurve::from_table_file(&path, ElectrodeKind::Negative).unwrap();
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn bad_line_reports_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.tsv");
        std::fs::write(&path, "0.0\t1.0\nnot_a_number\t0.5\n").unwrap();
        match ElectrodeCurve::from_table_file(&path, ElectrodeKind::Negative) {
            Err(EcmError::OcpFile { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected OcpFile error, got {other:?}"),
        }
    }

    proptest! {
        // Random monotone tables: evaluation stays within the sampled potential
        // range and is itself non-increasing in z.
        #[test]
        fn eval_monotone_and_bounded(
            raw in prop::collection::vec((0.0f64..1.0, 0.0f64..2.0), 2..40),
            queries in prop::collection::vec(-0.5f64..1.5, 1..60),
        ) {
            let mut zs: Vec<f64> = raw.iter().map(|p| p.0).collect();
            zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            zs.dedup();
            prop_assume!(zs.len() >= 2);
            let mut pot: Vec<f64> = raw.iter().take(zs.len()).map(|p| p.1).collect();
            pot.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let curve = ElectrodeCurve::new(
                zs.iter().copied().zip(pot.iter().copied()),
                ElectrodeKind::Positive,
            ).unwrap();

            let lo = *pot.last().unwrap();
            let hi = pot[0];
            let mut sorted = queries.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut prev = f64::INFINITY;
            for q in sorted {
                let v = curve.potential_at(q);
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
                prop_assert!(v <= prev + 1e-12);
                prev = v;
            }
        }
    }
}
