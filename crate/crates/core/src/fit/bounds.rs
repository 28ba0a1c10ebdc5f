use std::fs;
use std::path::Path;

use super::FitError;

/// One named box constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundEntry {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

/// Named box bounds for a fit, in parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterBounds {
    pub entries: Vec<BoundEntry>,
}

impl ParameterBounds {
    pub fn new(entries: Vec<BoundEntry>) -> Result<Self, FitError> {
        if entries.is_empty() {
            return Err(FitError::EmptyBounds);
        }
        for e in &entries {
            if !(e.lower < e.upper) {
                return Err(FitError::InvertedBound {
                    name: e.name.clone(),
                    lower: e.lower,
                    upper: e.upper,
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn from_pairs(pairs: &[(&str, f64, f64)]) -> Result<Self, FitError> {
        Self::new(
            pairs
                .iter()
                .map(|(name, lower, upper)| BoundEntry {
                    name: name.to_string(),
                    lower: *lower,
                    upper: *upper,
                })
                .collect(),
        )
    }

    /// The prior ranges for the nine fitted circuit parameters.
    pub fn ecm_defaults() -> Self {
        Self::from_pairs(&[
            ("r2_branch_ohm", 0.010, 0.300),
            ("k", 1.0, 8.0),
            ("ke", 500.0, 2000.0),
            ("q_max_neg_ah", 1.1, 2.2),
            ("r_np", 1.0, 2.0),
            ("z1_neg_0", 1e-8, 0.3),
            ("z1_pos_0", 0.7, 1.0 - 1e-8),
            ("z2_neg_0", 1e-8, 0.3),
            ("z2_pos_0", 0.7, 1.0 - 1e-8),
        ])
        .expect("default bounds are valid")
    }

    pub fn dimension(&self) -> usize {
        self.entries.len()
    }

    pub fn clip(&self, x: &mut [f64]) {
        for (v, e) in x.iter_mut().zip(&self.entries) {
            *v = v.clamp(e.lower, e.upper);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.entries.len()
            && x.iter()
                .zip(&self.entries)
                .all(|(v, e)| *v >= e.lower && *v <= e.upper)
    }

    /// Load bounds from a sectioned `key = value` config:
    ///
    /// ```text
    /// [r2_branch_ohm]
    /// lower = 0.01
    /// upper = 0.30
    /// ```
    ///
    /// Section order defines parameter order.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, FitError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| FitError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let fail = |message: String| FitError::BoundsFile {
            path: path.display().to_string(),
            message,
        };
        let mut entries: Vec<BoundEntry> = Vec::new();
        let mut current: Option<(String, Option<f64>, Option<f64>)> = None;
        let mut finish =
            |cur: Option<(String, Option<f64>, Option<f64>)>, entries: &mut Vec<BoundEntry>| -> Result<(), FitError> {
                if let Some((name, lo, hi)) = cur {
                    let lower = lo.ok_or_else(|| fail(format!("section `{name}` missing `lower`")))?;
                    let upper = hi.ok_or_else(|| fail(format!("section `{name}` missing `upper`")))?;
                    entries.push(BoundEntry { name, lower, upper });
                }
                Ok(())
            };
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                finish(current.take(), &mut entries)?;
                current = Some((name.trim().to_string(), None, None));
            } else {
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| fail(format!("line {}: expected `key = value`", idx + 1)))?;
                let value: f64 = value
                    .trim()
                    .parse()
                    .map_err(|_| fail(format!("line {}: value is not a number", idx + 1)))?;
                let cur = current
                    .as_mut()
                    .ok_or_else(|| fail(format!("line {}: key outside any [section]", idx + 1)))?;
                match key.trim() {
                    "lower" => cur.1 = Some(value),
                    "upper" => cur.2 = Some(value),
                    other => return Err(fail(format!("line {}: unknown key `{other}`", idx + 1))),
                }
            }
        }
        finish(current.take(), &mut entries)?;
        Self::new(entries)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!("[{}]\nlower = {}\nupper = {}\n\n", e.name, e.lower, e.upper));
        }
        out
    }
}
