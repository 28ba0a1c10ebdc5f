use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("protocol file {path}, line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("invalid step `{label}`: {message}")]
    InvalidStep { label: String, message: String },
    #[error("protocol has no blocks")]
    Empty,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    CcCharge,
    CcDischarge,
    CvHold,
    Rest,
}

impl StepKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepKind::CcCharge => "cc_charge",
            StepKind::CcDischarge => "cc_discharge",
            StepKind::CvHold => "cv_hold",
            StepKind::Rest => "rest",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "cc_charge" => Some(StepKind::CcCharge),
            "cc_discharge" => Some(StepKind::CcDischarge),
            "cv_hold" => Some(StepKind::CvHold),
            "rest" => Some(StepKind::Rest),
            _ => None,
        }
    }
}

/// One protocol step. Constant-current steps need a positive current and a
/// voltage cutoff (an optional duration caps them); holds need a target
/// voltage and a duration; rests need a duration.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolStep {
    pub kind: StepKind,
    /// Step current magnitude in amperes (cc steps only).
    pub current_a: Option<f64>,
    /// Voltage cutoff (cc) or hold target (cv), volts.
    pub voltage_v: Option<f64>,
    /// Duration in seconds: required cap for cv/rest, optional cap for cc.
    pub duration_s: Option<f64>,
    pub label: String,
}

impl ProtocolStep {
    pub fn cc_charge(current_a: f64, cutoff_v: f64, label: impl Into<String>) -> Self {
        Self {
            kind: StepKind::CcCharge,
            current_a: Some(current_a),
            voltage_v: Some(cutoff_v),
            duration_s: None,
            label: label.into(),
        }
    }

    pub fn cc_discharge(current_a: f64, cutoff_v: f64, label: impl Into<String>) -> Self {
        Self {
            kind: StepKind::CcDischarge,
            current_a: Some(current_a),
            voltage_v: Some(cutoff_v),
            duration_s: None,
            label: label.into(),
        }
    }

    pub fn cv_hold(voltage_v: f64, duration_s: f64, label: impl Into<String>) -> Self {
        Self {
            kind: StepKind::CvHold,
            current_a: None,
            voltage_v: Some(voltage_v),
            duration_s: Some(duration_s),
            label: label.into(),
        }
    }

    pub fn rest(duration_s: f64, label: impl Into<String>) -> Self {
        Self {
            kind: StepKind::Rest,
            current_a: None,
            voltage_v: None,
            duration_s: Some(duration_s),
            label: label.into(),
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        let fail = |message: &str| {
            Err(ProtocolError::InvalidStep {
                label: self.label.clone(),
                message: message.to_string(),
            })
        };
        match self.kind {
            StepKind::CcCharge | StepKind::CcDischarge => {
                match self.current_a {
                    Some(i) if i > 0.0 && i.is_finite() => {}
                    _ => return fail("cc steps need a positive current"),
                }
                match self.voltage_v {
                    Some(v) if v.is_finite() => {}
                    _ => return fail("cc steps need a voltage cutoff"),
                }
                if let Some(d) = self.duration_s {
                    if !(d > 0.0) {
                        return fail("duration cap must be positive");
                    }
                }
            }
            StepKind::CvHold => {
                match self.voltage_v {
                    Some(v) if v.is_finite() => {}
                    _ => return fail("cv_hold needs a target voltage"),
                }
                match self.duration_s {
                    Some(d) if d > 0.0 => {}
                    _ => return fail("cv_hold needs a positive duration"),
                }
            }
            StepKind::Rest => match self.duration_s {
                Some(d) if d > 0.0 => {}
                _ => return fail("rest needs a positive duration"),
            },
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolBlock {
    pub steps: Vec<ProtocolStep>,
    pub repetitions: u32,
}

/// An ordered chain of repeated step blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    pub blocks: Vec<ProtocolBlock>,
}

impl Protocol {
    pub fn new(blocks: Vec<ProtocolBlock>) -> Result<Self, ProtocolError> {
        if blocks.is_empty() {
            return Err(ProtocolError::Empty);
        }
        for block in &blocks {
            if block.repetitions == 0 {
                return Err(ProtocolError::InvalidStep {
                    label: String::new(),
                    message: "repetitions must be >= 1".to_string(),
                });
            }
            for step in &block.steps {
                step.validate()?;
            }
        }
        Ok(Self { blocks })
    }

    /// Parse a protocol file: one step per line,
    /// `<kind> current=<A> cutoff_v=<V> duration_s=<s> label=<text>`, either
    /// inside `repeat <n> ... end` blocks or bare (consecutive bare lines
    /// form one single-repetition block). `#` starts a comment.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ProtocolError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ProtocolError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, path: &str) -> Result<Self, ProtocolError> {
        let fail = |line: usize, message: String| ProtocolError::Parse {
            path: path.to_string(),
            line,
            message,
        };
        let mut blocks: Vec<ProtocolBlock> = Vec::new();
        // (repetitions, steps) of an open `repeat` block, if any
        let mut open: Option<(u32, Vec<ProtocolStep>)> = None;
        let mut bare: Vec<ProtocolStep> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let head = tokens.next().unwrap();
            match head {
                "repeat" => {
                    if open.is_some() {
                        return Err(fail(lineno, "nested repeat blocks are not supported".into()));
                    }
                    if !bare.is_empty() {
                        blocks.push(ProtocolBlock {
                            steps: std::mem::take(&mut bare),
                            repetitions: 1,
                        });
                    }
                    let n: u32 = tokens
                        .next()
                        .ok_or_else(|| fail(lineno, "repeat needs a count".into()))?
                        .parse()
                        .map_err(|_| fail(lineno, "repeat count is not an integer".into()))?;
                    if n == 0 {
                        return Err(fail(lineno, "repeat count must be >= 1".into()));
                    }
                    open = Some((n, Vec::new()));
                }
                "end" => match open.take() {
                    Some((repetitions, steps)) => {
                        if steps.is_empty() {
                            return Err(fail(lineno, "repeat block has no steps".into()));
                        }
                        blocks.push(ProtocolBlock { steps, repetitions });
                    }
                    None => return Err(fail(lineno, "`end` without `repeat`".into())),
                },
                kind_str => {
                    let kind = StepKind::parse(kind_str)
                        .ok_or_else(|| fail(lineno, format!("unknown step kind `{kind_str}`")))?;
                    let mut current = None;
                    let mut voltage = None;
                    let mut duration = None;
                    let mut label = None;
                    for token in tokens {
                        let (key, value) = token.split_once('=').ok_or_else(|| {
                            fail(lineno, format!("expected key=value, got `{token}`"))
                        })?;
                        let num = || -> Result<f64, ProtocolError> {
                            value
                                .parse()
                                .map_err(|_| fail(lineno, format!("`{key}` is not a number")))
                        };
                        match key {
                            "current" => current = Some(num()?),
                            "cutoff_v" => voltage = Some(num()?),
                            "duration_s" => duration = Some(num()?),
                            "label" => label = Some(value.to_string()),
                            _ => return Err(fail(lineno, format!("unknown key `{key}`"))),
                        }
                    }
                    let step = ProtocolStep {
                        kind,
                        current_a: current,
                        voltage_v: voltage,
                        duration_s: duration,
                        label: label.unwrap_or_else(|| kind.as_str().to_string()),
                    };
                    step.validate().map_err(|e| fail(lineno, e.to_string()))?;
                    match &mut open {
                        Some((_, steps)) => steps.push(step),
                        None => bare.push(step),
                    }
                }
            }
        }
        if open.is_some() {
            return Err(fail(text.lines().count(), "unterminated repeat block".into()));
        }
        if !bare.is_empty() {
            blocks.push(ProtocolBlock {
                steps: bare,
                repetitions: 1,
            });
        }
        Self::new(blocks)
    }

    /// Render in the format `parse` reads.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for block in &self.blocks {
            writeln!(out, "repeat {}", block.repetitions).unwrap();
            for step in &block.steps {
                write!(out, "  {}", step.kind.as_str()).unwrap();
                if let Some(i) = step.current_a {
                    write!(out, " current={i}").unwrap();
                }
                if let Some(v) = step.voltage_v {
                    write!(out, " cutoff_v={v}").unwrap();
                }
                if let Some(d) = step.duration_s {
                    write!(out, " duration_s={d}").unwrap();
                }
                writeln!(out, " label={}", step.label).unwrap();
            }
            writeln!(out, "end").unwrap();
        }
        out
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<(), ProtocolError> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|source| ProtocolError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Total number of block repetitions, i.e. the number of cycle indices
    /// the protocol will produce.
    pub fn total_repetitions(&self) -> u64 {
        self.blocks.iter().map(|b| b.repetitions as u64).sum()
    }
}
