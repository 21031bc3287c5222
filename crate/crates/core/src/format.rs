//! The FKBX plain-text model format.
//!
//! A file describes a sequential network: a magic line, the layer count,
//! the input width, then one block per layer. Tokens are separated by
//! whitespace and `#` starts a comment that runs to the end of the line.
//!
//! ```text
//! FKBX 1
//! layers 1
//! input 2
//! dense 2 linear 0
//! b 0 0
//! W 1 0
//! W 0 1
//! ```
//!
//! Dense weights are stored one row per output unit, so `y = W·x + b`
//! with `W` of shape `[output_dim × input_dim]`. Floats are written with
//! 17 significant digits, which is enough for every `f64` to survive a
//! text round trip unchanged.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;
pub const MAGIC: &str = "FKBX";
/// Extension of model files picked up when loading a directory.
pub const MODEL_EXTENSION: &str = "fkbx";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    Linear,
    Relu,
    LeakyRelu,
    Sigmoid,
    Tanh,
    Softmax,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 6] = [
        ActivationKind::Linear,
        ActivationKind::Relu,
        ActivationKind::LeakyRelu,
        ActivationKind::Sigmoid,
        ActivationKind::Tanh,
        ActivationKind::Softmax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Linear => "linear",
            ActivationKind::Relu => "relu",
            ActivationKind::LeakyRelu => "leakyrelu",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Softmax => "softmax",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Activation choice plus the leaky coefficient. `alpha` is carried for
/// every kind so files round-trip, but only `leakyrelu` reads it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationSpec {
    pub kind: ActivationKind,
    pub alpha: f64,
}

impl ActivationSpec {
    pub fn new(kind: ActivationKind) -> Self {
        Self { kind, alpha: 0.0 }
    }

    pub fn leaky_relu(alpha: f64) -> Self {
        Self {
            kind: ActivationKind::LeakyRelu,
            alpha,
        }
    }
}

impl From<ActivationKind> for ActivationSpec {
    fn from(kind: ActivationKind) -> Self {
        Self::new(kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseSpec {
    pub activation: ActivationSpec,
    /// One row per output unit; every row has `input_dim` entries.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl DenseSpec {
    pub fn output_dim(&self) -> usize {
        self.biases.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormSpec {
    pub epsilon: f64,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub moving_mean: Vec<f64>,
    pub moving_variance: Vec<f64>,
}

impl BatchNormSpec {
    /// Parameters that make the layer an (almost) identity map.
    pub fn identity(dim: usize, epsilon: f64) -> Self {
        Self {
            epsilon,
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
            moving_mean: vec![0.0; dim],
            moving_variance: vec![1.0; dim],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Dense(DenseSpec),
    Dropout { rate: f64 },
    BatchNorm(BatchNormSpec),
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Dense(_) => "dense",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::BatchNorm(_) => "batchnorm",
        }
    }

    /// Output width given the width flowing into the layer.
    pub fn output_dim(&self, input_dim: usize) -> usize {
        match self {
            LayerSpec::Dense(d) => d.output_dim(),
            LayerSpec::Dropout { .. } | LayerSpec::BatchNorm(_) => input_dim,
        }
    }

    pub fn parameter_count(&self) -> usize {
        match self {
            LayerSpec::Dense(d) => d.weights.iter().map(Vec::len).sum::<usize>() + d.biases.len(),
            LayerSpec::Dropout { .. } => 0,
            LayerSpec::BatchNorm(bn) => 4 * bn.gamma.len(),
        }
    }

    fn for_each_float(&self, f: &mut impl FnMut(f64)) {
        match self {
            LayerSpec::Dense(d) => {
                f(d.activation.alpha);
                d.biases.iter().copied().for_each(&mut *f);
                d.weights.iter().flatten().copied().for_each(f);
            }
            LayerSpec::Dropout { rate } => f(*rate),
            LayerSpec::BatchNorm(bn) => {
                f(bn.epsilon);
                for v in [&bn.gamma, &bn.beta, &bn.moving_mean, &bn.moving_variance] {
                    v.iter().copied().for_each(&mut *f);
                }
            }
        }
    }
}

/// A parsed and validated sequential network description.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub format_version: u32,
    pub input_dim: usize,
    pub layers: Vec<LayerSpec>,
}

impl ModelSpec {
    pub fn new(input_dim: usize, layers: Vec<LayerSpec>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            input_dim,
            layers,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.layers
            .iter()
            .fold(self.input_dim, |dim, layer| layer.output_dim(dim))
    }

    /// `(input_dim, output_dim)` for each layer, in order.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dim = self.input_dim;
        self.layers
            .iter()
            .map(|layer| {
                let out = layer.output_dim(dim);
                let pair = (dim, out);
                dim = out;
                pair
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::parameter_count).sum()
    }

    /// Structural equality that compares every float by its bit pattern,
    /// so `0.0` and `-0.0` are distinct.
    pub fn bit_eq(&self, other: &ModelSpec) -> bool {
        if self.format_version != other.format_version
            || self.input_dim != other.input_dim
            || self.layers.len() != other.layers.len()
        {
            return false;
        }
        self.layers.iter().zip(&other.layers).all(|(a, b)| {
            if std::mem::discriminant(a) != std::mem::discriminant(b) {
                return false;
            }
            if let (LayerSpec::Dense(x), LayerSpec::Dense(y)) = (a, b) {
                if x.activation.kind != y.activation.kind
                    || x.weights.len() != y.weights.len()
                    || x.weights.iter().zip(&y.weights).any(|(r, s)| r.len() != s.len())
                {
                    return false;
                }
            }
            let (mut fa, mut fb) = (Vec::new(), Vec::new());
            a.for_each_float(&mut |v| fa.push(v.to_bits()));
            b.for_each_float(&mut |v| fb.push(v.to_bits()));
            fa == fb
        })
    }
}

impl FromStr for ModelSpec {
    type Err = FormatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_model(s)
    }
}

impl fmt::Display for ModelSpec {
    /// Canonical text, without re-validating.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatErrorKind {
    #[error("bad magic, expected `{MAGIC} {FORMAT_VERSION}`")]
    BadMagic,
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported layer kind `{0}`")]
    UnsupportedLayer(String),
}

/// A parse failure. `line` is 1-based.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct FormatError {
    pub line: usize,
    pub kind: FormatErrorKind,
}

impl FormatError {
    fn new(line: usize, kind: FormatErrorKind) -> Self {
        Self { line, kind }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Version,
    EmptyLayers,
    DimensionMismatch,
    Domain,
    SoftmaxPlacement,
}

/// One broken invariant. `layer` is the 0-based layer index, or `None`
/// for model-level rules.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub layer: Option<usize>,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.layer {
            Some(i) => write!(f, "layer {i}: {:?}: {}", self.rule, self.detail),
            None => write!(f, "model: {:?}: {}", self.rule, self.detail),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid model spec: {}", .violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
pub struct InvalidSpec {
    pub violations: Vec<Violation>,
}

/// Checks every invariant of `spec` and reports all violations found.
pub fn validate_spec(spec: &ModelSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |layer: Option<usize>, rule: Rule, detail: String| {
        out.push(Violation {
            layer,
            rule,
            detail,
        })
    };

    if spec.format_version != FORMAT_VERSION {
        push(
            None,
            Rule::Version,
            format!("format_version {} (expected {FORMAT_VERSION})", spec.format_version),
        );
    }
    if spec.input_dim == 0 {
        push(None, Rule::DimensionMismatch, "input_dim must be positive".into());
    }
    if spec.layers.is_empty() {
        push(None, Rule::EmptyLayers, "model has no layers".into());
    }

    let last_dense = spec
        .layers
        .iter()
        .rposition(|l| matches!(l, LayerSpec::Dense(_)));
    let mut dim = spec.input_dim;
    for (i, layer) in spec.layers.iter().enumerate() {
        let at = Some(i);
        let mut non_finite = false;
        layer.for_each_float(&mut |v| non_finite |= !v.is_finite());
        if non_finite {
            push(at, Rule::Domain, "non-finite parameter".into());
        }
        match layer {
            LayerSpec::Dense(d) => {
                if d.biases.is_empty() {
                    push(at, Rule::DimensionMismatch, "output_dim must be positive".into());
                }
                if d.weights.len() != d.biases.len() {
                    push(
                        at,
                        Rule::DimensionMismatch,
                        format!("{} weight rows for output_dim {}", d.weights.len(), d.biases.len()),
                    );
                }
                if let Some((r, row)) = d.weights.iter().enumerate().find(|(_, row)| row.len() != dim) {
                    push(
                        at,
                        Rule::DimensionMismatch,
                        format!("weight row {r} has {} entries, expected input_dim {dim}", row.len()),
                    );
                }
                let alpha = d.activation.alpha;
                if !(0.0..=1.0).contains(&alpha) {
                    push(at, Rule::Domain, format!("activation alpha {alpha} outside [0, 1]"));
                }
                if d.activation.kind == ActivationKind::Softmax && last_dense != Some(i) {
                    push(
                        at,
                        Rule::SoftmaxPlacement,
                        "softmax is only allowed on the final dense layer".into(),
                    );
                }
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(rate) {
                    push(at, Rule::Domain, format!("dropout rate {rate} outside [0, 1)"));
                }
            }
            LayerSpec::BatchNorm(bn) => {
                if bn.epsilon.is_nan() || bn.epsilon <= 0.0 {
                    push(at, Rule::Domain, format!("epsilon {} must be positive", bn.epsilon));
                }
                for (name, v) in [
                    ("gamma", &bn.gamma),
                    ("beta", &bn.beta),
                    ("mean", &bn.moving_mean),
                    ("variance", &bn.moving_variance),
                ] {
                    if v.len() != dim {
                        push(
                            at,
                            Rule::DimensionMismatch,
                            format!("{name} has {} entries, expected {dim}", v.len()),
                        );
                    }
                }
                if bn.moving_variance.iter().any(|&v| v < 0.0) {
                    push(at, Rule::Domain, "negative moving variance".into());
                }
            }
        }
        dim = layer.output_dim(dim);
    }
    out
}

pub fn check_spec(spec: &ModelSpec) -> Result<(), InvalidSpec> {
    let violations = validate_spec(spec);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(InvalidSpec { violations })
    }
}

fn write_floats(out: &mut String, key: &str, values: &[f64]) {
    out.push_str(key);
    for v in values {
        // 17 significant digits: one before the point, sixteen after
        let _ = write!(out, " {v:.16e}");
    }
    out.push('\n');
}

fn render(spec: &ModelSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {}", spec.format_version);
    let _ = writeln!(out, "layers {}", spec.layers.len());
    let _ = writeln!(out, "input {}", spec.input_dim);
    for layer in &spec.layers {
        match layer {
            LayerSpec::Dense(d) => {
                let _ = writeln!(
                    out,
                    "dense {} {} {:.16e}",
                    d.output_dim(),
                    d.activation.kind,
                    d.activation.alpha
                );
                write_floats(&mut out, "b", &d.biases);
                for row in &d.weights {
                    write_floats(&mut out, "W", row);
                }
            }
            LayerSpec::Dropout { rate } => {
                let _ = writeln!(out, "dropout {rate:.16e}");
            }
            LayerSpec::BatchNorm(bn) => {
                let _ = writeln!(out, "batchnorm {:.16e}", bn.epsilon);
                write_floats(&mut out, "gamma", &bn.gamma);
                write_floats(&mut out, "beta", &bn.beta);
                write_floats(&mut out, "mean", &bn.moving_mean);
                write_floats(&mut out, "variance", &bn.moving_variance);
            }
        }
    }
    out
}

/// Emits the canonical FKBX text for a valid spec.
pub fn serialize_model(spec: &ModelSpec) -> Result<String, InvalidSpec> {
    check_spec(spec)?;
    Ok(render(spec))
}

const RECORD_KEYWORDS: [&str; 9] = [
    "layers", "input", "b", "W", "gamma", "beta", "mean", "variance", MAGIC,
];

struct Record<'a> {
    line: usize,
    tokens: Vec<&'a str>,
}

struct Records<'a> {
    records: std::vec::IntoIter<Record<'a>>,
    last_line: usize,
}

impl<'a> Records<'a> {
    fn split(input: &'a [u8]) -> Result<Self, FormatError> {
        let mut records = Vec::new();
        let mut last_line = 1;
        for (idx, raw) in input.split(|&b| b == b'\n').enumerate() {
            let line = idx + 1;
            let text = std::str::from_utf8(raw).map_err(|_| {
                FormatError::new(line, FormatErrorKind::Syntax("invalid UTF-8".into()))
            })?;
            let text = text.split('#').next().unwrap_or("");
            let tokens: Vec<&str> = text.split_whitespace().collect();
            if !tokens.is_empty() {
                last_line = line;
                records.push(Record { line, tokens });
            }
        }
        Ok(Self {
            records: records.into_iter(),
            last_line,
        })
    }

    fn next_or_eof(&mut self, expected: &str) -> Result<Record<'a>, FormatError> {
        self.records.next().ok_or_else(|| {
            FormatError::new(
                self.last_line,
                FormatErrorKind::DimensionMismatch(format!("unexpected end of input, expected {expected}")),
            )
        })
    }

    fn expect(&mut self, keyword: &str) -> Result<Record<'a>, FormatError> {
        let rec = self.next_or_eof(&format!("`{keyword}` record"))?;
        if rec.tokens[0] != keyword {
            return Err(syntax(
                rec.line,
                format!("expected `{keyword}` record, found `{}`", rec.tokens[0]),
            ));
        }
        Ok(rec)
    }
}

fn syntax(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::new(line, FormatErrorKind::Syntax(msg.into()))
}

fn parse_count(line: usize, token: &str, what: &str) -> Result<usize, FormatError> {
    token
        .parse::<usize>()
        .map_err(|_| syntax(line, format!("{what} `{token}` is not a non-negative integer")))
}

fn parse_float(line: usize, token: &str) -> Result<f64, FormatError> {
    let v: f64 = token
        .parse()
        .map_err(|_| syntax(line, format!("`{token}` is not a number")))?;
    if !v.is_finite() {
        return Err(FormatError::new(
            line,
            FormatErrorKind::Domain(format!("non-finite value `{token}`")),
        ));
    }
    Ok(v)
}

fn arity(rec: &Record<'_>, expected: usize) -> Result<(), FormatError> {
    let found = rec.tokens.len() - 1;
    if found != expected {
        return Err(syntax(
            rec.line,
            format!("`{}` takes {expected} argument(s), found {found}", rec.tokens[0]),
        ));
    }
    Ok(())
}

fn float_record(records: &mut Records<'_>, keyword: &str, len: usize) -> Result<Vec<f64>, FormatError> {
    let rec = records.expect(keyword)?;
    let values = rec.tokens[1..]
        .iter()
        .map(|t| parse_float(rec.line, t))
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != len {
        return Err(FormatError::new(
            rec.line,
            FormatErrorKind::DimensionMismatch(format!(
                "`{keyword}` has {} values, expected {len}",
                values.len()
            )),
        ));
    }
    Ok(values)
}

/// Parses FKBX bytes into a validated [`ModelSpec`].
pub fn parse_model(input: impl AsRef<[u8]>) -> Result<ModelSpec, FormatError> {
    let mut records = Records::split(input.as_ref())?;

    let magic = records
        .records
        .next()
        .ok_or_else(|| FormatError::new(1, FormatErrorKind::BadMagic))?;
    let version = FORMAT_VERSION.to_string();
    if magic.tokens != [MAGIC, version.as_str()] {
        return Err(FormatError::new(magic.line, FormatErrorKind::BadMagic));
    }

    let rec = records.expect("layers")?;
    arity(&rec, 1)?;
    let n_layers = parse_count(rec.line, rec.tokens[1], "layer count")?;
    if n_layers == 0 {
        return Err(FormatError::new(
            rec.line,
            FormatErrorKind::Domain("layer count must be positive".into()),
        ));
    }

    let rec = records.expect("input")?;
    arity(&rec, 1)?;
    let input_dim = parse_count(rec.line, rec.tokens[1], "input dimension")?;
    if input_dim == 0 {
        return Err(FormatError::new(
            rec.line,
            FormatErrorKind::Domain("input dimension must be positive".into()),
        ));
    }

    let mut layers = Vec::with_capacity(n_layers.min(1024));
    let mut header_lines = Vec::new();
    let mut dim = input_dim;
    for i in 0..n_layers {
        let rec = records.next_or_eof(&format!("layer block {} of {n_layers}", i + 1))?;
        let line = rec.line;
        let layer = match rec.tokens[0] {
            "dense" => {
                arity(&rec, 3)?;
                let out = parse_count(line, rec.tokens[1], "output dimension")?;
                if out == 0 {
                    return Err(FormatError::new(
                        line,
                        FormatErrorKind::Domain("dense output dimension must be positive".into()),
                    ));
                }
                let kind = ActivationKind::from_name(rec.tokens[2])
                    .ok_or_else(|| syntax(line, format!("unknown activation `{}`", rec.tokens[2])))?;
                let alpha = parse_float(line, rec.tokens[3])?;
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(FormatError::new(
                        line,
                        FormatErrorKind::Domain(format!("alpha {alpha} outside [0, 1]")),
                    ));
                }
                let biases = float_record(&mut records, "b", out)?;
                let weights = (0..out)
                    .map(|_| float_record(&mut records, "W", dim))
                    .collect::<Result<Vec<_>, _>>()?;
                LayerSpec::Dense(DenseSpec {
                    activation: ActivationSpec { kind, alpha },
                    weights,
                    biases,
                })
            }
            "dropout" => {
                arity(&rec, 1)?;
                let rate = parse_float(line, rec.tokens[1])?;
                if !(0.0..1.0).contains(&rate) {
                    return Err(FormatError::new(
                        line,
                        FormatErrorKind::Domain(format!("dropout rate {rate} outside [0, 1)")),
                    ));
                }
                LayerSpec::Dropout { rate }
            }
            "batchnorm" => {
                arity(&rec, 1)?;
                let epsilon = parse_float(line, rec.tokens[1])?;
                if epsilon <= 0.0 {
                    return Err(FormatError::new(
                        line,
                        FormatErrorKind::Domain(format!("epsilon {epsilon} must be positive")),
                    ));
                }
                let gamma = float_record(&mut records, "gamma", dim)?;
                let beta = float_record(&mut records, "beta", dim)?;
                let moving_mean = float_record(&mut records, "mean", dim)?;
                let moving_variance = float_record(&mut records, "variance", dim)?;
                LayerSpec::BatchNorm(BatchNormSpec {
                    epsilon,
                    gamma,
                    beta,
                    moving_mean,
                    moving_variance,
                })
            }
            kw if RECORD_KEYWORDS.contains(&kw) => {
                return Err(syntax(line, format!("expected a layer block, found `{kw}` record")));
            }
            kw => {
                return Err(FormatError::new(line, FormatErrorKind::UnsupportedLayer(kw.to_string())));
            }
        };
        dim = layer.output_dim(dim);
        layers.push(layer);
        header_lines.push(line);
    }

    if let Some(extra) = records.records.next() {
        let kind = match extra.tokens[0] {
            "dense" | "dropout" | "batchnorm" => FormatErrorKind::DimensionMismatch(format!(
                "more layer blocks than the declared {n_layers}"
            )),
            kw => FormatErrorKind::Syntax(format!("unexpected `{kw}` record after the last layer")),
        };
        return Err(FormatError::new(extra.line, kind));
    }

    let spec = ModelSpec::new(input_dim, layers);
    if let Some(v) = validate_spec(&spec).into_iter().next() {
        let line = v.layer.map_or(1, |i| header_lines[i]);
        let kind = match v.rule {
            Rule::Domain => FormatErrorKind::Domain(v.detail),
            Rule::SoftmaxPlacement => FormatErrorKind::Domain(v.detail),
            _ => FormatErrorKind::DimensionMismatch(v.detail),
        };
        return Err(FormatError::new(line, kind));
    }
    Ok(spec)
}
