//! Periodic incompressible velocity fields that split into shear sub-flows.
//!
//! A [`SplittableField`] is a finite sum `v(x) = Σ_j d_j v_j(<e_j, x>)` where
//! every term satisfies `<d_j, e_j> = 0`. Each term on its own is an exactly
//! integrable, divergence-free shear: `<e_j, x>` is conserved along its flow.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Orthogonality tolerance accepted for user-supplied terms.
pub const ORTHOGONALITY_TOL: f64 = 1e-12;

/// Scalar 2π-periodic profile of a split term, with closed-form derivatives.
#[derive(Clone, Copy)]
pub enum Profile {
    Sine,
    Cosine,
    Custom(CustomProfile),
}

/// A user profile given by its value and first two derivatives.
#[derive(Clone, Copy)]
pub struct CustomProfile {
    pub name: &'static str,
    pub value: fn(f64) -> f64,
    pub derivative: fn(f64) -> f64,
    pub second_derivative: fn(f64) -> f64,
}

impl Profile {
    #[inline]
    pub fn value(&self, s: f64) -> f64 {
        match self {
            Profile::Sine => s.sin(),
            Profile::Cosine => s.cos(),
            Profile::Custom(p) => (p.value)(s),
        }
    }

    #[inline]
    pub fn derivative(&self, s: f64) -> f64 {
        match self {
            Profile::Sine => s.cos(),
            Profile::Cosine => -s.sin(),
            Profile::Custom(p) => (p.derivative)(s),
        }
    }

    #[inline]
    pub fn second_derivative(&self, s: f64) -> f64 {
        match self {
            Profile::Sine => -s.sin(),
            Profile::Cosine => -s.cos(),
            Profile::Custom(p) => (p.second_derivative)(s),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Profile::Sine => "sin",
            Profile::Cosine => "cos",
            Profile::Custom(p) => p.name,
        }
    }
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One shear sub-flow `d · v(<e, x>)`.
#[derive(Debug, Clone)]
pub struct SplitTerm {
    d: Vec<f64>,
    e: Vec<f64>,
    profile: Profile,
}

impl SplitTerm {
    pub fn new(d: Vec<f64>, e: Vec<f64>, profile: Profile) -> Result<Self> {
        if d.len() != e.len() {
            return Err(Error::DimensionMismatch { expected: d.len(), got: e.len() });
        }
        if d.is_empty() {
            return Err(Error::InvalidParameter {
                name: "dim",
                reason: "split term needs at least one coordinate".into(),
            });
        }
        let dot = dot(&d, &e);
        if dot.abs() > ORTHOGONALITY_TOL || !dot.is_finite() {
            return Err(Error::NotOrthogonal(dot));
        }
        Ok(Self { d, e, profile })
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn e(&self) -> &[f64] {
        &self.e
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// The conserved coordinate `<e, x>`.
    #[inline]
    pub fn phase(&self, x: &[f64]) -> f64 {
        dot(&self.e, x)
    }

    #[inline]
    pub fn amplitude(&self, x: &[f64]) -> f64 {
        self.profile.value(self.phase(x))
    }
}

/// Closed-form stream functions for the built-in 2-D fields, `v = ∇⊥Ψ`
/// with `∇⊥ = (-∂/∂x₂, ∂/∂x₁)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamFunction {
    /// `Ψ = sin x₁ sin x₂`
    TaylorGreen,
    /// `Ψ = -cos x₁`
    Shear,
    /// `Ψ = 0`
    Zero,
}

impl StreamFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            StreamFunction::TaylorGreen => x[0].sin() * x[1].sin(),
            StreamFunction::Shear => -x[0].cos(),
            StreamFunction::Zero => 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SplittableField {
    name: String,
    dim: usize,
    terms: Vec<SplitTerm>,
    stream: Option<StreamFunction>,
}

impl SplittableField {
    pub fn new(name: impl Into<String>, dim: usize, terms: Vec<SplitTerm>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter { name: "dim", reason: "must be positive".into() });
        }
        if let Some(t) = terms.iter().find(|t| t.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: t.dim() });
        }
        Ok(Self { name: name.into(), dim, terms, stream: None })
    }

    pub fn with_stream_function(mut self, stream: StreamFunction) -> Self {
        self.stream = Some(stream);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[SplitTerm] {
        &self.terms
    }

    /// Number of split terms `n`.
    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn has_stream_function(&self) -> bool {
        self.stream.is_some()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(())
    }

    /// Writes `v(x)` into `out` without allocating. Lengths must equal `dim`.
    #[inline]
    pub fn velocity_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for term in &self.terms {
            let a = term.amplitude(x);
            for (o, d) in out.iter_mut().zip(&term.d) {
                *o += d * a;
            }
        }
    }

    pub fn eval_velocity(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut out = vec![0.0; self.dim];
        self.velocity_into(x, &mut out);
        Ok(out)
    }

    /// `∇v(x)` with entry `(i, k) = ∂v_i/∂x_k`.
    pub fn eval_gradient(&self, x: &[f64]) -> Result<Matrix> {
        self.check_dim(x)?;
        let mut g = Matrix::zeros(self.dim);
        for term in &self.terms {
            let dv = term.profile.derivative(term.phase(x));
            for i in 0..self.dim {
                for k in 0..self.dim {
                    g[(i, k)] += term.d[i] * dv * term.e[k];
                }
            }
        }
        Ok(g)
    }

    /// `(∇v)v`, the convective acceleration of the flow.
    pub fn convective_term(&self, x: &[f64]) -> Result<Vec<f64>> {
        let v = self.eval_velocity(x)?;
        Ok(self.eval_gradient(x)?.mul_vec(&v))
    }

    /// Componentwise Laplacian `Δv = Σ_j d_j |e_j|² v_j''(<e_j, x>)`.
    pub fn eval_laplacian(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut out = vec![0.0; self.dim];
        for term in &self.terms {
            let s = dot(&term.e, &term.e) * term.profile.second_derivative(term.phase(x));
            for (o, d) in out.iter_mut().zip(&term.d) {
                *o += d * s;
            }
        }
        Ok(out)
    }

    pub fn stream_function(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        match self.stream {
            Some(s) => Ok(s.eval(x)),
            None => Err(Error::NoStreamFunction(self.name.clone())),
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Taylor-Green cellular flow `v = (-sin x₁ cos x₂, cos x₁ sin x₂)`.
pub fn make_taylor_green() -> SplittableField {
    let terms = vec![
        SplitTerm { d: vec![-0.5, 0.5], e: vec![1.0, 1.0], profile: Profile::Sine },
        SplitTerm { d: vec![-0.5, -0.5], e: vec![1.0, -1.0], profile: Profile::Sine },
    ];
    SplittableField { name: "taylor-green".into(), dim: 2, terms, stream: Some(StreamFunction::TaylorGreen) }
}

/// Shear flow `v = (0, sin x₁)`.
pub fn make_shear() -> SplittableField {
    let terms = vec![SplitTerm { d: vec![0.0, 1.0], e: vec![1.0, 0.0], profile: Profile::Sine }];
    SplittableField { name: "shear".into(), dim: 2, terms, stream: Some(StreamFunction::Shear) }
}

/// `v ≡ 0`; every integrator reduces to pure diffusion.
pub fn make_zero(dim: usize) -> SplittableField {
    SplittableField { name: "zero".into(), dim, terms: Vec::new(), stream: (dim == 2).then_some(StreamFunction::Zero) }
}

/// Looks up a built-in field by name.
pub fn field_by_name(name: &str) -> Result<SplittableField> {
    match name {
        "taylor-green" | "tg" => Ok(make_taylor_green()),
        "shear" => Ok(make_shear()),
        "zero" | "none" => Ok(make_zero(2)),
        other => Err(Error::UnknownField(other.to_string())),
    }
}

/// Parses a declarative field description.
///
/// ```text
/// # comments and blank lines are ignored
/// name = cat-eye
/// dim = 2
/// term d = -0.5, 0.5  e = 1, 1  profile = sin
/// term d = 0, 1       e = 1, 0  profile = cos
/// ```
///
/// `dim` is optional and inferred from the first term.
pub fn parse_field_description(text: &str) -> Result<SplittableField> {
    let mut name = String::from("custom");
    let mut dim: Option<usize> = None;
    let mut terms = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |message: String| Error::Syntax { line: line_no, message };
        if let Some(rest) = line.strip_prefix("term") {
            terms.push(parse_term(rest).map_err(syntax)?);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| syntax(format!("expected `key = value` or `term ...`, got `{line}`")))?;
        match key.trim() {
            "name" => name = value.trim().to_string(),
            "dim" => dim = Some(value.trim().parse().map_err(|e| syntax(format!("bad dim: {e}")))?),
            other => return Err(syntax(format!("unknown key `{other}`"))),
        }
    }

    let dim = dim.or_else(|| terms.first().map(SplitTerm::dim)).ok_or_else(|| Error::Config {
        field: "term".into(),
        message: "field description has no terms and no dim".into(),
    })?;
    SplittableField::new(name, dim, terms)
}

fn parse_term(rest: &str) -> std::result::Result<SplitTerm, String> {
    // Normalise `key = value` spacing into `key=value` tokens separated by whitespace.
    let mut d = None;
    let mut e = None;
    let mut profile = Profile::Sine;
    let normalised = rest.replace(" =", "=").replace("= ", "=").replace(", ", ",");
    for token in normalised.split_whitespace() {
        let (k, v) = token.split_once('=').ok_or_else(|| format!("bad term token `{token}`"))?;
        match k {
            "d" => d = Some(parse_vector(v)?),
            "e" => e = Some(parse_vector(v)?),
            "profile" => {
                profile = match v {
                    "sin" | "sine" => Profile::Sine,
                    "cos" | "cosine" => Profile::Cosine,
                    other => return Err(format!("unknown profile `{other}`")),
                }
            }
            other => return Err(format!("unknown term key `{other}`")),
        }
    }
    let d = d.ok_or("term is missing `d`")?;
    let e = e.ok_or("term is missing `e`")?;
    SplitTerm::new(d, e, profile).map_err(|err| err.to_string())
}

fn parse_vector(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let p = p.trim();
            parse_real(p).ok_or_else(|| format!("bad number `{p}`"))
        })
        .collect()
}

/// Accepts plain floats plus `pi`, `pi/k` and `k*pi` shorthands.
pub fn parse_real(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Some(v);
    }
    let (sign, body) = match s.strip_prefix('-') {
        Some(b) => (-1.0, b),
        None => (1.0, s),
    };
    if body == "pi" {
        return Some(sign * PI);
    }
    if let Some(den) = body.strip_prefix("pi/") {
        return den.parse::<f64>().ok().map(|d| sign * PI / d);
    }
    if let Some(num) = body.strip_suffix("*pi") {
        return num.parse::<f64>().ok().map(|n| sign * n * PI);
    }
    None
}
