//! Candidate operators `W_i` and the right-hand side `Σ c_i W_i(u)`.

use std::cell::OnceCell;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fields::{derivative_into, Field, Grid1D};

/// Kernel `f(x, y)` of a graphon term. All variants are affine in `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelSpec {
    One,
    CoordX,
    CoordY,
    Affine { c0: f64, cx: f64, cy: f64 },
}

impl KernelSpec {
    /// `(c0, cx, cy)` with `f(x, y) = c0 + cx x + cy y`.
    pub fn coefficients(&self) -> (f64, f64, f64) {
        match *self {
            KernelSpec::One => (1.0, 0.0, 0.0),
            KernelSpec::CoordX => (0.0, 1.0, 0.0),
            KernelSpec::CoordY => (0.0, 0.0, 1.0),
            KernelSpec::Affine { c0, cx, cy } => (c0, cx, cy),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (c0, cx, cy) = self.coefficients();
        c0 + cx * x + cy * y
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum KernelRepr {
    Named(String),
    Affine { c0: f64, cx: f64, cy: f64 },
}

impl Serialize for KernelSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match *self {
            KernelSpec::One => KernelRepr::Named("one".into()),
            KernelSpec::CoordX => KernelRepr::Named("x".into()),
            KernelSpec::CoordY => KernelRepr::Named("y".into()),
            KernelSpec::Affine { c0, cx, cy } => KernelRepr::Affine { c0, cx, cy },
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for KernelSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match KernelRepr::deserialize(d)? {
            KernelRepr::Named(name) => match name.as_str() {
                "one" | "1" => Ok(KernelSpec::One),
                "x" => Ok(KernelSpec::CoordX),
                "y" => Ok(KernelSpec::CoordY),
                other => Err(serde::de::Error::custom(format!(
                    "unknown kernel {other:?}"
                ))),
            },
            KernelRepr::Affine { c0, cx, cy } => Ok(KernelSpec::Affine { c0, cx, cy }),
        }
    }
}

/// One candidate operator.
///
/// `MonomialDerivative { power: j, order: k }` is `u^j ∂^k u/∂x^k` for
/// `k ≥ 1` and the plain power `u^j` for `k = 0`, so `{1, 0}` is the identity
/// `u` and `{0, 0}` is not allowed (use [`TermSpec::Constant`]).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TermSpec {
    Constant,
    #[serde(rename = "monomial")]
    MonomialDerivative {
        #[serde(rename = "j")]
        power: u32,
        #[serde(rename = "k")]
        order: u32,
    },
    #[serde(rename = "graphon")]
    GraphonKernel {
        #[serde(rename = "f")]
        kernel: KernelSpec,
    },
}

impl TermSpec {
    pub const fn identity() -> Self {
        TermSpec::MonomialDerivative { power: 1, order: 0 }
    }

    pub const fn monomial(power: u32, order: u32) -> Self {
        TermSpec::MonomialDerivative { power, order }
    }

    pub fn is_identity(&self) -> bool {
        *self == TermSpec::identity()
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TermSpec::Constant => Ok(()),
            TermSpec::MonomialDerivative { power, order } => {
                if order > 3 {
                    return Err(Error::InvalidInput(format!(
                        "derivative order {order} outside 0..=3"
                    )));
                }
                if power == 0 && order == 0 {
                    return Err(Error::InvalidInput(
                        "monomial with j = 0 and k = 0 is the constant term; use Constant".into(),
                    ));
                }
                Ok(())
            }
            TermSpec::GraphonKernel { kernel } => {
                let (c0, cx, cy) = kernel.coefficients();
                if c0.is_finite() && cx.is_finite() && cy.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidInput(
                        "graphon kernel coefficients must be finite".into(),
                    ))
                }
            }
        }
    }

    /// Total degree of homogeneity in `u`.
    pub fn degree(&self) -> u32 {
        match *self {
            TermSpec::Constant => 0,
            TermSpec::MonomialDerivative { power, order } => power + u32::from(order > 0),
            TermSpec::GraphonKernel { .. } => 1,
        }
    }
}

impl fmt::Display for TermSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            TermSpec::Constant => write!(f, "1"),
            TermSpec::MonomialDerivative { power, order } => {
                let pow = match power {
                    0 => String::new(),
                    1 => "u".to_string(),
                    p => format!("u^{p}"),
                };
                if order == 0 {
                    return write!(f, "{pow}");
                }
                let der = format!("u_{}", "x".repeat(order as usize));
                if pow.is_empty() {
                    write!(f, "{der}")
                } else {
                    write!(f, "{pow}*{der}")
                }
            }
            TermSpec::GraphonKernel { kernel } => match kernel {
                KernelSpec::One => write!(f, "graphon(1)"),
                KernelSpec::CoordX => write!(f, "graphon(x)"),
                KernelSpec::CoordY => write!(f, "graphon(y)"),
                KernelSpec::Affine { c0, cx, cy } => {
                    write!(f, "graphon({c0}{cx:+}x{cy:+}y)")
                }
            },
        }
    }
}

/// Lazily computed derivatives of one field, shared across terms.
pub(crate) struct Jet<'a> {
    u: &'a Field,
    derivatives: [OnceCell<Vec<f64>>; 3],
}

impl<'a> Jet<'a> {
    pub(crate) fn new(u: &'a Field) -> Self {
        Jet {
            u,
            derivatives: Default::default(),
        }
    }

    pub(crate) fn field(&self) -> &Field {
        self.u
    }

    fn derivative(&self, order: usize) -> &[f64] {
        self.derivatives[order - 1].get_or_init(|| {
            let mut out = vec![0.0; self.u.len()];
            derivative_into(
                self.u.grid(),
                self.u.values(),
                self.u.is_dirichlet(),
                order,
                &mut out,
            );
            out
        })
    }

    /// Writes `W(u)` into `out`, scaled by `scale` and accumulated.
    pub(crate) fn accumulate(&self, term: &TermSpec, scale: f64, out: &mut [f64]) -> Result<()> {
        let u = self.u.values();
        match *term {
            TermSpec::Constant => out.iter_mut().for_each(|o| *o += scale),
            TermSpec::MonomialDerivative { power, order } => {
                if order == 0 {
                    for (o, &v) in out.iter_mut().zip(u) {
                        *o += scale * v.powi(power as i32);
                    }
                } else {
                    let d = self.derivative(order as usize);
                    for ((o, &v), &dv) in out.iter_mut().zip(u).zip(d) {
                        *o += scale * v.powi(power as i32) * dv;
                    }
                }
            }
            TermSpec::GraphonKernel { kernel } => {
                graphon_accumulate(self.u.grid(), u, &kernel, scale, out)?;
            }
        }
        Ok(())
    }
}

/// `∫₀¹ f(x, y) (u(y) − u(x)) dy` with trapezoidal quadrature in `y`.
///
/// For affine `f` the double sum factors into four weighted moments of `u`,
/// which gives the same quadrature in O(N).
fn graphon_accumulate(
    grid: &Grid1D,
    u: &[f64],
    kernel: &KernelSpec,
    scale: f64,
    out: &mut [f64],
) -> Result<()> {
    if !grid.is_unit_interval() {
        return Err(Error::Domain(format!(
            "graphon terms need the domain [0, 1], got [{}, {}]",
            grid.x_min, grid.x_max
        )));
    }
    let weights = grid.trapezoid_weights();
    let nodes = grid.nodes();
    let (mut w0, mut w1, mut s0, mut s1) = (0.0, 0.0, 0.0, 0.0);
    for q in 0..u.len() {
        w0 += weights[q];
        w1 += weights[q] * nodes[q];
        s0 += weights[q] * u[q];
        s1 += weights[q] * nodes[q] * u[q];
    }
    let (c0, cx, cy) = kernel.coefficients();
    for i in 0..u.len() {
        let x = nodes[i];
        let value = (c0 + cx * x) * (s0 - u[i] * w0) + cy * (s1 - u[i] * w1);
        out[i] += scale * value;
    }
    Ok(())
}

/// Evaluates one operator node-wise on `u`.
pub fn apply_term(term: &TermSpec, u: &Field) -> Result<Field> {
    term.validate()?;
    let mut out = vec![0.0; u.len()];
    Jet::new(u).accumulate(term, 1.0, &mut out)?;
    Ok(Field::from_parts(*u.grid(), out, false))
}

/// Ordered list of distinct candidate operators, optionally with
/// coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary {
    terms: Vec<TermSpec>,
    coefficients: Option<Vec<f64>>,
}

impl Dictionary {
    pub fn new(terms: Vec<TermSpec>, coefficients: Option<Vec<f64>>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidInput("dictionary has no terms".into()));
        }
        for t in &terms {
            t.validate()?;
        }
        for i in 0..terms.len() {
            for j in 0..i {
                if terms[i] == terms[j] {
                    return Err(Error::InvalidInput(format!(
                        "duplicate term {} at positions {} and {}",
                        terms[i],
                        j + 1,
                        i + 1
                    )));
                }
            }
        }
        if let Some(c) = &coefficients {
            if c.len() != terms.len() {
                return Err(Error::Shape(format!(
                    "{} coefficients for {} terms",
                    c.len(),
                    terms.len()
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("coefficients must be finite".into()));
            }
        }
        Ok(Dictionary {
            terms,
            coefficients,
        })
    }

    pub fn candidates(terms: Vec<TermSpec>) -> Result<Self> {
        Dictionary::new(terms, None)
    }

    pub fn with_coefficients(&self, coefficients: Vec<f64>) -> Result<Self> {
        Dictionary::new(self.terms.clone(), Some(coefficients))
    }

    pub fn terms(&self) -> &[TermSpec] {
        &self.terms
    }

    pub fn coefficients(&self) -> Option<&[f64]> {
        self.coefficients.as_deref()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn position(&self, term: &TermSpec) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }

    /// Coefficient of `term`, zero when the term is absent.
    pub fn coefficient_of(&self, term: &TermSpec) -> f64 {
        match (&self.coefficients, self.position(term)) {
            (Some(c), Some(i)) => c[i],
            _ => 0.0,
        }
    }

    /// Reorders so the identity term `u` comes first, keeping the relative
    /// order of the rest. Returns the reordered dictionary and, for each new
    /// position, the original index.
    pub fn identity_first(&self) -> Result<(Dictionary, Vec<usize>)> {
        let id = self.position(&TermSpec::identity()).ok_or_else(|| {
            Error::Precondition(
                "dictionary must contain the identity term W_1(u) = u (add it, possibly with coefficient 0)"
                    .into(),
            )
        })?;
        let mut order = vec![id];
        order.extend((0..self.len()).filter(|&i| i != id));
        let terms = order.iter().map(|&i| self.terms[i]).collect();
        let coefficients = self
            .coefficients
            .as_ref()
            .map(|c| order.iter().map(|&i| c[i]).collect());
        Ok((
            Dictionary {
                terms,
                coefficients,
            },
            order,
        ))
    }

    /// `Σ c_i W_i(u)`. Dirichlet-tagged states get zero boundary values.
    pub fn apply_rhs(&self, u: &Field) -> Result<Field> {
        let mut out = vec![0.0; u.len()];
        self.apply_rhs_into(u, &mut out)?;
        Ok(Field::from_parts(*u.grid(), out, u.is_dirichlet()))
    }

    pub(crate) fn apply_rhs_into(&self, u: &Field, out: &mut [f64]) -> Result<()> {
        let coefficients = self.coefficients.as_ref().ok_or_else(|| {
            Error::Precondition("right-hand side needs dictionary coefficients".into())
        })?;
        out.iter_mut().for_each(|o| *o = 0.0);
        let jet = Jet::new(u);
        for (term, &c) in self.terms.iter().zip(coefficients) {
            if c != 0.0 {
                jet.accumulate(term, c, out)?;
            }
        }
        if u.is_dirichlet() {
            let last = out.len() - 1;
            out[0] = 0.0;
            out[last] = 0.0;
        }
        Ok(())
    }

    pub fn records(&self) -> Vec<TermRecord> {
        self.terms
            .iter()
            .enumerate()
            .map(|(i, t)| TermRecord {
                term: *t,
                c: self.coefficients.as_ref().map(|c| c[i]),
            })
            .collect()
    }

    pub fn from_records(records: Vec<TermRecord>) -> Result<Self> {
        let with_c = records.iter().filter(|r| r.c.is_some()).count();
        let coefficients = if with_c == 0 {
            None
        } else if with_c == records.len() {
            Some(records.iter().map(|r| r.c.unwrap()).collect())
        } else {
            return Err(Error::InvalidInput(
                "either every dictionary record has a coefficient `c` or none does".into(),
            ));
        };
        Dictionary::new(records.into_iter().map(|r| r.term).collect(), coefficients)
    }
}

/// Text form of one dictionary entry, e.g. `{"kind":"monomial","j":1,"k":2}`
/// or `{"kind":"graphon","f":{"c0":-1,"cx":0.7,"cy":0.3},"c":1.0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    #[serde(flatten)]
    pub term: TermSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

/// The 12 candidates `u^j ∂^k u`, `j ∈ {0,1,2}`, `k ∈ {0,…,3}`, in the order
/// `u, u², u³, u_x, u u_x, u² u_x, u_xx, …, u² u_xxx`.
pub fn pde_candidates() -> Dictionary {
    let mut terms = vec![
        TermSpec::monomial(1, 0),
        TermSpec::monomial(2, 0),
        TermSpec::monomial(3, 0),
    ];
    for order in 1..=3 {
        for power in 0..=2 {
            terms.push(TermSpec::monomial(power, order));
        }
    }
    Dictionary::candidates(terms).expect("distinct terms")
}

/// `1, u, u², u³` and graphon terms with kernels `1, x, y`.
pub fn graphon_candidates() -> Dictionary {
    Dictionary::candidates(vec![
        TermSpec::Constant,
        TermSpec::monomial(1, 0),
        TermSpec::monomial(2, 0),
        TermSpec::monomial(3, 0),
        TermSpec::GraphonKernel {
            kernel: KernelSpec::One,
        },
        TermSpec::GraphonKernel {
            kernel: KernelSpec::CoordX,
        },
        TermSpec::GraphonKernel {
            kernel: KernelSpec::CoordY,
        },
    ])
    .expect("distinct terms")
}
