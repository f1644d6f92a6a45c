//! Observable functionals `ξ(u)` on sampled fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fields::{weighted_sum, Field, Grid1D};
use crate::operators::{Dictionary, Jet, TermSpec};

/// Weighting function `w(x)` used by lifted functionals `⟨W(u), w⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WeightSpec {
    /// `exp(−1/(1 − s²))` for `|s| < 1`, else 0, with `s = x/L`, or
    /// `s = 2x/L − 1` when `centered`.
    Bump {
        #[serde(rename = "L")]
        half_width: f64,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        centered: bool,
    },
    /// `x^p`
    #[serde(rename = "power")]
    PowerLaw {
        p: u32,
    },
    Constant,
    /// `sin(kπ (x − x_min)/(x_max − x_min))`, zero at both ends.
    Sine {
        k: u32,
    },
    Sum {
        terms: Vec<WeightSpec>,
    },
}

impl WeightSpec {
    pub fn bump(half_width: f64) -> Self {
        WeightSpec::Bump {
            half_width,
            centered: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            WeightSpec::Bump { half_width, .. }
                if !(*half_width > 0.0 && half_width.is_finite()) =>
            {
                Err(Error::InvalidInput(format!(
                    "bump width must be > 0, got {half_width}"
                )))
            }
            WeightSpec::Sum { terms } if terms.is_empty() => {
                Err(Error::InvalidInput("weight sum has no terms".into()))
            }
            WeightSpec::Sum { terms } => terms.iter().try_for_each(|t| t.validate()),
            _ => Ok(()),
        }
    }

    /// Weight values at the grid nodes.
    pub fn sample(&self, grid: &Grid1D) -> Result<Vec<f64>> {
        self.validate()?;
        let n = grid.num_points;
        Ok(match self {
            WeightSpec::Bump {
                half_width,
                centered,
            } => grid
                .nodes()
                .iter()
                .map(|&x| {
                    let s = if *centered {
                        2.0 * x / half_width - 1.0
                    } else {
                        x / half_width
                    };
                    if s.abs() < 1.0 {
                        (-1.0 / (1.0 - s * s)).exp()
                    } else {
                        0.0
                    }
                })
                .collect(),
            WeightSpec::PowerLaw { p } => grid.nodes().iter().map(|x| x.powi(*p as i32)).collect(),
            WeightSpec::Constant => vec![1.0; n],
            WeightSpec::Sine { k } => (0..n)
                .map(|i| {
                    if i == 0 || i == n - 1 {
                        0.0
                    } else {
                        (*k as f64 * PI * i as f64 / (n - 1) as f64).sin()
                    }
                })
                .collect(),
            WeightSpec::Sum { terms } => {
                let mut acc = vec![0.0; n];
                for t in terms {
                    for (a, v) in acc.iter_mut().zip(t.sample(grid)?) {
                        *a += v;
                    }
                }
                acc
            }
        })
    }

    /// Parses the short forms `bump:5`, `bump-centered:5`, `power:2`,
    /// `constant`, `sine:1` and sums joined by `+`, or an inline JSON object.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.starts_with('{') {
            let w: WeightSpec = serde_json::from_str(text)?;
            w.validate()?;
            return Ok(w);
        }
        let parts: Vec<&str> = text.split('+').map(str::trim).collect();
        if parts.len() > 1 {
            let terms = parts
                .into_iter()
                .map(WeightSpec::parse)
                .collect::<Result<Vec<_>>>()?;
            return Ok(WeightSpec::Sum { terms });
        }
        let bad = || Error::InvalidInput(format!("unrecognised weight {text:?}"));
        let (kind, arg) = match text.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (text, None),
        };
        let w = match (kind, arg) {
            ("constant", None) => WeightSpec::Constant,
            ("bump", Some(a)) => WeightSpec::bump(a.parse().map_err(|_| bad())?),
            ("bump-centered", Some(a)) => WeightSpec::Bump {
                half_width: a.parse().map_err(|_| bad())?,
                centered: true,
            },
            ("power", Some(a)) => WeightSpec::PowerLaw {
                p: a.parse().map_err(|_| bad())?,
            },
            ("sine", Some(a)) => WeightSpec::Sine {
                k: a.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        w.validate()?;
        Ok(w)
    }
}

/// Scalar functional of a field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum FunctionalSpec {
    /// `⟨g, u^k⟩^l` with `g(x) = cos(a πx/2 + b π/2)`.
    #[serde(rename = "inner_product_power")]
    InnerProductPower {
        a: f64,
        b: f64,
        #[serde(rename = "k")]
        state_power: u32,
        #[serde(rename = "l")]
        outer_power: u32,
    },
    /// `u(x)`, linearly interpolated.
    #[serde(rename = "point")]
    PointEvaluation { x: f64 },
    /// `⟨W(u), w⟩`
    #[serde(rename = "lifted")]
    LiftedTerm { term: TermSpec, weight: WeightSpec },
}

impl FunctionalSpec {
    /// `⟨u, sin(kπ(x+1)/2)⟩` on [−1, 1], written in the cosine-kernel family.
    pub fn sine_mode(k: u32) -> Self {
        FunctionalSpec::InnerProductPower {
            a: k as f64,
            b: k as f64 - 1.0,
            state_power: 1,
            outer_power: 1,
        }
    }

    fn validate(&self, grid: &Grid1D) -> Result<()> {
        match self {
            FunctionalSpec::InnerProductPower {
                a,
                b,
                state_power,
                outer_power,
            } => {
                if !(a.is_finite() && b.is_finite()) || *state_power == 0 || *outer_power == 0 {
                    return Err(Error::InvalidInput(
                        "inner-product functional needs finite (a, b) and powers k, l >= 1".into(),
                    ));
                }
            }
            FunctionalSpec::PointEvaluation { x } => {
                if !(*x >= grid.x_min && *x <= grid.x_max) {
                    return Err(Error::Domain(format!(
                        "evaluation point {x} outside [{}, {}]",
                        grid.x_min, grid.x_max
                    )));
                }
            }
            FunctionalSpec::LiftedTerm { term, weight } => {
                term.validate()?;
                weight.validate()?;
                if matches!(term, TermSpec::GraphonKernel { .. }) && !grid.is_unit_interval() {
                    return Err(Error::Domain(format!(
                        "graphon functional needs the domain [0, 1], got [{}, {}]",
                        grid.x_min, grid.x_max
                    )));
                }
            }
        }
        Ok(())
    }
}

enum Prepared {
    Power {
        kernel: Vec<f64>,
        state_power: i32,
        outer_power: i32,
    },
    Point {
        left: usize,
        frac: f64,
    },
    Lifted {
        term: TermSpec,
        weight: usize,
    },
}

/// A basis bound to one grid, with kernels and weights sampled once.
pub struct BasisEvaluator {
    grid: Grid1D,
    prepared: Vec<Prepared>,
    weights: Vec<Vec<f64>>,
}

impl BasisEvaluator {
    pub fn new(basis: &[FunctionalSpec], grid: &Grid1D) -> Result<Self> {
        let mut weight_specs: Vec<&WeightSpec> = Vec::new();
        let mut weights = Vec::new();
        let mut prepared = Vec::with_capacity(basis.len());
        for spec in basis {
            spec.validate(grid)?;
            prepared.push(match spec {
                FunctionalSpec::InnerProductPower {
                    a,
                    b,
                    state_power,
                    outer_power,
                } => Prepared::Power {
                    kernel: grid
                        .nodes()
                        .iter()
                        .map(|&x| (a * PI * x / 2.0 + b * PI / 2.0).cos())
                        .collect(),
                    state_power: *state_power as i32,
                    outer_power: *outer_power as i32,
                },
                FunctionalSpec::PointEvaluation { x } => {
                    let pos = (x - grid.x_min) / grid.spacing();
                    let left = (pos.floor() as usize).min(grid.num_points - 2);
                    Prepared::Point {
                        left,
                        frac: pos - left as f64,
                    }
                }
                FunctionalSpec::LiftedTerm { term, weight } => {
                    let idx = match weight_specs.iter().position(|w| *w == weight) {
                        Some(i) => i,
                        None => {
                            weight_specs.push(weight);
                            weights.push(weight.sample(grid)?);
                            weights.len() - 1
                        }
                    };
                    Prepared::Lifted {
                        term: *term,
                        weight: idx,
                    }
                }
            });
        }
        Ok(BasisEvaluator {
            grid: *grid,
            prepared,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.prepared.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prepared.is_empty()
    }

    /// `(ξ_1(u), …, ξ_n(u))`. Errors carry the failing column.
    pub fn eval(&self, u: &Field) -> std::result::Result<Vec<f64>, (usize, Error)> {
        if *u.grid() != self.grid {
            return Err((
                0,
                Error::Shape(format!(
                    "field grid {:?} differs from basis grid {:?}",
                    u.grid(),
                    self.grid
                )),
            ));
        }
        let jet = Jet::new(u);
        let mut buf = vec![0.0; u.len()];
        let mut out = Vec::with_capacity(self.prepared.len());
        for (col, p) in self.prepared.iter().enumerate() {
            let value = match p {
                Prepared::Power {
                    kernel,
                    state_power,
                    outer_power,
                } => {
                    let powered: Vec<f64> =
                        u.values().iter().map(|v| v.powi(*state_power)).collect();
                    weighted_sum(&self.grid, kernel, &powered).powi(*outer_power)
                }
                Prepared::Point { left, frac } => {
                    let v = jet.field().values();
                    v[*left] * (1.0 - frac) + v[left + 1] * frac
                }
                Prepared::Lifted { term, weight } => {
                    buf.iter_mut().for_each(|b| *b = 0.0);
                    jet.accumulate(term, 1.0, &mut buf).map_err(|e| (col, e))?;
                    // pinned nodes do not move, as in `Dictionary::apply_rhs`
                    if u.is_dirichlet() {
                        let n = buf.len();
                        buf[0] = 0.0;
                        buf[n - 1] = 0.0;
                    }
                    weighted_sum(&self.grid, &buf, &self.weights[*weight])
                }
            };
            if !value.is_finite() {
                return Err((
                    col,
                    Error::InvalidInput("functional value is not finite".into()),
                ));
            }
            out.push(value);
        }
        Ok(out)
    }
}

pub fn eval_functional(spec: &FunctionalSpec, u: &Field) -> Result<f64> {
    let evaluator = BasisEvaluator::new(std::slice::from_ref(spec), u.grid())?;
    evaluator.eval(u).map(|v| v[0]).map_err(|(_, e)| e)
}

/// The 27 functionals `⟨cos(a_j πx/2 + b_j π/2), u^k⟩^l`,
/// `(j, k, l) ∈ {1,2,3}³`, with one random `(a_j, b_j) ∈ [0,1)²` per `j`.
pub fn build_burgers_basis(seed: u64) -> Vec<FunctionalSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kernels: Vec<(f64, f64)> = (0..3).map(|_| (rng.random(), rng.random())).collect();
    let mut basis = Vec::with_capacity(27);
    for &(a, b) in &kernels {
        for state_power in 1..=3 {
            for outer_power in 1..=3 {
                basis.push(FunctionalSpec::InnerProductPower {
                    a,
                    b,
                    state_power,
                    outer_power,
                });
            }
        }
    }
    basis
}

/// `⟨W_i(u), w⟩` for every dictionary term, identity term first.
pub fn build_lifting_basis(dict: &Dictionary, weight: &WeightSpec) -> Result<Vec<FunctionalSpec>> {
    weight.validate()?;
    let (ordered, _) = dict.identity_first()?;
    Ok(ordered
        .terms()
        .iter()
        .map(|&term| FunctionalSpec::LiftedTerm {
            term,
            weight: weight.clone(),
        })
        .collect())
}
