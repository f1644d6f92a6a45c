//! Method-of-lines integration of dictionary-defined models and generation of
//! snapshot-pair datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fields::{Field, Grid1D, DEFAULT_POINTS};
use crate::operators::{graphon_candidates, pde_candidates, Dictionary, TermSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    #[serde(rename = "dirichlet-zero")]
    DirichletZero,
    #[serde(rename = "none")]
    None,
}

/// Default grid for `pde1`. Where `u > 5` its diffusion coefficient
/// `1 − 0.2u` is negative, and on finer grids the resolved backward-diffusion
/// modes overflow before the amplitude decays below 5.
pub const PDE1_POINTS: usize = 128;

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub name: String,
    pub dictionary: Dictionary,
    pub grid: Grid1D,
    pub boundary: Boundary,
}

impl Model {
    pub fn new(
        name: impl Into<String>,
        dictionary: Dictionary,
        grid: Grid1D,
        boundary: Boundary,
    ) -> Result<Self> {
        grid.validate()?;
        if dictionary.coefficients().is_none() {
            return Err(Error::Precondition(
                "model dictionary needs coefficients".into(),
            ));
        }
        Ok(Model {
            name: name.into(),
            dictionary,
            grid,
            boundary,
        })
    }

    /// `u̇ = −u u_x + u_xx` on [−1, 1] with zero Dirichlet data.
    pub fn burgers(num_points: usize) -> Result<Self> {
        let dict = Dictionary::new(
            vec![TermSpec::monomial(1, 1), TermSpec::monomial(0, 2)],
            Some(vec![-1.0, 1.0]),
        )?;
        Model::new(
            "burgers",
            dict,
            Grid1D::new(-1.0, 1.0, num_points)?,
            Boundary::DirichletZero,
        )
    }

    /// `u̇ = u_xx` on [−1, 1] with zero Dirichlet data. The identity term is
    /// carried with coefficient 0.
    pub fn heat(num_points: usize) -> Result<Self> {
        let dict = Dictionary::new(
            vec![TermSpec::identity(), TermSpec::monomial(0, 2)],
            Some(vec![0.0, 1.0]),
        )?;
        Model::new(
            "heat",
            dict,
            Grid1D::new(-1.0, 1.0, num_points)?,
            Boundary::DirichletZero,
        )
    }

    /// `u̇ = −2u − 0.5(1+u) u_x + (1−0.2u) u_xx + 0.1 u_xxx` on [0, 5] with
    /// zero Dirichlet data, expressed over the 12 candidates of
    /// [`pde_candidates`].
    pub fn pde1(num_points: usize) -> Result<Self> {
        let mut c = vec![0.0; 12];
        c[0] = -2.0; // u
        c[3] = -0.5; // u_x
        c[4] = -0.5; // u u_x
        c[6] = 1.0; // u_xx
        c[7] = -0.2; // u u_xx
        c[9] = 0.1; // u_xxx
        let dict = pde_candidates().with_coefficients(c)?;
        Model::new(
            "pde1",
            dict,
            Grid1D::new(0.0, 5.0, num_points)?,
            Boundary::DirichletZero,
        )
    }

    /// `u̇ = −0.5u + 1.5u² − u³ + ∫₀¹ (−1 + 0.7x + 0.3y)(u(y) − u(x)) dy` on
    /// [0, 1], over the 7 candidates of [`graphon_candidates`].
    pub fn graphon(num_points: usize) -> Result<Self> {
        let dict =
            graphon_candidates().with_coefficients(vec![0.0, -0.5, 1.5, -1.0, -1.0, 0.7, 0.3])?;
        Model::new(
            "graphon",
            dict,
            Grid1D::new(0.0, 1.0, num_points)?,
            Boundary::None,
        )
    }

    /// Built-in model by name. `num_points` defaults to [`PDE1_POINTS`] for
    /// `pde1` and [`DEFAULT_POINTS`] otherwise.
    pub fn builtin(name: &str, num_points: Option<usize>) -> Result<Option<Self>> {
        let n = num_points.unwrap_or(if name == "pde1" {
            PDE1_POINTS
        } else {
            DEFAULT_POINTS
        });
        Ok(Some(match name {
            "burgers" => Model::burgers(n)?,
            "heat" => Model::heat(n)?,
            "pde1" => Model::pde1(n)?,
            "graphon" => Model::graphon(n)?,
            _ => return Ok(None),
        }))
    }

    /// Wraps node values as a state of this model, tagging Dirichlet states.
    pub fn state(&self, values: Vec<f64>) -> Result<Field> {
        let f = Field::new(self.grid, values)?;
        match self.boundary {
            Boundary::DirichletZero => f.into_dirichlet(),
            Boundary::None => Ok(f),
        }
    }

    fn check_state(&self, u: &Field) -> Result<Field> {
        if *u.grid() != self.grid {
            return Err(Error::Shape(format!(
                "state grid {:?} differs from model grid {:?}",
                u.grid(),
                self.grid
            )));
        }
        match self.boundary {
            Boundary::DirichletZero if !u.is_dirichlet() => u.clone().into_dirichlet(),
            _ => Ok(u.clone()),
        }
    }

    fn largest_coefficient(&self, order: u32) -> f64 {
        let c = self.dictionary.coefficients().unwrap_or(&[]);
        self.dictionary
            .terms()
            .iter()
            .zip(c)
            .filter(
                |(t, _)| matches!(t, TermSpec::MonomialDerivative { order: k, .. } if *k == order),
            )
            .map(|(_, c)| c.abs())
            .fold(0.0, f64::max)
    }

    /// Fixed RK4 substep from the diffusive and dispersive stability limits.
    pub fn substep(&self, settings: &IntegratorSettings) -> f64 {
        let h = self.grid.spacing();
        let mut dt = settings.dt_max;
        let d2 = self.largest_coefficient(2);
        if d2 > 0.0 {
            dt = dt.min(settings.safety * h * h / d2);
        }
        let d3 = self.largest_coefficient(3);
        if d3 > 0.0 {
            dt = dt.min(settings.safety * h * h * h / d3);
        }
        dt
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorSettings {
    pub safety: f64,
    pub dt_max: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings {
            safety: 0.25,
            dt_max: 1e-3,
        }
    }
}

/// `φ^horizon(u0)` with default integrator settings.
pub fn integrate(model: &Model, u0: &Field, horizon: f64) -> Result<Field> {
    integrate_with(model, u0, horizon, &IntegratorSettings::default())
}

/// Classical RK4 with a fixed substep; the last substep is shortened to land
/// exactly on `horizon`.
pub fn integrate_with(
    model: &Model,
    u0: &Field,
    horizon: f64,
    settings: &IntegratorSettings,
) -> Result<Field> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidInput(format!(
            "horizon must be > 0, got {horizon}"
        )));
    }
    let u0 = model.check_state(u0)?;
    let dt = model.substep(settings);
    let grid = model.grid;
    let dirichlet = u0.is_dirichlet();
    let n = grid.num_points;

    let steps = ((horizon / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let mut u = u0.into_values();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut stage = vec![0.0; n];
    let dict = &model.dictionary;

    let rhs = |values: &[f64], out: &mut Vec<f64>| -> Result<()> {
        let state = Field::from_parts(grid, values.to_vec(), dirichlet);
        dict.apply_rhs_into(&state, out)
    };

    let mut t = 0.0;
    for step in 0..steps {
        let tau = if step + 1 == steps {
            horizon - dt * (steps - 1) as f64
        } else {
            dt
        };
        rhs(&u, &mut k1)?;
        for i in 0..n {
            stage[i] = u[i] + 0.5 * tau * k1[i];
        }
        rhs(&stage, &mut k2)?;
        for i in 0..n {
            stage[i] = u[i] + 0.5 * tau * k2[i];
        }
        rhs(&stage, &mut k3)?;
        for i in 0..n {
            stage[i] = u[i] + tau * k3[i];
        }
        rhs(&stage, &mut k4)?;
        for i in 0..n {
            u[i] += tau / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if dirichlet {
            u[0] = 0.0;
            u[n - 1] = 0.0;
        }
        t += tau;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp {
                time: t,
                trajectory: None,
            });
        }
    }
    Ok(Field::from_parts(grid, u, dirichlet))
}

/// Randomised initial conditions with parameters `a, b ∈ [0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialConditionFamily {
    /// `(x² − 1) cos(aπx + bπ)`
    Burgers,
    /// `x(x − 5) cos(aπx/5 + bπ)`
    Pde1,
    /// `0.1 a cos(bπx + bπ)`
    Graphon,
}

impl InitialConditionFamily {
    pub fn eval(&self, x: f64, a: f64, b: f64) -> f64 {
        match self {
            InitialConditionFamily::Burgers => (x * x - 1.0) * (a * PI * x + b * PI).cos(),
            InitialConditionFamily::Pde1 => x * (x - 5.0) * (a * PI * x / 5.0 + b * PI).cos(),
            InitialConditionFamily::Graphon => 0.1 * a * (b * PI * x + b * PI).cos(),
        }
    }

    pub fn sample(&self, model: &Model, a: f64, b: f64) -> Result<Field> {
        let values = model
            .grid
            .nodes()
            .iter()
            .map(|&x| self.eval(x, a, b))
            .collect();
        model.state(values)
    }

    pub fn for_model(name: &str) -> Option<Self> {
        match name {
            "burgers" | "heat" => Some(InitialConditionFamily::Burgers),
            "pde1" => Some(InitialConditionFamily::Pde1),
            "graphon" => Some(InitialConditionFamily::Graphon),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model: String,
    pub boundary: Boundary,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub family: Option<InitialConditionFamily>,
    /// Pairs per trajectory, in dataset order.
    #[serde(default)]
    pub pairs_per_trajectory: Vec<usize>,
    /// `(a, b)` drawn for each trajectory.
    #[serde(default)]
    pub parameters: Vec<[f64; 2]>,
    #[serde(default)]
    pub layout: String,
}

pub const LAYOUT: &str = "trajectory-major, consecutive pairs from t = 0";

#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotDataset {
    pub grid: Grid1D,
    pub sampling_time: f64,
    pub pairs: Vec<(Field, Field)>,
    pub provenance: Provenance,
}

impl SnapshotDataset {
    pub fn new(
        grid: Grid1D,
        sampling_time: f64,
        pairs: Vec<(Field, Field)>,
        provenance: Provenance,
    ) -> Result<Self> {
        if !(sampling_time > 0.0) || !sampling_time.is_finite() {
            return Err(Error::InvalidInput(format!(
                "sampling time must be > 0, got {sampling_time}"
            )));
        }
        if pairs.is_empty() {
            return Err(Error::InvalidInput(
                "dataset needs at least one pair".into(),
            ));
        }
        for (k, (u, v)) in pairs.iter().enumerate() {
            if *u.grid() != grid || *v.grid() != grid {
                return Err(Error::Shape(format!("pair {k} is not on the dataset grid")));
            }
        }
        Ok(SnapshotDataset {
            grid,
            sampling_time,
            pairs,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Splits `num_pairs` over `num_trajectories` round-robin.
pub fn pair_quotas(num_pairs: usize, num_trajectories: usize) -> Vec<usize> {
    (0..num_trajectories)
        .map(|t| num_pairs / num_trajectories + usize::from(t < num_pairs % num_trajectories))
        .collect()
}

/// Draws `(a, b)` for every trajectory up front from one seeded stream, then
/// integrates trajectories independently and records consecutive pairs
/// `(u(i t_s), u((i+1) t_s))` from `t = 0`.
pub fn generate_pairs(
    model: &Model,
    family: InitialConditionFamily,
    num_trajectories: usize,
    num_pairs: usize,
    t_s: f64,
    seed: u64,
) -> Result<SnapshotDataset> {
    generate_pairs_with(
        model,
        family,
        num_trajectories,
        num_pairs,
        t_s,
        seed,
        &IntegratorSettings::default(),
    )
}

pub fn generate_pairs_with(
    model: &Model,
    family: InitialConditionFamily,
    num_trajectories: usize,
    num_pairs: usize,
    t_s: f64,
    seed: u64,
    settings: &IntegratorSettings,
) -> Result<SnapshotDataset> {
    if num_trajectories == 0 || num_pairs < num_trajectories {
        return Err(Error::InvalidInput(format!(
            "need 1 <= trajectories <= pairs, got {num_trajectories} trajectories for {num_pairs} pairs"
        )));
    }
    if !(t_s > 0.0) || !t_s.is_finite() {
        return Err(Error::InvalidInput(format!(
            "sampling time must be > 0, got {t_s}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parameters: Vec<[f64; 2]> = (0..num_trajectories)
        .map(|_| {
            let a: f64 = rng.random();
            let b: f64 = rng.random();
            [a, b]
        })
        .collect();
    let quotas = pair_quotas(num_pairs, num_trajectories);

    let runs: Vec<Result<Vec<(Field, Field)>>> = parameters
        .par_iter()
        .zip(quotas.par_iter())
        .enumerate()
        .map(|(traj, (&[a, b], &quota))| {
            let mut current = family.sample(model, a, b)?;
            let mut pairs = Vec::with_capacity(quota);
            for _ in 0..quota {
                let next = integrate_with(model, &current, t_s, settings).map_err(|e| match e {
                    Error::BlowUp { time, .. } => Error::BlowUp {
                        time,
                        trajectory: Some(traj),
                    },
                    other => other,
                })?;
                pairs.push((current, next.clone()));
                current = next;
            }
            Ok(pairs)
        })
        .collect();

    let mut pairs = Vec::with_capacity(num_pairs);
    for run in runs {
        pairs.extend(run?);
    }
    let provenance = Provenance {
        model: model.name.clone(),
        boundary: model.boundary,
        seed: Some(seed),
        family: Some(family),
        pairs_per_trajectory: quotas,
        parameters,
        layout: LAYOUT.to_string(),
    };
    SnapshotDataset::new(model.grid, t_s, pairs, provenance)
}
