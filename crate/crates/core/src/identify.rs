//! Coefficient identification: lifting through the matrix logarithm, the
//! forward-difference baseline, and the sampling-time convergence study.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{weighted_sum, Field};
use crate::koopman::{build_data_matrices, edmd_fit};
use crate::numkernel::{dependent_columns, logm, pinv_ranked, Matrix};
use crate::observables::{build_lifting_basis, WeightSpec};
use crate::operators::{Dictionary, TermSpec};
use crate::simulate::{
    generate_pairs_with, InitialConditionFamily, IntegratorSettings, Model, SnapshotDataset,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lifting,
    Direct,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    pub rank_used: usize,
    /// Condition number of the eigenvector matrix behind `log(U)`.
    pub logm_condition: Option<f64>,
    pub ill_conditioned: bool,
    /// Relative least-squares misfit of the regression behind the estimates.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentificationResult {
    pub method: Method,
    /// Candidate terms, identity first.
    pub dictionary: Dictionary,
    /// For each position in `dictionary`, the index in the caller's dictionary.
    pub original_index: Vec<usize>,
    pub estimates: Vec<f64>,
    /// `log(Ξ₁† Ξ₂) / t_s`, lifting only.
    pub l_tilde: Option<Matrix>,
    pub t_s: f64,
    pub diagnostics: Diagnostics,
}

impl IdentificationResult {
    pub fn estimate_of(&self, term: &TermSpec) -> Option<f64> {
        self.dictionary.position(term).map(|i| self.estimates[i])
    }

    /// The identified model `Σ ĉ_i W_i`.
    pub fn estimated_dictionary(&self) -> Result<Dictionary> {
        self.dictionary.with_coefficients(self.estimates.clone())
    }

    /// `|ĉ_i − c_i|` against a reference model, terms absent from it count
    /// as zero.
    pub fn abs_errors(&self, truth: &Dictionary) -> Vec<f64> {
        self.dictionary
            .terms()
            .iter()
            .zip(&self.estimates)
            .map(|(t, c)| (c - truth.coefficient_of(t)).abs())
            .collect()
    }

    pub fn max_abs_error(&self, truth: &Dictionary) -> f64 {
        self.abs_errors(truth).into_iter().fold(0.0, f64::max)
    }
}

struct Lifted {
    dictionary: Dictionary,
    order: Vec<usize>,
    xi1: Matrix,
    xi2: Matrix,
}

fn lift(dataset: &SnapshotDataset, dict: &Dictionary, weight: &WeightSpec) -> Result<Lifted> {
    let (ordered, order) = dict.identity_first()?;
    let basis = build_lifting_basis(dict, weight)?;
    let (xi1, xi2) = build_data_matrices(dataset, &basis)?;
    let (m, n) = xi1.shape();
    if m < n {
        return Err(Error::InsufficientData { m, n });
    }
    let rank = pinv_ranked(&xi1, None)?.rank;
    if rank < n {
        return Err(Error::RankDeficient {
            rank,
            n,
            dependent: dependent_columns(&xi1, None)?,
        });
    }
    Ok(Lifted {
        dictionary: Dictionary::candidates(ordered.terms().to_vec())?,
        order,
        xi1,
        xi2,
    })
}

/// `ĉ_i = L̃_{i1}` with `L̃ = log(Ξ₁† Ξ₂) / t_s` over the lifted basis
/// `ξ_i(u) = ⟨W_i(u), w⟩`.
pub fn lifting_identify(
    dataset: &SnapshotDataset,
    dict: &Dictionary,
    weight: &WeightSpec,
) -> Result<IdentificationResult> {
    let lifted = lift(dataset, dict, weight)?;
    let t_s = dataset.sampling_time;
    let fit = edmd_fit(&lifted.xi1, &lifted.xi2, t_s)?;
    let log = logm(&fit.matrix)?;
    let l_tilde = &log.matrix / t_s;
    let estimates = l_tilde.column(0).iter().cloned().collect();
    Ok(IdentificationResult {
        method: Method::Lifting,
        dictionary: lifted.dictionary,
        original_index: lifted.order,
        estimates,
        l_tilde: Some(l_tilde),
        t_s,
        diagnostics: Diagnostics {
            rank_used: fit.rank_used,
            logm_condition: Some(log.condition_estimate),
            ill_conditioned: log.ill_conditioned(),
            residual: fit.residual,
        },
    })
}

/// Least-squares regression of the forward difference
/// `(ξ₁(u_next) − ξ₁(u)) / t_s` on the lifted functionals.
pub fn direct_identify(
    dataset: &SnapshotDataset,
    dict: &Dictionary,
    weight: &WeightSpec,
) -> Result<IdentificationResult> {
    let lifted = lift(dataset, dict, weight)?;
    let t_s = dataset.sampling_time;
    let rate = (lifted.xi2.column(0) - lifted.xi1.column(0)) / t_s;
    let pinv = pinv_ranked(&lifted.xi1, None)?;
    let coef = &pinv.matrix * &rate;
    let denom = rate.norm();
    let misfit = (&lifted.xi1 * &coef - &rate).norm();
    Ok(IdentificationResult {
        method: Method::Direct,
        dictionary: lifted.dictionary,
        original_index: lifted.order,
        estimates: coef.iter().cloned().collect(),
        l_tilde: None,
        t_s,
        diagnostics: Diagnostics {
            rank_used: pinv.rank,
            logm_condition: None,
            ill_conditioned: false,
            residual: if denom > 0.0 { misfit / denom } else { misfit },
        },
    })
}

/// `Ŵ(u) = Σ ĉ_i W_i(u)`.
pub fn reconstruct_operator(result: &IdentificationResult, u: &Field) -> Result<Field> {
    result.estimated_dictionary()?.apply_rhs(u)
}

/// `Σ_k |⟨Ŵ(u_k) − W(u_k), w⟩|²` against a reference model.
pub fn weak_residual(
    result: &IdentificationResult,
    reference: &Dictionary,
    states: &[Field],
    weight: &WeightSpec,
) -> Result<f64> {
    let estimated = result.estimated_dictionary()?;
    let mut total = 0.0;
    for u in states {
        let w = weight.sample(u.grid())?;
        let a = estimated.apply_rhs(u)?;
        let b = reference.apply_rhs(u)?;
        let diff: Vec<f64> = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| x - y)
            .collect();
        total += weighted_sum(u.grid(), &diff, &w).powi(2);
    }
    Ok(total)
}

#[derive(Clone, Debug)]
pub struct GenerationParams {
    pub family: InitialConditionFamily,
    pub num_trajectories: usize,
    pub num_pairs: usize,
    pub seed: u64,
    pub settings: IntegratorSettings,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceEntry {
    pub t_s: f64,
    pub estimates: Vec<f64>,
    pub errors: Vec<f64>,
    pub max_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    /// Candidate terms, identity first; columns of `errors`.
    pub terms: Vec<TermSpec>,
    pub truth: Vec<f64>,
    pub entries: Vec<ConvergenceEntry>,
    /// Max error at the smallest sampling time is below the one at the
    /// largest.
    pub converging: bool,
}

/// Reruns [`lifting_identify`] on fresh data for each sampling time, with the
/// same seed throughout.
pub fn ts_convergence_study(
    model: &Model,
    dict: &Dictionary,
    weight: &WeightSpec,
    ts_list: &[f64],
    params: &GenerationParams,
) -> Result<ConvergenceReport> {
    if ts_list.len() < 3 {
        return Err(Error::Precondition(format!(
            "convergence study needs at least 3 sampling times, got {}",
            ts_list.len()
        )));
    }
    if ts_list.windows(2).any(|w| !(w[1] < w[0])) || ts_list.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Precondition(
            "sampling times must be positive and strictly decreasing".into(),
        ));
    }
    let (ordered, _) = dict.identity_first()?;
    let terms = ordered.terms().to_vec();
    let truth: Vec<f64> = terms
        .iter()
        .map(|t| model.dictionary.coefficient_of(t))
        .collect();

    let runs: Vec<Result<ConvergenceEntry>> = ts_list
        .par_iter()
        .map(|&t_s| {
            let data = generate_pairs_with(
                model,
                params.family,
                params.num_trajectories,
                params.num_pairs,
                t_s,
                params.seed,
                &params.settings,
            )?;
            let result = lifting_identify(&data, dict, weight)?;
            let errors: Vec<f64> = result
                .estimates
                .iter()
                .zip(&truth)
                .map(|(c, t)| (c - t).abs())
                .collect();
            let max_error = errors.iter().cloned().fold(0.0, f64::max);
            Ok(ConvergenceEntry {
                t_s,
                estimates: result.estimates,
                errors,
                max_error,
            })
        })
        .collect();

    let mut report = ConvergenceReport {
        terms,
        truth,
        entries: Vec::with_capacity(ts_list.len()),
        converging: false,
    };
    for (run, &t_s) in runs.into_iter().zip(ts_list) {
        match run {
            Ok(entry) => report.entries.push(entry),
            Err(source) => {
                return Err(Error::Study {
                    t_s,
                    partial: Box::new(report),
                    source: Box::new(source),
                })
            }
        }
    }
    let first = report
        .entries
        .first()
        .map(|e| e.max_error)
        .unwrap_or(f64::NAN);
    let last = report
        .entries
        .last()
        .map(|e| e.max_error)
        .unwrap_or(f64::NAN);
    report.converging = last < first;
    Ok(report)
}
