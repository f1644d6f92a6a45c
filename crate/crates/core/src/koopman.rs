//! Extended dynamic mode decomposition over functionals of the state.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::Field;
use crate::numkernel::{eig, ensure_finite, pinv_ranked, Matrix};
use crate::observables::{BasisEvaluator, FunctionalSpec};
use crate::simulate::SnapshotDataset;

/// `Ξ₁[k][i] = ξ_i(u_k)` and `Ξ₂[k][i] = ξ_i(φ^{t_s}(u_k))`.
pub fn build_data_matrices(
    dataset: &SnapshotDataset,
    basis: &[FunctionalSpec],
) -> Result<(Matrix, Matrix)> {
    if basis.is_empty() {
        return Err(Error::InvalidInput("basis is empty".into()));
    }
    if dataset.is_empty() {
        return Err(Error::InvalidInput("dataset is empty".into()));
    }
    let evaluator = BasisEvaluator::new(basis, &dataset.grid)?;
    let rows: Vec<Result<(Vec<f64>, Vec<f64>)>> = dataset
        .pairs
        .par_iter()
        .enumerate()
        .map(|(row, (u, next))| {
            let wrap = |(col, source): (usize, Error)| Error::Functional {
                row,
                col,
                source: Box::new(source),
            };
            Ok((
                evaluator.eval(u).map_err(wrap)?,
                evaluator.eval(next).map_err(wrap)?,
            ))
        })
        .collect();
    let (m, n) = (dataset.len(), basis.len());
    let mut xi1 = Matrix::zeros(m, n);
    let mut xi2 = Matrix::zeros(m, n);
    for (k, row) in rows.into_iter().enumerate() {
        let (a, b) = row?;
        for i in 0..n {
            xi1[(k, i)] = a[i];
            xi2[(k, i)] = b[i];
        }
    }
    Ok((xi1, xi2))
}

#[derive(Clone, Debug)]
pub struct KoopmanFit {
    /// Functionals behind the columns; empty when fitted from raw matrices.
    pub basis: Vec<FunctionalSpec>,
    pub xi1: Matrix,
    pub xi2: Matrix,
    /// `Ξ₁† Ξ₂`
    pub matrix: Matrix,
    pub t_s: f64,
    pub rank_used: usize,
    /// `‖Ξ₁ U − Ξ₂‖_F / ‖Ξ₂‖_F`
    pub residual: f64,
}

impl KoopmanFit {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn rank_deficient(&self) -> bool {
        self.rank_used < self.dim()
    }
}

/// Least-squares Koopman matrix `U = Ξ₁† Ξ₂`.
pub fn edmd_fit(xi1: &Matrix, xi2: &Matrix, t_s: f64) -> Result<KoopmanFit> {
    if xi1.shape() != xi2.shape() {
        return Err(Error::Shape(format!(
            "data matrices differ in shape: {:?} vs {:?}",
            xi1.shape(),
            xi2.shape()
        )));
    }
    if !(t_s > 0.0) || !t_s.is_finite() {
        return Err(Error::InvalidInput(format!(
            "sampling time must be > 0, got {t_s}"
        )));
    }
    ensure_finite(xi1, "Ξ₁")?;
    ensure_finite(xi2, "Ξ₂")?;
    let (m, n) = xi1.shape();
    if m < n {
        return Err(Error::InsufficientData { m, n });
    }
    let pinv = pinv_ranked(xi1, None)?;
    let matrix = &pinv.matrix * xi2;
    let denom = xi2.norm();
    let misfit = (xi1 * &matrix - xi2).norm();
    let residual = if denom > 0.0 { misfit / denom } else { misfit };
    Ok(KoopmanFit {
        basis: Vec::new(),
        xi1: xi1.clone(),
        xi2: xi2.clone(),
        matrix,
        t_s,
        rank_used: pinv.rank,
        residual,
    })
}

/// Data matrices plus fit in one step, keeping the basis on the result.
pub fn fit_dataset(dataset: &SnapshotDataset, basis: &[FunctionalSpec]) -> Result<KoopmanFit> {
    let (xi1, xi2) = build_data_matrices(dataset, basis)?;
    let mut fit = edmd_fit(&xi1, &xi2, dataset.sampling_time)?;
    fit.basis = basis.to_vec();
    Ok(fit)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenRecord {
    pub lambda_u: Complex64,
    /// `log(λ_U)/t_s` on the principal branch; `None` when `λ_U` is on the
    /// closed negative real axis.
    pub lambda_l: Option<Complex64>,
    pub eigvec: Vec<Complex64>,
    /// `‖Ξ₂ v − λ_U Ξ₁ v‖ / ‖λ_U Ξ₁ v‖`, the relative one-step prediction error
    pub residual_score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumResult {
    pub records: Vec<EigenRecord>,
}

impl SpectrumResult {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn lambda_l(&self) -> Vec<Complex64> {
        self.records.iter().filter_map(|r| r.lambda_l).collect()
    }
}

pub fn generator_eigenvalue(lambda_u: Complex64, t_s: f64) -> Option<Complex64> {
    if lambda_u.im == 0.0 && lambda_u.re <= 0.0 {
        None
    } else {
        Some(lambda_u.ln() / t_s)
    }
}

/// Eigenvalues of the Koopman matrix and of the generator, ranked by how well
/// each eigenfunctional propagates on the data.
///
/// Sorted by `residual_score`, then by `|Re λ_L|` (undefined `λ_L` last).
pub fn spectrum(fit: &KoopmanFit) -> Result<SpectrumResult> {
    let dec = eig(&fit.matrix)?;
    let n = fit.dim();
    let to_c = |m: &Matrix| m.map(|v| Complex64::new(v, 0.0));
    let xi1 = to_c(&fit.xi1);
    let xi2 = to_c(&fit.xi2);

    let mut records: Vec<EigenRecord> = (0..n)
        .map(|i| {
            let v = dec.vectors.column(i);
            let lambda_u = dec.eigenvalues[i];
            let now = &xi1 * v;
            let next = &xi2 * v;
            let denom = lambda_u.norm() * now.norm();
            let misfit = (next - now * lambda_u).norm();
            let residual_score = if denom > 0.0 {
                misfit / denom
            } else {
                f64::INFINITY
            };
            EigenRecord {
                lambda_u,
                lambda_l: generator_eigenvalue(lambda_u, fit.t_s),
                eigvec: v.iter().cloned().collect(),
                residual_score,
            }
        })
        .collect();
    let key = |r: &EigenRecord| r.lambda_l.map(|l| l.re.abs()).unwrap_or(f64::INFINITY);
    records.sort_by(|a, b| {
        a.residual_score
            .total_cmp(&b.residual_score)
            .then(key(a).total_cmp(&key(b)))
            .then(a.lambda_u.im.total_cmp(&b.lambda_u.im))
    });
    Ok(SpectrumResult { records })
}

/// `Σ_i v_i ξ_i(u)` over the fit's basis.
pub fn eval_eigenfunctional(
    fit: &KoopmanFit,
    eigvec: &[Complex64],
    u: &Field,
) -> Result<Complex64> {
    if eigvec.len() != fit.basis.len() {
        return Err(Error::Shape(format!(
            "{} coefficients for a basis of {}",
            eigvec.len(),
            fit.basis.len()
        )));
    }
    let evaluator = BasisEvaluator::new(&fit.basis, u.grid())?;
    let values = evaluator.eval(u).map_err(|(_, e)| e)?;
    Ok(eigvec.iter().zip(values).map(|(v, x)| v * x).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid1D;
    use crate::simulate::{Boundary, Provenance};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset(pairs: Vec<(Field, Field)>, t_s: f64) -> SnapshotDataset {
        let grid = *pairs[0].0.grid();
        let provenance = Provenance {
            model: "test".into(),
            boundary: Boundary::None,
            seed: None,
            family: None,
            pairs_per_trajectory: vec![],
            parameters: vec![],
            layout: String::new(),
        };
        SnapshotDataset::new(grid, t_s, pairs, provenance).unwrap()
    }

    #[test]
    fn equilibrium_pairs_give_equal_matrices() {
        let g = Grid1D::new(-1.0, 1.0, 32).unwrap();
        let pairs = (0..5)
            .map(|k| {
                let u = Field::from_fn(g, |x| (k as f64 * x).cos()).unwrap();
                (u.clone(), u)
            })
            .collect();
        let (a, b) = build_data_matrices(
            &dataset(pairs, 0.1),
            &crate::observables::build_burgers_basis(3),
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shape(), (5, 27));
    }

    #[test]
    fn single_pair_analytic_integrals() {
        let g = Grid1D::new(0.0, 1.0, 101).unwrap();
        let u = Field::from_fn(g, |x| x).unwrap();
        let v = Field::from_fn(g, |x| 2.0 * x).unwrap();
        let basis = vec![FunctionalSpec::LiftedTerm {
            term: crate::operators::TermSpec::identity(),
            weight: crate::observables::WeightSpec::Constant,
        }];
        let (a, b) = build_data_matrices(&dataset(vec![(u, v)], 0.1), &basis).unwrap();
        assert!((a[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((b[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn functional_errors_carry_position() {
        let g = Grid1D::new(0.0, 2.0, 16).unwrap();
        let u = Field::zeros(g);
        let basis = vec![
            FunctionalSpec::PointEvaluation { x: 1.0 },
            FunctionalSpec::PointEvaluation { x: 3.0 },
        ];
        assert!(matches!(
            build_data_matrices(&dataset(vec![(u.clone(), u)], 0.1), &basis),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn identity_dynamics_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xi = Matrix::from_fn(9, 4, |_, _| rng.random_range(-1.0..1.0));
        let fit = edmd_fit(&xi, &xi, 0.5).unwrap();
        assert!((&fit.matrix - Matrix::identity(4, 4)).norm() < 1e-12);
        assert_eq!(fit.rank_used, 4);
        assert!(fit.residual < 1e-14);
    }

    #[test]
    fn linear_map_recovers_transpose() {
        let m = Matrix::from_row_slice(2, 2, &[0.9, -0.2, 0.3, 0.7]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let states: Vec<nalgebra::DVector<f64>> = (0..5)
            .map(|_| nalgebra::DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let xi1 = Matrix::from_fn(5, 2, |k, i| states[k][i]);
        let xi2 = Matrix::from_fn(5, 2, |k, i| (&m * &states[k])[i]);
        let fit = edmd_fit(&xi1, &xi2, 1.0).unwrap();
        assert!((&fit.matrix - m.transpose()).amax() < 1e-9);
    }

    #[test]
    fn decoupled_observables() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xi1 = Matrix::from_fn(8, 3, |_, _| rng.random_range(-1.0..1.0));
        let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, 0.8, 1.1]));
        let fit = edmd_fit(&xi1, &(&xi1 * &d), 1.0).unwrap();
        assert!((&fit.matrix - d).amax() < 1e-12);
    }

    #[test]
    fn insufficient_and_rank_deficient() {
        let xi = Matrix::zeros(2, 3);
        assert!(matches!(
            edmd_fit(&xi, &xi, 0.1),
            Err(Error::InsufficientData { m: 2, n: 3 })
        ));
        let mut xi = Matrix::from_fn(5, 2, |k, _| k as f64 + 1.0);
        xi[(0, 1)] = 1.0; // columns equal
        let fit = edmd_fit(&xi, &xi, 0.1).unwrap();
        assert_eq!(fit.rank_used, 1);
        assert!(fit.rank_deficient());
    }

    #[test]
    fn diagonal_spectrum() {
        let t_s: f64 = 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xi1 = Matrix::from_fn(6, 2, |_, _| rng.random_range(-1.0..1.0));
        let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            (-t_s).exp(),
            (-2.0 * t_s).exp(),
        ]));
        let fit = edmd_fit(&xi1, &(&xi1 * &d), t_s).unwrap();
        let spec = spectrum(&fit).unwrap();
        let mut l: Vec<f64> = spec.lambda_l().iter().map(|z| z.re).collect();
        l.sort_by(|a, b| a.total_cmp(b));
        assert!((l[0] + 2.0).abs() < 1e-10 && (l[1] + 1.0).abs() < 1e-10);
        assert!(spec.records.iter().all(|r| r.residual_score < 1e-10));
    }

    #[test]
    fn negative_real_eigenvalue_has_no_generator_value() {
        assert!(generator_eigenvalue(Complex64::new(-0.5, 0.0), 1.0).is_none());
        assert!(generator_eigenvalue(Complex64::new(0.0, 0.0), 1.0).is_none());
        let z = generator_eigenvalue(Complex64::new(-0.5, 0.1), 1.0).unwrap();
        assert!(z.im > 2.9 && z.im < std::f64::consts::PI);
    }

    #[test]
    fn eigenfunctional_unit_vector_and_shape() {
        let g = Grid1D::new(0.0, 1.0, 32).unwrap();
        let u = Field::from_fn(g, |x| x * x).unwrap();
        let basis = vec![
            FunctionalSpec::PointEvaluation { x: 0.5 },
            FunctionalSpec::PointEvaluation { x: 1.0 },
        ];
        let ds = dataset(vec![(u.clone(), u.clone()), (u.clone(), u.clone())], 0.1);
        let fit = fit_dataset(&ds, &basis).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let v = eval_eigenfunctional(&fit, &[one, zero], &u).unwrap();
        assert!((v.re - 0.25).abs() < 2e-3);
        assert!(eval_eigenfunctional(&fit, &[one], &u).is_err());
    }
}
