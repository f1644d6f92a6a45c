//! Dense linear-algebra kernels: pseudoinverse, least squares, nonsymmetric
//! eigendecomposition, principal matrix logarithm and matrix exponential.
//!
//! Real matrices are `nalgebra::DMatrix<f64>`; complex arithmetic only
//! appears in eigendecompositions and in the intermediate steps of [`logm`].

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type CMatrix = DMatrix<Complex64>;

/// Eigenvector matrices with a larger 2-norm condition number than this get a
/// conditioning warning from [`logm`].
pub const CONDITION_LIMIT: f64 = 1e8;

pub fn ensure_finite(a: &Matrix, what: &str) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::InvalidInput(format!("{what} is empty")));
    }
    if let Some(pos) = a.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{what} has a non-finite entry at column-major offset {pos}"
        )));
    }
    Ok(())
}

fn ensure_square(a: &Matrix, what: &str) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::Shape(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(a.nrows())
}

/// Thin singular value decomposition `A = U diag(σ) Vᵀ`.
#[derive(Clone, Debug)]
pub struct Svd {
    /// `rows × k` with `k = min(rows, cols)`; columns for zero σ are zero.
    pub u: Matrix,
    /// Decreasing.
    pub singular_values: Vec<f64>,
    /// `cols × k`, orthonormal columns.
    pub v: Matrix,
}

/// One-sided Jacobi SVD. Slower than bidiagonalization but accurate to
/// working precision for the small dense matrices used here, including
/// exactly rank-deficient ones.
pub fn svd(a: &Matrix) -> Svd {
    let (m, n) = a.shape();
    if m < n {
        let t = svd(&a.transpose());
        return Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        };
    }
    let mut w = a.clone();
    let mut v = Matrix::identity(n, n);
    for _ in 0..80 {
        let mut rotated = false;
        for i in 0..n.saturating_sub(1) {
            for j in i + 1..n {
                let (alpha, beta, gamma) = {
                    let (ci, cj) = (w.column(i), w.column(j));
                    (ci.norm_squared(), cj.norm_squared(), ci.dot(&cj))
                };
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = c * t;
                rotate(&mut w, i, j, c, s);
                rotate(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|k| w.column(k).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let mut u = Matrix::zeros(m, n);
    let mut vs = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        if norms[src] > 0.0 {
            u.set_column(dst, &(w.column(src) / norms[src]));
        }
        vs.set_column(dst, &v.column(src));
    }
    Svd {
        u,
        singular_values: order.iter().map(|&k| norms[k]).collect(),
        v: vs,
    }
}

fn rotate(a: &mut Matrix, i: usize, j: usize, c: f64, s: f64) {
    for r in 0..a.nrows() {
        let (x, y) = (a[(r, i)], a[(r, j)]);
        a[(r, i)] = c * x - s * y;
        a[(r, j)] = s * x + c * y;
    }
}

/// Pseudoinverse together with the number of singular values kept.
#[derive(Clone, Debug)]
pub struct PseudoInverse {
    pub matrix: Matrix,
    pub rank: usize,
    pub singular_values: Vec<f64>,
}

/// Moore-Penrose pseudoinverse with the retained rank.
///
/// Singular values below `rcond * σ_max` are treated as zero. When `rcond` is
/// `None` the threshold is `max(rows, cols) * ε`.
pub fn pinv_ranked(a: &Matrix, rcond: Option<f64>) -> Result<PseudoInverse> {
    ensure_finite(a, "pinv input")?;
    let (rows, cols) = a.shape();
    let rcond = rcond.unwrap_or(rows.max(cols) as f64 * f64::EPSILON);
    if !(rcond >= 0.0) || !rcond.is_finite() {
        return Err(Error::InvalidInput(format!(
            "rcond must be >= 0, got {rcond}"
        )));
    }
    let svd = svd(a);
    let sigma = &svd.singular_values;
    let cutoff = rcond * sigma[0];

    let mut out = Matrix::zeros(cols, rows);
    let mut rank = 0;
    for (s, &sv) in sigma.iter().enumerate() {
        if sv <= cutoff || sv == 0.0 {
            break;
        }
        rank += 1;
        // out += v_s * u_s^T / sv
        let us = svd.u.column(s) / sv;
        out.ger(1.0, &svd.v.column(s), &us, 1.0);
    }
    Ok(PseudoInverse {
        matrix: out,
        rank,
        singular_values: svd.singular_values,
    })
}

pub fn pinv(a: &Matrix, rcond: Option<f64>) -> Result<Matrix> {
    pinv_ranked(a, rcond).map(|p| p.matrix)
}

/// Minimum-norm least-squares solution of `x1 * U ≈ x2`.
pub fn lstsq_fit(x1: &Matrix, x2: &Matrix) -> Result<Matrix> {
    if x1.nrows() != x2.nrows() {
        return Err(Error::Shape(format!(
            "row counts differ: {} vs {}",
            x1.nrows(),
            x2.nrows()
        )));
    }
    ensure_finite(x2, "least-squares right-hand side")?;
    Ok(pinv(x1, None)? * x2)
}

/// Indices of columns that do not raise the numerical rank when the columns
/// are added left to right.
pub fn dependent_columns(a: &Matrix, rcond: Option<f64>) -> Result<Vec<usize>> {
    let mut kept: Vec<usize> = Vec::new();
    let mut dependent = Vec::new();
    let rcond = rcond.unwrap_or(a.nrows().max(a.ncols()) as f64 * f64::EPSILON);
    // Scale the threshold against the full matrix so that adding a tiny
    // column never counts as new rank.
    let sigma_max = svd(a).singular_values[0];
    for j in 0..a.ncols() {
        let mut cols = kept.clone();
        cols.push(j);
        let sub = a.select_columns(cols.iter());
        let sv = svd(&sub).singular_values;
        let rank = sv.iter().filter(|&&s| s > rcond * sigma_max).count();
        if rank == cols.len() {
            kept.push(j);
        } else {
            dependent.push(j);
        }
    }
    Ok(dependent)
}

#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<Complex64>,
    /// Unit 2-norm right eigenvectors, column `i` paired with `eigenvalues[i]`.
    pub vectors: CMatrix,
    /// 2-norm condition number of `vectors`.
    pub condition_estimate: f64,
}

impl EigenDecomposition {
    pub fn vector(&self, i: usize) -> Vec<Complex64> {
        self.vectors.column(i).iter().cloned().collect()
    }
}

/// Square working matrix indexed with signed indices so the EISPACK loops can
/// count down past zero.
struct Work {
    n: usize,
    data: Vec<f64>,
}

impl Work {
    fn from_matrix(a: &Matrix) -> Self {
        let n = a.nrows();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = a[(i, j)];
            }
        }
        Work { n, data }
    }

    fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Work { n, data }
    }
}

impl Index<(isize, isize)> for Work {
    type Output = f64;
    fn index(&self, (i, j): (isize, isize)) -> &f64 {
        &self.data[i as usize * self.n + j as usize]
    }
}

impl IndexMut<(isize, isize)> for Work {
    fn index_mut(&mut self, (i, j): (isize, isize)) -> &mut f64 {
        &mut self.data[i as usize * self.n + j as usize]
    }
}

fn cdiv(xr: f64, xi: f64, yr: f64, yi: f64) -> (f64, f64) {
    if yr.abs() > yi.abs() {
        let r = yi / yr;
        let d = yr + r * yi;
        ((xr + r * xi) / d, (xi - r * xr) / d)
    } else {
        let r = yr / yi;
        let d = yi + r * yr;
        ((r * xr + xi) / d, (r * xi - xr) / d)
    }
}

/// Householder reduction to upper Hessenberg form, accumulating the
/// orthogonal similarity in `v`.
fn hessenberg(h: &mut Work, v: &mut Work) {
    let n = h.n as isize;
    let (low, high) = (0isize, n - 1);
    let mut ort = vec![0.0; h.n];

    for m in (low + 1)..high {
        let mut scale = 0.0;
        for i in m..=high {
            scale += h[(i, m - 1)].abs();
        }
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i as usize] = h[(i, m - 1)] / scale;
            hh += ort[i as usize] * ort[i as usize];
        }
        let mut g = hh.sqrt();
        if ort[m as usize] > 0.0 {
            g = -g;
        }
        hh -= ort[m as usize] * g;
        ort[m as usize] -= g;

        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i as usize] * h[(i, j)];
            }
            f /= hh;
            for i in m..=high {
                h[(i, j)] -= f * ort[i as usize];
            }
        }
        for i in 0..=high {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j as usize] * h[(i, j)];
            }
            f /= hh;
            for j in m..=high {
                h[(i, j)] -= f * ort[j as usize];
            }
        }
        ort[m as usize] *= scale;
        h[(m, m - 1)] = scale * g;
    }

    for m in ((low + 1)..high).rev() {
        if h[(m, m - 1)] == 0.0 {
            continue;
        }
        for i in (m + 1)..=high {
            ort[i as usize] = h[(i, m - 1)];
        }
        for j in m..=high {
            let mut g = 0.0;
            for i in m..=high {
                g += ort[i as usize] * v[(i, j)];
            }
            g = (g / ort[m as usize]) / h[(m, m - 1)];
            for i in m..=high {
                v[(i, j)] += g * ort[i as usize];
            }
        }
    }
}

const MAX_ITER_PER_EIGENVALUE: usize = 200;

/// Francis double-shift QR on the Hessenberg matrix followed by
/// back-substitution for the eigenvectors (EISPACK hqr2).
///
/// On return `d + i e` hold the eigenvalues and `v` the eigenvectors in real
/// form: a complex pair `(d[k] ± i e[k])` with `e[k] > 0` is stored as
/// `v[:, k] ± i v[:, k+1]`.
fn schur_vectors(h: &mut Work, v: &mut Work, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let nn = h.n as isize;
    let mut n = nn - 1;
    let (low, high) = (0isize, nn - 1);
    let eps = f64::EPSILON;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut t, mut w, mut x, mut y);

    let mut norm = 0.0;
    for i in 0..nn {
        for j in (i - 1).max(0)..nn {
            norm += h[(i, j)].abs();
        }
    }

    let mut iter = 0usize;
    let mut total_iter = 0usize;
    while n >= low {
        let mut l = n;
        while l > low {
            s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[(l, l - 1)].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            // one root
            h[(n, n)] += exshift;
            d[n as usize] = h[(n, n)];
            e[n as usize] = 0.0;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            // two roots
            w = h[(n, n - 1)] * h[(n - 1, n)];
            p = (h[(n - 1, n - 1)] - h[(n, n)]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[(n, n)] += exshift;
            h[(n - 1, n - 1)] += exshift;
            x = h[(n, n)];

            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                d[(n - 1) as usize] = x + z;
                d[n as usize] = d[(n - 1) as usize];
                if z != 0.0 {
                    d[n as usize] = x - w / z;
                }
                e[(n - 1) as usize] = 0.0;
                e[n as usize] = 0.0;
                x = h[(n, n - 1)];
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;

                for j in (n - 1)..nn {
                    z = h[(n - 1, j)];
                    h[(n - 1, j)] = q * z + p * h[(n, j)];
                    h[(n, j)] = q * h[(n, j)] - p * z;
                }
                for i in 0..=n {
                    z = h[(i, n - 1)];
                    h[(i, n - 1)] = q * z + p * h[(i, n)];
                    h[(i, n)] = q * h[(i, n)] - p * z;
                }
                for i in low..=high {
                    z = v[(i, n - 1)];
                    v[(i, n - 1)] = q * z + p * v[(i, n)];
                    v[(i, n)] = q * v[(i, n)] - p * z;
                }
            } else {
                d[(n - 1) as usize] = x + p;
                d[n as usize] = x + p;
                e[(n - 1) as usize] = z;
                e[n as usize] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            x = h[(n, n)];
            y = 0.0;
            w = 0.0;
            if l < n {
                y = h[(n - 1, n - 1)];
                w = h[(n, n - 1)] * h[(n - 1, n)];
            }

            // exceptional shifts
            if iter == 10 {
                exshift += x;
                for i in low..=n {
                    h[(i, i)] -= x;
                }
                s = h[(n, n - 1)].abs() + h[(n - 1, n - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in low..=n {
                        h[(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }

            iter += 1;
            total_iter += 1;
            if iter > MAX_ITER_PER_EIGENVALUE {
                let converged = ((n + 1) as usize..nn as usize)
                    .map(|k| Complex64::new(d[k], e[k]))
                    .collect();
                return Err(Error::NoConvergence {
                    iterations: total_iter,
                    converged,
                });
            }

            // look for two consecutive small sub-diagonal elements
            let mut m = n - 2;
            while m >= l {
                z = h[(m, m)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[(m + 1, m)] + h[(m, m + 1)];
                q = h[(m + 1, m + 1)] - z - r - s;
                r = h[(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[(m, m - 1)].abs() * (q.abs() + r.abs())
                    < eps
                        * (p.abs() * (h[(m - 1, m - 1)].abs() + z.abs() + h[(m + 1, m + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in (m + 2)..=n {
                h[(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[(i, i - 3)] = 0.0;
                }
            }

            // double QR step on rows l..=n and columns m..=n
            let mut k = m;
            while k < n {
                let notlast = k != n - 1;
                if k != m {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if notlast { h[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[(k, k - 1)] = -s * x;
                    } else if l != m {
                        h[(k, k - 1)] = -h[(k, k - 1)];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn {
                        p = h[(k, j)] + q * h[(k + 1, j)];
                        if notlast {
                            p += r * h[(k + 2, j)];
                            h[(k + 2, j)] -= p * z;
                        }
                        h[(k, j)] -= p * x;
                        h[(k + 1, j)] -= p * y;
                    }
                    for i in 0..=n.min(k + 3) {
                        p = x * h[(i, k)] + y * h[(i, k + 1)];
                        if notlast {
                            p += z * h[(i, k + 2)];
                            h[(i, k + 2)] -= p * r;
                        }
                        h[(i, k)] -= p;
                        h[(i, k + 1)] -= p * q;
                    }
                    for i in low..=high {
                        p = x * v[(i, k)] + y * v[(i, k + 1)];
                        if notlast {
                            p += z * v[(i, k + 2)];
                            v[(i, k + 2)] -= p * r;
                        }
                        v[(i, k)] -= p;
                        v[(i, k + 1)] -= p * q;
                    }
                }
                k += 1;
            }
        }
    }

    if norm == 0.0 {
        return Ok(());
    }

    // back-substitute in the quasi-triangular Schur form
    for n in (0..nn).rev() {
        p = d[n as usize];
        q = e[n as usize];

        if q == 0.0 {
            let mut l = n;
            h[(n, n)] = 1.0;
            for i in (0..n).rev() {
                w = h[(i, i)] - p;
                r = 0.0;
                for j in l..=n {
                    r += h[(i, j)] * h[(j, n)];
                }
                if e[i as usize] < 0.0 {
                    z = w;
                    s = r;
                } else {
                    l = i;
                    if e[i as usize] == 0.0 {
                        h[(i, n)] = if w != 0.0 { -r / w } else { -r / (eps * norm) };
                    } else {
                        x = h[(i, i + 1)];
                        y = h[(i + 1, i)];
                        let di = d[i as usize] - p;
                        q = di * di + e[i as usize] * e[i as usize];
                        t = (x * s - z * r) / q;
                        h[(i, n)] = t;
                        h[(i + 1, n)] = if x.abs() > z.abs() {
                            (-r - w * t) / x
                        } else {
                            (-s - y * t) / z
                        };
                    }
                    t = h[(i, n)].abs();
                    if (eps * t) * t > 1.0 {
                        for j in i..=n {
                            h[(j, n)] /= t;
                        }
                    }
                }
            }
        } else if q < 0.0 {
            let mut l = n - 1;
            if h[(n, n - 1)].abs() > h[(n - 1, n)].abs() {
                h[(n - 1, n - 1)] = q / h[(n, n - 1)];
                h[(n - 1, n)] = -(h[(n, n)] - p) / h[(n, n - 1)];
            } else {
                let (cr, ci) = cdiv(0.0, -h[(n - 1, n)], h[(n - 1, n - 1)] - p, q);
                h[(n - 1, n - 1)] = cr;
                h[(n - 1, n)] = ci;
            }
            h[(n, n - 1)] = 0.0;
            h[(n, n)] = 1.0;
            for i in (0..n - 1).rev() {
                let mut ra = 0.0;
                let mut sa = 0.0;
                for j in l..=n {
                    ra += h[(i, j)] * h[(j, n - 1)];
                    sa += h[(i, j)] * h[(j, n)];
                }
                w = h[(i, i)] - p;

                if e[i as usize] < 0.0 {
                    z = w;
                    r = ra;
                    s = sa;
                } else {
                    l = i;
                    if e[i as usize] == 0.0 {
                        let (cr, ci) = cdiv(-ra, -sa, w, q);
                        h[(i, n - 1)] = cr;
                        h[(i, n)] = ci;
                    } else {
                        x = h[(i, i + 1)];
                        y = h[(i + 1, i)];
                        let di = d[i as usize] - p;
                        let mut vr = di * di + e[i as usize] * e[i as usize] - q * q;
                        let vi = di * 2.0 * q;
                        if vr == 0.0 && vi == 0.0 {
                            vr = eps * norm * (w.abs() + q.abs() + x.abs() + y.abs() + z.abs());
                        }
                        let (cr, ci) =
                            cdiv(x * r - z * ra + q * sa, x * s - z * sa - q * ra, vr, vi);
                        h[(i, n - 1)] = cr;
                        h[(i, n)] = ci;
                        if x.abs() > z.abs() + q.abs() {
                            h[(i + 1, n - 1)] = (-ra - w * h[(i, n - 1)] + q * h[(i, n)]) / x;
                            h[(i + 1, n)] = (-sa - w * h[(i, n)] - q * h[(i, n - 1)]) / x;
                        } else {
                            let (cr, ci) = cdiv(-r - y * h[(i, n - 1)], -s - y * h[(i, n)], z, q);
                            h[(i + 1, n - 1)] = cr;
                            h[(i + 1, n)] = ci;
                        }
                    }
                    t = h[(i, n - 1)].abs().max(h[(i, n)].abs());
                    if (eps * t) * t > 1.0 {
                        for j in i..=n {
                            h[(j, n - 1)] /= t;
                            h[(j, n)] /= t;
                        }
                    }
                }
            }
        }
    }

    // back-transform to eigenvectors of the original matrix
    for j in (low..nn).rev() {
        for i in low..=high {
            z = 0.0;
            for k in low..=j.min(high) {
                z += v[(i, k)] * h[(k, j)];
            }
            v[(i, j)] = z;
        }
    }
    Ok(())
}

/// 2-norm condition number of a complex matrix (∞ when singular).
pub fn condition_number(a: &CMatrix) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Eigenvalues and right eigenvectors of a real square matrix.
///
/// Complex eigenvalues come in adjacent conjugate pairs, positive imaginary
/// part first. Eigenvectors have unit 2-norm.
pub fn eig(a: &Matrix) -> Result<EigenDecomposition> {
    let n = ensure_square(a, "eig input")?;
    ensure_finite(a, "eig input")?;

    let mut h = Work::from_matrix(a);
    let mut v = Work::identity(n);
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    hessenberg(&mut h, &mut v);
    schur_vectors(&mut h, &mut v, &mut d, &mut e)?;

    let mut eigenvalues = Vec::with_capacity(n);
    let mut vectors = CMatrix::zeros(n, n);
    let mut k = 0;
    while k < n {
        if e[k] == 0.0 {
            eigenvalues.push(Complex64::new(d[k], 0.0));
            for i in 0..n {
                vectors[(i, k)] = Complex64::new(v.data[i * n + k], 0.0);
            }
            k += 1;
        } else {
            eigenvalues.push(Complex64::new(d[k], e[k]));
            eigenvalues.push(Complex64::new(d[k + 1], e[k + 1]));
            for i in 0..n {
                let re = v.data[i * n + k];
                let im = v.data[i * n + k + 1];
                vectors[(i, k)] = Complex64::new(re, im);
                vectors[(i, k + 1)] = Complex64::new(re, -im);
            }
            k += 2;
        }
    }
    for mut col in vectors.column_iter_mut() {
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            col.iter_mut().for_each(|z| *z /= norm);
        }
    }
    let condition_estimate = condition_number(&vectors);
    Ok(EigenDecomposition {
        eigenvalues,
        vectors,
        condition_estimate,
    })
}

#[derive(Clone, Debug)]
pub struct MatrixLog {
    pub matrix: Matrix,
    /// Condition number of the eigenvector matrix used to form the logarithm.
    pub condition_estimate: f64,
}

impl MatrixLog {
    pub fn ill_conditioned(&self) -> bool {
        !(self.condition_estimate <= CONDITION_LIMIT)
    }
}

fn complex_inverse(a: &CMatrix) -> Result<CMatrix> {
    a.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular("eigenvector matrix is singular".into()))
}

/// Principal matrix logarithm via `V log(Λ) V⁻¹`.
///
/// Fails when an eigenvalue is (numerically) zero or lies on the negative real
/// axis. A badly conditioned eigenvector matrix does not fail; it is reported
/// through [`MatrixLog::condition_estimate`].
pub fn logm(a: &Matrix) -> Result<MatrixLog> {
    let n = ensure_square(a, "logm input")?;
    let dec = eig(a)?;
    let tiny = n as f64 * f64::EPSILON * a.norm();
    for &lambda in &dec.eigenvalues {
        if lambda.norm() <= tiny || (lambda.im == 0.0 && lambda.re <= 0.0) {
            return Err(Error::BranchCut { eigenvalue: lambda });
        }
    }
    let v_inv = complex_inverse(&dec.vectors)?;
    let mut scaled = dec.vectors.clone();
    for (j, lambda) in dec.eigenvalues.iter().enumerate() {
        let log = lambda.ln();
        scaled.column_mut(j).iter_mut().for_each(|z| *z *= log);
    }
    let full = scaled * v_inv;
    Ok(MatrixLog {
        matrix: full.map(|z| z.re),
        condition_estimate: dec.condition_estimate,
    })
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn norm_one(a: &Matrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant.
pub fn expm(a: &Matrix) -> Result<Matrix> {
    let n = ensure_square(a, "expm input")?;
    ensure_finite(a, "expm input")?;
    let norm = norm_one(a);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a / 2f64.powi(squarings);
    let b = &PADE13;
    let id = Matrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &id * b[0];

    let denom = &v - &u;
    let numer = &v + &u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .ok_or_else(|| Error::Singular("Padé denominator is singular".into()))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}
