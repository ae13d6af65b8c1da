//! SPD linear solvers: unpreconditioned conjugate gradient and dense Cholesky.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// Outcome of an iterative solve. For multi-column right-hand sides the
/// fields aggregate the worst column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Largest per-column `‖A·x − b‖₂ / ‖b‖₂`.
    pub residual_norm: f64,
    pub converged: bool,
}

/// Solves `A·X = rhs` column by column with conjugate gradient.
///
/// `apply_operator(v, out)` must write `A·v` into `out`. Non-convergence is
/// not an error: the report comes back with `converged = false` and the last
/// iterate.
pub fn cg_solve<F>(
    apply_operator: F,
    rhs: &DenseMatrix,
    tol: f64,
    max_iter: usize,
) -> (DenseMatrix, SolveReport)
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    let n = rhs.num_rows();
    let mut x = DenseMatrix::zeros(n, rhs.num_cols());
    if n == 0 {
        let report = SolveReport {
            iterations: 0,
            residual_norm: 0.0,
            converged: true,
        };
        return (x, report);
    }
    let reports: Vec<SolveReport> = x
        .as_mut_slice()
        .par_chunks_mut(n)
        .enumerate()
        .map(|(j, xj)| cg_column(&apply_operator, rhs.col(j), xj, tol, max_iter))
        .collect();
    let report = reports.iter().fold(
        SolveReport {
            iterations: 0,
            residual_norm: 0.0,
            converged: true,
        },
        |acc, r| SolveReport {
            iterations: acc.iterations.max(r.iterations),
            residual_norm: acc.residual_norm.max(r.residual_norm),
            converged: acc.converged && r.converged,
        },
    );
    (x, report)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cg_column<F>(apply: &F, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> SolveReport
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.fill(0.0);
        return SolveReport {
            iterations: 0,
            residual_norm: 0.0,
            converged: true,
        };
    }
    let threshold = tol * b_norm;
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let mut iterations = 0;

    let true_residual = |x: &[f64], scratch: &mut [f64]| -> (Vec<f64>, f64) {
        apply(x, scratch);
        let res: Vec<f64> = b
            .iter()
            .zip(scratch.iter())
            .map(|(bi, ai)| bi - ai)
            .collect();
        let norm = dot(&res, &res).sqrt();
        (res, norm)
    };

    while iterations < max_iter {
        apply(&p, &mut ap);
        let p_ap = dot(&p, &ap);
        if p_ap <= 0.0 || !p_ap.is_finite() {
            // operator is not SPD along p
            break;
        }
        let step = rr / p_ap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        iterations += 1;
        let rr_next = dot(&r, &r);
        if rr_next.sqrt() <= threshold {
            // guard against drift between the recurrence and the true residual
            let (res, norm) = true_residual(x, &mut ap);
            if norm <= threshold {
                return SolveReport {
                    iterations,
                    residual_norm: norm / b_norm,
                    converged: true,
                };
            }
            r = res;
            p.copy_from_slice(&r);
            rr = dot(&r, &r);
            continue;
        }
        let beta = rr_next / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_next;
    }
    let (_, norm) = true_residual(x, &mut ap);
    SolveReport {
        iterations,
        residual_norm: norm / b_norm,
        converged: norm <= threshold,
    }
}

/// Solves `a·X = rhs` through a dense `L·Lᵀ` factorization.
pub fn cholesky_solve(a: &DenseMatrix, rhs: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.num_rows();
    if a.num_cols() != n || rhs.num_rows() != n {
        return Err(Error::shape(format!(
            "cholesky_solve: {}x{} system with {}x{} right-hand side",
            a.num_rows(),
            a.num_cols(),
            rhs.num_rows(),
            rhs.num_cols()
        )));
    }
    let l = cholesky_factor(a)?;
    let mut x = rhs.clone();
    for col in x.columns_mut() {
        // forward: L y = b
        for i in 0..n {
            let mut s = col[i];
            for k in 0..i {
                s -= l[(i, k)] * col[k];
            }
            col[i] = s / l[(i, i)];
        }
        // backward: Lᵀ x = y
        for i in (0..n).rev() {
            let mut s = col[i];
            for k in i + 1..n {
                s -= l[(k, i)] * col[k];
            }
            col[i] = s / l[(i, i)];
        }
    }
    Ok(x)
}

/// Lower-triangular Cholesky factor; only the lower triangle of `a` is read.
pub fn cholesky_factor(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.num_rows();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { row: j, pivot: d });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn dense_apply(a: &DenseMatrix) -> impl Fn(&[f64], &mut [f64]) + Sync + '_ {
        move |v, out| {
            for (i, o) in out.iter_mut().enumerate() {
                *o = (0..v.len()).map(|k| a[(i, k)] * v[k]).sum();
            }
        }
    }

    fn random_spd(n: usize, rng: &mut Rng) -> DenseMatrix {
        let b = DenseMatrix::from_fn(n, n, |_, _| rng.normal());
        let mut a = b.t_matmul(&b).unwrap();
        for i in 0..n {
            a[(i, i)] += 1.0;
        }
        a
    }

    #[test]
    fn cg_identity_one_iteration() {
        let rhs = DenseMatrix::from_fn(5, 2, |i, j| i as f64 - j as f64 * 3.0 + 0.5);
        let (x, report) = cg_solve(|v, out| out.copy_from_slice(v), &rhs, 1e-12, 10);
        assert_eq!(x, rhs);
        assert_eq!(report.iterations, 1);
        assert!(report.converged);
    }

    #[test]
    fn cg_scalar_system() {
        let rhs = DenseMatrix::filled(4, 1, 1.0);
        let (x, report) = cg_solve(
            |v, out| out.iter_mut().zip(v).for_each(|(o, vi)| *o = 2.0 * vi),
            &rhs,
            1e-12,
            10,
        );
        assert!(report.converged);
        assert_eq!(x.as_slice(), &[0.5; 4]);
    }

    #[test]
    fn cg_and_cholesky_on_i_plus_laplacian_k2() {
        // (I + L̃) on K2 = [[1.5, -0.5], [-0.5, 1.5]]; inverse applied to e0 = [0.75, 0.25]
        let a = DenseMatrix::from_rows(&[[1.5, -0.5], [-0.5, 1.5]]).unwrap();
        let rhs = DenseMatrix::column_vector(vec![1.0, 0.0]);
        let (x, report) = cg_solve(dense_apply(&a), &rhs, 1e-14, 20);
        assert!(report.converged);
        assert!((x[(0, 0)] - 0.75).abs() < 1e-14 && (x[(1, 0)] - 0.25).abs() < 1e-14);
        let y = cholesky_solve(&a, &rhs).unwrap();
        assert!((y[(0, 0)] - 0.75).abs() < 1e-15 && (y[(1, 0)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn cholesky_identity_returns_rhs() {
        let rhs = DenseMatrix::from_fn(3, 2, |i, j| (i + j) as f64);
        assert_eq!(
            cholesky_solve(&DenseMatrix::identity(3), &rhs).unwrap(),
            rhs
        );
    }

    #[test]
    fn cholesky_random_spd_residual() {
        let mut rng = Rng::new(11);
        let a = random_spd(10, &mut rng);
        let rhs = DenseMatrix::from_fn(10, 3, |_, _| rng.normal());
        let x = cholesky_solve(&a, &rhs).unwrap();
        let res = a.matmul(&x).unwrap().sub(&rhs).unwrap().frobenius_norm();
        assert!(res <= 1e-12 * rhs.frobenius_norm(), "residual {res}");
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        let err = cholesky_solve(&a, &DenseMatrix::zeros(2, 1)).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { row: 1, .. }));
    }

    #[test]
    fn cg_matches_cholesky_on_random_spd() {
        let mut rng = Rng::new(5);
        for n in [3usize, 20, 60, 200] {
            let a = random_spd(n, &mut rng);
            let rhs = DenseMatrix::from_fn(n, 2, |_, _| rng.normal());
            let (x, report) = cg_solve(dense_apply(&a), &rhs, 1e-12, 20 * n);
            assert!(report.converged, "n={n}: {report:?}");
            let y = cholesky_solve(&a, &rhs).unwrap();
            let rel = x.relative_error(&y).unwrap();
            assert!(rel <= 1e-8, "n={n}: relative error {rel}");
        }
    }

    #[test]
    fn cg_reports_non_convergence() {
        let mut rng = Rng::new(2);
        let a = random_spd(30, &mut rng);
        let rhs = DenseMatrix::from_fn(30, 1, |_, _| rng.normal());
        let (_, report) = cg_solve(dense_apply(&a), &rhs, 1e-14, 2);
        assert!(!report.converged);
        assert_eq!(report.iterations, 2);
    }

    #[test]
    fn zero_rhs_column() {
        let rhs = DenseMatrix::zeros(3, 1);
        let (x, report) = cg_solve(|v, out| out.copy_from_slice(v), &rhs, 1e-10, 5);
        assert_eq!(x, rhs);
        assert!(report.converged);
    }
}
