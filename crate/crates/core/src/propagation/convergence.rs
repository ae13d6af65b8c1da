use serde::Serialize;

use super::{Mode, Model, PropagationConfig, SolverSettings};
use crate::error::{Error, Result};
use crate::graph::NormalizedOperators;
use crate::numerics::DenseMatrix;

/// Distance between the depth-`K` iterate and the closed-form solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub depth_checked: usize,
    /// `‖Z_iter − Z_closed‖_F / ‖Z_closed‖_F`.
    pub relative_error: f64,
    /// Per-step factor the error is predicted to shrink by.
    pub contraction_ratio: f64,
}

/// Relative residual used for the closed-form reference; tighter than the
/// propagation default so the error curve is not floored by the solver.
const REFERENCE_TOL: f64 = 1e-13;

/// Compares the iterative form against the closed form at every requested
/// depth. Depths may come in any order; the recurrence runs once up to the
/// largest.
pub fn verify_convergence(
    cfg: &PropagationConfig,
    ops: &NormalizedOperators,
    h: &DenseMatrix,
    depths: &[usize],
) -> Result<Vec<ConvergenceReport>> {
    if !matches!(
        cfg.model(),
        Model::Ppnp | Model::Appnp | Model::GnnLf | Model::GnnHf
    ) {
        return Err(Error::config(format!(
            "convergence is only defined for appnp/ppnp, gnn-lf and gnn-hf, not {}",
            cfg.model()
        )));
    }
    let max_depth = depths.iter().copied().max().unwrap_or(0);
    let iter_cfg = cfg.with_mode(Mode::Iter).with_depth(max_depth.max(1));
    iter_cfg.validate()?;
    let solver = SolverSettings {
        tol: REFERENCE_TOL.min(cfg.solver().tol),
        ..cfg.solver()
    };
    let closed = super::propagate(&cfg.with_mode(Mode::Closed).with_solver(solver), ops, h)?;
    let closed_norm = closed.frobenius_norm();
    let ratio = cfg.contraction_ratio().expect("supported models contract");

    let mut errors = vec![f64::NAN; max_depth + 1];
    let mut failure = None;
    let rec = cfg
        .recurrence()
        .expect("supported models have a recurrence");
    rec.run(ops, h, max_depth, |k, z| match z.sub(&closed) {
        Ok(d) => {
            let diff = d.frobenius_norm();
            errors[k] = if closed_norm == 0.0 {
                diff
            } else {
                diff / closed_norm
            };
        }
        Err(e) => failure = Some(e),
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(depths
        .iter()
        .map(|&k| ConvergenceReport {
            depth_checked: k,
            relative_error: errors[k],
            contraction_ratio: ratio,
        })
        .collect())
}

/// True when errors never increase with depth by more than `slack`.
pub fn is_monotone(reports: &[ConvergenceReport], slack: f64) -> bool {
    let mut sorted: Vec<_> = reports.to_vec();
    sorted.sort_by_key(|r| r.depth_checked);
    sorted
        .windows(2)
        .all(|w| w[1].relative_error <= w[0].relative_error + slack)
}

/// Constant `C` of the envelope `C · ratio^K`, implied by the shallowest
/// reported depth. With depth 0 included this is the initial error, and
/// `‖ratio·Â‖ ≤ ratio` makes the envelope a strict bound.
pub fn envelope_constant(reports: &[ConvergenceReport]) -> Option<f64> {
    reports
        .iter()
        .min_by_key(|r| r.depth_checked)
        .map(|r| r.relative_error / r.contraction_ratio.powi(r.depth_checked as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, normalize};
    use crate::numerics::Rng;

    fn ring_with_chords(n: usize) -> NormalizedOperators {
        let mut edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        edges.extend((0..n).step_by(3).map(|i| (i, (i + n / 2) % n)));
        normalize(&build_graph(n, &edges).unwrap())
    }

    #[test]
    fn lf_half_half() {
        let ops = ring_with_chords(20);
        let mut rng = Rng::new(1);
        let h = DenseMatrix::from_fn(20, 3, |_, _| rng.normal());
        let cfg = PropagationConfig::gnn_lf(0.5, 0.5);
        let reports = verify_convergence(&cfg, &ops, &h, &[1, 5, 10, 20]).unwrap();
        assert!((reports[0].contraction_ratio - 1.0 / 3.0).abs() < 1e-15);
        assert!(reports[3].relative_error <= 1e-8, "{:?}", reports[3]);
        assert!(is_monotone(&reports, 1e-12));
    }

    #[test]
    fn errors_stay_under_initial_envelope() {
        let ops = ring_with_chords(30);
        let mut rng = Rng::new(5);
        let h = DenseMatrix::from_fn(30, 2, |_, _| rng.normal());
        let cfg = PropagationConfig::gnn_lf(0.1, 0.7);
        let reports = verify_convergence(&cfg, &ops, &h, &[0, 1, 2, 5, 10, 20, 50]).unwrap();
        let c = envelope_constant(&reports).unwrap();
        assert_eq!(c, reports[0].relative_error);
        for r in &reports {
            assert!(
                r.relative_error
                    <= c * r.contraction_ratio.powi(r.depth_checked as i32) * (1.0 + 1e-9) + 1e-13
            );
        }
    }

    #[test]
    fn appnp_alpha_one_exact_at_every_depth() {
        let ops = ring_with_chords(12);
        let h = DenseMatrix::from_fn(12, 2, |i, j| (i as f64).sin() + j as f64);
        let cfg = PropagationConfig::appnp(1.0, 1);
        for r in verify_convergence(&cfg, &ops, &h, &[1, 2, 3, 10]).unwrap() {
            assert_eq!(r.relative_error, 0.0);
        }
    }

    #[test]
    fn hf_alpha_half_beta_one() {
        let ops = ring_with_chords(24);
        let mut rng = Rng::new(2);
        let h = DenseMatrix::from_fn(24, 2, |_, _| rng.normal());
        let cfg = PropagationConfig::gnn_hf(0.5, 1.0);
        let reports = verify_convergence(&cfg, &ops, &h, &[60, 10, 30]).unwrap();
        assert!((reports[0].contraction_ratio - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(reports[0].depth_checked, 60);
        assert!(reports[0].relative_error <= 1e-9, "{:?}", reports[0]);
        assert!(is_monotone(&reports, 1e-12));
    }

    #[test]
    fn unsupported_models_rejected() {
        let ops = ring_with_chords(6);
        let h = DenseMatrix::zeros(6, 1);
        for cfg in [
            PropagationConfig::sgc(3),
            PropagationConfig::jknet_fixed(1.0),
        ] {
            assert!(matches!(
                verify_convergence(&cfg, &ops, &h, &[1]),
                Err(Error::Config(_))
            ));
        }
    }
}
