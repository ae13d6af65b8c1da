//! Propagation operators in closed and iterative form.
//!
//! Every model here minimizes
//!
//! ```text
//! O(Z) = ζ · tr((Z − T)ᵀ M (Z − T)) + ξ · tr(Zᵀ L̃ Z)
//! ```
//!
//! for a fitting kernel `M = m₀I + m₁Â`, target `T ∈ {H, ÂH}`, and the
//! model's ζ, ξ. The closed form solves the stationarity system
//! `(ζM + ξL̃) Z = ζ M T`; the iterative form runs the model's own
//! recurrence, which converges to the same `Z` geometrically.

mod config;
mod convergence;
mod objective;

pub use config::{Mode, Model, ModelParams, PropagationConfig, SolverSettings};
pub use convergence::{envelope_constant, is_monotone, verify_convergence, ConvergenceReport};
pub use objective::{objective_gradient, objective_value, ObjectiveValue};

use crate::error::{Error, Result};
use crate::graph::NormalizedOperators;
use crate::numerics::{cg_solve, cholesky_solve, DenseMatrix};

/// `m₀·I + m₁·Â`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AHatPolynomial {
    pub identity: f64,
    pub a_hat: f64,
}

impl AHatPolynomial {
    pub fn apply(&self, ops: &NormalizedOperators, x: &DenseMatrix) -> Result<DenseMatrix> {
        if self.a_hat == 0.0 {
            return Ok(x.scaled(self.identity));
        }
        let ax = ops.apply_a_hat(x)?;
        x.lin_comb(self.identity, &ax, self.a_hat)
    }

    /// Dense `m₀I + m₁Â`.
    pub fn to_dense(&self, ops: &NormalizedOperators) -> DenseMatrix {
        let mut m = ops.a_hat().to_dense();
        m.scale(self.a_hat);
        for i in 0..m.num_rows() {
            m[(i, i)] += self.identity;
        }
        m
    }
}

/// What the fitting term pulls `Z` towards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitTarget {
    H,
    AHatH,
}

impl FitTarget {
    pub fn apply(self, ops: &NormalizedOperators, h: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            FitTarget::H => Ok(h.clone()),
            FitTarget::AHatH => ops.apply_a_hat(h),
        }
    }
}

impl PropagationConfig {
    /// Gram matrix `M = F₁ᵀF₁` of the fitting kernel and the target `F₂'H`.
    pub fn fit_kernel(&self) -> (AHatPolynomial, FitTarget) {
        let identity = AHatPolynomial {
            identity: 1.0,
            a_hat: 0.0,
        };
        match self.model() {
            Model::GnnLf => (
                AHatPolynomial {
                    identity: self.mu(),
                    a_hat: 1.0 - self.mu(),
                },
                FitTarget::H,
            ),
            // I + βL̃ = (1 + β)I − βÂ
            Model::GnnHf => (
                AHatPolynomial {
                    identity: 1.0 + self.beta(),
                    a_hat: -self.beta(),
                },
                FitTarget::H,
            ),
            Model::JknetFixed => (identity, FitTarget::AHatH),
            _ => (identity, FitTarget::H),
        }
    }

    /// Stationarity system matrix `ζM + ξL̃` in the `{I, Â}` basis.
    pub fn system_matrix(&self) -> AHatPolynomial {
        let (m, _) = self.fit_kernel();
        AHatPolynomial {
            identity: self.zeta() * m.identity + self.xi(),
            a_hat: self.zeta() * m.a_hat - self.xi(),
        }
    }

    /// The model's affine recurrence, for the models that have one.
    pub fn recurrence(&self) -> Option<Recurrence> {
        let a = self.alpha();
        match self.model() {
            Model::Sgc => Some(Recurrence {
                init: Terms::h(1.0),
                contraction: 1.0,
                inject: Terms::default(),
            }),
            Model::Ppnp | Model::Appnp => Some(Recurrence {
                init: Terms::h(1.0),
                contraction: 1.0 - a,
                inject: Terms::h(a),
            }),
            Model::GnnLf => {
                let mu = self.mu();
                let denom = 1.0 + a * mu - a;
                Some(Recurrence {
                    init: Terms {
                        h: mu / denom,
                        a_hat_h: (1.0 - mu) / denom,
                        l_tilde_h: 0.0,
                    },
                    contraction: (1.0 + a * mu - 2.0 * a) / denom,
                    inject: Terms {
                        h: a * mu / denom,
                        a_hat_h: (a - a * mu) / denom,
                        l_tilde_h: 0.0,
                    },
                })
            }
            Model::GnnHf => {
                let b = self.beta();
                let denom = a * b + 1.0;
                Some(Recurrence {
                    init: Terms {
                        h: 1.0 / denom,
                        a_hat_h: 0.0,
                        l_tilde_h: b / denom,
                    },
                    contraction: (a * b - a + 1.0) / denom,
                    inject: Terms {
                        h: a / denom,
                        a_hat_h: 0.0,
                        l_tilde_h: a * b / denom,
                    },
                })
            }
            Model::GcOneLayer | Model::JknetFixed | Model::DagnnFixed => None,
        }
    }

    /// Per-step contraction factor of the iterative form against the closed
    /// form, for models whose recurrence converges.
    pub fn contraction_ratio(&self) -> Option<f64> {
        match self.model() {
            Model::Sgc | Model::GcOneLayer => None,
            Model::JknetFixed | Model::DagnnFixed => Some(self.xi() / (1.0 + self.xi())),
            _ => self.recurrence().map(|r| r.contraction.abs()),
        }
    }
}

/// `h·H + a_hat_h·ÂH + l_tilde_h·L̃H`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Terms {
    pub h: f64,
    pub a_hat_h: f64,
    pub l_tilde_h: f64,
}

impl Terms {
    fn h(h: f64) -> Self {
        Self {
            h,
            ..Self::default()
        }
    }

    fn is_zero(&self) -> bool {
        self.h == 0.0 && self.a_hat_h == 0.0 && self.l_tilde_h == 0.0
    }

    fn combine(&self, h: &DenseMatrix, ah: &DenseMatrix, lh: &DenseMatrix) -> Result<DenseMatrix> {
        let mut out = h.scaled(self.h);
        if self.a_hat_h != 0.0 {
            out.axpy(self.a_hat_h, ah)?;
        }
        if self.l_tilde_h != 0.0 {
            out.axpy(self.l_tilde_h, lh)?;
        }
        Ok(out)
    }
}

/// `Z⁽⁰⁾ = init(H)`, `Z⁽ᵏ⁺¹⁾ = contraction · ÂZ⁽ᵏ⁾ + inject(H)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recurrence {
    pub init: Terms,
    pub contraction: f64,
    pub inject: Terms,
}

impl Recurrence {
    /// Runs the recurrence and hands each iterate `Z⁽ᵏ⁾`, `k = 0..=depth`, to
    /// `visit`.
    pub fn run(
        &self,
        ops: &NormalizedOperators,
        h: &DenseMatrix,
        depth: usize,
        mut visit: impl FnMut(usize, &DenseMatrix),
    ) -> Result<DenseMatrix> {
        let needs_ah = self.init.a_hat_h != 0.0 || self.inject.a_hat_h != 0.0;
        let needs_lh = self.init.l_tilde_h != 0.0 || self.inject.l_tilde_h != 0.0;
        let empty = DenseMatrix::zeros(0, 0);
        let ah = if needs_ah {
            ops.apply_a_hat(h)?
        } else {
            empty.clone()
        };
        let lh = if needs_lh {
            ops.apply_l_tilde(h)?
        } else {
            empty
        };
        let injected = if self.inject.is_zero() {
            None
        } else {
            Some(self.inject.combine(h, &ah, &lh)?)
        };
        let mut z = self.init.combine(h, &ah, &lh)?;
        visit(0, &z);
        for k in 1..=depth {
            let mut next = ops.apply_a_hat(&z)?;
            if self.contraction != 1.0 {
                next.scale(self.contraction);
            }
            if let Some(inj) = &injected {
                next.axpy(1.0, inj)?;
            }
            z = next;
            visit(k, &z);
        }
        Ok(z)
    }
}

/// Geometric layer weights `ξ^{k−1}/(1+ξ)^k`, `k = 1..=depth`, of the
/// fixed-weight jumping-knowledge combination.
pub fn jknet_series_weights(xi: f64, depth: usize) -> Result<Vec<f64>> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::config(format!("xi must lie in (0, inf), got {xi}")));
    }
    if depth == 0 {
        return Err(Error::config("depth must be at least 1"));
    }
    let ratio = xi / (1.0 + xi);
    let mut w = 1.0 / (1.0 + xi);
    Ok((0..depth)
        .map(|_| {
            let cur = w;
            w *= ratio;
            cur
        })
        .collect())
}

/// Weights `ξ^k/(1+ξ)^{k+1}`, `k = 0..=depth`, of the fixed-score adaptive
/// depth combination.
pub fn dagnn_series_weights(xi: f64, depth: usize) -> Result<Vec<f64>> {
    // same geometric sequence, indexed from Â⁰
    jknet_series_weights(xi, depth + 1)
}

/// `Σ_k weights[k] · Â^{k + offset} H`.
fn truncated_series(
    ops: &NormalizedOperators,
    h: &DenseMatrix,
    weights: &[f64],
    offset: usize,
) -> Result<DenseMatrix> {
    let mut power = h.clone();
    for _ in 0..offset {
        power = ops.apply_a_hat(&power)?;
    }
    let mut out = DenseMatrix::zeros(h.num_rows(), h.num_cols());
    for (k, &w) in weights.iter().enumerate() {
        if k > 0 {
            power = ops.apply_a_hat(&power)?;
        }
        out.axpy(w, &power)?;
    }
    Ok(out)
}

/// Applies the propagation mechanism described by `cfg` to `h`.
pub fn propagate(
    cfg: &PropagationConfig,
    ops: &NormalizedOperators,
    h: &DenseMatrix,
) -> Result<DenseMatrix> {
    cfg.validate()?;
    if h.num_rows() != ops.num_nodes() {
        return Err(Error::shape(format!(
            "features have {} rows but the graph has {} nodes",
            h.num_rows(),
            ops.num_nodes()
        )));
    }
    match (cfg.model(), cfg.mode()) {
        (Model::GcOneLayer, _) => {
            if cfg.is_exact_gc() {
                solve_closed(cfg, ops, h)
            } else {
                ops.apply_a_hat(h)
            }
        }
        (Model::JknetFixed, Mode::Iter) => {
            let w = jknet_series_weights(cfg.xi(), cfg.depth())?;
            truncated_series(ops, h, &w, 1)
        }
        (Model::DagnnFixed, Mode::Iter) => {
            let w = dagnn_series_weights(cfg.xi(), cfg.depth())?;
            truncated_series(ops, h, &w, 0)
        }
        (_, Mode::Iter) => {
            let rec = cfg
                .recurrence()
                .expect("every remaining model has a recurrence");
            rec.run(ops, h, cfg.depth(), |_, _| {})
        }
        (_, Mode::Closed) => solve_closed(cfg, ops, h),
    }
}

/// Solves `(ζM + ξL̃) Z = ζ M T` by CG, falling back to dense Cholesky.
fn solve_closed(
    cfg: &PropagationConfig,
    ops: &NormalizedOperators,
    h: &DenseMatrix,
) -> Result<DenseMatrix> {
    let (kernel, target) = cfg.fit_kernel();
    let system = cfg.system_matrix();
    let t = target.apply(ops, h)?;
    let mut rhs = kernel.apply(ops, &t)?;
    rhs.scale(cfg.zeta());

    let n = ops.num_nodes();
    let settings = cfg.solver();
    let a_hat = ops.a_hat();
    let apply = |v: &[f64], out: &mut [f64]| {
        a_hat.spmv_into(v, out);
        for (o, vi) in out.iter_mut().zip(v) {
            *o = system.identity * vi + system.a_hat * *o;
        }
    };
    let (z, report) = cg_solve(
        apply,
        &rhs,
        settings.tol,
        settings.max_iter_factor * n.max(1),
    );
    if report.converged {
        return Ok(z);
    }
    if n <= settings.cholesky_limit {
        log::warn!(
            "CG stopped after {} iterations at residual {:.3e}; using dense Cholesky",
            report.iterations,
            report.residual_norm
        );
        return cholesky_solve(&system.to_dense(ops), &rhs)
            .map_err(|e| Error::Solver(e.to_string()));
    }
    Err(Error::Solver(format!(
        "CG did not reach tolerance {:e} in {} iterations (residual {:.3e})",
        settings.tol, report.iterations, report.residual_norm
    )))
}

/// Materializes the linear map `H ↦ Z` as an `n × n` matrix, column by
/// column.
pub fn propagation_matrix(
    cfg: &PropagationConfig,
    ops: &NormalizedOperators,
) -> Result<DenseMatrix> {
    propagate(cfg, ops, &DenseMatrix::identity(ops.num_nodes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, normalize};

    fn k2() -> NormalizedOperators {
        normalize(&build_graph(2, &[(0, 1)]).unwrap())
    }

    fn e0() -> DenseMatrix {
        DenseMatrix::column_vector(vec![1.0, 0.0])
    }

    #[test]
    fn lf_closed_on_empty_graph_is_identity() {
        let ops = normalize(&build_graph(4, &[]).unwrap());
        let h = DenseMatrix::from_fn(4, 3, |i, j| (i as f64 - 1.5) * (j as f64 + 0.3));
        for (alpha, mu) in [(0.1, 0.5), (0.3, 0.9), (0.6, 0.75)] {
            let z = propagate(&PropagationConfig::gnn_lf(alpha, mu), &ops, &h).unwrap();
            assert!(z.max_abs_diff(&h).unwrap() < 1e-14);
        }
    }

    #[test]
    fn ppnp_k2() {
        // 0.5 (I − 0.5Â)⁻¹ e0 with Â = ½𝟙𝟙ᵀ
        let z = propagate(&PropagationConfig::ppnp(0.5), &k2(), &e0()).unwrap();
        assert!((z[(0, 0)] - 0.75).abs() < 1e-12);
        assert!((z[(1, 0)] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn sgc_one_step_k2() {
        let z = propagate(&PropagationConfig::sgc(1), &k2(), &e0()).unwrap();
        assert_eq!(z.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn gc_first_order_and_exact() {
        let ops = k2();
        let first = propagate(&PropagationConfig::gc_one_layer(), &ops, &e0()).unwrap();
        assert_eq!(first.as_slice(), &[0.5, 0.5]);
        let exact = propagate(
            &PropagationConfig::gc_one_layer().exact_gc(true),
            &ops,
            &e0(),
        )
        .unwrap();
        // (I + L̃)⁻¹ e0 = [0.75, 0.25]
        assert!((exact[(0, 0)] - 0.75).abs() < 1e-12 && (exact[(1, 0)] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn appnp_alpha_one_is_identity() {
        let ops = normalize(&build_graph(3, &[(0, 1), (1, 2)]).unwrap());
        let h = DenseMatrix::from_fn(3, 2, |i, j| (i + 2 * j) as f64);
        let z = propagate(&PropagationConfig::appnp(1.0, 7), &ops, &h).unwrap();
        assert_eq!(z, h);
    }

    #[test]
    fn zero_features_propagate_to_zero() {
        let ops = normalize(&build_graph(3, &[(0, 1), (1, 2)]).unwrap());
        let h = DenseMatrix::zeros(3, 2);
        for cfg in [
            PropagationConfig::gnn_lf(0.2, 0.6),
            PropagationConfig::gnn_hf(0.2, 0.6).iter(4),
            PropagationConfig::jknet_fixed(2.0),
        ] {
            assert_eq!(propagate(&cfg, &ops, &h).unwrap(), h);
        }
    }

    #[test]
    fn system_matrices_match_written_closed_forms() {
        let (a, mu, beta) = (0.2, 0.7, 0.4);
        let lf = PropagationConfig::gnn_lf(a, mu).system_matrix();
        assert!((lf.identity - (mu + 1.0 / a - 1.0)).abs() < 1e-14);
        assert!((lf.a_hat - (2.0 - mu - 1.0 / a)).abs() < 1e-14);
        let hf = PropagationConfig::gnn_hf(a, beta).system_matrix();
        assert!((hf.identity - (beta + 1.0 / a)).abs() < 1e-14);
        assert!((hf.a_hat - (1.0 - beta - 1.0 / a)).abs() < 1e-14);
        let jk = PropagationConfig::jknet_fixed(1.5).system_matrix();
        assert_eq!((jk.identity, jk.a_hat), (2.5, -1.5));
    }

    #[test]
    fn shape_and_config_errors() {
        let ops = k2();
        let bad = DenseMatrix::zeros(3, 1);
        assert!(matches!(
            propagate(&PropagationConfig::ppnp(0.5), &ops, &bad),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            propagate(&PropagationConfig::ppnp(2.0), &ops, &e0()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn jknet_weights() {
        assert_eq!(
            jknet_series_weights(1.0, 3).unwrap(),
            vec![0.5, 0.25, 0.125]
        );
        let total: f64 = jknet_series_weights(1.0, 200).unwrap().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(jknet_series_weights(0.0, 3).is_err());
        assert!(jknet_series_weights(-1.0, 3).is_err());
        let d = dagnn_series_weights(1.0, 2).unwrap();
        assert_eq!(d, vec![0.5, 0.25, 0.125]);
    }

    #[test]
    fn contraction_ratios() {
        let r = PropagationConfig::gnn_lf(0.5, 0.5)
            .contraction_ratio()
            .unwrap();
        assert!((r - 1.0 / 3.0).abs() < 1e-15);
        let r = PropagationConfig::gnn_hf(0.5, 1.0)
            .contraction_ratio()
            .unwrap();
        assert!((r - 2.0 / 3.0).abs() < 1e-15);
        let r = PropagationConfig::appnp(0.1, 5)
            .contraction_ratio()
            .unwrap();
        assert!((r - 0.9).abs() < 1e-15);
    }
}
