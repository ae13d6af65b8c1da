use serde::Serialize;

use super::PropagationConfig;
use crate::error::{Error, Result};
use crate::graph::NormalizedOperators;
use crate::numerics::DenseMatrix;

/// The two parts of the unified objective at one point `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveValue {
    pub fit: f64,
    pub reg: f64,
    pub total: f64,
}

fn check_shapes(ops: &NormalizedOperators, z: &DenseMatrix, h: &DenseMatrix) -> Result<()> {
    if z.shape() != h.shape() || z.num_rows() != ops.num_nodes() {
        return Err(Error::shape(format!(
            "objective needs Z and H of shape {}xf, got {:?} and {:?}",
            ops.num_nodes(),
            z.shape(),
            h.shape()
        )));
    }
    Ok(())
}

/// `fit = ζ·tr((Z − T)ᵀ M (Z − T))`, `reg = ξ·tr(Zᵀ L̃ Z)`.
///
/// The square-root kernels never appear: the fitting term is evaluated as a
/// quadratic form in `M = F₁ᵀF₁`.
pub fn objective_value(
    cfg: &PropagationConfig,
    ops: &NormalizedOperators,
    z: &DenseMatrix,
    h: &DenseMatrix,
) -> Result<ObjectiveValue> {
    check_shapes(ops, z, h)?;
    let (kernel, target) = cfg.fit_kernel();
    let fit = if cfg.zeta() == 0.0 {
        0.0
    } else {
        let residual = z.sub(&target.apply(ops, h)?)?;
        cfg.zeta() * residual.dot(&kernel.apply(ops, &residual)?)?
    };
    let reg = cfg.xi() * z.dot(&ops.apply_l_tilde(z)?)?;
    Ok(ObjectiveValue {
        fit,
        reg,
        total: fit + reg,
    })
}

/// `∂O/∂Z = 2ζ·M(Z − T) + 2ξ·L̃Z`.
pub fn objective_gradient(
    cfg: &PropagationConfig,
    ops: &NormalizedOperators,
    z: &DenseMatrix,
    h: &DenseMatrix,
) -> Result<DenseMatrix> {
    check_shapes(ops, z, h)?;
    let mut grad = ops.apply_l_tilde(z)?;
    grad.scale(2.0 * cfg.xi());
    if cfg.zeta() != 0.0 {
        let (kernel, target) = cfg.fit_kernel();
        let residual = z.sub(&target.apply(ops, h)?)?;
        grad.axpy(2.0 * cfg.zeta(), &kernel.apply(ops, &residual)?)?;
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, normalize};
    use crate::numerics::Rng;
    use crate::propagation::propagate;

    fn k2() -> NormalizedOperators {
        normalize(&build_graph(2, &[(0, 1)]).unwrap())
    }

    #[test]
    fn empty_graph_at_h_is_zero() {
        let ops = normalize(&build_graph(3, &[]).unwrap());
        let h = DenseMatrix::from_fn(3, 2, |i, j| (i * j) as f64 + 0.5);
        let cfg = PropagationConfig::gnn_lf(0.3, 0.6);
        let v = objective_value(&cfg, &ops, &h, &h).unwrap();
        assert_eq!((v.fit, v.reg, v.total), (0.0, 0.0, 0.0));
        let g = objective_gradient(&cfg, &ops, &h, &h).unwrap();
        assert_eq!(g, DenseMatrix::zeros(3, 2));
    }

    #[test]
    fn ppnp_values_on_k2() {
        let ops = k2();
        let cfg = PropagationConfig::ppnp(0.5);
        let h = DenseMatrix::column_vector(vec![1.0, 0.0]);
        let at_h = objective_value(&cfg, &ops, &h, &h).unwrap();
        assert!((at_h.fit).abs() < 1e-15);
        assert!((at_h.reg - 0.5).abs() < 1e-15);
        assert!((at_h.total - 0.5).abs() < 1e-15);
        let z = DenseMatrix::column_vector(vec![0.75, 0.25]);
        let at_z = objective_value(&cfg, &ops, &z, &h).unwrap();
        assert!((at_z.fit - 0.125).abs() < 1e-15);
        assert!((at_z.reg - 0.125).abs() < 1e-15);
        assert!((at_z.total - 0.25).abs() < 1e-15);
    }

    #[test]
    fn sgc_has_no_fitting_term() {
        let ops = k2();
        let h = DenseMatrix::column_vector(vec![1.0, 0.0]);
        let z = DenseMatrix::column_vector(vec![3.0, -1.0]);
        let v = objective_value(&PropagationConfig::sgc(2), &ops, &z, &h).unwrap();
        assert_eq!(v.fit, 0.0);
        assert!(v.reg > 0.0);
    }

    #[test]
    fn gradient_vanishes_at_closed_solution() {
        let g = build_graph(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 3)]).unwrap();
        let ops = normalize(&g);
        let mut rng = Rng::new(9);
        let h = DenseMatrix::from_fn(6, 2, |_, _| rng.normal());
        let cfg = PropagationConfig::gnn_hf(0.3, 0.8);
        let z = propagate(&cfg, &ops, &h).unwrap();
        let at_z = objective_gradient(&cfg, &ops, &z, &h)
            .unwrap()
            .frobenius_norm();
        let at_h = objective_gradient(&cfg, &ops, &h, &h)
            .unwrap()
            .frobenius_norm();
        assert!(at_z <= 1e-8 * at_h, "{at_z} vs {at_h}");
    }

    #[test]
    fn gradient_matches_central_differences() {
        let g = build_graph(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (1, 4)]).unwrap();
        let ops = normalize(&g);
        let mut rng = Rng::new(4);
        let h = DenseMatrix::from_fn(5, 2, |_, _| rng.normal());
        let z = DenseMatrix::from_fn(5, 2, |_, _| rng.normal());
        for cfg in [
            PropagationConfig::gnn_lf(0.2, 0.7),
            PropagationConfig::gnn_hf(0.4, 1.3),
            PropagationConfig::jknet_fixed(0.8),
            PropagationConfig::ppnp(0.15),
        ] {
            let grad = objective_gradient(&cfg, &ops, &z, &h).unwrap();
            let step = 1e-6;
            for i in 0..5 {
                for j in 0..2 {
                    let mut zp = z.clone();
                    zp[(i, j)] += step;
                    let mut zm = z.clone();
                    zm[(i, j)] -= step;
                    let fd = (objective_value(&cfg, &ops, &zp, &h).unwrap().total
                        - objective_value(&cfg, &ops, &zm, &h).unwrap().total)
                        / (2.0 * step);
                    let rel = (fd - grad[(i, j)]).abs() / grad[(i, j)].abs().max(1e-8);
                    assert!(
                        rel < 1e-4,
                        "{:?} ({i},{j}): fd {fd} vs {}",
                        cfg.model(),
                        grad[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn shape_mismatch() {
        let ops = k2();
        let z = DenseMatrix::zeros(2, 1);
        let h = DenseMatrix::zeros(2, 2);
        assert!(matches!(
            objective_value(&PropagationConfig::ppnp(0.5), &ops, &z, &h),
            Err(Error::Shape(_))
        ));
        assert!(objective_gradient(&PropagationConfig::ppnp(0.5), &ops, &z, &h).is_err());
    }
}
