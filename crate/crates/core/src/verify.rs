//! Numerical self-checks over a graph: stationarity of closed solutions,
//! geometric convergence of iterative forms, coefficient tables against the
//! symbolic expansion, and reductions between models.

use serde::Serialize;

use crate::error::Result;
use crate::graph::{build_graph, normalize, Graph, NormalizedOperators};
use crate::numerics::{DenseMatrix, Rng};
use crate::propagation::{
    envelope_constant, objective_gradient, propagate, verify_convergence, ConvergenceReport, Mode,
    Model, PropagationConfig,
};
use crate::spectral::{closed_coefficients, compare_with_oracle, COEFFICIENT_TOLERANCE};

pub const SCHEMA_VERSION: u32 = 1;

pub const DEFAULT_DEPTHS: [usize; 6] = [1, 2, 5, 10, 20, 50];

/// Gradient norm at the closed solution relative to the norm at `H`.
pub const STATIONARITY_TOLERANCE: f64 = 1e-8;

/// Allowed factor above the geometric envelope.
pub const ENVELOPE_FACTOR: f64 = 10.0;

/// Errors below this are at the reference solver's accuracy and not
/// compared against the envelope.
pub const ERROR_FLOOR: f64 = 1e-11;

pub const REDUCTION_TOLERANCE: f64 = 1e-10;

/// Largest order used for coefficient checks.
pub const COEFFICIENT_MAX_ORDER: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub depths: Vec<usize>,
    /// Perturbs one GNN-LF coefficient so the coefficient check must fail.
    pub inject_coefficient_error: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            depths: DEFAULT_DEPTHS.to_vec(),
            inject_coefficient_error: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// The measured quantity compared against `tolerance`.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn new(name: impl Into<String>, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: value <= tolerance,
            value,
            tolerance,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceCurve {
    pub model: Model,
    pub alpha: f64,
    pub mu: f64,
    pub beta: f64,
    pub contraction_ratio: f64,
    pub envelope_constant: f64,
    pub points: Vec<ConvergenceReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub num_nodes: usize,
    pub num_edges: usize,
    pub checks: Vec<CheckResult>,
    pub convergence: Vec<ConvergenceCurve>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Erdős–Rényi graph with `n` nodes and edge probability `p`, plus an
/// `n × f` standard normal feature matrix.
pub fn random_instance(seed: u64, n: usize, p: f64, f: usize) -> Result<(Graph, DenseMatrix)> {
    let mut rng = Rng::child(seed, 0);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.bernoulli(p) {
                edges.push((u, v));
            }
        }
    }
    let graph = build_graph(n, &edges)?;
    let mut rng = Rng::child(seed, 1);
    let h = DenseMatrix::from_fn(n, f, |_, _| rng.normal());
    Ok((graph, h))
}

/// Models whose closed form is checked for stationarity.
pub fn stationarity_models() -> Vec<PropagationConfig> {
    vec![
        PropagationConfig::ppnp(0.1),
        PropagationConfig::jknet_fixed(1.5),
        PropagationConfig::dagnn_fixed(4.0),
        PropagationConfig::gnn_lf(0.1, 0.7),
        PropagationConfig::gnn_hf(0.1, 0.5),
    ]
}

/// Models whose iterative form is checked against the closed form.
pub fn convergence_models() -> Vec<PropagationConfig> {
    vec![
        PropagationConfig::appnp(0.1, 10),
        PropagationConfig::gnn_lf(0.1, 0.7),
        PropagationConfig::gnn_hf(0.1, 0.5),
        PropagationConfig::gnn_lf(0.5, 0.5),
        PropagationConfig::gnn_hf(0.3, 1.0),
    ]
}

/// Models with closed coefficient formulas.
pub fn coefficient_models() -> Vec<PropagationConfig> {
    vec![
        PropagationConfig::sgc(1),
        PropagationConfig::gc_one_layer(),
        PropagationConfig::ppnp(0.1),
        PropagationConfig::appnp(0.5, 1),
        PropagationConfig::jknet_fixed(1.5),
        PropagationConfig::dagnn_fixed(4.0),
        PropagationConfig::gnn_lf(0.1, 0.7),
        PropagationConfig::gnn_hf(0.1, 0.5),
    ]
}

pub fn stationarity_ratio(
    cfg: &PropagationConfig,
    ops: &NormalizedOperators,
    h: &DenseMatrix,
) -> Result<f64> {
    let closed = cfg.with_mode(Mode::Closed);
    let z = propagate(&closed, ops, h)?;
    let at_z = objective_gradient(&closed, ops, &z, h)?.frobenius_norm();
    let at_h = objective_gradient(&closed, ops, h, h)?.frobenius_norm();
    Ok(if at_h == 0.0 { at_z } else { at_z / at_h })
}

/// Largest error above `ENVELOPE_FACTOR · C · ratio^K` (as a multiple of the
/// envelope); values `≤ 1` pass.
fn envelope_excess(points: &[ConvergenceReport], c: f64) -> f64 {
    points
        .iter()
        .filter(|p| p.relative_error > ERROR_FLOOR)
        .map(|p| {
            p.relative_error
                / (ENVELOPE_FACTOR * c * p.contraction_ratio.powi(p.depth_checked as i32))
        })
        .fold(0.0, f64::max)
}

pub fn reduction_pairs() -> Vec<(&'static str, PropagationConfig, PropagationConfig)> {
    let alpha = 0.15;
    let ppnp = PropagationConfig::ppnp(alpha);
    vec![
        (
            "gnn-lf-mu-1",
            PropagationConfig::gnn_lf(alpha, 1.0).allow_boundary(true),
            ppnp,
        ),
        (
            "gnn-hf-beta-0",
            PropagationConfig::gnn_hf(alpha, 0.0).allow_boundary(true),
            ppnp,
        ),
        (
            "dagnn-fixed-xi",
            PropagationConfig::dagnn_fixed(1.0 / alpha - 1.0).closed(),
            ppnp,
        ),
    ]
}

pub fn reduction_error(
    a: &PropagationConfig,
    b: &PropagationConfig,
    ops: &NormalizedOperators,
    h: &DenseMatrix,
) -> Result<f64> {
    let za = propagate(&a.with_mode(Mode::Closed), ops, h)?;
    let zb = propagate(&b.with_mode(Mode::Closed), ops, h)?;
    za.relative_error(&zb)
}

/// Runs every check on `graph` with features `h`.
pub fn run_battery(graph: &Graph, h: &DenseMatrix, opts: &VerifyOptions) -> Result<VerifyReport> {
    let ops = normalize(graph);
    let mut checks = Vec::new();

    for cfg in stationarity_models() {
        let ratio = stationarity_ratio(&cfg, &ops, h)?;
        checks.push(CheckResult::new(
            format!("stationarity/{}", cfg.model()),
            ratio,
            STATIONARITY_TOLERANCE,
            "gradient norm at the closed solution relative to the norm at H",
        ));
    }

    let mut convergence = Vec::new();
    let mut depths = opts.depths.clone();
    depths.sort_unstable();
    depths.dedup();
    for cfg in convergence_models() {
        let mut with_start = depths.clone();
        if with_start.first() != Some(&0) {
            with_start.insert(0, 0);
        }
        let all = verify_convergence(&cfg, &ops, h, &with_start)?;
        let c = envelope_constant(&all).unwrap_or(0.0);
        let points: Vec<_> = all
            .into_iter()
            .filter(|p| depths.contains(&p.depth_checked))
            .collect();
        let excess = envelope_excess(&points, c);
        let name = format!(
            "convergence/{}(alpha={},{})",
            cfg.model(),
            cfg.alpha(),
            match cfg.model() {
                Model::GnnLf => format!("mu={}", cfg.mu()),
                Model::GnnHf => format!("beta={}", cfg.beta()),
                _ => format!("depths={}", depths.len()),
            }
        );
        checks.push(CheckResult::new(
            name,
            excess,
            1.0,
            format!(
                "worst error as a multiple of {ENVELOPE_FACTOR} x C x {:.6}^K",
                cfg.contraction_ratio().unwrap_or(f64::NAN)
            ),
        ));
        convergence.push(ConvergenceCurve {
            model: cfg.model(),
            alpha: cfg.alpha(),
            mu: cfg.mu(),
            beta: cfg.beta(),
            contraction_ratio: cfg.contraction_ratio().unwrap_or(f64::NAN),
            envelope_constant: c,
            points,
        });
    }

    for cfg in coefficient_models() {
        let mut worst: f64 = 0.0;
        let mut bad = Vec::new();
        for k in 1..=COEFFICIENT_MAX_ORDER {
            let mut table = closed_coefficients(&cfg, k)?.coefficients;
            if opts.inject_coefficient_error && cfg.model() == Model::GnnLf && k == 3 {
                table.theta[1] += 1e-3;
            }
            let cmp = compare_with_oracle(&cfg, &table)?;
            worst = worst.max(cmp.max_abs_diff);
            bad.extend(
                cmp.mismatches
                    .iter()
                    .map(|m| format!("K={k} theta_{}", m.0)),
            );
        }
        let detail = if bad.is_empty() {
            format!("orders 1..={COEFFICIENT_MAX_ORDER}")
        } else {
            format!("mismatched: {}", bad.join(", "))
        };
        checks.push(CheckResult::new(
            format!("coefficients/{}", cfg.model()),
            worst,
            COEFFICIENT_TOLERANCE,
            detail,
        ));
    }

    for (name, a, b) in reduction_pairs() {
        checks.push(CheckResult::new(
            format!("reduction/{name}"),
            reduction_error(&a, &b, &ops, h)?,
            REDUCTION_TOLERANCE,
            format!("relative distance to {}", b.model()),
        ));
    }

    Ok(VerifyReport {
        schema_version: SCHEMA_VERSION,
        num_nodes: graph.num_nodes(),
        num_edges: graph.num_edges(),
        checks,
        convergence,
    })
}
