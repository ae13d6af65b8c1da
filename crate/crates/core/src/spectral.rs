//! Polynomial filter coefficients and frequency responses.
//!
//! A depth-`K` propagation is a polynomial in `Â`, equivalently in
//! `L̃ = I − Â`: `Z = (Σ θ_k L̃^k) H`. Two independent routes produce the
//! `L̃`-basis coefficients:
//!
//! * the symbolic route, which runs the model's recurrence on formal
//!   polynomials in `Â` ([`expand_iterate`], [`expand_series`]) and then
//!   re-expands binomially ([`to_laplacian_basis`]);
//! * closed formulas per model ([`closed_coefficients`]).
//!
//! The symbolic route is the reference. The GNN-LF/GNN-HF formulas as usually
//! printed disagree with it at `θ_0` and at the interior coefficients;
//! [`closed_coefficients`] returns the corrected values together with the
//! as-printed ones and a per-coefficient list of the differences.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::propagation::{dagnn_series_weights, jknet_series_weights, Model, PropagationConfig};

/// Largest order for which coefficients are expanded exactly.
pub const MAX_ORDER: usize = 64;

/// Mismatches smaller than this are treated as rounding.
pub const COEFFICIENT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Basis {
    /// Coefficients of `L̃^k`.
    LaplacianMonomial,
    /// Coefficients of `Â^k`.
    AhatMonomial,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterCoefficients {
    pub order: usize,
    pub theta: Vec<f64>,
    pub basis: Basis,
}

impl FilterCoefficients {
    pub fn new(theta: Vec<f64>, basis: Basis) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::config("a filter needs at least one coefficient"));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::config("filter coefficients must be finite"));
        }
        Ok(Self {
            order: theta.len() - 1,
            theta,
            basis,
        })
    }

    /// Largest absolute coefficient difference; shorter vectors are
    /// zero-padded.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let len = self.theta.len().max(other.theta.len());
        (0..len)
            .map(|k| {
                let a = self.theta.get(k).copied().unwrap_or(0.0);
                let b = other.theta.get(k).copied().unwrap_or(0.0);
                (a - b).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Exact `C(n, k)` in 128-bit integers.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn check_order(depth: usize) -> Result<()> {
    if depth > MAX_ORDER {
        return Err(Error::config(format!(
            "order {depth} exceeds the exact-expansion limit {MAX_ORDER}"
        )));
    }
    Ok(())
}

/// `c_i` such that `h·I + a·Â + l·L̃ = Σ c_i Â^i`.
fn terms_poly(h: f64, a_hat: f64, l_tilde: f64) -> [f64; 2] {
    [h + l_tilde, a_hat - l_tilde]
}

fn poly_add_scaled(acc: &mut [f64], p: &[f64], scale: f64) {
    for (a, b) in acc.iter_mut().zip(p) {
        *a += scale * b;
    }
}

/// Runs the model's recurrence on formal polynomials in `Â`, starting from
/// `start` (`None` means `Z⁽⁰⁾ = 0`).
fn symbolic_recurrence(
    cfg: &PropagationConfig,
    depth: usize,
    zero_start: bool,
) -> Result<Vec<f64>> {
    let rec = cfg
        .recurrence()
        .ok_or_else(|| Error::config(format!("{} has no recurrence to expand", cfg.model())))?;
    let init = terms_poly(rec.init.h, rec.init.a_hat_h, rec.init.l_tilde_h);
    let inject = terms_poly(rec.inject.h, rec.inject.a_hat_h, rec.inject.l_tilde_h);
    // degree can reach depth + 1 before the top term is known to vanish
    let mut z = vec![0.0; depth + 2];
    if !zero_start {
        poly_add_scaled(&mut z, &init, 1.0);
    }
    for _ in 0..depth {
        let mut next = vec![0.0; depth + 2];
        for i in 0..depth + 1 {
            next[i + 1] = rec.contraction * z[i];
        }
        poly_add_scaled(&mut next, &inject, 1.0);
        z = next;
    }
    let degree = z.iter().rposition(|&c| c != 0.0).unwrap_or(0).max(depth);
    z.truncate(degree + 1);
    Ok(z)
}

/// Exact `Â`-monomial coefficients of the depth-`K` iterate `Z⁽ᴷ⁾`, including
/// the model's initialization.
pub fn expand_iterate(cfg: &PropagationConfig, depth: usize) -> Result<FilterCoefficients> {
    check_order(depth)?;
    let c = match cfg.model() {
        Model::JknetFixed => {
            let mut c = vec![0.0];
            c.extend(jknet_series_weights(cfg.xi(), depth.max(1))?);
            c
        }
        Model::DagnnFixed => dagnn_series_weights(cfg.xi(), depth)?,
        Model::GcOneLayer if !cfg.is_exact_gc() => vec![0.0, 1.0],
        Model::GcOneLayer => {
            return Err(Error::config(
                "the exact one-layer convolution is not a finite polynomial",
            ))
        }
        _ => symbolic_recurrence(cfg, depth, false)?,
    };
    FilterCoefficients::new(c, Basis::AhatMonomial)
}

/// Coefficients of the depth-`K` truncation of the model's infinite series,
/// i.e. the iterate with the decaying initial-state term dropped. This is
/// the recurrence run from `Z⁽⁰⁾ = 0`; for SGC, which has no series, it is the
/// iterate itself.
pub fn expand_series(cfg: &PropagationConfig, depth: usize) -> Result<FilterCoefficients> {
    check_order(depth)?;
    match cfg.model() {
        Model::Sgc | Model::JknetFixed | Model::DagnnFixed | Model::GcOneLayer => {
            expand_iterate(cfg, depth)
        }
        _ => FilterCoefficients::new(symbolic_recurrence(cfg, depth, true)?, Basis::AhatMonomial),
    }
}

/// Re-expands `Σ c_i Â^i` as `Σ θ_k L̃^k` via `Â = I − L̃`.
pub fn to_laplacian_basis(c: &FilterCoefficients) -> Result<FilterCoefficients> {
    if c.basis != Basis::AhatMonomial {
        return Err(Error::config(
            "expected coefficients in the Â-monomial basis",
        ));
    }
    check_order(c.order)?;
    let theta = (0..=c.order)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * (k..=c.order)
                .map(|i| c.theta[i] * binomial(i, k) as f64)
                .sum::<f64>()
        })
        .collect();
    FilterCoefficients::new(theta, Basis::LaplacianMonomial)
}

/// Symbolic reference: [`expand_series`] followed by [`to_laplacian_basis`].
pub fn oracle_coefficients(cfg: &PropagationConfig, depth: usize) -> Result<FilterCoefficients> {
    to_laplacian_basis(&expand_series(cfg, depth)?)
}

/// One coefficient where the printed formula and the corrected value differ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Discrepancy {
    pub index: usize,
    pub as_printed: f64,
    pub corrected: f64,
}

/// Closed-formula filter coefficients for one model and order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedCoefficients {
    /// Corrected values; these agree with the symbolic route.
    pub coefficients: FilterCoefficients,
    /// The formulas exactly as commonly printed.
    pub as_printed: Vec<f64>,
    pub discrepancies: Vec<Discrepancy>,
}

/// Three-part coefficient structure shared by GNN-LF and GNN-HF:
/// `Â`-coefficients `c₀ = head`, `c_i = δ_i = scale·r^i` for `0 < i < K`, and
/// `c_K = tail`.
struct ThreePart {
    head: f64,
    scale: f64,
    ratio: f64,
    tail: f64,
}

impl ThreePart {
    fn delta(&self, j: usize) -> f64 {
        self.scale * self.ratio.powi(j as i32)
    }

    fn corrected(&self, k_max: usize) -> Vec<f64> {
        (0..=k_max)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let head = if k == 0 { self.head } else { 0.0 };
                let interior: f64 = (k.max(1)..k_max)
                    .map(|j| self.delta(j) * binomial(j, k) as f64)
                    .sum();
                head + sign * (interior + self.tail * binomial(k_max, k) as f64)
            })
            .collect()
    }

    /// θ₀ carries an extra factor `r` on its leading term, and the interior
    /// sums run to `j = K` with `δ_K` where the boundary term belongs.
    fn as_printed(&self, k_max: usize) -> Vec<f64> {
        (0..=k_max)
            .map(|k| {
                if k == 0 {
                    let deltas: f64 = (1..k_max).map(|j| self.delta(j)).sum();
                    self.head * self.ratio + self.tail + deltas
                } else if k == k_max {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    self.tail * sign
                } else {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    (k..=k_max)
                        .map(|j| self.delta(j) * sign * binomial(j, k) as f64)
                        .sum()
                }
            })
            .collect()
    }
}

fn lf_parts(alpha: f64, mu: f64, depth: usize) -> ThreePart {
    let d1 = 1.0 + alpha * mu - alpha;
    let d2 = 1.0 + alpha * mu - 2.0 * alpha;
    let ratio = d2 / d1;
    ThreePart {
        head: alpha * mu / d1,
        scale: alpha * mu / d1 + (alpha - alpha * mu) / d2,
        ratio,
        tail: (alpha - alpha * mu) * d2.powi(depth as i32 - 1) / d1.powi(depth as i32),
    }
}

fn hf_parts(alpha: f64, beta: f64, depth: usize) -> ThreePart {
    let ab = alpha * beta;
    let ratio = (ab - alpha + 1.0) / (ab + 1.0);
    ThreePart {
        head: alpha * (beta + 1.0) / (ab + 1.0),
        scale: alpha * (beta + 1.0) / (ab + 1.0) - ab / (ab - alpha + 1.0),
        ratio,
        tail: -ab * (ab - alpha + 1.0).powi(depth as i32 - 1) / (ab + 1.0).powi(depth as i32),
    }
}

/// Closed-formula `L̃`-coefficients of the order-`K` filter. The one-layer
/// convolution is padded with zeros up to order `K`.
pub fn closed_coefficients(cfg: &PropagationConfig, depth: usize) -> Result<ClosedCoefficients> {
    cfg.with_depth(depth.max(1)).validate()?;
    if depth == 0 {
        return Err(Error::config("filter order must be at least 1"));
    }
    check_order(depth)?;
    let sign = |k: usize| if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    let (corrected, as_printed) = match cfg.model() {
        Model::Sgc => {
            let theta: Vec<f64> = (0..=depth)
                .map(|k| sign(k) * binomial(depth, k) as f64)
                .collect();
            (theta.clone(), theta)
        }
        Model::Ppnp | Model::Appnp => {
            let a = cfg.alpha();
            let theta: Vec<f64> = (0..=depth)
                .map(|k| {
                    a * (k..depth)
                        .map(|i| (1.0 - a).powi(i as i32) * sign(k) * binomial(i, k) as f64)
                        .sum::<f64>()
                })
                .collect();
            (theta.clone(), theta)
        }
        Model::GnnLf => {
            let parts = lf_parts(cfg.alpha(), cfg.mu(), depth);
            (parts.corrected(depth), parts.as_printed(depth))
        }
        Model::GnnHf => {
            let parts = hf_parts(cfg.alpha(), cfg.beta(), depth);
            (parts.corrected(depth), parts.as_printed(depth))
        }
        Model::JknetFixed | Model::DagnnFixed => {
            // c_i = ξ^{i−1}/(1+ξ)^i for i ≥ 1 (JKNet) or ξ^i/(1+ξ)^{i+1} for i ≥ 0
            let xi = cfg.xi();
            let shift = if cfg.model() == Model::JknetFixed {
                1
            } else {
                0
            };
            let c = |i: usize| {
                if i < shift {
                    0.0
                } else {
                    xi.powi((i - shift) as i32) / (1.0 + xi).powi((i + 1 - shift) as i32)
                }
            };
            let theta: Vec<f64> = (0..=depth)
                .map(|k| {
                    sign(k)
                        * (k..=depth)
                            .map(|i| c(i) * binomial(i, k) as f64)
                            .sum::<f64>()
                })
                .collect();
            (theta.clone(), theta)
        }
        Model::GcOneLayer if !cfg.is_exact_gc() => {
            let mut theta = vec![0.0; depth + 1];
            theta[0] = 1.0;
            theta[1] = -1.0;
            (theta.clone(), theta)
        }
        Model::GcOneLayer => {
            return Err(Error::config(
                "the exact one-layer convolution is not a finite polynomial",
            ));
        }
    };
    let discrepancies = corrected
        .iter()
        .zip(&as_printed)
        .enumerate()
        .filter(|(_, (c, p))| (*c - *p).abs() > COEFFICIENT_TOLERANCE)
        .map(|(index, (&corrected, &as_printed))| Discrepancy {
            index,
            as_printed,
            corrected,
        })
        .collect();
    Ok(ClosedCoefficients {
        coefficients: FilterCoefficients::new(corrected, Basis::LaplacianMonomial)?,
        as_printed,
        discrepancies,
    })
}

/// Per-coefficient comparison of a closed-formula table against the
/// symbolic reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleComparison {
    pub model: Model,
    pub order: usize,
    pub max_abs_diff: f64,
    /// Indices where the table differs from the reference by more than
    /// [`COEFFICIENT_TOLERANCE`], with `(table, reference)` values.
    pub mismatches: Vec<(usize, f64, f64)>,
}

impl OracleComparison {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

pub fn compare_with_oracle(
    cfg: &PropagationConfig,
    table: &FilterCoefficients,
) -> Result<OracleComparison> {
    let oracle = oracle_coefficients(cfg, table.order)?;
    let mismatches = (0..=table.order.max(oracle.order))
        .filter_map(|k| {
            let t = table.theta.get(k).copied().unwrap_or(0.0);
            let o = oracle.theta.get(k).copied().unwrap_or(0.0);
            ((t - o).abs() > COEFFICIENT_TOLERANCE).then_some((k, t, o))
        })
        .collect();
    Ok(OracleComparison {
        model: cfg.model(),
        order: table.order,
        max_abs_diff: table.max_abs_diff(&oracle),
        mismatches,
    })
}

/// `h(λ) = Σ θ_k λ^k` (Laplacian basis) or `Σ c_k (1 − λ)^k` (`Â` basis), by
/// Horner's rule.
pub fn polynomial_response(theta: &FilterCoefficients, lambda: f64) -> f64 {
    let x = match theta.basis {
        Basis::LaplacianMonomial => lambda,
        Basis::AhatMonomial => 1.0 - lambda,
    };
    theta.theta.iter().rev().fold(0.0, |acc, &t| acc * x + t)
}

/// Exact infinite-depth gain at Laplacian eigenvalue `λ`, obtained by
/// substituting `Â → 1 − λ` into the closed form.
///
/// Each response is written as `num(λ) / (1 + c·λ)` with `num(0) = 1`, so the
/// DC gain is exactly one in floating point.
pub fn rational_response(cfg: &PropagationConfig, lambda: f64) -> Result<f64> {
    let value = match cfg.model() {
        Model::Ppnp | Model::Appnp | Model::DagnnFixed => 1.0 / (1.0 + cfg.xi() * lambda),
        Model::JknetFixed => (1.0 - lambda) / (1.0 + cfg.xi() * lambda),
        Model::GcOneLayer if cfg.is_exact_gc() => 1.0 / (1.0 + lambda),
        Model::GcOneLayer => 1.0 - lambda,
        Model::GnnLf => {
            let (a, mu) = (cfg.alpha(), cfg.mu());
            (1.0 - (1.0 - mu) * lambda) / (1.0 + (mu + 1.0 / a - 2.0) * lambda)
        }
        Model::GnnHf => {
            let (a, b) = (cfg.alpha(), cfg.beta());
            (1.0 + b * lambda) / (1.0 + (b + 1.0 / a - 1.0) * lambda)
        }
        Model::Sgc => {
            return Err(Error::config("sgc has no finite infinite-depth response"));
        }
    };
    Ok(value)
}

/// `λ ∈ [0, 2]` at step `1/steps_per_unit`, endpoints included.
pub fn lambda_grid(steps_per_unit: usize) -> Vec<f64> {
    (0..=2 * steps_per_unit)
        .map(|i| i as f64 / steps_per_unit as f64)
        .collect()
}
