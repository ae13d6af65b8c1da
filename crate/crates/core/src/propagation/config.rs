use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Propagation mechanisms expressible as minimizers of
/// `ζ‖F₁Z − F₂H‖²_F + ξ·tr(ZᵀL̃Z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    /// `K` rounds of `Z ← ÂZ` (also the linearization of a `K`-layer GCN).
    Sgc,
    /// One graph convolution; `ÂH` by default, `(I + L̃)⁻¹H` when exact.
    GcOneLayer,
    Ppnp,
    Appnp,
    /// Jumping-knowledge combination with geometric layer weights.
    JknetFixed,
    /// Adaptive-depth combination with geometric retainment scores.
    DagnnFixed,
    /// Low-pass fitting kernel `μI + (1 − μ)Â`.
    GnnLf,
    /// High-pass fitting kernel `I + βL̃`.
    GnnHf,
}

impl Model {
    pub const ALL: [Model; 8] = [
        Model::Sgc,
        Model::GcOneLayer,
        Model::Ppnp,
        Model::Appnp,
        Model::JknetFixed,
        Model::DagnnFixed,
        Model::GnnLf,
        Model::GnnHf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Model::Sgc => "sgc",
            Model::GcOneLayer => "gc-one-layer",
            Model::Ppnp => "ppnp",
            Model::Appnp => "appnp",
            Model::JknetFixed => "jknet-fixed",
            Model::DagnnFixed => "dagnn-fixed",
            Model::GnnLf => "gnn-lf",
            Model::GnnHf => "gnn-hf",
        }
    }

    /// Whether ξ is derived from α (`ξ = 1/α − 1`).
    pub fn uses_teleport(self) -> bool {
        matches!(
            self,
            Model::Ppnp | Model::Appnp | Model::GnnLf | Model::GnnHf
        )
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Model::ALL
            .into_iter()
            .find(|m| m.name() == norm || (norm == "gc" && *m == Model::GcOneLayer))
            .ok_or_else(|| Error::config(format!("unknown model `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Solve the stationarity system exactly.
    Closed,
    /// Run the model's `K`-step recurrence.
    Iter,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Closed => "closed",
            Mode::Iter => "iter",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "closed" => Ok(Mode::Closed),
            "iter" | "iterative" => Ok(Mode::Iter),
            _ => Err(Error::config(format!(
                "unknown mode `{s}` (expected closed or iter)"
            ))),
        }
    }
}

/// Settings for the closed-form SPD solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Relative residual target for CG.
    pub tol: f64,
    /// CG iteration cap is `max_iter_factor · n`.
    pub max_iter_factor: usize,
    /// Largest `n` for which a dense Cholesky fallback is attempted.
    pub cholesky_limit: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter_factor: 10,
            cholesky_limit: 2000,
        }
    }
}

/// Model choice plus every hyperparameter of the unified objective.
///
/// Built through the per-model constructors, which fix ζ and derive ξ the
/// way each model requires; then refined with [`with_mode`](Self::with_mode),
/// [`with_depth`](Self::with_depth) and friends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    model: Model,
    mode: Mode,
    alpha: f64,
    mu: f64,
    beta: f64,
    xi: f64,
    zeta: f64,
    depth: usize,
    allow_boundary: bool,
    exact_gc: bool,
    solver: SolverSettings,
}

impl PropagationConfig {
    fn base(model: Model, mode: Mode) -> Self {
        Self {
            model,
            mode,
            alpha: f64::NAN,
            mu: f64::NAN,
            beta: f64::NAN,
            xi: 1.0,
            zeta: 1.0,
            depth: 10,
            allow_boundary: false,
            exact_gc: false,
            solver: SolverSettings::default(),
        }
    }

    /// `Z = Â^K H`; objective has ζ = 0, ξ = 1.
    pub fn sgc(depth: usize) -> Self {
        Self {
            zeta: 0.0,
            depth,
            ..Self::base(Model::Sgc, Mode::Iter)
        }
    }

    /// One graph convolution; ζ = ξ = 1.
    pub fn gc_one_layer() -> Self {
        Self::base(Model::GcOneLayer, Mode::Closed)
    }

    pub fn ppnp(alpha: f64) -> Self {
        Self {
            alpha,
            xi: 1.0 / alpha - 1.0,
            ..Self::base(Model::Ppnp, Mode::Closed)
        }
    }

    pub fn appnp(alpha: f64, depth: usize) -> Self {
        Self {
            alpha,
            xi: 1.0 / alpha - 1.0,
            depth,
            ..Self::base(Model::Appnp, Mode::Iter)
        }
    }

    pub fn jknet_fixed(xi: f64) -> Self {
        Self {
            xi,
            ..Self::base(Model::JknetFixed, Mode::Closed)
        }
    }

    pub fn dagnn_fixed(xi: f64) -> Self {
        Self {
            xi,
            ..Self::base(Model::DagnnFixed, Mode::Closed)
        }
    }

    pub fn gnn_lf(alpha: f64, mu: f64) -> Self {
        Self {
            alpha,
            mu,
            xi: 1.0 / alpha - 1.0,
            ..Self::base(Model::GnnLf, Mode::Closed)
        }
    }

    pub fn gnn_hf(alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            beta,
            xi: 1.0 / alpha - 1.0,
            ..Self::base(Model::GnnHf, Mode::Closed)
        }
    }

    /// Builds any model from a flat parameter set; parameters a model does
    /// not use are ignored.
    pub fn from_params(model: Model, params: ModelParams) -> Self {
        let cfg = match model {
            Model::Sgc => Self::sgc(params.depth),
            Model::GcOneLayer => Self::gc_one_layer(),
            Model::Ppnp => Self::ppnp(params.alpha),
            Model::Appnp => Self::appnp(params.alpha, params.depth),
            Model::JknetFixed => Self::jknet_fixed(params.xi),
            Model::DagnnFixed => Self::dagnn_fixed(params.xi),
            Model::GnnLf => Self::gnn_lf(params.alpha, params.mu),
            Model::GnnHf => Self::gnn_hf(params.alpha, params.beta),
        };
        cfg.with_depth(params.depth)
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    /// Shorthand for iterative mode at the given depth.
    pub fn iter(self, depth: usize) -> Self {
        self.with_mode(Mode::Iter).with_depth(depth)
    }

    pub fn closed(self) -> Self {
        self.with_mode(Mode::Closed)
    }

    /// Admits the excluded endpoints μ = 1 (GNN-LF) and β = 0 (GNN-HF).
    pub fn allow_boundary(mut self, allow: bool) -> Self {
        self.allow_boundary = allow;
        self
    }

    /// Selects `(I + L̃)⁻¹H` instead of the first-order `ÂH` for the one-layer
    /// graph convolution.
    pub fn exact_gc(mut self, exact: bool) -> Self {
        self.exact_gc = exact;
        self
    }

    pub fn with_solver(mut self, solver: SolverSettings) -> Self {
        self.solver = solver;
        self
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn is_exact_gc(&self) -> bool {
        self.exact_gc
    }

    pub fn solver(&self) -> SolverSettings {
        self.solver
    }

    pub fn params(&self) -> ModelParams {
        ModelParams {
            alpha: self.alpha,
            mu: self.mu,
            beta: self.beta,
            xi: self.xi,
            depth: self.depth,
        }
    }

    /// Checks the parameter ranges under which the model's objective is
    /// strictly convex and its recurrence contracts.
    pub fn validate(&self) -> Result<()> {
        if self.mode == Mode::Iter && self.depth == 0 && self.model != Model::GcOneLayer {
            return Err(Error::config("iterative propagation needs depth >= 1"));
        }
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!(
                    "{name} must be a finite number, got {v}"
                )))
            }
        };
        match self.model {
            Model::Sgc => {
                if self.mode == Mode::Closed {
                    return Err(Error::config(
                        "sgc only has an iterative form (its objective has no unique minimizer)",
                    ));
                }
            }
            Model::GcOneLayer => {}
            Model::Ppnp | Model::Appnp => {
                finite("alpha", self.alpha)?;
                if !(self.alpha > 0.0 && self.alpha <= 1.0) {
                    return Err(Error::config(format!(
                        "alpha must lie in (0, 1] for {}, got {}",
                        self.model, self.alpha
                    )));
                }
            }
            Model::JknetFixed | Model::DagnnFixed => {
                finite("xi", self.xi)?;
                if self.xi <= 0.0 {
                    return Err(Error::config(format!(
                        "xi must lie in (0, inf) for {}, got {}",
                        self.model, self.xi
                    )));
                }
            }
            Model::GnnLf => {
                finite("alpha", self.alpha)?;
                finite("mu", self.mu)?;
                if !(self.alpha > 0.0 && self.alpha < 2.0 / 3.0) {
                    return Err(Error::config(format!(
                        "alpha must lie in (0, 2/3) for gnn-lf, got {}",
                        self.alpha
                    )));
                }
                let mu_ok =
                    (0.5..1.0).contains(&self.mu) || (self.allow_boundary && self.mu == 1.0);
                if !mu_ok {
                    return Err(Error::config(format!(
                        "mu must lie in [1/2, 1) for gnn-lf, got {}",
                        self.mu
                    )));
                }
                if self.mu == 1.0 {
                    log::debug!("gnn-lf evaluated at the boundary mu = 1");
                }
            }
            Model::GnnHf => {
                finite("alpha", self.alpha)?;
                finite("beta", self.beta)?;
                if !(self.alpha > 0.0 && self.alpha <= 1.0) {
                    return Err(Error::config(format!(
                        "alpha must lie in (0, 1] for gnn-hf, got {}",
                        self.alpha
                    )));
                }
                let beta_ok = self.beta > 0.0 || (self.allow_boundary && self.beta == 0.0);
                if !beta_ok {
                    return Err(Error::config(format!(
                        "beta must lie in (0, inf) for gnn-hf, got {}",
                        self.beta
                    )));
                }
                if self.beta == 0.0 {
                    log::debug!("gnn-hf evaluated at the boundary beta = 0");
                }
            }
        }
        Ok(())
    }
}

/// Flat parameter bag used by the CLI and the spectral module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub mu: f64,
    pub beta: f64,
    pub xi: f64,
    pub depth: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            mu: 0.7,
            beta: 0.5,
            xi: 1.0,
            depth: 10,
        }
    }
}
