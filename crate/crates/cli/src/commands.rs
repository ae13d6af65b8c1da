use std::collections::HashSet;

use anyhow::{anyhow, Context};
use gnn_unify::nn::trial_seed;
use gnn_unify::propagation::{Mode, Model, PropagationConfig};
use gnn_unify::spectral::{
    closed_coefficients, lambda_grid, polynomial_response, rational_response,
};
use gnn_unify::verify::{
    random_instance, run_battery, VerifyOptions, VerifyReport, SCHEMA_VERSION,
};
use gnn_unify::{
    generate_sbm, load_bundle_with, train as fit, Dataset, LoadOptions, SbmConfig, TrainConfig,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::output::{fixed, mean_std, write_csv, write_json};
use crate::{
    DataArgs, Failure, FitArgs, GridArgs, ResponseKind, SpectrumArgs, SweepArgs, TrainArgs,
    VerifyArgs,
};

type Outcome = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn load(data: &DataArgs, seed: u64) -> Result<(Dataset, String), Failure> {
    if let Some(dir) = &data.bundle {
        let d = load_bundle_with(
            dir,
            LoadOptions {
                row_normalize: data.row_normalize,
            },
        )
        .map_err(|e| Failure::Run(e.into()))?;
        return Ok((d, format!("bundle:{}", dir.display())));
    }
    let name = data.sbm_preset.as_deref().unwrap_or("easy");
    let cfg = SbmConfig::preset(name)
        .ok_or_else(|| usage(format!("unknown sbm preset `{name}`")))?
        .with_seed(seed);
    let mut d = generate_sbm(&cfg)?;
    if data.row_normalize {
        d = d.row_normalized();
    }
    Ok((d, format!("sbm:{name}")))
}

fn train_config(fit: &FitArgs, propagation: PropagationConfig) -> Result<TrainConfig, Failure> {
    if fit.runs == 0 {
        return Err(usage("--runs must be at least 1"));
    }
    let cfg = TrainConfig {
        hidden: fit.hidden,
        lr: fit.lr,
        weight_decay_first_layer: fit.weight_decay,
        dropout: fit.dropout,
        patience: fit.patience,
        max_epochs: fit.max_epochs,
        seed: fit.seed,
        propagation,
    };
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, Serialize)]
struct Trial {
    run: usize,
    seed: u64,
    test_accuracy: f64,
    val_accuracy: f64,
    best_epoch: usize,
    epochs: usize,
}

/// Trains `runs` trials with child seeds of `cfg.seed`; the result order
/// does not depend on `parallel`.
fn trials(
    dataset: &Dataset,
    cfg: &TrainConfig,
    runs: usize,
    parallel: bool,
) -> Result<Vec<Trial>, Failure> {
    let one = |run: usize| -> anyhow::Result<Trial> {
        let seed = trial_seed(cfg.seed, run as u64);
        let (_, m) =
            fit(dataset, &TrainConfig { seed, ..*cfg }).with_context(|| format!("run {run}"))?;
        log::info!("run {run}: test accuracy {:.4}", m.test_accuracy);
        Ok(Trial {
            run,
            seed,
            test_accuracy: m.test_accuracy,
            val_accuracy: m.val_accuracy,
            best_epoch: m.best_epoch,
            epochs: m.epochs_run(),
        })
    };
    let out: anyhow::Result<Vec<_>> = if parallel {
        (0..runs).into_par_iter().map(one).collect()
    } else {
        (0..runs).map(one).collect()
    };
    Ok(out?)
}

fn accuracies(t: &[Trial]) -> Vec<f64> {
    t.iter().map(|t| t.test_accuracy).collect()
}

#[derive(Serialize)]
struct TrainReport<'a> {
    schema_version: u32,
    data: String,
    row_normalize: bool,
    model: Model,
    mode: Mode,
    config: &'a TrainConfig,
    runs: Vec<Trial>,
    accuracies: Vec<f64>,
    mean: f64,
    std: f64,
}

pub fn train(a: &TrainArgs) -> Outcome {
    let cfg = train_config(&a.fit, a.model.config())?;
    let (dataset, data) = load(&a.data, a.fit.seed)?;
    let runs = trials(&dataset, &cfg, a.fit.runs, a.fit.parallel)?;
    let accs = accuracies(&runs);
    let (mean, std) = mean_std(&accs);
    let report = TrainReport {
        schema_version: SCHEMA_VERSION,
        data,
        row_normalize: a.data.row_normalize,
        model: cfg.propagation.model(),
        mode: cfg.propagation.mode(),
        config: &cfg,
        runs,
        accuracies: accs,
        mean,
        std,
    };
    write_json(&a.out, &report)?;
    println!(
        "{} ({}): {:.4} ± {:.4} over {} runs",
        report.model, report.mode, mean, std, a.fit.runs
    );
    Ok(())
}

pub fn spectrum(a: &SpectrumArgs) -> Outcome {
    let cfg = a.model.config();
    cfg.validate()?;
    let order = a.order.unwrap_or(a.model.depth);
    let grid = lambda_grid(100);
    let rational = |l: f64| rational_response(&cfg, l).map_err(Failure::from);
    let poly = || -> Result<_, Failure> {
        if order == 0 {
            return Err(usage("--order must be at least 1"));
        }
        Ok(closed_coefficients(&cfg, order)?.coefficients)
    };
    let (header, rows): (Vec<&str>, Vec<Vec<String>>) = match a.kind {
        ResponseKind::Rational => (
            vec!["lambda", "response"],
            grid.iter()
                .map(|&l| Ok(vec![fixed(l, 2), fixed(rational(l)?, 6)]))
                .collect::<Result<_, Failure>>()?,
        ),
        ResponseKind::Polynomial => {
            let theta = poly()?;
            (
                vec!["lambda", "response"],
                grid.iter()
                    .map(|&l| vec![fixed(l, 2), fixed(polynomial_response(&theta, l), 6)])
                    .collect(),
            )
        }
        ResponseKind::Both => {
            let theta = poly()?;
            (
                vec!["lambda", "rational", "polynomial"],
                grid.iter()
                    .map(|&l| {
                        Ok(vec![
                            fixed(l, 2),
                            fixed(rational(l)?, 6),
                            fixed(polynomial_response(&theta, l), 6),
                        ])
                    })
                    .collect::<Result<_, Failure>>()?,
            )
        }
    };
    write_csv(a.out.as_deref(), &header, &rows)?;
    Ok(())
}

pub fn verify(a: &VerifyArgs) -> Outcome {
    if a.depths.is_empty() {
        return Err(usage("--depths needs at least one value"));
    }
    let (graph, h) = match &a.bundle {
        Some(dir) => {
            let d = load_bundle_with(dir, LoadOptions::default())
                .map_err(|e| Failure::Run(e.into()))?;
            (d.graph, d.features)
        }
        None => {
            if a.nodes < 2 || !(0.0..=1.0).contains(&a.edge_prob) || a.features == 0 {
                return Err(usage(
                    "--nodes must be >= 2, --edge-prob in [0, 1] and --features >= 1",
                ));
            }
            random_instance(a.seed, a.nodes, a.edge_prob, a.features)?
        }
    };
    let opts = VerifyOptions {
        depths: a.depths.clone(),
        inject_coefficient_error: a.inject_coefficient_error,
    };
    let report: VerifyReport = run_battery(&graph, &h, &opts)?;
    write_json(&a.out, &report)?;
    let failed: Vec<_> = report.failures().collect();
    for c in &report.checks {
        let tag = if c.passed { "ok" } else { "FAILED" };
        println!(
            "{tag:6} {} {:.3e} (tolerance {:.1e})",
            c.name, c.value, c.tolerance
        );
    }
    if failed.is_empty() {
        Ok(())
    } else {
        let names: Vec<_> = failed
            .iter()
            .map(|c| format!("{} ({})", c.name, c.detail))
            .collect();
        Err(Failure::Run(anyhow!("failed checks: {}", names.join("; "))))
    }
}

pub fn depth_sweep(a: &SweepArgs) -> Outcome {
    if a.depths.is_empty() || a.depths.contains(&0) {
        return Err(usage(
            "--depths must be a non-empty list of positive integers",
        ));
    }
    let base = a
        .model
        .config()
        .with_mode(a.model.mode.unwrap_or(Mode::Iter));
    let configs = a
        .depths
        .iter()
        .map(|&k| train_config(&a.fit, base.with_depth(k)))
        .collect::<Result<Vec<_>, _>>()?;
    let (dataset, _) = load(&a.data, a.fit.seed)?;
    let mut rows = Vec::new();
    for (k, cfg) in a.depths.iter().zip(&configs) {
        let (mean, std) = mean_std(&accuracies(&trials(
            &dataset,
            cfg,
            a.fit.runs,
            a.fit.parallel,
        )?));
        log::info!("depth {k}: {mean:.4} ± {std:.4}");
        rows.push(vec![k.to_string(), fixed(mean, 6), fixed(std, 6)]);
    }
    write_csv(a.out.as_deref(), &["depth", "mean_acc", "std"], &rows)?;
    Ok(())
}

/// Grid points in first-seen order with exact duplicates removed.
fn grid_points(alphas: &[f64], second: &[f64]) -> Vec<(f64, f64)> {
    let mut seen = HashSet::new();
    alphas
        .iter()
        .flat_map(|&a| second.iter().map(move |&s| (a, s)))
        .filter(|&(a, s)| seen.insert((a.to_bits(), s.to_bits())))
        .collect()
}

pub fn param_grid(a: &GridArgs) -> Outcome {
    let (axis, values) = match a.model.model {
        Model::GnnLf => ("mu", &a.mus),
        Model::GnnHf => ("beta", &a.betas),
        other => {
            return Err(usage(format!(
                "param-grid needs gnn-lf or gnn-hf, got {other}"
            )))
        }
    };
    if a.alphas.is_empty() || values.is_empty() {
        return Err(usage("grid axes must be non-empty"));
    }
    let base = a.model.config();
    let points = grid_points(&a.alphas, values);
    let configs = points
        .iter()
        .map(|&(alpha, s)| {
            let prop = match a.model.model {
                Model::GnnLf => PropagationConfig::gnn_lf(alpha, s),
                _ => PropagationConfig::gnn_hf(alpha, s),
            };
            train_config(&a.fit, prop.with_mode(base.mode()).with_depth(base.depth()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (dataset, _) = load(&a.data, a.fit.seed)?;
    let mut rows = Vec::new();
    for (&(alpha, s), cfg) in points.iter().zip(&configs) {
        let (mean, _) = mean_std(&accuracies(&trials(
            &dataset,
            cfg,
            a.fit.runs,
            a.fit.parallel,
        )?));
        rows.push(vec![alpha.to_string(), s.to_string(), fixed(mean, 6)]);
    }
    write_csv(a.out.as_deref(), &["alpha", axis, "mean_acc"], &rows)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_points_dropped() {
        let p = grid_points(&[0.1, 0.2, 0.1], &[0.5, 0.5]);
        assert_eq!(p, vec![(0.1, 0.5), (0.2, 0.5)]);
    }
}
