//! Held-out accuracy of AS, KAS and NLL on a built-in test function.

use paramred::kas::{fit_kas, tune_sigma, KasConfig, SpectralDistribution, TuneConfig};
use paramred::nll::{train_nll, NllModel, NllTrainConfig, RevNet, DEFAULT_STEP};
use paramred::surface::{cross_validated_nrmse, kfold_indices, SurfaceKind};
use paramred::testfns::{by_name, names, sample_uniform};
use paramred::{Criterion, RngStream, Subspace};

use crate::args::BenchArgs;
use crate::commands::{distribution, subseed, STREAM_EVAL_FOLDS, TAG_KAS, TAG_NLL};
use crate::output::{csv_table, fmt17, OutputSet};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub function: String,
    pub samples: usize,
    pub seed: u64,
    pub k: usize,
    pub degree: usize,
    pub folds: usize,
    pub features: usize,
    pub sigma_grid: Vec<f64>,
    pub distribution: SpectralDistribution,
    /// `Some((epochs, blocks, learning_rate))` adds an NLL row.
    pub nll: Option<(usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: &'static str,
    pub nrmse: f64,
    /// Tuned spectral scale, KAS only.
    pub sigma: Option<f64>,
}

fn unknown_function(name: &str) -> CliError {
    CliError::Usage(format!(
        "unknown test function `{name}`; valid names: {}",
        names().join(", ")
    ))
}

/// Mean 5-fold (or `folds`-fold) held-out NRMSE per method on shared
/// samples and a shared fold split.
pub fn bench_scores(cfg: &BenchConfig) -> Result<Vec<BenchRow>, CliError> {
    let func = by_name(&cfg.function).ok_or_else(|| unknown_function(&cfg.function))?;
    if cfg.k == 0 || cfg.k >= func.d {
        return Err(CliError::Usage(format!(
            "--k must be in [1, {}] for {}",
            func.d - 1,
            func.name
        )));
    }
    if cfg.folds < 2 || cfg.folds > cfg.samples {
        return Err(CliError::Usage(format!("--folds must be in [2, {}]", cfg.samples)));
    }
    if cfg.degree == 0 {
        return Err(CliError::Usage("--degree must be >= 1".into()));
    }
    let samples = sample_uniform(&func, cfg.samples, cfg.seed)?;
    let grads = func.gradients(&samples)?;
    let folds = kfold_indices(samples.len(), cfg.folds, &RngStream::new(cfg.seed, STREAM_EVAL_FOLDS))?;
    let surface = SurfaceKind::Poly { degree: cfg.degree };
    let k = cfg.k;

    let mut rows = Vec::new();
    let as_score = cross_validated_nrmse(&samples, &grads, &folds, surface, |_, g| {
        Subspace::fit(g, None, Criterion::FixedDim(k))
    })?;
    rows.push(BenchRow {
        method: "as",
        nrmse: as_score,
        sigma: None,
    });

    let kas_seed = subseed(cfg.seed, TAG_KAS);
    let tuned = tune_sigma(
        &samples,
        &grads,
        &TuneConfig {
            n_features: cfg.features,
            distribution: cfg.distribution,
            k,
            sigma_grid: cfg.sigma_grid.clone(),
            folds: cfg.folds,
            surface,
            seed: kas_seed,
        },
    )?;
    let kas_cfg = KasConfig {
        n_features: cfg.features,
        sigma: tuned.best_sigma,
        distribution: cfg.distribution,
        k,
        seed: kas_seed,
    };
    let kas_score = cross_validated_nrmse(&samples, &grads, &folds, surface, |s, g| fit_kas(s, g, &kas_cfg))?;
    rows.push(BenchRow {
        method: "kas",
        nrmse: kas_score,
        sigma: Some(tuned.best_sigma),
    });

    if let Some((epochs, blocks, lr)) = cfg.nll {
        let nll_seed = subseed(cfg.seed, TAG_NLL);
        let mut train_cfg = NllTrainConfig::new(k, epochs, nll_seed);
        train_cfg.learning_rate = lr;
        let score = cross_validated_nrmse(&samples, &grads, &folds, surface, |s, g| {
            let net = RevNet::init(s.dim(), blocks, DEFAULT_STEP, nll_seed)?;
            let fit = train_nll(net, s, g, &train_cfg)?;
            Ok(NllModel { net: fit.net, k })
        })?;
        rows.push(BenchRow {
            method: "nll",
            nrmse: score,
            sigma: None,
        });
    }
    Ok(rows)
}

pub(crate) fn run_bench_command(a: &BenchArgs) -> Result<(), CliError> {
    if by_name(&a.function).is_none() {
        return Err(unknown_function(&a.function));
    }
    if a.sigma_grid.is_empty() || a.sigma_grid.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(CliError::Usage("--sigma-grid needs positive values".into()));
    }
    if a.nll && (a.epochs == 0 || a.blocks < 2 || !a.blocks.is_multiple_of(2)) {
        return Err(CliError::Usage(
            "--epochs must be >= 1 and --blocks even and >= 2".into(),
        ));
    }
    let cfg = BenchConfig {
        function: a.function.clone(),
        samples: a.samples,
        seed: a.out.seed,
        k: a.k,
        degree: a.degree,
        folds: a.folds,
        features: a.features,
        sigma_grid: a.sigma_grid.clone(),
        distribution: distribution(a.distribution),
        nll: a.nll.then_some((a.epochs, a.blocks, a.learning_rate)),
    };
    let rows = bench_scores(&cfg)?;
    let name = by_name(&a.function).map(|f| f.name).unwrap_or_default();
    let header = ["function", "method", "nrmse", "sigma", "seed", "samples", "folds"].map(String::from);
    let lines = rows.iter().map(|r| {
        vec![
            name.to_string(),
            r.method.to_string(),
            fmt17(r.nrmse),
            r.sigma.map_or(String::new(), fmt17),
            cfg.seed.to_string(),
            cfg.samples.to_string(),
            cfg.folds.to_string(),
        ]
    });
    let mut out = OutputSet::default();
    out.add("bench.csv", csv_table(&header, lines));
    out.commit(&a.out.output_dir)
}
