use std::fs;
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::{DMatrix, DVector};
use paramred::gradients::{local_linear_gradients, GradientConfig, GradientMethod};
use paramred::io::{parse_bounds_csv, parse_bounds_list, parse_samples, BoundsSource, LoadedSamples};
use paramred::kas::{fit_kas, tune_sigma, KasConfig, SpectralDistribution, TuneConfig};
use paramred::nll::{train_nll, NllModel, NllTrainConfig, RevNet};
use paramred::surface::{
    cross_validated_nrmse, kfold_indices, summary_plot_data, Reducer, ResponseSurface, SurfaceKind,
};
use paramred::{bootstrap, Criterion, Error, GradientSet, RngStream, SampleSet, Subspace};
use serde_json::{json, Map, Value};

use crate::args::*;
use crate::bench;
use crate::output::{csv_table, fmt17, matrix_rows, OutputSet};
use crate::CliError;

/// Stream of the evaluation fold split shared by every method.
pub const STREAM_EVAL_FOLDS: u64 = 1;
pub const STREAM_CENTERS: u64 = 3;
pub const STREAM_BOOTSTRAP: u64 = 4;
/// Tags for the seeds handed to model constructors.
pub const TAG_KAS: u64 = 16;
pub const TAG_NLL: u64 = 17;

pub const DEFAULT_SIGMA_GRID: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

/// Seed for a model component, derived from the run seed.
pub fn subseed(seed: u64, tag: u64) -> u64 {
    RngStream::new(seed, tag).derive_seed()
}

pub fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::As(a) => run_as(&a),
        Command::Kas(a) => run_kas(&a),
        Command::Nll(a) => run_nll(&a),
        Command::Gradients(a) => run_gradients(&a),
        Command::Surface(a) => run_surface(&a),
        Command::Bench(a) => bench::run_bench_command(&a),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub(crate) fn distribution(d: Distribution) -> SpectralDistribution {
    match d {
        Distribution::Gaussian => SpectralDistribution::Gaussian,
        Distribution::Laplace => SpectralDistribution::Laplace,
    }
}

fn load(data: &DataArgs) -> Result<LoadedSamples, CliError> {
    let bounds = match (&data.bounds, &data.bounds_file) {
        (Some(list), _) => {
            BoundsSource::Explicit(parse_bounds_list(list).map_err(|e| usage(format!("--bounds: {e}")))?)
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Io {
                path: path.clone(),
                message: e.to_string(),
            })?;
            BoundsSource::Explicit(parse_bounds_csv(&text)?)
        }
        (None, None) => BoundsSource::AssumeNormalized,
    };
    let text = fs::read_to_string(&data.input).map_err(|e| CliError::Io {
        path: data.input.clone(),
        message: e.to_string(),
    })?;
    Ok(parse_samples(&text, &bounds)?)
}

fn bounds_json(s: &SampleSet, data: &DataArgs) -> Value {
    if data.bounds.is_none() && data.bounds_file.is_none() {
        Value::from("normalized")
    } else {
        json!({"lower": s.bounds().lower(), "upper": s.bounds().upper()})
    }
}

/// Gradient set for the run plus the name of its source.
fn gradients(loaded: &LoadedSamples, data: &DataArgs, seed: u64) -> Result<GradientSet, CliError> {
    let use_exact = match data.gradients {
        GradientChoice::Exact => true,
        GradientChoice::LocalLinear => false,
        GradientChoice::Auto => loaded.gradients.is_some(),
    };
    if use_exact {
        return loaded
            .gradients
            .clone()
            .ok_or_else(|| Error::Schema("--gradients exact needs columns g1..gd".into()).into());
    }
    let s = &loaded.samples;
    s.require_outputs()?;
    let mut cfg = GradientConfig::new(GradientMethod::LocalLinear, s.dim());
    if let Some(n) = data.n_neighbors {
        cfg.n_neighbors = n;
    }
    cfg.max_centers = data.max_centers;
    cfg.validate(s.len(), s.dim()).map_err(|e| usage(e.to_string()))?;
    Ok(local_linear_gradients(
        s,
        cfg.n_neighbors,
        cfg.max_centers,
        &RngStream::new(seed, STREAM_CENTERS),
    )?)
}

fn data_options(data: &DataArgs, samples: &SampleSet, grads: Option<&GradientSet>) -> Map<String, Value> {
    let mut o = Map::new();
    o.insert("bounds".into(), bounds_json(samples, data));
    if let Some(g) = grads {
        o.insert("gradients".into(), Value::from(g.source().as_str()));
        if g.source() == paramred::GradientSource::LocalLinear {
            let nn = data.n_neighbors.unwrap_or(2 * (samples.dim() + 1));
            o.insert("n_neighbors".into(), Value::from(nn));
            o.insert("max_centers".into(), Value::from(data.max_centers));
        }
    }
    o
}

fn check_folds(folds: usize, m: usize) -> Result<(), CliError> {
    if folds < 2 || folds > m {
        return Err(usage(format!("--folds must be in [2, {m}], got {folds}")));
    }
    Ok(())
}

fn check_k(k: usize, d: usize) -> Result<(), CliError> {
    if k == 0 || k >= d {
        return Err(usage(format!("--k must be in [1, {}], got {k}", d.saturating_sub(1))));
    }
    Ok(())
}

fn eval_folds(m: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>, CliError> {
    Ok(kfold_indices(m, folds, &RngStream::new(seed, STREAM_EVAL_FOLDS))?)
}

fn result_base(method: &str, options: Map<String, Value>, seed: u64, no_timestamp: bool) -> Map<String, Value> {
    let mut r = Map::new();
    r.insert("version".into(), Value::from(1));
    r.insert("method".into(), Value::from(method));
    r.insert("options".into(), Value::Object(options));
    r.insert("seed".into(), Value::from(seed));
    if !no_timestamp {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        r.insert("timestamp".into(), Value::from(secs));
    }
    r
}

fn vec_json(v: &DVector<f64>) -> Value {
    Value::from(v.iter().copied().collect::<Vec<f64>>())
}

fn eigenvalues_csv(values: &DVector<f64>, lo: Option<&DVector<f64>>, hi: Option<&DVector<f64>>) -> String {
    let header = ["index", "value", "lo", "hi"].map(String::from);
    let rows = (0..values.len()).map(|i| {
        vec![
            (i + 1).to_string(),
            fmt17(values[i]),
            lo.map_or(String::new(), |l| fmt17(l[i])),
            hi.map_or(String::new(), |h| fmt17(h[i])),
        ]
    });
    csv_table(&header, rows)
}

/// Adds `summary_plot.csv` when outputs exist and `k <= 2`.
fn add_summary_plot<R: Reducer>(
    out: &mut OutputSet,
    samples: &SampleSet,
    reducer: &R,
    k: usize,
) -> Result<(), CliError> {
    let Some(f) = samples.outputs() else {
        return Ok(());
    };
    if k > 2 {
        eprintln!("note: summary_plot.csv skipped, plots support k <= 2 (k = {k})");
        return Ok(());
    }
    let table = summary_plot_data(samples.points(), f, |x| reducer.reduce(x), k)?;
    out.add("summary_plot.csv", table.to_csv());
    Ok(())
}

fn run_as(a: &AsArgs) -> Result<(), CliError> {
    if let Some(0) = a.degree {
        return Err(usage("--degree must be >= 1"));
    }
    let loaded = load(&a.data)?;
    let s = &loaded.samples;
    let d = s.dim();
    let criterion = match a.k {
        KSpec::Auto => Criterion::SpectralGap,
        KSpec::Fixed(k) => {
            check_k(k, d)?;
            Criterion::FixedDim(k)
        }
    };
    if a.degree.is_some() {
        s.require_outputs()?;
        check_folds(a.folds, s.len())?;
    }
    let seed = a.out.seed;
    let grads = gradients(&loaded, &a.data, seed)?;

    let sub = Subspace::fit(&grads, None, criterion)?;
    let k = sub.k();
    let boot = if a.n_boot > 0 {
        Some(bootstrap(&grads, a.n_boot, &RngStream::new(seed, STREAM_BOOTSTRAP))?)
    } else {
        None
    };
    let nrmse = match a.degree {
        Some(degree) => {
            let folds = eval_folds(s.len(), a.folds, seed)?;
            Some(cross_validated_nrmse(
                s,
                &grads,
                &folds,
                SurfaceKind::Poly { degree },
                |_, g| Subspace::fit(g, None, Criterion::FixedDim(k)),
            )?)
        }
        None => None,
    };

    let mut options = data_options(&a.data, s, Some(&grads));
    options.insert("k".into(), Value::from(a.k.to_string()));
    options.insert("n_boot".into(), Value::from(a.n_boot));
    options.insert("degree".into(), json!(a.degree));
    options.insert("folds".into(), Value::from(a.folds));
    let mut r = result_base("as", options, seed, a.out.no_timestamp);
    r.insert("eigenvalues".into(), vec_json(sub.eigvals()));
    r.insert(
        "eigval_lo".into(),
        boot.as_ref().map_or(Value::Null, |b| vec_json(&b.eigval_lo)),
    );
    r.insert(
        "eigval_hi".into(),
        boot.as_ref().map_or(Value::Null, |b| vec_json(&b.eigval_hi)),
    );
    r.insert(
        "subspace_dist".into(),
        boot.as_ref().map_or(Value::Null, |b| vec_json(&b.subspace_dist)),
    );
    r.insert("k".into(), Value::from(k));
    r.insert("W1".into(), matrix_rows(&sub.w1()));
    if let Some(n) = nrmse {
        r.insert("nrmse".into(), Value::from(n));
    }

    let mut out = OutputSet::default();
    out.add_json("result.json", &Value::Object(r))?;
    out.add(
        "eigenvalues.csv",
        eigenvalues_csv(
            sub.eigvals(),
            boot.as_ref().map(|b| &b.eigval_lo),
            boot.as_ref().map(|b| &b.eigval_hi),
        ),
    );
    add_summary_plot(&mut out, s, &sub, k)?;
    out.commit(&a.out.output_dir)
}

fn validate_grid(grid: &[f64]) -> Result<(), CliError> {
    if grid.is_empty() {
        return Err(usage("--sigma-grid is empty"));
    }
    if let Some(bad) = grid.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(usage(format!("sigma values must be positive, got {bad}")));
    }
    Ok(())
}

fn run_kas(a: &KasArgs) -> Result<(), CliError> {
    let grid: Vec<f64> = a.sigma_grid.clone().unwrap_or_else(|| DEFAULT_SIGMA_GRID.to_vec());
    match a.sigma {
        Some(sigma) if !(sigma > 0.0 && sigma.is_finite()) => return Err(usage("--sigma must be positive")),
        Some(_) => {}
        None => validate_grid(&grid)?,
    }
    if a.degree == 0 {
        return Err(usage("--degree must be >= 1"));
    }
    let loaded = load(&a.data)?;
    let s = &loaded.samples;
    check_k(a.k, s.dim())?;
    if a.features < s.dim() {
        return Err(usage(format!(
            "--features must be at least the input dimension {}",
            s.dim()
        )));
    }
    if a.sigma.is_none() {
        s.require_outputs()?;
    }
    if s.outputs().is_some() {
        check_folds(a.folds, s.len())?;
    }
    let seed = a.out.seed;
    let model_seed = subseed(seed, TAG_KAS);
    let dist = distribution(a.distribution);
    let surface = SurfaceKind::Poly { degree: a.degree };
    let grads = gradients(&loaded, &a.data, seed)?;

    let (sigma, tuning) = match a.sigma {
        Some(sigma) => (sigma, None),
        None => {
            let t = tune_sigma(
                s,
                &grads,
                &TuneConfig {
                    n_features: a.features,
                    distribution: dist,
                    k: a.k,
                    sigma_grid: grid.clone(),
                    folds: a.folds,
                    surface,
                    seed: model_seed,
                },
            )?;
            (t.best_sigma, Some(t))
        }
    };
    let cfg = KasConfig {
        n_features: a.features,
        sigma,
        distribution: dist,
        k: a.k,
        seed: model_seed,
    };
    let model = fit_kas(s, &grads, &cfg)?;
    let nrmse = if s.outputs().is_some() {
        let folds = eval_folds(s.len(), a.folds, seed)?;
        Some(cross_validated_nrmse(s, &grads, &folds, surface, |ts, tg| {
            fit_kas(ts, tg, &cfg)
        })?)
    } else {
        None
    };

    let mut options = data_options(&a.data, s, Some(&grads));
    options.insert("k".into(), Value::from(a.k));
    options.insert("features".into(), Value::from(a.features));
    options.insert("sigma".into(), Value::from(sigma));
    options.insert("sigma_fixed".into(), Value::from(a.sigma.is_some()));
    options.insert(
        "sigma_grid".into(),
        if a.sigma.is_some() {
            Value::Null
        } else {
            Value::from(grid)
        },
    );
    options.insert("distribution".into(), Value::from(dist.as_str()));
    options.insert("degree".into(), Value::from(a.degree));
    options.insert("folds".into(), Value::from(a.folds));
    options.insert("model_seed".into(), Value::from(model_seed));
    let mut r = result_base("kas", options, seed, a.out.no_timestamp);
    let sub = model.feature_subspace();
    r.insert("eigenvalues".into(), vec_json(sub.eigvals()));
    r.insert("eigval_lo".into(), Value::Null);
    r.insert("eigval_hi".into(), Value::Null);
    r.insert("k".into(), Value::from(a.k));
    r.insert("W1".into(), matrix_rows(&sub.w1()));
    if let Some(t) = &tuning {
        r.insert(
            "tuning".into(),
            Value::Array(t.scores.iter().map(|(s, v)| json!({"sigma": s, "nrmse": v})).collect()),
        );
    }
    if let Some(n) = nrmse {
        r.insert("nrmse".into(), Value::from(n));
    }

    let mut out = OutputSet::default();
    out.add_json("result.json", &Value::Object(r))?;
    out.add("eigenvalues.csv", eigenvalues_csv(sub.eigvals(), None, None));
    add_summary_plot(&mut out, s, &model, a.k)?;
    out.commit(&a.out.output_dir)
}

fn run_nll(a: &NllArgs) -> Result<(), CliError> {
    if a.epochs == 0 {
        return Err(usage("--epochs must be >= 1"));
    }
    if a.blocks < 2 || !a.blocks.is_multiple_of(2) {
        return Err(usage("--blocks must be even and >= 2"));
    }
    if !(a.step > 0.0 && a.step.is_finite()) || a.width == 0 {
        return Err(usage("--step must be positive and --width >= 1"));
    }
    if !(a.learning_rate >= 0.0 && a.learning_rate.is_finite()) || a.batch_size == Some(0) {
        return Err(usage("--learning-rate must be >= 0 and --batch-size >= 1"));
    }
    if let Some(0) = a.degree {
        return Err(usage("--degree must be >= 1"));
    }
    let loaded = load(&a.data)?;
    let s = &loaded.samples;
    check_k(a.k, s.dim())?;
    if a.degree.is_some() {
        s.require_outputs()?;
        check_folds(a.folds, s.len())?;
    }
    let seed = a.out.seed;
    let model_seed = subseed(seed, TAG_NLL);
    let grads = gradients(&loaded, &a.data, seed)?;
    let cfg = NllTrainConfig {
        k: a.k,
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.learning_rate,
        seed: model_seed,
    };
    let train = |ts: &SampleSet, tg: &GradientSet| -> paramred::Result<NllModel> {
        let net = RevNet::init_with_width(ts.dim(), a.blocks, a.step, a.width, model_seed)?;
        let fit = train_nll(net, ts, tg, &cfg)?;
        Ok(NllModel { net: fit.net, k: a.k })
    };
    let net = RevNet::init_with_width(s.dim(), a.blocks, a.step, a.width, model_seed)?;
    let fit = train_nll(net, s, &grads, &cfg)?;
    let model = NllModel {
        net: fit.net.clone(),
        k: a.k,
    };
    let nrmse = match a.degree {
        Some(degree) => {
            let folds = eval_folds(s.len(), a.folds, seed)?;
            Some(cross_validated_nrmse(
                s,
                &grads,
                &folds,
                SurfaceKind::Poly { degree },
                train,
            )?)
        }
        None => None,
    };

    let mut options = data_options(&a.data, s, Some(&grads));
    options.insert("k".into(), Value::from(a.k));
    options.insert("epochs".into(), Value::from(a.epochs));
    options.insert("blocks".into(), Value::from(a.blocks));
    options.insert("step".into(), Value::from(a.step));
    options.insert("width".into(), Value::from(a.width));
    options.insert("learning_rate".into(), Value::from(a.learning_rate));
    options.insert("batch_size".into(), json!(a.batch_size));
    options.insert("degree".into(), json!(a.degree));
    options.insert("folds".into(), Value::from(a.folds));
    options.insert("model_seed".into(), Value::from(model_seed));
    let mut r = result_base("nll", options, seed, a.out.no_timestamp);
    r.insert("eigenvalues".into(), Value::Null);
    r.insert("eigval_lo".into(), Value::Null);
    r.insert("eigval_hi".into(), Value::Null);
    r.insert("k".into(), Value::from(a.k));
    r.insert("W1".into(), Value::Null);
    r.insert("model".into(), Value::from("revnet.json"));
    r.insert("initial_loss".into(), Value::from(fit.history[0]));
    r.insert("final_loss".into(), Value::from(fit.final_loss));
    if let Some(n) = nrmse {
        r.insert("nrmse".into(), Value::from(n));
    }

    let mut out = OutputSet::default();
    out.add_json("result.json", &Value::Object(r))?;
    let mut net_json = fit.net.to_json()?;
    net_json.push('\n');
    out.add("revnet.json", net_json);
    let header = ["epoch", "loss"].map(String::from);
    out.add(
        "loss_history.csv",
        csv_table(
            &header,
            fit.history
                .iter()
                .enumerate()
                .map(|(e, l)| vec![(e + 1).to_string(), fmt17(*l)]),
        ),
    );
    add_summary_plot(&mut out, s, &model, a.k)?;
    out.commit(&a.out.output_dir)
}

fn run_gradients(a: &GradientsArgs) -> Result<(), CliError> {
    let loaded = load(&a.data)?;
    let s = &loaded.samples;
    let seed = a.out.seed;
    let grads = gradients(&loaded, &a.data, seed)?;
    let c = paramred::covariance_matrix(&grads, None)?;
    let eig = paramred::eigendecompose(&c)?;

    let options = data_options(&a.data, s, Some(&grads));
    let mut r = result_base("gradients", options, seed, a.out.no_timestamp);
    r.insert("eigenvalues".into(), vec_json(&eig.values));
    r.insert("eigval_lo".into(), Value::Null);
    r.insert("eigval_hi".into(), Value::Null);
    r.insert("k".into(), Value::Null);
    r.insert("W1".into(), Value::Null);

    let mut header = vec!["sample".to_string()];
    header.extend((1..=s.dim()).map(|i| format!("g{i}")));
    let rows = grads.indices().iter().enumerate().map(|(row, idx)| {
        let mut line = vec![(idx + 1).to_string()];
        line.extend(grads.grads().row(row).iter().map(|v| fmt17(*v)));
        line
    });
    let mut out = OutputSet::default();
    out.add_json("result.json", &Value::Object(r))?;
    out.add("gradients.csv", csv_table(&header, rows));
    out.add("eigenvalues.csv", eigenvalues_csv(&eig.values, None, None));
    out.commit(&a.out.output_dir)
}

enum FittedReducer {
    As(Subspace),
    Kas(paramred::kas::KasModel),
}

impl Reducer for FittedReducer {
    fn reduce(&self, x: &DMatrix<f64>) -> paramred::Result<DMatrix<f64>> {
        match self {
            FittedReducer::As(s) => s.reduce(x),
            FittedReducer::Kas(m) => m.reduce(x),
        }
    }
}

fn surface_json(s: &ResponseSurface) -> Value {
    match s {
        ResponseSurface::Poly(p) => json!({
            "kind": "poly",
            "degree": p.degree(),
            "coefficients": p.coeffs().iter().copied().collect::<Vec<f64>>(),
        }),
        ResponseSurface::Kernel(k) => json!({
            "kind": "kernel",
            "lengthscale": k.lengthscale(),
            "ridge": k.ridge(),
            "weights": k.weights().iter().copied().collect::<Vec<f64>>(),
        }),
    }
}

fn run_surface(a: &SurfaceArgs) -> Result<(), CliError> {
    let kind = match a.kind {
        SurfaceChoice::Poly if a.degree == 0 => return Err(usage("--degree must be >= 1")),
        SurfaceChoice::Poly => SurfaceKind::Poly { degree: a.degree },
        SurfaceChoice::Kernel => {
            if !(a.lengthscale > 0.0 && a.lengthscale.is_finite()) || !(a.ridge > 0.0 && a.ridge.is_finite()) {
                return Err(usage("--lengthscale and --ridge must be positive"));
            }
            SurfaceKind::Kernel {
                lengthscale: a.lengthscale,
                ridge: a.ridge,
            }
        }
    };
    if a.reducer == ReducerChoice::Kas {
        if a.k == KSpec::Auto {
            return Err(usage("--reducer kas needs an explicit --k"));
        }
        if !(a.sigma > 0.0 && a.sigma.is_finite()) {
            return Err(usage("--sigma must be positive"));
        }
    }
    let loaded = load(&a.data)?;
    let s = &loaded.samples;
    let f = s.require_outputs()?.clone();
    if let KSpec::Fixed(k) = a.k {
        check_k(k, s.dim())?;
    }
    check_folds(a.folds, s.len())?;
    if a.reducer == ReducerChoice::Kas && a.features < s.dim() {
        return Err(usage(format!(
            "--features must be at least the input dimension {}",
            s.dim()
        )));
    }
    let seed = a.out.seed;
    let grads = gradients(&loaded, &a.data, seed)?;
    let kas_cfg = |k: usize| KasConfig {
        n_features: a.features,
        sigma: a.sigma,
        distribution: distribution(a.distribution),
        k,
        seed: subseed(seed, TAG_KAS),
    };

    let reducer = match (a.reducer, a.k) {
        (ReducerChoice::As, KSpec::Auto) => FittedReducer::As(Subspace::fit(&grads, None, Criterion::SpectralGap)?),
        (ReducerChoice::As, KSpec::Fixed(k)) => FittedReducer::As(Subspace::fit(&grads, None, Criterion::FixedDim(k))?),
        (ReducerChoice::Kas, KSpec::Fixed(k)) => FittedReducer::Kas(fit_kas(s, &grads, &kas_cfg(k))?),
        (ReducerChoice::Kas, KSpec::Auto) => unreachable!("rejected above"),
    };
    let (k, eigvals, w1) = match &reducer {
        FittedReducer::As(sub) => (sub.k(), sub.eigvals().clone(), sub.w1()),
        FittedReducer::Kas(m) => (m.k(), m.feature_subspace().eigvals().clone(), m.feature_subspace().w1()),
    };
    let fitted = kind.fit(&reducer.reduce(s.points())?, &f)?;
    let folds = eval_folds(s.len(), a.folds, seed)?;
    let nrmse = match a.reducer {
        ReducerChoice::As => cross_validated_nrmse(s, &grads, &folds, kind, |_, g| {
            Subspace::fit(g, None, Criterion::FixedDim(k))
        })?,
        ReducerChoice::Kas => cross_validated_nrmse(s, &grads, &folds, kind, |ts, tg| fit_kas(ts, tg, &kas_cfg(k)))?,
    };

    let mut options = data_options(&a.data, s, Some(&grads));
    options.insert(
        "reducer".into(),
        Value::from(if a.reducer == ReducerChoice::As { "as" } else { "kas" }),
    );
    options.insert("k".into(), Value::from(a.k.to_string()));
    options.insert(
        "kind".into(),
        Value::from(if a.kind == SurfaceChoice::Poly {
            "poly"
        } else {
            "kernel"
        }),
    );
    options.insert("degree".into(), Value::from(a.degree));
    options.insert("lengthscale".into(), Value::from(a.lengthscale));
    options.insert("ridge".into(), Value::from(a.ridge));
    options.insert("folds".into(), Value::from(a.folds));
    if a.reducer == ReducerChoice::Kas {
        options.insert("features".into(), Value::from(a.features));
        options.insert("sigma".into(), Value::from(a.sigma));
        options.insert(
            "distribution".into(),
            Value::from(distribution(a.distribution).as_str()),
        );
        options.insert("model_seed".into(), Value::from(subseed(seed, TAG_KAS)));
    }
    let mut r = result_base("surface", options, seed, a.out.no_timestamp);
    r.insert("eigenvalues".into(), vec_json(&eigvals));
    r.insert("eigval_lo".into(), Value::Null);
    r.insert("eigval_hi".into(), Value::Null);
    r.insert("k".into(), Value::from(k));
    r.insert("W1".into(), matrix_rows(&w1));
    r.insert("nrmse".into(), Value::from(nrmse));
    r.insert("surface".into(), surface_json(&fitted));

    let mut out = OutputSet::default();
    out.add_json("result.json", &Value::Object(r))?;
    add_summary_plot(&mut out, s, &reducer, k)?;
    out.commit(&a.out.output_dir)
}
