//! One function per subcommand.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use mbn::bench::{scaling_bench, upper_time_ratio, write_bench_csv, BenchConfig};
use mbn::distill::{
    argmax_rows, load_mlp, mlp_predict, mlp_train, pseudo_labels, save_mlp, Loss, MlpModel, OutputActivation,
    TrainOptions,
};
use mbn::eval::{clustering_accuracy_classes, kmeans_runs, nmi_classes, retrieval_precision, KMeansResult};
use mbn::network::{load_model, model_summary_json, plan_schedule, save_model, train_network_with_report, ScheduleParams};
use mbn::pca::EmPcaOptions;
use mbn::rng::Purpose;
use mbn::theory::{
    check_against_monte_carlo, curve_export, monte_carlo_moments, random_settings, var_ensemble, write_curve_csv,
    CurveGrid, TheoryParams,
};
use mbn::{LabelVector, NetworkConfig, RandomStream, Similarity};
use serde_json::json;

use crate::input::{parse_list, with_path, read_embedding, write_embedding};
use crate::svg::scatter_svg;
use crate::{
    BenchArgs, CliError, ClusterArgs, ClusterMode, DistillArgs, DistillMode, Metric, RetrieveArgs, ScatterArgs,
    TheoryArgs, TrainArgs, TransformArgs,
};

fn similarity(m: Metric) -> Similarity {
    match m {
        Metric::Euclidean => Similarity::SquaredEuclidean,
        Metric::Dot => Similarity::DotProduct,
    }
}

fn list<T: std::str::FromStr>(flag: &str, text: &str) -> Result<Vec<T>, CliError> {
    parse_list(text).map_err(|e| CliError::Invalid(format!("--{flag}: {e}")))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(|e| with_path(path, e))?))
}

/// Writes to `path`, or stdout when no path is given.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

pub fn train(args: &TrainArgs, seed: u64) -> Result<(), CliError> {
    let (x, y) = args.input.load()?;
    let params = ScheduleParams {
        n: x.n(),
        c_guess: args.classes,
        k1_override: args.k1,
        k_last_override: args.k_last,
        delta: args.delta,
        k_max: args.k_max.unwrap_or(usize::MAX),
    };
    let schedule = plan_schedule(&params)?;
    info!("schedule {schedule:?}");
    let config = NetworkConfig {
        delta: args.delta,
        v: args.v,
        a: args.a,
        similarity: similarity(args.metric),
        pca: EmPcaOptions {
            max_iters: args.pca_iters,
            tol: args.pca_tol,
            ..EmPcaOptions::default()
        },
        ..NetworkConfig::new(schedule, args.dims, seed)
    };
    let start = Instant::now();
    let out = train_network_with_report(&x, &config)?;
    let total = start.elapsed();
    for (l, t) in out.layer_times.iter().enumerate() {
        eprintln!("layer {} k={} {:.3}s", l + 1, out.model.schedule().ks[l], t.as_secs_f64());
    }
    eprintln!("pca {:.3}s", out.pca_time.as_secs_f64());
    eprintln!("total {:.3}s", total.as_secs_f64());
    save_model(&out.model, &args.model)?;
    if let Some(path) = &args.embedding {
        write_embedding(path, &out.embedding, y.as_ref())?;
    }
    if let Some(path) = &args.report {
        let report = json!({
            "n": x.n(),
            "d": x.d(),
            "model": model_summary_json(&out.model),
            "layer_seconds": out.layer_times.iter().map(|t| t.as_secs_f64()).collect::<Vec<_>>(),
            "pca_seconds": out.pca_time.as_secs_f64(),
            "total_seconds": total.as_secs_f64(),
        });
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &report).map_err(|e| CliError::Invalid(e.to_string()))?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn transform(args: &TransformArgs) -> Result<(), CliError> {
    let model = load_model(&args.model).map_err(|e| with_path(&args.model, e))?;
    let (x, y) = args.input.load()?;
    let z = model.transform(&x)?;
    write_embedding(&args.out, &z, y.as_ref())
}

/// Indices of labeled rows and their compacted classes.
fn labeled(labels: &LabelVector) -> (Vec<usize>, Vec<usize>, usize) {
    let (compact, ids) = labels.compact();
    let (rows, classes) = compact
        .as_slice()
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.map(|c| (i, c as usize)))
        .unzip();
    (rows, classes, ids.len())
}

fn score(run: &KMeansResult, rows: &[usize], truth: &[usize]) -> Result<(f64, f64), CliError> {
    let pred: Vec<usize> = rows.iter().map(|&i| run.labels[i]).collect();
    Ok((nmi_classes(&pred, truth)?, clustering_accuracy_classes(&pred, truth)?))
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

pub fn cluster(args: &ClusterArgs, seed: u64) -> Result<(), CliError> {
    let (z, labels) = read_embedding(&args.embedding, args.label_column)?;
    let (rows, truth, classes) = labeled(&labels);
    if rows.is_empty() {
        return Err(CliError::Invalid("the embedding has no labeled rows to score against".into()));
    }
    if rows.len() < z.n() {
        warn!("{} unlabeled rows are clustered but not scored", z.n() - rows.len());
    }
    let k = args.k.unwrap_or(classes);
    let stream = RandomStream::new(seed).with_purpose(Purpose::KMeans);
    let runs = kmeans_runs(&z, k, args.restarts, args.max_iters, &stream)?;
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "mode,runs,nmi,accuracy,nmi_sd,accuracy_sd")?;
    if matches!(args.mode, ClusterMode::Mean | ClusterMode::Both) {
        let scores = runs.iter().map(|r| score(r, &rows, &truth)).collect::<Result<Vec<_>, _>>()?;
        let (nmi, nmi_sd) = mean_sd(&scores.iter().map(|s| s.0).collect::<Vec<_>>());
        let (acc, acc_sd) = mean_sd(&scores.iter().map(|s| s.1).collect::<Vec<_>>());
        writeln!(out, "mean,{},{nmi},{acc},{nmi_sd},{acc_sd}", runs.len())?;
    }
    if matches!(args.mode, ClusterMode::Best | ClusterMode::Both) {
        // earliest run wins ties, matching kmeans_best_of
        let best = runs
            .iter()
            .enumerate()
            .fold(0, |b, (r, run)| if run.objective < runs[b].objective { r } else { b });
        let (nmi, acc) = score(&runs[best], &rows, &truth)?;
        writeln!(out, "best,{},{nmi},{acc},0,0", runs.len())?;
    }
    out.flush()?;
    Ok(())
}

pub fn retrieve(args: &RetrieveArgs) -> Result<(), CliError> {
    let (z, labels) = read_embedding(&args.embedding, args.label_column)?;
    let mut levels: Vec<usize> = list("levels", &args.levels)?;
    levels.sort_unstable();
    levels.dedup();
    let dropped = levels.iter().filter(|&&l| l >= z.n()).count();
    if dropped > 0 {
        warn!("dropping {dropped} depths not below the corpus size {}", z.n());
        levels.retain(|&l| l < z.n());
    }
    let precision = retrieval_precision(&z, &labels, &levels)?;
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "depth,precision")?;
    for (l, p) in levels.iter().zip(&precision) {
        writeln!(out, "{l},{p}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn theory(args: &TheoryArgs, seed: u64) -> Result<(), CliError> {
    if !(args.rho_step > 0.0 && args.rho_step <= 1.0) {
        return Err(CliError::Invalid("--rho-step must lie in (0, 1]".into()));
    }
    let steps = (1.0 / args.rho_step).round() as usize;
    let grid = CurveGrid {
        rhos: (0..=steps).map(|i| (i as f64 / steps as f64).min(1.0)).collect(),
        sigma_ratios: list("ratios", &args.ratios)?,
        vs: list("vs", &args.vs)?,
    };
    let rows = curve_export(&grid)?;
    let mut w = create(&args.out)?;
    write_curve_csv(&rows, &mut w)?;
    w.flush()?;
    info!("wrote {} curve rows to {}", rows.len(), args.out.display());

    if args.mc_settings == 0 {
        return Ok(());
    }
    let base = RandomStream::new(seed);
    let settings = random_settings(args.mc_settings, &base);
    let mut failures = 0;
    println!("setting,sigma_input_sq,sigma_sq,rho,V,z_mean,z_second,z_pair,ok");
    for (i, p) in settings.iter().enumerate() {
        let check = check_against_monte_carlo(p, args.mc_draws, &base.with_index(i as u32 + 1))?;
        let ok = check.within(args.mc_se);
        failures += usize::from(!ok);
        println!(
            "{i},{},{},{},{},{},{},{},{ok}",
            p.sigma_input_sq, p.sigma_sq, p.rho, p.v, check.z_mean, check.z_second, check.z_pair
        );
    }
    let p = TheoryParams::new(1.0, 1.0, 0.5, 100)?;
    let mc = monte_carlo_moments(&p, args.mc_draws, &base.with_index(0))?;
    let (exact, sampled) = (var_ensemble(&p), mc.var_ensemble(100));
    let rel = (sampled - exact).abs() / exact;
    println!("# ensemble variance at rho=0.5, V=100, unit variances: closed form {exact}, sampled {sampled}, relative error {rel}");
    println!("# {} of {} settings within {} standard errors", settings.len() - failures, settings.len(), args.mc_se);
    if failures > 0 {
        warn!("{failures} settings deviate by more than {} standard errors", args.mc_se);
    }
    Ok(())
}

pub fn distill(args: &DistillArgs, seed: u64) -> Result<(), CliError> {
    let network = load_model(&args.model).map_err(|e| with_path(&args.model, e))?;
    let (x, _) = args.input.load()?;
    let embedding = match &args.embedding {
        Some(path) => {
            let (z, _) = read_embedding(path, 0)?;
            if z.n() != x.n() {
                return Err(CliError::Invalid(format!("embedding has {} rows but the data has {}", z.n(), x.n())));
            }
            z
        }
        None => network.transform(&x)?,
    };
    let base = RandomStream::new(seed);
    let hidden: Vec<usize> = list("hidden", &args.hidden)?;
    let indicator = args.mode == DistillMode::Indicator;
    let targets = if indicator {
        pseudo_labels(&embedding, args.clusters, args.restarts, &base)?
    } else {
        embedding.clone()
    };
    let mut sizes = vec![x.d()];
    sizes.extend(&hidden);
    sizes.push(targets.d());
    let dropout = args.dropout.unwrap_or(if indicator { 0.2 } else { 0.0 });
    if !(0.0..1.0).contains(&dropout) {
        return Err(CliError::Invalid("--dropout must lie in [0, 1)".into()));
    }
    let (output_kind, loss) = if indicator {
        (OutputActivation::Sigmoid, Loss::CrossEntropy)
    } else {
        (OutputActivation::Linear, Loss::Squared)
    };
    let mut mlp = MlpModel::new(&sizes, output_kind, vec![dropout; hidden.len()], &base)?;
    let options = TrainOptions {
        epochs: args.epochs,
        batch_size: args.batch.unwrap_or(if indicator { 128 } else { 32 }),
        learning_rate: args.lr,
        momentum: args.momentum,
        loss,
    };
    let start = Instant::now();
    let trace = mlp_train(&mut mlp, &x, &targets, &options, &base)?;
    info!(
        "trained {:?} in {:.2?}, final loss {:.5}",
        sizes,
        start.elapsed(),
        trace.last().copied().unwrap_or(f64::NAN)
    );
    save_mlp(&mlp, &args.out)?;
    let pred = mlp_predict(&mlp, &x)?;
    if indicator {
        let a = argmax_rows(&pred);
        let b = argmax_rows(&targets);
        let agree = a.iter().zip(&b).filter(|(p, q)| p == q).count() as f64 / a.len() as f64;
        println!("agreement,{agree}");
    } else {
        let se: f64 = (0..pred.n())
            .map(|i| (0..pred.d()).map(|j| (pred.get(i, j) - targets.get(i, j)).powi(2)).sum::<f64>())
            .sum();
        println!("rmse,{}", (se / pred.n() as f64).sqrt());
    }

    let m = args.speed_sample.clamp(1, x.n());
    let sample = x.select_rows(&(0..m).collect::<Vec<_>>());
    let t = Instant::now();
    network.transform(&sample)?;
    let network_seconds = t.elapsed().as_secs_f64();
    // reload so the timing covers the saved model
    let saved = load_mlp(&args.out)?;
    let t = Instant::now();
    mlp_predict(&saved, &sample)?;
    let mlp_seconds = t.elapsed().as_secs_f64().max(1e-9);
    println!("network_seconds,{network_seconds}");
    println!("mlp_seconds,{mlp_seconds}");
    println!("speedup,{}", network_seconds / mlp_seconds);

    if let Some(path) = &args.predictions {
        write_embedding(path, &pred, None)?;
    }
    Ok(())
}

pub fn scatter(args: &ScatterArgs) -> Result<(), CliError> {
    let (z, labels) = read_embedding(&args.embedding, args.label_column)?;
    if z.d() < 2 {
        warn!("embedding has one dimension; plotting it on a line");
    }
    let mut w = create(&args.out)?;
    w.write_all(scatter_svg(&z, &labels, args.size).as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn bench(args: &BenchArgs, seed: u64) -> Result<(), CliError> {
    let (x, _) = args.input.load()?;
    let params = ScheduleParams {
        n: x.n(),
        c_guess: args.classes,
        k1_override: Some(args.k1),
        k_last_override: args.k_last,
        delta: args.delta,
        k_max: usize::MAX,
    };
    let schedule = plan_schedule(&params)?;
    let mut ns: Vec<usize> = list("n", &args.n)?;
    ns.sort_unstable();
    let config = BenchConfig {
        ns: ns.clone(),
        vs: list("v", &args.v)?,
        runs: args.runs,
        k1: args.k1,
        upper_ks: schedule[1..].to_vec(),
        a: args.a,
        similarity: similarity(args.metric),
        seed,
    };
    let rows = scaling_bench(&x, &config)?;
    let mut w = create(&args.out)?;
    write_bench_csv(&rows, &mut w)?;
    w.flush()?;
    let mut vs = config.vs.clone();
    vs.sort_unstable();
    vs.dedup();
    for v in vs {
        for pair in ns.windows(2) {
            if let Some(r) = upper_time_ratio(&rows, v, pair[0], pair[1]) {
                println!("V={v} upper-layer time ratio n={}->{}: {r:.3}", pair[0], pair[1]);
            }
        }
    }
    Ok(())
}
