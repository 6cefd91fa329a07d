//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Progress goes to stderr.
//!
//! The MNIST criteria need `data/mnist5k/` (see `scripts/fetch_mnist5k.py`);
//! without it they fail with a pointer to the script.

use std::error::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use mbn::bench::{scaling_bench, upper_time_ratio, write_bench_csv, BenchConfig};
use mbn::distill::{
    argmax_rows, loss_and_gradients, mlp_predict, mlp_train, pseudo_labels, Loss, MlpModel,
    OutputActivation, TrainOptions,
};
use mbn::eval::{
    clustering_accuracy_classes, kmeans_best_of, kmeans_runs, nmi_classes, retrieval_precision, DEFAULT_MAX_ITERS,
};
use mbn::io::{load_idx, normalize, Normalization};
use mbn::network::{
    encode_clustering, encode_clustering_radial, fit_head, model_from_bytes, model_to_bytes, plan_schedule,
    train_clustering, train_hidden, train_network, HiddenStack, Input, ScheduleParams,
};
use mbn::pca::{em_pca_fit, EmPcaOptions};
use mbn::rng::Purpose;
use mbn::theory::{
    check_against_monte_carlo, monte_carlo_moments, random_settings, var_ensemble, var_single, TheoryParams,
};
use mbn::{DataMatrix, LabelVector, NetworkConfig, NetworkModel, RandomStream, Similarity};

type Outcome = Result<(bool, String), Box<dyn Error>>;

/// Every random decision in the suite derives from this seed.
const SEED: u64 = 1;
const KMEANS_RUNS: usize = 50;

fn progress(msg: impl AsRef<str>) {
    eprintln!("[acceptance] {}", msg.as_ref());
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist5k")
}

struct Mnist {
    x: DataMatrix,
    classes: Vec<usize>,
}

fn load_mnist() -> Result<Mnist, String> {
    let dir = data_dir();
    let (x, y) = load_idx(&dir.join("images-idx3-ubyte"), &dir.join("labels-idx1-ubyte"))
        .map_err(|e| format!("MNIST-5000 not available ({e}); run scripts/fetch_mnist5k.py"))?;
    let classes = y.classes().map_err(|e| e.to_string())?;
    Ok(Mnist {
        x: normalize(&x, Normalization::Scale255),
        classes,
    })
}

/// Mean NMI over independent k-means runs and NMI of the best-objective run.
fn kmeans_nmi(z: &DataMatrix, truth: &[usize], stream: &RandomStream) -> Result<(f64, f64), Box<dyn Error>> {
    let runs = kmeans_runs(z, 10, KMEANS_RUNS, DEFAULT_MAX_ITERS, stream)?;
    let mut sum = 0.0;
    let mut best = 0;
    for (r, run) in runs.iter().enumerate() {
        sum += nmi_classes(&run.labels, truth)?;
        if run.objective < runs[best].objective {
            best = r;
        }
    }
    Ok((sum / runs.len() as f64, nmi_classes(&runs[best].labels, truth)?))
}

fn kmeans_stream(tag: u32) -> RandomStream {
    RandomStream::new(SEED).at(0, tag * 1000, Purpose::KMeans)
}

// ---------------------------------------------------------------- criterion 1

struct FullRun {
    stack: HiddenStack,
    model: NetworkModel,
    embedding: DataMatrix,
}

fn criterion_1(m: &Mnist, full: &mut Option<FullRun>) -> Outcome {
    let schedule = plan_schedule(&ScheduleParams::new(m.x.n(), 10))?;
    let expected = [2500, 1250, 625, 312, 156, 78, 39, 19];
    if schedule != expected {
        return Ok((false, format!("default schedule {schedule:?} differs from {expected:?}")));
    }

    progress("criterion 1: training V=400, k1=2500 network");
    let start = Instant::now();
    let config = NetworkConfig::new(schedule, 10, SEED);
    let stack = train_hidden(&m.x, &config)?;
    let (model, embedding) = fit_head(&stack, 10, &config.pca)?;
    let train_time = start.elapsed();
    let (mbn_mean, mbn_best) = kmeans_nmi(&embedding, &m.classes, &kmeans_stream(1))?;

    progress("criterion 1: raw-feature k-means baseline");
    let (raw_mean, raw_best) = kmeans_nmi(&m.x, &m.classes, &kmeans_stream(2))?;

    progress("criterion 1: fast variant V=100, k1=1000");
    let mut fast_params = ScheduleParams::new(m.x.n(), 10);
    fast_params.k1_override = Some(1000);
    let fast_config = NetworkConfig {
        v: 100,
        ..NetworkConfig::new(plan_schedule(&fast_params)?, 10, SEED)
    };
    let fast_start = Instant::now();
    let (_, fast_embedding) = train_network(&m.x, &fast_config)?;
    let fast_time = fast_start.elapsed();
    let (fast_mean, _) = kmeans_nmi(&fast_embedding, &m.classes, &kmeans_stream(3))?;

    let pass = mbn_mean >= 0.65
        && (0.40..=0.58).contains(&raw_mean)
        && fast_mean >= 0.58
        && train_time <= Duration::from_secs(30 * 60);
    *full = Some(FullRun {
        stack,
        model,
        embedding,
    });
    Ok((
        pass,
        format!(
            "MBN NMI {mbn_mean:.4} (>= 0.65; best-objective run {mbn_best:.4}), raw k-means NMI {raw_mean:.4} \
             (in [0.40, 0.58]; best-objective {raw_best:.4}), fast variant NMI {fast_mean:.4} (>= 0.58), \
             training {:.1}s (<= 1800s), fast variant {:.1}s",
            train_time.as_secs_f64(),
            fast_time.as_secs_f64()
        ),
    ))
}

// ---------------------------------------------------------------- criterion 2

fn criterion_2(m: &Mnist, full: &FullRun) -> Outcome {
    let mut scores = Vec::new();
    for (i, dims) in [2, 3, 5, 10, 20, 30].into_iter().enumerate() {
        progress(format!("criterion 2: {dims}-dimensional head"));
        let (_, z) = fit_head(&full.stack, dims, &EmPcaOptions::default())?;
        let (nmi, _) = kmeans_nmi(&z, &m.classes, &kmeans_stream(10 + i as u32))?;
        scores.push((dims, nmi));
    }
    let lo = scores.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let hi = scores.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let list: Vec<String> = scores.iter().map(|(d, s)| format!("{d}:{s:.4}")).collect();
    Ok((
        hi - lo <= 0.06,
        format!("NMI by dimension {} spread {:.4} (<= 0.06)", list.join(" "), hi - lo),
    ))
}

// ---------------------------------------------------------------- criterion 3

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let si = rng.random_range(0.05..10.0);
        let s = rng.random_range(0.05..10.0);
        let v = [1, 2, 10, 50, 100, 400, 1000][i % 7];
        let at = |rho: f64| TheoryParams::new(si, s, rho, v);
        let single = var_single(&at(0.0)?);
        let one = var_ensemble(&at(1.0)?);
        let zero = var_ensemble(&at(0.0)?);
        worst = worst.max((one - single).abs()).max((zero - single / v as f64).abs());
    }
    Ok((worst <= 1e-12, format!("200 settings, largest endpoint deviation {worst:.3e} (<= 1e-12)")))
}

// ---------------------------------------------------------------- criterion 4

fn criterion_4() -> Outcome {
    let base = RandomStream::new(SEED).with_layer(4);
    let draws = 1_000_000;
    let settings = random_settings(30, &base);
    let mut worst: f64 = 0.0;
    let mut outside = 0;
    for (i, p) in settings.iter().enumerate() {
        let check = check_against_monte_carlo(p, draws, &base.with_index(i as u32 + 1))?;
        let z = check.z_mean.abs().max(check.z_second.abs()).max(check.z_pair.abs());
        worst = worst.max(z);
        outside += usize::from(!check.within(3.0));
    }
    let p = TheoryParams::new(1.0, 1.0, 0.5, 100)?;
    let mc = monte_carlo_moments(&p, draws, &base.with_index(0))?;
    let rel = (mc.var_ensemble(100) - var_ensemble(&p)).abs() / var_ensemble(&p);
    Ok((
        outside == 0 && rel <= 0.01,
        format!(
            "{} of 30 settings within 3 SE (largest |z| {worst:.2}), ensemble variance relative error {rel:.4} (<= 0.01)",
            30 - outside
        ),
    ))
}

// ---------------------------------------------------------------- criterion 5

/// Top-`p` right singular vectors of the centered data, `d × p`.
fn svd_basis(x: &DMatrix<f64>, p: usize) -> DMatrix<f64> {
    let mean = x.row_mean();
    let centered = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - mean[j]);
    let svd = centered.svd(false, true);
    let vt = svd.v_t.unwrap();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    DMatrix::from_fn(x.ncols(), p, |i, j| vt[(order[j], i)])
}

/// Sine of the largest principal angle between two orthonormal bases.
fn max_angle_sin(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let residual = a - b * (b.transpose() * a);
    residual.singular_values().max()
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 5);
    let options = EmPcaOptions {
        max_iters: 2000,
        tol: 1e-12,
        ..EmPcaOptions::default()
    };
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let n = rng.random_range(10..=100);
        let d = rng.random_range(2..=40);
        let p = rng.random_range(1..=8.min(d - 1));
        // distinct column scales give a spectrum with usable gaps
        let scales: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..3.0)).collect();
        let values: Vec<f64> = (0..n * d)
            .map(|k| scales[k % d] * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let x = DataMatrix::dense(n, d, values.clone())?;
        let em = em_pca_fit(&x, p, &options, &RandomStream::new(SEED).with_index(i))?;
        let q_em = DMatrix::from_row_slice(d, em.p(), em.basis());
        let q_exact = svd_basis(&DMatrix::from_row_slice(n, d, &values), em.p());
        worst = worst.max(max_angle_sin(&q_em, &q_exact).min(1.0).asin());
    }
    let elapsed = start.elapsed();
    Ok((
        worst < 1e-6 && elapsed < Duration::from_secs(10),
        format!(
            "100 instances, largest principal angle {worst:.3e} rad (< 1e-6), {:.2}s (< 10s)",
            elapsed.as_secs_f64()
        ),
    ))
}

// ---------------------------------------------------------------- criterion 6

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 6);
    let mut mismatches = 0;
    let mut compared = 0;
    for set in 0..1000u32 {
        let d = rng.random_range(1..=30);
        let pool_n = rng.random_range(2..=40);
        let k = rng.random_range(1..=pool_n);
        let n = rng.random_range(1..=30);
        let mut matrix = |rows: usize| {
            DataMatrix::dense(rows, d, (0..rows * d).map(|_| rng.random_range(-1.0..1.0)).collect())
        };
        let pool = matrix(pool_n)?;
        let input = matrix(n)?;
        let a = rng.random_range(0.1..=1.0);
        let model = train_clustering(Input::Data(&pool), k, a, Similarity::SquaredEuclidean, &RandomStream::new(SEED).with_index(set))?;
        let reference = encode_clustering(&model, Input::Data(&pool), Input::Data(&input), Similarity::SquaredEuclidean)?;
        for gamma in [0.1, 1.0, 10.0] {
            let radial = encode_clustering_radial(&model, &pool, &input, |d2| (-gamma * d2).exp())?;
            mismatches += reference.iter().zip(&radial).filter(|(a, b)| a != b).count();
            compared += reference.len();
        }
    }
    Ok((
        mismatches == 0,
        format!("1000 sets, {compared} winner comparisons over 3 kernel widths, {mismatches} mismatches (== 0)"),
    ))
}

// ---------------------------------------------------------------- criterion 7

fn brute_force_objective(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let d = points[0].len();
    let mut assign = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assign) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        let cost: f64 = points
            .iter()
            .zip(&assign)
            .map(|(p, &c)| {
                p.iter()
                    .zip(&sums[c])
                    .map(|(v, s)| (v - s / counts[c] as f64).powi(2))
                    .sum::<f64>()
            })
            .sum();
        best = best.min(cost);
        // next assignment in base-k counting order
        let mut i = 0;
        while i < n {
            assign[i] += 1;
            if assign[i] < k {
                break;
            }
            assign[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
    }
}

fn permutations(items: Vec<usize>) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.clone();
        let head = rest.remove(i);
        for mut tail in permutations(rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

fn brute_force_accuracy(pred: &[usize], truth: &[usize], c: usize) -> f64 {
    permutations((0..c).collect())
        .iter()
        .map(|perm| pred.iter().zip(truth).filter(|(&p, &t)| perm[p] == t).count())
        .max()
        .unwrap() as f64
        / pred.len() as f64
}

fn brute_force_precision(points: &[Vec<f64>], labels: &[u32], depth: usize) -> f64 {
    let n = points.len();
    let mut total = 0.0;
    for q in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != q)
            .map(|j| {
                let d: f64 = points[q].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, j)
            })
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let hits = others[..depth].iter().filter(|(_, j)| labels[*j] == labels[q]).count();
        total += hits as f64 / depth as f64;
    }
    total / n as f64
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 7);
    let mut notes = Vec::new();
    let mut pass = true;

    let mut kmeans_gap: f64 = 0.0;
    for i in 0..30u32 {
        let n = rng.random_range(4..=10);
        let k = rng.random_range(2..=3);
        let d = rng.random_range(1..=3);
        let points: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let exhaustive = brute_force_objective(&points, k);
        let best = kmeans_best_of(&DataMatrix::from_rows(&points)?, k, KMEANS_RUNS, DEFAULT_MAX_ITERS, &RandomStream::new(SEED).with_index(i * 100))?;
        kmeans_gap = kmeans_gap.max((best.objective - exhaustive).abs() / exhaustive.max(1e-12));
    }
    pass &= kmeans_gap <= 1e-9;
    notes.push(format!("k-means vs exhaustive on 30 instances: largest relative gap {kmeans_gap:.1e} (<= 1e-9)"));

    let mut accuracy_mismatch = 0;
    for _ in 0..200 {
        let c = rng.random_range(1..=4);
        let n = rng.random_range(1..=20);
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let fast = clustering_accuracy_classes(&pred, &truth)?;
        accuracy_mismatch += usize::from((fast - brute_force_accuracy(&pred, &truth, c)).abs() > 1e-12);
    }
    pass &= accuracy_mismatch == 0;
    notes.push(format!("accuracy vs permutation search: {accuracy_mismatch} of 200 differ"));

    // joint counts (0,0)=1, (0,1)=1, (1,1)=2 over 4 samples
    let a = [0, 0, 1, 1];
    let b = [0, 1, 1, 1];
    let hand = {
        let h = |ps: &[f64]| -ps.iter().map(|p| p * p.ln()).sum::<f64>();
        let (ha, hb, hab) = (h(&[0.5, 0.5]), h(&[0.25, 0.75]), h(&[0.25, 0.25, 0.5]));
        (ha + hb - hab) / (ha * hb).sqrt()
    };
    let nmi = nmi_classes(&a, &b)?;
    pass &= (nmi - hand).abs() <= 1e-4 && (nmi - 0.3456).abs() <= 1e-4;
    notes.push(format!("hand NMI {nmi:.4} vs {hand:.4}"));

    let points = vec![vec![0.0, 0.0], vec![0.1, 0.0], vec![1.0, 1.0], vec![1.1, 0.9], vec![0.0, 1.0], vec![2.0, 2.0]];
    let labels = [0u32, 0, 1, 1, 0, 1];
    let z = DataMatrix::from_rows(&points)?;
    let y = LabelVector::new(labels.iter().map(|&l| Some(l)).collect());
    let levels = [1, 2, 3, 4, 5];
    let fast = retrieval_precision(&z, &y, &levels)?;
    let exact = levels.iter().map(|&l| brute_force_precision(&points, &labels, l)).collect::<Vec<_>>();
    let same = fast == exact;
    pass &= same;
    notes.push(format!("retrieval on 6 points {}", if same { "exact" } else { "differs" }));

    Ok((pass, notes.join("; ")))
}

// ---------------------------------------------------------------- criterion 8

fn toy_data(n: usize, seed: u64) -> Result<DataMatrix, Box<dyn Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 12;
    let values = (0..n * d)
        .map(|k| {
            let class = (k / d) % 4;
            let bump = if k % d / 3 == class { 2.0 } else { 0.0 };
            bump + rng.sample::<f64, _>(StandardNormal) * 0.5
        })
        .collect();
    Ok(DataMatrix::dense(n, d, values)?)
}

fn criterion_8() -> Outcome {
    let x = toy_data(240, SEED + 8)?;
    let unseen = toy_data(60, SEED + 80)?;
    let config = NetworkConfig {
        v: 24,
        ..NetworkConfig::new(vec![60, 30, 15], 3, SEED)
    };
    let (m1, z1) = train_network(&x, &config)?;
    let (m2, z2) = train_network(&x, &config)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build()?;
    let (m3, z3) = pool.install(|| train_network(&x, &config))?;
    let bytes = model_to_bytes(&m1)?;
    let bits = |z: &DataMatrix| z.as_dense().unwrap().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let same_seed = bytes == model_to_bytes(&m2)? && bytes == model_to_bytes(&m3)? && bits(&z1) == bits(&z2) && bits(&z1) == bits(&z3);

    let loaded = model_from_bytes(&bytes)?;
    let codes_match = m1.encode_layers(&unseen)? == loaded.encode_layers(&unseen)?;
    let embed_match = bits(&m1.transform(&unseen)?) == bits(&loaded.transform(&unseen)?)
        && bits(&loaded.transform(&x)?) == bits(&z1);
    let reserialized = model_to_bytes(&loaded)? == bytes;

    let other = train_network(&x, &NetworkConfig { seed: SEED + 1, ..config.clone() })?.0;
    let seed_matters = model_to_bytes(&other)? != bytes;
    Ok((
        same_seed && codes_match && embed_match && reserialized && seed_matters && m1.layers().len() == 3,
        format!(
            "same seed identical across runs and thread counts: {same_seed}; 3-layer round trip codes {codes_match}, \
             embeddings {embed_match}, bytes {reserialized}; new seed changes model: {seed_matters}"
        ),
    ))
}

// ---------------------------------------------------------------- criterion 9

fn criterion_9(m: &Mnist) -> Outcome {
    let mut params = ScheduleParams::new(m.x.n(), 10);
    params.k1_override = Some(1000);
    let schedule = plan_schedule(&params)?;
    let config = BenchConfig {
        ns: vec![2000, 4000],
        vs: vec![100],
        runs: 5,
        k1: schedule[0],
        upper_ks: schedule[1..].to_vec(),
        a: 0.5,
        similarity: Similarity::SquaredEuclidean,
        seed: SEED,
    };
    progress("criterion 9: scaling bench, 2 sizes x 5 runs");
    let rows = scaling_bench(&m.x, &config)?;
    let path = Path::new(env!("CARGO_TARGET_TMPDIR")).join("scaling_bench.csv");
    write_bench_csv(&rows, std::fs::File::create(&path)?)?;
    let ratio = upper_time_ratio(&rows, 100, 2000, 4000).ok_or("bench produced no rows")?;
    Ok((
        ratio <= 2.6 && rows.len() == 10,
        format!(
            "upper-layer time ratio n=4000/n=2000 {ratio:.3} (<= 2.6) over 5 runs, k fixed at {:?}; CSV at {}",
            schedule,
            path.display()
        ),
    ))
}

// ---------------------------------------------------------------- criterion 10

/// Relative error of the analytic gradient against central differences, over all parameters.
fn gradient_check(sizes: &[usize], output: OutputActivation, loss: Loss, seed: u64) -> Result<f64, Box<dyn Error>> {
    let stream = RandomStream::new(seed);
    let mut model = MlpModel::new(sizes, output, vec![0.0; sizes.len() - 2], &stream)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batch = 7;
    let x = ndarray::Array2::from_shape_fn((batch, sizes[0]), |_| rng.random_range(-1.0..1.0));
    let t = ndarray::Array2::from_shape_fn((batch, *sizes.last().unwrap()), |_| match output {
        OutputActivation::Sigmoid => rng.random_range(0.0..1.0),
        OutputActivation::Linear => rng.random_range(-1.0..1.0),
    });
    let (_, grads) = loss_and_gradients(&model, x.view(), t.view(), loss)?;
    let h = 1e-5;
    let (mut diff, mut norm_a, mut norm_n) = (0.0, 0.0, 0.0);
    let mut accumulate = |analytic: f64, numeric: f64| {
        diff += (analytic - numeric).powi(2);
        norm_a += analytic * analytic;
        norm_n += numeric * numeric;
    };
    for l in 0..grads.weights.len() {
        for idx in 0..grads.weights[l].len() {
            let (r, c) = (idx / grads.weights[l].ncols(), idx % grads.weights[l].ncols());
            let orig = model.weights()[l][(r, c)];
            model.weights_mut()[l][(r, c)] = orig + h;
            let up = loss_and_gradients(&model, x.view(), t.view(), loss)?.0;
            model.weights_mut()[l][(r, c)] = orig - h;
            let down = loss_and_gradients(&model, x.view(), t.view(), loss)?.0;
            model.weights_mut()[l][(r, c)] = orig;
            accumulate(grads.weights[l][(r, c)], (up - down) / (2.0 * h));
        }
        for j in 0..grads.biases[l].len() {
            let orig = model.biases()[l][j];
            model.biases_mut()[l][j] = orig + h;
            let up = loss_and_gradients(&model, x.view(), t.view(), loss)?.0;
            model.biases_mut()[l][j] = orig - h;
            let down = loss_and_gradients(&model, x.view(), t.view(), loss)?.0;
            model.biases_mut()[l][j] = orig;
            accumulate(grads.biases[l][j], (up - down) / (2.0 * h));
        }
    }
    Ok(diff.sqrt() / (norm_a.sqrt() + norm_n.sqrt()).max(1e-300))
}

fn fastest(reps: usize, mut f: impl FnMut() -> Result<(), Box<dyn Error>>) -> Result<f64, Box<dyn Error>> {
    let mut best = f64::INFINITY;
    for _ in 0..reps {
        let t = Instant::now();
        f()?;
        best = best.min(t.elapsed().as_secs_f64());
    }
    Ok(best)
}

fn criterion_10(m: &Mnist, full: &FullRun) -> Outcome {
    let mut grad_err: f64 = 0.0;
    for (i, (output, loss)) in [
        (OutputActivation::Sigmoid, Loss::CrossEntropy),
        (OutputActivation::Sigmoid, Loss::Squared),
        (OutputActivation::Linear, Loss::Squared),
    ]
    .into_iter()
    .enumerate()
    {
        grad_err = grad_err.max(gradient_check(&[6, 8, 5, 3], output, loss, SEED + i as u64)?);
    }

    progress("criterion 10: distilling the V=400 network");
    let base = RandomStream::new(SEED).with_layer(10);
    let targets = pseudo_labels(&full.embedding, 10, KMEANS_RUNS, &base)?;
    let mut mlp = MlpModel::new(&[m.x.d(), 256, 256, 10], OutputActivation::Sigmoid, vec![0.2, 0.2], &base)?;
    mlp_train(&mut mlp, &m.x, &targets, &TrainOptions::default(), &base)?;
    let predicted = argmax_rows(&mlp_predict(&mlp, &m.x)?);
    let wanted = argmax_rows(&targets);
    let agreement = predicted.iter().zip(&wanted).filter(|(a, b)| a == b).count() as f64 / predicted.len() as f64;

    let sample = m.x.select_rows(&(0..500).collect::<Vec<_>>());
    let network_time = fastest(2, || full.model.transform(&sample).map(drop).map_err(Into::into))?;
    let mlp_time = fastest(5, || mlp_predict(&mlp, &sample).map(drop).map_err(Into::into))?;
    let speedup = network_time / mlp_time;
    Ok((
        grad_err < 1e-4 && agreement >= 0.90 && speedup >= 10.0,
        format!(
            "gradient relative error {grad_err:.2e} (< 1e-4), argmax agreement {:.2}% (>= 90%), \
             prediction {:.1}x faster than the network on 500 samples (>= 10x)",
            100.0 * agreement,
            speedup
        ),
    ))
}

// ---------------------------------------------------------------- driver

fn main() -> ExitCode {
    // the libtest harness flags are irrelevant here; `--list` must still work
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let start = Instant::now();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    results.push((3, "variance endpoints", criterion_3()));
    results.push((4, "closed forms vs Monte Carlo", criterion_4()));
    results.push((5, "EM-PCA vs exact PCA", criterion_5()));
    results.push((6, "radial-metric winner invariance", criterion_6()));
    results.push((7, "evaluation oracles", criterion_7()));
    results.push((8, "determinism and serialization", criterion_8()));

    match load_mnist() {
        Ok(m) => {
            let mut full = None;
            results.push((1, "MNIST-5000 clustering", criterion_1(&m, &mut full)));
            match &full {
                Some(f) => {
                    results.push((2, "output-dimension robustness", criterion_2(&m, f)));
                    results.push((10, "distillation", criterion_10(&m, f)));
                }
                None => {
                    for (id, name) in [(2, "output-dimension robustness"), (10, "distillation")] {
                        results.push((id, name, Err("the V=400 network from criterion 1 failed to train".into())));
                    }
                }
            }
            results.push((9, "linear scaling of upper layers", criterion_9(&m)));
        }
        Err(e) => {
            for (id, name) in [
                (1, "MNIST-5000 clustering"),
                (2, "output-dimension robustness"),
                (9, "linear scaling of upper layers"),
                (10, "distillation"),
            ] {
                results.push((id, name, Err(e.clone().into())));
            }
        }
    }

    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    println!();
    for (id, name, outcome) in &results {
        let (pass, detail) = match outcome {
            Ok((pass, detail)) => (*pass, detail.clone()),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!("criterion {id:>2} {} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
    println!(
        "\nacceptance: {} passed, {failed} failed in {:.1}s",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
