//! Command implementations. Each returns the CSV text it produces.

use std::fmt::Write as _;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use sigkern::dualsig::{
    sig_kernel_dp_from_static_grams, sig_kernel_gram, sig_kernel_gram_with_cost, Algorithm, KernelConfig, LevelValues, Normalization,
};
use sigkern::metrics::mape;
use sigkern::models::{accuracy, fit_ridge, grid_cv, RidgeInput};
use sigkern::preprocess::{tabulate, Augmentor};
use sigkern::primalsig::{fit_sig_features, transform_sig_features_with_cost, SigFeatureConfig, SigVariant};
use sigkern::seqcore::{format_matrix_csv, gen_brownian_with_drift, load_sequences_csv, SeedStream, SequenceBatch};
use sigkern::staticfeat::transform_static_features;
use sigkern::statickern::{median_heuristic, StaticKernelSpec, MEDIAN_MAX_PAIRS};
use sigkern::Cost;

use crate::config::{Command, ExactKind, RunConfig};
use crate::error::{CliError, Context};

pub fn execute(command: Command, cfg: &RunConfig) -> Result<String, CliError> {
    cfg.validate(command)?;
    let root = SeedStream::new(cfg.seed);
    match command {
        Command::Synth => synth(cfg, &root),
        Command::Gram => gram(cfg, &root),
        Command::Features => features(cfg, &root),
        Command::Mape => mape_cmd(cfg, &root),
        Command::Bench => bench(cfg, &root),
        Command::Classify => classify(cfg, &root),
    }
}

fn synthetic(cfg: &RunConfig, root: &SeedStream) -> Result<SequenceBatch, CliError> {
    let s = &cfg.synth;
    let drift = s.drift.clone().unwrap_or_else(|| vec![0.0; s.dim]);
    gen_brownian_with_drift(s.n_sequences, s.length, s.dim, &drift, &root.child("synth")).context("synth")
}

/// Input sequences (tabulated and augmented) or synthetic Brownian paths.
fn load_data(cfg: &RunConfig, root: &SeedStream) -> Result<SequenceBatch, CliError> {
    let raw = match &cfg.input {
        Some(path) => {
            let set = load_sequences_csv(path).context(format!("reading {}", path.display()))?;
            tabulate(&set, cfg.tabulate.max_len).context("tabulate")?
        }
        None => synthetic(cfg, root)?,
    };
    Augmentor::fit(cfg.augment, &raw)
        .and_then(|a| a.transform(&raw))
        .context("augment")
}

fn median_of(x: &SequenceBatch) -> Result<f64, CliError> {
    median_heuristic(x.pooled_steps().view(), MEDIAN_MAX_PAIRS).context("median heuristic")
}

fn synth(cfg: &RunConfig, root: &SeedStream) -> Result<String, CliError> {
    let x = synthetic(cfg, root)?;
    let mut out = String::from("seq_id,step");
    for c in 0..x.dim() {
        write!(out, ",c{c}").unwrap();
    }
    out.push('\n');
    for i in 0..x.n() {
        for (t, row) in x.sequence(i).outer_iter().enumerate() {
            write!(out, "{i},{t}").unwrap();
            for v in row {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
    }
    Ok(out)
}

fn gram(cfg: &RunConfig, root: &SeedStream) -> Result<String, CliError> {
    let x = load_data(cfg, root)?;
    let median = if cfg.kernel.median_bandwidth { Some(median_of(&x)?) } else { None };
    let kcfg = cfg.kernel.kernel_config(median);
    let k = sig_kernel_gram(&x, None, &kcfg, cfg.kernel.algorithm).context("gram")?;
    Ok(format_matrix_csv(k.view()))
}

fn feature_matrix(cfg: &SigFeatureConfig, x: &SequenceBatch, seed: &SeedStream) -> Result<(Array2<f64>, Cost), CliError> {
    let st = fit_sig_features(cfg, x, seed).context(format!("fitting {} features", cfg.variant.name()))?;
    let (blocks, cost) = transform_sig_features_with_cost(&st, x).context(format!("{} features", cfg.variant.name()))?;
    Ok((blocks.features(cfg.normalize), cost))
}

fn features(cfg: &RunConfig, root: &SeedStream) -> Result<String, CliError> {
    let x = load_data(cfg, root)?;
    let median = if cfg.features.median_bandwidth { Some(median_of(&x)?) } else { None };
    let fcfg = cfg.features.config(median);
    let (f, _) = feature_matrix(&fcfg, &x, &root.child("features"))?;
    let mut out = String::from("seq_id");
    for j in 0..f.ncols() {
        write!(out, ",f{j}").unwrap();
    }
    out.push('\n');
    for (i, row) in f.outer_iter().enumerate() {
        write!(out, "{i}").unwrap();
        for v in row {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

/// The dual kernel the features of `fcfg` approximate: RBF static kernel of
/// the same bandwidth, same truncation and order, levelwise normalized when
/// the features are.
fn reference_kernel(fcfg: &SigFeatureConfig) -> KernelConfig {
    KernelConfig::new(StaticKernelSpec::rbf(fcfg.static_features.bandwidth), fcfg.n_levels)
        .with_order(fcfg.order)
        .with_difference(fcfg.difference)
        .with_normalization(if fcfg.normalize { Normalization::Levelwise } else { Normalization::None })
}

fn normalize_gram(levels: &[Vec<LevelValues>], normalize: bool) -> Array2<f64> {
    let n = levels.len();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let v = &levels[i][j];
        if !normalize {
            return v.total();
        }
        let (a, b) = (&levels[i][i], &levels[j][j]);
        let s: f64 = (0..v.levels().len())
            .map(|m| {
                let p = a[m] * b[m];
                if p > 0.0 { v[m] / p.sqrt() } else { 0.0 }
            })
            .sum();
        s / v.levels().len() as f64
    })
}

fn mape_cmd(cfg: &RunConfig, root: &SeedStream) -> Result<String, CliError> {
    let x = load_data(cfg, root)?;
    let median = if cfg.features.median_bandwidth { Some(median_of(&x)?) } else { None };
    let fcfg = cfg.features.config(median);
    let seed = root.child("features");
    let (f, _) = feature_matrix(&fcfg, &x, &seed)?;
    let approx = f.dot(&f.t());
    let exact = match cfg.mape.exact {
        ExactKind::Static => sig_kernel_gram(&x, None, &reference_kernel(&fcfg), Algorithm::Dp).context("exact gram")?,
        ExactKind::Lifted => {
            let st = fit_sig_features(&fcfg, &x, &seed).context("fitting features")?;
            let phis: Vec<Vec<Array2<f64>>> = (0..fcfg.n_levels)
                .map(|a| {
                    (0..x.n())
                        .map(|i| transform_static_features(st.static_state(a), x.sequence(i)))
                        .collect::<Result<_, _>>()
                })
                .collect::<Result<_, _>>()
                .context("static features")?;
            let levels: Vec<Vec<LevelValues>> = (0..x.n())
                .map(|i| {
                    (0..x.n())
                        .map(|j| {
                            let grams: Vec<Array2<f64>> = phis.iter().map(|p| p[i].dot(&p[j].t())).collect();
                            sig_kernel_dp_from_static_grams(&grams, fcfg.order, fcfg.difference)
                        })
                        .collect::<Result<_, _>>()
                })
                .collect::<Result<_, _>>()
                .context("lifted gram")?;
            normalize_gram(&levels, fcfg.normalize)
        }
    };
    let e = mape(exact.view(), approx.view()).context("mape")?;
    Ok(format!(
        "method,D,Q,M,mape\n{},{},{},{},{e}\n",
        fcfg.variant.name(),
        fcfg.n_components,
        projection_width(&fcfg),
        fcfg.n_levels
    ))
}

fn projection_width(cfg: &SigFeatureConfig) -> usize {
    match cfg.variant {
        SigVariant::Trp | SigVariant::Ts => cfg.projection_size,
        _ => 0,
    }
}

/// One row of the `bench` output.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub method: String,
    pub n: usize,
    pub l: usize,
    pub d: usize,
    pub m: usize,
    pub p: usize,
    pub components: usize,
    pub projection: usize,
    pub width: usize,
    pub wall_ms: f64,
    pub flop_count: u64,
    pub peak_bytes_est: u64,
    pub mape: Option<f64>,
}

pub const BENCH_HEADER: &str = "method,N,L,d,M,p,D,Q,F,wall_ms,flop_count,peak_bytes_est,mape";

impl BenchRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.method,
            self.n,
            self.l,
            self.d,
            self.m,
            self.p,
            self.components,
            self.projection,
            self.width,
            self.wall_ms,
            self.flop_count,
            self.peak_bytes_est,
            self.mape.map_or(String::new(), |v| v.to_string())
        )
    }

    pub fn parse_csv_row(line: &str) -> Option<BenchRecord> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 13 {
            return None;
        }
        Some(BenchRecord {
            method: f[0].to_string(),
            n: f[1].parse().ok()?,
            l: f[2].parse().ok()?,
            d: f[3].parse().ok()?,
            m: f[4].parse().ok()?,
            p: f[5].parse().ok()?,
            components: f[6].parse().ok()?,
            projection: f[7].parse().ok()?,
            width: f[8].parse().ok()?,
            wall_ms: f[9].parse().ok()?,
            flop_count: f[10].parse().ok()?,
            peak_bytes_est: f[11].parse().ok()?,
            mape: if f[12].is_empty() { None } else { Some(f[12].parse().ok()?) },
        })
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 { v[k / 2] } else { 0.5 * (v[k / 2 - 1] + v[k / 2]) }
}

fn bench(cfg: &RunConfig, root: &SeedStream) -> Result<String, CliError> {
    let b = &cfg.bench;
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    let elapsed = |t: Instant| if b.wall_clock { t.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
    for &n in &b.n_sequences {
        for &l in &b.lengths {
            let x = gen_brownian_with_drift(n, l, b.dim, &vec![0.0; b.dim], &root.child("bench").child(format!("{n}x{l}")))
                .context("bench data")?;
            let bw = if cfg.features.median_bandwidth || cfg.kernel.median_bandwidth {
                Some(median_of(&x)?)
            } else {
                None
            };
            for &m in &b.levels {
                let kcfg = KernelConfig {
                    n_levels: m,
                    ..cfg.kernel.kernel_config(bw)
                };
                let mut exact_cache: Option<(KernelConfig, Array2<f64>)> = None;
                for method in &b.methods {
                    match method.as_str() {
                        "dual_dp" | "dual_pde" => {
                            let alg = if method == "dual_dp" { Algorithm::Dp } else { Algorithm::Pde };
                            let t = Instant::now();
                            let (_, cost) = sig_kernel_gram_with_cost(&x, None, &kcfg, alg).context(format!("bench {method}"))?;
                            out.push_str(
                                &BenchRecord {
                                    method: method.clone(),
                                    n,
                                    l,
                                    d: b.dim,
                                    m,
                                    p: kcfg.effective_order(),
                                    components: 0,
                                    projection: 0,
                                    width: n,
                                    wall_ms: elapsed(t),
                                    flop_count: cost.flops,
                                    peak_bytes_est: cost.peak_bytes,
                                    mape: None,
                                }
                                .to_csv_row(),
                            );
                            out.push('\n');
                        }
                        name => {
                            let variant: SigVariant = name.parse().context("bench.methods")?;
                            for &dq in &b.components {
                                let fcfg = cfg.features.feature_config(variant, dq, m, bw);
                                let mut cost = Cost::default();
                                let mut width = 0;
                                let mut wall = 0.0;
                                let mut errors = Vec::new();
                                for s in 0..b.seeds {
                                    let seed = root.child("bench-features").index(s);
                                    let st = fit_sig_features(&fcfg, &x, &seed).context(format!("fitting {name}"))?;
                                    width = st.total_width();
                                    let t = Instant::now();
                                    let (blocks, c) = transform_sig_features_with_cost(&st, &x).context(format!("bench {name}"))?;
                                    wall += elapsed(t);
                                    if s == 0 {
                                        cost = c;
                                    }
                                    if b.with_mape {
                                        let refk = reference_kernel(&fcfg);
                                        if exact_cache.as_ref().is_none_or(|(k, _)| *k != refk) {
                                            let k = sig_kernel_gram(&x, None, &refk, Algorithm::Dp).context("exact gram")?;
                                            exact_cache = Some((refk, k));
                                        }
                                        let f = blocks.features(fcfg.normalize);
                                        let approx = f.dot(&f.t());
                                        let exact = &exact_cache.as_ref().expect("cached").1;
                                        errors.push(mape(exact.view(), approx.view()).context("mape")?);
                                    }
                                }
                                out.push_str(
                                    &BenchRecord {
                                        method: name.to_string(),
                                        n,
                                        l,
                                        d: b.dim,
                                        m,
                                        p: fcfg.order.resolve(m),
                                        components: dq,
                                        projection: projection_width(&fcfg),
                                        width,
                                        wall_ms: wall / b.seeds as f64,
                                        flop_count: cost.flops,
                                        peak_bytes_est: cost.peak_bytes,
                                        mape: b.with_mape.then(|| median(errors)),
                                    }
                                    .to_csv_row(),
                                );
                                out.push('\n');
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn classify(cfg: &RunConfig, root: &SeedStream) -> Result<String, CliError> {
    let c = &cfg.classify;
    let mut out = String::from("repeat,bandwidth,best_lambda,cv_accuracy,test_accuracy\n");
    for r in 0..c.repeats {
        let seed = root.child("classify").index(r);
        let mut drift = vec![0.0; c.dim];
        drift[0] = c.drift;
        let a = gen_brownian_with_drift(c.n_per_class, c.length, c.dim, &drift, &seed.child("class0")).context("class 0")?;
        drift[0] = -c.drift;
        let b = gen_brownian_with_drift(c.n_per_class, c.length, c.dim, &drift, &seed.child("class1")).context("class 1")?;
        let x = a.concat(&b).context("classes")?;
        let labels: Vec<usize> = (0..x.n()).map(|i| usize::from(i >= c.n_per_class)).collect();

        // stratified train/test split
        let n_test = ((c.n_per_class as f64) * c.test_fraction).round() as usize;
        let n_test = n_test.clamp(1, c.n_per_class - 1);
        let mut train = Vec::new();
        let mut test = Vec::new();
        for class in 0..2 {
            let mut idx: Vec<usize> = (0..c.n_per_class).map(|i| i + class * c.n_per_class).collect();
            idx.shuffle(&mut seed.child("split").index(class).rng());
            test.extend_from_slice(&idx[..n_test]);
            train.extend_from_slice(&idx[n_test..]);
        }
        let xtr = x.select(&train).context("split")?;
        let xte = x.select(&test).context("split")?;
        let ytr: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let yte: Vec<usize> = test.iter().map(|&i| labels[i]).collect();

        let median = if cfg.kernel.median_bandwidth { Some(median_of(&xtr)?) } else { None };
        let kcfg = cfg.kernel.kernel_config(median);
        let alg = cfg.kernel.algorithm;
        let ktr = sig_kernel_gram(&xtr, None, &kcfg, alg).context("train gram")?;
        let kte = sig_kernel_gram(&xte, Some(&xtr), &kcfg, alg).context("test gram")?;
        let cv = grid_cv(&c.lambdas, c.folds, RidgeInput::Kernel(ktr.view()), &ytr, &seed.child("cv")).context("grid_cv")?;
        let model = fit_ridge(RidgeInput::Kernel(ktr.view()), &ytr, cv.best_lambda).context("ridge")?;
        let pred = model.predict(kte.view()).context("predict")?;
        let best = c.lambdas.iter().position(|&l| l == cv.best_lambda).expect("grid member");
        writeln!(
            out,
            "{r},{},{},{},{}",
            kcfg.static_kernel.bandwidth,
            cv.best_lambda,
            cv.mean_accuracies[best],
            accuracy(&pred, &yte)
        )
        .unwrap();
    }
    Ok(out)
}
