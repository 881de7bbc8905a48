//! Acceptance criteria 1 to 10. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use chrono::NaiveDate;
use gtwnn_core::diagnostics::{
    acf, augment_grid, d4_transforms, diagnose, isotropy_test, pacf, rot90, transpose,
    DiagnosticsConfig, IsotropyConfig,
};
use gtwnn_core::eval::metrics;
use gtwnn_core::ingest::{
    build_dataset, split_train_test, CountTensor, Crs, GridSpec, SpatioTemporalGrid, TimeResolution,
};
use gtwnn_core::matrix::Matrix;
use gtwnn_core::models::{
    evaluate, fit, prepare, ArchKind, ArchitectureSpec, Model, PreparedSample,
};
use gtwnn_core::nas::{
    bayes_search, min_trials_for_top_fraction, random_search, Candidate, SearchSpace, TrialOutcome,
};
use gtwnn_core::nn::{weight_kernel, AdamConfig, LossKind, TrainConfig, Trainable};
use gtwnn_core::synth::{generate, SynthParams};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn small_grid(
    t_steps: usize,
    rows: usize,
    cols: usize,
    f: impl Fn(usize, usize, usize, usize) -> u32,
) -> SpatioTemporalGrid {
    let spec = GridSpec {
        rows,
        cols,
        origin: (0.0, 0.0),
        cell_size: (1.0, 1.0),
        t_steps,
        t_resolution: TimeResolution::Monthly,
        crs: Crs::Local,
        t_start: NaiveDate::from_ymd_opt(2010, 1, 1),
    };
    let tensor = |k: usize| {
        let mut t = CountTensor::zeros(t_steps, rows, cols);
        for ti in 0..t_steps {
            for r in 0..rows {
                for c in 0..cols {
                    *t.get_mut(ti, r, c) = f(k, ti, r, c);
                }
            }
        }
        t
    };
    let per_type = BTreeMap::from([("a".to_string(), tensor(0)), ("b".to_string(), tensor(1))]);
    SpatioTemporalGrid::from_types(spec, per_type).unwrap()
}

fn random_prepared(rng: &mut ChaCha8Rng, kind: ArchKind) -> PreparedSample {
    let grid = small_grid(5, 4, 4, |_, _, _, _| 0);
    let mut s = prepare(&grid, &build_dataset(&grid).unwrap().samples[..1], kind)
        .unwrap()
        .remove(0);
    s.input = [
        rng.gen_range(0.0..3.0),
        rng.gen_range(0.0..3.0),
        rng.gen_range(0.0..3.0),
    ];
    for v in s.ef_t.iter_mut().skip(1).chain(s.ef_tm1.iter_mut().skip(1)) {
        *v = rng.gen_range(0.0..3.0);
    }
    let b = &mut s.block;
    b.values
        .iter_mut()
        .for_each(|v| *v = rng.gen_range(0.0..4.0));
    let center = b.values.len() / 2;
    for (i, m) in b.mask.iter_mut().enumerate() {
        *m = i == center || rng.gen_bool(0.8);
    }
    s
}

fn criterion_1() -> Outcome {
    let losses = [
        LossKind::PlainMse,
        LossKind::SpatialWeighted { bandwidth_h: 1.0 },
        LossKind::SpatiotemporalWeighted {
            bandwidth_h: 1.0,
            bandwidth_ht: 1.0,
        },
    ];
    let start = Instant::now();
    let (mut worst, mut combos) = (0.0f64, 0);
    for kind in ArchKind::ALL {
        for loss in &losses {
            let (mut seeds, mut attempt) = (0, 0u64);
            while seeds < 20 {
                attempt += 1;
                check(
                    attempt < 200,
                    format!("{kind}/{}: too many fixtures on a ReLU kink", loss.tag()),
                )?;
                let mut rng = ChaCha8Rng::seed_from_u64(attempt * 1000 + kind as u64);
                let mut model =
                    Model::build(ArchitectureSpec::new(kind, vec![4, 3], 2), attempt).unwrap();
                model.layers_mut().iter_mut().for_each(|l| {
                    l.biases
                        .iter_mut()
                        .for_each(|b| *b = rng.gen_range(-0.3..0.3))
                });
                let batch: Vec<_> = (0..2).map(|_| random_prepared(&mut rng, kind)).collect();
                let margin = batch
                    .iter()
                    .map(|s| model.forward_sample(s).unwrap().relu_margin())
                    .fold(f64::INFINITY, f64::min);
                if margin < 1e-3 {
                    continue;
                }
                let refs: Vec<&PreparedSample> = batch.iter().collect();
                let (_, grads) = model.loss_and_grad(&refs, loss).unwrap();
                let h = 1e-5;
                for li in 0..model.layers().len() {
                    for k in 0..model.layers()[li].n_params() {
                        let bump = |d: f64| {
                            let mut m = model.clone();
                            *m.layers_mut()[li].values_mut().nth(k).unwrap() += d;
                            m.loss(&refs, loss).unwrap()
                        };
                        let fd = (bump(h) - bump(-h)) / (2.0 * h);
                        let an = *grads[li].values().nth(k).unwrap();
                        let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-4);
                        worst = worst.max(rel);
                        check(
                            rel <= 1e-4,
                            format!(
                                "{kind}/{} layer {li} param {k}: fd {fd} vs {an}",
                                loss.tag()
                            ),
                        )?;
                    }
                }
                seeds += 1;
            }
            combos += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 120.0, format!("took {secs:.1}s"))?;
    Ok(format!(
        "{combos} combinations x 20 seeds, max rel err {worst:.2e}, {secs:.1}s"
    ))
}

fn ar_series(coeffs: &[f64], n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; n + 100];
    for t in 0..x.len() {
        let mut v: f64 = rng.sample(rand_distr::StandardNormal);
        for (i, c) in coeffs.iter().enumerate() {
            if t > i {
                v += c * x[t - i - 1];
            }
        }
        x[t] = v;
    }
    x.split_off(100)
}

fn ols_last_coefficient(series: &[f64], k: usize) -> f64 {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let at = |i: i64| {
        if i >= 0 && (i as usize) < n {
            d[i as usize]
        } else {
            0.0
        }
    };
    let rows = n + k;
    let x = DMatrix::from_fn(rows, k, |t, j| at(t as i64 - j as i64 - 1));
    let y = DVector::from_fn(rows, |t, _| at(t as i64));
    x.svd(true, true).solve(&y, 1e-14).unwrap()[k - 1]
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let coeffs: &[f64] = match seed % 3 {
            0 => &[0.7],
            1 => &[0.5, 0.3],
            _ => &[],
        };
        let series = ar_series(coeffs, 200, seed);
        let p = pacf(&series, 10, 0.05).map_err(|e| e.to_string())?;
        for k in 1..=10 {
            let diff = (p.values[k] - ols_last_coefficient(&series, k)).abs();
            worst = worst.max(diff);
            check(
                diff <= 1e-6,
                format!("seed {seed} lag {k}: diff {diff:.2e}"),
            )?;
        }
        let a = acf(&series, 10, 0.05).map_err(|e| e.to_string())?;
        check(
            a.values[0] == 1.0,
            format!("seed {seed}: acf(0) = {}", a.values[0]),
        )?;
    }
    Ok(format!(
        "50 series, lags 1..=10, max |pacf - ols| {worst:.2e}, acf(0) = 1 exactly"
    ))
}

fn criterion_3() -> Outcome {
    check(
        weight_kernel(0.0, 1.5).unwrap() == 1.0,
        "weight_kernel(0, h) != 1",
    )?;
    let e = (weight_kernel(1.5, 1.5).unwrap() - (-0.5f64).exp()).abs();
    check(e <= 1e-12, format!("weight_kernel(h, h) off by {e:e}"))?;

    let grid = small_grid(8, 5, 5, |k, t, r, c| ((k + 2 * t + 3 * r + c) % 6) as u32);
    let samples = &build_dataset(&grid).unwrap().samples;
    let ls_samples: Vec<PreparedSample> = prepare(&grid, samples, ArchKind::GtwnnLs)
        .unwrap()
        .into_iter()
        .map(|mut s| {
            s.block = s.block.center_only();
            s
        })
        .collect();
    let scalar_samples = prepare(&grid, samples, ArchKind::Gtwnn).unwrap();

    let ls = Model::build(ArchitectureSpec::new(ArchKind::GtwnnLs, vec![5, 4], 2), 11).unwrap();
    let mut layers = ls.layers().to_vec();
    let last = layers.last_mut().unwrap();
    let n_in = last.n_in;
    last.weights = last.weights[4 * n_in..5 * n_in].to_vec();
    last.biases = vec![last.biases[4]];
    last.n_out = 1;
    let scalar = Model::from_layers(
        ArchitectureSpec::new(ArchKind::Gtwnn, vec![5, 4], 2),
        layers,
    )
    .unwrap();

    let loss = LossKind::SpatialWeighted { bandwidth_h: 1.0 };
    let a: Vec<&PreparedSample> = ls_samples.iter().collect();
    let b: Vec<&PreparedSample> = scalar_samples.iter().collect();
    let (la, lb) = (ls.loss(&a, &loss).unwrap(), scalar.loss(&b, &loss).unwrap());
    let diff = (la - lb).abs();
    check(diff <= 1e-12, format!("loss {la} vs {lb}"))?;
    Ok(format!(
        "kernel exact; masked gtwnn_ls loss {la:.6} equals gtwnn loss (diff {diff:.1e})"
    ))
}

fn criterion_4() -> Outcome {
    let m = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    let mut r = (m.data.clone(), m.rows, m.cols);
    for _ in 0..4 {
        r = rot90(&r.0, r.1, r.2);
    }
    check(r == (m.data.clone(), m.rows, m.cols), "Rot90^4 != id")?;
    let t = transpose(&m.data, m.rows, m.cols);
    check(t.0 != m.data, "transpose of the fixture should differ")?;
    check(
        transpose(&t.0, t.1, t.2) == (m.data.clone(), m.rows, m.cols),
        "Transpose^2 != id",
    )?;
    let images = d4_transforms(&m);
    check(images.len() == 8, "expected 8 transforms")?;
    for i in 0..8 {
        for j in i + 1..8 {
            check(
                images[i].1 != images[j].1,
                format!("{:?} == {:?}", images[i].0, images[j].0),
            )?;
        }
    }
    let grid = small_grid(6, 4, 7, |k, t, r, c| {
        ((k * 5 + t + r * r + 2 * c) % 5) as u32
    });
    let base = build_dataset(&grid).unwrap().len();
    let augmented: usize = augment_grid(&grid)
        .iter()
        .map(|g| build_dataset(g).unwrap().len())
        .sum();
    check(
        augmented == 8 * base,
        format!("augmented {augmented} vs 8 x {base}"),
    )?;
    Ok(format!(
        "group laws hold, 8 distinct images, dataset {base} -> {augmented}"
    ))
}

fn criterion_5() -> Outcome {
    let mut iso_max = 0.0f64;
    let mut aniso_min = f64::INFINITY;
    for seed in 0..5u64 {
        let base = SynthParams {
            spatial_kernel_radius: 2,
            seed: 500 + seed,
            ..SynthParams::default()
        };
        let cfg = IsotropyConfig {
            seed,
            ..IsotropyConfig::default()
        };
        let iso = isotropy_test(&generate(&base).unwrap(), &cfg).unwrap();
        check(
            iso.isotropic,
            format!(
                "seed {seed}: isotropic field deviates {:.3}",
                iso.max_deviation()
            ),
        )?;
        iso_max = iso_max.max(iso.max_deviation());
        let directional = SynthParams {
            anisotropy: 2.5,
            ..base
        };
        let an = isotropy_test(&generate(&directional).unwrap(), &cfg).unwrap();
        check(
            !an.isotropic,
            format!(
                "seed {seed}: directional field deviates only {:.3}",
                an.max_deviation()
            ),
        )?;
        aniso_min = aniso_min.min(an.max_deviation());
    }
    Ok(format!("5 seeds; isotropic max deviation {iso_max:.3}, directional min {aniso_min:.3}, threshold 0.15"))
}

fn criterion_6() -> Outcome {
    let regimes: [(&str, Vec<f64>, usize, ArchKind); 4] = [
        ("neither", vec![], 0, ArchKind::Gtwnn),
        ("spatial-only", vec![], 2, ArchKind::GtwnnLs),
        ("temporal-only", vec![0.5, 0.3], 0, ArchKind::Hdgtwnn),
        ("both", vec![0.5, 0.3], 2, ArchKind::HdgtwnnLs),
    ];
    let mut correct = 0;
    let mut misses = Vec::new();
    for (name, coeffs, radius, expected) in &regimes {
        for seed in 0..5u64 {
            let p = SynthParams {
                temporal_coeffs: coeffs.clone(),
                spatial_kernel_radius: *radius,
                seed: 1000 + seed,
                ..SynthParams::default()
            };
            let report = diagnose(&generate(&p).unwrap(), &DiagnosticsConfig::default()).unwrap();
            let got = report.prescription.recommendation;
            if got == *expected {
                correct += 1;
            } else {
                misses.push(format!("{name} seed {seed} -> {got}"));
            }
        }
    }
    check(
        correct == 20,
        format!("{correct}/20 correct; {}", misses.join("; ")),
    )?;
    Ok("20/20 regimes prescribed gtwnn, gtwnn_ls, hdgtwnn, hdgtwnn_ls as injected".into())
}

fn criterion_7() -> Outcome {
    let space = SearchSpace {
        layers_range: (1, 5),
        neurons_range: (1, 15),
        per_layer_neurons: false,
    };
    let objective = |c: &Candidate, _: u64| -> gtwnn_core::Result<TrialOutcome> {
        let (l, n) = (c.layers() as f64, c.neurons[0] as f64);
        Ok(TrialOutcome::objective_only(
            2.0 * (l - 2.0).powi(2) + 0.25 * (n - 7.0).powi(2),
        ))
    };
    let (mut hits, mut bo, mut rs) = (0, 0.0, 0.0);
    for seed in 0..20u64 {
        let out = bayes_search(&space, objective, 50, seed).unwrap();
        check(out.log.len() == 50, "log length != budget")?;
        hits += usize::from(
            out.best.config
                == Candidate {
                    neurons: vec![7, 7],
                },
        );
        bo += out.best.objective;
        rs += random_search(&space, objective, 50, seed)
            .unwrap()
            .best
            .objective;
    }
    let n = min_trials_for_top_fraction(0.05, 0.95).unwrap();
    check(hits >= 19, format!("argmin found in {hits}/20"))?;
    check(
        n == 59,
        format!("min_trials_for_top_fraction(0.05, 0.95) = {n}"),
    )?;
    check(
        bo <= rs,
        format!(
            "mean best {:.3} worse than random {:.3}",
            bo / 20.0,
            rs / 20.0
        ),
    )?;
    Ok(format!(
        "argmin found {hits}/20, mean best {:.3} vs random {:.3}, min trials = {n}",
        bo / 20.0,
        rs / 20.0
    ))
}

fn criterion_8() -> Outcome {
    let t = [1.0, 3.0, 5.0, 7.0];
    let perfect = metrics(&t, &t, 1e-7).unwrap();
    check(
        (perfect.mse, perfect.mape, perfect.r2) == (0.0, 0.0, Some(1.0)),
        format!("perfect: {perfect:?}"),
    )?;
    let mean = metrics(&[4.0; 4], &t, 1e-7).unwrap();
    check(
        mean.r2 == Some(0.0),
        format!("mean predictor r2 {:?}", mean.r2),
    )?;
    let worse = metrics(&[7.0, 1.0, 7.0, 1.0], &t, 1e-7).unwrap();
    check(
        worse.r2.is_some_and(|r| r < 0.0),
        format!("worse-than-mean r2 {:?}", worse.r2),
    )?;
    let eps = 1e-7;
    let zero = metrics(&[1.0, 2.0], &[0.0, 2.0], eps).unwrap();
    let order = zero.mape * eps;
    check(
        (0.1..=10.0).contains(&order),
        format!("zero-target mape {} not of order 1/eps", zero.mape),
    )?;
    Ok(format!(
        "perfect (0, 0, 1); mean r2 0; worse r2 {:.3}; zero-target mape {:.2e}",
        worse.r2.unwrap(),
        zero.mape
    ))
}

/// Targets are `|a(t-1) - b(t-1)| + 4` per cell, with each step's total split
/// uniformly at random between the two types.
fn learnable_grid(seed: u64) -> SpatioTemporalGrid {
    let (t_steps, rows, cols) = (60, 10, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = vec![0u32; t_steps * rows * cols];
    let mut b = vec![0u32; t_steps * rows * cols];
    let n = rows * cols;
    for t in 0..t_steps {
        for i in 0..n {
            let total = if t == 0 {
                rng.gen_range(4..12)
            } else {
                a[(t - 1) * n + i].abs_diff(b[(t - 1) * n + i]) + 4
            };
            let share = rng.gen_range(0..=total);
            a[t * n + i] = share;
            b[t * n + i] = total - share;
        }
    }
    small_grid(t_steps, rows, cols, |k, t, r, c| {
        if k == 0 {
            a[t * n + r * cols + c]
        } else {
            b[t * n + r * cols + c]
        }
    })
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let mut ratios = Vec::new();
    for seed in 0..3u64 {
        let grid = learnable_grid(seed);
        let (train, test) = split_train_test(&build_dataset(&grid).unwrap(), seed).unwrap();
        // A larger step than the default so six epochs are enough to converge.
        let adam = AdamConfig {
            alpha: 1e-2,
            ..AdamConfig::default()
        };
        let cfg = TrainConfig {
            epochs: 6,
            batch_size: 10,
            seed,
            adam,
        };
        let mut mse = BTreeMap::new();
        for kind in [ArchKind::Vanilla, ArchKind::Gtwnn] {
            let tr = prepare(&grid, &train.samples, kind).unwrap();
            let te = prepare(&grid, &test.samples, kind).unwrap();
            let spec = ArchitectureSpec::new(kind, vec![10, 10], 2);
            let (model, _) = fit(spec, &tr, &cfg, &LossKind::PlainMse, seed).unwrap();
            mse.insert(kind, evaluate(&model, &te, 1e-7).unwrap().mse);
        }
        let ratio = mse[&ArchKind::Gtwnn] / mse[&ArchKind::Vanilla];
        check(
            ratio <= 0.5,
            format!(
                "seed {seed}: gtwnn {:.3} vs vanilla {:.3}",
                mse[&ArchKind::Gtwnn],
                mse[&ArchKind::Vanilla]
            ),
        )?;
        ratios.push(format!("{ratio:.3}"));
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 300.0, format!("took {secs:.1}s"))?;
    Ok(format!(
        "gtwnn/vanilla test MSE ratios [{}], {secs:.1}s",
        ratios.join(", ")
    ))
}

fn pipeline(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let bin = env!("CARGO_BIN_EXE_gtwnn");
    let d = dir.to_str().unwrap();
    let grid = dir.join("grid.gtw");
    let ckpt = dir.join("model.ckpt");
    let steps: [Vec<&str>; 3] = [
        vec![
            "--output-dir",
            d,
            "--seed",
            "2024",
            "synth",
            "--rows",
            "8",
            "--cols",
            "8",
            "--t-steps",
            "36",
            "--coeffs",
            "0.5,0.3",
            "--radius",
            "1",
        ],
        vec![
            "--output-dir",
            d,
            "--seed",
            "2024",
            "train",
            "--grid",
            grid.to_str().unwrap(),
            "--arch",
            "hdgtwnn_ls",
        ],
        vec![
            "--output-dir",
            d,
            "--seed",
            "2024",
            "evaluate",
            "--grid",
            grid.to_str().unwrap(),
            "--checkpoint",
            ckpt.to_str().unwrap(),
        ],
    ];
    for args in &steps {
        let out = Command::new(bin)
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!(
                "{args:?}: {}",
                String::from_utf8_lossy(&out.stderr)
            ));
        }
    }
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let p = entry.map_err(|e| e.to_string())?.path();
        files.insert(
            p.file_name().unwrap().to_string_lossy().into_owned(),
            fs::read(&p).map_err(|e| e.to_string())?,
        );
    }
    Ok(files)
}

fn criterion_10() -> Outcome {
    let root = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let a = pipeline(&root.path().join("a"))?;
    let b = pipeline(&root.path().join("b"))?;
    check(a.keys().eq(b.keys()), "runs produced different file sets")?;
    for (name, bytes) in &a {
        check(b[name] == *bytes, format!("{name} differs between runs"))?;
    }
    let total: usize = a.values().map(Vec::len).sum();
    Ok(format!(
        "synth -> train -> evaluate twice: {} files, {total} bytes identical",
        a.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("gradient suite", criterion_1),
        ("pacf oracle", criterion_2),
        ("kernel and loss", criterion_3),
        ("d4 augmentation", criterion_4),
        ("isotropy", criterion_5),
        ("prescription", criterion_6),
        ("nas", criterion_7),
        ("metrics", criterion_8),
        ("learnability", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
