use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gtwnn_core::diagnostics::{diagnose as run_diagnostics, DiagnosticsConfig, IsotropyConfig};
use gtwnn_core::eval::{
    diff_map, rescale_to_max, time_averaged_map, write_diverging_ppm, write_pgm,
};
use gtwnn_core::ingest::{
    build_dataset_with, fit_grid_spec, histogram, parse_records, split_train_test, DatasetOptions,
    SpatioTemporalGrid,
};
use gtwnn_core::matrix::Matrix;
use gtwnn_core::models::{
    evaluate as evaluate_model, fit, predict_all, prepare, read_checkpoint, write_checkpoint,
    ArchKind, ArchitectureSpec, PreparedSample,
};
use gtwnn_core::nas::{run_architecture_search, trial_log_csv, SearchData, SearchSpace};
use gtwnn_core::nn::LossKind;
use gtwnn_core::synth::generate;
use log::info;

use crate::config::RunConfig;

pub const GRID_FILE: &str = "grid.gtw";
pub const CHECKPOINT_FILE: &str = "model.ckpt";

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

/// Writes through a temporary sibling and renames, so a failed write never
/// leaves a truncated file under the final name.
fn write_output(
    cfg: &RunConfig,
    name: &str,
    write: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    let path = out_path(cfg, name);
    let tmp = out_path(cfg, &format!(".{name}.tmp"));
    {
        let mut w = BufWriter::new(
            File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?,
        );
        write(&mut w)?;
        w.flush()?;
    }
    fs::rename(&tmp, &path)?;
    info!("wrote {}", path.display());
    Ok(path)
}

fn write_text(cfg: &RunConfig, name: &str, text: &str) -> Result<PathBuf> {
    write_output(cfg, name, |w| Ok(w.write_all(text.as_bytes())?))
}

fn read_grid(path: &Path) -> Result<SpatioTemporalGrid> {
    let f = File::open(path).with_context(|| format!("opening grid {}", path.display()))?;
    SpatioTemporalGrid::read_container(BufReader::new(f))
        .with_context(|| format!("reading grid {}", path.display()))
}

fn write_grid(cfg: &RunConfig, grid: &SpatioTemporalGrid) -> Result<PathBuf> {
    write_output(cfg, GRID_FILE, |w| Ok(grid.write_container(w)?))
}

pub fn ingest(cfg: &RunConfig) -> Result<()> {
    let input = cfg
        .input
        .as_ref()
        .context("ingest needs an input file (--input)")?;
    let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let parsed = parse_records(BufReader::new(file), &cfg.grid.schema)?;
    if parsed.records.is_empty() {
        bail!(
            "{} contains no usable records ({} dropped)",
            input.display(),
            parsed.dropped
        );
    }
    let spec = fit_grid_spec(
        &parsed.records,
        cfg.grid.crs,
        cfg.grid.resolution,
        cfg.grid.seed_n,
    )?;
    let outcome = histogram(&parsed.records, &spec)?;
    let spec = &outcome.grid.spec;
    let total = parsed.records.len() + parsed.dropped;
    let summary = format!(
        "rows_read: {total}\nrows_kept: {}\nrows_dropped: {} ({:.2}%)\nout_of_extent: {}\n\
         grid: {} rows x {} cols\ncell_size_km: {:.4} x {:.4}\ntime_steps: {}\ntypes: {}\n",
        parsed.records.len(),
        parsed.dropped,
        100.0 * parsed.dropped as f64 / total.max(1) as f64,
        outcome.out_of_extent,
        spec.rows,
        spec.cols,
        spec.cell_size.0,
        spec.cell_size.1,
        spec.t_steps,
        outcome.grid.n_types(),
    );
    write_grid(cfg, &outcome.grid)?;
    write_text(cfg, "ingest_summary.txt", &summary)?;
    print!("{summary}");
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> Result<()> {
    let params = cfg.synth.to_params(cfg.seeds.synth());
    let grid = generate(&params)?;
    let path = write_grid(cfg, &grid)?;
    println!(
        "synthetic grid {}x{}x{} ({} events) -> {}",
        params.t_steps,
        params.rows,
        params.cols,
        grid.counts.total(),
        path.display()
    );
    Ok(())
}

pub fn diagnose(cfg: &RunConfig, grid_path: &Path) -> Result<()> {
    let grid = read_grid(grid_path)?;
    let d = &cfg.diagnose;
    let dcfg = DiagnosticsConfig {
        alpha: d.alpha,
        acf_max_lag: d.acf_max_lag,
        pacf_max_lag: d.pacf_max_lag,
        spatial_max_lag: d.spatial_max_lag,
        isotropy: IsotropyConfig {
            window: d.isotropy_window,
            sample_frac: d.isotropy_sample_frac,
            threshold: d.isotropy_threshold,
            seed: cfg.seeds.master,
        },
    };
    let report = run_diagnostics(&grid, &dcfg).context("diagnostics failed")?;
    for (name, curve) in report.curves() {
        write_text(cfg, &format!("{name}.csv"), &curve.to_csv())?;
    }
    write_text(cfg, "isotropy.csv", &report.isotropy_csv())?;
    let text = report.to_text();
    write_text(cfg, "diagnostics.txt", &text)?;
    write_text(
        cfg,
        "prescription.txt",
        &format!("{}\n", report.prescription.recommendation),
    )?;
    print!("{text}");
    Ok(())
}

/// Train and test sets prepared for `kind`, split on the final year.
fn prepared_split(
    cfg: &RunConfig,
    grid: &SpatioTemporalGrid,
    kind: ArchKind,
) -> Result<(Vec<PreparedSample>, Vec<PreparedSample>)> {
    let opts = DatasetOptions {
        skip_inactive_cells: cfg.grid.skip_inactive_cells,
    };
    let dataset = build_dataset_with(grid, opts)?;
    let (train, test) = split_train_test(&dataset, cfg.seeds.shuffle())?;
    Ok((
        prepare(grid, &train.samples, kind)?,
        prepare(grid, &test.samples, kind)?,
    ))
}

fn loss_for(cfg: &RunConfig, grid: &SpatioTemporalGrid) -> LossKind {
    let h = cfg.model.bandwidth_h.unwrap_or(grid.spec.cell_size.0);
    cfg.model
        .architecture
        .default_loss(h, cfg.model.bandwidth_ht)
}

pub fn train(cfg: &RunConfig, grid_path: &Path) -> Result<()> {
    let grid = read_grid(grid_path)?;
    let kind = cfg.model.architecture;
    let spec = ArchitectureSpec::new(kind, cfg.model.neurons.clone(), grid.n_types());
    spec.validate()?;
    let (train_set, test_set) = prepared_split(cfg, &grid, kind)?;
    let loss = loss_for(cfg, &grid);
    let tcfg = cfg.train.to_train_config(cfg.seeds.shuffle());
    info!("training {kind} on {} samples", train_set.len());
    let (model, trace) = fit(spec, &train_set, &tcfg, &loss, cfg.seeds.init())?;
    let report = evaluate_model(&model, &test_set, cfg.eval.epsilon)?;

    let mut trace_csv = String::from("epoch,loss\n");
    for (e, l) in trace.iter().enumerate() {
        trace_csv.push_str(&format!("{e},{l}\n"));
    }
    write_output(cfg, CHECKPOINT_FILE, |w| Ok(write_checkpoint(&model, w)?))?;
    write_text(cfg, "loss_trace.csv", &trace_csv)?;
    write_text(cfg, "train_report.csv", &report.to_csv())?;
    println!(
        "{kind}: test mse {} mape {} r2 {}",
        report.mse,
        report.mape,
        report
            .r2
            .map_or_else(|| "undefined".into(), |v| v.to_string())
    );
    Ok(())
}

pub fn search(cfg: &RunConfig, grid_path: &Path) -> Result<()> {
    let grid = read_grid(grid_path)?;
    let kind = cfg.model.architecture;
    let s = &cfg.search;
    let space = SearchSpace {
        layers_range: s.layers_range.unwrap_or(kind.layer_range()),
        neurons_range: s.neurons_range,
        per_layer_neurons: s.per_layer_neurons,
    };
    let (train_set, test_set) = prepared_split(cfg, &grid, kind)?;
    let loss = loss_for(cfg, &grid);
    let tcfg = cfg.train.to_train_config(cfg.seeds.shuffle());
    let data = SearchData {
        train: &train_set,
        validation: &test_set,
        n_types: grid.n_types(),
        train_config: &tcfg,
        loss: &loss,
    };
    let report = run_architecture_search(kind, &data, &space, s.budget, cfg.seeds.nas())?;
    write_text(
        cfg,
        "trial_log.csv",
        &trial_log_csv(&report.log, s.record_wall_time),
    )?;
    write_text(cfg, "search_report.csv", &report.to_csv())?;
    print!("{}", report.to_csv());
    Ok(())
}

fn write_map(cfg: &RunConfig, stem: &str, map: &Matrix, diverging: bool) -> Result<()> {
    write_text(cfg, &format!("{stem}.csv"), &map.to_csv())?;
    if diverging {
        write_output(cfg, &format!("{stem}.ppm"), |w| {
            Ok(write_diverging_ppm(map, w)?)
        })?;
    } else {
        write_output(cfg, &format!("{stem}.pgm"), |w| Ok(write_pgm(map, w)?))?;
    }
    Ok(())
}

pub fn evaluate(cfg: &RunConfig, grid_path: &Path, checkpoint: &Path) -> Result<()> {
    let grid = read_grid(grid_path)?;
    let file =
        File::open(checkpoint).with_context(|| format!("opening {}", checkpoint.display()))?;
    let model = read_checkpoint(BufReader::new(file))
        .with_context(|| format!("reading checkpoint {}", checkpoint.display()))?;
    let kind = model.spec().kind;
    if model.spec().n_types != grid.n_types() {
        bail!(
            "checkpoint expects {} crime types, grid has {}",
            model.spec().n_types,
            grid.n_types()
        );
    }
    let (train_set, test_set) = prepared_split(cfg, &grid, kind)?;
    let report = evaluate_model(&model, &test_set, cfg.eval.epsilon)?;

    // Maps average over the test period, north up.
    let t_steps = grid.spec.t_steps;
    let test_start = test_set
        .iter()
        .map(|s| s.t)
        .min()
        .context("empty test set")?;
    let train_end = train_set
        .iter()
        .map(|s| s.t)
        .max()
        .map_or(test_start, |t| t + 1);
    let actual = time_averaged_map(&grid, test_start..t_steps)?;
    let mut predicted = Matrix::zeros(grid.spec.rows, grid.spec.cols);
    let preds = predict_all(&model, &test_set)?;
    let steps = (t_steps - test_start) as f64;
    for (s, p) in test_set.iter().zip(&preds) {
        predicted.set(s.row, s.col, predicted.get(s.row, s.col) + p);
    }
    predicted.data.iter_mut().for_each(|v| *v /= steps);
    let diff = diff_map(&actual, &predicted)?;
    write_text(cfg, "eval_report.csv", &report.to_csv())?;
    write_map(cfg, "actual_map", &actual, false)?;
    write_map(cfg, "predicted_map", &predicted, false)?;
    write_map(cfg, "diff_map", &diff, true)?;
    let train_mean = time_averaged_map(&grid, 0..train_end)?;
    match rescale_to_max(&train_mean, &actual) {
        Ok(rescaled) => write_map(cfg, "train_mean_rescaled", &rescaled, false)?,
        Err(e) => log::warn!("skipping rescaled training map: {e}"),
    }
    println!(
        "{kind}: mse {} mape {} r2 {}",
        report.mse,
        report.mape,
        report
            .r2
            .map_or_else(|| "undefined".into(), |v| v.to_string())
    );
    Ok(())
}
