use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use nalgebra::DVector;
use mdof_twin::model::to_state_space;
use mdof_twin::sde::{simulate_window, IntegratorConfig};
use mdof_twin::twin::{
    generate_campaign, predict_parameters, predict_response, synthesize_window, write_track_csv, MeasurementWindow,
    ResponseConfig, TwinReport, TwinSnapshot,
};
use mdof_twin::ukf::{initial_belief, run_filter};
use serde::Serialize;
use serde_json::json;

use crate::config::{Overrides, Resolved, RunConfig};
use crate::{CliError, Command, Common};

type CliResult<T> = Result<T, CliError>;

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Simulate { common } => simulate(&common),
        Command::Filter { common, window } => filter(&common, window.as_deref()),
        Command::Campaign { common } => campaign(&common),
        Command::Predict {
            common,
            snapshot,
            at,
            ensemble,
            duration,
        } => predict(&common, snapshot.as_deref(), at, ensemble, duration),
        Command::Report { common, snapshot } => report(&common, snapshot.as_deref()),
    }
}

fn resolve(common: &Common) -> CliResult<Resolved> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    cfg.resolve(&Overrides {
        seed: common.seed,
        observe: common.observe.clone(),
        cutoff_days: common.cutoff_days,
    })
}

fn prepare_out(common: &Common) -> CliResult<&Path> {
    fs::create_dir_all(&common.out)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", common.out.display())))?;
    Ok(&common.out)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn echo<T: Serialize>(out: &Path, command: &str, config: &T) -> CliResult<()> {
    write_json(
        &out.join(format!("config_echo_{command}.json")),
        &json!({ "command": command, "config": config }),
    )
}

fn simulate(common: &Common) -> CliResult<()> {
    let r = resolve(common)?;
    let out = prepare_out(common)?;
    echo(out, "simulate", &r)?;
    let model = to_state_space(&r.system, &[])?;
    let integ = IntegratorConfig {
        dt: r.campaign.dt,
        scheme: r.campaign.scheme,
        seed: r.seed,
    };
    let y0 = DVector::zeros(model.n_dof() * 2);
    let tr = simulate_window(&model, &y0, r.campaign.window_duration, &integ)?;
    tr.write_csv(create(&out.join("trajectory.csv"))?)?;
    write_json(
        &out.join("trajectory.json"),
        &json!({
            "system": r.system_document,
            "integrator": integ,
            "duration": r.campaign.window_duration,
            "samples": tr.len(),
            "columns": tr.header(),
        }),
    )?;
    let window = synthesize_window(
        &r.system,
        r.system.stiffnesses(),
        0.0,
        &r.campaign.synthesis(&r.system),
        r.seed,
    )?;
    window.save(out, "window")?;
    info!("wrote {} samples to {}", tr.len(), out.display());
    Ok(())
}

fn load_window(path: &Path) -> CliResult<MeasurementWindow> {
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| CliError::usage(format!("bad window path {}", path.display())))?;
    Ok(MeasurementWindow::load(&dir, stem)?)
}

fn filter(common: &Common, window: Option<&Path>) -> CliResult<()> {
    let r = resolve(common)?;
    let out = prepare_out(common)?;
    echo(out, "filter", &r)?;
    let window = match window {
        Some(p) => load_window(p)?,
        None => synthesize_window(
            &r.system,
            r.system.stiffnesses(),
            0.0,
            &r.campaign.synthesis(&r.system),
            r.seed,
        )?,
    };
    let snap = TwinSnapshot::new(r.system.clone(), r.campaign.clone())?;
    let model = snap.model()?;
    let guess = snap.next_guess();
    let init = initial_belief(&model, &guess, &r.campaign.filter.initial)?;
    let start = Instant::now();
    let run = run_filter(&model, &window, &init, &r.campaign.filter)?;
    info!("filtered {} samples in {:.2?}", window.len(), start.elapsed());
    run.write_csv(create(&out.join("filter.csv"))?)?;
    write_json(&out.join("filter_summary.json"), &run.summary(&r.campaign.filter))?;
    for (j, &p) in run.parameter_indices.iter().enumerate() {
        println!(
            "k{} = {:.4} (sd {:.4})",
            p + 1,
            run.terminal_parameters()[j],
            run.terminal_parameter_std_devs()[j]
        );
    }
    Ok(())
}

/// Dense slow-time grid for the GP track: ten points per window interval.
fn track_grid(snap: &TwinSnapshot) -> Vec<f64> {
    let step = snap.config.window_interval / 10.0;
    let end = snap.config.horizon.max(snap.config.cutoff_days.unwrap_or(0.0));
    let n = (end / step).round() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

fn write_outputs(out: &Path, snap: &TwinSnapshot) -> CliResult<()> {
    snap.save(&out.join("snapshot.json"))?;
    snap.write_estimates_csv(create(&out.join("estimates.csv"))?)?;
    if !snap.gp_models.is_empty() {
        let f = predict_parameters(snap, &track_grid(snap))?;
        write_track_csv(&f, create(&out.join("gp_track.csv"))?)?;
    }
    Ok(())
}

fn campaign(common: &Common) -> CliResult<()> {
    let r = resolve(common)?;
    let out = prepare_out(common)?;
    echo(out, "campaign", &r)?;
    let start = Instant::now();
    let schedule = r.campaign.schedule(&r.system);
    let windows = generate_campaign(&r.system, &schedule, &r.campaign)?;
    info!("generated {} windows in {:.2?}", windows.len(), start.elapsed());
    let mut snap = TwinSnapshot::new(r.system.clone(), r.campaign.clone())?;
    for w in &windows {
        if let Err(e) = snap.assimilate(w) {
            write_outputs(out, &snap)?;
            return Err(e.into());
        }
    }
    write_outputs(out, &snap)?;
    let report = TwinReport::from_snapshot(&snap)?;
    print!("{}", report.to_text());
    info!("campaign finished in {:.2?}", start.elapsed());
    Ok(())
}

fn load_snapshot(common: &Common, path: Option<&Path>) -> CliResult<(PathBuf, TwinSnapshot)> {
    let path = path.map(Path::to_path_buf).unwrap_or_else(|| common.out.join("snapshot.json"));
    if !path.exists() {
        return Err(CliError::usage(format!("snapshot {} not found", path.display())));
    }
    let snap = TwinSnapshot::load(&path)?;
    Ok((path, snap))
}

fn predict(
    common: &Common,
    snapshot: Option<&Path>,
    at: Option<Vec<f64>>,
    ensemble: usize,
    duration: Option<f64>,
) -> CliResult<()> {
    let (path, snap) = load_snapshot(common, snapshot)?;
    let out = prepare_out(common)?;
    let at = at.unwrap_or_else(|| vec![snap.config.horizon]);
    let cfg = ResponseConfig {
        duration: duration.unwrap_or(snap.config.window_duration),
        seed: common.seed.unwrap_or(snap.config.master_seed),
        ensemble,
    };
    echo(
        out,
        "predict",
        &json!({ "snapshot": path, "at": at, "response": cfg, "campaign": snap.config }),
    )?;
    let forecasts = predict_parameters(&snap, &at)?;
    write_track_csv(&forecasts, create(&out.join("parameter_forecast.csv"))?)?;
    let mut summary = Vec::new();
    for &t in &at {
        let r = predict_response(&snap, t, &cfg)?;
        r.trajectory.write_csv(create(&out.join(format!("response_{t}.csv")))?)?;
        if let Some(e) = &r.ensemble {
            e.write_csv(create(&out.join(format!("ensemble_{t}.csv")))?)?;
        }
        summary.push(json!({ "t_s": t, "stiffness": r.stiffness, "stiffness_std": r.stiffness_std }));
        println!(
            "t_s = {t}: k = [{}]",
            r.stiffness.iter().map(|k| format!("{k:.3}")).collect::<Vec<_>>().join(", ")
        );
    }
    write_json(&out.join("forecast.json"), &summary)?;
    Ok(())
}

fn report(common: &Common, snapshot: Option<&Path>) -> CliResult<()> {
    let (path, snap) = load_snapshot(common, snapshot)?;
    let out = prepare_out(common)?;
    echo(out, "report", &json!({ "snapshot": path, "campaign": snap.config }))?;
    let report = TwinReport::from_snapshot(&snap)?;
    let text = report.to_text();
    write_json(&out.join("report.json"), &report)?;
    fs::write(out.join("report.txt"), &text)?;
    print!("{text}");
    Ok(())
}
