use super::*;
use crate::error::TwinError;
use crate::gpr::{train, GpConfig, TrackedParameter};
use crate::model::{
    build_duffing_2dof, build_dvp_7dof, degraded_stiffness, to_state_space, MdofSystem, SevenDofParams,
    SystemDocument, TwoDofParams,
};
use crate::sde::{simulate_window, IntegratorConfig, Scheme};
use rustfft::{num_complex::Complex, FftPlanner};

fn two_dof() -> MdofSystem {
    build_duffing_2dof(&TwoDofParams::default()).unwrap()
}

fn short_config(horizon: f64, duration: f64) -> CampaignConfig {
    CampaignConfig {
        horizon,
        window_duration: duration,
        ..CampaignConfig::default()
    }
}

/// Snapshot with GP models fitted directly to `k0 exp(−rate t)` samples,
/// bypassing the filter.
fn snapshot_with_decay_models(system: &MdofSystem, rate: f64, last_t: f64) -> TwinSnapshot {
    let mut snap = TwinSnapshot::new(system.clone(), CampaignConfig::default()).unwrap();
    let t: Vec<f64> = (0..)
        .map(|i| 50.0 * i as f64)
        .take_while(|&t| t <= last_t)
        .collect();
    snap.gp_models = system
        .stiffnesses()
        .iter()
        .enumerate()
        .map(|(i, &k0)| {
            let v: Vec<f64> = t.iter().map(|&t| k0 * (-rate * t).exp()).collect();
            TrackedParameter {
                index: i,
                model: train(&t, &v, None, &GpConfig::default()).unwrap(),
            }
        })
        .collect();
    snap
}

#[test]
fn window_grid_has_41_points() {
    let t = CampaignConfig::default().window_times();
    assert_eq!(t.len(), 41);
    assert_eq!(t[0], 0.0);
    assert_eq!(t[40], 2000.0);
    assert!(t.windows(2).all(|w| w[1] - w[0] == 50.0));
}

#[test]
fn campaign_truth_follows_decay() {
    let sys = two_dof();
    let cfg = short_config(2000.0, 0.2);
    let windows = generate_campaign(&sys, &cfg.schedule(&sys), &cfg).unwrap();
    assert_eq!(windows.len(), 41);
    let Provenance::Synthetic { seed, true_stiffness } = &windows[40].provenance else {
        panic!("expected synthetic provenance")
    };
    assert_eq!(*seed, 40);
    // 1000 e^{-0.1}
    assert!((true_stiffness[0] - 904.837_418_035_959_6).abs() < 1e-9);
    assert!((true_stiffness[1] - 452.418_709_017_979_8).abs() < 1e-9);
    assert_eq!(windows[40].t_s, 2000.0);
    assert_eq!(windows[0].len(), 201);
}

#[test]
fn zero_rate_keeps_nominal_truth() {
    let sys = two_dof();
    let cfg = CampaignConfig {
        decay_rate: 0.0,
        ..short_config(200.0, 0.1)
    };
    let windows = generate_campaign(&sys, &cfg.schedule(&sys), &cfg).unwrap();
    for w in &windows {
        match &w.provenance {
            Provenance::Synthetic { true_stiffness, .. } => assert_eq!(true_stiffness, &vec![1000.0, 500.0]),
            _ => unreachable!(),
        }
    }
    assert_ne!(windows[0].accel, windows[1].accel);
}

#[test]
fn campaign_generation_is_reproducible() {
    let sys = two_dof();
    let cfg = CampaignConfig {
        decay_rate: 0.0,
        ..short_config(300.0, 0.3)
    };
    let a = generate_campaign(&sys, &cfg.schedule(&sys), &cfg).unwrap();
    let b = generate_campaign(&sys, &cfg.schedule(&sys), &cfg).unwrap();
    assert_eq!(a, b);
    let other = CampaignConfig {
        master_seed: 1,
        ..cfg.clone()
    };
    let c = generate_campaign(&sys, &other.schedule(&sys), &other).unwrap();
    assert!(c[0].accel == a[1].accel, "window seed is master + index");
}

#[test]
fn invalid_campaign_configs_rejected() {
    let sys = two_dof();
    for cfg in [
        CampaignConfig {
            window_interval: 0.0,
            ..CampaignConfig::default()
        },
        CampaignConfig {
            window_duration: -1.0,
            ..CampaignConfig::default()
        },
        CampaignConfig {
            observed_dofs: vec![2],
            ..CampaignConfig::default()
        },
        CampaignConfig {
            initial_guess: Some(vec![1.0]),
            ..CampaignConfig::default()
        },
    ] {
        assert!(TwinSnapshot::new(sys.clone(), cfg).is_err());
    }
}

#[test]
fn first_window_gives_history_without_gp() {
    let sys = two_dof();
    let cfg = short_config(0.0, 1.0);
    let w = generate_campaign(&sys, &cfg.schedule(&sys), &cfg).unwrap();
    let snap = assimilate_window(&TwinSnapshot::new(sys, cfg).unwrap(), &w[0]).unwrap();
    assert_eq!(snap.windows_processed, 1);
    assert_eq!(snap.history.len(), 1);
    assert!(snap.history[0].is_accepted());
    assert_eq!(snap.history[0].initial_guess, vec![800.0, 400.0]);
    assert!(snap.gp_models.is_empty());
    assert!(matches!(predict_parameters(&snap, &[0.0]), Err(TwinError::Untrained)));
}

#[test]
fn out_of_order_window_leaves_snapshot_untouched() {
    let sys = two_dof();
    let cfg = short_config(100.0, 0.5);
    let w = generate_campaign(&sys, &cfg.schedule(&sys), &cfg).unwrap();
    let mut snap = TwinSnapshot::new(sys, cfg).unwrap();
    snap.assimilate(&w[1]).unwrap();
    let before = snap.clone();
    assert!(matches!(snap.assimilate(&w[0]), Err(TwinError::OutOfOrder { .. })));
    assert!(matches!(snap.assimilate(&w[1]), Err(TwinError::OutOfOrder { .. })));
    assert_eq!(snap, before);
    snap.assimilate(&w[2]).unwrap();
    assert_eq!(snap.windows_processed, 2);
}

#[test]
fn numeric_failure_marks_window_rejected() {
    let sys = two_dof();
    let cfg = short_config(150.0, 0.5);
    let mut w = generate_campaign(&sys, &cfg.schedule(&sys), &cfg).unwrap();
    w[1].force[(100, 0)] = 1e300;
    let mut snap = TwinSnapshot::new(sys, cfg).unwrap();
    snap.assimilate_all(&w).unwrap();
    assert_eq!(snap.windows_processed, 4);
    assert!(matches!(snap.history[1].status, WindowStatus::Rejected { .. }));
    assert!(snap.history[1].estimates.is_empty());
    let t: Vec<f64> = snap.history.iter().map(|r| r.t_s).collect();
    assert_eq!(t, vec![0.0, 50.0, 100.0, 150.0]);
    // the next window warm-starts from the last accepted one
    assert_eq!(snap.history[2].initial_guess, snap.history[0].estimates);
    assert_eq!(snap.accepted().count(), 3);
    assert_eq!(snap.gp_models.len(), 2);
    let report = TwinReport::from_snapshot(&snap).unwrap();
    assert_eq!(report.rejected.len(), 1);
    assert_eq!(report.rejected[0].t_s, 50.0);
}

#[test]
fn incremental_matches_batch() {
    let sys = two_dof();
    let cfg = short_config(200.0, 1.0);
    let w = generate_campaign(&sys, &cfg.schedule(&sys), &cfg).unwrap();
    let mut one = TwinSnapshot::new(sys.clone(), cfg.clone()).unwrap();
    for x in &w {
        one = assimilate_window(&one, x).unwrap();
    }
    let mut batch = TwinSnapshot::new(sys, cfg).unwrap();
    batch.assimilate_all(&w).unwrap();
    assert_eq!(one.history, batch.history);
    assert_eq!(one.gp_models, batch.gp_models);
    for k in 1..w.len() {
        assert_eq!(one.history[k].initial_guess, one.history[k - 1].estimates);
    }
}

#[test]
fn snapshot_round_trip_is_byte_identical() {
    let sys = two_dof();
    let cfg = short_config(150.0, 0.5);
    let w = generate_campaign(&sys, &cfg.schedule(&sys), &cfg).unwrap();
    let mut snap = TwinSnapshot::new(sys, cfg).unwrap();
    snap.assimilate_all(&w).unwrap();
    assert!(!snap.gp_models.is_empty());
    let text = snap.to_json().unwrap();
    let back = TwinSnapshot::from_json(&text).unwrap();
    assert_eq!(back.to_json().unwrap(), text);
    assert_eq!(back, snap);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("snap.json");
    snap.save(&path).unwrap();
    assert_eq!(TwinSnapshot::load(&path).unwrap().to_json().unwrap(), text);
}

#[test]
fn snapshot_rejects_bad_version_and_count() {
    let snap = TwinSnapshot::new(two_dof(), CampaignConfig::default()).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&snap.to_json().unwrap()).unwrap();
    v["version"] = 99.into();
    assert!(matches!(TwinSnapshot::from_json(&v.to_string()), Err(TwinError::Format(_))));
    v["version"] = SNAPSHOT_VERSION.into();
    v["windows_processed"] = 3.into();
    assert!(matches!(TwinSnapshot::from_json(&v.to_string()), Err(TwinError::Format(_))));
}

#[test]
fn estimates_improve_after_warm_starts() {
    let sys = two_dof();
    let cfg = short_config(1000.0, 5.0);
    let w = generate_campaign(&sys, &cfg.schedule(&sys), &cfg).unwrap();
    let mut snap = TwinSnapshot::new(sys, cfg).unwrap();
    snap.assimilate_all(&w).unwrap();
    let err = |r: &WindowRecord| {
        let truth = r.true_stiffness().unwrap();
        r.estimates
            .iter()
            .zip(truth)
            .map(|(e, t)| ((e - t) / t).abs())
            .fold(0.0, f64::max)
    };
    let first = err(&snap.history[0]);
    let twentieth = err(&snap.history[20]);
    assert!(twentieth < first, "window 1 {first}, window 21 {twentieth}");
    assert!(snap.history.iter().all(|r| err(r) < 0.05));
}

#[test]
fn frozen_parameter_is_estimated_but_not_tracked() {
    let sys = build_dvp_7dof(&SevenDofParams::default()).unwrap();
    let snap = TwinSnapshot::new(sys, CampaignConfig::default()).unwrap();
    assert_eq!(snap.parameters, (0..7).collect::<Vec<_>>());
    assert_eq!(snap.tracked_parameters(), vec![0, 1, 2, 4, 5, 6]);
    let guess = snap.next_guess();
    assert_eq!(guess[3], 1000.0);
    assert_eq!(guess[0], 0.8 * 2000.0);
}

#[test]
fn training_series_respects_cutoff() {
    let sys = two_dof();
    let cfg = CampaignConfig {
        cutoff_days: Some(100.0),
        ..short_config(200.0, 0.5)
    };
    let w = generate_campaign(&sys, &cfg.schedule(&sys), &cfg).unwrap();
    let mut snap = TwinSnapshot::new(sys, cfg).unwrap();
    snap.assimilate_all(&w).unwrap();
    let series = snap.training_series();
    assert_eq!(series.len(), 2);
    assert_eq!(series[0].t_s, vec![0.0, 50.0, 100.0]);
    assert_eq!(snap.gp_models[0].model.inputs(), &[0.0, 50.0, 100.0]);
    let report = TwinReport::from_snapshot(&snap).unwrap();
    assert_eq!(report.held_out.len(), 4);
    assert!(report.held_out.iter().all(|h| h.t_s > 100.0));
}

#[test]
fn forecast_at_last_window_matches_fit() {
    let sys = two_dof();
    let snap = snapshot_with_decay_models(&sys, 0.5e-4, 1500.0);
    let f = predict_parameters(&snap, &[1500.0, 1750.0, 2000.0]).unwrap();
    assert_eq!(f.len(), 2);
    let fit = snap.gp_models[0].model.predict(&[1500.0]);
    assert_eq!(f[0].prediction.mean[0], fit.mean[0]);
    let truth = 1000.0 * (-0.075f64).exp();
    // the noise floor keeps the fit from interpolating exactly
    assert!((f[0].prediction.mean[0] - truth).abs() < 1e-4 * truth, "{} vs {truth}", f[0].prediction.mean[0]);
    let sd = f[0].prediction.std_dev();
    assert!(sd[0] <= sd[1] && sd[1] <= sd[2]);
}

#[test]
fn track_csv_layout() {
    let snap = snapshot_with_decay_models(&two_dof(), 0.5e-4, 500.0);
    let f = predict_parameters(&snap, &[0.0, 250.0, 600.0]).unwrap();
    let mut buf = Vec::new();
    write_track_csv(&f, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "t_s,k1_mean,k1_sd,k1_lower95,k1_upper95,k2_mean,k2_sd,k2_lower95,k2_upper95"
    );
    assert_eq!(lines.len(), 4);
    let row: Vec<f64> = lines[3].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row[0], 600.0);
    assert!((row[3] - (row[1] - 1.96 * row[2])).abs() < 1e-9);
}

#[test]
fn response_at_nominal_matches_nominal_simulation() {
    let sys = two_dof();
    let snap = snapshot_with_decay_models(&sys, 0.0, 500.0);
    let cfg = ResponseConfig {
        duration: 1.0,
        seed: 11,
        ensemble: 0,
    };
    let r = predict_response(&snap, 0.0, &cfg).unwrap();
    assert_eq!(r.stiffness, vec![1000.0, 500.0]);
    let model = to_state_space(&sys, &[]).unwrap();
    let integ = IntegratorConfig {
        dt: snap.config.dt,
        scheme: Scheme::Taylor15,
        seed: 11,
    };
    let direct = simulate_window(&model, &nalgebra::DVector::zeros(4), 1.0, &integ).unwrap();
    assert_eq!(r.trajectory, direct);
    assert!(r.ensemble.is_none());
}

/// Frequency (Hz) of the largest non-DC bin of `x`.
fn fft_peak(x: &[f64], dt: f64) -> f64 {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    let half = buf.len() / 2;
    let (k, _) = buf[1..half]
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .unwrap();
    (k + 1) as f64 / (x.len() as f64 * dt)
}

#[test]
fn degraded_stiffness_lowers_spectral_peak() {
    // Noise-driven response with no harmonic load, so the spectrum peaks at
    // the structure's resonance rather than the forcing frequency.
    let mut doc: SystemDocument = two_dof().document().clone();
    doc.force_amplitudes = vec![0.0, 0.0];
    doc.noise_sigmas = vec![5.0, 5.0];
    let sys = MdofSystem::new(doc).unwrap();
    let rate = 1e-3;
    let snap = snapshot_with_decay_models(&sys, rate, 1500.0);
    let cfg = ResponseConfig {
        duration: 40.0,
        seed: 5,
        ensemble: 0,
    };
    let now = predict_response(&snap, 0.0, &cfg).unwrap();
    let later = predict_response(&snap, 1000.0, &cfg).unwrap();
    let truth = degraded_stiffness(&snap.config.schedule(&sys), 0.0).unwrap();
    assert!((now.stiffness[0] - truth[0]).abs() < 1e-3 * truth[0]);
    assert!((later.stiffness[0] - 1000.0 * (-1.0f64).exp()).abs() < 1e-2 * later.stiffness[0]);
    let dt = snap.config.dt;
    let f0 = fft_peak(now.trajectory.states.column(0).as_slice(), dt);
    let f1 = fft_peak(later.trajectory.states.column(0).as_slice(), dt);
    assert!(f1 < f0, "nominal peak {f0} Hz, degraded {f1} Hz");
}

#[test]
fn ensemble_spread_grows_with_band() {
    let sys = two_dof();
    let snap = snapshot_with_decay_models(&sys, 0.5e-4, 1000.0);
    let cfg = ResponseConfig {
        duration: 2.0,
        seed: 3,
        ensemble: 40,
    };
    let near = predict_response(&snap, 1000.0, &cfg).unwrap();
    let far = predict_response(&snap, 4000.0, &cfg).unwrap();
    assert!(far.stiffness_std[0] > near.stiffness_std[0]);
    let spread = |r: &ResponseForecast| r.ensemble.as_ref().unwrap().std_dev.column(0).amax();
    assert!(spread(&far) > spread(&near), "{} vs {}", spread(&far), spread(&near));
    let e = far.ensemble.as_ref().unwrap();
    assert_eq!(e.members, 40);
    for k in 0..e.times.len() {
        assert!(e.q05[(k, 0)] <= e.q50[(k, 0)] && e.q50[(k, 0)] <= e.q95[(k, 0)]);
    }
    assert_eq!(predict_response(&snap, 4000.0, &cfg).unwrap(), far);
}

#[test]
fn report_for_empty_snapshot() {
    let snap = TwinSnapshot::new(two_dof(), CampaignConfig::default()).unwrap();
    let r = TwinReport::from_snapshot(&snap).unwrap();
    assert_eq!(r.windows_processed, 0);
    assert!(r.to_text().contains("no windows processed"));
}

#[test]
fn estimates_csv_has_one_row_per_accepted_window() {
    let sys = two_dof();
    let cfg = short_config(100.0, 0.5);
    let w = generate_campaign(&sys, &cfg.schedule(&sys), &cfg).unwrap();
    let mut snap = TwinSnapshot::new(sys, cfg).unwrap();
    snap.assimilate_all(&w).unwrap();
    let mut buf = Vec::new();
    snap.write_estimates_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t_s,k1,sd1,k2,sd2");
    assert_eq!(lines.len(), 4);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 5));
}
