//! The five pipeline commands.

use serde_json::json;
use twistbeam::decomposition::decompose;
use twistbeam::envelope::{solve_ermakov, EnvelopeSolution};
use twistbeam::error::{Error, Result};
use twistbeam::fields::FieldProfile;
use twistbeam::lgbasis::BasisConvention;
use twistbeam::oracle::{l2_distance, oracle_propagate, OracleConfig, OracleStep};
use twistbeam::propagation::{synthesize, GridSpec};

use crate::config::RunConfig;
use crate::output::{Format, OutputDir};

fn tolerances(cfg: &RunConfig) -> serde_json::Value {
    json!({
        "envelope_atol": cfg.envelope_ctrl.atol,
        "envelope_rtol": cfg.envelope_ctrl.rtol,
        "quadrature_radial_order": cfg.quadrature.radial_order,
        "quadrature_angular_order": cfg.quadrature.angular_order,
        "oracle_tol": cfg.oracle.tol,
        "verify_threshold": cfg.verify.threshold,
    })
}

fn omega_of(cfg: &RunConfig) -> Result<twistbeam::fields::OmegaProfile> {
    Ok(cfg.field.normalize(twistbeam::fields::ELEMENTARY_CHARGE)?.omega)
}

fn solve_envelope(cfg: &RunConfig) -> Result<EnvelopeSolution> {
    let omega = omega_of(cfg)?;
    solve_ermakov(
        |z| omega.sample(z),
        cfg.beam.b0,
        cfg.beam.b0_prime,
        cfg.z_span,
        cfg.envelope_ctrl,
        cfg.beam.charge_sign,
    )
}

pub fn cmd_field(cfg: &RunConfig, dir: &std::path::Path, format: Format) -> Result<()> {
    let out = OutputDir::new(dir, &cfg.canonical, "field", format, tolerances(cfg))?;
    let omega = omega_of(cfg)?;
    let dimensionless =
        matches!(cfg.field, FieldProfile::FreeSpace | FieldProfile::UniformOmega { .. });
    let rows: Vec<Vec<f64>> = cfg
        .z_schedule
        .iter()
        .map(|&z| {
            let b = if dimensionless { Ok(0.0) } else { cfg.field.b_z(z) };
            b.map(|b| vec![z, b, omega.sample(z)])
        })
        .collect::<Result<_>>()?;
    out.write_table("field", &["z", "B_z", "Omega"], &rows)?;
    let summary = json!({
        "b_max": cfg.field.b_max()?,
        "dimensionless": dimensionless,
        "z_span": [cfg.z_span.0, cfg.z_span.1],
        "samples": cfg.z_schedule.len(),
    });
    out.write_json("field_summary.json", &summary)?;
    Ok(())
}

pub fn cmd_envelope(cfg: &RunConfig, dir: &std::path::Path, format: Format) -> Result<()> {
    let out = OutputDir::new(dir, &cfg.canonical, "envelope", format, tolerances(cfg))?;
    let sol = solve_envelope(cfg)?;
    let rows: Vec<Vec<f64>> = cfg
        .z_schedule
        .iter()
        .map(|&z| {
            Ok(vec![
                z,
                sol.b_at(z)?,
                sol.b_prime_at(z)?,
                sol.phase_advance_at(z)?,
                sol.phi_plus_at(z)?,
                sol.phi_minus_at(z)?,
            ])
        })
        .collect::<Result<_>>()?;
    out.write_table(
        "envelope",
        &["z", "b", "b_prime", "phase_advance", "phi_plus", "phi_minus"],
        &rows,
    )?;
    Ok(())
}

pub fn cmd_coeffs(cfg: &RunConfig, dir: &std::path::Path, format: Format) -> Result<()> {
    let out = OutputDir::new(dir, &cfg.canonical, "coeffs", format, tolerances(cfg))?;
    let conv = BasisConvention::new(cfg.beam.omega0);
    let spectrum = decompose(&cfg.initial_state(), &conv, &cfg.truncation, &cfg.quadrature)?;
    for w in &spectrum.warnings {
        eprintln!("{}", json!({"warning": w}));
    }
    match format {
        Format::Csv => {
            out.write_text("coeffs.csv", &spectrum.to_csv())?;
        }
        Format::Jsonl => {
            let mut body = String::new();
            for (idx, c) in &spectrum.entries {
                body.push_str(
                    &json!({"n": idx.n, "l": idx.l, "re": c.re, "im": c.im}).to_string(),
                );
                body.push('\n');
            }
            out.write_text("coeffs.jsonl", &body)?;
        }
    }
    out.write_text("coeffs_metadata.json", &format!("{}\n", spectrum.metadata_json()))?;
    Ok(())
}

pub fn cmd_propagate(cfg: &RunConfig, dir: &std::path::Path, format: Format) -> Result<()> {
    let out = OutputDir::new(dir, &cfg.canonical, "propagate", format, tolerances(cfg))?;
    if (cfg.beam.omega0 - 1.0).abs() > 1e-12 {
        return Err(Error::Config(
            "propagate requires beam.omega0 = 1 (see the convention notes)".into(),
        ));
    }
    let conv = BasisConvention::new(cfg.beam.omega0);
    let sol = solve_envelope(cfg)?;
    let spectrum = decompose(&cfg.initial_state(), &conv, &cfg.truncation, &cfg.quadrature)?;
    for w in &spectrum.warnings {
        eprintln!("{}", json!({"warning": w}));
    }
    let mut observables = Vec::new();
    for (k, &z) in cfg.z_schedule.iter().enumerate() {
        let res = synthesize(&spectrum, &conv, &sol, z, &cfg.grid)?;
        out.write_text(&format!("state_z{k:04}.csv"), &res.total.to_polar_csv())?;
        if let Some(n) = cfg.cartesian_samples {
            out.write_text(
                &format!("intensity_z{k:04}.csv"),
                &res.total.to_cartesian_csv(n),
            )?;
        }
        observables.push(json!({
            "index": k,
            "z": z,
            "norm": res.observables.norm,
            "grid_norm": res.observables.grid_norm,
            "mean_lz": res.observables.mean_lz,
            "mean_rho2": res.observables.mean_rho2,
            "gouy_phase": res.observables.gouy_phase,
            "b": res.envelope_snapshot.b,
            "b_prime": res.envelope_snapshot.b_prime,
            "phase_advance": res.envelope_snapshot.phase_advance,
            "phi_plus": res.envelope_snapshot.phi_plus,
            "phi_minus": res.envelope_snapshot.phi_minus,
        }));
    }
    out.write_json("observables.json", &serde_json::Value::Array(observables))?;
    Ok(())
}

fn oracle_config(cfg: &RunConfig, env: &EnvelopeSolution) -> OracleConfig {
    let (_, b_max) = env.b_range();
    let kappa_max = (2 * cfg.truncation.n_max as i64
        + cfg.truncation.l_min.unsigned_abs().max(cfg.truncation.l_max.unsigned_abs()) as i64
        + 1) as f64;
    let rho_max = cfg
        .oracle
        .rho_max
        .unwrap_or(b_max * ((2.0 * kappa_max).sqrt() + 6.0));
    let n_rho = cfg.oracle.n_rho.unwrap_or(((rho_max / 5.0e-3).ceil() as usize).max(512));
    OracleConfig {
        l_min: cfg.truncation.l_min - cfg.oracle.l_pad,
        l_max: cfg.truncation.l_max + cfg.oracle.l_pad,
        rho_max,
        n_rho,
        step: OracleStep::Adaptive { tol: cfg.oracle.tol, dz0: 1e-4 },
        n_phi: cfg.oracle.n_phi,
        radial_stride: cfg.oracle.radial_stride,
        boundary_limit: 1e-7,
        angular_order: 256,
    }
}

pub fn cmd_verify(cfg: &RunConfig, dir: &std::path::Path, format: Format) -> Result<bool> {
    let out = OutputDir::new(dir, &cfg.canonical, "verify", format, tolerances(cfg))?;
    if (cfg.beam.omega0 - 1.0).abs() > 1e-12 {
        return Err(Error::Config(
            "verify requires beam.omega0 = 1 (see the convention notes)".into(),
        ));
    }
    let conv = BasisConvention::new(cfg.beam.omega0);
    let omega = omega_of(cfg)?;
    let sol = solve_envelope(cfg)?;
    let spectrum = decompose(&cfg.initial_state(), &conv, &cfg.truncation, &cfg.quadrature)?;
    let ocfg = oracle_config(cfg, &sol);
    let state = cfg.initial_state();

    let grids = oracle_propagate(
        &state,
        &conv,
        |z| omega.sample(z),
        cfg.beam.charge_sign,
        cfg.z_span,
        &cfg.verify.z_compare,
        &ocfg,
    )?;
    let mut all_pass = true;
    let mut comparisons = Vec::new();
    for g in &grids {
        let gs = GridSpec::with_grids(g.rho.clone(), g.phi.clone());
        let ana = synthesize(&spectrum, &conv, &sol, g.z, &gs)?;
        let d = l2_distance(&ana.total, g)?;
        let pass = d < cfg.verify.threshold;
        all_pass &= pass;
        comparisons.push(json!({
            "z": g.z,
            "distance": d,
            "threshold": cfg.verify.threshold,
            "pass": pass,
        }));
    }

    // fixed-step Richardson triplet for the convergence order
    let mut convergence = Vec::new();
    if cfg.verify.convergence_dz.len() >= 3 {
        let z_end = cfg.verify.convergence_z_end.unwrap_or(cfg.z_span.1);
        let mut finals = Vec::new();
        for &dz in &cfg.verify.convergence_dz {
            let c = OracleConfig { step: OracleStep::Fixed(dz), ..ocfg.clone() };
            let g = oracle_propagate(
                &state,
                &conv,
                |z| omega.sample(z),
                cfg.beam.charge_sign,
                (cfg.z_span.0, z_end),
                &[z_end],
                &c,
            )?
            .remove(0);
            finals.push((dz, g));
        }
        for w in finals.windows(2).collect::<Vec<_>>().windows(2) {
            let (dz1, e1) = (w[0][0].0, l2_distance(&w[0][0].1, &w[0][1].1)?);
            let (dz2, e2) = (w[1][0].0, l2_distance(&w[1][0].1, &w[1][1].1)?);
            let order = (e1 / e2).ln() / (dz1 / dz2).ln();
            let pass = order > 1.5;
            all_pass &= pass;
            convergence.push(json!({
                "dz_coarse": dz1,
                "dz_fine": dz2,
                "error_coarse": e1,
                "error_fine": e2,
                "order": order,
                "pass": pass,
            }));
        }
    }

    let report = json!({
        "truncation_deficit": spectrum.truncation_deficit(),
        "captured_norm": spectrum.captured_norm,
        "source_norm": spectrum.source_norm,
        "comparisons": comparisons,
        "convergence": convergence,
        "pass": all_pass,
        "oracle_mesh": {
            "rho_max": ocfg.rho_max,
            "n_rho": ocfg.n_rho,
            "l_min": ocfg.l_min,
            "l_max": ocfg.l_max,
        },
    });
    out.write_json("verify_report.json", &report)?;
    Ok(all_pass)
}
