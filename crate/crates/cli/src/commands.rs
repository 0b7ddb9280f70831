//! The subcommands. Each returns the files it would write; none touches disk.

use std::sync::Arc;

use rayon::prelude::*;
use serde_json::{json, Value};

use needlebound_core::bounds::{BoundEntry, BoundsInputs, BoundsReport};
use needlebound_core::ensemble::{NeedleEnsemble, WidthSource};
use needlebound_core::grid::DecisionGrid;
use needlebound_core::rkhs::{certify_ensemble_norm, NormCertificate};
use needlebound_core::simulator::{
    average_records, episode_keys, run_episode, uninformed_simple_regret, RegretRecord, RunContext,
};
use needlebound_core::spectral::BumpProfile;
use needlebound_core::{bounds, Error as CoreError};

use crate::config::ExperimentConfig;
use crate::output::{config_json, json_bytes, Csv, Outputs};
use crate::{CliError, Result};

/// Largest decision grid used for information-gain estimates; the greedy
/// posterior stores one row of length `|grid|` per round.
pub const GAMMA_GRID_CAP: usize = 4096;

/// Ensembles larger than this skip the `O(M²)` region-sum calibration.
pub const CALIBRATION_MEMBER_CAP: usize = 2000;

pub fn build_ensemble(cfg: &ExperimentConfig) -> Result<NeedleEnsemble> {
    let profile = Arc::new(BumpProfile::with_defaults(cfg.spec.dim())?);
    let ens = match cfg.w0 {
        Some(w0) => NeedleEnsemble::with_inner_width(cfg.spec, cfg.epsilon, cfg.budget, profile, w0)?,
        None => NeedleEnsemble::build(cfg.spec, cfg.epsilon, cfg.budget, profile)?,
    };
    Ok(ens)
}

fn ensemble_json(ens: &NeedleEnsemble) -> Value {
    let side = ens.side_conditions();
    let centers: Vec<&[f64]> = ens.centers().collect();
    json!({
        "family": ens.spec().family().name(),
        "lengthscale": ens.spec().lengthscale(),
        "nu": ens.spec().nu(),
        "d": ens.dim(),
        "epsilon": ens.epsilon(),
        "budget": ens.budget(),
        "h0": ens.profile().h0(),
        "zeta": ens.profile().zeta(),
        "w0": ens.w0(),
        "w0_source": match ens.width_source() {
            WidthSource::Formula => "formula",
            WidthSource::Override => "override",
        },
        "grid_step": ens.step(),
        "cells_per_axis": ens.cells_per_axis(),
        "cell_width": ens.cell_width(),
        "members": ens.len(),
        "amplitude": ens.amplitude(),
        "side_conditions": {
            "se_volume_factor": side.se_volume_factor,
            "matern_width_ratio": side.matern_width_ratio,
            "cells_fit": side.cells_fit,
            "chain_closes": side.chain_closes(),
        },
        "centers": centers,
    })
}

fn certificate_json(cert: &NormCertificate) -> Value {
    let chain: Vec<Value> = cert
        .chain
        .iter()
        .map(|s| json!({"label": s.label, "value": s.value, "valid": s.valid}))
        .collect();
    json!({
        "passes": cert.passes(),
        "norm_numeric": cert.norm_numeric,
        "norm_chain_bound": cert.norm_chain_bound,
        "budget": cert.budget,
        "margin": cert.margin,
        "quadrature_error_estimate": cert.quadrature_error_estimate,
        "quadrature_nodes": cert.quadrature_nodes,
        "chain_closes": cert.chain_closes,
        "chain": chain,
    })
}

fn certification_failure(cert: &NormCertificate) -> CliError {
    CliError::Core(CoreError::Certification(format!(
        "needle RKHS norm {} exceeds budget {} (margin {})",
        cert.norm_numeric, cert.budget, cert.margin
    )))
}

fn certify_into(out: &mut Outputs, cfg: &ExperimentConfig, ens: &NeedleEnsemble) -> Result<()> {
    let cert = certify_ensemble_norm(ens)?;
    let mut doc = certificate_json(&cert);
    doc["config"] = config_json(cfg);
    out.push("certificate.json", json_bytes(&doc));
    if !cert.passes() {
        out.failure = Some(certification_failure(&cert));
    }
    Ok(())
}

/// `ensemble.json` and `certificate.json`; a failed certificate is written
/// and then reported.
pub fn construct(cfg: &ExperimentConfig) -> Result<Outputs> {
    let ens = build_ensemble(cfg)?;
    let mut out = Outputs::default();
    let mut doc = ensemble_json(&ens);
    doc["config"] = config_json(cfg);
    out.push("ensemble.json", json_bytes(&doc));
    certify_into(&mut out, cfg, &ens)?;
    Ok(out)
}

pub fn certify(cfg: &ExperimentConfig) -> Result<Outputs> {
    let ens = build_ensemble(cfg)?;
    let mut out = Outputs::default();
    certify_into(&mut out, cfg, &ens)?;
    Ok(out)
}

/// Runs every `(member, seed)` episode on `workers` threads. Records come
/// back in key order whatever the schedule.
pub fn run_episodes(
    ens: &NeedleEnsemble,
    ctx: &RunContext,
    seeds_per_member: usize,
    workers: usize,
) -> Result<Vec<RegretRecord>> {
    let keys = episode_keys(ens.len(), ctx.cfg.seed, seeds_per_member);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))?;
    let records = pool.install(|| {
        keys.par_iter()
            .map(|&(m, seed)| run_episode(ens, m, ctx, seed))
            .collect::<Result<Vec<_>, CoreError>>()
    })?;
    Ok(records)
}

/// `episodes.csv`, `summary.csv` and `summary.json`, subject to the
/// configured formats.
pub fn simulate(cfg: &ExperimentConfig, workers: usize) -> Result<Outputs> {
    let ens = build_ensemble(cfg)?;
    let ctx = RunContext::new(&ens, cfg.algorithm, cfg.horizon, cfg.sigma)?;
    let records = run_episodes(&ens, &ctx, cfg.seeds_per_member, workers)?;
    let avg = average_records(&records)?;
    let d = ens.dim();
    let max_gap = records.iter().map(|r| r.grid_peak_gap).fold(0.0, f64::max);
    let floor = uninformed_simple_regret(&ens, &ctx.grid);
    let mut out = Outputs::default();

    if cfg.formats.csv {
        let mut header: Vec<String> = ["episode_id", "m", "seed", "t"].map(String::from).to_vec();
        header.extend((1..=d).map(|i| format!("x_{i}")));
        header.extend(["y", "r_inst", "r_cum"].map(String::from));
        let mut episodes = Csv::new(cfg, &header);
        for (id, rec) in records.iter().enumerate() {
            for t in 0..rec.horizon {
                let mut row = vec![
                    id.to_string(),
                    rec.m.to_string(),
                    rec.seed.to_string(),
                    (t + 1).to_string(),
                ];
                row.extend(rec.point(t, d).iter().map(f64::to_string));
                row.push(rec.observations[t].to_string());
                row.push(rec.inst_regret[t].to_string());
                row.push(rec.cum_regret[t].to_string());
                episodes.row(&row);
            }
        }
        out.push("episodes.csv", episodes.into_bytes());

        let header = [
            "t",
            "mean_cum_regret",
            "se_cum_regret",
            "mean_simple_regret",
            "se_simple_regret",
        ]
        .map(String::from);
        let mut summary = Csv::new(cfg, &header);
        summary.comment("members", ens.len());
        summary.comment("episodes", avg.episodes);
        summary.comment("max_grid_peak_gap", max_gap);
        for t in 0..cfg.horizon {
            summary.row(&[
                (t + 1).to_string(),
                avg.mean_cum_regret[t].to_string(),
                avg.se_cum_regret[t].to_string(),
                avg.mean_simple_regret_curve[t].to_string(),
                avg.se_simple_regret_curve[t].to_string(),
            ]);
        }
        out.push("summary.csv", summary.into_bytes());
    }

    if cfg.formats.json {
        let doc = json!({
            "config": config_json(cfg),
            "algorithm": cfg.algorithm.kind.name(),
            "members": ens.len(),
            "episodes": avg.episodes,
            "horizon": cfg.horizon,
            "final_mean_cum_regret": avg.mean_cum_regret.last(),
            "final_se_cum_regret": avg.se_cum_regret.last(),
            "mean_simple_regret": avg.mean_simple_regret,
            "se_simple_regret": avg.se_simple_regret,
            "uninformed_simple_regret": floor,
            "max_grid_peak_gap": max_gap,
            "mean_cum_regret": avg.mean_cum_regret,
            "se_cum_regret": avg.se_cum_regret,
            "mean_simple_regret_curve": avg.mean_simple_regret_curve,
            "se_simple_regret_curve": avg.se_simple_regret_curve,
        });
        out.push("summary.json", json_bytes(&doc));
    }
    Ok(out)
}

/// Per-axis resolution for information-gain estimates: the configured one,
/// reduced until the grid has at most [`GAMMA_GRID_CAP`] points.
pub fn gamma_resolution(cfg: &ExperimentConfig) -> usize {
    let d = cfg.spec.dim() as u32;
    let mut res = cfg.algorithm.grid_resolution;
    while res > 2 && res.checked_pow(d).is_none_or(|n| n > GAMMA_GRID_CAP) {
        res -= 1;
    }
    res
}

/// `gamma.csv` and `gamma.json`: greedy `γ̂_t` for `t = 1..=T`.
pub fn gamma(cfg: &ExperimentConfig) -> Result<Outputs> {
    let res = gamma_resolution(cfg);
    let grid = DecisionGrid::new(cfg.spec.dim(), res)?;
    let gammas = bounds::info_gain_greedy(&cfg.spec, &grid, cfg.horizon, cfg.sigma)?;
    let mut out = Outputs::default();
    if cfg.formats.csv {
        let mut csv = Csv::new(cfg, &["t".to_string(), "gamma_hat".to_string()]);
        csv.comment("gamma_grid_resolution", res);
        for (t, g) in &gammas {
            csv.row(&[t.to_string(), g.to_string()]);
        }
        out.push("gamma.csv", csv.into_bytes());
    }
    if cfg.formats.json {
        let doc = json!({
            "config": config_json(cfg),
            "gamma_grid_resolution": res,
            "t": gammas.iter().map(|g| g.0).collect::<Vec<_>>(),
            "gamma_hat": gammas.iter().map(|g| g.1).collect::<Vec<_>>(),
        });
        out.push("gamma.json", json_bytes(&doc));
    }
    Ok(out)
}

fn entry_json(e: &BoundEntry) -> Value {
    json!({"exponent": e.exponent, "log_power": e.log_power, "form": e.form})
}

/// `T^a` or `(1/eps)^a`, with a `(log .)^(k d)` factor when present.
fn entry_text(e: &BoundEntry, variable: &str, d: usize) -> String {
    let Some(a) = e.exponent else {
        return "vacuous".to_string();
    };
    let base = if variable.contains('/') {
        format!("({variable})")
    } else {
        variable.to_string()
    };
    let mut s = format!("{base}^{a}");
    if e.log_power != 0.0 {
        let k = e.log_power / d as f64;
        let p = if k == 1.0 {
            "d".to_string()
        } else if k.fract() == 0.0 {
            format!("{k}d")
        } else {
            format!("d/{}", 1.0 / k)
        };
        s.push_str(&format!(" (log {variable})^({p})"));
    }
    s
}

fn table_text(report: &BoundsReport) -> String {
    let table = &report.exponent_table;
    let d = table.d;
    let mut rows = vec![[
        "quantity".to_string(),
        "lower (this construction)".to_string(),
        "upper [Sri09]".to_string(),
        "conjectured".to_string(),
    ]];
    for r in &table.rows {
        let value = match r.quantity {
            bounds::CUMULATIVE => format!(" = {}", report.upper_bound_sri),
            _ => String::new(),
        };
        rows.push([
            r.quantity.to_string(),
            entry_text(&r.lower, r.variable, d),
            format!("{}{value}", entry_text(&r.upper_sri, r.variable, d)),
            entry_text(&r.conjectured, r.variable, d),
        ]);
    }
    let widths: Vec<usize> = (0..4)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut text = format!(
        "kernel {} d={}{}\n",
        table.family.name(),
        d,
        if table.family == needlebound_core::kernels::KernelFamily::Matern {
            format!(" nu={}", table.nu)
        } else {
            String::new()
        }
    );
    for (i, r) in rows.iter().enumerate() {
        let cells: Vec<String> = r.iter().zip(&widths).map(|(c, &w)| format!("{c:<w$}")).collect();
        text.push_str(cells.join(" | ").trim_end());
        text.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
            text.push_str(&rule.join("-+-"));
            text.push('\n');
        }
    }
    text.push_str(&format!("\nM = {}\n", report.members));
    text.push_str(&format!("T_simple(eps) lower = {}\n", report.t_threshold_simple));
    text.push_str(&format!(
        "R_T lower = {} (eps* = {})\n",
        report.cumulative.r_lower, report.cumulative.eps_star
    ));
    text.push_str(&format!("note: {}\n", table.note));
    text
}

/// `bounds.json` and `bounds.txt`.
pub fn bounds(cfg: &ExperimentConfig) -> Result<Outputs> {
    let profile = BumpProfile::with_defaults(cfg.spec.dim())?;
    let inputs = BoundsInputs {
        spec: cfg.spec,
        epsilon: cfg.epsilon,
        budget: cfg.budget,
        sigma: cfg.sigma,
        horizon: cfg.horizon,
        c: cfg.c,
        c_prime: cfg.c_prime,
        gamma_resolution: gamma_resolution(cfg),
    };
    let mut report = BoundsReport::compute(inputs, &profile)?;
    if report.members <= CALIBRATION_MEMBER_CAP {
        let ens = NeedleEnsemble::build(cfg.spec, cfg.epsilon, cfg.budget, Arc::new(profile))?;
        report = report.with_calibration(&ens);
    }
    let rows: Vec<Value> = report
        .exponent_table
        .rows
        .iter()
        .map(|r| {
            json!({
                "quantity": r.quantity,
                "variable": r.variable,
                "lower": entry_json(&r.lower),
                "upper_sri": entry_json(&r.upper_sri),
                "conjectured": entry_json(&r.conjectured),
            })
        })
        .collect();
    let cum = &report.cumulative;
    let doc = json!({
        "config": config_json(cfg),
        "members": report.members,
        "t_threshold_simple": report.t_threshold_simple,
        "cumulative": {
            "r_lower": cum.r_lower,
            "eps_star": cum.eps_star,
            "members": cum.members,
            "iterations": cum.iterations,
            "constructible": cum.constructible,
        },
        "gamma_grid_resolution": report.inputs.gamma_resolution,
        "gamma_hat_T": report.gamma_estimates.last().map(|g| g.1),
        "upper_bound_sri": report.upper_bound_sri,
        "calibration": report.calibration.map(|c| json!({
            "sum_over_members": c.sum_over_members,
            "sum_over_regions": c.sum_over_regions,
            "sum_of_squares": c.sum_of_squares,
            "c": c.c,
        })),
        "exponent_table": {
            "family": report.exponent_table.family.name(),
            "d": report.exponent_table.d,
            "nu": report.exponent_table.nu,
            "rows": rows,
            "note": report.exponent_table.note,
        },
    });
    let mut out = Outputs::default();
    out.push("bounds.json", json_bytes(&doc));
    out.push("bounds.txt", table_text(&report).into_bytes());
    Ok(out)
}
