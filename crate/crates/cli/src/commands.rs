//! The six experiment commands. Each takes the resolved plan, produces
//! its artifacts in `plan.output_dir`, and returns the artifact names
//! for the manifest.
//!
//! Sweeps fan out over a worker pool (one construction per size, order
//! preserved); all aggregation and file writing is single-threaded, so
//! identical plans produce byte-identical tables.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use anyhow::Result;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use besovlab::besov::{besov_norm, sobolev_norm, BesovParams};
use besovlab::construct::{build_algebra_pair, build_initial_data, initial_norm_report};
use besovlab::field::SpectralField;
use besovlab::filterbank::{DyadicFilterBank, Transition};
use besovlab::params::ConstructionParams;
use besovlab::picard::{bilinear_device, first_iterate_magnetic, product_device};
use besovlab::sfld::write_field;
use besovlab::sim::{checkpoint_steps, SimConfig, Solver};
use besovlab::sparse::SparseNormEngine;

use crate::artifacts::{fmt_exponent, sig17, write_csv, write_json, Outputs};
use crate::plan::{ExperimentPlan, OutputFormat};

fn bank() -> DyadicFilterBank {
    DyadicFilterBank::new(Transition::Smoothstep7)
}

fn params_for(plan: &ExperimentPlan, n: u32) -> Result<ConstructionParams> {
    Ok(ConstructionParams::new(plan.dims, n, plan.alpha, plan.p, plan.q)?)
}

/// Dispatch a validated plan to its command.
pub fn run(plan: &ExperimentPlan) -> Result<Outputs> {
    match plan.command.as_str() {
        "norms" => norms(plan),
        "construct" => construct(plan),
        "picard-sweep" => picard_sweep(plan),
        "algebra-sweep" => algebra_sweep(plan),
        "simulate" => simulate(plan),
        "decompose" => decompose(plan),
        other => anyhow::bail!("unknown command {other}"),
    }
}

// ---------------------------------------------------------------------
// norms: Besov-norm table of the constructed data over the sweep
// ---------------------------------------------------------------------

fn norms(plan: &ExperimentPlan) -> Result<Outputs> {
    let reports: Vec<_> = plan
        .sweep
        .par_iter()
        .map(|&n| -> Result<_> {
            let engine = SparseNormEngine::new(bank());
            let params = params_for(plan, n)?;
            let data = build_initial_data(&params)?;
            Ok((n, initial_norm_report(&engine, &data)?))
        })
        .collect::<Result<_>>()?;

    let mut out = Outputs::default();
    match plan.format {
        OutputFormat::Json => {
            let path = plan.output_dir.join("norms.json");
            let docs: Vec<_> = reports.iter().map(|(_, r)| r).collect();
            write_json(&path, &docs)?;
            out.add(&path);
        }
        OutputFormat::Csv => {
            let mut rows = Vec::new();
            for (n, report) in &reports {
                for (field, entries) in
                    [("u0", &report.velocity), ("b0", &report.magnetic)]
                {
                    for (s, rep) in entries {
                        rows.push(vec![
                            n.to_string(),
                            field.to_string(),
                            sig17(*s),
                            fmt_exponent(plan.p),
                            fmt_exponent(plan.q),
                            sig17(rep.total),
                            sig17(rep.log2_total),
                        ]);
                    }
                }
            }
            let path = plan.output_dir.join("norms.csv");
            write_csv(&path, "n,field,s,p,q,total,log2_total", &rows)?;
            out.add(&path);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// construct: emit the sparse fields themselves (and dense renders)
// ---------------------------------------------------------------------

fn construct(plan: &ExperimentPlan) -> Result<Outputs> {
    let n = plan.sweep[0];
    let params = params_for(plan, n)?;
    let data = build_initial_data(&params)?;

    let mut out = Outputs::default();
    let path = plan.output_dir.join("construction.json");
    write_json(&path, &data)?;
    out.add(&path);

    if plan.grid > 0 {
        let shape = vec![plan.grid; plan.dims];
        let period = vec![2.0 * PI; plan.dims];
        for (name, fld) in [("u0.sfld", &data.u0), ("b0.sfld", &data.b0)] {
            let dense = fld.to_dense(&shape, &period, true)?;
            let path = plan.output_dir.join(name);
            write_field(&path, &dense)?;
            out.add(&path);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// picard-sweep: the first-iterate interaction lower bound over N
// ---------------------------------------------------------------------

fn picard_sweep(plan: &ExperimentPlan) -> Result<Outputs> {
    let reports: Vec<_> = plan
        .sweep
        .par_iter()
        .map(|&n| -> Result<_> {
            let params = params_for(plan, n)?;
            Ok(bilinear_device(&params, &bank())?)
        })
        .collect::<Result<_>>()?;

    let mut out = Outputs::default();
    match plan.format {
        OutputFormat::Json => {
            let path = plan.output_dir.join("picard_sweep.json");
            write_json(&path, &reports)?;
            out.add(&path);
        }
        OutputFormat::Csv => {
            let rows: Vec<Vec<String>> = reports
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        sig17(r.alpha),
                        fmt_exponent(plan.p),
                        fmt_exponent(plan.q),
                        sig17(r.lambda),
                        sig17(r.ib1),
                        sig17(r.ib2),
                        sig17(r.ib_total),
                        sig17(r.ib_signed_total),
                        sig17(r.quad_error),
                    ]
                })
                .collect();
            let path = plan.output_dir.join("picard_sweep.csv");
            write_csv(
                &path,
                "n,alpha,p,q,lambda,ib1,ib2,ib_total,ib_signed_total,quad_error",
                &rows,
            )?;
            out.add(&path);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// algebra-sweep: two-factor product lower bound vs factor norms over N
// ---------------------------------------------------------------------

fn algebra_sweep(plan: &ExperimentPlan) -> Result<Outputs> {
    let d = plan.dims as f64;
    let rows: Vec<_> = plan
        .sweep
        .par_iter()
        .map(|&n| -> Result<_> {
            let params = params_for(plan, n)?;
            let rep = product_device(&params, &bank())?;
            let engine = SparseNormEngine::new(bank());
            let (f, g) = build_algebra_pair(&params)?;
            let bp = BesovParams::new(d / plan.p, plan.p, plan.q, true)?;
            let nf = engine.besov_norm(&f, &bp)?;
            let ng = engine.besov_norm(&g, &bp)?;
            Ok((n, nf.total, ng.total, rep.value, rep.quad_error))
        })
        .collect::<Result<_>>()?;

    let mut out = Outputs::default();
    match plan.format {
        OutputFormat::Json => {
            let docs: Vec<_> = rows
                .iter()
                .map(|(n, nf, ng, lb, qe)| {
                    json!({
                        "n": n,
                        "alpha": plan.alpha,
                        "p": if plan.p.is_infinite() { json!("inf") } else { json!(plan.p) },
                        "q": if plan.q.is_infinite() { json!("inf") } else { json!(plan.q) },
                        "norm_f": nf,
                        "norm_g": ng,
                        "product_lower_bound": lb,
                        "quad_error": qe,
                    })
                })
                .collect();
            let path = plan.output_dir.join("algebra_sweep.json");
            write_json(&path, &docs)?;
            out.add(&path);
        }
        OutputFormat::Csv => {
            let rows: Vec<Vec<String>> = rows
                .iter()
                .map(|(n, nf, ng, lb, qe)| {
                    vec![
                        n.to_string(),
                        sig17(plan.alpha),
                        fmt_exponent(plan.p),
                        fmt_exponent(plan.q),
                        sig17(*nf),
                        sig17(*ng),
                        sig17(*lb),
                        sig17(*qe),
                    ]
                })
                .collect();
            let path = plan.output_dir.join("algebra_sweep.csv");
            write_csv(
                &path,
                "n,alpha,p,q,norm_f,norm_g,product_lower_bound,quad_error",
                &rows,
            )?;
            out.add(&path);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// simulate: integrate the 2D system, recording norms at checkpoints
// ---------------------------------------------------------------------

/// One checkpoint row: Besov totals at the three regularities each for
/// velocity (d/p - 1, d/p, d/p + 1) and magnetic (d/p, d/p + 1, d/p + 2),
/// plus the Sobolev pair (H^{d/2 - 1}, H^{d/2}) and the energies.
#[derive(Serialize)]
struct SampleRow {
    t: f64,
    u_besov: [f64; 3],
    b_besov: [f64; 3],
    sobolev_u: f64,
    sobolev_b: f64,
    energy_u: f64,
    energy_b: f64,
}

fn sample_row(
    t: f64,
    u: &SpectralField,
    b: &SpectralField,
    plan: &ExperimentPlan,
    bank: &DyadicFilterBank,
    sup_blocks: &mut BTreeMap<i64, f64>,
) -> Result<SampleRow> {
    let d = plan.dims as f64;
    let mut u_besov = [0.0; 3];
    for (k, ds) in [-1.0, 0.0, 1.0].into_iter().enumerate() {
        let bp = BesovParams::new(d / plan.p + ds, plan.p, plan.q, true)?;
        u_besov[k] = besov_norm(u, &bp, bank)?.total;
    }
    let mut b_besov = [0.0; 3];
    for (k, ds) in [0.0, 1.0, 2.0].into_iter().enumerate() {
        let bp = BesovParams::new(d / plan.p + ds, plan.p, plan.q, true)?;
        let rep = besov_norm(b, &bp, bank)?;
        if k == 0 {
            for e in &rep.per_block {
                sup_blocks
                    .entry(e.j)
                    .and_modify(|v| *v = v.max(e.log2_lp))
                    .or_insert(e.log2_lp);
            }
        }
        b_besov[k] = rep.total;
    }
    Ok(SampleRow {
        t,
        u_besov,
        b_besov,
        sobolev_u: sobolev_norm(u, d / 2.0 - 1.0),
        sobolev_b: sobolev_norm(b, d / 2.0),
        energy_u: 0.5 * u.l2_norm().powi(2),
        energy_b: 0.5 * b.l2_norm().powi(2),
    })
}

fn simulate(plan: &ExperimentPlan) -> Result<Outputs> {
    let n = plan.sweep[0];
    let params = params_for(plan, n)?;
    let data = build_initial_data(&params)?;
    let shape = [plan.grid, plan.grid];
    let period = [2.0 * PI, 2.0 * PI];
    let u0 = data.u0.to_dense(&shape, &period, true)?;
    let b0 = data.b0.to_dense(&shape, &period, true)?;
    let t_end = plan.t_end.unwrap_or_else(|| params.time_horizon());
    let cfg = SimConfig {
        dt: t_end / plan.steps as f64,
        t_end,
        n_checkpoints: plan.checkpoints,
        linearized: plan.linearized,
        ..Default::default()
    };
    let bank = bank();
    let mut solver = Solver::new(cfg, &u0, &b0)?;

    let mut sup_blocks = BTreeMap::new();
    let mut samples =
        vec![sample_row(solver.t, &solver.u, &solver.b, plan, &bank, &mut sup_blocks)?];
    let (total, last) = solver.plan_steps();
    let marks = checkpoint_steps(total, plan.checkpoints);
    let mut diags = Vec::with_capacity(total);
    let mut next = 0usize;
    for i in 0..total {
        let dt = if i + 1 == total { last } else { solver.cfg.dt };
        diags.push(solver.step_with_dt(dt)?);
        if next < marks.len() && solver.step_count == marks[next] {
            next += 1;
            samples.push(sample_row(
                solver.t, &solver.u, &solver.b, plan, &bank, &mut sup_blocks,
            )?);
        }
    }

    // per-block running maxima of the magnetic field at regularity d/p:
    // the time-supremum-inside-the-scale-sum reading of the norm
    let d = plan.dims as f64;
    let s0 = d / plan.p;
    let sup_rows: Vec<Vec<String>> = sup_blocks
        .iter()
        .map(|(&j, &log2_lp)| {
            let log2_weighted = s0 * j as f64 + log2_lp;
            vec![
                j.to_string(),
                sig17(log2_lp.exp2()),
                sig17(log2_weighted.exp2()),
                sig17(log2_lp),
                sig17(log2_weighted),
            ]
        })
        .collect();

    let mut out = Outputs::default();
    match plan.format {
        OutputFormat::Json => {
            let path = plan.output_dir.join("timeseries.json");
            let sup: Vec<_> = sup_blocks
                .iter()
                .map(|(&j, &log2_lp)| json!({ "j": j, "log2_lp": log2_lp }))
                .collect();
            write_json(&path, &json!({ "samples": samples, "time_sup_magnetic": sup }))?;
            out.add(&path);
            let path = plan.output_dir.join("diagnostics.json");
            write_json(&path, &diags)?;
            out.add(&path);
        }
        OutputFormat::Csv => {
            let rows: Vec<Vec<String>> = samples
                .iter()
                .map(|r| {
                    let mut row = vec![sig17(r.t)];
                    row.extend(r.u_besov.iter().map(|v| sig17(*v)));
                    row.extend(r.b_besov.iter().map(|v| sig17(*v)));
                    row.extend(
                        [r.sobolev_u, r.sobolev_b, r.energy_u, r.energy_b]
                            .iter()
                            .map(|v| sig17(*v)),
                    );
                    row
                })
                .collect();
            let path = plan.output_dir.join("timeseries.csv");
            write_csv(
                &path,
                "t,u_besov_dpm1,u_besov_dp,u_besov_dpp1,b_besov_dp,b_besov_dpp1,b_besov_dpp2,sobolev_u,sobolev_b,energy_u,energy_b",
                &rows,
            )?;
            out.add(&path);

            let rows: Vec<Vec<String>> = diags
                .iter()
                .map(|g| {
                    vec![
                        g.step.to_string(),
                        sig17(g.t),
                        sig17(g.energy_u),
                        sig17(g.energy_b),
                        sig17(g.enstrophy_u),
                        sig17(g.max_vel),
                        sig17(g.cfl),
                        sig17(g.div_u),
                        sig17(g.div_b),
                        sig17(g.energy_residual),
                    ]
                })
                .collect();
            let path = plan.output_dir.join("diagnostics.csv");
            write_csv(
                &path,
                "step,t,energy_u,energy_b,enstrophy_u,max_vel,cfl,div_u,div_b,energy_residual",
                &rows,
            )?;
            out.add(&path);

            let path = plan.output_dir.join("timesup_magnetic.csv");
            write_csv(&path, "j,lp,weighted,log2_lp,log2_weighted", &sup_rows)?;
            out.add(&path);
        }
    }

    for (name, fld) in [("u_final.sfld", &solver.u), ("b_final.sfld", &solver.b)] {
        let path = plan.output_dir.join(name);
        write_field(&path, fld)?;
        out.add(&path);
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// decompose: b(T) - b(0) = first Duhamel iterate + remainder
// ---------------------------------------------------------------------

fn decompose(plan: &ExperimentPlan) -> Result<Outputs> {
    let n = plan.sweep[0];
    let params = params_for(plan, n)?;
    let data = build_initial_data(&params)?;
    let shape = [plan.grid, plan.grid];
    let period = [2.0 * PI, 2.0 * PI];
    let u0 = data.u0.to_dense(&shape, &period, true)?;
    let b0 = data.b0.to_dense(&shape, &period, true)?;
    let t_end = plan.t_end.unwrap_or_else(|| params.time_horizon());
    let cfg = SimConfig {
        dt: t_end / plan.steps as f64,
        t_end,
        ..Default::default()
    };
    let bank = bank();
    let mut solver = Solver::new(cfg, &u0, &b0)?;
    solver.run()?;
    let first = first_iterate_magnetic(&u0, &b0, t_end)?;
    let rep = besovlab::sim::decomposition_report(&solver.b, &b0, &first, plan.q, &bank)?;

    let mut out = Outputs::default();
    match plan.format {
        OutputFormat::Json => {
            let path = plan.output_dir.join("decomposition.json");
            write_json(&path, &rep)?;
            out.add(&path);
        }
        OutputFormat::Csv => {
            let rows = vec![vec![
                fmt_exponent(rep.q),
                sig17(rep.l2_first_iterate),
                sig17(rep.l2_remainder),
                sig17(rep.besov_first_iterate),
                sig17(rep.besov_remainder),
                sig17(rep.besov_change),
            ]];
            let path = plan.output_dir.join("decomposition.csv");
            write_csv(
                &path,
                "q,l2_first_iterate,l2_remainder,besov_first_iterate,besov_remainder,besov_change",
                &rows,
            )?;
            out.add(&path);
        }
    }
    Ok(out)
}
