//! Scenario runners. Every runner is a pure function of its config and
//! returns the CSV bytes plus metadata; nothing here touches the filesystem.

use log::warn;
use rayon::prelude::*;
use serde_json::json;

use d2dprice::model::{db_to_linear, sample_network};
use d2dprice::{
    play, price_lower_bound, price_upper_bound, solve_optimal, solve_suboptimal, solve_uniform,
    GameOutcome, Network, PriceVector,
};

use crate::config::{ScenarioConfig, ScenarioKind, DEFAULT_PRICE_FRACTION};
use crate::error::{Result, SimError};
use crate::output::{num, Exclusion, RunMetadata, ScenarioOutput};

/// Relative tolerance for recomputed revenue and interference.
const OUTCOME_RTOL: f64 = 1e-12;
/// LP objective below uniform revenue by more than this is flagged.
const DOMINATION_SLACK: f64 = 1e-6;
/// Fixed-point residual above this on interior recoveries is flagged.
const RESIDUAL_LIMIT: f64 = 1e-5;

pub fn run(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    cfg.validate()?;
    match cfg.scenario {
        ScenarioKind::Convergence => run_convergence(cfg),
        ScenarioKind::UniformSweep => run_uniform_sweep(cfg),
        ScenarioKind::ActiveUsersVsPrice => run_active_users(cfg),
        ScenarioKind::CompareSnr | ScenarioKind::CompareIth => run_comparison(cfg),
    }
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| SimError::Io {
        path: "<csv buffer>".into(),
        source: e.into_error(),
    })
}

/// Recomputes revenue and interference from the instance and compares.
pub fn check_outcome(inst: &Network, out: &GameOutcome<f64>) -> Result<()> {
    let revenue = inst.bs_revenue(&out.powers, &out.prices)?;
    let interference = inst.total_interference(&out.powers)?;
    let close = |a: f64, b: f64| {
        (a - b).abs() <= OUTCOME_RTOL * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    };
    if !close(revenue, out.revenue) || !close(interference, out.total_interference) {
        return Err(SimError::Invariant(format!(
            "revenue {} vs {revenue}, interference {} vs {interference}",
            out.revenue, out.total_interference
        )));
    }
    if !inst.is_box_feasible(&out.powers, 0.0) {
        return Err(SimError::Invariant(
            "equilibrium powers outside [0, p_max]".into(),
        ));
    }
    Ok(())
}

/// Price grid in units of the upper bound, with both bounds inserted exactly.
fn price_grid(cfg: &ScenarioConfig, upper: f64, lower: f64) -> Vec<f64> {
    let sweep = cfg
        .sweep_or_default()
        .expect("price scenarios have a sweep");
    let mut prices: Vec<f64> = sweep.values().into_iter().map(|f| f * upper).collect();
    let (lo, hi) = (prices[0], prices[prices.len() - 1]);
    for b in [lower, upper] {
        if b >= lo && b <= hi {
            prices.push(b);
        }
    }
    prices.sort_by(|a, b| a.partial_cmp(b).unwrap());
    prices.dedup();
    prices
}

pub fn run_convergence(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let inst: Network = sample_network(&cfg.topology)?;
    let n = inst.n();
    let upper = price_upper_bound(&inst);
    let price = upper * cfg.price_fraction.unwrap_or(DEFAULT_PRICE_FRACTION);
    let prices = PriceVector::uniform(n, price);

    let mut w = csv_writer();
    w.write_record(["init", "iteration", "user", "power"])?;
    let mut rows = 0;
    let mut runs = Vec::new();
    let mut finals = Vec::new();
    for (label, p0) in [("zero", vec![0.0; n]), ("peak", inst.p_max().to_vec())] {
        let mut traj: Vec<(usize, Vec<f64>)> = Vec::new();
        let ne =
            d2dprice::game::solve_ne_observed(&inst, &prices, &p0, Default::default(), |k, p| {
                traj.push((k, p.to_vec()))
            })?;
        for (k, p) in &traj {
            for (i, &x) in p.iter().enumerate() {
                w.write_record([
                    label.to_string(),
                    k.to_string(),
                    (i + 1).to_string(),
                    num(x),
                ])?;
                rows += 1;
            }
        }
        let outcome = GameOutcome::from_ne(&inst, prices.clone(), ne.clone());
        check_outcome(&inst, &outcome)?;
        runs.push(json!({
            "init": label,
            "iterations": ne.iterations,
            "converged": ne.converged,
            "residual": ne.residual,
        }));
        finals.push(ne.powers.0);
    }
    let final_gap = finals[0]
        .iter()
        .zip(&finals[1])
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));

    let mut metadata = RunMetadata::new(cfg);
    metadata.rows = rows;
    metadata.details = json!({
        "price": price,
        "pi_upper": upper,
        "pi_lower": price_lower_bound(&inst),
        "runs": runs,
        "final_gap": final_gap,
    });
    Ok(ScenarioOutput {
        csv: finish(w)?,
        metadata,
    })
}

pub fn run_uniform_sweep(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let inst: Network = sample_network(&cfg.topology)?;
    let n = inst.n();
    let (upper, lower) = (price_upper_bound(&inst), price_lower_bound(&inst));

    let mut w = csv_writer();
    let mut header = vec!["price".to_string(), "revenue".into(), "interference".into()];
    header.extend((1..=n).map(|i| format!("p_{i}")));
    w.write_record(&header)?;
    let grid = price_grid(cfg, upper, lower);
    for &price in &grid {
        let out = play(&inst, PriceVector::uniform(n, price))?;
        check_outcome(&inst, &out)?;
        let mut rec = vec![
            num(price),
            num(price * out.total_interference),
            num(out.total_interference),
        ];
        rec.extend(out.powers.iter().map(|&p| num(p)));
        w.write_record(&rec)?;
    }
    let best = solve_uniform(&inst, None)?;

    let mut metadata = RunMetadata::new(cfg);
    metadata.rows = grid.len();
    metadata.details = json!({
        "pi_upper": upper,
        "pi_lower": lower,
        "i_th": inst.i_th(),
        "optimal_uniform_price": best.price,
        "optimal_uniform_revenue": best.revenue,
        "prices_evaluated_by_search": best.trace.len(),
    });
    Ok(ScenarioOutput {
        csv: finish(w)?,
        metadata,
    })
}

pub fn run_active_users(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let inst: Network = sample_network(&cfg.topology)?;
    let n = inst.n();
    let (upper, lower) = (price_upper_bound(&inst), price_lower_bound(&inst));

    let mut w = csv_writer();
    w.write_record(["price", "active_users"])?;
    let grid = price_grid(cfg, upper, lower);
    for &price in &grid {
        let out = play(&inst, PriceVector::uniform(n, price))?;
        check_outcome(&inst, &out)?;
        let active = out.powers.iter().filter(|&&p| p > 0.0).count();
        w.write_record([num(price), active.to_string()])?;
    }
    let mut metadata = RunMetadata::new(cfg);
    metadata.rows = grid.len();
    metadata.details = json!({ "pi_upper": upper, "pi_lower": lower, "users": n });
    Ok(ScenarioOutput {
        csv: finish(w)?,
        metadata,
    })
}

const SCHEMES: [&str; 3] = ["uniform", "optimal", "suboptimal"];

#[derive(Debug, Clone)]
struct PointResult {
    x: f64,
    /// `(scheme, metric, value)`.
    metrics: Vec<(&'static str, &'static str, f64)>,
    excluded: Option<String>,
    counterexamples: Vec<serde_json::Value>,
}

fn evaluate_point(base: &Network, kind: ScenarioKind, x: f64) -> Result<PointResult> {
    let inst = match kind {
        ScenarioKind::CompareSnr => base.with_uniform_p_max(db_to_linear(x))?,
        ScenarioKind::CompareIth => base.with_i_th(x)?,
        _ => unreachable!("comparison scenarios only"),
    };
    let uniform = solve_uniform(&inst, None)?;
    let optimal = solve_optimal(&inst)?;
    let suboptimal = solve_suboptimal(&inst);

    let mut result = PointResult {
        x,
        metrics: Vec::new(),
        excluded: None,
        counterexamples: Vec::new(),
    };
    if optimal.is_degenerate() {
        result.excluded = Some(format!(
            "degenerate LP recovery: status {:?}, users {:?}",
            optimal.lp_status, optimal.degenerate_users
        ));
        return Ok(result);
    }

    let outcomes = [
        uniform.outcome.clone(),
        play(&inst, optimal.prices.clone())?,
        play(&inst, suboptimal.prices.clone())?,
    ];
    for (scheme, out) in SCHEMES.iter().zip(&outcomes) {
        check_outcome(&inst, out)?;
        if !out.converged {
            result.excluded = Some(format!("{scheme} equilibrium did not converge"));
            return Ok(result);
        }
        result.metrics.push((scheme, "sum_rate", out.sum_rate()));
        result.metrics.push((scheme, "revenue", out.revenue));
        result
            .metrics
            .push((scheme, "interference", out.total_interference));
    }
    result
        .metrics
        .push(("optimal", "lp_objective", optimal.lp_objective));

    if optimal.lp_objective < uniform.revenue - DOMINATION_SLACK {
        result.counterexamples.push(json!({
            "kind": "lp_below_uniform",
            "lp_objective": optimal.lp_objective,
            "uniform_revenue": uniform.revenue,
        }));
    }
    if let Some(v) = &optimal.verification {
        if !v.original_feasible || (v.all_interior && v.fixed_point_residual >= RESIDUAL_LIMIT) {
            result.counterexamples.push(json!({
                "kind": "recovery",
                "original_feasible": v.original_feasible,
                "fixed_point_residual": v.fixed_point_residual,
                "all_interior": v.all_interior,
            }));
        }
    }
    Ok(result)
}

pub fn run_comparison(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let xs = cfg
        .sweep_or_default()
        .expect("comparison scenarios have a sweep")
        .values();
    let base_seed = cfg.topology.seed;

    let trials: Vec<(u64, Vec<PointResult>)> = (0..cfg.trials())
        .into_par_iter()
        .map(|k| {
            let seed = base_seed.wrapping_add(k as u64);
            let topo = d2dprice::TopologyConfig {
                seed,
                ..cfg.topology.clone()
            };
            let base: Network = sample_network(&topo)?;
            let points = xs
                .iter()
                .map(|&x| evaluate_point(&base, cfg.scenario, x))
                .collect::<Result<Vec<_>>>()?;
            Ok((seed, points))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut w = csv_writer();
    w.write_record([
        "row_kind", "x", "scheme", "metric", "trial", "seed", "value", "count",
    ])?;
    let mut rows = 0;
    let mut excluded = Vec::new();
    let mut counterexamples = Vec::new();
    for (k, (seed, points)) in trials.iter().enumerate() {
        for pt in points {
            if let Some(reason) = &pt.excluded {
                warn!("trial {k} (seed {seed}) at x = {} excluded: {reason}", pt.x);
                excluded.push(Exclusion {
                    trial: k,
                    seed: *seed,
                    x: pt.x,
                    reason: reason.clone(),
                });
                continue;
            }
            for ce in &pt.counterexamples {
                let mut ce = ce.clone();
                ce["trial"] = json!(k);
                ce["seed"] = json!(seed);
                ce["x"] = json!(pt.x);
                counterexamples.push(ce);
            }
            for &(scheme, metric, value) in &pt.metrics {
                w.write_record([
                    "trial",
                    &num(pt.x),
                    scheme,
                    metric,
                    &k.to_string(),
                    &seed.to_string(),
                    &num(value),
                    "",
                ])?;
                rows += 1;
            }
        }
    }

    // Aggregates: sweep order, then scheme, then metric, in first-seen order.
    let mut means = Vec::new();
    for (xi, &x) in xs.iter().enumerate() {
        let kept: Vec<&PointResult> = trials
            .iter()
            .map(|(_, p)| &p[xi])
            .filter(|p| p.excluded.is_none())
            .collect();
        let Some(first) = kept.first() else { continue };
        for (mi, &(scheme, metric, _)) in first.metrics.iter().enumerate() {
            let sum: f64 = kept.iter().map(|p| p.metrics[mi].2).sum();
            let mean = sum / kept.len() as f64;
            w.write_record([
                "mean",
                &num(x),
                scheme,
                metric,
                "",
                "",
                &num(mean),
                &kept.len().to_string(),
            ])?;
            rows += 1;
            means.push(json!({ "x": x, "scheme": scheme, "metric": metric, "mean": mean }));
        }
    }

    let mut metadata = RunMetadata::new(cfg);
    metadata.rows = rows;
    metadata.excluded = excluded;
    metadata.details = json!({
        "sweep": xs,
        "sweep_variable": if cfg.scenario == ScenarioKind::CompareSnr { "p_max_db" } else { "i_th" },
        "exactness_counterexamples": counterexamples,
    });
    Ok(ScenarioOutput {
        csv: finish(w)?,
        metadata,
    })
}
