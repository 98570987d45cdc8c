//! Experiment runners. Each takes resolved parameters and the replica's
//! stream and returns the replica's scalar metric, its full JSON output and
//! optional tables.

use driftlab::capacity::{frostman_dim, min_energy, EnergyKernel, PointSet, SolverSettings, FROSTMAN_GROWTH_THRESHOLD};
use driftlab::drifts::{axis_vector, DriftSpec};
use driftlab::fracdim::{
    boxcount_dim, build_dyadic_set, cuzick_experiment, graph_cloud, image_cloud, sumset_cover_check, DyadicKind,
    TimeSubset,
};
use driftlab::hitting::{
    capacity_sandwich_check, hit_prob, recurrence_statistic, reference_dust_targets, HitSettings, TargetSet,
};
use driftlab::kernels::{green_free, green_quadrature, log_space, verify_green_sandwich, QuadratureSettings};
use driftlab::multipoint::{self, ScalingReport};
use driftlab::randpath::{brownian_sample, fbm_sample, TimeGrid};
use driftlab::{Error, Result, RngStream};
use serde_json::{json, Value};

use crate::config::Params;
use crate::record::{ReplicaOutput, Table};

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("result types serialize")
}

fn lambda(p: &Params) -> Option<f64> {
    Some(p.float("lambda")).filter(|&l| l > 0.0)
}

/// The drift named by the `drift` and `drift_param` parameters, pointing
/// along the first axis. Random drifts (Weierstrass phases, fBM) draw their
/// seed from `rng`.
pub fn drift_from(p: &Params, d: usize, levels: u32, rng: RngStream) -> Result<DriftSpec> {
    let k = p.float("drift_param");
    let e1 = axis_vector(d, 0);
    match p.text("drift") {
        "zero" => Ok(DriftSpec::zero(d)),
        "linear" => DriftSpec::linear(e1.iter().map(|x| k * x).collect()),
        "sqrt-cusp" => DriftSpec::sqrt_cusp(k, &e1),
        "weierstrass" => DriftSpec::weierstrass(k, 30, rng.seed ^ rng.stream, &e1),
        "fbm" => DriftSpec::fbm(k, rng.seed ^ rng.stream, levels, d, None),
        other => Err(Error::invalid("drift", format!("unknown drift {other}"))),
    }
}

fn signed_axes(d: usize) -> Vec<Vec<f64>> {
    (0..d).flat_map(|a| [1.0, -1.0].map(|s| axis_vector(d, a).iter().map(|x| s * x).collect())).collect()
}

pub fn green_closed_form(p: &Params, _rng: RngStream) -> Result<ReplicaOutput> {
    let d = p.usize("d");
    let x = vec![0.0; d];
    let y: Vec<f64> = axis_vector(d, 0).iter().map(|v| v * p.float("r")).collect();
    let closed = green_free(d, &x, &y)?;
    let quad = green_quadrature(d, None, &x, &y, &QuadratureSettings::default())?;
    let diff = (closed - quad.value).abs();
    Ok(ReplicaOutput::new(diff, json!({ "closed_form": closed, "quadrature": quad, "abs_difference": diff })))
}

pub fn green_sandwich(p: &Params, _rng: RngStream) -> Result<ReplicaOutput> {
    let d = p.usize("d");
    let f = DriftSpec::sqrt_cusp(p.float("scale"), &axis_vector(d, 0))?;
    let (r_min, r_max) = (p.float("r_min"), p.float("r_max"));
    if r_min > r_max {
        return Err(Error::invalid("r_min", "must not exceed r_max"));
    }
    let radii = log_space(r_min, r_max, p.usize("radii"));
    let bound = (d == 2).then_some(r_max);
    let rep = verify_green_sandwich(&f, lambda(p), &radii, &signed_axes(d), bound, &QuadratureSettings::default())?;
    let rows = rep
        .radii
        .iter()
        .zip(&rep.ratios)
        .map(|(r, row)| vec![*r, row.iter().cloned().fold(f64::INFINITY, f64::min), row.iter().cloned().fold(0.0, f64::max)])
        .collect();
    let table = Table::new("ratios", &["radius", "min_ratio", "max_ratio"], rows);
    Ok(ReplicaOutput::new(rep.c2_emp / rep.c1_emp, to_json(&rep)).with_table(table))
}

fn cantor_midpoints(depth: u32) -> Vec<f64> {
    let mut left = vec![0.0];
    let mut len = 1.0;
    for _ in 0..depth {
        len /= 3.0;
        left = left.iter().flat_map(|&a| [a, a + 2.0 * len]).collect();
    }
    left.iter().map(|a| a + len / 2.0).collect()
}

fn support(set: &str, level: u32) -> Result<PointSet> {
    match set {
        "interval" => {
            let n = 1usize << level;
            PointSet::from_1d(&(0..=n).map(|i| i as f64 / n as f64).collect::<Vec<_>>())
        }
        "cantor" => PointSet::from_1d(&cantor_midpoints(level)),
        "square" => {
            if level > 5 {
                return Err(Error::invalid("level", "square grids are limited to level 5"));
            }
            let n = 1usize << level;
            let h = 1.0 / n as f64;
            let rows: Vec<Vec<f64>> =
                (0..n * n).map(|k| vec![((k % n) as f64 + 0.5) * h, ((k / n) as f64 + 0.5) * h]).collect();
            PointSet::from_rows(&rows)
        }
        other => Err(Error::invalid("set", format!("unknown set {other}"))),
    }
}

pub fn riesz_capacity(p: &Params, _rng: RngStream) -> Result<ReplicaOutput> {
    let pts = support(p.text("set"), p.int("level") as u32)?;
    let res = min_energy(&pts, &EnergyKernel::Riesz { alpha: p.float("alpha") }, &SolverSettings::default())?;
    Ok(ReplicaOutput::new(res.capacity, to_json(&res)))
}

pub fn frostman_dimension(p: &Params, _rng: RngStream) -> Result<ReplicaOutput> {
    let (lo, hi) = (p.int("level_lo") as u32, p.int("level_hi") as u32);
    if hi < lo + 2 {
        return Err(Error::invalid("level_hi", "needs at least three levels"));
    }
    let family = (lo..=hi).map(|k| support(p.text("set"), k)).collect::<Result<Vec<_>>>()?;
    let est = frostman_dim(&family, p.list("alphas"), FROSTMAN_GROWTH_THRESHOLD, &SolverSettings::default())?;
    let rows = est.alphas.iter().zip(&est.growth).map(|(a, g)| vec![*a, *g]).collect();
    Ok(ReplicaOutput::new(est.value, to_json(&est)).with_table(Table::new("growth", &["alpha", "growth"], rows)))
}

fn hit_settings(p: &Params) -> HitSettings {
    HitSettings { trials: p.int("trials") as u64, step_levels: p.int("step_levels") as u32, ..Default::default() }
}

pub fn hit_probability(p: &Params, rng: RngStream) -> Result<ReplicaOutput> {
    let d = p.usize("d");
    let f = drift_from(p, d, 16, rng.child(1))?;
    let target = TargetSet::ball(vec![0.0; d], p.float("radius"))?;
    let start: Vec<f64> = axis_vector(d, 0).iter().map(|v| v * p.float("distance")).collect();
    let res = hit_prob(rng.child(0), &start, &f, &target, lambda(p), &hit_settings(p))?;
    Ok(ReplicaOutput::new(res.estimate, to_json(&res)))
}

pub fn capacity_sandwich(p: &Params, rng: RngStream) -> Result<ReplicaOutput> {
    let d = p.usize("d");
    let target = TargetSet::ball(vec![0.0; d], p.float("radius"))?;
    let x0: Vec<f64> = axis_vector(d, 0).iter().map(|v| v * p.float("distance")).collect();
    let rep = capacity_sandwich_check(rng, &target, &x0, p.usize("surface_points"), &hit_settings(p))?;
    Ok(ReplicaOutput::new(rep.hit.estimate, to_json(&rep)))
}

pub fn intersection_equivalence(p: &Params, rng: RngStream) -> Result<ReplicaOutput> {
    let f = DriftSpec::sqrt_cusp(p.float("scale"), &axis_vector(3, 0))?;
    let zero = DriftSpec::zero(3);
    let s = hit_settings(p);
    let start = [0.0; 3];
    let mut per_target = Vec::new();
    let mut rows = Vec::new();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (k, t) in reference_dust_targets().iter().take(p.usize("targets")).enumerate() {
        let base = hit_prob(rng.child(2 * k as u64), &start, &zero, t, None, &s)?;
        let drifted = hit_prob(rng.child(2 * k as u64 + 1), &start, &f, t, None, &s)?;
        if base.hits == 0 {
            return Err(Error::Singular(format!("target {k}: no hits by the undrifted process")));
        }
        let ratio = drifted.estimate / base.estimate;
        lo = lo.min(ratio);
        hi = hi.max(ratio);
        rows.push(vec![k as f64, base.estimate, drifted.estimate, ratio]);
        per_target.push(json!({ "target": k, "base": base, "drifted": drifted, "ratio": ratio }));
    }
    let width = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    let out = json!({ "targets": per_target, "ratio_min": lo, "ratio_max": hi, "width": width });
    Ok(ReplicaOutput::new(width, out).with_table(Table::new("ratios", &["target", "base", "drifted", "ratio"], rows)))
}

pub fn recurrence(p: &Params, rng: RngStream) -> Result<ReplicaOutput> {
    let f = drift_from(p, 2, 16, rng.child(1))?;
    let w = p.list("w");
    if w.len() != 2 {
        return Err(Error::invalid("w", "the starting point is planar"));
    }
    let rep = recurrence_statistic(rng.child(0), &f, w, p.float("n"), p.int("trials") as u64, p.int("step_levels") as u32)?;
    Ok(ReplicaOutput::new(rep.p_positive, to_json(&rep)))
}

fn counts_table(est: &driftlab::fracdim::DimEstimate) -> Table {
    let rows = est.counts.iter().map(|&(k, c)| vec![k as f64, c as f64]).collect();
    Table::new("counts", &["level", "boxes"], rows)
}

pub fn boxcount_image(p: &Params, rng: RngStream) -> Result<ReplicaOutput> {
    let (d, levels) = (p.usize("d"), p.int("levels") as u32);
    let f = drift_from(p, d, levels, rng.child(1))?;
    let path = brownian_sample(rng.child(0), TimeGrid::unit(levels)?, d)?;
    let est = boxcount_dim(&image_cloud(&path, &f, &TimeSubset::whole(0.0, 1.0))?, 2, levels)?;
    Ok(ReplicaOutput::new(est.value, to_json(&est)).with_table(counts_table(&est)))
}

pub fn boxcount_graph(p: &Params, rng: RngStream) -> Result<ReplicaOutput> {
    let (d, levels) = (p.usize("d"), p.int("levels") as u32);
    let f = drift_from(p, d, levels, rng.child(1))?;
    let path = brownian_sample(rng.child(0), TimeGrid::unit(levels)?, d)?;
    let est = boxcount_dim(&graph_cloud(&path, &f, &TimeSubset::whole(0.0, 1.0))?, 2, levels)?;
    Ok(ReplicaOutput::new(est.value, to_json(&est)).with_table(counts_table(&est)))
}

pub fn boxcount_fbm(p: &Params, rng: RngStream) -> Result<ReplicaOutput> {
    let (d, levels) = (p.usize("d"), p.int("levels") as u32);
    let path = fbm_sample(rng, TimeGrid::unit(levels)?, d, p.float("alpha"))?;
    let est = boxcount_dim(&image_cloud(&path, &DriftSpec::zero(d), &TimeSubset::whole(0.0, 1.0))?, 2, levels)?;
    Ok(ReplicaOutput::new(est.value, to_json(&est)).with_table(counts_table(&est)))
}

pub fn cuzick(p: &Params, rng: RngStream) -> Result<ReplicaOutput> {
    let est = cuzick_experiment(p.float("alpha"), 3, 1usize << p.int("levels"), rng)?;
    Ok(ReplicaOutput::new(est.value, to_json(&est)).with_table(counts_table(&est)))
}

pub fn dyadic_sumset(p: &Params, _rng: RngStream) -> Result<ReplicaOutput> {
    let depth = p.int("depth") as u32;
    let a0 = build_dyadic_set(DyadicKind::A0, depth)?;
    let a1 = build_dyadic_set(DyadicKind::A1, depth)?;
    let mixed = sumset_cover_check(&a0, &a1, depth)?;
    let same = sumset_cover_check(&a0, &a0, depth)?;
    let out = json!({ "a0_points": a0.len(), "a1_points": a1.len(), "a0_plus_a1": mixed, "a0_plus_a0": same });
    Ok(ReplicaOutput::new(mixed.missing_count as f64, out))
}

pub fn injectivity(p: &Params, rng: RngStream) -> Result<ReplicaOutput> {
    let rep = driftlab::hitting::injectivity_experiment(rng, p.int("depth") as u32, p.int("trials") as u64)?;
    let mid = rep.estimates[rep.estimates.len() / 2].estimate;
    let rows = rep.estimates.iter().map(|e| vec![e.epsilon, e.estimate, e.ci.0, e.ci.1]).collect();
    let table = Table::new("estimates", &["epsilon", "estimate", "ci_low", "ci_high"], rows);
    Ok(ReplicaOutput::new(mid, to_json(&rep)).with_table(table))
}

fn scaling_table(rep: &ScalingReport) -> Table {
    let mut header = vec!["level".to_string(), "median".to_string(), "close_fraction".to_string()];
    header.extend((0..rep.distances.len()).map(|s| format!("seed{s}")));
    let rows = rep
        .levels
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            let mut row = vec![l as f64, rep.median_distance[k], rep.close_fraction[k]];
            row.extend(rep.distances.iter().map(|d| d[k]));
            row
        })
        .collect();
    Table { name: "levels".into(), header, rows }
}

fn scaling_output(rep: ScalingReport) -> ReplicaOutput {
    let below = rep.fraction(|e| e < -0.2);
    let mut out = to_json(&rep);
    out["fraction_decaying"] = json!(below);
    ReplicaOutput::new(rep.exponent, out).with_table(scaling_table(&rep))
}

pub fn doublepoint_scaling(p: &Params, rng: RngStream) -> Result<ReplicaOutput> {
    let d = p.usize("d");
    let hi = p.int("level_hi") as u32;
    let f = drift_from(p, d, hi, rng.child(1 << 32))?;
    let rep = multipoint::doublepoint_scaling(rng, d, &f, p.float("delta"), p.int("level_lo") as u32, hi, p.usize("seeds"))?;
    Ok(scaling_output(rep))
}

pub fn two_path_intersection(p: &Params, rng: RngStream) -> Result<ReplicaOutput> {
    let d = p.usize("d");
    let hi = p.int("level_hi") as u32;
    let f1 = drift_from(p, d, hi, rng.child(1 << 32))?;
    let f2 = drift_from(p, d, hi, rng.child((1 << 32) + 1))?;
    let x1 = vec![0.0; d];
    let x2: Vec<f64> = axis_vector(d, 0).iter().map(|v| v * p.float("separation")).collect();
    let rep = multipoint::two_path_intersection(rng, d, &f1, &f2, (&x1, &x2), p.int("level_lo") as u32, hi, p.usize("seeds"))?;
    Ok(scaling_output(rep))
}

pub fn rprime_inequalities(p: &Params, _rng: RngStream) -> Result<ReplicaOutput> {
    let rep = multipoint::verify_rprime_inequalities(
        p.float("alpha"),
        p.float("a"),
        p.float("delta"),
        p.list("separations"),
        p.usize("resolution"),
    )?;
    let rows = rep.separated.iter().map(|s| vec![s.l, s.max_abs, s.bound, s.violations as f64]).collect();
    let table = Table::new("separated", &["l", "max_abs", "bound", "violations"], rows);
    Ok(ReplicaOutput::new(rep.clustered_min_ratio, to_json(&rep)).with_table(table))
}
