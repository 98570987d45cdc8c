//! Acceptance suite: ten end-to-end criteria, one PASS/FAIL line each.
//!
//! Run with `cargo test -p driftlab --test acceptance`. The process exits
//! with status 1 when any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use driftlab::capacity::*;
use driftlab::drifts::{axis_vector, DriftSpec};
use driftlab::fracdim::*;
use driftlab::hitting::*;
use driftlab::kernels::*;
use driftlab::multipoint::*;
use driftlab::randpath::*;
use driftlab::RngStream;
use rand::Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> driftlab::Result<Outcome> {
    Ok(Outcome { pass, detail: detail.into() })
}

type Check = fn() -> driftlab::Result<Outcome>;

fn signed_axes(d: usize) -> Vec<Vec<f64>> {
    (0..d).flat_map(|a| [1.0, -1.0].map(|s| axis_vector(d, a).iter().map(|x| s * x).collect())).collect()
}

fn green_closed_form() -> driftlab::Result<Outcome> {
    let s = QuadratureSettings::default();
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    for (d, exact) in [(3, 1.0 / (2.0 * PI)), (4, 1.0 / (2.0 * PI * PI))] {
        let x = vec![0.0; d];
        let y = axis_vector(d, 0);
        let closed = green_free(d, &x, &y)?;
        let quad = green_quadrature(d, None, &x, &y, &s)?.value;
        let err = (closed - quad).abs().max((closed - exact).abs());
        worst = worst.max(err);
        lines.push(format!("d={d}: closed {closed:.12} quadrature {quad:.12}"));
    }
    outcome(worst <= 1e-8, format!("{}; max deviation {worst:.2e}", lines.join(", ")))
}

fn green_sandwich() -> driftlab::Result<Outcome> {
    let f = DriftSpec::sqrt_cusp(1.0, &[1.0, 0.0, 0.0])?;
    let radii = log_space(0.01, 100.0, 25);
    let dirs = signed_axes(3);
    let s = QuadratureSettings::default();
    let base = verify_green_sandwich(&f, None, &radii, &dirs, None, &s)?;
    let tight = verify_green_sandwich(&f, None, &radii, &dirs, None, &s.tightened(1e-2))?;
    let stable = |a: f64, b: f64| ((a - b) / a).abs() <= 0.1;
    let finite = base.c1_emp > 0.0 && base.c2_emp.is_finite();
    let zero = verify_green_sandwich(&DriftSpec::zero(3), None, &radii, &dirs, None, &s)?;
    let control = (zero.c1_emp - 1.0).abs().max((zero.c2_emp - 1.0).abs());
    outcome(
        finite && stable(base.c1_emp, tight.c1_emp) && stable(base.c2_emp, tight.c2_emp) && control <= 1e-6,
        format!(
            "ratio in [{:.5}, {:.5}], tightened [{:.5}, {:.5}]; zero drift within {control:.1e} of 1",
            base.c1_emp, base.c2_emp, tight.c1_emp, tight.c2_emp
        ),
    )
}

fn capacity_sandwich() -> driftlab::Result<Outcome> {
    let target = TargetSet::ball(vec![0.0; 3], 0.5)?;
    let settings = HitSettings { trials: 100_000, ..Default::default() };
    let rep = capacity_sandwich_check(RngStream::new(3, 0), &target, &[2.0, 0.0, 0.0], 1024, &settings)?;
    let h = &rep.hit;
    // escaping paths can only lose hits, so the bias widens the interval upwards
    let covers = h.ci_low <= 0.25 && 0.25 <= h.ci_high + h.truncation_bias_bound;
    outcome(
        rep.holds && covers,
        format!(
            "P = {:.4} CI [{:.4}, {:.4}] (+bias {:.1e}); Cap_M = {:.4}, sandwich [{:.4}, {:.4}]",
            h.estimate, h.ci_low, h.ci_high, h.truncation_bias_bound, rep.cap_martin, rep.lower, rep.upper
        ),
    )
}

fn intersection_equivalence() -> driftlab::Result<Outcome> {
    let f = DriftSpec::sqrt_cusp(1.0, &[1.0, 0.0, 0.0])?;
    let zero = DriftSpec::zero(3);
    let s = HitSettings { trials: 20_000, ..Default::default() };
    let rng = RngStream::new(4, 0);
    let mut ratios = Vec::new();
    for (k, t) in reference_dust_targets().iter().enumerate() {
        let b = hit_prob(rng.child(2 * k as u64), &[0.0; 3], &zero, t, None, &s)?;
        let d = hit_prob(rng.child(2 * k as u64 + 1), &[0.0; 3], &f, t, None, &s)?;
        ratios.push(d.estimate / b.estimate);
    }
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    outcome(hi / lo <= 4.0, format!("ratios [{}], width {:.2} (limit 4)", shown.join(", "), hi / lo))
}

fn dimension_formulas() -> driftlab::Result<Outcome> {
    let levels = 20;
    let grid = TimeGrid::unit(levels)?;
    let all = TimeSubset::whole(0.0, 1.0);
    let est = |c: &PointCloud| boxcount_dim(c, 2, levels).map(|e| e.value);
    let bm2 = brownian_sample(RngStream::new(5, 0), grid, 2)?;
    let bm1 = brownian_sample(RngStream::new(5, 1), grid, 1)?;
    let fbm = fbm_sample(RngStream::new(5, 2), grid, 3, 0.4)?;
    let cases = [
        ("image d=2", est(&image_cloud(&bm2, &DriftSpec::zero(2), &all)?)?, 1.8, 2.0),
        ("graph d=1", est(&graph_cloud(&bm1, &DriftSpec::zero(1), &all)?)?, 1.4, 1.6),
        ("graph d=2", est(&graph_cloud(&bm2, &DriftSpec::zero(2), &all)?)?, 1.9, 2.1),
        ("fbm 0.4 d=3", est(&image_cloud(&fbm, &DriftSpec::zero(3), &all)?)?, 2.3, 2.7),
        ("cuzick 0.2", cuzick_experiment(0.2, 3, 1 << levels, RngStream::new(5, 3))?.value, 2.35, 2.85),
    ];
    let pass = cases.iter().all(|&(_, v, lo, hi)| (lo..=hi).contains(&v));
    let shown: Vec<String> = cases
        .iter()
        .map(|(n, v, lo, hi)| format!("{n} {v:.3}{}", if (*lo..=*hi).contains(v) { "" } else { " (out)" }))
        .collect();
    outcome(pass, shown.join(", "))
}

fn monotonicity_suite() -> driftlab::Result<Outcome> {
    let levels = 18;
    let grid = TimeGrid::unit(levels)?;
    let all = TimeSubset::whole(0.0, 1.0);
    let est = |c: &PointCloud| boxcount_dim(c, 2, levels).map(|e| e.value);
    let still = PathSample { grid, dim: 3, points: vec![0.0; 3 * grid.len()] };
    let mut violations = Vec::new();
    let mut checked = 0;
    for seed in 0..5u64 {
        let p = brownian_sample(RngStream::new(6, seed), grid, 3)?;
        let bm = est(&image_cloud(&p, &DriftSpec::zero(3), &all)?)?;
        let drifts = [
            DriftSpec::sqrt_cusp(1.0, &[1.0, 0.0, 0.0])?,
            DriftSpec::weierstrass(0.5, 20, seed, &[0.6, 0.8, 0.0])?,
            DriftSpec::fbm(0.4, seed, levels, 3, Some(0))?,
        ];
        for f in &drifts {
            let both = est(&image_cloud(&p, f, &all)?)?;
            let fo = est(&image_cloud(&still, f, &all)?)?;
            let upper = 3.0f64.min(2.0 + fo);
            checked += 1;
            if both < bm.max(fo) - 0.2 || both > upper + 0.2 {
                violations.push(format!("seed {seed} {}: {both:.3} (B {bm:.3}, f {fo:.3})", f.kind_name()));
            }
        }
    }
    outcome(violations.is_empty(), format!("{checked} cases, {} violations {violations:?}", violations.len()))
}

fn doublepoints() -> driftlab::Result<Outcome> {
    let (lo, hi, seeds, delta) = (12, 18, 20, 0.25);
    let fbm = DriftSpec::fbm(0.45, 70, hi, 4, None)?;
    let cases: [(&str, usize, DriftSpec, fn(f64) -> bool); 3] = [
        ("d=2 f=0 decays", 2, DriftSpec::zero(2), |e| e < -0.2),
        ("d=4 fBM 0.45 decays", 4, fbm, |e| e < -0.2),
        ("d=4 f=0 stabilizes", 4, DriftSpec::zero(4), |e| e.abs() < 0.05),
    ];
    let mut pass = true;
    let mut shown = Vec::new();
    for (k, (name, d, f, ok)) in cases.iter().enumerate() {
        let rep = doublepoint_scaling(RngStream::new(7, k as u64), *d, f, delta, lo, hi, seeds)?;
        let agree = rep.fraction(ok);
        let verdict = agree > 0.5;
        pass &= verdict;
        shown.push(format!(
            "{name}: fitted {:.3}, {:.0}% of seeds agree, minority {:.0}%{}",
            rep.exponent,
            100.0 * agree,
            100.0 * agree.min(1.0 - agree),
            if verdict { "" } else { " (fails)" }
        ));
    }
    outcome(pass, shown.join("; "))
}

fn rprime_suite() -> driftlab::Result<Outcome> {
    let exact = r_prime(&RPrimeConfig { s: 0.0, t: 1.0, u: 0.0, v: 1.0, alpha: 0.5 })?;
    let rep = verify_rprime_inequalities(0.3, 1.0, 0.01, &[10.0, 100.0, 1000.0], 21)?;
    let maxes: Vec<String> = rep.separated.iter().map(|s| format!("{:.2e}", s.max_abs)).collect();
    let separated_ok = rep.separated_decreasing && rep.separated.iter().all(|s| s.violations == 0);
    outcome(
        exact == 0.5 && separated_ok && rep.clustered_min_ratio > 0.0 && rep.clustered_violations == 0,
        format!(
            "r'(0,1,0,1) = {exact}; separated max |r'| [{}]; clustered ratio >= {:.4} over {} points, {} violations",
            maxes.join(", "),
            rep.clustered_min_ratio,
            rep.clustered_points,
            rep.clustered_violations
        ),
    )
}

fn counterexample_sets() -> driftlab::Result<Outcome> {
    let a0_6 = build_dyadic_set(DyadicKind::A0, 6)?;
    let enum_ok = a0_6.enumerate().len() == 4 && a0_6.covering_count(6) == 1 << 2;
    let a0 = build_dyadic_set(DyadicKind::A0, 12)?;
    let a1 = build_dyadic_set(DyadicKind::A1, 12)?;
    let mixed = sumset_cover_check(&a0, &a1, 12)?;
    let same = sumset_cover_check(&a0, &a0, 12)?;
    let inj = injectivity_experiment(RngStream::new(9, 0), 12, 20_000)?;
    let inside = inj.estimates.iter().all(|e| e.ci.0 > 0.0 && e.ci.1 < 1.0 && e.estimate > 0.0 && e.estimate < 1.0);
    let shown: Vec<String> = inj
        .estimates
        .iter()
        .map(|e| format!("eps {:.1e}: {:.4} [{:.4}, {:.4}]", e.epsilon, e.estimate, e.ci.0, e.ci.1))
        .collect();
    outcome(
        enum_ok && mixed.covered && !same.covered && inside,
        format!(
            "A0 depth 6 has {} points; A0+A1 missing {}; A0+A0 missing {}; {}",
            a0_6.len(),
            mixed.missing_count,
            same.missing_count,
            shown.join(", ")
        ),
    )
}

fn random_cloud(rng: &mut impl Rng, dim: usize, n: usize, walk: bool) -> TimedCloud {
    let times: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    let mut pts = vec![0.0; n * dim];
    for i in 0..n {
        for c in 0..dim {
            pts[i * dim + c] = if walk && i > 0 {
                pts[(i - 1) * dim + c] + 0.02 * rng.sample::<f64, _>(StandardNormal)
            } else {
                rng.random::<f64>()
            };
        }
    }
    TimedCloud::new(dim, times, pts).expect("valid cloud")
}

fn double_sum(xs: &PointSet, w: &[f64], alpha: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..xs.len() {
        for j in 0..xs.len() {
            if i != j {
                s += w[i] * w[j] * xs.dist(i, j).powf(-alpha);
            }
        }
    }
    s
}

/// Energy with the solver's nearest-neighbour cutoff diagonal, 1-d support.
fn cutoff_energy(xs: &[f64], w: &[f64], alpha: f64) -> f64 {
    let n = xs.len();
    let mut e = 0.0;
    for i in 0..n {
        let h = (0..n).filter(|&j| j != i).map(|j| (xs[i] - xs[j]).abs()).fold(f64::INFINITY, f64::min);
        e += w[i] * w[i] * (h / 2.0).powf(-alpha);
        for j in (0..n).filter(|&j| j != i) {
            e += w[i] * w[j] * (xs[i] - xs[j]).abs().powf(-alpha);
        }
    }
    e
}

fn oracle_equivalences() -> driftlab::Result<Outcome> {
    let mut rng = RngStream::new(10, 0).rng();
    let mut closest_mismatch = 0;
    for k in 0..100 {
        let dim = 2 + k % 3;
        let n = 256 + 97 * k;
        let walk = k % 2 == 0;
        let a = random_cloud(&mut rng, dim, n, walk);
        let (fast, slow) = if k % 3 == 0 {
            (closest_approach(&a, None, 0.25, None)?, closest_approach_brute(&a, None, 0.25)?)
        } else {
            let b = random_cloud(&mut rng, dim, n / 2 + 5, walk);
            (closest_approach(&a, Some(&b), 0.0, None)?, closest_approach_brute(&a, Some(&b), 0.0)?)
        };
        closest_mismatch += usize::from(fast != slow);
    }
    let mut energy_err: f64 = 0.0;
    for k in 0..20 {
        let n = 2 + 15 * k;
        let dim = 1 + k % 3;
        let pts = PointSet::new(dim, (0..n * dim).map(|_| rng.random::<f64>()).collect())?;
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.01).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let alpha = 0.15 * k as f64;
        let mu = DiscreteMeasure::new(pts.clone(), w.clone())?;
        let e = riesz_energy(&mu, alpha, Diagonal::Exclude)?.value;
        let oracle = double_sum(&pts, &w, alpha);
        energy_err = energy_err.max(((e - oracle) / oracle).abs());
    }
    let xs = [0.0, 0.1, 1.0];
    let settings = SolverSettings { tol: 1e-10, max_iter: 10_000, ..Default::default() };
    let solved = min_energy(&PointSet::from_1d(&xs)?, &EnergyKernel::Riesz { alpha: 1.0 }, &settings)?;
    let m = 1000;
    let mut best = (f64::INFINITY, [0.0; 3]);
    for a in 0..=m {
        for b in 0..=(m - a) {
            let w = [a as f64 / m as f64, b as f64 / m as f64, (m - a - b) as f64 / m as f64];
            let e = cutoff_energy(&xs, &w, 1.0);
            if e < best.0 {
                best = (e, w);
            }
        }
    }
    let weight_err = (0..3).map(|k| (solved.minimizer.weights[k] - best.1[k]).abs()).fold(0.0, f64::max);
    outcome(
        closest_mismatch == 0 && energy_err <= 1e-12 && weight_err <= 1e-3 + 1e-9,
        format!(
            "closest approach mismatches {closest_mismatch}/100; energy rel. error {energy_err:.1e}; \
             3-point weights off grid optimum by {weight_err:.1e}"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, Check); 10] = [
        ("green kernel closed form", Duration::from_secs(1), green_closed_form),
        ("green sandwich", Duration::from_secs(60), green_sandwich),
        ("capacity sandwich", Duration::from_secs(300), capacity_sandwich),
        ("intersection equivalence", Duration::from_secs(600), intersection_equivalence),
        ("dimension formulas", Duration::from_secs(5 * 120), dimension_formulas),
        ("image dimension monotonicity", Duration::from_secs(600), monotonicity_suite),
        ("double-point dichotomy", Duration::from_secs(900), doublepoints),
        ("r' inequalities", Duration::from_secs(60), rprime_suite),
        ("counterexample sets", Duration::from_secs(300), counterexample_sets),
        ("oracle equivalences", Duration::from_secs(120), oracle_equivalences),
    ];
    let mut failed = 0;
    for (k, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && took <= *budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let slow = if took > *budget { format!(" over budget {}s", budget.as_secs()) } else { String::new() };
        failed += usize::from(!pass);
        println!(
            "{} {:>2} {name} ({:.1}s{slow}): {detail}",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            took.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
