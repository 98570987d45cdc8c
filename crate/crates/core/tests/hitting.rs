use driftlab::drifts::DriftSpec;
use driftlab::fracdim::{build_dyadic_set, DyadicKind, DyadicSet};
use driftlab::hitting::*;
use driftlab::kernels::{log_space, verify_green_sandwich, QuadratureSettings};
use driftlab::RngStream;

fn settings(trials: u64) -> HitSettings {
    HitSettings { trials, ..Default::default() }
}

fn cusp3() -> DriftSpec {
    DriftSpec::sqrt_cusp(1.0, &[1.0, 0.0, 0.0]).unwrap()
}

#[test]
fn ball_harmonic_ratio() {
    let target = TargetSet::ball(vec![0.0; 3], 0.5).unwrap();
    let r = hit_prob(RngStream::new(1, 0), &[1.0, 0.0, 0.0], &DriftSpec::zero(3), &target, None, &settings(8000)).unwrap();
    assert!(r.ci_low - r.truncation_bias_bound <= 0.5 && 0.5 <= r.ci_high + r.truncation_bias_bound, "{r:?}");
    assert!(r.ci_low <= r.estimate && r.estimate <= r.ci_high);
    assert!(r.escape_radius.is_some() && r.truncation_bias_bound > 0.0);
}

#[test]
fn start_inside_target_hits_surely() {
    let target = TargetSet::ball(vec![0.0; 3], 0.5).unwrap();
    let r = hit_prob(RngStream::new(1, 0), &[0.1, 0.0, 0.0], &cusp3(), &target, None, &settings(100)).unwrap();
    assert_eq!(r.estimate, 1.0);
    assert_eq!(r.hits, 100);
}

#[test]
fn result_is_reproducible_and_serializes() {
    let target = TargetSet::ball(vec![0.0; 3], 0.5).unwrap();
    let a = hit_prob(RngStream::new(2, 3), &[1.0, 0.0, 0.0], &DriftSpec::zero(3), &target, None, &settings(600)).unwrap();
    let b = hit_prob(RngStream::new(2, 3), &[1.0, 0.0, 0.0], &DriftSpec::zero(3), &target, None, &settings(600)).unwrap();
    assert_eq!(a, b);
    let back: HitResult = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
    assert_eq!(a, back);
}

#[test]
fn planar_killed_ratio_within_green_constants() {
    let f = DriftSpec::sqrt_cusp(1.0, &[1.0, 0.0]).unwrap();
    let dirs: Vec<Vec<f64>> = (0..8).map(|k| {
        let a = k as f64 * std::f64::consts::TAU / 8.0;
        vec![a.cos(), a.sin()]
    }).collect();
    let green = verify_green_sandwich(&f, Some(1.0), &log_space(0.01, 2.0, 9), &dirs, Some(2.0), &QuadratureSettings::default()).unwrap();
    let pts: Vec<Vec<f64>> = (0..16).map(|k| vec![0.2 + 0.2 * (k % 4) as f64, 0.2 + 0.2 * (k / 4) as f64]).collect();
    let target = TargetSet::dust(pts, 0.05).unwrap();
    let s = settings(20_000);
    let start = [0.0, 0.5];
    let base = hit_prob(RngStream::new(4, 0), &start, &DriftSpec::zero(2), &target, Some(1.0), &s).unwrap();
    let drifted = hit_prob(RngStream::new(4, 1), &start, &f, &target, Some(1.0), &s).unwrap();
    let lo = drifted.ci_low / base.ci_high;
    let hi = drifted.ci_high / base.ci_low;
    eprintln!("green [{}, {}], hit ratio {} in [{lo}, {hi}]", green.c1_emp, green.c2_emp, drifted.estimate / base.estimate);
    assert!(hi >= green.c1_emp && lo <= green.c2_emp);
}

#[test]
fn planar_without_killing_is_rejected() {
    let target = TargetSet::ball(vec![0.0; 2], 0.5).unwrap();
    assert!(hit_prob(RngStream::new(1, 0), &[1.0, 0.0], &DriftSpec::zero(2), &target, None, &settings(10)).is_err());
    assert!(hit_prob(RngStream::new(1, 0), &[1.0, 0.0], &DriftSpec::zero(2), &target, Some(0.0), &settings(10)).is_err());
}

#[test]
fn invalid_targets_and_inputs_are_rejected() {
    assert!(TargetSet::ball(vec![0.0; 3], 0.0).is_err());
    assert!(TargetSet::dust(vec![vec![0.0; 3]], -1.0).is_err());
    let target = TargetSet::ball(vec![0.0; 3], 0.5).unwrap();
    assert!(hit_prob(RngStream::new(1, 0), &[1.0, 0.0], &DriftSpec::zero(3), &target, None, &settings(10)).is_err());
    // the fBM drift table ends at t = 1
    let f = DriftSpec::fbm(0.3, 1, 8, 3, None).unwrap();
    assert!(hit_prob(RngStream::new(1, 0), &[3.0, 0.0, 0.0], &f, &target, None, &settings(50)).is_err());
}

#[test]
fn capacity_sandwich_for_ball() {
    let target = TargetSet::ball(vec![0.0; 3], 0.5).unwrap();
    let rep = capacity_sandwich_check(RngStream::new(5, 0), &target, &[2.0, 0.0, 0.0], 1024, &settings(10_000)).unwrap();
    eprintln!("{rep:?}");
    assert!(rep.holds, "{rep:?}");
    assert!(rep.cap_martin > 0.2 && rep.cap_martin < 0.3);
    assert!(rep.hit.ci_low <= 0.25 + rep.bias && 0.25 <= rep.hit.ci_high + rep.bias);
}

#[test]
fn single_point_has_zero_capacity_and_rare_hits() {
    let x0 = [1.0, 0.0, 0.0];
    let target = TargetSet::dust(vec![vec![0.0; 3]], 1e-3).unwrap();
    let rep = capacity_sandwich_check(RngStream::new(6, 0), &target, &x0, 1, &settings(2000)).unwrap();
    assert_eq!(rep.cap_martin, 0.0);
    assert!(rep.hit.estimate < 0.01, "{rep:?}");
    assert!(rep.holds);
}

#[test]
fn union_of_balls_hits_at_least_as_often_as_each() {
    let a = vec![1.0, 0.0, 0.0];
    let b = vec![-1.0, 0.0, 0.0];
    let union = TargetSet::Union { balls: vec![(a.clone(), 0.3), (b.clone(), 0.3)] };
    let s = settings(4000);
    let start = [0.0, 0.0, 0.0];
    let z = DriftSpec::zero(3);
    // shared stream: each path hits the union whenever it hits either ball
    let pu = hit_prob(RngStream::new(7, 0), &start, &z, &union, None, &s).unwrap();
    let pa = hit_prob(RngStream::new(7, 0), &start, &z, &TargetSet::ball(a, 0.3).unwrap(), None, &s).unwrap();
    let pb = hit_prob(RngStream::new(7, 0), &start, &z, &TargetSet::ball(b, 0.3).unwrap(), None, &s).unwrap();
    assert!(pu.estimate + pu.ci_width() >= pa.estimate.max(pb.estimate), "{pu:?} {pa:?} {pb:?}");
    assert!(pu.estimate <= pa.estimate + pb.estimate + pu.ci_width());
}

#[test]
fn wilson_interval_covers_the_harmonic_ratio() {
    let target = TargetSet::ball(vec![0.0; 3], 0.5).unwrap();
    let s = settings(800);
    let covered = (0..50)
        .filter(|&k| {
            let r = hit_prob(RngStream::new(100, k), &[1.0, 0.0, 0.0], &DriftSpec::zero(3), &target, None, &s).unwrap();
            r.ci_low - r.truncation_bias_bound <= 0.5 && 0.5 <= r.ci_high + r.truncation_bias_bound
        })
        .count();
    assert!(covered >= 45, "{covered}/50");
}

fn directions_3d() -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for a in 0..3 {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; 3];
            e[a] = sign;
            dirs.push(e);
        }
    }
    dirs
}

#[test]
fn cusp_drift_ratios_lie_within_green_constants() {
    let green = verify_green_sandwich(&cusp3(), None, &log_space(0.01, 100.0, 9), &directions_3d(), None, &QuadratureSettings::default()).unwrap();
    let s = settings(4000);
    let start = [0.0; 3];
    for (k, t) in reference_dust_targets().iter().enumerate() {
        let b = hit_prob(RngStream::new(8, 2 * k as u64), &start, &DriftSpec::zero(3), t, None, &s).unwrap();
        let f = hit_prob(RngStream::new(8, 2 * k as u64 + 1), &start, &cusp3(), t, None, &s).unwrap();
        let (lo, hi) = (f.ci_low / b.ci_high, f.ci_high / b.ci_low);
        assert!(hi >= green.c1_emp && lo <= green.c2_emp, "target {k}: [{lo}, {hi}] vs [{}, {}]", green.c1_emp, green.c2_emp);
    }
}

#[test]
fn polarity_transfers_to_the_drifted_process() {
    let s = settings(4000);
    let start = [0.25, 0.0, 0.0];
    let mut ratios = Vec::new();
    for (k, e) in (4..=8).map(|j| (-(j as f64)).exp2()).enumerate() {
        let t = TargetSet::dust(vec![vec![0.0; 3]], e).unwrap();
        let b = hit_prob(RngStream::new(9, 2 * k as u64), &start, &DriftSpec::zero(3), &t, None, &s).unwrap();
        let f = hit_prob(RngStream::new(9, 2 * k as u64 + 1), &start, &cusp3(), &t, None, &s).unwrap();
        assert!(b.estimate < 4.0 * e + b.ci_width());
        ratios.push(f.estimate / b.estimate);
    }
    eprintln!("polarity ratios {ratios:?}");
    assert!(ratios.iter().all(|&r| r > 0.2 && r < 5.0), "{ratios:?}");
}

#[test]
fn step_refinement_is_within_ci() {
    let target = TargetSet::ball(vec![0.0; 3], 0.5).unwrap();
    let start = [1.0, 0.0, 0.0];
    let coarse = hit_prob(RngStream::new(10, 0), &start, &cusp3(), &target, None, &settings(4000)).unwrap();
    let fine = hit_prob(RngStream::new(10, 0), &start, &cusp3(), &target, None, &HitSettings { step_levels: 15, ..settings(4000) }).unwrap();
    assert!((coarse.estimate - fine.estimate).abs() < coarse.ci_width(), "{coarse:?} {fine:?}");
}

#[test]
fn recurrence_visits_are_likely() {
    let rep = recurrence_statistic(RngStream::new(11, 0), &DriftSpec::zero(2), &[0.0, 0.0], 2.0, 20_000, 10).unwrap();
    assert!(rep.p_ci.0 > 0.5, "{rep:?}");
    assert!(rep.second_moment_bound > 0.0 && rep.second_moment_bound <= 1.0);
}

/// `E T = int_n^{n^2} P(|B_t| <= 1) dt` with `P(|B_t| <= 1) = 1 - exp(-1 / 2t)`.
fn mean_occupation(n: f64) -> f64 {
    let steps = 200_000;
    let (a, b) = (n.ln(), (n * n).ln());
    let h = (b - a) / steps as f64;
    (0..steps).map(|k| {
        let t = (a + (k as f64 + 0.5) * h).exp();
        (1.0 - (-0.5 / t).exp()) * t * h
    }).sum()
}

#[test]
fn mean_occupation_matches_the_integral() {
    let rep = recurrence_statistic(RngStream::new(12, 0), &DriftSpec::zero(2), &[0.0, 0.0], 4.0, 4000, 8).unwrap();
    let exact = mean_occupation(4.0);
    assert!((rep.mean - exact).abs() < 4.0 * rep.mean_stderr + 0.02 * exact, "{} vs {exact}", rep.mean);
}

#[test]
fn mean_occupation_grows_logarithmically() {
    let f = DriftSpec::sqrt_cusp(1.0, &[1.0, 0.0]).unwrap();
    let small = recurrence_statistic(RngStream::new(13, 0), &f, &[0.0, 0.0], 4.0, 3000, 6).unwrap();
    let large = recurrence_statistic(RngStream::new(13, 1), &f, &[0.0, 0.0], 16.0, 3000, 6).unwrap();
    let ratio = large.mean / small.mean;
    assert!((1.4..=2.6).contains(&ratio), "{ratio}");
}

#[test]
fn recurrence_preconditions() {
    let z = DriftSpec::zero(2);
    assert!(recurrence_statistic(RngStream::new(1, 0), &z, &[0.0, 0.0], 1.5, 10, 6).is_err());
    assert!(recurrence_statistic(RngStream::new(1, 0), &z, &[3.0, 0.0], 4.0, 10, 6).is_err());
    assert!(recurrence_statistic(RngStream::new(1, 0), &DriftSpec::zero(3), &[0.0, 0.0], 4.0, 10, 6).is_err());
}

#[test]
fn injectivity_estimates_stay_inside_the_unit_interval() {
    let rep = injectivity_experiment(RngStream::new(14, 0), 12, 4000).unwrap();
    for e in &rep.estimates {
        assert!(e.ci.0 > 0.02 && e.ci.1 < 0.98, "{e:?}");
        assert!(e.ci.0 <= e.estimate && e.estimate <= e.ci.1);
    }
    assert!(rep.estimates.windows(2).all(|w| w[1].estimate <= w[0].estimate));
}

#[test]
fn shifted_copy_estimates_shrink_with_epsilon() {
    let a0 = build_dyadic_set(DyadicKind::A0, 12).unwrap();
    let shifted = DyadicSet { offset: 2.0, ..a0.clone() };
    let eps: Vec<f64> = (6..=12).step_by(2).map(|j| (-(j as f64)).exp2()).collect();
    let rep = injectivity_experiment_with(RngStream::new(15, 0), &a0, &shifted, 4000, &eps).unwrap();
    let est: Vec<f64> = rep.estimates.iter().map(|e| e.estimate).collect();
    assert!(est.windows(2).all(|w| w[1] <= w[0]), "{est:?}");
    assert!(est[0] > *est.last().unwrap(), "{est:?}");
}

#[test]
fn wide_epsilon_always_intersects() {
    let a0 = build_dyadic_set(DyadicKind::A0, 8).unwrap();
    let a1 = build_dyadic_set(DyadicKind::A1, 8).unwrap();
    let rep = injectivity_experiment_with(RngStream::new(16, 0), &a0, &a1, 500, &[100.0]).unwrap();
    assert_eq!(rep.estimates[0].estimate, 1.0);
}

#[test]
fn injectivity_budget_and_depth_limits() {
    assert!(injectivity_experiment(RngStream::new(1, 0), 17, 10).is_err());
    assert!(injectivity_experiment(RngStream::new(1, 0), 16, u64::MAX / 4).is_err());
    assert!(injectivity_experiment(RngStream::new(1, 0), 8, 0).is_err());
}
