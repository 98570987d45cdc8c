//! Results must not depend on the number of worker threads.

use driftlab::capacity::{min_energy, riesz_energy, Diagonal, DiscreteMeasure, EnergyKernel, PointSet, SolverSettings};
use driftlab::drifts::DriftSpec;
use driftlab::hitting::{hit_prob, injectivity_experiment, HitSettings, TargetSet};
use driftlab::multipoint::doublepoint_scaling;
use driftlab::randpath::{fbm_sample, TimeGrid};
use driftlab::RngStream;
use rand::Rng;

fn on_threads<T: Send>(n: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap().install(f)
}

fn same_on_1_and_4<T: serde::Serialize + Send>(f: impl Fn() -> T + Send + Sync) {
    let a = serde_json::to_string(&on_threads(1, &f)).unwrap();
    let b = serde_json::to_string(&on_threads(4, &f)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn hitting_estimates() {
    let target = TargetSet::ball(vec![0.0; 3], 0.5).unwrap();
    let f = DriftSpec::sqrt_cusp(1.0, &[1.0, 0.0, 0.0]).unwrap();
    let s = HitSettings { trials: 500, ..Default::default() };
    same_on_1_and_4(|| hit_prob(RngStream::new(1, 0), &[1.0, 0.0, 0.0], &f, &target, None, &s).unwrap());
    same_on_1_and_4(|| injectivity_experiment(RngStream::new(2, 0), 8, 200).unwrap());
}

#[test]
fn double_point_scaling() {
    same_on_1_and_4(|| doublepoint_scaling(RngStream::new(3, 0), 3, &DriftSpec::zero(3), 0.25, 8, 11, 6).unwrap());
}

#[test]
fn energies_and_capacities() {
    let mut rng = RngStream::new(4, 0).rng();
    // above the exact double-sum limit, so the blocked far-field path runs
    let big = PointSet::new(2, (0..2 * 20_000).map(|_| rng.random::<f64>()).collect()).unwrap();
    let mu = DiscreteMeasure::uniform(big).unwrap();
    same_on_1_and_4(|| riesz_energy(&mu, 1.0, Diagonal::Exclude).unwrap());
    let small = PointSet::new(2, (0..2 * 300).map(|_| rng.random::<f64>()).collect()).unwrap();
    same_on_1_and_4(|| min_energy(&small, &EnergyKernel::Riesz { alpha: 1.0 }, &SolverSettings::default()).unwrap());
}

#[test]
fn fbm_paths() {
    same_on_1_and_4(|| fbm_sample(RngStream::new(5, 0), TimeGrid::unit(14).unwrap(), 3, 0.3).unwrap().points);
}
