use driftlab::capacity::*;
use driftlab::kernels::KernelSpec;
use driftlab::RngStream;
use proptest::prelude::*;
use rand::Rng;

fn brute_riesz(xs: &[Vec<f64>], w: &[f64], alpha: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..xs.len() {
        for j in 0..xs.len() {
            if i != j {
                let r: f64 = xs[i].iter().zip(&xs[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                s += w[i] * w[j] * r.powf(-alpha);
            }
        }
    }
    s
}

fn random_support(seed: u64, n: usize, dim: usize) -> PointSet {
    let mut rng = RngStream::new(seed, 0).rng();
    PointSet::new(dim, (0..n * dim).map(|_| rng.random::<f64>()).collect()).unwrap()
}

#[test]
fn equispaced_256_matches_double_sum() {
    let xs: Vec<f64> = (0..256).map(|i| i as f64 / 255.0).collect();
    let mu = DiscreteMeasure::uniform(PointSet::from_1d(&xs).unwrap()).unwrap();
    let e = riesz_energy(&mu, 0.5, Diagonal::Exclude).unwrap();
    let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    let oracle = brute_riesz(&rows, &mu.weights, 0.5);
    assert!((e.value - oracle).abs() <= 1e-12 * oracle, "{} vs {}", e.value, oracle);
    assert_eq!(e.error_bound, 0.0);
}

#[test]
fn blocked_energy_bound_contains_exact_value() {
    // exceed the exact limit; the oracle is an independent O(n^2) sum
    let n = EXACT_ENERGY_LIMIT + 1000;
    let support = random_support(3, n, 2);
    let mu = DiscreteMeasure::uniform(support.clone()).unwrap();
    let e = riesz_energy(&mu, 1.0, Diagonal::Exclude).unwrap();
    let w = 1.0 / n as f64;
    let exact: f64 = (0..n)
        .map(|i| {
            let mut s = 0.0;
            for j in 0..n {
                if j != i {
                    s += 1.0 / support.dist(i, j);
                }
            }
            s * w * w
        })
        .sum();
    assert!(e.error_bound > 0.0);
    assert!((e.value - exact).abs() <= e.error_bound, "{} {} {}", e.value, exact, e.error_bound);
    println!("blocked: value {} exact {} bound {}", e.value, exact, e.error_bound);
    assert!(e.error_bound < 0.05 * exact);
}

#[test]
fn martin_two_points_equidistant_hand_sum() {
    // x0 at the origin, both points at distance 1, separated by sqrt(2)
    let spec = KernelSpec::martin_free(3, vec![0.0; 3]).unwrap();
    let s = PointSet::new(3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
    let mu = DiscreteMeasure::uniform(s).unwrap();
    let e = martin_energy(&mu, &spec, Diagonal::Exclude).unwrap();
    // M(x,y) = |x0-y| / |x-y| = 1/sqrt2 both ways; two off-diagonal terms of weight 1/4
    let hand = 2.0 * 0.25 / 2f64.sqrt();
    assert!((e.value - hand).abs() < 1e-12);
}

#[test]
fn martin_single_point_is_infinite() {
    let spec = KernelSpec::martin_free(3, vec![0.0; 3]).unwrap();
    let mu = DiscreteMeasure::uniform(PointSet::new(3, vec![1.0, 2.0, 0.0]).unwrap()).unwrap();
    assert!(martin_energy(&mu, &spec, Diagonal::Exclude).unwrap().value.is_infinite());
}

#[test]
fn martin_energy_dilation_invariant() {
    let support = random_support(11, 40, 3);
    let x0 = vec![3.0, -1.0, 2.0];
    let mu = DiscreteMeasure::uniform(support.clone()).unwrap();
    let e1 = martin_energy(&mu, &KernelSpec::martin_free(3, x0.clone()).unwrap(), Diagonal::Exclude).unwrap();
    for c in [0.01, 7.5] {
        let scaled = PointSet::new(3, support.coords.iter().map(|v| v * c).collect()).unwrap();
        let x0c: Vec<f64> = x0.iter().map(|v| v * c).collect();
        let muc = DiscreteMeasure::uniform(scaled).unwrap();
        let e2 = martin_energy(&muc, &KernelSpec::martin_free(3, x0c).unwrap(), Diagonal::Exclude).unwrap();
        assert!((e1.value - e2.value).abs() < 1e-11 * e1.value);
    }
}

#[test]
fn symmetric_pair_minimizer_is_uniform() {
    let s = PointSet::from_1d(&[-0.3, 0.3]).unwrap();
    let r = min_energy(&s, &EnergyKernel::Riesz { alpha: 1.0 }, &SolverSettings::default()).unwrap();
    assert!(r.converged);
    for w in &r.minimizer.weights {
        assert!((w - 0.5).abs() < 1e-6);
    }
    assert!((r.capacity - 1.0 / r.energy).abs() < 1e-15);
}

/// Energy with the solver's nearest-neighbour cutoff diagonal.
fn cutoff_energy(xs: &[f64], w: &[f64], alpha: f64) -> f64 {
    let n = xs.len();
    let mut e = 0.0;
    for i in 0..n {
        let h = (0..n).filter(|&j| j != i).map(|j| (xs[i] - xs[j]).abs()).fold(f64::INFINITY, f64::min);
        e += w[i] * w[i] * (h / 2.0).powf(-alpha);
        for j in 0..n {
            if j != i {
                e += w[i] * w[j] * (xs[i] - xs[j]).abs().powf(-alpha);
            }
        }
    }
    e
}

#[test]
fn three_point_instance_matches_grid_search() {
    let xs = [0.0, 0.1, 1.0];
    let s = PointSet::from_1d(&xs).unwrap();
    let settings = SolverSettings { tol: 1e-10, max_iter: 10_000, ..Default::default() };
    let r = min_energy(&s, &EnergyKernel::Riesz { alpha: 1.0 }, &settings).unwrap();
    let mut best = (f64::INFINITY, [0.0; 3]);
    let m = 1000;
    for a in 0..=m {
        for b in 0..=(m - a) {
            let w = [a as f64 / m as f64, b as f64 / m as f64, (m - a - b) as f64 / m as f64];
            let e = cutoff_energy(&xs, &w, 1.0);
            if e < best.0 {
                best = (e, w);
            }
        }
    }
    for k in 0..3 {
        assert!((r.minimizer.weights[k] - best.1[k]).abs() <= 1e-3 + 1e-9, "{:?} vs {:?}", r.minimizer.weights, best.1);
    }
    assert!(r.energy <= best.0 + 1e-12);
    let w = &r.minimizer.weights;
    assert!(w[1] < w[0] && w[1] < w[2]);
}

#[test]
fn spread_points_have_larger_capacity_than_clustered() {
    let spread: Vec<f64> = (0..64).map(|i| i as f64 / 63.0).collect();
    let clustered: Vec<f64> = spread.iter().map(|x| 0.1 * x).collect();
    let k = EnergyKernel::Riesz { alpha: 0.5 };
    let st = SolverSettings::default();
    let a = min_energy(&PointSet::from_1d(&spread).unwrap(), &k, &st).unwrap();
    let b = min_energy(&PointSet::from_1d(&clustered).unwrap(), &k, &st).unwrap();
    assert!(a.capacity > b.capacity);
}

#[test]
fn solver_improves_on_uniform_and_reports_gap() {
    let s = random_support(5, 200, 2);
    let k = EnergyKernel::Riesz { alpha: 1.5 };
    let settings = SolverSettings { tol: 1e-7, max_iter: 20_000, ..Default::default() };
    let r = min_energy(&s, &k, &settings).unwrap();
    assert!(r.converged, "gap {}", r.gap);
    assert!(r.gap <= settings.tol);
    let uniform = DiscreteMeasure::uniform(s.clone()).unwrap();
    let eu = riesz_energy(&uniform, 1.5, Diagonal::NearestNeighbor).unwrap().value;
    assert!(r.energy <= eu);
    let check = riesz_energy(&r.minimizer, 1.5, Diagonal::NearestNeighbor).unwrap().value;
    assert!((check - r.energy).abs() < 1e-9 * r.energy);
}

#[test]
fn non_convergence_is_flagged() {
    let s = random_support(6, 100, 2);
    let r = min_energy(&s, &EnergyKernel::Riesz { alpha: 1.0 }, &SolverSettings { tol: 1e-14, max_iter: 2, ..Default::default() }).unwrap();
    assert!(!r.converged);
    assert!(r.gap > 1e-14);
    assert_eq!(r.iterations, 2);
}

#[test]
fn martin_capacity_symmetrization_recorded() {
    let spec = KernelSpec::martin_free(3, vec![0.0; 3]).unwrap();
    let s = PointSet::new(3, vec![2.0, 0.0, 0.0, 2.5, 0.0, 0.0, 2.0, 0.5, 0.0]).unwrap();
    let r = min_energy(&s, &EnergyKernel::Martin(spec), &SolverSettings::default()).unwrap();
    assert!(r.kernel_note.contains("symmetrized"));
    let json = serde_json::to_string(&r).unwrap();
    assert!(json.contains("\"minimizer\""));
}

#[test]
fn csv_support_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pts.csv");
    std::fs::write(&path, "0.0, 1.0\n0.5,0.25\n# comment\n1,1\n").unwrap();
    let s = PointSet::from_csv(&path).unwrap();
    assert_eq!(s.dim, 2);
    assert_eq!(s.len(), 3);
    assert_eq!(s.point(1), &[0.5, 0.25]);
    std::fs::write(&path, "0.0, x\n").unwrap();
    assert!(PointSet::from_csv(&path).is_err());
}

fn alpha_grid() -> Vec<f64> {
    (1..=20).map(|k| k as f64 * 0.05).collect()
}

#[test]
fn solver_rejects_excluded_diagonal() {
    let s = PointSet::from_1d(&[0.0, 1.0]).unwrap();
    let st = SolverSettings { diagonal: Diagonal::Exclude, ..Default::default() };
    assert!(min_energy(&s, &EnergyKernel::Riesz { alpha: 1.0 }, &st).is_err());
}

#[test]
fn frostman_single_point_is_zero() {
    let fam = vec![PointSet::from_1d(&[0.25]).unwrap(); 4];
    let est = frostman_dim(&fam, &alpha_grid(), FROSTMAN_GROWTH_THRESHOLD, &SolverSettings::default()).unwrap();
    assert_eq!(est.value, 0.0);
}

#[test]
fn frostman_unit_interval() {
    let fam: Vec<PointSet> = (3..=9)
        .map(|k| {
            let n = 1usize << k;
            PointSet::from_1d(&(0..=n).map(|i| i as f64 / n as f64).collect::<Vec<_>>()).unwrap()
        })
        .collect();
    let est = frostman_dim(&fam, &alpha_grid(), FROSTMAN_GROWTH_THRESHOLD, &SolverSettings::default()).unwrap();
    println!("interval: {} growth {:?}", est.value, est.growth);
    assert!((0.85..=1.0).contains(&est.value), "{}", est.value);
}

fn cantor_points(depth: u32) -> Vec<f64> {
    let mut pts = vec![0.0];
    let mut len = 1.0;
    for _ in 0..depth {
        len /= 3.0;
        pts = pts.iter().flat_map(|&a| [a, a + 2.0 * len]).collect();
    }
    // interval midpoints of the depth-th stage
    pts.iter().map(|a| a + len / 2.0).collect()
}

#[test]
fn frostman_cantor_set() {
    let fam: Vec<PointSet> = (3..=8).map(|k| PointSet::from_1d(&cantor_points(k)).unwrap()).collect();
    let est = frostman_dim(&fam, &alpha_grid(), FROSTMAN_GROWTH_THRESHOLD, &SolverSettings::default()).unwrap();
    println!("cantor: {} growth {:?}", est.value, est.growth);
    let target = 2f64.ln() / 3f64.ln();
    assert!((est.value - target).abs() <= 0.1, "{}", est.value);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn energy_is_convex_along_segments(seed in 0u64..1000, t in 0.0f64..1.0, alpha in 0.1f64..2.0) {
        let s = random_support(seed, 30, 2);
        let mut rng = RngStream::new(seed, 1).rng();
        let mut draw = || {
            let w: Vec<f64> = (0..30).map(|_| rng.random::<f64>()).collect();
            let sum: f64 = w.iter().sum();
            DiscreteMeasure::new(s.clone(), w.iter().map(|x| x / sum).collect()).unwrap()
        };
        let (mu, nu) = (draw(), draw());
        let mix = mu.mix(&nu, t).unwrap();
        let e = |m: &DiscreteMeasure| riesz_energy(m, alpha, Diagonal::NearestNeighbor).unwrap().value;
        prop_assert!(e(&mix) <= t * e(&mu) + (1.0 - t) * e(&nu) + 1e-9);
    }

    #[test]
    fn capacity_monotone_under_inclusion(seed in 0u64..1000, n in 4usize..64, extra in 1usize..64) {
        let big = random_support(seed, n + extra, 2);
        let small = PointSet::new(2, big.coords[..2 * n].to_vec()).unwrap();
        let k = EnergyKernel::Riesz { alpha: 1.0 };
        // a shared fixed cutoff; per-point spacings shrink as points are added
        let st = SolverSettings { tol: 1e-9, max_iter: 20_000, diagonal: Diagonal::CellCutoff(1e-3) };
        let a = min_energy(&small, &k, &st).unwrap();
        let b = min_energy(&big, &k, &st).unwrap();
        prop_assert!(a.capacity <= b.capacity * (1.0 + 1e-6), "{} > {}", a.capacity, b.capacity);
    }

    #[test]
    fn riesz_energy_matches_double_sum(seed in 0u64..1000, n in 2usize..80, alpha in 0.0f64..3.0) {
        let s = random_support(seed, n, 3);
        let mut rng = RngStream::new(seed, 2).rng();
        let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.01).collect();
        let sum: f64 = w.iter().sum();
        let mu = DiscreteMeasure::new(s.clone(), w.iter().map(|x| x / sum).collect()).unwrap();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| s.point(i).to_vec()).collect();
        let oracle = brute_riesz(&rows, &mu.weights, alpha);
        let e = riesz_energy(&mu, alpha, Diagonal::Exclude).unwrap().value;
        prop_assert!((e - oracle).abs() <= 1e-11 * oracle.abs().max(1.0));
    }
}

fn product(a: &[f64], b: &[f64]) -> PointSet {
    let rows: Vec<Vec<f64>> = a.iter().flat_map(|&x| b.iter().map(move |&y| vec![x, y])).collect();
    PointSet::from_rows(&rows).unwrap()
}

#[test]
fn half_capacity_of_dyadic_products() {
    use driftlab::fracdim::{build_dyadic_set, DyadicKind};
    let kernel = EnergyKernel::Riesz { alpha: 0.5 };
    let mut mixed = Vec::new();
    let mut same = Vec::new();
    for depth in 2..=9u32 {
        let a0 = build_dyadic_set(DyadicKind::A0, depth).unwrap().enumerate();
        let a1 = build_dyadic_set(DyadicKind::A1, depth).unwrap().enumerate();
        let s = SolverSettings { diagonal: Diagonal::CellCutoff((-(depth as f64)).exp2()), ..Default::default() };
        mixed.push(min_energy(&product(&a0, &a1), &kernel, &s).unwrap().capacity);
        same.push(min_energy(&product(&a0, &a0), &kernel, &s).unwrap().capacity);
    }
    // A0 x A1 keeps a positive fraction of its capacity at every depth
    assert!(mixed.iter().all(|&c| c >= 0.5 * mixed[0]), "{mixed:?}");
    // A0 x A0 shrinks across A0's forced block, digits 3..=6
    assert!(same[..5].windows(2).all(|w| w[1] < w[0]), "{same:?}");
    assert!(same[4] < 0.75 * same[0] && same[4] < mixed[4], "{same:?} {mixed:?}");
}
