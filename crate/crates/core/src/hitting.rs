//! Monte Carlo hitting probabilities of `x + B_t + f(t) - f(0)` with
//! exponential killing or a transient escape radius, the Martin-capacity
//! sandwich, neighbourhood recurrence, and the injectivity experiment on the
//! dyadic sets.

use rand::Rng;
use rand_distr::{Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::capacity::{min_energy, EnergyKernel, PointSet, SolverSettings};
use crate::drifts::DriftSpec;
use crate::error::{Error, Result};
use crate::fracdim::{build_dyadic_set, DyadicKind, DyadicSet};
use crate::kernels::KernelSpec;
use crate::par;
use crate::randpath::brownian_at_times;
use crate::rng::RngStream;
use crate::stats::{mean_var, wilson_interval, CompensatedSum, Z95};

/// Trials per random stream; fixing it makes results independent of the
/// thread count.
const TRIALS_PER_BLOCK: u64 = 256;
/// Largest surface discretization [`capacity_sandwich_check`] builds.
pub const MAX_SURFACE_POINTS: usize = 1 << 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetSet {
    Ball { center: Vec<f64>, radius: f64 },
    /// `inner <= |x - center| <= outer`.
    Shell { center: Vec<f64>, inner: f64, outer: f64 },
    Union { balls: Vec<(Vec<f64>, f64)> },
    /// Finite point set; a path hits it when it comes within `hit_radius`.
    Dust { points: Vec<Vec<f64>>, hit_radius: f64 },
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl TargetSet {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let t = TargetSet::Ball { center, radius };
        t.validate()?;
        Ok(t)
    }

    pub fn dust(points: Vec<Vec<f64>>, hit_radius: f64) -> Result<Self> {
        let t = TargetSet::Dust { points, hit_radius };
        t.validate()?;
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        match self {
            TargetSet::Ball { center, .. } | TargetSet::Shell { center, .. } => center.len(),
            TargetSet::Union { balls } => balls.first().map(|b| b.0.len()).unwrap_or(0),
            TargetSet::Dust { points, .. } => points.first().map(|p| p.len()).unwrap_or(0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::invalid("target", "needs at least one center of dimension >= 1"));
        }
        let bad_center = |c: &Vec<f64>| c.len() != d || c.iter().any(|x| !x.is_finite());
        let bad_radius = |r: f64| !(r > 0.0 && r.is_finite());
        match self {
            TargetSet::Ball { center, radius } => {
                if bad_center(center) || bad_radius(*radius) {
                    return Err(Error::invalid("target", "ball needs a finite center and positive radius"));
                }
            }
            TargetSet::Shell { center, inner, outer } => {
                if bad_center(center) || bad_radius(*inner) || !(outer > inner) || !outer.is_finite() {
                    return Err(Error::invalid("target", "shell needs 0 < inner < outer"));
                }
            }
            TargetSet::Union { balls } => {
                if balls.iter().any(|(c, r)| bad_center(c) || bad_radius(*r)) {
                    return Err(Error::invalid("target", "every ball needs a finite center and positive radius"));
                }
            }
            TargetSet::Dust { points, hit_radius } => {
                if points.iter().any(bad_center) || bad_radius(*hit_radius) {
                    return Err(Error::invalid("target", "dust needs finite points and a positive hit radius"));
                }
            }
        }
        Ok(())
    }

    /// Signed distance: negative inside, zero on the boundary.
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            TargetSet::Ball { center, radius } => dist(x, center) - radius,
            TargetSet::Shell { center, inner, outer } => {
                let r = dist(x, center);
                if r < *inner {
                    inner - r
                } else if r > *outer {
                    r - outer
                } else {
                    -(r - inner).min(outer - r)
                }
            }
            TargetSet::Union { balls } => balls.iter().map(|(c, r)| dist(x, c) - r).fold(f64::INFINITY, f64::min),
            TargetSet::Dust { points, hit_radius } => {
                points.iter().map(|p| dist(x, p)).fold(f64::INFINITY, f64::min) - hit_radius
            }
        }
    }

    /// Center and radius of a ball containing the target.
    pub fn bounding_ball(&self) -> (Vec<f64>, f64) {
        match self {
            TargetSet::Ball { center, radius } => (center.clone(), *radius),
            TargetSet::Shell { center, outer, .. } => (center.clone(), *outer),
            TargetSet::Union { balls } => {
                let c = centroid(balls.iter().map(|b| b.0.as_slice()));
                let r = balls.iter().map(|(b, r)| dist(&c, b) + r).fold(0.0, f64::max);
                (c, r)
            }
            TargetSet::Dust { points, hit_radius } => {
                let c = centroid(points.iter().map(|p| p.as_slice()));
                let r = points.iter().map(|p| dist(&c, p)).fold(0.0, f64::max) + hit_radius;
                (c, r)
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.bounding_ball().1
    }
}

fn centroid<'a>(pts: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut c: Vec<f64> = Vec::new();
    let mut n = 0.0;
    for p in pts {
        if c.is_empty() {
            c = vec![0.0; p.len()];
        }
        c.iter_mut().zip(p).for_each(|(a, b)| *a += b);
        n += 1.0;
    }
    c.iter_mut().for_each(|a| *a /= n);
    c
}

/// Distance to the target, replaced by the cheaper bounding-ball lower bound
/// when the point is well outside the bounding ball.
struct Locator<'a> {
    target: &'a TargetSet,
    center: Vec<f64>,
    radius: f64,
}

impl<'a> Locator<'a> {
    fn new(target: &'a TargetSet) -> Self {
        let (center, radius) = target.bounding_ball();
        Self { target, center, radius }
    }

    fn distance(&self, x: &[f64]) -> f64 {
        let lb = dist(x, &self.center) - self.radius;
        if lb > self.radius {
            lb
        } else {
            self.target.distance(x)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitSettings {
    pub trials: u64,
    /// Smallest time step is `2^-step_levels`.
    pub step_levels: u32,
    /// Steps are `(distance / step_ratio)^2`, clamped to `[2^-step_levels, max_step]`.
    pub step_ratio: f64,
    pub max_step: f64,
    /// Escape radius around the target's bounding center (`d >= 3`); `None`
    /// selects `32 (diameter + start distance)`.
    pub escape_radius: Option<f64>,
}

impl Default for HitSettings {
    fn default() -> Self {
        Self { trials: 10_000, step_levels: 14, step_ratio: 8.0, max_step: 1e6, escape_radius: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitResult {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: u64,
    pub hits: u64,
    /// Upper bound on hits missed by stopping at the escape radius.
    pub truncation_bias_bound: f64,
    pub killed: Option<f64>,
    pub escape_radius: Option<f64>,
    pub mean_steps: f64,
}

impl HitResult {
    pub fn ci_width(&self) -> f64 {
        self.ci_high - self.ci_low
    }
}

enum Outcome {
    Hit,
    Miss,
}

struct Walker<'a> {
    start: &'a [f64],
    f: &'a DriftSpec,
    locator: Locator<'a>,
    lambda: Option<f64>,
    escape: Option<f64>,
    settings: HitSettings,
    f0: Vec<f64>,
}

impl Walker<'_> {
    /// One path; returns the outcome and the number of steps taken.
    fn run<R: Rng>(&self, rng: &mut R) -> Result<(Outcome, u64)> {
        let d = self.start.len();
        let h_min = (-(self.settings.step_levels as f64)).exp2();
        let mut x = self.start.to_vec();
        let mut dist_x = self.locator.distance(&x);
        if dist_x <= 0.0 {
            return Ok((Outcome::Hit, 0));
        }
        let horizon = match self.lambda {
            Some(l) => rng.sample(Exp::new(l).expect("validated rate")),
            None => f64::INFINITY,
        };
        let (drift_lo, drift_hi) = self.f.interval;
        let zero_drift = self.f.is_zero();
        let mut t = 0.0;
        let mut steps = 0u64;
        let mut fa = self.f0.clone();
        let mut fb = vec![0.0; d];
        let mut y = vec![0.0; d];
        loop {
            if t >= horizon {
                return Ok((Outcome::Miss, steps));
            }
            if let Some(r) = self.escape {
                if dist(&x, &self.locator.center) >= r {
                    return Ok((Outcome::Miss, steps));
                }
            }
            let mut h = (dist_x / self.settings.step_ratio).powi(2).clamp(h_min, self.settings.max_step);
            h = h.min(horizon - t).max(f64::MIN_POSITIVE);
            if !zero_drift {
                // keep the drift displacement of a step below half the distance
                loop {
                    if t + h + drift_lo > drift_hi {
                        return Err(Error::OutOfInterval { t: t + h, lo: drift_lo, hi: drift_hi });
                    }
                    self.f.increment_into(drift_lo + t + h, &self.f0, &mut fb);
                    let shift: f64 = fb.iter().zip(&fa).map(|(b, a)| (b - a).powi(2)).sum::<f64>().sqrt();
                    if shift <= 0.5 * dist_x.max(h.sqrt()) || h <= h_min {
                        break;
                    }
                    h *= 0.25;
                }
            }
            let sd = h.sqrt();
            for c in 0..d {
                let z: f64 = rng.sample(StandardNormal);
                y[c] = x[c] + sd * z + if zero_drift { 0.0 } else { fb[c] - fa[c] };
            }
            steps += 1;
            let dist_y = self.locator.distance(&y);
            if dist_y <= 0.0 {
                return Ok((Outcome::Hit, steps));
            }
            // a Brownian bridge between the two points crosses the nearest
            // tangent plane with probability exp(-2 a b / h)
            let p_cross = (-2.0 * dist_x * dist_y / h).exp();
            if p_cross > 1e-300 && rng.random::<f64>() < p_cross {
                return Ok((Outcome::Hit, steps));
            }
            t += h;
            std::mem::swap(&mut x, &mut y);
            if !zero_drift {
                std::mem::swap(&mut fa, &mut fb);
            }
            dist_x = dist_y;
        }
    }
}

/// Probability that `x + B_t + f(t) - f(0)` hits `target` before the
/// killing time (rate `lambda`) or, in `d >= 3`, before leaving the escape
/// ball. `d = 2` requires killing.
pub fn hit_prob(
    rng: RngStream,
    start: &[f64],
    f: &DriftSpec,
    target: &TargetSet,
    lambda: Option<f64>,
    settings: &HitSettings,
) -> Result<HitResult> {
    let d = start.len();
    target.validate()?;
    if d < 2 {
        return Err(Error::invalid("start", "dimension must be at least 2"));
    }
    if target.dim() != d || f.dim != d {
        return Err(Error::invalid("dim", "start, drift and target dimensions differ"));
    }
    if start.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("start", "non-finite coordinate"));
    }
    if let Some(l) = lambda {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::invalid("lambda", "killing rate must be positive"));
        }
    }
    if d == 2 && lambda.is_none() {
        return Err(Error::invalid("lambda", "planar motion is recurrent; a killing rate is required"));
    }
    if settings.trials == 0 {
        return Err(Error::invalid("trials", "must be positive"));
    }
    if !(settings.step_ratio >= 1.0) || !(settings.max_step > 0.0) {
        return Err(Error::invalid("settings", "step_ratio >= 1 and max_step > 0 required"));
    }
    if !f.contains(f.interval.0) {
        return Err(Error::invalid("drift", "empty interval"));
    }
    let (center, enclosing) = target.bounding_ball();
    let escape = if d >= 3 {
        let r = settings.escape_radius.unwrap_or(32.0 * (2.0 * enclosing + dist(start, &center)));
        if !(r > enclosing && r > dist(start, &center)) {
            return Err(Error::invalid("escape_radius", "must enclose both the target and the start"));
        }
        Some(r)
    } else {
        None
    };
    // after leaving radius R the chance of ever entering the enclosing ball
    // is (enclosing / R)^(d-2) for driftless motion
    let bias = escape.map(|r| (enclosing / r).powi(d as i32 - 2)).unwrap_or(0.0);
    let mut f0 = vec![0.0; d];
    f.eval_into(f.interval.0, &mut f0)?;
    let walker = Walker { start, f, locator: Locator::new(target), lambda, escape, settings: *settings, f0 };
    let blocks = settings.trials.div_ceil(TRIALS_PER_BLOCK);
    let results = par::map_range(blocks as usize, |b| -> Result<(u64, u64)> {
        let mut r = rng.child(b as u64).rng();
        let n = TRIALS_PER_BLOCK.min(settings.trials - b as u64 * TRIALS_PER_BLOCK);
        let (mut hits, mut steps) = (0, 0);
        for _ in 0..n {
            let (o, s) = walker.run(&mut r)?;
            steps += s;
            if let Outcome::Hit = o {
                hits += 1;
            }
        }
        Ok((hits, steps))
    });
    let (mut hits, mut steps) = (0u64, 0u64);
    for r in results {
        let (h, s) = r?;
        hits += h;
        steps += s;
    }
    let estimate = hits as f64 / settings.trials as f64;
    let (lo, hi) = wilson_interval(hits, settings.trials, Z95);
    Ok(HitResult {
        estimate,
        ci_low: lo.min(estimate),
        ci_high: hi.max(estimate),
        trials: settings.trials,
        hits,
        truncation_bias_bound: bias,
        killed: lambda,
        escape_radius: escape,
        mean_steps: steps as f64 / settings.trials as f64,
    })
}

/// `n` nearly uniform points on the sphere of radius `r` about `c`:
/// a Fibonacci lattice in `d = 3`, normalized Gaussians otherwise.
pub fn sphere_points(c: &[f64], r: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let d = c.len();
    if d == 3 {
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        return (0..n)
            .map(|i| {
                let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
                let rho = (1.0 - z * z).sqrt();
                let phi = golden * i as f64;
                vec![c[0] + r * rho * phi.cos(), c[1] + r * rho * phi.sin(), c[2] + r * z]
            })
            .collect();
    }
    let mut rng = RngStream::new(seed, 0x5348).rng();
    (0..n)
        .map(|_| {
            let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let s = norm(&g);
            c.iter().zip(&g).map(|(a, b)| a + r * b / s).collect()
        })
        .collect()
}

/// Points carrying the target's Martin capacity: sphere surfaces for balls
/// and shells (the sphere facing `x0`), the points themselves for dust.
pub fn surface_discretization(target: &TargetSet, x0: &[f64], n: usize) -> Result<PointSet> {
    let d = target.dim();
    let pts: Vec<Vec<f64>> = match target {
        TargetSet::Ball { center, radius } => sphere_points(center, *radius, n, 0),
        TargetSet::Shell { center, inner, outer } => {
            let r = if dist(x0, center) < *inner { *inner } else { *outer };
            sphere_points(center, r, n, 0)
        }
        TargetSet::Union { balls } => {
            let per = (n / balls.len()).max(1);
            let mut out = Vec::new();
            for (k, (c, r)) in balls.iter().enumerate() {
                for p in sphere_points(c, *r, per, k as u64) {
                    let inside_other =
                        balls.iter().enumerate().any(|(j, (c2, r2))| j != k && dist(&p, c2) < *r2);
                    if !inside_other {
                        out.push(p);
                    }
                }
            }
            out
        }
        TargetSet::Dust { points, .. } => points.clone(),
    };
    if pts.len() > MAX_SURFACE_POINTS {
        return Err(Error::BudgetExceeded(format!("{} support points exceed {MAX_SURFACE_POINTS}", pts.len())));
    }
    PointSet::new(d, pts.concat())
}

/// Five dust clusters in `R^3` at distance about one from the origin, in the
/// `+x`, `-x`, `+y`, `-z` and diagonal directions, with grids of 8, 8, 27, 4
/// and 64 points and hit radii shrinking with the cluster size.
pub fn reference_dust_targets() -> Vec<TargetSet> {
    let clusters: [([f64; 3], usize, f64); 5] = [
        ([1.0, 0.0, 0.0], 8, 0.15),
        ([-1.0, 0.0, 0.0], 8, 0.15),
        ([0.0, 1.2, 0.0], 27, 0.08),
        ([0.0, 0.0, -0.9], 4, 0.2),
        ([0.7, 0.7, 0.0], 64, 0.05),
    ];
    clusters
        .iter()
        .map(|(c, n, r)| {
            let side = (*n as f64).cbrt().round() as usize;
            let pts = (0..*n)
                .map(|k| {
                    let idx = [k % side, (k / side) % side, k / (side * side)];
                    (0..3).map(|a| c[a] + 0.25 * (idx[a] as f64 / side.max(2) as f64 - 0.5)).collect()
                })
                .collect();
            TargetSet::dust(pts, *r).expect("fixed clusters are valid")
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapacitySandwich {
    pub cap_martin: f64,
    pub cap_martin_coarse: f64,
    pub support_points: usize,
    pub hit: HitResult,
    pub ci_width: f64,
    pub bias: f64,
    pub discretization_allowance: f64,
    pub slack: f64,
    pub lower: f64,
    pub upper: f64,
    pub holds: bool,
}

/// Martin capacity of the target's discretization (with `x0` as reference
/// point) against the Monte Carlo hitting probability from `x0`, checking
/// `Cap/2 - slack <= P <= Cap + slack`. The discretization allowance is the
/// capacity change from `n/4` to `n` support points.
pub fn capacity_sandwich_check(
    rng: RngStream,
    target: &TargetSet,
    x0: &[f64],
    surface_points: usize,
    settings: &HitSettings,
) -> Result<CapacitySandwich> {
    let d = x0.len();
    if d < 3 {
        return Err(Error::invalid("x0", "the sandwich check needs d >= 3"));
    }
    let kernel = EnergyKernel::Martin(KernelSpec::martin_free(d, x0.to_vec())?);
    let solver = SolverSettings { tol: 1e-7, max_iter: 5000, ..Default::default() };
    let fine_set = surface_discretization(target, x0, surface_points)?;
    let fine = min_energy(&fine_set, &kernel, &solver)?;
    let coarse_set = surface_discretization(target, x0, (surface_points / 4).max(1))?;
    let coarse = min_energy(&coarse_set, &kernel, &solver)?;
    let hit = hit_prob(rng, x0, &DriftSpec::zero(d), target, None, settings)?;
    let ci_width = hit.ci_width();
    let bias = hit.truncation_bias_bound;
    let allowance = (fine.capacity - coarse.capacity).abs();
    let slack = ci_width + bias + allowance;
    let lower = fine.capacity / 2.0 - slack;
    let upper = fine.capacity + slack;
    Ok(CapacitySandwich {
        cap_martin: fine.capacity,
        cap_martin_coarse: coarse.capacity,
        support_points: fine_set.len(),
        holds: lower <= hit.estimate && hit.estimate <= upper,
        hit,
        ci_width,
        bias,
        discretization_allowance: allowance,
        slack,
        lower,
        upper,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecurrenceReport {
    pub n: f64,
    pub trials: u64,
    /// Empirical `P(T > 0)` and its Wilson interval.
    pub p_positive: f64,
    pub p_ci: (f64, f64),
    pub mean: f64,
    pub mean_stderr: f64,
    pub second_moment: f64,
    /// `(E T)^2 / E T^2`, the second-moment lower bound for `P(T > 0)`.
    pub second_moment_bound: f64,
}

/// Occupation time `T = int_n^{n^2} 1(|B_t + f(t)| <= 1) dt` of the unit
/// disk by planar `B + f` with `B_0 = w`. Steps are `((|x| - 1) / 4)^2`
/// outside the disk and `2^-step_levels` near and inside it, where the
/// occupation is accumulated by the trapezoid rule.
pub fn recurrence_statistic(
    rng: RngStream,
    f: &DriftSpec,
    w: &[f64],
    n: f64,
    trials: u64,
    step_levels: u32,
) -> Result<RecurrenceReport> {
    if w.len() != 2 || f.dim != 2 {
        return Err(Error::invalid("dim", "the recurrence statistic is planar"));
    }
    if !(n >= 2.0 && n >= norm(w).powi(2)) {
        return Err(Error::invalid("n", "need n >= max(2, |w|^2)"));
    }
    if trials == 0 {
        return Err(Error::invalid("trials", "must be positive"));
    }
    let t_end = n * n;
    if !f.contains(0.0) || !f.contains(t_end) {
        return Err(Error::OutOfInterval { t: t_end, lo: f.interval.0, hi: f.interval.1 });
    }
    let h_min = (-(step_levels as f64)).exp2();
    let blocks = trials.div_ceil(TRIALS_PER_BLOCK);
    let per_block = par::map_range(blocks as usize, |b| -> Result<Vec<f64>> {
        let mut r = rng.child(b as u64).rng();
        let count = TRIALS_PER_BLOCK.min(trials - b as u64 * TRIALS_PER_BLOCK);
        let mut out = Vec::with_capacity(count as usize);
        let mut fv = [0.0; 2];
        for _ in 0..count {
            // Brownian part at time n, drawn exactly
            let sd = n.sqrt();
            let mut bm = [w[0] + sd * r.sample::<f64, _>(StandardNormal), w[1] + sd * r.sample::<f64, _>(StandardNormal)];
            let mut t = n;
            f.eval_into(t, &mut fv)?;
            let mut inside_prev = norm(&[bm[0] + fv[0], bm[1] + fv[1]]) <= 1.0;
            let mut occ = CompensatedSum::default();
            while t < t_end {
                let radius = norm(&[bm[0] + fv[0], bm[1] + fv[1]]);
                let h = (((radius - 1.0) / 4.0).powi(2)).max(h_min).min(t_end - t);
                let s = h.sqrt();
                bm[0] += s * r.sample::<f64, _>(StandardNormal);
                bm[1] += s * r.sample::<f64, _>(StandardNormal);
                t += h;
                f.eval_into(t, &mut fv)?;
                let inside = norm(&[bm[0] + fv[0], bm[1] + fv[1]]) <= 1.0;
                occ.add(0.5 * h * (inside_prev as u8 + inside as u8) as f64);
                inside_prev = inside;
            }
            out.push(occ.value());
        }
        Ok(out)
    });
    let mut samples = Vec::with_capacity(trials as usize);
    for b in per_block {
        samples.extend(b?);
    }
    let positive = samples.iter().filter(|&&x| x > 0.0).count() as u64;
    let (mean, var) = mean_var(&samples);
    let second = samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64;
    let bound = if second > 0.0 { mean * mean / second } else { 0.0 };
    Ok(RecurrenceReport {
        n,
        trials,
        p_positive: positive as f64 / trials as f64,
        p_ci: wilson_interval(positive, trials, Z95),
        mean,
        mean_stderr: (var / samples.len() as f64).sqrt(),
        second_moment: second,
        second_moment_bound: bound,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsilonEstimate {
    pub epsilon: f64,
    pub estimate: f64,
    pub ci: (f64, f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InjectivityReport {
    pub depth: u32,
    pub trials: u64,
    pub first_points: usize,
    pub second_points: usize,
    pub estimates: Vec<EpsilonEstimate>,
    /// Median over trials of `min |B(s) - B(t)|`, `s` in the first set and
    /// `t` in the second.
    pub median_min_distance: f64,
}

/// Budget on `trials * (|first| + |second|)` sampled values.
pub const INJECTIVITY_BUDGET: u64 = 1 << 32;

/// One-dimensional `B` sampled exactly at the members of `first` and
/// `second`; reports the fraction of paths with
/// `min |B(s) - B(t)| < epsilon` for each `epsilon`.
pub fn injectivity_experiment_with(
    rng: RngStream,
    first: &DyadicSet,
    second: &DyadicSet,
    trials: u64,
    epsilons: &[f64],
) -> Result<InjectivityReport> {
    if first.depth > 16 || second.depth > 16 {
        return Err(Error::invalid("depth", "dyadic sets are limited to depth 16 here"));
    }
    if trials == 0 || epsilons.is_empty() || epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::invalid("epsilons", "need positive trials and epsilons"));
    }
    let a = first.enumerate();
    let b = second.enumerate();
    if trials.saturating_mul((a.len() + b.len()) as u64) > INJECTIVITY_BUDGET {
        return Err(Error::BudgetExceeded(format!("{trials} trials over {} times", a.len() + b.len())));
    }
    // merged time list with membership tags; coincident times keep both tags
    let mut times: Vec<(f64, u8)> = a.iter().map(|&t| (t, 0u8)).chain(b.iter().map(|&t| (t, 1u8))).collect();
    times.sort_by(|x, y| x.0.total_cmp(&y.0));
    let ts: Vec<f64> = times.iter().map(|x| x.0).collect();
    let dists = par::map_range(trials as usize, |i| -> Result<f64> {
        let path = brownian_at_times(rng.child(i as u64), &ts, 1)?;
        let mut va: Vec<f64> = Vec::with_capacity(a.len());
        let mut vb: Vec<f64> = Vec::with_capacity(b.len());
        for (k, &(_, tag)) in times.iter().enumerate() {
            if tag == 0 { va.push(path[k]) } else { vb.push(path[k]) }
        }
        va.sort_by(f64::total_cmp);
        vb.sort_by(f64::total_cmp);
        Ok(min_gap_sorted(&va, &vb))
    });
    let mut mins = Vec::with_capacity(trials as usize);
    for d in dists {
        mins.push(d?);
    }
    let estimates = epsilons
        .iter()
        .map(|&e| {
            let k = mins.iter().filter(|&&m| m < e).count() as u64;
            EpsilonEstimate { epsilon: e, estimate: k as f64 / trials as f64, ci: wilson_interval(k, trials, Z95) }
        })
        .collect();
    Ok(InjectivityReport {
        depth: first.depth.max(second.depth),
        trials,
        first_points: a.len(),
        second_points: b.len(),
        estimates,
        median_min_distance: crate::stats::median(&mins),
    })
}

/// The experiment on `A0` and `A1` at `depth` with
/// `epsilon in {2^-6, 2^-8, 2^-10}`.
pub fn injectivity_experiment(rng: RngStream, depth: u32, trials: u64) -> Result<InjectivityReport> {
    let a0 = build_dyadic_set(DyadicKind::A0, depth)?;
    let a1 = build_dyadic_set(DyadicKind::A1, depth)?;
    injectivity_experiment_with(rng, &a0, &a1, trials, &[2f64.powi(-6), 2f64.powi(-8), 2f64.powi(-10)])
}

/// Smallest `|x - y|` over `x` in `a`, `y` in `b`, both sorted.
pub fn min_gap_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut best = f64::INFINITY;
    while i < a.len() && j < b.len() {
        best = best.min((a[i] - b[j]).abs());
        if a[i] < b[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    best
}
