//! Closest approach between sampled paths, double-point and two-path
//! intersection scaling experiments, and the correlation function `r'` of
//! `B + X` (`X` a fractional Brownian motion) with its two inequalities.

use serde::{Deserialize, Serialize};

use crate::drifts::{sample_on_grid, DriftSpec};
use crate::error::{Error, Result};
use crate::par;
use crate::randpath::{brownian_sample, refine_bridge, PathSample, TimeGrid};
use crate::rng::RngStream;
use crate::stats::{linear_fit, median};

/// Below this many points per cloud the closest approach is brute force.
pub const BRUTE_FORCE_POINTS: usize = 1 << 12;

/// Points in `R^dim` tagged with their sampling times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedCloud {
    pub dim: usize,
    pub times: Vec<f64>,
    pub points: Vec<f64>,
}

impl TimedCloud {
    pub fn new(dim: usize, times: Vec<f64>, points: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.len() != times.len() * dim {
            return Err(Error::invalid("points", "need dim coordinates per time"));
        }
        if points.iter().chain(&times).any(|x| !x.is_finite()) {
            return Err(Error::invalid("points", "non-finite value"));
        }
        Ok(Self { dim, times, points })
    }

    /// `B + f` on the grid of `path`, restricted to times in `[lo, hi]`.
    pub fn from_path(path: &PathSample, f: &DriftSpec, lo: f64, hi: f64) -> Result<Self> {
        if f.dim != path.dim {
            return Err(Error::invalid("drift", "dimension differs from the path"));
        }
        let fv = sample_on_grid(f, &path.grid)?;
        let d = path.dim;
        let mut times = Vec::new();
        let mut points = Vec::new();
        for i in 0..path.len() {
            let t = path.time(i);
            if t >= lo && t <= hi {
                times.push(t);
                points.extend(path.point(i).iter().zip(&fv[i * d..(i + 1) * d]).map(|(b, f)| b + f));
            }
        }
        Self::new(d, times, points)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosestApproach {
    pub distance: f64,
    pub times: (f64, f64),
    pub indices: (usize, usize),
    /// Temporal separation enforced (zero for two distinct clouds).
    pub gap: f64,
    pub levels: Option<u32>,
}

/// Candidate pair ordered by distance, then by indices; the order makes the
/// reported minimizer independent of the scan order.
#[derive(Clone, Copy, PartialEq)]
struct Best {
    d2: f64,
    i: usize,
    j: usize,
}

impl Best {
    const NONE: Best = Best { d2: f64::INFINITY, i: usize::MAX, j: usize::MAX };

    fn better(self, other: Best) -> Best {
        if (other.d2, other.i, other.j) < (self.d2, self.i, self.j) {
            other
        } else {
            self
        }
    }
}

fn d2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct Problem<'a> {
    a: &'a TimedCloud,
    b: &'a TimedCloud,
    self_mode: bool,
    gap: f64,
}

impl Problem<'_> {
    fn admissible(&self, i: usize, j: usize) -> bool {
        if self.self_mode {
            i < j && (self.a.times[i] - self.a.times[j]).abs() >= self.gap
        } else {
            true
        }
    }

    fn pair(&self, i: usize, j: usize) -> Best {
        Best { d2: d2(self.a.point(i), self.b.point(j)), i, j }
    }

    fn brute(&self, ia: &[usize], jb: &[usize]) -> Best {
        let parts = par::map_chunks(ia.len(), 64, |range| {
            let mut best = Best::NONE;
            for &i in &ia[range] {
                for &j in jb {
                    if self.admissible(i, j) {
                        best = best.better(self.pair(i, j));
                    }
                }
            }
            best
        });
        parts.into_iter().fold(Best::NONE, Best::better)
    }
}

const LEAF: usize = 32;

/// Binary tree over contiguous index ranges with axis-aligned bounding boxes
/// and time ranges. Sampled paths are spatially coherent along their index,
/// so the boxes are tight.
struct Tree {
    dim: usize,
    lo: Vec<usize>,
    hi: Vec<usize>,
    boxes: Vec<f64>,
    trange: Vec<(f64, f64)>,
    children: Vec<Option<(usize, usize)>>,
}

impl Tree {
    fn build(c: &TimedCloud) -> Tree {
        let mut t = Tree { dim: c.dim, lo: vec![], hi: vec![], boxes: vec![], trange: vec![], children: vec![] };
        t.node(c, 0, c.len());
        t
    }

    fn node(&mut self, c: &TimedCloud, lo: usize, hi: usize) -> usize {
        let id = self.lo.len();
        self.lo.push(lo);
        self.hi.push(hi);
        self.children.push(None);
        let d = self.dim;
        let mut bx = vec![f64::INFINITY; d];
        bx.extend(std::iter::repeat(f64::NEG_INFINITY).take(d));
        let (mut t0, mut t1) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in lo..hi {
            for (k, &x) in c.point(i).iter().enumerate() {
                bx[k] = bx[k].min(x);
                bx[d + k] = bx[d + k].max(x);
            }
            t0 = t0.min(c.times[i]);
            t1 = t1.max(c.times[i]);
        }
        self.boxes.extend(bx);
        self.trange.push((t0, t1));
        if hi - lo > LEAF {
            let mid = lo + (hi - lo) / 2;
            let l = self.node(c, lo, mid);
            let r = self.node(c, mid, hi);
            self.children[id] = Some((l, r));
        }
        id
    }

    fn bbox(&self, n: usize) -> &[f64] {
        &self.boxes[2 * self.dim * n..2 * self.dim * (n + 1)]
    }
}

fn box_d2(ta: &Tree, na: usize, tb: &Tree, nb: usize) -> f64 {
    let d = ta.dim;
    let (a, b) = (ta.bbox(na), tb.bbox(nb));
    (0..d)
        .map(|k| {
            let g = (a[k] - b[d + k]).max(b[k] - a[d + k]).max(0.0);
            g * g
        })
        .sum()
}

struct Search<'a> {
    p: &'a Problem<'a>,
    ta: &'a Tree,
    tb: &'a Tree,
}

impl Search<'_> {
    fn hopeless(&self, na: usize, nb: usize) -> bool {
        if !self.p.self_mode {
            return false;
        }
        if self.ta.lo[na] + 1 >= self.tb.hi[nb] {
            return true;
        }
        let (a0, a1) = self.ta.trange[na];
        let (b0, b1) = self.tb.trange[nb];
        (a1 - b0).abs().max((b1 - a0).abs()) < self.p.gap
    }

    fn leaf_pairs(&self, na: usize, nb: usize, best: &mut Best) {
        for i in self.ta.lo[na]..self.ta.hi[na] {
            for j in self.tb.lo[nb]..self.tb.hi[nb] {
                if self.p.admissible(i, j) {
                    let cand = self.p.pair(i, j);
                    if cand.d2 <= best.d2 {
                        *best = best.better(cand);
                    }
                }
            }
        }
    }

    fn split(&self, na: usize, nb: usize) -> Option<[(usize, usize); 2]> {
        let size = |t: &Tree, n: usize| t.hi[n] - t.lo[n];
        match (self.ta.children[na], self.tb.children[nb]) {
            (None, None) => None,
            (Some((l, r)), None) => Some([(l, nb), (r, nb)]),
            (None, Some((l, r))) => Some([(na, l), (na, r)]),
            (Some((al, ar)), Some((bl, br))) => {
                if size(self.ta, na) >= size(self.tb, nb) {
                    Some([(al, nb), (ar, nb)])
                } else {
                    Some([(na, bl), (na, br)])
                }
            }
        }
    }

    fn run(&self, na: usize, nb: usize, best: &mut Best) {
        if self.hopeless(na, nb) || box_d2(self.ta, na, self.tb, nb) > best.d2 {
            return;
        }
        match self.split(na, nb) {
            None => self.leaf_pairs(na, nb, best),
            Some(mut kids) => {
                let key = |&(x, y): &(usize, usize)| box_d2(self.ta, x, self.tb, y);
                if key(&kids[1]) < key(&kids[0]) {
                    kids.swap(0, 1);
                }
                for (x, y) in kids {
                    self.run(x, y, best);
                }
            }
        }
    }

    /// Expands the root pair into independent sub-problems for the workers.
    fn frontier(&self, target: usize) -> Vec<(usize, usize)> {
        let mut front = vec![(0, 0)];
        loop {
            let mut next = Vec::with_capacity(2 * front.len());
            let mut grew = false;
            for &(x, y) in &front {
                if self.hopeless(x, y) {
                    continue;
                }
                match self.split(x, y) {
                    Some(kids) => {
                        next.extend(kids);
                        grew = true;
                    }
                    None => next.push((x, y)),
                }
            }
            front = next;
            if !grew || front.len() >= target {
                return front;
            }
        }
    }
}

fn subsample_bound(p: &Problem) -> Best {
    let stride = (p.a.len().max(p.b.len()) / 512).max(1);
    let ia: Vec<usize> = (0..p.a.len()).step_by(stride).collect();
    let jb: Vec<usize> = (0..p.b.len()).step_by(stride).collect();
    p.brute(&ia, &jb)
}

fn tree_search(p: &Problem, ta: &Tree, tb: &Tree, init: Best) -> Best {
    let s = Search { p, ta, tb };
    let front = s.frontier(256);
    par::map_slice(&front, |&(x, y)| {
        let mut best = init;
        s.run(x, y, &mut best);
        best
    })
    .into_iter()
    .fold(init, Best::better)
}

/// Exact minimum distance between `a` and `b`, or within `a` over pairs at
/// least `gap` apart in time when `b` is `None`. Small inputs are brute
/// force. Larger ones take an upper bound from a subsample and then run a
/// branch and bound over bounding boxes of contiguous index blocks; a block
/// pair is discarded only when its box distance strictly exceeds the best
/// pair found, so ties resolve to the smallest indices. `cell`, when given,
/// seeds the search bound; if no admissible pair lies within it the search
/// is repeated without it.
pub fn closest_approach(a: &TimedCloud, b: Option<&TimedCloud>, gap: f64, cell: Option<f64>) -> Result<ClosestApproach> {
    if let Some(h) = cell {
        if !(h > 0.0) {
            return Err(Error::invalid("cell", "must be positive"));
        }
    }
    let self_mode = b.is_none();
    let b = b.unwrap_or(a);
    if a.dim != b.dim {
        return Err(Error::invalid("dim", "clouds differ in dimension"));
    }
    if self_mode && !(gap > 0.0) {
        return Err(Error::invalid("gap", "self comparison needs a positive time gap"));
    }
    let p = Problem { a, b, self_mode, gap: if self_mode { gap } else { 0.0 } };
    let best = if a.len().max(b.len()) < BRUTE_FORCE_POINTS {
        let all_a: Vec<usize> = (0..a.len()).collect();
        let all_b: Vec<usize> = (0..b.len()).collect();
        p.brute(&all_a, &all_b)
    } else {
        let ta = Tree::build(a);
        let tb = if self_mode { None } else { Some(Tree::build(b)) };
        let tb = tb.as_ref().unwrap_or(&ta);
        let seed = subsample_bound(&p);
        let hinted = match cell {
            Some(h) if h * h < seed.d2 => Best { d2: h * h, i: usize::MAX, j: usize::MAX },
            _ => seed,
        };
        let best = tree_search(&p, &ta, tb, hinted);
        if best.i == usize::MAX {
            tree_search(&p, &ta, tb, seed)
        } else {
            best
        }
    };
    if best.i == usize::MAX {
        return Err(Error::invalid("clouds", "no admissible pair"));
    }
    Ok(ClosestApproach {
        distance: best.d2.sqrt(),
        times: (a.times[best.i], b.times[best.j]),
        indices: (best.i, best.j),
        gap: p.gap,
        levels: None,
    })
}

/// Brute-force closest approach, used as an oracle.
pub fn closest_approach_brute(a: &TimedCloud, b: Option<&TimedCloud>, gap: f64) -> Result<ClosestApproach> {
    let self_mode = b.is_none();
    let b = b.unwrap_or(a);
    let p = Problem { a, b, self_mode, gap: if self_mode { gap } else { 0.0 } };
    let mut best = Best::NONE;
    for i in 0..a.len() {
        for j in 0..b.len() {
            if p.admissible(i, j) {
                best = best.better(p.pair(i, j));
            }
        }
    }
    if best.i == usize::MAX {
        return Err(Error::invalid("clouds", "no admissible pair"));
    }
    Ok(ClosestApproach {
        distance: best.d2.sqrt(),
        times: (a.times[best.i], b.times[best.j]),
        indices: (best.i, best.j),
        gap: p.gap,
        levels: None,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingReport {
    pub dim: usize,
    pub levels: Vec<u32>,
    /// `distances[s][k]`: seed `s`, level `levels[k]`.
    pub distances: Vec<Vec<f64>>,
    pub median_distance: Vec<f64>,
    /// Slope of `log2(median distance)` against level.
    pub exponent: f64,
    pub seed_exponents: Vec<f64>,
    /// Per level, the fraction of seeds whose distance is below the spatial
    /// resolution `2^{-level/2}`.
    pub close_fraction: Vec<f64>,
}

impl ScalingReport {
    /// Fraction of seeds whose own exponent satisfies `pred`.
    pub fn fraction(&self, pred: impl Fn(f64) -> bool) -> f64 {
        self.seed_exponents.iter().filter(|&&e| pred(e)).count() as f64 / self.seed_exponents.len() as f64
    }

    /// One row per level: level, median distance, close fraction, then one
    /// column per seed.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["level".to_string(), "median".to_string(), "close_fraction".to_string()];
        header.extend((0..self.distances.len()).map(|s| format!("seed{s}")));
        w.write_record(&header)?;
        for (k, l) in self.levels.iter().enumerate() {
            let mut row = vec![l.to_string(), self.median_distance[k].to_string(), self.close_fraction[k].to_string()];
            row.extend(self.distances.iter().map(|r| r[k].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn log2_slope(levels: &[u32], dists: &[f64]) -> f64 {
    let xs: Vec<f64> = levels.iter().map(|&l| l as f64).collect();
    let ys: Vec<f64> = dists.iter().map(|d| d.max(1e-300).log2()).collect();
    linear_fit(&xs, &ys).map(|f| f.slope).unwrap_or(f64::NAN)
}

fn check_levels(level_lo: u32, level_hi: u32) -> Result<Vec<u32>> {
    if level_hi < level_lo + 3 {
        return Err(Error::invalid("levels", "the level range must span at least 4 levels"));
    }
    Ok((level_lo..=level_hi).collect())
}

fn summarize(dim: usize, levels: Vec<u32>, distances: Vec<Vec<f64>>) -> ScalingReport {
    let median_distance: Vec<f64> = (0..levels.len())
        .map(|k| median(&distances.iter().map(|row| row[k]).collect::<Vec<_>>()))
        .collect();
    let exponent = log2_slope(&levels, &median_distance);
    let seed_exponents = distances.iter().map(|row| log2_slope(&levels, row)).collect();
    let close_fraction = levels
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            let res = (-(l as f64) / 2.0).exp2();
            distances.iter().filter(|row| row[k] <= res).count() as f64 / distances.len() as f64
        })
        .collect();
    ScalingReport { dim, levels, distances, median_distance, exponent, seed_exponents, close_fraction }
}

/// Closest approach of `B + f` on `[0, 1]` to itself over time pairs at
/// least `delta` apart, on nested bridge refinements of one path per seed,
/// for every level in `[level_lo, level_hi]`. Seed `s` uses stream
/// `rng.child(s)`.
pub fn doublepoint_scaling(
    rng: RngStream,
    d: usize,
    f: &DriftSpec,
    delta: f64,
    level_lo: u32,
    level_hi: u32,
    seeds: usize,
) -> Result<ScalingReport> {
    let levels = check_levels(level_lo, level_hi)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", "must lie in (0, 1)"));
    }
    if f.dim != d || seeds == 0 {
        return Err(Error::invalid("drift", "drift dimension must equal d and seeds must be positive"));
    }
    let distances = par::map_range(seeds, |s| -> Result<Vec<f64>> {
        let stream = rng.child(s as u64);
        let mut path = brownian_sample(stream.child(0), TimeGrid::unit(level_lo)?, d)?;
        let mut row = Vec::with_capacity(levels.len());
        for (k, &l) in levels.iter().enumerate() {
            if k > 0 {
                path = refine_bridge(stream.child(l as u64), &path)?;
            }
            let x = TimedCloud::from_path(&path, f, 0.0, 1.0)?;
            row.push(closest_approach(&x, None, delta, None)?.distance);
        }
        Ok(row)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(summarize(d, levels, distances))
}

/// Closest approach between `x1 + B1 + f1` and `x2 + B2 + f2` on `[0, 1]`
/// for independent nested paths.
pub fn two_path_intersection(
    rng: RngStream,
    d: usize,
    f1: &DriftSpec,
    f2: &DriftSpec,
    starts: (&[f64], &[f64]),
    level_lo: u32,
    level_hi: u32,
    seeds: usize,
) -> Result<ScalingReport> {
    let levels = check_levels(level_lo, level_hi)?;
    if f1.dim != d || f2.dim != d || starts.0.len() != d || starts.1.len() != d || seeds == 0 {
        return Err(Error::invalid("dim", "drifts and starts must have dimension d; seeds > 0"));
    }
    let shift = |c: TimedCloud, x: &[f64]| -> TimedCloud {
        let mut c = c;
        for (k, v) in c.points.iter_mut().enumerate() {
            *v += x[k % d];
        }
        c
    };
    let distances = par::map_range(seeds, |s| -> Result<Vec<f64>> {
        let stream = rng.child(s as u64);
        let mut p1 = brownian_sample(stream.child(0), TimeGrid::unit(level_lo)?, d)?;
        let mut p2 = brownian_sample(stream.child(1), TimeGrid::unit(level_lo)?, d)?;
        let mut row = Vec::with_capacity(levels.len());
        for (k, &l) in levels.iter().enumerate() {
            if k > 0 {
                p1 = refine_bridge(stream.child(2 * l as u64), &p1)?;
                p2 = refine_bridge(stream.child(2 * l as u64 + 1), &p2)?;
            }
            let c1 = shift(TimedCloud::from_path(&p1, f1, 0.0, 1.0)?, starts.0);
            let c2 = shift(TimedCloud::from_path(&p2, f2, 0.0, 1.0)?, starts.1);
            row.push(closest_approach(&c1, Some(&c2), 0.0, None)?.distance);
        }
        Ok(row)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(summarize(d, levels, distances))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RPrimeConfig {
    pub s: f64,
    pub t: f64,
    pub u: f64,
    pub v: f64,
    pub alpha: f64,
}

/// Correlation function of the increments of `B + X` over `[s, t]` and
/// `[u, v]`, normalized by `(|s-t|^a + |s-t|^{1/2}) (|u-v|^a + |u-v|^{1/2})`.
pub fn r_prime(c: &RPrimeConfig) -> Result<f64> {
    if c.s == c.t || c.u == c.v {
        return Err(Error::Singular("r' needs s != t and u != v".into()));
    }
    if !(c.alpha > 0.0 && c.alpha < 1.0) {
        return Err(Error::invalid("alpha", "Hurst index must lie in (0, 1)"));
    }
    let a2 = 2.0 * c.alpha;
    let term = |x: f64, y: f64| {
        let h = (x - y).abs();
        h.powf(a2) + h
    };
    let num = term(c.t, c.u) + term(c.s, c.v) - term(c.s, c.u) - term(c.t, c.v);
    let scale = |h: f64| h.powf(c.alpha) + h.sqrt();
    Ok(num / (2.0 * scale((c.s - c.t).abs()) * scale((c.u - c.v).abs())))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparatedScan {
    pub l: f64,
    pub max_abs: f64,
    /// `alpha |1 - 2 alpha| (a + 4 delta)^2 L^{2 alpha - 2} / (a^alpha + a^{1/2})^2`.
    pub bound: f64,
    pub points: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RPrimeReport {
    pub alpha: f64,
    pub a: f64,
    pub delta: f64,
    pub separated: Vec<SeparatedScan>,
    pub separated_decreasing: bool,
    /// Minimum of `(1 - r') a^{2 alpha} / (|s-u|^{2 alpha} + |t-v|^{2 alpha})`.
    pub clustered_min_ratio: f64,
    pub clustered_argmin: RPrimeConfig,
    pub clustered_points: usize,
    pub clustered_violations: usize,
}

/// Scans both configuration families. Separated: `s = 0`,
/// `|s - t|, |u - v|` over `[a, a + 4 delta]`, the second interval placed
/// on either side with gap `L` to `L + 4 delta`. Clustered (rescaled to
/// `a = 1`, `s = 0`, `t = 1`, `v = 1 + gamma`): `gamma in (0, delta / a]`,
/// `u in [-2 delta / a, gamma)`.
pub fn verify_rprime_inequalities(alpha: f64, a: f64, delta: f64, ls: &[f64], resolution: usize) -> Result<RPrimeReport> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::invalid("alpha", "the inequalities are checked for 0 < alpha < 1/2"));
    }
    if !(a > 0.0 && delta > 0.0) || resolution < 2 {
        return Err(Error::invalid("grid", "need a > 0, delta > 0 and resolution >= 2"));
    }
    if 2.0 * delta >= a {
        // clustered endpoints within 2 delta would no longer keep the intervals a apart
        return Err(Error::invalid("delta", "clustered configurations need 2 delta < a"));
    }
    if ls.iter().any(|&l| !(l > 0.0)) || ls.is_empty() {
        return Err(Error::invalid("L", "separations must be positive"));
    }
    let steps: Vec<f64> = (0..resolution).map(|k| k as f64 / (resolution - 1) as f64).collect();
    let mut separated = Vec::with_capacity(ls.len());
    for &l in ls {
        let bound = alpha * (1.0 - 2.0 * alpha).abs() * (a + 4.0 * delta).powi(2) * l.powf(2.0 * alpha - 2.0)
            / (a.powf(alpha) + a.sqrt()).powi(2);
        let mut max_abs: f64 = 0.0;
        let mut points = 0;
        let mut violations = 0;
        for &x in &steps {
            let t = a + 4.0 * delta * x;
            for &y in &steps {
                let len2 = a + 4.0 * delta * y;
                for &z in &steps {
                    let g = l + 4.0 * delta * z;
                    for (u, v) in [(t + g, t + g + len2), (-g - len2, -g)] {
                        let r = r_prime(&RPrimeConfig { s: 0.0, t, u, v, alpha })?;
                        points += 1;
                        max_abs = max_abs.max(r.abs());
                        if r.abs() > bound * (1.0 + 1e-9) + 1e-15 {
                            violations += 1;
                        }
                    }
                }
            }
        }
        separated.push(SeparatedScan { l, max_abs, bound, points, violations });
    }
    let mut sorted = separated.clone();
    sorted.sort_by(|p, q| p.l.total_cmp(&q.l));
    let separated_decreasing = sorted.windows(2).all(|w| w[1].max_abs < w[0].max_abs);

    let mut min_ratio = f64::INFINITY;
    let mut argmin = RPrimeConfig { s: 0.0, t: 1.0, u: 0.0, v: 1.0, alpha };
    let mut clustered_points = 0;
    let mut clustered_violations = 0;
    let dn = delta / a;
    for k in 1..=resolution {
        let gamma = dn * k as f64 / resolution as f64;
        for m in 0..resolution {
            let u = -2.0 * dn + (gamma + 2.0 * dn) * m as f64 / resolution as f64;
            let cfg = RPrimeConfig { s: 0.0, t: 1.0, u, v: 1.0 + gamma, alpha };
            let r = r_prime(&cfg)?;
            let denom = u.abs().powf(2.0 * alpha) + gamma.powf(2.0 * alpha);
            let ratio = (1.0 - r) / denom;
            clustered_points += 1;
            if !(ratio > 0.0) || !ratio.is_finite() {
                clustered_violations += 1;
            }
            if ratio < min_ratio {
                min_ratio = ratio;
                argmin = cfg;
            }
        }
    }
    Ok(RPrimeReport {
        alpha,
        a,
        delta,
        separated,
        separated_decreasing,
        clustered_min_ratio: min_ratio,
        clustered_argmin: argmin,
        clustered_points,
        clustered_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r_prime_unit_config() {
        for alpha in [0.1, 0.3, 0.5, 0.7] {
            let r = r_prime(&RPrimeConfig { s: 0.0, t: 1.0, u: 0.0, v: 1.0, alpha }).unwrap();
            assert_eq!(r, 0.5);
        }
    }

    #[test]
    fn r_prime_rejects_degenerate_intervals() {
        assert!(r_prime(&RPrimeConfig { s: 1.0, t: 1.0, u: 0.0, v: 1.0, alpha: 0.3 }).is_err());
    }

    #[test]
    fn far_intervals_decorrelate() {
        let r = r_prime(&RPrimeConfig { s: 0.0, t: 1.0, u: 100.0, v: 101.0, alpha: 0.3 }).unwrap();
        assert!(r.abs() < 0.01);
    }

    #[test]
    fn brute_and_tree_agree_on_a_line() {
        let n = 5000;
        let times: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let pts: Vec<f64> = (0..n).flat_map(|i| [i as f64 * 0.01, ((i * 7919) % 1000) as f64 * 1e-3]).collect();
        let c = TimedCloud::new(2, times, pts).unwrap();
        let fast = closest_approach(&c, None, 10.0, None).unwrap();
        let slow = closest_approach_brute(&c, None, 10.0).unwrap();
        assert_eq!(fast, slow);
    }
}
