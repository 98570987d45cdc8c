//! Box-counting dimension of sampled images and graphs, time subsets, and the
//! dyadic digit-restricted sets `A0`, `A1`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::capacity::PointSet;
use crate::drifts::{sample_on_grid, DriftSpec};
use crate::error::{Error, Result};
use crate::par;
use crate::randpath::{brownian_sample, PathSample, TimeGrid};
use crate::rng::RngStream;
use crate::stats::linear_fit;

/// Below this many points a [`DimEstimate`] carries a warning.
pub const MIN_RELIABLE_POINTS: usize = 1 << 10;
/// Levels with more occupied boxes than `points / SATURATION_DIVISOR` are dropped.
pub const SATURATION_DIVISOR: usize = 10;
/// Minimum number of levels in a regression window.
pub const MIN_WINDOW: usize = 4;
/// Largest depth [`build_dyadic_set`] accepts.
pub const MAX_DYADIC_DEPTH: u32 = 24;
/// Largest number of pairs [`sumset_cover_check`] enumerates.
pub const SUMSET_PAIR_BUDGET: u64 = 1 << 26;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CloudKind {
    Image,
    Graph,
    Set,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: CloudKind,
    pub source: String,
}

/// A finite nonempty point cloud with a record of where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub dim: usize,
    pub points: Vec<f64>,
    pub provenance: Provenance,
}

impl PointCloud {
    pub fn new(dim: usize, points: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if dim == 0 || points.is_empty() || points.len() % dim != 0 {
            return Err(Error::invalid("points", "need a nonempty multiple of dim >= 1 coordinates"));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("points", "non-finite coordinate"));
        }
        Ok(Self { dim, points, provenance })
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_point_set(&self) -> PointSet {
        PointSet { dim: self.dim, coords: self.points.clone() }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
        for i in 0..self.len() {
            w.write_record(self.point(i).iter().map(|x| format!("{x:e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>, provenance: Provenance) -> Result<Self> {
        let set = PointSet::from_csv(path)?;
        Self::new(set.dim, set.coords, provenance)
    }
}

/// Regression-based dimension estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimEstimate {
    pub value: f64,
    pub stderr: f64,
    /// Inclusive level window used in the fit.
    pub window: (u32, u32),
    pub r_squared: f64,
    pub method: String,
    /// `(level, occupied boxes)` for every level examined.
    pub counts: Vec<(u32, u64)>,
    pub points: usize,
    pub warning: Option<String>,
}

/// Number of occupied boxes of side `2^-level`, minimized over
/// [`GRID_OFFSETS`] shifted grids anchored at the cloud's lower corner.
pub fn box_count(cloud: &PointCloud, level: u32) -> Result<u64> {
    let (lo, _) = bounds(cloud);
    count_level(cloud, &lo, level)
}

fn bounds(cloud: &PointCloud) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![f64::INFINITY; cloud.dim];
    let mut hi = vec![f64::NEG_INFINITY; cloud.dim];
    for i in 0..cloud.len() {
        for (c, &x) in cloud.point(i).iter().enumerate() {
            lo[c] = lo[c].min(x);
            hi[c] = hi[c].max(x);
        }
    }
    (lo, hi)
}

/// Grid offsets tried at every level, as fractions of the box side.
pub const GRID_OFFSETS: usize = 4;

fn count_level(cloud: &PointCloud, lo: &[f64], level: u32) -> Result<u64> {
    let mut best = u64::MAX;
    for j in 0..GRID_OFFSETS {
        best = best.min(count_level_shifted(cloud, lo, level, j)?);
    }
    Ok(best)
}

/// Offset `j` shifts axis `c` by the fractional part of `j * phi^(c+1) / GRID_OFFSETS`
/// box sides (`j = 0` is the aligned grid).
fn count_level_shifted(cloud: &PointCloud, lo: &[f64], level: u32, j: usize) -> Result<u64> {
    const PHI: f64 = 1.618_033_988_749_895;
    let dim = cloud.dim;
    let scale = (level as f64).exp2();
    let shift: Vec<f64> = (0..dim).map(|c| (j as f64 * PHI.powi(c as i32 + 1) / GRID_OFFSETS as f64).fract()).collect();
    let bits = (128 / dim as u32).min(64);
    let limit = if bits >= 64 { u64::MAX } else { (1u64 << bits) - 1 };
    let mut keys: Vec<u128> = Vec::with_capacity(cloud.len());
    for i in 0..cloud.len() {
        let mut key: u128 = 0;
        for (c, &x) in cloud.point(i).iter().enumerate() {
            let idx = ((x - lo[c]) * scale + shift[c]).floor();
            if idx >= limit as f64 {
                return Err(Error::invalid("level", format!("level {level} too fine for a {dim}-dimensional cloud of this extent")));
            }
            key = (key << bits) | idx as u128;
        }
        keys.push(key);
    }
    keys.sort_unstable();
    keys.dedup();
    Ok(keys.len() as u64)
}

/// Minkowski-dimension proxy: slope of `log2 N(2^-k)` against `k` over the
/// levels in `[level_min, level_max]` that are not saturated
/// (`N <= points / 10`). Fails when fewer than four levels remain.
pub fn boxcount_dim(cloud: &PointCloud, level_min: u32, level_max: u32) -> Result<DimEstimate> {
    if level_max < level_min {
        return Err(Error::invalid("levels", "level_max < level_min"));
    }
    let (lo, _) = bounds(cloud);
    let levels: Vec<u32> = (level_min..=level_max).collect();
    let counts = par::map_slice(&levels, |&k| count_level(cloud, &lo, k));
    let mut table = Vec::with_capacity(levels.len());
    for (k, c) in levels.iter().zip(counts) {
        table.push((*k, c?));
    }
    let n = cloud.len();
    let cap = (n / SATURATION_DIVISOR) as u64;
    let kept: Vec<(u32, u64)> = table.iter().cloned().filter(|&(_, c)| c <= cap).collect();
    if kept.len() < MIN_WINDOW {
        return Err(Error::EmptyWindow(format!(
            "{} unsaturated levels in [{level_min}, {level_max}] for {n} points; need {MIN_WINDOW}",
            kept.len()
        )));
    }
    let xs: Vec<f64> = kept.iter().map(|&(k, _)| k as f64).collect();
    let ys: Vec<f64> = kept.iter().map(|&(_, c)| (c as f64).log2()).collect();
    let fit = linear_fit(&xs, &ys).ok_or_else(|| Error::Singular("degenerate box-count regression".into()))?;
    let warning = (n < MIN_RELIABLE_POINTS).then(|| format!("only {n} points; estimates below {MIN_RELIABLE_POINTS} points are unreliable"));
    Ok(DimEstimate {
        value: fit.slope.max(0.0),
        stderr: fit.slope_stderr,
        window: (kept[0].0, kept[kept.len() - 1].0),
        r_squared: fit.r_squared,
        method: "minkowski-proxy".into(),
        counts: table,
        points: n,
        warning,
    })
}

/// Dyadic digit-restricted subset of `offset + [0, 1]`: numbers whose binary
/// digits at the forced positions vanish, truncated at `depth` digits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicSet {
    pub depth: u32,
    /// Inclusive digit-position ranges `(lo, hi)` within `[1, depth]`.
    pub forced_zero_ranges: Vec<(u32, u32)>,
    pub offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DyadicKind {
    A0,
    A1,
}

fn factorial(n: u32) -> u64 {
    (1..=n as u64).product()
}

/// `A0` forces digits in `((2k)!, (2k+1)!]` to zero; `A1` forces
/// `((2k-1)!, (2k)!]` and sits at offset 2.
pub fn build_dyadic_set(which: DyadicKind, depth: u32) -> Result<DyadicSet> {
    if depth == 0 || depth > MAX_DYADIC_DEPTH {
        return Err(Error::invalid("depth", format!("{depth} outside [1, {MAX_DYADIC_DEPTH}]")));
    }
    let mut ranges = Vec::new();
    let mut k = 1;
    loop {
        let (a, b) = match which {
            DyadicKind::A0 => (factorial(2 * k), factorial(2 * k + 1)),
            DyadicKind::A1 => (factorial(2 * k - 1), factorial(2 * k)),
        };
        if a >= depth as u64 {
            break;
        }
        ranges.push((a as u32 + 1, b.min(depth as u64) as u32));
        k += 1;
    }
    let offset = match which {
        DyadicKind::A0 => 0.0,
        DyadicKind::A1 => 2.0,
    };
    Ok(DyadicSet { depth, forced_zero_ranges: ranges, offset })
}

impl DyadicSet {
    pub fn new(depth: u32, forced_zero_ranges: Vec<(u32, u32)>, offset: f64) -> Result<Self> {
        if depth == 0 || depth > 62 {
            return Err(Error::invalid("depth", "must lie in [1, 62]"));
        }
        if forced_zero_ranges.iter().any(|&(a, b)| a == 0 || a > b || b > depth) {
            return Err(Error::invalid("forced_zero_ranges", "ranges must lie within [1, depth]"));
        }
        Ok(Self { depth, forced_zero_ranges, offset })
    }

    pub fn is_forced(&self, position: u32) -> bool {
        self.forced_zero_ranges.iter().any(|&(a, b)| (a..=b).contains(&position))
    }

    /// Free digit positions in increasing order.
    pub fn free_positions(&self) -> Vec<u32> {
        (1..=self.depth).filter(|&p| !self.is_forced(p)).collect()
    }

    pub fn len(&self) -> usize {
        1usize << self.free_positions().len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Members as numerators over `2^depth`, offset excluded, ascending.
    pub fn numerators(&self) -> Vec<u64> {
        let free = self.free_positions();
        let mut out: Vec<u64> = (0..1u64 << free.len())
            .map(|mask| {
                free.iter()
                    .enumerate()
                    .filter(|(j, _)| mask >> j & 1 == 1)
                    .map(|(_, &p)| 1u64 << (self.depth - p))
                    .sum()
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Members as reals `offset + numerator / 2^depth` (exact in `f64`).
    pub fn enumerate(&self) -> Vec<f64> {
        let scale = (-(self.depth as f64)).exp2();
        self.numerators().into_iter().map(|m| self.offset + m as f64 * scale).collect()
    }

    /// Number of dyadic intervals of length `2^-level` meeting the set,
    /// i.e. the number of distinct length-`level` digit prefixes.
    pub fn covering_count(&self, level: u32) -> u64 {
        let l = level.min(self.depth);
        1u64 << (1..=l).filter(|&p| !self.is_forced(p)).count()
    }

    /// Whether `t` lies in the union of closed cells `[x, x + 2^-depth]` over
    /// members `x`.
    pub fn contains(&self, t: f64) -> bool {
        let u = t - self.offset;
        if !(0.0..=1.0).contains(&u) {
            return false;
        }
        let scale = (self.depth as f64).exp2();
        let cell = (u * scale).floor();
        let at_left_edge = u * scale == cell;
        let member = |c: f64| -> bool {
            if c < 0.0 || c >= scale {
                return false;
            }
            let m = c as u64;
            (1..=self.depth).all(|p| !self.is_forced(p) || m >> (self.depth - p) & 1 == 0)
        };
        member(cell) || (at_left_edge && member(cell - 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumsetReport {
    pub covered: bool,
    pub missing_count: u64,
    pub target_count: u64,
    pub pairs: u64,
}

/// Whether `a + b` attains every dyadic of `depth` in
/// `[a.offset + b.offset, a.offset + b.offset + 1)`.
pub fn sumset_cover_check(a: &DyadicSet, b: &DyadicSet, depth: u32) -> Result<SumsetReport> {
    if a.depth != depth || b.depth != depth {
        return Err(Error::invalid("depth", "both sets must be built at the requested depth"));
    }
    let pairs = a.len() as u64 * b.len() as u64;
    if pairs > SUMSET_PAIR_BUDGET {
        return Err(Error::BudgetExceeded(format!("{pairs} pairs exceed the budget of {SUMSET_PAIR_BUDGET}")));
    }
    let target = 1u64 << depth;
    let mut hit = vec![false; target as usize];
    let bn = b.numerators();
    for x in a.numerators() {
        for &y in &bn {
            let s = x + y;
            if s < target {
                hit[s as usize] = true;
            }
        }
    }
    let missing = hit.iter().filter(|h| !**h).count() as u64;
    Ok(SumsetReport { covered: missing == 0, missing_count: missing, target_count: target, pairs })
}

/// A time subset: a finite union of closed intervals or a dyadic set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TimeSubset {
    Intervals { intervals: Vec<(f64, f64)> },
    Dyadic { set: DyadicSet },
}

impl TimeSubset {
    pub fn whole(t0: f64, t1: f64) -> Self {
        TimeSubset::Intervals { intervals: vec![(t0, t1)] }
    }

    pub fn point(t: f64) -> Self {
        TimeSubset::Intervals { intervals: vec![(t, t)] }
    }

    /// The `2^depth` closed intervals of the middle-thirds construction.
    pub fn cantor(depth: u32) -> Self {
        let mut starts = vec![0.0f64];
        let mut len = 1.0;
        for _ in 0..depth {
            len /= 3.0;
            starts = starts.iter().flat_map(|&a| [a, a + 2.0 * len]).collect();
        }
        TimeSubset::Intervals { intervals: starts.into_iter().map(|a| (a, a + len)).collect() }
    }

    pub fn contains(&self, t: f64) -> bool {
        match self {
            TimeSubset::Intervals { intervals } => intervals.iter().any(|&(a, b)| a <= t && t <= b),
            TimeSubset::Dyadic { set } => set.contains(t),
        }
    }

    fn validate(&self, grid: &TimeGrid) -> Result<()> {
        if let TimeSubset::Intervals { intervals } = self {
            for &(a, b) in intervals {
                if !(a <= b) || a < grid.t0 || b > grid.t1 {
                    return Err(Error::invalid(
                        "time subset",
                        format!("interval [{a}, {b}] not inside [{}, {}]", grid.t0, grid.t1),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Minkowski dimension of the subset, when known.
    pub fn minkowski_dim(&self) -> Option<f64> {
        match self {
            TimeSubset::Intervals { intervals } if intervals.iter().any(|&(a, b)| b > a) => Some(1.0),
            TimeSubset::Intervals { .. } => Some(0.0),
            TimeSubset::Dyadic { .. } => None,
        }
    }
}

fn grid_indices(path: &PathSample, subset: &TimeSubset) -> Result<Vec<usize>> {
    subset.validate(&path.grid)?;
    let idx: Vec<usize> = (0..path.len()).filter(|&i| subset.contains(path.time(i))).collect();
    if idx.is_empty() {
        return Err(Error::invalid("time subset", "no grid point falls inside the subset"));
    }
    Ok(idx)
}

fn drift_values(path: &PathSample, f: &DriftSpec) -> Result<Vec<f64>> {
    if f.dim != path.dim {
        return Err(Error::invalid("drift", format!("dimension {} differs from path dimension {}", f.dim, path.dim)));
    }
    sample_on_grid(f, &path.grid)
}

/// `{B_t + f(t) : t in A, t on the grid}`.
pub fn image_cloud(path: &PathSample, f: &DriftSpec, subset: &TimeSubset) -> Result<PointCloud> {
    let idx = grid_indices(path, subset)?;
    let fv = drift_values(path, f)?;
    let d = path.dim;
    let mut pts = Vec::with_capacity(idx.len() * d);
    for &i in &idx {
        pts.extend(path.point(i).iter().zip(&fv[i * d..(i + 1) * d]).map(|(b, f)| b + f));
    }
    PointCloud::new(d, pts, Provenance { kind: CloudKind::Image, source: format!("levels={} drift={}", path.grid.levels, f.kind_name()) })
}

/// `{(t, B_t + f(t)) : t in A, t on the grid}` in dimension `d + 1`.
pub fn graph_cloud(path: &PathSample, f: &DriftSpec, subset: &TimeSubset) -> Result<PointCloud> {
    let idx = grid_indices(path, subset)?;
    let fv = drift_values(path, f)?;
    let d = path.dim;
    let mut pts = Vec::with_capacity(idx.len() * (d + 1));
    for &i in &idx {
        pts.push(path.time(i));
        pts.extend(path.point(i).iter().zip(&fv[i * d..(i + 1) * d]).map(|(b, f)| b + f));
    }
    PointCloud::new(d + 1, pts, Provenance { kind: CloudKind::Graph, source: format!("levels={} drift={}", path.grid.levels, f.kind_name()) })
}

/// Default box-count window for a cloud of `2^levels + 1` samples whose
/// expected dimension is `dim_hint`: from level 2 up to the level where the
/// expected box count reaches the saturation cap.
pub fn default_window(levels: u32, dim_hint: f64) -> (u32, u32) {
    let top = ((levels as f64 - (SATURATION_DIVISOR as f64).log2()) / dim_hint.max(1.0)).floor() as u32;
    (2, top.max(2 + MIN_WINDOW as u32 - 1) + 2)
}

/// Image of `B + f` on `[0, 1]` in `R^3` with `f = (fBM_alpha, 0, 0)`, a
/// drift making the image dimension `3 - 2 alpha`.
pub fn cuzick_experiment(alpha: f64, d: usize, samples: usize, rng: RngStream) -> Result<DimEstimate> {
    if d != 3 {
        return Err(Error::invalid("d", "the experiment is defined in dimension 3"));
    }
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::invalid("alpha", format!("{alpha} outside (0, 1/2]")));
    }
    if samples < 1 << 10 || !samples.is_power_of_two() {
        return Err(Error::invalid("samples", "must be a power of two >= 2^10"));
    }
    let levels = samples.trailing_zeros();
    let f = DriftSpec::fbm(alpha, rng.child(1).seed ^ rng.child(1).stream, levels, 3, Some(0))?;
    let path = brownian_sample(rng.child(0), TimeGrid::unit(levels)?, 3)?;
    let cloud = image_cloud(&path, &f, &TimeSubset::whole(0.0, 1.0))?;
    let (lo, hi) = default_window(levels, 3.0 - 2.0 * alpha);
    boxcount_dim(&cloud, lo, hi)
}
