//! Discrete energies and capacities for Riesz and Martin kernels, and a
//! Frostman-style dimension estimate from capacity trends.
//!
//! The energy of a measure with an atom is infinite, so discrete proxies need
//! a diagonal convention: [`Diagonal::Exclude`] drops self-interaction, while
//! the cutoff variants charge each atom the kernel at half its cell spacing.
//! The capacity solver always uses the nearest-neighbour cutoff, which keeps
//! the quadratic form positive on the simplex in practice.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{GreenKernel, KernelSpec, QuadratureSettings};
use crate::par;
use crate::stats::linear_fit;

/// Largest support size for which energies are exact double sums.
pub const EXACT_ENERGY_LIMIT: usize = 1 << 14;
/// Largest support size for which the solver keeps a dense kernel matrix.
const DENSE_MATRIX_LIMIT: usize = 2048;
/// Asymptotic growth of `ln E` per refinement level below which energies
/// count as bounded. Calibrated on equispaced [0, 1] and middle-thirds Cantor
/// families.
pub const FROSTMAN_GROWTH_THRESHOLD: f64 = 0.01;

/// Points in `R^dim`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    pub dim: usize,
    pub coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(Error::invalid("points", "coordinate count must be a multiple of dim >= 1"));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("points", "non-finite coordinate"));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(1);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("points", "rows have different lengths"));
        }
        Self::new(dim, rows.concat())
    }

    pub fn from_1d(xs: &[f64]) -> Result<Self> {
        Self::new(1, xs.to_vec())
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        dist(self.point(i), self.point(j))
    }

    /// Load one point per CSV row (no header; every column a coordinate).
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)?;
        let mut rows = Vec::new();
        for (n, rec) in reader.records().enumerate() {
            let rec = rec?;
            let row: std::result::Result<Vec<f64>, _> = rec.iter().map(|s| s.parse::<f64>()).collect();
            rows.push(row.map_err(|_| Error::Parse(format!("row {}: non-numeric field", n + 1)))?);
        }
        if rows.is_empty() {
            return Err(Error::Parse("no points".into()));
        }
        Self::from_rows(&rows)
    }

    /// Fails if two points coincide.
    pub fn check_distinct(&self) -> Result<()> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            self.point(a).iter().zip(self.point(b)).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        });
        for w in idx.windows(2) {
            if self.point(w[0]) == self.point(w[1]) {
                return Err(Error::invalid("support", format!("points {} and {} coincide", w[0], w[1])));
            }
        }
        Ok(())
    }

    /// Distance from each point to its nearest other point (`inf` for a
    /// single point).
    pub fn nearest_neighbor_spacing(&self) -> Vec<f64> {
        let n = self.len();
        if n <= 1 {
            return vec![f64::INFINITY; n];
        }
        if self.dim == 1 {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| self.coords[a].total_cmp(&self.coords[b]));
            let mut out = vec![f64::INFINITY; n];
            for k in 0..n {
                let x = self.coords[idx[k]];
                let mut best = f64::INFINITY;
                if k > 0 {
                    best = best.min(x - self.coords[idx[k - 1]]);
                }
                if k + 1 < n {
                    best = best.min(self.coords[idx[k + 1]] - x);
                }
                out[idx[k]] = best;
            }
            return out;
        }
        par::map_range(n, |i| {
            (0..n).filter(|&j| j != i).map(|j| self.dist(i, j)).fold(f64::INFINITY, f64::min)
        })
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// A probability measure on finitely many distinct points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub support: PointSet,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(support: PointSet, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::invalid("support", "must be nonempty"));
        }
        if weights.len() != support.len() {
            return Err(Error::invalid("weights", "one weight per support point"));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("weights", "must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("weights", format!("sum to {total}, not 1")));
        }
        support.check_distinct()?;
        Ok(Self { support, weights })
    }

    pub fn uniform(support: PointSet) -> Result<Self> {
        let n = support.len();
        Self::new(support, vec![1.0 / n as f64; n.max(1)])
    }

    /// Convex combination `t self + (1 - t) other` on the same support.
    pub fn mix(&self, other: &DiscreteMeasure, t: f64) -> Result<Self> {
        if self.support != other.support {
            return Err(Error::invalid("support", "measures must share their support"));
        }
        let w: Vec<f64> = self.weights.iter().zip(&other.weights).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let s: f64 = w.iter().sum();
        Ok(Self { support: self.support.clone(), weights: w.iter().map(|x| x / s).collect() })
    }
}

/// Treatment of the self-interaction of atoms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "diagonal", content = "h", rename_all = "kebab-case")]
pub enum Diagonal {
    Exclude,
    /// Every atom is charged the kernel at distance `h / 2`.
    CellCutoff(f64),
    /// Atom `i` is charged the kernel at half its nearest-neighbour distance.
    NearestNeighbor,
}

impl Diagonal {
    fn spacings(&self, support: &PointSet) -> Option<Vec<f64>> {
        match self {
            Diagonal::Exclude => None,
            Diagonal::CellCutoff(h) => Some(vec![*h; support.len()]),
            Diagonal::NearestNeighbor => Some(support.nearest_neighbor_spacing()),
        }
    }
}

/// An energy value; `error_bound` is zero for exact double sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Energy {
    pub value: f64,
    pub error_bound: f64,
}

impl Energy {
    fn exact(value: f64) -> Self {
        Self { value, error_bound: 0.0 }
    }
}

/// Kernel of an energy functional.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnergyKernel {
    /// `|x - y|^{-alpha}` (`alpha = 0` is the constant kernel).
    Riesz { alpha: f64 },
    /// Martin kernel, symmetrized as `(M(x, y) + M(y, x)) / 2`.
    Martin(KernelSpec),
}

impl EnergyKernel {
    fn validate(&self, support_dim: usize) -> Result<()> {
        match self {
            EnergyKernel::Riesz { alpha } if !(*alpha >= 0.0 && alpha.is_finite()) => {
                Err(Error::invalid("alpha", format!("{alpha} must be >= 0")))
            }
            EnergyKernel::Riesz { .. } => Ok(()),
            EnergyKernel::Martin(spec @ KernelSpec::Martin { dim, .. }) => {
                spec.validate()?;
                if *dim != support_dim {
                    return Err(Error::invalid("support", "dimension differs from the kernel's"));
                }
                Ok(())
            }
            EnergyKernel::Martin(_) => Err(Error::invalid("kernel", "expected a Martin kernel spec")),
        }
    }

    /// Symmetrized off-diagonal entry.
    fn pair(&self, x: &[f64], y: &[f64], q: &QuadratureSettings) -> Result<f64> {
        match self {
            EnergyKernel::Riesz { alpha } => Ok(riesz(dist(x, y), *alpha)),
            EnergyKernel::Martin(KernelSpec::Martin { dim, base, x0 }) => match base {
                GreenKernel::Free => {
                    let p = (*dim as f64) - 2.0;
                    let rxy = dist(x, y);
                    Ok(0.5 * ((dist(x0, y) / rxy).powf(p) + (dist(x0, x) / rxy).powf(p)))
                }
                _ => {
                    let a = crate::kernels::martin_kernel(*dim, base, x0, x, y, q)?;
                    let b = crate::kernels::martin_kernel(*dim, base, x0, y, x, q)?;
                    Ok(0.5 * (a + b))
                }
            },
            EnergyKernel::Martin(_) => unreachable!("validated"),
        }
    }

    /// Self-interaction of an atom at `x` whose cell has spacing `h`.
    fn self_term(&self, x: &[f64], h: f64, q: &QuadratureSettings) -> Result<f64> {
        match self {
            EnergyKernel::Riesz { alpha } => Ok(riesz(h / 2.0, *alpha)),
            EnergyKernel::Martin(KernelSpec::Martin { dim, base, x0 }) => match base {
                GreenKernel::Free => Ok((dist(x0, x) / (h / 2.0)).powf(*dim as f64 - 2.0)),
                _ => {
                    let mut y = x.to_vec();
                    y[0] += h / 2.0;
                    let g = base.evaluate(*dim, &y, x, q)?;
                    Ok(g / base.evaluate(*dim, x0, x, q)?)
                }
            },
            EnergyKernel::Martin(_) => unreachable!("validated"),
        }
    }

    fn check_support(&self, support: &PointSet) -> Result<()> {
        if let EnergyKernel::Martin(KernelSpec::Martin { x0, .. }) = self {
            for i in 0..support.len() {
                if support.point(i) == x0.as_slice() {
                    return Err(Error::Singular(format!("support point {i} equals the reference point x0")));
                }
            }
        }
        Ok(())
    }
}

fn riesz(r: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        1.0
    } else if alpha == 1.0 {
        1.0 / r
    } else if alpha == 0.5 {
        1.0 / r.sqrt()
    } else {
        r.powf(-alpha)
    }
}

fn energy_impl(mu: &DiscreteMeasure, kernel: &EnergyKernel, diagonal: Diagonal) -> Result<Energy> {
    let support = &mu.support;
    kernel.validate(support.dim)?;
    kernel.check_support(support)?;
    support.check_distinct()?;
    let n = support.len();
    let q = QuadratureSettings::default();
    let spacings = diagonal.spacings(support);
    // a lone atom has infinite self-energy under every convention
    if n == 1 || mu.weights.iter().any(|&w| w == 1.0) {
        return Ok(Energy::exact(f64::INFINITY));
    }
    let diag: f64 = match &spacings {
        None => 0.0,
        Some(h) => {
            let mut s = 0.0;
            for i in 0..n {
                if mu.weights[i] > 0.0 {
                    s += mu.weights[i] * mu.weights[i] * kernel.self_term(support.point(i), h[i], &q)?;
                }
            }
            s
        }
    };
    if n > EXACT_ENERGY_LIMIT {
        if let EnergyKernel::Riesz { alpha } = kernel {
            let (off, bound) = blocked_riesz_offdiag(mu, *alpha);
            return Ok(Energy { value: off + diag, error_bound: bound });
        }
    }
    let rows = par::map_range(n, |i| -> Result<f64> {
        let wi = mu.weights[i];
        if wi == 0.0 {
            return Ok(0.0);
        }
        let xi = support.point(i);
        let mut s = 0.0;
        for j in (i + 1)..n {
            let wj = mu.weights[j];
            if wj != 0.0 {
                s += wj * kernel.pair(xi, support.point(j), &q)?;
            }
        }
        Ok(2.0 * wi * s)
    });
    let mut off = 0.0;
    for r in rows {
        off += r?;
    }
    Ok(Energy::exact(off + diag))
}

/// Riesz `alpha`-energy `sum_{i != j} w_i w_j |x_i - x_j|^{-alpha}`, plus the
/// diagonal term the convention prescribes. Supports larger than 2^14 points
/// use a cell-blocked far field with a rigorous error bound.
pub fn riesz_energy(mu: &DiscreteMeasure, alpha: f64, diagonal: Diagonal) -> Result<Energy> {
    energy_impl(mu, &EnergyKernel::Riesz { alpha }, diagonal)
}

/// Energy with the symmetrized Martin kernel of `spec`.
pub fn martin_energy(mu: &DiscreteMeasure, spec: &KernelSpec, diagonal: Diagonal) -> Result<Energy> {
    energy_impl(mu, &EnergyKernel::Martin(spec.clone()), diagonal)
}

/// Off-diagonal Riesz energy with exact near field (cells at most two apart)
/// and centroid far field. Weighted centroids cancel the first-order Taylor
/// term, so a far pair contributes at most
/// `W_A W_B * alpha (alpha + 1) / 2 * d_min^{-alpha-2} * (s_A^2 + s_B^2)`
/// where `s^2` is the weighted mean squared distance to the centroid and
/// `d_min` the smallest distance between the two cells.
fn blocked_riesz_offdiag(mu: &DiscreteMeasure, alpha: f64) -> (f64, f64) {
    let s = &mu.support;
    let (n, dim) = (s.len(), s.dim);
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for i in 0..n {
        for c in 0..dim {
            lo[c] = lo[c].min(s.point(i)[c]);
            hi[c] = hi[c].max(s.point(i)[c]);
        }
    }
    let extent = (0..dim).map(|c| hi[c] - lo[c]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    // about 32 points per occupied cell for a set filling its bounding box
    let per_axis = ((n as f64 / 32.0).powf(1.0 / dim as f64)).ceil().max(1.0);
    let side = extent / per_axis * (1.0 + 1e-12);
    let key = |p: &[f64]| -> Vec<i64> { (0..dim).map(|c| ((p[c] - lo[c]) / side).floor() as i64).collect() };
    let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for i in 0..n {
        cells.entry(key(s.point(i))).or_default().push(i);
    }
    let mut cell_list: Vec<(Vec<i64>, Vec<usize>)> = cells.into_iter().collect();
    cell_list.sort_by(|a, b| a.0.cmp(&b.0));
    let summaries: Vec<(f64, Vec<f64>, f64)> = cell_list
        .iter()
        .map(|(_, idx)| {
            let w: f64 = idx.iter().map(|&i| mu.weights[i]).sum();
            let mut c = vec![0.0; dim];
            if w > 0.0 {
                for &i in idx {
                    for k in 0..dim {
                        c[k] += mu.weights[i] * s.point(i)[k];
                    }
                }
                c.iter_mut().for_each(|v| *v /= w);
            }
            let spread = if w > 0.0 {
                idx.iter().map(|&i| mu.weights[i] * dist(s.point(i), &c).powi(2)).sum::<f64>() / w
            } else {
                0.0
            };
            (w, c, spread)
        })
        .collect();
    let m = cell_list.len();
    let parts = par::map_range(m, |a| {
        let (ka, ia) = &cell_list[a];
        let (wa, ca, sa) = &summaries[a];
        let mut val = 0.0;
        let mut bound = 0.0;
        for b in 0..m {
            let (kb, ib) = &cell_list[b];
            let gap = ka.iter().zip(kb).map(|(x, y)| (x - y).abs()).max().unwrap_or(0);
            if gap <= 2 {
                for &i in ia {
                    for &j in ib {
                        if i != j {
                            val += mu.weights[i] * mu.weights[j] * riesz(s.dist(i, j), alpha);
                        }
                    }
                }
            } else {
                let (wb, cb, sb) = &summaries[b];
                let ww = wa * wb;
                if ww == 0.0 {
                    continue;
                }
                val += ww * riesz(dist(ca, cb), alpha);
                let dmin = ka
                    .iter()
                    .zip(kb)
                    .map(|(x, y)| (((x - y).abs() - 1).max(0) as f64 * side).powi(2))
                    .sum::<f64>()
                    .sqrt();
                bound += ww * 0.5 * alpha * (alpha + 1.0) * dmin.powf(-alpha - 2.0) * (sa + sb);
            }
        }
        (val, bound)
    });
    parts.into_iter().fold((0.0, 0.0), |(v, b), (pv, pb)| (v + pv, b + pb))
}

/// Solver controls for [`min_energy`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Tolerance on the relative stationarity gap.
    pub tol: f64,
    pub max_iter: usize,
    /// Either [`Diagonal::NearestNeighbor`] or a fixed [`Diagonal::CellCutoff`];
    /// exclusion makes the quadratic indefinite and is rejected.
    pub diagonal: Diagonal,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 5000, diagonal: Diagonal::NearestNeighbor }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapacityResult {
    pub capacity: f64,
    pub minimizer: DiscreteMeasure,
    /// `+inf` encodes a polar (zero-capacity) support.
    pub energy: f64,
    pub iterations: usize,
    /// `(w . g - min_i g_i) / (w . g)` at the returned iterate, with `g` the
    /// energy gradient.
    pub gap: f64,
    pub converged: bool,
    pub diagonal: Diagonal,
    pub kernel_note: String,
}

/// Kernel matrix with the cutoff diagonal, dense or evaluated on the fly.
struct Gram<'a> {
    support: &'a PointSet,
    kernel: &'a EnergyKernel,
    diag: Vec<f64>,
    dense: Option<Vec<f64>>,
}

impl<'a> Gram<'a> {
    fn new(support: &'a PointSet, kernel: &'a EnergyKernel, diag: Vec<f64>) -> Result<Self> {
        let n = support.len();
        let q = QuadratureSettings::default();
        let dense = if n <= DENSE_MATRIX_LIMIT {
            let rows = par::map_range(n, |i| -> Result<Vec<f64>> {
                let mut row = vec![0.0; n];
                for j in 0..n {
                    row[j] = if i == j { diag[i] } else { kernel.pair(support.point(i), support.point(j), &q)? };
                }
                Ok(row)
            });
            let mut m = Vec::with_capacity(n * n);
            for r in rows {
                m.extend(r?);
            }
            Some(m)
        } else {
            None
        };
        Ok(Self { support, kernel, diag, dense })
    }

    fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let q = QuadratureSettings::default();
        match &self.dense {
            Some(m) => par::map_range(n, |i| m[i * n..(i + 1) * n].iter().zip(v).map(|(a, b)| a * b).sum()),
            None => par::map_range(n, |i| {
                let xi = self.support.point(i);
                let mut s = self.diag[i] * v[i];
                for j in 0..n {
                    if j != i && v[j] != 0.0 {
                        // kernel errors were ruled out when the diagonal was built
                        s += v[j] * self.kernel.pair(xi, self.support.point(j), &q).unwrap_or(f64::NAN);
                    }
                }
                s
            }),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (k, &x) in u.iter().enumerate() {
        css += x;
        let t = (css - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Minimize the energy `w^T K w` over probability vectors on `support` by
/// projected gradient steps (Barzilai–Borwein step length) followed by an
/// exact line search on the quadratic, starting from the uniform measure.
/// The diagonal convention comes from `settings`.
pub fn min_energy(support: &PointSet, kernel: &EnergyKernel, settings: &SolverSettings) -> Result<CapacityResult> {
    if support.is_empty() {
        return Err(Error::invalid("support", "needs at least one point"));
    }
    kernel.validate(support.dim)?;
    kernel.check_support(support)?;
    support.check_distinct()?;
    if let Diagonal::Exclude = settings.diagonal {
        return Err(Error::invalid("diagonal", "the solver needs a cutoff diagonal"));
    }
    if let Diagonal::CellCutoff(h) = settings.diagonal {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid("diagonal", "cutoff spacing must be positive"));
        }
    }
    let n = support.len();
    let note = match kernel {
        EnergyKernel::Riesz { .. } => "riesz kernel".to_string(),
        EnergyKernel::Martin(_) => "martin kernel symmetrized as (M(x,y)+M(y,x))/2".to_string(),
    };
    if n == 1 {
        let minimizer = DiscreteMeasure::uniform(support.clone())?;
        return Ok(CapacityResult {
            capacity: 0.0,
            minimizer,
            energy: f64::INFINITY,
            iterations: 0,
            gap: 0.0,
            converged: true,
            diagonal: settings.diagonal,
            kernel_note: note,
        });
    }
    let q = QuadratureSettings::default();
    let spacing = settings.diagonal.spacings(support).expect("cutoff diagonal");
    let mut diag = Vec::with_capacity(n);
    for i in 0..n {
        diag.push(kernel.self_term(support.point(i), spacing[i], &q)?);
    }
    let gram = Gram::new(support, kernel, diag)?;

    let mut w = vec![1.0 / n as f64; n];
    let mut kw = gram.matvec(&w);
    let mut step = 1.0 / gram.diag.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut iterations = 0;
    let mut gap = f64::INFINITY;
    let mut converged = false;
    while iterations < settings.max_iter {
        if iterations > 0 && iterations % 64 == 0 {
            kw = gram.matvec(&w);
        }
        let wkw = dot(&w, &kw);
        let gmin = kw.iter().cloned().fold(f64::INFINITY, f64::min);
        gap = (wkw - gmin) / wkw;
        if gap <= settings.tol {
            converged = true;
            break;
        }
        iterations += 1;
        // gradient is 2 K w; the factor 2 is absorbed in the step
        let trial: Vec<f64> = w.iter().zip(&kw).map(|(a, g)| a - step * g).collect();
        let mut dir: Vec<f64> = project_simplex(&trial).iter().zip(&w).map(|(y, a)| y - a).collect();
        if dot(&dir, &kw) >= 0.0 {
            // fall back to the Frank–Wolfe vertex direction
            let imin = (0..n).min_by(|&a, &b| kw[a].total_cmp(&kw[b])).unwrap();
            dir = w.iter().map(|a| -a).collect();
            dir[imin] += 1.0;
        }
        let kd = gram.matvec(&dir);
        let slope = dot(&dir, &kw);
        let curv = dot(&dir, &kd);
        let t = if curv > 0.0 { (-slope / curv).clamp(0.0, 1.0) } else { 1.0 };
        if t == 0.0 {
            break;
        }
        for i in 0..n {
            w[i] = (w[i] + t * dir[i]).max(0.0);
            kw[i] += t * kd[i];
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        // Barzilai–Borwein length from the last displacement
        let dd = dot(&dir, &dir);
        if curv > 0.0 && dd > 0.0 {
            step = dd / curv;
        }
    }
    kw = gram.matvec(&w);
    let energy = dot(&w, &kw);
    if converged {
        let gmin = kw.iter().cloned().fold(f64::INFINITY, f64::min);
        gap = (energy - gmin) / energy;
    }
    let minimizer = DiscreteMeasure { support: support.clone(), weights: w };
    Ok(CapacityResult {
        capacity: if energy.is_finite() && energy > 0.0 { 1.0 / energy } else { 0.0 },
        minimizer,
        energy,
        iterations,
        gap,
        converged,
        diagonal: settings.diagonal,
        kernel_note: note,
    })
}

/// Frostman dimension estimate from a refinement family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrostmanEstimate {
    pub value: f64,
    /// Bracket `[last bounded alpha, first unbounded alpha]`.
    pub bracket: (f64, f64),
    pub alphas: Vec<f64>,
    /// Asymptotic growth of `ln(min energy)` per refinement level, per alpha.
    pub growth: Vec<f64>,
    /// `energies[a][k]`: minimal energy for alpha `a` at level `k`.
    pub energies: Vec<Vec<f64>>,
    pub threshold: f64,
}


/// For each `alpha`, the minimal cutoff energies along the refinement family
/// are reduced to an asymptotic per-level growth rate of `ln E` (see
/// [`asymptotic_log_growth`]); `alpha` counts as bounded when that rate is
/// below `threshold`. The estimate is the largest bounded `alpha` of the
/// ascending prefix.
pub fn frostman_dim(
    family: &[PointSet],
    alphas: &[f64],
    threshold: f64,
    settings: &SolverSettings,
) -> Result<FrostmanEstimate> {
    if family.len() < 3 {
        return Err(Error::invalid("family", "needs at least 3 refinement levels"));
    }
    if alphas.is_empty() || alphas.windows(2).any(|w| w[1] <= w[0]) || alphas[0] <= 0.0 {
        return Err(Error::invalid("alphas", "must be positive and strictly increasing"));
    }
    let mut energies = Vec::with_capacity(alphas.len());
    let mut growth = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let kernel = EnergyKernel::Riesz { alpha };
        let mut e = Vec::with_capacity(family.len());
        for set in family {
            e.push(min_energy(set, &kernel, settings)?.energy);
        }
        growth.push(asymptotic_log_growth(&e));
        energies.push(e);
    }
    let bounded = growth.iter().take_while(|&&g| g < threshold).count();
    let (value, bracket) = if bounded == 0 {
        (0.0, (0.0, alphas[0]))
    } else if bounded == alphas.len() {
        (alphas[bounded - 1], (alphas[bounded - 1], f64::INFINITY))
    } else {
        (alphas[bounded - 1], (alphas[bounded - 1], alphas[bounded]))
    };
    Ok(FrostmanEstimate { value, bracket, alphas: alphas.to_vec(), growth, energies, threshold })
}

/// Per-level growth rate of `ln E_k` as `k -> inf`, read off the slope of
/// `ln(E_{k+1} - E_k)` against `k`. Energies that converge have geometrically
/// shrinking increments (negative slope); energies growing like `s^{kc}`
/// have increments with slope `c ln s`, the same as `ln E` itself. Fitting
/// the increments avoids the slow finite-level drift of `ln E` near the
/// critical exponent.
pub fn asymptotic_log_growth(energies: &[f64]) -> f64 {
    if energies.iter().any(|e| !e.is_finite()) {
        return f64::INFINITY;
    }
    let (ks, logs): (Vec<f64>, Vec<f64>) = energies
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] > w[0])
        .map(|(k, w)| (k as f64, (w[1] - w[0]).ln()))
        .unzip();
    if ks.len() < 2 {
        // energies stopped increasing
        return f64::NEG_INFINITY;
    }
    linear_fit(&ks, &logs).map(|f| f.slope).unwrap_or(f64::INFINITY)
}
