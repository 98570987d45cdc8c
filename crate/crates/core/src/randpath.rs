//! Samplers for Brownian motion and fractional Brownian motion on uniform
//! dyadic time grids.

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Largest supported grid level (2^30 + 1 points).
pub const MAX_LEVELS: u32 = 30;

/// Grid sizes (in points) up to which the dense Cholesky fallback is allowed.
pub const DENSE_FALLBACK_POINTS: usize = 1 << 12;

/// `2^levels + 1` equally spaced times covering `[t0, t1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub t1: f64,
    pub levels: u32,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, levels: u32) -> Result<Self> {
        if !t0.is_finite() || !t1.is_finite() {
            return Err(Error::invalid("grid", format!("non-finite bounds [{t0}, {t1}]")));
        }
        if t0 < 0.0 {
            return Err(Error::invalid("grid", format!("t0 = {t0} is negative")));
        }
        if t1 <= t0 {
            return Err(Error::invalid("grid", format!("t1 = {t1} must exceed t0 = {t0}")));
        }
        if levels > MAX_LEVELS {
            return Err(Error::invalid("grid", format!("levels {levels} > {MAX_LEVELS}")));
        }
        Ok(Self { t0, t1, levels })
    }

    pub fn unit(levels: u32) -> Result<Self> {
        Self::new(0.0, 1.0, levels)
    }

    /// Number of intervals, `2^levels`.
    pub fn intervals(&self) -> usize {
        1usize << self.levels
    }

    pub fn len(&self) -> usize {
        self.intervals() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.t1 - self.t0) / self.intervals() as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.intervals() {
            self.t1
        } else {
            self.t0 + i as f64 * self.spacing()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    pub fn refined(&self) -> Result<Self> {
        Self::new(self.t0, self.t1, self.levels + 1)
    }
}

/// A sampled `dim`-dimensional trajectory on a [`TimeGrid`], stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub grid: TimeGrid,
    pub dim: usize,
    pub points: Vec<f64>,
}

impl PathSample {
    pub fn from_points(grid: TimeGrid, dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if points.len() != grid.len() * dim {
            return Err(Error::invalid(
                "points",
                format!("expected {} coordinates, got {}", grid.len() * dim, points.len()),
            ));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("points", "non-finite coordinate"));
        }
        Ok(Self { grid, dim, points })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn time(&self, i: usize) -> f64 {
        self.grid.time(i)
    }

    /// Every `2^(levels - coarse)`-th point: the same realization seen on a
    /// coarser grid.
    pub fn restrict(&self, levels: u32) -> Result<PathSample> {
        if levels > self.grid.levels {
            return Err(Error::invalid(
                "levels",
                format!("cannot restrict level {} path to finer level {levels}", self.grid.levels),
            ));
        }
        let stride = 1usize << (self.grid.levels - levels);
        let grid = TimeGrid::new(self.grid.t0, self.grid.t1, levels)?;
        let mut points = Vec::with_capacity(grid.len() * self.dim);
        for i in 0..grid.len() {
            points.extend_from_slice(self.point(i * stride));
        }
        Ok(PathSample { grid, dim: self.dim, points })
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(Error::invalid("dim", "must be at least 1"))
    } else {
        Ok(())
    }
}

/// Standard Brownian motion started at the origin, sampled exactly on `grid`.
pub fn brownian_sample(rng: RngStream, grid: TimeGrid, dim: usize) -> Result<PathSample> {
    check_dim(dim)?;
    // re-validate in case the grid was built by hand
    let grid = TimeGrid::new(grid.t0, grid.t1, grid.levels)?;
    let mut r = rng.rng();
    let sd = grid.spacing().sqrt();
    let n = grid.len();
    let mut points = vec![0.0; n * dim];
    for i in 1..n {
        for c in 0..dim {
            let z: f64 = r.sample(StandardNormal);
            points[i * dim + c] = points[(i - 1) * dim + c] + sd * z;
        }
    }
    Ok(PathSample { grid, dim, points })
}

/// One level of Brownian-bridge midpoint refinement: the returned path lives
/// on the next finer grid and agrees with `path` at every coarse time.
pub fn refine_bridge(rng: RngStream, path: &PathSample) -> Result<PathSample> {
    let grid = path.grid.refined()?;
    let dim = path.dim;
    let sd = (path.grid.spacing() / 4.0).sqrt();
    let mut r = rng.rng();
    let mut points = vec![0.0; grid.len() * dim];
    let coarse = path.grid.intervals();
    for i in 0..coarse {
        let a = path.point(i);
        let b = path.point(i + 1);
        points[2 * i * dim..(2 * i + 1) * dim].copy_from_slice(a);
        for c in 0..dim {
            let z: f64 = r.sample(StandardNormal);
            points[(2 * i + 1) * dim + c] = 0.5 * (a[c] + b[c]) + sd * z;
        }
    }
    points[2 * coarse * dim..].copy_from_slice(path.point(coarse));
    Ok(PathSample { grid, dim, points })
}

/// Brownian motion sampled at an arbitrary increasing list of times by
/// sequential Gaussian increments. `times[0]` may be zero; the process starts
/// at the origin at time zero.
pub fn brownian_at_times(rng: RngStream, times: &[f64], dim: usize) -> Result<Vec<f64>> {
    check_dim(dim)?;
    let mut r = rng.rng();
    let mut out = vec![0.0; times.len() * dim];
    let mut prev_t = 0.0;
    let mut prev = vec![0.0; dim];
    for (i, &t) in times.iter().enumerate() {
        if !t.is_finite() || t < prev_t {
            return Err(Error::invalid("times", "must be finite, nonnegative and nondecreasing"));
        }
        let sd = (t - prev_t).sqrt();
        for c in 0..dim {
            let z: f64 = r.sample(StandardNormal);
            prev[c] += sd * z;
            out[i * dim + c] = prev[c];
        }
        prev_t = t;
    }
    Ok(out)
}

/// How [`fbm_sample_with`] generates the Gaussian vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FbmMethod {
    /// Circulant embedding, dense factorization if the embedding fails.
    Auto,
    Circulant,
    Cholesky,
}

/// Fractional Brownian motion with Hurst index `hurst`, one independent copy
/// per coordinate, pinned at the origin at `grid.t0 = 0`.
pub fn fbm_sample(rng: RngStream, grid: TimeGrid, dim: usize, hurst: f64) -> Result<PathSample> {
    fbm_sample_with(rng, grid, dim, hurst, FbmMethod::Auto)
}

pub fn fbm_sample_with(
    rng: RngStream,
    grid: TimeGrid,
    dim: usize,
    hurst: f64,
    method: FbmMethod,
) -> Result<PathSample> {
    check_dim(dim)?;
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::invalid("hurst", format!("{hurst} not in (0, 1)")));
    }
    let grid = TimeGrid::new(grid.t0, grid.t1, grid.levels)?;
    if grid.t0 != 0.0 {
        return Err(Error::invalid("grid", "fractional Brownian motion requires t0 = 0"));
    }
    let n = grid.intervals();
    let coords = match method {
        FbmMethod::Circulant => match circulant_eigenvalues(n, hurst, grid.spacing()) {
            Some(eig) => circulant_draw(rng, &eig, n, dim),
            None => return Err(Error::EmbeddingFailed { points: n + 1 }),
        },
        FbmMethod::Cholesky => cholesky_draw(rng, &grid, dim, hurst)?,
        FbmMethod::Auto => match circulant_eigenvalues(n, hurst, grid.spacing()) {
            Some(eig) => circulant_draw(rng, &eig, n, dim),
            None => cholesky_draw(rng, &grid, dim, hurst)?,
        },
    };
    Ok(PathSample { grid, dim, points: coords })
}

/// Autocovariance of fractional Gaussian noise with unit step.
fn fgn_autocov(j: usize, hurst: f64) -> f64 {
    let h2 = 2.0 * hurst;
    let j = j as f64;
    0.5 * ((j + 1.0).powf(h2) - 2.0 * j.powf(h2) + (j - 1.0).abs().powf(h2))
}

/// Eigenvalues of the size-`2n` circulant embedding of the increment
/// covariance, or `None` if one is materially negative.
fn circulant_eigenvalues(n: usize, hurst: f64, step: f64) -> Option<Vec<f64>> {
    let m = 2 * n;
    let scale = step.powf(2.0 * hurst);
    let mut row: Vec<Complex<f64>> = (0..m)
        .map(|k| {
            let j = if k <= n { k } else { m - k };
            Complex::new(scale * fgn_autocov(j, hurst), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut row);
    let max = row.iter().map(|c| c.re).fold(0.0, f64::max);
    let mut eig = Vec::with_capacity(m);
    for c in row {
        if c.re < -1e-10 * max {
            return None;
        }
        eig.push(c.re.max(0.0));
    }
    Some(eig)
}

/// Cumulated circulant draws; each complex FFT yields two independent
/// coordinates (real and imaginary parts).
fn circulant_draw(rng: RngStream, eig: &[f64], n: usize, dim: usize) -> Vec<f64> {
    let m = eig.len();
    let mut r = rng.rng();
    let fft = FftPlanner::new().plan_fft_forward(m);
    let sqrt_eig: Vec<f64> = eig.iter().map(|l| (l / m as f64).sqrt()).collect();
    let mut points = vec![0.0; (n + 1) * dim];
    let mut buf = vec![Complex::new(0.0, 0.0); m];
    let mut c = 0;
    while c < dim {
        for (b, s) in buf.iter_mut().zip(&sqrt_eig) {
            let re: f64 = r.sample(StandardNormal);
            let im: f64 = r.sample(StandardNormal);
            *b = Complex::new(s * re, s * im);
        }
        fft.process(&mut buf);
        for (part, coord) in [(0usize, c), (1, c + 1)] {
            if coord >= dim {
                break;
            }
            let mut acc = 0.0;
            for i in 0..n {
                acc += if part == 0 { buf[i].re } else { buf[i].im };
                points[(i + 1) * dim + coord] = acc;
            }
        }
        c += 2;
    }
    points
}

fn cholesky_draw(rng: RngStream, grid: &TimeGrid, dim: usize, hurst: f64) -> Result<Vec<f64>> {
    let npts = grid.len();
    if npts > DENSE_FALLBACK_POINTS {
        return Err(Error::EmbeddingFailed { points: npts });
    }
    let n = npts - 1;
    let times: Vec<f64> = (1..npts).map(|i| grid.time(i)).collect();
    let h2 = 2.0 * hurst;
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let (s, t) = (times[i], times[j]);
            let cov = 0.5 * (s.powf(h2) + t.powf(h2) - (s - t).abs().powf(h2));
            let mut sum = cov;
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::EmbeddingFailed { points: npts });
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let mut r = rng.rng();
    let mut points = vec![0.0; npts * dim];
    let mut z = vec![0.0; n];
    for c in 0..dim {
        for zi in z.iter_mut() {
            *zi = r.sample(StandardNormal);
        }
        for i in 0..n {
            let v: f64 = (0..=i).map(|k| l[i * n + k] * z[k]).sum();
            points[(i + 1) * dim + c] = v;
        }
    }
    Ok(points)
}
