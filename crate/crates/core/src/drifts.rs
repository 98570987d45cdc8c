//! Deterministic drift functions `f: [0, T] -> R^d` with Hölder certificates.

use std::path::Path;
use std::sync::{Arc, OnceLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::randpath::{fbm_sample, PathSample, TimeGrid};
use crate::rng::RngStream;

/// Resolution at which empirical Weierstrass certificates are computed.
pub const WEIERSTRASS_CERT_LEVELS: u32 = 20;
/// Margin added on top of an empirical Weierstrass constant.
pub const WEIERSTRASS_CERT_MARGIN: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateKind {
    Analytic,
    Empirical,
}

/// `|f(t) - f(s)| <= constant * |t - s|^exponent` on `interval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderCertificate {
    pub exponent: f64,
    pub constant: f64,
    pub kind: CertificateKind,
    /// Grid level of the supremum for empirical certificates.
    pub resolution: Option<u32>,
    pub interval: (f64, f64),
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum DriftKind {
    Zero,
    Linear {
        slope: Vec<f64>,
    },
    SqrtCusp {
        scale: f64,
        direction: Vec<f64>,
    },
    Weierstrass {
        exponent: f64,
        terms: u32,
        phase_seed: u64,
        direction: Vec<f64>,
        #[serde(skip)]
        phases: Vec<f64>,
    },
    /// A frozen fractional Brownian path on `[0, 1]`, linearly interpolated
    /// between the `2^levels + 1` sampled times. `axis = Some(i)` puts it in
    /// coordinate `i` only; `None` uses independent copies in every coordinate.
    Fbm {
        hurst: f64,
        seed: u64,
        levels: u32,
        axis: Option<usize>,
        #[serde(skip)]
        table: Arc<PathSample>,
    },
    Tabulated {
        #[serde(skip)]
        times: Vec<f64>,
        #[serde(skip)]
        values: Vec<f64>,
        knots: usize,
    },
    /// `t -> (f(a^2 t + b) - f(b)) / a`.
    Rescaled {
        inner: Box<DriftSpec>,
        a: f64,
        b: f64,
    },
}

/// A drift function together with its dimension and domain.
#[derive(Debug, Clone, Serialize)]
pub struct DriftSpec {
    pub kind: DriftKind,
    pub dim: usize,
    pub interval: (f64, f64),
    #[serde(skip)]
    cert_cache: OnceLock<HolderCertificate>,
}

fn unit_direction(direction: &[f64]) -> Result<Vec<f64>> {
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return Err(Error::invalid("direction", "must be a finite nonzero vector"));
    }
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("direction", format!("norm {norm} is not 1")));
    }
    Ok(direction.to_vec())
}

/// `e_axis` in `R^dim`.
pub fn axis_vector(dim: usize, axis: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[axis] = 1.0;
    v
}

impl DriftSpec {
    fn from_kind(kind: DriftKind, dim: usize, interval: (f64, f64)) -> Self {
        Self { kind, dim, interval, cert_cache: OnceLock::new() }
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_kind(DriftKind::Zero, dim, (0.0, f64::INFINITY))
    }

    pub fn linear(slope: Vec<f64>) -> Result<Self> {
        if slope.is_empty() || slope.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("slope", "must be a finite nonempty vector"));
        }
        let dim = slope.len();
        Ok(Self::from_kind(DriftKind::Linear { slope }, dim, (0.0, f64::INFINITY)))
    }

    /// `f(t) = scale * sqrt(t) * direction`.
    pub fn sqrt_cusp(scale: f64, direction: &[f64]) -> Result<Self> {
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::invalid("scale", format!("{scale} must be finite and >= 0")));
        }
        let direction = unit_direction(direction)?;
        let dim = direction.len();
        Ok(Self::from_kind(DriftKind::SqrtCusp { scale, direction }, dim, (0.0, f64::INFINITY)))
    }

    /// `W(t) = sum_{j=0..=terms} 2^{-j exponent} cos(2^j pi t + theta_j)` along
    /// `direction`, with phases drawn uniformly from `phase_seed`.
    pub fn weierstrass(exponent: f64, terms: u32, phase_seed: u64, direction: &[f64]) -> Result<Self> {
        if !(exponent > 0.0 && exponent <= 1.0) {
            return Err(Error::invalid("exponent", format!("{exponent} not in (0, 1]")));
        }
        if terms > 52 {
            return Err(Error::invalid("terms", "at most 52 octaves are representable"));
        }
        let direction = unit_direction(direction)?;
        let dim = direction.len();
        let mut r = RngStream::new(phase_seed, 0x5745_4945).rng();
        let phases = (0..=terms).map(|_| r.random::<f64>() * std::f64::consts::TAU).collect();
        Ok(Self::from_kind(
            DriftKind::Weierstrass { exponent, terms, phase_seed, direction, phases },
            dim,
            (0.0, f64::INFINITY),
        ))
    }

    /// A fractional Brownian path frozen at construction, defined on `[0, 1]`.
    pub fn fbm(hurst: f64, seed: u64, levels: u32, dim: usize, axis: Option<usize>) -> Result<Self> {
        if let Some(a) = axis {
            if a >= dim {
                return Err(Error::invalid("axis", format!("{a} >= dim {dim}")));
            }
        }
        let grid = TimeGrid::unit(levels)?;
        let sample_dim = if axis.is_some() { 1 } else { dim };
        let table = fbm_sample(RngStream::new(seed, 0x4642_4d), grid, sample_dim, hurst)?;
        Ok(Self::from_kind(
            DriftKind::Fbm { hurst, seed, levels, axis, table: Arc::new(table) },
            dim,
            (0.0, 1.0),
        ))
    }

    /// Piecewise-linear interpolation of `(times[i], values[i*dim..])`.
    pub fn tabulated(times: Vec<f64>, values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if times.len() < 2 {
            return Err(Error::invalid("times", "need at least two knots"));
        }
        if values.len() != times.len() * dim {
            return Err(Error::invalid("values", "length must equal knots * dim"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("times", "must be finite and strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("values", "must be finite"));
        }
        let interval = (times[0], *times.last().unwrap());
        let knots = times.len();
        Ok(Self::from_kind(DriftKind::Tabulated { times, values, knots }, dim, interval))
    }

    /// Load a tabulated drift from CSV with a header row and columns
    /// `time, v1, ..., vd`.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
        let width = reader.headers()?.len();
        if width < 2 {
            return Err(Error::Parse("drift CSV needs a time column and at least one value column".into()));
        }
        let dim = width - 1;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (row, rec) in reader.records().enumerate() {
            let rec = rec?;
            if rec.len() != width {
                return Err(Error::Parse(format!("row {}: expected {width} fields", row + 1)));
            }
            for (i, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {}: `{field}` is not a number", row + 1)))?;
                if i == 0 {
                    times.push(v);
                } else {
                    values.push(v);
                }
            }
        }
        Self::tabulated(times, values, dim)
    }

    /// `t -> (f(a^2 t + b) - f(b)) / a`, the rescaling under which Hölder(1/2)
    /// constants are preserved.
    pub fn rescaled(&self, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::invalid("a", "must be positive and finite"));
        }
        let (lo, hi) = self.interval;
        if !(b >= lo && b <= hi) {
            return Err(Error::invalid("b", format!("{b} outside [{lo}, {hi}]")));
        }
        let new_hi = if hi.is_infinite() { f64::INFINITY } else { (hi - b) / (a * a) };
        Ok(Self::from_kind(
            DriftKind::Rescaled { inner: Box::new(self.clone()), a, b },
            self.dim,
            (0.0, new_hi),
        ))
    }

    /// Short lowercase name of the drift family.
    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            DriftKind::Zero => "zero",
            DriftKind::Linear { .. } => "linear",
            DriftKind::SqrtCusp { .. } => "sqrt-cusp",
            DriftKind::Weierstrass { .. } => "weierstrass",
            DriftKind::Fbm { .. } => "fbm",
            DriftKind::Tabulated { .. } => "tabulated",
            DriftKind::Rescaled { .. } => "rescaled",
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, DriftKind::Zero)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.interval.0 && t <= self.interval.1
    }

    /// `f(t)`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    /// Writes `f(t)` into `out` (length `dim`).
    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        if !self.contains(t) {
            return Err(Error::OutOfInterval { t, lo: self.interval.0, hi: self.interval.1 });
        }
        self.eval_unchecked(t, out);
        Ok(())
    }

    fn eval_unchecked(&self, t: f64, out: &mut [f64]) {
        match &self.kind {
            DriftKind::Zero => out.fill(0.0),
            DriftKind::Linear { slope } => {
                for (o, s) in out.iter_mut().zip(slope) {
                    *o = s * t;
                }
            }
            DriftKind::SqrtCusp { scale, direction } => {
                let v = scale * t.sqrt();
                for (o, e) in out.iter_mut().zip(direction) {
                    *o = v * e;
                }
            }
            DriftKind::Weierstrass { exponent, phases, direction, .. } => {
                let v = weierstrass_value(*exponent, phases, t);
                for (o, e) in out.iter_mut().zip(direction) {
                    *o = v * e;
                }
            }
            DriftKind::Fbm { axis, table, .. } => {
                let n = table.grid.intervals();
                let x = (t * n as f64).clamp(0.0, n as f64);
                let i = (x.floor() as usize).min(n - 1);
                let w = x - i as f64;
                match axis {
                    Some(a) => {
                        out.fill(0.0);
                        out[*a] = (1.0 - w) * table.points[i] + w * table.points[i + 1];
                    }
                    None => {
                        let (p, q) = (table.point(i), table.point(i + 1));
                        for c in 0..out.len() {
                            out[c] = (1.0 - w) * p[c] + w * q[c];
                        }
                    }
                }
            }
            DriftKind::Tabulated { times, values, .. } => {
                let dim = self.dim;
                let k = match times.binary_search_by(|x| x.total_cmp(&t)) {
                    Ok(k) => {
                        out.copy_from_slice(&values[k * dim..(k + 1) * dim]);
                        return;
                    }
                    Err(k) => k.clamp(1, times.len() - 1) - 1,
                };
                let w = (t - times[k]) / (times[k + 1] - times[k]);
                for c in 0..dim {
                    out[c] = (1.0 - w) * values[k * dim + c] + w * values[(k + 1) * dim + c];
                }
            }
            DriftKind::Rescaled { inner, a, b } => {
                let mut base = vec![0.0; self.dim];
                inner.eval_unchecked(*b, &mut base);
                inner.eval_unchecked(a * a * t + b, out);
                for (o, z) in out.iter_mut().zip(&base) {
                    *o = (*o - z) / a;
                }
            }
        }
    }

    /// `f(t) - f(0)`, written into `out`. Callers must stay inside the interval.
    pub fn increment_into(&self, t: f64, origin: &[f64], out: &mut [f64]) {
        self.eval_unchecked(t, out);
        for (o, z) in out.iter_mut().zip(origin) {
            *o -= z;
        }
    }

    /// Hölder certificate with exponent `exponent`, analytic where a closed
    /// form is known. Weierstrass drifts at their own exponent get the cached
    /// empirical constant at level 20 plus a 10% margin. Returns `None` if no
    /// bound is available for that exponent.
    pub fn certificate(&self, exponent: f64) -> Option<HolderCertificate> {
        let analytic = |constant: f64, interval: (f64, f64)| HolderCertificate {
            exponent,
            constant,
            kind: CertificateKind::Analytic,
            resolution: None,
            interval,
        };
        match &self.kind {
            DriftKind::Zero => Some(analytic(0.0, self.interval)),
            DriftKind::Linear { slope } => {
                let norm = slope.iter().map(|x| x * x).sum::<f64>().sqrt();
                if exponent == 1.0 || norm == 0.0 {
                    Some(analytic(norm, self.interval))
                } else {
                    // |c (t - s)| / |t - s|^g <= |c| on pairs at distance <= 1
                    Some(analytic(norm, (0.0, 1.0)))
                }
            }
            DriftKind::SqrtCusp { scale, .. } => {
                if exponent == 0.5 || *scale == 0.0 {
                    Some(analytic(*scale, self.interval))
                } else {
                    None
                }
            }
            DriftKind::Weierstrass { exponent: g, .. } if (exponent - g).abs() < 1e-12 => {
                let cert = self.cert_cache.get_or_init(|| {
                    let emp = holder_constant(self, exponent, WEIERSTRASS_CERT_LEVELS);
                    HolderCertificate {
                        constant: emp.constant * (1.0 + WEIERSTRASS_CERT_MARGIN),
                        ..emp
                    }
                });
                Some(cert.clone())
            }
            DriftKind::Rescaled { inner, a, .. } => {
                let base = inner.certificate(exponent)?;
                Some(HolderCertificate {
                    constant: base.constant * a.powf(2.0 * exponent) / a,
                    interval: (0.0, self.interval.1),
                    ..base
                })
            }
            _ => None,
        }
    }
}

fn weierstrass_value(exponent: f64, phases: &[f64], t: f64) -> f64 {
    let mut sum = 0.0;
    let mut freq = std::f64::consts::PI;
    let ratio = 2f64.powf(-exponent);
    let mut amp = 1.0;
    for theta in phases {
        // reduce the argument modulo 2*pi to keep precision at high octaves
        let arg = (freq * t + theta).rem_euclid(std::f64::consts::TAU);
        sum += amp * arg.cos();
        freq *= 2.0;
        amp *= ratio;
    }
    sum
}

/// Lags (in grid units) scanned by [`holder_constant`]: every lag up to
/// `EXACT_LAGS`, then `2^j q` for `q` in `[EXACT_LAGS/2, EXACT_LAGS]`. The
/// set is closed under doubling, so the result is monotone in `levels`.
const EXACT_LAGS: usize = 256;

fn lag_lattice(max_lag: usize) -> Vec<usize> {
    let mut lags: Vec<usize> = (1..=EXACT_LAGS.min(max_lag)).collect();
    let mut scale = 2;
    while EXACT_LAGS / 2 * scale <= max_lag {
        for q in EXACT_LAGS / 2..=EXACT_LAGS {
            let m = q * scale;
            if m > EXACT_LAGS && m <= max_lag {
                lags.push(m);
            }
        }
        scale *= 2;
    }
    lags.sort_unstable();
    lags.dedup();
    lags
}

/// Sup of `|f(t) - f(s)| / |t - s|^exponent` over pairs on `values` sampled at
/// uniform spacing `step`. Exhaustive for grids of at most 257 points.
fn holder_sup_uniform(values: &[f64], dim: usize, step: f64, exponent: f64) -> f64 {
    let n = values.len() / dim;
    if n < 2 {
        return 0.0;
    }
    let lags = lag_lattice(n - 1);
    let per_lag = par::map_slice(&lags, |&m| {
        let denom = (m as f64 * step).powf(exponent);
        let mut best: f64 = 0.0;
        for i in 0..n - m {
            let mut d2 = 0.0;
            for c in 0..dim {
                let d = values[(i + m) * dim + c] - values[i * dim + c];
                d2 += d * d;
            }
            best = best.max(d2);
        }
        best.sqrt() / denom
    });
    per_lag.into_iter().fold(0.0, f64::max)
}

/// Empirical Hölder constant of `f` with exponent `exponent` over the dyadic
/// grid of `2^levels + 1` points on `[lo, lo + 1]` (clipped to the drift's
/// interval). Tabulated drifts are scanned on their own knots instead.
pub fn holder_constant(f: &DriftSpec, exponent: f64, levels: u32) -> HolderCertificate {
    if let DriftKind::Tabulated { times, values, .. } = &f.kind {
        let n = times.len();
        let rows = par::map_range(n, |i| {
            let mut best: f64 = 0.0;
            for j in i + 1..n {
                let mut d2 = 0.0;
                for c in 0..f.dim {
                    let d = values[j * f.dim + c] - values[i * f.dim + c];
                    d2 += d * d;
                }
                best = best.max(d2.sqrt() / (times[j] - times[i]).powf(exponent));
            }
            best
        });
        return HolderCertificate {
            exponent,
            constant: rows.into_iter().fold(0.0, f64::max),
            kind: CertificateKind::Empirical,
            resolution: None,
            interval: f.interval,
        };
    }
    let lo = f.interval.0;
    let hi = f.interval.1.min(lo + 1.0);
    let n = 1usize << levels;
    let step = (hi - lo) / n as f64;
    let values: Vec<f64> = par::map_range(n + 1, |i| {
        let t = if i == n { hi } else { lo + i as f64 * step };
        let mut v = vec![0.0; f.dim];
        f.eval_unchecked(t, &mut v);
        v
    })
    .into_iter()
    .flatten()
    .collect();
    HolderCertificate {
        exponent,
        constant: holder_sup_uniform(&values, f.dim, step, exponent),
        kind: CertificateKind::Empirical,
        resolution: Some(levels),
        interval: (lo, hi),
    }
}

/// Values of `f` on `grid`, row-major.
pub fn sample_on_grid(f: &DriftSpec, grid: &TimeGrid) -> Result<Vec<f64>> {
    if !f.contains(grid.t0) || !f.contains(grid.t1) {
        return Err(Error::OutOfInterval { t: grid.t1, lo: f.interval.0, hi: f.interval.1 });
    }
    let mut out = vec![0.0; grid.len() * f.dim];
    for i in 0..grid.len() {
        f.eval_unchecked(grid.time(i), &mut out[i * f.dim..(i + 1) * f.dim]);
    }
    Ok(out)
}
