//! Transition density, Green kernels (free, killed, drifted) and the Martin
//! kernel of Brownian motion with a deterministic drift.
//!
//! The time integrals are split at `t_split` (default `r^2`). The small-time
//! piece is integrated in `u = r^2 / (2t)`, which turns the essential
//! singularity at `t = 0` into an exponential decay in `u`. The large-time
//! piece is integrated in `w = sqrt(t_split / t)` up to a cutoff `T_max`
//! whose analytic tail bound is below `abs_tol / 10`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::drifts::DriftSpec;
use crate::error::{Error, Result};
use crate::par;
use crate::quad::integrate;

const TAU: f64 = std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Split point of the time integral; `None` means `r^2`.
    pub t_split: Option<f64>,
    pub max_evals: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-14, t_split: None, max_evals: 200_000 }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::invalid("tolerance", "rel_tol and abs_tol must be positive"));
        }
        if let Some(s) = self.t_split {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid("t_split", "must be positive and finite"));
            }
        }
        if self.max_evals < 30 {
            return Err(Error::invalid("max_evals", "must be at least 30"));
        }
        Ok(())
    }

    pub fn tightened(&self, factor: f64) -> Self {
        Self { rel_tol: self.rel_tol * factor, abs_tol: self.abs_tol * factor, ..*self }
    }
}

/// A quadrature value with its error estimate (tail bound included).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
    pub t_max: f64,
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn check_points(d: usize, x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != d || y.len() != d {
        return Err(Error::invalid("points", format!("expected {d}-vectors")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("points", "non-finite coordinate"));
    }
    Ok(())
}

/// `p(t, x, y) = (2 pi t)^{-d/2} exp(-|x - y|^2 / 2t)`.
pub fn transition_density(d: usize, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid("t", format!("{t} must be positive")));
    }
    check_points(d, x, y)?;
    let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((TAU * t).powf(-(d as f64) / 2.0) * (-r2 / (2.0 * t)).exp())
}

/// `c(d) = Gamma(d/2 - 1) / (2 pi^{d/2})`, so that `G(x, y) = c(d) |x - y|^{2-d}`.
pub fn green_constant(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    gamma(h - 1.0) / (2.0 * std::f64::consts::PI.powf(h))
}

/// Green kernel of transient Brownian motion (`d >= 3`), closed form.
pub fn green_free(d: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    if d < 3 {
        return Err(Error::invalid("d", "the free Green kernel needs d >= 3"));
    }
    check_points(d, x, y)?;
    let r = dist(x, y);
    if r == 0.0 {
        return Err(Error::Singular("x = y".into()));
    }
    Ok(green_constant(d) * r.powf(2.0 - d as f64))
}

/// Green kernel by quadrature of its defining time integral, optionally
/// killed at rate `lambda`. This is the route checked against the closed form.
pub fn green_quadrature(
    d: usize,
    lambda: Option<f64>,
    x: &[f64],
    y: &[f64],
    settings: &QuadratureSettings,
) -> Result<KernelValue> {
    check_points(d, x, y)?;
    time_integral(d, lambda, x, y, None, settings)
}

/// `G_lambda(x, y) = int_0^inf e^{-lambda t} p(t, x, y) dt`, `d >= 2`.
pub fn green_killed(
    d: usize,
    lambda: f64,
    x: &[f64],
    y: &[f64],
    settings: &QuadratureSettings,
) -> Result<KernelValue> {
    if d < 2 {
        return Err(Error::invalid("d", "need d >= 2"));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", format!("{lambda} must be positive")));
    }
    check_points(d, x, y)?;
    time_integral(d, Some(lambda), x, y, None, settings)
}

/// Green kernel of `B + f`: `int_0^inf e^{-lambda t} p(t, x - f(0), y - f(t)) dt`.
pub fn green_drifted(
    f: &DriftSpec,
    lambda: Option<f64>,
    x: &[f64],
    y: &[f64],
    settings: &QuadratureSettings,
) -> Result<KernelValue> {
    let d = f.dim;
    if d < 2 {
        return Err(Error::invalid("d", "need d >= 2"));
    }
    check_points(d, x, y)?;
    time_integral(d, lambda, x, y, Some(f), settings)
}

/// Smallest `T` (by doubling) with `int_T^inf (2 pi t)^{-d/2} e^{-lambda t} dt < bound`.
fn tail_cutoff(d: usize, lambda: Option<f64>, start: f64, bound: f64) -> Result<(f64, f64)> {
    let h = d as f64 / 2.0;
    let lam = lambda.unwrap_or(0.0);
    if d <= 2 && lam <= 0.0 {
        return Err(Error::TailNotControllable("d = 2 requires a killing rate lambda > 0".into()));
    }
    let tail = |t: f64| -> f64 {
        let mut b = f64::INFINITY;
        if h > 1.0 {
            b = (TAU).powf(-h) * t.powf(1.0 - h) / (h - 1.0) * (-lam * t).exp();
        }
        if lam > 0.0 {
            b = b.min((-lam * t).exp() * (TAU * t).powf(-h) / lam);
        }
        b
    };
    let mut t = start.max(1.0);
    for _ in 0..400 {
        let b = tail(t);
        if b < bound {
            return Ok((t, b));
        }
        t *= 2.0;
    }
    Err(Error::TailNotControllable(format!("tail bound above {bound:e} for every T <= {t:e}")))
}

fn time_integral(
    d: usize,
    lambda: Option<f64>,
    x: &[f64],
    y: &[f64],
    drift: Option<&DriftSpec>,
    settings: &QuadratureSettings,
) -> Result<KernelValue> {
    settings.validate()?;
    if let Some(l) = lambda {
        if !(l >= 0.0 && l.is_finite()) {
            return Err(Error::invalid("lambda", format!("{l} must be >= 0")));
        }
    }
    let lam = lambda.unwrap_or(0.0);
    let z: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
    let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(Error::Singular("x = y: the time integral diverges at t = 0".into()));
    }
    let drift = drift.filter(|f| !f.is_zero());
    let split = settings.t_split.unwrap_or(r * r);
    let (t_max, tail) = tail_cutoff(d, lambda, split, settings.abs_tol / 10.0)?;
    let origin = match drift {
        Some(f) => {
            if f.interval.0 > 0.0 || f.interval.1 < t_max {
                return Err(Error::TailNotControllable(format!(
                    "drift defined on [{}, {}] but the integral needs [0, {t_max:e}]",
                    f.interval.0, f.interval.1
                )));
            }
            f.eval(0.0)?
        }
        None => vec![0.0; d],
    };
    let half_d = d as f64 / 2.0;
    // log of exp(-|z - g(t)|^2 / 2t - lambda t) without the (2 pi t)^{-d/2} prefactor
    let exponent = |t: f64, buf: &mut Vec<f64>| -> f64 {
        let sq = match drift {
            Some(f) => {
                f.increment_into(t, &origin, buf);
                z.iter().zip(buf.iter()).map(|(a, g)| (a - g) * (a - g)).sum::<f64>()
            }
            None => r * r,
        };
        -sq / (2.0 * t) - lam * t
    };

    let mut buf = vec![0.0; d];
    // t in (0, split]: u = r^2 / (2t)
    let u_min = r * r / (2.0 * split);
    let mut small = |u: f64| -> f64 {
        let t = r * r / (2.0 * u);
        (exponent(t, &mut buf) - half_d * (TAU * t).ln()).exp() * r * r / (2.0 * u * u)
    };
    let u_mid = u_min + 60.0;
    let p1 = integrate(&mut small, u_min, u_mid, settings.rel_tol, settings.abs_tol / 4.0, settings.max_evals);
    let p2 = integrate(&mut small, u_mid, u_min + 1200.0, settings.rel_tol, settings.abs_tol / 4.0, settings.max_evals);

    let mut buf2 = vec![0.0; d];
    // t in [split, t_max]: w = sqrt(split / t)
    let w_min = (split / t_max).sqrt();
    let large = |w: f64| -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        let t = split / (w * w);
        (exponent(t, &mut buf2) - half_d * (TAU * t).ln()).exp() * 2.0 * split / (w * w * w)
    };
    let p3 = integrate(large, w_min, 1.0, settings.rel_tol, settings.abs_tol / 4.0, settings.max_evals);

    let value = p1.value + p2.value + p3.value;
    let error = p1.error + p2.error + p3.error + tail;
    let evals = p1.evals + p2.evals + p3.evals;
    let target = settings.abs_tol.max(settings.rel_tol * value.abs()) + tail;
    if !(p1.converged && p2.converged && p3.converged) && error > target {
        return Err(Error::QuadratureNonConvergence { evals, estimate: value, error });
    }
    Ok(KernelValue { value, error, evals, t_max })
}

/// Which Green kernel a Martin kernel is built on.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GreenKernel {
    Free,
    Killed { lambda: f64 },
    Drifted { drift: DriftSpec, lambda: Option<f64> },
}

impl GreenKernel {
    pub fn evaluate(&self, d: usize, x: &[f64], y: &[f64], settings: &QuadratureSettings) -> Result<f64> {
        match self {
            GreenKernel::Free => green_free(d, x, y),
            GreenKernel::Killed { lambda } => Ok(green_killed(d, *lambda, x, y, settings)?.value),
            GreenKernel::Drifted { drift, lambda } => {
                if drift.dim != d {
                    return Err(Error::invalid("drift", "dimension mismatch"));
                }
                Ok(green_drifted(drift, *lambda, x, y, settings)?.value)
            }
        }
    }

    pub fn is_symmetric(&self) -> bool {
        !matches!(self, GreenKernel::Drifted { .. })
    }
}

/// Kernels addressable by name from experiments and the capacity solver.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kernel", rename_all = "kebab-case")]
pub enum KernelSpec {
    Transition { dim: usize, t: f64 },
    Green { dim: usize, base: GreenKernel },
    Martin { dim: usize, base: GreenKernel, x0: Vec<f64> },
}

impl KernelSpec {
    pub fn martin_free(dim: usize, x0: Vec<f64>) -> Result<Self> {
        let spec = KernelSpec::Martin { dim, base: GreenKernel::Free, x0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        match self {
            KernelSpec::Transition { dim, .. } | KernelSpec::Green { dim, .. } | KernelSpec::Martin { dim, .. } => {
                *dim
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (dim, base) = match self {
            KernelSpec::Transition { dim, t } => {
                if *dim < 1 || !(*t > 0.0) {
                    return Err(Error::invalid("kernel", "transition needs dim >= 1 and t > 0"));
                }
                return Ok(());
            }
            KernelSpec::Green { dim, base } => (*dim, base),
            KernelSpec::Martin { dim, base, x0 } => {
                if x0.len() != *dim {
                    return Err(Error::invalid("x0", format!("expected a {dim}-vector")));
                }
                (*dim, base)
            }
        };
        match base {
            GreenKernel::Free if dim < 3 => {
                Err(Error::invalid("kernel", "free Green kernel requires d >= 3 (transience)"))
            }
            GreenKernel::Killed { lambda } if dim < 2 || !(*lambda > 0.0) => {
                Err(Error::invalid("kernel", "killed Green kernel requires d >= 2 and lambda > 0"))
            }
            GreenKernel::Drifted { lambda, .. } if dim < 3 && !lambda.is_some_and(|l| l > 0.0) => {
                Err(Error::invalid("kernel", "drifted Green kernel in d = 2 requires lambda > 0"))
            }
            _ if dim < 2 => Err(Error::invalid("kernel", "Green kernels require d >= 2")),
            _ => Ok(()),
        }
    }

    pub fn evaluate(&self, x: &[f64], y: &[f64], settings: &QuadratureSettings) -> Result<f64> {
        match self {
            KernelSpec::Transition { dim, t } => transition_density(*dim, *t, x, y),
            KernelSpec::Green { dim, base } => base.evaluate(*dim, x, y, settings),
            KernelSpec::Martin { dim, base, x0 } => martin_kernel(*dim, base, x0, x, y, settings),
        }
    }
}

/// `M(x, y) = G(x, y) / G(x0, y)`.
pub fn martin_kernel(
    d: usize,
    base: &GreenKernel,
    x0: &[f64],
    x: &[f64],
    y: &[f64],
    settings: &QuadratureSettings,
) -> Result<f64> {
    check_points(d, x0, y)?;
    if dist(x0, y) == 0.0 {
        return Err(Error::Singular("y = x0: Martin kernel denominator diverges".into()));
    }
    if x == x0 {
        return Ok(1.0);
    }
    let num = base.evaluate(d, x, y, settings)?;
    let den = base.evaluate(d, x0, y, settings)?;
    Ok(num / den)
}

/// Empirical constants of the comparison `c1 G <= G_f <= c2 G`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SandwichReport {
    pub c1_emp: f64,
    pub c2_emp: f64,
    pub holder_constant: f64,
    pub dim: usize,
    pub lambda: Option<f64>,
    pub radii: Vec<f64>,
    /// `ratios[i][j]` for radius `i` and direction `j`.
    pub ratios: Vec<Vec<f64>>,
    pub max_quadrature_error: f64,
}

/// Scans `G_f(0, r e) / G(0, r e)` over radii and unit directions `e`.
pub fn verify_green_sandwich(
    f: &DriftSpec,
    lambda: Option<f64>,
    radii: &[f64],
    directions: &[Vec<f64>],
    radius_bound: Option<f64>,
    settings: &QuadratureSettings,
) -> Result<SandwichReport> {
    let d = f.dim;
    let cert = f
        .certificate(0.5)
        .ok_or_else(|| Error::invalid("drift", "needs an analytic or cached Hölder(1/2) certificate"))?;
    match (d, lambda) {
        (2, None) => return Err(Error::invalid("lambda", "d = 2 requires killing")),
        (2, Some(_)) if radius_bound.is_none() => {
            return Err(Error::invalid("radius_bound", "d = 2 requires a bound C on |x - y|"))
        }
        (0 | 1, _) => return Err(Error::invalid("d", "need d >= 2")),
        _ => {}
    }
    if radii.is_empty() || directions.is_empty() {
        return Err(Error::invalid("grid", "needs at least one radius and one direction"));
    }
    if let Some(c) = radius_bound {
        if radii.iter().any(|&r| r > c) {
            return Err(Error::invalid("radii", format!("all radii must be <= {c}")));
        }
    }
    for e in directions {
        let n = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        if e.len() != d || (n - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("directions", "must be unit vectors of the drift dimension"));
        }
    }
    let origin = vec![0.0; d];
    let cells: Vec<(usize, usize)> =
        (0..radii.len()).flat_map(|i| (0..directions.len()).map(move |j| (i, j))).collect();
    let values = par::map_slice(&cells, |&(i, j)| -> Result<(f64, f64)> {
        let y: Vec<f64> = directions[j].iter().map(|e| e * radii[i]).collect();
        let base = time_integral(d, lambda, &origin, &y, None, settings)?;
        let drifted = time_integral(d, lambda, &origin, &y, Some(f), settings)?;
        let ratio = drifted.value / base.value;
        let err = ratio * (drifted.error / drifted.value + base.error / base.value);
        Ok((ratio, err))
    });
    let mut ratios = vec![vec![0.0; directions.len()]; radii.len()];
    let mut max_err: f64 = 0.0;
    for (&(i, j), v) in cells.iter().zip(values) {
        let (ratio, err) = v?;
        ratios[i][j] = ratio;
        max_err = max_err.max(err);
    }
    let all = ratios.iter().flatten();
    let c1 = all.clone().copied().fold(f64::INFINITY, f64::min);
    let c2 = all.copied().fold(0.0, f64::max);
    Ok(SandwichReport {
        c1_emp: c1,
        c2_emp: c2,
        holder_constant: cert.constant,
        dim: d,
        lambda,
        radii: radii.to_vec(),
        ratios,
        max_quadrature_error: max_err,
    })
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut v: Vec<f64> = (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect();
    v[0] = lo;
    v[n - 1] = hi;
    v
}
