//! Gaussian-mixture inflow forecasts, their one-dimensional projections and
//! quantiles, plus a seeded synthetic generator and truth process.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::scalar::Scalar;
use crate::system::CascadeSystem;

/// Mixture for one reservoir over `H = T + L` weeks.
#[derive(Clone, Debug, PartialEq)]
pub struct ReservoirGmm<S: Scalar> {
    pub beta: Vec<S>,
    /// `mu[g][k]`, Mm³/week.
    pub mu: Vec<Vec<S>>,
    /// `sigma[g]`, H×H, Mm³².
    pub sigma: Vec<Matrix<S>>,
}

impl<S: Scalar> ReservoirGmm<S> {
    pub fn components(&self) -> usize {
        self.beta.len()
    }

    pub fn horizon(&self) -> usize {
        self.mu.first().map_or(0, |m| m.len())
    }

    /// Mixture mean of week `k` (0-based).
    pub fn mean(&self, k: usize) -> S {
        self.beta.iter().zip(&self.mu).map(|(&b, m)| b * m[k]).sum()
    }

    /// Mixture with every component collapsed onto its mean.
    pub fn deterministic(means: &[S]) -> Self {
        let h = means.len();
        Self {
            beta: vec![S::one()],
            mu: vec![means.to_vec()],
            sigma: vec![Matrix::zeros(h, h)],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GmmForecast<S: Scalar> {
    pub reservoirs: Vec<ReservoirGmm<S>>,
}

/// One-dimensional Gaussian mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ScalarGmm<S: Scalar> {
    pub beta: Vec<S>,
    pub mu: Vec<S>,
    pub var: Vec<S>,
}

impl<S: Scalar> ScalarGmm<S> {
    pub fn normal(mu: S, sigma: S) -> Self {
        Self {
            beta: vec![S::one()],
            mu: vec![mu],
            var: vec![sigma * sigma],
        }
    }

    pub fn mean(&self) -> S {
        self.beta.iter().zip(&self.mu).map(|(&b, &m)| b * m).sum()
    }

    pub fn sigmas(&self) -> Vec<S> {
        self.var.iter().map(|&v| v.max(S::zero()).sqrt()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.beta.len();
        if g == 0 || self.mu.len() != g || self.var.len() != g {
            return Err(Error::Domain(
                "mixture needs matching, non-empty beta/mu/var".into(),
            ));
        }
        check_weights(&self.beta)?;
        if self.var.iter().any(|&v| !(v >= S::zero())) {
            return Err(Error::Domain("mixture variance must be ≥ 0".into()));
        }
        Ok(())
    }
}

fn check_weights<S: Scalar>(beta: &[S]) -> Result<()> {
    if beta.iter().any(|&b| !(b >= S::zero())) {
        return Err(Error::Domain("mixture weight below zero".into()));
    }
    let total: S = beta.iter().copied().sum();
    if (total - S::one()).abs() > S::lit(1e-9).max(S::epsilon() * S::lit(16.0)) {
        return Err(Error::Domain(format!(
            "mixture weights sum to {total}, expected 1"
        )));
    }
    Ok(())
}

impl<S: Scalar> GmmForecast<S> {
    pub fn horizon(&self) -> usize {
        self.reservoirs.first().map_or(0, |r| r.horizon())
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.horizon();
        for (n, r) in self.reservoirs.iter().enumerate() {
            let g = r.components();
            if g == 0 || r.mu.len() != g || r.sigma.len() != g {
                return Err(Error::Domain(format!(
                    "reservoir {n}: beta/mu/sigma component counts differ"
                )));
            }
            check_weights(&r.beta).map_err(|e| Error::Domain(format!("reservoir {n}: {e}")))?;
            for (k, (m, s)) in r.mu.iter().zip(&r.sigma).enumerate() {
                if m.len() != h || s.rows() != h || s.cols() != h {
                    return Err(Error::Domain(format!(
                        "reservoir {n} component {k}: expected horizon {h}"
                    )));
                }
                if !s.is_psd(S::lit(1e-9)) {
                    return Err(Error::Domain(format!(
                        "reservoir {n} component {k}: covariance not PSD"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn deterministic(weekly: &[Vec<S>]) -> Self {
        Self {
            reservoirs: weekly
                .iter()
                .map(|w| ReservoirGmm::deterministic(w))
                .collect(),
        }
    }

    /// First `weeks` weeks of every reservoir.
    pub fn head(&self, weeks: usize) -> Self {
        self.window(0, weeks)
    }

    /// Weeks `start .. start + weeks` of every reservoir.
    pub fn window(&self, start: usize, weeks: usize) -> Self {
        let cut = |m: &Matrix<S>| {
            let mut out = Matrix::zeros(weeks, weeks);
            for i in 0..weeks {
                for j in 0..weeks {
                    out[(i, j)] = m[(start + i, start + j)];
                }
            }
            out
        };
        Self {
            reservoirs: self
                .reservoirs
                .iter()
                .map(|r| ReservoirGmm {
                    beta: r.beta.clone(),
                    mu: r
                        .mu
                        .iter()
                        .map(|m| m[start..start + weeks].to_vec())
                        .collect(),
                    sigma: r.sigma.iter().map(cut).collect(),
                })
                .collect(),
        }
    }
}

impl GmmForecast<f64> {
    /// One joint draw `[n][k]`: a component per reservoir by its weight, then
    /// a Gaussian path with that component's mean and covariance.
    pub fn sample_path<R: Rng>(&self, rng: &mut R, factors: &[Vec<Matrix<f64>>]) -> Vec<Vec<f64>> {
        self.reservoirs
            .iter()
            .zip(factors)
            .map(|(r, fs)| {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut g = r.components() - 1;
                for (k, b) in r.beta.iter().enumerate() {
                    acc += b;
                    if u < acc {
                        g = k;
                        break;
                    }
                }
                let h = r.horizon();
                let z: Vec<f64> = (0..h).map(|_| StandardNormal.sample(rng)).collect();
                let lz = fs[g].mul_vec(&z);
                r.mu[g].iter().zip(lz).map(|(m, e)| m + e).collect()
            })
            .collect()
    }

    /// Cholesky factors of every component covariance, for `sample_path`.
    pub fn factors(&self) -> Result<Vec<Vec<Matrix<f64>>>> {
        self.reservoirs
            .iter()
            .map(|r| {
                r.sigma
                    .iter()
                    .map(|s| {
                        s.cholesky()
                            .ok_or_else(|| Error::Numeric("covariance is not PSD".into()))
                    })
                    .collect()
            })
            .collect()
    }
}

/// `Σ_g β_g Σ_{k=T+1}^{T+L} μ_{n,g,k}`, Mm³.
pub fn expected_future_inflow<S: Scalar>(
    forecast: &GmmForecast<S>,
    n: usize,
    t: usize,
    l: usize,
) -> S {
    let r = &forecast.reservoirs[n];
    r.beta
        .iter()
        .zip(&r.mu)
        .map(|(&b, m)| b * m[t..t + l].iter().copied().sum::<S>())
        .sum()
}

/// Weekly mixture means of weeks `T+1 .. T+L`.
pub fn expected_weekly_inflow<S: Scalar>(
    forecast: &GmmForecast<S>,
    n: usize,
    t: usize,
    l: usize,
) -> Vec<S> {
    let r = &forecast.reservoirs[n];
    (t..t + l).map(|k| r.mean(k)).collect()
}

/// Distribution of `s'Ŵ_n` for a selection vector `s`.
pub fn project_affine<S: Scalar>(
    forecast: &GmmForecast<S>,
    n: usize,
    s: &[S],
) -> Result<ScalarGmm<S>> {
    let r = &forecast.reservoirs[n];
    if s.len() != r.horizon() {
        return Err(Error::Domain(format!(
            "selection has length {}, horizon is {}",
            s.len(),
            r.horizon()
        )));
    }
    let mut mu = Vec::with_capacity(r.components());
    let mut var = Vec::with_capacity(r.components());
    for (m, sig) in r.mu.iter().zip(&r.sigma) {
        mu.push(dot(s, m));
        let v = dot(s, &sig.mul_vec(s));
        if v < S::lit(-1e-12) {
            return Err(Error::Numeric(format!(
                "projected variance {v} is negative: covariance not PSD"
            )));
        }
        var.push(v.max(S::zero()));
    }
    Ok(ScalarGmm {
        beta: r.beta.clone(),
        mu,
        var,
    })
}

/// `Σ β_g Φ((ρ − μ_g)/σ_g)`; zero-variance components are steps at `μ_g`.
pub fn gmm_cdf<S: Scalar>(g: &ScalarGmm<S>, rho: S) -> S {
    let mut p = S::zero();
    for ((&b, &m), s) in g.beta.iter().zip(&g.mu).zip(g.sigmas()) {
        p = p + if s > S::zero() {
            b * ((rho - m) / s).norm_cdf()
        } else if rho >= m {
            b
        } else {
            S::zero()
        };
    }
    p
}

pub fn gmm_pdf<S: Scalar>(g: &ScalarGmm<S>, rho: S) -> S {
    let mut d = S::zero();
    for ((&b, &m), s) in g.beta.iter().zip(&g.mu).zip(g.sigmas()) {
        if s > S::zero() {
            d = d + b * ((rho - m) / s).norm_pdf() / s;
        }
    }
    d
}

const QUANTILE_ITERS: usize = 200;

/// `ρ` with `gmm_cdf(ρ) = p`, by safeguarded Newton.
pub fn gmm_quantile<S: Scalar>(g: &ScalarGmm<S>, p: S) -> Result<S> {
    g.validate()?;
    if !(p > S::zero() && p < S::one()) {
        return Err(Error::Domain(format!("quantile level {p} outside (0, 1)")));
    }
    let sig = g.sigmas();
    let smax = sig.iter().copied().fold(S::zero(), S::max);
    if smax == S::zero() {
        return Ok(weighted_step(g, p));
    }
    let ten = S::lit(10.0);
    let mut lo = g.mu.iter().copied().fold(S::infinity(), S::min) - ten * smax;
    let mut hi = g.mu.iter().copied().fold(S::neg_infinity(), S::max) + ten * smax;
    let scale = S::one().max(lo.abs()).max(hi.abs());
    let ftol = S::lit(1e-10).max(S::epsilon() * S::lit(64.0));
    let xtol = S::epsilon() * S::lit(8.0) * scale;
    let mut x = g.mean();
    for _ in 0..QUANTILE_ITERS {
        let f = gmm_cdf(g, x) - p;
        if f.abs() <= S::epsilon() {
            return Ok(x);
        }
        if f > S::zero() {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        let d = gmm_pdf(g, x);
        let newton = if d >= S::lit(1e-14) {
            x - f / d
        } else {
            S::nan()
        };
        let next = if newton > lo && newton < hi {
            newton
        } else {
            S::lit(0.5) * (lo + hi)
        };
        if (next - x).abs() <= xtol || hi - lo <= xtol {
            let fx = gmm_cdf(g, next) - p;
            if fx.abs() <= ftol || hi - lo <= xtol {
                return Ok(next);
            }
        }
        x = next;
    }
    Err(Error::Numeric(format!(
        "quantile at level {p} did not converge in {QUANTILE_ITERS} iterations"
    )))
}

/// Smallest component mean at which the cumulative weight reaches `p`.
fn weighted_step<S: Scalar>(g: &ScalarGmm<S>, p: S) -> S {
    let mut idx: Vec<usize> = (0..g.mu.len()).collect();
    idx.sort_by(|&a, &b| {
        g.mu[a]
            .partial_cmp(&g.mu[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut acc = S::zero();
    for &k in &idx {
        acc = acc + g.beta[k];
        if acc >= p {
            return g.mu[k];
        }
    }
    g.mu[*idx.last().expect("non-empty mixture")]
}

// ---------------------------------------------------------------- file format

#[derive(Serialize, Deserialize)]
struct ReservoirFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    beta: Vec<f64>,
    mu: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma_diag: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct ForecastFile {
    reservoirs: Vec<ReservoirFile>,
}

impl GmmForecast<f64> {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: ForecastFile = serde_json::from_str(s)?;
        let mut reservoirs = Vec::new();
        for (n, r) in file.reservoirs.into_iter().enumerate() {
            let h = r.mu.first().map_or(0, |m| m.len());
            let sigma = match (r.sigma, r.sigma_diag) {
                (Some(full), None) => full
                    .into_iter()
                    .map(|flat| {
                        if flat.len() != h * h {
                            return Err(Error::Domain(format!(
                                "reservoir {n}: sigma needs {} entries",
                                h * h
                            )));
                        }
                        Ok(Matrix::from_rows(
                            &flat
                                .chunks(h.max(1))
                                .map(|c| c.to_vec())
                                .collect::<Vec<_>>(),
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?,
                (None, Some(diag)) => diag
                    .into_iter()
                    .map(|d| {
                        if d.len() != h {
                            return Err(Error::Domain(format!(
                                "reservoir {n}: sigma_diag needs {h} entries"
                            )));
                        }
                        let mut m = Matrix::zeros(h, h);
                        for (k, v) in d.into_iter().enumerate() {
                            m[(k, k)] = v;
                        }
                        Ok(m)
                    })
                    .collect::<Result<Vec<_>>>()?,
                _ => {
                    return Err(Error::Domain(format!(
                        "reservoir {n}: give exactly one of sigma or sigma_diag"
                    )))
                }
            };
            reservoirs.push(ReservoirGmm {
                beta: r.beta,
                mu: r.mu,
                sigma,
            });
        }
        let f = GmmForecast { reservoirs };
        f.validate()?;
        Ok(f)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(&path, e))?;
        Self::from_json_str(&text)
    }

    /// Diagonal covariances use the `sigma_diag` shorthand.
    pub fn to_json(&self, system: Option<&CascadeSystem>) -> String {
        let reservoirs = self
            .reservoirs
            .iter()
            .enumerate()
            .map(|(n, r)| {
                let h = r.horizon();
                let diagonal = r
                    .sigma
                    .iter()
                    .all(|m| (0..h).all(|i| (0..h).all(|j| i == j || m[(i, j)] == 0.0)));
                let (sigma, sigma_diag) = if diagonal {
                    (
                        None,
                        Some(
                            r.sigma
                                .iter()
                                .map(|m| (0..h).map(|k| m[(k, k)]).collect())
                                .collect(),
                        ),
                    )
                } else {
                    (
                        Some(
                            r.sigma
                                .iter()
                                .map(|m| (0..h).flat_map(|i| m.row(i).to_vec()).collect())
                                .collect(),
                        ),
                        None,
                    )
                };
                ReservoirFile {
                    id: system.map(|s| s.reservoirs[n].id.clone()),
                    beta: r.beta.clone(),
                    mu: r.mu.clone(),
                    sigma,
                    sigma_diag,
                }
            })
            .collect();
        serde_json::to_string_pretty(&ForecastFile { reservoirs }).expect("forecast serializes")
    }
}

// ------------------------------------------------------- synthetic generators

/// Weekly hydrology shared by the synthetic forecast and the truth process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeasonProfile {
    pub name: String,
    /// Mean local inflow per reservoir, Mm³/week.
    pub base: Vec<f64>,
    /// Relative amplitude of the annual sinusoid.
    pub amplitude: f64,
    /// Week of the seasonal peak.
    pub peak_week: f64,
    /// Multiplier applied to every mean (wet > 1, dry < 1).
    pub scale: f64,
    /// Coefficient of variation of weekly inflow.
    pub cv: f64,
}

impl SeasonProfile {
    pub fn new(name: impl Into<String>, base: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            base,
            amplitude: 0.3,
            peak_week: 13.0,
            scale: 1.0,
            cv: 0.15,
        }
    }

    /// Same profile with means multiplied by `factor`.
    pub fn scaled(&self, name: impl Into<String>, factor: f64) -> Self {
        Self {
            name: name.into(),
            scale: self.scale * factor,
            ..self.clone()
        }
    }

    /// Expected inflow of reservoir `n` in absolute week `week`.
    pub fn mean(&self, n: usize, week: usize) -> f64 {
        let phase = 2.0 * std::f64::consts::PI * (week as f64 - self.peak_week) / 52.0;
        (self.base[n] * self.scale * (1.0 + self.amplitude * phase.cos())).max(0.0)
    }
}

/// Seeded two-component forecast over `T + L` weeks starting at week 0.
pub fn synthesize_forecast(
    seed: u64,
    system: &CascadeSystem,
    t: usize,
    l: usize,
    profile: &SeasonProfile,
) -> GmmForecast<f64> {
    synthesize_forecast_at(seed, system, 0, t + l, profile, 1.0)
}

/// Seeded two-component forecast of weeks `start .. start + horizon`, with
/// means multiplied by `bias`.
///
/// Each week's mixture has mean `bias·m(t)` and standard deviation
/// `cv·bias·m(t)`; the split into two components is random.
pub fn synthesize_forecast_at(
    seed: u64,
    system: &CascadeSystem,
    start: usize,
    horizon: usize,
    profile: &SeasonProfile,
    bias: f64,
) -> GmmForecast<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut reservoirs = Vec::with_capacity(system.len());
    for n in 0..system.len() {
        let b1: f64 = rng.gen_range(0.3..0.7);
        let b2 = 1.0 - b1;
        let mut mu1 = Vec::with_capacity(horizon);
        let mut mu2 = Vec::with_capacity(horizon);
        let mut s1 = Matrix::zeros(horizon, horizon);
        let mut s2 = Matrix::zeros(horizon, horizon);
        for k in 0..horizon {
            let u: f64 = rng.gen_range(0.5..1.5);
            let m = bias * profile.mean(n, start + k);
            let sd = profile.cv * m;
            let delta = u * sd;
            mu1.push(m + delta * b2);
            mu2.push(m - delta * b1);
            let v = sd * sd * (1.0 - b1 * b2 * u * u);
            s1[(k, k)] = v;
            s2[(k, k)] = v;
        }
        reservoirs.push(ReservoirGmm {
            beta: vec![b1, b2],
            mu: vec![mu1, mu2],
            sigma: vec![s1, s2],
        });
    }
    GmmForecast { reservoirs }
}

/// Lognormal weekly inflows around the profile's seasonal mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthProcess {
    pub profile: SeasonProfile,
    pub seed: u64,
}

impl TruthProcess {
    /// Realized inflow of every reservoir in absolute week `week`.
    pub fn sample_week(&self, week: usize) -> Vec<f64> {
        let mut rng =
            ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x2545_f491_4f6c_dd1d) ^ week as u64);
        let p = &self.profile;
        (0..p.base.len())
            .map(|n| {
                let m = p.mean(n, week);
                if p.cv <= 0.0 || m <= 0.0 {
                    return m;
                }
                let s2 = (1.0 + p.cv * p.cv).ln();
                let dist = LogNormal::new(m.ln() - 0.5 * s2, s2.sqrt()).expect("finite lognormal");
                dist.sample(&mut rng)
            })
            .collect()
    }

    /// `inflows[n][k]` for weeks `start .. start + weeks`.
    pub fn sample(&self, start: usize, weeks: usize) -> Vec<Vec<f64>> {
        let cols: Vec<Vec<f64>> = (start..start + weeks)
            .map(|w| self.sample_week(w))
            .collect();
        (0..self.profile.base.len())
            .map(|n| cols.iter().map(|c| c[n]).collect())
            .collect()
    }
}
