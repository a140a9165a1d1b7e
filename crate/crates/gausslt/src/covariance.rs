//! Exact covariance functions for the three scalar Gaussian families, plus
//! grid probes for the increment-variance bounds (P1) and the
//! increment-past covariance decay (P2).

use crate::{Error, Result};
use serde::Deserialize;

/// One scalar Gaussian-process covariance family. Components of the
/// d-dimensional processes are i.i.d. copies of this scalar law.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CovarianceModel {
    /// Fractional Brownian motion with Hurst index `h`.
    Fbm { h: f64 },
    /// Bifractional Brownian motion; effective self-similarity index is
    /// `h0 * k0`, and `k0 = 1` reduces to fBm with `h = h0`.
    Bifbm { h0: f64, k0: f64 },
    /// Subfractional Brownian motion with index `h`.
    Subfbm { h: f64 },
}

impl CovarianceModel {
    pub fn fbm(h: f64) -> Result<Self> {
        let m = Self::Fbm { h };
        m.validate()?;
        Ok(m)
    }

    pub fn bifbm(h0: f64, k0: f64) -> Result<Self> {
        let m = Self::Bifbm { h0, k0 };
        m.validate()?;
        Ok(m)
    }

    pub fn subfbm(h: f64) -> Result<Self> {
        let m = Self::Subfbm { h };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Fbm { h } | Self::Subfbm { h } => {
                if !(h > 0.0 && h < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "Hurst index must lie in (0,1), got {h}"
                    )));
                }
            }
            Self::Bifbm { h0, k0 } => {
                if !(h0 > 0.0 && h0 < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "bifbm h0 must lie in (0,1), got {h0}"
                    )));
                }
                if !(k0 > 0.0 && k0 <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "bifbm k0 must lie in (0,1], got {k0}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Effective self-similarity index H (for bi-fBm, `h0 * k0`).
    pub fn hurst(&self) -> f64 {
        match *self {
            Self::Fbm { h } | Self::Subfbm { h } => h,
            Self::Bifbm { h0, k0 } => h0 * k0,
        }
    }

    /// Covariance of one scalar component at times `s, t >= 0`.
    pub fn cov(&self, s: f64, t: f64) -> Result<f64> {
        if s < 0.0 || t < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "cov requires nonnegative times, got ({s}, {t})"
            )));
        }
        Ok(self.cov_raw(s, t))
    }

    /// Unchecked covariance; hot path for the quadrature loops.
    #[inline]
    pub(crate) fn cov_raw(&self, s: f64, t: f64) -> f64 {
        match *self {
            Self::Fbm { h } => {
                0.5 * (t.powf(2.0 * h) + s.powf(2.0 * h) - (t - s).abs().powf(2.0 * h))
            }
            Self::Bifbm { h0, k0 } => {
                0.5f64.powf(k0)
                    * ((t.powf(2.0 * h0) + s.powf(2.0 * h0)).powf(k0)
                        - (t - s).abs().powf(2.0 * h0 * k0))
            }
            Self::Subfbm { h } => {
                t.powf(2.0 * h) + s.powf(2.0 * h)
                    - 0.5 * ((t + s).powf(2.0 * h) + (t - s).abs().powf(2.0 * h))
            }
        }
    }

    /// Variance of one scalar component at time `t`.
    #[inline]
    pub fn variance(&self, t: f64) -> f64 {
        self.cov_raw(t, t)
    }

    /// E[(X_t - X_s)^2], clamped at 0 against rounding.
    #[inline]
    pub fn increment_variance(&self, s: f64, t: f64) -> f64 {
        (self.variance(t) + self.variance(s) - 2.0 * self.cov_raw(s, t)).max(0.0)
    }

    /// E[(X_t - X_s) X_s] = cov(s,t) - cov(s,s) for 0 <= s < t.
    pub fn increment_cross(&self, s: f64, t: f64) -> Result<f64> {
        if !(0.0 <= s && s < t) {
            return Err(Error::InvalidParameter(format!(
                "increment_cross requires 0 <= s < t, got ({s}, {t})"
            )));
        }
        Ok(self.increment_cross_raw(s, t))
    }

    #[inline]
    pub(crate) fn increment_cross_raw(&self, s: f64, t: f64) -> f64 {
        self.cov_raw(s, t) - self.cov_raw(s, s)
    }
}

/// Empirical (P1) constants on a grid: min/max of
/// E[(X_t - X_s)^2] / (t-s)^{2H} over grid pairs.
#[derive(Debug, Clone)]
pub struct P1Report {
    pub kappa1: f64,
    pub kappa2: f64,
    pub horizon: f64,
    pub grid_size: usize,
}

/// Empirical (P2) curve: `betas[i]` is the grid supremum of the normalized
/// increment-past covariance over pairs with relative increment <= 1/gammas[i].
#[derive(Debug, Clone)]
pub struct P2Report {
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
}

/// Scan all pairs 0 <= s < t < T on an n-point uniform grid.
pub fn probe_p1(model: &CovarianceModel, horizon: f64, n: usize) -> Result<P1Report> {
    if horizon <= 0.0 {
        return Err(Error::InvalidParameter("probe_p1 requires T > 0".into()));
    }
    if n < 2 {
        return Err(Error::InvalidParameter("probe_p1 requires n >= 2".into()));
    }
    let two_h = 2.0 * model.hurst();
    let mut kappa1 = f64::INFINITY;
    let mut kappa2 = f64::NEG_INFINITY;
    for i in 0..n {
        let s = horizon * i as f64 / n as f64;
        for j in (i + 1)..n {
            let t = horizon * j as f64 / n as f64;
            let ratio = model.increment_variance(s, t) / (t - s).powf(two_h);
            kappa1 = kappa1.min(ratio);
            kappa2 = kappa2.max(ratio);
        }
    }
    Ok(P1Report {
        kappa1,
        kappa2,
        horizon,
        grid_size: n,
    })
}

/// Empirical beta(gamma) over a log-spaced grid of base points `s` with
/// relative increments up to 1/gamma. Every gamma must exceed 1.
pub fn probe_p2(
    model: &CovarianceModel,
    horizon: f64,
    gammas: &[f64],
    n: usize,
) -> Result<P2Report> {
    if horizon <= 0.0 || n < 2 {
        return Err(Error::InvalidParameter(
            "probe_p2 requires T > 0 and n >= 2".into(),
        ));
    }
    const N_INC: usize = 32;
    let mut betas = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        if gamma <= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "probe_p2 requires gamma > 1, got {gamma}"
            )));
        }
        let mut best: Option<f64> = None;
        // log-spaced s so that pairs with (t-s)/s just below 1/gamma exist
        // at every scale
        let s_lo = horizon * 1e-4;
        let s_hi = horizon * (1.0 - 1e-9);
        for i in 0..n {
            let s = s_lo * (s_hi / s_lo).powf(i as f64 / (n - 1) as f64);
            for j in 1..=N_INC {
                let u = j as f64 / N_INC as f64;
                let t = s * (1.0 + u / gamma);
                if t >= horizon {
                    continue;
                }
                let iv = model.increment_variance(s, t);
                let vs = model.variance(s);
                if iv <= 0.0 || vs <= 0.0 {
                    continue;
                }
                let ratio = model.increment_cross_raw(s, t).abs() / (iv * vs).sqrt();
                best = Some(best.map_or(ratio, |b: f64| b.max(ratio)));
            }
        }
        match best {
            Some(b) => betas.push(b),
            None => {
                return Err(Error::Precondition(format!(
                    "probe_p2: no admissible grid pairs for gamma = {gamma}; grid too coarse"
                )))
            }
        }
    }
    Ok(P2Report {
        gammas: gammas.to_vec(),
        betas,
    })
}
