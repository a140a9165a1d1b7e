//! Divergence-rate experiments: the criticality index, the rate function
//! h(eps), the L^2-existence predicate, eps-sweeps of the second moment
//! with ratio/slope diagnostics, and the Gaussian-in-x shape probe.

use crate::moments::{second_moment_at_zero, second_moment_general, FieldSpec, QuadPlan};
use crate::pathsim::{mc_moments, PathGrid};
use crate::{Error, Result};

/// Scalar parameters governing existence and divergence rate.
#[derive(Debug, Clone, Copy)]
pub struct RateSpec {
    pub h1: f64,
    pub h2: f64,
    pub d: usize,
    pub k_abs: u32,
    theta: f64,
}

impl RateSpec {
    pub fn new(h1: f64, h2: f64, d: usize, k_abs: u32) -> Result<Self> {
        if !(0.0 < h1 && h1 < 1.0 && 0.0 < h2 && h2 < 1.0) {
            return Err(Error::InvalidParameter(
                "Hurst indices must lie in (0, 1)".into(),
            ));
        }
        if d == 0 {
            return Err(Error::InvalidParameter("d must be >= 1".into()));
        }
        let theta = h1 * h2 / (h1 + h2) * (2.0 * k_abs as f64 + d as f64);
        Ok(Self {
            h1,
            h2,
            d,
            k_abs,
            theta,
        })
    }

    pub fn from_field(spec: &FieldSpec) -> Result<Self> {
        Self::new(
            spec.model1.hurst(),
            spec.model2.hurst(),
            spec.d,
            spec.k_total(),
        )
    }

    /// Criticality index theta = H1 H2 / (H1 + H2) * (2|k| + d).
    pub fn theta(&self) -> f64 {
        self.theta
    }
}

const CRITICAL_TOL: f64 = 1e-12;

/// Divergence normalization h(eps): a power of eps when theta > 1,
/// ln(1 + eps^{-1/2}) when theta = 1 (within 1e-12).
pub fn rate_h(r: &RateSpec, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter("eps must be > 0".into()));
    }
    if r.theta < 1.0 - CRITICAL_TOL {
        return Err(Error::Precondition(
            "subcritical: L^(k) exists, rate undefined".into(),
        ));
    }
    if (r.theta - 1.0).abs() <= CRITICAL_TOL {
        return Ok((1.0 + eps.powf(-0.5)).ln());
    }
    let exponent = (r.h1 + r.h2) / (2.0 * r.h1 * r.h2) - r.d as f64 / 2.0 - r.k_abs as f64;
    Ok(eps.powf(exponent))
}

/// True iff the k-th derivative of local time exists in L^2 (theta < 1,
/// boundary counted as non-existence).
pub fn exists_in_l2(r: &RateSpec) -> bool {
    r.theta < 1.0 - CRITICAL_TOL
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepSource {
    Quad,
    Mc,
}

impl std::fmt::Display for SweepSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepSource::Quad => write!(f, "QUAD"),
            SweepSource::Mc => write!(f, "MC"),
        }
    }
}

/// One row of a rate experiment.
#[derive(Debug, Clone, Copy)]
pub struct SweepRecord {
    pub eps: f64,
    pub moment: f64,
    pub h: f64,
    pub ratio: f64,
    pub source: SweepSource,
}

#[derive(Debug, Clone, Copy)]
pub struct McParams {
    pub grid_n: usize,
    pub replicates: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub source: SweepSource,
    pub mc: Option<McParams>,
    pub jobs: usize,
    /// Lift the default 1e-4 lower bound on QUAD eps values.
    pub allow_small_eps: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            source: SweepSource::Quad,
            mc: None,
            jobs: 1,
            allow_small_eps: false,
        }
    }
}

const QUAD_EPS_FLOOR: f64 = 1e-4;

/// Second-moment sweep over a strictly decreasing eps grid; records carry
/// the ratio moment / h(eps). Row order equals `eps_list` order even when
/// points run on multiple threads.
pub fn sweep(
    template: &FieldSpec,
    eps_list: &[f64],
    opts: &SweepOptions,
    plan: &QuadPlan,
) -> Result<Vec<SweepRecord>> {
    if eps_list.is_empty() {
        return Err(Error::InvalidParameter("eps list must be nonempty".into()));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter(
            "eps list must be strictly decreasing".into(),
        ));
    }
    if eps_list.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidParameter("eps values must be > 0".into()));
    }
    if opts.source == SweepSource::Quad
        && !opts.allow_small_eps
        && eps_list.iter().any(|&e| e < QUAD_EPS_FLOOR)
    {
        return Err(Error::Precondition(format!(
            "QUAD eps below the default floor {QUAD_EPS_FLOOR}; \
             pass --allow-small-eps to override"
        )));
    }
    if opts.source == SweepSource::Mc && opts.mc.is_none() {
        return Err(Error::InvalidParameter(
            "MC source requires grid/replicate parameters".into(),
        ));
    }
    let rate = RateSpec::from_field(template)?;
    // validate the regime once up front so a bad spec fails before any work
    rate_h(&rate, eps_list[0])?;

    let point = |eps: f64| -> Result<SweepRecord> {
        let mut spec = template.clone();
        spec.eps = eps;
        let moment = match opts.source {
            SweepSource::Quad => {
                if spec.is_origin() {
                    second_moment_at_zero(&spec, plan)?.value
                } else {
                    second_moment_general(&spec, plan)?.value
                }
            }
            SweepSource::Mc => {
                let mc = opts.mc.unwrap();
                let grid = PathGrid::new(mc.grid_n, spec.horizon)?;
                mc_moments(&spec, &grid, mc.replicates, mc.seed)?.second_moment
            }
        };
        let h = rate_h(&rate, eps)?;
        Ok(SweepRecord {
            eps,
            moment,
            h,
            ratio: moment / h,
            source: opts.source,
        })
    };

    let jobs = opts.jobs.max(1).min(eps_list.len());
    if jobs == 1 {
        return eps_list.iter().map(|&e| point(e)).collect();
    }
    let mut slots: Vec<Option<Result<SweepRecord>>> = (0..eps_list.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let point = &point;
        let mut handles = Vec::new();
        for (stride, chunk) in slots.chunks_mut(1).enumerate().collect::<Vec<_>>() {
            let eps = eps_list[stride];
            handles.push(scope.spawn(move || {
                chunk[0] = Some(point(eps));
            }));
            if handles.len() == jobs {
                handles.drain(..).for_each(|h| h.join().unwrap());
            }
        }
        handles.drain(..).for_each(|h| h.join().unwrap());
    });
    slots.into_iter().map(|s| s.unwrap()).collect()
}

/// Least-squares slope of log(moment) against log(eps).
pub fn fit_slope(records: &[SweepRecord]) -> Result<f64> {
    if records.len() < 4 {
        return Err(Error::Precondition(
            "slope fit needs at least 4 sweep records".into(),
        ));
    }
    let pts: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (r.eps.ln(), r.moment.ln()))
        .collect();
    least_squares_slope(&pts)
}

fn least_squares_slope(pts: &[(f64, f64)]) -> Result<f64> {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-14 * n * sxx.abs().max(1.0) {
        return Err(Error::Precondition(
            "degenerate design: eps values do not separate in log scale".into(),
        ));
    }
    Ok((n * sxy - sx * sy) / denom)
}

/// Moments along the first coordinate axis at fixed eps, plus the fitted
/// Gaussian shape log(moment) ~ log(c1) - c2 |x|^2.
#[derive(Debug, Clone)]
pub struct XShapeReport {
    pub points: Vec<(f64, f64)>,
    pub log_c1: f64,
    pub c2: f64,
}

pub fn x_shape_probe(
    template: &FieldSpec,
    x_magnitudes: &[f64],
    plan: &QuadPlan,
) -> Result<XShapeReport> {
    if x_magnitudes.len() < 2 {
        return Err(Error::InvalidParameter(
            "x-shape probe needs at least 2 magnitudes".into(),
        ));
    }
    let mut points = Vec::with_capacity(x_magnitudes.len());
    for &mag in x_magnitudes {
        if mag < 0.0 {
            return Err(Error::InvalidParameter("|x| must be >= 0".into()));
        }
        let mut spec = template.clone();
        spec.x = vec![0.0; spec.d];
        spec.x[0] = mag;
        let moment = if spec.is_origin() {
            second_moment_at_zero(&spec, plan)?.value
        } else {
            second_moment_general(&spec, plan)?.value
        };
        points.push((mag, moment));
    }
    if template.k_total() == 0 {
        for w in points.windows(2) {
            if w[0].0 < w[1].0 && w[1].1 > w[0].1 {
                return Err(Error::InternalConsistency(format!(
                    "k = 0 moment increased from |x| = {} to |x| = {}",
                    w[0].0, w[1].0
                )));
            }
        }
    }
    let fit_pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|p| (p.0 * p.0, p.1.ln()))
        .collect();
    if fit_pts.len() < 2 {
        return Err(Error::Precondition(
            "too few positive moments for a shape fit".into(),
        ));
    }
    let slope = least_squares_slope(&fit_pts)?;
    let n = fit_pts.len() as f64;
    let mean_x: f64 = fit_pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y: f64 = fit_pts.iter().map(|p| p.1).sum::<f64>() / n;
    Ok(XShapeReport {
        points,
        log_c1: mean_y - slope * mean_x,
        c2: -slope,
    })
}
