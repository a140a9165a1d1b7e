//! Quadrature-grade second moments of the regularized local-time derivative
//! `L^{(k)}_eps(T, x)`, via the reduction of the 2d-dimensional frequency
//! integral to per-coordinate closed forms.
//!
//! Two independent routes are provided:
//!
//! * `second_moment_general`: the ordered-domain decomposition
//!   `E|L|^2 = 2/(2 pi)^d (I1 + I2)`, where I1 integrates the aligned
//!   coordinate kernel and I2 the anti-aligned one over
//!   `D = {0 < t1 < t2 < T} x {0 < s1 < s2 < T}`;
//! * `second_moment_at_zero`: the full-square product formula available at
//!   `x = 0`.
//!
//! Both integrate with tensor Gauss-Legendre panels on meshes graded toward
//! the increment diagonals, where the integrand peaks at scale
//! `eps^{1/(2H)}`.

use crate::covariance::CovarianceModel;
use crate::heatkernel::{heat_kernel_deriv_raw, MultiIndex};
use crate::lemma_kernels::{lemma1_sum, lemma3_sum, CrossKernelParams, QuadKernelParams};
use crate::quad::Mesh1d;
use crate::{Error, Result};

/// Full experiment descriptor for one moment computation.
#[derive(Debug, Clone)]
pub struct FieldSpec {
    pub model1: CovarianceModel,
    pub model2: CovarianceModel,
    pub d: usize,
    pub k: MultiIndex,
    pub horizon: f64,
    pub x: Vec<f64>,
    pub eps: f64,
}

impl FieldSpec {
    pub fn new(
        model1: CovarianceModel,
        model2: CovarianceModel,
        d: usize,
        k: MultiIndex,
        horizon: f64,
        x: Vec<f64>,
        eps: f64,
    ) -> Result<Self> {
        model1.validate()?;
        model2.validate()?;
        if d == 0 {
            return Err(Error::InvalidParameter("d must be >= 1".into()));
        }
        if k.dim() != d {
            return Err(Error::InvalidParameter(format!(
                "multi-index k has length {} but d = {d}",
                k.dim()
            )));
        }
        if x.len() != d {
            return Err(Error::InvalidParameter(format!(
                "offset x has length {} but d = {d}",
                x.len()
            )));
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidParameter("T must be > 0".into()));
        }
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter("eps must be > 0".into()));
        }
        Ok(Self {
            model1,
            model2,
            d,
            k,
            horizon,
            x,
            eps,
        })
    }

    pub fn is_origin(&self) -> bool {
        self.x.iter().all(|&v| v == 0.0)
    }

    pub fn k_total(&self) -> u32 {
        self.k.total()
    }
}

/// Quadrature controls for the moment integrals.
#[derive(Debug, Clone, Copy)]
pub struct QuadPlan {
    /// Relative agreement required between successive refinements.
    pub rel_tol: f64,
    /// Gauss order per increment-axis panel at the coarsest level.
    pub g_increment: usize,
    /// Gauss order per base-axis panel at the coarsest level.
    pub g_base: usize,
    /// Number of refinement rounds allowed after the first comparison.
    pub max_refinements: usize,
}

impl Default for QuadPlan {
    fn default() -> Self {
        Self {
            rel_tol: 1e-3,
            g_increment: 6,
            g_base: 8,
            max_refinements: 2,
        }
    }
}

/// Per-node covariance statistics of one ordered time pair u1 < u2 of a
/// single scalar process, with its tensor quadrature weight.
#[derive(Debug, Clone, Copy)]
struct PairStats {
    inc_var: f64,
    inc_cross: f64,
    base_var: f64,
    var_hi: f64,
    var_lo: f64,
    cov: f64,
    w: f64,
}

/// Nodes over the ordered triangle {0 < u1 < u2 < T}, parametrized as
/// (delta, u1) with delta graded toward 0 at scale eps^{1/(2H)}.
fn triangle_stats(
    model: &CovarianceModel,
    horizon: f64,
    eps: f64,
    g_inc: usize,
    g_base: usize,
) -> Vec<PairStats> {
    let width = eps.powf(1.0 / (2.0 * model.hurst()));
    let inc_mesh = Mesh1d::graded(horizon, width);
    let inc_nodes = inc_mesh.nodes(g_inc);
    let mut out = Vec::with_capacity(inc_nodes.len() * g_base * 6);
    for &(delta, wd) in &inc_nodes {
        let base_mesh = Mesh1d::base(horizon - delta);
        for &(u1, wb) in &base_mesh.nodes(g_base) {
            let u2 = u1 + delta;
            let var_lo = model.variance(u1);
            let var_hi = model.variance(u2);
            let cov = model.cov_raw(u1, u2);
            out.push(PairStats {
                inc_var: (var_hi + var_lo - 2.0 * cov).max(0.0),
                inc_cross: cov - var_lo,
                base_var: var_lo,
                var_hi,
                var_lo,
                cov,
                w: wd * wb,
            });
        }
    }
    out
}

/// Distinct (k_i, x_i) pairs with multiplicities; coordinates sharing the
/// same order and offset contribute identical factors.
fn coordinate_groups(spec: &FieldSpec) -> Vec<(u32, f64, i32)> {
    let mut groups: Vec<(u32, f64, i32)> = Vec::new();
    for i in 0..spec.d {
        let ki = spec.k.orders()[i];
        let xi = spec.x[i];
        if let Some(g) = groups.iter_mut().find(|g| g.0 == ki && g.1 == xi) {
            g.2 += 1;
        } else {
            groups.push((ki, xi, 1));
        }
    }
    groups
}

/// Result of a moment quadrature, with convergence diagnostics. For the
/// general route `part1`/`part2` are the paper-decomposition integrals I1
/// and I2; for the origin route they are the aligned and anti-aligned
/// halves of the full square.
#[derive(Debug, Clone, Copy)]
pub struct MomentEstimate {
    pub value: f64,
    pub part1: f64,
    pub part2: f64,
    pub refinements: usize,
    pub rel_change: f64,
}

/// Aligned coordinate kernel F1 at one ordered time quadruple, coordinate i.
pub fn f1_coordinate(
    spec: &FieldSpec,
    t2: f64,
    t1: f64,
    s2: f64,
    s1: f64,
    i: usize,
) -> Result<f64> {
    check_ordered(spec, t2, t1, s2, s1, i)?;
    let a = spec.model1.increment_variance(t1, t2) + spec.model2.increment_variance(s1, s2);
    let b = spec.model1.increment_cross_raw(t1, t2) + spec.model2.increment_cross_raw(s1, s2);
    let c = spec.model1.variance(t1) + spec.model2.variance(s1);
    let p = QuadKernelParams::new(a, b, c, spec.eps, spec.x[i], spec.k.orders()[i])?;
    Ok(crate::lemma_kernels::lemma1_closed(&p))
}

/// Anti-aligned coordinate kernel F2 at one ordered time quadruple.
pub fn f2_coordinate(
    spec: &FieldSpec,
    t2: f64,
    t1: f64,
    s2: f64,
    s1: f64,
    i: usize,
) -> Result<f64> {
    check_ordered(spec, t2, t1, s2, s1, i)?;
    let p = CrossKernelParams::new(
        spec.model1.increment_variance(t1, t2),
        spec.model1.increment_cross_raw(t1, t2),
        spec.model1.variance(t1),
        spec.model2.increment_variance(s1, s2),
        spec.model2.increment_cross_raw(s1, s2),
        spec.model2.variance(s1),
        spec.eps,
        spec.x[i],
        spec.k.orders()[i],
    )?;
    Ok(crate::lemma_kernels::lemma2_closed(&p))
}

fn check_ordered(spec: &FieldSpec, t2: f64, t1: f64, s2: f64, s1: f64, i: usize) -> Result<()> {
    if !(0.0 < t1 && t1 < t2 && t2 < spec.horizon && 0.0 < s1 && s1 < s2 && s2 < spec.horizon) {
        return Err(Error::InvalidParameter(format!(
            "times must satisfy 0 < t1 < t2 < T and 0 < s1 < s2 < T, \
             got t=({t1}, {t2}), s=({s1}, {s2})"
        )));
    }
    if i >= spec.d {
        return Err(Error::InvalidParameter(format!(
            "coordinate index {i} out of range for d = {}",
            spec.d
        )));
    }
    Ok(())
}

/// E[|L^{(k)}_eps(T, x)|^2] by the ordered-domain decomposition; valid for
/// any offset x.
pub fn second_moment_general(spec: &FieldSpec, plan: &QuadPlan) -> Result<MomentEstimate> {
    let groups = coordinate_groups(spec);
    let eps = spec.eps;
    let eval = |g_inc: usize, g_base: usize| -> (f64, f64) {
        let t_stats = triangle_stats(&spec.model1, spec.horizon, eps, g_inc, g_base);
        let s_stats = triangle_stats(&spec.model2, spec.horizon, eps, g_inc, g_base);
        let mut i1 = 0.0;
        let mut i2 = 0.0;
        for t in &t_stats {
            for s in &s_stats {
                let a1 = t.inc_var + s.inc_var;
                let b1 = t.inc_cross + s.inc_cross;
                let c1 = t.base_var + s.base_var;
                // cross form reduced to the single form
                let a2 = a1;
                let b2 = t.inc_cross - s.inc_cross - s.inc_var;
                let c2 = t.base_var + s.base_var + s.inc_var + 2.0 * s.inc_cross;
                let mut p1 = 1.0;
                let mut p2 = 1.0;
                for &(ki, xi, mult) in &groups {
                    let f1 = lemma1_sum(a1, b1, c1, eps, xi, ki);
                    let f2 = lemma1_sum(a2, b2, c2, eps, xi, ki);
                    p1 *= f1.powi(mult);
                    p2 *= f2.powi(mult);
                }
                let w = t.w * s.w;
                i1 += w * p1;
                i2 += w * p2;
            }
        }
        (i1, i2)
    };
    refine(spec, plan, eval, |i1, i2| {
        2.0 / (2.0 * std::f64::consts::PI).powi(spec.d as i32) * (i1 + i2)
    })
}

/// E[|L^{(k)}_eps(T, 0)|^2] by the full-square product formula; requires
/// x = 0.
pub fn second_moment_at_zero(spec: &FieldSpec, plan: &QuadPlan) -> Result<MomentEstimate> {
    if !spec.is_origin() {
        return Err(Error::InvalidParameter(
            "second_moment_at_zero requires x = 0".into(),
        ));
    }
    let groups = coordinate_groups(spec);
    let eps = spec.eps;
    let eval = |g_inc: usize, g_base: usize| -> (f64, f64) {
        let t_stats = triangle_stats(&spec.model1, spec.horizon, eps, g_inc, g_base);
        let s_stats = triangle_stats(&spec.model2, spec.horizon, eps, g_inc, g_base);
        let mut aligned = 0.0;
        let mut swapped = 0.0;
        for t in &t_stats {
            for s in &s_stats {
                let b = t.cov + s.cov;
                let a_al = t.var_hi + s.var_hi;
                let c_al = t.var_lo + s.var_lo;
                let a_sw = t.var_hi + s.var_lo;
                let c_sw = t.var_lo + s.var_hi;
                let mut p_al = 1.0;
                let mut p_sw = 1.0;
                for &(ki, _, mult) in &groups {
                    p_al *= lemma3_sum(a_al, b, c_al, eps, ki).powi(mult);
                    p_sw *= lemma3_sum(a_sw, b, c_sw, eps, ki).powi(mult);
                }
                let w = t.w * s.w;
                aligned += w * p_al;
                swapped += w * p_sw;
            }
        }
        (aligned, swapped)
    };
    // the two ordered quadrants cover half the square each
    refine(spec, plan, eval, |al, sw| {
        2.0 / (2.0 * std::f64::consts::PI).powi(spec.d as i32) * (al + sw)
    })
}

fn refine(
    _spec: &FieldSpec,
    plan: &QuadPlan,
    eval: impl Fn(usize, usize) -> (f64, f64),
    combine: impl Fn(f64, f64) -> f64,
) -> Result<MomentEstimate> {
    let mut level = 0usize;
    let (mut p1, mut p2) = eval(plan.g_increment, plan.g_base);
    let mut prev = combine(p1, p2);
    loop {
        level += 1;
        let g_inc = plan.g_increment << level;
        let g_base = plan.g_base + 2 * level;
        let (q1, q2) = eval(g_inc, g_base);
        let value = combine(q1, q2);
        let rel = (value - prev).abs() / value.abs().max(1e-300);
        if rel <= plan.rel_tol {
            return Ok(MomentEstimate {
                value,
                part1: q1,
                part2: q2,
                refinements: level,
                rel_change: rel,
            });
        }
        if level > plan.max_refinements {
            return Err(Error::NonConvergence {
                prev,
                last: value,
            });
        }
        prev = value;
        p1 = q1;
        p2 = q2;
        let _ = (p1, p2);
    }
}

/// First moment E[L^{(k)}_eps(T, x)] by 2D quadrature of the heat-kernel
/// derivative at per-coordinate variance var1(t) + var2(s) + eps.
pub fn mean_l(spec: &FieldSpec, plan: &QuadPlan) -> Result<f64> {
    let orders = spec.k.orders();
    let eval = |g: usize| -> f64 {
        let mesh_t = Mesh1d::base(spec.horizon);
        let mesh_s = Mesh1d::base(spec.horizon);
        let t_nodes: Vec<(f64, f64, f64)> = mesh_t
            .nodes(g)
            .iter()
            .map(|&(t, w)| (t, w, spec.model1.variance(t)))
            .collect();
        let s_nodes: Vec<(f64, f64, f64)> = mesh_s
            .nodes(g)
            .iter()
            .map(|&(s, w)| (s, w, spec.model2.variance(s)))
            .collect();
        let mut total = 0.0;
        for &(_, wt, v1) in &t_nodes {
            for &(_, ws, v2) in &s_nodes {
                let var = v1 + v2 + spec.eps;
                total += wt * ws * heat_kernel_deriv_raw(&spec.x, var, orders);
            }
        }
        total
    };
    let mut prev = eval(plan.g_base);
    for level in 1..=(plan.max_refinements + 1) {
        let value = eval(plan.g_base + 4 * level);
        let rel = (value - prev).abs() / value.abs().max(1e-300);
        if rel <= plan.rel_tol {
            return Ok(value);
        }
        prev = value;
    }
    Err(Error::NonConvergence {
        prev,
        last: prev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bm_spec_1d(eps: f64, x: f64) -> FieldSpec {
        FieldSpec::new(
            CovarianceModel::fbm(0.5).unwrap(),
            CovarianceModel::fbm(0.5).unwrap(),
            1,
            MultiIndex::zeros(1),
            1.0,
            vec![x],
            eps,
        )
        .unwrap()
    }

    #[test]
    fn f1_hand_substitution() {
        let spec = bm_spec_1d(0.1, 0.0);
        // Brownian motion: increments independent of the past, var(t) = t
        let got = f1_coordinate(&spec, 0.8, 0.5, 0.7, 0.4, 0).unwrap();
        let a: f64 = 0.6;
        let delta: f64 = 0.9 + 0.1 - 0.01 / 0.8;
        let expect = (a + 0.2).powf(-0.5) * delta.powf(-0.5);
        assert_relative_eq!(got, expect, max_relative = 1e-13);

        let spec_x = bm_spec_1d(0.1, 0.5);
        let got_x = f1_coordinate(&spec_x, 0.8, 0.5, 0.7, 0.4, 0).unwrap();
        assert_relative_eq!(
            got_x,
            expect * (-0.25 / (2.0 * delta)).exp(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn f2_matches_oracle_point() {
        use crate::lemma_kernels::{oracle_quad2d, CrossKernelParams, OracleProblem};
        let spec = bm_spec_1d(0.1, 0.0);
        let got = f2_coordinate(&spec, 0.8, 0.5, 0.7, 0.4, 0).unwrap();
        let p = CrossKernelParams::new(0.3, 0.0, 0.5, 0.3, 0.0, 0.4, 0.1, 0.0, 0).unwrap();
        let oracle = oracle_quad2d(&OracleProblem::L2(p)).unwrap();
        assert_relative_eq!(got, oracle, max_relative = 1e-7);
    }

    #[test]
    fn f_coordinate_rejects_unordered_times() {
        let spec = bm_spec_1d(0.1, 0.0);
        assert!(f1_coordinate(&spec, 0.5, 0.8, 0.7, 0.4, 0).is_err());
        assert!(f2_coordinate(&spec, 0.8, 0.5, 0.4, 0.7, 0).is_err());
        assert!(f1_coordinate(&spec, 0.8, 0.5, 0.7, 0.4, 3).is_err());
    }

    #[test]
    fn at_zero_positive_and_monotone_in_eps() {
        let plan = QuadPlan::default();
        let mut prev = 0.0;
        for eps in [0.2, 0.1, 0.05] {
            let spec = bm_spec_1d(eps, 0.0);
            let m = second_moment_at_zero(&spec, &plan).unwrap().value;
            assert!(m > prev, "moment should increase as eps decreases");
            prev = m;
        }
    }

    #[test]
    fn general_smaller_off_origin() {
        let plan = QuadPlan::default();
        let at0 = second_moment_general(&bm_spec_1d(0.1, 0.0), &plan)
            .unwrap()
            .value;
        let off = second_moment_general(&bm_spec_1d(0.1, 0.5), &plan)
            .unwrap()
            .value;
        assert!(off < at0);
    }

    #[test]
    fn process_exchange_symmetry_k0() {
        let plan = QuadPlan::default();
        let m1 = CovarianceModel::fbm(0.6).unwrap();
        let m2 = CovarianceModel::subfbm(0.4).unwrap();
        let fwd = FieldSpec::new(m1, m2, 1, MultiIndex::zeros(1), 1.0, vec![0.0], 0.1).unwrap();
        let rev = FieldSpec::new(m2, m1, 1, MultiIndex::zeros(1), 1.0, vec![0.0], 0.1).unwrap();
        let a = second_moment_at_zero(&fwd, &plan).unwrap().value;
        let b = second_moment_at_zero(&rev, &plan).unwrap().value;
        assert_relative_eq!(a, b, max_relative = 2e-3);
    }

    #[test]
    fn mean_l_odd_order_vanishes() {
        let spec = FieldSpec::new(
            CovarianceModel::fbm(0.5).unwrap(),
            CovarianceModel::fbm(0.5).unwrap(),
            1,
            MultiIndex::new(vec![1]),
            1.0,
            vec![0.0],
            0.1,
        )
        .unwrap();
        let m = mean_l(&spec, &QuadPlan::default()).unwrap();
        assert!(m.abs() < 1e-14);
    }

    #[test]
    fn mean_l_positive_k0() {
        let m = mean_l(&bm_spec_1d(0.1, 0.0), &QuadPlan::default()).unwrap();
        assert!(m > 0.0);
    }

    #[test]
    fn spec_validation() {
        let m = CovarianceModel::fbm(0.5).unwrap();
        assert!(FieldSpec::new(m, m, 2, MultiIndex::zeros(1), 1.0, vec![0.0; 2], 0.1).is_err());
        assert!(FieldSpec::new(m, m, 1, MultiIndex::zeros(1), 1.0, vec![0.0], 0.0).is_err());
        assert!(FieldSpec::new(m, m, 1, MultiIndex::zeros(1), -1.0, vec![0.0], 0.1).is_err());
    }
}
