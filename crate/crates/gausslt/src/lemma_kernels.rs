//! Closed-form bivariate Gaussian moment integrals and their brute-force
//! quadrature oracle.
//!
//! Three scalar integral identities are implemented:
//!
//! * `lemma1_closed`: the mollified quadratic-form integral with polynomial
//!   factor `y2^k (y1-y2)^k` and frequency offset `x`, as a triple
//!   combinatorial sum;
//! * `lemma2_closed`: the two-process cross variant, evaluated by reducing
//!   its quadratic form to the first identity;
//! * `lemma3_closed`: the symmetric `y1^k y2^k` variant used by the
//!   origin fast path.
//!
//! Coefficients are computed in exact i128 arithmetic (the alternating sums
//! cancel badly in floating point) and converted once. `oracle_quad2d`
//! integrates the defining 2D integrals directly and never touches the
//! closed-form path.

use crate::quad::{gauss_legendre, Mesh1d};
use crate::{Error, Result};

const MAX_ORDER: u32 = 8;

/// Parameters (a, b, c, eps, x, k) of the single-form integral; construction
/// checks `Delta = c + eps - (b - eps)^2 / (a + 2 eps) > 0`.
#[derive(Debug, Clone, Copy)]
pub struct QuadKernelParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub eps: f64,
    pub x: f64,
    pub k: u32,
    delta: f64,
}

impl QuadKernelParams {
    pub fn new(a: f64, b: f64, c: f64, eps: f64, x: f64, k: u32) -> Result<Self> {
        if !(a > 0.0 && c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "QuadKernelParams requires a > 0 and c > 0, got a={a}, c={c}"
            )));
        }
        if eps < 0.0 {
            return Err(Error::InvalidParameter("eps must be >= 0".into()));
        }
        if k > MAX_ORDER {
            return Err(Error::InvalidParameter(format!(
                "derivative order k <= {MAX_ORDER} supported, got {k}"
            )));
        }
        let delta = c + eps - (b - eps).powi(2) / (a + 2.0 * eps);
        if delta <= 0.0 {
            return Err(Error::Precondition(format!(
                "QuadKernelParams requires Delta > 0, got Delta = {delta}"
            )));
        }
        Ok(Self {
            a,
            b,
            c,
            eps,
            x,
            k,
            delta,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Parameters of the cross-form integral; construction checks
/// `Delta' = c1 + c2 + a2 + 2 b2 + eps - (b1 - b2 - a2 - eps)^2 / (a1 + a2 + 2 eps) > 0`.
///
/// `a2 = b2 = c2 = 0` (degenerate second process) is allowed; it reduces the
/// cross form exactly to the single form.
#[derive(Debug, Clone, Copy)]
pub struct CrossKernelParams {
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
    pub eps: f64,
    pub x: f64,
    pub k: u32,
    delta_prime: f64,
}

impl CrossKernelParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a1: f64,
        b1: f64,
        c1: f64,
        a2: f64,
        b2: f64,
        c2: f64,
        eps: f64,
        x: f64,
        k: u32,
    ) -> Result<Self> {
        if !(a1 > 0.0 && c1 > 0.0 && a2 >= 0.0 && c2 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "CrossKernelParams requires a1, c1 > 0 and a2, c2 >= 0, \
                 got a1={a1}, c1={c1}, a2={a2}, c2={c2}"
            )));
        }
        if eps < 0.0 {
            return Err(Error::InvalidParameter("eps must be >= 0".into()));
        }
        if k > MAX_ORDER {
            return Err(Error::InvalidParameter(format!(
                "derivative order k <= {MAX_ORDER} supported, got {k}"
            )));
        }
        let delta_prime = c1 + c2 + a2 + 2.0 * b2 + eps
            - (b1 - b2 - a2 - eps).powi(2) / (a1 + a2 + 2.0 * eps);
        if delta_prime <= 0.0 {
            return Err(Error::Precondition(format!(
                "CrossKernelParams requires Delta' > 0, got Delta' = {delta_prime}"
            )));
        }
        Ok(Self {
            a1,
            b1,
            c1,
            a2,
            b2,
            c2,
            eps,
            x,
            k,
            delta_prime,
        })
    }

    pub fn delta_prime(&self) -> f64 {
        self.delta_prime
    }
}

/// Parameters of the symmetric-form integral; construction checks
/// `(a + eps)(c + eps) - b^2 > 0`.
#[derive(Debug, Clone, Copy)]
pub struct SymKernelParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub eps: f64,
    pub k: u32,
}

impl SymKernelParams {
    pub fn new(a: f64, b: f64, c: f64, eps: f64, k: u32) -> Result<Self> {
        if !(a > 0.0 && c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "SymKernelParams requires a > 0 and c > 0, got a={a}, c={c}"
            )));
        }
        if eps < 0.0 {
            return Err(Error::InvalidParameter("eps must be >= 0".into()));
        }
        if k > MAX_ORDER {
            return Err(Error::InvalidParameter(format!(
                "derivative order k <= {MAX_ORDER} supported, got {k}"
            )));
        }
        let det = (a + eps) * (c + eps) - b * b;
        if det <= 0.0 {
            return Err(Error::Precondition(format!(
                "SymKernelParams requires (a+eps)(c+eps) - b^2 > 0, got {det}"
            )));
        }
        Ok(Self { a, b, c, eps, k })
    }

    pub fn det(&self) -> f64 {
        (self.a + self.eps) * (self.c + self.eps) - self.b * self.b
    }
}

fn binom_i128(n: u32, k: u32) -> i128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: i128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as i128 / (i + 1) as i128;
    }
    acc
}

/// Double factorial with the conventions (-1)!! = 1 and 0!! = 1.
fn double_factorial(n: i64) -> i128 {
    if n <= 0 {
        return 1;
    }
    let mut acc: i128 = 1;
    let mut m = n;
    while m > 1 {
        acc *= m as i128;
        m -= 2;
    }
    acc
}

fn coeff_i128(k: u32, l: u32, m: u32, n: u32) -> i128 {
    let sign = if (l as i64 - ((m + n) / 2) as i64).rem_euclid(2) == 0 {
        1
    } else {
        -1
    };
    sign * binom_i128(k, l)
        * binom_i128(k + l, m)
        * binom_i128(2 * k - m, n)
        * double_factorial(m as i64 - 1)
        * double_factorial(n as i64 - 1)
}

/// Coefficient c_{k,l,m,n} of the triple sum:
/// `(-1)^{l-(m+n)/2} C(k,l) C(k+l,m) C(2k-m,n) (m-1)!! (n-1)!!`.
pub fn coeff_cklmn(k: u32, l: u32, m: u32, n: u32) -> Result<f64> {
    if l > k {
        return Err(Error::InvalidParameter(format!(
            "coeff_cklmn requires l <= k, got l={l}, k={k}"
        )));
    }
    if m % 2 != 0 || m > k + l {
        return Err(Error::InvalidParameter(format!(
            "coeff_cklmn requires even m <= k + l, got m={m}"
        )));
    }
    if n % 2 != 0 || n > 2 * k - m {
        return Err(Error::InvalidParameter(format!(
            "coeff_cklmn requires even n <= 2k - m, got n={n}"
        )));
    }
    if k > MAX_ORDER {
        return Err(Error::InvalidParameter(format!(
            "coeff_cklmn supports k <= {MAX_ORDER}"
        )));
    }
    Ok(coeff_i128(k, l, m, n) as f64)
}

/// Triple combinatorial sum behind the single-form identity; raw hot path.
/// Callers guarantee a + 2 eps > 0 and Delta > 0.
#[inline]
pub(crate) fn lemma1_sum(a: f64, b: f64, c: f64, eps: f64, x: f64, k: u32) -> f64 {
    let a2e = a + 2.0 * eps;
    let delta = c + eps - (b - eps) * (b - eps) / a2e;
    debug_assert!(a2e > 0.0 && delta > 0.0);
    let ratio = (eps - b) / a2e;
    // every exponent is a half-integer: sqrt + powi avoids powf in the
    // quadrature hot path
    let inv_sqrt_a = 1.0 / a2e.sqrt();
    let inv_sqrt_d = 1.0 / delta.sqrt();
    let mut total = 0.0;
    for l in 0..=k {
        let mut m = 0;
        while m <= k + l {
            let a_pow = inv_sqrt_a.powi((m + 1) as i32);
            let r_pow = ratio.powi((k + l - m) as i32);
            let mut n = 0;
            while n <= 2 * k - m {
                let coeff = coeff_i128(k, l, m, n) as f64;
                let d_pow = inv_sqrt_d.powi((2 * (2 * k - m) + 1 - n) as i32);
                // convention 0^0 = 1 at x = 0 (powi already honors it)
                let x_pow = x.powi((2 * k - m - n) as i32);
                total += coeff * a_pow * r_pow * d_pow * x_pow;
                n += 2;
            }
            m += 2;
        }
    }
    total * (-x * x / (2.0 * delta)).exp()
}

/// Closed form of the single-form integral.
pub fn lemma1_closed(p: &QuadKernelParams) -> f64 {
    lemma1_sum(p.a, p.b, p.c, p.eps, p.x, p.k)
}

/// Closed form of the cross-form integral, by reduction of its quadratic
/// form to the single form with
/// `(a, b, c) = (a1 + a2, b1 - b2 - a2, c1 + c2 + a2 + 2 b2)`.
pub fn lemma2_closed(p: &CrossKernelParams) -> f64 {
    lemma1_sum(
        p.a1 + p.a2,
        p.b1 - p.b2 - p.a2,
        p.c1 + p.c2 + p.a2 + 2.0 * p.b2,
        p.eps,
        p.x,
        p.k,
    )
}

/// Single sum behind the symmetric identity; raw hot path. Callers
/// guarantee `(a+eps)(c+eps) - b^2 > 0`.
#[inline]
pub(crate) fn lemma3_sum(a: f64, b: f64, c: f64, eps: f64, k: u32) -> f64 {
    let det = (a + eps) * (c + eps) - b * b;
    debug_assert!(det > 0.0);
    let inv_sqrt_det = 1.0 / det.sqrt();
    let mut total = 0.0;
    let mut l = 0;
    while l <= k {
        let coeff = (double_factorial(l as i64 - 1)
            * binom_i128(k, l)
            * double_factorial((2 * k - l) as i64 - 1)) as f64;
        let b_pow = b.powi((k - l) as i32);
        total += coeff * b_pow * inv_sqrt_det.powi((2 * k - l + 1) as i32);
        l += 2;
    }
    total
}

/// Closed form of the symmetric integral:
/// `sum_{l even} (l-1)!! C(k,l) (2k-l-1)!! b^{k-l} / det^{(2k-l+1)/2}`.
pub fn lemma3_closed(p: &SymKernelParams) -> f64 {
    lemma3_sum(p.a, p.b, p.c, p.eps, p.k)
}

/// Which lemma integral the oracle evaluates.
#[derive(Debug, Clone, Copy)]
pub enum OracleProblem {
    L1(QuadKernelParams),
    L2(CrossKernelParams),
    L3(SymKernelParams),
}

impl OracleProblem {
    /// Regularized quadratic-form matrix [[q11, q12], [q12, q22]] in (y1, y2).
    fn form_matrix(&self) -> (f64, f64, f64) {
        match *self {
            Self::L1(p) => (p.c + p.eps, p.b - p.eps, p.a + 2.0 * p.eps),
            Self::L2(p) => (
                p.c1 + p.c2 + p.a2 + 2.0 * p.b2 + p.eps,
                p.b1 - p.b2 - p.a2 - p.eps,
                p.a1 + p.a2 + 2.0 * p.eps,
            ),
            Self::L3(p) => (p.c + p.eps, p.b, p.a + p.eps),
        }
    }

    /// Exponent argument (the full quadratic form, including the eps
    /// mollifier) and polynomial factor of the defining integrand.
    #[inline]
    fn integrand(&self, y1: f64, y2: f64) -> f64 {
        match *self {
            Self::L1(p) => {
                let q = p.a * y2 * y2
                    + 2.0 * p.b * y1 * y2
                    + p.c * y1 * y1
                    + p.eps * ((y1 - y2) * (y1 - y2) + y2 * y2);
                (-0.5 * q).exp() * y2.powi(p.k as i32) * (y1 - y2).powi(p.k as i32)
            }
            Self::L2(p) => {
                let q = p.a1 * y2 * y2
                    + 2.0 * p.b1 * y1 * y2
                    + p.c1 * y1 * y1
                    + p.a2 * (y1 - y2) * (y1 - y2)
                    + 2.0 * p.b2 * (y1 - y2) * y1
                    + p.c2 * y1 * y1
                    + p.eps * ((y1 - y2) * (y1 - y2) + y2 * y2);
                (-0.5 * q).exp() * y2.powi(p.k as i32) * (y1 - y2).powi(p.k as i32)
            }
            Self::L3(p) => {
                let q = p.a * y2 * y2
                    + 2.0 * p.b * y1 * y2
                    + p.c * y1 * y1
                    + p.eps * (y1 * y1 + y2 * y2);
                (-0.5 * q).exp() * (y1 * y2).powi(p.k as i32)
            }
        }
    }

    fn k_and_x(&self) -> (u32, f64) {
        match *self {
            Self::L1(p) => (p.k, p.x),
            Self::L2(p) => (p.k, p.x),
            Self::L3(p) => (p.k, 0.0),
        }
    }

    /// Closed-form value of the same integral the oracle evaluates.
    pub fn closed(&self) -> f64 {
        match self {
            Self::L1(p) => lemma1_closed(p),
            Self::L2(p) => lemma2_closed(p),
            Self::L3(p) => lemma3_closed(p),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::L1(_) => "single",
            Self::L2(_) => "cross",
            Self::L3(_) => "symmetric",
        }
    }
}

/// Random valid parameter draw for one of the three closed forms
/// (`kind` in 1..=3), rejection-sampled until the positivity constraints
/// hold. `k` is uniform on {0, 1, 2, 3}.
pub fn sample_problem(kind: u8, rng: &mut impl rand::Rng) -> Result<OracleProblem> {
    if !(1..=3).contains(&kind) {
        return Err(Error::InvalidParameter(format!(
            "lemma kind must be 1, 2 or 3, got {kind}"
        )));
    }
    loop {
        let k: u32 = rng.gen_range(0..=3);
        let eps = rng.gen_range(0.05..0.5);
        let x = rng.gen_range(-1.0..1.0);
        let triple = |rng: &mut dyn rand::RngCore| {
            use rand::Rng;
            let a: f64 = rng.gen_range(0.2..2.0);
            let c: f64 = rng.gen_range(0.2..2.0);
            let b = rng.gen_range(-0.9..0.9) * (a * c).sqrt();
            (a, b, c)
        };
        let attempt = match kind {
            1 => {
                let (a, b, c) = triple(rng);
                QuadKernelParams::new(a, b, c, eps, x, k).map(OracleProblem::L1)
            }
            2 => {
                let (a1, b1, c1) = triple(rng);
                let (a2, b2, c2) = triple(rng);
                CrossKernelParams::new(a1, b1, c1, a2, b2, c2, eps, x, k).map(OracleProblem::L2)
            }
            _ => {
                let (a, b, c) = triple(rng);
                SymKernelParams::new(a, b, c, eps, k).map(OracleProblem::L3)
            }
        };
        if let Ok(problem) = attempt {
            return Ok(problem);
        }
    }
}

/// Brute-force 2D quadrature of the defining integral of a lemma.
///
/// Truncates to the square [-R, R]^2 with R tied to the smallest eigenvalue
/// of the regularized quadratic form so the Gaussian tail is negligible, and
/// evaluates at two resolutions; disagreement or a nonvanishing imaginary
/// part is an error.
pub fn oracle_quad2d(problem: &OracleProblem) -> Result<f64> {
    let (q11, q12, q22) = problem.form_matrix();
    let tr = q11 + q22;
    let det = q11 * q22 - q12 * q12;
    if det <= 0.0 || tr <= 0.0 {
        return Err(Error::Precondition(format!(
            "oracle_quad2d: regularized quadratic form not positive definite \
             (trace {tr}, det {det})"
        )));
    }
    let lambda_min = 0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt());
    let radius = 10.0 / lambda_min.sqrt();

    let coarse = oracle_pass(problem, radius, 11, 40);
    let fine = oracle_pass(problem, radius, 15, 44);
    let (re_c, _) = coarse;
    let (re_f, im_f) = fine;

    let scale = re_f.abs().max(1e-12);
    if (re_f - re_c).abs() > 1e-8 * scale {
        return Err(Error::NonConvergence {
            prev: re_c,
            last: re_f,
        });
    }
    if im_f.abs() > 1e-8 * scale {
        return Err(Error::InternalConsistency(format!(
            "oracle imaginary residual {im_f} exceeds tolerance for result {re_f}"
        )));
    }
    Ok(re_f)
}

fn oracle_pass(problem: &OracleProblem, radius: f64, panels: usize, g: usize) -> (f64, f64) {
    let (k, x) = problem.k_and_x();
    let rule = gauss_legendre(g);
    let mesh = Mesh1d::uniform(-radius, radius, panels);
    let mut nodes = Vec::with_capacity(panels * g);
    for win in mesh.edges.windows(2) {
        let half = 0.5 * (win[1] - win[0]);
        let mid = 0.5 * (win[0] + win[1]);
        for &(u, w) in &rule {
            nodes.push((mid + half * u, half * w));
        }
    }
    let mut re = 0.0;
    let mut im = 0.0;
    for &(y1, w1) in &nodes {
        let (cos_x, sin_x) = if x == 0.0 {
            (1.0, 0.0)
        } else {
            ((y1 * x).cos(), (y1 * x).sin())
        };
        let mut row = 0.0;
        for &(y2, w2) in &nodes {
            row += w2 * problem.integrand(y1, y2);
        }
        re += w1 * row * cos_x;
        im += w1 * row * sin_x;
    }
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    let norm = sign / (2.0 * std::f64::consts::PI);
    (norm * re, norm * im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn coeff_examples() {
        assert_eq!(coeff_cklmn(0, 0, 0, 0).unwrap(), 1.0);
        assert_eq!(coeff_cklmn(1, 0, 0, 0).unwrap(), 1.0);
        // sign exponent l - (m+n)/2 = 1 - 1 = 0, all binomials and double
        // factorials are 1; the oracle-equivalence suite pins the sign
        assert_eq!(coeff_cklmn(1, 1, 2, 0).unwrap(), 1.0);
        assert_eq!(coeff_cklmn(1, 0, 0, 2).unwrap(), -1.0);
        assert_eq!(coeff_cklmn(1, 1, 0, 0).unwrap(), -1.0);
    }

    #[test]
    fn coeff_rejects_bad_indices() {
        assert!(coeff_cklmn(1, 2, 0, 0).is_err()); // l > k
        assert!(coeff_cklmn(2, 0, 1, 0).is_err()); // odd m
        assert!(coeff_cklmn(2, 0, 0, 6).is_err()); // n > 2k - m
    }

    #[test]
    fn lemma1_standard_gaussian() {
        let p = QuadKernelParams::new(1.0, 0.0, 1.0, 0.0, 0.0, 0).unwrap();
        assert_relative_eq!(p.delta(), 1.0);
        assert_relative_eq!(lemma1_closed(&p), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn lemma1_k0_formula() {
        let (a, b, c, eps, x) = (2.0, 0.5, 1.0, 0.1, 0.7);
        let p = QuadKernelParams::new(a, b, c, eps, x, 0).unwrap();
        let delta: f64 = 1.1 - 0.16 / 2.2;
        let expect = (a + 2.0 * eps).powf(-0.5) * delta.powf(-0.5) * (-x * x / (2.0 * delta)).exp();
        assert_relative_eq!(lemma1_closed(&p), expect, max_relative = 1e-13);
        assert_relative_eq!(oracle_quad2d(&OracleProblem::L1(p)).unwrap(), expect, max_relative = 1e-8);
    }

    #[test]
    fn lemma1_k2_against_oracle() {
        let p = QuadKernelParams::new(1.5, -0.3, 2.0, 0.05, 1.2, 2).unwrap();
        let oracle = oracle_quad2d(&OracleProblem::L1(p)).unwrap();
        assert_relative_eq!(lemma1_closed(&p), oracle, max_relative = 1e-7);
    }

    #[test]
    fn lemma2_symmetric_point() {
        let p = CrossKernelParams::new(1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0).unwrap();
        assert_relative_eq!(p.delta_prime(), 2.5);
        // quadratic form 3 y1^2 - 2 y1 y2 + 2 y2^2 has determinant 5
        let expect = 5.0f64.powf(-0.5);
        assert_relative_eq!(lemma2_closed(&p), expect, max_relative = 1e-13);
        assert_relative_eq!(
            oracle_quad2d(&OracleProblem::L2(p)).unwrap(),
            expect,
            max_relative = 1e-8
        );
    }

    #[test]
    fn lemma2_degenerates_to_lemma1() {
        let p1 = QuadKernelParams::new(1.3, 0.4, 2.1, 0.2, 0.6, 2).unwrap();
        let p2 = CrossKernelParams::new(1.3, 0.4, 1.1, 0.0, 0.0, 1.0, 0.2, 0.6, 2).unwrap();
        assert_relative_eq!(lemma2_closed(&p2), lemma1_closed(&p1), max_relative = 1e-13);
    }

    #[test]
    fn lemma3_k1_value() {
        let p = SymKernelParams::new(2.0, 1.0, 2.0, 0.0, 1).unwrap();
        assert_relative_eq!(lemma3_closed(&p), 3.0f64.powf(-1.5), max_relative = 1e-13);
        assert_relative_eq!(
            oracle_quad2d(&OracleProblem::L3(p)).unwrap(),
            3.0f64.powf(-1.5),
            max_relative = 1e-7
        );
    }

    #[test]
    fn lemma3_k0_unit() {
        let p = SymKernelParams::new(1.0, 0.0, 1.0, 0.0, 0).unwrap();
        assert_relative_eq!(lemma3_closed(&p), 1.0);
    }

    #[test]
    fn lemma3_k2_against_oracle() {
        let p = SymKernelParams::new(1.0, 0.8, 3.0, 0.2, 2).unwrap();
        let oracle = oracle_quad2d(&OracleProblem::L3(p)).unwrap();
        assert_relative_eq!(lemma3_closed(&p), oracle, max_relative = 1e-7);
    }

    #[test]
    fn indefinite_form_rejected() {
        assert!(SymKernelParams::new(1.0, 2.0, 1.0, 0.0, 0).is_err());
    }
}
