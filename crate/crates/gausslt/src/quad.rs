//! Gauss-Legendre panels and graded 1D meshes shared by the quadrature paths.

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
///
/// Newton iteration on the Legendre recursion; plenty for the orders used
/// here (n <= 64).
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = vec![(0.0, 0.0); n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_deriv(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (_, d2) = legendre_with_deriv(n, x);
                dp = d2;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out[i] = (-x, w);
        out[n - 1 - i] = (x, w);
    }
    if n % 2 == 1 {
        let (_, d) = legendre_with_deriv(n, 0.0);
        out[n / 2] = (0.0, 2.0 / (d * d));
    }
    out
}

fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let j = j as f64;
        let p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A 1D panel mesh given by its ordered edge list.
#[derive(Debug, Clone)]
pub struct Mesh1d {
    pub edges: Vec<f64>,
}

impl Mesh1d {
    pub fn uniform(a: f64, b: f64, panels: usize) -> Self {
        assert!(panels >= 1 && b > a);
        let edges = (0..=panels)
            .map(|i| a + (b - a) * i as f64 / panels as f64)
            .collect();
        Self { edges }
    }

    /// Mesh on (0, len) graded toward 0: edges {0, w, 2w, 4w, ...} capped at
    /// `len`. `width` is the scale of the integrand's peak at the origin.
    pub fn graded(len: f64, width: f64) -> Self {
        assert!(len > 0.0);
        let w = width.clamp(len * 1e-9, len / 4.0);
        let mut edges = vec![0.0, w];
        while *edges.last().unwrap() < len {
            let next = (edges.last().unwrap() * 2.0).min(len);
            edges.push(next);
        }
        Self { edges }
    }

    /// Fixed mesh on (0, len) with mild grading toward 0, for base-point
    /// variables whose integrand is smooth but has a corner singularity.
    pub fn base(len: f64) -> Self {
        let fractions = [0.0, 1.0 / 64.0, 1.0 / 16.0, 1.0 / 4.0, 1.0 / 2.0, 3.0 / 4.0, 1.0];
        Self {
            edges: fractions.iter().map(|f| f * len).collect(),
        }
    }

    /// Tensor nodes: g Gauss-Legendre points per panel.
    pub fn nodes(&self, g: usize) -> Vec<(f64, f64)> {
        let rule = gauss_legendre(g);
        let mut out = Vec::with_capacity(g * (self.edges.len() - 1));
        for win in self.edges.windows(2) {
            let (a, b) = (win[0], win[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for &(x, w) in &rule {
                out.push((mid + half * x, half * w));
            }
        }
        out
    }
}

/// Order-insensitive (pairwise) summation; keeps parallel fan-out of
/// independent contributions bit-deterministic when combined by index.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        // degree 2n-1 exactness
        for n in [2usize, 5, 12, 32] {
            let rule = gauss_legendre(n);
            let deg = 2 * n - 1;
            let val: f64 = rule.iter().map(|&(x, w)| w * x.powi(deg as i32 - 1)).sum();
            // integral of x^(deg-1) over [-1,1]
            let exact = if (deg - 1) % 2 == 0 {
                2.0 / deg as f64
            } else {
                0.0
            };
            assert!((val - exact).abs() < 1e-13, "n={n} got {val} want {exact}");
        }
    }

    #[test]
    fn gl_weights_sum_to_two() {
        for n in 1..=40 {
            let s: f64 = gauss_legendre(n).iter().map(|&(_, w)| w).sum();
            assert!((s - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mesh_nodes_integrate_exp() {
        let mesh = Mesh1d::graded(1.0, 1e-3);
        let val: f64 = mesh
            .nodes(12)
            .iter()
            .map(|&(x, w)| w * (-x).exp())
            .sum();
        assert!((val - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn pairwise_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = v.iter().sum();
        assert!((pairwise_sum(&v) - naive).abs() < 1e-9);
    }
}
