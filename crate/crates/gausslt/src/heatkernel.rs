//! Gaussian heat kernel and its multi-index spatial derivatives.
//!
//! Mixed partials are evaluated through the probabilists'-Hermite identity
//! `p_eps^(k)(x) = (-1/sqrt(eps))^{|k|} prod_i He_{k_i}(x_i/sqrt(eps)) p_eps(x)`,
//! which is exact; the test suite certifies it against the defining Fourier
//! integral and against finite differences.

use crate::{Error, Result};

/// Multi-index of derivative orders, one per coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndex {
    orders: Vec<u32>,
}

impl MultiIndex {
    pub fn new(orders: Vec<u32>) -> Self {
        Self { orders }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            orders: vec![0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.orders.len()
    }

    /// |k| = sum of orders.
    pub fn total(&self) -> u32 {
        self.orders.iter().sum()
    }

    pub fn orders(&self) -> &[u32] {
        &self.orders
    }
}

/// Probabilists' Hermite polynomial He_n(u) by the three-term recursion.
#[inline]
pub fn hermite_he(n: u32, u: f64) -> f64 {
    let mut h0 = 1.0;
    if n == 0 {
        return h0;
    }
    let mut h1 = u;
    for m in 1..n {
        let h2 = u * h1 - m as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// d-dimensional Gaussian density with variance `eps` per coordinate.
pub fn heat_kernel(x: &[f64], eps: f64) -> Result<f64> {
    if eps <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "heat_kernel requires eps > 0, got {eps}"
        )));
    }
    Ok(heat_kernel_raw(x, eps))
}

#[inline]
pub(crate) fn heat_kernel_raw(x: &[f64], eps: f64) -> f64 {
    let d = x.len() as i32;
    let q: f64 = x.iter().map(|&xi| xi * xi).sum();
    (2.0 * std::f64::consts::PI * eps).powi(d).sqrt().recip() * (-q / (2.0 * eps)).exp()
}

/// Mixed partial `p_eps^(k)(x)` of the heat kernel.
pub fn heat_kernel_deriv(x: &[f64], eps: f64, k: &MultiIndex) -> Result<f64> {
    if eps <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "heat_kernel_deriv requires eps > 0, got {eps}"
        )));
    }
    if k.dim() != x.len() {
        return Err(Error::InvalidParameter(format!(
            "multi-index has dimension {} but point has dimension {}",
            k.dim(),
            x.len()
        )));
    }
    Ok(heat_kernel_deriv_raw(x, eps, k.orders()))
}

#[inline]
pub(crate) fn heat_kernel_deriv_raw(x: &[f64], eps: f64, orders: &[u32]) -> f64 {
    let total: u32 = orders.iter().sum();
    let inv_sqrt_eps = eps.sqrt().recip();
    let mut herm = 1.0;
    for (&xi, &ki) in x.iter().zip(orders) {
        if ki > 0 {
            herm *= hermite_he(ki, xi * inv_sqrt_eps);
        }
    }
    let sign_scale = (-inv_sqrt_eps).powi(total as i32);
    sign_scale * herm * heat_kernel_raw(x, eps)
}
