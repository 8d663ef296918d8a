//! Gain coefficients, multiresolution wavelets, and the variance
//! decomposition that ties scrambled-net variance to plain Monte Carlo.
//!
//! All integrals here are taken with respect to the normalized
//! (probability) measure of the product domain, so cell volumes are pure
//! powers of the base and the wavelet normalization is scale-free.

mod gains;
mod wavelets;

pub use gains::{
    closed_form_gain, empirical_gain, gain_lower_bound, gain_minimizer_value, upsilon, GainEntry,
    GainTable, Ratio,
};
pub use wavelets::{
    inner_product, nu_eval, psi_eval, sigma_uk, triangle_sigma_k, variance_identity_check,
    IdentityCheck, WaveletIndex,
};

use std::fmt;

use crate::domains::ProductDomain;
use crate::estimator::{EstimatorError, Integrand};

#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisError {
    /// Composite centroid quadrature failed the q vs q+1 Richardson check.
    QuadratureNotConverged {
        coarse: f64,
        fine: f64,
        rel_tol: f64,
    },
    BadIndex(String),
    Unsupported(String),
    Estimator(EstimatorError),
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalysisError::QuadratureNotConverged {
                coarse,
                fine,
                rel_tol,
            } => write!(
                f,
                "quadrature not converged: {} at depth q vs {} at q+1 (rel tol {})",
                coarse, fine, rel_tol
            ),
            AnalysisError::BadIndex(msg) => write!(f, "bad wavelet index: {}", msg),
            AnalysisError::Unsupported(msg) => write!(f, "{}", msg),
            AnalysisError::Estimator(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for AnalysisError {}

impl From<EstimatorError> for AnalysisError {
    fn from(e: EstimatorError) -> Self {
        AnalysisError::Estimator(e)
    }
}

/// Relative tolerance for the q vs q+1 quadrature acceptance.
pub const QUADRATURE_REL_TOL: f64 = 1e-6;

/// Composite centroid rule over a product cell, in the normalized
/// measure: each coordinate's cell (addressed by `paths[j]`) is refined
/// `extra` further levels and f is evaluated at product centroids.
///
/// The rule respects cell boundaries exactly, so indicator
/// discontinuities of the wavelets never straddle a quadrature panel.
pub(crate) fn product_cell_integral(
    f: &Integrand,
    dom: &ProductDomain,
    paths: &[Vec<u8>],
    extra: u32,
) -> f64 {
    debug_assert_eq!(paths.len(), dom.s());
    let b = dom.base() as f64;
    // per-coordinate refined centroid lists
    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(dom.s());
    let mut weight = 1.0;
    for (j, comp) in dom.components().iter().enumerate() {
        let cell = comp.cell_region(&paths[j]);
        let sub = crate::domains::SplitScheme {
            region: cell,
            base: comp.base,
        }
        .cells_at_level(extra);
        let d = comp.dim();
        let mut centroids = vec![0.0; sub.len() * d];
        for (i, r) in sub.iter().enumerate() {
            r.centroid_into(&mut centroids[i * d..(i + 1) * d]);
        }
        weight *= b.powi(-((paths[j].len() as u32 + extra) as i32));
        axes.push(centroids);
    }
    let dims: Vec<usize> = dom.components().iter().map(|c| c.dim()).collect();
    let counts: Vec<usize> = axes.iter().zip(&dims).map(|(a, d)| a.len() / d).collect();
    let total: usize = counts.iter().product();
    let mut point = vec![0.0; dom.total_dim()];
    let mut acc = 0.0;
    for mut flat in 0..total {
        let mut off = 0;
        for (j, &count) in counts.iter().enumerate() {
            let idx = flat % count;
            flat /= count;
            let d = dims[j];
            point[off..off + d].copy_from_slice(&axes[j][idx * d..(idx + 1) * d]);
            off += d;
        }
        acc += f.eval(&point);
    }
    acc * weight
}

/// Mean of f under the normalized measure over a product of cells
/// (`paths[j]` addresses coordinate j's cell; empty means the whole
/// region), by the centroid rule at a fixed refinement depth.
pub fn quadrature_mean_at(
    f: &Integrand,
    dom: &ProductDomain,
    paths: &[Vec<u8>],
    extra: u32,
) -> f64 {
    let cell_fraction: f64 = paths
        .iter()
        .map(|p| (dom.base() as f64).powi(-(p.len() as i32)))
        .product();
    product_cell_integral(f, dom, paths, extra) / cell_fraction
}

/// Runs the quadrature at depths q and q+1 and applies the Richardson
/// acceptance check; returns the finer value.
pub fn checked_integral(
    f: &Integrand,
    dom: &ProductDomain,
    paths: &[Vec<u8>],
    q: u32,
) -> Result<f64, AnalysisError> {
    let coarse = product_cell_integral(f, dom, paths, q);
    let fine = product_cell_integral(f, dom, paths, q + 1);
    let scale = fine.abs().max(1e-12);
    if (fine - coarse).abs() > QUADRATURE_REL_TOL * scale {
        return Err(AnalysisError::QuadratureNotConverged {
            coarse,
            fine,
            rel_tol: QUADRATURE_REL_TOL,
        });
    }
    Ok(fine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::SplitScheme;
    use crate::estimator::Integrand;

    #[test]
    fn quadrature_is_exact_for_linears_on_triangles() {
        let dom = ProductDomain::triangles(1);
        let f = Integrand::new("lin", |x: &[f64]| 3.0 * x[0] - x[1] + 2.0);
        // E_P[x1] = E_P[x2] = 1/3 on the unit triangle
        let exact = 3.0 / 3.0 - 1.0 / 3.0 + 2.0;
        for q in 0..4 {
            let got = product_cell_integral(&f, &dom, &[vec![]], q);
            assert!((got - exact).abs() < 1e-13, "q={}: {}", q, got);
        }
    }

    #[test]
    fn quadrature_converges_for_smooth_integrands() {
        let dom = ProductDomain::new(vec![SplitScheme::interval(0.0, 1.0, 2).unwrap()]).unwrap();
        let f = Integrand::new("exp", |x: &[f64]| x[0].exp());
        let exact = std::f64::consts::E - 1.0;
        let fine = checked_integral(&f, &dom, &[vec![]], 9).unwrap();
        assert!((fine - exact).abs() < 1e-6, "{}", fine);
        // midpoint error halves by 4 per level
        let e1 = (product_cell_integral(&f, &dom, &[vec![]], 3) - exact).abs();
        let e2 = (product_cell_integral(&f, &dom, &[vec![]], 4) - exact).abs();
        assert!(e2 < e1 / 3.0);
    }

    #[test]
    fn quadrature_flags_rough_integrands() {
        let dom = ProductDomain::new(vec![SplitScheme::interval(0.0, 1.0, 2).unwrap()]).unwrap();
        // integrable singularity: depths 1 and 2 disagree far beyond tol
        let f = Integrand::new("rsqrt", |x: &[f64]| x[0].sqrt().recip());
        assert!(matches!(
            checked_integral(&f, &dom, &[vec![]], 1),
            Err(AnalysisError::QuadratureNotConverged { .. })
        ));
    }

    #[test]
    fn product_cells_multiply_weights() {
        let dom = ProductDomain::triangles(2);
        let one = Integrand::new("one", |_: &[f64]| 1.0);
        // integral of 1 over a level-1 x level-2 product cell in dP
        let got = product_cell_integral(&one, &dom, &[vec![2], vec![3, 1]], 2);
        assert!((got - 4f64.powi(-3)).abs() < 1e-15);
    }
}
