//! Multiresolution basis adapted to recursive splits, wavelet inner
//! products, the component variances sigma^2_{u,kappa}, and the variance
//! identity linking them to replication variance through gain
//! coefficients.
//!
//! The single-coordinate basis function at level k, cell t, child c is
//!   psi(x) = b^((k+1)/2) [x in narrow cell] - b^((k-1)/2) [x in wide cell],
//! scaled so its squared norm is (b-1)/b at every level. Products over a
//! coordinate subset u give the basis of the product domain.

use serde::Serialize;

use crate::analysis::gains::closed_form_gain;
use crate::analysis::{product_cell_integral, AnalysisError, QUADRATURE_REL_TOL};
use crate::domains::{ProductDomain, SplitScheme};
use crate::estimator::{replicate, variance_estimate, Integrand};
use crate::nets::DigitalNet;

/// Index of a product wavelet: coordinate subset u with per-coordinate
/// levels kappa, cell indices tau, and children gamma.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WaveletIndex {
    pub coords: Vec<usize>,
    pub levels: Vec<u32>,
    pub cells: Vec<u64>,
    pub children: Vec<u8>,
}

impl WaveletIndex {
    pub fn new(
        coords: Vec<usize>,
        levels: Vec<u32>,
        cells: Vec<u64>,
        children: Vec<u8>,
    ) -> Result<Self, AnalysisError> {
        let n = coords.len();
        if n == 0 || levels.len() != n || cells.len() != n || children.len() != n {
            return Err(AnalysisError::BadIndex(
                "coords, levels, cells, children must have equal nonzero length".into(),
            ));
        }
        if coords.windows(2).any(|w| w[0] >= w[1]) {
            return Err(AnalysisError::BadIndex(
                "coordinates must be strictly increasing".into(),
            ));
        }
        Ok(WaveletIndex {
            coords,
            levels,
            cells,
            children,
        })
    }

    fn validate(&self, dom: &ProductDomain) -> Result<(), AnalysisError> {
        let b = dom.base() as u64;
        for (((&j, &k), &t), &c) in self
            .coords
            .iter()
            .zip(&self.levels)
            .zip(&self.cells)
            .zip(&self.children)
        {
            if j >= dom.s() {
                return Err(AnalysisError::BadIndex(format!(
                    "coordinate {} out of range",
                    j
                )));
            }
            if t >= b.pow(k) {
                return Err(AnalysisError::BadIndex(format!(
                    "cell index {} out of range at level {}",
                    t, k
                )));
            }
            if c as u64 >= b {
                return Err(AnalysisError::BadIndex(format!("child {} out of range", c)));
            }
        }
        Ok(())
    }
}

/// Single-coordinate basis function, membership resolved by cell
/// addressing of x rather than direct floating-point geometry.
pub fn psi_eval(scheme: &SplitScheme, k: u32, t: u64, c: u8, x: &[f64]) -> f64 {
    let b = scheme.base as f64;
    let path = scheme.locate(x, k as usize + 1);
    let wide = scheme.cell_at(k, t).path;
    if path[..k as usize] != wide[..] {
        return 0.0;
    }
    let w_term = b.powf((k as f64 - 1.0) / 2.0);
    if path[k as usize] == c {
        b.powf((k as f64 + 1.0) / 2.0) - w_term
    } else {
        -w_term
    }
}

/// Normalized integrals of f over the b^|u| child-product cells of the
/// wide cells named by (u, kappa, tau), at quadrature refinement `extra`.
/// Entry index encodes gamma' in base b, first coordinate fastest.
fn child_integrals(f: &Integrand, dom: &ProductDomain, idx: &WaveletIndex, extra: u32) -> Vec<f64> {
    let b = dom.base() as usize;
    let u = idx.coords.len();
    let mut paths: Vec<Vec<u8>> = vec![Vec::new(); dom.s()];
    for ((&j, &k), &t) in idx.coords.iter().zip(&idx.levels).zip(&idx.cells) {
        paths[j] = dom.component(j).cell_at(k, t).path;
        paths[j].push(0);
    }
    let total = b.pow(u as u32);
    let mut out = Vec::with_capacity(total);
    for mut flat in 0..total {
        for &j in &idx.coords {
            let c = (flat % b) as u8;
            flat /= b;
            *paths[j].last_mut().expect("narrow path has a child slot") = c;
        }
        out.push(product_cell_integral(f, dom, &paths, extra));
    }
    out
}

/// Inner product and an unsigned magnitude for convergence scaling.
fn inner_product_from_children(
    dom: &ProductDomain,
    idx: &WaveletIndex,
    integrals: &[f64],
) -> (f64, f64) {
    let b = dom.base() as usize;
    let bf = b as f64;
    let norm: f64 = idx
        .levels
        .iter()
        .map(|&k| bf.powf((k as f64 - 1.0) / 2.0))
        .product();
    let mut acc = 0.0;
    let mut mass = 0.0;
    for (entry, &integral) in integrals.iter().enumerate() {
        let mut coeff = 1.0;
        let mut flat = entry;
        for &c in &idx.children {
            let cp = (flat % b) as u8;
            flat /= b;
            coeff *= if cp == c { bf - 1.0 } else { -1.0 };
        }
        acc += coeff * integral;
        mass += (coeff * integral).abs();
    }
    (norm * acc, norm * mass)
}

/// <f, psi_{u kappa tau gamma}> by composite centroid quadrature over the
/// level-(k_j + q) refinement of each involved cell, accepted only when
/// depths q and q+1 agree to the declared relative tolerance.
pub fn inner_product(
    f: &Integrand,
    dom: &ProductDomain,
    idx: &WaveletIndex,
    q: u32,
) -> Result<f64, AnalysisError> {
    if q < 1 {
        return Err(AnalysisError::BadIndex(
            "quadrature depth q must be >= 1".into(),
        ));
    }
    idx.validate(dom)?;
    let coarse_tab = child_integrals(f, dom, idx, q);
    let fine_tab = child_integrals(f, dom, idx, q + 1);
    let (coarse, _) = inner_product_from_children(dom, idx, &coarse_tab);
    let (fine, mass) = inner_product_from_children(dom, idx, &fine_tab);
    accept(coarse, fine, mass)?;
    Ok(fine)
}

fn accept(coarse: f64, fine: f64, mass: f64) -> Result<(), AnalysisError> {
    let scale = fine.abs().max(mass).max(1e-300);
    if (fine - coarse).abs() > QUADRATURE_REL_TOL * scale {
        return Err(AnalysisError::QuadratureNotConverged {
            coarse,
            fine,
            rel_tol: QUADRATURE_REL_TOL,
        });
    }
    Ok(())
}

/// nu_{u,kappa}(x): the finite sum over tau, gamma of <f, psi> psi(x).
/// Only the tau addressing x contributes; the gamma sum runs over all
/// b^|u| children.
pub fn nu_eval(
    f: &Integrand,
    dom: &ProductDomain,
    coords: &[usize],
    levels: &[u32],
    x: &[f64],
    q: u32,
) -> Result<f64, AnalysisError> {
    let b = dom.base() as usize;
    let bf = b as f64;
    // locate x's wide cells and narrow children in each active coordinate
    let mut cells = Vec::with_capacity(coords.len());
    let mut xout = Vec::with_capacity(coords.len());
    for (&j, &k) in coords.iter().zip(levels) {
        let comp = dom.component(j);
        let off = dom.coord_offset(j);
        let path = comp.locate(&x[off..off + comp.dim()], k as usize + 1);
        let t = path[..k as usize]
            .iter()
            .fold(0u64, |acc, &d| acc * b as u64 + d as u64);
        cells.push(t);
        xout.push(path[k as usize]);
    }
    let idx = WaveletIndex::new(
        coords.to_vec(),
        levels.to_vec(),
        cells,
        vec![0; coords.len()],
    )?;
    idx.validate(dom)?;
    let coarse_tab = child_integrals(f, dom, &idx, q);
    let fine_tab = child_integrals(f, dom, &idx, q + 1);
    let eval = |tab: &[f64]| -> (f64, f64) {
        // nu(x) = sum_gamma <f, psi_gamma> psi_gamma(x); expanding both
        // factors over the child table gives the quadratic form below
        let mut acc = 0.0;
        let mut mass = 0.0;
        for gamma_flat in 0..tab.len() {
            let mut gamma = Vec::with_capacity(coords.len());
            let mut g = gamma_flat;
            for _ in coords {
                gamma.push((g % b) as u8);
                g /= b;
            }
            let gi = WaveletIndex {
                coords: idx.coords.clone(),
                levels: idx.levels.clone(),
                cells: idx.cells.clone(),
                children: gamma.clone(),
            };
            let (ip, m) = inner_product_from_children(dom, &gi, tab);
            let mut psi_val = 1.0;
            for (pos, &k) in levels.iter().enumerate() {
                let w_term = bf.powf((k as f64 - 1.0) / 2.0);
                psi_val *= if gamma[pos] == xout[pos] {
                    bf.powf((k as f64 + 1.0) / 2.0) - w_term
                } else {
                    -w_term
                };
            }
            acc += ip * psi_val;
            mass += m * psi_val.abs();
        }
        (acc, mass)
    };
    let (coarse, _) = eval(&coarse_tab);
    let (fine, mass) = eval(&fine_tab);
    accept(coarse, fine, mass)?;
    Ok(fine)
}

/// sigma^2_{u,kappa} = integral of nu^2 over the domain, computed as the
/// exact cell-wise sum of squared nu values times cell volumes (nu is
/// constant on products of narrow cells).
pub fn sigma_uk(
    f: &Integrand,
    dom: &ProductDomain,
    coords: &[usize],
    levels: &[u32],
    q: u32,
) -> Result<f64, AnalysisError> {
    let run = |extra: u32| -> (f64, f64) {
        let b = dom.base() as usize;
        let u = coords.len();
        // odometer over wide-cell products tau
        let wide_counts: Vec<u64> = levels.iter().map(|&k| (b as u64).pow(k)).collect();
        let total_tau: u64 = wide_counts.iter().product();
        let mut acc = 0.0;
        let mut mass = 0.0;
        for mut tau_flat in 0..total_tau {
            let mut cells = Vec::with_capacity(u);
            for &count in &wide_counts {
                cells.push(tau_flat % count);
                tau_flat /= count;
            }
            let idx = WaveletIndex {
                coords: coords.to_vec(),
                levels: levels.to_vec(),
                cells,
                children: vec![0; u],
            };
            let tab = child_integrals(f, dom, &idx, extra);
            // inner products for every gamma, then the pair sum with
            // integral of psi_gamma psi_gamma' = prod (1[c=c'] - 1/b)
            let n_gamma = tab.len();
            let mut ips = Vec::with_capacity(n_gamma);
            for gamma_flat in 0..n_gamma {
                let mut gamma = Vec::with_capacity(u);
                let mut g = gamma_flat;
                for _ in 0..u {
                    gamma.push((g % b) as u8);
                    g /= b;
                }
                let gi = WaveletIndex {
                    coords: coords.to_vec(),
                    levels: levels.to_vec(),
                    cells: idx.cells.clone(),
                    children: gamma,
                };
                ips.push(inner_product_from_children(dom, &gi, &tab));
            }
            for (ga, &(ip_a, m_a)) in ips.iter().enumerate() {
                for (gb, &(ip_b, m_b)) in ips.iter().enumerate() {
                    let mut weight = 1.0;
                    let (mut fa, mut fb) = (ga, gb);
                    for _ in 0..u {
                        let (ca, cb) = ((fa % b) as u8, (fb % b) as u8);
                        fa /= b;
                        fb /= b;
                        weight *= if ca == cb {
                            1.0 - 1.0 / b as f64
                        } else {
                            -1.0 / b as f64
                        };
                    }
                    acc += weight * ip_a * ip_b;
                    mass += (weight * m_a * m_b).abs();
                }
            }
        }
        (acc, mass)
    };
    let (coarse, _) = run(q);
    let (fine, mass) = run(q + 1);
    accept(coarse, fine, mass.max(fine.abs()))?;
    Ok(fine)
}

/// sigma_k^2 on a single-component base-4 triangle domain via the
/// eigenvector expansion over cell integrals:
/// sum_t sum_{l=1}^{b-1} b^(k+1)/(l(l+1)) [ sum_{i<=l} (I_{t,i-1} - I_{t,l}) ]^2.
pub fn triangle_sigma_k(
    f: &Integrand,
    dom: &ProductDomain,
    k: u32,
    q: u32,
) -> Result<f64, AnalysisError> {
    if dom.s() != 1 || dom.base() != 4 || dom.component(0).dim() != 2 {
        return Err(AnalysisError::Unsupported(
            "triangle_sigma_k needs a single base-4 triangle component".into(),
        ));
    }
    let run = |extra: u32| -> (f64, f64) {
        let b = 4usize;
        let bf = 4.0f64;
        let mut acc = 0.0;
        let mut mass = 0.0;
        let mut path = vec![0u8; k as usize + 1];
        for t in 0..(b as u64).pow(k) {
            let mut tt = t;
            for slot in path[..k as usize].iter_mut().rev() {
                *slot = (tt % b as u64) as u8;
                tt /= b as u64;
            }
            let mut integrals = [0.0; 4];
            for (c, slot) in integrals.iter_mut().enumerate() {
                path[k as usize] = c as u8;
                *slot = product_cell_integral(f, dom, std::slice::from_ref(&path), extra);
            }
            for l in 1..b {
                let mut inner = 0.0;
                for i in 1..=l {
                    inner += integrals[i - 1] - integrals[l];
                }
                let term = bf.powi(k as i32 + 1) / (l as f64 * (l as f64 + 1.0)) * inner * inner;
                acc += term;
                mass += term.abs() + bf.powi(k as i32 + 1) * integrals[l].abs().powi(2);
            }
        }
        (acc, mass)
    };
    let (coarse, _) = run(q);
    let (fine, mass) = run(q + 1);
    accept(coarse, fine, mass.max(fine.abs()))?;
    Ok(fine)
}

/// Result of comparing replication variance against the gain-weighted
/// wavelet decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub schema_version: u32,
    pub n: usize,
    pub replications: usize,
    pub k_max: u32,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    /// Geometric bound on the truncated levels beyond k_max, from the
    /// observed per-level decay ratio, doubled for safety.
    pub tail_bound: f64,
    /// Normal-theory standard error of the lhs variance estimate.
    pub lhs_se: f64,
    pub levels: Vec<LevelTerm>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelTerm {
    pub k: u32,
    pub gain: f64,
    pub sigma_sq: f64,
}

/// Compares the replication variance of the equal-weight estimator (lhs)
/// against (1/n) sum_k Gamma_{1,k} sigma_k^2 truncated at k_max (rhs),
/// on a single-component domain.
#[allow(clippy::too_many_arguments)]
pub fn variance_identity_check(
    f: &Integrand,
    net: &DigitalNet,
    dom: &ProductDomain,
    k_max: u32,
    reps: usize,
    seed: u64,
    q: u32,
    threads: usize,
) -> Result<IdentityCheck, AnalysisError> {
    if dom.s() != 1 {
        return Err(AnalysisError::Unsupported(
            "the variance identity check enumerates levels for single-component domains only"
                .into(),
        ));
    }
    if net.n() > 4096 {
        return Err(AnalysisError::Unsupported(
            "identity check is meant for small nets".into(),
        ));
    }
    let estimates = replicate(f, net, dom, reps, seed, threads)?;
    let lhs = variance_estimate(&estimates)?;
    let lhs_se = lhs * (2.0 / (reps as f64 - 1.0)).sqrt();

    let n = net.n() as f64;
    let mut rhs = 0.0;
    let mut levels = Vec::new();
    let mut sigmas = Vec::new();
    for k in 0..=k_max {
        let gain = closed_form_gain(net.base, net.m, 1, k).to_f64();
        let sigma_sq = sigma_uk(f, dom, &[0], &[k], q)?;
        rhs += gain * sigma_sq / n;
        levels.push(LevelTerm { k, gain, sigma_sq });
        sigmas.push(sigma_sq);
    }
    // decay ratio of the last resolved levels, floored at the theoretical
    // b^(-2/d) rate and capped below 1
    let d = dom.component(0).dim() as f64;
    let floor = (dom.base() as f64).powf(-2.0 / d);
    let ratio = if k_max >= 1 && sigmas[k_max as usize - 1] > 0.0 {
        (sigmas[k_max as usize] / sigmas[k_max as usize - 1])
            .max(floor)
            .min(0.9)
    } else {
        floor
    };
    let tail_bound = 2.0 * sigmas[k_max as usize] * ratio / (1.0 - ratio) / n;
    let gap = (lhs - rhs).abs();
    Ok(IdentityCheck {
        schema_version: crate::estimator::SCHEMA_VERSION,
        n: net.n(),
        replications: reps,
        k_max,
        lhs,
        rhs,
        gap,
        tail_bound,
        lhs_se,
        levels,
    })
}
