//! Experiment runners: variance decay against sample size, empirical
//! normality of standardized estimates, confidence-interval coverage,
//! paired SGN-vs-MC interval widths, and gain tables — each emitted as a
//! CSV table or a versioned JSON document.
//!
//! Every runner is deterministic under its seed: replication keys are
//! derived from (seed, replication index), the index space is partitioned
//! up front, and aggregation merges by index.

use serde::Serialize;

use crate::analysis::{closed_form_gain, GainTable};
use crate::domains::ProductDomain;
use crate::estimator::{
    build_report, confidence_interval, mc_replicate, replicate, standardized_w, variance_estimate,
    EstimateReport, EstimatorError, Integrand, SCHEMA_VERSION,
};
use crate::field::FieldTable;
use crate::nets::{default_depth, faure_generators, generate_net, DigitalNet};
use crate::scramble::mix64;
use crate::stats::ks_test_normal;

/// Distinct replication-key streams for the samplers and batches.
fn stream(seed: u64, tag: u64) -> u64 {
    mix64(seed ^ mix64(tag))
}

const MC_STREAM: u64 = 0x6d63_0001;
const SIGMA_STREAM: u64 = 0x5347_0002;
const CENTER_STREAM: u64 = 0x4345_0003;

fn build_net(b: u8, s: usize, m: u32) -> Result<DigitalNet, EstimatorError> {
    let field = FieldTable::new(b).map_err(crate::nets::NetError::from)?;
    let gen = faure_generators(field, s, m as usize)?;
    Ok(generate_net(&gen, default_depth(b, m))?)
}

/// Least-squares slope of log(y) against log(x).
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

// ---------------------------------------------------------------------
// variance decay
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct VarianceDecayRow {
    pub m: u32,
    pub n: usize,
    pub var_sgn: f64,
    pub var_mc: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceDecay {
    pub schema_version: u32,
    pub integrand: String,
    pub domain: String,
    pub replications: usize,
    pub seed: u64,
    pub slope_sgn: f64,
    pub slope_mc: f64,
    pub rows: Vec<VarianceDecayRow>,
}

/// Estimated variance of both samplers for each m in the range.
pub fn run_variance_decay(
    f: &Integrand,
    dom: &ProductDomain,
    m_range: std::ops::RangeInclusive<u32>,
    reps: usize,
    seed: u64,
    threads: usize,
) -> Result<VarianceDecay, EstimatorError> {
    let mut rows = Vec::new();
    for m in m_range {
        let net = build_net(dom.base(), dom.s(), m)?;
        let n = net.n();
        let sgn = replicate(f, &net, dom, reps, stream(seed, m as u64), threads)?;
        let mc = mc_replicate(
            f,
            dom,
            n,
            net.depth,
            reps,
            stream(seed, MC_STREAM ^ m as u64),
            threads,
        )?;
        rows.push(VarianceDecayRow {
            m,
            n,
            var_sgn: variance_estimate(&sgn)?,
            var_mc: variance_estimate(&mc)?,
        });
    }
    let pts_sgn: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.var_sgn > 0.0)
        .map(|r| (r.n as f64, r.var_sgn))
        .collect();
    let pts_mc: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.var_mc > 0.0)
        .map(|r| (r.n as f64, r.var_mc))
        .collect();
    Ok(VarianceDecay {
        schema_version: SCHEMA_VERSION,
        integrand: f.name().into(),
        domain: dom.describe(),
        replications: reps,
        seed,
        slope_sgn: if pts_sgn.len() >= 2 {
            log_log_slope(&pts_sgn)
        } else {
            f64::NAN
        },
        slope_mc: if pts_mc.len() >= 2 {
            log_log_slope(&pts_mc)
        } else {
            f64::NAN
        },
        rows,
    })
}

impl VarianceDecay {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,n,var_sgn,var_mc\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.m, r.n, r.var_sgn, r.var_mc));
        }
        out
    }
}

// ---------------------------------------------------------------------
// normality
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct NormalityRun {
    pub schema_version: u32,
    pub integrand: String,
    pub domain: String,
    pub m: u32,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub mu: f64,
    pub ks_distance: f64,
    pub ks_pvalue: f64,
    pub w_samples: Vec<f64>,
}

/// Standardized estimates W_l at one m, with their KS distance to N(0,1).
pub fn run_normality(
    f: &Integrand,
    dom: &ProductDomain,
    m: u32,
    reps: usize,
    seed: u64,
    threads: usize,
) -> Result<NormalityRun, EstimatorError> {
    let mu = f
        .known_mean()
        .ok_or_else(|| EstimatorError::NoKnownMean(f.name().into()))?;
    let net = build_net(dom.base(), dom.s(), m)?;
    let estimates = replicate(f, &net, dom, reps, stream(seed, m as u64), threads)?;
    let w = standardized_w(&estimates, mu)?;
    let (ks_distance, ks_pvalue) = ks_test_normal(&w);
    Ok(NormalityRun {
        schema_version: SCHEMA_VERSION,
        integrand: f.name().into(),
        domain: dom.describe(),
        m,
        n: net.n(),
        replications: reps,
        seed,
        mu,
        ks_distance,
        ks_pvalue,
        w_samples: w,
    })
}

impl NormalityRun {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ell,w\n");
        for (i, w) in self.w_samples.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, w));
        }
        out
    }
}

// ---------------------------------------------------------------------
// confidence-interval coverage
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct CiRow {
    pub index: usize,
    pub center: f64,
    pub lo: f64,
    pub hi: f64,
    pub contains_mu: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CiCoverage {
    pub schema_version: u32,
    pub integrand: String,
    pub domain: String,
    pub m: u32,
    pub n: usize,
    pub alpha: f64,
    pub mu: f64,
    pub intervals: usize,
    pub sigma_replications: usize,
    pub groups: usize,
    pub sigma_inflation: f64,
    pub seed: u64,
    pub coverage: f64,
    pub rows: Vec<CiRow>,
}

/// Builds `intervals` confidence intervals, each centered at a fresh
/// replication estimate with width from a sigma batch of
/// `sigma_replications` independent replications (shared within a group
/// of intervals), and counts how many contain the known mean.
///
/// `sigma_inflation` scales the width; 1.0 is the honest interval and
/// larger values are the fault-injection mode for calibration tests.
#[allow(clippy::too_many_arguments)]
pub fn run_ci_coverage(
    f: &Integrand,
    dom: &ProductDomain,
    m: u32,
    intervals: usize,
    sigma_replications: usize,
    groups: usize,
    alpha: f64,
    sigma_inflation: f64,
    seed: u64,
    threads: usize,
) -> Result<CiCoverage, EstimatorError> {
    let mu = f
        .known_mean()
        .ok_or_else(|| EstimatorError::NoKnownMean(f.name().into()))?;
    let net = build_net(dom.base(), dom.s(), m)?;
    let groups = groups.clamp(1, intervals);
    let mut rows = Vec::with_capacity(intervals);
    let mut covered = 0usize;
    for g in 0..groups {
        let lo = intervals * g / groups;
        let hi = intervals * (g + 1) / groups;
        let sigma_batch = replicate(
            f,
            &net,
            dom,
            sigma_replications,
            stream(seed, SIGMA_STREAM ^ ((g as u64) << 8)),
            threads,
        )?;
        let sigma = variance_estimate(&sigma_batch)?.sqrt() * sigma_inflation;
        let centers = replicate(
            f,
            &net,
            dom,
            hi - lo,
            stream(seed, CENTER_STREAM ^ ((g as u64) << 8)),
            threads,
        )?;
        for (i, &center) in centers.iter().enumerate() {
            let (ci_lo, ci_hi) = confidence_interval(center, sigma, alpha)?;
            let contains = ci_lo <= mu && mu <= ci_hi;
            covered += contains as usize;
            rows.push(CiRow {
                index: lo + i + 1,
                center,
                lo: ci_lo,
                hi: ci_hi,
                contains_mu: contains,
            });
        }
    }
    Ok(CiCoverage {
        schema_version: SCHEMA_VERSION,
        integrand: f.name().into(),
        domain: dom.describe(),
        m,
        n: net.n(),
        alpha,
        mu,
        intervals,
        sigma_replications,
        groups,
        sigma_inflation,
        seed,
        coverage: covered as f64 / intervals as f64,
        rows,
    })
}

impl CiCoverage {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,center,lo,hi,contains_mu\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.index, r.center, r.lo, r.hi, r.contains_mu
            ));
        }
        out
    }
}

// ---------------------------------------------------------------------
// SGN vs MC interval widths
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ComparePair {
    pub index: usize,
    pub sgn_lo: f64,
    pub sgn_hi: f64,
    pub mc_lo: f64,
    pub mc_hi: f64,
    pub sgn_width: f64,
    pub mc_width: f64,
    pub sgn_narrower: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct McCompare {
    pub schema_version: u32,
    pub integrand: String,
    pub domain: String,
    pub m: u32,
    pub n: usize,
    pub alpha: f64,
    pub pairs: usize,
    pub sigma_replications: usize,
    pub seed: u64,
    pub frac_sgn_narrower: f64,
    /// Deterministic quadrature value for the mean, with a conservative
    /// error bound from comparing two refinement depths.
    pub oracle_mu: Option<f64>,
    pub oracle_mu_error: Option<f64>,
    pub rows: Vec<ComparePair>,
}

/// Paired SGN and MC confidence intervals at one sample size. Each pair
/// draws a fresh sigma batch and a fresh center for both samplers.
#[allow(clippy::too_many_arguments)]
pub fn run_mc_compare(
    f: &Integrand,
    dom: &ProductDomain,
    m: u32,
    pairs: usize,
    sigma_replications: usize,
    alpha: f64,
    seed: u64,
    threads: usize,
    oracle_depth: Option<u32>,
) -> Result<McCompare, EstimatorError> {
    let net = build_net(dom.base(), dom.s(), m)?;
    let n = net.n();
    let mut rows = Vec::with_capacity(pairs);
    let mut narrower = 0usize;
    for p in 0..pairs {
        let tag = (p as u64) << 16;
        let sgn_batch = replicate(
            f,
            &net,
            dom,
            sigma_replications + 1,
            stream(seed, tag ^ 1),
            threads,
        )?;
        let mc_batch = mc_replicate(
            f,
            dom,
            n,
            net.depth,
            sigma_replications + 1,
            stream(seed, tag ^ MC_STREAM),
            threads,
        )?;
        // first replication is the center, the rest feed sigma
        let sgn_sigma = variance_estimate(&sgn_batch[1..])?.sqrt();
        let mc_sigma = variance_estimate(&mc_batch[1..])?.sqrt();
        let (sgn_lo, sgn_hi) = confidence_interval(sgn_batch[0], sgn_sigma, alpha)?;
        let (mc_lo, mc_hi) = confidence_interval(mc_batch[0], mc_sigma, alpha)?;
        let sgn_width = sgn_hi - sgn_lo;
        let mc_width = mc_hi - mc_lo;
        let is_narrower = sgn_width < mc_width;
        narrower += is_narrower as usize;
        rows.push(ComparePair {
            index: p + 1,
            sgn_lo,
            sgn_hi,
            mc_lo,
            mc_hi,
            sgn_width,
            mc_width,
            sgn_narrower: is_narrower,
        });
    }
    let (oracle_mu, oracle_mu_error) = match oracle_depth {
        Some(depth) => {
            let (mu, err) = quadrature_mean(f, dom, depth);
            (Some(mu), Some(err))
        }
        None => (None, None),
    };
    Ok(McCompare {
        schema_version: SCHEMA_VERSION,
        integrand: f.name().into(),
        domain: dom.describe(),
        m,
        n,
        alpha,
        pairs,
        sigma_replications,
        seed,
        frac_sgn_narrower: narrower as f64 / pairs as f64,
        oracle_mu,
        oracle_mu_error,
        rows,
    })
}

impl McCompare {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("pair,sgn_lo,sgn_hi,mc_lo,mc_hi,sgn_width,mc_width,sgn_narrower\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.index,
                r.sgn_lo,
                r.sgn_hi,
                r.mc_lo,
                r.mc_hi,
                r.sgn_width,
                r.mc_width,
                r.sgn_narrower
            ));
        }
        out
    }
}

/// Mean of the integrand under the normalized measure by the composite
/// centroid rule at refinement `depth` per coordinate, Richardson
/// extrapolated against depth-1. The reported bound is the factor-4
/// error estimate of the un-extrapolated fine value, which envelopes the
/// extrapolated one with plenty of slack.
pub fn quadrature_mean(f: &Integrand, dom: &ProductDomain, depth: u32) -> (f64, f64) {
    let roots = vec![Vec::new(); dom.s()];
    let coarse = crate::analysis::quadrature_mean_at(f, dom, &roots, depth.saturating_sub(1));
    let fine = crate::analysis::quadrature_mean_at(f, dom, &roots, depth);
    (fine + (fine - coarse) / 3.0, (fine - coarse).abs() / 3.0)
}

// ---------------------------------------------------------------------
// gain table
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct GainTableRun {
    pub schema_version: u32,
    pub b: u8,
    pub m: u32,
    pub s: usize,
    pub k_max: u32,
    pub lower_bound: f64,
    pub rows: Vec<GainRowOut>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GainRowOut {
    pub u: usize,
    pub k: u32,
    pub gamma_closed: f64,
    pub gamma_empirical: Option<f64>,
    pub exact_closed: String,
}

/// Closed-form and empirical gain coefficients for a generated net.
pub fn run_gain_table(
    b: u8,
    m: u32,
    s: usize,
    k_max: u32,
    with_empirical: bool,
) -> Result<GainTableRun, crate::analysis::AnalysisError> {
    let net = if with_empirical {
        Some(
            build_net(b, s, m)
                .map_err(|e| crate::analysis::AnalysisError::Unsupported(e.to_string()))?,
        )
    } else {
        None
    };
    let table = GainTable::build(b, m, s, k_max, net.as_ref())?;
    Ok(GainTableRun {
        schema_version: SCHEMA_VERSION,
        b,
        m,
        s,
        k_max,
        lower_bound: table.lower_bound.to_f64(),
        rows: table
            .entries
            .iter()
            .map(|e| GainRowOut {
                u: e.u_size,
                k: e.k_total,
                gamma_closed: e.closed.to_f64(),
                gamma_empirical: e.empirical.map(|r| r.to_f64()),
                exact_closed: e.closed.to_string(),
            })
            .collect(),
    })
}

impl GainTableRun {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("b,m,u,k,gamma_closed,gamma_empirical,c_g\n");
        for r in &self.rows {
            let emp = r.gamma_empirical.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.b, self.m, r.u, r.k, r.gamma_closed, emp, self.lower_bound
            ));
        }
        out
    }
}

/// Consistency of closed-form and empirical gains on a generated net;
/// `Ok(())` when every pair agrees to `tol` and the boundary regions are
/// exact.
pub fn gain_consistency(run: &GainTableRun, tol: f64) -> Result<(), String> {
    for r in &run.rows {
        if let Some(emp) = r.gamma_empirical {
            if (emp - r.gamma_closed).abs() > tol {
                return Err(format!(
                    "gain mismatch at u={} k={}: closed {} vs empirical {}",
                    r.u, r.k, r.gamma_closed, emp
                ));
            }
        }
        let zero_region = r.u as u32 + r.k <= run.m;
        if zero_region && r.gamma_closed != 0.0 {
            return Err(format!("zero region violated at u={} k={}", r.u, r.k));
        }
        if r.k >= run.m && r.gamma_closed != 1.0 {
            return Err(format!("unit region violated at u={} k={}", r.u, r.k));
        }
    }
    Ok(())
}

/// The standard replicated estimate report for one sampler.
#[allow(clippy::too_many_arguments)]
pub fn run_estimate(
    f: &Integrand,
    dom: &ProductDomain,
    m: u32,
    reps: usize,
    seed: u64,
    alpha: f64,
    use_mc: bool,
    threads: usize,
) -> Result<EstimateReport, EstimatorError> {
    let net = build_net(dom.base(), dom.s(), m)?;
    let estimates = if use_mc {
        mc_replicate(
            f,
            dom,
            net.n(),
            net.depth,
            reps,
            stream(seed, MC_STREAM),
            threads,
        )?
    } else {
        replicate(f, &net, dom, reps, seed, threads)?
    };
    build_report(
        if use_mc { "mc" } else { "sgn" },
        f,
        dom.describe(),
        dom.base(),
        m,
        dom.s(),
        net.depth,
        net.n(),
        seed,
        alpha,
        estimates,
    )
}

/// Gain coefficient of the level decomposition used by the variance
/// identity on single-component domains.
pub fn gain_for_level(b: u8, m: u32, k: u32) -> f64 {
    closed_form_gain(b, m, 1, k).to_f64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{constant, tri_exp, tri_poly};

    #[test]
    fn slope_helper_recovers_power_laws() {
        let pts: Vec<(f64, f64)> = (1..6)
            .map(|i| {
                let n = 4f64.powi(i);
                (n, 7.0 / (n * n))
            })
            .collect();
        assert!((log_log_slope(&pts) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn variance_decay_constant_is_zero() {
        let dom = ProductDomain::triangles(2);
        let f = constant(4.0).integrand;
        let run = run_variance_decay(&f, &dom, 2..=3, 4, 9, 1).unwrap();
        assert!(run.rows.iter().all(|r| r.var_sgn == 0.0 && r.var_mc == 0.0));
        assert!(run.slope_sgn.is_nan());
        let csv = run.to_csv();
        assert!(csv.starts_with("m,n,var_sgn,var_mc\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn decay_outputs_are_deterministic() {
        let dom = ProductDomain::triangles(2);
        let f = tri_poly().integrand;
        let a = run_variance_decay(&f, &dom, 2..=3, 20, 5, 1).unwrap();
        let b = run_variance_decay(&f, &dom, 2..=3, 20, 5, 4).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn interval_domains_decay_at_the_one_dimensional_rate() {
        // d = 1 splits concentrate faster: variance behaves like
        // log(n) n^-3 for the scrambled net and 1/n for Monte Carlo
        let dom = ProductDomain::parse("U^2", 2).unwrap();
        let f = Integrand::new("x1x2", |x: &[f64]| x[0] * x[1]);
        let run = run_variance_decay(&f, &dom, 3..=7, 150, 23, 2).unwrap();
        assert!(
            (-3.4..=-2.4).contains(&run.slope_sgn),
            "interval sgn slope {}",
            run.slope_sgn
        );
        assert!((-1.3..=-0.7).contains(&run.slope_mc), "interval mc slope {}", run.slope_mc);
    }

    #[test]
    fn interval_estimates_hit_the_exact_mean() {
        let dom = ProductDomain::parse("U", 3).unwrap();
        let f = Integrand::new("x1", |x: &[f64]| x[0]).with_known_mean(0.5, "closed form");
        let run = run_estimate(&f, &dom, 3, 200, 9, 0.05, false, 2).unwrap();
        let se = (run.variance / run.replications as f64).sqrt();
        assert!((run.pooled_mean - 0.5).abs() < 5.0 * se, "{} vs 0.5", run.pooled_mean);
        // and the Monte Carlo sampler agrees on interval domains too
        let mc = run_estimate(&f, &dom, 3, 200, 9, 0.05, true, 2).unwrap();
        let se = (mc.variance / mc.replications as f64).sqrt();
        assert!((mc.pooled_mean - 0.5).abs() < 5.0 * se, "{} vs 0.5", mc.pooled_mean);
    }

    #[test]
    fn normality_needs_known_mean() {
        let dom = ProductDomain::triangles(2);
        let f = Integrand::new("anon", |x: &[f64]| x[0]);
        assert!(matches!(
            run_normality(&f, &dom, 2, 50, 1, 1),
            Err(EstimatorError::NoKnownMean(_))
        ));
    }

    #[test]
    fn normality_small_run_produces_w_and_pvalue() {
        let dom = ProductDomain::triangles(2);
        let f = tri_poly().integrand;
        let run = run_normality(&f, &dom, 3, 80, 12, 2).unwrap();
        assert_eq!(run.w_samples.len(), 80);
        assert!((0.0..=1.0).contains(&run.ks_pvalue));
        assert!(run.ks_distance > 0.0);
    }

    #[test]
    fn coverage_alpha_half_is_near_half_and_inflation_saturates() {
        let dom = ProductDomain::triangles(2);
        let f = tri_poly().integrand;
        let half = run_ci_coverage(&f, &dom, 3, 60, 40, 3, 0.5, 1.0, 77, 2).unwrap();
        assert!(
            (half.coverage - 0.5).abs() < 0.2,
            "coverage {}",
            half.coverage
        );
        let fat = run_ci_coverage(&f, &dom, 3, 40, 30, 2, 0.05, 10.0, 77, 2).unwrap();
        assert!(fat.coverage > 0.97, "inflated coverage {}", fat.coverage);
        assert_eq!(fat.rows.len(), 40);
    }

    #[test]
    fn mc_compare_widths_positive_and_sgn_wins_at_moderate_m() {
        let dom = ProductDomain::triangles(2);
        let f = tri_poly().integrand;
        let run = run_mc_compare(&f, &dom, 4, 12, 12, 0.05, 3, 2, None).unwrap();
        assert!(run
            .rows
            .iter()
            .all(|r| r.sgn_width > 0.0 && r.mc_width > 0.0));
        assert!(
            run.frac_sgn_narrower >= 11.0 / 12.0,
            "{}",
            run.frac_sgn_narrower
        );
    }

    #[test]
    fn compare_intervals_contain_the_quadrature_oracle() {
        let dom = ProductDomain::triangles(2);
        let f = tri_exp().integrand;
        let run = run_mc_compare(&f, &dom, 5, 20, 40, 0.05, 8, 2, Some(5)).unwrap();
        let mu = run.oracle_mu.unwrap();
        let both = run
            .rows
            .iter()
            .filter(|r| r.sgn_lo <= mu && mu <= r.sgn_hi && r.mc_lo <= mu && mu <= r.mc_hi)
            .count();
        assert!(
            both >= 17,
            "both intervals contain mu in only {}/20 pairs",
            both
        );
    }

    #[test]
    fn quadrature_mean_matches_series_for_tri_exp() {
        // independent oracle: expand the integral of p e^p over the
        // product of triangles into sum_r M_{r+1}^2 / r! with
        // M_j = (j!)^2 / (2j+2)!; the quarter volume factor carried by
        // the built-in integrand makes its mean the plain integral
        let fact = |x: u64| (1..=x).map(|v| v as f64).product::<f64>();
        let mut series = 0.0;
        for r in 0..7u64 {
            let j = r + 1;
            let m_j = fact(j) * fact(j) / fact(2 * j + 2);
            series += m_j * m_j / fact(r);
        }
        let dom = ProductDomain::triangles(2);
        let f = tri_exp().integrand;
        let (mu, err) = quadrature_mean(&f, &dom, 5);
        assert!(err < 2e-6, "error bound {}", err);
        assert!(
            (mu - series).abs() < 1e-8,
            "quadrature {} vs series {}",
            mu,
            series
        );
        assert!((mu - series).abs() < err);
    }

    #[test]
    fn gain_table_runner_has_contracted_row() {
        let run = run_gain_table(4, 2, 2, 4, true).unwrap();
        gain_consistency(&run, 1e-9).unwrap();
        let row = run.rows.iter().find(|r| r.u == 2 && r.k == 1).unwrap();
        assert!((row.gamma_closed - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(row.exact_closed, "4/3");
        assert_eq!(row.gamma_empirical, Some(row.gamma_closed));
        let csv = run.to_csv();
        assert!(csv.starts_with("b,m,u,k,gamma_closed,gamma_empirical,c_g\n"));
    }

    #[test]
    fn estimate_runner_builds_reports_for_both_samplers() {
        let dom = ProductDomain::triangles(2);
        let f = tri_poly().integrand;
        let sgn = run_estimate(&f, &dom, 2, 12, 3, 0.05, false, 1).unwrap();
        let mc = run_estimate(&f, &dom, 2, 12, 3, 0.05, true, 1).unwrap();
        assert_eq!(sgn.sampler, "sgn");
        assert_eq!(mc.sampler, "mc");
        assert!(sgn.variance < mc.variance);
    }
}
