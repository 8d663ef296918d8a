//! Equal-weight integral estimation over replicated scrambles.
//!
//! One replication scrambles the net with key (seed, rep), maps it into
//! the product domain, and averages the integrand over the points. Since
//! mapped scrambled points are uniformly distributed on the domain, the
//! average estimates the mean of the integrand under the normalized
//! (probability) measure. Built-in integrands whose reference values are
//! plain Lebesgue integrals carry the domain-volume factor internally so
//! that the reported estimates target those values directly.
//!
//! Replications are keyed independently by index, so they can run in any
//! order or on any number of threads with bit-identical results.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::domains::{map_net, DomainError, PointSet, ProductDomain};
use crate::nets::{DigitalNet, NetError};
use crate::scramble::{scramble_net, ScrambleKey, UniformDigitSampler};
use crate::stats::normal_quantile;

#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorError {
    EmptyPointSet,
    /// The integrand produced a non-finite value; names the point.
    NonFinite {
        index: usize,
        point: Vec<f64>,
        value: f64,
    },
    /// Variance and W need at least two replications.
    NeedTwoReplications(usize),
    /// W is undefined when the replication estimates are constant.
    ZeroVariance,
    BadAlpha(f64),
    BadSigma(f64),
    NoKnownMean(String),
    Domain(DomainError),
    Net(NetError),
}

impl fmt::Display for EstimatorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorError::EmptyPointSet => write!(f, "estimate needs a nonempty point set"),
            EstimatorError::NonFinite {
                index,
                point,
                value,
            } => write!(
                f,
                "integrand returned {} at point #{} {:?}",
                value, index, point
            ),
            EstimatorError::NeedTwoReplications(n) => {
                write!(f, "variance needs N >= 2 replications, got {}", n)
            }
            EstimatorError::ZeroVariance => {
                write!(f, "replication estimates are constant; W is undefined")
            }
            EstimatorError::BadAlpha(a) => write!(f, "alpha = {} must lie in (0, 1)", a),
            EstimatorError::BadSigma(s) => {
                write!(f, "sigma = {} must be finite and nonnegative", s)
            }
            EstimatorError::NoKnownMean(name) => {
                write!(f, "integrand {:?} has no known mean", name)
            }
            EstimatorError::Domain(e) => e.fmt(f),
            EstimatorError::Net(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for EstimatorError {}

impl From<DomainError> for EstimatorError {
    fn from(e: DomainError) -> Self {
        EstimatorError::Domain(e)
    }
}

impl From<NetError> for EstimatorError {
    fn from(e: NetError) -> Self {
        EstimatorError::Net(e)
    }
}

type IntegrandFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A deterministic real-valued function on the product domain, with
/// metadata about its known mean when one is available.
#[derive(Clone)]
pub struct Integrand {
    name: String,
    known_mean: Option<f64>,
    mean_note: Option<String>,
    f: IntegrandFn,
}

impl fmt::Debug for Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Integrand")
            .field("name", &self.name)
            .field("known_mean", &self.known_mean)
            .finish()
    }
}

impl Integrand {
    pub fn new<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Integrand {
            name: name.into(),
            known_mean: None,
            mean_note: None,
            f: Arc::new(f),
        }
    }

    pub fn with_known_mean(mut self, mean: f64, note: impl Into<String>) -> Self {
        self.known_mean = Some(mean);
        self.mean_note = Some(note.into());
        self
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn known_mean(&self) -> Option<f64> {
        self.known_mean
    }

    pub fn mean_note(&self) -> Option<&str> {
        self.mean_note.as_deref()
    }
}

/// A built-in integrand together with the domain its metadata refers to.
pub struct BuiltinIntegrand {
    pub integrand: Integrand,
    /// Domain spec string the known mean is valid for.
    pub canonical_domain: &'static str,
}

/// Product polynomial x11 x12^2 - x21^3 x22^4 on (T^2)^2, carrying the
/// domain-volume factor 1/4 so its mean equals the plain integral
/// 41/5040.
pub fn tri_poly() -> BuiltinIntegrand {
    let vol = 0.25;
    BuiltinIntegrand {
        integrand: Integrand::new("tri-poly", move |x: &[f64]| {
            vol * (x[0] * x[1] * x[1] - x[2].powi(3) * x[3].powi(4))
        })
        .with_known_mean(
            41.0 / 5040.0,
            "closed form, cross-checked by split quadrature",
        ),
        canonical_domain: "T2^2",
    }
}

/// Exponential product x11 x12 x21 x22 exp(same) on (T^2)^2 with the
/// volume factor 1/4; its mean is the plain integral, which has no
/// elementary closed form and is estimated by split quadrature.
pub fn tri_exp() -> BuiltinIntegrand {
    let vol = 0.25;
    BuiltinIntegrand {
        integrand: Integrand::new("tri-exp", move |x: &[f64]| {
            let p = x[0] * x[1] * x[2] * x[3];
            vol * p * p.exp()
        }),
        canonical_domain: "T2^2",
    }
}

/// First coordinate of the first component.
pub fn coord_x1() -> BuiltinIntegrand {
    BuiltinIntegrand {
        integrand: Integrand::new("x1", |x: &[f64]| x[0]),
        canonical_domain: "T2",
    }
}

/// Product of the first two coordinates.
pub fn coord_x1x2() -> BuiltinIntegrand {
    BuiltinIntegrand {
        integrand: Integrand::new("x1x2", |x: &[f64]| x[0] * x[1]),
        canonical_domain: "T2",
    }
}

pub fn constant(c: f64) -> BuiltinIntegrand {
    BuiltinIntegrand {
        integrand: Integrand::new(format!("const:{}", c), move |_: &[f64]| c)
            .with_known_mean(c, "constant"),
        canonical_domain: "T2^2",
    }
}

/// Looks up a built-in integrand by name. `example1`/`example2` alias the
/// two (T^2)^2 integrands; `const:<c>` sets the constant's value.
pub fn builtin_integrand(name: &str) -> Option<BuiltinIntegrand> {
    match name {
        "tri-poly" | "example1" => Some(tri_poly()),
        "tri-exp" | "example2" => Some(tri_exp()),
        "x1" => Some(coord_x1()),
        "x1x2" => Some(coord_x1x2()),
        "const" => Some(constant(1.0)),
        _ => name
            .strip_prefix("const:")
            .and_then(|v| v.parse::<f64>().ok())
            .map(constant),
    }
}

pub fn builtin_names() -> &'static [&'static str] {
    &["tri-poly", "tri-exp", "x1", "x1x2", "const", "const:<c>"]
}

/// The equal-weight rule: the arithmetic mean of f over the points.
/// Non-finite integrand values fail with the offending point.
pub fn estimate(f: &Integrand, pts: &PointSet) -> Result<f64, EstimatorError> {
    if pts.is_empty() {
        return Err(EstimatorError::EmptyPointSet);
    }
    let mut acc = 0.0;
    for (i, p) in pts.iter().enumerate() {
        let v = f.eval(p);
        if !v.is_finite() {
            return Err(EstimatorError::NonFinite {
                index: i,
                point: p.to_vec(),
                value: v,
            });
        }
        acc += v;
    }
    Ok(acc / pts.len() as f64)
}

/// Runs `count` closures indexed 0..count on up to `threads` workers and
/// returns results in index order. Output is independent of the thread
/// count because each index is computed in isolation.
pub(crate) fn par_map_indexed<T, F>(count: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = threads.max(1).min(count.max(1));
    if threads <= 1 {
        return (0..count).map(f).collect();
    }
    let mut out: Vec<Option<T>> = (0..count).map(|_| None).collect();
    let chunk = count.div_ceil(threads);
    std::thread::scope(|scope| {
        let f = &f;
        let mut rest = out.as_mut_slice();
        let mut start = 0;
        while !rest.is_empty() {
            let take = chunk.min(rest.len());
            let (head, tail) = rest.split_at_mut(take);
            let base = start;
            scope.spawn(move || {
                for (off, slot) in head.iter_mut().enumerate() {
                    *slot = Some(f(base + off));
                }
            });
            rest = tail;
            start += take;
        }
    });
    out.into_iter()
        .map(|v| v.expect("worker filled every slot"))
        .collect()
}

/// One scrambled-net replication: scramble with the key, map, average.
pub fn sgn_estimate(
    f: &Integrand,
    net: &DigitalNet,
    dom: &ProductDomain,
    key: &ScrambleKey,
) -> Result<f64, EstimatorError> {
    let pts = map_net(&scramble_net(net, key), dom)?;
    estimate(f, &pts)
}

/// N independent replications with keys (seed, 1..=N); order-independent.
pub fn replicate(
    f: &Integrand,
    net: &DigitalNet,
    dom: &ProductDomain,
    reps: usize,
    seed: u64,
    threads: usize,
) -> Result<Vec<f64>, EstimatorError> {
    if reps == 0 {
        return Err(EstimatorError::NeedTwoReplications(0));
    }
    par_map_indexed(reps, threads, |l| {
        sgn_estimate(f, net, dom, &ScrambleKey::new(seed, l as u64 + 1))
    })
    .into_iter()
    .collect()
}

/// Sample variance of the replication estimates with divisor N - 1.
pub fn variance_estimate(estimates: &[f64]) -> Result<f64, EstimatorError> {
    let n = estimates.len();
    if n < 2 {
        return Err(EstimatorError::NeedTwoReplications(n));
    }
    let mean = estimates.iter().sum::<f64>() / n as f64;
    let ss = estimates
        .iter()
        .map(|e| (e - mean) * (e - mean))
        .sum::<f64>();
    Ok(ss / (n - 1) as f64)
}

/// Two-sided normal confidence interval mu_hat +/- z_{alpha/2} sigma_hat.
pub fn confidence_interval(
    mu_hat: f64,
    sigma_hat: f64,
    alpha: f64,
) -> Result<(f64, f64), EstimatorError> {
    if !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
        return Err(EstimatorError::BadAlpha(alpha));
    }
    if sigma_hat < 0.0 || !sigma_hat.is_finite() {
        return Err(EstimatorError::BadSigma(sigma_hat));
    }
    let z = normal_quantile(1.0 - alpha / 2.0);
    Ok((mu_hat - z * sigma_hat, mu_hat + z * sigma_hat))
}

/// Standardized replication estimates W_l = (mu_l - mu) / sigma_hat with
/// sigma_hat taken from the same list.
pub fn standardized_w(estimates: &[f64], mu: f64) -> Result<Vec<f64>, EstimatorError> {
    let var = variance_estimate(estimates)?;
    if var == 0.0 {
        return Err(EstimatorError::ZeroVariance);
    }
    let sigma = var.sqrt();
    Ok(estimates.iter().map(|e| (e - mu) / sigma).collect())
}

/// One plain Monte Carlo replication: n iid uniform points drawn by
/// scrambling all-zero digit strings (one independent digit stream per
/// point and coordinate), mapped through the split transformation.
pub fn mc_estimate(
    f: &Integrand,
    dom: &ProductDomain,
    n: usize,
    depth: usize,
    key: &ScrambleKey,
) -> Result<f64, EstimatorError> {
    let s = dom.s();
    let sampler = UniformDigitSampler::new(dom.base(), key);
    let mut digits = Vec::with_capacity(depth);
    let mut point = vec![0.0; dom.total_dim()];
    let mut acc = 0.0;
    for i in 0..n {
        let mut off = 0;
        for (j, comp) in dom.components().iter().enumerate() {
            sampler.fill(i * s + j, depth, &mut digits);
            let d = comp.dim();
            crate::domains::phi_map(comp, &digits, &mut point[off..off + d]);
            off += d;
        }
        let v = f.eval(&point);
        if !v.is_finite() {
            return Err(EstimatorError::NonFinite {
                index: i,
                point: point.clone(),
                value: v,
            });
        }
        acc += v;
    }
    Ok(acc / n as f64)
}

/// N Monte Carlo replications keyed like [`replicate`].
pub fn mc_replicate(
    f: &Integrand,
    dom: &ProductDomain,
    n: usize,
    depth: usize,
    reps: usize,
    seed: u64,
    threads: usize,
) -> Result<Vec<f64>, EstimatorError> {
    if reps == 0 {
        return Err(EstimatorError::NeedTwoReplications(0));
    }
    par_map_indexed(reps, threads, |l| {
        mc_estimate(f, dom, n, depth, &ScrambleKey::new(seed, l as u64 + 1))
    })
    .into_iter()
    .collect()
}

/// Full report for a replicated estimation run.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub schema_version: u32,
    /// "sgn" for scrambled geometric net, "mc" for plain Monte Carlo.
    pub sampler: String,
    pub integrand: String,
    pub domain: String,
    pub base: u8,
    pub m: u32,
    pub s: usize,
    pub digit_depth: usize,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub alpha: f64,
    pub estimates: Vec<f64>,
    pub pooled_mean: f64,
    /// Between-replication variance (divisor N-1).
    pub variance: f64,
    /// CI for the pooled mean: pooled +/- z sigma_hat / sqrt(N).
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub known_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_samples: Option<Vec<f64>>,
}

pub const SCHEMA_VERSION: u32 = 1;

/// Assembles the report fields shared by the SGN and MC samplers.
#[allow(clippy::too_many_arguments)]
pub fn build_report(
    sampler: &str,
    f: &Integrand,
    domain_desc: String,
    base: u8,
    m: u32,
    s: usize,
    digit_depth: usize,
    n: usize,
    seed: u64,
    alpha: f64,
    estimates: Vec<f64>,
) -> Result<EstimateReport, EstimatorError> {
    let reps = estimates.len();
    let pooled = estimates.iter().sum::<f64>() / reps as f64;
    let variance = variance_estimate(&estimates)?;
    let (ci_lo, ci_hi) = confidence_interval(pooled, (variance / reps as f64).sqrt(), alpha)?;
    let w_samples = f
        .known_mean()
        .and_then(|mu| standardized_w(&estimates, mu).ok());
    Ok(EstimateReport {
        schema_version: SCHEMA_VERSION,
        sampler: sampler.into(),
        integrand: f.name().into(),
        domain: domain_desc,
        base,
        m,
        s,
        digit_depth,
        n,
        replications: reps,
        seed,
        alpha,
        pooled_mean: pooled,
        variance,
        ci_lo,
        ci_hi,
        known_mean: f.known_mean(),
        w_samples,
        estimates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::SplitScheme;
    use crate::field::FieldTable;
    use crate::nets::{default_depth, faure_generators, generate_net};
    use crate::stats::chi_square_pvalue;

    fn t2_net(s: usize, m: usize) -> (DigitalNet, ProductDomain) {
        let gen = faure_generators(FieldTable::new(4).unwrap(), s, m).unwrap();
        let net = generate_net(&gen, default_depth(4, m as u32)).unwrap();
        (net, ProductDomain::triangles(s))
    }

    #[test]
    fn constant_integrand_estimates_exactly() {
        let (net, dom) = t2_net(2, 2);
        let f = constant(3.5).integrand;
        let pts = map_net(&net, &dom).unwrap();
        assert_eq!(estimate(&f, &pts).unwrap(), 3.5);
        let reps = replicate(&f, &net, &dom, 5, 1, 1).unwrap();
        assert!(reps.iter().all(|&e| e == 3.5));
        assert_eq!(variance_estimate(&reps).unwrap(), 0.0);
    }

    #[test]
    fn single_point_returns_f_of_point() {
        let (net, dom) = t2_net(2, 1);
        let f = Integrand::new("first", |x: &[f64]| x[0] + 10.0 * x[3]);
        let pts = map_net(&net, &dom).unwrap();
        let single = PointSet::from_flat(pts.dim, pts.point(0).to_vec());
        assert_eq!(estimate(&f, &single).unwrap(), f.eval(pts.point(0)));
    }

    #[test]
    fn non_finite_values_name_the_point() {
        let (net, dom) = t2_net(2, 1);
        let f = Integrand::new("bad", |x: &[f64]| 1.0 / (x[0] - x[0]));
        let pts = map_net(&net, &dom).unwrap();
        match estimate(&f, &pts) {
            Err(EstimatorError::NonFinite { index, point, .. }) => {
                assert_eq!(index, 0);
                assert_eq!(point.len(), 4);
            }
            other => panic!("expected NonFinite, got {:?}", other),
        }
    }

    #[test]
    fn replication_one_composes_scramble_map_estimate() {
        let (net, dom) = t2_net(2, 2);
        let f = tri_poly().integrand;
        let got = replicate(&f, &net, &dom, 1, 77, 1).unwrap();
        let expect = sgn_estimate(&f, &net, &dom, &ScrambleKey::new(77, 1)).unwrap();
        assert_eq!(got, vec![expect]);
    }

    #[test]
    fn replications_are_deterministic_and_thread_invariant() {
        let (net, dom) = t2_net(2, 2);
        let f = tri_poly().integrand;
        let a = replicate(&f, &net, &dom, 9, 5, 1).unwrap();
        let b = replicate(&f, &net, &dom, 9, 5, 1).unwrap();
        let c = replicate(&f, &net, &dom, 9, 5, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn pooled_mean_is_unbiased_for_tri_poly() {
        // mean over N replications at n = 16 within 5 standard errors
        let (net, dom) = t2_net(2, 2);
        let f = tri_poly().integrand;
        let mu = f.known_mean().unwrap();
        let reps = replicate(&f, &net, &dom, 400, 42, 2).unwrap();
        let pooled = reps.iter().sum::<f64>() / reps.len() as f64;
        let se = (variance_estimate(&reps).unwrap() / reps.len() as f64).sqrt();
        assert!(
            (pooled - mu).abs() < 5.0 * se,
            "pooled {} vs {} (se {})",
            pooled,
            mu,
            se
        );
    }

    #[test]
    fn variance_hand_cases() {
        assert_eq!(variance_estimate(&[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(variance_estimate(&[0.0, 2.0]).unwrap(), 2.0);
        assert!(matches!(
            variance_estimate(&[1.0]),
            Err(EstimatorError::NeedTwoReplications(1))
        ));
    }

    #[test]
    fn variance_is_shift_invariant() {
        let (net, dom) = t2_net(2, 2);
        let f = tri_poly().integrand;
        let g = Integrand::new("shifted", {
            let f = f.clone();
            move |x: &[f64]| f.eval(x) + 1000.0
        });
        let a = variance_estimate(&replicate(&f, &net, &dom, 50, 3, 1).unwrap()).unwrap();
        let b = variance_estimate(&replicate(&g, &net, &dom, 50, 3, 1).unwrap()).unwrap();
        assert!(
            (a - b).abs() <= 1e-9 * b.abs().max(1e-300),
            "{} vs {}",
            a,
            b
        );
    }

    #[test]
    fn confidence_interval_cases() {
        let (lo, hi) = confidence_interval(1.0, 0.0, 0.05).unwrap();
        assert_eq!((lo, hi), (1.0, 1.0));
        let (lo, hi) = confidence_interval(0.0, 1.0, 0.05).unwrap();
        assert!((lo + 1.959964).abs() < 1e-5);
        assert!((hi - 1.959964).abs() < 1e-5);
        assert!(lo < hi);
        assert!(confidence_interval(0.0, 1.0, 0.0).is_err());
        assert!(confidence_interval(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn standardized_w_symmetric_pair() {
        let mu = 5.0;
        let w = standardized_w(&[mu - 1.0, mu + 1.0], mu).unwrap();
        let r = 0.5f64.sqrt();
        assert!((w[0] + r).abs() < 1e-15);
        assert!((w[1] - r).abs() < 1e-15);
        assert!(w.iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn standardized_w_identity_and_rejection() {
        let est = [0.1, 0.4, 0.2, 0.9];
        let mu = 0.3;
        let sigma = variance_estimate(&est).unwrap().sqrt();
        let w = standardized_w(&est, mu).unwrap();
        let lhs: f64 = w.iter().sum::<f64>() * sigma;
        let rhs: f64 = est.iter().sum::<f64>() - est.len() as f64 * mu;
        assert!((lhs - rhs).abs() < 1e-12);
        assert!(matches!(
            standardized_w(&[2.0, 2.0, 2.0], 2.0),
            Err(EstimatorError::ZeroVariance)
        ));
    }

    #[test]
    fn mc_constant_has_zero_variance() {
        let dom = ProductDomain::triangles(2);
        let f = constant(7.0).integrand;
        let reps = mc_replicate(&f, &dom, 32, 20, 6, 9, 1).unwrap();
        assert!(reps.iter().all(|&e| e == 7.0));
    }

    #[test]
    fn mc_points_cover_level1_triangle_cells_uniformly() {
        // coordinate pairs land in the 4 level-1 cells with frequency 1/4
        let dom = ProductDomain::new(vec![SplitScheme::unit_triangle()]).unwrap();
        let scheme = dom.component(0);
        let key = ScrambleKey::new(123, 1);
        let sampler = UniformDigitSampler::new(4, &key);
        let mut digits = Vec::new();
        let mut counts = [0u64; 4];
        let draws = 40_000;
        let mut point = [0.0; 2];
        for i in 0..draws {
            sampler.fill(i, 16, &mut digits);
            crate::domains::phi_map(scheme, &digits, &mut point);
            counts[scheme.locate(&point, 1)[0] as usize] += 1;
        }
        let expected = draws as f64 / 4.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi_square_pvalue(chi2, 3.0) > 0.001, "counts {:?}", counts);
    }

    #[test]
    fn report_assembles_and_serializes() {
        let (net, dom) = t2_net(2, 2);
        let f = tri_poly().integrand;
        let est = replicate(&f, &net, &dom, 10, 21, 1).unwrap();
        let report = build_report(
            "sgn",
            &f,
            dom.describe(),
            4,
            2,
            2,
            net.depth,
            net.n(),
            21,
            0.05,
            est,
        )
        .unwrap();
        assert!(report.ci_lo < report.ci_hi);
        assert!(report.variance >= 0.0);
        assert_eq!(report.replications, 10);
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"schema_version\":1"));
        assert!(json.contains("\"w_samples\""));
    }
}
