//! Gain coefficients: the factors by which scrambled-net variance of a
//! multiresolution component differs from plain Monte Carlo.
//!
//! Everything here is exact integer/rational arithmetic; values like 4/3
//! and 320/343 come out exactly, and conversion to floating point happens
//! only at the boundary.

use std::cmp::Ordering;
use std::fmt;

use crate::analysis::AnalysisError;
use crate::nets::DigitalNet;

/// Exact rational with i128 components, always reduced, positive
/// denominator. The magnitudes arising from gain formulas with b <= 64
/// and m <= 16 fit comfortably.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    num: i128,
    den: i128,
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs()
}

impl Ratio {
    pub const ZERO: Ratio = Ratio { num: 0, den: 1 };
    pub const ONE: Ratio = Ratio { num: 1, den: 1 };

    pub fn new(num: i128, den: i128) -> Ratio {
        assert!(den != 0, "zero denominator");
        let sign = if den < 0 { -1 } else { 1 };
        let g = gcd(num, den).max(1);
        Ratio {
            num: sign * num / g,
            den: sign * den / g,
        }
    }

    pub fn from_int(n: i128) -> Ratio {
        Ratio { num: n, den: 1 }
    }

    /// Integer power, negative exponents allowed for nonzero values.
    pub fn powi(self, e: i32) -> Ratio {
        if e < 0 {
            return Ratio::ONE / self.powi(-e);
        }
        let mut acc = Ratio::ONE;
        for _ in 0..e {
            acc = acc * self;
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn numer(&self) -> i128 {
        self.num
    }

    pub fn denom(&self) -> i128 {
        self.den
    }
}

impl std::ops::Add for Ratio {
    type Output = Ratio;
    fn add(self, rhs: Ratio) -> Ratio {
        Ratio::new(self.num * rhs.den + rhs.num * self.den, self.den * rhs.den)
    }
}

impl std::ops::Sub for Ratio {
    type Output = Ratio;
    fn sub(self, rhs: Ratio) -> Ratio {
        Ratio::new(self.num * rhs.den - rhs.num * self.den, self.den * rhs.den)
    }
}

impl std::ops::Mul for Ratio {
    type Output = Ratio;
    fn mul(self, rhs: Ratio) -> Ratio {
        Ratio::new(self.num * rhs.num, self.den * rhs.den)
    }
}

impl std::ops::Div for Ratio {
    type Output = Ratio;
    fn div(self, rhs: Ratio) -> Ratio {
        assert!(rhs.num != 0, "division by zero ratio");
        Ratio::new(self.num * rhs.den, self.den * rhs.num)
    }
}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Binomial coefficient as an exact integer; 0 when r > n.
fn binom(n: i128, r: i128) -> i128 {
    if r < 0 || r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: i128 = 1;
    for i in 0..r {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Pairwise digit-agreement weight of the scramble variance formula:
/// (b [first k+1 digits agree] - [first k digits agree]) / (b - 1),
/// evaluated exactly on integer digits.
pub fn upsilon(
    net: &DigitalNet,
    i: usize,
    i_prime: usize,
    j: usize,
    k: u32,
) -> Result<Ratio, AnalysisError> {
    let k = k as usize;
    if k + 1 > net.depth {
        return Err(AnalysisError::BadIndex(format!(
            "upsilon needs k + 1 = {} digits, net depth is {}",
            k + 1,
            net.depth
        )));
    }
    let a = net.point_digits(i, j);
    let b = net.point_digits(i_prime, j);
    let agree_k = a[..k] == b[..k];
    let agree_k1 = agree_k && a[k] == b[k];
    let base = net.base as i128;
    let num = base * i128::from(agree_k1) - i128::from(agree_k);
    Ok(Ratio::new(num, base - 1))
}

/// Empirical gain coefficient of the net for subset `u` (coordinate
/// indices) at levels `kappa`: the exact double sum
/// (1/n) sum_{i,i'} prod_{j in u} Upsilon(i,i',j,k_j).
pub fn empirical_gain(
    net: &DigitalNet,
    u: &[usize],
    kappa: &[u32],
) -> Result<Ratio, AnalysisError> {
    if u.is_empty() || u.len() != kappa.len() {
        return Err(AnalysisError::BadIndex(format!(
            "subset size {} and level count {} must match and be >= 1",
            u.len(),
            kappa.len()
        )));
    }
    if let Some(&k) = kappa.iter().max() {
        if k as usize + 1 > net.depth {
            return Err(AnalysisError::BadIndex(format!(
                "level {} exceeds digit depth {}",
                k, net.depth
            )));
        }
    }
    let n = net.n();
    let b = net.base as i128;
    // accumulate (b-1)^|u| * Upsilon products as exact integers
    let mut acc: i128 = 0;
    for i in 0..n {
        for ip in 0..n {
            let mut term: i128 = 1;
            for (&j, &k) in u.iter().zip(kappa) {
                let k = k as usize;
                let a = net.point_digits(i, j);
                let bd = net.point_digits(ip, j);
                let agree_k = a[..k] == bd[..k];
                if !agree_k {
                    term = 0;
                    break;
                }
                term *= if a[k] == bd[k] { b - 1 } else { -1 };
            }
            acc += term;
        }
    }
    Ok(Ratio::new(acc, n as i128 * (b - 1).pow(u.len() as u32)))
}

/// Closed-form gain coefficient of a (0,m,s)-net in base b, which depends
/// only on the subset size u and the level sum k:
///   1 for k >= m,
///   1 + (1-b)^(-u) [ (-b)^(m-k) C(u-1, m-k) - sum_{j<=m-k} C(u,j)(-b)^j ]
/// otherwise (exactly 0 on the region u + k <= m).
pub fn closed_form_gain(b: u8, m: u32, u_size: usize, k_total: u32) -> Ratio {
    assert!(u_size >= 1, "subset must be nonempty");
    assert!(b >= 2);
    if k_total >= m {
        return Ratio::ONE;
    }
    let b = b as i128;
    let u = u_size as i128;
    let mk = (m - k_total) as i128;
    let neg_b = Ratio::from_int(-b);
    let lead = neg_b.powi(mk as i32) * Ratio::from_int(binom(u - 1, mk));
    let mut sum = Ratio::ZERO;
    for j in 0..=mk {
        sum = sum + neg_b.powi(j as i32) * Ratio::from_int(binom(u, j));
    }
    Ratio::ONE + Ratio::new(1, 1 - b).powi(u as i32) * (lead - sum)
}

/// The gain value at the minimizing subset size u = m - k + 2:
/// (b/(b-1))^(m-k) (1 - (m-k)/(b-1)).
pub fn gain_minimizer_value(b: u8, m: u32, k: u32) -> Ratio {
    let b = b as i128;
    let mk = m.saturating_sub(k) as i32;
    Ratio::new(b, b - 1).powi(mk) * (Ratio::ONE - Ratio::new(mk as i128, b - 1))
}

/// Uniform lower bound c_g on the nonzero gain coefficients:
/// (b/(b-1))^min(m, s-2) (1 - min(m, s-2)/(b-1)); requires b >= max(s,2).
pub fn gain_lower_bound(b: u8, m: u32, s: usize) -> Result<Ratio, AnalysisError> {
    if (b as usize) < s {
        return Err(AnalysisError::Unsupported(format!(
            "gain lower bound needs b >= s, got b = {}, s = {}",
            b, s
        )));
    }
    if b < 2 {
        return Err(AnalysisError::Unsupported("base must be >= 2".into()));
    }
    let e = (m as i64).min(s as i64 - 2);
    let b = b as i128;
    Ok(Ratio::new(b, b - 1).powi(e as i32) * (Ratio::ONE - Ratio::new(e as i128, b - 1)))
}

/// One (u, k) row of a gain table.
#[derive(Debug, Clone)]
pub struct GainEntry {
    pub u_size: usize,
    pub k_total: u32,
    pub closed: Ratio,
    /// Exact empirical value from the double sum, when a net was supplied.
    pub empirical: Option<Ratio>,
}

/// Gains indexed by (|u|, |kappa|); the closed form depends only on these.
#[derive(Debug, Clone)]
pub struct GainTable {
    pub b: u8,
    pub m: u32,
    pub s: usize,
    pub lower_bound: Ratio,
    pub entries: Vec<GainEntry>,
}

impl GainTable {
    /// Builds the table for u = 1..=s and k = 0..=k_max. When `net` is
    /// given, empirical gains are evaluated on it with the level sum
    /// placed as evenly as possible across the subset 1..=u.
    pub fn build(
        b: u8,
        m: u32,
        s: usize,
        k_max: u32,
        net: Option<&DigitalNet>,
    ) -> Result<GainTable, AnalysisError> {
        let lower_bound = gain_lower_bound(b, m, s)?;
        let mut entries = Vec::new();
        for u_size in 1..=s {
            for k_total in 0..=k_max {
                let closed = closed_form_gain(b, m, u_size, k_total);
                let empirical = match net {
                    Some(net) => {
                        let u: Vec<usize> = (0..u_size).collect();
                        let kappa = spread_levels(k_total, u_size);
                        Some(empirical_gain(net, &u, &kappa)?)
                    }
                    None => None,
                };
                entries.push(GainEntry {
                    u_size,
                    k_total,
                    closed,
                    empirical,
                });
            }
        }
        Ok(GainTable {
            b,
            m,
            s,
            lower_bound,
            entries,
        })
    }
}

/// Splits a level total across `parts` coordinates as evenly as possible.
pub(crate) fn spread_levels(total: u32, parts: usize) -> Vec<u32> {
    let base = total / parts as u32;
    let rem = total % parts as u32;
    (0..parts as u32)
        .map(|i| base + u32::from(i < rem))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldTable;
    use crate::nets::{default_depth, faure_generators, generate_net};

    fn net(b: u8, s: usize, m: usize) -> DigitalNet {
        let gen = faure_generators(FieldTable::new(b).unwrap(), s, m).unwrap();
        generate_net(&gen, default_depth(b, m as u32)).unwrap()
    }

    #[test]
    fn ratio_arithmetic() {
        let a = Ratio::new(4, 6);
        assert_eq!(a, Ratio::new(2, 3));
        assert_eq!(a + Ratio::new(1, 3), Ratio::ONE);
        assert_eq!(Ratio::new(1, 2) * Ratio::new(2, 3), Ratio::new(1, 3));
        assert_eq!(Ratio::ONE - Ratio::new(1, 4), Ratio::new(3, 4));
        assert_eq!(Ratio::new(1, 2) / Ratio::new(1, 8), Ratio::from_int(4));
        assert_eq!(Ratio::new(1, -3), Ratio::new(-1, 3));
        assert_eq!(Ratio::new(1, 2).powi(-2), Ratio::from_int(4));
        assert!(Ratio::new(319, 343) < Ratio::new(320, 343));
        assert_eq!(Ratio::new(320, 343).to_f64(), 320.0 / 343.0);
    }

    #[test]
    fn upsilon_cases() {
        let nt = net(4, 2, 2);
        // self-pair: (b - 1)/(b - 1) = 1
        assert_eq!(upsilon(&nt, 3, 3, 0, 1).unwrap(), Ratio::ONE);
        // find a pair differing already in digit 1: both indicators 0
        let mut zero_seen = false;
        let mut neg_seen = false;
        for i in 0..nt.n() {
            for ip in 0..nt.n() {
                let v = upsilon(&nt, i, ip, 0, 1).unwrap();
                if v == Ratio::ZERO {
                    zero_seen = true;
                    assert_ne!(nt.digit(i, 0, 0), nt.digit(ip, 0, 0));
                }
                // agree to depth k, not k+1: -1/(b-1) = -1/3
                if v == Ratio::new(-1, 3) {
                    neg_seen = true;
                    assert_eq!(nt.digit(i, 0, 0), nt.digit(ip, 0, 0));
                    assert_ne!(nt.digit(i, 0, 1), nt.digit(ip, 0, 1));
                }
            }
        }
        assert!(zero_seen && neg_seen);
    }

    #[test]
    fn empirical_gain_boundary_regions() {
        let nt = net(4, 2, 2);
        // |kappa| >= m  ->  1
        assert_eq!(empirical_gain(&nt, &[0, 1], &[1, 1]).unwrap(), Ratio::ONE);
        assert_eq!(empirical_gain(&nt, &[0], &[3]).unwrap(), Ratio::ONE);
        // |u| + |kappa| <= m  ->  0
        assert_eq!(empirical_gain(&nt, &[0, 1], &[0, 0]).unwrap(), Ratio::ZERO);
        assert_eq!(empirical_gain(&nt, &[1], &[1]).unwrap(), Ratio::ZERO);
    }

    #[test]
    fn gain_four_thirds_case() {
        // b=4, m=2, |u|=2, |kappa|=1: hand evaluation gives 4/3
        assert_eq!(closed_form_gain(4, 2, 2, 1), Ratio::new(4, 3));
        let nt = net(4, 2, 2);
        assert_eq!(
            empirical_gain(&nt, &[0, 1], &[1, 0]).unwrap(),
            Ratio::new(4, 3)
        );
        assert_eq!(
            empirical_gain(&nt, &[0, 1], &[0, 1]).unwrap(),
            Ratio::new(4, 3)
        );
    }

    #[test]
    fn closed_form_boundaries() {
        assert_eq!(closed_form_gain(4, 3, 2, 3), Ratio::ONE);
        assert_eq!(closed_form_gain(4, 3, 2, 5), Ratio::ONE);
        // boundary of the zero region: u + k = m
        assert_eq!(closed_form_gain(4, 4, 2, 2), Ratio::ZERO);
        assert_eq!(closed_form_gain(8, 6, 3, 1), Ratio::ZERO);
    }

    #[test]
    fn closed_form_matches_empirical_on_nets() {
        for (b, s, m) in [(4u8, 2usize, 2usize), (4, 2, 3), (4, 3, 2), (3, 3, 2)] {
            let nt = net(b, s, m);
            for u_size in 1..=s {
                let u: Vec<usize> = (0..u_size).collect();
                for k_total in 0..=(m as u32 + 2) {
                    let expect = closed_form_gain(b, m as u32, u_size, k_total);
                    // the empirical value is independent of how the level
                    // total is split across coordinates
                    let kappa = spread_levels(k_total, u_size);
                    let got = empirical_gain(&nt, &u, &kappa).unwrap();
                    assert_eq!(
                        got, expect,
                        "b={} s={} m={} u={} k={}",
                        b, s, m, u_size, k_total
                    );
                }
            }
        }
    }

    #[test]
    fn lower_bound_cases() {
        // s = 2: exponent min(m, 0) = 0, so c_g = 1
        assert_eq!(gain_lower_bound(4, 3, 2).unwrap(), Ratio::ONE);
        // b=8, s=4, m>=2: (8/7)^2 (1 - 2/7) = 320/343
        assert_eq!(gain_lower_bound(8, 5, 4).unwrap(), Ratio::new(320, 343));
        assert!(gain_lower_bound(3, 2, 4).is_err());
    }

    #[test]
    fn lemma_bound_and_monotonicity_small_sweep() {
        // nonzero-region gains stay above c_g; odd ladder >= 1; even ladder
        // nondecreasing in u. Full enumeration lives in the acceptance suite.
        for &b in &[4u8, 8] {
            for m in 1..=5u32 {
                for s in 2..=(b as usize).min(5) {
                    let cg = gain_lower_bound(b, m, s).unwrap();
                    for u in 1..=s {
                        for k in 0..=m + 2 {
                            let g = closed_form_gain(b, m, u, k);
                            if u as u32 + k > m {
                                assert!(g >= cg, "b={} m={} s={} u={} k={}", b, m, s, u, k);
                            } else {
                                assert!(g.is_zero());
                            }
                        }
                    }
                }
                for k in 0..=m {
                    for l in 1..=3u32 {
                        let odd = (m - k) as i64 + 2 * l as i64 - 1;
                        if odd >= 1 && odd <= b as i64 {
                            assert!(closed_form_gain(b, m, odd as usize, k) >= Ratio::ONE);
                        }
                        let even = (m - k) as i64 + 2 * l as i64;
                        if even >= 1 && even + 2 <= b as i64 {
                            let lo = closed_form_gain(b, m, even as usize, k);
                            let hi = closed_form_gain(b, m, even as usize + 2, k);
                            assert!(lo <= hi);
                        }
                    }
                    // equality pattern at the minimizer u = m - k + 2
                    let u_min = (m - k) as usize + 2;
                    if u_min <= b as usize {
                        assert_eq!(
                            closed_form_gain(b, m, u_min, k),
                            gain_minimizer_value(b, m, k)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn gains_are_nonnegative() {
        for b in [2u8, 3, 4, 8] {
            for m in 0..=8 {
                for u in 1..=b as usize {
                    for k in 0..=m + 3 {
                        let g = closed_form_gain(b, m, u, k);
                        assert!(g >= Ratio::ZERO, "b={} m={} u={} k={} -> {}", b, m, u, k, g);
                    }
                }
            }
        }
    }

    #[test]
    fn table_builds_with_empirical_column() {
        let nt = net(4, 2, 2);
        let table = GainTable::build(4, 2, 2, 4, Some(&nt)).unwrap();
        assert_eq!(table.lower_bound, Ratio::ONE);
        let row = table
            .entries
            .iter()
            .find(|e| e.u_size == 2 && e.k_total == 1)
            .unwrap();
        assert_eq!(row.closed, Ratio::new(4, 3));
        assert_eq!(row.empirical, Some(Ratio::new(4, 3)));
    }
}
