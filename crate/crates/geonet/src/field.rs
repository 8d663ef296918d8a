//! Finite-field arithmetic tables for prime-power bases.
//!
//! Net construction works with digits in `Z_b` where `b = p^e` is a prime
//! power up to 64. Field elements are identified with digits `0..b`: digit
//! `d = sum c_i p^i` encodes the polynomial `sum c_i x^i` over `Z_p`, and
//! multiplication is carried out modulo a monic irreducible of degree `e`
//! found by exhaustive search. For prime `b` this reduces to ordinary
//! modular arithmetic.

use std::fmt;

/// Largest supported base.
pub const MAX_BASE: u8 = 64;

/// Error returned when a base does not admit a finite field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonPrimePower {
    pub base: u8,
    /// Nearest admissible base below, if any.
    pub below: Option<u8>,
    /// Nearest admissible base above, if any.
    pub above: Option<u8>,
}

impl fmt::Display for NonPrimePower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "base {} is not a prime power in 2..={}",
            self.base, MAX_BASE
        )?;
        match (self.below, self.above) {
            (Some(lo), Some(hi)) => write!(f, "; nearest admissible bases are {} and {}", lo, hi),
            (Some(lo), None) => write!(f, "; nearest admissible base is {}", lo),
            (None, Some(hi)) => write!(f, "; nearest admissible base is {}", hi),
            (None, None) => Ok(()),
        }
    }
}

impl std::error::Error for NonPrimePower {}

/// Lookup tables for GF(b) with `b = p^e <= 64`.
///
/// Elements are the digits `0..b`; 0 and 1 are the additive and
/// multiplicative identities.
#[derive(Debug, Clone)]
pub struct FieldTable {
    order: u8,
    prime: u8,
    degree: u8,
    add: Vec<u8>,
    mul: Vec<u8>,
    neg: Vec<u8>,
    inv: Vec<u8>,
}

fn is_prime(n: u8) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u8;
    while (d as u16) * (d as u16) <= n as u16 {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Returns `(p, e)` with `b = p^e` when `b` is a prime power.
fn prime_power(b: u8) -> Option<(u8, u8)> {
    if b < 2 {
        return None;
    }
    let mut p = 2u8;
    while p <= b {
        if is_prime(p) && b.is_multiple_of(p) {
            let mut n = b;
            let mut e = 0u8;
            while n.is_multiple_of(p) {
                n /= p;
                e += 1;
            }
            return if n == 1 { Some((p, e)) } else { None };
        }
        p += 1;
    }
    None
}

fn nearest_prime_power(from: u8, step: i16) -> Option<u8> {
    let mut c = from as i16 + step;
    while (2..=MAX_BASE as i16).contains(&c) {
        if prime_power(c as u8).is_some() {
            return Some(c as u8);
        }
        c += step;
    }
    None
}

/// Polynomials over Z_p packed as coefficient vectors, lowest degree first.
fn poly_mul_mod(a: &[u8], b: &[u8], modulus: &[u8], p: u8) -> Vec<u8> {
    let e = modulus.len() - 1;
    let mut prod = vec![0u8; a.len() + b.len()];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            prod[i + j] = ((prod[i + j] as u16 + ai as u16 * bj as u16) % p as u16) as u8;
        }
    }
    // reduce modulo the monic irreducible
    for d in (e..prod.len()).rev() {
        let c = prod[d];
        if c == 0 {
            continue;
        }
        prod[d] = 0;
        for (k, &mk) in modulus.iter().enumerate().take(e) {
            let sub = (c as u16 * mk as u16) % p as u16;
            prod[d - e + k] = ((prod[d - e + k] as u16 + p as u16 - sub) % p as u16) as u8;
        }
    }
    prod.truncate(e);
    prod
}

fn digit_to_poly(d: u8, p: u8, e: u8) -> Vec<u8> {
    let mut out = vec![0u8; e as usize];
    let mut n = d;
    for c in out.iter_mut() {
        *c = n % p;
        n /= p;
    }
    out
}

fn poly_to_digit(poly: &[u8], p: u8) -> u8 {
    let mut d = 0u16;
    for &c in poly.iter().rev() {
        d = d * p as u16 + c as u16;
    }
    d as u8
}

/// Finds a monic irreducible of degree `e` over Z_p by exhaustive search.
fn find_irreducible(p: u8, e: u8) -> Vec<u8> {
    let pe = (p as u32).pow(e as u32);
    'cand: for lo in 0..pe {
        // candidate x^e + (low-order coefficients of lo)
        let mut cand = digit_to_poly(0, p, e + 1);
        let mut n = lo;
        for c in cand.iter_mut().take(e as usize) {
            *c = (n % p as u32) as u8;
            n /= p as u32;
        }
        cand[e as usize] = 1;
        // no roots and no monic divisor of degree 2..=e/2
        for d in 1..=(e / 2).max(1) {
            let pd = (p as u32).pow(d as u32);
            for dlo in 0..pd {
                let mut div = vec![0u8; d as usize + 1];
                let mut n = dlo;
                for c in div.iter_mut().take(d as usize) {
                    *c = (n % p as u32) as u8;
                    n /= p as u32;
                }
                div[d as usize] = 1;
                if poly_rem_is_zero(&cand, &div, p) {
                    continue 'cand;
                }
            }
        }
        return cand;
    }
    unreachable!("an irreducible of degree {} over Z_{} exists", e, p)
}

fn poly_rem_is_zero(num: &[u8], div: &[u8], p: u8) -> bool {
    let mut rem: Vec<u8> = num.to_vec();
    let dd = div.len() - 1;
    for d in (dd..rem.len()).rev() {
        let c = rem[d];
        if c == 0 {
            continue;
        }
        // divisor is monic, so the quotient coefficient is c
        for (k, &mk) in div.iter().enumerate() {
            let sub = (c as u16 * mk as u16) % p as u16;
            rem[d - dd + k] = ((rem[d - dd + k] as u16 + p as u16 - sub) % p as u16) as u8;
        }
    }
    rem.iter().all(|&c| c == 0)
}

impl FieldTable {
    /// Builds the GF(b) tables. Rejects bases that are not prime powers,
    /// naming the nearest admissible ones.
    pub fn new(b: u8) -> Result<Self, NonPrimePower> {
        let (p, e) = prime_power(b)
            .filter(|_| b <= MAX_BASE)
            .ok_or(NonPrimePower {
                base: b,
                below: nearest_prime_power(b.min(MAX_BASE + 1), -1),
                above: if b >= MAX_BASE {
                    None
                } else {
                    nearest_prime_power(b, 1)
                },
            })?;

        let n = b as usize;
        let mut add = vec![0u8; n * n];
        let mut mul = vec![0u8; n * n];
        let mut neg = vec![0u8; n];
        let mut inv = vec![0u8; n];

        if e == 1 {
            for x in 0..n {
                for y in 0..n {
                    add[x * n + y] = ((x + y) % n) as u8;
                    mul[x * n + y] = ((x * y) % n) as u8;
                }
                neg[x] = ((n - x) % n) as u8;
            }
        } else {
            let modulus = find_irreducible(p, e);
            for x in 0..n {
                let px = digit_to_poly(x as u8, p, e);
                for y in 0..n {
                    let py = digit_to_poly(y as u8, p, e);
                    let sum: Vec<u8> = px.iter().zip(&py).map(|(&a, &c)| (a + c) % p).collect();
                    add[x * n + y] = poly_to_digit(&sum, p);
                    mul[x * n + y] = poly_to_digit(&poly_mul_mod(&px, &py, &modulus, p), p);
                }
                let negp: Vec<u8> = px.iter().map(|&a| (p - a) % p).collect();
                neg[x] = poly_to_digit(&negp, p);
            }
        }
        for x in 1..n {
            for y in 1..n {
                if mul[x * n + y] == 1 {
                    inv[x] = y as u8;
                    break;
                }
            }
        }
        Ok(FieldTable {
            order: b,
            prime: p,
            degree: e,
            add,
            mul,
            neg,
            inv,
        })
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn characteristic(&self) -> u8 {
        self.prime
    }

    pub fn degree(&self) -> u8 {
        self.degree
    }

    #[inline]
    pub fn add(&self, a: u8, b: u8) -> u8 {
        self.add[a as usize * self.order as usize + b as usize]
    }

    #[inline]
    pub fn mul(&self, a: u8, b: u8) -> u8 {
        self.mul[a as usize * self.order as usize + b as usize]
    }

    #[inline]
    pub fn neg(&self, a: u8) -> u8 {
        self.neg[a as usize]
    }

    #[inline]
    pub fn sub(&self, a: u8, b: u8) -> u8 {
        self.add(a, self.neg(b))
    }

    /// Multiplicative inverse; `a` must be nonzero.
    #[inline]
    pub fn inv(&self, a: u8) -> u8 {
        debug_assert!(a != 0, "zero has no inverse");
        self.inv[a as usize]
    }

    pub fn pow(&self, a: u8, mut n: u32) -> u8 {
        let mut base = a;
        let mut acc = 1u8;
        while n > 0 {
            if n & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            n >>= 1;
        }
        acc
    }

    /// The image of an integer under the canonical map Z -> GF(b)
    /// (reduction modulo the characteristic).
    #[inline]
    pub fn from_int(&self, n: u64) -> u8 {
        (n % self.prime as u64) as u8
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gf2_is_xor_and() {
        let f = FieldTable::new(2).unwrap();
        for x in 0..2u8 {
            for y in 0..2u8 {
                assert_eq!(f.add(x, y), x ^ y);
                assert_eq!(f.mul(x, y), x & y);
            }
        }
    }

    #[test]
    fn gf5_is_modular() {
        let f = FieldTable::new(5).unwrap();
        for x in 0..5u8 {
            for y in 0..5u8 {
                assert_eq!(f.add(x, y), (x + y) % 5);
                assert_eq!(f.mul(x, y), (x * y) % 5);
            }
        }
    }

    /// Exhaustive field-axiom check over all triples.
    fn assert_field_axioms(f: &FieldTable) {
        let b = f.order();
        for x in 0..b {
            assert_eq!(f.add(x, 0), x);
            assert_eq!(f.mul(x, 1), x);
            assert_eq!(f.mul(x, 0), 0);
            assert_eq!(f.add(x, f.neg(x)), 0);
            if x != 0 {
                assert_eq!(f.mul(x, f.inv(x)), 1, "inverse of {} in GF({})", x, b);
            }
            for y in 0..b {
                assert_eq!(f.add(x, y), f.add(y, x));
                assert_eq!(f.mul(x, y), f.mul(y, x));
                for z in 0..b {
                    assert_eq!(f.add(f.add(x, y), z), f.add(x, f.add(y, z)));
                    assert_eq!(f.mul(f.mul(x, y), z), f.mul(x, f.mul(y, z)));
                    assert_eq!(f.mul(x, f.add(y, z)), f.add(f.mul(x, y), f.mul(x, z)));
                }
            }
        }
    }

    #[test]
    fn gf4_axioms_and_structure() {
        let f = FieldTable::new(4).unwrap();
        assert_field_axioms(&f);
        // characteristic 2: x + x = 0 for all x
        for x in 0..4u8 {
            assert_eq!(f.add(x, x), 0);
        }
        // multiplicative group is cyclic of order 3
        for g in 2..4u8 {
            let mut seen = [false; 4];
            let mut acc = 1u8;
            for _ in 0..3 {
                seen[acc as usize] = true;
                acc = f.mul(acc, g);
            }
            assert_eq!(acc, 1);
            assert!(seen[1] && seen[2] && seen[3], "{} generates GF(4)*", g);
        }
    }

    #[test]
    fn axioms_hold_for_all_supported_bases() {
        for b in 2..=MAX_BASE {
            if let Ok(f) = FieldTable::new(b) {
                assert_field_axioms(&f);
            }
        }
    }

    #[test]
    fn rejects_non_prime_powers_with_neighbours() {
        let err = FieldTable::new(6).unwrap_err();
        assert_eq!(err.below, Some(5));
        assert_eq!(err.above, Some(7));
        let err = FieldTable::new(12).unwrap_err();
        assert_eq!(err.below, Some(11));
        assert_eq!(err.above, Some(13));
        assert!(FieldTable::new(0).is_err());
        assert!(FieldTable::new(1).is_err());
        let msg = FieldTable::new(6).unwrap_err().to_string();
        assert!(msg.contains('5') && msg.contains('7'), "{}", msg);
    }

    #[test]
    fn supported_base_list_matches_prime_powers() {
        let expected = [
            2u8, 3, 4, 5, 7, 8, 9, 11, 13, 16, 17, 19, 23, 25, 27, 29, 31, 32, 37, 41, 43, 47, 49,
            53, 59, 61, 64,
        ];
        let got: Vec<u8> = (2..=MAX_BASE)
            .filter(|&b| FieldTable::new(b).is_ok())
            .collect();
        assert_eq!(got, expected);
    }
}
