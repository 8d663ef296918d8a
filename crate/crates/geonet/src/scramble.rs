//! Nested uniform (Owen) scrambling with reproducible keyed randomness.
//!
//! The permutation applied to digit k+1 of coordinate j depends on the
//! first k unscrambled digits of that coordinate. The conceptual tree of
//! permutations is never materialized: the permutation for a node is
//! derived on demand from a 64-bit hash chain over (key, coordinate,
//! digit prefix), fed through a splitmix64 stream driving Fisher-Yates.
//! Identical prefixes therefore reproduce identical permutations, across
//! points and across calls, and distinct replication indices give
//! independent streams that can run in any order.

use crate::nets::DigitalNet;

/// How permutations are derived from a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScrambleMode {
    /// Keyed pseudo-random permutations (the production mode).
    Keyed,
    /// Every permutation is the identity; for exactness tests.
    Identity,
}

/// Identifies one replication's permutation family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScrambleKey {
    pub seed: u64,
    pub replication: u64,
    pub mode: ScrambleMode,
}

impl ScrambleKey {
    pub fn new(seed: u64, replication: u64) -> Self {
        ScrambleKey {
            seed,
            replication,
            mode: ScrambleMode::Keyed,
        }
    }

    pub fn identity() -> Self {
        ScrambleKey {
            seed: 0,
            replication: 0,
            mode: ScrambleMode::Identity,
        }
    }
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const COORD_SALT: u64 = 0x5851_f42d_4c95_7f2d;
const PERM_SALT: u64 = 0xd6e8_feb8_6659_fd93;

/// splitmix64 finalizer; a bijective 64-bit mix.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// splitmix64 stream.
#[derive(Debug, Clone)]
pub(crate) struct SplitMix64(pub u64);

impl SplitMix64 {
    #[inline]
    pub fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(GOLDEN);
        mix64(self.0)
    }
}

#[inline]
fn master_state(key: &ScrambleKey) -> u64 {
    mix64(key.seed ^ mix64(key.replication ^ GOLDEN))
}

#[inline]
fn coord_state(master: u64, j: usize) -> u64 {
    mix64(master ^ (j as u64 + 1).wrapping_mul(COORD_SALT))
}

/// Advances the prefix hash chain by one consumed digit.
#[inline]
fn step_state(h: u64, digit: u8) -> u64 {
    mix64(h.wrapping_add((digit as u64 + 1).wrapping_mul(GOLDEN)))
}

/// Fisher-Yates permutation of Z_b from a seeded splitmix64 stream.
#[inline]
fn derive_perm(state: u64, b: u8, out: &mut [u8; 64]) {
    for (d, o) in out.iter_mut().enumerate().take(b as usize) {
        *o = d as u8;
    }
    let mut rng = SplitMix64(mix64(state ^ PERM_SALT));
    for i in (1..b as usize).rev() {
        let j = (rng.next() % (i as u64 + 1)) as usize;
        out.swap(i, j);
    }
}

/// Keyed, lazily derived family of random permutations of Z_b indexed by
/// (coordinate, digit prefix).
#[derive(Debug, Clone)]
pub struct PermutationTree {
    base: u8,
    key: ScrambleKey,
    master: u64,
}

impl PermutationTree {
    pub fn new(base: u8, key: ScrambleKey) -> Self {
        PermutationTree {
            base,
            key,
            master: master_state(&key),
        }
    }

    pub fn base(&self) -> u8 {
        self.base
    }

    pub fn key(&self) -> ScrambleKey {
        self.key
    }

    /// The permutation applied at digit position `prefix.len() + 1` of
    /// coordinate `j`, given the preceding unscrambled digits.
    pub fn permutation_for(&self, j: usize, prefix: &[u8]) -> Vec<u8> {
        let mut perm = [0u8; 64];
        match self.key.mode {
            ScrambleMode::Identity => {
                for (d, p) in perm.iter_mut().enumerate().take(self.base as usize) {
                    *p = d as u8;
                }
            }
            ScrambleMode::Keyed => {
                let mut h = coord_state(self.master, j);
                for &d in prefix {
                    debug_assert!(d < self.base);
                    h = step_state(h, d);
                }
                derive_perm(h, self.base, &mut perm);
            }
        }
        perm[..self.base as usize].to_vec()
    }
}

/// Applies a nested uniform scramble to every point of the net.
///
/// Output digit u(i,j,k+1) = pi_{j,(a(i,j,1..k))}(a(i,j,k+1)) where the
/// prefixes are the original digits, so one permutation family is shared
/// by all n points. The scrambled net keeps base, m, t, s, and depth.
pub fn scramble_net(net: &DigitalNet, key: &ScrambleKey) -> DigitalNet {
    if key.mode == ScrambleMode::Identity {
        return net.clone();
    }
    let b = net.base;
    let master = master_state(key);
    let n = net.n();
    let mut digits = vec![0u8; n * net.s * net.depth];
    let mut perm = [0u8; 64];
    for i in 0..n {
        for j in 0..net.s {
            let src = net.point_digits(i, j);
            let dst = &mut digits[(i * net.s + j) * net.depth..(i * net.s + j + 1) * net.depth];
            let mut h = coord_state(master, j);
            for (k, &d) in src.iter().enumerate() {
                derive_perm(h, b, &mut perm);
                dst[k] = perm[d as usize];
                h = step_state(h, d);
            }
        }
    }
    net.with_digits(digits)
}

/// Sampler for iid uniform digit strings in a fixed base.
///
/// Equivalent to nested-uniform-scrambling an all-zero digit string: the
/// digit at each depth is a fresh uniform permutation applied to 0, so
/// the output string maps to an exactly uniform point of the domain.
#[derive(Debug, Clone)]
pub struct UniformDigitSampler {
    base: u8,
    master: u64,
}

impl UniformDigitSampler {
    pub fn new(base: u8, key: &ScrambleKey) -> Self {
        UniformDigitSampler {
            base,
            master: master_state(key),
        }
    }

    /// Fills `out` with `count` iid uniform digits for stream `j`.
    pub fn fill(&self, j: usize, count: usize, out: &mut Vec<u8>) {
        out.clear();
        let mut h = coord_state(self.master, j);
        let mut perm = [0u8; 64];
        for _ in 0..count {
            derive_perm(h, self.base, &mut perm);
            out.push(perm[0]);
            h = step_state(h, 0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldTable;
    use crate::nets::{default_depth, faure_generators, generate_net, verify_net};
    use crate::stats::chi_square_pvalue;

    fn net(b: u8, s: usize, m: usize) -> DigitalNet {
        let gen = faure_generators(FieldTable::new(b).unwrap(), s, m).unwrap();
        generate_net(&gen, default_depth(b, m as u32)).unwrap()
    }

    #[test]
    fn same_query_same_permutation() {
        let tree = PermutationTree::new(4, ScrambleKey::new(42, 7));
        let a = tree.permutation_for(1, &[3, 0, 2]);
        let b = tree.permutation_for(1, &[3, 0, 2]);
        assert_eq!(a, b);
        assert_ne!(a, tree.permutation_for(0, &[3, 0, 2]));
        assert_ne!(a, tree.permutation_for(1, &[3, 0, 1]));
    }

    #[test]
    fn base2_swap_frequency_is_half() {
        let tree = PermutationTree::new(2, ScrambleKey::new(11, 0));
        let mut swaps = 0u32;
        let trials = 10_000u32;
        for p in 0..trials {
            // 14 digit positions make every trial's prefix distinct
            let prefix: Vec<u8> = (0..14).map(|k| ((p >> k) & 1) as u8).collect();
            if tree.permutation_for(0, &prefix) == [1, 0] {
                swaps += 1;
            }
        }
        let freq = swaps as f64 / trials as f64;
        assert!((freq - 0.5).abs() < 0.02, "swap frequency {}", freq);
    }

    /// Lehmer rank of a permutation of Z_4 in 0..24.
    fn perm_rank(p: &[u8]) -> usize {
        let mut rank = 0;
        for i in 0..p.len() {
            let smaller = p[i + 1..].iter().filter(|&&x| x < p[i]).count();
            rank = rank * (p.len() - i) + smaller;
        }
        rank
    }

    #[test]
    fn base4_permutations_uniform_over_24() {
        let tree = PermutationTree::new(4, ScrambleKey::new(5, 1));
        let trials = 100_000u32;
        let mut counts = [0u32; 24];
        for t in 0..trials {
            let prefix: Vec<u8> = (0..9).map(|k| ((t >> (2 * k)) & 3) as u8).collect();
            counts[perm_rank(&tree.permutation_for(0, &prefix))] += 1;
        }
        let p = 1.0 / 24.0;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        for (r, &c) in counts.iter().enumerate() {
            let freq = c as f64 / trials as f64;
            assert!((freq - p).abs() <= 3.0 * sigma, "perm {} freq {}", r, freq);
        }
    }

    #[test]
    fn identity_mode_is_identity() {
        let nt = net(4, 2, 3);
        let out = scramble_net(&nt, &ScrambleKey::identity());
        assert_eq!(nt, out);
    }

    #[test]
    fn scramble_matches_permutation_for() {
        // digit-prefix consistency: re-derive every scrambled digit from
        // the tree queried with the original prefix
        let nt = net(4, 2, 2);
        let key = ScrambleKey::new(99, 3);
        let tree = PermutationTree::new(4, key);
        let out = scramble_net(&nt, &key);
        for i in 0..nt.n() {
            for j in 0..nt.s {
                let orig = nt.point_digits(i, j);
                let scr = out.point_digits(i, j);
                for k in 0..nt.depth {
                    let perm = tree.permutation_for(j, &orig[..k]);
                    assert_eq!(scr[k], perm[orig[k] as usize], "i={} j={} k={}", i, j, k);
                }
            }
        }
    }

    #[test]
    fn scrambled_nets_keep_the_net_property() {
        let nt = net(4, 2, 3);
        for rep in 0..10 {
            let out = scramble_net(&nt, &ScrambleKey::new(2024, rep));
            assert!(verify_net(&out, 0).unwrap().ok, "rep {}", rep);
        }
    }

    #[test]
    fn scrambled_single_point_uniform_on_unit_interval() {
        // chi-square over 16 equal bins, alpha = 0.001
        let nt = net(4, 1, 1);
        let keys = 10_000u64;
        let mut counts = [0u64; 16];
        for k in 0..keys {
            let out = scramble_net(&nt, &ScrambleKey::new(1234, k));
            let x = out.coordinate(0, 0);
            counts[(x * 16.0) as usize] += 1;
        }
        let expected = keys as f64 / 16.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        let p = chi_square_pvalue(chi2, 15.0);
        assert!(p > 0.001, "chi2 = {}, p = {}", chi2, p);
    }

    #[test]
    fn marginal_digit_uniform_over_keys() {
        // fixed (i, j): scrambled digit at several depths uniform on Z_4
        let nt = net(4, 2, 2);
        let keys = 4000u64;
        for depth in [0usize, 1, 3, 10] {
            let mut counts = [0u64; 4];
            for k in 0..keys {
                let out = scramble_net(&nt, &ScrambleKey::new(77, k));
                counts[out.digit(5, 1, depth) as usize] += 1;
            }
            let expected = keys as f64 / 4.0;
            let chi2: f64 = counts
                .iter()
                .map(|&c| (c as f64 - expected).powi(2) / expected)
                .sum();
            let p = chi_square_pvalue(chi2, 3.0);
            assert!(p > 0.001, "depth {}: chi2 = {}", depth, chi2);
        }
    }

    #[test]
    fn keys_separate_by_seed_and_replication() {
        let nt = net(4, 2, 2);
        let base = scramble_net(&nt, &ScrambleKey::new(8, 1));
        assert_ne!(base, scramble_net(&nt, &ScrambleKey::new(8, 2)));
        assert_ne!(base, scramble_net(&nt, &ScrambleKey::new(9, 1)));
        assert_eq!(base, scramble_net(&nt, &ScrambleKey::new(8, 1)));
        let t1 = PermutationTree::new(4, ScrambleKey::new(8, 1));
        let t2 = PermutationTree::new(4, ScrambleKey::new(8, 2));
        let distinct = (0..64u8)
            .filter(|&p| t1.permutation_for(0, &[p % 4]) != t2.permutation_for(0, &[p % 4]))
            .count();
        assert!(distinct > 0, "replication index must matter");
    }

    #[test]
    fn uniform_digit_sampler_matches_zero_scramble() {
        let key = ScrambleKey::new(4, 9);
        let sampler = UniformDigitSampler::new(4, &key);
        let mut digits = Vec::new();
        sampler.fill(1, 8, &mut digits);
        let tree = PermutationTree::new(4, key);
        let mut prefix: Vec<u8> = Vec::new();
        for &d in &digits {
            let perm = tree.permutation_for(1, &prefix);
            assert_eq!(d, perm[0]);
            prefix.push(0);
        }
    }
}
