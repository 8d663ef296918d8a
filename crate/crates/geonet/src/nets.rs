//! Digital (0,m,s)-net construction and verification.
//!
//! Generator matrices follow the Faure construction generalized to prime
//! power bases: generator `j` is the upper-triangular Pascal matrix
//! evaluated at the `(j-1)`-th field element, `P(a)[r][c] = C(c,r) a^(c-r)`.
//! For prime bases this is exactly the `(j-1)`-th power of the Pascal
//! matrix. The stacked-row nonsingularity condition that makes the point
//! set a (0,m,s)-net is checked exhaustively at construction time, and
//! `verify_net` re-derives the net property from the points alone by
//! counting digits in every b-adic box shape.

use std::fmt;

use crate::field::{FieldTable, NonPrimePower};

/// Construction and I/O errors for digital nets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NetError {
    Field(NonPrimePower),
    /// No (0,m,s)-net is constructed here for s > b.
    DimensionTooLarge {
        s: usize,
        b: u8,
    },
    BadParameter(String),
    /// A stacked generator submatrix was singular; the construction is broken.
    SingularStack {
        shape: Vec<u32>,
    },
    Parse(String),
}

impl fmt::Display for NetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetError::Field(e) => e.fmt(f),
            NetError::DimensionTooLarge { s, b } => write!(
                f,
                "no (0,m,{})-net in base {}: the Faure construction requires s <= b",
                s, b
            ),
            NetError::BadParameter(msg) => write!(f, "{}", msg),
            NetError::SingularStack { shape } => {
                write!(f, "stacked generator rows singular for shape {:?}", shape)
            }
            NetError::Parse(msg) => write!(f, "net parse error: {}", msg),
        }
    }
}

impl std::error::Error for NetError {}

impl From<NonPrimePower> for NetError {
    fn from(e: NonPrimePower) -> Self {
        NetError::Field(e)
    }
}

/// Generator matrices for a (0,m,s)-net in base b.
#[derive(Debug, Clone)]
pub struct GeneratorSet {
    field: FieldTable,
    s: usize,
    m: usize,
    /// s row-major m x m matrices with entries in GF(b).
    matrices: Vec<Vec<u8>>,
}

/// A digital net as an n x s x K tensor of base-b digits.
///
/// Point i's coordinate j is `sum_k digit(i,j,k) b^(-k-1)`; digit index 0
/// is the most significant. Digits are exact integers, so equality of
/// digit prefixes is the exact counterpart of b-adic box membership.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitalNet {
    pub base: u8,
    pub m: u32,
    pub t: u32,
    pub s: usize,
    /// Digit depth K >= m.
    pub depth: usize,
    digits: Vec<u8>,
}

/// Outcome of a net-property check; violations are reported, not thrown.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetCheck {
    pub ok: bool,
    pub violation: Option<NetViolation>,
}

/// First offending b-adic box found by `verify_net`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetViolation {
    /// Box shape (k_1, ..., k_s) with sum = m - t.
    pub shape: Vec<u32>,
    /// Per-coordinate digit prefixes identifying the box.
    pub box_digits: Vec<Vec<u8>>,
    pub count: u64,
    pub expected: u64,
}

impl fmt::Display for NetViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "box shape {:?} digits {:?} holds {} points, expected {}",
            self.shape, self.box_digits, self.count, self.expected
        )
    }
}

/// Default digit depth: enough digits that centroid maps resolve below
/// double precision, never less than m.
pub fn default_depth(b: u8, m: u32) -> usize {
    let per_digit = (b as f64).log2();
    (m as usize).max((52.0 / per_digit).ceil() as usize)
}

/// Upper-triangular Pascal matrix evaluated at field element `alpha`.
fn pascal_at(field: &FieldTable, m: usize, alpha: u8) -> Vec<u8> {
    // binomials built inside the field so reduction mod char is automatic
    let mut binom = vec![0u8; m * m];
    for c in 0..m {
        binom[c] = 1; // C(c, 0)
        for r in 1..=c {
            let prev = binom[(r - 1) * m + c - 1];
            let same = if r < c { binom[r * m + c - 1] } else { 0 };
            binom[r * m + c] = field.add(prev, same);
        }
    }
    let mut mat = vec![0u8; m * m];
    for r in 0..m {
        for c in r..m {
            mat[r * m + c] = field.mul(binom[r * m + c], field.pow(alpha, (c - r) as u32));
        }
    }
    mat
}

/// All compositions of `total` into `parts` non-negative integers.
fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; parts];
    fn rec(total: u32, idx: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if idx + 1 == cur.len() {
            cur[idx] = total;
            out.push(cur.clone());
            return;
        }
        for v in 0..=total {
            cur[idx] = v;
            rec(total - v, idx + 1, cur, out);
        }
    }
    if parts == 0 {
        if total == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(total, 0, &mut cur, &mut out);
    out
}

/// Rank of a k x m matrix over GF(b) by Gaussian elimination.
fn rank_over_field(field: &FieldTable, rows: &mut [Vec<u8>], m: usize) -> usize {
    let mut rank = 0;
    for col in 0..m {
        let Some(pivot) = (rank..rows.len()).find(|&r| rows[r][col] != 0) else {
            continue;
        };
        rows.swap(rank, pivot);
        let inv = field.inv(rows[rank][col]);
        for v in rows[rank][col..m].iter_mut() {
            *v = field.mul(*v, inv);
        }
        let pivot_row = rows[rank][col..m].to_vec();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && row[col] != 0 {
                let factor = row[col];
                for (v, &pv) in row[col..m].iter_mut().zip(&pivot_row) {
                    *v = field.sub(*v, field.mul(factor, pv));
                }
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

impl GeneratorSet {
    pub fn base(&self) -> u8 {
        self.field.order()
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn matrix(&self, j: usize) -> &[u8] {
        &self.matrices[j]
    }

    /// Checks the (0,m,s) condition: for every composition (k_1,...,k_s)
    /// of m, the matrix stacking the first k_j rows of each generator is
    /// nonsingular over GF(b).
    pub fn check_stacked_nonsingular(&self) -> Result<(), NetError> {
        for shape in compositions(self.m as u32, self.s) {
            let mut rows: Vec<Vec<u8>> = Vec::with_capacity(self.m);
            for (j, &kj) in shape.iter().enumerate() {
                for r in 0..kj as usize {
                    rows.push(self.matrices[j][r * self.m..(r + 1) * self.m].to_vec());
                }
            }
            if rank_over_field(&self.field, &mut rows, self.m) != self.m {
                return Err(NetError::SingularStack { shape });
            }
        }
        Ok(())
    }
}

/// Builds the s generator matrices for a (0,m,s)-net in base b = field order.
///
/// Requires s <= b. Generator 1 is the identity (the van der Corput
/// construction); the rest evaluate the Pascal matrix at successive
/// nonzero field elements.
pub fn faure_generators(field: FieldTable, s: usize, m: usize) -> Result<GeneratorSet, NetError> {
    if s == 0 {
        return Err(NetError::BadParameter("dimension s must be >= 1".into()));
    }
    if m == 0 {
        return Err(NetError::BadParameter("m must be >= 1".into()));
    }
    if s > field.order() as usize {
        return Err(NetError::DimensionTooLarge {
            s,
            b: field.order(),
        });
    }
    let matrices: Vec<Vec<u8>> = (0..s).map(|j| pascal_at(&field, m, j as u8)).collect();
    let set = GeneratorSet {
        field,
        s,
        m,
        matrices,
    };
    set.check_stacked_nonsingular()?;
    Ok(set)
}

/// Generates the b^m points of the net as a digit tensor of depth K >= m.
///
/// Point i's coordinate-j digits are generator j applied to the base-b
/// digit vector of i; digits beyond position m are zero; t = 0.
pub fn generate_net(gen: &GeneratorSet, depth: usize) -> Result<DigitalNet, NetError> {
    let b = gen.base();
    let m = gen.m;
    if depth < m {
        return Err(NetError::BadParameter(format!(
            "depth K = {} must be >= m = {}",
            depth, m
        )));
    }
    let n = (b as u64)
        .checked_pow(m as u32)
        .filter(|&n| n <= 1 << 28)
        .ok_or_else(|| NetError::BadParameter(format!("net size b^m = {}^{} too large", b, m)))?
        as usize;

    let mut digits = vec![0u8; n * gen.s * depth];
    let mut idx_digits = vec![0u8; m];
    for i in 0..n {
        // base-b digits of i, least significant first
        let mut v = i;
        for d in idx_digits.iter_mut() {
            *d = (v % b as usize) as u8;
            v /= b as usize;
        }
        for j in 0..gen.s {
            let mat = &gen.matrices[j];
            let out = &mut digits[(i * gen.s + j) * depth..(i * gen.s + j) * depth + m];
            for (r, o) in out.iter_mut().enumerate() {
                let mut acc = 0u8;
                for (c, &d) in idx_digits.iter().enumerate() {
                    if d != 0 {
                        acc = gen.field.add(acc, gen.field.mul(mat[r * m + c], d));
                    }
                }
                *o = acc;
            }
        }
    }
    Ok(DigitalNet {
        base: b,
        m: m as u32,
        t: 0,
        s: gen.s,
        depth,
        digits,
    })
}

impl DigitalNet {
    pub fn n(&self) -> usize {
        (self.base as usize).pow(self.m)
    }

    #[inline]
    pub fn digit(&self, i: usize, j: usize, k: usize) -> u8 {
        self.digits[(i * self.s + j) * self.depth + k]
    }

    /// All K digits of point i in coordinate j, most significant first.
    #[inline]
    pub fn point_digits(&self, i: usize, j: usize) -> &[u8] {
        &self.digits[(i * self.s + j) * self.depth..(i * self.s + j + 1) * self.depth]
    }

    pub fn from_digits(
        base: u8,
        m: u32,
        t: u32,
        s: usize,
        depth: usize,
        digits: Vec<u8>,
    ) -> Result<Self, NetError> {
        if !(2..=64).contains(&base) {
            return Err(NetError::BadParameter(format!("base {} out of range 2..=64", base)));
        }
        let n = (base as u64)
            .checked_pow(m)
            .filter(|&n| n <= 1 << 28)
            .ok_or_else(|| NetError::BadParameter(format!("net size {}^{} too large", base, m)))?
            as usize;
        if digits.len() != n * s * depth {
            return Err(NetError::BadParameter(format!(
                "digit tensor has {} entries, expected n*s*K = {}",
                digits.len(),
                n * s * depth
            )));
        }
        if let Some(&d) = digits.iter().find(|&&d| d >= base) {
            return Err(NetError::BadParameter(format!(
                "digit {} out of range for base {}",
                d, base
            )));
        }
        Ok(DigitalNet {
            base,
            m,
            t,
            s,
            depth,
            digits,
        })
    }

    /// Coordinate j of point i as a float in [0,1), truncated at depth K.
    pub fn coordinate(&self, i: usize, j: usize) -> f64 {
        let mut x = 0.0;
        let mut scale = 1.0 / self.base as f64;
        for &d in self.point_digits(i, j) {
            x += d as f64 * scale;
            scale /= self.base as f64;
        }
        x
    }

    /// Replaces the digit tensor; used by the scrambler.
    pub(crate) fn with_digits(&self, digits: Vec<u8>) -> DigitalNet {
        debug_assert_eq!(digits.len(), self.digits.len());
        DigitalNet { digits, ..*self }
    }
}

/// Checks the (t,m,s) equidistribution property by exhaustive box counting.
///
/// True iff every b-adic box of volume b^(t-m) holds exactly b^t points.
/// Counting is done on integer digits; no floating point is involved.
pub fn verify_net(net: &DigitalNet, t: u32) -> Result<NetCheck, NetError> {
    if t > net.m {
        return Err(NetError::BadParameter(format!(
            "t = {} must be <= m = {}",
            t, net.m
        )));
    }
    let b = net.base as u64;
    let n = net.n();
    let expected = b.pow(t);
    let boxes = b.pow(net.m - t) as usize;
    let mut counts = vec![0u64; boxes];
    for shape in compositions(net.m - t, net.s) {
        counts.iter_mut().for_each(|c| *c = 0);
        for i in 0..n {
            let mut idx = 0u64;
            for (j, &kj) in shape.iter().enumerate() {
                let digits = net.point_digits(i, j);
                for &d in &digits[..kj as usize] {
                    idx = idx * b + d as u64;
                }
            }
            counts[idx as usize] += 1;
        }
        if let Some((bad, &count)) = counts.iter().enumerate().find(|&(_, &c)| c != expected) {
            // decode the offending box index back into per-coordinate digits
            let mut box_digits: Vec<Vec<u8>> = Vec::with_capacity(net.s);
            let mut rem = bad as u64;
            let total: u32 = shape.iter().sum();
            let mut place = b.pow(total);
            for &kj in &shape {
                let mut coord = Vec::with_capacity(kj as usize);
                for _ in 0..kj {
                    place /= b;
                    coord.push((rem / place) as u8);
                    rem %= place;
                }
                box_digits.push(coord);
            }
            return Ok(NetCheck {
                ok: false,
                violation: Some(NetViolation {
                    shape,
                    box_digits,
                    count,
                    expected,
                }),
            });
        }
    }
    Ok(NetCheck {
        ok: true,
        violation: None,
    })
}

/// Writes the plain-text digit format: header `b m t s K n`, then one
/// line per point with s*K space-separated digits. Lines starting with
/// `#` are comments.
pub fn write_net<W: std::io::Write>(
    net: &DigitalNet,
    comments: &[String],
    out: &mut W,
) -> std::io::Result<()> {
    for c in comments {
        writeln!(out, "# {}", c)?;
    }
    writeln!(
        out,
        "{} {} {} {} {} {}",
        net.base,
        net.m,
        net.t,
        net.s,
        net.depth,
        net.n()
    )?;
    let mut line = String::new();
    for i in 0..net.n() {
        line.clear();
        for j in 0..net.s {
            for &d in net.point_digits(i, j) {
                if !line.is_empty() {
                    line.push(' ');
                }
                line.push_str(itoa(d));
            }
        }
        writeln!(out, "{}", line)?;
    }
    Ok(())
}

fn itoa(d: u8) -> &'static str {
    const TABLE: [&str; 64] = [
        "0", "1", "2", "3", "4", "5", "6", "7", "8", "9", "10", "11", "12", "13", "14", "15", "16",
        "17", "18", "19", "20", "21", "22", "23", "24", "25", "26", "27", "28", "29", "30", "31",
        "32", "33", "34", "35", "36", "37", "38", "39", "40", "41", "42", "43", "44", "45", "46",
        "47", "48", "49", "50", "51", "52", "53", "54", "55", "56", "57", "58", "59", "60", "61",
        "62", "63",
    ];
    TABLE[d as usize]
}

/// Parses the plain-text digit format produced by [`write_net`].
pub fn read_net<R: std::io::BufRead>(input: R) -> Result<DigitalNet, NetError> {
    let mut lines = input.lines();
    let header = loop {
        match lines.next() {
            Some(Ok(line)) => {
                let trimmed = line.trim().to_string();
                if trimmed.is_empty() || trimmed.starts_with('#') {
                    continue;
                }
                break trimmed;
            }
            Some(Err(e)) => return Err(NetError::Parse(e.to_string())),
            None => return Err(NetError::Parse("missing header line".into())),
        }
    };
    let fields: Vec<u64> = header
        .split_whitespace()
        .map(|f| {
            f.parse::<u64>()
                .map_err(|e| NetError::Parse(format!("header field {:?}: {}", f, e)))
        })
        .collect::<Result<_, _>>()?;
    let [b, m, t, s, depth, n] = fields[..] else {
        return Err(NetError::Parse(format!(
            "header has {} fields, expected 6",
            fields.len()
        )));
    };
    if !(2..=64).contains(&b) {
        return Err(NetError::Parse(format!("base {} out of range", b)));
    }
    let expected_n = b
        .checked_pow(m as u32)
        .filter(|&v| v <= 1 << 28)
        .ok_or_else(|| NetError::Parse(format!("net size {}^{} too large", b, m)))?;
    if n != expected_n {
        return Err(NetError::Parse(format!("n = {} does not equal b^m = {}", n, expected_n)));
    }
    if (depth as u32) < m as u32 {
        return Err(NetError::Parse(format!("depth {} below m = {}", depth, m)));
    }
    let mut digits = Vec::with_capacity((n * s * depth) as usize);
    for line in lines {
        let line = line.map_err(|e| NetError::Parse(e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        for tok in trimmed.split_whitespace() {
            let d: u8 = tok
                .parse()
                .map_err(|e| NetError::Parse(format!("digit {:?}: {}", tok, e)))?;
            digits.push(d);
        }
    }
    DigitalNet::from_digits(
        b as u8,
        m as u32,
        t as u32,
        s as usize,
        depth as usize,
        digits,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(b: u8, s: usize, m: usize) -> DigitalNet {
        let field = FieldTable::new(b).unwrap();
        let gen = faure_generators(field, s, m).unwrap();
        generate_net(&gen, default_depth(b, m as u32)).unwrap()
    }

    #[test]
    fn van_der_corput_base2() {
        // s=1 identity generator: digit rows (00),(10),(01),(11)
        let n = net(2, 1, 2);
        let rows: Vec<Vec<u8>> = (0..4).map(|i| n.point_digits(i, 0)[..2].to_vec()).collect();
        assert_eq!(rows, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![1, 1]]);
        let pts: Vec<f64> = (0..4).map(|i| n.coordinate(i, 0)).collect();
        assert_eq!(pts, vec![0.0, 0.5, 0.25, 0.75]);
    }

    #[test]
    fn gf4_s2_generators_are_identity_and_pascal() {
        let field = FieldTable::new(4).unwrap();
        let gen = faure_generators(field, 2, 2).unwrap();
        assert_eq!(gen.matrix(0), &[1, 0, 0, 1]);
        // Pascal at alpha = 1 over GF(4): [[1,1],[0,1]]
        assert_eq!(gen.matrix(1), &[1, 1, 0, 1]);
        gen.check_stacked_nonsingular().unwrap();
    }

    #[test]
    fn stacked_nonsingularity_b3_s3_m3() {
        let field = FieldTable::new(3).unwrap();
        let gen = faure_generators(field, 3, 3).unwrap();
        // construction already checks; enumerate explicitly as an oracle
        assert_eq!(compositions(3, 3).len(), 10);
        gen.check_stacked_nonsingular().unwrap();
    }

    #[test]
    fn rejects_s_above_base() {
        let field = FieldTable::new(3).unwrap();
        let err = faure_generators(field, 4, 2).unwrap_err();
        assert!(matches!(err, NetError::DimensionTooLarge { s: 4, b: 3 }));
    }

    #[test]
    fn digits_beyond_m_are_zero() {
        let n = net(4, 2, 2);
        for i in 0..n.n() {
            for j in 0..n.s {
                assert!(n.point_digits(i, j)[2..].iter().all(|&d| d == 0));
            }
        }
    }

    #[test]
    fn generated_nets_verify_with_t0() {
        for (b, s, m) in [
            (2, 1, 3),
            (2, 2, 4),
            (3, 3, 3),
            (4, 2, 1),
            (4, 2, 3),
            (5, 3, 2),
        ] {
            let nt = net(b, s, m);
            let check = verify_net(&nt, 0).unwrap();
            assert!(check.ok, "b={} s={} m={}: {:?}", b, s, m, check.violation);
        }
    }

    #[test]
    fn trivially_equidistributed_at_t_equals_m() {
        let nt = net(4, 2, 2);
        assert!(verify_net(&nt, 2).unwrap().ok);
        assert!(verify_net(&nt, 0).unwrap().ok);
    }

    #[test]
    fn one_dimensional_projections_are_nets() {
        // each of the b^m intervals [i/b^m, (i+1)/b^m) holds exactly one point
        let nt = net(4, 2, 3);
        let b = nt.base as u64;
        for j in 0..nt.s {
            let mut counts = vec![0u32; nt.n()];
            for i in 0..nt.n() {
                let mut idx = 0u64;
                for &d in &nt.point_digits(i, j)[..nt.m as usize] {
                    idx = idx * b + d as u64;
                }
                counts[idx as usize] += 1;
            }
            assert!(counts.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn duplicated_rows_fail_with_witness() {
        let nt = net(2, 2, 2);
        let mut digits = Vec::new();
        for i in 0..nt.n() {
            let src = if i == 1 { 0 } else { i };
            for j in 0..nt.s {
                digits.extend_from_slice(nt.point_digits(src, j));
            }
        }
        let broken = DigitalNet::from_digits(2, 2, 0, 2, nt.depth, digits).unwrap();
        let check = verify_net(&broken, 0).unwrap();
        assert!(!check.ok);
        let v = check.violation.unwrap();
        assert_eq!(v.expected, 1);
        assert!(v.count != 1);
    }

    #[test]
    fn verify_is_deterministic() {
        let nt = net(4, 2, 3);
        let a = verify_net(&nt, 0).unwrap();
        let b = verify_net(&nt, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let nt = net(4, 2, 2);
        let mut buf = Vec::new();
        write_net(&nt, &["scramble seed=7 replication=3".into()], &mut buf).unwrap();
        let back = read_net(std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(nt, back);
    }

    #[test]
    fn hostile_headers_are_rejected_without_panicking() {
        for text in [
            "100 1 0 1 1 100\n",      // base beyond the digit range
            "4 40 0 1 40 0\n",        // b^m overflows
            "4 2 0 1 2 15\n",         // n disagrees with b^m
            "4 2 0 1 1 16\n",         // depth below m
        ] {
            assert!(read_net(std::io::BufReader::new(text.as_bytes())).is_err(), "{}", text);
        }
        assert!(DigitalNet::from_digits(100, 1, 0, 1, 1, vec![0; 100]).is_err());
        assert!(DigitalNet::from_digits(4, 40, 0, 1, 40, vec![]).is_err());
    }

    #[test]
    fn third_party_base6_nets_import_and_verify() {
        // generation requires a prime-power base, but imported nets in
        // any base pass through verification and scrambling; base-6 van
        // der Corput digits form a (0,2,1)-net
        let b = 6u64;
        let m = 2u32;
        let mut text = String::from("6 2 0 1 2 36\n");
        for i in 0..b.pow(m) {
            text.push_str(&format!("{} {}\n", i % b, i / b));
        }
        let net = read_net(std::io::BufReader::new(text.as_bytes())).unwrap();
        assert!(verify_net(&net, 0).unwrap().ok);
        let scrambled =
            crate::scramble::scramble_net(&net, &crate::scramble::ScrambleKey::new(5, 1));
        assert!(verify_net(&scrambled, 0).unwrap().ok);
    }

    #[test]
    fn default_depth_resolves_f64() {
        assert_eq!(default_depth(2, 3), 52);
        assert_eq!(default_depth(4, 3), 26);
        assert_eq!(default_depth(4, 30), 30);
        assert_eq!(default_depth(64, 2), 9);
    }
}
