//! Recursive b-fold splits of concrete regions and the digit-to-point map.
//!
//! Supported regions are half-open intervals (d = 1, any base) and planar
//! triangles (d = 2, base 4 via midpoint subdivision). A digit string
//! addresses a nested cell; `phi_map` sends it to the centroid of the
//! deepest cell, which is the finite-depth truncation of the split
//! transformation. Split matrices built from child/parent centroid
//! offsets are computed in volume-normalized coordinates, so their
//! closed forms are independent of how the concrete region is scaled.
//!
//! Triangle children of Delta(A,B,C) are labeled
//!   0: Delta(A, (A+B)/2, (A+C)/2)
//!   1: Delta((B+A)/2, B, (B+C)/2)
//!   2: Delta((C+A)/2, (C+B)/2, C)
//!   3: Delta((B+C)/2, (A+C)/2, (A+B)/2)
//! and the export format records this labeling convention.

use std::fmt;

use crate::nets::DigitalNet;

#[derive(Debug, Clone, PartialEq)]
pub enum DomainError {
    BadRegion(String),
    TriangleBase(u8),
    MixedBases(Vec<u8>),
    NetMismatch(String),
    Parse(String),
}

impl fmt::Display for DomainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainError::BadRegion(msg) => write!(f, "bad region: {}", msg),
            DomainError::TriangleBase(b) => {
                write!(f, "triangle splits require base 4, got {}", b)
            }
            DomainError::MixedBases(bs) => {
                write!(f, "product components must share one base, got {:?}", bs)
            }
            DomainError::NetMismatch(msg) => write!(f, "net/domain mismatch: {}", msg),
            DomainError::Parse(msg) => write!(f, "domain parse error: {}", msg),
        }
    }
}

impl std::error::Error for DomainError {}

/// A concrete region that admits a recursive equal-volume split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Interval {
        lo: f64,
        hi: f64,
    },
    Triangle {
        a: [f64; 2],
        b: [f64; 2],
        c: [f64; 2],
    },
}

#[inline]
fn mid(p: [f64; 2], q: [f64; 2]) -> [f64; 2] {
    [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0]
}

#[inline]
fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

impl Region {
    pub fn unit_interval() -> Region {
        Region::Interval { lo: 0.0, hi: 1.0 }
    }

    /// The standard right triangle with corners (0,0), (1,0), (0,1).
    pub fn unit_triangle() -> Region {
        Region::Triangle {
            a: [0.0, 0.0],
            b: [1.0, 0.0],
            c: [0.0, 1.0],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Interval { .. } => 1,
            Region::Triangle { .. } => 2,
        }
    }

    pub fn volume(&self) -> f64 {
        match *self {
            Region::Interval { lo, hi } => hi - lo,
            Region::Triangle { a, b, c } => {
                ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs() / 2.0
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            Region::Interval { lo, hi } => hi - lo,
            Region::Triangle { a, b, c } => dist(a, b).max(dist(b, c)).max(dist(a, c)),
        }
    }

    /// Centroid written into `out[..dim]`.
    pub fn centroid_into(&self, out: &mut [f64]) {
        match *self {
            Region::Interval { lo, hi } => out[0] = (lo + hi) / 2.0,
            Region::Triangle { a, b, c } => {
                out[0] = (a[0] + b[0] + c[0]) / 3.0;
                out[1] = (a[1] + b[1] + c[1]) / 3.0;
            }
        }
    }

    pub fn centroid(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.centroid_into(&mut out);
        out
    }

    /// Child `child` of the b-fold split. Interval children partition in
    /// address order; triangle children follow the midpoint labeling.
    fn child(&self, child: u8, base: u8) -> Region {
        match *self {
            Region::Interval { lo, hi } => {
                let w = (hi - lo) / base as f64;
                Region::Interval {
                    lo: lo + child as f64 * w,
                    hi: lo + (child as f64 + 1.0) * w,
                }
            }
            Region::Triangle { a, b, c } => match child {
                0 => Region::Triangle {
                    a,
                    b: mid(a, b),
                    c: mid(a, c),
                },
                1 => Region::Triangle {
                    a: mid(b, a),
                    b,
                    c: mid(b, c),
                },
                2 => Region::Triangle {
                    a: mid(c, a),
                    b: mid(c, b),
                    c,
                },
                3 => Region::Triangle {
                    a: mid(b, c),
                    b: mid(a, c),
                    c: mid(a, b),
                },
                _ => unreachable!("triangle child out of range"),
            },
        }
    }

    /// True when `x` lies in the region; triangle membership by
    /// barycentric sign with a small tolerance.
    pub fn contains(&self, x: &[f64]) -> bool {
        match *self {
            Region::Interval { lo, hi } => lo <= x[0] && x[0] < hi,
            Region::Triangle { .. } => self.min_barycentric(x) >= -1e-12,
        }
    }

    fn min_barycentric(&self, x: &[f64]) -> f64 {
        let Region::Triangle { a, b, c } = *self else {
            unreachable!()
        };
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (x[1] - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
        l1.min(l2).min(1.0 - l1 - l2)
    }
}

/// A region together with its split base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitScheme {
    pub region: Region,
    pub base: u8,
}

impl SplitScheme {
    pub fn new(region: Region, base: u8) -> Result<Self, DomainError> {
        if base < 2 {
            return Err(DomainError::BadRegion(format!(
                "split base {} must be >= 2",
                base
            )));
        }
        match region {
            Region::Interval { lo, hi } => {
                if !(hi - lo).is_finite() || hi <= lo {
                    return Err(DomainError::BadRegion(format!(
                        "interval [{}, {}) must have positive finite width",
                        lo, hi
                    )));
                }
            }
            Region::Triangle { .. } => {
                if base != 4 {
                    return Err(DomainError::TriangleBase(base));
                }
                if region.volume() <= 0.0 || !region.volume().is_finite() {
                    return Err(DomainError::BadRegion(
                        "triangle vertices are collinear".into(),
                    ));
                }
            }
        }
        Ok(SplitScheme { region, base })
    }

    pub fn interval(lo: f64, hi: f64, base: u8) -> Result<Self, DomainError> {
        SplitScheme::new(Region::Interval { lo, hi }, base)
    }

    pub fn unit_triangle() -> SplitScheme {
        SplitScheme {
            region: Region::unit_triangle(),
            base: 4,
        }
    }

    pub fn dim(&self) -> usize {
        self.region.dim()
    }

    /// Geometry of the cell addressed by a digit path.
    pub fn cell_region(&self, path: &[u8]) -> Region {
        let mut r = self.region;
        for &d in path {
            debug_assert!(d < self.base);
            r = r.child(d, self.base);
        }
        r
    }

    /// Cell (k, t) in level/index addressing: the digit path
    /// is the base-b expansion of t, most significant first.
    pub fn cell_at(&self, level: u32, index: u64) -> CellAddress {
        let mut path = vec![0u8; level as usize];
        let mut t = index;
        for d in path.iter_mut().rev() {
            *d = (t % self.base as u64) as u8;
            t /= self.base as u64;
        }
        debug_assert_eq!(t, 0, "index {} out of range at level {}", index, level);
        CellAddress {
            scheme: *self,
            path,
        }
    }

    pub fn root(&self) -> CellAddress {
        CellAddress {
            scheme: *self,
            path: Vec::new(),
        }
    }

    /// Regions of all cells at a level, in index order (child order).
    pub fn cells_at_level(&self, level: u32) -> Vec<Region> {
        let mut out = vec![self.region];
        for _ in 0..level {
            let mut next = Vec::with_capacity(out.len() * self.base as usize);
            for r in &out {
                for c in 0..self.base {
                    next.push(r.child(c, self.base));
                }
            }
            out = next;
        }
        out
    }

    /// Digit path of the cell containing `x`, to the given depth.
    ///
    /// Points on shared boundaries go to the lowest-index child whose
    /// closed cell contains them (intervals use the half-open rule
    /// directly), so repeated queries agree.
    pub fn locate(&self, x: &[f64], depth: usize) -> Vec<u8> {
        let mut path = Vec::with_capacity(depth);
        let mut r = self.region;
        for _ in 0..depth {
            let d = match r {
                Region::Interval { lo, hi } => {
                    let w = hi - lo;
                    (((x[0] - lo) / w * self.base as f64).floor() as i64)
                        .clamp(0, self.base as i64 - 1) as u8
                }
                Region::Triangle { .. } => {
                    let mut best = 0u8;
                    let mut best_score = f64::NEG_INFINITY;
                    for c in 0..4u8 {
                        let score = r.child(c, 4).min_barycentric(x);
                        if score > best_score {
                            best_score = score;
                            best = c;
                        }
                    }
                    best
                }
            };
            path.push(d);
            r = r.child(d, self.base);
        }
        path
    }

    /// Length normalization that maps the region to unit volume:
    /// offsets are scaled by vol^(-1/d).
    pub fn length_normalizer(&self) -> f64 {
        self.region.volume().powf(-1.0 / self.dim() as f64)
    }
}

/// An addressed cell of a recursive split: level k = path length, digits
/// in Z_b. Its volume is vol(region) * b^(-k).
#[derive(Debug, Clone, PartialEq)]
pub struct CellAddress {
    pub scheme: SplitScheme,
    pub path: Vec<u8>,
}

impl CellAddress {
    pub fn level(&self) -> usize {
        self.path.len()
    }

    pub fn region(&self) -> Region {
        self.scheme.cell_region(&self.path)
    }

    pub fn child(&self, c: u8) -> CellAddress {
        let mut path = self.path.clone();
        path.push(c);
        CellAddress {
            scheme: self.scheme,
            path,
        }
    }

    /// The b children, in label order.
    pub fn split(&self) -> Vec<CellAddress> {
        (0..self.scheme.base).map(|c| self.child(c)).collect()
    }

    /// Centroid of the cell (midpoint for intervals, vertex average for
    /// triangles); the split's center point with zero first moment.
    pub fn center(&self) -> Vec<f64> {
        self.region().centroid()
    }

    /// Exact diameter of the cell.
    pub fn diameter(&self) -> f64 {
        self.region().diameter()
    }

    pub fn volume(&self) -> f64 {
        self.scheme.region.volume() * (self.scheme.base as f64).powi(-(self.level() as i32))
    }

    /// Index t of this cell at its level.
    pub fn index(&self) -> u64 {
        self.path
            .iter()
            .fold(0u64, |acc, &d| acc * self.scheme.base as u64 + d as u64)
    }
}

/// The digit-string transformation: the centroid of the level-K cell
/// addressed by the digits (the finite-K truncation of the split limit).
pub fn phi_map(scheme: &SplitScheme, digits: &[u8], out: &mut [f64]) {
    let mut r = scheme.region;
    for &d in digits {
        r = r.child(d, scheme.base);
    }
    r.centroid_into(out);
}

/// Symmetric split matrix of a cell and its minimum eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitMatrix {
    pub level: u32,
    pub index: u64,
    pub dim: usize,
    /// Row-major d x d entries; only entry (0,0) is meaningful for d = 1.
    pub entries: [[f64; 2]; 2],
    pub lambda_min: f64,
}

/// Builds A = sum_c (n_c - w)(n_c - w)^T from child/parent centroid
/// offsets in volume-normalized coordinates, with the minimum eigenvalue
/// from the closed-form symmetric eigensolve (d <= 2).
pub fn compute_split_matrix(scheme: &SplitScheme, level: u32, index: u64) -> SplitMatrix {
    let cell = scheme.cell_at(level, index);
    let parent = cell.region();
    let scale = scheme.length_normalizer();
    let d = scheme.dim();
    let mut w = [0.0; 2];
    parent.centroid_into(&mut w);
    let mut entries = [[0.0; 2]; 2];
    let mut nc = [0.0; 2];
    for c in 0..scheme.base {
        parent.child(c, scheme.base).centroid_into(&mut nc);
        let off = [(nc[0] - w[0]) * scale, (nc[1] - w[1]) * scale];
        for r in 0..d {
            for q in 0..d {
                entries[r][q] += off[r] * off[q];
            }
        }
    }
    let lambda_min = if d == 1 {
        entries[0][0]
    } else {
        let tr2 = (entries[0][0] + entries[1][1]) / 2.0;
        let gap = ((entries[0][0] - entries[1][1]) / 2.0).powi(2) + entries[0][1].powi(2);
        tr2 - gap.sqrt()
    };
    SplitMatrix {
        level,
        index,
        dim: d,
        entries,
        lambda_min,
    }
}

/// Ordered product of split schemes sharing one base.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductDomain {
    components: Vec<SplitScheme>,
}

impl ProductDomain {
    pub fn new(components: Vec<SplitScheme>) -> Result<Self, DomainError> {
        if components.is_empty() {
            return Err(DomainError::BadRegion(
                "product domain needs >= 1 component".into(),
            ));
        }
        let bases: Vec<u8> = components.iter().map(|c| c.base).collect();
        if bases.iter().any(|&b| b != bases[0]) {
            return Err(DomainError::MixedBases(bases));
        }
        Ok(ProductDomain { components })
    }

    /// s copies of the unit triangle, split in base 4.
    pub fn triangles(s: usize) -> ProductDomain {
        ProductDomain {
            components: vec![SplitScheme::unit_triangle(); s],
        }
    }

    pub fn base(&self) -> u8 {
        self.components[0].base
    }

    pub fn s(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, j: usize) -> &SplitScheme {
        &self.components[j]
    }

    pub fn components(&self) -> &[SplitScheme] {
        &self.components
    }

    pub fn total_dim(&self) -> usize {
        self.components.iter().map(|c| c.dim()).sum()
    }

    pub fn volume(&self) -> f64 {
        self.components.iter().map(|c| c.region.volume()).product()
    }

    /// Offset of component j's coordinates within a flat point.
    pub fn coord_offset(&self, j: usize) -> usize {
        self.components[..j].iter().map(|c| c.dim()).sum()
    }

    /// Short human-readable description for reports.
    pub fn describe(&self) -> String {
        let parts: Vec<String> = self
            .components
            .iter()
            .map(|c| match c.region {
                Region::Interval { lo, hi } => format!("interval {} {} {}", c.base, lo, hi),
                Region::Triangle { a, b, c: cc } => format!(
                    "triangle {} {} {} {} {} {} {}",
                    4, a[0], a[1], b[0], b[1], cc[0], cc[1]
                ),
            })
            .collect();
        parts.join("; ")
    }

    /// Parses a domain spec: shorthand `T2`, `T2^s`, `U`, `U^s`, or the
    /// file format with one `interval b lo hi` / `triangle b Ax Ay Bx By
    /// Cx Cy` line per component. `default_base` feeds the `U` shorthand.
    pub fn parse(spec: &str, default_base: u8) -> Result<ProductDomain, DomainError> {
        let trimmed = spec.trim();
        let shorthand = |name: &str| -> Option<usize> {
            if trimmed == name {
                Some(1)
            } else {
                trimmed
                    .strip_prefix(name)
                    .and_then(|rest| rest.strip_prefix('^'))
                    .and_then(|pow| pow.parse().ok())
            }
        };
        if let Some(s) = shorthand("T2") {
            return Ok(ProductDomain::triangles(s));
        }
        if let Some(s) = shorthand("U") {
            let comp = SplitScheme::interval(0.0, 1.0, default_base)?;
            return ProductDomain::new(vec![comp; s]);
        }
        let mut components = Vec::new();
        for line in trimmed.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let parse_f = |t: &str| {
                t.parse::<f64>()
                    .map_err(|e| DomainError::Parse(format!("{:?}: {}", t, e)))
            };
            let parse_b = |t: &str| {
                t.parse::<u8>()
                    .map_err(|e| DomainError::Parse(format!("{:?}: {}", t, e)))
            };
            match toks.as_slice() {
                ["interval", b, lo, hi] => {
                    components.push(SplitScheme::interval(parse_f(lo)?, parse_f(hi)?, parse_b(b)?)?)
                }
                ["triangle", b, ax, ay, bx, by, cx, cy] => {
                    let region = Region::Triangle {
                        a: [parse_f(ax)?, parse_f(ay)?],
                        b: [parse_f(bx)?, parse_f(by)?],
                        c: [parse_f(cx)?, parse_f(cy)?],
                    };
                    components.push(SplitScheme::new(region, parse_b(b)?)?)
                }
                _ => {
                    return Err(DomainError::Parse(format!(
                        "unrecognized component line {:?} (expected `interval b lo hi` or `triangle b Ax Ay Bx By Cx Cy`)",
                        line
                    )))
                }
            }
        }
        ProductDomain::new(components)
    }
}

/// Points of a product domain stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub dim: usize,
    data: Vec<f64>,
}

impl PointSet {
    pub fn from_flat(dim: usize, data: Vec<f64>) -> PointSet {
        assert!(dim > 0 && data.len().is_multiple_of(dim));
        PointSet { dim, data }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }
}

/// Maps every net point into the product domain componentwise.
pub fn map_net(net: &DigitalNet, dom: &ProductDomain) -> Result<PointSet, DomainError> {
    if net.base != dom.base() {
        return Err(DomainError::NetMismatch(format!(
            "net base {} differs from domain base {}",
            net.base,
            dom.base()
        )));
    }
    if net.s != dom.s() {
        return Err(DomainError::NetMismatch(format!(
            "net dimension s = {} differs from domain component count {}",
            net.s,
            dom.s()
        )));
    }
    let dim = dom.total_dim();
    let n = net.n();
    let mut data = vec![0.0; n * dim];
    for i in 0..n {
        let row = &mut data[i * dim..(i + 1) * dim];
        let mut off = 0;
        for (j, comp) in dom.components().iter().enumerate() {
            let d = comp.dim();
            phi_map(comp, net.point_digits(i, j), &mut row[off..off + d]);
            off += d;
        }
    }
    Ok(PointSet { dim, data })
}
