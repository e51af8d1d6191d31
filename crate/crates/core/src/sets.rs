//! Finite unions of real intervals with exact endpoint semantics.
//!
//! Every [`RealLineSet`] is kept in canonical form: intervals sorted by lower
//! endpoint, pairwise disjoint and non-adjacent. Two sets are equal as point
//! sets exactly when their representations are equal, so `==` is set equality.
//!
//! Endpoints are compared exactly. When endpoints come out of floating-point
//! eigenvalue computations use [`RealLineSet::normalize_approx`], which snaps
//! endpoints that agree up to a relative tolerance before merging.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A non-empty real interval. Unbounded endpoints are always open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IntervalRepr", into = "IntervalRepr")]
pub struct Interval {
    lo: f64,
    hi: f64,
    lo_closed: bool,
    hi_closed: bool,
}

impl Interval {
    /// Validating constructor. Infinite endpoints are forced open; an empty
    /// interval such as `[1, 1)` is rejected.
    pub fn new(lo: f64, hi: f64, lo_closed: bool, hi_closed: bool) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() {
            return Err(Error::InvalidInterval("NaN endpoint".into()));
        }
        if lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(Error::InvalidInterval(format!("degenerate infinite interval ({lo}, {hi})")));
        }
        let lo_closed = lo_closed && lo.is_finite();
        let hi_closed = hi_closed && hi.is_finite();
        if lo > hi {
            return Err(Error::InvalidInterval(format!("lower endpoint {lo} exceeds upper endpoint {hi}")));
        }
        if lo == hi && !(lo_closed && hi_closed) {
            return Err(Error::InvalidInterval(format!("empty interval at {lo}")));
        }
        Ok(Self { lo, hi, lo_closed, hi_closed })
    }

    fn raw(lo: f64, hi: f64, lo_closed: bool, hi_closed: bool) -> Option<Self> {
        Self::new(lo, hi, lo_closed, hi_closed).ok()
    }

    /// `[lo, hi]`
    pub fn closed(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, true, true)
    }

    /// `(lo, hi)`
    pub fn open(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, false, false)
    }

    /// `[lo, hi)`
    pub fn closed_open(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, true, false)
    }

    /// `(lo, hi]`
    pub fn open_closed(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, false, true)
    }

    /// The degenerate interval `[x, x]`.
    pub fn point(x: f64) -> Result<Self> {
        Self::new(x, x, true, true)
    }

    /// `[x, ∞)`
    pub fn at_least(x: f64) -> Result<Self> {
        Self::new(x, f64::INFINITY, true, false)
    }

    /// `(x, ∞)`
    pub fn greater_than(x: f64) -> Result<Self> {
        Self::new(x, f64::INFINITY, false, false)
    }

    /// `(-∞, x]`
    pub fn at_most(x: f64) -> Result<Self> {
        Self::new(f64::NEG_INFINITY, x, false, true)
    }

    /// `(-∞, x)`
    pub fn less_than(x: f64) -> Result<Self> {
        Self::new(f64::NEG_INFINITY, x, false, false)
    }

    /// The whole real line.
    pub fn everything() -> Self {
        Self { lo: f64::NEG_INFINITY, hi: f64::INFINITY, lo_closed: false, hi_closed: false }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn lo_closed(&self) -> bool {
        self.lo_closed
    }

    pub fn hi_closed(&self) -> bool {
        self.hi_closed
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = x > self.lo || (self.lo_closed && x == self.lo);
        let below = x < self.hi || (self.hi_closed && x == self.hi);
        above && below
    }

    /// Translate by `p`.
    pub fn shift(&self, p: f64) -> Self {
        Self { lo: self.lo + p, hi: self.hi + p, ..*self }
    }

    fn intersect(&self, other: &Interval) -> Option<Interval> {
        let (lo, lo_closed) = match cmp_lower(self, other) {
            Ordering::Less => (other.lo, other.lo_closed),
            _ => (self.lo, self.lo_closed),
        };
        let (hi, hi_closed) = match cmp_upper(self, other) {
            Ordering::Greater => (other.hi, other.hi_closed),
            _ => (self.hi, self.hi_closed),
        };
        Interval::raw(lo, hi, lo_closed, hi_closed)
    }
}

/// Order of lower endpoints: the smaller (looser) lower bound first.
fn cmp_lower(a: &Interval, b: &Interval) -> Ordering {
    a.lo.partial_cmp(&b.lo).unwrap().then_with(|| b.lo_closed.cmp(&a.lo_closed))
}

/// Order of upper endpoints: the smaller (tighter) upper bound first.
fn cmp_upper(a: &Interval, b: &Interval) -> Ordering {
    a.hi.partial_cmp(&b.hi).unwrap().then_with(|| a.hi_closed.cmp(&b.hi_closed))
}

/// `b` starts inside or right at the end of `a` (so the two can be merged).
fn touches(a: &Interval, b: &Interval) -> bool {
    b.lo < a.hi || (b.lo == a.hi && (a.hi_closed || b.lo_closed))
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_point() {
            return write!(f, "{{{}}}", self.lo);
        }
        let l = if self.lo_closed { '[' } else { '(' };
        let r = if self.hi_closed { ']' } else { ')' };
        let lo = if self.lo.is_infinite() { "-inf".to_string() } else { self.lo.to_string() };
        let hi = if self.hi.is_infinite() { "inf".to_string() } else { self.hi.to_string() };
        write!(f, "{l}{lo}, {hi}{r}")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum EndpointRepr {
    Finite(f64),
    Sentinel(String),
}

impl EndpointRepr {
    fn value(self) -> std::result::Result<f64, String> {
        match self {
            EndpointRepr::Finite(x) => Ok(x),
            EndpointRepr::Sentinel(s) => match s.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(format!("unknown endpoint sentinel {other:?}")),
            },
        }
    }

    fn from_value(x: f64) -> Self {
        if x == f64::INFINITY {
            EndpointRepr::Sentinel("inf".into())
        } else if x == f64::NEG_INFINITY {
            EndpointRepr::Sentinel("-inf".into())
        } else {
            EndpointRepr::Finite(x)
        }
    }
}

#[derive(Serialize, Deserialize)]
struct IntervalRepr {
    lo: EndpointRepr,
    hi: EndpointRepr,
    lo_closed: bool,
    hi_closed: bool,
}

impl TryFrom<IntervalRepr> for Interval {
    type Error = String;

    fn try_from(r: IntervalRepr) -> std::result::Result<Self, String> {
        Interval::new(r.lo.value()?, r.hi.value()?, r.lo_closed, r.hi_closed).map_err(|e| e.to_string())
    }
}

impl From<Interval> for IntervalRepr {
    fn from(i: Interval) -> Self {
        IntervalRepr {
            lo: EndpointRepr::from_value(i.lo),
            hi: EndpointRepr::from_value(i.hi),
            lo_closed: i.lo_closed,
            hi_closed: i.hi_closed,
        }
    }
}

/// Set operations accepted by [`RealLineSet::combine`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetOp {
    Union,
    Intersect,
    Subtract,
}

/// A finite union of real intervals in canonical form.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<Interval>", into = "Vec<Interval>")]
pub struct RealLineSet {
    intervals: Vec<Interval>,
}

impl RealLineSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn everything() -> Self {
        Self { intervals: vec![Interval::everything()] }
    }

    pub fn from_interval(i: Interval) -> Self {
        Self { intervals: vec![i] }
    }

    /// Finite point set `{x₁, …, xₙ}`. Non-finite points are rejected.
    pub fn from_points(points: &[f64]) -> Result<Self> {
        let raw = points
            .iter()
            .map(|&x| {
                if x.is_finite() {
                    Interval::point(x)
                } else {
                    Err(Error::InvalidInterval(format!("point {x} is not finite")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::normalize(raw))
    }

    /// Canonical representation of the union of `raw`.
    pub fn normalize(mut raw: Vec<Interval>) -> Self {
        raw.sort_by(|a, b| cmp_lower(a, b).then_with(|| cmp_upper(b, a)));
        let mut out: Vec<Interval> = Vec::with_capacity(raw.len());
        for iv in raw {
            match out.last_mut() {
                Some(cur) if touches(cur, &iv) => {
                    if cmp_upper(&iv, cur) == Ordering::Greater {
                        cur.hi = iv.hi;
                        cur.hi_closed = iv.hi_closed;
                    }
                }
                _ => out.push(iv),
            }
        }
        Self { intervals: out }
    }

    /// Like [`normalize`](Self::normalize), but endpoints that agree within
    /// `tol · max(1, |x|)` are first snapped to a common value (the smallest
    /// of the group). Intended for endpoints produced by floating-point
    /// eigenvalue computations.
    pub fn normalize_approx(raw: Vec<Interval>, tol: f64) -> Self {
        let mut ends: Vec<f64> = raw
            .iter()
            .flat_map(|i| [i.lo, i.hi])
            .filter(|x| x.is_finite())
            .collect();
        ends.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut reps: Vec<f64> = Vec::new();
        for x in ends {
            match reps.last() {
                Some(&r) if (x - r).abs() <= tol * r.abs().max(1.0) => {}
                _ => reps.push(x),
            }
        }
        let snap = |x: f64| -> f64 {
            if !x.is_finite() {
                return x;
            }
            // largest representative not above x + tolerance
            let idx = reps.partition_point(|&r| r <= x);
            let cand = [idx.checked_sub(1), Some(idx)]
                .into_iter()
                .flatten()
                .filter_map(|i| reps.get(i).copied())
                .min_by(|a, b| (a - x).abs().partial_cmp(&(b - x).abs()).unwrap());
            match cand {
                Some(r) if (x - r).abs() <= tol * r.abs().max(1.0) => r,
                _ => x,
            }
        };
        let snapped = raw
            .into_iter()
            .filter_map(|i| Interval::raw(snap(i.lo), snap(i.hi), i.lo_closed, i.hi_closed))
            .collect();
        Self::normalize(snapped)
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|i| i.contains(x))
    }

    /// Infimum of the set (`+∞` for the empty set).
    pub fn infimum(&self) -> f64 {
        self.intervals.first().map_or(f64::INFINITY, |i| i.lo)
    }

    /// Supremum of the set (`-∞` for the empty set).
    pub fn supremum(&self) -> f64 {
        self.intervals.last().map_or(f64::NEG_INFINITY, |i| i.hi)
    }

    pub fn complement(&self) -> Self {
        let mut out = Vec::with_capacity(self.intervals.len() + 1);
        let mut lo = f64::NEG_INFINITY;
        let mut lo_closed = false;
        for iv in &self.intervals {
            if let Some(gap) = Interval::raw(lo, iv.lo, lo_closed, !iv.lo_closed) {
                out.push(gap);
            }
            lo = iv.hi;
            lo_closed = !iv.hi_closed;
        }
        if lo < f64::INFINITY {
            if let Some(gap) = Interval::raw(lo, f64::INFINITY, lo_closed, false) {
                out.push(gap);
            }
        }
        Self { intervals: out }
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut raw = self.intervals.clone();
        raw.extend_from_slice(&other.intervals);
        Self::normalize(raw)
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let mut raw = Vec::new();
        let (a, b) = (&self.intervals, &other.intervals);
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            if let Some(x) = a[i].intersect(&b[j]) {
                raw.push(x);
            }
            // advance whichever interval ends first
            if cmp_upper(&a[i], &b[j]) == Ordering::Greater {
                j += 1;
            } else {
                i += 1;
            }
        }
        Self::normalize(raw)
    }

    pub fn subtract(&self, other: &Self) -> Self {
        self.intersect(&other.complement())
    }

    pub fn combine(&self, other: &Self, op: SetOp) -> Self {
        match op {
            SetOp::Union => self.union(other),
            SetOp::Intersect => self.intersect(other),
            SetOp::Subtract => self.subtract(other),
        }
    }

    pub fn shift(&self, p: f64) -> Self {
        Self { intervals: self.intervals.iter().map(|i| i.shift(p)).collect() }
    }

    /// `⋃ₚ (p + S)`; the empty point list gives the empty set.
    pub fn minkowski_add_points(points: &[f64], set: &Self) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter(format!("shift {p} is not finite")));
        }
        let raw = points.iter().flat_map(|&p| set.intervals.iter().map(move |i| i.shift(p))).collect();
        Ok(Self::normalize(raw))
    }

    /// Restriction to `(-∞, x]`.
    pub fn truncate_above(&self, x: f64) -> Self {
        match Interval::at_most(x) {
            Ok(i) => self.intersect(&Self::from_interval(i)),
            Err(_) => self.clone(),
        }
    }
}

impl TryFrom<Vec<Interval>> for RealLineSet {
    type Error = String;

    fn try_from(v: Vec<Interval>) -> std::result::Result<Self, String> {
        Ok(Self::normalize(v))
    }
}

impl From<RealLineSet> for Vec<Interval> {
    fn from(s: RealLineSet) -> Self {
        s.intervals
    }
}

impl From<Interval> for RealLineSet {
    fn from(i: Interval) -> Self {
        Self::from_interval(i)
    }
}

impl fmt::Display for RealLineSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.intervals.is_empty() {
            return write!(f, "∅");
        }
        for (k, i) in self.intervals.iter().enumerate() {
            if k > 0 {
                write!(f, " ∪ ")?;
            }
            write!(f, "{i}")?;
        }
        Ok(())
    }
}
