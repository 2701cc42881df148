//! Interval algebra on the half-line `[0, +inf)`.
//!
//! Truncation sets are finite unions of disjoint intervals of the
//! perturbation parameter φ. Solving one quadratic inequality yields up to
//! two intervals; the truncation set is the intersection of thousands of
//! such solution sets. This module provides the canonical representation
//! and the set operations, including an event-sweep intersection that
//! handles N sets in `O(E log E)` for E total endpoints.
//!
//! Endpoints carry open/closed flags because the underlying inequalities
//! are strict: solution intervals are open at quadratic roots. The flags
//! are tracked exactly through every operation even though they carry no
//! probability mass downstream.

use std::cmp::Ordering;
use std::fmt;

use serde::ser::{Serialize, SerializeSeq, Serializer};

/// An interval within `[0, +inf)` with open/closed endpoint flags.
///
/// `lo` is finite and nonnegative; `hi` may be `f64::INFINITY`, in which
/// case the upper endpoint is always open. `lo == hi` with both endpoints
/// closed is a singleton; with either endpoint open it is empty (such
/// intervals may be constructed, and vanish when a set is canonicalized).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    /// Lower endpoint.
    pub lo: f64,
    /// Upper endpoint, possibly `f64::INFINITY`.
    pub hi: f64,
    /// Whether the lower endpoint is excluded.
    pub lo_open: bool,
    /// Whether the upper endpoint is excluded.
    pub hi_open: bool,
}

/// A position on the half-line refined by a side tag, so that open and
/// closed endpoints order correctly: `(v,Before) < (v,At) < (v,After)` and
/// all of these precede `(w,Before)` for `v < w`. A closed endpoint sits
/// `At` its value; an open lower endpoint starts `After` it; an open upper
/// endpoint stops `Before` it.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Key(f64, i8);

impl Key {
    fn cmp(self, other: Key) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }

    fn le(self, other: Key) -> bool {
        self.cmp(other) != Ordering::Greater
    }

    /// The next representable position after an endpoint key. Only needed
    /// for upper-endpoint keys, whose side tag is `Before` or `At`.
    fn successor(self) -> Key {
        debug_assert!(self.1 < 1);
        Key(self.0, self.1 + 1)
    }
}

fn drop_negative_zero(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

impl Interval {
    /// Builds an interval, normalizing `-0.0` endpoints and forcing an
    /// infinite upper endpoint to be open.
    ///
    /// Panics if an endpoint is NaN, `lo` is negative or infinite, or
    /// `lo > hi`.
    pub fn new(lo: f64, hi: f64, lo_open: bool, hi_open: bool) -> Interval {
        assert!(lo.is_finite() && lo >= 0.0, "interval lower endpoint must be finite and >= 0, got {lo}");
        assert!(!hi.is_nan() && lo <= hi, "interval endpoints must satisfy lo <= hi, got [{lo}, {hi}]");
        Interval {
            lo: drop_negative_zero(lo),
            hi: drop_negative_zero(hi),
            lo_open,
            hi_open: hi_open || hi == f64::INFINITY,
        }
    }

    /// Whether the interval contains no points.
    pub fn is_empty(&self) -> bool {
        self.lo == self.hi && (self.lo_open || self.hi_open)
    }

    /// Whether `x` lies in the interval, honoring the endpoint flags.
    pub fn contains(&self, x: f64) -> bool {
        let above = x > self.lo || (x == self.lo && !self.lo_open);
        let below = x < self.hi || (x == self.hi && !self.hi_open);
        above && below
    }

    fn start_key(&self) -> Key {
        Key(self.lo, if self.lo_open { 1 } else { 0 })
    }

    fn end_key(&self) -> Key {
        Key(self.hi, if self.hi_open { -1 } else { 0 })
    }

    fn from_keys(start: Key, end: Key) -> Interval {
        debug_assert!(start.1 >= 0 && end.1 <= 0 && start.le(end));
        Interval {
            lo: start.0,
            hi: end.0,
            lo_open: start.1 == 1,
            hi_open: end.1 == -1,
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}, ", if self.lo_open { '(' } else { '[' }, self.lo)?;
        if self.hi.is_finite() {
            write!(f, "{}{}", self.hi, if self.hi_open { ')' } else { ']' })
        } else {
            write!(f, "inf)")
        }
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(4))?;
        seq.serialize_element(&self.lo)?;
        if self.hi.is_finite() {
            seq.serialize_element(&self.hi)?;
        } else {
            seq.serialize_element("inf")?;
        }
        seq.serialize_element(&self.lo_open)?;
        seq.serialize_element(&self.hi_open)?;
        seq.end()
    }
}

/// A finite union of disjoint intervals in `[0, +inf)`, kept in canonical
/// form: sorted, pairwise disjoint, with touching pieces merged whenever
/// their union is itself an interval. Serializes to JSON as a list of
/// `[lo, hi, lo_open, hi_open]` entries with `"inf"` for an infinite upper
/// endpoint.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IntervalSet {
    intervals: Vec<Interval>,
}

impl IntervalSet {
    /// The empty set.
    pub fn empty() -> IntervalSet {
        IntervalSet { intervals: Vec::new() }
    }

    /// The full domain `[0, +inf)`.
    pub fn full() -> IntervalSet {
        IntervalSet {
            intervals: vec![Interval::new(0.0, f64::INFINITY, false, true)],
        }
    }

    /// The union of the given intervals, canonicalized.
    pub fn from_intervals(intervals: Vec<Interval>) -> IntervalSet {
        let mut v = intervals;
        v.retain(|iv| !iv.is_empty());
        v.sort_by(|a, b| {
            a.start_key()
                .cmp(b.start_key())
                .then(a.end_key().cmp(b.end_key()))
        });
        let mut merged: Vec<Interval> = Vec::with_capacity(v.len());
        for iv in v {
            if let Some(last) = merged.last_mut() {
                if iv.start_key().le(last.end_key().successor()) {
                    if last.end_key().le(iv.end_key()) {
                        last.hi = iv.hi;
                        last.hi_open = iv.hi_open;
                    }
                    continue;
                }
            }
            merged.push(iv);
        }
        IntervalSet { intervals: merged }
    }

    /// A set holding a single interval.
    pub fn from_interval(interval: Interval) -> IntervalSet {
        IntervalSet::from_intervals(vec![interval])
    }

    /// The component intervals in canonical order.
    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    /// Whether the set contains no points.
    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Whether `x` lies in the set.
    pub fn contains(&self, x: f64) -> bool {
        self.intervals
            .iter()
            .take_while(|iv| iv.lo <= x)
            .any(|iv| iv.contains(x))
    }

    /// The intersection of two sets, by merging the two sorted interval
    /// lists with a pair of cursors.
    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let (a, b) = (&self.intervals, &other.intervals);
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            let start = if a[i].start_key().le(b[j].start_key()) {
                b[j].start_key()
            } else {
                a[i].start_key()
            };
            let (a_end, b_end) = (a[i].end_key(), b[j].end_key());
            let end = if a_end.le(b_end) { a_end } else { b_end };
            if start.le(end) {
                out.push(Interval::from_keys(start, end));
            }
            if a_end.le(b_end) {
                i += 1;
            }
            if b_end.le(a_end) {
                j += 1;
            }
        }
        IntervalSet { intervals: out }
    }

    /// The intersection of all the given sets in one pass: an event sweep
    /// over endpoint positions that keeps a coverage depth and emits the
    /// maximal runs covered by every set. The intersection of an empty
    /// collection is the full domain.
    pub fn intersect_all(sets: &[IntervalSet]) -> IntervalSet {
        if sets.is_empty() {
            return IntervalSet::full();
        }
        if sets.iter().any(|s| s.is_empty()) {
            return IntervalSet::empty();
        }
        let need = sets.len();
        // An event is (position, phase): phase 0 means coverage begins at
        // the position, phase 1 means it ends just after it. Processing
        // begins-then-ends at equal positions makes singleton overlaps
        // like [0,1] ∩ [1,2] = {1} come out right.
        let mut events = Vec::new();
        for s in sets {
            for iv in &s.intervals {
                events.push((iv.start_key(), 0u8));
                events.push((iv.end_key(), 1u8));
            }
        }
        events.sort_by(|x, y| x.0.cmp(y.0).then(x.1.cmp(&y.1)));

        let mut out = Vec::new();
        let mut depth = 0usize;
        let mut run_start: Option<Key> = None;
        let mut idx = 0;
        while idx < events.len() {
            let pos = events[idx].0;
            while idx < events.len() && events[idx].0 == pos && events[idx].1 == 0 {
                depth += 1;
                idx += 1;
            }
            if depth == need && run_start.is_none() {
                run_start = Some(pos);
            }
            let mut ending = 0;
            while idx < events.len() && events[idx].0 == pos && events[idx].1 == 1 {
                ending += 1;
                idx += 1;
            }
            if ending > 0 {
                let was_covered = depth == need;
                depth -= ending;
                if was_covered && depth < need {
                    out.push(Interval::from_keys(run_start.take().unwrap(), pos));
                }
            }
        }
        debug_assert!(depth == 0 && run_start.is_none());
        IntervalSet { intervals: out }
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.intervals.is_empty() {
            return write!(f, "∅");
        }
        for (k, iv) in self.intervals.iter().enumerate() {
            if k > 0 {
                write!(f, " ∪ ")?;
            }
            write!(f, "{iv}")?;
        }
        Ok(())
    }
}

impl Serialize for IntervalSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.intervals.serialize(serializer)
    }
}
