//! Marked point patterns over a finite label set.
//!
//! A pattern couples point locations inside a window with categorical marks.
//! The mark space carries a positive reference weight per label (counting
//! measure by default, the empirical mark distribution for random-labelling
//! models); mark-set totals of those weights are the `nu(C)` factors in the
//! K normalization. Patterns are simple: two points never share a location.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geom::{Point, Window};

/// Index of a label in its [`MarkSpace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Mark(pub usize);

/// Finite label set plus a positive reference weight per label.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkSpace {
    labels: Vec<String>,
    nu: Vec<f64>,
}

/// Subset of a mark space, stored as a bitmask. Mark spaces are capped at 64
/// labels so that set membership stays a single AND.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarkSet(u64);

pub const MAX_MARKS: usize = 64;

impl MarkSpace {
    /// Counting reference measure: weight 1 for every label.
    pub fn counting<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let nu = vec![1.0; labels.len()];
        Self::with_weights(labels, &nu)
    }

    pub fn with_weights<S: AsRef<str>>(labels: &[S], nu: &[f64]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidMarkSpace("no labels".into()));
        }
        if labels.len() > MAX_MARKS {
            return Err(Error::InvalidMarkSpace(format!(
                "at most {MAX_MARKS} labels supported, got {}",
                labels.len()
            )));
        }
        if nu.len() != labels.len() {
            return Err(Error::InvalidMarkSpace(format!(
                "{} labels but {} weights",
                labels.len(),
                nu.len()
            )));
        }
        let labels: Vec<String> = labels.iter().map(|s| s.as_ref().to_string()).collect();
        for (i, a) in labels.iter().enumerate() {
            if a.is_empty() {
                return Err(Error::InvalidMarkSpace("empty label".into()));
            }
            if labels[..i].contains(a) {
                return Err(Error::InvalidMarkSpace(format!("duplicate label `{a}`")));
            }
        }
        for (l, &w) in labels.iter().zip(nu) {
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::InvalidMarkSpace(format!(
                    "weight for `{l}` must be positive and finite, got {w}"
                )));
            }
        }
        Ok(MarkSpace {
            labels,
            nu: nu.to_vec(),
        })
    }

    /// Empirical mark distribution: weight `count / total` per label. This is
    /// the reference measure of the factorized random-labelling model.
    pub fn empirical<S: AsRef<str>>(labels: &[S], counts: &[usize]) -> Result<Self> {
        if counts.len() != labels.len() {
            return Err(Error::InvalidMarkSpace(format!(
                "{} labels but {} counts",
                labels.len(),
                counts.len()
            )));
        }
        let total: usize = counts.iter().sum();
        if total == 0 || counts.contains(&0) {
            return Err(Error::InvalidMarkSpace(
                "empirical weights need at least one point of every label".into(),
            ));
        }
        let nu: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Self::with_weights(labels, &nu)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, m: Mark) -> &str {
        &self.labels[m.0]
    }

    pub fn index_of(&self, label: &str) -> Option<Mark> {
        self.labels.iter().position(|l| l == label).map(Mark)
    }

    pub fn nu(&self, m: Mark) -> f64 {
        self.nu[m.0]
    }

    /// Total reference weight of a mark set, `nu(C)`.
    pub fn nu_total(&self, set: MarkSet) -> f64 {
        self.marks()
            .filter(|m| set.contains(*m))
            .map(|m| self.nu(m))
            .sum()
    }

    pub fn marks(&self) -> impl Iterator<Item = Mark> + '_ {
        (0..self.labels.len()).map(Mark)
    }

    pub fn all(&self) -> MarkSet {
        MarkSet::full(self.labels.len())
    }

    /// Resolve a list of labels into a set, rejecting unknown names.
    pub fn set_of<S: AsRef<str>>(&self, labels: &[S]) -> Result<MarkSet> {
        let mut set = MarkSet::empty();
        for l in labels {
            let m = self
                .index_of(l.as_ref())
                .ok_or_else(|| Error::UnknownMark(l.as_ref().to_string()))?;
            set = set.insert(m);
        }
        Ok(set)
    }
}

impl MarkSet {
    pub fn empty() -> Self {
        MarkSet(0)
    }

    pub fn full(n: usize) -> Self {
        debug_assert!(n <= MAX_MARKS);
        if n == MAX_MARKS {
            MarkSet(u64::MAX)
        } else {
            MarkSet((1u64 << n) - 1)
        }
    }

    pub fn single(m: Mark) -> Self {
        MarkSet(1u64 << m.0)
    }

    #[must_use]
    pub fn insert(self, m: Mark) -> Self {
        MarkSet(self.0 | (1u64 << m.0))
    }

    pub fn contains(self, m: Mark) -> bool {
        self.0 & (1u64 << m.0) != 0
    }

    pub fn union(self, other: MarkSet) -> Self {
        MarkSet(self.0 | other.0)
    }

    pub fn intersects(self, other: MarkSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn count(self) -> usize {
        self.0.count_ones() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkedPoint {
    pub loc: Point,
    pub mark: Mark,
}

/// What to do when two input points share an exact location.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DedupPolicy {
    /// Refuse the input.
    Reject,
    /// Keep the first occurrence, drop the rest, report the count.
    KeepFirst,
}

/// A simple marked point pattern: locations inside `window`, marks indexing
/// into `markspace`, no two points at the same location.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedPattern {
    window: Window,
    markspace: Arc<MarkSpace>,
    points: Vec<MarkedPoint>,
}

impl MarkedPattern {
    /// Build a pattern, rejecting duplicate locations.
    pub fn new(window: Window, markspace: MarkSpace, points: Vec<MarkedPoint>) -> Result<Self> {
        let (pat, dropped) = Self::with_policy(window, markspace, points, DedupPolicy::Reject)?;
        debug_assert_eq!(dropped, 0);
        Ok(pat)
    }

    /// Build a pattern under an explicit duplicate policy. Returns the
    /// pattern together with the number of dropped duplicates.
    pub fn with_policy(
        window: Window,
        markspace: MarkSpace,
        points: Vec<MarkedPoint>,
        policy: DedupPolicy,
    ) -> Result<(Self, usize)> {
        let markspace = Arc::new(markspace);
        let mut seen: HashMap<(u64, u64), ()> = HashMap::with_capacity(points.len());
        let mut kept = Vec::with_capacity(points.len());
        let mut dropped = 0usize;
        for (i, p) in points.into_iter().enumerate() {
            if !p.loc.is_finite() {
                return Err(Error::InvalidPattern(format!(
                    "point {i} has a non-finite coordinate"
                )));
            }
            if !window.contains(p.loc) {
                return Err(Error::InvalidPattern(format!(
                    "point {i} at ({}, {}) lies outside the window",
                    p.loc.x, p.loc.y
                )));
            }
            if p.mark.0 >= markspace.len() {
                return Err(Error::InvalidPattern(format!(
                    "point {i} carries mark index {} but the mark space has {} labels",
                    p.mark.0,
                    markspace.len()
                )));
            }
            let key = (p.loc.x.to_bits(), p.loc.y.to_bits());
            if seen.insert(key, ()).is_some() {
                match policy {
                    DedupPolicy::Reject => {
                        return Err(Error::DuplicateLocations { count: 1 });
                    }
                    DedupPolicy::KeepFirst => {
                        dropped += 1;
                        continue;
                    }
                }
            }
            kept.push(p);
        }
        Ok((
            MarkedPattern {
                window,
                markspace,
                points: kept,
            },
            dropped,
        ))
    }

    /// Internal constructor for points that are known to be valid, used by
    /// simulators and the translation test where collisions have
    /// probability zero.
    pub(crate) fn from_parts(
        window: Window,
        markspace: Arc<MarkSpace>,
        points: Vec<MarkedPoint>,
    ) -> Self {
        MarkedPattern {
            window,
            markspace,
            points,
        }
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn markspace(&self) -> &MarkSpace {
        &self.markspace
    }

    pub(crate) fn markspace_arc(&self) -> Arc<MarkSpace> {
        Arc::clone(&self.markspace)
    }

    pub fn points(&self) -> &[MarkedPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn count_with(&self, set: MarkSet) -> usize {
        self.points.iter().filter(|p| set.contains(p.mark)).count()
    }

    /// Per-label point counts, in label order.
    pub fn mark_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.markspace.len()];
        for p in &self.points {
            counts[p.mark.0] += 1;
        }
        counts
    }

    /// Same locations with all marks collapsed onto a single label. The
    /// random-labelling comparisons use this as the unmarked ground pattern.
    pub fn ground(&self) -> MarkedPattern {
        let markspace = Arc::new(MarkSpace::counting(&["ground"]).expect("static labels"));
        let points = self
            .points
            .iter()
            .map(|p| MarkedPoint {
                loc: p.loc,
                mark: Mark(0),
            })
            .collect();
        MarkedPattern {
            window: self.window,
            markspace,
            points,
        }
    }

    /// Same locations carrying a new mark vector (the permutation step of
    /// the random-labelling test).
    pub fn with_marks(&self, marks: &[Mark]) -> Result<MarkedPattern> {
        if marks.len() != self.points.len() {
            return Err(Error::InvalidPattern(format!(
                "{} marks for {} points",
                marks.len(),
                self.points.len()
            )));
        }
        if let Some(m) = marks.iter().find(|m| m.0 >= self.markspace.len()) {
            return Err(Error::InvalidPattern(format!(
                "mark index {} out of range",
                m.0
            )));
        }
        let points = self
            .points
            .iter()
            .zip(marks)
            .map(|(p, &mark)| MarkedPoint { loc: p.loc, mark })
            .collect();
        Ok(MarkedPattern {
            window: self.window,
            markspace: Arc::clone(&self.markspace),
            points,
        })
    }
}
