//! Translation-invariant M-vine structure.
//!
//! The first tree of a bivariate M-vine is the caterpillar
//! `… Y_t — X_t — X_{t+1} — Y_{t+1} …`: a spine of serial edges `X_t—X_{t+1}`
//! with cross pendants `X_t—Y_t`. Read in time order, its edges form the
//! sequence `C_0, S_0, C_1, S_1, …` (C = cross, S = serial), and every higher
//! tree joins neighbouring edges of the tree below, so tree `m` consists of
//! the windows of `m` consecutive first-tree edges. For a single series the
//! sequence is `S_0, S_1, …` and the construction is the usual D-vine.
//!
//! An edge class is identified by the kind of the window's first edge and the
//! window length (the tree level); all windows with the same pair are
//! translates of each other.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Row {
    X,
    Y,
}

/// A variable `row_{t + lag}` relative to the class's reference time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Node {
    pub row: Row,
    pub lag: usize,
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}{}", self.row, self.lag)
    }
}

/// Kind of a first-tree edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeKind {
    /// `X_t — Y_t`
    Cross,
    /// `X_t — X_{t+1}`
    Serial,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeClass {
    pub tree_level: usize,
    /// Kind of the first first-tree edge in the window.
    pub start: EdgeKind,
    /// Copula arguments, in order.
    pub conditioned: [Node; 2],
    pub conditioning: Vec<Node>,
    pub lag_span: usize,
}

impl EdgeClass {
    pub fn label(&self) -> String {
        let [a, b] = self.conditioned;
        if self.conditioning.is_empty() {
            format!("{a},{b}")
        } else {
            let d: Vec<String> = self.conditioning.iter().map(|n| n.to_string()).collect();
            format!("{a},{b}|{}", d.join(","))
        }
    }
}

impl fmt::Display for EdgeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c[{}]", self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MVineStructure {
    d: usize,
    k: usize,
    classes: Vec<EdgeClass>,
}

impl MVineStructure {
    pub fn new(d: usize, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::Input("Markov order must be at least 1".into()));
        }
        if d != 1 && d != 2 {
            return Err(Error::Input(format!("dimension must be 1 or 2, got {d}")));
        }
        let mut classes = Vec::new();
        for m in 1..=max_level(d, k) {
            for kind in [EdgeKind::Cross, EdgeKind::Serial] {
                if d == 1 && kind == EdgeKind::Cross {
                    continue;
                }
                let c = describe(d, kind, m);
                if c.lag_span <= k {
                    classes.push(c);
                }
            }
        }
        Ok(MVineStructure { d, k, classes })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Fitted (non-independence) classes, by tree level then start kind.
    pub fn classes(&self) -> &[EdgeClass] {
        &self.classes
    }

    /// Highest tree level that carries a fitted class.
    pub fn max_level(&self) -> usize {
        max_level(self.d, self.k)
    }

    /// Position of the class `(start, m)` in [`classes`](Self::classes), or
    /// `None` when the class is an implicit independence copula.
    pub fn class_index(&self, start: EdgeKind, m: usize) -> Option<usize> {
        let k = self.k;
        match (self.d, start) {
            (1, EdgeKind::Serial) if (1..=k).contains(&m) => Some(m - 1),
            (2, EdgeKind::Cross) if (1..=2 * k + 1).contains(&m) => Some(2 * (m - 1)),
            (2, EdgeKind::Serial) if (1..=2 * k).contains(&m) => Some(2 * (m - 1) + 1),
            _ => None,
        }
    }

    /// Kind of the `i`-th first-tree edge in time order.
    #[inline]
    pub(crate) fn kind_at(&self, i: usize) -> EdgeKind {
        kind_at(self.d, i)
    }
}

fn max_level(d: usize, k: usize) -> usize {
    if d == 1 {
        k
    } else {
        2 * k + 1
    }
}

#[inline]
pub(crate) fn kind_at(d: usize, i: usize) -> EdgeKind {
    if d == 2 && i.is_multiple_of(2) {
        EdgeKind::Cross
    } else {
        EdgeKind::Serial
    }
}

/// Nodes of global first-tree edge `i`, with absolute times.
fn edge_nodes(d: usize, i: usize) -> [Node; 2] {
    if d == 1 {
        return [Node { row: Row::X, lag: i }, Node { row: Row::X, lag: i + 1 }];
    }
    let t = i / 2;
    match kind_at(d, i) {
        EdgeKind::Cross => [Node { row: Row::X, lag: t }, Node { row: Row::Y, lag: t }],
        EdgeKind::Serial => [Node { row: Row::X, lag: t }, Node { row: Row::X, lag: t + 1 }],
    }
}

/// Conditioned and conditioning sets of the class `(start, m)`.
fn describe(d: usize, start: EdgeKind, m: usize) -> EdgeClass {
    let first = if d == 2 && start == EdgeKind::Serial { 1 } else { 0 };
    let edges: Vec<[Node; 2]> = (first..first + m).map(|i| edge_nodes(d, i)).collect();
    let t0 = edges[0][0].lag;
    let shift = |n: Node| Node { row: n.row, lag: n.lag - t0 };
    let conditioned = if m == 1 {
        edges[0]
    } else {
        let private =
            |e: &[Node; 2], other: &[Node; 2]| *e.iter().find(|n| !other.contains(n)).expect("edges share one node");
        [private(&edges[0], &edges[1]), private(&edges[m - 1], &edges[m - 2])]
    };
    let mut conditioning: Vec<Node> = edges.iter().flatten().copied().filter(|n| !conditioned.contains(n)).collect();
    conditioning.sort();
    conditioning.dedup();
    let conditioned = conditioned.map(shift);
    let conditioning: Vec<Node> = conditioning.into_iter().map(shift).collect();
    let lag_span = conditioned[0].lag.abs_diff(conditioned[1].lag);
    EdgeClass { tree_level: m, start, conditioned, conditioning, lag_span }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(s: &MVineStructure) -> Vec<String> {
        s.classes().iter().map(|c| c.label()).collect()
    }

    #[test]
    fn bivariate_first_order_has_five_classes() {
        let s = MVineStructure::new(2, 1).unwrap();
        assert_eq!(labels(&s), vec!["X0,Y0", "X0,X1", "Y0,X1|X0", "X0,Y1|X1", "Y0,Y1|X0,X1"]);
        let levels: Vec<usize> = s.classes().iter().map(|c| c.tree_level).collect();
        assert_eq!(levels, vec![1, 1, 2, 2, 3]);
    }

    #[test]
    fn univariate_is_a_d_vine() {
        let s = MVineStructure::new(1, 1).unwrap();
        assert_eq!(labels(&s), vec!["X0,X1"]);
        let s = MVineStructure::new(1, 3).unwrap();
        assert_eq!(labels(&s), vec!["X0,X1", "X0,X2|X1", "X0,X3|X1,X2"]);
        let sizes: Vec<usize> = s.classes().iter().map(|c| c.conditioning.len()).collect();
        assert_eq!(sizes, vec![0, 1, 2]);
    }

    #[test]
    fn class_counts_and_lag_spans() {
        for k in 1..=4 {
            let s = MVineStructure::new(2, k).unwrap();
            assert_eq!(s.classes().len(), 4 * k + 1);
            assert!(s.classes().iter().all(|c| c.lag_span <= k));
            assert!(s.classes().iter().all(|c| c.conditioning.len() == c.tree_level - 1));
            for (i, c) in s.classes().iter().enumerate() {
                assert_eq!(s.class_index(c.start, c.tree_level), Some(i));
            }
            // the next level up on either side exceeds the order
            assert_eq!(describe(2, EdgeKind::Cross, 2 * k + 2).lag_span, k + 1);
            assert_eq!(describe(2, EdgeKind::Serial, 2 * k + 1).lag_span, k + 1);
            assert_eq!(s.class_index(EdgeKind::Serial, 2 * k + 1), None);
        }
    }

    #[test]
    fn adjacent_columns_restrict_to_d_vine_path() {
        // first-tree edges touching only columns t and t+1 form Y_t - X_t - X_{t+1} - Y_{t+1}
        for k in 1..=4 {
            let s = MVineStructure::new(2, k).unwrap();
            let first: Vec<&EdgeClass> = s.classes().iter().filter(|c| c.tree_level == 1).collect();
            assert_eq!(first.len(), 2);
            assert_eq!(first[0].conditioned, [Node { row: Row::X, lag: 0 }, Node { row: Row::Y, lag: 0 }]);
            assert_eq!(first[1].conditioned, [Node { row: Row::X, lag: 0 }, Node { row: Row::X, lag: 1 }]);
            // translates of C, S, C within columns {0, 1}
            let path: Vec<[Node; 2]> = (0..3).map(|i| edge_nodes(2, i)).collect();
            let y0 = Node { row: Row::Y, lag: 0 };
            let x0 = Node { row: Row::X, lag: 0 };
            let x1 = Node { row: Row::X, lag: 1 };
            let y1 = Node { row: Row::Y, lag: 1 };
            assert_eq!(path, vec![[x0, y0], [x0, x1], [x1, y1]]);
        }
    }

    #[test]
    fn order_zero_is_rejected() {
        assert!(MVineStructure::new(2, 0).is_err());
        assert!(MVineStructure::new(3, 1).is_err());
    }
}
