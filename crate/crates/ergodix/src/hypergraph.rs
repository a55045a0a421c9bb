//! Directed hypergraphs with linear-time reachability.
//!
//! A hyperarc is an ordered pair (tail set, head set). A node is reachable
//! from a source set if it lies in the source, or some hyperarc whose tail is
//! entirely reachable has it in its head. [`Hypergraph::reach`] computes the
//! closure by counter-based forward chaining: every arc keeps a count of
//! not-yet-reached tail nodes and fires exactly once, when the count hits
//! zero. Total work is linear in `size = n + sum(|tail| + |head|)`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::state_set::StateSet;

/// An ordered pair of nonempty node sets.
///
/// Tail and head are allowed to intersect: divergence hypergraphs of
/// self-dependent coordinates naturally contain arcs such as `({3}, {3})`.
/// Arcs whose head is covered by their own tail can never change a
/// reachability closure, so they are harmless to every query here.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Hyperarc {
    tail: StateSet,
    head: StateSet,
}

impl Hyperarc {
    pub fn new(tail: StateSet, head: StateSet) -> Result<Self> {
        if tail.is_empty() || head.is_empty() {
            return Err(Error::InvalidArgument(
                "hyperarc tail and head must be nonempty".into(),
            ));
        }
        Ok(Hyperarc { tail, head })
    }

    /// Convenience constructor from 1-based member lists.
    pub fn from_members(
        tail: impl IntoIterator<Item = u32>,
        head: impl IntoIterator<Item = u32>,
    ) -> Result<Self> {
        Hyperarc::new(StateSet::new(tail), StateSet::new(head))
    }

    pub fn tail(&self) -> &StateSet {
        &self.tail
    }

    pub fn head(&self) -> &StateSet {
        &self.head
    }
}

impl std::fmt::Display for Hyperarc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} -> {}", self.tail, self.head)
    }
}

/// Firing and decrement counters reported by [`Hypergraph::reach_with_stats`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReachStats {
    /// Arcs whose tail became fully reached (each at most once).
    pub firings: usize,
    /// Tail-counter decrements (at most `sum |tail|`).
    pub decrements: usize,
}

/// An immutable directed hypergraph over nodes `{1, ..., n}`.
///
/// Construction sorts arcs into a canonical order and indexes them by tail
/// membership, so equality is structural and repeated `reach` calls share the
/// index. Each `reach` call allocates its own counters; concurrent queries on
/// one graph are safe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypergraph {
    n: usize,
    arcs: Vec<Hyperarc>,
    // node (0-based) -> indices of arcs whose tail contains it
    tail_index: Vec<Vec<u32>>,
}

impl Hypergraph {
    pub fn new(n: usize, mut arcs: Vec<Hyperarc>) -> Result<Self> {
        for arc in &arcs {
            if !arc.tail.in_range(n) || !arc.head.in_range(n) {
                return Err(Error::InvalidArgument(format!(
                    "arc {arc} references nodes outside 1..={n}"
                )));
            }
        }
        arcs.sort();
        arcs.dedup();
        let mut tail_index = vec![Vec::new(); n];
        for (k, arc) in arcs.iter().enumerate() {
            for s in arc.tail.iter() {
                tail_index[(s - 1) as usize].push(k as u32);
            }
        }
        Ok(Hypergraph {
            n,
            arcs,
            tail_index,
        })
    }

    pub fn empty(n: usize) -> Self {
        Hypergraph {
            n,
            arcs: Vec::new(),
            tail_index: vec![Vec::new(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn arcs(&self) -> &[Hyperarc] {
        &self.arcs
    }

    /// `n + sum over arcs of (|tail| + |head|)`.
    pub fn size(&self) -> usize {
        self.n
            + self
                .arcs
                .iter()
                .map(|a| a.tail.len() + a.head.len())
                .sum::<usize>()
    }

    /// All nodes reachable from `source`, in `O(size)` time.
    pub fn reach(&self, source: &StateSet) -> Result<StateSet> {
        self.reach_with_stats(source).map(|(set, _)| set)
    }

    /// [`Hypergraph::reach`] plus work counters, used to check the linear-work
    /// contract.
    pub fn reach_with_stats(&self, source: &StateSet) -> Result<(StateSet, ReachStats)> {
        if !source.in_range(self.n) {
            return Err(Error::InvalidArgument(format!(
                "source {source} references nodes outside 1..={}",
                self.n
            )));
        }
        let mut visited = vec![false; self.n];
        let mut remaining: Vec<u32> = self.arcs.iter().map(|a| a.tail.len() as u32).collect();
        let mut stack: Vec<u32> = Vec::with_capacity(source.len());
        for s in source.iter() {
            let v = (s - 1) as usize;
            if !visited[v] {
                visited[v] = true;
                stack.push(s - 1);
            }
        }
        let mut stats = ReachStats::default();
        while let Some(v) = stack.pop() {
            for &ai in &self.tail_index[v as usize] {
                let r = &mut remaining[ai as usize];
                *r -= 1;
                stats.decrements += 1;
                if *r == 0 {
                    stats.firings += 1;
                    for s in self.arcs[ai as usize].head.iter() {
                        let h = (s - 1) as usize;
                        if !visited[h] {
                            visited[h] = true;
                            stack.push(s - 1);
                        }
                    }
                }
            }
        }
        let set = StateSet::new(
            visited
                .iter()
                .enumerate()
                .filter(|(_, &v)| v)
                .map(|(i, _)| i as u32 + 1),
        );
        Ok((set, stats))
    }

    /// True iff `s` contains everything reachable from itself.
    pub fn is_invariant(&self, s: &StateSet) -> Result<bool> {
        Ok(self.reach(s)?.is_subset_of(s))
    }

    /// True iff some stored arc has head `{head}` and tail contained in
    /// `tail`. With minimal-tail storage of a tail-monotone arc family this is
    /// exactly membership of `(tail, {head})` in the family.
    pub fn covers(&self, tail: &StateSet, head: u32) -> bool {
        self.arcs
            .iter()
            .any(|a| a.head.len() == 1 && a.head.contains(head) && a.tail.is_subset_of(tail))
    }

    /// Returns a graph extended with `arc`, keeping only tails that are
    /// inclusion-minimal per head: the arc is dropped if an existing arc with
    /// the same head has a subset tail, and existing same-head arcs with
    /// superset tails are removed. For tail-monotone arc families this
    /// preserves every reachability closure.
    pub fn insert_minimal(&self, arc: Hyperarc) -> Result<Hypergraph> {
        if !arc.tail.in_range(self.n) || !arc.head.in_range(self.n) {
            return Err(Error::InvalidArgument(format!(
                "arc {arc} references nodes outside 1..={}",
                self.n
            )));
        }
        // Dominance first: a duplicate counts as dominated and must leave the
        // stored copy in place.
        if self
            .arcs
            .iter()
            .any(|a| a.head == arc.head && a.tail.is_subset_of(&arc.tail))
        {
            return Ok(self.clone());
        }
        let mut arcs: Vec<Hyperarc> = self
            .arcs
            .iter()
            .filter(|a| !(a.head == arc.head && arc.tail.is_subset_of(&a.tail)))
            .cloned()
            .collect();
        arcs.push(arc);
        Hypergraph::new(self.n, arcs)
    }

    /// GraphViz rendering. Singleton-tail arcs become plain edges; an arc with
    /// a larger tail gets an auxiliary diamond node with edges tail -> diamond
    /// and diamond -> head. Nodes and arcs are emitted in sorted order.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph {name} {{");
        let _ = writeln!(out, "  rankdir=LR;");
        for v in 1..=self.n {
            let _ = writeln!(out, "  n{v} [label=\"{v}\", shape=circle];");
        }
        let mut aux = 0usize;
        for arc in &self.arcs {
            if arc.tail.len() == 1 {
                let t = arc.tail.iter().next().unwrap();
                for h in arc.head.iter() {
                    let _ = writeln!(out, "  n{t} -> n{h};");
                }
            } else {
                let _ = writeln!(
                    out,
                    "  a{aux} [shape=diamond, label=\"\", width=0.15, height=0.15];"
                );
                for t in arc.tail.iter() {
                    let _ = writeln!(out, "  n{t} -> a{aux};");
                }
                for h in arc.head.iter() {
                    let _ = writeln!(out, "  a{aux} -> n{h};");
                }
                aux += 1;
            }
        }
        let _ = writeln!(out, "}}");
        out
    }
}

/// Mutable accumulation phase for a hypergraph, used by the divergence-pair
/// builders. `push_minimal` has the same dominance semantics as
/// [`Hypergraph::insert_minimal`] without rebuilding the index each time.
#[derive(Debug, Clone)]
pub struct HypergraphBuilder {
    n: usize,
    arcs: Vec<Hyperarc>,
}

impl HypergraphBuilder {
    pub fn new(n: usize) -> Self {
        HypergraphBuilder {
            n,
            arcs: Vec::new(),
        }
    }

    pub fn push_minimal(&mut self, arc: Hyperarc) {
        debug_assert!(arc.tail.in_range(self.n) && arc.head.in_range(self.n));
        if self
            .arcs
            .iter()
            .any(|a| a.head == arc.head && a.tail.is_subset_of(&arc.tail))
        {
            return;
        }
        self.arcs
            .retain(|a| !(a.head == arc.head && arc.tail.is_subset_of(&a.tail)));
        self.arcs.push(arc);
    }

    pub fn build(self) -> Hypergraph {
        Hypergraph::new(self.n, self.arcs).expect("builder arcs validated on push")
    }
}
