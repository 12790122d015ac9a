//! Weighted empirical quantiles.
//!
//! [`weighted_empirical_quantile`] realizes the inf definition
//! `inf { q : (1/n) Σ 1{v_i <= q} w_i >= p }` on finite data: candidates are
//! the sorted sample values and the running normalized weight is scanned
//! until it reaches `p`. [`WeightedQuantileTree`] maintains the same query
//! under online insertion in O(log n) per step, which keeps an n-iteration
//! SAA quantile run at O(n log n).

use crate::error::{AdaisError, Result};
use crate::rng::SplitMix64;

/// Smallest sample value at which the running normalized weight reaches `p`.
///
/// Normalization is by the sample count `n`, not the weight total, so with
/// importance weights the level can be temporarily unreachable; that case
/// errors and the caller decides the fallback.
pub fn weighted_empirical_quantile(values: &[f64], weights: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(AdaisError::Usage("quantile of empty sample".into()));
    }
    if values.len() != weights.len() {
        return Err(AdaisError::Usage(format!(
            "values/weights length mismatch: {} vs {}",
            values.len(),
            weights.len()
        )));
    }
    if !(0.0 < p && p < 1.0) {
        return Err(AdaisError::Domain(format!(
            "quantile level must lie in (0,1), got {p}"
        )));
    }
    for (&v, &w) in values.iter().zip(weights) {
        if !v.is_finite() || !w.is_finite() || w < 0.0 {
            return Err(AdaisError::Usage(format!(
                "values must be finite and weights finite nonnegative, got ({v}, {w})"
            )));
        }
    }
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let target = p * n as f64;
    let mut cum = 0.0;
    for &i in &order {
        cum += weights[i];
        if cum >= target {
            return Ok(values[i]);
        }
    }
    Err(AdaisError::LevelUnreachable {
        level: p,
        normalized_total: cum / n as f64,
        n,
    })
}

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node {
    key: f64,
    weight: f64,
    subtree_weight: f64,
    prio: u64,
    left: u32,
    right: u32,
}

/// Treap keyed by sample value, augmented with subtree weight sums.
///
/// Priorities come from a deterministic per-tree stream, so a run that
/// inserts the same (key, weight) sequence rebuilds the same shape.
#[derive(Debug, Clone)]
pub struct WeightedQuantileTree {
    nodes: Vec<Node>,
    root: u32,
    prio: SplitMix64,
}

impl WeightedQuantileTree {
    pub fn new(prio_seed: u64) -> Self {
        Self {
            nodes: Vec::new(),
            root: NIL,
            prio: SplitMix64::new(prio_seed),
        }
    }

    pub fn with_capacity(prio_seed: u64, cap: usize) -> Self {
        Self {
            nodes: Vec::with_capacity(cap),
            root: NIL,
            prio: SplitMix64::new(prio_seed),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        if self.root == NIL {
            0.0
        } else {
            self.nodes[self.root as usize].subtree_weight
        }
    }

    fn update(&mut self, idx: u32) {
        let (l, r) = {
            let n = &self.nodes[idx as usize];
            (n.left, n.right)
        };
        let mut s = self.nodes[idx as usize].weight;
        if l != NIL {
            s += self.nodes[l as usize].subtree_weight;
        }
        if r != NIL {
            s += self.nodes[r as usize].subtree_weight;
        }
        self.nodes[idx as usize].subtree_weight = s;
    }

    /// Split subtree `t` into keys `< key` and keys `>= key`.
    fn split(&mut self, t: u32, key: f64) -> (u32, u32) {
        if t == NIL {
            return (NIL, NIL);
        }
        if self.nodes[t as usize].key < key {
            let right = self.nodes[t as usize].right;
            let (a, b) = self.split(right, key);
            self.nodes[t as usize].right = a;
            self.update(t);
            (t, b)
        } else {
            let left = self.nodes[t as usize].left;
            let (a, b) = self.split(left, key);
            self.nodes[t as usize].left = b;
            self.update(t);
            (a, t)
        }
    }

    fn insert_at(&mut self, t: u32, new: u32) -> u32 {
        if t == NIL {
            return new;
        }
        if self.nodes[new as usize].prio > self.nodes[t as usize].prio {
            let key = self.nodes[new as usize].key;
            let (a, b) = self.split(t, key);
            self.nodes[new as usize].left = a;
            self.nodes[new as usize].right = b;
            self.update(new);
            return new;
        }
        if self.nodes[new as usize].key < self.nodes[t as usize].key {
            let l = self.nodes[t as usize].left;
            let nl = self.insert_at(l, new);
            self.nodes[t as usize].left = nl;
        } else {
            let r = self.nodes[t as usize].right;
            let nr = self.insert_at(r, new);
            self.nodes[t as usize].right = nr;
        }
        self.update(t);
        t
    }

    pub fn insert(&mut self, key: f64, weight: f64) {
        debug_assert!(key.is_finite() && weight.is_finite() && weight >= 0.0);
        let prio = self.prio.next_u64();
        let idx = self.nodes.len() as u32;
        self.nodes.push(Node {
            key,
            weight,
            subtree_weight: weight,
            prio,
            left: NIL,
            right: NIL,
        });
        self.root = self.insert_at(self.root, idx);
    }

    /// Smallest key whose inclusive prefix weight reaches `target`.
    /// Returns `None` when the total weight is below `target`.
    pub fn select(&self, target: f64) -> Option<f64> {
        if self.root == NIL || self.total_weight() < target {
            return None;
        }
        let mut idx = self.root;
        let mut acc = 0.0;
        loop {
            let node = &self.nodes[idx as usize];
            let left_sum = acc
                + if node.left != NIL {
                    self.nodes[node.left as usize].subtree_weight
                } else {
                    0.0
                };
            if node.left != NIL && left_sum >= target {
                idx = node.left;
            } else if left_sum + node.weight >= target {
                return Some(node.key);
            } else {
                acc = left_sum + node.weight;
                if node.right == NIL {
                    // Accumulated rounding can leave the last step short;
                    // the largest key is the inf by construction then.
                    return Some(node.key);
                }
                idx = node.right;
            }
        }
    }

    pub fn min_key(&self) -> Option<f64> {
        self.extreme_key(false)
    }

    pub fn max_key(&self) -> Option<f64> {
        self.extreme_key(true)
    }

    fn extreme_key(&self, rightmost: bool) -> Option<f64> {
        if self.root == NIL {
            return None;
        }
        let mut idx = self.root;
        loop {
            let node = &self.nodes[idx as usize];
            let next = if rightmost { node.right } else { node.left };
            if next == NIL {
                return Some(node.key);
            }
            idx = next;
        }
    }
}
