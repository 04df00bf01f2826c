//! Histogram-based binary decision trees shared by the forest and boosting
//! learners.
//!
//! Features are quantized once per training set into at most [`MAX_BINS`] bins.
//! Each sample carries a weight `w` and two statistics `a`, `b`; the split
//! criterion decides how they are read:
//!
//! * `Gini`:    `a = w·y`, leaf value `a / w` (weighted positive fraction)
//! * `Squared`: `a = w·r` with residual `r`, split on squared error, leaf
//!   value `a / b` with `b = w·p(1-p)` (one Newton step)
//! * `Newton`:  `a = w·(y-p)`, `b = w·p(1-p)`, second-order gain with L2 leaf
//!   penalty `λ`, leaf value `a / (b + λ)`

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const MAX_BINS: usize = 64;

/// Column-major quantized view of a feature matrix.
pub struct BinnedData {
    n: usize,
    dim: usize,
    bins: Vec<u8>,
    /// Per feature: `edges[j]` is the threshold between bin j and bin j+1;
    /// `x <= edges[j]` falls in bin j or lower.
    edges: Vec<Vec<f64>>,
}

impl BinnedData {
    pub fn new(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let dim = rows.first().map_or(0, |r| r.len());
        let mut bins = vec![0u8; n * dim];
        let mut edges = Vec::with_capacity(dim);
        let mut column = Vec::with_capacity(n);
        for f in 0..dim {
            column.clear();
            column.extend(rows.iter().map(|r| r[f]));
            let mut sorted = column.clone();
            sorted.sort_by(f64::total_cmp);
            sorted.dedup();
            let e: Vec<f64> = if sorted.len() <= MAX_BINS {
                sorted.windows(2).map(|p| p[0] + (p[1] - p[0]) / 2.0).collect()
            } else {
                let mut e: Vec<f64> = (1..MAX_BINS).map(|j| sorted[j * sorted.len() / MAX_BINS - 1]).collect();
                e.dedup();
                e
            };
            for (i, &x) in column.iter().enumerate() {
                bins[f * n + i] = e.partition_point(|&t| t < x) as u8;
            }
            edges.push(e);
        }
        BinnedData { n, dim, bins, edges }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn bin(&self, feature: usize, sample: usize) -> usize {
        self.bins[feature * self.n + sample] as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    Squared,
    Newton { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    Best,
    /// One uniformly drawn cut per candidate feature (extremely randomized trees).
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub split_mode: SplitMode,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features examined per node; `None` means all.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Clone, Copy, Default)]
struct Stats {
    count: usize,
    w: f64,
    a: f64,
    b: f64,
}

impl Stats {
    #[inline]
    fn add(&mut self, w: f64, a: f64, b: f64) {
        self.count += 1;
        self.w += w;
        self.a += a;
        self.b += b;
    }

    fn minus(&self, o: &Stats) -> Stats {
        Stats {
            count: self.count - o.count,
            w: self.w - o.w,
            a: self.a - o.a,
            b: self.b - o.b,
        }
    }
}

/// Per-sample training statistics (see module docs).
pub struct SampleStats<'a> {
    pub w: &'a [f64],
    pub a: &'a [f64],
    pub b: &'a [f64],
}

fn score(c: Criterion, s: &Stats) -> f64 {
    if s.w <= 0.0 {
        return 0.0;
    }
    match c {
        // weighted sum of squared class proportions; higher is purer
        Criterion::Gini => (s.a * s.a + (s.w - s.a) * (s.w - s.a)) / s.w,
        Criterion::Squared => s.a * s.a / s.w,
        Criterion::Newton { lambda } => s.a * s.a / (s.b + lambda),
    }
}

fn leaf_value(c: Criterion, s: &Stats) -> f64 {
    match c {
        Criterion::Gini => {
            if s.w > 0.0 {
                s.a / s.w
            } else {
                0.5
            }
        }
        Criterion::Squared => {
            if s.b > 1e-12 {
                s.a / s.b
            } else {
                0.0
            }
        }
        Criterion::Newton { lambda } => s.a / (s.b + lambda),
    }
}

fn is_pure(c: Criterion, s: &Stats) -> bool {
    match c {
        Criterion::Gini => s.a <= 0.0 || s.a >= s.w,
        _ => false,
    }
}

struct Builder<'a, R: Rng> {
    data: &'a BinnedData,
    stats: SampleStats<'a>,
    params: TreeParams,
    rng: &'a mut R,
    nodes: Vec<Node>,
    hist: Vec<Stats>,
}

/// Grows one tree over `samples` (indices into `data`).
pub fn grow_tree<R: Rng>(
    data: &BinnedData,
    stats: SampleStats<'_>,
    samples: Vec<usize>,
    params: TreeParams,
    rng: &mut R,
) -> Tree {
    let mut b = Builder {
        data,
        stats,
        params,
        rng,
        nodes: Vec::new(),
        hist: vec![Stats::default(); MAX_BINS],
    };
    b.grow(samples, 0);
    Tree { nodes: b.nodes }
}

struct Candidate {
    feature: usize,
    bin: usize,
    gain: f64,
}

impl<R: Rng> Builder<'_, R> {
    fn node_stats(&self, samples: &[usize]) -> Stats {
        let mut s = Stats::default();
        for &i in samples {
            s.add(self.stats.w[i], self.stats.a[i], self.stats.b[i]);
        }
        s
    }

    fn grow(&mut self, samples: Vec<usize>, depth: usize) -> u32 {
        let id = self.nodes.len() as u32;
        let total = self.node_stats(&samples);
        self.nodes.push(Node::Leaf {
            value: leaf_value(self.params.criterion, &total),
        });
        if depth >= self.params.max_depth
            || samples.len() < self.params.min_samples_split
            || samples.len() < 2 * self.params.min_samples_leaf.max(1)
            || is_pure(self.params.criterion, &total)
        {
            return id;
        }
        let Some(best) = self.best_split(&samples, &total) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .into_iter()
            .partition(|&i| self.data.bin(best.feature, i) <= best.bin);
        let threshold = self.data.edges[best.feature][best.bin];
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[id as usize] = Node::Split {
            feature: best.feature as u32,
            threshold,
            left: l,
            right: r,
        };
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.data.dim();
        match self.params.max_features {
            Some(m) if m < d => {
                let mut f = index::sample(self.rng, d, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn best_split(&mut self, samples: &[usize], total: &Stats) -> Option<Candidate> {
        let crit = self.params.criterion;
        let min_leaf = self.params.min_samples_leaf.max(1);
        let parent = score(crit, total);
        let mut best: Option<Candidate> = None;
        for f in self.candidate_features() {
            let n_bins = self.data.edges[f].len() + 1;
            if n_bins < 2 {
                continue;
            }
            self.hist[..n_bins].fill(Stats::default());
            for &i in samples {
                self.hist[self.data.bin(f, i)].add(self.stats.w[i], self.stats.a[i], self.stats.b[i]);
            }
            let cuts: Vec<usize> = match self.params.split_mode {
                SplitMode::Best => (0..n_bins - 1).collect(),
                SplitMode::Random => {
                    let lo = (0..n_bins).find(|&j| self.hist[j].count > 0);
                    let hi = (0..n_bins).rev().find(|&j| self.hist[j].count > 0);
                    match (lo, hi) {
                        (Some(lo), Some(hi)) if hi > lo => vec![self.rng.gen_range(lo..hi)],
                        _ => vec![],
                    }
                }
            };
            let mut left = Stats::default();
            let mut next = 0;
            for cut in cuts {
                while next <= cut {
                    let h = self.hist[next];
                    left.count += h.count;
                    left.w += h.w;
                    left.a += h.a;
                    left.b += h.b;
                    next += 1;
                }
                let right = total.minus(&left);
                if left.count < min_leaf || right.count < min_leaf {
                    continue;
                }
                let gain = score(crit, &left) + score(crit, &right) - parent;
                if gain > 1e-12 * parent.abs().max(1e-12) && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Candidate {
                        feature: f,
                        bin: cut,
                        gain,
                    });
                }
            }
        }
        best
    }
}
