//! Vietoris-Rips persistence in dimensions 0 and 1, and persistent entropy.
//!
//! H0 comes from Kruskal's minimum spanning tree. H1 is computed by
//! reducing the coboundary matrix of edges (mod 2) in reverse filtration
//! order with clearing: spanning-tree edges are skipped because they are
//! already paired in dimension 0. Cofacet columns are regenerated on demand
//! rather than stored.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::takens::TakensCloud;
use crate::stats::euclidean;
use crate::{Error, Result};

/// Default cap on the number of points fed to the complex.
pub const DEFAULT_MAX_POINTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub birth: f64,
    pub death: f64,
    pub dim: u8,
}

impl Bar {
    pub fn lifetime(&self) -> f64 {
        self.death - self.birth
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    pub bars: Vec<Bar>,
    /// Largest pairwise distance; also the death assigned to the one
    /// never-dying H0 class.
    pub max_filtration: f64,
    /// Set when the cloud had a single point.
    pub degenerate: bool,
}

impl PersistenceDiagram {
    pub fn bars_in(&self, dim: u8) -> impl Iterator<Item = &Bar> {
        self.bars.iter().filter(move |b| b.dim == dim)
    }
}

/// Persistence of a delay-embedded cloud, subsampled to at most
/// `max_points` points.
pub fn vr_persistence(cloud: &TakensCloud, max_points: usize) -> Result<PersistenceDiagram> {
    vr_persistence_points(&cloud.points, max_points)
}

/// Evenly strided subsample of `n` indices down to `cap`, endpoints kept.
fn stride_indices(n: usize, cap: usize) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    if cap == 1 {
        return vec![0];
    }
    (0..cap).map(|i| ((i * (n - 1)) as f64 / (cap - 1) as f64).round() as usize).collect()
}

pub fn vr_persistence_points(points: &[Vec<f64>], max_points: usize) -> Result<PersistenceDiagram> {
    if points.is_empty() {
        return Err(Error::input("point cloud is empty"));
    }
    if max_points == 0 {
        return Err(Error::input("max_points must be positive"));
    }
    let pts: Vec<&[f64]> = stride_indices(points.len(), max_points).into_iter().map(|i| points[i].as_slice()).collect();
    let n = pts.len();
    if n == 1 {
        return Ok(PersistenceDiagram {
            bars: vec![Bar { birth: 0.0, death: 0.0, dim: 0 }],
            max_filtration: 0.0,
            degenerate: true,
        });
    }
    Rips::new(&pts).diagram()
}

struct Rips {
    n: usize,
    /// Edge filtration values in rank order.
    edge_diam: Vec<f64>,
    /// Endpoints of each edge in rank order.
    edge_ends: Vec<(u32, u32)>,
    /// `rank[a * n + b]` for `a != b`.
    rank: Vec<u32>,
}

impl Rips {
    fn new(pts: &[&[f64]]) -> Self {
        let n = pts.len();
        let mut edges: Vec<(f64, u32, u32)> = Vec::with_capacity(n * (n - 1) / 2);
        for a in 0..n {
            for b in (a + 1)..n {
                edges.push((euclidean(pts[a], pts[b]), a as u32, b as u32));
            }
        }
        edges.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut rank = vec![u32::MAX; n * n];
        for (r, &(_, a, b)) in edges.iter().enumerate() {
            rank[a as usize * n + b as usize] = r as u32;
            rank[b as usize * n + a as usize] = r as u32;
        }
        Self {
            n,
            edge_diam: edges.iter().map(|e| e.0).collect(),
            edge_ends: edges.iter().map(|e| (e.1, e.2)).collect(),
            rank,
        }
    }

    fn rank(&self, a: u32, b: u32) -> u32 {
        self.rank[a as usize * self.n + b as usize]
    }

    /// Cofacets of edge `e`, keyed by `(youngest edge rank, opposite vertex)`
    /// which orders triangles compatibly with the filtration. Sorted.
    fn coboundary(&self, e: u32) -> Vec<u64> {
        let (a, b) = self.edge_ends[e as usize];
        let mut out = Vec::with_capacity(self.n - 2);
        for v in 0..self.n as u32 {
            if v == a || v == b {
                continue;
            }
            let ra = self.rank(a, v);
            let rb = self.rank(b, v);
            let (top, opposite) = if e > ra && e > rb {
                (e, v)
            } else if ra > rb {
                (ra, b)
            } else {
                (rb, a)
            };
            out.push((u64::from(top) << 32) | u64::from(opposite));
        }
        out.sort_unstable();
        out
    }

    fn triangle_diam(&self, key: u64) -> f64 {
        self.edge_diam[(key >> 32) as usize]
    }

    fn diagram(&self) -> Result<PersistenceDiagram> {
        let max_filtration = *self.edge_diam.last().expect("at least one edge");
        let mut bars = Vec::new();

        // H0 via Kruskal.
        let mut parent: Vec<u32> = (0..self.n as u32).collect();
        fn find(p: &mut [u32], mut x: u32) -> u32 {
            while p[x as usize] != x {
                p[x as usize] = p[p[x as usize] as usize];
                x = p[x as usize];
            }
            x
        }
        let mut in_tree = vec![false; self.edge_diam.len()];
        for (r, &(a, b)) in self.edge_ends.iter().enumerate() {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb) as usize] = ra.min(rb);
                in_tree[r] = true;
                bars.push(Bar { birth: 0.0, death: self.edge_diam[r], dim: 0 });
            }
        }
        bars.push(Bar { birth: 0.0, death: max_filtration, dim: 0 });

        // H1 via coboundary reduction, youngest edge first.
        let mut pivots: HashMap<u64, Vec<u32>> = HashMap::new();
        for e in (0..self.edge_diam.len() as u32).rev() {
            if in_tree[e as usize] {
                continue;
            }
            let mut col = self.coboundary(e);
            let mut combo = vec![e];
            loop {
                let Some(&pivot) = col.first() else {
                    // Essential class; cannot occur on the full 2-skeleton but
                    // kept finite for entropy.
                    bars.push(Bar { birth: self.edge_diam[e as usize], death: max_filtration, dim: 1 });
                    break;
                };
                match pivots.get(&pivot) {
                    None => {
                        let (birth, death) = (self.edge_diam[e as usize], self.triangle_diam(pivot));
                        if death > birth {
                            bars.push(Bar { birth, death, dim: 1 });
                        }
                        combo.sort_unstable();
                        pivots.insert(pivot, combo);
                        break;
                    }
                    Some(other) => {
                        for &f in other {
                            col = sym_diff(&col, &self.coboundary(f));
                        }
                        combo = sym_diff_u32(&combo, other);
                    }
                }
            }
        }
        if bars.iter().any(|b| !(b.birth.is_finite() && b.death.is_finite())) {
            return Err(Error::numeric("non-finite persistence bar"));
        }
        Ok(PersistenceDiagram { bars, max_filtration, degenerate: false })
    }
}

fn sym_diff(a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn sym_diff_u32(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut a = a.to_vec();
    a.sort_unstable();
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] < b[j] {
            out.push(a[i]);
            i += 1;
        } else if a[i] > b[j] {
            out.push(b[j]);
            j += 1;
        } else {
            i += 1;
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Shannon entropy (nats) of normalised positive lifetimes; 0 for fewer
/// than two.
pub fn entropy_of_lifetimes(lifetimes: &[f64]) -> f64 {
    let pos: Vec<f64> = lifetimes.iter().copied().filter(|l| *l > 0.0).collect();
    if pos.len() < 2 {
        return 0.0;
    }
    let total: f64 = pos.iter().sum();
    -pos.iter().map(|l| l / total).map(|p| p * p.ln()).sum::<f64>()
}

/// Persistent entropy of the bars in dimension `dim`.
pub fn persistent_entropy(diagram: &PersistenceDiagram, dim: u8) -> f64 {
    let lifetimes: Vec<f64> = diagram.bars_in(dim).map(Bar::lifetime).collect();
    entropy_of_lifetimes(&lifetimes)
}
