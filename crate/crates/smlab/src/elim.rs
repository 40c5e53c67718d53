//! Symbolic sparse Gaussian elimination with exact fill and work counts.
//!
//! Eliminating a pivot clique-connects its uneliminated neighbors; with
//! `z` = pivot plus those neighbors, the row removal costs `(z-1)z`
//! subtractions. [`symbolic_eliminate`] computes the per-pivot `z` sequence
//! through the elimination tree (each column's pattern is its original
//! below-diagonal entries merged with its children's patterns), which is
//! equivalent to the clique simulation but runs in O(|A| + |L|).
//! [`dense_oracle_eliminate`] is the independent brute-force check on a
//! dense boolean matrix.

use crate::basis::OverlapGraph;
use crate::error::{Error, Result};
use crate::tree::PartitionTree;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EliminationReport {
    pub order: Vec<u32>,
    /// z at each elimination step: pivot plus uneliminated neighbors.
    pub per_pivot_z: Vec<u32>,
    /// Edges created during elimination.
    pub fill_edges: u64,
    /// Sum of (z-1)z over all pivots.
    pub total_subtractions: u128,
    /// Largest z.
    pub peak_front: u32,
}

pub const REPORT_CSV_HEADER: &str =
    "mesh_id,strategy,n_vars,fill,total_subtractions,peak_front";

impl EliminationReport {
    pub fn csv_row(&self, mesh_id: &str, strategy: &str) -> String {
        format!(
            "{mesh_id},{strategy},{},{},{},{}",
            self.order.len(),
            self.fill_edges,
            self.total_subtractions,
            self.peak_front
        )
    }
}

fn check_permutation(n: u32, order: &[u32]) -> Result<Vec<u32>> {
    if order.len() != n as usize {
        return Err(Error::BadPermutation(format!(
            "{} entries for {} variables",
            order.len(),
            n
        )));
    }
    let mut pos = vec![u32::MAX; n as usize];
    for (i, &v) in order.iter().enumerate() {
        if v >= n {
            return Err(Error::BadPermutation(format!("variable {v} out of range")));
        }
        if pos[v as usize] != u32::MAX {
            return Err(Error::BadPermutation(format!("variable {v} repeated")));
        }
        pos[v as usize] = i as u32;
    }
    Ok(pos)
}

/// Simulate sparse elimination of the overlap graph under `order`.
pub fn symbolic_eliminate(g: &OverlapGraph, order: &[u32]) -> Result<EliminationReport> {
    let n = g.n as usize;
    let pos = check_permutation(g.n, order)?;

    let mut per_pivot_z = vec![0u32; n];
    let mut children: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut cols: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut stamp = vec![u32::MAX; n];
    let mut total: u128 = 0;
    let mut lower_sum: u64 = 0;
    let mut peak = 0u32;

    for j in 0..n {
        let v = order[j];
        let mut buf: Vec<u32> = Vec::new();
        for &u in g.neighbors(v) {
            let pu = pos[u as usize] as usize;
            if pu > j && stamp[pu] != j as u32 {
                stamp[pu] = j as u32;
                buf.push(pu as u32);
            }
        }
        for ci in 0..children[j].len() {
            let c = children[j][ci] as usize;
            for k in 0..cols[c].len() {
                let i = cols[c][k] as usize;
                if i != j && stamp[i] != j as u32 {
                    stamp[i] = j as u32;
                    buf.push(i as u32);
                }
            }
            cols[c] = Vec::new();
        }
        let z = buf.len() as u32 + 1;
        per_pivot_z[j] = z;
        peak = peak.max(z);
        lower_sum += buf.len() as u64;
        total += (z as u128 - 1) * z as u128;
        if !buf.is_empty() {
            let parent = *buf.iter().min().unwrap() as usize;
            children[parent].push(j as u32);
            cols[j] = buf;
        }
    }

    Ok(EliminationReport {
        order: order.to_vec(),
        per_pivot_z,
        fill_edges: lower_sum - g.n_edges(),
        total_subtractions: total,
        peak_front: peak,
    })
}

/// Boolean matrix oracle: run the elimination on a dense pattern, treating
/// any entry ever set as permanently non-zero. Field-for-field comparable
/// with [`symbolic_eliminate`]; quadratic, meant for n up to a few hundred.
pub fn dense_oracle_eliminate(
    n: usize,
    pattern: &[bool],
    order: &[u32],
) -> Result<EliminationReport> {
    if pattern.len() != n * n {
        return Err(Error::BadPattern(format!(
            "pattern has {} entries, expected {}",
            pattern.len(),
            n * n
        )));
    }
    for i in 0..n {
        if !pattern[i * n + i] {
            return Err(Error::BadPattern(format!("missing diagonal at {i}")));
        }
        for j in 0..i {
            if pattern[i * n + j] != pattern[j * n + i] {
                return Err(Error::BadPattern(format!(
                    "pattern not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    check_permutation(n as u32, order)?;

    let mut mat = pattern.to_vec();
    let mut eliminated = vec![false; n];
    let mut per_pivot_z = Vec::with_capacity(n);
    let mut fill: u64 = 0;
    let mut total: u128 = 0;
    let mut peak = 0u32;

    for &vu in order {
        let v = vu as usize;
        let nbrs: Vec<usize> = (0..n)
            .filter(|&u| u != v && !eliminated[u] && mat[v * n + u])
            .collect();
        let z = nbrs.len() as u32 + 1;
        per_pivot_z.push(z);
        peak = peak.max(z);
        total += (z as u128 - 1) * z as u128;
        for a in 0..nbrs.len() {
            for b in (a + 1)..nbrs.len() {
                let (x, y) = (nbrs[a], nbrs[b]);
                if !mat[x * n + y] {
                    mat[x * n + y] = true;
                    mat[y * n + x] = true;
                    fill += 1;
                }
            }
        }
        eliminated[v] = true;
    }

    Ok(EliminationReport {
        order: order.to_vec(),
        per_pivot_z,
        fill_edges: fill,
        total_subtractions: total,
        peak_front: peak,
    })
}

/// Dense pattern of an overlap graph (adjacency plus full diagonal),
/// row-major, for feeding the oracle.
pub fn dense_from_graph(g: &OverlapGraph) -> Vec<bool> {
    let n = g.n as usize;
    let mut mat = vec![false; n * n];
    for i in 0..n {
        mat[i * n + i] = true;
    }
    for u in 0..g.n {
        for &v in g.neighbors(u) {
            mat[u as usize * n + v as usize] = true;
        }
    }
    mat
}

/// Exact sum over i = 1..=a of (b - i)(b - i + 1): the subtraction count
/// for removing `a` variables out of a front of `b`.
pub fn flops_removal(a: u64, b: u64) -> Result<u128> {
    if a > b {
        return Err(Error::OutOfRange(format!("flops_removal needs a <= b, got ({a}, {b})")));
    }
    // sum_{m=1..n} m(m+1) = n(n+1)(n+2)/3
    let s = |n: u128| n * (n + 1) * (n + 2) / 3;
    let hi = s(b as u128 - 1);
    let lo = if b - a >= 1 { s((b - a) as u128 - 1) } else { 0 };
    Ok(hi - lo)
}

/// Upper-bound cost model of eliminating along a partition tree: every node
/// pays `flops_removal(a, b)` where `a` is its assigned block and `b` adds
/// the uneliminated variables adjacent to the block in the current (filled)
/// graph. Always at least the exact subtraction count of the same ordering.
pub fn tree_cost(t: &PartitionTree, g: &OverlapGraph) -> Result<u128> {
    if t.n_vars != g.n {
        return Err(Error::BadAssignment(format!(
            "tree assigns {} variables, graph has {}",
            t.n_vars, g.n
        )));
    }
    let n = g.n as usize;
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    for u in 0..g.n {
        adj[u as usize] = g.neighbors(u).to_vec();
        adj[u as usize].sort_unstable();
    }
    let mut eliminated = vec![false; n];
    let mut in_block = vec![false; n];
    let mut seen = vec![false; n];
    let mut assigned = 0usize;
    let mut cost: u128 = 0;

    for id in t.post_order() {
        let block = &t.nodes[id as usize].vars;
        if block.is_empty() {
            continue;
        }
        assigned += block.len();
        for &v in block {
            if eliminated[v as usize] || in_block[v as usize] {
                return Err(Error::BadAssignment(format!("variable {v} assigned twice")));
            }
            in_block[v as usize] = true;
        }
        // boundary of the block in the current graph
        let mut boundary: Vec<u32> = Vec::new();
        for &v in block {
            for &u in &adj[v as usize] {
                let ui = u as usize;
                if !eliminated[ui] && !in_block[ui] && !seen[ui] {
                    seen[ui] = true;
                    boundary.push(u);
                }
            }
        }
        let a = block.len() as u64;
        let b = a + boundary.len() as u64;
        cost += flops_removal(a, b)?;
        for &u in &boundary {
            seen[u as usize] = false;
        }
        // eliminate the block with clique fill
        for &v in block {
            let vi = v as usize;
            let nbrs: Vec<u32> = adj[vi]
                .iter()
                .copied()
                .filter(|&u| !eliminated[u as usize] && u != v)
                .collect();
            for (ai, &x) in nbrs.iter().enumerate() {
                for &y in &nbrs[ai + 1..] {
                    insert_sorted(&mut adj[x as usize], y);
                    insert_sorted(&mut adj[y as usize], x);
                }
            }
            eliminated[vi] = true;
            in_block[vi] = false;
        }
    }
    if assigned != n {
        return Err(Error::BadAssignment(format!(
            "{assigned} variables assigned, graph has {n}"
        )));
    }
    Ok(cost)
}

fn insert_sorted(v: &mut Vec<u32>, x: u32) {
    if let Err(i) = v.binary_search(&x) {
        v.insert(i, x);
    }
}
