//! Element partition trees and the elimination orderings they induce.
//!
//! A tree node owns a contiguous range of the `leaf_elems` permutation, so
//! disjoint union at every binary split holds by construction. Variables are
//! assigned to the deepest node whose element set contains their support,
//! which is exactly the node where a post-order traversal first lists them.

use crate::basis::NodeSet;
use crate::basis::OverlapGraph;
use crate::error::{Error, Result};
use crate::geom::{Coord, LatticeBox};
use crate::mesh::Mesh;

#[derive(Clone, Debug)]
pub struct TreeNode {
    pub parent: u32,
    /// Empty for leaves, exactly two children otherwise.
    pub children: Vec<u32>,
    /// Range into [`PartitionTree::leaf_elems`].
    pub elems: (u32, u32),
    /// Variables eliminated at this node, ascending.
    pub vars: Vec<u32>,
    pub depth: u32,
}

/// One peeled layer of a layered or dividing-plane tree: the spine node
/// where the interface variables sit and the subtree holding the layer.
#[derive(Clone, Copy, Debug)]
pub struct LayerPeel {
    pub level: u32,
    pub interface_node: u32,
    pub layer_root: u32,
}

#[derive(Clone, Debug)]
pub struct PartitionTree {
    pub nodes: Vec<TreeNode>,
    pub leaf_elems: Vec<u32>,
    pub n_vars: u32,
    /// Variables forcibly assigned to the root (dividing-plane strategy).
    pub hoisted: u32,
    /// Peel order, coarsest layer first; empty for greedy trees.
    pub layers: Vec<LayerPeel>,
}

impl PartitionTree {
    pub const ROOT: u32 = 0;

    pub fn n_elements(&self) -> usize {
        self.leaf_elems.len()
    }

    pub fn is_leaf(&self, id: u32) -> bool {
        self.nodes[id as usize].children.is_empty()
    }

    pub fn post_order(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack: Vec<(u32, usize)> = vec![(Self::ROOT, 0)];
        while let Some(&mut (id, ref mut next)) = stack.last_mut() {
            let node = &self.nodes[id as usize];
            if *next < node.children.len() {
                let c = node.children[*next];
                *next += 1;
                stack.push((c, 0));
            } else {
                out.push(id);
                stack.pop();
            }
        }
        out
    }

    pub fn node_height(&self, id: u32) -> u32 {
        let node = &self.nodes[id as usize];
        node.children
            .iter()
            .map(|&c| self.node_height(c) + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn height(&self) -> u32 {
        self.node_height(Self::ROOT)
    }

    pub fn subtree_var_count(&self, id: u32) -> u32 {
        let node = &self.nodes[id as usize];
        let mut total = node.vars.len() as u32;
        for &c in &node.children {
            total += self.subtree_var_count(c);
        }
        total
    }

    /// Indented text dump: `node <id>: elems=<n> vars=<n>` per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut stack = vec![(Self::ROOT, 0usize)];
        while let Some((id, indent)) = stack.pop() {
            let node = &self.nodes[id as usize];
            out.push_str(&"  ".repeat(indent));
            out.push_str(&format!(
                "node {id}: elems={} vars={}\n",
                node.elems.1 - node.elems.0,
                node.vars.len()
            ));
            for &c in node.children.iter().rev() {
                stack.push((c, indent + 1));
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// construction machinery
// ---------------------------------------------------------------------------

struct Builder<'a> {
    m: &'a Mesh,
    nodes: Vec<TreeNode>,
    ids: Vec<u32>,
    layers: Vec<LayerPeel>,
}

impl<'a> Builder<'a> {
    fn new(m: &'a Mesh) -> Self {
        Builder {
            m,
            nodes: Vec::new(),
            ids: (0..m.elements.len() as u32).collect(),
            layers: Vec::new(),
        }
    }

    fn add_node(&mut self, lo: u32, hi: u32) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(TreeNode {
            parent: id,
            children: Vec::new(),
            elems: (lo, hi),
            vars: Vec::new(),
            depth: 0,
        });
        id
    }

    fn link(&mut self, parent: u32, c1: u32, c2: u32) {
        self.nodes[parent as usize].children = vec![c1, c2];
        self.nodes[c1 as usize].parent = parent;
        self.nodes[c2 as usize].parent = parent;
    }

    /// Stable partition of ids[lo..hi]; true-block first. Returns the split.
    fn partition(&mut self, lo: u32, hi: u32, pred: impl Fn(u32) -> bool) -> u32 {
        let slice = &self.ids[lo as usize..hi as usize];
        let mut yes = Vec::with_capacity(slice.len());
        let mut no = Vec::new();
        for &e in slice {
            if pred(e) {
                yes.push(e);
            } else {
                no.push(e);
            }
        }
        let split = lo + yes.len() as u32;
        let target = &mut self.ids[lo as usize..hi as usize];
        target[..yes.len()].copy_from_slice(&yes);
        target[yes.len()..].copy_from_slice(&no);
        split
    }

    /// Balanced binary subtree over ids[lo..hi] in their current order.
    fn balanced(&mut self, lo: u32, hi: u32) -> u32 {
        let node = self.add_node(lo, hi);
        if hi - lo > 1 {
            let mid = lo + (hi - lo + 1) / 2;
            let c1 = self.balanced(lo, mid);
            let c2 = self.balanced(mid, hi);
            self.link(node, c1, c2);
        }
        node
    }

    fn min_level(&self, lo: u32, hi: u32) -> u32 {
        self.ids[lo as usize..hi as usize]
            .iter()
            .map(|&e| self.m.elements[e as usize].level as u32)
            .min()
            .unwrap()
    }

    fn finish(mut self, nodes: &NodeSet, hoist_to_root: bool) -> PartitionTree {
        // depths
        let order: Vec<u32> = (0..self.nodes.len() as u32).collect();
        for id in order {
            let parent = self.nodes[id as usize].parent;
            let d = if parent == id {
                0
            } else {
                self.nodes[parent as usize].depth + 1
            };
            self.nodes[id as usize].depth = d;
        }

        // leaf position of every element, and leaf node at every position
        let n_elems = self.ids.len();
        let mut elem_pos = vec![0u32; n_elems];
        for (pos, &e) in self.ids.iter().enumerate() {
            elem_pos[e as usize] = pos as u32;
        }
        let mut leaf_node = vec![u32::MAX; n_elems];
        for (id, node) in self.nodes.iter().enumerate() {
            if node.children.is_empty() {
                debug_assert_eq!(node.elems.1 - node.elems.0, 1);
                leaf_node[node.elems.0 as usize] = id as u32;
            }
        }

        let hoist_planes = if hoist_to_root {
            non_carrying_boundary_planes(self.m)
        } else {
            Vec::new()
        };

        let mut hoisted = 0u32;
        for (ei, ent) in nodes.entities.iter().enumerate() {
            let vlo = nodes.var_offset[ei];
            let vhi = nodes.var_offset[ei + 1];
            if vlo == vhi {
                continue;
            }
            let target = if on_any_plane(&ent.extent, &hoist_planes) {
                hoisted += vhi - vlo;
                PartitionTree::ROOT
            } else {
                let mut minp = u32::MAX;
                let mut maxp = 0u32;
                for &el in &ent.support {
                    let p = elem_pos[el as usize];
                    minp = minp.min(p);
                    maxp = maxp.max(p);
                }
                let mut node = leaf_node[minp as usize];
                loop {
                    let nd = &self.nodes[node as usize];
                    if nd.elems.1 > maxp {
                        break;
                    }
                    node = nd.parent;
                }
                node
            };
            for v in vlo..vhi {
                self.nodes[target as usize].vars.push(v);
            }
        }
        // per-node lists stay sorted because entities are visited in
        // ascending variable order, except the root mixing hoisted vars
        self.nodes[PartitionTree::ROOT as usize].vars.sort_unstable();

        PartitionTree {
            nodes: self.nodes,
            leaf_elems: self.ids,
            n_vars: nodes.n_vars(),
            hoisted,
            layers: self.layers,
        }
    }
}

/// Boundary hyperplanes that do not carry the singularity
/// (the whole shape must lie inside a plane for it to carry).
fn non_carrying_boundary_planes(m: &Mesh) -> Vec<(usize, Coord)> {
    let scale = m.scale();
    let mut planes = Vec::new();
    for axis in 0..m.d {
        for coord in [0, scale] {
            let carries = !m.singularity.boxes.is_empty()
                && m.singularity.boxes.iter().all(|b| {
                    b.lo()[axis] == coord && b.hi()[axis] == coord
                });
            if !carries {
                planes.push((axis, coord));
            }
        }
    }
    planes
}

fn on_any_plane(extent: &LatticeBox, planes: &[(usize, Coord)]) -> bool {
    planes
        .iter()
        .any(|&(axis, c)| extent.lo()[axis] == c && extent.hi()[axis] == c)
}

// ---------------------------------------------------------------------------
// layered tree (point singularities)
// ---------------------------------------------------------------------------

/// Tree for point-singularity meshes: recursively split off the layer of
/// least refined elements; the innermost split separates the elements that
/// overlap the singularity.
pub fn build_layered_tree(m: &Mesh, nodes: &NodeSet) -> Result<PartitionTree> {
    if m.singularity.q != 0 {
        return Err(Error::WrongStrategy(format!(
            "layered tree requires a point singularity, got q={}",
            m.singularity.q
        )));
    }
    let overlap: Vec<bool> = (0..m.elements.len())
        .map(|i| m.singularity.overlaps(&m.element_box(i)))
        .collect();
    let mut b = Builder::new(m);
    let n = m.elements.len() as u32;
    layered_rec(&mut b, 0, n, &overlap);
    Ok(b.finish(nodes, false))
}

fn layered_rec(b: &mut Builder, lo: u32, hi: u32, overlap: &[bool]) -> u32 {
    if hi - lo == 1 {
        return b.add_node(lo, hi);
    }
    let lmin = b.min_level(lo, hi);
    let m = b.m;
    let split = b.partition(lo, hi, |e| (m.elements[e as usize].level as u32) > lmin);
    if split == lo {
        // single level left: peel off the non-singular part as the last layer
        let split2 = b.partition(lo, hi, |e| overlap[e as usize]);
        if split2 == lo || split2 == hi {
            return b.balanced(lo, hi);
        }
        let node = b.add_node(lo, hi);
        let c1 = layered_rec(b, lo, split2, overlap);
        let c2 = b.balanced(split2, hi);
        b.link(node, c1, c2);
        b.layers.push(LayerPeel {
            level: lmin,
            interface_node: node,
            layer_root: c2,
        });
        return node;
    }
    let node = b.add_node(lo, hi);
    let c1 = layered_rec(b, lo, split, overlap);
    let c2 = b.balanced(split, hi);
    b.link(node, c1, c2);
    b.layers.push(LayerPeel {
        level: lmin,
        interface_node: node,
        layer_root: c2,
    });
    node
}

// ---------------------------------------------------------------------------
// dividing-plane tree (boundary singularities, q >= 1)
// ---------------------------------------------------------------------------

/// Tree for q >= 1 singularities: peel the least refined layer, then split
/// the remainder by up to q mid-singularity planes into 2^q submeshes
/// (encoded as a chain of binary splits) and recurse. Variables on
/// non-singular boundary hyperplanes are eliminated at the root.
pub fn build_dividing_plane_tree(m: &Mesh, nodes: &NodeSet) -> Result<PartitionTree> {
    if m.singularity.q == 0 {
        return Err(Error::WrongStrategy(
            "dividing-plane tree requires q >= 1; use the layered tree for points".into(),
        ));
    }
    if m.singularity.boxes.is_empty() {
        return Err(Error::WrongStrategy(
            "dividing-plane tree needs a nonempty singularity shape".into(),
        ));
    }
    // bounding box of the shape drives the cuts
    let mut lo = m.singularity.boxes[0].lo_raw();
    let mut hi = m.singularity.boxes[0].hi_raw();
    for bx in &m.singularity.boxes[1..] {
        for i in 0..m.d {
            lo[i] = lo[i].min(bx.lo_raw()[i]);
            hi[i] = hi[i].max(bx.hi_raw()[i]);
        }
    }
    let sing = LatticeBox::new(m.d, lo, hi);
    let mut b = Builder::new(m);
    let n = m.elements.len() as u32;
    dividing_rec(&mut b, 0, n, sing);
    Ok(b.finish(nodes, true))
}

fn dividing_rec(b: &mut Builder, lo: u32, hi: u32, sing: LatticeBox) -> u32 {
    if hi - lo == 1 {
        return b.add_node(lo, hi);
    }
    let lmin = b.min_level(lo, hi);
    let m = b.m;
    let split = b.partition(lo, hi, |e| (m.elements[e as usize].level as u32) == lmin);
    if split == hi {
        // uniform remainder: no layer to peel, divide by planes directly
        return cut_planes(b, lo, hi, sing);
    }
    let node = b.add_node(lo, hi);
    let c1 = b.balanced(lo, split); // the peeled layer
    let c2 = cut_planes(b, split, hi, sing);
    b.link(node, c1, c2);
    b.layers.push(LayerPeel {
        level: lmin,
        interface_node: node,
        layer_root: c1,
    });
    node
}

/// A plane through the middle of `sing` along `axis` that no element of
/// ids[lo..hi] straddles, with both sides nonempty.
fn usable_cut(b: &Builder, lo: u32, hi: u32, sing: &LatticeBox, axis: usize) -> Option<Coord> {
    if sing.lo()[axis] >= sing.hi()[axis] {
        return None;
    }
    let sum = sing.lo()[axis] + sing.hi()[axis];
    if sum % 2 != 0 {
        return None;
    }
    let c = sum / 2;
    let mut has_low = false;
    let mut has_high = false;
    for &e in &b.ids[lo as usize..hi as usize] {
        let eb = b.m.element_box(e as usize);
        if eb.hi()[axis] <= c {
            has_low = true;
        } else if eb.lo()[axis] >= c {
            has_high = true;
        } else {
            return None; // straddles the plane
        }
    }
    if has_low && has_high {
        Some(c)
    } else {
        None
    }
}

fn cut_planes(b: &mut Builder, lo: u32, hi: u32, sing: LatticeBox) -> u32 {
    if hi - lo == 1 {
        return b.add_node(lo, hi);
    }
    let axes: Vec<(usize, Coord)> = (0..b.m.d)
        .filter_map(|a| usable_cut(b, lo, hi, &sing, a).map(|c| (a, c)))
        .collect();
    if axes.is_empty() {
        return b.balanced(lo, hi);
    }
    cut_chain(b, lo, hi, sing, &axes, 0)
}

fn cut_chain(
    b: &mut Builder,
    lo: u32,
    hi: u32,
    sing: LatticeBox,
    axes: &[(usize, Coord)],
    i: usize,
) -> u32 {
    if hi - lo == 1 {
        return b.add_node(lo, hi);
    }
    if i == axes.len() {
        return dividing_rec(b, lo, hi, sing);
    }
    let (axis, c) = axes[i];
    // the subset may have become one-sided after earlier cuts
    if usable_cut(b, lo, hi, &sing, axis) != Some(c) {
        return cut_chain(b, lo, hi, sing, axes, i + 1);
    }
    let m = b.m;
    let depth = m.depth;
    let d = m.d;
    let split = b.partition(lo, hi, |e| {
        m.elements[e as usize].boxed(d, depth).hi()[axis] <= c
    });
    let node = b.add_node(lo, hi);
    let c1 = cut_chain(b, lo, split, sing.clip(axis, c, true), axes, i + 1);
    let c2 = cut_chain(b, split, hi, sing.clip(axis, c, false), axes, i + 1);
    b.link(node, c1, c2);
    node
}

// ---------------------------------------------------------------------------
// greedy-plane tree (any mesh)
// ---------------------------------------------------------------------------

/// Recursive bisection by the axis-perpendicular lattice plane crossing the
/// fewest supports, subject to neither side solely holding more than half of
/// the subproblem's variables. Ties break to the lowest axis, then the
/// lowest plane coordinate.
pub fn build_greedy_plane_tree(m: &Mesh, nodes: &NodeSet) -> Result<PartitionTree> {
    let mut b = Builder::new(m);
    let n = m.elements.len() as u32;
    // per variable: twice the support-element midpoints' extremes, per axis
    let n_vars = nodes.n_vars() as usize;
    let mut var_minmid = vec![[Coord::MAX; crate::geom::MAX_D]; n_vars];
    let mut var_maxmid = vec![[Coord::MIN; crate::geom::MAX_D]; n_vars];
    for (ei, ent) in nodes.entities.iter().enumerate() {
        let (vlo, vhi) = (nodes.var_offset[ei], nodes.var_offset[ei + 1]);
        if vlo == vhi {
            continue;
        }
        let mut mn = [Coord::MAX; crate::geom::MAX_D];
        let mut mx = [Coord::MIN; crate::geom::MAX_D];
        for &el in &ent.support {
            let eb = m.element_box(el as usize);
            for a in 0..m.d {
                let mid2 = eb.lo()[a] + eb.hi()[a];
                mn[a] = mn[a].min(mid2);
                mx[a] = mx[a].max(mid2);
            }
        }
        for v in vlo..vhi {
            var_minmid[v as usize] = mn;
            var_maxmid[v as usize] = mx;
        }
    }
    let all_vars: Vec<u32> = (0..nodes.n_vars()).collect();
    greedy_rec(&mut b, 0, n, all_vars, &var_minmid, &var_maxmid);
    Ok(b.finish(nodes, false))
}

fn greedy_rec(
    b: &mut Builder,
    lo: u32,
    hi: u32,
    vars: Vec<u32>,
    var_minmid: &[[Coord; crate::geom::MAX_D]],
    var_maxmid: &[[Coord; crate::geom::MAX_D]],
) -> u32 {
    if hi - lo == 1 {
        return b.add_node(lo, hi);
    }
    let m = b.m;
    let d = m.d;
    let total = vars.len() as u64;

    // candidate planes: element boundaries strictly inside the bounding box
    let mut best: Option<(u64, usize, Coord)> = None; // (crossed, axis, c)
    let mut fallback: Option<(u64, u64, usize, Coord)> = None; // (maxsolo, crossed, axis, c)
    for axis in 0..d {
        let mut bb_lo = Coord::MAX;
        let mut bb_hi = Coord::MIN;
        let mut cands: Vec<Coord> = Vec::new();
        for &e in &b.ids[lo as usize..hi as usize] {
            let eb = m.element_box(e as usize);
            bb_lo = bb_lo.min(eb.lo()[axis]);
            bb_hi = bb_hi.max(eb.hi()[axis]);
            cands.push(eb.lo()[axis]);
            cands.push(eb.hi()[axis]);
        }
        cands.sort_unstable();
        cands.dedup();
        cands.retain(|&c| c > bb_lo && c < bb_hi);
        if cands.is_empty() {
            continue;
        }
        let k = cands.len();
        // elements on the low side per candidate (midpoint rule, ties low)
        let mut elems_low = vec![0u64; k];
        for &e in &b.ids[lo as usize..hi as usize] {
            let eb = m.element_box(e as usize);
            let mid2 = eb.lo()[axis] + eb.hi()[axis];
            // low side iff 2c >= mid2: first candidate with 2c >= mid2
            let idx = cands.partition_point(|&c| 2 * c < mid2);
            if idx < k {
                elems_low[idx] += 1;
            }
        }
        for i in 1..k {
            elems_low[i] += elems_low[i - 1];
        }
        let n_elems = (hi - lo) as u64;
        // solo counts per candidate via prefix sums
        let mut solo_low = vec![0u64; k + 1];
        let mut solo_high = vec![0u64; k + 1];
        for &v in &vars {
            // solely low iff every support element is low: 2c >= maxmid
            let idx = cands.partition_point(|&c| 2 * c < var_maxmid[v as usize][axis]);
            if idx < k {
                solo_low[idx] += 1;
            }
            // solely high iff 2c < minmid
            let idx2 = cands.partition_point(|&c| 2 * c < var_minmid[v as usize][axis]);
            if idx2 > 0 {
                solo_high[idx2 - 1] += 1;
            }
        }
        for i in 1..k {
            solo_low[i] += solo_low[i - 1];
        }
        for i in (0..k - 1).rev() {
            solo_high[i] += solo_high[i + 1];
        }
        for (i, &c) in cands.iter().enumerate() {
            let el = elems_low[i];
            if el == 0 || el == n_elems {
                continue;
            }
            let sl = solo_low[i];
            let sh = solo_high[i];
            let crossed = total - sl - sh;
            let key = (crossed, axis, c);
            if 2 * sl <= total && 2 * sh <= total {
                if best.map_or(true, |bst| key < bst) {
                    best = Some(key);
                }
            }
            let fkey = (sl.max(sh), crossed, axis, c);
            if fallback.map_or(true, |f| fkey < f) {
                fallback = Some(fkey);
            }
        }
    }

    let (axis, c) = match (best, fallback) {
        (Some((_, a, c)), _) => (a, c),
        (None, Some((_, _, a, c))) => (a, c),
        (None, None) => {
            // no internal plane at all; split by order
            let node = b.add_node(lo, hi);
            let mid = lo + (hi - lo + 1) / 2;
            let c1 = b.balanced(lo, mid);
            let c2 = b.balanced(mid, hi);
            b.link(node, c1, c2);
            return node;
        }
    };

    let depth = m.depth;
    let split = b.partition(lo, hi, |e| {
        let eb = m.elements[e as usize].boxed(d, depth);
        eb.lo()[axis] + eb.hi()[axis] <= 2 * c
    });
    debug_assert!(split > lo && split < hi);
    let (mut vlow, mut vhigh) = (Vec::new(), Vec::new());
    for &v in &vars {
        if 2 * c >= var_maxmid[v as usize][axis] {
            vlow.push(v);
        } else if 2 * c < var_minmid[v as usize][axis] {
            vhigh.push(v);
        }
    }
    drop(vars);
    let node = b.add_node(lo, hi);
    let c1 = greedy_rec(b, lo, split, vlow, var_minmid, var_maxmid);
    let c2 = greedy_rec(b, split, hi, vhigh, var_minmid, var_maxmid);
    b.link(node, c1, c2);
    node
}

// ---------------------------------------------------------------------------
// ordering and audits
// ---------------------------------------------------------------------------

/// Elimination ordering: variables in post-order of their assigned nodes,
/// ascending id within a node.
pub fn ordering_from_tree(t: &PartitionTree, g: &OverlapGraph) -> Result<Vec<u32>> {
    if t.n_vars != g.n {
        return Err(Error::BadAssignment(format!(
            "tree assigns {} variables, graph has {}",
            t.n_vars, g.n
        )));
    }
    let mut order = Vec::with_capacity(g.n as usize);
    for id in t.post_order() {
        order.extend_from_slice(&t.nodes[id as usize].vars);
    }
    if order.len() != g.n as usize {
        return Err(Error::BadAssignment(format!(
            "{} variables listed, expected {}",
            order.len(),
            g.n
        )));
    }
    let mut seen = vec![false; g.n as usize];
    for &v in &order {
        if seen[v as usize] {
            return Err(Error::BadAssignment(format!("variable {v} listed twice")));
        }
        seen[v as usize] = true;
    }
    Ok(order)
}

/// Quasi-optimality measurements for a mesh/tree pair: layer structure of
/// the variables (grouped by the coarsest support level), the overlap span
/// between layers, and per-node assignment sizes.
#[derive(Debug)]
pub struct QuasiOptimalityReport {
    /// Distinct variable layers (K).
    pub n_layers: usize,
    /// (level, variable count) per layer, ascending level.
    pub per_layer_counts: Vec<(u32, u32)>,
    /// Largest layer (L).
    pub max_layer_vars: u32,
    /// Max layer distance between overlapping variables (M).
    pub overlap_span: u32,
    /// Largest variable block assigned to a single tree node.
    pub max_node_vars: u32,
    pub tree_height: u32,
    pub hoisted: u32,
    /// Overlap edges whose endpoints live in unrelated tree nodes.
    pub ancestor_violations: u64,
    /// Violated quasi-optimality bounds, empty when all hold.
    pub violations: Vec<String>,
}

pub fn quasi_optimality_report(
    m: &Mesh,
    nodes: &NodeSet,
    g: &OverlapGraph,
    t: &PartitionTree,
) -> QuasiOptimalityReport {
    // layer of a variable: coarsest level among its support elements
    let n = g.n as usize;
    let mut var_layer = vec![0u32; n];
    for (ei, ent) in nodes.entities.iter().enumerate() {
        let layer = ent
            .support
            .iter()
            .map(|&el| m.elements[el as usize].level as u32)
            .min()
            .unwrap_or(0);
        for v in nodes.var_offset[ei]..nodes.var_offset[ei + 1] {
            var_layer[v as usize] = layer;
        }
    }
    let mut counts: Vec<(u32, u32)> = Vec::new();
    let mut sorted_layers: Vec<u32> = var_layer.clone();
    sorted_layers.sort_unstable();
    let mut i = 0;
    while i < sorted_layers.len() {
        let l = sorted_layers[i];
        let mut j = i;
        while j < sorted_layers.len() && sorted_layers[j] == l {
            j += 1;
        }
        counts.push((l, (j - i) as u32));
        i = j;
    }

    let mut span = 0u32;
    for u in 0..g.n {
        for &v in g.neighbors(u) {
            span = span.max(var_layer[u as usize].abs_diff(var_layer[v as usize]));
        }
    }

    // node of each variable, for the ancestor-relation check
    let mut var_node = vec![u32::MAX; n];
    let mut max_node_vars = 0u32;
    for (id, node) in t.nodes.iter().enumerate() {
        max_node_vars = max_node_vars.max(node.vars.len() as u32);
        for &v in &node.vars {
            var_node[v as usize] = id as u32;
        }
    }
    let related = |a: u32, b: u32| -> bool {
        let (ea, eb) = (t.nodes[a as usize].elems, t.nodes[b as usize].elems);
        (ea.0 <= eb.0 && eb.1 <= ea.1) || (eb.0 <= ea.0 && ea.1 <= eb.1)
    };
    let mut ancestor_violations = 0u64;
    for u in 0..g.n {
        for &v in g.neighbors(u) {
            if u < v && !related(var_node[u as usize], var_node[v as usize]) {
                ancestor_violations += 1;
            }
        }
    }

    let max_layer_vars = counts.iter().map(|&(_, c)| c).max().unwrap_or(0);
    let mut violations = Vec::new();
    if m.singularity.q == 0 {
        let layer_cap = 4u128.pow(m.d as u32) * (m.p as u128 + 1).pow(m.d as u32);
        if counts.len() as u32 > m.depth + 1 {
            violations.push(format!(
                "{} layers exceed R+1 = {}",
                counts.len(),
                m.depth + 1
            ));
        }
        if (max_layer_vars as u128) > layer_cap {
            violations.push(format!(
                "layer with {max_layer_vars} variables exceeds 4^d (p+1)^d = {layer_cap}"
            ));
        }
        if span > 2 {
            violations.push(format!("variables {span} layers apart overlap"));
        }
    }
    if ancestor_violations > 0 {
        violations.push(format!(
            "{ancestor_violations} overlap edges between unrelated tree nodes"
        ));
    }

    QuasiOptimalityReport {
        n_layers: counts.len(),
        max_layer_vars,
        per_layer_counts: counts,
        overlap_span: span,
        max_node_vars,
        tree_height: t.height(),
        hoisted: t.hoisted,
        ancestor_violations,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{enumerate_nodes, overlap_graph};
    use crate::mesh::{canonical_singularity, refine_toward_singularity, Placement};

    fn setup(d: usize, q: usize, place: Placement, r: u32, p: u32) -> (Mesh, NodeSet, OverlapGraph) {
        let s = canonical_singularity(d, q, place, r).unwrap();
        let mut m = refine_toward_singularity(d, r, &s).unwrap();
        m.p = p;
        let nodes = enumerate_nodes(&m).unwrap();
        let g = overlap_graph(&nodes);
        (m, nodes, g)
    }

    fn check_structure(t: &PartitionTree) {
        for (id, node) in t.nodes.iter().enumerate() {
            match node.children.len() {
                0 => assert_eq!(node.elems.1 - node.elems.0, 1, "leaf {id} not singleton"),
                2 => {
                    let a = &t.nodes[node.children[0] as usize];
                    let b = &t.nodes[node.children[1] as usize];
                    assert_eq!(a.elems.0, node.elems.0);
                    assert_eq!(a.elems.1, b.elems.0);
                    assert_eq!(b.elems.1, node.elems.1);
                }
                k => panic!("node {id} has {k} children"),
            }
        }
        assert_eq!(t.nodes[0].elems, (0, t.leaf_elems.len() as u32));
    }

    #[test]
    fn layered_tree_on_corner_mesh() {
        let (m, nodes, g) = setup(2, 0, Placement::Corner, 3, 1);
        let t = build_layered_tree(&m, &nodes).unwrap();
        check_structure(&t);
        // three peeled layers plus the innermost split
        assert_eq!(t.layers.len(), 3);
        let order = ordering_from_tree(&t, &g).unwrap();
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..g.n).collect::<Vec<_>>());
        // the singularity vertex (variable of entity at the origin) comes first
        let origin = nodes
            .entities
            .iter()
            .position(|e| e.extent.lo() == [0, 0] && e.dim == 0)
            .unwrap();
        let origin_var = nodes.var_offset[origin];
        assert_eq!(order[0], origin_var);
        let rep = quasi_optimality_report(&m, &nodes, &g, &t);
        assert!(rep.violations.is_empty(), "{:?}", rep.violations);
        assert!(rep.overlap_span <= 2);
    }

    #[test]
    fn layered_tree_rejects_edge_singularity() {
        let (m, nodes, _) = setup(2, 1, Placement::Boundary, 2, 1);
        assert!(build_layered_tree(&m, &nodes).is_err());
    }

    #[test]
    fn layered_interface_sizes_match_closed_form() {
        // |If(s_{i-1}, s_i)| = (p+1)^d - p^d for middle layers
        for (d, p) in [(2usize, 1u32), (2, 2), (3, 2)] {
            let r = 5;
            let (m, nodes, _g) = setup(d, 0, Placement::Corner, r, p);
            let t = build_layered_tree(&m, &nodes).unwrap();
            let iface = (p as u64 + 1).pow(d as u32) - (p as u64).pow(d as u32);
            let internal = (2 * p as u64).pow(d as u32) - (p as u64 + 1).pow(d as u32);
            assert_eq!(t.layers.len() as u32, r);
            // peel order is coarsest-first; middle layers exclude both ends
            for k in 1..(r as usize - 1) {
                let peel = t.layers[k];
                let node = &t.nodes[peel.interface_node as usize];
                assert_eq!(
                    node.vars.len() as u64,
                    iface,
                    "interface d={d} p={p} layer {k}"
                );
                assert_eq!(
                    t.subtree_var_count(peel.layer_root) as u64,
                    internal,
                    "internal d={d} p={p} layer {k}"
                );
            }
        }
    }

    #[test]
    fn dividing_tree_on_boundary_edge() {
        let (m, nodes, g) = setup(2, 1, Placement::Boundary, 3, 1);
        let t = build_dividing_plane_tree(&m, &nodes).unwrap();
        check_structure(&t);
        assert!(t.hoisted > 0);
        let order = ordering_from_tree(&t, &g).unwrap();
        assert_eq!(order.len(), g.n as usize);
        let rep = quasi_optimality_report(&m, &nodes, &g, &t);
        assert_eq!(rep.ancestor_violations, 0);
    }

    #[test]
    fn dividing_tree_on_uniform_mesh_is_nested_dissection() {
        let (m, nodes, g) = setup(2, 2, Placement::Interior, 2, 1);
        let t = build_dividing_plane_tree(&m, &nodes).unwrap();
        check_structure(&t);
        let rep = quasi_optimality_report(&m, &nodes, &g, &t);
        assert_eq!(rep.ancestor_violations, 0);
        // 4x4 elements: root chain cuts x then y
        assert!(t.height() >= 4);
    }

    #[test]
    fn dividing_tree_rejects_points() {
        let (m, nodes, _) = setup(2, 0, Placement::Corner, 2, 1);
        assert!(build_dividing_plane_tree(&m, &nodes).is_err());
    }

    #[test]
    fn greedy_first_cut_is_mid_plane_on_uniform_mesh() {
        let (m, nodes, g) = setup(2, 2, Placement::Interior, 2, 1);
        let t = build_greedy_plane_tree(&m, &nodes).unwrap();
        check_structure(&t);
        // root children split elements into two blocks of 8 by the x mid-plane
        let root = &t.nodes[0];
        let c1 = &t.nodes[root.children[0] as usize];
        let left: Vec<u32> = t.leaf_elems[c1.elems.0 as usize..c1.elems.1 as usize].to_vec();
        assert_eq!(left.len(), 8);
        for e in left {
            assert!(m.element_box(e as usize).hi()[0] <= 8);
        }
        let rep = quasi_optimality_report(&m, &nodes, &g, &t);
        assert_eq!(rep.ancestor_violations, 0);
    }

    #[test]
    fn greedy_on_1d_path_is_balanced() {
        let (m, nodes, g) = setup(1, 1, Placement::Boundary, 4, 1);
        assert_eq!(m.n_elements(), 16);
        let t = build_greedy_plane_tree(&m, &nodes).unwrap();
        check_structure(&t);
        // a balanced bisection of 16 elements has height 4 (plus slack 1)
        assert!(t.height() <= 5, "height {}", t.height());
        let rep = quasi_optimality_report(&m, &nodes, &g, &t);
        assert_eq!(rep.ancestor_violations, 0);
    }

    #[test]
    fn assignment_respects_containment() {
        let (m, nodes, g) = setup(2, 1, Placement::Boundary, 3, 2);
        for t in [
            build_dividing_plane_tree(&m, &nodes).unwrap(),
            build_greedy_plane_tree(&m, &nodes).unwrap(),
        ] {
            let mut elem_pos = vec![0u32; m.n_elements()];
            for (pos, &e) in t.leaf_elems.iter().enumerate() {
                elem_pos[e as usize] = pos as u32;
            }
            for (id, node) in t.nodes.iter().enumerate() {
                for &v in &node.vars {
                    let ent = &nodes.entities[nodes.entity_of_var(v) as usize];
                    for &el in &ent.support {
                        let p = elem_pos[el as usize];
                        assert!(
                            node.elems.0 <= p && p < node.elems.1,
                            "var {v} at node {id} lacks support element {el}"
                        );
                    }
                }
            }
            let _ = ordering_from_tree(&t, &g).unwrap();
        }
    }

    #[test]
    fn dump_contains_root_line() {
        let (m, nodes, _) = setup(2, 0, Placement::Corner, 2, 1);
        let t = build_layered_tree(&m, &nodes).unwrap();
        let dump = t.dump();
        assert!(dump.starts_with("node 0: elems=7 vars="));
    }
}
