//! Basis-function carriers (mesh nodes), their supports, and the overlap
//! graph whose adjacency is the initial matrix pattern.
//!
//! Every k-dimensional face of every leaf is an entity candidate. An entity
//! is constrained (hanging) when some leaf contains its box without having
//! it as a face; a constrained entity carries no variable and its support is
//! absorbed into the smallest unconstrained entity containing it. Vertices
//! carry one variable, k-dimensional entities carry `(p-1)^k`.

use crate::error::{Error, Result};
use crate::fxhash::FxHashMap;
use crate::geom::{align_down, Coord, LatticeBox, MAX_D};
use crate::mesh::Mesh;
use std::io::Write;

#[derive(Clone, Debug)]
pub struct NodeEntity {
    /// Entity dimension k: 0 = vertex, ..., d = element interior.
    pub dim: usize,
    pub extent: LatticeBox,
    /// Leaves sharing the entity, including those absorbed from hanging
    /// entities constrained by this one. Sorted, deduplicated.
    pub support: Vec<u32>,
    pub var_count: u32,
}

/// All unconstrained entities of a mesh, ordered by (dim, extent).
#[derive(Clone, Debug)]
pub struct NodeSet {
    pub d: usize,
    pub p: u32,
    pub entities: Vec<NodeEntity>,
    /// Prefix sums of var_count; variable ids of entity `i` are
    /// `var_offset[i]..var_offset[i+1]`.
    pub var_offset: Vec<u32>,
}

impl NodeSet {
    pub fn n_vars(&self) -> u32 {
        *self.var_offset.last().unwrap_or(&0)
    }

    /// Entity owning a variable id.
    pub fn entity_of_var(&self, v: u32) -> usize {
        match self.var_offset.binary_search(&v) {
            Ok(mut i) => {
                // skip zero-width entries
                while self.var_offset[i + 1] == v {
                    i += 1;
                }
                i
            }
            Err(i) => i - 1,
        }
    }
}

/// Leaf lookup by (level, anchor).
struct LeafIndex {
    map: FxHashMap<(u32, [Coord; MAX_D]), u32>,
    levels: Vec<u32>,
    scale: Coord,
    depth: u32,
    d: usize,
}

impl LeafIndex {
    fn new(m: &Mesh) -> Self {
        let mut map = FxHashMap::default();
        map.reserve(m.elements.len());
        for (i, e) in m.elements.iter().enumerate() {
            map.insert((e.level as u32, e.anchor), i as u32);
        }
        LeafIndex {
            map,
            levels: m.levels_present(),
            scale: m.scale(),
            depth: m.depth,
            d: m.d,
        }
    }

    /// Visit every leaf whose closed box contains `x`.
    fn containing_leaves(&self, lo: &[Coord; MAX_D], hi: &[Coord; MAX_D], mut visit: impl FnMut(u32)) {
        for &level in &self.levels {
            let s: Coord = 1 << (self.depth - level);
            let mut cands: [([Coord; 2], usize); MAX_D] = [([0; 2], 0); MAX_D];
            let mut any_empty = false;
            for i in 0..self.d {
                let (ref mut list, ref mut n) = cands[i];
                let a0 = align_down(lo[i], s);
                if a0 + s >= hi[i] && a0 >= 0 && a0 + s <= self.scale {
                    list[*n] = a0;
                    *n += 1;
                }
                if lo[i] == a0 && lo[i] == hi[i] && a0 - s >= 0 {
                    list[*n] = a0 - s;
                    *n += 1;
                }
                if *n == 0 {
                    any_empty = true;
                    break;
                }
            }
            if any_empty {
                continue;
            }
            let mut idx = [0usize; MAX_D];
            let mut anchor = [0 as Coord; MAX_D];
            'combos: loop {
                for i in 0..self.d {
                    anchor[i] = cands[i].0[idx[i]];
                }
                if let Some(&leaf) = self.map.get(&(level, anchor)) {
                    visit(leaf);
                }
                let mut axis = 0;
                loop {
                    if axis == self.d {
                        break 'combos;
                    }
                    idx[axis] += 1;
                    if idx[axis] < cands[axis].1 {
                        break;
                    }
                    idx[axis] = 0;
                    axis += 1;
                }
            }
        }
    }
}

fn pack_point(p: &[Coord; MAX_D], d: usize, bits: u32) -> u128 {
    let mut key: u128 = 0;
    for i in 0..d {
        key = (key << bits) | p[i] as u128;
    }
    key
}

/// Vertex-only enumeration used for p = 1, where edges, faces and interiors
/// carry no variables. Scales to meshes with millions of elements.
fn enumerate_vertices(m: &Mesh) -> Vec<NodeEntity> {
    let d = m.d;
    let bits = m.depth + 1;
    let mut instances: Vec<(u128, u32)> = Vec::with_capacity(m.elements.len() << d);
    for (id, e) in m.elements.iter().enumerate() {
        let side = e.side(m.depth);
        for mask in 0..(1u32 << d) {
            let mut p = e.anchor;
            for i in 0..d {
                if mask & (1 << i) != 0 {
                    p[i] += side;
                }
            }
            instances.push((pack_point(&p, d, bits), id as u32));
        }
    }
    instances.sort_unstable();

    let index = LeafIndex::new(m);
    let mask: u128 = (1 << bits) - 1;
    let mut out = Vec::new();
    let mut i = 0;
    while i < instances.len() {
        let key = instances[i].0;
        let mut j = i;
        while j < instances.len() && instances[j].0 == key {
            j += 1;
        }
        let mut p = [0 as Coord; MAX_D];
        for axis in (0..d).rev() {
            p[axis] = ((key >> ((d - 1 - axis) as u32 * bits)) & mask) as Coord;
        }
        // free vertex iff it is a corner of every leaf that contains it
        let mut containing = 0usize;
        index.containing_leaves(&p, &p, |_| containing += 1);
        if containing == j - i {
            let mut support: Vec<u32> = instances[i..j].iter().map(|&(_, e)| e).collect();
            support.sort_unstable();
            out.push(NodeEntity {
                dim: 0,
                extent: LatticeBox::new(d, p, p),
                support,
                var_count: 1,
            });
        }
        i = j;
    }
    out
}

/// Full enumeration over all entity dimensions, for p >= 2. Quadratic-ish
/// constants (3^d faces per leaf); intended for the moderate meshes where
/// higher orders matter.
fn enumerate_all_dims(m: &Mesh) -> Vec<NodeEntity> {
    let d = m.d;
    let mut key_of: FxHashMap<([Coord; MAX_D], [Coord; MAX_D]), u32> = FxHashMap::default();
    let mut dims: Vec<usize> = Vec::new();
    let mut boxes: Vec<LatticeBox> = Vec::new();
    let mut supports: Vec<Vec<u32>> = Vec::new();

    let mut states = [0u8; MAX_D]; // 0 = lo face, 1 = span, 2 = hi face
    for (id, e) in m.elements.iter().enumerate() {
        let side = e.side(m.depth);
        states.fill(0);
        loop {
            let mut lo = e.anchor;
            let mut hi = e.anchor;
            let mut dim = 0;
            for i in 0..d {
                match states[i] {
                    0 => {}
                    1 => {
                        hi[i] += side;
                        dim += 1;
                    }
                    _ => {
                        lo[i] += side;
                        hi[i] += side;
                    }
                }
            }
            let idx = *key_of.entry((lo, hi)).or_insert_with(|| {
                dims.push(dim);
                boxes.push(LatticeBox::new(d, lo, hi));
                supports.push(Vec::new());
                (dims.len() - 1) as u32
            });
            supports[idx as usize].push(id as u32);

            let mut axis = 0;
            loop {
                if axis == d {
                    return finish_all_dims(m, key_of, dims, boxes, supports);
                }
                states[axis] += 1;
                if states[axis] < 3 {
                    break;
                }
                states[axis] = 0;
                axis += 1;
            }
        }
    }
    finish_all_dims(m, key_of, dims, boxes, supports)
}

fn finish_all_dims(
    m: &Mesh,
    key_of: FxHashMap<([Coord; MAX_D], [Coord; MAX_D]), u32>,
    dims: Vec<usize>,
    boxes: Vec<LatticeBox>,
    mut supports: Vec<Vec<u32>>,
) -> Vec<NodeEntity> {
    let d = m.d;
    let index = LeafIndex::new(m);
    let n = boxes.len();

    // an entity is constrained iff some containing leaf lacks it as a face,
    // i.e. it has more containing leaves than face-owners
    let mut constrained = vec![false; n];
    for i in 0..n {
        let mut containing = 0usize;
        index.containing_leaves(&boxes[i].lo_raw(), &boxes[i].hi_raw(), |_| containing += 1);
        debug_assert!(containing >= supports[i].len());
        constrained[i] = containing > supports[i].len();
    }

    // absorb each constrained entity into the smallest unconstrained entity
    // containing it, searching the faces of its containing leaves
    for i in 0..n {
        if !constrained[i] {
            continue;
        }
        let mut best: Option<(usize, u128, u32)> = None; // (dim, volume, idx)
        let xb = boxes[i];
        index.containing_leaves(&xb.lo_raw(), &xb.hi_raw(), |leaf| {
            let e = &m.elements[leaf as usize];
            let side = e.side(m.depth);
            let mut states = [0u8; MAX_D];
            loop {
                let mut lo = e.anchor;
                let mut hi = e.anchor;
                for k in 0..d {
                    match states[k] {
                        0 => {}
                        1 => hi[k] += side,
                        _ => {
                            lo[k] += side;
                            hi[k] += side;
                        }
                    }
                }
                if let Some(&fi) = key_of.get(&(lo, hi)) {
                    let fb = &boxes[fi as usize];
                    if !constrained[fi as usize] && fb.contains_box(&xb) && fi as usize != i {
                        let cand = (fb.extent_axes(), fb.volume().max(1), fi);
                        if best.map_or(true, |b| cand < b) {
                            best = Some(cand);
                        }
                    }
                }
                let mut axis = 0;
                loop {
                    if axis == d {
                        return;
                    }
                    states[axis] += 1;
                    if states[axis] < 3 {
                        break;
                    }
                    states[axis] = 0;
                    axis += 1;
                }
            }
        });
        if let Some((_, _, fi)) = best {
            let moved = std::mem::take(&mut supports[i]);
            supports[fi as usize].extend(moved);
        }
    }

    let p = m.p;
    let mut out = Vec::new();
    for i in 0..n {
        if constrained[i] {
            continue;
        }
        let dim = dims[i];
        let var_count = if dim == 0 { 1 } else { (p - 1).pow(dim as u32) };
        let mut support = std::mem::take(&mut supports[i]);
        support.sort_unstable();
        support.dedup();
        out.push(NodeEntity {
            dim,
            extent: boxes[i],
            support,
            var_count,
        });
    }
    out
}

/// Enumerate the unconstrained entities of a mesh with deterministic
/// ordering and variable numbering.
pub fn enumerate_nodes(m: &Mesh) -> Result<NodeSet> {
    if m.elements.is_empty() {
        return Err(Error::OutOfRange("mesh has no elements".into()));
    }
    if m.p < 1 {
        return Err(Error::OutOfRange("polynomial order must be >= 1".into()));
    }
    let mut entities = if m.p == 1 {
        enumerate_vertices(m)
    } else {
        enumerate_all_dims(m)
    };
    entities.sort_unstable_by(|a, b| {
        (a.dim, a.extent.lo_raw(), a.extent.hi_raw())
            .cmp(&(b.dim, b.extent.lo_raw(), b.extent.hi_raw()))
    });
    let mut var_offset = Vec::with_capacity(entities.len() + 1);
    var_offset.push(0u32);
    for e in &entities {
        debug_assert!(!e.support.is_empty());
        var_offset.push(var_offset.last().unwrap() + e.var_count);
    }
    Ok(NodeSet {
        d: m.d,
        p: m.p,
        entities,
        var_offset,
    })
}

/// `(2p+1)^d + (r-1)(2^d - 1) p^d`: variables of the corner-point mesh.
pub fn corner_variable_count(d: usize, p: u32, r: u32) -> Result<u128> {
    if r < 1 {
        return Err(Error::OutOfRange("corner count needs r >= 1".into()));
    }
    if d < 1 || d > MAX_D {
        return Err(Error::OutOfRange(format!("bad dimension {d}")));
    }
    let pe = |base: u128| base.pow(d as u32);
    Ok(pe(2 * p as u128 + 1) + (r as u128 - 1) * ((1u128 << d) - 1) * pe(p as u128))
}

/// Bracket `2^(d-1) p^d 2^qr <= N_v <= 2^d (p+1)^d 2^qr` for q >= 1.
pub fn variable_bounds(d: usize, q: usize, p: u32, r: u32) -> Result<(u128, u128)> {
    if q < 1 {
        return Err(Error::OutOfRange(
            "bounds hold for q >= 1; use corner_variable_count for points".into(),
        ));
    }
    if q > d || d > MAX_D {
        return Err(Error::OutOfRange(format!("bad (d, q) = ({d}, {q})")));
    }
    let grow = 1u128 << (q as u32 * r);
    let lower = (1u128 << (d - 1)) * (p as u128).pow(d as u32) * grow;
    let upper = (1u128 << d) * (p as u128 + 1).pow(d as u32) * grow;
    Ok((lower, upper))
}

/// Symmetric adjacency over variables: an edge joins two variables whose
/// owning entities share at least one support element. CSR storage.
#[derive(Clone, Debug)]
pub struct OverlapGraph {
    pub n: u32,
    pub xadj: Vec<usize>,
    pub adj: Vec<u32>,
    /// Owning entity index per variable.
    pub var_entity: Vec<u32>,
}

impl OverlapGraph {
    /// Graph from an explicit undirected edge list; self-loops are dropped
    /// and duplicates merged. Each variable owns itself as entity.
    pub fn from_edges(n: u32, edges: &[(u32, u32)]) -> OverlapGraph {
        let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(edges.len() * 2);
        for &(u, v) in edges {
            assert!(u < n && v < n, "edge ({u}, {v}) out of range");
            if u != v {
                pairs.push((u, v));
                pairs.push((v, u));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        let mut xadj = vec![0usize; n as usize + 1];
        for &(u, _) in &pairs {
            xadj[u as usize + 1] += 1;
        }
        for i in 0..n as usize {
            xadj[i + 1] += xadj[i];
        }
        OverlapGraph {
            n,
            xadj,
            adj: pairs.into_iter().map(|(_, v)| v).collect(),
            var_entity: (0..n).collect(),
        }
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.adj[self.xadj[v as usize]..self.xadj[v as usize + 1]]
    }

    pub fn n_edges(&self) -> u64 {
        self.adj.len() as u64 / 2
    }

    pub fn degree(&self, v: u32) -> usize {
        self.xadj[v as usize + 1] - self.xadj[v as usize]
    }

    /// Edge list with `u < v`, sorted, one pair per line.
    pub fn write_edge_list<W: Write>(&self, w: &mut W) -> Result<()> {
        let mut pairs = Vec::with_capacity(self.adj.len() / 2);
        for u in 0..self.n {
            for &v in self.neighbors(u) {
                if u < v {
                    pairs.push((u, v));
                }
            }
        }
        pairs.sort_unstable();
        for (u, v) in pairs {
            writeln!(w, "{u} {v}")?;
        }
        Ok(())
    }
}

/// Build the overlap graph from an entity set.
pub fn overlap_graph(nodes: &NodeSet) -> OverlapGraph {
    let n_ent = nodes.entities.len();
    let n_vars = nodes.n_vars();

    // element -> entities incidence (CSR)
    let mut max_elem = 0u32;
    for e in &nodes.entities {
        for &el in &e.support {
            max_elem = max_elem.max(el);
        }
    }
    let n_elems = max_elem as usize + 1;
    let mut cnt = vec![0u32; n_elems + 1];
    for e in &nodes.entities {
        for &el in &e.support {
            cnt[el as usize + 1] += 1;
        }
    }
    for i in 0..n_elems {
        cnt[i + 1] += cnt[i];
    }
    let mut elem_ent = vec![0u32; cnt[n_elems] as usize];
    let mut cursor = cnt.clone();
    for (ei, e) in nodes.entities.iter().enumerate() {
        for &el in &e.support {
            elem_ent[cursor[el as usize] as usize] = ei as u32;
            cursor[el as usize] += 1;
        }
    }

    let mut var_entity = vec![0u32; n_vars as usize];
    for ei in 0..n_ent {
        for v in nodes.var_offset[ei]..nodes.var_offset[ei + 1] {
            var_entity[v as usize] = ei as u32;
        }
    }

    // two passes over entity neighborhoods: size, then fill
    let mut stamp = vec![u32::MAX; n_ent];
    let mut nbr_buf: Vec<u32> = Vec::new();
    let mut xadj = vec![0usize; n_vars as usize + 1];
    for pass in 0..2 {
        let mut adj: Vec<u32> = if pass == 1 {
            Vec::with_capacity(xadj[n_vars as usize])
        } else {
            Vec::new()
        };
        stamp.fill(u32::MAX);
        for ei in 0..n_ent {
            let ent = &nodes.entities[ei];
            nbr_buf.clear();
            for &el in &ent.support {
                let start = cnt[el as usize] as usize;
                let end = cnt[el as usize + 1] as usize;
                for &other in &elem_ent[start..end] {
                    if other as usize != ei && stamp[other as usize] != ei as u32 {
                        stamp[other as usize] = ei as u32;
                        nbr_buf.push(other);
                    }
                }
            }
            let own_vars = nodes.var_offset[ei + 1] - nodes.var_offset[ei];
            let nbr_vars: u32 = nbr_buf
                .iter()
                .map(|&o| nodes.var_offset[o as usize + 1] - nodes.var_offset[o as usize])
                .sum();
            for v in nodes.var_offset[ei]..nodes.var_offset[ei + 1] {
                if pass == 0 {
                    xadj[v as usize + 1] = (nbr_vars + own_vars - 1) as usize;
                } else {
                    for &o in &nbr_buf {
                        for w in nodes.var_offset[o as usize]..nodes.var_offset[o as usize + 1] {
                            adj.push(w);
                        }
                    }
                    for w in nodes.var_offset[ei]..nodes.var_offset[ei + 1] {
                        if w != v {
                            adj.push(w);
                        }
                    }
                }
            }
        }
        if pass == 0 {
            for i in 0..n_vars as usize {
                xadj[i + 1] += xadj[i];
            }
        } else {
            return OverlapGraph {
                n: n_vars,
                xadj,
                adj,
                var_entity,
            };
        }
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{
        canonical_singularity, refine_toward_singularity, Placement,
    };

    fn mesh(d: usize, q: usize, place: Placement, r: u32, p: u32) -> Mesh {
        let s = canonical_singularity(d, q, place, r).unwrap();
        let mut m = refine_toward_singularity(d, r, &s).unwrap();
        m.p = p;
        m
    }

    #[test]
    fn single_element_tensor_count() {
        let m = mesh(2, 0, Placement::Corner, 0, 2);
        let nodes = enumerate_nodes(&m).unwrap();
        // (p+1)^2 = 9: 4 vertices, 4 edges, 1 interior
        assert_eq!(nodes.n_vars(), 9);
        assert_eq!(nodes.entities.len(), 9);
    }

    #[test]
    fn corner_counts_match_closed_form() {
        for (d, p, r, expect) in [
            (2usize, 1u32, 1u32, 9u128),
            (2, 2, 3, 49), // 25 + 2*3*4
            (3, 2, 4, 293),
            (1, 1, 5, 7),
        ] {
            assert_eq!(corner_variable_count(d, p, r).unwrap(), expect);
            let m = mesh(d, 0, Placement::Corner, r, p);
            let nodes = enumerate_nodes(&m).unwrap();
            assert_eq!(nodes.n_vars() as u128, expect, "d={d} p={p} r={r}");
        }
        assert!(corner_variable_count(2, 1, 0).is_err());
    }

    #[test]
    fn hanging_vertices_carry_no_variables() {
        // corner mesh at r=2, p=1: 12 free vertices, 2 hanging
        let m = mesh(2, 0, Placement::Corner, 2, 1);
        let nodes = enumerate_nodes(&m).unwrap();
        assert_eq!(nodes.n_vars(), 12);
        for e in &nodes.entities {
            assert_eq!(e.dim, 0);
            assert!(!e.support.is_empty());
        }
    }

    #[test]
    fn bounds_bracket_measured_counts() {
        assert_eq!(variable_bounds(2, 1, 1, 4).unwrap(), (32, 256));
        assert_eq!(variable_bounds(3, 2, 1, 3).unwrap(), (256, 4096));
        for (d, q, r) in [(2usize, 1usize, 4u32), (3, 2, 3), (3, 1, 4)] {
            let m = mesh(d, q, Placement::Boundary, r, 1);
            let nv = enumerate_nodes(&m).unwrap().n_vars() as u128;
            let (lo, hi) = variable_bounds(d, q, 1, r).unwrap();
            assert!(lo <= nv && nv <= hi, "d={d} q={q} r={r}: {lo} <= {nv} <= {hi}");
        }
        assert!(variable_bounds(2, 0, 1, 3).is_err());
    }

    #[test]
    fn path_graph_from_two_segments() {
        let m = mesh(1, 1, Placement::Boundary, 1, 1);
        assert_eq!(m.n_elements(), 2);
        let nodes = enumerate_nodes(&m).unwrap();
        assert_eq!(nodes.n_vars(), 3);
        let g = overlap_graph(&nodes);
        assert_eq!(g.n_edges(), 2);
        // middle vertex is the one with two neighbors
        let degs: Vec<usize> = (0..3).map(|v| g.degree(v)).collect();
        assert_eq!(degs.iter().filter(|&&x| x == 2).count(), 1);
        assert_eq!(degs.iter().filter(|&&x| x == 1).count(), 2);
    }

    #[test]
    fn single_segment_is_one_edge() {
        let m = mesh(1, 0, Placement::Corner, 0, 1);
        let nodes = enumerate_nodes(&m).unwrap();
        let g = overlap_graph(&nodes);
        assert_eq!(g.n, 2);
        assert_eq!(g.n_edges(), 1);
    }

    #[test]
    fn overlap_graph_is_symmetric_without_self_edges() {
        let m = mesh(2, 1, Placement::Boundary, 3, 2);
        let nodes = enumerate_nodes(&m).unwrap();
        let g = overlap_graph(&nodes);
        for u in 0..g.n {
            for &v in g.neighbors(u) {
                assert_ne!(u, v);
                assert!(g.neighbors(v).contains(&u));
            }
        }
    }

    #[test]
    fn edge_list_is_sorted_pairs() {
        let m = mesh(1, 1, Placement::Boundary, 1, 1);
        let g = overlap_graph(&enumerate_nodes(&m).unwrap());
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        for l in lines {
            let mut it = l.split(' ');
            let u: u32 = it.next().unwrap().parse().unwrap();
            let v: u32 = it.next().unwrap().parse().unwrap();
            assert!(u < v);
        }
    }
}
