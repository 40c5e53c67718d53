//! Construction and validation of d-dimensional hypercubic meshes
//! h-refined toward a q-dimensional singularity.
//!
//! Geometry is exact: a mesh of depth `R` lives on the integer lattice
//! `{0, ..., 2^R}^d`. Leaves are cubes whose side is `2^(R - level)`
//! lattice units. The last axis is the time axis wherever time matters.

use crate::error::{Error, Result};
use crate::fxhash::FxHashMap;
use crate::geom::{align_down, Coord, LatticeBox, MAX_D};
use serde::{Deserialize, Serialize};

/// Where the singularity sits relative to the domain boundary.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Placement {
    Corner,
    Boundary,
    Interior,
}

impl Placement {
    pub fn as_str(&self) -> &'static str {
        match self {
            Placement::Corner => "corner",
            Placement::Boundary => "boundary",
            Placement::Interior => "interior",
        }
    }

    pub fn parse(s: &str) -> Result<Placement> {
        match s {
            "corner" => Ok(Placement::Corner),
            "boundary" => Ok(Placement::Boundary),
            "interior" => Ok(Placement::Interior),
            other => Err(Error::Parse(format!("unknown placement `{other}`"))),
        }
    }
}

/// A q-dimensional refinement target: one axis-aligned box for the regular
/// shapes, or a chain of boxes approximating a curve on the lattice.
/// Coordinates are lattice units at the resolution of the mesh being built.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SingularitySpec {
    pub q: usize,
    pub placement: Placement,
    pub boxes: Vec<LatticeBox>,
}

impl SingularitySpec {
    pub fn new(q: usize, placement: Placement, boxes: Vec<LatticeBox>) -> Self {
        SingularitySpec { q, placement, boxes }
    }

    /// Check the spec against a concrete domain `[0, 2^R]^d`.
    ///
    /// Boxes may have fewer than `q` extent axes (slices of chains produce
    /// mixed dimensions) but at least one box must attain `q`.
    pub fn validate(&self, d: usize, scale: Coord) -> Result<()> {
        if self.q > d {
            return Err(Error::BadSingularity(format!(
                "singularity dimension q={} exceeds mesh dimension d={d}",
                self.q
            )));
        }
        if self.boxes.is_empty() {
            if self.q != 0 {
                return Err(Error::BadSingularity(
                    "empty shape requires q = 0".into(),
                ));
            }
            return Ok(());
        }
        let mut max_extent = 0;
        for b in &self.boxes {
            if b.d() != d {
                return Err(Error::BadSingularity(format!(
                    "box dimension {} does not match mesh dimension {d}",
                    b.d()
                )));
            }
            for i in 0..d {
                if b.lo()[i] < 0 || b.hi()[i] > scale {
                    return Err(Error::BadSingularity(
                        "box outside the unit hypercube".into(),
                    ));
                }
            }
            let e = b.extent_axes();
            if e > self.q {
                return Err(Error::BadSingularity(format!(
                    "box has {e} extent axes, more than q={}",
                    self.q
                )));
            }
            max_extent = max_extent.max(e);
        }
        if max_extent != self.q {
            return Err(Error::BadSingularity(format!(
                "no box attains the declared dimension q={}",
                self.q
            )));
        }
        match self.placement {
            Placement::Corner => {
                if self.q != 0 || self.boxes.len() != 1 {
                    return Err(Error::BadSingularity(
                        "corner placement requires a single point (q = 0)".into(),
                    ));
                }
                let b = &self.boxes[0];
                let corner = (0..d).all(|i| b.lo()[i] == 0 || b.lo()[i] == scale);
                if !corner {
                    return Err(Error::BadSingularity(
                        "corner placement requires a domain corner".into(),
                    ));
                }
            }
            Placement::Boundary => {
                for b in &self.boxes {
                    let on_boundary = (0..d).any(|i| {
                        b.is_degenerate_axis(i) && (b.lo()[i] == 0 || b.lo()[i] == scale)
                    });
                    if !on_boundary {
                        return Err(Error::BadSingularity(
                            "boundary placement requires every box to lie in a \
                             boundary hyperplane"
                                .into(),
                        ));
                    }
                }
            }
            Placement::Interior => {}
        }
        Ok(())
    }

    /// Does any box of the shape force refinement of this element?
    pub fn overlaps(&self, elem: &LatticeBox) -> bool {
        self.boxes.iter().any(|b| b.refinement_overlap(elem))
    }
}

/// Classify placement from the geometry (used for sliced singularities).
fn classify_placement(d: usize, scale: Coord, q: usize, boxes: &[LatticeBox]) -> Placement {
    if boxes.is_empty() {
        return Placement::Interior;
    }
    if q == 0 && boxes.len() == 1 {
        let b = &boxes[0];
        if (0..d).all(|i| b.lo()[i] == 0 || b.lo()[i] == scale) {
            return Placement::Corner;
        }
    }
    let all_on_boundary = boxes.iter().all(|b| {
        (0..d).any(|i| b.is_degenerate_axis(i) && (b.lo()[i] == 0 || b.lo()[i] == scale))
    });
    if all_on_boundary {
        Placement::Boundary
    } else {
        Placement::Interior
    }
}

/// The canonical singularity used by the closed-form counts: a corner point
/// for q = 0, a boundary box spanning axes `0..q` for q >= 1, the whole
/// domain for q = d. `interior` places the degenerate axes at mid-domain
/// instead of on the boundary.
pub fn canonical_singularity(
    d: usize,
    q: usize,
    placement: Placement,
    depth: u32,
) -> Result<SingularitySpec> {
    check_dims(d, q, depth)?;
    let scale: Coord = 1 << depth;
    let mut lo = [0 as Coord; MAX_D];
    let mut hi = [0 as Coord; MAX_D];
    let degenerate_at = match placement {
        Placement::Interior if q < d => scale / 2,
        _ => 0,
    };
    for i in 0..d {
        if i < q {
            lo[i] = 0;
            hi[i] = scale;
        } else {
            lo[i] = degenerate_at;
            hi[i] = degenerate_at;
        }
    }
    let placement = if q == d {
        Placement::Interior
    } else if q == 0 && placement == Placement::Boundary {
        Placement::Corner
    } else {
        placement
    };
    let spec = SingularitySpec::new(q, placement, vec![LatticeBox::new(d, lo, hi)]);
    spec.validate(d, scale)?;
    Ok(spec)
}

/// One leaf of the refinement tree.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Element {
    pub level: u8,
    pub anchor: [Coord; MAX_D],
}

impl Element {
    pub fn side(&self, depth: u32) -> Coord {
        1 << (depth - self.level as u32)
    }

    pub fn boxed(&self, d: usize, depth: u32) -> LatticeBox {
        LatticeBox::cube(d, self.anchor, self.side(depth))
    }
}

/// A refined mesh: the set of leaves plus the singularity that produced it.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub d: usize,
    /// Maximum refinement level R; lattice resolution is 2^R.
    pub depth: u32,
    /// Polynomial order of the basis (constant per mesh).
    pub p: u32,
    pub elements: Vec<Element>,
    pub singularity: SingularitySpec,
}

fn check_dims(d: usize, q: usize, depth: u32) -> Result<()> {
    if d < 1 || d > MAX_D {
        return Err(Error::OutOfRange(format!("dimension d={d} not in 1..={MAX_D}")));
    }
    if q > d {
        return Err(Error::OutOfRange(format!("q={q} exceeds d={d}")));
    }
    // keeps volumes and packed lattice points exactly representable in u128
    if (d as u32) * (depth + 1) > 126 {
        return Err(Error::OutOfRange(format!(
            "depth R={depth} too large for d={d} (need d*(R+1) <= 126)"
        )));
    }
    Ok(())
}

impl Mesh {
    pub fn scale(&self) -> Coord {
        1 << self.depth
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn element_box(&self, id: usize) -> LatticeBox {
        self.elements[id].boxed(self.d, self.depth)
    }

    /// Distinct refinement levels, ascending.
    pub fn levels_present(&self) -> Vec<u32> {
        let mut seen = [false; 64];
        for e in &self.elements {
            seen[e.level as usize] = true;
        }
        (0..64u32).filter(|&l| seen[l as usize]).collect()
    }

    fn sort_elements(&mut self) {
        self.elements
            .sort_unstable_by(|a, b| (a.level, a.anchor).cmp(&(b.level, b.anchor)));
    }
}

fn children_of(e: &Element, d: usize, depth: u32) -> Vec<Element> {
    let half = e.side(depth) / 2;
    let mut out = Vec::with_capacity(1 << d);
    for mask in 0..(1u32 << d) {
        let mut anchor = e.anchor;
        for i in 0..d {
            if mask & (1 << i) != 0 {
                anchor[i] += half;
            }
        }
        out.push(Element {
            level: e.level + 1,
            anchor,
        });
    }
    out
}

/// Index of the elements of one refinement level, keyed by anchor,
/// supporting the removals done by the closure step.
struct LevelIndex {
    elems: Vec<Element>,
    alive: Vec<bool>,
    by_anchor: FxHashMap<[Coord; MAX_D], u32>,
    n_alive: usize,
}

impl LevelIndex {
    fn new(elems: Vec<Element>) -> Self {
        let mut by_anchor = FxHashMap::default();
        for (i, e) in elems.iter().enumerate() {
            by_anchor.insert(e.anchor, i as u32);
        }
        let n = elems.len();
        LevelIndex {
            alive: vec![true; n],
            elems,
            by_anchor,
            n_alive: n,
        }
    }

    fn remove(&mut self, idx: u32) -> Element {
        self.alive[idx as usize] = false;
        self.n_alive -= 1;
        self.by_anchor.remove(&self.elems[idx as usize].anchor);
        self.elems[idx as usize]
    }

    fn into_alive(self) -> Vec<Element> {
        self.elems
            .into_iter()
            .zip(self.alive)
            .filter_map(|(e, a)| if a { Some(e) } else { None })
            .collect()
    }
}

/// Anchors of all level-`coarse_level` cubes that could share a point with
/// `e`; the per-axis candidate window is a constant-size scan.
fn vertex_sharing_candidates(
    e: &Element,
    d: usize,
    depth: u32,
    coarse_level: u32,
    mut visit: impl FnMut(&[Coord; MAX_D]),
) {
    let coarse_side: Coord = 1 << (depth - coarse_level);
    let e_side = e.side(depth);
    let mut cands: [([Coord; 4], usize); MAX_D] = [([0; 4], 0); MAX_D];
    for i in 0..d {
        let lo = e.anchor[i] - coarse_side;
        let hi = e.anchor[i] + e_side;
        let mut a = align_down(lo, coarse_side);
        if a < lo {
            a += coarse_side;
        }
        let (ref mut list, ref mut n) = cands[i];
        while a <= hi {
            if a >= 0 && a + coarse_side <= (1 << depth) && *n < 4 {
                list[*n] = a;
                *n += 1;
            }
            a += coarse_side;
        }
        if *n == 0 {
            return;
        }
    }
    let mut idx = [0usize; MAX_D];
    let mut cur = [0 as Coord; MAX_D];
    loop {
        for i in 0..d {
            cur[i] = cands[i].0[idx[i]];
        }
        visit(&cur);
        let mut axis = 0;
        loop {
            if axis == d {
                return;
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

/// Build the h-adaptive mesh around a singularity: `R` sweeps in which every
/// element overlapping the shape is split into `2^d` children, with the
/// closure step refining any two-levels-coarser element that shares a vertex
/// with an element about to be refined.
pub fn refine_toward_singularity(
    d: usize,
    depth: u32,
    singularity: &SingularitySpec,
) -> Result<Mesh> {
    check_dims(d, singularity.q, depth)?;
    let scale: Coord = 1 << depth;
    singularity.validate(d, scale)?;

    let root = Element {
        level: 0,
        anchor: [0; MAX_D],
    };
    let mut levels: Vec<Vec<Element>> = vec![Vec::new(); depth as usize + 1];
    levels[0].push(root);

    for r in 1..=depth {
        let pass = r as usize;
        let h = std::mem::take(&mut levels[pass - 1]);
        let mut coarse = if r > 1 {
            Some(LevelIndex::new(std::mem::take(&mut levels[pass - 2])))
        } else {
            None
        };
        let mut keep = Vec::new();
        let mut refined = Vec::new();
        for e in h {
            if singularity.overlaps(&e.boxed(d, depth)) {
                if let Some(ci) = coarse.as_mut() {
                    if ci.n_alive > 0 {
                        let mut hits: Vec<u32> = Vec::new();
                        vertex_sharing_candidates(&e, d, depth, r - 2, |anchor| {
                            if let Some(&idx) = ci.by_anchor.get(anchor) {
                                hits.push(idx);
                            }
                        });
                        for idx in hits {
                            let f = ci.remove(idx);
                            keep.extend(children_of(&f, d, depth));
                        }
                    }
                }
                refined.extend(children_of(&e, d, depth));
            } else {
                keep.push(e);
            }
        }
        if let Some(ci) = coarse {
            levels[pass - 2] = ci.into_alive();
        }
        levels[pass - 1] = keep;
        levels[pass] = refined;
    }

    let mut mesh = Mesh {
        d,
        depth,
        p: 1,
        elements: levels.into_iter().flatten().collect(),
        singularity: singularity.clone(),
    };
    mesh.sort_elements();
    Ok(mesh)
}

/// Closed-form leaf count for the canonical boundary singularity:
/// `(2^d - 1) r + 1` for a point, `((2^d - 1) 2^{rq} - (2^d - 2^q)) / (2^q - 1)`
/// for q >= 1.
pub fn predicted_element_count(d: usize, q: usize, r: u32) -> Result<u128> {
    if d < 1 || d > MAX_D || q > d {
        return Err(Error::OutOfRange(format!("bad (d, q) = ({d}, {q})")));
    }
    if q as u32 * r + d as u32 > 126 {
        return Err(Error::OutOfRange(format!("count overflows for r={r}")));
    }
    let two_d: u128 = 1 << d;
    if q == 0 {
        Ok((two_d - 1) * r as u128 + 1)
    } else {
        let two_q: u128 = 1 << q;
        let num = (two_d - 1) * (1u128 << (q as u32 * r)) - (two_d - two_q);
        debug_assert_eq!(num % (two_q - 1), 0);
        Ok(num / (two_q - 1))
    }
}

/// Mesh invariant violations found by [`validate_mesh`].
#[derive(Debug, Default)]
pub struct ValidationReport {
    /// Total leaf volume vs the domain volume, when they differ.
    pub volume_mismatch: Option<(u128, u128)>,
    /// Sample cells not covered by any leaf.
    pub gaps: Vec<LatticeBox>,
    /// Pairs of leaves whose interiors intersect.
    pub overlaps: Vec<(u32, u32)>,
    /// Vertex-sharing leaf pairs more than two levels apart.
    pub irregular_pairs: Vec<(u32, u32)>,
    /// Leaves overlapping the singularity at level < R.
    pub shallow_at_singularity: Vec<u32>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.volume_mismatch.is_none()
            && self.gaps.is_empty()
            && self.overlaps.is_empty()
            && self.irregular_pairs.is_empty()
            && self.shallow_at_singularity.is_empty()
    }
}

const MAX_REPORTED: usize = 32;

fn cover_check(
    m: &Mesh,
    cell: &LatticeBox,
    cands: &[u32],
    report: &mut ValidationReport,
) {
    if report.gaps.len() >= MAX_REPORTED || report.overlaps.len() >= MAX_REPORTED {
        return;
    }
    if cands.is_empty() {
        report.gaps.push(*cell);
        return;
    }
    if cands.len() == 1 {
        if m.element_box(cands[0] as usize).contains_box(cell) {
            return;
        }
    } else if cands
        .iter()
        .any(|&c| m.element_box(c as usize).contains_box(cell))
    {
        // one leaf covers the whole cell yet another reaches inside it
        report.overlaps.push((cands[0], cands[1]));
        return;
    }
    let side = cell.hi()[0] - cell.lo()[0];
    if side == 1 {
        // unit cells are covered by exactly one integer-sided leaf
        report.overlaps.push((cands[0], cands[1]));
        return;
    }
    let half = side / 2;
    let lo = cell.lo_raw();
    for mask in 0..(1u32 << m.d) {
        let mut clo = lo;
        for i in 0..m.d {
            if mask & (1 << i) != 0 {
                clo[i] += half;
            }
        }
        let child = LatticeBox::cube(m.d, clo, half);
        let sub: Vec<u32> = cands
            .iter()
            .copied()
            .filter(|&c| m.element_box(c as usize).interiors_intersect(&child))
            .collect();
        cover_check(m, &child, &sub, report);
    }
}

/// Diagnostic check of the three mesh invariants: exact tiling,
/// 1-irregularity (vertex-sharing leaves within two levels) and full depth
/// at the singularity. Intended for moderate meshes; cost grows as
/// O(N 2^d R).
pub fn validate_mesh(m: &Mesh) -> ValidationReport {
    let mut report = ValidationReport::default();

    let total: u128 = m
        .elements
        .iter()
        .map(|e| e.boxed(m.d, m.depth).volume())
        .sum();
    let expect: u128 = 1u128 << (m.depth as usize * m.d);
    if total != expect {
        report.volume_mismatch = Some((total, expect));
    }

    let domain = LatticeBox::cube(m.d, [0; MAX_D], m.scale());
    let all: Vec<u32> = (0..m.elements.len() as u32).collect();
    cover_check(m, &domain, &all, &mut report);

    // vertex-sharing pairs more than two levels apart
    let levels = m.levels_present();
    let mut by_level: FxHashMap<(u32, [Coord; MAX_D]), u32> = FxHashMap::default();
    for (i, e) in m.elements.iter().enumerate() {
        by_level.insert((e.level as u32, e.anchor), i as u32);
    }
    for (i, e) in m.elements.iter().enumerate() {
        for &coarse in &levels {
            if coarse + 2 >= e.level as u32 {
                break;
            }
            vertex_sharing_candidates(e, m.d, m.depth, coarse, |anchor| {
                if report.irregular_pairs.len() >= MAX_REPORTED {
                    return;
                }
                if let Some(&j) = by_level.get(&(coarse, *anchor)) {
                    report.irregular_pairs.push((j, i as u32));
                }
            });
        }
    }

    for (i, e) in m.elements.iter().enumerate() {
        if (e.level as u32) < m.depth
            && m.singularity.overlaps(&e.boxed(m.d, m.depth))
        {
            if report.shallow_at_singularity.len() < MAX_REPORTED {
                report.shallow_at_singularity.push(i as u32);
            }
        }
    }

    report
}

/// Cross-section of a space-time mesh at lattice time `t`; ties at shared
/// faces go to the later-in-time element. The result is a (d-1)-dimensional
/// mesh at the same depth, with the sliced singularity attached.
pub fn slice_at_time(m: &Mesh, t: Coord) -> Result<Mesh> {
    if m.d < 2 {
        return Err(Error::OutOfRange("slicing requires d >= 2".into()));
    }
    let scale = m.scale();
    if t < 0 || t > scale {
        return Err(Error::OffLattice(format!("t={t} outside [0, {scale}]")));
    }
    let taxis = m.d - 1;
    let mut elements = Vec::new();
    for e in &m.elements {
        let b = e.boxed(m.d, m.depth);
        let lo = b.lo()[taxis];
        let hi = b.hi()[taxis];
        let selected = (lo <= t && t < hi) || (t == scale && hi == scale);
        if selected {
            let mut anchor = e.anchor;
            anchor[taxis] = 0;
            elements.push(Element {
                level: e.level,
                anchor,
            });
        }
    }

    let mut boxes = Vec::new();
    for b in &m.singularity.boxes {
        if b.lo()[taxis] <= t && t <= b.hi()[taxis] {
            boxes.push(b.drop_last_axis());
        }
    }
    let q = boxes.iter().map(|b| b.extent_axes()).max().unwrap_or(0);
    let placement = classify_placement(m.d - 1, scale, q, &boxes);
    let mut mesh = Mesh {
        d: m.d - 1,
        depth: m.depth,
        p: m.p,
        elements,
        singularity: SingularitySpec::new(q, placement, boxes),
    };
    mesh.sort_elements();
    Ok(mesh)
}

/// The `2^r` identical spatial meshes a time-marching scheme would use in
/// place of one space-time mesh: each is (d-1)-dimensional, refined toward
/// the (q-1)-dimensional cross-section of the singularity.
pub struct MarchingSequence {
    pub steps: u128,
    pub prototype: Mesh,
}

impl MarchingSequence {
    pub fn meshes(&self) -> impl Iterator<Item = Mesh> + '_ {
        (0..self.steps).map(move |_| self.prototype.clone())
    }
}

pub fn time_marching_sequence(d: usize, q: usize, r: u32) -> Result<MarchingSequence> {
    if d < 2 {
        return Err(Error::OutOfRange("time marching requires d >= 2".into()));
    }
    if q == 0 {
        return Err(Error::WrongStrategy(
            "a space-time point singularity has no traveling spatial counterpart".into(),
        ));
    }
    check_dims(d, q, r)?;
    let placement = if q - 1 == 0 {
        Placement::Corner
    } else {
        Placement::Boundary
    };
    let spec = canonical_singularity(d - 1, q - 1, placement, r)?;
    let prototype = refine_toward_singularity(d - 1, r, &spec)?;
    Ok(MarchingSequence {
        steps: 1u128 << r,
        prototype,
    })
}

// ---------------------------------------------------------------------------
// JSON round-trip
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SingularityDto {
    q: usize,
    placement: String,
    boxes: Vec<(Vec<Coord>, Vec<Coord>)>,
}

#[derive(Serialize, Deserialize)]
struct ElementDto {
    level: u32,
    anchor: Vec<Coord>,
}

#[derive(Serialize, Deserialize)]
struct MeshDto {
    d: usize,
    #[serde(rename = "R")]
    depth: u32,
    p: u32,
    singularity: SingularityDto,
    elements: Vec<ElementDto>,
}

impl Mesh {
    /// Serialize with anchors in 2^R lattice units; elements are kept in
    /// the deterministic (level, anchor) order.
    pub fn to_json(&self) -> String {
        let dto = MeshDto {
            d: self.d,
            depth: self.depth,
            p: self.p,
            singularity: SingularityDto {
                q: self.singularity.q,
                placement: self.singularity.placement.as_str().to_string(),
                boxes: self
                    .singularity
                    .boxes
                    .iter()
                    .map(|b| (b.lo().to_vec(), b.hi().to_vec()))
                    .collect(),
            },
            elements: self
                .elements
                .iter()
                .map(|e| ElementDto {
                    level: e.level as u32,
                    anchor: e.anchor[..self.d].to_vec(),
                })
                .collect(),
        };
        serde_json::to_string(&dto).expect("mesh serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Mesh> {
        let dto: MeshDto =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        check_dims(dto.d, dto.singularity.q.min(dto.d), dto.depth)?;
        let placement = Placement::parse(&dto.singularity.placement)?;
        let boxes = dto
            .singularity
            .boxes
            .iter()
            .map(|(lo, hi)| {
                if lo.len() != dto.d || hi.len() != dto.d {
                    return Err(Error::Parse("singularity box has wrong dimension".into()));
                }
                Ok(LatticeBox::from_slices(lo, hi))
            })
            .collect::<Result<Vec<_>>>()?;
        let singularity = SingularitySpec::new(dto.singularity.q, placement, boxes);
        singularity.validate(dto.d, 1 << dto.depth)?;
        let mut elements = Vec::with_capacity(dto.elements.len());
        for e in &dto.elements {
            if e.anchor.len() != dto.d {
                return Err(Error::Parse("element anchor has wrong dimension".into()));
            }
            if e.level > dto.depth {
                return Err(Error::Parse("element level exceeds mesh depth".into()));
            }
            let mut anchor = [0; MAX_D];
            anchor[..dto.d].copy_from_slice(&e.anchor);
            elements.push(Element {
                level: e.level as u8,
                anchor,
            });
        }
        let mut mesh = Mesh {
            d: dto.d,
            depth: dto.depth,
            p: dto.p,
            elements,
            singularity,
        };
        mesh.sort_elements();
        Ok(mesh)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corner_mesh(d: usize, r: u32) -> Mesh {
        let s = canonical_singularity(d, 0, Placement::Corner, r).unwrap();
        refine_toward_singularity(d, r, &s).unwrap()
    }

    fn boundary_mesh(d: usize, q: usize, r: u32) -> Mesh {
        let s = canonical_singularity(d, q, Placement::Boundary, r).unwrap();
        refine_toward_singularity(d, r, &s).unwrap()
    }

    #[test]
    fn no_refinement_gives_single_element() {
        let m = corner_mesh(2, 0);
        assert_eq!(m.n_elements(), 1);
        assert!(validate_mesh(&m).is_valid());
    }

    #[test]
    fn corner_point_counts_follow_linear_law() {
        // (2^d - 1) r + 1
        assert_eq!(corner_mesh(2, 4).n_elements(), 13);
        assert_eq!(corner_mesh(3, 5).n_elements(), 36);
        assert_eq!(
            predicted_element_count(4, 0, 3).unwrap(),
            46 // 15 * 3 + 1
        );
    }

    #[test]
    fn boundary_edge_counts_match_closed_form() {
        let m = boundary_mesh(3, 1, 5);
        assert_eq!(m.n_elements(), 218); // 7 * 2^5 - 6
        assert_eq!(
            predicted_element_count(3, 1, 5).unwrap() as usize,
            m.n_elements()
        );
        assert!(validate_mesh(&m).is_valid());
    }

    #[test]
    fn face_and_uniform_counts() {
        assert_eq!(predicted_element_count(3, 2, 2).unwrap(), 36);
        let m = boundary_mesh(3, 2, 2);
        assert_eq!(m.n_elements(), 36);
        // q = d is the uniform mesh
        assert_eq!(predicted_element_count(2, 2, 3).unwrap(), 64);
        assert_eq!(boundary_mesh(2, 2, 3).n_elements(), 64);
    }

    #[test]
    fn interior_point_mesh_is_valid_and_deep() {
        let r = 4;
        let s = canonical_singularity(2, 0, Placement::Interior, r).unwrap();
        let m = refine_toward_singularity(2, r, &s).unwrap();
        assert!(validate_mesh(&m).is_valid());
        // center point touches four elements at every level
        assert_eq!(m.n_elements(), 12 * (r as usize - 2) + 16);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(canonical_singularity(6, 0, Placement::Corner, 2).is_err());
        assert!(canonical_singularity(2, 3, Placement::Boundary, 2).is_err());
        assert!(predicted_element_count(3, 4, 2).is_err());
        // depth cap keeps lattice volumes inside u128
        assert!(canonical_singularity(5, 0, Placement::Corner, 40).is_err());
    }

    #[test]
    fn singularity_outside_domain_rejected() {
        let b = LatticeBox::from_slices(&[0, 0], &[20, 0]);
        let s = SingularitySpec::new(1, Placement::Boundary, vec![b]);
        assert!(refine_toward_singularity(2, 3, &s).is_err());
    }

    #[test]
    fn validator_flags_constructed_violations() {
        let mut m = corner_mesh(2, 2);
        // remove one leaf: tiling violation
        m.elements.pop();
        let rep = validate_mesh(&m);
        assert!(!rep.is_valid());
        assert!(rep.volume_mismatch.is_some());
        assert!(!rep.gaps.is_empty());

        // hand-built level-0 next to level-3 leaves: irregularity violation
        let mut elems = vec![Element {
            level: 1,
            anchor: [0, 8, 0, 0, 0],
        }];
        elems.push(Element {
            level: 1,
            anchor: [8, 8, 0, 0, 0],
        });
        elems.push(Element {
            level: 1,
            anchor: [8, 0, 0, 0, 0],
        });
        for i in 0..4 {
            for j in 0..4 {
                elems.push(Element {
                    level: 3,
                    anchor: [2 * i, 2 * j, 0, 0, 0],
                });
            }
        }
        let m2 = Mesh {
            d: 2,
            depth: 3,
            p: 1,
            elements: elems,
            singularity: canonical_singularity(2, 0, Placement::Corner, 3).unwrap(),
        };
        let rep2 = validate_mesh(&m2);
        assert!(!rep2.irregular_pairs.is_empty());
    }

    #[test]
    fn slice_of_uniform_mesh_is_uniform() {
        let m = boundary_mesh(3, 3, 2);
        let s = slice_at_time(&m, 1).unwrap();
        assert_eq!(s.d, 2);
        assert_eq!(s.n_elements(), 16); // 2^(R(d-1))
        assert_eq!(s.singularity.q, 2);
        assert!(validate_mesh(&s).is_valid());
    }

    #[test]
    fn slice_of_spacetime_edge_is_point_mesh() {
        // 3D space-time mesh refined toward the time axis at the spatial corner
        let r = 4;
        let scale = 1 << r;
        let b = LatticeBox::from_slices(&[0, 0, 0], &[0, 0, scale]);
        let s = SingularitySpec::new(1, Placement::Boundary, vec![b]);
        let m = refine_toward_singularity(3, r, &s).unwrap();
        for t in [0, 1, scale / 2, scale] {
            let slice = slice_at_time(&m, t).unwrap();
            assert_eq!(slice.singularity.q, 0);
            assert_eq!(
                slice.n_elements() as u128,
                predicted_element_count(2, 0, r).unwrap(),
                "slice at t={t}"
            );
            assert!(validate_mesh(&slice).is_valid());
        }
    }

    #[test]
    fn slice_away_from_singular_region_is_coarser() {
        // edge spanning only the first half of the time axis
        let r = 4;
        let scale: Coord = 1 << r;
        let b = LatticeBox::from_slices(&[0, 0, 0], &[0, 0, scale / 2]);
        let s = SingularitySpec::new(1, Placement::Boundary, vec![b]);
        let m = refine_toward_singularity(3, r, &s).unwrap();
        let near = slice_at_time(&m, 0).unwrap();
        let far = slice_at_time(&m, scale - 1).unwrap();
        assert!(far.n_elements() <= near.n_elements());
        assert!(far.singularity.boxes.is_empty());
    }

    #[test]
    fn marching_sequence_counts() {
        let seq = time_marching_sequence(4, 2, 3).unwrap();
        assert_eq!(seq.steps, 8);
        assert_eq!(seq.prototype.n_elements(), 50); // 7 * 8 - 6
        let seq2 = time_marching_sequence(3, 1, 5).unwrap();
        assert_eq!(seq2.steps, 32);
        assert_eq!(seq2.prototype.n_elements(), 16); // 3 * 5 + 1
        let seq3 = time_marching_sequence(2, 2, 2).unwrap();
        assert_eq!(seq3.steps, 4);
        assert_eq!(seq3.prototype.n_elements(), 4);
        assert!(time_marching_sequence(3, 0, 4).is_err());
    }

    #[test]
    fn json_roundtrip_preserves_mesh() {
        let m = boundary_mesh(2, 1, 3);
        let text = m.to_json();
        let back = Mesh::from_json(&text).unwrap();
        assert_eq!(back.d, m.d);
        assert_eq!(back.depth, m.depth);
        assert_eq!(back.elements, m.elements);
        assert_eq!(back.singularity, m.singularity);
        assert_eq!(back.to_json(), text);
    }
}
