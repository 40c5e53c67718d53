//! Sparse pattern generation and MatrixMarket export.
//!
//! Two pattern sources: the element-adjacency matrix (rows and columns are
//! elements, off-diagonals join elements sharing a (d-1)-dimensional face of
//! positive measure) and the basis overlap pattern (adjacency of the overlap
//! graph plus the diagonal).

use crate::basis::OverlapGraph;
use crate::error::{Error, Result};
use crate::fxhash::FxHashMap;
use crate::geom::{align_down, Coord, MAX_D};
use crate::mesh::Mesh;
use std::io::{BufRead, Write};

/// Symmetric boolean pattern with full diagonal, stored as the complete
/// sorted entry set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparsePattern {
    pub n: u64,
    /// All (row, col) entries including the diagonal, sorted.
    pub entries: Vec<(u32, u32)>,
    pub symmetric: bool,
}

impl SparsePattern {
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.entries
            .iter()
            .all(|&(r, c)| self.entries.binary_search(&(c, r)).is_ok())
    }

    pub fn has_full_diagonal(&self) -> bool {
        (0..self.n as u32).all(|i| self.entries.binary_search(&(i, i)).is_ok())
    }
}

fn pattern_from_pairs(n: u64, mut entries: Vec<(u32, u32)>) -> SparsePattern {
    entries.sort_unstable();
    entries.dedup();
    SparsePattern {
        n,
        entries,
        symmetric: true,
    }
}

/// Element-adjacency pattern: entry (i, j) present iff leaf boxes i and j
/// intersect in a face of dimension exactly d-1 with positive measure;
/// corner or edge contact does not count.
pub fn element_adjacency_matrix(m: &Mesh) -> SparsePattern {
    let n = m.n_elements();
    let mut by_level: FxHashMap<(u32, [Coord; MAX_D]), u32> = FxHashMap::default();
    by_level.reserve(n);
    for (i, e) in m.elements.iter().enumerate() {
        by_level.insert((e.level as u32, e.anchor), i as u32);
    }
    let levels = m.levels_present();
    let scale = m.scale();

    let mut entries: Vec<(u32, u32)> = Vec::with_capacity(n * (2 * m.d + 1));
    for i in 0..n as u32 {
        entries.push((i, i));
    }
    for (i, e) in m.elements.iter().enumerate() {
        let eb = e.boxed(m.d, m.depth);
        // probe equal or coarser neighbors across each face; finer pairs are
        // found from the finer element's side
        for &lvl in &levels {
            if lvl > e.level as u32 {
                break;
            }
            let side: Coord = 1 << (m.depth - lvl);
            for axis in 0..m.d {
                for dir in 0..2 {
                    let plane = if dir == 0 { eb.lo()[axis] } else { eb.hi()[axis] };
                    let coord = if dir == 0 { plane - side } else { plane };
                    if coord < 0 || coord + side > scale {
                        continue;
                    }
                    let mut anchor = [0 as Coord; MAX_D];
                    anchor[axis] = coord;
                    for a in 0..m.d {
                        if a != axis {
                            anchor[a] = align_down(eb.lo()[a], side);
                        }
                    }
                    if let Some(&j) = by_level.get(&(lvl, anchor)) {
                        if j as usize != i {
                            // same-level pairs are seen from both sides;
                            // keep one visit to avoid double push
                            if lvl == e.level as u32 && dir == 0 {
                                continue;
                            }
                            entries.push((i as u32, j));
                            entries.push((j, i as u32));
                        }
                    }
                }
            }
        }
    }
    pattern_from_pairs(n as u64, entries)
}

/// Overlap-graph pattern: off-diagonals are the graph edges, diagonal full.
pub fn fem_pattern(g: &OverlapGraph) -> SparsePattern {
    let mut entries = Vec::with_capacity(g.adj.len() + g.n as usize);
    for i in 0..g.n {
        entries.push((i, i));
        for &j in g.neighbors(i) {
            entries.push((i, j));
        }
    }
    pattern_from_pairs(g.n as u64, entries)
}

/// Write coordinate-format MatrixMarket: 1-based indices, lower triangle
/// only (with diagonal) when symmetric, entries sorted by (col, row).
pub fn export_matrix_market<W: Write>(p: &SparsePattern, w: &mut W) -> Result<()> {
    let kind = if p.symmetric { "symmetric" } else { "general" };
    writeln!(w, "%%MatrixMarket matrix coordinate pattern {kind}")?;
    let mut stored: Vec<(u32, u32)> = p
        .entries
        .iter()
        .copied()
        .filter(|&(r, c)| !p.symmetric || r >= c)
        .map(|(r, c)| (c, r)) // sort key: column-major
        .collect();
    stored.sort_unstable();
    writeln!(w, "{} {} {}", p.n, p.n, stored.len())?;
    for (c, r) in stored {
        writeln!(w, "{} {}", r + 1, c + 1)?;
    }
    Ok(())
}

pub fn export_matrix_market_file(p: &SparsePattern, path: &std::path::Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    export_matrix_market(p, &mut f)
}

/// Read back a pattern MatrixMarket file written by [`export_matrix_market`].
pub fn read_matrix_market<R: BufRead>(r: R) -> Result<SparsePattern> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty MatrixMarket file".into()))?
        .map_err(Error::Io)?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 5
        || parts[0] != "%%MatrixMarket"
        || parts[1] != "matrix"
        || parts[2] != "coordinate"
        || parts[3] != "pattern"
    {
        return Err(Error::Parse(format!("unsupported header: {header}")));
    }
    let symmetric = match parts[4] {
        "symmetric" => true,
        "general" => false,
        other => return Err(Error::Parse(format!("unsupported symmetry: {other}"))),
    };
    let mut size_line = None;
    for line in lines.by_ref() {
        let line = line.map_err(Error::Io)?;
        if line.starts_with('%') || line.trim().is_empty() {
            continue;
        }
        size_line = Some(line);
        break;
    }
    let size_line = size_line.ok_or_else(|| Error::Parse("missing size line".into()))?;
    let dims: Vec<u64> = size_line
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad size: {size_line}"))))
        .collect::<Result<_>>()?;
    if dims.len() != 3 || dims[0] != dims[1] {
        return Err(Error::Parse(format!("bad size line: {size_line}")));
    }
    let n = dims[0];
    let mut entries = Vec::with_capacity(dims[2] as usize * 2);
    let mut seen = 0u64;
    for line in lines {
        let line = line.map_err(Error::Io)?;
        if line.starts_with('%') || line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let r: u64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad entry: {line}")))?;
        let c: u64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad entry: {line}")))?;
        if r < 1 || r > n || c < 1 || c > n {
            return Err(Error::Parse(format!("entry out of range: {line}")));
        }
        let (r, c) = (r as u32 - 1, c as u32 - 1);
        entries.push((r, c));
        if symmetric && r != c {
            entries.push((c, r));
        }
        seen += 1;
    }
    if seen != dims[2] {
        return Err(Error::Parse(format!(
            "expected {} entries, found {seen}",
            dims[2]
        )));
    }
    let mut p = pattern_from_pairs(n, entries);
    p.symmetric = symmetric;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{enumerate_nodes, overlap_graph};
    use crate::mesh::{canonical_singularity, refine_toward_singularity, Placement};

    fn mesh(d: usize, q: usize, place: Placement, r: u32) -> Mesh {
        let s = canonical_singularity(d, q, place, r).unwrap();
        refine_toward_singularity(d, r, &s).unwrap()
    }

    #[test]
    fn equal_segments_are_tridiagonal() {
        use crate::mesh::Element;
        // three equal 1D elements in a row
        let mut elems = Vec::new();
        for i in 0..3 {
            elems.push(Element {
                level: 2,
                anchor: [i, 0, 0, 0, 0],
            });
        }
        let m3 = Mesh {
            d: 1,
            depth: 2,
            p: 1,
            elements: elems,
            singularity: canonical_singularity(1, 0, Placement::Corner, 2).unwrap(),
        };
        let p3 = element_adjacency_matrix(&m3);
        assert_eq!(p3.n, 3);
        assert_eq!(p3.nnz(), 7);

        let m = mesh(1, 1, Placement::Boundary, 2);
        let p = element_adjacency_matrix(&m);
        assert_eq!(p.n, 4);
        assert_eq!(p.nnz(), 4 + 2 * 3);
        assert!(p.is_symmetric());
        assert!(p.has_full_diagonal());
    }

    #[test]
    fn uniform_2d_has_two_face_neighbors_each() {
        let m = mesh(2, 2, Placement::Interior, 1);
        let p = element_adjacency_matrix(&m);
        assert_eq!(p.n, 4);
        // 4 diagonal + 8 off-diagonal: corners touch only across faces
        assert_eq!(p.nnz(), 12);
    }

    #[test]
    fn refined_corner_mesh_adjacency_counts() {
        // brute-force face test as the oracle
        let m = mesh(2, 0, Placement::Corner, 3);
        let p = element_adjacency_matrix(&m);
        let n = m.n_elements();
        let mut expected = Vec::new();
        for i in 0..n {
            expected.push((i as u32, i as u32));
            for j in 0..n {
                if i != j
                    && m.element_box(i).intersection_dim(&m.element_box(j)) == Some(m.d - 1)
                {
                    expected.push((i as u32, j as u32));
                }
            }
        }
        expected.sort_unstable();
        assert_eq!(p.entries, expected);
    }

    #[test]
    fn fem_pattern_is_graph_plus_diagonal() {
        let m = mesh(2, 1, Placement::Boundary, 2);
        let nodes = enumerate_nodes(&m).unwrap();
        let g = overlap_graph(&nodes);
        let p = fem_pattern(&g);
        assert_eq!(p.n as u32, g.n);
        assert_eq!(p.nnz() as u64, g.n as u64 + 2 * g.n_edges());
        assert!(p.is_symmetric());
        assert!(p.has_full_diagonal());
    }

    #[test]
    fn matrix_market_header_and_lower_triangle() {
        let tri = pattern_from_pairs(
            3,
            vec![(0, 0), (0, 1), (1, 0), (1, 1), (1, 2), (2, 1), (2, 2)],
        );
        let mut buf = Vec::new();
        export_matrix_market(&tri, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "%%MatrixMarket matrix coordinate pattern symmetric"
        );
        assert_eq!(lines[1], "3 3 5");
        assert_eq!(lines.len(), 7);
    }

    #[test]
    fn matrix_market_roundtrip_is_byte_stable() {
        let m = mesh(2, 0, Placement::Corner, 3);
        let p = element_adjacency_matrix(&m);
        let mut buf = Vec::new();
        export_matrix_market(&p, &mut buf).unwrap();
        let back = read_matrix_market(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(back, p);
        let mut buf2 = Vec::new();
        export_matrix_market(&back, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }
}
