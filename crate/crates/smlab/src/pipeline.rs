//! End-to-end composition: mesh -> nodes -> overlap graph -> tree ->
//! ordering -> elimination report. Shared by the CLI, the comparator and
//! the test suites.

use crate::basis::{enumerate_nodes, overlap_graph, NodeSet, OverlapGraph};
use crate::elim::{symbolic_eliminate, EliminationReport};
use crate::error::{Error, Result};
use crate::mesh::{
    canonical_singularity, refine_toward_singularity, Mesh, Placement,
};
use crate::tree::{
    build_dividing_plane_tree, build_greedy_plane_tree, build_layered_tree,
    ordering_from_tree, PartitionTree,
};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Strategy {
    Layered,
    Plane,
    Greedy,
    /// Identity ordering over the deterministic variable numbering.
    Natural,
}

impl Strategy {
    pub fn parse(s: &str) -> Result<Strategy> {
        match s {
            "layered" => Ok(Strategy::Layered),
            "plane" => Ok(Strategy::Plane),
            "greedy" => Ok(Strategy::Greedy),
            "natural" => Ok(Strategy::Natural),
            other => Err(Error::Parse(format!("unknown strategy `{other}`"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Layered => "layered",
            Strategy::Plane => "plane",
            Strategy::Greedy => "greedy",
            Strategy::Natural => "natural",
        }
    }

    /// The tree the analysis in the cost model assumes for a given q.
    pub fn default_for(q: usize) -> Strategy {
        if q == 0 {
            Strategy::Layered
        } else {
            Strategy::Plane
        }
    }
}

pub fn build_strategy_tree(
    m: &Mesh,
    nodes: &NodeSet,
    strategy: Strategy,
) -> Result<Option<PartitionTree>> {
    match strategy {
        Strategy::Layered => build_layered_tree(m, nodes).map(Some),
        Strategy::Plane => build_dividing_plane_tree(m, nodes).map(Some),
        Strategy::Greedy => build_greedy_plane_tree(m, nodes).map(Some),
        Strategy::Natural => Ok(None),
    }
}

/// Everything produced along the way, for callers that need more than the
/// final counts.
pub struct Analysis {
    pub nodes: NodeSet,
    pub graph: OverlapGraph,
    pub tree: Option<PartitionTree>,
    pub order: Vec<u32>,
    pub report: EliminationReport,
}

pub fn analyze_mesh(m: &Mesh, strategy: Strategy) -> Result<Analysis> {
    let nodes = enumerate_nodes(m)?;
    let graph = overlap_graph(&nodes);
    let tree = build_strategy_tree(m, &nodes, strategy)?;
    let order = match &tree {
        Some(t) => ordering_from_tree(t, &graph)?,
        None => (0..graph.n).collect(),
    };
    let report = symbolic_eliminate(&graph, &order)?;
    Ok(Analysis {
        nodes,
        graph,
        tree,
        order,
        report,
    })
}

/// Deterministic identifier for a canonical configuration.
pub fn mesh_id(d: usize, q: usize, r: u32, p: u32, placement: Placement) -> String {
    format!("d{d}-q{q}-r{r}-p{p}-{}", placement.as_str())
}

pub fn build_canonical_mesh(
    d: usize,
    q: usize,
    r: u32,
    p: u32,
    placement: Placement,
) -> Result<Mesh> {
    let spec = canonical_singularity(d, q, placement, r)?;
    let mut m = refine_toward_singularity(d, r, &spec)?;
    m.p = p;
    Ok(m)
}

#[derive(Clone, Copy, Debug)]
pub struct Measured {
    pub n_elements: u128,
    pub n_vars: u32,
    pub fill: u64,
    pub ops: u128,
    pub peak_front: u32,
}

/// Ops of the space-time formulation: one d-dimensional solve with the
/// default tree for its singularity dimension.
pub fn measured_spacetime(d: usize, q: usize, r: u32, p: u32) -> Result<Measured> {
    let placement = if q == 0 {
        Placement::Corner
    } else {
        Placement::Boundary
    };
    let m = build_canonical_mesh(d, q, r, p, placement)?;
    let a = analyze_mesh(&m, Strategy::default_for(q))?;
    Ok(Measured {
        n_elements: m.n_elements() as u128,
        n_vars: a.graph.n,
        fill: a.report.fill_edges,
        ops: a.report.total_subtractions,
        peak_front: a.report.peak_front,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct MarchingMeasured {
    pub steps: u128,
    pub per_step: Measured,
    pub total_ops: u128,
}

/// Ops of the corresponding time-marching scheme: `2^r` identical
/// (d-1)-dimensional solves on the (q-1)-singularity mesh.
pub fn measured_marching(d: usize, q: usize, r: u32, p: u32) -> Result<MarchingMeasured> {
    if q == 0 {
        return Err(Error::WrongStrategy(
            "no time-marching counterpart for a space-time point".into(),
        ));
    }
    let per_step = measured_spacetime(d - 1, q - 1, r, p)?;
    let steps = 1u128 << r;
    Ok(MarchingMeasured {
        steps,
        per_step,
        total_ops: steps * per_step.ops,
    })
}

/// Upper bound on the variable count, used as the memory guardrail before
/// building anything.
pub fn predicted_nv_upper(d: usize, q: usize, p: u32, r: u32) -> Result<u128> {
    if q == 0 {
        crate::basis::corner_variable_count(d, p, r.max(1))
    } else {
        crate::basis::variable_bounds(d, q, p, r).map(|(_, hi)| hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analyze_runs_all_strategies_on_edge_mesh() {
        let m = build_canonical_mesh(2, 1, 3, 1, Placement::Boundary).unwrap();
        for s in [Strategy::Plane, Strategy::Greedy, Strategy::Natural] {
            let a = analyze_mesh(&m, s).unwrap();
            assert_eq!(a.order.len(), a.graph.n as usize);
            assert!(a.report.total_subtractions > 0);
        }
        assert!(analyze_mesh(&m, Strategy::Layered).is_err());
    }

    #[test]
    fn marching_totals_scale_with_steps() {
        let mm = measured_marching(3, 1, 4, 1).unwrap();
        assert_eq!(mm.steps, 16);
        assert_eq!(mm.total_ops, 16 * mm.per_step.ops);
    }

    #[test]
    fn guardrail_grows_with_r() {
        let a = predicted_nv_upper(3, 2, 1, 4).unwrap();
        let b = predicted_nv_upper(3, 2, 1, 8).unwrap();
        assert!(b > a);
    }
}
