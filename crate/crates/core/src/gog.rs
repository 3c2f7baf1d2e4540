//! Marked metric graphs of groups with finite stabilizers.
//!
//! Oriented edges are stored in pairs: edge `2k` is the forward orientation
//! of the k-th unoriented edge and `2k + 1` its reverse, so `reverse(e) = e ^ 1`
//! and the involution is fixed-point free by construction. Each oriented edge
//! carries the injective monomorphism from its edge group into the vertex
//! group at its terminal vertex.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::fingroup::{Elem, GroupHom, GroupRef};
use crate::ratio::Rational;

pub type VertexId = usize;

/// Directed edge index; `e ^ 1` is the reverse orientation.
pub type EdgeId = usize;

pub fn reverse(e: EdgeId) -> EdgeId {
    e ^ 1
}

/// Unoriented edge index of a directed edge.
pub fn unoriented(e: EdgeId) -> usize {
    e >> 1
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GogError {
    #[error("invalid graph of groups: {0}")]
    InvalidGraph(String),
    #[error("inconsistent edge path: {0}")]
    InconsistentPath(String),
    #[error("operation requires a loop-flagged path")]
    NotLoop,
    #[error("scale factor must be positive")]
    NonpositiveFactor,
    #[error("vertex {0} out of range")]
    VertexOutOfRange(VertexId),
    #[error("edge {0} out of range")]
    EdgeOutOfRange(EdgeId),
}

#[derive(Clone, Debug)]
struct EdgeData {
    terminus: VertexId,
    group: GroupRef,
    /// Monomorphism edge group -> vertex group at `terminus`.
    mono: GroupHom,
    length: Rational,
}

/// A connected metric graph of groups.
#[derive(Clone, Debug)]
pub struct GraphOfGroups {
    vertices: Vec<GroupRef>,
    edges: Vec<EdgeData>,
}

impl GraphOfGroups {
    pub fn new(vertex_groups: Vec<GroupRef>) -> Self {
        GraphOfGroups {
            vertices: vertex_groups,
            edges: Vec::new(),
        }
    }

    /// Adds an unoriented edge; returns the id of its forward orientation
    /// (`from -> to`). `mono_to_head` embeds the edge group into the group at
    /// `to`, `mono_to_tail` into the group at `from`.
    pub fn add_edge(
        &mut self,
        from: VertexId,
        to: VertexId,
        length: Rational,
        edge_group: GroupRef,
        mono_to_head: Vec<Elem>,
        mono_to_tail: Vec<Elem>,
    ) -> Result<EdgeId, GogError> {
        if from >= self.vertices.len() {
            return Err(GogError::VertexOutOfRange(from));
        }
        if to >= self.vertices.len() {
            return Err(GogError::VertexOutOfRange(to));
        }
        if !length.is_positive() {
            return Err(GogError::InvalidGraph(format!(
                "edge ({from}, {to}) has nonpositive length {length}"
            )));
        }
        let head = GroupHom::new(edge_group.clone(), self.vertices[to].clone(), mono_to_head)
            .map_err(|e| GogError::InvalidGraph(format!("mono_to_head: {e}")))?;
        let tail = GroupHom::new(edge_group.clone(), self.vertices[from].clone(), mono_to_tail)
            .map_err(|e| GogError::InvalidGraph(format!("mono_to_tail: {e}")))?;
        if !head.is_injective() || !tail.is_injective() {
            return Err(GogError::InvalidGraph(format!(
                "edge ({from}, {to}): edge-group monomorphism is not injective"
            )));
        }
        let id = self.edges.len();
        self.edges.push(EdgeData {
            terminus: to,
            group: edge_group.clone(),
            mono: head,
            length: length.clone(),
        });
        self.edges.push(EdgeData {
            terminus: from,
            group: edge_group,
            mono: tail,
            length,
        });
        Ok(id)
    }

    /// Adds an edge whose monomorphisms are built from an existing hom pair.
    pub fn add_edge_homs(
        &mut self,
        from: VertexId,
        to: VertexId,
        length: Rational,
        edge_group: GroupRef,
        head: GroupHom,
        tail: GroupHom,
    ) -> Result<EdgeId, GogError> {
        self.add_edge(
            from,
            to,
            length,
            edge_group,
            head.image_table().to_vec(),
            tail.image_table().to_vec(),
        )
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_group(&self, v: VertexId) -> &GroupRef {
        &self.vertices[v]
    }

    pub fn vertex_groups(&self) -> &[GroupRef] {
        &self.vertices
    }

    /// Number of directed edges (twice the unoriented count).
    pub fn num_directed_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len() / 2
    }

    pub fn directed_edges(&self) -> std::ops::Range<EdgeId> {
        0..self.edges.len()
    }

    /// Forward orientations only, one per unoriented edge.
    pub fn forward_edges(&self) -> impl Iterator<Item = EdgeId> {
        (0..self.edges.len()).step_by(2)
    }

    pub fn terminus(&self, e: EdgeId) -> VertexId {
        self.edges[e].terminus
    }

    pub fn init(&self, e: EdgeId) -> VertexId {
        self.edges[reverse(e)].terminus
    }

    pub fn is_loop_edge(&self, e: EdgeId) -> bool {
        self.init(e) == self.terminus(e)
    }

    pub fn edge_group(&self, e: EdgeId) -> &GroupRef {
        &self.edges[e].group
    }

    /// The monomorphism from the edge group into the group at `terminus(e)`.
    pub fn mono(&self, e: EdgeId) -> &GroupHom {
        &self.edges[e].mono
    }

    pub fn length(&self, e: EdgeId) -> &Rational {
        &self.edges[e].length
    }

    pub fn edges_at(&self, v: VertexId) -> Vec<EdgeId> {
        self.directed_edges().filter(|&e| self.init(e) == v).collect()
    }

    /// Least representative of the left coset `c * image(mono(reverse(e)))`
    /// inside the vertex group at `init(e)`.
    pub fn coset_rep(&self, e: EdgeId, c: Elem) -> Elem {
        let g = &self.vertices[self.init(e)];
        let mono = self.mono(reverse(e));
        mono.image_table()
            .iter()
            .map(|&m| g.mul(c, m))
            .min()
            .unwrap()
    }

    pub fn volume(&self) -> Rational {
        self.forward_edges()
            .map(|e| {
                let den = Rational::int(self.edge_group(e).order() as i64);
                self.length(e) / &den
            })
            .sum()
    }

    /// Volume ignoring edge stabilizers (reported for comparison, never
    /// asserted on).
    pub fn unweighted_volume(&self) -> Rational {
        self.forward_edges().map(|e| self.length(e).clone()).sum()
    }

    pub fn euler_char(&self) -> Rational {
        let v: Rational = self
            .vertices
            .iter()
            .map(|g| Rational::new(1, g.order() as i64))
            .sum();
        let e: Rational = self
            .forward_edges()
            .map(|e| Rational::new(1, self.edge_group(e).order() as i64))
            .sum();
        v - e
    }

    pub fn scale(&self, factor: &Rational) -> Result<GraphOfGroups, GogError> {
        if !factor.is_positive() {
            return Err(GogError::NonpositiveFactor);
        }
        let mut out = self.clone();
        for e in &mut out.edges {
            e.length = &e.length * factor;
        }
        Ok(out)
    }

    /// Scales all lengths so the volume becomes exactly 1.
    pub fn normalize_volume(&self) -> Result<GraphOfGroups, GogError> {
        let vol = self.volume();
        if !vol.is_positive() {
            return Err(GogError::InvalidGraph("graph has zero volume".into()));
        }
        self.scale(&vol.recip())
    }

    pub fn is_connected(&self) -> bool {
        if self.vertices.is_empty() {
            return false;
        }
        let mut seen = vec![false; self.vertices.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for e in self.directed_edges() {
                if self.init(e) == v && !seen[self.terminus(e)] {
                    seen[self.terminus(e)] = true;
                    stack.push(self.terminus(e));
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Full invariant check; an empty violation list means the graph is valid.
    pub fn validate(&self) -> GogReport {
        let mut violations = Vec::new();
        if self.vertices.is_empty() {
            violations.push("graph has no vertices".to_string());
        }
        if !self.vertices.is_empty() && !self.is_connected() {
            violations.push("underlying graph is not connected".to_string());
        }
        for k in 0..self.num_edges() {
            let fwd = 2 * k;
            let bwd = fwd + 1;
            if self.edges[fwd].length != self.edges[bwd].length {
                violations.push(format!(
                    "edge {k}: length differs between orientations ({} vs {})",
                    self.edges[fwd].length, self.edges[bwd].length
                ));
            }
            if self.edges[fwd].group.as_ref() != self.edges[bwd].group.as_ref() {
                violations.push(format!("edge {k}: edge group differs between orientations"));
            }
            if !self.edges[fwd].length.is_positive() {
                violations.push(format!("edge {k}: nonpositive length"));
            }
            for e in [fwd, bwd] {
                if !self.edges[e].mono.is_injective() {
                    violations.push(format!("edge {k}: monomorphism not injective"));
                }
                if self.edges[e].mono.target().as_ref()
                    != self.vertices[self.edges[e].terminus].as_ref()
                {
                    violations.push(format!("edge {k}: monomorphism lands in wrong group"));
                }
            }
        }
        GogReport {
            violations,
            euler_char: self.euler_char(),
            volume: self.volume(),
        }
    }

    /// A deterministic spanning tree (BFS from vertex 0), as directed edge
    /// ids oriented away from the root.
    pub fn spanning_tree(&self) -> Vec<EdgeId> {
        let mut seen = vec![false; self.vertices.len()];
        if self.vertices.is_empty() {
            return Vec::new();
        }
        seen[0] = true;
        let mut tree = Vec::new();
        let mut queue = std::collections::VecDeque::from([0]);
        while let Some(v) = queue.pop_front() {
            for e in self.directed_edges() {
                if self.init(e) == v && !seen[self.terminus(e)] {
                    seen[self.terminus(e)] = true;
                    tree.push(e);
                    queue.push_back(self.terminus(e));
                }
            }
        }
        tree
    }

    /// Non-free vertices, i.e. those with nontrivial vertex group.
    pub fn nonfree_vertices(&self) -> Vec<VertexId> {
        (0..self.vertices.len())
            .filter(|&v| !self.vertices[v].is_trivial())
            .collect()
    }

    pub fn vertex_set(&self) -> BTreeSet<VertexId> {
        (0..self.vertices.len()).collect()
    }
}

/// Validation report; also carries the two basic numerical invariants.
#[derive(Clone, Debug)]
pub struct GogReport {
    pub violations: Vec<String>,
    pub euler_char: Rational,
    pub volume: Rational,
}

impl GogReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::fingroup::FiniteGroup;

    #[test]
    fn dihedral_segment_invariants() {
        let g = corpus::dihedral_segment();
        let report = g.validate();
        assert!(report.is_valid(), "{:?}", report.violations);
        assert_eq!(report.euler_char, Rational::zero());
        assert_eq!(report.volume, Rational::one());
    }

    #[test]
    fn tripod_invariants() {
        let g = corpus::tripod(&[
            Rational::new(1, 3),
            Rational::new(1, 3),
            Rational::new(1, 3),
        ]);
        let report = g.validate();
        assert!(report.is_valid());
        assert_eq!(report.euler_char, Rational::new(-1, 2));
        assert_eq!(report.volume, Rational::one());
    }

    #[test]
    fn k23_invariants() {
        let g = corpus::k23();
        let report = g.validate();
        assert!(report.is_valid());
        assert_eq!(report.euler_char, Rational::int(-1));
        assert_eq!(report.volume, Rational::one());
    }

    #[test]
    fn volume_formula_with_edge_stabilizer() {
        // single loop of length 1 with Z/2 edge group: volume 1/2
        let g = corpus::loop_with_edge_group_z2();
        assert_eq!(g.volume(), Rational::new(1, 2));
        let n = g.normalize_volume().unwrap();
        assert_eq!(n.volume(), Rational::one());
        assert_eq!(n.length(0), &Rational::int(2));
    }

    #[test]
    fn scale_multiplies_volume_exactly() {
        let g = corpus::tripod(&[Rational::int(1), Rational::int(1), Rational::int(1)]);
        assert_eq!(g.volume(), Rational::int(3));
        let s = g.scale(&Rational::new(1, 3)).unwrap();
        assert_eq!(s.volume(), Rational::one());
        for e in s.forward_edges() {
            assert_eq!(s.length(e), &Rational::new(1, 3));
        }
        assert!(g.scale(&Rational::zero()).is_err());
    }

    #[test]
    fn normalize_is_identity_on_volume_one() {
        let g = corpus::k23();
        let n = g.normalize_volume().unwrap();
        for e in g.directed_edges() {
            assert_eq!(g.length(e), n.length(e));
        }
    }

    #[test]
    fn mismatched_orientation_length_is_reported() {
        let triv = FiniteGroup::trivial();
        let z2 = FiniteGroup::cyclic(2).unwrap();
        let mut g = GraphOfGroups::new(vec![z2.clone(), z2]);
        g.add_edge(0, 1, Rational::one(), triv, vec![0], vec![0])
            .unwrap();
        g.edges[1].length = Rational::int(2);
        let report = g.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| v.contains("length differs")));
    }

    #[test]
    fn disconnected_graph_is_reported() {
        let z2 = FiniteGroup::cyclic(2).unwrap();
        let g = GraphOfGroups::new(vec![z2.clone(), z2]);
        assert!(!g.validate().is_valid());
    }
}
