//! Maps between graphs of groups: marking differences, Lipschitz slopes,
//! tension subgraphs, gates and legality, witness certificates.
//!
//! A map carries a vertex image, an injective vertex-group homomorphism per
//! vertex, and a reduced edge path per oriented edge. Compatibility demands
//! that conjugating the image of the far-side edge-group embedding by the
//! edge image recovers the near-side embedding; this is exactly what makes
//! the data a genuine equivariant map of the covering trees.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::fingroup::{Elem, GroupHom};
use crate::gog::{reverse, unoriented, EdgeId, GogError, GraphOfGroups, VertexId};
use crate::path::{EdgePath, ReducedLoop};
use crate::ratio::Rational;

#[derive(Debug, Error)]
pub enum MorphError {
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("every edge of the source is collapsed")]
    AllEdgesCollapsed,
    #[error("loop is elliptic")]
    EllipticLoop,
    #[error(transparent)]
    Gog(#[from] GogError),
}

/// A map of graphs of groups with reduced ("tight") edge images.
#[derive(Clone, Debug)]
pub struct GoGMap {
    source: GraphOfGroups,
    target: GraphOfGroups,
    vertex_image: Vec<VertexId>,
    vertex_hom: Vec<GroupHom>,
    edge_image: Vec<EdgePath>,
}

impl GoGMap {
    /// Builds and validates a map from forward-edge images; reverse images
    /// are derived by path reversal.
    pub fn new(
        source: GraphOfGroups,
        target: GraphOfGroups,
        vertex_image: Vec<VertexId>,
        vertex_hom: Vec<GroupHom>,
        forward_images: Vec<EdgePath>,
    ) -> Result<GoGMap, MorphError> {
        if vertex_image.len() != source.num_vertices()
            || vertex_hom.len() != source.num_vertices()
            || forward_images.len() != source.num_edges()
        {
            return Err(MorphError::InvalidMap(
                "arity mismatch between graph and map data".into(),
            ));
        }
        let mut edge_image = Vec::with_capacity(source.num_directed_edges());
        for fwd in forward_images {
            let back = fwd.reverse(&target);
            edge_image.push(fwd);
            edge_image.push(back);
        }
        let map = GoGMap {
            source,
            target,
            vertex_image,
            vertex_hom,
            edge_image,
        };
        let report = map.validate();
        if !report.is_valid() {
            return Err(MorphError::InvalidMap(report.violations.join("; ")));
        }
        Ok(map)
    }

    /// The identity map on a graph.
    pub fn identity(g: &GraphOfGroups) -> GoGMap {
        let vertex_image = (0..g.num_vertices()).collect();
        let vertex_hom = (0..g.num_vertices())
            .map(|v| crate::fingroup::FiniteGroup::identity_hom(g.vertex_group(v)))
            .collect();
        let forward_images = g
            .forward_edges()
            .map(|e| EdgePath::from_edges(g, g.init(e), vec![e], false).unwrap())
            .collect();
        GoGMap::new(g.clone(), g.clone(), vertex_image, vertex_hom, forward_images).unwrap()
    }

    /// Identity marking between two graphs with the same combinatorics but
    /// possibly different edge lengths.
    pub fn identity_marking(source: &GraphOfGroups, target: &GraphOfGroups) -> Result<GoGMap, MorphError> {
        let vertex_image = (0..source.num_vertices()).collect();
        let vertex_hom = (0..source.num_vertices())
            .map(|v| crate::fingroup::FiniteGroup::identity_hom(source.vertex_group(v)))
            .collect();
        let forward_images = source
            .forward_edges()
            .map(|e| EdgePath::from_edges(target, source.init(e), vec![e], false))
            .collect::<Result<_, _>>()?;
        GoGMap::new(
            source.clone(),
            target.clone(),
            vertex_image,
            vertex_hom,
            forward_images,
        )
    }

    pub fn source(&self) -> &GraphOfGroups {
        &self.source
    }

    pub fn target(&self) -> &GraphOfGroups {
        &self.target
    }

    pub fn vertex_image(&self, v: VertexId) -> VertexId {
        self.vertex_image[v]
    }

    pub fn vertex_hom(&self, v: VertexId) -> &GroupHom {
        &self.vertex_hom[v]
    }

    pub fn edge_image(&self, e: EdgeId) -> &EdgePath {
        &self.edge_image[e]
    }

    pub fn is_collapsed(&self, e: EdgeId) -> bool {
        self.edge_image[e].num_edges() == 0
    }

    /// Structural validation; an empty violation list means the map is valid.
    pub fn validate(&self) -> MapReport {
        let mut violations = Vec::new();
        for v in 0..self.source.num_vertices() {
            let hom = &self.vertex_hom[v];
            if !hom.is_injective() {
                violations.push(format!("vertex {v}: vertex homomorphism not injective"));
            }
            if hom.source().as_ref() != self.source.vertex_group(v).as_ref() {
                violations.push(format!("vertex {v}: homomorphism source group mismatch"));
            }
            let w = self.vertex_image[v];
            if w >= self.target.num_vertices() {
                violations.push(format!("vertex {v}: image vertex out of range"));
                continue;
            }
            if hom.target().as_ref() != self.target.vertex_group(w).as_ref() {
                violations.push(format!("vertex {v}: homomorphism target group mismatch"));
            }
        }
        for e in self.source.directed_edges() {
            let img = &self.edge_image[e];
            if !img.is_reduced(&self.target) {
                violations.push(format!("non-reduced edge image e{}", unoriented(e) + 1));
                continue;
            }
            if img.base() != self.vertex_image[self.source.init(e)]
                || img.end(&self.target) != self.vertex_image[self.source.terminus(e)]
            {
                violations.push(format!(
                    "edge image endpoints wrong for e{}",
                    unoriented(e) + 1
                ));
                continue;
            }
            if e % 2 == 0 {
                let back = &self.edge_image[reverse(e)];
                if back != &img.reverse(&self.target) {
                    violations.push(format!(
                        "edge image of reverse orientation is not the reversed path for e{}",
                        unoriented(e) + 1
                    ));
                }
                // compatibility with the edge-group embeddings
                let tau = self.source.terminus(e);
                let iota = self.source.init(e);
                for c in self.source.edge_group(e).elements() {
                    let near = self.vertex_hom[iota]
                        .apply(self.source.mono(reverse(e)).apply(c));
                    let far = self.vertex_hom[tau].apply(self.source.mono(e).apply(c));
                    let far_path = EdgePath::new(
                        &self.target,
                        img.end(&self.target),
                        vec![far],
                        vec![],
                        false,
                    )
                    .unwrap();
                    let lhs = img
                        .concat(&self.target, &far_path)
                        .and_then(|p| p.concat(&self.target, &img.reverse(&self.target)))
                        .map(|p| p.reduce(&self.target));
                    match lhs {
                        Ok(p) if p.num_edges() == 0 && p.elems()[0] == near => {}
                        _ => violations.push(format!(
                            "failed relator compatibility at e{} element {c}",
                            unoriented(e) + 1
                        )),
                    }
                }
            }
        }
        MapReport {
            violations,
            source_euler: self.source.euler_char(),
            target_euler: self.target.euler_char(),
        }
    }

    /// Pushes a path through the map and reduces. The loop flag is preserved.
    pub fn map_path(&self, p: &EdgePath) -> Result<EdgePath, GogError> {
        let vs = p.vertex_seq(&self.source);
        let mut out = EdgePath::new(
            &self.target,
            self.vertex_image[p.base()],
            vec![self.vertex_hom[vs[0]].apply(p.elems()[0])],
            vec![],
            false,
        )?;
        for (i, &e) in p.edges().iter().enumerate() {
            out = out.concat(&self.target, &self.edge_image[e])?;
            let elem = self.vertex_hom[vs[i + 1]].apply(p.elems()[i + 1]);
            let elem_path = EdgePath::new(
                &self.target,
                self.vertex_image[vs[i + 1]],
                vec![elem],
                vec![],
                false,
            )?;
            out = out.concat(&self.target, &elem_path)?;
        }
        let out = out.reduce(&self.target);
        EdgePath::new(
            &self.target,
            out.base(),
            out.elems().to_vec(),
            out.edges().to_vec(),
            p.is_loop(),
        )
    }

    /// Slope of the map on an edge: image length over source length; zero on
    /// collapsed edges.
    pub fn slope(&self, e: EdgeId) -> Rational {
        let img_len = self.edge_image[e].length(&self.target);
        &img_len / self.source.length(e)
    }

    /// Maximal slope over non-collapsed edges.
    pub fn lipschitz_constant(&self) -> Result<Rational, MorphError> {
        self.source
            .directed_edges()
            .filter(|&e| !self.is_collapsed(e))
            .map(|e| self.slope(e))
            .max()
            .ok_or(MorphError::AllEdgesCollapsed)
    }

    /// Directed edges attaining the maximal slope; closed under reversal.
    pub fn tension_subgraph(&self) -> Result<Vec<EdgeId>, MorphError> {
        let lip = self.lipschitz_constant()?;
        Ok(self
            .source
            .directed_edges()
            .filter(|&e| !self.is_collapsed(e) && self.slope(e) == lip)
            .collect())
    }

    /// Image of a direction: the first edge (with coset) of the twisted edge
    /// image; `None` when the edge is collapsed.
    pub fn direction_image(&self, d: Direction) -> Option<Direction> {
        let img = &self.edge_image[d.edge];
        let first = *img.edges().first()?;
        let v = self.source.init(d.edge);
        let w = self.vertex_image[v];
        let twisted = self
            .target
            .vertex_group(w)
            .mul(self.vertex_hom[v].apply(d.coset), img.elems()[0]);
        Some(Direction {
            edge: first,
            coset: self.target.coset_rep(first, twisted),
        })
    }

    /// Partition of the directions at every source vertex by image direction.
    /// Directions of collapsed edges form singleton gates flagged degenerate.
    pub fn gates(&self) -> Result<GateStructure, MorphError> {
        if self
            .source
            .directed_edges()
            .all(|e| self.is_collapsed(e))
        {
            return Err(MorphError::AllEdgesCollapsed);
        }
        let mut per_vertex = Vec::with_capacity(self.source.num_vertices());
        for v in 0..self.source.num_vertices() {
            let mut by_image: BTreeMap<Direction, Vec<Direction>> = BTreeMap::new();
            let mut degenerate: Vec<Gate> = Vec::new();
            for d in directions_at(&self.source, v) {
                match self.direction_image(d) {
                    Some(img) => by_image.entry(img).or_default().push(d),
                    None => degenerate.push(Gate {
                        directions: vec![d],
                        image: None,
                    }),
                }
            }
            let mut gates: Vec<Gate> = by_image
                .into_iter()
                .map(|(img, directions)| Gate {
                    directions,
                    image: Some(img),
                })
                .collect();
            gates.extend(degenerate);
            per_vertex.push(gates);
        }
        Ok(GateStructure { per_vertex })
    }

    /// Witness certificate per the optimal-map criterion: the loop's edges
    /// lie in the tension subgraph, the loop is legal, and its stretch ratio
    /// equals the Lipschitz constant. The three sub-checks are reported
    /// individually.
    pub fn witness_certificate(&self, loop_: &ReducedLoop) -> Result<WitnessReport, MorphError> {
        if !loop_.is_hyperbolic() {
            return Err(MorphError::EllipticLoop);
        }
        let lip = self.lipschitz_constant()?;
        let tension = self.tension_subgraph()?;
        let in_tension = loop_
            .path()
            .edges()
            .iter()
            .all(|e| tension.contains(e));
        let gates = self.gates()?;
        let legal = gates.is_legal(&self.source, loop_);
        let image = self.map_path(loop_.path())?;
        let num = image.translation_length(&self.target)?;
        let den = loop_.path().translation_length(&self.source)?;
        let ratio = &num / &den;
        let ratio_matches = ratio == lip;
        Ok(WitnessReport {
            in_tension,
            legal,
            ratio,
            lipschitz: lip,
            ratio_matches,
        })
    }

    /// Compose `self` after `inner` (so `self . inner : inner.source -> self.target`).
    pub fn compose(&self, inner: &GoGMap) -> Result<GoGMap, MorphError> {
        let vertex_image = (0..inner.source.num_vertices())
            .map(|v| self.vertex_image[inner.vertex_image[v]])
            .collect();
        let vertex_hom = (0..inner.source.num_vertices())
            .map(|v| self.vertex_hom[inner.vertex_image[v]].compose(&inner.vertex_hom[v]))
            .collect();
        let forward_images = inner
            .source
            .forward_edges()
            .map(|e| self.map_path(&inner.edge_image[e]))
            .collect::<Result<Vec<_>, _>>()?;
        GoGMap::new(
            inner.source.clone(),
            self.target.clone(),
            vertex_image,
            vertex_hom,
            forward_images,
        )
    }

    /// Data equality up to slide-normalizing the edge images.
    pub fn same_map(&self, other: &GoGMap) -> bool {
        if self.vertex_image != other.vertex_image {
            return false;
        }
        for v in 0..self.vertex_hom.len() {
            if self.vertex_hom[v].image_table() != other.vertex_hom[v].image_table() {
                return false;
            }
        }
        self.source.directed_edges().all(|e| {
            self.edge_image[e].same_element(&self.target, &other.edge_image[e])
        })
    }
}

/// Report from `validate`; also records the Euler characteristics of the two
/// sides for quick homotopy-equivalence sanity checks.
#[derive(Clone, Debug)]
pub struct MapReport {
    pub violations: Vec<String>,
    pub source_euler: Rational,
    pub target_euler: Rational,
}

impl MapReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// A direction at the vertex `init(edge)`: an issuing oriented edge together
/// with the canonical representative of a left coset of the edge-group image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Direction {
    pub edge: EdgeId,
    pub coset: Elem,
}

/// All directions at a vertex, in canonical order.
pub fn directions_at(g: &GraphOfGroups, v: VertexId) -> Vec<Direction> {
    let mut out = Vec::new();
    for e in g.edges_at(v) {
        let mut reps: Vec<Elem> = g
            .vertex_group(v)
            .elements()
            .map(|c| g.coset_rep(e, c))
            .collect();
        reps.sort_unstable();
        reps.dedup();
        out.extend(reps.into_iter().map(|coset| Direction { edge: e, coset }));
    }
    out.sort();
    out
}

#[derive(Clone, Debug)]
pub struct Gate {
    pub directions: Vec<Direction>,
    /// Image direction in the target; `None` flags a degenerate gate coming
    /// from a collapsed edge.
    pub image: Option<Direction>,
}

/// Gates of a map, per source vertex.
#[derive(Clone, Debug)]
pub struct GateStructure {
    per_vertex: Vec<Vec<Gate>>,
}

impl GateStructure {
    pub fn at_vertex(&self, v: VertexId) -> &[Gate] {
        &self.per_vertex[v]
    }

    pub fn gate_of(&self, v: VertexId, d: Direction) -> Option<usize> {
        self.per_vertex[v]
            .iter()
            .position(|g| g.directions.contains(&d))
    }

    fn is_degenerate(&self, v: VertexId, idx: usize) -> bool {
        self.per_vertex[v][idx].image.is_none()
    }

    /// Turns crossed by a cyclically reduced loop, including the wrap turn.
    pub fn crossed_turns(
        g: &GraphOfGroups,
        loop_: &ReducedLoop,
    ) -> Vec<(VertexId, Direction, Direction)> {
        let word = loop_.path().cyclic_word(g);
        let k = word.len();
        (0..k)
            .map(|i| {
                let (e, d) = word[i];
                let (e_next, _) = word[(i + 1) % k];
                let v = g.terminus(e);
                let incoming = Direction {
                    edge: reverse(e),
                    coset: g.coset_rep(reverse(e), 0),
                };
                let outgoing = Direction {
                    edge: e_next,
                    coset: g.coset_rep(e_next, d),
                };
                (v, incoming, outgoing)
            })
            .collect()
    }

    /// True iff every crossed turn has its two directions in distinct,
    /// non-degenerate gates.
    pub fn is_legal(&self, g: &GraphOfGroups, loop_: &ReducedLoop) -> bool {
        for (v, din, dout) in Self::crossed_turns(g, loop_) {
            let (Some(a), Some(b)) = (self.gate_of(v, din), self.gate_of(v, dout)) else {
                return false;
            };
            if a == b || self.is_degenerate(v, a) || self.is_degenerate(v, b) {
                return false;
            }
        }
        true
    }
}

/// Witness certificate sub-check results.
#[derive(Clone, Debug)]
pub struct WitnessReport {
    pub in_tension: bool,
    pub legal: bool,
    pub ratio: Rational,
    pub lipschitz: Rational,
    pub ratio_matches: bool,
}

impl WitnessReport {
    pub fn certified(&self) -> bool {
        self.in_tension && self.legal && self.ratio_matches
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::ratio::Rational;

    #[test]
    fn identity_map_is_clean() {
        let g = corpus::tripod(&[
            Rational::new(1, 3),
            Rational::new(1, 3),
            Rational::new(1, 3),
        ]);
        let id = GoGMap::identity(&g);
        assert!(id.validate().is_valid());
        assert_eq!(id.lipschitz_constant().unwrap(), Rational::one());
        // discrete gates: every direction alone in its gate
        let gates = id.gates().unwrap();
        for v in 0..g.num_vertices() {
            for gate in gates.at_vertex(v) {
                assert_eq!(gate.directions.len(), 1);
            }
        }
    }

    #[test]
    fn caterpillar_to_tripod_is_clean_with_lip_4_3() {
        let f = corpus::caterpillar_to_tripod();
        assert!(f.validate().is_valid());
        assert_eq!(f.lipschitz_constant().unwrap(), Rational::new(4, 3));
        // both edges attain the maximum
        assert_eq!(f.tension_subgraph().unwrap().len(), 4);
    }

    #[test]
    fn tripod_to_caterpillar_collapses_middle() {
        let f = corpus::tripod_to_caterpillar();
        assert!(f.validate().is_valid());
        assert_eq!(f.lipschitz_constant().unwrap(), Rational::new(3, 2));
        let tension = f.tension_subgraph().unwrap();
        assert_eq!(tension, vec![0, 1, 4, 5]); // e1' and e3', both orientations
        assert!(f.is_collapsed(2));
    }

    #[test]
    fn map_path_substitutes_and_reduces() {
        let f = corpus::caterpillar_to_tripod();
        let cat = f.source().clone();
        let tri = f.target().clone();
        // witness loop a e1 b ~e1 at v1
        let w = EdgePath::new(&cat, 0, vec![1, 1, 0], vec![0, 1], true).unwrap();
        let img = f.map_path(&w).unwrap();
        assert_eq!(img.translation_length(&tri).unwrap(), Rational::new(4, 3));
        // loop a (e1 e2) c (~e2 ~e1): image reduces across the middle
        let l = EdgePath::new(&cat, 0, vec![1, 0, 1, 0, 0], vec![0, 2, 3, 1], true).unwrap();
        let img = f.map_path(&l).unwrap();
        assert_eq!(img.num_edges(), 4);
        assert_eq!(img.translation_length(&tri).unwrap(), Rational::new(4, 3));
    }

    #[test]
    fn identity_map_path_just_reduces() {
        let g = corpus::dihedral_segment();
        let id = GoGMap::identity(&g);
        let p = EdgePath::new(&g, 0, vec![1, 0, 0], vec![0, 1], true).unwrap();
        let img = id.map_path(&p).unwrap();
        assert_eq!(img, p.reduce(&g));
    }

    #[test]
    fn caterpillar_gates_at_middle_vertex() {
        let f = corpus::caterpillar_to_tripod();
        let gates = f.gates().unwrap();
        // vertex 1 carries directions (~e1, c) and (e2, c) for c in Z/2;
        // they pair up into two gates of size two
        let at_v1 = gates.at_vertex(1);
        assert_eq!(at_v1.len(), 2);
        for gate in at_v1 {
            assert_eq!(gate.directions.len(), 2);
        }
    }

    #[test]
    fn witness_certificate_on_caterpillar() {
        let f = corpus::caterpillar_to_tripod();
        let cat = f.source().clone();
        let w = EdgePath::new(&cat, 0, vec![1, 1, 0], vec![0, 1], true).unwrap();
        let w = ReducedLoop::assert_reduced(&cat, w).unwrap();
        let report = f.witness_certificate(&w).unwrap();
        assert!(report.certified(), "{report:?}");
        assert_eq!(report.ratio, Rational::new(4, 3));

        let l = EdgePath::new(&cat, 0, vec![1, 0, 1, 0, 0], vec![0, 2, 3, 1], true).unwrap();
        let l = ReducedLoop::assert_reduced(&cat, l).unwrap();
        let report = f.witness_certificate(&l).unwrap();
        assert!(!report.certified());
        assert_eq!(report.ratio, Rational::new(2, 3));
        assert!(!report.ratio_matches);
    }

    #[test]
    fn identity_certificate_is_trivially_true() {
        let g = corpus::dihedral_segment();
        let id = GoGMap::identity(&g);
        let p = EdgePath::new(&g, 0, vec![1, 1, 0], vec![0, 1], true).unwrap();
        let p = ReducedLoop::assert_reduced(&g, p).unwrap();
        let report = id.witness_certificate(&p).unwrap();
        assert!(report.certified());
        assert_eq!(report.ratio, Rational::one());
    }

    #[test]
    fn elliptic_loop_is_rejected() {
        let g = corpus::dihedral_segment();
        let id = GoGMap::identity(&g);
        let p = EdgePath::vertex_elem(&g, 0, 1).unwrap();
        let p = ReducedLoop::assert_reduced(&g, p).unwrap();
        assert!(matches!(
            id.witness_certificate(&p),
            Err(MorphError::EllipticLoop)
        ));
    }

    #[test]
    fn non_reduced_edge_image_is_reported() {
        let g = corpus::dihedral_segment();
        // edge image e1 [0] ~e1 [0] e1 backtracks
        let bad = EdgePath::new(&g, 0, vec![0, 0, 0, 0], vec![0, 1, 0], false).unwrap();
        let homs = vec![
            crate::fingroup::FiniteGroup::identity_hom(g.vertex_group(0)),
            crate::fingroup::FiniteGroup::identity_hom(g.vertex_group(1)),
        ];
        let err = GoGMap::new(g.clone(), g.clone(), vec![0, 1], homs, vec![bad]).unwrap_err();
        assert!(err.to_string().contains("non-reduced edge image e1"));
    }

    #[test]
    fn composition_multiplies_slopes() {
        let f = corpus::caterpillar_to_tripod();
        let g = corpus::tripod_to_caterpillar();
        let comp = g.compose(&f).unwrap();
        assert!(comp.validate().is_valid());
        let lip_f = f.lipschitz_constant().unwrap();
        let lip_g = g.lipschitz_constant().unwrap();
        let lip_comp = comp.lipschitz_constant().unwrap();
        assert!(lip_comp <= &lip_f * &lip_g);
    }
}
