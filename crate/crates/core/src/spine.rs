//! Forest collapses, the collapse poset around a graph, surviving edges,
//! deck-action quotients and essential edge orbits.
//!
//! An unoriented edge is collapsible when it is not a loop and one of its two
//! edge-group monomorphisms is surjective; collapsing merges the far vertex
//! into the near one without changing the deformation space. Surviving edges
//! are computed by exhaustively enumerating maximal collapses; essential
//! orbits by enumerating maximal invariant forests of a deck-action cover.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::cover::{build_cover, CoverData, CoverError, FiniteQuotient};
use crate::fingroup::{Elem, FiniteGroup, GroupHom, Subgroup};
use crate::gog::{reverse, unoriented, GogError, GraphOfGroups, VertexId};
use crate::morphism::{GoGMap, MorphError};
use crate::path::EdgePath;
use crate::ratio::Rational;

/// Cap on the number of poset elements explored.
pub const STAR_BUDGET: usize = 100_000;

#[derive(Debug, Error)]
pub enum SpineError {
    #[error("edge {edge} is not collapsible at stage {stage}")]
    NotCollapsible { edge: usize, stage: usize },
    #[error("collapse poset exceeded the exploration budget")]
    BudgetExceeded,
    #[error("kernel has torsion: vertex {vertex} element {elem}")]
    KernelHasTorsion { vertex: VertexId, elem: Elem },
    #[error(transparent)]
    Gog(#[from] GogError),
    #[error(transparent)]
    Morph(#[from] MorphError),
    #[error(transparent)]
    Cover(#[from] CoverError),
}

/// Unoriented ids of the collapsible edges: non-loops with a surjective
/// edge-to-vertex monomorphism on at least one side.
pub fn collapsible_edges(g: &GraphOfGroups) -> Vec<usize> {
    g.forward_edges()
        .filter(|&e| {
            !g.is_loop_edge(e)
                && (g.mono(e).image_set().len() == g.vertex_group(g.terminus(e)).order()
                    || g.mono(reverse(e)).image_set().len()
                        == g.vertex_group(g.init(e)).order())
        })
        .map(unoriented)
        .collect()
}

pub fn is_reduced(g: &GraphOfGroups) -> bool {
    collapsible_edges(g).is_empty()
}

/// An ordered forest of edges to collapse, by unoriented id in the original
/// graph. The ordering is certified stage by stage inside `collapse`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CollapseForest(pub Vec<usize>);

/// Collapses the forest in order. Returns the collapsed graph and the
/// collapse map; the Euler characteristic is preserved exactly.
pub fn collapse(
    g: &GraphOfGroups,
    forest: &CollapseForest,
) -> Result<(GraphOfGroups, GoGMap), SpineError> {
    let mut current = g.clone();
    let mut map = GoGMap::identity(g);
    // current unoriented index of each original unoriented edge, when alive
    let mut index_of: Vec<Option<usize>> = (0..g.num_edges()).map(Some).collect();
    for (stage, &orig_k) in forest.0.iter().enumerate() {
        let Some(k) = index_of[orig_k] else {
            return Err(SpineError::NotCollapsible {
                edge: orig_k,
                stage: stage + 1,
            });
        };
        let (next, step, removed) = collapse_one(&current, k).ok_or(SpineError::NotCollapsible {
            edge: orig_k,
            stage: stage + 1,
        })?;
        debug_assert_eq!(next.euler_char(), g.euler_char());
        for idx in index_of.iter_mut() {
            *idx = match *idx {
                Some(j) if j == removed => None,
                Some(j) if j > removed => Some(j - 1),
                other => other,
            };
        }
        map = step.compose(&map)?;
        current = next;
    }
    Ok((current, map))
}

/// Collapses a single unoriented edge of `g`, if permitted. Returns the new
/// graph, the collapse map, and the removed unoriented index.
fn collapse_one(g: &GraphOfGroups, k: usize) -> Option<(GraphOfGroups, GoGMap, usize)> {
    let fwd = 2 * k;
    if g.is_loop_edge(fwd) {
        return None;
    }
    // choose a surjective side: collapse absorbs terminus(e) into init(e)
    let e = if g.mono(fwd).image_set().len() == g.vertex_group(g.terminus(fwd)).order() {
        fwd
    } else if g.mono(reverse(fwd)).image_set().len() == g.vertex_group(g.init(fwd)).order() {
        reverse(fwd)
    } else {
        return None;
    };
    let u = g.init(e);
    let w = g.terminus(e);
    // phi: G_w -> G_u through the edge group
    let far = g.mono(e); // onto G_w
    let near = g.mono(reverse(e)); // into G_u
    let phi_table: Vec<Elem> = g
        .vertex_group(w)
        .elements()
        .map(|x| near.apply(far.is_in_image(x).expect("far side is surjective")))
        .collect();
    let phi = GroupHom::new(
        g.vertex_group(w).clone(),
        g.vertex_group(u).clone(),
        phi_table,
    )
    .expect("composite of monomorphisms");

    let vmap = |v: VertexId| -> VertexId {
        if v == w {
            if u > w {
                u - 1
            } else {
                u
            }
        } else if v > w {
            v - 1
        } else {
            v
        }
    };
    let new_groups: Vec<_> = (0..g.num_vertices())
        .filter(|&v| v != w)
        .map(|v| g.vertex_group(v).clone())
        .collect();
    let mut new_graph = GraphOfGroups::new(new_groups);
    let mut new_index: Vec<Option<usize>> = vec![None; g.num_edges()];
    for m in 0..g.num_edges() {
        if m == k {
            continue;
        }
        let fe = 2 * m;
        let (a, b) = (g.init(fe), g.terminus(fe));
        let fix = |hom: &GroupHom, endpoint: VertexId| -> Vec<Elem> {
            if endpoint == w {
                hom.image_table().iter().map(|&x| phi.apply(x)).collect()
            } else {
                hom.image_table().to_vec()
            }
        };
        let head = fix(g.mono(fe), b);
        let tail = fix(g.mono(reverse(fe)), a);
        let id = new_graph
            .add_edge(
                vmap(a),
                vmap(b),
                g.length(fe).clone(),
                g.edge_group(fe).clone(),
                head,
                tail,
            )
            .ok()?;
        new_index[m] = Some(unoriented(id));
    }

    let vertex_image: Vec<VertexId> = (0..g.num_vertices()).map(vmap).collect();
    let vertex_hom: Vec<GroupHom> = (0..g.num_vertices())
        .map(|v| {
            if v == w {
                phi.clone()
            } else {
                FiniteGroup::identity_hom(g.vertex_group(v))
            }
        })
        .collect();
    let forward_images: Vec<EdgePath> = (0..g.num_edges())
        .map(|m| {
            if m == k {
                EdgePath::new(&new_graph, vmap(g.init(2 * m)), vec![0], vec![], false).unwrap()
            } else {
                let nk = new_index[m].unwrap();
                EdgePath::from_edges(&new_graph, new_graph.init(2 * nk), vec![2 * nk], false)
                    .unwrap()
            }
        })
        .collect();
    let map = GoGMap::new(
        g.clone(),
        new_graph.clone(),
        vertex_image,
        vertex_hom,
        forward_images,
    )
    .ok()?;
    Some((new_graph, map, k))
}

/// One element of the collapse poset: a valid collapse set with its result.
#[derive(Clone, Debug)]
pub struct PosetElement {
    pub collapsed: BTreeSet<usize>,
    pub graph: GraphOfGroups,
    pub is_reduced: bool,
}

/// The star of a graph in the spine: every graph reachable by forest
/// collapse, ordered by which original edges were collapsed.
#[derive(Clone, Debug)]
pub struct PosetStar {
    pub elements: Vec<PosetElement>,
    /// Cover relations (i, j): element j collapses exactly one more edge.
    pub relations: Vec<(usize, usize)>,
    /// Maximal chains as sequences of element indices starting at the graph
    /// itself and ending at a reduced collapse.
    pub maximal_chains: Vec<Vec<usize>>,
}

pub fn star_poset(g: &GraphOfGroups) -> Result<PosetStar, SpineError> {
    let mut elements: Vec<PosetElement> = vec![PosetElement {
        collapsed: BTreeSet::new(),
        graph: g.clone(),
        is_reduced: is_reduced(g),
    }];
    let mut index: BTreeMap<BTreeSet<usize>, usize> = BTreeMap::new();
    index.insert(BTreeSet::new(), 0);
    let mut relations = Vec::new();
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let element = elements[i].clone();
        // collapsible edges of the current result, named by original ids
        let mut alive: Vec<usize> = (0..g.num_edges())
            .filter(|k| !element.collapsed.contains(k))
            .collect();
        alive.sort_unstable();
        for &k in &alive {
            let mut order: Vec<usize> = element.collapsed.iter().copied().collect();
            order.push(k);
            let Ok((graph, _)) = collapse(g, &CollapseForest(order)) else {
                continue;
            };
            let mut set = element.collapsed.clone();
            set.insert(k);
            let j = match index.get(&set) {
                Some(&j) => j,
                None => {
                    let j = elements.len();
                    if j > STAR_BUDGET {
                        return Err(SpineError::BudgetExceeded);
                    }
                    let reduced = is_reduced(&graph);
                    elements.push(PosetElement {
                        collapsed: set.clone(),
                        graph,
                        is_reduced: reduced,
                    });
                    index.insert(set, j);
                    queue.push_back(j);
                    j
                }
            };
            relations.push((i, j));
        }
    }
    relations.sort_unstable();
    relations.dedup();
    // maximal chains: root-to-reduced paths in the cover DAG
    let mut maximal_chains = Vec::new();
    let mut stack = vec![vec![0usize]];
    while let Some(chain) = stack.pop() {
        let last = *chain.last().unwrap();
        let next: Vec<usize> = relations
            .iter()
            .filter(|&&(a, _)| a == last)
            .map(|&(_, b)| b)
            .collect();
        if next.is_empty() {
            debug_assert!(elements[last].is_reduced);
            maximal_chains.push(chain);
        } else {
            for b in next {
                let mut c = chain.clone();
                c.push(b);
                stack.push(c);
            }
        }
    }
    maximal_chains.sort();
    Ok(PosetStar {
        elements,
        relations,
        maximal_chains,
    })
}

/// Surviving edges: those avoided by at least one maximal collapse.
/// The graph represents a point of the reduced spine iff every edge survives.
pub fn surviving_edges(g: &GraphOfGroups) -> Result<Vec<usize>, SpineError> {
    let star = star_poset(g)?;
    let maximal: Vec<&PosetElement> = star.elements.iter().filter(|e| e.is_reduced).collect();
    Ok((0..g.num_edges())
        .filter(|k| maximal.iter().any(|m| !m.collapsed.contains(k)))
        .collect())
}

/// A cover with trivial cell groups together with the left action of the
/// quotient group on its sheets.
#[derive(Clone, Debug)]
pub struct DeckAction {
    pub cover: CoverData,
    /// Per group element x: permutation of the cover vertices.
    pub vertex_perm: Vec<Vec<VertexId>>,
    /// Per group element x: permutation of the unoriented cover edges.
    pub edge_perm: Vec<Vec<usize>>,
}

impl DeckAction {
    pub fn group_order(&self) -> usize {
        self.vertex_perm.len()
    }

    /// Orbit of an unoriented cover edge.
    pub fn edge_orbit(&self, k: usize) -> BTreeSet<usize> {
        self.edge_perm.iter().map(|p| p[k]).collect()
    }
}

/// Builds the trivial-subgroup cover and the deck action of Q on it. The
/// kernel must be torsion-free, i.e. every vertex map injective.
pub fn deck_action_cover(quotient: &FiniteQuotient) -> Result<DeckAction, SpineError> {
    for v in 0..quotient.base().num_vertices() {
        let rho = quotient.vertex_rho(v);
        if !rho.is_injective() {
            let elem = quotient
                .base()
                .vertex_group(v)
                .elements()
                .skip(1)
                .find(|&x| rho.apply(x) == 0)
                .expect("non-injective map has a kernel element");
            return Err(SpineError::KernelHasTorsion { vertex: v, elem });
        }
    }
    let p = Subgroup::trivial(quotient.group());
    let cover = build_cover(quotient, &p)?;
    assert!(
        cover.cover.vertex_groups().iter().all(|g| g.is_trivial()),
        "torsion-free kernel yields trivial cover groups"
    );
    let q = quotient.group().clone();
    let base = quotient.base();
    let mut vertex_perm = Vec::with_capacity(q.order());
    let mut edge_perm = Vec::with_capacity(q.order());
    for x in q.elements() {
        let mut vp = vec![0; cover.cover.num_vertices()];
        for v in 0..base.num_vertices() {
            for cv in cover.sheets_over_vertex(v) {
                let label = cover.vertex_label(cv);
                vp[cv] = cover.vertex_sheet_at(v, q.mul(x, label));
            }
        }
        let mut ep = vec![0; cover.cover.num_edges()];
        for e in base.forward_edges() {
            let sheet_map: Vec<(Elem, usize)> = {
                let mut acc = Vec::new();
                for t in q.elements() {
                    acc.push((t, cover.edge_sheet_at(e, t)));
                }
                acc
            };
            for &(t, ck) in &sheet_map {
                let moved = cover.edge_sheet_at(e, q.mul(x, t));
                ep[ck] = moved;
            }
        }
        // action sanity: bijective and incidence-equivariant
        let mut seen = vp.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), vp.len(), "vertex action is a permutation");
        for k in 0..cover.cover.num_edges() {
            let a = cover.cover.init(2 * k);
            let b = cover.cover.terminus(2 * k);
            let (na, nb) = (
                cover.cover.init(2 * ep[k]),
                cover.cover.terminus(2 * ep[k]),
            );
            assert!(
                (vp[a] == na && vp[b] == nb) || (vp[a] == nb && vp[b] == na),
                "edge action commutes with incidence"
            );
        }
        vertex_perm.push(vp);
        edge_perm.push(ep);
    }
    Ok(DeckAction {
        cover,
        vertex_perm,
        edge_perm,
    })
}

/// Maximal invariant forests: maximal unions of edge orbits that are acyclic.
pub fn maximal_invariant_forests(action: &DeckAction) -> Vec<BTreeSet<usize>> {
    let g = &action.cover.cover;
    let mut orbits: Vec<BTreeSet<usize>> = Vec::new();
    let mut seen = BTreeSet::new();
    for k in 0..g.num_edges() {
        if seen.contains(&k) {
            continue;
        }
        let orbit = action.edge_orbit(k);
        seen.extend(orbit.iter().copied());
        orbits.push(orbit);
    }
    let is_forest = |edge_set: &BTreeSet<usize>| -> bool {
        // union-find cycle check over the chosen unoriented edges
        let mut parent: Vec<usize> = (0..g.num_vertices()).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &k in edge_set {
            let a = find(&mut parent, g.init(2 * k));
            let b = find(&mut parent, g.terminus(2 * k));
            if a == b {
                return false;
            }
            parent[a] = b;
        }
        true
    };
    let n = orbits.len();
    let mut forests: Vec<(BTreeSet<usize>, BTreeSet<usize>)> = Vec::new(); // (orbit idx set, edge set)
    for mask in 0..(1usize << n) {
        let idxs: BTreeSet<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let edges: BTreeSet<usize> = idxs.iter().flat_map(|&i| orbits[i].clone()).collect();
        if is_forest(&edges) {
            forests.push((idxs, edges));
        }
    }
    let maximal: Vec<BTreeSet<usize>> = forests
        .iter()
        .filter(|(idxs, _)| {
            !forests
                .iter()
                .any(|(other, _)| other.len() > idxs.len() && other.is_superset(idxs))
        })
        .map(|(_, edges)| edges.clone())
        .collect();
    let mut out = maximal;
    out.sort();
    out.dedup();
    out
}

/// Edge orbits (as cover edge sets) missing from at least one maximal
/// invariant forest.
pub fn essential_edges(action: &DeckAction) -> Vec<BTreeSet<usize>> {
    let g = &action.cover.cover;
    let forests = maximal_invariant_forests(action);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for k in 0..g.num_edges() {
        if seen.contains(&k) {
            continue;
        }
        let orbit = action.edge_orbit(k);
        seen.extend(orbit.iter().copied());
        if forests.iter().any(|f| f.is_disjoint(&orbit)) {
            out.push(orbit);
        }
    }
    out
}

/// Per-edge outcome of the surviving/essential correspondence.
#[derive(Clone, Debug)]
pub struct CorrespondenceReport {
    /// Per base edge: (surviving, fiber orbit essential).
    pub per_edge: Vec<(bool, bool)>,
    pub pass: bool,
    /// Maximal collapse sets, as base edge sets.
    pub max_collapses: Vec<BTreeSet<usize>>,
    /// Maximal invariant forests, pulled back to base edge sets.
    pub max_forests_base: Vec<BTreeSet<usize>>,
    pub chains_match: bool,
}

/// Checks that an edge survives iff its fiber orbit in the deck-action cover
/// is essential, and that maximal collapses biject with maximal invariant
/// forests through the fiber map.
pub fn verify_spine_correspondence(
    quotient: &FiniteQuotient,
) -> Result<CorrespondenceReport, SpineError> {
    let g = quotient.base().clone();
    let action = deck_action_cover(quotient)?;
    let surviving = surviving_edges(&g)?;
    // fibers over base edges are single orbits
    for e in g.forward_edges() {
        let k0 = action.cover.edge_sheet_at(e, 0);
        let orbit = action.edge_orbit(k0);
        let fiber: BTreeSet<usize> = action
            .cover
            .sheets_over_edge(unoriented(e))
            .into_iter()
            .collect();
        assert_eq!(orbit, fiber, "deck action is transitive on each fiber");
    }
    let essential = essential_edges(&action);
    let per_edge: Vec<(bool, bool)> = (0..g.num_edges())
        .map(|k| {
            let fiber: BTreeSet<usize> =
                action.cover.sheets_over_edge(k).into_iter().collect();
            let is_essential = essential.contains(&fiber);
            (surviving.contains(&k), is_essential)
        })
        .collect();
    let pass = per_edge.iter().all(|&(s, e)| s == e);

    let star = star_poset(&g)?;
    let mut max_collapses: Vec<BTreeSet<usize>> = star
        .elements
        .iter()
        .filter(|el| el.is_reduced)
        .map(|el| el.collapsed.clone())
        .collect();
    max_collapses.sort();
    max_collapses.dedup();
    let forests = maximal_invariant_forests(&action);
    // pull each forest back to the base edges it covers
    let mut max_forests_base: Vec<BTreeSet<usize>> = forests
        .iter()
        .map(|f| {
            (0..g.num_edges())
                .filter(|&k| {
                    action
                        .cover
                        .sheets_over_edge(k)
                        .iter()
                        .any(|ck| f.contains(ck))
                })
                .collect()
        })
        .collect();
    max_forests_base.sort();
    max_forests_base.dedup();
    let chains_match = max_collapses == max_forests_base;
    Ok(CorrespondenceReport {
        per_edge,
        pass,
        max_collapses,
        max_forests_base,
        chains_match,
    })
}

/// Translation lengths can only shrink under a collapse; images of
/// hyperbolic loops stay hyperbolic.
pub fn check_collapse_lengths(
    g: &GraphOfGroups,
    map: &GoGMap,
    loops: &[crate::path::ReducedLoop],
) -> Result<bool, SpineError> {
    for l in loops {
        let img = map.map_path(l.path())?;
        let img_len = img.translation_length(map.target())?;
        if img_len > l.length(g) || img_len == Rational::zero() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::lipschitz::enumerate_candidates;

    #[test]
    fn tripod_edges_are_collapsible_spider_and_dihedral_not() {
        assert_eq!(collapsible_edges(&corpus::unit_tripod()), vec![0, 1, 2]);
        assert_eq!(collapsible_edges(&corpus::spider()), Vec::<usize>::new());
        assert_eq!(
            collapsible_edges(&corpus::dihedral_segment()),
            Vec::<usize>::new()
        );
        assert!(is_reduced(&corpus::spider()));
        assert!(!is_reduced(&corpus::unit_tripod()));
    }

    #[test]
    fn loops_are_never_collapsible() {
        assert_eq!(collapsible_edges(&corpus::rose_z2()), Vec::<usize>::new());
        assert!(is_reduced(&corpus::rose_z2()));
    }

    #[test]
    fn collapsing_a_tripod_edge_gives_a_spider() {
        let g = corpus::unit_tripod();
        let (spider, map) = collapse(&g, &CollapseForest(vec![0])).unwrap();
        assert_eq!(spider.num_vertices(), 3);
        assert_eq!(spider.num_edges(), 2);
        assert_eq!(spider.euler_char(), g.euler_char());
        assert!(map.validate().is_valid());
        assert!(map.is_collapsed(0));
        // the merged vertex carries the leaf group
        assert_eq!(spider.vertex_group(0).order(), 2);
    }

    #[test]
    fn second_tripod_edge_fails_at_stage_two() {
        let g = corpus::unit_tripod();
        let err = collapse(&g, &CollapseForest(vec![0, 1])).unwrap_err();
        assert!(matches!(
            err,
            SpineError::NotCollapsible { edge: 1, stage: 2 }
        ));
    }

    #[test]
    fn empty_forest_is_identity() {
        let g = corpus::unit_tripod();
        let (h, map) = collapse(&g, &CollapseForest(vec![])).unwrap();
        assert_eq!(h.num_edges(), g.num_edges());
        assert_eq!(map.lipschitz_constant().unwrap(), Rational::one());
    }

    #[test]
    fn tripod_star_has_four_elements_and_three_chains() {
        let star = star_poset(&corpus::unit_tripod()).unwrap();
        assert_eq!(star.elements.len(), 4);
        assert_eq!(star.maximal_chains.len(), 3);
        assert!(star.maximal_chains.iter().all(|c| c.len() == 2)); // one collapse each
        assert_eq!(star.relations.len(), 3);
    }

    #[test]
    fn reduced_graph_star_is_a_point() {
        let star = star_poset(&corpus::dihedral_segment()).unwrap();
        assert_eq!(star.elements.len(), 1);
        assert_eq!(star.maximal_chains, vec![vec![0]]);
    }

    #[test]
    fn k23_star_enumerates_all_forests() {
        let star = star_poset(&corpus::k23()).unwrap();
        // forests of K_{2,3}: 1 + 6 + 15 + 20 + 12 by size
        assert_eq!(star.elements.len(), 54);
        let maximal = star.elements.iter().filter(|e| e.is_reduced).count();
        assert_eq!(maximal, 12); // spanning trees
        assert!(star
            .elements
            .iter()
            .filter(|e| e.is_reduced)
            .all(|e| e.collapsed.len() == 4));
    }

    #[test]
    fn tripod_edges_all_survive() {
        let g = corpus::unit_tripod();
        assert_eq!(surviving_edges(&g).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn barbell_segment_does_not_survive() {
        let g = corpus::barbell_free();
        // edge 1 is the separating segment
        assert_eq!(surviving_edges(&g).unwrap(), vec![0, 2]);
    }

    #[test]
    fn reduced_graph_edges_survive_vacuously() {
        let g = corpus::spider();
        assert_eq!(surviving_edges(&g).unwrap(), vec![0, 1]);
    }

    #[test]
    fn deck_action_on_tripod_cover() {
        let quotient = crate::cover::tests::tripod_z2_quotient();
        let action = deck_action_cover(&quotient).unwrap();
        assert_eq!(action.cover.index, 2);
        // nontrivial element swaps the two center sheets
        let swap = &action.vertex_perm[1];
        let centers = action.cover.sheets_over_vertex(0);
        assert_eq!(swap[centers[0]], centers[1]);
        assert_eq!(swap[centers[1]], centers[0]);
        // every edge orbit has two cover edges
        for k in 0..3 {
            let e0 = action.cover.edge_sheet_at(2 * k, 0);
            assert_eq!(action.edge_orbit(e0).len(), 2);
        }
    }

    #[test]
    fn deck_action_rejects_torsion_kernel() {
        // rose with Z/2, rho killing the vertex group
        let g = corpus::rose_z2();
        let z2 = FiniteGroup::cyclic(2).unwrap();
        let rho_v = GroupHom::new(g.vertex_group(0).clone(), z2.clone(), vec![0, 0]).unwrap();
        let quotient = FiniteQuotient::new(g, z2, vec![], vec![rho_v], vec![1]).unwrap();
        assert!(matches!(
            deck_action_cover(&quotient),
            Err(SpineError::KernelHasTorsion { vertex: 0, elem: 1 })
        ));
    }

    #[test]
    fn tripod_invariant_forests_are_single_orbits() {
        let quotient = crate::cover::tests::tripod_z2_quotient();
        let action = deck_action_cover(&quotient).unwrap();
        let forests = maximal_invariant_forests(&action);
        // each single orbit is a maximal invariant forest; two orbits
        // together contain a 4-cycle
        assert_eq!(forests.len(), 3);
        assert!(forests.iter().all(|f| f.len() == 2));
        let essential = essential_edges(&action);
        assert_eq!(essential.len(), 3);
    }

    #[test]
    fn correspondence_on_tripod() {
        let quotient = crate::cover::tests::tripod_z2_quotient();
        let report = verify_spine_correspondence(&quotient).unwrap();
        assert!(report.pass);
        assert!(report.chains_match);
        assert!(report.per_edge.iter().all(|&(s, e)| s && e));
    }

    #[test]
    fn correspondence_on_barbell() {
        // trivial quotient: cover = base, trivial action
        let g = corpus::barbell_free();
        let triv = FiniteGroup::trivial();
        let homs = (0..2)
            .map(|v| GroupHom::new(g.vertex_group(v).clone(), triv.clone(), vec![0]).unwrap())
            .collect();
        let quotient = FiniteQuotient::new(g, triv, vec![1], homs, vec![0, 0, 0]).unwrap();
        let report = verify_spine_correspondence(&quotient).unwrap();
        assert!(report.pass);
        // segment fails on both sides
        assert_eq!(report.per_edge[1], (false, false));
        assert_eq!(report.per_edge[0], (true, true));
        assert_eq!(report.per_edge[2], (true, true));
        assert!(report.chains_match);
    }

    #[test]
    fn correspondence_on_rose_with_torsion() {
        // rose with Z/2 and the loop mapping to the nontrivial element
        let g = corpus::rose_z2();
        let z2 = FiniteGroup::cyclic(2).unwrap();
        let rho_v = GroupHom::new(g.vertex_group(0).clone(), z2.clone(), vec![0, 1]).unwrap();
        let quotient = FiniteQuotient::new(g, z2, vec![], vec![rho_v], vec![1]).unwrap();
        let report = verify_spine_correspondence(&quotient).unwrap();
        assert!(report.pass);
        assert_eq!(report.per_edge, vec![(true, true)]);
    }

    #[test]
    fn collapse_preserves_hyperbolicity_and_shrinks_lengths() {
        let g = corpus::unit_tripod();
        let (_, map) = collapse(&g, &CollapseForest(vec![0])).unwrap();
        let loops: Vec<_> = enumerate_candidates(&g)
            .unwrap()
            .into_iter()
            .map(|c| c.loop_)
            .collect();
        assert!(check_collapse_lengths(&g, &map, &loops).unwrap());
    }
}
