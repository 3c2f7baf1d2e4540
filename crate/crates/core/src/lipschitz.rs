//! Stretch factors and the asymmetric Lipschitz distance via the finite
//! candidate set, plus an exhaustive brute-force oracle over bounded loops.
//!
//! A candidate is a cyclically reduced loop whose underlying edge picture is
//! one of five shapes: an embedded simple loop, a figure-eight, a barbell,
//! or a singly or doubly degenerate barbell where a lobe degenerates to a
//! nontrivial vertex-group element at a non-free vertex. The stretch factor
//! between two marked graphs is the maximum of the image/source translation
//! length ratio over candidates of the source.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingroup::Elem;
use crate::gog::{reverse, unoriented, EdgeId, GogError, GraphOfGroups, VertexId};
use crate::morphism::{GoGMap, MorphError};
use crate::path::{EdgePath, ReducedLoop};
use crate::ratio::Rational;

/// Node budget for the exhaustive loop search.
pub const DEFAULT_BRUTE_BUDGET: usize = 5_000_000;

/// Default edge bound for the brute-force oracle.
pub const DEFAULT_BRUTE_EDGES: usize = 8;

#[derive(Debug, Error)]
pub enum LipError {
    #[error("graph has no hyperbolic elements")]
    NoHyperbolics,
    #[error("volume is not 1 on the {0} side (pass --normalize to rescale)")]
    NotVolumeOne(&'static str),
    #[error("search budget exceeded after {0} nodes")]
    BudgetExceeded(usize),
    #[error(transparent)]
    Morph(#[from] MorphError),
    #[error(transparent)]
    Gog(#[from] GogError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    SimpleLoop,
    FigureEight,
    Barbell,
    SinglyDegenerate,
    DoublyDegenerate,
}

/// A shape-tagged cyclically reduced loop in canonical form.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub shape: Shape,
    pub loop_: ReducedLoop,
    pub key: Vec<(EdgeId, Elem)>,
}

/// All embedded cycles (simple closed edge sequences), each once up to
/// rotation and inversion, as chained directed edge sequences.
fn embedded_cycles(g: &GraphOfGroups) -> Vec<Vec<EdgeId>> {
    let mut seen: BTreeSet<Vec<EdgeId>> = BTreeSet::new();
    let mut out = Vec::new();
    for start in 0..g.num_vertices() {
        let mut stack_edges: Vec<EdgeId> = Vec::new();
        let mut visited: Vec<VertexId> = vec![start];
        dfs_cycles(g, start, start, &mut stack_edges, &mut visited, &mut seen, &mut out);
    }
    out
}

fn cycle_key(cycle: &[EdgeId]) -> Vec<EdgeId> {
    let k = cycle.len();
    let mut best: Option<Vec<EdgeId>> = None;
    let inv: Vec<EdgeId> = cycle.iter().rev().map(|&e| reverse(e)).collect();
    for word in [cycle.to_vec(), inv] {
        for r in 0..k {
            let rot: Vec<EdgeId> = (0..k).map(|i| word[(r + i) % k]).collect();
            if best.as_ref().map_or(true, |b| rot < *b) {
                best = Some(rot);
            }
        }
    }
    best.unwrap()
}

fn dfs_cycles(
    g: &GraphOfGroups,
    start: VertexId,
    cur: VertexId,
    stack_edges: &mut Vec<EdgeId>,
    visited: &mut Vec<VertexId>,
    seen: &mut BTreeSet<Vec<EdgeId>>,
    out: &mut Vec<Vec<EdgeId>>,
) {
    for e in g.edges_at(cur) {
        if stack_edges
            .iter()
            .any(|&f| unoriented(f) == unoriented(e))
        {
            continue;
        }
        let w = g.terminus(e);
        if w == start {
            let mut cycle = stack_edges.clone();
            cycle.push(e);
            if seen.insert(cycle_key(&cycle)) {
                out.push(cycle);
            }
            continue;
        }
        if visited.contains(&w) || w < start {
            // keep the least vertex of every cycle as its start for dedup
            continue;
        }
        stack_edges.push(e);
        visited.push(w);
        dfs_cycles(g, start, w, stack_edges, visited, seen, out);
        visited.pop();
        stack_edges.pop();
    }
}

/// Embedded simple paths from `from` to `to` whose interior vertices avoid
/// `forbidden` and whose edges avoid `forbidden_edges` (unoriented ids).
/// Endpoints may lie in `forbidden`. Paths are nonempty.
fn embedded_segments(
    g: &GraphOfGroups,
    from: VertexId,
    to: VertexId,
    forbidden: &BTreeSet<VertexId>,
    forbidden_edges: &BTreeSet<usize>,
) -> Vec<Vec<EdgeId>> {
    let mut out = Vec::new();
    let mut edges = Vec::new();
    let mut interior = BTreeSet::new();
    segment_dfs(
        g, from, to, from, forbidden, forbidden_edges, &mut edges, &mut interior, &mut out,
    );
    out
}

#[allow(clippy::too_many_arguments)]
fn segment_dfs(
    g: &GraphOfGroups,
    from: VertexId,
    to: VertexId,
    cur: VertexId,
    forbidden: &BTreeSet<VertexId>,
    forbidden_edges: &BTreeSet<usize>,
    edges: &mut Vec<EdgeId>,
    interior: &mut BTreeSet<VertexId>,
    out: &mut Vec<Vec<EdgeId>>,
) {
    for e in g.edges_at(cur) {
        if forbidden_edges.contains(&unoriented(e))
            || edges.iter().any(|&f| unoriented(f) == unoriented(e))
        {
            continue;
        }
        let w = g.terminus(e);
        if w == to {
            let mut seg = edges.clone();
            seg.push(e);
            out.push(seg);
            continue;
        }
        if w == from || forbidden.contains(&w) || interior.contains(&w) {
            continue;
        }
        edges.push(e);
        interior.insert(w);
        segment_dfs(g, from, to, w, forbidden, forbidden_edges, edges, interior, out);
        interior.remove(&w);
        edges.pop();
    }
}

fn vertices_of(g: &GraphOfGroups, edges: &[EdgeId]) -> BTreeSet<VertexId> {
    let mut s: BTreeSet<VertexId> = edges.iter().map(|&e| g.init(e)).collect();
    s.extend(edges.iter().map(|&e| g.terminus(e)));
    s
}

fn unoriented_set(edges: &[EdgeId]) -> BTreeSet<usize> {
    edges.iter().map(|&e| unoriented(e)).collect()
}

fn rotate_cycle_to(g: &GraphOfGroups, cycle: &[EdgeId], v: VertexId) -> Vec<EdgeId> {
    let k = cycle.len();
    let r = (0..k)
        .find(|&i| g.init(cycle[i]) == v)
        .expect("vertex lies on the cycle");
    (0..k).map(|i| cycle[(r + i) % k]).collect()
}

fn invert_cycle(cycle: &[EdgeId]) -> Vec<EdgeId> {
    cycle.iter().rev().map(|&e| reverse(e)).collect()
}

/// All decoration assignments of a cyclic edge sequence, filtered to the
/// cyclically reduced ones.
fn decorated_loops(g: &GraphOfGroups, edges: &[EdgeId]) -> Vec<EdgePath> {
    let orders: Vec<usize> = edges
        .iter()
        .map(|&e| g.vertex_group(g.terminus(e)).order())
        .collect();
    let mut out = Vec::new();
    let mut counter = vec![0usize; edges.len()];
    loop {
        let word: Vec<(EdgeId, Elem)> = edges
            .iter()
            .zip(counter.iter())
            .map(|(&e, &d)| (e, d))
            .collect();
        if let Ok(p) = EdgePath::from_cyclic_word(g, &word) {
            if p.is_cyclically_reduced(g) {
                out.push(p);
            }
        }
        let mut i = 0;
        loop {
            if i == counter.len() {
                return out;
            }
            counter[i] += 1;
            if counter[i] < orders[i] {
                break;
            }
            counter[i] = 0;
            i += 1;
        }
    }
}

/// Enumerates the finite candidate set of a graph: all decorated loops over
/// the five underlying shapes, deduplicated by canonical form.
pub fn enumerate_candidates(g: &GraphOfGroups) -> Result<Vec<Candidate>, LipError> {
    let cycles = embedded_cycles(g);
    let nonfree = g.nonfree_vertices();
    let mut shapes: Vec<(Shape, Vec<EdgeId>)> = Vec::new();

    for c in &cycles {
        shapes.push((Shape::SimpleLoop, c.clone()));
    }

    for i in 0..cycles.len() {
        for j in (i + 1)..cycles.len() {
            if !unoriented_set(&cycles[i]).is_disjoint(&unoriented_set(&cycles[j])) {
                continue;
            }
            let vi = vertices_of(g, &cycles[i]);
            let vj = vertices_of(g, &cycles[j]);
            let shared: Vec<VertexId> = vi.intersection(&vj).copied().collect();
            // figure-eight: exactly one shared vertex, empty segment
            if shared.len() == 1 {
                let v = shared[0];
                for a in [cycles[i].clone(), invert_cycle(&cycles[i])] {
                    for b in [cycles[j].clone(), invert_cycle(&cycles[j])] {
                        let mut word = rotate_cycle_to(g, &a, v);
                        word.extend(rotate_cycle_to(g, &b, v));
                        shapes.push((Shape::FigureEight, word));
                    }
                }
            }
            // barbell: vertex-disjoint cycles joined by an embedded segment
            if shared.is_empty() {
                let all_cycle_vertices: BTreeSet<VertexId> = vi.union(&vj).copied().collect();
                let mut blocked = unoriented_set(&cycles[i]);
                blocked.extend(unoriented_set(&cycles[j]));
                for &x in &vi {
                    for &y in &vj {
                        let mut off_limits = all_cycle_vertices.clone();
                        off_limits.remove(&x);
                        off_limits.remove(&y);
                        for seg in embedded_segments(g, x, y, &off_limits, &blocked) {
                            for a in [cycles[i].clone(), invert_cycle(&cycles[i])] {
                                for b in [cycles[j].clone(), invert_cycle(&cycles[j])] {
                                    let mut word = rotate_cycle_to(g, &a, x);
                                    word.extend(seg.iter().copied());
                                    word.extend(rotate_cycle_to(g, &b, y));
                                    word.extend(seg.iter().rev().map(|&e| reverse(e)));
                                    shapes.push((Shape::Barbell, word));
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    // singly degenerate: a cycle and a non-free vertex off it, joined by a
    // segment internally avoiding the cycle
    for c in &cycles {
        let cv = vertices_of(g, c);
        let blocked = unoriented_set(c);
        for &w in &nonfree {
            if cv.contains(&w) {
                continue; // empty-segment case is a decorated simple loop
            }
            for &x in &cv {
                let mut off_limits = cv.clone();
                off_limits.insert(w);
                off_limits.remove(&x);
                for seg in embedded_segments(g, x, w, &off_limits, &blocked) {
                    for a in [c.clone(), invert_cycle(c)] {
                        let mut word = rotate_cycle_to(g, &a, x);
                        word.extend(seg.iter().copied());
                        word.extend(seg.iter().rev().map(|&e| reverse(e)));
                        shapes.push((Shape::SinglyDegenerate, word));
                    }
                }
            }
        }
    }

    // doubly degenerate: two distinct non-free vertices joined by a segment
    for (i, &v) in nonfree.iter().enumerate() {
        for &w in nonfree.iter().skip(i + 1) {
            let off_limits: BTreeSet<VertexId> = [v, w].into_iter().collect();
            for seg in embedded_segments(g, v, w, &off_limits, &BTreeSet::new()) {
                let mut word = seg.clone();
                word.extend(seg.iter().rev().map(|&e| reverse(e)));
                shapes.push((Shape::DoublyDegenerate, word));
            }
        }
    }

    let mut by_key: BTreeMap<Vec<(EdgeId, Elem)>, Candidate> = BTreeMap::new();
    for (shape, word) in shapes {
        for p in decorated_loops(g, &word) {
            let key = p.canonical_key(g);
            by_key.entry(key.clone()).or_insert_with(|| {
                let canon = p.canonical_form(g);
                Candidate {
                    shape,
                    loop_: ReducedLoop::assert_reduced(g, canon)
                        .expect("canonical form of a cyclically reduced loop"),
                    key,
                }
            });
        }
    }
    let out: Vec<Candidate> = by_key.into_values().collect();
    if out.is_empty() {
        return Err(LipError::NoHyperbolics);
    }
    Ok(out)
}

/// Ratio of image translation length to source translation length.
pub fn stretch_ratio(f: &GoGMap, loop_: &ReducedLoop) -> Result<Rational, LipError> {
    let den = loop_.length(f.source());
    let image = f.map_path(loop_.path())?;
    let num = image.translation_length(f.target())?;
    Ok(&num / &den)
}

/// Maximal candidate stretch ratio and the lexicographically least witness.
pub fn stretch_factor(f: &GoGMap) -> Result<(Rational, Candidate), LipError> {
    let candidates = enumerate_candidates(f.source())?;
    let mut best: Option<(Rational, Candidate)> = None;
    for c in candidates {
        let ratio = stretch_ratio(f, &c.loop_)?;
        match &best {
            Some((r, _)) if *r >= ratio => {}
            _ => best = Some((ratio, c)),
        }
    }
    Ok(best.expect("candidate set is nonempty"))
}

/// Distance report: the exact stretch factor, its displayed logarithm, the
/// witness, and an optional brute-force cross-check.
#[derive(Clone, Debug)]
pub struct DistanceReport {
    pub lambda: Rational,
    pub log_lambda: f64,
    pub witness: Candidate,
    pub brute: Option<BruteReport>,
    pub normalized: bool,
}

#[derive(Clone, Debug)]
pub struct BruteReport {
    pub max_edges: usize,
    pub lambda_k: Rational,
    pub agrees: bool,
}

/// The Lipschitz distance between volume-1 marked graphs. When `normalize`
/// is set both sides are rescaled to volume 1 first; otherwise non-unit
/// volume is an error.
pub fn distance(f: &GoGMap, normalize: bool) -> Result<DistanceReport, LipError> {
    let (map, normalized);
    if normalize {
        map = rescale_map(
            f,
            &f.source().volume().recip(),
            &f.target().volume().recip(),
        )?;
        normalized = true;
    } else {
        if !f.source().volume().is_one() {
            return Err(LipError::NotVolumeOne("source"));
        }
        if !f.target().volume().is_one() {
            return Err(LipError::NotVolumeOne("target"));
        }
        map = f.clone();
        normalized = false;
    }
    let (lambda, witness) = stretch_factor(&map)?;
    Ok(DistanceReport {
        log_lambda: lambda.log_f64(),
        lambda,
        witness,
        brute: None,
        normalized,
    })
}

/// Rebuilds a map between rescaled copies of its source and target.
pub fn rescale_map(
    f: &GoGMap,
    source_factor: &Rational,
    target_factor: &Rational,
) -> Result<GoGMap, LipError> {
    let source = f.source().scale(source_factor)?;
    let target = f.target().scale(target_factor)?;
    let vertex_image = (0..source.num_vertices()).map(|v| f.vertex_image(v)).collect();
    let vertex_hom = (0..source.num_vertices())
        .map(|v| f.vertex_hom(v).clone())
        .collect();
    let forward = source
        .forward_edges()
        .map(|e| {
            let p = f.edge_image(e);
            EdgePath::new(
                &target,
                p.base(),
                p.elems().to_vec(),
                p.edges().to_vec(),
                p.is_loop(),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GoGMap::new(source, target, vertex_image, vertex_hom, forward)?)
}

/// Exhaustive maximum of the stretch ratio over all cyclically reduced
/// decorated loops with at most `max_edges` edges. Independent of the
/// candidate machinery; used as the oracle for it.
pub fn brute_force_stretch(
    f: &GoGMap,
    max_edges: usize,
    node_budget: usize,
) -> Result<(Rational, EdgePath), LipError> {
    let g = f.source().clone();
    let mut seen: BTreeSet<Vec<(EdgeId, Elem)>> = BTreeSet::new();
    let mut best: Option<(Rational, Vec<(EdgeId, Elem)>, EdgePath)> = None;
    let mut nodes = 0usize;
    for base in 0..g.num_vertices() {
        let mut edges: Vec<EdgeId> = Vec::new();
        let mut decorations: Vec<Elem> = Vec::new();
        brute_dfs(
            f,
            &g,
            base,
            max_edges,
            node_budget,
            &mut nodes,
            &mut edges,
            &mut decorations,
            &mut seen,
            &mut best,
        )?;
    }
    match best {
        Some((ratio, _, arg)) => Ok((ratio, arg)),
        None => Err(LipError::NoHyperbolics),
    }
}

#[allow(clippy::too_many_arguments)]
fn brute_dfs(
    f: &GoGMap,
    g: &GraphOfGroups,
    base: VertexId,
    max_edges: usize,
    node_budget: usize,
    nodes: &mut usize,
    edges: &mut Vec<EdgeId>,
    decorations: &mut Vec<Elem>, // between consecutive edges; len = edges.len()-1
    seen: &mut BTreeSet<Vec<(EdgeId, Elem)>>,
    best: &mut Option<(Rational, Vec<(EdgeId, Elem)>, EdgePath)>,
) -> Result<(), LipError> {
    *nodes += 1;
    if *nodes > node_budget {
        return Err(LipError::BudgetExceeded(*nodes));
    }
    let cur = if edges.is_empty() {
        base
    } else {
        g.terminus(*edges.last().unwrap())
    };
    if !edges.is_empty() && cur == base {
        // close the loop with every final decoration
        let last = *edges.last().unwrap();
        let first = edges[0];
        for gk in g.vertex_group(base).elements() {
            if first == reverse(last) && g.mono(last).is_in_image(gk).is_some() {
                continue; // wrap turn reducible
            }
            let mut elems = vec![0];
            elems.extend_from_slice(decorations);
            elems.push(gk);
            let p = EdgePath::new(g, base, elems, edges.clone(), true)
                .expect("constructed loop is consistent");
            debug_assert!(p.is_cyclically_reduced(g));
            let key = p.canonical_key(g);
            if !seen.insert(key.clone()) {
                continue;
            }
            let ratio = stretch_ratio(f, &ReducedLoop::assert_reduced(g, p.clone()).unwrap())?;
            let better = match best {
                None => true,
                Some((r, k, _)) => ratio > *r || (ratio == *r && key < *k),
            };
            if better {
                *best = Some((ratio, key, p));
            }
        }
    }
    if edges.len() == max_edges {
        return Ok(());
    }
    if edges.is_empty() {
        for e in g.edges_at(base) {
            edges.push(e);
            brute_dfs(
                f, g, base, max_edges, node_budget, nodes, edges, decorations, seen, best,
            )?;
            edges.pop();
        }
    } else {
        let last = *edges.last().unwrap();
        for d in g.vertex_group(cur).elements() {
            for e in g.edges_at(cur) {
                if e == reverse(last) && g.mono(last).is_in_image(d).is_some() {
                    continue; // immediate backtrack
                }
                edges.push(e);
                decorations.push(d);
                brute_dfs(
                    f, g, base, max_edges, node_budget, nodes, edges, decorations, seen, best,
                )?;
                decorations.pop();
                edges.pop();
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn dihedral_has_exactly_one_candidate() {
        let g = corpus::dihedral_segment();
        let cands = enumerate_candidates(&g).unwrap();
        assert_eq!(cands.len(), 1);
        assert_eq!(cands[0].shape, Shape::DoublyDegenerate);
        assert_eq!(cands[0].loop_.path().num_edges(), 2);
    }

    #[test]
    fn tripod_has_three_doubly_degenerate_barbells() {
        let g = corpus::unit_tripod();
        let cands = enumerate_candidates(&g).unwrap();
        assert_eq!(cands.len(), 3);
        assert!(cands.iter().all(|c| c.shape == Shape::DoublyDegenerate));
        assert!(cands.iter().all(|c| c.loop_.path().num_edges() == 4));
    }

    #[test]
    fn k23_has_three_simple_loops() {
        let g = corpus::k23();
        let cands = enumerate_candidates(&g).unwrap();
        assert_eq!(cands.len(), 3);
        assert!(cands.iter().all(|c| c.shape == Shape::SimpleLoop));
        assert!(cands.iter().all(|c| c.loop_.path().num_edges() == 4));
    }

    #[test]
    fn no_hyperbolics_on_elementary_input() {
        // segment with whole-group edge inclusions: every loop is elliptic
        let z2 = crate::fingroup::FiniteGroup::cyclic(2).unwrap();
        let mut g = GraphOfGroups::new(vec![z2.clone(), z2.clone()]);
        g.add_edge(0, 1, Rational::one(), z2, vec![0, 1], vec![0, 1])
            .unwrap();
        assert!(matches!(
            enumerate_candidates(&g),
            Err(LipError::NoHyperbolics)
        ));
    }

    #[test]
    fn tripod_pair_stretch_is_9_8() {
        let f = corpus::tripod_pair();
        let (lambda, witness) = stretch_factor(&f).unwrap();
        assert_eq!(lambda, Rational::new(9, 8));
        // witness is the leaf(1,2) barbell: it traverses edges 1 and 2 only
        let used: BTreeSet<usize> = witness
            .loop_
            .path()
            .edges()
            .iter()
            .map(|&e| unoriented(e))
            .collect();
        assert_eq!(used, BTreeSet::from([0, 1]));
    }

    #[test]
    fn caterpillar_tripod_asymmetry() {
        let f = corpus::caterpillar_to_tripod();
        assert_eq!(stretch_factor(&f).unwrap().0, Rational::new(4, 3));
        let r = corpus::tripod_to_caterpillar();
        assert_eq!(stretch_factor(&r).unwrap().0, Rational::new(3, 2));
    }

    #[test]
    fn identity_distance_is_zero() {
        let g = corpus::unit_tripod();
        let id = GoGMap::identity(&g);
        let report = distance(&id, false).unwrap();
        assert_eq!(report.lambda, Rational::one());
        assert_eq!(report.log_lambda, 0.0);
    }

    #[test]
    fn distance_requires_unit_volume() {
        let a = corpus::tripod(&[Rational::one(), Rational::one(), Rational::one()]);
        let b = corpus::unit_tripod();
        let f = GoGMap::identity_marking(&a, &b).unwrap();
        assert!(matches!(
            distance(&f, false),
            Err(LipError::NotVolumeOne("source"))
        ));
        let report = distance(&f, true).unwrap();
        assert_eq!(report.lambda, Rational::one());
    }

    #[test]
    fn brute_force_agrees_on_tripod_pair() {
        let f = corpus::tripod_pair();
        let (lk, _) = brute_force_stretch(&f, 8, DEFAULT_BRUTE_BUDGET).unwrap();
        assert_eq!(lk, Rational::new(9, 8));
    }

    #[test]
    fn brute_force_short_witness_on_caterpillar() {
        let f = corpus::caterpillar_to_tripod();
        let (lk, arg) = brute_force_stretch(&f, 2, DEFAULT_BRUTE_BUDGET).unwrap();
        assert_eq!(lk, Rational::new(4, 3));
        assert_eq!(arg.num_edges(), 2);
    }

    #[test]
    fn brute_force_on_single_point_space() {
        let g = corpus::dihedral_segment();
        let id = GoGMap::identity(&g);
        let (lk, _) = brute_force_stretch(&id, 4, DEFAULT_BRUTE_BUDGET).unwrap();
        assert_eq!(lk, Rational::one());
    }

    #[test]
    fn budget_error_is_typed() {
        let f = corpus::tripod_pair();
        assert!(matches!(
            brute_force_stretch(&f, 8, 3),
            Err(LipError::BudgetExceeded(_))
        ));
    }

    #[test]
    fn scale_equivariance_of_lambda() {
        let f = corpus::tripod_pair();
        let doubled = rescale_map(&f, &Rational::one(), &Rational::int(2)).unwrap();
        let (lambda, _) = stretch_factor(&doubled).unwrap();
        assert_eq!(lambda, Rational::new(9, 4));
    }

    #[test]
    fn rose_candidates_cover_decorations() {
        let g = corpus::rose_z2();
        let cands = enumerate_candidates(&g).unwrap();
        // the loop edge with trivial and with nontrivial vertex decoration
        assert_eq!(cands.len(), 2);
        assert!(cands.iter().all(|c| c.shape == Shape::SimpleLoop));
    }
}
