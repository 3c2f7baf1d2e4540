//! Exhaustive search for marked isometries between graphs of groups.
//!
//! A cell isometry is a length-preserving cell bijection with compatible
//! group isomorphisms; it realizes the same marking as a given map `f` when
//! some single inner twist aligns the two on a generating set. Used to check
//! that stretch factor 1 occurs exactly for equivariantly isometric pairs.

use std::collections::BTreeSet;

use crate::fingroup::{Elem, GroupHom, GroupRef};
use crate::gog::{reverse, EdgeId, GraphOfGroups, VertexId};
use crate::morphism::GoGMap;
use crate::path::EdgePath;

/// All isomorphisms between two finite groups, as image tables.
pub fn group_isos(a: &GroupRef, b: &GroupRef) -> Vec<Vec<Elem>> {
    if a.order() != b.order() {
        return Vec::new();
    }
    let n = a.order();
    let mut out = Vec::new();
    let mut img: Vec<Option<Elem>> = vec![None; n];
    img[0] = Some(0);
    let mut used = vec![false; n];
    used[0] = true;
    iso_dfs(a, b, 1, &mut img, &mut used, &mut out);
    out
}

fn iso_dfs(
    a: &GroupRef,
    b: &GroupRef,
    pos: usize,
    img: &mut Vec<Option<Elem>>,
    used: &mut Vec<bool>,
    out: &mut Vec<Vec<Elem>>,
) {
    let n = a.order();
    if pos == n {
        out.push(img.iter().map(|x| x.unwrap()).collect());
        return;
    }
    'cand: for t in 0..n {
        if used[t] {
            continue;
        }
        img[pos] = Some(t);
        used[t] = true;
        for x in 0..=pos {
            for y in 0..=pos {
                let p = a.mul(x, y);
                if p <= pos || img[p].is_some() {
                    if let (Some(ix), Some(iy), Some(ip)) = (img[x], img[y], img[p]) {
                        if b.mul(ix, iy) != ip {
                            img[pos] = None;
                            used[t] = false;
                            continue 'cand;
                        }
                    }
                }
            }
        }
        iso_dfs(a, b, pos + 1, img, used, out);
        img[pos] = None;
        used[t] = false;
    }
}

/// All cell isometries between two graphs of groups, as validated maps with
/// single-edge images.
pub fn cell_isometries(a: &GraphOfGroups, b: &GraphOfGroups) -> Vec<GoGMap> {
    let mut out = Vec::new();
    if a.num_vertices() != b.num_vertices() || a.num_edges() != b.num_edges() {
        return out;
    }
    let n = a.num_vertices();
    let mut sigma: Vec<Option<VertexId>> = vec![None; n];
    let mut used = vec![false; n];
    vertex_dfs(a, b, 0, &mut sigma, &mut used, &mut out);
    out
}

fn vertex_dfs(
    a: &GraphOfGroups,
    b: &GraphOfGroups,
    v: usize,
    sigma: &mut Vec<Option<VertexId>>,
    used: &mut Vec<bool>,
    out: &mut Vec<GoGMap>,
) {
    let n = a.num_vertices();
    if v == n {
        let sigma: Vec<VertexId> = sigma.iter().map(|x| x.unwrap()).collect();
        extend_to_isometries(a, b, &sigma, out);
        return;
    }
    for w in 0..n {
        if used[w] || a.vertex_group(v).order() != b.vertex_group(w).order() {
            continue;
        }
        sigma[v] = Some(w);
        used[w] = true;
        vertex_dfs(a, b, v + 1, sigma, used, out);
        sigma[v] = None;
        used[w] = false;
    }
}

fn extend_to_isometries(
    a: &GraphOfGroups,
    b: &GraphOfGroups,
    sigma: &[VertexId],
    out: &mut Vec<GoGMap>,
) {
    // vertex-group isomorphism choices per vertex
    let iso_choices: Vec<Vec<Vec<Elem>>> = (0..a.num_vertices())
        .map(|v| group_isos(a.vertex_group(v), b.vertex_group(sigma[v])))
        .collect();
    if iso_choices.iter().any(|c| c.is_empty()) {
        return;
    }
    let mut pick = vec![0usize; a.num_vertices()];
    loop {
        let homs: Vec<GroupHom> = (0..a.num_vertices())
            .map(|v| {
                GroupHom::new(
                    a.vertex_group(v).clone(),
                    b.vertex_group(sigma[v]).clone(),
                    iso_choices[v][pick[v]].clone(),
                )
                .unwrap()
            })
            .collect();
        let mut assignment: Vec<Option<EdgeId>> = vec![None; a.num_edges()];
        let mut taken: BTreeSet<usize> = BTreeSet::new();
        edge_dfs(a, b, sigma, &homs, 0, &mut assignment, &mut taken, out);
        // odometer over iso choices
        let mut i = 0;
        loop {
            if i == pick.len() {
                return;
            }
            pick[i] += 1;
            if pick[i] < iso_choices[i].len() {
                break;
            }
            pick[i] = 0;
            i += 1;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn edge_dfs(
    a: &GraphOfGroups,
    b: &GraphOfGroups,
    sigma: &[VertexId],
    homs: &[GroupHom],
    k: usize,
    assignment: &mut Vec<Option<EdgeId>>,
    taken: &mut BTreeSet<usize>,
    out: &mut Vec<GoGMap>,
) {
    if k == a.num_edges() {
        let forward = (0..a.num_edges())
            .map(|i| {
                let e = assignment[i].unwrap();
                EdgePath::from_edges(b, b.init(e), vec![e], false).unwrap()
            })
            .collect();
        if let Ok(map) = GoGMap::new(
            a.clone(),
            b.clone(),
            sigma.to_vec(),
            homs.to_vec(),
            forward,
        ) {
            out.push(map);
        }
        return;
    }
    let e = 2 * k;
    for cand in b.directed_edges() {
        if taken.contains(&crate::gog::unoriented(cand)) {
            continue;
        }
        if b.init(cand) != sigma[a.init(e)]
            || b.terminus(cand) != sigma[a.terminus(e)]
            || b.length(cand) != a.length(e)
            || b.edge_group(cand).order() != a.edge_group(e).order()
        {
            continue;
        }
        // edge-group compatibility on both sides
        let head_img: BTreeSet<Elem> = a
            .mono(e)
            .image_table()
            .iter()
            .map(|&x| homs[a.terminus(e)].apply(x))
            .collect();
        let head_tgt: BTreeSet<Elem> = b.mono(cand).image_set().into_iter().collect();
        if head_img != head_tgt {
            continue;
        }
        // induced edge-group map, checked against the tail side
        let induced: Option<Vec<Elem>> = a
            .edge_group(e)
            .elements()
            .map(|c| {
                b.mono(cand)
                    .is_in_image(homs[a.terminus(e)].apply(a.mono(e).apply(c)))
            })
            .collect();
        let Some(induced) = induced else { continue };
        let tail_ok = a.edge_group(e).elements().all(|c| {
            homs[a.init(e)].apply(a.mono(reverse(e)).apply(c))
                == b.mono(reverse(cand)).apply(induced[c])
        });
        if !tail_ok {
            continue;
        }
        assignment[k] = Some(cand);
        taken.insert(crate::gog::unoriented(cand));
        edge_dfs(a, b, sigma, homs, k + 1, assignment, taken, out);
        assignment[k] = None;
        taken.remove(&crate::gog::unoriented(cand));
    }
}

/// Canonical key of the conjugacy class of an elliptic element `(v, g)`:
/// closure under vertex-group conjugation and transport through edges.
pub fn elliptic_class_key(g: &GraphOfGroups, v: VertexId, elem: Elem) -> (VertexId, Elem) {
    let mut seen: BTreeSet<(VertexId, Elem)> = BTreeSet::new();
    let mut queue = std::collections::VecDeque::from([(v, elem)]);
    while let Some((u, x)) = queue.pop_front() {
        if !seen.insert((u, x)) {
            continue;
        }
        let group = g.vertex_group(u);
        for h in group.elements() {
            let y = group.conj(h, x);
            if !seen.contains(&(u, y)) {
                queue.push_back((u, y));
            }
        }
        for e in g.edges_at(u) {
            if let Some(c) = g.mono(reverse(e)).is_in_image(x) {
                let far = (g.terminus(e), g.mono(e).apply(c));
                if !seen.contains(&far) {
                    queue.push_back(far);
                }
            }
        }
    }
    seen.into_iter().next().unwrap()
}

/// Standard generating loops of the fundamental group at base vertex 0:
/// tree-conjugated vertex-group elements and non-tree edge loops newly based.
pub fn generator_loops(g: &GraphOfGroups) -> Vec<EdgePath> {
    let tree = g.spanning_tree();
    let tree_set: BTreeSet<usize> = tree.iter().map(|&e| crate::gog::unoriented(e)).collect();
    // tree paths from the base to every vertex
    let mut mu: Vec<Option<EdgePath>> = vec![None; g.num_vertices()];
    mu[0] = Some(EdgePath::empty(0));
    let mut changed = true;
    while changed {
        changed = false;
        for &e in &tree {
            let (u, w) = (g.init(e), g.terminus(e));
            if mu[w].is_none() {
                if let Some(p) = &mu[u] {
                    let step = EdgePath::from_edges(g, u, vec![e], false).unwrap();
                    mu[w] = Some(p.concat(g, &step).unwrap());
                    changed = true;
                }
            }
        }
    }
    let mu: Vec<EdgePath> = mu.into_iter().map(|p| p.unwrap()).collect();
    let mut out = Vec::new();
    for v in 0..g.num_vertices() {
        for x in g.vertex_group(v).elements().skip(1) {
            let mid = EdgePath::new(g, v, vec![x], vec![], false).unwrap();
            let loop_ = mu[v]
                .concat(g, &mid)
                .unwrap()
                .concat(g, &mu[v].reverse(g))
                .unwrap();
            out.push(loop_);
        }
    }
    for e in g.forward_edges() {
        if !tree_set.contains(&crate::gog::unoriented(e)) {
            let step = EdgePath::from_edges(g, g.init(e), vec![e], false).unwrap();
            let loop_ = mu[g.init(e)]
                .concat(g, &step)
                .unwrap()
                .concat(g, &mu[g.terminus(e)].reverse(g))
                .unwrap();
            out.push(loop_);
        }
    }
    out
}

/// True when `p` and `q` are conjugate elements of the fundamental group.
fn conjugate_loops(g: &GraphOfGroups, p: &EdgePath, q: &EdgePath) -> bool {
    let (rp, _) = p.cyclic_reduce(g).unwrap();
    let (rq, _) = q.cyclic_reduce(g).unwrap();
    match (rp.is_hyperbolic(), rq.is_hyperbolic()) {
        (true, true) => rp.path().conjugacy_key(g) == rq.path().conjugacy_key(g),
        (false, false) => {
            elliptic_class_key(g, rp.path().base(), rp.path().elems()[0])
                == elliptic_class_key(g, rq.path().base(), rq.path().elems()[0])
        }
        _ => false,
    }
}

/// Candidate inner twists aligning two conjugate hyperbolic loops: prefixes
/// of the first cyclically reduced form times a vertex element, composed
/// with the two cyclic-reduction conjugators.
fn conjugator_candidates(g: &GraphOfGroups, from: &EdgePath, to: &EdgePath) -> Vec<EdgePath> {
    let (wf, cf) = to.cyclic_reduce(g).unwrap();
    let (wi, ci) = from.cyclic_reduce(g).unwrap();
    let mut out = Vec::new();
    if !wf.is_hyperbolic() || !wi.is_hyperbolic() {
        return out;
    }
    let wfp = wf.path();
    let k = wfp.num_edges();
    for r in 0..=k {
        let prefix = EdgePath::new(
            g,
            wfp.base(),
            wfp.elems()[..=r].to_vec(),
            wfp.edges()[..r].to_vec(),
            false,
        )
        .unwrap();
        let end = prefix.end(g);
        for a in g.vertex_group(end).elements() {
            let tail = EdgePath::new(g, end, vec![a], vec![], false).unwrap();
            let z = prefix.concat(g, &tail).unwrap();
            // candidate h = cf * z * ci^{-1}
            if z.end(g) != wi.path().base() {
                continue;
            }
            let h = cf
                .concat(g, &z)
                .unwrap()
                .concat(g, &ci.reverse(g))
                .unwrap();
            out.push(h.reduce(g));
        }
    }
    out
}

/// Searches for a marked isometry homotopic to `f`. Exhaustive over cell
/// isometries; the inner twist is pinned down by aligning one hyperbolic
/// generator and verified on the whole generating set.
pub fn find_marked_isometry(f: &GoGMap) -> Option<GoGMap> {
    let a = f.source();
    let b = f.target();
    let gens = generator_loops(a);
    // products of generator pairs, to get a hyperbolic pinning element even
    // when every generator is elliptic
    let mut pins: Vec<EdgePath> = gens.clone();
    'outer: for i in 0..gens.len() {
        for j in 0..gens.len() {
            if i != j {
                let prod = gens[i].concat(a, &gens[j]).unwrap();
                if prod.cyclic_reduce(a).unwrap().0.is_hyperbolic() {
                    pins.push(prod);
                    break 'outer;
                }
            }
        }
    }
    for iso in cell_isometries(a, b) {
        // conjugacy screen on all generators
        let screen_ok = gens.iter().all(|x| {
            let fx = f.map_path(x).unwrap();
            let ix = iso.map_path(x).unwrap();
            conjugate_loops(b, &fx, &ix)
        });
        if !screen_ok {
            continue;
        }
        let pin = pins
            .iter()
            .find(|x| x.cyclic_reduce(a).unwrap().0.is_hyperbolic());
        let candidates = match pin {
            Some(x0) => {
                let fx = f.map_path(x0).unwrap();
                let ix = iso.map_path(x0).unwrap();
                conjugator_candidates(b, &ix, &fx)
            }
            // no hyperbolic pin available: try vertex elements at the base
            None => b
                .vertex_group(iso.vertex_image(0))
                .elements()
                .map(|x| EdgePath::new(b, iso.vertex_image(0), vec![x], vec![], false).unwrap())
                .collect(),
        };
        for h in candidates {
            if h.base() != f.vertex_image(0) || h.end(b) != iso.vertex_image(0) {
                continue;
            }
            let ok = gens.iter().all(|x| {
                let fx = f.map_path(x).unwrap();
                let ix = iso.map_path(x).unwrap();
                let twisted = h
                    .concat(b, &ix)
                    .unwrap()
                    .concat(b, &h.reverse(b))
                    .unwrap();
                fx.same_element(b, &twisted)
            });
            if ok {
                return Some(iso);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::fingroup::FiniteGroup;
    use crate::ratio::Rational;

    #[test]
    fn group_isos_of_small_groups() {
        let z4 = FiniteGroup::cyclic(4).unwrap();
        let k4 = FiniteGroup::klein4();
        assert!(group_isos(&z4, &k4).is_empty());
        assert_eq!(group_isos(&z4, &z4).len(), 2); // identity and inversion
        assert_eq!(group_isos(&k4, &k4).len(), 6); // GL(2, F2)
    }

    #[test]
    fn identity_pair_admits_marked_isometry() {
        let g = corpus::unit_tripod();
        let id = GoGMap::identity(&g);
        assert!(find_marked_isometry(&id).is_some());
    }

    #[test]
    fn stretched_pair_admits_none() {
        let f = corpus::tripod_pair();
        assert!(find_marked_isometry(&f).is_none());
    }

    #[test]
    fn caterpillar_tripod_pair_admits_none() {
        let f = corpus::caterpillar_to_tripod();
        assert!(find_marked_isometry(&f).is_none());
    }

    #[test]
    fn isometric_relabeling_is_found() {
        // swap two tripod leaves of equal length: an honest isometry
        let a = corpus::tripod(&[
            Rational::new(1, 2),
            Rational::new(1, 4),
            Rational::new(1, 4),
        ]);
        let b = a.clone();
        // marking: swap leaves 2 and 3 (same lengths)
        let z2 = FiniteGroup::cyclic(2).unwrap();
        let homs = vec![
            FiniteGroup::identity_hom(a.vertex_group(0)),
            crate::fingroup::GroupHom::new(z2.clone(), b.vertex_group(1).clone(), vec![0, 1])
                .unwrap(),
            crate::fingroup::GroupHom::new(z2.clone(), b.vertex_group(3).clone(), vec![0, 1])
                .unwrap(),
            crate::fingroup::GroupHom::new(z2, b.vertex_group(2).clone(), vec![0, 1]).unwrap(),
        ];
        let images = vec![
            EdgePath::from_edges(&b, 0, vec![0], false).unwrap(),
            EdgePath::from_edges(&b, 0, vec![4], false).unwrap(),
            EdgePath::from_edges(&b, 0, vec![2], false).unwrap(),
        ];
        let f = GoGMap::new(a, b, vec![0, 1, 3, 2], homs, images).unwrap();
        assert!(find_marked_isometry(&f).is_some());
        assert_eq!(
            crate::lipschitz::stretch_factor(&f).unwrap().0,
            Rational::one()
        );
    }

    #[test]
    fn elliptic_classes_transport_through_edges() {
        let g = corpus::loop_with_edge_group_z2();
        // the nontrivial vertex element is in the edge-group image on both
        // sides, so its class is a single pair
        let k = elliptic_class_key(&g, 0, 1);
        assert_eq!(k, (0, 1));
    }
}
