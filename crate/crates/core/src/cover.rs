//! Finite-index covers of graphs of groups from finite quotients of the
//! fundamental group.
//!
//! A subgroup is specified as the preimage of `P <= Q` under a surjection
//! `rho: pi_1 -> Q` given by per-vertex homomorphisms and edge elements that
//! satisfy the presentation relators (tree edges map to 1). The cover has
//! one vertex over `v` per double coset `P \ Q / rho(G_v)` and one edge over
//! `e` per double coset of the edge-group image; cell groups are the
//! rho-preimages of conjugated copies of `P`, realized as concrete
//! subgroups of the base groups with canonical transport elements.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::fingroup::{Elem, GroupHom, GroupRef, Subgroup};
use crate::gog::{reverse, unoriented, EdgeId, GogError, GraphOfGroups, VertexId};
use crate::lipschitz::{rescale_map, stretch_factor, Candidate, LipError};
use crate::morphism::{GoGMap, MorphError};
use crate::path::{EdgePath, ReducedLoop};
use crate::ratio::Rational;

/// Edge-count cap for the generator-preimage search in `transport_quotient`.
pub const TRANSPORT_SEARCH_EDGES: usize = 10;
/// Node cap for the same search.
pub const TRANSPORT_SEARCH_BUDGET: usize = 2_000_000;

#[derive(Debug, Error)]
pub enum CoverError {
    #[error("invalid finite quotient: {0}")]
    InvalidQuotient(String),
    #[error("subgroup parent does not match the quotient group")]
    SubgroupParentMismatch,
    #[error("quotient transport failed: {0}")]
    IncompatibleQuotient(String),
    #[error("loop is elliptic")]
    EllipticLoop,
    #[error("kernel has torsion: vertex {vertex} element {elem}")]
    KernelHasTorsion { vertex: VertexId, elem: Elem },
    #[error("transport search budget exceeded")]
    BudgetExceeded,
    #[error(transparent)]
    Gog(#[from] GogError),
    #[error(transparent)]
    Morph(#[from] MorphError),
    #[error(transparent)]
    Lip(#[from] LipError),
}

/// A surjection of the fundamental group onto a finite group, presented by
/// vertex homomorphisms and edge holonomies relative to a spanning tree.
#[derive(Clone, Debug)]
pub struct FiniteQuotient {
    base: GraphOfGroups,
    q: GroupRef,
    /// Unoriented ids of the spanning-tree edges.
    tree: Vec<usize>,
    vertex_rho: Vec<GroupHom>,
    /// Per directed edge; reverse orientations carry inverse elements.
    edge_rho: Vec<Elem>,
}

impl FiniteQuotient {
    /// `edge_rho_forward[k]` is the holonomy of the k-th unoriented edge in
    /// its forward orientation.
    pub fn new(
        base: GraphOfGroups,
        q: GroupRef,
        tree: Vec<usize>,
        vertex_rho: Vec<GroupHom>,
        edge_rho_forward: Vec<Elem>,
    ) -> Result<FiniteQuotient, CoverError> {
        if vertex_rho.len() != base.num_vertices() || edge_rho_forward.len() != base.num_edges() {
            return Err(CoverError::InvalidQuotient(
                "arity mismatch between graph and quotient data".into(),
            ));
        }
        let mut edge_rho = Vec::with_capacity(base.num_directed_edges());
        for &x in &edge_rho_forward {
            if x >= q.order() {
                return Err(CoverError::InvalidQuotient(format!(
                    "edge holonomy {x} out of range"
                )));
            }
            edge_rho.push(x);
            edge_rho.push(q.inv(x));
        }
        let quotient = FiniteQuotient {
            base,
            q,
            tree,
            vertex_rho,
            edge_rho,
        };
        let report = quotient.validate();
        if !report.is_valid() {
            return Err(CoverError::InvalidQuotient(report.violations.join("; ")));
        }
        Ok(quotient)
    }

    pub fn base(&self) -> &GraphOfGroups {
        &self.base
    }

    pub fn group(&self) -> &GroupRef {
        &self.q
    }

    pub fn tree(&self) -> &[usize] {
        &self.tree
    }

    pub fn vertex_rho(&self, v: VertexId) -> &GroupHom {
        &self.vertex_rho[v]
    }

    pub fn edge_rho(&self, e: EdgeId) -> Elem {
        self.edge_rho[e]
    }

    /// Image in Q of the edge group embedded on the initial side of `e`.
    pub fn edge_group_image(&self, e: EdgeId) -> Vec<Elem> {
        let u = self.base.init(e);
        let mut img: Vec<Elem> = self
            .base
            .mono(reverse(e))
            .image_table()
            .iter()
            .map(|&x| self.vertex_rho[u].apply(x))
            .collect();
        img.sort_unstable();
        img.dedup();
        img
    }

    /// Holonomy of a path: the ordered product of vertex-element and edge
    /// images.
    pub fn holonomy(&self, p: &EdgePath) -> Elem {
        let vs = p.vertex_seq(&self.base);
        let mut h = self.vertex_rho[vs[0]].apply(p.elems()[0]);
        for (i, &e) in p.edges().iter().enumerate() {
            h = self.q.mul(h, self.edge_rho[e]);
            h = self
                .q
                .mul(h, self.vertex_rho[vs[i + 1]].apply(p.elems()[i + 1]));
        }
        h
    }

    pub fn validate(&self) -> QuotientReport {
        let mut violations = Vec::new();
        if self.tree.len() + 1 != self.base.num_vertices() {
            violations.push(format!(
                "tree has {} edges for {} vertices",
                self.tree.len(),
                self.base.num_vertices()
            ));
        } else {
            let mut seen = vec![false; self.base.num_vertices()];
            seen[0] = true;
            let mut changed = true;
            while changed {
                changed = false;
                for &k in &self.tree {
                    if k >= self.base.num_edges() {
                        continue;
                    }
                    let (u, w) = (self.base.init(2 * k), self.base.terminus(2 * k));
                    if seen[u] != seen[w] {
                        seen[u] = true;
                        seen[w] = true;
                        changed = true;
                    }
                }
            }
            if !seen.iter().all(|&s| s) {
                violations.push("tree edges do not span the graph".into());
            }
        }
        for &k in &self.tree {
            if k >= self.base.num_edges() {
                violations.push(format!("tree edge {k} out of range"));
            } else if self.edge_rho[2 * k] != 0 {
                violations.push(format!("tree edge {k} has nontrivial holonomy"));
            }
        }
        for (v, hom) in self.vertex_rho.iter().enumerate() {
            if hom.source().as_ref() != self.base.vertex_group(v).as_ref()
                || hom.target().as_ref() != self.q.as_ref()
            {
                violations.push(format!("vertex {v}: homomorphism endpoints mismatch"));
            }
        }
        // relators: rho(e)^-1 rho(a_e~(c)) rho(e) = rho(a_e(c))
        for e in self.base.forward_edges() {
            let (u, v) = (self.base.init(e), self.base.terminus(e));
            for c in self.base.edge_group(e).elements() {
                let near = self.vertex_rho[u].apply(self.base.mono(reverse(e)).apply(c));
                let far = self.vertex_rho[v].apply(self.base.mono(e).apply(c));
                let t = self.edge_rho[e];
                let lhs = self.q.mul(self.q.mul(self.q.inv(t), near), t);
                if lhs != far {
                    violations.push(format!(
                        "relator violated at edge {} element {c}",
                        unoriented(e) + 1
                    ));
                }
            }
        }
        let mut gens: Vec<Elem> = Vec::new();
        for hom in &self.vertex_rho {
            gens.extend(hom.image_table().iter().copied());
        }
        gens.extend(self.edge_rho.iter().copied());
        let span = Subgroup::closure(&self.q, &gens).expect("elements are in range");
        if !span.is_whole() {
            violations.push(format!(
                "rho is not surjective: image has order {}",
                span.order()
            ));
        }
        QuotientReport { violations }
    }
}

#[derive(Clone, Debug)]
pub struct QuotientReport {
    pub violations: Vec<String>,
}

impl QuotientReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn right_coset_rep(q: &GroupRef, p: &Subgroup, x: Elem) -> Elem {
    p.elements().iter().map(|&a| q.mul(a, x)).min().unwrap()
}

/// Orbit of the right coset `P x` under right multiplication by `gens`,
/// returned as sorted coset representatives.
fn coset_orbit(q: &GroupRef, p: &Subgroup, gens: &[Elem], x: Elem) -> Vec<Elem> {
    let mut seen = std::collections::BTreeSet::new();
    let mut queue = std::collections::VecDeque::from([right_coset_rep(q, p, x)]);
    while let Some(r) = queue.pop_front() {
        if !seen.insert(r) {
            continue;
        }
        for &g in gens {
            let next = right_coset_rep(q, p, q.mul(r, g));
            if !seen.contains(&next) {
                queue.push_back(next);
            }
        }
    }
    seen.into_iter().collect()
}

/// A finite-index cover together with its projection and sheet bookkeeping.
#[derive(Clone, Debug)]
pub struct CoverData {
    pub cover: GraphOfGroups,
    /// Cellular projection cover -> base; restricts to an isometry on edges.
    pub projection: GoGMap,
    /// Index `n = |Q| / |P|`.
    pub index: usize,
    quotient: FiniteQuotient,
    subgroup: Subgroup,
    /// Per base vertex: canonical right-coset rep of each orbit -> cover vertex.
    vertex_sheet: Vec<BTreeMap<Elem, VertexId>>,
    /// Per base forward edge: orbit rep -> cover unoriented edge index.
    edge_sheet: Vec<BTreeMap<Elem, usize>>,
    /// Per cover vertex: the canonical double-coset label.
    vertex_label: Vec<Elem>,
}

impl CoverData {
    pub fn quotient(&self) -> &FiniteQuotient {
        &self.quotient
    }

    pub fn subgroup(&self) -> &Subgroup {
        &self.subgroup
    }

    pub fn vertex_label(&self, cover_v: VertexId) -> Elem {
        self.vertex_label[cover_v]
    }

    /// Cover vertex over `v` whose sheet contains the right coset of `x`.
    pub fn vertex_sheet_at(&self, v: VertexId, x: Elem) -> VertexId {
        let q = &self.quotient.q;
        let p = &self.subgroup;
        let gens: Vec<Elem> = self.quotient.vertex_rho[v].image_table().to_vec();
        let orbit = coset_orbit(q, p, &gens, x);
        self.vertex_sheet[v][&orbit[0]]
    }

    /// Cover unoriented edge over forward edge `e` containing the coset of `x`.
    pub fn edge_sheet_at(&self, e: EdgeId, x: Elem) -> usize {
        let q = &self.quotient.q;
        let p = &self.subgroup;
        let gens = self.quotient.edge_group_image(e);
        let orbit = coset_orbit(q, p, &gens, x);
        self.edge_sheet[unoriented(e)][&orbit[0]]
    }

    pub fn sheets_over_vertex(&self, v: VertexId) -> Vec<VertexId> {
        self.vertex_sheet[v].values().copied().collect()
    }

    pub fn sheets_over_edge(&self, k: usize) -> Vec<usize> {
        self.edge_sheet[k].values().copied().collect()
    }

    /// Lifts a base path into the cover starting at `start` (a cover vertex
    /// over the path's base vertex). Returns the lifted path (with trivial
    /// final decoration) and the residual gauge element at the far end.
    pub fn lift_path(
        &self,
        path: &EdgePath,
        start: VertexId,
    ) -> Result<(EdgePath, Elem), CoverError> {
        let base = &self.quotient.base;
        let cover = &self.cover;
        let proj = &self.projection;
        let vs = path.vertex_seq(base);
        let mut cur = start;
        let mut gauge = path.elems()[0];
        let mut out_elems: Vec<Elem> = Vec::new();
        let mut out_edges: Vec<EdgeId> = Vec::new();
        for (i, &d) in path.edges().iter().enumerate() {
            let v = vs[i];
            debug_assert_eq!(proj.vertex_image(cur), v);
            let mut found = None;
            'search: for cd in cover.directed_edges() {
                if cover.init(cd) != cur {
                    continue;
                }
                let pe = proj.edge_image(cd);
                if pe.edges() != [d] {
                    continue;
                }
                let a = pe.elems()[0];
                let b = pe.elems()[1];
                let group = base.vertex_group(v);
                for c in base.edge_group(d).elements() {
                    let alpha_back = base.mono(reverse(d)).apply(c);
                    // gauge = delta * a * alpha_back(c)
                    let delta =
                        group.mul(group.mul(gauge, group.inv(alpha_back)), group.inv(a));
                    if let Some(abstract_delta) = proj.vertex_hom(cur).is_in_image(delta) {
                        let far_group = base.vertex_group(base.terminus(d));
                        let alpha_fwd = base.mono(d).apply(c);
                        let next_gauge = far_group.mul(far_group.inv(b), alpha_fwd);
                        found = Some((cd, abstract_delta, next_gauge));
                        break 'search;
                    }
                }
            }
            let Some((cd, delta, next_gauge)) = found else {
                return Err(CoverError::IncompatibleQuotient(
                    "path lift failed: no matching cover edge".into(),
                ));
            };
            out_elems.push(delta);
            out_edges.push(cd);
            cur = cover.terminus(cd);
            let far_group = base.vertex_group(vs[i + 1]);
            gauge = far_group.mul(next_gauge, path.elems()[i + 1]);
        }
        out_elems.push(0);
        let lifted = EdgePath::new(cover, start, out_elems, out_edges, false)?;
        Ok((lifted, gauge))
    }

    /// Minimal power of a hyperbolic loop whose lift closes at the given
    /// start sheet, together with the closed lifted loop.
    pub fn lift_power(
        &self,
        loop_: &ReducedLoop,
        start: VertexId,
    ) -> Result<(usize, ReducedLoop), CoverError> {
        if !loop_.is_hyperbolic() {
            return Err(CoverError::EllipticLoop);
        }
        let base = &self.quotient.base;
        let q = &self.quotient.q;
        let p = &self.subgroup;
        let r = self.vertex_label[start];
        let hol = self.quotient.holonomy(loop_.path());
        // minimal k with hol^k in r^-1 P r
        let mut k = 1usize;
        let mut acc = hol;
        loop {
            let conj = q.mul(q.mul(r, acc), q.inv(r));
            if p.contains(conj) {
                break;
            }
            acc = q.mul(acc, hol);
            k += 1;
            assert!(k <= q.order(), "holonomy power search exceeded |Q|");
        }
        let power = loop_.path().pow(base, k)?;
        let (lifted, gauge) = self.lift_path(&power, start)?;
        let Some(final_elem) = self.projection.vertex_hom(start).is_in_image(gauge) else {
            return Err(CoverError::IncompatibleQuotient(
                "closed lift has framing outside the cover vertex group".into(),
            ));
        };
        if lifted.end(&self.cover) != start {
            return Err(CoverError::IncompatibleQuotient(
                "lift of the chosen power does not return to the start sheet".into(),
            ));
        }
        let mut elems = lifted.elems().to_vec();
        *elems.last_mut().unwrap() = final_elem;
        let closed = EdgePath::new(&self.cover, start, elems, lifted.edges().to_vec(), true)?;
        let closed = ReducedLoop::assert_reduced(&self.cover, closed).map_err(|_| {
            CoverError::IncompatibleQuotient("closed lift is not cyclically reduced".into())
        })?;
        Ok((k, closed))
    }
}

/// Builds the cover associated to `rho^{-1}(P)`.
pub fn build_cover(quotient: &FiniteQuotient, p: &Subgroup) -> Result<CoverData, CoverError> {
    if p.parent().as_ref() != quotient.q.as_ref() {
        return Err(CoverError::SubgroupParentMismatch);
    }
    let base = &quotient.base;
    let q = &quotient.q;
    let index = q.order() / p.order();

    let mut vertex_groups: Vec<GroupRef> = Vec::new();
    let mut vertex_homs: Vec<GroupHom> = Vec::new();
    let mut vertex_sheet: Vec<BTreeMap<Elem, VertexId>> = Vec::new();
    let mut vertex_label: Vec<Elem> = Vec::new();
    let mut proj_vertex_image: Vec<VertexId> = Vec::new();
    for v in 0..base.num_vertices() {
        let gens: Vec<Elem> = quotient.vertex_rho[v].image_table().to_vec();
        let mut sheet_map = BTreeMap::new();
        let mut remaining: std::collections::BTreeSet<Elem> = q
            .elements()
            .map(|x| right_coset_rep(q, p, x))
            .collect();
        while let Some(&least) = remaining.iter().next() {
            let orbit = coset_orbit(q, p, &gens, least);
            for r in &orbit {
                remaining.remove(r);
            }
            let label = orbit[0];
            let group = base.vertex_group(v);
            let members: Vec<Elem> = group
                .elements()
                .filter(|&g| {
                    let img = quotient.vertex_rho[v].apply(g);
                    p.contains(q.mul(q.mul(label, img), q.inv(label)))
                })
                .collect();
            let sub = Subgroup::from_elements(group, &members)
                .map_err(|e| CoverError::InvalidQuotient(format!("sheet group: {e}")))?;
            let (abstract_group, inclusion) = GroupHom::subgroup_inclusion(&sub);
            let id = vertex_groups.len();
            vertex_groups.push(abstract_group);
            vertex_homs.push(inclusion);
            vertex_label.push(label);
            proj_vertex_image.push(v);
            sheet_map.insert(label, id);
        }
        vertex_sheet.push(sheet_map);
    }

    let mut cover = GraphOfGroups::new(vertex_groups.clone());
    let mut edge_sheet: Vec<BTreeMap<Elem, usize>> = Vec::new();
    let mut proj_forward_images: Vec<(usize, EdgePath)> = Vec::new();

    // least transport w in G_v with P * r * rho_v(w) == P * t
    let transport = |v: VertexId, r: Elem, t: Elem| -> Option<Elem> {
        let rho = &quotient.vertex_rho[v];
        base.vertex_group(v).elements().find(|&w| {
            right_coset_rep(q, p, q.mul(r, rho.apply(w))) == right_coset_rep(q, p, t)
        })
    };

    for e in base.forward_edges() {
        let (u, v) = (base.init(e), base.terminus(e));
        let egens = quotient.edge_group_image(e);
        let mut remaining: std::collections::BTreeSet<Elem> = q
            .elements()
            .map(|x| right_coset_rep(q, p, x))
            .collect();
        let mut sheet_map = BTreeMap::new();
        while let Some(&least) = remaining.iter().next() {
            let orbit = coset_orbit(q, p, &egens, least);
            for r in &orbit {
                remaining.remove(r);
            }
            let t = orbit[0];
            let edge_group = base.edge_group(e);
            let members: Vec<Elem> = edge_group
                .elements()
                .filter(|&c| {
                    let img = quotient.vertex_rho[u].apply(base.mono(reverse(e)).apply(c));
                    p.contains(q.mul(q.mul(t, img), q.inv(t)))
                })
                .collect();
            let esub = Subgroup::from_elements(edge_group, &members)
                .map_err(|err| CoverError::InvalidQuotient(format!("edge sheet group: {err}")))?;
            let (e_abstract, e_incl) = GroupHom::subgroup_inclusion(&esub);

            let iota_orbit =
                coset_orbit(q, p, &quotient.vertex_rho[u].image_table().to_vec(), t);
            let iota_sheet = vertex_sheet[u][&iota_orbit[0]];
            let w_iota = transport(u, vertex_label[iota_sheet], t)
                .expect("the initial sheet contains the edge coset");
            let t_far = q.mul(t, quotient.edge_rho[e]);
            let tau_orbit =
                coset_orbit(q, p, &quotient.vertex_rho[v].image_table().to_vec(), t_far);
            let tau_sheet = vertex_sheet[v][&tau_orbit[0]];
            let w_tau = transport(v, vertex_label[tau_sheet], t_far)
                .expect("the terminal sheet contains the transported edge coset");

            let head_table: Vec<Elem> = e_abstract
                .elements()
                .map(|c| {
                    let c_base = e_incl.apply(c);
                    let img = base
                        .vertex_group(v)
                        .conj(w_tau, base.mono(e).apply(c_base));
                    vertex_homs[tau_sheet]
                        .is_in_image(img)
                        .expect("transported edge group lands in the sheet group")
                })
                .collect();
            let tail_table: Vec<Elem> = e_abstract
                .elements()
                .map(|c| {
                    let c_base = e_incl.apply(c);
                    let img = base
                        .vertex_group(u)
                        .conj(w_iota, base.mono(reverse(e)).apply(c_base));
                    vertex_homs[iota_sheet]
                        .is_in_image(img)
                        .expect("transported edge group lands in the sheet group")
                })
                .collect();
            let cover_edge = cover
                .add_edge(
                    iota_sheet,
                    tau_sheet,
                    base.length(e).clone(),
                    e_abstract,
                    head_table,
                    tail_table,
                )
                .map_err(|err| CoverError::InvalidQuotient(format!("cover edge: {err}")))?;
            sheet_map.insert(t, unoriented(cover_edge));
            let w_tau_inv = base.vertex_group(v).inv(w_tau);
            let proj_path = EdgePath::new(base, u, vec![w_iota, w_tau_inv], vec![e], false)?;
            proj_forward_images.push((unoriented(cover_edge), proj_path));
        }
        edge_sheet.push(sheet_map);
    }

    proj_forward_images.sort_by_key(|(k, _)| *k);
    let projection = GoGMap::new(
        cover.clone(),
        base.clone(),
        proj_vertex_image,
        vertex_homs,
        proj_forward_images.into_iter().map(|(_, p)| p).collect(),
    )?;

    // volume multiplicativity and the fiber bookkeeping identity
    let expected = &Rational::int(index as i64) * &base.volume();
    assert_eq!(
        cover.volume(),
        expected,
        "cover volume is n times base volume"
    );
    for v in 0..base.num_vertices() {
        let lhs = &Rational::int(index as i64)
            / &Rational::int(base.vertex_group(v).order() as i64);
        let rhs: Rational = vertex_sheet[v]
            .values()
            .map(|&s| Rational::new(1, cover.vertex_group(s).order() as i64))
            .sum();
        assert_eq!(lhs, rhs, "sheet stabilizer bookkeeping over vertex {v}");
    }

    Ok(CoverData {
        cover,
        projection,
        index,
        quotient: quotient.clone(),
        subgroup: p.clone(),
        vertex_sheet,
        edge_sheet,
        vertex_label,
    })
}

/// Scales every edge length by the factor.
pub fn rescale(g: &GraphOfGroups, factor: &Rational) -> Result<GraphOfGroups, CoverError> {
    Ok(g.scale(factor)?)
}

/// Generator bookkeeping for rebuilding quotient data on a target graph.
enum GeneratorTag {
    VertexElem(VertexId, Elem),
    EdgeLetter(EdgeId),
}

fn tagged_generator_loops(
    g: &GraphOfGroups,
    base_vertex: VertexId,
) -> (Vec<(GeneratorTag, EdgePath)>, Vec<usize>) {
    let tree = g.spanning_tree();
    let tree_unoriented: Vec<usize> = {
        let mut t: Vec<usize> = tree.iter().map(|&e| unoriented(e)).collect();
        t.sort_unstable();
        t
    };
    let mut mu: Vec<Option<EdgePath>> = vec![None; g.num_vertices()];
    mu[base_vertex] = Some(EdgePath::empty(base_vertex));
    let mut changed = true;
    while changed {
        changed = false;
        for &e in &tree {
            for d in [e, reverse(e)] {
                let (a, b) = (g.init(d), g.terminus(d));
                if mu[b].is_none() && mu[a].is_some() {
                    let step = EdgePath::from_edges(g, a, vec![d], false).unwrap();
                    mu[b] = Some(mu[a].as_ref().unwrap().concat(g, &step).unwrap());
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
            out.push((GeneratorTag::VertexElem(v, x), loop_));
        }
    }
    for e in g.forward_edges() {
        if !tree_unoriented.contains(&unoriented(e)) {
            let step = EdgePath::from_edges(g, g.init(e), vec![e], false).unwrap();
            let loop_ = mu[g.init(e)]
                .concat(g, &step)
                .unwrap()
                .concat(g, &mu[g.terminus(e)].reverse(g))
                .unwrap();
            out.push((GeneratorTag::EdgeLetter(e), loop_));
        }
    }
    (out, tree_unoriented)
}

/// Finds a based source loop mapping to the given target loop under the map,
/// by iterative-deepening search over reduced decorated loops.
fn preimage_loop(
    f: &GoGMap,
    target_loop: &EdgePath,
    base: VertexId,
) -> Result<EdgePath, CoverError> {
    let g = f.source();
    let mut nodes = 0usize;
    for depth in 0..=TRANSPORT_SEARCH_EDGES {
        let mut stack: Vec<(Vec<EdgeId>, Vec<Elem>)> = vec![(Vec::new(), Vec::new())];
        while let Some((edges, decorations)) = stack.pop() {
            nodes += 1;
            if nodes > TRANSPORT_SEARCH_BUDGET {
                return Err(CoverError::BudgetExceeded);
            }
            let cur = edges.last().map_or(base, |&e| g.terminus(e));
            if cur == base && edges.len() == depth {
                for gk in g.vertex_group(base).elements() {
                    let elems = if edges.is_empty() {
                        vec![gk]
                    } else {
                        let mut elems = vec![0];
                        elems.extend_from_slice(&decorations);
                        elems.push(gk);
                        elems
                    };
                    let candidate =
                        EdgePath::new(g, base, elems, edges.clone(), true).expect("consistent");
                    let image = f.map_path(&candidate)?;
                    if image.same_element(f.target(), target_loop) {
                        return Ok(candidate);
                    }
                }
            }
            if edges.len() == depth {
                continue;
            }
            if edges.is_empty() {
                for e in g.edges_at(base) {
                    stack.push((vec![e], Vec::new()));
                }
            } else {
                let last = *edges.last().unwrap();
                for d in g.vertex_group(cur).elements() {
                    for e in g.edges_at(cur) {
                        if e == reverse(last) && g.mono(last).is_in_image(d).is_some() {
                            continue;
                        }
                        let mut edges2 = edges.clone();
                        let mut dec2 = decorations.clone();
                        edges2.push(e);
                        dec2.push(d);
                        stack.push((edges2, dec2));
                    }
                }
            }
        }
    }
    Err(CoverError::IncompatibleQuotient(
        "no bounded preimage for a target generator".into(),
    ))
}

/// Transports a quotient through a homotopy equivalence: produces quotient
/// data on the target with `rho' . f# = rho`, by solving for preimages of
/// the target generators.
pub fn transport_quotient(
    f: &GoGMap,
    q_source: &FiniteQuotient,
) -> Result<FiniteQuotient, CoverError> {
    let target = f.target().clone();
    let base_vertex = f.vertex_image(0);
    let (gens, tree) = tagged_generator_loops(&target, base_vertex);
    let q = q_source.q.clone();
    let mut vertex_tables: Vec<Vec<Elem>> = (0..target.num_vertices())
        .map(|v| vec![0; target.vertex_group(v).order()])
        .collect();
    let mut edge_elems: Vec<Elem> = vec![0; target.num_edges()];
    for (tag, loop_) in gens {
        let w = preimage_loop(f, &loop_, 0)?;
        let value = q_source.holonomy(&w);
        match tag {
            GeneratorTag::VertexElem(v, x) => vertex_tables[v][x] = value,
            GeneratorTag::EdgeLetter(e) => edge_elems[unoriented(e)] = value,
        }
    }
    let vertex_rho = (0..target.num_vertices())
        .map(|v| {
            GroupHom::new(
                target.vertex_group(v).clone(),
                q.clone(),
                vertex_tables[v].clone(),
            )
            .map_err(|e| {
                CoverError::IncompatibleQuotient(format!(
                    "transported vertex map is not a homomorphism at vertex {v}: {e}"
                ))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let quotient = FiniteQuotient::new(target, q, tree, vertex_rho, edge_elems)
        .map_err(|e| CoverError::IncompatibleQuotient(e.to_string()))?;
    // defining identity on the source generators
    let (src_gens, _) = tagged_generator_loops(f.source(), 0);
    for (_, loop_) in src_gens {
        let lhs = quotient.holonomy(&f.map_path(&loop_)?);
        let rhs = q_source.holonomy(&loop_);
        if lhs != rhs {
            return Err(CoverError::IncompatibleQuotient(
                "transported quotient does not pull back to the source quotient".into(),
            ));
        }
    }
    Ok(quotient)
}

/// Lifts a map to the covers defined by a quotient on its source and the
/// transported quotient on its target. The projection squares are checked
/// cell by cell. Returns the lifted map, the transported quotient, and both
/// covers.
pub fn push_map_to_cover(
    f: &GoGMap,
    q_source: &FiniteQuotient,
    p: &Subgroup,
) -> Result<(GoGMap, FiniteQuotient, CoverData, CoverData), CoverError> {
    let q_target = transport_quotient(f, q_source)?;
    let source_cover = build_cover(q_source, p)?;
    let target_cover = build_cover(&q_target, p)?;
    let base_src = f.source();
    let q = &q_source.q;

    // framing correction per source vertex: holonomy of the mapped tree path
    let tree_edges = base_src.spanning_tree();
    let mut mu: Vec<Option<EdgePath>> = vec![None; base_src.num_vertices()];
    mu[0] = Some(EdgePath::empty(0));
    let mut changed = true;
    while changed {
        changed = false;
        for &e in &tree_edges {
            for d in [e, reverse(e)] {
                let (a, b) = (base_src.init(d), base_src.terminus(d));
                if mu[b].is_none() && mu[a].is_some() {
                    let step = EdgePath::from_edges(base_src, a, vec![d], false).unwrap();
                    mu[b] = Some(mu[a].as_ref().unwrap().concat(base_src, &step).unwrap());
                    changed = true;
                }
            }
        }
    }
    let kappa: Vec<Elem> = (0..base_src.num_vertices())
        .map(|v| q_target.holonomy(&f.map_path(mu[v].as_ref().unwrap()).unwrap()))
        .collect();

    let mut vertex_image = Vec::new();
    let mut vertex_homs = Vec::new();
    let mut star_gauge = Vec::new();
    for cv in 0..source_cover.cover.num_vertices() {
        let v = source_cover.projection.vertex_image(cv);
        let r = source_cover.vertex_label(cv);
        let fv = f.vertex_image(v);
        let shifted = q.mul(r, kappa[v]);
        let target_sheet = target_cover.vertex_sheet_at(fv, shifted);
        let r_star = target_cover.vertex_label(target_sheet);
        let w_star = f
            .target()
            .vertex_group(fv)
            .elements()
            .find(|&w| {
                right_coset_rep(q, p, q.mul(r_star, q_target.vertex_rho(fv).apply(w)))
                    == right_coset_rep(q, p, shifted)
            })
            .expect("target sheet contains the shifted coset");
        let table: Vec<Elem> = source_cover
            .cover
            .vertex_group(cv)
            .elements()
            .map(|gh| {
                let g_base = source_cover.projection.vertex_hom(cv).apply(gh);
                let img = f.vertex_hom(v).apply(g_base);
                let twisted = f.target().vertex_group(fv).conj(w_star, img);
                target_cover
                    .projection
                    .vertex_hom(target_sheet)
                    .is_in_image(twisted)
                    .expect("lifted vertex image lies in the target sheet group")
            })
            .collect();
        let hom = GroupHom::new(
            source_cover.cover.vertex_group(cv).clone(),
            target_cover.cover.vertex_group(target_sheet).clone(),
            table,
        )
        .map_err(|e| CoverError::IncompatibleQuotient(format!("lifted vertex hom: {e}")))?;
        vertex_image.push(target_sheet);
        vertex_homs.push(hom);
        star_gauge.push(w_star);
    }

    // edge images by lifting the mapped projection paths, framed by w*
    let mut forward_images = Vec::new();
    for ce in source_cover.cover.forward_edges() {
        let civ = source_cover.cover.init(ce);
        let ctv = source_cover.cover.terminus(ce);
        let proj_path = source_cover.projection.edge_image(ce);
        let mapped = f.map_path(proj_path)?;
        let head_vertex = f.vertex_image(source_cover.projection.vertex_image(civ));
        let head = EdgePath::new(f.target(), head_vertex, vec![star_gauge[civ]], vec![], false)?;
        let to_lift = head.concat(f.target(), &mapped)?;
        let (lifted, gauge) = target_cover.lift_path(&to_lift, vertex_image[civ])?;
        let far_sheet = vertex_image[ctv];
        let far_group = f
            .target()
            .vertex_group(target_cover.projection.vertex_image(far_sheet));
        let delta = far_group.mul(gauge, far_group.inv(star_gauge[ctv]));
        let Some(delta_abs) = target_cover
            .projection
            .vertex_hom(far_sheet)
            .is_in_image(delta)
        else {
            return Err(CoverError::IncompatibleQuotient(
                "lifted edge image has framing outside the far sheet group".into(),
            ));
        };
        let mut elems = lifted.elems().to_vec();
        *elems.last_mut().unwrap() = delta_abs;
        let img = EdgePath::new(
            &target_cover.cover,
            vertex_image[civ],
            elems,
            lifted.edges().to_vec(),
            false,
        )?
        .reduce(&target_cover.cover);
        forward_images.push(img);
    }

    let lifted_map = GoGMap::new(
        source_cover.cover.clone(),
        target_cover.cover.clone(),
        vertex_image,
        vertex_homs,
        forward_images,
    )?;

    check_cover_square(f, &lifted_map, &source_cover, &target_cover, &star_gauge)?;
    Ok((lifted_map, q_target, source_cover, target_cover))
}

/// Verifies `proj_target . lifted = f . proj_source` cell by cell, relative
/// to the framing gauges of the lift: the two compositions must agree after
/// the vertex-wise inner twist by `frames` (the `w*` framing element per
/// source-cover vertex). When every frame is trivial this is equality on the
/// nose.
pub fn check_cover_square(
    f: &GoGMap,
    lifted: &GoGMap,
    source_cover: &CoverData,
    target_cover: &CoverData,
    frames: &[Elem],
) -> Result<(), CoverError> {
    let left = f.compose(&source_cover.projection)?;
    let right = target_cover.projection.compose(lifted)?;
    let base_tgt = f.target();
    let mut detail = String::new();
    for cv in 0..left.source().num_vertices() {
        if left.vertex_image(cv) != right.vertex_image(cv) {
            detail.push_str(&format!(" vertex image {cv};"));
            continue;
        }
        let group = base_tgt.vertex_group(left.vertex_image(cv));
        let t = group.inv(frames[cv]);
        let twisted_ok = left.source().vertex_group(cv).elements().all(|g| {
            left.vertex_hom(cv).apply(g) == group.conj(t, right.vertex_hom(cv).apply(g))
        });
        if !twisted_ok {
            detail.push_str(&format!(" vertex hom {cv};"));
        }
    }
    for e in left.source().directed_edges() {
        let civ = left.source().init(e);
        let ctv = left.source().terminus(e);
        let group_i = base_tgt.vertex_group(left.vertex_image(civ));
        let head = EdgePath::new(
            base_tgt,
            left.vertex_image(civ),
            vec![group_i.inv(frames[civ])],
            vec![],
            false,
        )?;
        let tail = EdgePath::new(
            base_tgt,
            left.vertex_image(ctv),
            vec![frames[ctv]],
            vec![],
            false,
        )?;
        let twisted = head
            .concat(base_tgt, right.edge_image(e))?
            .concat(base_tgt, &tail)?;
        if !left.edge_image(e).same_element(base_tgt, &twisted) {
            detail.push_str(&format!(" edge image {e};"));
        }
    }
    if !detail.is_empty() {
        return Err(CoverError::IncompatibleQuotient(format!(
            "projection squares do not commute:{detail}"
        )));
    }
    Ok(())
}

/// Result of the isometric-embedding verification.
#[derive(Clone, Debug)]
pub struct IsometryReport {
    pub lambda_base: Rational,
    pub lambda_cover: Rational,
    pub witness_base: Candidate,
    pub witness_cover: Candidate,
    pub index: usize,
    pub equal: bool,
}

/// Computes the stretch factor on the base pair and on the 1/n-rescaled
/// covers and reports exact equality.
pub fn verify_isometry(
    f: &GoGMap,
    q_source: &FiniteQuotient,
    p: &Subgroup,
) -> Result<IsometryReport, CoverError> {
    let (lambda_base, witness_base) = stretch_factor(f)?;
    let (lifted, _q_target, source_cover, _target_cover) = push_map_to_cover(f, q_source, p)?;
    let n = Rational::int(source_cover.index as i64);
    let rescaled = rescale_map(&lifted, &n.recip(), &n.recip())?;
    let (lambda_cover, witness_cover) = stretch_factor(&rescaled)?;
    Ok(IsometryReport {
        equal: lambda_base == lambda_cover,
        lambda_base,
        lambda_cover,
        witness_base,
        witness_cover,
        index: source_cover.index,
    })
}

#[cfg(test)]
pub mod tests {
    use super::*;
    use crate::corpus;
    use crate::fingroup::FiniteGroup;

    pub fn dihedral_klein4_quotient() -> FiniteQuotient {
        let g = corpus::dihedral_segment();
        let k4 = FiniteGroup::klein4();
        let rho_u = GroupHom::new(g.vertex_group(0).clone(), k4.clone(), vec![0, 1]).unwrap();
        let rho_v = GroupHom::new(g.vertex_group(1).clone(), k4.clone(), vec![0, 2]).unwrap();
        FiniteQuotient::new(g, k4, vec![0], vec![rho_u, rho_v], vec![0]).unwrap()
    }

    pub fn tripod_z2_quotient() -> FiniteQuotient {
        let g = corpus::unit_tripod();
        let z2 = FiniteGroup::cyclic(2).unwrap();
        let rho_c = GroupHom::new(g.vertex_group(0).clone(), z2.clone(), vec![0]).unwrap();
        let rho_leaf =
            |v: usize| GroupHom::new(g.vertex_group(v).clone(), z2.clone(), vec![0, 1]).unwrap();
        let homs = vec![rho_c, rho_leaf(1), rho_leaf(2), rho_leaf(3)];
        FiniteQuotient::new(g, z2, vec![0, 1, 2], homs, vec![0, 0, 0]).unwrap()
    }

    pub fn caterpillar_z2_quotient() -> FiniteQuotient {
        let g = corpus::unit_caterpillar();
        let z2 = FiniteGroup::cyclic(2).unwrap();
        let homs = (0..3)
            .map(|v| GroupHom::new(g.vertex_group(v).clone(), z2.clone(), vec![0, 1]).unwrap())
            .collect();
        FiniteQuotient::new(g, z2, vec![0, 1], homs, vec![0, 0]).unwrap()
    }

    #[test]
    fn quotient_validation_catches_bad_data() {
        let g = corpus::dihedral_segment();
        let k4 = FiniteGroup::klein4();
        let rho_u = GroupHom::new(g.vertex_group(0).clone(), k4.clone(), vec![0, 1]).unwrap();
        let rho_v = GroupHom::new(g.vertex_group(1).clone(), k4.clone(), vec![0, 1]).unwrap();
        // not surjective: both vertex groups hit the same Z/2
        assert!(matches!(
            FiniteQuotient::new(g, k4, vec![0], vec![rho_u, rho_v], vec![0]),
            Err(CoverError::InvalidQuotient(_))
        ));
    }

    #[test]
    fn dihedral_cover_is_a_4_cycle() {
        let quotient = dihedral_klein4_quotient();
        let p = Subgroup::trivial(quotient.group());
        let cover = build_cover(&quotient, &p).unwrap();
        assert_eq!(cover.index, 4);
        assert_eq!(cover.cover.num_vertices(), 4);
        assert_eq!(cover.cover.num_edges(), 4);
        assert!(cover.cover.vertex_groups().iter().all(|g| g.is_trivial()));
        assert_eq!(cover.cover.volume(), Rational::int(4));
        assert!(cover.projection.validate().is_valid());
    }

    #[test]
    fn tripod_cover_is_k23() {
        let quotient = tripod_z2_quotient();
        let p = Subgroup::trivial(quotient.group());
        let cover = build_cover(&quotient, &p).unwrap();
        assert_eq!(cover.index, 2);
        assert_eq!(cover.cover.num_vertices(), 5);
        assert_eq!(cover.cover.num_edges(), 6);
        assert!(cover.cover.vertex_groups().iter().all(|g| g.is_trivial()));
        assert_eq!(cover.cover.volume(), Rational::int(2));
        assert_eq!(cover.cover.euler_char(), Rational::int(-1));
        // fibers: one sheet per leaf, two over the center
        assert_eq!(cover.sheets_over_vertex(0).len(), 2);
        for v in 1..4 {
            assert_eq!(cover.sheets_over_vertex(v).len(), 1);
        }
    }

    #[test]
    fn whole_subgroup_gives_identity_cover() {
        let quotient = tripod_z2_quotient();
        let p = Subgroup::whole(quotient.group());
        let cover = build_cover(&quotient, &p).unwrap();
        assert_eq!(cover.index, 1);
        assert_eq!(cover.cover.num_vertices(), 4);
        assert_eq!(cover.cover.num_edges(), 3);
        assert_eq!(cover.cover.volume(), Rational::one());
    }

    #[test]
    fn lift_power_on_dihedral() {
        let quotient = dihedral_klein4_quotient();
        let g = quotient.base().clone();
        let p = Subgroup::trivial(quotient.group());
        let cover = build_cover(&quotient, &p).unwrap();
        let w = EdgePath::new(&g, 0, vec![1, 1, 0], vec![0, 1], true).unwrap();
        let w = ReducedLoop::assert_reduced(&g, w).unwrap();
        let start = cover.vertex_sheet_at(0, 0);
        let (k, lift) = cover.lift_power(&w, start).unwrap();
        assert_eq!(k, 2);
        assert_eq!(lift.path().num_edges(), 4);
        assert_eq!(lift.length(&cover.cover), Rational::int(2) * w.length(&g));
    }

    #[test]
    fn lift_power_on_tripod_barbell() {
        let quotient = tripod_z2_quotient();
        let g = quotient.base().clone();
        let p = Subgroup::trivial(quotient.group());
        let cover = build_cover(&quotient, &p).unwrap();
        let w = EdgePath::new(&g, 1, vec![1, 0, 1, 0, 0], vec![1, 2, 3, 0], true).unwrap();
        let w = ReducedLoop::assert_reduced(&g, w).unwrap();
        let start = cover.vertex_sheet_at(1, 0);
        let (k, lift) = cover.lift_power(&w, start).unwrap();
        assert_eq!(k, 1);
        assert_eq!(lift.path().num_edges(), 4);
    }

    #[test]
    fn lift_power_with_whole_subgroup_is_immediate() {
        let quotient = tripod_z2_quotient();
        let g = quotient.base().clone();
        let p = Subgroup::whole(quotient.group());
        let cover = build_cover(&quotient, &p).unwrap();
        let w = EdgePath::new(&g, 1, vec![1, 0, 1, 0, 0], vec![1, 2, 3, 0], true).unwrap();
        let w = ReducedLoop::assert_reduced(&g, w).unwrap();
        let start = cover.vertex_sheet_at(1, 0);
        let (k, _) = cover.lift_power(&w, start).unwrap();
        assert_eq!(k, 1);
    }

    #[test]
    fn lift_power_rejects_elliptic() {
        let quotient = dihedral_klein4_quotient();
        let g = quotient.base().clone();
        let p = Subgroup::trivial(quotient.group());
        let cover = build_cover(&quotient, &p).unwrap();
        let w = EdgePath::vertex_elem(&g, 0, 1).unwrap();
        let w = ReducedLoop::assert_reduced(&g, w).unwrap();
        assert!(matches!(
            cover.lift_power(&w, 0),
            Err(CoverError::EllipticLoop)
        ));
    }

    #[test]
    fn transport_through_identity_is_identity() {
        let quotient = tripod_z2_quotient();
        let id = GoGMap::identity(quotient.base());
        let transported = transport_quotient(&id, &quotient).unwrap();
        for v in 0..quotient.base().num_vertices() {
            assert_eq!(
                transported.vertex_rho(v).image_table(),
                quotient.vertex_rho(v).image_table()
            );
        }
    }

    #[test]
    fn push_identity_map_to_cover() {
        let quotient = tripod_z2_quotient();
        let p = Subgroup::trivial(quotient.group());
        let id = GoGMap::identity(quotient.base());
        let (lifted, _, src, _) = push_map_to_cover(&id, &quotient, &p).unwrap();
        assert!(lifted.validate().is_valid());
        assert_eq!(lifted.lipschitz_constant().unwrap(), Rational::one());
        assert_eq!(src.index, 2);
    }

    #[test]
    fn isometry_verification_on_tripod_pair() {
        let f = corpus::tripod_pair();
        let quotient = tripod_z2_quotient();
        let p = Subgroup::trivial(quotient.group());
        let report = verify_isometry(&f, &quotient, &p).unwrap();
        assert!(report.equal);
        assert_eq!(report.lambda_base, Rational::new(9, 8));
        assert_eq!(report.lambda_cover, Rational::new(9, 8));
    }

    #[test]
    fn isometry_verification_on_caterpillar_pair() {
        let f = corpus::caterpillar_to_tripod();
        let quotient = caterpillar_z2_quotient();
        let p = Subgroup::trivial(quotient.group());
        let report = verify_isometry(&f, &quotient, &p).unwrap();
        assert!(report.equal);
        assert_eq!(report.lambda_base, Rational::new(4, 3));

        let r = corpus::tripod_to_caterpillar();
        let tq = tripod_z2_quotient();
        let report = verify_isometry(&r, &tq, &p).unwrap();
        assert!(report.equal);
        assert_eq!(report.lambda_base, Rational::new(3, 2));
    }
}
