//! Decorated edge paths in a graph of groups and their normal forms.
//!
//! A path is the word `g_0 e_1 g_1 ... e_k g_k` where `g_i` lives in the
//! vertex group at the i-th vertex of the path. Reduction rewrites
//! `e a_e(c) e~ -> a_{e~}(c)` (merging adjacent group elements) until no
//! such subword remains; cyclic reduction additionally rotates loops.

use crate::fingroup::Elem;
use crate::gog::{reverse, EdgeId, GogError, GraphOfGroups, VertexId};
use crate::ratio::Rational;

/// A decorated edge path. Immutable once built.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EdgePath {
    base: VertexId,
    elems: Vec<Elem>,
    edges: Vec<EdgeId>,
    is_loop: bool,
}

impl EdgePath {
    pub fn new(
        g: &GraphOfGroups,
        base: VertexId,
        elems: Vec<Elem>,
        edges: Vec<EdgeId>,
        is_loop: bool,
    ) -> Result<EdgePath, GogError> {
        if base >= g.num_vertices() {
            return Err(GogError::VertexOutOfRange(base));
        }
        if elems.len() != edges.len() + 1 {
            return Err(GogError::InconsistentPath(format!(
                "{} group elements for {} edges",
                elems.len(),
                edges.len()
            )));
        }
        let mut v = base;
        for (i, &e) in edges.iter().enumerate() {
            if e >= g.num_directed_edges() {
                return Err(GogError::EdgeOutOfRange(e));
            }
            if g.init(e) != v {
                return Err(GogError::InconsistentPath(format!(
                    "edge at position {i} does not issue from the current vertex"
                )));
            }
            if elems[i] >= g.vertex_group(v).order() {
                return Err(GogError::InconsistentPath(format!(
                    "element at position {i} out of range"
                )));
            }
            v = g.terminus(e);
        }
        if *elems.last().unwrap() >= g.vertex_group(v).order() {
            return Err(GogError::InconsistentPath(
                "final element out of range".into(),
            ));
        }
        if is_loop && v != base {
            return Err(GogError::InconsistentPath(
                "loop flag set but endpoints differ".into(),
            ));
        }
        Ok(EdgePath {
            base,
            elems,
            edges,
            is_loop,
        })
    }

    /// Path consisting of a single vertex group element.
    pub fn vertex_elem(g: &GraphOfGroups, v: VertexId, elem: Elem) -> Result<EdgePath, GogError> {
        EdgePath::new(g, v, vec![elem], vec![], true)
    }

    pub fn empty(v: VertexId) -> EdgePath {
        EdgePath {
            base: v,
            elems: vec![0],
            edges: vec![],
            is_loop: true,
        }
    }

    /// Builds a loop from edges with trivial decorations.
    pub fn from_edges(
        g: &GraphOfGroups,
        base: VertexId,
        edges: Vec<EdgeId>,
        is_loop: bool,
    ) -> Result<EdgePath, GogError> {
        let elems = vec![0; edges.len() + 1];
        EdgePath::new(g, base, elems, edges, is_loop)
    }

    pub fn base(&self) -> VertexId {
        self.base
    }

    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn elems(&self) -> &[Elem] {
        &self.elems
    }

    pub fn is_loop(&self) -> bool {
        self.is_loop
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn end(&self, g: &GraphOfGroups) -> VertexId {
        self.edges.last().map_or(self.base, |&e| g.terminus(e))
    }

    /// Vertex sequence along the path, length `num_edges() + 1`.
    pub fn vertex_seq(&self, g: &GraphOfGroups) -> Vec<VertexId> {
        let mut out = Vec::with_capacity(self.edges.len() + 1);
        out.push(self.base);
        for &e in &self.edges {
            out.push(g.terminus(e));
        }
        out
    }

    /// Total edge length.
    pub fn length(&self, g: &GraphOfGroups) -> Rational {
        self.edges.iter().map(|&e| g.length(e).clone()).sum()
    }

    /// True when the single trivial decoration remains.
    pub fn is_trivial(&self) -> bool {
        self.edges.is_empty() && self.elems == [0]
    }

    pub fn reverse(&self, g: &GraphOfGroups) -> EdgePath {
        let vs = self.vertex_seq(g);
        let elems = self
            .elems
            .iter()
            .enumerate()
            .rev()
            .map(|(i, &x)| g.vertex_group(vs[i]).inv(x))
            .collect();
        let edges = self.edges.iter().rev().map(|&e| reverse(e)).collect();
        EdgePath {
            base: self.end(g),
            elems,
            edges,
            is_loop: self.is_loop,
        }
    }

    /// Concatenation; the junction elements multiply in the common vertex
    /// group. Does not reduce.
    pub fn concat(&self, g: &GraphOfGroups, other: &EdgePath) -> Result<EdgePath, GogError> {
        let mid = self.end(g);
        if other.base != mid {
            return Err(GogError::InconsistentPath(
                "concatenation endpoints do not match".into(),
            ));
        }
        let group = g.vertex_group(mid);
        let mut elems = self.elems.clone();
        let junction = group.mul(*elems.last().unwrap(), other.elems[0]);
        *elems.last_mut().unwrap() = junction;
        elems.extend_from_slice(&other.elems[1..]);
        let mut edges = self.edges.clone();
        edges.extend_from_slice(&other.edges);
        Ok(EdgePath {
            base: self.base,
            elems,
            edges,
            is_loop: self.base == other.end(g),
        })
    }

    /// k-fold concatenation of a loop with itself.
    pub fn pow(&self, g: &GraphOfGroups, k: usize) -> Result<EdgePath, GogError> {
        if !self.is_loop {
            return Err(GogError::NotLoop);
        }
        let mut out = EdgePath::empty(self.base);
        for _ in 0..k {
            out = out.concat(g, self)?;
        }
        Ok(out)
    }

    /// Left-to-right stack reduction; the result carries no subword
    /// `e a_e(c) e~`.
    pub fn reduce(&self, g: &GraphOfGroups) -> EdgePath {
        let mut elems: Vec<Elem> = vec![self.elems[0]];
        let mut edges: Vec<EdgeId> = Vec::new();
        for (i, &e) in self.edges.iter().enumerate() {
            let decoration = self.elems[i + 1];
            let reducible = edges.last().map_or(None, |&top| {
                if e == reverse(top) {
                    g.mono(top).is_in_image(*elems.last().unwrap())
                } else {
                    None
                }
            });
            match reducible {
                Some(c) => {
                    let top = edges.pop().unwrap();
                    elems.pop();
                    let prev = elems.pop().unwrap();
                    let v = g.init(top);
                    let group = g.vertex_group(v);
                    let beta = g.mono(reverse(top)).apply(c);
                    elems.push(group.mul(group.mul(prev, beta), decoration));
                }
                None => {
                    edges.push(e);
                    elems.push(decoration);
                }
            }
        }
        EdgePath {
            base: self.base,
            elems,
            edges,
            is_loop: self.is_loop,
        }
    }

    pub fn is_reduced(&self, g: &GraphOfGroups) -> bool {
        for i in 0..self.edges.len().saturating_sub(1) {
            if self.edges[i + 1] == reverse(self.edges[i])
                && g.mono(self.edges[i]).is_in_image(self.elems[i + 1]).is_some()
            {
                return false;
            }
        }
        true
    }

    /// Reduced with no reducible wrap turn; only meaningful for loops.
    pub fn is_cyclically_reduced(&self, g: &GraphOfGroups) -> bool {
        if !self.is_loop || !self.is_reduced(g) {
            return false;
        }
        if self.edges.is_empty() {
            return true;
        }
        let first = self.edges[0];
        let last = *self.edges.last().unwrap();
        if first != reverse(last) {
            return true;
        }
        let group = g.vertex_group(self.base);
        let wrap = group.mul(*self.elems.last().unwrap(), self.elems[0]);
        g.mono(last).is_in_image(wrap).is_none()
    }

    /// Slide normal form: each decoration except the last is replaced by the
    /// least representative of its left coset modulo the incoming edge-group
    /// image, with the remainder pushed across the edge. Two reduced paths
    /// represent the same based element iff their normal forms agree.
    pub fn slide_normal_form(&self, g: &GraphOfGroups) -> EdgePath {
        let mut elems = self.elems.clone();
        let vs = self.vertex_seq(g);
        for i in 0..self.edges.len() {
            let e = self.edges[i];
            let group = g.vertex_group(vs[i]);
            let mono_back = g.mono(reverse(e));
            // least element of elems[i] * image(mono_back)
            let (c, rep) = mono_back
                .source()
                .elements()
                .map(|c| (c, group.mul(elems[i], mono_back.apply(c))))
                .min_by_key(|&(_, rep)| rep)
                .unwrap();
            elems[i] = rep;
            // elems[i]_old = rep * a_back(c)^{-1}; push a_e(c^{-1}) rightward
            let c_inv = mono_back.source().inv(c);
            let push = g.mono(e).apply(c_inv);
            let next_group = g.vertex_group(vs[i + 1]);
            elems[i + 1] = next_group.mul(push, elems[i + 1]);
        }
        EdgePath {
            base: self.base,
            elems,
            edges: self.edges.clone(),
            is_loop: self.is_loop,
        }
    }

    /// Based equality as elements of the fundamental groupoid.
    pub fn same_element(&self, g: &GraphOfGroups, other: &EdgePath) -> bool {
        if self.base != other.base {
            return false;
        }
        let a = self.reduce(g).slide_normal_form(g);
        let b = other.reduce(g).slide_normal_form(g);
        a.elems == b.elems && a.edges == b.edges
    }

    /// Cyclic reduction of a loop. Returns the reduced representative and a
    /// conjugating path `c` with `self = c * reduced * c^{-1}` as based
    /// elements. An empty edge sequence in the output means the input was
    /// elliptic.
    pub fn cyclic_reduce(&self, g: &GraphOfGroups) -> Result<(ReducedLoop, EdgePath), GogError> {
        if !self.is_loop {
            return Err(GogError::NotLoop);
        }
        let mut cur = self.reduce(g);
        let mut conj = EdgePath::empty(self.base);
        loop {
            if cur.edges.is_empty() || cur.is_cyclically_reduced(g) {
                return Ok((ReducedLoop(cur), conj.reduce(g)));
            }
            // rotate past the first edge and reduce the new wrap
            let e1 = cur.edges[0];
            let g0 = cur.elems[0];
            let step = EdgePath::new(g, cur.base, vec![g0, 0], vec![e1], false)?;
            conj = conj.concat(g, &step)?;
            let k = cur.edges.len();
            let mut elems = Vec::with_capacity(k + 1);
            elems.extend_from_slice(&cur.elems[1..k]);
            let base_group = g.vertex_group(cur.base);
            elems.push(base_group.mul(cur.elems[k], cur.elems[0]));
            elems.push(0);
            let mut edges = cur.edges[1..].to_vec();
            edges.push(e1);
            cur = EdgePath {
                base: g.terminus(e1),
                elems,
                edges,
                is_loop: true,
            }
            .reduce(g);
        }
    }

    /// Total length of the cyclically reduced form; zero iff elliptic.
    pub fn translation_length(&self, g: &GraphOfGroups) -> Result<Rational, GogError> {
        let (reduced, _) = self.cyclic_reduce(g)?;
        Ok(reduced.path().length(g))
    }

    /// Cyclic word `(e_i, d_i)` with the wrap decoration merged into the last
    /// entry; meaningful for cyclically reduced loops.
    pub fn cyclic_word(&self, g: &GraphOfGroups) -> Vec<(EdgeId, Elem)> {
        let k = self.edges.len();
        let mut word = Vec::with_capacity(k);
        for i in 0..k {
            let d = if i + 1 == k {
                g.vertex_group(self.base)
                    .mul(self.elems[k], self.elems[0])
            } else {
                self.elems[i + 1]
            };
            word.push((self.edges[i], d));
        }
        word
    }

    /// Rebuilds a based loop from a cyclic word, with trivial initial
    /// decoration.
    pub fn from_cyclic_word(
        g: &GraphOfGroups,
        word: &[(EdgeId, Elem)],
    ) -> Result<EdgePath, GogError> {
        if word.is_empty() {
            return Err(GogError::InconsistentPath("empty cyclic word".into()));
        }
        let base = g.init(word[0].0);
        let mut elems = vec![0];
        elems.extend(word.iter().map(|&(_, d)| d));
        let edges = word.iter().map(|&(e, _)| e).collect();
        EdgePath::new(g, base, elems, edges, true)
    }

    /// Canonical key of the conjugacy class together with its inverse class:
    /// the lexicographically least rotation of the cyclic word or of the
    /// inverted cyclic word. Used for candidate and brute-force dedup.
    pub fn canonical_key(&self, g: &GraphOfGroups) -> Vec<(EdgeId, Elem)> {
        let word = self.cyclic_word(g);
        let mut best: Option<Vec<(EdgeId, Elem)>> = None;
        for w in [word.clone(), invert_cyclic_word(g, &word)] {
            let k = w.len();
            for r in 0..k {
                let rot: Vec<(EdgeId, Elem)> =
                    (0..k).map(|i| w[(r + i) % k]).collect();
                if best.as_ref().map_or(true, |b| rot < *b) {
                    best = Some(rot);
                }
            }
        }
        best.unwrap_or_default()
    }

    /// Canonical rotation/inversion representative as a based loop.
    pub fn canonical_form(&self, g: &GraphOfGroups) -> EdgePath {
        let key = self.canonical_key(g);
        if key.is_empty() {
            return self.clone();
        }
        EdgePath::from_cyclic_word(g, &key).expect("canonical word is consistent")
    }

    /// Conjugacy key: least rotation over the slide orbit of the cyclic word
    /// (no inversion). Exact conjugacy invariant for hyperbolic loops.
    pub fn conjugacy_key(&self, g: &GraphOfGroups) -> Vec<(EdgeId, Elem)> {
        let word = self.cyclic_word(g);
        let mut seen = std::collections::BTreeSet::new();
        let mut queue = std::collections::VecDeque::from([word]);
        let mut best: Option<Vec<(EdgeId, Elem)>> = None;
        while let Some(w) = queue.pop_front() {
            if !seen.insert(w.clone()) {
                continue;
            }
            if seen.len() > 200_000 {
                break; // orbit cap; desk-scale words stay far below this
            }
            let k = w.len();
            for r in 0..k {
                let rot: Vec<(EdgeId, Elem)> = (0..k).map(|i| w[(r + i) % k]).collect();
                if best.as_ref().map_or(true, |b| rot < *b) {
                    best = Some(rot.clone());
                }
                if !seen.contains(&rot) {
                    queue.push_back(rot);
                }
            }
            // all single slides at each position
            for i in 0..k {
                let e_next = w[(i + 1) % k].0;
                let edge_group = g.edge_group(e_next).clone();
                for c in edge_group.elements() {
                    if c == 0 {
                        continue;
                    }
                    let mut w2 = w.clone();
                    let v = g.init(e_next);
                    let group = g.vertex_group(v);
                    let back = g.mono(reverse(e_next)).apply(c);
                    w2[i].1 = group.mul(w[i].1, back);
                    let fwd = g.mono(e_next).apply(edge_group.inv(c));
                    let next_group = g.vertex_group(g.terminus(e_next));
                    w2[(i + 1) % k].1 = next_group.mul(fwd, w[(i + 1) % k].1);
                    if !seen.contains(&w2) {
                        queue.push_back(w2);
                    }
                }
            }
        }
        best.unwrap_or_default()
    }

    /// Human-readable rendering like `[a0] e1 [a1] ~e2 [a2]` where `~` marks
    /// a reversed edge.
    pub fn display(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("[{}]", self.elems[0]));
        for (i, &e) in self.edges.iter().enumerate() {
            let name = if e % 2 == 0 {
                format!("e{}", e / 2 + 1)
            } else {
                format!("~e{}", e / 2 + 1)
            };
            s.push_str(&format!(" {} [{}]", name, self.elems[i + 1]));
        }
        s
    }
}

/// Inverts a cyclic word: reversed edges in reverse order, decorations
/// inverted and shifted by one position.
pub fn invert_cyclic_word(g: &GraphOfGroups, word: &[(EdgeId, Elem)]) -> Vec<(EdgeId, Elem)> {
    let k = word.len();
    (0..k)
        .map(|j| {
            // j-th edge of the inverse is reverse of edge (k-1-j); its
            // decoration is the inverse of the decoration before that edge.
            let (e, _) = word[k - 1 - j];
            let prev = (k - 1 - j + k - 1) % k; // index k-2-j mod k
            let d_prev = word[prev].1;
            let v = g.init(e);
            (reverse(e), g.vertex_group(v).inv(d_prev))
        })
        .collect()
}

/// A loop together with the certificate that it is cyclically reduced.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ReducedLoop(EdgePath);

impl ReducedLoop {
    /// Cyclically reduces the input, discarding the conjugator.
    pub fn from_loop(g: &GraphOfGroups, p: &EdgePath) -> Result<ReducedLoop, GogError> {
        Ok(p.cyclic_reduce(g)?.0)
    }

    /// Wraps a loop that is already cyclically reduced.
    pub fn assert_reduced(g: &GraphOfGroups, p: EdgePath) -> Result<ReducedLoop, GogError> {
        if !p.is_cyclically_reduced(g) {
            return Err(GogError::InconsistentPath(
                "loop is not cyclically reduced".into(),
            ));
        }
        Ok(ReducedLoop(p))
    }

    pub fn path(&self) -> &EdgePath {
        &self.0
    }

    pub fn into_path(self) -> EdgePath {
        self.0
    }

    pub fn is_hyperbolic(&self) -> bool {
        !self.0.edges.is_empty()
    }

    pub fn length(&self, g: &GraphOfGroups) -> Rational {
        self.0.length(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    fn dihedral_loop(a: Elem, mid: Elem) -> (GraphOfGroups, EdgePath) {
        let g = corpus::dihedral_segment();
        let p = EdgePath::new(&g, 0, vec![a, mid, 0], vec![0, 1], true).unwrap();
        (g, p)
    }

    #[test]
    fn backtrack_reduces_to_empty() {
        let g = corpus::dihedral_segment();
        let p = EdgePath::new(&g, 0, vec![0, 0, 0], vec![0, 1], true).unwrap();
        let r = p.reduce(&g);
        assert!(r.is_trivial());
        assert_eq!(r.base(), 0);
    }

    #[test]
    fn nontrivial_decoration_blocks_reduction() {
        let (g, p) = dihedral_loop(1, 1);
        let r = p.reduce(&g);
        assert_eq!(r.num_edges(), 2);
        assert!(r.is_cyclically_reduced(&g));
    }

    #[test]
    fn edge_group_rewrite_rule() {
        // loop edge with Z/2 edge group at a Z/2 vertex: e a_e(c) e~ -> a_e~(c)
        let g = corpus::loop_with_edge_group_z2();
        let p = EdgePath::new(&g, 0, vec![0, 1, 0], vec![0, 1], true).unwrap();
        let r = p.reduce(&g);
        assert_eq!(r.num_edges(), 0);
        assert_eq!(r.elems(), &[1]);
    }

    #[test]
    fn cyclic_reduce_kills_inner_loop() {
        let (g, p) = dihedral_loop(1, 0);
        let (red, conj) = p.cyclic_reduce(&g).unwrap();
        assert!(!red.is_hyperbolic());
        assert_eq!(p.translation_length(&g).unwrap(), Rational::zero());
        // conjugation identity: p = conj * red * conj^-1 as based elements
        let recombined = conj
            .concat(&g, red.path())
            .unwrap()
            .concat(&g, &conj.reverse(&g))
            .unwrap();
        assert!(recombined.same_element(&g, &p));
    }

    #[test]
    fn dihedral_witness_has_length_two() {
        let (g, p) = dihedral_loop(1, 1);
        assert_eq!(p.translation_length(&g).unwrap(), Rational::int(2));
    }

    #[test]
    fn tripod_barbell_length() {
        let g = corpus::tripod(&[
            Rational::new(1, 3),
            Rational::new(1, 3),
            Rational::new(1, 3),
        ]);
        // leaves are vertices 1,2,3; edges 0(=c->l1),2(=c->l2): loop at l1:
        // a (~e1 e2) b (~e2 e1)
        let p = EdgePath::new(&g, 1, vec![1, 0, 1, 0, 0], vec![1, 2, 3, 0], true).unwrap();
        assert!(p.is_cyclically_reduced(&g));
        assert_eq!(p.translation_length(&g).unwrap(), Rational::new(4, 3));
    }

    #[test]
    fn rotation_gives_same_canonical_form() {
        let (g, p) = dihedral_loop(1, 1);
        // rotate: based at vertex 1: b ~e a e
        let q = EdgePath::new(&g, 1, vec![1, 1, 0], vec![1, 0], true).unwrap();
        assert_eq!(p.canonical_key(&g), q.canonical_key(&g));
        assert_eq!(
            p.canonical_form(&g).canonical_key(&g),
            p.canonical_key(&g)
        );
    }

    #[test]
    fn conjugation_and_power_invariance() {
        let (g, p) = dihedral_loop(1, 1);
        let l = p.translation_length(&g).unwrap();
        for k in 1..=3 {
            let pk = p.pow(&g, k).unwrap();
            let expect = (0..k).map(|_| l.clone()).sum::<Rational>();
            assert_eq!(pk.translation_length(&g).unwrap(), expect);
        }
        // conjugate by a vertex element
        let h = EdgePath::vertex_elem(&g, 0, 1).unwrap();
        let conj = h
            .concat(&g, &p)
            .unwrap()
            .concat(&g, &h.reverse(&g))
            .unwrap();
        assert_eq!(conj.translation_length(&g).unwrap(), l);
    }

    #[test]
    fn reverse_is_involutive_and_inverts() {
        let (g, p) = dihedral_loop(1, 1);
        let rr = p.reverse(&g).reverse(&g);
        assert_eq!(rr, p);
        let prod = p.concat(&g, &p.reverse(&g)).unwrap().reduce(&g);
        assert!(prod.is_trivial());
    }

    #[test]
    fn slide_normal_form_identifies_slid_words() {
        let g = corpus::loop_with_edge_group_z2();
        // e * a_e(1) ... versus slid variant a_e~(1) * e
        let p = EdgePath::new(&g, 0, vec![0, 1, 0], vec![0, 0], true).unwrap();
        let q = EdgePath::new(&g, 0, vec![1, 0, 0], vec![0, 0], true).unwrap();
        assert!(p.same_element(&g, &q));
        assert_eq!(p.conjugacy_key(&g), q.conjugacy_key(&g));
    }

    #[test]
    fn inconsistent_paths_are_rejected() {
        let g = corpus::dihedral_segment();
        assert!(EdgePath::new(&g, 0, vec![0, 0], vec![1], false).is_err()); // wrong start
        assert!(EdgePath::new(&g, 0, vec![0], vec![0], false).is_err()); // wrong arity
        assert!(EdgePath::new(&g, 0, vec![0, 0], vec![0], true).is_err()); // not a loop
        assert!(EdgePath::new(&g, 0, vec![2, 0], vec![0], false).is_err()); // elem range
    }
}
