//! Finite groups given by multiplication tables.
//!
//! Elements are dense indices `0..order` with the identity fixed at index 0;
//! all stabilizer arithmetic in the rest of the crate routes through these
//! tables. Groups are immutable after construction and shared via `Arc`.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Index of a group element inside its multiplication table.
pub type Elem = usize;

/// Default cap on group orders; the stabilizers we need are small.
pub const MAX_GROUP_ORDER: usize = 64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GroupError {
    #[error("table is not square at row {0}")]
    NotSquare(usize),
    #[error("table entry out of range at ({0}, {1})")]
    EntryOutOfRange(usize, usize),
    #[error("row or column 0 is not the identity at element {0}")]
    BadIdentity(Elem),
    #[error("element {0} has no two-sided inverse")]
    MissingInverse(Elem),
    #[error("associativity fails at triple ({0}, {1}, {2})")]
    NonAssociative(Elem, Elem, Elem),
    #[error("group order {0} exceeds cap {MAX_GROUP_ORDER}")]
    OrderTooLarge(usize),
    #[error("empty multiplication table")]
    Empty,
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("element {0} out of range for group of order {1}")]
    ElementOutOfRange(Elem, usize),
    #[error("subgroup parent does not match the ambient group")]
    SubgroupParentMismatch,
    #[error("element set is not closed under multiplication and inverse")]
    NotClosed,
    #[error("image table has wrong length {0} for source of order {1}")]
    BadHomLength(usize, usize),
    #[error("not a homomorphism: image({0}*{1}) != image({0})*image({1})")]
    NotHomomorphism(Elem, Elem),
}

/// A finite group presented by its full multiplication table.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FiniteGroup {
    order: usize,
    table: Vec<Elem>, // row-major: table[a * order + b] = a * b
    inverse: Vec<Elem>,
    name: Option<String>,
}

/// Shared handle; groups are compared by table, not by pointer.
pub type GroupRef = Arc<FiniteGroup>;

impl fmt::Debug for FiniteGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.name {
            Some(n) => write!(f, "FiniteGroup({n}, order {})", self.order),
            None => write!(f, "FiniteGroup(order {})", self.order),
        }
    }
}

impl FiniteGroup {
    /// Validates a multiplication table and builds the group.
    pub fn from_table(rows: Vec<Vec<Elem>>) -> Result<Self, GroupError> {
        let order = rows.len();
        if order == 0 {
            return Err(GroupError::Empty);
        }
        if order > MAX_GROUP_ORDER {
            return Err(GroupError::OrderTooLarge(order));
        }
        let mut table = Vec::with_capacity(order * order);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != order {
                return Err(GroupError::NotSquare(i));
            }
            for (j, &v) in row.iter().enumerate() {
                if v >= order {
                    return Err(GroupError::EntryOutOfRange(i, j));
                }
                table.push(v);
            }
        }
        for x in 0..order {
            if table[x] != x || table[x * order] != x {
                return Err(GroupError::BadIdentity(x));
            }
        }
        let mut inverse = vec![usize::MAX; order];
        for x in 0..order {
            let mut found = None;
            for y in 0..order {
                if table[x * order + y] == 0 && table[y * order + x] == 0 {
                    found = Some(y);
                    break;
                }
            }
            inverse[x] = found.ok_or(GroupError::MissingInverse(x))?;
        }
        for a in 0..order {
            for b in 0..order {
                for c in 0..order {
                    let ab_c = table[table[a * order + b] * order + c];
                    let a_bc = table[a * order + table[b * order + c]];
                    if ab_c != a_bc {
                        return Err(GroupError::NonAssociative(a, b, c));
                    }
                }
            }
        }
        Ok(FiniteGroup {
            order,
            table,
            inverse,
            name: None,
        })
    }

    fn named(mut self, name: &str) -> Self {
        self.name = Some(name.to_string());
        self
    }

    /// The trivial group.
    pub fn trivial() -> GroupRef {
        Arc::new(FiniteGroup::from_table(vec![vec![0]]).unwrap().named("trivial"))
    }

    /// Cyclic group of order n, element i = i-fold power of the generator.
    pub fn cyclic(n: usize) -> Result<GroupRef, GroupError> {
        if n == 0 {
            return Err(GroupError::Empty);
        }
        let rows = (0..n)
            .map(|a| (0..n).map(|b| (a + b) % n).collect())
            .collect();
        Ok(Arc::new(
            FiniteGroup::from_table(rows)?.named(&format!("cyclic({n})")),
        ))
    }

    /// Klein four-group; elements (0,0),(1,0),(0,1),(1,1) indexed 0..4, xor law.
    pub fn klein4() -> GroupRef {
        let rows = (0..4).map(|a| (0..4).map(|b| a ^ b).collect()).collect();
        Arc::new(FiniteGroup::from_table(rows).unwrap().named("klein4"))
    }

    /// Symmetric group on n letters, n <= 4. Elements are the permutations of
    /// 0..n in lexicographic one-line order (identity first); the product
    /// `s*t` acts as "t then s", i.e. (s*t)(x) = s(t(x)).
    pub fn symmetric(n: usize) -> Result<GroupRef, GroupError> {
        if n == 0 || n > 4 {
            return Err(GroupError::UnknownPreset(format!("symmetric({n})")));
        }
        let perms = permutations(n);
        let index = |p: &Vec<usize>| perms.iter().position(|q| q == p).unwrap();
        let rows = perms
            .iter()
            .map(|s| {
                perms
                    .iter()
                    .map(|t| {
                        let st: Vec<usize> = (0..n).map(|x| s[t[x]]).collect();
                        index(&st)
                    })
                    .collect()
            })
            .collect();
        Ok(Arc::new(
            FiniteGroup::from_table(rows)?.named(&format!("symmetric({n})")),
        ))
    }

    /// Dihedral group of order 2n, n <= 6. Element i < n is the rotation r^i,
    /// element n + i is the reflection s r^i; relations s^2 = r^n = 1, s r s = r^-1.
    pub fn dihedral(n: usize) -> Result<GroupRef, GroupError> {
        if n == 0 || n > 6 {
            return Err(GroupError::UnknownPreset(format!("dihedral({n})")));
        }
        let order = 2 * n;
        let mul = |a: usize, b: usize| -> usize {
            let (ar, ai) = (a >= n, a % n);
            let (br, bi) = (b >= n, b % n);
            // (s^ar r^ai)(s^br r^bi) = s^(ar+br) r^(±ai + bi)
            let i = if br { (n - ai) % n + bi } else { ai + bi } % n;
            if ar ^ br {
                n + i
            } else {
                i
            }
        };
        let rows = (0..order)
            .map(|a| (0..order).map(|b| mul(a, b)).collect())
            .collect();
        Ok(Arc::new(
            FiniteGroup::from_table(rows)?.named(&format!("dihedral({n})")),
        ))
    }

    /// Builds a preset by name, e.g. `cyclic(3)`, `symmetric(4)`, `klein4`.
    pub fn preset(spec: &str) -> Result<GroupRef, GroupError> {
        let spec = spec.trim();
        if spec == "trivial" || spec == "cyclic(1)" {
            return Ok(FiniteGroup::trivial());
        }
        if spec == "klein4" {
            return Ok(FiniteGroup::klein4());
        }
        for (prefix, f) in [
            ("cyclic", FiniteGroup::cyclic as fn(usize) -> Result<GroupRef, GroupError>),
            ("symmetric", FiniteGroup::symmetric),
            ("dihedral", FiniteGroup::dihedral),
        ] {
            if let Some(rest) = spec.strip_prefix(prefix) {
                if let Some(arg) = rest.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
                    let n: usize = arg
                        .trim()
                        .parse()
                        .map_err(|_| GroupError::UnknownPreset(spec.to_string()))?;
                    return f(n);
                }
            }
        }
        Err(GroupError::UnknownPreset(spec.to_string()))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn is_trivial(&self) -> bool {
        self.order == 1
    }

    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        self.table[a * self.order + b]
    }

    pub fn inv(&self, a: Elem) -> Elem {
        self.inverse[a]
    }

    pub fn conj(&self, g: Elem, x: Elem) -> Elem {
        self.mul(self.mul(g, x), self.inv(g))
    }

    pub fn elements(&self) -> impl Iterator<Item = Elem> {
        0..self.order
    }

    pub fn is_abelian(&self) -> bool {
        (0..self.order).all(|a| (0..self.order).all(|b| self.mul(a, b) == self.mul(b, a)))
    }

    pub fn table_rows(&self) -> Vec<Vec<Elem>> {
        (0..self.order)
            .map(|a| self.table[a * self.order..(a + 1) * self.order].to_vec())
            .collect()
    }

    /// Identity hom G -> G.
    pub fn identity_hom(this: &GroupRef) -> GroupHom {
        GroupHom::new(this.clone(), this.clone(), (0..this.order).collect()).unwrap()
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::new();
        for p in &out {
            for x in 0..n {
                if !p.contains(&x) {
                    let mut q = p.clone();
                    q.push(x);
                    next.push(q);
                }
            }
        }
        out = next;
    }
    out.sort();
    out
}

/// Entry point matching the CLI input format: either a full table or a preset.
pub fn make_group(spec: &GroupSpec) -> Result<GroupRef, GroupError> {
    match spec {
        GroupSpec::Preset(name) => FiniteGroup::preset(name),
        GroupSpec::Table(rows) => Ok(Arc::new(FiniteGroup::from_table(rows.clone())?)),
    }
}

/// Raw group description as it appears in input files.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupSpec {
    Preset(String),
    Table(Vec<Vec<Elem>>),
}

/// A subgroup, stored as a sorted element set of its parent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subgroup {
    parent: GroupRef,
    elements: Vec<Elem>,
}

impl Subgroup {
    /// Least subgroup of `group` containing `gens`.
    pub fn closure(group: &GroupRef, gens: &[Elem]) -> Result<Subgroup, GroupError> {
        for &g in gens {
            if g >= group.order() {
                return Err(GroupError::ElementOutOfRange(g, group.order()));
            }
        }
        let mut gen_set: BTreeSet<Elem> = gens.iter().copied().collect();
        for &g in gens {
            gen_set.insert(group.inv(g));
        }
        let mut seen: BTreeSet<Elem> = BTreeSet::new();
        seen.insert(0);
        let mut queue: VecDeque<Elem> = VecDeque::from([0]);
        while let Some(x) = queue.pop_front() {
            for &g in &gen_set {
                let y = group.mul(x, g);
                if seen.insert(y) {
                    queue.push_back(y);
                }
            }
        }
        Ok(Subgroup {
            parent: group.clone(),
            elements: seen.into_iter().collect(),
        })
    }

    /// Accepts an explicit element set, verifying closure and Lagrange.
    pub fn from_elements(group: &GroupRef, elems: &[Elem]) -> Result<Subgroup, GroupError> {
        let sub = Subgroup::closure(group, elems)?;
        let mut with_id: BTreeSet<Elem> = elems.iter().copied().collect();
        with_id.insert(0);
        if sub.elements.len() != with_id.len() {
            return Err(GroupError::NotClosed);
        }
        Ok(sub)
    }

    pub fn trivial(group: &GroupRef) -> Subgroup {
        Subgroup::closure(group, &[]).unwrap()
    }

    pub fn whole(group: &GroupRef) -> Subgroup {
        Subgroup {
            parent: group.clone(),
            elements: (0..group.order()).collect(),
        }
    }

    pub fn parent(&self) -> &GroupRef {
        &self.parent
    }

    pub fn elements(&self) -> &[Elem] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn contains(&self, g: Elem) -> bool {
        self.elements.binary_search(&g).is_ok()
    }

    pub fn is_whole(&self) -> bool {
        self.order() == self.parent.order()
    }
}

/// Decomposes Q into double cosets P q R, ordered by least element.
pub fn double_cosets(
    q: &GroupRef,
    p: &Subgroup,
    r: &Subgroup,
) -> Result<Vec<Vec<Elem>>, GroupError> {
    if p.parent().as_ref() != q.as_ref() || r.parent().as_ref() != q.as_ref() {
        return Err(GroupError::SubgroupParentMismatch);
    }
    let mut remaining: BTreeSet<Elem> = q.elements().collect();
    let mut out = Vec::new();
    while let Some(&least) = remaining.iter().next() {
        let mut class = BTreeSet::new();
        for &a in p.elements() {
            for &b in r.elements() {
                class.insert(q.mul(q.mul(a, least), b));
            }
        }
        for x in &class {
            remaining.remove(x);
        }
        out.push(class.into_iter().collect());
    }
    Ok(out)
}

/// A homomorphism between finite groups, stored as its full image table.
#[derive(Clone, PartialEq, Eq)]
pub struct GroupHom {
    source: GroupRef,
    target: GroupRef,
    image: Vec<Elem>,
    injective: bool,
}

impl fmt::Debug for GroupHom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupHom({:?})", self.image)
    }
}

impl GroupHom {
    pub fn new(source: GroupRef, target: GroupRef, image: Vec<Elem>) -> Result<Self, GroupError> {
        if image.len() != source.order() {
            return Err(GroupError::BadHomLength(image.len(), source.order()));
        }
        for &v in &image {
            if v >= target.order() {
                return Err(GroupError::ElementOutOfRange(v, target.order()));
            }
        }
        for a in source.elements() {
            for b in source.elements() {
                if image[source.mul(a, b)] != target.mul(image[a], image[b]) {
                    return Err(GroupError::NotHomomorphism(a, b));
                }
            }
        }
        let distinct: BTreeSet<Elem> = image.iter().copied().collect();
        let injective = distinct.len() == source.order();
        Ok(GroupHom {
            source,
            target,
            image,
            injective,
        })
    }

    /// Embedding of a subgroup as an abstract group: element i of the result
    /// is `sub.elements()[i]`.
    pub fn subgroup_inclusion(sub: &Subgroup) -> (GroupRef, GroupHom) {
        let elems = sub.elements();
        let pos = |x: Elem| elems.binary_search(&x).unwrap();
        let rows: Vec<Vec<Elem>> = elems
            .iter()
            .map(|&a| elems.iter().map(|&b| pos(sub.parent().mul(a, b))).collect())
            .collect();
        let abstract_group = Arc::new(FiniteGroup::from_table(rows).unwrap());
        let hom = GroupHom::new(abstract_group.clone(), sub.parent().clone(), elems.to_vec())
            .unwrap();
        (abstract_group, hom)
    }

    pub fn source(&self) -> &GroupRef {
        &self.source
    }

    pub fn target(&self) -> &GroupRef {
        &self.target
    }

    pub fn apply(&self, g: Elem) -> Elem {
        self.image[g]
    }

    pub fn is_injective(&self) -> bool {
        self.injective
    }

    pub fn image_table(&self) -> &[Elem] {
        &self.image
    }

    /// Sorted image set.
    pub fn image_set(&self) -> Vec<Elem> {
        let set: BTreeSet<Elem> = self.image.iter().copied().collect();
        set.into_iter().collect()
    }

    /// Membership with a preimage witness.
    pub fn is_in_image(&self, g: Elem) -> Option<Elem> {
        self.image.iter().position(|&v| v == g)
    }

    /// Compose `self` after `inner`.
    pub fn compose(&self, inner: &GroupHom) -> GroupHom {
        debug_assert_eq!(inner.target.as_ref(), self.source.as_ref());
        GroupHom::new(
            inner.source.clone(),
            self.target.clone(),
            inner.image.iter().map(|&g| self.image[g]).collect(),
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_two_from_table() {
        let g = FiniteGroup::from_table(vec![vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(g.order(), 2);
        assert_eq!(g.inv(1), 1);
    }

    #[test]
    fn symmetric_3_is_nonabelian_of_order_6() {
        let s3 = FiniteGroup::symmetric(3).unwrap();
        assert_eq!(s3.order(), 6);
        assert!(!s3.is_abelian());
    }

    #[test]
    fn missing_inverse_reported() {
        let err = FiniteGroup::from_table(vec![vec![0, 1], vec![1, 1]]).unwrap_err();
        assert_eq!(err, GroupError::MissingInverse(1));
    }

    #[test]
    fn bad_identity_reported() {
        let err = FiniteGroup::from_table(vec![vec![1, 0], vec![0, 1]]).unwrap_err();
        assert_eq!(err, GroupError::BadIdentity(0));
    }

    #[test]
    fn group_axioms_hold_for_presets_up_to_order_12() {
        let groups = [
            FiniteGroup::trivial(),
            FiniteGroup::cyclic(7).unwrap(),
            FiniteGroup::cyclic(12).unwrap(),
            FiniteGroup::klein4(),
            FiniteGroup::symmetric(3).unwrap(),
            FiniteGroup::dihedral(6).unwrap(),
        ];
        for g in groups {
            // from_table already verified the axioms; spot-check inverses too
            for a in g.elements() {
                assert_eq!(g.mul(a, g.inv(a)), 0);
                assert_eq!(g.mul(g.inv(a), a), 0);
            }
        }
    }

    #[test]
    fn empty_closure_is_trivial() {
        let z2 = FiniteGroup::cyclic(2).unwrap();
        let sub = Subgroup::closure(&z2, &[]).unwrap();
        assert_eq!(sub.elements(), &[0]);
    }

    #[test]
    fn transposition_generates_order_two() {
        let s3 = FiniteGroup::symmetric(3).unwrap();
        // one-line perms of {0,1,2} lex sorted: 012,021,102,120,201,210
        // index 1 = (12) as a transposition of letters 1,2
        let sub = Subgroup::closure(&s3, &[1]).unwrap();
        assert_eq!(sub.order(), 2);
    }

    #[test]
    fn klein4_generated_by_two_involutions() {
        // expected value derived by closing {(1,0),(0,1)} by hand: all 4 elements
        let k4 = FiniteGroup::klein4();
        let sub = Subgroup::closure(&k4, &[1, 2]).unwrap();
        assert_eq!(sub.order(), 4);
    }

    #[test]
    fn double_cosets_z2_whole() {
        let z2 = FiniteGroup::cyclic(2).unwrap();
        let p = Subgroup::trivial(&z2);
        let r = Subgroup::whole(&z2);
        let classes = double_cosets(&z2, &p, &r).unwrap();
        assert_eq!(classes, vec![vec![0, 1]]);
    }

    #[test]
    fn double_cosets_klein4_two_lines() {
        // derived by enumerating the 4 products by hand: a single class
        let k4 = FiniteGroup::klein4();
        let p = Subgroup::closure(&k4, &[1]).unwrap();
        let r = Subgroup::closure(&k4, &[2]).unwrap();
        let classes = double_cosets(&k4, &p, &r).unwrap();
        assert_eq!(classes, vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn double_cosets_s3_transposition_both_sides() {
        // derived by brute force over the 6 elements: classes {e,(12)} and the rest
        let s3 = FiniteGroup::symmetric(3).unwrap();
        let p = Subgroup::closure(&s3, &[1]).unwrap();
        let classes = double_cosets(&s3, &p, &p).unwrap();
        let sizes: Vec<usize> = classes.iter().map(|c| c.len()).collect();
        assert_eq!(sizes, vec![2, 4]);
    }

    #[test]
    fn double_coset_partition_and_size_identity() {
        // |PqR| = |P||R| / |P ∩ qRq^-1|, and the classes partition Q
        let q = FiniteGroup::dihedral(4).unwrap();
        let p = Subgroup::closure(&q, &[4]).unwrap();
        let r = Subgroup::closure(&q, &[1]).unwrap();
        let classes = double_cosets(&q, &p, &r).unwrap();
        let mut all: Vec<Elem> = classes.iter().flatten().copied().collect();
        all.sort();
        assert_eq!(all, (0..q.order()).collect::<Vec<_>>());
        for class in &classes {
            let least = class[0];
            let conj: Vec<Elem> = r
                .elements()
                .iter()
                .map(|&x| q.mul(q.mul(least, x), q.inv(least)))
                .collect();
            let inter = p.elements().iter().filter(|e| conj.contains(e)).count();
            assert_eq!(class.len(), p.order() * r.order() / inter);
        }
    }

    #[test]
    fn hom_image_queries() {
        let z2 = FiniteGroup::cyclic(2).unwrap();
        let triv = FiniteGroup::trivial();
        let into_z2 = GroupHom::new(triv.clone(), z2.clone(), vec![0]).unwrap();
        assert_eq!(into_z2.is_in_image(0), Some(0));
        assert_eq!(into_z2.is_in_image(1), None);

        let s3 = FiniteGroup::symmetric(3).unwrap();
        // Z/2 onto <(12)> = {identity, index 1}
        let onto_12 = GroupHom::new(z2, s3, vec![0, 1]).unwrap();
        assert!(onto_12.is_injective());
        // (123) in lex order is one-line 120 = index 3
        assert_eq!(onto_12.is_in_image(3), None);
    }

    #[test]
    fn hom_rejects_non_homomorphism() {
        let z4 = FiniteGroup::cyclic(4).unwrap();
        let z2 = FiniteGroup::cyclic(2).unwrap();
        assert!(GroupHom::new(z4.clone(), z2.clone(), vec![0, 1, 0, 1]).is_ok());
        assert!(GroupHom::new(z4, z2, vec![0, 1, 1, 0]).is_err());
    }

    #[test]
    fn subgroup_inclusion_produces_valid_group() {
        let s3 = FiniteGroup::symmetric(3).unwrap();
        let sub = Subgroup::closure(&s3, &[3]).unwrap(); // <(123)>, order 3
        assert_eq!(sub.order(), 3);
        let (abs, inc) = GroupHom::subgroup_inclusion(&sub);
        assert_eq!(abs.order(), 3);
        assert!(inc.is_injective());
        for a in abs.elements() {
            for b in abs.elements() {
                assert_eq!(
                    inc.apply(abs.mul(a, b)),
                    s3.mul(inc.apply(a), inc.apply(b))
                );
            }
        }
    }
}
