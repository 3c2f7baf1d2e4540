//! Standard example graphs and maps used throughout the test suites and the
//! documentation: an infinite-dihedral segment, tripods and caterpillars over
//! Z/2 * Z/2 * Z/2, a rose with torsion, K_{2,3}, and a free-group barbell.
//!
//! Vertex and edge numbering is part of the contract: tests and golden files
//! rely on it.

use crate::fingroup::FiniteGroup;
use crate::gog::GraphOfGroups;
use crate::morphism::GoGMap;
use crate::path::EdgePath;
use crate::ratio::Rational;

/// Two Z/2 vertices joined by an edge with trivial edge group, length 1.
/// Fundamental group: the infinite dihedral group.
pub fn dihedral_segment() -> GraphOfGroups {
    let z2 = FiniteGroup::cyclic(2).unwrap();
    let triv = FiniteGroup::trivial();
    let mut g = GraphOfGroups::new(vec![z2.clone(), z2]);
    g.add_edge(0, 1, Rational::one(), triv, vec![0], vec![0])
        .unwrap();
    g
}

/// Trivial center (vertex 0) with three Z/2 leaves (vertices 1..4); edge i
/// runs center -> leaf i with trivial edge group and the given length.
pub fn tripod(lengths: &[Rational; 3]) -> GraphOfGroups {
    let z2 = FiniteGroup::cyclic(2).unwrap();
    let triv = FiniteGroup::trivial();
    let mut g = GraphOfGroups::new(vec![triv.clone(), z2.clone(), z2.clone(), z2]);
    for (i, len) in lengths.iter().enumerate() {
        g.add_edge(0, i + 1, len.clone(), triv.clone(), vec![0], vec![0])
            .unwrap();
    }
    g
}

pub fn unit_tripod() -> GraphOfGroups {
    tripod(&[
        Rational::new(1, 3),
        Rational::new(1, 3),
        Rational::new(1, 3),
    ])
}

/// Z/2 center (vertex 0) with two Z/2 leaves; trivial edge groups. This is
/// the collapse of a tripod edge and is reduced.
pub fn spider() -> GraphOfGroups {
    let z2 = FiniteGroup::cyclic(2).unwrap();
    let triv = FiniteGroup::trivial();
    let mut g = GraphOfGroups::new(vec![z2.clone(), z2.clone(), z2]);
    g.add_edge(0, 1, Rational::new(1, 2), triv.clone(), vec![0], vec![0])
        .unwrap();
    g.add_edge(0, 2, Rational::new(1, 2), triv, vec![0], vec![0])
        .unwrap();
    g
}

/// Segment v0 - v1 - v2 with Z/2 at every vertex and trivial edge groups.
pub fn caterpillar(lengths: &[Rational; 2]) -> GraphOfGroups {
    let z2 = FiniteGroup::cyclic(2).unwrap();
    let triv = FiniteGroup::trivial();
    let mut g = GraphOfGroups::new(vec![z2.clone(), z2.clone(), z2]);
    g.add_edge(0, 1, lengths[0].clone(), triv.clone(), vec![0], vec![0])
        .unwrap();
    g.add_edge(1, 2, lengths[1].clone(), triv, vec![0], vec![0])
        .unwrap();
    g
}

pub fn unit_caterpillar() -> GraphOfGroups {
    caterpillar(&[Rational::new(1, 2), Rational::new(1, 2)])
}

/// One Z/2 vertex with a single loop of length 1 and trivial edge group.
/// Fundamental group: Z/2 * Z.
pub fn rose_z2() -> GraphOfGroups {
    let z2 = FiniteGroup::cyclic(2).unwrap();
    let triv = FiniteGroup::trivial();
    let mut g = GraphOfGroups::new(vec![z2]);
    g.add_edge(0, 0, Rational::one(), triv, vec![0], vec![0])
        .unwrap();
    g
}

/// One Z/2 vertex with a loop whose edge group is the whole Z/2.
pub fn loop_with_edge_group_z2() -> GraphOfGroups {
    let z2 = FiniteGroup::cyclic(2).unwrap();
    let mut g = GraphOfGroups::new(vec![z2.clone()]);
    g.add_edge(0, 0, Rational::one(), z2, vec![0, 1], vec![0, 1])
        .unwrap();
    g
}

/// Complete bipartite graph on parts {0, 1} and {2, 3, 4} with trivial
/// groups and edge length 1/6; free of rank 2. Edge k runs part-one vertex
/// k/3 to part-two vertex 2 + k%3.
pub fn k23() -> GraphOfGroups {
    let triv = FiniteGroup::trivial();
    let mut g = GraphOfGroups::new(vec![triv.clone(); 5]);
    for u in 0..2 {
        for w in 2..5 {
            g.add_edge(u, w, Rational::new(1, 6), triv.clone(), vec![0], vec![0])
                .unwrap();
        }
    }
    g
}

/// Two loops joined by a segment, all groups trivial: edge 0 is the loop at
/// vertex 0, edge 1 the separating segment, edge 2 the loop at vertex 1.
/// Fundamental group: free of rank 2.
pub fn barbell_free() -> GraphOfGroups {
    let triv = FiniteGroup::trivial();
    let mut g = GraphOfGroups::new(vec![triv.clone(), triv.clone()]);
    g.add_edge(0, 0, Rational::new(1, 3), triv.clone(), vec![0], vec![0])
        .unwrap();
    g.add_edge(0, 1, Rational::new(1, 3), triv.clone(), vec![0], vec![0])
        .unwrap();
    g.add_edge(1, 1, Rational::new(1, 3), triv, vec![0], vec![0])
        .unwrap();
    g
}

/// The tripod with lengths (1/2, 1/4, 1/4); paired with `unit_tripod` via the
/// identity marking this realizes the stretch factor 9/8.
pub fn tripod_b() -> GraphOfGroups {
    tripod(&[
        Rational::new(1, 2),
        Rational::new(1, 4),
        Rational::new(1, 4),
    ])
}

/// Identity marking from the unit tripod to the (1/2, 1/4, 1/4) tripod.
pub fn tripod_pair() -> GoGMap {
    GoGMap::identity_marking(&unit_tripod(), &tripod_b()).unwrap()
}

/// The marking difference sending caterpillar vertex i to tripod leaf i and
/// edge e_i across the tripod center: e1 -> ~e1' e2', e2 -> ~e2' e3'.
pub fn caterpillar_to_tripod() -> GoGMap {
    let cat = unit_caterpillar();
    let tri = unit_tripod();
    let z2 = FiniteGroup::cyclic(2).unwrap();
    let homs = vec![
        crate::fingroup::GroupHom::new(z2.clone(), tri.vertex_group(1).clone(), vec![0, 1]).unwrap(),
        crate::fingroup::GroupHom::new(z2.clone(), tri.vertex_group(2).clone(), vec![0, 1]).unwrap(),
        crate::fingroup::GroupHom::new(z2, tri.vertex_group(3).clone(), vec![0, 1]).unwrap(),
    ];
    let e1 = EdgePath::from_edges(&tri, 1, vec![1, 2], false).unwrap();
    let e2 = EdgePath::from_edges(&tri, 2, vec![3, 4], false).unwrap();
    GoGMap::new(cat, tri, vec![1, 2, 3], homs, vec![e1, e2]).unwrap()
}

/// The homotopy inverse of `caterpillar_to_tripod`: the tripod center lands
/// on the middle caterpillar vertex and the middle tripod edge collapses.
pub fn tripod_to_caterpillar() -> GoGMap {
    let tri = unit_tripod();
    let cat = unit_caterpillar();
    let z2 = FiniteGroup::cyclic(2).unwrap();
    let triv = FiniteGroup::trivial();
    let homs = vec![
        crate::fingroup::GroupHom::new(triv, cat.vertex_group(1).clone(), vec![0]).unwrap(),
        crate::fingroup::GroupHom::new(z2.clone(), cat.vertex_group(0).clone(), vec![0, 1]).unwrap(),
        crate::fingroup::GroupHom::new(z2.clone(), cat.vertex_group(1).clone(), vec![0, 1]).unwrap(),
        crate::fingroup::GroupHom::new(z2, cat.vertex_group(2).clone(), vec![0, 1]).unwrap(),
    ];
    let e1 = EdgePath::from_edges(&cat, 1, vec![1], false).unwrap();
    let e2 = EdgePath::new(&cat, 1, vec![0], vec![], false).unwrap();
    let e3 = EdgePath::from_edges(&cat, 1, vec![2], false).unwrap();
    GoGMap::new(tri, cat, vec![1, 0, 1, 2], homs, vec![e1, e2, e3]).unwrap()
}
