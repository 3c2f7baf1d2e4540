use arbor_core::cover::*;
use arbor_core::fingroup::*;
use arbor_core::*;

fn main() {
    let r = corpus::tripod_to_caterpillar();
    let g = r.source().clone();
    let z2 = FiniteGroup::cyclic(2).unwrap();
    let rho_c = GroupHom::new(g.vertex_group(0).clone(), z2.clone(), vec![0]).unwrap();
    let rho_leaf =
        |v: usize| GroupHom::new(g.vertex_group(v).clone(), z2.clone(), vec![0, 1]).unwrap();
    let homs = vec![rho_c, rho_leaf(1), rho_leaf(2), rho_leaf(3)];
    let tq = FiniteQuotient::new(g, z2, vec![0, 1, 2], homs, vec![0, 0, 0]).unwrap();
    let p = Subgroup::trivial(tq.group());
    let qt = transport_quotient(&r, &tq).unwrap();
    println!("tree {:?}", qt.tree());
    for v in 0..r.target().num_vertices() {
        println!("rho'_{v}: {:?}", qt.vertex_rho(v).image_table());
    }
    let src = build_cover(&tq, &p).unwrap();
    let tgt = build_cover(&qt, &p).unwrap();
    for cv in 0..src.cover.num_vertices() {
        println!("src sheet {cv}: over {} label {}", src.projection.vertex_image(cv), src.vertex_label(cv));
    }
    for cv in 0..tgt.cover.num_vertices() {
        println!("tgt sheet {cv}: over {} label {}", tgt.projection.vertex_image(cv), tgt.vertex_label(cv));
    }
    match push_map_to_cover(&r, &tq, &p) {
        Ok((lifted, _, _, _)) => {
            println!("push ok, lip = {}", lifted.lipschitz_constant().unwrap())
        }
        Err(e) => println!("push error: {e}"),
    }
}
