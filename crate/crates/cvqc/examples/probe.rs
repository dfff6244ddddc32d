use cvqc::resources::*;
fn main() {
    for d in [64usize, 72, 80, 96] {
        let r = build_resource(&ResourceSpec { kind: ResourceKind::Gkp { r: 1.0, w: 2.0, m: 3 }, cutoff: d });
        match r {
            Ok(st) => println!("d={d}: ok, weight {:.4e}", st.weight()),
            Err(e) => println!("d={d}: {e}"),
        }
    }
}
