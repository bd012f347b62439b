use std::collections::BTreeSet;
use std::f64::consts::PI;

use abdisk::mesh::{
    build_full_disk_mesh, build_half_disk_mesh, mesh_statistics, BoundaryTag, Mesh,
};
use proptest::prelude::*;

fn tagged_edges(m: &Mesh, tag: BoundaryTag) -> BTreeSet<(u64, u64, u64, u64)> {
    m.boundary_edges
        .iter()
        .filter(|e| e.tag == tag)
        .map(|e| {
            let (p, q) = (m.vertices[e.v[0]], m.vertices[e.v[1]]);
            let key = |x: f64| x.to_bits();
            let (a, b) = if (p[0], p[1]) < (q[0], q[1]) {
                (p, q)
            } else {
                (q, p)
            };
            (key(a[0]), key(a[1]), key(b[0]), key(b[1]))
        })
        .collect()
}

fn mirrored_coords(set: &BTreeSet<(u64, u64, u64, u64)>) -> BTreeSet<(u64, u64, u64, u64)> {
    set.iter()
        .map(|&(ax, ay, bx, by)| {
            let flip = |x: u64| {
                let v = f64::from_bits(x);
                if v == 0.0 {
                    0.0f64.to_bits()
                } else {
                    (-v).to_bits()
                }
            };
            let a = (f64::from_bits(flip(ax)), f64::from_bits(ay));
            let b = (f64::from_bits(flip(bx)), f64::from_bits(by));
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            (a.0.to_bits(), a.1.to_bits(), b.0.to_bits(), b.1.to_bits())
        })
        .collect()
}

#[test]
fn coarse_half_disk_examples() {
    let m = build_half_disk_mesh(0.0, 3, 0).unwrap();
    let s = mesh_statistics(&m);
    assert!((s.area - PI / 2.0).abs() < 0.02);
    assert_eq!(s.n_triangles % 2, 0);
    assert!(s.min_angle > 0.0);

    let m = build_half_disk_mesh(0.5, 4, 3).unwrap();
    let at_split: Vec<_> = m
        .vertices
        .iter()
        .filter(|p| p[0] == 0.5 && p[1] == 0.0)
        .collect();
    assert_eq!(at_split.len(), 1);
}

#[test]
fn graded_tip_is_resolved() {
    let m = build_half_disk_mesh(0.0, 3, 4).unwrap();
    let tip = m.vertices[m.tip.unwrap()];
    let nearest = m
        .vertices
        .iter()
        .filter(|p| **p != tip)
        .map(|p| (p[0] - tip[0]).hypot(p[1] - tip[1]))
        .fold(f64::INFINITY, f64::min);
    assert!(nearest <= 0.25 / 16.0, "nearest {nearest}");
    assert!(mesh_statistics(&m).min_angle >= 20.0);
}

#[test]
fn full_disk_examples() {
    let m = build_full_disk_mesh(3, true).unwrap();
    let pairing = m.symmetry_pairing.as_ref().unwrap();
    for (v, &w) in pairing.iter().enumerate() {
        assert_eq!(pairing[w], v);
        assert!((m.vertices[v][0] + m.vertices[w][0]).abs() <= 1e-12);
        assert!((m.vertices[v][1] + m.vertices[w][1]).abs() <= 1e-12);
    }
    assert!((mesh_statistics(&build_full_disk_mesh(4, false).unwrap()).area - PI).abs() < 0.006);
    build_full_disk_mesh(1, true).unwrap().validate().unwrap();
}

#[test]
fn area_converges_quadratically() {
    let constants: Vec<f64> = (2..=5)
        .map(|l| {
            let half = mesh_statistics(&build_half_disk_mesh(0.0, l, 0).unwrap()).area;
            (PI / 2.0 - half).abs() * 4f64.powi(l as i32)
        })
        .collect();
    let c = constants.iter().cloned().fold(0.0, f64::max);
    for (i, k) in constants.iter().enumerate() {
        let l = i as i32 + 2;
        assert!(k / 4f64.powi(l) <= c * 4f64.powi(-l));
        assert!(
            *k > 0.5 * c,
            "level {l} converges faster than quadratic: {constants:?}"
        );
    }
}

#[test]
fn refinement_preserves_tip_and_tags() {
    let coarse = build_half_disk_mesh(0.3, 4, 0).unwrap();
    let fine = build_half_disk_mesh(0.3, 4, 5).unwrap();
    assert_eq!(fine.vertices[fine.tip.unwrap()], [0.3, 0.0]);
    // boundary edges away from the graded zone survive untouched
    for tag in [
        BoundaryTag::Arc,
        BoundaryTag::DiamLeft,
        BoundaryTag::DiamRight,
    ] {
        let before = tagged_edges(&coarse, tag);
        let after = tagged_edges(&fine, tag);
        for e in &before {
            let (ax, bx) = (f64::from_bits(e.0), f64::from_bits(e.2));
            let (ay, by) = (f64::from_bits(e.1), f64::from_bits(e.3));
            let far = [(ax, ay), (bx, by)]
                .iter()
                .all(|(x, y)| (x - 0.3).hypot(*y) > 0.5);
            if far {
                assert!(after.contains(e), "{tag:?} edge lost");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_meshes_are_valid(t in -0.9f64..0.9, level in 4u32..=5, rounds in 0u32..=5) {
        let m = build_half_disk_mesh(t, level, rounds).unwrap();
        m.validate().unwrap();
        prop_assert_eq!(m.vertices[m.tip.unwrap()], [t, 0.0]);
        let s = mesh_statistics(&m);
        prop_assert!(s.min_angle >= 20.0);
        prop_assert!((s.area - PI / 2.0).abs() < 0.02);
        for e in &m.boundary_edges {
            for &v in &e.v {
                let p = m.vertices[v];
                let on_circle = (p[0].hypot(p[1]) - 1.0).abs() <= 1e-12;
                prop_assert!(on_circle || p[1] == 0.0);
            }
        }
    }

    #[test]
    fn mirror_swaps_diameter_tags(t in 0.0f64..0.9, level in 4u32..=5, rounds in 0u32..=4) {
        let a = build_half_disk_mesh(t, level, rounds).unwrap();
        let b = build_half_disk_mesh(-t, level, rounds).unwrap();
        prop_assert_eq!(
            mirrored_coords(&tagged_edges(&a, BoundaryTag::DiamLeft)),
            tagged_edges(&b, BoundaryTag::DiamRight)
        );
        prop_assert_eq!(
            mirrored_coords(&tagged_edges(&a, BoundaryTag::DiamRight)),
            tagged_edges(&b, BoundaryTag::DiamLeft)
        );
        let m = a.mirrored();
        {
            // equal up to relabelling
            let key = |v: &Vec<[f64; 2]>| -> BTreeSet<(u64, u64)> {
                v.iter().map(|p| (p[0].to_bits(), p[1].to_bits())).collect()
            };
            prop_assert_eq!(key(&m.vertices), key(&b.vertices));
        }
    }

    #[test]
    fn full_disk_meshes_are_valid(level in 1u32..=4, symmetric in any::<bool>()) {
        let m = build_full_disk_mesh(level, symmetric).unwrap();
        m.validate().unwrap();
        prop_assert_eq!(m.symmetry_pairing.is_some(), symmetric);
    }
}
