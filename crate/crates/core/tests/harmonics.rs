mod common;

use axisym::harmonics::basis::BasisLayout;
use axisym::harmonics::legendre::{tri_index, tri_len};
use axisym::{build_spline_table, central_angle, real_basis, GeoPoint, NormalizedLegendre, Recurrence};
use common::legendre_p;
use proptest::prelude::*;

fn arb_point() -> impl Strategy<Value = GeoPoint> {
    (-90.0f64..=90.0, -179.999f64..=180.0).prop_map(|(a, b)| GeoPoint::new(a, b).unwrap())
}

/// Inner product of two real basis vectors over the degree-`n` entries.
fn degree_inner(n_t: usize, n: usize, a: &[f64], b: &[f64]) -> f64 {
    let layout = BasisLayout::new(n_t);
    let mut s = a[layout.cos_index(0, n)] * b[layout.cos_index(0, n)];
    for m in 1..=n {
        s += a[layout.cos_index(m, n)] * b[layout.cos_index(m, n)] + a[layout.sin_index(m, n)] * b[layout.sin_index(m, n)];
    }
    s
}

proptest! {
    #[test]
    fn addition_theorem_per_degree(p in arb_point(), q in arb_point()) {
        let n_t = 7;
        let a = real_basis(n_t, p.lat(), p.lon(), &Recurrence).unwrap();
        let b = real_basis(n_t, q.lat(), q.lon(), &Recurrence).unwrap();
        let x = central_angle(&p, &q).to_radians().cos();
        for n in 0..=n_t {
            let want = (2 * n + 1) as f64 / 2.0 * legendre_p(n, x);
            prop_assert!((degree_inner(n_t, n, &a, &b) - want).abs() < 1e-10);
        }
    }

    #[test]
    fn normalized_values_are_bounded(x in -1.0f64..=1.0) {
        for n in 0..=12 {
            for m in 0..=n {
                let v = axisym::harmonics::legendre_norm(n, m, x).unwrap();
                prop_assert!(v.abs() <= ((2 * n + 1) as f64 / 2.0).sqrt() + 1e-12);
            }
        }
    }

    #[test]
    fn spline_tracks_recurrence(lat in -90.0f64..=90.0) {
        let table = build_spline_table(7);
        let mut s = vec![0.0; tri_len(7)];
        let mut r = vec![0.0; tri_len(7)];
        table.fill_at_latitude(7, lat, &mut s);
        Recurrence.fill_at_latitude(7, lat, &mut r);
        for n in 0..=7 {
            for m in 0..=n {
                prop_assert!((s[tri_index(n, m)] - r[tri_index(n, m)]).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn spline_is_exact_at_every_knot() {
    let table = build_spline_table(7);
    let mut r = vec![0.0; tri_len(7)];
    for i in 0..table.knot_count() {
        let lat = -90.0 + 0.25 * i as f64;
        Recurrence.fill_at_latitude(7, lat, &mut r);
        for n in 0..=7 {
            for m in 0..=n {
                assert_eq!(table.eval(n, m, lat), table.knot_value(n, m, i));
                assert!((table.knot_value(n, m, i) - r[tri_index(n, m)]).abs() < 1e-13);
            }
        }
    }
}
