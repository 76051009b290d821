use gapcond::geometry::Monomial;
use gapcond::harness::{observe, ConfigFamily, Settings};
use gapcond::{BoundaryData, MeshParams, Shape};
use proptest::prelude::*;

fn coarse() -> MeshParams {
    MeshParams { h_bulk: 0.5, gap_layers_min: 4, ..MeshParams::default() }
}

fn disks(n: usize) -> ConfigFamily {
    ConfigFamily::symmetric(Shape::Disk { radius: 1.0 }, 4.0, n)
}

#[test]
fn flux_matrix_is_symmetric_with_expected_signs() {
    for n in [2, 3] {
        let conf = disks(n).at(0.05).unwrap();
        let o = observe(&conf, &coarse(), &BoundaryData::Linear([1.0, 0.0]), &Settings::default()).unwrap();
        let a = o.flux.a;
        assert!(a[0][0] < 0.0 && a[1][1] < 0.0 && a[0][1] > 0.0, "n={n}: {a:?}");
        assert!(o.flux.reciprocity_defect() < 1e-8, "n={n}: {a:?}");
        // mirror symmetry swaps the inclusions
        assert!((a[0][0] - a[1][1]).abs() < 1e-8 * a[0][0].abs());
    }
}

#[test]
fn odd_data_gives_opposite_constants_and_even_data_kills_q() {
    let conf = disks(2).at(0.05).unwrap();
    let s = Settings::default();
    let odd = observe(&conf, &coarse(), &BoundaryData::Linear([1.0, 0.0]), &s).unwrap();
    assert!((odd.flux.c1 + odd.flux.c2).abs() < 1e-8 * odd.flux.c1.abs());
    assert!(odd.flux.q_eps.abs() > 1.0);
    let even = BoundaryData::Polynomial(vec![Monomial::new(1.0, 2, 0), Monomial::new(-1.0, 0, 2)]);
    let e = observe(&conf, &coarse(), &even, &s).unwrap();
    assert!(e.flux.c_diff.abs() < 1e-8);
    assert!(e.flux.q_eps.abs() < 1e-8 * odd.flux.q_eps.abs());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn q_is_linear_in_the_data(b1 in -3.0f64..3.0, b2 in -3.0f64..3.0, t in 0.2f64..4.0) {
        let conf = disks(2).at(0.1).unwrap();
        let s = Settings::default();
        let p = coarse();
        let q = |d: BoundaryData| observe(&conf, &p, &d, &s).unwrap().flux.q_eps;
        let base = q(BoundaryData::Linear([b1, b2]));
        let scaled = q(BoundaryData::Linear([t * b1, t * b2]));
        let unit = q(BoundaryData::Linear([1.0, 0.0]));
        prop_assert!((scaled - t * base).abs() <= 1e-6 * unit.abs().max(1.0) * (1.0 + t * b1.abs()));
        // the x2 component is even under the mirror and contributes nothing
        prop_assert!((base - b1 * unit).abs() <= 1e-6 * unit.abs() * (1.0 + b1.abs()));
    }
}
