use std::sync::Arc;

use num_complex::Complex;
use proptest::prelude::*;

use nahmpole::domain::{build_grid, DomainSpec, GradedGrid, Grading, ScalarField};
use nahmpole::gauge::{metric_from_scalar, sigma_distance, Background};
use nahmpole::higgs::Polynomial;
use nahmpole::io::field_file::{Encoding, FieldFile};
use nahmpole::io::report::Report;
use nahmpole::model::barrier::{build_barriers, BarrierParams};
use nahmpole::model::closed_form::{eval_sn, eval_sn_direct, un_direct, un_value};

fn slab() -> Arc<GradedGrid<f64>> {
    Arc::new(build_grid(&DomainSpec::torus_half_cylinder(1.0, 1.0, 2.0), &[8, 8, 9], Grading::default()).unwrap())
}

fn field(g: &Arc<GradedGrid<f64>>, vals: &[f64]) -> ScalarField<f64> {
    ScalarField::new(g.clone(), vals.iter().cycle().take(g.len()).copied().collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sigma_is_symmetric_and_nonnegative(a in prop::collection::vec(-3.0f64..3.0, 16), b in prop::collection::vec(-3.0f64..3.0, 16)) {
        let g = slab();
        let h1 = metric_from_scalar(&field(&g, &a), Background::flat(&g)).unwrap();
        let h2 = metric_from_scalar(&field(&g, &b), Background::flat(&g)).unwrap();
        let s12 = sigma_distance(&h1, &h2).unwrap();
        let s21 = sigma_distance(&h2, &h1).unwrap();
        let s11 = sigma_distance(&h1, &h1).unwrap();
        for i in 0..g.len() {
            prop_assert!(s12.values()[i] >= 0.0);
            prop_assert!((s12.values()[i] - s21.values()[i]).abs() <= 1e-12 * (1.0 + s12.values()[i]));
            prop_assert_eq!(s11.values()[i], 0.0);
        }
    }

    #[test]
    fn binary_field_files_round_trip_exactly(vals in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 7)) {
        let g = slab();
        let f = field(&g, &vals);
        let file = FieldFile::from_field(&f);
        let back = FieldFile::parse(&file.to_bytes(Encoding::Binary)).unwrap().to_field().unwrap();
        for (x, y) in f.values().iter().zip(back.values()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
        prop_assert_eq!(back.grid().shape(), g.shape());
    }

    #[test]
    fn text_field_files_round_trip(vals in prop::collection::vec(-1e3f64..1e3, 5)) {
        let g = slab();
        let f = field(&g, &vals);
        let back = FieldFile::parse(&FieldFile::from_field(&f).to_bytes(Encoding::Text)).unwrap().to_field().unwrap();
        for (x, y) in f.values().iter().zip(back.values()) {
            prop_assert_eq!(x, y);
        }
    }

    #[test]
    fn barriers_are_ordered(a in 0.01f64..50.0, ap in 0.01f64..50.0, app in 0.01f64..50.0, eps in 0.05f64..0.99) {
        let g = slab();
        let b = build_barriers(&g, BarrierParams { a, a_prime: ap, a_dprime: app, eps }, &[]).unwrap();
        for i in 0..g.len() {
            prop_assert!(b.v_minus[i] <= b.v_plus[i]);
            prop_assert!(b.v_plus[i] >= 0.0);
            prop_assert_eq!(b.v_minus[i], -b.v_plus[i]);
        }
    }

    #[test]
    fn model_forms_agree(n in 0usize..4, r in 0.0f64..3.0, y in 0.05f64..3.0) {
        let a = un_value(n, r, y);
        let b = un_direct(n, r, y);
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{a} {b}");
    }

    #[test]
    fn sn_forms_agree(n in 0usize..6, psi in 0.0f64..std::f64::consts::FRAC_PI_2) {
        let a: f64 = eval_sn(n, psi);
        let b: f64 = eval_sn_direct(n, psi);
        prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }

    #[test]
    fn deflating_merged_roots(ax in -1.0f64..1.0, ay in -1.0f64..1.0, dx in 0.05f64..1.0, angle in 0.0f64..std::f64::consts::TAU) {
        let a = Complex::new(ax, ay);
        let b = a + Complex::from_polar(dx, angle);
        let p = Polynomial::from_roots(Complex::new(1.0, 0.0), &[a, b]).unwrap();
        let (q, rem) = p.deflate(a, 1);
        prop_assert!(rem < 1e-12);
        prop_assert_eq!(q.degree(), 1);
        prop_assert!(q.eval(b).norm() < 1e-12);
        let (_, rem2) = p.deflate(a, 2);
        prop_assert!(rem2 > 1e-6 * dx);
    }

    #[test]
    fn reports_round_trip(key in "[a-z]{1,8}(\\.[a-z]{1,8})?", x in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let mut r = Report::new();
        r.set_num(&key, x);
        let text = r.render();
        prop_assert!(text.ends_with("status=ok\n"));
        let parsed = Report::parse_entries(&text);
        let v: f64 = parsed.iter().find(|(k, _)| k == &key).unwrap().1.parse().unwrap();
        prop_assert_eq!(v.to_bits(), x.to_bits());
    }
}
