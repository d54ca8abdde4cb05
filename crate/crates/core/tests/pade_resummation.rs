use ptlevels::hamiltonian::BlockTemplate;
use ptlevels::pade::{build_pade, evaluate, real_poles};
use ptlevels::perturb::{effective_series_with, evaluate_series, SeriesOptions};
use ptlevels::{eigen, Model, Parity, TruncationScheme};

fn ground(model: Model, g: f64) -> f64 {
    let t = BlockTemplate::new(model, Parity::Even, TruncationScheme::new(40));
    eigen::lowest_eigenpairs(&t.at(g).unwrap(), 1).unwrap().0[0].re
}

#[test]
fn resummation_beats_truncation_at_unit_coupling() {
    for model in [Model::Cubic12, Model::HenonHeiles] {
        let s = &effective_series_with(model, 0, SeriesOptions::exact(24)).unwrap()[0];
        let p = build_pade(s, 12, 12).unwrap();
        assert!(p.exact);
        let e = ground(model, 1.0);
        let v = evaluate(&p, 1.0);
        assert!(!v.near_pole);
        let pade_err = (v.value - e).abs();
        let series_err = (evaluate_series(s, 1.0, 24) - e).abs();
        assert!(pade_err < 1e-5 && pade_err < series_err, "{model}: pade {pade_err:e} series {series_err:e}");
        assert!(real_poles(&p, 0.0, 1.5).is_empty(), "{model}");
    }
}

#[test]
fn taylor_expansion_reproduces_series() {
    let s = &effective_series_with(Model::Cubic12, 0, SeriesOptions::exact(16)).unwrap()[0];
    let p = build_pade(s, 8, 8).unwrap();
    let t = p.taylor(16);
    for j in 0..=8 {
        let want = s.coeffs[j].to_f64();
        assert!((t[2 * j].to_f64() - want).abs() <= 1e-12 * want.abs().max(1.0), "g^{}", 2 * j);
    }
    for j in 0..8 {
        assert!(t[2 * j + 1].to_f64().abs() < 1e-20, "odd power g^{}", 2 * j + 1);
    }
}
