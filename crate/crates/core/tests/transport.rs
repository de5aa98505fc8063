mod common;

use multimatrix::algebra::{parse, quadratic, TracePoly};
use multimatrix::langevin::SdeParams;
use multimatrix::matrix::{random_unitary, sample_gue, tr_n, HermTuple};
use multimatrix::transport::*;
use multimatrix::Error;

fn gaussian_spec(lambda: f64, s_steps: usize) -> TransportSpec {
    let v1 = quadratic(1).scale_re(lambda);
    TransportSpec::from_gaussian(v1, s_steps).unwrap()
}

fn quartic(g: f64) -> TracePoly {
    parse(&format!("0.5*X1^2 + {g}*X1^4"), 1).unwrap()
}

fn rel(a: &HermTuple, b: &HermTuple) -> f64 {
    a.sub(b).norm_normalized() / b.norm_normalized()
}

#[test]
fn equal_potentials_give_zero_field_and_identity_map() {
    let v = parse("0.5*X1^2 + 0.5*X2^2 + 0.1*X1*X2^2*X1 + 0.05*tr(X1*X1)*X1*X1", 2).unwrap();
    let spec = TransportSpec::new(v.clone(), v, 3).unwrap();
    let h = sample_gue(6, 2, 3).unwrap();
    let r = psi_estimate(&spec, 0.4, &h, 1).unwrap();
    assert_eq!(r.psi.norm_normalized(), 0.0);
    assert_eq!(r.mc_stderr, 0.0);
    let t = flow_transport(&spec, &h, 9).unwrap();
    assert_eq!(t, h);
}

#[test]
fn gaussian_field_matches_closed_form() {
    for (lambda, n) in [(2.0, 8), (0.5, 5), (3.0, 4)] {
        let mut spec = gaussian_spec(lambda, 1);
        spec.dt = 0.01;
        spec.m_psi = 4;
        let h = sample_gue(n, 1, 11).unwrap();
        for s in [0.0, 0.5, 1.0] {
            let c = 1.0 + s * (lambda - 1.0);
            let exact = h.scaled(-(lambda - 1.0) / (2.0 * c));
            let r = psi_estimate(&spec, s, &h, 5).unwrap();
            // antithetic pairs cancel the noise exactly for a linear SDE
            assert!(r.mc_stderr < 1e-12, "stderr {}", r.mc_stderr);
            let err = rel(&r.psi, &exact);
            let allowance = c * spec.dt / 4.0 + 1.5 * r.tail_bound / exact.norm_normalized() + 1e-9;
            assert!(err < allowance, "lambda {lambda} s {s}: {err} vs {allowance}");
        }
    }
}

#[test]
fn concave_perturbation_uses_regularity_rate() {
    let spec = gaussian_spec(0.5, 2);
    assert!(!spec.certified_convex());
    assert!((spec.kappa_r().unwrap() - 0.5).abs() < 1e-12);
    assert!((spec.decay_rate().unwrap() - 0.25).abs() < 1e-12);
    assert!(spec.t_max >= 4.0 / 0.5 * 1e6f64.ln() - 1e-9);
}

#[test]
fn missing_decay_rate_is_an_error() {
    let v1 = parse("-0.1*X1^2", 1).unwrap();
    let mut spec = TransportSpec::from_gaussian(v1, 2).unwrap();
    spec.t_max = 5.0;
    let h = sample_gue(3, 1, 1).unwrap();
    assert!(matches!(psi_estimate(&spec, 0.5, &h, 1), Err(Error::NoDecay(_))));
    spec.rate_override = Some(0.1);
    spec.m_psi = 2;
    // the override only enables the estimate; divergence is still guarded
    let r = psi_estimate(&spec, 0.0, &h, 1);
    assert!(r.is_ok() || matches!(r, Err(Error::Divergence(_))));
}

#[test]
fn field_is_linear_in_h_for_gaussian_model() {
    let mut spec = gaussian_spec(2.0, 1);
    spec.antithetic = false;
    spec.m_psi = 24;
    spec.dt = 0.05;
    spec.t_max = 15.0;
    let h = sample_gue(6, 1, 4).unwrap();
    let a = psi_estimate(&spec, 0.3, &h, 8).unwrap();
    let b = psi_estimate(&spec, 0.3, &h.scaled(2.0), 8).unwrap();
    let diff = b.psi.sub(&a.psi.scaled(2.0)).norm_normalized();
    assert!(diff < 5.0 * (a.mc_stderr + b.mc_stderr), "{diff}");
    assert!(a.mc_stderr > 0.0);
}

#[test]
fn adjoint_and_tangent_are_dual() {
    let v1 = parse("0.5*X1^2 + 0.5*X2^2 + 0.1*X1^4 + 0.05*X1*X2^2*X1 + 0.02*tr(X1*X1)*X2*X2", 2)
        .unwrap();
    let mut spec = TransportSpec::from_gaussian(v1, 2).unwrap();
    spec.dt = 0.05;
    let x0 = sample_gue(5, 2, 21).unwrap();
    let v = sample_gue(5, 2, 22).unwrap();
    let w = sample_gue(5, 2, 23).unwrap();
    with_sensitivity_path(&spec, 0.7, &x0, 30, 3, |p| {
        for n in [1, 7, 30] {
            let lhs = p.tangent(n, &v).inner(&w);
            let rhs = v.inner(&p.adjoint(n, &w));
            assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0), "{n}: {lhs} {rhs}");
        }
    })
    .unwrap();
}

#[test]
fn tangent_matches_finite_difference_of_path() {
    let v1 = parse("0.5*X1^2 + 0.5*X2^2 + 0.1*X1^4 + 0.05*X1*X2^2*X1", 2).unwrap();
    let mut spec = TransportSpec::from_gaussian(v1, 2).unwrap();
    spec.dt = 0.05;
    let x0 = sample_gue(4, 2, 31).unwrap();
    let v = sample_gue(4, 2, 32).unwrap();
    let eps = 1e-5;
    let steps = 20;
    let end = |x: &HermTuple| {
        let mut out = None;
        with_sensitivity_path(&spec, 0.5, x, steps, 7, |p| out = Some(p.state(steps).clone())).unwrap();
        out.unwrap()
    };
    let plus = end(&{
        let mut x = x0.clone();
        x.axpy(eps, &v);
        x
    });
    let minus = end(&{
        let mut x = x0.clone();
        x.axpy(-eps, &v);
        x
    });
    let fd = plus.sub(&minus).scaled(0.5 / eps);
    let mut tan = None;
    with_sensitivity_path(&spec, 0.5, &x0, steps, 7, |p| tan = Some(p.tangent(steps, &v))).unwrap();
    let tan = tan.unwrap();
    assert!(rel(&fd, &tan) < 1e-7, "{}", rel(&fd, &tan));
}

#[test]
fn longer_horizon_stays_within_tail_bound() {
    let mut spec = TransportSpec::from_gaussian(quartic(0.1), 2).unwrap();
    spec.dt = 0.05;
    spec.m_psi = 4;
    let h = sample_gue(6, 1, 41).unwrap();
    spec.t_max = 10.0;
    let short = psi_estimate(&spec, 0.5, &h, 13).unwrap();
    spec.t_max = 20.0;
    let long = psi_estimate(&spec, 0.5, &h, 13).unwrap();
    let change = long.psi.sub(&short.psi).norm_normalized();
    assert!(change < short.tail_bound, "{change} vs {}", short.tail_bound);
    assert!(long.tail_bound < short.tail_bound);
}

#[test]
fn flow_is_unitarily_equivariant_under_replay() {
    let v1 = parse("0.5*X1^2 + 0.5*X2^2 + 0.1*X1^4 + 0.05*X1*X2^2*X1", 2).unwrap();
    let mut spec = TransportSpec::from_gaussian(v1, 2).unwrap();
    spec.dt = 0.1;
    spec.t_max = 4.0;
    spec.m_psi = 4;
    spec.rate_override = Some(0.5);
    let h = sample_gue(5, 2, 51).unwrap();
    let u = random_unitary(&mut common::rng(52), 5);
    let t = flow_transport(&spec, &h, 17).unwrap();
    let tu = flow_transport_with_unitary(&spec, &h.conjugate(&u), 17, &u).unwrap();
    let err = tu.map.sub(&t.conjugate(&u)).norm_normalized();
    assert!(err < 1e-10, "{err}");
}

#[test]
fn doubling_trajectories_halves_variance() {
    let mut spec = TransportSpec::from_gaussian(quartic(0.1), 1).unwrap();
    spec.antithetic = false;
    spec.dt = 0.1;
    spec.t_max = 6.0;
    let h = sample_gue(4, 1, 61).unwrap();
    let ms = [4usize, 8, 16, 32];
    let mut logs = Vec::new();
    for &m in &ms {
        spec.m_psi = m;
        let v: f64 = (0..12)
            .map(|seed| psi_estimate(&spec, 0.5, &h, 100 + seed).unwrap().mc_stderr.powi(2))
            .sum::<f64>()
            / 12.0;
        logs.push(((m as f64).ln(), v.ln()));
    }
    let n = logs.len() as f64;
    let (mx, my) = (
        logs.iter().map(|p| p.0).sum::<f64>() / n,
        logs.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let slope = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / logs.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope + 1.0).abs() < 0.2, "slope {slope}");

    // the reported error matches the spread over independent seeds
    spec.m_psi = 8;
    let runs: Vec<_> = (0..40).map(|s| psi_estimate(&spec, 0.5, &h, 500 + s).unwrap()).collect();
    let mut mean = HermTuple::zeros(4, 1);
    for r in &runs {
        mean.axpy(1.0 / 40.0, &r.psi);
    }
    let spread = runs.iter().map(|r| r.psi.sub(&mean).norm_normalized().powi(2)).sum::<f64>() / 39.0;
    let reported = runs.iter().map(|r| r.mc_stderr.powi(2)).sum::<f64>() / 40.0;
    let ratio = spread / reported;
    assert!((0.6..1.6).contains(&ratio), "ratio {ratio}");
}

#[test]
fn gaussian_flow_matches_scaling() {
    let mut spec = gaussian_spec(2.0, 4);
    spec.dt = 0.01;
    spec.m_psi = 2;
    spec.t_max = 20.0;
    for seed in 0..3 {
        let h = sample_gue(6, 1, 70 + seed).unwrap();
        let rep = flow_transport_report(&spec, &h, seed).unwrap();
        let err = rel(&rep.map, &h.scaled(0.5f64.sqrt()));
        assert!(err < 0.01, "{err}");
        assert_eq!(rep.stages.len(), 8);
    }
}

#[test]
fn discretization_check_reports_first_order_bias() {
    let mut spec = gaussian_spec(2.0, 1);
    spec.m_psi = 2;
    spec.dt = 0.02;
    spec.t_max = 20.0;
    spec.discretization_check = true;
    let h = sample_gue(4, 1, 81).unwrap();
    let r = psi_estimate(&spec, 1.0, &h, 2).unwrap();
    let exact = h.scaled(-0.25);
    let actual = r.psi.sub(&exact).norm_normalized();
    let est = r.discretization_estimate.unwrap();
    assert!((est / actual - 1.0).abs() < 0.2, "{est} {actual}");
}

#[test]
fn pushforward_of_identical_laws_is_consistent() {
    let v = quartic(0.05);
    let spec = TransportSpec::new(v.clone(), v, 2).unwrap();
    let obs = vec![parse("X1^2", 1).unwrap(), parse("X1^4", 1).unwrap()];
    let direct = SdeParams {
        h: 0.01,
        t_burn: 10.0,
        trajectories: 100,
        seed: 3,
        ..SdeParams::default()
    };
    // the map is the identity, so the pushforward samples the GUE while direct sampling
    // targets the quartic model: only the shared-law case is compared
    let gauss = TransportSpec::new(quadratic(1), quadratic(1), 2).unwrap();
    let rep = pushforward_check(&gauss, 8, &obs, 200, &direct, 5).unwrap();
    assert!(rep.max_abs_z() < 3.0, "{:?}", rep.comparisons);
    assert_eq!(rep.max_flow_stderr, 0.0);
    let rep = pushforward_check(&spec, 8, &obs, 4, &direct, 5);
    assert!(rep.is_ok());
}

#[test]
fn pushforward_gaussian_second_moment() {
    let mut spec = gaussian_spec(2.0, 2);
    spec.dt = 0.02;
    spec.m_psi = 2;
    spec.t_max = 15.0;
    let obs = vec![parse("X1^2", 1).unwrap()];
    let direct = SdeParams {
        h: 0.01,
        t_burn: 10.0,
        trajectories: 100,
        seed: 1,
        ..SdeParams::default()
    };
    let rep = pushforward_check(&spec, 6, &obs, 150, &direct, 9).unwrap();
    let c = &rep.comparisons[0];
    assert!((c.pushforward.mean - 0.5).abs() < 3.0 * c.pushforward.stderr + 0.005, "{c:?}");
    assert!(c.z.abs() < 3.0, "{c:?}");
}

#[test]
fn pushforward_rejects_alphabet_mismatch() {
    let spec = gaussian_spec(2.0, 1);
    let obs = vec![parse("X1*X2", 2).unwrap()];
    let r = pushforward_check(&spec, 4, &obs, 4, &SdeParams::default(), 1);
    assert!(matches!(r, Err(Error::AlphabetMismatch(..))));
}

#[test]
fn strong_convergence_scan_for_gue() {
    let p1 = parse("X1", 1).unwrap();
    let p2 = parse("X1^2", 1).unwrap();
    let params = SdeParams {
        trajectories: 21,
        ..SdeParams::default()
    };
    let grid = [8, 32, 96];
    let a = strong_conv_scan(&p1, &quadratic(1), &grid, &params, 4).unwrap();
    let b = strong_conv_scan(&p2, &quadratic(1), &grid, &params, 4).unwrap();
    assert!(a.monotone);
    assert!(a.rows.iter().all(|r| r.samples == 21));
    assert!((a.rows[2].median - 2.0).abs() < 0.15, "{:?}", a.rows);
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        // ‖X²‖ = ‖X‖² samplewise, and the median of an odd sample is a sample
        assert!((ra.median.powi(2) - rb.median).abs() < 1e-10);
        assert!((ra.max.powi(2) - rb.max).abs() < 1e-10);
    }
}

#[test]
fn strong_convergence_scan_for_quartic_model() {
    let params = SdeParams {
        h: 0.02,
        t_burn: 8.0,
        trajectories: 6,
        samples_per_trajectory: 3,
        thin: 1.0,
        seed: 2,
    };
    let p = parse("X1", 1).unwrap();
    let r = strong_conv_scan(&p, &quartic(0.1), &[8, 16], &params, 5).unwrap();
    assert_eq!(r.rows.len(), 2);
    assert_eq!(r.rows[0].samples, 18);
    assert!(r.rows.iter().all(|row| row.median > 1.0 && row.median < 2.0));
    assert!(strong_conv_scan(&parse("i*X1", 1).unwrap(), &quadratic(1), &[4], &params, 1).is_err());
}

#[test]
fn gaussian_trace_of_transport() {
    // tr_N of T¹(H) scales like that of H
    let mut spec = gaussian_spec(2.0, 2);
    spec.dt = 0.02;
    spec.m_psi = 2;
    spec.t_max = 15.0;
    let h = sample_gue(5, 1, 90).unwrap();
    let t = flow_transport(&spec, &h, 3).unwrap();
    let a = tr_n(t.get(0)).re;
    let b = tr_n(h.get(0)).re * 0.5f64.sqrt();
    assert!((a - b).abs() < 0.01 * b.abs().max(0.1));
}
