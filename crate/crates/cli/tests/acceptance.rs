//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero on any failure.
//!
//! `cargo test -p multimatrix-cli --test acceptance -- 1 7` runs a subset.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::time::{Duration, Instant};

use common::*;
use multimatrix::algebra::*;
use multimatrix::harness::{fit_inverse_square, FitPoint};
use multimatrix::langevin::{coupled_step_study, estimate_gue, estimate_observables, ModelSpec, SdeParams};
use multimatrix::matrix::{sample_gue, CMat, HermTuple};
use multimatrix::semicircle::*;
use multimatrix::transport::{flow_transport_report, pushforward_check, strong_conv_scan, TransportSpec};
use multimatrix::wick::*;
use multimatrix_cli::dispatch;
use num_complex::Complex64;
use num_traits::Zero;
use rand::Rng as _;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

fn main() {
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [Criterion; 10] = [
        (1, "exact oracle identity", Duration::from_secs(1), c1_oracle),
        (2, "free/finite-N consistency", Duration::from_secs(10), c2_free_limit),
        (3, "Schwinger-Dyson suite", Duration::from_secs(10), c3_schwinger_dyson),
        (4, "derivative correctness", Duration::from_secs(30), c4_derivatives),
        (5, "Langevin exactness on the quadratic model", Duration::from_secs(300), c5_langevin),
        (6, "expansion scaling", Duration::from_secs(600), c6_expansion),
        (7, "Gaussian transport closed form", Duration::from_secs(600), c7_gaussian_transport),
        (8, "transport pushforward", Duration::from_secs(1800), c8_pushforward),
        (9, "strong convergence proxy", Duration::from_secs(900), c9_strong_convergence),
        (10, "conditional expectation recursion", Duration::from_secs(10), c10_cond_exp),
    ];
    let mut failed = 0;
    for (id, name, limit, run) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let o = run();
        let el = t.elapsed();
        let in_time = el <= limit;
        let pass = o.pass && in_time;
        if !pass {
            failed += 1;
        }
        let time_note = if in_time { String::new() } else { format!(" [over {limit:?}]") };
        println!(
            "{} {id:>2} {name} ({:.1}s{time_note}): {}",
            if pass { "PASS" } else { "FAIL" },
            el.as_secs_f64(),
            o.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

/// `E[Π tr_N w]` by summing over indices with Isserlis' rule for GUE entries.
fn entrywise(words: &[Word], n: usize) -> f64 {
    let total: usize = words.iter().map(|w| w.len()).sum();
    let mut idx = vec![0usize; total];
    let mut sum = 0.0;
    loop {
        let mut entries = Vec::with_capacity(total);
        let mut off = 0;
        for w in words {
            let l = w.len();
            for k in 0..l {
                entries.push((w.letters()[k], idx[off + k], idx[off + (k + 1) % l]));
            }
            off += l;
        }
        sum += isserlis(&entries, n);
        let mut k = 0;
        while k < total {
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == total {
            break;
        }
    }
    sum / (n as f64).powi(words.len() as i32)
}

fn isserlis(entries: &[(u8, usize, usize)], n: usize) -> f64 {
    let Some(&(a, i, j)) = entries.first() else {
        return 1.0;
    };
    let mut s = 0.0;
    for k in 1..entries.len() {
        let (b, p, q) = entries[k];
        if a == b && i == q && j == p {
            let mut rest = entries[1..].to_vec();
            rest.remove(k - 1);
            s += isserlis(&rest, n) / n as f64;
        }
    }
    s
}

fn cli(args: &[&str]) -> (i32, String) {
    let mut argv = vec!["multimatrix".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = dispatch(&argv, &mut out, &mut err);
    (code, String::from_utf8_lossy(&out).trim().to_string())
}

fn c1_oracle() -> Outcome {
    let (c4, x4) = cli(&["oracle", "--word", "X1*X1*X1*X1"]);
    let (c22, x1x2) = cli(&["oracle", "--word", "X1*X2*X1*X2"]);
    let mut ok = c4 == 0 && c22 == 0 && x4 == r#"{"coeffs":[2,1]}"# && x1x2 == r#"{"coeffs":[0,1]}"#;
    let mut worst: f64 = 0.0;
    for w in ["X1^4", "X1*X2*X1*X2"] {
        let word = parse_word(w).unwrap();
        let series = gue_expect_word(&word).unwrap();
        let e = (series.eval(2) - entrywise(&[word], 2)).abs();
        worst = worst.max(e);
    }
    ok &= worst < 1e-12;
    outcome(ok, format!("X1^4 -> {x4}, (X1X2)^2 -> {x1x2}, entrywise N=2 gap {worst:.1e}"))
}

fn c2_free_limit() -> Outcome {
    let mut r = rng(2002);
    let fam = SemicircleFamily::standard(3);
    let mut bad = Vec::new();
    for _ in 0..30 {
        let len = r.random_range(1..=10usize);
        let w = rand_word(&mut r, 3, len);
        let series = gue_expect_word(&w).unwrap();
        let free = tau_word_exact(&w, &fam).unwrap();
        if series.constant() != free {
            bad.push(w.to_string());
        }
    }
    outcome(bad.is_empty(), format!("30 words, mismatches: {bad:?}"))
}

fn c3_schwinger_dyson() -> Outcome {
    let mut r = rng(2003);
    let mut bad = 0;
    let mut checked = 0;
    for k in 0..100 {
        let d = 1 + k % 3;
        let fam = SemicircleFamily::standard(d);
        let f = rand_poly(&mut r, d, 6, 5, true);
        for e in 0..d {
            checked += 1;
            if !sd_residual_exact(&f, e, &fam).unwrap().is_zero() {
                bad += 1;
            }
        }
    }
    outcome(bad == 0, format!("100 polynomials, {checked} residuals, {bad} nonzero"))
}

fn central_difference(q: &TracePoly, x: &HermTuple, y: &HermTuple, h: f64) -> CMat {
    let plus = x.add(&y.scaled(h));
    let minus = x.sub(&y.scaled(h));
    (eval(q, &plus).unwrap() - eval(q, &minus).unwrap()) / Complex64::new(2.0 * h, 0.0)
}

/// `Σ_i ((∂_i J)∘f) #₁ ∂f_i` applied to `y`, with plain-loop products.
fn chain_rhs(j: &TracePoly, f: &[TracePoly], x: &HermTuple, y: &HermTuple) -> CMat {
    let n = x.n();
    let fx = HermTuple::new(f.iter().map(|g| naive_eval(g, x)).collect()).unwrap();
    let mut acc = CMat::zeros((n, n));
    for i in 0..j.nvars() {
        let mut inner = CMat::zeros((n, n));
        for h in 0..x.d() {
            for (t, c) in diff_free(&f[i], h).unwrap().iter() {
                let mut sc = *c;
                for tf in &t.traces {
                    sc *= naive_tr(&naive_word(tf.word(), x));
                }
                inner = inner
                    + naive_word(&t.words[0], x).dot(y.get(h)).dot(&naive_word(&t.words[1], x)) * sc;
            }
        }
        for (t, c) in diff_free(j, i).unwrap().iter() {
            let mut sc = *c;
            for tf in &t.traces {
                sc *= naive_tr(&naive_word(tf.word(), &fx));
            }
            acc = acc + naive_word(&t.words[0], &fx).dot(&inner).dot(&naive_word(&t.words[1], &fx)) * sc;
        }
    }
    acc
}

fn c4_derivatives() -> Outcome {
    let mut r = rng(2004);
    let mut worst_fd: f64 = 0.0;
    let mut cases = 0;
    while cases < 50 {
        let d = 1 + cases % 3;
        let q = rand_poly(&mut r, d, 5, 5, false);
        let n = 1 + cases % 8;
        let x = rand_herm(&mut r, n, d);
        let y = rand_herm(&mut r, n, d);
        let exact = frechet_dir(&q, &x, &y).unwrap();
        if fro(&exact) < 1e-8 {
            continue;
        }
        worst_fd = worst_fd.max(rel_err(&central_difference(&q, &x, &y, 1e-5), &exact));
        cases += 1;
    }
    let mut worst_chain: f64 = 0.0;
    for k in 0..30 {
        let m = 1 + k % 2;
        let d = 1 + (k / 2) % 3;
        let j = rand_poly(&mut r, m, 4, 4, false);
        let f: Vec<TracePoly> = (0..m)
            .map(|_| self_adjoint_part(&rand_poly(&mut r, d, 3, 3, false)))
            .collect();
        let n = 2 + k % 7;
        let x = rand_herm(&mut r, n, d);
        let y = rand_herm(&mut r, n, d);
        let g = compose(&j, &f).unwrap();
        let mut lhs = CMat::zeros((n, n));
        for i in 0..d {
            lhs = lhs + eval_tensor_sharp(&diff_free(&g, i).unwrap(), &x, &y).unwrap();
        }
        let rhs = chain_rhs(&j, &f, &x, &y);
        worst_chain = worst_chain.max(fro(&(&lhs - &rhs)) / fro(&rhs).max(1.0));
    }
    outcome(
        worst_fd < 1e-6 && worst_chain < 1e-10,
        format!("max FD rel err {worst_fd:.2e} (50 cases), max chain-rule residual {worst_chain:.2e}"),
    )
}

fn c5_langevin() -> Outcome {
    let n = 32;
    let spec = ModelSpec::new(n, quadratic(1)).unwrap();
    let obs = [parse("X1^2", 1).unwrap(), parse("X1^4", 1).unwrap()];
    let oracle = [1.0, 2.0 + 1.0 / 1024.0];
    let params = SdeParams {
        h: 0.01,
        t_burn: 20.0,
        thin: 2.0,
        trajectories: 2000,
        samples_per_trajectory: 1,
        seed: 2005,
    };
    let est = estimate_observables(&spec, &params, &obs).unwrap();
    let z: Vec<f64> = est.iter().zip(oracle).map(|(e, o)| (e.mean - o) / e.stderr).collect();
    let study = coupled_step_study(
        &spec,
        &SdeParams {
            trajectories: 400,
            ..params.clone()
        },
        3,
        &obs,
    )
    .unwrap();
    let ratios: Vec<f64> = (0..obs.len()).map(|j| study.difference_ratio(j).unwrap()).collect();
    let halves = ratios.iter().all(|r| (r - 2.0).abs() < 0.4);
    let within = z.iter().all(|z| z.abs() < 3.0);
    outcome(
        within && halves,
        format!(
            "tr X^2 = {:.5}±{:.5} (z {:+.2}), tr X^4 = {:.5}±{:.5} (z {:+.2}); bias ratios h/(h/2) {:.2}, {:.2}",
            est[0].mean, est[0].stderr, z[0], est[1].mean, est[1].stderr, z[1], ratios[0], ratios[1]
        ),
    )
}

fn c6_expansion() -> Outcome {
    let f4 = parse("X1^4", 1).unwrap();
    let mut pts = Vec::new();
    for n in [16usize, 24, 32, 48, 64] {
        let e = &estimate_gue(n, 1, 100_000, 2006, std::slice::from_ref(&f4)).unwrap()[0];
        pts.push(FitPoint {
            n: n as f64,
            value: e.mean,
            stderr: e.stderr,
        });
    }
    let fit = fit_inverse_square(&pts).unwrap();
    let (a0, a1) = (fit.a0(), fit.a1());
    outcome(
        (a0 - 2.0).abs() < 0.02 && (a1 - 1.0).abs() < 0.5,
        format!(
            "a0 = {a0:.4}±{:.4}, a1 = {a1:.3}±{:.3}, residuals consistent: {}",
            fit.coeff_stderr[0], fit.coeff_stderr[1], fit.residuals_consistent
        ),
    )
}

fn c7_gaussian_transport() -> Outcome {
    let mut spec = TransportSpec::from_gaussian(quadratic(1).scale_re(2.0), 4).unwrap();
    spec.dt = 0.02;
    spec.m_psi = 4;
    let mut total = 0.0;
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let h = sample_gue(16, 1, 2007_000 + i).unwrap();
        let rep = flow_transport_report(&spec, &h, 2007 + i).unwrap();
        let want = h.scaled(std::f64::consts::FRAC_1_SQRT_2);
        let e = rep.map.sub(&want).norm_normalized() / want.norm_normalized();
        total += e;
        worst = worst.max(e);
    }
    let mean = total / 20.0;
    outcome(
        mean < 0.02,
        format!("mean relative error {mean:.2e}, worst {worst:.2e} over 20 H (T_max {:.1})", spec.t_max),
    )
}

fn c8_pushforward() -> Outcome {
    let v1 = parse("0.5*X1^2 + 0.05*X1^4", 1).unwrap();
    let mut spec = TransportSpec::from_gaussian(v1, 4).unwrap();
    spec.dt = 0.05;
    spec.t_max = 10.0;
    spec.m_psi = 4;
    let obs = [parse("X1^2", 1).unwrap(), parse("X1^4", 1).unwrap()];
    let direct = SdeParams {
        h: 0.005,
        t_burn: 20.0,
        thin: 2.0,
        trajectories: 500,
        samples_per_trajectory: 1,
        seed: 2008,
    };
    let rep = pushforward_check(&spec, 32, &obs, 500, &direct, 2008).unwrap();
    let parts: Vec<String> = rep
        .comparisons
        .iter()
        .map(|c| {
            format!(
                "{}: push {:.5}±{:.5} direct {:.5}±{:.5} z {:+.2}",
                c.observable, c.pushforward.mean, c.pushforward.stderr, c.direct.mean, c.direct.stderr, c.z
            )
        })
        .collect();
    outcome(
        rep.max_abs_z() < 3.0,
        format!(
            "{}; max flow tail bound {:.1e}, max flow MC error {:.1e}",
            parts.join("; "),
            rep.max_flow_tail,
            rep.max_flow_stderr
        ),
    )
}

fn c9_strong_convergence() -> Outcome {
    let x1 = parse("X1", 1).unwrap();
    let gue = SdeParams {
        trajectories: 50,
        ..SdeParams::default()
    };
    let a = strong_conv_scan(&x1, &quadratic(1), &[64, 128, 256], &gue, 2009).unwrap();
    let medians: Vec<f64> = a.rows.iter().map(|r| r.median).collect();
    let approaches = medians.windows(2).all(|w| (w[1] - 2.0).abs() < (w[0] - 2.0).abs());
    let last = (medians[2] - 2.0).abs();

    let quartic = parse("0.5*X1^2 + 0.1*X1^4", 1).unwrap();
    let lv = SdeParams {
        h: 0.02,
        t_burn: 10.0,
        thin: 1.0,
        trajectories: 40,
        samples_per_trajectory: 10,
        seed: 2009,
    };
    let q = strong_conv_scan(&x1, &quartic, &[16, 32, 64, 128], &lv, 2009).unwrap();
    let qm: Vec<String> = q.rows.iter().map(|r| format!("{:.4}", r.median)).collect();
    let qd: Vec<String> = q.differences.iter().map(|d| format!("{d:+.4}")).collect();
    outcome(
        approaches && last < 0.1 && q.differences_decreasing,
        format!(
            "W=0 medians {medians:.4?} (|·-2| at 256: {last:.4}); quartic medians [{}], differences [{}]",
            qm.join(", "),
            qd.join(", ")
        ),
    )
}

fn c10_cond_exp() -> Outcome {
    let one = SemicircleFamily::standard(1);
    // X2 plays y
    let e = cond_exp(&parse("X2*X1*X2", 2).unwrap(), &[1], &one).unwrap();
    let want = parse("tr(X1)", 2).unwrap();
    let mut ok = e == want;
    let mut r = rng(2010);
    let yfam = SemicircleFamily::with_covariance(vec![vec![2.0, 1.0], vec![1.0, 1.0]]).unwrap();
    let joint = SemicircleFamily::with_covariance(vec![
        vec![1.0, 0.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0, 0.0],
        vec![0.0, 0.0, 2.0, 1.0],
        vec![0.0, 0.0, 1.0, 1.0],
    ])
    .unwrap();
    let xfam = SemicircleFamily::standard(4);
    let mut bad = 0;
    let corpus = 60;
    for k in 0..corpus {
        let (p, y, fam_y, fam_joint): (TracePoly, Vec<usize>, &SemicircleFamily, SemicircleFamily) = if k % 2 == 0 {
            (rand_poly(&mut r, 4, 6, 5, true), vec![2, 3], &yfam, joint.clone())
        } else {
            (rand_poly(&mut r, 2, 6, 5, true), vec![1], &one, SemicircleFamily::standard(2))
        };
        let c = cond_exp(&p, &y, fam_y).unwrap();
        let lhs = tau_trace_poly_exact(&c, &xfam_for(&c, &xfam)).unwrap();
        let rhs = tau_trace_poly_exact(&p, &fam_joint).unwrap();
        if lhs != rhs {
            bad += 1;
        }
    }
    ok &= bad == 0;
    outcome(ok, format!("cond_exp(X2*X1*X2 | y = X2) = {e}; tower property failures {bad}/{corpus}"))
}

fn xfam_for(p: &TracePoly, four: &SemicircleFamily) -> SemicircleFamily {
    if p.nvars() == 4 {
        four.clone()
    } else {
        SemicircleFamily::standard(p.nvars())
    }
}
