//! Acceptance gate. Runs each criterion at its stated tolerance, prints one
//! PASS/FAIL line per criterion and exits nonzero if any fails.

use std::process::ExitCode;

use malaria_dde::defaults::{default_t_end, LYAPUNOV_SLACK, TAIL_WINDOW};
use malaria_dde::engine::{convergence_order, integrate, IntegrationSpec, SystemKind};
use malaria_dde::equilibria::{
    basic_reproduction_number, disease_free_equilibrium, endemic_equilibrium, equilibrium_residual,
    r0_squared,
};
use malaria_dde::lyapunov::{descend_check, FunctionalKind};
use malaria_dde::model::{HistorySegment, ModelParams, State};
use malaria_dde::persistence::{persistence_bounds, weak_persistence_check};
use malaria_dde::scenario::random_history;
use malaria_dde::spectral::{
    classify, imaginary_axis_root_exists, rightmost_real_root, routh_hurwitz_tau0,
    CharacteristicCoeffs, Classification, DfeCharCoeffs, EndemicCharCoeffs, Equilibrium,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

fn p1() -> ModelParams {
    ModelParams::new(2.0, 5.0, 0.5, 0.1, 0.2, 0.1, 1.0)
}

fn p2() -> ModelParams {
    ModelParams {
        c_vh: 0.05,
        c_hv: 0.05,
        ..p1()
    }
}

fn critical() -> ModelParams {
    ModelParams::new(1.0, 5.0, 1.0, 0.25, 0.5, 0.5, 1.0)
}

fn rng(criterion: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5eed_0000 + criterion)
}

fn random_params(rng: &mut ChaCha8Rng) -> ModelParams {
    ModelParams::new(
        rng.gen_range(0.1..10.0),
        rng.gen_range(0.1..50.0),
        rng.gen_range(0.05..2.0),
        rng.gen_range(0.05..2.0),
        rng.gen_range(0.01..2.0),
        rng.gen_range(0.01..2.0),
        rng.gen_range(0.0..2.0),
    )
}

fn random_params_where(rng: &mut ChaCha8Rng, keep: impl Fn(f64) -> bool) -> ModelParams {
    loop {
        let p = random_params(rng);
        if keep(r0_squared(&p)) {
            return p;
        }
    }
}

/// Initial function in `C+`; with `min_positive > 0` every component is at
/// least that large, which puts it in `D` and `Omega2`.
fn random_phi(rng: &mut ChaCha8Rng, p: &ModelParams, min_positive: f64) -> HistorySegment {
    let low = [min_positive; 4];
    let high = [2.0 * p.s_h0(), p.s_h0(), 2.0 * p.s_v0(), p.s_v0()];
    random_history(rng, &low, &high, 5, p.tau)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn criterion_1() -> Outcome {
    let mut rng = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = random_params(&mut rng);
        let r0 =
            equilibrium_residual(&p, &disease_free_equilibrium(&p)).map_err(|e| e.to_string())?;
        ensure(r0 == 0.0, || format!("E0 residual {r0:e} for {p:?}"))?;
        if let Some(e) = endemic_equilibrium(&p) {
            let r = equilibrium_residual(&p, &e).map_err(|e| e.to_string())?;
            ensure(r < 1e-10, || format!("E* residual {r:e} for {p:?}"))?;
            worst = worst.max(r);
        }
    }
    let e = endemic_equilibrium(&p1()).ok_or("P1 has no E*")?;
    let d = e.dist(&State::new(3.571429, 0.428571, 35.0, 15.0));
    ensure(d <= 1e-5, || format!("P1 E* = {e}, off by {d:e}"))?;
    Ok(format!("worst E* residual {worst:.1e}, P1 E* = {e}"))
}

fn criterion_2() -> Outcome {
    let mut rng = rng(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = random_params_where(&mut rng, |r2| r2 > 1.0);
        let r0 = basic_reproduction_number(&p);
        let r2 = r0_squared(&p);
        let q = DfeCharCoeffs::new(&p);
        let m = EndemicCharCoeffs::new(&p).map_err(|e| e.to_string())?;
        let e = endemic_equilibrium(&p).ok_or("no E*")?;
        let errs = [
            rel_err(q.q2 + q.q3, p.mu_v * p.mu_h * (1.0 - r2)),
            rel_err(m.p2 + m.p3, (r0 + 1.0) * p.mu_v * p.mu_h * (r0 - 1.0)),
            rel_err(p.s_v0() * p.s_h0() / (e.s_v * e.s_h), r2),
        ];
        let max = errs.iter().cloned().fold(0.0, f64::max);
        ensure(max <= 1e-10, || {
            format!("relative errors {errs:?} for {p:?}")
        })?;
        worst = worst.max(max);
    }
    Ok(format!("worst relative error {worst:.1e}"))
}

fn criterion_3() -> Outcome {
    let mut rng = rng(3);
    let mut checked = 0;
    for i in 0..50 {
        let base = if i % 2 == 0 {
            random_params_where(&mut rng, |r2| r2 < 1.0)
        } else {
            random_params_where(&mut rng, |r2| r2 > 1.0)
        };
        for tau in [0.0, 0.5, 2.0] {
            let p = ModelParams { tau, ..base };
            let dfe = DfeCharCoeffs::new(&p);
            let root = rightmost_real_root(&dfe, 1e3).map_err(|e| format!("{e} for {p:?}"))?;
            if r0_squared(&p) < 1.0 {
                ensure(root.is_none_or(|r| r < 0.0), || {
                    format!("E0 root {root:?} for {p:?}")
                })?;
                let (_, b) = dfe.quasi_polynomial().imaginary_axis_quartic();
                ensure(b > 0.0 && !imaginary_axis_root_exists(&dfe), || {
                    format!("E0 axis root, B = {b} for {p:?}")
                })?;
                let c = classify(&p, Equilibrium::E0).map_err(|e| e.to_string())?;
                ensure(c.evidence_consistent(), || format!("E0 evidence {c:?}"))?;
            } else {
                ensure(root.is_some_and(|r| r > 0.0), || {
                    format!("E0 root {root:?} for {p:?}")
                })?;
                let end = EndemicCharCoeffs::new(&p).map_err(|e| e.to_string())?;
                ensure(routh_hurwitz_tau0(&end), || {
                    format!("E* Routh-Hurwitz fails for {p:?}")
                })?;
                ensure(!imaginary_axis_root_exists(&end), || {
                    format!("E* axis root for {p:?}")
                })?;
                let c = classify(&p, Equilibrium::EStar).map_err(|e| e.to_string())?;
                ensure(c.evidence_consistent(), || format!("E* evidence {c:?}"))?;
            }
            checked += 1;
        }
    }
    let p = ModelParams { tau: 0.0, ..p1() };
    let anchor = rightmost_real_root(&DfeCharCoeffs::new(&p), 10.0)
        .map_err(|e| e.to_string())?
        .ok_or("no DFE root for P1")?;
    ensure((anchor - 0.0464102).abs() <= 1e-6, || {
        format!("P1 DFE root {anchor}")
    })?;
    Ok(format!(
        "{checked} (set, tau) pairs, P1 DFE root {anchor:.7}"
    ))
}

fn criterion_4() -> Outcome {
    let mut orders = Vec::new();
    for (p, phi) in [
        (p1(), State::new(3.0, 1.0, 30.0, 5.0)),
        (p2(), State::new(4.0, 1.0, 50.0, 10.0)),
    ] {
        let spec = IntegrationSpec::new(SystemKind::Full, 20.0).with_steps_per_delay(4);
        let est = convergence_order(&p, &HistorySegment::constant(phi), &spec)
            .map_err(|e| e.to_string())?;
        let order = est.order.ok_or("errors below the exactness threshold")?;
        ensure((3.5..=4.5).contains(&order), || {
            format!("order {order} ({est:?})")
        })?;
        orders.push(order);
    }

    let mut rng = rng(4);
    let mut worst_total = 0.0f64;
    for p in [p1(), p2()] {
        for _ in 0..10 {
            let phi = random_phi(&mut rng, &p, 0.0);
            let traj = integrate(&p, &phi, &IntegrationSpec::new(SystemKind::Full, 100.0))
                .map_err(|e| e.to_string())?;
            let n0 = phi.at_zero().n_v();
            for (t, s) in traj.nodes() {
                let exact = p.s_v0() + (n0 - p.s_v0()) * (-p.mu_v * t).exp();
                worst_total = worst_total.max((s.n_v() - exact).abs());
            }
        }
    }
    ensure(worst_total < 1e-6, || {
        format!("mosquito total off by {worst_total:e}")
    })?;

    let mut runs = 0;
    for _ in 0..40 {
        let p = random_params(&mut rng);
        let phi = random_phi(&mut rng, &p, 0.0);
        let traj = integrate(
            &p,
            &phi,
            &IntegrationSpec::new(SystemKind::Full, default_t_end(&p).min(400.0)),
        )
        .map_err(|e| format!("{e} for {p:?}"))?;
        ensure(traj.states().iter().all(State::is_nonnegative), || {
            format!("negative state for {p:?}")
        })?;
        runs += 1;
    }
    Ok(format!(
        "orders P1 {:.2}, P2 {:.2}; mosquito total error {worst_total:.1e}; {runs} random runs nonnegative",
        orders[0], orders[1]
    ))
}

/// Largest final distance to `target` over `n` random initial functions.
fn worst_final_distance(
    rng: &mut ChaCha8Rng,
    p: &ModelParams,
    target: &State,
    min_positive: f64,
    n: usize,
) -> Result<f64, String> {
    let spec = IntegrationSpec::new(SystemKind::Full, default_t_end(p));
    let mut worst = 0.0f64;
    for _ in 0..n {
        let phi = random_phi(rng, p, min_positive);
        let traj = integrate(p, &phi, &spec).map_err(|e| e.to_string())?;
        worst = worst.max(traj.final_state().dist(target));
    }
    Ok(worst)
}

fn criterion_5() -> Outcome {
    let mut rng = rng(5);
    let sub = worst_final_distance(&mut rng, &p2(), &disease_free_equilibrium(&p2()), 0.0, 10)?;
    let crit = worst_final_distance(
        &mut rng,
        &critical(),
        &disease_free_equilibrium(&critical()),
        0.0,
        10,
    )?;
    let e = endemic_equilibrium(&p1()).ok_or("P1 has no E*")?;
    let sup = worst_final_distance(&mut rng, &p1(), &e, 1e-2, 10)?;
    let verdict = |d: f64| if d < 1e-3 { "ok" } else { "FAIL" };
    let detail = format!(
        "R0<1 max dist {sub:.1e} {}; R0=1 max dist {crit:.1e} {}; R0>1 max dist {sup:.1e} {}",
        verdict(sub),
        verdict(crit),
        verdict(sup)
    );
    ensure(sub < 1e-3 && crit < 1e-3 && sup < 1e-3, || detail.clone())?;
    Ok(detail)
}

fn criterion_6() -> Outcome {
    let mut rng = rng(6);
    let mut worst_final = 0.0f64;
    for (p, kind) in [
        (p2(), FunctionalKind::Vdfe),
        (p1(), FunctionalKind::Vendemic),
    ] {
        for _ in 0..20 {
            let phi = random_phi(&mut rng, &p, 1e-2);
            let tr = descend_check(&p, &phi, kind, default_t_end(&p)).map_err(|e| e.to_string())?;
            let slack = LYAPUNOV_SLACK * (1.0 + tr.values[0].abs());
            ensure(tr.max_increase <= slack, || {
                format!("{} rose by {:e} > {slack:e}", kind.label(), tr.max_increase)
            })?;
            ensure(tr.final_value() < 1e-3, || {
                format!("{} ends at {:e}", kind.label(), tr.final_value())
            })?;
            worst_final = worst_final.max(tr.final_value());
        }
    }
    Ok(format!(
        "40 traces descend, largest V(t_end) {worst_final:.1e}"
    ))
}

fn criterion_7() -> Outcome {
    let mut rng = rng(7);
    let p = p1();
    let thetas = [0.1, 0.5, 0.9];
    let mut min_margin = f64::INFINITY;
    for _ in 0..10 {
        let phi = random_phi(&mut rng, &p, 1e-2);
        for theta in thetas {
            let r = weak_persistence_check(&p, &phi, theta, default_t_end(&p), TAIL_WINDOW)
                .map_err(|e| e.to_string())?;
            ensure(r.passes, || {
                format!(
                    "theta {theta}: tail sup {} <= {}",
                    r.i_h_tail_sup, r.threshold
                )
            })?;
            min_margin = min_margin.min(r.i_h_tail_sup - r.threshold);
        }
    }
    let mut bound_checks = 0;
    for i in 0..100 {
        let q = if i == 0 {
            p1()
        } else {
            random_params_where(&mut rng, |r2| r2 > 1.0)
        };
        let e = endemic_equilibrium(&q).ok_or("no E*")?;
        for k in 1..10 {
            let b = persistence_bounds(&q, k as f64 / 10.0).map_err(|e| e.to_string())?;
            ensure(b.dominates(&e), || {
                format!("bounds {b:?} vs E* {e} for {q:?}")
            })?;
            bound_checks += 1;
        }
    }
    let b = persistence_bounds(&p, 0.5).map_err(|e| e.to_string())?;
    ensure(
        (b.s_v_bar - 41.176471).abs() <= 1e-5 && (b.s_h_bar - 3.736264).abs() <= 1e-5,
        || format!("anchors {} {}", b.s_v_bar, b.s_h_bar),
    )?;
    Ok(format!(
        "30 checks pass (min margin {min_margin:.3}), {bound_checks} bound pairs hold"
    ))
}

/// Everything the delay must leave untouched.
type Snapshot = (
    f64,
    State,
    Option<State>,
    Classification,
    Option<Classification>,
);

fn criterion_8() -> Outcome {
    let mut rng = rng(8);
    let mut sets = vec![p1(), p2(), critical()];
    sets.extend((0..10).map(|_| random_params(&mut rng)));
    let mut compared = 0;
    for base in &sets {
        let snapshot = |tau: f64| -> Result<Snapshot, String> {
            let p = ModelParams { tau, ..*base };
            let c0 = classify(&p, Equilibrium::E0)
                .map_err(|e| e.to_string())?
                .classification;
            let cs = match endemic_equilibrium(&p) {
                Some(_) => Some(
                    classify(&p, Equilibrium::EStar)
                        .map_err(|e| e.to_string())?
                        .classification,
                ),
                None => None,
            };
            Ok((
                basic_reproduction_number(&p),
                disease_free_equilibrium(&p),
                endemic_equilibrium(&p),
                c0,
                cs,
            ))
        };
        let reference = snapshot(0.0)?;
        for tau in [0.5, 1.0, 2.0, 5.0] {
            let s = snapshot(tau)?;
            ensure(s == reference, || {
                format!("tau {tau} changed {reference:?} to {s:?}")
            })?;
            compared += 1;
        }
    }
    Ok(format!(
        "{} parameter sets, {compared} delays compared against tau = 0",
        sets.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 8] = [
        ("equilibrium oracle", criterion_1),
        ("threshold identities", criterion_2),
        ("spectral trichotomy", criterion_3),
        ("integrator order and conservation", criterion_4),
        ("global convergence", criterion_5),
        ("Lyapunov descent", criterion_6),
        ("weak persistence", criterion_7),
        ("delay independence", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
