use malaria_dde::equilibria::{disease_free_equilibrium, endemic_equilibrium};
use malaria_dde::spectral::{classify, Classification, Equilibrium};
use malaria_dde::{integrate, HistorySegment, IntegrationSpec, ModelParams, State, SystemKind};

fn p1() -> ModelParams {
    ModelParams::new(2.0, 5.0, 0.5, 0.1, 0.2, 0.1, 1.0)
}

fn nudge(s: State) -> State {
    State {
        i_h: s.i_h + 1e-3,
        ..s
    }
}

#[test]
fn unstable_disease_free_state_repels() {
    let p = p1();
    assert_eq!(
        classify(&p, Equilibrium::E0).unwrap().classification,
        Classification::Unstable
    );
    let e0 = disease_free_equilibrium(&p);
    let traj = integrate(
        &p,
        &HistorySegment::constant(nudge(e0)),
        &IntegrationSpec::new(SystemKind::Full, 50.0),
    )
    .unwrap();
    let start = traj.states()[0].dist(&e0);
    let end = traj.final_state().dist(&e0);
    assert!(end > 2.0 * start, "{start} -> {end}");
}

#[test]
fn stable_endemic_state_attracts() {
    let p = p1();
    let e = endemic_equilibrium(&p).unwrap();
    let traj = integrate(
        &p,
        &HistorySegment::constant(nudge(e)),
        &IntegrationSpec::new(SystemKind::Full, 400.0),
    )
    .unwrap();
    assert!(
        traj.final_state().dist(&e) < 1e-8,
        "{}",
        traj.final_state().dist(&e)
    );
}

#[test]
fn limiting_system_tracks_full_system_once_mosquitoes_settle() {
    let p = p1();
    let phi = HistorySegment::constant(State::new(3.0, 0.1, 20.0, 10.0));
    let full = integrate(&p, &phi, &IntegrationSpec::new(SystemKind::Full, 400.0)).unwrap();
    let lim = integrate(&p, &phi, &IntegrationSpec::new(SystemKind::Limiting, 400.0)).unwrap();
    let e = endemic_equilibrium(&p).unwrap();
    assert!(full.final_state().dist(&e) < 1e-4);
    assert!(lim.final_state().dist(&e) < 1e-4);
}
