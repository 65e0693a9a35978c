use std::path::PathBuf;

use entrap_core::engine::{collision_monitor, run, Feed, Integrator, Sensing, Simulation, WorldState};
use entrap_core::scenario::{FollowerSpec, FollowerState, Prepared, Scenario};
use entrap_core::{Error, Vec2};

fn load(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"));
    Scenario::from_path(&path).unwrap()
}

fn start(p: &Prepared) -> WorldState {
    p.simulation
        .initial_state(0.0, &p.run.followers, p.run.rho_hat.clone())
        .unwrap()
}

fn advance(sim: &Simulation, mut w: WorldState, dt: f64, steps: usize) -> WorldState {
    for _ in 0..steps {
        w = sim.step(&w, dt).unwrap();
    }
    w
}

fn max_diff(a: &[Vec2], b: &[Vec2]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max)
}

#[test]
fn desired_state_with_true_distances_is_a_fixed_point() {
    let mut s = load("static_leaders");
    s.followers = FollowerSpec::DesiredOffset {
        position_offsets: vec![Vec2::zeros(); 4],
        velocities: None,
    };
    s.uncertainty = vec![Default::default()];
    s.smooth_sgn = Some(1.0);
    s.feed = Feed::Exact;
    let p = s.prepare().unwrap();
    let w0 = start(&p);
    let w1 = advance(&p.simulation, w0.clone(), 1e-3, 100);
    let (dp, dv) = (
        max_diff(&w0.positions, &w1.positions),
        max_diff(&w0.velocities, &w1.velocities),
    );
    assert!(dp < 1e-9 && dv < 1e-9, "drift {dp:e} {dv:e}");
}

#[test]
fn target_advances_with_its_velocity() {
    let p = load("baseline_2d").prepare().unwrap();
    let w0 = start(&p);
    let w1 = advance(&p.simulation, w0.clone(), 1e-3, 10);
    let moved = w1.target - w0.target;
    assert!((moved - Vec2::new(5e-3, 5e-3)).amax() < 1e-12);
    assert!((w1.t - 1e-2).abs() < 1e-12);
}

#[test]
fn leaders_follow_their_generators() {
    let p = load("baseline_2d").prepare().unwrap();
    let w = advance(&p.simulation, start(&p), 1e-3, 250);
    let expected: Vec<Vec2> = p.simulation.leader_states(w.t).iter().map(|k| k.p).collect();
    assert!(max_diff(&w.positions[..3], &expected) < 1e-12);
}

#[test]
fn coincident_followers_collide_at_start() {
    let mut s = load("static_leaders");
    let p = s.prepare().unwrap();
    let mut states: Vec<FollowerState> = p.run.followers.iter().map(|&(p, v)| FollowerState { p, v }).collect();
    states[1].p = states[0].p;
    s.followers = FollowerSpec::Explicit { states };
    let p = s.prepare().unwrap();
    match run(&p.simulation, &p.run) {
        Err(Error::CollisionDetected { t, i, j, distance }) => {
            assert_eq!(t, 0.0);
            assert_eq!((i, j), (4, 5));
            assert_eq!(distance, 0.0);
        }
        other => panic!("expected a collision, got {other:?}"),
    }
}

#[test]
fn collision_monitor_finds_closest_pair() {
    assert_eq!(collision_monitor(&[]), (f64::INFINITY, None));
    assert_eq!(collision_monitor(&[Vec2::new(1.0, 2.0)]), (f64::INFINITY, None));
    let pts = [
        Vec2::new(0.0, 0.0),
        Vec2::new(3.0, 0.0),
        Vec2::new(3.0, 0.5),
        Vec2::new(-2.0, 0.0),
    ];
    let (d, pair) = collision_monitor(&pts);
    assert!((d - 0.5).abs() < 1e-15);
    assert_eq!(pair, Some((1, 2)));
}

#[test]
fn runs_are_deterministic() {
    let mut s = load("certified_2d");
    s.integrator.horizon = 2.0;
    let p = s.prepare().unwrap();
    let a = run(&p.simulation, &p.run).unwrap();
    let b = run(&p.simulation, &p.run).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(
        serde_json::to_string(&a.summary).unwrap(),
        serde_json::to_string(&b.summary).unwrap()
    );
}

fn terminal(s: &Scenario, method: Integrator, dt: f64, horizon: f64) -> WorldState {
    let mut s = s.clone();
    s.integrator.method = method;
    let p = s.prepare().unwrap();
    advance(&p.simulation, start(&p), dt, (horizon / dt).round() as usize)
}

#[test]
fn integrators_converge_at_their_order() {
    let mut s = load("certified_2d");
    s.smooth_sgn = Some(0.5);
    let horizon = 0.5;
    let reference = terminal(&s, Integrator::Rk4, 1e-4, horizon);
    let err = |m, dt| {
        let w = terminal(&s, m, dt, horizon);
        max_diff(&w.positions, &reference.positions).max(max_diff(&w.velocities, &reference.velocities))
    };
    let euler = err(Integrator::Euler, 4e-3) / err(Integrator::Euler, 2e-3);
    let rk4 = err(Integrator::Rk4, 2e-2) / err(Integrator::Rk4, 1e-2);
    assert!((1.7..2.3).contains(&euler), "euler ratio {euler}");
    assert!((12.0..20.0).contains(&rk4), "rk4 ratio {rk4}");
}

#[test]
fn finite_difference_sensing_tracks_exact_sensing() {
    let mut s = load("certified_2d");
    s.smooth_sgn = Some(0.5);
    let exact = terminal(&s, Integrator::Euler, 1e-3, 1.0);
    s.sensing = Sensing::FiniteDifference;
    let fd = terminal(&s, Integrator::Euler, 1e-3, 1.0);
    let d = max_diff(&fd.positions, &exact.positions);
    assert!(d > 0.0 && d < 1e-2, "difference {d}");
}

#[test]
fn finite_difference_sensing_needs_euler() {
    let mut s = load("certified_2d");
    s.sensing = Sensing::FiniteDifference;
    s.integrator.method = Integrator::Rk4;
    assert!(s.prepare().is_err());
}
