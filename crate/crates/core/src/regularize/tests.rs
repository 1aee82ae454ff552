use super::*;
use crate::action::{minimize, perturbed_homothetic_seed, MinimizeOptions};
use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tight() -> OdeOptions {
    OdeOptions { rtol: 1e-13, atol: 1e-14, ..OdeOptions::default() }
}

fn random_interior(rng: &mut ChaCha8Rng) -> State {
    State::new(
        Configuration { x: rng.gen_range(0.2..3.0), y: rng.gen_range(0.2..3.0), z: rng.gen_range(0.2..3.0) },
        [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
    )
}

fn orbit_segment() -> FundamentalSegment {
    let seed = perturbed_homothetic_seed(6.0, 256, 1.5, 0.01, 1).unwrap();
    let opts = MinimizeOptions { mesh_schedule: vec![256], ..Default::default() };
    minimize(&seed, &opts).unwrap().0
}

#[test]
fn covering_example() {
    let s = State::new(Configuration { x: 4.0, y: 1.0, z: 9.0 }, [-2.0, 0.5, 1.0]);
    let r = to_regularized(&s, -1.0, 0.0, [1.0; 3]);
    assert_eq!(r.gamma, 2.0);
    assert_eq!(r.big_gamma, -8.0);
    assert_eq!(r.s, 0.0);
}

#[test]
fn covering_roundtrip_and_sign_flips() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let s = random_interior(&mut rng);
        let base = from_regularized(&to_regularized(&s, 0.0, 0.0, [1.0; 3]));
        let (a, b) = (s.config.to_array(), base.config.to_array());
        for k in 0..3 {
            assert_relative_eq!(a[k], b[k], max_relative = 4.0 * f64::EPSILON);
            assert_relative_eq!(s.velocity[k], base.velocity[k], max_relative = 4.0 * f64::EPSILON);
        }
        for mask in 0..8 {
            let signs = [0, 1, 2].map(|k| if mask >> k & 1 == 1 { -1.0 } else { 1.0 });
            let img = from_regularized(&to_regularized(&s, 0.0, 0.0, signs));
            assert_eq!(img, base);
        }
    }
}

#[test]
fn collision_conjugate_is_the_unit_limit() {
    let s = State::new(Configuration { x: 0.0, y: 1.0, z: 1.0 }, [f64::INFINITY, 0.3, -0.3]);
    let r = to_regularized(&s, -1.0, 0.0, [1.0; 3]);
    assert_eq!((r.gamma, r.big_gamma), (0.0, 1.0));
    let back = from_regularized(&r);
    assert_eq!(back.config.x, 0.0);
    assert_eq!(back.velocity[0], f64::INFINITY);
    assert_relative_eq!(back.velocity[1], 0.3, max_relative = 1e-15);
}

#[test]
fn hamiltonian_examples() {
    let r = RegularizedState {
        gamma: 1.0,
        upsilon: 1.0,
        zeta: 1.0,
        big_gamma: 0.0,
        big_upsilon: 0.0,
        big_z: 0.0,
        s: 0.0,
        t: 0.0,
        h: -2.0,
    };
    assert_relative_eq!(reg_hamiltonian(&r).unwrap(), -3.0 / 2f64.sqrt() - 0.375, max_relative = 1e-15);
    assert_relative_eq!(reg_hamiltonian(&r).unwrap(), -2.4963203, max_relative = 1e-7);
    assert_relative_eq!(f_function(1.0, 1.0, 1.0, 0.0, 0.0, 0.0), -2.3713203, max_relative = 1e-7);
    assert_relative_eq!(f_function(1.0, 1.0, 1.0, 0.0, 0.0, 0.0), -3.0 / 2f64.sqrt() - 0.25, max_relative = 1e-15);
    let d = reg_rhs(&r).unwrap();
    assert_eq!((d[0], d[2], d[4]), (0.0, 0.0, 0.0));
    assert_eq!(d[6], 1.0);
    let c = RegularizedState { gamma: 0.0, ..r };
    assert!(matches!(reg_hamiltonian(&c), Err(Error::Singular(_))));
    assert!(reg_rhs(&c).is_ok());
    let q = RegularizedState { gamma: 0.0, upsilon: 0.0, ..r };
    assert!(matches!(reg_rhs(&q), Err(Error::MultipleCollision(_))));
}

#[test]
fn hamiltonian_agrees_with_the_physical_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let s = random_interior(&mut rng);
        let signs = [0, 1, 2].map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 });
        let r = to_regularized(&s, 0.0, 0.0, signs);
        let h = hamiltonian(&s);
        assert_relative_eq!(reg_hamiltonian(&r).unwrap(), h, epsilon = 1e-12, max_relative = 1e-12);
        let flipped = RegularizedState { gamma: -r.gamma, big_upsilon: -r.big_upsilon, ..r };
        assert_relative_eq!(reg_hamiltonian(&flipped).unwrap(), reg_hamiltonian(&r).unwrap(), max_relative = 1e-15);
    }
}

#[test]
fn field_matches_the_time_rescaled_physical_field() {
    // dX/ds = γ²υ²ζ² · dX/dt on the energy surface
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let s = random_interior(&mut rng);
        let h = hamiltonian(&s);
        let r = to_regularized(&s, h, 0.0, [1.0; 3]);
        let d = reg_rhs(&r).unwrap();
        let clock = s.config.x * s.config.y * s.config.z;
        assert_relative_eq!(d[6], clock, max_relative = 1e-14);
        let acc = gradient_raw(&s.config.to_array());
        let p = s.config.to_array();
        let roots = [r.gamma, r.upsilon, r.zeta];
        let conj = [r.big_gamma, r.big_upsilon, r.big_z];
        for k in 0..3 {
            // γ̇ = ẋ/(2γ), Γ̇ = 2ẍγ + 2ẋγ̇
            let root_dot = s.velocity[k] / (2.0 * roots[k]);
            let conj_dot = 2.0 * acc[k] * roots[k] + 2.0 * s.velocity[k] * root_dot;
            assert_relative_eq!(d[2 * k], clock * root_dot, epsilon = 1e-12, max_relative = 1e-10);
            assert_relative_eq!(d[2 * k + 1], clock * conj_dot, epsilon = 1e-10, max_relative = 1e-9);
            assert!(p[k] > 0.0 && conj[k].is_finite());
        }
    }
}

#[test]
fn regularized_and_physical_flows_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let s = random_interior(&mut rng);
        let h = hamiltonian(&s);
        let phys = integrate_physical(&s, 0.0, 0.1, &tight()).unwrap();
        if phys.stop != ArcStop::SpanEnd {
            continue;
        }
        let r0 = to_regularized(&s, h, 0.0, [1.0; 3]);
        let reg = integrate_reg(&r0, 1.0, &tight()).unwrap();
        let t_max = reg.end().t.min(0.1);
        for i in 1..=10 {
            let t = t_max * i as f64 / 10.0;
            let a = reg.physical_at(reg.s_at_time(t).unwrap());
            let b = phys.state_at(t);
            let (pa, pb) = (a.config.to_array(), b.config.to_array());
            for k in 0..3 {
                assert!((pa[k] - pb[k]).abs() < 1e-8);
                assert!((a.velocity[k] - b.velocity[k]).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn physical_flow_keeps_the_homothetic_ray() {
    let c = 1.0 / 3f64.sqrt();
    let s = State::new(Configuration { x: 2.0 * c, y: 2.0 * c, z: 2.0 * c }, [0.1 * c; 3]);
    let arc = integrate_physical(&s, 0.0, 0.5, &tight()).unwrap();
    for y in &arc.sol.y {
        assert!((y[0] - y[1]).abs() < 1e-10 && (y[1] - y[2]).abs() < 1e-10);
    }
}

#[test]
fn physical_flow_conserves_energy_and_reverses() {
    let s = State::new(Configuration { x: 1.2, y: 1.0, z: 1.9 }, [0.8, -0.6, 0.2]);
    let h = hamiltonian(&s);
    let opts = OdeOptions::default();
    let arc = integrate_physical(&s, 0.0, 1.0, &opts).unwrap();
    assert_eq!(arc.stop, ArcStop::SpanEnd);
    assert!(arc.energy_drift(h) < 1e-10);
    let (t1, s1) = arc.end();
    let back = integrate_physical(&s1, t1, 0.0, &opts).unwrap();
    let b = back.end().1;
    let (p, q) = (s.config.to_array(), b.config.to_array());
    for k in 0..3 {
        assert!((p[k] - q[k]).abs() < 1e-8);
        assert!((s.velocity[k] - b.velocity[k]).abs() < 1e-8);
    }
}

#[test]
fn physical_flow_stops_near_collision() {
    let s = State::new(Configuration { x: 0.05, y: 1.5, z: 1.5 }, [-1.0, 0.0, 0.0]);
    let arc = integrate_physical(&s, 0.0, 1.0, &tight()).unwrap();
    assert_eq!(arc.stop, ArcStop::CollisionApproach(0));
    let (_, e) = arc.end();
    assert_relative_eq!(e.config.x, SWITCH_RATIO * 1.5, max_relative = 1e-3);
    let collided = State::new(Configuration { x: 0.0, y: 1.0, z: 1.0 }, [1.0, 0.0, 0.0]);
    assert!(integrate_physical(&collided, 0.0, 1.0, &tight()).is_err());
}

#[test]
fn symmetric_continuation_through_collision() {
    let r0 = symmetric_collision_state(1.7, -0.4, -1.0);
    let fwd = integrate_reg(&r0, 0.3, &tight()).unwrap();
    let bwd = integrate_reg(&r0, -0.3, &tight()).unwrap();
    for i in 1..=6 {
        let s = 0.05 * i as f64;
        let a = fwd.state_at(s);
        let b = bwd.state_at(-s);
        assert!((a.gamma + b.gamma).abs() < 1e-10);
        assert!((a.big_gamma - b.big_gamma).abs() < 1e-10);
        assert!((a.upsilon - b.zeta).abs() < 1e-10);
        assert!((a.big_upsilon + b.big_z).abs() < 1e-10);
        assert!((a.t + b.t).abs() < 1e-10);
        let (pa, pb) = (from_regularized(&a), from_regularized(&b));
        assert!((pa.config.x - pb.config.x).abs() < 1e-8);
        assert!((pa.config.y - pb.config.z).abs() < 1e-8);
        assert!((pa.config.z - pb.config.y).abs() < 1e-8);
    }
    // clock never runs backward
    let dts: Vec<f64> = fwd.sol.y.iter().map(|y| y[6]).collect();
    assert!(dts.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn passage_conserves_energy_and_locates_the_collision() {
    let s = State::new(Configuration { x: 0.05, y: 1.5, z: 1.4 }, [-1.0, 0.1, -0.2]);
    let arc = integrate_physical(&s, 0.0, 1.0, &OdeOptions::default()).unwrap();
    let (t1, s1) = arc.end();
    let p = continue_through_collision(&s1, t1, None, true, &OdeOptions::default()).unwrap();
    assert_eq!(p.coord, 0);
    assert!(p.collision_time > t1 && p.collision_time < p.exit_time);
    assert!((p.energy_after - p.energy_before).abs() < 1e-9);
    assert!(p.traj.energy_drift(1e-4) < 1e-9);
    assert!(p.exit.velocity[0] > 0.0);
}

#[test]
fn passage_rejects_two_small_coordinates() {
    let s = State::new(Configuration { x: 1e-3, y: 1e-3, z: 1.0 }, [-1.0, -1.0, 0.0]);
    assert!(matches!(
        continue_through_collision(&s, 0.0, None, true, &tight()),
        Err(Error::MultipleCollision(_))
    ));
}

#[test]
fn shooting_refines_the_minimizer() {
    let seg = orbit_segment();
    let (orbit, rep) = refined_orbit(&seg, &tight()).unwrap();
    assert!(rep.residual < 1e-11);
    assert!(rep.max_node_shift < 1e-3);
    assert_eq!(orbit.len(), 6 * seg.cells());
    let refined = crate::symmetry::restrict_to_segment(&orbit).unwrap();
    let v = refined.velocities.unwrap();
    let n = refined.nodes.len() - 1;
    assert!(v[n][2].abs() < 1e-10);
    assert!((v[n][0] + v[n][1]).abs() < 1e-10);
    assert_relative_eq!(v[0][1], -v[0][2], max_relative = 1e-15);
}

#[test]
fn backward_continuation_mirrors_the_orbit() {
    let seg = orbit_segment();
    let (orbit, rep) = refined_orbit(&seg, &tight()).unwrap();
    let start = symmetric_collision_state(rep.w, rep.v, rep.energy);
    let re = reintegrate_from_collision(&start, orbit.period, &tight()).unwrap();
    let t12 = orbit.period / 12.0;
    let fwd = re.state_at(t12);
    let arc = integrate_physical(&fwd, t12, -t12, &tight()).unwrap();
    let (t1, s1) = arc.end();
    let p = continue_through_collision(&s1, t1, Some(rep.energy), false, &tight()).unwrap();
    assert!(p.collision_time.abs() < 1e-10);
    assert!((p.energy_after - p.energy_before).abs() < 1e-9);
    let back = integrate_physical(&p.exit, p.exit_time, -t12, &tight()).unwrap().end().1;
    assert!((fwd.config.x - back.config.x).abs() < 1e-7);
    assert!((fwd.config.y - back.config.z).abs() < 1e-7);
    assert!((fwd.config.z - back.config.y).abs() < 1e-7);
}

#[test]
fn reintegration_finds_three_collisions_per_period() {
    let seg = orbit_segment();
    let (orbit, rep) = refined_orbit(&seg, &tight()).unwrap();
    let start = symmetric_collision_state(rep.w, rep.v, rep.energy);
    let re = reintegrate_from_collision(&start, orbit.period, &tight()).unwrap();
    let coords: Vec<usize> = re.passages.iter().map(|p| p.coord).collect();
    assert_eq!(coords, vec![1, 2, 0]);
    for (p, t) in re.passages.iter().zip([2.0, 4.0, 6.0]) {
        assert!((p.collision_time - t).abs() < 1e-8);
        assert!((p.energy_after - p.energy_before).abs() < 1e-9);
    }
    assert!(re.physical_energy_drift() < 1e-9);
}

#[test]
fn refinement_is_independent_of_the_mesh_grading() {
    let reference = refined_orbit(&orbit_segment(), &tight()).unwrap().1;
    for p in [1.0, 3.0] {
        let seed = perturbed_homothetic_seed(6.0, 256, p, 0.01, 1).unwrap();
        let opts = MinimizeOptions { mesh_schedule: vec![256], mesh_p: p, ..Default::default() };
        let seg = minimize(&seed, &opts).unwrap().0;
        let rep = refined_orbit(&seg, &tight()).unwrap().1;
        assert_relative_eq!(rep.energy, reference.energy, max_relative = 1e-10);
        assert_relative_eq!(rep.w, reference.w, max_relative = 1e-10);
        assert_relative_eq!(rep.v, reference.v, max_relative = 1e-9);
    }
}
