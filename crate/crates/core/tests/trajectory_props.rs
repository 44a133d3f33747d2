// SPDX-License-Identifier: Apache-2.0 OR MIT

use nalgebra::{DMatrix, DVector, SVD};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uatg::trajectory::{
    allocate_segment_times, build_min_snap_qp, check_dynamic_limits, generate_trajectory, generate_trajectory_with,
    time_scale, Boundary,
};
use uatg::{DroneParams, Point3, Trajectory};

/// Degree-7 polynomial on [0, 1] from 0 to 1 with zero velocity,
/// acceleration and jerk at both ends, from its 8 boundary conditions.
fn unit_oracle() -> Vec<f64> {
    let mut a = DMatrix::zeros(8, 8);
    let mut b = DVector::zeros(8);
    let falling = |m: usize, r: usize| (0..r).map(|i| (m - i) as f64).product::<f64>();
    for r in 0..4 {
        // tau = 0: only the c_r term survives.
        a[(r, r)] = falling(r, r);
        // tau = 1
        for m in r..8 {
            a[(4 + r, m)] = falling(m, r);
        }
    }
    b[4] = 1.0;
    a.lu().solve(&b).unwrap().as_slice().to_vec()
}

fn random_waypoints(rng: &mut ChaCha8Rng) -> Vec<Point3> {
    random_path(rng, 2)
}

fn random_path(rng: &mut ChaCha8Rng, min_points: usize) -> Vec<Point3> {
    let n = rng.gen_range(min_points..=5);
    let mut pts: Vec<Point3> = Vec::new();
    while pts.len() < n {
        let p = Point3::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(0.0..10.0));
        if pts.last().is_none_or(|q: &Point3| q.distance(&p) > 1.0) {
            pts.push(p);
        }
    }
    pts
}

fn axis_coefficients(traj: &Trajectory, axis: usize) -> DVector<f64> {
    DVector::from_iterator(
        traj.segments.iter().map(|s| s.axis(axis).len()).sum(),
        traj.segments.iter().flat_map(|s| s.axis(axis).to_vec()),
    )
}

#[test]
fn unit_fixture_matches_the_boundary_value_oracle() {
    let oracle = unit_oracle();
    let closed_form = [0.0, 0.0, 0.0, 0.0, 35.0, -84.0, 70.0, -20.0];
    for (o, c) in oracle.iter().zip(closed_form) {
        assert!((o - c).abs() < 1e-9);
    }
    let traj = generate_trajectory(&[Point3::origin(), Point3::new(1.0, 0.0, 0.0)], &[1.0], &DroneParams::default())
        .unwrap();
    let x = traj.segments[0].axis(0);
    for (got, want) in x.iter().zip(&oracle) {
        assert!((got - want).abs() < 1e-9, "{x:?}");
    }
    assert!(traj.segments[0].axis(1).iter().all(|&c| c == 0.0));
    let mid = traj.sample(0.5).unwrap();
    assert!((mid.velocity.x - 35.0 / 16.0).abs() < 1e-9);
}

#[test]
fn null_space_perturbations_never_lower_the_snap_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        // A single segment is fully determined; freedom starts at two.
        let waypoints = random_path(&mut rng, 3);
        let durations = allocate_segment_times(&waypoints, 2.0).unwrap();
        let qp = build_min_snap_qp(&waypoints, &durations, Boundary::Rest, 7).unwrap();
        let traj = generate_trajectory_with(&waypoints, &durations, Boundary::Rest, 7, 0.0).unwrap();

        let a = &qp.eq_matrix;
        // Zero rows square the matrix so the SVD returns a full right basis.
        let n = qp.unknowns();
        let mut padded = DMatrix::zeros(n, n);
        padded.rows_mut(0, a.nrows()).copy_from(a);
        let svd = SVD::new(padded, false, true);
        let v_t = svd.v_t.unwrap();
        let top = svd.singular_values.max();
        let basis: Vec<DVector<f64>> = (0..n)
            .filter(|&i| svd.singular_values[i] <= 1e-10 * top)
            .map(|i| v_t.row(i).transpose())
            .collect();
        assert_eq!(basis.len(), qp.unknowns() - qp.constraints());

        for axis in 0..3 {
            let c = axis_coefficients(&traj, axis);
            let residual = (a * &c - &qp.axis_rhs[axis]).amax();
            assert!(residual < 1e-8, "residual {residual}");
            let cost = |v: &DVector<f64>| v.dot(&(&qp.hessian * v));
            let base = cost(&c);
            for k in 0..100 {
                let scale = [1e-6, 1e-3, 1e-1, 1.0][k % 4] * c.norm().max(1.0);
                let mut delta = DVector::zeros(c.len());
                for n in &basis {
                    delta += n * rng.gen_range(-1.0..1.0);
                }
                let delta = delta.normalize() * scale;
                assert!((a * &delta).amax() < 1e-8 * scale.max(1.0));
                let perturbed = cost(&(&c + &delta));
                assert!(perturbed >= base - 1e-9 * base.max(1.0), "{perturbed} < {base}");
            }
        }
    }
}

#[test]
fn junctions_are_continuous_through_jerk() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let waypoints = random_waypoints(&mut rng);
        let durations = allocate_segment_times(&waypoints, rng.gen_range(0.5..3.0)).unwrap();
        let traj = generate_trajectory(&waypoints, &durations, &DroneParams::default()).unwrap();
        let jumps = traj.junction_jumps();
        assert!(jumps.iter().all(|&j| j <= 1e-6), "{jumps:?}");
        // Waypoints are hit at the segment boundaries.
        let mut t = 0.0;
        for (w, d) in waypoints.iter().zip(durations.iter().chain([&0.0])) {
            assert!(traj.position(t).distance(w) < 1e-6);
            t += d;
        }
    }
}

#[test]
fn derivatives_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = 1e-5;
    for _ in 0..30 {
        let waypoints = random_waypoints(&mut rng);
        let durations = allocate_segment_times(&waypoints, 2.0).unwrap();
        let traj = generate_trajectory(&waypoints, &durations, &DroneParams::default()).unwrap();
        for _ in 0..40 {
            let t = rng.gen_range(h..traj.end_time() - h);
            let s = traj.sample(t).unwrap();
            let fd_v = (traj.position(t + h).coords() - traj.position(t - h).coords()) / (2.0 * h);
            assert!((fd_v - s.velocity).amax() < 1e-4, "{fd_v} vs {}", s.velocity);
            let fd_a = (traj.sample(t + h).unwrap().velocity - traj.sample(t - h).unwrap().velocity) / (2.0 * h);
            assert!((fd_a - s.acceleration).amax() < 1e-4);
            let fd_j = (traj.sample(t + h).unwrap().acceleration - traj.sample(t - h).unwrap().acceleration) / (2.0 * h);
            assert!((fd_j - s.jerk).amax() < 1e-4);
        }
    }
}

#[test]
fn rest_to_rest_moves_are_one_shared_profile() {
    // Any single-segment rest-to-rest move is a + (b - a) s(t / T) for the
    // unit profile s, so positions are affine in the endpoints.
    let p = DroneParams::default();
    let unit = generate_trajectory(&[Point3::origin(), Point3::new(1.0, 0.0, 0.0)], &[7.0], &p).unwrap();
    let a = Point3::new(1.0, -2.0, 3.0);
    let b = Point3::new(-4.0, 6.0, 11.0);
    let traj = generate_trajectory(&[a, b], &[7.0], &p).unwrap();
    for k in 0..=70 {
        let t = k as f64 * 0.1;
        let s = unit.position(t).x;
        let want = a.coords() + (b.coords() - a.coords()) * s;
        assert!((traj.position(t).coords() - want).amax() < 1e-9);
    }
}

proptest! {
    #[test]
    fn time_scaling_follows_the_chain_rule(
        x in -20.0f64..20.0, y in -20.0f64..20.0, z in 1.0f64..20.0,
        duration in 1.0f64..20.0, factor in 1.0f64..4.0, frac in 0.0f64..1.0,
    ) {
        let p = DroneParams::default();
        let traj = generate_trajectory(&[Point3::origin(), Point3::new(x, y, z)], &[duration], &p).unwrap();
        let slow = time_scale(&traj, factor).unwrap();
        prop_assert!((slow.duration() - factor * duration).abs() < 1e-9 * factor * duration);
        let t = frac * duration;
        let a = traj.sample(t).unwrap();
        let b = slow.sample(factor * t).unwrap();
        prop_assert!(a.position.distance(&b.position) < 1e-9);
        prop_assert!((a.velocity / factor - b.velocity).amax() < 1e-9);
        prop_assert!((a.acceleration / factor.powi(2) - b.acceleration).amax() < 1e-9);
        prop_assert!((a.jerk / factor.powi(3) - b.jerk).amax() < 1e-9);
        // Peaks can only drop.
        let before = check_dynamic_limits(&traj, &p, 0.05).unwrap();
        let after = check_dynamic_limits(&slow, &p, 0.05).unwrap();
        prop_assert!(after.max_speed <= before.max_speed * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn factors_below_one_are_rejected(factor in 0.0f64..0.999) {
        let traj = generate_trajectory(&[Point3::origin(), Point3::new(1.0, 0.0, 0.0)], &[1.0], &DroneParams::default()).unwrap();
        prop_assert!(time_scale(&traj, factor).is_err());
    }
}
