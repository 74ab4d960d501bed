mod common;

use common::{close, rng, scenario};
use multiuav::error::Error;
use multiuav::model::{
    channel_gain, evaluate_rates, min_slots_for_accuracy, sinr, validate_feasibility, Point,
    PowerProfile, Scenario, ScenarioParams, Schedule, ScheduleMode, Trajectory, ViolationKind,
};
use rand::Rng;

fn one_user() -> Scenario {
    Scenario::new(ScenarioParams::with_users(vec![Point::new(0.0, 0.0)])).unwrap()
}

#[test]
fn gain_directly_overhead() {
    let s = one_user();
    assert!(close(channel_gain(&s, Point::new(0.0, 0.0), 0).unwrap(), 1e-10, 1e-24));
}

#[test]
fn gain_halves_at_altitude_offset() {
    let s = one_user();
    assert!(close(channel_gain(&s, Point::new(0.0, 100.0), 0).unwrap(), 5e-11, 1e-24));
}

#[test]
fn gain_matches_formula_at_random_points() {
    let mut r = rng(11);
    let s = one_user();
    for _ in 0..200 {
        let q = Point::new(r.gen_range(-2e3..2e3), r.gen_range(-2e3..2e3));
        let expect = 1e-6 / (100.0f64.powi(2) + q.x * q.x + q.y * q.y);
        let got = channel_gain(&s, q, 0).unwrap();
        assert!((got - expect).abs() <= 1e-14 * expect);
    }
}

#[test]
fn gain_bad_user_index() {
    assert!(matches!(channel_gain(&one_user(), Point::default(), 3), Err(Error::Index(_))));
}

#[test]
fn sinr_single_uav_is_snr() {
    let s = one_user();
    let q = Trajectory::stationary(&[Point::new(0.0, 0.0)], 60);
    let p = PowerProfile::full(&s);
    assert!(close(sinr(&s, &q, &p, 0, 0, 5).unwrap(), 1000.0, 1e-9));
}

#[test]
fn sinr_silent_interferer_matches_single_uav() {
    let users = vec![Point::new(0.0, 0.0)];
    let s2 = scenario(users.clone(), 2, 60.0, 60);
    let q2 = Trajectory::stationary(&[Point::new(30.0, 0.0), Point::new(200.0, 0.0)], 60);
    let mut p2 = PowerProfile::full(&s2);
    for n in 0..60 {
        p2.set(1, n, 0.0);
    }
    let s1 = scenario(users, 1, 60.0, 60);
    let q1 = Trajectory::stationary(&[Point::new(30.0, 0.0)], 60);
    let p1 = PowerProfile::full(&s1);
    assert_eq!(sinr(&s2, &q2, &p2, 0, 0, 3).unwrap(), sinr(&s1, &q1, &p1, 0, 0, 3).unwrap());
}

#[test]
fn sinr_matches_brute_force_sum() {
    let mut r = rng(12);
    for _ in 0..50 {
        let users = common::users_in_square(&mut r, 2, 500.0);
        let s = scenario(users.clone(), 3, 4.0, 4);
        let pos: Vec<Point> = (0..3).map(|i| Point::new(400.0 * i as f64 - 400.0, r.gen_range(-50.0..50.0))).collect();
        let q = Trajectory::stationary(&pos, 4);
        let levels: Vec<Vec<f64>> = (0..3).map(|_| (0..4).map(|_| r.gen_range(0.0..0.1)).collect()).collect();
        let p = PowerProfile::from_levels(levels.clone()).unwrap();
        for k in 0..2 {
            for m in 0..3 {
                let h = |j: usize| {
                    let dx = pos[j].x - users[k].x;
                    let dy = pos[j].y - users[k].y;
                    1e-6 / (1e4 + dx * dx + dy * dy)
                };
                let mut interference = 0.0;
                for j in 0..3 {
                    if j != m {
                        interference += levels[j][2] * h(j);
                    }
                }
                let expect = levels[m][2] * h(m) / (interference + 1e-14);
                let got = sinr(&s, &q, &p, k, m, 2).unwrap();
                assert!((got - expect).abs() <= 1e-12 * expect.max(1e-12));
            }
        }
    }
}

#[test]
fn empty_schedule_gives_zero_rates() {
    let s = one_user();
    let q = Trajectory::stationary(&[Point::new(0.0, 0.0)], 60);
    let a = Schedule::zeros(1, 1, 60, ScheduleMode::Relaxed);
    let rep = evaluate_rates(&s, &a, &q, &PowerProfile::full(&s)).unwrap();
    assert_eq!(rep.min_rate, 0.0);
    assert!(rep.per_slot_rates[0].iter().all(|&r| r == 0.0));
}

#[test]
fn hovering_rate_is_log2_1001() {
    let s = one_user();
    let q = Trajectory::stationary(&[Point::new(0.0, 0.0)], 60);
    let mut a = Schedule::zeros(1, 1, 60, ScheduleMode::Binary);
    for n in 0..60 {
        a.set(0, 0, n, 1.0);
    }
    let rep = evaluate_rates(&s, &a, &q, &PowerProfile::full(&s)).unwrap();
    let expect = 1001f64.log2();
    assert!(rep.per_slot_rates[0].iter().all(|&r| close(r, expect, 1e-12)));
    assert!(close(rep.min_rate, 9.9672, 5e-5));
}

#[test]
fn symmetric_time_sharing_gives_equal_rates() {
    let s = scenario(vec![Point::new(-300.0, 0.0), Point::new(300.0, 0.0)], 1, 60.0, 60);
    let q = Trajectory::stationary(&[Point::new(0.0, 0.0)], 60);
    let mut a = Schedule::zeros(2, 1, 60, ScheduleMode::Relaxed);
    for n in 0..60 {
        a.set(0, 0, n, 0.5);
        a.set(1, 0, n, 0.5);
    }
    let rep = evaluate_rates(&s, &a, &q, &PowerProfile::full(&s)).unwrap();
    assert!(close(rep.average_rates[0], rep.average_rates[1], 1e-12));
}

#[test]
fn rates_reject_wrong_shape() {
    let s = one_user();
    let q = Trajectory::stationary(&[Point::new(0.0, 0.0)], 60);
    let a = Schedule::zeros(2, 1, 60, ScheduleMode::Relaxed);
    assert!(evaluate_rates(&s, &a, &q, &PowerProfile::full(&s)).is_err());
}

fn circle_walk(s: &Scenario) -> Trajectory {
    let n = s.num_slots();
    let radius = 0.4 * s.max_step() / (2.0 * (std::f64::consts::PI / (n - 1) as f64).sin());
    let pts = (0..n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * (i % (n - 1)) as f64 / (n - 1) as f64;
            Point::new(radius * t.cos(), radius * t.sin())
        })
        .collect();
    Trajectory::from_waypoints(vec![pts]).unwrap()
}

#[test]
fn feasible_instance_has_no_violations() {
    let s = one_user();
    let q = circle_walk(&s);
    let mut a = Schedule::zeros(1, 1, 60, ScheduleMode::Binary);
    a.set(0, 0, 4, 1.0);
    assert!(validate_feasibility(&s, &a, &q, &PowerProfile::full(&s)).unwrap().is_empty());
}

#[test]
fn one_long_hop_is_one_speed_violation() {
    let s = one_user();
    let mut pts = vec![Point::new(0.0, 0.0); 60];
    // One illegal hop out, two legal hops back.
    let step = s.max_step();
    pts[10] = Point::new(1.5 * step, 0.0);
    pts[11] = Point::new(0.75 * step, 0.0);
    let q = Trajectory::from_waypoints(vec![pts]).unwrap();
    let a = Schedule::zeros(1, 1, 60, ScheduleMode::Relaxed);
    let v = validate_feasibility(&s, &a, &q, &PowerProfile::full(&s)).unwrap();
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].kind, ViolationKind::Speed { uav: 0, slot: 9 });
    assert!(close(v[0].magnitude, 0.5 * step, 1e-9));
}

#[test]
fn coincident_uavs_are_one_separation_violation() {
    // Long slots so that the 300 m detour is a legal hop.
    let s = scenario(vec![Point::new(0.0, 0.0)], 2, 600.0, 60);
    let mut q = Trajectory::stationary(&[Point::new(0.0, 0.0), Point::new(300.0, 0.0)], 60);
    q.set(1, 20, Point::new(0.0, 0.0));
    let a = Schedule::zeros(1, 2, 60, ScheduleMode::Relaxed);
    let v = validate_feasibility(&s, &a, &q, &PowerProfile::full(&s)).unwrap();
    assert_eq!(v.len(), 1);
    assert_eq!(
        v[0].kind,
        ViolationKind::Separation {
            uav_a: 0,
            uav_b: 1,
            slot: 20
        }
    );
    assert!(close(v[0].magnitude, 100.0, 1e-12));
}

#[test]
fn power_and_schedule_breaches_are_reported() {
    let s = one_user();
    let q = Trajectory::stationary(&[Point::new(0.0, 0.0)], 60);
    let mut p = PowerProfile::full(&s);
    p.set(0, 3, 0.2);
    let mut a = Schedule::zeros(1, 1, 60, ScheduleMode::Binary);
    a.set(0, 0, 7, 0.5);
    let v = validate_feasibility(&s, &a, &q, &p).unwrap();
    let families: Vec<&str> = v.iter().map(|x| x.kind.family()).collect();
    assert_eq!(families, vec!["power_box", "binary"]);
}

#[test]
fn min_slot_examples() {
    assert_eq!(min_slots_for_accuracy(50.0, 210.0, 100.0, 0.5).unwrap(), 210);
    assert_eq!(min_slots_for_accuracy(50.0, 100.0, 100.0, 1.0).unwrap(), 50);
    assert_eq!(min_slots_for_accuracy(50.0, 100.0, 100.0, 0.5).unwrap(), 100);
    assert_eq!(min_slots_for_accuracy(50.0, 70.0, 100.0, 0.3).unwrap(), 117);
    assert!(min_slots_for_accuracy(0.0, 100.0, 100.0, 1.0).is_err());
    assert!(min_slots_for_accuracy(50.0, -1.0, 100.0, 1.0).is_err());
}

#[test]
fn constructor_rejects_too_few_slots() {
    let err = Scenario::new(ScenarioParams {
        num_slots: 59,
        ..ScenarioParams::with_users(vec![Point::new(0.0, 0.0)])
    })
    .unwrap_err();
    assert!(matches!(err, Error::InvalidParameter { ref field, .. } if *field == "num_slots"));
}

#[test]
fn constructor_names_bad_field() {
    let err = Scenario::new(ScenarioParams {
        altitude: -5.0,
        ..ScenarioParams::with_users(vec![Point::new(0.0, 0.0)])
    })
    .unwrap_err();
    assert!(err.to_string().contains("altitude"));
}
