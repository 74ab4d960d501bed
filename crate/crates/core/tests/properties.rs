mod common;

use common::scenario;
use multiuav::convex::{
    solve_lp, solve_smooth, Constraint, ConvexFunction, LinearProgram, SmoothConvexProgram, SquareTerm,
    VariableLayout, TOL_FEAS,
};
use multiuav::model::{
    channel_gain, evaluate_rates, min_slots_for_accuracy, sinr, validate_feasibility, Point, PowerProfile,
    RateTable, Schedule, ScheduleMode, Trajectory,
};
use multiuav::planner::{reconstruct_binary_schedule, subslot_counts};
use multiuav::scheduling::{solve_scheduling, SchedulingProblem};
use multiuav::trajectory::{build_trajectory_subproblem, compute_taylor_coeffs, TrajectoryLocalPoint};
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = f64> {
    -1500.0..1500.0f64
}

fn point() -> impl Strategy<Value = Point> {
    (coord(), coord()).prop_map(|(x, y)| Point::new(x, y))
}

/// Relaxed schedule with every UAV and user row summing to at most one.
fn relaxed_schedule(k: usize, m: usize, n: usize) -> impl Strategy<Value = Schedule> {
    prop::collection::vec(0.0..1.0f64, k * m * n).prop_map(move |w| {
        let mut a = Schedule::zeros(k, m, n, ScheduleMode::Relaxed);
        let share = 1.0 / k.max(m) as f64;
        for (i, v) in w.iter().enumerate() {
            let (kk, rest) = (i / (m * n), i % (m * n));
            a.set(kk, rest / n, rest % n, v * share);
        }
        a
    })
}

fn table_strategy(k: usize, m: usize, n: usize) -> impl Strategy<Value = Vec<Vec<Vec<f64>>>> {
    prop::collection::vec(prop::collection::vec(prop::collection::vec(0.0..6.0f64, n), m), k)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn gain_strictly_decreasing(w in point(), dir in 0.0..std::f64::consts::TAU, r1 in 0.0..2000.0f64, dr in 1e-3..2000.0f64) {
        let s = scenario(vec![w], 1, 60.0, 60);
        let u = Point::new(dir.cos(), dir.sin());
        let near = channel_gain(&s, w + u * r1, 0).unwrap();
        let far = channel_gain(&s, w + u * (r1 + dr), 0).unwrap();
        prop_assert!(far < near);
        prop_assert!(far > 0.0);
    }

    #[test]
    fn sinr_monotone_in_powers(
        w in point(), a in point(), b in point(),
        p in prop::collection::vec(0.0..0.1f64, 2),
        bump in 0.0..0.05f64,
    ) {
        let s = scenario(vec![w], 2, 2.0, 2);
        let q = Trajectory::stationary(&[a, b], 2);
        let base = PowerProfile::from_levels(vec![vec![p[0]; 2], vec![p[1]; 2]]).unwrap();
        let g0 = sinr(&s, &q, &base, 0, 0, 0).unwrap();
        let mut own = base.clone();
        own.set(0, 0, (p[0] + bump).min(0.1));
        let mut other = base.clone();
        other.set(1, 0, (p[1] + bump).min(0.1));
        prop_assert!(sinr(&s, &q, &own, 0, 0, 0).unwrap() >= g0);
        prop_assert!(sinr(&s, &q, &other, 0, 0, 0).unwrap() <= g0);
        prop_assert!(g0 >= 0.0);
    }

    #[test]
    fn binary_equals_relaxed_and_eta_is_minimum(
        users in prop::collection::vec(point(), 3),
        uavs in prop::collection::vec(point(), 2),
        bits in prop::collection::vec(0usize..3, 4),
    ) {
        let s = scenario(users, 2, 4.0, 4);
        let q = Trajectory::stationary(&uavs, 4);
        let p = PowerProfile::full(&s);
        // bits[n] picks which user UAV 0 serves; UAV 1 serves the next one.
        let mut bin = Schedule::zeros(3, 2, 4, ScheduleMode::Binary);
        let mut rel = Schedule::zeros(3, 2, 4, ScheduleMode::Relaxed);
        for (n, &k) in bits.iter().enumerate() {
            for (m, kk) in [(0, k), (1, (k + 1) % 3)] {
                bin.set(kk, m, n, 1.0);
                rel.set(kk, m, n, 1.0);
            }
        }
        let rb = evaluate_rates(&s, &bin, &q, &p).unwrap();
        let rr = evaluate_rates(&s, &rel, &q, &p).unwrap();
        prop_assert_eq!(&rb.per_slot_rates, &rr.per_slot_rates);
        prop_assert_eq!(rb.min_rate, rr.min_rate);
        for avg in &rb.average_rates {
            prop_assert!(rb.min_rate <= *avg);
        }
    }

    #[test]
    fn halving_threshold_doubles_slots(t in 1.0..500.0f64, eps in 0.05..5.0f64) {
        let n = min_slots_for_accuracy(50.0, t, 100.0, eps).unwrap();
        let n2 = min_slots_for_accuracy(50.0, t, 100.0, eps / 2.0).unwrap();
        prop_assert!(n2 == 2 * n || n2 + 1 == 2 * n);
    }

    #[test]
    fn scheduling_beats_random_feasible_points(
        entries in table_strategy(3, 2, 3),
        sched in relaxed_schedule(3, 2, 3),
    ) {
        let table = RateTable::from_entries(entries).unwrap();
        let (a, eta) = solve_scheduling(&SchedulingProblem::from_rates(table.clone()).unwrap()).unwrap();
        let random = table.realize(&sched).unwrap().min_rate;
        prop_assert!(eta >= random - 1e-9);
        prop_assert!((table.realize(&a).unwrap().min_rate - eta).abs() < 1e-8);
    }

    #[test]
    fn scheduling_monotone_in_rates(
        entries in table_strategy(2, 2, 2),
        idx in (0usize..2, 0usize..2, 0usize..2),
        bump in 0.0..3.0f64,
    ) {
        let solve = |e: Vec<Vec<Vec<f64>>>| {
            solve_scheduling(&SchedulingProblem::from_rates(RateTable::from_entries(e).unwrap()).unwrap()).unwrap().1
        };
        let mut up = entries.clone();
        up[idx.0][idx.1][idx.2] += bump;
        prop_assert!(solve(up) >= solve(entries) - 1e-9);
    }

    #[test]
    fn rounding_is_feasible_and_close(sched in relaxed_schedule(3, 2, 2), tau in 1usize..60) {
        let b = reconstruct_binary_schedule(&sched, tau).unwrap();
        prop_assert!(b.is_integral());
        for n in 0..2 * tau {
            for m in 0..2 {
                prop_assert!(b.uav_load(m, n) <= 1.0);
            }
            for k in 0..3 {
                prop_assert!(b.user_load(k, n) <= 1.0);
            }
        }
        for n in 0..2 {
            let counts = subslot_counts(&sched, n, tau);
            for k in 0..3 {
                for m in 0..2 {
                    let got = (0..tau).filter(|&c| b.get(k, m, n * tau + c) == 1.0).count();
                    prop_assert_eq!(got, counts[k][m]);
                    // Within one sub-slot of tau * alpha, after overflow correction.
                    prop_assert!((got as f64 - tau as f64 * sched.get(k, m, n)).abs() <= 1.0 + 1e-9);
                }
            }
        }
    }

    #[test]
    fn lp_optimum_dominates_feasible_points(
        c in prop::collection::vec(-1.0..1.0f64, 3),
        rows in prop::collection::vec((prop::collection::vec(0.0..2.0f64, 3), 0.5..3.0f64), 1..4),
        probe in prop::collection::vec(0.0..1.0f64, 3),
    ) {
        let mut lp = LinearProgram::new(3);
        lp.objective = c.clone();
        for (a, b) in &rows {
            lp.add_le(a.iter().copied().enumerate().collect(), *b);
        }
        for i in 0..3 {
            lp.set_bounds(i, 0.0, 1.0);
        }
        let out = solve_lp(&lp).unwrap();
        prop_assert!(out.is_optimal());
        let feasible = rows.iter().all(|(a, b)| a.iter().zip(&probe).map(|(x, y)| x * y).sum::<f64>() <= *b);
        if feasible {
            let v: f64 = c.iter().zip(&probe).map(|(x, y)| x * y).sum();
            prop_assert!(out.objective >= v - 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn smooth_never_worse_and_feasible(
        lin in prop::collection::vec(-1.0..1.0f64, 2),
        center in prop::collection::vec(-1.0..1.0f64, 2),
        start in prop::collection::vec(-0.7..0.7f64, 2),
    ) {
        let mut layout = VariableLayout::default();
        layout.push("x", 2, 1.0);
        let objective = ConvexFunction {
            linear: vec![(0, lin[0]), (1, lin[1])],
            squares: (0..2).map(|i| SquareTerm { weight: 0.5, coeffs: vec![(i, 1.0)], constant: -center[i] }).collect(),
            ..Default::default()
        };
        let ball = ConvexFunction {
            constant: -1.0,
            squares: (0..2).map(|i| SquareTerm { weight: 1.0, coeffs: vec![(i, 1.0)], constant: 0.0 }).collect(),
            ..Default::default()
        };
        let prog = SmoothConvexProgram {
            layout,
            objective,
            constraints: vec![Constraint::new("ball", ball)],
            start: start.clone(),
        };
        let out = solve_smooth(&prog).unwrap();
        prop_assert!(out.objective >= prog.objective_value(&start));
        prop_assert!(prog.max_violation(&out.solution) <= TOL_FEAS);
    }

    #[test]
    fn separation_rows_imply_true_separation(
        users in prop::collection::vec(point(), 2),
        offset in (-300.0..300.0f64, -300.0..300.0f64),
        moves in prop::collection::vec(-4.0..4.0f64, 12),
    ) {
        let s = scenario(users, 2, 4.0, 4);
        let q = Trajectory::stationary(&[Point::new(-60.0, 0.0), Point::new(60.0 + offset.0.abs(), offset.1)], 4);
        let p = PowerProfile::full(&s);
        let a = Schedule::zeros(2, 2, 4, ScheduleMode::Relaxed);
        let local = TrajectoryLocalPoint { trajectory: &q, schedule: &a, power: &p };
        let c = compute_taylor_coeffs(&s, &local).unwrap();
        let sub = build_trajectory_subproblem(&s, &local, &c).unwrap();
        let qb = sub.program.layout.block("q").unwrap();
        let mut x = sub.program.start.clone();
        for (i, d) in moves.iter().enumerate().take(qb.len) {
            x[qb.start + i] += d;
        }
        let rows_hold = sub.program.constraints.iter()
            .filter(|row| row.label.starts_with("separation"))
            .all(|row| row.function.value(&x) <= 0.0);
        if rows_hold {
            let t = sub.decode(&x);
            for n in 0..4 {
                prop_assert!(t.get(0, n).dist(t.get(1, n)) >= s.min_separation() * (1.0 - 1e-9));
            }
        }
    }

    #[test]
    fn shrinking_a_slack_never_raises_a_rate_row(
        users in prop::collection::vec(point(), 2),
        uav_y in prop::collection::vec(-300.0..300.0f64, 2),
        pick in any::<prop::sample::Index>(),
        shrink in 0.0..0.9f64,
    ) {
        let s = scenario(users, 2, 4.0, 4);
        let q = Trajectory::stationary(&[Point::new(-300.0, uav_y[0]), Point::new(300.0, uav_y[1])], 4);
        let p = PowerProfile::full(&s);
        let mut a = Schedule::zeros(2, 2, 4, ScheduleMode::Relaxed);
        for n in 0..4 {
            a.set(0, 0, n, 1.0);
            a.set(1, 1, n, 1.0);
        }
        let local = TrajectoryLocalPoint { trajectory: &q, schedule: &a, power: &p };
        let c = compute_taylor_coeffs(&s, &local).unwrap();
        let sub = build_trajectory_subproblem(&s, &local, &c).unwrap();
        let sb = sub.program.layout.block("s").unwrap();
        prop_assume!(sb.len > 0);
        let i = sb.start + pick.index(sb.len);
        let mut x = sub.program.start.clone();
        x[i] *= 1.0 - shrink;
        let before = sub.surrogate_rates(&sub.program.start);
        let after = sub.surrogate_rates(&x);
        for k in 0..2 {
            prop_assert!(after[k] <= before[k] + 1e-12);
        }
    }

    #[test]
    fn validate_accepts_relaxed_schedules(sched in relaxed_schedule(2, 2, 4)) {
        let s = scenario(vec![Point::new(0.0, 0.0), Point::new(300.0, 0.0)], 2, 4.0, 4);
        let q = Trajectory::stationary(&[Point::new(-200.0, 0.0), Point::new(200.0, 0.0)], 4);
        prop_assert!(validate_feasibility(&s, &sched, &q, &PowerProfile::full(&s)).unwrap().is_empty());
    }
}
