//! Binary schedule over `tau` sub-slots per slot from a relaxed schedule.

use crate::error::{Error, Result};
use crate::model::{Schedule, ScheduleMode};

/// Sub-slot counts per (user, UAV) in one slot after rounding and overflow
/// correction, indexed `[k][m]`.
pub fn subslot_counts(relaxed: &Schedule, slot: usize, tau: usize) -> Vec<Vec<usize>> {
    let (kk, mm) = (relaxed.num_users(), relaxed.num_uavs());
    let target = |k: usize, m: usize| tau as f64 * relaxed.get(k, m, slot).clamp(0.0, 1.0);
    let mut counts: Vec<Vec<usize>> = (0..kk)
        .map(|k| (0..mm).map(|m| target(k, m).round() as usize).collect())
        .collect();
    // Largest-remainder correction: drop the entries that rounding inflated most.
    let shrink = |cells: Vec<(usize, usize)>, counts: &mut Vec<Vec<usize>>| loop {
        let total: usize = cells.iter().map(|&(k, m)| counts[k][m]).sum();
        if total <= tau {
            break;
        }
        let &(k, m) = cells
            .iter()
            .filter(|&&(k, m)| counts[k][m] > 0)
            .max_by(|&&(k1, m1), &&(k2, m2)| {
                let e1 = counts[k1][m1] as f64 - target(k1, m1);
                let e2 = counts[k2][m2] as f64 - target(k2, m2);
                e1.total_cmp(&e2).then((k2, m2).cmp(&(k1, m1)))
            })
            .expect("positive total has a positive cell");
        counts[k][m] -= 1;
    };
    for m in 0..mm {
        shrink((0..kk).map(|k| (k, m)).collect(), &mut counts);
    }
    for k in 0..kk {
        shrink((0..mm).map(|m| (k, m)).collect(), &mut counts);
    }
    counts
}

/// Rounds `tau * alpha` to whole sub-slots and lays them out so that each UAV
/// serves at most one user and each user hears at most one UAV per sub-slot.
pub fn reconstruct_binary_schedule(relaxed: &Schedule, tau: usize) -> Result<Schedule> {
    if tau == 0 {
        return Err(Error::Domain("sub-slot factor must be at least 1".into()));
    }
    if relaxed.subslots_per_slot() != 1 {
        return Err(Error::Domain("schedule is already sub-slotted".into()));
    }
    let (kk, mm, nn) = (relaxed.num_users(), relaxed.num_uavs(), relaxed.num_slots());
    let mut out = Schedule::zeros_subslotted(kk, mm, nn, tau, ScheduleMode::Binary);
    for n in 0..nn {
        let counts = subslot_counts(relaxed, n, tau);
        let layout = contiguous_layout(relaxed, n, &counts, tau)
            .unwrap_or_else(|| edge_coloring_layout(&counts, tau));
        for (k, m, c) in layout {
            out.set(k, m, n * tau + c, 1.0);
        }
    }
    Ok(out)
}

/// Per UAV, users in descending weight order get consecutive sub-slots.
/// `None` if that puts one user on two UAVs at once.
fn contiguous_layout(
    relaxed: &Schedule,
    slot: usize,
    counts: &[Vec<usize>],
    tau: usize,
) -> Option<Vec<(usize, usize, usize)>> {
    let (kk, mm) = (relaxed.num_users(), relaxed.num_uavs());
    let mut busy = vec![vec![false; tau]; kk];
    let mut out = Vec::new();
    for m in 0..mm {
        let mut order: Vec<usize> = (0..kk).filter(|&k| counts[k][m] > 0).collect();
        order.sort_by(|&a, &b| {
            relaxed
                .get(b, m, slot)
                .total_cmp(&relaxed.get(a, m, slot))
                .then(a.cmp(&b))
        });
        let mut c = 0;
        for k in order {
            for _ in 0..counts[k][m] {
                if busy[k][c] {
                    return None;
                }
                busy[k][c] = true;
                out.push((k, m, c));
                c += 1;
            }
        }
    }
    Some(out)
}

/// Proper edge coloring of the (user, UAV) multigraph with `tau` colors; the
/// color is the sub-slot. Max degree is at most `tau`, so this always succeeds.
fn edge_coloring_layout(counts: &[Vec<usize>], tau: usize) -> Vec<(usize, usize, usize)> {
    let kk = counts.len();
    let mm = counts.first().map_or(0, Vec::len);
    // user_at[k][c] = UAV serving k in sub-slot c; uav_at[m][c] = user.
    let mut user_at: Vec<Vec<Option<usize>>> = vec![vec![None; tau]; kk];
    let mut uav_at: Vec<Vec<Option<usize>>> = vec![vec![None; tau]; mm];
    for k in 0..kk {
        for m in 0..mm {
            for _ in 0..counts[k][m] {
                let a = (0..tau).find(|&c| user_at[k][c].is_none()).expect("user degree <= tau");
                let b = (0..tau).find(|&c| uav_at[m][c].is_none()).expect("uav degree <= tau");
                if uav_at[m][a].is_some() {
                    // Flip the a/b path starting at UAV m so that a frees up there.
                    let mut path = Vec::new();
                    let mut on_uav = true;
                    let mut node = m;
                    let mut color = a;
                    loop {
                        let next = if on_uav { uav_at[node][color] } else { user_at[node][color] };
                        let Some(next) = next else { break };
                        let edge = if on_uav { (next, node) } else { (node, next) };
                        path.push((edge, color));
                        node = next;
                        on_uav = !on_uav;
                        color = if color == a { b } else { a };
                    }
                    for &((uk, um), c) in &path {
                        user_at[uk][c] = None;
                        uav_at[um][c] = None;
                    }
                    for &((uk, um), c) in &path {
                        let nc = if c == a { b } else { a };
                        user_at[uk][nc] = Some(um);
                        uav_at[um][nc] = Some(uk);
                    }
                }
                user_at[k][a] = Some(m);
                uav_at[m][a] = Some(k);
            }
        }
    }
    let mut out = Vec::new();
    for (k, row) in user_at.iter().enumerate() {
        for (c, m) in row.iter().enumerate() {
            if let Some(m) = m {
                out.push((k, *m, c));
            }
        }
    }
    out
}
