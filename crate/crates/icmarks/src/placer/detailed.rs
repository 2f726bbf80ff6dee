//! Detailed placement: deterministic refinement passes over row segments.
//!
//! Three move kinds per pass: (i) adjacent-cell swaps, (ii) within-row
//! sliding to each cell's optimal x inside its free interval, (iii) window
//! reordering over consecutive cells. Only moves that keep legality and
//! region membership are possible by construction (everything stays inside
//! one labeled segment), and only strictly improving moves are committed,
//! so HPWL never increases. With `slide_to_flat_optimum` set, zero-gain
//! slides onto the canonical optimal position are committed too.

use super::{
    build_segments, median_target, move_delta, multi_move_delta, nets_per_cell, DetailedParams,
    RegionConstraintSet,
};
use crate::design::{Design, Placement, Stage};
use crate::geom::Rect;

pub fn detailed_place(
    design: &Design,
    placement: &Placement,
    constraints: &RegionConstraintSet,
    params: &DetailedParams,
) -> Placement {
    let rh = design.row_height;
    let mut out = placement.clone().with_stage(Stage::Detailed);

    // Multi-row cells hold their legalized spots and act as blockages.
    let multi_rects: Vec<Rect> = design
        .cells
        .iter()
        .filter(|c| c.kind.is_movable() && c.height > rh)
        .map(|c| out.cell_rect(design, c.id))
        .collect();
    let segmap = build_segments(design, constraints.watermark.as_ref(), &multi_rects);

    // Assign every single-height movable cell to its containing segment.
    let mut seg_cells: Vec<Vec<usize>> = vec![Vec::new(); segmap.segments.len()];
    for c in design.cells.iter().filter(|c| c.kind.is_movable() && c.height == rh) {
        let Some(row) = design.row_index_of_y(out.ys[c.id]) else { continue };
        if let Some(sidx) = segmap.containing(row, out.xs[c.id], c.width) {
            seg_cells[sidx].push(c.id);
        }
    }
    for cells in &mut seg_cells {
        cells.sort_by_key(|&id| (out.xs[id], id));
    }

    let nets_of = nets_per_cell(design);

    for _pass in 0..params.passes {
        let mut commits = 0usize;

        // (i) adjacent swaps
        for (sidx, cells) in seg_cells.iter_mut().enumerate() {
            let _ = sidx;
            if cells.len() < 2 {
                continue;
            }
            for i in 0..cells.len() - 1 {
                let a = cells[i];
                let b = cells[i + 1];
                let (ax, bx) = (out.xs[a], out.xs[b]);
                let (aw, bw) = (design.cells[a].width, design.cells[b].width);
                // Keep the pair's outer edges: b takes a's origin, a ends at b's end.
                let new_b = ax;
                let new_a = bx + bw - aw;
                if new_a == ax && new_b == bx {
                    continue;
                }
                let moves = [(a, new_a, out.ys[a]), (b, new_b, out.ys[b])];
                let delta = multi_move_delta(design, &mut out, &nets_of, &moves);
                if delta < 0 {
                    out.xs[a] = new_a;
                    out.xs[b] = new_b;
                    cells.swap(i, i + 1);
                    commits += 1;
                }
            }
        }

        // (ii) sliding to per-cell optimal x within the free interval
        for (sidx, cells) in seg_cells.iter().enumerate() {
            let seg = &segmap.segments[sidx];
            for i in 0..cells.len() {
                let cid = cells[i];
                let w = design.cells[cid].width;
                let lo = if i > 0 {
                    out.xs[cells[i - 1]] + design.cells[cells[i - 1]].width
                } else {
                    seg.x_lo
                };
                let hi = if i + 1 < cells.len() { out.xs[cells[i + 1]] } else { seg.x_hi };
                let max_x = hi - w;
                if max_x < lo {
                    continue;
                }
                let Some((mx, _)) = median_target(design, &out, &nets_of, cid) else { continue };
                let tx = mx.clamp(lo, max_x);
                if tx == out.xs[cid] {
                    continue;
                }
                let ty = out.ys[cid];
                let delta = move_delta(design, &mut out, &nets_of, cid, tx, ty);
                if delta < 0 || (delta == 0 && params.slide_to_flat_optimum) {
                    out.xs[cid] = tx;
                    commits += 1;
                }
            }
        }

        // (iii) window reordering
        let k = params.reorder_window;
        if k >= 2 {
            let perms = permutations(k);
            for (sidx, cells) in seg_cells.iter_mut().enumerate() {
                let _ = sidx;
                if cells.len() < k {
                    continue;
                }
                for start in 0..=cells.len() - k {
                    let window: Vec<usize> = cells[start..start + k].to_vec();
                    let span_lo = out.xs[window[0]];
                    let mut best: Option<(i64, &Vec<usize>)> = None;
                    for perm in &perms {
                        if perm.iter().enumerate().all(|(i, &p)| i == p) {
                            continue;
                        }
                        let mut moves = Vec::with_capacity(k);
                        let mut x = span_lo;
                        for &p in perm {
                            let cid = window[p];
                            moves.push((cid, x, out.ys[cid]));
                            x += design.cells[cid].width;
                        }
                        let delta = multi_move_delta(design, &mut out, &nets_of, &moves);
                        if delta < 0 && best.map(|(d, _)| delta < d).unwrap_or(true) {
                            best = Some((delta, perm));
                        }
                    }
                    if let Some((_, perm)) = best {
                        let mut x = span_lo;
                        for (slot, &p) in perm.iter().enumerate() {
                            let cid = window[p];
                            out.xs[cid] = x;
                            x += design.cells[cid].width;
                            cells[start + slot] = cid;
                        }
                        commits += 1;
                    }
                }
            }
        }

        if commits == 0 {
            break;
        }
    }
    out
}

/// All permutations of 0..k in lexicographic order.
fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        out.push(current.clone());
        // next_permutation
        let Some(i) = (0..k.saturating_sub(1)).rev().find(|&i| current[i] < current[i + 1]) else {
            break;
        };
        let j = (i + 1..k).rev().find(|&j| current[j] > current[i]).unwrap();
        current.swap(i, j);
        current[i + 1..].reverse();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{Cell, CellKind, FenceRegion, Net, Pin, Row};
    use crate::metrics::{check_legal, hpwl};
    use crate::placer::{legalize, RegionConstraintSet};

    #[test]
    fn permutation_count() {
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(4).len(), 24);
        assert_eq!(permutations(3)[0], vec![0, 1, 2]);
    }

    fn movable(id: usize, w: i64) -> Cell {
        Cell { id, width: w, height: 2, kind: CellKind::Movable, region_id: None, fixed_pos: None }
    }

    fn two_net_design() -> Design {
        // cells 0,1 in a row; cell 2 fixed far right, cell 3 fixed far left.
        // net a: (0,2), net b: (1,3): swapping 0 and 1 helps when 0 sits left.
        Design {
            name: "dp".into(),
            die: Rect::new(0, 0, 40, 4),
            rows: vec![Row { id: 0, x_lo: 0, x_hi: 40, y: 0 }, Row { id: 1, x_lo: 0, x_hi: 40, y: 2 }],
            cells: vec![
                movable(0, 2),
                movable(1, 2),
                Cell { id: 2, width: 2, height: 2, kind: CellKind::Io, region_id: None, fixed_pos: Some((38, 2)) },
                Cell { id: 3, width: 2, height: 2, kind: CellKind::Io, region_id: None, fixed_pos: Some((0, 2)) },
            ],
            nets: vec![
                Net { id: 0, pins: vec![Pin { cell: 0, dx: 1, dy: 1 }, Pin { cell: 2, dx: 1, dy: 1 }], endpoint: false },
                Net { id: 1, pins: vec![Pin { cell: 1, dx: 1, dy: 1 }, Pin { cell: 3, dx: 1, dy: 1 }], endpoint: false },
            ],
            fence_regions: vec![],
            row_height: 2,
        }
    }

    #[test]
    fn improving_swap_is_committed() {
        let d = two_net_design();
        // 0 at x=18 (wants right), 1 at x=20 (wants left): swap improves
        let p = Placement::new(vec![18, 20, 38, 0], vec![0, 0, 2, 2], Stage::Legalized);
        let before = hpwl(&d, &p);
        let out = detailed_place(&d, &p, &RegionConstraintSet::none(), &DetailedParams::default());
        let after = hpwl(&d, &out);
        assert!(after < before, "expected improvement, {before} -> {after}");
        assert!(out.xs[0] > out.xs[1], "cells should have swapped order");
        assert!(check_legal(&d, &out).is_legal());
    }

    #[test]
    fn fixed_point_when_no_improving_move() {
        let d = two_net_design();
        let p = Placement::new(vec![18, 20, 38, 0], vec![0, 0, 2, 2], Stage::Legalized);
        let once = detailed_place(&d, &p, &RegionConstraintSet::none(), &DetailedParams::default());
        let twice = detailed_place(&d, &once, &RegionConstraintSet::none(), &DetailedParams::default());
        assert_eq!(once.xs, twice.xs);
        assert_eq!(once.ys, twice.ys);
    }

    #[test]
    fn hpwl_never_increases() {
        use crate::placer::{global_place, PlaceParams};
        use crate::synth::{generate_synthetic, SynthConfig};
        let cfg = SynthConfig::new(400, 500, 0.6);
        let d = generate_synthetic(&cfg, 31).unwrap();
        let cs = RegionConstraintSet::none();
        let g = global_place(&d, &cs, &PlaceParams::default().with_seed(31)).unwrap();
        let lg = legalize(&d, &g.placement, &cs).unwrap();
        let before = hpwl(&d, &lg);
        let out = detailed_place(&d, &lg, &cs, &DetailedParams::default());
        assert!(hpwl(&d, &out) <= before);
        assert!(check_legal(&d, &out).is_legal());
    }

    #[test]
    fn improving_move_out_of_fence_is_rejected() {
        // cell 0 is a fence member pulled right by a net to a far fixed pad;
        // the fence ends at x=10 so it must not cross it.
        let mut d = two_net_design();
        d.fence_regions = vec![FenceRegion { id: 0, rects: vec![Rect::new(0, 0, 10, 4)] }];
        d.cells[0].region_id = Some(0);
        let p = Placement::new(vec![2, 20, 38, 0], vec![0, 0, 2, 2], Stage::Legalized);
        let out = detailed_place(&d, &p, &RegionConstraintSet::none(), &DetailedParams::default());
        let (cx2, cy2) = out.center2(&d, 0);
        assert!(d.fence_regions[0].contains_center2(cx2, cy2), "member escaped its fence");
        // it may slide toward the boundary but not past the last in-fence slot
        assert!(out.xs[0] + d.cells[0].width <= 10);
    }

    #[test]
    fn flat_slides_move_cells_without_hpwl_cost() {
        // one net between two cells far apart in x: every x between them is
        // optimal for a middle cell; flat slides realign it.
        let d = two_net_design();
        let p = Placement::new(vec![18, 20, 38, 0], vec![0, 0, 2, 2], Stage::Legalized);
        let base = detailed_place(&d, &p, &RegionConstraintSet::none(), &DetailedParams::default());
        let mut params = DetailedParams::default();
        params.slide_to_flat_optimum = true;
        params.passes = 10;
        let flat = detailed_place(&d, &base, &RegionConstraintSet::none(), &params);
        assert_eq!(hpwl(&d, &flat), hpwl(&d, &base), "flat slides must not change HPWL");
    }
}
