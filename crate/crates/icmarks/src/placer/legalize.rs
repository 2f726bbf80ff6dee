//! Row legalization: multi-row-height cells first (greedy, nearest legal
//! span), then single-height cells via per-segment Abacus clustering in
//! ascending-x order. Region and watermark membership are honored through
//! the segment labels, so a legalized placement keeps exclusivity exact.

use super::{allowed_in_segment, build_segments, PlaceError, RegionConstraintSet, SegmentMap};
use crate::design::{Design, Placement, Stage};
use crate::geom::Rect;
use crate::metrics::check_legal_with;

#[derive(Debug, Clone)]
struct Cluster {
    /// Sum over member cells of (desired_x - offset_in_cluster).
    q: i64,
    count: i64,
    total_width: i64,
    cells: Vec<usize>,
}

impl Cluster {
    fn desired(&self) -> f64 {
        self.q as f64 / self.count as f64
    }
}

#[derive(Debug, Clone, Default)]
struct SegState {
    used_width: i64,
    clusters: Vec<Cluster>,
}

pub fn legalize(
    design: &Design,
    placement: &Placement,
    constraints: &RegionConstraintSet,
) -> Result<Placement, PlaceError> {
    constraints.validate(design)?;
    let wm_member = constraints.member_flags(design.cells.len());
    let rh = design.row_height;
    let mut out = placement.clone().with_stage(Stage::Legalized);

    // ---- multi-row-height cells first ----
    let mut multis: Vec<usize> = design
        .cells
        .iter()
        .filter(|c| c.kind.is_movable() && c.height > rh)
        .map(|c| c.id)
        .collect();
    multis.sort_by_key(|&id| (placement.xs[id], id));

    // Blocked intervals per row: fixed geometry plus placed multis.
    let mut blocked: Vec<Vec<(i64, i64)>> = vec![Vec::new(); design.rows.len()];
    let block_rect = |rect: &Rect, blocked: &mut Vec<Vec<(i64, i64)>>| {
        for (ri, row) in design.rows.iter().enumerate() {
            if rect.y_lo < row.y + rh && row.y < rect.y_hi {
                let lo = rect.x_lo.max(row.x_lo);
                let hi = rect.x_hi.min(row.x_hi);
                if lo < hi {
                    blocked[ri].push((lo, hi));
                }
            }
        }
    };
    for c in &design.cells {
        if let (true, Some((x, y))) = (c.kind.is_fixed(), c.fixed_pos) {
            block_rect(&Rect { x_lo: x, y_lo: y, x_hi: x + c.width, y_hi: y + c.height }, &mut blocked);
        }
    }

    let mut multi_rects: Vec<Rect> = Vec::new();
    for &cid in &multis {
        let c = &design.cells[cid];
        let spans = design.rows_spanned(c.height);
        let (dx, dy) = (placement.xs[cid], placement.ys[cid]);
        let mut best: Option<(i64, usize, i64)> = None; // (cost, anchor row, x)
        let mut row_order: Vec<usize> = (0..design.rows.len().saturating_sub(spans - 1)).collect();
        row_order.sort_by_key(|&r| ((design.rows[r].y - dy).abs(), r));
        for &anchor in &row_order {
            let y = design.rows[anchor].y;
            let dy_cost = (y - dy) * (y - dy);
            if let Some((c0, _, _)) = best {
                if dy_cost >= c0 {
                    break;
                }
            }
            // Free intervals common to all spanned rows.
            let mut gaps = free_intervals(design, &blocked[anchor], anchor);
            for k in 1..spans {
                let next = free_intervals(design, &blocked[anchor + k], anchor + k);
                gaps = intersect_intervals(&gaps, &next);
            }
            for (lo, hi) in gaps {
                if hi - lo < c.width {
                    continue;
                }
                let Some(x) = choose_x_in_gap(design, constraints, &wm_member, cid, lo, hi, y, dx)
                else {
                    continue;
                };
                let cost = (x - dx) * (x - dx) + dy_cost;
                if best.map(|(c0, _, _)| cost < c0).unwrap_or(true) {
                    best = Some((cost, anchor, x));
                }
            }
        }
        let Some((_, anchor, x)) = best else {
            return Err(PlaceError::LegalizationOverflow(format!(
                "no legal span for multi-row cell {cid}"
            )));
        };
        let y = design.rows[anchor].y;
        out.xs[cid] = x;
        out.ys[cid] = y;
        let rect = Rect { x_lo: x, y_lo: y, x_hi: x + c.width, y_hi: y + c.height };
        block_rect(&rect, &mut blocked);
        multi_rects.push(rect);
    }

    // ---- single-height cells: Abacus over labeled segments ----
    let segmap = build_segments(design, constraints.watermark.as_ref(), &multi_rects);
    let mut states: Vec<SegState> = vec![SegState::default(); segmap.segments.len()];

    // Region-constrained cells claim their (only) legal segments before
    // free cells compete for the same capacity; each class in ascending x.
    let mut singles: Vec<usize> = design
        .cells
        .iter()
        .filter(|c| c.kind.is_movable() && c.height == rh)
        .map(|c| c.id)
        .collect();
    singles.sort_by_key(|&id| {
        let constrained = wm_member[id] || design.cells[id].region_id.is_some();
        (!constrained, placement.xs[id], id)
    });

    let mut row_order: Vec<usize> = (0..design.rows.len()).collect();
    for &cid in &singles {
        let c = &design.cells[cid];
        let (dx, dy) = (placement.xs[cid], placement.ys[cid]);
        row_order.sort_by_key(|&r| ((design.rows[r].y - dy).abs(), r));
        let mut best: Option<(f64, usize, f64)> = None; // (cost, segment, final x)
        for &row in &row_order {
            let dy_cost = ((design.rows[row].y - dy) * (design.rows[row].y - dy)) as f64;
            if let Some((c0, _, _)) = best {
                if dy_cost >= c0 {
                    break;
                }
            }
            for &sidx in &segmap.by_row[row] {
                let seg = &segmap.segments[sidx];
                if seg.width() < c.width
                    || states[sidx].used_width + c.width > seg.width()
                    || !allowed_in_segment(c, seg, &wm_member)
                {
                    continue;
                }
                let fx = simulate_append(&states[sidx], seg.x_lo, seg.x_hi, dx as f64, c.width);
                let cost = (fx - dx as f64) * (fx - dx as f64) + dy_cost;
                if best.map(|(c0, _, _)| cost < c0).unwrap_or(true) {
                    best = Some((cost, sidx, fx));
                }
            }
        }
        let Some((_, sidx, _)) = best else {
            return Err(PlaceError::LegalizationOverflow(format!(
                "no segment can host cell {cid} (width {})",
                c.width
            )));
        };
        let seg = &segmap.segments[sidx];
        append_cell(&mut states[sidx], cid, dx, c.width);
        out.ys[cid] = design.rows[seg.row].y;
    }

    emit_positions(design, &segmap, &states, &mut out);

    let report = check_legal_with(
        design,
        &out,
        constraints.watermark.as_ref().map(|wm| (&wm.rect, wm.members.as_slice())),
    );
    if !report.is_legal() {
        return Err(PlaceError::LegalizationOverflow(format!(
            "internal audit failed: {} overlaps, {} off-row, {} out-of-die, {} region violations",
            report.overlap_pairs.len(),
            report.off_row_cells.len(),
            report.out_of_die_cells.len(),
            report.fence_violations.len()
        )));
    }
    Ok(out)
}

fn free_intervals(design: &Design, blocked: &[(i64, i64)], row: usize) -> Vec<(i64, i64)> {
    let r = &design.rows[row];
    let mut iv = blocked.to_vec();
    iv.sort_unstable();
    let mut free = Vec::new();
    let mut cursor = r.x_lo;
    for (lo, hi) in iv {
        if lo > cursor {
            free.push((cursor, lo));
        }
        cursor = cursor.max(hi);
    }
    if cursor < r.x_hi {
        free.push((cursor, r.x_hi));
    }
    free
}

fn intersect_intervals(a: &[(i64, i64)], b: &[(i64, i64)]) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if lo < hi {
            out.push((lo, hi));
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// Pick an x inside `[lo, hi)` for a (possibly multi-row) cell anchored at
/// row-y `y`, nearest to `desired`, satisfying watermark exclusivity and
/// fence membership of the cell's center. Returns None when no x works.
fn choose_x_in_gap(
    design: &Design,
    constraints: &RegionConstraintSet,
    wm_member: &[bool],
    cid: usize,
    lo: i64,
    hi: i64,
    y: i64,
    desired: i64,
) -> Option<i64> {
    let c = &design.cells[cid];
    let clamp_range = (lo, hi - c.width);
    let center_ok = |x: i64| -> bool {
        let (cx2, cy2) = crate::geom::center2(x, y, c.width, c.height);
        if let Some(wm) = &constraints.watermark {
            if wm.rect.contains_center2(cx2, cy2) != wm_member[cid] {
                return false;
            }
        }
        if let Some(rid) = c.region_id {
            if !design.fence_regions[rid].contains_center2(cx2, cy2) {
                return false;
            }
        }
        true
    };
    let base = desired.clamp(clamp_range.0, clamp_range.1);
    if center_ok(base) {
        return Some(base);
    }
    // Scan outward for the nearest satisfying x. Region boundaries are the
    // only discontinuities, so the nearest valid x is at a projected edge;
    // a bounded two-sided scan keeps this simple and exact.
    for step in 1..=(clamp_range.1 - clamp_range.0) {
        for x in [base - step, base + step] {
            if x >= clamp_range.0 && x <= clamp_range.1 && center_ok(x) {
                return Some(x);
            }
        }
    }
    None
}

/// Final x of a cell appended to the segment's cluster chain, without
/// mutating it. Mirrors `append_cell`'s merge rule exactly.
fn simulate_append(state: &SegState, seg_lo: i64, seg_hi: i64, desired: f64, width: i64) -> f64 {
    let mut vq = desired;
    let mut vcount = 1.0f64;
    let mut vwidth = width as f64;
    let mut offset_in_v = 0.0; // offset of our cell inside the virtual cluster
    let mut idx = state.clusters.len();
    while idx > 0 {
        let p = &state.clusters[idx - 1];
        if p.desired() + p.total_width as f64 > vq / vcount {
            offset_in_v += p.total_width as f64;
            vq = p.q as f64 + vq - vcount * p.total_width as f64;
            vcount += p.count as f64;
            vwidth += p.total_width as f64;
            idx -= 1;
        } else {
            break;
        }
    }
    let lo = seg_lo as f64;
    let hi = seg_hi as f64;
    (vq / vcount).clamp(lo, (hi - vwidth).max(lo)) + offset_in_v
}

fn append_cell(state: &mut SegState, cid: usize, desired: i64, width: i64) {
    let mut cluster = Cluster { q: desired, count: 1, total_width: width, cells: vec![cid] };
    while let Some(prev) = state.clusters.last() {
        // Overlap test on unclamped optimal positions; emit_positions
        // resolves segment-boundary clamping exactly.
        if prev.desired() + prev.total_width as f64 > cluster.desired() {
            let prev = state.clusters.pop().unwrap();
            let mut merged = Cluster {
                q: prev.q + cluster.q - cluster.count * prev.total_width,
                count: prev.count + cluster.count,
                total_width: prev.total_width + cluster.total_width,
                cells: prev.cells,
            };
            merged.cells.extend(cluster.cells);
            cluster = merged;
        } else {
            break;
        }
    }
    state.clusters.push(cluster);
    state.used_width += width;
}


/// Turn cluster chains into integer cell positions: round each cluster's
/// optimal position, resolve overlaps with a forward max cascade, then pull
/// back from the segment end with a backward min cascade.
fn emit_positions(design: &Design, segmap: &SegmentMap, states: &[SegState], out: &mut Placement) {
    for (sidx, seg) in segmap.segments.iter().enumerate() {
        let state = &states[sidx];
        if state.clusters.is_empty() {
            continue;
        }
        let n = state.clusters.len();
        let mut xs: Vec<i64> = Vec::with_capacity(n);
        let mut prev_end = seg.x_lo;
        for cl in &state.clusters {
            let mut x = (cl.desired() + 0.5).floor() as i64;
            x = x.max(prev_end).min(seg.x_hi - cl.total_width);
            x = x.max(seg.x_lo);
            xs.push(x);
            prev_end = x + cl.total_width;
        }
        // forward cascade
        for i in 1..n {
            let min_x = xs[i - 1] + state.clusters[i - 1].total_width;
            if xs[i] < min_x {
                xs[i] = min_x;
            }
        }
        // backward cascade from the segment end
        if xs[n - 1] + state.clusters[n - 1].total_width > seg.x_hi {
            xs[n - 1] = seg.x_hi - state.clusters[n - 1].total_width;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            let max_x = xs[i + 1] - state.clusters[i].total_width;
            if xs[i] > max_x {
                xs[i] = max_x;
            }
        }
        for (i, cl) in state.clusters.iter().enumerate() {
            let mut offset = 0;
            for &cid in &cl.cells {
                out.xs[cid] = xs[i] + offset;
                offset += design.cells[cid].width;
            }
        }
    }
}
