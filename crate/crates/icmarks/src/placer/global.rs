//! Global placement: seeded capacity-weighted scatter followed by
//! median-improvement sweeps under a per-bin density cap, with region
//! membership enforced by projection. Every committed move strictly lowers
//! HPWL, so the result never regresses past the recorded initial spread.

use super::{
    median_target, move_delta, nets_per_cell, PlaceError, PlaceParams, RegionConstraintSet,
    WatermarkRegion,
};
use crate::design::{Design, Placement, Stage};
use crate::geom::Rect;
use crate::metrics;
use crate::rng::{DetRng, Stream};

#[derive(Debug, Clone)]
pub struct GlobalResult {
    pub placement: Placement,
    /// HPWL of the seeded initial spread (after its density repair pass).
    pub initial_hpwl: i64,
    pub final_hpwl: i64,
    /// False when the density contract could not be met within the
    /// iteration budget; the placement is still the best one seen.
    pub converged: bool,
}

fn div_floor(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

fn div_ceil(a: i64, b: i64) -> i64 {
    -((-a).div_euclid(b))
}

/// Clamp a cell origin so its center lies inside `rect` (exact half-open
/// center containment in doubled coordinates).
pub(crate) fn project_center_into(rect: &Rect, x: i64, y: i64, w: i64, h: i64) -> (i64, i64) {
    let xmin = div_ceil(2 * rect.x_lo - w, 2);
    let xmax = div_floor(2 * rect.x_hi - 1 - w, 2);
    let ymin = div_ceil(2 * rect.y_lo - h, 2);
    let ymax = div_floor(2 * rect.y_hi - 1 - h, 2);
    (x.clamp(xmin, xmax.max(xmin)), y.clamp(ymin, ymax.max(ymin)))
}

/// Move a cell the minimal L1 distance so its center leaves `rect`, staying
/// inside the die. Returns None when the center is already outside or no
/// in-die exit exists.
pub(crate) fn project_center_out(
    rect: &Rect,
    die: &Rect,
    x: i64,
    y: i64,
    w: i64,
    h: i64,
) -> Option<(i64, i64)> {
    let (cx2, cy2) = crate::geom::center2(x, y, w, h);
    if !rect.contains_center2(cx2, cy2) {
        return None;
    }
    // Largest doubled center < 2*lo (resp. smallest >= 2*hi) with the parity
    // the cell's center must keep.
    let parity = |v2: i64, want: i64| -> i64 {
        if (v2 - want).rem_euclid(2) == 0 {
            v2
        } else {
            v2 - 1
        }
    };
    let left_c = parity(2 * rect.x_lo - 1, w);
    let down_c = parity(2 * rect.y_lo - 1, h);
    let right_c = {
        let base = 2 * rect.x_hi;
        if (base - w).rem_euclid(2) == 0 { base } else { base + 1 }
    };
    let up_c = {
        let base = 2 * rect.y_hi;
        if (base - h).rem_euclid(2) == 0 { base } else { base + 1 }
    };
    let mut best: Option<(i64, (i64, i64))> = None;
    let candidates = [
        ((left_c - w) / 2, y),
        ((right_c - w) / 2, y),
        (x, (down_c - h) / 2),
        (x, (up_c - h) / 2),
    ];
    for (nx, ny) in candidates {
        if nx < die.x_lo || nx + w > die.x_hi || ny < die.y_lo || ny + h > die.y_hi {
            continue;
        }
        let dist = (nx - x).abs() + (ny - y).abs();
        if best.map(|(d, _)| dist < d).unwrap_or(true) {
            best = Some((dist, (nx, ny)));
        }
    }
    best.map(|(_, p)| p)
}

/// Density bookkeeping: integer free capacity and integer prorated usage per
/// bin, exact because all rectangles are integral.
struct BinGrid {
    nx: usize,
    ny: usize,
    bounds_x: Vec<i64>,
    bounds_y: Vec<i64>,
    cap: Vec<i64>,
    used: Vec<i64>,
    /// Per-bin occupancy fraction at the start of the run. A legal warm
    /// start may pack bins beyond the density target; such bins keep their
    /// starting level as the bound instead of being torn apart.
    start_frac: Vec<f64>,
}

impl BinGrid {
    fn new(design: &Design, nx: usize, ny: usize) -> Self {
        let bounds = |lo: i64, hi: i64, n: usize| -> Vec<i64> {
            let span = (hi - lo) as i128;
            (0..=n).map(|i| lo + ((span * i as i128) / n as i128) as i64).collect()
        };
        let bounds_x = bounds(design.die.x_lo, design.die.x_hi, nx);
        let bounds_y = bounds(design.die.y_lo, design.die.y_hi, ny);
        let mut grid = BinGrid {
            nx,
            ny,
            bounds_x,
            bounds_y,
            cap: vec![0; nx * ny],
            used: vec![0; nx * ny],
            start_frac: vec![0.0; nx * ny],
        };
        for by in 0..ny {
            for bx in 0..nx {
                grid.cap[by * nx + bx] = grid.bin_rect(bx, by).area();
            }
        }
        for c in &design.cells {
            if let (true, Some((x, y))) = (c.kind.is_fixed(), c.fixed_pos) {
                let r = Rect { x_lo: x, y_lo: y, x_hi: x + c.width, y_hi: y + c.height };
                grid.for_bins(&r, |grid, idx, overlap| grid.cap[idx] -= overlap);
            }
        }
        for cap in &mut grid.cap {
            *cap = (*cap).max(0);
        }
        grid
    }

    fn bin_rect(&self, bx: usize, by: usize) -> Rect {
        Rect {
            x_lo: self.bounds_x[bx],
            x_hi: self.bounds_x[bx + 1],
            y_lo: self.bounds_y[by],
            y_hi: self.bounds_y[by + 1],
        }
    }

    fn bin_of_point(&self, x: i64, y: i64) -> (usize, usize) {
        let bx = self.bounds_x[1..self.nx].partition_point(|&b| b <= x);
        let by = self.bounds_y[1..self.ny].partition_point(|&b| b <= y);
        (bx, by)
    }

    fn for_bins(&mut self, rect: &Rect, mut f: impl FnMut(&mut Self, usize, i64)) {
        let bx0 = self.bounds_x[1..self.nx].partition_point(|&b| b <= rect.x_lo);
        let by0 = self.bounds_y[1..self.ny].partition_point(|&b| b <= rect.y_lo);
        for by in by0..self.ny {
            if self.bounds_y[by] >= rect.y_hi {
                break;
            }
            for bx in bx0..self.nx {
                if self.bounds_x[bx] >= rect.x_hi {
                    break;
                }
                let overlap = self.bin_rect(bx, by).intersection_area(rect);
                if overlap > 0 {
                    f(self, by * self.nx + bx, overlap);
                }
            }
        }
    }

    fn add(&mut self, rect: &Rect) {
        self.for_bins(rect, |g, idx, o| g.used[idx] += o);
    }

    fn remove(&mut self, rect: &Rect) {
        self.for_bins(rect, |g, idx, o| g.used[idx] -= o);
    }

    /// Whether swapping `old` for `new` keeps every touched bin within
    /// `cap * frac`.
    fn bin_limit(&self, idx: usize, frac: f64) -> f64 {
        self.cap[idx] as f64 * frac.max(self.start_frac[idx])
    }

    fn move_fits(&mut self, old: &Rect, new: &Rect, frac: f64) -> bool {
        let mut deltas: Vec<(usize, i64)> = Vec::with_capacity(8);
        self.for_bins(new, |_, idx, o| deltas.push((idx, o)));
        let mut ok = true;
        self.for_bins(old, |_, idx, o| {
            if let Some(d) = deltas.iter_mut().find(|(i, _)| *i == idx) {
                d.1 -= o;
            } else {
                deltas.push((idx, -o));
            }
        });
        for &(idx, delta) in &deltas {
            if delta > 0 && (self.used[idx] + delta) as f64 > self.bin_limit(idx, frac) + 1e-9 {
                ok = false;
                break;
            }
        }
        ok
    }

    fn max_overfill(&self, frac: f64) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.cap.len() {
            if self.cap[i] <= 0 {
                // No free area: any usage here is pure overlap with fixed
                // geometry, tolerated at global stage only if tiny.
                continue;
            }
            let density = self.used[i] as f64 / self.cap[i] as f64;
            worst = worst.max(density - frac.max(self.start_frac[i]));
        }
        worst
    }

    /// Freeze the current occupancy as each bin's floor bound.
    fn adopt_start_profile(&mut self) {
        for i in 0..self.cap.len() {
            self.start_frac[i] = if self.cap[i] > 0 {
                self.used[i] as f64 / self.cap[i] as f64
            } else {
                0.0
            };
        }
    }
}

/// Population a movable cell belongs to for scatter purposes.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Pop {
    Watermark,
    Fence(usize),
    Free,
}

pub fn global_place(
    design: &Design,
    constraints: &RegionConstraintSet,
    params: &PlaceParams,
) -> Result<GlobalResult, PlaceError> {
    global_place_impl(design, constraints, params, None)
}

/// Global placement warm-started from an existing placement: the start is
/// projected onto the constraint set and refined from there. Watermark
/// insertion uses this so the constrained solution stays close to the
/// original optimized placement instead of re-converging from scratch.
pub fn global_place_from(
    design: &Design,
    constraints: &RegionConstraintSet,
    params: &PlaceParams,
    start: &Placement,
) -> Result<GlobalResult, PlaceError> {
    global_place_impl(design, constraints, params, Some(start))
}

fn global_place_impl(
    design: &Design,
    constraints: &RegionConstraintSet,
    params: &PlaceParams,
    warm_start: Option<&Placement>,
) -> Result<GlobalResult, PlaceError> {
    constraints.validate(design)?;
    let target = params.density_target;
    if !(0.0 < target && target <= 1.0) {
        return Err(PlaceError::InvalidConstraints(format!("density target {target} outside (0,1]")));
    }

    // Region capacity prechecks at the density target.
    let fixed_overlap_with = |rect: &Rect| -> i64 {
        design
            .cells
            .iter()
            .filter(|c| c.kind.is_fixed())
            .filter_map(|c| {
                c.fixed_pos.map(|(x, y)| {
                    Rect { x_lo: x, y_lo: y, x_hi: x + c.width, y_hi: y + c.height }
                        .intersection_area(rect)
                })
            })
            .sum()
    };
    if let Some(wm) = &constraints.watermark {
        let member_area: i64 =
            wm.members.iter().map(|&m| design.cells[m].width * design.cells[m].height).sum();
        let capacity =
            ((wm.rect.area() - fixed_overlap_with(&wm.rect)) as f64 * target).floor() as i64;
        if member_area > capacity {
            return Err(PlaceError::RegionInfeasible {
                region: "watermark".into(),
                member_area,
                capacity,
            });
        }
    }
    for fr in &design.fence_regions {
        let member_area: i64 = design
            .cells
            .iter()
            .filter(|c| c.region_id == Some(fr.id) && c.kind.is_movable())
            .map(|c| c.width * c.height)
            .sum();
        let capacity: i64 = fr
            .rects
            .iter()
            .map(|r| ((r.area() - fixed_overlap_with(r)) as f64 * target).floor() as i64)
            .sum();
        if member_area > capacity {
            return Err(PlaceError::RegionInfeasible {
                region: format!("fence {}", fr.id),
                member_area,
                capacity,
            });
        }
    }
    let fixed_total: i64 = design
        .cells
        .iter()
        .filter(|c| c.kind.is_fixed())
        .map(|c| c.width * c.height)
        .sum();
    let free_total = design.die.area() - fixed_total;
    if design.movable_area() as f64 > free_total as f64 * (target + 0.05) {
        return Err(PlaceError::RegionInfeasible {
            region: "die".into(),
            member_area: design.movable_area(),
            capacity: (free_total as f64 * (target + 0.05)) as i64,
        });
    }

    let (nx, ny) = params.grid_for(design);
    let mut grid = BinGrid::new(design, nx, ny);
    let wm_member = constraints.member_flags(design.cells.len());
    let mut placement = design.seed_placement(Stage::Global);

    match warm_start {
        Some(start) => {
            placement.xs.copy_from_slice(&start.xs);
            placement.ys.copy_from_slice(&start.ys);
            for c in &design.cells {
                if let Some((x, y)) = c.fixed_pos {
                    placement.xs[c.id] = x;
                    placement.ys[c.id] = y;
                }
            }
            project_all(design, constraints, &wm_member, &mut placement);
            for c in design.cells.iter().filter(|c| c.kind.is_movable()) {
                grid.add(&placement.cell_rect(design, c.id));
            }
            grid.adopt_start_profile();
        }
        None => {
            scatter(design, constraints, &wm_member, params, &mut grid, &mut placement);
        }
    }
    repair_overflow(design, &wm_member, constraints.watermark.as_ref(), target, &mut grid, &mut placement);

    let initial_hpwl = metrics::hpwl(design, &placement);

    let nets_of = nets_per_cell(design);

    let mut hpwl_total = initial_hpwl;
    let mut lambda = params.density_weight.max(1.0);
    for _it in 0..params.max_iterations {
        let frac = target + 0.05 / lambda;
        let hpwl_before = hpwl_total;
        for c in design.cells.iter().filter(|c| c.kind.is_movable()) {
            let Some(target_pos) = median_target(design, &placement, &nets_of, c.id) else {
                continue;
            };
            let (mut tx, mut ty) = target_pos;
            // Keep the body inside the die.
            tx = tx.clamp(design.die.x_lo, design.die.x_hi - c.width);
            ty = ty.clamp(design.die.y_lo, design.die.y_hi - c.height);
            // Membership projection.
            if wm_member[c.id] {
                let wm = constraints.watermark.as_ref().unwrap();
                let (px, py) = project_center_into(&wm.rect, tx, ty, c.width, c.height);
                tx = px;
                ty = py;
            } else if let Some(wm) = &constraints.watermark {
                if let Some((px, py)) =
                    project_center_out(&wm.rect, &design.die, tx, ty, c.width, c.height)
                {
                    tx = px;
                    ty = py;
                }
            }
            if let Some(rid) = c.region_id {
                let (px, py) = project_into_region(&design.fence_regions[rid], tx, ty, c.width, c.height);
                tx = px;
                ty = py;
            }
            if (tx, ty) == placement.pos(c.id) {
                continue;
            }
            let delta = move_delta(design, &mut placement, &nets_of, c.id, tx, ty);
            if delta >= 0 {
                continue;
            }
            let old_rect = placement.cell_rect(design, c.id);
            let new_rect =
                Rect { x_lo: tx, y_lo: ty, x_hi: tx + c.width, y_hi: ty + c.height };
            if !grid.move_fits(&old_rect, &new_rect, frac) {
                continue;
            }
            grid.remove(&old_rect);
            grid.add(&new_rect);
            placement.xs[c.id] = tx;
            placement.ys[c.id] = ty;
            hpwl_total += delta;
        }
        lambda *= params.density_weight_mult;
        let rel_change = if hpwl_before > 0 {
            (hpwl_before - hpwl_total) as f64 / hpwl_before as f64
        } else {
            0.0
        };
        if rel_change < params.convergence_tol && grid.max_overfill(target + 0.05) <= 0.0 {
            break;
        }
    }
    if grid.max_overfill(target + 0.05) > 0.0 {
        repair_overflow(design, &wm_member, constraints.watermark.as_ref(), target, &mut grid, &mut placement);
        hpwl_total = metrics::hpwl(design, &placement);
    }

    debug_assert_eq!(hpwl_total, metrics::hpwl(design, &placement));
    let converged = hpwl_total <= initial_hpwl
        && contract_holds(design, &placement, constraints, &grid, target);
    Ok(GlobalResult { placement, initial_hpwl, final_hpwl: hpwl_total, converged })
}

/// Final contract audit: density within slack and membership exact.
fn contract_holds(
    design: &Design,
    placement: &Placement,
    constraints: &RegionConstraintSet,
    grid: &BinGrid,
    target: f64,
) -> bool {
    if grid.max_overfill(target + 0.05) > 0.0 {
        return false;
    }
    let wm_member = constraints.member_flags(design.cells.len());
    for c in design.cells.iter().filter(|c| c.kind.is_movable()) {
        let (cx2, cy2) = placement.center2(design, c.id);
        if let Some(wm) = &constraints.watermark {
            if wm.rect.contains_center2(cx2, cy2) != wm_member[c.id] {
                return false;
            }
        }
        if let Some(rid) = c.region_id {
            if !design.fence_regions[rid].contains_center2(cx2, cy2) {
                return false;
            }
        }
    }
    true
}

/// Project every movable cell onto the constraint set: members' centers
/// into the watermark rect, non-members out, fence members into their
/// regions, everything inside the die.
fn project_all(
    design: &Design,
    constraints: &RegionConstraintSet,
    wm_member: &[bool],
    placement: &mut Placement,
) {
    for c in design.cells.iter().filter(|c| c.kind.is_movable()) {
        let (mut x, mut y) = placement.pos(c.id);
        if wm_member[c.id] {
            let wm = constraints.watermark.as_ref().unwrap();
            let (px, py) = project_center_into(&wm.rect, x, y, c.width, c.height);
            x = px;
            y = py;
        } else if let Some(wm) = &constraints.watermark {
            if let Some((px, py)) = project_center_out(&wm.rect, &design.die, x, y, c.width, c.height)
            {
                x = px;
                y = py;
            }
        }
        if let Some(rid) = c.region_id {
            let (px, py) = project_into_region(&design.fence_regions[rid], x, y, c.width, c.height);
            x = px;
            y = py;
        }
        x = x.clamp(design.die.x_lo, design.die.x_hi - c.width);
        y = y.clamp(design.die.y_lo, design.die.y_hi - c.height);
        placement.xs[c.id] = x;
        placement.ys[c.id] = y;
    }
}

fn project_into_region(
    region: &crate::design::FenceRegion,
    x: i64,
    y: i64,
    w: i64,
    h: i64,
) -> (i64, i64) {
    let (cx2, cy2) = crate::geom::center2(x, y, w, h);
    if region.contains_center2(cx2, cy2) {
        return (x, y);
    }
    let mut best: Option<(i64, (i64, i64))> = None;
    for r in &region.rects {
        let (px, py) = project_center_into(r, x, y, w, h);
        let dist = (px - x).abs() + (py - y).abs();
        if best.map(|(d, _)| dist < d).unwrap_or(true) {
            best = Some((dist, (px, py)));
        }
    }
    best.map(|(_, p)| p).unwrap_or((x, y))
}

/// Capacity-weighted seeded scatter, one population at a time (watermark
/// members, fence members, then free cells) so restricted populations grab
/// their allowed area first.
fn scatter(
    design: &Design,
    constraints: &RegionConstraintSet,
    wm_member: &[bool],
    params: &PlaceParams,
    grid: &mut BinGrid,
    placement: &mut Placement,
) {
    let mut rng = DetRng::new(params.seed, Stream::GlobalScatter);
    let target = params.density_target;

    let pop_of = |cid: usize| -> Pop {
        if wm_member[cid] {
            Pop::Watermark
        } else if let Some(r) = design.cells[cid].region_id {
            Pop::Fence(r)
        } else {
            Pop::Free
        }
    };

    let mut pops: Vec<(Pop, Vec<usize>)> = Vec::new();
    if constraints.watermark.is_some() {
        pops.push((Pop::Watermark, Vec::new()));
    }
    for fr in &design.fence_regions {
        pops.push((Pop::Fence(fr.id), Vec::new()));
    }
    pops.push((Pop::Free, Vec::new()));
    for c in design.cells.iter().filter(|c| c.kind.is_movable()) {
        let p = pop_of(c.id);
        pops.iter_mut().find(|(q, _)| *q == p).unwrap().1.push(c.id);
    }

    for (pop, cells) in pops {
        if cells.is_empty() {
            continue;
        }
        // Cells fill bins in id order: synthetic and real netlists are
        // id-local, so raster filling seeds the sweeps with useful locality
        // while the in-bin jitter stays seed-controlled.
        // Allowed area per bin for this population.
        let allowed_rects: Vec<Rect> = match pop {
            Pop::Watermark => vec![constraints.watermark.as_ref().unwrap().rect],
            Pop::Fence(r) => design.fence_regions[r].rects.clone(),
            Pop::Free => vec![design.die],
        };
        let wm_rect = constraints.watermark.as_ref().map(|w| w.rect);
        let n_bins = grid.cap.len();
        let mut allowed: Vec<i64> = vec![0; n_bins];
        for by in 0..grid.ny {
            for bx in 0..grid.nx {
                let idx = by * grid.nx + bx;
                let bin = grid.bin_rect(bx, by);
                let mut area: i64 =
                    allowed_rects.iter().map(|r| bin.intersection_area(r)).sum();
                if pop == Pop::Free {
                    if let Some(wr) = &wm_rect {
                        area -= bin.intersection_area(wr);
                    }
                }
                // Never promise more than the remaining free capacity.
                let remaining =
                    ((grid.cap[idx] as f64 * target) as i64 - grid.used[idx]).max(0);
                allowed[idx] = area.min(remaining).max(0);
            }
        }
        let total_allowed: i64 = allowed.iter().sum();
        let total_area: i64 =
            cells.iter().map(|&c| design.cells[c].width * design.cells[c].height).sum();
        let fill = if total_allowed > 0 {
            (total_area as f64 / total_allowed as f64).min(1.0)
        } else {
            1.0
        };
        // Walk bins in index order, filling each to its proportional budget.
        let mut budgets: Vec<f64> = allowed.iter().map(|&a| a as f64 * fill).collect();
        let mut bin_cursor = 0usize;
        for &cid in &cells {
            let c = &design.cells[cid];
            let area = c.width * c.height;
            let mut guard = 0;
            while guard <= n_bins {
                guard += 1;
                let idx = bin_cursor % n_bins;
                if budgets[idx] >= area as f64 * 0.5 && allowed[idx] > 0 {
                    budgets[idx] -= area as f64;
                    let bx = idx % grid.nx;
                    let by = idx / grid.nx;
                    let bin = grid.bin_rect(bx, by);
                    // Draw a position inside the bin, then project the
                    // center into the population's allowed geometry.
                    let mut x = rng.range_i64(bin.x_lo, (bin.x_hi - c.width).max(bin.x_lo));
                    let mut y = rng.range_i64(bin.y_lo, (bin.y_hi - c.height).max(bin.y_lo));
                    match pop {
                        Pop::Watermark => {
                            let wm = constraints.watermark.as_ref().unwrap();
                            let (px, py) = project_center_into(&wm.rect, x, y, c.width, c.height);
                            x = px;
                            y = py;
                        }
                        Pop::Fence(r) => {
                            let (px, py) =
                                project_into_region(&design.fence_regions[r], x, y, c.width, c.height);
                            x = px;
                            y = py;
                        }
                        Pop::Free => {
                            if let Some(wr) = &wm_rect {
                                if let Some((px, py)) =
                                    project_center_out(wr, &design.die, x, y, c.width, c.height)
                                {
                                    x = px;
                                    y = py;
                                }
                            }
                        }
                    }
                    x = x.clamp(design.die.x_lo, design.die.x_hi - c.width);
                    y = y.clamp(design.die.y_lo, design.die.y_hi - c.height);
                    placement.xs[cid] = x;
                    placement.ys[cid] = y;
                    grid.add(&placement.cell_rect(design, cid));
                    break;
                }
                bin_cursor += 1;
            }
            if guard > n_bins {
                // Budgets exhausted by rounding: place at the emptiest allowed bin.
                let idx = (0..n_bins)
                    .filter(|&i| allowed[i] > 0)
                    .min_by_key(|&i| (grid.used[i].saturating_mul(1000) / grid.cap[i].max(1), i))
                    .unwrap_or(0);
                let bx = idx % grid.nx;
                let by = idx / grid.nx;
                let bin = grid.bin_rect(bx, by);
                let mut x = bin.x_lo;
                let mut y = bin.y_lo;
                match pop {
                    Pop::Watermark => {
                        let wm = constraints.watermark.as_ref().unwrap();
                        let (px, py) = project_center_into(&wm.rect, x, y, c.width, c.height);
                        x = px;
                        y = py;
                    }
                    Pop::Fence(r) => {
                        let (px, py) =
                            project_into_region(&design.fence_regions[r], x, y, c.width, c.height);
                        x = px;
                        y = py;
                    }
                    Pop::Free => {
                        if let Some(wr) = &wm_rect {
                            if let Some((px, py)) =
                                project_center_out(wr, &design.die, x, y, c.width, c.height)
                            {
                                x = px;
                                y = py;
                            }
                        }
                    }
                }
                x = x.clamp(design.die.x_lo, design.die.x_hi - c.width);
                y = y.clamp(design.die.y_lo, design.die.y_hi - c.height);
                placement.xs[cid] = x;
                placement.ys[cid] = y;
                grid.add(&placement.cell_rect(design, cid));
            }
        }
    }
}

/// Deterministic overflow repair: walk overfull bins and relocate their
/// least-constrained cells to the nearest allowed bin with headroom.
fn repair_overflow(
    design: &Design,
    wm_member: &[bool],
    watermark: Option<&WatermarkRegion>,
    target: f64,
    grid: &mut BinGrid,
    placement: &mut Placement,
) {
    let n_bins = grid.cap.len();
    // center-bin cell lists
    let mut cells_in: Vec<Vec<usize>> = vec![Vec::new(); n_bins];
    for c in design.cells.iter().filter(|c| c.kind.is_movable()) {
        let (x, y) = placement.pos(c.id);
        let (bx, by) = grid.bin_of_point(x, y);
        cells_in[by * grid.nx + bx].push(c.id);
    }

    let max_passes = 6;
    for _pass in 0..max_passes {
        let mut any = false;
        for idx in 0..n_bins {
            let limit = grid.bin_limit(idx, target);
            if (grid.used[idx] as f64) <= limit + 1e-9 {
                continue;
            }
            // Evict free cells first, fence members second, watermark
            // members last; ascending id inside each class.
            let mut evictable: Vec<usize> = cells_in[idx].clone();
            evictable.sort_by_key(|&cid| {
                let class = if wm_member[cid] {
                    2
                } else if design.cells[cid].region_id.is_some() {
                    1
                } else {
                    0
                };
                (class, cid)
            });
            for cid in evictable {
                if (grid.used[idx] as f64) <= limit + 1e-9 {
                    break;
                }
                let c = &design.cells[cid];
                let Some(dst) = nearest_bin_with_room(
                    design, grid, wm_member, watermark, target, cid, idx,
                ) else {
                    continue;
                };
                if dst == idx {
                    continue;
                }
                let old_rect = placement.cell_rect(design, cid);
                grid.remove(&old_rect);
                let bx = dst % grid.nx;
                let by = dst / grid.nx;
                let bin = grid.bin_rect(bx, by);
                let (mut x, mut y) = (
                    (bin.x_lo + bin.x_hi - c.width) / 2,
                    (bin.y_lo + bin.y_hi - c.height) / 2,
                );
                if wm_member[cid] {
                    let wm = watermark.unwrap();
                    let (px, py) = project_center_into(&wm.rect, x, y, c.width, c.height);
                    x = px;
                    y = py;
                } else {
                    if let Some(wm) = watermark {
                        if let Some((px, py)) =
                            project_center_out(&wm.rect, &design.die, x, y, c.width, c.height)
                        {
                            x = px;
                            y = py;
                        }
                    }
                }
                if let Some(rid) = c.region_id {
                    let (px, py) = project_into_region(&design.fence_regions[rid], x, y, c.width, c.height);
                    x = px;
                    y = py;
                }
                x = x.clamp(design.die.x_lo, design.die.x_hi - c.width);
                y = y.clamp(design.die.y_lo, design.die.y_hi - c.height);
                placement.xs[cid] = x;
                placement.ys[cid] = y;
                grid.add(&placement.cell_rect(design, cid));
                cells_in[idx].retain(|&v| v != cid);
                let (nbx, nby) = grid.bin_of_point(x, y);
                cells_in[nby * grid.nx + nbx].push(cid);
                any = true;
            }
        }
        if !any {
            break;
        }
    }
}


/// Nearest bin (Chebyshev rings, deterministic scan order) that can host the
/// cell within the density target and intersects its allowed geometry.
fn nearest_bin_with_room(
    design: &Design,
    grid: &BinGrid,
    wm_member: &[bool],
    watermark: Option<&WatermarkRegion>,
    target: f64,
    cid: usize,
    from: usize,
) -> Option<usize> {
    let c = &design.cells[cid];
    let area = c.width * c.height;
    let fx = (from % grid.nx) as i64;
    let fy = (from / grid.nx) as i64;
    let allowed_ok = |idx: usize| -> bool {
        let bin = grid.bin_rect(idx % grid.nx, idx / grid.nx);
        if wm_member[cid] {
            let wm = watermark.unwrap();
            if bin.intersection_area(&wm.rect) < area {
                return false;
            }
        } else if let Some(wm) = watermark {
            // A free cell needs room outside the watermark rect.
            if bin.intersection_area(&wm.rect) >= bin.area() {
                return false;
            }
        }
        if let Some(rid) = c.region_id {
            let inter: i64 = design.fence_regions[rid]
                .rects
                .iter()
                .map(|r| bin.intersection_area(r))
                .sum();
            if inter < area {
                return false;
            }
        }
        true
    };
    let max_ring = grid.nx.max(grid.ny) as i64;
    for ring in 1..=max_ring {
        let mut best: Option<usize> = None;
        for dy in -ring..=ring {
            for dx in -ring..=ring {
                if dx.abs().max(dy.abs()) != ring {
                    continue;
                }
                let bx = fx + dx;
                let by = fy + dy;
                if bx < 0 || by < 0 || bx >= grid.nx as i64 || by >= grid.ny as i64 {
                    continue;
                }
                let idx = by as usize * grid.nx + bx as usize;
                if (grid.used[idx] + area) as f64 <= grid.bin_limit(idx, target) + 1e-9
                    && allowed_ok(idx)
                    && best.map(|b| idx < b).unwrap_or(true)
                {
                    best = Some(idx);
                }
            }
        }
        if best.is_some() {
            return best;
        }
    }
    None
}
