//! Three-stage placement engine: region-aware global placement, row
//! legalization, and refining detailed placement.
//!
//! Every stage honors the same constraint set: design fence regions (each
//! member cell's center stays inside its region) and an optional exclusive
//! watermark region (member centers inside, every other movable center
//! outside). Constraint enforcement is built on row *segments*: free row
//! intervals cut at blockage and region boundaries, labeled with the fence
//! and watermark membership every single-height cell inside them would
//! have. A cell placed fully inside a segment provably satisfies the
//! segment's labels, which is what keeps exclusivity exact across stages.

mod detailed;
mod global;
mod legalize;

pub use detailed::detailed_place;
pub use global::{global_place, global_place_from, GlobalResult};
pub use legalize::legalize;

use crate::design::{Design, Placement};
use crate::geom::Rect;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlaceError {
    #[error("region `{region}` cannot host its members: member area {member_area} exceeds capacity {capacity} at the density target")]
    RegionInfeasible { region: String, member_area: i64, capacity: i64 },
    #[error("legalization overflow: {0}")]
    LegalizationOverflow(String),
    #[error("invalid constraints: {0}")]
    InvalidConstraints(String),
}

/// Parameters for the detailed-placement refinement passes.
#[derive(Debug, Clone)]
pub struct DetailedParams {
    /// Maximum number of full passes; a pass that commits nothing stops early.
    pub passes: usize,
    /// Window size for the reordering move (permutations of consecutive cells).
    pub reorder_window: usize,
    /// Also commit zero-gain slides onto each cell's canonical optimal
    /// position. Off by default; the optimization attack turns it on.
    pub slide_to_flat_optimum: bool,
}

impl Default for DetailedParams {
    fn default() -> Self {
        DetailedParams { passes: 5, reorder_window: 3, slide_to_flat_optimum: false }
    }
}

#[derive(Debug, Clone)]
pub struct PlaceParams {
    /// Density target (the bound every bin must satisfy, with +0.05 slack).
    pub density_target: f64,
    /// Density grid; 0 means choose from the design size.
    pub bins_x: usize,
    pub bins_y: usize,
    pub max_iterations: usize,
    /// Density weight schedule: initial value and per-iteration multiplier.
    /// The allowed per-bin slack shrinks as the weight escalates.
    pub density_weight: f64,
    pub density_weight_mult: f64,
    /// Relative HPWL change that counts as converged.
    pub convergence_tol: f64,
    /// Full pipeline rounds: the first runs global placement from the
    /// seeded scatter, later rounds warm-start it from the previous round's
    /// detailed placement. Watermark insertion replaces the final round
    /// with a constrained one of identical budget.
    pub rounds: usize,
    pub seed: u64,
    pub detailed: DetailedParams,
}

impl Default for PlaceParams {
    fn default() -> Self {
        PlaceParams {
            density_target: 0.8,
            bins_x: 0,
            bins_y: 0,
            max_iterations: 24,
            density_weight: 1.0,
            density_weight_mult: 2.0,
            convergence_tol: 5e-4,
            rounds: 3,
            seed: 1,
            // Enough passes that detailed placement stops by quiescence;
            // the shipped placement must not leave gains on the table for
            // an attacker's re-optimization to harvest.
            detailed: DetailedParams { passes: 24, ..DetailedParams::default() },
        }
    }
}

impl PlaceParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub(crate) fn grid_for(&self, design: &Design) -> (usize, usize) {
        if self.bins_x > 0 && self.bins_y > 0 {
            return (self.bins_x, self.bins_y);
        }
        // Around 10 cells per bin: fine enough that the per-bin cap limits
        // local pile-ups, coarse enough to stay cheap.
        let n = design.movable_count().max(1);
        let side = (((n as f64) / 10.0).sqrt().round() as usize).clamp(4, 96);
        (side, side)
    }
}

/// The exclusive watermark region: members must be inside, everyone else out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WatermarkRegion {
    pub rect: Rect,
    /// Sorted, deduplicated movable cell ids.
    pub members: Vec<usize>,
}

impl WatermarkRegion {
    pub fn new(rect: Rect, mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        WatermarkRegion { rect, members }
    }
}

/// Fence regions come from the design itself; the watermark region is the
/// one optional extra constraint layered on top.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RegionConstraintSet {
    pub watermark: Option<WatermarkRegion>,
}

impl RegionConstraintSet {
    pub fn none() -> Self {
        RegionConstraintSet { watermark: None }
    }

    pub fn with_watermark(rect: Rect, members: Vec<usize>) -> Self {
        RegionConstraintSet { watermark: Some(WatermarkRegion::new(rect, members)) }
    }

    pub fn validate(&self, design: &Design) -> Result<(), PlaceError> {
        if let Some(wm) = &self.watermark {
            if !design.die.contains_rect(&wm.rect) {
                return Err(PlaceError::InvalidConstraints("watermark region leaves the die".into()));
            }
            for &m in &wm.members {
                let Some(cell) = design.cells.get(m) else {
                    return Err(PlaceError::InvalidConstraints(format!("watermark member {m} does not exist")));
                };
                if !cell.kind.is_movable() {
                    return Err(PlaceError::InvalidConstraints(format!("watermark member {m} is fixed")));
                }
            }
            for c in &design.cells {
                if c.kind.is_fixed() {
                    if let Some((x, y)) = c.fixed_pos {
                        let r = Rect { x_lo: x, y_lo: y, x_hi: x + c.width, y_hi: y + c.height };
                        if c.kind == crate::design::CellKind::Macro && r.intersects(&wm.rect) {
                            return Err(PlaceError::InvalidConstraints(
                                "watermark region intersects a fixed macro".into(),
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Per-cell watermark membership flags.
    pub(crate) fn member_flags(&self, n_cells: usize) -> Vec<bool> {
        let mut flags = vec![false; n_cells];
        if let Some(wm) = &self.watermark {
            for &m in &wm.members {
                if m < n_cells {
                    flags[m] = true;
                }
            }
        }
        flags
    }
}

/// A free interval of one row, labeled with the fence region and watermark
/// containment that any single-height cell fully inside it would have.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub row: usize,
    pub x_lo: i64,
    pub x_hi: i64,
    pub fence: Option<usize>,
    pub inside_wm: bool,
}

impl Segment {
    pub fn width(&self) -> i64 {
        self.x_hi - self.x_lo
    }
}

#[derive(Debug, Clone)]
pub struct SegmentMap {
    pub segments: Vec<Segment>,
    /// Segment indices per row, ascending x.
    pub by_row: Vec<Vec<usize>>,
}

impl SegmentMap {
    /// The segment of `row` that fully contains `[x, x + width)`, if any.
    pub fn containing(&self, row: usize, x: i64, width: i64) -> Option<usize> {
        self.by_row.get(row)?.iter().copied().find(|&s| {
            let seg = &self.segments[s];
            seg.x_lo <= x && x + width <= seg.x_hi
        })
    }
}

/// Whether a single-height cell may be placed inside this segment.
pub(crate) fn allowed_in_segment(
    cell: &crate::design::Cell,
    seg: &Segment,
    wm_member: &[bool],
) -> bool {
    if wm_member.get(cell.id).copied().unwrap_or(false) {
        if !seg.inside_wm {
            return false;
        }
    } else if seg.inside_wm {
        return false;
    }
    match cell.region_id {
        Some(r) => seg.fence == Some(r),
        None => true,
    }
}

/// Build labeled free segments for every row: the row span minus blockages,
/// cut at fence and watermark x-boundaries (for region rects covering the
/// row's single-height center line).
pub(crate) fn build_segments(
    design: &Design,
    watermark: Option<&WatermarkRegion>,
    extra_blockages: &[Rect],
) -> SegmentMap {
    let rh = design.row_height;
    let mut segments = Vec::new();
    let mut by_row = vec![Vec::new(); design.rows.len()];

    // Blockages per row: fixed cells plus caller-provided rectangles.
    let mut blocked: Vec<Vec<(i64, i64)>> = vec![Vec::new(); design.rows.len()];
    let add_blockage = |rect: &Rect, blocked: &mut Vec<Vec<(i64, i64)>>| {
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
            add_blockage(&Rect { x_lo: x, y_lo: y, x_hi: x + c.width, y_hi: y + c.height }, &mut blocked);
        }
    }
    for rect in extra_blockages {
        add_blockage(rect, &mut blocked);
    }

    for (ri, row) in design.rows.iter().enumerate() {
        // Free intervals of this row.
        let mut iv = blocked[ri].clone();
        iv.sort_unstable();
        let mut free: Vec<(i64, i64)> = Vec::new();
        let mut cursor = row.x_lo;
        for (lo, hi) in iv {
            if lo > cursor {
                free.push((cursor, lo));
            }
            cursor = cursor.max(hi);
        }
        if cursor < row.x_hi {
            free.push((cursor, row.x_hi));
        }

        // Region rects whose y-range covers this row's single-height center
        // line contribute x cut points.
        let center_y2 = 2 * row.y + rh;
        let mut cuts: Vec<i64> = Vec::new();
        let mut covering_fences: Vec<(usize, &Rect)> = Vec::new();
        for fr in &design.fence_regions {
            for r in &fr.rects {
                if 2 * r.y_lo <= center_y2 && center_y2 < 2 * r.y_hi {
                    cuts.push(r.x_lo);
                    cuts.push(r.x_hi);
                    covering_fences.push((fr.id, r));
                }
            }
        }
        let wm_covers = watermark
            .map(|wm| 2 * wm.rect.y_lo <= center_y2 && center_y2 < 2 * wm.rect.y_hi)
            .unwrap_or(false);
        if let (true, Some(wm)) = (wm_covers, watermark) {
            cuts.push(wm.rect.x_lo);
            cuts.push(wm.rect.x_hi);
        }
        cuts.sort_unstable();
        cuts.dedup();

        for (lo, hi) in free {
            let mut piece_lo = lo;
            let mut bounds: Vec<i64> = cuts.iter().copied().filter(|&c| c > lo && c < hi).collect();
            bounds.push(hi);
            for piece_hi in bounds {
                let fence = covering_fences
                    .iter()
                    .find(|(_, r)| r.x_lo <= piece_lo && piece_hi <= r.x_hi)
                    .map(|(id, _)| *id);
                let inside_wm = wm_covers
                    && watermark
                        .map(|wm| wm.rect.x_lo <= piece_lo && piece_hi <= wm.rect.x_hi)
                        .unwrap_or(false);
                by_row[ri].push(segments.len());
                segments.push(Segment { row: ri, x_lo: piece_lo, x_hi: piece_hi, fence, inside_wm });
                piece_lo = piece_hi;
            }
        }
    }
    SegmentMap { segments, by_row }
}

/// Incidence lists: for each cell, the nets touching it.
pub(crate) fn nets_per_cell(design: &Design) -> Vec<Vec<usize>> {
    let mut nets_of: Vec<Vec<usize>> = vec![Vec::new(); design.cells.len()];
    for net in &design.nets {
        for p in &net.pins {
            if nets_of[p.cell].last() != Some(&net.id) {
                nets_of[p.cell].push(net.id);
            }
        }
    }
    nets_of
}

/// Optimal-position estimate for one cell: median of the per-net intervals
/// that would zero its pull. Candidates are still vetted by exact delta
/// evaluation before any commit.
pub(crate) fn median_target(
    design: &Design,
    placement: &Placement,
    nets_of: &[Vec<usize>],
    cell: usize,
) -> Option<(i64, i64)> {
    let mut xs: Vec<i64> = Vec::new();
    let mut ys: Vec<i64> = Vec::new();
    for &nid in &nets_of[cell] {
        let net = &design.nets[nid];
        let mut own_dx = None;
        let mut own_dy = None;
        let mut lo_x = i64::MAX;
        let mut hi_x = i64::MIN;
        let mut lo_y = i64::MAX;
        let mut hi_y = i64::MIN;
        for p in &net.pins {
            if p.cell == cell {
                if own_dx.is_none() {
                    own_dx = Some(p.dx);
                    own_dy = Some(p.dy);
                }
                continue;
            }
            let px = placement.xs[p.cell] + p.dx;
            let py = placement.ys[p.cell] + p.dy;
            lo_x = lo_x.min(px);
            hi_x = hi_x.max(px);
            lo_y = lo_y.min(py);
            hi_y = hi_y.max(py);
        }
        if lo_x > hi_x {
            continue; // all pins on this cell
        }
        let (dx, dy) = (own_dx.unwrap_or(0), own_dy.unwrap_or(0));
        xs.push(lo_x - dx);
        xs.push(hi_x - dx);
        ys.push(lo_y - dy);
        ys.push(hi_y - dy);
    }
    if xs.is_empty() {
        return None;
    }
    xs.sort_unstable();
    ys.sort_unstable();
    Some((xs[xs.len() / 2], ys[ys.len() / 2]))
}

/// Exact HPWL change if `cell` moved to `(tx, ty)`; the placement is
/// restored before returning.
pub(crate) fn move_delta(
    design: &Design,
    placement: &mut Placement,
    nets_of: &[Vec<usize>],
    cell: usize,
    tx: i64,
    ty: i64,
) -> i64 {
    let mut before = 0;
    for &nid in &nets_of[cell] {
        before += crate::metrics::net_hpwl(design, placement, nid);
    }
    let (ox, oy) = placement.pos(cell);
    placement.xs[cell] = tx;
    placement.ys[cell] = ty;
    let mut after = 0;
    for &nid in &nets_of[cell] {
        after += crate::metrics::net_hpwl(design, placement, nid);
    }
    placement.xs[cell] = ox;
    placement.ys[cell] = oy;
    after - before
}

/// Exact HPWL change of applying several moves at once; restores the
/// placement before returning.
pub(crate) fn multi_move_delta(
    design: &Design,
    placement: &mut Placement,
    nets_of: &[Vec<usize>],
    moves: &[(usize, i64, i64)],
) -> i64 {
    let mut nets: Vec<usize> = moves.iter().flat_map(|&(c, _, _)| nets_of[c].iter().copied()).collect();
    nets.sort_unstable();
    nets.dedup();
    let mut before = 0;
    for &nid in &nets {
        before += crate::metrics::net_hpwl(design, placement, nid);
    }
    let saved: Vec<(usize, i64, i64)> =
        moves.iter().map(|&(c, _, _)| (c, placement.xs[c], placement.ys[c])).collect();
    for &(c, x, y) in moves {
        placement.xs[c] = x;
        placement.ys[c] = y;
    }
    let mut after = 0;
    for &nid in &nets {
        after += crate::metrics::net_hpwl(design, placement, nid);
    }
    for &(c, x, y) in &saved {
        placement.xs[c] = x;
        placement.ys[c] = y;
    }
    after - before
}

/// Full pipeline result. `warm_from` is the placement the final global
/// round started from (None when only one round ran); a watermarking flow
/// re-runs that final round from the same state with its constraints added,
/// so the quality comparison is effort-for-effort.
#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub global: GlobalResult,
    pub legalized: Placement,
    pub detailed: Placement,
    pub hpwl: i64,
    pub warm_from: Option<Placement>,
}

pub fn place_pipeline(
    design: &Design,
    constraints: &RegionConstraintSet,
    params: &PlaceParams,
) -> Result<PipelineResult, PlaceError> {
    let rounds = params.rounds.max(1);
    let mut warm_from: Option<Placement> = None;
    let mut global = global_place(design, constraints, params)?;
    let mut legalized = legalize(design, &global.placement, constraints)?;
    let mut detailed = detailed_place(design, &legalized, constraints, &params.detailed);
    for _ in 1..rounds {
        let start = detailed.clone();
        global = global_place_from(design, constraints, params, &start)?;
        legalized = legalize(design, &global.placement, constraints)?;
        detailed = detailed_place(design, &legalized, constraints, &params.detailed);
        warm_from = Some(start);
    }
    let hpwl = crate::metrics::hpwl(design, &detailed);
    Ok(PipelineResult { global, legalized, detailed, hpwl, warm_from })
}
