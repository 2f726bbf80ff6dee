//! Detailed watermarking: candidate selection over the legalized placement,
//! signature-driven displacement before detailed placement, and
//! exact-displacement extraction.
//!
//! A candidate move is sound on its own: applied alone to the legalized
//! placement it creates no overlap and keeps the cell inside its row
//! segment, so fence and watermark membership survive. Because two
//! individually-sound moves can still conflict jointly, insertion
//! re-validates each move against the current intermediate state and skips
//! to the next shuffled candidate on conflict.

use crate::design::{Design, Placement};
use crate::metrics::check_legal_with;
use crate::placer::{
    allowed_in_segment, build_segments, detailed_place, DetailedParams, RegionConstraintSet,
    SegmentMap,
};
use crate::rng::{DetRng, Stream};
use std::fmt;
use thiserror::Error;

/// Fixed-length bit sequence embedded by displacement schemes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub bits: Vec<bool>,
}

impl Signature {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        assert!(!bits.is_empty(), "signature needs at least one bit");
        Signature { bits }
    }

    /// Parse `0b0101...`, `0x1f...`, or a raw bit string.
    pub fn parse(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
            let mut bits = Vec::with_capacity(hex.len() * 4);
            for ch in hex.chars() {
                let v = ch.to_digit(16).ok_or_else(|| format!("bad hex digit `{ch}`"))?;
                for k in (0..4).rev() {
                    bits.push((v >> k) & 1 == 1);
                }
            }
            if bits.is_empty() {
                return Err("empty signature".into());
            }
            return Ok(Signature { bits });
        }
        let body = s.strip_prefix("0b").or_else(|| s.strip_prefix("0B")).unwrap_or(s);
        let mut bits = Vec::with_capacity(body.len());
        for ch in body.chars() {
            match ch {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => return Err(format!("bad signature bit `{ch}`")),
            }
        }
        if bits.is_empty() {
            return Err("empty signature".into());
        }
        Ok(Signature { bits })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn zeros(&self) -> usize {
        self.len() - self.ones()
    }

    /// Deterministic pseudorandom signature, for sweeps and tests.
    pub fn random(len: usize, seed: u64) -> Self {
        let mut rng = DetRng::new(seed, Stream::DwShuffle);
        Signature { bits: (0..len.max(1)).map(|_| rng.coin()).collect() }
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0b")?;
        for &b in &self.bits {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::X => write!(f, "x"),
            Axis::Y => write!(f, "y"),
        }
    }
}

#[derive(Debug, Error)]
pub enum DwError {
    #[error("insufficient {axis}-axis candidates: need {needed}, have {available}")]
    InsufficientCandidates { axis: Axis, needed: usize, available: usize },
}

/// Candidate cells with room to move, and the signed displacement recorded
/// for each (right/up positive).
#[derive(Debug, Clone, Default)]
pub struct DwCandidates {
    pub x_cells: Vec<usize>,
    pub x_moves: Vec<i64>,
    pub y_cells: Vec<usize>,
    pub y_moves: Vec<i64>,
}

/// The persisted detailed watermark: cells in signature order, their
/// intermediate positions, and the displacement record against the final
/// watermarked placement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DwWatermark {
    pub cells: Vec<usize>,
    pub itr_positions: Vec<(i64, i64)>,
    pub dist: Vec<(i64, i64)>,
}

/// Row-local occupancy view used for clearance checks: every movable cell
/// listed in each row strip it covers, ascending x.
pub(crate) struct RowOcc {
    pub(crate) rows: Vec<Vec<(i64, i64, usize)>>, // (x_lo, x_hi, cell)
}

impl RowOcc {
    pub(crate) fn build(design: &Design, placement: &Placement) -> Self {
        let mut rows = vec![Vec::new(); design.rows.len()];
        let rh = design.row_height;
        for c in design.cells.iter().filter(|c| c.kind.is_movable()) {
            let (x, y) = placement.pos(c.id);
            if let Some(r0) = design.row_index_of_y(y) {
                for k in 0..design.rows_spanned(c.height) {
                    if r0 + k < rows.len() {
                        rows[r0 + k].push((x, x + c.width, c.id));
                    }
                }
            } else {
                // off-grid y (should not happen on legal input): bucket by strip
                let r = ((y - design.rows[0].y).div_euclid(rh))
                    .clamp(0, rows.len() as i64 - 1);
                rows[r as usize].push((x, x + c.width, c.id));
            }
        }
        for row in &mut rows {
            row.sort_unstable();
        }
        RowOcc { rows }
    }

    /// Neighbors of `[x, x_hi)` in `row`, excluding `cell`: returns
    /// (previous end, next start). An overlapping occupant poisons the gap.
    pub(crate) fn gap_around(&self, row: usize, x: i64, x_hi: i64, cell: usize) -> (i64, i64) {
        let mut prev_end = i64::MIN;
        let mut next_start = i64::MAX;
        for &(lo, hi, id) in &self.rows[row] {
            if id == cell {
                continue;
            }
            if hi <= x {
                prev_end = prev_end.max(hi);
            } else if lo >= x_hi {
                next_start = next_start.min(lo);
            } else {
                return (i64::MAX, i64::MIN);
            }
        }
        (prev_end, next_start)
    }

    pub(crate) fn remove(&mut self, design: &Design, placement: &Placement, cell: usize) {
        let y = placement.ys[cell];
        if let Some(r0) = design.row_index_of_y(y) {
            for k in 0..design.rows_spanned(design.cells[cell].height) {
                if r0 + k < self.rows.len() {
                    self.rows[r0 + k].retain(|&(_, _, id)| id != cell);
                }
            }
        }
    }

    pub(crate) fn insert(&mut self, design: &Design, placement: &Placement, cell: usize) {
        let (x, y) = placement.pos(cell);
        let c = &design.cells[cell];
        if let Some(r0) = design.row_index_of_y(y) {
            for k in 0..design.rows_spanned(c.height) {
                if r0 + k < self.rows.len() {
                    let row = &mut self.rows[r0 + k];
                    let pos = row.partition_point(|&(lo, _, _)| lo < x);
                    row.insert(pos, (x, x + c.width, cell));
                }
            }
        }
    }
}

/// Scan rows in ascending order (then ascending x) and collect cells that
/// can shift `d_x` along x or `d_y` along y without overlap, staying inside
/// their segment so region membership survives. When both directions are
/// free the one with more clearance wins, ties to the positive direction.
///
/// `filter` restricts the scan to flagged cells (the combined scheme passes
/// the watermark-region members here).
pub fn select_candidates_filtered(
    design: &Design,
    placement: &Placement,
    constraints: &RegionConstraintSet,
    d_x: i64,
    d_y: i64,
    filter: Option<&[bool]>,
) -> DwCandidates {
    assert!(d_x > 0 && d_y > 0, "displacement units must be positive");
    let rh = design.row_height;
    let wm_member = constraints.member_flags(design.cells.len());
    let multi_rects: Vec<_> = design
        .cells
        .iter()
        .filter(|c| c.kind.is_movable() && c.height > rh)
        .map(|c| placement.cell_rect(design, c.id))
        .collect();
    let segmap = build_segments(design, constraints.watermark.as_ref(), &multi_rects);
    let occ = RowOcc::build(design, placement);

    let mut out = DwCandidates::default();
    for (row_idx, row) in occ.rows.iter().enumerate() {
        for &(x, x_hi, cid) in row {
            let c = &design.cells[cid];
            if c.height != rh {
                continue; // multi-row cells are anchors, not candidates
            }
            if placement.ys[cid] != design.rows[row_idx].y {
                continue; // listed in a covered strip, anchored elsewhere
            }
            if let Some(f) = filter {
                if !f.get(cid).copied().unwrap_or(false) {
                    continue;
                }
            }
            // x-axis: clearance to in-row neighbors within the segment.
            if let Some(sidx) = segmap.containing(row_idx, x, c.width) {
                let seg = &segmap.segments[sidx];
                let (prev_end, next_start) = occ.gap_around(row_idx, x, x_hi, cid);
                let left = x - prev_end.max(seg.x_lo);
                let right = next_start.min(seg.x_hi) - x_hi;
                let dir = if left >= d_x && right >= d_x {
                    if left > right {
                        Some(-1)
                    } else {
                        Some(1) // ties to the right
                    }
                } else if right >= d_x {
                    Some(1)
                } else if left >= d_x {
                    Some(-1)
                } else {
                    None
                };
                if let Some(s) = dir {
                    out.x_cells.push(cid);
                    out.x_moves.push(s * d_x);
                }
            }
            // y-axis: a free, allowed landing interval in the row d_y away.
            let up = landing_slack(design, &segmap, &occ, &wm_member, cid, x, placement.ys[cid] + d_y);
            let down =
                landing_slack(design, &segmap, &occ, &wm_member, cid, x, placement.ys[cid] - d_y);
            let dir = match (down, up) {
                (Some(d), Some(u)) => {
                    if d > u {
                        Some(-1)
                    } else {
                        Some(1) // ties upward
                    }
                }
                (None, Some(_)) => Some(1),
                (Some(_), None) => Some(-1),
                (None, None) => None,
            };
            if let Some(s) = dir {
                out.y_cells.push(cid);
                out.y_moves.push(s * d_y);
            }
        }
    }
    out
}

pub fn select_candidates(
    design: &Design,
    placement: &Placement,
    constraints: &RegionConstraintSet,
    d_x: i64,
    d_y: i64,
) -> DwCandidates {
    select_candidates_filtered(design, placement, constraints, d_x, d_y, None)
}

/// Slack of the free interval that would host `[x, x+w)` at `target_y`, or
/// None when the landing is illegal (off-grid, occupied, or in a segment
/// the cell may not enter).
fn landing_slack(
    design: &Design,
    segmap: &SegmentMap,
    occ: &RowOcc,
    wm_member: &[bool],
    cid: usize,
    x: i64,
    target_y: i64,
) -> Option<i64> {
    let c = &design.cells[cid];
    let row = design.row_index_of_y(target_y)?;
    let sidx = segmap.containing(row, x, c.width)?;
    let seg = &segmap.segments[sidx];
    if !allowed_in_segment(c, seg, wm_member) {
        return None;
    }
    let (prev_end, next_start) = occ.gap_around(row, x, x + c.width, cid);
    let lo = prev_end.max(seg.x_lo);
    let hi = next_start.min(seg.x_hi);
    if lo <= x && x + c.width <= hi {
        Some((hi - lo) - c.width)
    } else {
        None
    }
}

/// Apply a signature: bit 1 consumes the next shuffled x-candidate, bit 0
/// the next y-candidate. Returns the final watermarked placement (after
/// the compensating detailed placement) and the watermark record.
pub fn insert_dw(
    design: &Design,
    placement: &Placement,
    constraints: &RegionConstraintSet,
    signature: &Signature,
    candidates: &DwCandidates,
    seed: u64,
    detailed: &DetailedParams,
) -> Result<(Placement, DwWatermark), DwError> {
    let needed_x = signature.ones();
    let needed_y = signature.zeros();
    if candidates.x_cells.len() < needed_x {
        return Err(DwError::InsufficientCandidates {
            axis: Axis::X,
            needed: needed_x,
            available: candidates.x_cells.len(),
        });
    }
    if candidates.y_cells.len() < needed_y {
        return Err(DwError::InsufficientCandidates {
            axis: Axis::Y,
            needed: needed_y,
            available: candidates.y_cells.len(),
        });
    }

    let mut rng = DetRng::new(seed, Stream::DwShuffle);
    let mut xs: Vec<(usize, i64)> =
        candidates.x_cells.iter().copied().zip(candidates.x_moves.iter().copied()).collect();
    let mut ys: Vec<(usize, i64)> =
        candidates.y_cells.iter().copied().zip(candidates.y_moves.iter().copied()).collect();
    rng.shuffle(&mut xs);
    rng.shuffle(&mut ys);

    let rh = design.row_height;
    let wm_member = constraints.member_flags(design.cells.len());
    let multi_rects: Vec<_> = design
        .cells
        .iter()
        .filter(|c| c.kind.is_movable() && c.height > rh)
        .map(|c| placement.cell_rect(design, c.id))
        .collect();
    let segmap = build_segments(design, constraints.watermark.as_ref(), &multi_rects);

    let mut itr = placement.clone();
    let mut occ = RowOcc::build(design, &itr);
    let mut consumed = vec![false; design.cells.len()];
    let mut wm_cells = Vec::with_capacity(signature.len());
    let mut x_cursor = 0usize;
    let mut y_cursor = 0usize;
    let mut applied_x = 0usize;
    let mut applied_y = 0usize;

    for &bit in &signature.bits {
        let (pool, cursor, applied, axis, needed) = if bit {
            (&mut xs, &mut x_cursor, &mut applied_x, Axis::X, needed_x)
        } else {
            (&mut ys, &mut y_cursor, &mut applied_y, Axis::Y, needed_y)
        };
        let mut chosen = None;
        while *cursor < pool.len() {
            let (cid, delta) = pool[*cursor];
            *cursor += 1;
            if consumed[cid] {
                continue;
            }
            let (nx, ny) = if bit {
                (itr.xs[cid] + delta, itr.ys[cid])
            } else {
                (itr.xs[cid], itr.ys[cid] + delta)
            };
            // Re-validate against the current intermediate state: earlier
            // moves may have taken the gap this candidate relied on.
            if move_is_free(design, &segmap, &occ, &wm_member, cid, nx, ny) {
                occ.remove(design, &itr, cid);
                itr.xs[cid] = nx;
                itr.ys[cid] = ny;
                occ.insert(design, &itr, cid);
                consumed[cid] = true;
                wm_cells.push(cid);
                *applied += 1;
                chosen = Some(cid);
                break;
            }
        }
        if chosen.is_none() {
            return Err(DwError::InsufficientCandidates { axis, needed, available: *applied });
        }
    }

    debug_assert!(
        check_legal_with(
            design,
            &itr,
            constraints.watermark.as_ref().map(|wm| (&wm.rect, wm.members.as_slice()))
        )
        .is_legal(),
        "intermediate placement must stay legal"
    );

    let itr_positions: Vec<(i64, i64)> = wm_cells.iter().map(|&c| itr.pos(c)).collect();
    let wm_placement = detailed_place(design, &itr, constraints, detailed);
    let dist: Vec<(i64, i64)> = wm_cells
        .iter()
        .zip(&itr_positions)
        .map(|(&c, &(ix, iy))| (ix - wm_placement.xs[c], iy - wm_placement.ys[c]))
        .collect();

    Ok((wm_placement, DwWatermark { cells: wm_cells, itr_positions, dist }))
}

/// Signature moves without the compensating detailed placement; the
/// cell-scattering baseline applies its displacements on the final layout.
pub fn apply_signature_moves(
    design: &Design,
    placement: &Placement,
    constraints: &RegionConstraintSet,
    signature: &Signature,
    candidates: &DwCandidates,
    seed: u64,
) -> Result<(Placement, DwWatermark), DwError> {
    let zero_pass = DetailedParams { passes: 0, reorder_window: 0, slide_to_flat_optimum: false };
    insert_dw(design, placement, constraints, signature, candidates, seed, &zero_pass)
}

pub(crate) fn move_is_free(
    design: &Design,
    segmap: &SegmentMap,
    occ: &RowOcc,
    wm_member: &[bool],
    cid: usize,
    nx: i64,
    ny: i64,
) -> bool {
    let c = &design.cells[cid];
    let Some(row) = design.row_index_of_y(ny) else { return false };
    let Some(sidx) = segmap.containing(row, nx, c.width) else { return false };
    if !allowed_in_segment(c, &segmap.segments[sidx], wm_member) {
        return false;
    }
    let (prev_end, next_start) = occ.gap_around(row, nx, nx + c.width, cid);
    prev_end <= nx && nx + c.width <= next_start
}

/// Exact-displacement extraction: a watermarked cell matches iff its
/// recorded displacement is reproduced exactly in both coordinates.
pub fn extract_dw(placement: &Placement, wm: &DwWatermark) -> f64 {
    if wm.cells.is_empty() {
        return 0.0;
    }
    let mut matched = 0usize;
    for ((&cid, &(ix, iy)), &(dx, dy)) in wm.cells.iter().zip(&wm.itr_positions).zip(&wm.dist) {
        if cid >= placement.len() {
            continue;
        }
        let got = (ix - placement.xs[cid], iy - placement.ys[cid]);
        if got == (dx, dy) {
            matched += 1;
        }
    }
    100.0 * matched as f64 / wm.cells.len() as f64
}
