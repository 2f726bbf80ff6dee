//! Baseline watermarking schemes with matched insert/extract interfaces:
//! row parity (cells forced onto odd/even rows), cell scattering
//! (displacements applied after detailed placement, no compensation), and a
//! simplified buffer insertion (netlist surgery with 1 or 2 buffers per bit).

use crate::certificate::Scheme;
use crate::design::{Cell, CellKind, Design, Net, Pin, Placement, Stage};
use crate::dw::{
    apply_signature_moves, extract_dw, select_candidates, DwError, DwWatermark, Signature,
};
use crate::placer::{
    allowed_in_segment, build_segments, detailed_place, legalize, DetailedParams, PlaceError,
    RegionConstraintSet, SegmentMap,
};
use crate::rng::{DetRng, Stream};
use crate::timing::{net_slacks, DelayModel, TimingError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("insufficient candidates for {scheme}: need {needed}, have {available}")]
    InsufficientCandidates { scheme: Scheme, needed: usize, available: usize },
    #[error("no net has the required timing margin")]
    NoTimingMargin,
    #[error(transparent)]
    Place(#[from] PlaceError),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Dw(#[from] DwError),
}

/// Evidence payload per scheme; `cells` in [`BaselineWatermark`] lists the
/// watermarked cells in signature-bit order.
#[derive(Debug, Clone, PartialEq)]
pub enum BaselinePayload {
    RowParity { required_odd: Vec<bool> },
    CellScattering { wm: DwWatermark },
    BufferInsertion { chains: Vec<BufferChain> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BufferChain {
    pub driver: usize,
    pub sinks: Vec<usize>,
    pub buffers: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineWatermark {
    pub scheme: Scheme,
    pub cells: Vec<usize>,
    pub payload: BaselinePayload,
}

fn row_index(design: &Design, y: i64) -> i64 {
    (y - design.rows[0].y).div_euclid(design.row_height)
}

/// Occupied intervals per row (movable cells only; fixed geometry is
/// excluded from segments already).
fn row_occupancy(design: &Design, placement: &Placement) -> Vec<Vec<(i64, i64, usize)>> {
    let mut rows = vec![Vec::new(); design.rows.len()];
    for c in design.cells.iter().filter(|c| c.kind.is_movable()) {
        let (x, y) = placement.pos(c.id);
        if let Some(r0) = design.row_index_of_y(y) {
            for k in 0..design.rows_spanned(c.height) {
                if r0 + k < rows.len() {
                    rows[r0 + k].push((x, x + c.width, c.id));
                }
            }
        }
    }
    for r in &mut rows {
        r.sort_unstable();
    }
    rows
}

/// Nearest in-row slot for `cell` in `row` around `desired_x`, or None.
fn nearest_slot(
    design: &Design,
    segmap: &SegmentMap,
    occ: &[Vec<(i64, i64, usize)>],
    cell: usize,
    row: usize,
    desired_x: i64,
) -> Option<i64> {
    let c = &design.cells[cell];
    let mut best: Option<(i64, i64)> = None; // (|dx|, x)
    for &sidx in &segmap.by_row[row] {
        let seg = &segmap.segments[sidx];
        if !allowed_in_segment(c, seg, &[]) || seg.width() < c.width {
            continue;
        }
        // free gaps inside the segment
        let mut cursor = seg.x_lo;
        let mut gaps: Vec<(i64, i64)> = Vec::new();
        for &(lo, hi, id) in &occ[row] {
            if id == cell || hi <= seg.x_lo || lo >= seg.x_hi {
                continue;
            }
            if lo > cursor {
                gaps.push((cursor, lo.min(seg.x_hi)));
            }
            cursor = cursor.max(hi);
        }
        if cursor < seg.x_hi {
            gaps.push((cursor, seg.x_hi));
        }
        for (lo, hi) in gaps {
            if hi - lo < c.width {
                continue;
            }
            let x = desired_x.clamp(lo, hi - c.width);
            let d = (x - desired_x).abs();
            if best.map(|(bd, bx)| (d, x) < (bd, bx)).unwrap_or(true) {
                best = Some((d, x));
            }
        }
    }
    best.map(|(_, x)| x)
}

/// Row parity: each signature bit relocates one cell to a row of the
/// required parity (1 odd, 0 even), into the nearest free legal interval.
/// Legalization and detailed placement follow.
pub fn row_parity_insert(
    design: &Design,
    placement: &Placement,
    signature: &Signature,
    seed: u64,
) -> Result<(Placement, BaselineWatermark), BaselineError> {
    let rh = design.row_height;
    let segmap = build_segments(design, None, &multi_rects(design, placement));
    let mut occ = row_occupancy(design, placement);
    let mut out = placement.clone();

    let mut pool: Vec<usize> = design
        .cells
        .iter()
        .filter(|c| c.kind.is_movable() && c.height == rh)
        .map(|c| c.id)
        .collect();
    let mut rng = DetRng::new(seed, Stream::RowParity);
    rng.shuffle(&mut pool);

    let mut cells = Vec::with_capacity(signature.len());
    let mut required_odd = Vec::with_capacity(signature.len());
    let mut cursor = 0usize;
    for &bit in &signature.bits {
        let mut placed = false;
        while cursor < pool.len() {
            let cid = pool[cursor];
            cursor += 1;
            let (x, y) = out.pos(cid);
            let cur_row = row_index(design, y);
            if (cur_row % 2 != 0) == bit {
                // already on a row of the required parity
                cells.push(cid);
                required_odd.push(bit);
                placed = true;
                break;
            }
            // nearest parity row with a free slot: scan rows by |delta|,
            // breaking distance ties by the nearer slot.
            let mut target: Option<(i64, i64, usize)> = None; // (|dy|+|dx| lexicographic via tuple)
            let mut best_key: Option<(i64, i64)> = None;
            for (ri, r) in design.rows.iter().enumerate() {
                if ((ri as i64) % 2 != 0) != bit {
                    continue;
                }
                let dy = (r.y - y).abs();
                if let Some((bdy, _)) = best_key {
                    if dy > bdy {
                        continue;
                    }
                }
                if let Some(nx) = nearest_slot(design, &segmap, &occ, cid, ri, x) {
                    let key = (dy, (nx - x).abs());
                    if best_key.map(|bk| key < bk).unwrap_or(true) {
                        best_key = Some(key);
                        target = Some((nx, r.y, ri));
                    }
                }
            }
            if let Some((nx, ny, nrow)) = target {
                let old_row = cur_row as usize;
                occ[old_row].retain(|&(_, _, id)| id != cid);
                out.xs[cid] = nx;
                out.ys[cid] = ny;
                let w = design.cells[cid].width;
                let pos = occ[nrow].partition_point(|&(lo, _, _)| lo < nx);
                occ[nrow].insert(pos, (nx, nx + w, cid));
                cells.push(cid);
                required_odd.push(bit);
                placed = true;
                break;
            }
            // no legal slot for this cell; consume the next one
        }
        if !placed {
            return Err(BaselineError::InsufficientCandidates {
                scheme: Scheme::RowParity,
                needed: signature.len(),
                available: cells.len(),
            });
        }
    }

    let constraints = RegionConstraintSet::none();
    let lg = legalize(design, &out.with_stage(Stage::Global), &constraints)?;
    let detailed = detailed_place(design, &lg, &constraints, &DetailedParams::default());
    Ok((
        detailed,
        BaselineWatermark {
            scheme: Scheme::RowParity,
            cells,
            payload: BaselinePayload::RowParity { required_odd },
        },
    ))
}

pub fn row_parity_extract(design: &Design, placement: &Placement, wm: &BaselineWatermark) -> f64 {
    let BaselinePayload::RowParity { required_odd } = &wm.payload else {
        return 0.0;
    };
    if wm.cells.is_empty() {
        return 0.0;
    }
    let mut matched = 0usize;
    for (&cid, &odd) in wm.cells.iter().zip(required_odd) {
        if cid >= placement.len() {
            continue;
        }
        let row = row_index(design, placement.ys[cid]);
        if (row % 2 != 0) == odd {
            matched += 1;
        }
    }
    100.0 * matched as f64 / wm.cells.len() as f64
}

fn multi_rects(design: &Design, placement: &Placement) -> Vec<crate::geom::Rect> {
    design
        .cells
        .iter()
        .filter(|c| c.kind.is_movable() && c.height > design.row_height)
        .map(|c| placement.cell_rect(design, c.id))
        .collect()
}

/// Cell scattering: displacement moves on the final detailed placement with
/// no compensation pass. Bit 1 moves along y, bit 0 along x.
pub fn cell_scattering_insert(
    design: &Design,
    placement: &Placement,
    signature: &Signature,
    seed: u64,
) -> Result<(Placement, BaselineWatermark), BaselineError> {
    let constraints = RegionConstraintSet::none();
    let cands = select_candidates(design, placement, &constraints, 1, design.row_height);
    // The shared insertion loop maps bit 1 to the x pool; scattering maps
    // bit 1 to y, so it runs on the flipped signature.
    let flipped = Signature::from_bits(signature.bits.iter().map(|&b| !b).collect());
    let (moved, wm) =
        apply_signature_moves(design, placement, &constraints, &flipped, &cands, seed).map_err(
            |e| match e {
                DwError::InsufficientCandidates { needed, available, .. } => {
                    BaselineError::InsufficientCandidates {
                        scheme: Scheme::CellScattering,
                        needed,
                        available,
                    }
                }
            },
        )?;
    Ok((
        moved.with_stage(Stage::Detailed),
        BaselineWatermark {
            scheme: Scheme::CellScattering,
            cells: wm.cells.clone(),
            payload: BaselinePayload::CellScattering { wm },
        },
    ))
}

pub fn cell_scattering_extract(placement: &Placement, wm: &BaselineWatermark) -> f64 {
    let BaselinePayload::CellScattering { wm } = &wm.payload else {
        return 0.0;
    };
    extract_dw(placement, wm)
}

#[derive(Debug, Clone)]
pub struct BufferParams {
    /// A net is non-critical when its slack is at least this fraction of
    /// the maximum required arrival time.
    pub margin_frac: f64,
    pub delay_model: DelayModel,
}

/// Buffer insertion: each bit splits one non-critical net through one
/// (bit 1) or two (bit 0) freshly inserted buffer cells placed at the
/// nearest legal free sites. Returns the modified design: the netlist
/// change is the scheme's signature.
pub fn buffer_insertion_insert(
    design: &Design,
    placement: &Placement,
    signature: &Signature,
    seed: u64,
    params: &BufferParams,
) -> Result<(Design, Placement, BaselineWatermark), BaselineError> {
    let slacks = net_slacks(design, placement, &params.delay_model)?;
    let max_rat = match &params.delay_model.endpoint_rats {
        crate::timing::EndpointRats::Uniform(r) => *r,
        crate::timing::EndpointRats::PerEndpoint(v) => {
            v.iter().copied().fold(0.0f64, f64::max)
        }
    };
    let margin = params.margin_frac * max_rat;
    let mut candidates: Vec<usize> = design
        .nets
        .iter()
        .filter(|n| n.pins.len() >= 2)
        .filter(|n| slacks[n.id] >= margin && slacks[n.id].is_finite())
        .map(|n| n.id)
        .collect();
    if candidates.is_empty() {
        return Err(BaselineError::NoTimingMargin);
    }
    if candidates.len() < signature.len() {
        return Err(BaselineError::InsufficientCandidates {
            scheme: Scheme::BufferInsertion,
            needed: signature.len(),
            available: candidates.len(),
        });
    }
    let mut rng = DetRng::new(seed, Stream::BufferInsert);
    rng.shuffle(&mut candidates);

    let mut new_design = design.clone();
    let mut out = placement.clone();
    let segmap = build_segments(design, None, &multi_rects(design, placement));
    let mut occ = row_occupancy(design, placement);
    let mut chains = Vec::with_capacity(signature.len());

    for (i, &bit) in signature.bits.iter().enumerate() {
        let net_id = candidates[i];
        let n_buffers = if bit { 1 } else { 2 };
        let (driver, sinks): (Pin, Vec<Pin>) = {
            let net = &new_design.nets[net_id];
            (*net.driver(), net.sinks().to_vec())
        };
        // place buffers near the net's pin bounding-box center
        let bbox_center = {
            let mut x_lo = i64::MAX;
            let mut x_hi = i64::MIN;
            let mut y_lo = i64::MAX;
            let mut y_hi = i64::MIN;
            for p in new_design.nets[net_id].pins.iter() {
                let px = out.xs[p.cell] + p.dx;
                let py = out.ys[p.cell] + p.dy;
                x_lo = x_lo.min(px);
                x_hi = x_hi.max(px);
                y_lo = y_lo.min(py);
                y_hi = y_hi.max(py);
            }
            ((x_lo + x_hi) / 2, (y_lo + y_hi) / 2)
        };
        let mut buffer_ids = Vec::with_capacity(n_buffers);
        for k in 0..n_buffers {
            let bid = new_design.cells.len();
            let cell = Cell {
                id: bid,
                width: 1,
                height: new_design.row_height,
                kind: CellKind::Buffer,
                region_id: None,
                fixed_pos: None,
            };
            // nearest free site to the bbox center, scanning rows outward
            let desired_x = bbox_center.0 + k as i64; // nudge the second buffer aside
            let desired_row = row_index(design, bbox_center.1)
                .clamp(0, design.rows.len() as i64 - 1) as usize;
            let mut site: Option<(usize, i64)> = None;
            let mut order: Vec<usize> = (0..design.rows.len()).collect();
            order.sort_by_key(|&r| ((r as i64 - desired_row as i64).abs(), r));
            for r in order {
                if let Some(x) = nearest_slot_for_new(&segmap, &occ, 1, r, desired_x) {
                    site = Some((r, x));
                    break;
                }
            }
            let Some((row, x)) = site else {
                return Err(BaselineError::InsufficientCandidates {
                    scheme: Scheme::BufferInsertion,
                    needed: signature.len(),
                    available: chains.len(),
                });
            };
            new_design.cells.push(cell);
            out.xs.push(x);
            out.ys.push(design.rows[row].y);
            let pos = occ[row].partition_point(|&(lo, _, _)| lo < x);
            occ[row].insert(pos, (x, x + 1, bid));
            buffer_ids.push(bid);
        }

        // rewire: driver -> b0 [-> b1] -> sinks
        let endpoint = new_design.nets[net_id].endpoint;
        new_design.nets[net_id].pins = vec![driver, Pin { cell: buffer_ids[0], dx: 0, dy: 0 }];
        new_design.nets[net_id].endpoint = false;
        let mut prev = buffer_ids[0];
        for &b in &buffer_ids[1..] {
            let nid = new_design.nets.len();
            new_design.nets.push(Net {
                id: nid,
                pins: vec![Pin { cell: prev, dx: 0, dy: 0 }, Pin { cell: b, dx: 0, dy: 0 }],
                endpoint: false,
            });
            prev = b;
        }
        let nid = new_design.nets.len();
        let mut final_pins = vec![Pin { cell: prev, dx: 0, dy: 0 }];
        final_pins.extend(sinks.iter().copied());
        new_design.nets.push(Net { id: nid, pins: final_pins, endpoint });

        chains.push(BufferChain {
            driver: driver.cell,
            sinks: sinks.iter().map(|p| p.cell).collect(),
            buffers: buffer_ids,
        });
    }

    let constraints = RegionConstraintSet::none();
    let lg = legalize(&new_design, &out.with_stage(Stage::Global), &constraints)?;
    let detailed = detailed_place(&new_design, &lg, &constraints, &DetailedParams::default());
    let cells: Vec<usize> = chains.iter().flat_map(|c| c.buffers.iter().copied()).collect();
    Ok((
        new_design,
        detailed,
        BaselineWatermark {
            scheme: Scheme::BufferInsertion,
            cells,
            payload: BaselinePayload::BufferInsertion { chains },
        },
    ))
}

/// Variant of `nearest_slot` for a not-yet-inserted cell of given width.
fn nearest_slot_for_new(
    segmap: &SegmentMap,
    occ: &[Vec<(i64, i64, usize)>],
    width: i64,
    row: usize,
    desired_x: i64,
) -> Option<i64> {
    let mut best: Option<(i64, i64)> = None;
    for &sidx in &segmap.by_row[row] {
        let seg = &segmap.segments[sidx];
        if seg.fence.is_some() || seg.inside_wm || seg.width() < width {
            continue; // buffers carry no region membership
        }
        let mut cursor = seg.x_lo;
        let mut gaps: Vec<(i64, i64)> = Vec::new();
        for &(lo, hi, _) in &occ[row] {
            if hi <= seg.x_lo || lo >= seg.x_hi {
                continue;
            }
            if lo > cursor {
                gaps.push((cursor, lo.min(seg.x_hi)));
            }
            cursor = cursor.max(hi);
        }
        if cursor < seg.x_hi {
            gaps.push((cursor, seg.x_hi));
        }
        for (lo, hi) in gaps {
            if hi - lo < width {
                continue;
            }
            let x = desired_x.clamp(lo, hi - width);
            let d = (x - desired_x).abs();
            if best.map(|(bd, bx)| (d, x) < (bd, bx)).unwrap_or(true) {
                best = Some((d, x));
            }
        }
    }
    best.map(|(_, x)| x)
}

/// Extraction audits each recorded buffer chain in the (possibly modified)
/// design: the bit matches iff the chain is still present with the correct
/// length and reaches the recorded sinks.
pub fn buffer_insertion_extract(design: &Design, wm: &BaselineWatermark) -> f64 {
    let BaselinePayload::BufferInsertion { chains } = &wm.payload else {
        return 0.0;
    };
    if chains.is_empty() {
        return 0.0;
    }
    let mut by_driver: std::collections::HashMap<usize, Vec<usize>> = std::collections::HashMap::new();
    for net in &design.nets {
        if !net.pins.is_empty() {
            by_driver.entry(net.driver().cell).or_default().push(net.id);
        }
    }
    let mut matched = 0usize;
    'chains: for chain in chains {
        for &b in &chain.buffers {
            match design.cells.get(b) {
                Some(c) if c.kind == CellKind::Buffer => {}
                _ => continue 'chains,
            }
        }
        // walk driver -> buffers in order, each hop an exclusive 2-pin net
        let mut cur = chain.driver;
        for &b in &chain.buffers {
            let Some(nets) = by_driver.get(&cur) else { continue 'chains };
            let hop = nets.iter().any(|&nid| {
                let net = &design.nets[nid];
                net.pins.len() == 2 && net.sinks().len() == 1 && net.sinks()[0].cell == b
            });
            if !hop {
                continue 'chains;
            }
            cur = b;
        }
        // final hop: last buffer drives exactly the recorded sinks
        let Some(nets) = by_driver.get(&cur) else { continue 'chains };
        let want: std::collections::BTreeSet<usize> = chain.sinks.iter().copied().collect();
        let tail_ok = nets.iter().any(|&nid| {
            let got: std::collections::BTreeSet<usize> =
                design.nets[nid].sinks().iter().map(|p| p.cell).collect();
            got == want
        });
        if tail_ok {
            matched += 1;
        }
    }
    100.0 * matched as f64 / chains.len() as f64
}
