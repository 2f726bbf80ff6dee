//! Synthetic design generation: deterministic desk-scale stand-ins for
//! benchmark suites, with macros, fence regions, locality-biased nets and a
//! controllable utilization target.

use crate::design::{Cell, CellKind, Design, FenceRegion, Net, Pin, Row};
use crate::geom::Rect;
use crate::rng::{DetRng, Stream};
use thiserror::Error;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_cells: usize,
    pub n_nets: usize,
    pub n_macros: usize,
    pub n_fences: usize,
    /// Movable cell area over free die area, in (0, 0.95].
    pub utilization: f64,
    /// Die width over height.
    pub die_aspect: f64,
    /// Fraction of nets flagged as timing endpoints.
    pub endpoint_frac: f64,
    /// Fraction of double-row-height cells.
    pub tall_frac: f64,
}

impl SynthConfig {
    pub fn new(n_cells: usize, n_nets: usize, utilization: f64) -> Self {
        SynthConfig {
            n_cells,
            n_nets,
            n_macros: 0,
            n_fences: 0,
            utilization,
            die_aspect: 1.0,
            endpoint_frac: 0.1,
            tall_frac: 0.01,
        }
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("infeasible config: {0}")]
    InfeasibleConfig(String),
}

pub const ROW_HEIGHT: i64 = 2;

/// Deterministically generate a design from (config, seed).
pub fn generate_synthetic(cfg: &SynthConfig, seed: u64) -> Result<Design, SynthError> {
    if cfg.n_cells < 1 {
        return Err(SynthError::InfeasibleConfig("need at least one cell".into()));
    }
    if !(cfg.utilization > 0.0 && cfg.utilization <= 0.95) {
        return Err(SynthError::InfeasibleConfig(format!(
            "utilization {} outside (0, 0.95]",
            cfg.utilization
        )));
    }
    if !(cfg.die_aspect > 0.1 && cfg.die_aspect < 10.0) {
        return Err(SynthError::InfeasibleConfig(format!("die aspect {} unusable", cfg.die_aspect)));
    }

    let mut cell_rng = DetRng::new(seed, Stream::SynthCells);
    let mut cells = Vec::with_capacity(cfg.n_cells);
    let mut movable_area: i64 = 0;
    for id in 0..cfg.n_cells {
        let width = cell_rng.range_i64(1, 4);
        let tall = cell_rng.unit_f64() < cfg.tall_frac;
        let height = if tall { 2 * ROW_HEIGHT } else { ROW_HEIGHT };
        movable_area += width * height;
        cells.push(Cell {
            id,
            width,
            height,
            kind: CellKind::Movable,
            region_id: None,
            fixed_pos: None,
        });
    }

    // Macro sizing: each macro takes roughly 2% of the movable area, at
    // least 4 rows tall, before die sizing so the die can absorb them.
    let mut macro_rng = DetRng::new(seed, Stream::SynthMacros);
    let mut macro_dims = Vec::with_capacity(cfg.n_macros);
    let mut macro_area: i64 = 0;
    for _ in 0..cfg.n_macros {
        let target = ((movable_area as f64) * 0.02).max(64.0) as i64;
        let rows_tall = macro_rng.range_i64(4, 8);
        let h = rows_tall * ROW_HEIGHT;
        let w = (target / h).max(4);
        macro_dims.push((w, h));
        macro_area += w * h;
    }

    // Die sizing: free area = movable_area / utilization, plus macro area.
    let free_area = movable_area as f64 / cfg.utilization;
    let total_area = free_area + macro_area as f64;
    let height_f = (total_area / cfg.die_aspect).sqrt();
    let n_rows = ((height_f / ROW_HEIGHT as f64).ceil() as i64).max(
        1 + macro_dims.iter().map(|&(_, h)| h / ROW_HEIGHT).max().unwrap_or(0),
    );
    let die_h = n_rows * ROW_HEIGHT;
    let die_w = ((total_area / die_h as f64).ceil() as i64).max(cells.iter().map(|c| c.width).max().unwrap_or(1));
    let die = Rect::new(0, 0, die_w, die_h);

    let rows: Vec<Row> = (0..n_rows as usize)
        .map(|i| Row { id: i, x_lo: 0, x_hi: die_w, y: (i as i64) * ROW_HEIGHT })
        .collect();

    // Place macros on row-aligned positions, away from the die boundary,
    // rejecting overlaps deterministically.
    let mut macro_rects: Vec<Rect> = Vec::new();
    for &(w, h) in &macro_dims {
        let mut placed = false;
        for _attempt in 0..200 {
            let max_x = die_w - w - 2;
            let max_row = n_rows - h / ROW_HEIGHT - 1;
            if max_x < 2 || max_row < 1 {
                break;
            }
            let x = macro_rng.range_i64(2, max_x);
            let row = macro_rng.range_i64(1, max_row);
            let rect = Rect::new(x, row * ROW_HEIGHT, x + w, row * ROW_HEIGHT + h);
            // keep a one-unit moat so rows are not fully blocked flush
            let moat = Rect::new(rect.x_lo - 1, rect.y_lo - 1, rect.x_hi + 1, rect.y_hi + 1);
            if macro_rects.iter().all(|r| !r.intersects(&moat)) {
                macro_rects.push(rect);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(SynthError::InfeasibleConfig(
                "cannot place macros without overlap at this utilization".into(),
            ));
        }
    }
    for (i, rect) in macro_rects.iter().enumerate() {
        let id = cells.len();
        let _ = i;
        cells.push(Cell {
            id,
            width: rect.width(),
            height: rect.height(),
            kind: CellKind::Macro,
            region_id: None,
            fixed_pos: Some((rect.x_lo, rect.y_lo)),
        });
    }

    // Fence regions: row-aligned rectangles clear of macros, each sized so
    // its members fit at the global utilization.
    let mut fence_rng = DetRng::new(seed, Stream::SynthFences);
    let mut fence_regions = Vec::new();
    let mut fence_member_cursor = 0usize;
    for fid in 0..cfg.n_fences {
        let mut placed = None;
        for _attempt in 0..200 {
            let w = (die_w / 5).max(8);
            let rows_tall = ((n_rows / 5).max(3)).min(n_rows - 2);
            let h = rows_tall * ROW_HEIGHT;
            let x = fence_rng.range_i64(1, (die_w - w - 1).max(1));
            let row = fence_rng.range_i64(1, (n_rows - rows_tall - 1).max(1));
            let rect = Rect::new(x, row * ROW_HEIGHT, x + w, row * ROW_HEIGHT + h);
            if macro_rects.iter().all(|r| !r.intersects(&rect))
                && fence_regions
                    .iter()
                    .all(|f: &FenceRegion| f.rects.iter().all(|r| !r.intersects(&rect)))
            {
                placed = Some(rect);
                break;
            }
        }
        let Some(rect) = placed else {
            return Err(SynthError::InfeasibleConfig("cannot place fence regions".into()));
        };
        // members: fill the fence to ~the global utilization
        let budget = (rect.area() as f64 * cfg.utilization * 0.8) as i64;
        let mut used = 0;
        let mut members = 0usize;
        while fence_member_cursor < cfg.n_cells {
            let c = &mut cells[fence_member_cursor];
            if c.kind == CellKind::Movable && c.height == ROW_HEIGHT {
                if used + c.width * c.height > budget {
                    break;
                }
                c.region_id = Some(fid);
                used += c.width * c.height;
                members += 1;
            }
            fence_member_cursor += 1;
        }
        if members == 0 {
            return Err(SynthError::InfeasibleConfig("fence region has no members".into()));
        }
        fence_regions.push(FenceRegion { id: fid, rects: vec![rect] });
    }

    // Feasibility: movable area must fit in the free area at 95% packing.
    let free = die.area() - macro_area;
    if movable_area as f64 > free as f64 * 0.95 {
        return Err(SynthError::InfeasibleConfig(format!(
            "movable area {movable_area} exceeds 95% of free area {free}"
        )));
    }

    // Locality-biased nets: cells are arranged conceptually in a grid by id;
    // each net picks an anchor and 1..=5 partners within a nearby id window.
    let mut net_rng = DetRng::new(seed, Stream::SynthNets);
    let mut nets = Vec::with_capacity(cfg.n_nets);
    let window = (cfg.n_cells / 20).max(8);
    for id in 0..cfg.n_nets {
        let anchor = net_rng.below(cfg.n_cells as u64) as usize;
        let degree = 2 + net_rng.below(5) as usize; // 2..=6 pins
        let mut pin_cells = vec![anchor];
        let mut guard = 0;
        while pin_cells.len() < degree && guard < 64 {
            guard += 1;
            // mostly local partners, with a global tail so connectivity is
            // not a disjoint union of tight cliques
            let cand = if net_rng.unit_f64() < 0.8 {
                let lo = anchor.saturating_sub(window);
                let hi = (anchor + window).min(cfg.n_cells - 1);
                lo + net_rng.below((hi - lo + 1) as u64) as usize
            } else {
                net_rng.below(cfg.n_cells as u64) as usize
            };
            if !pin_cells.contains(&cand) {
                pin_cells.push(cand);
            }
        }
        if pin_cells.len() < 2 {
            continue;
        }
        // Driver is the lowest cell id; with ids ordered the propagation
        // graph is a DAG by construction.
        pin_cells.sort_unstable();
        let pins = pin_cells
            .iter()
            .map(|&cid| {
                let c = &cells[cid];
                Pin {
                    cell: cid,
                    dx: net_rng.range_i64(0, c.width),
                    dy: net_rng.range_i64(0, c.height),
                }
            })
            .collect();
        nets.push(Net { id, pins, endpoint: net_rng.unit_f64() < cfg.endpoint_frac });
    }
    // Net ids must stay dense after any skips.
    for (i, net) in nets.iter_mut().enumerate() {
        net.id = i;
    }

    let design = Design {
        name: format!("synth{}c-s{}", cfg.n_cells, seed),
        die,
        rows,
        cells,
        nets,
        fence_regions,
        row_height: ROW_HEIGHT,
    };
    design
        .validate()
        .map_err(|e| SynthError::InfeasibleConfig(format!("generated design invalid: {e}")))?;
    Ok(design)
}

/// Measured utilization of a design: movable area over free (non-macro) die area.
pub fn measured_utilization(design: &Design) -> f64 {
    let fixed_area: i64 = design
        .cells
        .iter()
        .filter(|c| c.kind.is_fixed())
        .map(|c| c.width * c.height)
        .sum();
    let free = design.die.area() - fixed_area;
    design.movable_area() as f64 / free as f64
}
