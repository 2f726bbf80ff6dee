//! Canonical design data model: netlist plus geometry.
//!
//! A `Design` is immutable after construction; every placement stage and
//! watermarking scheme operates on `Placement` vectors indexed by cell id.

use crate::geom::{center2, Rect};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    /// Standard cell, moved by every placement stage.
    Movable,
    /// Fixed macro block.
    Macro,
    /// Fixed IO pad.
    Io,
    /// Buffer cell inserted by a watermarking scheme; movable.
    Buffer,
}

impl CellKind {
    pub fn is_fixed(&self) -> bool {
        matches!(self, CellKind::Macro | CellKind::Io)
    }

    pub fn is_movable(&self) -> bool {
        !self.is_fixed()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub id: usize,
    pub width: i64,
    pub height: i64,
    pub kind: CellKind,
    /// Fence region this cell must stay inside, if any.
    pub region_id: Option<usize>,
    /// Design coordinates for fixed cells (macros, IO); `None` for movables.
    pub fixed_pos: Option<(i64, i64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pin {
    pub cell: usize,
    /// Offset from the cell origin (lower-left corner).
    pub dx: i64,
    pub dy: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Net {
    pub id: usize,
    pub pins: Vec<Pin>,
    /// Sinks of this net are timing endpoints (capture points).
    pub endpoint: bool,
}

impl Net {
    /// Driver convention: first pin drives, the rest sink.
    pub fn driver(&self) -> &Pin {
        &self.pins[0]
    }

    pub fn sinks(&self) -> &[Pin] {
        &self.pins[1..]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub id: usize,
    pub x_lo: i64,
    pub x_hi: i64,
    /// y of the row origin; the row strip is `[y, y + row_height)`.
    pub y: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FenceRegion {
    pub id: usize,
    pub rects: Vec<Rect>,
}

impl FenceRegion {
    pub fn contains_center2(&self, cx2: i64, cy2: i64) -> bool {
        self.rects.iter().any(|r| r.contains_center2(cx2, cy2))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Design {
    pub name: String,
    pub die: Rect,
    pub rows: Vec<Row>,
    pub cells: Vec<Cell>,
    pub nets: Vec<Net>,
    pub fence_regions: Vec<FenceRegion>,
    pub row_height: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Global,
    Legalized,
    Detailed,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Global => "global",
            Stage::Legalized => "legalized",
            Stage::Detailed => "detailed",
        }
    }
}

/// Per-cell coordinates, indexed by cell id. Fixed cells keep their design
/// coordinates through every stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    pub xs: Vec<i64>,
    pub ys: Vec<i64>,
    pub stage: Stage,
}

impl Placement {
    pub fn new(xs: Vec<i64>, ys: Vec<i64>, stage: Stage) -> Self {
        assert_eq!(xs.len(), ys.len());
        Placement { xs, ys, stage }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn pos(&self, cell: usize) -> (i64, i64) {
        (self.xs[cell], self.ys[cell])
    }

    pub fn cell_rect(&self, design: &Design, cell: usize) -> Rect {
        let c = &design.cells[cell];
        Rect {
            x_lo: self.xs[cell],
            y_lo: self.ys[cell],
            x_hi: self.xs[cell] + c.width,
            y_hi: self.ys[cell] + c.height,
        }
    }

    /// Cell center in doubled coordinates.
    pub fn center2(&self, design: &Design, cell: usize) -> (i64, i64) {
        let c = &design.cells[cell];
        center2(self.xs[cell], self.ys[cell], c.width, c.height)
    }

    pub fn with_stage(mut self, stage: Stage) -> Self {
        self.stage = stage;
        self
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DesignError {
    #[error("row {0} lies outside the die")]
    RowOutsideDie(usize),
    #[error("rows {0} and {1} overlap")]
    OverlappingRows(usize, usize),
    #[error("row {0} has height different from design row_height")]
    InconsistentRowHeight(usize),
    #[error("cell {0} has non-positive dimensions")]
    BadCellSize(usize),
    #[error("movable cell {cell} height {height} is not a positive multiple of row_height {row_height}")]
    BadCellHeight { cell: usize, height: i64, row_height: i64 },
    #[error("net {net} pin references missing cell {cell}")]
    DanglingPin { net: usize, cell: usize },
    #[error("net {net} pin offset outside cell {cell} bounding box")]
    PinOffsetOutsideCell { net: usize, cell: usize },
    #[error("net {0} has no pins")]
    EmptyNet(usize),
    #[error("fence region {0} rect outside the die or empty")]
    BadFenceRegion(usize),
    #[error("cell {cell} references missing fence region {region}")]
    DanglingRegion { cell: usize, region: usize },
    #[error("cell ids are not dense 0..n")]
    NonDenseIds,
    #[error("die rectangle is degenerate")]
    BadDie,
    #[error("fixed cell {0} has no design coordinates")]
    FixedWithoutPos(usize),
}

impl Design {
    /// Full invariant audit; run after parsing or generation.
    pub fn validate(&self) -> Result<(), DesignError> {
        if !self.die.is_valid() {
            return Err(DesignError::BadDie);
        }
        for (i, c) in self.cells.iter().enumerate() {
            if c.id != i {
                return Err(DesignError::NonDenseIds);
            }
            if c.width <= 0 || c.height <= 0 {
                return Err(DesignError::BadCellSize(i));
            }
            if c.kind.is_movable()
                && (self.row_height <= 0 || c.height % self.row_height != 0)
            {
                return Err(DesignError::BadCellHeight {
                    cell: i,
                    height: c.height,
                    row_height: self.row_height,
                });
            }
            if let Some(r) = c.region_id {
                if r >= self.fence_regions.len() {
                    return Err(DesignError::DanglingRegion { cell: i, region: r });
                }
            }
            if c.kind.is_fixed() && c.fixed_pos.is_none() {
                return Err(DesignError::FixedWithoutPos(i));
            }
        }
        for row in &self.rows {
            let strip = Rect::new(row.x_lo, row.y, row.x_hi, row.y + self.row_height);
            if !self.die.contains_rect(&strip) {
                return Err(DesignError::RowOutsideDie(row.id));
            }
        }
        let mut sorted: Vec<&Row> = self.rows.iter().collect();
        sorted.sort_by_key(|r| (r.y, r.x_lo));
        for (i, a) in sorted.iter().enumerate() {
            for b in sorted[i + 1..].iter() {
                if b.y - a.y >= self.row_height {
                    break; // strips can no longer intersect vertically
                }
                if b.x_lo < a.x_hi && a.x_lo < b.x_hi {
                    return Err(DesignError::OverlappingRows(a.id, b.id));
                }
            }
        }
        for net in &self.nets {
            if net.pins.is_empty() {
                return Err(DesignError::EmptyNet(net.id));
            }
            for p in &net.pins {
                let Some(cell) = self.cells.get(p.cell) else {
                    return Err(DesignError::DanglingPin { net: net.id, cell: p.cell });
                };
                if p.dx < 0 || p.dx > cell.width || p.dy < 0 || p.dy > cell.height {
                    return Err(DesignError::PinOffsetOutsideCell { net: net.id, cell: p.cell });
                }
            }
        }
        for fr in &self.fence_regions {
            if fr.rects.is_empty() {
                return Err(DesignError::BadFenceRegion(fr.id));
            }
            for r in &fr.rects {
                if !r.is_valid() || !self.die.contains_rect(r) {
                    return Err(DesignError::BadFenceRegion(fr.id));
                }
            }
        }
        Ok(())
    }

    pub fn movable_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.cells.iter().filter(|c| c.kind.is_movable()).map(|c| c.id)
    }

    pub fn movable_count(&self) -> usize {
        self.cells.iter().filter(|c| c.kind.is_movable()).count()
    }

    pub fn movable_area(&self) -> i64 {
        self.cells
            .iter()
            .filter(|c| c.kind.is_movable())
            .map(|c| c.width * c.height)
            .sum()
    }

    /// Row index of a y coordinate, when it is exactly a row origin.
    pub fn row_index_of_y(&self, y: i64) -> Option<usize> {
        if self.rows.is_empty() {
            return None;
        }
        let y0 = self.rows[0].y;
        if (y - y0) % self.row_height != 0 {
            return None;
        }
        let idx = (y - y0) / self.row_height;
        if idx < 0 || idx as usize >= self.rows.len() {
            None
        } else {
            Some(idx as usize)
        }
    }

    /// Number of rows a cell of the given height spans.
    pub fn rows_spanned(&self, height: i64) -> usize {
        (height / self.row_height) as usize
    }

    /// Placement skeleton with fixed cells at their design coordinates and
    /// movable cells at the die origin.
    pub fn seed_placement(&self, stage: Stage) -> Placement {
        let mut xs = vec![self.die.x_lo; self.cells.len()];
        let mut ys = vec![self.die.y_lo; self.cells.len()];
        for c in &self.cells {
            if let Some((x, y)) = c.fixed_pos {
                xs[c.id] = x;
                ys[c.id] = y;
            }
        }
        Placement::new(xs, ys, stage)
    }
}
