//! Quality and legality measurement: HPWL, wirelength ratio, density
//! rasterization, and the legality audit.

use crate::design::{Design, Placement, Stage};
use crate::geom::Rect;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("baseline wirelength must be positive")]
    InvalidBaseline,
}

/// Half-perimeter wirelength: per net, the half-perimeter of the pin
/// bounding box, summed over all nets. Pin position = cell origin + offset.
pub fn hpwl(design: &Design, placement: &Placement) -> i64 {
    debug_assert_eq!(placement.len(), design.cells.len());
    let mut total = 0;
    for net in &design.nets {
        total += net_hpwl(design, placement, net.id);
    }
    total
}

pub fn net_hpwl(design: &Design, placement: &Placement, net: usize) -> i64 {
    let net = &design.nets[net];
    let mut x_lo = i64::MAX;
    let mut x_hi = i64::MIN;
    let mut y_lo = i64::MAX;
    let mut y_hi = i64::MIN;
    for p in &net.pins {
        let px = placement.xs[p.cell] + p.dx;
        let py = placement.ys[p.cell] + p.dy;
        x_lo = x_lo.min(px);
        x_hi = x_hi.max(px);
        y_lo = y_lo.min(py);
        y_hi = y_hi.max(py);
    }
    (x_hi - x_lo) + (y_hi - y_lo)
}

/// Placement wirelength rate: watermarked HPWL over original HPWL.
pub fn pwlr(wm_hpwl: i64, orig_hpwl: i64) -> Result<f64, MetricsError> {
    if orig_hpwl <= 0 {
        return Err(MetricsError::InvalidBaseline);
    }
    Ok(wm_hpwl as f64 / orig_hpwl as f64)
}

/// Area-weighted rasterization of every cell (fixed and movable) into a
/// `bins_x` by `bins_y` grid over the die. Occupancy is the covered
/// fraction of each bin; overlapping cells can push it past 1.
#[derive(Debug, Clone)]
pub struct DensityGrid {
    pub bins_x: usize,
    pub bins_y: usize,
    /// Row-major, `occupancy[by * bins_x + bx]`.
    pub occupancy: Vec<f64>,
    pub bin_bounds_x: Vec<i64>,
    pub bin_bounds_y: Vec<i64>,
}

impl DensityGrid {
    pub fn at(&self, bx: usize, by: usize) -> f64 {
        self.occupancy[by * self.bins_x + bx]
    }

    pub fn bin_rect(&self, bx: usize, by: usize) -> Rect {
        Rect {
            x_lo: self.bin_bounds_x[bx],
            x_hi: self.bin_bounds_x[bx + 1],
            y_lo: self.bin_bounds_y[by],
            y_hi: self.bin_bounds_y[by + 1],
        }
    }

    /// Total covered area, `sum(occupancy * bin_area)`.
    pub fn total_mass(&self) -> f64 {
        let mut mass = 0.0;
        for by in 0..self.bins_y {
            for bx in 0..self.bins_x {
                mass += self.at(bx, by) * self.bin_rect(bx, by).area() as f64;
            }
        }
        mass
    }
}

/// Integer bin boundaries: `lo + round(i * span / n)`, monotone and exact.
fn bin_bounds(lo: i64, hi: i64, n: usize) -> Vec<i64> {
    let span = (hi - lo) as i128;
    (0..=n).map(|i| lo + ((span * i as i128) / n as i128) as i64).collect()
}

pub fn density_map(design: &Design, placement: &Placement, bins_x: usize, bins_y: usize) -> DensityGrid {
    assert!(bins_x >= 1 && bins_y >= 1);
    let bounds_x = bin_bounds(design.die.x_lo, design.die.x_hi, bins_x);
    let bounds_y = bin_bounds(design.die.y_lo, design.die.y_hi, bins_y);
    let mut grid = DensityGrid {
        bins_x,
        bins_y,
        occupancy: vec![0.0; bins_x * bins_y],
        bin_bounds_x: bounds_x,
        bin_bounds_y: bounds_y,
    };
    for c in &design.cells {
        let rect = placement.cell_rect(design, c.id);
        rasterize(&mut grid, &rect);
    }
    for by in 0..bins_y {
        for bx in 0..bins_x {
            let area = grid.bin_rect(bx, by).area() as f64;
            grid.occupancy[by * bins_x + bx] /= area;
        }
    }
    grid
}

fn bin_range(bounds: &[i64], lo: i64, hi: i64) -> (usize, usize) {
    // First bin whose upper edge exceeds lo, last bin whose lower edge is below hi.
    let n = bounds.len() - 1;
    let first = bounds[1..].partition_point(|&b| b <= lo);
    let last = bounds[..n].partition_point(|&b| b < hi);
    (first.min(n), last.min(n))
}

fn rasterize(grid: &mut DensityGrid, rect: &Rect) {
    let (bx0, bx1) = bin_range(&grid.bin_bounds_x, rect.x_lo, rect.x_hi);
    let (by0, by1) = bin_range(&grid.bin_bounds_y, rect.y_lo, rect.y_hi);
    for by in by0..by1 {
        for bx in bx0..bx1 {
            let overlap = grid.bin_rect(bx, by).intersection_area(rect);
            grid.occupancy[by * grid.bins_x + bx] += overlap as f64;
        }
    }
}

/// Exhaustive legality audit. The placement is legal iff all lists are empty.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LegalityReport {
    /// Overlapping pairs where at least one cell is movable.
    pub overlap_pairs: Vec<(usize, usize)>,
    /// Movable cells whose y is not a row origin or whose x range leaves the row span.
    pub off_row_cells: Vec<usize>,
    /// Cells not fully inside the die.
    pub out_of_die_cells: Vec<usize>,
    /// Fence members placed outside their region, or non-members inside an
    /// active exclusive watermark region.
    pub fence_violations: Vec<usize>,
}

impl LegalityReport {
    pub fn is_legal(&self) -> bool {
        self.overlap_pairs.is_empty()
            && self.off_row_cells.is_empty()
            && self.out_of_die_cells.is_empty()
            && self.fence_violations.is_empty()
    }
}

pub fn check_legal(design: &Design, placement: &Placement) -> LegalityReport {
    check_legal_with(design, placement, None)
}

/// Legality audit with an optional exclusive watermark region: every cell in
/// `members` must have its center inside `region`, every other movable cell
/// must be outside.
pub fn check_legal_with(
    design: &Design,
    placement: &Placement,
    watermark: Option<(&Rect, &[usize])>,
) -> LegalityReport {
    debug_assert!(matches!(placement.stage, Stage::Legalized | Stage::Detailed));
    let mut report = LegalityReport::default();

    // Out-of-die (movable cells; fixed cells sit where the design says).
    for c in &design.cells {
        if c.kind.is_movable() && !design.die.contains_rect(&placement.cell_rect(design, c.id)) {
            report.out_of_die_cells.push(c.id);
        }
    }

    // Row alignment and span containment for movable cells.
    for c in &design.cells {
        if !c.kind.is_movable() {
            continue;
        }
        let (x, y) = placement.pos(c.id);
        let spans = design.rows_spanned(c.height).max(1);
        let mut ok = false;
        if let Some(row0) = design.row_index_of_y(y) {
            if row0 + spans <= design.rows.len() {
                ok = (0..spans).all(|k| {
                    let row = &design.rows[row0 + k];
                    row.y == y + (k as i64) * design.row_height
                        && row.x_lo <= x
                        && x + c.width <= row.x_hi
                });
            }
        }
        if !ok {
            report.off_row_cells.push(c.id);
        }
    }

    // Overlaps: bucket cells by row strip, sweep each strip by x.
    if design.row_height > 0 && !design.rows.is_empty() {
        let y0 = design.rows[0].y;
        let n_strips = design.rows.len();
        let mut strips: Vec<Vec<usize>> = vec![Vec::new(); n_strips];
        for c in &design.cells {
            let rect = placement.cell_rect(design, c.id);
            let lo = ((rect.y_lo - y0).div_euclid(design.row_height)).max(0) as usize;
            let hi = ((rect.y_hi - 1 - y0).div_euclid(design.row_height)).max(0) as usize;
            for s in lo..=hi.min(n_strips.saturating_sub(1)) {
                strips[s].push(c.id);
            }
        }
        let mut seen: std::collections::HashSet<(usize, usize)> = std::collections::HashSet::new();
        for strip in &mut strips {
            strip.sort_by_key(|&id| (placement.xs[id], id));
            for i in 0..strip.len() {
                let a = strip[i];
                let ra = placement.cell_rect(design, a);
                for &b in &strip[i + 1..] {
                    let rb = placement.cell_rect(design, b);
                    if rb.x_lo >= ra.x_hi {
                        break;
                    }
                    if !(design.cells[a].kind.is_movable() || design.cells[b].kind.is_movable()) {
                        continue;
                    }
                    if ra.intersects(&rb) {
                        let key = (a.min(b), a.max(b));
                        if seen.insert(key) {
                            report.overlap_pairs.push(key);
                        }
                    }
                }
            }
        }
        report.overlap_pairs.sort_unstable();
    }

    // Fence membership by cell center.
    for c in &design.cells {
        if let Some(rid) = c.region_id {
            let (cx2, cy2) = placement.center2(design, c.id);
            if !design.fence_regions[rid].contains_center2(cx2, cy2) {
                report.fence_violations.push(c.id);
            }
        }
    }

    // Watermark-region exclusivity, when active.
    if let Some((region, members)) = watermark {
        let member_set: std::collections::HashSet<usize> = members.iter().copied().collect();
        for c in &design.cells {
            if !c.kind.is_movable() {
                continue;
            }
            let (cx2, cy2) = placement.center2(design, c.id);
            let inside = region.contains_center2(cx2, cy2);
            if inside != member_set.contains(&c.id) {
                report.fence_violations.push(c.id);
            }
        }
        report.fence_violations.sort_unstable();
        report.fence_violations.dedup();
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{Cell, CellKind, FenceRegion, Net, Pin, Row};

    fn design_with(cells: Vec<Cell>, nets: Vec<Net>) -> Design {
        Design {
            name: "t".into(),
            die: Rect::new(0, 0, 20, 8),
            rows: (0..4).map(|i| Row { id: i, x_lo: 0, x_hi: 20, y: 2 * i as i64 }).collect(),
            cells,
            nets,
            fence_regions: vec![],
            row_height: 2,
        }
    }

    fn movable(id: usize, w: i64, h: i64) -> Cell {
        Cell { id, width: w, height: h, kind: CellKind::Movable, region_id: None, fixed_pos: None }
    }

    #[test]
    fn hpwl_single_two_pin_net() {
        // pins at (0,0) and (2,3) -> bbox half-perimeter 5
        let d = design_with(
            vec![movable(0, 1, 2), movable(1, 1, 2)],
            vec![Net { id: 0, pins: vec![Pin { cell: 0, dx: 0, dy: 0 }, Pin { cell: 1, dx: 0, dy: 0 }], endpoint: false }],
        );
        let p = Placement::new(vec![0, 2], vec![0, 3], Stage::Global);
        assert_eq!(hpwl(&d, &p), 5);
    }

    #[test]
    fn hpwl_single_pin_net_contributes_zero() {
        let d = design_with(
            vec![movable(0, 1, 2)],
            vec![Net { id: 0, pins: vec![Pin { cell: 0, dx: 0, dy: 0 }], endpoint: false }],
        );
        let p = Placement::new(vec![5], vec![2], Stage::Global);
        assert_eq!(hpwl(&d, &p), 0);
    }

    #[test]
    fn hpwl_sums_per_net_boxes() {
        // {(0,0),(2,3)} -> 5 and {(1,1),(1,4)} -> 3, total 8
        let d = design_with(
            vec![movable(0, 1, 2), movable(1, 1, 2), movable(2, 1, 2), movable(3, 1, 2)],
            vec![
                Net { id: 0, pins: vec![Pin { cell: 0, dx: 0, dy: 0 }, Pin { cell: 1, dx: 0, dy: 0 }], endpoint: false },
                Net { id: 1, pins: vec![Pin { cell: 2, dx: 0, dy: 0 }, Pin { cell: 3, dx: 0, dy: 0 }], endpoint: false },
            ],
        );
        let p = Placement::new(vec![0, 2, 1, 1], vec![0, 3, 1, 4], Stage::Global);
        assert_eq!(hpwl(&d, &p), 8);
    }

    #[test]
    fn pwlr_cases() {
        assert_eq!(pwlr(100, 100).unwrap(), 1.0);
        assert_eq!(pwlr(1005, 1000).unwrap(), 1.005); // the quality threshold
        assert_eq!(pwlr(98, 100).unwrap(), 0.98);
        assert_eq!(pwlr(1, 0), Err(MetricsError::InvalidBaseline));
    }

    #[test]
    fn density_empty_design_is_zero() {
        let d = design_with(vec![], vec![]);
        let p = Placement::new(vec![], vec![], Stage::Global);
        let g = density_map(&d, &p, 4, 4);
        assert!(g.occupancy.iter().all(|&o| o == 0.0));
    }

    #[test]
    fn density_cell_filling_one_bin() {
        // die 20x8, 4x2 bins -> each bin 5x4; a 5x4 cell at (0,0) fills bin (0,0)
        let d = design_with(vec![movable(0, 5, 4)], vec![]);
        let p = Placement::new(vec![0], vec![0], Stage::Global);
        let g = density_map(&d, &p, 4, 2);
        assert_eq!(g.at(0, 0), 1.0);
        assert_eq!(g.occupancy.iter().filter(|&&o| o > 0.0).count(), 1);
    }

    #[test]
    fn density_straddling_cell_prorates() {
        // two bins of area 2 (die 4x1, 2x1 grid); a 2x1 cell centered on the
        // boundary leaves 0.5 occupancy in each bin
        let mut d = design_with(vec![movable(0, 2, 1)], vec![]);
        d.die = Rect::new(0, 0, 4, 1);
        d.rows.clear();
        let p = Placement::new(vec![1], vec![0], Stage::Global);
        let g = density_map(&d, &p, 2, 1);
        assert_eq!(g.at(0, 0), 0.5);
        assert_eq!(g.at(1, 0), 0.5);
    }

    #[test]
    fn density_mass_is_conserved() {
        let d = design_with(vec![movable(0, 3, 2), movable(1, 2, 4), movable(2, 1, 2)], vec![]);
        let p = Placement::new(vec![0, 7, 13], vec![0, 2, 4], Stage::Global);
        let g = density_map(&d, &p, 7, 3);
        let total_cell_area: i64 = d.cells.iter().map(|c| c.width * c.height).sum();
        let rel = (g.total_mass() - total_cell_area as f64).abs() / total_cell_area as f64;
        assert!(rel < 1e-9, "mass {} vs {}", g.total_mass(), total_cell_area);
    }

    #[test]
    fn legal_single_cell_on_row_origin() {
        let d = design_with(vec![movable(0, 2, 2)], vec![]);
        let p = Placement::new(vec![4], vec![2], Stage::Legalized);
        assert!(check_legal(&d, &p).is_legal());
    }

    #[test]
    fn identical_coordinates_are_one_overlap_pair() {
        let d = design_with(vec![movable(0, 2, 2), movable(1, 2, 2)], vec![]);
        let p = Placement::new(vec![4, 4], vec![2, 2], Stage::Legalized);
        let rep = check_legal(&d, &p);
        assert_eq!(rep.overlap_pairs, vec![(0, 1)]);
    }

    #[test]
    fn off_row_and_out_of_die_detected() {
        let d = design_with(vec![movable(0, 2, 2), movable(1, 2, 2)], vec![]);
        let p = Placement::new(vec![4, 19], vec![1, 0], Stage::Legalized);
        let rep = check_legal(&d, &p);
        assert_eq!(rep.off_row_cells, vec![0, 1]); // cell 1 leaves the row span
        assert_eq!(rep.out_of_die_cells, vec![1]);
    }

    #[test]
    fn fence_member_outside_region_flagged() {
        let mut d = design_with(vec![movable(0, 2, 2)], vec![]);
        d.fence_regions = vec![FenceRegion { id: 0, rects: vec![Rect::new(0, 0, 6, 4)] }];
        d.cells[0].region_id = Some(0);
        let p = Placement::new(vec![10], vec![2], Stage::Legalized);
        let rep = check_legal(&d, &p);
        assert_eq!(rep.fence_violations, vec![0]);
        // and inside the region it is clean
        let p2 = Placement::new(vec![2], vec![0], Stage::Legalized);
        assert!(check_legal(&d, &p2).is_legal());
    }

    #[test]
    fn watermark_exclusivity_flags_both_directions() {
        let d = design_with(vec![movable(0, 2, 2), movable(1, 2, 2)], vec![]);
        let region = Rect::new(0, 0, 8, 4);
        // member 0 outside, non-member 1 inside -> both flagged
        let p = Placement::new(vec![10, 2], vec![2, 0], Stage::Legalized);
        let rep = check_legal_with(&d, &p, Some((&region, &[0])));
        assert_eq!(rep.fence_violations, vec![0, 1]);
    }
}
