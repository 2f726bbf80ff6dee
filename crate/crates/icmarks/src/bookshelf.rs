//! Bookshelf benchmark ingestion (.aux/.nodes/.nets/.pl/.scl) plus the
//! sidecar fence-region file and `.pl`-style placement dump/load.
//!
//! Supported subset: `NumNodes`/`NumTerminals` node lists with `terminal`
//! markers, `NetDegree` pin lists with center-relative offsets, and
//! horizontal `CoreRow` blocks. Weighted nets and non-horizontal rows are
//! rejected. Fence regions are not part of Bookshelf; they come from a
//! `<stem>.fences` sidecar (`region <id> <x_lo> <y_lo> <x_hi> <y_hi>` and
//! `member <region_id> <cell_name>` lines).
//!
//! All coordinates are converted to integer placement units; pin offsets in
//! the files are relative to the cell center and are rebased to the cell
//! origin on load.

use crate::design::{Cell, CellKind, Design, DesignError, FenceRegion, Net, Pin, Placement, Row, Stage};
use crate::geom::Rect;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("{file}:{line}: syntax error near `{token}`: {msg}")]
    Syntax { file: String, line: usize, token: String, msg: String },
    #[error("{file}:{line}: net pin references unknown cell `{name}`")]
    DanglingPinReference { file: String, line: usize, name: String },
    #[error("rows overlap: {0}")]
    OverlappingRows(String),
    #[error("design invariant violated after parse: {0}")]
    Invalid(DesignError),
    #[error("i/o error reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn read_file(path: &Path) -> Result<String, ParseError> {
    if !path.exists() {
        return Err(ParseError::MissingFile(path.to_path_buf()));
    }
    std::fs::read_to_string(path).map_err(|source| ParseError::Io { path: path.to_path_buf(), source })
}

fn file_label(path: &Path) -> String {
    path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

struct Lines<'a> {
    file: String,
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(file: String, text: &'a str) -> Self {
        Lines { file, iter: text.lines().enumerate() }
    }

    /// Next content line: comments (#) and blanks skipped. 1-based line number.
    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (i, raw) in self.iter.by_ref() {
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') || t.starts_with("UCLA") {
                continue;
            }
            return Some((i + 1, t));
        }
        None
    }

    fn err(&self, line: usize, token: &str, msg: &str) -> ParseError {
        ParseError::Syntax {
            file: self.file.clone(),
            line,
            token: token.to_string(),
            msg: msg.to_string(),
        }
    }
}

/// Parse a fixed-point decimal into integer units, accepting values like
/// `12`, `-3`, `4.0`, `1.5` (the latter only when the doubled value is
/// integral, which covers center-relative pin offsets at half units).
fn parse_units_2x(tok: &str) -> Option<i64> {
    if let Ok(v) = tok.parse::<i64>() {
        return Some(2 * v);
    }
    let f: f64 = tok.parse().ok()?;
    let doubled = f * 2.0;
    if (doubled - doubled.round()).abs() < 1e-6 {
        Some(doubled.round() as i64)
    } else {
        None
    }
}

fn parse_units(tok: &str) -> Option<i64> {
    let d = parse_units_2x(tok)?;
    if d % 2 == 0 {
        Some(d / 2)
    } else {
        None
    }
}

struct RawNode {
    name: String,
    width: i64,
    height: i64,
    terminal: bool,
}

/// Parse an .aux bundle into a `Design`. A `<aux stem>.fences` sidecar is
/// loaded when present.
pub fn parse_bookshelf(aux_path: &Path) -> Result<Design, ParseError> {
    let aux_text = read_file(aux_path)?;
    let mut aux_lines = Lines::new(file_label(aux_path), &aux_text);
    let (line_no, line) = aux_lines
        .next()
        .ok_or_else(|| ParseError::Syntax {
            file: file_label(aux_path),
            line: 1,
            token: String::new(),
            msg: "empty .aux file".into(),
        })?;
    // "RowBasedPlacement : a.nodes a.nets [a.wts] a.pl a.scl"
    let after_colon = line
        .split_once(':')
        .map(|(_, rest)| rest)
        .ok_or_else(|| aux_lines.err(line_no, line, "expected `RowBasedPlacement : <files>`"))?;
    let dir = aux_path.parent().unwrap_or_else(|| Path::new("."));
    let mut nodes_path = None;
    let mut nets_path = None;
    let mut pl_path = None;
    let mut scl_path = None;
    let mut wts_path = None;
    for tok in after_colon.split_whitespace() {
        let p = dir.join(tok);
        match Path::new(tok).extension().and_then(|e| e.to_str()) {
            Some("nodes") => nodes_path = Some(p),
            Some("nets") => nets_path = Some(p),
            Some("pl") => pl_path = Some(p),
            Some("scl") => scl_path = Some(p),
            Some("wts") => wts_path = Some(p),
            _ => return Err(aux_lines.err(line_no, tok, "unrecognized companion file")),
        }
    }
    let nodes_path = nodes_path.ok_or_else(|| aux_lines.err(line_no, line, "no .nodes file listed"))?;
    let nets_path = nets_path.ok_or_else(|| aux_lines.err(line_no, line, "no .nets file listed"))?;
    let pl_path = pl_path.ok_or_else(|| aux_lines.err(line_no, line, "no .pl file listed"))?;
    let scl_path = scl_path.ok_or_else(|| aux_lines.err(line_no, line, "no .scl file listed"))?;

    let (nodes, name_to_id) = parse_nodes(&nodes_path)?;
    if let Some(wts) = wts_path {
        reject_weighted_nets(&wts)?;
    }
    let nets = parse_nets(&nets_path, &name_to_id, &nodes)?;
    let positions = parse_pl(&pl_path, &name_to_id)?;
    let (rows, row_height) = parse_scl(&scl_path)?;

    // Every node needs coordinates; fixed status comes from either the
    // `terminal` marker in .nodes or `/FIXED` in .pl.
    let mut cells = Vec::with_capacity(nodes.len());
    for (id, node) in nodes.iter().enumerate() {
        let Some(&(x, y, pl_fixed)) = positions.get(&id) else {
            return Err(ParseError::Syntax {
                file: file_label(&pl_path),
                line: 0,
                token: node.name.clone(),
                msg: format!("cell `{}` has no coordinates in .pl", node.name),
            });
        };
        let fixed = node.terminal || pl_fixed;
        let kind = if fixed {
            if node.height > row_height {
                CellKind::Macro
            } else {
                CellKind::Io
            }
        } else {
            CellKind::Movable
        };
        cells.push(Cell {
            id,
            width: node.width,
            height: node.height,
            kind,
            region_id: None,
            fixed_pos: if fixed { Some((x, y)) } else { None },
        });
    }

    // Die covers rows and all fixed geometry.
    let mut die = Rect {
        x_lo: i64::MAX,
        y_lo: i64::MAX,
        x_hi: i64::MIN,
        y_hi: i64::MIN,
    };
    for r in &rows {
        die.x_lo = die.x_lo.min(r.x_lo);
        die.x_hi = die.x_hi.max(r.x_hi);
        die.y_lo = die.y_lo.min(r.y);
        die.y_hi = die.y_hi.max(r.y + row_height);
    }
    for c in &cells {
        if let Some((x, y)) = c.fixed_pos {
            die.x_lo = die.x_lo.min(x);
            die.y_lo = die.y_lo.min(y);
            die.x_hi = die.x_hi.max(x + c.width);
            die.y_hi = die.y_hi.max(y + c.height);
        }
    }
    if die.x_lo >= die.x_hi || die.y_lo >= die.y_hi {
        return Err(ParseError::Syntax {
            file: file_label(&scl_path),
            line: 0,
            token: String::new(),
            msg: "no rows or fixed cells to define a die area".into(),
        });
    }

    let name = aux_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "bookshelf".into());
    let mut design = Design {
        name,
        die,
        rows,
        cells,
        nets,
        fence_regions: vec![],
        row_height,
    };

    let sidecar = aux_path.with_extension("fences");
    if sidecar.exists() {
        load_fences(&sidecar, &mut design, &name_to_id)?;
        for fr in &design.fence_regions {
            for r in &fr.rects {
                design.die.x_lo = design.die.x_lo.min(r.x_lo);
                design.die.y_lo = design.die.y_lo.min(r.y_lo);
                design.die.x_hi = design.die.x_hi.max(r.x_hi);
                design.die.y_hi = design.die.y_hi.max(r.y_hi);
            }
        }
    }

    design.validate().map_err(|e| match e {
        DesignError::OverlappingRows(a, b) => ParseError::OverlappingRows(format!("rows {a} and {b}")),
        other => ParseError::Invalid(other),
    })?;
    Ok(design)
}

fn parse_nodes(path: &Path) -> Result<(Vec<RawNode>, HashMap<String, usize>), ParseError> {
    let text = read_file(path)?;
    let mut lines = Lines::new(file_label(path), &text);
    let mut nodes = Vec::new();
    let mut names = HashMap::new();
    while let Some((line_no, line)) = lines.next() {
        if line.starts_with("NumNodes") || line.starts_with("NumTerminals") {
            continue; // counts are advisory; actual entries are authoritative
        }
        let mut toks = line.split_whitespace();
        let name = toks
            .next()
            .ok_or_else(|| lines.err(line_no, line, "expected node name"))?
            .to_string();
        let w_tok = toks.next().ok_or_else(|| lines.err(line_no, line, "expected width"))?;
        let h_tok = toks.next().ok_or_else(|| lines.err(line_no, line, "expected height"))?;
        let width = parse_units(w_tok)
            .ok_or_else(|| lines.err(line_no, w_tok, "node width is not an integral unit count"))?;
        let height = parse_units(h_tok)
            .ok_or_else(|| lines.err(line_no, h_tok, "node height is not an integral unit count"))?;
        let terminal = toks.next().map(|t| t.starts_with("terminal")).unwrap_or(false);
        if names.insert(name.clone(), nodes.len()).is_some() {
            return Err(lines.err(line_no, &name, "duplicate node name"));
        }
        nodes.push(RawNode { name, width, height, terminal });
    }
    Ok((nodes, names))
}

fn reject_weighted_nets(path: &Path) -> Result<(), ParseError> {
    if !path.exists() {
        return Ok(()); // .wts is optional
    }
    let text = read_file(path)?;
    let mut lines = Lines::new(file_label(path), &text);
    while let Some((line_no, line)) = lines.next() {
        let mut toks = line.split_whitespace();
        let (Some(_name), Some(w)) = (toks.next(), toks.next()) else { continue };
        if w.parse::<f64>().map(|v| v != 1.0).unwrap_or(false) {
            return Err(lines.err(line_no, w, "weighted nets are not supported"));
        }
    }
    Ok(())
}

fn parse_nets(
    path: &Path,
    names: &HashMap<String, usize>,
    nodes: &[RawNode],
) -> Result<Vec<Net>, ParseError> {
    let text = read_file(path)?;
    let file = file_label(path);
    let mut lines = Lines::new(file.clone(), &text);
    let mut nets: Vec<Net> = Vec::new();
    let mut current: Option<(usize, usize)> = None; // (expected pins, remaining)
    while let Some((line_no, line)) = lines.next() {
        if line.starts_with("NumNets") || line.starts_with("NumPins") {
            continue;
        }
        if let Some(rest) = line.strip_prefix("NetDegree") {
            if let Some((_, remaining)) = current {
                if remaining > 0 {
                    return Err(lines.err(line_no, line, "previous net is missing pins"));
                }
            }
            let rest = rest.trim_start_matches([' ', ':']).trim();
            let deg_tok = rest.split_whitespace().next().unwrap_or("");
            let degree: usize = deg_tok
                .parse()
                .map_err(|_| lines.err(line_no, deg_tok, "bad net degree"))?;
            if degree == 0 {
                return Err(lines.err(line_no, line, "net with zero pins"));
            }
            nets.push(Net { id: nets.len(), pins: Vec::with_capacity(degree), endpoint: false });
            current = Some((degree, degree));
            continue;
        }
        // pin line: "<cell> <I|O|B> [: dx dy]"
        let Some((_, remaining)) = current.as_mut() else {
            return Err(lines.err(line_no, line, "pin line outside a NetDegree block"));
        };
        if *remaining == 0 {
            return Err(lines.err(line_no, line, "more pins than declared NetDegree"));
        }
        let mut toks = line.split_whitespace();
        let cell_name = toks.next().unwrap_or("");
        let Some(&cell_id) = names.get(cell_name) else {
            return Err(ParseError::DanglingPinReference {
                file,
                line: line_no,
                name: cell_name.to_string(),
            });
        };
        let mut dx2 = 0;
        let mut dy2 = 0;
        let rest: Vec<&str> = toks.collect();
        if let Some(colon) = rest.iter().position(|&t| t == ":") {
            if rest.len() >= colon + 3 {
                dx2 = parse_units_2x(rest[colon + 1])
                    .ok_or_else(|| lines.err(line_no, rest[colon + 1], "bad pin offset"))?;
                dy2 = parse_units_2x(rest[colon + 2])
                    .ok_or_else(|| lines.err(line_no, rest[colon + 2], "bad pin offset"))?;
            }
        }
        // Rebase from cell center to origin: origin offset = center offset + size/2.
        let node = &nodes[cell_id];
        let ox2 = dx2 + node.width;
        let oy2 = dy2 + node.height;
        if ox2 % 2 != 0 || oy2 % 2 != 0 {
            return Err(lines.err(line_no, line, "pin offset not on the unit grid"));
        }
        let net = nets.last_mut().unwrap();
        net.pins.push(Pin { cell: cell_id, dx: ox2 / 2, dy: oy2 / 2 });
        *remaining -= 1;
    }
    if let Some((_, remaining)) = current {
        if remaining > 0 {
            return Err(ParseError::Syntax {
                file: file_label(path),
                line: 0,
                token: String::new(),
                msg: "last net is missing pins".into(),
            });
        }
    }
    Ok(nets)
}

fn parse_pl(
    path: &Path,
    names: &HashMap<String, usize>,
) -> Result<HashMap<usize, (i64, i64, bool)>, ParseError> {
    let text = read_file(path)?;
    let mut lines = Lines::new(file_label(path), &text);
    let mut out = HashMap::new();
    while let Some((line_no, line)) = lines.next() {
        let mut toks = line.split_whitespace();
        let name = toks.next().unwrap_or("");
        let x_tok = toks.next().ok_or_else(|| lines.err(line_no, line, "expected x coordinate"))?;
        let y_tok = toks.next().ok_or_else(|| lines.err(line_no, line, "expected y coordinate"))?;
        let x = parse_units(x_tok).ok_or_else(|| lines.err(line_no, x_tok, "bad x coordinate"))?;
        let y = parse_units(y_tok).ok_or_else(|| lines.err(line_no, y_tok, "bad y coordinate"))?;
        let fixed = line.contains("/FIXED");
        let Some(&id) = names.get(name) else {
            return Err(lines.err(line_no, name, "placement for unknown cell"));
        };
        out.insert(id, (x, y, fixed));
    }
    Ok(out)
}

fn parse_scl(path: &Path) -> Result<(Vec<Row>, i64), ParseError> {
    let text = read_file(path)?;
    let mut lines = Lines::new(file_label(path), &text);
    let mut rows: Vec<Row> = Vec::new();
    let mut row_height = 0;
    while let Some((line_no, line)) = lines.next() {
        let lower = line.to_ascii_lowercase();
        if lower.starts_with("numrows") {
            continue;
        }
        if !lower.starts_with("corerow") {
            return Err(lines.err(line_no, line, "expected CoreRow block"));
        }
        if !lower.contains("horizontal") {
            return Err(lines.err(line_no, line, "only horizontal rows are supported"));
        }
        let mut coordinate = None;
        let mut height = None;
        let mut origin = None;
        let mut num_sites = None;
        let mut site_width = 1;
        loop {
            let Some((inner_no, inner)) = lines.next() else {
                return Err(lines.err(line_no, line, "unterminated CoreRow block"));
            };
            let l = inner.to_ascii_lowercase();
            if l == "end" {
                break;
            }
            let value_of = |s: &str| -> Option<i64> {
                s.split(':').nth(1).map(str::trim).and_then(parse_units)
            };
            if l.starts_with("coordinate") {
                coordinate = value_of(inner);
            } else if l.starts_with("height") {
                height = value_of(inner);
            } else if l.starts_with("sitewidth") {
                site_width = value_of(inner).unwrap_or(1);
            } else if l.starts_with("subroworigin") {
                // "SubrowOrigin : x [Numsites : n]" may share a line
                let mut parts = inner.split(':');
                parts.next();
                if let Some(rest) = parts.next() {
                    origin = rest.split_whitespace().next().and_then(parse_units);
                }
                if let Some(ns) = parts.next() {
                    num_sites = ns.split_whitespace().next().and_then(parse_units);
                }
                if l.contains("numsites") && num_sites.is_none() {
                    return Err(lines.err(inner_no, inner, "bad NumSites"));
                }
            } else if l.starts_with("numsites") {
                num_sites = value_of(inner);
            }
            // Siteorient/Sitesymmetry/Sitespacing are accepted and ignored.
        }
        let (Some(y), Some(h), Some(x_lo), Some(ns)) = (coordinate, height, origin, num_sites) else {
            return Err(lines.err(line_no, line, "CoreRow block missing fields"));
        };
        if row_height == 0 {
            row_height = h;
        } else if row_height != h {
            return Err(lines.err(line_no, line, "rows with differing heights are not supported"));
        }
        rows.push(Row { id: rows.len(), x_lo, x_hi: x_lo + ns * site_width, y });
    }
    if rows.is_empty() {
        return Err(ParseError::Syntax {
            file: file_label(path),
            line: 0,
            token: String::new(),
            msg: "no rows in .scl".into(),
        });
    }
    Ok((rows, row_height))
}

fn load_fences(
    path: &Path,
    design: &mut Design,
    names: &HashMap<String, usize>,
) -> Result<(), ParseError> {
    let text = read_file(path)?;
    let mut lines = Lines::new(file_label(path), &text);
    let mut region_index: HashMap<usize, usize> = HashMap::new();
    while let Some((line_no, line)) = lines.next() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.first().copied() {
            Some("region") if toks.len() == 6 => {
                let nums: Vec<i64> = toks[1..]
                    .iter()
                    .map(|t| parse_units(t).ok_or_else(|| lines.err(line_no, t, "bad region field")))
                    .collect::<Result<_, _>>()?;
                let id = nums[0] as usize;
                let rect = Rect { x_lo: nums[1], y_lo: nums[2], x_hi: nums[3], y_hi: nums[4] };
                match region_index.get(&id) {
                    Some(&slot) => design.fence_regions[slot].rects.push(rect),
                    None => {
                        region_index.insert(id, design.fence_regions.len());
                        design.fence_regions.push(FenceRegion { id, rects: vec![rect] });
                    }
                }
            }
            Some("member") if toks.len() == 3 => {
                let rid: usize = toks[1]
                    .parse()
                    .map_err(|_| lines.err(line_no, toks[1], "bad region id"))?;
                let Some(&slot) = region_index.get(&rid) else {
                    return Err(lines.err(line_no, toks[1], "member references unknown region"));
                };
                let Some(&cell) = names.get(toks[2]) else {
                    return Err(lines.err(line_no, toks[2], "member references unknown cell"));
                };
                design.cells[cell].region_id = Some(slot);
            }
            _ => return Err(lines.err(line_no, line, "expected `region` or `member` line")),
        }
    }
    // Region ids are re-densified to their slot order.
    for (slot, fr) in design.fence_regions.iter_mut().enumerate() {
        fr.id = slot;
    }
    Ok(())
}

/// Write a design back out as a Bookshelf bundle (cells named `o<id>`).
pub fn write_bookshelf(design: &Design, dir: &Path, stem: &str) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut aux = String::new();
    writeln!(
        aux,
        "RowBasedPlacement : {stem}.nodes {stem}.nets {stem}.wts {stem}.pl {stem}.scl"
    )
    .unwrap();
    std::fs::write(dir.join(format!("{stem}.aux")), aux)?;

    let mut nodes = String::from("UCLA nodes 1.0\n");
    let n_term = design.cells.iter().filter(|c| c.kind.is_fixed()).count();
    writeln!(nodes, "NumNodes : {}", design.cells.len()).unwrap();
    writeln!(nodes, "NumTerminals : {}", n_term).unwrap();
    for c in &design.cells {
        if c.kind.is_fixed() {
            writeln!(nodes, "o{} {} {} terminal", c.id, c.width, c.height).unwrap();
        } else {
            writeln!(nodes, "o{} {} {}", c.id, c.width, c.height).unwrap();
        }
    }
    std::fs::write(dir.join(format!("{stem}.nodes")), nodes)?;

    let mut nets = String::from("UCLA nets 1.0\n");
    let n_pins: usize = design.nets.iter().map(|n| n.pins.len()).sum();
    writeln!(nets, "NumNets : {}", design.nets.len()).unwrap();
    writeln!(nets, "NumPins : {}", n_pins).unwrap();
    for net in &design.nets {
        writeln!(nets, "NetDegree : {} n{}", net.pins.len(), net.id).unwrap();
        for (k, p) in net.pins.iter().enumerate() {
            let dir_tag = if k == 0 { "O" } else { "I" };
            let c = &design.cells[p.cell];
            // origin-relative -> center-relative, emitted at half-unit
            // precision (exactly representable, so this round-trips)
            let dx2 = 2 * p.dx - c.width;
            let dy2 = 2 * p.dy - c.height;
            let fmt = |v2: i64| format!("{}", v2 as f64 / 2.0);
            writeln!(nets, "o{} {} : {} {}", p.cell, dir_tag, fmt(dx2), fmt(dy2)).unwrap();
        }
    }
    std::fs::write(dir.join(format!("{stem}.nets")), nets)?;

    let mut wts = String::from("UCLA wts 1.0\n");
    for net in &design.nets {
        writeln!(wts, "n{} 1", net.id).unwrap();
    }
    std::fs::write(dir.join(format!("{stem}.wts")), wts)?;

    let pl = pl_to_string(design, &design.seed_placement(Stage::Global));
    std::fs::write(dir.join(format!("{stem}.pl")), pl)?;

    let mut scl = String::from("UCLA scl 1.0\n");
    writeln!(scl, "NumRows : {}", design.rows.len()).unwrap();
    for r in &design.rows {
        writeln!(scl, "CoreRow Horizontal").unwrap();
        writeln!(scl, "  Coordinate : {}", r.y).unwrap();
        writeln!(scl, "  Height : {}", design.row_height).unwrap();
        writeln!(scl, "  Sitewidth : 1").unwrap();
        writeln!(scl, "  Sitespacing : 1").unwrap();
        writeln!(scl, "  Siteorient : N").unwrap();
        writeln!(scl, "  Sitesymmetry : Y").unwrap();
        writeln!(scl, "  SubrowOrigin : {} Numsites : {}", r.x_lo, r.x_hi - r.x_lo).unwrap();
        writeln!(scl, "End").unwrap();
    }
    std::fs::write(dir.join(format!("{stem}.scl")), scl)?;

    if !design.fence_regions.is_empty() {
        let mut fences = String::new();
        for fr in &design.fence_regions {
            for rect in &fr.rects {
                writeln!(fences, "region {} {} {} {} {}", fr.id, rect.x_lo, rect.y_lo, rect.x_hi, rect.y_hi)
                    .unwrap();
            }
        }
        for c in &design.cells {
            if let Some(r) = c.region_id {
                writeln!(fences, "member {} o{}", r, c.id).unwrap();
            }
        }
        std::fs::write(dir.join(format!("{stem}.fences")), fences)?;
    }
    Ok(())
}

/// `.pl`-style placement dump: `o<id> <x> <y> : N [/FIXED]`.
pub fn pl_to_string(design: &Design, placement: &Placement) -> String {
    let mut out = String::from("UCLA pl 1.0\n");
    for c in &design.cells {
        let (x, y) = placement.pos(c.id);
        if c.kind.is_fixed() {
            writeln!(out, "o{} {} {} : N /FIXED", c.id, x, y).unwrap();
        } else {
            writeln!(out, "o{} {} {} : N", c.id, x, y).unwrap();
        }
    }
    out
}

pub fn write_pl(design: &Design, placement: &Placement, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, pl_to_string(design, placement))
}

/// Load a `.pl` written by [`write_pl`] back into a placement with the given
/// stage tag. Cells are matched by their `o<id>` names.
pub fn read_pl(design: &Design, path: &Path, stage: Stage) -> Result<Placement, ParseError> {
    let text = read_file(path)?;
    let mut lines = Lines::new(file_label(path), &text);
    let mut placement = design.seed_placement(stage);
    let mut seen = vec![false; design.cells.len()];
    while let Some((line_no, line)) = lines.next() {
        let mut toks = line.split_whitespace();
        let name = toks.next().unwrap_or("");
        let id: usize = name
            .strip_prefix('o')
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| lines.err(line_no, name, "expected cell name `o<id>`"))?;
        if id >= design.cells.len() {
            return Err(lines.err(line_no, name, "cell id out of range for this design"));
        }
        let x_tok = toks.next().ok_or_else(|| lines.err(line_no, line, "expected x"))?;
        let y_tok = toks.next().ok_or_else(|| lines.err(line_no, line, "expected y"))?;
        let x = parse_units(x_tok).ok_or_else(|| lines.err(line_no, x_tok, "bad x"))?;
        let y = parse_units(y_tok).ok_or_else(|| lines.err(line_no, y_tok, "bad y"))?;
        placement.xs[id] = x;
        placement.ys[id] = y;
        seen[id] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(ParseError::Syntax {
            file: file_label(path),
            line: 0,
            token: format!("o{missing}"),
            msg: "placement file does not cover every cell".into(),
        });
    }
    Ok(placement)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write_fixture(dir: &Path) {
        // 4 cells (one terminal macro), 2 nets, 2 rows.
        fs::write(
            dir.join("toy.aux"),
            "RowBasedPlacement : toy.nodes toy.nets toy.wts toy.pl toy.scl\n",
        )
        .unwrap();
        fs::write(
            dir.join("toy.nodes"),
            "UCLA nodes 1.0\nNumNodes : 4\nNumTerminals : 1\n\
             a 2 2\nb 2 2\nc 2 2\nm 4 4 terminal\n",
        )
        .unwrap();
        fs::write(
            dir.join("toy.nets"),
            "UCLA nets 1.0\nNumNets : 2\nNumPins : 4\n\
             NetDegree : 2 n0\n a O : 0 0\n b I : 0 0\n\
             NetDegree : 2 n1\n b O : 0 0\n c I : 0 0\n",
        )
        .unwrap();
        fs::write(
            dir.join("toy.pl"),
            "UCLA pl 1.0\na 0 0 : N\nb 2 0 : N\nc 4 0 : N\nm 10 0 : N /FIXED\n",
        )
        .unwrap();
        fs::write(
            dir.join("toy.scl"),
            "UCLA scl 1.0\nNumRows : 2\n\
             CoreRow Horizontal\n Coordinate : 0\n Height : 2\n Sitewidth : 1\n Sitespacing : 1\n\
             Siteorient : N\n Sitesymmetry : Y\n SubrowOrigin : 0 Numsites : 16\nEnd\n\
             CoreRow Horizontal\n Coordinate : 2\n Height : 2\n Sitewidth : 1\n Sitespacing : 1\n\
             Siteorient : N\n Sitesymmetry : Y\n SubrowOrigin : 0 Numsites : 16\nEnd\n",
        )
        .unwrap();
    }

    #[test]
    fn toy_bundle_parses_with_counts() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        let design = parse_bookshelf(&dir.path().join("toy.aux")).unwrap();
        assert_eq!(design.cells.len(), 4);
        assert_eq!(design.nets.len(), 2);
        assert_eq!(design.rows.len(), 2);
        assert_eq!(design.row_height, 2);
        assert_eq!(design.cells[3].kind, CellKind::Macro);
        assert_eq!(design.cells[3].fixed_pos, Some((10, 0)));
        // pin offsets were rebased from center to origin
        assert_eq!(design.nets[0].pins[0].dx, 1);
        assert_eq!(design.nets[0].pins[0].dy, 1);
    }

    #[test]
    fn missing_pl_coordinates_is_syntax_error_naming_the_cell() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        fs::write(dir.path().join("toy.pl"), "UCLA pl 1.0\na 0 0 : N\nb 2 0 : N\nm 10 0 : N /FIXED\n")
            .unwrap();
        match parse_bookshelf(&dir.path().join("toy.aux")) {
            Err(ParseError::Syntax { token, .. }) => assert_eq!(token, "c"),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn empty_nets_file_parses_to_zero_nets() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        fs::write(dir.path().join("toy.nets"), "").unwrap();
        let design = parse_bookshelf(&dir.path().join("toy.aux")).unwrap();
        assert_eq!(design.nets.len(), 0);
    }

    #[test]
    fn missing_companion_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        fs::remove_file(dir.path().join("toy.scl")).unwrap();
        assert!(matches!(
            parse_bookshelf(&dir.path().join("toy.aux")),
            Err(ParseError::MissingFile(_))
        ));
    }

    #[test]
    fn dangling_net_pin_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        fs::write(
            dir.path().join("toy.nets"),
            "UCLA nets 1.0\nNumNets : 1\nNumPins : 2\nNetDegree : 2 n0\n a O : 0 0\n zz I : 0 0\n",
        )
        .unwrap();
        assert!(matches!(
            parse_bookshelf(&dir.path().join("toy.aux")),
            Err(ParseError::DanglingPinReference { .. })
        ));
    }

    #[test]
    fn weighted_nets_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        fs::write(dir.path().join("toy.wts"), "UCLA wts 1.0\nn0 3\n").unwrap();
        assert!(matches!(
            parse_bookshelf(&dir.path().join("toy.aux")),
            Err(ParseError::Syntax { .. })
        ));
    }

    #[test]
    fn sidecar_fences_attach_members() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        fs::write(dir.path().join("toy.fences"), "region 0 0 0 6 4\nmember 0 a\nmember 0 b\n").unwrap();
        let design = parse_bookshelf(&dir.path().join("toy.aux")).unwrap();
        assert_eq!(design.fence_regions.len(), 1);
        assert_eq!(design.cells[0].region_id, Some(0));
        assert_eq!(design.cells[1].region_id, Some(0));
        assert_eq!(design.cells[2].region_id, None);
    }

    #[test]
    fn bookshelf_write_reparses_to_identical_design() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        fs::write(dir.path().join("toy.fences"), "region 0 0 0 6 4\nmember 0 a\n").unwrap();
        let design = parse_bookshelf(&dir.path().join("toy.aux")).unwrap();
        let out = tempfile::tempdir().unwrap();
        write_bookshelf(&design, out.path(), "rt").unwrap();
        let back = parse_bookshelf(&out.path().join("rt.aux")).unwrap();
        let mut design_renamed = design.clone();
        design_renamed.name = "rt".into();
        assert_eq!(design_renamed, back);
    }

    #[test]
    fn pl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        let design = parse_bookshelf(&dir.path().join("toy.aux")).unwrap();
        let mut placement = design.seed_placement(Stage::Legalized);
        placement.xs[0] = 6;
        placement.ys[0] = 2;
        let pl_path = dir.path().join("out.pl");
        write_pl(&design, &placement, &pl_path).unwrap();
        let back = read_pl(&design, &pl_path, Stage::Legalized).unwrap();
        assert_eq!(placement, back);
    }
}
