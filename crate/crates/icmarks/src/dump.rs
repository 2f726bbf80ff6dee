//! Canonical design dump: a versioned structured-text snapshot of a
//! `Design`, with a content digest used as the design fingerprint inside
//! watermark certificates.

use crate::design::{Cell, CellKind, Design, FenceRegion, Net, Pin, Row};
use crate::geom::Rect;
use crate::textdoc::{DocError, DocReader, DocWriter};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const DESIGN_DOC_KIND: &str = "icmarks-design";
pub const DESIGN_DOC_VERSION: u32 = 1;

fn kind_str(kind: CellKind) -> &'static str {
    match kind {
        CellKind::Movable => "movable",
        CellKind::Macro => "macro",
        CellKind::Io => "io",
        CellKind::Buffer => "buffer",
    }
}

fn kind_from(s: &str) -> Option<CellKind> {
    match s {
        "movable" => Some(CellKind::Movable),
        "macro" => Some(CellKind::Macro),
        "io" => Some(CellKind::Io),
        "buffer" => Some(CellKind::Buffer),
        _ => None,
    }
}

pub fn to_string(design: &Design) -> String {
    let mut w = DocWriter::new(DESIGN_DOC_KIND, DESIGN_DOC_VERSION);
    w.field("name", &design.name);
    w.list("die", [design.die.x_lo, design.die.y_lo, design.die.x_hi, design.die.y_hi]);
    w.field("rowheight", design.row_height);
    w.field("rows", design.rows.len());
    for r in &design.rows {
        w.list("row", [r.id as i64, r.x_lo, r.x_hi, r.y]);
    }
    w.field("cells", design.cells.len());
    for c in &design.cells {
        let region = c.region_id.map(|r| r.to_string()).unwrap_or_else(|| "-".into());
        let pos = c
            .fixed_pos
            .map(|(x, y)| format!("{x}:{y}"))
            .unwrap_or_else(|| "-".into());
        w.field(
            "cell",
            format!("{} {} {} {} {} {}", c.id, c.width, c.height, kind_str(c.kind), region, pos),
        );
    }
    w.field("nets", design.nets.len());
    for n in &design.nets {
        let pins: Vec<String> =
            n.pins.iter().map(|p| format!("{}:{}:{}", p.cell, p.dx, p.dy)).collect();
        w.field("net", format!("{} {} {}", n.id, n.endpoint as u8, pins.join(" ")));
    }
    w.field("fences", design.fence_regions.len());
    for f in &design.fence_regions {
        let rects: Vec<String> = f
            .rects
            .iter()
            .map(|r| format!("{}:{}:{}:{}", r.x_lo, r.y_lo, r.x_hi, r.y_hi))
            .collect();
        w.field("fence", format!("{} {}", f.id, rects.join(" ")));
    }
    w.finish()
}

pub fn from_str(text: &str) -> Result<Design, DocError> {
    let mut r = DocReader::open(text, DESIGN_DOC_KIND, DESIGN_DOC_VERSION)?;
    let name: String = r.expect("name")?.to_string();
    let die_v = r.expect_list::<i64>("die")?;
    if die_v.len() != 4 {
        return Err(DocError::Corrupt { line: 0, msg: "die needs 4 coordinates".into() });
    }
    let die = Rect { x_lo: die_v[0], y_lo: die_v[1], x_hi: die_v[2], y_hi: die_v[3] };
    let row_height: i64 = r.expect_parse("rowheight")?;

    let n_rows: usize = r.expect_parse("rows")?;
    let mut rows = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let v = r.expect_list::<i64>("row")?;
        if v.len() != 4 {
            return Err(DocError::Corrupt { line: 0, msg: "row needs 4 fields".into() });
        }
        rows.push(Row { id: v[0] as usize, x_lo: v[1], x_hi: v[2], y: v[3] });
    }

    let n_cells: usize = r.expect_parse("cells")?;
    let mut cells = Vec::with_capacity(n_cells);
    for _ in 0..n_cells {
        let raw = r.expect("cell")?;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.len() != 6 {
            return Err(DocError::Corrupt { line: 0, msg: format!("bad cell line `{raw}`") });
        }
        let kind = kind_from(toks[3])
            .ok_or_else(|| DocError::Corrupt { line: 0, msg: format!("bad cell kind `{}`", toks[3]) })?;
        let region_id = if toks[4] == "-" {
            None
        } else {
            Some(toks[4].parse().map_err(|_| DocError::Corrupt {
                line: 0,
                msg: format!("bad region `{}`", toks[4]),
            })?)
        };
        let parse = |s: &str| -> Result<i64, DocError> {
            s.parse().map_err(|_| DocError::Corrupt { line: 0, msg: format!("bad number `{s}`") })
        };
        let fixed_pos = if toks[5] == "-" {
            None
        } else {
            let parts: Vec<&str> = toks[5].split(':').collect();
            if parts.len() != 2 {
                return Err(DocError::Corrupt { line: 0, msg: format!("bad position `{}`", toks[5]) });
            }
            Some((parse(parts[0])?, parse(parts[1])?))
        };
        cells.push(Cell {
            id: parse(toks[0])? as usize,
            width: parse(toks[1])?,
            height: parse(toks[2])?,
            kind,
            region_id,
            fixed_pos,
        });
    }

    let n_nets: usize = r.expect_parse("nets")?;
    let mut nets = Vec::with_capacity(n_nets);
    for _ in 0..n_nets {
        let raw = r.expect("net")?;
        let mut toks = raw.split_whitespace();
        let id: usize = toks
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| DocError::Corrupt { line: 0, msg: format!("bad net line `{raw}`") })?;
        let endpoint = toks.next() == Some("1");
        let mut pins = Vec::new();
        for tok in toks {
            let parts: Vec<&str> = tok.split(':').collect();
            if parts.len() != 3 {
                return Err(DocError::Corrupt { line: 0, msg: format!("bad pin `{tok}`") });
            }
            let p = |s: &str| -> Result<i64, DocError> {
                s.parse().map_err(|_| DocError::Corrupt { line: 0, msg: format!("bad pin `{tok}`") })
            };
            pins.push(Pin { cell: p(parts[0])? as usize, dx: p(parts[1])?, dy: p(parts[2])? });
        }
        nets.push(Net { id, pins, endpoint });
    }

    let n_fences: usize = r.expect_parse("fences")?;
    let mut fence_regions = Vec::with_capacity(n_fences);
    for _ in 0..n_fences {
        let raw = r.expect("fence")?;
        let mut toks = raw.split_whitespace();
        let id: usize = toks
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| DocError::Corrupt { line: 0, msg: format!("bad fence line `{raw}`") })?;
        let mut rects = Vec::new();
        for tok in toks {
            let parts: Vec<i64> = tok
                .split(':')
                .map(|s| s.parse())
                .collect::<Result<_, _>>()
                .map_err(|_| DocError::Corrupt { line: 0, msg: format!("bad fence rect `{tok}`") })?;
            if parts.len() != 4 {
                return Err(DocError::Corrupt { line: 0, msg: format!("bad fence rect `{tok}`") });
            }
            rects.push(Rect { x_lo: parts[0], y_lo: parts[1], x_hi: parts[2], y_hi: parts[3] });
        }
        fence_regions.push(FenceRegion { id, rects });
    }

    if !r.at_end() {
        return Err(DocError::Corrupt { line: 0, msg: "trailing content".into() });
    }
    Ok(Design { name, die, rows, cells, nets, fence_regions, row_height })
}

pub fn save(design: &Design, path: &Path) -> Result<(), DocError> {
    std::fs::write(path, to_string(design))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Design, DocError> {
    let text = std::fs::read_to_string(path)?;
    from_str(&text)
}

/// Content digest of the canonical dump; certificates pin this so that
/// extraction runs against the same design the watermark was built for.
pub fn fingerprint(design: &Design) -> String {
    let mut hasher = Sha256::new();
    hasher.update(to_string(design).as_bytes());
    let out = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in out {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}
