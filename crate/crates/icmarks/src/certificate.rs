//! Watermark certificates: the persisted secret a design owner needs to
//! extract a watermark and prove ownership. Versioned structured-text
//! documents with canonical field order and a design content digest.

use crate::baselines::{BaselinePayload, BaselineWatermark, BufferChain};
use crate::design::Design;
use crate::dump;
use crate::dw::{DwWatermark, Signature};
use crate::geom::Rect;
use crate::gw::{GwParams, GwWatermark};
use crate::textdoc::{DocError, DocReader, DocWriter};
use std::fmt;
use std::path::Path;
use thiserror::Error;

pub const CERT_DOC_KIND: &str = "icmarks-cert";
pub const CERT_DOC_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Gw,
    Dw,
    Icmarks,
    RowParity,
    CellScattering,
    BufferInsertion,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Gw => "gw",
            Scheme::Dw => "dw",
            Scheme::Icmarks => "icmarks",
            Scheme::RowParity => "row_parity",
            Scheme::CellScattering => "cell_scattering",
            Scheme::BufferInsertion => "buffer_insertion",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gw" => Some(Scheme::Gw),
            "dw" => Some(Scheme::Dw),
            "icmarks" => Some(Scheme::Icmarks),
            "row_parity" => Some(Scheme::RowParity),
            "cell_scattering" => Some(Scheme::CellScattering),
            "buffer_insertion" => Some(Scheme::BufferInsertion),
            _ => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum CertError {
    #[error("unsupported certificate version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt certificate: {0}")]
    CorruptDocument(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<DocError> for CertError {
    fn from(e: DocError) -> Self {
        match e {
            DocError::VersionMismatch { found, expected, .. } => {
                CertError::VersionMismatch { found, expected }
            }
            DocError::Corrupt { line, msg } => {
                CertError::CorruptDocument(format!("line {line}: {msg}"))
            }
            DocError::Io(e) => CertError::Io(e),
        }
    }
}

/// Everything extraction needs, for any scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub scheme: Scheme,
    pub seed: u64,
    pub signature: Option<Signature>,
    /// Content digest of the canonical dump of the design this certificate
    /// belongs to (for buffer insertion, the modified design).
    pub fingerprint: String,
    pub gw: Option<GwWatermark>,
    pub dw: Option<DwWatermark>,
    /// Displacement units used by the DW block.
    pub dw_units: Option<(i64, i64)>,
    pub baseline: Option<BaselineWatermark>,
}

impl Certificate {
    pub fn matches_design(&self, design: &Design) -> bool {
        self.fingerprint == dump::fingerprint(design)
    }
}

fn fmt_pairs(pairs: &[(i64, i64)]) -> Vec<String> {
    pairs.iter().map(|(a, b)| format!("{a}:{b}")).collect()
}

fn parse_pairs(raw: &str) -> Result<Vec<(i64, i64)>, CertError> {
    raw.split_whitespace()
        .map(|tok| {
            let (a, b) = tok
                .split_once(':')
                .ok_or_else(|| CertError::CorruptDocument(format!("bad pair `{tok}`")))?;
            let pa = a
                .parse()
                .map_err(|_| CertError::CorruptDocument(format!("bad pair `{tok}`")))?;
            let pb = b
                .parse()
                .map_err(|_| CertError::CorruptDocument(format!("bad pair `{tok}`")))?;
            Ok((pa, pb))
        })
        .collect()
}

pub fn to_string(cert: &Certificate) -> String {
    let mut w = DocWriter::new(CERT_DOC_KIND, CERT_DOC_VERSION);
    w.field("scheme", cert.scheme);
    w.field("fingerprint", &cert.fingerprint);
    w.field("seed", cert.seed);
    match &cert.signature {
        Some(sig) => w.field("signature", sig),
        None => w.field("signature", "-"),
    };
    if let Some(gw) = &cert.gw {
        w.section("gw");
        w.list("region", [gw.region.x_lo, gw.region.y_lo, gw.region.x_hi, gw.region.y_hi]);
        w.field("score", gw.score);
        w.list("window", [gw.params.window_w, gw.params.window_h, gw.params.stride]);
        w.field(
            "weights",
            format!("{} {} {}", gw.params.alpha, gw.params.beta, gw.params.gamma),
        );
        w.field("bits", gw.params.signature_bits);
        w.list("cells", gw.cells.iter());
    }
    if let Some(dw) = &cert.dw {
        w.section("dw");
        let (dx, dy) = cert.dw_units.unwrap_or((1, 1));
        w.list("units", [dx, dy]);
        w.list("cells", dw.cells.iter());
        w.list("itr", fmt_pairs(&dw.itr_positions));
        w.list("dist", fmt_pairs(&dw.dist));
    }
    if let Some(base) = &cert.baseline {
        w.section("baseline");
        match &base.payload {
            BaselinePayload::RowParity { required_odd } => {
                w.field("kind", "row_parity");
                w.list("cells", base.cells.iter());
                w.list("parity", required_odd.iter().map(|&b| b as u8));
            }
            BaselinePayload::CellScattering { wm } => {
                w.field("kind", "cell_scattering");
                w.list("cells", wm.cells.iter());
                w.list("itr", fmt_pairs(&wm.itr_positions));
                w.list("dist", fmt_pairs(&wm.dist));
            }
            BaselinePayload::BufferInsertion { chains } => {
                w.field("kind", "buffer_insertion");
                w.field("chains", chains.len());
                for ch in chains {
                    let sinks: Vec<String> = ch.sinks.iter().map(|s| s.to_string()).collect();
                    let buffers: Vec<String> = ch.buffers.iter().map(|b| b.to_string()).collect();
                    w.field(
                        "chain",
                        format!("{} {} {}", ch.driver, sinks.join(","), buffers.join(",")),
                    );
                }
            }
        }
    }
    w.finish()
}

pub fn from_str(text: &str) -> Result<Certificate, CertError> {
    let mut r = DocReader::open(text, CERT_DOC_KIND, CERT_DOC_VERSION)?;
    let scheme_raw = r.expect("scheme")?;
    let scheme = Scheme::parse(scheme_raw)
        .ok_or_else(|| CertError::CorruptDocument(format!("unknown scheme `{scheme_raw}`")))?;
    let fingerprint = r.expect("fingerprint")?.to_string();
    let seed: u64 = r.expect_parse("seed")?;
    let sig_raw = r.expect("signature")?;
    let signature = if sig_raw == "-" {
        None
    } else {
        Some(Signature::parse(sig_raw).map_err(CertError::CorruptDocument)?)
    };

    let mut gw = None;
    let mut dw = None;
    let mut dw_units = None;
    let mut baseline = None;

    if r.at_section("gw") {
        r.expect_section("gw")?;
        let reg = r.expect_list::<i64>("region")?;
        if reg.len() != 4 {
            return Err(CertError::CorruptDocument("region needs 4 coordinates".into()));
        }
        let score: f64 = r.expect_parse("score")?;
        let win = r.expect_list::<i64>("window")?;
        if win.len() != 3 {
            return Err(CertError::CorruptDocument("window needs w h stride".into()));
        }
        let weights = r.expect_list::<f64>("weights")?;
        if weights.len() != 3 {
            return Err(CertError::CorruptDocument("weights needs alpha beta gamma".into()));
        }
        let bits: usize = r.expect_parse("bits")?;
        let cells = r.expect_list::<usize>("cells")?;
        gw = Some(GwWatermark {
            region: Rect { x_lo: reg[0], y_lo: reg[1], x_hi: reg[2], y_hi: reg[3] },
            cells,
            score,
            params: GwParams {
                window_w: win[0],
                window_h: win[1],
                stride: win[2],
                alpha: weights[0],
                beta: weights[1],
                gamma: weights[2],
                signature_bits: bits,
            },
        });
    }
    if r.at_section("dw") {
        r.expect_section("dw")?;
        let units = r.expect_list::<i64>("units")?;
        if units.len() != 2 {
            return Err(CertError::CorruptDocument("units needs dx dy".into()));
        }
        dw_units = Some((units[0], units[1]));
        let cells = r.expect_list::<usize>("cells")?;
        let itr_positions = parse_pairs(r.expect("itr")?)?;
        let dist = parse_pairs(r.expect("dist")?)?;
        if itr_positions.len() != cells.len() || dist.len() != cells.len() {
            return Err(CertError::CorruptDocument("dw block lists disagree in length".into()));
        }
        dw = Some(DwWatermark { cells, itr_positions, dist });
    }
    if r.at_section("baseline") {
        r.expect_section("baseline")?;
        let kind = r.expect("kind")?;
        match kind {
            "row_parity" => {
                let cells = r.expect_list::<usize>("cells")?;
                let parity = r.expect_list::<u8>("parity")?;
                if parity.len() != cells.len() {
                    return Err(CertError::CorruptDocument("parity list length mismatch".into()));
                }
                baseline = Some(BaselineWatermark {
                    scheme: Scheme::RowParity,
                    cells,
                    payload: BaselinePayload::RowParity {
                        required_odd: parity.into_iter().map(|b| b != 0).collect(),
                    },
                });
            }
            "cell_scattering" => {
                let cells = r.expect_list::<usize>("cells")?;
                let itr_positions = parse_pairs(r.expect("itr")?)?;
                let dist = parse_pairs(r.expect("dist")?)?;
                if itr_positions.len() != cells.len() || dist.len() != cells.len() {
                    return Err(CertError::CorruptDocument("scatter lists disagree".into()));
                }
                baseline = Some(BaselineWatermark {
                    scheme: Scheme::CellScattering,
                    cells: cells.clone(),
                    payload: BaselinePayload::CellScattering {
                        wm: DwWatermark { cells, itr_positions, dist },
                    },
                });
            }
            "buffer_insertion" => {
                let n: usize = r.expect_parse("chains")?;
                let mut chains = Vec::with_capacity(n);
                for _ in 0..n {
                    let raw = r.expect("chain")?;
                    let toks: Vec<&str> = raw.split_whitespace().collect();
                    if toks.len() != 3 {
                        return Err(CertError::CorruptDocument(format!("bad chain `{raw}`")));
                    }
                    let parse_list = |s: &str| -> Result<Vec<usize>, CertError> {
                        if s.is_empty() {
                            return Ok(vec![]);
                        }
                        s.split(',')
                            .map(|t| {
                                t.parse().map_err(|_| {
                                    CertError::CorruptDocument(format!("bad chain id `{t}`"))
                                })
                            })
                            .collect()
                    };
                    chains.push(BufferChain {
                        driver: toks[0]
                            .parse()
                            .map_err(|_| CertError::CorruptDocument("bad driver id".into()))?,
                        sinks: parse_list(toks[1])?,
                        buffers: parse_list(toks[2])?,
                    });
                }
                let cells = chains.iter().flat_map(|c| c.buffers.iter().copied()).collect();
                baseline = Some(BaselineWatermark {
                    scheme: Scheme::BufferInsertion,
                    cells,
                    payload: BaselinePayload::BufferInsertion { chains },
                });
            }
            other => {
                return Err(CertError::CorruptDocument(format!("unknown baseline kind `{other}`")))
            }
        }
    }
    if !r.at_end() {
        return Err(CertError::CorruptDocument("trailing content".into()));
    }
    Ok(Certificate { scheme, seed, signature, fingerprint, gw, dw, dw_units, baseline })
}

pub fn save_certificate(cert: &Certificate, path: &Path) -> Result<(), CertError> {
    std::fs::write(path, to_string(cert))?;
    Ok(())
}

pub fn load_certificate(path: &Path) -> Result<Certificate, CertError> {
    let text = std::fs::read_to_string(path)?;
    from_str(&text)
}
