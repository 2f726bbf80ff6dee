//! The combined two-level scheme: global watermarking during placement,
//! detailed watermarking restricted to the watermark region before detailed
//! placement, combined extraction, and certificate assembly.

use crate::certificate::{Certificate, Scheme};
use crate::design::{Design, Placement};
use crate::dump;
use crate::dw::{self, DwError, Signature};
use crate::gw::{self, GwError, GwParams};
use crate::placer::{
    global_place, global_place_from, legalize, place_pipeline, PipelineResult, PlaceError,
    PlaceParams, RegionConstraintSet,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IcmarksError {
    #[error("certificate fingerprint does not match the design")]
    FingerprintMismatch,
    #[error("certificate is missing its {0} block")]
    MissingBlock(&'static str),
    #[error(transparent)]
    Gw(#[from] GwError),
    #[error(transparent)]
    Dw(#[from] DwError),
}

impl From<PlaceError> for IcmarksError {
    fn from(e: PlaceError) -> Self {
        IcmarksError::Gw(GwError::Place(e))
    }
}

/// Displacement units for the detailed-watermarking step.
#[derive(Debug, Clone, Copy)]
pub struct DwParams {
    pub d_x: i64,
    pub d_y: i64,
}

impl DwParams {
    /// Defaults: one unit along x, one row height along y.
    pub fn for_design(design: &Design) -> Self {
        DwParams { d_x: 1, d_y: design.row_height }
    }
}

#[derive(Debug, Clone)]
pub struct IcmarksInsertion {
    pub placement: Placement,
    pub certificate: Certificate,
    /// The same-seed non-watermarked pipeline this insertion is judged against.
    pub original: PipelineResult,
    pub hpwl: i64,
}

/// Combined insertion: region selection on the seeded original placement,
/// global placement and legalization under the region constraint, signature
/// displacement restricted to the region's cells, then detailed placement.
pub fn insert_icmarks(
    design: &Design,
    signature: &Signature,
    gw_params: &GwParams,
    dw_params: &DwParams,
    place_params: &PlaceParams,
    seed: u64,
) -> Result<IcmarksInsertion, IcmarksError> {
    gw_params.validate(design)?;
    let place_params = place_params.clone().with_seed(seed);
    let original = place_pipeline(design, &RegionConstraintSet::none(), &place_params)?;
    let watermark = gw::select_region(design, &original.detailed, gw_params)?;
    let constraints =
        RegionConstraintSet::with_watermark(watermark.region, watermark.cells.clone());

    // Constrained re-run of the final pipeline round only.
    let global = match &original.warm_from {
        Some(start) => global_place_from(design, &constraints, &place_params, start)?,
        None => global_place(design, &constraints, &place_params)?,
    };
    let legalized = legalize(design, &global.placement, &constraints)?;

    let mut member_flags = vec![false; design.cells.len()];
    for &m in &watermark.cells {
        member_flags[m] = true;
    }
    let candidates = dw::select_candidates_filtered(
        design,
        &legalized,
        &constraints,
        dw_params.d_x,
        dw_params.d_y,
        Some(&member_flags),
    );
    let (placement, dw_wm) = dw::insert_dw(
        design,
        &legalized,
        &constraints,
        signature,
        &candidates,
        seed,
        &place_params.detailed,
    )?;

    let hpwl = crate::metrics::hpwl(design, &placement);
    let certificate = Certificate {
        scheme: Scheme::Icmarks,
        seed,
        signature: Some(signature.clone()),
        fingerprint: dump::fingerprint(design),
        gw: Some(watermark),
        dw: Some(dw_wm),
        dw_units: Some((dw_params.d_x, dw_params.d_y)),
        baseline: None,
    };
    Ok(IcmarksInsertion { placement, certificate, original, hpwl })
}

/// GW-only insertion packaged as a certificate.
pub fn insert_gw_certified(
    design: &Design,
    gw_params: &GwParams,
    place_params: &PlaceParams,
    seed: u64,
) -> Result<IcmarksInsertion, IcmarksError> {
    let place_params = place_params.clone().with_seed(seed);
    let ins = gw::insert_gw(design, gw_params, &place_params)?;
    let hpwl = ins.watermarked.hpwl;
    let certificate = Certificate {
        scheme: Scheme::Gw,
        seed,
        signature: None,
        fingerprint: dump::fingerprint(design),
        gw: Some(ins.watermark),
        dw: None,
        dw_units: None,
        baseline: None,
    };
    Ok(IcmarksInsertion { placement: ins.placement, certificate, original: ins.original, hpwl })
}

/// DW-only insertion packaged as a certificate. The signature moves land on
/// the same run's legalized placement; the non-watermarked reference is the
/// identical pipeline without the moves.
pub fn insert_dw_certified(
    design: &Design,
    signature: &Signature,
    dw_params: &DwParams,
    place_params: &PlaceParams,
    seed: u64,
) -> Result<IcmarksInsertion, IcmarksError> {
    let place_params = place_params.clone().with_seed(seed);
    let constraints = RegionConstraintSet::none();
    let original = place_pipeline(design, &constraints, &place_params)?;
    let candidates = dw::select_candidates(
        design,
        &original.legalized,
        &constraints,
        dw_params.d_x,
        dw_params.d_y,
    );
    let (placement, dw_wm) = dw::insert_dw(
        design,
        &original.legalized,
        &constraints,
        signature,
        &candidates,
        seed,
        &place_params.detailed,
    )?;
    let hpwl = crate::metrics::hpwl(design, &placement);
    let certificate = Certificate {
        scheme: Scheme::Dw,
        seed,
        signature: Some(signature.clone()),
        fingerprint: dump::fingerprint(design),
        gw: None,
        dw: Some(dw_wm),
        dw_units: Some((dw_params.d_x, dw_params.d_y)),
        baseline: None,
    };
    Ok(IcmarksInsertion { placement, certificate, original, hpwl })
}

/// Extraction rates recovered from a suspect placement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WerReport {
    pub wer_gw: Option<f64>,
    pub wer_dw: Option<f64>,
    /// Final rate: the mean of both levels when both are present, else the
    /// one available level.
    pub wer: f64,
}

/// Combined extraction for any certificate scheme. The certificate
/// fingerprint must match the design under audit.
pub fn extract_certificate(
    design: &Design,
    placement: &Placement,
    cert: &Certificate,
) -> Result<WerReport, IcmarksError> {
    if !cert.matches_design(design) {
        return Err(IcmarksError::FingerprintMismatch);
    }
    match cert.scheme {
        Scheme::Icmarks => {
            let gw_wm = cert.gw.as_ref().ok_or(IcmarksError::MissingBlock("gw"))?;
            let dw_wm = cert.dw.as_ref().ok_or(IcmarksError::MissingBlock("dw"))?;
            let wer_gw = gw::extract_gw(design, placement, gw_wm);
            let wer_dw = dw::extract_dw(placement, dw_wm);
            Ok(WerReport {
                wer_gw: Some(wer_gw),
                wer_dw: Some(wer_dw),
                wer: (wer_gw + wer_dw) / 2.0,
            })
        }
        Scheme::Gw => {
            let gw_wm = cert.gw.as_ref().ok_or(IcmarksError::MissingBlock("gw"))?;
            let wer_gw = gw::extract_gw(design, placement, gw_wm);
            Ok(WerReport { wer_gw: Some(wer_gw), wer_dw: None, wer: wer_gw })
        }
        Scheme::Dw => {
            let dw_wm = cert.dw.as_ref().ok_or(IcmarksError::MissingBlock("dw"))?;
            let wer_dw = dw::extract_dw(placement, dw_wm);
            Ok(WerReport { wer_gw: None, wer_dw: Some(wer_dw), wer: wer_dw })
        }
        Scheme::RowParity => {
            let wm = cert.baseline.as_ref().ok_or(IcmarksError::MissingBlock("baseline"))?;
            let wer = crate::baselines::row_parity_extract(design, placement, wm);
            Ok(WerReport { wer_gw: None, wer_dw: None, wer })
        }
        Scheme::CellScattering => {
            let wm = cert.baseline.as_ref().ok_or(IcmarksError::MissingBlock("baseline"))?;
            let wer = crate::baselines::cell_scattering_extract(placement, wm);
            Ok(WerReport { wer_gw: None, wer_dw: None, wer })
        }
        Scheme::BufferInsertion => {
            let wm = cert.baseline.as_ref().ok_or(IcmarksError::MissingBlock("baseline"))?;
            let wer = crate::baselines::buffer_insertion_extract(design, wm);
            Ok(WerReport { wer_gw: None, wer_dw: None, wer })
        }
    }
}

/// Convenience alias matching the scheme's two-step extraction.
pub fn extract_icmarks(
    design: &Design,
    placement: &Placement,
    cert: &Certificate,
) -> Result<WerReport, IcmarksError> {
    extract_certificate(design, placement, cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate;
    use crate::synth::{generate_synthetic, SynthConfig};

    fn design_500(seed: u64) -> Design {
        generate_synthetic(&SynthConfig::new(500, 600, 0.55), seed).unwrap()
    }

    #[test]
    fn combined_insertion_self_extracts_at_100() {
        let d = design_500(77);
        let sig = Signature::random(12, 3);
        let gw_params = GwParams::band_for_bits(&d, sig.len());
        let dw_params = DwParams::for_design(&d);
        let ins =
            insert_icmarks(&d, &sig, &gw_params, &dw_params, &PlaceParams::default(), 3).unwrap();
        let rep = extract_icmarks(&d, &ins.placement, &ins.certificate).unwrap();
        assert_eq!(rep.wer_gw, Some(100.0));
        assert_eq!(rep.wer_dw, Some(100.0));
        assert_eq!(rep.wer, 100.0);
    }

    #[test]
    fn mean_is_exact() {
        let rep = WerReport { wer_gw: Some(100.0), wer_dw: Some(80.0), wer: (100.0 + 80.0) / 2.0 };
        assert_eq!(rep.wer, 90.0); // the ownership threshold
    }

    #[test]
    fn fingerprint_guard_rejects_other_design() {
        let d = design_500(78);
        let other = design_500(79);
        let sig = Signature::random(8, 4);
        let gw_params = GwParams::band_for_bits(&d, sig.len());
        let ins = insert_icmarks(
            &d,
            &sig,
            &gw_params,
            &DwParams::for_design(&d),
            &PlaceParams::default(),
            4,
        )
        .unwrap();
        assert!(matches!(
            extract_icmarks(&other, &ins.placement, &ins.certificate),
            Err(IcmarksError::FingerprintMismatch)
        ));
    }

    #[test]
    fn same_seed_byte_identical_certificates() {
        let d = design_500(80);
        let sig = Signature::random(10, 5);
        let gw_params = GwParams::band_for_bits(&d, sig.len());
        let dw_params = DwParams::for_design(&d);
        let a = insert_icmarks(&d, &sig, &gw_params, &dw_params, &PlaceParams::default(), 9).unwrap();
        let b = insert_icmarks(&d, &sig, &gw_params, &dw_params, &PlaceParams::default(), 9).unwrap();
        assert_eq!(certificate::to_string(&a.certificate), certificate::to_string(&b.certificate));
        assert_eq!(a.placement, b.placement);
    }

    #[test]
    fn oversized_signature_is_capacity_limited() {
        let d = design_500(81);
        // a signature far beyond any region's population
        let sig = Signature::random(400, 6);
        let gw_params = GwParams::band_for_bits(&d, sig.len());
        let err = insert_icmarks(
            &d,
            &sig,
            &gw_params,
            &DwParams::for_design(&d),
            &PlaceParams::default(),
            6,
        )
        .unwrap_err();
        assert!(
            matches!(err, IcmarksError::Gw(GwError::NoValidWindow))
                || matches!(err, IcmarksError::Dw(DwError::InsufficientCandidates { .. })),
            "{err:?}"
        );
    }
}
