//! Watermark-removal attacks: swap-location (SLA), constraint-perturbation
//! (CPA), optimization (OA), and adaptive-region (ARA) procedures. Every
//! attack ends with the legality-restoring pipeline the adversary needs to
//! keep the layout usable: legalization plus detailed placement, run
//! without any knowledge of the watermark constraints.

use crate::certificate::Certificate;
use crate::design::{Design, Placement, Stage};
use crate::dw::{self, RowOcc};
use crate::gw::{self, GwParams};
use crate::icmarks::{extract_certificate, WerReport};
use crate::metrics;
use crate::placer::{
    build_segments, detailed_place, legalize, DetailedParams, RegionConstraintSet,
};
use crate::rng::{DetRng, Stream};
use rayon::prelude::*;

/// Ownership threshold: extraction below this rate fails to prove ownership.
pub const WER_THRESHOLD: f64 = 90.0;
/// Quality threshold: attacks may not degrade wirelength past this ratio.
pub const PWLR_THRESHOLD: f64 = 1.005;

#[derive(Debug, Clone)]
pub struct AttackOutcome {
    pub placement: Placement,
    /// HPWL of the attacked placement over the original non-watermarked one.
    pub pwlr_vs_original: f64,
    pub report: WerReport,
    pub attack: &'static str,
    pub param: f64,
    pub seed: u64,
}

impl AttackOutcome {
    /// A removal attack succeeds only when both hold, recomputed from the
    /// stored fields: the signature is gone and the layout stays usable.
    pub fn success(&self) -> bool {
        self.report.wer < WER_THRESHOLD && self.pwlr_vs_original <= PWLR_THRESHOLD
    }
}

/// Everything an attack needs to measure itself.
#[derive(Clone, Copy)]
pub struct AttackContext<'a> {
    pub design: &'a Design,
    pub cert: &'a Certificate,
    /// HPWL of the same-seed non-watermarked pipeline.
    pub baseline_hpwl: i64,
}


/// The adversary's compensation runs the same detailed-placement budget the
/// owner's pipeline uses.
fn restore_params() -> DetailedParams {
    crate::placer::PlaceParams::default().detailed
}

fn finish(
    ctx: &AttackContext,
    perturbed: Placement,
    attack: &'static str,
    param: f64,
    seed: u64,
    detailed: &DetailedParams,
) -> AttackOutcome {
    let constraints = RegionConstraintSet::none();
    let legalized = legalize(ctx.design, &perturbed.with_stage(Stage::Global), &constraints)
        .expect("attack repair legalization cannot overflow on a feasible design");
    let placement = detailed_place(ctx.design, &legalized, &constraints, detailed);
    let hpwl = metrics::hpwl(ctx.design, &placement);
    let pwlr = hpwl as f64 / ctx.baseline_hpwl as f64;
    let report = extract_certificate(ctx.design, &placement, ctx.cert)
        .expect("attacks never change the design, so the fingerprint holds");
    AttackOutcome { placement, pwlr_vs_original: pwlr, report, attack, param, seed }
}

/// Swap-location attack: a seeded fraction of movable cells exchange
/// positions in disjoint pairs.
pub fn attack_sla(
    ctx: &AttackContext,
    placement: &Placement,
    fraction: f64,
    seed: u64,
) -> AttackOutcome {
    debug_assert!(fraction > 0.0 && fraction <= 0.5);
    let movable: Vec<usize> = ctx.design.movable_ids().collect();
    let k = (fraction * movable.len() as f64).floor() as usize;
    let mut rng = DetRng::new(seed, Stream::AttackSla);
    let chosen = {
        let mut ids = movable;
        rng.shuffle(&mut ids);
        ids.truncate(k);
        ids
    };
    if chosen.len() < 2 {
        // no pair forms: nothing was exchanged, nothing to compensate
        return unchanged(ctx, placement, "sla", fraction, seed);
    }
    let mut attacked = placement.clone();
    for pair in chosen.chunks_exact(2) {
        let (a, b) = (pair[0], pair[1]);
        attacked.xs.swap(a, b);
        attacked.ys.swap(a, b);
    }
    finish(ctx, attacked, "sla", fraction, seed, &restore_params())
}

fn unchanged(
    ctx: &AttackContext,
    placement: &Placement,
    attack: &'static str,
    param: f64,
    seed: u64,
) -> AttackOutcome {
    let hpwl = metrics::hpwl(ctx.design, placement);
    let report = extract_certificate(ctx.design, placement, ctx.cert)
        .expect("attacks never change the design, so the fingerprint holds");
    AttackOutcome {
        placement: placement.clone(),
        pwlr_vs_original: hpwl as f64 / ctx.baseline_hpwl as f64,
        report,
        attack,
        param,
        seed,
    }
}

/// Constraint-perturbation attack: a seeded fraction of the cells with room
/// shift one unit along x or one row along y, honoring design fences (which
/// are public) but not the secret watermark region.
pub fn attack_cpa(
    ctx: &AttackContext,
    placement: &Placement,
    fraction: f64,
    d_x: i64,
    d_y: i64,
    seed: u64,
) -> AttackOutcome {
    debug_assert!(fraction > 0.0 && fraction <= 1.0);
    let constraints = RegionConstraintSet::none();
    let cands = dw::select_candidates(ctx.design, placement, &constraints, d_x, d_y);
    let mut moves: std::collections::BTreeMap<usize, (Option<i64>, Option<i64>)> =
        std::collections::BTreeMap::new();
    for (&c, &m) in cands.x_cells.iter().zip(&cands.x_moves) {
        moves.entry(c).or_default().0 = Some(m);
    }
    for (&c, &m) in cands.y_cells.iter().zip(&cands.y_moves) {
        moves.entry(c).or_default().1 = Some(m);
    }
    let mut eligible: Vec<usize> = moves.keys().copied().collect();
    let mut rng = DetRng::new(seed, Stream::AttackCpa);
    rng.shuffle(&mut eligible);
    let k = (fraction * eligible.len() as f64).floor() as usize;
    eligible.truncate(k);
    if eligible.is_empty() {
        return unchanged(ctx, placement, "cpa", fraction, seed);
    }

    let attacked = apply_shifts(ctx.design, placement, &moves, &eligible, &mut rng);
    finish(ctx, attacked, "cpa", fraction, seed, &restore_params())
}

/// Shift each listed cell by its available move (coin-picked axis when both
/// are free), re-validating against the evolving state.
fn apply_shifts(
    design: &Design,
    placement: &Placement,
    moves: &std::collections::BTreeMap<usize, (Option<i64>, Option<i64>)>,
    order: &[usize],
    rng: &mut DetRng,
) -> Placement {
    let constraints = RegionConstraintSet::none();
    let wm_member = constraints.member_flags(design.cells.len());
    let multi_rects: Vec<_> = design
        .cells
        .iter()
        .filter(|c| c.kind.is_movable() && c.height > design.row_height)
        .map(|c| placement.cell_rect(design, c.id))
        .collect();
    let segmap = build_segments(design, None, &multi_rects);
    let mut out = placement.clone();
    let mut occ = RowOcc::build(design, &out);
    for &cid in order {
        let (mx, my) = moves[&cid];
        let axis_y = match (mx, my) {
            (Some(_), Some(_)) => rng.coin(),
            (None, Some(_)) => true,
            (Some(_), None) => false,
            (None, None) => continue,
        };
        let (nx, ny) = if axis_y {
            (out.xs[cid], out.ys[cid] + my.unwrap())
        } else {
            (out.xs[cid] + mx.unwrap(), out.ys[cid])
        };
        if dw::move_is_free(design, &segmap, &occ, &wm_member, cid, nx, ny) {
            occ.remove(design, &out, cid);
            out.xs[cid] = nx;
            out.ys[cid] = ny;
            occ.insert(design, &out, cid);
        }
    }
    out
}

/// Optimization attack: one extra detailed-placement round with a
/// perturbation-friendly parameter set (doubled pass budget plus zero-gain
/// realignment slides).
pub fn attack_oa(ctx: &AttackContext, placement: &Placement) -> AttackOutcome {
    let params = DetailedParams {
        passes: restore_params().passes * 2,
        reorder_window: 3,
        slide_to_flat_optimum: true,
    };
    let constraints = RegionConstraintSet::none();
    let attacked = detailed_place(ctx.design, placement, &constraints, &params);
    let hpwl = metrics::hpwl(ctx.design, &attacked);
    let pwlr = hpwl as f64 / ctx.baseline_hpwl as f64;
    let report = extract_certificate(ctx.design, &attacked, ctx.cert)
        .expect("attacks never change the design, so the fingerprint holds");
    AttackOutcome { placement: attacked, pwlr_vs_original: pwlr, report, attack: "oa", param: 0.0, seed: 0 }
}

/// Adaptive-region attack: re-run the region sweep on the watermarked
/// placement with adversary-guessed weights, then shift every cell with
/// room inside the top-k lowest-scored windows.
pub fn attack_ara(
    ctx: &AttackContext,
    placement: &Placement,
    guess: &GwParams,
    top_k: usize,
    seed: u64,
) -> AttackOutcome {
    let scored = gw::sweep_scores(ctx.design, placement, guess);
    let mut valid: Vec<&gw::ScoredWindow> = scored.iter().filter(|w| w.raw.is_some()).collect();
    valid.sort_by(|a, b| {
        (a.norm, a.rect.y_lo, a.rect.x_lo)
            .partial_cmp(&(b.norm, b.rect.y_lo, b.rect.x_lo))
            .unwrap()
    });
    valid.truncate(top_k);

    let constraints = RegionConstraintSet::none();
    let cands =
        dw::select_candidates(ctx.design, placement, &constraints, 1, ctx.design.row_height);
    let mut moves: std::collections::BTreeMap<usize, (Option<i64>, Option<i64>)> =
        std::collections::BTreeMap::new();
    for (&c, &m) in cands.x_cells.iter().zip(&cands.x_moves) {
        moves.entry(c).or_default().0 = Some(m);
    }
    for (&c, &m) in cands.y_cells.iter().zip(&cands.y_moves) {
        moves.entry(c).or_default().1 = Some(m);
    }
    // all cells with room whose center lies in an attacked window
    let mut order: Vec<usize> = Vec::new();
    for c in ctx.design.cells.iter().filter(|c| c.kind.is_movable()) {
        if !moves.contains_key(&c.id) {
            continue;
        }
        let (cx2, cy2) = placement.center2(ctx.design, c.id);
        if valid.iter().any(|w| w.rect.contains_center2(cx2, cy2)) {
            order.push(c.id);
        }
    }
    if order.is_empty() {
        return unchanged(ctx, placement, "ara", top_k as f64, seed);
    }
    let mut rng = DetRng::new(seed, Stream::AttackAra);
    let attacked = apply_shifts(ctx.design, placement, &moves, &order, &mut rng);
    finish(ctx, attacked, "ara", top_k as f64, seed, &restore_params())
}

/// One attack trial in a sweep.
#[derive(Debug, Clone)]
pub struct AttackJob {
    pub kind: AttackKind,
    /// Fraction for SLA/CPA, top-k for ARA, unused for OA.
    pub param: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    Sla,
    Cpa,
    Oa,
    Ara,
}

impl AttackKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AttackKind::Sla => "sla",
            AttackKind::Cpa => "cpa",
            AttackKind::Oa => "oa",
            AttackKind::Ara => "ara",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sla" => Some(AttackKind::Sla),
            "cpa" => Some(AttackKind::Cpa),
            "oa" => Some(AttackKind::Oa),
            "ara" => Some(AttackKind::Ara),
            _ => None,
        }
    }
}

pub fn run_attack(
    ctx: &AttackContext,
    placement: &Placement,
    job: &AttackJob,
    ara_guess: &GwParams,
) -> AttackOutcome {
    match job.kind {
        AttackKind::Sla => attack_sla(ctx, placement, job.param, job.seed),
        AttackKind::Cpa => {
            attack_cpa(ctx, placement, job.param, 1, ctx.design.row_height, job.seed)
        }
        AttackKind::Oa => attack_oa(ctx, placement),
        AttackKind::Ara => attack_ara(ctx, placement, ara_guess, job.param as usize, job.seed),
    }
}

/// Fan a sweep of trials over the rayon pool; results come back in job
/// order, so output is identical for any worker count.
pub fn run_attack_sweep(
    ctx: &AttackContext,
    placement: &Placement,
    jobs: &[AttackJob],
    ara_guess: &GwParams,
) -> Vec<AttackOutcome> {
    jobs.par_iter().map(|job| run_attack(ctx, placement, job, ara_guess)).collect()
}
