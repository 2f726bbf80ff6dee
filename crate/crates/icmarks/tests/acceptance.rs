//! Acceptance suite: every criterion runs at its stated tolerance and
//! prints one pass/fail line (run with `--nocapture` to see them on
//! success). The criteria pin desk-scale threshold claims plus the
//! property/oracle checks; tolerances are hard-coded here on purpose.

use icmarks::attacks::{
    run_attack, AttackContext, AttackJob, AttackKind, AttackOutcome, PWLR_THRESHOLD, WER_THRESHOLD,
};
use icmarks::baselines::{self, BaselinePayload};
use icmarks::certificate::{self, Certificate, Scheme};
use icmarks::design::Design;
use icmarks::dw::Signature;
use icmarks::gw::GwParams;
use icmarks::icmarks::{
    extract_certificate, insert_dw_certified, insert_gw_certified, insert_icmarks, DwParams,
};
use icmarks::metrics::check_legal;
use icmarks::placer::{place_pipeline, PlaceParams, RegionConstraintSet};
use icmarks::report::{attack_csv, AttackRow};
use icmarks::strength::{strength_combined, strength_gw};
use icmarks::synth::{generate_synthetic, SynthConfig};
use rayon::prelude::*;

fn design_2k() -> Design {
    generate_synthetic(&SynthConfig::new(2000, 2300, 0.6), 1001).unwrap()
}

fn design_8k() -> Design {
    let mut cfg = SynthConfig::new(8000, 9200, 0.6);
    cfg.n_macros = 2;
    cfg.n_fences = 1;
    generate_synthetic(&cfg, 1002).unwrap()
}

fn design_20k() -> Design {
    generate_synthetic(&SynthConfig::new(20000, 23000, 0.62), 1003).unwrap()
}

fn sig50(seed: u64) -> Signature {
    Signature::random(50, seed)
}

fn assert_legal(design: &Design, placement: &icmarks::Placement, what: &str) {
    let rep = check_legal(design, placement);
    assert!(
        rep.is_legal(),
        "{what}: {} overlaps, {} off-row, {} out-of-die, {} fence violations",
        rep.overlap_pairs.len(),
        rep.off_row_cells.len(),
        rep.out_of_die_cells.len(),
        rep.fence_violations.len()
    );
}

/// Criterion 1: 50-bit combined insertion on 2k/8k/20k designs reaches
/// WER = 100 exactly with PWLR <= 1.005, within the runtime budget.
/// Criterion 5 is asserted along the way for every produced stage.
#[test]
fn criterion_1_insertion_fidelity() {
    let start = std::time::Instant::now();
    let designs = vec![("2k", design_2k()), ("8k", design_8k()), ("20k", design_20k())];
    let results: Vec<(String, f64, f64)> = designs
        .par_iter()
        .map(|(tag, design)| {
            let sig = sig50(42);
            let gw_params = GwParams::band_for_bits(design, sig.len());
            let ins = insert_icmarks(
                design,
                &sig,
                &gw_params,
                &DwParams::for_design(design),
                &PlaceParams::default(),
                42,
            )
            .unwrap_or_else(|e| panic!("{tag}: insertion failed: {e}"));
            assert_legal(design, &ins.original.legalized, "original legalized");
            assert_legal(design, &ins.original.detailed, "original detailed");
            assert_legal(design, &ins.placement, "watermarked detailed");
            let rep = extract_certificate(design, &ins.placement, &ins.certificate).unwrap();
            let pwlr = ins.hpwl as f64 / ins.original.hpwl as f64;
            (tag.to_string(), rep.wer, pwlr)
        })
        .collect();
    for (tag, wer, pwlr) in &results {
        assert_eq!(*wer, 100.0, "{tag}: WER must be exactly 100, got {wer}");
        assert!(*pwlr <= PWLR_THRESHOLD, "{tag}: PWLR {pwlr} exceeds {PWLR_THRESHOLD}");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 300, "runtime budget exceeded: {elapsed:?}");
    let detail: Vec<String> =
        results.iter().map(|(t, w, p)| format!("{t}: wer={w} pwlr={p:.5}")).collect();
    println!("criterion 1 insertion fidelity: PASS ({}; {:?})", detail.join(", "), elapsed);
}

/// Criterion 2: strength math against published values and the
/// brute-force enumeration oracle.
#[test]
fn criterion_2_strength_math() {
    // 50-bit row-parity strength
    let v = strength_gw(50, 50, 0.5).unwrap();
    assert!(
        (8.7e-16..=9.0e-16).contains(&v),
        "strength_gw(50,50,0.5) = {v} outside [8.7e-16, 9.0e-16]"
    );
    // published composition within 0.5%
    let c = strength_combined(9.09e-53, 8.08e-62);
    let rel = (c - 7.35e-114).abs() / 7.35e-114;
    assert!(rel <= 5e-3, "combined strength {c} deviates {rel}");

    // enumeration oracle: sum the probability of every outcome vector with
    // at least x successes
    let brute = |n: u64, x: u64, p: f64| -> f64 {
        let mut total = 0.0;
        for mask in 0u64..(1 << n) {
            let ones = mask.count_ones() as u64;
            if ones >= x {
                total += p.powi(ones as i32) * (1.0 - p).powi((n - ones) as i32);
            }
        }
        total
    };
    let mut rng = icmarks::rng::DetRng::new(2024, icmarks::rng::Stream::AttackSla);
    for trial in 0..200 {
        let n = 1 + rng.below(12);
        let x = rng.below(n + 1);
        let p = rng.unit_f64();
        let fast = strength_gw(n, x, p).unwrap();
        let slow = brute(n, x, p);
        let rel = (fast - slow).abs() / slow.abs().max(1e-300);
        assert!(rel < 1e-12, "trial {trial}: n={n} x={x} p={p}: {fast} vs {slow}");
    }
    println!("criterion 2 strength math: PASS (50-bit={v:.3e}, combined={c:.3e}, 200 oracle trials)");
}

struct SchemeUnderTest {
    cert: Certificate,
    placement: icmarks::Placement,
    baseline_hpwl: i64,
}

fn insert_scheme(design: &Design, scheme: Scheme, seed: u64) -> SchemeUnderTest {
    let sig = sig50(seed);
    let place = PlaceParams::default().with_seed(seed);
    match scheme {
        Scheme::Icmarks => {
            let ins = insert_icmarks(
                design,
                &sig,
                &GwParams::band_for_bits(design, sig.len()),
                &DwParams::for_design(design),
                &place,
                seed,
            )
            .unwrap();
            assert_legal(design, &ins.placement, "icmarks insertion");
            SchemeUnderTest {
                cert: ins.certificate,
                placement: ins.placement,
                baseline_hpwl: ins.original.hpwl,
            }
        }
        Scheme::Gw => {
            let ins =
                insert_gw_certified(design, &GwParams::band_for_bits(design, sig.len()), &place, seed)
                    .unwrap();
            assert_legal(design, &ins.placement, "gw insertion");
            SchemeUnderTest {
                cert: ins.certificate,
                placement: ins.placement,
                baseline_hpwl: ins.original.hpwl,
            }
        }
        Scheme::Dw => {
            let ins =
                insert_dw_certified(design, &sig, &DwParams::for_design(design), &place, seed)
                    .unwrap();
            assert_legal(design, &ins.placement, "dw insertion");
            SchemeUnderTest {
                cert: ins.certificate,
                placement: ins.placement,
                baseline_hpwl: ins.original.hpwl,
            }
        }
        Scheme::RowParity | Scheme::CellScattering => {
            let base = place_pipeline(design, &RegionConstraintSet::none(), &place).unwrap();
            let (p, wm) = if scheme == Scheme::RowParity {
                baselines::row_parity_insert(design, &base.legalized, &sig, seed).unwrap()
            } else {
                baselines::cell_scattering_insert(design, &base.detailed, &sig, seed).unwrap()
            };
            assert_legal(design, &p, "baseline insertion");
            let cert = Certificate {
                scheme,
                seed,
                signature: Some(sig),
                fingerprint: icmarks::dump::fingerprint(design),
                gw: None,
                dw: None,
                dw_units: None,
                baseline: Some(wm),
            };
            SchemeUnderTest { cert, placement: p, baseline_hpwl: base.hpwl }
        }
        Scheme::BufferInsertion => unreachable!("not part of the attack criteria"),
    }
}

/// Criterion 3: attack robustness ordering on the 8k design.
#[test]
fn criterion_3_attack_robustness() {
    let start = std::time::Instant::now();
    let design = design_8k();
    let guess = GwParams::band_for_bits(&design, 50); // adversary mirrors the owner
    let settings: Vec<(AttackKind, f64)> = vec![
        (AttackKind::Sla, 0.001),
        (AttackKind::Sla, 0.005),
        (AttackKind::Cpa, 0.001),
        (AttackKind::Cpa, 0.01),
        (AttackKind::Cpa, 0.1),
        (AttackKind::Oa, 0.0),
        (AttackKind::Ara, 1.0),
        (AttackKind::Ara, 5.0),
    ];
    let seeds: Vec<u64> = (1..=5).collect();

    // (a) icmarks and gw keep wer_gw >= 90 in every trial
    let mut min_wer_gw = f64::INFINITY;
    for scheme in [Scheme::Icmarks, Scheme::Gw] {
        let sut = insert_scheme(&design, scheme, 7);
        let ctx = AttackContext {
            design: &design,
            cert: &sut.cert,
            baseline_hpwl: sut.baseline_hpwl,
        };
        let jobs: Vec<AttackJob> = settings
            .iter()
            .flat_map(|&(kind, param)| {
                seeds.iter().map(move |&seed| AttackJob { kind, param, seed })
            })
            .collect();
        let outcomes: Vec<AttackOutcome> = jobs
            .par_iter()
            .map(|job| run_attack(&ctx, &sut.placement, job, &guess))
            .collect();
        for (job, out) in jobs.iter().zip(&outcomes) {
            assert_legal(&design, &out.placement, "attacked placement");
            let wer_gw = out.report.wer_gw.expect("gw-bearing scheme");
            min_wer_gw = min_wer_gw.min(wer_gw);
            assert!(
                wer_gw >= WER_THRESHOLD,
                "{scheme:?} under {:?} {} seed {}: wer_gw {wer_gw} < {WER_THRESHOLD}",
                job.kind,
                job.param,
                job.seed
            );
        }
    }

    // (b) at least one fragile pair records WER < 90
    let mut fragile_hits: Vec<(Scheme, AttackKind, f64)> = Vec::new();
    let pairs = [
        (Scheme::RowParity, AttackKind::Ara, 5.0),
        (Scheme::Dw, AttackKind::Oa, 0.0),
        (Scheme::CellScattering, AttackKind::Cpa, 0.1),
    ];
    for (scheme, kind, param) in pairs {
        let sut = insert_scheme(&design, scheme, 7);
        let ctx = AttackContext {
            design: &design,
            cert: &sut.cert,
            baseline_hpwl: sut.baseline_hpwl,
        };
        let outcomes: Vec<AttackOutcome> = seeds
            .par_iter()
            .map(|&seed| run_attack(&ctx, &sut.placement, &AttackJob { kind, param, seed }, &guess))
            .collect();
        for out in &outcomes {
            assert_legal(&design, &out.placement, "attacked placement");
            if out.report.wer < WER_THRESHOLD {
                fragile_hits.push((scheme, kind, out.report.wer));
            }
        }
    }
    assert!(
        !fragile_hits.is_empty(),
        "no fragile scheme dropped below {WER_THRESHOLD} in the designated pairs"
    );

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 900, "runtime budget exceeded: {elapsed:?}");
    println!(
        "criterion 3 attack robustness: PASS (min wer_gw {min_wer_gw:.2}, fragile hits {}, {:?})",
        fragile_hits.len(),
        elapsed
    );
}

/// Largest signature length this scheme sustains on the design: insertion
/// succeeds, self-extraction is 100, and PWLR stays within the threshold.
fn capacity_of(design: &Design, scheme: Scheme, bits: &[usize]) -> usize {
    let mut best = 0;
    for &b in bits {
        let sig = Signature::random(b, 77);
        let place = PlaceParams::default().with_seed(77);
        let outcome: Option<(f64, f64)> = match scheme {
            Scheme::Icmarks => insert_icmarks(
                design,
                &sig,
                &GwParams::band_for_bits(design, b),
                &DwParams::for_design(design),
                &place,
                77,
            )
            .ok()
            .map(|ins| {
                let wer =
                    extract_certificate(design, &ins.placement, &ins.certificate).unwrap().wer;
                (wer, ins.hpwl as f64 / ins.original.hpwl as f64)
            }),
            Scheme::Gw => {
                insert_gw_certified(design, &GwParams::band_for_bits(design, b), &place, 77)
                    .ok()
                    .map(|ins| {
                        let wer = extract_certificate(design, &ins.placement, &ins.certificate)
                            .unwrap()
                            .wer;
                        (wer, ins.hpwl as f64 / ins.original.hpwl as f64)
                    })
            }
            Scheme::Dw => {
                insert_dw_certified(design, &sig, &DwParams::for_design(design), &place, 77)
                    .ok()
                    .map(|ins| {
                        let wer = extract_certificate(design, &ins.placement, &ins.certificate)
                            .unwrap()
                            .wer;
                        (wer, ins.hpwl as f64 / ins.original.hpwl as f64)
                    })
            }
            Scheme::RowParity => {
                let base = place_pipeline(design, &RegionConstraintSet::none(), &place).unwrap();
                baselines::row_parity_insert(design, &base.legalized, &sig, 77).ok().map(
                    |(p, wm)| {
                        let wer = baselines::row_parity_extract(design, &p, &wm);
                        (wer, icmarks::metrics::hpwl(design, &p) as f64 / base.hpwl as f64)
                    },
                )
            }
            _ => unreachable!(),
        };
        match outcome {
            Some((wer, pwlr)) if wer >= 100.0 && pwlr <= PWLR_THRESHOLD => best = b,
            _ => break,
        }
    }
    best
}

/// Criterion 4: capacity ordering on the 20k design.
#[test]
fn criterion_4_capacity_ordering() {
    let design = design_20k();
    let bits = [10usize, 50, 100, 200];
    let schemes = [Scheme::Icmarks, Scheme::Gw, Scheme::Dw, Scheme::RowParity];
    let caps: Vec<(Scheme, usize)> = schemes
        .par_iter()
        .map(|&s| (s, capacity_of(&design, s, &bits)))
        .collect();
    let get = |s: Scheme| caps.iter().find(|(c, _)| *c == s).unwrap().1;
    let (ic, gw, dw, rp) =
        (get(Scheme::Icmarks), get(Scheme::Gw), get(Scheme::Dw), get(Scheme::RowParity));
    assert!(
        ic >= gw && gw >= dw && dw >= rp,
        "capacity ordering violated: icmarks={ic} gw={gw} dw={dw} row_parity={rp}"
    );
    println!(
        "criterion 4 capacity ordering: PASS (icmarks={ic} >= gw={gw} >= dw={dw} >= row_parity={rp}; desk-scale absolute values at bits {bits:?})"
    );
}

/// Criterion 6: extraction rates agree exactly with independent
/// set-arithmetic oracles on 500 random small certificates, and
/// self-extraction is 100 over 200 random 500-cell insertions.
#[test]
fn criterion_6_extraction_oracles() {
    use icmarks::design::{Cell, CellKind, Placement, Row, Stage};
    use icmarks::geom::Rect;
    use icmarks::rng::{DetRng, Stream};

    // independent oracle: plain set arithmetic over explicitly listed cells
    let mut rng = DetRng::new(6001, Stream::AttackCpa);
    for trial in 0..500 {
        let n_cells = 50 + rng.below(150) as usize;
        let die = 60i64;
        let cells: Vec<Cell> = (0..n_cells)
            .map(|id| Cell {
                id,
                width: 1 + rng.below(3) as i64,
                height: 2,
                kind: CellKind::Movable,
                region_id: None,
                fixed_pos: None,
            })
            .collect();
        let design = Design {
            name: format!("oracle{trial}"),
            die: Rect::new(0, 0, die, die),
            rows: (0..die / 2).map(|i| Row { id: i as usize, x_lo: 0, x_hi: die, y: 2 * i }).collect(),
            cells,
            nets: vec![],
            fence_regions: vec![],
            row_height: 2,
        };
        let xs: Vec<i64> = (0..n_cells).map(|_| rng.range_i64(0, die - 4)).collect();
        let ys: Vec<i64> = (0..n_cells).map(|_| 2 * rng.range_i64(0, die / 2 - 1)).collect();
        let placement = Placement::new(xs, ys, Stage::Detailed);
        let region = {
            let x0 = rng.range_i64(0, die - 20);
            let y0 = 2 * rng.range_i64(0, (die - 20) / 2);
            Rect::new(x0, y0, x0 + 20, y0 + 20)
        };
        let n_members = 1 + rng.below(20) as usize;
        let members: Vec<usize> =
            rng.sample_indices(n_cells, n_members).into_iter().collect();
        let gw_wm = icmarks::gw::GwWatermark {
            region,
            cells: members.clone(),
            score: 0.0,
            params: GwParams::for_design(&design, 1),
        };
        // oracle: centers in region, split by membership
        let member_set: std::collections::HashSet<usize> = members.iter().copied().collect();
        let mut inside_members = 0i64;
        let mut inside_foreign = 0i64;
        for c in &design.cells {
            let (cx2, cy2) = placement.center2(&design, c.id);
            if region.contains_center2(cx2, cy2) {
                if member_set.contains(&c.id) {
                    inside_members += 1;
                } else {
                    inside_foreign += 1;
                }
            }
        }
        let expect_gw = (100.0 * (inside_members - inside_foreign).max(0) as f64
            / members.len() as f64)
            .clamp(0.0, 100.0);
        let got_gw = icmarks::gw::extract_gw(&design, &placement, &gw_wm);
        assert_eq!(got_gw, expect_gw, "trial {trial}: gw extraction mismatch");

        // dw oracle: exact displacement comparison
        let n_dw = 1 + rng.below(16) as usize;
        let dw_cells: Vec<usize> = rng.sample_indices(n_cells, n_dw);
        let itr: Vec<(i64, i64)> = dw_cells
            .iter()
            .map(|&c| (placement.xs[c] + rng.range_i64(-1, 1), placement.ys[c]))
            .collect();
        let dist: Vec<(i64, i64)> = dw_cells
            .iter()
            .zip(&itr)
            .map(|(&c, &(ix, iy))| {
                if rng.coin() {
                    (ix - placement.xs[c], iy - placement.ys[c]) // will match
                } else {
                    (ix - placement.xs[c] + 1, iy - placement.ys[c]) // will not
                }
            })
            .collect();
        let dw_wm = icmarks::dw::DwWatermark {
            cells: dw_cells.clone(),
            itr_positions: itr.clone(),
            dist: dist.clone(),
        };
        let matched = dw_cells
            .iter()
            .zip(&itr)
            .zip(&dist)
            .filter(|&((&c, &(ix, iy)), &(dx, dy))| {
                (ix - placement.xs[c], iy - placement.ys[c]) == (dx, dy)
            })
            .count();
        let expect_dw = 100.0 * matched as f64 / dw_cells.len() as f64;
        let got_dw = icmarks::dw::extract_dw(&placement, &dw_wm);
        assert_eq!(got_dw, expect_dw, "trial {trial}: dw extraction mismatch");

        // combined mean is exact
        let cert = Certificate {
            scheme: Scheme::Icmarks,
            seed: 0,
            signature: None,
            fingerprint: icmarks::dump::fingerprint(&design),
            gw: Some(gw_wm),
            dw: Some(dw_wm),
            dw_units: Some((1, 2)),
            baseline: None,
        };
        let rep = extract_certificate(&design, &placement, &cert).unwrap();
        assert_eq!(rep.wer, (expect_gw + expect_dw) / 2.0, "trial {trial}: mean mismatch");
    }

    // self-extraction property: 200 random seeds on 500-cell designs
    let failures: Vec<u64> = (0..200u64)
        .into_par_iter()
        .filter(|&seed| {
            let design =
                generate_synthetic(&SynthConfig::new(500, 600, 0.55), 9000 + seed).unwrap();
            let sig = Signature::random(8 + (seed % 9) as usize, seed);
            match insert_icmarks(
                &design,
                &sig,
                &GwParams::band_for_bits(&design, sig.len()),
                &DwParams::for_design(&design),
                &PlaceParams::default(),
                seed,
            ) {
                Ok(ins) => {
                    let rep =
                        extract_certificate(&design, &ins.placement, &ins.certificate).unwrap();
                    rep.wer != 100.0
                }
                // capacity misses are not self-extraction failures
                Err(icmarks::icmarks::IcmarksError::Dw(_)) => false,
                Err(icmarks::icmarks::IcmarksError::Gw(_)) => false,
                Err(e) => panic!("seed {seed}: {e}"),
            }
        })
        .collect();
    assert!(failures.is_empty(), "self-extraction below 100 for seeds {failures:?}");
    println!("criterion 6 extraction oracles: PASS (500 oracle certificates, 200 insertion seeds)");
}

/// Criterion 7: candidate soundness on 100 random legalized 1k-cell
/// placements, with a brute-force geometric re-check per candidate, plus
/// legality of the full-signature intermediate placement.
#[test]
fn criterion_7_candidate_soundness() {
    use icmarks::placer::{global_place, legalize};

    let failures: Vec<String> = (0..100u64)
        .into_par_iter()
        .filter_map(|seed| {
            let design =
                generate_synthetic(&SynthConfig::new(1000, 1200, 0.6), 7000 + seed).ok()?;
            let cs = RegionConstraintSet::none();
            let params = PlaceParams::default().with_seed(seed);
            let g = global_place(&design, &cs, &params).ok()?;
            let lg = legalize(&design, &g.placement, &cs).ok()?;
            let cands = icmarks::dw::select_candidates(&design, &lg, &cs, 1, design.row_height);
            // brute-force re-check: every candidate applied alone is overlap-free
            for (cells, moves, is_x) in [
                (&cands.x_cells, &cands.x_moves, true),
                (&cands.y_cells, &cands.y_moves, false),
            ] {
                for (&cid, &delta) in cells.iter().zip(moves) {
                    let mut probe = lg.clone();
                    if is_x {
                        probe.xs[cid] += delta;
                    } else {
                        probe.ys[cid] += delta;
                    }
                    let rep = check_legal(&design, &probe);
                    if !rep.is_legal() {
                        return Some(format!("seed {seed}: cell {cid} move illegal: {rep:?}"));
                    }
                }
            }
            // full-signature intermediate placement stays legal
            let n = (cands.x_cells.len().min(cands.y_cells.len())).min(24);
            if n >= 2 {
                let sig = Signature::random(n, seed);
                if let Ok((_, wm)) = icmarks::dw::insert_dw(
                    &design,
                    &lg,
                    &cs,
                    &sig,
                    &cands,
                    seed,
                    &icmarks::placer::DetailedParams { passes: 0, reorder_window: 0, slide_to_flat_optimum: false },
                ) {
                    // zero-pass insertion returns the intermediate placement
                    let mut itr = lg.clone();
                    for (&c, &(ix, iy)) in wm.cells.iter().zip(&wm.itr_positions) {
                        itr.xs[c] = ix;
                        itr.ys[c] = iy;
                    }
                    let rep = check_legal(&design, &itr);
                    if !rep.is_legal() {
                        return Some(format!("seed {seed}: intermediate placement illegal"));
                    }
                }
            }
            None
        })
        .collect();
    assert!(failures.is_empty(), "{failures:?}");
    println!("criterion 7 candidate soundness: PASS (100 designs, all candidates re-checked)");
}

/// Criterion 8: byte-identical placements, certificates, and CSVs across
/// repeated runs and across worker-pool sizes 1 and 4.
#[test]
fn criterion_8_determinism() {
    let design = design_2k();
    let sig = sig50(5);
    let insert = || {
        insert_icmarks(
            &design,
            &sig,
            &GwParams::band_for_bits(&design, sig.len()),
            &DwParams::for_design(&design),
            &PlaceParams::default(),
            5,
        )
        .unwrap()
    };
    let a = insert();
    let b = insert();
    assert_eq!(a.placement, b.placement, "placements differ across runs");
    assert_eq!(
        certificate::to_string(&a.certificate),
        certificate::to_string(&b.certificate),
        "certificates differ across runs"
    );

    // attack sweep CSV across pool sizes
    let ctx = AttackContext {
        design: &design,
        cert: &a.certificate,
        baseline_hpwl: a.original.hpwl,
    };
    let jobs: Vec<AttackJob> = (1..=6)
        .map(|s| AttackJob {
            kind: if s % 2 == 0 { AttackKind::Sla } else { AttackKind::Cpa },
            param: 0.01,
            seed: s,
        })
        .collect();
    let guess = GwParams::band_for_bits(&design, 50);
    let csv_for = |threads: usize| -> String {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let outcomes =
            pool.install(|| icmarks::attacks::run_attack_sweep(&ctx, &a.placement, &jobs, &guess));
        let rows: Vec<AttackRow> =
            outcomes.iter().map(|o| AttackRow::from_outcome("icmarks", o)).collect();
        attack_csv(&rows)
    };
    let csv1 = csv_for(1);
    let csv4 = csv_for(4);
    assert_eq!(csv1, csv4, "CSV differs across worker-pool sizes");
    let csv1b = csv_for(1);
    assert_eq!(csv1, csv1b, "CSV differs across repeated runs");
    println!("criterion 8 determinism: PASS (2 runs byte-identical, pools 1 and 4 agree)");
}

/// Monotonicity probe from the attacks module invariants: for SLA and CPA,
/// the median WER over 5 seeds is non-increasing in the attack fraction.
#[test]
fn attack_monotonicity_probe() {
    let design = generate_synthetic(&SynthConfig::new(1500, 1800, 0.6), 555).unwrap();
    let sut = insert_scheme(&design, Scheme::CellScattering, 3);
    let ctx = AttackContext {
        design: &design,
        cert: &sut.cert,
        baseline_hpwl: sut.baseline_hpwl,
    };
    let guess = GwParams::band_for_bits(&design, 50);
    for kind in [AttackKind::Sla, AttackKind::Cpa] {
        let mut last_median = f64::INFINITY;
        for fraction in [0.001, 0.005, 0.01, 0.1] {
            let mut wers: Vec<f64> = (1..=5u64)
                .into_par_iter()
                .map(|seed| {
                    run_attack(
                        &ctx,
                        &sut.placement,
                        &AttackJob { kind, param: fraction, seed },
                        &guess,
                    )
                    .report
                    .wer
                })
                .collect();
            wers.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = wers[2];
            assert!(
                median <= last_median + 1e-9,
                "{kind:?}: median wer rose from {last_median} to {median} at fraction {fraction}"
            );
            last_median = median;
        }
    }
    println!("attack monotonicity probe: PASS");
}

/// Paired-run comparison: scattering (moves after detailed placement, no
/// compensation) never beats the compensated detailed watermark on the same
/// design, seed, and signature.
#[test]
fn scattering_never_beats_dw_on_quality() {
    let design = design_2k();
    let sig = sig50(13);
    let place = PlaceParams::default().with_seed(13);
    let dw_ins =
        insert_dw_certified(&design, &sig, &DwParams::for_design(&design), &place, 13).unwrap();
    let base = place_pipeline(&design, &RegionConstraintSet::none(), &place).unwrap();
    let (scattered, wm) =
        baselines::cell_scattering_insert(&design, &base.detailed, &sig, 13).unwrap();
    assert!(matches!(wm.payload, BaselinePayload::CellScattering { .. }));
    let dw_pwlr = dw_ins.hpwl as f64 / dw_ins.original.hpwl as f64;
    let cs_pwlr = icmarks::metrics::hpwl(&design, &scattered) as f64 / base.hpwl as f64;
    assert!(
        cs_pwlr >= dw_pwlr,
        "scattering pwlr {cs_pwlr} unexpectedly beats dw pwlr {dw_pwlr}"
    );
    println!("paired quality comparison: PASS (scattering {cs_pwlr:.6} >= dw {dw_pwlr:.6})");
}
