//! Batch front-end: generate, place, watermark, attack, verify, report.
//!
//! Exit codes: 0 ok, 1 pipeline error, 2 usage error, 3 verification below
//! threshold. Every run writes a `config.resolved` echo of its effective
//! parameters under --out so results are reproducible.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use icmarks::attacks::{self, AttackContext, AttackJob, AttackKind};
use icmarks::baselines::{self, BufferParams};
use icmarks::bookshelf;
use icmarks::certificate::{self, Certificate, Scheme};
use icmarks::design::{Design, Placement, Stage};
use icmarks::dump;
use icmarks::dw::Signature;
use icmarks::gw::GwParams;
use icmarks::icmarks::{
    extract_certificate, insert_dw_certified, insert_gw_certified, insert_icmarks, DwParams,
};
use icmarks::metrics::{check_legal, hpwl, pwlr};
use icmarks::placer::{place_pipeline, PlaceParams, RegionConstraintSet};
use icmarks::report::{self, AttackRow, EvalRow};
use icmarks::synth::{generate_synthetic, SynthConfig};
use icmarks::timing::{default_delay_model, timing_analyze};

#[derive(Parser)]
#[command(name = "icmarks", version, about = "Placement watermarking laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic design
    Gen(GenArgs),
    /// Run the plain three-stage placement pipeline
    Place(PlaceArgs),
    /// Insert a watermark and write the certificate
    Watermark(WatermarkArgs),
    /// Run a removal attack against a watermarked placement
    Attack(AttackArgs),
    /// Extract a watermark and check it against the ownership threshold
    Verify(VerifyArgs),
    /// Aggregate outcome CSV files into summary tables
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    cells: usize,
    #[arg(long)]
    nets: Option<usize>,
    #[arg(long, default_value_t = 0)]
    macros: usize,
    #[arg(long, default_value_t = 0)]
    fences: usize,
    #[arg(long, default_value_t = 0.6)]
    util: f64,
    #[arg(long, default_value_t = 1.0)]
    aspect: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlaceArgs {
    /// Design input: canonical dump (.wmdsn) or Bookshelf (.aux)
    #[arg(long)]
    design: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Density target for global placement
    #[arg(long, default_value_t = 0.8)]
    density: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct WatermarkArgs {
    #[arg(long)]
    design: PathBuf,
    /// gw | dw | icmarks | row_parity | cell_scattering | buffer_insertion
    #[arg(long)]
    scheme: String,
    /// Signature bits as 0b... or 0x...
    #[arg(long)]
    signature: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Region-scoring weights (gw / icmarks)
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Window side in placement units (gw / icmarks); default sized from bits
    #[arg(long)]
    window: Option<i64>,
    #[arg(long)]
    stride: Option<i64>,
    /// Signature length for gw when no --signature is given
    #[arg(long)]
    bits: Option<usize>,
    /// Displacement units for dw / icmarks
    #[arg(long)]
    dx: Option<i64>,
    #[arg(long)]
    dy: Option<i64>,
    #[arg(long, default_value_t = 0.8)]
    density: f64,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    design: PathBuf,
    /// The watermarked placement under attack
    #[arg(long)]
    placement: PathBuf,
    #[arg(long)]
    cert: PathBuf,
    /// The original non-watermarked placement (quality baseline)
    #[arg(long)]
    original: PathBuf,
    /// sla | cpa | oa | ara
    #[arg(long)]
    attack: String,
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    topk: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Additional seeds for a sweep (only outcome.csv rows are written)
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Worker pool size for sweeps
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Adversary's guessed scoring weights for ara
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    window: Option<i64>,
    #[arg(long)]
    stride: Option<i64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    design: PathBuf,
    #[arg(long)]
    placement: PathBuf,
    #[arg(long)]
    cert: PathBuf,
    /// Ownership threshold on the extraction rate
    #[arg(long, default_value_t = 90.0)]
    wer_min: f64,
}

#[derive(Args)]
struct ReportArgs {
    /// Outcome CSV files (schema detected from the header)
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

/// Seed resolution: flag, then WM_SEED, then 1.
fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| std::env::var("WM_SEED").ok().and_then(|v| v.parse().ok())).unwrap_or(1)
}

fn load_design(path: &Path) -> Result<Design> {
    let design = match path.extension().and_then(|e| e.to_str()) {
        Some("aux") => bookshelf::parse_bookshelf(path)?,
        _ => dump::load(path)?,
    };
    design.validate().map_err(|e| anyhow!("design invariant violated: {e}"))?;
    Ok(design)
}

fn write_config(out: &Path, entries: &[(&str, String)]) -> Result<()> {
    let mut text = String::new();
    for (k, v) in entries {
        writeln!(text, "{k} {v}").unwrap();
    }
    std::fs::write(out.join("config.resolved"), text)?;
    Ok(())
}

fn eval_row(
    design: &Design,
    placement: &Placement,
    scheme: &str,
    baseline_hpwl: i64,
    wer: f64,
    bits: usize,
) -> Result<EvalRow> {
    let h = hpwl(design, placement);
    let model = default_delay_model(design, placement, 0.1)?;
    let timing = timing_analyze(design, placement, &model)?;
    let wns = if timing.wns.is_finite() { timing.wns } else { 0.0 };
    Ok(EvalRow {
        design: design.name.clone(),
        scheme: scheme.to_string(),
        stage: placement.stage.as_str().to_string(),
        hpwl: h,
        pwlr: pwlr(h, baseline_hpwl)?,
        tns: timing.tns,
        wns,
        wer,
        legal: check_legal(design, placement).is_legal(),
        bits,
    })
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let seed = resolve_seed(args.seed);
    let mut cfg =
        SynthConfig::new(args.cells, args.nets.unwrap_or(args.cells + args.cells / 10), args.util);
    cfg.n_macros = args.macros;
    cfg.n_fences = args.fences;
    cfg.die_aspect = args.aspect;
    let design = generate_synthetic(&cfg, seed)?;
    std::fs::create_dir_all(&args.out)?;
    dump::save(&design, &args.out.join("design.wmdsn"))?;
    bookshelf::write_bookshelf(&design, &args.out, "design")?;
    write_config(
        &args.out,
        &[
            ("command", "gen".into()),
            ("cells", args.cells.to_string()),
            ("nets", cfg.n_nets.to_string()),
            ("macros", args.macros.to_string()),
            ("fences", args.fences.to_string()),
            ("util", args.util.to_string()),
            ("aspect", args.aspect.to_string()),
            ("seed", seed.to_string()),
        ],
    )?;
    println!(
        "generated {}: {} cells, {} nets, die {}x{}",
        design.name,
        design.cells.len(),
        design.nets.len(),
        design.die.width(),
        design.die.height()
    );
    Ok(())
}

fn cmd_place(args: &PlaceArgs) -> Result<()> {
    let seed = resolve_seed(args.seed);
    let design = load_design(&args.design)?;
    let mut params = PlaceParams::default().with_seed(seed);
    params.density_target = args.density;
    let result = place_pipeline(&design, &RegionConstraintSet::none(), &params)?;
    std::fs::create_dir_all(&args.out)?;
    bookshelf::write_pl(&design, &result.detailed, &args.out.join("placement.pl"))?;
    let row = eval_row(&design, &result.detailed, "none", result.hpwl, 0.0, 0)?;
    std::fs::write(args.out.join("outcome.csv"), report::eval_csv(&[row]))?;
    write_config(
        &args.out,
        &[
            ("command", "place".into()),
            ("design", args.design.display().to_string()),
            ("seed", seed.to_string()),
            ("density", args.density.to_string()),
        ],
    )?;
    println!("placed {}: hpwl {}", design.name, result.hpwl);
    Ok(())
}

fn gw_params_from(args: &WatermarkArgs, design: &Design, bits: usize) -> GwParams {
    let mut p = match args.window {
        Some(w) => GwParams {
            window_w: w,
            window_h: w,
            stride: args.stride.unwrap_or(w),
            ..GwParams::for_design(design, bits)
        },
        None => GwParams::band_for_bits(design, bits),
    };
    if let Some(s) = args.stride {
        p.stride = s;
    }
    if let Some(a) = args.alpha {
        p.alpha = a;
    }
    if let Some(b) = args.beta {
        p.beta = b;
    }
    if let Some(g) = args.gamma {
        p.gamma = g;
    }
    p
}

fn cmd_watermark(args: &WatermarkArgs) -> Result<()> {
    let seed = resolve_seed(args.seed);
    let scheme = Scheme::parse(&args.scheme.replace('-', "_")).ok_or_else(|| {
        anyhow!(
            "unknown scheme `{}` (expected gw, dw, icmarks, row_parity, cell_scattering, buffer_insertion)",
            args.scheme
        )
    })?;
    let design = load_design(&args.design)?;
    let signature = match &args.signature {
        Some(s) => Some(Signature::parse(s).map_err(|e| anyhow!("bad signature: {e}"))?),
        None => None,
    };
    if signature.is_none() && scheme != Scheme::Gw {
        bail!("--signature is required for scheme {scheme}");
    }
    let mut place_params = PlaceParams::default().with_seed(seed);
    place_params.density_target = args.density;
    let dw_params =
        DwParams { d_x: args.dx.unwrap_or(1), d_y: args.dy.unwrap_or(design.row_height) };

    std::fs::create_dir_all(&args.out)?;
    let bits = signature.as_ref().map(|s| s.len()).or(args.bits).unwrap_or(50);

    // Each arm yields: final placement, certificate, original placement,
    // and the design the certificate is bound to (modified for buffers).
    let (placement, cert, original, bound_design): (Placement, Certificate, Placement, Design) =
        match scheme {
            Scheme::Icmarks => {
                let sig = signature.clone().unwrap();
                let gwp = gw_params_from(args, &design, bits);
                let ins = insert_icmarks(&design, &sig, &gwp, &dw_params, &place_params, seed)?;
                (ins.placement, ins.certificate, ins.original.detailed, design.clone())
            }
            Scheme::Gw => {
                let gwp = gw_params_from(args, &design, bits);
                let ins = insert_gw_certified(&design, &gwp, &place_params, seed)?;
                (ins.placement, ins.certificate, ins.original.detailed, design.clone())
            }
            Scheme::Dw => {
                let sig = signature.clone().unwrap();
                let ins = insert_dw_certified(&design, &sig, &dw_params, &place_params, seed)?;
                (ins.placement, ins.certificate, ins.original.detailed, design.clone())
            }
            Scheme::RowParity => {
                let sig = signature.clone().unwrap();
                let base = place_pipeline(&design, &RegionConstraintSet::none(), &place_params)?;
                let (p, wm) = baselines::row_parity_insert(&design, &base.legalized, &sig, seed)?;
                let cert = Certificate {
                    scheme,
                    seed,
                    signature: Some(sig),
                    fingerprint: dump::fingerprint(&design),
                    gw: None,
                    dw: None,
                    dw_units: None,
                    baseline: Some(wm),
                };
                (p, cert, base.detailed, design.clone())
            }
            Scheme::CellScattering => {
                let sig = signature.clone().unwrap();
                let base = place_pipeline(&design, &RegionConstraintSet::none(), &place_params)?;
                let (p, wm) =
                    baselines::cell_scattering_insert(&design, &base.detailed, &sig, seed)?;
                let cert = Certificate {
                    scheme,
                    seed,
                    signature: Some(sig),
                    fingerprint: dump::fingerprint(&design),
                    gw: None,
                    dw: None,
                    dw_units: None,
                    baseline: Some(wm),
                };
                (p, cert, base.detailed, design.clone())
            }
            Scheme::BufferInsertion => {
                let sig = signature.clone().unwrap();
                let base = place_pipeline(&design, &RegionConstraintSet::none(), &place_params)?;
                let model = default_delay_model(&design, &base.detailed, 0.1)?;
                let params = BufferParams { margin_frac: 0.1, delay_model: model };
                let (d2, p, wm) =
                    baselines::buffer_insertion_insert(&design, &base.detailed, &sig, seed, &params)?;
                let cert = Certificate {
                    scheme,
                    seed,
                    signature: Some(sig),
                    fingerprint: dump::fingerprint(&d2),
                    gw: None,
                    dw: None,
                    dw_units: None,
                    baseline: Some(wm),
                };
                // extend the original placement with the buffer positions so
                // .pl files round-trip against the modified design
                let mut orig = base.detailed.clone();
                for c in d2.cells.iter().skip(design.cells.len()) {
                    orig.xs.push(p.xs[c.id]);
                    orig.ys.push(p.ys[c.id]);
                }
                (p, cert, orig, d2)
            }
        };

    // Quality baseline: HPWL of the original placement on the unmodified
    // design's netlist.
    let baseline_hpwl = hpwl(&design, &original_clamped(&original, design.cells.len()));
    bookshelf::write_pl(&bound_design, &placement, &args.out.join("placement.pl"))?;
    bookshelf::write_pl(&bound_design, &original, &args.out.join("original.pl"))?;
    certificate::save_certificate(&cert, &args.out.join("cert.wmcert"))?;
    if scheme == Scheme::BufferInsertion {
        dump::save(&bound_design, &args.out.join("design.wmdsn"))?;
    }
    let wer = extract_certificate(&bound_design, &placement, &cert)
        .map_err(|e| anyhow!("self-extraction failed: {e}"))?;
    let row =
        eval_row(&bound_design, &placement, cert.scheme.as_str(), baseline_hpwl, wer.wer, bits)?;
    std::fs::write(args.out.join("outcome.csv"), report::eval_csv(&[row.clone()]))?;
    write_config(
        &args.out,
        &[
            ("command", "watermark".into()),
            ("design", args.design.display().to_string()),
            ("scheme", cert.scheme.to_string()),
            (
                "signature",
                cert.signature.as_ref().map(|s| s.to_string()).unwrap_or_else(|| "-".into()),
            ),
            ("bits", bits.to_string()),
            ("seed", seed.to_string()),
            ("dx", dw_params.d_x.to_string()),
            ("dy", dw_params.d_y.to_string()),
            ("density", args.density.to_string()),
            ("pwlr_max", attacks::PWLR_THRESHOLD.to_string()),
            ("wer_min", attacks::WER_THRESHOLD.to_string()),
        ],
    )?;
    println!(
        "watermarked {} with {}: wer {} pwlr {}",
        design.name, cert.scheme, wer.wer, row.pwlr
    );
    Ok(())
}

/// Original placements for buffer insertion carry appended buffer cells;
/// the quality baseline uses only the original netlist's cells.
fn original_clamped(p: &Placement, n: usize) -> Placement {
    Placement::new(p.xs[..n].to_vec(), p.ys[..n].to_vec(), p.stage)
}

fn cmd_attack(args: &AttackArgs) -> Result<()> {
    let design = load_design(&args.design)?;
    let cert = certificate::load_certificate(&args.cert)?;
    let placement = bookshelf::read_pl(&design, &args.placement, Stage::Detailed)?;
    let original = bookshelf::read_pl(&design, &args.original, Stage::Detailed)?;
    let kind = AttackKind::parse(&args.attack)
        .ok_or_else(|| anyhow!("unknown attack `{}` (expected sla, cpa, oa, ara)", args.attack))?;
    let param = match kind {
        AttackKind::Sla | AttackKind::Cpa => args
            .fraction
            .ok_or_else(|| anyhow!("--fraction is required for {}", args.attack))?,
        AttackKind::Ara => args.topk.unwrap_or(1) as f64,
        AttackKind::Oa => 0.0,
    };
    let guess = GwParams {
        window_w: args.window.unwrap_or(10 * design.row_height),
        window_h: args.window.unwrap_or(10 * design.row_height),
        stride: args.stride.or(args.window).unwrap_or(10 * design.row_height),
        alpha: args.alpha.unwrap_or(0.1),
        beta: args.beta.unwrap_or(0.1),
        gamma: args.gamma.unwrap_or(1.0),
        signature_bits: 1,
    };
    let ctx = AttackContext {
        design: &design,
        cert: &cert,
        baseline_hpwl: hpwl(&design, &original),
    };
    std::fs::create_dir_all(&args.out)?;

    let seeds: Vec<u64> = if args.seeds.is_empty() {
        vec![resolve_seed(args.seed)]
    } else {
        args.seeds.clone()
    };
    let jobs: Vec<AttackJob> = seeds.iter().map(|&seed| AttackJob { kind, param, seed }).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.max(1))
        .build()
        .context("building worker pool")?;
    let outcomes = pool.install(|| attacks::run_attack_sweep(&ctx, &placement, &jobs, &guess));

    let rows: Vec<AttackRow> =
        outcomes.iter().map(|o| AttackRow::from_outcome(cert.scheme.as_str(), o)).collect();
    std::fs::write(args.out.join("outcome.csv"), report::attack_csv(&rows))?;
    if outcomes.len() == 1 {
        bookshelf::write_pl(&design, &outcomes[0].placement, &args.out.join("placement.pl"))?;
    }
    write_config(
        &args.out,
        &[
            ("command", "attack".into()),
            ("design", args.design.display().to_string()),
            ("placement", args.placement.display().to_string()),
            ("cert", args.cert.display().to_string()),
            ("attack", args.attack.clone()),
            ("param", param.to_string()),
            ("seeds", seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")),
            ("threads", args.threads.to_string()),
        ],
    )?;
    for (row, outcome) in rows.iter().zip(&outcomes) {
        println!(
            "{} {} seed {}: wer {} pwlr {} success {}",
            row.attack, row.param, row.seed, row.wer, row.pwlr, outcome.success()
        );
    }
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let design = load_design(&args.design)?;
    let cert = certificate::load_certificate(&args.cert)?;
    let placement = bookshelf::read_pl(&design, &args.placement, Stage::Detailed)?;
    let rep = extract_certificate(&design, &placement, &cert)?;
    let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "-".into());
    println!(
        "scheme {} wer_gw {} wer_dw {} wer {}",
        cert.scheme,
        fmt_opt(rep.wer_gw),
        fmt_opt(rep.wer_dw),
        rep.wer
    );
    Ok(if rep.wer >= args.wer_min { 0 } else { 3 })
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    if args.inputs.is_empty() {
        bail!("no input CSV files given");
    }
    let mut eval_rows = Vec::new();
    let mut attack_rows = Vec::new();
    for path in &args.inputs {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        match report::csv_kind(&text) {
            Some("eval") => eval_rows.extend(report::parse_eval_csv(&text)?),
            Some("attack") => attack_rows.extend(report::parse_attack_csv(&text)?),
            _ => bail!("{}: unrecognized CSV header", path.display()),
        }
    }
    std::fs::create_dir_all(&args.out)?;
    if !attack_rows.is_empty() {
        std::fs::write(
            args.out.join("attack_summary.csv"),
            report::summarize_attacks(&attack_rows),
        )?;
    }
    if !eval_rows.is_empty() {
        std::fs::write(
            args.out.join("capacity_summary.csv"),
            report::summarize_capacity(&eval_rows),
        )?;
    }
    write_config(
        &args.out,
        &[
            ("command", "report".into()),
            (
                "inputs",
                args.inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(","),
            ),
            ("eval_rows", eval_rows.len().to_string()),
            ("attack_rows", attack_rows.len().to_string()),
        ],
    )?;
    println!("aggregated {} eval and {} attack rows", eval_rows.len(), attack_rows.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<i32> = match &cli.command {
        Command::Gen(a) => cmd_gen(a).map(|_| 0),
        Command::Place(a) => cmd_place(a).map(|_| 0),
        Command::Watermark(a) => cmd_watermark(a).map(|_| 0),
        Command::Attack(a) => cmd_attack(a).map(|_| 0),
        Command::Verify(a) => cmd_verify(a),
        Command::Report(a) => cmd_report(a).map(|_| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
