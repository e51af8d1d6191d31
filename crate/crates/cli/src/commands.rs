use std::fmt::Write as _;
use std::path::PathBuf;

use ptspec::linalg::C64;
use ptspec::tensor_sum::{run_campaign, CampaignConfig};
use ptspec::transversal::{
    branch_curves, conjugate_defect, coupling, exceptional_set, longitudinal_spectrum, mode_curves, mode_curves_csv, secular_roots,
    transversal_modes, waveguide_m_sets, BranchTable, MSetOptions, Rect, V0Spec,
};
use ptspec::waveguide2d::{
    assemble_waveguide, eigs_in_disk, eigs_near, imag_bound_fit, pseudospectrum_map, realness_report, CouplingSpec, GridSpec,
    PotentialSpec, PseudoOptions, WaveguideOperator,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::output::{num, Meta, Writer};
use crate::{
    BranchesArgs, Cli, Command, Failure, Figure, FiguresArgs, MsetsArgs, OperatorArgs, PseudospectrumArgs, SecularArgs, Spacing,
    Spectrum2dArgs, TensorCheckArgs, Tolerances, TransversalArgs, V0Kind,
};

/// On-disk run configuration.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    command: Option<String>,
    #[serde(default)]
    parameters: Map<String, Value>,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
    tolerances: Option<Tolerances>,
}

/// Canonical form hashed into every output header.
#[derive(Serialize)]
struct RunConfig<'a> {
    command: &'a str,
    parameters: &'a Value,
    seed: u64,
    tolerances: Tolerances,
}

struct Context {
    out_dir: PathBuf,
    seed: u64,
    tol: Tolerances,
    params: Map<String, Value>,
    command: &'static str,
}

impl Context {
    /// Overlay the config parameters on the flag values and re-validate.
    fn resolve<T: Serialize + DeserializeOwned>(&self, flags: &T) -> Result<(T, Value), Failure> {
        let mut v = serde_json::to_value(flags).map_err(|e| Failure::Validation(e.to_string()))?;
        let obj = v.as_object_mut().expect("argument structs serialize to objects");
        for (k, val) in &self.params {
            if !obj.contains_key(k) {
                return Err(Failure::Validation(format!("unknown parameter {k:?} for {}", self.command)));
            }
            obj.insert(k.clone(), val.clone());
        }
        let args: T = serde_json::from_value(v.clone()).map_err(|e| Failure::Validation(format!("invalid parameters: {e}")))?;
        // re-serialize so the hash sees normalized values
        let canonical = serde_json::to_value(&args).map_err(|e| Failure::Validation(e.to_string()))?;
        Ok((args, canonical))
    }

    fn writer(&self, parameters: &Value, statement: &str) -> Result<Writer, Failure> {
        let rc = RunConfig { command: self.command, parameters, seed: self.seed, tolerances: self.tol };
        let canonical = serde_json::to_string(&rc).map_err(|e| Failure::Validation(e.to_string()))?;
        Ok(Writer::new(&self.out_dir, Meta::new(self.command, &canonical, statement))?)
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Transversal(_) => "transversal",
        Command::Msets(_) => "msets",
        Command::Secular(_) => "secular",
        Command::Branches(_) => "branches",
        Command::TensorCheck(_) => "tensor-check",
        Command::Spectrum2d(_) => "spectrum2d",
        Command::Pseudospectrum(_) => "pseudospectrum",
        Command::Figures(_) => "figures",
    }
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    let command = command_name(&cli.command);
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str::<ConfigFile>(&text).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?
        }
        None => ConfigFile::default(),
    };
    if let Some(c) = &file.command {
        if c != command {
            return Err(Failure::Validation(format!("config is for {c:?}, not {command:?}")));
        }
    }
    let ctx = Context {
        out_dir: file.output_dir.unwrap_or(cli.out_dir),
        seed: file.seed.unwrap_or(cli.seed),
        tol: file.tolerances.unwrap_or_default(),
        params: file.parameters,
        command,
    };
    let written = match &cli.command {
        Command::Transversal(a) => transversal(&ctx, a),
        Command::Msets(a) => msets(&ctx, a),
        Command::Secular(a) => secular(&ctx, a),
        Command::Branches(a) => branches(&ctx, a),
        Command::TensorCheck(a) => tensor_check(&ctx, a),
        Command::Spectrum2d(a) => spectrum2d(&ctx, a),
        Command::Pseudospectrum(a) => pseudospectrum(&ctx, a),
        Command::Figures(a) => figures(&ctx, a),
    }?;
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

type Written = Result<Vec<PathBuf>, Failure>;

fn transversal(ctx: &Context, flags: &TransversalArgs) -> Written {
    let (args, params) = ctx.resolve(flags)?;
    if args.modes == 0 {
        return Err(Failure::Validation("modes must be positive".into()));
    }
    let modes = transversal_modes(args.a, args.alpha0, args.modes - 1)?;
    let exceptional = exceptional_set(args.a, args.alpha0)?;
    let mut w = ctx.writer(
        &params,
        "transversal Robin eigenvalues are alpha0^2 and (pi n / 2a)^2; Krein types alternate in eigenvalue order \
         and a not-definite pair appears exactly when alpha0 = pi n / 2a",
    )?;
    let mut rows = String::new();
    for (i, m) in modes.iter().enumerate() {
        let _ = writeln!(rows, "{i},{},{},{},{}", m.n, num(m.lambda.re), num(m.indicator), m.type_tag.short());
    }
    let notes = vec![format!("a = {}, alpha0 = {}", args.a, args.alpha0), format!("exceptional mu indices: {exceptional:?}")];
    w.csv("transversal.csv", &notes, "mu_index,n,lambda,indicator,type", &rows)?;
    Ok(w.written)
}

fn v0_spec(args: &MsetsArgs) -> V0Spec {
    if let Some(s) = &args.v0_spec {
        return s.clone();
    }
    match args.v0 {
        V0Kind::Zero => V0Spec::Zero,
        V0Kind::Constant => V0Spec::Constant { c: args.v0_constant },
        V0Kind::SquareWell => V0Spec::SquareWell { depth: args.well_depth, width: args.well_width },
    }
}

fn msets(ctx: &Context, flags: &MsetsArgs) -> Written {
    let (args, params) = ctx.resolve(flags)?;
    let long = longitudinal_spectrum(&v0_spec(&args))?;
    let opts = MSetOptions { window_max: args.window_max, max_modes: args.max_modes };
    let d = waveguide_m_sets(args.a, args.alpha0, &long, &opts)?;
    let text = json!({
        "sigma_pp": d.sigma_pp.to_string(),
        "sigma_mm": d.sigma_mm.to_string(),
        "sigma_00": d.sigma_00.to_string(),
        "m_plus": d.m_plus.to_string(),
        "m_minus": d.m_minus.to_string(),
        "m_zero": d.m_zero.to_string(),
    });
    let mut w = ctx.writer(
        &params,
        "the waveguide spectrum splits into positive-type, negative-type and not-definite parts given by sums of typed \
         transversal eigenvalues and the longitudinal spectrum",
    )?;
    let body = json!({ "parameters": params, "longitudinal": long, "decomposition": d, "text": text });
    w.json("msets.json", &body)?;
    Ok(w.written)
}

fn rect(re: (f64, f64), im: (f64, f64)) -> Result<Rect, Failure> {
    Ok(Rect::new(re, im)?)
}

fn secular(ctx: &Context, flags: &SecularArgs) -> Written {
    let (args, params) = ctx.resolve(flags)?;
    let roots = secular_roots(args.a, args.alpha0, args.beta0, rect(args.re, args.im)?, ctx.tol.endpoint)?;
    let mut w = ctx.writer(
        &params,
        "transversal eigenvalues for the coupling beta0 + i alpha0 are k^2 at the roots k of the secular equation",
    )?;
    let mut rows = String::new();
    for r in &roots.roots {
        let _ = writeln!(rows, "{},{},{},{},{:e}", num(r.k.re), num(r.k.im), num(r.lambda.re), num(r.lambda.im), r.residual);
    }
    let notes = vec![
        format!("a = {}, alpha0 = {}, beta0 = {}", args.a, args.alpha0, args.beta0),
        format!("region re {:?} im {:?}; winding number {}", roots.region.re, roots.region.im, roots.winding),
    ];
    w.csv("secular_roots.csv", &notes, "k_re,k_im,lambda_re,lambda_im,residual", &rows)?;
    Ok(w.written)
}

fn beta_samples(lo: f64, hi: f64, n: usize, spacing: Spacing) -> Result<Vec<f64>, Failure> {
    if n < 2 || !(lo < hi) {
        return Err(Failure::Validation(format!("need samples >= 2 and beta0_min < beta0_max, got {n}, [{lo}, {hi}]")));
    }
    let t = |i: usize| i as f64 / (n - 1) as f64;
    Ok(match spacing {
        Spacing::Linear => (0..n).map(|i| lo + (hi - lo) * t(i)).collect(),
        Spacing::Log => {
            if lo * hi <= 0.0 {
                return Err(Failure::Validation("log spacing needs a beta0 range of one sign".into()));
            }
            let s = lo.signum();
            let (l0, l1) = (lo.abs().ln(), hi.abs().ln());
            (0..n).map(|i| s * (l0 + (l1 - l0) * t(i)).exp()).collect()
        }
    })
}

/// Branches in the order: upper non-real, lower non-real, real.
fn follow_branches(args: &BranchesArgs, tol: f64) -> Result<(Vec<f64>, Vec<BranchTable>), Failure> {
    let samples = beta_samples(args.beta0_min, args.beta0_max, args.samples, args.spacing)?;
    let mut starts = args.start.clone();
    if starts.is_empty() {
        let found = secular_roots(args.a, args.alpha0, samples[0], rect(args.search_re, args.search_im)?, tol)?;
        starts = found.roots.iter().map(|r| r.k).collect();
        let real_tol = 1e-10;
        let rank = |k: &C64| if k.im > real_tol { 0 } else if k.im < -real_tol { 1 } else { 2 };
        starts.sort_by(|x, y| rank(x).cmp(&rank(y)).then(x.re.total_cmp(&y.re)));
        if starts.is_empty() {
            return Err(Failure::Numerical("no secular roots in the search rectangle".into()));
        }
    }
    let tables = branch_curves(args.a, args.alpha0, &samples, &starts, tol)?;
    Ok((samples, tables))
}

fn write_branches(w: &mut Writer, prefix: &str, tables: &[BranchTable]) -> Result<(), Failure> {
    for (i, t) in tables.iter().enumerate() {
        let kind = if t.rows.iter().all(|r| r.k.im.abs() <= 1e-10) { "real" } else { "non-real" };
        let mut notes = vec![format!("seed k = {},{}; {kind} branch", t.seed.re, t.seed.im)];
        if kind == "non-real" {
            let partner = (0..tables.len()).filter(|&j| j != i).min_by(|&x, &y| {
                conjugate_defect(t, &tables[x]).total_cmp(&conjugate_defect(t, &tables[y]))
            });
            if let Some(j) = partner {
                notes.push(format!("conjugate partner: branch {}, max |k - conj(k)| = {:e}", j + 1, conjugate_defect(t, &tables[j])));
            }
        }
        w.csv(&format!("{prefix}{}.csv", i + 1), &notes, "beta0,k_re,k_im,lambda_re,lambda_im", &t.csv_rows())?;
    }
    Ok(())
}

fn branches(ctx: &Context, flags: &BranchesArgs) -> Written {
    let (args, params) = ctx.resolve(flags)?;
    let (_, tables) = follow_branches(&args, ctx.tol.endpoint)?;
    let mut w = ctx.writer(&params, "secular roots depend continuously on beta0 and non-real roots come in conjugate pairs")?;
    write_branches(&mut w, "branch_", &tables)?;
    Ok(w.written)
}

fn tensor_check(ctx: &Context, flags: &TensorCheckArgs) -> Written {
    let (args, params) = ctx.resolve(flags)?;
    let mut cfg = CampaignConfig { instances: args.instances, seed: ctx.seed, max_product_dim: args.max_product_dim, ..CampaignConfig::default() };
    cfg.factor.classify.sign_tol = ctx.tol.gram;
    cfg.compare.oracle.sign_tol = ctx.tol.gram;
    cfg.factor.invariance_tol = ctx.tol.residual;
    let report = run_campaign(&cfg);
    let mut w = ctx.writer(
        &params,
        "points of a Kronecker sum of J-self-adjoint matrices lying in exactly one of the sets M+ and M- are of that \
         definite type; points in their overlap or in M0 are not",
    )?;
    w.json("campaign.json", &report)?;
    let mut rows = String::new();
    for r in &report.instances {
        let _ = writeln!(
            rows,
            "{},{:?},{},{},{},{},{},{},{},{},{}",
            r.index,
            r.kind,
            r.dims.0,
            r.dims.1,
            u8::from(r.has_jordan),
            u8::from(r.has_overlap),
            r.points,
            r.violations.len(),
            r.oracle_failures,
            u8::from(r.error.is_some()),
            r.must_be_plus + r.must_be_minus + r.must_be_not_definite,
        );
    }
    let notes = vec![format!(
        "violations {}, jordan instances {}, overlap instances {}, failed instances {}",
        report.total_violations, report.jordan_instances, report.overlap_instances, report.failed_instances
    )];
    w.csv(
        "campaign.csv",
        &notes,
        "index,kind,dim1,dim2,jordan,overlap,points,violations,oracle_failures,failed,constrained_points",
        &rows,
    )?;
    if report.total_violations > 0 {
        eprintln!("warning: {} prediction violations", report.total_violations);
    }
    if report.failed_instances > 0 {
        return Err(Failure::Numerical(format!("{} instances failed; see campaign.json", report.failed_instances)));
    }
    Ok(w.written)
}

fn build_operator(op: &OperatorArgs) -> Result<WaveguideOperator, Failure> {
    let grid = GridSpec { a: op.a, lx: op.lx, nx: op.nx, ny: op.ny, x_boundary: op.x_boundary.into() };
    let base = coupling(op.alpha0, op.beta0);
    let alpha = op.coupling.clone().unwrap_or(if op.bump_height == 0.0 {
        CouplingSpec::Constant { alpha: base }
    } else {
        CouplingSpec::ConstantPlusBump { base, center: op.bump_center, width: op.bump_width, height: C64::new(0.0, op.bump_height) }
    });
    let v = op.potential.clone().unwrap_or(PotentialSpec::Zero);
    Ok(assemble_waveguide(&grid, &alpha, &v)?)
}

fn spectrum2d(ctx: &Context, flags: &Spectrum2dArgs) -> Written {
    let (args, params) = ctx.resolve(flags)?;
    let op = build_operator(&args.op)?;
    let mut pairs = match args.radius {
        Some(r) => eigs_in_disk(&op, args.target, r, args.count)?,
        None => eigs_near(&op, args.target, args.count)?,
    };
    if let Some(p) = pairs.iter().find(|p| p.residual > ctx.tol.residual) {
        return Err(Failure::Numerical(format!("eigenpair at {} has residual {:e}", p.value, p.residual)));
    }
    pairs.sort_by(|x, y| x.value.re.total_cmp(&y.value.re).then(x.value.im.total_cmp(&y.value.im)));
    let values: Vec<C64> = pairs.iter().map(|p| p.value).collect();
    let window = args.window.unwrap_or_else(|| {
        let lo = values.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        let hi = values.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    });
    let report = realness_report(&values, window, args.realness_tol, None);
    let mut w = ctx.writer(&params, "eigenvalues of the PT-symmetric waveguide in a definite-type window are real")?;
    let mut rows = String::new();
    for p in &pairs {
        let _ = writeln!(rows, "{},{},{:e}", num(p.value.re), num(p.value.im), p.residual);
    }
    let notes = vec![format!("order {}, pt defect {:e}", op.order(), op.pt_defect())];
    w.csv("eigenvalues.csv", &notes, "re,im,residual", &rows)?;
    let body = json!({ "parameters": params, "order": op.order(), "pt_defect": op.pt_defect(), "realness": report });
    w.json("realness.json", &body)?;
    println!("{} eigenvalues, {} flagged non-real in [{}, {}]", values.len(), report.flagged.len(), window.0, window.1);
    Ok(w.written)
}

fn pseudospectrum(ctx: &Context, flags: &PseudospectrumArgs) -> Written {
    let (args, params) = ctx.resolve(flags)?;
    let op = build_operator(&args.op)?;
    let opts = PseudoOptions { dense_limit: args.dense_limit, lanczos_steps: args.lanczos_steps, seed: ctx.seed };
    let map = pseudospectrum_map(&op, rect(args.re, args.im)?, args.mx, args.my, &opts)?;
    let window = args.fit_window.unwrap_or(args.re);
    let band = args.fit_band.unwrap_or((args.im.0.abs().min(args.im.1.abs()), args.im.0.abs().max(args.im.1.abs())));
    let fit = imag_bound_fit(&map, window, band);
    let mut w = ctx.writer(
        &params,
        "near spectrum of definite type |Im lambda| <= M sigma_min^(1/m), with m = 1 in a definite-type window",
    )?;
    let flagged = map.samples.iter().filter(|s| s.flagged).count();
    let notes = vec![format!("order {}, {} path, {flagged} flagged nodes", op.order(), if map.dense { "dense" } else { "sparse" })];
    w.csv("pseudospectrum.csv", &notes, "re,im,sigma_min,flagged", &map.csv_rows())?;
    let body = match &fit {
        Ok(f) => json!({ "parameters": params, "window": window, "band": band, "fit": f }),
        Err(e) => json!({ "parameters": params, "window": window, "band": band, "fit": null, "fit_error": e.to_string() }),
    };
    w.json("fit.json", &body)?;
    if let Ok(f) = &fit {
        println!("fitted exponent 1/m = {:.4}, M = {:.4}", f.exponent, f.prefactor);
    }
    Ok(w.written)
}

fn figures(ctx: &Context, flags: &FiguresArgs) -> Written {
    let (args, params) = ctx.resolve(flags)?;
    match args.which {
        Figure::Fig1 => {
            let (lo, hi) = args.alpha0_range;
            if args.alpha0_points < 2 || !(lo < hi) {
                return Err(Failure::Validation("fig1 needs alpha0_points >= 2 and a non-empty range".into()));
            }
            let grid: Vec<f64> = (0..args.alpha0_points).map(|i| lo + (hi - lo) * i as f64 / (args.alpha0_points - 1) as f64).collect();
            let pts = mode_curves(args.a, &grid, args.modes)?;
            let mut w = ctx.writer(&params, "lowest transversal eigenvalues versus alpha0 with their Krein types")?;
            w.csv("fig1.csv", &[], "alpha0,mu_index,lambda,type", &mode_curves_csv(&pts))?;
            Ok(w.written)
        }
        Figure::Fig2 => {
            let long = longitudinal_spectrum(&V0Spec::Zero)?;
            let mut rows = String::new();
            for &alpha0 in &args.alpha0_values {
                let d = waveguide_m_sets(args.a, alpha0, &long, &MSetOptions { window_max: Some(args.window_max), ..MSetOptions::default() })?;
                let sets = [
                    ("sigma_pp", &d.sigma_pp),
                    ("sigma_mm", &d.sigma_mm),
                    ("sigma_00", &d.sigma_00),
                    ("m_plus", &d.m_plus),
                    ("m_minus", &d.m_minus),
                    ("m_zero", &d.m_zero),
                ];
                for (name, set) in sets {
                    for i in set.intervals() {
                        let _ = writeln!(rows, "{alpha0},{name},{},{},{},{}", num(i.lo()), num(i.hi()), u8::from(i.lo_closed()), u8::from(i.hi_closed()));
                    }
                }
                for (mu, t) in d.mu.iter().zip(&d.mu_types) {
                    let _ = writeln!(rows, "{alpha0},mu_{},{mu},{mu},1,1", t.short());
                }
            }
            let mut w = ctx.writer(&params, "bottom of the unperturbed waveguide spectrum and the sets M+, M-, M0")?;
            let notes = vec![format!("sets truncated at {}", args.window_max)];
            w.csv("fig2.csv", &notes, "alpha0,set,lo,hi,lo_closed,hi_closed", &rows)?;
            Ok(w.written)
        }
        Figure::Fig3 => {
            let b = BranchesArgs {
                a: args.a,
                alpha0: args.alpha0,
                beta0_min: args.beta0_min,
                beta0_max: args.beta0_max,
                samples: args.samples,
                spacing: Spacing::Linear,
                start: Vec::new(),
                search_re: (0.5, 2.5),
                search_im: (-0.5, 0.5),
            };
            let (_, tables) = follow_branches(&b, ctx.tol.endpoint)?;
            let mut w = ctx.writer(
                &params,
                "for coupling i + beta0 with small beta0 < 0 two conjugate non-real branches and one real branch emanate \
                 from the exceptional point",
            )?;
            write_branches(&mut w, "fig3_branch_", &tables)?;
            Ok(w.written)
        }
    }
}
