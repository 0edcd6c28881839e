use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use ringamp::amplitude::{bloch_twist, gl_coefficients};
use ringamp::glsolver::{gl_integrate, GlField, GlOptions, GlRecorder};
use ringamp::model::ModelFile;
use ringamp::scan::{scaling_experiment, summarize, write_records_csv, ChaosProtocol, HopfOptions};
use ringamp::simulate::{
    integrate, lyapunov_spectrum, random_state, IntegrateOptions, LyapunovOptions, Method,
};
use ringamp::spectrum::{continuous_spectrum, find_critical_points, CriticalData};
use ringamp::{make_duffing_ring, DuffingRingParams, RingModel};

use crate::config::{check_output, pick, Profile};
use crate::{CliError, Context, ModelArgs};

const DEFAULT_NODES: usize = 30;

pub fn load_model(ctx: &Context, args: &ModelArgs) -> Result<RingModel, CliError> {
    let cfg = &ctx.config;
    let name = pick(args.model.clone(), cfg.model.clone(), "duffing".into());
    let nodes = args.n.or(cfg.n);
    if name == "duffing" {
        let defaults = DuffingRingParams::default();
        let params = DuffingRingParams {
            a: pick(args.a, cfg.a, defaults.a),
            d: pick(args.d, cfg.d, defaults.d),
            k: 0.0,
        };
        return Ok(make_duffing_ring(params, nodes.unwrap_or(DEFAULT_NODES))?);
    }
    if args.a.is_some() || args.d.is_some() {
        return Err(CliError::config("--a and --d only apply to the duffing model"));
    }
    let model = ModelFile::load(std::path::Path::new(&name))?.build()?;
    Ok(match nodes {
        Some(n) => model.with_nodes(n)?,
        None => model,
    })
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn print_json(value: &impl serde::Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::numerical(e.to_string()))?;
    println!("{text}");
    Ok(())
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Parameter value.
    #[arg(long)]
    p: Option<f64>,
    /// Number of phi samples.
    #[arg(long)]
    num_phi: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn spectrum(ctx: &Context, args: SpectrumArgs) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let out = args.out.or(cfg.out.clone());
    if let Some(p) = &out {
        check_output(p)?;
    }
    let model = load_model(ctx, &args.model)?;
    let p = pick(args.p, cfg.p, model.param_origin()) - model.param_origin();
    let curve = continuous_spectrum(&model, p, pick(args.num_phi, cfg.num_phi, 256))?;
    curve.write_csv(output(&out)?)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct CriticalArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Lower end of the parameter bracket.
    #[arg(long)]
    p_min: Option<f64>,
    /// Upper end of the parameter bracket.
    #[arg(long)]
    p_max: Option<f64>,
}

fn critical_points(ctx: &Context, args: &CriticalArgs) -> Result<(RingModel, Vec<CriticalData>), CliError> {
    let cfg = &ctx.config;
    let model = load_model(ctx, &args.model)?;
    let origin = model.param_origin();
    let lo = pick(args.p_min, cfg.p_min, origin) - origin;
    let hi = pick(args.p_max, cfg.p_max, origin + 1.0) - origin;
    let points = find_critical_points(&model, (lo, hi))?;
    if points.is_empty() {
        return Err(CliError::numerical("no tangency point found"));
    }
    Ok((model, points))
}

pub fn critical(ctx: &Context, args: CriticalArgs) -> Result<(), CliError> {
    let (model, points) = critical_points(ctx, &args)?;
    let origin = model.param_origin();
    let rows: Vec<_> = points
        .iter()
        .map(|c| CriticalData {
            p_c: c.p_c + origin,
            ..c.clone()
        })
        .collect();
    // one object for the common single-tangency case
    if rows.len() == 1 {
        print_json(&rows[0])
    } else {
        print_json(&rows)
    }
}

pub fn coeffs(ctx: &Context, args: CriticalArgs) -> Result<(), CliError> {
    let (model, points) = critical_points(ctx, &args)?;
    let mut coeffs = gl_coefficients(&model, &points[0])?;
    coeffs.p_c += model.param_origin();
    print_json(&coeffs)
}

#[derive(Debug, Args)]
pub struct GlArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Rescaled parameter r.
    #[arg(long)]
    r: Option<f64>,
    /// Length of the run in slow time T2.
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Grid points (power of two).
    #[arg(long)]
    grid: Option<usize>,
    /// CSV with T2, xi, re_u, im_u rows.
    #[arg(long)]
    snapshots: Option<PathBuf>,
    /// Steps between snapshots.
    #[arg(long)]
    snapshot_stride: Option<usize>,
    /// Bloch twist of the amplitude; by default the one of the chosen ring size.
    #[arg(long)]
    twist: Option<f64>,
}

pub fn gl(ctx: &Context, args: GlArgs) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let snapshots = args.snapshots.or(cfg.snapshots.clone());
    if let Some(p) = &snapshots {
        check_output(p)?;
    }
    let model = load_model(ctx, &args.model)?;
    let crit = find_critical_points(&model, (0.0, 1.0))?
        .into_iter()
        .next()
        .ok_or_else(|| CliError::numerical("no tangency point found"))?;
    let coeffs = gl_coefficients(&model, &crit)?;
    let params = coeffs.gl_params();
    let r = pick(args.r, cfg.r, 1.0);
    let t_end = pick(args.t_end, cfg.t_end, 10.0);
    let dt = pick(args.dt, cfg.dt, ringamp::glsolver::DEFAULT_DT);
    let grid = pick(args.grid, cfg.grid, ringamp::glsolver::DEFAULT_GRID);
    let stride = pick(args.snapshot_stride, cfg.snapshot_stride, 1000);
    let twist = pick(args.twist, cfg.twist, bloch_twist(crit.phi0, model.nodes()));
    let field = GlField::random(grid, 1e-3, ctx.seed)?.with_twist(twist);
    let mut recorder = if snapshots.is_some() {
        GlRecorder::with_snapshots()
    } else {
        GlRecorder::default()
    };
    let end = gl_integrate(&field, r, &params, t_end, dt, stride, GlOptions::default(), |f| {
        recorder.record(f)
    })?;
    if let Some(p) = &snapshots {
        let mut w = BufWriter::new(File::create(p)?);
        writeln!(w, "T2,xi,re_u,im_u")?;
        for snap in &recorder.snapshots {
            snap.write_csv_rows(&mut w)?;
        }
        w.flush()?;
    }
    print_json(&json!({
        "r": r,
        "twist": twist,
        "t_end": end.time,
        "norm_sq": end.norm_sq(),
        "max_abs": end.max_abs(),
        "tail_fraction": end.tail_fraction(),
        "resolved": end.resolved(),
        "samples": recorder.samples,
    }))
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Parameter value (the coupling k for the Duffing ring).
    #[arg(long, alias = "k")]
    p: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Store every stride-th step.
    #[arg(long)]
    stride: Option<usize>,
    /// "rk4" or "dopri5".
    #[arg(long)]
    method: Option<String>,
    /// Standard deviation of the random initial state.
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn simulate(ctx: &Context, args: SimulateArgs) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let out = args.out.or(cfg.out.clone());
    if let Some(p) = &out {
        check_output(p)?;
    }
    let method = match pick(args.method, cfg.method.clone(), "rk4".into()).as_str() {
        "rk4" => Method::Rk4,
        "dopri5" => Method::Dopri5,
        other => return Err(CliError::config(format!("unknown method '{other}'"))),
    };
    let model = load_model(ctx, &args.model)?;
    let p = pick(args.p, cfg.p, model.param_origin()) - model.param_origin();
    let opts = IntegrateOptions {
        dt: pick(args.dt, cfg.dt, ringamp::simulate::DEFAULT_DT),
        method,
        stride: pick(args.stride, cfg.stride, 100),
        ..IntegrateOptions::default()
    };
    let y0 = random_state(model.state_len(), pick(args.amplitude, cfg.amplitude, 0.1), ctx.seed);
    let traj = integrate(&model, &y0, p, pick(args.t_end, cfg.t_end, 1000.0), &opts)?;
    traj.write_csv(output(&out)?)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct LyapunovArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Parameter value (the coupling k for the Duffing ring).
    #[arg(long, alias = "k")]
    p: Option<f64>,
    #[arg(long)]
    num_exponents: Option<usize>,
    /// Standard deviation of the random initial state.
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn lyapunov(ctx: &Context, args: LyapunovArgs) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let out = args.out.or(cfg.out.clone());
    if let Some(p) = &out {
        check_output(p)?;
    }
    let model = load_model(ctx, &args.model)?;
    let p = pick(args.p, cfg.p, model.param_origin()) - model.param_origin();
    let count = pick(args.num_exponents, cfg.num_exponents, 2);
    let mut opts = match ctx.profile {
        Profile::Ci => LyapunovOptions::ci(count),
        Profile::Production => LyapunovOptions::production(count),
    };
    opts.seed = ctx.seed;
    let y0 = random_state(model.state_len(), pick(args.amplitude, cfg.amplitude, 0.1), ctx.seed);
    let result = lyapunov_spectrum(&model, p, &y0, &opts)?;
    let text = serde_json::to_string_pretty(&result).map_err(|e| CliError::numerical(e.to_string()))?;
    let mut w = output(&out)?;
    writeln!(w, "{text}")?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Ring sizes, ascending.
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// CSV of N, k_H, k_Ch, k_Re.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn scan(ctx: &Context, args: ScanArgs, summary: bool) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let out = pick(args.out, cfg.out.clone(), PathBuf::from("records.csv"));
    check_output(&out)?;
    let n_list = pick(args.n_list, cfg.n_list.clone(), vec![5, 10, 15, 20, 25, 30]);
    if n_list.is_empty() {
        return Err(CliError::config("--n-list is empty"));
    }
    let model = load_model(ctx, &args.model)?;
    let mut protocol = match ctx.profile {
        Profile::Ci => ChaosProtocol::ci(),
        Profile::Production => ChaosProtocol::production(),
    };
    protocol.seed = ctx.seed;
    let records = scaling_experiment(&model, &n_list, &HopfOptions::default(), &protocol)?;
    write_records_csv(&records, File::create(&out)?)?;
    for r in &records {
        if let Some(e) = &r.diagnostics.error {
            eprintln!("N = {}: {e}", r.nodes);
        }
    }
    if summary {
        let s = summarize(&records);
        print_json(&json!({
            "min_kRe": s.as_ref().map(|s| s.min_k_re),
            "max_kRe": s.as_ref().map(|s| s.max_k_re),
            "ratio": s.as_ref().map(|s| s.ratio),
            "interval_decreasing": s.as_ref().map(|s| s.interval_decreasing),
            "records": records,
        }))?;
    }
    Ok(())
}
