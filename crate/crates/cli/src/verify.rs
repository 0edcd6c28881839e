use std::f64::consts::TAU;

use clap::Args;

use ringamp::amplitude::gl_coefficients;
use ringamp::glsolver::{gl_integrate, GlField, GlOptions, GlParams};
use ringamp::linalg::{max_pairing_distance, C64};
use ringamp::simulate::{integrate_with, lyapunov_spectrum, random_state, IntegrateOptions, LyapunovOptions};
use ringamp::spectrum::{dense_origin_spectrum, discrete_spectrum, find_critical, lemma1_check};
use ringamp::RingModel;

use crate::commands::load_model;
use crate::{CliError, Context, ModelArgs};

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    model: ModelArgs,
}

struct Check {
    name: &'static str,
    value: f64,
    limit: f64,
}

fn projection_identity(model: &RingModel) -> ringamp::Result<f64> {
    let crit = find_critical(model, (0.0, 1.0))?;
    lemma1_check(model, &crit)
}

fn modes_vs_dense(model: &RingModel) -> ringamp::Result<f64> {
    let p = 0.5;
    Ok(max_pairing_distance(
        &discrete_spectrum(model, p)?,
        &dense_origin_spectrum(model, p)?,
    ))
}

/// Largest deviation from the exact travelling plane wave of the model's
/// amplitude equation over `T2 = 10`.
fn plane_wave(model: &RingModel) -> ringamp::Result<f64> {
    let crit = find_critical(model, (0.0, 1.0))?;
    let params: GlParams = gl_coefficients(model, &crit)?.gl_params();
    let k = TAU;
    // smallest r with growth at q = 1, plus margin
    let r = 2.0 * params.kappa3.re * k * k / (2.0 * params.kappa2.re).max(1e-12) + 1.0;
    let rate = params.rate(r, k);
    let rho2 = -rate.re / params.zeta.re;
    if !(rho2 > 0.0) {
        return Ok(f64::INFINITY);
    }
    let omega = rate.im + params.zeta.im * rho2;
    let rho = rho2.sqrt();
    let t_end = 10.0;
    let field = GlField::from_fn(64, |xi| C64::from_polar(rho, k * xi))?;
    let end = gl_integrate(&field, r, &params, t_end, 1e-3, usize::MAX, GlOptions::default(), |_| {})?;
    Ok(end
        .values
        .iter()
        .enumerate()
        .map(|(i, z)| (z - C64::from_polar(rho, k * end.xi(i) + omega * t_end)).norm())
        .fold(0.0, f64::max)
        / rho)
}

/// `|sum of all exponents - mean trace| / |mean trace|` on a three-node ring.
fn sum_rule(model: &RingModel, seed: u64) -> ringamp::Result<f64> {
    let small = model.with_nodes(3)?;
    let p = 0.5;
    let len = small.state_len();
    let opts = LyapunovOptions {
        t_transient: 0.0,
        t_total: 200.0,
        seed,
        ..LyapunovOptions::ci(len)
    };
    let y0 = random_state(len, 0.1, seed);
    let result = lyapunov_spectrum(&small, p, &y0, &opts)?;
    let mut trace_sum = 0.0;
    let mut samples = 0usize;
    let int = IntegrateOptions {
        dt: opts.dt,
        ..IntegrateOptions::default()
    };
    let mut err = None;
    integrate_with(&small, &y0, p, opts.t_total, &int, |_, y| match small.jacobian(y, p) {
        Ok(j) => {
            trace_sum += j.trace();
            samples += 1;
        }
        Err(e) => err = Some(e),
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    let mean_trace = trace_sum / samples as f64;
    let total: f64 = result.exponents.iter().sum();
    Ok((total - mean_trace).abs() / mean_trace.abs().max(1e-12))
}

pub fn verify(ctx: &Context, args: VerifyArgs) -> Result<(), CliError> {
    let mut model_args = args.model.clone();
    model_args.n = model_args.n.or(ctx.config.n).or(Some(8));
    let model = load_model(ctx, &model_args)?;
    let runs: Vec<(&'static str, f64, ringamp::Result<f64>)> = vec![
        ("kappa1 projection identity", 1e-5, projection_identity(&model)),
        ("modes vs dense spectrum", 1e-8, modes_vs_dense(&model)),
        ("GL plane wave persistence", 1e-6, plane_wave(&model)),
        ("Lyapunov sum rule", 1e-2, sum_rule(&model, ctx.seed)),
    ];
    let mut failed = 0;
    for (name, limit, outcome) in runs {
        let check = match outcome {
            Ok(value) => Check { name, value, limit },
            Err(e) => {
                println!("FAIL {name}: {e}");
                failed += 1;
                continue;
            }
        };
        let pass = check.value < check.limit;
        if !pass {
            failed += 1;
        }
        println!(
            "{} {}: {:.3e} (limit {:.0e})",
            if pass { "PASS" } else { "FAIL" },
            check.name,
            check.value,
            check.limit
        );
    }
    if failed > 0 {
        return Err(CliError::numerical(format!("{failed} check(s) failed")));
    }
    Ok(())
}
