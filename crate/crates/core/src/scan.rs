//! Bifurcation scans in the coupling parameter: the Hopf point of the rest
//! state, the onset of chaos by attractor-following continuation, the
//! scaling experiment `k_Re = (k_Ch - k_H) N^2`, and the corresponding
//! transition interval of the amplitude equation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glsolver::{gl_linear_growth_rates, GlField, GlOptions, GlParams, GlStepper};
use crate::linalg;
use crate::model::RingModel;
use crate::simulate::{
    classify_attractor, AttractorLabel, ClassifyProtocol, LyapunovOptions, CHAOS_THRESHOLD,
};
use crate::spectrum::{dense_origin_spectrum, symbol_matrix};

/// Upper end of the Hopf search.
pub const DEFAULT_K_MAX: f64 = 10.0;
/// Offset of the dense-spectrum cross-check around `k_H`.
pub const HOPF_CHECK_OFFSET: f64 = 1e-4;

/// Largest real part of the symbol-matrix eigenvalues of one mode.
fn mode_growth(model: &RingModel, p: f64, phi: f64) -> Result<f64> {
    let values = linalg::eigenvalues(&symbol_matrix(model, p, phi))
        .ok_or(Error::EigenFailure { phi })?;
    Ok(values.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopfOptions {
    pub k_max: f64,
    /// Coarse samples per mode before bisection.
    pub grid: usize,
    /// Final bracket width in `k`.
    pub tol: f64,
    /// Confirm with the dense origin Jacobian when `N n` does not exceed this.
    pub dense_check_limit: usize,
}

impl Default for HopfOptions {
    fn default() -> Self {
        Self {
            k_max: DEFAULT_K_MAX,
            grid: 2000,
            tol: 1e-10,
            dense_check_limit: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopfPoint {
    pub nodes: usize,
    pub k_h: f64,
    /// Index `j` of the critical mode `phi_j = 2 pi j / N`.
    pub mode: usize,
    pub phi: f64,
    pub omega: f64,
    /// Destabilizing `k` of every mode, `None` if it stays stable.
    pub per_mode: Vec<Option<f64>>,
    /// Dense-spectrum confirmation: stable at `k_H - 1e-4`, unstable at `k_H + 1e-4`.
    pub dense_confirmed: Option<bool>,
}

/// Smallest `k` in `[k_lo, k_max]` at which the mode `phi` loses stability.
fn mode_hopf(family: &RingModel, phi: f64, options: &HopfOptions) -> Result<Option<f64>> {
    let origin = family.param_origin();
    let g = |k: f64| mode_growth(family, k - origin, phi);
    let k_lo = origin;
    if g(k_lo)? >= 0.0 {
        return Ok(Some(k_lo));
    }
    let step = (options.k_max - k_lo) / options.grid as f64;
    let mut prev = k_lo;
    for i in 1..=options.grid {
        let k = k_lo + i as f64 * step;
        if g(k)? >= 0.0 {
            let (mut lo, mut hi) = (prev, k);
            while hi - lo > options.tol {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if g(mid)? >= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(Some(0.5 * (lo + hi)));
        }
        prev = k;
    }
    Ok(None)
}

/// Hopf point of the rest state of the `N`-node ring: the minimum over the
/// discrete modes of the per-mode critical `k`. `family` is evaluated with
/// absolute parameter values starting at its origin.
pub fn find_k_hopf(family: &RingModel, nodes: usize, options: &HopfOptions) -> Result<HopfPoint> {
    let model = family.with_nodes(nodes)?;
    let per_mode: Vec<Option<f64>> = (0..nodes)
        .into_par_iter()
        .map(|j| mode_hopf(&model, std::f64::consts::TAU * j as f64 / nodes as f64, options))
        .collect::<Result<_>>()?;
    let (mode, k_h) = per_mode
        .iter()
        .enumerate()
        .filter_map(|(j, k)| k.map(|k| (j, k)))
        .fold(None, |best: Option<(usize, f64)>, (j, k)| match best {
            Some((_, kb)) if kb <= k => best,
            _ => Some((j, k)),
        })
        .ok_or(Error::NoHopf { k_max: options.k_max })?;
    let phi = std::f64::consts::TAU * mode as f64 / nodes as f64;
    let p_h = k_h - model.param_origin();
    let omega = linalg::eigenvalues(&symbol_matrix(&model, p_h, phi))
        .ok_or(Error::EigenFailure { phi })?
        .into_iter()
        .max_by(|a, b| a.re.total_cmp(&b.re))
        .map(|z| z.im.abs())
        .unwrap_or(0.0);
    let dense_confirmed = if model.state_len() <= options.dense_check_limit {
        let max_re = |p: f64| -> Result<f64> {
            Ok(dense_origin_spectrum(&model, p)?
                .iter()
                .map(|z| z.re)
                .fold(f64::NEG_INFINITY, f64::max))
        };
        Some(max_re(p_h - HOPF_CHECK_OFFSET)? < 0.0 && max_re(p_h + HOPF_CHECK_OFFSET)? > 0.0)
    } else {
        None
    };
    Ok(HopfPoint {
        nodes,
        k_h,
        mode,
        phi,
        omega,
        per_mode,
        dense_confirmed,
    })
}

/// Closed-form critical coupling of mode `phi` of the Duffing ring, from
/// `lambda = i omega` in `lambda^2 + d lambda + a + k (1 - e^{i phi}) = 0`.
/// `None` for `sin phi = 0`.
pub fn duffing_mode_hopf(a: f64, d: f64, phi: f64) -> Option<f64> {
    let s = phi.sin();
    if s.abs() < 1e-12 {
        return None;
    }
    let c = 1.0 - phi.cos();
    Some((d * d * c + (d.powi(4) * c * c + 4.0 * a * d * d * s * s).sqrt()) / (2.0 * s * s))
}

/// Settings of [`find_k_chaos`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaosProtocol {
    pub k_step: f64,
    /// Final bracket width.
    pub k_width: f64,
    pub k_max: f64,
    /// Amplitude of the seeded perturbation added at every new `k`.
    pub noise: f64,
    /// Amplitude of the random initial state.
    pub initial_amplitude: f64,
    pub seed: u64,
    pub start: StartMode,
    pub classify: ClassifyProtocol,
}

/// Initial state of each scanned value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartMode {
    /// Final state of the previous value plus `noise`.
    Follow,
    /// Fresh random state of `initial_amplitude`, seeded by `(seed, N, k)`.
    Fresh,
}

impl ChaosProtocol {
    pub fn production() -> Self {
        Self {
            k_step: 1e-3,
            k_width: 1e-4,
            k_max: 2.0,
            noise: 1e-6,
            initial_amplitude: 0.1,
            seed: 0,
            start: StartMode::Fresh,
            classify: scan_classify(ClassifyProtocol::production()),
        }
    }

    pub fn ci() -> Self {
        Self {
            // fresh starts relax slowly near onset
            classify: scan_classify(ClassifyProtocol {
                t_transient: 2e3,
                ..ClassifyProtocol::ci()
            }),
            ..Self::production()
        }
    }
}

/// The section only screens out periodic orbits here; everything else is
/// decided by the exponents, which also feed the onset diagnostics.
fn scan_classify(base: ClassifyProtocol) -> ClassifyProtocol {
    ClassifyProtocol {
        torus_tol: 0.0,
        ..base
    }
}

/// One classified parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanCell {
    pub k: f64,
    pub label: AttractorLabel,
    pub exponents: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosOnset {
    pub k_ch: f64,
    /// Final bracket `(last non-chaotic, first chaotic)`.
    pub bracket: (f64, f64),
    /// Smallest classified `k` whose second exponent exceeds the chaos threshold.
    pub hyperchaos: Option<f64>,
    /// Span of the cells that stayed undetermined after the longer run.
    pub undetermined: Option<(f64, f64)>,
    pub cells: Vec<ScanCell>,
}

impl ChaosOnset {
    fn from_cells(k_ch: f64, bracket: (f64, f64), cells: Vec<ScanCell>) -> Self {
        let hyperchaos = cells
            .iter()
            .filter(|c| {
                c.exponents
                    .as_ref()
                    .is_some_and(|e| e.len() > 1 && e[1] > CHAOS_THRESHOLD)
            })
            .map(|c| c.k)
            .reduce(f64::min);
        let undetermined = cells
            .iter()
            .filter(|c| c.label == AttractorLabel::Undetermined)
            .fold(None, |span: Option<(f64, f64)>, c| match span {
                None => Some((c.k, c.k)),
                Some((lo, hi)) => Some((lo.min(c.k), hi.max(c.k))),
            });
        Self {
            k_ch,
            bracket,
            hyperchaos,
            undetermined,
            cells,
        }
    }
}

fn perturb(state: &mut [f64], amplitude: f64, rng: &mut ChaCha8Rng) {
    for v in state.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v += amplitude * z;
    }
}

/// Classifies at `k`, repeating once with doubled exponent run length
/// when the first answer is undetermined.
fn classify_cell(
    model: &RingModel,
    k: f64,
    y: &[f64],
    protocol: &ClassifyProtocol,
) -> Result<crate::simulate::Classification> {
    let p = k - model.param_origin();
    let first = classify_attractor(model, p, y, protocol)?;
    if first.label != AttractorLabel::Undetermined {
        return Ok(first);
    }
    let longer = ClassifyProtocol {
        lyapunov: LyapunovOptions {
            t_total: 2.0 * protocol.lyapunov.t_total,
            ..protocol.lyapunov
        },
        ..*protocol
    };
    classify_attractor(model, p, y, &longer)
}

/// Onset of chaos above `k_start`: outward scan in steps of `k_step`, then
/// bisection to `k_width` between the last non-chaotic and the first
/// chaotic value. Chaotic means largest exponent above the chaos threshold;
/// cells still undetermined after a longer run count as non-chaotic and are
/// reported in [`ChaosOnset::undetermined`].
pub fn find_k_chaos(
    family: &RingModel,
    nodes: usize,
    k_start: f64,
    protocol: &ChaosProtocol,
) -> Result<ChaosOnset> {
    let model = family.with_nodes(nodes)?;
    let len = model.state_len();
    let node_seed = protocol.seed ^ (nodes as u64).rotate_left(32);
    let mut rng = ChaCha8Rng::seed_from_u64(node_seed);
    let fresh = |k: f64| {
        let mut rng = ChaCha8Rng::seed_from_u64(node_seed ^ k.to_bits());
        let mut y = vec![0.0; len];
        perturb(&mut y, protocol.initial_amplitude, &mut rng);
        y
    };
    let start_state = |k: f64, previous: &[f64], rng: &mut ChaCha8Rng| match protocol.start {
        StartMode::Follow => {
            let mut y = previous.to_vec();
            perturb(&mut y, protocol.noise, rng);
            y
        }
        StartMode::Fresh => fresh(k),
    };
    let mut cells = Vec::new();
    let classify = |k: f64, y: &[f64], cells: &mut Vec<ScanCell>| {
        let class = classify_cell(&model, k, y, &protocol.classify)?;
        cells.push(ScanCell {
            k,
            label: class.label,
            exponents: class.exponents.clone(),
        });
        Ok::<_, Error>((class.label == AttractorLabel::Chaotic, class.final_state))
    };

    let mut state = fresh(k_start);
    let mut last_quiet: Option<(f64, Vec<f64>)> = None;
    let mut i = 0usize;
    let first_chaotic = loop {
        let k = k_start + i as f64 * protocol.k_step;
        if k > protocol.k_max {
            return Err(Error::NoTransition { k_max: protocol.k_max });
        }
        let y = start_state(k, &state, &mut rng);
        let (chaotic, end) = classify(k, &y, &mut cells)?;
        state = end;
        if chaotic {
            break k;
        }
        last_quiet = Some((k, state.clone()));
        i += 1;
    };
    let mut hi = first_chaotic;
    let Some((mut lo, mut quiet_state)) = last_quiet else {
        // chaotic already at the start: nothing to bisect
        return Ok(ChaosOnset::from_cells(k_start, (k_start, k_start), cells));
    };
    while hi - lo > protocol.k_width * (1.0 + 1e-9) {
        let mid = 0.5 * (lo + hi);
        let y = start_state(mid, &quiet_state, &mut rng);
        let (chaotic, end) = classify(mid, &y, &mut cells)?;
        if chaotic {
            hi = mid;
        } else {
            lo = mid;
            quiet_state = end;
        }
    }
    Ok(ChaosOnset::from_cells(0.5 * (lo + hi), (lo, hi), cells))
}

/// One row of the scaling experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    #[serde(rename = "N")]
    pub nodes: usize,
    /// NaN when the Hopf search failed; see `diagnostics.error`.
    pub k_h: f64,
    pub k_ch: Option<f64>,
    pub k_re: Option<f64>,
    pub diagnostics: ScanDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanDiagnostics {
    pub hopf_method: String,
    pub chaos_method: String,
    pub hopf_tol: f64,
    pub k_step: f64,
    pub k_width: f64,
    pub hopf_mode: usize,
    pub dense_confirmed: Option<bool>,
    pub bracket: Option<(f64, f64)>,
    pub hyperchaos: Option<f64>,
    pub undetermined: Option<(f64, f64)>,
    pub cells: Vec<ScanCell>,
    pub error: Option<String>,
}

impl ScanDiagnostics {
    fn new(hopf: &HopfOptions, protocol: &ChaosProtocol) -> Self {
        Self {
            hopf_method: "per-mode symbol bisection".into(),
            chaos_method: match protocol.start {
                StartMode::Follow => "continuation + largest Lyapunov exponent",
                StartMode::Fresh => "fresh start + largest Lyapunov exponent",
            }
            .into(),
            hopf_tol: hopf.tol,
            k_step: protocol.k_step,
            k_width: protocol.k_width,
            hopf_mode: 0,
            dense_confirmed: None,
            bracket: None,
            hyperchaos: None,
            undetermined: None,
            cells: Vec::new(),
            error: None,
        }
    }
}

impl ScanRecord {
    fn failed(nodes: usize, hopf: &HopfOptions, protocol: &ChaosProtocol, e: Error) -> Self {
        let mut diagnostics = ScanDiagnostics::new(hopf, protocol);
        diagnostics.error = Some(e.to_string());
        Self {
            nodes,
            k_h: f64::NAN,
            k_ch: None,
            k_re: None,
            diagnostics,
        }
    }

    /// `k_Re = (k_Ch - k_H) N^2`.
    pub fn rescaled(k_h: f64, k_ch: f64, nodes: usize) -> f64 {
        (k_ch - k_h) * (nodes * nodes) as f64
    }
}

/// `N,k_H,k_Ch,k_Re` rows; failed cells leave `k_Ch` and `k_Re` empty.
pub fn write_records_csv<W: std::io::Write>(records: &[ScanRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["N", "k_H", "k_Ch", "k_Re"])
        .map_err(csv_error)?;
    for r in records {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        w.write_record([r.nodes.to_string(), r.k_h.to_string(), opt(r.k_ch), opt(r.k_re)])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Summary over the successful rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSummary {
    pub min_k_re: f64,
    pub max_k_re: f64,
    pub ratio: f64,
    /// `k_Ch - k_H` strictly decreasing along the node list.
    pub interval_decreasing: bool,
}

pub fn summarize(records: &[ScanRecord]) -> Option<ScalingSummary> {
    let kre: Vec<f64> = records.iter().filter_map(|r| r.k_re).collect();
    if kre.is_empty() {
        return None;
    }
    let min = kre.iter().copied().fold(f64::INFINITY, f64::min);
    let max = kre.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let widths: Vec<Option<f64>> = records.iter().map(|r| r.k_ch.map(|c| c - r.k_h)).collect();
    let interval_decreasing = widths.iter().all(Option::is_some)
        && widths.windows(2).all(|w| w[1].unwrap() < w[0].unwrap());
    Some(ScalingSummary {
        min_k_re: min,
        max_k_re: max,
        ratio: max / min,
        interval_decreasing,
    })
}

/// Hopf point and chaos onset for every `N`, in parallel over `N`. The
/// chaos scan starts at `k_H`. Failures of one `N` are recorded in its row.
pub fn scaling_experiment(
    family: &RingModel,
    node_list: &[usize],
    hopf: &HopfOptions,
    protocol: &ChaosProtocol,
) -> Result<Vec<ScanRecord>> {
    if node_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("node list must be strictly ascending".into()));
    }
    node_list
        .par_iter()
        .map(|&nodes| {
            let point = match find_k_hopf(family, nodes, hopf) {
                Ok(point) => point,
                Err(e) => return Ok(ScanRecord::failed(nodes, hopf, protocol, e)),
            };
            let mut diagnostics = ScanDiagnostics::new(hopf, protocol);
            diagnostics.hopf_mode = point.mode;
            diagnostics.dense_confirmed = point.dense_confirmed;
            let (k_ch, k_re) = match find_k_chaos(family, nodes, point.k_h, protocol) {
                Ok(onset) => {
                    diagnostics.bracket = Some(onset.bracket);
                    diagnostics.hyperchaos = onset.hyperchaos;
                    diagnostics.undetermined = onset.undetermined;
                    diagnostics.cells = onset.cells;
                    (
                        Some(onset.k_ch),
                        Some(ScanRecord::rescaled(point.k_h, onset.k_ch, nodes)),
                    )
                }
                Err(e) => {
                    diagnostics.error = Some(e.to_string());
                    (None, None)
                }
            };
            Ok(ScanRecord {
                nodes,
                k_h: point.k_h,
                k_ch,
                k_re,
                diagnostics,
            })
        })
        .collect()
}

/// Settings of [`gl_transition_interval`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlTransitionProtocol {
    pub grid: usize,
    pub dt: f64,
    pub r_step: f64,
    pub t_transient: f64,
    pub t_measure: f64,
    /// Time between renormalizations of the separation.
    pub renorm_interval: f64,
    pub separation: f64,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for GlTransitionProtocol {
    fn default() -> Self {
        Self {
            grid: crate::glsolver::DEFAULT_GRID,
            dt: 1e-3,
            r_step: 0.5,
            t_transient: 50.0,
            t_measure: 100.0,
            renorm_interval: 1.0,
            separation: 1e-6,
            threshold: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlTransition {
    /// Threshold of the homogeneous state.
    pub r0: f64,
    /// First scanned `r` with divergence rate above the threshold.
    pub r_chaos: Option<f64>,
    /// `r_chaos - r0`, or `None` when no chaos was found.
    pub delta_r: Option<f64>,
    /// Lower bound on `delta_r` when no chaos was found: `r_max - r0`.
    pub delta_r_lower_bound: f64,
    /// `(r, divergence rate)` for every scanned value.
    pub rates: Vec<(f64, f64)>,
}

impl GlTransition {
    /// `delta_r / N^2`, the predicted width in the ring parameter.
    pub fn predicted_width(&self, nodes: usize) -> Option<f64> {
        self.delta_r.map(|d| d / (nodes * nodes) as f64)
    }
}

/// Divergence rate of two nearby GL solutions at `r` (a largest-exponent proxy).
pub fn gl_divergence_rate(
    params: &GlParams,
    r: f64,
    protocol: &GlTransitionProtocol,
    seed: u64,
) -> Result<f64> {
    let mut stepper = GlStepper::new(protocol.grid, r, params, protocol.dt, 0.0, GlOptions::default())?;
    let mut u = GlField::random(protocol.grid, 1e-3, seed)?;
    let transient = (protocol.t_transient / protocol.dt).round() as usize;
    for _ in 0..transient {
        stepper.step(&mut u)?;
    }
    let offset = GlField::random(protocol.grid, 1.0, seed.wrapping_add(1))?;
    let scale = protocol.separation / offset.norm_sq().sqrt();
    let mut w = u.clone();
    for (a, b) in w.values.iter_mut().zip(&offset.values) {
        *a += b * scale;
    }
    let per_renorm = ((protocol.renorm_interval / protocol.dt).round() as usize).max(1);
    let renorms = ((protocol.t_measure / protocol.renorm_interval).round() as usize).max(1);
    let mut log_sum = 0.0;
    for _ in 0..renorms {
        for _ in 0..per_renorm {
            stepper.step(&mut u)?;
            stepper.step(&mut w)?;
        }
        let dist = u
            .values
            .iter()
            .zip(&w.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / protocol.grid as f64;
        let dist = dist.sqrt();
        if !(dist > 0.0) {
            return Ok(f64::NEG_INFINITY);
        }
        log_sum += (dist / protocol.separation).ln();
        let factor = protocol.separation / dist;
        for (b, a) in w.values.iter_mut().zip(&u.values) {
            *b = a + (*b - a) * factor;
        }
    }
    Ok(log_sum / (renorms * per_renorm) as f64 / protocol.dt)
}

/// Transition interval of the scale-free amplitude equation: `r0` from the
/// linear growth rates, `r_chaos` from the divergence rate of nearby GL
/// solutions scanned over `r_range` in steps of `r_step`.
pub fn gl_transition_interval(
    params: &GlParams,
    r_range: (f64, f64),
    protocol: &GlTransitionProtocol,
) -> Result<GlTransition> {
    if params.kappa2.re <= 0.0 {
        return Err(Error::InvalidArgument(
            "Re kappa2 must be positive for the threshold to lie at finite r".into(),
        ));
    }
    // the q = 0 rate r kappa2 is the first to cross for Re kappa3 >= 0
    let r0 = if params.kappa3.re >= 0.0 {
        0.0
    } else {
        return Err(Error::IllPosed {
            re_kappa3: params.kappa3.re,
        });
    };
    debug_assert!(gl_linear_growth_rates(r0, params, 0)[0].1.re.abs() < 1e-15);
    let count = ((r_range.1 - r_range.0) / protocol.r_step).floor() as usize;
    let rs: Vec<f64> = (0..=count)
        .map(|i| r_range.0 + i as f64 * protocol.r_step)
        .filter(|r| *r > r0)
        .collect();
    let rates: Vec<(f64, f64)> = rs
        .par_iter()
        .map(|&r| gl_divergence_rate(params, r, protocol, protocol.seed).map(|rate| (r, rate)))
        .collect::<Result<_>>()?;
    let r_chaos = rates
        .iter()
        .find(|(_, rate)| *rate > protocol.threshold)
        .map(|(r, _)| *r);
    Ok(GlTransition {
        r0,
        r_chaos,
        delta_r: r_chaos.map(|r| r - r0),
        delta_r_lower_bound: r_range.1 - r0,
        rates,
    })
}
