//! Batch front end: parameter sweeps over the Floquet, perturbative, RWA and
//! dissipative routes, executed point-parallel and emitted as deterministic
//! CSV with a metadata sidecar.
//!
//! Grid points are independent pure computations; a bounded worker pool
//! evaluates them in any order and assembly restores index order, so the
//! output bytes do not depend on the worker count. Per-point failures (e.g.
//! a resonant-denominator refusal in the analytics) are encoded as `nan`
//! plus a flag column and never abort the sweep.

pub mod config;

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use thiserror::Error;

use crate::dissipation::{
    averaged_concurrence, averaged_probabilities, periodic_steady_state, pure_state,
    transient_averaged_concurrence, Rates,
};
use crate::floquet::{continuity_permutation, floquet_modes, s_matrix};
use crate::model::{exact_uncoupled_basis, Drive, SystemParams};

use crate::numerics::linalg::CVec4;
use crate::perturbation::{
    chi_table, nonresonant_probabilities, quasienergy_2nd, ConditionKind,
};
use crate::rwa::{channel_probability, inversion_channel, single_flip_channel, ChannelKind};

pub use config::{
    apply_override, build_config, parse_pairs, Axis, AxisParam, ConfigError, Mode, RatesConfig,
    SweepConfig,
};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Where the outputs landed.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub csv_path: PathBuf,
    pub meta_path: PathBuf,
    pub overlay_path: Option<PathBuf>,
    pub n_rows: usize,
    pub n_failed: usize,
}

/// Effective parameters at one sweep point: the axis value is written into
/// the base parameters, then the `eps2 = ratio * eps1` link is applied
/// unless the axis itself addresses `eps2`.
fn point_params(
    base: &SystemParams,
    drive: &Drive,
    ratio: Option<f64>,
    assignments: &[(AxisParam, f64)],
) -> (SystemParams, Drive) {
    let mut p = *base;
    let mut d = *drive;
    let mut eps2_explicit = false;
    for &(param, value) in assignments {
        match param {
            AxisParam::Eps1 => p.eps1 = value,
            AxisParam::Eps2 => {
                p.eps2 = value;
                eps2_explicit = true;
            }
            AxisParam::G => p.g = value,
            AxisParam::Amplitude => d.amplitude = value,
        }
    }
    if let Some(s) = ratio {
        if !eps2_explicit {
            p.eps2 = s * p.eps1;
        }
    }
    (p, d)
}

fn fmt_cell(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{:.11e}", x)
    }
}

fn fmt_flag(b: bool) -> String {
    if b { "1".to_string() } else { "0".to_string() }
}

fn metadata_lines(cfg: &SweepConfig) -> Vec<String> {
    let mut m = Vec::new();
    m.push(format!("# spectroscope {}", env!("CARGO_PKG_VERSION")));
    m.push(format!("# mode = {}", cfg.mode.label()));
    m.push(format!("# eps1 = {}", cfg.params.eps1));
    m.push(format!("# eps2 = {}", cfg.params.eps2));
    m.push(format!("# delta1 = {}", cfg.params.delta1));
    m.push(format!("# delta2 = {}", cfg.params.delta2));
    m.push(format!("# g = {}", cfg.params.g));
    m.push(format!("# amplitude = {}", cfg.drive.amplitude));
    m.push(format!("# omega = {}", cfg.drive.omega));
    m.push(format!("# phi0 = {}", cfg.drive.phi0));
    if let Some(r) = cfg.eps2_ratio {
        m.push(format!("# eps2_ratio = {r}"));
    }
    m.push(format!(
        "# sweep = {} from {} to {} in {} points",
        cfg.axis.param.label(),
        cfg.axis.min,
        cfg.axis.max,
        cfg.axis.n_points
    ));
    if let Some(a2) = &cfg.axis2 {
        m.push(format!(
            "# sweep2 = {} from {} to {} in {} points",
            a2.param.label(),
            a2.min,
            a2.max,
            a2.n_points
        ));
    }
    m.push(format!("# tol = {}", cfg.tol));
    m.push(format!("# k_max = {}", effective_k_max(cfg)));
    if let Some(r) = &cfg.rates {
        m.push(format!("# gamma_phi = {}, {}", r.gamma_phi[0], r.gamma_phi[1]));
        m.push(format!("# gamma_down = {}, {}", r.gamma_down[0], r.gamma_down[1]));
        match r.tau_b {
            Some(t) => m.push(format!("# tau_b = {t}")),
            None => m.push("# tau_b = 0 (zero-temperature: no excitation)".to_string()),
        }
        m.push(format!("# transient = {}", cfg.transient));
    }
    m
}

fn effective_k_max(cfg: &SweepConfig) -> i64 {
    cfg.k_max_override.unwrap_or_else(|| crate::floquet::harmonic_cutoff(&cfg.drive))
}

fn write_text(path: &PathBuf, text: &str) -> Result<(), SweepError> {
    std::fs::write(path, text).map_err(|source| SweepError::Io { path: path.clone(), source })
}

fn run_pool<T: Send, F: Fn(usize) -> T + Sync>(
    workers: usize,
    n: usize,
    f: F,
) -> Result<Vec<T>, SweepError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(|i| f(i)).collect()))
}

/// Execute a sweep and write its output files.
pub fn run(cfg: &SweepConfig) -> Result<RunSummary, SweepError> {
    let out = cfg.out.clone().ok_or(ConfigError::NoOutput)?;
    let (body, n_rows, n_failed) = match cfg.mode {
        Mode::Quasienergies => quasienergy_rows(cfg)?,
        Mode::Sweep1d => sweep1d_rows(cfg)?,
        Mode::Sweep2d | Mode::GMap => map_rows(cfg)?,
        Mode::Dissipative => dissipative_rows(cfg)?,
    };

    let meta = metadata_lines(cfg);
    let mut csv = String::new();
    for line in &meta {
        writeln!(csv, "{line}").unwrap();
    }
    csv.push_str(&body);
    write_text(&out, &csv)?;

    let meta_path = out.with_extension("meta");
    let mut meta_text = String::new();
    for line in &meta {
        writeln!(meta_text, "{}", line.trim_start_matches("# ")).unwrap();
    }
    write_text(&meta_path, &meta_text)?;

    let overlay_path = if cfg.mode.is_two_dimensional() {
        let path = overlay_path_for(&out);
        write_text(&path, &emit_resonance_overlays(cfg)?)?;
        Some(path)
    } else {
        None
    };

    Ok(RunSummary { csv_path: out, meta_path, overlay_path, n_rows, n_failed })
}

fn overlay_path_for(out: &PathBuf) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}_overlays.csv"))
}

// ---------------------------------------------------------------- modes --

type RowResult<T> = Result<T, String>;

struct SpectrumPoint {
    gammas: [f64; 4],
    vecs: [CVec4; 4],
    resonant: bool,
}

fn solve_spectrum(cfg: &SweepConfig, i: usize) -> RowResult<SpectrumPoint> {
    let (p, d) = point_params(
        &cfg.params,
        &cfg.drive,
        cfg.eps2_ratio,
        &[(cfg.axis.param, cfg.axis.value(i))],
    );
    let sol = floquet_modes(&p, &d, cfg.tol).map_err(|e| e.to_string())?;
    Ok(SpectrumPoint { gammas: sol.gammas, vecs: sol.eigenvectors, resonant: sol.resonant.is_some() })
}

/// Relabel branches along the sweep by eigenvector-overlap continuity.
fn track_branches(points: &mut [RowResult<SpectrumPoint>]) {
    let mut prev: Option<[CVec4; 4]> = None;
    for point in points.iter_mut() {
        let Ok(pt) = point else {
            continue;
        };
        if let Some(prev_vecs) = &prev {
            let perm = continuity_permutation(prev_vecs, &pt.vecs);
            pt.gammas = [
                pt.gammas[perm[0]],
                pt.gammas[perm[1]],
                pt.gammas[perm[2]],
                pt.gammas[perm[3]],
            ];
            pt.vecs = [pt.vecs[perm[0]], pt.vecs[perm[1]], pt.vecs[perm[2]], pt.vecs[perm[3]]];
        }
        prev = Some(pt.vecs);
    }
}

fn quasienergy_rows(cfg: &SweepConfig) -> Result<(String, usize, usize), SweepError> {
    let n = cfg.axis.n_points;
    let mut points = run_pool(cfg.workers, n, |i| solve_spectrum(cfg, i))?;
    track_branches(&mut points);

    let k_max = effective_k_max(cfg);
    let analytic = run_pool(cfg.workers, n, |i| {
        let (p, d) = point_params(
            &cfg.params,
            &cfg.drive,
            cfg.eps2_ratio,
            &[(cfg.axis.param, cfg.axis.value(i))],
        );
        chi_table(&p, &d, k_max).map(|t| quasienergy_2nd(&p, &d, &t)).map_err(|e| e.to_string())
    })?;

    let mut body = String::new();
    body.push_str(
        "eps1,eps2,g,amplitude,gamma_1,gamma_2,gamma_3,gamma_4,\
         gamma_pt_1,gamma_pt_2,gamma_pt_3,gamma_pt_4,flag_resonant,flag_error\n",
    );
    let mut n_failed = 0usize;
    for (i, point) in points.iter().enumerate() {
        let (p, d) = point_params(
            &cfg.params,
            &cfg.drive,
            cfg.eps2_ratio,
            &[(cfg.axis.param, cfg.axis.value(i))],
        );
        let mut cells: Vec<String> = vec![
            fmt_cell(p.eps1),
            fmt_cell(p.eps2),
            fmt_cell(p.g),
            fmt_cell(d.amplitude),
        ];
        let mut failed = false;
        let mut resonant = false;
        match point {
            Ok(pt) => {
                resonant = pt.resonant;
                cells.extend(pt.gammas.iter().map(|&g| fmt_cell(g)));
            }
            Err(_) => {
                failed = true;
                cells.extend(std::iter::repeat(fmt_cell(f64::NAN)).take(4));
            }
        }
        match &analytic[i] {
            Ok(g) => cells.extend(g.iter().map(|&v| fmt_cell(v))),
            Err(_) => cells.extend(std::iter::repeat(fmt_cell(f64::NAN)).take(4)),
        }
        cells.push(fmt_flag(resonant));
        cells.push(fmt_flag(failed));
        if failed {
            n_failed += 1;
        }
        writeln!(body, "{}", cells.join(",")).unwrap();
    }
    Ok((body, n, n_failed))
}

struct Point1d {
    spectrum: SpectrumPoint,
    p_num: [f64; 3],
    p_pt: [f64; 3],
    tail: f64,
    p_rwa: [f64; 3],
}

fn solve_point1d(cfg: &SweepConfig, i: usize) -> RowResult<Point1d> {
    let (p, d) = point_params(
        &cfg.params,
        &cfg.drive,
        cfg.eps2_ratio,
        &[(cfg.axis.param, cfg.axis.value(i))],
    );
    let sol = floquet_modes(&p, &d, cfg.tol).map_err(|e| e.to_string())?;
    let basis = exact_uncoupled_basis(&p).map_err(|e| e.to_string())?;
    let table = s_matrix(&sol, &basis).map_err(|e| e.to_string())?;
    let p_num = [table.pbar[0][1], table.pbar[0][2], table.pbar[0][3]];

    let k_max = effective_k_max(cfg);
    let (p_pt, tail) = match chi_table(&p, &d, k_max) {
        Ok(ct) => match nonresonant_probabilities(&p, &d, &ct) {
            Ok((a, b, c)) => ([a, b, c], ct.tail_estimate),
            Err(_) => ([f64::NAN; 3], ct.tail_estimate),
        },
        Err(_) => ([f64::NAN; 3], f64::NAN),
    };

    let rwa12 = channel_probability(&single_flip_channel(ChannelKind::OneToTwo, &p, &d));
    let rwa13 = channel_probability(&single_flip_channel(ChannelKind::OneToThree, &p, &d));
    let rwa14 = inversion_channel(&p, &d, k_max)
        .map(|ch| channel_probability(&ch))
        .unwrap_or(f64::NAN);

    Ok(Point1d {
        spectrum: SpectrumPoint {
            gammas: sol.gammas,
            vecs: sol.eigenvectors,
            resonant: sol.resonant.is_some(),
        },
        p_num,
        p_pt,
        tail,
        p_rwa: [rwa12, rwa13, rwa14],
    })
}

fn sweep1d_rows(cfg: &SweepConfig) -> Result<(String, usize, usize), SweepError> {
    let n = cfg.axis.n_points;
    let mut points = run_pool(cfg.workers, n, |i| solve_point1d(cfg, i))?;
    {
        // Branch-track the embedded spectra in sweep order.
        let mut prev: Option<[CVec4; 4]> = None;
        for point in points.iter_mut() {
            let Ok(pt) = point else { continue };
            if let Some(prev_vecs) = &prev {
                let perm = continuity_permutation(prev_vecs, &pt.spectrum.vecs);
                pt.spectrum.gammas = [
                    pt.spectrum.gammas[perm[0]],
                    pt.spectrum.gammas[perm[1]],
                    pt.spectrum.gammas[perm[2]],
                    pt.spectrum.gammas[perm[3]],
                ];
                pt.spectrum.vecs = [
                    pt.spectrum.vecs[perm[0]],
                    pt.spectrum.vecs[perm[1]],
                    pt.spectrum.vecs[perm[2]],
                    pt.spectrum.vecs[perm[3]],
                ];
            }
            prev = Some(pt.spectrum.vecs);
        }
    }

    let mut body = String::new();
    body.push_str(
        "eps1,eps2,g,amplitude,gamma_1,gamma_2,gamma_3,gamma_4,\
         p12_num,p13_num,p14_num,p12_pt,p13_pt,p14_pt,\
         p12_rwa,p13_rwa,p14_rwa,tail_pt,flag_resonant,flag_error\n",
    );
    let mut n_failed = 0usize;
    for (i, point) in points.iter().enumerate() {
        let (p, d) = point_params(
            &cfg.params,
            &cfg.drive,
            cfg.eps2_ratio,
            &[(cfg.axis.param, cfg.axis.value(i))],
        );
        let mut cells = vec![
            fmt_cell(p.eps1),
            fmt_cell(p.eps2),
            fmt_cell(p.g),
            fmt_cell(d.amplitude),
        ];
        match point {
            Ok(pt) => {
                cells.extend(pt.spectrum.gammas.iter().map(|&g| fmt_cell(g)));
                cells.extend(pt.p_num.iter().map(|&v| fmt_cell(v)));
                cells.extend(pt.p_pt.iter().map(|&v| fmt_cell(v)));
                cells.extend(pt.p_rwa.iter().map(|&v| fmt_cell(v)));
                cells.push(fmt_cell(pt.tail));
                cells.push(fmt_flag(pt.spectrum.resonant));
                cells.push(fmt_flag(false));
            }
            Err(_) => {
                n_failed += 1;
                cells.extend(std::iter::repeat(fmt_cell(f64::NAN)).take(14));
                cells.push(fmt_flag(false));
                cells.push(fmt_flag(true));
            }
        }
        writeln!(body, "{}", cells.join(",")).unwrap();
    }
    Ok((body, n, n_failed))
}

fn map_rows(cfg: &SweepConfig) -> Result<(String, usize, usize), SweepError> {
    let axis2 = cfg.axis2.as_ref().expect("validated: 2D mode has a second axis");
    let (n1, n2) = (cfg.axis.n_points, axis2.n_points);
    let total = n1 * n2;
    let results = run_pool(cfg.workers, total, |idx| -> RowResult<([f64; 3], bool)> {
        let (i, j) = (idx / n2, idx % n2);
        let (p, d) = point_params(
            &cfg.params,
            &cfg.drive,
            cfg.eps2_ratio,
            &[(cfg.axis.param, cfg.axis.value(i)), (axis2.param, axis2.value(j))],
        );
        let sol = floquet_modes(&p, &d, cfg.tol).map_err(|e| e.to_string())?;
        let basis = exact_uncoupled_basis(&p).map_err(|e| e.to_string())?;
        let table = s_matrix(&sol, &basis).map_err(|e| e.to_string())?;
        Ok(([table.pbar[0][1], table.pbar[0][2], table.pbar[0][3]], sol.resonant.is_some()))
    })?;

    let mut body = String::new();
    body.push_str("eps1,eps2,g,amplitude,p12_num,p13_num,p14_num,flag_resonant,flag_error\n");
    let mut n_failed = 0usize;
    for (idx, res) in results.iter().enumerate() {
        let (i, j) = (idx / n2, idx % n2);
        let (p, d) = point_params(
            &cfg.params,
            &cfg.drive,
            cfg.eps2_ratio,
            &[(cfg.axis.param, cfg.axis.value(i)), (axis2.param, axis2.value(j))],
        );
        let mut cells = vec![
            fmt_cell(p.eps1),
            fmt_cell(p.eps2),
            fmt_cell(p.g),
            fmt_cell(d.amplitude),
        ];
        match res {
            Ok((probs, resonant)) => {
                cells.extend(probs.iter().map(|&v| fmt_cell(v)));
                cells.push(fmt_flag(*resonant));
                cells.push(fmt_flag(false));
            }
            Err(_) => {
                n_failed += 1;
                cells.extend(std::iter::repeat(fmt_cell(f64::NAN)).take(3));
                cells.push(fmt_flag(false));
                cells.push(fmt_flag(true));
            }
        }
        writeln!(body, "{}", cells.join(",")).unwrap();
    }
    Ok((body, total, n_failed))
}

fn dissipative_rows(cfg: &SweepConfig) -> Result<(String, usize, usize), SweepError> {
    let rc = cfg.rates.expect("validated: dissipative mode has rates");
    let n = cfg.axis.n_points;
    let results = run_pool(cfg.workers, n, |i| -> RowResult<([f64; 4], f64, f64)> {
        let (p, d) = point_params(
            &cfg.params,
            &cfg.drive,
            cfg.eps2_ratio,
            &[(cfg.axis.param, cfg.axis.value(i))],
        );
        let rates = match rc.tau_b {
            Some(tau) => Rates::from_temperature(&p, rc.gamma_phi, rc.gamma_down, tau),
            None => Rates::explicit(rc.gamma_phi, rc.gamma_down, [0.0; 2]),
        }
        .map_err(|e| e.to_string())?;
        let pss = periodic_steady_state(&p, &d, &rates, cfg.tol.max(1e-10))
            .map_err(|e| e.to_string())?;
        let basis = exact_uncoupled_basis(&p).map_err(|e| e.to_string())?;
        let probs = averaged_probabilities(&pss, &basis);
        let cbar = if cfg.transient {
            let rho0 = pure_state(&basis[0]);
            transient_averaged_concurrence(&p, &d, &rates, &rho0, cfg.tol.max(1e-10))
                .map_err(|e| e.to_string())?
        } else {
            averaged_concurrence(&pss)
        };
        Ok((probs, cbar, pss.residual))
    })?;

    let mut body = String::new();
    body.push_str(
        "eps1,eps2,g,amplitude,p1_diss,p2_diss,p3_diss,p4_diss,cbar,residual,flag_error\n",
    );
    let mut n_failed = 0usize;
    for (i, res) in results.iter().enumerate() {
        let (p, d) = point_params(
            &cfg.params,
            &cfg.drive,
            cfg.eps2_ratio,
            &[(cfg.axis.param, cfg.axis.value(i))],
        );
        let mut cells = vec![
            fmt_cell(p.eps1),
            fmt_cell(p.eps2),
            fmt_cell(p.g),
            fmt_cell(d.amplitude),
        ];
        match res {
            Ok((probs, cbar, residual)) => {
                cells.extend(probs.iter().map(|&v| fmt_cell(v)));
                cells.push(fmt_cell(*cbar));
                cells.push(fmt_cell(*residual));
                cells.push(fmt_flag(false));
            }
            Err(_) => {
                n_failed += 1;
                cells.extend(std::iter::repeat(fmt_cell(f64::NAN)).take(6));
                cells.push(fmt_flag(true));
            }
        }
        writeln!(body, "{}", cells.join(",")).unwrap();
    }
    Ok((body, n, n_failed))
}

// ------------------------------------------------------------- overlays --

/// Resonance-condition guide lines for a 2D map, as `a*x + b*y = c` in the
/// sweep-axis coordinates, one line per photon number intersecting the
/// swept rectangle.
pub fn emit_resonance_overlays(cfg: &SweepConfig) -> Result<String, SweepError> {
    let axis2 = cfg.axis2.as_ref().ok_or(ConfigError::ModeRequirement {
        mode: cfg.mode.label(),
        requirement: "a second axis for overlays",
    })?;
    let omega = cfg.drive.omega;
    let g = cfg.params.g;

    // Express each condition as a*x + b*y - shift = n*omega over the two
    // axis parameters; parameters not on an axis take their base values
    // (with the eps2 link applied for eps1 axes).
    let coefficient = |kind_param: AxisParam| -> (f64, f64, f64) {
        // Returns (a, b, constant) with value = a*x + b*y + constant.
        let mut a = 0.0;
        let mut b = 0.0;
        let mut constant = 0.0;
        if cfg.axis.param == kind_param {
            a = 1.0;
        } else if axis2.param == kind_param {
            b = 1.0;
        } else {
            match kind_param {
                AxisParam::Eps1 => constant = cfg.params.eps1,
                AxisParam::Eps2 => {
                    if let Some(r) = cfg.eps2_ratio {
                        // linked to eps1: follow its axis coefficient
                        if cfg.axis.param == AxisParam::Eps1 {
                            a = r;
                        } else if axis2.param == AxisParam::Eps1 {
                            b = r;
                        } else {
                            constant = r * cfg.params.eps1;
                        }
                    } else {
                        constant = cfg.params.eps2;
                    }
                }
                AxisParam::G => constant = g,
                AxisParam::Amplitude => constant = cfg.drive.amplitude,
            }
        }
        (a, b, constant)
    };

    let (e1a, e1b, e1c) = coefficient(AxisParam::Eps1);
    let (e2a, e2b, e2c) = coefficient(AxisParam::Eps2);
    let (ga, gb, gc) = coefficient(AxisParam::G);

    // (kind, a, b, constant) for value(kind) = a x + b y + constant.
    let families = [
        (ConditionKind::Eps1PlusG, e1a + ga, e1b + gb, e1c + gc),
        (ConditionKind::Eps1MinusG, e1a - ga, e1b - gb, e1c - gc),
        (ConditionKind::Eps2PlusG, e2a + ga, e2b + gb, e2c + gc),
        (ConditionKind::Eps2MinusG, e2a - ga, e2b - gb, e2c - gc),
        (ConditionKind::Eps1PlusEps2, e1a + e2a, e1b + e2b, e1c + e2c),
        (ConditionKind::Eps1MinusEps2, e1a - e2a, e1b - e2b, e1c - e2c),
    ];

    let corners = [
        (cfg.axis.min, axis2.min),
        (cfg.axis.min, axis2.max),
        (cfg.axis.max, axis2.min),
        (cfg.axis.max, axis2.max),
    ];

    let mut out = String::new();
    out.push_str("kind,n,a,b,c\n");
    for (kind, a, b, constant) in families {
        if a.abs() < 1e-14 && b.abs() < 1e-14 {
            // Condition does not vary over the map.
            continue;
        }
        let values: Vec<f64> = corners.iter().map(|&(x, y)| a * x + b * y + constant).collect();
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let n_lo = (lo / omega).ceil() as i64;
        let n_hi = (hi / omega).floor() as i64;
        for n in n_lo..=n_hi {
            // Line: a x + b y = n omega - constant.
            let c = n as f64 * omega - constant;
            writeln!(
                out,
                "{},{},{},{},{}",
                kind.label(),
                n,
                fmt_cell(a),
                fmt_cell(b),
                fmt_cell(c)
            )
            .unwrap();
        }
    }
    Ok(out)
}
