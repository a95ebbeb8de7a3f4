//! Numerical Floquet analysis of the driven pair: one-period propagator,
//! quasienergies folded into the Floquet zone, periodic modes with their
//! Fourier components, the doubly stochastic overlap matrix, and a
//! brute-force time-domain average used as an independent oracle.
//!
//! A periodic Hamiltonian `H(t) = H(t + T)` admits solutions `e^{-i gamma t}
//! u(t)` with `u` T-periodic. The eigenphases of the monodromy `U(T, 0)`
//! give the quasienergies `gamma_alpha`, defined modulo the drive frequency
//! and folded here into `[-w/2, w/2)`. Phase- and duration-averaged
//! transition probabilities between stationary states reduce, away from
//! quasienergy degeneracies, to `Pbar = S^T S` with `S_{ax} = (1/T) int |
//! <u_a(t)|x> |^2 dt`.

use thiserror::Error;

use crate::model::{hamiltonian_at, Drive, SystemParams};
use crate::numerics::fourier::{fourier_components, FourierError, FourierTable, TimeGrid};
use crate::numerics::linalg::{unitary_eigen, CMat4, CVec4, LinalgError};
use crate::numerics::ode::{propagate_path, OdeError};
use crate::numerics::{propagate, C64};

#[derive(Debug, Error)]
pub enum FloquetError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Fourier(#[from] FourierError),
    #[error("Fourier and time-average routes disagree by {gap:.3e} (limit 1e-6)")]
    RouteDisagreement { gap: f64 },
    #[error("{0}")]
    BadArgument(&'static str),
}

/// Harmonic cutoff policy: `ceil(A/w) + 30`. Bessel weights `J_k(A/w)` are
/// below 1e-12 beyond this order for every parameter set of interest.
pub fn harmonic_cutoff(d: &Drive) -> i64 {
    d.a_over_omega().abs().ceil() as i64 + 30
}

/// Fold an energy into the Floquet zone `[-w/2, w/2)`.
pub fn fold_into_zone(x: f64, omega: f64) -> f64 {
    let mut y = x - omega * (x / omega).round();
    if y >= omega / 2.0 {
        y -= omega;
    }
    if y < -omega / 2.0 {
        y += omega;
    }
    y
}

/// Two quasienergies closer than `1e-3 w` (mod `w`): the non-degenerate
/// averaging behind `Pbar = S^T S` is unreliable there.
pub const RESONANCE_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Copy, Debug)]
pub struct ResonantPair {
    pub alpha: usize,
    pub beta: usize,
    /// Circular distance of the folded quasienergies, in units of `w`.
    pub gap_over_omega: f64,
}

/// One-period propagator `U(T, 0)` with the zero-initial-phase convention.
pub fn monodromy(p: &SystemParams, d: &Drive, tol: f64) -> Result<CMat4, FloquetError> {
    let d0 = Drive { phi0: 0.0, ..*d };
    let u = propagate(
        |t| hamiltonian_at(p, &d0, t),
        CMat4::identity(),
        0.0,
        d0.period(),
        tol,
    )?;
    Ok(u)
}

/// One-period propagator for an arbitrary T-periodic Hamiltonian closure.
/// Extension hook for drives outside the equal-amplitude model.
pub fn monodromy_of<H>(h: H, period: f64, tol: f64) -> Result<CMat4, FloquetError>
where
    H: Fn(f64) -> CMat4,
{
    Ok(propagate(h, CMat4::identity(), 0.0, period, tol)?)
}

/// Quasienergies of a monodromy matrix, folded into `[-w/2, w/2)`, ascending.
pub fn quasienergies(monodromy: &CMat4, omega: f64) -> Result<[f64; 4], FloquetError> {
    let (vals, _) = quasienergies_with_vectors(monodromy, omega)?;
    let mut sorted = vals;
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(sorted)
}

/// Quasienergies and the matching monodromy eigenvectors, unsorted.
pub fn quasienergies_with_vectors(
    monodromy: &CMat4,
    omega: f64,
) -> Result<([f64; 4], [CVec4; 4]), FloquetError> {
    let period = 2.0 * std::f64::consts::PI / omega;
    let (etas, vecs) = unitary_eigen(monodromy)?;
    let mut gammas = [0.0; 4];
    let mut vectors = [CVec4::zeros(); 4];
    for j in 0..4 {
        // eta = e^{-i gamma T}; arg in (-pi, pi] maps onto [-w/2, w/2).
        gammas[j] = -etas[j].arg() / period;
        vectors[j] = vecs.column(j).into_owned();
    }
    Ok((gammas, vectors))
}

/// Full Floquet solution on a period grid.
#[derive(Clone, Debug)]
pub struct FloquetSolution {
    /// Folded quasienergies, labeled so mode `alpha` dominates computational
    /// component `alpha` (continuity relabeling is a sweep-level concern).
    pub gammas: [f64; 4],
    /// Monodromy eigenvectors under the same labeling.
    pub eigenvectors: [CVec4; 4],
    /// Periodic modes `u_alpha(t_j)` on the grid, `modes[j][alpha]`.
    pub modes: Vec<[CVec4; 4]>,
    /// Fourier components per mode over `|k| <= k_max`.
    pub fourier: [FourierTable; 4],
    pub grid: TimeGrid,
    pub k_max: i64,
    /// Set when two quasienergies collide within `RESONANCE_TOLERANCE * w`.
    pub resonant: Option<ResonantPair>,
    /// Largest `|| u_alpha(T) - u_alpha(0) ||` over modes.
    pub periodicity_defect: f64,
}

/// Solve the Floquet eigenproblem numerically: monodromy, quasienergies,
/// modes `u_alpha(t) = e^{i gamma_alpha t} U(t,0) v_alpha` and their Fourier
/// components.
pub fn floquet_modes(p: &SystemParams, d: &Drive, tol: f64) -> Result<FloquetSolution, FloquetError> {
    let d0 = Drive { phi0: 0.0, ..*d };
    let k_max = harmonic_cutoff(&d0);
    let grid = TimeGrid::for_cutoff(d0.omega, k_max)?;
    let n = grid.n_samples();

    let mut times = grid.times();
    times.push(grid.period());
    let props = propagate_path(
        |t| hamiltonian_at(p, &d0, t),
        CMat4::identity(),
        &times,
        tol,
    )?;
    let mono = props[n];
    let (gammas_raw, vecs_raw) = quasienergies_with_vectors(&mono, d0.omega)?;

    // u_alpha(t_j) for each eigenpair.
    let mut modes_raw: Vec<[CVec4; 4]> = Vec::with_capacity(n);
    for (j, u_t) in props.iter().take(n).enumerate() {
        let t = grid.time(j);
        let mut at_t = [CVec4::zeros(); 4];
        for alpha in 0..4 {
            let phase = C64::new(0.0, gammas_raw[alpha] * t).exp();
            at_t[alpha] = u_t * vecs_raw[alpha] * phase;
        }
        modes_raw.push(at_t);
    }

    // Label modes by the computational component they dominate on average.
    let mut weight = [[0.0f64; 4]; 4];
    for at_t in &modes_raw {
        for alpha in 0..4 {
            for x in 0..4 {
                weight[alpha][x] += at_t[alpha][x].norm_sqr();
            }
        }
    }
    let perm = best_assignment(&weight);

    let mut gammas = [0.0; 4];
    let mut eigenvectors = [CVec4::zeros(); 4];
    for alpha in 0..4 {
        // perm[alpha] = raw index whose dominant component is alpha.
        gammas[alpha] = gammas_raw[perm[alpha]];
        eigenvectors[alpha] = vecs_raw[perm[alpha]];
    }
    let modes: Vec<[CVec4; 4]> = modes_raw
        .iter()
        .map(|at_t| [at_t[perm[0]], at_t[perm[1]], at_t[perm[2]], at_t[perm[3]]])
        .collect();

    // Periodicity: u_alpha(T) = e^{i gamma T} U(T,0) v = v up to solver error.
    let mut periodicity_defect = 0.0f64;
    for alpha in 0..4 {
        let phase = C64::new(0.0, gammas[alpha] * grid.period()).exp();
        let wrapped = props[n] * eigenvectors[alpha] * phase;
        periodicity_defect = periodicity_defect.max((wrapped - modes[0][alpha]).norm());
    }

    let mut resonant = None;
    let mut min_gap = f64::INFINITY;
    for a in 0..4 {
        for b in (a + 1)..4 {
            let raw = (gammas[a] - gammas[b]).abs() % d0.omega;
            let gap = raw.min(d0.omega - raw) / d0.omega;
            if gap < min_gap {
                min_gap = gap;
                if gap < RESONANCE_TOLERANCE {
                    resonant = Some(ResonantPair { alpha: a, beta: b, gap_over_omega: gap });
                }
            }
        }
    }

    let mut fourier_vec = Vec::with_capacity(4);
    for alpha in 0..4 {
        let samples: Vec<CVec4> = modes.iter().map(|at_t| at_t[alpha]).collect();
        fourier_vec.push(fourier_components(&samples, &grid, -k_max, k_max)?);
    }
    let fourier: [FourierTable; 4] = match fourier_vec.try_into() {
        Ok(f) => f,
        Err(_) => unreachable!(),
    };

    Ok(FloquetSolution {
        gammas,
        eigenvectors,
        modes,
        fourier,
        grid,
        k_max,
        resonant,
        periodicity_defect,
    })
}

/// Permutation `perm[alpha] -> raw index` maximizing the summed weights
/// (4 items: plain enumeration).
fn best_assignment(weight: &[[f64; 4]; 4]) -> [usize; 4] {
    let mut best = [0, 1, 2, 3];
    let mut best_score = f64::NEG_INFINITY;
    permutations4(|perm| {
        let score: f64 = (0..4).map(|alpha| weight[perm[alpha]][alpha]).sum();
        if score > best_score {
            best_score = score;
            best = perm;
        }
    });
    best
}

fn permutations4<F: FnMut([usize; 4])>(mut f: F) {
    let mut idx = [0usize; 4];
    for a in 0..4 {
        for b in 0..4 {
            if b == a {
                continue;
            }
            for c in 0..4 {
                if c == a || c == b {
                    continue;
                }
                let d = 6 - a - b - c;
                idx[0] = a;
                idx[1] = b;
                idx[2] = c;
                idx[3] = d;
                f(idx);
            }
        }
    }
}

/// Relabeling that keeps sweep branches continuous: permutation of the new
/// eigenvectors maximizing overlap with the previous point's eigenvectors.
pub fn continuity_permutation(prev: &[CVec4; 4], new: &[CVec4; 4]) -> [usize; 4] {
    let mut weight = [[0.0f64; 4]; 4];
    for (j, nv) in new.iter().enumerate() {
        for (a, pv) in prev.iter().enumerate() {
            weight[j][a] = pv.dotc(nv).norm_sqr();
        }
    }
    best_assignment(&weight)
}

/// Time-averaged overlaps and the derived transition probabilities.
#[derive(Clone, Debug)]
pub struct TransitionTable {
    /// `S[alpha][x]`: time-averaged `|<u_alpha(t)|x>|^2`. Doubly stochastic.
    pub s: [[f64; 4]; 4],
    /// `Pbar = S^T S`: phase/duration-averaged transition probabilities.
    pub pbar: [[f64; 4]; 4],
    /// Largest disagreement between the Fourier-sum and time-average routes.
    pub route_gap: f64,
    /// Inherited from the Floquet solution.
    pub resonant: Option<ResonantPair>,
}

impl TransitionTable {
    pub fn pbar_from(&self, a: usize) -> [f64; 4] {
        self.pbar[a]
    }
}

/// Compute `S` by both routes (harmonic sum and grid time average) and form
/// `Pbar = S^T S`. The two routes must agree; a gap beyond 1e-6 signals an
/// internal inconsistency (grid too coarse or harmonics beyond the cutoff).
pub fn s_matrix(sol: &FloquetSolution, basis: &[CVec4; 4]) -> Result<TransitionTable, FloquetError> {
    let n = sol.grid.n_samples() as f64;
    let mut s_time = [[0.0f64; 4]; 4];
    for at_t in &sol.modes {
        for alpha in 0..4 {
            for x in 0..4 {
                s_time[alpha][x] += at_t[alpha].dotc(&basis[x]).norm_sqr();
            }
        }
    }
    for row in s_time.iter_mut() {
        for v in row.iter_mut() {
            *v /= n;
        }
    }

    let mut gap = 0.0f64;
    for alpha in 0..4 {
        for x in 0..4 {
            let four: f64 = sol.fourier[alpha]
                .iter()
                .map(|(_, c)| c.dotc(&basis[x]).norm_sqr())
                .sum();
            gap = gap.max((four - s_time[alpha][x]).abs());
        }
    }
    if gap > 1e-6 {
        return Err(FloquetError::RouteDisagreement { gap });
    }

    let mut pbar = [[0.0f64; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            pbar[a][b] = (0..4).map(|alpha| s_time[alpha][a] * s_time[alpha][b]).sum();
        }
    }
    Ok(TransitionTable { s: s_time, pbar, route_gap: gap, resonant: sol.resonant })
}

/// Direct duration- and phase-averaged transition probability: evolve from
/// `basis[a]` starting at `n_phases` uniformly spaced arrival times within
/// the period, sample `|<b|psi>|^2` on a sub-grid for `n_periods` periods,
/// and average everything. Converges to the `Pbar` entry as the number of
/// periods grows; kept deliberately independent of the mode/Fourier route.
pub fn time_domain_oracle(
    p: &SystemParams,
    d: &Drive,
    basis: &[CVec4; 4],
    a: usize,
    b: usize,
    n_periods: usize,
    n_phases: usize,
    tol: f64,
) -> Result<f64, FloquetError> {
    if n_periods < 100 {
        return Err(FloquetError::BadArgument("n_periods must be at least 100"));
    }
    if n_phases < 8 {
        return Err(FloquetError::BadArgument("n_phases must be at least 8"));
    }
    if a >= 4 || b >= 4 {
        return Err(FloquetError::BadArgument("state indices must be 0..4"));
    }
    let d0 = Drive { phi0: 0.0, ..*d };
    let period = d0.period();
    let n_sub = 256usize;

    let mut total = 0.0f64;
    for phase_idx in 0..n_phases {
        let t0 = period * phase_idx as f64 / n_phases as f64;
        let times: Vec<f64> = (0..=n_sub).map(|i| t0 + period * i as f64 / n_sub as f64).collect();
        let props = propagate_path(
            |t| hamiltonian_at(p, &d0, t),
            CMat4::identity(),
            &times,
            tol,
        )?;
        let mono = props[n_sub];

        let mut psi = basis[a];
        let mut acc = 0.0f64;
        for cycle in 0..n_periods {
            for w in props.iter().take(n_sub) {
                acc += (w * psi).dotc(&basis[b]).norm_sqr();
            }
            psi = mono * psi;
            if cycle % 64 == 63 {
                let norm = psi.norm();
                if norm > 0.0 {
                    psi /= C64::new(norm, 0.0);
                }
            }
        }
        total += acc / (n_periods * n_sub) as f64;
    }
    Ok(total / n_phases as f64)
}
