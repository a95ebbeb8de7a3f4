//! Second-order Floquet perturbation theory in the tunnel splittings.
//!
//! In the strong-drive regime `delta_q << A, eps_q` the Floquet problem
//! admits closed forms built from two families of Bessel-weighted lattice
//! sums,
//!
//! ```text
//! lambda_{qk}^+- = J_{+-k}(A/w) / (2 (+-eps_q + g + k w)),
//! chi_{qk}^+-    = +- sum_n J_{+-(n+k)}(A/w) lambda_{qn}^+- ,
//! ```
//!
//! which feed the second-order quasienergies, the analytic Fourier
//! components of the Floquet modes, the analytic overlap-matrix elements and
//! the non-resonant averaged transition probabilities. All series share one
//! harmonic cutoff with the numerical route and refuse to evaluate inside a
//! guard band around vanishing denominators, where the non-resonant
//! expansion breaks down and the resonant (rotating-wave) treatment takes
//! over.

use thiserror::Error;

use crate::floquet::{fold_into_zone, harmonic_cutoff};
use crate::model::{Drive, Qubit, SystemParams};
use crate::numerics::bessel::bessel_j;
use crate::numerics::fourier::FourierTable;
use crate::numerics::linalg::{c64, CVec4};

/// Sign branch of the lattice sums.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        }
    }
}

/// Denominator that hit the non-resonant guard band.
#[derive(Clone, Debug)]
pub enum DenominatorKind {
    /// `+-eps_q + g + k w`
    Lambda { qubit: Qubit, sign: Sign },
    /// `eps1 + eps2 + k w`
    SumBias,
    /// `eps1 - eps2 + k w`
    DiffBias,
}

impl std::fmt::Display for DenominatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DenominatorKind::Lambda { qubit, sign } => {
                write!(f, "{}eps{} + g + k w", sign.label(), qubit.index() + 1)
            }
            DenominatorKind::SumBias => write!(f, "eps1 + eps2 + k w"),
            DenominatorKind::DiffBias => write!(f, "eps1 - eps2 + k w"),
        }
    }
}

#[derive(Debug, Error)]
pub enum PerturbationError {
    #[error("resonant denominator {kind} at k = {k}: |{value:.6e}| < guard {guard:.1e}")]
    Resonant { kind: DenominatorKind, k: i64, value: f64, guard: f64 },
    #[error("harmonic cutoff must be positive, got {0}")]
    BadCutoff(i64),
}

/// Guard band around vanishing denominators, in units of the drive
/// frequency. Analytics refuse inside it; numerics proceed.
pub const DENOMINATOR_GUARD: f64 = 1e-6;

/// Cached Bessel row `J_j(A/w)` for `|j| <= reach`.
struct BesselRow {
    reach: i64,
    values: Vec<f64>,
}

impl BesselRow {
    fn new(a: f64, reach: i64) -> Self {
        let values = (-reach..=reach).map(|j| bessel_j(j, a)).collect();
        BesselRow { reach, values }
    }

    fn get(&self, j: i64) -> f64 {
        if j.abs() > self.reach {
            0.0
        } else {
            self.values[(j + self.reach) as usize]
        }
    }
}

/// The lambda/chi lattice sums over a shared harmonic window.
#[derive(Clone, Debug)]
pub struct ChiTable {
    k_max: i64,
    /// `[qubit][sign]`, inner index `k + k_max`.
    lambda: [[Vec<f64>; 2]; 2],
    chi: [[Vec<f64>; 2]; 2],
    /// Reported truncation tail `|J_K(A/w)| * max |lambda|`.
    pub tail_estimate: f64,
    drive: Drive,
}

impl ChiTable {
    pub fn k_max(&self) -> i64 {
        self.k_max
    }

    pub fn lambda(&self, q: Qubit, sign: Sign, k: i64) -> f64 {
        if k.abs() > self.k_max {
            return 0.0;
        }
        self.lambda[q.index()][sign_index(sign)][(k + self.k_max) as usize]
    }

    pub fn chi(&self, q: Qubit, sign: Sign, k: i64) -> f64 {
        if k.abs() > self.k_max {
            return 0.0;
        }
        self.chi[q.index()][sign_index(sign)][(k + self.k_max) as usize]
    }

    /// Residuals of the two lattice-sum identities at shift `m != 0`:
    ///
    /// ```text
    /// sum_n lambda_{qn} lambda_{q,n-m} = sum_n chi_{qn} chi_{q,n-m}
    ///                                  = +-(chi_{qm} - chi_{q,-m}) / (2 m w)
    /// ```
    ///
    /// Returns `(lambda_residual, chi_residual)`.
    pub fn identity_residuals(&self, q: Qubit, sign: Sign, m: i64) -> (f64, f64) {
        assert!(m != 0, "identity is defined for m != 0");
        let omega = self.drive.omega;
        let rhs = sign.factor() * (self.chi(q, sign, m) - self.chi(q, sign, -m))
            / (2.0 * m as f64 * omega);
        let mut lam_sum = 0.0;
        let mut chi_sum = 0.0;
        for n in -self.k_max..=self.k_max {
            if (n - m).abs() > self.k_max {
                continue;
            }
            lam_sum += self.lambda(q, sign, n) * self.lambda(q, sign, n - m);
            chi_sum += self.chi(q, sign, n) * self.chi(q, sign, n - m);
        }
        ((lam_sum - rhs).abs(), (chi_sum - rhs).abs())
    }
}

fn sign_index(s: Sign) -> usize {
    match s {
        Sign::Plus => 0,
        Sign::Minus => 1,
    }
}

/// Denominator of the lambda sums: `+-eps_q + g + k w`.
fn lambda_denominator(p: &SystemParams, d: &Drive, q: Qubit, sign: Sign, k: i64) -> f64 {
    sign.factor() * p.eps(q) + p.g + k as f64 * d.omega
}

fn check_denominator(
    value: f64,
    kind: DenominatorKind,
    k: i64,
    omega: f64,
) -> Result<f64, PerturbationError> {
    let guard = DENOMINATOR_GUARD * omega;
    if value.abs() < guard {
        Err(PerturbationError::Resonant { kind, k, value, guard })
    } else {
        Ok(value)
    }
}

/// Default cutoff shared with the numerical route.
pub fn default_cutoff(d: &Drive) -> i64 {
    harmonic_cutoff(d)
}

/// Build the lambda/chi table, refusing within the guard band of any
/// `+-eps_q + g + k w` for `|k| <= k_max`.
pub fn chi_table(p: &SystemParams, d: &Drive, k_max: i64) -> Result<ChiTable, PerturbationError> {
    if k_max < 1 {
        return Err(PerturbationError::BadCutoff(k_max));
    }
    let a = d.a_over_omega();
    let bessel = BesselRow::new(a, 2 * k_max + 2);
    let width = (2 * k_max + 1) as usize;

    let mut lambda: [[Vec<f64>; 2]; 2] =
        [[vec![0.0; width], vec![0.0; width]], [vec![0.0; width], vec![0.0; width]]];
    let mut chi: [[Vec<f64>; 2]; 2] =
        [[vec![0.0; width], vec![0.0; width]], [vec![0.0; width], vec![0.0; width]]];

    let mut max_lambda = 0.0f64;
    for q in Qubit::BOTH {
        for sign in Sign::BOTH {
            for k in -k_max..=k_max {
                let denom = check_denominator(
                    lambda_denominator(p, d, q, sign, k),
                    DenominatorKind::Lambda { qubit: q, sign },
                    k,
                    d.omega,
                )?;
                let j = bessel.get(sign.factor() as i64 * k);
                let value = j / (2.0 * denom);
                lambda[q.index()][sign_index(sign)][(k + k_max) as usize] = value;
                max_lambda = max_lambda.max(value.abs());
            }
        }
    }
    for q in Qubit::BOTH {
        for sign in Sign::BOTH {
            for k in -k_max..=k_max {
                let mut acc = 0.0;
                for n in -k_max..=k_max {
                    let j = match sign {
                        Sign::Plus => bessel.get(n + k),
                        Sign::Minus => bessel.get(-(n + k)),
                    };
                    acc += j * lambda[q.index()][sign_index(sign)][(n + k_max) as usize];
                }
                chi[q.index()][sign_index(sign)][(k + k_max) as usize] = sign.factor() * acc;
            }
        }
    }

    let tail_estimate = bessel.get(k_max).abs() * max_lambda;
    Ok(ChiTable { k_max, lambda, chi, tail_estimate, drive: *d })
}

/// Second-order quasienergies, folded into `[-w/2, w/2)`.
pub fn quasienergy_2nd(p: &SystemParams, d: &Drive, table: &ChiTable) -> [f64; 4] {
    let unfolded = quasienergy_2nd_unfolded(p, table);
    let mut out = [0.0; 4];
    for (dst, src) in out.iter_mut().zip(unfolded.iter()) {
        *dst = fold_into_zone(*src, d.omega);
    }
    out
}

/// Second-order quasienergies on their bare branches (not folded).
pub fn quasienergy_2nd_unfolded(p: &SystemParams, table: &ChiTable) -> [f64; 4] {
    let d1 = p.delta1 * p.delta1;
    let d2 = p.delta2 * p.delta2;
    let chi = |q: Qubit, s: Sign| table.chi(q, s, 0);
    [
        -(p.eps1 + p.eps2 + p.g) / 2.0
            - 0.5 * (d1 * chi(Qubit::One, Sign::Plus) + d2 * chi(Qubit::Two, Sign::Plus)),
        -(p.eps1 - p.eps2 - p.g) / 2.0
            - 0.5 * (d1 * chi(Qubit::One, Sign::Minus) - d2 * chi(Qubit::Two, Sign::Plus)),
        (p.eps1 - p.eps2 + p.g) / 2.0
            + 0.5 * (d1 * chi(Qubit::One, Sign::Plus) - d2 * chi(Qubit::Two, Sign::Minus)),
        (p.eps1 + p.eps2 - p.g) / 2.0
            + 0.5 * (d1 * chi(Qubit::One, Sign::Minus) + d2 * chi(Qubit::Two, Sign::Minus)),
    ]
}

/// Analytic Fourier components of the four Floquet modes to second order,
/// on the same harmonic window as the table. Components are real.
pub fn analytic_fourier_components(
    p: &SystemParams,
    d: &Drive,
    table: &ChiTable,
) -> Result<[FourierTable; 4], PerturbationError> {
    let k_max = table.k_max;
    let a = d.a_over_omega();
    let bessel = BesselRow::new(a, 2 * k_max + 2);
    let omega = d.omega;
    let (d1, d2) = (p.delta1, p.delta2);
    let (d1s, d2s) = (d1 * d1, d2 * d2);

    // Denominator guards for the bias-sum and bias-difference families.
    for k in -k_max..=k_max {
        check_denominator(
            p.eps1 + p.eps2 + k as f64 * omega,
            DenominatorKind::SumBias,
            k,
            omega,
        )?;
        check_denominator(
            p.eps1 - p.eps2 + k as f64 * omega,
            DenominatorKind::DiffBias,
            k,
            omega,
        )?;
    }

    let lam = |q: Qubit, s: Sign, k: i64| table.lambda(q, s, k);
    let chi = |q: Qubit, s: Sign, k: i64| table.chi(q, s, k);

    // sum_n (delta1^2 lambda_1n^2 + delta2^2 lambda_2n^2) per sign branch.
    let norm_sq = |s1: Sign, s2: Sign| -> f64 {
        let mut acc = 0.0;
        for n in -k_max..=k_max {
            let l1 = lam(Qubit::One, s1, n);
            let l2 = lam(Qubit::Two, s2, n);
            acc += d1s * l1 * l1 + d2s * l2 * l2;
        }
        acc
    };
    let norm_pp = norm_sq(Sign::Plus, Sign::Plus);
    let norm_mp = norm_sq(Sign::Minus, Sign::Plus);
    let norm_pm = norm_sq(Sign::Plus, Sign::Minus);
    let norm_mm = norm_sq(Sign::Minus, Sign::Minus);

    let mut tables = Vec::with_capacity(4);
    for alpha in 0..4 {
        let mut coeffs = Vec::with_capacity((2 * k_max + 1) as usize);
        for k in -k_max..=k_max {
            let kf = k as f64;
            let v: [f64; 4] = match alpha {
                0 => {
                    // Leading component with its second-order dressing.
                    let mut first = bessel.get(k) * (1.0 - 0.5 * norm_pp);
                    for m in -k_max..=k_max {
                        if m == 0 {
                            continue;
                        }
                        first += 0.5
                            * bessel.get(k - m)
                            * (d1s * chi(Qubit::One, Sign::Plus, -m)
                                + d2s * chi(Qubit::Two, Sign::Plus, -m))
                            / (m as f64 * omega);
                    }
                    let mut fourth = 0.0;
                    for m in -k_max..=k_max {
                        let denom = p.eps1 + p.eps2 + m as f64 * omega;
                        let jm_k = bessel.get(m - k);
                        if jm_k == 0.0 {
                            continue;
                        }
                        let mut inner = 0.0;
                        for n in -k_max..=k_max {
                            inner += (lam(Qubit::One, Sign::Plus, n)
                                + lam(Qubit::Two, Sign::Plus, n))
                                * bessel.get(m - n);
                        }
                        fourth += inner * jm_k / denom;
                    }
                    fourth *= 0.5 * d1 * d2;
                    [first, d2 * lam(Qubit::Two, Sign::Plus, k), d1 * lam(Qubit::One, Sign::Plus, k), fourth]
                }
                1 => {
                    let second = if k == 0 {
                        1.0 - 0.5 * norm_mp
                    } else {
                        (d1s * chi(Qubit::One, Sign::Minus, k)
                            - d2s * chi(Qubit::Two, Sign::Plus, k))
                            / (2.0 * kf * omega)
                    };
                    let third = 0.5 * d1 * d2
                        * (chi(Qubit::One, Sign::Minus, k) - chi(Qubit::Two, Sign::Plus, k))
                        / (p.eps1 - p.eps2 + kf * omega);
                    [
                        -d2 * chi(Qubit::Two, Sign::Plus, k),
                        second,
                        third,
                        d1 * chi(Qubit::One, Sign::Minus, k),
                    ]
                }
                2 => {
                    let third = if k == 0 {
                        1.0 - 0.5 * norm_pm
                    } else {
                        (d2s * chi(Qubit::Two, Sign::Minus, k)
                            - d1s * chi(Qubit::One, Sign::Plus, k))
                            / (2.0 * kf * omega)
                    };
                    let second = 0.5 * d1 * d2
                        * (chi(Qubit::Two, Sign::Minus, k) - chi(Qubit::One, Sign::Plus, k))
                        / (p.eps2 - p.eps1 + kf * omega);
                    [
                        -d1 * chi(Qubit::One, Sign::Plus, k),
                        second,
                        third,
                        d2 * chi(Qubit::Two, Sign::Minus, k),
                    ]
                }
                _ => {
                    let mut first = 0.0;
                    for m in -k_max..=k_max {
                        let denom = p.eps1 + p.eps2 + m as f64 * omega;
                        let jk_m = bessel.get(k + m);
                        if jk_m == 0.0 {
                            continue;
                        }
                        let mut inner = 0.0;
                        for n in -k_max..=k_max {
                            inner += (lam(Qubit::One, Sign::Minus, n)
                                + lam(Qubit::Two, Sign::Minus, n))
                                * bessel.get(n + m);
                        }
                        first += inner * jk_m / denom;
                    }
                    first *= -0.5 * d1 * d2;
                    let mut fourth = bessel.get(-k) * (1.0 - 0.5 * norm_mm);
                    for m in -k_max..=k_max {
                        if m == 0 {
                            continue;
                        }
                        fourth -= 0.5
                            * bessel.get(m - k)
                            * (d1s * chi(Qubit::One, Sign::Minus, -m)
                                + d2s * chi(Qubit::Two, Sign::Minus, -m))
                            / (m as f64 * omega);
                    }
                    [
                        first,
                        d1 * lam(Qubit::One, Sign::Minus, k),
                        d2 * lam(Qubit::Two, Sign::Minus, k),
                        fourth,
                    ]
                }
            };
            coeffs.push(CVec4::new(c64(v[0], 0.0), c64(v[1], 0.0), c64(v[2], 0.0), c64(v[3], 0.0)));
        }
        tables.push(FourierTable::from_coeffs(-k_max, coeffs));
    }
    Ok(match tables.try_into() {
        Ok(t) => t,
        Err(_) => unreachable!(),
    })
}

/// Analytic overlap-matrix elements to leading order. Off-diagonal entries
/// from the closed forms; `S_23 = S_32 = 0` at this order; the diagonal is
/// completed as `1 - sum(off-diagonal row)` so rows sum to one exactly.
pub fn analytic_s_elements(
    p: &SystemParams,
    d: &Drive,
    table: &ChiTable,
) -> Result<[[f64; 4]; 4], PerturbationError> {
    let k_max = table.k_max;
    let a = d.a_over_omega();
    let bessel = BesselRow::new(a, 2 * k_max + 2);
    let omega = d.omega;

    // Two-level ladders: prefactor (delta^2 / 4 eps^2) sum_k [J_k (g+kw)/(den)]^2.
    let ladder = |eps: f64, delta: f64, sign: Sign| -> Result<f64, PerturbationError> {
        let mut acc = 0.0;
        for k in -k_max..=k_max {
            let kf = k as f64;
            let denom = check_denominator(
                sign.factor() * eps + p.g + kf * omega,
                DenominatorKind::Lambda {
                    qubit: if eps == p.eps1 { Qubit::One } else { Qubit::Two },
                    sign,
                },
                k,
                omega,
            )?;
            let term = bessel.get(k) * (p.g + kf * omega) / denom;
            acc += term * term;
        }
        Ok(delta * delta / (4.0 * eps * eps) * acc)
    };

    let s12 = ladder(p.eps2, p.delta2, Sign::Plus)?;
    let s13 = ladder(p.eps1, p.delta1, Sign::Plus)?;
    let s24 = ladder(p.eps1, p.delta1, Sign::Minus)?;
    let s34 = ladder(p.eps2, p.delta2, Sign::Minus)?;
    let s14 = inversion_element(p, d, table, &bessel, Sign::Plus)?;
    let s41 = inversion_element(p, d, table, &bessel, Sign::Minus)?;

    let mut s = [[0.0f64; 4]; 4];
    s[0][1] = s12;
    s[1][0] = s12;
    s[0][2] = s13;
    s[2][0] = s13;
    s[1][3] = s24;
    s[3][1] = s24;
    s[2][3] = s34;
    s[3][2] = s34;
    s[0][3] = s14;
    s[3][0] = s41;
    for alpha in 0..4 {
        let off: f64 = (0..4).filter(|&x| x != alpha).map(|x| s[alpha][x]).sum();
        s[alpha][alpha] = 1.0 - off;
    }
    Ok(s)
}

/// The direct ground-to-top element: `sign` selects the `+g` or `-g` inner
/// denominators (the two elements are not equal).
fn inversion_element(
    p: &SystemParams,
    d: &Drive,
    table: &ChiTable,
    bessel: &BesselRow,
    sign: Sign,
) -> Result<f64, PerturbationError> {
    let k_max = table.k_max;
    let omega = d.omega;
    let mut acc = 0.0;
    for k in -k_max..=k_max {
        let kf = k as f64;
        let outer = check_denominator(
            p.eps1 + p.eps2 + kf * omega,
            DenominatorKind::SumBias,
            k,
            omega,
        )?;
        let mut bracket = 0.0;
        for n in -k_max..=k_max {
            let jj = bessel.get(n) * bessel.get(k - n);
            if jj == 0.0 {
                continue;
            }
            let nf = n as f64;
            let den1 = check_denominator(
                p.eps1 + sign.factor() * p.g + nf * omega,
                DenominatorKind::Lambda { qubit: Qubit::One, sign },
                n,
                omega,
            )?;
            let den2 = check_denominator(
                p.eps2 + sign.factor() * p.g + nf * omega,
                DenominatorKind::Lambda { qubit: Qubit::Two, sign },
                n,
                omega,
            )?;
            let inner = 1.0
                - (p.eps1 * (p.eps1 + kf * omega) / den1
                    + p.eps2 * (p.eps2 + kf * omega) / den2)
                    / outer;
            bracket += jj * inner;
        }
        acc += bracket * bracket;
    }
    let pre = p.delta1 * p.delta1 * p.delta2 * p.delta2
        / (16.0 * p.eps1 * p.eps1 * p.eps2 * p.eps2);
    Ok(pre * acc)
}

/// Non-resonant averaged transition probabilities out of the ground state:
/// `(Pbar_1->2, Pbar_1->3, Pbar_1->4)`.
pub fn nonresonant_probabilities(
    p: &SystemParams,
    d: &Drive,
    table: &ChiTable,
) -> Result<(f64, f64, f64), PerturbationError> {
    let s = analytic_s_elements(p, d, table)?;
    // The printed series are exactly twice the two-level ladder elements for
    // the single-flip channels, and the pair-products-plus-direct combination
    // for the inversion channel (consistent with Pbar = S^T S at this order).
    let p12 = 2.0 * s[0][1];
    let p13 = 2.0 * s[0][2];
    let p14 = s[0][1] * s[1][3] + s[0][2] * s[2][3] + s[0][3] + s[3][0];
    Ok((p12, p13, p14))
}

/// One multiphoton resonance condition family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConditionKind {
    Eps1PlusG,
    Eps1MinusG,
    Eps2PlusG,
    Eps2MinusG,
    Eps1PlusEps2,
    Eps1MinusEps2,
}

impl ConditionKind {
    pub const ALL: [ConditionKind; 6] = [
        ConditionKind::Eps1PlusG,
        ConditionKind::Eps1MinusG,
        ConditionKind::Eps2PlusG,
        ConditionKind::Eps2MinusG,
        ConditionKind::Eps1PlusEps2,
        ConditionKind::Eps1MinusEps2,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ConditionKind::Eps1PlusG => "eps1+g",
            ConditionKind::Eps1MinusG => "eps1-g",
            ConditionKind::Eps2PlusG => "eps2+g",
            ConditionKind::Eps2MinusG => "eps2-g",
            ConditionKind::Eps1PlusEps2 => "eps1+eps2",
            ConditionKind::Eps1MinusEps2 => "eps1-eps2",
        }
    }
}

/// A multiphoton resonance located on a linked bias sweep.
#[derive(Clone, Copy, Debug)]
pub struct Resonance {
    pub kind: ConditionKind,
    /// Photon number: the integer the condition divides into.
    pub n: i64,
    /// Bias of qubit 1 at which the condition holds.
    pub location: f64,
}

/// Linked sweep of the first bias with `eps2 = ratio * eps1`.
#[derive(Clone, Copy, Debug)]
pub struct LinkedSweep {
    pub eps1_min: f64,
    pub eps1_max: f64,
    pub ratio: f64,
}

/// All multiphoton resonance locations inside a linked sweep window.
///
/// Conditions are `(eps1 +- g)/w`, `(eps2 +- g)/w`, `(eps1 +- eps2)/w`
/// integer. With `eps2 = s eps1` each solves to an isolated `eps1`, except
/// the difference condition at `s = 1`, which holds identically and is
/// skipped. Results are sorted by location.
pub fn resonance_catalog(p: &SystemParams, d: &Drive, sweep: &LinkedSweep) -> Vec<Resonance> {
    let (lo, hi) = if sweep.eps1_min <= sweep.eps1_max {
        (sweep.eps1_min, sweep.eps1_max)
    } else {
        (sweep.eps1_max, sweep.eps1_min)
    };
    let s = sweep.ratio;
    let omega = d.omega;
    let mut out = Vec::new();

    // location(n) = (n w + shift) / scale for each condition kind.
    let families: Vec<(ConditionKind, f64, f64)> = vec![
        (ConditionKind::Eps1PlusG, -p.g, 1.0),
        (ConditionKind::Eps1MinusG, p.g, 1.0),
        (ConditionKind::Eps2PlusG, -p.g, s),
        (ConditionKind::Eps2MinusG, p.g, s),
        (ConditionKind::Eps1PlusEps2, 0.0, 1.0 + s),
        (ConditionKind::Eps1MinusEps2, 0.0, 1.0 - s),
    ];

    for (kind, shift, scale) in families {
        if scale.abs() < 1e-12 {
            continue;
        }
        // n such that (n w + shift)/scale lies in [lo, hi]
        let bound_a = (lo * scale - shift) / omega;
        let bound_b = (hi * scale - shift) / omega;
        let (n_lo, n_hi) = if bound_a <= bound_b {
            (bound_a.ceil() as i64, bound_b.floor() as i64)
        } else {
            (bound_b.ceil() as i64, bound_a.floor() as i64)
        };
        for n in n_lo..=n_hi {
            let location = (n as f64 * omega + shift) / scale;
            if location >= lo - 1e-12 && location <= hi + 1e-12 {
                out.push(Resonance { kind, n, location });
            }
        }
    }
    out.sort_by(|x, y| {
        x.location
            .partial_cmp(&y.location)
            .unwrap()
            .then(x.kind.label().cmp(y.kind.label()))
            .then(x.n.cmp(&y.n))
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fig1(eps1: f64) -> (SystemParams, Drive) {
        (
            SystemParams::new(eps1, 2.0 * eps1, 0.1, 0.15, 0.15).unwrap(),
            Drive::new(5.0, 1.0, 0.0).unwrap(),
        )
    }

    #[test]
    fn zero_amplitude_lambda_reduces_to_static_pole() {
        let p = SystemParams::new(1.0, 2.0, 0.1, 0.15, 0.15).unwrap();
        let d = Drive::new(0.0, 1.0, 0.0).unwrap();
        let t = chi_table(&p, &d, 10).unwrap();
        assert_abs_diff_eq!(
            t.lambda(Qubit::One, Sign::Plus, 0),
            1.0 / (2.0 * (p.eps1 + p.g)),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            t.lambda(Qubit::Two, Sign::Minus, 0),
            1.0 / (2.0 * (-p.eps2 + p.g)),
            epsilon = 1e-15
        );
        for k in 1..=10i64 {
            assert_eq!(t.lambda(Qubit::One, Sign::Plus, k), 0.0);
            assert_eq!(t.lambda(Qubit::One, Sign::Minus, -k), 0.0);
        }
    }

    #[test]
    fn lattice_sum_identities_hold() {
        let (p, d) = fig1(0.83);
        let table = chi_table(&p, &d, default_cutoff(&d)).unwrap();
        for q in Qubit::BOTH {
            for sign in Sign::BOTH {
                for m in 1..=5i64 {
                    let (rl, rc) = table.identity_residuals(q, sign, m);
                    assert!(rl <= 1e-9, "lambda identity q={q:?} {sign:?} m={m}: {rl:.2e}");
                    assert!(rc <= 1e-9, "chi identity q={q:?} {sign:?} m={m}: {rc:.2e}");
                    let (rl, rc) = table.identity_residuals(q, sign, -m);
                    assert!(rl <= 1e-9 && rc <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn chi_converged_in_cutoff() {
        let (p, d) = fig1(0.83);
        let t1 = chi_table(&p, &d, default_cutoff(&d)).unwrap();
        let t2 = chi_table(&p, &d, 2 * default_cutoff(&d)).unwrap();
        for q in Qubit::BOTH {
            for sign in Sign::BOTH {
                let diff = (t1.chi(q, sign, 0) - t2.chi(q, sign, 0)).abs();
                assert!(diff < 1e-10, "chi_0 moved by {diff:.2e} on cutoff doubling");
            }
        }
        assert!(t1.tail_estimate < 1e-12);
    }

    #[test]
    fn guard_band_refuses_resonant_denominators() {
        // eps2 + g integer: eps2 = 2 - g makes eps2 + g + k w vanish at k = -2.
        let p = SystemParams::new(0.4, 2.0 - 0.15, 0.1, 0.15, 0.15).unwrap();
        let d = Drive::new(5.0, 1.0, 0.0).unwrap();
        match chi_table(&p, &d, 10) {
            Err(PerturbationError::Resonant { k, kind, .. }) => {
                assert_eq!(k, -2);
                assert!(matches!(kind, DenominatorKind::Lambda { qubit: Qubit::Two, sign: Sign::Plus }));
            }
            other => panic!("expected resonant refusal, got {other:?}"),
        }
    }

    #[test]
    fn quasienergies_reduce_to_zeroth_order_at_zero_splitting() {
        let p = SystemParams::new(0.2, 0.1, 0.0, 0.0, 0.05).unwrap();
        let d = Drive::new(5.0, 1.0, 0.0).unwrap();
        let table = chi_table(&p, &d, default_cutoff(&d)).unwrap();
        let g = quasienergy_2nd(&p, &d, &table);
        assert_abs_diff_eq!(g[0], -(p.eps1 + p.eps2 + p.g) / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g[3], (p.eps1 + p.eps2 - p.g) / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn quasienergy_sum_vanishes_mod_omega() {
        let (p, d) = fig1(0.83);
        let table = chi_table(&p, &d, default_cutoff(&d)).unwrap();
        let g = quasienergy_2nd_unfolded(&p, &table);
        let total: f64 = g.iter().sum();
        // Traceless Hamiltonian: quasienergies sum to zero modulo omega.
        let folded = fold_into_zone(total, d.omega);
        assert!(folded.abs() < 1e-9 || (folded.abs() - d.omega / 2.0).abs() < 1e-9);
    }

    #[test]
    fn analytic_components_reduce_and_normalize() {
        // eps1 = 0.5 with the linked ratio 2 keeps every denominator at
        // least 0.15 away from zero (genuinely non-resonant).
        let (p, d) = fig1(0.5);
        let table = chi_table(&p, &d, default_cutoff(&d)).unwrap();
        let comps = analytic_fourier_components(&p, &d, &table).unwrap();
        // Normalization to fourth order in the effective expansion.
        for alpha in 0..4 {
            assert_abs_diff_eq!(comps[alpha].power(), 1.0, epsilon = 2e-3);
        }

        // Zero splittings: leading Bessel structure only.
        let p0 = SystemParams::new(0.5, 1.0, 0.0, 0.0, 0.15).unwrap();
        let t0 = chi_table(&p0, &d, default_cutoff(&d)).unwrap();
        let c0 = analytic_fourier_components(&p0, &d, &t0).unwrap();
        let a = d.a_over_omega();
        for k in -10..=10i64 {
            assert_abs_diff_eq!(c0[0].get(k)[0].re, bessel_j(k, a), epsilon = 1e-12);
            assert_abs_diff_eq!(c0[3].get(k)[3].re, bessel_j(-k, a), epsilon = 1e-12);
            assert_eq!(c0[1].get(k)[1].re, if k == 0 { 1.0 } else { 0.0 });
        }
    }

    /// Worst-case component mismatch between the analytic tables and a
    /// numerical Floquet solution, after aligning zone fold and global phase.
    fn component_mismatch(p: &SystemParams, d: &Drive) -> f64 {
        let table = chi_table(p, d, default_cutoff(d)).unwrap();
        let ana = analytic_fourier_components(p, d, &table).unwrap();
        let gamma_ana = quasienergy_2nd_unfolded(p, &table);
        let sol = crate::floquet::floquet_modes(p, d, 1e-11).unwrap();
        let mut worst = 0.0f64;
        for alpha in 0..4 {
            let m = ((gamma_ana[alpha] - sol.gammas[alpha]) / d.omega).round() as i64;
            // Phase alignment: numeric u_k ~ phase * analytic u_{k+m}.
            let mut z = c64(0.0, 0.0);
            for (k, c_num) in sol.fourier[alpha].iter() {
                z += c_num.dotc(&ana[alpha].get(k + m));
            }
            let phase = z.conj() / c64(z.norm(), 0.0);
            for (k, c_num) in sol.fourier[alpha].iter() {
                let diff = (c_num / phase - ana[alpha].get(k + m)).norm();
                worst = worst.max(diff);
            }
        }
        worst
    }

    #[test]
    fn quasienergies_match_numerics_quartically() {
        let d = Drive::new(5.0, 1.0, 0.0).unwrap();
        let mismatch = |p: &SystemParams| -> f64 {
            let table = chi_table(p, &d, default_cutoff(&d)).unwrap();
            let ana = quasienergy_2nd(p, &d, &table);
            let sol = crate::floquet::floquet_modes(p, &d, 1e-12).unwrap();
            (0..4)
                .map(|alpha| {
                    let raw = (ana[alpha] - sol.gammas[alpha]).abs() % d.omega;
                    raw.min(d.omega - raw)
                })
                .fold(0.0f64, f64::max)
        };
        let full = mismatch(&SystemParams::new(0.5, 1.0, 0.1, 0.15, 0.15).unwrap());
        let half = mismatch(&SystemParams::new(0.5, 1.0, 0.05, 0.075, 0.15).unwrap());
        assert!(full < 1e-3, "quasienergy mismatch {full:.3e}");
        let ratio = full / half;
        assert!(
            (ratio - 16.0).abs() <= 0.25 * 16.0,
            "expected ~16x shrinkage on splitting halving, got {ratio:.2}"
        );
    }

    #[test]
    fn analytic_components_match_numerics_cubically() {
        let d = Drive::new(5.0, 1.0, 0.0).unwrap();
        let p_full = SystemParams::new(0.5, 1.0, 0.1, 0.15, 0.15).unwrap();
        let p_half = SystemParams::new(0.5, 1.0, 0.05, 0.075, 0.15).unwrap();
        let full = component_mismatch(&p_full, &d);
        let half = component_mismatch(&p_half, &d);
        assert!(full < 2e-2, "mismatch at full splitting: {full:.3e}");
        // Residual is third order in the splittings: halving shrinks ~8x.
        let ratio = full / half;
        assert!(ratio > 5.0, "expected cubic shrinkage, got ratio {ratio:.2}");
    }

    #[test]
    fn static_limit_of_s_elements() {
        // A = 0, only k = 0 survives: S_12 = delta2^2 g^2 / (4 eps2^2 (eps2+g)^2).
        // Biases chosen with eps1 + eps2 away from every integer.
        let p = SystemParams::new(1.1, 2.3, 0.1, 0.15, 0.15).unwrap();
        let d = Drive::new(0.0, 1.0, 0.0).unwrap();
        let table = chi_table(&p, &d, 10).unwrap();
        let s = analytic_s_elements(&p, &d, &table).unwrap();
        let expect = p.delta2 * p.delta2 * p.g * p.g
            / (4.0 * p.eps2 * p.eps2 * (p.eps2 + p.g) * (p.eps2 + p.g));
        assert_abs_diff_eq!(s[0][1], expect, epsilon = 1e-15);

        // g = 0 and A = 0: every ladder numerator vanishes.
        let pg = SystemParams::new(1.1, 2.3, 0.1, 0.15, 0.0).unwrap();
        let tg = chi_table(&pg, &d, 10).unwrap();
        let sg = analytic_s_elements(&pg, &d, &tg).unwrap();
        assert_eq!(sg[0][1], 0.0);
        assert_eq!(sg[0][2], 0.0);
        assert_eq!(sg[0][3], 0.0);
        let (p12, p13, p14) = nonresonant_probabilities(&pg, &d, &tg).unwrap();
        assert_eq!((p12, p13, p14), (0.0, 0.0, 0.0));
    }

    #[test]
    fn rows_of_analytic_s_sum_to_one() {
        let (p, d) = fig1(0.83);
        let table = chi_table(&p, &d, default_cutoff(&d)).unwrap();
        let s = analytic_s_elements(&p, &d, &table).unwrap();
        for row in &s {
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        }
        assert_eq!(s[1][2], 0.0);
        assert_eq!(s[2][1], 0.0);
    }

    #[test]
    fn probability_scaling_in_splittings() {
        let d = Drive::new(5.0, 1.0, 0.0).unwrap();
        let at = |d1: f64, d2: f64| {
            let p = SystemParams::new(0.83, 1.66, d1, d2, 0.15).unwrap();
            let table = chi_table(&p, &d, default_cutoff(&d)).unwrap();
            nonresonant_probabilities(&p, &d, &table).unwrap()
        };
        let (p12, _, _) = at(0.1, 0.15);
        let (p12_half, _, _) = at(0.1, 0.075);
        let ratio = p12 / p12_half;
        assert!((ratio - 4.0).abs() < 0.04, "delta2 halving ratio {ratio}");

        let (_, _, p14) = at(0.1, 0.15);
        let (_, _, p14_half) = at(0.05, 0.15);
        let ratio = p14 / p14_half;
        assert!((ratio - 4.0).abs() < 0.04, "delta1 halving ratio {ratio}");
    }

    #[test]
    fn catalog_matches_closed_forms() {
        let (p, d) = fig1(1.0);
        let sweep = LinkedSweep { eps1_min: 0.2, eps1_max: 3.2, ratio: 2.0 };
        let catalog = resonance_catalog(&p, &d, &sweep);
        // Main single-flip peaks at eps1 = n - g.
        for n in 1..=3i64 {
            let loc = n as f64 - p.g;
            assert!(
                catalog.iter().any(|r| r.kind == ConditionKind::Eps1PlusG
                    && r.n == n
                    && (r.location - loc).abs() < 1e-12),
                "missing eps1+g resonance at {loc}"
            );
        }
        // Inversion peaks at eps1 = n/3, independent of g.
        for n in 1..=9i64 {
            let loc = n as f64 / 3.0;
            assert!(
                catalog.iter().any(|r| r.kind == ConditionKind::Eps1PlusEps2
                    && r.n == n
                    && (r.location - loc).abs() < 1e-12),
                "missing eps1+eps2 resonance at {loc}"
            );
        }
        // Defining congruences hold exactly.
        for r in &catalog {
            let value = match r.kind {
                ConditionKind::Eps1PlusG => r.location + p.g,
                ConditionKind::Eps1MinusG => r.location - p.g,
                ConditionKind::Eps2PlusG => 2.0 * r.location + p.g,
                ConditionKind::Eps2MinusG => 2.0 * r.location - p.g,
                ConditionKind::Eps1PlusEps2 => 3.0 * r.location,
                ConditionKind::Eps1MinusEps2 => -r.location,
            };
            assert_abs_diff_eq!(value / d.omega, r.n as f64, epsilon = 1e-12);
        }
        // g = 0 collapses the +-g families onto integers.
        let p0 = SystemParams::new(1.0, 2.0, 0.1, 0.15, 0.0).unwrap();
        let c0 = resonance_catalog(&p0, &d, &sweep);
        for r in c0.iter().filter(|r| {
            matches!(r.kind, ConditionKind::Eps1PlusG | ConditionKind::Eps1MinusG)
        }) {
            assert_abs_diff_eq!(r.location, r.location.round(), epsilon = 1e-12);
        }
    }
}
