//! The driven two-qubit model: static parameters, the time-periodic
//! Hamiltonian, and the stationary eigenbases used as transition endpoints.
//!
//! Every energy-like quantity (biases, splittings, coupling, drive amplitude,
//! frequency, rates, quasienergies) shares one frequency unit with `hbar = 1`;
//! all published device numbers quoted in GHz drop in verbatim.
//!
//! # Basis convention
//!
//! The 4-dimensional computational basis is ordered so index 0 has both
//! `sigma_z` eigenvalues +1. With the down-arrow label attached to the +1
//! eigenvector the ordering reads `|dd>, |du>, |ud>, |uu>`; qubit 1 is the
//! slower index. Every module in this crate shares this ordering, which keeps
//! component formulas index-stable. For negative biases the arrow labels
//! invert physically; the index semantics stay fixed.

use thiserror::Error;

use crate::numerics::linalg::{c64, CMat4, CVec4};
use crate::numerics::C64;
use nalgebra::{Matrix2, Vector2};

/// Number of levels of the coupled pair.
pub const N_LEVELS: usize = 4;

/// Display labels for the fixed basis ordering.
pub const BASIS_LABELS: [&str; 4] = ["dd", "du", "ud", "uu"];

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("tunnel splitting delta{qubit} must be finite and >= 0, got {value}")]
    BadSplitting { qubit: usize, value: f64 },
    #[error("parameter {name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("drive frequency must be positive, got {0}")]
    BadFrequency(f64),
    #[error("energy bias eps{qubit} must be nonzero for the perturbative eigensystem")]
    ZeroBias { qubit: usize },
    #[error("single-qubit eigenbasis undefined at eps = delta = 0")]
    DegenerateQubit,
}

/// Static parameters of the coupled pair: biases, splittings, coupling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams {
    pub eps1: f64,
    pub eps2: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub g: f64,
}

impl SystemParams {
    pub fn new(eps1: f64, eps2: f64, delta1: f64, delta2: f64, g: f64) -> Result<Self, ModelError> {
        for (name, value) in [("eps1", eps1), ("eps2", eps2), ("g", g)] {
            if !value.is_finite() {
                return Err(ModelError::NonFinite { name, value });
            }
        }
        for (qubit, value) in [(1usize, delta1), (2, delta2)] {
            if !value.is_finite() || value < 0.0 {
                return Err(ModelError::BadSplitting { qubit, value });
            }
        }
        Ok(SystemParams { eps1, eps2, delta1, delta2, g })
    }

    pub fn eps(&self, q: Qubit) -> f64 {
        match q {
            Qubit::One => self.eps1,
            Qubit::Two => self.eps2,
        }
    }

    pub fn delta(&self, q: Qubit) -> f64 {
        match q {
            Qubit::One => self.delta1,
            Qubit::Two => self.delta2,
        }
    }

    /// Validity warnings for the second-order stationary eigensystem, which
    /// assumes `|g|` and `delta_q` small against the biases. Warns only;
    /// nothing is clamped and numerical routes ignore this entirely.
    pub fn perturbative_validity_warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        let min_eps = self.eps1.abs().min(self.eps2.abs());
        if self.g.abs() >= min_eps {
            w.push(format!(
                "|g| = {} is not small against min|eps| = {}; second-order stationary \
                 eigensystem may be inaccurate",
                self.g.abs(),
                min_eps
            ));
        }
        for (q, delta, eps) in [(1, self.delta1, self.eps1), (2, self.delta2, self.eps2)] {
            if eps != 0.0 && delta > 0.5 * eps.abs() {
                w.push(format!(
                    "delta{q} = {delta} is not small against |eps{q}| = {}; second-order \
                     stationary eigensystem may be inaccurate",
                    eps.abs()
                ));
            }
        }
        w
    }
}

/// Periodic drive `v(t) = A cos(w t - phi0)` applied to both qubit biases
/// with equal amplitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Drive {
    pub amplitude: f64,
    pub omega: f64,
    pub phi0: f64,
}

impl Drive {
    pub fn new(amplitude: f64, omega: f64, phi0: f64) -> Result<Self, ModelError> {
        if !amplitude.is_finite() {
            return Err(ModelError::NonFinite { name: "amplitude", value: amplitude });
        }
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(ModelError::BadFrequency(omega));
        }
        if !phi0.is_finite() {
            return Err(ModelError::NonFinite { name: "phi0", value: phi0 });
        }
        let tau = 2.0 * std::f64::consts::PI;
        Ok(Drive { amplitude, omega, phi0: phi0.rem_euclid(tau) })
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }

    /// Instantaneous field value `A cos(w t - phi0)`.
    pub fn field(&self, t: f64) -> f64 {
        self.amplitude * (self.omega * t - self.phi0).cos()
    }

    /// Dimensionless strong-drive parameter `A / w`, the Bessel argument of
    /// every lattice sum.
    pub fn a_over_omega(&self) -> f64 {
        self.amplitude / self.omega
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Qubit {
    One,
    Two,
}

impl Qubit {
    pub const BOTH: [Qubit; 2] = [Qubit::One, Qubit::Two];

    pub fn index(self) -> usize {
        match self {
            Qubit::One => 0,
            Qubit::Two => 1,
        }
    }
}

/// Bare `sigma_z` on one qubit, extended to the pair.
pub fn sigma_z(q: Qubit) -> CMat4 {
    let diag: [f64; 4] = match q {
        Qubit::One => [1.0, 1.0, -1.0, -1.0],
        Qubit::Two => [1.0, -1.0, 1.0, -1.0],
    };
    CMat4::from_fn(|r, c| if r == c { c64(diag[r], 0.0) } else { c64(0.0, 0.0) })
}

/// Bare `sigma_x` on one qubit, extended to the pair.
pub fn sigma_x(q: Qubit) -> CMat4 {
    let mut m = CMat4::zeros();
    let pairs: [(usize, usize); 2] = match q {
        Qubit::One => [(0, 2), (1, 3)],
        Qubit::Two => [(0, 1), (2, 3)],
    };
    for (a, b) in pairs {
        m[(a, b)] = c64(1.0, 0.0);
        m[(b, a)] = c64(1.0, 0.0);
    }
    m
}

/// Tensor product of two single-qubit operators (qubit 1 slow index).
pub fn tensor(a: &Matrix2<C64>, b: &Matrix2<C64>) -> CMat4 {
    CMat4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

/// Lift a single-qubit operator to the pair (identity on the other factor).
pub fn lift(q: Qubit, op: &Matrix2<C64>) -> CMat4 {
    let id = Matrix2::identity();
    match q {
        Qubit::One => tensor(op, &id),
        Qubit::Two => tensor(&id, op),
    }
}

/// Static part of the Hamiltonian: biases, splittings and the `zz` coupling.
pub fn static_hamiltonian(p: &SystemParams) -> CMat4 {
    let mut h = CMat4::zeros();
    h -= sigma_z(Qubit::One) * c64(p.eps1 / 2.0, 0.0);
    h -= sigma_z(Qubit::Two) * c64(p.eps2 / 2.0, 0.0);
    h -= sigma_x(Qubit::One) * c64(p.delta1 / 2.0, 0.0);
    h -= sigma_x(Qubit::Two) * c64(p.delta2 / 2.0, 0.0);
    h -= sigma_z(Qubit::One) * sigma_z(Qubit::Two) * c64(p.g / 2.0, 0.0);
    h
}

/// Operator the drive couples to: `-(sigma_z1 + sigma_z2)/2`.
pub fn drive_operator() -> CMat4 {
    (sigma_z(Qubit::One) + sigma_z(Qubit::Two)) * c64(-0.5, 0.0)
}

/// Full Hamiltonian at time `t`. Hermitian and `T`-periodic by construction.
pub fn hamiltonian_at(p: &SystemParams, d: &Drive, t: f64) -> CMat4 {
    static_hamiltonian(p) + drive_operator() * c64(d.field(t), 0.0)
}

/// Exact eigenbasis of one undriven, uncoupled qubit `-(eps sigma_z +
/// delta sigma_x)/2`.
///
/// `down` is the branch continuously connected to the +1 `sigma_z`
/// eigenvector as `delta -> 0` at positive bias (the ground state there);
/// `up` is orthogonal; `gap = sqrt(eps^2 + delta^2)`.
#[derive(Clone, Debug)]
pub struct SingleQubitBasis {
    pub down: Vector2<C64>,
    pub up: Vector2<C64>,
    pub gap: f64,
}

pub fn single_qubit_eigenbasis(eps: f64, delta: f64) -> Result<SingleQubitBasis, ModelError> {
    if eps == 0.0 && delta == 0.0 {
        return Err(ModelError::DegenerateQubit);
    }
    let theta = delta.atan2(eps);
    let (s, c) = (0.5 * theta).sin_cos();
    Ok(SingleQubitBasis {
        down: Vector2::new(c64(c, 0.0), c64(s, 0.0)),
        up: Vector2::new(c64(-s, 0.0), c64(c, 0.0)),
        gap: eps.hypot(delta),
    })
}

/// Stationary eigensystem of the uncoupled pair to second order in the
/// splittings, with energies to the same order.
#[derive(Clone, Debug)]
pub struct UncoupledEigensystem {
    /// Perturbative states, basis ordering `dd, du, ud, uu`.
    pub states: [CVec4; 4],
    /// Energies `E_1..E_4`; `E_1 + E_4 = E_2 + E_3 = 0` exactly.
    pub energies: [f64; 4],
    /// Validity warnings (never fatal).
    pub warnings: Vec<String>,
}

/// Second-order stationary states and energies of the uncoupled pair.
///
/// Requires nonzero biases; the expansion carries `delta/eps` factors.
pub fn uncoupled_eigensystem(p: &SystemParams) -> Result<UncoupledEigensystem, ModelError> {
    if p.eps1 == 0.0 {
        return Err(ModelError::ZeroBias { qubit: 1 });
    }
    if p.eps2 == 0.0 {
        return Err(ModelError::ZeroBias { qubit: 2 });
    }
    let r1 = p.delta1 / (2.0 * p.eps1);
    let r2 = p.delta2 / (2.0 * p.eps2);
    let lead = 1.0 - 0.5 * r1 * r1 - 0.5 * r2 * r2;
    let cross = r1 * r2;

    let re = |v: [f64; 4]| CVec4::from_fn(|i, _| c64(v[i], 0.0));
    let states = [
        re([lead, r2, r1, cross]),
        re([-r2, lead, -cross, r1]),
        re([-r1, -cross, lead, r2]),
        re([cross, -r1, -r2, lead]),
    ];

    let shift1 = p.delta1 * p.delta1 / (4.0 * p.eps1);
    let shift2 = p.delta2 * p.delta2 / (4.0 * p.eps2);
    let energies = [
        -(p.eps1 + p.eps2) / 2.0 - shift1 - shift2,
        -(p.eps1 - p.eps2) / 2.0 - shift1 + shift2,
        (p.eps1 - p.eps2) / 2.0 + shift1 - shift2,
        (p.eps1 + p.eps2) / 2.0 + shift1 + shift2,
    ];

    Ok(UncoupledEigensystem {
        states,
        energies,
        warnings: p.perturbative_validity_warnings(),
    })
}

/// Exactly orthonormal stationary basis: tensor products of the exact
/// single-qubit eigenvectors. Agrees with the perturbative states to third
/// order in the splittings and is the default endpoint basis for transition
/// probabilities.
pub fn exact_uncoupled_basis(p: &SystemParams) -> Result<[CVec4; 4], ModelError> {
    let b1 = single_qubit_eigenbasis(p.eps1, p.delta1)?;
    let b2 = single_qubit_eigenbasis(p.eps2, p.delta2)?;
    let prod = |a: &Vector2<C64>, b: &Vector2<C64>| {
        CVec4::new(a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
    };
    Ok([
        prod(&b1.down, &b2.down),
        prod(&b1.down, &b2.up),
        prod(&b1.up, &b2.down),
        prod(&b1.up, &b2.up),
    ])
}

/// The computational basis as explicit vectors.
pub fn computational_basis() -> [CVec4; 4] {
    let mut out = [CVec4::zeros(); 4];
    for (i, v) in out.iter_mut().enumerate() {
        v[i] = c64(1.0, 0.0);
    }
    out
}
