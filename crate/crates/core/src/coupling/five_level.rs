//! Reduction of the five-level subspace reached from |u_down, g> to the
//! two-level write model, including the partner Rydberg pair.
//!
//! Basis order: |u,i_dn>, |u,i_up>, |d,s_up>, |u,g>, |d,s_dn>.

use crate::error::{require_positive, Error, Result};
use nalgebra::{Matrix2, Matrix5, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Parameters for the down-channel subspace, rad/us. `delta_dn`/`delta_up`
/// are the intermediate detunings, `d`/`d_prime` the dipolar couplings to
/// |d,s_dn> and |d,s_up>, and `delta2`/`delta2_prime` the detunings of those
/// two pair states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveLevelParams {
    pub delta_dn: f64,
    pub delta_up: f64,
    pub omega_dn: f64,
    pub omega_up: f64,
    pub d: f64,
    pub d_prime: f64,
    pub delta2: f64,
    pub delta2_prime: f64,
}

/// Reduced 2x2 Hamiltonians on (|u,g>, |d,s_dn>).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedHamiltonian {
    /// Elimination with the up-block diagonalized exactly.
    pub reduced: Matrix2<f64>,
    /// The same with `d_prime = 0`.
    pub single_rydberg: Matrix2<f64>,
    /// `reduced[(0,0)] - single_rydberg[(0,0)]`.
    pub correction: f64,
    /// Smallest separation between a fast level and the slow subspace.
    pub min_gap: f64,
}

pub fn five_level_hamiltonian(p: &FiveLevelParams) -> Matrix5<f64> {
    let mut h = Matrix5::zeros();
    h[(0, 0)] = -p.delta_dn;
    h[(1, 1)] = -p.delta_up;
    h[(2, 2)] = -p.delta2_prime;
    h[(4, 4)] = -p.delta2;
    let set = |h: &mut Matrix5<f64>, i: usize, j: usize, v: f64| {
        h[(i, j)] = v;
        h[(j, i)] = v;
    };
    set(&mut h, 0, 3, p.omega_dn);
    set(&mut h, 1, 3, p.omega_up);
    set(&mut h, 0, 4, p.d);
    set(&mut h, 1, 2, p.d_prime);
    h
}

fn up_block_shift(p: &FiveLevelParams, d_prime: f64) -> (f64, f64) {
    let a = 0.5 * (p.delta_up - p.delta2_prime);
    let lam0 = 0.5 * (p.delta_up + p.delta2_prime);
    let lam = (a * a + d_prime * d_prime).sqrt();
    // Up-block levels sit at -lam0 -+ lam with weights (lam +- a)/(2 lam) on |u,i_up>.
    let (w_minus, w_plus) = if lam == 0.0 {
        (1.0, 0.0)
    } else {
        ((lam + a) / (2.0 * lam), (lam - a) / (2.0 * lam))
    };
    let shift = p.omega_up * p.omega_up * (w_minus / (lam0 + lam) + w_plus / (lam0 - lam));
    let gap = (lam0 + lam).abs().min((lam0 - lam).abs());
    (shift, gap)
}

/// Second-order elimination of the three fast levels.
pub fn five_level_reduce(p: &FiveLevelParams) -> Result<ReducedHamiltonian> {
    for (name, v) in [
        ("omega_dn", p.omega_dn),
        ("omega_up", p.omega_up),
        ("d", p.d),
        ("d_prime", p.d_prime),
        ("delta2", p.delta2),
        ("delta2_prime", p.delta2_prime),
    ] {
        if !v.is_finite() {
            return Err(Error::domain(name, "must be finite"));
        }
    }
    require_positive("delta_dn", p.delta_dn.abs())?;
    let (shift, up_gap) = up_block_shift(p, p.d_prime);
    let (shift0, _) = up_block_shift(p, 0.0);
    let min_gap = p.delta_dn.abs().min(up_gap);
    let scale = p
        .omega_dn
        .abs()
        .max(p.omega_up.abs())
        .max(p.d.abs())
        .max(p.delta2.abs());
    if min_gap < 5.0 * scale {
        return Err(Error::Hierarchy(format!(
            "fast-level gap {min_gap:.3} rad/us is below 5x the slow scale {scale:.3} rad/us"
        )));
    }
    let base = |s: f64| {
        Matrix2::new(
            p.omega_dn * p.omega_dn / p.delta_dn + s,
            p.omega_dn * p.d / p.delta_dn,
            p.omega_dn * p.d / p.delta_dn,
            -p.delta2 + p.d * p.d / p.delta_dn,
        )
    };
    let reduced = base(shift);
    let single_rydberg = base(shift0);
    Ok(ReducedHamiltonian {
        reduced,
        single_rydberg,
        correction: shift - shift0,
        min_gap,
    })
}

/// The two eigenvalues of the full Hamiltonian closest to zero, ascending.
pub fn slow_eigenvalues(p: &FiveLevelParams) -> [f64; 2] {
    let eig = SymmetricEigen::new(five_level_hamiltonian(p));
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let (a, b) = (v[0], v[1]);
    [a.min(b), a.max(b)]
}

/// Eigenvalues of a symmetric 2x2, ascending.
pub fn eigenvalues2(m: &Matrix2<f64>) -> [f64; 2] {
    let tr = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let h = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    let r = (h * h + m[(0, 1)] * m[(0, 1)]).sqrt();
    [tr - r, tr + r]
}
