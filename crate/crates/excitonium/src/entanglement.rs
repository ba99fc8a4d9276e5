//! Entanglement quantification in the zero/one-excitation subspace.
//!
//! For a single-excitation density matrix ρ the following measures are
//! available:
//!
//! - pairwise concurrence C_ij = 2|ρ_ij|,
//! - the witness W = Σ_{i<j} |ρ_ij|, positive iff ρ is entangled (site-basis
//!   coherence is necessary and sufficient for entanglement in this
//!   subspace),
//! - the global measure E[ρ] = −Σ_i ρ_ii ln ρ_ii − S(ρ), the relative
//!   entropy of ρ to the closest separable state diag(ρ_11, …, ρ_NN) with
//!   the same trace.
//!
//! All logarithms are natural (results in nats). Unnormalized states are
//! accepted as-is; no renormalization is applied. The convention 0·ln 0 = 0
//! is used throughout and eigenvalues in [−1e-9, 0) are clamped to zero.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exciton::{hermitian_eigenpairs, SingleExcitationState, EIGENVALUE_FLOOR};

/// Default tolerance for boolean entanglement decisions.
pub const ENTANGLEMENT_TOL: f64 = 1e-10;

/// Eigenvalues (or populations) below this are treated as outside the
/// support when evaluating relative entropies.
const SUPPORT_TOL: f64 = 1e-12;

/// Eigenvalue clamp floor used when a report is computed along a
/// propagated trajectory, matching the trajectory positivity slack;
/// standalone operations use the stricter [`EIGENVALUE_FLOOR`].
pub const TRAJECTORY_EIGENVALUE_FLOOR: f64 = -1e-6;

/// Per-time-point entanglement summary of a state.
#[derive(Debug, Clone, PartialEq)]
pub struct EntanglementReport {
    /// Global measure E[ρ] in nats.
    pub global_entanglement: f64,
    /// Witness W = Σ_{i<j} |ρ_ij|.
    pub witness: f64,
    /// Symmetric matrix of pairwise concurrences, zero diagonal.
    pub concurrence: DMatrix<f64>,
    /// Boolean decision at the default tolerance.
    pub is_entangled: bool,
    /// Trace of the state.
    pub trace: f64,
}

impl EntanglementReport {
    /// Concurrence values for i < j in row-major pair order:
    /// (1,2), (1,3), …, (1,N), (2,3), …
    pub fn concurrence_pairs(&self) -> Vec<f64> {
        let n = self.concurrence.nrows();
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(self.concurrence[(i, j)]);
            }
        }
        out
    }
}

/// Full entanglement report for a state.
pub fn report(state: &SingleExcitationState) -> Result<EntanglementReport> {
    report_with_floor(state, EIGENVALUE_FLOOR)
}

/// Report with an explicit eigenvalue clamp floor. Trajectory recording
/// uses [`TRAJECTORY_EIGENVALUE_FLOOR`] so that truncation-level negative
/// eigenvalues (already policed by the trajectory validity check) do not
/// abort the entropy evaluation.
pub fn report_with_floor(state: &SingleExcitationState, floor: f64) -> Result<EntanglementReport> {
    let n = state.n_sites();
    let m = state.matrix();
    let mut conc = DMatrix::<f64>::zeros(n, n);
    let mut w = 0.0;
    let mut max_coh = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let c = m[(i, j)].norm();
            conc[(i, j)] = 2.0 * c;
            conc[(j, i)] = 2.0 * c;
            w += c;
            max_coh = max_coh.max(c);
        }
    }
    let e = (diagonal_entropy_with_floor(state, floor)?
        - von_neumann_entropy_with_floor(state, floor)?)
    .max(0.0);
    Ok(EntanglementReport {
        global_entanglement: e,
        witness: w,
        concurrence: conc,
        is_entangled: max_coh > ENTANGLEMENT_TOL,
        trace: state.trace(),
    })
}

/// Pairwise concurrence C_ij = 2|ρ_ij| between two distinct sites (1-based).
pub fn concurrence(state: &SingleExcitationState, i: usize, j: usize) -> Result<f64> {
    if i == j {
        return Err(Error::InvalidParameter(format!(
            "concurrence requires two distinct sites, got i = j = {i}"
        )));
    }
    Ok(2.0 * state.coherence(i, j)?.norm())
}

/// Entanglement witness W = Σ_{i<j} |ρ_ij|. Positive iff entangled.
pub fn witness(state: &SingleExcitationState) -> f64 {
    let n = state.n_sites();
    let m = state.matrix();
    let mut w = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            w += m[(i, j)].norm();
        }
    }
    w
}

/// True iff some coherence exceeds `tol`: max_{i<j} |ρ_ij| > tol.
pub fn is_entangled(state: &SingleExcitationState, tol: f64) -> bool {
    let n = state.n_sites();
    let m = state.matrix();
    for i in 0..n {
        for j in (i + 1)..n {
            if m[(i, j)].norm() > tol {
                return true;
            }
        }
    }
    false
}

/// The closest separable state diag(ρ_11, …, ρ_NN); trace preserved.
pub fn closest_separable(state: &SingleExcitationState) -> SingleExcitationState {
    let n = state.n_sites();
    let m = state.matrix();
    let d = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(m[(i, i)].re, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    SingleExcitationState::from_matrix_unchecked(d)
}

/// x ln x with the conventions 0·ln 0 = 0 and a clamp window
/// [floor, 0) → 0 for slightly negative numerical values.
fn x_ln_x(x: f64, floor: f64) -> Result<f64> {
    if x < floor {
        return Err(Error::InvalidState(format!(
            "eigenvalue {x} below floor {floor}"
        )));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    Ok(x * x.ln())
}

/// Von Neumann entropy S(ρ) = −Σ λ_k ln λ_k in nats, over the eigenvalues
/// of the (unnormalized) state. Errors if an eigenvalue lies below the
/// clamp window.
pub fn von_neumann_entropy(state: &SingleExcitationState) -> Result<f64> {
    von_neumann_entropy_with_floor(state, EIGENVALUE_FLOOR)
}

pub fn von_neumann_entropy_with_floor(state: &SingleExcitationState, floor: f64) -> Result<f64> {
    let mut s = 0.0;
    for &lambda in state.eigenvalues().iter() {
        s -= x_ln_x(lambda, floor)?;
    }
    Ok(s)
}

/// Entropy of the dephased (diagonal) state: −Σ_i ρ_ii ln ρ_ii.
pub fn diagonal_entropy(state: &SingleExcitationState) -> Result<f64> {
    diagonal_entropy_with_floor(state, EIGENVALUE_FLOOR)
}

fn diagonal_entropy_with_floor(state: &SingleExcitationState, floor: f64) -> Result<f64> {
    let n = state.n_sites();
    let m = state.matrix();
    let mut s = 0.0;
    for i in 0..n {
        s -= x_ln_x(m[(i, i)].re, floor)?;
    }
    Ok(s)
}

/// Global entanglement E[ρ] = −Σ_i ρ_ii ln ρ_ii − S(ρ) ≥ 0 in nats.
pub fn global_entanglement(state: &SingleExcitationState) -> Result<f64> {
    let e = diagonal_entropy(state)? - von_neumann_entropy(state)?;
    // The exact value is nonnegative; only rounding can push it below zero.
    Ok(e.max(0.0))
}

/// Relative entropy S(ρ‖σ) = tr(ρ ln ρ − ρ ln σ).
///
/// Returns `f64::INFINITY` when ρ has support outside the support of σ.
pub fn relative_entropy(
    rho: &SingleExcitationState,
    sigma: &SingleExcitationState,
) -> Result<f64> {
    if rho.n_sites() != sigma.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: rho.n_sites(),
            got: sigma.n_sites(),
        });
    }
    let tr_rho_ln_rho = -von_neumann_entropy(rho)?;

    let (svals, svecs) = hermitian_eigenpairs(sigma.matrix());
    let m = rho.matrix();
    let n = rho.n_sites();
    let mut tr_rho_ln_sigma = 0.0;
    for k in 0..n {
        let s = svals[k];
        if s < EIGENVALUE_FLOOR {
            return Err(Error::InvalidState(format!(
                "sigma eigenvalue {s} below floor {EIGENVALUE_FLOOR}"
            )));
        }
        // q_k = ⟨v_k| ρ |v_k⟩
        let mut q = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                q += svecs[(i, k)].conj() * m[(i, j)] * svecs[(j, k)];
            }
        }
        let q = q.re;
        if s <= SUPPORT_TOL {
            if q > 1e-10 {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        tr_rho_ln_sigma += q * s.ln();
    }
    Ok(tr_rho_ln_rho - tr_rho_ln_sigma)
}
