//! Markovian Redfield dynamics in full and secular variants, plus the
//! Gibbs-state utilities used for equilibrium checks.
//!
//! The generator acts on exciton-basis density matrices. With site
//! projectors A_j = Vᵀ|j⟩⟨j|V and the one-sided bath response
//! Θ(ω) = ∫_0^∞ C(t) e^{−iωt} dt evaluated per exciton gap, the dissipator
//! is
//!
//!   Σ_j ( Λ_j ρ A_j + A_j ρ Λ_j† − A_j Λ_j ρ − ρ Λ_j† A_j ),
//!   (Λ_j)_ab = Θ(E_a − E_b) (A_j)_ab.
//!
//! Re Θ(ω) = J(−ω)/(1 − e^{βω}) is the detailed-balance rate spectrum
//! C̃(−ω)/2; the imaginary part (the Lamb-type level shift) is kept by
//! default so that the weak-coupling limit tracks the exact reorganization
//! dynamics. The secular variant zeroes every tensor element that couples
//! density-matrix entries whose exciton-frequency gaps differ, which yields
//! a completely positive (Lindblad-form) generator.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::bath::{correlation_coefficients, BathSpec};
use crate::error::{Error, Result};
use crate::exciton::{ElectronicHamiltonian, ExcitonDecomposition, SingleExcitationState};
use crate::heom::TrappingSpec;
use crate::propagation::{integrate, IntegratorOptions, OdeSystem};
use crate::trajectory::{SolverKind, Trajectory, ValidityTolerances};
use crate::units::{thermal_energy, WAVENUMBER_TO_RAD_PER_FS};

/// Default secular cutoff: gap mismatches above this (cm⁻¹) are dropped.
pub const SECULAR_CUTOFF_CM1: f64 = 1e-6;

/// Bath correlation spectrum C̃(ω) = 2J(ω)/(1 − e^{−βω}) in cm⁻¹, with the
/// analytic ω → 0 limit 4λ/(βγ).
pub fn correlation_spectrum_cm1(omega_cm1: f64, bath: &BathSpec) -> Result<f64> {
    let kt = thermal_energy(bath.temperature_k)?;
    let lambda = bath.reorganization_cm1;
    let gamma = bath.gamma_cm1();
    if omega_cm1.abs() < 1e-12 * gamma.max(1.0) {
        return Ok(4.0 * lambda * kt / gamma);
    }
    let j = crate::bath::drude_spectral_density(omega_cm1, lambda, gamma);
    Ok(2.0 * j / (1.0 - (-omega_cm1 / kt).exp()))
}

/// One-sided response Θ(ω) = Σ_k c_k/(ν_k + iω) over the full Matsubara
/// series (summed far past the retained terms; the real tail is added in
/// closed form). Arguments and result in cm-based units (cm⁻¹).
fn one_sided_response_cm1(omega_cm1: f64, bath: &BathSpec) -> Result<Complex64> {
    let lambda = bath.reorganization_cm1;
    if lambda == 0.0 {
        return Ok(Complex64::default());
    }
    let gamma = bath.gamma_cm1();
    let kt = thermal_energy(bath.temperature_k)?;
    let x = 0.5 * gamma / kt;
    let c0 = Complex64::new(lambda * gamma * (x.cos() / x.sin()), -lambda * gamma);
    let mut theta = c0 / Complex64::new(gamma, omega_cm1);
    const K_SUM: usize = 20_000;
    let mut partial_weight = 0.0;
    for k in 1..=K_SUM {
        let nu = 2.0 * std::f64::consts::PI * k as f64 * kt;
        let c = 4.0 * lambda * gamma * nu * kt / (nu * nu - gamma * gamma);
        theta += c / Complex64::new(nu, omega_cm1);
        partial_weight += c / nu;
    }
    // Remaining tail ≈ Σ c_k/ν_k (the iω correction is O(ω/ν²), negligible
    // at this k): total real weight is 2λ k_BT/γ − λ cot(βγ/2).
    let total = 2.0 * lambda * kt / gamma - lambda * (x.cos() / x.sin());
    theta += Complex64::new(total - partial_weight, 0.0);
    Ok(theta)
}

/// Second-order relaxation superoperator in the exciton basis, together
/// with the coherent part.
#[derive(Debug, Clone)]
pub struct RedfieldTensor {
    basis: ExcitonDecomposition,
    /// N²×N² generator (coherent + dissipator) acting on vec(ρ_exc),
    /// row-major vectorization vec[a·N + b] = ρ_ab.
    tensor: DMatrix<Complex64>,
    /// secular_mask[(ab), (cd)]: true when the element survives the
    /// secular approximation.
    secular_mask: Vec<bool>,
    secular: bool,
}

impl RedfieldTensor {
    pub fn basis(&self) -> &ExcitonDecomposition {
        &self.basis
    }

    pub fn n_sites(&self) -> usize {
        self.basis.n_sites()
    }

    pub fn is_secular(&self) -> bool {
        self.secular
    }

    pub fn tensor(&self) -> &DMatrix<Complex64> {
        &self.tensor
    }

    /// Apply the generator to an exciton-basis density matrix.
    pub fn apply(&self, rho_exc: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let n = self.n_sites();
        let mut out = DMatrix::<Complex64>::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                let row = a * n + b;
                let mut acc = Complex64::default();
                for c in 0..n {
                    for d in 0..n {
                        acc += self.tensor[(row, c * n + d)] * rho_exc[(c, d)];
                    }
                }
                out[(a, b)] = acc;
            }
        }
        out
    }

    /// Zero all elements coupling density-matrix entries whose exciton
    /// gaps differ by more than [`SECULAR_CUTOFF_CM1`]. Idempotent; the
    /// result generates completely positive (Lindblad-form) dynamics.
    pub fn secularize(&self) -> RedfieldTensor {
        let n = self.n_sites();
        let mut tensor = self.tensor.clone();
        for row in 0..n * n {
            for col in 0..n * n {
                if !self.secular_mask[row * n * n + col] {
                    tensor[(row, col)] = Complex64::default();
                }
            }
        }
        RedfieldTensor {
            basis: self.basis.clone(),
            tensor,
            secular_mask: self.secular_mask.clone(),
            secular: true,
        }
    }
}

/// Build the full (non-secular) Redfield generator for `h` and `bath`.
/// Deterministic given its inputs.
pub fn build_redfield_tensor(h: &ElectronicHamiltonian, bath: &BathSpec) -> Result<RedfieldTensor> {
    bath.validate()?;
    // Validates the expansion parameters (pole collisions etc.).
    let _ = correlation_coefficients(bath)?;
    let basis = h.exciton_decomposition()?;
    let n = h.n_sites();
    let energies = basis.energies();
    let v = basis.vectors();

    // Site projectors in the exciton basis: (A_j)_ab = V_ja V_jb.
    let mut site_ops = Vec::with_capacity(n);
    for j in 0..n {
        site_ops.push(DMatrix::from_fn(n, n, |a, b| v[(j, a)] * v[(j, b)]));
    }

    // Λ_j = Θ(ω_ab) ∘ A_j in angular units.
    let mut theta = DMatrix::<Complex64>::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let w = energies[a] - energies[b];
            theta[(a, b)] = one_sided_response_cm1(w, bath)? * WAVENUMBER_TO_RAD_PER_FS;
        }
    }
    let cplx = |x: f64| Complex64::new(x, 0.0);
    let mut tensor = DMatrix::<Complex64>::zeros(n * n, n * n);

    // Coherent part: −i(E_a − E_b) δ_ac δ_bd.
    for a in 0..n {
        for b in 0..n {
            let w = (energies[a] - energies[b]) * WAVENUMBER_TO_RAD_PER_FS;
            tensor[(a * n + b, a * n + b)] = Complex64::new(0.0, -w);
        }
    }

    // Dissipator: Λ ρ A + A ρ Λ† − A Λ ρ − ρ Λ† A, assembled per element.
    for j in 0..n {
        let a_j = &site_ops[j];
        let lambda_j = DMatrix::from_fn(n, n, |a, b| theta[(a, b)] * cplx(a_j[(a, b)]));
        let a_lambda = a_j.map(cplx) * &lambda_j;
        let lambda_dag_a = lambda_j.adjoint() * a_j.map(cplx);
        for a in 0..n {
            for b in 0..n {
                let row = a * n + b;
                for c in 0..n {
                    for d in 0..n {
                        let col = c * n + d;
                        let mut el = Complex64::default();
                        // (Λ ρ A)_ab = Λ_ac ρ_cd A_db
                        el += lambda_j[(a, c)] * cplx(a_j[(d, b)]);
                        // (A ρ Λ†)_ab = A_ac ρ_cd conj(Λ_bd)
                        el += cplx(a_j[(a, c)]) * lambda_j[(b, d)].conj();
                        // −(A Λ ρ)_ab = −(AΛ)_ac ρ_cb
                        if d == b {
                            el -= a_lambda[(a, c)];
                        }
                        // −(ρ Λ† A)_ab = −ρ_ad (Λ†A)_db
                        if c == a {
                            el -= lambda_dag_a[(d, b)];
                        }
                        tensor[(row, col)] += el;
                    }
                }
            }
        }
    }

    // Secular mask: keep (ab) ← (cd) only when ω_ab ≈ ω_cd.
    let mut secular_mask = vec![false; n * n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let gap = (energies[a] - energies[b]) - (energies[c] - energies[d]);
                    if gap.abs() <= SECULAR_CUTOFF_CM1 {
                        secular_mask[(a * n + b) * n * n + c * n + d] = true;
                    }
                }
            }
        }
    }

    Ok(RedfieldTensor {
        basis,
        tensor,
        secular_mask,
        secular: false,
    })
}

struct RedfieldOde<'a> {
    tensor: &'a RedfieldTensor,
    /// Site projector of the trapped site in the exciton basis, scaled by
    /// Γ/2; empty when trapping is off.
    trap_op: Option<DMatrix<Complex64>>,
}

impl OdeSystem for RedfieldOde<'_> {
    fn dim(&self) -> usize {
        let n = self.tensor.n_sites();
        n * n
    }

    fn rhs(&self, _t: f64, y: &[Complex64], dydt: &mut [Complex64]) {
        let n = self.tensor.n_sites();
        let t = self.tensor.tensor();
        for row in 0..n * n {
            let mut acc = Complex64::default();
            for col in 0..n * n {
                acc += t[(row, col)] * y[col];
            }
            dydt[row] = acc;
        }
        if let Some(q) = &self.trap_op {
            // −(Γ/2){Q, ρ} with Q the trapped-site projector (exciton basis).
            for a in 0..n {
                for b in 0..n {
                    let mut acc = Complex64::default();
                    for k in 0..n {
                        acc += q[(a, k)] * y[k * n + b] + y[a * n + k] * q[(k, b)];
                    }
                    dydt[a * n + b] -= acc;
                }
            }
        }
    }
}

/// Propagate a site-basis initial state under the given Redfield generator,
/// recording site-basis snapshots on `t_grid` (ascending from 0). Trapping
/// is the same site-basis sink dissipator as in the hierarchy solver.
pub fn propagate_redfield(
    tensor: &RedfieldTensor,
    trapping: &TrappingSpec,
    rho0: &SingleExcitationState,
    t_grid: &[f64],
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    let (trajectory, failure) = propagate_redfield_partial(tensor, trapping, rho0, t_grid, opts)?;
    match failure {
        None => Ok(trajectory),
        Some(e) => Err(e),
    }
}

/// Like [`propagate_redfield`], but a mid-run validity failure returns the
/// points recorded so far together with the diagnostic.
pub fn propagate_redfield_partial(
    tensor: &RedfieldTensor,
    trapping: &TrappingSpec,
    rho0: &SingleExcitationState,
    t_grid: &[f64],
    opts: &IntegratorOptions,
) -> Result<(Trajectory, Option<Error>)> {
    let n = tensor.n_sites();
    if rho0.n_sites() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: rho0.n_sites(),
        });
    }
    trapping.validate(n)?;
    let d = rho0.diagnostics();
    if !d.within(1e-9, -1e-9, 1e-9) {
        return Err(Error::InvalidState(format!(
            "initial state invalid: hermiticity {:.3e}, min eigenvalue {:.3e}, trace {}",
            d.hermiticity_defect, d.min_eigenvalue, d.trace
        )));
    }
    if t_grid.first().map_or(true, |&t0| t0 != 0.0) {
        return Err(Error::InvalidParameter("time grid must start at 0".into()));
    }

    let rho_exc = tensor.basis().to_exciton_basis(rho0.matrix());
    let y0: Vec<Complex64> = (0..n * n)
        .map(|i| rho_exc[(i / n, i % n)])
        .collect();

    let trap_op = if trapping.rate_per_fs > 0.0 {
        let j = trapping.site - 1;
        let v = tensor.basis().vectors();
        Some(DMatrix::from_fn(n, n, |a, b| {
            Complex64::new(0.5 * trapping.rate_per_fs * v[(j, a)] * v[(j, b)], 0.0)
        }))
    } else {
        None
    };
    let system = RedfieldOde { tensor, trap_op };

    let solver = if tensor.is_secular() {
        SolverKind::RedfieldSecular
    } else {
        SolverKind::RedfieldFull
    };
    // The full (non-secular) Redfield generator is not completely positive:
    // at pigment-network coupling strengths its states transiently develop
    // negative eigenvalues of order 1e-2 (the Markovian slippage the
    // hierarchy solver avoids). The validity floor admits that known model
    // artifact; eigenvalues below zero are clamped in the entropy so the
    // entanglement measure stays defined, as in the published comparisons.
    let tol = ValidityTolerances {
        eigenvalue_floor: -0.15,
        ..ValidityTolerances::default()
    };
    let mut trajectory = Trajectory::new(solver, n);
    let outcome = integrate(&system, &y0, t_grid, opts, |_, t, y| {
        let exc = DMatrix::from_fn(n, n, |a, b| y[a * n + b]);
        let site = tensor.basis().to_site_basis(&exc);
        trajectory.push_state(t, SingleExcitationState::from_matrix_unchecked(site), &tol)
    });
    match outcome {
        Ok(()) => Ok((trajectory, None)),
        Err(e @ Error::NumericalFailure { .. }) => Ok((trajectory, Some(e))),
        Err(e) => Err(e),
    }
}

/// Thermal state V diag(e^{−βE_a}) Vᵀ in the site basis, normalized to
/// `norm`.
pub fn gibbs_state(
    h: &ElectronicHamiltonian,
    temperature_k: f64,
    norm: f64,
) -> Result<SingleExcitationState> {
    let kt = thermal_energy(temperature_k)?;
    let basis = h.exciton_decomposition()?;
    let n = h.n_sites();
    // Shift by the lowest energy for numerical stability; the shift drops
    // out after normalization.
    let e0 = basis.energies()[0];
    let mut weights = DVector::zeros(n);
    let mut z = 0.0;
    for a in 0..n {
        let w = (-(basis.energies()[a] - e0) / kt).exp();
        weights[a] = w;
        z += w;
    }
    let diag = DMatrix::from_fn(n, n, |a, b| {
        if a == b {
            Complex64::new(weights[a] * norm / z, 0.0)
        } else {
            Complex64::default()
        }
    });
    Ok(SingleExcitationState::from_matrix_unchecked(
        basis.to_site_basis(&diag),
    ))
}
