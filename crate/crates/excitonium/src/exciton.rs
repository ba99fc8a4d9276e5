//! Domain types for single-excitation electronic states: the site-basis
//! density matrix, the electronic Hamiltonian, and its exciton (eigen)
//! decomposition.
//!
//! A state in the single-excitation manifold of an N-chromophore network is
//! an N×N complex matrix ρ with ρ_ii the population of site i and ρ_ij the
//! coherence between sites i and j. States are allowed to be subnormalized
//! (0 ≤ tr ρ ≤ 1) because the excitation has a finite lifetime.
//!
//! Site indices in the public API are 1-based throughout, matching the
//! conventional numbering of the pigments.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::units::WAVENUMBER_TO_RAD_PER_FS;

/// Hermiticity slack accepted at construction.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Eigenvalues above this (negative) floor are treated as numerical zero.
pub const EIGENVALUE_FLOOR: f64 = -1e-9;
/// Accepted excess of the trace above 1.
pub const TRACE_TOL: f64 = 1e-9;

/// Seven-site pigment network Hamiltonian in cm⁻¹ (Chlorobium tepidum site
/// energies and couplings; the constant 12,210 cm⁻¹ offset that sets the
/// lowest site energy to zero is already removed).
const FMO_HAMILTONIAN_CM1: [[f64; 7]; 7] = [
    [200.0, -87.7, 5.5, -5.9, 6.7, -13.7, -9.9],
    [-87.7, 320.0, 30.8, 8.2, 0.7, 11.8, 4.3],
    [5.5, 30.8, 0.0, -53.5, -2.2, -9.6, 6.0],
    [-5.9, 8.2, -53.5, 110.0, -70.7, -17.0, -63.3],
    [6.7, 0.7, -2.2, -70.7, 270.0, 81.1, -1.3],
    [-13.7, 11.8, -9.6, -17.0, 81.1, 420.0, 39.7],
    [-9.9, 4.3, 6.0, -63.3, -1.3, 39.7, 230.0],
];

/// Unnormalized single-excitation density matrix in the site basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleExcitationState {
    matrix: DMatrix<Complex64>,
}

/// Structural defect numbers returned by [`SingleExcitationState::diagnostics`].
/// Callers decide which tolerances to enforce.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDiagnostics {
    /// max_{ij} |ρ_ij − conj(ρ_ji)|
    pub hermiticity_defect: f64,
    /// Smallest eigenvalue of the hermitized matrix.
    pub min_eigenvalue: f64,
    /// Real part of the trace.
    pub trace: f64,
}

impl StateDiagnostics {
    /// True when all three defects are inside the given slacks.
    pub fn within(&self, hermiticity_tol: f64, eigenvalue_floor: f64, trace_tol: f64) -> bool {
        self.hermiticity_defect <= hermiticity_tol
            && self.min_eigenvalue >= eigenvalue_floor
            && self.trace >= -trace_tol
            && self.trace <= 1.0 + trace_tol
    }
}

impl SingleExcitationState {
    /// Build a state from a raw matrix, enforcing the Hermiticity,
    /// positivity, and subnormalization invariants.
    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let state = Self { matrix };
        let d = state.diagnostics();
        if d.hermiticity_defect > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!(
                "hermiticity defect {} exceeds {}",
                d.hermiticity_defect, HERMITICITY_TOL
            )));
        }
        if d.min_eigenvalue < EIGENVALUE_FLOOR {
            return Err(Error::InvalidState(format!(
                "eigenvalue {} below floor {}",
                d.min_eigenvalue, EIGENVALUE_FLOOR
            )));
        }
        if d.trace < -TRACE_TOL || d.trace > 1.0 + TRACE_TOL {
            return Err(Error::InvalidState(format!(
                "trace {} outside [0, 1]",
                d.trace
            )));
        }
        Ok(state)
    }

    /// Build a state without invariant checks. Used by propagators whose
    /// snapshots are validated against looser, trajectory-level tolerances.
    pub fn from_matrix_unchecked(matrix: DMatrix<Complex64>) -> Self {
        debug_assert_eq!(matrix.nrows(), matrix.ncols());
        Self { matrix }
    }

    /// Pure state with the excitation localized on `site` (1-based).
    pub fn localized(site: usize, n_sites: usize) -> Result<Self> {
        if site == 0 || site > n_sites {
            return Err(Error::IndexOutOfRange {
                index: site,
                max: n_sites,
            });
        }
        let mut m = DMatrix::<Complex64>::zeros(n_sites, n_sites);
        m[(site - 1, site - 1)] = Complex64::new(1.0, 0.0);
        Ok(Self { matrix: m })
    }

    /// Pure state |ψ⟩⟨ψ| from site-basis amplitudes (normalized internally).
    pub fn pure(amplitudes: &[Complex64]) -> Result<Self> {
        let n = amplitudes.len();
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if norm_sq <= 0.0 {
            return Err(Error::InvalidParameter(
                "pure state amplitudes must not all vanish".into(),
            ));
        }
        let m = DMatrix::from_fn(n, n, |i, j| {
            amplitudes[i] * amplitudes[j].conj() / norm_sq
        });
        Ok(Self { matrix: m })
    }

    pub fn n_sites(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    /// Population of `site` (1-based).
    pub fn population(&self, site: usize) -> Result<f64> {
        let n = self.n_sites();
        if site == 0 || site > n {
            return Err(Error::IndexOutOfRange { index: site, max: n });
        }
        Ok(self.matrix[(site - 1, site - 1)].re)
    }

    /// Coherence ρ_ij between two distinct sites (1-based).
    pub fn coherence(&self, i: usize, j: usize) -> Result<Complex64> {
        let n = self.n_sites();
        if i == 0 || i > n {
            return Err(Error::IndexOutOfRange { index: i, max: n });
        }
        if j == 0 || j > n {
            return Err(Error::IndexOutOfRange { index: j, max: n });
        }
        Ok(self.matrix[(i - 1, j - 1)])
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    /// The three defect numbers: hermiticity defect, minimum eigenvalue,
    /// and trace.
    pub fn diagnostics(&self) -> StateDiagnostics {
        let n = self.n_sites();
        let mut herm: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                let d = (self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm();
                herm = herm.max(d);
            }
        }
        let min_eig = hermitian_eigenvalues(&self.matrix)
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        StateDiagnostics {
            hermiticity_defect: herm,
            min_eigenvalue: if min_eig.is_finite() { min_eig } else { 0.0 },
            trace: self.trace(),
        }
    }

    /// Eigenvalues of the hermitized matrix, ascending.
    pub fn eigenvalues(&self) -> DVector<f64> {
        hermitian_eigenvalues(&self.matrix)
    }
}

/// Eigenvalues of (M + M†)/2, ascending.
pub(crate) fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> DVector<f64> {
    let h = (m + m.adjoint()).scale(0.5);
    let mut vals: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    DVector::from_vec(vals)
}

/// Eigen-pairs of (M + M†)/2: ascending eigenvalues with matching
/// eigenvector columns.
pub(crate) fn hermitian_eigenpairs(m: &DMatrix<Complex64>) -> (DVector<f64>, DMatrix<Complex64>) {
    let h = (m + m.adjoint()).scale(0.5);
    let eig = h.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = DVector::from_fn(n, |k, _| eig.eigenvalues[order[k]]);
    let vecs = DMatrix::from_fn(n, n, |i, k| eig.eigenvectors[(i, order[k])]);
    (vals, vecs)
}

/// Real symmetric site-energy / coupling matrix in cm⁻¹. The diagonal holds
/// site energies E_i, the off-diagonal the couplings J_ij.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectronicHamiltonian {
    matrix: DMatrix<f64>,
}

impl ElectronicHamiltonian {
    /// The seven-site pigment network preset.
    pub fn fmo() -> Self {
        let m = DMatrix::from_fn(7, 7, |i, j| FMO_HAMILTONIAN_CM1[i][j]);
        Self { matrix: m }
    }

    /// Build from a square matrix; entries must be symmetric to within
    /// `1e-9` of the largest magnitude, and the stored matrix is made
    /// exactly symmetric by copying the lower triangle.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let n = matrix.nrows();
        if n == 0 {
            return Err(Error::InvalidParameter("empty Hamiltonian".into()));
        }
        let scale = matrix.iter().fold(0.0_f64, |m, &v| m.max(v.abs())).max(1.0);
        let mut sym = matrix.clone();
        for i in 0..n {
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-9 * scale {
                    return Err(Error::InvalidParameter(format!(
                        "Hamiltonian not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
                sym[(j, i)] = sym[(i, j)];
            }
        }
        if sym.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "Hamiltonian contains non-finite entries".into(),
            ));
        }
        Ok(Self { matrix: sym })
    }

    /// Parse a plain-text matrix: one row per line, whitespace-separated
    /// values in cm⁻¹, `#` comments allowed.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|_| {
                        Error::Parse(format!(
                            "line {}: invalid number {:?}",
                            lineno + 1,
                            tok
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            rows.push(row);
        }
        let n = rows.len();
        if n == 0 {
            return Err(Error::Parse("empty Hamiltonian file".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Parse(format!(
                    "row {} has {} entries, expected {}",
                    i + 1,
                    row.len(),
                    n
                )));
            }
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::from_matrix(m)
    }

    /// Load from a whitespace-separated matrix file.
    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }

    pub fn n_sites(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Matrix element in cm⁻¹ with 1-based site indices.
    pub fn element(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.n_sites();
        if i == 0 || i > n {
            return Err(Error::IndexOutOfRange { index: i, max: n });
        }
        if j == 0 || j > n {
            return Err(Error::IndexOutOfRange { index: j, max: n });
        }
        Ok(self.matrix[(i - 1, j - 1)])
    }

    /// The matrix converted to angular units (rad/fs).
    pub fn to_angular(&self) -> DMatrix<f64> {
        self.matrix.scale(WAVENUMBER_TO_RAD_PER_FS)
    }

    /// Eigendecomposition into exciton energies and orthonormal exciton
    /// vectors.
    pub fn exciton_decomposition(&self) -> Result<ExcitonDecomposition> {
        ExcitonDecomposition::new(self)
    }
}

/// Eigen-decomposition of an [`ElectronicHamiltonian`]: ascending energies
/// (cm⁻¹) and a real orthogonal matrix whose columns are the excitons in the
/// site basis.
///
/// Output is deterministic: degenerate energies keep the solver's column
/// order (stable sort), and each eigenvector is scaled so its
/// largest-magnitude component is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitonDecomposition {
    energies: DVector<f64>,
    vectors: DMatrix<f64>,
}

impl ExcitonDecomposition {
    pub fn new(h: &ElectronicHamiltonian) -> Result<Self> {
        let m = h.matrix();
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "cannot decompose non-finite Hamiltonian".into(),
            ));
        }
        let eig = m.clone().symmetric_eigen();
        let n = m.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let energies = DVector::from_fn(n, |k, _| eig.eigenvalues[order[k]]);
        let mut vectors = DMatrix::from_fn(n, n, |i, k| eig.eigenvectors[(i, order[k])]);
        for k in 0..n {
            let mut best = 0;
            let mut best_abs = 0.0_f64;
            for i in 0..n {
                let a = vectors[(i, k)].abs();
                if a > best_abs {
                    best_abs = a;
                    best = i;
                }
            }
            if vectors[(best, k)] < 0.0 {
                for i in 0..n {
                    vectors[(i, k)] = -vectors[(i, k)];
                }
            }
        }
        Ok(Self { energies, vectors })
    }

    pub fn n_sites(&self) -> usize {
        self.energies.len()
    }

    /// Exciton energies in cm⁻¹, ascending.
    pub fn energies(&self) -> &DVector<f64> {
        &self.energies
    }

    /// Orthogonal matrix of exciton vectors (columns) in the site basis.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// V diag(E) Vᵀ, for reconstruction checks.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let n = self.n_sites();
        let d = DMatrix::from_fn(n, n, |i, j| if i == j { self.energies[i] } else { 0.0 });
        &self.vectors * d * self.vectors.transpose()
    }

    /// Transform a site-basis matrix into the exciton basis: Vᵀ M V.
    pub fn to_exciton_basis(&self, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let v = self.vectors.map(|x| Complex64::new(x, 0.0));
        v.transpose() * m * v
    }

    /// Transform an exciton-basis matrix back to the site basis: V M Vᵀ.
    pub fn to_site_basis(&self, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let v = self.vectors.map(|x| Complex64::new(x, 0.0));
        &v * m * v.transpose()
    }
}
