//! Shared helpers for integration tests: seeded random states in the
//! single-excitation manifold.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use excitonium::SingleExcitationState;

/// Standard normal via Box–Muller.
pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Random density matrix ρ = GG†/tr(GG†) (Ginibre ensemble), scaled to a
/// random subnormalized trace in [0.2, 1].
pub fn random_valid_state(rng: &mut ChaCha8Rng, n: usize) -> SingleExcitationState {
    let g = DMatrix::from_fn(n, n, |_, _| Complex64::new(gaussian(rng), gaussian(rng)));
    let rho = &g * g.adjoint();
    let trace: f64 = rho.diagonal().iter().map(|z| z.re).sum();
    let norm = 0.2 + 0.8 * rng.random::<f64>();
    let m = rho.map(|z| z * (norm / trace));
    SingleExcitationState::from_matrix(m).expect("Ginibre state must be valid")
}

/// Random pure state |ψ⟩⟨ψ| with Gaussian amplitudes.
pub fn random_pure_state(rng: &mut ChaCha8Rng, n: usize) -> SingleExcitationState {
    let amps: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(gaussian(rng), gaussian(rng)))
        .collect();
    SingleExcitationState::pure(&amps).expect("nonzero amplitudes")
}

/// Random diagonal (separable) state with trace ≤ 1.
pub fn random_diagonal_state(rng: &mut ChaCha8Rng, n: usize) -> SingleExcitationState {
    let mut weights: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let sum: f64 = weights.iter().sum();
    let norm = 0.2 + 0.8 * rng.random::<f64>();
    for w in &mut weights {
        *w *= norm / sum;
    }
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(weights[i], 0.0)
        } else {
            Complex64::default()
        }
    });
    SingleExcitationState::from_matrix(m).expect("diagonal state must be valid")
}

/// Random real symmetric matrix with entries of the given scale.
pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = scale * gaussian(rng);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}
