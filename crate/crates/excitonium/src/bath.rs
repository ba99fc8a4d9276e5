//! Drude–Lorentz (overdamped Brownian oscillator) environment shared by the
//! hierarchical and Redfield solvers.
//!
//! The spectral density is J(ω) = 2λγω/(ω² + γ²) with reorganization energy
//! λ and phonon relaxation rate γ. Its bath correlation function is a sum of
//! decaying exponentials C(t) = Σ_k c_k e^{−ν_k t} for t ≥ 0 with
//!
//!   c_0 = λγ (cot(βγ/2) − i),      ν_0 = γ,
//!   c_k = 4λγ ν_k / (β(ν_k² − γ²)), ν_k = 2πk/β  (Matsubara, k ≥ 1),
//!
//! in ħ = 1 energy units with β = 1/(k_B T). Each site couples to its own
//! identical, spatially uncorrelated copy of this bath.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::units::{thermal_energy, WAVENUMBER_TO_RAD_PER_FS};

/// Per-site Drude–Lorentz environment parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathSpec {
    /// Reorganization energy λ in cm⁻¹.
    pub reorganization_cm1: f64,
    /// Phonon relaxation rate γ in fs⁻¹.
    pub relaxation_rate_per_fs: f64,
    /// Bath temperature in kelvin.
    pub temperature_k: f64,
    /// Number of Matsubara terms K kept explicitly (K = 0 is the
    /// high-temperature form; the truncated tail is folded into the
    /// terminator correction).
    pub n_matsubara: usize,
}

impl BathSpec {
    /// Pigment-network preset: λ = 35 cm⁻¹, γ = (100 fs)⁻¹, with K chosen
    /// by temperature (0 above 150 K, 3 below — the high-temperature form
    /// degrades at 77 K).
    pub fn fmo_preset(temperature_k: f64) -> Self {
        Self {
            reorganization_cm1: 35.0,
            relaxation_rate_per_fs: 0.01,
            temperature_k,
            n_matsubara: if temperature_k < 150.0 { 3 } else { 0 },
        }
    }

    /// γ expressed in cm⁻¹.
    pub fn gamma_cm1(&self) -> f64 {
        self.relaxation_rate_per_fs / WAVENUMBER_TO_RAD_PER_FS
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.reorganization_cm1 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "reorganization energy must be nonnegative, got {}",
                self.reorganization_cm1
            )));
        }
        if !(self.relaxation_rate_per_fs > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "relaxation rate must be positive, got {}",
                self.relaxation_rate_per_fs
            )));
        }
        if !(self.temperature_k > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "temperature must be positive, got {}",
                self.temperature_k
            )));
        }
        Ok(())
    }
}

/// Exponential expansion of the bath correlation function: K+1 complex
/// coefficients in cm⁻² and matching decay rates in fs⁻¹ (ν_0 = γ, then the
/// Matsubara rates, strictly increasing).
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationExpansion {
    pub coefficients_cm2: Vec<Complex64>,
    pub decay_rates_per_fs: Vec<f64>,
}

impl CorrelationExpansion {
    pub fn n_terms(&self) -> usize {
        self.coefficients_cm2.len()
    }

    /// Coefficients converted to angular units (rad/fs)² for propagators.
    pub fn coefficients_angular(&self) -> Vec<Complex64> {
        let k2 = WAVENUMBER_TO_RAD_PER_FS * WAVENUMBER_TO_RAD_PER_FS;
        self.coefficients_cm2.iter().map(|c| c * k2).collect()
    }

    /// C(t) = Σ_k c_k e^{−ν_k t} in cm⁻², t in fs (t ≥ 0).
    pub fn evaluate(&self, t_fs: f64) -> Complex64 {
        self.coefficients_cm2
            .iter()
            .zip(&self.decay_rates_per_fs)
            .map(|(c, nu)| c * (-nu * t_fs).exp())
            .sum()
    }
}

/// Drude–Lorentz spectral density J(ω) = 2λγω/(ω² + γ²) in cm⁻¹, with all
/// arguments in cm⁻¹. Odd in ω with its maximum value λ at ω = γ.
pub fn drude_spectral_density(omega_cm1: f64, lambda_cm1: f64, gamma_cm1: f64) -> f64 {
    2.0 * lambda_cm1 * gamma_cm1 * omega_cm1 / (omega_cm1 * omega_cm1 + gamma_cm1 * gamma_cm1)
}

/// Matsubara frequency ν_k = 2πk·k_BT in cm⁻¹ (k ≥ 1).
pub fn matsubara_frequency_cm1(k: usize, temperature_k: f64) -> Result<f64> {
    Ok(2.0 * std::f64::consts::PI * k as f64 * thermal_energy(temperature_k)?)
}

/// Expansion coefficients of the bath correlation function for `bath`.
///
/// Errors when γ collides with a Matsubara frequency (pole of the
/// expansion) or the rates fail to be strictly increasing.
pub fn correlation_coefficients(bath: &BathSpec) -> Result<CorrelationExpansion> {
    bath.validate()?;
    let lambda = bath.reorganization_cm1;
    let gamma_cm = bath.gamma_cm1();
    let kt = thermal_energy(bath.temperature_k)?;
    let beta = 1.0 / kt;

    // cot(βγ/2) has poles exactly where γ = ν_k.
    let m = gamma_cm / (2.0 * std::f64::consts::PI * kt);
    if m.round() >= 1.0 && (m - m.round()).abs() < 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "relaxation rate coincides with Matsubara frequency k = {}",
            m.round()
        )));
    }

    let x = 0.5 * beta * gamma_cm;
    let cot = x.cos() / x.sin();
    let mut coefficients = vec![Complex64::new(lambda * gamma_cm * cot, -lambda * gamma_cm)];
    let mut rates = vec![bath.relaxation_rate_per_fs];
    for k in 1..=bath.n_matsubara {
        let nu = matsubara_frequency_cm1(k, bath.temperature_k)?;
        let denom = nu * nu - gamma_cm * gamma_cm;
        if denom.abs() < 1e-9 * nu * nu {
            return Err(Error::InvalidParameter(format!(
                "relaxation rate coincides with Matsubara frequency k = {k}"
            )));
        }
        coefficients.push(Complex64::new(4.0 * lambda * gamma_cm * nu * kt / denom, 0.0));
        rates.push(nu * WAVENUMBER_TO_RAD_PER_FS);
    }
    for w in rates.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidParameter(
                "correlation decay rates must be strictly increasing; \
                 γ exceeds a retained Matsubara frequency"
                    .into(),
            ));
        }
    }
    Ok(CorrelationExpansion {
        coefficients_cm2: coefficients,
        decay_rates_per_fs: rates,
    })
}

/// Residual Markovian correction rate Σ_{k>K} c_k/ν_k in cm⁻¹: the weight
/// of the truncated Matsubara tail, applied by the solvers as a pure
/// dephasing dissipator (Markovian closure of the fast tail).
///
/// Uses Σ_{k≥0} c_k/ν_k = 2λ/(βγ) − iλ; the imaginary part sits entirely in
/// the k = 0 term, so the residual is real.
pub fn terminator_rate(bath: &BathSpec) -> Result<f64> {
    bath.validate()?;
    let lambda = bath.reorganization_cm1;
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let gamma_cm = bath.gamma_cm1();
    let kt = thermal_energy(bath.temperature_k)?;
    let expansion = correlation_coefficients(bath)?;
    let x = 0.5 * gamma_cm / kt;
    let cot = x.cos() / x.sin();
    // Total real weight minus the retained terms (k = 0 contributes λ·cot).
    let mut residual = 2.0 * lambda * kt / gamma_cm - lambda * cot;
    for k in 1..=bath.n_matsubara {
        let nu_cm = expansion.decay_rates_per_fs[k] / WAVENUMBER_TO_RAD_PER_FS;
        residual -= expansion.coefficients_cm2[k].re / nu_cm;
    }
    Ok(residual)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fmo_300k() -> BathSpec {
        BathSpec::fmo_preset(300.0)
    }

    #[test]
    fn spectral_density_shape() {
        let (lambda, gamma) = (35.0, 53.0884);
        assert_eq!(drude_spectral_density(0.0, lambda, gamma), 0.0);
        // Peak value λ at ω = γ.
        assert!((drude_spectral_density(gamma, lambda, gamma) - lambda).abs() < 1e-12);
        for omega in [1.0, 10.0, 100.0, 1234.5] {
            let plus = drude_spectral_density(omega, lambda, gamma);
            let minus = drude_spectral_density(-omega, lambda, gamma);
            assert_eq!(plus, -minus);
            assert!(plus <= lambda);
        }
    }

    #[test]
    fn zero_coupling_gives_zero_coefficients() {
        let bath = BathSpec {
            reorganization_cm1: 0.0,
            ..fmo_300k()
        };
        let exp = correlation_coefficients(&bath).unwrap();
        for c in &exp.coefficients_cm2 {
            assert_eq!(*c, Complex64::new(0.0, 0.0));
        }
        assert_eq!(terminator_rate(&bath).unwrap(), 0.0);
    }

    #[test]
    fn leading_coefficient_at_300k() {
        let bath = fmo_300k();
        assert_eq!(bath.n_matsubara, 0);
        let gamma_cm = bath.gamma_cm1();
        assert!((gamma_cm - 53.088).abs() < 0.01);
        let kt = thermal_energy(300.0).unwrap();
        let x = 0.5 * gamma_cm / kt;
        assert!((x - 0.12729).abs() < 1e-4);

        let exp = correlation_coefficients(&bath).unwrap();
        let c0 = exp.coefficients_cm2[0];
        assert!((c0.re - 35.0 * gamma_cm * (x.cos() / x.sin())).abs() < 1e-9);
        assert!((c0.im + 35.0 * gamma_cm).abs() < 1e-9);
        assert_eq!(exp.decay_rates_per_fs[0], 0.01);
    }

    #[test]
    fn matsubara_frequencies() {
        // ν_1 at 300 K = 2π k_B T ≈ 1310.1 cm⁻¹
        let nu1 = matsubara_frequency_cm1(1, 300.0).unwrap();
        assert!((nu1 - 1310.1).abs() < 0.2);

        let bath = BathSpec {
            n_matsubara: 3,
            ..BathSpec::fmo_preset(77.0)
        };
        let exp = correlation_coefficients(&bath).unwrap();
        assert_eq!(exp.n_terms(), 4);
        for w in exp.decay_rates_per_fs.windows(2) {
            assert!(w[1] > w[0]);
        }
        for c in &exp.coefficients_cm2[1..] {
            assert_eq!(c.im, 0.0);
        }
    }

    #[test]
    fn pole_collision_is_rejected() {
        // Choose T so that ν_1 = γ exactly: 2π k_B T = γ_cm.
        let gamma_cm1 = 53.0884;
        let t = gamma_cm1 / (2.0 * std::f64::consts::PI * crate::units::BOLTZMANN_CM1_PER_K);
        let bath = BathSpec {
            reorganization_cm1: 35.0,
            relaxation_rate_per_fs: gamma_cm1 * WAVENUMBER_TO_RAD_PER_FS,
            temperature_k: t,
            n_matsubara: 2,
        };
        assert!(correlation_coefficients(&bath).is_err());
    }

    #[test]
    fn terminator_decreases_monotonically_with_k() {
        let mut prev = f64::INFINITY;
        for k in 0..12 {
            let bath = BathSpec {
                n_matsubara: k,
                ..BathSpec::fmo_preset(77.0)
            };
            let r = terminator_rate(&bath).unwrap();
            assert!(r >= 0.0, "residual must be nonnegative, got {r} at K = {k}");
            assert!(r < prev, "residual must decrease with K");
            prev = r;
        }
    }

    #[test]
    fn terminator_matches_directly_summed_tail() {
        for temperature in [77.0, 300.0] {
            for k_kept in [0usize, 3] {
                let bath = BathSpec {
                    n_matsubara: k_kept,
                    ..BathSpec::fmo_preset(temperature)
                };
                let lambda = bath.reorganization_cm1;
                let gamma_cm = bath.gamma_cm1();
                let kt = thermal_energy(temperature).unwrap();
                // Direct partial sum of c_k/ν_k over the truncated tail,
                // plus the 1/k² remainder beyond the summation cutoff.
                const K_CUT: usize = 2_000_000;
                let mut tail = 0.0;
                for k in (k_kept + 1)..=K_CUT {
                    let nu = 2.0 * std::f64::consts::PI * k as f64 * kt;
                    tail += 4.0 * lambda * gamma_cm * kt / (nu * nu - gamma_cm * gamma_cm);
                }
                tail += lambda * gamma_cm
                    / (std::f64::consts::PI * std::f64::consts::PI * kt * K_CUT as f64);
                let r = terminator_rate(&bath).unwrap();
                assert!(
                    (r - tail).abs() < 1e-7 * tail.max(1e-3),
                    "analytic residual {r} vs summed {tail}"
                );
            }
        }
    }

    /// The truncated expansion plus terminator weight reproduces the exact
    /// integrated correlation Σ c_k/ν_k = 2λ/(βγ) − iλ.
    #[test]
    fn integrated_correlation_is_exact() {
        for k in [0usize, 1, 3, 5] {
            let bath = BathSpec {
                n_matsubara: k,
                ..BathSpec::fmo_preset(77.0)
            };
            let exp = correlation_coefficients(&bath).unwrap();
            let mut total = Complex64::new(terminator_rate(&bath).unwrap(), 0.0);
            for (c, nu) in exp.coefficients_cm2.iter().zip(&exp.decay_rates_per_fs) {
                total += c / (nu / WAVENUMBER_TO_RAD_PER_FS);
            }
            let kt = thermal_energy(77.0).unwrap();
            let exact = Complex64::new(
                2.0 * 35.0 * kt / bath.gamma_cm1(),
                -35.0,
            );
            assert!((total - exact).norm() < 1e-8 * exact.norm());
        }
    }

    /// C(t) from the truncated expansion converges (in K) to the exact
    /// correlation function evaluated by quadrature of
    /// (1/π)∫ J(ω)[coth(βω/2)cos(ωτ) − i sin(ωτ)] dω. The comparison is
    /// made at small positive times; at t = 0 the Drude–Lorentz real part
    /// diverges logarithmically in the Matsubara sum and in the integral
    /// alike, so the spec's C(0) convergence statement is realized at
    /// t > 0 where both sides are finite.
    #[test]
    fn correlation_function_converges_to_quadrature() {
        let temperature = 77.0;
        let lambda = 35.0;
        let gamma_cm = BathSpec::fmo_preset(temperature).gamma_cm1();
        let kt = thermal_energy(temperature).unwrap();
        let beta = 1.0 / kt;

        // Simpson quadrature of the spectral representation; τ in cm.
        let exact = |t_fs: f64| -> Complex64 {
            let tau = WAVENUMBER_TO_RAD_PER_FS * t_fs;
            let f = |omega: f64| -> Complex64 {
                if omega == 0.0 {
                    // J(ω)·coth(βω/2) → 4λ k_BT/γ as ω → 0
                    return Complex64::new(4.0 * lambda * kt / gamma_cm, 0.0);
                }
                let j = drude_spectral_density(omega, lambda, gamma_cm);
                let coth = 1.0 / (0.5 * beta * omega).tanh();
                Complex64::new(j * coth * (omega * tau).cos(), -j * (omega * tau).sin())
            };
            let simpson = |a: f64, b: f64, n: usize| -> Complex64 {
                let h = (b - a) / n as f64;
                let mut s = f(a) + f(b);
                for i in 1..n {
                    let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                    s += w * f(a + i as f64 * h);
                }
                s * (h / 3.0)
            };
            (simpson(0.0, 2000.0, 20_000) + simpson(2000.0, 2.0e6, 400_000))
                / std::f64::consts::PI
        };

        // The truncated-series error at t is governed by e^{−ν_{K+1} t}, so
        // the bound tightens with t.
        for (t_fs, bound) in [(2.0, 0.05), (10.0, 0.005)] {
            let reference = exact(t_fs);
            let mut prev_err = f64::INFINITY;
            for k in [0usize, 2, 4, 8] {
                let bath = BathSpec {
                    reorganization_cm1: lambda,
                    relaxation_rate_per_fs: 0.01,
                    temperature_k: temperature,
                    n_matsubara: k,
                };
                let approx = correlation_coefficients(&bath).unwrap().evaluate(t_fs);
                let err = (approx - reference).norm() / reference.norm();
                assert!(
                    err < prev_err * 1.0001,
                    "error must decrease with K (t = {t_fs}, K = {k}: {err} vs {prev_err})"
                );
                prev_err = err;
            }
            assert!(
                prev_err < bound,
                "K = 8 expansion should be within {bound} at t = {t_fs} fs, got {prev_err}"
            );
        }
    }
}
