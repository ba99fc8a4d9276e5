//! Scenario configuration: flat key = value sections, figure presets, and
//! command-line overrides. Every key mirrors a domain-type field so the
//! resolved configuration embeds directly into CSV provenance headers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use excitonium::heom::{HeomConfig, TrappingSpec};
use excitonium::propagation::IntegratorOptions;
use excitonium::{BathSpec, ElectronicHamiltonian, SingleExcitationState, SolverKind};

#[derive(Debug, Clone, PartialEq)]
pub enum HamiltonianSource {
    Fmo,
    File(PathBuf),
}

impl HamiltonianSource {
    pub fn load(&self) -> Result<ElectronicHamiltonian, excitonium::Error> {
        match self {
            HamiltonianSource::Fmo => Ok(ElectronicHamiltonian::fmo()),
            HamiltonianSource::File(path) => ElectronicHamiltonian::from_file(path),
        }
    }

    fn describe(&self) -> String {
        match self {
            HamiltonianSource::Fmo => "fmo".into(),
            HamiltonianSource::File(p) => p.display().to_string(),
        }
    }
}

/// A fully resolved simulation setup.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub hamiltonian: HamiltonianSource,
    pub initial_site: usize,
    pub temperature_k: f64,
    pub lambda_cm1: f64,
    pub gamma_per_fs: f64,
    /// None selects the temperature default (3 below 150 K, else 0).
    pub n_matsubara: Option<usize>,
    pub trap_site: usize,
    pub trap_rate_per_fs: f64,
    pub solver: SolverKind,
    pub horizon_fs: f64,
    pub dt_fs: f64,
    pub record_stride: usize,
    pub depth: usize,
    pub terminator: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "run".into(),
            hamiltonian: HamiltonianSource::Fmo,
            initial_site: 1,
            temperature_k: 300.0,
            lambda_cm1: 35.0,
            gamma_per_fs: 0.01,
            n_matsubara: None,
            trap_site: 3,
            trap_rate_per_fs: 1.0 / 4000.0,
            solver: SolverKind::Heom,
            horizon_fs: 5000.0,
            dt_fs: 1.0,
            record_stride: 1,
            depth: 4,
            terminator: true,
        }
    }
}

impl Scenario {
    pub fn bath(&self) -> BathSpec {
        BathSpec {
            reorganization_cm1: self.lambda_cm1,
            relaxation_rate_per_fs: self.gamma_per_fs,
            temperature_k: self.temperature_k,
            n_matsubara: self
                .n_matsubara
                .unwrap_or(if self.temperature_k < 150.0 { 3 } else { 0 }),
        }
    }

    pub fn trapping(&self) -> TrappingSpec {
        TrappingSpec {
            site: self.trap_site,
            rate_per_fs: self.trap_rate_per_fs,
        }
    }

    pub fn heom_config(&self) -> HeomConfig {
        HeomConfig {
            depth: self.depth,
            terminator: self.terminator,
            ..HeomConfig::default()
        }
    }

    pub fn integrator(&self) -> IntegratorOptions {
        IntegratorOptions::rk4(self.dt_fs)
    }

    pub fn initial_state(&self, n_sites: usize) -> Result<SingleExcitationState, excitonium::Error> {
        SingleExcitationState::localized(self.initial_site, n_sites)
    }

    pub fn record_grid(&self) -> Result<Vec<f64>, excitonium::Error> {
        excitonium::trajectory::record_grid(self.horizon_fs, self.dt_fs, self.record_stride)
    }

    pub fn validate(&self) -> Result<(), String> {
        let h = self
            .hamiltonian
            .load()
            .map_err(|e| format!("hamiltonian: {e}"))?;
        let n = h.n_sites();
        if self.initial_site == 0 || self.initial_site > n {
            return Err(format!(
                "initial_site {} out of range 1..={n}",
                self.initial_site
            ));
        }
        self.bath().validate().map_err(|e| e.to_string())?;
        self.trapping().validate(n).map_err(|e| e.to_string())?;
        if !(self.horizon_fs >= 0.0) {
            return Err("horizon_fs must be nonnegative".into());
        }
        if !(self.dt_fs > 0.0) {
            return Err("dt_fs must be positive".into());
        }
        if self.record_stride == 0 {
            return Err("record_stride must be at least 1".into());
        }
        Ok(())
    }

    /// Provenance lines for the CSV header (one `key = value` per line).
    pub fn provenance(&self) -> Vec<String> {
        let bath = self.bath();
        let mut out = Vec::new();
        let mut push = |s: String| out.push(s);
        push(format!("scenario.name = {}", self.name));
        push(format!("scenario.hamiltonian = {}", self.hamiltonian.describe()));
        push(format!("scenario.initial_site = {}", self.initial_site));
        push(format!("scenario.temperature = {}", self.temperature_k));
        push(format!("scenario.solver = {}", self.solver));
        push(format!("scenario.horizon_fs = {}", self.horizon_fs));
        push(format!("scenario.dt_fs = {}", self.dt_fs));
        push(format!("scenario.record_stride = {}", self.record_stride));
        push(format!("bath.lambda = {}", bath.reorganization_cm1));
        push(format!("bath.gamma = {}", bath.relaxation_rate_per_fs));
        push(format!("bath.temperature = {}", bath.temperature_k));
        push(format!("bath.n_matsubara = {}", bath.n_matsubara));
        push(format!("trapping.site = {}", self.trap_site));
        push(format!("trapping.rate = {}", self.trap_rate_per_fs));
        push(format!("hierarchy.depth = {}", self.depth));
        push(format!("hierarchy.terminator = {}", self.terminator));
        out
    }

    pub fn describe(&self) -> String {
        let mut s = String::new();
        for line in self.provenance() {
            let _ = writeln!(s, "{line}");
        }
        s
    }
}

/// Parse the flat `key = value` config format with `[section]` headers and
/// `#` comments.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<Scenario, String> {
    let mut scenario = Scenario::default();
    let mut section = String::from("scenario");
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| format!("line {}: {msg}", lineno + 1);
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err("unterminated section header".into()))?;
            section = name.trim().to_string();
            match section.as_str() {
                "scenario" | "bath" | "trapping" | "hierarchy" => {}
                other => return Err(err(format!("unknown section [{other}]"))),
            }
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err("expected key = value".into()))?;
        let key = key.trim();
        let value = value.trim();
        let parse_f64 = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| err(format!("invalid number {v:?} for {key}")))
        };
        let parse_usize = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| err(format!("invalid integer {v:?} for {key}")))
        };
        match (section.as_str(), key) {
            ("scenario", "name") => scenario.name = value.to_string(),
            ("scenario", "hamiltonian") => {
                scenario.hamiltonian = if value == "fmo" {
                    HamiltonianSource::Fmo
                } else {
                    let p = PathBuf::from(value);
                    HamiltonianSource::File(if p.is_absolute() {
                        p
                    } else {
                        base_dir.join(p)
                    })
                };
            }
            ("scenario", "initial_site") => scenario.initial_site = parse_usize(value)?,
            ("scenario", "temperature") => scenario.temperature_k = parse_f64(value)?,
            ("scenario", "solver") => {
                scenario.solver = value.parse().map_err(|e| err(format!("{e}")))?
            }
            ("scenario", "horizon_fs") => scenario.horizon_fs = parse_f64(value)?,
            ("scenario", "dt_fs") => scenario.dt_fs = parse_f64(value)?,
            ("scenario", "record_stride") => scenario.record_stride = parse_usize(value)?,
            ("bath", "lambda") => scenario.lambda_cm1 = parse_f64(value)?,
            ("bath", "gamma") => scenario.gamma_per_fs = parse_f64(value)?,
            ("bath", "temperature") => scenario.temperature_k = parse_f64(value)?,
            ("bath", "n_matsubara") => scenario.n_matsubara = Some(parse_usize(value)?),
            ("trapping", "site") => scenario.trap_site = parse_usize(value)?,
            ("trapping", "rate") => scenario.trap_rate_per_fs = parse_f64(value)?,
            ("hierarchy", "depth") => scenario.depth = parse_usize(value)?,
            ("hierarchy", "terminator") => {
                scenario.terminator = value
                    .parse::<bool>()
                    .map_err(|_| err(format!("invalid bool {value:?} for terminator")))?
            }
            (s, k) => return Err(err(format!("unknown key {k:?} in section [{s}]"))),
        }
    }
    Ok(scenario)
}

/// Figure-reproduction presets. Each resolves to one or more complete
/// scenarios with no further flags required.
pub fn preset(name: &str) -> Option<Vec<Scenario>> {
    let base = Scenario::default();
    let heom_run = |tag: &str, site: usize, temp: f64| Scenario {
        name: format!("{tag}_site{site}_T{temp:.0}K_heom"),
        initial_site: site,
        temperature_k: temp,
        ..base.clone()
    };
    match name {
        // Global entanglement for both injection sites and temperatures.
        "fig2" => Some(vec![
            heom_run("fig2", 1, 77.0),
            heom_run("fig2", 1, 300.0),
            heom_run("fig2", 6, 77.0),
            heom_run("fig2", 6, 300.0),
        ]),
        // Pairwise concurrence, excitation starting on site 1.
        "fig3" => Some(vec![heom_run("fig3", 1, 77.0), heom_run("fig3", 1, 300.0)]),
        // Pairwise concurrence, excitation starting on site 6.
        "fig4" => Some(vec![heom_run("fig4", 6, 77.0), heom_run("fig4", 6, 300.0)]),
        // Complete pairwise sets (same trajectories; every C_ij column is
        // in the CSV).
        "figS1" => Some(vec![heom_run("figS1", 1, 77.0), heom_run("figS1", 1, 300.0)]),
        "figS2" => Some(vec![heom_run("figS2", 6, 77.0), heom_run("figS2", 6, 300.0)]),
        // Model comparison at 300 K, site 1.
        "figS3" => Some(
            [
                SolverKind::Heom,
                SolverKind::RedfieldFull,
                SolverKind::RedfieldSecular,
            ]
            .into_iter()
            .map(|solver| Scenario {
                name: format!("figS3_site1_T300K_{solver}"),
                initial_site: 1,
                temperature_k: 300.0,
                solver,
                ..base.clone()
            })
            .collect(),
        ),
        _ => None,
    }
}

pub const PRESET_NAMES: [&str; 6] = ["fig2", "fig3", "fig4", "figS1", "figS2", "figS3"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        let text = "\
[scenario]
initial_site = 6
temperature = 77
solver = redfield-full
horizon_fs = 100
dt_fs = 0.5
record_stride = 2

[bath]
lambda = 20
gamma = 0.02
n_matsubara = 2

[trapping]
site = 3
rate = 0.0001

[hierarchy]
depth = 3
terminator = false
";
        let s = parse_config(text, Path::new(".")).unwrap();
        assert_eq!(s.initial_site, 6);
        assert_eq!(s.temperature_k, 77.0);
        assert_eq!(s.solver, SolverKind::RedfieldFull);
        assert_eq!(s.horizon_fs, 100.0);
        assert_eq!(s.dt_fs, 0.5);
        assert_eq!(s.record_stride, 2);
        assert_eq!(s.lambda_cm1, 20.0);
        assert_eq!(s.gamma_per_fs, 0.02);
        assert_eq!(s.n_matsubara, Some(2));
        assert_eq!(s.trap_rate_per_fs, 0.0001);
        assert_eq!(s.depth, 3);
        assert!(!s.terminator);
        assert!(s.validate().is_ok());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_config("[scenario]\nnot a kv line\n", Path::new(".")).unwrap_err();
        assert!(err.starts_with("line 2:"), "{err}");
        let err = parse_config("[bogus]\n", Path::new(".")).unwrap_err();
        assert!(err.contains("unknown section"), "{err}");
        let err = parse_config("[bath]\nlambda = abc\n", Path::new(".")).unwrap_err();
        assert!(err.contains("invalid number"), "{err}");
        let err = parse_config("[bath]\nmystery = 1\n", Path::new(".")).unwrap_err();
        assert!(err.contains("unknown key"), "{err}");
    }

    #[test]
    fn presets_resolve_completely() {
        for name in PRESET_NAMES {
            let scenarios = preset(name).unwrap();
            assert!(!scenarios.is_empty());
            for s in scenarios {
                s.validate().unwrap();
            }
        }
        assert!(preset("fig9").is_none());
    }

    #[test]
    fn matsubara_default_follows_temperature() {
        let cold = Scenario {
            temperature_k: 77.0,
            ..Scenario::default()
        };
        assert_eq!(cold.bath().n_matsubara, 3);
        let hot = Scenario {
            temperature_k: 300.0,
            ..Scenario::default()
        };
        assert_eq!(hot.bath().n_matsubara, 0);
    }
}
