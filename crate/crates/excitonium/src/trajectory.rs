//! Time-resolved simulation output: per-step state snapshots with derived
//! observables, CSV serialization, and small feature-analysis helpers used
//! by the comparison tooling.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::entanglement::{self, EntanglementReport};
use crate::error::{Error, Result};
use crate::exciton::SingleExcitationState;

/// Which generator produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Heom,
    RedfieldFull,
    RedfieldSecular,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Heom => "heom",
            SolverKind::RedfieldFull => "redfield-full",
            SolverKind::RedfieldSecular => "redfield-secular",
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heom" => Ok(SolverKind::Heom),
            "redfield-full" => Ok(SolverKind::RedfieldFull),
            "redfield-secular" => Ok(SolverKind::RedfieldSecular),
            other => Err(Error::Parse(format!(
                "unknown solver {other:?}; expected heom, redfield-full, or redfield-secular"
            ))),
        }
    }
}

/// Tolerances applied to every recorded state along a trajectory. Exceeding
/// them aborts the run with a diagnostic (signals insufficient hierarchy
/// depth or step size).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidityTolerances {
    pub hermiticity: f64,
    pub eigenvalue_floor: f64,
    pub trace_slack: f64,
}

impl Default for ValidityTolerances {
    fn default() -> Self {
        Self {
            hermiticity: 1e-8,
            eigenvalue_floor: -1e-6,
            trace_slack: 1e-6,
        }
    }
}

/// One recorded snapshot: time, site-basis state, entanglement report.
#[derive(Debug, Clone)]
pub struct TrajectoryPoint {
    pub t_fs: f64,
    pub state: SingleExcitationState,
    pub report: EntanglementReport,
}

/// Time grid plus per-step snapshots and derived observables.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub solver: SolverKind,
    pub n_sites: usize,
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn new(solver: SolverKind, n_sites: usize) -> Self {
        Self {
            solver,
            n_sites,
            points: Vec::new(),
        }
    }

    /// Validate a raw snapshot against `tol`, compute its report, and
    /// append it.
    pub fn push_state(
        &mut self,
        t_fs: f64,
        state: SingleExcitationState,
        tol: &ValidityTolerances,
    ) -> Result<()> {
        let d = state.diagnostics();
        if !d.within(tol.hermiticity, tol.eigenvalue_floor, tol.trace_slack) {
            return Err(Error::NumericalFailure {
                t_fs,
                detail: format!(
                    "state left validity envelope (hermiticity {:.3e}, min eigenvalue {:.3e}, \
                     trace {:.6}); increase hierarchy depth or reduce the step size",
                    d.hermiticity_defect, d.min_eigenvalue, d.trace
                ),
            });
        }
        let report = entanglement::report_with_floor(&state, tol.eigenvalue_floor)?;
        self.points.push(TrajectoryPoint {
            t_fs,
            state,
            report,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t_fs).collect()
    }

    pub fn entanglement_series(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| p.report.global_entanglement)
            .collect()
    }

    pub fn trace_series(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.report.trace).collect()
    }

    /// Population of `site` (1-based) over time.
    pub fn population_series(&self, site: usize) -> Result<Vec<f64>> {
        self.points
            .iter()
            .map(|p| p.state.population(site))
            .collect()
    }

    /// Concurrence C_ij over time (1-based sites).
    pub fn concurrence_series(&self, i: usize, j: usize) -> Result<Vec<f64>> {
        if i == j || i == 0 || j == 0 || i > self.n_sites || j > self.n_sites {
            return Err(Error::IndexOutOfRange {
                index: i.max(j),
                max: self.n_sites,
            });
        }
        Ok(self
            .points
            .iter()
            .map(|p| p.report.concurrence[(i - 1, j - 1)])
            .collect())
    }

    /// Index of the sample closest to `t_fs`.
    pub fn nearest_index(&self, t_fs: f64) -> Option<usize> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, p) in self.points.iter().enumerate() {
            let d = (p.t_fs - t_fs).abs();
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        Some(best)
    }

    /// Global entanglement at the grid point closest to `t_fs`.
    pub fn entanglement_at(&self, t_fs: f64) -> Option<f64> {
        self.nearest_index(t_fs)
            .map(|k| self.points[k].report.global_entanglement)
    }

    /// CSV header for a given site count: t_fs, trace, E, W, populations,
    /// coherences (Re/Im for i < j), concurrences (i < j), 1-based labels.
    pub fn csv_header(n_sites: usize) -> String {
        let mut cols = vec![
            "t_fs".to_string(),
            "trace".to_string(),
            "E".to_string(),
            "W".to_string(),
        ];
        for i in 1..=n_sites {
            cols.push(format!("rho_{i}{i}"));
        }
        for i in 1..=n_sites {
            for j in (i + 1)..=n_sites {
                cols.push(format!("Re_rho_{i}{j}"));
                cols.push(format!("Im_rho_{i}{j}"));
            }
        }
        for i in 1..=n_sites {
            for j in (i + 1)..=n_sites {
                cols.push(format!("C_{i}{j}"));
            }
        }
        cols.join(",")
    }

    /// Write metadata lines (each prefixed `# `), the header row, and one
    /// row per recorded point.
    pub fn write_csv<W: Write>(&self, mut w: W, metadata: &[String]) -> Result<()> {
        for line in metadata {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "# solver: {}", self.solver)?;
        writeln!(w, "{}", Self::csv_header(self.n_sites))?;
        let n = self.n_sites;
        let mut row = String::with_capacity(64 * (4 + n * n));
        for p in &self.points {
            row.clear();
            push_field(&mut row, p.t_fs, true);
            push_field(&mut row, p.report.trace, false);
            push_field(&mut row, p.report.global_entanglement, false);
            push_field(&mut row, p.report.witness, false);
            let m = p.state.matrix();
            for i in 0..n {
                push_field(&mut row, m[(i, i)].re, false);
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    push_field(&mut row, m[(i, j)].re, false);
                    push_field(&mut row, m[(i, j)].im, false);
                }
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    push_field(&mut row, p.report.concurrence[(i, j)], false);
                }
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}

fn push_field(row: &mut String, v: f64, first: bool) {
    use std::fmt::Write as _;
    if !first {
        row.push(',');
    }
    let _ = write!(row, "{v:.12e}");
}

/// Time and value of the maximum of a series.
pub fn peak(times: &[f64], values: &[f64]) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for (&t, &v) in times.iter().zip(values) {
        if best.map_or(true, |(_, bv)| v > bv) {
            best = Some((t, v));
        }
    }
    best
}

/// Count local maxima using hysteresis: a maximum is registered each time
/// the series falls `delta` below its running maximum after having risen
/// `delta` above the preceding minimum. Robust against sub-`delta` ripple.
pub fn count_local_maxima(values: &[f64], delta: f64) -> usize {
    let mut count = 0;
    let mut looking_for_max = true;
    let Some(&first) = values.first() else {
        return 0;
    };
    let mut extreme = first;
    for &v in &values[1..] {
        if looking_for_max {
            if v > extreme {
                extreme = v;
            } else if extreme - v > delta {
                count += 1;
                extreme = v;
                looking_for_max = false;
            }
        } else if v < extreme {
            extreme = v;
        } else if v - extreme > delta {
            extreme = v;
            looking_for_max = true;
        }
    }
    count
}

/// Maximum over the common grid of |E_a(t) − E_b(t)|.
pub fn max_entanglement_deviation(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    check_same_grid(a, b)?;
    Ok(a.points
        .iter()
        .zip(&b.points)
        .map(|(p, q)| (p.report.global_entanglement - q.report.global_entanglement).abs())
        .fold(0.0, f64::max))
}

/// Maximum over the common grid, sites, of |ρ_ii^a(t) − ρ_ii^b(t)|.
pub fn max_population_deviation(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    check_same_grid(a, b)?;
    let n = a.n_sites;
    let mut max = 0.0_f64;
    for (p, q) in a.points.iter().zip(&b.points) {
        for i in 0..n {
            max = max.max((p.state.matrix()[(i, i)].re - q.state.matrix()[(i, i)].re).abs());
        }
    }
    Ok(max)
}

/// Maximum elementwise deviation between the two state histories.
pub fn max_state_deviation(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    check_same_grid(a, b)?;
    let mut max = 0.0_f64;
    for (p, q) in a.points.iter().zip(&b.points) {
        let d = (p.state.matrix() - q.state.matrix()).map(|z| z.norm()).max();
        max = max.max(d);
    }
    Ok(max)
}

fn check_same_grid(a: &Trajectory, b: &Trajectory) -> Result<()> {
    if a.len() != b.len() || a.n_sites != b.n_sites {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    for (p, q) in a.points.iter().zip(&b.points) {
        if (p.t_fs - q.t_fs).abs() > 1e-9 {
            return Err(Error::InvalidParameter(
                "trajectories recorded on different time grids".into(),
            ));
        }
    }
    Ok(())
}

/// Convenience: build a (possibly strided) record grid 0, s·dt, 2s·dt, …
/// up to `horizon_fs` inclusive when it falls on the grid.
pub fn record_grid(horizon_fs: f64, dt_fs: f64, record_stride: usize) -> Result<Vec<f64>> {
    if !(horizon_fs >= 0.0) || !(dt_fs > 0.0) || record_stride == 0 {
        return Err(Error::InvalidParameter(
            "horizon must be ≥ 0, dt > 0, stride ≥ 1".into(),
        ));
    }
    let step = dt_fs * record_stride as f64;
    let n = (horizon_fs / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| k as f64 * step).collect())
}

/// Snapshot a raw (unchecked) matrix into a state.
pub fn state_from_raw(m: DMatrix<Complex64>) -> SingleExcitationState {
    SingleExcitationState::from_matrix_unchecked(m)
}
