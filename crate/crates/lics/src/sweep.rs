//! Deterministic, embarrassingly parallel 1D/2D parameter sweeps.
//!
//! Every cell is an independent integration written into a pre-shaped,
//! position-addressed grid, so the observable matrices are bitwise
//! identical for any worker count. A 1D sweep may request full-trajectory
//! sampling, in which case the second axis is the shared output-time grid.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate, AmplitudeState, IntegratorConfig, Sampling, SystemParams};
use crate::pulses::{CrossCoupling, PulseSchedule};
use crate::scenarios::{default_window, ScenarioPreset};
use crate::{Error, Result};

/// Final-state observable of one integration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Observable {
    PopM,
    PopN,
    PopF,
    W,
    SumTotal,
}

impl Observable {
    pub const ALL: [Observable; 5] = [
        Observable::PopM,
        Observable::PopN,
        Observable::PopF,
        Observable::W,
        Observable::SumTotal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Observable::PopM => "pop_m",
            Observable::PopN => "pop_n",
            Observable::PopF => "pop_f",
            Observable::W => "W",
            Observable::SumTotal => "sum_total",
        }
    }

    pub fn extract(self, state: &AmplitudeState) -> f64 {
        match self {
            Observable::PopM => state.pop_m(),
            Observable::PopN => state.pop_n(),
            Observable::PopF => state.pop_f(),
            Observable::W => state.w,
            Observable::SumTotal => state.sum_total(),
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Observable::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| {
                Error::InvalidSweep(format!(
                    "unknown observable `{s}`; expected one of pop_m, pop_n, pop_f, W, sum_total"
                ))
            })
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Observable {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Observable {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// A real scalar field of [`PulseSchedule`] or [`SystemParams`] that sweeps
/// and the optimizer may address. Parses from the bare field name or with
/// a `schedule.`/`params.` prefix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamPath {
    GMn0,
    GNn0,
    GFf0,
    GNf0,
    Delta2,
    Delta3,
    D2,
    D3,
    EtaM,
    EtaN,
    EtaF,
    DeltaMn,
    DeltaNf,
    QNn,
    QFf,
    QNf,
}

impl ParamPath {
    pub const ALL: [ParamPath; 16] = [
        ParamPath::GMn0,
        ParamPath::GNn0,
        ParamPath::GFf0,
        ParamPath::GNf0,
        ParamPath::Delta2,
        ParamPath::Delta3,
        ParamPath::D2,
        ParamPath::D3,
        ParamPath::EtaM,
        ParamPath::EtaN,
        ParamPath::EtaF,
        ParamPath::DeltaMn,
        ParamPath::DeltaNf,
        ParamPath::QNn,
        ParamPath::QFf,
        ParamPath::QNf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamPath::GMn0 => "g_mn0",
            ParamPath::GNn0 => "g_nn0",
            ParamPath::GFf0 => "g_ff0",
            ParamPath::GNf0 => "g_nf0",
            ParamPath::Delta2 => "delta2",
            ParamPath::Delta3 => "delta3",
            ParamPath::D2 => "d2",
            ParamPath::D3 => "d3",
            ParamPath::EtaM => "eta_m",
            ParamPath::EtaN => "eta_n",
            ParamPath::EtaF => "eta_f",
            ParamPath::DeltaMn => "delta_mn",
            ParamPath::DeltaNf => "delta_nf",
            ParamPath::QNn => "q_nn",
            ParamPath::QFf => "q_ff",
            ParamPath::QNf => "q_nf",
        }
    }

    fn is_schedule_field(self) -> bool {
        matches!(
            self,
            ParamPath::GMn0
                | ParamPath::GNn0
                | ParamPath::GFf0
                | ParamPath::GNf0
                | ParamPath::Delta2
                | ParamPath::Delta3
                | ParamPath::D2
                | ParamPath::D3
        )
    }

    /// Write `value` into the addressed field. Writing `g_nf0` switches the
    /// cross coupling to an explicit peak value.
    pub fn apply(self, schedule: &mut PulseSchedule, params: &mut SystemParams, value: f64) {
        match self {
            ParamPath::GMn0 => schedule.g_mn0 = value,
            ParamPath::GNn0 => schedule.g_nn0 = value,
            ParamPath::GFf0 => schedule.g_ff0 = value,
            ParamPath::GNf0 => schedule.g_nf0 = CrossCoupling::Explicit(value),
            ParamPath::Delta2 => schedule.delta2 = value,
            ParamPath::Delta3 => schedule.delta3 = value,
            ParamPath::D2 => schedule.d2 = value,
            ParamPath::D3 => schedule.d3 = value,
            ParamPath::EtaM => params.eta_m = value,
            ParamPath::EtaN => params.eta_n = value,
            ParamPath::EtaF => params.eta_f = value,
            ParamPath::DeltaMn => params.delta_mn = value,
            ParamPath::DeltaNf => params.delta_nf = value,
            ParamPath::QNn => params.q_nn = value,
            ParamPath::QFf => params.q_ff = value,
            ParamPath::QNf => params.q_nf = value,
        }
    }

    pub fn get(self, schedule: &PulseSchedule, params: &SystemParams) -> f64 {
        match self {
            ParamPath::GMn0 => schedule.g_mn0,
            ParamPath::GNn0 => schedule.g_nn0,
            ParamPath::GFf0 => schedule.g_ff0,
            ParamPath::GNf0 => schedule.peak_cross(),
            ParamPath::Delta2 => schedule.delta2,
            ParamPath::Delta3 => schedule.delta3,
            ParamPath::D2 => schedule.d2,
            ParamPath::D3 => schedule.d3,
            ParamPath::EtaM => params.eta_m,
            ParamPath::EtaN => params.eta_n,
            ParamPath::EtaF => params.eta_f,
            ParamPath::DeltaMn => params.delta_mn,
            ParamPath::DeltaNf => params.delta_nf,
            ParamPath::QNn => params.q_nn,
            ParamPath::QFf => params.q_ff,
            ParamPath::QNf => params.q_nf,
        }
    }
}

impl FromStr for ParamPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (prefix, bare) = match s.split_once('.') {
            Some((p, b)) => (Some(p), b),
            None => (None, s),
        };
        let path = ParamPath::ALL
            .into_iter()
            .find(|p| p.name() == bare)
            .ok_or_else(|| Error::UnknownParamPath(s.to_string()))?;
        match prefix {
            None => Ok(path),
            Some("schedule") if path.is_schedule_field() => Ok(path),
            Some("params") if !path.is_schedule_field() => Ok(path),
            Some(_) => Err(Error::UnknownParamPath(s.to_string())),
        }
    }
}

impl fmt::Display for ParamPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for ParamPath {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ParamPath {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// One sweep axis: an inclusive linspace over a parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub path: ParamPath,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl AxisSpec {
    pub fn new(path: ParamPath, min: f64, max: f64, count: usize) -> Self {
        AxisSpec {
            path,
            min,
            max,
            count,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count < 2 {
            return Err(Error::InvalidSweep(format!(
                "axis `{}` needs count >= 2, got {}",
                self.path, self.count
            )));
        }
        if !self.min.is_finite() || !self.max.is_finite() || self.min > self.max {
            return Err(Error::InvalidSweep(format!(
                "axis `{}` needs finite min <= max, got [{}, {}]",
                self.path, self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.count;
        (0..n)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (n as f64 - 1.0))
            .collect()
    }

    /// Grid spacing (zero for a degenerate axis).
    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.count as f64 - 1.0)
    }
}

/// Full sweep description: base point, axes, observables, and sampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub schedule: PulseSchedule,
    pub params: SystemParams,
    pub init: AmplitudeState,
    /// Explicit integrator settings; `None` derives the window from each
    /// cell's schedule with default tolerances.
    pub integrator: Option<IntegratorConfig>,
    pub axis1: AxisSpec,
    pub axis2: Option<AxisSpec>,
    pub observables: Vec<Observable>,
    /// `Some(n)`: record full trajectories with `n` uniform samples
    /// (1D sweeps only); the second result axis becomes the time grid.
    pub trajectory_points: Option<usize>,
}

impl SweepSpec {
    /// Build a spec from a preset's swept descriptor.
    pub fn from_preset(preset: &ScenarioPreset) -> Result<Self> {
        let swept = preset.swept.as_ref().ok_or_else(|| {
            Error::InvalidSweep(format!(
                "preset `{}` carries no sweep descriptor; supply axes explicitly",
                preset.name
            ))
        })?;
        Ok(SweepSpec {
            schedule: preset.schedule.clone(),
            params: preset.params,
            init: preset.init,
            integrator: None,
            axis1: swept.axis1,
            axis2: swept.axis2,
            observables: swept.observables.clone(),
            trajectory_points: swept.trajectory_points,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.axis1.validate()?;
        if let Some(axis2) = &self.axis2 {
            axis2.validate()?;
            if axis2.path == self.axis1.path {
                return Err(Error::InvalidSweep(format!(
                    "axis1 and axis2 both address `{}`",
                    self.axis1.path
                )));
            }
        }
        if self.observables.is_empty() {
            return Err(Error::InvalidSweep("no observables requested".into()));
        }
        if let Some(n) = self.trajectory_points {
            if n < 2 {
                return Err(Error::InvalidSweep(format!(
                    "trajectory sampling needs at least 2 points, got {n}"
                )));
            }
            if self.axis2.is_some() {
                return Err(Error::InvalidSweep(
                    "trajectory sampling is only available for 1D sweeps".into(),
                ));
            }
        }
        if let Some(cfg) = &self.integrator {
            cfg.validate()?;
        }
        self.init.check_finite()?;
        Ok(())
    }

    /// Schedule/params of one cell, with axis values applied.
    fn cell_inputs(&self, v1: f64, v2: Option<f64>) -> (PulseSchedule, SystemParams) {
        let mut schedule = self.schedule.clone();
        let mut params = self.params;
        self.axis1.path.apply(&mut schedule, &mut params, v1);
        if let (Some(axis2), Some(v2)) = (&self.axis2, v2) {
            axis2.path.apply(&mut schedule, &mut params, v2);
        }
        (schedule, params)
    }

    fn cell_config(&self, schedule: &PulseSchedule) -> IntegratorConfig {
        self.integrator.unwrap_or_else(|| {
            let (t0, t1) = default_window(schedule);
            IntegratorConfig::for_window(t0, t1)
        })
    }
}

/// Axis values attached to a result grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisValues {
    pub label: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    /// Worker count requested (0 = machine parallelism).
    pub workers: usize,
    pub wall_time_s: f64,
    /// Indices of cells that failed (only populated under permit-partial).
    pub failed_cells: Vec<[usize; 2]>,
    /// Spec echo for provenance.
    pub spec: SweepSpec,
}

/// Grids of final observables over the swept axes, row-major
/// `[axis1][axis2]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis1: AxisValues,
    /// Second parameter axis, the output-time grid (label `"T"`), or
    /// `None` for a plain 1D sweep.
    pub axis2: Option<AxisValues>,
    pub observables: Vec<Observable>,
    /// One row-major `n_rows x n_cols` matrix per observable.
    pub matrices: Vec<Vec<f64>>,
    pub n_rows: usize,
    pub n_cols: usize,
    pub metadata: SweepMetadata,
}

impl SweepResult {
    pub fn matrix(&self, obs: Observable) -> Option<&[f64]> {
        self.observables
            .iter()
            .position(|&o| o == obs)
            .map(|k| self.matrices[k].as_slice())
    }

    pub fn value(&self, obs: Observable, i: usize, j: usize) -> f64 {
        let m = self.matrix(obs).expect("observable not in result");
        m[i * self.n_cols + j]
    }
}

/// Run every cell of the sweep on `workers` threads (0 = machine
/// parallelism). Cell failures abort the run unless `permit_partial` is
/// set, in which case failed cells become NaN and are listed in the
/// metadata.
pub fn run_sweep(spec: &SweepSpec, workers: usize, permit_partial: bool) -> Result<SweepResult> {
    spec.validate()?;
    let started = Instant::now();
    let v1 = spec.axis1.values();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidSweep(format!("worker pool: {e}")))?;

    let n_obs = spec.observables.len();
    let (n_rows, n_cols, axis2, cells): (usize, usize, Option<AxisValues>, Vec<CellOutcome>);

    if let Some(points) = spec.trajectory_points {
        // one integration per row; the time grid is shared by all rows, so
        // it comes from a window covering every cell of the sweep
        let window = common_window(spec, &v1)?;
        let cfg = IntegratorConfig {
            t_start: window.0,
            t_end: window.1,
            ..spec.integrator.unwrap_or_default()
        };
        let times: Vec<f64> = (0..points)
            .map(|k| cfg.t_start + (cfg.t_end - cfg.t_start) * k as f64 / (points as f64 - 1.0))
            .collect();
        let rows: Vec<std::result::Result<Vec<f64>, String>> = pool.install(|| {
            v1.par_iter()
                .map(|&value| {
                    let (schedule, params) = spec.cell_inputs(value, None);
                    let run = || -> Result<Vec<f64>> {
                        schedule.validate()?;
                        params.validate()?;
                        let traj = integrate(
                            &schedule,
                            &params,
                            &spec.init,
                            &cfg,
                            &Sampling::Uniform(points),
                        )?;
                        let mut row = vec![0.0; n_obs * points];
                        for (k, obs) in spec.observables.iter().enumerate() {
                            for (j, state) in traj.iter().enumerate() {
                                row[k * points + j] = obs.extract(state);
                            }
                        }
                        Ok(row)
                    };
                    run().map_err(|e| e.to_string())
                })
                .collect()
        });
        n_rows = v1.len();
        n_cols = points;
        axis2 = Some(AxisValues {
            label: "T".into(),
            values: times,
        });
        cells = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| match r {
                Ok(row) => CellOutcome::Row(i, row),
                Err(e) => CellOutcome::Failed([i, 0], e),
            })
            .collect();
    } else {
        let v2: Vec<f64> = spec.axis2.as_ref().map(|a| a.values()).unwrap_or_default();
        n_rows = v1.len();
        n_cols = v2.len().max(1);
        axis2 = spec.axis2.as_ref().map(|a| AxisValues {
            label: a.path.name().into(),
            values: v2.clone(),
        });
        let outs: Vec<std::result::Result<Vec<f64>, String>> = pool.install(|| {
            (0..n_rows * n_cols)
                .into_par_iter()
                .map(|idx| {
                    let (i, j) = (idx / n_cols, idx % n_cols);
                    let (schedule, params) = spec.cell_inputs(v1[i], v2.get(j).copied());
                    let run = || -> Result<Vec<f64>> {
                        schedule.validate()?;
                        params.validate()?;
                        let cfg = spec.cell_config(&schedule);
                        let traj =
                            integrate(&schedule, &params, &spec.init, &cfg, &Sampling::FinalOnly)?;
                        let fin = traj.final_state();
                        Ok(spec.observables.iter().map(|o| o.extract(fin)).collect())
                    };
                    run().map_err(|e| e.to_string())
                })
                .collect()
        });
        cells = outs
            .into_iter()
            .enumerate()
            .map(|(idx, r)| {
                let ij = [idx / n_cols, idx % n_cols];
                match r {
                    Ok(vals) => CellOutcome::Cell(ij, vals),
                    Err(e) => CellOutcome::Failed(ij, e),
                }
            })
            .collect();
    }

    let mut matrices = vec![vec![f64::NAN; n_rows * n_cols]; n_obs];
    let mut failed: Vec<([usize; 2], String)> = Vec::new();
    for cell in cells {
        match cell {
            CellOutcome::Cell([i, j], vals) => {
                for (k, v) in vals.into_iter().enumerate() {
                    matrices[k][i * n_cols + j] = v;
                }
            }
            CellOutcome::Row(i, row) => {
                for k in 0..n_obs {
                    matrices[k][i * n_cols..(i + 1) * n_cols]
                        .copy_from_slice(&row[k * n_cols..(k + 1) * n_cols]);
                }
            }
            CellOutcome::Failed(ij, e) => failed.push((ij, e)),
        }
    }

    if !failed.is_empty() && !permit_partial {
        let (first_cell, first_error) = failed[0].clone();
        return Err(Error::SweepCellsFailed {
            failed_cells: failed.iter().map(|(ij, _)| *ij).collect(),
            first_cell,
            first_error,
        });
    }

    Ok(SweepResult {
        axis1: AxisValues {
            label: spec.axis1.path.name().into(),
            values: v1,
        },
        axis2,
        observables: spec.observables.clone(),
        matrices,
        n_rows,
        n_cols,
        metadata: SweepMetadata {
            workers,
            wall_time_s: started.elapsed().as_secs_f64(),
            failed_cells: failed.iter().map(|(ij, _)| *ij).collect(),
            spec: spec.clone(),
        },
    })
}

enum CellOutcome {
    Cell([usize; 2], Vec<f64>),
    Row(usize, Vec<f64>),
    Failed([usize; 2], String),
}

/// Window covering every cell of a 1D sweep (union of per-cell windows).
fn common_window(spec: &SweepSpec, v1: &[f64]) -> Result<(f64, f64)> {
    if let Some(cfg) = &spec.integrator {
        return Ok((cfg.t_start, cfg.t_end));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &value in v1 {
        let (schedule, _) = spec.cell_inputs(value, None);
        schedule.validate()?;
        let (a, b) = default_window(&schedule);
        lo = lo.min(a);
        hi = hi.max(b);
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::preset;

    fn small_spec() -> SweepSpec {
        let p = preset("fig5").unwrap();
        SweepSpec {
            schedule: p.schedule.clone(),
            params: p.params,
            init: p.init,
            integrator: None,
            axis1: AxisSpec::new(ParamPath::Delta2, -1.0, 1.0, 5),
            axis2: None,
            observables: vec![Observable::PopF, Observable::W, Observable::SumTotal],
            trajectory_points: None,
        }
    }

    #[test]
    fn param_path_parsing() {
        assert_eq!("delta3".parse::<ParamPath>().unwrap(), ParamPath::Delta3);
        assert_eq!(
            "schedule.delta3".parse::<ParamPath>().unwrap(),
            ParamPath::Delta3
        );
        assert_eq!("params.q_nf".parse::<ParamPath>().unwrap(), ParamPath::QNf);
        assert!("params.delta3".parse::<ParamPath>().is_err());
        assert!("schedule.q_nf".parse::<ParamPath>().is_err());
        assert!("bogus".parse::<ParamPath>().is_err());
    }

    #[test]
    fn axis_values_inclusive_and_monotone() {
        let axis = AxisSpec::new(ParamPath::Delta3, -6.0, 2.0, 81);
        let v = axis.values();
        assert_eq!(v.len(), 81);
        assert_eq!(v[0], -6.0);
        assert_eq!(v[80], 2.0);
        assert!(v.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn validation_errors() {
        let mut spec = small_spec();
        spec.observables.clear();
        assert!(matches!(
            run_sweep(&spec, 1, false),
            Err(Error::InvalidSweep(m)) if m.contains("no observables")
        ));

        let mut spec = small_spec();
        spec.axis1.count = 1;
        assert!(run_sweep(&spec, 1, false).is_err());

        let mut spec = small_spec();
        spec.axis2 = Some(AxisSpec::new(ParamPath::Delta2, 0.0, 1.0, 3));
        assert!(run_sweep(&spec, 1, false).is_err()); // same path twice

        let mut spec = small_spec();
        spec.trajectory_points = Some(10);
        spec.axis2 = Some(AxisSpec::new(ParamPath::Delta3, 0.0, 1.0, 3));
        assert!(run_sweep(&spec, 1, false).is_err());
    }

    #[test]
    fn degenerate_axis_gives_identical_cells() {
        let mut spec = small_spec();
        spec.axis1 = AxisSpec::new(ParamPath::Delta2, 0.5, 0.5, 2);
        let res = run_sweep(&spec, 1, false).unwrap();
        assert_eq!(res.n_rows, 2);
        for m in &res.matrices {
            assert_eq!(m[0].to_bits(), m[1].to_bits());
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let spec = small_spec();
        let a = run_sweep(&spec, 1, false).unwrap();
        let b = run_sweep(&spec, 3, false).unwrap();
        assert_eq!(a.matrices.len(), b.matrices.len());
        for (ma, mb) in a.matrices.iter().zip(&b.matrices) {
            for (x, y) in ma.iter().zip(mb) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn cells_reproducible_in_isolation() {
        let spec = small_spec();
        let res = run_sweep(&spec, 2, false).unwrap();
        let i = 3;
        let (schedule, params) = spec.cell_inputs(res.axis1.values[i], None);
        let cfg = spec.cell_config(&schedule);
        let traj = integrate(&schedule, &params, &spec.init, &cfg, &Sampling::FinalOnly).unwrap();
        let fin = traj.final_state();
        assert_eq!(
            res.value(Observable::PopF, i, 0).to_bits(),
            fin.pop_f().to_bits()
        );
        assert_eq!(res.value(Observable::W, i, 0).to_bits(), fin.w.to_bits());
    }

    #[test]
    fn conservation_across_cells() {
        let spec = small_spec();
        let res = run_sweep(&spec, 0, false).unwrap();
        for &v in res.matrix(Observable::SumTotal).unwrap() {
            assert!((v - 1.0).abs() < 1e-5, "sum_total = {v}");
        }
    }

    #[test]
    fn trajectory_sampling_rows() {
        let mut spec = small_spec();
        spec.axis1 = AxisSpec::new(ParamPath::Delta2, -1.0, 1.0, 3);
        spec.trajectory_points = Some(11);
        let res = run_sweep(&spec, 1, false).unwrap();
        assert_eq!(res.n_cols, 11);
        let t = &res.axis2.as_ref().unwrap().values;
        assert_eq!(t.len(), 11);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        // W column is non-decreasing along each row
        let w = res.matrix(Observable::W).unwrap();
        for i in 0..res.n_rows {
            for j in 1..res.n_cols {
                assert!(w[i * res.n_cols + j] >= w[i * res.n_cols + j - 1] - 1e-9);
            }
        }
    }

    #[test]
    fn failed_cells_fail_fast_or_go_nan() {
        // d2 swept through an invalid value makes exactly one cell fail
        let mut spec = small_spec();
        spec.axis1 = AxisSpec::new(ParamPath::D2, -1.0, 1.0, 3); // middle cell d2 = 0
        let err = run_sweep(&spec, 1, false).unwrap_err();
        match err {
            Error::SweepCellsFailed { failed_cells, .. } => {
                assert_eq!(failed_cells, vec![[0, 0], [1, 0]]); // d2 = -1 and 0
            }
            other => panic!("unexpected error {other:?}"),
        }
        let res = run_sweep(&spec, 1, true).unwrap();
        assert_eq!(res.metadata.failed_cells, vec![[0, 0], [1, 0]]);
        assert!(res.value(Observable::W, 0, 0).is_nan());
        assert!(res.value(Observable::W, 1, 0).is_nan());
        assert!(res.value(Observable::W, 2, 0).is_finite());
    }

    #[test]
    fn two_dimensional_grid_shape() {
        let mut spec = small_spec();
        spec.axis1 = AxisSpec::new(ParamPath::Delta2, -1.0, 1.0, 3);
        spec.axis2 = Some(AxisSpec::new(ParamPath::Delta3, -0.5, 0.5, 4));
        let res = run_sweep(&spec, 2, false).unwrap();
        assert_eq!((res.n_rows, res.n_cols), (3, 4));
        assert_eq!(res.matrices[0].len(), 12);
        assert_eq!(res.axis2.as_ref().unwrap().values.len(), 4);
    }
}
