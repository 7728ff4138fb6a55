//! Grid sweeps over joints, update frequency, window length and DE effort.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::de::DeConfig;
use crate::error::{Error, Result};
use crate::evaluation::{align_events, summarize, CompressionEvent, EventOutcome, Prediction};
use crate::geometry::{JointFrame, JointType};
use crate::io::fmt_float;
use crate::sinusoid::ParamBounds;
use crate::stream::{derive_seed, run_stream, StreamConfig};

/// One recorded session: frames and the matching reference events.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub name: String,
    pub frames: Vec<JointFrame<f64>>,
    pub events: Vec<CompressionEvent<f64>>,
}

/// Value lists per swept parameter; the sweep runs their cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub joints: Vec<JointType>,
    pub f_u_hz: Vec<f64>,
    pub s_len_s: Vec<f64>,
    pub np: Vec<usize>,
    pub g_max: Vec<usize>,
    pub cr: f64,
    pub f: f64,
    pub vtr: f64,
    pub seed: u64,
}

impl Default for SweepGrid {
    /// The DE effort grid at the recommended shoulder setting.
    fn default() -> Self {
        Self::de_effort()
    }
}

impl SweepGrid {
    /// Window length × update frequency for every joint at fixed DE settings.
    pub fn system_parameters() -> Self {
        Self {
            joints: JointType::ALL.to_vec(),
            f_u_hz: vec![0.25, 0.5, 0.75, 1.0, 1.5, 2.0],
            s_len_s: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            np: vec![50],
            g_max: vec![500],
            cr: 0.5,
            f: 0.8,
            vtr: 1e-4,
            seed: 0,
        }
    }

    /// Population size × generation limit at shoulders, 1 update/s, 3 s windows.
    pub fn de_effort() -> Self {
        Self {
            joints: vec![JointType::Shoulders],
            f_u_hz: vec![1.0],
            s_len_s: vec![3.0],
            np: (1..=10).map(|k| 10 * k).chain([150, 200]).collect(),
            g_max: (1..=10).map(|k| 10 * k).collect(),
            ..Self::system_parameters()
        }
    }

    pub fn cells(&self) -> Vec<CellConfig> {
        let mut out = Vec::new();
        for &joint in &self.joints {
            for &f_u_hz in &self.f_u_hz {
                for &s_len_s in &self.s_len_s {
                    for &np in &self.np {
                        for &g_max in &self.g_max {
                            out.push(CellConfig {
                                joint,
                                f_u_hz,
                                s_len_s,
                                np,
                                g_max,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    fn stream_config(&self, cell: &CellConfig, trial_index: usize) -> StreamConfig<f64> {
        StreamConfig {
            update_hz: cell.f_u_hz,
            window_s: cell.s_len_s,
            joint: cell.joint,
            de: DeConfig {
                pop_size: cell.np,
                max_generations: cell.g_max,
                f: self.f,
                cr: self.cr,
                vtr: self.vtr,
                seed: derive_seed(self.seed, trial_index as u64),
            },
            bounds: ParamBounds::default(),
            record_cost_trace: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for cell in self.cells() {
            self.stream_config(&cell, 0).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    pub joint: JointType,
    pub f_u_hz: f64,
    pub s_len_s: f64,
    pub np: usize,
    pub g_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    #[serde(flatten)]
    pub config: CellConfig,
    pub mae_cpm: Option<f64>,
    pub mae_cm: Option<f64>,
    pub n_events: usize,
}

/// Evaluates one grid cell: every trial is streamed and aligned, and the
/// aligned events of all trials are pooled before taking medians.
pub fn run_cell(trials: &[Trial], grid: &SweepGrid, cell: &CellConfig) -> Result<SweepCell> {
    let mut outcomes: Vec<EventOutcome<f64>> = Vec::new();
    for (index, trial) in trials.iter().enumerate() {
        let cfg = grid.stream_config(cell, index);
        let report = run_stream(&trial.frames, &cfg)
            .map_err(|e| Error::Stream(format!("trial {}: {e}", trial.name)))?;
        let predictions: Vec<Prediction<f64>> = report.fits().map(Prediction::from).collect();
        outcomes.extend(align_events(&trial.events, &predictions));
    }
    let summary = summarize(&outcomes);
    Ok(SweepCell {
        config: *cell,
        mae_cpm: summary.mae_cpm,
        mae_cm: summary.mae_cm,
        n_events: summary.n_aligned,
    })
}

/// Runs every cell of the grid, cells in parallel, output in grid order.
pub fn run_sweep(trials: &[Trial], grid: &SweepGrid) -> Result<Vec<SweepCell>> {
    grid.validate()?;
    grid.cells()
        .par_iter()
        .map(|cell| run_cell(trials, grid, cell))
        .collect()
}

pub const SWEEP_HEADER: &str = "joint,f_u_hz,s_len_s,np,g_max,mae_cpm,mae_cm,n_events";

pub fn write_sweep_csv<W: Write>(cells: &[SweepCell], mut out: W) -> std::io::Result<()> {
    let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
    writeln!(out, "{SWEEP_HEADER}")?;
    for c in cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            c.config.joint,
            fmt_float(c.config.f_u_hz),
            fmt_float(c.config.s_len_s),
            c.config.np,
            c.config.g_max,
            opt(c.mae_cpm),
            opt(c.mae_cm),
            c.n_events
        )?;
    }
    Ok(())
}

pub fn read_sweep_csv<R: std::io::Read>(input: R) -> Result<Vec<SweepCell>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>().join(",") != SWEEP_HEADER {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header '{SWEEP_HEADER}'"),
        });
    }
    let mut cells = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let bad = |msg: String| Error::Parse { line, msg };
        let num = |k: usize| -> Result<f64> {
            row[k]
                .parse::<f64>()
                .map_err(|e| bad(format!("column {}: {e}", &headers[k])))
        };
        let opt = |k: usize| -> Result<Option<f64>> {
            if row[k].is_empty() {
                Ok(None)
            } else {
                num(k).map(Some)
            }
        };
        let count = |k: usize| -> Result<usize> {
            row[k]
                .parse::<usize>()
                .map_err(|e| bad(format!("column {}: {e}", &headers[k])))
        };
        cells.push(SweepCell {
            config: CellConfig {
                joint: row[0].parse().map_err(|e: Error| bad(e.to_string()))?,
                f_u_hz: num(1)?,
                s_len_s: num(2)?,
                np: count(3)?,
                g_max: count(4)?,
            },
            mae_cpm: opt(5)?,
            mae_cm: opt(6)?,
            n_events: count(7)?,
        });
    }
    Ok(cells)
}

/// Swept parameters that a sensitivity analysis can attribute variance to.
pub const SWEEP_VARIABLES: [&str; 5] = ["joint", "f_u_hz", "s_len_s", "np", "g_max"];

/// Level of a sweep variable for one cell; joints map to their grid position.
pub fn variable_level(cell: &SweepCell, variable: &str) -> Option<f64> {
    let c = &cell.config;
    match variable {
        "joint" => JointType::ALL
            .iter()
            .position(|&j| j == c.joint)
            .map(|p| p as f64),
        "f_u_hz" => Some(c.f_u_hz),
        "s_len_s" => Some(c.s_len_s),
        "np" => Some(c.np as f64),
        "g_max" => Some(c.g_max as f64),
        _ => None,
    }
}
