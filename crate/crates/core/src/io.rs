//! File formats: frames as JSON Lines, events and predictions as CSV.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::evaluation::{CompressionEvent, Prediction};
use crate::geometry::{validate_stream, JointFrame};
use crate::sinusoid::FitResult;

/// Formats with 9 significant digits, shortest decimal form, '.' separator.
pub fn fmt_float(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("round-trips");
    format!("{rounded}")
}

pub fn read_frames<R: BufRead>(input: R) -> Result<Vec<JointFrame<f64>>> {
    let mut frames = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { line: i + 1, msg };
        let frame: JointFrame<f64> =
            serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        frame.validate().map_err(|e| parse_err(e.to_string()))?;
        if let Some(prev) = frames.last().map(|f: &JointFrame<f64>| f.t) {
            if frame.t <= prev {
                return Err(parse_err(format!(
                    "timestamp {} does not increase over {prev}",
                    frame.t
                )));
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}

/// One JSON object per line, each line newline-terminated.
pub fn write_frames<W: Write>(frames: &[JointFrame<f64>], mut out: W) -> Result<()> {
    validate_stream(frames)?;
    for frame in frames {
        serde_json::to_writer(&mut out, frame)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub const EVENTS_HEADER: &str = "start_s,end_s,depth_cm,freq_cpm";

pub fn read_events<R: std::io::Read>(input: R) -> Result<Vec<CompressionEvent<f64>>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != EVENTS_HEADER {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header '{EVENTS_HEADER}', found '{header}'"),
        });
    }
    let mut events = Vec::new();
    for (i, row) in reader.deserialize().enumerate() {
        let event: CompressionEvent<f64> = row?;
        event.validate().map_err(|e| Error::Parse {
            line: i + 2,
            msg: e.to_string(),
        })?;
        events.push(event);
    }
    Ok(events)
}

pub fn write_events<W: Write>(events: &[CompressionEvent<f64>], mut out: W) -> Result<()> {
    writeln!(out, "{EVENTS_HEADER}")?;
    for e in events {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_float(e.start),
            fmt_float(e.end),
            fmt_float(e.depth_cm),
            fmt_float(e.freq_cpm)
        )?;
    }
    Ok(())
}

pub const PREDICTIONS_HEADER: &str =
    "t_update,window_start,window_end,omega_rad_s,cpm,amplitude_m,\
depth_p2p_cm,offset_m,phase_rad,rmse_m,generations,converged_vtr";

pub fn write_predictions<W: Write>(fits: &[FitResult<f64>], mut out: W) -> Result<()> {
    writeln!(out, "{PREDICTIONS_HEADER}")?;
    for fit in fits {
        let p = &fit.params;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_float(fit.t_update),
            fmt_float(fit.window_start),
            fmt_float(fit.window_end),
            fmt_float(p.omega),
            fmt_float(fit.cpm()),
            fmt_float(p.amplitude),
            fmt_float(fit.depth_p2p_cm()),
            fmt_float(p.offset),
            fmt_float(p.phase),
            fmt_float(fit.rmse),
            fit.generations_run,
            fit.converged_by_vtr
        )?;
    }
    Ok(())
}

/// Reads the columns of a predictions file needed for alignment.
pub fn read_predictions<R: std::io::Read>(input: R) -> Result<Vec<Prediction<f64>>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    let header = headers.iter().collect::<Vec<_>>().join(",");
    if header != PREDICTIONS_HEADER {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header '{PREDICTIONS_HEADER}'"),
        });
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let col = |k: usize| -> Result<f64> {
            row[k].parse::<f64>().map_err(|e| Error::Parse {
                line: i + 2,
                msg: format!("column {}: {e}", &headers[k]),
            })
        };
        out.push(Prediction {
            t_update: col(0)?,
            window_start: col(1)?,
            window_end: col(2)?,
            cpm: col(4)?,
            depth_cm: col(6)?,
        });
    }
    Ok(out)
}
