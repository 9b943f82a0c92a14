//! Piecewise-linear current-source waveforms and result time series.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Piecewise-linear time function: ordered `(time, amperes)` breakpoints.
/// A single point is a DC source. Evaluation holds the first value before
/// the first breakpoint and the last value after the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct Pwl<T> {
    points: Vec<(T, T)>,
}

impl<T: Scalar> Pwl<T> {
    pub fn new(points: Vec<(T, T)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Invalid("PWL waveform needs at least one point".into()));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Invalid(format!(
                    "PWL times must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if points[0].0 < T::zero() {
            return Err(Error::Invalid("PWL times must be nonnegative".into()));
        }
        Ok(Pwl { points })
    }

    pub fn dc(amps: T) -> Self {
        Pwl {
            points: vec![(T::zero(), amps)],
        }
    }

    pub fn points(&self) -> &[(T, T)] {
        &self.points
    }

    pub fn is_dc(&self) -> bool {
        self.points.len() == 1
    }

    /// Linear interpolation between bracketing points; clamped outside.
    pub fn eval(&self, t: T) -> T {
        let pts = &self.points;
        if t <= pts[0].0 {
            return pts[0].1;
        }
        let last = pts[pts.len() - 1];
        if t >= last.0 {
            return last.1;
        }
        // pts[k].0 < t < pts[k+1].0 for some k
        let k = pts.partition_point(|p| p.0 < t);
        let (t0, v0) = pts[k - 1];
        let (t1, v1) = pts[k];
        if t == t1 {
            return v1;
        }
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }
}

/// Per-node voltage time series over steps `s = 0..=s_total`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSet<T> {
    /// `times[s] = s * h`.
    pub times: Vec<T>,
    /// Column names, one per trivial node (netlist order).
    pub names: Vec<String>,
    /// `values[s][i]` = voltage of node `i` at step `s`.
    pub values: Vec<Vec<T>>,
}

impl<T: Scalar> WaveformSet<T> {
    pub fn new(names: Vec<String>) -> Self {
        WaveformSet {
            times: Vec::new(),
            names,
            values: Vec::new(),
        }
    }

    pub fn push(&mut self, t: T, v: Vec<T>) {
        debug_assert_eq!(v.len(), self.names.len());
        self.times.push(t);
        self.values.push(v);
    }

    pub fn steps(&self) -> usize {
        self.times.len()
    }

    /// Max absolute per-entry difference against another set of the same shape.
    pub fn max_abs_diff(&self, other: &WaveformSet<T>) -> T {
        let mut m = T::zero();
        for (a, b) in self.values.iter().zip(&other.values) {
            for (x, y) in a.iter().zip(b) {
                m = m.max((*x - *y).abs());
            }
        }
        m
    }
}

/// Write `time,<name1>,<name2>,...` plus one row per step. Values use the
/// shortest round-trip decimal rendering.
pub fn write_csv<T: Scalar, W: Write>(ws: &WaveformSet<T>, sink: &mut W) -> Result<()> {
    if ws.names.is_empty() {
        return Err(Error::Invalid("no trivial nodes to write".into()));
    }
    write!(sink, "time")?;
    for n in &ws.names {
        write!(sink, ",{}", n)?;
    }
    writeln!(sink)?;
    for (t, row) in ws.times.iter().zip(&ws.values) {
        write!(sink, "{}", t)?;
        for v in row {
            write!(sink, ",{}", v)?;
        }
        writeln!(sink)?;
    }
    Ok(())
}

/// Parse a CSV produced by [`write_csv`].
pub fn read_csv<T: Scalar, R: BufRead>(source: R) -> Result<WaveformSet<T>> {
    let mut lines = source.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Invalid("empty CSV".into()))??;
    let mut cols = header.split(',');
    if cols.next() != Some("time") {
        return Err(Error::Invalid("CSV header must start with `time`".into()));
    }
    let names: Vec<String> = cols.map(str::to_string).collect();
    let mut ws = WaveformSet {
        times: Vec::new(),
        names,
        values: Vec::new(),
    };
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut it = line.split(',');
        let t: f64 = it
            .next()
            .unwrap()
            .parse()
            .map_err(|e| Error::Invalid(format!("bad CSV time: {}", e)))?;
        let row: Vec<T> = it
            .map(|s| {
                s.parse::<f64>()
                    .map(|v| T::from_f64(v).unwrap())
                    .map_err(|e| Error::Invalid(format!("bad CSV value: {}", e)))
            })
            .collect::<Result<_>>()?;
        if row.len() != ws.names.len() {
            return Err(Error::Invalid("CSV row width mismatch".into()));
        }
        ws.push(T::from_f64(t).unwrap(), row);
    }
    Ok(ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pwl(pts: &[(f64, f64)]) -> Pwl<f64> {
        Pwl::new(pts.to_vec()).unwrap()
    }

    #[test]
    fn eval_midpoint_of_segment() {
        let w = pwl(&[(0.0, 0.0), (1e-9, 1e-3)]);
        assert_eq!(w.eval(0.5e-9), 0.5e-3);
    }

    #[test]
    fn eval_dc_hold() {
        let w = pwl(&[(0.0, 2e-3)]);
        assert_eq!(w.eval(5e-9), 2e-3);
    }

    #[test]
    fn eval_hold_last() {
        let w = pwl(&[(0.0, 0.0), (1e-9, 1e-3)]);
        assert_eq!(w.eval(3e-9), 1e-3);
    }

    #[test]
    fn eval_breakpoint_exact() {
        let w = pwl(&[(0.0, 0.25), (1.0, 0.5), (3.0, -1.0)]);
        assert_eq!(w.eval(1.0), 0.5);
        assert_eq!(w.eval(3.0), -1.0);
    }

    #[test]
    fn nonincreasing_times_rejected() {
        assert!(Pwl::new(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(Pwl::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut ws = WaveformSet {
            times: vec![0.0, 1e-12],
            names: vec!["n1".into()],
            values: vec![vec![0.0], vec![0.5]],
        };
        ws.push(2e-12, vec![0.123456789012345e-3]);
        let mut buf = Vec::new();
        write_csv(&ws, &mut buf).unwrap();
        let back: WaveformSet<f64> = read_csv(&buf[..]).unwrap();
        assert_eq!(back, ws);
    }

    #[test]
    fn csv_empty_nodes_is_error() {
        let ws: WaveformSet<f64> = WaveformSet {
            times: vec![],
            names: vec![],
            values: vec![],
        };
        let mut buf = Vec::new();
        assert!(write_csv(&ws, &mut buf).is_err());
    }
}
