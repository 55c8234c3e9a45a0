//! Recorded paths, events and their CSV / JSON-lines encodings.

use std::io::{self, Write};

use serde::Serialize;

use crate::linalg::{Matrix, SymmetricMatrixState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Collision,
    Boundary,
    Explosion,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Event {
    #[serde(rename = "type")]
    pub kind: EventKind,
    pub t: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSample {
    pub t: f64,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<Matrix>,
    pub min_gap: f64,
    pub lyapunov: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixSample {
    pub t: f64,
    pub state: SymmetricMatrixState,
    pub eigenvalues: Vec<f64>,
}

/// Running per-path statistics, over every accepted (sub)step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathDiagnostics {
    pub min_gap: f64,
    pub max_lyapunov: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// Accepted steps whose raw update left the model domain.
    pub boundary_excursions: u64,
    /// Eigenvalues moved back by boundary truncation or reflection.
    pub truncations: u64,
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    pub max_depth: u32,
}

impl Default for PathDiagnostics {
    fn default() -> Self {
        Self {
            min_gap: f64::INFINITY,
            max_lyapunov: f64::NEG_INFINITY,
            min_eigenvalue: f64::INFINITY,
            max_eigenvalue: f64::NEG_INFINITY,
            boundary_excursions: 0,
            truncations: 0,
            accepted_steps: 0,
            rejected_steps: 0,
            max_depth: 0,
        }
    }
}

impl PathDiagnostics {
    pub fn observe(&mut self, eigenvalues: &[f64], min_gap: f64) {
        self.min_gap = self.min_gap.min(min_gap);
        if let (Some(&lo), Some(&hi)) = (eigenvalues.first(), eigenvalues.last()) {
            self.min_eigenvalue = self.min_eigenvalue.min(lo);
            self.max_eigenvalue = self.max_eigenvalue.max(hi);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord<S> {
    pub samples: Vec<S>,
    pub events: Vec<Event>,
    pub diagnostics: PathDiagnostics,
    pub final_time: f64,
    /// Set when the run stopped early on a collision or explosion.
    pub terminated: Option<EventKind>,
}

impl<S> TrajectoryRecord<S> {
    pub fn last(&self) -> &S {
        self.samples.last().expect("a trajectory always records its initial state")
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn collided(&self) -> bool {
        self.terminated == Some(EventKind::Collision)
    }
}

/// Number formatting shared by every text artifact: shortest round-trip
/// representation, exponent form outside `[1e-4, 1e15)`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Header `t,lambda_1..lambda_p,mingap,lyapunovU[,h_11..h_pp]`, one row per sample.
pub fn write_spectral_csv<W: Write>(record: &TrajectoryRecord<SpectralSample>, mut out: W) -> io::Result<()> {
    let first = record.samples.first();
    let p = first.map_or(0, |s| s.eigenvalues.len());
    let with_h = first.is_some_and(|s| s.eigenvectors.is_some());
    let mut header = vec!["t".to_string()];
    header.extend((1..=p).map(|i| format!("lambda_{i}")));
    header.push("mingap".into());
    header.push("lyapunovU".into());
    if with_h {
        for i in 1..=p {
            header.extend((1..=p).map(|j| format!("h_{i}{j}")));
        }
    }
    writeln!(out, "{}", header.join(","))?;
    for s in &record.samples {
        let mut row = vec![fmt_f64(s.t)];
        row.extend(s.eigenvalues.iter().map(|&v| fmt_f64(v)));
        row.push(fmt_f64(s.min_gap));
        row.push(fmt_f64(s.lyapunov));
        if let Some(h) = &s.eigenvectors {
            row.extend(h.as_slice().iter().map(|&v| fmt_f64(v)));
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Header `t,x_11,x_12,...,x_pp` over the upper triangle, row-major. Hermitian
/// states write `x_ij_re,x_ij_im` pairs instead.
pub fn write_matrix_csv<W: Write>(record: &TrajectoryRecord<MatrixSample>, mut out: W) -> io::Result<()> {
    let first = record.samples.first();
    let p = first.map_or(0, |s| s.state.dim());
    let hermitian = first.is_some_and(|s| s.state.is_hermitian());
    let mut header = vec!["t".to_string()];
    for i in 1..=p {
        for j in i..=p {
            if hermitian {
                header.push(format!("x_{i}{j}_re"));
                header.push(format!("x_{i}{j}_im"));
            } else {
                header.push(format!("x_{i}{j}"));
            }
        }
    }
    writeln!(out, "{}", header.join(","))?;
    for s in &record.samples {
        let mut row = vec![fmt_f64(s.t)];
        for i in 0..p {
            for j in i..p {
                row.push(fmt_f64(s.state.real_part()[(i, j)]));
                if let Some(im) = s.state.imag_part() {
                    row.push(fmt_f64(im[(i, j)]));
                }
            }
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// One JSON object per line: `{"type":..,"t":..,"detail":..}`.
pub fn write_events_jsonl<W: Write>(events: &[Event], mut out: W) -> io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_json_shape() {
        let e = Event { kind: EventKind::Collision, t: 0.25, detail: "gap".into() };
        let mut buf = Vec::new();
        write_events_jsonl(&[e], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "{\"type\":\"collision\",\"t\":0.25,\"detail\":\"gap\"}\n");
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_f64(0.5), "0.5");
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(1e-12), "1e-12");
        assert_eq!(fmt_f64(-2.0), "-2");
    }

    #[test]
    fn matrix_csv_header() {
        let s = MatrixSample { t: 0.0, state: SymmetricMatrixState::identity(2), eigenvalues: vec![1.0, 1.0] };
        let rec = TrajectoryRecord {
            samples: vec![s],
            events: vec![],
            diagnostics: PathDiagnostics::default(),
            final_time: 0.0,
            terminated: None,
        };
        let mut buf = Vec::new();
        write_matrix_csv(&rec, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,x_11,x_12,x_22\n0,1,0,1\n");
    }
}
