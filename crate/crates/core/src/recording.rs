//! Raw inertial recordings and the `#gaitkit-rec v1` text format.
//!
//! One sample per line, `S,t,x,y,z`, where `S` is `A` (accelerometer, m/s²)
//! or `G` (gyroscope, rad/s) and `t` is in seconds with at least six decimals.
//! The first line is the header `#gaitkit-rec v1 subject=<id> session=<id>`.
//! The writer always emits nine timestamp decimals; the parser accepts any
//! decimal timestamp.

use std::fmt::Write as _;

use crate::error::{GaitError, Result};

const MAGIC: &str = "#gaitkit-rec";
const VERSION: &str = "v1";

/// One timestamped tri-axial sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub xyz: [f64; 3],
}

impl Sample {
    pub fn new(t: f64, x: f64, y: f64, z: f64) -> Self {
        Sample { t, xyz: [x, y, z] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sensor {
    Accel,
    Gyro,
}

impl Sensor {
    fn tag(self) -> char {
        match self {
            Sensor::Accel => 'A',
            Sensor::Gyro => 'G',
        }
    }
}

/// Raw, irregularly sampled accelerometer and gyroscope streams of one walk.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub subject_id: String,
    pub session_id: String,
    pub accel: Vec<Sample>,
    pub gyro: Vec<Sample>,
}

fn check_id(kind: &str, id: &str) -> Result<()> {
    if id.is_empty()
        || id
            .chars()
            .any(|c| c.is_whitespace() || c == ',' || c == '=' || c.is_control())
    {
        return Err(GaitError::Validation(format!(
            "{kind} id {id:?} must be non-empty without whitespace, ',' or '='"
        )));
    }
    Ok(())
}

impl Recording {
    /// Checks identifiers, non-empty streams and strictly increasing timestamps.
    pub fn validate(&self) -> Result<()> {
        check_id("subject", &self.subject_id)?;
        check_id("session", &self.session_id)?;
        for (sensor, stream) in [(Sensor::Accel, &self.accel), (Sensor::Gyro, &self.gyro)] {
            if stream.is_empty() {
                return Err(GaitError::Validation(format!(
                    "{} stream is empty",
                    sensor.tag()
                )));
            }
            for (i, s) in stream.iter().enumerate() {
                if !s.t.is_finite() || s.xyz.iter().any(|v| !v.is_finite()) {
                    return Err(GaitError::Validation(format!(
                        "{} sample {i} is not finite",
                        sensor.tag()
                    )));
                }
            }
            if let Some(i) = stream.windows(2).position(|w| w[1].t <= w[0].t) {
                return Err(GaitError::Validation(format!(
                    "{} timestamps not strictly increasing at sample {} (t={} after t={})",
                    sensor.tag(),
                    i + 1,
                    stream[i + 1].t,
                    stream[i].t
                )));
            }
        }
        Ok(())
    }

    /// Average sample rate of a stream in Hz, `None` for fewer than two samples.
    pub fn mean_rate(stream: &[Sample]) -> Option<f64> {
        match (stream.first(), stream.last()) {
            (Some(a), Some(b)) if stream.len() >= 2 && b.t > a.t => {
                Some((stream.len() - 1) as f64 / (b.t - a.t))
            }
            _ => None,
        }
    }

    /// Requires the average rate of both streams to lie in [50, 500] Hz.
    pub fn check_sample_rates(&self) -> Result<()> {
        for (tag, stream) in [('A', &self.accel), ('G', &self.gyro)] {
            match Self::mean_rate(stream) {
                Some(r) if (50.0..=500.0).contains(&r) => {}
                Some(r) => {
                    return Err(GaitError::Validation(format!(
                        "{tag} stream average rate {r:.1} Hz outside [50, 500] Hz"
                    )))
                }
                None => {
                    return Err(GaitError::InsufficientData(format!(
                        "{tag} stream has fewer than two samples"
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        let start = self.accel[0].t.max(self.gyro[0].t);
        let end = self.accel[self.accel.len() - 1]
            .t
            .min(self.gyro[self.gyro.len() - 1].t);
        (end - start).max(0.0)
    }
}

/// Parses the `#gaitkit-rec v1` text format.
///
/// Timestamps are shifted so that the earliest sample of either stream is at 0.
pub fn parse_recording(text: &str) -> Result<Recording> {
    let mut lines = text.split('\n').enumerate();
    let (subject_id, session_id) = match lines.next() {
        Some((_, header)) => parse_header(header)?,
        None => {
            return Err(GaitError::Parse {
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    let mut accel = Vec::new();
    let mut gyro = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            // Only a trailing newline is permitted.
            continue;
        }
        let (sensor, sample) = parse_sample_line(line).map_err(|message| GaitError::Parse {
            line: line_no,
            message,
        })?;
        match sensor {
            Sensor::Accel => accel.push(sample),
            Sensor::Gyro => gyro.push(sample),
        }
    }
    let mut rec = Recording {
        subject_id,
        session_id,
        accel,
        gyro,
    };
    rec.validate()?;
    let t0 = rec.accel[0].t.min(rec.gyro[0].t);
    if t0 != 0.0 {
        for s in rec.accel.iter_mut().chain(rec.gyro.iter_mut()) {
            s.t -= t0;
        }
    }
    Ok(rec)
}

fn parse_header(header: &str) -> Result<(String, String)> {
    let bad = |message: String| GaitError::Parse { line: 1, message };
    let mut parts = header.trim_end_matches('\r').split(' ');
    if parts.next() != Some(MAGIC) {
        return Err(bad(format!("expected header starting with {MAGIC}")));
    }
    match parts.next() {
        Some(VERSION) => {}
        Some(other) => {
            return Err(GaitError::UnsupportedVersion {
                kind: "recording".into(),
                found: other.into(),
                expected: VERSION.into(),
            })
        }
        None => return Err(bad("missing version".into())),
    }
    let subject = parts
        .next()
        .and_then(|p| p.strip_prefix("subject="))
        .ok_or_else(|| bad("missing subject=<id>".into()))?;
    let session = parts
        .next()
        .and_then(|p| p.strip_prefix("session="))
        .ok_or_else(|| bad("missing session=<id>".into()))?;
    if parts.next().is_some() {
        return Err(bad("unexpected trailing header fields".into()));
    }
    Ok((subject.to_string(), session.to_string()))
}

fn parse_sample_line(line: &str) -> std::result::Result<(Sensor, Sample), String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 5 {
        return Err(format!("expected 5 comma-separated fields, found {}", fields.len()));
    }
    let sensor = match fields[0] {
        "A" => Sensor::Accel,
        "G" => Sensor::Gyro,
        other => return Err(format!("unknown sensor tag {other:?}")),
    };
    let mut vals = [0.0; 4];
    for (slot, field) in vals.iter_mut().zip(&fields[1..]) {
        *slot = field
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("invalid number {field:?}"))?;
    }
    Ok((sensor, Sample::new(vals[0], vals[1], vals[2], vals[3])))
}

/// Serializes a recording. Timestamps are written with nine decimals and the
/// axis values with the shortest representation that parses back exactly.
pub fn write_recording(rec: &Recording) -> Result<String> {
    rec.validate()?;
    let mut out = String::with_capacity(40 * (rec.accel.len() + rec.gyro.len()) + 64);
    writeln!(
        out,
        "{MAGIC} {VERSION} subject={} session={}",
        rec.subject_id, rec.session_id
    )
    .unwrap();
    for (sensor, stream) in [(Sensor::Accel, &rec.accel), (Sensor::Gyro, &rec.gyro)] {
        for s in stream {
            writeln!(
                out,
                "{},{:.9},{:?},{:?},{:?}",
                sensor.tag(),
                s.t,
                s.xyz[0],
                s.xyz[1],
                s.xyz[2]
            )
            .unwrap();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "#gaitkit-rec v1 subject=s1 session=a\n";

    #[test]
    fn minimal_input() {
        let rec =
            parse_recording(&format!("{HEADER}A,0.000,0.1,0.2,9.8\nG,0.001,0.01,0.02,0.03\n"))
                .unwrap();
        assert_eq!(rec.accel.len(), 1);
        assert_eq!(rec.gyro.len(), 1);
        assert_eq!(rec.accel[0].xyz, [0.1, 0.2, 9.8]);
        assert_eq!(rec.gyro[0].t, 0.001);
    }

    #[test]
    fn malformed_field_names_line() {
        let err = parse_recording(&format!("{HEADER}A,0.002000,x,0,0\n")).unwrap_err();
        match err {
            GaitError::Parse { line, message } => {
                // Line 1 of the sample body is line 2 of the file.
                assert_eq!(line, 2);
                assert!(message.contains("\"x\""));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_monotone_timestamps_rejected() {
        let text = format!(
            "{HEADER}A,0.010000,0,0,1\nA,0.005000,0,0,1\nG,0.000000,0,0,0\n"
        );
        assert!(matches!(parse_recording(&text), Err(GaitError::Validation(_))));
    }

    #[test]
    fn header_checks() {
        assert!(matches!(
            parse_recording("#gaitkit-rec v2 subject=a session=b\n"),
            Err(GaitError::UnsupportedVersion { .. })
        ));
        assert!(matches!(
            parse_recording("#other v1 subject=a session=b\n"),
            Err(GaitError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_recording("#gaitkit-rec v1 subject=a\n"),
            Err(GaitError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn timestamps_shift_to_zero() {
        let text = format!("{HEADER}A,5.000000,0,0,1\nA,5.010000,0,0,1\nG,5.002000,0,0,0\n");
        let rec = parse_recording(&text).unwrap();
        assert_eq!(rec.accel[0].t, 0.0);
        assert!((rec.gyro[0].t - 0.002).abs() < 1e-12);
    }

    #[test]
    fn writer_output_parses_identically() {
        let rec = Recording {
            subject_id: "s1".into(),
            session_id: "a".into(),
            accel: vec![
                Sample::new(0.0, 0.1, -0.2, 9.81),
                Sample::new(0.006512, 1.0 / 3.0, 2e-9, -7.5),
            ],
            gyro: vec![Sample::new(0.001, 0.01, 0.02, 0.03)],
        };
        let text = write_recording(&rec).unwrap();
        assert_eq!(parse_recording(&text).unwrap(), rec);
    }

    #[test]
    fn rate_check() {
        let stream: Vec<Sample> = (0..101).map(|i| Sample::new(i as f64 * 0.01, 0., 0., 1.)).collect();
        let mut rec = Recording {
            subject_id: "s".into(),
            session_id: "x".into(),
            accel: stream.clone(),
            gyro: stream,
        };
        rec.check_sample_rates().unwrap();
        for s in &mut rec.gyro {
            s.t *= 10.0;
        }
        assert!(rec.check_sample_rates().is_err());
    }
}
