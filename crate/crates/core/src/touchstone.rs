//! Touchstone-style text output and input for sweep results.
//!
//! Format emitted: header `# Hz S RI R <zref>`, then one record block per
//! frequency. Entries are real/imaginary pairs in port-major (row-major)
//! order, 9 significant digits, at most four pairs per line, each matrix
//! row starting a new line. Readers tolerate arbitrary whitespace layout.

use std::fmt::Write as _;

use num_complex::Complex64;
use thiserror::Error;

use crate::netkernel::{CMat, SweepSParams};

#[derive(Debug, Error)]
pub enum TouchstoneError {
    #[error("unsupported port count {0} (supported: 1, 2, 3, 4, 8)")]
    UnsupportedPortCount(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("data ends mid-block: expected {expected} values, found {found}")]
    Truncated { expected: usize, found: usize },
}

pub const SUPPORTED_PORTS: [usize; 5] = [1, 2, 3, 4, 8];

/// File extension for a port count, e.g. `s2p`.
pub fn extension(ports: usize) -> Result<String, TouchstoneError> {
    if SUPPORTED_PORTS.contains(&ports) {
        Ok(format!("s{ports}p"))
    } else {
        Err(TouchstoneError::UnsupportedPortCount(ports))
    }
}

/// Render a sweep as Touchstone text.
pub fn write_touchstone(s: &SweepSParams) -> Result<String, TouchstoneError> {
    if !SUPPORTED_PORTS.contains(&s.ports) {
        return Err(TouchstoneError::UnsupportedPortCount(s.ports));
    }
    let mut out = String::new();
    let _ = writeln!(out, "# Hz S RI R {}", fmt9(s.z_ref));
    for (fi, &f) in s.freqs.iter().enumerate() {
        let m = &s.matrices[fi];
        for row in 0..s.ports {
            let mut line = String::new();
            if row == 0 {
                line.push_str(&fmt9(f));
            }
            for col in 0..s.ports {
                if col > 0 && col % 4 == 0 {
                    let _ = writeln!(out, "{line}");
                    line = String::new();
                }
                let v = m.get(row, col);
                if !line.is_empty() {
                    line.push(' ');
                }
                let _ = write!(line, "{} {}", fmt9(v.re), fmt9(v.im));
            }
            let _ = writeln!(out, "{line}");
        }
    }
    Ok(out)
}

fn fmt9(x: f64) -> String {
    // Nine significant digits in scientific notation.
    format!("{x:.8e}")
}

/// Parse Touchstone text with the given port count (taken from the file
/// extension by callers).
pub fn read_touchstone(text: &str, ports: usize) -> Result<SweepSParams, TouchstoneError> {
    if !SUPPORTED_PORTS.contains(&ports) {
        return Err(TouchstoneError::UnsupportedPortCount(ports));
    }
    let mut z_ref = 50.0;
    let mut numbers: Vec<f64> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('!') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let fields: Vec<&str> = rest.split_whitespace().collect();
            let lower: Vec<String> = fields.iter().map(|f| f.to_ascii_lowercase()).collect();
            if lower.first().map(String::as_str) != Some("hz")
                || lower.get(1).map(String::as_str) != Some("s")
                || lower.get(2).map(String::as_str) != Some("ri")
            {
                return Err(TouchstoneError::Parse {
                    line: idx + 1,
                    message: "only `# Hz S RI R <zref>` headers are supported".into(),
                });
            }
            if let Some(p) = lower.iter().position(|f| f == "r") {
                z_ref = fields
                    .get(p + 1)
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| TouchstoneError::Parse {
                        line: idx + 1,
                        message: "missing reference impedance after R".into(),
                    })?;
            }
            continue;
        }
        for field in line.split_whitespace() {
            let v = field.parse::<f64>().map_err(|_| TouchstoneError::Parse {
                line: idx + 1,
                message: format!("non-numeric field `{field}`"),
            })?;
            numbers.push(v);
        }
    }
    let per_block = 1 + 2 * ports * ports;
    if numbers.is_empty() || numbers.len() % per_block != 0 {
        return Err(TouchstoneError::Truncated {
            expected: per_block,
            found: numbers.len() % per_block.max(1),
        });
    }
    let mut freqs = Vec::new();
    let mut matrices = Vec::new();
    for block in numbers.chunks(per_block) {
        freqs.push(block[0]);
        let mut m = CMat::zeros(ports);
        for k in 0..ports * ports {
            m.data[k] = Complex64::new(block[1 + 2 * k], block[2 + 2 * k]);
        }
        matrices.push(m);
    }
    Ok(SweepSParams { ports, z_ref, freqs, matrices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netkernel::FrequencyGrid;

    fn thru_sweep() -> SweepSParams {
        let freqs = FrequencyGrid::new(2e9, 1e9, 3e9, 3).freqs();
        let mut matrices = Vec::new();
        for _ in &freqs {
            let mut m = CMat::zeros(2);
            m.set(0, 1, Complex64::new(1.0, 0.0));
            m.set(1, 0, Complex64::new(1.0, 0.0));
            matrices.push(m);
        }
        SweepSParams { ports: 2, z_ref: 50.0, freqs, matrices }
    }

    #[test]
    fn two_port_thru_golden() {
        let text = write_touchstone(&thru_sweep()).unwrap();
        let z = "0.00000000e0";
        let one = "1.00000000e0";
        let expected = format!(
            "# Hz S RI R 5.00000000e1\n\
             1.00000000e9 {z} {z} {one} {z}\n{one} {z} {z} {z}\n\
             2.00000000e9 {z} {z} {one} {z}\n{one} {z} {z} {z}\n\
             3.00000000e9 {z} {z} {one} {z}\n{one} {z} {z} {z}\n"
        );
        assert_eq!(text, expected);
    }

    #[test]
    fn one_port_single_column() {
        let freqs = vec![1e9];
        let mut m = CMat::zeros(1);
        m.set(0, 0, Complex64::new(-0.5, 0.25));
        let s = SweepSParams { ports: 1, z_ref: 50.0, freqs, matrices: vec![m] };
        let text = write_touchstone(&s).unwrap();
        assert_eq!(text.lines().count(), 2);
        let back = read_touchstone(&text, 1).unwrap();
        assert_eq!(back.matrices[0].get(0, 0), Complex64::new(-0.5, 0.25));
    }

    #[test]
    fn unsupported_port_count_is_rejected() {
        let s = SweepSParams {
            ports: 5,
            z_ref: 50.0,
            freqs: vec![1e9],
            matrices: vec![CMat::zeros(5)],
        };
        assert!(matches!(
            write_touchstone(&s),
            Err(TouchstoneError::UnsupportedPortCount(5))
        ));
    }

    #[test]
    fn roundtrip_preserves_values() {
        let s = thru_sweep();
        let text = write_touchstone(&s).unwrap();
        let back = read_touchstone(&text, 2).unwrap();
        assert_eq!(back.freqs, s.freqs);
        for (a, b) in back.matrices.iter().zip(&s.matrices) {
            for k in 0..4 {
                assert!((a.data[k] - b.data[k]).norm() < 1e-9);
            }
        }
    }
}
