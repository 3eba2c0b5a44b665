//! `SEIS1` trace files.
//!
//! ```text
//! offset  size  field
//! 0       5     magic "SEIS1"
//! 5       4     n_traces        u32 LE
//! 9       4     n_samples       u32 LE
//! 13      4     trace_spacing_m f32 LE
//! 17      4     sample_interval f32 LE
//! 21      4*N   values          f32 LE, trace-major (N = n_traces * n_samples)
//! ```
//!
//! Nothing may follow the values. A wrong magic, a short file and header
//! extents that disagree with the payload are reported as the distinct
//! errors [`Error::Format`], [`Error::Truncated`] and [`Error::HeaderExtent`].

use std::fs;
use std::io::Write;
use std::path::Path;

use super::Section;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const SEIS_MAGIC: &[u8; 5] = b"SEIS1";
const HEADER_LEN: usize = 21;

pub fn section_to_bytes(section: &Section) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * section.values().len());
    out.extend_from_slice(SEIS_MAGIC);
    out.extend_from_slice(&(section.n_traces() as u32).to_le_bytes());
    out.extend_from_slice(&(section.n_samples() as u32).to_le_bytes());
    out.extend_from_slice(&section.trace_spacing_m.to_le_bytes());
    out.extend_from_slice(&section.sample_interval.to_le_bytes());
    for &v in section.values().data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes(b.try_into().expect("4 bytes"))
}

fn le_f32(b: &[u8]) -> f32 {
    f32::from_le_bytes(b.try_into().expect("4 bytes"))
}

/// Parses a `SEIS1` image.
///
/// Errors: [`Error::Format`] for a wrong magic, [`Error::Truncated`] when
/// the header or payload is short, [`Error::HeaderExtent`] for zero extents
/// or bytes after the payload, [`Error::NonFinite`] for NaN/Inf samples.
pub fn section_from_bytes(bytes: &[u8]) -> Result<Section> {
    if bytes.len() < SEIS_MAGIC.len() || &bytes[..5] != SEIS_MAGIC {
        let shown = &bytes[..bytes.len().min(5)];
        return Err(Error::Format(format!("bad magic {shown:?}, expected \"SEIS1\"")));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated(format!("SEIS1 header needs {HEADER_LEN} bytes, file has {}", bytes.len())));
    }
    let n_traces = le_u32(&bytes[5..9]) as usize;
    let n_samples = le_u32(&bytes[9..13]) as usize;
    let spacing = le_f32(&bytes[13..17]);
    let dt = le_f32(&bytes[17..21]);
    if n_traces == 0 || n_samples == 0 {
        return Err(Error::HeaderExtent(format!("SEIS1 extents {n_traces}x{n_samples}")));
    }
    let expected = n_traces
        .checked_mul(n_samples)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::HeaderExtent(format!("SEIS1 extents {n_traces}x{n_samples} overflow")))?;
    if bytes.len() < expected {
        return Err(Error::Truncated(format!(
            "SEIS1 {n_traces}x{n_samples} needs {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    if bytes.len() > expected {
        return Err(Error::HeaderExtent(format!(
            "SEIS1 header says {n_traces}x{n_samples} ({expected} bytes) but file has {}",
            bytes.len()
        )));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| le_f32(c) as f64)
        .collect();
    Section::new(Tensor::new(&[n_traces, n_samples], data)?, spacing, dt)
}

pub fn write_section(path: impl AsRef<Path>, section: &Section) -> Result<()> {
    fs::write(path, section_to_bytes(section))?;
    Ok(())
}

pub fn read_section(path: impl AsRef<Path>) -> Result<Section> {
    section_from_bytes(&fs::read(path)?)
}

/// One row per trace, samples comma-separated, no header.
pub fn write_section_csv(path: impl AsRef<Path>, section: &Section) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    for i in 0..section.n_traces() {
        let row = section.trace(i);
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                w.write_all(b",")?;
            }
            write!(w, "{v}")?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn sample(seed: u64, nt: usize, ns: usize) -> Section {
        let t = Tensor::randn(&[nt, ns], &mut Rng::new(seed), 0.0, 100.0).unwrap();
        Section::new(t, 6.25, 0.002).unwrap().quantized()
    }

    #[test]
    fn header_layout() {
        let s = sample(1, 2, 3);
        let b = section_to_bytes(&s);
        assert_eq!(b.len(), 21 + 24);
        assert_eq!(&b[..5], b"SEIS1");
        assert_eq!(&b[5..9], &2u32.to_le_bytes());
        assert_eq!(&b[9..13], &3u32.to_le_bytes());
        assert_eq!(&b[13..17], &6.25f32.to_le_bytes());
        assert_eq!(&b[21..25], &(s.trace(0)[0] as f32).to_le_bytes());
        // Trace-major: the fourth value is trace 1, sample 0.
        assert_eq!(&b[33..37], &(s.trace(1)[0] as f32).to_le_bytes());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.seis");
        let s = sample(2, 7, 33);
        write_section(&p, &s).unwrap();
        let back = read_section(&p).unwrap();
        assert_eq!(back, s);
        assert_eq!(std::fs::read(&p).unwrap(), section_to_bytes(&back));
    }

    #[test]
    fn distinct_errors() {
        let b = section_to_bytes(&sample(3, 4, 5));
        assert!(matches!(section_from_bytes(&b[..b.len() - 1]), Err(Error::Truncated(_))));
        assert!(matches!(section_from_bytes(&b[..10]), Err(Error::Truncated(_))));
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(section_from_bytes(&bad), Err(Error::Format(_))));
        assert!(matches!(section_from_bytes(b"SEI"), Err(Error::Format(_))));
        let mut long = b.clone();
        long.push(0);
        assert!(matches!(section_from_bytes(&long), Err(Error::HeaderExtent(_))));
        let mut zero = b.clone();
        zero[5..9].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(section_from_bytes(&zero), Err(Error::HeaderExtent(_))));
        let mut nan = b;
        nan[21..25].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(section_from_bytes(&nan), Err(Error::NonFinite(_))));
    }

    #[test]
    fn csv_has_one_row_per_trace() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let s = sample(4, 3, 4);
        write_section_csv(&p, &s).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 3);
        let parsed: Vec<f64> = rows[1].split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(parsed, s.trace(1));
    }

    proptest! {
        #[test]
        fn bytes_round_trip(
            nt in 1usize..6,
            ns in 1usize..40,
            seed in any::<u64>(),
            spacing in -1e6f32..1e6,
            dt in 0f32..1.0,
        ) {
            let t = Tensor::randn(&[nt, ns], &mut Rng::new(seed), 0.0, 1e3).unwrap();
            let s = Section::new(t, spacing, dt).unwrap().quantized();
            let b = section_to_bytes(&s);
            let back = section_from_bytes(&b).unwrap();
            prop_assert_eq!(section_to_bytes(&back), b);
            prop_assert_eq!(back, s);
        }
    }
}
