//! CSV rows for paths, exits and membranes, and the binary path-frame format.
//!
//! A frame file is `MEMBFRM1`, a little-endian header and a sequence of paths:
//!
//! ```text
//! magic      8 bytes  "MEMBFRM1"
//! hash      32 bytes  SHA-256 of the producing configuration
//! dim        u32      state dimension 1 + n
//! paths      u32      number of paths
//! per path:
//!   samples  u64
//!   events   u64
//!   samples × (t, x, y¹..yⁿ)         f64
//!   events  × (t, k as f64, side as f64, sojourn)  f64
//! ```

use membrane_core::linalg::{Vector, ZERO};
use membrane_core::membranes::MembraneLayout;
use membrane_core::sim::{CrossingEvent, ExitRecord, PathSample};

use crate::error::HarnessError;
use crate::report::{num, Table};

pub const FRAME_MAGIC: &[u8; 8] = b"MEMBFRM1";

/// `t, x, y1..yn` per recorded state.
pub fn path_table(path: &PathSample) -> Table {
    let mut cols = vec!["t".to_string(), "x".to_string()];
    cols.extend((1..path.dim).map(|i| format!("y{i}")));
    let mut t = Table { columns: cols, rows: Vec::new() };
    for (time, s) in path.times.iter().zip(&path.states) {
        let mut row = vec![num(*time)];
        row.extend(s[..path.dim].iter().map(|v| num(*v)));
        t.push(row);
    }
    t
}

pub const EXIT_COLUMNS: [&str; 8] = ["path", "k", "side", "tau", "exit_x", "dx", "sup_dy2", "x_integral"];

/// One row per strip exit; transversal exit coordinates follow as `y1..yn`.
pub fn exit_table(records: &[ExitRecord], n: usize) -> Table {
    let mut cols: Vec<String> = EXIT_COLUMNS.iter().map(|s| s.to_string()).collect();
    cols.extend((1..=n).map(|i| format!("y{i}")));
    let mut t = Table { columns: cols, rows: Vec::new() };
    for (j, r) in records.iter().enumerate() {
        let mut row = vec![
            j.to_string(),
            r.start_k.to_string(),
            r.exit_side.to_string(),
            num(r.tau),
            num(r.exit_state[0]),
            num(r.exit_offset()),
            num(r.sup_dy2),
            num(r.x_integral),
        ];
        row.extend((1..=n).map(|i| num(r.exit_state[i])));
        t.push(row);
    }
    t
}

/// Cached `(k, a_k)` pairs.
pub fn membrane_table(layout: &MembraneLayout) -> Table {
    let mut t = Table::new(&["k", "a_k"]);
    for (k, a) in layout.computed_positions() {
        t.push(vec![k.to_string(), num(a)]);
    }
    t
}

pub fn write_frames(hash_hex: &str, paths: &[PathSample]) -> Result<Vec<u8>, HarnessError> {
    let hash = hex::decode(hash_hex).map_err(|e| HarnessError::Frame(format!("bad hash: {e}")))?;
    if hash.len() != 32 {
        return Err(HarnessError::Frame("hash must be 32 bytes".into()));
    }
    let dim = paths.first().map(|p| p.dim).unwrap_or(1);
    if paths.iter().any(|p| p.dim != dim) {
        return Err(HarnessError::Frame("paths of different dimension".into()));
    }
    let mut out = Vec::new();
    out.extend_from_slice(FRAME_MAGIC);
    out.extend_from_slice(&hash);
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(paths.len() as u32).to_le_bytes());
    for p in paths {
        out.extend_from_slice(&(p.times.len() as u64).to_le_bytes());
        out.extend_from_slice(&(p.events.len() as u64).to_le_bytes());
        for (t, s) in p.times.iter().zip(&p.states) {
            out.extend_from_slice(&t.to_le_bytes());
            for v in &s[..dim] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for e in &p.events {
            for v in [e.time, e.k as f64, e.side as f64, e.sojourn] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], HarnessError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| HarnessError::Frame("truncated frame file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, HarnessError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, HarnessError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, HarnessError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Decoded frame file: configuration hash and paths. Event `y` values are not stored.
pub fn read_frames(bytes: &[u8]) -> Result<(String, Vec<PathSample>), HarnessError> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(8)? != FRAME_MAGIC {
        return Err(HarnessError::Frame("bad magic".into()));
    }
    let hash = hex::encode(c.take(32)?);
    let dim = c.u32()? as usize;
    if dim == 0 || dim > membrane_core::linalg::MAX_DIM {
        return Err(HarnessError::Frame(format!("unsupported dimension {dim}")));
    }
    let count = c.u32()? as usize;
    let mut paths = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let samples = c.u64()? as usize;
        let events = c.u64()? as usize;
        let mut p = PathSample { dim, ..PathSample::default() };
        for _ in 0..samples {
            p.times.push(c.f64()?);
            let mut s: Vector = ZERO;
            for v in s.iter_mut().take(dim) {
                *v = c.f64()?;
            }
            p.states.push(s);
        }
        for _ in 0..events {
            let time = c.f64()?;
            let k = c.f64()? as i64;
            let side = c.f64()? as i8;
            let sojourn = c.f64()?;
            p.events.push(CrossingEvent { time, k, y: ZERO, side, sojourn });
        }
        paths.push(p);
    }
    if c.pos != bytes.len() {
        return Err(HarnessError::Frame("trailing bytes".into()));
    }
    Ok((hash, paths))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PathSample {
        PathSample {
            dim: 2,
            times: vec![0.0, 0.5],
            states: vec![[0.0, 1.0, 0.0, 0.0], [0.1, 0.9, 0.0, 0.0]],
            events: vec![CrossingEvent { time: 0.5, k: 1, y: ZERO, side: 1, sojourn: 0.5 }],
            truncated: false,
            steps: 2,
        }
    }

    #[test]
    fn frames_round_trip() {
        let hash = "ab".repeat(32);
        let bytes = write_frames(&hash, &[sample(), sample()]).unwrap();
        assert_eq!(&bytes[..8], FRAME_MAGIC);
        let (h, paths) = read_frames(&bytes).unwrap();
        assert_eq!(h, hash);
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[1].states, sample().states);
        assert_eq!(paths[1].events[0].k, 1);
        assert!(read_frames(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn path_csv_columns() {
        let t = path_table(&sample());
        assert_eq!(t.columns, vec!["t", "x", "y1"]);
        assert_eq!(t.rows[1], vec!["0.5", "0.1", "0.9"]);
    }
}
