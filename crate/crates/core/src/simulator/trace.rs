use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::{Error, Result};

const FORMAT_VERSION: u32 = 1;

/// Binary control decisions of one run, `K` periods × `M` channels, one bit
/// per decision (`+1 ↔ 1`), row-major, least significant bit first.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTrace {
    k: usize,
    m: usize,
    t_s: f64,
    labels: Vec<String>,
    seed: u64,
    reference_channels: usize,
    bits: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "T_s")]
    t_s: f64,
    labels: Vec<String>,
    seed: u64,
    #[serde(default)]
    reference_channels: usize,
    byte_order: String,
}

impl ControlTrace {
    /// Empty trace.
    pub fn new(m: usize, t_s: f64, labels: Vec<String>, seed: u64, reference_channels: usize) -> Result<Self> {
        if labels.len() != m {
            return Err(Error::DimensionMismatch(format!("{} labels for {} channels", labels.len(), m)));
        }
        if reference_channels > m {
            return Err(Error::DimensionMismatch("more reference channels than channels".into()));
        }
        Ok(ControlTrace {
            k: 0,
            m,
            t_s,
            labels,
            seed,
            reference_channels,
            bits: Vec::new(),
        })
    }

    /// Builds a trace from `±1` rows.
    pub fn from_rows(rows: &[Vec<i8>], t_s: f64, labels: Vec<String>, seed: u64, reference_channels: usize) -> Result<Self> {
        let mut t = ControlTrace::new(labels.len(), t_s, labels, seed, reference_channels)?;
        for r in rows {
            t.push(r)?;
        }
        Ok(t)
    }

    /// Appends one period of decisions.
    pub fn push(&mut self, row: &[i8]) -> Result<()> {
        if row.len() != self.m {
            return Err(Error::DimensionMismatch(format!("row of {} for {} channels", row.len(), self.m)));
        }
        let need = ((self.k + 1) * self.m).div_ceil(8);
        self.bits.resize(need, 0);
        for (j, &d) in row.iter().enumerate() {
            let idx = self.k * self.m + j;
            match d {
                1 => self.bits[idx / 8] |= 1 << (idx % 8),
                -1 => {}
                _ => return Err(Error::InvalidArgument(format!("decision {d} is not ±1"))),
            }
        }
        self.k += 1;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn n_channels(&self) -> usize {
        self.m
    }

    pub fn t_s(&self) -> f64 {
        self.t_s
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn reference_channels(&self) -> usize {
        self.reference_channels
    }

    /// Decision of channel `j` in period `k`.
    pub fn get(&self, k: usize, j: usize) -> i8 {
        assert!(k < self.k && j < self.m, "index ({k}, {j}) out of range");
        let idx = k * self.m + j;
        if self.bits[idx / 8] >> (idx % 8) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    pub fn channel(&self, j: usize) -> Vec<i8> {
        (0..self.k).map(|k| self.get(k, j)).collect()
    }

    pub fn channel_f64(&self, j: usize) -> Vec<f64> {
        (0..self.k).map(|k| self.get(k, j) as f64).collect()
    }

    /// Packed payload bytes.
    pub fn as_bytes(&self) -> &[u8] {
        &self.bits
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header {
            version: FORMAT_VERSION,
            k: self.k,
            m: self.m,
            t_s: self.t_s,
            labels: self.labels.clone(),
            seed: self.seed,
            reference_channels: self.reference_channels,
            byte_order: "little".into(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        w.write_all(&self.bits)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut line = String::new();
        r.read_line(&mut line)?;
        let h: Header = serde_json::from_str(line.trim_end())?;
        if h.version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported trace version {}", h.version)));
        }
        if h.labels.len() != h.m || h.reference_channels > h.m {
            return Err(Error::Format("header channel count does not match its labels".into()));
        }
        let mut bits = Vec::new();
        r.read_to_end(&mut bits)?;
        if bits.len() != (h.k * h.m).div_ceil(8) {
            return Err(Error::Format(format!(
                "expected {} payload bytes, found {}",
                (h.k * h.m).div_ceil(8),
                bits.len()
            )));
        }
        Ok(ControlTrace {
            k: h.k,
            m: h.m,
            t_s: h.t_s,
            labels: h.labels,
            seed: h.seed,
            reference_channels: h.reference_channels,
            bits,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        ControlTrace::read_from(std::fs::File::open(path)?)
    }
}

/// How state snapshots map to control pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateLayout {
    /// `N` independent states.
    Lowpass { order: usize },
    /// Pairs `(x_ℓ, x̄_ℓ)` at indices `(ℓ, N+ℓ)`.
    Quadrature { order: usize },
}

/// State snapshots at clock instants `k·stride·T_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrace {
    pub stride: usize,
    pub t_s: f64,
    pub layout: StateLayout,
    pub snapshots: Vec<Vec<f64>>,
}

impl StateTrace {
    /// Per-pair (or per-state) norm of one snapshot.
    pub fn pair_norms(&self, snapshot: &[f64]) -> Vec<f64> {
        match self.layout {
            StateLayout::Lowpass { order } => snapshot[..order].iter().map(|v| v.abs()).collect(),
            StateLayout::Quadrature { order } => {
                (0..order).map(|l| snapshot[l].hypot(snapshot[order + l])).collect()
            }
        }
    }
}

/// `sup_k ‖(x_ℓ, x̄_ℓ)[k]‖₂` per pair, or `sup_k |x_ℓ[k]|` for low-pass.
pub fn max_state_norm(trace: &StateTrace) -> Result<Vec<f64>> {
    if trace.snapshots.is_empty() {
        return Err(Error::TooShort { len: 0, need: 1 });
    }
    let mut out = trace.pair_norms(&trace.snapshots[0]);
    for s in &trace.snapshots[1..] {
        for (o, v) in out.iter_mut().zip(trace.pair_norms(s)) {
            *o = o.max(v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ControlTrace {
        let rows = vec![vec![1, -1, 1], vec![-1, -1, 1], vec![1, 1, 1]];
        ControlTrace::from_rows(&rows, 0.5, vec!["a".into(), "b".into(), "c".into()], 7, 0).unwrap()
    }

    #[test]
    fn packing_is_lsb_first_row_major() {
        let t = sample();
        // bits 1 0 1 0 0 1 1 1 | 1 → 0b1110_0101, 0b1
        assert_eq!(t.as_bytes(), &[0b1110_0101, 0b1]);
        assert_eq!(t.get(1, 0), -1);
        assert_eq!(t.channel(2), vec![1, 1, 1]);
    }

    #[test]
    fn file_round_trip() {
        let t = sample();
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let nl = buf.iter().position(|&b| b == b'\n').unwrap();
        let header: serde_json::Value = serde_json::from_slice(&buf[..nl]).unwrap();
        assert_eq!(header["K"], 3);
        assert_eq!(header["M"], 3);
        assert_eq!(&buf[nl + 1..], t.as_bytes());
        assert_eq!(ControlTrace::read_from(&buf[..]).unwrap(), t);
        assert!(ControlTrace::read_from(&buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn rejects_non_binary() {
        let mut t = ControlTrace::new(1, 1.0, vec!["s".into()], 0, 0).unwrap();
        assert!(t.push(&[0]).is_err());
    }

    #[test]
    fn max_norm() {
        let tr = StateTrace {
            stride: 1,
            t_s: 1.0,
            layout: StateLayout::Quadrature { order: 1 },
            snapshots: vec![vec![0.0, 0.0], vec![3.0, 4.0], vec![1.0, 0.0]],
        };
        assert_eq!(max_state_norm(&tr).unwrap(), vec![5.0]);
        let zero = StateTrace {
            snapshots: vec![vec![0.0; 4]; 3],
            layout: StateLayout::Lowpass { order: 4 },
            ..tr.clone()
        };
        assert_eq!(max_state_norm(&zero).unwrap(), vec![0.0; 4]);
    }
}
