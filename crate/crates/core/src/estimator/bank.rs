use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::numerics::{fft, ifft};
use crate::simulator::ControlTrace;
use crate::{Error, Result};

const FORMAT_VERSION: u32 = 1;

/// FIR taps for every control channel, indexed `[channel][output][k]`.
///
/// Tap `k` multiplies `s[n + lag − k]` when forming output sample `n`, so
/// the filters are two-sided with `lag` taps of look-ahead. Quadrature banks
/// have two outputs (in-phase and quadrature parts of a complex estimate).
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilterBank {
    pub taps: Vec<Vec<Vec<f64>>>,
    pub lag: usize,
    pub t_s: f64,
    pub osr: usize,
    pub labels: Vec<String>,
    /// Leading channels that hold fixed reference filters.
    pub reference_channels: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    #[serde(rename = "L")]
    length: usize,
    lag: usize,
    channels: usize,
    outputs: usize,
    #[serde(rename = "T_s")]
    t_s: f64,
    osr: usize,
    labels: Vec<String>,
    reference_channels: usize,
}

impl FirFilterBank {
    pub fn zeros(channels: usize, outputs: usize, length: usize, lag: usize, t_s: f64, osr: usize) -> Self {
        FirFilterBank {
            taps: vec![vec![vec![0.0; length]; outputs]; channels],
            lag,
            t_s,
            osr,
            labels: (0..channels).map(|c| format!("s{c}")).collect(),
            reference_channels: 0,
        }
    }

    pub fn n_channels(&self) -> usize {
        self.taps.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.taps.first().map_or(0, |c| c.len())
    }

    pub fn len(&self) -> usize {
        self.taps.first().and_then(|c| c.first()).map_or(0, |t| t.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        let (o, l) = (self.n_outputs(), self.len());
        if self.taps.iter().any(|c| c.len() != o || c.iter().any(|t| t.len() != l)) {
            return Err(Error::DimensionMismatch("filters of unequal shape".into()));
        }
        if l == 0 || self.lag >= l || o == 0 || o > 2 {
            return Err(Error::DimensionMismatch(format!("length {l}, lag {}, outputs {o}", self.lag)));
        }
        if self.labels.len() != self.n_channels() || self.reference_channels > self.n_channels() {
            return Err(Error::DimensionMismatch("labels do not match channels".into()));
        }
        Ok(())
    }

    /// Complex response of channel `c` at `f` Hz, phase referenced to the lag tap.
    pub fn response(&self, c: usize, f: f64) -> Complex64 {
        let w = -2.0 * std::f64::consts::PI * f * self.t_s;
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..self.len() {
            let tap = Complex64::new(self.taps[c][0][k], self.taps[c].get(1).map_or(0.0, |t| t[k]));
            acc += tap * Complex64::from_polar(1.0, w * (k as f64 - self.lag as f64));
        }
        acc
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        self.validate()?;
        let h = Header {
            version: FORMAT_VERSION,
            length: self.len(),
            lag: self.lag,
            channels: self.n_channels(),
            outputs: self.n_outputs(),
            t_s: self.t_s,
            osr: self.osr,
            labels: self.labels.clone(),
            reference_channels: self.reference_channels,
        };
        serde_json::to_writer(&mut w, &h)?;
        w.write_all(b"\n")?;
        for t in self.taps.iter().flatten().flatten() {
            w.write_all(&t.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut line = String::new();
        r.read_line(&mut line)?;
        let h: Header = serde_json::from_str(line.trim_end())?;
        if h.version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported filter bank version {}", h.version)));
        }
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let count = h.channels * h.outputs * h.length;
        if bytes.len() != 8 * count {
            return Err(Error::Format(format!("expected {} tap bytes, found {}", 8 * count, bytes.len())));
        }
        let mut vals = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let taps = (0..h.channels)
            .map(|_| (0..h.outputs).map(|_| vals.by_ref().take(h.length).collect()).collect())
            .collect();
        let bank = FirFilterBank {
            taps,
            lag: h.lag,
            t_s: h.t_s,
            osr: h.osr,
            labels: h.labels,
            reference_channels: h.reference_channels,
        };
        bank.validate()?;
        Ok(bank)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        FirFilterBank::read_from(std::fs::File::open(path)?)
    }
}

/// Filtered control signals.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSequence {
    /// Real estimates carry a zero imaginary part.
    pub values: Vec<Complex64>,
    pub complex: bool,
    /// Hz
    pub sample_rate: f64,
    /// Trace period of the first sample.
    pub first_period: usize,
    /// Trace periods between samples.
    pub stride: usize,
}

impl EstimateSequence {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn real(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    /// Drops the first `n` samples.
    pub fn skip(&self, n: usize) -> EstimateSequence {
        EstimateSequence {
            values: self.values[n.min(self.values.len())..].to_vec(),
            first_period: self.first_period + n * self.stride,
            ..self.clone()
        }
    }
}

/// `Σ_ℓ h_ℓ ⋆ s_ℓ` at every period where the full filter support lies in the trace.
pub fn estimate_full_rate(trace: &ControlTrace, bank: &FirFilterBank) -> Result<EstimateSequence> {
    filter(trace, bank, 1)
}

/// Like [`estimate_full_rate`], keeping only periods that are multiples of `osr`.
pub fn estimate(trace: &ControlTrace, bank: &FirFilterBank) -> Result<EstimateSequence> {
    filter(trace, bank, bank.osr.max(1))
}

fn filter(trace: &ControlTrace, bank: &FirFilterBank, stride: usize) -> Result<EstimateSequence> {
    bank.validate()?;
    if trace.n_channels() != bank.n_channels() {
        return Err(Error::DimensionMismatch(format!(
            "trace has {} channels, filter bank {}",
            trace.n_channels(),
            bank.n_channels()
        )));
    }
    let k = trace.len();
    let l = bank.len();
    if k < l || k < 2 * bank.lag {
        return Err(Error::TooShort { len: k, need: l.max(2 * bank.lag) });
    }
    let nfft = (k + l - 1).next_power_of_two();
    let mut acc = vec![Complex64::new(0.0, 0.0); nfft];
    let complex = bank.n_outputs() == 2;
    for c in 0..bank.n_channels() {
        let taps = &bank.taps[c];
        if taps.iter().all(|t| t.iter().all(|&v| v == 0.0)) {
            continue;
        }
        let mut s = vec![Complex64::new(0.0, 0.0); nfft];
        for (i, v) in trace.channel(c).into_iter().enumerate() {
            s[i].re = v as f64;
        }
        let mut h = vec![Complex64::new(0.0, 0.0); nfft];
        for j in 0..l {
            h[j] = Complex64::new(taps[0][j], if complex { taps[1][j] } else { 0.0 });
        }
        let sf = fft(&s)?;
        let hf = fft(&h)?;
        for ((a, x), y) in acc.iter_mut().zip(sf).zip(hf) {
            *a += x * y;
        }
    }
    let y = ifft(&acc)?;
    // output n uses y[n + lag]; valid for n in [l-1-lag, k-1-lag]
    let first = l - 1 - bank.lag;
    let last = k - 1 - bank.lag;
    let start = first.div_ceil(stride) * stride;
    let values: Vec<Complex64> = (start..=last)
        .step_by(stride)
        .map(|n| {
            let v = y[n + bank.lag];
            if complex {
                v
            } else {
                Complex64::new(v.re, 0.0)
            }
        })
        .collect();
    Ok(EstimateSequence {
        values,
        complex,
        sample_rate: 1.0 / (bank.t_s * stride as f64),
        first_period: start,
        stride,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(rows: &[Vec<i8>]) -> ControlTrace {
        let m = rows[0].len();
        ControlTrace::from_rows(rows, 1.0, (0..m).map(|i| format!("s{i}")).collect(), 0, 0).unwrap()
    }

    #[test]
    fn zero_taps_give_zero() {
        let rows: Vec<Vec<i8>> = (0..64).map(|k| vec![if k % 3 == 0 { 1 } else { -1 }; 2]).collect();
        let bank = FirFilterBank::zeros(2, 1, 8, 4, 1.0, 1);
        let e = estimate(&trace(&rows), &bank).unwrap();
        assert!(e.values.iter().all(|v| v.norm() == 0.0));
        assert_eq!(e.len(), 64 - 7);
    }

    #[test]
    fn delta_reproduces_decimated_decisions() {
        let rows: Vec<Vec<i8>> = (0..40).map(|k| vec![if k % 2 == 0 { 1 } else { -1 }]).collect();
        let mut bank = FirFilterBank::zeros(1, 1, 1, 0, 1.0, 4);
        bank.taps[0][0][0] = 1.0;
        let e = estimate(&trace(&rows), &bank).unwrap();
        assert_eq!(e.stride, 4);
        assert_eq!(e.len(), 10);
        assert!(e.values.iter().all(|v| (v.re - 1.0).abs() < 1e-12));
        assert_eq!(e.sample_rate, 0.25);
    }

    #[test]
    fn matches_direct_convolution() {
        let rows: Vec<Vec<i8>> = (0..100u32)
            .map(|k| vec![if (k * 7 + 3) % 5 < 2 { 1 } else { -1 }, if k.count_ones() % 2 == 0 { 1 } else { -1 }])
            .collect();
        let t = trace(&rows);
        let mut bank = FirFilterBank::zeros(2, 2, 9, 4, 1.0, 1);
        for c in 0..2 {
            for o in 0..2 {
                for j in 0..9 {
                    bank.taps[c][o][j] = ((c * 31 + o * 7 + j * 3) % 11) as f64 / 11.0 - 0.4;
                }
            }
        }
        let e = estimate_full_rate(&t, &bank).unwrap();
        assert_eq!(e.first_period, 4);
        for (i, v) in e.values.iter().enumerate() {
            let n = e.first_period + i;
            let mut want = Complex64::new(0.0, 0.0);
            for c in 0..2 {
                for j in 0..9 {
                    let s = t.get(n + 4 - j, c) as f64;
                    want += Complex64::new(bank.taps[c][0][j], bank.taps[c][1][j]) * s;
                }
            }
            assert!((v - want).norm() < 1e-12, "{n}");
        }
    }

    #[test]
    fn too_short() {
        let rows: Vec<Vec<i8>> = (0..4).map(|_| vec![1]).collect();
        let bank = FirFilterBank::zeros(1, 1, 8, 4, 1.0, 1);
        assert!(matches!(estimate(&trace(&rows), &bank), Err(Error::TooShort { .. })));
    }

    #[test]
    fn file_round_trip() {
        let mut bank = FirFilterBank::zeros(3, 2, 5, 2, 0.5, 8);
        bank.taps[1][1][3] = -0.25;
        bank.reference_channels = 1;
        let mut buf = Vec::new();
        bank.write_to(&mut buf).unwrap();
        let nl = buf.iter().position(|&b| b == b'\n').unwrap();
        assert_eq!(buf.len() - nl - 1, 3 * 2 * 5 * 8);
        assert_eq!(FirFilterBank::read_from(&buf[..]).unwrap(), bank);
    }
}
