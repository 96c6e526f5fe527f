use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::path::Path;

use super::LeapfrogDesign;
use crate::{Error, Result};

/// A continuous-time LTI analog system
/// `ẋ = A x + B u + Γ s`, where `u` are signal inputs and `s` control inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpaceModel {
    /// n×n, 1/s
    #[serde(with = "row_major")]
    pub a: DMatrix<f64>,
    /// n×m_u, 1/s
    #[serde(with = "row_major")]
    pub b: DMatrix<f64>,
    /// n×m_s, 1/s
    #[serde(with = "row_major")]
    pub gamma: DMatrix<f64>,
    /// States observed by the estimator (`x_N`, and `x̄_N` for quadrature).
    pub output_rows: Vec<usize>,
    pub input_labels: Vec<String>,
    pub control_labels: Vec<String>,
}

/// Which column a transfer function is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Input(usize),
    Control(usize),
}

impl StateSpaceModel {
    pub fn zeros(n: usize, m_u: usize, m_s: usize) -> Self {
        StateSpaceModel {
            a: DMatrix::zeros(n, n),
            b: DMatrix::zeros(n, m_u),
            gamma: DMatrix::zeros(n, m_s),
            output_rows: Vec::new(),
            input_labels: (0..m_u).map(|i| format!("u{i}")).collect(),
            control_labels: (0..m_s).map(|i| format!("s{i}")).collect(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_controls(&self) -> usize {
        self.gamma.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_states();
        if self.a.ncols() != n || self.b.nrows() != n || self.gamma.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "A {}x{}, B {}x{}, Γ {}x{}",
                self.a.nrows(),
                self.a.ncols(),
                self.b.nrows(),
                self.b.ncols(),
                self.gamma.nrows(),
                self.gamma.ncols()
            )));
        }
        if self.output_rows.iter().any(|&r| r >= n) {
            return Err(Error::DimensionMismatch("output row out of range".into()));
        }
        if self.input_labels.len() != self.n_inputs() || self.control_labels.len() != self.n_controls() {
            return Err(Error::DimensionMismatch("label count does not match channel count".into()));
        }
        let finite = self.a.iter().chain(self.b.iter()).chain(self.gamma.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("state-space model"));
        }
        Ok(())
    }

    pub fn column(&self, ch: Channel) -> Result<DVector<f64>> {
        match ch {
            Channel::Input(i) if i < self.n_inputs() => Ok(self.b.column(i).into_owned()),
            Channel::Control(i) if i < self.n_controls() => Ok(self.gamma.column(i).into_owned()),
            _ => Err(Error::InvalidArgument(format!("no such channel {ch:?}"))),
        }
    }

    /// Solves `(iωI − A) g = rhs` for several right-hand sides with one factorization.
    pub fn resolvent_solve(&self, omega: f64, rhs: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        let n = self.n_states();
        let mut m: DMatrix<Complex64> = self.a.map(|v| Complex64::new(-v, 0.0));
        for i in 0..n {
            m[(i, i)] += Complex64::new(0.0, omega);
        }
        let scale = m.iter().fold(0.0f64, |s, v| s.max(v.norm()));
        let lu = m.lu();
        let u = lu.u();
        let min_pivot = (0..n).fold(f64::INFINITY, |s, i| s.min(u[(i, i)].norm()));
        if n > 0 && min_pivot <= 1e-13 * scale {
            return Err(Error::Pole { omega });
        }
        let g = lu.solve(rhs).ok_or(Error::Pole { omega })?;
        if g.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Pole { omega });
        }
        Ok(g)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: StateSpaceModel = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        StateSpaceModel::from_json(&std::fs::read_to_string(path)?)
    }
}

/// All state responses `(iωI − A)⁻¹·b` to one input or control channel.
pub fn transfer_function(model: &StateSpaceModel, omega: f64, ch: Channel) -> Result<DVector<Complex64>> {
    let b = model.column(ch)?.map(|v| Complex64::new(v, 0.0));
    let rhs = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
    let g = model.resolvent_solve(omega, &rhs)?;
    Ok(g.column(0).into_owned())
}

/// Stacks two copies of a low-pass model and couples them by `±ω_n`:
/// `A = [[A_LP, −ω_n I], [ω_n I, A_LP]]`, `B` and `Γ` block diagonal.
pub fn quadrature_extend(lp: &StateSpaceModel, design: &LeapfrogDesign, omega_n: f64) -> Result<StateSpaceModel> {
    lp.validate()?;
    if !(omega_n >= 0.0) || omega_n >= std::f64::consts::PI * design.f_s {
        return Err(Error::NotchOutOfRange {
            omega_n,
            limit: std::f64::consts::PI * design.f_s,
        });
    }
    let n = lp.n_states();
    let (mu, ms) = (lp.n_inputs(), lp.n_controls());
    let mut q = StateSpaceModel::zeros(2 * n, 2 * mu, 2 * ms);
    for k in 0..2 {
        q.a.view_mut((k * n, k * n), (n, n)).copy_from(&lp.a);
        q.b.view_mut((k * n, k * mu), (n, mu)).copy_from(&lp.b);
        q.gamma.view_mut((k * n, k * ms), (n, ms)).copy_from(&lp.gamma);
    }
    for i in 0..n {
        q.a[(i, n + i)] = -omega_n;
        q.a[(n + i, i)] = omega_n;
    }
    q.output_rows = lp.output_rows.iter().flat_map(|&r| [r, r + n]).collect();
    q.output_rows.sort_unstable();
    q.input_labels = lp
        .input_labels
        .iter()
        .cloned()
        .chain(lp.input_labels.iter().map(|l| format!("{l}bar")))
        .collect();
    q.control_labels = lp
        .control_labels
        .iter()
        .cloned()
        .chain(lp.control_labels.iter().map(|l| l.replacen('s', "sbar", 1)))
        .collect();
    Ok(q)
}

mod row_major {
    use super::*;

    #[derive(Serialize, Deserialize)]
    struct Rows {
        rows: usize,
        cols: usize,
        data: Vec<Vec<f64>>,
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        Rows {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DMatrix<f64>, D::Error> {
        use serde::de::Error as _;
        let r = Rows::deserialize(d)?;
        if r.data.len() != r.rows || r.data.iter().any(|row| row.len() != r.cols) {
            return Err(D::Error::custom("matrix shape does not match its data"));
        }
        let flat: Vec<f64> = r.data.into_iter().flatten().collect();
        Ok(DMatrix::from_row_slice(r.rows, r.cols, &flat))
    }
}
