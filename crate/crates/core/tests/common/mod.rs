//! Shared test oracles.
#![allow(dead_code)]

use cbadc::simulator::{ControlTrace, InputKind, InputSpec, SimulationRun};
use cbadc::system::Frontend;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;

type CMat = DMatrix<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// The ideal quadrature frontend as one complex system `ż = A_c z + b_c u_c`
/// with output `x_c = z_N`.
pub struct ComplexSystem {
    pub a: CMat,
    pub b: DVector<Complex64>,
    pub out: usize,
}

impl ComplexSystem {
    pub fn from_frontend(f: &Frontend) -> Self {
        let m = f.model();
        let n = m.n_states() / 2;
        let mut a = CMat::zeros(n, n);
        let mut b = DVector::zeros(n);
        for i in 0..n {
            for j in 0..n {
                assert_eq!(m.a[(i, j)], m.a[(n + i, n + j)], "not complex-linear");
                assert_eq!(m.a[(n + i, j)], -m.a[(i, n + j)], "not complex-linear");
                a[(i, j)] = Complex64::new(m.a[(i, j)], m.a[(n + i, j)]);
            }
            b[i] = Complex64::new(m.b[(i, 0)], m.b[(n + i, 0)]);
        }
        ComplexSystem { a, b, out: m.output_rows[0] }
    }

    pub fn gain(&self, omega: f64) -> Complex64 {
        let n = self.a.nrows();
        let r = (CMat::identity(n, n) * Complex64::new(0.0, omega) - &self.a).lu().solve(&self.b).unwrap();
        r[self.out]
    }
}

/// State-space realization of `G̃ = G~ (η² + G G~)⁻¹`, `G~(s) = conj(G(−conj s))`.
pub struct InverseFilter {
    pub a: CMat,
    pub b: DVector<Complex64>,
    pub c: DVector<Complex64>,
    /// Projector onto the stable invariant subspace of `a`.
    pub p_stable: CMat,
}

impl InverseFilter {
    pub fn new(sys: &ComplexSystem, eta2: f64) -> Self {
        let n = sys.a.nrows();
        let mut cg = DVector::zeros(n);
        cg[sys.out] = c(1.0);
        // G~: w' = −A^H w + c^H v, y = −b^H w
        let a2 = -sys.a.adjoint();
        let mut a = CMat::zeros(2 * n, 2 * n);
        a.view_mut((0, 0), (n, n)).copy_from(&a2);
        // v = (e − c p)/η²
        a.view_mut((0, n), (n, n)).copy_from(&(-(&cg * cg.transpose()) / c(eta2)));
        // p' = A p + b y
        a.view_mut((n, 0), (n, n)).copy_from(&(-(&sys.b * sys.b.adjoint())));
        a.view_mut((n, n), (n, n)).copy_from(&sys.a);
        let mut b = DVector::zeros(2 * n);
        b.rows_mut(0, n).copy_from(&(&cg / c(eta2)));
        let mut cc = DVector::zeros(2 * n);
        cc.rows_mut(0, n).copy_from(&(-sys.b.conjugate()));
        // matrix sign function by Newton iteration
        let mut z = a.clone();
        for _ in 0..100 {
            let next = (&z + z.clone().try_inverse().unwrap()) * c(0.5);
            let done = (&next - &z).norm() <= 1e-14 * next.norm();
            z = next;
            if done {
                break;
            }
        }
        let p_stable = (CMat::identity(2 * n, 2 * n) - z) * c(0.5);
        InverseFilter { a, b, c: cc, p_stable }
    }

    pub fn response(&self, omega: f64) -> Complex64 {
        let n = self.a.nrows();
        let r = (CMat::identity(n, n) * Complex64::new(0.0, omega) - &self.a).lu().solve(&self.b).unwrap();
        self.c.dot(&r.conjugate()).conj()
    }
}

/// `(g̃∗g_u∗u)(kT_s) − (g̃∗x_c)(kT_s)` for every period of `run`, using the
/// recorded clock-instant states and exact intra-period propagation.
///
/// The two-sided `g̃` is split into its causal and anti-causal parts, each
/// run as a filter over the trajectory (forward and backward in time).
pub fn decomposition_oracle(f: &Frontend, input: &InputSpec, run: &SimulationRun) -> Vec<Complex64> {
    assert_eq!(input.kind, InputKind::QuadratureTone);
    let sys = ComplexSystem::from_frontend(f);
    let omega_eta = f.omega_n() + f.design().omega_b;
    let eta2 = sys.gain(omega_eta).norm_sqr();
    let inv = InverseFilter::new(&sys, eta2);
    let model = f.model();
    let t = f.control_law().t_s;
    let states = run.states.as_ref().expect("states recorded every period");
    assert_eq!(states.stride, 1);

    let n = model.n_states();
    let nh = inv.a.nrows();
    let m = model.n_controls();
    let w0 = 2.0 * PI * input.frequency;
    // [x; oscillator; r; s]
    let dim = n + 2 + nh + m;
    let mut big = CMat::zeros(dim, dim);
    for i in 0..n {
        for j in 0..n {
            big[(i, j)] = c(model.a[(i, j)]);
        }
        big[(i, n)] = c(model.b[(i, 0)]);
        big[(i, n + 1)] = c(model.b[(i, 1)]);
        for j in 0..m {
            big[(i, n + 2 + nh + j)] = c(model.gamma[(i, j)]);
        }
    }
    big[(n, n + 1)] = c(-w0);
    big[(n + 1, n)] = c(w0);
    let half = n / 2;
    let out = model.output_rows[0];
    for i in 0..nh {
        for j in 0..nh {
            big[(n + 2 + i, n + 2 + j)] = inv.a[(i, j)];
        }
        // x_c = x_N + i x̄_N
        big[(n + 2 + i, out)] = inv.b[i];
        big[(n + 2 + i, half + out)] = inv.b[i] * Complex64::i();
    }
    let phi = (big * c(t)).exp();
    let ps = &inv.p_stable;
    let pu = CMat::identity(nh, nh) - ps;
    let e = (&inv.a * c(t)).exp();
    let e_inv = (&inv.a * c(-t)).exp();
    let m_s = ps * &e * ps;
    let m_u = &pu * &e_inv * &pu;

    let k_len = run.trace.len();
    let mut r = Vec::with_capacity(k_len);
    for k in 0..k_len {
        let mut xi = DVector::zeros(dim);
        for i in 0..n {
            xi[i] = c(states.snapshots[k][i]);
        }
        let ph = w0 * k as f64 * t + input.phase;
        xi[n] = c(input.amplitude * ph.cos());
        xi[n + 1] = c(input.amplitude * ph.sin());
        for j in 0..m {
            xi[n + 2 + nh + j] = c(run.trace.get(k, j) as f64);
        }
        let next = &phi * xi;
        r.push(next.rows(n + 2, nh).into_owned());
    }
    let mut causal = vec![DVector::zeros(nh); k_len + 1];
    for k in 0..k_len {
        causal[k + 1] = &m_s * &causal[k] + ps * &r[k];
    }
    let mut anti = vec![DVector::zeros(nh); k_len + 1];
    for k in (0..k_len).rev() {
        anti[k] = &m_u * (&pu * &r[k] + &anti[k + 1]);
    }
    let stf = inv.response(w0) * sys.gain(w0);
    (0..k_len)
        .map(|k| {
            let filtered = inv.c.dot(&(&causal[k] - &anti[k]).conjugate()).conj();
            let u = Complex64::from_polar(input.amplitude, w0 * k as f64 * t + input.phase);
            stf * u - filtered
        })
        .collect()
}

/// Minimizes `Σ_k (r[k] + wᵀ s_k)²` by the normal equations, with
/// `r = h0 ⋆ s₀` and `s_k` the `l`-window of channel 1 (lag `l/2`).
pub fn least_squares(trace: &ControlTrace, h0: &[f64], l: usize) -> Vec<f64> {
    let lag = l / 2;
    let s0 = trace.channel_f64(0);
    let s1 = trace.channel_f64(1);
    let (k0, k1) = (l - 1 - lag, trace.len() - 1 - lag);
    let mut gram = DMatrix::<f64>::zeros(l, l);
    let mut rhs = DVector::<f64>::zeros(l);
    for k in k0..=k1 {
        // window element j multiplies tap j at s[k + lag - j]
        let x = DVector::from_iterator(l, (0..l).map(|j| s1[k + lag - j]));
        let r: f64 = (0..l).map(|j| h0[j] * s0[k + lag - j]).sum();
        gram += &x * x.transpose();
        rhs -= &x * r;
    }
    gram.lu().solve(&rhs).unwrap().iter().copied().collect()
}

/// Unit-DC-gain Hann low-pass of `l` taps.
pub fn hann_lowpass(l: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..l).map(|j| (PI * (j as f64 + 0.5) / l as f64).sin().powi(2)).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}
