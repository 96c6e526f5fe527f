//! Clock-accurate simulation of a frontend under its digital controls.
//!
//! Sinusoidal inputs are generated by an autonomous 2-state oscillator
//! appended to the analog state, so every clock period is a homogeneous LTI
//! step propagated exactly with precomputed matrix-exponential blocks. With a
//! comparator-to-DAC delay `τ_DC > 0` each period is split in two: the old
//! decision is held on `[kT_s, kT_s + τ_DC)` and the new one afterwards.

mod trace;

pub use trace::{max_state_norm, ControlTrace, StateLayout, StateTrace};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::control::quantize;
use crate::numerics::discretize;
use crate::system::Frontend;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    /// `u = A cos(2πft + φ)`
    LowpassTone,
    /// `u = A cos(2πft + φ)`, `ū = A sin(2πft + φ)`
    QuadratureTone,
    Zero,
    /// No signal; only the reference channels excite the system.
    ReferenceOnly,
}

/// A deterministic test input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub kind: InputKind,
    /// volts
    pub amplitude: f64,
    /// Hz
    pub frequency: f64,
    /// rad
    pub phase: f64,
}

impl InputSpec {
    pub fn lowpass_tone(amplitude: f64, frequency: f64) -> Self {
        InputSpec {
            kind: InputKind::LowpassTone,
            amplitude,
            frequency,
            phase: 0.0,
        }
    }

    pub fn quadrature_tone(amplitude: f64, frequency: f64) -> Self {
        InputSpec {
            kind: InputKind::QuadratureTone,
            ..InputSpec::lowpass_tone(amplitude, frequency)
        }
    }

    pub fn zero() -> Self {
        InputSpec {
            kind: InputKind::Zero,
            amplitude: 0.0,
            frequency: 0.0,
            phase: 0.0,
        }
    }

    pub fn reference_only() -> Self {
        InputSpec {
            kind: InputKind::ReferenceOnly,
            ..InputSpec::zero()
        }
    }

    pub fn with_phase(self, phase: f64) -> Self {
        InputSpec { phase, ..self }
    }

    /// Tone of the right kind for `frontend`.
    pub fn tone_for(frontend: &Frontend, amplitude: f64, frequency: f64) -> Self {
        if frontend.is_quadrature() {
            InputSpec::quadrature_tone(amplitude, frequency)
        } else {
            InputSpec::lowpass_tone(amplitude, frequency)
        }
    }
}

/// Run options. The seed drives the reference generator only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    pub seed: u64,
    /// volts
    pub full_scale: f64,
    /// Divergence threshold as a multiple of `full_scale`.
    pub blowup_factor: f64,
    /// Record a snapshot every `state_stride` periods; 0 disables recording.
    pub state_stride: usize,
    pub initial_state: Option<Vec<f64>>,
    /// When false the DACs are disconnected (decisions are still recorded).
    pub controls_enabled: bool,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            seed: 0,
            full_scale: 1.0,
            blowup_factor: 1e3,
            state_stride: 0,
            initial_state: None,
            controls_enabled: true,
        }
    }
}

impl SimulationOptions {
    pub fn with_seed(seed: u64) -> Self {
        SimulationOptions {
            seed,
            ..SimulationOptions::default()
        }
    }

    pub fn recording(mut self, stride: usize) -> Self {
        self.state_stride = stride;
        self
    }
}

#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub trace: ControlTrace,
    pub states: Option<StateTrace>,
    /// Analog state after the last period.
    pub final_state: Vec<f64>,
}

/// Adds reference channels (see [`Frontend::with_reference`]); the
/// reference bits come from the seeded generator of [`reference_sequence`].
pub fn inject_reference(frontend: &Frontend, amplitude_ratio: f64) -> Result<Frontend> {
    frontend.with_reference(amplitude_ratio)
}

/// The i.i.d. `±1` reference decisions `simulate` uses for `seed`.
pub fn reference_sequence(seed: u64, channels: usize, periods: usize) -> Vec<Vec<i8>> {
    let mut g = ReferenceGenerator::new(seed);
    (0..periods)
        .map(|_| (0..channels).map(|_| g.next()).collect())
        .collect()
}

struct ReferenceGenerator(ChaCha8Rng);

impl ReferenceGenerator {
    fn new(seed: u64) -> Self {
        ReferenceGenerator(ChaCha8Rng::seed_from_u64(seed))
    }

    fn next(&mut self) -> i8 {
        if self.0.random::<bool>() {
            1
        } else {
            -1
        }
    }
}

struct Block {
    phi: Vec<f64>,
    gamma: Vec<f64>,
}

impl Block {
    fn new(a: &DMatrix<f64>, g: &DMatrix<f64>, dt: f64) -> Result<Block> {
        let d = discretize(a, g, dt)?;
        let row_major = |m: &DMatrix<f64>| m.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).collect();
        Ok(Block {
            phi: row_major(&d.phi),
            gamma: row_major(&d.gamma),
        })
    }

    fn step(&self, x: &[f64], s: &[f64], out: &mut [f64]) {
        let n = x.len();
        let m = s.len();
        for (i, o) in out.iter_mut().enumerate() {
            let pr = &self.phi[i * n..(i + 1) * n];
            let gr = &self.gamma[i * m..(i + 1) * m];
            let mut acc = 0.0;
            for j in 0..n {
                acc += pr[j] * x[j];
            }
            for j in 0..m {
                acc += gr[j] * s[j];
            }
            *o = acc;
        }
    }
}

/// Simulates `periods` clock periods from a cold start.
///
/// Returns [`Error::Unstable`] with the first offending period when any analog
/// state exceeds `blowup_factor · full_scale`.
pub fn simulate(frontend: &Frontend, input: &InputSpec, periods: usize, opts: &SimulationOptions) -> Result<SimulationRun> {
    if periods == 0 {
        return Err(Error::InvalidArgument("need at least one period".into()));
    }
    let design = frontend.design();
    let law = frontend.control_law();
    let model = frontend.model();
    let clock = 1.0 / law.t_s;
    if ((clock - design.f_s) / design.f_s).abs() > 1e-12 || ((design.f_s - 2.0 * design.beta) / design.f_s).abs() > 1e-12 {
        return Err(Error::ClockMismatch {
            clock,
            design: 2.0 * design.beta,
        });
    }
    if !(law.tau_dc >= 0.0 && law.tau_dc < law.t_s) {
        return Err(Error::InvalidArgument("tau_dc must lie in [0, T_s)".into()));
    }

    let n = model.n_states();
    let na = n + 2;
    let m = model.n_controls();
    let n_ref = law.reference_channels;

    let omega = 2.0 * PI * input.frequency;
    let mut a = DMatrix::zeros(na, na);
    a.view_mut((0, 0), (n, n)).copy_from(&model.a);
    a[(n, n + 1)] = -omega;
    a[(n + 1, n)] = omega;
    match (input.kind, model.n_inputs()) {
        (InputKind::Zero | InputKind::ReferenceOnly, _) => {}
        (InputKind::LowpassTone, _) => {
            for i in 0..n {
                a[(i, n)] = model.b[(i, 0)];
            }
        }
        (InputKind::QuadratureTone, 2) => {
            for i in 0..n {
                a[(i, n)] = model.b[(i, 0)];
                a[(i, n + 1)] = model.b[(i, 1)];
            }
        }
        (InputKind::QuadratureTone, _) => {
            return Err(Error::DimensionMismatch("quadrature tone needs a two-input model".into()));
        }
    }
    let mut g = DMatrix::zeros(na, m);
    if opts.controls_enabled {
        g.view_mut((0, 0), (n, m)).copy_from(&model.gamma);
    }

    let (first, second) = if law.tau_dc > 0.0 {
        (
            Some(Block::new(&a, &g, law.tau_dc)?),
            Block::new(&a, &g, law.t_s - law.tau_dc)?,
        )
    } else {
        (None, Block::new(&a, &g, law.t_s)?)
    };

    let mut x = vec![0.0; na];
    if let Some(init) = &opts.initial_state {
        if init.len() != n {
            return Err(Error::DimensionMismatch(format!("initial state has {} entries, model {}", init.len(), n)));
        }
        x[..n].copy_from_slice(init);
    }
    if matches!(input.kind, InputKind::LowpassTone | InputKind::QuadratureTone) {
        x[n] = input.amplitude * input.phase.cos();
        x[n + 1] = input.amplitude * input.phase.sin();
    }

    let mut trace = ControlTrace::new(m, law.t_s, model.control_labels.clone(), opts.seed, n_ref)?;
    let layout = if frontend.is_quadrature() {
        StateLayout::Quadrature { order: design.order }
    } else {
        StateLayout::Lowpass { order: design.order }
    };
    let mut states = (opts.state_stride > 0).then(|| StateTrace {
        stride: opts.state_stride,
        t_s: law.t_s,
        layout,
        snapshots: Vec::with_capacity(periods / opts.state_stride + 1),
    });

    let bound = opts.blowup_factor * opts.full_scale;
    let mut refs = ReferenceGenerator::new(opts.seed);
    let mut row = vec![0i8; m];
    let mut s_prev = vec![0.0; m];
    let mut s_new = vec![0.0; m];
    let mut tmp = vec![0.0; na];
    let obs = &law.observation;

    for k in 0..periods {
        if let Some(st) = states.as_mut() {
            if k % st.stride == 0 {
                st.snapshots.push(x[..n].to_vec());
            }
        }
        for r in row.iter_mut().take(n_ref) {
            *r = refs.next();
        }
        for c in 0..obs.nrows() {
            let mut v = 0.0;
            for j in 0..n {
                v += obs[(c, j)] * x[j];
            }
            row[n_ref + c] = quantize(v);
        }
        trace.push(&row)?;
        for (s, &r) in s_new.iter_mut().zip(&row) {
            *s = r as f64;
        }
        if let Some(b) = &first {
            b.step(&x, &s_prev, &mut tmp);
            second.step(&tmp, &s_new, &mut x);
        } else {
            second.step(&x, &s_new, &mut tmp);
            std::mem::swap(&mut x, &mut tmp);
        }
        std::mem::swap(&mut s_prev, &mut s_new);

        let worst = x[..n].iter().fold(0.0f64, |w, v| if v.is_finite() { w.max(v.abs()) } else { f64::INFINITY });
        if worst > bound {
            return Err(Error::Unstable { period: k, max_abs: worst });
        }
    }

    Ok(SimulationRun {
        trace,
        states,
        final_state: x[..n].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{expm, rotation};
    use crate::system::LeapfrogDesign;

    fn oscillator(omega_ratio: f64, phi_kappa: f64) -> (Frontend, f64) {
        let d = LeapfrogDesign::new(1, 4, 1.0).unwrap();
        let w = 2.0 * PI * omega_ratio * d.f_s;
        (Frontend::quadrature(&d, w, phi_kappa, 0.0).unwrap(), w)
    }

    #[test]
    fn single_step_matches_direct_exponential() {
        let d = LeapfrogDesign::new(3, 8, 1.0).unwrap();
        let f = Frontend::lowpass(&d).unwrap();
        let opts = SimulationOptions {
            initial_state: Some(vec![1.0, 0.0, 0.0]),
            ..Default::default()
        };
        let run = simulate(&f, &InputSpec::zero(), 1, &opts).unwrap();
        // decisions at t=0: sign(x) = (+1, +1, +1)
        let m = f.model();
        let e = expm(&(&m.a * d.t_s)).unwrap();
        let mut want = e.column(0).into_owned();
        // ∫ e^{Aτ} dτ by fine trapezoid on the exponential, applied to Γ·1
        let steps = 4000;
        let mut integral = DMatrix::zeros(3, 3);
        for i in 0..=steps {
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            integral += expm(&(&m.a * (d.t_s * i as f64 / steps as f64))).unwrap() * w;
        }
        integral *= d.t_s / steps as f64;
        want += integral * (&m.gamma * nalgebra::DVector::from_element(3, 1.0));
        for i in 0..3 {
            assert!((run.final_state[i] - want[i]).abs() < 1e-6 * want.norm(), "{i}");
        }
    }

    #[test]
    fn ballistic_input_response() {
        let (f, w) = oscillator(0.3, 0.0);
        let beta = f.design().beta;
        let t_s = f.design().t_s;
        let phase = 0.7;
        let opts = SimulationOptions {
            controls_enabled: false,
            ..Default::default()
        };
        let run = simulate(&f, &InputSpec::quadrature_tone(1.0, w / (2.0 * PI)).with_phase(phase), 1, &opts).unwrap();
        let want = rotation(w * t_s).scale(beta * t_s).apply([phase.cos(), phase.sin()]);
        assert!((run.final_state[0] - want[0]).abs() < 1e-12);
        assert!((run.final_state[1] - want[1]).abs() < 1e-12);
    }

    #[test]
    fn control_response() {
        let (f, w) = oscillator(0.2, 0.9);
        let p = *f.params().unwrap();
        let run = simulate(&f, &InputSpec::zero(), 1, &SimulationOptions::default()).unwrap();
        // s[0] = (+1, +1) from the tie rule at the zero state
        let half = w * p.t_s / 2.0;
        let want = rotation(half + p.phi_kappa)
            .scale(2.0 * p.control_gain() / w * half.sin())
            .apply([1.0, 1.0]);
        assert!((run.final_state[0] - want[0]).abs() < 1e-12);
        assert!((run.final_state[1] - want[1]).abs() < 1e-12);
    }

    #[test]
    fn deterministic_and_bounded() {
        let d = LeapfrogDesign::new(4, 8, 2.0 * PI).unwrap();
        let f = Frontend::quadrature(&d, 2.0 * PI * d.f_s / 8.0, 0.0, 0.0)
            .unwrap()
            .with_reference(0.1)
            .unwrap();
        let input = InputSpec::quadrature_tone(0.9, d.f_s / 8.0 - d.f_b() / 4.0);
        let opts = SimulationOptions::with_seed(3).recording(1);
        let a = simulate(&f, &input, 4096, &opts).unwrap();
        let b = simulate(&f, &input, 4096, &opts).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.trace.n_channels(), 10);
        assert_eq!(a.trace.channel(0), reference_sequence(3, 2, 4096).iter().map(|r| r[0]).collect::<Vec<_>>());
        let sup = max_state_norm(a.states.as_ref().unwrap()).unwrap();
        assert!(sup.iter().all(|&v| v < 10.0), "{sup:?}");
    }

    #[test]
    fn zero_input_limit_cycle() {
        let d = LeapfrogDesign::new(1, 4, 1.0).unwrap();
        let f = Frontend::lowpass(&d).unwrap();
        let run = simulate(&f, &InputSpec::zero(), 64, &SimulationOptions::default()).unwrap();
        let s = run.trace.channel(0);
        for k in 2..64 {
            assert_eq!(s[k], s[k - 2]);
            assert_ne!(s[k], s[k - 1]);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let d = LeapfrogDesign::new(1, 4, 1.0).unwrap();
        let f = Frontend::lowpass(&d).unwrap();
        let opts = SimulationOptions {
            controls_enabled: false,
            ..Default::default()
        };
        // x grows by βT_s = 1/2 per period
        match simulate(&f, &InputSpec::lowpass_tone(1.0, 0.0), 100_000, &opts) {
            Err(Error::Unstable { period, .. }) => assert_eq!(period, 2000),
            other => panic!("expected divergence, got {:?}", other.map(|r| r.final_state)),
        }
    }

    #[test]
    fn delay_splits_period() {
        let d = LeapfrogDesign::new(2, 8, 1.0).unwrap();
        let w = 2.0 * PI * d.f_s / 8.0;
        let f = Frontend::quadrature(&d, w, 0.0, 0.1 * d.t_s).unwrap();
        let run = simulate(&f, &InputSpec::quadrature_tone(0.5, d.f_s / 8.0), 2048, &SimulationOptions::default().recording(1)).unwrap();
        let sup = max_state_norm(run.states.as_ref().unwrap()).unwrap();
        assert!(sup.iter().all(|&v| v < 10.0), "{sup:?}");
    }
}
