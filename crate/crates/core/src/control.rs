//! Narrow-band AM canceller: I/Q demodulation of the beam-1 photocurrent at
//! f_m, an integrator on each quadrature, and the closed-loop runner.
//!
//! The loop runs in the envelope domain: one harmonic evaluation per control
//! step. The actuator enters the comb through the drive envelope, which makes
//! the plant anti-linear in `m = m_i + i m_q` (`c_1 ~ c_1(0) + P conj(m)`).
//! Calibration therefore measures the plant gain, the demodulation phase and
//! the handedness of the Q channel before the loop is closed.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::beamline::{
    aom_modulate, apply_lens_telescope, fiber_project, rotate_halfwave, split, AomSpec, BeamState, DriveEnvelope,
    FiberSpec, ModulationSpec, RfChainResponse, SplitGeometry, SplitterSpec,
};
use crate::detection::{photocurrent_harmonics, DetectorSpec, HarmonicSet};
use crate::error::{ensure_finite, Error, Result};
use crate::scenario::{ReferencePhase, Scenario, TelescopeSpec, Topology};

/// Probe step used to calibrate the plant.
pub const CALIBRATION_PROBE: f64 = 1e-3;
/// Initial |c_1| at or below this fraction of c_0 counts as no disturbance.
pub const ZERO_AM_THRESHOLD: f64 = 1e-12;
/// Per-step change of beam-1 |c_1|, relative to its initial value, below which the loop counts as converged.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-3;
/// Residual fraction of the initial |c_1| that defines the settle time.
pub const SETTLE_FRACTION: f64 = 1e-3;

/// `e_i + i e_q = c_1 exp(-i reference_phase)`.
pub fn demodulate_iq(c1: Complex64, reference_phase: f64) -> (f64, f64) {
    let e = c1 * Complex64::from_polar(1.0, -reference_phase);
    (e.re, e.im)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    pub m_i: f64,
    pub m_q: f64,
    pub gain: f64,
    pub dt: f64,
    pub reference_phase: f64,
    /// Set once the actuator has hit |m| = 1.
    pub clamped: bool,
}

impl ControllerState {
    pub fn new(gain: f64, dt: f64, reference_phase: f64) -> Result<Self> {
        let state = Self {
            m_i: 0.0,
            m_q: 0.0,
            gain,
            dt,
            reference_phase,
            clamped: false,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite(self.reference_phase, "reference_phase")?;
        let gdt = self.gain * self.dt;
        if !(self.gain > 0.0 && self.dt > 0.0 && gdt < 2.0) {
            return Err(Error::InvalidParameter {
                name: "gain",
                reason: format!("need gain > 0, dt > 0 and gain*dt < 2, got gain = {}, dt = {}", self.gain, self.dt),
            });
        }
        Ok(())
    }

    pub fn drive(&self) -> DriveEnvelope {
        DriveEnvelope::new(self.m_i, self.m_q)
    }
}

/// One integrator update `m <- m - gain dt e`, clamped to |m| <= 1.
pub fn controller_step(state: &ControllerState, error: (f64, f64)) -> Result<ControllerState> {
    state.validate()?;
    ensure_finite(error.0, "e_i")?;
    ensure_finite(error.1, "e_q")?;
    let k = state.gain * state.dt;
    let mut next = ControllerState {
        m_i: state.m_i - k * error.0,
        m_q: state.m_q - k * error.1,
        ..*state
    };
    let depth = next.m_i.hypot(next.m_q);
    if depth > 1.0 {
        next.m_i /= depth;
        next.m_q /= depth;
        next.clamped = true;
    }
    Ok(next)
}

/// The two photodiode signals of a scenario as functions of the drive.
#[derive(Debug, Clone)]
pub struct Plant {
    carrier: BeamState,
    modulation: ModulationSpec,
    aom: AomSpec,
    rf: RfChainResponse,
    topology: Topology,
    telescope: TelescopeSpec,
    fiber: Option<FiberSpec>,
    fiber_input: SplitGeometry,
    splitter: SplitterSpec,
    plate_angle: f64,
    pd1: DetectorSpec,
    pd2: DetectorSpec,
    k_max: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantOutput {
    pub pd1: HarmonicSet,
    pub pd2: HarmonicSet,
}

/// First-order model of PD1's `c_1` around zero drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPlant {
    pub c1_at_zero: Complex64,
    /// d c_1 / d m_i.
    pub d_mi: Complex64,
    /// d c_1 / d m_q.
    pub d_mq: Complex64,
}

impl LinearPlant {
    /// Real 2x2 map from (m_i, m_q) to (Re c_1, Im c_1).
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[self.d_mi.re, self.d_mq.re], [self.d_mi.im, self.d_mq.im]]
    }

    pub fn determinant(&self) -> f64 {
        let m = self.matrix();
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    /// Determinant relative to the product of the column norms; 0 means singular, 1 orthogonal.
    pub fn conditioning(&self) -> f64 {
        let scale = self.d_mi.norm() * self.d_mq.norm();
        if scale == 0.0 {
            0.0
        } else {
            self.determinant().abs() / scale
        }
    }
}

impl Plant {
    pub fn from_scenario(scenario: &Scenario) -> Result<Self> {
        if scenario.topology == Topology::Fig3 && scenario.fiber.is_none() {
            return Err(Error::InvalidParameter {
                name: "fiber",
                reason: "fig3 topology requires a fiber".into(),
            });
        }
        Ok(Self {
            carrier: scenario.carrier()?,
            modulation: scenario.modulation,
            aom: scenario.aom,
            rf: scenario.rf_response()?,
            topology: scenario.topology,
            telescope: scenario.telescope,
            fiber: scenario.fiber,
            fiber_input: scenario.fiber_input,
            splitter: scenario.splitter,
            plate_angle: scenario.plate_angle,
            pd1: scenario.pd1,
            pd2: scenario.pd2,
            k_max: scenario.controller.k_max,
        })
    }

    pub fn with_pd2(mut self, pd2: DetectorSpec) -> Self {
        self.pd2 = pd2;
        self
    }

    /// Beams arriving at PD1 and PD2.
    pub fn beams(&self, drive: DriveEnvelope) -> Result<(BeamState, BeamState)> {
        let t = &self.telescope;
        match self.topology {
            Topology::Fig1 => {
                let out = aom_modulate(&self.carrier, &self.modulation, &self.aom, &self.rf, drive, SplitGeometry::Lateral)?;
                let out = apply_lens_telescope(&out, t.output_w0, t.shift_scale)?;
                let out = rotate_halfwave(&out, self.plate_angle);
                split(&out, &self.splitter)
            }
            Topology::Fig3 => {
                let fiber = self.fiber.as_ref().expect("checked at construction");
                let out = aom_modulate(&self.carrier, &self.modulation, &self.aom, &self.rf, drive, self.fiber_input)?;
                let out = fiber_project(&out, fiber)?;
                let out = rotate_halfwave(&out, self.plate_angle);
                let (beam1, beam2) = split(&out, &self.splitter)?;
                Ok((beam1, apply_lens_telescope(&beam2, t.output_w0, t.shift_scale)?))
            }
        }
    }

    pub fn evaluate(&self, drive: DriveEnvelope) -> Result<PlantOutput> {
        let (beam1, beam2) = self.beams(drive)?;
        Ok(PlantOutput {
            pd1: photocurrent_harmonics(&beam1, &self.pd1, self.k_max)?,
            pd2: photocurrent_harmonics(&beam2, &self.pd2, self.k_max)?,
        })
    }

    /// Central-difference fit of PD1's `c_1` in (m_i, m_q) with step `delta`.
    pub fn fit_linear(&self, delta: f64) -> Result<LinearPlant> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: format!("probe step must lie in (0, 0.5), got {delta}"),
            });
        }
        let c1 = |m_i: f64, m_q: f64| -> Result<Complex64> { Ok(self.evaluate(DriveEnvelope::new(m_i, m_q))?.pd1.get(1)) };
        let d_mi = (c1(delta, 0.0)? - c1(-delta, 0.0)?) / (2.0 * delta);
        let d_mq = (c1(0.0, delta)? - c1(0.0, -delta)?) / (2.0 * delta);
        Ok(LinearPlant {
            c1_at_zero: c1(0.0, 0.0)?,
            d_mi,
            d_mq,
        })
    }
}

/// How raw I/Q errors are scaled before they reach the integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub reference_phase: f64,
    /// |d c_1 / d m_i|; dividing by it gives the loop unit gain.
    pub plant_gain: f64,
    /// +1 or -1: orientation of the Q response relative to the I response.
    pub q_sign: f64,
}

impl Calibration {
    /// Probes the plant. A fixed reference phase replaces the measured one.
    pub fn measure(plant: &Plant, reference: ReferencePhase) -> Result<Self> {
        let lin = plant.fit_linear(CALIBRATION_PROBE)?;
        let plant_gain = lin.d_mi.norm();
        if !(plant_gain > 0.0) || !plant_gain.is_finite() {
            return Err(Error::InvalidParameter {
                name: "plant",
                reason: "PD1 does not respond to the actuator".into(),
            });
        }
        let reference_phase = match reference {
            ReferencePhase::Auto => lin.d_mi.arg(),
            ReferencePhase::Fixed(p) => p,
        };
        let q_response = lin.d_mq * Complex64::from_polar(1.0, -reference_phase);
        let q_sign = if q_response.im < 0.0 { -1.0 } else { 1.0 };
        Ok(Self {
            reference_phase,
            plant_gain,
            q_sign,
        })
    }

    /// Demodulated error for the integrators, in units of drive depth.
    pub fn error(&self, c1: Complex64) -> (f64, f64) {
        let (e_i, e_q) = demodulate_iq(c1, self.reference_phase);
        (e_i / self.plant_gain, self.q_sign * e_q / self.plant_gain)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub time_s: f64,
    pub m_i: f64,
    pub m_q: f64,
    pub beam1_c1: f64,
    pub beam2_c1: f64,
    pub beam2_relative_am: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RejectionReport {
    /// `20 log10(initial |c_1| / final |c_1|)`; `None` when there was no disturbance.
    pub beam1_rejection_db: Option<f64>,
    pub beam2_rejection_db: Option<f64>,
    pub converged: bool,
    /// First time after which beam-1 |c_1| stays below [`SETTLE_FRACTION`] of its initial value.
    pub settle_time_s: Option<f64>,
    /// Final `2 |c_1| / c_0` on beam 2.
    pub residual_relative_am: f64,
    pub initial_relative_am: f64,
    pub initial_am_zero: bool,
    pub clamped: bool,
    pub steps: usize,
    pub reference_phase: f64,
    pub q_sign: f64,
    pub final_m_i: f64,
    pub final_m_q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopRun {
    pub report: RejectionReport,
    /// Step 0 is the uncorrected state; one row per control step after that.
    pub trajectory: Vec<TrajectoryPoint>,
    pub final_state: ControllerState,
    pub calibration: Option<Calibration>,
}

fn rejection_db(initial: f64, last: f64, c0: f64) -> Option<f64> {
    if initial <= ZERO_AM_THRESHOLD * c0 {
        None
    } else {
        Some(20.0 * (initial / last.max(f64::MIN_POSITIVE * initial.max(1.0))).log10())
    }
}

/// Closes the loop on PD1 for `steps` control steps and reports both beams.
pub fn run_closed_loop(scenario: &Scenario, steps: usize) -> Result<ClosedLoopRun> {
    let plant = Plant::from_scenario(scenario)?;
    run_plant(&plant, scenario, steps)
}

/// [`run_closed_loop`] on an already built plant (for geometry sweeps).
pub fn run_plant(plant: &Plant, scenario: &Scenario, steps: usize) -> Result<ClosedLoopRun> {
    let cfg = &scenario.controller;
    if steps == 0 {
        return Err(Error::InvalidParameter {
            name: "steps",
            reason: "must be >= 1".into(),
        });
    }
    let initial = plant.evaluate(DriveEnvelope::UNIT)?;
    let c0_1 = initial.pd1.dc();
    let c1_initial = initial.pd1.get(1).norm();
    let initial_am_zero = c1_initial <= ZERO_AM_THRESHOLD * c0_1;

    let calibration = if initial_am_zero {
        None
    } else {
        Some(Calibration::measure(plant, cfg.reference_phase)?)
    };
    let reference_phase = calibration.map_or(
        match cfg.reference_phase {
            ReferencePhase::Fixed(p) => p,
            ReferencePhase::Auto => 0.0,
        },
        |c| c.reference_phase,
    );
    let mut state = ControllerState::new(cfg.gain, cfg.dt, reference_phase)?;

    let seed = scenario.noise.map_or(0, |n| n.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise_rms = cfg.error_noise * c1_initial;

    let point = |step: usize, state: &ControllerState, out: &PlantOutput| TrajectoryPoint {
        step,
        time_s: step as f64 * cfg.dt,
        m_i: state.m_i,
        m_q: state.m_q,
        beam1_c1: out.pd1.get(1).norm(),
        beam2_c1: out.pd2.get(1).norm(),
        beam2_relative_am: out.pd2.relative_am(),
    };
    let mut trajectory = Vec::with_capacity(steps + 1);
    trajectory.push(point(0, &state, &initial));
    let mut current = initial.clone();
    for step in 1..=steps {
        if let Some(cal) = &calibration {
            let mut c1 = current.pd1.get(1);
            if noise_rms > 0.0 {
                let (x, y): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
                c1 += Complex64::new(x, y) * noise_rms;
            }
            state = controller_step(&state, cal.error(c1))?;
            current = plant.evaluate(state.drive())?;
        }
        trajectory.push(point(step, &state, &current));
    }

    let last = trajectory.last().expect("non-empty");
    let window = (steps / 10).max(1);
    let tolerance = CONVERGENCE_TOLERANCE * c1_initial.max(ZERO_AM_THRESHOLD * c0_1);
    let converged = trajectory[steps - window..]
        .windows(2)
        .all(|w| (w[1].beam1_c1 - w[0].beam1_c1).abs() < tolerance);
    let settle_time_s = if initial_am_zero {
        None
    } else {
        let limit = SETTLE_FRACTION * c1_initial;
        let tail_start = trajectory
            .iter()
            .rposition(|p| p.beam1_c1 > limit)
            .map_or(0, |i| i + 1);
        (tail_start <= steps).then_some(tail_start as f64 * cfg.dt)
    };

    let report = RejectionReport {
        beam1_rejection_db: rejection_db(c1_initial, last.beam1_c1, c0_1),
        beam2_rejection_db: rejection_db(trajectory[0].beam2_c1, last.beam2_c1, initial.pd2.dc()),
        converged,
        settle_time_s,
        residual_relative_am: last.beam2_relative_am,
        initial_relative_am: trajectory[0].beam2_relative_am,
        initial_am_zero,
        clamped: state.clamped,
        steps,
        reference_phase,
        q_sign: calibration.map_or(1.0, |c| c.q_sign),
        final_m_i: state.m_i,
        final_m_q: state.m_q,
    };
    Ok(ClosedLoopRun {
        report,
        trajectory,
        final_state: state,
        calibration,
    })
}
