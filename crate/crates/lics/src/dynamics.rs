//! State and parameter types, the right-hand side of the dimensionless
//! amplitude equations, and an adaptive embedded Runge-Kutta integrator.
//!
//! The propagated system is
//!
//! ```text
//! da_m/dT = -i g_mn a_n - [eta_m + i (delta_mn - delta_nf)] a_m
//! da_n/dT = -i g_mn a_m - g_nf (1 + i q_nf) a_f
//!           - [eta_n + g_nn + i (delta_nf + q_nn g_nn)] a_n
//! da_f/dT = -g_nf (1 + i q_nf) a_n - [eta_f + g_ff + i q_ff g_ff] a_f
//! dW/dT   = 2 [g_nn |a_n|^2 + g_ff |a_f|^2 + 2 Re(g_nf a_n a_f*)]
//! ```
//!
//! so that at zero relaxation `dW/dT` is exactly the population-loss rate
//! and `|a_m|^2 + |a_n|^2 + |a_f|^2 + W` is conserved. `W` is carried as a
//! state component so the step controller bounds its error too.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::pulses::{InstantCouplings, PulseSchedule};
use crate::{Error, Result};

/// The three complex probability amplitudes plus the accumulated
/// energy-integrated continuum population at a time point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeState {
    pub a_m: Complex64,
    pub a_n: Complex64,
    pub a_f: Complex64,
    /// Accumulated dissociation yield, non-decreasing along a trajectory.
    pub w: f64,
    /// Dimensionless time of this sample.
    pub t: f64,
}

impl AmplitudeState {
    pub fn new(a_m: Complex64, a_n: Complex64, a_f: Complex64) -> Self {
        AmplitudeState {
            a_m,
            a_n,
            a_f,
            w: 0.0,
            t: 0.0,
        }
    }

    /// All population on the ground level `m`.
    pub fn basis_m() -> Self {
        Self::new(
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        )
    }

    /// All population on the intermediate level `n`.
    pub fn basis_n() -> Self {
        Self::new(
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        )
    }

    /// All population on the upper level `f`.
    pub fn basis_f() -> Self {
        Self::new(
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        )
    }

    pub fn pop_m(&self) -> f64 {
        self.a_m.norm_sqr()
    }

    pub fn pop_n(&self) -> f64 {
        self.a_n.norm_sqr()
    }

    pub fn pop_f(&self) -> f64 {
        self.a_f.norm_sqr()
    }

    /// Total bound-state population.
    pub fn bound_population(&self) -> f64 {
        self.pop_m() + self.pop_n() + self.pop_f()
    }

    /// Bound population plus accumulated yield; conserved at zero
    /// relaxation.
    pub fn sum_total(&self) -> f64 {
        self.bound_population() + self.w
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        for (v, name) in [(self.a_m, "a_m"), (self.a_n, "a_n"), (self.a_f, "a_f")] {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::NonFinite { quantity: name });
            }
        }
        if !self.w.is_finite() {
            return Err(Error::NonFinite { quantity: "W" });
        }
        Ok(())
    }
}

/// Dimensionless decay rates, detunings, and effective Fano parameters.
///
/// The cross pair is symmetric (`g_fn = g_nf`, `q_fn = q_nf`): a single
/// non-degenerate continuum with real bound-free couplings makes the two
/// cross rates equal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub eta_m: f64,
    pub eta_n: f64,
    pub eta_f: f64,
    /// One-photon detuning of the first field from the `m`-`n` transition.
    pub delta_mn: f64,
    /// Two-photon detuning between `n` and `f` through the continuum.
    pub delta_nf: f64,
    pub q_nn: f64,
    pub q_ff: f64,
    pub q_nf: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            eta_m: 0.0,
            eta_n: 0.0,
            eta_f: 0.0,
            delta_mn: 0.0,
            delta_nf: 0.0,
            q_nn: 0.0,
            q_ff: 0.0,
            q_nf: 0.0,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        for (v, name) in [
            (self.eta_m, "eta_m"),
            (self.eta_n, "eta_n"),
            (self.eta_f, "eta_f"),
            (self.delta_mn, "delta_mn"),
            (self.delta_nf, "delta_nf"),
            (self.q_nn, "q_nn"),
            (self.q_ff, "q_ff"),
            (self.q_nf, "q_nf"),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite { quantity: name });
            }
        }
        for (v, name) in [
            (self.eta_m, "eta_m"),
            (self.eta_n, "eta_n"),
            (self.eta_f, "eta_f"),
        ] {
            if v < 0.0 {
                return Err(Error::InvalidParams(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Laboratory-frame rates and frequencies before scaling by the pulse
/// half-duration `tau`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionalParams {
    /// Decay rates of the three levels, 1/s.
    pub gamma_m: f64,
    pub gamma_n: f64,
    pub gamma_f: f64,
    /// Intensity 1/e half-duration of the first pulse, s.
    pub tau: f64,
    /// Detunings, rad/s.
    pub omega_mn: f64,
    pub omega_nf: f64,
    /// Peak light-induced widths, 1/s.
    pub gamma_nn_peak: f64,
    pub gamma_ff_peak: f64,
    pub gamma_nf_peak: f64,
    /// Peak one-photon Rabi frequency, rad/s.
    pub rabi_mn_peak: f64,
    /// Peak light-induced shifts, 1/s; the Fano parameters are the
    /// shift-to-width ratios.
    pub shift_nn_peak: f64,
    pub shift_ff_peak: f64,
    pub shift_nf_peak: f64,
}

/// Dimensionless peak couplings produced by [`scale_to_dimensionless`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakCouplings {
    pub g_mn0: f64,
    pub g_nn0: f64,
    pub g_ff0: f64,
    pub g_nf0: f64,
}

/// Scale laboratory-frame parameters to the dimensionless system:
/// `eta_i = gamma_i * tau`, `g_xy = gamma_xy * tau` (or `G_mn * tau`),
/// `Delta = Omega * tau`, `q_ij = shift_ij / gamma_ij` (0/0 -> 0).
pub fn scale_to_dimensionless(dim: &DimensionalParams) -> Result<(SystemParams, PeakCouplings)> {
    if !(dim.tau.is_finite() && dim.tau > 0.0) {
        return Err(Error::InvalidParams(format!(
            "tau must be positive and finite, got {}",
            dim.tau
        )));
    }
    for (v, name) in [
        (dim.gamma_m, "gamma_m"),
        (dim.gamma_n, "gamma_n"),
        (dim.gamma_f, "gamma_f"),
        (dim.omega_mn, "omega_mn"),
        (dim.omega_nf, "omega_nf"),
        (dim.gamma_nn_peak, "gamma_nn_peak"),
        (dim.gamma_ff_peak, "gamma_ff_peak"),
        (dim.gamma_nf_peak, "gamma_nf_peak"),
        (dim.rabi_mn_peak, "rabi_mn_peak"),
        (dim.shift_nn_peak, "shift_nn_peak"),
        (dim.shift_ff_peak, "shift_ff_peak"),
        (dim.shift_nf_peak, "shift_nf_peak"),
    ] {
        if !v.is_finite() {
            return Err(Error::NonFinite { quantity: name });
        }
    }
    let fano = |shift: f64, width: f64, name: &str| -> Result<f64> {
        if shift == 0.0 && width == 0.0 {
            Ok(0.0)
        } else if width == 0.0 {
            Err(Error::InvalidParams(format!(
                "{name}: nonzero shift with zero width gives an infinite Fano parameter"
            )))
        } else {
            Ok(shift / width)
        }
    };
    let params = SystemParams {
        eta_m: dim.gamma_m * dim.tau,
        eta_n: dim.gamma_n * dim.tau,
        eta_f: dim.gamma_f * dim.tau,
        delta_mn: dim.omega_mn * dim.tau,
        delta_nf: dim.omega_nf * dim.tau,
        q_nn: fano(dim.shift_nn_peak, dim.gamma_nn_peak, "q_nn")?,
        q_ff: fano(dim.shift_ff_peak, dim.gamma_ff_peak, "q_ff")?,
        q_nf: fano(dim.shift_nf_peak, dim.gamma_nf_peak, "q_nf")?,
    };
    params.validate()?;
    let peaks = PeakCouplings {
        g_mn0: dim.rabi_mn_peak * dim.tau,
        g_nn0: dim.gamma_nn_peak * dim.tau,
        g_ff0: dim.gamma_ff_peak * dim.tau,
        g_nf0: dim.gamma_nf_peak * dim.tau,
    };
    Ok((params, peaks))
}

/// Time derivatives of the augmented state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Derivatives {
    pub da_m: Complex64,
    pub da_n: Complex64,
    pub da_f: Complex64,
    pub dw: f64,
}

/// Right-hand side of the dimensionless amplitude equations.
pub fn rhs(
    state: &AmplitudeState,
    couplings: &InstantCouplings,
    params: &SystemParams,
) -> Result<Derivatives> {
    state.check_finite()?;
    couplings.check_finite()?;
    params.validate()?;
    let y = Y {
        a_m: state.a_m,
        a_n: state.a_n,
        a_f: state.a_f,
        w: state.w,
    };
    let d = rhs_raw(&y, couplings, params);
    Ok(Derivatives {
        da_m: d.a_m,
        da_n: d.a_n,
        da_f: d.a_f,
        dw: d.w,
    })
}

/// Augmented state vector used inside the integrator; `w` holds dW/dT in
/// derivative context.
#[derive(Clone, Copy, Debug)]
struct Y {
    a_m: Complex64,
    a_n: Complex64,
    a_f: Complex64,
    w: f64,
}

impl Y {
    const ZERO: Y = Y {
        a_m: Complex64::new(0.0, 0.0),
        a_n: Complex64::new(0.0, 0.0),
        a_f: Complex64::new(0.0, 0.0),
        w: 0.0,
    };

    #[inline]
    fn axpy(&self, c: f64, other: &Y) -> Y {
        Y {
            a_m: self.a_m + c * other.a_m,
            a_n: self.a_n + c * other.a_n,
            a_f: self.a_f + c * other.a_f,
            w: self.w + c * other.w,
        }
    }

    #[inline]
    fn components(&self) -> [f64; 7] {
        [
            self.a_m.re,
            self.a_m.im,
            self.a_n.re,
            self.a_n.im,
            self.a_f.re,
            self.a_f.im,
            self.w,
        ]
    }
}

/// Coefficient matrix `A` of the linear amplitude system `da/dT = A a`
/// (ordering `m`, `n`, `f`), shared with the constant-coefficient oracle.
pub(crate) fn coefficient_matrix(c: &InstantCouplings, p: &SystemParams) -> [[Complex64; 3]; 3] {
    let zero = Complex64::new(0.0, 0.0);
    let rabi = Complex64::new(0.0, -c.g_mn);
    let cross = -Complex64::new(c.g_nf, c.g_nf * p.q_nf);
    [
        [
            -Complex64::new(p.eta_m, p.delta_mn - p.delta_nf),
            rabi,
            zero,
        ],
        [
            rabi,
            -Complex64::new(p.eta_n + c.g_nn, p.delta_nf + p.q_nn * c.g_nn),
            cross,
        ],
        [
            zero,
            cross,
            -Complex64::new(p.eta_f + c.g_ff, p.q_ff * c.g_ff),
        ],
    ]
}

#[inline]
fn rhs_raw(y: &Y, c: &InstantCouplings, p: &SystemParams) -> Y {
    let cross = Complex64::new(c.g_nf, c.g_nf * p.q_nf);
    let da_m = -Complex64::new(0.0, c.g_mn) * y.a_n
        - Complex64::new(p.eta_m, p.delta_mn - p.delta_nf) * y.a_m;
    let da_n = -Complex64::new(0.0, c.g_mn) * y.a_m
        - cross * y.a_f
        - Complex64::new(p.eta_n + c.g_nn, p.delta_nf + p.q_nn * c.g_nn) * y.a_n;
    let da_f = -cross * y.a_n - Complex64::new(p.eta_f + c.g_ff, p.q_ff * c.g_ff) * y.a_f;
    let dw = 2.0
        * (c.g_nn * y.a_n.norm_sqr()
            + c.g_ff * y.a_f.norm_sqr()
            + 2.0 * c.g_nf * (y.a_n * y.a_f.conj()).re);
    Y {
        a_m: da_m,
        a_n: da_n,
        a_f: da_f,
        w: dw,
    }
}

/// Tolerances and window of one integration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the step size, in `T` units.
    pub max_step: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: 0.01,
            t_start: -8.0,
            t_end: 8.0,
        }
    }
}

impl IntegratorConfig {
    pub fn for_window(t_start: f64, t_end: f64) -> Self {
        IntegratorConfig {
            t_start,
            t_end,
            ..IntegratorConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (v, name) in [
            (self.rel_tol, "rel_tol"),
            (self.abs_tol, "abs_tol"),
            (self.max_step, "max_step"),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !self.t_start.is_finite() || !self.t_end.is_finite() || self.t_start >= self.t_end {
            return Err(Error::InvalidConfig(format!(
                "window must satisfy t_start < t_end, got [{}, {}]",
                self.t_start, self.t_end
            )));
        }
        Ok(())
    }

    /// Numerical conservation slack for these tolerances: 1e-6 at default
    /// tolerances, scaled up proportionally when they are loosened.
    pub fn conservation_slack(&self) -> f64 {
        1e-6 * (self.rel_tol / 1e-8).max(1.0)
    }

    /// Pulse peaks whose 4-duration margin is not covered by the window.
    /// Non-empty output means the window truncates pulse tails.
    pub fn margin_violations(&self, schedule: &PulseSchedule) -> Vec<String> {
        let mut out = Vec::new();
        for (peak, dur) in schedule.enabled_peaks() {
            if peak - 4.0 * dur < self.t_start || peak + 4.0 * dur > self.t_end {
                out.push(format!(
                    "pulse peak at T = {peak} (duration {dur}) is not covered by \
                     4 durations on each side within [{}, {}]",
                    self.t_start, self.t_end
                ));
            }
        }
        out
    }
}

/// How the integrated trajectory is sampled for output. The final state is
/// always included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Sampling {
    /// Only the state at `t_end`.
    FinalOnly,
    /// `n >= 2` uniformly spaced samples spanning the whole window.
    Uniform(usize),
    /// Explicit strictly increasing sample times within the window.
    Grid(Vec<f64>),
}

/// Ordered sequence of states produced by [`integrate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory(pub Vec<AmplitudeState>);

impl Trajectory {
    pub fn final_state(&self) -> &AmplitudeState {
        self.0.last().expect("trajectory is never empty")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, AmplitudeState> {
        self.0.iter()
    }
}

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
// Error weights b - b_hat.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense-output weights for the 4th-order continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const STEP_UNDERFLOW: f64 = 1e-12;
const MAX_STEPS: usize = 50_000_000;

/// Dense-output coefficients of one accepted step.
struct DenseSegment {
    t0: f64,
    h: f64,
    r1: Y,
    r2: Y,
    r3: Y,
    r4: Y,
    r5: Y,
}

impl DenseSegment {
    fn eval(&self, t: f64) -> Y {
        let theta = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let theta1 = 1.0 - theta;
        // r1 + theta*(r2 + theta1*(r3 + theta*(r4 + theta1*r5)))
        let inner = self.r4.axpy(theta1, &self.r5);
        let mid = self.r3.axpy(theta, &inner);
        let outer = self.r2.axpy(theta1, &mid);
        self.r1.axpy(theta, &outer)
    }
}

/// Adaptive propagation of one schedule over the configured window.
///
/// The initial amplitudes are taken from `init` (its `t`/`w` fields are
/// reset to the window start and 0 accumulated from `init.w`); sampling
/// points are produced by the 4th-order continuous extension, and the
/// integrator always lands exactly on `t_end`.
pub fn integrate(
    schedule: &PulseSchedule,
    params: &SystemParams,
    init: &AmplitudeState,
    cfg: &IntegratorConfig,
    sampling: &Sampling,
) -> Result<Trajectory> {
    schedule.validate()?;
    params.validate()?;
    cfg.validate()?;
    init.check_finite()?;
    let norm = init.bound_population();
    if norm > 1.0 + 1e-6 {
        return Err(Error::InvalidParams(format!(
            "initial state must be normalized or sub-normalized, |a|^2 = {norm}"
        )));
    }
    for msg in cfg.margin_violations(schedule) {
        log::warn!("{msg}");
    }

    // Requested output times strictly inside the window; start/end handled
    // separately so they are exact states rather than interpolants.
    let span = cfg.t_end - cfg.t_start;
    let mut sample_times: Vec<f64> = match sampling {
        Sampling::FinalOnly => Vec::new(),
        Sampling::Uniform(n) => {
            if *n < 2 {
                return Err(Error::InvalidConfig(format!(
                    "uniform sampling needs at least 2 points, got {n}"
                )));
            }
            (1..n - 1)
                .map(|k| cfg.t_start + span * k as f64 / (*n as f64 - 1.0))
                .collect()
        }
        Sampling::Grid(times) => {
            if times.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidConfig(
                    "sample grid must be strictly increasing".into(),
                ));
            }
            if times
                .iter()
                .any(|&t| !t.is_finite() || t < cfg.t_start || t > cfg.t_end)
            {
                return Err(Error::InvalidConfig(
                    "sample grid must lie within the integration window".into(),
                ));
            }
            times
                .iter()
                .copied()
                .filter(|&t| t > cfg.t_start && t < cfg.t_end)
                .collect()
        }
    };
    let emit_start = matches!(sampling, Sampling::Uniform(_))
        || matches!(sampling, Sampling::Grid(ts) if ts.first().is_some_and(|&t| t <= cfg.t_start));
    sample_times.reverse(); // consume from the back

    let mut out = Vec::with_capacity(sample_times.len() + 2);
    let mut y = Y {
        a_m: init.a_m,
        a_n: init.a_n,
        a_f: init.a_f,
        w: init.w,
    };
    let mut t = cfg.t_start;
    if emit_start {
        out.push(state_at(&y, t));
    }

    let mut k1 = rhs_raw(&y, &schedule.eval(t), params);
    let mut h = cfg.max_step.min(span * 1e-3).min(span);
    let mut steps = 0usize;

    while t < cfg.t_end {
        if steps >= MAX_STEPS {
            return Err(Error::StiffnessFailure { t });
        }
        steps += 1;
        let last = t + h >= cfg.t_end;
        if last {
            h = cfg.t_end - t;
        }
        if h < STEP_UNDERFLOW {
            if last {
                // window exhausted to rounding
                break;
            }
            return Err(Error::StiffnessFailure { t });
        }

        let k2 = rhs_raw(&y.axpy(h * A21, &k1), &schedule.eval(t + C2 * h), params);
        let y3 = y.axpy(h * A31, &k1).axpy(h * A32, &k2);
        let k3 = rhs_raw(&y3, &schedule.eval(t + C3 * h), params);
        let y4 = y.axpy(h * A41, &k1).axpy(h * A42, &k2).axpy(h * A43, &k3);
        let k4 = rhs_raw(&y4, &schedule.eval(t + C4 * h), params);
        let y5 = y
            .axpy(h * A51, &k1)
            .axpy(h * A52, &k2)
            .axpy(h * A53, &k3)
            .axpy(h * A54, &k4);
        let k5 = rhs_raw(&y5, &schedule.eval(t + C5 * h), params);
        let y6 = y
            .axpy(h * A61, &k1)
            .axpy(h * A62, &k2)
            .axpy(h * A63, &k3)
            .axpy(h * A64, &k4)
            .axpy(h * A65, &k5);
        let k6 = rhs_raw(&y6, &schedule.eval(t + h), params);
        let y_new = y
            .axpy(h * B1, &k1)
            .axpy(h * B3, &k3)
            .axpy(h * B4, &k4)
            .axpy(h * B5, &k5)
            .axpy(h * B6, &k6);
        let k7 = rhs_raw(&y_new, &schedule.eval(t + h), params);

        let err_vec = Y::ZERO
            .axpy(E1, &k1)
            .axpy(E3, &k3)
            .axpy(E4, &k4)
            .axpy(E5, &k5)
            .axpy(E6, &k6)
            .axpy(E7, &k7);
        let yc = y.components();
        let nc = y_new.components();
        let ec = err_vec.components();
        let mut err_sq = 0.0;
        for i in 0..7 {
            let scale = cfg.abs_tol + cfg.rel_tol * yc[i].abs().max(nc[i].abs());
            let r = h * ec[i] / scale;
            err_sq += r * r;
        }
        let err = (err_sq / 7.0).sqrt();

        if err.is_finite() && err <= 1.0 {
            // dense output for samples falling inside this step
            if sample_times.last().is_some_and(|&ts| ts <= t + h) {
                let ydiff = y_new.axpy(-1.0, &y);
                let bspl = Y::ZERO.axpy(h, &k1).axpy(-1.0, &ydiff);
                let seg = DenseSegment {
                    t0: t,
                    h,
                    r1: y,
                    r2: ydiff,
                    r3: bspl,
                    r4: ydiff.axpy(-h, &k7).axpy(-1.0, &bspl),
                    r5: Y::ZERO
                        .axpy(h * D1, &k1)
                        .axpy(h * D3, &k3)
                        .axpy(h * D4, &k4)
                        .axpy(h * D5, &k5)
                        .axpy(h * D6, &k6)
                        .axpy(h * D7, &k7),
                };
                while let Some(&ts) = sample_times.last() {
                    if ts > t + h {
                        break;
                    }
                    out.push(state_at(&seg.eval(ts), ts));
                    sample_times.pop();
                }
            }
            t += h;
            y = y_new;
            k1 = k7; // first-same-as-last
            let scale = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h * scale).min(cfg.max_step);
            if last {
                break;
            }
        } else {
            let scale = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.2, 0.9)
            } else {
                0.2
            };
            h *= scale;
        }
    }

    let final_state = state_at(&y, cfg.t_end);
    final_state.check_finite()?;
    out.push(final_state);
    Ok(Trajectory(out))
}

fn state_at(y: &Y, t: f64) -> AmplitudeState {
    AmplitudeState {
        a_m: y.a_m,
        a_n: y.a_n,
        a_f: y.a_f,
        w: y.w,
        t,
    }
}
