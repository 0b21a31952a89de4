//! Co-evolution of the state, metric, right/left propagators and vielbein.
//!
//! All five channels are advanced together with classical RK4. Every stage
//! assembles `H_S` once and hands the same matrix to all five right-hand
//! sides, so cross-channel identities are compared at exactly co-located
//! Hamiltonian samples.

pub mod export;

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matops::{CMatrix, CVector, MatError, I};
use crate::model::{EvalError, Scenario};

/// Any entry above this magnitude aborts integration.
pub const BLOWUP_LIMIT: f64 = 1e12;

/// Substep doublings allowed per grid interval under Richardson control.
const MAX_REFINEMENTS: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Fixed-step classical RK4.
    Rk4,
    /// RK4 where each grid interval is checked against two half steps and
    /// subdivided until the Richardson estimate meets `richardson_rtol`.
    Rk4Richardson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub step: f64,
    pub max_steps: u64,
    pub richardson_rtol: f64,
    /// Replace `G` by `(G + G†)/2` after each step. Off by default so that
    /// Hermiticity drift stays measurable.
    pub hermitize_metric: bool,
}

impl IntegratorConfig {
    pub fn rk4(step: f64) -> Self {
        Self { method: Method::Rk4, step, max_steps: 10_000_000, richardson_rtol: 1e-12, hermitize_metric: false }
    }

    pub fn validate(&self, t0: f64, t1: f64) -> Result<(), String> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(format!("step must be positive and finite, got {}", self.step));
        }
        if self.step > (t1 - t0) * (1.0 + 1e-12) {
            return Err(format!("step {} exceeds the time window {}", self.step, t1 - t0));
        }
        Ok(())
    }

    /// Number of uniform intervals covering `[t0, t1]`. The effective step is
    /// `(t1 − t0) / n`, equal to `step` whenever it divides the window.
    pub fn intervals(&self, t0: f64, t1: f64) -> u64 {
        let ratio = (t1 - t0) / self.step;
        let n = ratio.round();
        if (ratio - n).abs() <= 1e-9 * ratio.max(1.0) {
            n.max(1.0) as u64
        } else {
            ratio.ceil() as u64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "psi")]
    State,
    #[serde(rename = "G")]
    Metric,
    #[serde(rename = "U_R")]
    RightProp,
    #[serde(rename = "U_L")]
    LeftProp,
    #[serde(rename = "E")]
    Vielbein,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::State => "psi",
            Channel::Metric => "G",
            Channel::RightProp => "U_R",
            Channel::LeftProp => "U_L",
            Channel::Vielbein => "E",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("{required} steps required but max_steps is {max}")]
    StepLimitExceeded { required: u64, max: u64 },
    #[error("channel {channel} left the finite range at node {node} (t = {time})")]
    NonFinite { node: usize, channel: Channel, time: f64 },
    #[error("Richardson control failed to converge in interval ending at node {node}")]
    NoConvergence { node: usize },
    #[error("Hamiltonian evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("initial vielbein: {0}")]
    Vielbein(#[from] MatError),
}

/// `∂ₜψ = −i H ψ`.
pub fn rhs_state(h: &CMatrix, psi: &CVector) -> CVector {
    h.apply(psi).scale(-I)
}

/// `∂ₜG = i(G H − H† G)`.
pub fn rhs_metric(h: &CMatrix, g: &CMatrix) -> CMatrix {
    rhs_metric_with_adjoint(h, &h.adjoint(), g)
}

fn rhs_metric_with_adjoint(h: &CMatrix, h_adj: &CMatrix, g: &CMatrix) -> CMatrix {
    (&(g * h) - &(h_adj * g)).scale(I)
}

/// `∂ₜU_R = −i H U_R`.
pub fn rhs_right_prop(h: &CMatrix, u: &CMatrix) -> CMatrix {
    (h * u).scale(-I)
}

/// `∂ₜU_L = i U_L H`.
pub fn rhs_left_prop(h: &CMatrix, u: &CMatrix) -> CMatrix {
    (u * h).scale(I)
}

/// `∂ₜ𝓔 = i 𝓔 H`, the vielbein flow in the gauge where the Hermitized
/// Hamiltonian vanishes.
pub fn rhs_vielbein(h: &CMatrix, e: &CMatrix) -> CMatrix {
    (e * h).scale(I)
}

#[derive(Debug, Clone, PartialEq)]
struct Channels {
    psi: CVector,
    g: CMatrix,
    ur: CMatrix,
    ul: CMatrix,
    e: CMatrix,
}

impl Channels {
    fn derivative(&self, h: &CMatrix, h_adj: &CMatrix) -> Channels {
        Channels {
            psi: rhs_state(h, &self.psi),
            g: rhs_metric_with_adjoint(h, h_adj, &self.g),
            ur: rhs_right_prop(h, &self.ur),
            ul: rhs_left_prop(h, &self.ul),
            e: rhs_vielbein(h, &self.e),
        }
    }

    fn axpy(&mut self, s: f64, d: &Channels) {
        let s = Complex64::new(s, 0.0);
        self.psi.axpy(s, &d.psi);
        self.g.axpy(s, &d.g);
        self.ur.axpy(s, &d.ur);
        self.ul.axpy(s, &d.ul);
        self.e.axpy(s, &d.e);
    }

    fn offset(&self, s: f64, d: &Channels) -> Channels {
        let mut out = self.clone();
        out.axpy(s, d);
        out
    }

    fn max_diff(&self, other: &Channels) -> f64 {
        [
            self.psi.sub(&other.psi).max_abs(),
            (&self.g - &other.g).max_abs(),
            (&self.ur - &other.ur).max_abs(),
            (&self.ul - &other.ul).max_abs(),
            (&self.e - &other.e).max_abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    fn max_abs(&self) -> f64 {
        [self.psi.max_abs(), self.g.max_abs(), self.ur.max_abs(), self.ul.max_abs(), self.e.max_abs()]
            .into_iter()
            .fold(0.0, f64::max)
    }

    fn first_bad(&self) -> Option<Channel> {
        let bad = |x: f64| !(x <= BLOWUP_LIMIT);
        if bad(self.psi.max_abs()) {
            Some(Channel::State)
        } else if bad(self.g.max_abs()) {
            Some(Channel::Metric)
        } else if bad(self.ur.max_abs()) {
            Some(Channel::RightProp)
        } else if bad(self.ul.max_abs()) {
            Some(Channel::LeftProp)
        } else if bad(self.e.max_abs()) {
            Some(Channel::Vielbein)
        } else {
            None
        }
    }
}

/// Hamiltonian sample with its adjoint, shared by all channels at one stage.
struct Sample {
    h: CMatrix,
    h_adj: CMatrix,
}

impl Sample {
    fn at(scenario: &Scenario, t: f64) -> Result<Sample, EvalError> {
        let h = scenario.hamiltonian.assemble(t)?;
        let h_adj = h.adjoint();
        Ok(Sample { h, h_adj })
    }
}

fn rk4_step(y: &Channels, dt: f64, start: &Sample, mid: &Sample, end: &Sample) -> Channels {
    let k1 = y.derivative(&start.h, &start.h_adj);
    let k2 = y.offset(0.5 * dt, &k1).derivative(&mid.h, &mid.h_adj);
    let k3 = y.offset(0.5 * dt, &k2).derivative(&mid.h, &mid.h_adj);
    let k4 = y.offset(dt, &k3).derivative(&end.h, &end.h_adj);
    let mut out = y.clone();
    out.axpy(dt / 6.0, &k1);
    out.axpy(dt / 3.0, &k2);
    out.axpy(dt / 3.0, &k3);
    out.axpy(dt / 6.0, &k4);
    out
}

fn substeps(scenario: &Scenario, y: &Channels, t: f64, dt: f64, m: u32) -> Result<Channels, EvalError> {
    let sub = dt / m as f64;
    let mut y = y.clone();
    let mut start = Sample::at(scenario, t)?;
    for j in 0..m {
        let ts = t + j as f64 * sub;
        let mid = Sample::at(scenario, ts + 0.5 * sub)?;
        let end = Sample::at(scenario, t + (j + 1) as f64 * sub)?;
        y = rk4_step(&y, sub, &start, &mid, &end);
        start = end;
    }
    Ok(y)
}

/// Time-gridded record of one integration run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionBundle {
    pub grid: Vec<f64>,
    pub u_r: Vec<CMatrix>,
    pub u_l: Vec<CMatrix>,
    pub g: Vec<CMatrix>,
    pub e: Vec<CMatrix>,
    pub psi: Vec<CVector>,
}

impl EvolutionBundle {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.g[0].dim()
    }

    /// Node spacing (uniform).
    pub fn step(&self) -> f64 {
        if self.grid.len() < 2 {
            0.0
        } else {
            (self.grid[self.grid.len() - 1] - self.grid[0]) / (self.grid.len() - 1) as f64
        }
    }

    /// Index of the node nearest to `t`.
    pub fn nearest_node(&self, t: f64) -> usize {
        let h = self.step();
        if h == 0.0 {
            return 0;
        }
        let k = ((t - self.grid[0]) / h).round();
        (k.max(0.0) as usize).min(self.len() - 1)
    }

    /// `G(t) = U_L† G(t₀) U_L`, the metric implied by the left propagator.
    pub fn closed_form_metric(&self, index: usize) -> CMatrix {
        let ul = &self.u_l[index];
        &(&ul.adjoint() * &self.g[0]) * ul
    }
}

/// Integrates all channels over `[t0, t1]` on a uniform grid.
pub fn integrate(scenario: &Scenario) -> Result<EvolutionBundle, IntegrationError> {
    let cfg = &scenario.integrator;
    let (t0, t1) = (scenario.t0, scenario.t1);
    let n = cfg.intervals(t0, t1);
    if n > cfg.max_steps {
        return Err(IntegrationError::StepLimitExceeded { required: n, max: cfg.max_steps });
    }
    let n = n as usize;
    let dt = (t1 - t0) / n as f64;
    let dim = scenario.dim();

    let g0 = scenario.metric0.clone();
    let e0 = g0.cholesky_upper(&scenario.numeric.tol)?;
    let mut y = Channels {
        psi: scenario.psi0.clone(),
        g: g0,
        ur: CMatrix::identity(dim),
        ul: CMatrix::identity(dim),
        e: e0,
    };

    let mut bundle = EvolutionBundle {
        grid: Vec::with_capacity(n + 1),
        u_r: Vec::with_capacity(n + 1),
        u_l: Vec::with_capacity(n + 1),
        g: Vec::with_capacity(n + 1),
        e: Vec::with_capacity(n + 1),
        psi: Vec::with_capacity(n + 1),
    };
    let record = |b: &mut EvolutionBundle, t: f64, y: &Channels| {
        b.grid.push(t);
        b.u_r.push(y.ur.clone());
        b.u_l.push(y.ul.clone());
        b.g.push(y.g.clone());
        b.e.push(y.e.clone());
        b.psi.push(y.psi.clone());
    };
    record(&mut bundle, t0, &y);

    let mut start = Sample::at(scenario, t0)?;
    let mut refinement = 1u32;
    for k in 0..n {
        let t = t0 + k as f64 * dt;
        let t_next = if k + 1 == n { t1 } else { t0 + (k + 1) as f64 * dt };
        let step = t_next - t;
        y = match cfg.method {
            Method::Rk4 => {
                let mid = Sample::at(scenario, t + 0.5 * step)?;
                let end = Sample::at(scenario, t_next)?;
                let next = rk4_step(&y, step, &start, &mid, &end);
                start = end;
                next
            }
            Method::Rk4Richardson => {
                let mut m = (refinement / 2).max(1);
                let mut doublings = 0;
                loop {
                    let coarse = substeps(scenario, &y, t, step, m)?;
                    let fine = substeps(scenario, &y, t, step, 2 * m)?;
                    let estimate = coarse.max_diff(&fine) / 15.0;
                    if estimate <= cfg.richardson_rtol * fine.max_abs().max(1.0) {
                        refinement = 2 * m;
                        break fine;
                    }
                    doublings += 1;
                    if doublings > MAX_REFINEMENTS || !estimate.is_finite() {
                        return Err(IntegrationError::NoConvergence { node: k + 1 });
                    }
                    m *= 2;
                }
            }
        };
        if cfg.hermitize_metric {
            y.g = y.g.hermitian_part();
        }
        if let Some(channel) = y.first_bad() {
            return Err(IntegrationError::NonFinite { node: k + 1, channel, time: t_next });
        }
        record(&mut bundle, t_next, &y);
    }
    Ok(bundle)
}
