//! Shared helpers for the integration suites: a classical RK4 integrator
//! used as the independent ODE oracle, a tiny deterministic generator for
//! random-state sampling, and the hand-written reaction right-hand sides of
//! the preset families (kept independent of the library's source machinery
//! on purpose).

use kinlim_core::scenario::{ForagerParams, InvasionParams, OncolyticParams, VirusParams};

/// Fixed-step fourth-order Runge-Kutta.
pub fn rk4(rhs: impl Fn(&[f64]) -> Vec<f64>, y0: &[f64], t1: f64, n: usize) -> Vec<f64> {
    let h = t1 / n as f64;
    let mut y = y0.to_vec();
    for _ in 0..n {
        let k1 = rhs(&y);
        let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, b)| a + 0.5 * h * b).collect();
        let k2 = rhs(&y2);
        let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, b)| a + 0.5 * h * b).collect();
        let k3 = rhs(&y3);
        let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, b)| a + h * b).collect();
        let k4 = rhs(&y4);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

/// SplitMix64: deterministic, seedable, dependency-free.
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        lo + u * (hi - lo)
    }
}

/// KS-virus reaction ODE (three species).
pub fn virus_rhs(p: &VirusParams) -> impl Fn(&[f64]) -> Vec<f64> + '_ {
    move |u| {
        vec![
            -p.decay[0] * u[0] - p.beta * u[0] * u[2] + p.r,
            p.beta * u[0] * u[2] - p.decay[1] * u[1],
            p.k * u[1] - p.decay[2] * u[2],
        ]
    }
}

/// Oncolytic reaction ODE (four species, saturated infection).
pub fn oncolytic_rhs(p: &OncolyticParams) -> impl Fn(&[f64]) -> Vec<f64> + '_ {
    move |u| {
        let sat = p.rho * u[0] * u[3] / (p.k_u1 + p.theta_sat * u[0]);
        vec![
            p.mu1 * u[0] * (1.0 - u[0].powf(p.r_exp)) - sat,
            sat - p.delta2 * u[1],
            -u[2] * (p.alpha1 * u[0] + p.alpha2 * u[1]) + p.mu3 * u[2] * (1.0 - u[2]),
            p.beta * u[1] - p.delta4 * u[3] - sat,
        ]
    }
}

/// Invasion reaction ODE (three species).
pub fn invasion_rhs(p: &InvasionParams) -> impl Fn(&[f64]) -> Vec<f64> + '_ {
    move |u| {
        vec![
            p.mu * u[0] * (p.r - u[0] - u[2]),
            -(u[1] - u[0]) / p.sigma,
            -u[1] * u[2] + p.eta * u[2] * (1.0 - u[0] - u[2]),
        ]
    }
}

/// Forager reaction ODE (only the food reacts).
pub fn forager_rhs(p: &ForagerParams) -> impl Fn(&[f64]) -> Vec<f64> + '_ {
    move |u| {
        vec![
            0.0,
            0.0,
            -p.lambda * (u[0] + u[1]) * u[2] - p.mu * u[2] + p.r0 * u[2] * (1.0 - u[2]),
        ]
    }
}
