//! Synthetic dynamical systems used as ground truth: the forced Van der Pol
//! oscillator, the Lorenz system and the logistic map.

use serde::{Deserialize, Serialize};

use crate::series::{MultivariateSeries, Role};
use crate::{Error, Result};

/// Default Van der Pol damping.
pub const VDP_MU: f64 = 1.5;
/// Default Van der Pol forcing frequency.
pub const VDP_OMEGA: f64 = 2.0;
pub const VDP_DT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "snake_case")]
pub enum OdeSystem {
    /// `x'' - mu (1 - x^2) x' + x = a cos(omega t)`.
    VanDerPol {
        mu: f64,
        a: f64,
        omega: f64,
    },
    Lorenz {
        sigma: f64,
        rho: f64,
        beta: f64,
    },
}

impl OdeSystem {
    fn rhs(&self, t: f64, y: &[f64], out: &mut [f64]) {
        match *self {
            OdeSystem::VanDerPol { mu, a, omega } => {
                out[0] = y[1];
                out[1] = mu * (1.0 - y[0] * y[0]) * y[1] - y[0] + a * (omega * t).cos();
            }
            OdeSystem::Lorenz { sigma, rho, beta } => {
                out[0] = sigma * (y[1] - y[0]);
                out[1] = y[0] * (rho - y[2]) - y[1];
                out[2] = y[0] * y[1] - beta * y[2];
            }
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            OdeSystem::VanDerPol { .. } => 2,
            OdeSystem::Lorenz { .. } => 3,
        }
    }

    fn params_finite(&self) -> bool {
        match *self {
            OdeSystem::VanDerPol { mu, a, omega } => [mu, a, omega].iter().all(|v| v.is_finite()),
            OdeSystem::Lorenz { sigma, rho, beta } => [sigma, rho, beta].iter().all(|v| v.is_finite()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeSpec {
    pub system: OdeSystem,
    pub initial: Vec<f64>,
    pub dt: f64,
    /// Number of recorded samples, the initial state included.
    pub steps: usize,
}

impl OdeSpec {
    /// Forced Van der Pol with the default damping, frequency and step.
    pub fn van_der_pol(a: f64) -> Self {
        Self {
            system: OdeSystem::VanDerPol { mu: VDP_MU, a, omega: VDP_OMEGA },
            initial: vec![0.1, 0.0],
            dt: VDP_DT,
            steps: 4096,
        }
    }

    /// Lorenz with sigma = 10, rho = 28, beta = 8/3.
    pub fn lorenz() -> Self {
        Self {
            system: OdeSystem::Lorenz { sigma: 10.0, rho: 28.0, beta: 8.0 / 3.0 },
            initial: vec![1.0, 1.0, 1.0],
            dt: 0.01,
            steps: 10_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::input(format!("dt must be positive, got {}", self.dt)));
        }
        if self.steps == 0 {
            return Err(Error::input("steps must be at least 1"));
        }
        if self.initial.len() != self.system.state_dim() {
            return Err(Error::input(format!(
                "initial state has {} components, system needs {}",
                self.initial.len(),
                self.system.state_dim()
            )));
        }
        if !self.system.params_finite() || !self.initial.iter().all(|v| v.is_finite()) {
            return Err(Error::input("parameters and initial state must be finite"));
        }
        Ok(())
    }

    /// State trajectory, one row per recorded sample.
    pub fn trajectory(&self) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        let mut y = self.initial.clone();
        let mut out = Vec::with_capacity(self.steps);
        out.push(y.clone());
        for i in 1..self.steps {
            let t = (i - 1) as f64 * self.dt;
            rk4_step(&self.system, t, &mut y, self.dt);
            if !y.iter().all(|v| v.is_finite()) {
                return Err(Error::numeric(format!("state became non-finite at step {i}")));
            }
            out.push(y.clone());
        }
        Ok(out)
    }
}

/// Advance `y` by one classical Runge-Kutta step from time `t`.
pub fn rk4_step(system: &OdeSystem, t: f64, y: &mut [f64], dt: f64) {
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    system.rhs(t, y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k1[i];
    }
    system.rhs(t + 0.5 * dt, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k2[i];
    }
    system.rhs(t + 0.5 * dt, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + dt * k3[i];
    }
    system.rhs(t + dt, &tmp, &mut k4);
    for i in 0..n {
        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

fn columns(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = rows[0].len();
    (0..d).map(|c| rows.iter().map(|r| r[c]).collect()).collect()
}

/// Integrate a forced Van der Pol spec into channels `x`, `xdot` and the
/// forcing `a cos(omega t)` as an action channel.
pub fn integrate_vdp(spec: &OdeSpec) -> Result<MultivariateSeries> {
    let OdeSystem::VanDerPol { a, omega, .. } = spec.system else {
        return Err(Error::input("integrate_vdp needs a Van der Pol spec"));
    };
    let mut values = columns(&spec.trajectory()?);
    values.push((0..spec.steps).map(|i| a * (omega * spec.dt * i as f64).cos()).collect());
    MultivariateSeries::new(
        vec!["x".into(), "xdot".into(), "forcing".into()],
        vec![Role::Observation, Role::Observation, Role::Action],
        values,
        spec.dt,
    )
}

/// Integrate a Lorenz spec into channels `x`, `y`, `z`.
pub fn integrate_lorenz(spec: &OdeSpec) -> Result<MultivariateSeries> {
    if !matches!(spec.system, OdeSystem::Lorenz { .. }) {
        return Err(Error::input("integrate_lorenz needs a Lorenz spec"));
    }
    MultivariateSeries::new(
        vec!["x".into(), "y".into(), "z".into()],
        vec![Role::Observation; 3],
        columns(&spec.trajectory()?),
        spec.dt,
    )
}

/// Iterate `x <- r x (1 - x)`; returns `steps` values starting at `x0`.
pub fn logistic_map(r: f64, x0: f64, steps: usize) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&x0) {
        return Err(Error::input(format!("x0 must lie in [0, 1], got {x0}")));
    }
    if !r.is_finite() {
        return Err(Error::input("r must be finite"));
    }
    let mut out = Vec::with_capacity(steps);
    let mut x = x0;
    for _ in 0..steps {
        out.push(x);
        x = r * x * (1.0 - x);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vdp_equilibrium_stays_put() {
        let mut spec = OdeSpec::van_der_pol(0.0);
        spec.initial = vec![0.0, 0.0];
        spec.steps = 2000;
        let s = integrate_vdp(&spec).unwrap();
        assert!(s.channel(0).iter().chain(s.channel(1)).all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn vdp_forcing_channel_is_exact() {
        let mut spec = OdeSpec::van_der_pol(0.9);
        spec.steps = 300;
        let s = integrate_vdp(&spec).unwrap();
        for (i, v) in s.channel(2).iter().enumerate() {
            assert_eq!(*v, 0.9 * (VDP_OMEGA * VDP_DT * i as f64).cos());
        }
        assert_eq!(s.roles()[2], Role::Action);
    }

    #[test]
    fn deterministic_trajectories() {
        let spec = OdeSpec::lorenz();
        let a = spec.trajectory().unwrap();
        let b = spec.trajectory().unwrap();
        assert!(a.iter().flatten().zip(b.iter().flatten()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn halving_dt_converges() {
        let at_t10 = |dt: f64| {
            let mut spec = OdeSpec::van_der_pol(0.5);
            spec.dt = dt;
            spec.steps = (10.0 / dt).round() as usize + 1;
            spec.trajectory().unwrap().last().unwrap().clone()
        };
        let coarse = at_t10(0.01);
        let fine = at_t10(0.005);
        assert!((coarse[0] - fine[0]).abs() < 1e-4 && (coarse[1] - fine[1]).abs() < 1e-4);
    }

    #[test]
    fn lorenz_subcritical_decays() {
        let mut spec = OdeSpec::lorenz();
        spec.system = OdeSystem::Lorenz { sigma: 10.0, rho: 0.5, beta: 8.0 / 3.0 };
        spec.steps = 5000;
        let last = spec.trajectory().unwrap().pop().unwrap();
        assert!(last.iter().all(|v| v.abs() < 1e-6), "{last:?}");
    }

    #[test]
    fn lorenz_stays_bounded() {
        let mut spec = OdeSpec::lorenz();
        spec.steps = 100_000;
        let traj = spec.trajectory().unwrap();
        assert!(traj.iter().all(|y| y.iter().map(|v| v * v).sum::<f64>().sqrt() < 100.0));
    }

    #[test]
    fn logistic_exact_values() {
        assert_eq!(logistic_map(4.0, 0.5, 5).unwrap(), vec![0.5, 1.0, 0.0, 0.0, 0.0]);
        let x = logistic_map(2.5, 0.3, 200).unwrap();
        assert!((x[199] - 0.6).abs() < 1e-12);
        assert!(logistic_map(4.0, 1.5, 3).is_err());
    }

    #[test]
    fn bad_specs() {
        let mut spec = OdeSpec::van_der_pol(0.1);
        spec.dt = 0.0;
        assert!(matches!(integrate_vdp(&spec), Err(Error::Input(_))));
        let mut spec = OdeSpec::van_der_pol(0.1);
        spec.initial = vec![1e200, 1e200];
        spec.steps = 10;
        assert!(matches!(integrate_vdp(&spec), Err(Error::Numeric(_))));
        assert!(integrate_lorenz(&OdeSpec::van_der_pol(0.1)).is_err());
    }
}
