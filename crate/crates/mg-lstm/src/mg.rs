//! Mackey-Glass data generation.
//!
//! Integrates the scalar delay differential equation
//!
//! ```text
//! dmu/dt = beta * mu(t - tau) / (1 + mu(t - tau)^p) - gamma * mu(t)
//! ```
//!
//! with fixed-step classical Runge-Kutta. The delayed term is looked up from
//! the stored solution; lookups that fall between grid nodes use cubic
//! Hermite interpolation of the two bracketing nodes, which preserves the
//! integrator's fourth-order convergence. Requiring `tau / dt_int` to be an
//! integer keeps the endpoint lookups exact and aligns the history kinks
//! (at multiples of tau) with grid nodes.
//!
//! The dense solution is sampled at spacing `delta t = 1` after an initial
//! transient is discarded, observation noise is injected relative to the
//! series' own standard deviation, and min/max normalization maps data to
//! `[-0.5, 0.5]` for training.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fmt::g17;
use crate::rng::CounterRng;

/// Sampling interval of the observed series, in the DDE's time units.
pub const SAMPLE_SPACING: f64 = 1.0;

/// Parameters of the Mackey-Glass run. Defaults are the classical chaotic
/// regime (beta 0.2, gamma 0.1, tau 17, exponent 10) with constant history
/// 1.2 and a 1000-time-unit transient.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MgConfig {
    pub beta: f64,
    pub gamma: f64,
    pub tau: f64,
    pub exponent: f64,
    /// Constant history mu(t <= 0).
    pub history_value: f64,
    /// Integrator step; tau/dt_int and SAMPLE_SPACING/dt_int must be integral.
    pub dt_int: f64,
    /// Total integration time, including the transient.
    pub t_end: f64,
    /// Initial duration discarded before sampling begins.
    pub transient: f64,
}

impl Default for MgConfig {
    fn default() -> Self {
        MgConfig {
            beta: 0.2,
            gamma: 0.1,
            tau: 17.0,
            exponent: 10.0,
            history_value: 1.2,
            dt_int: 0.1,
            t_end: 4000.0,
            transient: 1000.0,
        }
    }
}

impl MgConfig {
    /// Number of retained samples for this config.
    pub fn n_samples(&self) -> usize {
        ((self.t_end - self.transient) / SAMPLE_SPACING).floor() as usize + 1
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.tau > 0.0) {
            return fail(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.dt_int > 0.0) {
            return fail(format!("dt_int must be positive, got {}", self.dt_int));
        }
        let delay_steps = self.tau / self.dt_int;
        if (delay_steps - delay_steps.round()).abs() > 1e-9 || delay_steps.round() < 10.0 {
            return fail(format!(
                "tau/dt_int must be an integer >= 10, got {delay_steps}"
            ));
        }
        let stride = SAMPLE_SPACING / self.dt_int;
        if (stride - stride.round()).abs() > 1e-9 || stride < 1.0 {
            return fail(format!(
                "sample spacing {SAMPLE_SPACING} must be an integer multiple of dt_int, got ratio {stride}"
            ));
        }
        if !(self.t_end > self.transient) {
            return fail(format!(
                "t_end ({}) must exceed transient ({})",
                self.t_end, self.transient
            ));
        }
        Ok(())
    }

    /// Key-value lines for `#`-prefixed CSV comment headers.
    pub fn comment_lines(&self) -> Vec<String> {
        vec![
            format!("beta = {}", self.beta),
            format!("gamma = {}", self.gamma),
            format!("tau = {}", self.tau),
            format!("exponent = {}", self.exponent),
            format!("history_value = {}", self.history_value),
            format!("dt_int = {}", self.dt_int),
            format!("t_end = {}", self.t_end),
            format!("transient = {}", self.transient),
        ]
    }
}

/// The sampled noiseless solution mu(n * delta t).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Sample instants, uniform spacing [`SAMPLE_SPACING`], starting at 0
    /// for the first retained sample.
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Standard deviation of the retained window; the noise scale and the
    /// NRMSE normalizer.
    pub nu: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Contiguous sub-window `[start, start + len)`. Times are kept from the
    /// parent (uniform spacing is preserved) and nu is inherited: it is a
    /// property of the generating run, not of the slice.
    pub fn window(&self, start: usize, len: usize) -> Trajectory {
        assert!(start + len <= self.len(), "window out of range");
        Trajectory {
            times: self.times[start..start + len].to_vec(),
            values: self.values[start..start + len].to_vec(),
            nu: self.nu,
        }
    }
}

/// Noisy observations y_n = mu(n dt) + nu * sigma * eps_n.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisySeries {
    pub values: Vec<f64>,
    /// Noise level relative to the signal's standard deviation.
    pub sigma: f64,
    pub seed: u64,
    /// The source samples the noise was added to.
    pub clean: Vec<f64>,
    /// Carried over from the source trajectory.
    pub nu: f64,
}

impl NoisySeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Min/max normalizer mapping the fitted range onto `[-0.5, 0.5]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaler {
    pub min: f64,
    pub max: f64,
}

impl Scaler {
    pub fn fit(values: &[f64]) -> Result<Scaler> {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &v in values {
            min = min.min(v);
            max = max.max(v);
        }
        if !(max > min) {
            return Err(Error::DegenerateScale { value: min });
        }
        Ok(Scaler { min, max })
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min) - 0.5
    }

    #[inline]
    pub fn invert(&self, y: f64) -> f64 {
        (y + 0.5) * (self.max - self.min) + self.min
    }

    pub fn range(&self) -> f64 {
        self.max - self.min
    }

    pub fn apply_all(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.apply(x)).collect()
    }
}

/// Fit the normalizer on a training series. The same scaler must be reused
/// unchanged for every evaluation of the resulting model.
pub fn fit_scaler(series: &NoisySeries) -> Result<Scaler> {
    Scaler::fit(&series.values)
}

/// Integrate the DDE and sample it at [`SAMPLE_SPACING`] after the transient.
pub fn integrate_mg(config: &MgConfig) -> Result<Trajectory> {
    config.validate()?;
    let dt = config.dt_int;
    let delay = (config.tau / dt).round() as usize;
    let stride = (SAMPLE_SPACING / dt).round() as usize;
    let n = (config.t_end / dt).round() as usize;
    let hist = config.history_value;

    let rhs = |mu: f64, mu_delayed: f64| -> f64 {
        config.beta * mu_delayed / (1.0 + mu_delayed.powf(config.exponent)) - config.gamma * mu
    };

    let mut mu = vec![0.0; n + 1];
    let mut deriv = vec![0.0; n + 1];
    mu[0] = hist;

    // Grid value at index j; constant history below t = 0.
    let node = |mu: &[f64], j: isize| -> f64 {
        if j < 0 {
            hist
        } else {
            mu[j as usize]
        }
    };

    deriv[0] = rhs(mu[0], node(&mu, -(delay as isize)));
    for i in 0..n {
        let j = i as isize - delay as isize;
        let d0 = node(&mu, j);
        let k1 = rhs(mu[i], d0);
        // Delayed value at the half step t_i - tau + dt/2.
        let dm = if j + 1 <= 0 {
            hist
        } else {
            let j = j as usize;
            0.5 * (mu[j] + mu[j + 1]) + dt / 8.0 * (deriv[j] - deriv[j + 1])
        };
        let k2 = rhs(mu[i] + 0.5 * dt * k1, dm);
        let k3 = rhs(mu[i] + 0.5 * dt * k2, dm);
        let d1 = node(&mu, j + 1);
        let k4 = rhs(mu[i] + dt * k3, d1);
        let next = mu[i] + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() {
            return Err(Error::IntegrationDiverged {
                t: (i + 1) as f64 * dt,
            });
        }
        mu[i + 1] = next;
        deriv[i + 1] = rhs(next, d1);
    }

    let start = (config.transient / dt).round() as usize;
    let values: Vec<f64> = mu[start..=n].iter().copied().step_by(stride).collect();
    let times: Vec<f64> = (0..values.len())
        .map(|i| i as f64 * SAMPLE_SPACING)
        .collect();
    let nu = std_dev(&values);
    Ok(Trajectory { times, values, nu })
}

/// Add white Gaussian observation noise with standard deviation
/// `sigma * traj.nu`. Deterministic for a given `(traj, sigma, seed)`.
pub fn add_noise(traj: &Trajectory, sigma: f64, seed: u64) -> NoisySeries {
    assert!(sigma >= 0.0, "sigma must be non-negative");
    let mut rng = CounterRng::new(seed);
    let scale = sigma * traj.nu;
    let values = traj
        .values
        .iter()
        .map(|&mu| mu + scale * rng.next_gaussian())
        .collect();
    NoisySeries {
        values,
        sigma,
        seed,
        clean: traj.values.clone(),
        nu: traj.nu,
    }
}

/// Population standard deviation.
pub(crate) fn std_dev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Dataset export: header `t,mu,y`, one row per sample, 17 significant
/// digits, with `#`-prefixed comment lines echoing the configuration.
/// When `noisy` is absent the `y` column repeats `mu`.
pub fn write_series_csv<W: Write>(
    w: &mut W,
    traj: &Trajectory,
    noisy: Option<&NoisySeries>,
    comments: &[String],
) -> std::io::Result<()> {
    if let Some(s) = noisy {
        assert_eq!(s.len(), traj.len(), "noisy series length mismatch");
    }
    for line in comments {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "# nu = {}", g17(traj.nu))?;
    writeln!(w, "t,mu,y")?;
    for i in 0..traj.len() {
        let y = noisy.map_or(traj.values[i], |s| s.values[i]);
        writeln!(
            w,
            "{},{},{}",
            g17(traj.times[i]),
            g17(traj.values[i]),
            g17(y)
        )?;
    }
    Ok(())
}
