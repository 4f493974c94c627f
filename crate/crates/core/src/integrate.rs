//! Fixed-step time integration: classical RK4 for the deterministic field and
//! Euler–Maruyama for the noisy network.
//!
//! Gaussian increments come from a ChaCha8 stream (`rand_chacha`) seeded with
//! `seed_from_u64`, sampled through `rand_distr::StandardNormal` (ziggurat).
//! One normal is drawn per oscillator per step, in flat oscillator order, so a
//! (seed, params, dt, T, stride, θ0) tuple pins the whole path.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{Field, Params, PhaseState};

/// Time grid shared by both integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub dt: f64,
    pub t_end: f64,
    pub stride: usize,
}

impl Schedule {
    pub fn new(dt: f64, t_end: f64, stride: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParam {
                key: "dt",
                reason: "must be positive".into(),
            });
        }
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::InvalidParam {
                key: "T",
                reason: "must be positive".into(),
            });
        }
        if stride == 0 {
            return Err(Error::InvalidParam {
                key: "stride",
                reason: "must be at least 1".into(),
            });
        }
        Ok(Schedule { dt, t_end, stride })
    }

    /// Number of steps; the final time `steps·dt` lies within `dt` of `t_end`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize
    }

    pub fn sample_time(&self, index: usize) -> f64 {
        (index * self.stride) as f64 * self.dt
    }
}

/// Strided samples of a network path.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Wrapped phases.
    pub states: Vec<PhaseState>,
    /// Unwrapped phase accumulators, same shape as `states`.
    pub unwrapped: Vec<Vec<f64>>,
    pub params: Params,
    pub seed: Option<u64>,
    pub schedule: Schedule,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn from_raw(raw: Vec<Vec<f64>>, params: &Params, seed: Option<u64>, sched: Schedule) -> Self {
        let times = (0..raw.len()).map(|i| sched.sample_time(i)).collect();
        let states = raw.iter().map(|x| PhaseState::new(x.clone())).collect();
        Trajectory {
            times,
            states,
            unwrapped: raw,
            params: params.clone(),
            seed,
            schedule: sched,
        }
    }
}

/// Scratch buffers for one RK4 stepper.
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Rk4 {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    pub fn step<F>(&mut self, f: &F, x: &mut [f64], dt: f64)
    where
        F: Fn(&[f64], &mut [f64]),
    {
        let n = x.len();
        f(x, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * dt * self.k1[i];
        }
        f(&self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * dt * self.k2[i];
        }
        f(&self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = x[i] + dt * self.k3[i];
        }
        f(&self.tmp, &mut self.k4);
        for i in 0..n {
            x[i] += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

fn check_finite(x: &[f64], step: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { step })
    }
}

/// RK4 path of an arbitrary autonomous field; returns the strided samples.
pub fn rk4_path<F>(f: F, x0: &[f64], sched: &Schedule) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64], &mut [f64]),
{
    let steps = sched.steps();
    let mut x = x0.to_vec();
    let mut stepper = Rk4::new(x.len());
    let mut out = Vec::with_capacity(steps / sched.stride + 1);
    out.push(x.clone());
    for step in 1..=steps {
        stepper.step(&f, &mut x, sched.dt);
        check_finite(&x, step)?;
        if step % sched.stride == 0 {
            out.push(x.clone());
        }
    }
    Ok(out)
}

/// Euler–Maruyama path `x ← x + f(x)·dt + η·√dt·ξ` of an arbitrary drift.
pub fn em_path<F>(drift: F, x0: &[f64], eta: f64, sched: &Schedule, seed: u64) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64], &mut [f64]),
{
    let steps = sched.steps();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = x0.to_vec();
    let mut fx = vec![0.0; x.len()];
    let sigma = eta * sched.dt.sqrt();
    let mut out = Vec::with_capacity(steps / sched.stride + 1);
    out.push(x.clone());
    for step in 1..=steps {
        drift(&x, &mut fx);
        for (xi, fi) in x.iter_mut().zip(&fx) {
            let xi_noise: f64 = StandardNormal.sample(&mut rng);
            *xi += fi * sched.dt + sigma * xi_noise;
        }
        check_finite(&x, step)?;
        if step % sched.stride == 0 {
            out.push(x.clone());
        }
    }
    Ok(out)
}

fn check_len(theta0: &PhaseState, params: &Params) -> Result<()> {
    if theta0.len() != params.dim() {
        return Err(Error::LengthMismatch {
            expected: params.dim(),
            got: theta0.len(),
        });
    }
    Ok(())
}

/// Deterministic RK4 run of the full network (η is ignored).
pub fn integrate_rk4(
    theta0: &PhaseState,
    params: &Params,
    dt: f64,
    t_end: f64,
    stride: usize,
) -> Result<Trajectory> {
    let sched = Schedule::new(dt, t_end, stride)?;
    check_len(theta0, params)?;
    let field = Field::new(params)?;
    let raw = rk4_path(|x, out| field.eval_into(x, out), theta0.as_slice(), &sched)?;
    Ok(Trajectory::from_raw(raw, params, None, sched))
}

/// Euler–Maruyama run of the noisy network with noise strength `params.eta`.
pub fn integrate_em(
    theta0: &PhaseState,
    params: &Params,
    dt: f64,
    t_end: f64,
    stride: usize,
    seed: u64,
) -> Result<Trajectory> {
    let sched = Schedule::new(dt, t_end, stride)?;
    check_len(theta0, params)?;
    let field = Field::new(params)?;
    let raw = em_path(
        |x, out| field.eval_into(x, out),
        theta0.as_slice(),
        params.eta,
        &sched,
        seed,
    )?;
    Ok(Trajectory::from_raw(raw, params, Some(seed), sched))
}
