//! Order parameters, frequency estimates and switching statistics.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::{integrate_em, Trajectory};
use crate::model::{angle_diff, Params, PhaseState};

/// Default hysteresis thresholds for [`detect_switches`].
pub const LOW: f64 = 0.4;
pub const HIGH: f64 = 0.9;

/// `(R_σ, arg Z_σ)` for each population, `Z_σ = (1/N) Σ_j exp(iθ_{σ,j})`.
pub fn order_parameters(theta: &PhaseState, n: usize) -> Vec<(f64, f64)> {
    order_parameters_raw(theta.as_slice(), n)
}

pub(crate) fn order_parameters_raw(theta: &[f64], n: usize) -> Vec<(f64, f64)> {
    theta
        .chunks(n)
        .map(|pop| {
            let z: Complex64 = pop.iter().map(|&t| Complex64::from_polar(1.0, t)).sum::<Complex64>() / n as f64;
            (z.norm().min(1.0), z.arg())
        })
        .collect()
}

/// Order parameters at every sample: `(R[t][σ], arg[t][σ])`.
pub fn order_parameter_series(traj: &Trajectory) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = traj.params.n;
    traj.states
        .iter()
        .map(|s| order_parameters(s, n).into_iter().unzip())
        .unzip()
}

/// Instantaneous population frequencies `(1/N) Σ_k θ̇_{σ,k}` estimated by
/// forward differences of the unwrapped phases (last sample repeats).
pub fn frequency_series(traj: &Trajectory) -> Vec<Vec<f64>> {
    let n = traj.params.n;
    let len = traj.len();
    (0..len)
        .map(|i| {
            let (a, b) = if i + 1 < len { (i, i + 1) } else { (i.saturating_sub(1), i) };
            if a == b {
                return vec![0.0; traj.params.m];
            }
            let dt = traj.times[b] - traj.times[a];
            traj.unwrapped[b]
                .chunks(n)
                .zip(traj.unwrapped[a].chunks(n))
                .map(|(pb, pa)| pb.iter().zip(pa).map(|(x, y)| x - y).sum::<f64>() / (n as f64 * dt))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyEstimate {
    pub per_population: Vec<f64>,
    /// Max minus min of the oscillator frequencies within each population.
    pub spread: Vec<f64>,
    pub samples: usize,
}

/// Average angular frequencies over the samples with `t0 ≤ t ≤ t1`, from the
/// integrator's unwrapped phases.
pub fn average_frequencies(traj: &Trajectory, t0: f64, t1: f64) -> Result<FrequencyEstimate> {
    let idx: Vec<usize> = (0..traj.len()).filter(|&i| traj.times[i] >= t0 && traj.times[i] <= t1).collect();
    if idx.len() < 10 {
        return Err(Error::WindowTooShort(idx.len()));
    }
    let (a, b) = (idx[0], idx[idx.len() - 1]);
    let span = traj.times[b] - traj.times[a];
    let n = traj.params.n;
    let mut per_population = Vec::with_capacity(traj.params.m);
    let mut spread = Vec::with_capacity(traj.params.m);
    for (pb, pa) in traj.unwrapped[b].chunks(n).zip(traj.unwrapped[a].chunks(n)) {
        let f: Vec<f64> = pb.iter().zip(pa).map(|(x, y)| (x - y) / span).collect();
        per_population.push(f.iter().sum::<f64>() / n as f64);
        let (lo, hi) = f.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        spread.push(hi - lo);
    }
    Ok(FrequencyEstimate {
        per_population,
        spread,
        samples: idx.len(),
    })
}

/// A desynchronization episode of one population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwitchingEvent {
    /// One-based population index.
    pub population: usize,
    pub t_enter: f64,
    pub t_exit: f64,
    pub duration: f64,
}

impl SwitchingEvent {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.t_enter + self.t_exit)
    }
}

/// Episodes open when `R_σ` drops below `low` and close when it rises above
/// `high`. Episodes already open at the first sample or still open at the
/// last one are censored and dropped.
pub fn detect_switches(times: &[f64], r: &[Vec<f64>], low: f64, high: f64) -> Result<Vec<SwitchingEvent>> {
    if !(low < high) {
        return Err(Error::InvalidParam {
            key: "low",
            reason: format!("thresholds must satisfy low < high (got {low}, {high})"),
        });
    }
    if times.len() != r.len() {
        return Err(Error::LengthMismatch {
            expected: times.len(),
            got: r.len(),
        });
    }
    let m = r.first().map_or(0, |x| x.len());
    let mut events = Vec::new();
    for s in 0..m {
        let mut open: Option<f64> = None;
        let mut censored = r[0][s] < low;
        for (t, row) in times.iter().zip(r) {
            let v = row[s];
            if censored {
                if v > high {
                    censored = false;
                }
                continue;
            }
            match open {
                None if v < low => open = Some(*t),
                Some(t_enter) if v > high => {
                    events.push(SwitchingEvent {
                        population: s + 1,
                        t_enter,
                        t_exit: *t,
                        duration: t - t_enter,
                    });
                    open = None;
                }
                _ => {}
            }
        }
    }
    events.sort_by(|a, b| a.t_enter.total_cmp(&b.t_enter).then(a.population.cmp(&b.population)));
    Ok(events)
}

/// Longest run of consecutive episodes (by entry time) whose populations
/// advance `σ → σ + 1 (mod M)`; returns the number of such transitions.
pub fn longest_cyclic_run(events: &[SwitchingEvent], m: usize) -> usize {
    let (mut best, mut cur) = (0, 0);
    for w in events.windows(2) {
        if w[1].population == w[0].population % m + 1 {
            cur += 1;
            best = best.max(cur);
        } else {
            cur = 0;
        }
    }
    best
}

/// Gaps between successive episode midpoints.
pub fn residence_times(events: &[SwitchingEvent]) -> Vec<f64> {
    let mut mids: Vec<f64> = events.iter().map(|e| e.midpoint()).collect();
    mids.sort_by(f64::total_cmp);
    mids.windows(2).map(|w| w[1] - w[0]).collect()
}

/// For each episode, the smallest phase gap `|arg Z_a − arg Z_b|` between the
/// two other populations over samples where both exceed `high`. Meant for
/// three populations; episodes with no such sample are skipped.
pub fn locked_phase_gaps(
    times: &[f64],
    r: &[Vec<f64>],
    args: &[Vec<f64>],
    events: &[SwitchingEvent],
    high: f64,
) -> Vec<f64> {
    let mut out = Vec::new();
    for e in events {
        let s = e.population - 1;
        let m = r[0].len();
        let (a, b) = ((s + 1) % m, (s + 2) % m);
        let mut best = f64::INFINITY;
        for (i, t) in times.iter().enumerate() {
            if *t < e.t_enter || *t > e.t_exit {
                continue;
            }
            if r[i][a] > high && r[i][b] > high {
                best = best.min(angle_diff(args[i][a], args[i][b]).abs());
            }
        }
        if best.is_finite() {
            out.push(best);
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub eta: f64,
    pub events: usize,
    pub mean_residence: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Least-squares fit `mean = intercept + slope·ln(1/η)`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub monotone: bool,
}

/// Settings shared by every run of a scaling study.
#[derive(Debug, Clone)]
pub struct ScalingSetup {
    pub theta0: PhaseState,
    pub dt: f64,
    pub t_end: f64,
    pub stride: usize,
    pub repetitions: usize,
    pub seed_base: u64,
}

/// Ordinary least squares of `y` on `x`: `(slope, intercept, R²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

/// Mean residence time per noise level, pooled over `repetitions` runs seeded
/// `seed_base + index`. Runs execute in parallel.
pub fn transition_scaling(params: &Params, etas: &[f64], setup: &ScalingSetup) -> Result<ScalingReport> {
    if etas.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if let Some(&bad) = etas.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(Error::InvalidParam {
            key: "eta",
            reason: format!("noise levels must be positive (got {bad})"),
        });
    }
    let jobs: Vec<(usize, usize)> = (0..etas.len()).flat_map(|i| (0..setup.repetitions).map(move |j| (i, j))).collect();
    let results: Vec<(usize, Result<(usize, Vec<f64>)>)> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let mut p = params.clone();
            p.eta = etas[i];
            let seed = setup.seed_base + (i * setup.repetitions + j) as u64;
            let run = || -> Result<(usize, Vec<f64>)> {
                let traj = integrate_em(&setup.theta0, &p, setup.dt, setup.t_end, setup.stride, seed)?;
                let (r, _) = order_parameter_series(&traj);
                let events = detect_switches(&traj.times, &r, LOW, HIGH)?;
                Ok((events.len(), residence_times(&events)))
            };
            (i, run())
        })
        .collect();
    let mut rows = Vec::with_capacity(etas.len());
    for (i, &eta) in etas.iter().enumerate() {
        let (mut events, mut gaps) = (0, Vec::new());
        for (k, res) in &results {
            if *k == i {
                let (count, g) = res.clone()?;
                events += count;
                gaps.extend(g);
            }
        }
        if events < 3 || gaps.is_empty() {
            return Err(Error::InsufficientEvents { eta, events });
        }
        rows.push(ScalingRow {
            eta,
            events,
            mean_residence: gaps.iter().sum::<f64>() / gaps.len() as f64,
        });
    }
    let x: Vec<f64> = rows.iter().map(|r| (1.0 / r.eta).ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.mean_residence).collect();
    let (slope, intercept, r_squared) = if rows.len() >= 2 {
        linear_fit(&x, &y)
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    let mut order: Vec<&ScalingRow> = rows.iter().collect();
    order.sort_by(|a, b| b.eta.total_cmp(&a.eta));
    let monotone = order.windows(2).all(|w| w[1].mean_residence > w[0].mean_residence);
    Ok(ScalingReport {
        rows,
        slope,
        intercept,
        r_squared,
        monotone,
    })
}
