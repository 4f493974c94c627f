//! Network parameters, coupling functions and the deterministic vector fields.
//!
//! Oscillator `(σ, k)` (zero-based here) lives at flat index `σ·N + k`. The
//! phase velocity is
//!
//! ```text
//! θ̇_{σ,k} = ω + Σ_{j≠k} [ g2(θ_{σ,j} − θ_{σ,k})
//!                        − K·G4(θ_{σ−1}; θ_{σ,j} − θ_{σ,k})
//!                        + K·G4(θ_{σ+1}; θ_{σ,j} − θ_{σ,k}) ]
//!           + δ_sym·Y^sym_{σ,k} + δ_asym·Y^asym_{σ,k}
//! ```
//!
//! with population indices taken cyclically. Because `g4(φ) = sin(φ + α4)` is a
//! single sinusoid, `G4(θ_τ; φ) = R_τ²·g4(φ)` where `R_τ` is the Kuramoto order
//! parameter of population τ; [`Field`] uses that identity while [`eval_big_g4`]
//! keeps the literal double sum.

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Signed distance between two angles, in `(−π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    if d > std::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}

/// Intrinsic frequency ω.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Omega {
    /// ω = −(N−1)·g2(0): synchronized, uncoupled populations appear stationary.
    #[default]
    CoRotating,
    Value(f64),
}

impl Serialize for Omega {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Omega::CoRotating => s.serialize_str("co-rotating"),
            Omega::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Omega {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Omega::Value(v)),
            Raw::Str(s) if s == "co-rotating" => Ok(Omega::CoRotating),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "omega must be a number or \"co-rotating\", got \"{s}\""
            ))),
        }
    }
}

/// One term `amplitude · sin(order·φ + phase)` of an explicit coupling function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Harmonic {
    pub amplitude: f64,
    pub order: u32,
    pub phase: f64,
}

impl Harmonic {
    #[inline]
    pub fn eval(&self, phi: f64) -> f64 {
        self.amplitude * (self.order as f64 * phi + self.phase).sin()
    }

    #[inline]
    pub fn derivative(&self, phi: f64) -> f64 {
        let q = self.order as f64;
        self.amplitude * q * (q * phi + self.phase).cos()
    }
}

/// Full parameterization of an M×N network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha2: f64,
    pub alpha4: f64,
    pub r: f64,
    /// Weight of the second harmonic in the N = 3 preset.
    pub a2: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub omega: Omega,
    pub delta_sym: f64,
    pub delta_asym: f64,
    pub eta: f64,
    /// Overrides the N-keyed preset for g2 when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harmonics: Option<Vec<Harmonic>>,
}

impl Params {
    /// Defaults: (α2, α4) = (π/2, π), r = K = 0, a2 = 1, co-rotating frame, no
    /// symmetry breaking, no noise.
    pub fn new(m: usize, n: usize) -> Self {
        Params {
            m,
            n,
            alpha2: std::f64::consts::FRAC_PI_2,
            alpha4: std::f64::consts::PI,
            r: 0.0,
            a2: 1.0,
            k: 0.0,
            omega: Omega::CoRotating,
            delta_sym: 0.0,
            delta_asym: 0.0,
            eta: 0.0,
            harmonics: None,
        }
    }

    pub fn with_rk(mut self, r: f64, k: f64) -> Self {
        self.r = r;
        self.k = k;
        self
    }

    pub fn with_angles(mut self, alpha2: f64, alpha4: f64) -> Self {
        self.alpha2 = alpha2;
        self.alpha4 = alpha4;
        self
    }

    pub fn dim(&self) -> usize {
        self.m * self.n
    }

    pub fn reduced_dim(&self) -> usize {
        self.m * (self.n - 1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key, reason: &str| {
            Err(Error::InvalidParam {
                key,
                reason: reason.to_string(),
            })
        };
        if self.m < 2 {
            return bad("M", "must be at least 2");
        }
        if self.n < 2 {
            return bad("N", "must be at least 2");
        }
        if !(self.k.is_finite() && self.k >= 0.0) {
            return bad("K", "must be finite and non-negative");
        }
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return bad("eta", "must be finite and non-negative");
        }
        for (key, v) in [
            ("alpha2", self.alpha2),
            ("alpha4", self.alpha4),
            ("r", self.r),
            ("a2", self.a2),
            ("delta_sym", self.delta_sym),
            ("delta_asym", self.delta_asym),
        ] {
            if !v.is_finite() {
                return bad(key, "must be finite");
            }
        }
        if let Omega::Value(w) = self.omega {
            if !w.is_finite() {
                return bad("omega", "must be finite");
            }
        }
        match &self.harmonics {
            Some(h) => {
                if h.iter()
                    .any(|t| !(t.amplitude.is_finite() && t.phase.is_finite()))
                {
                    return bad("harmonics", "entries must be finite");
                }
            }
            None if !matches!(self.n, 2 | 3) => return Err(Error::UnsupportedPreset(self.n)),
            None => {}
        }
        Ok(())
    }

    /// Harmonic expansion of g2 actually used by the vector field.
    pub fn g2_harmonics(&self) -> Result<Vec<Harmonic>> {
        if let Some(h) = &self.harmonics {
            return Ok(h.clone());
        }
        let a = self.alpha2;
        let first = Harmonic {
            amplitude: 1.0,
            order: 1,
            phase: a,
        };
        match self.n {
            2 => Ok(vec![
                first,
                Harmonic {
                    amplitude: -self.r,
                    order: 2,
                    phase: 2.0 * a,
                },
            ]),
            3 => Ok(vec![
                first,
                Harmonic {
                    amplitude: -self.r * self.a2,
                    order: 2,
                    phase: 2.0 * a,
                },
                Harmonic {
                    amplitude: -self.r,
                    order: 6,
                    phase: 6.0 * a,
                },
            ]),
            n => Err(Error::UnsupportedPreset(n)),
        }
    }

    /// Numeric value of ω.
    pub fn omega_value(&self) -> Result<f64> {
        match self.omega {
            Omega::Value(w) => Ok(w),
            Omega::CoRotating => {
                let g0: f64 = self.g2_harmonics()?.iter().map(|h| h.eval(0.0)).sum();
                Ok(-(self.n as f64 - 1.0) * g0)
            }
        }
    }
}

/// Preset within-population coupling function, keyed by N.
pub fn eval_g2(phi: f64, params: &Params) -> Result<f64> {
    let x = phi + params.alpha2;
    match params.n {
        2 => Ok(x.sin() - params.r * (2.0 * x).sin()),
        3 => Ok(x.sin() - params.r * (params.a2 * (2.0 * x).sin() + (6.0 * x).sin())),
        n => Err(Error::UnsupportedPreset(n)),
    }
}

/// Between-population coupling function `g4(φ) = sin(φ + α4)`.
pub fn eval_g4(phi: f64, params: &Params) -> f64 {
    (phi + params.alpha4).sin()
}

/// Nonpairwise interaction `G4(θ_τ; φ) = (1/N²) Σ_{m,n} g4(θ_{τ,m} − θ_{τ,n} + φ)`,
/// diagonal terms included.
pub fn eval_big_g4(theta_tau: &[f64], phi: f64, params: &Params) -> Result<f64> {
    if theta_tau.len() != params.n {
        return Err(Error::LengthMismatch {
            expected: params.n,
            got: theta_tau.len(),
        });
    }
    let n2 = (params.n * params.n) as f64;
    let mut acc = 0.0;
    for &tm in theta_tau {
        for &tn in theta_tau {
            acc += eval_g4(tm - tn + phi, params);
        }
    }
    Ok(acc / n2)
}

/// A point on the MN-torus, each angle in `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState(Vec<f64>);

impl PhaseState {
    pub fn new(theta: Vec<f64>) -> Self {
        PhaseState(theta.into_iter().map(wrap_angle).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Per-population phase differences `ψ_{σ,k} = θ_{σ,k+1} − θ_{σ,1}`, wrapped.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState(Vec<f64>);

impl ReducedState {
    pub fn new(psi: Vec<f64>) -> Self {
        ReducedState(psi.into_iter().map(wrap_angle).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Representative lift with `θ_{σ,1} = 0` for every population.
pub fn lift(psi: &ReducedState, n: usize) -> PhaseState {
    PhaseState(lift_raw(psi.as_slice(), n))
}

pub fn reduce(theta: &PhaseState, n: usize) -> ReducedState {
    ReducedState::new(reduce_raw(theta.as_slice(), n))
}

pub(crate) fn lift_raw(psi: &[f64], n: usize) -> Vec<f64> {
    let mut theta = Vec::with_capacity(psi.len() / (n - 1) * n);
    for block in psi.chunks(n - 1) {
        theta.push(0.0);
        theta.extend_from_slice(block);
    }
    theta
}

pub(crate) fn reduce_raw(theta: &[f64], n: usize) -> Vec<f64> {
    let mut psi = Vec::with_capacity(theta.len() / n * (n - 1));
    for block in theta.chunks(n) {
        psi.extend(block[1..].iter().map(|&t| t - block[0]));
    }
    psi
}

/// Precomputed deterministic vector field of the full network.
#[derive(Debug, Clone)]
pub struct Field {
    m: usize,
    n: usize,
    omega: f64,
    k: f64,
    alpha4: f64,
    delta_sym: f64,
    delta_asym: f64,
    g2: Vec<Harmonic>,
}

impl Field {
    pub fn new(params: &Params) -> Result<Self> {
        params.validate()?;
        Ok(Field {
            m: params.m,
            n: params.n,
            omega: params.omega_value()?,
            k: params.k,
            alpha4: params.alpha4,
            delta_sym: params.delta_sym,
            delta_asym: params.delta_asym,
            g2: params.g2_harmonics()?,
        })
    }

    pub fn dim(&self) -> usize {
        self.m * self.n
    }

    pub fn populations(&self) -> usize {
        self.m
    }

    pub fn per_population(&self) -> usize {
        self.n
    }

    pub fn has_symmetry_breaking(&self) -> bool {
        self.delta_sym != 0.0 || self.delta_asym != 0.0
    }

    #[inline]
    fn g2(&self, phi: f64) -> f64 {
        self.g2.iter().map(|h| h.eval(phi)).sum()
    }

    /// Writes `dθ/dt` into `out`. No wrapping is applied to `theta`.
    pub fn eval_into(&self, theta: &[f64], out: &mut [f64]) {
        let (m, n) = (self.m, self.n);
        debug_assert_eq!(theta.len(), m * n);
        debug_assert_eq!(out.len(), m * n);
        let inv_n2 = 1.0 / (n * n) as f64;
        let mut r2 = vec![0.0; m];
        let (mut gc, mut gs) = (0.0, 0.0);
        for s in 0..m {
            let (mut c, mut sn) = (0.0, 0.0);
            for &t in &theta[s * n..(s + 1) * n] {
                c += t.cos();
                sn += t.sin();
            }
            gc += c;
            gs += sn;
            r2[s] = (c * c + sn * sn) * inv_n2;
        }
        let mn = (m * n) as f64;
        for s in 0..m {
            let prev = r2[(s + m - 1) % m];
            let next = r2[(s + 1) % m];
            let coupling = self.k * (next - prev);
            let pop = &theta[s * n..(s + 1) * n];
            for k in 0..n {
                let tk = pop[k];
                let mut rate = self.omega;
                for (j, &tj) in pop.iter().enumerate() {
                    if j == k {
                        continue;
                    }
                    let d = tj - tk;
                    rate += self.g2(d) + coupling * (d + self.alpha4).sin();
                }
                if self.delta_sym != 0.0 {
                    rate += self.delta_sym * (gs * tk.cos() - gc * tk.sin()) / mn;
                }
                if self.delta_asym != 0.0 {
                    let idx = s * n + k;
                    let nxt = theta[(idx + 1) % (m * n)];
                    rate += self.delta_asym * (nxt - tk).sin() / mn;
                }
                out[s * n + k] = rate;
            }
        }
    }

    pub fn eval(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; theta.len()];
        self.eval_into(theta, &mut out);
        out
    }

    /// Phase-difference dynamics obtained by lifting and differencing.
    pub fn reduced(&self) -> Result<ReducedField> {
        if self.has_symmetry_breaking() {
            return Err(Error::ReductionUnavailable);
        }
        Ok(ReducedField {
            field: self.clone(),
        })
    }
}

/// Vector field on the M(N−1)-torus of phase differences.
#[derive(Debug, Clone)]
pub struct ReducedField {
    field: Field,
}

impl ReducedField {
    pub fn dim(&self) -> usize {
        self.field.m * (self.field.n - 1)
    }

    pub fn full(&self) -> &Field {
        &self.field
    }

    pub fn eval(&self, psi: &[f64]) -> Vec<f64> {
        let n = self.field.n;
        let theta = lift_raw(psi, n);
        let f = self.field.eval(&theta);
        let mut out = Vec::with_capacity(psi.len());
        for block in f.chunks(n) {
            out.extend(block[1..].iter().map(|&v| v - block[0]));
        }
        out
    }

    pub fn eval_into(&self, psi: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.eval(psi));
    }
}

/// `dθ/dt` at `theta`, deterministic part only.
pub fn full_field(theta: &PhaseState, params: &Params) -> Result<Vec<f64>> {
    let field = Field::new(params)?;
    if theta.len() != field.dim() {
        return Err(Error::LengthMismatch {
            expected: field.dim(),
            got: theta.len(),
        });
    }
    Ok(field.eval(theta.as_slice()))
}

/// `dψ/dt` at `psi`; requires δ_sym = δ_asym = 0.
pub fn reduced_field(psi: &ReducedState, params: &Params) -> Result<Vec<f64>> {
    let field = Field::new(params)?.reduced()?;
    if psi.len() != field.dim() {
        return Err(Error::LengthMismatch {
            expected: field.dim(),
            got: psi.len(),
        });
    }
    Ok(field.eval(psi.as_slice()))
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "M={} N={} alpha2={} alpha4={} r={} K={}",
            self.m, self.n, self.alpha2, self.alpha4, self.r, self.k
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_theta(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| rng.gen_range(0.0..TAU)).collect()
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn g2_presets() {
        let p2 = Params::new(3, 2).with_rk(0.05, 0.0);
        assert!((eval_g2(0.0, &p2).unwrap() - 1.0).abs() < 1e-15);
        let p2 = Params::new(3, 2).with_rk(0.37, 0.0);
        assert!((eval_g2(PI, &p2).unwrap() + 1.0).abs() < 1e-14);
        let p3 = Params::new(3, 3).with_rk(0.01, 0.0);
        assert!((eval_g2(0.0, &p3).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(
            eval_g2(0.0, &Params::new(3, 5)),
            Err(Error::UnsupportedPreset(5))
        );
    }

    #[test]
    fn g2_harmonic_list_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [2, 3] {
            for _ in 0..50 {
                let mut p = Params::new(3, n).with_rk(rng.gen_range(0.0..0.5), 0.0);
                p.alpha2 = rng.gen_range(0.0..TAU);
                p.a2 = rng.gen_range(-2.0..2.0);
                let h = p.g2_harmonics().unwrap();
                let phi = rng.gen_range(-10.0..10.0);
                let via_list: f64 = h.iter().map(|t| t.eval(phi)).sum();
                assert!((via_list - eval_g2(phi, &p).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn g4_values() {
        let p = Params::new(3, 2);
        assert!(eval_g4(0.0, &p).abs() < 1e-15);
        assert!((eval_g4(FRAC_PI_2, &p) + 1.0).abs() < 1e-15);
        let p0 = Params::new(3, 2).with_angles(FRAC_PI_2, 0.0);
        assert!((eval_g4(FRAC_PI_2, &p0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn big_g4_examples() {
        let p3 = Params::new(3, 3);
        let splay = [0.0, TAU / 3.0, 2.0 * TAU / 3.0];
        for phi in [0.0, 0.3, 2.0, -1.0] {
            assert!(eval_big_g4(&splay, phi, &p3).unwrap().abs() < 1e-15);
            let sync = [1.2, 1.2, 1.2];
            assert!((eval_big_g4(&sync, phi, &p3).unwrap() - eval_g4(phi, &p3)).abs() < 1e-15);
        }
        let p2 = Params::new(3, 2);
        // (1/4)(2·g4(π/2) + g4(3π/2) + g4(−π/2)) = (1/4)(−2 + 1 + 1)
        let v = eval_big_g4(&[0.0, PI], FRAC_PI_2, &p2).unwrap();
        assert!(v.abs() < 1e-15);
        assert!(matches!(
            eval_big_g4(&[0.0, 1.0], 0.0, &p3),
            Err(Error::LengthMismatch { .. })
        ));
    }

    /// Literal transcription of the network equations, O(M·N⁴).
    fn field_by_definition(theta: &[f64], p: &Params) -> Vec<f64> {
        let (m, n) = (p.m, p.n);
        let omega = p.omega_value().unwrap();
        let g2 = |x: f64| -> f64 { p.g2_harmonics().unwrap().iter().map(|h| h.eval(x)).sum() };
        let mn = (m * n) as f64;
        let mut out = vec![0.0; m * n];
        for s in 0..m {
            let prev = &theta[((s + m - 1) % m) * n..((s + m - 1) % m + 1) * n];
            let next = &theta[((s + 1) % m) * n..((s + 1) % m + 1) * n];
            for k in 0..n {
                let tk = theta[s * n + k];
                let mut v = omega;
                for j in 0..n {
                    if j == k {
                        continue;
                    }
                    let d = theta[s * n + j] - tk;
                    v += g2(d) - p.k * eval_big_g4(prev, d, p).unwrap()
                        + p.k * eval_big_g4(next, d, p).unwrap();
                }
                let ysym: f64 = theta.iter().map(|&t| (t - tk).sin()).sum::<f64>() / mn;
                let idx = s * n + k;
                let yasym = (theta[(idx + 1) % (m * n)] - tk).sin() / mn;
                out[idx] = v + p.delta_sym * ysym + p.delta_asym * yasym;
            }
        }
        out
    }

    #[test]
    fn fast_field_matches_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (m, n) in [(3, 2), (3, 3), (4, 3), (2, 2)] {
            for _ in 0..20 {
                let mut p = Params::new(m, n).with_rk(rng.gen_range(0.0..0.3), rng.gen_range(0.0..1.0));
                p.alpha2 = rng.gen_range(0.0..TAU);
                p.alpha4 = rng.gen_range(0.0..TAU);
                p.delta_sym = rng.gen_range(0.0..0.2);
                p.delta_asym = rng.gen_range(0.0..0.2);
                let th = random_theta(&mut rng, m * n);
                let fast = Field::new(&p).unwrap().eval(&th);
                let slow = field_by_definition(&th, &p);
                assert!(max_abs_diff(&fast, &slow) < 1e-12);
            }
        }
    }

    #[test]
    fn sss_is_stationary_in_corotating_frame() {
        let p = Params::new(3, 3).with_rk(0.01, 0.0);
        let f = full_field(&PhaseState::new(vec![0.0; 9]), &p).unwrap();
        assert!(f.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn dss_rates_uncoupled() {
        let p = Params::new(3, 3).with_rk(0.01, 0.0);
        let th = PhaseState::new(vec![0.0, TAU / 3.0, 2.0 * TAU / 3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let f = full_field(&th, &p).unwrap();
        for v in &f[..3] {
            assert!((v + 3.0).abs() < 1e-12, "{v}");
        }
        for v in &f[3..] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn generic_n_needs_harmonics() {
        let mut p = Params::new(3, 5);
        assert_eq!(p.validate(), Err(Error::UnsupportedPreset(5)));
        p.harmonics = Some(vec![Harmonic {
            amplitude: 1.0,
            order: 1,
            phase: FRAC_PI_2,
        }]);
        let f = full_field(&PhaseState::new(vec![0.0; 15]), &p).unwrap();
        assert!(f.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = Params::new(1, 2);
        assert!(matches!(p.validate(), Err(Error::InvalidParam { key: "M", .. })));
        p = Params::new(3, 2);
        p.k = -0.1;
        assert!(matches!(p.validate(), Err(Error::InvalidParam { key: "K", .. })));
        p = Params::new(3, 2);
        p.eta = -1.0;
        assert!(matches!(p.validate(), Err(Error::InvalidParam { key: "eta", .. })));
        p = Params::new(3, 2);
        p.r = f64::NAN;
        assert!(matches!(p.validate(), Err(Error::InvalidParam { key: "r", .. })));
    }

    /// Closed-form N = 2 phase-difference dynamics, with
    /// ĝ(x) = (g(−x) − g(x))/2.
    fn reduced_n2_closed_form(psi: &[f64], p: &Params) -> Vec<f64> {
        let m = psi.len();
        let g2 = |x: f64| eval_g2(x, p).unwrap();
        let g4 = |x: f64| eval_g4(x, p);
        let hat2 = |x: f64| 0.5 * (g2(-x) - g2(x));
        let hat4 = |x: f64| 0.5 * (g4(-x) - g4(x));
        (0..m)
            .map(|s| {
                let y = psi[s];
                let prev = psi[(s + m - 1) % m];
                let next = psi[(s + 1) % m];
                2.0 * hat2(y) - 0.5 * p.k * (hat4(prev + y) + hat4(y - prev))
                    + 0.5 * p.k * (hat4(next + y) + hat4(y - next))
            })
            .collect()
    }

    #[test]
    fn reduced_n2_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let mut p = Params::new(3, 2).with_rk(rng.gen_range(0.0..0.6), rng.gen_range(0.0..1.0));
            p.alpha2 = rng.gen_range(0.0..TAU);
            p.alpha4 = rng.gen_range(0.0..TAU);
            let psi = ReducedState::new(random_theta(&mut rng, 3));
            let a = reduced_field(&psi, &p).unwrap();
            let b = reduced_n2_closed_form(psi.as_slice(), &p);
            assert!(max_abs_diff(&a, &b) < 1e-12);
        }
    }

    /// With K⁻ = K⁺ the diagonal terms of G4 cancel, leaving the two-oscillator
    /// form built from G̃4(θ_τ; φ) = ¼(g4(θ_{τ,1} − θ_{τ,2} + φ) + g4(θ_{τ,2} − θ_{τ,1} + φ)).
    #[test]
    fn n2_full_field_matches_two_oscillator_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let mut p = Params::new(3, 2).with_rk(rng.gen_range(0.0..0.6), rng.gen_range(0.0..1.0));
            p.alpha2 = rng.gen_range(0.0..TAU);
            p.alpha4 = rng.gen_range(0.0..TAU);
            let th = random_theta(&mut rng, 6);
            let omega = p.omega_value().unwrap();
            let gt = |tau: usize, phi: f64| {
                let (a, b) = (th[2 * tau], th[2 * tau + 1]);
                0.25 * (eval_g4(a - b + phi, &p) + eval_g4(b - a + phi, &p))
            };
            let mut expect = vec![0.0; 6];
            for s in 0..3 {
                let (prev, next) = ((s + 2) % 3, (s + 1) % 3);
                let d = th[2 * s + 1] - th[2 * s];
                expect[2 * s] = omega + eval_g2(d, &p).unwrap() - p.k * gt(prev, d) + p.k * gt(next, d);
                expect[2 * s + 1] =
                    omega + eval_g2(-d, &p).unwrap() - p.k * gt(prev, -d) + p.k * gt(next, -d);
            }
            let got = full_field(&PhaseState::new(th.clone()), &p).unwrap();
            assert!(max_abs_diff(&got, &expect) < 1e-12);
        }
    }

    #[test]
    fn reduced_vanishes_at_known_equilibria() {
        let p = Params::new(3, 3).with_rk(0.01, 0.16);
        let dss = ReducedState::new(vec![TAU / 3.0, 2.0 * TAU / 3.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(reduced_field(&dss, &p).unwrap().iter().all(|v| v.abs() < 1e-12));
        let p2 = Params::new(3, 2).with_rk(0.05, 0.15);
        let ddd = ReducedState::new(vec![PI; 3]);
        assert!(reduced_field(&ddd, &p2).unwrap().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn reduction_requires_symmetric_field() {
        let mut p = Params::new(3, 2);
        p.delta_sym = 0.1;
        let psi = ReducedState::new(vec![0.0; 3]);
        assert_eq!(reduced_field(&psi, &p), Err(Error::ReductionUnavailable));
    }

    #[test]
    fn lift_and_reduce() {
        let zero = ReducedState::new(vec![0.0; 6]);
        assert_eq!(lift(&zero, 3).as_slice(), &[0.0; 9]);
        let single = ReducedState::new(vec![PI]);
        assert_eq!(lift(&single, 2).as_slice(), &[0.0, PI]);
        let th = PhaseState::new(vec![0.1, 0.5, 2.0, 3.0, 4.0, 5.5]);
        let shifted = PhaseState::new(vec![1.1, 1.5, 3.0, 2.0, 3.0, 4.5]);
        let a = reduce(&th, 3);
        let b = reduce(&shifted, 3);
        assert!(max_abs_diff(a.as_slice(), b.as_slice()) < 1e-12);
    }

    #[test]
    fn wrap_stays_in_range() {
        for x in [-1e-20, -TAU, TAU, 0.0, 7.0 * TAU + 0.1, -3.0] {
            let w = wrap_angle(x);
            assert!((0.0..TAU).contains(&w), "{x} -> {w}");
        }
    }
}
