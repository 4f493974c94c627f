//! The canonical invariant region `C = {0 < ψ1 < ψ2 < 2π}` of one population
//! of three oscillators, the potential `V` on it, and numerical verification
//! of saddle connections inside invariant subspaces.
//!
//! With one neighbour in splay phase and the other synchronized, the free
//! population obeys `ψ̇ = X0 + r·Xr ± K·XK`: `+K` on `DψS` (splay predecessor)
//! and `−K` on `ψDS` (splay successor).

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::Rk4;
use crate::model::{Field, Params};
use crate::spectral::{
    equilibrium_point, jacobian_fd, label_distance, unstable_subspace, EquilibriumLabel, FD_STEP,
};

/// Exclusion radius around D and ∂C where `R` is indeterminate.
pub const EXCLUSION: f64 = 1e-3;
/// Centroid of C, the splay point.
pub const SPLAY: (f64, f64) = (TAU / 3.0, 2.0 * TAU / 3.0);

pub fn potential_v(psi1: f64, psi2: f64) -> f64 {
    (psi1 / 2.0).sin() * (psi2 / 2.0).sin() * ((psi2 - psi1) / 2.0).sin()
}

pub fn grad_v(psi1: f64, psi2: f64) -> [f64; 2] {
    let (a, b, c) = (psi1 / 2.0, psi2 / 2.0, (psi2 - psi1) / 2.0);
    [
        0.5 * b.sin() * (a.cos() * c.sin() - a.sin() * c.cos()),
        0.5 * a.sin() * (b.cos() * c.sin() + b.sin() * c.cos()),
    ]
}

pub fn q_ratio(psi1: f64, psi2: f64) -> f64 {
    -2.0 * (psi2 - psi1).cos() - 2.0 * psi2.cos() - 2.0 * psi1.cos() - 2.0
}

/// The three component fields of the free population's dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decomposition {
    pub x0: [f64; 2],
    pub xk: [f64; 2],
    pub xr: [f64; 2],
}

impl Decomposition {
    pub fn at(psi1: f64, psi2: f64) -> Self {
        let (p1, p2) = (psi1, psi2);
        let d = p2 - p1;
        Decomposition {
            x0: [(p1 - p2).cos() - p2.cos(), (p2 - p1).cos() - p1.cos()],
            xk: [
                (p1 - p2).sin() + p2.sin() + 2.0 * p1.sin(),
                (p2 - p1).sin() + 2.0 * p2.sin() + p1.sin(),
            ],
            xr: [
                (6.0 * d).sin() + (2.0 * d).sin()
                    - (6.0 * p2).sin()
                    - (2.0 * p2).sin()
                    - 2.0 * (6.0 * p1).sin()
                    - 2.0 * (2.0 * p1).sin(),
                (-6.0 * d).sin() + (-2.0 * d).sin()
                    - 2.0 * (6.0 * p2).sin()
                    - 2.0 * (2.0 * p2).sin()
                    - (6.0 * p1).sin()
                    - (2.0 * p1).sin(),
            ],
        }
    }

    pub fn combine(&self, r: f64, k: f64, sub: Subspace) -> [f64; 2] {
        let s = sub.k_sign();
        [
            self.x0[0] + r * self.xr[0] + s * k * self.xk[0],
            self.x0[1] + r * self.xr[1] + s * k * self.xk[1],
        ]
    }
}

fn check_region_params(params: &Params) -> Result<()> {
    if params.n != 3 || params.m != 3 {
        return Err(Error::UnsupportedN(params.n));
    }
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    if !(close(params.alpha2, FRAC_PI_2) && close(params.alpha4, PI)) || params.harmonics.is_some() {
        return Err(Error::OutOfDomainAngles);
    }
    if !close(params.a2, 1.0) {
        return Err(Error::InvalidParam {
            key: "a2",
            reason: "the region decomposition assumes a2 = 1".into(),
        });
    }
    Ok(())
}

/// `X0`, `XK`, `Xr` at a point; requires (M, N) = (3, 3), (α2, α4) = (π/2, π), a2 = 1.
pub fn field_decomposition(psi1: f64, psi2: f64, params: &Params) -> Result<Decomposition> {
    check_region_params(params)?;
    Ok(Decomposition::at(psi1, psi2))
}

/// The two invariant subspaces in which population 2 (resp. 1) moves freely
/// while the other populations sit at D and S.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Subspace {
    #[serde(rename = "DpsiS")]
    DPsiS,
    #[serde(rename = "psiDS")]
    PsiDS,
}

impl Subspace {
    pub fn k_sign(self) -> f64 {
        match self {
            Subspace::DPsiS => 1.0,
            Subspace::PsiDS => -1.0,
        }
    }

    /// Offset of the free block in the six reduced coordinates.
    pub fn offset(self) -> usize {
        match self {
            Subspace::DPsiS => 2,
            Subspace::PsiDS => 0,
        }
    }

    pub fn embed(self, psi1: f64, psi2: f64) -> Vec<f64> {
        let (d1, d2) = SPLAY;
        match self {
            Subspace::DPsiS => vec![d1, d2, psi1, psi2, 0.0, 0.0],
            Subspace::PsiDS => vec![psi1, psi2, d1, d2, 0.0, 0.0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Subspace::DPsiS => "DpsiS",
            Subspace::PsiDS => "psiDS",
        }
    }
}

/// `V̇ = ⟨∇V, ψ̇⟩` for the free population of the given subspace.
pub fn v_dot(psi1: f64, psi2: f64, r: f64, k: f64, sub: Subspace) -> f64 {
    let g = grad_v(psi1, psi2);
    let f = Decomposition::at(psi1, psi2).combine(r, k, sub);
    g[0] * f[0] + g[1] * f[1]
}

/// Distance to the nearest side of ∂C.
pub fn boundary_distance(psi1: f64, psi2: f64) -> f64 {
    psi1.min(TAU - psi2).min((psi2 - psi1) / std::f64::consts::SQRT_2)
}

pub fn splay_distance(psi1: f64, psi2: f64) -> f64 {
    (psi1 - SPLAY.0).hypot(psi2 - SPLAY.1)
}

/// Admissible for `R`: inside C and at least [`EXCLUSION`] from D and ∂C.
pub fn admissible(psi1: f64, psi2: f64) -> bool {
    boundary_distance(psi1, psi2) >= EXCLUSION && splay_distance(psi1, psi2) >= EXCLUSION
}

/// `R = −⟨∇V, Xr⟩ / ⟨∇V, XK⟩`.
pub fn r_ratio(psi1: f64, psi2: f64) -> Result<f64> {
    if !admissible(psi1, psi2) {
        return Err(Error::IndeterminatePoint(psi1, psi2));
    }
    let g = grad_v(psi1, psi2);
    let d = Decomposition::at(psi1, psi2);
    let num = g[0] * d.xr[0] + g[1] * d.xr[1];
    let den = g[0] * d.xk[0] + g[1] * d.xk[1];
    Ok(-num / den)
}

/// Cell centres of an `n × n` grid over `[0, 2π)²` lying inside C.
pub fn grid_points(n: usize) -> Vec<(f64, f64)> {
    let h = TAU / n as f64;
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let (p1, p2) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            if p1 < p2 {
                out.push((p1, p2));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RBounds {
    pub grid: usize,
    pub max: f64,
    pub min: f64,
    pub sup_abs: f64,
    pub argmax_abs: (f64, f64),
    pub admissible: usize,
    pub excluded: usize,
}

/// Extremes of `R` over the admissible cells of an `n × n` grid.
pub fn r_bounds(n: usize) -> Result<RBounds> {
    let pts = grid_points(n);
    if pts.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let values: Vec<Option<(f64, (f64, f64))>> = pts
        .par_iter()
        .map(|&(a, b)| r_ratio(a, b).ok().map(|v| (v, (a, b))))
        .collect();
    let mut out = RBounds {
        grid: n,
        max: f64::NEG_INFINITY,
        min: f64::INFINITY,
        sup_abs: 0.0,
        argmax_abs: (f64::NAN, f64::NAN),
        admissible: 0,
        excluded: 0,
    };
    for v in values {
        match v {
            Some((r, at)) => {
                out.admissible += 1;
                out.max = out.max.max(r);
                out.min = out.min.min(r);
                if r.abs() > out.sup_abs {
                    out.sup_abs = r.abs();
                    out.argmax_abs = at;
                }
            }
            None => out.excluded += 1,
        }
    }
    if out.admissible == 0 {
        return Err(Error::EmptyGrid);
    }
    Ok(out)
}

/// Doubles the grid from `n0` until `sup |R|` changes by less than 1%
/// (at most `max_refinements` times); returns every estimate.
pub fn r_sup_refined(n0: usize, max_refinements: usize) -> Result<Vec<RBounds>> {
    let mut out = vec![r_bounds(n0)?];
    for _ in 0..max_refinements {
        let prev = out.last().expect("nonempty").sup_abs;
        let next = r_bounds(out.last().expect("nonempty").grid * 2)?;
        let stable = ((next.sup_abs - prev) / prev).abs() < 0.01;
        out.push(next);
        if stable {
            break;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct PotentialRow {
    pub psi1: f64,
    pub psi2: f64,
    pub v: f64,
    pub q: f64,
    pub r: Option<f64>,
    pub vdot_dps: f64,
    pub vdot_pds: f64,
}

/// `V`, `Q`, `R` and both `V̇` over the grid cells inside C.
pub fn potential_map(n: usize, params: &Params) -> Result<Vec<PotentialRow>> {
    check_region_params(params)?;
    let pts = grid_points(n);
    if pts.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let (r, k) = (params.r, params.k);
    Ok(pts
        .par_iter()
        .map(|&(a, b)| PotentialRow {
            psi1: a,
            psi2: b,
            v: potential_v(a, b),
            q: q_ratio(a, b),
            r: r_ratio(a, b).ok(),
            vdot_dps: v_dot(a, b, r, k, Subspace::DPsiS),
            vdot_pds: v_dot(a, b, r, k, Subspace::PsiDS),
        })
        .collect())
}

/// A nontrivial equilibrium on the side `ψ1 = 0` of ∂C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryEquilibrium {
    pub subspace: Subspace,
    pub chi: f64,
    /// Eigenvalue along ∂C.
    pub tangential: f64,
    /// Eigenvalue pointing into C.
    pub transverse: f64,
}

impl BoundaryEquilibrium {
    pub fn attracting_within_boundary(&self) -> bool {
        self.tangential < 0.0
    }

    pub fn transversely_repelling(&self) -> bool {
        self.transverse > 0.0
    }
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fa < 0.0) == (fm < 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Boundary saddles on both subspaces. The side `ψ1 = 0` is invariant, and on
/// it `χ = ψ2` follows the restriction of the free population's field.
pub fn boundary_equilibria(params: &Params) -> Result<Vec<BoundaryEquilibrium>> {
    check_region_params(params)?;
    if !(params.k > 0.0 && params.r >= 0.0) {
        return Err(Error::InvalidParam {
            key: "K",
            reason: "boundary analysis needs K > 0 and r >= 0".into(),
        });
    }
    let reduced = Field::new(params)?.reduced()?;
    let mut out = Vec::with_capacity(2);
    for sub in [Subspace::DPsiS, Subspace::PsiDS] {
        let off = sub.offset();
        let block = |p: &[f64]| {
            let full = reduced.eval(&sub.embed(p[0], p[1]));
            vec![full[off], full[off + 1]]
        };
        let rate = |chi: f64| block(&[0.0, chi])[1];
        let samples = 4096;
        let margin = 1e-6;
        let h = (TAU - 2.0 * margin) / samples as f64;
        let mut roots = Vec::new();
        let mut prev = (margin, rate(margin));
        for i in 1..=samples {
            let x = margin + i as f64 * h;
            let fx = rate(x);
            if (prev.1 < 0.0) != (fx < 0.0) {
                roots.push(bisect(rate, prev.0, x, 1e-10));
            }
            prev = (x, fx);
        }
        if roots.len() != 1 {
            return Err(Error::BoundaryStructure(roots.len()));
        }
        let chi = roots[0];
        let jac = jacobian_fd(block, &[0.0, chi], FD_STEP);
        out.push(BoundaryEquilibrium {
            subspace: sub,
            chi,
            tangential: jac[(1, 1)],
            transverse: jac[(0, 0)],
        });
    }
    Ok(out)
}

/// Defaults for [`verify_connection`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConnectionOptions {
    pub tol: f64,
    pub t_max: f64,
    pub eps: f64,
    pub dt: f64,
    pub fan: usize,
    pub drift_tol: f64,
}

impl Default for ConnectionOptions {
    fn default() -> Self {
        ConnectionOptions {
            tol: 1e-6,
            t_max: 1e3,
            eps: 1e-4,
            dt: 1e-2,
            fan: 8,
            drift_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PathEvidence {
    pub angle: f64,
    pub arrival_time: f64,
    pub final_distance: f64,
    pub max_drift: f64,
    /// Minimum of the sign-corrected `V̇` outside the endpoint balls.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_certificate: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConnectionEvidence {
    pub from: EquilibriumLabel,
    pub to: EquilibriumLabel,
    pub unstable_dim: usize,
    pub paths: Vec<PathEvidence>,
}

impl ConnectionEvidence {
    /// All paths arrived and, where a certificate applies, `V` was monotone.
    pub fn certified(&self) -> bool {
        self.paths.iter().all(|p| p.v_certificate.map_or(true, |c| c > 0.0))
    }
}

/// Integrates the reduced dynamics from `from` nudged along its unstable
/// eigenspace and checks arrival at `to` inside the invariant subspace in
/// which the two labels differ by a single population.
pub fn verify_connection(
    from: &EquilibriumLabel,
    to: &EquilibriumLabel,
    params: &Params,
    opts: &ConnectionOptions,
) -> Result<ConnectionEvidence> {
    let (m, n) = (params.m, params.n);
    if from.len() != m || to.len() != m {
        return Err(Error::InvalidLabel(format!("{from} -> {to} for M = {m}")));
    }
    let reduced = Field::new(params)?.reduced()?;
    let b = n - 1;
    let start = equilibrium_point(from, n).into_vec();
    let jac = jacobian_fd(|x| reduced.eval(x), &start, FD_STEP);
    let basis = unstable_subspace(&jac)?;
    if basis.is_empty() {
        return Err(Error::NoUnstableDirection(from.to_string()));
    }
    let not_connecting = || Error::NotConnectingSubspace {
        from: from.to_string(),
        to: to.to_string(),
    };
    let differing: Vec<usize> = (0..m).filter(|&s| from.sites()[s] != to.sites()[s]).collect();
    if differing.len() != 1 {
        return Err(not_connecting());
    }
    let free = differing[0];
    let in_block = |i: usize| i / b == free;
    // Unstable eigenvectors must live in the free population's block.
    for v in &basis {
        let outside: f64 = v.iter().enumerate().filter(|(i, _)| !in_block(*i)).map(|(_, x)| x * x).sum();
        if outside.sqrt() > 1e-6 {
            return Err(not_connecting());
        }
    }
    let mut ortho: Vec<DVector<f64>> = Vec::new();
    for v in &basis {
        let mut w = v.map_with_location(|i, _, x| if in_block(i) { x } else { 0.0 });
        for u in &ortho {
            w -= u * u.dot(&w);
        }
        ortho.push(w.normalize());
    }
    let directions: Vec<(f64, DVector<f64>)> = match ortho.len() {
        1 => vec![(0.0, ortho[0].clone()), (PI, -&ortho[0])],
        _ => (0..opts.fan)
            .map(|j| {
                let a = TAU * (j as f64 + 0.5) / opts.fan as f64;
                (a, &ortho[0] * a.cos() + &ortho[1] * a.sin())
            })
            .collect(),
    };

    // V certificate for the N = 3 subspaces with one D and one S neighbour.
    let certificate = if n == 3 && m == 3 {
        let prev = from.sites()[(free + m - 1) % m];
        let next = from.sites()[(free + 1) % m];
        use crate::spectral::Site;
        match (prev, next) {
            (Site::D, Site::S) => Some(1.0),
            (Site::S, Site::D) => Some(-1.0),
            _ => None,
        }
    } else {
        None
    };

    let field = |x: &[f64], out: &mut [f64]| reduced.eval_into(x, out);
    let steps = (opts.t_max / opts.dt).ceil() as usize;
    let mut paths = Vec::with_capacity(directions.len());
    for (angle, dir) in directions {
        let mut x: Vec<f64> = start.iter().zip(dir.iter()).map(|(s, d)| s + opts.eps * d).collect();
        let mut stepper = Rk4::new(x.len());
        let mut fx = vec![0.0; x.len()];
        let mut max_drift: f64 = 0.0;
        let mut v_min = f64::INFINITY;
        let mut arrived = None;
        let mut dist = label_distance(&x, to, n);
        for step in 1..=steps {
            stepper.step(&field, &mut x, opts.dt);
            let t = step as f64 * opts.dt;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { step });
            }
            let drift = x
                .iter()
                .zip(&start)
                .enumerate()
                .filter(|(i, _)| !in_block(*i))
                .map(|(_, (a, s))| crate::model::angle_diff(*a, *s).abs())
                .fold(0.0, f64::max);
            max_drift = max_drift.max(drift);
            if drift > opts.drift_tol {
                return Err(Error::LeftSubspace { drift, t });
            }
            dist = label_distance(&x, to, n);
            if let Some(sign) = certificate {
                if dist > opts.tol && label_distance(&x, from, n) > opts.tol {
                    field(&x, &mut fx);
                    let p1 = crate::model::wrap_angle(x[free * b]);
                    let p2 = crate::model::wrap_angle(x[free * b + 1]);
                    let g = grad_v(p1, p2);
                    let vdot = g[0] * fx[free * b] + g[1] * fx[free * b + 1];
                    let sv = potential_v(p1, p2).signum();
                    v_min = v_min.min(sign * sv * vdot);
                }
            }
            if dist < opts.tol {
                arrived = Some(t);
                break;
            }
        }
        let Some(t) = arrived else {
            return Err(Error::TmaxExceeded {
                distance: dist,
                t: opts.t_max,
            });
        };
        paths.push(PathEvidence {
            angle,
            arrival_time: t,
            final_distance: dist,
            max_drift,
            v_certificate: certificate.map(|_| v_min),
        });
    }
    Ok(ConnectionEvidence {
        from: from.clone(),
        to: to.clone(),
        unstable_dim: basis.len(),
        paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn interior(rng: &mut ChaCha8Rng) -> (f64, f64) {
        loop {
            let a = rng.gen_range(0.0..TAU);
            let b = rng.gen_range(0.0..TAU);
            let (p1, p2) = if a < b { (a, b) } else { (b, a) };
            if admissible(p1, p2) {
                return (p1, p2);
            }
        }
    }

    #[test]
    fn potential_reference_values() {
        let (d1, d2) = SPLAY;
        assert!((potential_v(d1, d2) - (3f64.sqrt() / 2.0).powi(3)).abs() < 1e-12);
        for x in [0.3, 1.7, 4.0] {
            assert!(potential_v(0.0, x).abs() < 1e-15);
            assert!(potential_v(x, x).abs() < 1e-15);
            assert!(potential_v(x, TAU).abs() < 1e-15);
        }
        let n = 300;
        let h = TAU / n as f64;
        let best = grid_points(n)
            .into_iter()
            .max_by(|a, b| potential_v(a.0, a.1).total_cmp(&potential_v(b.0, b.1)))
            .unwrap();
        assert!((best.0 - d1).abs() <= h && (best.1 - d2).abs() <= h);
    }

    #[test]
    fn gradient_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let (a, b) = interior(&mut rng);
            let g = grad_v(a, b);
            let h = 1e-6;
            let da = (potential_v(a + h, b) - potential_v(a - h, b)) / (2.0 * h);
            let db = (potential_v(a, b + h) - potential_v(a, b - h)) / (2.0 * h);
            assert!((g[0] - da).abs() < 1e-8 && (g[1] - db).abs() < 1e-8);
        }
    }

    #[test]
    fn q_reference_values() {
        let (d1, d2) = SPLAY;
        assert!((q_ratio(d1, d2) - 1.0).abs() < 1e-12);
        assert_eq!(q_ratio(0.0, 0.0), -8.0);
        let max = grid_points(400).into_iter().map(|(a, b)| q_ratio(a, b)).fold(f64::MIN, f64::max);
        assert!(max <= 1.0 + 1e-9);
    }

    #[test]
    fn x0_conserves_v_and_vanishes_at_splay() {
        let d = Decomposition::at(SPLAY.0, SPLAY.1);
        assert!(d.x0[0].abs() < 1e-12 && d.x0[1].abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let (a, b) = interior(&mut rng);
            let g = grad_v(a, b);
            let x0 = Decomposition::at(a, b).x0;
            assert!((g[0] * x0[0] + g[1] * x0[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn xk_inner_product_identity() {
        // ⟨∇V, XK⟩ = V(ψ) + V(2ψ) = V(ψ)·(1 − Q(ψ)).
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (a, b) = interior(&mut rng);
            let g = grad_v(a, b);
            let xk = Decomposition::at(a, b).xk;
            let lhs = g[0] * xk[0] + g[1] * xk[1];
            assert!((lhs - (potential_v(a, b) + potential_v(2.0 * a, 2.0 * b))).abs() < 1e-12);
            assert!((lhs - potential_v(a, b) * (1.0 - q_ratio(a, b))).abs() < 1e-12);
        }
    }

    #[test]
    fn decomposition_matches_reduced_field() {
        let p = Params::new(3, 3).with_rk(0.01, 0.16);
        let red = Field::new(&p).unwrap().reduced().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for sub in [Subspace::DPsiS, Subspace::PsiDS] {
            let mut worst: f64 = 0.0;
            for _ in 0..100 {
                let (a, b) = interior(&mut rng);
                let f = red.eval(&sub.embed(a, b));
                let c = field_decomposition(a, b, &p).unwrap().combine(p.r, p.k, sub);
                let o = sub.offset();
                worst = worst.max((f[o] - c[0]).abs()).max((f[o + 1] - c[1]).abs());
                // The fixed populations do not move.
                for (i, v) in f.iter().enumerate() {
                    if i != o && i != o + 1 {
                        assert!(v.abs() < 1e-12);
                    }
                }
            }
            assert!(worst < 1e-10, "{sub:?}: {worst}");
        }
    }

    #[test]
    fn subspace_fields_differ_by_sign_of_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let (a, b) = interior(&mut rng);
            let d = Decomposition::at(a, b);
            let plus = d.combine(0.01, 0.16, Subspace::DPsiS);
            let minus = d.combine(0.01, 0.16, Subspace::PsiDS);
            for i in 0..2 {
                assert!((plus[i] - minus[i] - 0.32 * d.xk[i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn decomposition_rejects_other_angles() {
        let p = Params::new(3, 3).with_rk(0.01, 0.16).with_angles(1.0, PI);
        assert!(matches!(field_decomposition(1.0, 2.0, &p), Err(Error::OutOfDomainAngles)));
    }

    #[test]
    fn r_ratio_exclusion_and_symmetry() {
        assert!(matches!(r_ratio(SPLAY.0, SPLAY.1), Err(Error::IndeterminatePoint(..))));
        assert!(matches!(r_ratio(1e-4, 2.0), Err(Error::IndeterminatePoint(..))));
        assert!(matches!(r_ratio(1.0, 1.0 + 1e-4), Err(Error::IndeterminatePoint(..))));
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..500 {
            let (a, b) = interior(&mut rng);
            let r = r_ratio(a, b).unwrap();
            let m = r_ratio(TAU - b, TAU - a).unwrap();
            assert!((r - m).abs() < 1e-8 * (1.0 + r.abs()));
        }
    }

    #[test]
    fn v_dot_sign_follows_r() {
        let (r, k) = (0.01, 0.16);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let (a, b) = interior(&mut rng);
            let rr = r_ratio(a, b).unwrap();
            let vd = v_dot(a, b, r, k, Subspace::DPsiS);
            if k / r > rr + 1e-9 {
                assert!(vd > 0.0);
            } else if k / r < rr - 1e-9 {
                assert!(vd < 0.0);
            }
        }
    }

    #[test]
    fn boundary_saddle_near_closed_form() {
        let p0 = Params::new(3, 3).with_rk(0.0, 0.16);
        let b0 = boundary_equilibria(&p0).unwrap();
        assert!((b0[0].chi - 2.0 * 0.48f64.atan()).abs() < 1e-9);
        assert!((b0[1].chi - (TAU - 2.0 * 0.48f64.atan())).abs() < 1e-9);
        let p = Params::new(3, 3).with_rk(0.01, 0.16);
        let b = boundary_equilibria(&p).unwrap();
        let dps = b.iter().find(|e| e.subspace == Subspace::DPsiS).unwrap();
        assert!((dps.chi - 2.0 * 0.48f64.atan()).abs() < 0.05);
        assert!(dps.attracting_within_boundary() && dps.transversely_repelling());
        let pds = b.iter().find(|e| e.subspace == Subspace::PsiDS).unwrap();
        assert!(!pds.attracting_within_boundary() && !pds.transversely_repelling());
    }

    #[test]
    fn n2_connection_and_missing_instability() {
        let p = Params::new(3, 2).with_rk(0.05, 0.15);
        let opts = ConnectionOptions {
            t_max: 500.0,
            ..Default::default()
        };
        let ev = verify_connection(&"DSS".parse().unwrap(), &"DDS".parse().unwrap(), &p, &opts).unwrap();
        assert_eq!(ev.unstable_dim, 1);
        assert_eq!(ev.paths.len(), 2);
        let bad = Params::new(3, 2).with_rk(0.5, 0.7);
        let err = verify_connection(&"DSS".parse().unwrap(), &"DDS".parse().unwrap(), &bad, &opts).unwrap_err();
        assert!(matches!(err, Error::NoUnstableDirection(_)));
    }

    #[test]
    fn connection_requires_single_population_change() {
        let p = Params::new(3, 2).with_rk(0.05, 0.15);
        let err = verify_connection(
            &"DSS".parse().unwrap(),
            &"SDD".parse().unwrap(),
            &p,
            &ConnectionOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotConnectingSubspace { .. }));
    }
}
