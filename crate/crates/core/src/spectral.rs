//! Relative equilibria labelled by S/D words, their linearizations, and the
//! closed-form spectra available for three populations of two or three
//! oscillators.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{angle_diff, lift_raw, Field, Params, ReducedState};

/// Finite-difference step for Jacobians.
pub const FD_STEP: f64 = 1e-6;
/// Eigenvalues with modulus below this count as group-orbit zeros.
pub const ZERO_TOL: f64 = 1e-8;
/// Numeric eigenvalues closer than this are merged into one with multiplicity.
pub const CLUSTER_TOL: f64 = 1e-6;

/// State of a single population at a relative equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Site {
    /// Full phase synchrony.
    S,
    /// Splay phase.
    D,
}

/// Word over {S, D}, one letter per population, e.g. `DSS`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EquilibriumLabel(Vec<Site>);

impl EquilibriumLabel {
    pub fn new(sites: Vec<Site>) -> Self {
        EquilibriumLabel(sites)
    }

    pub fn sites(&self) -> &[Site] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn splay_count(&self) -> usize {
        self.0.iter().filter(|s| **s == Site::D).count()
    }

    /// Image under the cyclic population shift σ → σ + `by`.
    pub fn rotate(&self, by: usize) -> Self {
        let m = self.0.len();
        let mut out = self.0.clone();
        for (i, s) in self.0.iter().enumerate() {
            out[(i + by) % m] = *s;
        }
        EquilibriumLabel(out)
    }

    /// Lexicographically smallest rotation, used to identify Z_M orbits.
    pub fn orbit_representative(&self) -> Self {
        (0..self.0.len().max(1))
            .map(|k| self.rotate(k))
            .min_by_key(|l| l.to_string())
            .unwrap_or_else(|| self.clone())
    }
}

impl FromStr for EquilibriumLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let sites = s
            .chars()
            .map(|c| match c {
                'S' | 's' => Ok(Site::S),
                'D' | 'd' => Ok(Site::D),
                _ => Err(Error::InvalidLabel(s.to_string())),
            })
            .collect::<Result<Vec<_>>>()?;
        if sites.is_empty() {
            return Err(Error::InvalidLabel(s.to_string()));
        }
        Ok(EquilibriumLabel(sites))
    }
}

impl fmt::Display for EquilibriumLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            f.write_str(match s {
                Site::S => "S",
                Site::D => "D",
            })?;
        }
        Ok(())
    }
}

impl Serialize for EquilibriumLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// The cycle visiting `D` at population 1, then spreading and retreating
/// around the ring: `DSS, DDS, SDS, SDD, SSD, DSD` for three populations.
pub fn cycle_labels(m: usize) -> Vec<EquilibriumLabel> {
    let mut out = Vec::with_capacity(2 * m);
    for s in 0..m {
        let mut single = vec![Site::S; m];
        single[s] = Site::D;
        out.push(EquilibriumLabel(single.clone()));
        single[(s + 1) % m] = Site::D;
        out.push(EquilibriumLabel(single));
    }
    out
}

/// Reduced coordinates of a labelled equilibrium: S → zeros, D → 2πk/N.
pub fn equilibrium_point(label: &EquilibriumLabel, n: usize) -> ReducedState {
    let mut psi = Vec::with_capacity(label.len() * (n - 1));
    for site in label.sites() {
        for k in 1..n {
            psi.push(match site {
                Site::S => 0.0,
                Site::D => TAU * k as f64 / n as f64,
            });
        }
    }
    ReducedState::new(psi)
}

fn permutations(items: &[f64]) -> Vec<Vec<f64>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Torus distance from `psi` to the group orbit of the labelled equilibrium,
/// allowing any ordering of the splay phases within a D population.
pub fn label_distance(psi: &[f64], label: &EquilibriumLabel, n: usize) -> f64 {
    let splays = permutations(
        &(1..n)
            .map(|k| TAU * k as f64 / n as f64)
            .collect::<Vec<_>>(),
    );
    let mut total = 0.0;
    for (block, site) in psi.chunks(n - 1).zip(label.sites()) {
        let d2 = match site {
            Site::S => block.iter().map(|&x| angle_diff(x, 0.0).powi(2)).sum::<f64>(),
            Site::D => splays
                .iter()
                .map(|target| {
                    block
                        .iter()
                        .zip(target)
                        .map(|(&x, &t)| angle_diff(x, t).powi(2))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min),
        };
        total += d2;
    }
    total.sqrt()
}

/// Central-difference Jacobian `J_ij = (f_i(x + h e_j) − f_i(x − h e_j)) / 2h`.
pub fn jacobian_fd<F>(f: F, x: &[f64], h: f64) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = x.len();
    let m = f(x).len();
    let mut jac = DMatrix::zeros(m, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        xp[j] = x[j] + h;
        let fp = f(&xp);
        xp[j] = x[j] - h;
        let fm = f(&xp);
        xp[j] = x[j];
        for i in 0..m {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

/// All eigenvalues of a small dense real matrix, with algebraic multiplicity.
pub fn eig_small(matrix: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if matrix.nrows() != matrix.ncols() {
        return Err(Error::LengthMismatch {
            expected: matrix.nrows(),
            got: matrix.ncols(),
        });
    }
    let schur = Schur::try_new(matrix.clone(), f64::EPSILON, 10_000).ok_or(Error::EigenNoConvergence)?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|c| Complex64::new(c.re, c.im))
        .collect())
}

/// An eigenvalue and its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eig {
    pub re: f64,
    pub im: f64,
    pub mult: usize,
}

impl Eig {
    pub fn new(re: f64, im: f64, mult: usize) -> Self {
        Eig { re, im, mult }
    }

    fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

fn sort_eigs(eigs: &mut [Eig]) {
    eigs.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Groups eigenvalues lying within `tol` of a cluster's first member.
pub fn cluster(values: &[Complex64], tol: f64) -> Vec<Eig> {
    let mut clusters: Vec<(Complex64, Complex64, usize)> = Vec::new();
    for &v in values {
        match clusters.iter_mut().find(|(anchor, _, _)| (anchor - v).norm() < tol) {
            Some((_, sum, count)) => {
                *sum += v;
                *count += 1;
            }
            None => clusters.push((v, v, 1)),
        }
    }
    let mut out: Vec<Eig> = clusters
        .into_iter()
        .map(|(_, sum, count)| {
            let mean = sum / count as f64;
            Eig::new(mean.re, mean.im, count)
        })
        .collect();
    sort_eigs(&mut out);
    out
}

fn expand(eigs: &[Eig]) -> Vec<Complex64> {
    eigs.iter()
        .flat_map(|e| std::iter::repeat(e.value()).take(e.mult))
        .collect()
}

/// Largest pairing error after greedily matching two spectra with
/// multiplicity; infinite when the total multiplicities differ.
pub fn spectrum_mismatch(a: &[Eig], b: &[Eig]) -> f64 {
    let xa = expand(a);
    let mut xb = expand(b);
    if xa.len() != xb.len() {
        return f64::INFINITY;
    }
    let mut worst: f64 = 0.0;
    for v in xa {
        let (idx, dist) = xb
            .iter()
            .enumerate()
            .map(|(i, w)| (i, (v - w).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("same length");
        worst = worst.max(dist);
        xb.swap_remove(idx);
    }
    worst
}

fn approx(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

/// Closed-form eigenvalues of the reduced linearization at a labelled
/// equilibrium, for (M, N) = (3, 2) at any angles and (3, 3) at (π/2, π) with
/// a2 = 1 and the preset coupling.
pub fn analytic_spectrum(label: &EquilibriumLabel, params: &Params) -> Result<Vec<Eig>> {
    if params.m != 3 || label.len() != 3 {
        return Err(Error::NoClosedForm(format!("M = {} (closed forms exist for M = 3)", params.m)));
    }
    if params.harmonics.is_some() {
        return Err(Error::NoClosedForm("explicit harmonic list".into()));
    }
    let (r, k) = (params.r, params.k);
    let mut eigs = match params.n {
        2 => {
            let c2 = params.alpha2.cos();
            let c4 = params.alpha4.cos();
            let h = 4.0 * r * (2.0 * params.alpha2).cos();
            let values = match label.splay_count() {
                0 => [-2.0 * c2 + h; 3],
                1 => [2.0 * c2 + h, -2.0 * k * c4 - 2.0 * c2 + h, 2.0 * k * c4 - 2.0 * c2 + h],
                2 => [-2.0 * k * c4 + 2.0 * c2 + h, 2.0 * k * c4 + 2.0 * c2 + h, -2.0 * c2 + h],
                _ => [2.0 * c2 + h; 3],
            };
            cluster(&values.map(|v| Complex64::new(v, 0.0)), 1e-15)
        }
        3 => {
            if !(approx(params.alpha2, FRAC_PI_2) && approx(params.alpha4, PI)) {
                return Err(Error::NoClosedForm("N = 3 requires (alpha2, alpha4) = (pi/2, pi)".into()));
            }
            if !approx(params.a2, 1.0) {
                return Err(Error::NoClosedForm("N = 3 requires a2 = 1".into()));
            }
            match label.splay_count() {
                1 => vec![
                    Eig::new(-15.0 * r, 1.5, 1),
                    Eig::new(-15.0 * r, -1.5, 1),
                    Eig::new(-24.0 * r + 3.0 * k, 0.0, 2),
                    Eig::new(-24.0 * r - 3.0 * k, 0.0, 2),
                ],
                2 => vec![
                    Eig::new(-15.0 * r + 1.5 * k, 1.5, 1),
                    Eig::new(-15.0 * r + 1.5 * k, -1.5, 1),
                    Eig::new(-15.0 * r - 1.5 * k, 1.5, 1),
                    Eig::new(-15.0 * r - 1.5 * k, -1.5, 1),
                    Eig::new(-24.0 * r, 0.0, 2),
                ],
                _ => return Err(Error::NoClosedForm(format!("{label} for N = 3"))),
            }
        }
        n => return Err(Error::NoClosedForm(format!("N = {n}"))),
    };
    sort_eigs(&mut eigs);
    Ok(eigs)
}

/// Which vector field a spectrum was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Reduced,
    Full,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub label: EquilibriumLabel,
    pub source: Source,
    #[serde(rename = "eigs")]
    pub numeric_eigs: Vec<Eig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic_eigs: Option<Vec<Eig>>,
    pub zero_count: usize,
    #[serde(rename = "nu")]
    pub saddle_value: Option<f64>,
}

/// Saddle value `−Re λ_weakest-contracting / Re λ_strongest-expanding`,
/// ignoring eigenvalues with modulus below [`ZERO_TOL`].
pub fn saddle_value(eigs: &[Eig]) -> Result<f64> {
    let relevant = eigs.iter().filter(|e| e.value().norm() >= ZERO_TOL);
    let (mut weakest_contraction, mut strongest_expansion) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for e in relevant {
        if e.re < 0.0 {
            weakest_contraction = weakest_contraction.max(e.re);
        } else if e.re > 0.0 {
            strongest_expansion = strongest_expansion.max(e.re);
        }
    }
    if strongest_expansion == f64::NEG_INFINITY {
        return Err(Error::NotASaddle("no expanding eigenvalue".into()));
    }
    if weakest_contraction == f64::NEG_INFINITY {
        return Err(Error::NotASaddle("no contracting eigenvalue".into()));
    }
    Ok(-weakest_contraction / strongest_expansion)
}

/// Jacobian of the reduced field at a labelled equilibrium.
pub fn reduced_jacobian(label: &EquilibriumLabel, params: &Params) -> Result<DMatrix<f64>> {
    check_label(label, params)?;
    let field = Field::new(params)?.reduced()?;
    let point = equilibrium_point(label, params.n);
    Ok(jacobian_fd(|x| field.eval(x), point.as_slice(), FD_STEP))
}

fn check_label(label: &EquilibriumLabel, params: &Params) -> Result<()> {
    if label.len() != params.m {
        return Err(Error::InvalidLabel(format!("{label} has length {} but M = {}", label.len(), params.m)));
    }
    Ok(())
}

/// Numeric spectrum at a labelled equilibrium, with closed forms attached when
/// they exist.
pub fn spectrum_report(label: &EquilibriumLabel, params: &Params, source: Source) -> Result<SpectrumReport> {
    check_label(label, params)?;
    let field = Field::new(params)?;
    let point = equilibrium_point(label, params.n);
    let jac = match source {
        Source::Reduced => {
            let red = field.reduced()?;
            jacobian_fd(|x| red.eval(x), point.as_slice(), FD_STEP)
        }
        Source::Full => {
            let theta = lift_raw(point.as_slice(), params.n);
            jacobian_fd(|x| field.eval(x), &theta, FD_STEP)
        }
    };
    let raw = eig_small(&jac)?;
    let zero_count = raw.iter().filter(|z| z.norm() < ZERO_TOL).count();
    let numeric_eigs = cluster(&raw, CLUSTER_TOL);
    let hyperbolic = match source {
        Source::Reduced => raw.iter().all(|z| z.re.abs() >= ZERO_TOL),
        Source::Full => raw.iter().all(|z| z.norm() < ZERO_TOL || z.re.abs() >= ZERO_TOL),
    };
    let saddle = if hyperbolic {
        saddle_value(&numeric_eigs).ok()
    } else {
        None
    };
    Ok(SpectrumReport {
        label: label.clone(),
        source,
        numeric_eigs,
        analytic_eigs: analytic_spectrum(label, params).ok(),
        zero_count,
        saddle_value: saddle,
    })
}

/// How saddle values are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ClosedForm,
    Numeric,
}

#[derive(Debug, Clone, Serialize)]
pub struct DissipativityReport {
    pub saddle_values: Vec<(EquilibriumLabel, f64)>,
    /// Product over one representative per Z_M orbit.
    pub orbit_product: f64,
    /// Product over every saddle of the sequence.
    pub full_product: f64,
    pub dissipative: bool,
}

/// Saddle-value product along a cycle.
pub fn cycle_dissipativity(labels: &[EquilibriumLabel], params: &Params, method: Method) -> Result<DissipativityReport> {
    let mut saddle_values = Vec::with_capacity(labels.len());
    let mut seen: Vec<EquilibriumLabel> = Vec::new();
    let (mut orbit_product, mut full_product) = (1.0, 1.0);
    for label in labels {
        let nu = match method {
            Method::ClosedForm => saddle_value(&analytic_spectrum(label, params)?)?,
            Method::Numeric => spectrum_report(label, params, Source::Reduced)?
                .saddle_value
                .ok_or_else(|| Error::NotASaddle(label.to_string()))?,
        };
        full_product *= nu;
        let rep = label.orbit_representative();
        if !seen.contains(&rep) {
            orbit_product *= nu;
            seen.push(rep);
        }
        saddle_values.push((label.clone(), nu));
    }
    Ok(DissipativityReport {
        saddle_values,
        orbit_product,
        full_product,
        dissipative: full_product > 1.0,
    })
}

/// Orthonormal basis of the unstable eigenspace of `jac`: the kernel of the
/// real polynomial whose roots are the eigenvalues with positive real part.
pub fn unstable_subspace(jac: &DMatrix<f64>) -> Result<Vec<DVector<f64>>> {
    let n = jac.nrows();
    let eigs = eig_small(jac)?;
    let unstable: Vec<Complex64> = eigs.into_iter().filter(|z| z.re > ZERO_TOL).collect();
    if unstable.is_empty() {
        return Ok(Vec::new());
    }
    let id = DMatrix::<f64>::identity(n, n);
    let mut poly = id.clone();
    let mut used = vec![false; unstable.len()];
    for i in 0..unstable.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let z = unstable[i];
        if z.im.abs() < CLUSTER_TOL {
            poly = &poly * (jac - &id * z.re);
        } else {
            // Pair with the conjugate.
            if let Some(j) = (0..unstable.len()).find(|&j| !used[j] && (unstable[j] - z.conj()).norm() < CLUSTER_TOL) {
                used[j] = true;
            }
            let quad = jac * jac - jac * (2.0 * z.re) + &id * z.norm_sqr();
            poly = &poly * quad;
        }
    }
    let dim = unstable.len();
    let svd = poly.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::EigenNoConvergence)?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    Ok(order
        .into_iter()
        .take(dim)
        .map(|i| v_t.row(i).transpose().normalize())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn contains(values: &[Complex64], z: Complex64) -> bool {
        values.iter().any(|v| (v - z).norm() < 1e-9)
    }

    #[test]
    fn labels_parse_and_print() {
        let l: EquilibriumLabel = "DSS".parse().unwrap();
        assert_eq!(l.to_string(), "DSS");
        assert_eq!(l.rotate(1).to_string(), "SDS");
        assert_eq!(l.rotate(2).to_string(), "SSD");
        assert_eq!("SDS".parse::<EquilibriumLabel>().unwrap().orbit_representative().to_string(), "DSS");
        assert!("DXS".parse::<EquilibriumLabel>().is_err());
        assert!("".parse::<EquilibriumLabel>().is_err());
    }

    #[test]
    fn cycle_sequence_for_three_populations() {
        let words: Vec<String> = cycle_labels(3).iter().map(|l| l.to_string()).collect();
        assert_eq!(words, ["DSS", "DDS", "SDS", "SDD", "SSD", "DSD"]);
    }

    #[test]
    fn equilibrium_points() {
        let dss = equilibrium_point(&"DSS".parse().unwrap(), 3);
        let expect = [TAU / 3.0, 2.0 * TAU / 3.0, 0.0, 0.0, 0.0, 0.0];
        assert!(dss.as_slice().iter().zip(expect).all(|(a, b)| (a - b).abs() < 1e-15));
        assert_eq!(equilibrium_point(&"DDS".parse().unwrap(), 2).as_slice(), &[PI, PI, 0.0]);
        assert!(equilibrium_point(&"SSS".parse().unwrap(), 4).as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn label_distance_accepts_either_splay_orientation() {
        let dss: EquilibriumLabel = "DSS".parse().unwrap();
        let flipped = [2.0 * TAU / 3.0, TAU / 3.0, 0.0, TAU - 1e-3, 0.0, 0.0];
        assert!((label_distance(&flipped, &dss, 3) - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn jacobian_of_linear_stub() {
        let j = jacobian_fd(|x| x.iter().map(|v| -v).collect(), &[0.3, -1.0, 2.0], FD_STEP);
        assert!((j + DMatrix::<f64>::identity(3, 3)).abs().max() < 1e-9);
    }

    #[test]
    fn eig_small_examples() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let e = eig_small(&d).unwrap();
        for v in [1.0, 2.0, 3.0] {
            assert!(contains(&e, c(v, 0.0)));
        }
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let e = eig_small(&rot).unwrap();
        assert!(contains(&e, c(0.0, 1.0)) && contains(&e, c(0.0, -1.0)));
        // Companion matrix of x³ − 1.
        let comp = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let e = eig_small(&comp).unwrap();
        let h = 3f64.sqrt() / 2.0;
        for z in [c(1.0, 0.0), c(-0.5, h), c(-0.5, -h)] {
            assert!(contains(&e, z));
        }
        assert!(eig_small(&DMatrix::<f64>::zeros(2, 3)).is_err());
    }

    #[test]
    fn clustering_merges_close_values() {
        let v = [c(1.0, 0.0), c(1.0 + 1e-9, 0.0), c(-2.0, 0.5), c(-2.0, -0.5)];
        let e = cluster(&v, CLUSTER_TOL);
        assert_eq!(e.len(), 3);
        assert_eq!(e[2].mult, 2);
        assert!(e[0].re <= e[1].re);
    }

    #[test]
    fn analytic_n2_at_reference_point() {
        let p = Params::new(3, 2).with_rk(0.05, 0.15);
        let e = analytic_spectrum(&"DSS".parse().unwrap(), &p).unwrap();
        let vals: Vec<f64> = e.iter().map(|x| x.re).collect();
        for (got, want) in vals.iter().zip([-0.5, -0.2, 0.1]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_n3_reference_values() {
        let p = Params::new(3, 3).with_rk(0.01, 0.16);
        let dss = analytic_spectrum(&"DSS".parse().unwrap(), &p).unwrap();
        let want = [Eig::new(-0.72, 0.0, 2), Eig::new(-0.15, -1.5, 1), Eig::new(-0.15, 1.5, 1), Eig::new(0.24, 0.0, 2)];
        assert!(spectrum_mismatch(&dss, &want) < 1e-12);
        let dds = analytic_spectrum(&"DDS".parse().unwrap(), &p).unwrap();
        let want = [
            Eig::new(-0.39, 1.5, 1),
            Eig::new(-0.39, -1.5, 1),
            Eig::new(-0.24, 0.0, 2),
            Eig::new(0.09, 1.5, 1),
            Eig::new(0.09, -1.5, 1),
        ];
        assert!(spectrum_mismatch(&dds, &want) < 1e-12);
    }

    #[test]
    fn analytic_domain_errors() {
        let mut p = Params::new(3, 3).with_rk(0.01, 0.16);
        p.alpha2 = 1.0;
        assert!(matches!(analytic_spectrum(&"DSS".parse().unwrap(), &p), Err(Error::NoClosedForm(_))));
        let p4 = Params::new(4, 2);
        assert!(matches!(analytic_spectrum(&"DSSS".parse().unwrap(), &p4), Err(Error::NoClosedForm(_))));
    }

    #[test]
    fn saddle_values_reference() {
        let p2 = Params::new(3, 2).with_rk(0.05, 0.15);
        let nu = saddle_value(&analytic_spectrum(&"DSS".parse().unwrap(), &p2).unwrap()).unwrap();
        assert!((nu - 2.0).abs() < 1e-12);
        let p3 = Params::new(3, 3).with_rk(0.01, 0.16);
        let nu = saddle_value(&analytic_spectrum(&"DSS".parse().unwrap(), &p3).unwrap()).unwrap();
        assert!((nu - 0.625).abs() < 1e-12);
        let nu = saddle_value(&analytic_spectrum(&"DDS".parse().unwrap(), &p3).unwrap()).unwrap();
        assert!((nu - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn saddle_value_requires_both_signs() {
        assert!(matches!(saddle_value(&[Eig::new(-1.0, 0.0, 2)]), Err(Error::NotASaddle(_))));
        assert!(matches!(saddle_value(&[Eig::new(1.0, 0.0, 1)]), Err(Error::NotASaddle(_))));
        // Group-orbit zeros are ignored.
        let nu = saddle_value(&[Eig::new(0.0, 0.0, 3), Eig::new(-0.5, 0.0, 1), Eig::new(0.25, 0.0, 1)]).unwrap();
        assert!((nu - 2.0).abs() < 1e-15);
    }

    #[test]
    fn numeric_matches_closed_form_at_reference_points() {
        for (n, r, k) in [(2, 0.05, 0.15), (3, 0.01, 0.16)] {
            let p = Params::new(3, n).with_rk(r, k);
            for word in ["DSS", "DDS", "SDS", "SSD", "SDD", "DSD"] {
                let rep = spectrum_report(&word.parse().unwrap(), &p, Source::Reduced).unwrap();
                let analytic = rep.analytic_eigs.clone().unwrap();
                assert!(spectrum_mismatch(&rep.numeric_eigs, &analytic) < 1e-6, "{word}: {rep:?}");
            }
        }
    }

    #[test]
    fn full_spectrum_adds_m_zeros() {
        let p = Params::new(3, 3).with_rk(0.01, 0.16);
        let rep = spectrum_report(&"DSS".parse().unwrap(), &p, Source::Full).unwrap();
        assert_eq!(rep.zero_count, 3);
        assert!((rep.saddle_value.unwrap() - 0.625).abs() < 1e-6);
    }

    #[test]
    fn dissipativity_products() {
        let p3 = Params::new(3, 3).with_rk(0.01, 0.16);
        let rep = cycle_dissipativity(&cycle_labels(3), &p3, Method::ClosedForm).unwrap();
        assert!((rep.orbit_product - 5.0 / 3.0).abs() < 1e-12);
        assert!((rep.full_product - (5.0f64 / 3.0).powi(3)).abs() < 1e-9);
        assert!(rep.dissipative);
        let p3 = Params::new(3, 3).with_rk(0.01, 0.19);
        let rep = cycle_dissipativity(&cycle_labels(3), &p3, Method::ClosedForm).unwrap();
        assert!(rep.orbit_product < 1.0 && !rep.dissipative);
        let p2 = Params::new(3, 2).with_rk(0.05, 0.15);
        let rep = cycle_dissipativity(&cycle_labels(3), &p2, Method::ClosedForm).unwrap();
        assert!((rep.orbit_product - 4.0).abs() < 1e-12);
    }

    #[test]
    fn unstable_subspace_dimensions() {
        let p3 = Params::new(3, 3).with_rk(0.01, 0.16);
        for word in ["DSS", "DDS"] {
            let j = reduced_jacobian(&word.parse().unwrap(), &p3).unwrap();
            let basis = unstable_subspace(&j).unwrap();
            assert_eq!(basis.len(), 2);
            // Each basis vector is (numerically) invariant: J v stays in span.
            for v in &basis {
                let jv = &j * v;
                let proj: DVector<f64> = basis.iter().map(|b| b * b.dot(&jv)).fold(DVector::zeros(6), |a, x| a + x);
                assert!((jv - proj).norm() < 1e-6);
            }
        }
        let stable = Params::new(3, 2).with_rk(0.5, 0.7);
        let j = reduced_jacobian(&"DSS".parse().unwrap(), &stable).unwrap();
        assert!(unstable_subspace(&j).unwrap().is_empty());
    }
}
