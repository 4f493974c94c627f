//! Existence and dissipativity conditions for the cycles of three populations,
//! parameter scans, and the quotient heteroclinic chain.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Params;
use crate::region::{boundary_equilibria, BoundaryEquilibrium};
use crate::spectral::analytic_spectrum;

/// A strict inequality with its slack; positive margin means it holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Condition {
    pub holds: bool,
    pub margin: f64,
}

impl Condition {
    fn from_margin(margin: f64) -> Self {
        Condition {
            holds: margin > 0.0,
            margin,
        }
    }

    fn all(parts: &[Condition]) -> Self {
        let margin = parts.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
        Condition {
            holds: parts.iter().all(|c| c.holds),
            margin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub n: usize,
    pub c_omega: Condition,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_lambda_prime: Option<Condition>,
    pub c_lambda: Condition,
    pub c_nu: Condition,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_psi: Option<Condition>,
    pub window: Condition,
    pub margins: BTreeMap<String, f64>,
}

fn is_special_angles(params: &Params) -> bool {
    (params.alpha2 - FRAC_PI_2).abs() <= 1e-12 && (params.alpha4 - PI).abs() <= 1e-12
}

fn three_eigs(params: &Params, word: &str) -> Result<[f64; 3]> {
    // Closed forms in their natural order λ1, λ2, λ3.
    let (c2, c4) = (params.alpha2.cos(), params.alpha4.cos());
    let h = 4.0 * params.r * (2.0 * params.alpha2).cos();
    let k = params.k;
    analytic_spectrum(&word.parse()?, params)?;
    Ok(match word {
        "DSS" => [2.0 * c2 + h, -2.0 * k * c4 - 2.0 * c2 + h, 2.0 * k * c4 - 2.0 * c2 + h],
        _ => [-2.0 * k * c4 + 2.0 * c2 + h, 2.0 * k * c4 + 2.0 * c2 + h, -2.0 * c2 + h],
    })
}

fn check_n2(params: &Params) -> Result<ConditionReport> {
    let [d1, d2, d3] = three_eigs(params, "DSS")?;
    let [e1, e2, e3] = three_eigs(params, "DDS")?;
    let k = params.k;
    let mut margins = BTreeMap::new();
    let mut put = |name: &str, v: f64| {
        margins.insert(name.to_string(), v);
        Condition::from_margin(v)
    };

    let c_omega = put("c_omega", (2.0 * params.alpha2.sin()).abs() - 2.0 * k);
    let c_lambda_prime = Condition::all(&[
        put("dss_l3_neg", -d3),
        put("dss_l2_pos", d2),
        put("dds_l2_neg", -e2),
        put("dds_l1_pos", e1),
    ]);
    let c_lambda = Condition::all(&[
        put("dss_l3_below_l1", d1 - d3),
        put("dss_l1_neg", -d1),
        Condition::from_margin(d2),
        put("dds_l2_below_l3", e3 - e2),
        put("dds_l3_neg", -e3),
        Condition::from_margin(e1),
    ]);
    // ν = −λs/λu > 1 with λu > 0, written without division.
    let c_nu = Condition::all(&[
        Condition::from_margin(d2),
        put("nu_dss", -d1 - d2),
        Condition::from_margin(e1),
        put("nu_dds", -e3 - e1),
    ]);
    let positive_k = put("k_pos", k);
    let mut parts = vec![positive_k, c_omega, c_lambda_prime, c_lambda, c_nu];
    if is_special_angles(params) {
        // 0 < K < 4r < 2K < 2
        let r = params.r;
        parts.push(put("window_k_lt_4r", 4.0 * r - k));
        parts.push(put("window_4r_lt_2k", 2.0 * k - 4.0 * r));
        parts.push(put("window_2k_lt_2", 2.0 - 2.0 * k));
    }
    let window = Condition::all(&parts);
    Ok(ConditionReport {
        n: 2,
        c_omega,
        c_lambda_prime: Some(c_lambda_prime),
        c_lambda,
        c_nu,
        c_psi: None,
        window,
        margins,
    })
}

fn check_n3(params: &Params) -> Result<ConditionReport> {
    if !is_special_angles(params) {
        return Err(Error::OutOfDomainAngles);
    }
    let (r, k) = (params.r, params.k);
    let mut margins = BTreeMap::new();
    let mut put = |name: &str, v: f64| {
        margins.insert(name.to_string(), v);
        Condition::from_margin(v)
    };
    let c_omega = put("c_omega", 9.0 - 4.0 * k);
    let c_lambda = Condition::all(&[put("r_pos", r), put("c_lambda", k - 10.0 * r)]);
    let c_psi = put("c_psi", k - 15.0 * r);
    let c_nu = put("c_nu", 18.0 * r - k);
    // 0 < K/18 < r < K/15 < 3/20
    let chain = Condition::all(&[
        put("chain_k_pos", k / 18.0),
        put("chain_lower", r - k / 18.0),
        put("chain_upper", k / 15.0 - r),
        put("chain_3_20", 3.0 / 20.0 - k / 15.0),
    ]);
    let window = Condition::all(&[chain, c_omega, c_lambda, c_psi, c_nu]);
    Ok(ConditionReport {
        n: 3,
        c_omega,
        c_lambda_prime: None,
        c_lambda,
        c_nu,
        c_psi: Some(c_psi),
        window,
        margins,
    })
}

/// Evaluates every condition for three populations. N = 3 is only defined at
/// (α2, α4) = (π/2, π).
pub fn check_conditions(params: &Params) -> Result<ConditionReport> {
    if params.m != 3 {
        return Err(Error::InvalidParam {
            key: "M",
            reason: "conditions are derived for M = 3".into(),
        });
    }
    match params.n {
        2 => check_n2(params),
        3 => check_n3(params),
        n => Err(Error::UnsupportedN(n)),
    }
}

/// Axis values of a scan.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub alpha2: Vec<f64>,
    pub r: Vec<f64>,
    pub k: Vec<f64>,
}

impl Grid {
    /// `count` evenly spaced values from `lo` to `hi` inclusive.
    pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
        match count {
            0 => Vec::new(),
            1 => vec![lo],
            c => (0..c).map(|i| lo + (hi - lo) * i as f64 / (c - 1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub alpha2: f64,
    pub r: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub report: ConditionReport,
}

/// One row per grid cell, ordered α2 outer, r middle, K inner.
pub fn scan_regions(grid: &Grid, alpha4: f64, n: usize) -> Result<Vec<ScanRow>> {
    if grid.alpha2.is_empty() || grid.r.is_empty() || grid.k.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let (na, nr, nk) = (grid.alpha2.len(), grid.r.len(), grid.k.len());
    (0..na * nr * nk)
        .into_par_iter()
        .map(|idx| {
            let (ia, rest) = (idx / (nr * nk), idx % (nr * nk));
            let (ir, ik) = (rest / nk, rest % nk);
            let params = Params::new(3, n)
                .with_angles(grid.alpha2[ia], alpha4)
                .with_rk(grid.r[ir], grid.k[ik]);
            let report = if params.k < 0.0 {
                // Negative coupling is outside the model; every condition fails.
                negative_k_report(&params)
            } else {
                check_conditions(&params)?
            };
            Ok(ScanRow {
                alpha2: params.alpha2,
                r: params.r,
                k: params.k,
                report,
            })
        })
        .collect()
}

fn negative_k_report(params: &Params) -> ConditionReport {
    let fail = Condition {
        holds: false,
        margin: params.k,
    };
    let n3 = params.n == 3;
    ConditionReport {
        n: params.n,
        c_omega: fail,
        c_lambda_prime: (!n3).then_some(fail),
        c_lambda: fail,
        c_nu: fail,
        c_psi: n3.then_some(fail),
        window: fail,
        margins: BTreeMap::from([("k_pos".to_string(), params.k)]),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainEdge {
    pub from: String,
    pub to: String,
    pub dim: usize,
    /// Lies in the closure of a higher-dimensional family of connections.
    pub closure_only: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChainFlags {
    pub cyclic: bool,
    pub equable: bool,
    pub almost_complete: bool,
    pub complete: bool,
    pub closed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainReport {
    pub vertices: Vec<String>,
    pub edges: Vec<ChainEdge>,
    pub flags: ChainFlags,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_saddles: Option<Vec<BoundaryEquilibrium>>,
}

impl ChainReport {
    /// Among edges that are not closure-only, every vertex they touch has
    /// exactly one incoming and one outgoing edge and the edges form one loop.
    pub fn primary_graph_is_cycle(&self) -> bool {
        let primary: Vec<&ChainEdge> = self.edges.iter().filter(|e| !e.closure_only).collect();
        if primary.is_empty() {
            return false;
        }
        let mut nodes: Vec<&str> = primary.iter().flat_map(|e| [e.from.as_str(), e.to.as_str()]).collect();
        nodes.sort_unstable();
        nodes.dedup();
        for v in &nodes {
            let outs = primary.iter().filter(|e| e.from == *v).count();
            let ins = primary.iter().filter(|e| e.to == *v).count();
            if outs != 1 || ins != 1 {
                return false;
            }
        }
        // Walk the loop from the first vertex.
        let mut cur = primary[0].from.as_str();
        for _ in 0..nodes.len() {
            cur = primary.iter().find(|e| e.from == cur).map(|e| e.to.as_str()).unwrap_or("");
        }
        cur == primary[0].from && primary.len() == nodes.len()
    }
}

fn edge(from: &str, to: &str, dim: usize, closure_only: bool) -> ChainEdge {
    ChainEdge {
        from: from.into(),
        to: to.into(),
        dim,
        closure_only,
    }
}

/// Quotient heteroclinic chain of the certified cycle.
pub fn cycle_report(params: &Params) -> Result<ChainReport> {
    let report = check_conditions(params)?;
    if !report.window.holds {
        let failing: Vec<&str> = [
            ("c_omega", report.c_omega.holds),
            ("c_lambda", report.c_lambda.holds),
            ("c_nu", report.c_nu.holds),
            ("c_psi", report.c_psi.map_or(true, |c| c.holds)),
        ]
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(name, _)| *name)
        .collect();
        let detail = if failing.is_empty() {
            "parameter window violated".to_string()
        } else {
            format!("failing: {}", failing.join(", "))
        };
        return Err(Error::NoCertifiedCycle(detail));
    }
    Ok(match params.n {
        2 => ChainReport {
            vertices: vec!["DSS".into(), "DDS".into()],
            edges: vec![edge("DSS", "DDS", 1, false), edge("DDS", "DSS", 1, false)],
            flags: ChainFlags {
                cyclic: true,
                equable: true,
                almost_complete: true,
                complete: true,
                closed: true,
            },
            boundary_saddles: None,
        },
        _ => ChainReport {
            vertices: vec!["DSS".into(), "DDS".into(), "xi_DpsiS".into(), "xi_psiDS".into()],
            edges: vec![
                edge("DSS", "DDS", 2, false),
                edge("DDS", "DSS", 2, false),
                edge("DSS", "xi_DpsiS", 1, true),
                edge("xi_DpsiS", "DDS", 1, true),
                edge("DDS", "xi_psiDS", 1, true),
                edge("xi_psiDS", "DSS", 1, true),
            ],
            flags: ChainFlags {
                cyclic: true,
                equable: true,
                almost_complete: true,
                complete: false,
                closed: false,
            },
            boundary_saddles: boundary_equilibria(params).ok(),
        },
    })
}
