//! Coherent-state probes of the semiclassical wavefront set.
//!
//! The probe at `(x0, xi0)` is the periodization of
//! `exp(i xi0.(x - x0) / h - |x - x0|^2 / (2h))`. Its Fourier coefficients are
//! explicit:
//!
//! `phi(eta) = (2 pi h)^{n/2} e_{-eta}(x0) exp(-|xi0 - 2 pi h eta|^2 / (2h))`,
//!
//! so pairings with trigonometric polynomials are finite sums, and the pairing
//! as a function of `x0` is itself a trigonometric polynomial that an FFT
//! evaluates on the whole x-grid at once.

use std::f64::consts::PI;

use num::complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quasimode::{fit_log_decay, DecayFit, QuasimodeError, QuasimodeFamily};
use crate::trig::{grid_point, TrigPolynomial};

/// Lattice images whose Gaussian weight is below this, relative to the
/// largest one, are dropped.
pub const IMAGE_CUTOFF: f64 = 1e-18;
pub const DEFAULT_RESOLUTION: usize = 32;

#[derive(Debug, Error)]
pub enum WavefrontError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Fit(#[from] QuasimodeError),
}

/// Uniform x-grid with `resolution` points per axis and a finite list of
/// covectors, always containing `xi = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceGrid {
    dim: usize,
    resolution: usize,
    xi_points: Vec<Vec<f64>>,
}

impl PhaseSpaceGrid {
    /// Puts `xi = 0` first if it is not already listed.
    pub fn new(dim: usize, resolution: usize, mut xi_points: Vec<Vec<f64>>) -> Result<Self, WavefrontError> {
        if xi_points.iter().any(|xi| xi.len() != dim) {
            return Err(WavefrontError::Dimension(format!("covectors must have {dim} entries")));
        }
        if xi_points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(WavefrontError::Grid("covectors must be finite".into()));
        }
        if !xi_points.iter().any(|xi| xi.iter().all(|&x| x == 0.0)) {
            xi_points.insert(0, vec![0.0; dim]);
        }
        Ok(Self {
            dim,
            resolution,
            xi_points,
        })
    }

    /// `xi0 in {0, +-e_1, ..., +-e_n}`.
    pub fn standard(dim: usize, resolution: usize) -> Self {
        let mut xi = vec![vec![0.0; dim]];
        for i in 0..dim {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; dim];
                e[i] = s;
                xi.push(e);
            }
        }
        Self {
            dim,
            resolution,
            xi_points: xi,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn xi_points(&self) -> &[Vec<f64>] {
        &self.xi_points
    }

    pub fn x_count(&self) -> usize {
        if self.resolution == 0 {
            0
        } else {
            self.resolution.pow(self.dim as u32)
        }
    }

    pub fn x_point(&self, idx: usize) -> Vec<f64> {
        grid_point(idx, self.resolution, self.dim)
    }

    pub fn is_zero_covector(&self, i: usize) -> bool {
        self.xi_points[i].iter().all(|&x| x == 0.0)
    }
}

fn dist_sq_to_lattice(xi0: &[f64], h: f64) -> f64 {
    let step = 2.0 * PI * h;
    xi0.iter()
        .map(|&x| {
            let r = x - step * (x / step).round();
            r * r
        })
        .sum()
}

fn gauss_exponent(xi0: &[f64], eta: &[i64], h: f64) -> f64 {
    let step = 2.0 * PI * h;
    xi0.iter()
        .zip(eta)
        .map(|(&x, &k)| {
            let r = x - step * k as f64;
            r * r
        })
        .sum()
}

/// `log sum_k exp(-(xi - 2 pi h k)^2 / h)` over one axis, relative to the
/// largest term.
fn log_theta_1d(xi: f64, h: f64) -> f64 {
    let step = 2.0 * PI * h;
    let k0 = (xi / step).round() as i64;
    let dmin = (xi - step * k0 as f64).powi(2);
    let reach = ((-IMAGE_CUTOFF.ln()) * h + dmin).sqrt() / step;
    let kmax = reach.ceil() as i64 + 1;
    let mut s = 0.0;
    for k in (k0 - kmax)..=(k0 + kmax) {
        let e = ((xi - step * k as f64).powi(2) - dmin) / h;
        if e <= -IMAGE_CUTOFF.ln() {
            s += (-e).exp();
        }
    }
    s.ln()
}

/// Pairing polynomial `x0 -> <u, phi_{x0}>`, scaled by `exp(shift)` so that
/// its largest Gaussian weight is 1, together with `shift`.
fn scaled_pairing(u: &TrigPolynomial, xi0: &[f64], h: f64) -> (TrigPolynomial, f64) {
    let qmin = u
        .support()
        .map(|eta| gauss_exponent(xi0, eta, h))
        .fold(f64::INFINITY, f64::min);
    if !qmin.is_finite() {
        return (TrigPolynomial::zero(u.dim()), 0.0);
    }
    let cutoff = -IMAGE_CUTOFF.ln();
    let terms = u.iter().filter_map(|(eta, c)| {
        let e = (gauss_exponent(xi0, eta, h) - qmin) / (2.0 * h);
        (e <= cutoff).then(|| (eta.clone(), c * (-e).exp()))
    });
    (TrigPolynomial::from_terms(u.dim(), terms), qmin / (2.0 * h))
}

/// `|<u, phi>|^2` with `phi` the L2-normalized periodized coherent state at
/// `(x0, xi0)` of width `sqrt(h)`.
pub fn coherent_mass(u: &TrigPolynomial, x0: &[f64], xi0: &[f64], h: f64) -> f64 {
    let (p, shift) = scaled_pairing(u, xi0, h);
    if p.is_empty() {
        return 0.0;
    }
    // the (2 pi h)^{n/2} prefactors of <u, phi> and |phi| cancel
    let log_norm_sq: f64 = xi0
        .iter()
        .map(|&x| log_theta_1d(x, h) - dist_sq_to_lattice(&[x], h) / h)
        .sum();
    let v = p.eval(x0);
    (v.norm_sqr().ln() - 2.0 * shift - log_norm_sq).exp()
}

/// Largest mass a single character can receive at `(xi0, h)`:
/// `max_eta |phi(eta)|^2 / |phi|^2`.
pub fn vacuum_mass(xi0: &[f64], h: f64) -> f64 {
    (-xi0.iter().map(|&x| log_theta_1d(x, h)).sum::<f64>()).exp()
}

/// Coherent masses of a family on a phase-space grid, divided by the vacuum
/// mass so that a fixed character carries mass `O(1)` on its own covector.
#[derive(Clone, Debug)]
pub struct MassMap {
    grid: PhaseSpaceGrid,
    h_ladder: Vec<f64>,
    /// `log mass`, indexed `[xi][h][x]`.
    log_masses: Vec<f64>,
    /// Per-node fits, indexed `[xi][x]`.
    fits: Vec<DecayFit>,
}

impl MassMap {
    pub fn grid(&self) -> &PhaseSpaceGrid {
        &self.grid
    }

    pub fn h_ladder(&self) -> &[f64] {
        &self.h_ladder
    }

    pub fn is_empty(&self) -> bool {
        self.log_masses.is_empty()
    }

    fn index(&self, xi: usize, h: usize, x: usize) -> usize {
        (xi * self.h_ladder.len() + h) * self.grid.x_count() + x
    }

    pub fn log_mass(&self, xi: usize, h: usize, x: usize) -> f64 {
        self.log_masses[self.index(xi, h, x)]
    }

    pub fn mass(&self, xi: usize, h: usize, x: usize) -> f64 {
        self.log_mass(xi, h, x).exp()
    }

    pub fn fit(&self, xi: usize, x: usize) -> &DecayFit {
        &self.fits[xi * self.grid.x_count() + x]
    }

    /// One row per node and ladder point:
    /// `x_1..x_n, xi_1..xi_n, h, mass`, floats at 17 significant digits.
    pub fn to_csv(&self) -> String {
        let n = self.grid.dim;
        let mut out = String::new();
        let header: Vec<String> = (1..=n)
            .map(|i| format!("x{i}"))
            .chain((1..=n).map(|i| format!("xi{i}")))
            .chain(["h".to_string(), "mass".to_string()])
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for (xi_i, xi) in self.grid.xi_points.iter().enumerate() {
            for x_i in 0..self.grid.x_count() {
                let x = self.grid.x_point(x_i);
                for (h_i, &h) in self.h_ladder.iter().enumerate() {
                    let fields: Vec<String> = x
                        .iter()
                        .chain(xi)
                        .chain([h, self.mass(xi_i, h_i, x_i)].iter())
                        .map(|v| format_float(*v))
                        .collect();
                    out.push_str(&fields.join(","));
                    out.push('\n');
                }
            }
        }
        out
    }
}

/// Round-trip formatting with 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    format!("{x:.16e}")
}

/// Evaluates the normalized coherent mass at every node and ladder point and
/// fits a decay exponent per node. Work items run in parallel; results are
/// stored by node index.
pub fn wavefront_mass_map(
    family: &QuasimodeFamily,
    grid: &PhaseSpaceGrid,
) -> Result<MassMap, WavefrontError> {
    if family.dim() != grid.dim {
        return Err(WavefrontError::Dimension(format!(
            "family on T^{} but grid on T^{}",
            family.dim(),
            grid.dim
        )));
    }
    let h_ladder = family.h_ladder().to_vec();
    let nx = grid.x_count();
    if nx == 0 || grid.xi_points.is_empty() {
        return Ok(MassMap {
            grid: grid.clone(),
            h_ladder,
            log_masses: Vec::new(),
            fits: Vec::new(),
        });
    }
    let tasks: Vec<(usize, usize)> = (0..grid.xi_points.len())
        .flat_map(|xi| (0..h_ladder.len()).map(move |h| (xi, h)))
        .collect();
    let rows: Vec<Vec<f64>> = tasks
        .par_iter()
        .map(|&(xi_i, h_i)| {
            let xi0 = &grid.xi_points[xi_i];
            let h = h_ladder[h_i];
            let u = &family.members()[h_i];
            let (p, shift) = scaled_pairing(u, xi0, h);
            let offset = dist_sq_to_lattice(xi0, h) / h - 2.0 * shift;
            p.sample_grid(grid.resolution)
                .iter()
                .map(|v| v.norm_sqr().ln() + offset)
                .collect()
        })
        .collect();
    let log_masses: Vec<f64> = rows.into_iter().flatten().collect();
    let mut map = MassMap {
        grid: grid.clone(),
        h_ladder,
        log_masses,
        fits: Vec::new(),
    };
    let nodes: Vec<(usize, usize)> = (0..grid.xi_points.len())
        .flat_map(|xi| (0..nx).map(move |x| (xi, x)))
        .collect();
    map.fits = nodes
        .par_iter()
        .map(|&(xi, x)| node_fit(&map, xi, x, None))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(map)
}

fn node_fit(map: &MassMap, xi: usize, x: usize, subset: Option<usize>) -> Result<DecayFit, QuasimodeError> {
    let idx: Vec<usize> = (0..map.h_ladder.len())
        .filter(|i| subset.is_none_or(|parity| i % 2 == parity))
        .collect();
    let h: Vec<f64> = idx.iter().map(|&i| map.h_ladder[i]).collect();
    let logs: Vec<f64> = idx.iter().map(|&i| map.log_mass(xi, i, x)).collect();
    let masses = logs.iter().map(|l| l.exp()).collect();
    fit_log_decay(&h, &logs, masses)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Exponents below this classify a node IN.
    pub in_exponent: f64,
    /// Exponents above this classify a node OUT.
    pub out_exponent: f64,
    pub fill_fraction: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            in_exponent: 0.5,
            out_exponent: 2.0,
            fill_fraction: 0.95,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum NodeClass {
    In,
    Out,
    Inconclusive,
}

impl NodeClass {
    fn of(exponent: f64, t: &Thresholds) -> Self {
        if exponent < t.in_exponent {
            Self::In
        } else if exponent > t.out_exponent {
            Self::Out
        } else {
            Self::Inconclusive
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CovectorSummary {
    pub xi: Vec<f64>,
    pub in_nodes: usize,
    pub out_nodes: usize,
    pub inconclusive_nodes: usize,
    #[serde(with = "crate::quasimode::fit::float_or_string")]
    pub min_exponent: f64,
    #[serde(with = "crate::quasimode::fit::float_or_string")]
    pub max_exponent: f64,
}

/// Fraction of `xi = 0` nodes that stay IN when only the even (resp. odd)
/// ladder points are fitted.
#[derive(Clone, Debug, Serialize)]
pub struct SubsequenceDiagnostic {
    pub even_in_fraction: f64,
    pub odd_in_fraction: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NonconcentrationReport {
    pub thresholds: Thresholds,
    pub covectors: Vec<CovectorSummary>,
    /// Fraction of x-nodes IN at `xi = 0`.
    pub in_fraction: f64,
    pub fills_torus: bool,
    pub lagrangian_supported: bool,
    pub nonempty_interior: bool,
    pub subsequences: Option<SubsequenceDiagnostic>,
    pub pass: bool,
    #[serde(skip)]
    zero_classes: Vec<NodeClass>,
    #[serde(skip)]
    resolution: usize,
    #[serde(skip)]
    dim: usize,
}

impl NonconcentrationReport {
    /// Classes of the x-nodes at `xi = 0`.
    pub fn zero_section_classes(&self) -> &[NodeClass] {
        &self.zero_classes
    }

    /// Whether the IN set at `xi = 0` is carried into itself, up to one grid
    /// cell, by the translation `x -> x + shift` and its inverse.
    pub fn in_set_shift_invariant(&self, shift: &[f64]) -> bool {
        let neg: Vec<f64> = shift.iter().map(|s| -s).collect();
        self.maps_in_set(shift) && self.maps_in_set(&neg)
    }

    fn maps_in_set(&self, shift: &[f64]) -> bool {
        let g = self.resolution as i64;
        if g == 0 {
            return true;
        }
        let cells = neighbor_offsets(self.dim, 1);
        (0..self.zero_classes.len())
            .filter(|&i| self.zero_classes[i] == NodeClass::In)
            .all(|i| {
                let x = grid_point(i, self.resolution, self.dim);
                let target: Vec<i64> = x
                    .iter()
                    .zip(shift)
                    .map(|(a, s)| ((a + s) * g as f64).round() as i64)
                    .collect();
                cells.iter().any(|off| {
                    let idx = flat_index(&target, off, g);
                    self.zero_classes[idx] == NodeClass::In
                })
            })
    }
}

fn neighbor_offsets(dim: usize, reach: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                (-reach..=reach).map(move |d| {
                    let mut q = p.clone();
                    q.push(d);
                    q
                })
            })
            .collect();
    }
    out
}

fn flat_index(base: &[i64], off: &[i64], g: i64) -> usize {
    base.iter()
        .zip(off)
        .fold(0i64, |acc, (b, o)| acc * g + (b + o).rem_euclid(g)) as usize
}

/// Classifies every node and renders the three verdicts: the IN set at
/// `xi = 0` fills the torus, nonzero covectors are all OUT, and some
/// `2 x ... x 2` block of x-nodes is IN.
pub fn nonconcentration_report(
    map: &MassMap,
    thresholds: &Thresholds,
) -> Result<NonconcentrationReport, WavefrontError> {
    let grid = &map.grid;
    let nx = grid.x_count();
    let mut covectors = Vec::new();
    let mut zero_classes = Vec::new();
    let mut zero_index = None;
    let mut lagrangian_supported = true;
    if !map.is_empty() {
        for (xi_i, xi) in grid.xi_points.iter().enumerate() {
            let classes: Vec<NodeClass> = (0..nx)
                .map(|x| NodeClass::of(map.fit(xi_i, x).exponent, thresholds))
                .collect();
            let exps = (0..nx).map(|x| map.fit(xi_i, x).exponent);
            let count = |c| classes.iter().filter(|&&k| k == c).count();
            covectors.push(CovectorSummary {
                xi: xi.clone(),
                in_nodes: count(NodeClass::In),
                out_nodes: count(NodeClass::Out),
                inconclusive_nodes: count(NodeClass::Inconclusive),
                min_exponent: exps.clone().fold(f64::INFINITY, f64::min),
                max_exponent: exps.fold(f64::NEG_INFINITY, f64::max),
            });
            if grid.is_zero_covector(xi_i) {
                if zero_index.is_none() {
                    zero_index = Some(xi_i);
                    zero_classes = classes;
                }
            } else if classes.iter().any(|&c| c != NodeClass::Out) {
                lagrangian_supported = false;
            }
        }
    }
    let in_count = zero_classes.iter().filter(|&&c| c == NodeClass::In).count();
    let in_fraction = if zero_classes.is_empty() {
        0.0
    } else {
        in_count as f64 / zero_classes.len() as f64
    };
    let fills_torus = !zero_classes.is_empty() && in_fraction >= thresholds.fill_fraction;
    let nonempty_interior = has_in_block(&zero_classes, grid.resolution, grid.dim);

    let subsequences = match zero_index {
        Some(z) if map.h_ladder.len() >= 8 => {
            let frac = |parity| -> Result<f64, QuasimodeError> {
                let mut k = 0;
                for x in 0..nx {
                    if node_fit(map, z, x, Some(parity))?.exponent < thresholds.in_exponent {
                        k += 1;
                    }
                }
                Ok(k as f64 / nx as f64)
            };
            Some(SubsequenceDiagnostic {
                even_in_fraction: frac(0)?,
                odd_in_fraction: frac(1)?,
            })
        }
        _ => None,
    };

    Ok(NonconcentrationReport {
        thresholds: *thresholds,
        covectors,
        in_fraction,
        fills_torus,
        lagrangian_supported,
        nonempty_interior,
        subsequences,
        pass: fills_torus && lagrangian_supported && nonempty_interior,
        zero_classes,
        resolution: grid.resolution,
        dim: grid.dim,
    })
}

fn has_in_block(classes: &[NodeClass], g: usize, dim: usize) -> bool {
    if classes.is_empty() || g < 2 {
        return false;
    }
    let corners = neighbor_offsets(dim, 1)
        .into_iter()
        .filter(|o| o.iter().all(|&d| d >= 0))
        .collect::<Vec<_>>();
    (0..classes.len()).any(|i| {
        let base: Vec<i64> = grid_point(i, g, dim)
            .iter()
            .map(|x| (x * g as f64).round() as i64)
            .collect();
        corners
            .iter()
            .all(|o| classes[flat_index(&base, o, g as i64)] == NodeClass::In)
    })
}

/// `u(x; h)` proportional to the periodized Gaussian of width `sqrt(h)` at
/// the origin. Its mass leaves every fixed neighborhood of `x = 0`, so it
/// violates the fills-torus verdict; it is not a quasimode of anything.
pub fn concentrating_bump_family(dim: usize, h_ladder: Vec<f64>) -> Result<QuasimodeFamily, QuasimodeError> {
    let members = h_ladder
        .iter()
        .map(|&h| {
            // coefficients exp(-2 pi^2 h |eta|^2), kept down to 1e-16
            let a = 2.0 * PI * PI * h;
            let radius = ((16.0 * 10f64.ln()) / a).sqrt().floor() as usize;
            let terms = crate::quasimode::frequency_box(dim, radius)
                .into_iter()
                .filter_map(|eta| {
                    let q: i64 = eta.iter().map(|k| k * k).sum();
                    let w = (-a * q as f64).exp();
                    (w >= 1e-16).then(|| (eta, Complex64::new(w, 0.0)))
                })
                .collect::<Vec<_>>();
            TrigPolynomial::from_terms(dim, terms)
        })
        .collect();
    QuasimodeFamily::new(h_ladder, members)
}
