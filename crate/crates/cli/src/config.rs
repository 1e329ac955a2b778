//! Strict TOML configuration: parsing, validation and the echoed form with
//! every default written out.

use std::fmt;

use num::complex::Complex64;
use serde::{Deserialize, Serialize};

use qmlab::lattice::{parse_rational, BasisNumber, FrequencyVector, IrrationalityBasis};
use qmlab::nondegeneracy::HessianForm;
use qmlab::operator::RemainderModel;
use qmlab::quasimode::{dyadic_ladder, BoxDomain, DEFAULT_NULL_TOL};
use qmlab::trig::TrigPolynomial;
use qmlab::wavefront::{PhaseSpaceGrid, Thresholds};

/// One validation problem, located by a dotted path into the document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", e.path, e.message)?;
        }
        Ok(())
    }
}

impl ConfigErrors {
    pub fn paths(&self) -> Vec<&str> {
        self.0.iter().map(|e| e.path.as_str()).collect()
    }
}

/// A rational written as an integer or a string such as `"-3/7"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Int(i64),
    Text(String),
}

impl Scalar {
    fn text(&self) -> String {
        match self {
            Self::Int(i) => i.to_string(),
            Self::Text(s) => s.clone(),
        }
    }
}

/// A real number over the declared basis: a bare rational (first basis
/// element) or the full coordinate list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumberSpec {
    Scalar(Scalar),
    Coords(Vec<Scalar>),
}

impl NumberSpec {
    fn resonant() -> Self {
        Self::Scalar(Scalar::Text(RESONANT.into()))
    }

    fn is_resonant(&self) -> bool {
        matches!(self, Self::Scalar(Scalar::Text(s)) if s == RESONANT)
    }

    fn to_number(&self, m: usize) -> Result<BasisNumber, String> {
        let coords: Vec<String> = match self {
            Self::Scalar(s) => {
                let mut v = vec!["0".to_string(); m];
                v[0] = s.text();
                v
            }
            Self::Coords(c) => {
                if c.len() != m {
                    return Err(format!(
                        "expected {m} coordinates over the basis, got {}",
                        c.len()
                    ));
                }
                c.iter().map(Scalar::text).collect()
            }
        };
        for c in &coords {
            parse_rational(c).map_err(|e| e.to_string())?;
        }
        BasisNumber::parse(&coords).map_err(|e| e.to_string())
    }
}

const RESONANT: &str = "resonant";

/// Fourier coefficient `{ alpha = [..], re = .., im = .. }`; `im` defaults
/// to zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub alpha: Vec<i64>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

fn terms_to_poly(terms: &[Term], dim: usize) -> Result<TrigPolynomial, String> {
    let mut out = Vec::with_capacity(terms.len());
    for (i, t) in terms.iter().enumerate() {
        if t.alpha.len() != dim {
            return Err(format!(
                "term {i}: frequency {:?} has {} entries, expected {dim}",
                t.alpha,
                t.alpha.len()
            ));
        }
        if !t.re.is_finite() || !t.im.is_finite() {
            return Err(format!("term {i}: non-finite coefficient"));
        }
        out.push((t.alpha.clone(), Complex64::new(t.re, t.im)));
    }
    Ok(TrigPolynomial::from_terms(dim, out))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl Default for BasisSpec {
    fn default() -> Self {
        Self {
            names: vec!["1".into()],
            values: vec![1.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorySpec {
    pub alpha0: Vec<i64>,
    /// Transversal profile on `T'`.
    pub v: Vec<Term>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RemainderSpec {
    pub enabled: bool,
    pub multiplier: f64,
    pub potential: Vec<Term>,
}

impl Default for RemainderSpec {
    fn default() -> Self {
        Self {
            enabled: false,
            multiplier: 1.0,
            potential: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub resolution: usize,
    /// Covectors `xi0`; defaults to `0` and the signed unit covectors.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<Vec<f64>>>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            resolution: 32,
            xi: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdSpec {
    pub in_exponent: f64,
    pub out_exponent: f64,
    pub fill_fraction: f64,
}

impl Default for ThresholdSpec {
    fn default() -> Self {
        let t = Thresholds::default();
        Self {
            in_exponent: t.in_exponent,
            out_exponent: t.out_exponent,
            fill_fraction: t.fill_fraction,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubdomainSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Default for SubdomainSpec {
    fn default() -> Self {
        Self {
            lower: Vec::new(),
            upper: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksSpec {
    pub require_nondegenerate: bool,
    pub require_quasiconvex: bool,
    /// Order target `Pu = O(h^{2 + delta})`.
    pub delta: f64,
    /// Mode decay target `O(h^{1 - epsilon})`.
    pub epsilon: f64,
    pub null_tol: f64,
    /// Box in `T'` for the unique-continuation constant; empty means
    /// `[0, 0.25]` on every axis.
    pub subdomain: SubdomainSpec,
    /// Times `t` for the flow-invariance check of the IN set.
    pub flow_times: Vec<f64>,
}

impl Default for ChecksSpec {
    fn default() -> Self {
        Self {
            require_nondegenerate: true,
            require_quasiconvex: true,
            delta: 1.0,
            epsilon: 0.05,
            null_tol: DEFAULT_NULL_TOL,
            subdomain: SubdomainSpec::default(),
            flow_times: vec![0.1, 0.2],
        }
    }
}

fn default_c() -> NumberSpec {
    NumberSpec::resonant()
}

fn default_ladder() -> String {
    "4..12".into()
}

fn default_truncation() -> usize {
    16
}

fn default_out() -> String {
    "qmlab-out".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabConfig {
    /// Taken from `omega` when omitted.
    #[serde(default)]
    pub dimension: Option<usize>,
    pub omega: Vec<NumberSpec>,
    pub hessian: Vec<Vec<f64>>,
    /// Subprincipal constant, or `"resonant"` to back-solve it.
    #[serde(default = "default_c")]
    pub c: NumberSpec,
    #[serde(default = "default_ladder")]
    pub ladder: String,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: String,
    /// Multiplier `r(x)` when no factory block is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<Term>>,
    #[serde(default)]
    pub basis: BasisSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factory: Option<FactorySpec>,
    #[serde(default)]
    pub remainder: RemainderSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub thresholds: ThresholdSpec,
    #[serde(default)]
    pub checks: ChecksSpec,
}

/// Core objects built from a validated config.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub basis: IrrationalityBasis,
    pub omega: FrequencyVector,
    pub hessian: HessianForm,
    /// `None` when the constant is back-solved from the resonance.
    pub c: Option<BasisNumber>,
    pub r: Option<TrigPolynomial>,
    pub remainder: Option<RemainderModel>,
    pub ladder: Vec<f64>,
    pub grid: PhaseSpaceGrid,
    pub thresholds: Thresholds,
}

/// Parses `"a..b"` into the dyadic ladder `2^-a, ..., 2^-b`.
pub fn parse_ladder(s: &str) -> Result<Vec<f64>, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected \"first..last\", got {s:?}"))?;
    let parse = |t: &str| {
        t.trim()
            .parse::<u32>()
            .map_err(|_| format!("ladder exponent {t:?} is not a non-negative integer"))
    };
    let (a, b) = (parse(a)?, parse(b)?);
    if b > 60 {
        return Err(format!("ladder exponent {b} is out of range"));
    }
    if b < a + 3 {
        return Err(format!("ladder {a}..{b} has fewer than 4 points"));
    }
    Ok(dyadic_ladder(a, b))
}

/// Parses and validates a TOML document. Structural errors carry the path
/// reported by the deserializer; semantic errors are collected together.
pub fn parse_config(text: &str) -> Result<LabConfig, ConfigErrors> {
    let de = toml::Deserializer::parse(text).map_err(|e| {
        ConfigErrors(vec![ConfigIssue {
            path: ".".into(),
            message: e.message().to_string(),
        }])
    })?;
    let mut cfg: LabConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigErrors(vec![ConfigIssue {
            path,
            message: e.into_inner().message().to_string(),
        }])
    })?;
    cfg.materialize();
    cfg.resolve()?;
    Ok(cfg)
}

impl LabConfig {
    pub fn n(&self) -> usize {
        self.dimension.unwrap_or(self.omega.len())
    }

    fn materialize(&mut self) {
        let n = self.n();
        self.dimension = Some(n);
        if self.grid.xi.is_none() {
            self.grid.xi = Some(PhaseSpaceGrid::standard(n, self.grid.resolution).xi_points().to_vec());
        }
    }

    /// Subdomain for the unique-continuation constant on `T'` of dimension `d`.
    pub fn subdomain(&self, d: usize) -> Result<BoxDomain, String> {
        let s = &self.checks.subdomain;
        if s.lower.is_empty() && s.upper.is_empty() {
            return BoxDomain::new(vec![0.0; d], vec![0.25; d]).map_err(|e| e.to_string());
        }
        if s.lower.len() != d || s.upper.len() != d {
            return Err(format!("subdomain must have {d} bounds per side"));
        }
        BoxDomain::new(s.lower.clone(), s.upper.clone()).map_err(|e| e.to_string())
    }

    /// Echo with every default written out.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn resolve(&self) -> Result<Resolved, ConfigErrors> {
        let mut errs = Vec::new();
        let mut err = |path: &str, message: String| {
            errs.push(ConfigIssue {
                path: path.into(),
                message,
            })
        };
        let n = self.n();
        if n == 0 {
            err("dimension", "dimension must be at least 1".into());
        }

        let basis = match IrrationalityBasis::new(self.basis.names.clone(), self.basis.values.clone()) {
            Ok(b) => Some(b),
            Err(e) => {
                err("basis", e.to_string());
                None
            }
        };
        let m = basis.as_ref().map_or(1, IrrationalityBasis::dim);

        let mut omega = None;
        if self.omega.len() != n {
            err("omega", format!("expected {n} entries, got {}", self.omega.len()));
        } else {
            let mut entries = Vec::with_capacity(n);
            for (i, e) in self.omega.iter().enumerate() {
                match e.to_number(m) {
                    Ok(x) => entries.push(x),
                    Err(msg) => err(&format!("omega[{i}]"), msg),
                }
            }
            if entries.len() == n && n > 0 {
                match FrequencyVector::new(entries) {
                    Ok(w) => omega = Some(w),
                    Err(e) => err("omega", e.to_string()),
                }
            }
        }

        let mut hessian = None;
        if self.hessian.len() != n || self.hessian.iter().any(|r| r.len() != n) {
            let shape: Vec<usize> = self.hessian.iter().map(Vec::len).collect();
            err(
                "hessian",
                format!("expected a {n}x{n} matrix to match omega, got rows of lengths {shape:?}"),
            );
        } else if n > 0 {
            match HessianForm::from_rows(&self.hessian) {
                Ok(h) => hessian = Some(h),
                Err(e) => err("hessian", e.to_string()),
            }
        }

        let c = if self.c.is_resonant() {
            None
        } else {
            match self.c.to_number(m) {
                Ok(x) => Some(x),
                Err(msg) => {
                    err("c", msg);
                    None
                }
            }
        };
        if c.is_none() && self.c.is_resonant() && self.factory.is_none() {
            err("c", "\"resonant\" needs a factory block to back-solve from".into());
        }

        let mut r = None;
        if let Some(terms) = &self.r {
            if self.factory.is_some() {
                err("r", "r is derived by the factory; give one or the other".into());
            }
            match terms_to_poly(terms, n) {
                Ok(p) => {
                    if !p.is_real_valued(1e-12 * p.max_coeff().max(1.0)) {
                        err("r", "r must be real-valued (Hermitian coefficients)".into());
                    }
                    r = Some(p);
                }
                Err(msg) => err("r", msg),
            }
        }

        if let Some(f) = &self.factory {
            if f.v.is_empty() {
                err("factory.v", "profile has no terms".into());
            } else {
                let d = f.v[0].alpha.len();
                if let Err(msg) = terms_to_poly(&f.v, d) {
                    err("factory.v", msg);
                }
                if d > n {
                    err("factory.v", format!("profile lives on T^{d}, more than n = {n}"));
                }
            }
        }

        let remainder = if self.remainder.enabled {
            match terms_to_poly(&self.remainder.potential, n) {
                Ok(p) if !self.remainder.multiplier.is_finite() => {
                    err("remainder.multiplier", "must be finite".into());
                    drop(p);
                    None
                }
                Ok(potential) => Some(RemainderModel {
                    multiplier: self.remainder.multiplier,
                    potential,
                }),
                Err(msg) => {
                    err("remainder.potential", msg);
                    None
                }
            }
        } else {
            None
        };

        let ladder = match parse_ladder(&self.ladder) {
            Ok(l) => l,
            Err(msg) => {
                err("ladder", msg);
                Vec::new()
            }
        };
        if self.truncation < qmlab::quasimode::MIN_TRUNCATION {
            err(
                "truncation",
                format!("must be at least {}", qmlab::quasimode::MIN_TRUNCATION),
            );
        }

        let mut grid = None;
        if self.grid.resolution == 0 {
            err("grid.resolution", "must be positive".into());
        } else {
            let xi = self.grid.xi.clone().unwrap_or_default();
            match PhaseSpaceGrid::new(n, self.grid.resolution, xi) {
                Ok(g) => grid = Some(g),
                Err(e) => err("grid.xi", e.to_string()),
            }
        }

        let t = &self.thresholds;
        if !(t.in_exponent < t.out_exponent) {
            err("thresholds", "in_exponent must be below out_exponent".into());
        }
        if !(t.fill_fraction > 0.0 && t.fill_fraction <= 1.0) {
            err("thresholds.fill_fraction", "must lie in (0, 1]".into());
        }
        let ch = &self.checks;
        if !(ch.delta > 0.0) {
            err("checks.delta", "must be positive".into());
        }
        if !(ch.epsilon > 0.0 && ch.epsilon < 1.0) {
            err("checks.epsilon", "must lie in (0, 1)".into());
        }
        if !(ch.null_tol > 0.0) {
            err("checks.null_tol", "must be positive".into());
        }
        if ch.flow_times.iter().any(|t| !t.is_finite()) {
            err("checks.flow_times", "must be finite".into());
        }

        if !errs.is_empty() {
            return Err(ConfigErrors(errs));
        }
        Ok(Resolved {
            basis: basis.expect("validated"),
            omega: omega.expect("validated"),
            hessian: hessian.expect("validated"),
            c,
            r,
            remainder,
            ladder,
            grid: grid.expect("validated"),
            thresholds: Thresholds {
                in_exponent: t.in_exponent,
                out_exponent: t.out_exponent,
                fill_fraction: t.fill_fraction,
            },
        })
    }

    pub fn factory_profile(&self) -> Option<TrigPolynomial> {
        let f = self.factory.as_ref()?;
        let d = f.v.first()?.alpha.len();
        terms_to_poly(&f.v, d).ok()
    }
}
