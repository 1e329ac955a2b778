//! Stage orchestration: hypotheses, splitting, factory construction,
//! verification and wavefront verdicts, collected into one report.

use std::fs;
use std::path::{Path, PathBuf};

use num::complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use qmlab::lattice::{
    find_resonant_mode, int_dot, relation_lattice, split_frequencies, BasisNumber,
    UnimodularSplitting, DEFAULT_RESONANCE_BOX,
};
use qmlab::nondegeneracy::{bordered_determinant, quasiconvexity};
use qmlab::operator::{assemble_q_alpha, transform_quadratic_form, ModelOperatorSpec};
use qmlab::quasimode::{
    build_factory_quasimode, check_mode_concentration, galerkin_nullspace, solve_on_range,
    unique_continuation_constant, verify_quasimode_order, FactoryOutput, FactoryTemplate,
    GalerkinNullspace, QuasimodeError,
};
use qmlab::trig::TrigPolynomial;
use qmlab::wavefront::{nonconcentration_report, wavefront_mass_map};

use crate::config::{ConfigErrors, ConfigIssue, LabConfig, Resolved};
use crate::report::{decay_csv, to_canonical_json, write_file, WriteError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    CheckHypotheses,
    Split,
    BuildQuasimode,
    Verify,
    Wavefront,
    All,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::CheckHypotheses => "check-hypotheses",
            Self::Split => "split",
            Self::BuildQuasimode => "build-quasimode",
            Self::Verify => "verify",
            Self::Wavefront => "wavefront",
            Self::All => "all",
        }
    }

    fn hypotheses(self) -> bool {
        matches!(self, Self::CheckHypotheses | Self::Verify | Self::All)
    }

    fn split(self) -> bool {
        self != Self::CheckHypotheses
    }

    fn factory(self) -> bool {
        matches!(self, Self::BuildQuasimode | Self::Verify | Self::Wavefront | Self::All)
    }

    fn verify(self) -> bool {
        matches!(self, Self::Verify | Self::All)
    }

    fn wavefront(self) -> bool {
        matches!(self, Self::Wavefront | Self::All)
    }
}

/// Anything that makes the run itself invalid; maps to exit code 1.
#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration:\n{0}")]
    Config(#[from] ConfigErrors),
    #[error(transparent)]
    Write(#[from] WriteError),
    #[error("cannot create output directory {path}: {source}")]
    OutDir {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    #[serde(rename = "no checks requested")]
    NoChecks,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Failure {
    pub check: String,
    /// Hypothesis label such as `(F)` when the check decides one.
    pub hypothesis: Option<String>,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub status: Status,
    pub failures: Vec<Failure>,
    pub artifacts: Vec<PathBuf>,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Pass | Status::NoChecks => 0,
            Status::Fail => 2,
        }
    }
}

#[derive(Default)]
struct Run {
    sections: Map<String, Value>,
    hypotheses: Map<String, Value>,
    stages: Map<String, Value>,
    failures: Vec<Failure>,
    checks: usize,
    series: Vec<(String, Vec<f64>, Vec<f64>)>,
    massmap: Option<String>,
    partial: bool,
}

impl Run {
    fn check(&mut self, check: &str, hypothesis: Option<&str>, pass: bool, message: impl Into<String>) {
        self.checks += 1;
        if !pass {
            self.failures.push(Failure {
                check: check.into(),
                hypothesis: hypothesis.map(str::to_string),
                message: message.into(),
            });
        }
    }

    fn section<T: Serialize>(&mut self, key: &str, value: &T) {
        self.sections.insert(key.into(), to_value(value));
    }

    fn stage(&mut self, key: &str, state: &str) {
        self.stages.insert(key.into(), json!(state));
        if state != "ok" {
            self.partial = true;
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn usage(path: &str, message: String) -> PipelineError {
    PipelineError::Config(ConfigErrors(vec![ConfigIssue {
        path: path.into(),
        message,
    }]))
}

fn number_strings(x: &BasisNumber) -> Vec<String> {
    x.to_strings()
}

/// Runs `command` on a validated config and writes every artifact into
/// `out_dir`.
pub fn run_pipeline(cfg: &LabConfig, command: Command, out_dir: &Path) -> Result<RunSummary, PipelineError> {
    let res = cfg.resolve()?;
    let factory_needed = command.factory();
    if factory_needed && cfg.factory.is_none() {
        return Err(usage(
            "factory",
            format!("`{}` needs a [factory] block", command.name()),
        ));
    }
    fs::create_dir_all(out_dir).map_err(|source| PipelineError::OutDir {
        path: out_dir.to_path_buf(),
        source,
    })?;

    let mut run = Run::default();
    if command.hypotheses() {
        hypotheses(cfg, &res, &mut run);
    }
    let split = if command.split() { splitting(cfg, &res, &mut run) } else { None };
    let mut factory = None;
    if factory_needed {
        match &split {
            Some(s) => factory = build_factory(cfg, &res, s, &mut run)?,
            None => run.stage("factory", "skipped"),
        }
    }
    if command == Command::BuildQuasimode {
        if let Some(f) = &factory {
            let dir = out_dir.join("family");
            let provenance = json!({
                "alpha0": f.alpha0,
                "config": cfg.echo(),
            });
            f.family.write_dir(&dir, provenance).map_err(|e| {
                PipelineError::Write(WriteError {
                    path: dir.clone(),
                    source: std::io::Error::other(e.to_string()),
                })
            })?;
        }
    }
    if command.verify() {
        match (&split, &factory) {
            (Some(s), Some(f)) => verify(cfg, &res, s, f, &mut run),
            _ => run.stage("verify", "skipped"),
        }
    }
    if command.wavefront() {
        match &factory {
            Some(f) => wavefront(cfg, &res, f, &mut run),
            None => run.stage("wavefront", "skipped"),
        }
    }
    if command.hypotheses() && !run.hypotheses.contains_key("E") {
        run.hypotheses.insert(
            "E".into(),
            json!({"label": "(E)", "statement": "Pu = O(h^(2+delta)), |u| = 1", "evaluated": false}),
        );
    }

    let status = if run.checks == 0 {
        Status::NoChecks
    } else if run.failures.is_empty() {
        Status::Pass
    } else {
        Status::Fail
    };

    let mut artifacts = vec!["config.echo".to_string()];
    if !run.series.is_empty() {
        artifacts.push("decay.csv".into());
    }
    if run.massmap.is_some() {
        artifacts.push("massmap.csv".into());
    }
    if command == Command::BuildQuasimode && factory.is_some() {
        artifacts.push("family/manifest.json".into());
    }
    artifacts.push("report.json".into());

    let mut report = std::mem::take(&mut run.sections);
    report.insert("command".into(), json!(command.name()));
    report.insert("status".into(), to_value(&status));
    report.insert("failures".into(), to_value(&run.failures));
    report.insert(
        "checks".into(),
        json!({"run": run.checks, "failed": run.failures.len()}),
    );
    if command.hypotheses() {
        report.insert("hypotheses".into(), Value::Object(std::mem::take(&mut run.hypotheses)));
    }
    report.insert(
        "manifest".into(),
        json!({
            "artifacts": artifacts,
            "partial": run.partial,
            "stages": Value::Object(std::mem::take(&mut run.stages)),
        }),
    );
    report.insert("seed".into(), json!(cfg.seed));

    let mut written = vec![write_file(out_dir, "config.echo", &cfg.echo())?];
    if !run.series.is_empty() {
        written.push(write_file(out_dir, "decay.csv", &decay_csv(&run.series))?);
    }
    if let Some(csv) = &run.massmap {
        written.push(write_file(out_dir, "massmap.csv", csv)?);
    }
    written.push(write_file(
        out_dir,
        "report.json",
        &to_canonical_json(&Value::Object(report)),
    )?);

    Ok(RunSummary {
        status,
        failures: run.failures,
        artifacts: written,
    })
}

fn hypotheses(cfg: &LabConfig, res: &Resolved, run: &mut Run) {
    let omega = res.omega.to_f64(&res.basis);
    run.hypotheses.insert(
        "A".into(),
        json!({
            "label": "(A)",
            "statement": "principal symbol is real",
            "evaluated": true,
            "pass": true,
            "evidence": "real frequencies, real Hessian and real-valued r",
        }),
    );
    run.hypotheses.insert(
        "B".into(),
        json!({
            "label": "(B)",
            "statement": "subprincipal symbol is a real constant",
            "evaluated": true,
            "pass": true,
            "evidence": if res.c.is_some() { "c given exactly over the basis" } else { "c back-solved from the resonance" },
        }),
    );
    run.hypotheses.insert(
        "C".into(),
        json!({
            "label": "(C)",
            "statement": "Hamilton flow is completely integrable",
            "evaluated": true,
            "pass": true,
            "evidence": "the model symbol depends on the actions only",
        }),
    );

    match bordered_determinant(&res.hessian, &omega) {
        Ok(d) => {
            let required = cfg.checks.require_nondegenerate;
            if required {
                run.check(
                    "isoenergetic nondegeneracy",
                    Some("(D)"),
                    d.nondegenerate,
                    format!("bordered determinant {:e} within threshold {:e}", d.det, d.threshold),
                );
            }
            run.hypotheses.insert(
                "D".into(),
                json!({
                    "label": "(D)",
                    "statement": "isoenergetic nondegeneracy",
                    "evaluated": true,
                    "required": required,
                    "pass": d.nondegenerate,
                    "determinant": d.det,
                    "threshold": d.threshold,
                }),
            );
        }
        Err(e) => {
            run.check("isoenergetic nondegeneracy", Some("(D)"), false, e.to_string());
            run.hypotheses.insert(
                "D".into(),
                json!({"label": "(D)", "evaluated": false, "error": e.to_string()}),
            );
        }
    }

    match quasiconvexity(&res.hessian, &omega) {
        Ok(q) => {
            let required = cfg.checks.require_quasiconvex;
            if required {
                run.check(
                    "quasiconvexity",
                    Some("(F)"),
                    q.quasiconvex,
                    format!(
                        "Hessian restricted to the frequency orthocomplement has minimum eigenvalue {:e}",
                        q.min_eigenvalue
                    ),
                );
            }
            let min = if q.min_eigenvalue.is_finite() { json!(q.min_eigenvalue) } else { json!("inf") };
            run.hypotheses.insert(
                "F".into(),
                json!({
                    "label": "(F)",
                    "statement": "quasiconvexity",
                    "evaluated": true,
                    "required": required,
                    "pass": q.quasiconvex,
                    "min_eigenvalue": min,
                    "threshold": q.threshold,
                }),
            );
        }
        Err(e) => {
            run.check("quasiconvexity", Some("(F)"), false, e.to_string());
            run.hypotheses.insert(
                "F".into(),
                json!({"label": "(F)", "evaluated": false, "error": e.to_string()}),
            );
        }
    }
}

fn splitting(cfg: &LabConfig, res: &Resolved, run: &mut Run) -> Option<UnimodularSplitting> {
    let relations = relation_lattice(&res.omega);
    let split = relations.clone().and_then(|_| split_frequencies(&res.omega));
    let (relations, split) = match (relations, split) {
        (Ok(r), Ok(s)) => (r, s),
        (Err(e), _) | (_, Err(e)) => {
            run.check("splitting", None, false, e.to_string());
            run.stage("split", "failed");
            return None;
        }
    };
    let n = split.n();
    let k = split.k();
    let trailing_zero = (k..n).all(|i| int_dot(&split.inverse().row(i), res.omega.entries()).is_zero());
    let unimodular = split.matrix().is_unimodular();
    let tilde_free = qmlab::lattice::FrequencyVector::new(split.omega_tilde().to_vec())
        .and_then(|w| relation_lattice(&w))
        .map(|l| l.rank() == 0)
        .unwrap_or(false);
    run.check(
        "splitting invariants",
        None,
        unimodular && trailing_zero && tilde_free,
        format!("unimodular {unimodular}, trailing coordinates zero {trailing_zero}, reduced frequencies free {tilde_free}"),
    );
    run.section(
        "splitting",
        &json!({
            "k": k,
            "n": n,
            "matrix": split.matrix().to_rows(),
            "inverse": split.inverse().to_rows(),
            "omega_tilde": split.omega_tilde().iter().map(number_strings).collect::<Vec<_>>(),
            "relation_lattice": relations.generators(),
            "basis": res.basis.names(),
            "invariants": {
                "unimodular": unimodular,
                "trailing_zero": trailing_zero,
                "omega_tilde_free": tilde_free,
            },
        }),
    );
    run.stage("split", "ok");

    // resonant mode: searched when c is given, back-solved otherwise
    let alpha0 = cfg.factory.as_ref().map(|f| f.alpha0.clone());
    match (&res.c, &alpha0) {
        (Some(c), _) => match find_resonant_mode(split.omega_tilde(), c, DEFAULT_RESONANCE_BOX) {
            Ok(found) => {
                if let (Some(a), Some(f)) = (&found, &alpha0) {
                    run.check(
                        "resonant mode",
                        None,
                        a == f,
                        format!("resonance solved by {a:?}, factory uses {f:?}"),
                    );
                } else if let (None, Some(f)) = (&found, &alpha0) {
                    run.check(
                        "resonant mode",
                        None,
                        false,
                        format!("no resonant mode for c; factory uses {f:?}"),
                    );
                }
                run.section(
                    "resonant_mode",
                    &json!({"source": "search", "box": DEFAULT_RESONANCE_BOX, "alpha0": found, "c": number_strings(c)}),
                );
            }
            Err(e) => run.check("resonant mode", None, false, e.to_string()),
        },
        (None, Some(a)) if a.len() == k => {
            let c = -&int_dot(a, split.omega_tilde());
            run.section(
                "resonant_mode",
                &json!({"source": "back-solved", "alpha0": a, "c": number_strings(&c)}),
            );
        }
        _ => {}
    }
    Some(split)
}

fn build_factory(
    cfg: &LabConfig,
    res: &Resolved,
    split: &UnimodularSplitting,
    run: &mut Run,
) -> Result<Option<FactoryOutput>, PipelineError> {
    let f = cfg.factory.as_ref().expect("checked by caller");
    let v = cfg.factory_profile().expect("validated profile");
    if f.alpha0.len() != split.k() {
        return Err(usage(
            "factory.alpha0",
            format!("expected {} entries (orbit-closure dimension), got {}", split.k(), f.alpha0.len()),
        ));
    }
    if v.dim() != split.transversal_dim() {
        return Err(usage(
            "factory.v",
            format!("profile must live on T^{}, got T^{}", split.transversal_dim(), v.dim()),
        ));
    }
    let template = FactoryTemplate {
        basis: res.basis.clone(),
        omega: res.omega.clone(),
        hessian: res.hessian.clone(),
        c: res.c.clone(),
        remainder: res.remainder.clone(),
    };
    match build_factory_quasimode(&template, split, &f.alpha0, &v, res.ladder.clone(), cfg.truncation) {
        Ok(out) => {
            run.check(
                "factory construction",
                None,
                true,
                "",
            );
            run.section(
                "factory",
                &json!({
                    "alpha0": out.alpha0,
                    "r0_hat": out.r0_hat.to_json_terms(),
                    "transversal_residual": out.transversal_residual,
                    "min_over_max": out.min_over_max,
                    "check_grid": out.check_grid,
                    "expansion_grid": out.expansion_grid,
                    "c": number_strings(out.spec.c()),
                    "h_ladder": out.family.h_ladder(),
                    "remainder_model": match &res.remainder {
                        Some(r) => json!({
                            "form": "h^3 a/(1+|xi|^2) + h^3 q(x)",
                            "multiplier": r.multiplier,
                            "potential": r.potential.to_json_terms(),
                        }),
                        None => json!("off"),
                    },
                }),
            );
            run.stage("factory", "ok");
            Ok(Some(out))
        }
        Err(e) => {
            let label = match e {
                QuasimodeError::NotElliptic(_) | QuasimodeError::Operator(_) => Some("(F)"),
                _ => None,
            };
            run.check("factory construction", label, false, e.to_string());
            run.stage("factory", "failed");
            Ok(None)
        }
    }
}

fn galerkin_section(ns: &GalerkinNullspace, profile: &TrigPolynomial) -> (Value, f64) {
    let overlap = ns
        .basis
        .iter()
        .map(|f| f.inner(profile).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let v = json!({
        "truncation": ns.truncation,
        "null_tol": ns.null_tol,
        "scale": ns.scale,
        "nullity": ns.nullity(),
        "eigenvalues": ns.eigenvalues,
        "near_zero_spectrum": ns.near_zero_spectrum,
        "profile_overlap": overlap,
    });
    (v, overlap)
}

fn verify(cfg: &LabConfig, res: &Resolved, split: &UnimodularSplitting, out: &FactoryOutput, run: &mut Run) {
    let spec: &ModelOperatorSpec = &out.spec;
    let family = &out.family;
    let h = family.h_ladder().to_vec();

    let normalized = family.is_normalized();
    run.check("unit normalization", Some("(E)"), normalized, "members are not unit-normalized");
    match verify_quasimode_order(family, spec, cfg.checks.delta) {
        Ok(order) => {
            run.check(
                "quasimode order",
                Some("(E)"),
                order.pass,
                format!("fitted exponent {} below target {}", order.fit.exponent, order.target),
            );
            run.series.push(("residual".into(), h.clone(), order.residual_norms.clone()));
            run.hypotheses.insert(
                "E".into(),
                json!({
                    "label": "(E)",
                    "statement": "Pu = O(h^(2+delta)), |u| = 1",
                    "evaluated": true,
                    "pass": order.pass && normalized,
                    "delta": order.delta,
                }),
            );
            run.section("quasimode_order", &order);
        }
        Err(e) => run.check("quasimode order", Some("(E)"), false, e.to_string()),
    }

    match check_mode_concentration(family, split, &out.alpha0, cfg.checks.epsilon) {
        Ok(conc) => {
            run.check(
                "mode concentration",
                None,
                conc.pass,
                "non-resonant modes decay too slowly or the resonant mode lost mass",
            );
            run.series.push((format!("mode{:?}", conc.alpha0), h.clone(), conc.resonant_norms.clone()));
            for m in &conc.other_modes {
                run.series.push((format!("mode{:?}", m.alpha), m.fit.h.clone(), m.fit.norms.clone()));
            }
            run.section("mode_concentration", &conc);
        }
        Err(e) => run.check("mode concentration", None, false, e.to_string()),
    }

    let d = split.transversal_dim();
    if d == 0 {
        run.section("galerkin", &json!({"applicable": false, "reason": "the orbit closure is the whole torus"}));
        run.stage("verify", "ok");
        return;
    }
    let op = transform_quadratic_form(&res.hessian, split)
        .and_then(|form| assemble_q_alpha(&form, &out.alpha0, &out.r0_hat));
    let op = match op {
        Ok(op) => op,
        Err(e) => {
            run.check("galerkin nullspace", None, false, e.to_string());
            run.stage("verify", "failed");
            return;
        }
    };
    let ns = match galerkin_nullspace(&op, cfg.truncation, cfg.checks.null_tol) {
        Ok(n) => n,
        Err(e) => {
            run.check("galerkin nullspace", None, false, e.to_string());
            run.stage("verify", "failed");
            return;
        }
    };
    let (section, overlap) = galerkin_section(&ns, &out.profile);
    run.check(
        "galerkin nullspace",
        None,
        !ns.is_empty() && overlap >= 1.0 - 1e-6,
        format!("nullity {}, profile overlap {overlap}", ns.nullity()),
    );
    run.section("galerkin", &section);

    match cfg.subdomain(d).and_then(|b| unique_continuation_constant(&ns, &b).map_err(|e| e.to_string())) {
        Ok(uc) => {
            run.check(
                "unique continuation",
                None,
                uc.constant > 0.0,
                format!("constant {} is not positive", uc.constant),
            );
            run.section(
                "unique_continuation",
                &json!({
                    "constant": uc.constant,
                    "combination": uc.combination,
                    "subdomain": cfg.subdomain(d).ok(),
                }),
            );
        }
        Err(e) => run.check("unique continuation", None, false, e),
    }

    // partial inverse round trip on a seeded w0 orthogonal to the kernel
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let reach = (cfg.truncation as i64 / 2).min(6);
    let raw = TrigPolynomial::from_terms(
        d,
        ns.frequencies()
            .iter()
            .filter(|b| b.iter().all(|x| x.abs() <= reach))
            .map(|b| (b.clone(), Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
            .collect::<Vec<_>>(),
    );
    let mut w0 = raw.clone();
    for f in &ns.basis {
        w0 = &w0 - &f.scale(raw.inner(f));
    }
    let lw = op.apply(&w0);
    let g = TrigPolynomial::from_terms(
        d,
        ns.frequencies().iter().map(|b| (b.clone(), lw.coeff(b))).collect::<Vec<_>>(),
    );
    match solve_on_range(&op, &ns, &g) {
        Ok(sol) => {
            let rel = (&sol.w - &w0).l2_norm() / w0.l2_norm().max(f64::MIN_POSITIVE);
            run.check(
                "partial inverse",
                None,
                rel < 1e-8,
                format!("round-trip relative error {rel:e}"),
            );
            run.section(
                "partial_inverse",
                &json!({
                    "relative_error": rel,
                    "smallest_inverted": sol.smallest_inverted,
                    "ill_conditioned": sol.ill_conditioned,
                    "seed": cfg.seed,
                }),
            );
        }
        Err(e) => run.check("partial inverse", None, false, e.to_string()),
    }
    run.stage("verify", "ok");
}

fn wavefront(cfg: &LabConfig, res: &Resolved, out: &FactoryOutput, run: &mut Run) {
    let map = match wavefront_mass_map(&out.family, &res.grid) {
        Ok(m) => m,
        Err(e) => {
            run.check("wavefront", None, false, e.to_string());
            run.stage("wavefront", "failed");
            return;
        }
    };
    let report = match nonconcentration_report(&map, &res.thresholds) {
        Ok(r) => r,
        Err(e) => {
            run.check("wavefront", None, false, e.to_string());
            run.stage("wavefront", "failed");
            return;
        }
    };
    run.check(
        "fills torus",
        None,
        report.fills_torus,
        format!("IN fraction {} below {}", report.in_fraction, res.thresholds.fill_fraction),
    );
    run.check(
        "lagrangian supported",
        Some("(E)"),
        report.lagrangian_supported,
        "mass away from the zero section does not decay",
    );
    run.check(
        "nonempty interior",
        None,
        report.nonempty_interior,
        "no block of IN nodes at the zero section",
    );
    let omega = res.omega.to_f64(&res.basis);
    let mut flow = Vec::new();
    for &t in &cfg.checks.flow_times {
        let shift: Vec<f64> = omega.iter().map(|w| w * t).collect();
        let ok = report.in_set_shift_invariant(&shift);
        run.check(
            "flow invariance",
            None,
            ok,
            format!("IN set moves under the flow at t = {t}"),
        );
        flow.push(json!({"t": t, "invariant": ok}));
    }
    let mut section = to_value(&report);
    if let Value::Object(m) = &mut section {
        m.insert("flow_invariance".into(), Value::Array(flow));
        m.insert("resolution".into(), json!(res.grid.resolution()));
    }
    run.sections.insert("wavefront".into(), section);
    run.massmap = Some(map.to_csv());
    run.stage("wavefront", "ok");
}
