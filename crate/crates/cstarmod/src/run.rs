//! Executing scenarios: carriers and operators are built from declarations,
//! each requested check computes a table of facts, and expectations are
//! evaluated against that table into pass/fail records.
//!
//! Analysis refusals (a map that is not modular, a range that is not
//! complemented, a construction the function backend does not attempt) are
//! reported as `verdict` facts, not as failures; a check only fails when a
//! stated expectation does not hold or the analysis itself errors out. The
//! same machinery drives scenario files, the built-in gallery, and the
//! randomized fuzz harness, all of which produce byte-stable reports.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::algebra::{AlgebraElement, AlgebraSpec};
use crate::fnmod::poly::{Poly, PolyFunction};
use crate::fnmod::{
    chebyshev_lobatto_grid, drop_points, fn_gram_map, fn_is_complemented, fn_kernel, fn_polar,
    fn_range_closure, fn_submodule_equal, fn_try_adjoint, FnAdjointOutcome, FnCarrier, FnError,
    FnGramForm, FnKernelVerdict, FnMap, FnPolarVerdict, FnSubmodule, FnVector,
    DEFAULT_GRID_POINTS,
};
use crate::module::{FreeModule, ModuleVector, Submodule};
use crate::operator::{AdjointOutcome, Carrier, ModuleMap};
use crate::par;
use crate::polar::{
    kernel_invariants, polar_decompose_with, solve_modularity, HermitianCommutant,
    ModularityVerdict, PolarError,
};
use crate::random::random_map;
use crate::report::{fmt_bool, fmt_float, Report, Section};
use crate::scenario::{
    Backend, CheckDecl, CheckKind, EntryData, ExpectOp, OperatorBody, ParseError, Scenario,
};
use crate::tol::Tolerance;

/// Window for `expect <key> near <value>` comparisons.
pub const NEAR_WINDOW: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("cannot build `{item}`: {reason}")]
    Build { item: String, reason: String },
}

fn build_err(item: impl Into<String>, reason: impl ToString) -> RunError {
    RunError::Build { item: item.into(), reason: reason.to_string() }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Overrides the scenario's tolerance line and the environment variable.
    pub tolerance: Option<f64>,
    /// Overrides the scenario's grid line (function backend).
    pub grid: Option<usize>,
    /// Stop after the first section containing a failed check.
    pub fail_fast: bool,
}

/// Which checks of a scenario to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckSelection {
    /// The checks declared in the scenario; defaults to an observation of
    /// every operator when the scenario declares none.
    Declared,
    /// The given check kind, applied to every operator in turn.
    Forced(CheckKind),
}

fn effective_tolerance(options: &RunOptions, scenario_line: Option<f64>) -> Tolerance {
    match options.tolerance.or(scenario_line) {
        Some(eps) => Tolerance::new(eps).unwrap_or_default(),
        None => Tolerance::from_env(),
    }
}

// ---------------------------------------------------------------------------
// Fact tables and expectation evaluation.

#[derive(Debug, Clone, PartialEq)]
enum FactValue {
    Word(String),
    Number(f64),
}

#[derive(Debug, Default)]
struct Facts {
    items: Vec<(String, FactValue)>,
    /// An unexpected internal error; renders as a failing `analysis` check.
    error: Option<String>,
}

impl Facts {
    fn new() -> Self {
        Facts::default()
    }

    fn word(&mut self, key: &str, value: impl Into<String>) {
        self.items.push((key.to_string(), FactValue::Word(value.into())));
    }

    fn flag(&mut self, key: &str, value: bool) {
        self.word(key, fmt_bool(value));
    }

    fn number(&mut self, key: &str, value: f64) {
        self.items.push((key.to_string(), FactValue::Number(value)));
    }

    fn fail(&mut self, message: impl Into<String>) {
        self.error = Some(message.into());
    }

    fn get(&self, key: &str) -> Option<&FactValue> {
        self.items.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    fn into_section(self, heading: String, expectations: &[crate::scenario::Expectation]) -> Section {
        let mut section = Section::new(heading);
        for (key, value) in &self.items {
            match value {
                FactValue::Word(w) => section.fact(key.clone(), w.clone()),
                FactValue::Number(x) => section.fact_float(key.clone(), *x),
            }
        }
        if let Some(message) = &self.error {
            section.check("analysis", false, message.clone());
        }
        for exp in expectations {
            let label = format!("expect.{}", exp.key);
            let (passed, detail) = match (self.get(&exp.key), &exp.op) {
                (None, _) => (false, "no such fact was computed".to_string()),
                (Some(FactValue::Word(w)), ExpectOp::Is(want)) => {
                    (w == want, format!("got {}", w))
                }
                (Some(FactValue::Number(x)), ExpectOp::Below(bound)) => {
                    (x <= bound, format!("value {} exceeds {}", fmt_float(*x), bound))
                }
                (Some(FactValue::Number(x)), ExpectOp::Near(target)) => (
                    (x - target).abs() <= NEAR_WINDOW,
                    format!("value {} is not within {:e} of {}", fmt_float(*x), NEAR_WINDOW, target),
                ),
                (Some(FactValue::Number(x)), ExpectOp::Is(_)) => {
                    (false, format!("fact is numeric ({})", fmt_float(*x)))
                }
                (Some(FactValue::Word(w)), _) => (false, format!("fact is the word `{}`", w)),
            };
            section.check(label, passed, if passed { String::new() } else { detail });
        }
        section
    }
}

// ---------------------------------------------------------------------------
// Building worlds from declarations.

struct FiniteWorld {
    operators: Vec<(String, ModuleMap)>,
    submodules: Vec<(String, Submodule)>,
}

struct FunctionWorld {
    operators: Vec<(String, FnMap)>,
    submodules: Vec<(String, FnSubmodule)>,
    grid: Vec<f64>,
}

fn finite_element(
    spec: &AlgebraSpec,
    entry: &EntryData,
    item: &str,
) -> Result<AlgebraElement, RunError> {
    match entry {
        EntryData::Finite(blocks) => {
            let mats: Vec<DMatrix<Complex64>> = blocks
                .iter()
                .zip(spec.block_dims())
                .map(|(flat, &d)| DMatrix::from_row_slice(d, d, flat))
                .collect();
            AlgebraElement::from_blocks(spec, mats).map_err(|e| build_err(item, e))
        }
        _ => Err(build_err(item, "finite scenarios use matrix entries, not poly/sqrt")),
    }
}

fn build_finite(scenario: &Scenario, tol: Tolerance) -> Result<FiniteWorld, RunError> {
    let dims = scenario
        .algebra
        .clone()
        .ok_or_else(|| build_err(&scenario.name, "finite scenarios need an algebra line"))?;
    let spec = AlgebraSpec::new(dims).map_err(|e| build_err(&scenario.name, e))?;
    let mut modules: Vec<(String, FreeModule)> = Vec::new();
    for decl in &scenario.modules {
        modules.push((decl.name.clone(), FreeModule::new(spec.clone(), decl.rank)));
    }
    let find_module = |name: &str| modules.iter().find(|(n, _)| n == name).map(|(_, m)| m);
    let mut submodules: Vec<(String, Submodule)> = Vec::new();
    for decl in &scenario.submodules {
        let parent = find_module(&decl.parent)
            .ok_or_else(|| build_err(&decl.name, "parent is not a free module"))?;
        let mut vectors = Vec::with_capacity(decl.generators.len());
        for generator in &decl.generators {
            let entries: Vec<AlgebraElement> = generator
                .iter()
                .map(|e| finite_element(&spec, e, &decl.name))
                .collect::<Result<_, _>>()?;
            vectors.push(
                ModuleVector::new(parent, entries).map_err(|e| build_err(&decl.name, e))?,
            );
        }
        let sub = Submodule::from_generators(&vectors, tol)
            .map_err(|e| build_err(&decl.name, e))?;
        submodules.push((decl.name.clone(), sub));
    }
    let mut operators: Vec<(String, ModuleMap)> = Vec::new();
    for decl in &scenario.operators {
        let map = match &decl.body {
            OperatorBody::Inclusion(sub_name) => {
                let sub = submodules
                    .iter()
                    .find(|(n, _)| n == sub_name)
                    .map(|(_, s)| s)
                    .ok_or_else(|| build_err(&decl.name, "inclusion of an unknown submodule"))?;
                ModuleMap::inclusion(sub)
            }
            OperatorBody::Rows(rows) => {
                let domain = decl
                    .domain
                    .as_deref()
                    .and_then(find_module)
                    .ok_or_else(|| {
                        build_err(&decl.name, "matrix operators need free module endpoints")
                    })?;
                let codomain = decl
                    .codomain
                    .as_deref()
                    .and_then(find_module)
                    .ok_or_else(|| {
                        build_err(&decl.name, "matrix operators need free module endpoints")
                    })?;
                let entries: Vec<Vec<AlgebraElement>> = rows
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|e| finite_element(&spec, e, &decl.name))
                            .collect::<Result<_, _>>()
                    })
                    .collect::<Result<_, _>>()?;
                ModuleMap::from_algebra_matrix(domain, codomain, &entries)
                    .map_err(|e| build_err(&decl.name, e))?
            }
        };
        operators.push((decl.name.clone(), map));
    }
    Ok(FiniteWorld { operators, submodules })
}

fn function_entry(entry: &EntryData, item: &str) -> Result<PolyFunction, RunError> {
    let real_poly = |coeffs: &[f64]| {
        Poly::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    };
    match entry {
        EntryData::Poly(coeffs) => Ok(PolyFunction::poly(real_poly(coeffs))),
        EntryData::Sqrt(coeffs) => Ok(PolyFunction::sqrt(real_poly(coeffs))),
        EntryData::Finite(_) => {
            Err(build_err(item, "function scenarios use poly/sqrt entries"))
        }
    }
}

fn build_function(scenario: &Scenario, options: &RunOptions) -> Result<FunctionWorld, RunError> {
    let points = options.grid.or(scenario.grid).unwrap_or(DEFAULT_GRID_POINTS);
    let grid = chebyshev_lobatto_grid(points.max(2));
    let modules: Vec<(String, usize)> = scenario
        .modules
        .iter()
        .map(|m| (m.name.clone(), m.rank))
        .collect();
    let find_module = |name: &str| modules.iter().find(|(n, _)| n == name).map(|(_, r)| *r);
    let mut submodules: Vec<(String, FnSubmodule)> = Vec::new();
    for decl in &scenario.submodules {
        let ambient = find_module(&decl.parent)
            .ok_or_else(|| build_err(&decl.name, "parent is not a declared module"))?;
        let mut generators = Vec::with_capacity(decl.generators.len());
        for generator in &decl.generators {
            let entries: Vec<PolyFunction> = generator
                .iter()
                .map(|e| function_entry(e, &decl.name))
                .collect::<Result<_, _>>()?;
            generators.push(FnVector::new(entries));
        }
        let sub = FnSubmodule::new(ambient, generators).map_err(|e| build_err(&decl.name, e))?;
        submodules.push((decl.name.clone(), sub));
    }
    let carrier_of = |name: &str| -> Option<FnCarrier> {
        if let Some(rank) = find_module(name) {
            return Some(FnCarrier::Free(rank));
        }
        submodules
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| FnCarrier::Sub(s.clone()))
    };
    let mut operators: Vec<(String, FnMap)> = Vec::new();
    for decl in &scenario.operators {
        let map = match &decl.body {
            OperatorBody::Inclusion(sub_name) => {
                let sub = submodules
                    .iter()
                    .find(|(n, _)| n == sub_name)
                    .map(|(_, s)| s.clone())
                    .ok_or_else(|| build_err(&decl.name, "inclusion of an unknown submodule"))?;
                FnMap::inclusion(sub)
            }
            OperatorBody::Rows(rows) => {
                let domain = decl
                    .domain
                    .as_deref()
                    .and_then(&carrier_of)
                    .ok_or_else(|| build_err(&decl.name, "unknown domain carrier"))?;
                let codomain = decl
                    .codomain
                    .as_deref()
                    .and_then(&carrier_of)
                    .ok_or_else(|| build_err(&decl.name, "unknown codomain carrier"))?;
                let entries: Vec<Vec<PolyFunction>> = rows
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|e| function_entry(e, &decl.name))
                            .collect::<Result<_, _>>()
                    })
                    .collect::<Result<_, _>>()?;
                FnMap::multiplication(domain, codomain, entries)
                    .map_err(|e| build_err(&decl.name, e))?
            }
        };
        operators.push((decl.name.clone(), map));
    }
    Ok(FunctionWorld { operators, submodules, grid })
}

// ---------------------------------------------------------------------------
// Finite backend checks.

fn polar_refusal_word(err: &PolarError) -> Option<&'static str> {
    match err {
        PolarError::NotModular { .. } => Some("not-modular"),
        PolarError::GramNotPositive { .. } => Some("gram-not-positive"),
        PolarError::RankMismatch { .. } => Some("rank-mismatch"),
        PolarError::RangeNotComplemented => Some("not-complemented"),
        PolarError::RangeNotDense => Some("range-not-dense"),
        PolarError::SolveFailed(_) | PolarError::Operator(_) => None,
    }
}

fn polar_error_facts(facts: &mut Facts, err: &PolarError) {
    match polar_refusal_word(err) {
        Some(word) => {
            facts.word("verdict", word);
            match err {
                PolarError::NotModular { residual, .. } => facts.number("residual", *residual),
                PolarError::GramNotPositive { floor } => {
                    facts.number("positivity.floor", *floor)
                }
                _ => {}
            }
        }
        None => {
            facts.word("verdict", "error");
            facts.fail(err.to_string());
        }
    }
}

fn finite_modularity(a: &ModuleMap, tol: Tolerance) -> Facts {
    let mut facts = Facts::new();
    match solve_modularity(a, tol) {
        Ok(ModularityVerdict::Modular(cert)) => {
            facts.flag("modular", true);
            facts.number("residual", cert.residual);
            facts.number("hermitian.defect", cert.hermitian_defect);
            facts.number("positivity.floor", cert.positivity_floor);
        }
        Ok(ModularityVerdict::NotModular { residual, witness }) => {
            facts.flag("modular", false);
            facts.number("residual", residual);
            facts.number("witness.left", witness.left_index as f64);
            facts.number("witness.right", witness.right_index as f64);
            facts.number("witness.unit", witness.unit_index as f64);
        }
        Err(err) => polar_error_facts(&mut facts, &err),
    }
    facts
}

fn finite_polar(a: &ModuleMap, tol: Tolerance) -> Facts {
    let mut facts = Facts::new();
    let commutant = HermitianCommutant::of(a.domain(), tol);
    match polar_decompose_with(a, &commutant, tol) {
        Ok(p) => {
            facts.word("verdict", "decomposed");
            facts.number("residual", p.data.certificate.residual);
            facts.number("positivity.floor", p.data.certificate.positivity_floor);
            facts.number("factorization", p.data.factorization_defect);
            facts.number("isometry.defect", p.data.isometry_defect);
            facts.number("range.cross", p.data.range_cross_defect);
            facts.flag("partial.isometry", p.is_partial_isometry);
            facts.flag("kernel.match", p.kernel_matches);
            facts.number("factor.norm", p.polar_factor.norm());
        }
        Err(err) => polar_error_facts(&mut facts, &err),
    }
    facts
}

fn finite_invariants(a: &ModuleMap, tol: Tolerance) -> Facts {
    let mut facts = Facts::new();
    match crate::polar::modular_isometry(a, tol) {
        Ok(data) => {
            let inv = kernel_invariants(a, &data, tol);
            facts.number("kernel.dim", inv.kernel.complex_dim() as f64);
            facts.flag("kernel.vs.modulus", inv.kernel_agrees_with_modulus);
            facts.flag("kernel.vs.gram", inv.kernel_agrees_with_gram);
            facts.flag("range.in.kernel.perp", inv.range_inside_kernel_complement);
            facts.flag("range.is.kernel.perp", inv.range_equals_kernel_complement);
            facts.flag("modulus.injective", inv.modulus_injective_on_range);
        }
        Err(err) => polar_error_facts(&mut facts, &err),
    }
    facts
}

fn finite_predicates(a: &ModuleMap, tol: Tolerance) -> Facts {
    let mut facts = Facts::new();
    facts.number("norm", a.norm());
    facts.flag("isometry", a.is_isometry(tol));
    facts.flag("coisometry", a.is_coisometry(tol));
    facts.flag("partial.isometry", a.is_partial_isometry(tol));
    if let Ok(gram) = a.is_projection_gram(tol) {
        facts.flag("projection.gram", gram);
        if let Ok(squared) = a.compose(a, tol) {
            if let Ok(defect) = squared.map_defect(a, tol) {
                facts.flag("idempotent", tol.passes(defect, a.norm().powi(2).max(1.0)));
            }
        }
    }
    facts
}

fn finite_adjoint(a: &ModuleMap, tol: Tolerance) -> Facts {
    let mut facts = Facts::new();
    match a.try_adjoint(tol) {
        AdjointOutcome::Adjoint(adj) => {
            facts.flag("adjointable", true);
            facts.number("adjoint.norm", adj.norm());
        }
        AdjointOutcome::Refused { residual, witness } => {
            facts.flag("adjointable", false);
            facts.number("residual", residual);
            facts.number("witness.left", witness.left_index as f64);
            facts.number("witness.right", witness.right_index as f64);
            facts.number("witness.unit", witness.unit_index as f64);
        }
    }
    facts
}

fn finite_kernel(a: &ModuleMap, tol: Tolerance) -> Facts {
    let mut facts = Facts::new();
    let kernel = a.kernel(tol);
    let word = if kernel.is_zero() {
        "zero"
    } else if kernel.submodule_eq(&a.domain().as_submodule(), tol).unwrap_or(false) {
        "full"
    } else {
        "proper"
    };
    facts.word("kernel", word);
    facts.number("kernel.dim", kernel.complex_dim() as f64);
    facts
}

fn finite_range(a: &ModuleMap, tol: Tolerance) -> Facts {
    let mut facts = Facts::new();
    let range = a.range_closure(tol);
    facts.number("range.dim", range.complex_dim() as f64);
    facts.flag("complemented", range.is_complemented());
    facts.flag(
        "spans.codomain",
        range.submodule_eq(&a.codomain().as_submodule(), tol).unwrap_or(false),
    );
    facts
}

fn finite_observation(a: &ModuleMap, tol: Tolerance) -> Facts {
    let mut facts = Facts::new();
    facts.number("norm", a.norm());
    facts.flag("adjointable", a.try_adjoint(tol).adjoint().is_some());
    facts.number("kernel.dim", a.kernel(tol).complex_dim() as f64);
    facts.number("range.dim", a.range_closure(tol).complex_dim() as f64);
    facts
}

fn finite_submodule_facts(sub: &Submodule, tol: Tolerance) -> Facts {
    let _ = tol;
    let mut facts = Facts::new();
    facts.number("dim", sub.complex_dim() as f64);
    facts.flag("complemented", sub.is_complemented());
    facts
}

fn run_finite_check(world: &FiniteWorld, decl: &CheckDecl, tol: Tolerance) -> Section {
    let heading = format!("{}.{}", decl.kind.word(), decl.target);
    let operator = world.operators.iter().find(|(n, _)| n == &decl.target).map(|(_, m)| m);
    let facts = match operator {
        Some(a) => match decl.kind {
            CheckKind::Modularity => finite_modularity(a, tol),
            CheckKind::Polar => finite_polar(a, tol),
            CheckKind::Invariants => finite_invariants(a, tol),
            CheckKind::Predicates => finite_predicates(a, tol),
            CheckKind::Observation => finite_observation(a, tol),
            CheckKind::Adjoint => finite_adjoint(a, tol),
            CheckKind::Kernel => finite_kernel(a, tol),
            CheckKind::Range => finite_range(a, tol),
        },
        None => match world.submodules.iter().find(|(n, _)| n == &decl.target) {
            Some((_, sub)) if decl.kind == CheckKind::Range => finite_submodule_facts(sub, tol),
            Some(_) => {
                let mut facts = Facts::new();
                facts.word("verdict", "unsupported");
                facts.word("reason", "this check kind needs an operator target");
                facts
            }
            None => {
                let mut facts = Facts::new();
                facts.fail(format!("no operator or submodule named `{}`", decl.target));
                facts
            }
        },
    };
    facts.into_section(heading, &decl.expectations)
}

// ---------------------------------------------------------------------------
// Function backend checks.

fn fn_unsupported(facts: &mut Facts, err: &FnError) {
    match err {
        FnError::Unsupported(reason) => {
            facts.word("verdict", "unsupported");
            facts.word("reason", reason.clone());
        }
        other => {
            facts.word("verdict", "error");
            facts.fail(other.to_string());
        }
    }
}

fn function_modularity(map: &FnMap, grid: &[f64], tol: Tolerance) -> Facts {
    let mut facts = Facts::new();
    match fn_gram_map(map, grid, tol) {
        Ok(gram) => {
            facts.flag("modular", tol.passes(gram.residual_on_grid, 1.0));
            facts.number("residual", gram.residual_on_grid);
            facts.number("positivity.floor", gram.positivity_floor);
            facts.word(
                "form",
                match gram.form {
                    FnGramForm::IdentityOnDomain => "identity",
                    FnGramForm::Matrix(_) => "matrix",
                },
            );
        }
        Err(err) => fn_unsupported(&mut facts, &err),
    }
    facts
}

fn function_adjoint(map: &FnMap, grid: &[f64], tol: Tolerance) -> Facts {
    let mut facts = Facts::new();
    match fn_try_adjoint(map, grid, tol) {
        Ok(FnAdjointOutcome::Adjointable { defect }) => {
            facts.flag("adjointable", true);
            facts.number("defect", defect);
        }
        Ok(FnAdjointOutcome::Refused { witness_point, jump }) => {
            facts.flag("adjointable", false);
            facts.number("witness", witness_point);
            facts.number("jump", jump);
        }
        Err(err) => fn_unsupported(&mut facts, &err),
    }
    facts
}

fn function_kernel(map: &FnMap, tol: Tolerance) -> Facts {
    let mut facts = Facts::new();
    match fn_kernel(map, tol) {
        Ok(FnKernelVerdict::Zero) => facts.word("kernel", "zero"),
        Ok(FnKernelVerdict::Full) => facts.word("kernel", "full"),
        Ok(FnKernelVerdict::Generated(sub)) => {
            facts.word("kernel", "generated");
            facts.number("kernel.generators", sub.generators().len() as f64);
        }
        Err(err) => fn_unsupported(&mut facts, &err),
    }
    facts
}

fn function_submodule_facts(sub: &FnSubmodule, grid: &[f64], tol: Tolerance) -> Facts {
    let mut facts = Facts::new();
    match drop_points(sub, grid, tol) {
        Ok(analysis) => {
            facts.number("generic.rank", analysis.generic_rank as f64);
            facts.number("drop.count", analysis.drops.len() as f64);
            for (i, t) in analysis.drops.iter().enumerate() {
                facts.number(&format!("drop.{}", i), *t);
            }
        }
        Err(err) => {
            fn_unsupported(&mut facts, &err);
            return facts;
        }
    }
    match fn_is_complemented(sub, grid, tol) {
        Ok((complemented, _)) => facts.flag("complemented", complemented),
        Err(err) => fn_unsupported(&mut facts, &err),
    }
    facts
}

fn function_range(map: &FnMap, grid: &[f64], tol: Tolerance) -> Facts {
    let range = match fn_range_closure(map) {
        Ok(range) => range,
        Err(err) => {
            let mut facts = Facts::new();
            fn_unsupported(&mut facts, &err);
            return facts;
        }
    };
    let mut facts = function_submodule_facts(&range, grid, tol);
    if facts.error.is_none() && facts.get("verdict").is_none() {
        let full = FnSubmodule::full(range.ambient_rank());
        match fn_submodule_equal(&range, &full, grid, tol) {
            Ok(spans) => facts.flag("spans.codomain", spans),
            Err(err) => fn_unsupported(&mut facts, &err),
        }
    }
    facts
}

fn function_polar(map: &FnMap, grid: &[f64], tol: Tolerance) -> Facts {
    let mut facts = Facts::new();
    match fn_polar(map, grid, tol) {
        Ok(analysis) => {
            match analysis.verdict {
                FnPolarVerdict::Decomposed => facts.word("verdict", "decomposed"),
                FnPolarVerdict::RefusedNotComplemented { drop } => {
                    facts.word("verdict", "not-complemented");
                    facts.number("drop", drop);
                }
            }
            facts.number("residual", analysis.gram.residual_on_grid);
            facts.number("positivity.floor", analysis.gram.positivity_floor);
            facts.number("range.consistency", analysis.modulus_range_consistency);
            facts.number("factorization", analysis.factorization_defect);
            facts.number("isometry.defect", analysis.isometry_defect);
            facts.number("range.drop.count", analysis.range_drops.len() as f64);
        }
        Err(err) => fn_unsupported(&mut facts, &err),
    }
    facts
}

fn function_invariants(map: &FnMap, grid: &[f64], tol: Tolerance) -> Facts {
    let mut facts = function_kernel(map, tol);
    if facts.error.is_some() {
        return facts;
    }
    let range = function_range(map, grid, tol);
    for (key, value) in range.items {
        let key = if key.starts_with("drop") || key.starts_with("generic") {
            format!("range.{}", key)
        } else {
            key
        };
        facts.items.push((key, value));
    }
    if range.error.is_some() {
        facts.error = range.error;
    }
    facts
}

fn function_observation(map: &FnMap, grid: &[f64]) -> Facts {
    let mut facts = Facts::new();
    let sup = grid
        .iter()
        .map(|&t| crate::algebra::spectral_norm(&map.ambient_matrix_at(t)))
        .fold(0.0, f64::max);
    facts.number("sup.norm", sup);
    facts.word(
        "kind",
        match map.domain() {
            FnCarrier::Free(_) => "free-domain",
            FnCarrier::Sub(_) => "submodule-domain",
        },
    );
    facts
}

fn run_function_check(
    world: &FunctionWorld,
    decl: &CheckDecl,
    tol: Tolerance,
) -> Section {
    let heading = format!("{}.{}", decl.kind.word(), decl.target);
    let grid = &world.grid;
    let operator = world.operators.iter().find(|(n, _)| n == &decl.target).map(|(_, m)| m);
    let facts = match operator {
        Some(map) => match decl.kind {
            CheckKind::Modularity => function_modularity(map, grid, tol),
            CheckKind::Polar => function_polar(map, grid, tol),
            CheckKind::Invariants => function_invariants(map, grid, tol),
            CheckKind::Observation => function_observation(map, grid),
            CheckKind::Adjoint => function_adjoint(map, grid, tol),
            CheckKind::Kernel => function_kernel(map, tol),
            CheckKind::Range => function_range(map, grid, tol),
            CheckKind::Predicates => {
                let mut facts = Facts::new();
                facts.word("verdict", "unsupported");
                facts.word("reason", "predicates are a finite backend check");
                facts
            }
        },
        None => match world.submodules.iter().find(|(n, _)| n == &decl.target) {
            Some((_, sub)) if decl.kind == CheckKind::Range => {
                function_submodule_facts(sub, grid, tol)
            }
            Some(_) => {
                let mut facts = Facts::new();
                facts.word("verdict", "unsupported");
                facts.word("reason", "this check kind needs an operator target");
                facts
            }
            None => {
                let mut facts = Facts::new();
                facts.fail(format!("no operator or submodule named `{}`", decl.target));
                facts
            }
        },
    };
    facts.into_section(heading, &decl.expectations)
}

// ---------------------------------------------------------------------------
// Entry points.

fn selected_checks(scenario: &Scenario, selection: CheckSelection) -> Vec<CheckDecl> {
    match selection {
        CheckSelection::Declared if !scenario.checks.is_empty() => scenario.checks.clone(),
        CheckSelection::Declared => scenario
            .operators
            .iter()
            .map(|op| CheckDecl {
                kind: CheckKind::Observation,
                target: op.name.clone(),
                expectations: Vec::new(),
            })
            .collect(),
        CheckSelection::Forced(kind) => scenario
            .operators
            .iter()
            .map(|op| CheckDecl { kind, target: op.name.clone(), expectations: Vec::new() })
            .collect(),
    }
}

/// Runs a scenario's checks and assembles the report.
pub fn run(
    scenario: &Scenario,
    options: &RunOptions,
    selection: CheckSelection,
) -> Result<Report, RunError> {
    let tol = effective_tolerance(options, scenario.tolerance);
    let mut report = Report::new(scenario.name.clone());
    let checks = selected_checks(scenario, selection);
    match scenario.backend {
        Backend::Finite => {
            let world = build_finite(scenario, tol)?;
            for decl in &checks {
                let section = run_finite_check(&world, decl, tol);
                let failed = section.checks.iter().any(|c| !c.passed);
                report.push(section);
                if options.fail_fast && failed {
                    break;
                }
            }
        }
        Backend::Function => {
            let world = build_function(scenario, options)?;
            for decl in &checks {
                let section = run_function_check(&world, decl, tol);
                let failed = section.checks.iter().any(|c| !c.passed);
                report.push(section);
                if options.fail_fast && failed {
                    break;
                }
            }
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// The built-in gallery.

const FINITE_IDENTITY: &str = "\
scenario finite-identity
backend finite
algebra 2
module E rank 2
operator one from E to E
  row 1 0 0 1 ; 0 0 0 0
  row 0 0 0 0 ; 1 0 0 1
end
check modularity one
  expect modular is true
  expect residual below 1e-9
end
check polar one
  expect verdict is decomposed
  expect partial.isometry is true
  expect factorization below 1e-9
end
check predicates one
  expect isometry is true
  expect partial.isometry is true
  expect projection.gram is true
end
";

const FINITE_SHIFT: &str = "\
scenario finite-shift
backend finite
algebra 1
module E rank 2
operator step from E to E
  row 0 ; 0
  row 1 ; 0
end
check modularity step
  expect modular is true
  expect residual below 1e-9
end
check polar step
  expect verdict is decomposed
  expect partial.isometry is true
  expect kernel.match is true
end
check invariants step
  expect kernel.vs.modulus is true
  expect kernel.vs.gram is true
  expect range.in.kernel.perp is true
  expect range.is.kernel.perp is true
  expect modulus.injective is true
end
check adjoint step
  expect adjointable is true
end
check range step
  expect complemented is true
  expect spans.codomain is false
end
";

const FINITE_PROJECTION: &str = "\
scenario finite-projection
backend finite
algebra 1
module E rank 2
operator flat from E to E
  row 1 ; 0
  row 0 ; 0
end
check predicates flat
  expect projection.gram is true
  expect partial.isometry is true
  expect idempotent is true
end
check kernel flat
  expect kernel is proper
  expect kernel.dim near 1
end
check polar flat
  expect verdict is decomposed
  expect kernel.match is true
end
";

const FINITE_ZERO: &str = "\
scenario finite-zero
backend finite
algebra 2
module E rank 1
operator nought from E to E
  row 0 0 0 0
end
check polar nought
  expect verdict is decomposed
  expect partial.isometry is true
  expect factorization below 1e-12
  expect factor.norm below 1e-12
end
check kernel nought
  expect kernel is full
end
";

const VANISHING_INCLUSION: &str = "\
scenario vanishing-inclusion
backend function
module E rank 1
submodule T in E
  gen poly 0 1
end
operator embed inclusion T
check modularity embed
  expect modular is true
  expect residual below 1e-12
  expect form is identity
end
check adjoint embed
  expect adjointable is false
  expect witness near 0
end
check polar embed
  expect verdict is decomposed
  expect factorization below 1e-9
  expect isometry.defect below 1e-9
end
";

const VANISHING_RANGE: &str = "\
scenario vanishing-range
backend function
module E rank 1
operator height from E to E
  row poly 0 1
end
check kernel height
  expect kernel is zero
end
check range height
  expect complemented is false
  expect spans.codomain is false
  expect drop.count near 1
  expect drop.0 near 0
end
check adjoint height
  expect adjointable is true
  expect defect below 1e-9
end
check polar height
  expect verdict is not-complemented
  expect drop near 0
end
";

const ROOT_MULTIPLIER: &str = "\
scenario root-multiplier
backend function
module E rank 1
operator root from E to E
  row sqrt 0 1
end
check modularity root
  expect modular is true
  expect residual below 1e-9
  expect form is matrix
end
check polar root
  expect verdict is not-complemented
  expect drop near 0
  expect isometry.defect below 1e-9
  expect factorization below 1e-9
end
check adjoint root
  expect adjointable is true
end
";

/// The built-in scenarios, in report order. Each text round-trips through
/// the ordinary scenario parser.
pub const GALLERY: &[(&str, &str)] = &[
    ("finite-identity", FINITE_IDENTITY),
    ("finite-shift", FINITE_SHIFT),
    ("finite-projection", FINITE_PROJECTION),
    ("finite-zero", FINITE_ZERO),
    ("vanishing-inclusion", VANISHING_INCLUSION),
    ("vanishing-range", VANISHING_RANGE),
    ("root-multiplier", ROOT_MULTIPLIER),
];

/// Runs every built-in scenario.
pub fn gallery(options: &RunOptions) -> Result<Vec<Report>, RunError> {
    GALLERY
        .iter()
        .map(|(_, text)| {
            let scenario = Scenario::parse(text)?;
            run(&scenario, options, CheckSelection::Declared)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// The fuzz harness.

#[derive(Debug, Clone)]
pub struct FuzzConfig {
    pub seed: u64,
    pub count: usize,
    /// Block sizes of the coefficient algebra.
    pub algebra: Vec<usize>,
    /// Rank of the free module the operators act on.
    pub rank: usize,
    pub tolerance: Option<f64>,
    pub fail_fast: bool,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            seed: 0,
            count: 50,
            algebra: vec![2],
            rank: 3,
            tolerance: None,
            fail_fast: false,
        }
    }
}

/// Acceptance bound used by the fuzz oracles, relative to the operator scale.
const FUZZ_BOUND: f64 = 1e-8;

fn fuzz_case(
    module: &FreeModule,
    commutant: &HermitianCommutant,
    seed: u64,
    index: u64,
    tol: Tolerance,
) -> Section {
    let mut section = Section::new(format!("case.{}", index));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let a = random_map(module, module, &mut rng);
    let scale = a.norm().powi(2).max(1.0);
    section.fact_float("norm", a.norm());

    let oracle = a.matrix().adjoint() * a.matrix();
    match crate::polar::solve_modularity_with(&a, commutant, tol) {
        Ok(ModularityVerdict::Modular(cert)) => {
            section.fact_float("residual", cert.residual);
            let diff = crate::algebra::spectral_norm(&(cert.b.matrix() - &oracle));
            section.check(
                "gram.oracle",
                diff <= FUZZ_BOUND * scale,
                format!("solved Gram map is {} away from the classical one", fmt_float(diff)),
            );
        }
        Ok(ModularityVerdict::NotModular { residual, .. }) => {
            section.check(
                "gram.oracle",
                false,
                format!("map reported non-modular with residual {}", fmt_float(residual)),
            );
        }
        Err(err) => {
            section.check("gram.oracle", false, err.to_string());
        }
    }

    match polar_decompose_with(&a, commutant, tol) {
        Ok(p) => {
            let recomposed = p.polar_factor.matrix() * p.data.modulus.matrix();
            let defect = crate::algebra::spectral_norm(&(recomposed - a.matrix()));
            section.fact_float("factorization", defect);
            section.check(
                "factorization",
                defect <= FUZZ_BOUND * a.norm().max(1.0),
                format!("recomposition misses the map by {}", fmt_float(defect)),
            );
            section.check(
                "partial.isometry",
                p.is_partial_isometry,
                "polar factor failed the partial isometry predicate".to_string(),
            );
            let inv = kernel_invariants(&a, &p.data, tol);
            let kernels_agree = p.kernel_matches
                && inv.kernel_agrees_with_modulus
                && inv.kernel_agrees_with_gram
                && inv.range_inside_kernel_complement
                && inv.range_equals_kernel_complement
                && inv.modulus_injective_on_range;
            section.check(
                "kernel.invariants",
                kernels_agree,
                "a kernel or range identity failed".to_string(),
            );
        }
        Err(err) => {
            section.check("factorization", false, err.to_string());
        }
    }
    section
}

/// Seeded randomized cross-checks of the solver against classical oracles.
/// Case sections are deterministic functions of `(seed, index)`, so reports
/// are byte-identical across runs regardless of parallelism.
pub fn fuzz(config: &FuzzConfig) -> Result<Report, RunError> {
    let spec = AlgebraSpec::new(config.algebra.clone())
        .map_err(|e| build_err("fuzz algebra", e))?;
    if config.rank == 0 {
        return Err(build_err("fuzz rank", "rank must be positive"));
    }
    let module = FreeModule::new(spec, config.rank);
    let tol = match config.tolerance {
        Some(eps) => Tolerance::new(eps).unwrap_or_default(),
        None => Tolerance::from_env(),
    };
    let commutant = HermitianCommutant::of(&Carrier::free(module.clone()), tol);
    let indices: Vec<u64> = (0..config.count as u64).collect();
    let sections = par::batch_map(&indices, |&i| {
        fuzz_case(&module, &commutant, config.seed, i, tol)
    });
    let mut report = Report::new("fuzz");
    let mut summary = Section::new("config");
    summary.fact("seed", config.seed.to_string());
    summary.fact("count", config.count.to_string());
    summary.fact(
        "algebra",
        config
            .algebra
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    summary.fact("rank", config.rank.to_string());
    report.push(summary);
    for section in sections {
        let failed = section.checks.iter().any(|c| !c.passed);
        report.push(section);
        if config.fail_fast && failed {
            break;
        }
    }
    Ok(report)
}
