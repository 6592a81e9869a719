//! One function per subcommand.  Inputs are source texts; file handling
//! stays in the binary.

use std::collections::BTreeSet;
use std::fmt;

use serde_json::{json, Value};

use dml_core::analysis::{check_structure, default_values, green, is_aperiodic};
use dml_core::compile::{compile_with, CompileOptions};
use dml_core::fma::{parse_fma, unambiguity_bounded};
use dml_core::logic::{
    check_grammar_with, check_rigidity, evaluate_with, is_set_var, parse, Assignment, Formula, Fragment, RigidityMode,
    DEFAULT_MAX_WORD_LEN,
};
use dml_core::morphism::{is_empty, parse_recognizer, syntactic_quotient, DEFAULT_ORBIT_BUDGET};
use dml_core::msoclassic::{satisfiable_with, DEFAULT_STATE_BUDGET};
use dml_core::nominal::{DataValue, DataWord, Tag};
use dml_core::presentation::{parse_presentation_with, validate};

use crate::suite::{self, SuiteConfig};
use crate::SCHEMA_VERSION;

/// Exit code, text for humans and the JSON document for `--json`.
#[derive(Clone, Debug)]
pub struct Report {
    pub code: i32,
    pub text: String,
    pub json: Value,
}

impl Report {
    fn new(ok: bool, text: String, mut json: Value) -> Report {
        json["schema_version"] = json!(SCHEMA_VERSION);
        Report { code: if ok { 0 } else { 1 }, text, json }
    }
}

/// Usage and input errors; the binary exits with code 2.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CliError(pub String);

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CliError {}

impl From<dml_core::Error> for CliError {
    fn from(e: dml_core::Error) -> Self {
        CliError(e.to_string())
    }
}

pub type CmdResult = Result<Report, CliError>;

/// Bounds shared by several commands.
#[derive(Clone, Copy, Debug, Default)]
pub struct Limits {
    pub max_word_len: Option<usize>,
    pub max_values: Option<DataValue>,
    pub state_budget: Option<usize>,
}

impl Limits {
    fn budget(&self) -> usize {
        self.state_budget.unwrap_or(DEFAULT_STATE_BUDGET)
    }
}

fn tags_or_default(phi: &Formula, tags: &[Tag]) -> Vec<Tag> {
    if tags.is_empty() {
        phi.default_alphabet()
    } else {
        tags.to_vec()
    }
}

fn show_tags(tags: &[Tag]) -> Vec<String> {
    tags.iter().map(|t| t.to_string()).collect()
}

/// Parses `a,b` into tags.
pub fn parse_tags(s: &str) -> Vec<Tag> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(Tag::new).collect()
}

/// Parses `x=2` or `X=1,3` (empty right side for the empty set).
pub fn parse_binding(s: &str, asg: &mut Assignment) -> Result<(), CliError> {
    let (var, val) = s.split_once('=').ok_or_else(|| CliError(format!("binding `{s}` lacks `=`")))?;
    let var = var.trim().to_string();
    let pos = |p: &str| p.trim().parse::<usize>().map_err(|_| CliError(format!("bad position `{p}` in `{s}`")));
    if is_set_var(&var) {
        let set = val.split(',').filter(|p| !p.trim().is_empty()).map(pos).collect::<Result<BTreeSet<_>, _>>()?;
        asg.so.insert(var, set);
    } else {
        asg.fo.insert(var, pos(val)?);
    }
    Ok(())
}

pub fn parse_cmd(src: &str) -> CmdResult {
    let phi = parse(src)?;
    let free: Vec<String> = phi.free_vars().into_iter().collect();
    let tags = show_tags(&phi.default_alphabet());
    let text = format!("{phi}\nfree variables: {}\ntags: {}", list(&free), tags.join(" "));
    Ok(Report::new(
        true,
        text,
        json!({ "formula": phi.to_string(), "free_vars": free, "tags": tags, "data_tests": phi.has_data_tests() }),
    ))
}

fn list(v: &[String]) -> String {
    if v.is_empty() {
        "none".into()
    } else {
        v.join(" ")
    }
}

pub fn eval_cmd(src: &str, word: &str, bindings: &[String], limits: &Limits) -> CmdResult {
    let phi = parse(src)?;
    let w: DataWord = word.parse()?;
    let mut asg = Assignment::new();
    for b in bindings {
        parse_binding(b, &mut asg)?;
    }
    let v = evaluate_with(&phi, &w, &asg, limits.max_word_len.unwrap_or(DEFAULT_MAX_WORD_LEN))?;
    Ok(Report::new(v, v.to_string(), json!({ "word": w.to_string(), "value": v })))
}

/// With two free first-order variables, decides rigidity of the formula as a
/// guard; for a sentence, reports which guarded fragment it belongs to.
pub fn rigid_cmd(src: &str, vars: Option<(String, String)>, bounded: bool, tags: &[Tag], limits: &Limits) -> CmdResult {
    let phi = parse(src)?;
    let tags = tags_or_default(&phi, tags);
    let mode = if bounded {
        RigidityMode::Bounded { max_len: limits.max_word_len.unwrap_or(5), max_value: limits.max_values.unwrap_or(4) }
    } else {
        RigidityMode::Exact { budget: limits.budget() }
    };
    let free: Vec<String> = phi.free_vars().into_iter().collect();
    let (x, y) = match vars {
        Some(p) => p,
        None if free.is_empty() => {
            let g = check_grammar_with(&phi, mode, &tags)?;
            let ok = g.fragment != Fragment::Neither;
            let name = match g.fragment {
                Fragment::RigidGuarded => "rigidly guarded",
                Fragment::SemiRigidGuarded => "semi-rigidly guarded",
                Fragment::Neither => "outside both guarded fragments",
            };
            let mut text = name.to_string();
            if let Some(r) = &g.reason {
                text.push_str(&format!(": {r}"));
            }
            return Ok(Report::new(ok, text, json!({ "fragment": g.fragment, "reason": g.reason })));
        }
        None if free.len() == 2 && free.iter().all(|v| !is_set_var(v)) => (free[0].clone(), free[1].clone()),
        None => {
            return Err(CliError(format!(
                "expected a sentence or two free first-order variables, found {}; use --vars",
                list(&free)
            )))
        }
    };
    let v = check_rigidity(&phi, &x, &y, mode, &tags)?;
    let mut text = format!("{:?}", v.status).to_lowercase().replace("not", "not ");
    let counterexample = v.counterexample.as_ref().map(|(w, pos)| {
        text.push_str(&format!("\ncounterexample: `{w}` at positions {pos:?}"));
        json!({ "word": w.to_string(), "positions": pos })
    });
    Ok(Report::new(v.holds(), text, json!({ "x": x, "y": y, "status": v.status, "counterexample": counterexample })))
}

pub fn sat_cmd(src: &str, tags: &[Tag], limits: &Limits) -> CmdResult {
    let phi = parse(src)?;
    let free: Vec<String> = phi.free_vars().into_iter().collect();
    if !free.is_empty() {
        return Err(CliError(format!("`sat` needs a sentence; free variables: {}", free.join(" "))));
    }
    let tags = tags_or_default(&phi, tags);
    let g = check_grammar_with(&phi, RigidityMode::Exact { budget: limits.budget() }, &tags)?;
    if g.fragment == Fragment::Neither {
        return Err(CliError(format!("not a guarded sentence: {}", g.reason.unwrap_or_default())));
    }
    let res = satisfiable_with(&phi, &tags, limits.budget())?;
    let witness = res.witness.as_ref().map(|w| w.to_string());
    let mut text = if res.satisfiable { "SAT".to_string() } else { "UNSAT".to_string() };
    if let Some(w) = &witness {
        text.push_str(&format!("\nwitness: {w}"));
    }
    text.push_str(&format!(
        "\nstates: {} before determinization, {} after, {} final; {} partition variables",
        res.stats.max_before_determinization,
        res.stats.max_after_determinization,
        res.stats.final_states,
        res.partition_vars
    ));
    Ok(Report::new(
        res.satisfiable,
        text,
        json!({
            "satisfiable": res.satisfiable,
            "witness": witness,
            "partition_vars": res.partition_vars,
            "stats": res.stats,
        }),
    ))
}

/// Compiles a formula; `text` carries the recognizer in the presentation
/// format so it can be written out or fed to `analyze` and `quotient`.
pub fn compile_cmd(src: &str, tags: &[Tag], limits: &Limits) -> Result<(Report, String), CliError> {
    let phi = parse(src)?;
    let bound = (limits.max_word_len.unwrap_or(4), limits.max_values.unwrap_or(3));
    let opts = CompileOptions {
        tags: tags.to_vec(),
        rigidity: RigidityMode::Exact { budget: limits.budget() },
        projectability_bound: Some(bound),
        ..CompileOptions::default()
    };
    let (c, trace) = compile_with(&phi, &opts)?;
    let r = &c.recognizer;
    let aperiodic = is_aperiodic(r.presentation())?;
    let empty = is_empty(r)?;
    let text = format!(
        "{} orbits, {}, {}, {} stages; projectability checked on words of length <= {} over {} values",
        c.orbit_count(),
        if aperiodic { "aperiodic" } else { "not aperiodic" },
        if empty { "empty" } else { "non-empty" },
        trace.stages.len(),
        bound.0,
        bound.1
    );
    let json = json!({
        "orbits": c.orbit_count(),
        "aperiodic": aperiodic,
        "empty": empty,
        "projectability_checked_up_to": { "max_word_len": bound.0, "max_values": bound.1 },
        "free_vars": c.free_vars,
        "stages": trace.stages.len(),
    });
    Ok((Report::new(true, text, json), r.to_text()))
}

/// Validates a presentation (a recognizer file also works) and runs the Green
/// and structure checks on its restriction.
pub fn analyze_cmd(src: &str, limits: &Limits) -> CmdResult {
    let (p, _) = parse_presentation_with(src, |_, l| Ok(l.starts_with("letter ") || l.starts_with("accept")))?;
    let v = validate(&p);
    if !v.is_valid() {
        let lines: Vec<String> = v.violations.iter().map(|x| format!("{:?}: {}", x.kind, x.detail)).collect();
        return Ok(Report::new(
            false,
            format!("invalid presentation\n{}", lines.join("\n")),
            json!({ "valid": false, "violations": v.violations }),
        ));
    }
    let values: Vec<DataValue> = match limits.max_values {
        Some(k) => (1..=k).collect(),
        None => default_values(&p),
    };
    let g = green(&p, &values)?;
    let rep = check_structure(&p, &g)?;
    let aperiodic = is_aperiodic(&p)?;
    let classes = |cs: &Vec<Vec<usize>>| -> Vec<Vec<String>> {
        cs.iter().map(|c| c.iter().map(|&i| p.show(&g.elements[i])).collect()).collect()
    };
    let text = format!(
        "{}: {} orbits, {} elements over values {:?}, {}\nclasses: {} R, {} L, {} J, {} H\nmemory checks {} ({} failed), stairs checks {} ({} failed)",
        p.name,
        p.orbits().len(),
        g.elements.len(),
        values,
        if aperiodic { "aperiodic" } else { "not aperiodic" },
        g.r_classes.len(),
        g.l_classes.len(),
        g.j_classes.len(),
        g.h_classes.len(),
        rep.memory_checks,
        rep.memory_failures.len(),
        rep.stairs_checks,
        rep.stairs_failures.len()
    );
    let failures: Vec<&String> = rep.memory_failures.iter().chain(&rep.stairs_failures).collect();
    let text = failures.iter().fold(text, |t, f| format!("{t}\n  {f}"));
    Ok(Report::new(
        rep.passed(),
        text,
        json!({
            "valid": true,
            "orbits": p.orbits().len(),
            "elements": g.elements.iter().map(|e| p.show(e)).collect::<Vec<_>>(),
            "aperiodic": aperiodic,
            "green": {
                "r": classes(&g.r_classes),
                "l": classes(&g.l_classes),
                "j": classes(&g.j_classes),
                "h": classes(&g.h_classes),
            },
            "memory_checks": { "count": rep.memory_checks, "failures": rep.memory_failures },
            "structure_checks": { "count": rep.stairs_checks, "failures": rep.stairs_failures },
        }),
    ))
}

pub fn quotient_cmd(src: &str) -> Result<(Report, String), CliError> {
    let r = parse_recognizer(src)?;
    let q = syntactic_quotient(&r, DEFAULT_ORBIT_BUDGET)?;
    let text = format!("{} orbits, quotient has {}", r.orbit_count(), q.orbit_count());
    let json = json!({ "orbits_before": r.orbit_count(), "orbits": q.orbit_count() });
    Ok((Report::new(true, text, json), q.to_text()))
}

pub fn fma_run_cmd(src: &str, word: &str, count_limit: usize) -> CmdResult {
    let a = parse_fma(src)?;
    let w: DataWord = word.parse()?;
    let r = a.run(&w, count_limit);
    let trace: Option<Vec<String>> = r.trace.as_ref().map(|t| {
        t.iter()
            .map(|c| {
                let regs: Vec<String> = c.registers.iter().map(|d| d.to_string()).collect();
                format!("{}({})", a.orbits[c.orbit].name, regs.join(","))
            })
            .collect()
    });
    let mut text = format!("{}; {} accepting run(s)", if r.accepted { "accepted" } else { "rejected" }, r.run_count);
    if let Some(t) = &trace {
        text.push_str(&format!("\nrun: {}", t.join(" -> ")));
    }
    Ok(Report::new(
        r.accepted,
        text,
        json!({ "word": w.to_string(), "accepted": r.accepted, "run_count": r.run_count, "run": trace }),
    ))
}

/// Determinism and bounded unambiguity of an automaton.
pub fn fma_check_cmd(src: &str, limits: &Limits) -> CmdResult {
    let a = parse_fma(src)?;
    let n = limits.max_word_len.unwrap_or(5);
    let k = limits.max_values.unwrap_or(3);
    let deterministic = a.is_deterministic();
    let ambiguous = unambiguity_bounded(&a, n, k);
    let mut text = format!(
        "{} orbits, {} transitions, {}",
        a.orbits.len(),
        a.transitions.len(),
        if deterministic { "deterministic" } else { "not deterministic" }
    );
    match &ambiguous {
        None => text.push_str(&format!("\nunambiguous on words of length <= {n} over {k} values")),
        Some((w, c)) => text.push_str(&format!("\nambiguous: `{w}` has {c} accepting runs")),
    }
    Ok(Report::new(
        ambiguous.is_none(),
        text,
        json!({
            "deterministic": deterministic,
            "unambiguous": ambiguous.is_none(),
            "checked_up_to": { "max_word_len": n, "max_values": k },
            "ambiguous_word": ambiguous.map(|(w, c)| json!({ "word": w.to_string(), "runs": c })),
        }),
    ))
}

pub fn selftest_cmd(cfg: &SuiteConfig, filter: Option<&str>) -> CmdResult {
    let results = suite::run_suite(cfg, filter);
    if results.is_empty() {
        return Err(CliError(format!("no check matches `{}`", filter.unwrap_or_default())));
    }
    let passed = results.iter().filter(|r| r.passed).count();
    let mut lines: Vec<String> = results.iter().map(|r| r.line()).collect();
    lines.push(format!("{passed}/{} checks passed", results.len()));
    Ok(Report::new(passed == results.len(), lines.join("\n"), suite::report_json(&results)))
}
