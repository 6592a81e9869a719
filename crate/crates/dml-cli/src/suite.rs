//! The acceptance suite: nine timed checks over the worked examples, shared by
//! `dml selftest` and the `acceptance` integration test.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::time::Instant;

use serde_json::{json, Value};

use dml_core::analysis::{check_structure, default_values, green, is_aperiodic};
use dml_core::compile::{check_projectable, compile_with, CompileOptions};
use dml_core::fixtures;
use dml_core::fma;
use dml_core::logic::{
    at_least_values, at_least_values_oracle, check_grammar, check_rigidity, evaluate, is_set_var, parse, Assignment,
    Fragment, RigidityMode, RigidityStatus, DAGGER, L_GEQ3, PHI_L2,
};
use dml_core::morphism::{
    self, is_empty, member, parse_recognizer, syntactic_quotient, AnnotatedWord, DEFAULT_ORBIT_BUDGET,
};
use dml_core::msoclassic::satisfiable;
use dml_core::nominal::{DataValue, DataWord, Tag};
use dml_core::presentation::{validate, Term};

/// Rigidly guarded sentences and formulas shared by the oracle and
/// projectability checks.
pub const CORPUS: &[&str] = &[
    L_GEQ3,
    PHI_L2,
    "E x. E y. rigid[succ(x,y)](x,y){x !~ y}",
    "A x. A y. rigid[succ(x,y)](x,y){x ~ y}",
    "E x. rigid[first(x) & last(y)](x,y){x ~ y}",
    "rigid[x = y](x,y){x ~ y}",
    "E x. a(x) & last(x)",
    "E X. A x. x in X <-> a(x)",
    "E x. E y. b(x) & a(y) & rigid[succ(x,y)](x,y){x ~ y}",
    "A x. A y. rigid[first(x) & last(y)](x,y){x !~ y}",
    "x < y & rigid[succ(x,y)](x,y){x !~ y}",
    "A x. x in X -> E y. rigid[succ(x,y)](x,y){x ~ y}",
    "rigid[E m. succ(x,m) & succ(m,y)](x,y){x !~ y}",
    "E x. first(x) & E y. rigid[succ(x,y)](x,y){x ~ y}",
];

/// Guards over `(x, y)` with their expected rigidity.
pub const GUARDS: &[(&str, bool)] = &[
    ("succ(x,y)", true),
    ("x != y", false),
    ("x < y", false),
    ("x = y", true),
    ("succ(y,x)", true),
    ("first(x) & last(y)", true),
    ("false", true),
    ("succ(x,y) & a(y)", true),
    ("E z. succ(x,z) & succ(z,y)", true),
    ("last(y)", false),
    ("x < y & A z. (x < z & z < y) -> b(z)", false),
    (
        "(E m. succ(x,m) & m < y)
         & (A u. A v. (x < u & succ(u,v) & v < y) -> rigid[succ(u,v)](u,v){u ~ v})
         & (E u. rigid[succ(x,u)](x,u){x !~ u})
         & (E v. rigid[succ(v,y)](v,y){v !~ y})",
        true,
    ),
];

/// Inputs the checks read from outside the library.
#[derive(Clone, Debug)]
pub struct SuiteConfig {
    /// Recognizer text standing in for the L1 fixture.
    pub l1_text: String,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { l1_text: fixtures::L1_TEXT.to_string() }
    }
}

#[derive(Debug)]
pub struct Fail(pub String);

impl From<dml_core::Error> for Fail {
    fn from(e: dml_core::Error) -> Self {
        Fail(e.to_string())
    }
}

type Outcome = Result<String, Fail>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(Fail(format!($($msg)+)));
        }
    };
}

pub struct Check {
    pub id: usize,
    pub name: &'static str,
    /// Extra words `--filter` matches besides the name.
    pub keywords: &'static [&'static str],
    pub limit_secs: f64,
    run: fn(&SuiteConfig) -> Outcome,
}

impl Check {
    pub fn matches(&self, filter: &str) -> bool {
        let f = filter.to_lowercase();
        self.id.to_string() == f || self.name.contains(&f) || self.keywords.iter().any(|k| k.contains(&f))
    }

    pub fn run(&self, cfg: &SuiteConfig) -> CheckResult {
        let start = Instant::now();
        let outcome = (self.run)(cfg);
        let seconds = start.elapsed().as_secs_f64();
        let (mut passed, mut detail) = match outcome {
            Ok(d) => (true, d),
            Err(Fail(d)) => (false, d),
        };
        if seconds > self.limit_secs {
            passed = false;
            detail.push_str(&format!(" (took {seconds:.1} s, limit {} s)", self.limit_secs));
        }
        CheckResult { id: self.id, name: self.name, passed, detail, seconds, limit_secs: self.limit_secs }
    }
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub limit_secs: f64,
}

impl CheckResult {
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!("{verdict} {}. {:<24} {:>7.2}s  {}", self.id, self.name, self.seconds, self.detail)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "id": self.id,
            "name": self.name,
            "passed": self.passed,
            "detail": self.detail,
            "seconds": self.seconds,
            "limit_seconds": self.limit_secs,
        })
    }
}

pub fn checks() -> Vec<Check> {
    vec![
        Check {
            id: 1,
            name: "l1-syntactic-monoid",
            keywords: &["compile", "quotient", "validate"],
            limit_secs: 60.0,
            run: l1_syntactic_monoid,
        },
        Check {
            id: 2,
            name: "l2-syntactic-monoid",
            keywords: &["compile", "quotient", "aperiodic"],
            limit_secs: 30.0,
            run: l2_syntactic_monoid,
        },
        Check { id: 3, name: "xy-fixture", keywords: &["presentation"], limit_secs: 1.0, run: xy_fixture },
        Check {
            id: 4,
            name: "structure",
            keywords: &["analysis", "green", "memory", "stairs", "validate"],
            limit_secs: 60.0,
            run: structure,
        },
        Check {
            id: 5,
            name: "oracle-equivalence",
            keywords: &["compile", "eval", "sat"],
            limit_secs: 300.0,
            run: oracle,
        },
        Check { id: 6, name: "rigidity", keywords: &["rigid", "logic"], limit_secs: 120.0, run: rigidity },
        Check { id: 7, name: "satisfiability", keywords: &["sat", "msoclassic"], limit_secs: 120.0, run: sat },
        Check { id: 8, name: "fma", keywords: &["automata", "register"], limit_secs: 120.0, run: fma_suite },
        Check {
            id: 9,
            name: "projectability",
            keywords: &["compile", "stages"],
            limit_secs: 180.0,
            run: projectability,
        },
    ]
}

/// Runs the checks selected by `filter` (all when `None`) in order.
pub fn run_suite(cfg: &SuiteConfig, filter: Option<&str>) -> Vec<CheckResult> {
    checks().iter().filter(|c| filter.is_none_or(|f| c.matches(f))).map(|c| c.run(cfg)).collect()
}

fn l1_syntactic_monoid(cfg: &SuiteConfig) -> Outcome {
    let l1 = parse_recognizer(&cfg.l1_text)?;
    let lp = l1.presentation();
    let report = validate(lp);
    ensure!(
        report.is_valid(),
        "L1 fixture fails validate: {}",
        report.violations.iter().take(3).map(|v| format!("{:?}: {}", v.kind, v.detail)).collect::<Vec<_>>().join("; ")
    );

    let (c, _) = compile_with(&parse(L_GEQ3)?, &CompileOptions::default())?;
    let q = syntactic_quotient(&c.recognizer, DEFAULT_ORBIT_BUDGET)?;
    let qp = q.presentation();
    let arities: Vec<usize> = qp.orbits().iter().map(|o| o.arity).collect();
    ensure!(arities == [0, 1, 2, 0], "quotient has orbit arities {arities:?}");
    ensure!(qp.identity_orbit() == 0, "quotient identity is orbit {}", qp.identity_orbit());

    // Both monoids are images of the same words, so `h_L1(w) -> h_Q(w)` must be
    // a well-defined bijection on the restriction to four values.
    let values: Vec<DataValue> = (1..=4).collect();
    let mut map: HashMap<Term, Term> = HashMap::new();
    for w in DataWord::enumerate_up_to(&l1.morphism.tags(), 4, 3) {
        let s = morphism::evaluate(&l1.morphism, &w)?;
        let t = morphism::evaluate(&q.morphism, &w)?;
        if let Some(prev) = map.insert(s.clone(), t.clone()) {
            ensure!(prev == t, "`{w}` maps {} to both {} and {}", lp.show(&s), qp.show(&prev), qp.show(&t));
        }
    }
    let elems = lp.enumerate_restriction(&values);
    for e in &elems {
        ensure!(map.contains_key(e), "{} is not the image of a short word", lp.show(e));
        ensure!(q.accepts_term(&map[e]) == l1.accepts_term(e), "acceptance differs at {}", lp.show(e));
    }
    let targets: HashSet<&Term> = map.values().collect();
    ensure!(targets.len() == map.len(), "word-image map is not injective");
    ensure!(qp.enumerate_restriction(&values).len() == elems.len(), "quotient restriction has a different size");

    let mapped: Vec<usize> = lp
        .orbits()
        .iter()
        .enumerate()
        .map(|(id, _)| elems.iter().find(|e| e.orbit == id).map_or(usize::MAX, |e| qp.arity(map[e].orbit)))
        .collect();
    ensure!(mapped == [0, 1, 2, 0], "orbits o, p, q, r map to arities {mapped:?}");

    for s in &elems {
        for t in &elems {
            let st = lp.product(s, t)?;
            let img = qp.product(&map[s], &map[t])?;
            ensure!(map[&st] == img, "{}·{} is not preserved", lp.show(s), lp.show(t));
        }
    }
    for rule in lp.rules() {
        let got = lp.product(&rule.left, &rule.right)?;
        ensure!(got == lp.normalize(&rule.result), "fixture line {} does not hold", rule.line);
        let img = qp.product(&map[&rule.left], &map[&rule.right])?;
        ensure!(img == map[&got], "fixture line {} does not hold in the quotient", rule.line);
    }
    let eqs: [(Term, Term, Term); 2] = [
        (lp.term("q", &[1, 2])?, lp.term("q", &[1, 3])?, lp.term("r", &[])?),
        (lp.term("p", &[1])?, lp.term("q", &[1, 2])?, lp.term("q", &[1, 2])?),
    ];
    for (a, b, want) in eqs {
        ensure!(qp.product(&map[&a], &map[&b])? == map[&want], "{} · {} differs", lp.show(&a), lp.show(&b));
    }
    Ok(format!(
        "{} orbits, arities (0,1,2,0), isomorphic to L1 on {} elements, {} equations hold",
        arities.len(),
        elems.len(),
        lp.rules().len()
    ))
}

fn l2_syntactic_monoid(_: &SuiteConfig) -> Outcome {
    let (c, _) = compile_with(&parse(PHI_L2)?, &CompileOptions::default())?;
    let q = syntactic_quotient(&c.recognizer, DEFAULT_ORBIT_BUDGET)?;
    let n = q.orbit_count();
    ensure!(n == 3, "quotient has {n} orbits");
    ensure!(is_aperiodic(q.presentation())?, "quotient is not aperiodic");
    let l2 = fixtures::l2_recognizer();
    for w in DataWord::enumerate_up_to(&q.morphism.tags(), 3, 4) {
        ensure!(member(&q, &w)? == member(&l2, &w)?, "quotient and L2 fixture differ on `{w}`");
    }
    Ok("3 orbits, aperiodic, agrees with the L2 fixture".into())
}

fn xy_fixture(_: &SuiteConfig) -> Outcome {
    let p = fixtures::xy();
    ensure!(p.orbits().len() == 5, "{} orbits", p.orbits().len());
    let r = p.term("r", &[])?;
    let s = p.term("s", &[])?;
    ensure!(p.product(&p.term("p", &[1])?, &p.term("q", &[1])?)? == r, "p(d)q(d) is not r");
    ensure!(p.product(&p.term("p", &[1])?, &p.term("q", &[2])?)? == s, "p(d)q(e) is not s");
    let elems = p.enumerate_restriction(&[1, 2]);
    for e in &elems {
        ensure!(p.product(&s, e)? == s && p.product(e, &s)? == s, "s does not absorb {}", p.show(e));
        if e.orbit != p.identity_orbit() {
            ensure!(p.product(&r, e)? == s && p.product(e, &r)? == s, "r·{} is not s", p.show(e));
        }
    }
    Ok(format!("5 orbits; r, s as stated on {} elements", elems.len()))
}

fn structure(cfg: &SuiteConfig) -> Outcome {
    let mut details = Vec::new();
    for (name, text) in
        [("L1", cfg.l1_text.as_str()), ("L2", fixtures::L2_TEXT), ("xy", fixtures::XY_TEXT), ("Z2", fixtures::Z2_TEXT)]
    {
        let r = parse_recognizer(text)?;
        let p = r.presentation();
        let v = validate(p);
        if let Some(bad) = v.violations.first() {
            return Err(Fail(format!("{name} fails validate: {:?}: {}", bad.kind, bad.detail)));
        }
        let g = green(p, &default_values(p))?;
        let rep = check_structure(p, &g)?;
        ensure!(
            rep.passed(),
            "{name}: {:?}",
            rep.memory_failures.iter().chain(&rep.stairs_failures).take(3).collect::<Vec<_>>()
        );
        details.push(format!("{name} {}+{}", rep.memory_checks, rep.stairs_checks));
    }
    Ok(format!("memory+stairs checks: {}", details.join(", ")))
}

fn assignment(vars: &[String], aw: &AnnotatedWord) -> Assignment {
    let mut asg = Assignment::new();
    for (v, set) in vars.iter().zip(&aw.predicates) {
        if is_set_var(v) {
            asg.so.insert(v.clone(), set.clone());
        } else if let Some(&p) = set.iter().next() {
            asg.fo.insert(v.clone(), p);
        }
    }
    asg
}

fn no_projectability() -> CompileOptions {
    CompileOptions { projectability_bound: None, ..CompileOptions::default() }
}

fn oracle(_: &SuiteConfig) -> Outcome {
    let mut comparisons = 0usize;
    let mut sentences = 0usize;
    for src in CORPUS {
        let phi = parse(src)?;
        let g = check_grammar(&phi)?;
        ensure!(g.fragment == Fragment::RigidGuarded, "`{src}` is not rigidly guarded: {:?}", g.reason);
        let (c, _) = compile_with(&phi, &no_projectability())?;
        let singletons = c.singleton_tracks();
        for w in DataWord::enumerate_up_to(&c.tags(), 3, 4) {
            for aw in AnnotatedWord::annotations(&w, c.free_vars.len(), &singletons) {
                let asg = assignment(&c.free_vars, &aw);
                let by_monoid = c.recognizer.member_annotated(&aw)?;
                let by_eval = evaluate(&phi, &w, &asg)?;
                ensure!(by_monoid == by_eval, "`{src}` on `{w}` with {asg:?}: monoid {by_monoid}, evaluator {by_eval}");
                comparisons += 1;
            }
        }
        if c.free_vars.is_empty() {
            sentences += 1;
            let res = satisfiable(&phi)?;
            let nonempty = !is_empty(&c.recognizer)?;
            ensure!(res.satisfiable == nonempty, "`{src}`: satisfiable {} but non-empty {nonempty}", res.satisfiable);
            if let Some(w) = &res.witness {
                ensure!(member(&c.recognizer, w)?, "`{src}`: witness `{w}` rejected by the monoid");
            }
        }
    }
    Ok(format!("{} formulas ({sentences} sentences), {comparisons} comparisons, 0 disagreements", CORPUS.len()))
}

fn rigidity(_: &SuiteConfig) -> Outcome {
    let bounded = RigidityMode::Bounded { max_len: 5, max_value: 4 };
    let exact = RigidityMode::default();
    for (src, expected) in GUARDS {
        let phi = parse(src)?;
        let tags: Vec<Tag> = phi.default_alphabet();
        let e = check_rigidity(&phi, "x", "y", exact, &tags)?;
        let b = check_rigidity(&phi, "x", "y", bounded, &tags)?;
        ensure!(e.status == b.status, "`{src}`: exact {:?}, bounded {:?}", e.status, b.status);
        let want = if *expected { RigidityStatus::Rigid } else { RigidityStatus::NotRigid };
        ensure!(e.status == want, "`{src}` is {:?}", e.status);
        if let Some((w, pos)) = &e.counterexample {
            ensure!(!*expected && !w.is_empty() && pos.len() == 3, "`{src}`: malformed counterexample");
        }
    }
    Ok(format!("{} guards, exact and bounded (5,4) agree; succ rigid, x != y not", GUARDS.len()))
}

fn sat(_: &SuiteConfig) -> Outcome {
    let dagger = parse(DAGGER)?;
    let g = check_grammar(&dagger)?;
    ensure!(g.fragment == Fragment::Neither, "dagger accepted as {:?}", g.fragment);
    let mut lengths = Vec::new();
    for k in 1..=3 {
        let phi = at_least_values(k).expect("k is at most 3");
        let res = satisfiable(&phi)?;
        let w = res.witness.ok_or_else(|| Fail(format!("L>={k} reported unsatisfiable")))?;
        ensure!(w.len() == k, "L>={k} witness `{w}` has length {}", w.len());
        ensure!(evaluate(&phi, &w, &Assignment::new())?, "L>={k} witness `{w}` fails evaluation");
        ensure!(at_least_values_oracle(&w, k), "L>={k} witness `{w}` has too few values");
        for shorter in DataWord::enumerate_canonical(&phi.default_alphabet(), k as DataValue, k - 1) {
            ensure!(!evaluate(&phi, &shorter, &Assignment::new())?, "L>={k} holds on shorter `{shorter}`");
        }
        lengths.push(w.len());
    }
    Ok(format!("dagger rejected; witness lengths {lengths:?}"))
}

fn fma_suite(_: &SuiteConfig) -> Outcome {
    let words = DataWord::enumerate_up_to(&[Tag::new("a")], 4, 6);
    let arc = fma::l_arc();
    let star = fma::l_arc_star();
    ensure!(arc.is_deterministic() && star.is_deterministic(), "an example automaton is not deterministic");
    let l2 = fixtures::l2_recognizer();
    let from_l2 = fma::from_morphism(&l2)?;
    for w in &words {
        ensure!(arc.accepts(w) == fma::l_arc_oracle(w), "L_arc differs on `{w}`");
        ensure!(star.accepts(w) == fma::l_arc_star_oracle(w), "L_arc* differs on `{w}`");
        ensure!(from_l2.accepts(w) == member(&l2, w)?, "L2 automaton differs on `{w}`");
    }
    Ok(format!("{} words, 0 disagreements, both deterministic", words.len()))
}

fn projectability(_: &SuiteConfig) -> Outcome {
    let opts = CompileOptions { keep_stages: true, ..no_projectability() };
    let mut stages = 0usize;
    let mut kinds = BTreeSet::new();
    for src in CORPUS {
        let (_, trace) = compile_with(&parse(src)?, &opts)?;
        for stage in &trace.stages {
            let Some(lang) = &stage.language else { continue };
            if let Some(v) = check_projectable(&lang.recognizer, &lang.tags(), 4, 3)? {
                return Err(Fail(format!("`{src}`, {:?} stage `{}`: {v}", stage.kind, stage.formula)));
            }
            stages += 1;
            kinds.insert(format!("{:?}", stage.kind));
        }
    }
    Ok(format!("{stages} stages over {} kinds, 0 violations", kinds.len()))
}

/// JSON form of a suite run.
pub fn report_json(results: &[CheckResult]) -> Value {
    json!({
        "schema_version": crate::SCHEMA_VERSION,
        "passed": results.iter().all(|r| r.passed),
        "checks": results.iter().map(CheckResult::to_json).collect::<Vec<_>>(),
    })
}
