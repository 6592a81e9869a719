//! Rigidly guarded formulas to orbit-finite monoids, by structural induction.
//!
//! Every stage produces a [`Recognizer`] over the expanded alphabet
//! `A × {0,1}^m`, one track per free variable in sorted order.  First-order
//! variables are singleton tracks: atoms accept only singleton annotations and
//! a first-order quantifier conjoins a singleton constraint before projecting.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixtures;
use crate::logic::{check_grammar_with, is_set_var, Assignment, Formula, Fragment, Polarity, RigidityMode, Var};
use crate::morphism::{
    expanded_alphabet, materialize, syntactic_quotient, AnnotatedWord, ConcreteMonoid, Morphism, PresentedMonoid,
    Recognizer, Sym, DEFAULT_ORBIT_BUDGET,
};
use crate::msoclassic::{compile_mso, DEFAULT_STATE_BUDGET};
use crate::nominal::{DataValue, DataWord, Renaming, Tag};
use crate::presentation::{OrbitId, Term};

/// A recognizer together with the variable carried by each track.
#[derive(Clone, Debug)]
pub struct CompiledLanguage {
    pub recognizer: Recognizer,
    pub free_vars: Vec<Var>,
}

impl CompiledLanguage {
    pub fn orbit_count(&self) -> usize {
        self.recognizer.orbit_count()
    }

    pub fn tags(&self) -> Vec<Tag> {
        self.recognizer.morphism.tags()
    }

    /// Tracks that hold first-order variables.
    pub fn singleton_tracks(&self) -> Vec<bool> {
        self.free_vars.iter().map(|v| !is_set_var(v)).collect()
    }

    pub fn annotate(&self, w: &DataWord, asg: &Assignment) -> Result<AnnotatedWord> {
        let predicates = self
            .free_vars
            .iter()
            .map(|v| {
                if is_set_var(v) {
                    asg.so.get(v).cloned().ok_or_else(|| Error::UnboundVariable(v.clone()))
                } else {
                    asg.fo.get(v).map(|&p| BTreeSet::from([p])).ok_or_else(|| Error::UnboundVariable(v.clone()))
                }
            })
            .collect::<Result<_>>()?;
        Ok(AnnotatedWord { word: w.clone(), predicates })
    }

    pub fn member(&self, w: &DataWord, asg: &Assignment) -> Result<bool> {
        self.recognizer.member_annotated(&self.annotate(w, asg)?)
    }

    /// Re-tracks over `vars`, a sorted superset of the current variables;
    /// the new tracks are ignored.
    pub fn cylindrify(&self, vars: &[Var]) -> Result<CompiledLanguage> {
        if vars == self.free_vars.as_slice() {
            return Ok(self.clone());
        }
        let pos: Vec<usize> = self
            .free_vars
            .iter()
            .map(|v| {
                vars.iter()
                    .position(|w| w == v)
                    .ok_or_else(|| Error::Unsupported(format!("cylindrify drops variable {v}")))
            })
            .collect::<Result<_>>()?;
        let m = &self.recognizer.morphism;
        let mut images = std::collections::BTreeMap::new();
        for sym in expanded_alphabet(&m.tags(), vars.len()) {
            let mut bits = 0;
            for (j, &p) in pos.iter().enumerate() {
                bits |= (sym.bits >> p & 1) << j;
            }
            let img = m.images[&Sym { tag: sym.tag.clone(), bits }].clone();
            images.insert(sym, img);
        }
        let morphism = Morphism { target: m.target.clone(), tracks: vars.len(), images };
        Ok(CompiledLanguage {
            recognizer: Recognizer { morphism, accepting: self.recognizer.accepting.clone() },
            free_vars: vars.to_vec(),
        })
    }

    /// Complement on the same presentation.
    pub fn negate(&self) -> CompiledLanguage {
        let all: BTreeSet<OrbitId> = (0..self.orbit_count()).collect();
        let accepting = all.difference(&self.recognizer.accepting).copied().collect();
        CompiledLanguage {
            recognizer: Recognizer { morphism: self.recognizer.morphism.clone(), accepting },
            free_vars: self.free_vars.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CompileOptions {
    /// Tag alphabet; the formula's own tags (or `{a}`) when empty.
    pub tags: Vec<Tag>,
    pub orbit_budget: usize,
    /// Replace each stage's output by its syntactic quotient.
    pub quotient_each_stage: bool,
    /// How guards are checked for rigidity before compiling.
    pub rigidity: RigidityMode,
    /// Assert projectability before every powerset step on words of length
    /// `<= .0` over values `1..=.1`.
    pub projectability_bound: Option<(usize, DataValue)>,
    /// Keep a copy of every stage's recognizer in the trace.
    pub keep_stages: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            tags: Vec::new(),
            orbit_budget: DEFAULT_ORBIT_BUDGET,
            quotient_each_stage: true,
            rigidity: RigidityMode::Exact { budget: DEFAULT_STATE_BUDGET },
            projectability_bound: Some((4, 3)),
            keep_stages: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    Atom,
    And,
    Or,
    Iff,
    Not,
    Cylindrify,
    Powerset,
    ImageSubmonoid,
    IdealQuotient,
    ZeroCollapse,
    Quotient,
}

#[derive(Clone, Debug)]
pub struct Stage {
    pub kind: StageKind,
    pub formula: String,
    pub orbits: usize,
    pub language: Option<CompiledLanguage>,
}

#[derive(Clone, Debug, Default)]
pub struct CompileTrace {
    pub stages: Vec<Stage>,
}

struct Compiler<'a> {
    opts: &'a CompileOptions,
    tags: Vec<Tag>,
    trace: CompileTrace,
}

impl Compiler<'_> {
    fn record(&mut self, kind: StageKind, f: &Formula, c: &CompiledLanguage) {
        let language = self.opts.keep_stages.then(|| c.clone());
        self.trace.stages.push(Stage { kind, formula: f.to_string(), orbits: c.orbit_count(), language });
    }

    fn finish(&mut self, kind: StageKind, f: &Formula, c: CompiledLanguage) -> Result<CompiledLanguage> {
        self.record(kind, f, &c);
        if !self.opts.quotient_each_stage {
            return Ok(c);
        }
        let q = CompiledLanguage {
            recognizer: syntactic_quotient(&c.recognizer, self.opts.orbit_budget)?,
            free_vars: c.free_vars,
        };
        self.record(StageKind::Quotient, f, &q);
        Ok(q)
    }

    fn atom(&mut self, f: &Formula) -> Result<CompiledLanguage> {
        let c = compile_atom(f, &self.tags, self.opts.orbit_budget)?;
        self.finish(StageKind::Atom, f, c)
    }

    fn cylindrify(&mut self, f: &Formula, c: &CompiledLanguage, vars: &[Var]) -> Result<CompiledLanguage> {
        if c.free_vars == vars {
            return Ok(c.clone());
        }
        let out = c.cylindrify(vars)?;
        self.record(StageKind::Cylindrify, f, &out);
        Ok(out)
    }

    fn binary(
        &mut self,
        f: &Formula,
        op: BoolOp,
        a: &CompiledLanguage,
        b: &CompiledLanguage,
    ) -> Result<CompiledLanguage> {
        let vars: Vec<Var> =
            a.free_vars.iter().chain(&b.free_vars).cloned().collect::<BTreeSet<_>>().into_iter().collect();
        let a = self.cylindrify(f, a, &vars)?;
        let b = self.cylindrify(f, b, &vars)?;
        let c = combine(op, &a, &b, self.opts.orbit_budget)?;
        let kind = match op {
            BoolOp::And => StageKind::And,
            BoolOp::Or => StageKind::Or,
            BoolOp::Iff => StageKind::Iff,
        };
        self.finish(kind, f, c)
    }

    fn not(&mut self, f: &Formula, c: &CompiledLanguage) -> CompiledLanguage {
        let out = c.negate();
        self.record(StageKind::Not, f, &out);
        out
    }

    fn exists(&mut self, f: &Formula, v: &str, body: CompiledLanguage) -> Result<CompiledLanguage> {
        let body = if is_set_var(v) {
            if !body.free_vars.iter().any(|w| w == v) {
                return Ok(body);
            }
            body
        } else {
            let sing = Formula::equal(v, v);
            let s = self.atom(&sing)?;
            self.binary(f, BoolOp::And, &body, &s)?
        };
        if let Some((n, k)) = self.opts.projectability_bound {
            if let Some(viol) = check_projectable(&body.recognizer, &self.tags, n, k)? {
                return Err(Error::Projectability(format!("before projecting {v} in `{f}`: {viol}")));
            }
        }
        let c = powerset_exists(&body, v, self.opts.orbit_budget)?;
        self.finish(StageKind::Powerset, f, c)
    }

    fn build(&mut self, f: &Formula) -> Result<CompiledLanguage> {
        use Formula::*;
        match f {
            True | False | Less(..) | Equal(..) | Succ(..) | First(..) | Last(..) | Tag(..) | In(..) => self.atom(f),
            Not(a) => {
                let a = self.build(a)?;
                Ok(self.not(f, &a))
            }
            And(a, b) | Or(a, b) | Iff(a, b) => {
                let op = match f {
                    And(..) => BoolOp::And,
                    Or(..) => BoolOp::Or,
                    _ => BoolOp::Iff,
                };
                let (a, b) = (self.build(a)?, self.build(b)?);
                self.binary(f, op, &a, &b)
            }
            Implies(a, b) => {
                let a = self.build(a)?;
                let na = self.not(f, &a);
                let b = self.build(b)?;
                self.binary(f, BoolOp::Or, &na, &b)
            }
            ExistsFO(v, body) | ExistsSO(v, body) => {
                let b = self.build(body)?;
                self.exists(f, v, b)
            }
            ForallFO(v, body) | ForallSO(v, body) => {
                let b = self.build(body)?;
                let nb = self.not(f, &b);
                let e = self.exists(f, v, nb)?;
                Ok(self.not(f, &e))
            }
            Rigid { guard, x, y, pol } => {
                if x == y {
                    return Err(Error::Unsupported(format!("guarded test on a single variable in `{f}`")));
                }
                let g = self.build(guard)?;
                let mut vars = vec![x.clone(), y.clone()];
                vars.sort();
                let g = self.cylindrify(f, &g, &vars)?;
                self.guarded_test(f, &g, x, y, *pol)
            }
            Data(..) => Err(Error::Grammar(format!("data test in `{f}` is not wrapped in a guard"))),
            SemiRigid { .. } => Err(Error::Unsupported(format!("semi-rigid tests have no monoid translation: `{f}`"))),
        }
    }

    fn guarded_test(
        &mut self,
        f: &Formula,
        g: &CompiledLanguage,
        x: &str,
        y: &str,
        pol: Polarity,
    ) -> Result<CompiledLanguage> {
        let budget = self.opts.orbit_budget;
        let sub = CompiledLanguage {
            recognizer: materialize(&PresentedMonoid(&g.recognizer), budget)?.recognizer,
            free_vars: g.free_vars.clone(),
        };
        self.record(StageKind::ImageSubmonoid, f, &sub);
        let reduced = ideal_quotient(&sub, budget)?;
        self.record(StageKind::IdealQuotient, f, &reduced);
        let c = zero_collapse(&reduced, x, y, pol, budget)?;
        self.finish(StageKind::ZeroCollapse, f, c)
    }
}

/// Compiles a rigidly guarded formula with default options.
pub fn compile(phi: &Formula) -> Result<CompiledLanguage> {
    Ok(compile_with(phi, &CompileOptions::default())?.0)
}

/// Checks the grammar (including rigidity of every guard) and compiles.
pub fn compile_with(phi: &Formula, opts: &CompileOptions) -> Result<(CompiledLanguage, CompileTrace)> {
    let tags = if opts.tags.is_empty() { phi.default_alphabet() } else { opts.tags.clone() };
    let verdict = check_grammar_with(phi, opts.rigidity, &tags)?;
    match verdict.fragment {
        Fragment::RigidGuarded => {}
        Fragment::SemiRigidGuarded => {
            return Err(Error::Unsupported("semi-rigid tests have no monoid translation".into()));
        }
        Fragment::Neither => return Err(Error::Grammar(verdict.reason.unwrap_or_default())),
    }
    let mut c = Compiler { opts, tags, trace: CompileTrace::default() };
    let out = c.build(phi)?;
    Ok((out, c.trace))
}

/// Transition monoid of a complete deterministic automaton; elements are
/// state maps.
struct TransitionMonoid {
    states: usize,
    initial: u32,
    finals: Vec<bool>,
    letters: Vec<Sym>,
    tracks: usize,
    columns: HashMap<Sym, Vec<u32>>,
}

impl ConcreteMonoid for TransitionMonoid {
    type E = Vec<u32>;

    fn identity(&self) -> Vec<u32> {
        (0..self.states as u32).collect()
    }

    fn product(&self, a: &Vec<u32>, b: &Vec<u32>) -> Result<Vec<u32>> {
        Ok(a.iter().map(|&q| b[q as usize]).collect())
    }

    fn act(&self, _: &Renaming, a: &Vec<u32>) -> Vec<u32> {
        a.clone()
    }

    fn memory(&self, _: &Vec<u32>) -> Vec<DataValue> {
        Vec::new()
    }

    fn letters(&self) -> Vec<Sym> {
        self.letters.clone()
    }

    fn tracks(&self) -> usize {
        self.tracks
    }

    fn image(&self, sym: &Sym, _: DataValue) -> Result<Vec<u32>> {
        self.columns.get(sym).cloned().ok_or_else(|| Error::UnknownLetter(sym.show(self.tracks)))
    }

    fn accepting(&self, a: &Vec<u32>) -> bool {
        self.finals[a[self.initial as usize] as usize]
    }

    fn canonical(&self, a: &Vec<u32>) -> Result<(Vec<u32>, Renaming)> {
        Ok((a.clone(), Renaming::identity()))
    }
}

/// Data-free atom: `x < y`, `succ(x,y)`, `x = y`, `first(x)`, `last(x)`,
/// `a(x)`, `x in X`, `true` or `false`, over its sorted free variables.
/// First-order tracks must be singletons.
pub fn compile_atom(atom: &Formula, tags: &[Tag], budget: usize) -> Result<CompiledLanguage> {
    use Formula::*;
    if !matches!(atom, True | False | Less(..) | Equal(..) | Succ(..) | First(..) | Last(..) | Tag(..) | In(..)) {
        return Err(Error::Unsupported(format!("`{atom}` is not an atom")));
    }
    let (nfa, _) = compile_mso(atom, tags, DEFAULT_STATE_BUDGET)?;
    let dfa = nfa.determinize(DEFAULT_STATE_BUDGET)?.minimize();
    let m = dfa.vars.len();
    let letters = expanded_alphabet(tags, m);
    let columns = letters
        .iter()
        .map(|sym| {
            let t = tags.iter().position(|t| *t == sym.tag).expect("tag in alphabet");
            let l = t << m | sym.bits as usize;
            (sym.clone(), (0..dfa.states() as u32).map(|s| dfa.targets(s, l)[0]).collect())
        })
        .collect();
    let tm = TransitionMonoid {
        states: dfa.states(),
        initial: dfa.initial[0],
        finals: dfa.finals.clone(),
        letters,
        tracks: m,
        columns,
    };
    let built = materialize(&tm, budget)?;
    Ok(CompiledLanguage { recognizer: built.recognizer, free_vars: dfa.vars.clone() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoolOp {
    And,
    Or,
    Iff,
}

struct PairMonoid<'a> {
    a: &'a Recognizer,
    b: &'a Recognizer,
    op: BoolOp,
}

impl ConcreteMonoid for PairMonoid<'_> {
    type E = (Term, Term);

    fn identity(&self) -> (Term, Term) {
        (self.a.presentation().identity(), self.b.presentation().identity())
    }

    fn product(&self, s: &(Term, Term), t: &(Term, Term)) -> Result<(Term, Term)> {
        Ok((self.a.presentation().product(&s.0, &t.0)?, self.b.presentation().product(&s.1, &t.1)?))
    }

    fn act(&self, r: &Renaming, s: &(Term, Term)) -> (Term, Term) {
        (self.a.presentation().act(r, &s.0), self.b.presentation().act(r, &s.1))
    }

    fn memory(&self, s: &(Term, Term)) -> Vec<DataValue> {
        sorted_union(s.0.values.iter().chain(&s.1.values))
    }

    fn letters(&self) -> Vec<Sym> {
        self.a.morphism.letters()
    }

    fn tracks(&self) -> usize {
        self.a.morphism.tracks
    }

    fn image(&self, sym: &Sym, d: DataValue) -> Result<(Term, Term)> {
        Ok((self.a.morphism.image(sym, d)?, self.b.morphism.image(sym, d)?))
    }

    fn accepting(&self, s: &(Term, Term)) -> bool {
        let (x, y) = (self.a.accepts_term(&s.0), self.b.accepts_term(&s.1));
        match self.op {
            BoolOp::And => x && y,
            BoolOp::Or => x || y,
            BoolOp::Iff => x == y,
        }
    }
}

fn sorted_union<'a>(vals: impl Iterator<Item = &'a DataValue>) -> Vec<DataValue> {
    let set: BTreeSet<DataValue> = vals.copied().collect();
    set.into_iter().collect()
}

/// Product construction on two languages over the same tracks.
pub fn combine(op: BoolOp, a: &CompiledLanguage, b: &CompiledLanguage, budget: usize) -> Result<CompiledLanguage> {
    if a.free_vars != b.free_vars {
        return Err(Error::Unsupported("combine needs equal variable lists; cylindrify first".into()));
    }
    let m = PairMonoid { a: &a.recognizer, b: &b.recognizer, op };
    Ok(CompiledLanguage { recognizer: materialize(&m, budget)?.recognizer, free_vars: a.free_vars.clone() })
}

/// Sets of pairwise orbit-distinct elements; the empty set is the null.
struct PowersetMonoid<'a> {
    base: &'a Recognizer,
    track: usize,
    letters: Vec<Sym>,
}

impl PowersetMonoid<'_> {
    /// Empty (the null set) when two members share an orbit without being equal.
    fn normalize(mut s: Vec<Term>) -> Vec<Term> {
        s.sort();
        s.dedup();
        if s.windows(2).any(|w| w[0].orbit == w[1].orbit) {
            return Vec::new();
        }
        s
    }

    fn widen(&self, sym: &Sym, bit: u32) -> Sym {
        let low = sym.bits & ((1 << self.track) - 1);
        let high = (sym.bits >> self.track) << (self.track + 1);
        Sym { tag: sym.tag.clone(), bits: low | bit << self.track | high }
    }
}

impl ConcreteMonoid for PowersetMonoid<'_> {
    type E = Vec<Term>;

    fn identity(&self) -> Vec<Term> {
        vec![self.base.presentation().identity()]
    }

    fn product(&self, s: &Vec<Term>, t: &Vec<Term>) -> Result<Vec<Term>> {
        let p = self.base.presentation();
        let mut out = Vec::with_capacity(s.len() * t.len());
        for a in s {
            for b in t {
                out.push(p.product(a, b)?);
            }
        }
        Ok(Self::normalize(out))
    }

    fn act(&self, r: &Renaming, s: &Vec<Term>) -> Vec<Term> {
        let p = self.base.presentation();
        let mut out: Vec<Term> = s.iter().map(|t| p.act(r, t)).collect();
        out.sort();
        out
    }

    fn memory(&self, s: &Vec<Term>) -> Vec<DataValue> {
        sorted_union(s.iter().flat_map(|t| t.values.iter()))
    }

    fn letters(&self) -> Vec<Sym> {
        self.letters.clone()
    }

    fn tracks(&self) -> usize {
        self.base.morphism.tracks - 1
    }

    fn image(&self, sym: &Sym, d: DataValue) -> Result<Vec<Term>> {
        let h = &self.base.morphism;
        Ok(Self::normalize(vec![h.image(&self.widen(sym, 0), d)?, h.image(&self.widen(sym, 1), d)?]))
    }

    fn accepting(&self, s: &Vec<Term>) -> bool {
        s.iter().any(|t| self.base.accepts_term(t))
    }
}

/// `∃var`: the powerset construction keeping one element per orbit.  The
/// input must be projectable over its tracks.
pub fn powerset_exists(c: &CompiledLanguage, var: &str, budget: usize) -> Result<CompiledLanguage> {
    let track =
        c.free_vars.iter().position(|v| v == var).ok_or_else(|| Error::Unsupported(format!("no track for {var}")))?;
    let m = PowersetMonoid { base: &c.recognizer, track, letters: expanded_alphabet(&c.tags(), c.free_vars.len() - 1) };
    let mut free_vars = c.free_vars.clone();
    free_vars.remove(track);
    Ok(CompiledLanguage { recognizer: materialize(&m, budget)?.recognizer, free_vars })
}

/// Orbits from which no two-sided context reaches the accepting set.
pub fn dead_orbits(r: &Recognizer) -> Result<BTreeSet<OrbitId>> {
    let p = r.presentation();
    let n = p.orbits().len();
    let letters = r.morphism.letters();
    let mut rev: Vec<Vec<OrbitId>> = vec![Vec::new(); n];
    for a in 0..n {
        let s = p.orbit_rep(a);
        let k = p.arity(a) as DataValue;
        for sym in &letters {
            for d in 1..=k + 1 {
                let g = r.morphism.image(sym, d)?;
                rev[p.product(&s, &g)?.orbit].push(a);
                rev[p.product(&g, &s)?.orbit].push(a);
            }
        }
    }
    let mut live = vec![false; n];
    let mut queue: VecDeque<OrbitId> = r.accepting.iter().copied().collect();
    for &a in &queue {
        live[a] = true;
    }
    while let Some(b) = queue.pop_front() {
        for &a in &rev[b] {
            if !live[a] {
                live[a] = true;
                queue.push_back(a);
            }
        }
    }
    Ok((0..n).filter(|&a| !live[a]).collect())
}

/// Elements of `base` with the dead ideal collapsed to `None`.
struct IdealQuotient<'a> {
    base: &'a Recognizer,
    dead: BTreeSet<OrbitId>,
}

impl IdealQuotient<'_> {
    fn wrap(&self, t: Term) -> Option<Term> {
        (!self.dead.contains(&t.orbit)).then_some(t)
    }
}

impl ConcreteMonoid for IdealQuotient<'_> {
    type E = Option<Term>;

    fn identity(&self) -> Option<Term> {
        self.wrap(self.base.presentation().identity())
    }

    fn product(&self, s: &Option<Term>, t: &Option<Term>) -> Result<Option<Term>> {
        Ok(match (s, t) {
            (Some(a), Some(b)) => self.wrap(self.base.presentation().product(a, b)?),
            _ => None,
        })
    }

    fn act(&self, r: &Renaming, s: &Option<Term>) -> Option<Term> {
        s.as_ref().map(|t| self.base.presentation().act(r, t))
    }

    fn memory(&self, s: &Option<Term>) -> Vec<DataValue> {
        s.as_ref().map(|t| sorted_union(t.values.iter())).unwrap_or_default()
    }

    fn letters(&self) -> Vec<Sym> {
        self.base.morphism.letters()
    }

    fn tracks(&self) -> usize {
        self.base.morphism.tracks
    }

    fn image(&self, sym: &Sym, d: DataValue) -> Result<Option<Term>> {
        Ok(self.wrap(self.base.morphism.image(sym, d)?))
    }

    fn accepting(&self, s: &Option<Term>) -> bool {
        s.as_ref().is_some_and(|t| self.base.accepts_term(t))
    }
}

/// Collapses the elements that no context can make accepting into a null.
pub fn ideal_quotient(c: &CompiledLanguage, budget: usize) -> Result<CompiledLanguage> {
    let m = IdealQuotient { base: &c.recognizer, dead: dead_orbits(&c.recognizer)? };
    Ok(CompiledLanguage { recognizer: materialize(&m, budget)?.recognizer, free_vars: c.free_vars.clone() })
}

/// The null orbit of a presentation, if it has one.
pub fn null_orbit(r: &Recognizer) -> Result<Option<OrbitId>> {
    let p = r.presentation();
    'candidates: for z in 0..p.orbits().len() {
        if p.arity(z) != 0 {
            continue;
        }
        let zt = Term::nullary(z);
        for b in 0..p.orbits().len() {
            let u = p.orbit_rep(b);
            if p.product(&zt, &u)? != zt || p.product(&u, &zt)? != zt {
                continue 'candidates;
            }
        }
        return Ok(Some(z));
    }
    Ok(None)
}

type Pair0 = Option<(Term, Term)>;

/// Pairs `(s, t)` of a guard element and an `x ~ y` element; a null guard
/// component takes the pair to `None`.
struct ZeroCollapse<'a> {
    guard: &'a Recognizer,
    null: Option<OrbitId>,
    xy: Recognizer,
    jx: usize,
    jy: usize,
    pol: Polarity,
}

impl ZeroCollapse<'_> {
    fn wrap(&self, s: Term, t: Term) -> Option<(Term, Term)> {
        (Some(s.orbit) != self.null).then_some((s, t))
    }
}

impl ConcreteMonoid for ZeroCollapse<'_> {
    type E = Option<(Term, Term)>;

    fn identity(&self) -> Pair0 {
        self.wrap(self.guard.presentation().identity(), self.xy.presentation().identity())
    }

    fn product(&self, s: &Pair0, t: &Pair0) -> Result<Pair0> {
        Ok(match (s, t) {
            (Some((a1, a2)), Some((b1, b2))) => {
                self.wrap(self.guard.presentation().product(a1, b1)?, self.xy.presentation().product(a2, b2)?)
            }
            _ => None,
        })
    }

    fn act(&self, r: &Renaming, s: &Pair0) -> Pair0 {
        s.as_ref().map(|(a, b)| (self.guard.presentation().act(r, a), self.xy.presentation().act(r, b)))
    }

    fn memory(&self, s: &Pair0) -> Vec<DataValue> {
        s.as_ref().map(|(a, b)| sorted_union(a.values.iter().chain(&b.values))).unwrap_or_default()
    }

    fn letters(&self) -> Vec<Sym> {
        self.guard.morphism.letters()
    }

    fn tracks(&self) -> usize {
        2
    }

    fn image(&self, sym: &Sym, d: DataValue) -> Result<Pair0> {
        let bits = (sym.bits >> self.jx & 1) | (sym.bits >> self.jy & 1) << 1;
        let xy_sym = Sym { tag: self.xy.morphism.tags()[0].clone(), bits };
        Ok(self.wrap(self.guard.morphism.image(sym, d)?, self.xy.morphism.image(&xy_sym, d)?))
    }

    fn accepting(&self, s: &Pair0) -> bool {
        let Some((a, b)) = s else { return false };
        let xy = self.xy.presentation();
        let want = match self.pol {
            Polarity::Eq => "r",
            Polarity::Neq => "s",
        };
        self.guard.accepts_term(a) && xy.orbit(b.orbit).name == want
    }
}

/// `guard(x,y) ∧ x ~ y` (or `x ≁ y`) as the 0-collapse product of a reduced
/// guard monoid with the syntactic monoid of `x ~ y`.
pub fn zero_collapse(g: &CompiledLanguage, x: &str, y: &str, pol: Polarity, budget: usize) -> Result<CompiledLanguage> {
    let track = |v: &str| {
        g.free_vars.iter().position(|w| w == v).ok_or_else(|| Error::Unsupported(format!("guard has no track for {v}")))
    };
    if g.free_vars.len() != 2 {
        return Err(Error::Unsupported(format!("guard over {:?}, expected two tracks", g.free_vars)));
    }
    let m = ZeroCollapse {
        guard: &g.recognizer,
        null: null_orbit(&g.recognizer)?,
        xy: fixtures::xy_recognizer(),
        jx: track(x)?,
        jy: track(y)?,
        pol,
    };
    Ok(CompiledLanguage { recognizer: materialize(&m, budget)?.recognizer, free_vars: g.free_vars.clone() })
}

/// Two annotations of one word whose images share an orbit but differ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProjectabilityViolation {
    pub word: DataWord,
    /// Track bits per position for each annotation.
    pub left: Vec<u32>,
    pub right: Vec<u32>,
}

impl std::fmt::Display for ProjectabilityViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "word `{}` with annotations {:?} and {:?}", self.word, self.left, self.right)
    }
}

/// Searches words of length `<= max_len` over values `1..=max_value` (up to
/// renaming) for two annotations with orbit-equal, distinct images.
pub fn check_projectable(
    r: &Recognizer,
    tags: &[Tag],
    max_len: usize,
    max_value: DataValue,
) -> Result<Option<ProjectabilityViolation>> {
    let p = r.presentation();
    let m = r.morphism.tracks;
    let syms: Vec<Vec<Sym>> =
        tags.iter().map(|t| (0..1u32 << m).map(|bits| Sym { tag: t.clone(), bits }).collect()).collect();
    for w in DataWord::enumerate_canonical(tags, max_value, max_len) {
        // Image of each annotated prefix, with one annotation reaching it.
        let mut layer: HashMap<Term, Vec<u32>> = HashMap::from([(p.identity(), Vec::new())]);
        for l in w.letters() {
            let ti = tags.iter().position(|t| *t == l.tag).expect("tag in alphabet");
            let mut next: HashMap<Term, Vec<u32>> = HashMap::new();
            for (s, ann) in &layer {
                for sym in &syms[ti] {
                    let t = p.product(s, &r.morphism.image(sym, l.value)?)?;
                    next.entry(t).or_insert_with(|| {
                        let mut a = ann.clone();
                        a.push(sym.bits);
                        a
                    });
                }
            }
            layer = next;
        }
        let mut by_orbit: HashMap<OrbitId, (&Term, &Vec<u32>)> = HashMap::new();
        for (t, ann) in &layer {
            if let Some((t0, ann0)) = by_orbit.insert(t.orbit, (t, ann)) {
                if t0 != t {
                    return Ok(Some(ProjectabilityViolation {
                        word: w.clone(),
                        left: ann0.clone(),
                        right: ann.clone(),
                    }));
                }
            }
        }
    }
    Ok(None)
}

/// Distinct singleton markings on one track reaching the same non-null image.
pub fn check_zero_reduced(
    c: &CompiledLanguage,
    max_len: usize,
    max_value: DataValue,
) -> Result<Option<(DataWord, usize, usize, usize)>> {
    let r = &c.recognizer;
    let null = null_orbit(r)?;
    let tags = c.tags();
    for w in DataWord::enumerate_canonical(&tags, max_value, max_len) {
        for track in 0..c.free_vars.len() {
            let mut seen: HashMap<Term, usize> = HashMap::new();
            for pos in 1..=w.len() {
                let mut predicates = vec![BTreeSet::new(); c.free_vars.len()];
                predicates[track].insert(pos);
                let t = r.morphism.evaluate_annotated(&AnnotatedWord { word: w.clone(), predicates })?;
                if Some(t.orbit) == null {
                    continue;
                }
                if let Some(&q) = seen.get(&t) {
                    return Ok(Some((w, track, q, pos)));
                }
                seen.insert(t, pos);
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::is_aperiodic;
    use crate::logic::{evaluate, parse, L_GEQ3, PHI_L2};
    use crate::morphism::is_empty;

    fn f(s: &str) -> Formula {
        parse(s).unwrap()
    }

    fn ab() -> Vec<Tag> {
        vec![Tag::new("a"), Tag::new("b")]
    }

    fn word(s: &str) -> DataWord {
        s.parse().unwrap()
    }

    /// Compiled membership against direct evaluation on every word of length
    /// `<= n` over values `1..=3` and every assignment.
    fn agrees(phi: &Formula, c: &CompiledLanguage, n: usize) {
        for w in DataWord::enumerate_canonical(&c.tags(), 3, n) {
            for aw in AnnotatedWord::annotations(&w, c.free_vars.len(), &c.singleton_tracks()) {
                let mut asg = Assignment::new();
                for (v, set) in c.free_vars.iter().zip(&aw.predicates) {
                    if is_set_var(v) {
                        asg.so.insert(v.clone(), set.clone());
                    } else {
                        asg.fo.insert(v.clone(), *set.iter().next().unwrap());
                    }
                }
                assert_eq!(
                    c.recognizer.member_annotated(&aw).unwrap(),
                    evaluate(phi, &w, &asg).unwrap(),
                    "`{phi}` on {w} with {asg:?}"
                );
            }
        }
    }

    #[test]
    fn atoms() {
        let less = compile_atom(&f("x < y"), &ab(), DEFAULT_ORBIT_BUDGET).unwrap();
        let w = word("a@1 a@2 a@3 a@4 a@5 a@6");
        let at = |x, y| Assignment::new().with_fo("x", x).with_fo("y", y);
        assert!(less.member(&w, &at(2, 5)).unwrap());
        assert!(!less.member(&w, &at(5, 2)).unwrap());
        let tag = compile_atom(&f("a(x)"), &ab(), DEFAULT_ORBIT_BUDGET).unwrap();
        assert!(tag.member(&word("a@1"), &Assignment::new().with_fo("x", 1)).unwrap());
        let inn = compile_atom(&f("x in Y"), &ab(), DEFAULT_ORBIT_BUDGET).unwrap();
        let asg = Assignment::new().with_fo("x", 3).with_so("Y", [1, 3]);
        assert!(inn.member(&word("a@1 a@1 b@2 a@3"), &asg).unwrap());
        for src in ["x < y", "succ(x,y)", "x = y", "first(x)", "last(x)", "b(x)", "x in Y", "true", "false"] {
            let c = compile_atom(&f(src), &ab(), DEFAULT_ORBIT_BUDGET).unwrap();
            agrees(&f(src), &c, 4);
            assert_eq!(check_projectable(&c.recognizer, &ab(), 4, 3).unwrap(), None);
        }
    }

    #[test]
    fn booleans_and_cylindrification() {
        let budget = DEFAULT_ORBIT_BUDGET;
        let xy = |c: &CompiledLanguage| c.cylindrify(&["x".to_string(), "y".to_string()]).unwrap();
        let lt = compile_atom(&f("x < y"), &ab(), budget).unwrap();
        let gt = xy(&compile_atom(&f("y < x"), &ab(), budget).unwrap());
        assert!(is_empty(&combine(BoolOp::And, &lt, &gt, budget).unwrap().recognizer).unwrap());
        let same = combine(BoolOp::And, &lt, &lt, budget).unwrap();
        agrees(&f("x < y"), &same, 4);
        assert_eq!(lt.negate().negate().recognizer.accepting, lt.recognizer.accepting);
        let ax = compile_atom(&f("a(x)"), &ab(), budget).unwrap();
        let wide = ax.cylindrify(&["X".to_string(), "x".to_string()]).unwrap();
        for w in DataWord::enumerate_canonical(&ab(), 2, 3) {
            for aw in AnnotatedWord::annotations(&w, 2, &[false, true]) {
                let narrow = AnnotatedWord { word: w.clone(), predicates: vec![aw.predicates[1].clone()] };
                assert_eq!(
                    wide.recognizer.member_annotated(&aw).unwrap(),
                    ax.recognizer.member_annotated(&narrow).unwrap()
                );
            }
        }
        let empty = compile_atom(&Formula::False, &ab(), budget).unwrap().cylindrify(&["x".to_string()]).unwrap();
        assert!(is_empty(&empty.recognizer).unwrap());
    }

    #[test]
    fn existential_successor() {
        let phi = f("E y. succ(x,y)");
        let c = compile(&phi).unwrap();
        let w = word("a@1 a@2 a@3");
        assert!(c.member(&w, &Assignment::new().with_fo("x", 2)).unwrap());
        assert!(!c.member(&w, &Assignment::new().with_fo("x", 3)).unwrap());
    }

    #[test]
    fn guarded_successor_test() {
        let phi = f("rigid[succ(x,y)]{x ~ y}");
        let c = compile(&phi).unwrap();
        let at = Assignment::new().with_fo("x", 1).with_fo("y", 2);
        assert!(c.member(&word("a@1 a@1"), &at).unwrap());
        assert!(!c.member(&word("a@1 a@2"), &at).unwrap());
        agrees(&phi, &c, 4);
    }

    #[test]
    fn stage_two_is_zero_reduced() {
        let opts = CompileOptions { keep_stages: true, ..CompileOptions::default() };
        let (_, trace) = compile_with(&f("rigid[succ(x,y)]{x !~ y}"), &opts).unwrap();
        let reduced: Vec<&CompiledLanguage> = trace
            .stages
            .iter()
            .filter(|s| s.kind == StageKind::IdealQuotient)
            .filter_map(|s| s.language.as_ref())
            .collect();
        assert!(!reduced.is_empty());
        for c in reduced {
            assert_eq!(check_zero_reduced(c, 4, 3).unwrap(), None);
        }
    }

    #[test]
    fn powerset_null_and_singletons() {
        let base = compile_atom(&f("x in X"), &ab(), DEFAULT_ORBIT_BUDGET).unwrap();
        let m = PowersetMonoid { base: &base.recognizer, track: 0, letters: vec![] };
        let p = base.recognizer.presentation();
        let s = vec![p.orbit_rep(1)];
        let t = vec![p.orbit_rep(2.min(p.orbits().len() - 1))];
        assert_eq!(m.product(&s, &t).unwrap(), vec![p.product(&s[0], &t[0]).unwrap()]);
        assert_eq!(m.product(&vec![], &s).unwrap(), Vec::<Term>::new());
        assert_eq!(m.product(&s, &vec![]).unwrap(), Vec::<Term>::new());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig { cases: 48, ..Default::default() })]

        /// A set reached by the powerset construction holds at most one term
        /// per base orbit and equals the images of every marking of the track.
        #[test]
        fn powerset_sets_stay_small(
            case in 0..4usize,
            letters in proptest::collection::vec((0..2usize, 1..=4u32, 0..4u32), 0..5),
        ) {
            let (src, var) = [
                ("x in X & a(x)", "x"),
                ("rigid[succ(x,y)](x,y){x ~ y}", "y"),
                ("x < y & b(y)", "x"),
                ("E y. rigid[succ(x,y)](x,y){x !~ y} & b(x)", "x"),
            ][case];
            let c = compile(&f(src)).unwrap();
            let track = c.free_vars.iter().position(|v| v == var).unwrap();
            let m = PowersetMonoid { base: &c.recognizer, track, letters: vec![] };
            let h = &c.recognizer.morphism;
            let p = c.recognizer.presentation();
            let tags = c.tags();
            let syms: Vec<(Sym, DataValue)> = letters
                .iter()
                .map(|&(t, d, bits)| (Sym { tag: tags[t % tags.len()].clone(), bits: bits & ((1 << (c.free_vars.len() - 1)) - 1) }, d))
                .collect();
            let mut acc = m.identity();
            for (sym, d) in &syms {
                acc = m.product(&acc, &m.image(sym, *d).unwrap()).unwrap();
                proptest::prop_assert!(acc.len() <= c.orbit_count());
            }
            let mut all = Vec::new();
            for marks in 0..1u32 << syms.len() {
                let mut t = p.identity();
                for (i, (sym, d)) in syms.iter().enumerate() {
                    t = p.product(&t, &h.image(&m.widen(sym, marks >> i & 1), *d).unwrap()).unwrap();
                }
                all.push(t);
            }
            proptest::prop_assert_eq!(acc, PowersetMonoid::normalize(all));
        }
    }

    #[test]
    fn running_examples() {
        let l2 = compile(&f(PHI_L2)).unwrap();
        let q = syntactic_quotient(&l2.recognizer, DEFAULT_ORBIT_BUDGET).unwrap();
        assert_eq!(q.orbit_count(), 3);
        assert!(is_aperiodic(q.presentation()).unwrap());
        assert!(is_empty(&compile(&Formula::False).unwrap().recognizer).unwrap());
        let e = compile(&f("E x. E y. rigid[x < y]{x ~ y}"));
        assert!(matches!(e, Err(Error::Grammar(_))), "{e:?}");
    }

    #[test]
    fn at_least_three_values() {
        let c = compile(&f(L_GEQ3)).unwrap();
        let q = syntactic_quotient(&c.recognizer, DEFAULT_ORBIT_BUDGET).unwrap();
        let arities: Vec<usize> = (0..q.orbit_count()).map(|i| q.presentation().arity(i)).collect();
        let mut sorted = arities.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 0, 1, 2], "{arities:?}");
        agrees(&f(L_GEQ3), &c, 5);
    }

    #[test]
    fn corpus_agrees_with_evaluation() {
        for src in [
            "E x. a(x) & last(x)",
            "A x. E y. x < y | last(x)",
            "E X. A x. x in X <-> a(x)",
            "E x. E y. rigid[succ(x,y)]{x !~ y}",
            "A x. A y. rigid[succ(x,y)]{x ~ y}",
            "E x. rigid[first(x) & last(y)](x,y){x ~ y}",
            "rigid[x = y]{x ~ y}",
        ] {
            let phi = f(src);
            let c = compile(&phi).unwrap();
            agrees(&phi, &c, 4);
        }
    }
}
