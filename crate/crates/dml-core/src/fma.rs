//! Finite memory automata: states are orbits with registers, and transitions
//! are representatives whose closure under renaming is implicit.
//!
//! A transition reads a letter whose value either equals register `i` of the
//! source (`=i`) or differs from every register (`fresh`), and fills the
//! target's registers from source registers and the input value.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use crate::error::{Error, Result};
use crate::morphism::{materialize, PresentedMonoid, Recognizer, DEFAULT_ORBIT_BUDGET};
use crate::nominal::{DataValue, DataWord, Tag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pattern {
    /// Input equals register `i` (1-based).
    Reg(usize),
    /// Input differs from all registers.
    Fresh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ValueExpr {
    Reg(usize),
    Input,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateOrbit {
    pub name: String,
    pub arity: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Transition {
    pub source: usize,
    pub tag: Tag,
    pub pattern: Pattern,
    pub target: usize,
    pub update: Vec<ValueExpr>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Config {
    pub orbit: usize,
    pub registers: Vec<DataValue>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fma {
    pub tags: Vec<Tag>,
    pub orbits: Vec<StateOrbit>,
    /// Initial orbits; all have arity 0.
    pub initial: Vec<usize>,
    pub finals: BTreeSet<usize>,
    pub transitions: Vec<Transition>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunReport {
    pub accepted: bool,
    /// Successful runs found, stopping at the count limit.
    pub run_count: usize,
    /// Configurations of the first successful run, initial one included.
    pub trace: Option<Vec<Config>>,
}

impl Fma {
    /// Checks arities, register discipline and initial orbits.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidAutomaton(msg));
        for &i in &self.initial {
            if self.orbits[i].arity != 0 {
                return bad(format!("initial orbit {} has registers", self.orbits[i].name));
            }
        }
        for t in &self.transitions {
            let src = &self.orbits[t.source];
            let tgt = &self.orbits[t.target];
            if !self.tags.contains(&t.tag) {
                return bad(format!("tag {} is not in the alphabet", t.tag));
            }
            if let Pattern::Reg(i) = t.pattern {
                if i == 0 || i > src.arity {
                    return bad(format!("pattern ={i} out of range for {}", src.name));
                }
            }
            if t.update.len() != tgt.arity {
                return bad(format!("target {} expects {} registers", tgt.name, tgt.arity));
            }
            // Registers stay pairwise distinct: resolve the input to the matched
            // register before comparing.
            let resolved: Vec<ValueExpr> = t
                .update
                .iter()
                .map(|&e| match (e, t.pattern) {
                    (ValueExpr::Input, Pattern::Reg(i)) => ValueExpr::Reg(i),
                    _ => e,
                })
                .collect();
            let distinct: BTreeSet<_> = resolved.iter().collect();
            if distinct.len() != resolved.len() {
                return bad(format!("transition from {} repeats a register value", src.name));
            }
            for e in &resolved {
                if let ValueExpr::Reg(i) = *e {
                    if i == 0 || i > src.arity {
                        return bad(format!("register {i} out of range for {}", src.name));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn orbit_id(&self, name: &str) -> Option<usize> {
        self.orbits.iter().position(|o| o.name == name)
    }

    pub fn initial_configs(&self) -> Vec<Config> {
        self.initial.iter().map(|&orbit| Config { orbit, registers: Vec::new() }).collect()
    }

    fn fire(&self, t: &Transition, c: &Config, d: DataValue) -> Config {
        let registers = t
            .update
            .iter()
            .map(|e| match *e {
                ValueExpr::Reg(i) => c.registers[i - 1],
                ValueExpr::Input => d,
            })
            .collect();
        Config { orbit: t.target, registers }
    }

    fn matches(t: &Transition, c: &Config, tag: &Tag, d: DataValue) -> bool {
        t.source == c.orbit
            && t.tag == *tag
            && match t.pattern {
                Pattern::Reg(i) => c.registers[i - 1] == d,
                Pattern::Fresh => !c.registers.contains(&d),
            }
    }

    /// Successors of `c` on the letter `tag@d`, one per matching transition.
    fn successors(&self, c: &Config, tag: &Tag, d: DataValue) -> Vec<Config> {
        self.transitions.iter().filter(|t| Self::matches(t, c, tag, d)).map(|t| self.fire(t, c, d)).collect()
    }

    pub fn step(&self, c: &Config, tag: &Tag, d: DataValue) -> BTreeSet<Config> {
        self.successors(c, tag, d).into_iter().collect()
    }

    /// Subset simulation.
    pub fn accepts(&self, w: &DataWord) -> bool {
        let mut cur: BTreeSet<Config> = self.initial_configs().into_iter().collect();
        for l in w.letters() {
            cur = cur.iter().flat_map(|c| self.step(c, &l.tag, l.value)).collect();
        }
        cur.iter().any(|c| self.finals.contains(&c.orbit))
    }

    /// Depth-first enumeration of successful runs, stopping after `count_limit`.
    /// Parallel transitions to the same configuration count as distinct runs.
    pub fn run(&self, w: &DataWord, count_limit: usize) -> RunReport {
        let mut report = RunReport { accepted: false, run_count: 0, trace: None };
        for c in self.initial_configs() {
            let mut path = vec![c];
            self.dfs(w, &mut path, count_limit, &mut report);
        }
        report.accepted = report.run_count > 0;
        report
    }

    fn dfs(&self, w: &DataWord, path: &mut Vec<Config>, limit: usize, report: &mut RunReport) {
        if report.run_count >= limit {
            return;
        }
        let c = path.last().expect("nonempty path").clone();
        let i = path.len() - 1;
        if i == w.len() {
            if self.finals.contains(&c.orbit) {
                report.run_count += 1;
                if report.trace.is_none() {
                    report.trace = Some(path.clone());
                }
            }
            return;
        }
        let l = &w.letters()[i];
        for next in self.successors(&c, &l.tag, l.value) {
            path.push(next);
            self.dfs(w, path, limit, report);
            path.pop();
        }
    }

    /// One arity-0 initial orbit, and no two transitions with the same source,
    /// tag and pattern but different effects.
    pub fn is_deterministic(&self) -> bool {
        if self.initial.len() != 1 || self.orbits[self.initial[0]].arity != 0 {
            return false;
        }
        let mut seen: HashMap<(usize, &Tag, Pattern), (usize, &Vec<ValueExpr>)> = HashMap::new();
        for t in &self.transitions {
            if let Some(&prev) = seen.get(&(t.source, &t.tag, t.pattern)) {
                if prev != (t.target, &t.update) {
                    return false;
                }
            } else {
                seen.insert((t.source, &t.tag, t.pattern), (t.target, &t.update));
            }
        }
        true
    }

    /// Adds a rejecting sink reached by every missing (source, tag, pattern).
    pub fn complete(&self) -> Fma {
        let mut out = self.clone();
        let sink = out.orbits.len();
        let mut missing = Vec::new();
        for (o, orbit) in
            self.orbits.iter().enumerate().chain(std::iter::once((sink, &StateOrbit { name: String::new(), arity: 0 })))
        {
            for tag in &self.tags {
                let patterns = (1..=orbit.arity).map(Pattern::Reg).chain(std::iter::once(Pattern::Fresh));
                for p in patterns {
                    let present = self.transitions.iter().any(|t| t.source == o && t.tag == *tag && t.pattern == p);
                    if !present {
                        missing.push(Transition {
                            source: o,
                            tag: tag.clone(),
                            pattern: p,
                            target: sink,
                            update: vec![],
                        });
                    }
                }
            }
        }
        let name = fresh_orbit_name(self, "sink");
        out.orbits.push(StateOrbit { name, arity: 0 });
        out.transitions.extend(missing);
        if out.initial.is_empty() {
            out.initial.push(sink);
        }
        out
    }

    /// Complement of a deterministic automaton; nondeterministic ones are refused.
    pub fn complement(&self) -> Result<Fma> {
        if !self.is_deterministic() {
            return Err(Error::Unsupported("complement needs a deterministic automaton".into()));
        }
        let mut out = self.complete();
        out.finals = (0..out.orbits.len()).filter(|o| !self.finals.contains(o)).collect();
        Ok(out)
    }

    pub fn disjoint_union(&self, other: &Fma) -> Fma {
        let off = self.orbits.len();
        let mut out = self.clone();
        for t in &other.tags {
            if !out.tags.contains(t) {
                out.tags.push(t.clone());
            }
        }
        out.orbits.extend(other.orbits.iter().map(|o| StateOrbit { name: format!("{}'", o.name), arity: o.arity }));
        out.initial.extend(other.initial.iter().map(|&i| i + off));
        out.finals.extend(other.finals.iter().map(|&i| i + off));
        out.transitions.extend(other.transitions.iter().map(|t| Transition {
            source: t.source + off,
            target: t.target + off,
            ..t.clone()
        }));
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("alphabet {}\n", self.tags.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(" "));
        for (i, o) in self.orbits.iter().enumerate() {
            s.push_str(&format!("state {}/{}", o.name, o.arity));
            if self.initial.contains(&i) {
                s.push_str(" initial");
            }
            if self.finals.contains(&i) {
                s.push_str(" final");
            }
            s.push('\n');
        }
        for t in &self.transitions {
            let src = &self.orbits[t.source];
            let regs: Vec<String> = (1..=src.arity).map(|i| i.to_string()).collect();
            let pat = match t.pattern {
                Pattern::Reg(i) => format!("={i}"),
                Pattern::Fresh => "fresh".into(),
            };
            let upd: Vec<String> = t
                .update
                .iter()
                .map(|e| match e {
                    ValueExpr::Reg(i) => i.to_string(),
                    ValueExpr::Input => "in".into(),
                })
                .collect();
            s.push_str(&format!(
                "trans {}({}) {}@{} -> {}({})\n",
                src.name,
                regs.join(","),
                t.tag,
                pat,
                self.orbits[t.target].name,
                upd.join(",")
            ));
        }
        s
    }
}

fn fresh_orbit_name(a: &Fma, base: &str) -> String {
    let mut name = base.to_string();
    while a.orbit_id(&name).is_some() {
        name.push('_');
    }
    name
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let regs: Vec<String> = self.registers.iter().map(|d| d.to_string()).collect();
        write!(f, "#{}({})", self.orbit, regs.join(","))
    }
}

/// Parses the text format:
///
/// ```text
/// alphabet a b
/// state q/1 initial
/// state acc/0 final
/// trans q(1) a@=1 -> acc()
/// trans q(1) a@fresh -> q(1)
/// trans init() a@fresh -> q(in)
/// ```
///
/// In target tuples a number names a source register and `in` the input.
pub fn parse_fma(src: &str) -> Result<Fma> {
    let mut a = Fma { tags: vec![], orbits: vec![], initial: vec![], finals: BTreeSet::new(), transitions: vec![] };
    let mut pending = Vec::new();
    for (n, raw) in src.lines().enumerate() {
        let line_no = n + 1;
        let err = |msg: String| Error::Parse { line: line_no, col: 1, msg };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (kw, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        match kw {
            "alphabet" => {
                for t in rest.split_whitespace() {
                    if !a.tags.iter().any(|x| x.as_str() == t) {
                        a.tags.push(Tag::new(t));
                    }
                }
            }
            "state" => {
                let mut words = rest.split_whitespace();
                let decl = words.next().ok_or_else(|| err("missing state name".into()))?;
                let (name, arity) =
                    decl.split_once('/').ok_or_else(|| err(format!("expected name/arity, found `{decl}`")))?;
                let arity: usize = arity.parse().map_err(|_| err(format!("bad arity `{arity}`")))?;
                if a.orbit_id(name).is_some() {
                    return Err(err(format!("state {name} declared twice")));
                }
                let id = a.orbits.len();
                a.orbits.push(StateOrbit { name: name.to_string(), arity });
                for flag in words {
                    match flag {
                        "initial" => a.initial.push(id),
                        "final" => {
                            a.finals.insert(id);
                        }
                        other => return Err(err(format!("unknown state flag `{other}`"))),
                    }
                }
            }
            "trans" => pending.push((line_no, rest.to_string())),
            other => return Err(err(format!("unknown keyword `{other}`"))),
        }
    }
    for (line_no, rest) in pending {
        let t = parse_transition(&a, &rest).map_err(|msg| Error::Parse { line: line_no, col: 1, msg })?;
        if !a.tags.contains(&t.tag) {
            a.tags.push(t.tag.clone());
        }
        a.transitions.push(t);
    }
    a.validate()?;
    Ok(a)
}

fn split_call(s: &str) -> std::result::Result<(&str, Vec<&str>), String> {
    let s = s.trim();
    let open = s.find('(').ok_or_else(|| format!("expected `name(...)`, found `{s}`"))?;
    let inner = s[open + 1..].strip_suffix(')').ok_or_else(|| format!("missing `)` in `{s}`"))?;
    let args = if inner.trim().is_empty() { vec![] } else { inner.split(',').map(str::trim).collect() };
    Ok((&s[..open], args))
}

fn parse_transition(a: &Fma, rest: &str) -> std::result::Result<Transition, String> {
    let (lhs, rhs) = rest.split_once("->").ok_or("missing `->`")?;
    let mut parts = lhs.split_whitespace();
    let src = parts.next().ok_or("missing source")?;
    let letter = parts.next().ok_or("missing letter")?;
    let (sname, sargs) = split_call(src)?;
    let source = a.orbit_id(sname).ok_or_else(|| format!("unknown state {sname}"))?;
    if sargs.len() != a.orbits[source].arity {
        return Err(format!("{sname} has arity {}", a.orbits[source].arity));
    }
    let (tag, pat) = letter.split_once('@').ok_or_else(|| format!("expected tag@pattern, found `{letter}`"))?;
    let pattern = match pat {
        "fresh" => Pattern::Fresh,
        p => {
            Pattern::Reg(p.strip_prefix('=').and_then(|i| i.parse().ok()).ok_or_else(|| format!("bad pattern `{p}`"))?)
        }
    };
    let (tname, targs) = split_call(rhs)?;
    let target = a.orbit_id(tname).ok_or_else(|| format!("unknown state {tname}"))?;
    let update = targs
        .iter()
        .map(|e| match *e {
            "in" => Ok(ValueExpr::Input),
            n => n.parse().map(ValueExpr::Reg).map_err(|_| format!("bad register expression `{n}`")),
        })
        .collect::<std::result::Result<_, String>>()?;
    Ok(Transition { source, tag: Tag::new(tag), pattern, target, update })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProductMode {
    Union,
    Intersection,
}

/// Symbolic register of a product state: register `i` of the pair, or the input.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
enum Sv {
    Reg(usize),
    Input,
}

/// Pair construction.  A product orbit records both component orbits and
/// which registers of the second component repeat one of the first.
pub fn product(a1: &Fma, a2: &Fma, mode: ProductMode) -> Result<Fma> {
    let mut tags = a1.tags.clone();
    for t in &a2.tags {
        if !tags.contains(t) {
            tags.push(t.clone());
        }
    }
    let widen = |a: &Fma| Fma { tags: tags.clone(), ..a.clone() };
    let (b1, b2) = (widen(a1).complete(), widen(a2).complete());
    // (orbit1, orbit2, share) where share[j] = Some(i) if register j of the
    // second component is register i of the first.
    type Key = (usize, usize, Vec<Option<usize>>);
    let mut index: HashMap<Key, usize> = HashMap::new();
    let mut keys: Vec<Key> = Vec::new();
    let mut queue = VecDeque::new();
    let mut initial = Vec::new();
    for &i in &b1.initial {
        for &j in &b2.initial {
            let k = (i, j, vec![]);
            index.insert(k.clone(), keys.len());
            initial.push(keys.len());
            keys.push(k.clone());
            queue.push_back(k);
        }
    }
    let mut transitions = Vec::new();
    while let Some(key) = queue.pop_front() {
        let (o1, o2, share) = key.clone();
        let k1 = b1.orbits[o1].arity;
        // Product register for each register of component 2.
        let mut pos2 = Vec::new();
        let mut extra = 0;
        for s in &share {
            match s {
                Some(i) => pos2.push(*i),
                None => {
                    extra += 1;
                    pos2.push(k1 + extra);
                }
            }
        }
        let k = k1 + extra;
        for tag in &tags {
            for pat in (1..=k).map(Pattern::Reg).chain(std::iter::once(Pattern::Fresh)) {
                let p1 = match pat {
                    Pattern::Reg(i) if i <= k1 => Pattern::Reg(i),
                    _ => Pattern::Fresh,
                };
                let p2 = match pat {
                    Pattern::Reg(i) => {
                        pos2.iter().position(|&p| p == i).map_or(Pattern::Fresh, |j| Pattern::Reg(j + 1))
                    }
                    Pattern::Fresh => Pattern::Fresh,
                };
                let input = match pat {
                    Pattern::Reg(i) => Sv::Reg(i),
                    Pattern::Fresh => Sv::Input,
                };
                let resolve1 = |e: &ValueExpr| match *e {
                    ValueExpr::Reg(i) => Sv::Reg(i),
                    ValueExpr::Input => input,
                };
                let resolve2 = |e: &ValueExpr| match *e {
                    ValueExpr::Reg(j) => Sv::Reg(pos2[j - 1]),
                    ValueExpr::Input => input,
                };
                for t1 in b1.transitions.iter().filter(|t| t.source == o1 && t.tag == *tag && t.pattern == p1) {
                    for t2 in b2.transitions.iter().filter(|t| t.source == o2 && t.tag == *tag && t.pattern == p2) {
                        let r1: Vec<Sv> = t1.update.iter().map(resolve1).collect();
                        let r2: Vec<Sv> = t2.update.iter().map(resolve2).collect();
                        let new_share: Vec<Option<usize>> =
                            r2.iter().map(|v| r1.iter().position(|u| u == v).map(|i| i + 1)).collect();
                        let mut update: Vec<Sv> = r1.clone();
                        update.extend(r2.iter().zip(&new_share).filter(|(_, s)| s.is_none()).map(|(v, _)| *v));
                        let tk = (t1.target, t2.target, new_share);
                        let target = match index.get(&tk) {
                            Some(&id) => id,
                            None => {
                                let id = keys.len();
                                index.insert(tk.clone(), id);
                                keys.push(tk.clone());
                                queue.push_back(tk);
                                id
                            }
                        };
                        let update = update
                            .into_iter()
                            .map(|v| match v {
                                Sv::Reg(i) => ValueExpr::Reg(i),
                                Sv::Input => ValueExpr::Input,
                            })
                            .collect();
                        transitions.push(Transition {
                            source: index[&key],
                            tag: tag.clone(),
                            pattern: pat,
                            target,
                            update,
                        });
                    }
                }
            }
        }
    }
    let orbits = keys
        .iter()
        .map(|(o1, o2, share)| {
            let extra = share.iter().filter(|s| s.is_none()).count();
            let sh: Vec<String> = share.iter().map(|s| s.map_or("_".into(), |i| i.to_string())).collect();
            StateOrbit {
                name: format!("{}*{}[{}]", b1.orbits[*o1].name, b2.orbits[*o2].name, sh.join(",")),
                arity: b1.orbits[*o1].arity + extra,
            }
        })
        .collect();
    let finals = keys
        .iter()
        .enumerate()
        .filter(|(_, (o1, o2, _))| {
            let (f1, f2) = (b1.finals.contains(o1), b2.finals.contains(o2));
            match mode {
                ProductMode::Union => f1 || f2,
                ProductMode::Intersection => f1 && f2,
            }
        })
        .map(|(i, _)| i)
        .collect();
    let out = Fma { tags, orbits, initial, finals, transitions };
    out.validate()?;
    Ok(out)
}

/// Deterministic automaton whose configurations are the monoid elements
/// reached so far; registers hold the element's memory.
pub fn from_morphism(r: &Recognizer) -> Result<Fma> {
    let built = materialize(&PresentedMonoid(r), DEFAULT_ORBIT_BUDGET)?;
    let r = built.recognizer;
    let p = r.presentation();
    let tags = r.morphism.tags();
    let orbits: Vec<StateOrbit> =
        p.orbits().iter().map(|o| StateOrbit { name: o.name.clone(), arity: o.arity }).collect();
    let mut transitions = Vec::new();
    for (i, o) in orbits.iter().enumerate() {
        let rep = p.orbit_rep(i);
        let k = o.arity as DataValue;
        for sym in r.morphism.letters() {
            for pat in (1..=o.arity).map(Pattern::Reg).chain(std::iter::once(Pattern::Fresh)) {
                let d = match pat {
                    Pattern::Reg(j) => rep.values[j - 1],
                    Pattern::Fresh => k + 1,
                };
                let t = p.product(&rep, &r.morphism.image(&sym, d)?)?;
                let update = t
                    .values
                    .iter()
                    .map(|&v| match rep.values.iter().position(|&u| u == v) {
                        Some(j) => Ok(ValueExpr::Reg(j + 1)),
                        None if v == d => Ok(ValueExpr::Input),
                        None => Err(Error::SupportOverflow(format!("product remembers foreign value {v}"))),
                    })
                    .collect::<Result<_>>()?;
                transitions.push(Transition { source: i, tag: sym.tag.clone(), pattern: pat, target: t.orbit, update });
            }
        }
    }
    let out = Fma {
        tags,
        orbits,
        initial: vec![p.identity_orbit()],
        finals: r.accepting.iter().copied().collect(),
        transitions,
    };
    out.validate()?;
    Ok(out)
}

/// A word of length `<= n` over values `1..=k` (up to renaming) with more
/// than one successful run, and its run count.
pub fn unambiguity_bounded(a: &Fma, n: usize, k: DataValue) -> Option<(DataWord, usize)> {
    DataWord::enumerate_canonical(&a.tags, k, n).into_iter().find_map(|w| {
        let r = a.run(&w, 2);
        (r.run_count > 1).then_some((w, r.run_count))
    })
}

/// `L_↷`: at least two letters, and the first value occurs again later.
pub const L_ARC_TEXT: &str = include_str!("../fixtures/l_arc.fma");
/// `L_↷*`: a sequence of segments of length at least two, each ending with
/// its first value and not repeating it inside.
pub const L_ARC_STAR_TEXT: &str = include_str!("../fixtures/l_arc_star.fma");
/// `L_↷` with an extra guess: the automaton may skip a matching value.
pub const L_ARC_GUESS_TEXT: &str = include_str!("../fixtures/l_arc_guess.fma");

pub fn l_arc() -> Fma {
    parse_fma(L_ARC_TEXT).expect("shipped automaton parses")
}

pub fn l_arc_star() -> Fma {
    parse_fma(L_ARC_STAR_TEXT).expect("shipped automaton parses")
}

pub fn l_arc_guess() -> Fma {
    parse_fma(L_ARC_GUESS_TEXT).expect("shipped automaton parses")
}

/// Brute-force membership in `L_↷`.
pub fn l_arc_oracle(w: &DataWord) -> bool {
    let v = w.letters();
    v.len() >= 2 && v[1..].iter().any(|l| l.value == v[0].value)
}

/// Brute-force membership in `L_↷*`: tries every way of cutting the word
/// into segments.
pub fn l_arc_star_oracle(w: &DataWord) -> bool {
    fn from(v: &[DataValue]) -> bool {
        v.is_empty() || (1..v.len()).any(|k| v[k] == v[0] && !v[1..k].contains(&v[0]) && from(&v[k + 1..]))
    }
    let v: Vec<DataValue> = w.letters().iter().map(|l| l.value).collect();
    from(&v)
}

/// Reachable configurations, grouped by orbit, on words of length `<= n`.
pub fn reachable_configs(a: &Fma, n: usize, k: DataValue) -> BTreeMap<usize, BTreeSet<Vec<DataValue>>> {
    let mut out: BTreeMap<usize, BTreeSet<Vec<DataValue>>> = BTreeMap::new();
    let mut layer: BTreeSet<Config> = a.initial_configs().into_iter().collect();
    for _ in 0..=n {
        for c in &layer {
            out.entry(c.orbit).or_default().insert(c.registers.clone());
        }
        let mut next = BTreeSet::new();
        for c in &layer {
            for tag in &a.tags {
                for d in 1..=k {
                    next.extend(a.step(c, tag, d));
                }
            }
        }
        layer = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::morphism::member;
    use crate::nominal::{Letter, Renaming};

    fn w(s: &str) -> DataWord {
        s.parse().unwrap()
    }

    fn words(n: usize, k: DataValue) -> Vec<DataWord> {
        DataWord::enumerate_up_to(&[Tag::new("a")], k, n)
    }

    #[test]
    fn arc_steps() {
        let a = l_arc();
        let init = a.initial_configs()[0].clone();
        let a_tag = Tag::new("a");
        let stored: Vec<Config> = a.step(&init, &a_tag, 5).into_iter().collect();
        assert_eq!(stored, vec![Config { orbit: a.orbit_id("q").unwrap(), registers: vec![5] }]);
        let acc: Vec<Config> = a.step(&stored[0], &a_tag, 5).into_iter().collect();
        assert!(a.finals.contains(&acc[0].orbit));
        assert_eq!(a.step(&stored[0], &a_tag, 7).into_iter().collect::<Vec<_>>(), stored);
    }

    #[test]
    fn arc_runs() {
        let a = l_arc();
        let r = a.run(&w("a@5 a@7 a@5"), 10);
        assert!(r.accepted);
        assert_eq!(r.run_count, 1);
        assert_eq!(r.trace.unwrap().len(), 4);
        assert!(!a.run(&w("a@5 a@7 a@8"), 10).accepted);
        for fma in [l_arc(), l_arc_star(), l_arc_guess()] {
            let eps = fma.run(&DataWord::empty(), 10).accepted;
            assert_eq!(eps, fma.initial.iter().any(|i| fma.finals.contains(i)));
        }
    }

    #[test]
    fn examples_match_their_definitions() {
        let (arc, star) = (l_arc(), l_arc_star());
        assert!(arc.is_deterministic() && star.is_deterministic());
        for word in words(6, 4) {
            assert_eq!(arc.accepts(&word), l_arc_oracle(&word), "{word}");
            assert_eq!(star.accepts(&word), l_arc_star_oracle(&word), "{word}");
            assert_eq!(arc.run(&word, 2).accepted, l_arc_oracle(&word));
        }
    }

    #[test]
    fn acceptance_is_equivariant() {
        let a = l_arc_star();
        let tau = Renaming::cycle(&[1, 2, 9]).unwrap();
        for word in words(5, 3) {
            assert_eq!(a.accepts(&word), a.accepts(&tau.act_word(&word)));
        }
    }

    #[test]
    fn determinism_and_unambiguity() {
        let a = l_arc();
        assert!(!a.disjoint_union(&a).is_deterministic());
        assert_eq!(unambiguity_bounded(&a, 5, 4), None);
        assert_eq!(unambiguity_bounded(&l_arc_star(), 5, 4), None);
        let guess = l_arc_guess();
        assert!(!guess.is_deterministic());
        let (cw, count) = unambiguity_bounded(&guess, 5, 4).unwrap();
        assert!(count > 1);
        assert!(guess.run(&cw, 10).run_count > 1);
        for word in words(5, 3) {
            assert_eq!(guess.accepts(&word), l_arc_oracle(&word));
        }
    }

    #[test]
    fn products_and_complement() {
        let a = l_arc();
        let full = parse_fma("state s/0 initial final\ntrans s() a@fresh -> s()").unwrap();
        let empty = parse_fma("alphabet a\nstate s/0 initial").unwrap();
        let inter = product(&a, &full, ProductMode::Intersection).unwrap();
        let uni = product(&empty, &a, ProductMode::Union).unwrap();
        let none = product(&a, &a.complement().unwrap(), ProductMode::Intersection).unwrap();
        let both = product(&a, &l_arc_star(), ProductMode::Intersection).unwrap();
        let either = product(&a, &l_arc_star(), ProductMode::Union).unwrap();
        assert!(inter.is_deterministic());
        for word in words(5, 4) {
            assert_eq!(inter.accepts(&word), a.accepts(&word));
            assert_eq!(uni.accepts(&word), a.accepts(&word));
            assert!(!none.accepts(&word));
            assert_eq!(both.accepts(&word), l_arc_oracle(&word) && l_arc_star_oracle(&word), "{word}");
            assert_eq!(either.accepts(&word), l_arc_oracle(&word) || l_arc_star_oracle(&word), "{word}");
        }
        assert!(l_arc_guess().complement().is_err());
    }

    #[test]
    fn morphism_bridge() {
        let r = fixtures::l2_recognizer();
        let a = from_morphism(&r).unwrap();
        assert!(a.is_deterministic());
        assert!(a.accepts(&w("a@1 a@2 a@1")));
        assert!(!a.accepts(&w("a@1 a@2")));
        for word in words(5, 4) {
            assert_eq!(a.accepts(&word), member(&r, &word).unwrap(), "{word}");
            assert!(a.run(&word, 3).run_count <= 1);
        }
        let l1 = fixtures::l1_recognizer();
        let b = from_morphism(&l1).unwrap();
        for word in words(5, 4) {
            assert_eq!(b.accepts(&word), member(&l1, &word).unwrap(), "{word}");
        }
    }

    #[test]
    fn identity_only_recognizer_gives_one_state() {
        let src = "monoid one\nsupport 2\norbit o/0 identity\nletter a = o()\naccept o";
        let r = crate::morphism::parse_recognizer(src).unwrap();
        let a = from_morphism(&r).unwrap();
        assert_eq!(a.orbits.len(), 1);
        assert!(a.accepts(&DataWord(vec![Letter::new("a", 3)])));
    }

    #[test]
    fn text_round_trip_and_errors() {
        for a in [l_arc(), l_arc_star(), l_arc_guess()] {
            assert_eq!(parse_fma(&a.to_text()).unwrap(), a);
        }
        assert!(matches!(parse_fma("state q/1 initial"), Err(Error::InvalidAutomaton(_))));
        assert!(matches!(parse_fma("state q/0 initial\ntrans q() a@=1 -> q()"), Err(Error::InvalidAutomaton(_))));
        let e = parse_fma("state q/0 initial\n\ntrans q() a@fresh -> r()").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e:?}");
        let dup = "state q/0 initial\nstate p/1\ntrans q() a@fresh -> p(in)\ntrans p(1) a@=1 -> p(1,in)";
        assert!(matches!(parse_fma(dup), Err(Error::InvalidAutomaton(_))));
    }

    #[test]
    fn reachable_configs_have_distinct_registers() {
        for a in [l_arc(), l_arc_star(), from_morphism(&fixtures::l1_recognizer()).unwrap()] {
            for regs in reachable_configs(&a, 4, 4).values().flatten() {
                let set: BTreeSet<_> = regs.iter().collect();
                assert_eq!(set.len(), regs.len());
            }
        }
    }
}
