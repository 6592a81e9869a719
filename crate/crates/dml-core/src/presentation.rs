//! Term-based presentations of orbit-finite data monoids.
//!
//! A presentation lists orbit names with arities, a support `{1..c}`, and the
//! products of *minimal pairs* only: pairs whose first term is `o(1..k)` and
//! whose second term uses fresh values `k+1, k+2, ...` in increasing order.
//! Every other product is recovered by renaming.  The `∼` relation is given
//! per orbit as a group of argument permutations; the normal form of a term is
//! the lexicographically least permuted tuple.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nominal::{DataValue, Renaming};

pub type OrbitId = usize;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct OrbitName {
    pub name: String,
    pub arity: usize,
}

/// `o(d_1,...,d_k)` with pairwise distinct values.  Orbits are referenced by
/// index into the owning presentation.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Term {
    pub orbit: OrbitId,
    pub values: Vec<DataValue>,
}

impl Term {
    pub fn new(orbit: OrbitId, values: Vec<DataValue>) -> Term {
        Term { orbit, values }
    }

    pub fn nullary(orbit: OrbitId) -> Term {
        Term { orbit, values: Vec::new() }
    }

    pub fn act(&self, r: &Renaming) -> Term {
        Term { orbit: self.orbit, values: self.values.iter().map(|&d| r.apply(d)).collect() }
    }

    pub fn max_value(&self) -> DataValue {
        self.values.iter().copied().max().unwrap_or(0)
    }
}

/// Pointwise action on a term.  The result is not normalised.
pub fn act_term(t: &Renaming, s: &Term) -> Term {
    s.act(t)
}

/// Canonical renaming of a pair: the first term becomes `o(1..k)` and the new
/// values of the second term follow as `k+1, k+2, ...`.
pub fn minimal_pair(s: &Term, u: &Term) -> (Term, Term, Renaming) {
    let mut pairs: Vec<(DataValue, DataValue)> = Vec::with_capacity(s.values.len() + u.values.len());
    let mut next = 1;
    for &d in s.values.iter().chain(u.values.iter()) {
        if !pairs.iter().any(|&(a, _)| a == d) {
            pairs.push((d, next));
            next += 1;
        }
    }
    let sigma = Renaming::extend_injection(&pairs);
    (s.act(&sigma), u.act(&sigma), sigma)
}

/// A permutation of argument positions: position `i` of the image takes the
/// value at position `perm[i]`.
pub type Perm = Vec<usize>;

fn compose_perm(a: &Perm, b: &Perm) -> Perm {
    // (apply a then b) as position maps on tuples: t -> t∘a -> (t∘a)∘b
    b.iter().map(|&i| a[i]).collect()
}

/// Closes a set of generators into the full permutation group.
pub fn perm_group(arity: usize, gens: &[Perm]) -> Vec<Perm> {
    let id: Perm = (0..arity).collect();
    let mut group: BTreeSet<Perm> = BTreeSet::new();
    group.insert(id.clone());
    let mut frontier = vec![id];
    while let Some(p) = frontier.pop() {
        for g in gens {
            let q = compose_perm(&p, g);
            if group.insert(q.clone()) {
                frontier.push(q);
            }
        }
    }
    group.into_iter().collect()
}

fn permute(values: &[DataValue], p: &Perm) -> Vec<DataValue> {
    p.iter().map(|&i| values[i]).collect()
}

/// All permutations of `0..k` in lexicographic order.
pub fn all_perms(k: usize) -> Vec<Perm> {
    fn go(k: usize, cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Perm>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in 0..k {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                go(k, cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(k, &mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

/// One explicit product instance, kept to check closure under renamings.
#[derive(Clone, Debug)]
pub struct ProductRule {
    pub left: Term,
    pub right: Term,
    pub result: Term,
    pub line: usize,
}

#[derive(Clone, Debug)]
pub struct Presentation {
    pub name: String,
    orbits: Vec<OrbitName>,
    identity: OrbitId,
    support: DataValue,
    symmetries: Vec<Vec<Perm>>,
    table: HashMap<(Term, Term), Term>,
    rules: Vec<ProductRule>,
}

impl Presentation {
    pub fn orbits(&self) -> &[OrbitName] {
        &self.orbits
    }

    pub fn orbit(&self, id: OrbitId) -> &OrbitName {
        &self.orbits[id]
    }

    pub fn orbit_id(&self, name: &str) -> Option<OrbitId> {
        self.orbits.iter().position(|o| o.name == name)
    }

    pub fn arity(&self, id: OrbitId) -> usize {
        self.orbits[id].arity
    }

    pub fn identity_orbit(&self) -> OrbitId {
        self.identity
    }

    pub fn identity(&self) -> Term {
        Term::nullary(self.identity)
    }

    pub fn support(&self) -> DataValue {
        self.support
    }

    pub fn max_arity(&self) -> usize {
        self.orbits.iter().map(|o| o.arity).max().unwrap_or(0)
    }

    pub fn symmetries(&self, id: OrbitId) -> &[Perm] {
        &self.symmetries[id]
    }

    pub fn rules(&self) -> &[ProductRule] {
        &self.rules
    }

    pub fn table_len(&self) -> usize {
        self.table.len()
    }

    /// Builds a term by orbit name.
    pub fn term(&self, name: &str, values: &[DataValue]) -> Result<Term> {
        let id = self.orbit_id(name).ok_or_else(|| Error::InvalidTerm(format!("unknown orbit `{name}`")))?;
        let t = Term::new(id, values.to_vec());
        self.check_term(&t)?;
        Ok(self.normalize(&t))
    }

    pub fn check_term(&self, t: &Term) -> Result<()> {
        let o = self
            .orbits
            .get(t.orbit)
            .ok_or_else(|| Error::InvalidTerm(format!("orbit index {} out of range", t.orbit)))?;
        if o.arity != t.values.len() {
            return Err(Error::InvalidTerm(format!("{} expects {} values, got {}", o.name, o.arity, t.values.len())));
        }
        for (i, a) in t.values.iter().enumerate() {
            if t.values[i + 1..].contains(a) {
                return Err(Error::InvalidTerm(format!("repeated value {a} in {}", self.show(t))));
            }
        }
        Ok(())
    }

    /// Normal form under the orbit's symmetry group.
    pub fn normalize(&self, t: &Term) -> Term {
        let group = &self.symmetries[t.orbit];
        if group.len() <= 1 {
            return t.clone();
        }
        let best = group.iter().map(|p| permute(&t.values, p)).min().expect("group is non-empty");
        Term { orbit: t.orbit, values: best }
    }

    pub fn act(&self, r: &Renaming, t: &Term) -> Term {
        self.normalize(&t.act(r))
    }

    pub fn product(&self, s: &Term, u: &Term) -> Result<Term> {
        self.check_term(s)?;
        self.check_term(u)?;
        if s.orbit == self.identity {
            return Ok(self.normalize(u));
        }
        if u.orbit == self.identity {
            return Ok(self.normalize(s));
        }
        let s = self.normalize(s);
        let u = self.normalize(u);
        let (s1, u1, sigma) = minimal_pair(&s, &u);
        let used = s1.max_value().max(u1.max_value());
        if used > self.support {
            return Err(Error::SupportOverflow(format!(
                "{} * {} needs {used} values, support is {}",
                self.show(&s),
                self.show(&u),
                self.support
            )));
        }
        let key = (s1, self.normalize(&u1));
        match self.table.get(&key) {
            Some(r) => Ok(self.normalize(&r.act(&sigma.invert()))),
            None => Err(Error::TableIncomplete(format!("{} * {}", self.show(&key.0), self.show(&key.1)))),
        }
    }

    /// Every minimal pair of non-identity orbits, second component normalised.
    pub fn minimal_pairs(&self) -> Vec<(Term, Term)> {
        let mut out = Vec::new();
        for (a, oa) in self.orbits.iter().enumerate() {
            if a == self.identity {
                continue;
            }
            let s = Term::new(a, (1..=oa.arity as DataValue).collect());
            for (b, ob) in self.orbits.iter().enumerate() {
                if b == self.identity {
                    continue;
                }
                let mut seen = BTreeSet::new();
                for vals in second_components(oa.arity, ob.arity) {
                    let u = self.normalize(&Term::new(b, vals));
                    if seen.insert(u.clone()) {
                        out.push((s.clone(), u));
                    }
                }
            }
        }
        out
    }

    /// Normal-form terms whose values lie in `values`.
    pub fn enumerate_restriction(&self, values: &[DataValue]) -> Vec<Term> {
        let mut out = BTreeSet::new();
        for (id, o) in self.orbits.iter().enumerate() {
            for tuple in injective_tuples(values, o.arity) {
                out.insert(self.normalize(&Term::new(id, tuple)));
            }
        }
        out.into_iter().collect()
    }

    /// Canonical representative `o(1..k)` of the orbit of `t`.
    pub fn orbit_rep(&self, id: OrbitId) -> Term {
        Term::new(id, (1..=self.orbits[id].arity as DataValue).collect())
    }

    pub fn show(&self, t: &Term) -> String {
        let name = self.orbits.get(t.orbit).map(|o| o.name.as_str()).unwrap_or("?");
        let vals: Vec<String> = t.values.iter().map(|v| v.to_string()).collect();
        format!("{name}({})", vals.join(","))
    }

    /// Serialises the presentation in the line-oriented text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("monoid {}\n", self.name));
        out.push_str(&format!("support {}\n", self.support));
        for (i, o) in self.orbits.iter().enumerate() {
            let id = if i == self.identity { " identity" } else { "" };
            out.push_str(&format!("orbit {}/{}{}\n", o.name, o.arity, id));
        }
        for (i, group) in self.symmetries.iter().enumerate() {
            let k = self.orbits[i].arity;
            let vars: Vec<String> = (1..=k).map(|j| format!("x{j}")).collect();
            for p in group {
                if p.iter().enumerate().all(|(a, &b)| a == b) {
                    continue;
                }
                let rhs: Vec<String> = p.iter().map(|&j| vars[j].clone()).collect();
                let name = &self.orbits[i].name;
                out.push_str(&format!("norm {name}({}) = {name}({})\n", vars.join(","), rhs.join(",")));
            }
        }
        let mut entries: Vec<_> = self.table.iter().collect();
        entries.sort();
        for ((s, u), r) in entries {
            out.push_str(&format!("prod {} {} = {}\n", self.show(s), self.show(u), self.show(r)));
        }
        out
    }

    /// Replaces a stored product; used to build corrupted fixtures.
    pub fn set_product(&mut self, s: &Term, u: &Term, r: Term) {
        let (s1, u1, sigma) = minimal_pair(&self.normalize(s), &self.normalize(u));
        let key = (s1, self.normalize(&u1));
        let r1 = self.normalize(&r.act(&sigma));
        self.table.insert(key, r1);
        self.rules.push(ProductRule { left: s.clone(), right: u.clone(), result: r, line: 0 });
    }
}

/// Value tuples for the second term of a minimal pair whose first term has arity `k1`.
pub fn second_components(k1: usize, k2: usize) -> Vec<Vec<DataValue>> {
    fn go(k1: usize, k2: usize, cur: &mut Vec<DataValue>, fresh: DataValue, out: &mut Vec<Vec<DataValue>>) {
        if cur.len() == k2 {
            out.push(cur.clone());
            return;
        }
        for d in 1..=k1 as DataValue {
            if !cur.contains(&d) {
                cur.push(d);
                go(k1, k2, cur, fresh, out);
                cur.pop();
            }
        }
        cur.push(fresh);
        go(k1, k2, cur, fresh + 1, out);
        cur.pop();
    }
    let mut out = Vec::new();
    go(k1, k2, &mut Vec::new(), k1 as DataValue + 1, &mut out);
    out
}

/// All tuples of `k` pairwise distinct elements of `values`.
pub fn injective_tuples(values: &[DataValue], k: usize) -> Vec<Vec<DataValue>> {
    fn go(values: &[DataValue], k: usize, cur: &mut Vec<DataValue>, out: &mut Vec<Vec<DataValue>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for &d in values {
            if !cur.contains(&d) {
                cur.push(d);
                go(values, k, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(values, k, &mut Vec::new(), &mut out);
    out
}

/// Incremental construction of a presentation.
#[derive(Debug, Default)]
pub struct PresentationBuilder {
    name: String,
    orbits: Vec<OrbitName>,
    identity: Option<OrbitId>,
    support: Option<DataValue>,
    generators: Vec<Vec<Perm>>,
    rules: Vec<ProductRule>,
    entries: Vec<(Term, Term, Term)>,
}

impl PresentationBuilder {
    pub fn new(name: impl Into<String>) -> PresentationBuilder {
        PresentationBuilder { name: name.into(), ..Default::default() }
    }

    pub fn orbit(&mut self, name: &str, arity: usize) -> Result<OrbitId> {
        if self.orbits.iter().any(|o| o.name == name) {
            return Err(Error::InvalidPresentation(format!("duplicate orbit `{name}`")));
        }
        self.orbits.push(OrbitName { name: name.to_string(), arity });
        self.generators.push(Vec::new());
        Ok(self.orbits.len() - 1)
    }

    pub fn orbit_id(&self, name: &str) -> Option<OrbitId> {
        self.orbits.iter().position(|o| o.name == name)
    }

    pub fn arity(&self, id: OrbitId) -> usize {
        self.orbits[id].arity
    }

    pub fn set_identity(&mut self, id: OrbitId) -> Result<()> {
        if self.orbits[id].arity != 0 {
            return Err(Error::InvalidPresentation("identity orbit must have arity 0".into()));
        }
        self.identity = Some(id);
        Ok(())
    }

    pub fn set_support(&mut self, c: DataValue) {
        self.support = Some(c);
    }

    /// Declares `o(v) ∼ o(v∘perm)`.
    pub fn symmetry(&mut self, id: OrbitId, perm: Perm) -> Result<()> {
        let k = self.orbits[id].arity;
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        if sorted != (0..k).collect::<Vec<_>>() {
            return Err(Error::InvalidPresentation(format!("bad symmetry for `{}`", self.orbits[id].name)));
        }
        self.generators[id].push(perm);
        Ok(())
    }

    pub fn rule(&mut self, left: Term, right: Term, result: Term, line: usize) {
        self.rules.push(ProductRule { left, right, result, line });
    }

    /// Stores a product of a minimal pair directly, without keeping it as a
    /// checked rule.  The caller guarantees the pair is minimal and normalised.
    pub fn entry(&mut self, left: Term, right: Term, result: Term) {
        self.entries.push((left, right, result));
    }

    pub fn build(self) -> Result<Presentation> {
        let identity = self.identity.ok_or_else(|| Error::InvalidPresentation("no identity orbit".into()))?;
        let max_arity = self.orbits.iter().map(|o| o.arity).max().unwrap_or(0);
        let support = self.support.unwrap_or((2 * max_arity).max(1) as DataValue);
        if (support as usize) < 2 * max_arity {
            return Err(Error::InvalidPresentation(format!(
                "support {support} is smaller than twice the maximal arity {max_arity}"
            )));
        }
        let symmetries: Vec<Vec<Perm>> =
            self.orbits.iter().zip(&self.generators).map(|(o, g)| perm_group(o.arity, g)).collect();
        let mut p = Presentation {
            name: self.name,
            orbits: self.orbits,
            identity,
            support,
            symmetries,
            table: HashMap::new(),
            rules: Vec::new(),
        };
        for rule in &self.rules {
            for t in [&rule.left, &rule.right, &rule.result] {
                p.check_term(t).map_err(|e| at_line(rule.line, e))?;
            }
            let mem: BTreeSet<_> = rule.left.values.iter().chain(&rule.right.values).collect();
            if !rule.result.values.iter().all(|d| mem.contains(d)) {
                return Err(at_line(
                    rule.line,
                    Error::InvalidPresentation("result uses values absent from the arguments".into()),
                ));
            }
            if rule.left.orbit == identity || rule.right.orbit == identity {
                continue;
            }
            let (s1, u1, sigma) = minimal_pair(&p.normalize(&rule.left), &p.normalize(&rule.right));
            let key = (s1, p.normalize(&u1));
            let r1 = p.normalize(&rule.result.act(&sigma));
            p.table.entry(key).or_insert(r1);
        }
        for (l, r, res) in self.entries {
            p.table.insert((l, r), res);
        }
        p.rules = self.rules;
        complete_under_symmetry(&mut p);
        Ok(p)
    }
}

fn at_line(line: usize, e: Error) -> Error {
    match e {
        Error::Parse { .. } => e,
        other => Error::Parse { line, col: 0, msg: other.to_string() },
    }
}

/// Fills minimal pairs derivable from stored ones through a symmetry of the first term.
fn complete_under_symmetry(p: &mut Presentation) {
    loop {
        let mut added = Vec::new();
        for (s1, u1) in p.minimal_pairs() {
            if p.table.contains_key(&(s1.clone(), u1.clone())) {
                continue;
            }
            for g in &p.symmetries[s1.orbit] {
                // pi maps i+1 to g[i]+1, so pi(s1) ∼ s1.
                let pairs: Vec<_> =
                    g.iter().enumerate().map(|(i, &j)| (i as DataValue + 1, j as DataValue + 1)).collect();
                let pi = Renaming::from_pairs(&pairs).expect("permutation of 1..k");
                let key = (s1.clone(), p.normalize(&u1.act(&pi.invert())));
                if let Some(r) = p.table.get(&key) {
                    added.push(((s1.clone(), u1.clone()), p.normalize(&r.act(&pi))));
                    break;
                }
            }
        }
        if added.is_empty() {
            return;
        }
        for (k, v) in added {
            p.table.entry(k).or_insert(v);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    Identity,
    TableIncomplete,
    Equivariance,
    Associativity,
    Closure,
    Reducedness,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, kind: ViolationKind, detail: String) {
        self.violations.push(Violation { kind, detail });
    }
}

/// Checks the presentation axioms over the support.
pub fn validate(p: &Presentation) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let c: Vec<DataValue> = (1..=p.support).collect();
    let elems = p.enumerate_restriction(&c);
    let one = p.identity();

    for (s, u) in p.minimal_pairs() {
        if !p.table.contains_key(&(s.clone(), u.clone())) {
            rep.push(ViolationKind::TableIncomplete, format!("{} * {}", p.show(&s), p.show(&u)));
        }
    }
    if !rep.violations.is_empty() {
        return rep;
    }

    // Explicit instances must agree with the renamed minimal pair.
    let mut seen: BTreeMap<(Term, Term), (Term, usize)> = BTreeMap::new();
    for rule in &p.rules {
        let Ok(got) = p.product(&rule.left, &rule.right) else { continue };
        let expect = p.normalize(&rule.result);
        let is_identity = rule.left.orbit == p.identity || rule.right.orbit == p.identity;
        if got != expect {
            let kind = if is_identity { ViolationKind::Identity } else { ViolationKind::Equivariance };
            rep.push(
                kind,
                format!(
                    "line {}: {} * {} = {} but the renamed table entry gives {}",
                    rule.line,
                    p.show(&rule.left),
                    p.show(&rule.right),
                    p.show(&expect),
                    p.show(&got)
                ),
            );
        }
        let (s1, u1, sigma) = minimal_pair(&p.normalize(&rule.left), &p.normalize(&rule.right));
        let key = (s1, p.normalize(&u1));
        let r1 = p.normalize(&expect.act(&sigma));
        if let Some((prev, line)) = seen.get(&key) {
            if *prev != r1 {
                rep.push(
                    ViolationKind::Closure,
                    format!("lines {line} and {} give different products on renamed pairs", rule.line),
                );
            }
        } else {
            seen.insert(key, (r1, rule.line));
        }
    }

    for t in &elems {
        for (a, b) in [(&one, t), (t, &one)] {
            match p.product(a, b) {
                Ok(r) if r == *t => {}
                Ok(r) => rep.push(ViolationKind::Identity, format!("{} * {} = {}", p.show(a), p.show(b), p.show(&r))),
                Err(e) => rep.push(ViolationKind::Identity, e.to_string()),
            }
        }
    }

    // Adjacent transpositions generate every renaming of the support.
    for i in 1..p.support {
        let tau = Renaming::swap(i, i + 1);
        for s in &elems {
            for u in &elems {
                let (Ok(su), Ok(tsu)) = (p.product(s, u), p.product(&p.act(&tau, s), &p.act(&tau, u))) else {
                    continue;
                };
                if p.act(&tau, &su) != tsu {
                    rep.push(
                        ViolationKind::Equivariance,
                        format!("swap({i},{}) on {} * {}", i + 1, p.show(s), p.show(u)),
                    );
                }
            }
        }
    }

    // Up to renaming the first factor is an orbit representative.
    for o in 0..p.orbits.len() {
        let s = p.orbit_rep(o);
        for t in &elems {
            for u in &elems {
                let lhs = p.product(&s, t).and_then(|st| p.product(&st, u));
                let rhs = p.product(t, u).and_then(|tu| p.product(&s, &tu));
                match (lhs, rhs) {
                    (Ok(a), Ok(b)) if a == b => {}
                    (Ok(a), Ok(b)) => rep.push(
                        ViolationKind::Associativity,
                        format!(
                            "({} {}) {} = {} but {} ({} {}) = {}",
                            p.show(&s),
                            p.show(t),
                            p.show(u),
                            p.show(&a),
                            p.show(&s),
                            p.show(t),
                            p.show(u),
                            p.show(&b)
                        ),
                    ),
                    // Overflow on wide triples is a sizing issue, not an axiom failure.
                    (Err(Error::SupportOverflow(_)), _) | (_, Err(Error::SupportOverflow(_))) => {}
                    (Err(e), _) | (_, Err(e)) => rep.push(ViolationKind::Associativity, e.to_string()),
                }
            }
        }
    }

    for o in 0..p.orbits.len() {
        let s = p.orbit_rep(o);
        if let Err(e) = crate::analysis::memory(p, &s) {
            rep.push(ViolationKind::Reducedness, e.to_string());
        }
    }
    rep
}

/// Parses the presentation text format.
pub fn parse_presentation(src: &str) -> Result<Presentation> {
    parse_presentation_with(src, |_, _| Ok(false)).map(|(p, _)| p)
}

/// Parses a presentation, handing lines not understood here to `extra`
/// (which returns whether it consumed the line).  Returns the presentation and
/// the lines consumed by `extra` in order.
pub fn parse_presentation_with<F>(src: &str, mut extra: F) -> Result<(Presentation, Vec<(usize, String)>)>
where
    F: FnMut(usize, &str) -> Result<bool>,
{
    let mut b = PresentationBuilder::new("");
    let mut deferred: Vec<(usize, String)> = Vec::new();
    let mut pending_rules: Vec<(usize, String)> = Vec::new();
    let mut pending_norms: Vec<(usize, String)> = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (kw, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        match kw {
            "monoid" => b.name = rest.to_string(),
            "support" => {
                let c = rest.parse::<DataValue>().map_err(|_| perr(line_no, "support expects a number"))?;
                b.set_support(c);
            }
            "orbit" => {
                let mut parts = rest.split_whitespace();
                let decl = parts.next().ok_or_else(|| perr(line_no, "orbit expects name/arity"))?;
                let (name, ar) = decl.split_once('/').ok_or_else(|| perr(line_no, "orbit expects name/arity"))?;
                let arity = ar.parse::<usize>().map_err(|_| perr(line_no, "bad arity"))?;
                if !is_ident(name) {
                    return Err(perr(line_no, &format!("bad orbit name `{name}`")));
                }
                let id = b.orbit(name, arity).map_err(|e| perr(line_no, &e.to_string()))?;
                match parts.next() {
                    None => {}
                    Some("identity") => b.set_identity(id).map_err(|e| perr(line_no, &e.to_string()))?,
                    Some(other) => return Err(perr(line_no, &format!("unexpected `{other}`"))),
                }
            }
            "norm" => pending_norms.push((line_no, rest.to_string())),
            "prod" => pending_rules.push((line_no, rest.to_string())),
            _ => {
                if extra(line_no, line)? {
                    deferred.push((line_no, line.to_string()));
                } else {
                    return Err(perr(line_no, &format!("unknown directive `{kw}`")));
                }
            }
        }
    }
    for (line_no, text) in pending_norms {
        parse_norm(&mut b, line_no, &text)?;
    }
    for (line_no, text) in pending_rules {
        parse_rule(&mut b, line_no, &text)?;
    }
    let p = b.build()?;
    Ok((p, deferred))
}

fn perr(line: usize, msg: &str) -> Error {
    Error::Parse { line, col: 0, msg: msg.to_string() }
}

fn is_ident(s: &str) -> bool {
    !s.is_empty()
        && s.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A term pattern such as `q(d,e)` or `p(1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TermPattern {
    pub orbit: String,
    pub args: Vec<PatArg>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PatArg {
    Var(String),
    Value(DataValue),
}

pub fn parse_term_pattern(s: &str, line: usize) -> Result<TermPattern> {
    let s = s.trim();
    let open = s.find('(').ok_or_else(|| perr(line, &format!("expected term, got `{s}`")))?;
    if !s.ends_with(')') {
        return Err(perr(line, &format!("unclosed term `{s}`")));
    }
    let orbit = s[..open].trim().to_string();
    if !is_ident(&orbit) {
        return Err(perr(line, &format!("bad orbit name in `{s}`")));
    }
    let inner = &s[open + 1..s.len() - 1];
    let mut args = Vec::new();
    for a in inner.split(',').map(str::trim).filter(|a| !a.is_empty()) {
        if let Ok(v) = a.parse::<DataValue>() {
            args.push(PatArg::Value(v));
        } else if is_ident(a) {
            args.push(PatArg::Var(a.to_string()));
        } else {
            return Err(perr(line, &format!("bad argument `{a}`")));
        }
    }
    Ok(TermPattern { orbit, args })
}

/// Splits `p(d) q(d,e)` into its terms.
pub fn split_terms(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' => {
                depth += 1;
                cur.push(ch);
            }
            ')' => {
                depth -= 1;
                cur.push(ch);
                if depth == 0 {
                    out.push(cur.trim().to_string());
                    cur.clear();
                }
            }
            c if c.is_whitespace() && depth == 0 => {}
            c => cur.push(c),
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

/// Assigns distinct values to variables in order of first occurrence,
/// skipping values that appear literally.
pub fn instantiate(pats: &[&TermPattern], b_orbit: impl Fn(&str) -> Option<OrbitId>, line: usize) -> Result<Vec<Term>> {
    let literals: BTreeSet<DataValue> = pats
        .iter()
        .flat_map(|p| p.args.iter())
        .filter_map(|a| if let PatArg::Value(v) = a { Some(*v) } else { None })
        .collect();
    let mut env: BTreeMap<String, DataValue> = BTreeMap::new();
    let mut next = 1;
    let mut out = Vec::new();
    for p in pats {
        let id = b_orbit(&p.orbit).ok_or_else(|| perr(line, &format!("unknown orbit `{}`", p.orbit)))?;
        let mut vals = Vec::new();
        for a in &p.args {
            match a {
                PatArg::Value(v) => vals.push(*v),
                PatArg::Var(x) => {
                    let v = match env.get(x) {
                        Some(&v) => v,
                        None => {
                            while literals.contains(&next) {
                                next += 1;
                            }
                            env.insert(x.clone(), next);
                            next += 1;
                            next - 1
                        }
                    };
                    vals.push(v);
                }
            }
        }
        out.push(Term::new(id, vals));
    }
    Ok(out)
}

fn parse_rule(b: &mut PresentationBuilder, line: usize, text: &str) -> Result<()> {
    let (lhs, rhs) = text.split_once('=').ok_or_else(|| perr(line, "prod expects `s u = r`"))?;
    let terms = split_terms(lhs);
    if terms.len() != 2 {
        return Err(perr(line, "prod expects exactly two factors"));
    }
    let s = parse_term_pattern(&terms[0], line)?;
    let u = parse_term_pattern(&terms[1], line)?;
    let r = parse_term_pattern(rhs, line)?;
    let lhs_vars: BTreeSet<_> = s.args.iter().chain(&u.args).filter_map(var_name).collect();
    if let Some(v) = r.args.iter().filter_map(var_name).find(|v| !lhs_vars.contains(v)) {
        return Err(perr(line, &format!("variable `{v}` only occurs in the result")));
    }
    let ts = instantiate(&[&s, &u, &r], |n| b.orbit_id(n), line)?;
    let mut it = ts.into_iter();
    let (s, u, r) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
    b.rule(s, u, r, line);
    Ok(())
}

fn var_name(a: &PatArg) -> Option<&String> {
    match a {
        PatArg::Var(x) => Some(x),
        PatArg::Value(_) => None,
    }
}

fn parse_norm(b: &mut PresentationBuilder, line: usize, text: &str) -> Result<()> {
    let (lhs, rhs) = text.split_once('=').ok_or_else(|| perr(line, "norm expects `o(..) = o(..)`"))?;
    let l = parse_term_pattern(lhs, line)?;
    let r = parse_term_pattern(rhs, line)?;
    if l.orbit != r.orbit || l.args.len() != r.args.len() {
        return Err(perr(line, "norm must relate two terms of one orbit"));
    }
    let id = b.orbit_id(&l.orbit).ok_or_else(|| perr(line, &format!("unknown orbit `{}`", l.orbit)))?;
    if b.arity(id) != l.args.len() {
        return Err(perr(line, "arity mismatch in norm"));
    }
    let lvars: Vec<String> = l
        .args
        .iter()
        .map(|a| var_name(a).cloned().ok_or_else(|| perr(line, "norm arguments must be variables")))
        .collect::<Result<_>>()?;
    let rnames: Vec<String> = r
        .args
        .iter()
        .map(|a| var_name(a).cloned().ok_or_else(|| perr(line, "norm arguments must be variables")))
        .collect::<Result<_>>()?;
    let k = lvars.len();
    if rnames.iter().all(|n| n == "min" || n == "max") {
        // Sorted arguments: the full symmetric group.
        for i in 0..k.saturating_sub(1) {
            let mut p: Perm = (0..k).collect();
            p.swap(i, i + 1);
            b.symmetry(id, p).map_err(|e| perr(line, &e.to_string()))?;
        }
        return Ok(());
    }
    let perm: Perm = rnames
        .iter()
        .map(|n| lvars.iter().position(|v| v == n).ok_or_else(|| perr(line, &format!("unknown variable `{n}`"))))
        .collect::<Result<_>>()?;
    b.symmetry(id, perm).map_err(|e| perr(line, &e.to_string()))
}

impl fmt::Display for Presentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn l1() -> Presentation {
        fixtures::l1()
    }

    #[test]
    fn act_term_pointwise() {
        let p = l1();
        let q12 = p.term("q", &[1, 2]).unwrap();
        assert_eq!(act_term(&Renaming::swap(1, 3), &q12).values, vec![3, 2]);
        let p5 = p.term("p", &[5]).unwrap();
        assert_eq!(act_term(&Renaming::identity(), &p5), p5);
        let c = Renaming::cycle(&[1, 2, 3]).unwrap();
        let q13 = Term::new(q12.orbit, vec![1, 3]);
        assert_eq!(act_term(&c, &q13).values, vec![2, 1]);
    }

    /// Oracle: try every injection of the pair's values into a small prefix
    /// and keep those producing a minimal pair.
    fn minimal_pair_oracle(s: &Term, u: &Term) -> Vec<(Term, Term)> {
        let mut vals: Vec<DataValue> = Vec::new();
        for &d in s.values.iter().chain(&u.values) {
            if !vals.contains(&d) {
                vals.push(d);
            }
        }
        let n = vals.len() as DataValue;
        let mut out = Vec::new();
        for img in injective_tuples(&(1..=n + 2).collect::<Vec<_>>(), vals.len()) {
            let f = |d: DataValue| img[vals.iter().position(|&x| x == d).unwrap()];
            let s1 = Term::new(s.orbit, s.values.iter().map(|&d| f(d)).collect());
            let u1 = Term::new(u.orbit, u.values.iter().map(|&d| f(d)).collect());
            let k = s1.values.len() as DataValue;
            if s1.values != (1..=k).collect::<Vec<_>>() {
                continue;
            }
            let fresh: Vec<DataValue> = u1.values.iter().copied().filter(|&d| d > k).collect();
            if fresh == (k + 1..=k + fresh.len() as DataValue).collect::<Vec<_>>() {
                out.push((s1, u1));
            }
        }
        out
    }

    #[test]
    fn minimal_pair_examples() {
        let (o, pp) = (7, 8);
        let s = Term::new(o, vec![3]);
        let u = Term::new(pp, vec![3, 8]);
        let (s1, u1, sigma) = minimal_pair(&s, &u);
        assert_eq!(s1.values, vec![1]);
        assert_eq!(u1.values, vec![1, 2]);
        assert_eq!(sigma.apply(3), 1);
        assert_eq!(sigma.apply(8), 2);
        assert_eq!(minimal_pair_oracle(&s, &u), vec![(s1, u1)]);

        let (s1, u1, sigma) = minimal_pair(&Term::new(0, vec![1, 2]), &Term::nullary(3));
        assert_eq!((s1.values, u1.values), (vec![1, 2], vec![]));
        assert!(sigma.is_identity());

        let (s1, _, sigma) = minimal_pair(&Term::new(0, vec![2, 1]), &Term::nullary(1));
        assert_eq!(s1.values, vec![1, 2]);
        assert_eq!(sigma, Renaming::swap(1, 2));
    }

    #[test]
    fn l1_products() {
        let p = l1();
        let t = |n: &str, v: &[DataValue]| p.term(n, v).unwrap();
        assert_eq!(p.product(&t("p", &[5]), &t("p", &[5])).unwrap(), t("p", &[5]));
        assert_eq!(p.product(&t("p", &[5]), &t("p", &[7])).unwrap(), t("q", &[5, 7]));
        assert_eq!(p.product(&t("q", &[1, 2]), &t("q", &[3, 4])).unwrap(), t("r", &[]));
        for x in p.enumerate_restriction(&[1, 2, 3]) {
            assert_eq!(p.product(&p.identity(), &x).unwrap(), x);
            assert_eq!(p.product(&x, &p.identity()).unwrap(), x);
        }
    }

    #[test]
    fn l1_is_valid() {
        let rep = validate(&l1());
        assert!(rep.is_valid(), "{:?}", rep.violations);
    }

    #[test]
    fn corrupted_l1_reports_violation() {
        let src: String = fixtures::L1_TEXT
            .lines()
            .filter(|l| !l.starts_with("letter") && !l.starts_with("accept"))
            .map(|l| format!("{l}\n"))
            .collect::<String>()
            + "prod p(1) p(2) = r()\nprod p(1) p(3) = q(1,3)\n";
        let p = parse_presentation(&src).unwrap();
        let rep = validate(&p);
        assert!(rep.has(ViolationKind::Equivariance), "{:?}", rep.violations);
    }

    #[test]
    fn trivial_presentation_is_valid() {
        let p = parse_presentation("monoid one\norbit e/0 identity\n").unwrap();
        assert!(validate(&p).is_valid());
        assert_eq!(p.enumerate_restriction(&[1, 2]).len(), 1);
    }

    #[test]
    fn restriction_counts() {
        let p = l1();
        let r = p.enumerate_restriction(&[1, 2]);
        let shown: Vec<String> = r.iter().map(|t| p.show(t)).collect();
        assert_eq!(shown, vec!["o()", "p(1)", "p(2)", "q(1,2)", "r()"]);
        let empty = p.enumerate_restriction(&[]);
        assert!(empty.iter().all(|t| t.values.is_empty()));
        assert_eq!(empty.len(), 2);
        // Orbits of arity 0, 1, 2 without symmetry: 1 + 2 + 2.
        let l2 = fixtures::l2();
        assert_eq!(l2.enumerate_restriction(&[1, 2]).len(), 5);
    }

    #[test]
    fn overflow_and_incomplete_errors() {
        let mut b = PresentationBuilder::new("t");
        let e = b.orbit("e", 0).unwrap();
        let a = b.orbit("a", 1).unwrap();
        b.set_identity(e).unwrap();
        let p = b.build().unwrap();
        let x = Term::new(a, vec![1]);
        assert!(matches!(p.product(&x, &x), Err(Error::TableIncomplete(_))));

        let mut b = PresentationBuilder::new("t");
        b.orbit("e", 0).unwrap();
        b.orbit("a", 2).unwrap();
        b.set_identity(0).unwrap();
        b.set_support(3);
        assert!(b.build().is_err());
    }

    #[test]
    fn text_round_trip() {
        let p = l1();
        let q = parse_presentation(&p.to_text()).unwrap();
        for s in p.enumerate_restriction(&[1, 2, 3]) {
            for u in p.enumerate_restriction(&[1, 2, 3]) {
                assert_eq!(p.product(&s, &u).unwrap(), q.product(&s, &u).unwrap());
            }
        }
    }

    #[test]
    fn parse_errors_carry_lines() {
        let err = parse_presentation("monoid x\norbit e/0 identity\nprod e() f() = e()\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = parse_presentation("monoid x\nbogus\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn second_components_cover_minimal_pairs() {
        // k1 = 1, k2 = 2: values from {1} plus fresh 2, 3 in order.
        let got = second_components(1, 2);
        assert_eq!(got, vec![vec![1, 2], vec![2, 1], vec![2, 3]]);
    }
}
