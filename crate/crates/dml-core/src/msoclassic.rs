//! Classical MSO over finite words compiled to automata, and satisfiability of
//! guarded data sentences through fresh predicates and a partition formula.
//!
//! A free variable is a bit track.  Letters of an automaton over variables
//! `v_0..v_{m-1}` are numbered `tag_index << m | bits`, with bit `j` for `v_j`.
//! Variables are kept sorted, and each subformula only carries tracks for its
//! own free variables.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::logic::{evaluate, is_set_var, normalize_tests, Assignment, Formula, TestDescriptor, Var};
use crate::nominal::{DataWord, Letter, Tag};

/// Largest automaton any single construction step may produce.
pub const DEFAULT_STATE_BUDGET: usize = 200_000;

#[derive(Clone, Debug)]
pub struct Nfa {
    pub tags: Vec<Tag>,
    pub vars: Vec<Var>,
    /// `trans[state * letters + letter]`: sorted targets.
    trans: Vec<Vec<u32>>,
    pub initial: Vec<u32>,
    pub finals: Vec<bool>,
}

/// Sizes seen while building an automaton.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AutomatonStats {
    /// Largest automaton handed to the subset construction.
    pub max_before_determinization: usize,
    /// Largest automaton it produced (before minimization).
    pub max_after_determinization: usize,
    /// States of the final automaton.
    pub final_states: usize,
}

impl Nfa {
    pub fn letters(&self) -> usize {
        self.tags.len() << self.vars.len()
    }

    pub fn states(&self) -> usize {
        self.finals.len()
    }

    pub fn targets(&self, state: u32, letter: usize) -> &[u32] {
        &self.trans[state as usize * self.letters() + letter]
    }

    fn empty_with(tags: &[Tag], vars: &[Var], states: usize) -> Nfa {
        let letters = tags.len() << vars.len();
        Nfa {
            tags: tags.to_vec(),
            vars: vars.to_vec(),
            trans: vec![Vec::new(); states * letters],
            initial: vec![0],
            finals: vec![false; states],
        }
    }

    /// Automaton given by a transition function on `(state, tag index, bits)`.
    pub fn from_fn(
        tags: &[Tag],
        vars: &[Var],
        states: usize,
        finals: &[usize],
        step: impl Fn(usize, usize, u32) -> Option<usize>,
    ) -> Nfa {
        let mut a = Nfa::empty_with(tags, vars, states);
        let letters = a.letters();
        for s in 0..states {
            for t in 0..tags.len() {
                for bits in 0..1u32 << vars.len() {
                    if let Some(q) = step(s, t, bits) {
                        a.trans[s * letters + (t << vars.len() | bits as usize)].push(q as u32);
                    }
                }
            }
        }
        for &f in finals {
            a.finals[f] = true;
        }
        a
    }

    /// Accepts every annotated word.
    pub fn universal(tags: &[Tag], vars: &[Var]) -> Nfa {
        Nfa::from_fn(tags, vars, 1, &[0], |_, _, _| Some(0))
    }

    pub fn empty(tags: &[Tag], vars: &[Var]) -> Nfa {
        Nfa::from_fn(tags, vars, 1, &[], |_, _, _| None)
    }

    /// Track `var` is set at exactly one position.
    pub fn singleton(tags: &[Tag], vars: &[Var], var: &str) -> Nfa {
        let j = vars.iter().position(|v| v == var).expect("variable has a track");
        Nfa::from_fn(tags, vars, 2, &[1], move |s, _, bits| match (s, bits >> j & 1) {
            (0, 0) => Some(0),
            (0, 1) => Some(1),
            (1, 0) => Some(1),
            _ => None,
        })
    }

    pub fn accepts(&self, word: &[(usize, u32)]) -> bool {
        let m = self.vars.len();
        let mut cur: BTreeSet<u32> = self.initial.iter().copied().collect();
        for &(t, bits) in word {
            let l = t << m | bits as usize;
            cur = cur.iter().flat_map(|&s| self.targets(s, l).iter().copied()).collect();
        }
        cur.iter().any(|&s| self.finals[s as usize])
    }

    /// Keeps states that are reachable and can reach a final state.
    pub fn trim(&self) -> Nfa {
        let n = self.states();
        let letters = self.letters();
        let mut reach = vec![false; n];
        let mut stack: Vec<u32> = self.initial.clone();
        for &s in &stack {
            reach[s as usize] = true;
        }
        let mut rev: Vec<Vec<u32>> = vec![Vec::new(); n];
        while let Some(s) = stack.pop() {
            for l in 0..letters {
                for &q in self.targets(s, l) {
                    rev[q as usize].push(s);
                    if !reach[q as usize] {
                        reach[q as usize] = true;
                        stack.push(q);
                    }
                }
            }
        }
        let mut co = vec![false; n];
        let mut stack: Vec<u32> = (0..n as u32).filter(|&s| reach[s as usize] && self.finals[s as usize]).collect();
        for &s in &stack {
            co[s as usize] = true;
        }
        while let Some(s) = stack.pop() {
            for &p in &rev[s as usize] {
                if !co[p as usize] {
                    co[p as usize] = true;
                    stack.push(p);
                }
            }
        }
        let keep: Vec<u32> = (0..n as u32).filter(|&s| reach[s as usize] && co[s as usize]).collect();
        if keep.is_empty() {
            return Nfa::empty(&self.tags, &self.vars);
        }
        let mut index = vec![u32::MAX; n];
        for (i, &s) in keep.iter().enumerate() {
            index[s as usize] = i as u32;
        }
        let mut out = Nfa::empty_with(&self.tags, &self.vars, keep.len());
        out.initial =
            self.initial.iter().filter(|&&s| index[s as usize] != u32::MAX).map(|&s| index[s as usize]).collect();
        for (i, &s) in keep.iter().enumerate() {
            out.finals[i] = self.finals[s as usize];
            for l in 0..letters {
                out.trans[i * letters + l] = self
                    .targets(s, l)
                    .iter()
                    .filter(|&&q| index[q as usize] != u32::MAX)
                    .map(|&q| index[q as usize])
                    .collect();
            }
        }
        out
    }

    /// Adds tracks for `vars` (a sorted superset of the current ones) that the
    /// automaton ignores.
    pub fn cylindrify(&self, vars: &[Var]) -> Nfa {
        if vars == self.vars.as_slice() {
            return self.clone();
        }
        let pos: Vec<usize> =
            self.vars.iter().map(|v| vars.iter().position(|w| w == v).expect("superset of variables")).collect();
        let old_m = self.vars.len();
        let new_m = vars.len();
        let old_letters = self.letters();
        let mut out = Nfa::empty_with(&self.tags, vars, self.states());
        let new_letters = out.letters();
        out.initial = self.initial.clone();
        out.finals = self.finals.clone();
        for s in 0..self.states() {
            for t in 0..self.tags.len() {
                for bits in 0..1usize << new_m {
                    let mut ob = 0usize;
                    for (j, &p) in pos.iter().enumerate() {
                        ob |= (bits >> p & 1) << j;
                    }
                    out.trans[s * new_letters + (t << new_m | bits)] =
                        self.trans[s * old_letters + (t << old_m | ob)].clone();
                }
            }
        }
        out
    }

    /// Product automaton; both sides must share variables.
    pub fn intersect(&self, other: &Nfa, budget: usize) -> Result<Nfa> {
        debug_assert_eq!(self.vars, other.vars);
        let letters = self.letters();
        let mut index: HashMap<(u32, u32), u32> = HashMap::new();
        let mut queue = VecDeque::new();
        let mut pairs = Vec::new();
        for &a in &self.initial {
            for &b in &other.initial {
                index.insert((a, b), pairs.len() as u32);
                pairs.push((a, b));
                queue.push_back((a, b));
            }
        }
        let mut trans: Vec<Vec<u32>> = Vec::new();
        while let Some((a, b)) = queue.pop_front() {
            for l in 0..letters {
                let mut ts = Vec::new();
                for &p in self.targets(a, l) {
                    for &q in other.targets(b, l) {
                        let id = match index.get(&(p, q)) {
                            Some(&id) => id,
                            None => {
                                if pairs.len() >= budget {
                                    return Err(Error::StateBudget(budget));
                                }
                                let id = pairs.len() as u32;
                                index.insert((p, q), id);
                                pairs.push((p, q));
                                queue.push_back((p, q));
                                id
                            }
                        };
                        ts.push(id);
                    }
                }
                ts.sort_unstable();
                ts.dedup();
                trans.push(ts);
            }
        }
        let finals = pairs.iter().map(|&(a, b)| self.finals[a as usize] && other.finals[b as usize]).collect();
        let initial = (0..self.initial.len() * other.initial.len()).map(|i| i as u32).collect();
        Ok(Nfa { tags: self.tags.clone(), vars: self.vars.clone(), trans, initial, finals }.trim())
    }

    /// Disjoint union.
    pub fn union(&self, other: &Nfa) -> Nfa {
        debug_assert_eq!(self.vars, other.vars);
        let off = self.states() as u32;
        let mut trans = self.trans.clone();
        trans.extend(other.trans.iter().map(|ts| ts.iter().map(|&q| q + off).collect()));
        let mut initial = self.initial.clone();
        initial.extend(other.initial.iter().map(|&q| q + off));
        let mut finals = self.finals.clone();
        finals.extend(&other.finals);
        Nfa { tags: self.tags.clone(), vars: self.vars.clone(), trans, initial, finals }
    }

    /// Subset construction; the result is complete and has one initial state.
    pub fn determinize(&self, budget: usize) -> Result<Nfa> {
        let letters = self.letters();
        let mut start: Vec<u32> = self.initial.clone();
        start.sort_unstable();
        start.dedup();
        let mut index: HashMap<Vec<u32>, u32> = HashMap::from([(start.clone(), 0)]);
        let mut subsets = vec![start];
        let mut trans: Vec<Vec<u32>> = Vec::new();
        let mut i = 0;
        while i < subsets.len() {
            for l in 0..letters {
                let mut next: Vec<u32> = subsets[i].iter().flat_map(|&s| self.targets(s, l).iter().copied()).collect();
                next.sort_unstable();
                next.dedup();
                let id = match index.get(&next) {
                    Some(&id) => id,
                    None => {
                        if subsets.len() >= budget {
                            return Err(Error::StateBudget(budget));
                        }
                        let id = subsets.len() as u32;
                        index.insert(next.clone(), id);
                        subsets.push(next);
                        id
                    }
                };
                trans.push(vec![id]);
            }
            i += 1;
        }
        let finals = subsets.iter().map(|s| s.iter().any(|&q| self.finals[q as usize])).collect();
        Ok(Nfa { tags: self.tags.clone(), vars: self.vars.clone(), trans, initial: vec![0], finals })
    }

    /// Moore partition refinement; expects a complete deterministic automaton.
    pub fn minimize(&self) -> Nfa {
        let n = self.states();
        let letters = self.letters();
        let mut class: Vec<u32> = self.finals.iter().map(|&f| u32::from(f)).collect();
        let mut count = class.iter().collect::<BTreeSet<_>>().len();
        loop {
            let mut sig_index: HashMap<Vec<u32>, u32> = HashMap::new();
            let mut next = vec![0u32; n];
            for s in 0..n {
                let mut sig = Vec::with_capacity(letters + 1);
                sig.push(class[s]);
                for l in 0..letters {
                    sig.push(class[self.trans[s * letters + l][0] as usize]);
                }
                let k = sig_index.len() as u32;
                next[s] = *sig_index.entry(sig).or_insert(k);
            }
            let new_count = sig_index.len();
            class = next;
            if new_count == count {
                break;
            }
            count = new_count;
        }
        let mut out = Nfa::empty_with(&self.tags, &self.vars, count);
        out.initial = vec![class[self.initial[0] as usize]];
        for s in 0..n {
            let c = class[s] as usize;
            out.finals[c] = self.finals[s];
            for l in 0..letters {
                out.trans[c * letters + l] = vec![class[self.trans[s * letters + l][0] as usize]];
            }
        }
        out
    }

    /// Complement through determinization.
    pub fn complement(&self, budget: usize, stats: &mut AutomatonStats) -> Result<Nfa> {
        stats.max_before_determinization = stats.max_before_determinization.max(self.states());
        let mut d = self.determinize(budget)?;
        stats.max_after_determinization = stats.max_after_determinization.max(d.states());
        for f in d.finals.iter_mut() {
            *f = !*f;
        }
        Ok(d.minimize().trim())
    }

    /// Existential projection of track `var`.
    pub fn project(&self, var: &str) -> Nfa {
        let j = match self.vars.iter().position(|v| v == var) {
            Some(j) => j,
            None => return self.clone(),
        };
        let mut vars = self.vars.clone();
        vars.remove(j);
        let old_m = self.vars.len();
        let old_letters = self.letters();
        let mut out = Nfa::empty_with(&self.tags, &vars, self.states());
        let new_letters = out.letters();
        out.initial = self.initial.clone();
        out.finals = self.finals.clone();
        for s in 0..self.states() {
            for t in 0..self.tags.len() {
                for bits in 0..1usize << (old_m - 1) {
                    let low = bits & ((1 << j) - 1);
                    let high = (bits >> j) << (j + 1);
                    let b0 = low | high;
                    let b1 = b0 | 1 << j;
                    let mut ts = self.trans[s * old_letters + (t << old_m | b0)].clone();
                    ts.extend(&self.trans[s * old_letters + (t << old_m | b1)]);
                    ts.sort_unstable();
                    ts.dedup();
                    out.trans[s * new_letters + (t << (old_m - 1) | bits)] = ts;
                }
            }
        }
        out.trim()
    }

    /// Shortest accepted word as `(tag index, bits)` letters; among words of
    /// equal length the one found first in letter order.
    pub fn shortest_word(&self) -> Option<Vec<(usize, u32)>> {
        let letters = self.letters();
        let m = self.vars.len();
        let mut parent: Vec<Option<(u32, usize)>> = vec![None; self.states()];
        let mut seen = vec![false; self.states()];
        let mut queue = VecDeque::new();
        for &s in &self.initial {
            if !seen[s as usize] {
                seen[s as usize] = true;
                queue.push_back(s);
            }
        }
        while let Some(s) = queue.pop_front() {
            if self.finals[s as usize] {
                let mut word = Vec::new();
                let mut cur = s;
                while let Some((p, l)) = parent[cur as usize] {
                    word.push((l >> m, (l & ((1 << m) - 1)) as u32));
                    cur = p;
                }
                word.reverse();
                return Some(word);
            }
            for l in 0..letters {
                for &q in self.targets(s, l) {
                    if !seen[q as usize] {
                        seen[q as usize] = true;
                        parent[q as usize] = Some((s, l));
                        queue.push_back(q);
                    }
                }
            }
        }
        None
    }

    pub fn is_empty(&self) -> bool {
        self.shortest_word().is_none()
    }
}

fn sorted_vars(f: &Formula) -> Vec<Var> {
    f.free_vars().into_iter().collect()
}

fn merge_vars(a: &[Var], b: &[Var]) -> Vec<Var> {
    let s: BTreeSet<Var> = a.iter().chain(b).cloned().collect();
    s.into_iter().collect()
}

struct Compiler<'a> {
    tags: &'a [Tag],
    budget: usize,
    stats: AutomatonStats,
}

impl Compiler<'_> {
    fn check(&self, a: Nfa) -> Result<Nfa> {
        if a.states() > self.budget {
            return Err(Error::StateBudget(self.budget));
        }
        Ok(a)
    }

    fn and(&mut self, a: Nfa, b: Nfa) -> Result<Nfa> {
        let vars = merge_vars(&a.vars, &b.vars);
        a.cylindrify(&vars).intersect(&b.cylindrify(&vars), self.budget)
    }

    fn or(&mut self, a: Nfa, b: Nfa) -> Result<Nfa> {
        let vars = merge_vars(&a.vars, &b.vars);
        self.check(a.cylindrify(&vars).union(&b.cylindrify(&vars)).trim())
    }

    fn not(&mut self, a: Nfa) -> Result<Nfa> {
        a.complement(self.budget, &mut self.stats)
    }

    fn exists(&mut self, v: &str, body: Nfa) -> Result<Nfa> {
        let vars = merge_vars(&body.vars, &[v.to_string()]);
        let mut b = body.cylindrify(&vars);
        if !is_set_var(v) {
            b = b.intersect(&Nfa::singleton(self.tags, &vars, v), self.budget)?;
        }
        Ok(b.project(v))
    }

    /// Two-variable atom over `[x, y]` given by an automaton on the pair of bits.
    fn binary(
        &self,
        x: &str,
        y: &str,
        same: Nfa,
        step: impl Fn(usize, u32, u32) -> Option<usize>,
        states: usize,
        finals: &[usize],
    ) -> Nfa {
        if x == y {
            return same;
        }
        let vars = merge_vars(&[x.to_string()], &[y.to_string()]);
        let jx = vars.iter().position(|v| v == x).unwrap();
        let jy = 1 - jx;
        Nfa::from_fn(self.tags, &vars, states, finals, |s, _, bits| step(s, bits >> jx & 1, bits >> jy & 1))
    }

    fn build(&mut self, f: &Formula) -> Result<Nfa> {
        use Formula::*;
        let tags = self.tags;
        let one = |v: &str| vec![v.to_string()];
        let out = match f {
            True => Nfa::universal(tags, &[]),
            False => Nfa::empty(tags, &[]),
            Less(x, y) => self.binary(
                x,
                y,
                Nfa::empty(tags, &one(x)),
                |s, bx, by| match (s, bx, by) {
                    (0, 0, 0) => Some(0),
                    (0, 1, 0) => Some(1),
                    (1, 0, 0) => Some(1),
                    (1, 0, 1) => Some(2),
                    (2, 0, 0) => Some(2),
                    _ => None,
                },
                3,
                &[2],
            ),
            Succ(x, y) => self.binary(
                x,
                y,
                Nfa::empty(tags, &one(x)),
                |s, bx, by| match (s, bx, by) {
                    (0, 0, 0) => Some(0),
                    (0, 1, 0) => Some(1),
                    (1, 0, 1) => Some(2),
                    (2, 0, 0) => Some(2),
                    _ => None,
                },
                3,
                &[2],
            ),
            Equal(x, y) => self.binary(
                x,
                y,
                Nfa::singleton(tags, &one(x), x),
                |s, bx, by| match (s, bx, by) {
                    (0, 0, 0) => Some(0),
                    (0, 1, 1) => Some(1),
                    (1, 0, 0) => Some(1),
                    _ => None,
                },
                2,
                &[1],
            ),
            First(x) => Nfa::from_fn(tags, &one(x), 2, &[1], |s, _, b| match (s, b) {
                (0, 1) => Some(1),
                (1, 0) => Some(1),
                _ => None,
            }),
            Last(x) => Nfa::from_fn(tags, &one(x), 2, &[1], |s, _, b| match (s, b) {
                (0, 0) => Some(0),
                (0, 1) => Some(1),
                _ => None,
            }),
            Tag(a, x) => match tags.iter().position(|t| t == a) {
                None => Nfa::empty(tags, &one(x)),
                Some(ti) => Nfa::from_fn(tags, &one(x), 2, &[1], move |s, t, b| match (s, b) {
                    (0, 0) => Some(0),
                    (0, 1) if t == ti => Some(1),
                    (1, 0) => Some(1),
                    _ => None,
                }),
            },
            In(x, set) => {
                let vars = merge_vars(&one(x), &one(set));
                let jx = vars.iter().position(|v| v == x).unwrap();
                let js = 1 - jx;
                Nfa::from_fn(tags, &vars, 2, &[1], move |s, _, bits| match (s, bits >> jx & 1, bits >> js & 1) {
                    (0, 0, _) => Some(0),
                    (0, 1, 1) => Some(1),
                    (1, 0, _) => Some(1),
                    _ => None,
                })
            }
            Not(a) => {
                let a = self.build(a)?;
                self.not(a)?
            }
            And(a, b) => {
                let (a, b) = (self.build(a)?, self.build(b)?);
                self.and(a, b)?
            }
            Or(a, b) => {
                let (a, b) = (self.build(a)?, self.build(b)?);
                self.or(a, b)?
            }
            Implies(a, b) => {
                let a = self.build(a)?;
                let na = self.not(a)?;
                let b = self.build(b)?;
                self.or(na, b)?
            }
            Iff(a, b) => {
                let (a, b) = (self.build(a)?, self.build(b)?);
                let (na, nb) = (self.not(a.clone())?, self.not(b.clone())?);
                let both = self.and(a, b)?;
                let neither = self.and(na, nb)?;
                self.or(both, neither)?
            }
            ExistsFO(v, body) | ExistsSO(v, body) => {
                let b = self.build(body)?;
                self.exists(v, b)?
            }
            ForallFO(v, body) | ForallSO(v, body) => {
                let b = self.build(body)?;
                let nb = self.not(b)?;
                let e = self.exists(v, nb)?;
                self.not(e)?
            }
            Data(..) | Rigid { .. } | SemiRigid { .. } => {
                return Err(Error::Grammar(format!("data test in classical formula `{f}`")));
            }
        };
        debug_assert_eq!(out.vars, sorted_vars(f));
        self.check(out)
    }
}

/// Automaton for a formula without data tests, over the sorted free variables
/// of `phi`.  First-order tracks are constrained to singletons.
pub fn compile_mso(phi: &Formula, tags: &[Tag], budget: usize) -> Result<(Nfa, AutomatonStats)> {
    let mut c = Compiler { tags, budget, stats: AutomatonStats::default() };
    let mut a = c.build(phi)?;
    for v in a.vars.clone() {
        if !is_set_var(&v) {
            a = a.intersect(&Nfa::singleton(tags, &a.vars, &v), budget)?;
        }
    }
    c.stats.final_states = a.states();
    Ok((a, c.stats))
}

/// A data sentence with its tests replaced by predicates, and the formula
/// characterising predicate annotations that come from actual data.
#[derive(Clone, Debug)]
pub struct ReducedSentence {
    pub core: Formula,
    pub descriptors: Vec<TestDescriptor>,
    pub partition: Formula,
    pub n: usize,
}

pub fn partition_var(i: usize) -> Var {
    format!("Z#{i}")
}

impl ReducedSentence {
    /// `core ∧ partition` with predicate and partition variables left free.
    pub fn matrix(&self) -> Formula {
        Formula::and(self.core.clone(), self.partition.clone())
    }

    /// `∃C̄ ∃Z̄ (core ∧ partition)`.
    pub fn sentence(&self) -> Formula {
        let mut f = self.matrix();
        for i in (1..=self.n).rev() {
            f = Formula::exists(&partition_var(i), f);
        }
        for d in self.descriptors.iter().rev() {
            f = Formula::exists(&d.pred, f);
        }
        f
    }
}

/// `u` and `v` carry the same value: same position, or the same partition class.
fn same_value(u: &str, v: &str, n: usize) -> Formula {
    Formula::any(std::iter::once(Formula::equal(u, v)).chain(
        (1..=n).map(|i| Formula::and(Formula::member(u, &partition_var(i)), Formula::member(v, &partition_var(i)))),
    ))
}

/// Builds the reduced sentence; `psi` must be closed.
pub fn reduce_data_sentence(psi: &Formula) -> Result<ReducedSentence> {
    let free = psi.free_vars();
    if !free.is_empty() {
        return Err(Error::Grammar(format!("expected a sentence, found free variables {free:?}")));
    }
    let (core, descriptors) = normalize_tests(psi)?;
    let n = descriptors.len();
    let (x, y, z) = ("x#", "y#", "z#");
    let mut parts = Vec::new();
    for i in 1..=n {
        for j in i + 1..=n {
            let p = "p#";
            parts.push(Formula::forall(
                p,
                Formula::not(Formula::and(
                    Formula::member(p, &partition_var(i)),
                    Formula::member(p, &partition_var(j)),
                )),
            ));
        }
    }
    for d in &descriptors {
        let gamma = match &d.beta {
            None => Formula::exists(y, Formula::and(d.alpha.clone(), same_value(x, y, n))),
            Some(beta) => Formula::exists(
                y,
                Formula::exists(z, Formula::all([d.alpha.clone(), beta.clone(), same_value(y, z, n)])),
            ),
        };
        parts.push(Formula::forall(x, Formula::iff(Formula::member(x, &d.pred), gamma)));
    }
    Ok(ReducedSentence { core, descriptors, partition: Formula::all(parts), n })
}

#[derive(Clone, Debug)]
pub struct SatResult {
    pub satisfiable: bool,
    /// Verified by direct evaluation.
    pub witness: Option<DataWord>,
    pub partition_vars: usize,
    pub stats: AutomatonStats,
}

/// Satisfiability over data words with tags from `tags`.
pub fn satisfiable_with(psi: &Formula, tags: &[Tag], budget: usize) -> Result<SatResult> {
    let red = reduce_data_sentence(psi)?;
    let (nfa, stats) = compile_mso(&red.matrix(), tags, budget)?;
    let Some(word) = nfa.shortest_word() else {
        return Ok(SatResult { satisfiable: false, witness: None, partition_vars: red.n, stats });
    };
    let tracks: Vec<Option<u32>> =
        nfa.vars.iter().map(|v| v.strip_prefix("Z#").map(|i| i.parse::<u32>().expect("partition index"))).collect();
    let mut fresh = red.n as u32 + 1;
    let letters = word
        .iter()
        .map(|&(t, bits)| {
            let class = tracks.iter().enumerate().find_map(|(j, z)| z.filter(|_| bits >> j & 1 == 1));
            let value = class.unwrap_or_else(|| {
                fresh += 1;
                fresh - 1
            });
            Letter { tag: tags[t].clone(), value }
        })
        .collect();
    let witness = DataWord(letters);
    if !evaluate(psi, &witness, &Assignment::new())? {
        return Err(Error::InvalidAutomaton(format!("witness {witness} does not satisfy `{psi}`")));
    }
    Ok(SatResult { satisfiable: true, witness: Some(witness), partition_vars: red.n, stats })
}

pub fn satisfiable(psi: &Formula) -> Result<SatResult> {
    satisfiable_with(psi, &psi.default_alphabet(), DEFAULT_STATE_BUDGET)
}

/// `psi` holds on every data word over `tags`.
pub fn valid_with(psi: &Formula, tags: &[Tag], budget: usize) -> Result<bool> {
    Ok(!satisfiable_with(&Formula::not(psi.clone()), tags, budget)?.satisfiable)
}

pub fn valid(psi: &Formula) -> Result<bool> {
    valid_with(psi, &psi.default_alphabet(), DEFAULT_STATE_BUDGET)
}

/// Annotation of `w` with the predicates `C#i` read off the data, innermost first.
pub fn data_annotation(descriptors: &[TestDescriptor], w: &DataWord) -> Result<Assignment> {
    let mut asg = Assignment::new();
    let n = w.len();
    for d in descriptors {
        let mut set = BTreeSet::new();
        for x in 1..=n {
            let mut hit = false;
            for y in 1..=n {
                let a = asg.clone().with_fo("x#", x).with_fo("y#", y);
                if !evaluate(&d.alpha, w, &a)? {
                    continue;
                }
                match &d.beta {
                    None => hit |= w.0[x - 1].value == w.0[y - 1].value,
                    Some(beta) => {
                        for z in 1..=n {
                            let b = asg.clone().with_fo("x#", x).with_fo("z#", z);
                            if evaluate(beta, w, &b)? && w.0[y - 1].value == w.0[z - 1].value {
                                hit = true;
                            }
                        }
                    }
                }
            }
            if hit {
                set.insert(x);
            }
        }
        asg.so.insert(d.pred.clone(), set);
    }
    Ok(asg)
}
