//! Direct evaluation on a data word, enumerating subsets for set quantifiers.

use std::collections::{BTreeMap, BTreeSet};

use super::{Formula, Var};
use crate::error::{Error, Result};
use crate::nominal::DataWord;

/// Longest word on which set quantifiers are enumerated by default.
pub const DEFAULT_MAX_WORD_LEN: usize = 18;

/// Interpretation of free variables; positions are 1-based.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assignment {
    pub fo: BTreeMap<Var, usize>,
    pub so: BTreeMap<Var, BTreeSet<usize>>,
}

impl Assignment {
    pub fn new() -> Assignment {
        Assignment::default()
    }

    pub fn with_fo(mut self, v: &str, pos: usize) -> Assignment {
        self.fo.insert(v.to_string(), pos);
        self
    }

    pub fn with_so(mut self, v: &str, set: impl IntoIterator<Item = usize>) -> Assignment {
        self.so.insert(v.to_string(), set.into_iter().collect());
        self
    }
}

enum Binding {
    Pos(usize),
    Set(u64),
}

struct Env<'a> {
    w: &'a DataWord,
    stack: Vec<(&'a str, Binding)>,
    outer: &'a Assignment,
}

impl<'a> Env<'a> {
    fn pos(&self, v: &str) -> Result<usize> {
        for (name, b) in self.stack.iter().rev() {
            if *name == v {
                if let Binding::Pos(p) = b {
                    return Ok(*p);
                }
            }
        }
        self.outer.fo.get(v).copied().ok_or_else(|| Error::UnboundVariable(v.to_string()))
    }

    fn set(&self, v: &str) -> Result<u64> {
        for (name, b) in self.stack.iter().rev() {
            if *name == v {
                if let Binding::Set(s) = b {
                    return Ok(*s);
                }
            }
        }
        let s = self.outer.so.get(v).ok_or_else(|| Error::UnboundVariable(v.to_string()))?;
        Ok(s.iter().filter(|&&p| (1..=64).contains(&p)).fold(0, |m, &p| m | 1 << (p - 1)))
    }

    fn value(&self, p: usize) -> u32 {
        self.w.0[p - 1].value
    }

    fn eval(&mut self, f: &'a Formula) -> Result<bool> {
        use Formula::*;
        let n = self.w.len();
        Ok(match f {
            True => true,
            False => false,
            Less(a, b) => self.pos(a)? < self.pos(b)?,
            Equal(a, b) => self.pos(a)? == self.pos(b)?,
            Succ(a, b) => self.pos(a)? + 1 == self.pos(b)?,
            First(a) => self.pos(a)? == 1,
            Last(a) => self.pos(a)? == n,
            Tag(t, a) => self.w.0[self.pos(a)? - 1].tag == *t,
            In(a, s) => self.set(s)? >> (self.pos(a)? - 1) & 1 == 1,
            Not(a) => !self.eval(a)?,
            And(a, b) => self.eval(a)? && self.eval(b)?,
            Or(a, b) => self.eval(a)? || self.eval(b)?,
            Implies(a, b) => !self.eval(a)? || self.eval(b)?,
            Iff(a, b) => self.eval(a)? == self.eval(b)?,
            ExistsFO(v, body) | ForallFO(v, body) => {
                let want = matches!(f, ExistsFO(..));
                for p in 1..=n {
                    self.stack.push((v, Binding::Pos(p)));
                    let r = self.eval(body);
                    self.stack.pop();
                    if r? == want {
                        return Ok(want);
                    }
                }
                !want
            }
            ExistsSO(v, body) | ForallSO(v, body) => {
                let want = matches!(f, ExistsSO(..));
                for mask in 0..1u64 << n {
                    self.stack.push((v, Binding::Set(mask)));
                    let r = self.eval(body);
                    self.stack.pop();
                    if r? == want {
                        return Ok(want);
                    }
                }
                !want
            }
            Data(a, b, pol) => pol.holds(self.value(self.pos(a)?) == self.value(self.pos(b)?)),
            Rigid { guard, x, y, pol } => {
                self.eval(guard)? && pol.holds(self.value(self.pos(x)?) == self.value(self.pos(y)?))
            }
            SemiRigid { alpha, beta, y, z, pol, .. } => {
                self.eval(alpha)? && self.eval(beta)? && pol.holds(self.value(self.pos(y)?) == self.value(self.pos(z)?))
            }
        })
    }
}

/// `w, asg ⊨ phi`, with the default bound on set enumeration.
pub fn evaluate(phi: &Formula, w: &DataWord, asg: &Assignment) -> Result<bool> {
    evaluate_with(phi, w, asg, DEFAULT_MAX_WORD_LEN)
}

/// Like [`evaluate`], refusing set quantification over words longer than `max_len`.
pub fn evaluate_with(phi: &Formula, w: &DataWord, asg: &Assignment, max_len: usize) -> Result<bool> {
    let bound = max_len.min(63);
    if w.len() > bound && phi.has_set_quantifiers() {
        return Err(Error::WordTooLong { len: w.len(), bound });
    }
    for (v, &p) in &asg.fo {
        if p == 0 || p > w.len() {
            return Err(Error::UnboundVariable(format!("{v} is bound to position {p} outside the word")));
        }
    }
    Env { w, stack: Vec::new(), outer: asg }.eval(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse, PHI_L2};

    fn w(s: &str) -> DataWord {
        s.parse().unwrap()
    }

    fn holds(f: &str, word: &str) -> bool {
        evaluate(&parse(f).unwrap(), &w(word), &Assignment::new()).unwrap()
    }

    #[test]
    fn l2_examples() {
        assert!(holds(PHI_L2, "a@1 a@2 a@1"));
        assert!(!holds(PHI_L2, "a@1 a@2"));
        assert!(!holds("E x. true", ""));
    }

    #[test]
    fn free_variables_read_the_assignment() {
        let f = parse("x < y & y in Y").unwrap();
        let asg = Assignment::new().with_fo("x", 1).with_fo("y", 3).with_so("Y", [3]);
        assert!(evaluate(&f, &w("a@1 a@1 a@1"), &asg).unwrap());
        let missing = Assignment::new().with_fo("x", 1);
        assert_eq!(evaluate(&f, &w("a@1 a@1 a@1"), &missing), Err(Error::UnboundVariable("y".into())));
    }

    #[test]
    fn set_quantifiers_are_bounded() {
        let even = parse("E X. (A x. first(x) -> x in X) & (A x. A y. succ(x,y) -> (x in X <-> !(y in X))) & (A x. last(x) -> !(x in X))").unwrap();
        for n in 0..8usize {
            let word = DataWord((0..n).map(|i| crate::nominal::Letter::new("a", i as u32)).collect());
            assert_eq!(evaluate(&even, &word, &Assignment::new()).unwrap(), n % 2 == 0, "{n}");
        }
        let long = DataWord((0..20).map(|i| crate::nominal::Letter::new("a", i)).collect());
        assert_eq!(evaluate(&even, &long, &Assignment::new()), Err(Error::WordTooLong { len: 20, bound: 18 }));
        assert!(evaluate(&parse("E x. a(x)").unwrap(), &long, &Assignment::new()).unwrap());
    }

    #[test]
    fn neq_polarity_negates_only_the_comparison() {
        let f = parse("E x. E y. rigid[succ(x,y)]{x !~ y}").unwrap();
        assert!(evaluate(&f, &w("a@1 a@2"), &Assignment::new()).unwrap());
        assert!(!evaluate(&f, &w("a@1 a@1"), &Assignment::new()).unwrap());
        assert!(!evaluate(&f, &w("a@1"), &Assignment::new()).unwrap());
    }
}
