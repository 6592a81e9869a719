//! Guarded MSO with data equality tests over data words.
//!
//! Variables are plain strings: first-order variables start with a lowercase
//! letter, set variables with an uppercase one.  Names containing `#` are
//! reserved for variables introduced by the library and cannot be parsed.

mod eval;
mod parser;
mod rigidity;

use std::collections::BTreeSet;
use std::fmt;

use crate::nominal::{DataWord, Tag};

pub use eval::{evaluate, evaluate_with, Assignment, DEFAULT_MAX_WORD_LEN};
pub use parser::parse;
pub use rigidity::{
    check_functional, check_grammar, check_grammar_with, check_rigidity, check_semi_rigidity, functionality_sentence,
    normalize_tests, rigidify, Fragment, GrammarVerdict, RigidityMode, RigidityStatus, RigidityVerdict, TestDescriptor,
};

pub type Var = String;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Eq,
    Neq,
}

impl Polarity {
    pub fn symbol(self) -> &'static str {
        match self {
            Polarity::Eq => "~",
            Polarity::Neq => "!~",
        }
    }

    pub fn holds(self, equal: bool) -> bool {
        match self {
            Polarity::Eq => equal,
            Polarity::Neq => !equal,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    Less(Var, Var),
    Equal(Var, Var),
    Succ(Var, Var),
    First(Var),
    Last(Var),
    Tag(Tag, Var),
    In(Var, Var),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    ExistsFO(Var, Box<Formula>),
    ForallFO(Var, Box<Formula>),
    ExistsSO(Var, Box<Formula>),
    ForallSO(Var, Box<Formula>),
    /// A data comparison outside any guard.  It parses so that it can be
    /// rejected with a useful message.
    Data(Var, Var, Polarity),
    /// `guard(x,y) ∧ x ∼ y` (or `≁`).
    Rigid {
        guard: Box<Formula>,
        x: Var,
        y: Var,
        pol: Polarity,
    },
    /// `alpha(x,y) ∧ beta(x,z) ∧ y ∼ z` (or `≁`).
    SemiRigid {
        alpha: Box<Formula>,
        beta: Box<Formula>,
        x: Var,
        y: Var,
        z: Var,
        pol: Polarity,
    },
}

pub fn is_set_var(v: &str) -> bool {
    v.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}

impl Formula {
    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    pub fn exists(v: &str, f: Formula) -> Formula {
        if is_set_var(v) {
            Formula::ExistsSO(v.to_string(), Box::new(f))
        } else {
            Formula::ExistsFO(v.to_string(), Box::new(f))
        }
    }

    pub fn forall(v: &str, f: Formula) -> Formula {
        if is_set_var(v) {
            Formula::ForallSO(v.to_string(), Box::new(f))
        } else {
            Formula::ForallFO(v.to_string(), Box::new(f))
        }
    }

    pub fn less(x: &str, y: &str) -> Formula {
        Formula::Less(x.into(), y.into())
    }

    pub fn equal(x: &str, y: &str) -> Formula {
        Formula::Equal(x.into(), y.into())
    }

    pub fn succ(x: &str, y: &str) -> Formula {
        Formula::Succ(x.into(), y.into())
    }

    pub fn member(x: &str, set: &str) -> Formula {
        Formula::In(x.into(), set.into())
    }

    pub fn tag(a: &str, x: &str) -> Formula {
        Formula::Tag(Tag::new(a), x.into())
    }

    pub fn rigid(guard: Formula, x: &str, y: &str, pol: Polarity) -> Formula {
        Formula::Rigid { guard: Box::new(guard), x: x.into(), y: y.into(), pol }
    }

    pub fn semi_rigid(alpha: Formula, beta: Formula, x: &str, y: &str, z: &str, pol: Polarity) -> Formula {
        Formula::SemiRigid { alpha: Box::new(alpha), beta: Box::new(beta), x: x.into(), y: y.into(), z: z.into(), pol }
    }

    /// Conjunction of a list; `true` when empty.
    pub fn all(fs: impl IntoIterator<Item = Formula>) -> Formula {
        fs.into_iter().reduce(Formula::and).unwrap_or(Formula::True)
    }

    /// Disjunction of a list; `false` when empty.
    pub fn any(fs: impl IntoIterator<Item = Formula>) -> Formula {
        fs.into_iter().reduce(Formula::or).unwrap_or(Formula::False)
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Var>, out: &mut BTreeSet<Var>) {
        let mut add = |v: &Var, bound: &Vec<Var>| {
            if !bound.contains(v) {
                out.insert(v.clone());
            }
        };
        use Formula::*;
        match self {
            True | False => {}
            Less(a, b) | Equal(a, b) | Succ(a, b) | In(a, b) | Data(a, b, _) => {
                add(a, bound);
                add(b, bound);
            }
            First(a) | Last(a) | Tag(_, a) => add(a, bound),
            Not(f) => f.collect_free(bound, out),
            And(a, b) | Or(a, b) | Implies(a, b) | Iff(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            ExistsFO(v, f) | ForallFO(v, f) | ExistsSO(v, f) | ForallSO(v, f) => {
                bound.push(v.clone());
                f.collect_free(bound, out);
                bound.pop();
            }
            Rigid { guard, x, y, .. } => {
                add(x, bound);
                add(y, bound);
                guard.collect_free(bound, out);
            }
            SemiRigid { alpha, beta, x, y, z, .. } => {
                add(x, bound);
                add(y, bound);
                add(z, bound);
                alpha.collect_free(bound, out);
                beta.collect_free(bound, out);
            }
        }
    }

    /// Every variable name occurring anywhere, bound or free.
    pub fn all_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| {
            use Formula::*;
            match f {
                Less(a, b) | Equal(a, b) | Succ(a, b) | In(a, b) | Data(a, b, _) => {
                    out.insert(a.clone());
                    out.insert(b.clone());
                }
                First(a) | Last(a) | Tag(_, a) => {
                    out.insert(a.clone());
                }
                ExistsFO(v, _) | ForallFO(v, _) | ExistsSO(v, _) | ForallSO(v, _) => {
                    out.insert(v.clone());
                }
                Rigid { x, y, .. } => {
                    out.insert(x.clone());
                    out.insert(y.clone());
                }
                SemiRigid { x, y, z, .. } => {
                    out.insert(x.clone());
                    out.insert(y.clone());
                    out.insert(z.clone());
                }
                _ => {}
            }
        });
        out
    }

    /// Pre-order traversal including guards.
    pub fn visit(&self, f: &mut impl FnMut(&Formula)) {
        f(self);
        use Formula::*;
        match self {
            Not(a) | ExistsFO(_, a) | ForallFO(_, a) | ExistsSO(_, a) | ForallSO(_, a) => a.visit(f),
            And(a, b) | Or(a, b) | Implies(a, b) | Iff(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Rigid { guard, .. } => guard.visit(f),
            SemiRigid { alpha, beta, .. } => {
                alpha.visit(f);
                beta.visit(f);
            }
            _ => {}
        }
    }

    pub fn tags(&self) -> BTreeSet<Tag> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| {
            if let Formula::Tag(a, _) = f {
                out.insert(a.clone());
            }
        });
        out
    }

    /// Tags mentioned by the formula, or `{a}` if there are none.
    pub fn default_alphabet(&self) -> Vec<Tag> {
        let t = self.tags();
        if t.is_empty() {
            vec![Tag::new("a")]
        } else {
            t.into_iter().collect()
        }
    }

    pub fn has_data_tests(&self) -> bool {
        let mut found = false;
        self.visit(&mut |f| {
            found |= matches!(f, Formula::Data(..) | Formula::Rigid { .. } | Formula::SemiRigid { .. })
        });
        found
    }

    pub fn has_set_quantifiers(&self) -> bool {
        let mut found = false;
        self.visit(&mut |f| found |= matches!(f, Formula::ExistsSO(..) | Formula::ForallSO(..)));
        found
    }

    /// Capture-avoiding renaming of the free occurrences of `from` to `to`.
    pub fn rename_free(&self, from: &str, to: &str) -> Formula {
        if from == to {
            return self.clone();
        }
        let r = |v: &Var| if v == from { to.to_string() } else { v.clone() };
        use Formula::*;
        match self {
            True => True,
            False => False,
            Less(a, b) => Less(r(a), r(b)),
            Equal(a, b) => Equal(r(a), r(b)),
            Succ(a, b) => Succ(r(a), r(b)),
            First(a) => First(r(a)),
            Last(a) => Last(r(a)),
            Tag(t, a) => Tag(t.clone(), r(a)),
            In(a, b) => In(r(a), r(b)),
            Data(a, b, p) => Data(r(a), r(b), *p),
            Not(a) => Not(Box::new(a.rename_free(from, to))),
            And(a, b) => And(Box::new(a.rename_free(from, to)), Box::new(b.rename_free(from, to))),
            Or(a, b) => Or(Box::new(a.rename_free(from, to)), Box::new(b.rename_free(from, to))),
            Implies(a, b) => Implies(Box::new(a.rename_free(from, to)), Box::new(b.rename_free(from, to))),
            Iff(a, b) => Iff(Box::new(a.rename_free(from, to)), Box::new(b.rename_free(from, to))),
            ExistsFO(v, body) | ForallFO(v, body) | ExistsSO(v, body) | ForallSO(v, body) => {
                if v == from {
                    return self.clone();
                }
                let (v2, body2) = if v == to && body.free_vars().contains(from) {
                    let fresh = fresh_name(v, &[body.all_vars(), BTreeSet::from([to.to_string()])]);
                    (fresh.clone(), body.rename_free(v, &fresh))
                } else {
                    (v.clone(), (**body).clone())
                };
                let nb = Box::new(body2.rename_free(from, to));
                match self {
                    ExistsFO(..) => ExistsFO(v2, nb),
                    ForallFO(..) => ForallFO(v2, nb),
                    ExistsSO(..) => ExistsSO(v2, nb),
                    _ => ForallSO(v2, nb),
                }
            }
            Rigid { guard, x, y, pol } => {
                Rigid { guard: Box::new(guard.rename_free(from, to)), x: r(x), y: r(y), pol: *pol }
            }
            SemiRigid { alpha, beta, x, y, z, pol } => SemiRigid {
                alpha: Box::new(alpha.rename_free(from, to)),
                beta: Box::new(beta.rename_free(from, to)),
                x: r(x),
                y: r(y),
                z: r(z),
                pol: *pol,
            },
        }
    }

    /// Renames bound variables to `b#1, b#2, ...` (`B#i` for sets) in binding
    /// order, so that alpha-equivalent formulas become equal.
    pub fn canonical_bound(&self) -> Formula {
        let mut counter = 0;
        self.canon(&mut counter)
    }

    fn canon(&self, counter: &mut usize) -> Formula {
        use Formula::*;
        match self {
            Not(a) => Not(Box::new(a.canon(counter))),
            And(a, b) => {
                let a = a.canon(counter);
                And(Box::new(a), Box::new(b.canon(counter)))
            }
            Or(a, b) => {
                let a = a.canon(counter);
                Or(Box::new(a), Box::new(b.canon(counter)))
            }
            Implies(a, b) => {
                let a = a.canon(counter);
                Implies(Box::new(a), Box::new(b.canon(counter)))
            }
            Iff(a, b) => {
                let a = a.canon(counter);
                Iff(Box::new(a), Box::new(b.canon(counter)))
            }
            ExistsFO(v, body) | ForallFO(v, body) | ExistsSO(v, body) | ForallSO(v, body) => {
                *counter += 1;
                let name = if is_set_var(v) { format!("B#{counter}") } else { format!("b#{counter}") };
                let nb = Box::new(body.rename_free(v, &name).canon(counter));
                match self {
                    ExistsFO(..) => ExistsFO(name, nb),
                    ForallFO(..) => ForallFO(name, nb),
                    ExistsSO(..) => ExistsSO(name, nb),
                    _ => ForallSO(name, nb),
                }
            }
            Rigid { guard, x, y, pol } => {
                Rigid { guard: Box::new(guard.canon(counter)), x: x.clone(), y: y.clone(), pol: *pol }
            }
            SemiRigid { alpha, beta, x, y, z, pol } => {
                let a = alpha.canon(counter);
                SemiRigid {
                    alpha: Box::new(a),
                    beta: Box::new(beta.canon(counter)),
                    x: x.clone(),
                    y: y.clone(),
                    z: z.clone(),
                    pol: *pol,
                }
            }
            other => other.clone(),
        }
    }

    /// Replaces `Or`, `Implies`, `Iff` and universal quantifiers by `Not`,
    /// `And` and existentials.  Guards are rewritten too.
    pub fn desugar(&self) -> Formula {
        use Formula::*;
        match self {
            Not(a) => match a.desugar() {
                Not(b) => *b,
                b => Formula::not(b),
            },
            And(a, b) => Formula::and(a.desugar(), b.desugar()),
            Or(a, b) => Formula::not(Formula::and(Formula::not(a.desugar()), Formula::not(b.desugar()))),
            Implies(a, b) => Formula::not(Formula::and(a.desugar(), Formula::not(b.desugar()))),
            Iff(a, b) => {
                let (a, b) = (a.desugar(), b.desugar());
                Formula::and(
                    Formula::not(Formula::and(a.clone(), Formula::not(b.clone()))),
                    Formula::not(Formula::and(b, Formula::not(a))),
                )
            }
            ExistsFO(v, f) => ExistsFO(v.clone(), Box::new(f.desugar())),
            ExistsSO(v, f) => ExistsSO(v.clone(), Box::new(f.desugar())),
            ForallFO(v, f) => Formula::not(ExistsFO(v.clone(), Box::new(Formula::not(f.desugar())))),
            ForallSO(v, f) => Formula::not(ExistsSO(v.clone(), Box::new(Formula::not(f.desugar())))),
            Rigid { guard, x, y, pol } => {
                Rigid { guard: Box::new(guard.desugar()), x: x.clone(), y: y.clone(), pol: *pol }
            }
            SemiRigid { alpha, beta, x, y, z, pol } => SemiRigid {
                alpha: Box::new(alpha.desugar()),
                beta: Box::new(beta.desugar()),
                x: x.clone(),
                y: y.clone(),
                z: z.clone(),
                pol: *pol,
            },
            other => other.clone(),
        }
    }

    fn precedence(&self) -> u8 {
        use Formula::*;
        match self {
            ExistsFO(..) | ForallFO(..) | ExistsSO(..) | ForallSO(..) => 0,
            Iff(..) => 1,
            Implies(..) => 2,
            Or(..) => 3,
            And(..) => 4,
            Not(..) => 5,
            _ => 6,
        }
    }
}

/// A name derived from `base` that is not in any of the given sets.
pub fn fresh_name(base: &str, avoid: &[BTreeSet<Var>]) -> Var {
    let mut cand = format!("{base}'");
    while avoid.iter().any(|s| s.contains(&cand)) {
        cand.push('\'');
    }
    cand
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Formula::*;
        let sub = |f: &mut fmt::Formatter<'_>, child: &Formula, min: u8| -> fmt::Result {
            if child.precedence() < min {
                write!(f, "({child})")
            } else {
                write!(f, "{child}")
            }
        };
        match self {
            True => write!(f, "true"),
            False => write!(f, "false"),
            Less(a, b) => write!(f, "{a} < {b}"),
            Equal(a, b) => write!(f, "{a} = {b}"),
            Succ(a, b) => write!(f, "succ({a},{b})"),
            First(a) => write!(f, "first({a})"),
            Last(a) => write!(f, "last({a})"),
            Tag(t, a) => write!(f, "{t}({a})"),
            In(a, b) => write!(f, "{a} in {b}"),
            Data(a, b, p) => write!(f, "{a} {} {b}", p.symbol()),
            Not(a) => {
                write!(f, "!")?;
                sub(f, a, 6)
            }
            And(a, b) => {
                sub(f, a, 5)?;
                write!(f, " & ")?;
                sub(f, b, 5)
            }
            Or(a, b) => {
                sub(f, a, 4)?;
                write!(f, " | ")?;
                sub(f, b, 4)
            }
            Implies(a, b) => {
                sub(f, a, 3)?;
                write!(f, " -> ")?;
                sub(f, b, 3)
            }
            Iff(a, b) => {
                sub(f, a, 2)?;
                write!(f, " <-> ")?;
                sub(f, b, 2)
            }
            ExistsFO(v, b) | ExistsSO(v, b) => write!(f, "E {v}. {b}"),
            ForallFO(v, b) | ForallSO(v, b) => write!(f, "A {v}. {b}"),
            Rigid { guard, x, y, pol } => write!(f, "rigid[{guard}]({x},{y}){{{x} {} {y}}}", pol.symbol()),
            SemiRigid { alpha, beta, x, y, z, pol } => {
                write!(f, "semirigid[{alpha}; {beta}]({x},{y},{z}){{{y} {} {z}}}", pol.symbol())
            }
        }
    }
}

/// `L_{≥k}`: words with at least `k` distinct data values, for `k ∈ {1,2,3}`.
///
/// For `k = 3` the sentence looks for a minimal factor `[x,y]` with three
/// values: its interior is a nonempty constant block, the block differs from
/// both neighbours, and the endpoints differ from each other.
pub fn at_least_values(k: usize) -> Option<Formula> {
    match k {
        1 => Some(parse("E x. true").expect("literal parses")),
        2 => Some(parse("E x. E y. rigid[succ(x,y)](x,y){x !~ y}").expect("literal parses")),
        3 => Some(parse(L_GEQ3).expect("literal parses")),
        _ => None,
    }
}

pub const L_GEQ3: &str = "E x. E y. rigid[
    (E m. succ(x,m) & m < y)
    & (A u. A v. (x < u & succ(u,v) & v < y) -> rigid[succ(u,v)](u,v){u ~ v})
    & (E u. rigid[succ(x,u)](x,u){x !~ u})
    & (E v. rigid[succ(v,y)](v,y){v !~ y})
](x,y){x !~ y}";

/// First and last values agree.
pub const PHI_L2: &str = "E x. E y. rigid[first(x) & last(y)](x,y){x ~ y}";

/// Every two distinct positions carry distinct values, written with an
/// unguarded test.
pub const DAGGER: &str = "A x. A y. (x != y -> x !~ y)";

/// Brute-force membership in `L_{≥k}`.
pub fn at_least_values_oracle(w: &DataWord, k: usize) -> bool {
    w.values().len() >= k
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: &str) -> Formula {
        parse(s).unwrap()
    }

    #[test]
    fn free_variables() {
        assert_eq!(f("E x. x < y & x in Y").free_vars(), ["Y".to_string(), "y".to_string()].into());
        assert!(f(PHI_L2).free_vars().is_empty());
        assert!(f(L_GEQ3).free_vars().is_empty());
    }

    #[test]
    fn renaming_avoids_capture() {
        let g = f("E y. x < y");
        let h = g.rename_free("x", "y");
        assert_eq!(h.free_vars(), ["y".to_string()].into());
        match h {
            Formula::ExistsFO(v, _) => assert_ne!(v, "y"),
            other => panic!("{other}"),
        }
        // Shadowed occurrences stay.
        assert_eq!(f("E x. a(x)").rename_free("x", "z"), f("E x. a(x)"));
    }

    #[test]
    fn alpha_equivalent_guards_canonicalize_equal() {
        let a = f("E u. succ(x,u) & u < y").canonical_bound();
        let b = f("E m. succ(x,m) & m < y").canonical_bound();
        assert_eq!(a, b);
        assert_ne!(a, f("E m. succ(m,x) & m < y").canonical_bound());
    }

    #[test]
    fn display_round_trips() {
        for s in [PHI_L2, L_GEQ3, DAGGER, "A X. (E x. x in X) <-> !(A y. !(y in X) | b(y))"] {
            let g = f(s);
            assert_eq!(f(&g.to_string()), g, "{g}");
        }
    }

    #[test]
    fn desugared_formulas_are_core() {
        let g = f("A x. (a(x) | b(x)) -> E y. x < y <-> first(y)").desugar();
        g.visit(&mut |h| {
            assert!(!matches!(h, Formula::Or(..) | Formula::Implies(..) | Formula::Iff(..) | Formula::ForallFO(..)))
        });
    }
}
