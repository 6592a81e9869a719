//! Grammar conformance, rigidity of guards, and the replacement of guarded
//! tests by fresh unary predicates.

use std::collections::HashMap;

use super::{evaluate, fresh_name, Assignment, Formula, Polarity, Var};
use crate::error::{Error, Result};
use crate::msoclassic::{satisfiable_with, DEFAULT_STATE_BUDGET};
use crate::nominal::{DataWord, Tag};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RigidityMode {
    /// Search all words of length `<= max_len` over values `1..=max_value`.
    Bounded { max_len: usize, max_value: u32 },
    /// Decide validity of the functionality sentences with automata.
    Exact { budget: usize },
}

impl Default for RigidityMode {
    fn default() -> Self {
        RigidityMode::Exact { budget: DEFAULT_STATE_BUDGET }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RigidityStatus {
    Rigid,
    NotRigid,
    SemiRigid,
    NotSemiRigid,
}

/// A verdict; a counterexample lists a word and positions `(x, y, y')` (or
/// `(x, x', y)`) that break functionality.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RigidityVerdict {
    pub status: RigidityStatus,
    pub counterexample: Option<(DataWord, Vec<usize>)>,
}

impl RigidityVerdict {
    pub fn holds(&self) -> bool {
        matches!(self.status, RigidityStatus::Rigid | RigidityStatus::SemiRigid)
    }
}

/// `∀x,y,y' (phi(x,y) ∧ phi(x,y') → y = y')`.
pub fn functionality_sentence(phi: &Formula, x: &str, y: &str) -> Formula {
    let y2 = fresh_name(y, &[phi.all_vars(), [x.to_string()].into()]);
    let body = Formula::implies(Formula::and(phi.clone(), phi.rename_free(y, &y2)), Formula::equal(y, &y2));
    Formula::forall(x, Formula::forall(y, Formula::forall(&y2, body)))
}

fn check_two_free(phi: &Formula, vars: &[&str]) -> Result<()> {
    let extra: Vec<Var> = phi.free_vars().into_iter().filter(|v| !vars.contains(&v.as_str())).collect();
    if extra.is_empty() {
        Ok(())
    } else {
        Err(Error::Grammar(format!("guard `{phi}` has free variables {extra:?} besides {vars:?}")))
    }
}

/// Is `y` determined by `x` under `phi`?  Returns a counterexample `(w, [x, y, y'])` if not.
fn functional(
    phi: &Formula,
    x: &str,
    y: &str,
    mode: RigidityMode,
    tags: &[Tag],
) -> Result<Option<(DataWord, Vec<usize>)>> {
    let search = |w: &DataWord| -> Result<Option<Vec<usize>>> {
        let n = w.len();
        for p in 1..=n {
            let mut hit = None;
            for q in 1..=n {
                let asg = Assignment::new().with_fo(x, p).with_fo(y, q);
                if evaluate(phi, w, &asg)? {
                    if let Some(q0) = hit {
                        return Ok(Some(vec![p, q0, q]));
                    }
                    hit = Some(q);
                }
            }
        }
        Ok(None)
    };
    match mode {
        RigidityMode::Bounded { max_len, max_value } => {
            for w in DataWord::enumerate_canonical(tags, max_value, max_len) {
                if let Some(pos) = search(&w)? {
                    return Ok(Some((w, pos)));
                }
            }
            Ok(None)
        }
        RigidityMode::Exact { budget } => {
            let neg = Formula::not(functionality_sentence(phi, x, y));
            let res = satisfiable_with(&neg, tags, budget)?;
            match res.witness {
                None => Ok(None),
                Some(w) => {
                    let pos = search(&w)?.ok_or_else(|| {
                        Error::InvalidAutomaton(format!("countermodel {w} does not break functionality"))
                    })?;
                    Ok(Some((w, pos)))
                }
            }
        }
    }
}

/// Checks that `y` is functionally determined by `x` (one half of rigidity).
pub fn check_functional(phi: &Formula, x: &str, y: &str, mode: RigidityMode, tags: &[Tag]) -> Result<RigidityVerdict> {
    check_two_free(phi, &[x, y])?;
    Ok(match functional(phi, x, y, mode, tags)? {
        None => RigidityVerdict { status: RigidityStatus::SemiRigid, counterexample: None },
        Some(c) => RigidityVerdict { status: RigidityStatus::NotSemiRigid, counterexample: Some(c) },
    })
}

/// Both directions: every `x` has at most one `y` and every `y` at most one `x`.
pub fn check_rigidity(phi: &Formula, x: &str, y: &str, mode: RigidityMode, tags: &[Tag]) -> Result<RigidityVerdict> {
    check_two_free(phi, &[x, y])?;
    if let Some(c) = functional(phi, x, y, mode, tags)? {
        return Ok(RigidityVerdict { status: RigidityStatus::NotRigid, counterexample: Some(c) });
    }
    if let Some((w, pos)) = functional(phi, y, x, mode, tags)? {
        // Reported as (x, x', y).
        let c = (w, vec![pos[1], pos[2], pos[0]]);
        return Ok(RigidityVerdict { status: RigidityStatus::NotRigid, counterexample: Some(c) });
    }
    Ok(RigidityVerdict { status: RigidityStatus::Rigid, counterexample: None })
}

/// `alpha(x,y)` and `beta(x,z)` each determine their second variable from `x`.
pub fn check_semi_rigidity(
    alpha: &Formula,
    beta: &Formula,
    x: &str,
    y: &str,
    z: &str,
    mode: RigidityMode,
    tags: &[Tag],
) -> Result<RigidityVerdict> {
    let a = check_functional(alpha, x, y, mode, tags)?;
    if !a.holds() {
        return Ok(a);
    }
    check_functional(beta, x, z, mode, tags)
}

/// `phi(x,y) ∧ ∀x',y' (phi(x',y') → (x = x' ↔ y = y'))`: rigid on every word,
/// and equivalent to `phi` when `phi` is rigid.
pub fn rigidify(phi: &Formula, x: &str, y: &str) -> Formula {
    let avoid = [phi.all_vars(), [x.to_string(), y.to_string()].into()];
    let x2 = fresh_name(x, &avoid);
    let y2 = fresh_name(y, &[avoid[0].clone(), avoid[1].clone(), [x2.clone()].into()]);
    let shifted = phi.rename_free(x, &x2).rename_free(y, &y2);
    let cond = Formula::implies(shifted, Formula::iff(Formula::equal(x, &x2), Formula::equal(y, &y2)));
    Formula::and(phi.clone(), Formula::forall(&x2, Formula::forall(&y2, cond)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Fragment {
    RigidGuarded,
    SemiRigidGuarded,
    Neither,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrammarVerdict {
    pub fragment: Fragment,
    /// Why the formula is outside both fragments.
    pub reason: Option<String>,
}

struct GrammarCheck<'a> {
    mode: RigidityMode,
    tags: &'a [Tag],
    cache: HashMap<(Formula, bool), bool>,
    semi: bool,
}

impl GrammarCheck<'_> {
    fn guard_ok(&mut self, guard: &Formula, x: &str, y: &str, both: bool) -> Result<bool> {
        let key = (canonical_guard(guard, x, y, None), both);
        if let Some(&v) = self.cache.get(&key) {
            return Ok(v);
        }
        let ok = if both {
            check_rigidity(guard, x, y, self.mode, self.tags)?.holds()
        } else {
            check_functional(guard, x, y, self.mode, self.tags)?.holds()
        };
        self.cache.insert(key, ok);
        Ok(ok)
    }

    /// Innermost-first; returns a reason on failure.
    fn walk(&mut self, f: &Formula) -> Result<Option<String>> {
        use Formula::*;
        match f {
            True | False | Less(..) | Equal(..) | Succ(..) | First(..) | Last(..) | Tag(..) | In(..) => Ok(None),
            Not(a) | ExistsFO(_, a) | ForallFO(_, a) | ExistsSO(_, a) | ForallSO(_, a) => self.walk(a),
            And(a, b) | Or(a, b) | Implies(a, b) | Iff(a, b) => {
                for (side, other) in [(a, b), (b, a)] {
                    if let Data(u, v, pol) = &**side {
                        return self.unguarded(u, v, *pol, Some(other));
                    }
                }
                if let Some(r) = self.walk(a)? {
                    return Ok(Some(r));
                }
                self.walk(b)
            }
            Data(u, v, pol) => self.unguarded(u, v, *pol, None),
            Rigid { guard, x, y, .. } => {
                if let Some(r) = self.walk(guard)? {
                    return Ok(Some(r));
                }
                if check_two_free(guard, &[x, y]).is_err() {
                    return Ok(Some(format!("guard `{guard}` has free variables other than {x}, {y}")));
                }
                if !self.guard_ok(guard, x, y, true)? {
                    return Ok(Some(format!("guard `{guard}` is not rigid")));
                }
                Ok(None)
            }
            SemiRigid { alpha, beta, x, y, z, .. } => {
                self.semi = true;
                for (g, second) in [(alpha, y), (beta, z)] {
                    if let Some(r) = self.walk(g)? {
                        return Ok(Some(r));
                    }
                    if check_two_free(g, &[x, second]).is_err() {
                        return Ok(Some(format!("guard `{g}` has free variables other than {x}, {second}")));
                    }
                    if !self.guard_ok(g, x, second, false)? {
                        return Ok(Some(format!("guard `{g}` is not semi-rigid")));
                    }
                }
                Ok(None)
            }
        }
    }

    fn unguarded(&mut self, u: &str, v: &str, pol: Polarity, context: Option<&Formula>) -> Result<Option<String>> {
        let test = format!("{u} {} {v}", pol.symbol());
        if let Some(g) = context {
            if check_two_free(g, &[u, v]).is_ok() && !g.has_data_tests() {
                let verdict = if self.guard_ok(g, u, v, true)? { "is rigid" } else { "is not rigid" };
                return Ok(Some(format!(
                    "data test `{test}` is not wrapped in a guard; the candidate guard `{g}` {verdict}"
                )));
            }
        }
        Ok(Some(format!("data test `{test}` is not wrapped in a guard")))
    }
}

/// Decides membership in the rigidly (or semi-rigidly) guarded fragment using
/// exact rigidity checks over the formula's own alphabet.
pub fn check_grammar(phi: &Formula) -> Result<GrammarVerdict> {
    check_grammar_with(phi, RigidityMode::default(), &phi.default_alphabet())
}

pub fn check_grammar_with(phi: &Formula, mode: RigidityMode, tags: &[Tag]) -> Result<GrammarVerdict> {
    let mut c = GrammarCheck { mode, tags, cache: HashMap::new(), semi: false };
    Ok(match c.walk(phi)? {
        Some(reason) => GrammarVerdict { fragment: Fragment::Neither, reason: Some(reason) },
        None if c.semi => GrammarVerdict { fragment: Fragment::SemiRigidGuarded, reason: None },
        None => GrammarVerdict { fragment: Fragment::RigidGuarded, reason: None },
    })
}

pub const X_VAR: &str = "x#";
pub const Y_VAR: &str = "y#";
pub const Z_VAR: &str = "z#";

/// Guard with its free variables renamed to `x#`, `y#` (and `z#`) and bound
/// variables numbered, so that equal guards compare equal.
fn canonical_guard(g: &Formula, x: &str, y: &str, z: Option<&str>) -> Formula {
    // Two steps through temporaries keep simultaneous renaming safe.
    let mut h = g.rename_free(x, "x#tmp").rename_free(y, "y#tmp");
    if let Some(z) = z {
        h = h.rename_free(z, "z#tmp");
    }
    h = h.rename_free("x#tmp", X_VAR).rename_free("y#tmp", Y_VAR).rename_free("z#tmp", Z_VAR);
    h.canonical_bound()
}

/// A guarded test replaced by the unary predicate `pred`: `x ∈ pred` holds
/// iff the data test succeeds for the unique partners of `x`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestDescriptor {
    pub pred: Var,
    /// Guard over `x#`, `y#` with inner tests already replaced.
    pub alpha: Formula,
    /// Second guard over `x#`, `z#`; `None` for rigid tests, where `z = x`.
    pub beta: Option<Formula>,
}

/// Replaces guarded tests innermost-first by predicates `C#1, C#2, ...`.
/// Tests whose guards agree up to renaming share a predicate.
pub fn normalize_tests(phi: &Formula) -> Result<(Formula, Vec<TestDescriptor>)> {
    let mut descs = Vec::new();
    let f = norm(phi, &mut descs)?;
    Ok((f, descs))
}

fn predicate(descs: &mut Vec<TestDescriptor>, alpha: Formula, beta: Option<Formula>) -> Var {
    if let Some(d) = descs.iter().find(|d| d.alpha == alpha && d.beta == beta) {
        return d.pred.clone();
    }
    let pred = format!("C#{}", descs.len() + 1);
    descs.push(TestDescriptor { pred: pred.clone(), alpha, beta });
    pred
}

fn marker(x: &str, pred: &str, pol: Polarity) -> Formula {
    let m = Formula::member(x, pred);
    match pol {
        Polarity::Eq => m,
        Polarity::Neq => Formula::not(m),
    }
}

fn norm(f: &Formula, descs: &mut Vec<TestDescriptor>) -> Result<Formula> {
    use Formula::*;
    Ok(match f {
        Not(a) => Formula::not(norm(a, descs)?),
        And(a, b) => Formula::and(norm(a, descs)?, norm(b, descs)?),
        Or(a, b) => Formula::or(norm(a, descs)?, norm(b, descs)?),
        Implies(a, b) => Formula::implies(norm(a, descs)?, norm(b, descs)?),
        Iff(a, b) => Formula::iff(norm(a, descs)?, norm(b, descs)?),
        ExistsFO(v, a) => ExistsFO(v.clone(), Box::new(norm(a, descs)?)),
        ForallFO(v, a) => ForallFO(v.clone(), Box::new(norm(a, descs)?)),
        ExistsSO(v, a) => ExistsSO(v.clone(), Box::new(norm(a, descs)?)),
        ForallSO(v, a) => ForallSO(v.clone(), Box::new(norm(a, descs)?)),
        Data(u, v, p) => {
            return Err(Error::Grammar(format!("data test `{u} {} {v}` is not wrapped in a guard", p.symbol())))
        }
        Rigid { guard, x, y, pol } => {
            check_two_free(guard, &[x, y])?;
            let g = norm(guard, descs)?;
            let pred = predicate(descs, canonical_guard(&g, x, y, None), None);
            Formula::and(g, marker(x, &pred, *pol))
        }
        SemiRigid { alpha, beta, x, y, z, pol } => {
            check_two_free(alpha, &[x, y])?;
            check_two_free(beta, &[x, z])?;
            let a = norm(alpha, descs)?;
            let b = norm(beta, descs)?;
            let ca = canonical_guard(&a, x, y, None);
            let cb = canonical_guard(&b, x, z, None).rename_free(Y_VAR, Z_VAR);
            let pred = predicate(descs, ca, Some(cb));
            Formula::all([a, b, marker(x, &pred, *pol)])
        }
        other => other.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse, rigidity, DAGGER, L_GEQ3, PHI_L2};

    fn f(s: &str) -> Formula {
        parse(s).unwrap()
    }

    fn a() -> Vec<Tag> {
        vec![Tag::new("a")]
    }

    const BOUNDED: RigidityMode = RigidityMode::Bounded { max_len: 5, max_value: 4 };

    #[test]
    fn successor_is_rigid() {
        for mode in [BOUNDED, RigidityMode::default()] {
            let v = check_rigidity(&f("succ(x,y)"), "x", "y", mode, &a()).unwrap();
            assert_eq!(v.status, RigidityStatus::Rigid);
        }
    }

    #[test]
    fn disequality_is_not_rigid_with_length_three_counterexample() {
        for mode in [BOUNDED, RigidityMode::default()] {
            let v = check_rigidity(&f("x != y"), "x", "y", mode, &a()).unwrap();
            assert_eq!(v.status, RigidityStatus::NotRigid);
            let (w, pos) = v.counterexample.unwrap();
            assert_eq!(w.len(), 3, "{w}");
            assert_eq!(pos.len(), 3);
        }
    }

    #[test]
    fn false_is_rigid() {
        let v = check_rigidity(&Formula::False, "x", "y", BOUNDED, &a()).unwrap();
        assert!(v.holds());
    }

    #[test]
    fn grammar_verdicts() {
        let d = check_grammar(&f(DAGGER)).unwrap();
        assert_eq!(d.fragment, Fragment::Neither);
        assert!(d.reason.unwrap().contains("not rigid"));
        assert_eq!(check_grammar(&f("E x. E y. rigid[succ(x,y)]{x !~ y}")).unwrap().fragment, Fragment::RigidGuarded);
        assert_eq!(check_grammar(&f("A x. E y. x < y | last(x)")).unwrap().fragment, Fragment::RigidGuarded);
        assert_eq!(check_grammar(&f("E x. E y. rigid[x < y]{x ~ y}")).unwrap().fragment, Fragment::Neither);
        let semi = f("E x. E y. E z. semirigid[succ(x,y); succ(z,x)](x,y,z){y ~ z}");
        assert_eq!(check_grammar(&semi).unwrap().fragment, Fragment::SemiRigidGuarded);
    }

    #[test]
    fn grammar_accepts_the_running_sentences() {
        assert_eq!(check_grammar(&f(PHI_L2)).unwrap().fragment, Fragment::RigidGuarded);
        let v = check_grammar_with(&f(L_GEQ3), BOUNDED, &a()).unwrap();
        assert_eq!(v.fragment, Fragment::RigidGuarded, "{:?}", v.reason);
    }

    #[test]
    fn rigidify_agrees_on_rigid_guards_and_repairs_others() {
        let tags = [Tag::new("a"), Tag::new("b")];
        for g in ["succ(x,y)", "first(x) & last(y)", "false", "x != y", "x < y & a(y)", "x = y"] {
            let phi = f(g);
            let r = rigidify(&phi, "x", "y");
            assert!(check_rigidity(&r, "x", "y", BOUNDED, &tags).unwrap().holds(), "{g}");
            let rigid = check_rigidity(&phi, "x", "y", BOUNDED, &tags).unwrap().holds();
            if rigid {
                for w in DataWord::enumerate_canonical(&tags, 2, 5) {
                    for p in 1..=w.len() {
                        for q in 1..=w.len() {
                            let asg = Assignment::new().with_fo("x", p).with_fo("y", q);
                            assert_eq!(evaluate(&phi, &w, &asg).unwrap(), evaluate(&r, &w, &asg).unwrap());
                        }
                    }
                }
            }
        }
        let r = rigidify(&f("x != y"), "x", "y");
        let w: DataWord = "a@1 a@2 a@3".parse().unwrap();
        for p in 1..=3 {
            for q in 1..=3 {
                let asg = Assignment::new().with_fo("x", p).with_fo("y", q);
                assert!(!evaluate(&r, &w, &asg).unwrap());
            }
        }
    }

    #[test]
    fn normalization_counts_and_orders_descriptors() {
        let (g, d) = normalize_tests(&f("E x. E y. rigid[succ(x,y)]{x !~ y}")).unwrap();
        assert_eq!(d.len(), 1);
        assert!(!g.has_data_tests());
        let plain = f("A x. E y. x < y");
        assert_eq!(normalize_tests(&plain).unwrap(), (plain, vec![]));
        let (_, d3) = normalize_tests(&f(L_GEQ3)).unwrap();
        assert_eq!(d3.len(), 2);
        // The successor guard is innermost and comes first.
        assert_eq!(d3[0].alpha, f("succ(x,y)").rename_free("x", rigidity::X_VAR).rename_free("y", rigidity::Y_VAR));
        assert!(d3[1].alpha.free_vars().contains(rigidity::Y_VAR));
        assert!(normalize_tests(&f(DAGGER)).is_err());
    }
}
