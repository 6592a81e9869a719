//! Property tests for the invariants that hold across modules: group and
//! action laws, presentation axioms, equivariance of evaluation, agreement of
//! the evaluator with a naive reference, and the decision procedures against
//! direct evaluation.

use std::collections::{BTreeSet, HashMap};

use proptest::prelude::*;

use dml_core::analysis::{default_values, green, memory};
use dml_core::compile::{compile_with, CompileOptions};
use dml_core::fixtures;
use dml_core::fma::{self, from_morphism};
use dml_core::logic::{evaluate, is_set_var, parse, Assignment, Formula};
use dml_core::morphism::{self, member, syntactic_quotient, AnnotatedWord, Recognizer, DEFAULT_ORBIT_BUDGET};
use dml_core::msoclassic::satisfiable;
use dml_core::nominal::{act_word, canonical_word, compose, invert, DataValue, DataWord, Letter, Renaming};
use dml_core::presentation::{minimal_pair, Presentation, Term};

fn renaming(max: DataValue) -> impl Strategy<Value = Renaming> {
    Just((1..=max).collect::<Vec<_>>()).prop_shuffle().prop_map(move |img| {
        let pairs: Vec<_> = (1..=max).zip(img).collect();
        Renaming::from_pairs(&pairs).expect("a permutation")
    })
}

fn word(tags: &'static [&'static str], max_value: DataValue, max_len: usize) -> impl Strategy<Value = DataWord> {
    prop::collection::vec((0..tags.len(), 1..=max_value), 0..=max_len)
        .prop_map(move |ls| DataWord(ls.into_iter().map(|(t, d)| Letter::new(tags[t], d)).collect()))
}

fn presentations() -> Vec<Presentation> {
    vec![fixtures::l1(), fixtures::l2(), fixtures::xy(), fixtures::z2()]
}

fn recognizers() -> Vec<Recognizer> {
    vec![fixtures::l1_recognizer(), fixtures::l2_recognizer(), fixtures::z2_recognizer()]
}

/// A fixture and three of its terms over the support.
fn fixture_terms() -> impl Strategy<Value = (usize, Term, Term, Term)> {
    (0..4usize).prop_flat_map(|i| {
        let p = &presentations()[i];
        let elems = p.enumerate_restriction(&(1..=p.support()).collect::<Vec<_>>());
        let pick = prop::sample::select(elems);
        (Just(i), pick.clone(), pick.clone(), pick)
    })
}

/// Naive semantics over explicit environments, written independently of the
/// library's evaluator.
fn reference(
    phi: &Formula,
    w: &DataWord,
    pos: &HashMap<String, usize>,
    sets: &HashMap<String, BTreeSet<usize>>,
) -> bool {
    let n = w.len();
    let p = |v: &String| pos[v];
    let val = |i: usize| w.letters()[i - 1].value;
    let rec = |f: &Formula| reference(f, w, pos, sets);
    match phi {
        Formula::True => true,
        Formula::False => false,
        Formula::Less(x, y) => p(x) < p(y),
        Formula::Equal(x, y) => p(x) == p(y),
        Formula::Succ(x, y) => p(x) + 1 == p(y),
        Formula::First(x) => p(x) == 1,
        Formula::Last(x) => p(x) == n,
        Formula::Tag(t, x) => w.letters()[p(x) - 1].tag == *t,
        Formula::In(x, s) => sets[s].contains(&p(x)),
        Formula::Not(a) => !rec(a),
        Formula::And(a, b) => rec(a) && rec(b),
        Formula::Or(a, b) => rec(a) || rec(b),
        Formula::Implies(a, b) => !rec(a) || rec(b),
        Formula::Iff(a, b) => rec(a) == rec(b),
        Formula::ExistsFO(v, a) | Formula::ForallFO(v, a) => {
            let mut hits = (1..=n).map(|i| {
                let mut pos = pos.clone();
                pos.insert(v.clone(), i);
                reference(a, w, &pos, sets)
            });
            if matches!(phi, Formula::ExistsFO(..)) {
                hits.any(|b| b)
            } else {
                hits.all(|b| b)
            }
        }
        Formula::ExistsSO(v, a) | Formula::ForallSO(v, a) => {
            let subsets: Vec<BTreeSet<usize>> =
                (0..1u32 << n).map(|m| (1..=n).filter(|i| m >> (i - 1) & 1 == 1).collect()).collect();
            let mut hits = subsets.into_iter().map(|s| {
                let mut sets = sets.clone();
                sets.insert(v.clone(), s);
                reference(a, w, pos, &sets)
            });
            if matches!(phi, Formula::ExistsSO(..)) {
                hits.any(|b| b)
            } else {
                hits.all(|b| b)
            }
        }
        Formula::Data(x, y, pol) => pol.holds(val(p(x)) == val(p(y))),
        Formula::Rigid { guard, x, y, pol } => rec(guard) && pol.holds(val(p(x)) == val(p(y))),
        Formula::SemiRigid { alpha, beta, x: _, y, z, pol } => {
            rec(alpha) && rec(beta) && pol.holds(val(p(y)) == val(p(z)))
        }
    }
}

const LEAVES: &[&str] = &[
    "a(x)",
    "b(y)",
    "x < y",
    "succ(x,y)",
    "x = y",
    "first(x)",
    "last(y)",
    "true",
    "rigid[succ(x,y)](x,y){x ~ y}",
    "rigid[succ(x,y)](x,y){x !~ y}",
    "rigid[first(x) & last(y)](x,y){x ~ y}",
    "rigid[succ(y,x)](x,y){x !~ y}",
];

const SET_LEAVES: &[&str] = &["x in X", "y in X"];

/// A Boolean combination of leaves with free `x`, `y` and, when `sets`, `X`.
fn body(sets: bool) -> impl Strategy<Value = String> {
    let mut leaves: Vec<&'static str> = LEAVES.to_vec();
    if sets {
        leaves.extend(SET_LEAVES);
    }
    let leaf = prop::sample::select(leaves).prop_map(|s| format!("({s})"));
    leaf.prop_recursive(3, 8, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| format!("!{a}")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} & {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} | {b})")),
            (inner.clone(), inner).prop_map(|(a, b)| format!("({a} -> {b})")),
        ]
    })
}

/// Rigidly guarded sentences: [`body`] under a quantifier prefix.
fn sentence(sets: bool) -> impl Strategy<Value = String> {
    (body(sets), any::<[bool; 3]>()).prop_map(move |(b, q)| {
        let quant = |e: bool, v: &str| format!("{} {v}. ", if e { "E" } else { "A" });
        let inner = format!("{}{}{b}", quant(q[0], "x"), quant(q[1], "y"));
        if sets {
            format!("{}{inner}", quant(q[2], "X"))
        } else {
            inner
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn renamings_form_a_group(t1 in renaming(6), t2 in renaming(6), t3 in renaming(6)) {
        prop_assert_eq!(compose(&compose(&t1, &t2), &t3), compose(&t1, &compose(&t2, &t3)));
        prop_assert_eq!(compose(&t1, &Renaming::identity()), t1.clone());
        prop_assert_eq!(compose(&Renaming::identity(), &t1), t1.clone());
        prop_assert!(compose(&t1, &invert(&t1)).is_identity());
        prop_assert!(compose(&invert(&t1), &t1).is_identity());
    }

    #[test]
    fn renamings_act_on_words(t1 in renaming(6), t2 in renaming(6), w in word(&["a", "b"], 6, 6)) {
        prop_assert_eq!(act_word(&compose(&t1, &t2), &w), act_word(&t1, &act_word(&t2, &w)));
        prop_assert_eq!(act_word(&Renaming::identity(), &w), w.clone());
        let (c, _) = canonical_word(&w);
        prop_assert_eq!(canonical_word(&c).0, c.clone());
        prop_assert_eq!(canonical_word(&act_word(&t1, &w)).0, c);
    }

    #[test]
    fn fixture_products_are_associative_and_equivariant((i, s, u, v) in fixture_terms(), t in renaming(4)) {
        let p = &presentations()[i];
        let left = p.product(&p.product(&s, &u).unwrap(), &v).unwrap();
        let right = p.product(&s, &p.product(&u, &v).unwrap()).unwrap();
        prop_assert_eq!(left, right);
        // Renamings over the support keep every product inside it.
        if p.support() >= 4 {
            let su = p.product(&s, &u).unwrap();
            prop_assert_eq!(p.act(&t, &su), p.product(&p.act(&t, &s), &p.act(&t, &u)).unwrap());
        }
    }

    #[test]
    fn minimal_pairs_are_canonical((_i, s, u, _v) in fixture_terms()) {
        let (s2, u2, sigma) = minimal_pair(&s, &u);
        prop_assert_eq!(s.act(&sigma), s2.clone());
        prop_assert_eq!(u.act(&sigma), u2);
        prop_assert_eq!(s2.values, (1..=s.values.len() as DataValue).collect::<Vec<_>>());
        prop_assert_eq!(minimal_pair(&s, &u).2, sigma);
    }

    #[test]
    fn memory_size_is_orbit_invariant((i, s, _u, _v) in fixture_terms(), t in renaming(4)) {
        let p = &presentations()[i];
        prop_assume!(p.support() >= 4);
        prop_assert_eq!(memory(p, &s).unwrap().len(), memory(p, &p.act(&t, &s)).unwrap().len());
    }

    #[test]
    fn morphism_evaluation_is_equivariant(i in 0..3usize, w in word(&["a"], 4, 6), t in renaming(4)) {
        let r = &recognizers()[i];
        let p = r.presentation();
        let h = &r.morphism;
        let tw = act_word(&t, &w);
        prop_assert_eq!(morphism::evaluate(h, &tw).unwrap(), p.act(&t, &morphism::evaluate(h, &w).unwrap()));
        prop_assert_eq!(member(r, &w).unwrap(), member(r, &tw).unwrap());
    }

    #[test]
    fn quotients_and_automata_keep_the_language(i in 0..3usize, w in word(&["a"], 4, 5)) {
        let r = &recognizers()[i];
        let q = syntactic_quotient(r, DEFAULT_ORBIT_BUDGET).unwrap();
        let a = from_morphism(r).unwrap();
        let m = member(r, &w).unwrap();
        prop_assert_eq!(member(&q, &w).unwrap(), m);
        prop_assert_eq!(a.accepts(&w), m);
        prop_assert!(a.run(&w, 4).run_count <= 1);
    }

    #[test]
    fn fma_acceptance_is_equivariant(w in word(&["a"], 4, 7), t in renaming(6)) {
        for a in [fma::l_arc(), fma::l_arc_star(), fma::l_arc_guess()] {
            prop_assert_eq!(a.accepts(&w), a.accepts(&act_word(&t, &w)));
        }
        for a in [fma::l_arc(), fma::l_arc_star()] {
            prop_assert!(a.run(&w, 4).run_count <= 1);
        }
        prop_assert_eq!(fma::l_arc().accepts(&w), fma::l_arc_oracle(&w));
        prop_assert_eq!(fma::l_arc_star().accepts(&w), fma::l_arc_star_oracle(&w));
    }

    #[test]
    fn evaluation_matches_the_reference(src in body(true), w in word(&["a", "b"], 3, 4), t in renaming(3)) {
        let phi = parse(&src).unwrap();
        let n = w.len();
        for x in 1..=n {
            for y in 1..=n {
                for m in 0..1u32 << n {
                    let set: BTreeSet<usize> = (1..=n).filter(|i| m >> (i - 1) & 1 == 1).collect();
                    let asg = Assignment::new().with_fo("x", x).with_fo("y", y).with_so("X", set.clone());
                    let pos = HashMap::from([("x".to_string(), x), ("y".to_string(), y)]);
                    let sets = HashMap::from([("X".to_string(), set)]);
                    let v = evaluate(&phi, &w, &asg).unwrap();
                    prop_assert_eq!(v, reference(&phi, &w, &pos, &sets), "{} on {} with {:?}", src, w, asg);
                    prop_assert_eq!(v, evaluate(&phi, &act_word(&t, &w), &asg).unwrap());
                }
            }
        }
    }

    #[test]
    fn sentence_evaluation_matches_the_reference(src in sentence(true), w in word(&["a", "b"], 3, 5)) {
        let phi = parse(&src).unwrap();
        let v = evaluate(&phi, &w, &Assignment::new()).unwrap();
        prop_assert_eq!(v, reference(&phi, &w, &HashMap::new(), &HashMap::new()), "{}", src);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn left_multiplication_preserves_r((i, s, t, u) in fixture_terms()) {
        let p = &presentations()[i];
        let g = green(p, &default_values(p)).unwrap();
        let (Some(si), Some(ti)) = (g.index_of(&s), g.index_of(&t)) else { return Ok(()) };
        prop_assume!(g.r_equiv(si, ti));
        let us = g.index_of(&p.product(&u, &s).unwrap()).unwrap();
        let ut = g.index_of(&p.product(&u, &t).unwrap()).unwrap();
        prop_assert!(g.r_equiv(us, ut));
    }

    #[test]
    fn satisfiability_agrees_with_evaluation(src in sentence(true)) {
        let phi = parse(&src).unwrap();
        let res = satisfiable(&phi).unwrap();
        if let Some(w) = &res.witness {
            prop_assert!(evaluate(&phi, w, &Assignment::new()).unwrap(), "{} on {}", src, w);
        }
        let tags = phi.default_alphabet();
        let model = DataWord::enumerate_canonical(&tags, 4, 4)
            .into_iter()
            .find(|w| evaluate(&phi, w, &Assignment::new()).unwrap());
        if let Some(w) = model {
            prop_assert!(res.satisfiable, "{} holds on {}", src, w);
        }
        prop_assert_eq!(res.satisfiable, res.witness.is_some());
    }

    #[test]
    fn compiled_sentences_agree_with_evaluation(src in sentence(false)) {
        let phi = parse(&src).unwrap();
        let opts = CompileOptions { projectability_bound: None, ..CompileOptions::default() };
        let (c, _) = compile_with(&phi, &opts).unwrap();
        for w in DataWord::enumerate_canonical(&c.tags(), 3, 4) {
            let want = evaluate(&phi, &w, &Assignment::new()).unwrap();
            prop_assert_eq!(c.member(&w, &Assignment::new()).unwrap(), want, "{} on {}", src, w);
        }
        // First-order sentences define aperiodic languages.
        let q = syntactic_quotient(&c.recognizer, DEFAULT_ORBIT_BUDGET).unwrap();
        prop_assert!(dml_core::analysis::is_aperiodic(q.presentation()).unwrap(), "{}", src);
    }

    #[test]
    fn compiled_formulas_agree_with_evaluation(src in body(true)) {
        let phi = parse(&src).unwrap();
        let opts = CompileOptions { projectability_bound: None, ..CompileOptions::default() };
        let (c, _) = compile_with(&phi, &opts).unwrap();
        let singletons = c.singleton_tracks();
        for w in DataWord::enumerate_canonical(&c.tags(), 3, 3) {
            for aw in AnnotatedWord::annotations(&w, c.free_vars.len(), &singletons) {
                let mut asg = Assignment::new();
                for (v, set) in c.free_vars.iter().zip(&aw.predicates) {
                    if is_set_var(v) {
                        asg.so.insert(v.clone(), set.clone());
                    } else {
                        asg.fo.insert(v.clone(), *set.iter().next().expect("singleton track"));
                    }
                }
                let want = evaluate(&phi, &w, &asg).unwrap();
                prop_assert_eq!(c.recognizer.member_annotated(&aw).unwrap(), want, "{} on {} with {:?}", src, w, asg);
            }
        }
    }
}
