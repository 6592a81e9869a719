//! Syntactic congruence of a recognizer and the quotient presentation.
//!
//! Two elements are separated when some context `x · _ · y` sends exactly one
//! of them into the accepting set.  By equivariance it suffices to decide this
//! for minimal pairs, and contexts can be grown one letter image at a time, so
//! the separated pairs form a least fixpoint over a finite graph.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use super::builder::{materialize, PresentedMonoid};
use super::{LetterImage, Morphism, Recognizer};
use crate::error::{Error, Result};
use crate::nominal::DataValue;
use crate::presentation::{all_perms, minimal_pair, second_components, Perm, PresentationBuilder, Term};

/// Separated minimal pairs of a recognizer whose orbits are all reachable.
pub struct Congruence {
    base: Recognizer,
    index: HashMap<(Term, Term), usize>,
    separated: Vec<bool>,
}

impl Congruence {
    pub fn compute(base: Recognizer) -> Result<Congruence> {
        let p = base.presentation();
        let mut pairs: Vec<(Term, Term)> = Vec::new();
        let mut index = HashMap::new();
        for a in 0..p.orbits().len() {
            let s = p.orbit_rep(a);
            for b in 0..p.orbits().len() {
                for vals in second_components(p.arity(a), p.arity(b)) {
                    let u = p.normalize(&Term::new(b, vals));
                    if let Entry::Vacant(e) = index.entry((s.clone(), u.clone())) {
                        e.insert(pairs.len());
                        pairs.push((s.clone(), u));
                    }
                }
            }
        }
        let key = |x: &Term, y: &Term| -> usize {
            let (x1, y1, _) = minimal_pair(x, y);
            index[&(x1, p.normalize(&y1))]
        };
        let letters = base.morphism.letters();
        let mut preds: Vec<Vec<u32>> = vec![Vec::new(); pairs.len()];
        for (i, (s, t)) in pairs.iter().enumerate() {
            let n = s.max_value().max(t.max_value());
            for sym in &letters {
                for d in 1..=n + 1 {
                    let g = base.morphism.image(sym, d)?;
                    let right = key(&p.product(s, &g)?, &p.product(t, &g)?);
                    let left = key(&p.product(&g, s)?, &p.product(&g, t)?);
                    preds[right].push(i as u32);
                    preds[left].push(i as u32);
                }
            }
        }
        let mut separated: Vec<bool> =
            pairs.iter().map(|(s, t)| base.accepts_term(s) != base.accepts_term(t)).collect();
        let mut queue: VecDeque<usize> = (0..pairs.len()).filter(|&i| separated[i]).collect();
        while let Some(j) = queue.pop_front() {
            for &i in &preds[j] {
                if !separated[i as usize] {
                    separated[i as usize] = true;
                    queue.push_back(i as usize);
                }
            }
        }
        drop(pairs);
        Ok(Congruence { base, index, separated })
    }

    pub fn base(&self) -> &Recognizer {
        &self.base
    }

    pub fn equivalent(&self, s: &Term, t: &Term) -> bool {
        let p = self.base.presentation();
        let (s1, t1, _) = minimal_pair(&p.normalize(s), &p.normalize(t));
        !self.separated[self.index[&(s1, p.normalize(&t1))]]
    }

    /// Positions of `o(1..k)` whose value survives in the class.
    pub fn memorable_positions(&self, orbit: usize) -> Vec<usize> {
        let s = self.base.presentation().orbit_rep(orbit);
        let k = s.values.len() as DataValue;
        (0..s.values.len())
            .filter(|&i| {
                let mut t = s.clone();
                t.values[i] = k + 1;
                !self.equivalent(&s, &t)
            })
            .collect()
    }
}

/// Places `vals` at `positions` of a term of `orbit` and fresh values from `fresh` elsewhere.
fn fill(orbit: usize, arity: usize, positions: &[usize], vals: &[DataValue], fresh: &mut DataValue) -> Term {
    let mut out = vec![0; arity];
    for (&p, &v) in positions.iter().zip(vals) {
        out[p] = v;
    }
    for (i, slot) in out.iter_mut().enumerate() {
        if !positions.contains(&i) {
            *slot = *fresh;
            *fresh += 1;
        }
    }
    Term::new(orbit, out)
}

struct Class {
    reference: usize,
    positions: Vec<usize>,
    symmetries: Vec<Perm>,
}

/// The syntactic recognizer: the image submonoid divided by the syntactic congruence.
pub fn syntactic_quotient(r: &Recognizer, budget: usize) -> Result<Recognizer> {
    let base = materialize(&PresentedMonoid(r), budget)?.recognizer;
    let cong = Congruence::compute(base)?;
    let p = cong.base().presentation();

    let mut classes: Vec<Class> = Vec::new();
    // For every base orbit: its class and the base positions feeding each class position.
    let mut class_of: Vec<(usize, Vec<usize>)> = Vec::new();
    for a in 0..p.orbits().len() {
        let ka = p.arity(a);
        let mem = cong.memorable_positions(a);
        let m = mem.len();
        let s = p.orbit_rep(a);
        let mut found = None;
        'classes: for (c, class) in classes.iter().enumerate() {
            if class.positions.len() != m {
                continue;
            }
            for perm in all_perms(m) {
                let feed: Vec<usize> = perm.iter().map(|&j| mem[j]).collect();
                let vals: Vec<DataValue> = feed.iter().map(|&i| s.values[i]).collect();
                let mut fresh = ka as DataValue + 1;
                let t = fill(class.reference, p.arity(class.reference), &class.positions, &vals, &mut fresh);
                if cong.equivalent(&s, &t) {
                    found = Some((c, feed));
                    break 'classes;
                }
            }
        }
        let entry = match found {
            Some(x) => x,
            None => {
                let mut symmetries = Vec::new();
                let base_vals: Vec<DataValue> = mem.iter().map(|&i| s.values[i]).collect();
                for g in all_perms(m).into_iter().skip(1) {
                    let vals: Vec<DataValue> = g.iter().map(|&j| base_vals[j]).collect();
                    let mut fresh = ka as DataValue + 1;
                    let t = fill(a, ka, &mem, &vals, &mut fresh);
                    if cong.equivalent(&s, &t) {
                        symmetries.push(g);
                    }
                }
                classes.push(Class { reference: a, positions: mem.clone(), symmetries });
                (classes.len() - 1, mem)
            }
        };
        class_of.push(entry);
    }

    let id_class = class_of[p.identity_orbit()].0;
    // Class indices are renumbered so that the identity comes first.
    let mut order: Vec<usize> = vec![id_class];
    order.extend((0..classes.len()).filter(|&c| c != id_class));
    let rank: BTreeMap<usize, usize> = order.iter().enumerate().map(|(i, &c)| (c, i)).collect();

    let mut b = PresentationBuilder::new("quotient");
    for (i, &c) in order.iter().enumerate() {
        b.orbit(&format!("u{i}"), classes[c].positions.len())?;
        for g in &classes[c].symmetries {
            b.symmetry(i, g.clone())?;
        }
    }
    b.set_identity(0)?;
    let max_arity = classes.iter().map(|c| c.positions.len()).max().unwrap_or(0);
    b.set_support((2 * max_arity).max(1) as DataValue);
    let skeleton = {
        let mut s = PresentationBuilder::new("quotient");
        for (i, &c) in order.iter().enumerate() {
            s.orbit(&format!("u{i}"), classes[c].positions.len())?;
            for g in &classes[c].symmetries {
                s.symmetry(i, g.clone())?;
            }
        }
        s.set_identity(0)?;
        s.set_support((2 * max_arity).max(1) as DataValue);
        s.build()?
    };

    let encode = |t: &Term| -> Term {
        let (c, feed) = &class_of[t.orbit];
        skeleton.normalize(&Term::new(rank[c], feed.iter().map(|&i| t.values[i]).collect()))
    };
    let decode = |q: &Term, fresh: &mut DataValue| -> Term {
        let class = &classes[order[q.orbit]];
        p.normalize(&fill(class.reference, p.arity(class.reference), &class.positions, &q.values, fresh))
    };

    for (qa, &ca) in order.iter().enumerate().skip(1) {
        let ka = classes[ca].positions.len();
        let s = skeleton.orbit_rep(qa);
        for (qb, &cb) in order.iter().enumerate().skip(1) {
            let mut seen = BTreeSet::new();
            for vals in second_components(ka, classes[cb].positions.len()) {
                let u = skeleton.normalize(&Term::new(qb, vals));
                if !seen.insert(u.clone()) {
                    continue;
                }
                let mut fresh = s.max_value().max(u.max_value()) + 1;
                let x = decode(&s, &mut fresh);
                let y = decode(&u, &mut fresh);
                let res = encode(&p.product(&x, &y)?);
                if res.max_value() > s.max_value().max(u.max_value()) {
                    return Err(Error::InvalidPresentation("quotient product depends on forgotten values".into()));
                }
                b.entry(s.clone(), u, res);
            }
        }
    }
    let target = b.build()?;

    let base_m = &cong.base().morphism;
    let mut images = BTreeMap::new();
    for (sym, img) in &base_m.images {
        let t = encode(&img.instantiate(1));
        images.insert(sym.clone(), LetterImage { orbit: t.orbit, uses_value: !t.values.is_empty() });
    }
    let accepting =
        (0..order.len()).filter(|&q| cong.base().accepting.contains(&classes[order[q]].reference)).collect();
    Ok(Recognizer { morphism: Morphism { target, tracks: base_m.tracks, images }, accepting })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::morphism::{member, DEFAULT_ORBIT_BUDGET};
    use crate::nominal::{DataWord, Tag};
    use crate::presentation::validate;

    fn agree(a: &Recognizer, b: &Recognizer, max_len: usize) {
        for w in DataWord::enumerate_up_to(&a.morphism.tags(), 4, max_len) {
            assert_eq!(member(a, &w).unwrap(), member(b, &w).unwrap(), "{w}");
        }
    }

    #[test]
    fn syntactic_fixtures_are_already_minimal() {
        for (r, n) in [(fixtures::l1_recognizer(), 4), (fixtures::l2_recognizer(), 3), (fixtures::z2_recognizer(), 2)] {
            let q = syntactic_quotient(&r, DEFAULT_ORBIT_BUDGET).unwrap();
            assert_eq!(q.orbit_count(), n);
            assert!(validate(q.presentation()).is_valid());
            agree(&q, &r, 5);
        }
    }

    #[test]
    fn collapsing_accepting_set_merges_everything() {
        let mut r = fixtures::l1_recognizer();
        r.accepting.clear();
        let q = syntactic_quotient(&r, DEFAULT_ORBIT_BUDGET).unwrap();
        assert_eq!(q.orbit_count(), 1);
    }

    #[test]
    fn forgetting_values_lowers_arity() {
        // Accept nonempty words: the first/last pair is not needed.
        let mut r = fixtures::l2_recognizer();
        let p = r.presentation().clone();
        r.accepting = [p.orbit_id("eq").unwrap(), p.orbit_id("pair").unwrap()].into();
        let q = syntactic_quotient(&r, DEFAULT_ORBIT_BUDGET).unwrap();
        assert_eq!(q.orbit_count(), 2);
        assert_eq!(q.presentation().max_arity(), 0);
        agree(&q, &r, 4);
    }

    #[test]
    fn xy_quotient_keeps_language() {
        let r = fixtures::xy_recognizer();
        let q = syntactic_quotient(&r, DEFAULT_ORBIT_BUDGET).unwrap();
        let tags = [Tag::new("a")];
        for w in DataWord::enumerate_up_to(&tags, 3, 3) {
            for aw in crate::morphism::AnnotatedWord::annotations(&w, 2, &[false, false]) {
                assert_eq!(q.member_annotated(&aw).unwrap(), r.member_annotated(&aw).unwrap());
            }
        }
    }

    /// Brute-force oracle for separation on short contexts.
    #[test]
    fn congruence_matches_bounded_contexts() {
        let r = fixtures::l1_recognizer();
        let base = materialize(&PresentedMonoid(&r), 100).unwrap().recognizer;
        let p = base.presentation().clone();
        let cong = Congruence::compute(base.clone()).unwrap();
        let tags = [Tag::new("a")];
        let ctx = DataWord::enumerate_up_to(&tags, 5, 2);
        let elems = p.enumerate_restriction(&[1, 2]);
        for s in &elems {
            for t in &elems {
                let mut sep = false;
                for x in &ctx {
                    for y in &ctx {
                        let hx = crate::morphism::evaluate(&base.morphism, x).unwrap();
                        let hy = crate::morphism::evaluate(&base.morphism, y).unwrap();
                        let a = p.product(&p.product(&hx, s).unwrap(), &hy).unwrap();
                        let b = p.product(&p.product(&hx, t).unwrap(), &hy).unwrap();
                        sep |= base.accepts_term(&a) != base.accepts_term(&b);
                    }
                }
                assert_eq!(!cong.equivalent(s, t), sep, "{} {}", p.show(s), p.show(t));
            }
        }
    }
}
