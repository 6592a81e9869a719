//! Turns any equivariant monoid with computable products into a presented
//! recognizer, keeping only the orbits reachable from the letter images.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Debug;
use std::hash::Hash;

use super::{LetterImage, Morphism, Recognizer, Sym};
use crate::error::{Error, Result};
use crate::nominal::{DataValue, Renaming};
use crate::presentation::{all_perms, second_components, Perm, PresentationBuilder, Term};

/// Orbits allowed in a materialized presentation unless the caller says otherwise.
pub const DEFAULT_ORBIT_BUDGET: usize = 20_000;

/// Largest memory size for which the brute-force canonical form is tried.
const MAX_CANONICAL_ARITY: usize = 8;

/// An orbit-finite monoid given by its elements, with a letter morphism and an
/// accepting set.  Elements are compared structurally, so `act` must return
/// normal forms.
pub trait ConcreteMonoid {
    type E: Clone + Ord + Hash + Debug;

    fn identity(&self) -> Self::E;
    fn product(&self, a: &Self::E, b: &Self::E) -> Result<Self::E>;
    fn act(&self, r: &Renaming, a: &Self::E) -> Self::E;
    /// Least support, sorted.
    fn memory(&self, a: &Self::E) -> Vec<DataValue>;
    fn letters(&self) -> Vec<Sym>;
    fn tracks(&self) -> usize;
    fn image(&self, sym: &Sym, d: DataValue) -> Result<Self::E>;
    fn accepting(&self, a: &Self::E) -> bool;

    /// Orbit representative with memory `{1..k}` and a renaming taking `a` to it.
    fn canonical(&self, a: &Self::E) -> Result<(Self::E, Renaming)> {
        let mem = self.memory(a);
        if mem.len() > MAX_CANONICAL_ARITY {
            return Err(Error::Unsupported(format!("element with {} memorable values", mem.len())));
        }
        let mut best: Option<(Self::E, Renaming)> = None;
        for perm in all_perms(mem.len()) {
            let pairs: Vec<_> = mem.iter().zip(&perm).map(|(&d, &i)| (d, i as DataValue + 1)).collect();
            let pi = Renaming::extend_injection(&pairs);
            let img = self.act(&pi, a);
            if best.as_ref().is_none_or(|(b, _)| img < *b) {
                best = Some((img, pi));
            }
        }
        Ok(best.expect("at least one permutation"))
    }
}

/// Result of [`materialize`]: the recognizer and the element behind each orbit.
#[derive(Clone, Debug)]
pub struct Built<E> {
    pub recognizer: Recognizer,
    pub reps: Vec<E>,
}

struct Encoder<'a, M: ConcreteMonoid> {
    m: &'a M,
    reps: Vec<M::E>,
    index: HashMap<M::E, usize>,
}

impl<M: ConcreteMonoid> Encoder<'_, M> {
    fn encode_raw(&self, e: &M::E) -> Result<Term> {
        let (rep, pi) = self.m.canonical(e)?;
        let orbit = *self
            .index
            .get(&rep)
            .ok_or_else(|| Error::InvalidPresentation(format!("product leaves the reachable orbits: {rep:?}")))?;
        let k = self.m.memory(&rep).len() as DataValue;
        let inv = pi.invert();
        Ok(Term::new(orbit, (1..=k).map(|i| inv.apply(i)).collect()))
    }

    fn decode(&self, t: &Term) -> M::E {
        let pairs: Vec<_> = t.values.iter().enumerate().map(|(i, &v)| (i as DataValue + 1, v)).collect();
        self.m.act(&Renaming::extend_injection(&pairs), &self.reps[t.orbit])
    }
}

/// Explores the orbits reachable by right multiplication with letter images and
/// builds the presentation of the generated submonoid.
pub fn materialize<M: ConcreteMonoid>(m: &M, budget: usize) -> Result<Built<M::E>> {
    let letters = m.letters();
    let (id_rep, _) = m.canonical(&m.identity())?;
    let mut enc = Encoder { m, reps: vec![id_rep.clone()], index: HashMap::from([(id_rep, 0)]) };
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let s = enc.reps[i].clone();
        let k = m.memory(&s).len() as DataValue;
        for sym in &letters {
            for d in 1..=k + 1 {
                let t = m.product(&s, &m.image(sym, d)?)?;
                let (rep, _) = m.canonical(&t)?;
                if !enc.index.contains_key(&rep) {
                    if enc.reps.len() >= budget {
                        return Err(Error::StateBudget(budget));
                    }
                    enc.index.insert(rep.clone(), enc.reps.len());
                    queue.push_back(enc.reps.len());
                    enc.reps.push(rep);
                }
            }
        }
    }

    let arities: Vec<usize> = enc.reps.iter().map(|r| m.memory(r).len()).collect();
    let mut symmetries: Vec<Vec<Perm>> = Vec::with_capacity(arities.len());
    for (i, &k) in arities.iter().enumerate() {
        let mut gens = Vec::new();
        if k >= 2 {
            for g in all_perms(k).into_iter().skip(1) {
                let pairs: Vec<_> =
                    g.iter().enumerate().map(|(p, &q)| (p as DataValue + 1, q as DataValue + 1)).collect();
                if m.act(&Renaming::extend_injection(&pairs), &enc.reps[i]) == enc.reps[i] {
                    gens.push(g);
                }
            }
        }
        symmetries.push(gens);
    }
    let max_arity = arities.iter().copied().max().unwrap_or(0);
    let skeleton_builder = || -> Result<PresentationBuilder> {
        let mut b = PresentationBuilder::new("materialized");
        for (i, &k) in arities.iter().enumerate() {
            b.orbit(&format!("u{i}"), k)?;
            for g in &symmetries[i] {
                b.symmetry(i, g.clone())?;
            }
        }
        b.set_identity(0)?;
        b.set_support((2 * max_arity).max(1) as DataValue);
        Ok(b)
    };
    // The skeleton has no products; it only normalizes second components.
    let skeleton = skeleton_builder()?.build()?;
    let mut b = skeleton_builder()?;
    for a in 1..arities.len() {
        let s = skeleton.orbit_rep(a);
        let se = enc.reps[a].clone();
        for (bo, &kb) in arities.iter().enumerate().skip(1) {
            let mut seen = BTreeSet::new();
            for vals in second_components(arities[a], kb) {
                let u = skeleton.normalize(&Term::new(bo, vals));
                if !seen.insert(u.clone()) {
                    continue;
                }
                let r = enc.encode_raw(&m.product(&se, &enc.decode(&u))?)?;
                b.entry(s.clone(), u, skeleton.normalize(&r));
            }
        }
    }
    let target = b.build()?;

    let mut images = BTreeMap::new();
    for sym in &letters {
        let t = target.normalize(&enc.encode_raw(&m.image(sym, 1)?)?);
        let uses_value = match t.values.as_slice() {
            [] => false,
            [1] => true,
            _ => return Err(Error::InvalidPresentation(format!("letter image {t:?} remembers foreign values"))),
        };
        images.insert(sym.clone(), LetterImage { orbit: t.orbit, uses_value });
    }
    let accepting = (0..enc.reps.len()).filter(|&i| m.accepting(&enc.reps[i])).collect();
    let morphism = Morphism { target, tracks: m.tracks(), images };
    Ok(Built { recognizer: Recognizer { morphism, accepting }, reps: enc.reps })
}

/// A recognizer seen as a concrete monoid over its own terms.  Term values are
/// taken as memory, which holds for reduced presentations.
pub struct PresentedMonoid<'a>(pub &'a Recognizer);

impl ConcreteMonoid for PresentedMonoid<'_> {
    type E = Term;

    fn identity(&self) -> Term {
        self.0.presentation().identity()
    }

    fn product(&self, a: &Term, b: &Term) -> Result<Term> {
        self.0.presentation().product(a, b)
    }

    fn act(&self, r: &Renaming, a: &Term) -> Term {
        self.0.presentation().act(r, a)
    }

    fn memory(&self, a: &Term) -> Vec<DataValue> {
        let mut v = a.values.clone();
        v.sort_unstable();
        v
    }

    fn letters(&self) -> Vec<Sym> {
        self.0.morphism.letters()
    }

    fn tracks(&self) -> usize {
        self.0.morphism.tracks
    }

    fn image(&self, sym: &Sym, d: DataValue) -> Result<Term> {
        self.0.morphism.image(sym, d)
    }

    fn accepting(&self, a: &Term) -> bool {
        self.0.accepts_term(a)
    }

    fn canonical(&self, a: &Term) -> Result<(Term, Renaming)> {
        let pairs: Vec<_> = a.values.iter().enumerate().map(|(i, &v)| (v, i as DataValue + 1)).collect();
        Ok((self.0.presentation().orbit_rep(a.orbit), Renaming::extend_injection(&pairs)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::morphism::{member, reachable_orbits};
    use crate::nominal::{DataWord, Tag};
    use crate::presentation::validate;

    /// Words as elements: the monoid of all data words up to canonical form is
    /// infinite, so this one keeps the first and last values only.
    struct FirstLast;

    #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
    enum Fl {
        Empty,
        Nonempty(DataValue, DataValue),
    }

    impl ConcreteMonoid for FirstLast {
        type E = Fl;
        fn identity(&self) -> Fl {
            Fl::Empty
        }
        fn product(&self, a: &Fl, b: &Fl) -> Result<Fl> {
            Ok(match (a, b) {
                (Fl::Empty, x) | (x, Fl::Empty) => x.clone(),
                (Fl::Nonempty(f, _), Fl::Nonempty(_, l)) => Fl::Nonempty(*f, *l),
            })
        }
        fn act(&self, r: &Renaming, a: &Fl) -> Fl {
            match a {
                Fl::Empty => Fl::Empty,
                Fl::Nonempty(f, l) => Fl::Nonempty(r.apply(*f), r.apply(*l)),
            }
        }
        fn memory(&self, a: &Fl) -> Vec<DataValue> {
            match a {
                Fl::Empty => vec![],
                Fl::Nonempty(f, l) => {
                    let s: BTreeSet<_> = [*f, *l].into();
                    s.into_iter().collect()
                }
            }
        }
        fn letters(&self) -> Vec<Sym> {
            vec![Sym::plain(Tag::new("a"))]
        }
        fn tracks(&self) -> usize {
            0
        }
        fn image(&self, _: &Sym, d: DataValue) -> Result<Fl> {
            Ok(Fl::Nonempty(d, d))
        }
        fn accepting(&self, a: &Fl) -> bool {
            matches!(a, Fl::Nonempty(f, l) if f == l)
        }
    }

    #[test]
    fn first_last_materializes_like_l2() {
        let built = materialize(&FirstLast, 100).unwrap();
        let r = &built.recognizer;
        assert_eq!(r.orbit_count(), 3);
        assert!(validate(r.presentation()).is_valid());
        let l2 = fixtures::l2_recognizer();
        for w in DataWord::enumerate_up_to(&[Tag::new("a")], 4, 5) {
            assert_eq!(member(r, &w).unwrap(), member(&l2, &w).unwrap(), "{w}");
        }
    }

    #[test]
    fn presented_round_trip_preserves_language() {
        for r in [fixtures::l1_recognizer(), fixtures::l2_recognizer(), fixtures::z2_recognizer()] {
            let built = materialize(&PresentedMonoid(&r), 100).unwrap();
            let r2 = &built.recognizer;
            assert_eq!(r2.orbit_count(), reachable_orbits(&r.morphism).unwrap().len());
            for w in DataWord::enumerate_up_to(&r.morphism.tags(), 4, 5) {
                assert_eq!(member(r2, &w).unwrap(), member(&r, &w).unwrap(), "{w}");
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        assert_eq!(materialize(&FirstLast, 2).unwrap_err(), Error::StateBudget(2));
    }
}
