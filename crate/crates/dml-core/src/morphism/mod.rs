//! Morphisms from free data monoids into presented monoids, recognizers,
//! emptiness and syntactic quotients.

mod builder;
mod quotient;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};
use crate::nominal::{DataValue, DataWord, Tag};
use crate::presentation::{parse_presentation_with, parse_term_pattern, OrbitId, PatArg, Presentation, Term};

pub use builder::{materialize, Built, ConcreteMonoid, PresentedMonoid, DEFAULT_ORBIT_BUDGET};
pub use quotient::{syntactic_quotient, Congruence};

/// A letter of the expanded alphabet `A × {0,1}^m`.  Bit `j` is track `j`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sym {
    pub tag: Tag,
    pub bits: u32,
}

impl Sym {
    pub fn plain(tag: Tag) -> Sym {
        Sym { tag, bits: 0 }
    }

    pub fn bit(&self, track: usize) -> bool {
        self.bits >> track & 1 == 1
    }

    pub fn show(&self, tracks: usize) -> String {
        if tracks == 0 {
            return self.tag.to_string();
        }
        let bits: String = (0..tracks).map(|j| if self.bit(j) { '1' } else { '0' }).collect();
        format!("{}:{bits}", self.tag)
    }
}

/// Every letter of `tags × {0,1}^tracks`.
pub fn expanded_alphabet(tags: &[Tag], tracks: usize) -> Vec<Sym> {
    let mut out = Vec::new();
    for t in tags {
        for bits in 0..(1u32 << tracks) {
            out.push(Sym { tag: t.clone(), bits });
        }
    }
    out
}

/// Image of a letter `(d, a)`: a term of arity 0 or a unary term on `d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LetterImage {
    pub orbit: OrbitId,
    pub uses_value: bool,
}

impl LetterImage {
    pub fn instantiate(&self, d: DataValue) -> Term {
        if self.uses_value {
            Term::new(self.orbit, vec![d])
        } else {
            Term::nullary(self.orbit)
        }
    }
}

#[derive(Clone, Debug)]
pub struct Morphism {
    pub target: Presentation,
    pub tracks: usize,
    pub images: BTreeMap<Sym, LetterImage>,
}

/// A data word together with position sets `U_1..U_m` (1-based positions).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AnnotatedWord {
    pub word: DataWord,
    pub predicates: Vec<BTreeSet<usize>>,
}

impl AnnotatedWord {
    pub fn plain(word: DataWord) -> AnnotatedWord {
        AnnotatedWord { word, predicates: Vec::new() }
    }

    /// Expanded letters of the word.
    pub fn symbols(&self) -> Vec<(Sym, DataValue)> {
        self.word
            .letters()
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let mut bits = 0u32;
                for (j, u) in self.predicates.iter().enumerate() {
                    if u.contains(&(i + 1)) {
                        bits |= 1 << j;
                    }
                }
                (Sym { tag: l.tag.clone(), bits }, l.value)
            })
            .collect()
    }

    /// All annotations of `w` with `tracks` predicates; tracks listed in
    /// `singletons` range over singleton sets only.
    pub fn annotations(w: &DataWord, tracks: usize, singletons: &[bool]) -> Vec<AnnotatedWord> {
        let n = w.len();
        let mut out = vec![Vec::new()];
        for j in 0..tracks {
            let choices: Vec<BTreeSet<usize>> = if singletons.get(j).copied().unwrap_or(false) {
                (1..=n).map(|i| BTreeSet::from([i])).collect()
            } else {
                (0..1u32 << n).map(|mask| (1..=n).filter(|i| mask >> (i - 1) & 1 == 1).collect()).collect()
            };
            let mut next = Vec::new();
            for prefix in &out {
                for c in &choices {
                    let mut v: Vec<BTreeSet<usize>> = prefix.clone();
                    v.push(c.clone());
                    next.push(v);
                }
            }
            out = next;
        }
        out.into_iter().map(|predicates| AnnotatedWord { word: w.clone(), predicates }).collect()
    }
}

impl Morphism {
    pub fn image(&self, sym: &Sym, d: DataValue) -> Result<Term> {
        let img = self.images.get(sym).ok_or_else(|| Error::UnknownLetter(sym.show(self.tracks)))?;
        Ok(img.instantiate(d))
    }

    pub fn letters(&self) -> Vec<Sym> {
        self.images.keys().cloned().collect()
    }

    pub fn tags(&self) -> Vec<Tag> {
        let set: BTreeSet<Tag> = self.images.keys().map(|s| s.tag.clone()).collect();
        set.into_iter().collect()
    }

    pub fn evaluate_symbols(&self, syms: &[(Sym, DataValue)]) -> Result<Term> {
        let mut acc = self.target.identity();
        for (s, d) in syms {
            acc = self.target.product(&acc, &self.image(s, *d)?)?;
        }
        Ok(acc)
    }

    pub fn evaluate_annotated(&self, w: &AnnotatedWord) -> Result<Term> {
        self.evaluate_symbols(&w.symbols())
    }

    /// Letter images must have memory within `{d}`; checked on construction.
    pub fn check(&self) -> Result<()> {
        for (s, img) in &self.images {
            let want = if img.uses_value { 1 } else { 0 };
            if self.target.arity(img.orbit) != want {
                return Err(Error::InvalidPresentation(format!(
                    "image of {} has arity {}",
                    s.show(self.tracks),
                    self.target.arity(img.orbit)
                )));
            }
        }
        Ok(())
    }
}

/// Fold of products over the letter images; the empty word maps to the identity.
pub fn evaluate(h: &Morphism, w: &DataWord) -> Result<Term> {
    h.evaluate_annotated(&AnnotatedWord::plain(w.clone()))
}

#[derive(Clone, Debug)]
pub struct Recognizer {
    pub morphism: Morphism,
    pub accepting: BTreeSet<OrbitId>,
}

impl Recognizer {
    pub fn presentation(&self) -> &Presentation {
        &self.morphism.target
    }

    pub fn accepts_term(&self, t: &Term) -> bool {
        self.accepting.contains(&t.orbit)
    }

    pub fn member_annotated(&self, w: &AnnotatedWord) -> Result<bool> {
        Ok(self.accepts_term(&self.morphism.evaluate_annotated(w)?))
    }

    pub fn orbit_count(&self) -> usize {
        self.presentation().orbits().len()
    }

    /// Recognizer text: the presentation followed by letter and accept lines.
    pub fn to_text(&self) -> String {
        let p = self.presentation();
        let mut out = p.to_text();
        for (s, img) in &self.morphism.images {
            let arg = if img.uses_value { "d" } else { "" };
            out.push_str(&format!("letter {} = {}({arg})\n", s.show(self.morphism.tracks), p.orbit(img.orbit).name));
        }
        let acc: Vec<&str> = self.accepting.iter().map(|&o| p.orbit(o).name.as_str()).collect();
        out.push_str(&format!("accept {}\n", acc.join(" ")));
        out
    }
}

impl fmt::Display for Recognizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

pub fn member(r: &Recognizer, w: &DataWord) -> Result<bool> {
    r.member_annotated(&AnnotatedWord::plain(w.clone()))
}

/// Canonical representatives `o(1..k)` of the orbits reachable from the identity.
pub fn reachable_orbits(h: &Morphism) -> Result<Vec<Term>> {
    let p = &h.target;
    let letters = h.letters();
    let mut seen: BTreeSet<OrbitId> = BTreeSet::from([p.identity_orbit()]);
    let mut queue = VecDeque::from([p.identity_orbit()]);
    while let Some(o) = queue.pop_front() {
        let s = p.orbit_rep(o);
        let k = s.values.len() as DataValue;
        for sym in &letters {
            for d in 1..=k + 1 {
                let t = p.product(&s, &h.image(sym, d)?)?;
                if seen.insert(t.orbit) {
                    queue.push_back(t.orbit);
                }
            }
        }
    }
    Ok(seen.into_iter().map(|o| p.orbit_rep(o)).collect())
}

pub fn is_empty(r: &Recognizer) -> Result<bool> {
    Ok(!reachable_orbits(&r.morphism)?.iter().any(|t| r.accepts_term(t)))
}

/// Parses a recognizer file: a presentation plus `letter` and `accept` lines.
pub fn parse_recognizer(src: &str) -> Result<Recognizer> {
    let (p, extra) =
        parse_presentation_with(src, |_, line| Ok(line.starts_with("letter ") || line.starts_with("accept")))?;
    let mut images = BTreeMap::new();
    let mut accepting = BTreeSet::new();
    let mut tracks: Option<usize> = None;
    for (line_no, line) in extra {
        let perr = |msg: String| Error::Parse { line: line_no, col: 0, msg };
        if let Some(rest) = line.strip_prefix("letter ") {
            let (lhs, rhs) = rest.split_once('=').ok_or_else(|| perr("letter expects `a = o(d)`".into()))?;
            let lhs = lhs.trim();
            let (tag, bits_str) = lhs.split_once(':').unwrap_or((lhs, ""));
            let m = bits_str.len();
            if *tracks.get_or_insert(m) != m {
                return Err(perr("inconsistent number of tracks".into()));
            }
            let mut bits = 0u32;
            for (j, ch) in bits_str.chars().enumerate() {
                match ch {
                    '0' => {}
                    '1' => bits |= 1 << j,
                    _ => return Err(perr(format!("bad track bits `{bits_str}`"))),
                }
            }
            let pat = parse_term_pattern(rhs, line_no)?;
            let orbit = p.orbit_id(&pat.orbit).ok_or_else(|| perr(format!("unknown orbit `{}`", pat.orbit)))?;
            let uses_value = match pat.args.as_slice() {
                [] => false,
                [PatArg::Var(_)] => true,
                _ => return Err(perr("letter image takes at most one variable".into())),
            };
            if p.arity(orbit) != usize::from(uses_value) {
                return Err(perr(format!("arity mismatch for `{}`", pat.orbit)));
            }
            images.insert(Sym { tag: Tag::new(tag), bits }, LetterImage { orbit, uses_value });
        } else {
            for name in line.trim_start_matches("accept").split_whitespace() {
                let o = p.orbit_id(name).ok_or_else(|| perr(format!("unknown orbit `{name}`")))?;
                accepting.insert(o);
            }
        }
    }
    let morphism = Morphism { target: p, tracks: tracks.unwrap_or(0), images };
    morphism.check()?;
    Ok(Recognizer { morphism, accepting })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn w(s: &str) -> DataWord {
        s.parse().unwrap()
    }

    #[test]
    fn l2_evaluation() {
        let r = fixtures::l2_recognizer();
        let p = r.presentation();
        assert_eq!(evaluate(&r.morphism, &w("a@1 a@2 a@1")).unwrap(), p.term("eq", &[1]).unwrap());
        assert_eq!(evaluate(&r.morphism, &w("a@3 a@4")).unwrap(), p.term("pair", &[3, 4]).unwrap());
        assert_eq!(evaluate(&r.morphism, &DataWord::empty()).unwrap(), p.identity());
    }

    #[test]
    fn l2_membership() {
        let r = fixtures::l2_recognizer();
        assert!(member(&r, &w("a@1 a@2 a@1")).unwrap());
        assert!(!member(&r, &w("a@1 a@2")).unwrap());
        let mut none = r.clone();
        none.accepting.clear();
        assert!(!member(&none, &w("a@1 a@1")).unwrap());
        assert!(is_empty(&none).unwrap());
    }

    /// Brute-force oracle: first and last values agree.
    #[test]
    fn l2_matches_definition() {
        let r = fixtures::l2_recognizer();
        for x in DataWord::enumerate_up_to(&[Tag::new("a")], 4, 5) {
            let expect = !x.is_empty() && x.0[0].value == x.0[x.len() - 1].value;
            assert_eq!(member(&r, &x).unwrap(), expect, "{x}");
        }
    }

    /// Brute-force oracle: at least three distinct values.
    #[test]
    fn l1_matches_definition() {
        let r = fixtures::l1_recognizer();
        for x in DataWord::enumerate_up_to(&[Tag::new("a")], 4, 5) {
            assert_eq!(member(&r, &x).unwrap(), x.values().len() >= 3, "{x}");
        }
    }

    #[test]
    fn reachable_examples() {
        let r = fixtures::l2_recognizer();
        let reps: Vec<String> =
            reachable_orbits(&r.morphism).unwrap().iter().map(|t| r.presentation().show(t)).collect();
        assert_eq!(reps, vec!["id()", "eq(1)", "pair(1,2)"]);
        let r1 = fixtures::l1_recognizer();
        let reps: Vec<String> =
            reachable_orbits(&r1.morphism).unwrap().iter().map(|t| r1.presentation().show(t)).collect();
        assert_eq!(reps, vec!["o()", "p(1)", "q(1,2)", "r()"]);
        assert!(!is_empty(&r).unwrap());
    }

    #[test]
    fn emptiness_agrees_with_bounded_search() {
        for r in [fixtures::l1_recognizer(), fixtures::l2_recognizer(), fixtures::z2_recognizer()] {
            let reach = reachable_orbits(&r.morphism).unwrap();
            let k = r.presentation().max_arity() as DataValue + 1;
            let words = DataWord::enumerate_up_to(&r.morphism.tags(), k, reach.len());
            let bounded = words.iter().any(|x| member(&r, x).unwrap());
            assert_eq!(is_empty(&r).unwrap(), !bounded);
        }
    }

    #[test]
    fn evaluation_is_equivariant() {
        let r = fixtures::l1_recognizer();
        let tau = crate::nominal::Renaming::cycle(&[1, 2, 3, 4]).unwrap();
        for x in DataWord::enumerate_up_to(&[Tag::new("a")], 3, 4) {
            let a = evaluate(&r.morphism, &tau.act_word(&x)).unwrap();
            let b = r.presentation().act(&tau, &evaluate(&r.morphism, &x).unwrap());
            assert_eq!(a, b);
        }
    }

    #[test]
    fn recognizer_text_round_trip() {
        let r = fixtures::xy_recognizer();
        let r2 = parse_recognizer(&r.to_text()).unwrap();
        assert_eq!(r2.morphism.tracks, 2);
        assert_eq!(r2.morphism.images.len(), 4);
        assert_eq!(r2.accepting.len(), 1);
    }

    #[test]
    fn annotations_enumerate_singletons() {
        let x = w("a@1 a@2 a@3");
        assert_eq!(AnnotatedWord::annotations(&x, 1, &[true]).len(), 3);
        assert_eq!(AnnotatedWord::annotations(&x, 1, &[false]).len(), 8);
        assert_eq!(AnnotatedWord::annotations(&x, 2, &[true, false]).len(), 24);
    }
}
