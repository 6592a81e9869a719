//! Data values, tags, data words and finite-support renamings.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A data value. The infinite alphabet is modelled by the naturals.
pub type DataValue = u32;

/// A letter of the finite alphabet.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Tag(pub String);

impl Tag {
    pub fn new(name: impl Into<String>) -> Tag {
        Tag(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Tag {
    fn from(s: &str) -> Tag {
        Tag(s.to_string())
    }
}

/// A finite permutation of data values; everything outside `map` is fixed.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Renaming {
    // Only non-fixed points are stored, so equality is extensional.
    map: BTreeMap<DataValue, DataValue>,
}

impl Renaming {
    pub fn identity() -> Renaming {
        Renaming::default()
    }

    pub fn swap(a: DataValue, b: DataValue) -> Renaming {
        Renaming::from_pairs(&[(a, b), (b, a)]).expect("transposition is a bijection")
    }

    /// Cycle `c[0] -> c[1] -> ... -> c[n-1] -> c[0]`.
    pub fn cycle(c: &[DataValue]) -> Result<Renaming> {
        let pairs: Vec<_> = (0..c.len()).map(|i| (c[i], c[(i + 1) % c.len()])).collect();
        Renaming::from_pairs(&pairs)
    }

    /// Builds a renaming from explicit pairs; the pairs must form a bijection of a finite set onto itself.
    pub fn from_pairs(pairs: &[(DataValue, DataValue)]) -> Result<Renaming> {
        let mut map = BTreeMap::new();
        for &(a, b) in pairs {
            if let Some(&old) = map.get(&a) {
                if old != b {
                    return Err(Error::InvalidRenaming(format!("{a} mapped to both {old} and {b}")));
                }
            }
            map.insert(a, b);
        }
        let mut image: Vec<_> = map.values().copied().collect();
        image.sort_unstable();
        image.dedup();
        if image.len() != map.len() || !image.iter().all(|v| map.contains_key(v)) {
            return Err(Error::InvalidRenaming("domain and range differ".into()));
        }
        map.retain(|a, b| a != b);
        Ok(Renaming { map })
    }

    /// Extends an injective partial map to a finite bijection, pairing the
    /// unmatched range values back onto the unmatched domain values.
    pub fn extend_injection(pairs: &[(DataValue, DataValue)]) -> Renaming {
        let mut fwd: BTreeMap<DataValue, DataValue> = BTreeMap::new();
        let mut bwd: BTreeMap<DataValue, DataValue> = BTreeMap::new();
        for &(a, b) in pairs {
            debug_assert!(fwd.get(&a).is_none_or(|&x| x == b));
            fwd.insert(a, b);
            bwd.insert(b, a);
        }
        // Close each chain: follow images that leave the domain back to a preimage that left the range.
        let mut map = fwd.clone();
        for &b in bwd.keys() {
            if fwd.contains_key(&b) {
                continue;
            }
            // b is hit but not moved yet: walk backwards to the chain start.
            let mut start = b;
            while let Some(&prev) = bwd.get(&start) {
                start = prev;
            }
            map.insert(b, start);
        }
        map.retain(|a, b| a != b);
        Renaming { map }
    }

    pub fn apply(&self, d: DataValue) -> DataValue {
        *self.map.get(&d).unwrap_or(&d)
    }

    /// Values moved by the renaming.
    pub fn support(&self) -> impl Iterator<Item = DataValue> + '_ {
        self.map.keys().copied()
    }

    pub fn is_identity(&self) -> bool {
        self.map.is_empty()
    }

    pub fn invert(&self) -> Renaming {
        Renaming { map: self.map.iter().map(|(&a, &b)| (b, a)).collect() }
    }

    pub fn act_word(&self, w: &DataWord) -> DataWord {
        DataWord(w.0.iter().map(|l| Letter { value: self.apply(l.value), tag: l.tag.clone() }).collect())
    }
}

/// `compose(t1, t2)` applies `t2` first, then `t1`.
pub fn compose(t1: &Renaming, t2: &Renaming) -> Renaming {
    let mut map = BTreeMap::new();
    for d in t1.support().chain(t2.support()) {
        let e = t1.apply(t2.apply(d));
        if e != d {
            map.insert(d, e);
        }
    }
    Renaming { map }
}

pub fn invert(t: &Renaming) -> Renaming {
    t.invert()
}

pub fn act_word(t: &Renaming, w: &DataWord) -> DataWord {
    t.act_word(w)
}

/// Renames values in order of first occurrence to 1, 2, 3, ...
pub fn canonical_word(w: &DataWord) -> (DataWord, Renaming) {
    let mut pairs = Vec::new();
    let mut next = 1;
    for l in &w.0 {
        if !pairs.iter().any(|&(a, _)| a == l.value) {
            pairs.push((l.value, next));
            next += 1;
        }
    }
    let r = Renaming::extend_injection(&pairs);
    (r.act_word(w), r)
}

impl fmt::Display for Renaming {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.map.is_empty() {
            return f.write_str("id");
        }
        let parts: Vec<_> = self.map.iter().map(|(a, b)| format!("{a}->{b}")).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Letter {
    pub tag: Tag,
    pub value: DataValue,
}

impl Letter {
    pub fn new(tag: impl Into<String>, value: DataValue) -> Letter {
        Letter { tag: Tag::new(tag), value }
    }
}

/// A data word; positions are reported 1-based by the logic layer.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct DataWord(pub Vec<Letter>);

impl DataWord {
    pub fn empty() -> DataWord {
        DataWord(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    /// Distinct values in order of first occurrence.
    pub fn values(&self) -> Vec<DataValue> {
        let mut out = Vec::new();
        for l in &self.0 {
            if !out.contains(&l.value) {
                out.push(l.value);
            }
        }
        out
    }

    /// All words of length exactly `len` over `tags` x `1..=max_value`.
    pub fn enumerate(tags: &[Tag], max_value: DataValue, len: usize) -> Vec<DataWord> {
        let mut out = vec![DataWord::empty()];
        for _ in 0..len {
            let mut next = Vec::with_capacity(out.len() * tags.len() * max_value as usize);
            for w in &out {
                for t in tags {
                    for v in 1..=max_value {
                        let mut w2 = w.clone();
                        w2.0.push(Letter { tag: t.clone(), value: v });
                        next.push(w2);
                    }
                }
            }
            out = next;
        }
        out
    }

    /// All words of length at most `max_len`.
    pub fn enumerate_up_to(tags: &[Tag], max_value: DataValue, max_len: usize) -> Vec<DataWord> {
        (0..=max_len).flat_map(|n| DataWord::enumerate(tags, max_value, n)).collect()
    }

    /// Words of length at most `max_len` in canonical form (values numbered by
    /// first occurrence) using at most `max_value` distinct values.  Every word
    /// over `1..=max_value` is a renaming of exactly one of them.
    pub fn enumerate_canonical(tags: &[Tag], max_value: DataValue, max_len: usize) -> Vec<DataWord> {
        let mut out = vec![DataWord::empty()];
        let mut layer = vec![(DataWord::empty(), 0)];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for (w, used) in &layer {
                for t in tags {
                    for v in 1..=(*used + 1).min(max_value) {
                        let mut w2 = w.clone();
                        w2.0.push(Letter { tag: t.clone(), value: v });
                        next.push((w2, (*used).max(v)));
                    }
                }
            }
            out.extend(next.iter().map(|(w, _)| w.clone()));
            layer = next;
        }
        out
    }
}

impl fmt::Display for DataWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<_> = self.0.iter().map(|l| format!("{}@{}", l.tag, l.value)).collect();
        f.write_str(&parts.join(" "))
    }
}

impl FromStr for DataWord {
    type Err = Error;

    /// Parses `a@1 b@2 a@1`; empty input is the empty word.
    fn from_str(s: &str) -> Result<DataWord> {
        let mut letters = Vec::new();
        for tok in s.split_whitespace() {
            let (tag, val) = tok.split_once('@').ok_or_else(|| Error::Parse {
                line: 1,
                col: 0,
                msg: format!("expected tag@value, got `{tok}`"),
            })?;
            if tag.is_empty() || !tag.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(Error::Parse { line: 1, col: 0, msg: format!("bad tag in `{tok}`") });
            }
            let value = val.parse::<DataValue>().map_err(|_| Error::Parse {
                line: 1,
                col: 0,
                msg: format!("bad data value in `{tok}`"),
            })?;
            letters.push(Letter { tag: Tag::new(tag), value });
        }
        Ok(DataWord(letters))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> DataWord {
        s.parse().unwrap()
    }

    #[test]
    fn swap_is_an_involution() {
        let s = Renaming::swap(1, 2);
        assert!(compose(&s, &s).is_identity());
        assert_eq!(invert(&s), s);
    }

    #[test]
    fn composition_applies_right_operand_first() {
        // swap(2,3) sends 3 to 2, then swap(1,2) sends 2 to 1.
        let r = compose(&Renaming::swap(1, 2), &Renaming::swap(2, 3));
        assert_eq!(r.apply(3), 1);
        let r2 = compose(&Renaming::swap(2, 3), &Renaming::swap(1, 2));
        assert_eq!(r2.apply(3), 2);
    }

    #[test]
    fn identity_is_neutral() {
        let s = Renaming::swap(4, 7);
        assert_eq!(compose(&Renaming::identity(), &s), s);
        assert!(invert(&Renaming::identity()).is_identity());
    }

    #[test]
    fn cycle_inverse() {
        let c = Renaming::cycle(&[1, 2, 3]).unwrap();
        let expected = Renaming::cycle(&[1, 3, 2]).unwrap();
        assert_eq!(invert(&c), expected);
        assert!(compose(&c, &invert(&c)).is_identity());
    }

    #[test]
    fn rejects_non_bijections() {
        assert!(Renaming::from_pairs(&[(1, 2)]).is_err());
        assert!(Renaming::from_pairs(&[(1, 2), (2, 2)]).is_err());
    }

    #[test]
    fn word_action() {
        assert_eq!(act_word(&Renaming::swap(1, 2), &w("a@1 b@2")), w("a@2 b@1"));
        assert_eq!(act_word(&Renaming::swap(1, 9), &w("a@1 a@1")), w("a@9 a@9"));
        let x = w("a@3 b@5");
        assert_eq!(act_word(&Renaming::identity(), &x), x);
    }

    #[test]
    fn canonical_forms() {
        let (c, r) = canonical_word(&w("a@7 a@3 a@7"));
        assert_eq!(c, w("a@1 a@2 a@1"));
        assert_eq!(r.act_word(&w("a@7 a@3 a@7")), c);
        assert_eq!(canonical_word(&w("a@1 a@2")).0, w("a@1 a@2"));
        assert_eq!(canonical_word(&DataWord::empty()).0, DataWord::empty());
    }

    /// Oracle: filter all words by being their own canonical form.
    #[test]
    fn canonical_enumeration_matches_filter() {
        let tags = [Tag::new("a"), Tag::new("b")];
        let mut fast = DataWord::enumerate_canonical(&tags, 3, 4);
        let mut slow: Vec<_> =
            DataWord::enumerate_up_to(&tags, 3, 4).into_iter().filter(|x| canonical_word(x).0 == *x).collect();
        fast.sort_by_key(|x| x.to_string());
        slow.sort_by_key(|x| x.to_string());
        assert_eq!(fast, slow);
    }

    #[test]
    fn extend_injection_is_bijective() {
        let r = Renaming::extend_injection(&[(7, 1), (3, 2)]);
        assert_eq!(r.apply(7), 1);
        assert_eq!(r.apply(3), 2);
        assert!(compose(&r, &r.invert()).is_identity());
        let mut img: Vec<_> = r.support().map(|d| r.apply(d)).collect();
        img.sort();
        let mut dom: Vec<_> = r.support().collect();
        dom.sort();
        assert_eq!(img, dom);
    }

    #[test]
    fn word_literal_round_trip() {
        let x = w("a@1 b@2 a@1");
        assert_eq!(x.to_string(), "a@1 b@2 a@1");
        assert!(w("").is_empty());
        assert!("a1".parse::<DataWord>().is_err());
        assert!("a@x".parse::<DataWord>().is_err());
    }
}
