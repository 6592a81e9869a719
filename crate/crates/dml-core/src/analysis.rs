//! Memory, aperiodicity and Green's relations over finite restrictions.

use std::collections::{BTreeSet, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nominal::{DataValue, Renaming};
use crate::presentation::{OrbitId, Presentation, Term};

/// Memory of an element: the values of its normal-form term, cross-checked
/// against transpositions with a fresh value.
pub fn memory(p: &Presentation, s: &Term) -> Result<BTreeSet<DataValue>> {
    let s = p.normalize(s);
    let fresh = s.max_value().max(p.support()) + 1;
    let mut by_stabilizer = BTreeSet::new();
    for &d in &s.values {
        if p.act(&Renaming::swap(d, fresh), &s) != s {
            by_stabilizer.insert(d);
        }
    }
    let by_term: BTreeSet<DataValue> = s.values.iter().copied().collect();
    if by_term != by_stabilizer {
        return Err(Error::Reducedness(format!(
            "{}: term values {:?} but memorable values {:?}",
            p.show(&s),
            by_term,
            by_stabilizer
        )));
    }
    Ok(by_term)
}

/// Whether every element `s` of the restriction to the support satisfies
/// `s^n = s^(n+1)` for some `n` bounded by the size of the restriction.
pub fn is_aperiodic(p: &Presentation) -> Result<bool> {
    let c: Vec<DataValue> = (1..=p.support().max(1)).collect();
    let elems = p.enumerate_restriction(&c);
    let bound = elems.len() + 1;
    for s in &elems {
        if !power_stabilizes(p, s, bound)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn power_stabilizes(p: &Presentation, s: &Term, bound: usize) -> Result<bool> {
    let mut cur = s.clone();
    for _ in 0..bound {
        let next = p.product(&cur, s)?;
        if next == cur {
            return Ok(true);
        }
        cur = next;
    }
    Ok(false)
}

#[derive(Clone, Debug, Serialize)]
pub struct GreenSummary {
    /// Elements of the restriction to the analysed value set.
    pub elements: Vec<Term>,
    pub r_order: Vec<Vec<bool>>,
    pub l_order: Vec<Vec<bool>>,
    pub j_order: Vec<Vec<bool>>,
    pub r_classes: Vec<Vec<usize>>,
    pub l_classes: Vec<Vec<usize>>,
    pub j_classes: Vec<Vec<usize>>,
    pub h_classes: Vec<Vec<usize>>,
    /// `orbit_j_order[a][b]`: orbit `a` lies below orbit `b` for the orbit-lifted J order.
    pub orbit_j_order: Vec<Vec<bool>>,
    /// Values witnesses were drawn from.
    pub witness_values: Vec<DataValue>,
}

impl GreenSummary {
    pub fn index_of(&self, t: &Term) -> Option<usize> {
        self.elements.iter().position(|e| e == t)
    }

    pub fn r_equiv(&self, i: usize, j: usize) -> bool {
        self.r_order[i][j] && self.r_order[j][i]
    }

    pub fn l_equiv(&self, i: usize, j: usize) -> bool {
        self.l_order[i][j] && self.l_order[j][i]
    }

    pub fn j_equiv(&self, i: usize, j: usize) -> bool {
        self.j_order[i][j] && self.j_order[j][i]
    }

    pub fn orbit_j_equiv(&self, a: OrbitId, b: OrbitId) -> bool {
        self.orbit_j_order[a][b] && self.orbit_j_order[b][a]
    }

    fn class_of(classes: &[Vec<usize>], i: usize) -> &[usize] {
        classes.iter().find(|c| c.contains(&i)).map(|c| c.as_slice()).unwrap_or(&[])
    }
}

/// Default analysis value set: `{1..2*max_arity}` (at least one value).
pub fn default_values(p: &Presentation) -> Vec<DataValue> {
    (1..=(2 * p.max_arity()).max(1) as DataValue).collect()
}

/// Default witness universe: the support, widened to `2*max_arity + 2` values.
pub fn witness_values(p: &Presentation, c2: &[DataValue]) -> Vec<DataValue> {
    let n = (p.support() as usize).max(2 * p.max_arity() + 2) as DataValue;
    let mut w: BTreeSet<DataValue> = (1..=n).collect();
    w.extend(c2.iter().copied());
    w.into_iter().collect()
}

pub fn green(p: &Presentation, c2: &[DataValue]) -> Result<GreenSummary> {
    green_with(p, c2, &witness_values(p, c2))
}

/// Green's relations on the restriction to `c2`, with multipliers drawn from
/// the restriction to `witnesses`.
pub fn green_with(p: &Presentation, c2: &[DataValue], witnesses: &[DataValue]) -> Result<GreenSummary> {
    let elements = p.enumerate_restriction(c2);
    let mults = p.enumerate_restriction(witnesses);
    let n = elements.len();

    let mut right_ideals = Vec::with_capacity(n);
    let mut left_ideals = Vec::with_capacity(n);
    let mut two_sided = Vec::with_capacity(n);
    for t in &elements {
        let r: HashSet<Term> = mults.iter().map(|u| p.product(t, u)).collect::<Result<_>>()?;
        let l: HashSet<Term> = mults.iter().map(|u| p.product(u, t)).collect::<Result<_>>()?;
        let mut j = HashSet::new();
        for x in &r {
            for u in &mults {
                j.insert(p.product(u, x)?);
            }
        }
        right_ideals.push(r);
        left_ideals.push(l);
        two_sided.push(j);
    }
    let order = |ideals: &[HashSet<Term>]| -> Vec<Vec<bool>> {
        (0..n).map(|i| (0..n).map(|j| ideals[j].contains(&elements[i])).collect()).collect()
    };
    let r_order = order(&right_ideals);
    let l_order = order(&left_ideals);
    let j_order = order(&two_sided);

    let classes = |eq: &dyn Fn(usize, usize) -> bool| -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            match out.iter_mut().find(|c| eq(c[0], i)) {
                Some(c) => c.push(i),
                None => out.push(vec![i]),
            }
        }
        out
    };
    let r_classes = classes(&|i, j| r_order[i][j] && r_order[j][i]);
    let l_classes = classes(&|i, j| l_order[i][j] && l_order[j][i]);
    let j_classes = classes(&|i, j| j_order[i][j] && j_order[j][i]);
    let h_classes = classes(&|i, j| r_order[i][j] && r_order[j][i] && l_order[i][j] && l_order[j][i]);

    let k = p.orbits().len();
    let mut orbit_j_order = vec![vec![false; k]; k];
    // `b` indexes a column of `orbit_j_order`.
    #[allow(clippy::needless_range_loop)]
    for b in 0..k {
        let t = p.orbit_rep(b);
        let mut ideal = HashSet::new();
        for u in &mults {
            let ut = p.product(u, &t)?;
            for v in &mults {
                ideal.insert(p.product(&ut, v)?.orbit);
            }
        }
        for a in ideal {
            orbit_j_order[a][b] = true;
        }
    }

    Ok(GreenSummary {
        elements,
        r_order,
        l_order,
        j_order,
        r_classes,
        l_classes,
        j_classes,
        h_classes,
        orbit_j_order,
        witness_values: witnesses.to_vec(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MemoryReport {
    pub element: String,
    pub mem: BTreeSet<DataValue>,
    pub mem_r: BTreeSet<DataValue>,
    pub mem_l: BTreeSet<DataValue>,
}

fn intersect_memories(p: &Presentation, g: &GreenSummary, class: &[usize]) -> Result<BTreeSet<DataValue>> {
    let mut acc: Option<BTreeSet<DataValue>> = None;
    for &i in class {
        let m = memory(p, &g.elements[i])?;
        acc = Some(match acc {
            None => m,
            Some(a) => a.intersection(&m).copied().collect(),
        });
    }
    Ok(acc.unwrap_or_default())
}

pub fn mem_rl(p: &Presentation, s: &Term, g: &GreenSummary) -> Result<MemoryReport> {
    let i = g
        .index_of(&p.normalize(s))
        .ok_or_else(|| Error::InvalidTerm(format!("{} is not in the analysed restriction", p.show(s))))?;
    Ok(MemoryReport {
        element: p.show(s),
        mem: memory(p, s)?,
        mem_r: intersect_memories(p, g, GreenSummary::class_of(&g.r_classes, i))?,
        mem_l: intersect_memories(p, g, GreenSummary::class_of(&g.l_classes, i))?,
    })
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct PropertyReport {
    pub memory_checks: usize,
    pub memory_failures: Vec<String>,
    pub stairs_checks: usize,
    pub stairs_failures: Vec<String>,
    pub h_class_sizes: Vec<usize>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.memory_failures.is_empty() && self.stairs_failures.is_empty()
    }
}

/// Checks `mem = mem_R ∪ mem_L` on every element and the decomposition-stairs
/// implications on every pair of the analysed restriction.
pub fn check_structure(p: &Presentation, g: &GreenSummary) -> Result<PropertyReport> {
    let mut rep = PropertyReport::default();
    for s in &g.elements {
        let m = mem_rl(p, s, g)?;
        rep.memory_checks += 1;
        let union: BTreeSet<DataValue> = m.mem_r.union(&m.mem_l).copied().collect();
        if union != m.mem {
            rep.memory_failures
                .push(format!("{}: mem {:?}, mem_R {:?}, mem_L {:?}", m.element, m.mem, m.mem_r, m.mem_l));
        }
    }
    for (i, s) in g.elements.iter().enumerate() {
        for (j, t) in g.elements.iter().enumerate() {
            let st = p.product(s, t)?;
            let k = g
                .index_of(&st)
                .ok_or_else(|| Error::InvalidPresentation(format!("{} escapes the restriction", p.show(&st))))?;
            rep.stairs_checks += 1;
            if g.orbit_j_equiv(s.orbit, st.orbit) && !g.r_equiv(i, k) {
                rep.stairs_failures.push(format!("{} =J° {}·{} but not =R", p.show(s), p.show(s), p.show(t)));
            }
            if g.orbit_j_equiv(t.orbit, st.orbit) && !g.l_equiv(j, k) {
                rep.stairs_failures.push(format!("{} =J° {}·{} but not =L", p.show(t), p.show(s), p.show(t)));
            }
        }
    }
    rep.h_class_sizes = g.h_classes.iter().map(|c| c.len()).collect();
    Ok(rep)
}
