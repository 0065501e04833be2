//! Frequent grouping patterns (Apriori) and removal of patterns that cover
//! the same groups.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::patterns::{covered_groups, Pattern, SimplePredicate};
use crate::tabular::{AggregateView, Column, Dataset};

/// Minimum row support for threshold `tau` over `n` rows, never below one.
pub fn min_support(tau: f64, n: usize) -> usize {
    // tolerance absorbs products like 0.1 * 30 = 3.0000000000000004
    (((tau * n as f64) - 1e-9).ceil().max(1.0)) as usize
}

#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn zeros(n: usize) -> Bits {
        Bits(vec![0; n.div_ceil(64)])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn and(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// Item = (attribute position in the sorted attribute list, value code).
type Item = (usize, u32);

/// Level-wise Apriori over equality predicates on `attrs`, counting support
/// over the view's surviving rows. Every returned pattern has support of at
/// least `min_support(tau, rows)`; output is in canonical order.
pub fn mine_grouping_patterns(
    d: &Dataset,
    view: &AggregateView,
    attrs: &[String],
    tau: f64,
) -> Result<Vec<Pattern>> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Config(format!("tau must be in [0, 1], got {tau}")));
    }
    let mut attrs: Vec<String> = attrs.to_vec();
    attrs.sort();
    attrs.dedup();
    let n = view.rows.len();
    let minsup = min_support(tau, n);

    let mut domains: Vec<&[String]> = Vec::with_capacity(attrs.len());
    let mut level: Vec<(Vec<Item>, Bits)> = Vec::new();
    for (a, attr) in attrs.iter().enumerate() {
        let Column::Categorical { codes, domain } = d.column_by_name(attr)? else {
            return Err(Error::Schema(format!("grouping attribute {attr} is not categorical")));
        };
        domains.push(domain);
        let mut per_value: BTreeMap<u32, Bits> = BTreeMap::new();
        for (pos, &row) in view.rows.iter().enumerate() {
            let c = codes[row];
            if c != crate::tabular::MISSING {
                per_value.entry(c).or_insert_with(|| Bits::zeros(n)).set(pos);
            }
        }
        for (code, bits) in per_value {
            if bits.count() >= minsup {
                level.push((vec![(a, code)], bits));
            }
        }
    }

    let mut frequent: Vec<Vec<Item>> = Vec::new();
    while !level.is_empty() {
        frequent.extend(level.iter().map(|(items, _)| items.clone()));
        let known: HashSet<&Vec<Item>> = level.iter().map(|(i, _)| i).collect();
        let mut next = Vec::new();
        for i in 0..level.len() {
            for j in (i + 1)..level.len() {
                let (a, bits_a) = &level[i];
                let (b, bits_b) = &level[j];
                let k = a.len();
                if a[..k - 1] != b[..k - 1] {
                    // level is sorted, so no later j shares the prefix either
                    break;
                }
                if a[k - 1].0 >= b[k - 1].0 {
                    continue;
                }
                let mut cand = a.clone();
                cand.push(b[k - 1]);
                let all_parents_frequent = (0..cand.len()).all(|skip| {
                    let sub: Vec<Item> = cand
                        .iter()
                        .enumerate()
                        .filter(|&(x, _)| x != skip)
                        .map(|(_, it)| *it)
                        .collect();
                    known.contains(&sub)
                });
                if !all_parents_frequent {
                    continue;
                }
                let bits = bits_a.and(bits_b);
                if bits.count() >= minsup {
                    next.push((cand, bits));
                }
            }
        }
        next.sort_by(|x, y| x.0.cmp(&y.0));
        level = next;
    }

    let mut out: Vec<Pattern> = frequent
        .into_iter()
        .map(|items| {
            Pattern::new(
                items
                    .into_iter()
                    .map(|(a, code)| SimplePredicate::eq(attrs[a].clone(), domains[a][code as usize].clone()))
                    .collect(),
            )
        })
        .collect::<Result<_>>()?;
    out.sort();
    Ok(out)
}

/// Keeps one pattern per distinct covered-group set: the shortest, ties by
/// text. Patterns covering no group are dropped. Output is canonical order.
pub fn dedup_grouping(
    patterns: &[Pattern],
    d: &Dataset,
    grouping_attrs: &[String],
    view: &AggregateView,
) -> Result<Vec<Pattern>> {
    let mut best: HashMap<Vec<usize>, (Pattern, String)> = HashMap::new();
    for p in patterns {
        let cov = covered_groups(p, d, grouping_attrs, view)?;
        if cov.is_empty() {
            continue;
        }
        let text = p.to_string();
        match best.get(&cov) {
            Some((q, qt)) if (q.len(), qt.as_str()) <= (p.len(), text.as_str()) => {}
            _ => {
                best.insert(cov, (p.clone(), text));
            }
        }
    }
    let mut out: Vec<Pattern> = best.into_values().map(|(p, _)| p).collect();
    out.sort();
    Ok(out)
}
