//! Barycenter-indexed labeling of ensembles, the order-statistics special
//! case on the real line, and the assignment-minimized discrepancy between two
//! labelings of the same ensemble.

use serde::{Deserialize, Serialize};

use crate::assignment::{enumerate_optimal_truncated, solve_assignment, CostMatrix};
use crate::barycenter::{validate_ensemble, BarycenterResult, ElementLabeling};
use crate::error::{Error, Result};
use crate::metric::GroundSpace;
use crate::symprod::{cost_matrix, Configuration};

/// One coordinate of one ensemble element, identified by where it sits in
/// the element as given (not by its value).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabelMember {
    pub element: usize,
    pub position: usize,
}

/// An ensemble whose elements have been reordered against a fixed barycenter
/// ordering; coordinate `i` of every representative carries label `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledEnsemble<P> {
    pub barycenter: Configuration<P>,
    pub representatives: Vec<ElementLabeling<P>>,
    /// Elements with more than one optimal representative.
    pub ambiguous: Vec<bool>,
}

impl<P: Clone> LabeledEnsemble<P> {
    pub fn k(&self) -> usize {
        self.barycenter.k()
    }

    pub fn n(&self) -> usize {
        self.representatives.len()
    }

    /// `groups[i]` lists every coordinate that received label `i`, one per
    /// element, ordered by element.
    pub fn label_groups(&self) -> Vec<Vec<LabelMember>> {
        (0..self.k())
            .map(|i| {
                self.representatives
                    .iter()
                    .enumerate()
                    .map(|(element, r)| LabelMember { element, position: r.matching.permutation[i] })
                    .collect()
            })
            .collect()
    }

    /// Values of the coordinates carrying label `i`, ordered by element.
    pub fn label_values(&self, i: usize) -> Vec<P> {
        self.representatives.iter().map(|r| r.representative[i].clone()).collect()
    }

    /// Label assigned to `position` of `element`.
    pub fn label_of(&self, element: usize, position: usize) -> Option<usize> {
        self.representatives[element].matching.permutation.iter().position(|&p| p == position)
    }

    pub fn ambiguous_count(&self) -> usize {
        self.ambiguous.iter().filter(|&&a| a).count()
    }

    /// Labeling carried by a barycenter run (ambiguity not examined).
    pub fn from_result(result: &BarycenterResult<P>) -> Self {
        Self {
            barycenter: result.barycenter.clone(),
            representatives: result.labelings.clone(),
            ambiguous: vec![false; result.labelings.len()],
        }
    }
}

/// Number of optimal matchings inspected when looking for a second,
/// different representative.
const AMBIGUITY_PROBE: usize = 64;

/// Reorder every element by its optimal matching to `barycenter`. Elements
/// with optimal matchings that induce different representatives are flagged;
/// the lexicographically smallest matching is used for them.
pub fn index_by_barycenter<G: GroundSpace>(
    space: &G,
    ensemble: &[Configuration<G::Point>],
    barycenter: &Configuration<G::Point>,
    p: f64,
    cost_tol: Option<f64>,
) -> Result<LabeledEnsemble<G::Point>> {
    validate_ensemble(space, ensemble, barycenter)?;
    let mut representatives = Vec::with_capacity(ensemble.len());
    let mut ambiguous = Vec::with_capacity(ensemble.len());
    for s in ensemble {
        let c = cost_matrix(space, barycenter.points(), s.points(), p)?;
        let matching = solve_assignment(&c);
        let representative = s.reordered(&matching.permutation);
        let (set, _) = enumerate_optimal_truncated(&c, cost_tol, AMBIGUITY_PROBE);
        let other = set
            .matchings
            .iter()
            .any(|m| s.reordered(&m.permutation) != representative);
        representatives.push(ElementLabeling { representative, matching });
        ambiguous.push(other);
    }
    Ok(LabeledEnsemble { barycenter: barycenter.clone(), representatives, ambiguous })
}

/// Label each scalar element by sort rank; the barycenter is the vector of
/// rank-wise means.
pub fn order_statistics_labeling(ensemble: &[Configuration<Vec<f64>>]) -> Result<LabeledEnsemble<Vec<f64>>> {
    let first = ensemble.first().ok_or(Error::Empty("ensemble needs at least one element"))?;
    let k = first.k();
    let mut orders = Vec::with_capacity(ensemble.len());
    for s in ensemble {
        if s.k() != k {
            return Err(Error::SizeMismatch { expected: k, found: s.k() });
        }
        if let Some(pt) = s.iter().find(|pt| pt.len() != 1) {
            return Err(Error::DimensionMismatch { expected: 1, found: pt.len() });
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| s[a][0].total_cmp(&s[b][0]));
        orders.push(order);
    }
    let n = ensemble.len() as f64;
    let means: Vec<Vec<f64>> = (0..k)
        .map(|i| vec![ensemble.iter().zip(&orders).map(|(s, o)| s[o[i]][0]).sum::<f64>() / n])
        .collect();
    let barycenter = Configuration::new(means)?;
    let representatives = ensemble
        .iter()
        .zip(orders)
        .map(|(s, order)| {
            let cost = order
                .iter()
                .enumerate()
                .map(|(i, &j)| (barycenter[i][0] - s[j][0]).powi(2))
                .sum();
            ElementLabeling {
                representative: s.reordered(&order),
                matching: crate::assignment::Matching { permutation: order, cost },
            }
        })
        .collect();
    Ok(LabeledEnsemble { barycenter, representatives, ambiguous: vec![false; ensemble.len()] })
}

/// Discrepancy between two labelings of the same ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    /// `min_phi sum_i |B_i \ B'_phi(i)| / |B_i|`, in `[0, k]`.
    pub raw: f64,
    /// `raw / k`, the fraction of labels changed.
    pub normalized: f64,
    /// The minimizing label correspondence `i -> phi(i)`.
    pub mapping: Vec<usize>,
}

/// Assignment-minimized count of relabeled coordinates between `a` and `b`.
/// Coordinates are compared by identity (element, original position).
pub fn discrepancy<P: Clone>(a: &LabeledEnsemble<P>, b: &LabeledEnsemble<P>) -> Result<Discrepancy> {
    if a.k() != b.k() {
        return Err(Error::SizeMismatch { expected: a.k(), found: b.k() });
    }
    if a.n() != b.n() {
        return Err(Error::InvalidParameter(format!(
            "labelings cover {} and {} elements",
            a.n(),
            b.n()
        )));
    }
    discrepancy_of_groups(&a.label_groups(), &b.label_groups())
}

/// [`discrepancy`] on explicit label groups.
pub fn discrepancy_of_groups(a: &[Vec<LabelMember>], b: &[Vec<LabelMember>]) -> Result<Discrepancy> {
    let k = a.len();
    if b.len() != k {
        return Err(Error::SizeMismatch { expected: k, found: b.len() });
    }
    let sets: Vec<std::collections::BTreeSet<LabelMember>> =
        b.iter().map(|g| g.iter().copied().collect()).collect();
    let c = CostMatrix::from_fn(k, |i, j| {
        if a[i].is_empty() {
            return 0.0;
        }
        let missing = a[i].iter().filter(|m| !sets[j].contains(m)).count();
        missing as f64 / a[i].len() as f64
    })?;
    let m = solve_assignment(&c);
    Ok(Discrepancy { raw: m.cost, normalized: m.cost / k as f64, mapping: m.permutation })
}
