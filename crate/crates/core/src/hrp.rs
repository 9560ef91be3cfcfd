//! Hierarchical Risk Parity.
//!
//! The pipeline runs in three stages:
//!
//! 1. **Tree clustering.** Correlations become distances
//!    `d(i,j) = sqrt((1 - rho(i,j)) / 2)`, then co-distances (the Euclidean
//!    distance between columns of `d`). Single-linkage agglomeration on the
//!    co-distances produces a binary tree.
//! 2. **Quasi-diagonalization.** A depth-first walk of the tree yields a leaf
//!    order that places similar assets next to each other.
//! 3. **Recursive bisection.** Starting from unit weights, the ordered list
//!    is halved repeatedly. Each half gets an inverse-variance cluster
//!    variance `V`, and the halves are scaled by `1 - V1/(V1+V2)` and
//!    `1 - V2/(V1+V2)` respectively.

use serde::{Deserialize, Serialize};

use crate::analytics::{correlation, covariance, CorrMatrix, CovMatrix, ReturnTable};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::mvp::Portfolio;
use crate::scalar::{variance_floor, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    /// `sqrt((1 - rho) / 2)`.
    Correlation,
    /// Euclidean distance between columns of a correlation-distance matrix.
    CoDistance,
    /// Caller-supplied distances.
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix<T> {
    tickers: Vec<String>,
    values: Matrix<T>,
    kind: DistanceKind,
}

impl<T: Scalar> DistanceMatrix<T> {
    /// Validates symmetry (1e-12), a zero diagonal and non-negative finite entries.
    pub fn new(tickers: Vec<String>, values: Matrix<T>, kind: DistanceKind) -> Result<Self> {
        if !values.is_square() || values.nrows() != tickers.len() {
            return Err(Error::Dimension(format!(
                "{}x{} distances for {} tickers",
                values.nrows(),
                values.ncols(),
                tickers.len()
            )));
        }
        if values.max_asymmetry() > T::lit(1e-12) {
            return Err(Error::Invalid("distance matrix is not symmetric".into()));
        }
        if values.diagonal().iter().any(|&v| v != T::zero()) {
            return Err(Error::Invalid("distance diagonal must be zero".into()));
        }
        if values.as_slice().iter().any(|&v| !(v >= T::zero()) || !v.is_finite()) {
            return Err(Error::Invalid("distances must be finite and non-negative".into()));
        }
        Ok(Self {
            tickers,
            values,
            kind,
        })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn kind(&self) -> DistanceKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.tickers.len()
    }
}

pub fn corr_distance<T: Scalar>(corr: &CorrMatrix<T>) -> DistanceMatrix<T> {
    let rho = corr.values();
    let half = T::lit(0.5);
    let values = Matrix::from_fn(corr.dim(), corr.dim(), |i, j| {
        if i == j {
            T::zero()
        } else {
            (half * (T::one() - rho[(i, j)])).max(T::zero()).sqrt()
        }
    });
    DistanceMatrix {
        tickers: corr.tickers().to_vec(),
        values,
        kind: DistanceKind::Correlation,
    }
}

pub fn codistance<T: Scalar>(d: &DistanceMatrix<T>) -> DistanceMatrix<T> {
    let n = d.dim();
    let v = d.values();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let s: T = (0..n)
                .map(|k| {
                    let diff = v[(k, i)] - v[(k, j)];
                    diff * diff
                })
                .sum();
            out[(i, j)] = s.sqrt();
            out[(j, i)] = out[(i, j)];
        }
    }
    DistanceMatrix {
        tickers: d.tickers.clone(),
        values: out,
        kind: DistanceKind::CoDistance,
    }
}

/// One agglomeration step. Leaves are nodes `0..n`, the cluster created by
/// merge `k` is node `n + k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord<T> {
    pub left: usize,
    pub right: usize,
    pub distance: T,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkageTree<T> {
    pub n_leaves: usize,
    pub merges: Vec<MergeRecord<T>>,
}

impl<T: Scalar> LinkageTree<T> {
    /// Checks merge count, child references and cluster sizes.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_leaves;
        if n == 0 || self.merges.len() != n - 1 {
            return Err(Error::Invalid(format!(
                "{} merges for {n} leaves",
                self.merges.len()
            )));
        }
        let mut size = vec![1usize; n];
        let mut used = vec![false; 2 * n - 1];
        for (k, m) in self.merges.iter().enumerate() {
            for child in [m.left, m.right] {
                if child >= n + k || used[child] {
                    return Err(Error::Invalid(format!("merge {k} reuses or forward-references node {child}")));
                }
                used[child] = true;
            }
            if m.size != size[m.left] + size[m.right] {
                return Err(Error::Invalid(format!("merge {k} has wrong size {}", m.size)));
            }
            size.push(m.size);
        }
        Ok(())
    }

    pub fn root(&self) -> usize {
        2 * self.n_leaves - 2
    }

    fn children(&self, node: usize) -> Option<(usize, usize)> {
        node.checked_sub(self.n_leaves)
            .map(|k| (self.merges[k].left, self.merges[k].right))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkageMethod {
    /// Minimum pairwise distance; the method used for allocation.
    #[default]
    Single,
    /// Ward minimum-variance update, offered only for dendrogram export.
    Ward,
}

/// Single-linkage agglomerative clustering.
///
/// Clusters live in the slots of the distance matrix. Each step merges the
/// closest active pair `(i, j)`, `i < j`, ties going to the
/// lexicographically smallest pair. The merged cluster takes slot `i` and
/// its distance to every other slot `k` becomes `min(d(k,i), d(k,j))`.
pub fn single_linkage<T: Scalar>(d: &DistanceMatrix<T>) -> Result<LinkageTree<T>> {
    linkage(d, LinkageMethod::Single)
}

pub fn linkage<T: Scalar>(d: &DistanceMatrix<T>, method: LinkageMethod) -> Result<LinkageTree<T>> {
    let n = d.dim();
    if n == 0 {
        return Err(Error::Invalid("cannot cluster zero assets".into()));
    }
    let mut dist = d.values().clone();
    let mut active = vec![true; n];
    let mut node: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut merges = Vec::with_capacity(n - 1);

    for step in 0..n - 1 {
        let mut best: Option<(usize, usize, T)> = None;
        for i in (0..n).filter(|&i| active[i]) {
            for j in ((i + 1)..n).filter(|&j| active[j]) {
                if best.is_none_or(|(_, _, b)| dist[(i, j)] < b) {
                    best = Some((i, j, dist[(i, j)]));
                }
            }
        }
        let (i, j, dij) = best.expect("at least two active clusters");
        merges.push(MergeRecord {
            left: node[i],
            right: node[j],
            distance: dij,
            size: size[i] + size[j],
        });
        for k in (0..n).filter(|&k| active[k] && k != i && k != j) {
            let updated = match method {
                LinkageMethod::Single => dist[(k, i)].min(dist[(k, j)]),
                LinkageMethod::Ward => {
                    let (ni, nj, nk) = (
                        T::from_count(size[i]),
                        T::from_count(size[j]),
                        T::from_count(size[k]),
                    );
                    let sq = ((ni + nk) * dist[(k, i)].powi(2) + (nj + nk) * dist[(k, j)].powi(2)
                        - nk * dij * dij)
                        / (ni + nj + nk);
                    sq.max(T::zero()).sqrt()
                }
            };
            dist[(k, i)] = updated;
            dist[(i, k)] = updated;
        }
        active[j] = false;
        node[i] = n + step;
        size[i] += size[j];
    }
    Ok(LinkageTree { n_leaves: n, merges })
}

/// Leaf permutation placing similar assets next to each other.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriationOrder {
    order: Vec<usize>,
}

impl SeriationOrder {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &i in &order {
            if i >= order.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Invalid(format!("{order:?} is not a permutation")));
            }
        }
        Ok(Self { order })
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.order
    }
}

/// Depth-first leaf order of the tree, left subtree before right.
pub fn quasi_diag_order<T: Scalar>(tree: &LinkageTree<T>) -> Result<SeriationOrder> {
    tree.validate()?;
    let mut order = Vec::with_capacity(tree.n_leaves);
    let mut stack = vec![tree.root()];
    while let Some(node) = stack.pop() {
        match tree.children(node) {
            Some((left, right)) => {
                stack.push(right);
                stack.push(left);
            }
            None => order.push(node),
        }
    }
    SeriationOrder::new(order)
}

/// Inverse-variance weights, variances floored at 1e-12.
pub fn inverse_variance_weights<T: Scalar>(variances: &[T]) -> Vec<T> {
    let floor = variance_floor::<T>();
    let inv: Vec<T> = variances.iter().map(|&v| T::one() / v.max(floor)).collect();
    let total: T = inv.iter().copied().sum();
    inv.into_iter().map(|x| x / total).collect()
}

/// Variance of the inverse-variance portfolio on a cluster's covariance block.
pub fn cluster_variance<T: Scalar>(cov_sub: &CovMatrix<T>) -> Result<T> {
    if cov_sub.dim() == 0 {
        return Err(Error::Invalid("empty cluster".into()));
    }
    let w = inverse_variance_weights(&cov_sub.variances());
    let m = cov_sub.values();
    let mut v = T::zero();
    for (i, &wi) in w.iter().enumerate() {
        for (j, &wj) in w.iter().enumerate() {
            v = v + wi * m[(i, j)] * wj;
        }
    }
    Ok(v)
}

/// Top-down allocation over the seriated order; each list is split into
/// `ceil(n/2)` leading and `floor(n/2)` trailing members.
pub fn recursive_bisection<T: Scalar>(cov: &CovMatrix<T>, order: &SeriationOrder) -> Result<Portfolio<T>> {
    let n = cov.dim();
    if order.as_slice().len() != n {
        return Err(Error::Dimension(format!(
            "order of length {} for {n} assets",
            order.as_slice().len()
        )));
    }
    let floor = variance_floor::<T>();
    let mut weights = vec![T::one(); n];
    let mut pending: Vec<&[usize]> = vec![order.as_slice()];
    while let Some(cluster) = pending.pop() {
        if cluster.len() < 2 {
            continue;
        }
        let (left, right) = cluster.split_at(cluster.len().div_ceil(2));
        let v1 = cluster_variance(&cov.select(left))?.max(floor);
        let v2 = cluster_variance(&cov.select(right))?.max(floor);
        let alpha = T::one() - v1 / (v1 + v2);
        for &i in left {
            weights[i] = weights[i] * alpha;
        }
        for &i in right {
            weights[i] = weights[i] * (T::one() - alpha);
        }
        pending.push(right);
        pending.push(left);
    }
    Portfolio::new(cov.tickers().to_vec(), weights)
}

/// Every intermediate product of the pipeline, for reporting and export.
#[derive(Debug, Clone)]
pub struct HrpAllocation<T> {
    pub covariance: CovMatrix<T>,
    pub correlation: CorrMatrix<T>,
    pub distance: DistanceMatrix<T>,
    pub codistance: DistanceMatrix<T>,
    pub tree: LinkageTree<T>,
    pub order: SeriationOrder,
    pub portfolio: Portfolio<T>,
}

pub fn hrp_allocate<T: Scalar>(returns: &ReturnTable<T>) -> Result<HrpAllocation<T>> {
    if returns.n_assets() < 2 {
        return Err(Error::InsufficientData("HRP needs at least 2 assets".into()));
    }
    let covariance = covariance(returns)?;
    let correlation = correlation(returns)?;
    let distance = corr_distance(&correlation);
    let codistance = codistance(&distance);
    let tree = single_linkage(&codistance)?;
    let order = quasi_diag_order(&tree)?;
    let portfolio = recursive_bisection(&covariance, &order)?;
    Ok(HrpAllocation {
        covariance,
        correlation,
        distance,
        codistance,
        tree,
        order,
        portfolio,
    })
}

pub fn hrp_weights<T: Scalar>(returns: &ReturnTable<T>) -> Result<Portfolio<T>> {
    hrp_allocate(returns).map(|a| a.portfolio)
}
