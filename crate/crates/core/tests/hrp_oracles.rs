use chrono::NaiveDate;
use plab_core::analytics::{covariance, CovMatrix, ReturnTable};
use plab_core::hrp::{
    hrp_allocate, inverse_variance_weights, quasi_diag_order, recursive_bisection, single_linkage, DistanceKind,
    DistanceMatrix, MergeRecord, SeriationOrder,
};
use plab_core::linalg::Matrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("A{i}")).collect()
}

fn random_distances(rng: &mut ChaCha8Rng, n: usize) -> Matrix<f64> {
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d: f64 = rng.random_range(0.01..2.0);
            m[(i, j)] = d;
            m[(j, i)] = d;
        }
    }
    m
}

/// Naive agglomeration: cluster distance recomputed from leaf pairs every
/// step. Clusters live in slots; a merge keeps the lower slot.
fn brute_force_single_linkage(d: &Matrix<f64>) -> Vec<MergeRecord<f64>> {
    let n = d.nrows();
    let mut slots: Vec<Option<(usize, Vec<usize>)>> = (0..n).map(|i| Some((i, vec![i]))).collect();
    let mut merges = Vec::new();
    for step in 0..n - 1 {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            for j in (i + 1)..n {
                let (Some((_, a)), Some((_, b))) = (&slots[i], &slots[j]) else {
                    continue;
                };
                let link = a
                    .iter()
                    .flat_map(|&x| b.iter().map(move |&y| d[(x, y)]))
                    .fold(f64::INFINITY, f64::min);
                if best.is_none() || link < best.unwrap().2 {
                    best = Some((i, j, link));
                }
            }
        }
        let (i, j, link) = best.unwrap();
        let (ni, mut li) = slots[i].take().unwrap();
        let (nj, lj) = slots[j].take().unwrap();
        li.extend(lj);
        merges.push(MergeRecord {
            left: ni,
            right: nj,
            distance: link,
            size: li.len(),
        });
        slots[i] = Some((n + step, li));
    }
    merges
}

fn returns_from(values: Matrix<f64>) -> ReturnTable<f64> {
    let start = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
    let n = values.ncols();
    ReturnTable::new(
        (0..values.nrows()).map(|i| start + chrono::Days::new(i as u64)).collect(),
        names(n),
        values,
    )
    .unwrap()
}

fn gaussian_returns(rng: &mut ChaCha8Rng, rows: usize, vols: &[f64]) -> ReturnTable<f64> {
    returns_from(Matrix::from_fn(rows, vols.len(), |_, j| {
        let z: f64 = StandardNormal.sample(rng);
        vols[j] * z
    }))
}

#[test]
fn single_linkage_matches_brute_force() {
    for seed in 0..150u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 2 + (seed as usize % 5);
        let d = random_distances(&mut rng, n);
        let tree = single_linkage(&DistanceMatrix::new(names(n), d.clone(), DistanceKind::Custom).unwrap()).unwrap();
        assert_eq!(tree.merges, brute_force_single_linkage(&d), "seed {seed}");
    }
}

#[test]
fn single_linkage_ties_follow_brute_force() {
    // coarse grid makes ties common
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let n = 3 + (seed as usize % 4);
        let mut d = Matrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = rng.random_range(1..4) as f64;
                d[(i, j)] = v;
                d[(j, i)] = v;
            }
        }
        let tree = single_linkage(&DistanceMatrix::new(names(n), d.clone(), DistanceKind::Custom).unwrap()).unwrap();
        assert_eq!(tree.merges, brute_force_single_linkage(&d), "seed {seed}");
    }
}

#[test]
fn diagonal_covariance_gives_inverse_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for n in 1..=8 {
        for _ in 0..20 {
            let vars: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..4.0)).collect();
            let cov = CovMatrix::new(names(n), Matrix::from_diagonal(&vars)).unwrap();
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let w = recursive_bisection(&cov, &SeriationOrder::new(order).unwrap()).unwrap();
            for (a, b) in w.weights().iter().zip(inverse_variance_weights(&vars)) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn two_assets_get_inverse_variance_pair() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let r = gaussian_returns(&mut rng, 300, &[0.01, 0.03]);
    let alloc = hrp_allocate(&r).unwrap();
    let v = alloc.covariance.variances();
    let w = alloc.portfolio.weights();
    assert!((w[0] - v[1] / (v[0] + v[1])).abs() < 1e-12);
    assert!((w[1] - v[0] / (v[0] + v[1])).abs() < 1e-12);
}

#[test]
fn iid_equal_variance_gives_near_equal_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let r = gaussian_returns(&mut rng, 5000, &[0.01; 10]);
    for &w in hrp_allocate(&r).unwrap().portfolio.weights() {
        assert!((w - 0.1).abs() < 0.01, "weight {w}");
    }
}

#[test]
fn independent_assets_approach_inverse_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let vols = [0.005, 0.01, 0.015, 0.02, 0.008, 0.012];
    let r = gaussian_returns(&mut rng, 5000, &vols);
    let ivp = inverse_variance_weights(&vols.map(|v| v * v));
    for (w, target) in hrp_allocate(&r).unwrap().portfolio.weights().iter().zip(ivp) {
        assert!((w / target - 1.0).abs() < 0.1, "{w} vs {target}");
    }
}

/// Returns driven by a few factors so correlations vary across assets.
fn factor_returns(seed: u64, rows: usize, n: usize) -> ReturnTable<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = 3;
    let loads: Vec<f64> = (0..n * k).map(|_| rng.random_range(-1.0..1.0)).collect();
    let vols: Vec<f64> = (0..n).map(|_| rng.random_range(0.002..0.03)).collect();
    let mut values = Matrix::zeros(rows, n);
    for t in 0..rows {
        let f: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
        for j in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            let common: f64 = (0..k).map(|c| loads[j * k + c] * f[c]).sum();
            values[(t, j)] = vols[j] * (common + z);
        }
    }
    returns_from(values)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn weights_positive_and_sum_to_one(seed in any::<u64>(), n in 2usize..12, rows in 3usize..80) {
        let r = factor_returns(seed, rows, n);
        let w = hrp_allocate(&r).unwrap().portfolio.weights().to_vec();
        prop_assert!(w.iter().all(|&x| x > 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

proptest! {
    #[test]
    fn block_structure_stays_contiguous(
        seed in any::<u64>(),
        blocks in prop::collection::vec(0usize..3, 2..10),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = blocks.len();
        let mut d = Matrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = if blocks[i] == blocks[j] {
                    rng.random_range(0.1..1.0)
                } else {
                    rng.random_range(2.0..3.0)
                };
                d[(i, j)] = v;
                d[(j, i)] = v;
            }
        }
        let tree = single_linkage(&DistanceMatrix::new(names(n), d, DistanceKind::Custom).unwrap()).unwrap();
        let order = quasi_diag_order(&tree).unwrap();
        let labels: Vec<usize> = order.as_slice().iter().map(|&i| blocks[i]).collect();
        let mut runs = labels.clone();
        runs.dedup();
        let mut distinct = labels.clone();
        distinct.sort_unstable();
        distinct.dedup();
        prop_assert_eq!(runs.len(), distinct.len(), "order {:?} splits a block", labels);
    }

    #[test]
    fn linkage_is_label_equivariant(seed in any::<u64>(), n in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_distances(&mut rng, n);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        // asset perm[i] of the permuted problem is asset i of the original
        let dp = Matrix::from_fn(n, n, |i, j| d[(perm[i], perm[j])]);
        let leaf_sets = |m: &Matrix<f64>, relabel: &dyn Fn(usize) -> usize| {
            let tree = single_linkage(&DistanceMatrix::new(names(n), m.clone(), DistanceKind::Custom).unwrap()).unwrap();
            let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![relabel(i)]).collect();
            let mut out = Vec::new();
            for rec in &tree.merges {
                let mut s = [members[rec.left].clone(), members[rec.right].clone()].concat();
                s.sort_unstable();
                members.push(s.clone());
                out.push((rec.distance, s));
            }
            out
        };
        prop_assert_eq!(leaf_sets(&d, &|i| i), leaf_sets(&dp, &|i| perm[i]));
    }

    #[test]
    fn paired_weights_are_label_equivariant(seed in any::<u64>(), use_two in any::<bool>()) {
        // trees with N = 2 or shape ((a,b),(c,d)) split along the tree
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = if use_two { 2 } else { 4 };
        let rows = 400;
        let vols: Vec<f64> = (0..n).map(|_| rng.random_range(0.005..0.03)).collect();
        let mut values = Matrix::zeros(rows, n);
        for t in 0..rows {
            let f: [f64; 2] = [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)];
            for j in 0..n {
                let z: f64 = StandardNormal.sample(&mut rng);
                values[(t, j)] = vols[j] * (2.0 * f[j / 2] + 0.3 * z);
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let base = hrp_allocate(&returns_from(values.clone())).unwrap();
        let permuted = hrp_allocate(&returns_from(Matrix::from_fn(rows, n, |t, j| values[(t, perm[j])]))).unwrap();
        for (j, &pj) in perm.iter().enumerate() {
            let a = permuted.portfolio.weights()[j];
            let b = base.portfolio.weights()[pj];
            prop_assert!((a - b).abs() < 1e-12, "asset {}: {} vs {}", j, a, b);
        }
    }
}

#[test]
fn pipeline_reuses_its_own_order() {
    let r = factor_returns(3, 200, 6);
    let alloc = hrp_allocate(&r).unwrap();
    let again = recursive_bisection(&covariance(&r).unwrap(), &alloc.order).unwrap();
    assert_eq!(again, alloc.portfolio);
}
