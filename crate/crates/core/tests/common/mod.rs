#![allow(dead_code)]

use fairfront::GroupedDataset;
use proptest::prelude::*;

/// Heap's algorithm over all `n!` permutations.
pub fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut p: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    f(&p);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            f(&p);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Minimum mean squared cost over all assignments between equal-size samples.
pub fn brute_w2_sq(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut best = f64::INFINITY;
    for_each_permutation(n, |p| {
        let cost: f64 = (0..n)
            .map(|i| a[i].iter().zip(&b[p[i]]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
            .sum();
        best = best.min(cost);
    });
    best / n as f64
}

pub fn brute_w2_1d(a: &[f64], b: &[f64]) -> f64 {
    let wrap = |v: &[f64]| v.iter().map(|&x| vec![x]).collect::<Vec<_>>();
    brute_w2_sq(&wrap(a), &wrap(b)).sqrt()
}

pub fn sample(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, n)
}

/// Two groups of equal size `n ≤ 8`.
pub fn equal_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..=8).prop_flat_map(|n| (sample(n..=n), sample(n..=n)))
}

/// Two or three 1-D groups with independent sizes.
pub fn grouped_1d() -> impl Strategy<Value = GroupedDataset> {
    prop::collection::vec(sample(1..=12), 2..=3).prop_map(|gs| {
        GroupedDataset::from_1d(gs.into_iter().enumerate().map(|(i, g)| (format!("g{i}"), g))).unwrap()
    })
}

pub fn two_equal_groups() -> impl Strategy<Value = GroupedDataset> {
    (1usize..=12)
        .prop_flat_map(|n| (sample(n..=n), sample(n..=n)))
        .prop_map(|(a, b)| GroupedDataset::from_1d([("A", a), ("B", b)]).unwrap())
}

pub fn scalar(x: f64) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_element(1, x)
}

/// Two or three 1-D groups sharing one size.
pub fn equal_size_groups() -> impl Strategy<Value = GroupedDataset> {
    (1usize..=10, 2usize..=3)
        .prop_flat_map(|(n, g)| prop::collection::vec(sample(n..=n), g))
        .prop_map(|gs| {
            GroupedDataset::from_1d(gs.into_iter().enumerate().map(|(i, g)| (format!("g{i}"), g))).unwrap()
        })
}
