//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p fairfront-cli --test acceptance`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::type_complexity)]

use std::f64::consts::SQRT_2;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use fairfront::certify::Probe;
use fairfront::{
    bures_fixed_point, certify_composition_ed, certify_composition_lip, certify_frontier,
    certify_lipschitz_barycenter, displacement_sup, empirical_if_check, fit_affine_barycenter,
    fit_quantile_barycenter, frontier, synth_gaussian, w2_1d, w2_exact_small, wasserstein_disparity,
    BarycenterModel, DisparityMethod, FixedPointOptions, GaussianGroup, GroupMap, GroupedDataset, IfBudget,
    ParetoMap, SyntheticSpec, Verdict,
};
use fairfront_cli::ols::fit_ols;
use fairfront_cli::svg::band_d_min;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn s(x: f64) -> DVector<f64> {
    DVector::from_element(1, x)
}

fn two_point() -> (GroupedDataset, BarycenterModel) {
    let ds = GroupedDataset::from_1d([("A", vec![0.0, 2.0]), ("B", vec![1.0, 3.0])]).unwrap();
    let m = fit_quantile_barycenter(&ds).unwrap();
    (ds, m)
}

fn gaussian_pair(n: usize, seed: u64) -> GroupedDataset {
    synth_gaussian(&SyntheticSpec {
        groups: vec![
            GaussianGroup::univariate("A", 0.0, 1.0, n),
            GaussianGroup::univariate("B", 2.0, 1.0, n),
        ],
        seed,
    })
    .unwrap()
}

/// Minimum mean squared cost over all `n!` matchings (Heap's algorithm).
fn brute_w2(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut p: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    let cost = |p: &[usize]| (0..n).map(|i| (a[i] - b[p[i]]).powi(2)).sum::<f64>();
    let mut best = cost(&p);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            best = best.min(cost(&p));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    (best / n as f64).sqrt()
}

fn pooled_values(ds: &GroupedDataset) -> Vec<f64> {
    let mut v: Vec<f64> = ds.iter().flat_map(|(_, m)| m.iter().copied().collect::<Vec<_>>()).collect();
    v.sort_by(f64::total_cmp);
    v
}

fn labels(ds: &GroupedDataset) -> Vec<String> {
    ds.labels().map(String::from).collect()
}

/// Sample pairs within `eps` that can realise the worst output gap.
///
/// Every `f_d(·, z)` is non-decreasing in 1-D, so over the window
/// `[y - eps, y + eps]` the gap to `f_d(y, z1)` peaks at the window's
/// smallest or largest sample. Checking those two partners per sample covers
/// every sample pair exactly.
fn window_pairs(values: &[f64], eps: f64) -> Vec<(DVector<f64>, DVector<f64>)> {
    let mut out = Vec::with_capacity(values.len() * 2);
    let (mut lo, mut hi) = (0usize, 0usize);
    for &y in values {
        while values[lo] < y - eps {
            lo += 1;
        }
        while hi + 1 < values.len() && values[hi + 1] <= y + eps {
            hi += 1;
        }
        out.push((s(y), s(values[lo])));
        out.push((s(y), s(values[hi])));
    }
    out
}

fn all_pairs(values: &[f64]) -> Vec<(DVector<f64>, DVector<f64>)> {
    values
        .iter()
        .flat_map(|&a| values.iter().map(move |&b| (s(a), s(b))))
        .collect()
}

fn random_pairs(rng: &mut ChaCha8Rng, lo: f64, hi: f64, eps: f64, n: usize) -> Vec<(DVector<f64>, DVector<f64>)> {
    (0..n)
        .map(|_| {
            let a = rng.random_range(lo..=hi);
            let b = (a + rng.random_range(-eps..=eps)).clamp(lo, hi);
            (s(a), s(b))
        })
        .collect()
}

/// Tolerances from `d_min` up to past `sqrt(2) V`.
fn certified_grid(d_min: f64, v: f64) -> Vec<f64> {
    let top = (SQRT_2 * v).max(d_min);
    let mut g: Vec<f64> = (0..=4).map(|i| d_min + (top - d_min) * i as f64 / 4.0).collect();
    g.push(top * 1.5 + 0.1);
    g
}

fn violations(model: &BarycenterModel, d: f64, probes: &[Probe], eps: f64, delta: f64) -> Result<usize, String> {
    let map = ParetoMap::new(model, d).map_err(|e| e.to_string())?;
    let r = empirical_if_check(|y, z| map.apply(y, z), probes, IfBudget::EpsilonDelta { epsilon: eps, delta })
        .map_err(|e| e.to_string())?;
    Ok(r.violations)
}

fn criterion_1() -> Outcome {
    let (ds, m) = two_point();
    let v = m.projection_loss();
    let d = wasserstein_disparity(&ds, DisparityMethod::Quantile1d).unwrap().disparity;
    ensure!(v == 0.5, "V = {v}");
    ensure!(close(d, 1.0 / SQRT_2, 1e-10), "D = {d}");
    ensure!(close(SQRT_2 * v, d, 1e-10), "sqrt(2) V = {} vs D = {d}", SQRT_2 * v);
    let scale = SQRT_2 * v;
    let pts = frontier(&ds, &m, &[0.0, scale / 2.0, scale]).unwrap();
    let want_loss = [0.5, 0.25, 0.0];
    let want_d = [0.0, scale / 2.0, scale];
    for (i, p) in pts.iter().enumerate() {
        ensure!(close(p.l2_loss, want_loss[i], 1e-10), "loss[{i}] = {}", p.l2_loss);
        ensure!(close(p.measured_disparity, want_d[i], 1e-10), "disparity[{i}] = {}", p.measured_disparity);
    }
    Ok(format!("V = {v}, D = {d:.12}, losses {want_loss:?}"))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let n = rng.random_range(1..=8);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let oracle = brute_w2(&a, &b);
        let fast = w2_1d(&a, &b).unwrap();
        let col = |v: &[f64]| DMatrix::from_column_slice(v.len(), 1, v);
        let dp = w2_exact_small(&col(&a), &col(&b)).unwrap();
        ensure!(close(fast, oracle, 1e-12), "case {case}: w2_1d {fast} vs oracle {oracle}");
        ensure!(close(dp, oracle, 1e-12), "case {case}: w2_exact_small {dp} vs oracle {oracle}");

        // barycenter cost: each group matched optimally onto the common image
        let ds = GroupedDataset::from_1d([("A", a.clone()), ("B", b.clone())]).unwrap();
        let m = fit_quantile_barycenter(&ds).unwrap();
        let image: Vec<f64> = a.iter().map(|&y| m.apply(&s(y), "A").unwrap()[0]).collect();
        let cost = (0.5 * brute_w2(&a, &image).powi(2) + 0.5 * brute_w2(&b, &image).powi(2)).sqrt();
        ensure!(
            close(m.projection_loss(), cost, 1e-12),
            "case {case}: V {} vs assignment cost {cost}",
            m.projection_loss()
        );
        worst = worst.max((fast - oracle).abs()).max((m.projection_loss() - cost).abs());
    }
    Ok(format!("200 datasets, max deviation {worst:.2e}"))
}

fn criterion_3() -> Outcome {
    let ds = gaussian_pair(10_000, 7);
    let m = fit_affine_barycenter(&ds).unwrap();
    let mut worst: f64 = 0.0;
    for (_, g) in m.maps() {
        let GroupMap::Affine(a) = g else { return Err("expected affine maps".into()) };
        worst = worst.max((&a.linear - DMatrix::identity(1, 1)).norm());
    }
    ensure!(worst <= 0.05, "‖A_z − I‖ = {worst}");
    let stats = displacement_sup(&m, &ds, None).unwrap();
    let v = m.projection_loss();
    let d = wasserstein_disparity(&ds, DisparityMethod::Bures).unwrap().disparity;
    ensure!((0.95..=1.05).contains(&stats.l_emp), "L_emp = {}", stats.l_emp);
    ensure!((0.95..=1.05).contains(&v), "V = {v}");
    ensure!((SQRT_2 * 0.95..=SQRT_2 * 1.05).contains(&d), "D = {d}");
    let bary = bures_fixed_point(
        &[DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 4.0)],
        &[0.5, 0.5],
        FixedPointOptions::default(),
    )
    .unwrap();
    ensure!(close(bary[(0, 0)], 2.25, 1e-8), "Bures barycenter = {}", bary[(0, 0)]);
    Ok(format!("‖A−I‖ = {worst:.4}, L_emp = {:.4}, V = {v:.4}, D = {d:.4}", stats.l_emp))
}

fn criterion_4() -> Outcome {
    let base = vec![1.0, 2.0, 5.0, -3.0];
    let mut rev = base.clone();
    rev.reverse();
    let shifted: Vec<f64> = base.iter().map(|y| y + 0.5).collect();
    let cases_1d = [
        ("identical", vec![base.clone(), rev.clone(), base.clone()], true),
        ("one shifted", vec![base.clone(), rev.clone(), shifted.clone()], false),
        ("all shifted apart", vec![base.clone(), shifted], false),
    ];
    let mut checked = 0;
    for (name, groups, fair) in cases_1d {
        let ds = GroupedDataset::from_1d(groups.into_iter().enumerate().map(|(i, g)| (format!("g{i}"), g))).unwrap();
        for method in [DisparityMethod::Quantile1d, DisparityMethod::Bures] {
            let r = wasserstein_disparity(&ds, method).unwrap();
            let all_zero = r.pairwise.iter().flatten().all(|&w| w <= 1e-10);
            let d_zero = r.disparity <= 1e-10;
            ensure!(d_zero == all_zero, "{name} ({method}): D = {} but pairwise {:?}", r.disparity, r.pairwise);
            ensure!(d_zero == fair, "{name} ({method}): D = {}", r.disparity);
            checked += 1;
        }
    }
    let pts = [[0.0, 0.0], [1.0, 2.0], [3.0, -1.0], [2.0, 2.0]];
    for (name, offset, fair) in [("2-D identical", 0.0, true), ("2-D shifted", 1.0, false)] {
        let rows = pts
            .iter()
            .map(|p| ("a", p.to_vec()))
            .chain(pts.iter().rev().map(|p| ("b", vec![p[0] + offset, p[1]])));
        let ds = GroupedDataset::from_rows(2, rows).unwrap();
        for method in [DisparityMethod::Bures, DisparityMethod::ExactAssignment] {
            let r = wasserstein_disparity(&ds, method).unwrap();
            let all_zero = r.pairwise.iter().flatten().all(|&w| w <= 1e-10);
            ensure!((r.disparity <= 1e-10) == all_zero, "{name} ({method}): inconsistent");
            ensure!((r.disparity <= 1e-10) == fair, "{name} ({method}): D = {}", r.disparity);
            checked += 1;
        }
    }
    Ok(format!("{checked} dataset/method pairs, both directions"))
}

fn soundness_on(
    ds: &GroupedDataset,
    model: &BarycenterModel,
    l: f64,
    eps: f64,
    delta: f64,
    domain: (f64, f64),
    rng: &mut ChaCha8Rng,
    windowed: bool,
) -> Result<(f64, usize), String> {
    let v = model.projection_loss();
    let cert = certify_frontier(eps, delta, l, v).map_err(|e| e.to_string())?;
    if !cert.d_min.is_finite() {
        return Ok((cert.d_min, 0));
    }
    let values = pooled_values(ds);
    let mut pairs = if windowed {
        window_pairs(&values, eps)
    } else {
        all_pairs(&values)
    };
    pairs.extend(random_pairs(rng, domain.0, domain.1, eps, 1000));
    let probes = Probe::all_label_pairs(pairs, &labels(ds));
    for d in certified_grid(cert.d_min, v) {
        let bad = violations(model, d, &probes, eps, delta)?;
        if bad > 0 {
            return Err(format!(
                "eps {eps}, delta {delta}, L {l}, V {v}: d = {d} (d_min {}) has {bad} violations",
                cert.d_min
            ));
        }
    }
    Ok((cert.d_min, probes.len()))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut probes_checked = 0usize;
    let mut certified = 0usize;

    for _ in 0..50 {
        let groups = rng.random_range(2..=3);
        let scale = rng.random_range(0.2..5.0);
        let ds = GroupedDataset::from_1d((0..groups).map(|g| {
            let n = rng.random_range(3..=30);
            let shift = rng.random_range(-2.0..2.0) * scale;
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-scale..scale) + shift).collect();
            (format!("g{g}"), v)
        }))
        .unwrap();
        let model = fit_quantile_barycenter(&ds).unwrap();
        let l = displacement_sup(&model, &ds, None).unwrap().l_emp;
        let eps = rng.random_range(0.01..1.0) * scale;
        let delta = eps + rng.random_range(-0.2..2.5) * l;
        let delta = delta.max(1e-3);
        let (lo, hi) = (values_min(&ds) - 2.0 * scale, values_max(&ds) + 2.0 * scale);
        let (d_min, n) = soundness_on(&ds, &model, l, eps, delta, (lo, hi), &mut rng, false)?;
        probes_checked += n;
        certified += d_min.is_finite() as usize;
    }

    let (ds, model) = two_point();
    for (eps, delta) in [(0.1, 0.35), (0.25, 1.25), (0.3, 0.3), (0.05, 0.6)] {
        let (_, n) = soundness_on(&ds, &model, 0.5, eps, delta, (-3.0, 6.0), &mut rng, false)?;
        probes_checked += n;
    }

    let gauss = gaussian_pair(10_000, 7);
    let quantile = fit_quantile_barycenter(&gauss).unwrap();
    let lq = displacement_sup(&quantile, &gauss, None).unwrap().l_emp;
    let affine = fit_affine_barycenter(&gauss).unwrap();
    let stats = displacement_sup(&affine, &gauss, None).unwrap();
    let lb = stats.l_bound.unwrap();
    let y_sup = stats.y_sup.unwrap();
    for (eps, delta) in [(0.1, 0.5), (0.2, 1.5), (0.05, 3.0)] {
        let (_, n) = soundness_on(&gauss, &quantile, lq, eps, delta, (-8.0, 10.0), &mut rng, true)?;
        probes_checked += n;
        let (_, n) = soundness_on(&gauss, &affine, lb, eps, delta, (-y_sup, y_sup), &mut rng, true)?;
        probes_checked += n;
    }

    // branch boundaries; each (eps, delta, L) satisfies delta - eps == 2L in floating point
    for (eps, delta, l, v) in [(0.25, 1.25, 0.5, 0.5), (0.5, 2.0, 0.75, 0.272), (1.0, 1.25, 0.125, 3.0)] {
        ensure!(delta - eps == 2.0 * l, "({eps}, {delta}, {l}) is not on the boundary");
        let c0 = certify_frontier(eps, eps, l, v).unwrap();
        ensure!(c0.d_min == SQRT_2 * v, "delta = eps gave {}", c0.d_min);
        let c2 = certify_frontier(eps, delta, l, v).unwrap();
        ensure!(c2.d_min == 0.0, "delta - eps = 2L gave {}", c2.d_min);
    }
    Ok(format!(
        "{certified}/50 random configurations certified; {probes_checked} probe pairs, each at 6 tolerances, 0 violations"
    ))
}

fn values_min(ds: &GroupedDataset) -> f64 {
    ds.iter().map(|(_, m)| m.min()).fold(f64::INFINITY, f64::min)
}

fn values_max(ds: &GroupedDataset) -> f64 {
    ds.iter().map(|(_, m)| m.max()).fold(f64::NEG_INFINITY, f64::max)
}

fn criterion_6() -> Outcome {
    let mut instances: Vec<(&str, GroupedDataset, BarycenterModel)> = Vec::new();
    let (ds, m) = two_point();
    instances.push(("two-point", ds, m));
    let g = gaussian_pair(200, 3);
    let ga = fit_affine_barycenter(&g).unwrap();
    instances.push(("gaussian affine", g.clone(), ga));
    let gq = fit_quantile_barycenter(&g).unwrap();
    instances.push(("gaussian quantile", g, gq));
    let g2 = synth_gaussian(&SyntheticSpec {
        groups: vec![
            GaussianGroup {
                label: "u".into(),
                mean: vec![0.0, 0.0],
                cov: vec![vec![1.0, 0.2], vec![0.2, 0.5]],
                n: 300,
            },
            GaussianGroup {
                label: "w".into(),
                mean: vec![1.0, -1.0],
                cov: vec![vec![2.0, 0.0], vec![0.0, 1.0]],
                n: 300,
            },
        ],
        seed: 4,
    })
    .unwrap();
    let m2 = fit_affine_barycenter(&g2).unwrap();
    instances.push(("2-D affine", g2, m2));

    for (name, ds, m) in &instances {
        let cert = certify_lipschitz_barycenter(ds, m).unwrap();
        ensure!(cert.verdict == Verdict::Incompatible, "{name}: verdict {}", cert.verdict);
        let pairs: Vec<_> = ds
            .iter()
            .flat_map(|(_, mat)| mat.row_iter().map(|r| (r.transpose(), r.transpose())).collect::<Vec<_>>())
            .collect();
        let probes = Probe::all_label_pairs(pairs, &labels(ds));
        let r = empirical_if_check(|y, z| m.apply(y, z), &probes, IfBudget::Lipschitz { k: 1e6 }).unwrap();
        ensure!(r.max_ratio.is_infinite(), "{name}: max ratio {}", r.max_ratio);
        let w = r.same_input_witness.ok_or(format!("{name}: no witness"))?;
        let p = &probes[w];
        let gap = (m.apply(&p.x1, &p.z1).unwrap() - m.apply(&p.x2, &p.z2).unwrap()).norm();
        ensure!(p.x1 == p.x2 && gap > 0.0, "{name}: witness is not a same-y pair");
    }
    Ok(format!("{} instances incompatible with same-y witnesses", instances.len()))
}

fn criterion_7() -> Outcome {
    // hand evaluations
    let hand = [
        (
            certify_composition_ed(0.5, 1.0, 0.4, 0.9, 0.5, fairfront::CompositionMode::Post),
            SQRT_2 * 0.5 * (1.0 - 0.6 / 1.8),
        ),
        (
            certify_composition_ed(0.5, 1.0, 0.2, 0.4, 0.5, fairfront::CompositionMode::Post),
            0.0,
        ),
        (
            certify_composition_ed(0.2, 1.0, 0.5, 0.1, 0.5, fairfront::CompositionMode::Pre),
            0.0,
        ),
        (
            certify_composition_lip(1.0, 1.0, 0.1265, 0.959, 0.272, fairfront::CompositionMode::Post),
            SQRT_2 * 0.272 * (1.0 - (1.0 - 0.1265) / 1.918),
        ),
        (
            certify_composition_lip(0.5, 1.0, 2.0, 0.3, 0.4, fairfront::CompositionMode::Post),
            SQRT_2 * 0.4,
        ),
        (
            certify_composition_lip(0.1, 1.0, 1.0, 0.2, 0.4, fairfront::CompositionMode::Pre),
            0.0,
        ),
    ];
    for (i, (got, want)) in hand.iter().enumerate() {
        let got = got.as_ref().map_err(|e| format!("case {i}: {e}"))?;
        ensure!(close(got.d_min, *want, 1e-12), "case {i}: d_min {} vs {want}", got.d_min);
    }
    ensure!(close(hand[0].1, 0.47140, 1e-5) && close(hand[3].1, 0.20948, 1e-5), "rounded examples differ");
    ensure!(
        certify_composition_lip(1.0, 1.0, 1.5, 0.3, 0.4, fairfront::CompositionMode::Post).is_err(),
        "K > delta/eps accepted"
    );

    // f_d ∘ g for a fitted linear g
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 400;
    let mut x = DMatrix::zeros(n, 2);
    let mut y = DMatrix::zeros(n, 1);
    let mut z = Vec::new();
    for i in 0..n {
        let grp = if i % 2 == 0 { "A" } else { "B" };
        let shift = if grp == "A" { 0.0 } else { 1.2 };
        x[(i, 0)] = rng.random_range(-2.0..2.0) + shift;
        x[(i, 1)] = rng.random_range(-2.0..2.0);
        y[(i, 0)] = 0.6 * x[(i, 0)] - 0.3 * x[(i, 1)] + rng.random_range(-0.1..0.1);
        z.push(grp);
    }
    let g = fit_ols(&x, &y).map_err(|e| e.to_string())?;
    let k = g.lipschitz();
    let preds = GroupedDataset::from_rows(
        1,
        (0..n).map(|i| (z[i], vec![g.predict(&x.row(i).transpose())[0]])),
    )
    .unwrap();
    let model = fit_quantile_barycenter(&preds).unwrap();
    let l = displacement_sup(&model, &preds, None).unwrap().l_emp;
    let v = model.projection_loss();

    let mut pairs = Vec::new();
    let lattice: Vec<DVector<f64>> = (0..=24)
        .flat_map(|i| (0..=24).map(move |j| DVector::from_vec(vec![-4.0 + i as f64 / 3.0, -4.0 + j as f64 / 3.0])))
        .collect();
    let lbl = vec!["A".to_string(), "B".to_string()];
    let mut checked = 0;
    for (eps, delta) in [(0.3, 0.5), (0.5, 1.2), (0.2, 2.0)] {
        pairs.clear();
        for a in &lattice {
            for b in &lattice {
                if (a - b).norm() <= eps {
                    pairs.push((a.clone(), b.clone()));
                }
            }
        }
        for _ in 0..1000 {
            let a = DVector::from_fn(2, |_, _| rng.random_range(-4.0..4.0));
            let dir = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0)).normalize();
            pairs.push((a.clone(), a + dir * rng.random_range(0.0..=eps)));
        }
        let probes = Probe::all_label_pairs(pairs.clone(), &lbl);
        let lip = certify_composition_lip(eps, delta, k, l, v, fairfront::CompositionMode::Post)
            .map_err(|e| e.to_string())?;
        let ed = certify_composition_ed(eps, delta, k * eps, l, v, fairfront::CompositionMode::Post)
            .map_err(|e| e.to_string())?;
        for cert in [lip, ed] {
            if !cert.d_min.is_finite() {
                continue;
            }
            for d in certified_grid(cert.d_min, v) {
                let map = ParetoMap::new(&model, d).unwrap();
                let composed = |xv: &DVector<f64>, zl: &str| map.apply(&g.predict(xv), zl);
                let r = empirical_if_check(composed, &probes, IfBudget::EpsilonDelta { epsilon: eps, delta })
                    .map_err(|e| e.to_string())?;
                ensure!(
                    r.violations == 0,
                    "{}: eps {eps} delta {delta} d {d}: {} violations",
                    cert.theorem,
                    r.violations
                );
                checked += 1;
            }
        }
    }
    Ok(format!("6 hand values exact; K = {k:.4}, {checked} composed checks clean"))
}

fn criterion_8() -> Outcome {
    let mut worst: f64 = 0.0;
    let (tp, tpm) = two_point();
    let g = gaussian_pair(2_000, 8);
    let gq = fit_quantile_barycenter(&g).unwrap();
    let ga = fit_affine_barycenter(&g).unwrap();
    for (ds, m) in [(&tp, &tpm), (&g, &gq), (&g, &ga)] {
        let scale = SQRT_2 * m.projection_loss();
        let l_star = displacement_sup(m, ds, None).unwrap().l_emp;
        for i in 0..20 {
            let d = scale * i as f64 / 19.0;
            let map = ParetoMap::new(m, d).unwrap();
            let mut l_d: f64 = 0.0;
            for (z, mat) in ds.iter() {
                for row in mat.row_iter() {
                    let y = row.transpose();
                    l_d = l_d.max((map.apply(&y, z).unwrap() - &y).norm());
                }
            }
            let want = (1.0 - d / scale) * l_star;
            ensure!(close(l_d, want, 1e-10), "d = {d}: L(f_d) = {l_d} vs {want}");
            worst = worst.max((l_d - want).abs());
        }
    }
    Ok(format!("3 models x 20 tolerances, max deviation {worst:.2e}"))
}

fn run_bin(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fairfront"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "fairfront {:?} failed: {}",
            args,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = dir.path().join("linear.csv");
    let report_dir = dir.path().join("report");
    let p = |x: &Path| x.to_str().unwrap().to_string();
    run_bin(&[
        "synth", "--linear", "--group", "a:0:1500", "--group", "b:1.5:1000", "--n-features", "3", "--seed", "9",
        "--output", &p(&data),
    ])?;
    let (eps, delta) = (0.1, 0.8);
    let budget = format!("{eps}:{delta}");
    run_bin(&[
        "experiment", "--input", &p(&data), "--feature-cols", "x1,x2,x3", "--budget", &budget, "--output",
        &p(&report_dir),
    ])?;
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(report_dir.join("report.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let num = |v: &serde_json::Value| v.as_f64().ok_or("missing number".to_string());
    let front = report["frontier"].as_array().ok_or("no frontier")?;
    let first = &front[0];
    let last = &front[front.len() - 1];
    let v = num(&report["projection_loss"])?;

    // independent recomputation of the input disparity from the reported weights
    let table = fairfront_cli::table::Table::load(&data, &["x1".into(), "x2".into(), "x3".into()], &["y".into()], "group")
        .map_err(|e| e.to_string())?;
    let w: Vec<f64> = report["ols_without_group"]["weights"][0]
        .as_array()
        .ok_or("no weights")?
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    let b = num(&report["ols_without_group"]["intercept"][0])?;
    let preds = DMatrix::from_fn(table.n(), 1, |i, _| {
        (0..3).map(|j| w[j] * table.features[(i, j)]).sum::<f64>() + b
    });
    let d_input = wasserstein_disparity(&table.grouped(&preds).unwrap(), DisparityMethod::Bures)
        .unwrap()
        .disparity;

    ensure!(num(&first["d"])? == 0.0, "first grid point is not d = 0");
    ensure!(num(&first["measured_disparity"])? <= 1e-6, "d = 0 disparity {}", first["measured_disparity"]);
    ensure!(close(num(&first["l2_loss"])?, v, 1e-8 * v), "d = 0 loss {} vs V {v}", first["l2_loss"]);
    ensure!(num(&last["t"])? == 0.0, "last grid point is not the identity");
    ensure!(
        close(num(&last["measured_disparity"])?, d_input, 1e-8),
        "identity endpoint {} vs input D {d_input}",
        last["measured_disparity"]
    );

    let l_emp = num(&report["displacement"]["l_emp"])?;
    let want = certify_frontier(eps, delta, l_emp, v).unwrap().d_min;
    let svg = std::fs::read_to_string(report_dir.join("frontier.svg")).map_err(|e| e.to_string())?;
    let band = band_d_min(&svg).ok_or("no certified band in SVG")?;
    ensure!(band == want, "SVG band at {band}, certify_frontier gives {want}");
    Ok(format!(
        "d=0 disparity {:.1e}, identity endpoint matches D = {d_input:.6}, band at d = {band:.6}",
        num(&first["measured_disparity"])?
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 9] = [
        ("1 two-point worked instance", criterion_1, Some(Duration::from_secs(1))),
        ("2 oracle equivalence", criterion_2, Some(Duration::from_secs(10))),
        ("3 Gaussian closed forms", criterion_3, Some(Duration::from_secs(5))),
        ("4 parity iff zero pairwise W2", criterion_4, None),
        ("5 frontier certificate soundness", criterion_5, None),
        ("6 Lipschitz incompatibility witness", criterion_6, None),
        ("7 composition formulas and soundness", criterion_7, None),
        ("8 displacement scaling", criterion_8, None),
        ("9 end-to-end experiment", criterion_9, Some(Duration::from_secs(30))),
    ];
    let mut failed = 0;
    for (name, f, limit) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let result = match (result, limit) {
            (Ok(_), Some(l)) if elapsed > l => Err(format!("took {elapsed:.2?}, limit {l:?}")),
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!("PASS criterion {name} ({elapsed:.2?}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name} ({elapsed:.2?}): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 9 acceptance criteria passed");
}
