use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use solicit_core::model::logistic::{fit, LogisticProblem};
use solicit_core::model::*;

fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> LabeledDataset {
    let beta: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for k in 0..n {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let z: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
        let p = 1.0 / (1.0 + (-z).exp());
        // Guarantee both classes.
        labels.push(if k < 2 { k == 0 } else { rng.random::<f64>() < p });
        rows.push(x.into_iter().map(Some).collect());
    }
    let weights = (0..n).map(|_| rng.random_range(0.2..3.0)).collect();
    LabeledDataset::new(
        (0..d).map(|j| format!("f{j}")).collect(),
        (0..n).map(|k| format!("u{k}")).collect(),
        rows,
        labels,
        weights,
    )
    .unwrap()
}

fn dense(rows: &[Vec<Option<f64>>]) -> Vec<f64> {
    rows.iter().flatten().map(|v| v.unwrap()).collect()
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let data = random_dataset(&mut rng, 20, 10);
        let x = dense(&data.rows);
        let y: Vec<f64> = data.labels.iter().map(|&l| l as u8 as f64).collect();
        let pinned = vec![false; 10];
        let p = LogisticProblem {
            x: &x,
            y: &y,
            weights: &data.weights,
            lambda: 0.3,
            pinned: &pinned,
        };
        let theta: Vec<f64> = (0..11).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = p.gradient(&theta);
        let h = 1e-5;
        for k in 0..11 {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[k] += h;
            dn[k] -= h;
            let fd = (p.objective(&up) - p.objective(&dn)) / (2.0 * h);
            let rel = (g[k] - fd).abs() / g[k].abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    assert!(worst < 1e-5, "max relative error {worst}");
}

fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / pairs
}

#[test]
fn auc_matches_pair_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..100 {
        let n = rng.random_range(2..80);
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        labels[0] = true;
        labels[1] = false;
        let scores: Vec<f64> = match case % 4 {
            0 => vec![0.3; n],
            1 => labels.iter().map(|&l| if l { 0.9 } else { 0.1 }).collect(),
            // Coarse grid so ties are common.
            2 => (0..n).map(|_| rng.random_range(0..5) as f64 / 4.0).collect(),
            _ => (0..n).map(|_| rng.random::<f64>()).collect(),
        };
        let got = auc(&scores, &labels).unwrap();
        assert!((got - brute_auc(&scores, &labels)).abs() < 1e-12, "case {case}");
        if case % 4 == 0 {
            assert_eq!(got, 0.5);
        }
        if case % 4 == 1 {
            assert_eq!(got, 1.0);
        }
    }
}

#[test]
fn auc_needs_both_classes() {
    assert!(auc(&[0.1, 0.2], &[true, true]).is_err());
}

#[test]
fn weight_scaling_with_lambda_keeps_the_argmin() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let data = random_dataset(&mut rng, 80, 4);
        let mut scaled = data.clone();
        scaled.weights.iter_mut().for_each(|w| *w *= 4.0);
        let params = LogisticParams {
            lambda: 0.5,
            ..LogisticParams::default()
        };
        let a = train_logistic(&data, &params).unwrap();
        let b = train_logistic(
            &scaled,
            &LogisticParams {
                lambda: 2.0,
                ..params
            },
        )
        .unwrap();
        assert!(a.metadata.converged && b.metadata.converged);
        for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
        assert!((a.intercept - b.intercept).abs() < 1e-6);
    }
}

#[test]
fn svm_duplicates_with_half_weight_match() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..3 {
        let data = random_dataset(&mut rng, 40, 5);
        let mut dup = data.clone();
        dup.rows = data.rows.iter().flat_map(|r| [r.clone(), r.clone()]).collect();
        dup.labels = data.labels.iter().flat_map(|&l| [l, l]).collect();
        dup.weights = data.weights.iter().flat_map(|&w| [w / 2.0, w / 2.0]).collect();
        dup.ids = (0..dup.rows.len()).map(|k| format!("d{k}")).collect();
        let a = train_svm(&data, &SvmParams::default()).unwrap();
        let b = train_svm(&dup, &SvmParams::default()).unwrap();
        for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
        assert!((a.intercept - b.intercept).abs() < 1e-6);
    }
}

#[test]
fn platt_example_is_increasing() {
    let p = Platt::fit(&[-2.0, -1.0, 1.0, 2.0], &[false, false, true, true]);
    let probs: Vec<f64> = [-2.0, -1.0, 1.0, 2.0].iter().map(|&m| p.apply(m)).collect();
    assert!(probs.windows(2).all(|w| w[0] < w[1]), "{probs:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn platt_preserves_ranking(
        margins in prop::collection::vec(-3.0f64..3.0, 4..40),
        flips in prop::collection::vec(any::<bool>(), 40),
    ) {
        let labels: Vec<bool> = margins.iter().zip(&flips).map(|(m, f)| (*m > 0.0) ^ *f).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let p = Platt::fit(&margins, &labels);
        prop_assert!(p.a > 0.0);
        let mut sorted = margins.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        for w in sorted.windows(2) {
            prop_assert!(p.apply(w[0]) < p.apply(w[1]));
        }
    }

    #[test]
    fn standardized_training_columns_are_unit(
        seed in any::<u64>(), n in 5usize..60, d in 1usize..6,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<Option<f64>>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_bool(0.8).then(|| rng.random_range(-50.0..50.0))).collect())
            .collect();
        let s = Standardizer::fit(&rows, d).unwrap();
        let z = s.transform_all(&rows).unwrap();
        for j in 0..d {
            if s.pinned[j] {
                continue;
            }
            let col: Vec<f64> = (0..n).filter(|&i| rows[i][j].is_some()).map(|i| z[i * d + j]).collect();
            let m = col.iter().sum::<f64>() / col.len() as f64;
            let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / col.len() as f64).sqrt();
            prop_assert!(m.abs() < 1e-9, "mean {}", m);
            prop_assert!((sd - 1.0).abs() < 1e-9, "sd {}", sd);
        }
    }

    #[test]
    fn logistic_trace_never_rises(seed in any::<u64>(), lambda in prop::sample::select(vec![1e-3, 1.0, 100.0])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_dataset(&mut rng, 30, 4);
        let x = dense(&data.rows);
        let y: Vec<f64> = data.labels.iter().map(|&l| l as u8 as f64).collect();
        let pinned = vec![false; 4];
        let p = LogisticProblem { x: &x, y: &y, weights: &data.weights, lambda, pinned: &pinned };
        let (theta, trace) = fit(&p, &LogisticParams::default()).unwrap();
        prop_assert!(trace.objective.windows(2).all(|w| w[1] <= w[0]));
        let last = *trace.objective.last().unwrap();
        prop_assert!((last - p.objective(&theta)).abs() <= 1e-9 * last.abs().max(1.0));
    }

    #[test]
    fn probability_rises_with_a_positive_feature(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_dataset(&mut rng, 60, 3);
        let m = train_logistic(&data, &LogisticParams::default()).unwrap();
        let j = (0..3).max_by(|&a, &b| m.coefficients[a].abs().total_cmp(&m.coefficients[b].abs())).unwrap();
        prop_assume!(m.coefficients[j].abs() > 1e-3);
        let sign = m.coefficients[j].signum();
        let mut row = vec![Some(0.0); 3];
        let mut prev = None;
        for k in -5..=5 {
            row[j] = Some(sign * k as f64 * 0.3);
            let p = m.predict_proba(&row).unwrap();
            if let Some(q) = prev {
                prop_assert!(p > q);
            }
            prev = Some(p);
        }
    }
}

#[test]
fn eval_report_metrics_are_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let data = random_dataset(&mut rng, 100, 4);
    let r = kfold_evaluate(&data, 5, &TrainConfig::default(), 1).unwrap();
    assert_eq!(r.folds.len(), 5);
    for f in &r.folds {
        for v in [f.precision, f.recall, f.f1, f.auc] {
            assert!((0.0..=1.0).contains(&v));
        }
        let h = if f.precision + f.recall > 0.0 {
            2.0 * f.precision * f.recall / (f.precision + f.recall)
        } else {
            0.0
        };
        assert!((f.f1 - h).abs() < 1e-12);
    }
    let folds = stratified_folds(&data.labels, 5, 1).unwrap();
    for k in 0..5 {
        let size = folds.iter().filter(|&&f| f == k).count();
        assert_eq!(size, 20);
    }
}
