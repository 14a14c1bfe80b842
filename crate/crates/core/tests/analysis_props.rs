use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use solicit_core::analysis::*;
use solicit_core::model::LabeledDataset;

/// Q(df/2, x/2) computed with mpmath at 50 digits, rows df = 1..10, columns
/// x = 0.1, 1, 5, 10, 25, 50.
const XS: [f64; 6] = [0.1, 1.0, 5.0, 10.0, 25.0, 50.0];
const ORACLE: [[f64; 6]; 10] = [
    [7.51829634045849238e-01, 3.17310507862914093e-01, 2.53473186774682627e-02, 1.56540225800254969e-03, 5.73303143758387824e-07, 1.53745979442803494e-12],
    [9.51229424500714016e-01, 6.06530659712633424e-01, 8.20849986238988000e-02, 6.73794699908546700e-03, 3.72665317207867094e-06, 1.38879438649640209e-11],
    [9.91837423731876444e-01, 8.01251956901200768e-01, 1.71797144296733123e-01, 1.85661354630432332e-02, 1.54404982911013649e-05, 7.98917924495147170e-11],
    [9.98790895725749750e-01, 9.09795989568950136e-01, 2.87297495183645779e-01, 4.04276819945128055e-02, 5.03098178230620611e-05, 3.61086540489064524e-10],
    [9.99837683388077436e-01, 9.62565773247296419e-01, 4.15880186995507939e-01, 7.52352461465121830e-02, 1.39333791185626186e-04, 1.38579733670095934e-09],
    [9.99979932506375624e-01, 9.85612322033029287e-01, 5.43813115883329479e-01, 1.24652019483081147e-01, 3.41454596891708248e-04, 4.70106899829032094e-09],
    [9.99997688581201416e-01, 9.94828536516515483e-01, 6.59963229694282671e-01, 1.88573467513450083e-01, 7.58800255658250225e-04, 1.44448527792154053e-08],
    [9.99999749786052661e-01, 9.98248377443709201e-01, 7.57576133133065932e-01, 2.65025915297361692e-01, 1.55455784301106723e-03, 4.08675894799674580e-08],
    [9.99999974369674582e-01, 9.99437502697832492e-01, 8.34308260193407536e-01, 3.50485212323361328e-01, 2.97118048591762159e-03, 1.07723820225747159e-07],
    [9.99999997502048710e-01, 9.99827884370044107e-01, 8.91178018914151271e-01, 4.40493285065212403e-01, 5.34550548713406438e-03, 2.66908342490449566e-07],
];

#[test]
fn survival_function_matches_high_precision_table() {
    for (k, row) in ORACLE.iter().enumerate() {
        for (x, want) in XS.iter().zip(row) {
            let got = chi_square_sf(*x, (k + 1) as f64);
            assert!((got - want).abs() < 1e-6, "df {} x {x}: {got} vs {want}", k + 1);
        }
    }
}

#[test]
fn two_by_two_reference_table() {
    let c = chi_square_table(&[[10, 20], [20, 10]]).unwrap();
    assert!((c.statistic - 20.0 / 3.0).abs() < 1e-12);
    assert_eq!(c.df, 1);
    assert!((c.p_value - 0.009823274507519249).abs() < 1e-9);
}

#[test]
fn separating_binary_feature_scores_the_sample_size() {
    let labels: Vec<bool> = (0..60).map(|k| k % 2 == 0).collect();
    let values: Vec<Option<f64>> = labels.iter().map(|&l| Some(l as u8 as f64)).collect();
    let c = chi_square_feature(&values, &labels, 4).unwrap().unwrap();
    assert!((c.statistic - 60.0).abs() < 1e-9);
}

#[test]
fn constant_feature_is_degenerate() {
    let labels: Vec<bool> = (0..20).map(|k| k % 3 == 0).collect();
    assert!(chi_square_feature(&[Some(2.0); 20], &labels, 4).unwrap().is_none());
}

#[test]
fn null_p_values_are_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let reps = 400;
    let mut ps: Vec<f64> = (0..reps)
        .map(|_| {
            let values: Vec<Option<f64>> = (0..300).map(|_| Some(rng.random::<f64>())).collect();
            let mut labels: Vec<bool> = (0..300).map(|k| k < 120).collect();
            labels.shuffle(&mut rng);
            chi_square_feature(&values, &labels, 4).unwrap().unwrap().p_value
        })
        .collect();
    ps.sort_by(f64::total_cmp);
    let n = reps as f64;
    let d = ps
        .iter()
        .enumerate()
        .map(|(i, &p)| (p - i as f64 / n).abs().max(((i + 1) as f64 / n - p).abs()))
        .fold(0.0, f64::max);
    // Kolmogorov critical value at alpha = 0.01.
    assert!(d < 1.628 / n.sqrt(), "KS distance {d}");
}

fn planted(seed: u64, n: usize, noise: usize) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
    let mut names: Vec<String> = (0..5).map(|k| format!("planted{k}")).collect();
    names.extend((0..noise).map(|k| format!("noise{k:03}")));
    let rows = labels
        .iter()
        .map(|&l| {
            let mut r: Vec<Option<f64>> = (0..5).map(|_| Some(l as u8 as f64 * 0.8 + rng.random::<f64>())).collect();
            r.extend((0..noise).map(|_| Some(rng.random::<f64>())));
            r
        })
        .collect();
    LabeledDataset::new(names, (0..n).map(|k| format!("u{k}")).collect(), rows, labels, vec![1.0; n]).unwrap()
}

#[test]
fn planted_features_are_found() {
    let mut found = Vec::new();
    let mut kept = Vec::new();
    for seed in 0..20 {
        let r = significance_report(&planted(seed, 400, 114), DEFAULT_ALPHA, DEFAULT_BINS).unwrap();
        assert_eq!(r.tested, 119);
        let sig = r.significant_names();
        found.push(sig.iter().filter(|n| n.starts_with("planted")).count());
        kept.push(114 - sig.iter().filter(|n| n.starts_with("noise")).count());
    }
    found.sort_unstable();
    kept.sort_unstable();
    assert_eq!(found[10], 5);
    assert!(kept[10] >= 110);
}

#[test]
fn report_threshold_and_empty_rejection() {
    let r = significance_report(&planted(1, 200, 114), 0.05, 4).unwrap();
    assert!((r.threshold - 4.2017e-4).abs() < 1e-7);
    for f in &r.features {
        assert_eq!(f.significant, f.p_value.is_some_and(|p| p < r.threshold));
        assert!(f.p_value.is_none_or(|p| (0.0..=1.0).contains(&p)));
    }
    assert!((0.0..=1.0).contains(&r.fdr));

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let labels: Vec<bool> = (0..100).map(|k| k % 2 == 0).collect();
    let rows: Vec<Vec<Option<f64>>> = (0..100).map(|_| vec![Some(rng.random::<f64>())]).collect();
    let data = LabeledDataset::new(vec!["x".into()], (0..100).map(|k| k.to_string()).collect(), rows, labels, vec![1.0; 100]).unwrap();
    let r = significance_report(&data, 1e-9, 4).unwrap();
    assert!(r.no_rejections);
    assert_eq!(r.fdr, 0.0);
}

#[test]
fn subsets_on_the_full_space() {
    let names: Vec<String> = solicit_core::features::FeatureExtractor::shipped(Default::default()).names().to_vec();
    let all = build_subset(SubsetName::All, None, &names).unwrap();
    assert_eq!(all.features.len(), 119);
    let top4 = build_subset(SubsetName::Top4, None, &names).unwrap();
    assert_eq!(top4.features, TOP4.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    let common = build_subset(SubsetName::CommonSignificant, None, &names).unwrap();
    assert_eq!(common.features.len(), 5);
    assert!(build_subset(SubsetName::Top4, None, &names[..20]).is_err());
}

#[test]
fn top10_needs_ten_rejections() {
    let data = planted(3, 400, 20);
    let r = significance_report(&data, DEFAULT_ALPHA, DEFAULT_BINS).unwrap();
    assert!(r.rejected < 10);
    assert!(build_subset(SubsetName::Top10Significant, Some(&r), &data.names).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn raising_alpha_never_shrinks_the_set(seed in any::<u64>(), a in 0.001f64..0.2, b in 0.001f64..0.2) {
        let data = planted(seed, 120, 10);
        let (lo, hi) = (a.min(b), a.max(b));
        let small = significance_report(&data, lo, 4).unwrap().significant_names();
        let large = significance_report(&data, hi, 4).unwrap().significant_names();
        prop_assert!(small.iter().all(|n| large.contains(n)));
    }

    #[test]
    fn statistic_survives_monotone_transforms(
        values in prop::collection::vec(prop::option::weighted(0.9, -5.0f64..5.0), 8..120),
        flips in prop::collection::vec(any::<bool>(), 120),
    ) {
        let labels: Vec<bool> = flips[..values.len()].to_vec();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let a = chi_square_feature(&values, &labels, 4).unwrap();
        let t: Vec<Option<f64>> = values.iter().map(|v| v.map(|x| x.exp() * 3.0 - 1.0)).collect();
        let b = chi_square_feature(&t, &labels, 4).unwrap();
        prop_assert_eq!(a, b);
    }
}
