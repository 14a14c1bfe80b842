use proptest::prelude::*;
use solicit_core::corpus::*;
use solicit_core::features::*;
use solicit_core::lexicon::*;

const T0: i64 = 1_700_000_000;

fn post(id: usize, author: &str, t: i64, text: &str, rt: bool) -> PostRecord {
    PostRecord {
        post_id: format!("p{id}"),
        author_id: author.into(),
        timestamp: t,
        text: text.into(),
        is_retweet: rt,
        in_reply_to_post: None,
        mentions: Vec::new(),
    }
}

fn user(id: &str) -> UserRecord {
    UserRecord {
        user_id: id.into(),
        screen_name: format!("sn_{id}"),
        profile_text: "talking and tweeting".into(),
        account_created_at: 1,
    }
}

const WORDS: [&str; 8] = ["talk", "friend", "happy", "coffee", "airport", "line", "sad", "work"];

fn timeline_strategy() -> impl Strategy<Value = Vec<(i64, usize, bool)>> {
    prop::collection::vec((0i64..40 * 86_400, 0usize..WORDS.len(), any::<bool>()), 0..60)
}

fn corpus_of(timeline: &[(i64, usize, bool)]) -> Corpus {
    let posts = timeline
        .iter()
        .enumerate()
        .map(|(k, &(dt, w, rt))| post(k, "a", T0 + dt, &format!("{} {}", WORDS[w], WORDS[(w + k) % WORDS.len()]), rt))
        .collect();
    Corpus::from_parts(vec![user("a")], posts, Vec::new(), Vec::new()).unwrap()
}

#[test]
fn shipped_layout_has_119_features() {
    let ex = FeatureExtractor::shipped(FeatureConfig::default());
    assert_eq!(ex.len(), 119);
    let c = corpus_of(&[]);
    let v = ex.extract(&c, "a", T0).unwrap();
    assert_eq!(v.len(), 119);
    assert_eq!(v.get("MsgCount"), Some(Some(0.0)));
    assert!(v.missing_mask.iter().filter(|&&m| m).count() >= 100);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn length_is_sixteen_plus_categories_plus_traits(c in 1usize..25, t in 0usize..12) {
        let mut cats = vec![("social".to_string(), vec!["talk*".to_string()])];
        cats.extend((1..c).map(|k| (format!("cat{k}"), vec![format!("w{k}")])));
        let lex = CategoryLexicon::new(cats).unwrap();
        let traits = (0..t).map(|k| (format!("trait{k}"), vec![("social".to_string(), 0.5)])).collect();
        let coeffs = TraitCoefficients::new(traits, &lex).unwrap();
        let ex = FeatureExtractor::new(lex, coeffs, FeatureConfig::default()).unwrap();
        prop_assert_eq!(ex.len(), 16 + c + t);
        let v = ex.extract(&corpus_of(&[(0, 0, false), (50, 1, false)]), "a", T0 + 100).unwrap();
        prop_assert_eq!(v.len(), 16 + c + t);
    }

    #[test]
    fn ratios_are_bounded_and_likelihoods_sum_to_one(timeline in timeline_strategy()) {
        prop_assume!(!timeline.is_empty());
        let c = corpus_of(&timeline);
        let tl = c.timeline("a");
        let q = T0 + 41 * 86_400;
        let act = activity_features(&tl, q);
        prop_assert!((0.0..=1.0).contains(&act[2].unwrap()));
        let day: f64 = (0..7).map(|d| readiness_features(&tl, q + d * 86_400, 20)[0].unwrap()).sum();
        let hour: f64 = (0..24).map(|h| readiness_features(&tl, q + h * 3_600, 20)[1].unwrap()).sum();
        prop_assert!((day - 1.0).abs() < 1e-12);
        prop_assert!((hour - 1.0).abs() < 1e-12);
        if let Some(s) = readiness_features(&tl, q, 20)[2] {
            prop_assert!(s > 0.0 && s <= 1.0);
        }
    }

    #[test]
    fn latency_statistics_are_ordered(lat in prop::collection::vec(0.0f64..1e5, 1..40), nd in 0usize..10) {
        let s = InteractionSummary {
            direct_questions_received: lat.len() + nd,
            responses_to_direct: lat.len(),
            response_latencies: lat,
            indirect_questions_exposed: 5,
            responses_to_indirect: 2,
        };
        let f = responsiveness_features(&s);
        let (mean, med, min, max) = (f[0].unwrap(), f[1].unwrap(), f[4].unwrap(), f[3].unwrap());
        prop_assert!(min <= med && med <= max);
        prop_assert!(min - 1e-9 <= mean && mean <= max + 1e-9);
        prop_assert!((0.0..=1.0).contains(&f[5].unwrap()) && (0.0..=1.0).contains(&f[6].unwrap()));
    }

    #[test]
    fn adding_a_retweet_leaves_personality_unchanged(timeline in timeline_strategy(), w in 0usize..WORDS.len()) {
        let ex = FeatureExtractor::shipped(FeatureConfig { history_cap: None, ..FeatureConfig::default() });
        let base = corpus_of(&timeline);
        let mut more = timeline.clone();
        more.push((1, w, true));
        let with_rt = corpus_of(&more);
        let q = T0 + 41 * 86_400;
        let a = ex.extract(&base, "a", q).unwrap();
        let b = ex.extract(&with_rt, "a", q).unwrap();
        for (k, g) in ex.groups().iter().enumerate() {
            if *g == FeatureGroup::Personality {
                prop_assert_eq!(a.missing_mask[k], b.missing_mask[k]);
                prop_assert_eq!(a.values[k], b.values[k]);
            }
        }
    }

    #[test]
    fn inactivity_grows_with_query_time(timeline in timeline_strategy(), d1 in 0i64..1000, d2 in 1i64..1000) {
        prop_assume!(!timeline.is_empty());
        let c = corpus_of(&timeline);
        let tl = c.timeline("a");
        let last = tl.iter().map(|p| p.timestamp).max().unwrap();
        let a = readiness_features(&tl, last + d1, 20)[3].unwrap();
        let b = readiness_features(&tl, last + d1 + d2, 20)[3].unwrap();
        prop_assert!(a >= 0.0 && b > a);
        prop_assert_eq!(readiness_features(&tl, last - 500, 20)[3].unwrap(), 0.0);
    }

    #[test]
    fn trait_scores_are_linear(scale in -5.0f64..5.0, seed in any::<u64>()) {
        let lex = CategoryLexicon::shipped();
        let coeffs = TraitCoefficients::shipped(&lex).unwrap();
        let liwc: Vec<f64> = (0..lex.len()).map(|k| ((seed >> (k % 60)) & 7) as f64 / 50.0).collect();
        let scaled: Vec<f64> = liwc.iter().map(|v| v * scale).collect();
        let a = big5_scores(&liwc, &coeffs);
        let b = big5_scores(&scaled, &coeffs);
        prop_assert_eq!(a.len(), 35);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x * scale - y).abs() < 1e-12);
        }
    }

    #[test]
    fn appending_tokens_never_lowers_counts(a in "[a-z ?@#']{0,60}", b in "[a-z ?@#']{0,60}") {
        let lex = CategoryLexicon::shipped();
        let first = count_matches(&tokenize(&a), &lex);
        let both = count_matches(&tokenize(&format!("{a} {b}")), &lex);
        prop_assert!(first.counts.iter().zip(&both.counts).all(|(x, y)| x <= y));
        prop_assert_eq!(tokenize(&a), tokenize(&a));
        let t = tokenize(&a);
        prop_assert_eq!(t.total_count, t.tokens.len());
    }

    #[test]
    fn prefix_patterns_match_exactly_their_extensions(stem in "[a-z]{1,6}", token in "[a-z]{1,9}") {
        let lex = CategoryLexicon::new(vec![("social".into(), vec![format!("{stem}*")])]).unwrap();
        prop_assert_eq!(lex.matches("social", &token), token.starts_with(&stem));
    }

    #[test]
    fn classification_is_a_partition(text in "[a-z @?!]{0,40}", mention in any::<bool>()) {
        let subject = user("b");
        let mut p = post(0, "a", T0, &text, false);
        if mention {
            p.mentions.push("b".into());
        }
        let class = classify_post(&p, &subject);
        let q = text.contains('?');
        let directed = mention || text.to_lowercase().contains("@sn_b");
        let expected = match (q, directed) {
            (false, _) => PostClass::NotQuestion,
            (true, true) => PostClass::DirectQuestion,
            (true, false) => PostClass::IndirectQuestion,
        };
        prop_assert_eq!(class, expected);
    }

    #[test]
    fn summaries_rejoin_to_reply_times(qs in prop::collection::vec((0i64..100_000, prop::option::of(1i64..5_000)), 0..25)) {
        let mut posts = Vec::new();
        let mut expected = Vec::new();
        for (k, &(t, reply)) in qs.iter().enumerate() {
            let mut q = post(2 * k, "a", T0 + t, "@sn_b any news?", false);
            q.mentions.push("b".into());
            posts.push(q);
            if let Some(dt) = reply {
                let mut r = post(2 * k + 1, "b", T0 + t + dt, "yes", false);
                r.in_reply_to_post = Some(format!("p{}", 2 * k));
                posts.push(r);
                expected.push(dt as f64);
            }
        }
        let c = Corpus::from_parts(vec![user("a"), user("b")], posts, Vec::new(), Vec::new()).unwrap();
        let s = c.derive_interactions("b").unwrap();
        prop_assert_eq!(s.direct_questions_received, qs.len());
        prop_assert_eq!(s.responses_to_direct, expected.len());
        let mut got = s.response_latencies.clone();
        got.sort_by(f64::total_cmp);
        expected.sort_by(f64::total_cmp);
        prop_assert_eq!(got, expected);
        prop_assert_eq!(s, c.derive_interactions("b").unwrap());
        let tl = c.timeline("b");
        prop_assert!(tl.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
    }
}

#[test]
fn tokenizer_examples() {
    assert_eq!(tokenize("Talking to @bob about #food http://x.co").tokens, ["talking", "to", "about", "food"]);
    assert_eq!(tokenize("").total_count, 0);
    assert_eq!(tokenize("don't stop").tokens, ["don't", "stop"]);
}

#[test]
fn extraction_is_bitwise_repeatable() {
    let ex = FeatureExtractor::shipped(FeatureConfig::default());
    let c = corpus_of(&[(0, 0, false), (4_000, 1, true), (90_000, 2, false), (95_000, 3, false)]);
    let a = ex.extract(&c, "a", T0 + 100_000).unwrap();
    let b = ex.extract(&c, "a", T0 + 100_000).unwrap();
    assert_eq!(a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(a.missing_mask, b.missing_mask);
}
