//! Willingness and readiness features for one user at one query time.
//!
//! Layout, in order: responsiveness (7), profile (1), one score per lexicon
//! category, one score per trait/facet, activity (4), readiness (4). With the
//! shipped 68-category lexicon and 35-entry coefficient table that is 119.

use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, InteractionSummary, PostRecord};
use crate::error::{Error, Result};
use crate::lexicon::{count_matches, tokenize, CategoryLexicon, TokenStream, TraitCoefficients};
use crate::par;

pub const RESPONSIVENESS: [&str; 7] = [
    "MeanResponseTime",
    "MedianResponseTime",
    "ModeResponseTime",
    "MaxResponseTime",
    "MinResponseTime",
    "PastResponseRate",
    "Proactiveness",
];
pub const PROFILE: &str = "CountSocialWords";
pub const ACTIVITY: [&str; 4] = ["MsgCount", "DailyMsgCount", "RetweetRatio", "DailyRetweetRatio"];
pub const READINESS: [&str; 4] = [
    "TweetingLikelihoodOfDay",
    "TweetingLikelihoodOfHour",
    "TweetingSteadiness",
    "TweetingInactivity",
];
/// Features that do not come from the lexicon or the trait table.
pub const FIXED_FEATURES: usize = 16;

const DAY: i64 = 86_400;
const HOUR: i64 = 3_600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Responsiveness,
    Profile,
    Personality,
    Activity,
    Readiness,
}

/// UTC weekday, Monday = 0.
pub fn weekday(t: i64) -> usize {
    (t.div_euclid(DAY) + 3).rem_euclid(7) as usize
}

/// UTC hour of day.
pub fn hour_of_day(t: i64) -> usize {
    t.rem_euclid(DAY).div_euclid(HOUR) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Use at most this many of the user's most recent posts (None = all).
    pub history_cap: Option<usize>,
    /// Window for the steadiness statistic.
    pub steadiness_window: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            history_cap: Some(200),
            steadiness_window: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub names: Arc<[String]>,
    pub values: Vec<f64>,
    /// `true` where the feature is undefined for this user.
    pub missing_mask: Vec<bool>,
    pub query_time: i64,
}

impl FeatureVector {
    fn from_parts(names: Arc<[String]>, parts: Vec<Option<f64>>, query_time: i64) -> Self {
        let missing_mask = parts.iter().map(Option::is_none).collect();
        let values = parts.into_iter().map(|v| v.unwrap_or(0.0)).collect();
        FeatureVector {
            names,
            values,
            missing_mask,
            query_time,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<Option<f64>> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((!self.missing_mask[i]).then_some(self.values[i]))
    }

    /// Values with masked entries as `None`.
    pub fn options(&self) -> Vec<Option<f64>> {
        self.values
            .iter()
            .zip(&self.missing_mask)
            .map(|(&v, &m)| (!m).then_some(v))
            .collect()
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean, median, mode, max, min of reply latencies, past response rate and
/// proactiveness.
pub fn responsiveness_features(summary: &InteractionSummary) -> [Option<f64>; 7] {
    let mut out = [None; 7];
    let lat = &summary.response_latencies;
    if !lat.is_empty() {
        let mut sorted = lat.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        // Mode over whole-minute buckets; the smallest bucket wins ties.
        let mut best = (0usize, i64::MAX);
        let mut i = 0;
        while i < n {
            let bucket = (sorted[i] / 60.0).floor() as i64;
            let mut j = i;
            while j < n && (sorted[j] / 60.0).floor() as i64 == bucket {
                j += 1;
            }
            if j - i > best.0 {
                best = (j - i, bucket);
            }
            i = j;
        }
        out[0] = Some(mean(lat));
        out[1] = Some(median);
        out[2] = Some(best.1 as f64 * 60.0);
        out[3] = Some(sorted[n - 1]);
        out[4] = Some(sorted[0]);
    }
    if summary.direct_questions_received > 0 {
        out[5] = Some(summary.responses_to_direct as f64 / summary.direct_questions_received as f64);
    }
    if summary.indirect_questions_exposed > 0 {
        out[6] = Some(summary.responses_to_indirect as f64 / summary.indirect_questions_exposed as f64);
    }
    out
}

/// Raw count of profile tokens in the `social` category.
pub fn profile_social_words(profile_text: &str, lexicon: &CategoryLexicon) -> Result<f64> {
    let social = lexicon
        .category_index("social")
        .ok_or_else(|| Error::Config("lexicon has no `social` category".into()))?;
    let counts = count_matches(&tokenize(profile_text), lexicon);
    Ok(counts.counts[social] as f64)
}

/// Per-category share of the user's own (non-retweet) words, or `None` when
/// there are no such words.
pub fn liwc_scores(timeline: &[&PostRecord], lexicon: &CategoryLexicon) -> Option<Vec<f64>> {
    let mut tokens = TokenStream::default();
    for p in timeline.iter().filter(|p| !p.is_retweet) {
        tokens.extend(tokenize(&p.text));
    }
    if tokens.total_count == 0 {
        return None;
    }
    let n = tokens.total_count as f64;
    Some(count_matches(&tokens, lexicon).counts.into_iter().map(|c| c as f64 / n).collect())
}

/// Weighted sums of category scores, one per trait/facet.
pub fn big5_scores(liwc: &[f64], coeffs: &TraitCoefficients) -> Vec<f64> {
    coeffs
        .weights()
        .iter()
        .map(|(_, ws)| ws.iter().map(|&(g, w)| w * liwc[g]).sum())
        .collect()
}

/// MsgCount, DailyMsgCount, RetweetRatio, DailyRetweetRatio. Active days are
/// the timeline span in whole days, at least one.
pub fn activity_features(timeline: &[&PostRecord], _query_time: i64) -> [Option<f64>; 4] {
    let n = timeline.len();
    if n == 0 {
        return [Some(0.0), None, None, None];
    }
    let first = timeline.iter().map(|p| p.timestamp).min().unwrap_or(0);
    let last = timeline.iter().map(|p| p.timestamp).max().unwrap_or(0);
    let active_days = ((last - first) as f64 / DAY as f64).ceil().max(1.0);
    let retweets = timeline.iter().filter(|p| p.is_retweet).count() as f64;
    let n = n as f64;
    [
        Some(n),
        Some(n / active_days),
        Some(retweets / n),
        Some(retweets / active_days),
    ]
}

/// Day and hour posting likelihood at the query time, steadiness over the
/// last `window` posts, and inactivity (`query_time - last post`, clamped at
/// zero).
pub fn readiness_features(timeline: &[&PostRecord], query_time: i64, window: usize) -> [Option<f64>; 4] {
    let n = timeline.len();
    if n == 0 {
        return [None; 4];
    }
    let day = weekday(query_time);
    let hour = hour_of_day(query_time);
    let on_day = timeline.iter().filter(|p| weekday(p.timestamp) == day).count();
    let on_hour = timeline.iter().filter(|p| hour_of_day(p.timestamp) == hour).count();

    let mut times: Vec<i64> = timeline.iter().map(|p| p.timestamp).collect();
    times.sort_unstable();
    let recent = &times[n.saturating_sub(window)..];
    let steadiness = (recent.len() >= 3).then(|| {
        let gaps: Vec<f64> = recent.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
        let m = mean(&gaps);
        let var = gaps.iter().map(|g| (g - m) * (g - m)).sum::<f64>() / gaps.len() as f64;
        1.0 / var.sqrt().max(1.0)
    });
    let last = times[n - 1];

    [
        Some(on_day as f64 / n as f64),
        Some(on_hour as f64 / n as f64),
        steadiness,
        Some((query_time - last).max(0) as f64),
    ]
}

/// Computes feature vectors against a fixed lexicon and coefficient table.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    lexicon: Arc<CategoryLexicon>,
    coefficients: Arc<TraitCoefficients>,
    config: FeatureConfig,
    names: Arc<[String]>,
    groups: Vec<FeatureGroup>,
}

impl FeatureExtractor {
    pub fn new(lexicon: CategoryLexicon, coefficients: TraitCoefficients, config: FeatureConfig) -> Result<Self> {
        if lexicon.category_index("social").is_none() {
            return Err(Error::Config("lexicon has no `social` category".into()));
        }
        let mut names: Vec<String> = Vec::new();
        let mut groups = Vec::new();
        let mut push = |name: &str, g: FeatureGroup| {
            names.push(name.to_string());
            groups.push(g);
        };
        RESPONSIVENESS.iter().for_each(|n| push(n, FeatureGroup::Responsiveness));
        push(PROFILE, FeatureGroup::Profile);
        lexicon.categories().iter().for_each(|n| push(n, FeatureGroup::Personality));
        coefficients.names().for_each(|n| push(n, FeatureGroup::Personality));
        ACTIVITY.iter().for_each(|n| push(n, FeatureGroup::Activity));
        READINESS.iter().for_each(|n| push(n, FeatureGroup::Readiness));

        let mut seen = std::collections::HashSet::new();
        for n in &names {
            if !seen.insert(n) {
                return Err(Error::Config(format!("feature name {n:?} is not unique")));
            }
        }
        Ok(FeatureExtractor {
            lexicon: Arc::new(lexicon),
            coefficients: Arc::new(coefficients),
            config,
            names: names.into(),
            groups,
        })
    }

    /// The shipped 68-category lexicon with the 35-entry trait table.
    pub fn shipped(config: FeatureConfig) -> Self {
        let lexicon = CategoryLexicon::shipped();
        let coefficients = TraitCoefficients::shipped(&lexicon).expect("shipped coefficients are valid");
        Self::new(lexicon, coefficients, config).expect("shipped configuration is valid")
    }

    pub fn names(&self) -> &Arc<[String]> {
        &self.names
    }

    pub fn groups(&self) -> &[FeatureGroup] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn lexicon(&self) -> &CategoryLexicon {
        &self.lexicon
    }

    pub fn config(&self) -> FeatureConfig {
        self.config
    }

    /// Posts at or before `query_time`, most recent `history_cap` of them.
    pub fn history<'c>(&self, corpus: &'c Corpus, user_id: &str, query_time: i64) -> Vec<&'c PostRecord> {
        let mut tl = corpus.timeline_until(user_id, query_time);
        if let Some(cap) = self.config.history_cap {
            if tl.len() > cap {
                tl.drain(..tl.len() - cap);
            }
        }
        tl
    }

    pub fn extract(&self, corpus: &Corpus, user_id: &str, query_time: i64) -> Result<FeatureVector> {
        let user = corpus
            .user(user_id)
            .ok_or_else(|| Error::Contract(format!("unknown user {user_id}")))?;
        let summary = corpus.derive_interactions_until(user_id, query_time)?;
        let timeline = self.history(corpus, user_id, query_time);

        let mut parts: Vec<Option<f64>> = Vec::with_capacity(self.len());
        parts.extend(responsiveness_features(&summary));
        parts.push(Some(profile_social_words(&user.profile_text, &self.lexicon)?));
        match liwc_scores(&timeline, &self.lexicon) {
            Some(scores) => {
                let traits = big5_scores(&scores, &self.coefficients);
                parts.extend(scores.into_iter().map(Some));
                parts.extend(traits.into_iter().map(Some));
            }
            None => parts.extend(std::iter::repeat_n(None, self.lexicon.len() + self.coefficients.len())),
        }
        parts.extend(activity_features(&timeline, query_time));
        parts.extend(readiness_features(&timeline, query_time, self.config.steadiness_window));
        debug_assert_eq!(parts.len(), self.len());
        Ok(FeatureVector::from_parts(self.names.clone(), parts, query_time))
    }

    /// Extracts many (user, query time) pairs, in order.
    pub fn extract_batch(&self, corpus: &Corpus, queries: &[(String, i64)]) -> Result<Vec<FeatureVector>> {
        par::map(queries, |(u, t)| self.extract(corpus, u, *t))
            .into_iter()
            .collect()
    }

    /// One labelled row per solicitation in the corpus, at its send time.
    pub fn labelled_table(&self, corpus: &Corpus) -> Result<FeatureTable> {
        let queries: Vec<(String, i64)> = corpus
            .solicitations()
            .iter()
            .map(|s| (s.target_user.clone(), s.sent_at))
            .collect();
        let vectors = self.extract_batch(corpus, &queries)?;
        let rows = queries
            .into_iter()
            .zip(vectors)
            .zip(corpus.solicitations())
            .map(|(((user_id, query_time), v), s)| FeatureRow {
                user_id,
                query_time,
                values: v.options(),
                label: Some(s.responded),
            })
            .collect();
        Ok(FeatureTable {
            names: self.names.to_vec(),
            rows,
        })
    }

    /// Unlabelled rows for the given (user, query time) pairs.
    pub fn unlabelled_table(&self, corpus: &Corpus, queries: &[(String, i64)]) -> Result<FeatureTable> {
        let vectors = self.extract_batch(corpus, queries)?;
        let rows = queries
            .iter()
            .zip(vectors)
            .map(|((user_id, query_time), v)| FeatureRow {
                user_id: user_id.clone(),
                query_time: *query_time,
                values: v.options(),
                label: None,
            })
            .collect();
        Ok(FeatureTable {
            names: self.names.to_vec(),
            rows,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub user_id: String,
    pub query_time: i64,
    pub values: Vec<Option<f64>>,
    pub label: Option<bool>,
}

/// Feature matrix keyed by (user, query time), as exported to CSV.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

pub const LABEL_COLUMN: &str = "responded";

impl FeatureTable {
    pub fn is_labelled(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.label.is_some())
    }

    /// Keeps only the named columns, in the given order.
    pub fn project(&self, names: &[String]) -> Result<FeatureTable> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| Error::Config(format!("feature {n:?} not in table")))
            })
            .collect::<Result<_>>()?;
        Ok(FeatureTable {
            names: names.to_vec(),
            rows: self
                .rows
                .iter()
                .map(|r| FeatureRow {
                    values: idx.iter().map(|&i| r.values[i]).collect(),
                    ..r.clone()
                })
                .collect(),
        })
    }

    /// Header `user_id,query_time,<features...>[,responded]`; masked cells
    /// are empty.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let labelled = self.rows.iter().any(|r| r.label.is_some());
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["user_id".to_string(), "query_time".to_string()];
        header.extend(self.names.iter().cloned());
        if labelled {
            header.push(LABEL_COLUMN.into());
        }
        out.write_record(&header).map_err(csv_err)?;
        for r in &self.rows {
            let mut rec = vec![r.user_id.clone(), r.query_time.to_string()];
            rec.extend(r.values.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            if labelled {
                rec.push(match r.label {
                    Some(true) => "1".into(),
                    Some(false) => "0".into(),
                    None => String::new(),
                });
            }
            out.write_record(&rec).map_err(csv_err)?;
        }
        out.flush().map_err(|e| Error::io("writing feature csv", e))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<FeatureTable> {
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(String::from).collect();
        if header.len() < 2 || header[0] != "user_id" || header[1] != "query_time" {
            return Err(Error::Data("feature csv must start with user_id,query_time".into()));
        }
        let labelled = header.last().is_some_and(|h| h == LABEL_COLUMN);
        let end = if labelled { header.len() - 1 } else { header.len() };
        let names = header[2..end].to_vec();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let line = i + 2;
            let bad = |what: &str| Error::Data(format!("feature csv line {line}: {what}"));
            if rec.len() != header.len() {
                return Err(bad("wrong number of fields"));
            }
            let query_time = rec[1].parse::<i64>().map_err(|_| bad("bad query_time"))?;
            let values = (2..end)
                .map(|j| {
                    let cell = rec[j].trim();
                    if cell.is_empty() {
                        Ok(None)
                    } else {
                        cell.parse::<f64>().map(Some).map_err(|_| bad(&format!("bad value {cell:?}")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let label = if labelled {
                match rec[end].trim() {
                    "1" => Some(true),
                    "0" => Some(false),
                    "" => None,
                    other => return Err(bad(&format!("bad label {other:?}"))),
                }
            } else {
                None
            };
            rows.push(FeatureRow {
                user_id: rec[0].to_string(),
                query_time,
                values,
                label,
            });
        }
        Ok(FeatureTable { names, rows })
    }

    pub fn read_csv_path(path: &std::path::Path) -> Result<FeatureTable> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }

    pub fn write_csv_path(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(format!("csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::UserRecord;

    fn p(ts: i64, retweet: bool, text: &str) -> PostRecord {
        PostRecord {
            post_id: format!("p{ts}"),
            author_id: "u".into(),
            timestamp: ts,
            text: text.into(),
            is_retweet: retweet,
            in_reply_to_post: None,
            mentions: vec![],
        }
    }

    #[test]
    fn responsiveness_example() {
        let s = InteractionSummary {
            direct_questions_received: 6,
            responses_to_direct: 3,
            response_latencies: vec![120.0, 240.0, 240.0, 600.0],
            indirect_questions_exposed: 4,
            responses_to_indirect: 1,
        };
        let f = responsiveness_features(&s);
        assert_eq!(
            f,
            [
                Some(300.0),
                Some(240.0),
                Some(240.0),
                Some(600.0),
                Some(120.0),
                Some(0.5),
                Some(0.25)
            ]
        );
        assert_eq!(responsiveness_features(&InteractionSummary::default()), [None; 7]);
        let single = InteractionSummary {
            response_latencies: vec![60.0],
            ..Default::default()
        };
        assert!(responsiveness_features(&single)[..5].iter().all(|v| *v == Some(60.0)));
    }

    #[test]
    fn mode_ties_prefer_smallest_bucket() {
        let s = InteractionSummary {
            response_latencies: vec![610.0, 125.0, 600.0, 130.0],
            ..Default::default()
        };
        assert_eq!(responsiveness_features(&s)[2], Some(120.0));
    }

    #[test]
    fn profile_words() {
        let lex = CategoryLexicon::from_json(r#"{"social": ["talk*", "tweet*", "communicat*"]}"#).unwrap();
        assert_eq!(profile_social_words("talking, tweeting, coffee", &lex).unwrap(), 2.0);
        assert_eq!(profile_social_words("", &lex).unwrap(), 0.0);
        assert_eq!(profile_social_words("coffee and cake", &lex).unwrap(), 0.0);
        let nosocial = CategoryLexicon::from_json(r#"{"x": ["a"]}"#).unwrap();
        assert!(matches!(profile_social_words("a", &nosocial), Err(Error::Config(_))));
    }

    #[test]
    fn liwc_excludes_retweets_and_normalises() {
        let lex = CategoryLexicon::from_json(r#"{"social": ["talk*"], "comm": ["talk*"], "food": ["pizza"]}"#).unwrap();
        let mut text = vec!["talk"; 5];
        text.extend(vec!["zzz"; 45]);
        let posts = [p(1, false, &text.join(" ")), p(2, true, "pizza pizza talk")];
        let refs: Vec<&PostRecord> = posts.iter().collect();
        let s = liwc_scores(&refs, &lex).unwrap();
        assert_eq!(s, vec![0.1, 0.1, 0.0]);
        let only_rt = [p(2, true, "pizza")];
        assert!(liwc_scores(&only_rt.iter().collect::<Vec<_>>(), &lex).is_none());
    }

    #[test]
    fn big5_weighted_sum() {
        let lex = CategoryLexicon::from_json(r#"{"social": ["a"], "posemo": ["b"]}"#).unwrap();
        let c = TraitCoefficients::from_json(r#"{"Extraversion": {"social": 0.3, "posemo": 0.2}}"#, &lex).unwrap();
        let t = big5_scores(&[0.1, 0.05], &c);
        assert!((t[0] - 0.04).abs() < 1e-15);
        let z = TraitCoefficients::from_json(r#"{"A": {"social": 0.0}, "B": {}}"#, &lex).unwrap();
        assert_eq!(big5_scores(&[0.1, 0.05], &z), vec![0.0, 0.0]);
    }

    #[test]
    fn activity_example() {
        let start = 1_000_000;
        let posts: Vec<PostRecord> = (0..40)
            .map(|i| p(start + i * (5 * DAY / 39), i < 10, "x"))
            .collect();
        let refs: Vec<&PostRecord> = posts.iter().collect();
        let f = activity_features(&refs, start + 6 * DAY);
        assert_eq!(f, [Some(40.0), Some(8.0), Some(0.25), Some(2.0)]);
        assert_eq!(activity_features(&[], 0), [Some(0.0), None, None, None]);
        let no_rt: Vec<PostRecord> = (0..3).map(|i| p(100 + i, false, "x")).collect();
        let f = activity_features(&no_rt.iter().collect::<Vec<_>>(), 0);
        assert_eq!((f[2], f[3]), (Some(0.0), Some(0.0)));
    }

    #[test]
    fn weekday_and_hour_buckets() {
        // 2023-11-13 was a Monday.
        let monday = 1_699_833_600;
        assert_eq!(weekday(monday), 0);
        assert_eq!(weekday(monday + 6 * DAY + 86_399), 6);
        assert_eq!(weekday(0), 3);
        assert_eq!(hour_of_day(monday + 13 * HOUR + 59), 13);
    }

    #[test]
    fn readiness_examples() {
        let monday = 1_699_833_600;
        // 10 of 40 posts on Mondays.
        let mut posts = Vec::new();
        for i in 0..10 {
            posts.push(p(monday + i * 60, false, "x"));
        }
        for i in 0..30 {
            posts.push(p(monday + DAY + i * 60, false, "x"));
        }
        let refs: Vec<&PostRecord> = posts.iter().collect();
        let f = readiness_features(&refs, monday + 7 * DAY, 20);
        assert_eq!(f[0], Some(0.25));

        // 20 gaps alternating 0 and 3600 s have sigma 1800 s.
        let mut t = 10 * DAY;
        let mut alt = Vec::new();
        for i in 0..21 {
            alt.push(p(t, false, "x"));
            t += if i % 2 == 0 { 0 } else { 3600 };
        }
        let refs: Vec<&PostRecord> = alt.iter().collect();
        let f = readiness_features(&refs, t, 21);
        assert!((f[2].unwrap() - 1.0 / 1800.0).abs() < 1e-15);

        let two = [p(37_800, false, "x"), p(30_000, false, "y")];
        let f = readiness_features(&two.iter().collect::<Vec<_>>(), 43_200, 20);
        assert_eq!(f[3], Some(5_400.0));
        assert_eq!(f[2], None);
        let f = readiness_features(&two.iter().collect::<Vec<_>>(), 30_000, 20);
        assert_eq!(f[3], Some(0.0));
        assert_eq!(readiness_features(&[], 5, 20), [None; 4]);
    }

    #[test]
    fn regular_posting_caps_steadiness() {
        let posts: Vec<PostRecord> = (0..10).map(|i| p(1000 + i * 600, false, "x")).collect();
        let f = readiness_features(&posts.iter().collect::<Vec<_>>(), 99_999, 20);
        assert_eq!(f[2], Some(1.0));
    }

    #[test]
    fn shipped_layout_has_119_features() {
        let fx = FeatureExtractor::shipped(FeatureConfig::default());
        assert_eq!(fx.len(), 119);
        assert_eq!(fx.groups().iter().filter(|g| **g == FeatureGroup::Personality).count(), 103);
    }

    #[test]
    fn empty_history_is_fully_masked_except_counts() {
        let corpus = Corpus::from_parts(
            vec![UserRecord {
                user_id: "u".into(),
                screen_name: "u".into(),
                profile_text: String::new(),
                account_created_at: 1,
            }],
            vec![],
            vec![],
            vec![],
        )
        .unwrap();
        let fx = FeatureExtractor::shipped(FeatureConfig::default());
        let v = fx.extract(&corpus, "u", 1000).unwrap();
        assert_eq!(v.len(), 119);
        // Only CountSocialWords and MsgCount are defined without any posts.
        let defined: Vec<&str> = v
            .names
            .iter()
            .zip(&v.missing_mask)
            .filter(|(_, m)| !**m)
            .map(|(n, _)| n.as_str())
            .collect();
        assert_eq!(defined, vec![PROFILE, "MsgCount"]);
        assert!(v.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn csv_round_trip_keeps_masks() {
        let t = FeatureTable {
            names: vec!["a".into(), "b".into()],
            rows: vec![
                FeatureRow {
                    user_id: "x,1".into(),
                    query_time: 5,
                    values: vec![Some(0.1), None],
                    label: Some(true),
                },
                FeatureRow {
                    user_id: "y".into(),
                    query_time: 6,
                    values: vec![None, Some(-3e-7)],
                    label: Some(false),
                },
            ],
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("user_id,query_time,a,b,responded\n"));
        assert_eq!(FeatureTable::read_csv(buf.as_slice()).unwrap(), t);
    }
}
