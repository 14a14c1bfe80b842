//! Seeded synthetic social platform.
//!
//! Each agent has latent willingness, responsiveness and sociability drawn
//! through a Gaussian copula, posts as an inhomogeneous Poisson process shaped
//! by diurnal and weekday weights, and answers peer questions with its own
//! probability and latency. The ground-truth response model for solicitations
//! is [`ResponseModel`].

pub mod experiment;

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{
    read_jsonl, write_jsonl, Corpus, ExposureRecord, PostRecord, SolicitationRecord, UserRecord, EXPOSURES_FILE, POSTS_FILE,
    SOLICITATIONS_FILE, USERS_FILE,
};
use crate::error::{Error, Result};
use crate::features::{hour_of_day, weekday};

pub use experiment::{
    cost_sweep, feature_sweep, interval_sweep_experiment, run_live_experiment, ArmReport, CostSweepRow,
    ExperimentConfig, ExperimentReport, FeatureSweepRow, IntervalSweepReport,
};

pub const DEFAULT_VOCABULARY_JSON: &str = include_str!("../../data/vocabulary.json");
pub const AGENTS_FILE: &str = "agents.jsonl";
pub const CANDIDATES_FILE: &str = "candidates.jsonl";
pub const CONFIG_FILE: &str = "sim_config.json";

const DAY: i64 = 86_400;
const HOUR: i64 = 3_600;
/// Monday 2023-11-13 00:00 UTC.
pub const DEFAULT_START: i64 = 1_699_833_600;

const SOCIAL_CATEGORIES: [&str; 3] = ["social", "communication", "friends"];
const NEUTRAL: &str = "neutral";
const TOPIC: &str = "topic_airport";

pub fn sigmoid(z: f64) -> f64 {
    crate::model::logistic::sigmoid(z)
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / SQRT_2)
}

/// Ground-truth solicitation response model:
/// `sigmoid(b0 + b1 w + b2 exp(-inactivity / tau) a + b3 diurnal(hour) a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseModel {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub tau_seconds: f64,
}

impl Default for ResponseModel {
    fn default() -> Self {
        ResponseModel {
            b0: -2.2,
            b1: 3.5,
            b2: 1.2,
            b3: 1.0,
            tau_seconds: 6.0 * HOUR as f64,
        }
    }
}

impl ResponseModel {
    pub fn probability(&self, willingness: f64, sensitivity: f64, inactivity: Option<f64>, diurnal: f64) -> f64 {
        let recency = inactivity.map_or(0.0, |s| (-s.max(0.0) / self.tau_seconds).exp());
        sigmoid(self.b0 + self.b1 * willingness + self.b2 * recency * sensitivity + self.b3 * diurnal * sensitivity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub population: usize,
    pub days: u32,
    pub seed: u64,
    pub start_time: i64,
    /// Population mean of expected posts per day.
    pub mean_rate: f64,
    pub corr_w_rho: f64,
    pub corr_w_s: f64,
    /// Defaults to `corr_w_rho * corr_w_s`, which is always satisfiable.
    pub corr_rho_s: Option<f64>,
    pub corr_w_activity: f64,
    /// Willingness is `Phi(z)^willingness_exponent`; larger values make
    /// willing agents rarer.
    pub willingness_exponent: f64,
    /// Readiness sensitivity is uniform on `[0, readiness_max]`.
    pub readiness_max: f64,
    /// Mean direct peer questions per agent over the window.
    pub direct_questions: f64,
    /// Mean indirect questions each agent is exposed to.
    pub indirect_exposures: f64,
    /// Indirect replies happen with probability `rho * indirect_response_scale`.
    pub indirect_response_scale: f64,
    /// Share of organic posts mentioning the deployment topic.
    pub topic_rate: f64,
    pub words_per_post: f64,
    pub question_budget: usize,
    /// Solicitations fall uniformly in the last `solicitation_window` seconds.
    pub solicitation_window: i64,
    pub response: ResponseModel,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            population: 1000,
            days: 30,
            seed: 42,
            start_time: DEFAULT_START,
            mean_rate: 5.0,
            corr_w_rho: 0.95,
            corr_w_s: 0.85,
            corr_rho_s: None,
            corr_w_activity: 0.0,
            willingness_exponent: 3.0,
            readiness_max: 1.0,
            direct_questions: 30.0,
            indirect_exposures: 10.0,
            indirect_response_scale: 0.5,
            topic_rate: 0.1,
            words_per_post: 10.0,
            question_budget: 100,
            solicitation_window: DAY,
            response: ResponseModel::default(),
        }
    }
}

impl SimConfig {
    pub fn end_time(&self) -> i64 {
        self.start_time + self.days as i64 * DAY
    }

    pub fn validate(&self) -> Result<()> {
        let knobs = [
            self.corr_w_rho,
            self.corr_w_s,
            self.corr_rho_s.unwrap_or(0.0),
            self.corr_w_activity,
        ];
        if knobs.iter().any(|c| !(-1.0..=1.0).contains(c)) {
            return Err(Error::Config("correlation knobs must lie in [-1, 1]".into()));
        }
        if self.population < 2 || self.days == 0 {
            return Err(Error::Config("need at least 2 agents and 1 day".into()));
        }
        if !(self.mean_rate > 0.0) || self.words_per_post < 1.0 {
            return Err(Error::Config("mean_rate must be positive and words_per_post at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.topic_rate) || !(0.0..=1.0).contains(&self.indirect_response_scale) {
            return Err(Error::Config("topic_rate and indirect_response_scale must lie in [0, 1]".into()));
        }
        if !(self.willingness_exponent > 0.0) || !(self.readiness_max >= 0.0) {
            return Err(Error::Config("willingness_exponent must be positive and readiness_max non-negative".into()));
        }
        if self.direct_questions < 0.0 || self.indirect_exposures < 0.0 {
            return Err(Error::Config("question rates must be non-negative".into()));
        }
        if self.solicitation_window <= 0 || self.solicitation_window > self.days as i64 * DAY {
            return Err(Error::Config("solicitation_window must fit inside the simulated window".into()));
        }
        latent_cholesky(self).map(|_| ())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Latent order: willingness, responsiveness, sociability, activity, retweet.
fn latent_cholesky(cfg: &SimConfig) -> Result<[[f64; 5]; 5]> {
    let mut c = [[0.0; 5]; 5];
    for (i, row) in c.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let rho_s = cfg.corr_rho_s.unwrap_or(cfg.corr_w_rho * cfg.corr_w_s);
    for (i, j, v) in [(0, 1, cfg.corr_w_rho), (0, 2, cfg.corr_w_s), (1, 2, rho_s), (0, 3, cfg.corr_w_activity)] {
        c[i][j] = v;
        c[j][i] = v;
    }
    let mut l = [[0.0; 5]; 5];
    for i in 0..5 {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = c[i][i] - s;
                if d < -1e-12 {
                    return Err(Error::Config(
                        "trait correlation matrix is not positive semidefinite".into(),
                    ));
                }
                l[i][i] = d.max(0.0).sqrt();
            } else {
                l[i][j] = if l[j][j] > 0.0 { (c[i][j] - s) / l[j][j] } else { 0.0 };
            }
        }
    }
    Ok(l)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub agent_id: String,
    /// Expected posts per day.
    pub activity_rate: f64,
    pub diurnal_weights: Vec<f64>,
    pub weekday_weights: Vec<f64>,
    pub responsiveness: f64,
    /// Mean reply delay in seconds.
    pub latency_scale: f64,
    pub retweet_propensity: f64,
    pub sociability: f64,
    pub willingness: f64,
    pub readiness_sensitivity: f64,
}

impl AgentSpec {
    /// Posting intensity per second at `t`; averages to `activity_rate / DAY`
    /// over a whole week.
    pub fn intensity(&self, t: i64) -> f64 {
        self.activity_rate * 7.0 * 24.0 * self.weekday_weights[weekday(t)] * self.diurnal_weights[hour_of_day(t)]
            / DAY as f64
    }

    pub fn diurnal_at(&self, t: i64) -> f64 {
        self.diurnal_weights[hour_of_day(t)]
    }
}

/// Ground-truth response probability for a solicitation at `question_time`
/// given the agent's posts up to that moment.
pub fn true_response_probability(
    agent: &AgentSpec,
    model: &ResponseModel,
    question_time: i64,
    timeline: &[&PostRecord],
) -> f64 {
    let last = timeline.iter().filter(|p| p.timestamp <= question_time).map(|p| p.timestamp).max();
    let inactivity = last.map(|l| (question_time - l) as f64);
    model.probability(
        agent.willingness,
        agent.readiness_sensitivity,
        inactivity,
        agent.diurnal_at(question_time),
    )
}

/// Category-tagged word lists used to compose post text.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    categories: BTreeMap<String, Vec<String>>,
    social: Vec<String>,
    other: Vec<String>,
}

impl Vocabulary {
    pub fn from_json(json: &str) -> Result<Self> {
        let categories: BTreeMap<String, Vec<String>> = serde_json::from_str(json)?;
        for required in [NEUTRAL, TOPIC] {
            if categories.get(required).is_none_or(|w| w.is_empty()) {
                return Err(Error::Config(format!("vocabulary lacks a non-empty {required:?} list")));
            }
        }
        let social: Vec<String> = SOCIAL_CATEGORIES
            .iter()
            .filter_map(|c| categories.get(*c))
            .flatten()
            .cloned()
            .collect();
        if social.is_empty() {
            return Err(Error::Config("vocabulary has no social words".into()));
        }
        let other: Vec<String> = categories
            .iter()
            .filter(|(k, _)| k.as_str() != TOPIC && k.as_str() != NEUTRAL && !SOCIAL_CATEGORIES.contains(&k.as_str()))
            .flat_map(|(_, v)| v.iter().cloned())
            .collect();
        if categories.values().flatten().any(|w| w.contains('?') || w.contains('@')) {
            return Err(Error::Config("vocabulary words may not contain '?' or '@'".into()));
        }
        Ok(Vocabulary {
            categories,
            social,
            other,
        })
    }

    pub fn shipped() -> Self {
        Self::from_json(DEFAULT_VOCABULARY_JSON).expect("shipped vocabulary is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_json(&s)
    }

    pub fn topic_words(&self) -> &[String] {
        &self.categories[TOPIC]
    }

    fn words(&self, cat: &str) -> &[String] {
        &self.categories[cat]
    }

    /// `n` words; each is social with probability `0.05 + 0.3 s`, neutral
    /// with probability 0.35, otherwise from the remaining categories.
    fn compose<R: Rng>(&self, rng: &mut R, sociability: f64, n: usize) -> Vec<String> {
        let p_social = 0.05 + 0.3 * sociability;
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                let pool = if u < p_social {
                    &self.social
                } else if u < p_social + 0.35 {
                    self.words(NEUTRAL)
                } else {
                    &self.other
                };
                pool.choose(rng).expect("non-empty pool").clone()
            })
            .collect()
    }
}

/// Sequential post-id source shared by generation and timeline extension.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PostIds {
    next: u64,
}

impl PostIds {
    pub fn starting_at(next: u64) -> Self {
        PostIds { next }
    }

    pub fn next_id(&mut self) -> String {
        self.next += 1;
        format!("p{:08}", self.next)
    }
}

fn draw_poisson<R: Rng>(rng: &mut R, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as usize
}

/// Hour-aligned slots covering `[from, to)` with their expected post counts.
fn slot_means(agent: &AgentSpec, from: i64, to: i64) -> Vec<(i64, i64, f64)> {
    let mut out = Vec::new();
    let mut t = from;
    while t < to {
        let end = ((t.div_euclid(HOUR) + 1) * HOUR).min(to);
        out.push((t, end, agent.intensity(t) * (end - t) as f64));
        t = end;
    }
    out
}

/// Organic posts by `agent` in `[from, to)`. With `expected_total`, slot
/// means are rescaled so the total count is Poisson with exactly that mean.
pub fn generate_posts<R: Rng>(
    rng: &mut R,
    agent: &AgentSpec,
    vocab: &Vocabulary,
    cfg: &SimConfig,
    from: i64,
    to: i64,
    expected_total: Option<f64>,
    ids: &mut PostIds,
) -> Vec<PostRecord> {
    let mut slots = slot_means(agent, from, to);
    if let Some(total) = expected_total {
        let s: f64 = slots.iter().map(|x| x.2).sum();
        if s > 0.0 {
            slots.iter_mut().for_each(|x| x.2 *= total / s);
        }
    }
    let mut times = Vec::new();
    for (a, b, mean) in slots {
        for _ in 0..draw_poisson(rng, mean) {
            times.push(rng.random_range(a..b));
        }
    }
    times.sort_unstable();
    let words = Poisson::new(cfg.words_per_post - 1.0).ok();
    times
        .into_iter()
        .map(|t| {
            let n = 1 + words.map_or(0, |d| d.sample(rng) as usize);
            let mut text = vocab.compose(rng, agent.sociability, n);
            if rng.random::<f64>() < cfg.topic_rate {
                let at = rng.random_range(0..=text.len());
                text.insert(at, vocab.topic_words().choose(rng).expect("topic words").clone());
            }
            let is_retweet = rng.random::<f64>() < agent.retweet_propensity;
            let body = text.join(" ");
            PostRecord {
                post_id: ids.next_id(),
                author_id: agent.agent_id.clone(),
                timestamp: t,
                text: if is_retweet { format!("RT {body}") } else { body },
                is_retweet,
                in_reply_to_post: None,
                mentions: Vec::new(),
            }
        })
        .collect()
}

fn draw_agents(cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Result<Vec<AgentSpec>> {
    let l = latent_cholesky(cfg)?;
    let width = cfg.population.to_string().len().max(4);
    let mut agents = Vec::with_capacity(cfg.population);
    let mut raw_rates = Vec::with_capacity(cfg.population);
    for i in 0..cfg.population {
        let e: [f64; 5] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let z: [f64; 5] = std::array::from_fn(|r| (0..=r).map(|k| l[r][k] * e[k]).sum());
        raw_rates.push((0.5 * z[3]).exp());
        let peak = rng.random_range(0.0..24.0);
        let kappa = rng.random_range(0.5..2.0);
        let mut diurnal: Vec<f64> = (0..24)
            .map(|h| (kappa * (2.0 * PI * (h as f64 - peak) / 24.0).cos()).exp())
            .collect();
        let ds: f64 = diurnal.iter().sum();
        diurnal.iter_mut().for_each(|w| *w /= ds);
        let mut week: Vec<f64> = (0..7).map(|_| 1.0 + 0.5 * rng.random::<f64>()).collect();
        let ws: f64 = week.iter().sum();
        week.iter_mut().for_each(|w| *w /= ws);
        let ln_latency: f64 = (1800.0f64).ln() + 0.7 * rng.sample::<f64, _>(StandardNormal);
        agents.push(AgentSpec {
            agent_id: format!("u{i:0width$}"),
            activity_rate: 0.0,
            diurnal_weights: diurnal,
            weekday_weights: week,
            responsiveness: 0.05 + 0.9 * std_normal_cdf(z[1]),
            latency_scale: ln_latency.exp(),
            retweet_propensity: 0.02 + 0.38 * std_normal_cdf(z[4]),
            sociability: std_normal_cdf(z[2]),
            willingness: std_normal_cdf(z[0]).powf(cfg.willingness_exponent),
            readiness_sensitivity: cfg.readiness_max * rng.random::<f64>(),
        });
    }
    let mean_raw = raw_rates.iter().sum::<f64>() / raw_rates.len() as f64;
    for (a, r) in agents.iter_mut().zip(raw_rates) {
        a.activity_rate = cfg.mean_rate * r / mean_raw;
    }
    Ok(agents)
}

fn screen_name(agent_id: &str) -> String {
    format!("agent{}", &agent_id[1..])
}

/// One solicitation target: who, when, and the ground truth at that moment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub user_id: String,
    pub query_time: i64,
    pub p_true: f64,
    /// Common random number deciding the outcome: responds iff `draw < p_true`.
    pub draw: f64,
}

impl Query {
    pub fn responds(&self) -> bool {
        self.draw < self.p_true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub user_id: String,
    pub query_time: i64,
}

/// A generated platform: agents, their corpus, a labelled training pool
/// (solicited in the past) and an unlabelled candidate pool.
#[derive(Debug, Clone)]
pub struct Population {
    pub config: SimConfig,
    pub agents: Vec<AgentSpec>,
    pub users: Vec<UserRecord>,
    pub posts: Vec<PostRecord>,
    pub exposures: Vec<ExposureRecord>,
    pub solicitations: Vec<SolicitationRecord>,
    pub train: Vec<Query>,
    pub candidates: Vec<Query>,
    pub next_post: u64,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

pub const SOLICITATION_TEXT: &str = "quick question: how long is the security line at the airport right now?";

pub fn generate_population(cfg: &SimConfig, vocab: &Vocabulary) -> Result<Population> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, 1);
    let agents = draw_agents(cfg, &mut rng)?;
    let n = agents.len();
    let (start, end) = (cfg.start_time, cfg.end_time());

    let users: Vec<UserRecord> = agents
        .iter()
        .map(|a| {
            let k = rng.random_range(3..9);
            UserRecord {
                user_id: a.agent_id.clone(),
                screen_name: screen_name(&a.agent_id),
                profile_text: vocab.compose(&mut rng, a.sociability, k).join(" "),
                account_created_at: start - rng.random_range(30..2000) * DAY,
            }
        })
        .collect();

    let mut post_rng = stream(cfg.seed, 2);
    let mut ids = PostIds::default();
    let mut timelines: Vec<Vec<PostRecord>> = agents
        .iter()
        .map(|a| {
            let total = a.activity_rate * cfg.days as f64;
            generate_posts(&mut post_rng, a, vocab, cfg, start, end, Some(total), &mut ids)
        })
        .collect();

    // Peer questions reuse existing organic posts so each agent's post count
    // stays Poisson.
    let mut irng = stream(cfg.seed, 3);
    let mut converted: Vec<Vec<bool>> = timelines.iter().map(|t| vec![false; t.len()]).collect();
    let mut exposures: Vec<Vec<String>> = vec![Vec::new(); n];
    let pick_source = |irng: &mut ChaCha8Rng, converted: &Vec<Vec<bool>>, timelines: &Vec<Vec<PostRecord>>, target: usize| {
        let asker = loop {
            let a = irng.random_range(0..n);
            if a != target {
                break a;
            }
        };
        let open: Vec<usize> = (0..timelines[asker].len())
            .filter(|&k| !converted[asker][k] && !timelines[asker][k].is_retweet)
            .collect();
        open.choose(irng).map(|&k| (asker, k))
    };
    for target in 0..n {
        let direct = draw_poisson(&mut irng, cfg.direct_questions);
        let indirect = draw_poisson(&mut irng, cfg.indirect_exposures);
        for q in 0..direct + indirect {
            let is_direct = q < direct;
            let Some((asker, k)) = pick_source(&mut irng, &converted, &timelines, target) else {
                continue;
            };
            converted[asker][k] = true;
            let len = 4 + irng.random_range(0..6);
            let body = vocab.compose(&mut irng, agents[asker].sociability, len).join(" ");
            let post = &mut timelines[asker][k];
            if is_direct {
                post.text = format!("@{} {body}?", users[target].screen_name);
                post.mentions = vec![agents[target].agent_id.clone()];
            } else {
                post.text = format!("{body}?");
                exposures[target].push(post.post_id.clone());
            }
            let (q_id, q_time) = (post.post_id.clone(), post.timestamp);
            let p_reply = if is_direct {
                agents[target].responsiveness
            } else {
                agents[target].responsiveness * cfg.indirect_response_scale
            };
            if irng.random::<f64>() >= p_reply {
                continue;
            }
            let delay: f64 = Exp::new(1.0 / agents[target].latency_scale).expect("positive").sample(&mut irng);
            let after = q_time + delay.ceil() as i64;
            let slot = (0..timelines[target].len()).find(|&r| {
                let p = &timelines[target][r];
                p.timestamp > q_time && p.timestamp >= after && !converted[target][r] && !p.is_retweet
            });
            if let Some(r) = slot {
                converted[target][r] = true;
                let reply = &mut timelines[target][r];
                let len = 3 + irng.random_range(0..6);
                let words = vocab.compose(&mut irng, agents[target].sociability, len);
                reply.text = format!("@{} {}", users[asker].screen_name, words.join(" "));
                reply.mentions = vec![agents[asker].agent_id.clone()];
                reply.in_reply_to_post = Some(q_id);
            }
        }
    }

    // Every agent is solicited once near the end of the window; a seeded half
    // forms the labelled training pool, the rest are candidates.
    let mut qrng = stream(cfg.seed, 4);
    let queries: Vec<Query> = agents
        .iter()
        .zip(&timelines)
        .map(|(a, tl)| {
            let qt = end - qrng.random_range(0..cfg.solicitation_window);
            let before: Vec<&PostRecord> = tl.iter().filter(|p| p.timestamp <= qt).collect();
            Query {
                user_id: a.agent_id.clone(),
                query_time: qt,
                p_true: true_response_probability(a, &cfg.response, qt, &before),
                draw: qrng.random(),
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut qrng);
    let half = n / 2;
    let mut train_idx = order[..half].to_vec();
    let mut cand_idx = order[half..].to_vec();
    train_idx.sort_unstable();
    cand_idx.sort_unstable();
    let take = |idx: &[usize]| -> Vec<Query> { idx.iter().map(|&i| queries[i].clone()).collect() };
    let train = take(&train_idx);
    let candidates = take(&cand_idx);

    let solicitations = train_idx
        .iter()
        .zip(&train)
        .map(|(&i, q)| {
            let a = &agents[i];
            let responded = q.responds();
            let delay = Exp::new(1.0 / a.latency_scale).expect("positive").sample(&mut qrng).ceil() as i64;
            SolicitationRecord {
                target_user: q.user_id.clone(),
                question_text: format!("@{} {SOLICITATION_TEXT}", screen_name(&q.user_id)),
                sent_at: q.query_time,
                responded,
                response_at: responded.then_some(q.query_time + delay),
                response_text: responded.then(|| "about twenty minutes".to_string()),
            }
        })
        .collect();

    let exposures = exposures
        .into_iter()
        .zip(&agents)
        .filter(|(e, _)| !e.is_empty())
        .map(|(e, a)| ExposureRecord {
            user_id: a.agent_id.clone(),
            exposed_post_ids: e,
        })
        .collect();

    Ok(Population {
        config: cfg.clone(),
        agents,
        users,
        posts: timelines.into_iter().flatten().collect(),
        exposures,
        solicitations,
        train,
        candidates,
        next_post: ids.next,
    })
}

impl Population {
    pub fn corpus(&self) -> Result<Corpus> {
        Corpus::from_parts(
            self.users.clone(),
            self.posts.clone(),
            self.solicitations.clone(),
            self.exposures.clone(),
        )
    }

    pub fn agent(&self, id: &str) -> Option<&AgentSpec> {
        self.agents.iter().find(|a| a.agent_id == id)
    }

    pub fn candidate_records(&self) -> Vec<CandidateRecord> {
        self.candidates
            .iter()
            .map(|q| CandidateRecord {
                user_id: q.user_id.clone(),
                query_time: q.query_time,
            })
            .collect()
    }

    /// Writes the corpus JSONL files plus agents, candidates and the config.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let mut written = Vec::new();
        let mut out = |name: &str| {
            let p = dir.join(name);
            written.push(p.clone());
            p
        };
        write_jsonl(&out(USERS_FILE), &self.users)?;
        write_jsonl(&out(POSTS_FILE), &self.posts)?;
        write_jsonl(&out(EXPOSURES_FILE), &self.exposures)?;
        write_jsonl(&out(SOLICITATIONS_FILE), &self.solicitations)?;
        write_jsonl(&out(AGENTS_FILE), &self.agents)?;
        write_jsonl(&out(CANDIDATES_FILE), &self.candidate_records())?;
        let cfg_path = out(CONFIG_FILE);
        std::fs::write(&cfg_path, serde_json::to_string_pretty(&self.config)?)
            .map_err(|e| Error::io(format!("writing {}", cfg_path.display()), e))?;
        Ok(written)
    }
}

/// Reads `sim_config.json` from a directory written by [`Population::write_dir`].
pub fn read_config(dir: &Path) -> Result<SimConfig> {
    let p = dir.join(CONFIG_FILE);
    let s = std::fs::read_to_string(&p).map_err(|e| Error::io(format!("reading {}", p.display()), e))?;
    Ok(serde_json::from_str(&s)?)
}

/// A simulated platform as read back from disk: the ground-truth agents, the
/// observable corpus and the candidate pool.
#[derive(Debug, Clone)]
pub struct Deployment {
    pub config: SimConfig,
    pub agents: Vec<AgentSpec>,
    pub corpus: Corpus,
    pub candidates: Vec<CandidateRecord>,
    /// Highest post number in use; extensions continue after it.
    pub next_post: u64,
}

impl Deployment {
    pub fn load(dir: &Path) -> Result<Self> {
        let config = read_config(dir)?;
        let agents: Vec<AgentSpec> = read_jsonl(&dir.join(AGENTS_FILE))?;
        let corpus = Corpus::load_dir(dir)?;
        let cand = dir.join(CANDIDATES_FILE);
        let candidates = if cand.exists() { read_jsonl(&cand)? } else { Vec::new() };
        for a in &agents {
            if corpus.user(&a.agent_id).is_none() {
                return Err(Error::Integrity(format!("agent {} has no user record", a.agent_id)));
            }
        }
        let next_post = corpus
            .posts()
            .iter()
            .filter_map(|p| p.post_id.strip_prefix('p')?.parse::<u64>().ok())
            .max()
            .unwrap_or(0);
        Ok(Deployment {
            config,
            agents,
            corpus,
            candidates,
            next_post,
        })
    }
}

impl Population {
    pub fn deployment(&self) -> Result<Deployment> {
        Ok(Deployment {
            config: self.config.clone(),
            agents: self.agents.clone(),
            corpus: self.corpus()?,
            candidates: self.candidate_records(),
            next_post: self.next_post,
        })
    }
}

/// Bernoulli realization of a response.
pub fn sample_response<R: Rng>(rng: &mut R, p_true: f64) -> bool {
    rng.random::<f64>() < p_true
}
