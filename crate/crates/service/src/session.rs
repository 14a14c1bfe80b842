//! The engagement session behind the HTTP facade. Everything here is
//! synchronous; the router serializes mutations through one write lock.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use solicit_core::corpus::{Corpus, PostRecord};
use solicit_core::features::{FeatureExtractor, FeatureGroup};
use solicit_core::model::TrainedModel;
use solicit_core::recommend::{recommend_ranked, rank_candidates, Constraints, RankedList};
use solicit_core::simulator::{
    generate_posts, true_response_probability, AgentSpec, Deployment, PostIds, SimConfig, Vocabulary,
    SOLICITATION_TEXT,
};

const DAY: i64 = 86_400;

/// Airport-domain keyword rules used when none are configured.
pub const DEFAULT_RULES: [&str; 3] = [
    r"\b(airport|terminal|gate|boarding|layover|luggage)\b",
    r"\b(tsa|security|checkpoint)\b",
    r"\b(flight|jfk|lax)\b",
];

const ANSWERS: [&str; 5] = [
    "about twenty minutes",
    "short line right now, maybe 5 min",
    "pretty long, 40 minutes or so",
    "just got through, 15 minutes",
    "no line at all at the moment",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Manual,
    Auto,
    Mixed,
}

impl FromStr for Mode {
    type Err = SessionError;

    fn from_str(s: &str) -> Result<Self, SessionError> {
        match s {
            "manual" => Ok(Mode::Manual),
            "auto" => Ok(Mode::Auto),
            "mixed" => Ok(Mode::Mixed),
            other => Err(SessionError::Invalid(format!(
                "unknown mode {other:?}; expected manual, auto or mixed"
            ))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Manual => "manual",
            Mode::Auto => "auto",
            Mode::Mixed => "mixed",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Internal(String),
}

impl From<solicit_core::Error> for SessionError {
    fn from(e: solicit_core::Error) -> Self {
        match e {
            solicit_core::Error::Constraint(m) | solicit_core::Error::Config(m) => SessionError::Invalid(m),
            other => SessionError::Internal(other.to_string()),
        }
    }
}

pub type SessionResult<T> = Result<T, SessionError>;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub mode: Mode,
    /// Case-insensitive regular expressions; a post is a candidate post when
    /// any of them matches its text.
    pub rules: Vec<String>,
    pub seed: u64,
    /// Authors of matching posts within this many seconds of the clock are
    /// the current candidates.
    pub candidate_window: i64,
    /// A solicitation without a reply is marked `no-response` this long after
    /// it was sent.
    pub response_timeout: i64,
    pub recent_posts: usize,
    pub stream_limit: usize,
    pub max_tick: i64,
    pub constraints: Constraints,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            mode: Mode::Manual,
            rules: DEFAULT_RULES.iter().map(|s| s.to_string()).collect(),
            seed: 42,
            candidate_window: DAY,
            response_timeout: DAY,
            recent_posts: 20,
            stream_limit: 100,
            max_tick: 7 * DAY,
            constraints: Constraints::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Operator,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    #[serde(rename = "pending")]
    Pending,
    #[serde(rename = "responded")]
    Responded,
    #[serde(rename = "no-response")]
    NoResponse,
}

#[derive(Debug, Clone, Serialize)]
pub struct Engagement {
    pub engagement_id: usize,
    pub user_id: String,
    pub screen_name: String,
    pub question: String,
    pub origin: Origin,
    pub mode: Mode,
    pub sent_at: i64,
    pub status: Status,
    pub response_at: Option<i64>,
    pub response_text: Option<String>,
    /// Hidden ground truth: when the agent will answer, if it will.
    #[serde(skip)]
    due: Option<(i64, String)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeChange {
    pub at: i64,
    pub from: Mode,
    pub to: Mode,
}

#[derive(Debug, Clone, Serialize)]
pub struct StreamPost {
    pub post_id: String,
    pub author_id: String,
    pub screen_name: String,
    pub timestamp: i64,
    pub text: String,
    pub is_retweet: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StreamPage {
    pub clock: i64,
    pub since: Option<i64>,
    pub posts: Vec<StreamPost>,
    /// Pass as `since` to continue; equal to the last returned timestamp.
    pub next_since: Option<i64>,
    pub more: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Candidate {
    pub user_id: String,
    pub screen_name: String,
    pub probability: f64,
    pub rank: usize,
    pub engaged: bool,
    pub matched_posts: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateView {
    pub clock: i64,
    pub window: i64,
    pub rules: Vec<String>,
    pub posts: Vec<StreamPost>,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeatureEntry {
    pub name: String,
    pub group: FeatureGroup,
    pub value: Option<f64>,
    pub masked: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct UserProfile {
    pub user_id: String,
    pub screen_name: String,
    pub profile_text: String,
    pub query_time: i64,
    pub recent_posts: Vec<StreamPost>,
    pub features: Vec<FeatureEntry>,
    pub probability: f64,
    pub rank: Option<usize>,
    pub candidate_count: usize,
    pub engaged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Recommendation {
    pub at: i64,
    pub constraints: Constraints,
    pub train_interval: Option<[usize; 2]>,
    pub train_rate: Option<f64>,
    pub test_interval: Option<[usize; 2]>,
    pub candidate_size: usize,
    pub selected: Vec<Candidate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TickReport {
    pub clock: i64,
    pub new_posts: usize,
    pub resolved: usize,
    pub auto_sent: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Tally {
    pub sent: usize,
    pub responded: usize,
    pub no_response: usize,
    pub pending: usize,
    /// Responded over resolved solicitations.
    pub response_rate: Option<f64>,
}

impl Tally {
    fn add(&mut self, e: &Engagement) {
        self.sent += 1;
        match e.status {
            Status::Pending => self.pending += 1,
            Status::Responded => self.responded += 1,
            Status::NoResponse => self.no_response += 1,
        }
        let resolved = self.responded + self.no_response;
        self.response_rate = (resolved > 0).then(|| self.responded as f64 / resolved as f64);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub session_id: String,
    pub mode: Mode,
    pub clock: i64,
    pub started_at: i64,
    pub model_kind: String,
    pub model_features: usize,
    pub constraints: Constraints,
    pub total: Tally,
    pub operator: Tally,
    pub auto: Tally,
    pub mode_log: Vec<ModeChange>,
}

pub struct Session {
    id: String,
    cfg: ServiceConfig,
    mode: Mode,
    mode_log: Vec<ModeChange>,
    started_at: i64,
    clock: i64,
    sim: SimConfig,
    agents: Vec<AgentSpec>,
    agent_index: HashMap<String, usize>,
    corpus: Corpus,
    rules: Vec<Regex>,
    /// Matching post indices in (timestamp, post id) order.
    stream: Vec<usize>,
    extractor: FeatureExtractor,
    model: TrainedModel,
    train_ranked: RankedList,
    candidates: Vec<Candidate>,
    constraints: Constraints,
    recommendation: Option<Recommendation>,
    engagements: Vec<Engagement>,
    engaged: HashSet<String>,
    vocab: Vocabulary,
    ids: PostIds,
    rng: ChaCha8Rng,
}

impl Session {
    pub fn new(deployment: Deployment, model: TrainedModel, cfg: ServiceConfig) -> SessionResult<Self> {
        cfg.constraints.validate()?;
        let rules = cfg
            .rules
            .iter()
            .map(|r| {
                RegexBuilder::new(r)
                    .case_insensitive(true)
                    .build()
                    .map_err(|e| SessionError::Invalid(format!("rule {r:?}: {e}")))
            })
            .collect::<SessionResult<Vec<_>>>()?;
        let extractor = FeatureExtractor::shipped(Default::default());
        let missing: Vec<&String> = model
            .feature_names
            .iter()
            .filter(|n| !extractor.names().contains(n))
            .collect();
        if !missing.is_empty() {
            return Err(SessionError::Invalid(format!("model uses unknown features {missing:?}")));
        }
        let train = extractor.labelled_table(&deployment.corpus)?;
        if train.rows.is_empty() {
            return Err(SessionError::Invalid("deployment has no past solicitations to calibrate on".into()));
        }
        let train_ranked = rank_candidates(&model, &train)?;
        let agent_index = deployment
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| (a.agent_id.clone(), i))
            .collect();
        let clock = deployment.config.end_time();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(7);
        let mut s = Session {
            id: format!("session-{}", cfg.seed),
            mode: cfg.mode,
            mode_log: Vec::new(),
            started_at: clock,
            clock,
            sim: deployment.config,
            agents: deployment.agents,
            agent_index,
            corpus: deployment.corpus,
            rules,
            stream: Vec::new(),
            extractor,
            model,
            train_ranked,
            candidates: Vec::new(),
            constraints: cfg.constraints,
            recommendation: None,
            engagements: Vec::new(),
            engaged: HashSet::new(),
            vocab: Vocabulary::shipped(),
            ids: PostIds::starting_at(deployment.next_post),
            rng,
            cfg,
        };
        s.rebuild_stream();
        s.refresh_candidates()?;
        Ok(s)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn clock(&self) -> i64 {
        self.clock
    }

    fn matches(&self, text: &str) -> bool {
        self.rules.iter().any(|r| r.is_match(text))
    }

    fn rebuild_stream(&mut self) {
        let posts = self.corpus.posts();
        let mut idx: Vec<usize> = (0..posts.len()).filter(|&i| self.matches(&posts[i].text)).collect();
        idx.sort_by(|&a, &b| {
            posts[a]
                .timestamp
                .cmp(&posts[b].timestamp)
                .then_with(|| posts[a].post_id.cmp(&posts[b].post_id))
        });
        self.stream = idx;
    }

    fn screen_name(&self, user_id: &str) -> String {
        self.corpus.user(user_id).map(|u| u.screen_name.clone()).unwrap_or_default()
    }

    fn view(&self, p: &PostRecord) -> StreamPost {
        StreamPost {
            post_id: p.post_id.clone(),
            author_id: p.author_id.clone(),
            screen_name: self.screen_name(&p.author_id),
            timestamp: p.timestamp,
            text: p.text.clone(),
            is_retweet: p.is_retweet,
        }
    }

    fn window_posts(&self) -> &[usize] {
        let posts = self.corpus.posts();
        let from = self.clock - self.cfg.candidate_window;
        let start = self.stream.partition_point(|&i| posts[i].timestamp <= from);
        &self.stream[start..]
    }

    /// Scores the authors of matching posts in the candidate window at the
    /// current clock.
    fn refresh_candidates(&mut self) -> SessionResult<()> {
        let posts = self.corpus.posts();
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for &i in self.window_posts() {
            *counts.entry(posts[i].author_id.as_str()).or_default() += 1;
        }
        let mut users: Vec<&str> = counts.keys().copied().collect();
        users.sort_unstable();
        let queries: Vec<(String, i64)> = users.iter().map(|u| (u.to_string(), self.clock)).collect();
        let table = self.extractor.unlabelled_table(&self.corpus, &queries)?;
        let ranked = rank_candidates(&self.model, &table)?;
        self.candidates = ranked
            .entries()
            .iter()
            .enumerate()
            .map(|(k, e)| Candidate {
                user_id: e.id.clone(),
                screen_name: self.screen_name(&e.id),
                probability: e.probability,
                rank: k + 1,
                engaged: self.engaged.contains(&e.id),
                matched_posts: counts[e.id.as_str()],
            })
            .collect();
        Ok(())
    }

    fn mark_engaged(&mut self, user_id: &str) {
        self.engaged.insert(user_id.to_string());
        for c in self.candidates.iter_mut().filter(|c| c.user_id == user_id) {
            c.engaged = true;
        }
        if let Some(r) = &mut self.recommendation {
            for c in r.selected.iter_mut().filter(|c| c.user_id == user_id) {
                c.engaged = true;
            }
        }
    }

    pub fn stream(&self, since: Option<i64>, limit: Option<usize>) -> SessionResult<StreamPage> {
        let limit = limit.unwrap_or(self.cfg.stream_limit);
        if limit == 0 {
            return Err(SessionError::Invalid("limit must be positive".into()));
        }
        let posts = self.corpus.posts();
        let start = since.map_or(0, |t| self.stream.partition_point(|&i| posts[i].timestamp <= t));
        let rest = &self.stream[start..];
        let mut end = limit.min(rest.len());
        // Never split a timestamp across pages, or `since` would skip posts.
        while end > 0 && end < rest.len() && posts[rest[end]].timestamp == posts[rest[end - 1]].timestamp {
            end += 1;
        }
        let page: Vec<StreamPost> = rest[..end].iter().map(|&i| self.view(&posts[i])).collect();
        Ok(StreamPage {
            clock: self.clock,
            since,
            next_since: page.last().map(|p| p.timestamp).or(since),
            more: end < rest.len(),
            posts: page,
        })
    }

    pub fn candidates(&self) -> CandidateView {
        let posts = self.corpus.posts();
        CandidateView {
            clock: self.clock,
            window: self.cfg.candidate_window,
            rules: self.cfg.rules.clone(),
            posts: self.window_posts().iter().rev().map(|&i| self.view(&posts[i])).collect(),
            candidates: self.candidates.clone(),
        }
    }

    pub fn user(&self, user_id: &str) -> SessionResult<UserProfile> {
        let user = self
            .corpus
            .user(user_id)
            .ok_or_else(|| SessionError::NotFound(format!("unknown user {user_id:?}")))?;
        let v = self.extractor.extract(&self.corpus, user_id, self.clock)?;
        let probability = self.model.predict_vector(&v)?;
        let tl = self.corpus.timeline_until(user_id, self.clock);
        let recent = tl.iter().rev().take(self.cfg.recent_posts).map(|p| self.view(p)).collect();
        let features = v
            .names
            .iter()
            .zip(self.extractor.groups())
            .zip(v.options())
            .map(|((name, &group), value)| FeatureEntry {
                name: name.clone(),
                group,
                value,
                masked: value.is_none(),
            })
            .collect();
        Ok(UserProfile {
            user_id: user.user_id.clone(),
            screen_name: user.screen_name.clone(),
            profile_text: user.profile_text.clone(),
            query_time: self.clock,
            recent_posts: recent,
            features,
            probability,
            rank: self.candidates.iter().find(|c| c.user_id == user_id).map(|c| c.rank),
            candidate_count: self.candidates.len(),
            engaged: self.engaged.contains(user_id),
        })
    }

    fn build_recommendation(&self, constraints: Constraints) -> SessionResult<Recommendation> {
        let open: Vec<&Candidate> = self.candidates.iter().filter(|c| !c.engaged).collect();
        let empty = Recommendation {
            at: self.clock,
            constraints,
            train_interval: None,
            train_rate: None,
            test_interval: None,
            candidate_size: open.len(),
            selected: Vec::new(),
        };
        if open.is_empty() {
            return Ok(empty);
        }
        let ids: Vec<String> = open.iter().map(|c| c.user_id.clone()).collect();
        let probs: Vec<f64> = open.iter().map(|c| c.probability).collect();
        let ranked = RankedList::from_scores(&ids, &probs, None)?;
        let sel = recommend_ranked(&self.train_ranked, &ranked, &constraints)?;
        let by_id: HashMap<&str, &Candidate> = open.iter().map(|c| (c.user_id.as_str(), *c)).collect();
        Ok(Recommendation {
            train_interval: Some(sel.train_interval),
            train_rate: Some(sel.train_rate),
            test_interval: Some(sel.test_interval),
            selected: sel.selected_ids.iter().map(|id| by_id[id.as_str()].clone()).collect(),
            ..empty
        })
    }

    /// Recomputes the recommendation under new constraints. Missing fields
    /// keep their current values.
    pub fn recommend(&mut self, min_fraction: Option<f64>, min_length: Option<usize>) -> SessionResult<Recommendation> {
        let c = Constraints {
            min_fraction: min_fraction.unwrap_or(self.constraints.min_fraction),
            min_length: min_length.unwrap_or(self.constraints.min_length),
            ..self.constraints
        };
        c.validate()?;
        let r = self.build_recommendation(c)?;
        self.constraints = c;
        self.recommendation = Some(r.clone());
        Ok(r)
    }

    pub fn engage(&mut self, user_id: &str, question: &str) -> SessionResult<Engagement> {
        if self.mode == Mode::Auto {
            return Err(SessionError::Conflict("operator sends are disabled in auto mode".into()));
        }
        if !self.agent_index.contains_key(user_id) {
            return Err(SessionError::NotFound(format!("unknown user {user_id:?}")));
        }
        if question.trim().is_empty() {
            return Err(SessionError::Invalid("question must not be empty".into()));
        }
        if self.engaged.contains(user_id) {
            return Err(SessionError::Conflict(format!("{user_id} was already asked in this session")));
        }
        if self.mode == Mode::Mixed {
            let approved = self
                .recommendation
                .as_ref()
                .is_some_and(|r| r.selected.iter().any(|c| c.user_id == user_id));
            if !approved {
                return Err(SessionError::Conflict(format!(
                    "{user_id} is not among the current recommendations; mixed mode only sends approved picks"
                )));
            }
        }
        Ok(self.send(user_id, question.to_string(), Origin::Operator))
    }

    fn send(&mut self, user_id: &str, question: String, origin: Origin) -> Engagement {
        let agent = &self.agents[self.agent_index[user_id]];
        let timeline = self.corpus.timeline_until(user_id, self.clock);
        let p = true_response_probability(agent, &self.sim.response, self.clock, &timeline);
        let responds = self.rng.random::<f64>() < p;
        let due = responds.then(|| {
            let delay: f64 = Exp::new(1.0 / agent.latency_scale).expect("positive latency").sample(&mut self.rng);
            let text = ANSWERS.choose(&mut self.rng).expect("answers").to_string();
            (self.clock + (delay.ceil() as i64).max(1), text)
        });
        let e = Engagement {
            engagement_id: self.engagements.len() + 1,
            user_id: user_id.to_string(),
            screen_name: self.screen_name(user_id),
            question,
            origin,
            mode: self.mode,
            sent_at: self.clock,
            status: Status::Pending,
            response_at: None,
            response_text: None,
            due,
        };
        self.engagements.push(e.clone());
        self.mark_engaged(user_id);
        e
    }

    pub fn engagements(&self) -> &[Engagement] {
        &self.engagements
    }

    pub fn set_mode(&mut self, mode: Mode) -> ModeChange {
        let change = ModeChange {
            at: self.clock,
            from: self.mode,
            to: mode,
        };
        self.mode = mode;
        self.mode_log.push(change.clone());
        change
    }

    pub fn tick(&mut self, seconds: i64) -> SessionResult<TickReport> {
        if seconds < 1 || seconds > self.cfg.max_tick {
            return Err(SessionError::Invalid(format!(
                "seconds must be in 1..={}, got {seconds}",
                self.cfg.max_tick
            )));
        }
        let (from, to) = (self.clock + 1, self.clock + seconds + 1);
        let mut fresh = Vec::new();
        for a in &self.agents {
            fresh.extend(generate_posts(&mut self.rng, a, &self.vocab, &self.sim, from, to, None, &mut self.ids));
        }
        let new_posts = fresh.len();
        self.corpus = self.corpus.extended(fresh)?;
        self.clock += seconds;
        self.rebuild_stream();

        let mut resolved = 0;
        for e in self.engagements.iter_mut().filter(|e| e.status == Status::Pending) {
            match &e.due {
                Some((at, text)) if *at <= self.clock => {
                    e.status = Status::Responded;
                    e.response_at = Some(*at);
                    e.response_text = Some(text.clone());
                    resolved += 1;
                }
                None if e.sent_at + self.cfg.response_timeout <= self.clock => {
                    e.status = Status::NoResponse;
                    resolved += 1;
                }
                _ => {}
            }
        }

        self.refresh_candidates()?;
        let mut auto_sent = Vec::new();
        if self.mode == Mode::Auto {
            let r = self.build_recommendation(self.constraints)?;
            for c in &r.selected {
                let question = format!("@{} {SOLICITATION_TEXT}", c.screen_name);
                self.send(&c.user_id, question, Origin::Auto);
                auto_sent.push(c.user_id.clone());
            }
            self.recommendation = Some(r);
        }
        Ok(TickReport {
            clock: self.clock,
            new_posts,
            resolved,
            auto_sent,
        })
    }

    pub fn report(&self) -> Report {
        let (mut total, mut operator, mut auto) = (Tally::default(), Tally::default(), Tally::default());
        for e in &self.engagements {
            total.add(e);
            match e.origin {
                Origin::Operator => operator.add(e),
                Origin::Auto => auto.add(e),
            }
        }
        Report {
            session_id: self.id.clone(),
            mode: self.mode,
            clock: self.clock,
            started_at: self.started_at,
            model_kind: self.model.kind.to_string(),
            model_features: self.model.feature_names.len(),
            constraints: self.constraints,
            total,
            operator,
            auto,
            mode_log: self.mode_log.clone(),
        }
    }

    pub fn recommendation(&self) -> Option<&Recommendation> {
        self.recommendation.as_ref()
    }
}
