//! Users, posts and solicitation outcomes, plus the per-user interaction
//! summaries (direct/indirect questions and reply latencies) derived from them.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const USERS_FILE: &str = "users.jsonl";
pub const POSTS_FILE: &str = "posts.jsonl";
pub const SOLICITATIONS_FILE: &str = "solicitations.jsonl";
pub const EXPOSURES_FILE: &str = "exposures.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub screen_name: String,
    #[serde(default)]
    pub profile_text: String,
    pub account_created_at: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostRecord {
    pub post_id: String,
    pub author_id: String,
    pub timestamp: i64,
    pub text: String,
    #[serde(default)]
    pub is_retweet: bool,
    #[serde(default)]
    pub in_reply_to_post: Option<String>,
    #[serde(default)]
    pub mentions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolicitationRecord {
    pub target_user: String,
    pub question_text: String,
    pub sent_at: i64,
    pub responded: bool,
    #[serde(default)]
    pub response_at: Option<i64>,
    #[serde(default)]
    pub response_text: Option<String>,
}

/// Explicit indirect-question exposure for one user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExposureRecord {
    pub user_id: String,
    pub exposed_post_ids: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InteractionSummary {
    pub direct_questions_received: usize,
    pub responses_to_direct: usize,
    /// Seconds from each answered direct question to the user's first reply.
    pub response_latencies: Vec<f64>,
    pub indirect_questions_exposed: usize,
    pub responses_to_indirect: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostClass {
    DirectQuestion,
    IndirectQuestion,
    NotQuestion,
}

pub fn is_question(text: &str) -> bool {
    text.contains('?')
}

/// Classifies `post` relative to `subject`. A question is directed at the
/// subject when it mentions them or contains `@screen_name` (case-insensitive).
pub fn classify_post(post: &PostRecord, subject: &UserRecord) -> PostClass {
    if !is_question(&post.text) {
        return PostClass::NotQuestion;
    }
    let mentioned = post.mentions.contains(&subject.user_id);
    let handle = format!("@{}", subject.screen_name.to_lowercase());
    if mentioned || post.text.to_lowercase().contains(&handle) {
        PostClass::DirectQuestion
    } else {
        PostClass::IndirectQuestion
    }
}

/// Immutable, indexed corpus. Cheap to share across threads.
#[derive(Debug, Clone)]
pub struct Corpus {
    users: Vec<UserRecord>,
    user_index: HashMap<String, usize>,
    posts: Vec<PostRecord>,
    post_index: HashMap<String, usize>,
    timelines: Vec<Vec<usize>>,
    solicitations: Vec<SolicitationRecord>,
    exposures: HashMap<usize, Vec<usize>>,
    /// Per user: question posts by others directed at that user, time-ordered.
    directed: Vec<Vec<usize>>,
    /// Question post -> replies to it, time-ordered.
    replies: HashMap<usize, Vec<usize>>,
    /// Per user: (other user, edge time) for every reply edge touching the user.
    reply_edges: Vec<Vec<(usize, i64)>>,
    /// Per user: question posts they authored, time-ordered.
    authored_questions: Vec<Vec<usize>>,
}

impl Corpus {
    /// Validates and indexes raw records.
    pub fn from_parts(
        users: Vec<UserRecord>,
        posts: Vec<PostRecord>,
        solicitations: Vec<SolicitationRecord>,
        exposures: Vec<ExposureRecord>,
    ) -> Result<Self> {
        let mut user_index = HashMap::with_capacity(users.len());
        for (i, u) in users.iter().enumerate() {
            if u.screen_name.is_empty() {
                return Err(Error::Integrity(format!(
                    "user {} has an empty screen_name",
                    u.user_id
                )));
            }
            if user_index.insert(u.user_id.clone(), i).is_some() {
                return Err(Error::Integrity(format!("duplicate user_id {}", u.user_id)));
            }
        }

        let mut post_index = HashMap::with_capacity(posts.len());
        let mut timelines = vec![Vec::new(); users.len()];
        for (i, p) in posts.iter().enumerate() {
            if post_index.insert(p.post_id.clone(), i).is_some() {
                return Err(Error::Integrity(format!("duplicate post_id {}", p.post_id)));
            }
            if p.timestamp <= 0 {
                return Err(Error::Integrity(format!(
                    "post {} has non-positive timestamp {}",
                    p.post_id, p.timestamp
                )));
            }
            let Some(&author) = user_index.get(&p.author_id) else {
                return Err(Error::Integrity(format!(
                    "post {} references unknown author_id {}",
                    p.post_id, p.author_id
                )));
            };
            timelines[author].push(i);
        }
        for timeline in &mut timelines {
            timeline.sort_by(|&a, &b| {
                (posts[a].timestamp, &posts[a].post_id).cmp(&(posts[b].timestamp, &posts[b].post_id))
            });
        }

        let mut replies: HashMap<usize, Vec<usize>> = HashMap::new();
        let mut reply_edges = vec![Vec::new(); users.len()];
        for (i, p) in posts.iter().enumerate() {
            let Some(parent_id) = &p.in_reply_to_post else { continue };
            let Some(&parent) = post_index.get(parent_id) else { continue };
            if posts[parent].timestamp >= p.timestamp {
                return Err(Error::Integrity(format!(
                    "reply {} does not follow the post {} it answers",
                    p.post_id, parent_id
                )));
            }
            replies.entry(parent).or_default().push(i);
            let a = user_index[&p.author_id];
            let b = user_index[&posts[parent].author_id];
            if a != b {
                reply_edges[a].push((b, p.timestamp));
                reply_edges[b].push((a, p.timestamp));
            }
        }
        for list in replies.values_mut() {
            list.sort_by_key(|&r| (posts[r].timestamp, r));
        }

        for s in &solicitations {
            if !user_index.contains_key(&s.target_user) {
                return Err(Error::Integrity(format!(
                    "solicitation targets unknown user {}",
                    s.target_user
                )));
            }
            match (s.responded, s.response_at) {
                (true, Some(at)) if at < s.sent_at => {
                    return Err(Error::Integrity(format!(
                        "solicitation to {} answered before it was sent",
                        s.target_user
                    )))
                }
                (true, Some(_)) | (false, None) => {}
                _ => {
                    return Err(Error::Integrity(format!(
                        "solicitation to {}: responded must be true exactly when response_at is set",
                        s.target_user
                    )))
                }
            }
        }

        let mut exposure_index = HashMap::new();
        for e in exposures {
            let Some(&u) = user_index.get(&e.user_id) else {
                return Err(Error::Integrity(format!(
                    "exposure entry for unknown user {}",
                    e.user_id
                )));
            };
            let mut ids = Vec::with_capacity(e.exposed_post_ids.len());
            for pid in &e.exposed_post_ids {
                let Some(&p) = post_index.get(pid) else {
                    return Err(Error::Integrity(format!(
                        "exposure for {} references unknown post {}",
                        e.user_id, pid
                    )));
                };
                ids.push(p);
            }
            ids.sort_unstable();
            ids.dedup();
            if exposure_index.insert(u, ids).is_some() {
                return Err(Error::Integrity(format!(
                    "duplicate exposure entry for {}",
                    e.user_id
                )));
            }
        }

        let mut corpus = Corpus {
            users,
            user_index,
            posts,
            post_index,
            timelines,
            solicitations,
            exposures: exposure_index,
            directed: Vec::new(),
            replies,
            reply_edges,
            authored_questions: Vec::new(),
        };
        corpus.index_questions();
        Ok(corpus)
    }

    fn index_questions(&mut self) {
        let n = self.users.len();
        let mut directed = vec![Vec::new(); n];
        let mut authored = vec![Vec::new(); n];

        // Screen names made of word characters can be found by scanning the
        // handle tokens after each '@'; anything else is checked directly.
        let mut by_handle: HashMap<String, Vec<usize>> = HashMap::new();
        let mut irregular = Vec::new();
        for (i, u) in self.users.iter().enumerate() {
            let lower = u.screen_name.to_lowercase();
            if lower.chars().all(is_handle_char) {
                by_handle.entry(lower).or_default().push(i);
            } else {
                irregular.push((i, format!("@{lower}")));
            }
        }

        for (pi, p) in self.posts.iter().enumerate() {
            if !is_question(&p.text) {
                continue;
            }
            let author = self.user_index[&p.author_id];
            authored[author].push(pi);

            let mut targets: BTreeSet<usize> = p
                .mentions
                .iter()
                .filter_map(|m| self.user_index.get(m).copied())
                .collect();
            if p.text.contains('@') {
                let lower = p.text.to_lowercase();
                for (at, _) in lower.match_indices('@') {
                    let token: String = lower[at + 1..].chars().take_while(|&c| is_handle_char(c)).collect();
                    let mut end = 0;
                    for c in token.chars() {
                        end += c.len_utf8();
                        if let Some(us) = by_handle.get(&token[..end]) {
                            targets.extend(us.iter().copied());
                        }
                    }
                }
                for (u, handle) in &irregular {
                    if lower.contains(handle.as_str()) {
                        targets.insert(*u);
                    }
                }
            }
            for t in targets {
                if t != author {
                    directed[t].push(pi);
                }
            }
        }
        let posts = &self.posts;
        for list in directed.iter_mut().chain(authored.iter_mut()) {
            list.sort_by_key(|&p| (posts[p].timestamp, p));
        }
        self.directed = directed;
        self.authored_questions = authored;
    }

    pub fn users(&self) -> &[UserRecord] {
        &self.users
    }

    pub fn posts(&self) -> &[PostRecord] {
        &self.posts
    }

    pub fn solicitations(&self) -> &[SolicitationRecord] {
        &self.solicitations
    }

    pub fn user(&self, user_id: &str) -> Option<&UserRecord> {
        self.user_index.get(user_id).map(|&i| &self.users[i])
    }

    pub fn user_position(&self, user_id: &str) -> Option<usize> {
        self.user_index.get(user_id).copied()
    }

    pub fn post(&self, post_id: &str) -> Option<&PostRecord> {
        self.post_index.get(post_id).map(|&i| &self.posts[i])
    }

    pub fn has_exposures(&self) -> bool {
        !self.exposures.is_empty()
    }

    /// The user's posts in ascending time order.
    pub fn timeline(&self, user_id: &str) -> Vec<&PostRecord> {
        match self.user_index.get(user_id) {
            Some(&u) => self.timelines[u].iter().map(|&p| &self.posts[p]).collect(),
            None => Vec::new(),
        }
    }

    /// The user's posts with `timestamp <= cutoff`, ascending.
    pub fn timeline_until(&self, user_id: &str, cutoff: i64) -> Vec<&PostRecord> {
        let Some(&u) = self.user_index.get(user_id) else {
            return Vec::new();
        };
        let tl = &self.timelines[u];
        let end = tl.partition_point(|&p| self.posts[p].timestamp <= cutoff);
        tl[..end].iter().map(|&p| &self.posts[p]).collect()
    }

    pub fn exposures_of(&self, user_id: &str) -> Option<Vec<&PostRecord>> {
        let u = *self.user_index.get(user_id)?;
        self.exposures
            .get(&u)
            .map(|ids| ids.iter().map(|&p| &self.posts[p]).collect())
    }

    /// Interaction summary over the whole corpus.
    pub fn derive_interactions(&self, user_id: &str) -> Result<InteractionSummary> {
        self.derive_interactions_until(user_id, i64::MAX)
    }

    /// Interaction summary using only questions and replies posted at or
    /// before `cutoff`.
    pub fn derive_interactions_until(&self, user_id: &str, cutoff: i64) -> Result<InteractionSummary> {
        let &u = self
            .user_index
            .get(user_id)
            .ok_or_else(|| Error::Contract(format!("unknown user {user_id}")))?;
        let mut summary = InteractionSummary::default();

        for &q in &self.directed[u] {
            let question = &self.posts[q];
            if question.timestamp > cutoff {
                break;
            }
            summary.direct_questions_received += 1;
            if let Some(reply) = self.first_reply_by(q, u, cutoff) {
                summary.responses_to_direct += 1;
                summary
                    .response_latencies
                    .push((self.posts[reply].timestamp - question.timestamp) as f64);
            }
        }

        let subject = &self.users[u];
        let indirect: Vec<usize> = match self.exposures.get(&u) {
            Some(ids) => ids
                .iter()
                .copied()
                .filter(|&p| {
                    let post = &self.posts[p];
                    post.timestamp <= cutoff
                        && post.author_id != subject.user_id
                        && classify_post(post, subject) == PostClass::IndirectQuestion
                })
                .collect(),
            None => {
                let neighbours: BTreeSet<usize> = self.reply_edges[u]
                    .iter()
                    .filter(|&&(_, t)| t <= cutoff)
                    .map(|&(other, _)| other)
                    .collect();
                let mut qs = Vec::new();
                for n in neighbours {
                    for &p in &self.authored_questions[n] {
                        let post = &self.posts[p];
                        if post.timestamp > cutoff {
                            break;
                        }
                        if classify_post(post, subject) == PostClass::IndirectQuestion {
                            qs.push(p);
                        }
                    }
                }
                qs
            }
        };
        summary.indirect_questions_exposed = indirect.len();
        summary.responses_to_indirect = indirect
            .iter()
            .filter(|&&q| self.first_reply_by(q, u, cutoff).is_some())
            .count();
        Ok(summary)
    }

    fn first_reply_by(&self, question: usize, user: usize, cutoff: i64) -> Option<usize> {
        let uid = &self.users[user].user_id;
        self.replies.get(&question)?.iter().copied().find(|&r| {
            let reply = &self.posts[r];
            reply.timestamp <= cutoff && reply.author_id == *uid
        })
    }

    /// Reads `users.jsonl`, `posts.jsonl` and, when present,
    /// `solicitations.jsonl` and `exposures.jsonl` from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let sol = dir.join(SOLICITATIONS_FILE);
        let exp = dir.join(EXPOSURES_FILE);
        load_corpus_with_exposures(
            &dir.join(USERS_FILE),
            &dir.join(POSTS_FILE),
            sol.exists().then_some(sol.as_path()),
            exp.exists().then_some(exp.as_path()),
        )
    }

    /// Writes the corpus back out in the JSONL layout `load_dir` reads.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        write_jsonl(&dir.join(USERS_FILE), &self.users)?;
        write_jsonl(&dir.join(POSTS_FILE), &self.posts)?;
        write_jsonl(&dir.join(SOLICITATIONS_FILE), &self.solicitations)?;
        write_jsonl(&dir.join(EXPOSURES_FILE), &self.exposure_records())
    }

    fn exposure_records(&self) -> Vec<ExposureRecord> {
        let mut exposures: Vec<(usize, &Vec<usize>)> = self.exposures.iter().map(|(&u, v)| (u, v)).collect();
        exposures.sort_by_key(|&(u, _)| u);
        exposures
            .into_iter()
            .map(|(u, ids)| ExposureRecord {
                user_id: self.users[u].user_id.clone(),
                exposed_post_ids: ids.iter().map(|&p| self.posts[p].post_id.clone()).collect(),
            })
            .collect()
    }

    /// A new corpus with `extra` posts appended, validated like the original.
    pub fn extended(&self, extra: Vec<PostRecord>) -> Result<Corpus> {
        let mut posts = self.posts.clone();
        posts.extend(extra);
        Corpus::from_parts(self.users.clone(), posts, self.solicitations.clone(), self.exposure_records())
    }
}

fn is_handle_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

pub fn load_corpus(users: &Path, posts: &Path, solicitations: Option<&Path>) -> Result<Corpus> {
    load_corpus_with_exposures(users, posts, solicitations, None)
}

pub fn load_corpus_with_exposures(
    users: &Path,
    posts: &Path,
    solicitations: Option<&Path>,
    exposures: Option<&Path>,
) -> Result<Corpus> {
    let users = read_jsonl(users)?;
    let posts = read_jsonl(posts)?;
    let solicitations = match solicitations {
        Some(p) => read_jsonl(p)?,
        None => Vec::new(),
    };
    let exposures = match exposures {
        Some(p) => read_jsonl(p)?,
        None => Vec::new(),
    };
    Corpus::from_parts(users, posts, solicitations, exposures)
}

/// Reads newline-delimited JSON. Blank lines are skipped; errors carry the
/// 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    }
    w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
