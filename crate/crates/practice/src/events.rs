//! The append-only event log and the state folded from it.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sqlmend::eval::Verdict;

pub const LOG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VoteCategory {
    /// The participant's own correct query.
    #[serde(rename = "MCQ")]
    MyCorrect,
    /// A repair of one of the participant's incorrect queries.
    #[serde(rename = "MRQ")]
    MyRepaired,
    /// Someone else's correct query.
    #[serde(rename = "OCQ")]
    OtherCorrect,
    /// Someone else's repaired query.
    #[serde(rename = "ORQ")]
    OtherRepaired,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PoolRef {
    pub category: VoteCategory,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IssuedOption {
    pub label: String,
    pub query: String,
    /// Every category this query stands for, after consolidation.
    pub categories: Vec<VoteCategory>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pool: Vec<PoolRef>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(
    tag = "type",
    rename_all = "camelCase",
    rename_all_fields = "camelCase"
)]
pub enum EventKind {
    SessionStarted {
        participant: String,
    },
    Attempt {
        participant: String,
        problem: String,
        query: String,
        verdict: Verdict,
        revealed_pairs: usize,
    },
    Fatigue {
        participant: String,
        problem: String,
    },
    VoteOptions {
        participant: String,
        problem: String,
        options: Vec<IssuedOption>,
    },
    Rating {
        participant: String,
        problem: String,
        label: String,
        category: VoteCategory,
        score: u8,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rationale: Option<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub v: u32,
    pub ts: DateTime<Utc>,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl Event {
    pub fn new(ts: DateTime<Utc>, kind: EventKind) -> Self {
        Event {
            v: LOG_VERSION,
            ts,
            kind,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttemptRecord {
    pub query: String,
    pub verdict: Verdict,
    pub at: DateTime<Utc>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Rating {
    pub score: u8,
    pub rationale: Option<String>,
    #[serde(skip)]
    pub category: VoteCategory,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProblemProgress {
    pub attempts: Vec<AttemptRecord>,
    pub revealed_pairs: usize,
    pub solved: bool,
    pub fatigued: bool,
    pub options: Option<Vec<IssuedOption>>,
    pub ratings: BTreeMap<String, Rating>,
}

impl Default for ProblemProgress {
    fn default() -> Self {
        ProblemProgress {
            attempts: Vec::new(),
            revealed_pairs: 1,
            solved: false,
            fatigued: false,
            options: None,
            ratings: BTreeMap::new(),
        }
    }
}

impl ProblemProgress {
    pub fn first_attempt_at(&self) -> Option<DateTime<Utc>> {
        self.attempts.first().map(|a| a.at)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Session {
    pub problems: HashMap<String, ProblemProgress>,
}

/// Everything the service knows, as a fold over the event log.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct State {
    pub sessions: HashMap<String, Session>,
    /// How often each pool entry was shown, per problem.
    pub shows: HashMap<(String, PoolRef), u32>,
}

impl State {
    pub fn replay<'a>(events: impl IntoIterator<Item = &'a Event>) -> State {
        let mut state = State::default();
        for e in events {
            state.apply(e);
        }
        state
    }

    pub fn progress(&self, participant: &str, problem: &str) -> Option<&ProblemProgress> {
        self.sessions.get(participant)?.problems.get(problem)
    }

    fn progress_mut(&mut self, participant: &str, problem: &str) -> &mut ProblemProgress {
        self.sessions
            .entry(participant.to_string())
            .or_default()
            .problems
            .entry(problem.to_string())
            .or_default()
    }

    pub fn apply(&mut self, event: &Event) {
        match &event.kind {
            EventKind::SessionStarted { participant } => {
                self.sessions.entry(participant.clone()).or_default();
            }
            EventKind::Attempt {
                participant,
                problem,
                query,
                verdict,
                revealed_pairs,
            } => {
                let p = self.progress_mut(participant, problem);
                p.attempts.push(AttemptRecord {
                    query: query.clone(),
                    verdict: *verdict,
                    at: event.ts,
                });
                p.revealed_pairs = p.revealed_pairs.max(*revealed_pairs);
                p.solved |= *verdict == Verdict::Correct;
            }
            EventKind::Fatigue {
                participant,
                problem,
            } => {
                self.progress_mut(participant, problem).fatigued = true;
            }
            EventKind::VoteOptions {
                participant,
                problem,
                options,
            } => {
                for r in options.iter().flat_map(|o| &o.pool) {
                    *self.shows.entry((problem.clone(), *r)).or_insert(0) += 1;
                }
                self.progress_mut(participant, problem).options = Some(options.clone());
            }
            EventKind::Rating {
                participant,
                problem,
                label,
                category,
                score,
                rationale,
            } => {
                let rating = Rating {
                    score: *score,
                    rationale: rationale.clone(),
                    category: *category,
                };
                self.progress_mut(participant, problem)
                    .ratings
                    .insert(label.clone(), rating);
            }
        }
    }
}

/// Appends events as JSON lines. Without a path, events are kept in memory only.
pub struct EventLog {
    file: Option<File>,
}

impl EventLog {
    pub fn in_memory() -> Self {
        EventLog { file: None }
    }

    /// Opens (or creates) `path` and returns the log with the events already in it.
    pub fn open(path: &Path) -> std::io::Result<(EventLog, Vec<Event>)> {
        let mut events = Vec::new();
        if path.exists() {
            for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let event: Event = serde_json::from_str(&line).map_err(|e| {
                    std::io::Error::new(
                        std::io::ErrorKind::InvalidData,
                        format!("event log line {}: {e}", i + 1),
                    )
                })?;
                events.push(event);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok((EventLog { file: Some(file) }, events))
    }

    pub fn append(&mut self, event: &Event) -> std::io::Result<()> {
        if let Some(file) = &mut self.file {
            let mut line = serde_json::to_string(event).expect("event serializes");
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        Ok(())
    }
}
