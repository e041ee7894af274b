//! HTTP service for practice sessions: problems revealed one example pair
//! at a time, graded attempts, a fatigue exit, and understandability votes
//! over correct and repaired queries.

pub mod clock;
pub mod events;
pub mod pool;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State as AxumState};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::TimeDelta;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sqlmend::eval::{triage, Triage, Verdict};
use sqlmend::pipeline::repair_latest;
use sqlmend::query::parse_lenient;
use sqlmend::synth::Budget;
use sqlmend::table::{ProblemSpec, Table};

use clock::Clock;
use events::{
    Event, EventKind, EventLog, IssuedOption, PoolRef, ProblemProgress, State, VoteCategory,
};
use pool::Pool;

pub const PARTICIPANT_HEADER: &str = "x-participant-id";
pub const FATIGUE_ATTEMPTS: usize = 5;
pub const FATIGUE_AFTER: TimeDelta = TimeDelta::minutes(5);
const LABELS: [&str; 4] = ["A", "B", "C", "D"];

pub struct Config {
    pub problems: Vec<ProblemSpec>,
    pub pool: Pool,
    pub clock: Arc<dyn Clock>,
    pub seed: u64,
    /// Event log location; `None` keeps events in memory.
    pub log_path: Option<PathBuf>,
}

struct Inner {
    state: State,
    log: EventLog,
    rng: StdRng,
}

pub struct Service {
    problems: BTreeMap<String, ProblemSpec>,
    pool: Pool,
    clock: Arc<dyn Clock>,
    inner: Mutex<Inner>,
}

impl Service {
    /// Builds the service, replaying any existing event log.
    pub fn new(config: Config) -> std::io::Result<Arc<Service>> {
        let (log, past) = match &config.log_path {
            Some(path) => EventLog::open(path)?,
            None => (EventLog::in_memory(), Vec::new()),
        };
        let state = State::replay(&past);
        Ok(Arc::new(Service {
            problems: config
                .problems
                .into_iter()
                .map(|p| (p.id.clone(), p))
                .collect(),
            pool: config.pool,
            clock: config.clock,
            inner: Mutex::new(Inner {
                state,
                log,
                rng: StdRng::seed_from_u64(config.seed),
            }),
        }))
    }

    /// A copy of the current folded state.
    pub fn state(&self) -> State {
        self.inner.lock().unwrap().state.clone()
    }

    fn record(&self, inner: &mut Inner, kind: EventKind) -> Result<(), ApiError> {
        let event = Event::new(self.clock.now(), kind);
        inner
            .log
            .append(&event)
            .map_err(|e| ApiError::internal(format!("event log: {e}")))?;
        inner.state.apply(&event);
        Ok(())
    }

    fn problem(&self, id: &str) -> Result<&ProblemSpec, ApiError> {
        self.problems
            .get(id)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown problem `{id}`")))
    }

    fn fatigue_available(&self, progress: &ProblemProgress) -> bool {
        progress.attempts.len() >= FATIGUE_ATTEMPTS
            && progress
                .first_attempt_at()
                .is_some_and(|t| self.clock.now() - t >= FATIGUE_AFTER)
    }
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/problems", get(list_problems))
        .route("/problems/{id}", get(get_problem))
        .route("/problems/{id}/attempts", post(submit_attempt))
        .route("/problems/{id}/fatigue", post(press_fatigue))
        .route("/problems/{id}/vote-options", post(vote_options))
        .route("/problems/{id}/ratings", get(get_ratings))
        .route("/ratings", post(submit_rating))
        .with_state(service)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type Shared = AxumState<Arc<Service>>;

fn participant(service: &Service, headers: &HeaderMap) -> Result<String, ApiError> {
    let id = headers
        .get(PARTICIPANT_HEADER)
        .and_then(|v| v.to_str().ok())
        .ok_or_else(|| {
            ApiError::new(
                StatusCode::UNAUTHORIZED,
                format!("missing {PARTICIPANT_HEADER} header"),
            )
        })?;
    if !service
        .inner
        .lock()
        .unwrap()
        .state
        .sessions
        .contains_key(id)
    {
        return Err(ApiError::new(
            StatusCode::UNAUTHORIZED,
            "unknown participant",
        ));
    }
    Ok(id.to_string())
}

async fn create_session(AxumState(service): Shared) -> Result<impl IntoResponse, ApiError> {
    let mut inner = service.inner.lock().unwrap();
    let id = loop {
        let id = format!("{:016x}", inner.rng.random::<u64>());
        if !inner.state.sessions.contains_key(&id) {
            break id;
        }
    };
    service.record(
        &mut inner,
        EventKind::SessionStarted {
            participant: id.clone(),
        },
    )?;
    Ok((StatusCode::CREATED, Json(json!({ "participantId": id }))))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ProblemSummary<'a> {
    id: &'a str,
    description: &'a str,
    total_pairs: usize,
    revealed_pairs: usize,
    solved: bool,
}

#[derive(Serialize)]
struct PairView<'a> {
    source: &'a Table,
    destination: &'a Table,
}

async fn list_problems(
    AxumState(service): Shared,
    headers: HeaderMap,
) -> Result<impl IntoResponse, ApiError> {
    let who = participant(&service, &headers)?;
    let inner = service.inner.lock().unwrap();
    let list: Vec<_> = service
        .problems
        .values()
        .map(|p| {
            let progress = inner.state.progress(&who, &p.id);
            ProblemSummary {
                id: &p.id,
                description: &p.description,
                total_pairs: p.pairs.len(),
                revealed_pairs: progress.map_or(1, |s| s.revealed_pairs),
                solved: progress.is_some_and(|s| s.solved),
            }
        })
        .collect();
    Ok(Json(json!(list)))
}

async fn get_problem(
    AxumState(service): Shared,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    let who = participant(&service, &headers)?;
    let problem = service.problem(&id)?;
    let inner = service.inner.lock().unwrap();
    let progress = inner.state.progress(&who, &id);
    let revealed = progress.map_or(1, |s| s.revealed_pairs);
    let pairs: Vec<_> = problem
        .pairs
        .iter()
        .take(revealed)
        .map(|p| PairView {
            source: &p.source,
            destination: &p.destination,
        })
        .collect();
    Ok(Json(json!({
        "id": problem.id,
        "description": problem.description,
        "totalPairs": problem.pairs.len(),
        "revealedPairs": revealed,
        "solved": progress.is_some_and(|s| s.solved),
        "pairs": pairs,
    })))
}

#[derive(Deserialize)]
struct AttemptBody {
    query: String,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Feedback<'a> {
    revealed_pairs: usize,
    /// Index of the pair the tables below belong to.
    pair: usize,
    expected: &'a Table,
    actual: Option<&'a Table>,
    message: String,
}

fn feedback<'a>(problem: &'a ProblemSpec, t: &'a Triage, revealed: usize) -> Feedback<'a> {
    let pair = t.first_failing_pair.unwrap_or(0);
    let message = match t.verdict {
        Verdict::Correct => "Congratulations, your query solved the problem!".to_string(),
        Verdict::SemanticError => format!(
            "Your proposed query didn't solve the problem on example {}.",
            pair + 1
        ),
        Verdict::SyntaxError => {
            format!(
                "Your query could not be run: {}",
                t.detail.as_deref().unwrap_or("syntax error")
            )
        }
    };
    Feedback {
        revealed_pairs: revealed,
        pair,
        expected: &problem.pairs[pair].destination,
        actual: t.actual_output.as_ref(),
        message,
    }
}

async fn submit_attempt(
    AxumState(service): Shared,
    headers: HeaderMap,
    Path(id): Path<String>,
    body: Option<Json<AttemptBody>>,
) -> Result<impl IntoResponse, ApiError> {
    let who = participant(&service, &headers)?;
    let problem = service.problem(&id)?;
    let Some(Json(body)) = body else {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "expected a JSON body with a `query` field",
        ));
    };
    if body.query.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "empty query"));
    }
    let t = triage(&body.query, problem);

    let mut inner = service.inner.lock().unwrap();
    let before = inner
        .state
        .progress(&who, &id)
        .map_or(1, |s| s.revealed_pairs);
    let revealed = match t.first_failing_pair {
        Some(f) => before.max(f + 1),
        None => before,
    };
    service.record(
        &mut inner,
        EventKind::Attempt {
            participant: who.clone(),
            problem: id.clone(),
            query: body.query.clone(),
            verdict: t.verdict,
            revealed_pairs: revealed,
        },
    )?;
    let progress = inner.state.progress(&who, &id).expect("just recorded");
    let fatigue_button = service.fatigue_available(progress);
    Ok(Json(json!({
        "verdict": t.verdict,
        "feedback": feedback(problem, &t, revealed),
        "fatigueButton": fatigue_button,
        "solved": progress.solved,
        "attemptCount": progress.attempts.len(),
    })))
}

async fn press_fatigue(
    AxumState(service): Shared,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    let who = participant(&service, &headers)?;
    service.problem(&id)?;
    let mut inner = service.inner.lock().unwrap();
    let available = inner
        .state
        .progress(&who, &id)
        .is_some_and(|p| p.fatigued || service.fatigue_available(p));
    if !available {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!(
                "available after {FATIGUE_ATTEMPTS} attempts over {} minutes",
                FATIGUE_AFTER.num_minutes()
            ),
        ));
    }
    service.record(
        &mut inner,
        EventKind::Fatigue {
            participant: who,
            problem: id,
        },
    )?;
    Ok(StatusCode::NO_CONTENT)
}

/// Canonical text used to decide whether two queries are the same.
fn normalize(text: &str) -> String {
    match parse_lenient(text) {
        Ok(q) if q.is_strict() => q.to_string(),
        _ => text.split_whitespace().collect::<Vec<_>>().join(" "),
    }
}

/// Least-shown entry of one pool list; ties go to the earliest entry.
fn least_shown(
    state: &State,
    problem: &str,
    category: VoteCategory,
    queries: &[String],
) -> Option<(PoolRef, String)> {
    (0..queries.len())
        .map(|index| PoolRef { category, index })
        .min_by_key(|r| {
            (
                state
                    .shows
                    .get(&(problem.to_string(), *r))
                    .copied()
                    .unwrap_or(0),
                r.index,
            )
        })
        .map(|r| (r, queries[r.index].clone()))
}

#[derive(Serialize)]
struct OptionView<'a> {
    label: &'a str,
    query: &'a str,
}

fn options_view(options: &[IssuedOption]) -> serde_json::Value {
    let mut views: Vec<_> = options
        .iter()
        .map(|o| OptionView {
            label: &o.label,
            query: &o.query,
        })
        .collect();
    views.sort_by_key(|v| v.label);
    json!({ "options": views })
}

async fn vote_options(
    AxumState(service): Shared,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    let who = participant(&service, &headers)?;
    let problem = service.problem(&id)?.clone();

    let attempts = {
        let inner = service.inner.lock().unwrap();
        let progress = inner.state.progress(&who, &id);
        if let Some(options) = progress.and_then(|p| p.options.as_ref()) {
            return Ok(Json(options_view(options)));
        }
        if !progress.is_some_and(|p| p.solved || p.fatigued) {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "solve the problem or keep trying first",
            ));
        }
        progress.map(|p| p.attempts.clone()).unwrap_or_default()
    };

    let mine_correct = attempts
        .iter()
        .rev()
        .find(|a| a.verdict == Verdict::Correct)
        .map(|a| a.query.clone());
    let history: Vec<(String, Triage)> = attempts
        .iter()
        .map(|a| (a.query.clone(), triage(&a.query, &problem)))
        .collect();
    let mine_repaired = if history.iter().any(|(_, t)| !t.is_correct()) {
        let problem = problem.clone();
        tokio::task::spawn_blocking(move || repair_latest(&history, &problem, Budget::default()))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))?
            .repaired_text()
    } else {
        None
    };

    let mut inner = service.inner.lock().unwrap();
    if let Some(options) = inner
        .state
        .progress(&who, &id)
        .and_then(|p| p.options.as_ref())
    {
        return Ok(Json(options_view(options)));
    }
    let mut candidates: Vec<(VoteCategory, String, Option<PoolRef>)> = Vec::new();
    if let Some(q) = mine_correct {
        candidates.push((VoteCategory::MyCorrect, q, None));
    }
    if let Some(q) = mine_repaired {
        candidates.push((VoteCategory::MyRepaired, q, None));
    }
    if let Some(entry) = service.pool.entry(&id) {
        for (category, list) in [
            (VoteCategory::OtherCorrect, &entry.correct),
            (VoteCategory::OtherRepaired, &entry.repaired),
        ] {
            if let Some((r, q)) = least_shown(&inner.state, &id, category, list) {
                candidates.push((category, q, Some(r)));
            }
        }
    }

    let mut options: Vec<IssuedOption> = Vec::new();
    for (category, query, pool) in candidates {
        let key = normalize(&query);
        match options.iter_mut().find(|o| normalize(&o.query) == key) {
            Some(existing) => {
                existing.categories.push(category);
                existing.pool.extend(pool);
            }
            None => options.push(IssuedOption {
                label: String::new(),
                query,
                categories: vec![category],
                pool: pool.into_iter().collect(),
            }),
        }
    }
    options.shuffle(&mut inner.rng);
    for (option, label) in options.iter_mut().zip(LABELS) {
        option.label = label.to_string();
    }
    service.record(
        &mut inner,
        EventKind::VoteOptions {
            participant: who,
            problem: id,
            options: options.clone(),
        },
    )?;
    Ok(Json(options_view(&options)))
}

#[derive(Deserialize)]
struct RatingBody {
    problem: String,
    label: String,
    score: i64,
    #[serde(default)]
    rationale: Option<String>,
}

async fn submit_rating(
    AxumState(service): Shared,
    headers: HeaderMap,
    body: Option<Json<RatingBody>>,
) -> Result<impl IntoResponse, ApiError> {
    let who = participant(&service, &headers)?;
    let Some(Json(body)) = body else {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "expected a JSON body with problem, label and score",
        ));
    };
    if !(1..=7).contains(&body.score) {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "score must be between 1 and 7",
        ));
    }
    let mut inner = service.inner.lock().unwrap();
    let category = inner
        .state
        .progress(&who, &body.problem)
        .and_then(|p| p.options.as_ref())
        .and_then(|opts| opts.iter().find(|o| o.label == body.label))
        .map(|o| o.categories[0])
        .ok_or_else(|| {
            ApiError::new(
                StatusCode::CONFLICT,
                format!("label `{}` was not issued to you", body.label),
            )
        })?;
    service.record(
        &mut inner,
        EventKind::Rating {
            participant: who,
            problem: body.problem,
            label: body.label,
            category,
            score: body.score as u8,
            rationale: body.rationale,
        },
    )?;
    Ok(StatusCode::NO_CONTENT)
}

async fn get_ratings(
    AxumState(service): Shared,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    let who = participant(&service, &headers)?;
    service.problem(&id)?;
    let inner = service.inner.lock().unwrap();
    let ratings = inner
        .state
        .progress(&who, &id)
        .map(|p| p.ratings.clone())
        .unwrap_or_default();
    Ok(Json(json!({ "ratings": ratings })))
}
