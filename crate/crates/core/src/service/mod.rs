//! Grid-game sessions for live players.
//!
//! Every session change is an event appended to a JSON-lines log before it
//! takes effect in memory. Replaying the log rebuilds every session
//! exactly, including its trace CSV.

pub mod http;
mod session;

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use session::{
    hindsight_profit, Bulletin, DecisionAck, FinalReport, GameSession, Money, PriceChance,
    SessionStatus, SubmitOutcome, WindowFit,
};

use crate::decision::DecisionError;
use crate::fitting::traces_to_csv;
use crate::market::{
    generate_scenario, standard_price_distribution, GenerationDistribution, PriceDistribution,
    Scenario, ValidationError, DEFAULT_HORIZON, DEFAULT_INITIAL_UNITS,
};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("no session with id {0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("don't try to sell more than you have: asked to sell {requested}, {stored} stored")]
    InsufficientUnits { requested: u32, stored: u32 },
    #[error("the game is not finished yet")]
    NotCompleted,
    #[error("invalid session parameters: {0}")]
    Invalid(#[from] ValidationError),
    #[error(transparent)]
    Decision(#[from] DecisionError),
    #[error("event log {path}: {message}")]
    Log { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionParams {
    pub horizon: u32,
    pub seed: Option<u64>,
    pub distribution: PriceDistribution,
    pub generation: GenerationDistribution,
    pub initial_units: u32,
    pub weekend_offset: f64,
}

impl Default for SessionParams {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            seed: None,
            distribution: standard_price_distribution(),
            generation: GenerationDistribution::standard(),
            initial_units: DEFAULT_INITIAL_UNITS,
            weekend_offset: 0.0,
        }
    }
}

impl SessionParams {
    /// Samples the session's scenario. The first day's generation is zeroed:
    /// the opening balance is all a player holds on day one.
    pub fn scenario(&self, seed: u64) -> Result<Scenario, ValidationError> {
        let mut scenario = generate_scenario(
            &self.distribution,
            &self.generation,
            self.horizon,
            seed,
            self.weekend_offset,
        )?;
        scenario.generated_units[0] = 0;
        scenario.initial_units = self.initial_units;
        Ok(scenario)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created {
        session_id: String,
        scenario: Scenario,
        distribution: PriceDistribution,
    },
    Decision {
        session_id: String,
        day: u32,
        units: u32,
    },
}

impl Event {
    pub fn session_id(&self) -> &str {
        match self {
            Event::Created { session_id, .. } | Event::Decision { session_id, .. } => session_id,
        }
    }
}

/// Rebuilds sessions from an event sequence.
pub fn replay<'a>(
    events: impl IntoIterator<Item = &'a Event>,
) -> Result<HashMap<String, GameSession>, ServiceError> {
    let mut sessions: HashMap<String, GameSession> = HashMap::new();
    for event in events {
        match event {
            Event::Created {
                session_id,
                scenario,
                distribution,
            } => {
                sessions.insert(
                    session_id.clone(),
                    GameSession::new(session_id.clone(), scenario.clone(), distribution.clone()),
                );
            }
            Event::Decision {
                session_id,
                day,
                units,
            } => {
                sessions
                    .get_mut(session_id)
                    .ok_or_else(|| ServiceError::NotFound(session_id.clone()))?
                    .apply(*day, *units)?;
            }
        }
    }
    Ok(sessions)
}

pub fn read_log(path: &Path) -> Result<Vec<Event>, ServiceError> {
    let log_err = |message: String| ServiceError::Log {
        path: path.to_owned(),
        message,
    };
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(log_err(e.to_string())),
    };
    let mut events = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| log_err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let event =
            serde_json::from_str(&line).map_err(|e| log_err(format!("line {}: {e}", n + 1)))?;
        events.push(event);
    }
    Ok(events)
}

struct EventLog {
    path: PathBuf,
    file: File,
}

impl EventLog {
    fn append(&mut self, event: &Event) -> Result<(), ServiceError> {
        let mut line = serde_json::to_string(event).expect("events serialize");
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.sync_data())
            .map_err(|e| ServiceError::Log {
                path: self.path.clone(),
                message: e.to_string(),
            })
    }
}

/// All sessions, with an optional on-disk event log.
///
/// Submissions to one session are serialized by that session's lock, so a
/// concurrent duplicate for the same day is rejected rather than counted
/// twice.
pub struct SessionStore {
    sessions: Mutex<HashMap<String, Arc<Mutex<GameSession>>>>,
    log: Option<Mutex<EventLog>>,
    events: Mutex<Vec<Event>>,
}

impl SessionStore {
    pub fn in_memory() -> Self {
        Self {
            sessions: Mutex::default(),
            log: None,
            events: Mutex::default(),
        }
    }

    /// Opens (or creates) the log at `path` and replays it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref().to_owned();
        let events = read_log(&path)?;
        let sessions = replay(&events)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| ServiceError::Log {
                path: path.clone(),
                message: e.to_string(),
            })?;
        Ok(Self {
            sessions: Mutex::new(
                sessions
                    .into_iter()
                    .map(|(id, s)| (id, Arc::new(Mutex::new(s))))
                    .collect(),
            ),
            log: Some(Mutex::new(EventLog { path, file })),
            events: Mutex::new(events),
        })
    }

    fn record(&self, event: Event) -> Result<(), ServiceError> {
        if let Some(log) = &self.log {
            log.lock().unwrap().append(&event)?;
        }
        self.events.lock().unwrap().push(event);
        Ok(())
    }

    /// Every event accepted so far, in order.
    pub fn events(&self) -> Vec<Event> {
        self.events.lock().unwrap().clone()
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<GameSession>>, ServiceError> {
        self.sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.to_owned()))
    }

    pub fn create_session(&self, params: &SessionParams) -> Result<Bulletin, ServiceError> {
        let mut rng = rand::thread_rng();
        let seed = params.seed.unwrap_or_else(|| rng.gen());
        let scenario = params.scenario(seed)?;
        let id = format!("{:032x}", rng.gen::<u128>());
        let session = GameSession::new(id.clone(), scenario.clone(), params.distribution.clone());
        let bulletin = session.bulletin();
        // Hold the map lock across the append so log order matches creation.
        let mut sessions = self.sessions.lock().unwrap();
        self.record(Event::Created {
            session_id: id.clone(),
            scenario,
            distribution: params.distribution.clone(),
        })?;
        sessions.insert(id, Arc::new(Mutex::new(session)));
        Ok(bulletin)
    }

    pub fn get_state(&self, id: &str) -> Result<Bulletin, ServiceError> {
        Ok(self.session(id)?.lock().unwrap().bulletin())
    }

    /// Applies a decision or rejects it without side effects. `day`, when
    /// given, must be the day awaiting a decision.
    pub fn submit_decision(
        &self,
        id: &str,
        day: Option<u32>,
        units: u32,
    ) -> Result<SubmitOutcome, ServiceError> {
        let handle = self.session(id)?;
        let mut session = handle.lock().unwrap();
        let today = session.check_decision(day, units)?;
        self.record(Event::Decision {
            session_id: id.to_owned(),
            day: today,
            units,
        })?;
        let accepted = session.apply(today, units)?;
        let report = match session.status() {
            SessionStatus::Completed => Some(session.final_report()?),
            SessionStatus::Active => None,
        };
        Ok(SubmitOutcome {
            accepted,
            state: session.bulletin(),
            report,
        })
    }

    pub fn report(&self, id: &str) -> Result<FinalReport, ServiceError> {
        self.session(id)?.lock().unwrap().final_report()
    }

    /// The session's decisions in the trace CSV layout.
    pub fn trace_csv(&self, id: &str) -> Result<String, ServiceError> {
        let trace = self.session(id)?.lock().unwrap().trace();
        Ok(traces_to_csv(&[trace]))
    }

    pub fn snapshot(&self, id: &str) -> Result<GameSession, ServiceError> {
        Ok(self.session(id)?.lock().unwrap().clone())
    }
}
