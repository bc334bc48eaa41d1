//! Repair sessions and their status machine.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use warp_core::pipeline::{Repair, SourceSnapshot, StageTimings};
use warp_core::retrieval::EvidenceSet;
use warp_core::{ErrorContext, FinalSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Status {
    Idle,
    Building,
    Analyzing,
    AwaitingDecision,
    Applied,
    Rejected,
}

impl Status {
    pub const ALL: [Status; 6] =
        [Status::Idle, Status::Building, Status::Analyzing, Status::AwaitingDecision, Status::Applied, Status::Rejected];

    /// The declared transition graph. `Analyzing -> Idle` is the path taken
    /// when no solution at all can be produced.
    pub fn can_become(self, to: Status) -> bool {
        use Status::*;
        matches!(
            (self, to),
            (Idle, Building)
                | (Building, Idle)
                | (Building, Analyzing)
                | (Analyzing, AwaitingDecision)
                | (Analyzing, Idle)
                | (AwaitingDecision, Applied)
                | (AwaitingDecision, Rejected)
                | (Applied, Building)
                | (Rejected, Building)
        )
    }

    pub fn has_solutions(self) -> bool {
        matches!(self, Status::AwaitingDecision | Status::Applied | Status::Rejected)
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("session is {from}, cannot become {to}")]
    InvalidTransition { from: Status, to: Status },
    #[error("no solution {0} in this session")]
    UnknownSolution(String),
    #[error("an analysis must offer at least one solution")]
    NoSolutions,
}

/// One line of a session's history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    /// Unix milliseconds.
    pub at_ms: u64,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub command_line: String,
    pub working_dir: PathBuf,
    pub status: Status,
    pub error_context: Option<ErrorContext>,
    /// Ranked; ids are unique across the service.
    pub solutions: Vec<FinalSolution>,
    pub evidence: EvidenceSet,
    /// The file the solutions patch, hashed when it was read.
    pub source: Option<SourceSnapshot>,
    pub timings: Option<StageTimings>,
    /// Solution chosen by the last apply.
    pub applied: Option<String>,
    /// Number of builds started.
    pub builds: u32,
    pub history: Vec<HistoryEntry>,
}

impl Session {
    pub fn new(id: impl Into<String>, command_line: impl Into<String>, working_dir: impl Into<PathBuf>, now_ms: u64) -> Self {
        let mut s = Session {
            id: id.into(),
            command_line: command_line.into(),
            working_dir: working_dir.into(),
            status: Status::Idle,
            error_context: None,
            solutions: vec![],
            evidence: EvidenceSet::default(),
            source: None,
            timings: None,
            applied: None,
            builds: 0,
            history: vec![],
        };
        s.note(now_ms, "created");
        s
    }

    fn note(&mut self, at_ms: u64, detail: impl Into<String>) {
        self.history.push(HistoryEntry { at_ms, status: self.status, detail: detail.into() });
    }

    fn enter(&mut self, to: Status, at_ms: u64, detail: impl Into<String>) -> Result<(), SessionError> {
        if !self.status.can_become(to) {
            return Err(SessionError::InvalidTransition { from: self.status, to });
        }
        self.status = to;
        self.note(at_ms, detail);
        Ok(())
    }

    fn clear_analysis(&mut self) {
        self.error_context = None;
        self.solutions.clear();
        self.evidence = EvidenceSet::default();
        self.source = None;
        self.applied = None;
    }

    pub fn begin_build(&mut self, at_ms: u64) -> Result<(), SessionError> {
        self.enter(Status::Building, at_ms, self.command_line.clone())?;
        self.builds += 1;
        self.clear_analysis();
        Ok(())
    }

    /// The build output carried no error.
    pub fn finish_clean(&mut self, at_ms: u64, detail: &str) -> Result<(), SessionError> {
        self.enter(Status::Idle, at_ms, detail)
    }

    pub fn begin_analysis(&mut self, at_ms: u64, detail: &str) -> Result<(), SessionError> {
        self.enter(Status::Analyzing, at_ms, detail)
    }

    /// Stores the repair and assigns solution ids `<session>-<build>-<rank>`.
    pub fn offer(&mut self, repair: Repair, at_ms: u64) -> Result<(), SessionError> {
        if repair.solutions.is_empty() {
            return Err(SessionError::NoSolutions);
        }
        if !self.status.can_become(Status::AwaitingDecision) {
            return Err(SessionError::InvalidTransition { from: self.status, to: Status::AwaitingDecision });
        }
        let Repair { context, source, evidence, mut solutions, timings, .. } = repair;
        for s in &mut solutions {
            s.id = format!("{}-{}-{}", self.id, self.builds, s.rank);
        }
        let detail = format!("{} solution(s)", solutions.len());
        self.error_context = Some(context);
        self.source = source;
        self.evidence = evidence;
        self.solutions = solutions;
        self.timings = Some(timings);
        self.enter(Status::AwaitingDecision, at_ms, detail)
    }

    /// Analysis produced nothing; back to Idle with the reason.
    pub fn give_up(&mut self, at_ms: u64, reason: &str) -> Result<(), SessionError> {
        self.enter(Status::Idle, at_ms, format!("no solution: {reason}"))?;
        self.clear_analysis();
        Ok(())
    }

    pub fn solution(&self, id: &str) -> Option<&FinalSolution> {
        self.solutions.iter().find(|s| s.id == id)
    }

    pub fn mark_applied(&mut self, solution_id: &str, at_ms: u64) -> Result<(), SessionError> {
        if self.solution(solution_id).is_none() {
            return Err(SessionError::UnknownSolution(solution_id.into()));
        }
        self.enter(Status::Applied, at_ms, format!("applied {solution_id}"))?;
        self.applied = Some(solution_id.into());
        Ok(())
    }

    pub fn mark_rejected(&mut self, solution_id: &str, at_ms: u64) -> Result<(), SessionError> {
        if self.solution(solution_id).is_none() {
            return Err(SessionError::UnknownSolution(solution_id.into()));
        }
        self.enter(Status::Rejected, at_ms, format!("rejected {solution_id}"))
    }

    /// After a restart no run is in flight, so an interrupted build or
    /// analysis falls back to Idle. Returns whether anything changed.
    pub fn recover(&mut self, at_ms: u64) -> bool {
        match self.status {
            Status::Building => self.finish_clean(at_ms, "interrupted by restart").is_ok(),
            Status::Analyzing => self.give_up(at_ms, "interrupted by restart").is_ok(),
            _ => false,
        }
    }

    /// Status-dependent shape checks; used by tests and on load.
    pub fn is_consistent(&self) -> bool {
        self.status.has_solutions() == !self.solutions.is_empty()
    }
}
