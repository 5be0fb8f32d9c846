use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use simready_core::mpm::SimulationReport;
use simready_core::{ScenarioSpec, SimConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    /// Status only moves forward: queued -> running -> done | failed, and a
    /// queued job may fail without running.
    pub fn can_advance_to(self, next: JobStatus) -> bool {
        use JobStatus::*;
        matches!(
            (self, next),
            (Queued, Running) | (Queued, Failed) | (Running, Done) | (Running, Failed)
        )
    }

    pub fn is_final(self) -> bool {
        matches!(self, JobStatus::Done | JobStatus::Failed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReviewJob {
    pub id: String,
    pub session_id: String,
    /// Index of the session iteration whose materials were simulated.
    pub iteration: usize,
    pub scenario: ScenarioSpec,
    pub config: SimConfig,
    pub status: JobStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub particle_count: usize,
    pub frame_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<SimulationReport>,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<DateTime<Utc>>,
}

impl ReviewJob {
    pub fn advance(&mut self, next: JobStatus) -> Result<(), String> {
        if !self.status.can_advance_to(next) {
            return Err(format!(
                "job {} cannot move from {:?} to {next:?}",
                self.id, self.status
            ));
        }
        self.status = next;
        match next {
            JobStatus::Running => self.started_at = Some(Utc::now()),
            JobStatus::Done | JobStatus::Failed => self.finished_at = Some(Utc::now()),
            JobStatus::Queued => {}
        }
        Ok(())
    }

    pub fn fail(&mut self, message: impl Into<String>) {
        if self.advance(JobStatus::Failed).is_ok() {
            self.error = Some(message.into());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::JobStatus::{self, *};

    #[test]
    fn status_only_moves_forward() {
        let all = [Queued, Running, Done, Failed];
        let allowed = [
            (Queued, Running),
            (Queued, Failed),
            (Running, Done),
            (Running, Failed),
        ];
        for a in all {
            for b in all {
                assert_eq!(
                    JobStatus::can_advance_to(a, b),
                    allowed.contains(&(a, b)),
                    "{a:?}->{b:?}"
                );
            }
        }
    }
}
