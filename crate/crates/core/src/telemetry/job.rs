use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{GeoPoint, TelemetryRecord};
use crate::messaging::{AgentAddress, Millis};
use crate::runtime::SimClock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Pending,
    InTransit,
    Delivered,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JobError {
    #[error("delivery cannot move from {from:?} to {to:?}")]
    IllegalTransition { from: JobStatus, to: JobStatus },
    #[error("records can only be added in transit")]
    NotInTransit,
    #[error("record t_ms {0} does not follow the previous record")]
    NonMonotone(Millis),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryJob<T> {
    pub tracking_id: String,
    pub order_id: String,
    pub carrier_3pl: AgentAddress,
    pub origin: GeoPoint<T>,
    pub destination: GeoPoint<T>,
    pub status: JobStatus,
    pub started_at: Option<Millis>,
    pub records: Vec<TelemetryRecord<T>>,
}

impl<T: Float> DeliveryJob<T> {
    pub fn new(
        tracking_id: impl Into<String>,
        order_id: impl Into<String>,
        carrier_3pl: AgentAddress,
        origin: GeoPoint<T>,
        destination: GeoPoint<T>,
    ) -> Self {
        Self {
            tracking_id: tracking_id.into(),
            order_id: order_id.into(),
            carrier_3pl,
            origin,
            destination,
            status: JobStatus::Pending,
            started_at: None,
            records: Vec::new(),
        }
    }

    fn transition(&mut self, to: JobStatus) -> Result<(), JobError> {
        let legal = matches!(
            (self.status, to),
            (JobStatus::Pending, JobStatus::InTransit)
                | (JobStatus::Pending, JobStatus::Failed)
                | (JobStatus::InTransit, JobStatus::Delivered)
                | (JobStatus::InTransit, JobStatus::Failed)
        );
        if !legal {
            return Err(JobError::IllegalTransition { from: self.status, to });
        }
        self.status = to;
        Ok(())
    }

    pub fn start(&mut self, now: Millis) -> Result<(), JobError> {
        self.transition(JobStatus::InTransit)?;
        self.started_at = Some(now);
        Ok(())
    }

    pub fn push_record(&mut self, record: TelemetryRecord<T>) -> Result<(), JobError> {
        if self.status != JobStatus::InTransit {
            return Err(JobError::NotInTransit);
        }
        if self.records.last().is_some_and(|r| r.t_ms >= record.t_ms) {
            return Err(JobError::NonMonotone(record.t_ms));
        }
        self.records.push(record);
        Ok(())
    }

    /// Completes the job; a job without records fails instead.
    pub fn finish(&mut self) -> Result<(), JobError> {
        if self.records.is_empty() {
            self.transition(JobStatus::Failed)
        } else {
            self.transition(JobStatus::Delivered)
        }
    }

    pub fn fail(&mut self) -> Result<(), JobError> {
        self.transition(JobStatus::Failed)
    }

    pub fn latest(&self) -> Option<&TelemetryRecord<T>> {
        self.records.last()
    }
}

/// Replays `dataset` on `clock`, handing each record to `sink` when the clock
/// reaches `start + record.t_ms`. An empty dataset fails the job.
pub fn replay<T: Float>(
    mut job: DeliveryJob<T>,
    dataset: &[TelemetryRecord<T>],
    clock: &mut SimClock,
    mut sink: impl FnMut(&TelemetryRecord<T>),
) -> Result<DeliveryJob<T>, JobError> {
    if job.status != JobStatus::Pending {
        return Err(JobError::IllegalTransition { from: job.status, to: JobStatus::InTransit });
    }
    if dataset.is_empty() {
        job.fail()?;
        return Ok(job);
    }
    let start = clock.now();
    job.start(start)?;
    for record in dataset {
        clock.advance_to(start + record.t_ms);
        job.push_record(*record)?;
        sink(record);
    }
    job.finish()?;
    Ok(job)
}
