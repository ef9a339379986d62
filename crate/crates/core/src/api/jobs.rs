use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::repo::SessionSlot;
use super::{ApiError, AppState};
use crate::session::{CanvasState, TransferPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: String,
    pub status: JobStatus,
    pub submitted_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ApiError>,
}

impl JobRecord {
    pub fn queued() -> Self {
        Self {
            id: uuid::Uuid::new_v4().to_string(),
            status: JobStatus::Queued,
            submitted_at: Utc::now(),
            finished_at: None,
            history_id: None,
            error: None,
        }
    }

    pub fn fail(&mut self, error: ApiError) {
        self.status = JobStatus::Failed;
        self.error = Some(error);
        self.finished_at = Some(Utc::now());
    }
}

/// Renders `plan` on a worker slot and commits the result against the
/// snapshot it was planned from.
pub(super) async fn run(
    state: AppState,
    slot: Arc<SessionSlot>,
    job_id: String,
    plan: TransferPlan,
    snapshot: CanvasState,
) -> Result<u64, ApiError> {
    let outcome = render_and_commit(&state, &slot, &job_id, plan, snapshot).await;
    let recorded = slot.update_job(&job_id, |job| match &outcome {
        Ok(id) => {
            job.status = JobStatus::Done;
            job.history_id = Some(*id);
            job.finished_at = Some(Utc::now());
        }
        Err(e) => job.fail(e.clone()),
    });
    if let Err(e) = recorded {
        tracing::error!(job = %job_id, error = %e, "cannot persist job record");
    }
    outcome
}

async fn render_and_commit(
    state: &AppState,
    slot: &Arc<SessionSlot>,
    job_id: &str,
    plan: TransferPlan,
    snapshot: CanvasState,
) -> Result<u64, ApiError> {
    let _permit = state
        .permits()
        .acquire_owned()
        .await
        .map_err(|_| ApiError::storage("worker pool closed"))?;
    slot.update_job(job_id, |j| j.status = JobStatus::Running)
        .map_err(ApiError::storage)?;

    let renderer = state.renderer();
    let store = slot.store.clone();
    let work = tokio::task::spawn_blocking(move || renderer.render_plan_png(&plan, &store));
    let timeout = state.timeout();
    let png = match tokio::time::timeout(timeout, work).await {
        Err(_) => return Err(ApiError::timeout(timeout.as_secs())),
        Ok(Err(join)) => return Err(ApiError::storage(format!("render task: {join}"))),
        Ok(Ok(result)) => result?,
    };

    let image = slot.store.put(&png).map_err(ApiError::storage)?;
    let mut doc = slot.doc.lock().await;
    let mut next = doc.clone();
    let id = next.commit_snapshot(snapshot, image).id();
    slot.save_doc(&next).map_err(ApiError::storage)?;
    *doc = next;
    Ok(id)
}
