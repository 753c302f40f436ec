//! HTTP front of the gateway, with a background driver that advances the
//! simulation against wall time.

use std::collections::VecDeque;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;

use a2sc_core::config::{ConfigError, ScenarioConfig, ScenarioKind};
use a2sc_core::events::{Event, EventLog, KindFilter};
use a2sc_core::gateway::{Gateway, GatewayError, OrderRequest, ScenarioParameters};
use a2sc_core::system::{BootError, BootOptions, System};

/// Work items processed per lock acquisition when running unpaced, so that
/// requests get a turn.
const STEP_BUDGET: usize = 256;
const IDLE_POLL: Duration = Duration::from_millis(10);
const STREAM_POLL: Duration = Duration::from_millis(25);

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Boot(#[from] BootError),
    #[error("discovery registration did not complete")]
    NotReady,
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

impl ServeError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ServeError::Config(_) | ServeError::Boot(BootError::Config(_) | BootError::Dataset { .. }) => {
                crate::EXIT_CONFIG
            }
            _ => crate::EXIT_FAILURE,
        }
    }
}

/// State shared by the request handlers and the driver.
pub struct Shared {
    gateway: Mutex<Gateway>,
    log: Arc<EventLog>,
    speed: f64,
    stop: AtomicBool,
}

impl Shared {
    pub fn new(gateway: Gateway) -> Arc<Self> {
        let log = gateway.system().log().clone();
        let speed = gateway.system().config.speed;
        Arc::new(Self { gateway: Mutex::new(gateway), log, speed, stop: AtomicBool::new(false) })
    }

    pub fn gateway(&self) -> MutexGuard<'_, Gateway> {
        self.gateway.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    pub fn log(&self) -> &Arc<EventLog> {
        &self.log
    }

    /// Runs the simulation on a background thread until [`Shared::stop`].
    ///
    /// At speed 0 queued work runs as fast as possible; otherwise simulated
    /// time follows wall time scaled by the speed.
    pub fn spawn_driver(self: &Arc<Self>) -> std::thread::JoinHandle<()> {
        let shared = self.clone();
        std::thread::spawn(move || {
            let anchor = Instant::now();
            let sim_anchor = shared.gateway().now();
            while !shared.stop.load(Ordering::Relaxed) {
                let busy = {
                    let mut gw = shared.gateway();
                    if shared.speed > 0.0 {
                        let target = sim_anchor + (anchor.elapsed().as_secs_f64() * 1000.0 * shared.speed) as u64;
                        gw.advance_to(target);
                        false
                    } else {
                        let mut stepped = 0;
                        while stepped < STEP_BUDGET && gw.step() {
                            stepped += 1;
                        }
                        stepped == STEP_BUDGET
                    }
                };
                if !busy {
                    std::thread::sleep(IDLE_POLL);
                }
            }
        })
    }

    pub fn stop(&self) {
        self.stop.store(true, Ordering::Relaxed);
    }
}

struct ApiError(StatusCode, Value);

impl ApiError {
    fn bad_request(message: impl std::fmt::Display) -> Self {
        ApiError(StatusCode::BAD_REQUEST, json!({ "error": "bad_request", "message": message.to_string() }))
    }
}

impl From<GatewayError> for ApiError {
    fn from(e: GatewayError) -> Self {
        let status = match e {
            GatewayError::InvalidParameters(_) | GatewayError::InvalidOrder(_) => StatusCode::BAD_REQUEST,
            GatewayError::UnknownBuyer(_) | GatewayError::UnknownScenario(_) | GatewayError::UnknownTrackingId(_) => {
                StatusCode::NOT_FOUND
            }
            GatewayError::ReportNotReady(_) => StatusCode::CONFLICT,
            GatewayError::SystemNotReady => StatusCode::SERVICE_UNAVAILABLE,
        };
        ApiError(status, json!({ "error": e.code(), "message": e.to_string() }))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(ApiError::bad_request)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LaunchRequest {
    kind: ScenarioKind,
    #[serde(default)]
    parameters: ScenarioParameters,
}

async fn launch(State(shared): State<Arc<Shared>>, body: Bytes) -> Result<(StatusCode, Json<Value>), ApiError> {
    let request: LaunchRequest = parse_body(&body)?;
    let descriptor = shared.gateway().launch_scenario(request.kind, request.parameters)?;
    Ok((StatusCode::CREATED, Json(json!(descriptor))))
}

async fn list_scenarios(State(shared): State<Arc<Shared>>) -> ApiResult {
    Ok(Json(json!({ "scenarios": shared.gateway().scenarios() })))
}

async fn scenario(State(shared): State<Arc<Shared>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    Ok(Json(json!(shared.gateway().scenario(&id)?)))
}

async fn order(State(shared): State<Arc<Shared>>, body: Bytes) -> Result<(StatusCode, Json<Value>), ApiError> {
    let request: OrderRequest = parse_body(&body)?;
    let ack = shared.gateway().place_order(request)?;
    Ok((StatusCode::CREATED, Json(json!(ack))))
}

async fn delivery(State(shared): State<Arc<Shared>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    Ok(Json(shared.gateway().delivery(&id)?))
}

async fn report(State(shared): State<Arc<Shared>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    Ok(Json(json!(shared.gateway().report(&id)?)))
}

async fn agents(State(shared): State<Arc<Shared>>) -> ApiResult {
    Ok(Json(shared.gateway().agents()))
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    from: Option<u64>,
    kinds: Option<String>,
}

fn sse_event(event: &Event) -> SseEvent {
    SseEvent::default().id(event.seq.to_string()).data(event.to_json())
}

/// Every retained event from the cursor on, then the live tail.
fn follow(log: Arc<EventLog>, from: u64, filter: KindFilter) -> impl Stream<Item = Result<SseEvent, std::convert::Infallible>> {
    futures::stream::unfold((from, VecDeque::new()), move |(mut cursor, mut pending)| {
        let log = log.clone();
        let filter = filter.clone();
        async move {
            loop {
                if let Some(event) = pending.pop_front() {
                    return Some((Ok(sse_event(&event)), (cursor, pending)));
                }
                let (events, next) = log.read_from(cursor, &filter);
                cursor = next;
                if events.is_empty() {
                    tokio::time::sleep(STREAM_POLL).await;
                } else {
                    pending.extend(events);
                }
            }
        }
    })
}

async fn events(State(shared): State<Arc<Shared>>, headers: HeaderMap, Query(query): Query<EventsQuery>) -> Response {
    let filter = match query.kinds.as_deref() {
        Some(csv) => match KindFilter::parse_csv(csv) {
            Ok(f) => f,
            Err(e) => return ApiError::bad_request(e).into_response(),
        },
        None => KindFilter::all(),
    };
    // A reconnecting EventSource resumes after the last id it saw.
    let resume = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<u64>().ok())
        .map(|seen| seen + 1);
    let from = resume.or(query.from).unwrap_or(0);
    Sse::new(follow(shared.log.clone(), from, filter)).keep_alive(KeepAlive::default()).into_response()
}

async fn allow_any_origin(response: Response) -> Response {
    let mut response = response;
    response.headers_mut().insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, HeaderValue::from_static("*"));
    response
}

pub fn router(shared: Arc<Shared>) -> Router {
    Router::new()
        .route("/api/scenarios", post(launch).get(list_scenarios))
        .route("/api/scenarios/{id}", get(scenario))
        .route("/api/orders", post(order))
        .route("/api/deliveries/{tracking_id}", get(delivery))
        .route("/api/deliveries/{tracking_id}/report", get(report))
        .route("/api/agents", get(agents))
        .route("/api/events", get(events))
        .layer(axum::middleware::map_response(allow_any_origin))
        .with_state(shared)
}

/// Boots the configured system and waits for discovery registration.
pub fn boot(config_path: &Path) -> Result<Arc<Shared>, ServeError> {
    let config = ScenarioConfig::load(config_path)?;
    let options = BootOptions { external_pacing: true, ..BootOptions::default() };
    let mut system = System::boot(config, &options)?;
    if !system.run_until_ready() {
        return Err(ServeError::NotReady);
    }
    Ok(Shared::new(Gateway::new(system)))
}

/// Serves the gateway until interrupted.
pub async fn serve(config_path: &Path, listen: &str) -> Result<(), ServeError> {
    let shared = boot(config_path)?;
    let listener = tokio::net::TcpListener::bind(listen)
        .await
        .map_err(|source| ServeError::Bind { addr: listen.to_string(), source })?;
    let addr: SocketAddr = listener.local_addr()?;
    log::info!("gateway listening on http://{addr}");
    let driver = shared.spawn_driver();
    let app = router(shared.clone());
    let result = tokio::select! {
        r = axum::serve(listener, app) => r.map_err(ServeError::from),
        _ = tokio::signal::ctrl_c() => Ok(()),
    };
    shared.stop();
    let _ = driver.join();
    result
}
