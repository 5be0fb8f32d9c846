use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use simready_annotate::chat::{ChatClient, ScriptedClient};
use simready_core::Trajectory;
use simready_service::{JobStatus, ReviewJob, Service, ServiceConfig};
use std::path::Path;
use std::sync::Arc;
use tower::ServiceExt;

const SOFT: &str = r#"{"seat": {"CID": "M1", "E": 1e5, "nu": 0.3, "sigma_y": 1e4, "rho": 500},
                      "leg": {"CID": "M1", "E": 2e5, "nu": 0.3, "sigma_y": 2e4, "rho": 500}}"#;

fn config(dir: &Path, max_jobs: usize) -> ServiceConfig {
    let mut c = ServiceConfig::new(dir);
    c.max_concurrent_jobs = max_jobs;
    c.points_per_axis = 6;
    c.world_scale = 0.3;
    c
}

fn service(dir: &Path, client: Arc<dyn ChatClient>, max_jobs: usize) -> (Service, Router) {
    let s = Service::open(config(dir, max_jobs), client).unwrap();
    let r = s.router();
    (s, r)
}

fn scripted(responses: &[&str]) -> Arc<ScriptedClient> {
    Arc::new(ScriptedClient::new(responses.iter().map(|s| s.to_string())))
}

/// res 32 with a soft material keeps each job to a few hundred steps.
fn sim_body(duration: f64) -> Value {
    json!({
        "scenario": {"type": "drop", "height": 0.5},
        "config": {
            "resolution": 32,
            "ground": {"height": 0.25},
            "duration": duration,
            "timestep": {"mode": "adaptive", "max_dt": 1e-3, "cfl": 0.4}
        }
    })
}

struct Reply {
    status: StatusCode,
    content_type: String,
    bytes: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes)
            .unwrap_or_else(|_| panic!("not JSON: {}", String::from_utf8_lossy(&self.bytes)))
    }
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let content_type = resp
        .headers()
        .get("content-type")
        .map(|v| v.to_str().unwrap().to_string())
        .unwrap_or_default();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX)
        .await
        .unwrap()
        .to_vec();
    Reply {
        status,
        content_type,
        bytes,
    }
}

fn stool() -> Value {
    json!({
        "shape_name": "stool",
        "parts": [
            {"name": "seat", "coarse_material": "wood", "color": "brown"},
            {"name": "leg", "coarse_material": "wood", "color": "#202020"}
        ]
    })
}

async fn create(app: &Router) -> String {
    let r = call(app, "POST", "/api/sessions", Some(stool())).await;
    assert_eq!(r.status, StatusCode::CREATED);
    r.json()["id"].as_str().unwrap().to_string()
}

async fn simulate_and_wait(svc: &Service, app: &Router, id: &str) -> Value {
    let r = call(
        app,
        "POST",
        &format!("/api/sessions/{id}/simulate"),
        Some(sim_body(0.25)),
    )
    .await;
    assert_eq!(
        r.status,
        StatusCode::ACCEPTED,
        "{}",
        String::from_utf8_lossy(&r.bytes)
    );
    let job_id = r.json()["id"].as_str().unwrap().to_string();
    svc.wait_idle().await;
    call(app, "GET", &format!("/api/jobs/{job_id}"), None)
        .await
        .json()
}

fn assert_error(r: &Reply, status: StatusCode, code: &str) {
    assert_eq!(r.status, status, "{}", String::from_utf8_lossy(&r.bytes));
    let v = r.json();
    assert_eq!(v["code"], code);
    assert!(v["message"].as_str().is_some_and(|m| !m.is_empty()));
    assert!(v.get("details").is_some());
}

#[tokio::test(flavor = "multi_thread")]
async fn review_loop_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let client = scripted(&[SOFT]);
    let (svc, app) = service(dir.path(), client.clone(), 2);

    let r = call(&app, "GET", "/api/sessions", None).await;
    assert_eq!(r.json(), json!([]));
    let id = create(&app).await;
    let s = call(&app, "GET", &format!("/api/sessions/{id}"), None)
        .await
        .json();
    assert_eq!(s["state"], "created");
    assert_eq!(s["rectification_count"], 0);

    let s = call(&app, "POST", &format!("/api/sessions/{id}/annotate"), None)
        .await
        .json();
    assert_eq!(s["state"], "proposed");
    assert_eq!(s["iterations"].as_array().unwrap().len(), 1);

    let job = simulate_and_wait(&svc, &app, &id).await;
    assert_eq!(job["status"], "done", "{job}");
    assert_eq!(job["frame_count"], 6);
    let job_id = job["id"].as_str().unwrap().to_string();
    let s = call(&app, "GET", &format!("/api/sessions/{id}"), None)
        .await
        .json();
    assert_eq!(s["state"], "simulated");
    assert_eq!(s["jobs"].as_array().unwrap().len(), 1);

    // frames
    let f = call(&app, "GET", &format!("/api/jobs/{job_id}/frames/0"), None).await;
    assert_eq!(f.status, StatusCode::OK);
    assert_eq!(f.content_type, "image/png");
    let img = image::load_from_memory(&f.bytes).unwrap();
    assert_eq!((img.width(), img.height()), (512, 512));
    let side = call(
        &app,
        "GET",
        &format!("/api/jobs/{job_id}/frames/5?view=side&size=64"),
        None,
    )
    .await;
    assert_eq!(image::load_from_memory(&side.bytes).unwrap().width(), 64);
    assert_error(
        &call(&app, "GET", &format!("/api/jobs/{job_id}/frames/6"), None).await,
        StatusCode::NOT_FOUND,
        "not_found",
    );
    assert_error(
        &call(&app, "GET", &format!("/api/jobs/{job_id}/frames/x"), None).await,
        StatusCode::BAD_REQUEST,
        "bad_request",
    );

    // trajectory
    let t = call(&app, "GET", &format!("/api/jobs/{job_id}/trajectory"), None).await;
    assert_eq!(t.status, StatusCode::OK);
    let traj = Trajectory::from_bytes(&t.bytes).unwrap();
    assert_eq!(traj.len(), 6);
    assert_eq!(traj.provenance.scenario, "drop");

    // verdicts
    let url = format!("/api/sessions/{id}/verdict");
    let no_comment = json!({"job_id": job_id, "decision": "implausible", "comments": []});
    assert_error(
        &call(&app, "POST", &url, Some(no_comment)).await,
        StatusCode::UNPROCESSABLE_ENTITY,
        "invalid",
    );
    let wrong_part = json!({"job_id": job_id, "decision": "implausible", "comments": [{"part": "arm", "text": "x"}]});
    assert_error(
        &call(&app, "POST", &url, Some(wrong_part)).await,
        StatusCode::UNPROCESSABLE_ENTITY,
        "invalid",
    );
    let v = json!({"job_id": job_id, "decision": "implausible", "reviewer": "r1",
                   "comments": [{"part": "seat", "text": "the seat sags like jelly"}]});
    let s = call(&app, "POST", &url, Some(v)).await.json();
    assert_eq!(s["state"], "awaiting_requery");
    assert_eq!(s["rectification_count"], 0);

    client.push(Ok(SOFT.replace("1e5", "4e5")));
    let s = call(&app, "POST", &format!("/api/sessions/{id}/requery"), None)
        .await
        .json();
    assert_eq!(s["state"], "proposed");
    assert_eq!(s["rectification_count"], 1);
    let sent = client.requests().pop().unwrap();
    assert_eq!(sent.messages.len(), 3);
    assert!(sent.messages[2]
        .text
        .contains("Specifically, the seat sags like jelly."));
    assert!(sent.messages[2]
        .text
        .contains("is dropped from a certain height"));

    // a verdict about the superseded proposal is refused
    let stale = json!({"job_id": job_id, "decision": "plausible"});
    assert_error(
        &call(&app, "POST", &url, Some(stale)).await,
        StatusCode::CONFLICT,
        "conflict",
    );

    let job2 = simulate_and_wait(&svc, &app, &id).await;
    assert_eq!(job2["status"], "done");
    let v = json!({"job_id": job2["id"], "decision": "plausible"});
    let s = call(&app, "POST", &url, Some(v)).await.json();
    assert_eq!(s["state"], "accepted");
    assert_eq!(s["iterations"].as_array().unwrap().len(), 2);
    assert_error(
        &call(&app, "POST", &format!("/api/sessions/{id}/requery"), None).await,
        StatusCode::CONFLICT,
        "conflict",
    );

    let list = call(&app, "GET", "/api/sessions", None).await.json();
    assert_eq!(list[0]["state"], "accepted");
    assert_eq!(list[0]["rectification_count"], 1);
}

#[tokio::test(flavor = "multi_thread")]
async fn conflicts_and_bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    let client = scripted(&["I am not sure what this is.", SOFT]);
    let (_svc, app) = service(dir.path(), client, 2);

    assert_error(
        &call(&app, "GET", "/api/sessions/nope", None).await,
        StatusCode::NOT_FOUND,
        "not_found",
    );
    assert_error(
        &call(&app, "GET", "/api/sessions/..%2Fx", None).await,
        StatusCode::NOT_FOUND,
        "not_found",
    );
    assert_error(
        &call(&app, "GET", "/api/nothing", None).await,
        StatusCode::NOT_FOUND,
        "not_found",
    );
    let r = call(
        &app,
        "POST",
        "/api/sessions",
        Some(json!({"shape_name": "x"})),
    )
    .await;
    assert_error(&r, StatusCode::BAD_REQUEST, "bad_request");
    let bad_material = json!({"shape_name": "x", "parts": [{"name": "a", "coarse_material": "glass", "color": "red"}]});
    assert_error(
        &call(&app, "POST", "/api/sessions", Some(bad_material)).await,
        StatusCode::UNPROCESSABLE_ENTITY,
        "invalid",
    );

    let id = create(&app).await;
    let sim = format!("/api/sessions/{id}/simulate");
    assert_error(
        &call(&app, "POST", &sim, Some(sim_body(0.25))).await,
        StatusCode::CONFLICT,
        "conflict",
    );

    // prose answer: recorded, not simulable, retried by requery
    let s = call(&app, "POST", &format!("/api/sessions/{id}/annotate"), None)
        .await
        .json();
    assert_eq!(s["state"], "proposed");
    assert!(s["iterations"][0]["parse_error"].is_object());
    assert_error(
        &call(&app, "POST", &sim, Some(sim_body(0.25))).await,
        StatusCode::CONFLICT,
        "conflict",
    );
    assert_error(
        &call(&app, "POST", &format!("/api/sessions/{id}/annotate"), None).await,
        StatusCode::CONFLICT,
        "conflict",
    );
    let s = call(&app, "POST", &format!("/api/sessions/{id}/requery"), None)
        .await
        .json();
    assert_eq!(s["iterations"][1]["kind"]["type"], "retry");
    assert_eq!(s["rectification_count"], 1);

    let mut body = sim_body(0.25);
    body["scenario"] = json!("spin");
    assert_error(
        &call(&app, "POST", &sim, Some(body)).await,
        StatusCode::UNPROCESSABLE_ENTITY,
        "invalid",
    );
    let mut body = sim_body(0.25);
    body["config"]["resolution"] = json!(4);
    assert_error(
        &call(&app, "POST", &sim, Some(body)).await,
        StatusCode::UNPROCESSABLE_ENTITY,
        "invalid",
    );

    // override: a metal-only combination on wood is refused with details
    let bad = json!({"materials": {
        "seat": {"E": 1e9, "nu": 0.3, "rho": 500, "behavior": "M0"},
        "leg": {"E": 1e9, "nu": 0.3, "rho": 500, "behavior": "M0"}}});
    let r = call(
        &app,
        "POST",
        &format!("/api/sessions/{id}/override"),
        Some(bad),
    )
    .await;
    assert_error(&r, StatusCode::UNPROCESSABLE_ENTITY, "invalid");
    assert!(r.json()["details"].as_array().is_some_and(|d| d.len() == 2));
}

#[tokio::test(flavor = "multi_thread")]
async fn upstream_failure_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let client = scripted(&[]);
    let (_svc, app) = service(dir.path(), client, 2);
    let id = create(&app).await;
    let r = call(&app, "POST", &format!("/api/sessions/{id}/annotate"), None).await;
    assert_error(&r, StatusCode::BAD_GATEWAY, "upstream");
    let s = call(&app, "GET", &format!("/api/sessions/{id}"), None)
        .await
        .json();
    assert_eq!(s["state"], "created");
    assert!(s["last_error"].as_str().is_some());
}

#[tokio::test(flavor = "multi_thread")]
async fn repeated_jobs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (svc, app) = service(dir.path(), scripted(&[SOFT]), 2);
    let id = create(&app).await;
    call(&app, "POST", &format!("/api/sessions/{id}/annotate"), None).await;
    let a = simulate_and_wait(&svc, &app, &id).await;
    let b = simulate_and_wait(&svc, &app, &id).await;
    assert_eq!(a["status"], "done");
    assert_ne!(a["id"], b["id"]);
    assert_eq!(a["trajectory_sha256"], b["trajectory_sha256"]);
    let fa = call(
        &app,
        "GET",
        &format!("/api/jobs/{}/frames/3", a["id"].as_str().unwrap()),
        None,
    )
    .await;
    let fb = call(
        &app,
        "GET",
        &format!("/api/jobs/{}/frames/3", b["id"].as_str().unwrap()),
        None,
    )
    .await;
    assert_eq!(fa.bytes, fb.bytes);
}

#[tokio::test(flavor = "multi_thread")]
async fn shutdown_finalizes_jobs_and_restart_keeps_records() {
    let dir = tempfile::tempdir().unwrap();
    let (svc, app) = service(dir.path(), scripted(&[SOFT]), 1);
    let id = create(&app).await;
    call(&app, "POST", &format!("/api/sessions/{id}/annotate"), None).await;
    let sim = format!("/api/sessions/{id}/simulate");
    let long = call(&app, "POST", &sim, Some(sim_body(30.0))).await.json();
    let queued = call(&app, "POST", &sim, Some(sim_body(0.25))).await.json();
    assert_eq!(queued["status"], "queued");

    let v = json!({"job_id": queued["id"], "decision": "plausible"});
    let r = call(
        &app,
        "POST",
        &format!("/api/sessions/{id}/verdict"),
        Some(v),
    )
    .await;
    assert_error(&r, StatusCode::CONFLICT, "conflict");
    let r = call(
        &app,
        "GET",
        &format!("/api/jobs/{}/frames/0", queued["id"].as_str().unwrap()),
        None,
    )
    .await;
    assert_error(&r, StatusCode::CONFLICT, "conflict");

    svc.shutdown().await;
    for j in [&long, &queued] {
        let rec = svc
            .store()
            .load_job(j["id"].as_str().unwrap())
            .unwrap()
            .unwrap();
        assert!(rec.status.is_final(), "{:?}", rec.status);
    }
    assert_error(
        &call(&app, "POST", &sim, Some(sim_body(0.25))).await,
        StatusCode::CONFLICT,
        "conflict",
    );
    drop((svc, app));

    let (_svc2, app2) = service(dir.path(), scripted(&[]), 1);
    let list = call(&app2, "GET", "/api/sessions", None).await.json();
    assert_eq!(list.as_array().unwrap().len(), 1);
    let s = call(&app2, "GET", &format!("/api/sessions/{id}"), None)
        .await
        .json();
    assert_eq!(s["jobs"].as_array().unwrap().len(), 2);
}

#[tokio::test(flavor = "multi_thread")]
async fn interrupted_jobs_are_failed_on_open() {
    let dir = tempfile::tempdir().unwrap();
    let store = simready_service::Store::open(dir.path()).unwrap();
    let job = ReviewJob {
        id: "j1".into(),
        session_id: "s1".into(),
        iteration: 0,
        scenario: simready_core::ScenarioSpec::default_drop(),
        config: Default::default(),
        status: JobStatus::Running,
        error: None,
        particle_count: 1,
        frame_count: 24,
        trajectory_sha256: None,
        report: None,
        created_at: chrono::Utc::now(),
        started_at: Some(chrono::Utc::now()),
        finished_at: None,
    };
    store.save_job(&job).unwrap();
    let (svc, app) = service(dir.path(), scripted(&[]), 1);
    let rec = svc.store().load_job("j1").unwrap().unwrap();
    assert_eq!(rec.status, JobStatus::Failed);
    let r = call(&app, "GET", "/api/jobs/j1", None).await.json();
    assert_eq!(r["status"], "failed");
    assert!(r["error"].as_str().unwrap().contains("stopped"));
}

#[tokio::test(flavor = "multi_thread")]
async fn static_bundle_is_served_at_root() {
    let dir = tempfile::tempdir().unwrap();
    let web = tempfile::tempdir().unwrap();
    std::fs::write(web.path().join("index.html"), "<html>workbench</html>").unwrap();
    let mut c = config(dir.path(), 1);
    c.static_dir = Some(web.path().to_path_buf());
    let app = Service::open(c, scripted(&[])).unwrap().router();
    let r = call(&app, "GET", "/", None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.bytes, b"<html>workbench</html>");
    assert_eq!(
        call(&app, "GET", "/api/sessions", None).await.status,
        StatusCode::OK
    );
}
