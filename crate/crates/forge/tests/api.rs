use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use srm_core::dataset::Dataset;
use srm_core::sarif::validate_sarif;
use srm_forge::server::{router, AppState};
use tower::ServiceExt;

mod common;
use common::*;

struct Api {
    state: Arc<AppState>,
    app: Router,
    ws: Workspace,
}

struct Reply {
    status: StatusCode,
    content_type: Option<String>,
    text: String,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_str(&self.text).unwrap_or_else(|e| panic!("{e}: {}", self.text))
    }
}

impl Api {
    fn new(fixture: &str, d: &Dataset) -> Api {
        let ws = Workspace::new(fixture, d);
        let state = AppState::new(ws.config()).unwrap();
        Api {
            app: router(state.clone()),
            state,
            ws,
        }
    }

    async fn call(&self, method: Method, uri: &str, body: Option<Value>) -> Reply {
        let mut req = Request::builder().method(method).uri(uri);
        let body = match body {
            Some(v) => {
                req = req.header(header::CONTENT_TYPE, "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        let resp = self.app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = resp.status();
        let content_type = resp
            .headers()
            .get(header::CONTENT_TYPE)
            .map(|v| v.to_str().unwrap().to_string());
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        Reply {
            status,
            content_type,
            text: String::from_utf8(bytes.to_vec()).unwrap(),
        }
    }

    async fn get(&self, uri: &str) -> Reply {
        self.call(Method::GET, uri, None).await
    }

    async fn submit(&self, body: Value) -> Reply {
        self.call(Method::POST, "/api/jobs", Some(body)).await
    }

    /// Polls a job until it leaves the active states, returning every
    /// status seen along the way.
    async fn wait(&self, id: &str) -> (Value, Vec<String>) {
        let mut seen: Vec<String> = Vec::new();
        for _ in 0..2000 {
            let job = self.get(&format!("/api/jobs/{id}")).await.json();
            let status = job["status"].as_str().unwrap().to_string();
            if seen.last() != Some(&status) {
                seen.push(status.clone());
            }
            if status == "done" || status == "failed" {
                return (job, seen);
            }
            tokio::time::sleep(Duration::from_millis(5)).await;
        }
        panic!("job {id} did not finish");
    }

    async fn run(&self, kind: &str) -> Value {
        let r = self.submit(json!({ "kind": kind })).await;
        assert_eq!(r.status, StatusCode::ACCEPTED, "{}", r.text);
        let id = r.json()["id"].as_str().unwrap().to_string();
        let (job, _) = self.wait(&id).await;
        assert_eq!(job["status"], "done", "{job}");
        job
    }
}

fn path(sig: &str) -> String {
    format!("/api/methods/{sig}")
}

#[tokio::test(flavor = "multi_thread")]
async fn methods_can_be_listed_and_filtered() {
    let api = Api::new("servlet/mutant", &servlet_dataset());
    let all = api.get("/api/methods").await.json();
    assert_eq!(all.as_array().unwrap().len(), 3);
    let row = all.as_array().unwrap().iter().find(|r| r["signature"] == SOURCE).unwrap();
    assert_eq!(row["class"], "javax.servlet.http.HttpServletRequest");
    assert_eq!(row["discovery"], "training");
    assert_eq!(row["dataOut"], "return");
    assert!(row.get("dataIn").is_some());
    assert!(row["labels"].as_array().unwrap().contains(&json!("source")));

    let sinks = api.get("/api/methods?label=sink").await.json();
    assert_eq!(sinks.as_array().unwrap().len(), 1);
    assert_eq!(sinks[0]["signature"], SINK);
    let by_class = api.get("/api/methods?class=java.sql.Statement&label=").await.json();
    assert_eq!(by_class.as_array().unwrap().len(), 1);
    assert_eq!(api.get("/api/methods?discovery=manual").await.json(), json!([]));

    let bad = api.get("/api/methods?label=cwe1").await;
    assert_eq!(bad.status, StatusCode::BAD_REQUEST);
    assert_eq!(bad.json()["code"], "bad_request");
    assert_eq!(bad.json()["path"], "label");
}

#[tokio::test(flavor = "multi_thread")]
async fn single_method_and_missing_method() {
    let api = Api::new("servlet/mutant", &servlet_dataset());
    let r = api.get(&path(SINK)).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["signature"], SINK);
    let missing = api.get(&path("a.B.c()")).await;
    assert_eq!(missing.status, StatusCode::NOT_FOUND);
    assert_eq!(missing.json()["code"], "not_found");
}

#[tokio::test(flavor = "multi_thread")]
async fn patch_marks_records_manual_and_persists() {
    let api = Api::new("servlet/mutant", &servlet_dataset());
    let r = api
        .call(
            Method::PATCH,
            &path(SINK),
            Some(json!({ "labels": ["sink", "cwe89", "cwe78"], "note": "reviewed" })),
        )
        .await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    let row = r.json();
    assert_eq!(row["discovery"], "manual");
    assert_eq!(row["note"], "reviewed");
    assert_eq!(row["labels"].as_array().unwrap().len(), 3);
    let saved = load_dataset(&api.ws.dataset);
    assert_eq!(saved.get(SINK).unwrap().note.as_deref(), Some("reviewed"));
    assert_eq!(
        api.get("/api/methods?discovery=manual").await.json().as_array().unwrap().len(),
        1
    );

    let added = api
        .call(Method::PATCH, &path("org.demo.Util.clean(String)"), Some(json!({ "labels": ["sanitizer"], "dataIn": [0], "dataOut": "return" })))
        .await;
    assert_eq!(added.status, StatusCode::OK, "{}", added.text);
    assert_eq!(load_dataset(&api.ws.dataset).len(), 4);
}

#[tokio::test(flavor = "multi_thread")]
async fn invalid_patches_name_the_offending_field() {
    let api = Api::new("servlet/mutant", &servlet_dataset());
    let before = std::fs::read_to_string(&api.ws.dataset).unwrap();
    for (body, field) in [
        (json!({ "labels": ["sink", "cwe1"] }), "labels[1]"),
        (json!({ "labels": "sink" }), "labels"),
        (json!({ "dataIn": [0, -1] }), "dataIn[1]"),
        (json!({ "dataOut": "somewhere" }), "dataOut"),
        (json!({ "note": 3 }), "note"),
        (json!({ "colour": "red" }), "colour"),
    ] {
        let r = api.call(Method::PATCH, &path(SINK), Some(body.clone())).await;
        assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
        assert_eq!(r.json()["code"], "validation");
        assert_eq!(r.json()["path"], field, "{body}");
    }
    let out_of_range = api
        .call(Method::PATCH, &path(SINK), Some(json!({ "dataIn": [4] })))
        .await;
    assert_eq!(out_of_range.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(out_of_range.json()["path"].as_str().unwrap().starts_with("dataIn"));

    let garbage = api
        .call(Method::PATCH, &path(SINK), None)
        .await;
    assert_eq!(garbage.status, StatusCode::BAD_REQUEST);
    assert_eq!(std::fs::read_to_string(&api.ws.dataset).unwrap(), before);
}

#[tokio::test(flavor = "multi_thread")]
async fn settings_round_trip() {
    let api = Api::new("servlet/mutant", &servlet_dataset());
    let empty = api.get("/api/settings").await.json();
    assert_eq!(empty["exists"], false);
    let put = api
        .call(
            Method::PUT,
            "/api/settings",
            Some(json!({ "cwe_filter": ["cwe79"], "analysis": { "max_call_depth": 1, "match_mode": "exact" } })),
        )
        .await;
    assert_eq!(put.status, StatusCode::OK, "{}", put.text);
    let now = api.get("/api/settings").await.json();
    assert_eq!(now["exists"], true);
    assert_eq!(now["settings"]["cwe_filter"], json!(["cwe79"]));
    assert!(api.ws.project.join(".srm-forge/settings.json").is_file());

    let bad = api
        .call(Method::PUT, "/api/settings", Some(json!({ "cwe_filter": ["sink"] })))
        .await;
    assert_eq!(bad.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(bad.json()["path"], "cwe_filter");
    let unknown = api
        .call(Method::PUT, "/api/settings", Some(json!({ "depth": 1 })))
        .await;
    assert_eq!(unknown.status, StatusCode::UNPROCESSABLE_ENTITY);

    // The stored cwe filter now applies to jobs.
    let job = api.run("pipeline").await;
    assert!(job["result_ref"].as_str().unwrap().ends_with("results.sarif"));
    assert_eq!(api.get("/api/findings").await.json(), json!([]));
}

#[tokio::test(flavor = "multi_thread")]
async fn stats_source_and_unknown_routes() {
    let api = Api::new("servlet/mutant", &servlet_dataset());
    let stats = api.get("/api/stats").await.json();
    assert_eq!(stats["records"], 3);

    let ex = api.get("/api/source?uri=Servlet.java&line=22&context=1").await;
    assert_eq!(ex.status, StatusCode::OK);
    let ex = ex.json();
    assert_eq!(ex["startLine"], 21);
    assert_eq!(ex["lines"].as_array().unwrap().len(), 3);
    assert!(ex["lines"][1].as_str().unwrap().contains("executeQuery"));
    assert_eq!(api.get("/api/source?uri=../srms.json&line=1").await.status, StatusCode::BAD_REQUEST);
    assert_eq!(api.get("/api/source?uri=Servlet.java&line=999").await.status, StatusCode::NOT_FOUND);
    assert_eq!(api.get("/api/source?uri=Servlet.java").await.status, StatusCode::BAD_REQUEST);

    let nf = api.get("/api/nothing").await;
    assert_eq!(nf.status, StatusCode::NOT_FOUND);
    assert_eq!(nf.json()["code"], "not_found");
    assert_eq!(api.get("/api/export/sarif").await.status, StatusCode::NOT_FOUND);
    assert_eq!(api.get("/api/jobs/job-7").await.status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn pipeline_job_goes_queued_running_done() {
    let api = Api::new("servlet/mutant", &servlet_dataset());
    // Holding the writer lock keeps the job queued until the test lets go.
    let guard = api.state.writer.clone().lock_owned().await;
    let r = api.submit(json!({ "kind": "pipeline" })).await;
    assert_eq!(r.status, StatusCode::ACCEPTED);
    let job = r.json();
    assert_eq!(job["status"], "queued");
    let id = job["id"].as_str().unwrap().to_string();
    tokio::time::sleep(Duration::from_millis(50)).await;
    assert_eq!(api.get(&format!("/api/jobs/{id}")).await.json()["status"], "queued");
    drop(guard);
    let (done, seen) = api.wait(&id).await;
    assert_eq!(done["status"], "done");
    assert_eq!(done["progress"], 1.0);
    let order = ["queued", "running", "done"];
    let ranks: Vec<usize> = seen.iter().map(|s| order.iter().position(|o| o == s).unwrap()).collect();
    assert!(ranks.windows(2).all(|w| w[0] < w[1]), "{seen:?}");
    assert_eq!(seen.last().map(String::as_str), Some("done"));

    let findings = api.get("/api/findings").await.json();
    assert_eq!(findings.as_array().unwrap().len(), 1);
    assert_eq!(findings[0]["cwe"], "cwe89");
    let sarif = api.get("/api/export/sarif").await;
    assert_eq!(sarif.content_type.as_deref(), Some("application/sarif+json"));
    assert!(validate_sarif(&sarif.text).is_empty());
    assert_eq!(sarif.text, api.ws.read_out("results.sarif"));
    assert_eq!(api.get("/api/jobs").await.json().as_array().unwrap().len(), 1);

    let scored = api.get("/api/methods?discovery=detected").await.json();
    for row in scored.as_array().unwrap() {
        assert_eq!(row["scores"].as_object().unwrap().len(), 10);
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn second_job_conflicts_and_queued_job_can_be_cancelled() {
    let api = Api::new("servlet/mutant", &servlet_dataset());
    let guard = api.state.writer.clone().lock_owned().await;
    let first = api.submit(json!({ "kind": "pipeline" })).await.json();
    let id = first["id"].as_str().unwrap().to_string();
    let second = api.submit(json!({ "kind": "detect" })).await;
    assert_eq!(second.status, StatusCode::CONFLICT);
    assert_eq!(second.json()["code"], "conflict");

    let c = api.call(Method::POST, &format!("/api/jobs/{id}/cancel"), None).await;
    assert_eq!(c.status, StatusCode::OK);
    assert_eq!(c.json()["status"], "failed");
    assert_eq!(c.json()["error"], "cancelled");
    drop(guard);
    tokio::time::sleep(Duration::from_millis(100)).await;
    let after = api.get(&format!("/api/jobs/{id}")).await.json();
    assert_eq!(after["status"], "failed");
    assert_eq!(after["progress"], 0.0);
    assert!(!api.ws.out.join("manifest.json").exists());
    assert!(!api.ws.out.join("manifest.json.partial").exists());
    let again = api.call(Method::POST, &format!("/api/jobs/{id}/cancel"), None).await;
    assert_eq!(again.status, StatusCode::CONFLICT);
    assert_eq!(api.submit(json!({ "kind": "detect" })).await.status, StatusCode::ACCEPTED);
}

#[tokio::test(flavor = "multi_thread")]
async fn job_requests_are_validated() {
    let api = Api::new("servlet/mutant", &servlet_dataset());
    for (body, field) in [
        (json!({}), "kind"),
        (json!({ "kind": "compile" }), "kind"),
        (json!({ "kind": "detect", "priority": 1 }), "priority"),
        (json!({ "kind": "detect", "config": { "project_root": "/" } }), "config"),
        (json!({ "kind": "detect", "config": { "model_path": "absent.json" } }), "config.model_path"),
        (json!({ "kind": "detect", "config": { "cwe_filter": ["source"] } }), "config.cwe_filter"),
    ] {
        let r = api.submit(body.clone()).await;
        assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY, "{body}: {}", r.text);
        assert_eq!(r.json()["path"], field, "{body}");
    }
    let not_json = api.call(Method::POST, "/api/jobs", None).await;
    assert_eq!(not_json.status, StatusCode::BAD_REQUEST);
    assert_eq!(api.get("/api/jobs").await.json(), json!([]));
}

#[tokio::test(flavor = "multi_thread")]
async fn failed_job_reports_its_stage() {
    let api = Api::new("servlet/mutant", &servlet_dataset());
    std::fs::write(api.ws.project.join("bad-model.json"), "[]").unwrap();
    let r = api
        .submit(json!({ "kind": "pipeline", "config": { "model_path": "bad-model.json" } }))
        .await;
    assert_eq!(r.status, StatusCode::ACCEPTED, "{}", r.text);
    let (job, _) = api.wait(r.json()["id"].as_str().unwrap()).await;
    assert_eq!(job["status"], "failed");
    assert!(job["error"].as_str().unwrap().starts_with("stage `train` failed"), "{job}");
    assert!(api.ws.out.join("manifest.json.partial").exists());
}

#[tokio::test(flavor = "multi_thread")]
async fn review_feedback_changes_the_next_analysis() {
    let api = Api::new("servlet/sanitized", &servlet_dataset());
    api.run("pipeline").await;
    assert_eq!(api.get("/api/findings").await.json(), json!([]));

    let r = api
        .call(Method::PATCH, &path(SANITIZER), Some(json!({ "labels": [] })))
        .await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    api.run("analyze").await;
    let findings = api.get("/api/findings").await.json();
    assert_eq!(findings.as_array().unwrap().len(), 1, "{findings}");
    assert_eq!(findings[0]["cwe"], "cwe89");

    api.call(
        Method::PATCH,
        &path(SANITIZER),
        Some(json!({ "labels": ["sanitizer", "cwe89"], "dataIn": [1], "dataOut": "return" })),
    )
    .await;
    api.run("analyze").await;
    assert_eq!(api.get("/api/findings").await.json(), json!([]));
}

#[tokio::test(flavor = "multi_thread")]
async fn detect_persists_detections_but_keeps_manual_records() {
    let api = Api::new("servlet/mutant", &servlet_dataset());
    api.call(
        Method::PATCH,
        &path(DO_POST),
        Some(json!({ "labels": ["sink"], "dataIn": [0] })),
    )
    .await;
    let job = api.run("detect").await;
    assert!(job["result_ref"].as_str().unwrap().ends_with("dataset.json"));
    let saved = load_dataset(&api.ws.dataset);
    let manual = saved.get(DO_POST).unwrap();
    assert_eq!(manual.discovery, srm_core::dataset::Discovery::Manual);
    assert_eq!(manual.data_in, [0]);
    let row = api.get(&path(DO_POST)).await.json();
    assert_eq!(row["labels"], json!(["sink"]));
    assert_eq!(row["scores"].as_object().unwrap().len(), 10);
}
