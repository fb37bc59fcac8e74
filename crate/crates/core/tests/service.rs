#![cfg(feature = "service")]

use std::io::Read as _;
use std::path::Path;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use regacd::mesh::write_obj;
use regacd::pipeline::{interactive_decomposition, PipelineParams};
use regacd::service::{router, AppState, ServiceConfig};
use regacd::{fixtures, TriangleMesh};

fn app(dir: &Path) -> Router {
    app_with(ServiceConfig { data_dir: dir.to_path_buf(), ..Default::default() })
}

fn app_with(config: ServiceConfig) -> Router {
    router(AppState::open(config).unwrap())
}

async fn call(app: &Router, method: &str, uri: &str, body: impl Into<Body>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri).body(body.into()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn call_json(app: &Router, method: &str, uri: &str, body: impl Into<Body>) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn upload(app: &Router, mesh: &TriangleMesh) -> String {
    let (status, v) = call_json(app, "POST", "/meshes?format=obj", write_obj(mesh)).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    v["mesh_id"].as_str().unwrap().to_string()
}

async fn submit(app: &Router, mesh_id: &str, kind: &str, params: Value) -> String {
    let body = json!({ "mesh_id": mesh_id, "kind": kind, "params": params }).to_string();
    let (status, v) = call_json(app, "POST", "/jobs", body).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    v["job_id"].as_str().unwrap().to_string()
}

/// Polls until the job leaves the queue, returning its final record.
async fn wait(app: &Router, job: &str) -> Value {
    let started = Instant::now();
    loop {
        let (status, v) = call_json(app, "GET", &format!("/jobs/{job}"), Body::empty()).await;
        assert_eq!(status, StatusCode::OK);
        if v["state"] == "done" || v["state"] == "failed" {
            return v;
        }
        assert!(started.elapsed() < Duration::from_secs(300), "job {job} stuck: {v}");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}

#[tokio::test]
async fn upload_cube() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (status, v) = call_json(&app, "POST", "/meshes", write_obj(&fixtures::unit_cube())).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["validation"]["watertight"], true);
    let id = v["mesh_id"].as_str().unwrap();
    let (status, meta) = call_json(&app, "GET", &format!("/meshes/{id}"), Body::empty()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(meta["validation"]["face_count"], 12);
    let (status, file) = call(&app, "GET", &format!("/meshes/{id}/file"), Body::empty()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(file, write_obj(&fixtures::unit_cube()).into_bytes());
}

#[tokio::test]
async fn multipart_upload() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let obj = write_obj(&fixtures::l_prism());
    let body = format!(
        "--XX\r\nContent-Disposition: form-data; name=\"file\"; filename=\"l.obj\"\r\nContent-Type: model/obj\r\n\r\n{obj}\r\n--XX--\r\n"
    );
    let req = Request::builder()
        .method("POST")
        .uri("/meshes")
        .header("content-type", "multipart/form-data; boundary=XX")
        .body(Body::from(body))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let v: Value = serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap();
    assert_eq!(v["validation"]["vertex_count"], fixtures::l_prism().vertices().len());
}

#[tokio::test]
async fn bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_with(ServiceConfig { data_dir: dir.path().to_path_buf(), max_upload_bytes: 4096, ..Default::default() });
    let id = upload(&app, &fixtures::unit_cube()).await;

    let overlapping = json!({ "regions": [
        { "id": "a", "min": [0.0, 0.0, 0.0], "max": [0.6, 0.6, 0.6], "tolerance": 0.01 },
        { "id": "b", "min": [0.5, 0.5, 0.5], "max": [1.0, 1.0, 1.0], "tolerance": 0.01 },
    ]});
    let (status, v) = call_json(&app, "PUT", &format!("/meshes/{id}/regions"), overlapping.to_string()).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "OverlappingRegions");
    assert!(v["detail"].as_str().unwrap().contains('a'));

    let touching = json!({ "regions": [
        { "id": "a", "min": [0.0, 0.0, 0.0], "max": [0.5, 1.0, 1.0], "tolerance": 0.01 },
        { "id": "b", "min": [0.5, 0.0, 0.0], "max": [1.0, 1.0, 1.0], "tolerance": 0.0 },
    ]});
    let (status, v) = call_json(&app, "PUT", &format!("/meshes/{id}/regions"), touching.to_string()).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["valid"], true);

    assert_eq!(call(&app, "GET", "/meshes/nope", Body::empty()).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/jobs/nope", Body::empty()).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/export/nope", Body::empty()).await.0, StatusCode::NOT_FOUND);
    let (status, v) = call_json(&app, "POST", "/jobs", json!({ "mesh_id": "nope", "kind": "decompose" }).to_string()).await;
    assert_eq!((status, v["error"].as_str()), (StatusCode::NOT_FOUND, Some("NotFound")));
    let (status, _) = call_json(&app, "POST", "/jobs", "{not json").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let bad = json!({ "mesh_id": id, "kind": "decompose", "params": { "remainder_tolerance": -1.0 } });
    assert_eq!(call(&app, "POST", "/jobs", bad.to_string()).await.0, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, v) = call_json(&app, "POST", "/meshes", write_obj(&fixtures::icosphere(3, 1.0))).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE, "{v}");
    let open = TriangleMesh::new(fixtures::unit_cube().vertices().to_vec(), fixtures::unit_cube().faces()[1..].to_vec()).unwrap();
    let (status, v) = call_json(&app, "POST", "/meshes", write_obj(&open)).await;
    assert_eq!((status, v["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("NotWatertight")));
}

#[tokio::test]
async fn l_prism_job_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let mesh = fixtures::l_prism();
    let id = upload(&app, &mesh).await;
    let job = submit(&app, &id, "decompose", json!({ "remainder_tolerance": 0.05 })).await;
    let rec = wait(&app, &job).await;
    assert_eq!(rec["state"], "done", "{rec}");
    assert_eq!(rec["progress"], 1.0);
    // Re-polling a finished job returns the same record.
    assert_eq!(call_json(&app, "GET", &format!("/jobs/{job}"), Body::empty()).await.1, rec);

    let (status, result) = call_json(&app, "GET", &format!("/jobs/{job}/result"), Body::empty()).await;
    assert_eq!(status, StatusCode::OK);
    let parts = result["manifest"]["parts"].as_array().unwrap();
    assert!(parts.len() >= 2);
    let files = result["files"].as_array().unwrap();
    assert_eq!(files.len(), parts.len());
    let (status, obj) = call(&app, "GET", files[0].as_str().unwrap(), Body::empty()).await;
    assert_eq!(status, StatusCode::OK);
    assert!(String::from_utf8(obj).unwrap().starts_with("v "));
    assert_eq!(call(&app, "GET", &format!("/jobs/{job}/files/..%2Findex.json"), Body::empty()).await.0, StatusCode::NOT_FOUND);

    let expected = interactive_decomposition(&mesh, &PipelineParams { remainder_tolerance: 0.05, ..Default::default() }).unwrap();
    assert_eq!(result["manifest"]["fingerprint"], expected.fingerprint());

    let (status, zip_bytes) = call(&app, "GET", &format!("/export/{job}"), Body::empty()).await;
    assert_eq!(status, StatusCode::OK);
    let mut archive = zip::ZipArchive::new(std::io::Cursor::new(zip_bytes)).unwrap();
    assert_eq!(archive.len(), parts.len() + 1);
    let mut manifest = String::new();
    archive.by_name("manifest.json").unwrap().read_to_string(&mut manifest).unwrap();
    let manifest: Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(manifest["fingerprint"], expected.fingerprint());

    let eval = submit(&app, &id, "error_eval", json!({ "decomposition": job, "n": 5000 })).await;
    assert_eq!(wait(&app, &eval).await["state"], "done");
    let (status, report) = call_json(&app, "GET", &format!("/jobs/{eval}/result"), Body::empty()).await;
    assert_eq!(status, StatusCode::OK);
    assert!(report["overall"].as_f64().unwrap() >= 0.0);

    let bench = submit(&app, &id, "bench", json!({ "decomposition": job, "steps": 5 })).await;
    assert_eq!(wait(&app, &bench).await["state"], "done");
    let (_, perf) = call_json(&app, "GET", &format!("/jobs/{bench}/result"), Body::empty()).await;
    assert_eq!(perf["steps"], 5);
    assert_eq!(perf["object_pair_queries"], 5 * 300);
    assert_eq!(call(&app, "GET", &format!("/export/{bench}"), Body::empty()).await.0, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn unfinished_results_conflict() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_with(ServiceConfig { data_dir: dir.path().to_path_buf(), max_jobs: 1, ..Default::default() });
    let id = upload(&app, &fixtures::motor_like()).await;
    // The first job holds the only slot, so the second one stays queued.
    let first = submit(&app, &id, "decompose", json!({ "remainder_tolerance": 0.02 })).await;
    let second = submit(&app, &id, "decompose", json!({ "remainder_tolerance": 0.02, "seed": 1 })).await;
    let (_, rec) = call_json(&app, "GET", &format!("/jobs/{second}"), Body::empty()).await;
    assert_eq!(rec["state"], "queued");
    let (status, v) = call_json(&app, "GET", &format!("/jobs/{second}/result"), Body::empty()).await;
    assert_eq!((status, v["error"].as_str()), (StatusCode::CONFLICT, Some("JobNotDone")));
    assert_eq!(call(&app, "GET", &format!("/export/{second}"), Body::empty()).await.0, StatusCode::CONFLICT);
    let eval = json!({ "mesh_id": id, "kind": "bench", "params": { "decomposition": second } });
    assert_eq!(call(&app, "POST", "/jobs", eval.to_string()).await.0, StatusCode::CONFLICT);
    wait(&app, &first).await;
    wait(&app, &second).await;
}

#[tokio::test]
async fn store_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let (id, job, result) = {
        let app = app(dir.path());
        let id = upload(&app, &fixtures::dumbbell()).await;
        let job = submit(&app, &id, "decompose", json!({ "remainder_tolerance": 0.1 })).await;
        assert_eq!(wait(&app, &job).await["state"], "done");
        let result = call_json(&app, "GET", &format!("/jobs/{job}/result"), Body::empty()).await.1;
        (id, job, result)
    };
    let app = app(dir.path());
    assert_eq!(call(&app, "GET", &format!("/meshes/{id}"), Body::empty()).await.0, StatusCode::OK);
    assert_eq!(call_json(&app, "GET", &format!("/jobs/{job}"), Body::empty()).await.1["state"], "done");
    assert_eq!(call_json(&app, "GET", &format!("/jobs/{job}/result"), Body::empty()).await.1, result);
    // Uploading identical bytes again reuses the stored blob.
    assert_eq!(upload(&app, &fixtures::dumbbell()).await, id);
}

#[tokio::test]
async fn error_heatmap_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let mesh = fixtures::dimpled_cube();
    let id = upload(&app, &mesh).await;
    let job = submit(&app, &id, "decompose", json!({ "remainder_tolerance": 0.5 })).await;
    assert_eq!(wait(&app, &job).await["state"], "done");
    let dimple = json!({ "id": "d", "min": [0.2, 0.2, 0.6], "max": [0.8, 0.8, 1.1], "tolerance": 0.1 });
    let req = json!({ "mesh_id": id, "decomposition": job, "regions": [dimple], "n": 20000, "beta": 0.1 });
    let (status, set) = call_json(&app, "POST", "/evaluate/error", req.to_string()).await;
    assert_eq!(status, StatusCode::OK, "{set}");
    let points = set["points"].as_array().unwrap();
    assert!(!points.is_empty() && points.len() < 20000);
    let req = json!({ "mesh_id": id, "decomposition": job, "regions": [dimple], "n": 3000, "on_approx": true });
    let (status, set) = call_json(&app, "POST", "/evaluate/error", req.to_string()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(set["points"].as_array().unwrap().len(), 3000);
    let req = json!({ "mesh_id": id, "decomposition": "nope", "n": 10 });
    assert_eq!(call(&app, "POST", "/evaluate/error", req.to_string()).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    let req = json!({ "mesh_id": id, "decomposition": job, "n": 0 });
    assert_eq!(call(&app, "POST", "/evaluate/error", req.to_string()).await.0, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn concurrent_jobs_match_sequential_runs() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_with(ServiceConfig { data_dir: dir.path().to_path_buf(), max_jobs: 2, ..Default::default() });
    let meshes = [fixtures::l_prism(), fixtures::dumbbell()];
    let params = json!({ "remainder_tolerance": 0.03, "seed": 5 });
    let mut jobs = Vec::new();
    for m in &meshes {
        let id = upload(&app, m).await;
        jobs.push(submit(&app, &id, "decompose", params.clone()).await);
    }
    let expected: PipelineParams = serde_json::from_value(params).unwrap();
    for (m, job) in meshes.iter().zip(&jobs) {
        assert_eq!(wait(&app, job).await["state"], "done");
        let (_, result) = call_json(&app, "GET", &format!("/jobs/{job}/result"), Body::empty()).await;
        let sequential = interactive_decomposition(m, &expected).unwrap();
        assert_eq!(result["manifest"]["fingerprint"], sequential.fingerprint());
    }
}
