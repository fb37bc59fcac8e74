//! Drives the HTTP service in-process: upload a mesh, store regions, run a
//! decomposition job and fetch its result.

use std::time::Duration;

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use regacd::fixtures;
use regacd::mesh::write_obj;
use regacd::service::{router, AppState, ServiceConfig};

async fn call(app: &axum::Router, method: &str, uri: &str, body: impl Into<Body>) -> Value {
    let req = Request::builder().method(method).uri(uri).body(body.into()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap()
}

#[tokio::main]
async fn main() {
    let data = std::env::temp_dir().join("regacd-example-service");
    let app = router(AppState::open(ServiceConfig { data_dir: data, ..Default::default() }).unwrap());

    let up = call(&app, "POST", "/meshes", write_obj(&fixtures::l_prism())).await;
    let mesh_id = up["mesh_id"].as_str().unwrap();
    println!("uploaded {mesh_id}: {}", up["validation"]);

    let regions = json!({ "regions": [{ "id": "notch", "min": [0.5, 0.5, -0.1], "max": [1.5, 1.5, 1.1], "tolerance": 0.01 }], "remainder_tolerance": 0.05 });
    println!("regions: {}", call(&app, "PUT", &format!("/meshes/{mesh_id}/regions"), regions.to_string()).await);

    let job = call(&app, "POST", "/jobs", json!({ "mesh_id": mesh_id, "kind": "decompose" }).to_string()).await;
    let job_id = job["job_id"].as_str().unwrap();
    loop {
        let state = call(&app, "GET", &format!("/jobs/{job_id}"), Body::empty()).await;
        if state["state"] == "done" || state["state"] == "failed" {
            println!("job {job_id}: {}", state["state"]);
            break;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    let result = call(&app, "GET", &format!("/jobs/{job_id}/result"), Body::empty()).await;
    println!("{} parts, files {}", result["manifest"]["parts"].as_array().map_or(0, Vec::len), result["files"]);
}
