use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use pollen_core::RgbImage;
use pollen_workbench::imageio::save_rgb;
use pollen_workbench::manifest::{read_manifest, write_manifest, Label, ManifestRecord};
use pollen_workbench::server::{router, AppState, PAGE_SIZE, REVISION_HEADER};
use serde_json::{json, Value};
use tower::ServiceExt;

fn setup(n: usize) -> (tempfile::TempDir, Router, Arc<AppState>) {
    let dir = tempfile::tempdir().unwrap();
    let recs: Vec<ManifestRecord> = (0..n)
        .map(|i| ManifestRecord::new(&format!("s_{i:04}"), "s.png", [i, i, i + 10, i + 10], [i as f64 + 5.0, i as f64 + 5.0]))
        .collect();
    std::fs::create_dir_all(dir.path().join("crops")).unwrap();
    let img = RgbImage::from_fn(84, 84, |x, y| [x as u8, y as u8, 7]);
    save_rgb(&img, &dir.path().join(&recs[0].crop)).unwrap();
    let path = dir.path().join("manifest.jsonl");
    write_manifest(&path, &recs).unwrap();
    let state = AppState::open(&path).unwrap();
    (dir, router(state.clone(), None), state)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, u64, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let rev: u64 = resp.headers()[REVISION_HEADER].to_str().unwrap().parse().unwrap();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v: Value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    if v.is_object() {
        assert_eq!(v["revision"], json!(rev), "body and header revisions differ");
    }
    (status, rev, v)
}

#[tokio::test]
async fn label_round_trip_is_durable() {
    let (dir, app, _) = setup(5);
    let (s, rev, v) = call(&app, "POST", "/api/objects/s_0002/label", Some(json!({"class": 3, "annotator": "ana"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(rev, 1);
    assert_eq!(v["object"]["label"], json!(3));
    let (s, _, v) = call(&app, "GET", "/api/objects/s_0002", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["object"]["label"], json!(3));
    assert_eq!(v["object"]["labeled_by"], json!("ana"));
    assert_eq!(v["object"]["status"], json!("labeled"));
    assert!(v["object"]["labeled_at"].as_str().unwrap().ends_with('Z'));

    let on_disk = read_manifest(&dir.path().join("manifest.jsonl")).unwrap();
    assert_eq!(on_disk[2].label, Label::Class(3));
    assert_eq!(on_disk[2].revision, 1);
}

#[tokio::test]
async fn invalid_labels_are_rejected() {
    let (_dir, app, _) = setup(3);
    for body in [json!({"class": 7}), json!({"class": 0}), json!({"class": -1})] {
        let (s, rev, v) = call(&app, "POST", "/api/objects/s_0000/label", Some(body)).await;
        assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
        assert_eq!(rev, 0);
        assert_eq!(v["retryable"], json!(false));
    }
    let (s, ..) = call(&app, "POST", "/api/objects/s_0000/label", Some(json!({"class": 2, "discard": true}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, ..) = call(&app, "POST", "/api/objects/s_0000/label", Some(json!({"colour": 2}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, ..) = call(&app, "POST", "/api/objects/nope/label", Some(json!({"class": 2}))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (_, _, v) = call(&app, "GET", "/api/objects/s_0000", None).await;
    assert_eq!(v["object"]["label"], json!("unlabeled"));
}

#[tokio::test]
async fn progress_after_ten_of_hundred() {
    let (_dir, app, _) = setup(100);
    for i in 0..10 {
        let class = [1, 3, 3, 4, 2, 3, 1, 5, 3, 4][i];
        let (s, ..) = call(&app, "POST", &format!("/api/objects/s_{i:04}/label"), Some(json!({"class": class}))).await;
        assert_eq!(s, StatusCode::OK);
    }
    let (s, _, discard) = call(&app, "POST", "/api/objects/s_0050/label", Some(json!({"discard": true}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(discard["object"]["label"], json!("discarded"));

    let (s, rev, p) = call(&app, "GET", "/api/progress", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(rev, 11);
    assert_eq!(p["total"], json!(100));
    assert_eq!(p["labeled"], json!(10));
    assert_eq!(p["discarded"], json!(1));
    assert_eq!(p["unlabeled"], json!(89));
    assert_eq!(p["percent_labeled"], json!(10.0));
    let per_class: u64 = p["per_class"].as_object().unwrap().values().map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(per_class, 10);
    assert_eq!(p["per_class"]["3"], json!(4));
}

#[tokio::test]
async fn stale_revision_conflicts() {
    let (_dir, app, _) = setup(4);
    // Two clients both saw revision 0 of the object.
    let (s, ..) = call(&app, "POST", "/api/objects/s_0001/label", Some(json!({"class": 1, "revision": 0}))).await;
    assert_eq!(s, StatusCode::OK);
    let (s, rev, v) = call(&app, "POST", "/api/objects/s_0001/label", Some(json!({"class": 2, "revision": 0}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["retryable"], json!(true));
    assert_eq!(v["object"]["label"], json!(1));
    assert_eq!(v["object"]["revision"], json!(1));
    // Reconcile with the current revision and retry.
    let (s, _, v) = call(&app, "POST", "/api/objects/s_0001/label", Some(json!({"class": 2, "revision": 1}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["object"]["label"], json!(2));

    let (s, ..) = call(&app, "POST", "/api/objects/s_0003/label", Some(json!({"discard": true, "manifest_revision": rev}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, ..) = call(&app, "POST", "/api/objects/s_0003/label", Some(json!({"discard": true, "manifest_revision": rev + 1}))).await;
    assert_eq!(s, StatusCode::OK);
}

#[tokio::test]
async fn paging_and_status_filter() {
    let (_dir, app, _) = setup(100);
    let (_, _, v) = call(&app, "GET", "/api/objects?status=unlabeled&page=1", None).await;
    assert_eq!(v["pages"], json!(5));
    assert_eq!(v["page_size"], json!(PAGE_SIZE));
    assert_eq!(v["objects"].as_array().unwrap().len(), 24);
    let (_, _, v) = call(&app, "GET", "/api/objects?status=unlabeled&page=5", None).await;
    assert_eq!(v["objects"].as_array().unwrap().len(), 4);
    assert_eq!(v["objects"][0]["object_id"], json!("s_0096"));
    let (_, _, v) = call(&app, "GET", "/api/objects?page=6", None).await;
    assert!(v["objects"].as_array().unwrap().is_empty());

    call(&app, "POST", "/api/objects/s_0010/label", Some(json!({"discard": true}))).await;
    call(&app, "POST", "/api/objects/s_0011/label", Some(json!({"class": 4}))).await;
    let (_, _, v) = call(&app, "GET", "/api/objects?status=discarded", None).await;
    assert_eq!(v["total"], json!(1));
    assert_eq!(v["objects"][0]["object_id"], json!("s_0010"));
    let (_, _, v) = call(&app, "GET", "/api/objects?status=unlabeled", None).await;
    assert_eq!(v["total"], json!(98));
    let (s, ..) = call(&app, "GET", "/api/objects?status=weird", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, ..) = call(&app, "GET", "/api/objects?page=0", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let (s, _, v) = call(&app, "POST", "/api/objects/s_0010/label", Some(json!({"unlabel": true}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["object"]["status"], json!("unlabeled"));
}

#[tokio::test]
async fn images_and_classes() {
    let (_dir, app, _) = setup(2);
    let req = Request::get("/api/objects/s_0000/image?kind=crop").body(Body::empty()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()["content-type"], "image/png");
    assert_eq!(resp.headers()[REVISION_HEADER], "0");
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&bytes[1..4], b"PNG");

    let (s, ..) = call(&app, "GET", "/api/objects/s_0000/image?kind=xray", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, ..) = call(&app, "GET", "/api/objects/s_0001/image?kind=green", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let (s, _, v) = call(&app, "GET", "/api/classes", None).await;
    assert_eq!(s, StatusCode::OK);
    let classes = v["classes"].as_array().unwrap();
    assert_eq!(classes.len(), 5);
    assert_eq!(classes[2]["reference_count"], json!(9558));
    assert_eq!(classes[4]["name"], json!("Cupressaceae"));
}

#[tokio::test]
async fn static_ui_is_served_beside_the_api() {
    let (dir, _, state) = setup(1);
    let ui = dir.path().join("ui");
    std::fs::create_dir_all(&ui).unwrap();
    std::fs::write(ui.join("index.html"), "<h1>labels</h1>").unwrap();
    let app = router(state, Some(Path::new(&ui)));
    let resp = app.clone().oneshot(Request::get("/index.html").body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let (s, ..) = call(&app, "GET", "/api/progress", None).await;
    assert_eq!(s, StatusCode::OK);
}
