use axum::body::Body;
use axum::http::{Request, StatusCode};
use gfield::mesh::{build_mesh, MeshConfig};
use gfield_cli::serve::router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value, String) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string()))).unwrap();
    let resp = router(None).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let text = String::from_utf8_lossy(&bytes).to_string();
    (status, serde_json::from_str(&text).unwrap_or(Value::Null), text)
}

async fn post(uri: &str, body: Value) -> (StatusCode, Value) {
    let (s, v, _) = call("POST", uri, Some(body)).await;
    (s, v)
}

#[tokio::test]
async fn square_corners_give_two_triangles() {
    let body = json!({"points": [[0, 0], [1, 0], [1, 1], [0, 1]], "config": {"max_edge_inner": 5}});
    let (status, v) = post("/api/mesh", body.clone()).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["mesh"]["triangles"].as_array().unwrap().len(), 2);
    assert_eq!(v["mesh"]["vertices"].as_array().unwrap().len(), 4);
    assert!((v["quality"]["min_angle_deg"].as_f64().unwrap() - 45.0).abs() < 1e-9);
    assert_eq!(v["request"], body);
    assert!(v["quality"]["edge_histogram"]["counts"].is_array());
}

#[tokio::test]
async fn validation_errors_name_the_field() {
    let (status, v) = post("/api/mesh", json!({"points": "nope", "config": {"min_angle": 80}})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let fields: Vec<&str> = v["fields"].as_array().unwrap().iter().map(|f| f["field"].as_str().unwrap()).collect();
    assert_eq!(fields, ["points", "config"]);

    let (status, v) = post("/api/sample", json!({"mesh": {"vertices": [], "triangles": []}})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let fields: Vec<&str> = v["fields"].as_array().unwrap().iter().map(|f| f["field"].as_str().unwrap()).collect();
    assert!(fields.contains(&"matern_params") && fields.contains(&"seed"), "{v}");

    let (status, v) = post("/api/mesh", json!({"points": [[0, 0], [1, 1], [2, 2]]})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{v}");
    assert!(v["message"].is_string());

    let (status, _, _) = call("POST", "/api/mesh", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

fn fine_mesh() -> Value {
    let mut pts = Vec::new();
    for i in 0..=8 {
        for j in 0..=8 {
            pts.push([2.0 * i as f64, 2.0 * j as f64]);
        }
    }
    let mesh = build_mesh(&pts, None, &MeshConfig::with_max_edge(0.25, 4.0)).unwrap();
    serde_json::to_value(mesh).unwrap()
}

#[tokio::test]
async fn assess_on_fine_mesh_is_accurate_within_two_ranges() {
    let body = json!({"mesh": fine_mesh(), "matern_params": {"range": 2, "sigma": 1}});
    let (status, v) = post("/api/assess", body).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let bins = v["bins"].as_array().unwrap();
    assert_eq!(bins.len(), 20);
    assert_eq!(v["metric"], "mean_abs_error");
    let worst = bins
        .iter()
        .filter(|b| b["d_hi"].as_f64().unwrap() <= 4.0 + 1e-9 && b["count"].as_u64().unwrap() > 0)
        .map(|b| b["mean_abs_error"].as_f64().unwrap())
        .fold(0.0f64, f64::max);
    assert!(worst <= 0.05, "worst binned error {worst}");
    assert_eq!(v["marginal_sd"].as_array().unwrap().len(), v["request"]["mesh"]["vertices"].as_array().unwrap().len());
}

#[tokio::test]
async fn sampling_is_deterministic_and_stateless() {
    let body = json!({
        "mesh": {"vertices": [[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]],
                 "triangles": [[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]]},
        "matern_params": {"range": 1, "sigma": 1},
        "seed": 7
    });
    let (_, _, a) = call("POST", "/api/sample", Some(body.clone())).await;
    let (_, _, b) = call("POST", "/api/sample", Some(body.clone())).await;
    assert_eq!(a, b);
    let v: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["field"].as_array().unwrap().len(), 5);
    assert_eq!(v["request"]["seed"], 7);

    let mut other = body;
    other["seed"] = json!(8);
    let (_, _, c) = call("POST", "/api/sample", Some(other)).await;
    assert_ne!(a, c);
}

#[tokio::test]
async fn index_page_is_served() {
    let (status, _, text) = call("GET", "/", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(text.contains("/api/mesh"));
}
