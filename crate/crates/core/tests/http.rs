use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use prosumer::decision::{cutoff_schedule, optimal_action, DecisionContext, Window};
use prosumer::fitting::read_traces;
use prosumer::market::{at_least_once_probabilities, standard_price_distribution};
use prosumer::service::http::router;
use prosumer::service::SessionStore;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, String) {
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
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn json_call(
    app: &Router,
    method: &str,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let (status, text) = call(app, method, uri, body).await;
    (status, serde_json::from_str(&text).unwrap_or(Value::Null))
}

fn app() -> (Router, Arc<SessionStore>) {
    let store = Arc::new(SessionStore::in_memory());
    (router(store.clone()), store)
}

async fn create(app: &Router, body: Value) -> (String, Value) {
    let (status, state) = json_call(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{state}");
    (state["session_id"].as_str().unwrap().to_owned(), state)
}

#[tokio::test]
async fn default_session_opens_with_five_units() {
    let (app, _) = app();
    let (status, state) = json_call(&app, "POST", "/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(state["day"], 1);
    assert_eq!(state["horizon"], 68);
    assert_eq!(state["stored_units"], 5);
    assert_eq!(state["profit"]["dollars"], "0.00");
    assert_eq!(state["at_least_once"].as_array().unwrap().len(), 15);
    let id = state["session_id"].as_str().unwrap();
    let (status, again) = json_call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again, state);
}

#[tokio::test]
async fn unknown_session_and_bad_params() {
    let (app, _) = app();
    let (status, body) = json_call(&app, "GET", "/sessions/nope/state", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(body["error"].is_string());
    let (status, _) = call(
        &app,
        "POST",
        "/sessions/nope/decisions",
        Some(json!({"units": 0})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({"horizon": 0}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"distribution": [0.5, 0.6]})),
    )
    .await;
    assert!(status.is_client_error());
}

#[tokio::test]
async fn oversell_is_rejected_without_advancing() {
    let (app, _) = app();
    let (id, state) = create(&app, json!({"horizon": 5, "seed": 3})).await;
    let (status, body) = json_call(
        &app,
        "POST",
        &format!("/sessions/{id}/decisions"),
        Some(json!({"units": 7})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(body["error"]
        .as_str()
        .unwrap()
        .contains("more than you have"));
    let (_, now) = json_call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(now, state);

    let (status, _) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/decisions"),
        Some(json!({"units": 2, "day": 1})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let (status, _) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/decisions"),
        Some(json!({"units": 0, "day": 1})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = call(&app, "GET", &format!("/sessions/{id}/report"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn state_never_reveals_future_prices() {
    let (app, store) = app();
    let (id, mut state) = create(&app, json!({"horizon": 12, "seed": 21})).await;
    let scenario = store.snapshot(&id).unwrap().scenario().clone();
    let dist = standard_price_distribution();
    for day in 1..=12u32 {
        assert_eq!(state["day"], day);
        assert_eq!(state["todays_price"]["index_units"], scenario.price(day));
        let keys: Vec<&String> = state.as_object().unwrap().keys().collect();
        for hidden in ["offered_prices", "scenario", "generated_units"] {
            assert!(!keys.iter().any(|k| *k == hidden), "{hidden} exposed");
        }
        let table: Vec<f64> = state["at_least_once"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c["probability"].as_f64().unwrap())
            .collect();
        assert_eq!(table, at_least_once_probabilities(&dist, 12 - day + 1));
        let (status, out) = json_call(
            &app,
            "POST",
            &format!("/sessions/{id}/decisions"),
            Some(json!({"units": 0})),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
        // The acknowledgement covers today only; the next state shows the
        // next day's price and nothing beyond it.
        let text = out.to_string();
        assert!(!text.contains("offered_prices"));
        state = out["state"].clone();
    }
    assert_eq!(state["status"], "completed");
    assert!(state["todays_price"].is_null());
}

#[tokio::test]
async fn trace_csv_round_trips_through_fitting() {
    let (app, store) = app();
    let (id, _) = create(&app, json!({"horizon": 6, "seed": 2})).await;
    for units in [1u32, 0, 2, 0, 0] {
        let (status, _) = call(
            &app,
            "POST",
            &format!("/sessions/{id}/decisions"),
            Some(json!({"units": units})),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
    }
    let (_, state) = json_call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    let all = state["stored_units"].as_u64().unwrap();
    let (status, out) = json_call(
        &app,
        "POST",
        &format!("/sessions/{id}/decisions"),
        Some(json!({"units": all})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert!(out["report"].is_object());
    assert_eq!(out["state"]["stored_units"], 0);

    let (status, csv) = call(&app, "GET", &format!("/sessions/{id}/trace.csv"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(csv.starts_with("participant_id,day,offered_price,units_available,units_sold\n"));
    let traces = read_traces(csv.as_bytes()).unwrap();
    assert_eq!(traces.len(), 1);
    let trace = &traces[0];
    assert_eq!(trace.participant_id, id);
    let snapshot = store.snapshot(&id).unwrap();
    trace.check_against(snapshot.scenario()).unwrap();
    assert_eq!(trace.profit(), snapshot.profit());

    let (status, report) = json_call(&app, "GET", &format!("/sessions/{id}/report"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["profit"]["index_units"], snapshot.profit());
    assert_eq!(report["sell_days"], 3);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_duplicates_count_once() {
    let (app, store) = app();
    let (id, state) = create(&app, json!({"horizon": 4, "seed": 8})).await;
    let stored = state["stored_units"].as_u64().unwrap();
    let tasks: Vec<_> = (0..16)
        .map(|_| {
            let app = app.clone();
            let uri = format!("/sessions/{id}/decisions");
            tokio::spawn(async move {
                call(&app, "POST", &uri, Some(json!({"units": 1, "day": 1})))
                    .await
                    .0
            })
        })
        .collect();
    let mut ok = 0;
    for t in tasks {
        match t.await.unwrap() {
            StatusCode::OK => ok += 1,
            s => assert_eq!(s, StatusCode::CONFLICT),
        }
    }
    assert_eq!(ok, 1);
    let snapshot = store.snapshot(&id).unwrap();
    assert_eq!(snapshot.day(), 2);
    assert_eq!(
        snapshot.inventory() as u64,
        stored - 1 + snapshot.scenario().generated(2) as u64
    );
    assert_eq!(store.events().len(), 2);
}

#[tokio::test]
async fn obedient_five_day_window_player_is_recognised() {
    let (app, store) = app();
    let (id, mut state) = create(&app, json!({"seed": 5})).await;
    let dist = standard_price_distribution();
    let schedule = cutoff_schedule(&dist, 67);
    let mut profit = 0u64;
    let mut out = Value::Null;
    while state["status"] == "active" {
        let ctx = DecisionContext {
            day: state["day"].as_u64().unwrap() as u32,
            horizon: 68,
            units_available: state["stored_units"].as_u64().unwrap() as u32,
            offered_price: state["todays_price"]["index_units"].as_u64().unwrap() as u32,
            window: Window::Bounded(5),
        };
        let units = optimal_action(&ctx, &schedule).unwrap();
        profit += units as u64 * ctx.offered_price as u64;
        let (status, next) = json_call(
            &app,
            "POST",
            &format!("/sessions/{id}/decisions"),
            Some(json!({"units": units})),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
        state = next["state"].clone();
        out = next;
    }
    let report = &out["report"];
    assert_eq!(report["profit"]["index_units"], profit);
    assert_eq!(
        report["profit"]["index_units"],
        store.snapshot(&id).unwrap().profit()
    );
    for metric in ["mean_deviation", "proportional_deviation"] {
        let fit = &report[metric];
        assert_eq!(fit["score"], 0.0, "{metric}: {fit}");
        // Windows 4 and 5 share a cutoff, so the fit names the smaller one
        // and lists both.
        assert_eq!(fit["best_window"], 4, "{metric}: {fit}");
        assert!(
            fit["tied_windows"].as_array().unwrap().contains(&json!(5)),
            "{metric}: {fit}"
        );
    }
    assert!(report["hindsight_profit"]["index_units"].as_u64().unwrap() >= profit);
}
