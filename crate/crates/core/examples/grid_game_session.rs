//! Plays a short grid game against the session store: a scripted player
//! sells whenever the price reaches 10, then the final report is printed.
//! Pass `--serve` to expose the same store over HTTP instead.
//!
//!     cargo run --example grid_game_session
//!     cargo run --example grid_game_session -- --serve 127.0.0.1:8080

use std::sync::Arc;

use prosumer::service::{http, SessionParams, SessionStore};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.get(1).map(String::as_str) == Some("--serve") {
        let addr = args
            .get(2)
            .cloned()
            .unwrap_or_else(|| "127.0.0.1:8080".into());
        println!("listening on {addr}; try: curl -X POST http://{addr}/sessions");
        tokio::runtime::Runtime::new()
            .unwrap()
            .block_on(http::serve(Arc::new(SessionStore::in_memory()), &addr))
            .unwrap();
        return;
    }

    let store = SessionStore::in_memory();
    let params = SessionParams {
        horizon: 14,
        seed: Some(9),
        ..SessionParams::default()
    };
    let mut state = store.create_session(&params).unwrap();
    let id = state.session_id.clone();
    println!("session {id}");
    loop {
        let price = state.todays_price.as_ref().unwrap();
        let units = if price.index_units >= 10 || state.day == state.horizon {
            state.stored_units
        } else {
            0
        };
        println!(
            "day {:>2}: price {} stored {:>2} -> sell {units}",
            state.day, price.dollars, state.stored_units
        );
        let out = store.submit_decision(&id, Some(state.day), units).unwrap();
        if let Some(report) = out.report {
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            break;
        }
        state = out.state;
    }
    print!("{}", store.trace_csv(&id).unwrap());
}
