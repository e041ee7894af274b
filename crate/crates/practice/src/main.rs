use std::path::PathBuf;
use std::sync::Arc;

use sqlmend::table::load_problem_dir;
use sqlmend_practice::clock::SystemClock;
use sqlmend_practice::pool::Pool;
use sqlmend_practice::{router, Config, Service};

fn env_or(name: &str, default: &str) -> String {
    std::env::var(name).unwrap_or_else(|_| default.to_string())
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let port: u16 = env_or("SQLMEND_PORT", "8080").parse()?;
    let data_dir = PathBuf::from(env_or("SQLMEND_DATA_DIR", "data"));
    let problems = load_problem_dir(env_or("SQLMEND_PROBLEMS", "crates/core/fixtures/problems"))?;
    let pool = Pool::load(env_or("SQLMEND_POOL", "crates/practice/fixtures/pool.json").as_ref())?;
    let seed = match std::env::var("SQLMEND_SEED") {
        Ok(s) => s.parse()?,
        Err(_) => rand::random(),
    };
    std::fs::create_dir_all(&data_dir)?;

    let service = Service::new(Config {
        problems,
        pool,
        clock: Arc::new(SystemClock),
        seed,
        log_path: Some(data_dir.join("events.jsonl")),
    })?;
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(service)).await?;
    Ok(())
}
