//! HTTP service for the balloon shooter.
//!
//! Sessions live in a [`Store`] backed by one JSONL event log per session.
//! Clients drive them with the JSON protocol in [`protocol`]; the server
//! clock alone decides when balloons and stages time out. [`HttpDriver`]
//! is a blocking client that lets the simulated players play over the wire.

mod api;
pub mod audit;
mod client;
mod clock;
mod error;
pub mod protocol;
mod store;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

pub use api::{router, MAX_WAIT_MS};
pub use client::{sleeping_waiter, ApiClient, HttpDriver, Waiter};
pub use clock::{Clock, ManualClock, SystemClock};
pub use error::ApiError;
pub use store::Store;

/// Environment variable naming the data directory.
pub const DATA_DIR_ENV: &str = "PHISHSHOOT_DATA_DIR";
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_TICK: Duration = Duration::from_millis(250);

/// Serves until `shutdown` resolves. With `tick` set, a background task
/// fires due timers so idle sessions time out without being polled.
pub async fn serve(
    listener: tokio::net::TcpListener,
    store: Arc<Store>,
    tick: Option<Duration>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    if let Some(every) = tick {
        let s = store.clone();
        tokio::spawn(async move {
            let mut interval = tokio::time::interval(every);
            loop {
                interval.tick().await;
                let s = s.clone();
                match tokio::task::spawn_blocking(move || s.tick_all()).await {
                    Ok(Err(e)) => eprintln!("{{\"level\":\"error\",\"message\":\"ticker: {e}\"}}"),
                    Err(e) => eprintln!("{{\"level\":\"error\",\"message\":\"ticker: {e}\"}}"),
                    Ok(Ok(_)) => {}
                }
            }
        });
    }
    axum::serve(listener, router(store))
        .with_graceful_shutdown(shutdown)
        .await
}

/// A server running on its own thread and runtime.
pub struct RunningServer {
    addr: SocketAddr,
    store: Arc<Store>,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<JoinHandle<std::io::Result<()>>>,
}

impl RunningServer {
    /// Binds `bind` (port 0 picks a free one) and starts serving.
    pub fn spawn(store: Arc<Store>, bind: &str, tick: Option<Duration>) -> std::io::Result<Self> {
        let listener = std::net::TcpListener::bind(bind)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let s = store.clone();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener)?;
                serve(listener, s, tick, async {
                    let _ = rx.await;
                })
                .await
            })
        });
        Ok(Self {
            addr,
            store,
            stop: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    /// Stops accepting requests and waits for the server thread.
    pub fn stop(mut self) -> std::io::Result<()> {
        self.shutdown()
    }

    fn shutdown(&mut self) -> std::io::Result<()> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        match self.thread.take().map(JoinHandle::join) {
            Some(Ok(r)) => r,
            Some(Err(_)) => Err(std::io::Error::other("server thread panicked")),
            None => Ok(()),
        }
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}
