use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::thread::JoinHandle;

use super::{DirStore, Router, ServiceError, SnapshotStore};

const WORKERS: usize = 4;

/// Read-only HTTP server over a snapshot store.
pub struct Server {
    addr: SocketAddr,
    http: Arc<tiny_http::Server>,
    workers: Vec<JoinHandle<()>>,
}

impl Server {
    /// Serves the files in `state_dir`.
    pub fn serve(state_dir: &Path, bind: &str) -> Result<Server, ServiceError> {
        if !state_dir.is_dir() {
            return Err(ServiceError::MissingStateDir(state_dir.display().to_string()));
        }
        Server::start(Arc::new(DirStore::new(state_dir)), bind)
    }

    pub fn start<S: SnapshotStore + 'static>(store: Arc<S>, bind: &str) -> Result<Server, ServiceError> {
        let bind_error = |reason: String| ServiceError::Bind { address: bind.to_string(), reason };
        let http = Arc::new(tiny_http::Server::http(bind).map_err(|e| bind_error(e.to_string()))?);
        let addr = http
            .server_addr()
            .to_ip()
            .ok_or_else(|| bind_error("not an IP listener".into()))?;
        let router = Router::new(store);
        let workers = (0..WORKERS)
            .map(|_| {
                let http = Arc::clone(&http);
                let router = router.clone();
                std::thread::spawn(move || {
                    while let Ok(request) = http.recv() {
                        answer(&router, request);
                    }
                })
            })
            .collect();
        Ok(Server { addr, http, workers })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the server stops.
    pub fn wait(mut self) {
        for worker in self.workers.drain(..) {
            let _ = worker.join();
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        for _ in 0..self.workers.len() {
            self.http.unblock();
        }
        for worker in self.workers.drain(..) {
            let _ = worker.join();
        }
    }
}

fn answer<S: SnapshotStore + ?Sized>(router: &Router<S>, request: tiny_http::Request) {
    let method = request.method().as_str().to_string();
    let response = router.handle(&method, request.url());
    let mut reply = tiny_http::Response::from_data(response.body.to_vec()).with_status_code(response.status);
    for (name, value) in &response.headers {
        if let Ok(header) = tiny_http::Header::from_bytes(name.as_bytes(), value.as_bytes()) {
            reply.add_header(header);
        }
    }
    let _ = request.respond(reply);
}
