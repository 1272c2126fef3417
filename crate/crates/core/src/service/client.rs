use std::io::Read;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{PublicParamsDocument, Response, Route, Router, SnapshotStore, REASON_HEADER};
use crate::actors::{Fetched, SourceError, TableSource};
use crate::crypto::DayIndex;
use crate::tables::{CheckSegment, RevocationTableSnapshot, SnapshotFile};

/// Issues one GET and returns status, reason and body.
pub trait Transport {
    fn get(&mut self, path: &str) -> Result<Response, SourceError>;
}

/// Calls the router directly, no sockets involved.
pub struct InProcess<S: ?Sized> {
    router: Router<S>,
}

impl<S: SnapshotStore + ?Sized> InProcess<S> {
    pub fn new(store: Arc<S>) -> Self {
        InProcess { router: Router::new(store) }
    }
}

impl<S: SnapshotStore + ?Sized> Transport for InProcess<S> {
    fn get(&mut self, path: &str) -> Result<Response, SourceError> {
        Ok(self.router.handle("GET", path))
    }
}

/// HTTP/1.1 over `ureq`.
pub struct HttpTransport {
    base: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(base: &str) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(30)).build();
        HttpTransport { base: base.trim_end_matches('/').to_string(), agent }
    }
}

impl Transport for HttpTransport {
    fn get(&mut self, path: &str) -> Result<Response, SourceError> {
        let response = match self.agent.get(&format!("{}{path}", self.base)).call() {
            Ok(r) => r,
            Err(ureq::Error::Status(_, r)) => r,
            Err(e) => return Err(SourceError::Transport(e.to_string())),
        };
        let status = response.status();
        let headers = response
            .headers_names()
            .into_iter()
            .filter_map(|name| response.header(&name).map(|v| (name.clone(), v.to_string())))
            .collect();
        let mut body = Vec::new();
        response
            .into_reader()
            .read_to_end(&mut body)
            .map_err(|e| SourceError::Transport(e.to_string()))?;
        Ok(Response { status, headers, body: Arc::from(body) })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchRecord {
    pub path: String,
    pub bytes: u64,
    pub day: Option<DayIndex>,
}

/// Every request a client made, in order, with exact body sizes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchLog {
    pub records: Vec<FetchRecord>,
}

impl FetchLog {
    pub fn total_bytes(&self) -> u64 {
        self.records.iter().map(|r| r.bytes).sum()
    }

    pub fn paths(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.path.as_str()).collect()
    }
}

pub struct Client<T> {
    transport: T,
    log: FetchLog,
}

impl<T: Transport> Client<T> {
    pub fn new(transport: T) -> Self {
        Client { transport, log: FetchLog::default() }
    }

    pub fn log(&self) -> &FetchLog {
        &self.log
    }

    pub fn take_log(&mut self) -> FetchLog {
        std::mem::take(&mut self.log)
    }

    fn fetch(&mut self, route: Route) -> Result<(Arc<[u8]>, u64), SourceError> {
        let path = route.path();
        let response = self.transport.get(&path)?;
        let bytes = response.body.len() as u64;
        self.log.records.push(FetchRecord { path: path.clone(), bytes, day: route.day() });
        match response.status {
            200 => Ok((response.body, bytes)),
            404 => Err(SourceError::NotFound {
                resource: path,
                reason: response.header(REASON_HEADER).unwrap_or("unknown").to_string(),
            }),
            status => Err(SourceError::Transport(format!(
                "{path}: status {status} ({})",
                response.header(REASON_HEADER).unwrap_or("no reason")
            ))),
        }
    }

    pub fn fetch_params(&mut self) -> Result<Fetched<PublicParamsDocument>, SourceError> {
        let (body, bytes) = self.fetch(Route::Params)?;
        let value = PublicParamsDocument::from_bytes(&body).map_err(|e| SourceError::Corrupt(e.to_string()))?;
        Ok(Fetched { value, bytes })
    }

    pub fn fetch_segment(&mut self, day: DayIndex, segment: u64) -> Result<Fetched<CheckSegment>, SourceError> {
        let (body, bytes) = self.fetch(Route::CheckSegment { day, segment })?;
        let value = CheckSegment::from_file_bytes(&body).map_err(|e| SourceError::Corrupt(e.to_string()))?;
        Ok(Fetched { value, bytes })
    }

    pub fn fetch_revocation_table(&mut self, day: DayIndex) -> Result<Fetched<RevocationTableSnapshot>, SourceError> {
        let (body, bytes) = self.fetch(Route::Revocation { day })?;
        let value =
            RevocationTableSnapshot::from_file_bytes(&body).map_err(|e| SourceError::Corrupt(e.to_string()))?;
        Ok(Fetched { value, bytes })
    }
}

impl<T: Transport> TableSource for Client<T> {
    fn check_segment(&mut self, day: DayIndex, segment: u64) -> Result<Fetched<CheckSegment>, SourceError> {
        self.fetch_segment(day, segment)
    }

    fn revocation_table(&mut self, day: DayIndex) -> Result<Fetched<RevocationTableSnapshot>, SourceError> {
        self.fetch_revocation_table(day)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::service::{publish_day, MemoryStore, PARAMS_FILE};
    use crate::tables::{build_check_table, TableParams};

    #[test]
    fn log_records_exact_sizes() {
        let store = Arc::new(MemoryStore::new());
        let params = TableParams::new(4, 8, 2, 1).unwrap();
        let check = build_check_table([], params, DayIndex(1));
        let rev = RevocationTableSnapshot::empty(params, DayIndex(1));
        publish_day(&*store, &check, &rev).unwrap();
        let mut client = Client::new(InProcess::new(store.clone()));

        let seg = client.fetch_segment(DayIndex(1), 1).unwrap();
        assert_eq!(seg.value, check.segment(1).unwrap());
        assert_eq!(seg.bytes, check.segment(1).unwrap().to_file_bytes().len() as u64);
        let table = client.fetch_revocation_table(DayIndex(1)).unwrap();
        assert_eq!(table.bytes, rev.to_file_bytes().len() as u64);
        assert!(matches!(
            client.fetch_revocation_table(DayIndex(2)),
            Err(SourceError::NotFound { ref reason, .. }) if reason == "not-archived"
        ));
        assert_eq!(
            client.log().paths(),
            vec!["/v1/days/1/check/segments/1", "/v1/days/1/revocation", "/v1/days/2/revocation"]
        );
        assert_eq!(client.log().records[2].bytes, 0);

        store.put(PARAMS_FILE, b"{\"oops\":1}").unwrap();
        assert!(matches!(client.fetch_params(), Err(SourceError::Corrupt(_))));
        store.put("revocation-1.snap", b"{}").unwrap();
        assert!(matches!(client.fetch_revocation_table(DayIndex(1)), Err(SourceError::Corrupt(_))));
    }
}
