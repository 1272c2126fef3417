use std::sync::Arc;

use super::{SnapshotStore, PARAMS_FILE};
use crate::crypto::DayIndex;
use crate::tables::{snapshot_file_name, CheckTableSnapshot, SnapshotFile, SnapshotKind};

/// The complete endpoint set.
pub const ENDPOINTS: [&str; 3] =
    ["/v1/params", "/v1/days/{day}/check/segments/{j}", "/v1/days/{day}/revocation"];

/// Machine-readable reason on error responses.
pub const REASON_HEADER: &str = "X-Revoca-Reason";
/// Day a snapshot response belongs to.
pub const DAY_HEADER: &str = "X-Revoca-Day";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Params,
    CheckSegment { day: DayIndex, segment: u64 },
    Revocation { day: DayIndex },
}

impl Route {
    /// Parses a request path. Decimal fields must be canonical: no sign, no
    /// leading zeros. Query strings are not accepted.
    pub fn parse(path: &str) -> Option<Route> {
        let parts: Vec<&str> = path.strip_prefix('/')?.split('/').collect();
        match parts.as_slice() {
            ["v1", "params"] => Some(Route::Params),
            ["v1", "days", day, "check", "segments", j] => {
                Some(Route::CheckSegment { day: DayIndex(decimal(day)?), segment: decimal(j)? })
            }
            ["v1", "days", day, "revocation"] => Some(Route::Revocation { day: DayIndex(decimal(day)?) }),
            _ => None,
        }
    }

    pub fn path(&self) -> String {
        match self {
            Route::Params => "/v1/params".into(),
            Route::CheckSegment { day, segment } => format!("/v1/days/{day}/check/segments/{segment}"),
            Route::Revocation { day } => format!("/v1/days/{day}/revocation"),
        }
    }

    pub fn day(&self) -> Option<DayIndex> {
        match self {
            Route::Params => None,
            Route::CheckSegment { day, .. } | Route::Revocation { day } => Some(*day),
        }
    }
}

fn decimal(text: &str) -> Option<u64> {
    let canonical = !text.is_empty()
        && text.bytes().all(|b| b.is_ascii_digit())
        && (text == "0" || !text.starts_with('0'));
    canonical.then(|| text.parse().ok()).flatten()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: Arc<[u8]>,
}

impl Response {
    fn ok(body: Arc<[u8]>, day: Option<DayIndex>) -> Self {
        let mut headers = vec![("Content-Type".to_string(), "application/json".to_string())];
        if let Some(day) = day {
            headers.push((DAY_HEADER.to_string(), day.to_string()));
        }
        Response { status: 200, headers, body }
    }

    fn error(status: u16, reason: &str) -> Self {
        Response {
            status,
            headers: vec![(REASON_HEADER.to_string(), reason.to_string())],
            body: Arc::from(&[][..]),
        }
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }

    pub fn reason(&self) -> Option<&str> {
        self.header(REASON_HEADER)
    }
}

/// Maps requests onto published files. Stateless apart from the store.
pub struct Router<S: ?Sized> {
    store: Arc<S>,
}

impl<S: ?Sized> Clone for Router<S> {
    fn clone(&self) -> Self {
        Router { store: Arc::clone(&self.store) }
    }
}

impl<S: SnapshotStore + ?Sized> Router<S> {
    pub fn new(store: Arc<S>) -> Self {
        Router { store }
    }

    pub fn store(&self) -> &Arc<S> {
        &self.store
    }

    pub fn handle(&self, method: &str, path: &str) -> Response {
        if method != "GET" {
            return Response::error(405, "method-not-allowed");
        }
        let Some(route) = Route::parse(path) else {
            return Response::error(404, "unknown-resource");
        };
        match self.resolve(route) {
            Ok(response) => response,
            Err(reason) => Response::error(if reason == "store-failure" { 500 } else { 404 }, reason),
        }
    }

    fn resolve(&self, route: Route) -> Result<Response, &'static str> {
        let read = |name: &str| match self.store.read(name) {
            Ok(Some(bytes)) => Ok(bytes),
            Ok(None) => Err("not-archived"),
            Err(_) => Err("store-failure"),
        };
        match route {
            Route::Params => read(PARAMS_FILE).map(|b| Response::ok(b, None)).map_err(|_| "no-params"),
            Route::Revocation { day } => {
                let bytes = read(&snapshot_file_name(SnapshotKind::Revocation, day))?;
                Ok(Response::ok(bytes, Some(day)))
            }
            Route::CheckSegment { day, segment } => {
                let bytes = read(&snapshot_file_name(SnapshotKind::Check, day))?;
                let table = CheckTableSnapshot::from_file_bytes(&bytes).map_err(|_| "store-failure")?;
                let segment = table.segment(segment).map_err(|_| "segment-out-of-range")?;
                Ok(Response::ok(Arc::from(segment.to_file_bytes()), Some(day)))
            }
        }
    }
}
