//! HTTP facades over plain TCP: a remote-style job endpoint and a workflow
//! control surface.
//!
//! Both speak a deliberately small slice of HTTP/1.1: one request per
//! connection, `Content-Length` framing, plain-text bodies. That is enough
//! for curl and keeps the wire format inspectable in tests.
//!
//! * [`MockRemoteServer`] exposes any [`BackendAdapter`] as
//!   `POST /jobs`, `GET /jobs/{id}/status`, `GET /jobs/{id}/result`.
//! * [`HttpBackendClient`] is the matching adapter implementation, so an
//!   orchestra can run against the remote endpoint unchanged.
//! * [`ServiceFacade`] drives a running [`Orchestra`] via `POST /problems`,
//!   `GET /workflows/{id}` and `GET /results/{id}`.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use super::backend::{BackendAdapter, BackendError, JobId, JobStatus};
use super::workflow::{Orchestra, WorkflowStatus};
use super::{CorrelationId, ProblemRequest, RunParams, Sinks};
use crate::qsim::CountsMap;

/// A parsed request: method, path, decoded body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpRequest {
    pub method: String,
    pub path: String,
    pub body: String,
}

impl HttpRequest {
    pub fn get(path: impl Into<String>) -> Self {
        HttpRequest { method: "GET".to_string(), path: path.into(), body: String::new() }
    }

    pub fn post(path: impl Into<String>, body: impl Into<String>) -> Self {
        HttpRequest { method: "POST".to_string(), path: path.into(), body: body.into() }
    }
}

/// Status code plus plain-text body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

impl HttpResponse {
    pub fn new(status: u16, body: impl Into<String>) -> Self {
        HttpResponse { status, body: body.into() }
    }

    pub fn ok(body: impl Into<String>) -> Self {
        HttpResponse::new(200, body)
    }
}

fn reason(status: u16) -> &'static str {
    match status {
        200 => "OK",
        201 => "Created",
        202 => "Accepted",
        400 => "Bad Request",
        404 => "Not Found",
        405 => "Method Not Allowed",
        409 => "Conflict",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Unknown",
    }
}

fn read_request(stream: &mut TcpStream) -> io::Result<HttpRequest> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut start = String::new();
    if reader.read_line(&mut start)? == 0 {
        return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "empty request"));
    }
    let mut parts = start.split_whitespace();
    let (method, path) = match (parts.next(), parts.next()) {
        (Some(m), Some(p)) => (m.to_string(), p.to_string()),
        _ => return Err(io::Error::new(io::ErrorKind::InvalidData, "malformed request line")),
    };
    let mut content_length = 0usize;
    loop {
        let mut header = String::new();
        if reader.read_line(&mut header)? == 0 {
            break;
        }
        let header = header.trim_end();
        if header.is_empty() {
            break;
        }
        if let Some((name, value)) = header.split_once(':') {
            if name.trim().eq_ignore_ascii_case("content-length") {
                content_length = value
                    .trim()
                    .parse()
                    .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "bad content-length"))?;
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    let body = String::from_utf8(body)
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "body is not utf-8"))?;
    Ok(HttpRequest { method, path, body })
}

fn write_response(stream: &mut TcpStream, response: &HttpResponse) -> io::Result<()> {
    let head = format!(
        "HTTP/1.1 {} {}\r\ncontent-type: text/plain\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
        response.status,
        reason(response.status),
        response.body.len()
    );
    stream.write_all(head.as_bytes())?;
    stream.write_all(response.body.as_bytes())?;
    stream.flush()
}

/// Sends one request and reads the full response.
pub fn http_call(addr: SocketAddr, request: &HttpRequest) -> io::Result<HttpResponse> {
    let mut stream = TcpStream::connect(addr)?;
    stream.set_read_timeout(Some(Duration::from_secs(10)))?;
    let head = format!(
        "{} {} HTTP/1.1\r\nhost: {}\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
        request.method,
        request.path,
        addr,
        request.body.len()
    );
    stream.write_all(head.as_bytes())?;
    stream.write_all(request.body.as_bytes())?;
    stream.flush()?;

    let mut reader = BufReader::new(stream);
    let mut status_line = String::new();
    reader.read_line(&mut status_line)?;
    let status: u16 = status_line
        .split_whitespace()
        .nth(1)
        .and_then(|token| token.parse().ok())
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "malformed status line"))?;
    let mut content_length: Option<usize> = None;
    loop {
        let mut header = String::new();
        if reader.read_line(&mut header)? == 0 {
            break;
        }
        let header = header.trim_end();
        if header.is_empty() {
            break;
        }
        if let Some((name, value)) = header.split_once(':') {
            if name.trim().eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().ok();
            }
        }
    }
    let body = match content_length {
        Some(length) => {
            let mut buf = vec![0u8; length];
            reader.read_exact(&mut buf)?;
            buf
        }
        None => {
            let mut buf = Vec::new();
            reader.read_to_end(&mut buf)?;
            buf
        }
    };
    let body = String::from_utf8(body)
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "body is not utf-8"))?;
    Ok(HttpResponse { status, body })
}

type Handler = Arc<dyn Fn(&HttpRequest) -> HttpResponse + Send + Sync>;

/// Minimal listener: accepts on a loopback port, handles one request per
/// connection on the accept thread, stops on shutdown or drop.
struct HttpServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl HttpServer {
    fn spawn(name: &str, handler: Handler) -> io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        listener.set_nonblocking(true)?;
        let stop = Arc::new(AtomicBool::new(false));
        let stop_flag = Arc::clone(&stop);
        let handle = thread::Builder::new()
            .name(format!("hdma-http-{name}"))
            .spawn(move || {
                while !stop_flag.load(Ordering::SeqCst) {
                    match listener.accept() {
                        Ok((mut stream, _)) => {
                            let _ = stream.set_nonblocking(false);
                            let _ = stream.set_read_timeout(Some(Duration::from_secs(10)));
                            let response = match read_request(&mut stream) {
                                Ok(request) => handler(&request),
                                Err(_) => HttpResponse::new(400, "malformed request\n"),
                            };
                            let _ = write_response(&mut stream, &response);
                        }
                        Err(ref e) if e.kind() == io::ErrorKind::WouldBlock => {
                            thread::sleep(Duration::from_millis(5));
                        }
                        Err(_) => break,
                    }
                }
            })?;
        Ok(HttpServer { addr, stop, handle: Some(handle) })
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for HttpServer {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn backend_error_response(err: &BackendError) -> HttpResponse {
    let status = match err {
        BackendError::UnknownJob(_) => 404,
        BackendError::NotReady(_) => 409,
        BackendError::BadCircuit(_) => 400,
        BackendError::Unavailable(_) => 503,
        BackendError::ExecutionFailed { .. } | BackendError::Protocol(_) => 500,
    };
    HttpResponse::new(status, format!("{err}\n"))
}

/// Serves a backend adapter over HTTP with the job endpoints.
pub struct MockRemoteServer {
    server: HttpServer,
}

impl MockRemoteServer {
    pub fn start(backend: Arc<dyn BackendAdapter>) -> io::Result<Self> {
        let handler: Handler = Arc::new(move |request| route_jobs(backend.as_ref(), request));
        Ok(MockRemoteServer { server: HttpServer::spawn("jobs", handler)? })
    }

    pub fn addr(&self) -> SocketAddr {
        self.server.addr
    }

    pub fn shutdown(&mut self) {
        self.server.shutdown();
    }
}

fn route_jobs(backend: &dyn BackendAdapter, request: &HttpRequest) -> HttpResponse {
    let segments: Vec<&str> = request.path.split('/').filter(|s| !s.is_empty()).collect();
    match (request.method.as_str(), segments.as_slice()) {
        ("POST", ["jobs"]) => match backend.submit_job(&request.body) {
            Ok(job_id) => HttpResponse::new(201, format!("job_id={job_id}\n")),
            Err(err) => backend_error_response(&err),
        },
        ("GET", ["jobs", id, "status"]) => {
            match backend.job_status(&JobId(id.to_string())) {
                Ok(status) => HttpResponse::ok(format!("status={}\n", status.name())),
                Err(err) => backend_error_response(&err),
            }
        }
        ("GET", ["jobs", id, "result"]) => match backend.job_result(&JobId(id.to_string())) {
            Ok(counts) => HttpResponse::ok(counts.to_lines()),
            Err(err) => backend_error_response(&err),
        },
        ("GET" | "POST", ["jobs", ..]) => HttpResponse::new(404, "no such job endpoint\n"),
        (_, ["jobs", ..]) => HttpResponse::new(405, "method not allowed\n"),
        _ => HttpResponse::new(404, "not found\n"),
    }
}

/// Backend adapter that talks to a [`MockRemoteServer`] (or anything
/// speaking the same endpoints) over TCP.
pub struct HttpBackendClient {
    addr: SocketAddr,
}

impl HttpBackendClient {
    pub fn new(addr: SocketAddr) -> Self {
        HttpBackendClient { addr }
    }

    fn call(&self, request: &HttpRequest) -> Result<HttpResponse, BackendError> {
        http_call(self.addr, request)
            .map_err(|e| BackendError::Unavailable(format!("{}: {e}", self.addr)))
    }
}

impl BackendAdapter for HttpBackendClient {
    fn submit_job(&self, circuit_text: &str) -> Result<JobId, BackendError> {
        let response = self.call(&HttpRequest::post("/jobs", circuit_text))?;
        match response.status {
            201 => {
                let line = response.body.lines().next().unwrap_or("");
                match line.strip_prefix("job_id=") {
                    Some(id) if !id.is_empty() => Ok(JobId(id.to_string())),
                    _ => Err(BackendError::Protocol(format!("bad submit response '{line}'"))),
                }
            }
            400 => Err(BackendError::BadCircuit(response.body.trim().to_string())),
            status => Err(BackendError::Protocol(format!("submit returned {status}"))),
        }
    }

    fn job_status(&self, job_id: &JobId) -> Result<JobStatus, BackendError> {
        let response = self.call(&HttpRequest::get(format!("/jobs/{job_id}/status")))?;
        match response.status {
            200 => {
                let line = response.body.lines().next().unwrap_or("");
                line.strip_prefix("status=")
                    .and_then(JobStatus::from_name)
                    .ok_or_else(|| BackendError::Protocol(format!("bad status response '{line}'")))
            }
            404 => Err(BackendError::UnknownJob(job_id.clone())),
            status => Err(BackendError::Protocol(format!("status returned {status}"))),
        }
    }

    fn job_result(&self, job_id: &JobId) -> Result<CountsMap, BackendError> {
        let response = self.call(&HttpRequest::get(format!("/jobs/{job_id}/result")))?;
        match response.status {
            200 => CountsMap::parse_lines(&response.body)
                .ok_or_else(|| BackendError::Protocol("unparseable counts body".to_string())),
            404 => Err(BackendError::UnknownJob(job_id.clone())),
            409 => Err(BackendError::NotReady(job_id.clone())),
            status => Err(BackendError::Protocol(format!("result returned {status}"))),
        }
    }
}

/// HTTP control surface for a running orchestra.
///
/// * `POST /problems` with a `key=value` body (`data` required; `kind`,
///   `profile`, `shots`, `seed`, `sinks` optional) starts a workflow and
///   answers `202` with `correlation_id=N`.
/// * `GET /workflows/{id}` reports the state and the message trace so far.
/// * `GET /results/{id}` answers `202` while running, `200` with one
///   `point_id=label` line per assignment when done, `500` on failure.
pub struct ServiceFacade {
    server: HttpServer,
}

impl ServiceFacade {
    pub fn start(orchestra: Arc<Orchestra>) -> io::Result<Self> {
        let handler: Handler = Arc::new(move |request| route_facade(&orchestra, request));
        Ok(ServiceFacade { server: HttpServer::spawn("facade", handler)? })
    }

    pub fn addr(&self) -> SocketAddr {
        self.server.addr
    }

    pub fn shutdown(&mut self) {
        self.server.shutdown();
    }
}

fn parse_problem_body(body: &str) -> Result<(ProblemRequest, RunParams), String> {
    let mut data = None;
    let mut kind = "cluster-assignment".to_string();
    let mut profile = None;
    let mut params = RunParams::default();
    for line in body.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) =
            line.split_once('=').ok_or_else(|| format!("expected key=value, got '{line}'"))?;
        match key {
            "data" => data = Some(value.to_string()),
            "kind" => kind = value.to_string(),
            "profile" => profile = Some(value.to_string()),
            "shots" => {
                let shots: u64 =
                    value.parse().map_err(|_| format!("bad shots value '{value}'"))?;
                if shots == 0 {
                    return Err("shots must be at least 1".to_string());
                }
                params.shots = Some(shots);
            }
            "seed" => {
                params.seed = value.parse().map_err(|_| format!("bad seed value '{value}'"))?;
            }
            "sinks" => params.sinks = value.parse::<Sinks>()?,
            other => return Err(format!("unknown key '{other}'")),
        }
    }
    let data = data.ok_or_else(|| "missing required key 'data'".to_string())?;
    let mut problem = ProblemRequest::cluster_assignment(data);
    problem.kind = kind;
    if let Some(profile) = profile {
        problem = problem.with_profile(profile);
    }
    Ok((problem, params))
}

fn route_facade(orchestra: &Orchestra, request: &HttpRequest) -> HttpResponse {
    let segments: Vec<&str> = request.path.split('/').filter(|s| !s.is_empty()).collect();
    match (request.method.as_str(), segments.as_slice()) {
        ("POST", ["problems"]) => match parse_problem_body(&request.body) {
            Ok((problem, params)) => {
                let correlation_id = orchestra.start_workflow(problem, params);
                HttpResponse::new(202, format!("correlation_id={correlation_id}\n"))
            }
            Err(reason) => HttpResponse::new(400, format!("{reason}\n")),
        },
        ("GET", ["workflows", id]) => with_workflow(orchestra, id, |status| {
            let mut body = String::new();
            match status {
                WorkflowStatus::Running => body.push_str("state=running\n"),
                WorkflowStatus::Done(outcome) => {
                    body.push_str("state=done\n");
                    body.push_str(&format!("route={}\n", outcome.route));
                }
                WorkflowStatus::Failed { stage, reason } => {
                    body.push_str("state=failed\n");
                    body.push_str(&format!("stage={stage}\nreason={reason}\n"));
                }
            }
            // The parse in with_workflow succeeded, so id is numeric here.
            let correlation_id = CorrelationId(id.parse().expect("checked by with_workflow"));
            let kinds = orchestra.trace().kinds_for(correlation_id);
            let labels: Vec<&str> = kinds.iter().map(|k| k.label()).collect();
            body.push_str(&format!("trace={}\n", labels.join(",")));
            HttpResponse::ok(body)
        }),
        ("GET", ["results", id]) => with_workflow(orchestra, id, |status| match status {
            WorkflowStatus::Running => HttpResponse::new(202, "still running\n"),
            WorkflowStatus::Failed { stage, reason } => {
                HttpResponse::new(500, format!("failed in {stage}: {reason}\n"))
            }
            WorkflowStatus::Done(outcome) => {
                let mut body = String::new();
                for assignment in &outcome.assignments {
                    body.push_str(&format!(
                        "{}={}\n",
                        assignment.point_id, assignment.cluster_label
                    ));
                }
                HttpResponse::ok(body)
            }
        }),
        ("POST", ["workflows", ..]) | ("POST", ["results", ..]) => {
            HttpResponse::new(405, "method not allowed\n")
        }
        ("GET", ["problems"]) => HttpResponse::new(405, "method not allowed\n"),
        _ => HttpResponse::new(404, "not found\n"),
    }
}

fn with_workflow(
    orchestra: &Orchestra,
    id: &str,
    f: impl FnOnce(WorkflowStatus) -> HttpResponse,
) -> HttpResponse {
    let id: u64 = match id.parse() {
        Ok(id) => id,
        Err(_) => return HttpResponse::new(400, "correlation id must be a number\n"),
    };
    match orchestra.status(CorrelationId(id)) {
        Some(status) => f(status),
        None => HttpResponse::new(404, "no such workflow\n"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestra::backend::{LocalSimBackend, MockRemoteBackend};
    use crate::orchestra::OrchestraConfig;

    fn golden_circuit_text() -> String {
        let table = crate::datastore::Table::parse_csv(sample_csv()).expect("sample parses");
        let profile = crate::encode::Profile::default().with_resolved_id_width(3);
        let (centroids, points) = table.extract(&profile).expect("sample extracts");
        let pair = crate::distance::PairSpec {
            point: points[0].clone(),
            centroid: centroids[0].clone(),
        };
        let mut circuit =
            crate::distance::build_pair_circuit(&pair, &profile).expect("pair compiles");
        circuit.set_meta("shots", "500").expect("set shots");
        circuit.set_meta("seed", "11").expect("set seed");
        circuit.serialize()
    }

    fn sample_csv() -> &'static str {
        "ID,Feature1,Feature2,Cluster,Role\n\
         0,-0.5,0.5,blue,centroid\n\
         1,0.2,-0.2,green,centroid\n\
         2,0.15,-0.15,,point\n\
         3,-0.45,0.45,,point\n"
    }

    #[test]
    fn remote_job_endpoint_round_trips_counts() {
        let server = MockRemoteServer::start(Arc::new(MockRemoteBackend::new(2)))
            .expect("server starts");
        let client = HttpBackendClient::new(server.addr());
        let text = golden_circuit_text();

        let job_id = client.submit_job(&text).expect("submit over http");
        // First poll: still queued, result not ready yet.
        assert_eq!(client.job_status(&job_id).expect("status"), JobStatus::Queued);
        assert!(matches!(client.job_result(&job_id), Err(BackendError::NotReady(_))));
        // Second poll crosses the latency threshold.
        assert_eq!(client.job_status(&job_id).expect("status"), JobStatus::Done);
        let over_http = client.job_result(&job_id).expect("result over http");

        let local = LocalSimBackend::new();
        let direct_id = local.submit_job(&text).expect("direct submit");
        let direct = local.job_result(&direct_id).expect("direct result");
        assert_eq!(over_http, direct);
    }

    #[test]
    fn remote_job_endpoint_maps_errors_to_statuses() {
        let server =
            MockRemoteServer::start(Arc::new(LocalSimBackend::new())).expect("server starts");
        let client = HttpBackendClient::new(server.addr());

        assert!(matches!(
            client.submit_job("not a circuit document"),
            Err(BackendError::BadCircuit(_))
        ));
        let ghost = JobId("sim-999".to_string());
        assert!(matches!(client.job_status(&ghost), Err(BackendError::UnknownJob(_))));
        assert!(matches!(client.job_result(&ghost), Err(BackendError::UnknownJob(_))));

        let response = http_call(server.addr(), &HttpRequest::get("/nowhere")).expect("call");
        assert_eq!(response.status, 404);
        let response =
            http_call(server.addr(), &HttpRequest::post("/jobs/1/status", "")).expect("call");
        assert_eq!(response.status, 404);
    }

    #[test]
    fn facade_runs_a_workflow_end_to_end() {
        let dir = tempfile::tempdir().expect("tempdir");
        let data_path = dir.path().join("table.csv");
        std::fs::File::create(&data_path)
            .and_then(|mut f| f.write_all(sample_csv().as_bytes()))
            .expect("write sample table");

        let orchestra = Orchestra::start(OrchestraConfig::local());
        let facade = ServiceFacade::start(Arc::clone(&orchestra)).expect("facade starts");

        let body = format!("data={}\nseed=7\nshots=300\nsinks=both\n", data_path.display());
        let response =
            http_call(facade.addr(), &HttpRequest::post("/problems", body)).expect("post");
        assert_eq!(response.status, 202, "body: {}", response.body);
        let id = response
            .body
            .trim()
            .strip_prefix("correlation_id=")
            .expect("correlation id in response")
            .to_string();

        let deadline = std::time::Instant::now() + Duration::from_secs(20);
        let assignments = loop {
            let response = http_call(facade.addr(), &HttpRequest::get(format!("/results/{id}")))
                .expect("poll results");
            match response.status {
                200 => break response.body,
                202 => {
                    assert!(std::time::Instant::now() < deadline, "workflow never finished");
                    thread::sleep(Duration::from_millis(20));
                }
                other => panic!("unexpected status {other}: {}", response.body),
            }
        };
        assert!(assignments.contains("2=green\n"));
        assert!(assignments.contains("3=blue\n"));

        let response = http_call(facade.addr(), &HttpRequest::get(format!("/workflows/{id}")))
            .expect("workflow state");
        assert_eq!(response.status, 200);
        assert!(response.body.contains("state=done"));
        assert!(response.body.contains("route=quantum"));

        // The datastore sink rewrote the table on disk.
        let persisted = std::fs::read_to_string(&data_path).expect("read back");
        assert!(persisted.contains("2,0.15,-0.15,green,point"));
        assert!(persisted.contains("3,-0.45,0.45,blue,point"));
        orchestra.shutdown();
    }

    #[test]
    fn facade_rejects_bad_requests() {
        let orchestra = Orchestra::start(OrchestraConfig::local());
        let facade = ServiceFacade::start(Arc::clone(&orchestra)).expect("facade starts");

        let cases = [
            (HttpRequest::post("/problems", "seed=1\n"), 400),
            (HttpRequest::post("/problems", "data=x.csv\nshots=0\n"), 400),
            (HttpRequest::post("/problems", "data=x.csv\nbogus=1\n"), 400),
            (HttpRequest::get("/problems"), 405),
            (HttpRequest::get("/workflows/77"), 404),
            (HttpRequest::get("/results/not-a-number"), 400),
            (HttpRequest::get("/elsewhere"), 404),
        ];
        for (request, expected) in cases {
            let response = http_call(facade.addr(), &request).expect("call");
            assert_eq!(response.status, expected, "{} {}", request.method, request.path);
        }
        orchestra.shutdown();
    }
}
