//! The HTTP facade: submit a problem with one POST, poll the workflow, and
//! read the assignments back, all over plain HTTP/1.1 on a loopback socket.
//!
//!     cargo run --example service_facade

use std::time::Duration;

use hdma::orchestra::{http_call, HttpRequest, Orchestra, OrchestraConfig, ServiceFacade};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let data = dir.path().join("table1.csv");
    std::fs::copy(concat!(env!("CARGO_MANIFEST_DIR"), "/data/table1.csv"), &data)?;

    let orchestra = Orchestra::start(OrchestraConfig::local());
    let facade = ServiceFacade::start(orchestra)?;
    let addr = facade.addr();
    println!("facade listening on http://{addr}");

    let body = format!("data={}\nseed=7\nshots=1000\nsinks=both\n", data.display());
    let response = http_call(addr, &HttpRequest::post("/problems", body))?;
    println!("POST /problems -> {} {}", response.status, response.body.trim());
    let correlation_id = response
        .body
        .trim()
        .strip_prefix("correlation_id=")
        .ok_or("missing correlation id")?
        .to_string();

    // Poll until the workflow finishes; 202 means still running.
    let results = loop {
        let response = http_call(addr, &HttpRequest::get(format!("/results/{correlation_id}")))?;
        match response.status {
            200 => break response.body,
            202 => std::thread::sleep(Duration::from_millis(10)),
            status => return Err(format!("results endpoint said {status}").into()),
        }
    };
    println!("GET /results/{correlation_id} ->\n{results}");

    let workflow = http_call(addr, &HttpRequest::get(format!("/workflows/{correlation_id}")))?;
    println!("GET /workflows/{correlation_id} ->\n{}", workflow.body);

    println!("table after write-back:\n{}", std::fs::read_to_string(&data)?);
    Ok(())
}
