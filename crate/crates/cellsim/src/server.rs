//! TCP front end. A single executor thread owns the simulator, so requests
//! from concurrent connections are applied one at a time in arrival order.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use serde_json::{json, Value};

use crate::protocol::{decode_frame, CellError, Frame, Request, Response, PROTOCOL_VERSION};
use crate::sim::CellSim;

enum Job {
    Apply {
        op: String,
        args: Value,
        reply: Sender<Result<Value, CellError>>,
    },
    Stop,
}

pub struct ServerHandle {
    addr: SocketAddr,
    stopping: Arc<AtomicBool>,
    jobs: Sender<Job>,
    acceptor: Option<JoinHandle<()>>,
    executor: Option<JoinHandle<CellSim>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stop accepting connections and stop the executor. Connections still
    /// open receive `shutting_down` for further requests.
    pub fn shutdown(&self) {
        if self.stopping.swap(true, Ordering::SeqCst) {
            return;
        }
        let _ = self.jobs.send(Job::Stop);
        // Wake the blocking accept.
        let _ = TcpStream::connect(self.addr);
    }

    /// Block until the server stops; returns the simulator in its final state.
    pub fn wait(mut self) -> CellSim {
        if let Some(a) = self.acceptor.take() {
            let _ = a.join();
        }
        self.executor
            .take()
            .expect("executor joined once")
            .join()
            .expect("executor thread panicked")
    }

    pub fn stop(self) -> CellSim {
        self.shutdown();
        self.wait()
    }
}

/// Bind `addr` and serve `sim` on background threads.
pub fn serve<A: ToSocketAddrs>(sim: CellSim, addr: A) -> io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr)?;
    let addr = listener.local_addr()?;
    let cell_name: Arc<str> = sim.config().name.as_str().into();
    let (jobs, rx) = mpsc::channel();
    let executor = thread::Builder::new()
        .name("cell-executor".into())
        .spawn(move || execute(sim, rx))?;
    let stopping = Arc::new(AtomicBool::new(false));
    let acceptor = {
        let stopping = stopping.clone();
        let jobs = jobs.clone();
        thread::Builder::new()
            .name(format!("cell-accept-{}", addr.port()))
            .spawn(move || accept_loop(listener, jobs, stopping, cell_name))?
    };
    log::info!("cell listening on {addr}");
    Ok(ServerHandle {
        addr,
        stopping,
        jobs,
        acceptor: Some(acceptor),
        executor: Some(executor),
    })
}

fn execute(mut sim: CellSim, rx: Receiver<Job>) -> CellSim {
    while let Ok(job) = rx.recv() {
        match job {
            Job::Apply { op, args, reply } => {
                let out = sim.apply(&op, &args);
                let _ = reply.send(out);
            }
            Job::Stop => break,
        }
    }
    sim
}

fn accept_loop(
    listener: TcpListener,
    jobs: Sender<Job>,
    stopping: Arc<AtomicBool>,
    cell_name: Arc<str>,
) {
    for stream in listener.incoming() {
        if stopping.load(Ordering::SeqCst) {
            break;
        }
        match stream {
            Ok(stream) => {
                let jobs = jobs.clone();
                let cell_name = cell_name.clone();
                let _ = thread::Builder::new()
                    .name("cell-conn".into())
                    .spawn(move || {
                        let peer = stream.peer_addr().ok();
                        if let Err(e) = handle_connection(stream, jobs, &cell_name) {
                            log::debug!("connection {peer:?} ended: {e}");
                        }
                    });
            }
            Err(e) => log::warn!("accept failed: {e}"),
        }
    }
}

fn handle_connection(stream: TcpStream, jobs: Sender<Job>, cell_name: &str) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut greeted = false;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        if line.trim().is_empty() {
            continue;
        }
        let req = match decode_frame(&line) {
            Frame::Request(r) => r,
            Frame::Invalid { id, error } => {
                writer.write_all(Response::error(id, error).to_line().as_bytes())?;
                continue;
            }
            Frame::Unusable(why) => {
                log::debug!("closing connection: {why}");
                return Ok(());
            }
        };
        let (response, close) = respond(&req, &mut greeted, &jobs, cell_name);
        writer.write_all(response.to_line().as_bytes())?;
        writer.flush()?;
        if close {
            return Ok(());
        }
    }
}

fn respond(
    req: &Request,
    greeted: &mut bool,
    jobs: &Sender<Job>,
    cell_name: &str,
) -> (Response, bool) {
    let id = req.id;
    match req.op.as_str() {
        "HELLO" => {
            let version = req.args.get("version").and_then(Value::as_str);
            if version == Some(PROTOCOL_VERSION) {
                *greeted = true;
                (Response::ok(id, json!({ "cell": cell_name, "version": PROTOCOL_VERSION })), false)
            } else {
                let err = CellError::new(
                    "version_mismatch",
                    format!("expected {PROTOCOL_VERSION:?}, got {:?}", req.args.get("version")),
                );
                (Response::error(id, err), false)
            }
        }
        _ if !*greeted => (
            Response::error(id, CellError::new("hello_required", req.op.clone())),
            false,
        ),
        "BYE" => (Response::ok(id, json!({})), true),
        _ => {
            let (tx, rx) = mpsc::channel();
            let job = Job::Apply {
                op: req.op.clone(),
                args: req.args.clone(),
                reply: tx,
            };
            let out = match jobs.send(job) {
                Ok(()) => rx.recv().unwrap_or_else(|_| Err(shutting_down())),
                Err(_) => Err(shutting_down()),
            };
            (Response { id, outcome: out }, false)
        }
    }
}

fn shutting_down() -> CellError {
    CellError::new("shutting_down", "cell is stopping")
}
