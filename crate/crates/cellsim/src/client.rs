use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};

use serde_json::{json, Value};
use thiserror::Error;

use crate::protocol::{CellError, Request, Response, PROTOCOL_VERSION};
use crate::sim::CellSim;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("connection: {0}")]
    Io(#[from] io::Error),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("cell: {0}")]
    Cell(#[from] CellError),
}

/// Anything that executes primitives: a remote cell or an in-process one.
pub trait CellPort {
    fn call(&mut self, op: &str, args: Value) -> Result<Value, ClientError>;
}

impl CellPort for CellSim {
    fn call(&mut self, op: &str, args: Value) -> Result<Value, ClientError> {
        Ok(self.apply(op, &args)?)
    }
}

/// Synchronous line-protocol client. Every request sent is kept in
/// [`CellClient::sent`] so a session can be replayed.
pub struct CellClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    next_id: u64,
    sent: Vec<Request>,
}

impl CellClient {
    /// Connect and perform the `HELLO` handshake.
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<Self, ClientError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let writer = stream.try_clone()?;
        let mut client = CellClient {
            reader: BufReader::new(stream),
            writer,
            next_id: 1,
            sent: Vec::new(),
        };
        client.request("HELLO", json!({ "version": PROTOCOL_VERSION }))?;
        Ok(client)
    }

    pub fn request(&mut self, op: &str, args: Value) -> Result<Value, ClientError> {
        let req = Request::new(self.next_id, op, args);
        self.next_id += 1;
        self.writer.write_all(req.to_line().as_bytes())?;
        self.writer.flush()?;
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Err(ClientError::Protocol("connection closed by cell".into()));
        }
        let resp = Response::parse_line(&line).map_err(ClientError::Protocol)?;
        if resp.id != req.id {
            return Err(ClientError::Protocol(format!(
                "response id {} does not match request id {}",
                resp.id, req.id
            )));
        }
        self.sent.push(req);
        Ok(resp.outcome?)
    }

    pub fn sent(&self) -> &[Request] {
        &self.sent
    }

    /// Send `BYE` and drop the connection.
    pub fn close(mut self) -> Result<(), ClientError> {
        self.request("BYE", json!({}))?;
        Ok(())
    }
}

impl CellPort for CellClient {
    fn call(&mut self, op: &str, args: Value) -> Result<Value, ClientError> {
        self.request(op, args)
    }
}
