//! Wire format: newline-delimited UTF-8 JSON objects.
//!
//! Request:  `{"id":N,"op":"MOVE_L","args":{...}}`
//! Response: `{"id":N,"status":"ok","result":{...}}` or
//!           `{"id":N,"status":"error","error":"code: detail"}`
//!
//! `HELLO` with `{"version":"1"}` must precede every other op on a
//! connection. `BYE` acknowledges and closes the connection.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const PROTOCOL_VERSION: &str = "1";

pub const OPCODES: [&str; 8] = [
    "HELLO",
    "MOVE_L",
    "MOVE_J",
    "GRIP_OPEN",
    "GRIP_CLOSE",
    "CAPTURE",
    "GET_STATE",
    "BYE",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Request {
    pub id: u64,
    pub op: String,
    #[serde(default = "empty_args")]
    pub args: Value,
}

fn empty_args() -> Value {
    Value::Object(Map::new())
}

impl Request {
    pub fn new(id: u64, op: &str, args: Value) -> Self {
        Request {
            id,
            op: op.to_string(),
            args,
        }
    }

    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("request serializes");
        s.push('\n');
        s
    }
}

/// Error code plus human-readable detail, rendered as `code: detail`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellError {
    pub code: String,
    pub detail: String,
}

impl CellError {
    pub fn new(code: &str, detail: impl Into<String>) -> Self {
        CellError {
            code: code.to_string(),
            detail: detail.into(),
        }
    }

    pub fn bad_args(detail: impl Into<String>) -> Self {
        CellError::new("bad_args", detail)
    }

    pub fn parse(text: &str) -> Self {
        match text.split_once(": ") {
            Some((code, detail)) => CellError::new(code, detail),
            None => CellError::new(text, ""),
        }
    }
}

impl fmt::Display for CellError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.detail)
    }
}

impl std::error::Error for CellError {}

#[derive(Clone, Debug, PartialEq)]
pub struct Response {
    pub id: u64,
    pub outcome: Result<Value, CellError>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResponseDoc {
    id: u64,
    status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl Response {
    pub fn ok(id: u64, result: Value) -> Self {
        Response {
            id,
            outcome: Ok(result),
        }
    }

    pub fn error(id: u64, err: CellError) -> Self {
        Response {
            id,
            outcome: Err(err),
        }
    }

    pub fn to_line(&self) -> String {
        let doc = match &self.outcome {
            Ok(result) => ResponseDoc {
                id: self.id,
                status: "ok".into(),
                result: Some(result.clone()),
                error: None,
            },
            Err(e) => ResponseDoc {
                id: self.id,
                status: "error".into(),
                result: None,
                error: Some(e.to_string()),
            },
        };
        let mut s = serde_json::to_string(&doc).expect("response serializes");
        s.push('\n');
        s
    }

    pub fn parse_line(line: &str) -> Result<Self, String> {
        let doc: ResponseDoc = serde_json::from_str(line.trim_end()).map_err(|e| e.to_string())?;
        let outcome = match (doc.status.as_str(), doc.result, doc.error) {
            ("ok", Some(result), None) => Ok(result),
            ("error", None, Some(e)) => Err(CellError::parse(&e)),
            _ => return Err(format!("inconsistent response status {:?}", doc.status)),
        };
        Ok(Response { id: doc.id, outcome })
    }
}

/// Outcome of decoding one incoming line.
#[derive(Debug, PartialEq)]
pub enum Frame {
    Request(Request),
    /// Decodable id but invalid request; answer with an error.
    Invalid { id: u64, error: CellError },
    /// No usable id; the connection is closed.
    Unusable(String),
}

pub fn decode_frame(line: &str) -> Frame {
    let value: Value = match serde_json::from_str(line.trim_end_matches(['\n', '\r'])) {
        Ok(v) => v,
        Err(e) => return Frame::Unusable(format!("not JSON: {e}")),
    };
    let Some(id) = value.get("id").and_then(Value::as_u64) else {
        return Frame::Unusable("missing or invalid id".into());
    };
    match serde_json::from_value::<Request>(value) {
        Ok(req) if req.args.is_object() => Frame::Request(req),
        Ok(_) => Frame::Invalid {
            id,
            error: CellError::new("malformed_frame", "args must be an object"),
        },
        Err(e) => Frame::Invalid {
            id,
            error: CellError::new("malformed_frame", e.to_string()),
        },
    }
}
