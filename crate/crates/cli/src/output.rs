use nmds::report::KvDocument;
use std::io::Write;

use serde_json::{Map, Number, Value};

#[derive(Debug, Clone, Copy, clap::Args)]
pub struct OutputArgs {
    /// Emit a JSON object instead of the human-readable report
    #[arg(long, conflicts_with = "kv")]
    pub json: bool,
    /// Emit `key = value` lines instead of the human-readable report
    #[arg(long)]
    pub kv: bool,
}

impl OutputArgs {
    /// Prints `doc` in a machine format if one was requested, otherwise
    /// `human`.
    pub fn emit(&self, doc: &KvDocument, human: impl FnOnce() -> String) {
        let text = if self.json {
            to_json(doc) + "\n"
        } else if self.kv {
            doc.to_string()
        } else {
            human()
        };
        // a closed pipe (`| head`) is not an error worth reporting
        let _ = std::io::stdout().lock().write_all(text.as_bytes());
    }
}

fn to_json(doc: &KvDocument) -> String {
    let mut map = Map::new();
    for (key, value) in doc.entries() {
        let json = if let Ok(i) = value.parse::<i64>() {
            Value::Number(i.into())
        } else if let Some(n) = value.parse::<f64>().ok().and_then(Number::from_f64) {
            Value::Number(n)
        } else if let Ok(b) = value.parse::<bool>() {
            Value::Bool(b)
        } else {
            Value::String(value.clone())
        };
        map.insert(key.clone(), json);
    }
    serde_json::to_string_pretty(&Value::Object(map)).expect("plain values serialize")
}
