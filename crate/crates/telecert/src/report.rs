//! JSON report envelope with provenance.

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub protocol: Option<String>,
    pub input: Option<String>,
    pub seed: u64,
    pub samples: u64,
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_unix: Option<u64>,
}

impl Provenance {
    pub fn new(command: &str, seed: u64, samples: u64, timestamp: bool) -> Self {
        Provenance {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_owned(),
            protocol: None,
            input: None,
            seed,
            samples,
            mode: None,
            generated_unix: timestamp.then(|| {
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map_or(0, |d| d.as_secs())
            }),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Envelope<T: Serialize> {
    #[serde(flatten)]
    pub body: T,
    pub provenance: Provenance,
}

pub fn to_json<T: Serialize>(body: T, provenance: Provenance) -> serde_json::Result<String> {
    let mut s = serde_json::to_string_pretty(&Envelope { body, provenance })?;
    s.push('\n');
    Ok(s)
}

/// One header row and one value row, with nested fields joined by `.`.
pub fn to_flat_csv<T: Serialize>(body: T, provenance: Provenance) -> anyhow::Result<String> {
    let value = serde_json::to_value(Envelope { body, provenance })?;
    let mut keys = Vec::new();
    let mut vals = Vec::new();
    flatten("", &value, &mut keys, &mut vals);
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(&keys)?;
    wtr.write_record(&vals)?;
    Ok(String::from_utf8(wtr.into_inner()?)?)
}

fn flatten(prefix: &str, v: &serde_json::Value, keys: &mut Vec<String>, vals: &mut Vec<String>) {
    let join = |k: &str| {
        if prefix.is_empty() {
            k.to_owned()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        serde_json::Value::Object(m) => {
            for (k, v) in m {
                flatten(&join(k), v, keys, vals);
            }
        }
        serde_json::Value::Array(a) => {
            for (i, v) in a.iter().enumerate() {
                flatten(&join(&i.to_string()), v, keys, vals);
            }
        }
        serde_json::Value::String(s) => {
            keys.push(prefix.to_owned());
            vals.push(s.clone());
        }
        serde_json::Value::Null => {
            keys.push(prefix.to_owned());
            vals.push(String::new());
        }
        other => {
            keys.push(prefix.to_owned());
            vals.push(other.to_string());
        }
    }
}
