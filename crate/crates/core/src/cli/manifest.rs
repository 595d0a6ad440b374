//! `key=value` sidecar recording how an output was produced.

use sha2::{Digest, Sha256};

use super::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunManifest {
    pub subcommand: String,
    /// Command-line arguments after the program name.
    pub args: Vec<String>,
    /// Resolved parameters, in declaration order.
    pub params: Vec<(String, String)>,
    pub seed: Option<u64>,
    pub version: String,
    pub checksum: String,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut out = format!("subcommand={}\nversion={}\n", self.subcommand, self.version);
        if let Some(seed) = self.seed {
            out.push_str(&format!("seed={seed}\n"));
        }
        for (i, a) in self.args.iter().enumerate() {
            out.push_str(&format!("arg.{i}={}\n", escape(a)));
        }
        for (k, v) in &self.params {
            out.push_str(&format!("param.{k}={}\n", escape(v)));
        }
        out.push_str(&format!("checksum={}\n", self.checksum));
        out
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut m = RunManifest {
            subcommand: String::new(),
            args: Vec::new(),
            params: Vec::new(),
            seed: None,
            version: String::new(),
            checksum: String::new(),
        };
        let mut args: Vec<(usize, String)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || CliError::Usage(format!("manifest line {}: malformed entry '{line}'", lineno + 1));
            let (key, value) = line.split_once('=').ok_or_else(bad)?;
            let value = unescape(value);
            match key {
                "subcommand" => m.subcommand = value,
                "version" => m.version = value,
                "checksum" => m.checksum = value,
                "seed" => m.seed = Some(value.parse().map_err(|_| bad())?),
                k if k.starts_with("arg.") => {
                    let idx = k[4..].parse().map_err(|_| bad())?;
                    args.push((idx, value));
                }
                k if k.starts_with("param.") => m.params.push((k[6..].to_string(), value)),
                _ => return Err(bad()),
            }
        }
        args.sort_by_key(|(i, _)| *i);
        m.args = args.into_iter().map(|(_, a)| a).collect();
        if m.subcommand.is_empty() || m.checksum.is_empty() {
            return Err(CliError::Usage("manifest lacks subcommand or checksum".into()));
        }
        Ok(m)
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\n', "\\n")
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('n') => out.push('\n'),
                Some(other) => out.push(other),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

/// `sha256:<hex>` over the concatenated output bodies.
pub fn checksum<'a>(bodies: impl IntoIterator<Item = &'a str>) -> String {
    let mut hasher = Sha256::new();
    for b in bodies {
        hasher.update(b.as_bytes());
    }
    let digest = hasher.finalize();
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}
