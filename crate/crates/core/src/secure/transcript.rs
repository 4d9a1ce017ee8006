//! Append-only message log.
//!
//! ```text
//! monpol-transcript v1
//! users 3
//! 0 0 commit-report 5f2c…e1 9a0b…44
//! 1 3 lambda 77d1…0c 0.5,0.25
//! ```
//!
//! After the two header lines, each record is `round sender kind digest
//! payload`, separated by single spaces. Sender `users` is the manager. The
//! digest is the SHA-256 of the other four fields and is checked on load. An
//! empty payload is written as `-`. Blank lines and lines starting with `#`
//! are ignored.

use sha2::{Digest, Sha256};

use super::commit::{from_hex, to_hex};
use crate::error::{Error, Result};

const MAGIC: &str = "monpol-transcript v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub round: usize,
    pub sender: usize,
    pub kind: String,
    pub payload: String,
    pub digest: [u8; 32],
}

impl Record {
    pub fn new(round: usize, sender: usize, kind: &str, payload: String) -> Self {
        let digest = record_digest(round, sender, kind, &payload);
        Record {
            round,
            sender,
            kind: kind.to_string(),
            payload,
            digest,
        }
    }

    pub fn floats(&self) -> Option<Vec<f64>> {
        if self.payload.is_empty() {
            return Some(Vec::new());
        }
        self.payload.split(',').map(|s| s.parse().ok()).collect()
    }

    pub fn bytes(&self) -> Option<Vec<u8>> {
        from_hex(&self.payload)
    }
}

fn record_digest(round: usize, sender: usize, kind: &str, payload: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((round as u64).to_le_bytes());
    h.update((sender as u64).to_le_bytes());
    h.update((kind.len() as u64).to_le_bytes());
    h.update(kind.as_bytes());
    h.update((payload.len() as u64).to_le_bytes());
    h.update(payload.as_bytes());
    h.finalize().into()
}

pub fn float_payload(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Transcript {
    pub users: usize,
    pub records: Vec<Record>,
}

impl Transcript {
    pub fn new(users: usize) -> Self {
        Transcript {
            users,
            records: Vec::new(),
        }
    }

    pub fn manager(&self) -> usize {
        self.users
    }

    pub fn append(&mut self, record: Record) {
        self.records.push(record);
    }

    pub fn find(&self, round: usize, sender: usize, kind: &str) -> Option<&Record> {
        self.records
            .iter()
            .find(|r| r.round == round && r.sender == sender && r.kind == kind)
    }

    pub fn last_round(&self) -> usize {
        self.records.iter().map(|r| r.round).max().unwrap_or(0)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC}\nusers {}\n", self.users);
        for r in &self.records {
            let payload = if r.payload.is_empty() { "-" } else { &r.payload };
            out.push_str(&format!(
                "{} {} {} {} {}\n",
                r.round,
                r.sender,
                r.kind,
                to_hex(&r.digest),
                payload
            ));
        }
        out
    }

    pub fn parse(src: &str) -> Result<Self> {
        let mut lines = src
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some((_, l)) if l == MAGIC => {}
            Some((n, l)) => return Err(Error::parse(n, format!("expected `{MAGIC}`, found `{l}`"))),
            None => return Err(Error::parse(0, "empty transcript")),
        }
        let users = match lines.next() {
            Some((n, l)) => l
                .strip_prefix("users ")
                .and_then(|v| v.trim().parse::<usize>().ok())
                .ok_or_else(|| Error::parse(n, "expected `users <count>`"))?,
            None => return Err(Error::parse(0, "missing users line")),
        };
        let mut t = Transcript::new(users);
        for (n, line) in lines {
            let fields: Vec<&str> = line.split(' ').collect();
            if fields.len() != 5 {
                return Err(Error::parse(n, format!("expected 5 fields, found {}", fields.len())));
            }
            let round = fields[0].parse().map_err(|_| Error::parse(n, "bad round"))?;
            let sender: usize = fields[1].parse().map_err(|_| Error::parse(n, "bad sender"))?;
            if sender > users {
                return Err(Error::parse(n, format!("sender {sender} outside 0..={users}")));
            }
            let kind = fields[2];
            if kind.is_empty() || !kind.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
                return Err(Error::parse(n, format!("bad message kind `{kind}`")));
            }
            let digest: [u8; 32] = from_hex(fields[3])
                .and_then(|d| d.try_into().ok())
                .ok_or_else(|| Error::parse(n, "digest must be 64 hex digits"))?;
            let payload = if fields[4] == "-" { String::new() } else { fields[4].to_string() };
            let rec = Record::new(round, sender, kind, payload);
            if rec.digest != digest {
                return Err(Error::parse(n, "digest does not match record"));
            }
            if let Some(prev) = t.records.last() {
                if prev.round > round {
                    return Err(Error::parse(n, "rounds must not decrease"));
                }
            }
            t.append(rec);
        }
        Ok(t)
    }
}
