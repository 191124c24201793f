//! Transaction logs as JSON lines.
//!
//! An optional first line `{"genesis": {...}}` makes a log self-contained.
//! Every other line is one submitted transaction:
//!
//! ```text
//! {"date":"2026-10-14","tx":"0x…","receipt":{…}}
//! {"date":"2026-10-14","tx":"0x…","rejected":{"reason":"BadNonce",…}}
//! ```
//!
//! The recorded outcome is informational; [`verify`] re-executes the log
//! and checks that every outcome comes out the same.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use anka_core::chain::{GenesisConfig, ReplayError};
use anka_core::{Chain, Digest, LogEntry, Outcome, Receipt, SignedTransaction, TxRejection};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub date: NaiveDate,
    pub tx: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receipt: Option<Receipt>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejected: Option<TxRejection>,
}

impl LogRecord {
    pub fn new(date: NaiveDate, tx: &SignedTransaction, outcome: Option<&Outcome>) -> Self {
        let (receipt, rejected) = match outcome {
            Some(Ok(r)) => (Some(r.clone()), None),
            Some(Err(e)) => (None, Some(*e)),
            None => (None, None),
        };
        LogRecord { date, tx: tx.to_hex(), receipt, rejected }
    }

    pub fn outcome(&self) -> Option<Outcome> {
        match (&self.receipt, &self.rejected) {
            (Some(r), _) => Some(Ok(r.clone())),
            (None, Some(e)) => Some(Err(*e)),
            (None, None) => None,
        }
    }

    pub fn entry(&self) -> Result<LogEntry, TxLogError> {
        let tx = SignedTransaction::from_hex(&self.tx).map_err(|e| TxLogError::Format(format!("bad tx: {e}")))?;
        Ok(LogEntry { date: self.date, tx })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TxLog {
    pub genesis: Option<GenesisConfig>,
    pub records: Vec<LogRecord>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    genesis: GenesisConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum TxLogError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("{0}")]
    Format(String),
    #[error("log has no genesis header")]
    NoGenesis,
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("entry {index}: replay produced {actual}, log records {recorded}")]
    Diverged { index: usize, recorded: String, actual: String },
}

impl TxLog {
    pub fn entries(&self) -> Result<Vec<LogEntry>, TxLogError> {
        self.records.iter().map(LogRecord::entry).collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        if let Some(g) = &self.genesis {
            out += &serde_json::to_string(&Header { genesis: g.clone() }).expect("serializes");
            out.push('\n');
        }
        for r in &self.records {
            out += &serde_json::to_string(r).expect("serializes");
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, TxLogError> {
        Self::read(text.as_bytes())
    }

    pub fn read(reader: impl std::io::Read) -> Result<Self, TxLogError> {
        let mut log = TxLog::default();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let json = |source| TxLogError::Json { line: i + 1, source };
            if i == 0 && line.trim_start().starts_with("{\"genesis\"") {
                log.genesis = Some(serde_json::from_str::<Header>(&line).map_err(json)?.genesis);
            } else {
                log.records.push(serde_json::from_str(&line).map_err(json)?);
            }
        }
        Ok(log)
    }

    pub fn load(path: &Path) -> Result<Self, TxLogError> {
        Self::read(fs::File::open(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), TxLogError> {
        fs::write(path, self.to_jsonl())?;
        Ok(())
    }
}

/// Appends records to a log file as they happen.
pub struct LogWriter {
    file: fs::File,
}

impl LogWriter {
    pub fn create(path: &Path, genesis: Option<&GenesisConfig>) -> Result<Self, TxLogError> {
        let mut file = fs::File::create(path)?;
        if let Some(g) = genesis {
            writeln!(file, "{}", serde_json::to_string(&Header { genesis: g.clone() }).expect("serializes"))?;
        }
        Ok(LogWriter { file })
    }

    pub fn append(&mut self, record: &LogRecord) -> Result<(), TxLogError> {
        writeln!(self.file, "{}", serde_json::to_string(record).expect("serializes"))?;
        self.file.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verified {
    pub chain: Chain,
    pub outcomes: Vec<Outcome>,
    pub state_hash: Digest,
}

/// Replays `log` from `genesis` (or the log's own header) and checks every
/// recorded outcome.
pub fn verify(log: &TxLog, genesis: Option<&GenesisConfig>) -> Result<Verified, TxLogError> {
    let genesis = genesis.or(log.genesis.as_ref()).ok_or(TxLogError::NoGenesis)?;
    let entries = log.entries()?;
    let (chain, outcomes) = Chain::replay(genesis, &entries)?;
    for (index, (record, actual)) in log.records.iter().zip(&outcomes).enumerate() {
        if let Some(recorded) = record.outcome() {
            if &recorded != actual {
                return Err(TxLogError::Diverged {
                    index,
                    recorded: format!("{recorded:?}"),
                    actual: format!("{actual:?}"),
                });
            }
        }
    }
    let state_hash = chain.state_hash();
    Ok(Verified { chain, outcomes, state_hash })
}

#[cfg(test)]
mod tests {
    use super::*;
    use anka_core::chain::DEV_FAUCET_LABEL;
    use anka_core::{KeyPair, Payload};

    fn sample() -> (GenesisConfig, TxLog) {
        let date = NaiveDate::from_ymd_opt(2026, 10, 14).unwrap();
        let genesis = GenesisConfig::dev(date);
        let faucet = KeyPair::from_label(DEV_FAUCET_LABEL);
        let mut chain = Chain::genesis(&genesis).unwrap();
        let mut log = TxLog { genesis: Some(genesis.clone()), records: vec![] };
        for nonce in [0, 1, 1] {
            let tx = anka_core::Transaction::new(
                &faucet,
                nonce,
                21_000,
                1,
                Payload::Transfer { to: KeyPair::from_seed(nonce).address(), amount: 7 },
            )
            .sign(&faucet);
            let out = chain.submit(&tx);
            log.records.push(LogRecord::new(date, &tx, Some(&out)));
        }
        (genesis, log)
    }

    #[test]
    fn jsonl_round_trip_and_verify() {
        let (_, log) = sample();
        let text = log.to_jsonl();
        assert_eq!(text.lines().count(), 4);
        let parsed = TxLog::parse(&text).unwrap();
        assert_eq!(parsed, log);
        let v = verify(&parsed, None).unwrap();
        assert_eq!(v.outcomes.len(), 3);
        assert!(v.outcomes[2].is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let (_, mut log) = sample();
        log.records[0].receipt.as_mut().unwrap().gas_used += 1;
        assert!(matches!(verify(&log, None), Err(TxLogError::Diverged { index: 0, .. })));
    }

    #[test]
    fn tampered_tx_is_detected() {
        let (_, mut log) = sample();
        let mut raw = log.records[0].tx.clone();
        let last = raw.pop().unwrap();
        raw.push(if last == '0' { '1' } else { '0' });
        log.records[0].tx = raw;
        assert!(matches!(verify(&log, None), Err(TxLogError::Diverged { index: 0, .. })));
    }

    #[test]
    fn appending_writer_matches_batch_output() {
        let (genesis, log) = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let mut w = LogWriter::create(&path, Some(&genesis)).unwrap();
        for r in &log.records {
            w.append(r).unwrap();
        }
        assert_eq!(fs::read_to_string(&path).unwrap(), log.to_jsonl());
        assert_eq!(TxLog::load(&path).unwrap(), log);
    }
}
