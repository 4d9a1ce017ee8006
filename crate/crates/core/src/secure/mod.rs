//! Additive secret sharing with information-theoretic MACs over a prime field,
//! hash commitments, and verification of a decentralised auction run by
//! re-executing every node from its committed inputs and the message log.

mod commit;
mod committed;
mod conversion;
mod field;
mod io;
mod shares;
mod transcript;

pub use commit::{commit, decode_f64s, encode_f64s, from_hex, to_hex, verify, Commitment, Opening};
pub use committed::{
    committed_protocol_run, execute_committed, verify_transcript, CheckKind, CommittedInputs, CommittedRun, Fault,
    Finding, VerificationReport,
};
pub use conversion::{verify_conversion, FIELD_DOMAIN};
pub use field::{Fp, F61, FIXED_BITS, MERSENNE_61};
pub use io::{read_report_csv, write_report_csv};
pub use shares::{mac_check, reconstruct, share, MacKey, SharedValue};
pub use transcript::{float_payload, Record, Transcript};
