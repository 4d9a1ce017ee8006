use rand::Rng;
use sha2::{Digest, Sha256};

/// Hash commitment `H(domain, |v|, v, ρ)` with 32 bytes of randomness `ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Commitment {
    pub digest: [u8; 32],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Opening {
    pub value: Vec<u8>,
    pub randomness: [u8; 32],
}

fn digest(domain: &str, value: &[u8], randomness: &[u8; 32]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((domain.len() as u64).to_le_bytes());
    h.update(domain.as_bytes());
    h.update((value.len() as u64).to_le_bytes());
    h.update(value);
    h.update(randomness);
    h.finalize().into()
}

pub fn commit<R: Rng + ?Sized>(domain: &str, value: &[u8], rng: &mut R) -> (Commitment, Opening) {
    let mut randomness = [0u8; 32];
    rng.fill(&mut randomness);
    let c = Commitment {
        digest: digest(domain, value, &randomness),
    };
    (
        c,
        Opening {
            value: value.to_vec(),
            randomness,
        },
    )
}

pub fn verify(c: &Commitment, domain: &str, opening: &Opening) -> bool {
    digest(domain, &opening.value, &opening.randomness) == c.digest
}

pub fn encode_f64s(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_f64s(bytes: &[u8]) -> Option<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return None;
    }
    Some(
        bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect(),
    )
}

pub fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn from_hex(s: &str) -> Option<Vec<u8>> {
    if s.len() % 2 != 0 || !s.is_ascii() {
        return None;
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).ok())
        .collect()
}
