use super::commit::{verify, Commitment, Opening};
use super::field::Fp;
use super::shares::{mac_check, reconstruct, SharedValue};

pub const FIELD_DOMAIN: &str = "field-element";

/// A committed field element was converted correctly into `sv`: the opening
/// matches the commitment, the shares sum to the committed value, and the MAC
/// shares authenticate it under `α`.
pub fn verify_conversion<const P: u64>(
    committed: &Commitment,
    opening: &Opening,
    sv: &SharedValue<P>,
    alpha: Fp<P>,
) -> bool {
    if !verify(committed, FIELD_DOMAIN, opening) {
        return false;
    }
    let Some(a) = Fp::<P>::from_le_bytes(&opening.value) else {
        return false;
    };
    reconstruct(sv) == a && mac_check(sv, alpha, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::secure::commit::commit;
    use crate::secure::field::F61;
    use crate::secure::shares::{share, MacKey};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (Commitment, Opening, SharedValue<{ crate::secure::MERSENNE_61 }>, MacKey<{ crate::secure::MERSENNE_61 }>) {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let key = MacKey::random(&mut rng);
        let a = F61::encode_fixed(2.75);
        let (c, o) = commit(FIELD_DOMAIN, &a.to_le_bytes(), &mut rng);
        (c, o, share(a, 4, &key, &mut rng), key)
    }

    #[test]
    fn honest_conversion_verifies() {
        let (c, o, sv, key) = setup();
        assert!(verify_conversion(&c, &o, &sv, key.alpha));
    }

    #[test]
    fn wrong_sum_fails() {
        let (c, o, mut sv, key) = setup();
        sv.shares[1] += F61::ONE;
        assert!(!verify_conversion(&c, &o, &sv, key.alpha));
    }

    #[test]
    fn corrupted_mac_share_fails() {
        let (c, o, sv, key) = setup();
        for party in 0..4 {
            for e in [1u64, 2, 1 << 40, crate::secure::MERSENNE_61 - 1] {
                let mut bad = sv.clone();
                bad.macs[party] += F61::new(e);
                assert!(!verify_conversion(&c, &o, &bad, key.alpha));
            }
        }
    }
}
