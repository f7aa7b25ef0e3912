use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;

use crate::error::{Error, Result};

const SMALL_PRIMES: [u32; 54] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191,
    193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251,
];

const MILLER_RABIN_ROUNDS: usize = 40;

/// Random prime with exactly `bits` bits and the top two bits set, so that the product of two such
/// primes has exactly `2·bits` bits.
pub(super) fn random_prime<R: Rng + ?Sized>(bits: u32, rng: &mut R) -> Result<BigUint> {
    let attempts = 100 * bits as usize;
    for _ in 0..attempts {
        let mut cand = rng.gen_biguint(u64::from(bits));
        cand.set_bit(u64::from(bits) - 1, true);
        cand.set_bit(u64::from(bits) - 2, true);
        cand.set_bit(0, true);
        if is_probable_prime(&cand, rng) {
            return Ok(cand);
        }
    }
    Err(Error::Crypto(format!("no {bits}-bit prime found in {attempts} attempts")))
}

pub(super) fn is_probable_prime<R: Rng + ?Sized>(n: &BigUint, rng: &mut R) -> bool {
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    for &p in &SMALL_PRIMES {
        let p = BigUint::from(p);
        if n == &p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    let n1 = n - 1u32;
    let s = n1.trailing_zeros().unwrap_or(0);
    let d = &n1 >> s;
    'witness: for _ in 0..MILLER_RABIN_ROUNDS {
        let a = rng.gen_biguint_range(&two, &n1);
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n1 {
                continue 'witness;
            }
            if x.is_one() {
                return false;
            }
        }
        return false;
    }
    n.is_odd()
}
