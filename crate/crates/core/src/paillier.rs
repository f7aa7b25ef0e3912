//! Paillier additively homomorphic encryption, `g = n + 1` variant.
//!
//! Plaintexts live in `Z_n`. Signed values are embedded in the ring and decoded with the threshold
//! `n / 2`: a residue `v > n/2` stands for `v - n`. Masked conflict shares rely on this, since a
//! share `x·y + r` minus a mask goes negative.
//!
//! The key owner decrypts through CRT over `p²` and `q²`. It encrypts with fixed-base randomness:
//! `r^n` is replaced by `h^α` for `h = (−x²)^n mod n²` and a random `α` of half the modulus
//! length, read off precomputed power tables modulo `p²` and `q²`. Holders of the public key use
//! the textbook `(1 + m·n)·r^n mod n²`.

use std::fmt;

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod primes;

pub const MIN_KEY_BITS: u32 = 128;
pub const MAX_KEY_BITS: u32 = 8192;

#[derive(Clone, PartialEq, Eq)]
pub struct PublicKey {
    n: BigUint,
    n_squared: BigUint,
    half_n: BigUint,
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({} bits)", self.n.bits())
    }
}

#[derive(Clone)]
pub struct PrivateKey {
    lambda: BigUint,
    mu: BigUint,
    crt: Crt,
    fixed: Option<FixedBase>,
}

const WINDOW_BITS: usize = 8;
// Tables grow linearly with the key; past this size the owner falls back to r^n.
const MAX_FIXED_BASE_BITS: u32 = 2048;

// Powers h^(j·2^(8i)) modulo p² and q².
#[derive(Clone)]
struct FixedBase {
    alpha_bits: u64,
    p_table: Vec<Vec<BigUint>>,
    q_table: Vec<Vec<BigUint>>,
}

fn power_table(base: &BigUint, modulus: &BigUint, windows: usize) -> Vec<Vec<BigUint>> {
    let mut out = Vec::with_capacity(windows);
    let mut b = base.clone();
    for _ in 0..windows {
        let mut row = Vec::with_capacity(1 << WINDOW_BITS);
        let mut acc = BigUint::one() % modulus;
        for _ in 0..1 << WINDOW_BITS {
            row.push(acc.clone());
            acc = (&acc * &b) % modulus;
        }
        b = acc;
        out.push(row);
    }
    out
}

fn table_pow(table: &[Vec<BigUint>], alpha: &BigUint, modulus: &BigUint) -> BigUint {
    let mut acc = BigUint::one();
    for (row, byte) in table.iter().zip(alpha.to_bytes_le()) {
        if byte != 0 {
            acc = (acc * &row[usize::from(byte)]) % modulus;
        }
    }
    acc
}

impl fmt::Debug for PrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PrivateKey(..)")
    }
}

// Factor-dependent precomputation.
#[derive(Clone)]
struct Crt {
    p: BigUint,
    q: BigUint,
    p_squared: BigUint,
    q_squared: BigUint,
    // n mod p(p-1) and n mod q(q-1): exponents for r^n modulo p² and q²
    n_mod_phi_p2: BigUint,
    n_mod_phi_q2: BigUint,
    // (p²)^-1 mod q²
    p2_inv_q2: BigUint,
    // h_p = L_p(g^(p-1) mod p²)^-1 mod p, likewise for q
    h_p: BigUint,
    h_q: BigUint,
    // p^-1 mod q
    p_inv_q: BigUint,
}

#[derive(Clone, Debug)]
pub struct Keypair {
    pub public: PublicKey,
    private: PrivateKey,
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Ciphertext(BigUint);

impl fmt::Debug for Ciphertext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hex = hex::encode(self.0.to_bytes_be());
        write!(f, "Ciphertext({}…)", &hex[..hex.len().min(12)])
    }
}

impl Ciphertext {
    pub fn to_bytes_be(&self) -> Vec<u8> {
        self.0.to_bytes_be()
    }

    pub fn from_bytes_be(bytes: &[u8]) -> Self {
        Ciphertext(BigUint::from_bytes_be(bytes))
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }
}

/// Generates a key whose modulus has exactly `bits` bits and checks it with three round trips.
pub fn keygen<R: Rng + ?Sized>(bits: u32, rng: &mut R) -> Result<Keypair> {
    if bits < MIN_KEY_BITS || bits > MAX_KEY_BITS || bits % 2 != 0 {
        return Err(Error::param(format!(
            "key size must be even and within [{MIN_KEY_BITS}, {MAX_KEY_BITS}], got {bits}"
        )));
    }
    let half = bits / 2;
    for _ in 0..16 {
        let p = primes::random_prime(half, rng)?;
        let q = primes::random_prime(half, rng)?;
        if p == q {
            continue;
        }
        let n = &p * &q;
        if n.bits() != u64::from(bits) {
            continue;
        }
        let p1 = &p - 1u32;
        let q1 = &q - 1u32;
        if !n.gcd(&(&p1 * &q1)).is_one() {
            continue;
        }
        let mut kp = Keypair::from_primes(p, q)?;
        if bits <= MAX_FIXED_BASE_BITS {
            kp.private.fixed = Some(kp.fixed_base(rng));
        }
        kp.self_test(rng)?;
        return Ok(kp);
    }
    Err(Error::Crypto(format!("could not generate a {bits}-bit modulus")))
}

impl Keypair {
    fn from_primes(p: BigUint, q: BigUint) -> Result<Self> {
        let n = &p * &q;
        let n_squared = &n * &n;
        let p1 = &p - 1u32;
        let q1 = &q - 1u32;
        let lambda = p1.lcm(&q1);
        let public = PublicKey {
            half_n: &n >> 1,
            n,
            n_squared,
        };
        // with g = n + 1, L(g^λ mod n²) = λ mod n
        let mu = (&lambda % &public.n)
            .modinv(&public.n)
            .ok_or_else(|| Error::Crypto("λ not invertible mod n".into()))?;

        let p_squared = &p * &p;
        let q_squared = &q * &q;
        let n_mod_phi_p2 = &public.n % (&p * &p1);
        let n_mod_phi_q2 = &public.n % (&q * &q1);
        let p2_inv_q2 = p_squared
            .modinv(&q_squared)
            .ok_or_else(|| Error::Crypto("p² not invertible mod q²".into()))?;
        let g = &public.n + 1u32;
        let h_p = l_function(&g.modpow(&p1, &p_squared), &p)
            .modinv(&p)
            .ok_or_else(|| Error::Crypto("h_p not invertible".into()))?;
        let h_q = l_function(&g.modpow(&q1, &q_squared), &q)
            .modinv(&q)
            .ok_or_else(|| Error::Crypto("h_q not invertible".into()))?;
        let p_inv_q = p
            .modinv(&q)
            .ok_or_else(|| Error::Crypto("p not invertible mod q".into()))?;
        Ok(Keypair {
            public,
            private: PrivateKey {
                lambda,
                mu,
                crt: Crt {
                    p,
                    q,
                    p_squared,
                    q_squared,
                    n_mod_phi_p2,
                    n_mod_phi_q2,
                    p2_inv_q2,
                    h_p,
                    h_q,
                    p_inv_q,
                },
                fixed: None,
            },
        })
    }

    fn fixed_base<R: Rng + ?Sized>(&self, rng: &mut R) -> FixedBase {
        let pk = &self.public;
        let crt = &self.private.crt;
        let x = pk.random_unit(rng);
        let h = &pk.n - (&x * &x) % &pk.n;
        let h_n = h.modpow(&pk.n, &pk.n_squared);
        let alpha_bits = pk.n.bits().div_ceil(2);
        let windows = (alpha_bits as usize).div_ceil(WINDOW_BITS);
        FixedBase {
            alpha_bits,
            p_table: power_table(&(&h_n % &crt.p_squared), &crt.p_squared, windows),
            q_table: power_table(&(&h_n % &crt.q_squared), &crt.q_squared, windows),
        }
    }

    // r^n mod p² and mod q², or h^α when tables exist.
    fn randomizer_crt<R: Rng + ?Sized>(&self, rng: &mut R) -> (BigUint, BigUint) {
        let crt = &self.private.crt;
        match &self.private.fixed {
            Some(f) => {
                let alpha = rng.gen_biguint(f.alpha_bits);
                (
                    table_pow(&f.p_table, &alpha, &crt.p_squared),
                    table_pow(&f.q_table, &alpha, &crt.q_squared),
                )
            }
            None => {
                let r = self.public.random_unit(rng);
                (
                    r.modpow(&crt.n_mod_phi_p2, &crt.p_squared),
                    r.modpow(&crt.n_mod_phi_q2, &crt.q_squared),
                )
            }
        }
    }

    fn self_test<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<()> {
        for _ in 0..3 {
            let m = rng.gen_biguint_below(&self.public.n);
            for c in [self.public.encrypt(&m, rng)?, self.encrypt(&m, rng)?] {
                if self.decrypt(&c)? != m || self.decrypt_textbook(&c)? != m {
                    return Err(Error::Crypto("key self-test failed".into()));
                }
            }
        }
        Ok(())
    }

    pub fn private(&self) -> &PrivateKey {
        &self.private
    }

    /// Owner-side encryption; same output distribution as [`PublicKey::encrypt`].
    pub fn encrypt<R: Rng + ?Sized>(&self, m: &BigUint, rng: &mut R) -> Result<Ciphertext> {
        let pk = &self.public;
        pk.check_plaintext(m)?;
        let crt = &self.private.crt;
        let (a, b) = self.randomizer_crt(rng);
        // x ≡ a (mod p²), x ≡ b (mod q²)
        let diff = (&b + &crt.q_squared - (&a % &crt.q_squared)) % &crt.q_squared;
        let rn = &a + &crt.p_squared * ((diff * &crt.p2_inv_q2) % &crt.q_squared);
        Ok(Ciphertext((pk.g_pow(m) * rn) % &pk.n_squared))
    }

    pub fn encrypt_signed<R: Rng + ?Sized>(&self, v: i64, rng: &mut R) -> Result<Ciphertext> {
        self.encrypt(&self.public.encode_signed(&BigInt::from(v)), rng)
    }

    /// CRT decryption.
    pub fn decrypt(&self, c: &Ciphertext) -> Result<BigUint> {
        self.public.check_ciphertext(c)?;
        let crt = &self.private.crt;
        let p1 = &crt.p - 1u32;
        let q1 = &crt.q - 1u32;
        let mp = (l_function(&c.0.modpow(&p1, &crt.p_squared), &crt.p) * &crt.h_p) % &crt.p;
        let mq = (l_function(&c.0.modpow(&q1, &crt.q_squared), &crt.q) * &crt.h_q) % &crt.q;
        // m ≡ mp (mod p), m ≡ mq (mod q)
        let diff = (&mq + &crt.q - (&mp % &crt.q)) % &crt.q;
        Ok(&mp + &crt.p * ((diff * &crt.p_inv_q) % &crt.q))
    }

    /// `m = L(c^λ mod n²)·μ mod n`.
    pub fn decrypt_textbook(&self, c: &Ciphertext) -> Result<BigUint> {
        let pk = &self.public;
        pk.check_ciphertext(c)?;
        let u = c.0.modpow(&self.private.lambda, &pk.n_squared);
        Ok((l_function(&u, &pk.n) * &self.private.mu) % &pk.n)
    }

    pub fn decrypt_signed(&self, c: &Ciphertext) -> Result<BigInt> {
        Ok(self.public.decode_signed(&self.decrypt(c)?))
    }

    /// Decrypts and requires the signed value to fit in an `i64`.
    pub fn decrypt_i64(&self, c: &Ciphertext) -> Result<i64> {
        self.decrypt_signed(c)?
            .to_i64()
            .ok_or_else(|| Error::Crypto("decrypted value outside the i64 range".into()))
    }
}

impl PrivateKey {
    pub fn lambda(&self) -> &BigUint {
        &self.lambda
    }

    pub fn mu(&self) -> &BigUint {
        &self.mu
    }
}

fn l_function(u: &BigUint, n: &BigUint) -> BigUint {
    (u - 1u32) / n
}

impl PublicKey {
    pub fn from_modulus(n: BigUint) -> Result<Self> {
        if n.bits() < u64::from(MIN_KEY_BITS) || n.is_even() {
            return Err(Error::Crypto("modulus too small or even".into()));
        }
        Ok(PublicKey {
            n_squared: &n * &n,
            half_n: &n >> 1,
            n,
        })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    pub fn modulus_squared(&self) -> &BigUint {
        &self.n_squared
    }

    pub fn generator(&self) -> BigUint {
        &self.n + 1u32
    }

    pub fn bits(&self) -> u64 {
        self.n.bits()
    }

    pub fn to_bytes_be(&self) -> Vec<u8> {
        self.n.to_bytes_be()
    }

    fn check_plaintext(&self, m: &BigUint) -> Result<()> {
        if m >= &self.n {
            return Err(Error::param("plaintext not in [0, n)"));
        }
        Ok(())
    }

    fn check_ciphertext(&self, c: &Ciphertext) -> Result<()> {
        if c.0.is_zero() || c.0 >= self.n_squared {
            return Err(Error::Crypto("ciphertext not in (0, n²)".into()));
        }
        Ok(())
    }

    fn random_unit<R: Rng + ?Sized>(&self, rng: &mut R) -> BigUint {
        loop {
            let r = rng.gen_biguint_range(&BigUint::one(), &self.n);
            if r.gcd(&self.n).is_one() {
                return r;
            }
        }
    }

    // (n+1)^m = 1 + m·n mod n²
    fn g_pow(&self, m: &BigUint) -> BigUint {
        (m * &self.n + 1u32) % &self.n_squared
    }

    /// `c = (1 + m·n)·r^n mod n²` with fresh `r`.
    pub fn encrypt<R: Rng + ?Sized>(&self, m: &BigUint, rng: &mut R) -> Result<Ciphertext> {
        self.check_plaintext(m)?;
        let r = self.random_unit(rng);
        let rn = r.modpow(&self.n, &self.n_squared);
        Ok(Ciphertext((self.g_pow(m) * rn) % &self.n_squared))
    }

    pub fn encrypt_signed<R: Rng + ?Sized>(&self, v: i64, rng: &mut R) -> Result<Ciphertext> {
        self.encrypt(&self.encode_signed(&BigInt::from(v)), rng)
    }

    /// Homomorphic addition: `E(a)·E(b) = E(a + b mod n)`.
    pub fn add(&self, c1: &Ciphertext, c2: &Ciphertext) -> Ciphertext {
        Ciphertext((&c1.0 * &c2.0) % &self.n_squared)
    }

    /// `E(a)^s = E(s·a mod n)`.
    pub fn scalar_mul(&self, c: &Ciphertext, s: &BigUint) -> Ciphertext {
        if s.is_zero() {
            return Ciphertext(BigUint::one());
        }
        if s.is_one() {
            return c.clone();
        }
        Ciphertext(c.0.modpow(s, &self.n_squared))
    }

    /// Scalar multiplication by a signed integer; negative scalars go through the inverse mod n².
    pub fn scalar_mul_signed(&self, c: &Ciphertext, s: i64) -> Result<Ciphertext> {
        let pos = self.scalar_mul(c, &BigUint::from(s.unsigned_abs()));
        if s < 0 {
            self.negate(&pos)
        } else {
            Ok(pos)
        }
    }

    /// `E(a)^-1 = E(-a mod n)`.
    pub fn negate(&self, c: &Ciphertext) -> Result<Ciphertext> {
        c.0.modinv(&self.n_squared)
            .map(Ciphertext)
            .ok_or_else(|| Error::Crypto("ciphertext not invertible mod n²".into()))
    }

    /// Ring embedding of a signed integer with `|v| < n/2`.
    pub fn encode_signed(&self, v: &BigInt) -> BigUint {
        let n = BigInt::from_biguint(Sign::Plus, self.n.clone());
        v.mod_floor(&n).to_biguint().expect("mod_floor is nonnegative")
    }

    /// Residues above `n/2` decode as `v - n`.
    pub fn decode_signed(&self, v: &BigUint) -> BigInt {
        if v > &self.half_n {
            BigInt::from_biguint(Sign::Plus, v.clone()) - BigInt::from_biguint(Sign::Plus, self.n.clone())
        } else {
            BigInt::from_biguint(Sign::Plus, v.clone())
        }
    }
}

/// Free-function form of [`PublicKey::encrypt`].
pub fn encrypt<R: Rng + ?Sized>(pk: &PublicKey, m: &BigUint, rng: &mut R) -> Result<Ciphertext> {
    pk.encrypt(m, rng)
}

/// Free-function form of [`Keypair::decrypt`]; the public key must match the keypair.
pub fn decrypt(pk: &PublicKey, sk: &Keypair, c: &Ciphertext) -> Result<BigUint> {
    if pk != &sk.public {
        return Err(Error::Crypto("public key does not match private key".into()));
    }
    sk.decrypt(c)
}

pub fn add(pk: &PublicKey, c1: &Ciphertext, c2: &Ciphertext) -> Ciphertext {
    pk.add(c1, c2)
}

pub fn scalar_mul(pk: &PublicKey, c: &Ciphertext, s: &BigUint) -> Ciphertext {
    pk.scalar_mul(c, s)
}

impl Serialize for Ciphertext {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.0.to_bytes_be()))
    }
}

impl<'de> Deserialize<'de> for Ciphertext {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(s).map_err(serde::de::Error::custom)?;
        Ok(Ciphertext::from_bytes_be(&bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::sync::OnceLock;

    fn key256() -> &'static Keypair {
        static KEY: OnceLock<Keypair> = OnceLock::new();
        KEY.get_or_init(|| keygen(256, &mut ChaCha20Rng::seed_from_u64(7)).unwrap())
    }

    #[test]
    fn modulus_has_requested_length() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for bits in [256, 512] {
            let kp = keygen(bits, &mut rng).unwrap();
            assert_eq!(kp.public.bits(), u64::from(bits));
            assert_eq!(kp.public.generator(), kp.public.modulus() + 1u32);
        }
    }

    #[test]
    fn unsupported_sizes_are_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert!(keygen(64, &mut rng).is_err());
        assert!(keygen(257, &mut rng).is_err());
    }

    #[test]
    fn zero_round_trips() {
        let kp = key256();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let c = kp.public.encrypt(&BigUint::zero(), &mut rng).unwrap();
        assert!(kp.decrypt(&c).unwrap().is_zero());
    }

    #[test]
    fn small_homomorphisms() {
        let kp = key256();
        let pk = &kp.public;
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let two = pk.encrypt(&BigUint::from(2u32), &mut rng).unwrap();
        let three = pk.encrypt(&BigUint::from(3u32), &mut rng).unwrap();
        assert_eq!(kp.decrypt(&add(pk, &two, &three)).unwrap(), BigUint::from(5u32));
        let seven = pk.encrypt(&BigUint::from(7u32), &mut rng).unwrap();
        assert!(kp.decrypt(&scalar_mul(pk, &seven, &BigUint::zero())).unwrap().is_zero());
    }

    #[test]
    fn plaintext_out_of_range_is_rejected() {
        let kp = key256();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let n = kp.public.modulus().clone();
        assert!(matches!(kp.public.encrypt(&n, &mut rng), Err(Error::Parameter(_))));
        assert!(matches!(kp.encrypt(&n, &mut rng), Err(Error::Parameter(_))));
    }

    #[test]
    fn encryption_is_probabilistic() {
        let kp = key256();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let m = BigUint::from(42u32);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..100 {
            assert!(seen.insert(kp.public.encrypt(&m, &mut rng).unwrap()));
        }
    }

    #[test]
    fn crt_and_textbook_paths_agree() {
        let kp = key256();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        for _ in 0..20 {
            let m = rng.gen_biguint_below(kp.public.modulus());
            let c = kp.encrypt(&m, &mut rng).unwrap();
            assert_eq!(kp.decrypt(&c).unwrap(), m);
            assert_eq!(kp.decrypt_textbook(&c).unwrap(), m);
        }
    }

    #[test]
    fn negative_values_round_trip() {
        let kp = key256();
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        for v in [-1i64, -2, -(1 << 62), i64::MIN + 1, 0, 1, i64::MAX] {
            let c = kp.public.encrypt_signed(v, &mut rng).unwrap();
            assert_eq!(kp.decrypt_i64(&c).unwrap(), v);
        }
        let three = kp.encrypt_signed(3, &mut rng).unwrap();
        let minus = kp.public.scalar_mul_signed(&three, -5).unwrap();
        assert_eq!(kp.decrypt_i64(&minus).unwrap(), -15);
    }

    #[test]
    fn ciphertext_bytes_round_trip() {
        let kp = key256();
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let c = kp.encrypt_signed(-9, &mut rng).unwrap();
        let back = Ciphertext::from_bytes_be(&c.to_bytes_be());
        assert_eq!(kp.decrypt_i64(&back).unwrap(), -9);
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<Ciphertext>(&json).unwrap(), c);
    }

    #[test]
    fn mismatched_keys_are_rejected() {
        let kp = key256();
        let other = keygen(256, &mut ChaCha20Rng::seed_from_u64(77)).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let c = kp.public.encrypt(&BigUint::one(), &mut rng).unwrap();
        assert!(decrypt(&other.public, kp, &c).is_err());
        assert!(kp.decrypt(&Ciphertext(BigUint::zero())).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn round_trip(seed in any::<u64>()) {
            let kp = key256();
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let m = rng.gen_biguint_below(kp.public.modulus());
            let c = encrypt(&kp.public, &m, &mut rng).unwrap();
            prop_assert_eq!(decrypt(&kp.public, kp, &c).unwrap(), m);
        }

        #[test]
        fn additive_homomorphism(seed in any::<u64>()) {
            let kp = key256();
            let pk = &kp.public;
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let a = rng.gen_biguint_below(pk.modulus());
            let b = rng.gen_biguint_below(pk.modulus());
            let s = rng.gen_biguint_below(pk.modulus());
            let ca = pk.encrypt(&a, &mut rng).unwrap();
            let cb = kp.encrypt(&b, &mut rng).unwrap();
            prop_assert_eq!(kp.decrypt(&pk.add(&ca, &cb)).unwrap(), (&a + &b) % pk.modulus());
            prop_assert_eq!(kp.decrypt(&pk.scalar_mul(&ca, &s)).unwrap(), (&a * &s) % pk.modulus());
        }

        #[test]
        fn signed_decoding_threshold(v in any::<i64>()) {
            let pk = &key256().public;
            let enc = pk.encode_signed(&BigInt::from(v));
            prop_assert_eq!(pk.decode_signed(&enc), BigInt::from(v));
        }
    }
}
