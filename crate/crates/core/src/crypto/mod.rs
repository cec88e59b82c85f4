//! AES-GCM and AES-CTR with two interchangeable backends.
//!
//! [`BackendKind::SoftwarePortable`] is a self-contained bitsliced AES with a
//! constant-time GHASH. [`BackendKind::HardwareAccelerated`] delegates to the
//! RustCrypto `aes`/`aes-gcm`/`ctr` crates, which select AES-NI (or the ARMv8
//! crypto extensions) at runtime. Both produce bit-identical output.

mod bench;
mod soft;

use std::collections::BTreeSet;
use std::fmt;

use aes::cipher::{KeyIvInit, StreamCipher};
use aes_gcm::aead::AeadInPlace;
use aes_gcm::{Aes128Gcm, Aes256Gcm, KeyInit};
use serde::{Deserialize, Serialize};

pub use bench::{bench_throughput, CipherMode};
use soft::{Ghash, SoftAes};

pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("invalid AES key length {0} (expected 16 or 32)")]
    KeyLength(usize),
    #[error("authentication failed")]
    Authentication,
    #[error("backend {0} is not available on this host")]
    BackendUnavailable(BackendKind),
    #[error("invalid benchmark parameters: {0}")]
    InvalidParameters(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BackendKind {
    SoftwarePortable,
    HardwareAccelerated,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendKind::SoftwarePortable => f.write_str("software"),
            BackendKind::HardwareAccelerated => f.write_str("hardware"),
        }
    }
}

/// Reports whether the CPU exposes AES instructions.
pub fn hardware_aes_available() -> bool {
    #[cfg(any(target_arch = "x86", target_arch = "x86_64"))]
    {
        std::arch::is_x86_feature_detected!("aes")
    }
    #[cfg(target_arch = "aarch64")]
    {
        std::arch::is_aarch64_feature_detected!("aes")
    }
    #[cfg(not(any(target_arch = "x86", target_arch = "x86_64", target_arch = "aarch64")))]
    {
        false
    }
}

/// Backends usable on this host. Always contains the software path.
pub fn detect_backends() -> BTreeSet<BackendKind> {
    let mut set = BTreeSet::from([BackendKind::SoftwarePortable]);
    if hardware_aes_available() {
        set.insert(BackendKind::HardwareAccelerated);
    }
    set
}

/// Hardware when the CPU supports it, otherwise the portable backend.
pub fn best_backend() -> BackendKind {
    if hardware_aes_available() {
        BackendKind::HardwareAccelerated
    } else {
        BackendKind::SoftwarePortable
    }
}

/// AES-128 or AES-256 key material.
#[derive(Clone, PartialEq, Eq)]
pub struct AesKey(Vec<u8>);

impl AesKey {
    pub fn new(bytes: &[u8]) -> Result<Self, CryptoError> {
        match bytes.len() {
            16 | 32 => Ok(Self(bytes.to_vec())),
            n => Err(CryptoError::KeyLength(n)),
        }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl fmt::Debug for AesKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AesKey(<{} bytes>)", self.0.len())
    }
}

/// Output of a GCM seal: `|ciphertext| == |plaintext|`, 16-byte tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GcmSealed {
    pub nonce: [u8; NONCE_LEN],
    pub ciphertext: Vec<u8>,
    pub tag: [u8; TAG_LEN],
}

#[derive(Clone)]
enum Engine {
    Soft(SoftAes),
    Hw128(Box<Aes128Gcm>),
    Hw256(Box<Aes256Gcm>),
}

/// A key expanded for one backend; cheap to reuse across many modules.
#[derive(Clone)]
pub struct Cipher {
    backend: BackendKind,
    key: AesKey,
    engine: Engine,
}

type Ctr128<C> = ctr::Ctr128BE<C>;

fn inc32(block: &mut [u8; 16]) {
    let c = u32::from_be_bytes(block[12..].try_into().unwrap()).wrapping_add(1);
    block[12..].copy_from_slice(&c.to_be_bytes());
}

fn inc128(block: &mut [u8; 16]) {
    let c = u128::from_be_bytes(*block).wrapping_add(1);
    *block = c.to_be_bytes();
}

fn ct_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

impl Cipher {
    pub fn new(backend: BackendKind, key: &AesKey) -> Result<Self, CryptoError> {
        let engine = match backend {
            BackendKind::SoftwarePortable => Engine::Soft(SoftAes::new(key.as_bytes())),
            BackendKind::HardwareAccelerated => {
                if !hardware_aes_available() {
                    return Err(CryptoError::BackendUnavailable(backend));
                }
                let k = key.as_bytes();
                match k.len() {
                    16 => Engine::Hw128(Box::new(
                        Aes128Gcm::new_from_slice(k)
                            .map_err(|_| CryptoError::KeyLength(k.len()))?,
                    )),
                    _ => Engine::Hw256(Box::new(
                        Aes256Gcm::new_from_slice(k)
                            .map_err(|_| CryptoError::KeyLength(k.len()))?,
                    )),
                }
            }
        };
        Ok(Self {
            backend,
            key: key.clone(),
            engine,
        })
    }

    pub fn backend(&self) -> BackendKind {
        self.backend
    }

    pub fn key(&self) -> &AesKey {
        &self.key
    }

    pub fn seal(&self, nonce: &[u8; NONCE_LEN], aad: &[u8], plaintext: &[u8]) -> GcmSealed {
        let mut buf = plaintext.to_vec();
        let tag = self.seal_in_place(nonce, aad, &mut buf);
        GcmSealed {
            nonce: *nonce,
            ciphertext: buf,
            tag,
        }
    }

    pub fn seal_in_place(
        &self,
        nonce: &[u8; NONCE_LEN],
        aad: &[u8],
        buf: &mut [u8],
    ) -> [u8; TAG_LEN] {
        match &self.engine {
            Engine::Soft(aes) => {
                let (mut j0, h) = soft_gcm_init(aes, nonce);
                let mut ctr = j0;
                inc32(&mut ctr);
                aes.apply_keystream(&mut ctr, buf, inc32);
                let mut g = Ghash::new(&h);
                g.update_padded(aad);
                g.update_padded(buf);
                let s = g.finalize(aad.len(), buf.len());
                let ek = aes.encrypt_block(&j0);
                for (j, (s, e)) in j0.iter_mut().zip(s.iter().zip(ek)) {
                    *j = s ^ e;
                }
                j0
            }
            Engine::Hw128(gcm) => gcm
                .encrypt_in_place_detached(nonce.into(), aad, buf)
                .expect("GCM input within length limits")
                .into(),
            Engine::Hw256(gcm) => gcm
                .encrypt_in_place_detached(nonce.into(), aad, buf)
                .expect("GCM input within length limits")
                .into(),
        }
    }

    pub fn open(&self, aad: &[u8], sealed: &GcmSealed) -> Result<Vec<u8>, CryptoError> {
        let mut buf = sealed.ciphertext.clone();
        self.open_in_place(&sealed.nonce, aad, &mut buf, &sealed.tag)?;
        Ok(buf)
    }

    /// Decrypts in place. On failure the buffer is wiped so no unauthenticated
    /// plaintext escapes.
    pub fn open_in_place(
        &self,
        nonce: &[u8; NONCE_LEN],
        aad: &[u8],
        buf: &mut [u8],
        tag: &[u8; TAG_LEN],
    ) -> Result<(), CryptoError> {
        let ok = match &self.engine {
            Engine::Soft(aes) => {
                let (j0, h) = soft_gcm_init(aes, nonce);
                let mut g = Ghash::new(&h);
                g.update_padded(aad);
                g.update_padded(buf);
                let s = g.finalize(aad.len(), buf.len());
                let ek = aes.encrypt_block(&j0);
                let expected: Vec<u8> = s.iter().zip(ek).map(|(a, b)| a ^ b).collect();
                if ct_eq(&expected, tag) {
                    let mut ctr = j0;
                    inc32(&mut ctr);
                    aes.apply_keystream(&mut ctr, buf, inc32);
                    true
                } else {
                    false
                }
            }
            Engine::Hw128(gcm) => gcm
                .decrypt_in_place_detached(nonce.into(), aad, buf, tag.into())
                .is_ok(),
            Engine::Hw256(gcm) => gcm
                .decrypt_in_place_detached(nonce.into(), aad, buf, tag.into())
                .is_ok(),
        };
        if ok {
            Ok(())
        } else {
            buf.fill(0);
            Err(CryptoError::Authentication)
        }
    }

    /// AES-CTR with a full 128-bit big-endian counter.
    pub fn ctr_in_place(&self, counter: &[u8; 16], buf: &mut [u8]) {
        match &self.engine {
            Engine::Soft(aes) => {
                let mut ctr = *counter;
                aes.apply_keystream(&mut ctr, buf, inc128);
            }
            Engine::Hw128(_) => {
                Ctr128::<aes::Aes128>::new(self.key.as_bytes().into(), counter.into())
                    .apply_keystream(buf);
            }
            Engine::Hw256(_) => {
                Ctr128::<aes::Aes256>::new(self.key.as_bytes().into(), counter.into())
                    .apply_keystream(buf);
            }
        }
    }
}

fn soft_gcm_init(aes: &SoftAes, nonce: &[u8; NONCE_LEN]) -> ([u8; 16], [u8; 16]) {
    let h = aes.encrypt_block(&[0u8; 16]);
    let mut j0 = [0u8; 16];
    j0[..NONCE_LEN].copy_from_slice(nonce);
    j0[15] = 1;
    (j0, h)
}

pub fn gcm_seal(
    backend: BackendKind,
    key: &AesKey,
    nonce: &[u8; NONCE_LEN],
    aad: &[u8],
    plaintext: &[u8],
) -> Result<GcmSealed, CryptoError> {
    Ok(Cipher::new(backend, key)?.seal(nonce, aad, plaintext))
}

pub fn gcm_open(
    backend: BackendKind,
    key: &AesKey,
    aad: &[u8],
    sealed: &GcmSealed,
) -> Result<Vec<u8>, CryptoError> {
    Cipher::new(backend, key)?.open(aad, sealed)
}

pub fn ctr_transform(
    backend: BackendKind,
    key: &AesKey,
    counter: &[u8; 16],
    data: &[u8],
) -> Result<Vec<u8>, CryptoError> {
    let mut out = data.to_vec();
    Cipher::new(backend, key)?.ctr_in_place(counter, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key16() -> AesKey {
        AesKey::new(&[7u8; 16]).unwrap()
    }

    #[test]
    fn key_length_validation() {
        assert_eq!(
            AesKey::new(&[0; 24]).unwrap_err(),
            CryptoError::KeyLength(24)
        );
        assert_eq!(AesKey::new(&[]).unwrap_err(), CryptoError::KeyLength(0));
        assert!(AesKey::new(&[0; 32]).is_ok());
    }

    #[test]
    fn software_always_detected_and_probe_is_stable() {
        let a = detect_backends();
        assert!(a.contains(&BackendKind::SoftwarePortable));
        assert_eq!(
            a.contains(&BackendKind::HardwareAccelerated),
            hardware_aes_available()
        );
        assert_eq!(a, detect_backends());
    }

    #[test]
    fn empty_seal_is_tag_only() {
        for backend in detect_backends() {
            let s = gcm_seal(backend, &key16(), &[0; 12], b"", b"").unwrap();
            assert!(s.ciphertext.is_empty());
            assert_eq!(s.tag.len(), TAG_LEN);
        }
    }

    #[test]
    fn tampered_tag_and_wrong_aad_rejected() {
        for backend in detect_backends() {
            let s = gcm_seal(backend, &key16(), &[1; 12], b"hdr", b"payload bytes").unwrap();
            let mut bad = s.clone();
            bad.tag[3] ^= 0x10;
            assert_eq!(
                gcm_open(backend, &key16(), b"hdr", &bad),
                Err(CryptoError::Authentication)
            );
            assert_eq!(
                gcm_open(backend, &key16(), b"hdx", &s),
                Err(CryptoError::Authentication)
            );
        }
    }

    #[test]
    fn failed_open_wipes_buffer() {
        let c = Cipher::new(BackendKind::SoftwarePortable, &key16()).unwrap();
        let s = c.seal(&[2; 12], b"", b"secret!");
        let mut buf = s.ciphertext.clone();
        let mut tag = s.tag;
        tag[0] ^= 1;
        assert!(c.open_in_place(&s.nonce, b"", &mut buf, &tag).is_err());
        assert!(buf.iter().all(|&b| b == 0));
    }

    #[test]
    fn ctr_empty_is_empty() {
        for backend in detect_backends() {
            assert!(ctr_transform(backend, &key16(), &[0; 16], b"")
                .unwrap()
                .is_empty());
        }
    }

    #[test]
    fn ctr_counter_wraps_full_width() {
        let ctr = [0xff; 16];
        let data = vec![0u8; 48];
        let a = ctr_transform(BackendKind::SoftwarePortable, &key16(), &ctr, &data).unwrap();
        let aes = SoftAes::new(key16().as_bytes());
        assert_eq!(a[16..32], aes.encrypt_block(&[0; 16]));
    }
}
