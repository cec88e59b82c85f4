use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AesKey, BackendKind, Cipher, CryptoError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CipherMode {
    Gcm,
    Ctr,
}

const BENCH_SEED: u64 = 0x05ee_dae5;

/// Mean encryption throughput in bytes per second over `iterations` passes,
/// after one untimed warm-up pass. Buffers are seeded pseudorandom bytes.
pub fn bench_throughput(
    backend: BackendKind,
    mode: CipherMode,
    buffer_bytes: usize,
    iterations: usize,
) -> Result<f64, CryptoError> {
    if buffer_bytes == 0 {
        return Err(CryptoError::InvalidParameters(
            "buffer_bytes must be at least 1",
        ));
    }
    if iterations == 0 {
        return Err(CryptoError::InvalidParameters(
            "iterations must be at least 1",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(BENCH_SEED);
    let mut key = [0u8; 16];
    rng.fill_bytes(&mut key);
    let cipher = Cipher::new(backend, &AesKey::new(&key)?)?;
    let mut buf = vec![0u8; buffer_bytes];
    rng.fill_bytes(&mut buf);

    let mut nonce = [0u8; 12];
    let mut pass = |i: u64| {
        nonce[4..].copy_from_slice(&i.to_le_bytes());
        match mode {
            CipherMode::Gcm => {
                std::hint::black_box(cipher.seal_in_place(&nonce, b"", &mut buf));
            }
            CipherMode::Ctr => {
                let mut ctr = [0u8; 16];
                ctr[..12].copy_from_slice(&nonce);
                cipher.ctr_in_place(&ctr, &mut buf);
            }
        }
        std::hint::black_box(&buf);
    };

    pass(0);
    let start = Instant::now();
    for i in 1..=iterations as u64 {
        pass(i);
    }
    let secs = start.elapsed().as_secs_f64().max(1e-9);
    Ok((buffer_bytes * iterations) as f64 / secs)
}
