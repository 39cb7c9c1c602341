//! Seeded circularly-symmetric Gaussian noise.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::Real;
use crate::waveform::IqSignal;

/// 64-bit FNV-1a, used to turn radar ids into RNG stream numbers that do
/// not depend on scene ordering or the platform hasher.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// RNG for receiver `index` of the radar `key` under scene seed `seed`.
pub fn noise_rng(seed: u64, key: &str, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(key.as_bytes()).wrapping_add(index));
    rng
}

/// Adds complex noise of total power `noise_power` per sample.
pub fn add_noise_power<T: Real>(samples: &mut [Complex<T>], noise_power: f64, rng: &mut ChaCha8Rng) {
    if noise_power <= 0.0 {
        return;
    }
    let sigma = (noise_power / 2.0).sqrt();
    for z in samples.iter_mut() {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *z = *z + Complex::new(T::lit(sigma * re), T::lit(sigma * im));
    }
}

/// Adds noise so that mean signal power over noise power equals
/// `10^(snr_db / 10)`. `snr_db = +inf` returns the input unchanged.
pub fn add_noise<T: Real>(sig: &IqSignal<T>, snr_db: f64, seed: u64) -> IqSignal<T> {
    let mut out = sig.clone();
    if snr_db == f64::INFINITY {
        return out;
    }
    let noise_power = sig.mean_power() / 10f64.powf(snr_db / 10.0);
    add_noise_power(out.samples_mut(), noise_power, &mut noise_rng(seed, "", 0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(n: usize) -> IqSignal<f64> {
        let s = (0..n).map(|i| Complex::from_polar(2.0, 0.01 * i as f64)).collect();
        IqSignal::new(s, 1e6, 0.0).unwrap()
    }

    #[test]
    fn infinite_snr_is_identity() {
        let sig = tone(64);
        assert_eq!(add_noise(&sig, f64::INFINITY, 3), sig);
    }

    #[test]
    fn measured_snr_matches_request() {
        let sig = tone(1 << 20);
        for snr in [-10.0, 0.0, 13.0] {
            let noisy = add_noise(&sig, snr, 11);
            let noise_energy: f64 = noisy
                .samples()
                .iter()
                .zip(sig.samples())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum();
            let measured = 10.0 * (sig.energy() / noise_energy).log10();
            assert!((measured - snr).abs() < 0.5, "{measured} vs {snr}");
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let sig = tone(1000);
        assert_eq!(add_noise(&sig, 5.0, 42), add_noise(&sig, 5.0, 42));
        assert_ne!(add_noise(&sig, 5.0, 42), add_noise(&sig, 5.0, 43));
    }

    #[test]
    fn streams_differ_per_radar() {
        let mut a = vec![Complex::new(0.0f64, 0.0); 8];
        let mut b = a.clone();
        add_noise_power(&mut a, 1.0, &mut noise_rng(1, "radar-a", 0));
        add_noise_power(&mut b, 1.0, &mut noise_rng(1, "radar-b", 0));
        assert_ne!(a, b);
    }
}
