use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wdmqkd_core::channel::Direction;
use wdmqkd_core::keyrate::binary_entropy;
use wdmqkd_core::postproc::crc::{block_crc, crc32};
use wdmqkd_core::postproc::{
    cascade_reconcile, compute_final_length, crc_verify, run_postprocessing, toeplitz_hash,
    BitBlock, CascadeConfig, PostprocConfig, SessionAuthenticator, Tag, ToeplitzSeed,
    DEFAULT_SECURITY_MARGIN,
};
use wdmqkd_core::presets;
use wdmqkd_core::simkd::{simulate, RunConfig, SimChannel};

/// Bit-at-a-time reflected CRC-32 with polynomial 0xEDB88320.
fn reference_crc(bytes: &[u8]) -> u32 {
    let mut c = 0xFFFF_FFFFu32;
    for &b in bytes {
        c ^= u32::from(b);
        for _ in 0..8 {
            c = if c & 1 == 1 {
                c >> 1 ^ 0xEDB8_8320
            } else {
                c >> 1
            };
        }
    }
    !c
}

#[test]
fn crc_agrees_with_bitwise_reference() {
    assert_eq!(reference_crc(b"123456789"), 0xCBF4_3926);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for len in [0, 1, 3, 64, 1000, 4097] {
        let mut buf = vec![0u8; len];
        rng.fill_bytes(&mut buf);
        assert_eq!(crc32(&buf), reference_crc(&buf));
    }
}

#[test]
fn crc_detects_every_single_flip() {
    let n = 4096;
    let a = BitBlock::random(n, &mut ChaCha8Rng::seed_from_u64(6));
    assert!(crc_verify(&a, &a.clone()));
    let base = block_crc(&a);
    for i in 0..n {
        let mut b = a.clone();
        b.flip(i);
        assert_ne!(block_crc(&b), base, "flip at {i} undetected");
        assert!(!crc_verify(&a, &b));
    }
}

/// Rank over GF(2) of rows given as bit masks.
fn gf2_rank(mut rows: Vec<u64>) -> usize {
    let mut rank = 0;
    for bit in 0..64 {
        let Some(p) = (rank..rows.len()).find(|&r| rows[r] >> bit & 1 == 1) else {
            continue;
        };
        rows.swap(rank, p);
        for r in 0..rows.len() {
            if r != rank && rows[r] >> bit & 1 == 1 {
                rows[r] ^= rows[rank];
            }
        }
        rank += 1;
    }
    rank
}

const MSG: usize = 12;
const TAG: usize = 12;
const SEED: usize = MSG + TAG - 1;

fn hash12(x: u64, seed: u64) -> u64 {
    let s = ToeplitzSeed::new(BitBlock::from_u64(seed, SEED), MSG, TAG).unwrap();
    toeplitz_hash(&BitBlock::from_u64(x, MSG), &s)
        .unwrap()
        .words()[0]
}

/// For a one-time-padded Toeplitz tag, substituting message `m ^ d` and tag
/// `t ^ delta` succeeds with probability `P[T d = delta]` over the seed.
/// `T d` is linear in the seed, so full rank means that probability is exactly 2^-TAG.
#[test]
fn mac_forgery_bound_for_every_message_difference() {
    for d in 1u64..1 << MSG {
        // Column k of the seed-to-hash map is the hash under the k-th unit seed.
        let cols: Vec<u64> = (0..SEED).map(|k| hash12(d, 1 << k)).collect();
        let rows: Vec<u64> = (0..TAG)
            .map(|i| {
                cols.iter()
                    .enumerate()
                    .fold(0, |acc, (k, c)| acc | (c >> i & 1) << k)
            })
            .collect();
        assert_eq!(gf2_rank(rows), TAG, "difference {d:#x}");
    }
}

#[test]
fn mac_forgery_by_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..3 {
        let d = loop {
            let d = rng.next_u64() & ((1 << MSG) - 1);
            if d != 0 {
                break d;
            }
        };
        let mut hist = vec![0u32; 1 << TAG];
        for seed in 0..1u64 << SEED {
            hist[hash12(d, seed) as usize] += 1;
        }
        let best = *hist.iter().max().unwrap() as f64 / (1u64 << SEED) as f64;
        assert!(best <= 2f64.powi(-(TAG as i32)) + 1e-12, "{best}");
    }

    // The session authenticator agrees with the bare hash-plus-pad construction.
    let key = BitBlock::random(SEED + 4 * TAG, &mut rng);
    let mut a = SessionAuthenticator::new(&key, MSG, TAG).unwrap();
    let msg = BitBlock::from_u64(0x5a5, MSG);
    let tag = a.authenticate(&msg).unwrap();
    let seed = key.slice(0, SEED).words()[0];
    let pad = key.slice(SEED, SEED + TAG).words()[0];
    assert_eq!(tag.bits.words()[0], hash12(0x5a5, seed) ^ pad);

    // Exactly one of all 2^TAG tags verifies for a substituted message.
    let forged = BitBlock::from_u64(0x5a4, MSG);
    let accepted = (0..1u64 << TAG)
        .filter(|&t| {
            let mut b = SessionAuthenticator::new(&key, MSG, TAG).unwrap();
            let guess = Tag {
                segment: 1,
                bits: BitBlock::from_u64(t, TAG),
            };
            b.verify(&forged, &guess).unwrap()
        })
        .count();
    assert_eq!(accepted, 1);
}

#[test]
fn toeplitz_collisions_over_random_seeds() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (n, m) = (12usize, 6i32);
    let p = 2f64.powi(-m);
    let trials = 1000;
    let bound = p + 3.0 * (p * (1.0 - p) / trials as f64).sqrt();
    let x = BitBlock::from_u64(0x3c1, n);
    let y = BitBlock::from_u64(0x7d2, n);
    let hits = (0..trials)
        .filter(|_| {
            let s = ToeplitzSeed::random(n, m as usize, &mut rng).unwrap();
            toeplitz_hash(&x, &s).unwrap() == toeplitz_hash(&y, &s).unwrap()
        })
        .count();
    assert!(hits as f64 / trials as f64 <= bound, "{hits}");
}

#[test]
fn final_length_tracks_analytic_rate() {
    let sc = presets::scenario_1310(Direction::Co, 50.0).unwrap();
    let (_, _, rep) = sc.key_report(4.0).unwrap();
    let n = 1_000_000;
    let leak = (sc.system.f_ec * n as f64 * binary_entropy(rep.e_mu).unwrap()).ceil() as u64;
    let m = compute_final_length(n, &rep, leak, DEFAULT_SECURITY_MARGIN);
    let want = rep.r_per_pulse / (sc.protocol.sifting_factor() * rep.q_mu);
    let got = m as f64 / n as f64;
    assert!(m > 0);
    assert!((got - want).abs() / want < 0.1, "{got} vs {want}");
}

#[test]
fn leakage_matches_transcript_and_bounds_hold() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let n = 65_536;
    let a = BitBlock::random(n, &mut rng);
    let mut b = a.clone();
    for _ in 0..(n / 50) {
        b.flip(rng.next_u64() as usize % n);
    }
    let e = a.hamming_distance(&b) as f64 / n as f64;
    let out = cascade_reconcile(&a, &b, e, &CascadeConfig::default()).unwrap();
    assert_eq!(out.transcript.len() as u64, out.leakage_bits);
    assert_eq!(out.corrected, a);
    let eff = out.leakage_bits as f64 / (n as f64 * binary_entropy(e).unwrap());
    assert!(eff > 1.0 && eff <= 1.45, "{eff}");
}

#[test]
fn simulated_sessions_end_with_identical_keys() {
    let sc = presets::scenario_1310(Direction::Co, 50.0).unwrap();
    let (_, _, rep) = sc.key_report(4.0).unwrap();
    let channel = SimChannel::from_scenario(&sc, 4.0).unwrap();
    for seed in 0..3u64 {
        let sim = simulate(&RunConfig {
            n_pulses: 10_000_000,
            seed,
            channel: channel.clone(),
        })
        .unwrap();
        let pair = &sim.pair;
        let cfg = PostprocConfig {
            seed: seed + 100,
            ..PostprocConfig::default()
        };
        let out = run_postprocessing(
            &pair.alice_bits,
            &pair.bob_bits,
            sim.observables.e_mu,
            &rep,
            &cfg,
        )
        .unwrap();
        assert!(out.alice.verified);
        assert!(
            out.alice.m > 0,
            "m = 0 for {} sifted bits",
            pair.alice_bits.len()
        );
        assert_eq!(out.alice.key, out.bob.key);
        assert_eq!(out.alice.key.len(), out.alice.m);
        assert_eq!(out.residual_errors, 0);
        let again = run_postprocessing(
            &pair.alice_bits,
            &pair.bob_bits,
            sim.observables.e_mu,
            &rep,
            &cfg,
        )
        .unwrap();
        assert_eq!(again, out);
    }
}

#[test]
fn zero_input_hashes_to_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let s = ToeplitzSeed::random(500, 200, &mut rng).unwrap();
    assert_eq!(
        toeplitz_hash(&BitBlock::zeros(500), &s)
            .unwrap()
            .count_ones(),
        0
    );
}
