//! Pulse-level Monte Carlo of decoy-state BB84 with gated detectors.
//!
//! Pulse `i` draws its randomness from ChaCha8 keystream words
//! `[16 i, 16 i + 16)` of the run seed, so any sharding of the pulse range
//! reproduces the serial run bit for bit. Shards only produce candidate
//! clicks; dead time is applied afterwards in one ordered pass.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{config, Error, Result};
use crate::keyrate::{
    fluctuation_adjust_counts, secure_key_rate, ChannelObservables, DecoyProtocol, KeyRateReport,
    QkdSystemSpec,
};
use crate::planner::Scenario;
use crate::postproc::BitBlock;

const WORDS_PER_PULSE: u128 = 16;
const SHARD_PULSES: u64 = 1 << 20;

/// Link physics seen by the simulator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimChannel {
    pub protocol: DecoyProtocol,
    /// Overall signal transmittance including detector efficiency.
    pub eta: f64,
    /// Background click probability per gate, split evenly over both detectors.
    pub y0: f64,
    pub e_opt: f64,
    /// Gates blanked after each registered click.
    pub dead_gates: u64,
}

impl SimChannel {
    pub fn from_scenario(scenario: &Scenario, power_dbm: f64) -> Result<Self> {
        Ok(SimChannel {
            protocol: scenario.protocol.clone(),
            eta: scenario.signal_eta()?,
            y0: scenario.background_yield(power_dbm)?,
            e_opt: scenario.system.e_opt,
            dead_gates: scenario.detector.dead_gates(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.protocol.validate()?;
        if !(0.0..=1.0).contains(&self.eta) || !(0.0..1.0).contains(&self.y0) {
            return Err(config("simulated eta must be in [0, 1] and y0 in [0, 1)"));
        }
        if !(0.0..=0.5).contains(&self.e_opt) {
            return Err(config("simulated e_opt must be in [0, 0.5]"));
        }
        Ok(())
    }

    pub fn intensities(&self) -> [f64; 3] {
        [self.protocol.mu, self.protocol.nu, 0.0]
    }

    pub fn probabilities(&self) -> [f64; 3] {
        let p = &self.protocol;
        [p.p_signal, p.p_decoy, p.p_vacuum]
    }

    /// Per-detector background probability giving total background `y0`.
    pub fn dark_per_detector(&self) -> f64 {
        1.0 - (1.0 - self.y0).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub n_pulses: u64,
    pub seed: u64,
    pub channel: SimChannel,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IntensityTally {
    pub sent: u64,
    pub detected: u64,
    /// Registered detections with matching bases.
    pub sifted: u64,
    /// Sifted detections where Bob's bit differs from Alice's.
    pub errors: u64,
}

impl std::ops::AddAssign for IntensityTally {
    fn add_assign(&mut self, o: Self) {
        self.sent += o.sent;
        self.detected += o.detected;
        self.sifted += o.sifted;
        self.errors += o.errors;
    }
}

/// Sifted signal-state bits of both parties plus tallies for signal, decoy, vacuum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiftedKeyPair {
    pub alice_bits: BitBlock,
    pub bob_bits: BitBlock,
    pub tallies: [IntensityTally; 3],
}

impl SiftedKeyPair {
    pub fn n_pulses(&self) -> u64 {
        self.tallies.iter().map(|t| t.sent).sum()
    }

    pub fn detections(&self) -> u64 {
        self.tallies.iter().map(|t| t.detected).sum()
    }

    pub fn observables(&self, eta: f64) -> ChannelObservables {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let [s, d, v] = self.tallies;
        let e = |t: IntensityTally| {
            if t.sifted == 0 {
                0.5
            } else {
                ratio(t.errors, t.sifted)
            }
        };
        let y0 = ratio(v.detected, v.sent);
        ChannelObservables {
            q_mu: ratio(s.detected, s.sent),
            q_nu: ratio(d.detected, d.sent),
            e_mu: e(s),
            e_nu: e(d),
            y0,
            y0_lower: y0,
            eta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOutput {
    pub pair: SiftedKeyPair,
    pub observables: ChannelObservables,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    index: u64,
    intensity: u8,
    matched: bool,
    alice_bit: bool,
    bob_bit: bool,
}

struct Shard {
    sent: [u64; 3],
    clicks: Vec<Candidate>,
}

fn threshold(p: f64) -> u64 {
    // Compared against 53-bit uniforms.
    (p.clamp(0.0, 1.0) * (1u64 << 53) as f64) as u64
}

struct Thresholds {
    intensity: [u64; 2],
    signal: [u64; 3],
    dark: u64,
    flip: u64,
    matched: u64,
}

impl Thresholds {
    fn new(ch: &SimChannel) -> Self {
        let [ps, pd, _] = ch.probabilities();
        let mu = ch.intensities();
        Thresholds {
            intensity: [threshold(ps), threshold(ps + pd)],
            signal: mu.map(|x| threshold(-(-ch.eta * x).exp_m1())),
            dark: threshold(ch.dark_per_detector()),
            flip: threshold(ch.e_opt),
            matched: threshold(ch.protocol.basis_match_prob),
        }
    }
}

fn run_shard(seed: u64, start: u64, end: u64, th: &Thresholds) -> Shard {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(u128::from(start) * WORDS_PER_PULSE);
    let mut sent = [0u64; 3];
    let mut clicks = Vec::new();
    for index in start..end {
        let w: [u32; 16] = std::array::from_fn(|_| rng.next_u32());
        let u = |k: usize| (u64::from(w[2 * k]) << 32 | u64::from(w[2 * k + 1])) >> 11;
        let x = if u(0) < th.intensity[0] {
            0
        } else if u(0) < th.intensity[1] {
            1
        } else {
            2
        };
        sent[x] += 1;
        let signal = u(1) < th.signal[x];
        let dark = [u(2) < th.dark, u(3) < th.dark];
        if !(signal || dark[0] || dark[1]) {
            continue;
        }
        let matched = u(6) < th.matched;
        let alice_bit = w[14] & 1 == 1;
        let target = if matched {
            alice_bit ^ (u(4) < th.flip)
        } else {
            w[14] & 2 == 2
        };
        let click = [
            dark[0] || (signal && !target),
            dark[1] || (signal && target),
        ];
        let bob_bit = match click {
            [true, true] => u(5) < (1u64 << 52),
            [false, true] => true,
            _ => false,
        };
        clicks.push(Candidate {
            index,
            intensity: x as u8,
            matched,
            alice_bit,
            bob_bit,
        });
    }
    Shard { sent, clicks }
}

/// Runs `config.n_pulses` pulses and returns the sifted key pair and its observables.
pub fn simulate(config: &RunConfig) -> Result<SimOutput> {
    if config.n_pulses == 0 {
        return Err(crate::error::config("n_pulses must be at least 1"));
    }
    config.channel.validate()?;
    let th = Thresholds::new(&config.channel);
    let n_shards = config.n_pulses.div_ceil(SHARD_PULSES);
    let shards: Vec<Shard> = (0..n_shards)
        .into_par_iter()
        .map(|s| {
            let start = s * SHARD_PULSES;
            let end = (start + SHARD_PULSES).min(config.n_pulses);
            run_shard(config.seed, start, end, &th)
        })
        .collect();

    let mut tallies = [IntensityTally::default(); 3];
    let mut alice = Vec::new();
    let mut bob = Vec::new();
    let dead = config.channel.dead_gates;
    let mut next_live = 0u64;
    for shard in &shards {
        for (t, &n) in tallies.iter_mut().zip(&shard.sent) {
            t.sent += n;
        }
        for c in &shard.clicks {
            if c.index < next_live {
                continue;
            }
            next_live = c.index + 1 + dead;
            let t = &mut tallies[c.intensity as usize];
            t.detected += 1;
            if c.matched {
                t.sifted += 1;
                t.errors += u64::from(c.alice_bit != c.bob_bit);
                if c.intensity == 0 {
                    alice.push(c.alice_bit);
                    bob.push(c.bob_bit);
                }
            }
        }
    }
    let pair = SiftedKeyPair {
        alice_bits: BitBlock::from_bools(&alice),
        bob_bits: BitBlock::from_bools(&bob),
        tallies,
    };
    let observables = pair.observables(config.channel.eta);
    Ok(SimOutput { pair, observables })
}

/// Empirical decoy analysis with fluctuations sized by the pulses actually sent.
pub fn empirical_keyrate(
    pair: &SiftedKeyPair,
    eta: f64,
    proto: &DecoyProtocol,
    spec: &QkdSystemSpec,
) -> Result<KeyRateReport> {
    let [s, d, v] = pair.tallies;
    if s.detected == 0 || d.detected == 0 {
        return Err(Error::EstimationFailed(
            "no signal or decoy detections recorded".into(),
        ));
    }
    let obs = pair.observables(eta);
    let counts = [s.sent as f64, d.sent as f64, v.sent as f64];
    let adjusted = fluctuation_adjust_counts(&obs, counts, spec.n_sigma);
    let mut report = secure_key_rate(&adjusted, proto, spec)?;
    report.insufficient_block = pair.detections() < spec.block_size;
    Ok(report)
}

/// Analytic expectation of the simulated observables, including the
/// fraction of gates left live by dead time.
pub fn expected_observables(ch: &SimChannel) -> Result<ChannelObservables> {
    let mut obs = crate::keyrate::model_observables(&ch.protocol, ch.eta, ch.y0, ch.e_opt)?;
    let [ps, pd, pv] = ch.probabilities();
    let q_avg = ps * obs.q_mu + pd * obs.q_nu + pv * ch.y0;
    let live = 1.0 / (1.0 + ch.dead_gates as f64 * q_avg);
    obs.q_mu *= live;
    obs.q_nu *= live;
    obs.y0 *= live;
    obs.y0_lower = obs.y0;
    Ok(obs)
}
