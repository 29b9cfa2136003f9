//! Seeded synthetic transaction worlds.
//!
//! Benign contracts draw customers from a pool of EOAs under a Zipf-like
//! popularity law and pay part of the inflow back to those customers. Each
//! scam contract harvests one small transfer from each of `scam_fan_in`
//! fresh EOAs and forwards the takings in at most two transfers to a
//! collector. Every fresh funder also makes one ordinary transfer to one of
//! the largest benign venues so it survives degree-2 pruning.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{self, Address, IngestError, KindMap, LabelMap, NodeKind, TxRecord};

pub const START_TIMESTAMP: u64 = 1_577_836_800;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    Config(String),
    #[error(transparent)]
    Write(#[from] IngestError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_eoa: usize,
    pub n_contract: usize,
    pub n_scam: usize,
    /// Mean number of ordinary transfers sent by each pooled EOA.
    pub background_tx_per_eoa: f64,
    pub scam_fan_in: usize,
    pub value_log10_mean: f64,
    pub value_log10_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_eoa: 2000,
            n_contract: 300,
            n_scam: 15,
            background_tx_per_eoa: 3.0,
            scam_fan_in: 20,
            value_log10_mean: 17.0,
            value_log10_std: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Config(m.to_string()));
        if self.n_eoa == 0 || self.n_contract == 0 || self.n_scam == 0 || self.scam_fan_in == 0 {
            return bad("all counts must be positive");
        }
        if self.n_scam >= self.n_contract {
            return bad("n_scam must be smaller than n_contract");
        }
        if self.n_eoa < 2 {
            return bad("n_eoa must be at least 2");
        }
        if !(self.background_tx_per_eoa > 0.0) || !self.background_tx_per_eoa.is_finite() {
            return bad("background_tx_per_eoa must be positive");
        }
        if !(self.value_log10_std >= 0.0) || !(0.0..=37.0).contains(&self.value_log10_mean) {
            return bad("value_log10_mean must lie in [0, 37] and value_log10_std be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthWorld {
    pub transactions: Vec<TxRecord>,
    pub kinds: KindMap,
    pub labels: LabelMap,
}

impl SynthWorld {
    /// Writes `transactions.csv`, `kinds.csv` and `labels.csv` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<(), SynthError> {
        std::fs::create_dir_all(dir)?;
        ingest::write_transactions(&self.transactions, BufWriter::new(File::create(dir.join("transactions.csv"))?))?;
        ingest::write_kinds(&self.kinds, BufWriter::new(File::create(dir.join("kinds.csv"))?))?;
        ingest::write_labels(&self.labels, BufWriter::new(File::create(dir.join("labels.csv"))?))?;
        Ok(())
    }
}

struct World {
    rng: ChaCha8Rng,
    used: BTreeSet<Address>,
    txs: Vec<TxRecord>,
    clock: u64,
    value: Normal<f64>,
}

impl World {
    fn fresh_address(&mut self) -> Address {
        loop {
            let mut bytes = [0u8; 20];
            self.rng.fill(&mut bytes);
            let a = Address(bytes);
            if self.used.insert(a) {
                return a;
            }
        }
    }

    fn wei(&mut self, shift: f64) -> u128 {
        let exp = (self.value.sample(&mut self.rng) + shift).clamp(0.0, 37.0);
        10f64.powf(exp).round() as u128
    }

    fn send(&mut self, from: Address, to: Address, value_wei: u128) {
        self.clock += self.rng.gen_range(1..=600);
        self.txs.push(TxRecord { from_address: from, to_address: to, value_wei, timestamp: self.clock });
    }
}

fn zipf_weights(n: usize) -> Vec<f64> {
    (1..=n).map(|r| 1.0 / r as f64).collect()
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthWorld, SynthError> {
    cfg.validate()?;
    let value =
        Normal::new(cfg.value_log10_mean, cfg.value_log10_std).map_err(|e| SynthError::Config(e.to_string()))?;
    let mut w = World {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        used: BTreeSet::new(),
        txs: Vec::new(),
        clock: START_TIMESTAMP,
        value,
    };

    let eoas: Vec<Address> = (0..cfg.n_eoa).map(|_| w.fresh_address()).collect();
    let contracts: Vec<Address> = (0..cfg.n_contract).map(|_| w.fresh_address()).collect();
    let scam_idx: BTreeSet<usize> = sample(&mut w.rng, cfg.n_contract, cfg.n_scam).into_iter().collect();
    let benign: Vec<Address> = (0..cfg.n_contract).filter(|i| !scam_idx.contains(i)).map(|i| contracts[i]).collect();
    let scams: Vec<Address> = scam_idx.iter().map(|&i| contracts[i]).collect();

    let eoa_pick = WeightedIndex::new(zipf_weights(eoas.len())).expect("positive weights");
    let benign_pick = WeightedIndex::new(zipf_weights(benign.len())).expect("positive weights");
    // Funders' ordinary transfers go to the largest venues.
    let venue_pick = WeightedIndex::new(zipf_weights(benign.len()).iter().map(|w| w * w)).expect("positive weights");
    let tx_count = Poisson::new(cfg.background_tx_per_eoa).map_err(|e| SynthError::Config(e.to_string()))?;

    // Incoming senders per benign contract, for payouts.
    let mut senders: Vec<Vec<Address>> = vec![Vec::new(); benign.len()];

    // Every benign contract gets two baseline customers.
    for (ci, &c) in benign.iter().enumerate() {
        for _ in 0..2 {
            let e = eoas[eoa_pick.sample(&mut w.rng)];
            let v = w.wei(0.0);
            w.send(e, c, v);
            senders[ci].push(e);
        }
    }

    for &e in &eoas {
        let n = (tx_count.sample(&mut w.rng) as usize).max(1);
        for _ in 0..n {
            if w.rng.gen_bool(0.6) {
                let ci = benign_pick.sample(&mut w.rng);
                let v = w.wei(0.0);
                w.send(e, benign[ci], v);
                senders[ci].push(e);
            } else {
                let mut to = eoas[eoa_pick.sample(&mut w.rng)];
                if to == e {
                    to = eoas[w.rng.gen_range(0..eoas.len())];
                }
                let v = w.wei(0.0);
                w.send(e, to, v);
            }
        }
    }

    for (ci, &c) in benign.iter().enumerate() {
        let payouts = senders[ci].len().div_ceil(2);
        for _ in 0..payouts {
            let to = senders[ci][w.rng.gen_range(0..senders[ci].len())];
            let v = w.wei(-0.5);
            w.send(c, to, v);
        }
    }

    for &s in &scams {
        for _ in 0..cfg.scam_fan_in {
            let funder = w.fresh_address();
            let v = w.wei(-1.0);
            w.send(funder, s, v);
            let v = w.wei(0.0);
            let to = benign[venue_pick.sample(&mut w.rng)];
            w.send(funder, to, v);
        }
        let collector = w.fresh_address();
        let outs = w.rng.gen_range(1..=2);
        for _ in 0..outs {
            let v = w.wei(0.5);
            w.send(s, collector, v);
        }
        let cash_out = eoas[eoa_pick.sample(&mut w.rng)];
        let v = w.wei(0.5);
        w.send(collector, cash_out, v);
    }

    let mut kinds = KindMap::new();
    for &e in &eoas {
        kinds.insert(e, NodeKind::Eoa);
    }
    for &c in &contracts {
        kinds.insert(c, NodeKind::Contract);
    }
    let labels: LabelMap = contracts.iter().enumerate().map(|(i, &c)| (c, u8::from(scam_idx.contains(&i)))).collect();
    Ok(SynthWorld { transactions: w.txs, kinds, labels })
}
