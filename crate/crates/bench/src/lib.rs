//! Shared fixtures for the benchmarks.

use liqlab_core::tickdata::write_tape;
use liqlab_core::{SynthConfig, TickRecord};

/// A synthetic tape of roughly `days * tickers * 25 * 390` records.
pub fn fixture_tape(days: u32, tickers: usize) -> Vec<TickRecord> {
    let config = SynthConfig {
        seed: 7,
        days,
        tickers: (0..tickers).map(|i| format!("T{i}")).collect(),
        signal_strength: 0.5,
        ..SynthConfig::default()
    };
    liqlab_core::synth::generate(&config).expect("fixture config is valid")
}

pub fn fixture_csv(records: &[TickRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_tape(&mut buf, records).expect("in-memory write");
    buf
}
