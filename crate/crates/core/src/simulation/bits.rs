//! Communication accounting.
//!
//! A sparse message costs its nonzero coordinates times (value bits + index
//! bits). Ternary values need one bit (the sign), dense floats 32. A dense
//! downlink broadcast is charged `32·d` regardless of sparsity.

use crate::params::{GradientVector, TernaryVector};

/// A worker upload or a server broadcast.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Ternary(TernaryVector),
    Dense(GradientVector),
}

impl Message {
    pub fn dim(&self) -> usize {
        match self {
            Message::Ternary(z) => z.dim(),
            Message::Dense(g) => g.dim(),
        }
    }

    pub fn to_reals(&self) -> Vec<f64> {
        match self {
            Message::Ternary(z) => z.to_reals(),
            Message::Dense(g) => g.coords().to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Uplink,
    Downlink,
}

/// `⌈log₂ d⌉`, the bits needed to name one coordinate.
fn index_bits(d: usize) -> u64 {
    if d <= 1 {
        0
    } else {
        u64::from(usize::BITS - (d - 1).leading_zeros())
    }
}

/// Positional bit cost of a message.
pub fn account_bits(msg: &Message, direction: Direction) -> u64 {
    let idx = index_bits(msg.dim());
    match (msg, direction) {
        (Message::Ternary(z), _) => z.nnz() as u64 * (1 + idx),
        (Message::Dense(g), Direction::Uplink) => {
            g.coords().iter().filter(|&&x| x != 0.0).count() as u64 * (32 + idx)
        }
        (Message::Dense(g), Direction::Downlink) => 32 * g.dim() as u64,
    }
}

/// `d · H₃` in bits, with `H₃` the entropy of the message's empirical
/// symbol frequencies: the idealised cost of an entropy coder.
pub fn ternary_entropy_bits(msg: &TernaryVector) -> f64 {
    let d = msg.dim() as f64;
    let (p, z, m) = msg.symbol_counts();
    let h: f64 = [p, z, m]
        .iter()
        .filter(|&&n| n > 0)
        .map(|&n| {
            let q = n as f64 / d;
            -q * q.log2()
        })
        .sum();
    d * h
}
