//! Seeded randomness for game engines. ChaCha8 keeps sequences stable across
//! platforms, so a recorded seed replays identically.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameRng(ChaCha8Rng);

impl GameRng {
    pub fn from_seed(seed: u64) -> GameRng {
        GameRng(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform die roll in `1..=sides`.
    pub fn roll(&mut self, sides: u32) -> u32 {
        self.0.gen_range(1..=sides)
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.0.gen_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.0);
    }
}

/// Derives an independent seed from a base seed and a stream number.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the mixed input
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A deck of card indices. Drawn cards go to the discard pile; an empty draw
/// pile is refilled by shuffling the discards.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deck {
    draw_pile: Vec<usize>,
    discard: Vec<usize>,
}

impl Deck {
    pub fn shuffled(size: usize, rng: &mut GameRng) -> Deck {
        assert!(size > 0, "deck must not be empty");
        let mut draw_pile: Vec<usize> = (0..size).collect();
        rng.shuffle(&mut draw_pile);
        Deck {
            draw_pile,
            discard: Vec::new(),
        }
    }

    pub fn draw(&mut self, rng: &mut GameRng) -> usize {
        if self.draw_pile.is_empty() {
            std::mem::swap(&mut self.draw_pile, &mut self.discard);
            rng.shuffle(&mut self.draw_pile);
        }
        let card = self.draw_pile.pop().expect("deck holds at least one card");
        self.discard.push(card);
        card
    }

    pub fn remaining(&self) -> usize {
        self.draw_pile.len()
    }

    pub fn size(&self) -> usize {
        self.draw_pile.len() + self.discard.len()
    }
}
