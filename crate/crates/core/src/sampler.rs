//! Training-point generation for the three loss terms: initial-condition
//! points at t = 0, boundary points on x = +-1, and interior collocation
//! points.
//!
//! Everything is a pure function of (method, seed, counts). Each point
//! family draws from its own ChaCha8 stream so that, say, changing n0 never
//! perturbs the collocation points.

use crate::physics::initial_condition;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::str::FromStr;

/// Smallest time used for boundary and collocation draws; keeps t strictly
/// positive so the initial-condition set alone owns t = 0.
pub const T_MIN: f64 = 1e-12;

const STREAM_INITIAL: u64 = 1;
const STREAM_BOUNDARY: u64 = 2;
const STREAM_COLLOCATION: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplingMethod {
    /// Independent uniform draws.
    Uniform,
    /// Latin hypercube: jittered strata, one point per stratum per axis.
    Lhs,
}

impl SamplingMethod {
    pub fn name(self) -> &'static str {
        match self {
            SamplingMethod::Uniform => "uniform",
            SamplingMethod::Lhs => "lhs",
        }
    }
}

impl fmt::Display for SamplingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownMethod(pub String);

impl fmt::Display for UnknownMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown sampling method {:?} (expected uniform or lhs)", self.0)
    }
}

impl std::error::Error for UnknownMethod {}

impl FromStr for SamplingMethod {
    type Err = UnknownMethod;

    fn from_str(s: &str) -> Result<Self, UnknownMethod> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(SamplingMethod::Uniform),
            "lhs" => Ok(SamplingMethod::Lhs),
            other => Err(UnknownMethod(other.to_string())),
        }
    }
}

/// A point on the t = 0 slice with its target value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialPoint {
    pub x: f64,
    pub u0: f64,
}

/// A point on one of the two spatial walls with its target value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub t: f64,
    pub x: f64,
    pub target: f64,
}

/// An interior point where the equation residual is enforced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollocationPoint {
    pub t: f64,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub x0: Vec<InitialPoint>,
    pub xb: Vec<BoundaryPoint>,
    pub xr: Vec<CollocationPoint>,
    pub seed: u64,
    pub method: SamplingMethod,
}

impl TrainingSet {
    /// FNV-1a over the bit patterns of every coordinate (plus the three
    /// counts). Identifies the data itself: two sets with equal points hash
    /// equal regardless of how they were produced.
    pub fn content_hash(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.eat(self.x0.len() as u64);
        h.eat(self.xb.len() as u64);
        h.eat(self.xr.len() as u64);
        for p in &self.x0 {
            h.eat(p.x.to_bits());
            h.eat(p.u0.to_bits());
        }
        for p in &self.xb {
            h.eat(p.t.to_bits());
            h.eat(p.x.to_bits());
            h.eat(p.target.to_bits());
        }
        for p in &self.xr {
            h.eat(p.t.to_bits());
            h.eat(p.x.to_bits());
        }
        h.finish()
    }
}

struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }

    fn eat(&mut self, word: u64) {
        for b in word.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn wall_for(index: usize) -> f64 {
    if index % 2 == 0 {
        -1.0
    } else {
        1.0
    }
}

/// Sample a full training set.
pub fn sample(method: SamplingMethod, seed: u64, n0: usize, nb: usize, nf: usize) -> TrainingSet {
    match method {
        SamplingMethod::Uniform => sample_uniform(seed, n0, nb, nf),
        SamplingMethod::Lhs => sample_lhs(seed, n0, nb, nf),
    }
}

/// Uniform draws: x0.x on [-1, 1], boundary t on [T_MIN, 1] with walls
/// alternating -1, +1, collocation (t, x) on [T_MIN, 1] x (-1, 1).
pub fn sample_uniform(seed: u64, n0: usize, nb: usize, nf: usize) -> TrainingSet {
    let mut r0 = rng_for(seed, STREAM_INITIAL);
    let x0 = (0..n0)
        .map(|_| {
            let x = r0.gen_range(-1.0..=1.0);
            InitialPoint { x, u0: initial_condition(x) }
        })
        .collect();

    let mut rb = rng_for(seed, STREAM_BOUNDARY);
    let xb = (0..nb)
        .map(|i| BoundaryPoint { t: rb.gen_range(T_MIN..=1.0), x: wall_for(i), target: 0.0 })
        .collect();

    let mut rf = rng_for(seed, STREAM_COLLOCATION);
    let xr = (0..nf)
        .map(|_| {
            let t = rf.gen_range(T_MIN..=1.0);
            // gen_range on -1.0..1.0 is half-open but can still return the
            // lower end; the interior excludes both walls, so reroll it.
            let mut x = rf.gen_range(-1.0..1.0);
            while x == -1.0 {
                x = rf.gen_range(-1.0..1.0);
            }
            CollocationPoint { t, x }
        })
        .collect();

    TrainingSet { x0, xb, xr, seed, method: SamplingMethod::Uniform }
}

/// Latin-hypercube variant: one jittered point per stratum on each axis.
/// The 1-D families (initial x, boundary t) are plain stratified draws in
/// stratum order; the 2-D collocation set pairs the x strata, in order, with
/// a shuffled permutation of the t strata.
pub fn sample_lhs(seed: u64, n0: usize, nb: usize, nf: usize) -> TrainingSet {
    let mut r0 = rng_for(seed, STREAM_INITIAL);
    let x0 = (0..n0)
        .map(|k| {
            let x = -1.0 + 2.0 * (k as f64 + r0.gen_range(0.0..1.0)) / n0 as f64;
            InitialPoint { x, u0: initial_condition(x) }
        })
        .collect();

    let mut rb = rng_for(seed, STREAM_BOUNDARY);
    let xb = (0..nb)
        .map(|i| {
            let t = T_MIN + (i as f64 + rb.gen_range(0.0..1.0)) * (1.0 - T_MIN) / nb as f64;
            BoundaryPoint { t, x: wall_for(i), target: 0.0 }
        })
        .collect();

    let mut rf = rng_for(seed, STREAM_COLLOCATION);
    let mut ts: Vec<f64> = (0..nf)
        .map(|k| T_MIN + (k as f64 + rf.gen_range(0.0..1.0)) * (1.0 - T_MIN) / nf as f64)
        .collect();
    let xs: Vec<f64> = (0..nf)
        .map(|k| {
            let mut x = -1.0 + 2.0 * (k as f64 + rf.gen_range(0.0..1.0)) / nf as f64;
            while x == -1.0 {
                x = -1.0 + 2.0 * (k as f64 + rf.gen_range(0.0..1.0)) / nf as f64;
            }
            x
        })
        .collect();
    ts.shuffle(&mut rf);
    let xr = ts
        .into_iter()
        .zip(xs)
        .map(|(t, x)| CollocationPoint { t, x })
        .collect();

    TrainingSet { x0, xb, xr, seed, method: SamplingMethod::Lhs }
}
