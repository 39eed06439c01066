//! Bucket-count histograms, their Laplace release, and the CountMin sketch.
//!
//! A histogram is built by one writer, then released exactly once. Release
//! optionally perturbs every cell with `Lap(1/ε)` noise and freezes the
//! histogram; after that it can only be read or merged.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-release privacy budget. `Infinite` is the non-private setting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Option<f64>", into = "Option<f64>")]
pub enum Epsilon {
    Finite(f64),
    Infinite,
}

impl Epsilon {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_infinite() && value > 0.0 {
            Ok(Epsilon::Infinite)
        } else if value > 0.0 {
            Ok(Epsilon::Finite(value))
        } else {
            Err(Error::InvalidEpsilon(value))
        }
    }

    pub fn is_private(self) -> bool {
        matches!(self, Epsilon::Finite(_))
    }

    pub fn value(self) -> f64 {
        match self {
            Epsilon::Finite(e) => e,
            Epsilon::Infinite => f64::INFINITY,
        }
    }
}

impl From<Epsilon> for Option<f64> {
    fn from(e: Epsilon) -> Self {
        match e {
            Epsilon::Finite(v) => Some(v),
            Epsilon::Infinite => None,
        }
    }
}

impl TryFrom<Option<f64>> for Epsilon {
    type Error = Error;

    fn try_from(v: Option<f64>) -> Result<Self> {
        v.map_or(Ok(Epsilon::Infinite), Epsilon::new)
    }
}

impl FromStr for Epsilon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(Epsilon::Infinite);
        }
        let v: f64 = t
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("cannot parse epsilon {s:?}")))?;
        Epsilon::new(v)
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Epsilon::Finite(v) => write!(f, "{v}"),
            Epsilon::Infinite => f.write_str("inf"),
        }
    }
}

/// One draw from `Laplace(0, scale)` by inverting the CDF.
pub fn sample_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    loop {
        let u = rng.random::<f64>() - 0.5;
        let tail = 1.0 - 2.0 * u.abs();
        if tail > 0.0 {
            return -scale * u.signum() * tail.ln();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    hash_count: usize,
    counts: Vec<f64>,
    /// One entry per merged source.
    epsilons: Vec<Epsilon>,
    released: bool,
}

impl Histogram {
    pub fn new(hash_count: usize) -> Result<Self> {
        if hash_count == 0 || hash_count > crate::hashing::MAX_HASH_COUNT {
            return Err(Error::InvalidParameter(format!(
                "histogram needs 1..={} hash functions, got {hash_count}",
                crate::hashing::MAX_HASH_COUNT
            )));
        }
        Ok(Histogram {
            hash_count,
            counts: vec![0.0; 1 << hash_count],
            epsilons: Vec::new(),
            released: false,
        })
    }

    /// A released histogram with the given counts, e.g. decoded from a
    /// participant's broadcast.
    pub fn from_release(hash_count: usize, counts: Vec<f64>, epsilon: Epsilon) -> Result<Self> {
        let mut h = Histogram::new(hash_count)?;
        if counts.len() != h.counts.len() {
            return Err(Error::IncompatibleHistograms(format!(
                "expected {} cells for l = {hash_count}, got {}",
                h.counts.len(),
                counts.len()
            )));
        }
        h.counts = counts;
        h.epsilons.push(epsilon);
        h.released = true;
        Ok(h)
    }

    pub fn hash_count(&self) -> usize {
        self.hash_count
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn epsilons(&self) -> &[Epsilon] {
        &self.epsilons
    }

    /// Number of released histograms summed into this one.
    pub fn sources(&self) -> usize {
        self.epsilons.len()
    }

    pub fn is_released(&self) -> bool {
        self.released
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    fn check_code(&self, code: usize) -> Result<()> {
        if code >= self.counts.len() {
            return Err(Error::CodeOutOfRange {
                code,
                buckets: self.counts.len(),
            });
        }
        Ok(())
    }

    pub fn increment(&mut self, code: usize) -> Result<()> {
        if self.released {
            return Err(Error::AlreadyReleased);
        }
        self.check_code(code)?;
        self.counts[code] += 1.0;
        Ok(())
    }

    pub fn bucket_count(&self, code: usize) -> Result<f64> {
        self.check_code(code)?;
        Ok(self.counts[code])
    }

    /// Unchecked lookup for the scoring hot path; `code` must come from the
    /// composite hash the histogram was built with.
    #[inline]
    pub(crate) fn count_at(&self, code: usize) -> f64 {
        self.counts[code]
    }

    /// Adds independent `Lap(1/ε)` noise to every cell and releases.
    pub fn add_laplace_noise<R: Rng + ?Sized>(&mut self, epsilon: f64, rng: &mut R) -> Result<()> {
        if self.released {
            return Err(Error::AlreadyReleased);
        }
        let epsilon = match Epsilon::new(epsilon)? {
            Epsilon::Finite(e) => e,
            Epsilon::Infinite => return Err(Error::InvalidEpsilon(epsilon)),
        };
        let scale = 1.0 / epsilon;
        for c in &mut self.counts {
            *c += sample_laplace(scale, rng);
        }
        self.epsilons = vec![Epsilon::Finite(epsilon)];
        self.released = true;
        Ok(())
    }

    /// Releases under `epsilon`: noised when finite, frozen as-is otherwise.
    pub fn release<R: Rng + ?Sized>(mut self, epsilon: Epsilon, rng: &mut R) -> Result<Self> {
        match epsilon {
            Epsilon::Finite(e) => self.add_laplace_noise(e, rng)?,
            Epsilon::Infinite => {
                if self.released {
                    return Err(Error::AlreadyReleased);
                }
                self.epsilons = vec![Epsilon::Infinite];
                self.released = true;
            }
        }
        Ok(self)
    }

    /// Elementwise sum. The result is released and carries every input's
    /// budget tags.
    pub fn merge<'a>(histograms: impl IntoIterator<Item = &'a Histogram>) -> Result<Histogram> {
        let mut iter = histograms.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::IncompatibleHistograms("nothing to merge".into()))?;
        let mut merged = first.clone();
        for h in iter {
            if h.hash_count != merged.hash_count {
                return Err(Error::IncompatibleHistograms(format!(
                    "l = {} vs l = {}",
                    merged.hash_count, h.hash_count
                )));
            }
            for (a, b) in merged.counts.iter_mut().zip(&h.counts) {
                *a += b;
            }
            merged.epsilons.extend_from_slice(&h.epsilons);
        }
        merged.released = true;
        Ok(merged)
    }
}

/// Broadcast form of a released histogram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramMessage {
    pub l: usize,
    pub counts: Vec<f64>,
    pub epsilon: Epsilon,
    pub model_id: usize,
    pub participant_id: usize,
}

impl HistogramMessage {
    pub fn new(histogram: &Histogram, model_id: usize, participant_id: usize) -> Result<Self> {
        if !histogram.released || histogram.epsilons.len() != 1 {
            return Err(Error::InvalidParameter(
                "only a single released histogram can be broadcast".into(),
            ));
        }
        Ok(HistogramMessage {
            l: histogram.hash_count,
            counts: histogram.counts.clone(),
            epsilon: histogram.epsilons[0],
            model_id,
            participant_id,
        })
    }

    pub fn into_histogram(self) -> Result<Histogram> {
        Histogram::from_release(self.l, self.counts, self.epsilon)
    }
}

const MERSENNE_61: u64 = (1 << 61) - 1;

fn mod_mersenne(x: u128) -> u64 {
    let p = MERSENNE_61 as u128;
    let folded = (x & p) + (x >> 61);
    let folded = (folded & p) + (folded >> 61);
    (if folded >= p { folded - p } else { folded }) as u64
}

/// Row hash `((a·x + b) mod (2^61 − 1)) mod width`, a pairwise-independent
/// family over keys reduced modulo the prime.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowHash {
    pub a: u64,
    pub b: u64,
}

impl RowHash {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        RowHash {
            a: rng.random_range(1..MERSENNE_61),
            b: rng.random_range(0..MERSENNE_61),
        }
    }

    #[inline]
    fn index(&self, key: u64, width: usize) -> usize {
        let x = mod_mersenne(key as u128);
        let h = mod_mersenne(self.a as u128 * x as u128 + self.b as u128);
        (h % width as u64) as usize
    }
}

pub const SKETCH_DEPTH: usize = 4;
pub const SKETCH_WIDTH: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountMinSketch {
    depth: usize,
    width: usize,
    rows: Vec<RowHash>,
    counters: Vec<f64>,
    epsilons: Vec<Epsilon>,
    released: bool,
}

impl CountMinSketch {
    pub fn new<R: Rng + ?Sized>(depth: usize, width: usize, rng: &mut R) -> Result<Self> {
        let rows = (0..depth).map(|_| RowHash::sample(rng)).collect();
        CountMinSketch::with_rows(width, rows)
    }

    /// Sketch with a fixed hash layout. Sketches merge only when their rows
    /// are identical.
    pub fn with_rows(width: usize, rows: Vec<RowHash>) -> Result<Self> {
        if width == 0 || rows.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "sketch needs positive depth and width, got {} × {width}",
                rows.len()
            )));
        }
        Ok(CountMinSketch {
            depth: rows.len(),
            width,
            counters: vec![0.0; rows.len() * width],
            rows,
            epsilons: Vec::new(),
            released: false,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> &[RowHash] {
        &self.rows
    }

    pub fn counters(&self) -> &[f64] {
        &self.counters
    }

    pub fn epsilons(&self) -> &[Epsilon] {
        &self.epsilons
    }

    pub fn is_released(&self) -> bool {
        self.released
    }

    pub fn insert(&mut self, key: u64) -> Result<()> {
        if self.released {
            return Err(Error::AlreadyReleased);
        }
        for (r, row) in self.rows.iter().enumerate() {
            let idx = row.index(key, self.width);
            self.counters[r * self.width + idx] += 1.0;
        }
        Ok(())
    }

    /// Minimum over rows.
    #[inline]
    pub fn query(&self, key: u64) -> f64 {
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| self.counters[r * self.width + row.index(key, self.width)])
            .fold(f64::INFINITY, f64::min)
    }

    /// Adds `Lap(1/ε)` to each of the `depth × width` cells and releases.
    pub fn add_laplace_noise<R: Rng + ?Sized>(&mut self, epsilon: f64, rng: &mut R) -> Result<()> {
        if self.released {
            return Err(Error::AlreadyReleased);
        }
        let e = match Epsilon::new(epsilon)? {
            Epsilon::Finite(e) => e,
            Epsilon::Infinite => return Err(Error::InvalidEpsilon(epsilon)),
        };
        for c in &mut self.counters {
            *c += sample_laplace(1.0 / e, rng);
        }
        self.epsilons = vec![Epsilon::Finite(e)];
        self.released = true;
        Ok(())
    }

    pub fn release<R: Rng + ?Sized>(mut self, epsilon: Epsilon, rng: &mut R) -> Result<Self> {
        match epsilon {
            Epsilon::Finite(e) => self.add_laplace_noise(e, rng)?,
            Epsilon::Infinite => {
                if self.released {
                    return Err(Error::AlreadyReleased);
                }
                self.epsilons = vec![Epsilon::Infinite];
                self.released = true;
            }
        }
        Ok(self)
    }

    pub fn merge<'a>(sketches: impl IntoIterator<Item = &'a CountMinSketch>) -> Result<Self> {
        let mut iter = sketches.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::IncompatibleHistograms("nothing to merge".into()))?;
        let mut merged = first.clone();
        for s in iter {
            if s.width != merged.width || s.rows != merged.rows {
                return Err(Error::IncompatibleHistograms(
                    "sketches use different hash layouts".into(),
                ));
            }
            for (a, b) in merged.counters.iter_mut().zip(&s.counters) {
                *a += b;
            }
            merged.epsilons.extend_from_slice(&s.epsilons);
        }
        merged.released = true;
        Ok(merged)
    }
}

/// Broadcast form of a released sketch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SketchMessage {
    pub depth: usize,
    pub width: usize,
    pub row_seeds: Vec<RowHash>,
    pub counts: Vec<f64>,
    pub epsilon: Epsilon,
    pub model_id: usize,
    pub participant_id: usize,
}

impl SketchMessage {
    pub fn new(sketch: &CountMinSketch, model_id: usize, participant_id: usize) -> Result<Self> {
        if !sketch.released || sketch.epsilons.len() != 1 {
            return Err(Error::InvalidParameter(
                "only a single released sketch can be broadcast".into(),
            ));
        }
        Ok(SketchMessage {
            depth: sketch.depth,
            width: sketch.width,
            row_seeds: sketch.rows.clone(),
            counts: sketch.counters.clone(),
            epsilon: sketch.epsilons[0],
            model_id,
            participant_id,
        })
    }

    pub fn into_sketch(self) -> Result<CountMinSketch> {
        if self.row_seeds.len() != self.depth || self.counts.len() != self.depth * self.width {
            return Err(Error::IncompatibleHistograms(
                "sketch message dimensions disagree".into(),
            ));
        }
        let mut sketch = CountMinSketch::with_rows(self.width, self.row_seeds)?;
        sketch.counters = self.counts;
        sketch.epsilons = vec![self.epsilon];
        sketch.released = true;
        Ok(sketch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn increments_and_lookups() {
        let mut h = Histogram::new(2).unwrap();
        assert_eq!(h.bucket_count(1).unwrap(), 0.0);
        h.increment(3).unwrap();
        assert_eq!(h.counts(), &[0.0, 0.0, 0.0, 1.0]);
        h.increment(0).unwrap();
        h.increment(0).unwrap();
        assert_eq!(h.bucket_count(0).unwrap(), 2.0);
        assert_eq!(h.total(), 3.0);
        assert!(matches!(h.increment(4), Err(Error::CodeOutOfRange { .. })));
        assert!(matches!(h.bucket_count(9), Err(Error::CodeOutOfRange { .. })));
    }

    #[test]
    fn released_histograms_are_frozen() {
        let mut rng = stream(0);
        let h = Histogram::new(1).unwrap().release(Epsilon::Infinite, &mut rng).unwrap();
        assert!(h.is_released());
        let mut h2 = h.clone();
        assert!(matches!(h2.increment(0), Err(Error::AlreadyReleased)));
        assert!(matches!(
            h2.add_laplace_noise(1.0, &mut rng),
            Err(Error::AlreadyReleased)
        ));
        let mut fresh = Histogram::new(1).unwrap();
        assert!(matches!(
            fresh.add_laplace_noise(0.0, &mut rng),
            Err(Error::InvalidEpsilon(_))
        ));
        assert!(matches!(
            fresh.add_laplace_noise(-1.0, &mut rng),
            Err(Error::InvalidEpsilon(_))
        ));
    }

    #[test]
    fn huge_epsilon_barely_moves_counts() {
        let mut rng = stream(1);
        let mut h = Histogram::new(4).unwrap();
        for c in 0..16 {
            h.increment(c).unwrap();
        }
        h.add_laplace_noise(1e6, &mut rng).unwrap();
        // P(|Lap(1e-6)| > 1e-4) = e^-100 per cell.
        assert!(h.counts().iter().all(|c| (c - 1.0).abs() < 1e-4));
        assert_eq!(h.epsilons(), &[Epsilon::Finite(1e6)]);
    }

    #[test]
    fn tiny_epsilon_can_go_negative() {
        let mut rng = stream(2);
        let mut h = Histogram::new(6).unwrap();
        h.add_laplace_noise(0.001, &mut rng).unwrap();
        assert!(h.counts().iter().any(|&c| c < 0.0));
    }

    #[test]
    fn laplace_moments() {
        let mut rng = stream(3);
        let n = 100_000;
        let mean = (0..n).map(|_| sample_laplace(1.0, &mut rng)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "{mean}");

        let draws: Vec<f64> = (0..n).map(|_| sample_laplace(2.0, &mut rng)).collect();
        let m = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 8.0).abs() < 0.4, "{var}");
    }

    #[test]
    fn merge_rules() {
        let mut a = Histogram::new(2).unwrap();
        a.increment(1).unwrap();
        let mut b = Histogram::new(2).unwrap();
        b.increment(1).unwrap();
        b.increment(2).unwrap();
        let zero = Histogram::new(2).unwrap();
        assert_eq!(Histogram::merge([&a, &zero]).unwrap().counts(), a.counts());
        let ab = Histogram::merge([&a, &b]).unwrap();
        let ba = Histogram::merge([&b, &a]).unwrap();
        assert_eq!(ab.counts(), ba.counts());
        assert_eq!(ab.counts(), &[0.0, 2.0, 1.0, 0.0]);
        assert!(matches!(
            Histogram::merge([&a, &Histogram::new(3).unwrap()]),
            Err(Error::IncompatibleHistograms(_))
        ));
        assert!(Histogram::merge(std::iter::empty()).is_err());
    }

    #[test]
    fn merge_concatenates_budgets() {
        let mut rng = stream(4);
        let a = Histogram::new(2)
            .unwrap()
            .release(Epsilon::Finite(0.5), &mut rng)
            .unwrap();
        let b = Histogram::new(2)
            .unwrap()
            .release(Epsilon::Finite(0.25), &mut rng)
            .unwrap();
        let m = Histogram::merge([&a, &b]).unwrap();
        assert_eq!(m.sources(), 2);
        assert_eq!(m.epsilons(), &[Epsilon::Finite(0.5), Epsilon::Finite(0.25)]);
    }

    #[test]
    fn histogram_message_round_trip() {
        let mut rng = stream(5);
        let mut h = Histogram::new(3).unwrap();
        h.increment(5).unwrap();
        let h = h.release(Epsilon::Finite(0.01), &mut rng).unwrap();
        let msg = HistogramMessage::new(&h, 4, 1).unwrap();
        let json = serde_json::to_string(&msg).unwrap();
        let back: HistogramMessage = serde_json::from_str(&json).unwrap();
        assert_eq!(back.clone().into_histogram().unwrap(), h);
        assert_eq!((back.model_id, back.participant_id), (4, 1));

        let open = Histogram::new(1).unwrap().release(Epsilon::Infinite, &mut rng).unwrap();
        let json = serde_json::to_string(&HistogramMessage::new(&open, 0, 0).unwrap()).unwrap();
        assert!(json.contains("\"epsilon\":null"), "{json}");
        assert!(HistogramMessage::new(&Histogram::new(1).unwrap(), 0, 0).is_err());
    }

    #[test]
    fn epsilon_parsing() {
        assert_eq!("inf".parse::<Epsilon>().unwrap(), Epsilon::Infinite);
        assert_eq!("0.01".parse::<Epsilon>().unwrap(), Epsilon::Finite(0.01));
        assert!("0".parse::<Epsilon>().is_err());
        assert!("-3".parse::<Epsilon>().is_err());
        assert!("abc".parse::<Epsilon>().is_err());
        assert_eq!(Epsilon::Infinite.to_string(), "inf");
    }

    #[test]
    fn count_min_guarantees() {
        let mut rng = stream(6);
        let mut s = CountMinSketch::new(SKETCH_DEPTH, SKETCH_WIDTH, &mut rng).unwrap();
        s.insert(42).unwrap();
        assert_eq!(s.query(42), 1.0);
        for k in 0..50u64 {
            for _ in 0..k {
                s.insert(k * 7919).unwrap();
            }
        }
        for k in 0..50u64 {
            assert!(s.query(k * 7919) >= k as f64);
        }
        let s = s.release(Epsilon::Infinite, &mut rng).unwrap();
        let mut frozen = s.clone();
        assert!(matches!(frozen.insert(1), Err(Error::AlreadyReleased)));
    }

    #[test]
    fn count_min_unseen_key_is_zero_at_low_load() {
        let trials = 2000;
        let zero = (0..trials)
            .filter(|&t| {
                let mut rng = stream(1000 + t);
                let mut s = CountMinSketch::new(SKETCH_DEPTH, SKETCH_WIDTH, &mut rng).unwrap();
                s.insert(1).unwrap();
                s.query(2) == 0.0
            })
            .count();
        // A single row collides with probability ~1/1000, and the minimum
        // is positive only if all four rows collide.
        assert!(zero as f64 / trials as f64 >= (1.0 - 1.0 / 1000.0f64).powi(4) - 0.01);
    }

    #[test]
    fn count_min_merge_and_wire() {
        let mut rng = stream(7);
        let base = CountMinSketch::new(4, 100, &mut rng).unwrap();
        let mut a = base.clone();
        let mut b = base.clone();
        let mut union = base.clone();
        for k in 0..30u64 {
            if k % 3 == 0 {
                a.insert(k).unwrap()
            } else {
                b.insert(k).unwrap()
            }
            union.insert(k).unwrap();
        }
        let merged = CountMinSketch::merge([&a, &b]).unwrap();
        assert_eq!(merged.counters(), union.counters());

        let other = CountMinSketch::new(4, 100, &mut rng).unwrap();
        assert!(CountMinSketch::merge([&a, &other]).is_err());

        let released = a.release(Epsilon::Finite(1.0), &mut rng).unwrap();
        let msg = SketchMessage::new(&released, 2, 0).unwrap();
        let json = serde_json::to_string(&msg).unwrap();
        let back: SketchMessage = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_sketch().unwrap(), released);
        assert!(released.counters().iter().any(|c| c.fract() != 0.0));
    }
}
