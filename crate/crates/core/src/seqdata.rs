//! Sequence datasets: in-memory sets, the binary container format, synthetic
//! generators and padded mini-batches.
//!
//! Container layout (little-endian):
//!
//! ```text
//! magic  "STCNSEQ1"            8 bytes
//! count  u32                   number of records N
//! N × {  T u32, D u32, T·D f32 values, time-major }
//! ```

use std::f64::consts::PI;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StcnError};
use crate::real::Real;
use crate::tensor::SeqTensor;

pub const CONTAINER_MAGIC: &[u8; 8] = b"STCNSEQ1";

/// A set of variable-length sequences sharing one feature dimension.
///
/// Values are held as `f32`, the precision of the on-disk container, so that
/// write/read is an exact round trip.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSet {
    sequences: Vec<Array2<f32>>,
    feature_dim: usize,
    pub name: Option<String>,
}

impl SequenceSet {
    pub fn new(sequences: Vec<Array2<f32>>, feature_dim: usize) -> Result<Self> {
        if feature_dim == 0 {
            return Err(StcnError::Argument("feature dimension must be ≥ 1".into()));
        }
        for (i, s) in sequences.iter().enumerate() {
            if s.ncols() != feature_dim {
                return Err(StcnError::Argument(format!(
                    "sequence {i} has D={} but the set has D={feature_dim}",
                    s.ncols()
                )));
            }
            if s.nrows() == 0 {
                return Err(StcnError::Argument(format!("sequence {i} is empty")));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(StcnError::Argument(format!("sequence {i} has non-finite values")));
            }
        }
        Ok(Self {
            sequences,
            feature_dim,
            name: None,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn sequences(&self) -> &[Array2<f32>] {
        &self.sequences
    }

    pub fn get(&self, i: usize) -> ArrayView2<'_, f32> {
        self.sequences[i].view()
    }

    pub fn total_steps(&self) -> usize {
        self.sequences.iter().map(|s| s.nrows()).sum()
    }

    /// A new set holding the sequences at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            sequences: indices.iter().map(|&i| self.sequences[i].clone()).collect(),
            feature_dim: self.feature_dim,
            name: self.name.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// Container I/O

pub fn write_container(set: &SequenceSet, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_container(set)?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

pub fn read_container(path: impl AsRef<Path>) -> Result<SequenceSet> {
    decode_container(&fs::read(path)?)
}

pub fn encode_container(set: &SequenceSet) -> Result<Vec<u8>> {
    if set.is_empty() {
        return Err(StcnError::Argument("cannot write an empty sequence set".into()));
    }
    let count = u32::try_from(set.len())
        .map_err(|_| StcnError::Argument("too many sequences for a u32 count".into()))?;
    let mut out = Vec::with_capacity(12 + set.total_steps() * set.feature_dim() * 4);
    out.extend_from_slice(CONTAINER_MAGIC);
    out.extend_from_slice(&count.to_le_bytes());
    for s in set.sequences() {
        out.extend_from_slice(&(s.nrows() as u32).to_le_bytes());
        out.extend_from_slice(&(s.ncols() as u32).to_le_bytes());
        for v in s.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize, field: &'static str) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(StcnError::Format {
                field,
                offset: self.pos as u64,
                message: format!(
                    "truncated: need {n} bytes, {} remain",
                    self.bytes.len() - self.pos
                ),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, field: &'static str) -> Result<u32> {
        let b = self.take(4, field)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

fn format_err(field: &'static str, offset: usize, message: impl Into<String>) -> StcnError {
    StcnError::Format {
        field,
        offset: offset as u64,
        message: message.into(),
    }
}

pub fn decode_container(bytes: &[u8]) -> Result<SequenceSet> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(8, "magic")?;
    if magic != CONTAINER_MAGIC {
        return Err(format_err("magic", 0, "bad magic"));
    }
    let count = cur.u32("count")? as usize;
    if count == 0 {
        return Err(format_err("count", 8, "count must be ≥ 1"));
    }
    let mut sequences = Vec::with_capacity(count);
    let mut feature_dim = 0;
    for i in 0..count {
        let t_at = cur.pos;
        let t = cur.u32("T")? as usize;
        if t == 0 {
            return Err(format_err("T", t_at, format!("record {i} has T=0")));
        }
        let d_at = cur.pos;
        let d = cur.u32("D")? as usize;
        if d == 0 {
            return Err(format_err("D", d_at, format!("record {i} has D=0")));
        }
        if i == 0 {
            feature_dim = d;
        } else if d != feature_dim {
            return Err(format_err(
                "D",
                d_at,
                format!("record {i} has D={d}, expected D={feature_dim}"),
            ));
        }
        let payload_at = cur.pos;
        let n = t
            .checked_mul(d)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| format_err("payload", payload_at, "record size overflows"))?;
        let raw = cur.take(n, "payload")?;
        let values: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(format_err(
                "payload",
                payload_at + 4 * k,
                format!("record {i} holds a non-finite value"),
            ));
        }
        sequences.push(Array2::from_shape_vec((t, d), values).expect("T·D values"));
    }
    if cur.pos != bytes.len() {
        return Err(format_err(
            "count",
            cur.pos,
            format!(
                "{} trailing bytes after the {count} records announced by count",
                bytes.len() - cur.pos
            ),
        ));
    }
    SequenceSet::new(sequences, feature_dim)
}

// ---------------------------------------------------------------------------
// Synthetic data

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticPreset {
    /// Independent noisy sinusoids per channel.
    Sines,
    /// Piecewise regimes with a discrete random regime per segment.
    Switching,
    /// Pen-offset-like `(Δx, Δy)` trajectories; requires `D = 2`.
    Strokes,
}

impl std::str::FromStr for SyntheticPreset {
    type Err = StcnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sines" => Ok(Self::Sines),
            "switching" => Ok(Self::Switching),
            "strokes" => Ok(Self::Strokes),
            other => Err(StcnError::Argument(format!(
                "unknown preset `{other}` (expected sines|switching|strokes)"
            ))),
        }
    }
}

/// Constants of the `switching` preset.
pub mod switching {
    /// Length of one regime segment; regime switches happen at multiples of it.
    pub const SEGMENT: usize = 16;
    /// Channel-0 level of each regime.
    pub const LEVELS: [f64; 2] = [-3.0, 3.0];
    /// Std of the scalar per-step innovation along the regime direction.
    pub const INNOVATION_STD: f64 = 1.0;
    /// Std of the isotropic jitter added on top of the innovation.
    pub const JITTER_STD: f64 = 0.05;
    /// Scale of the preset, used to express mode separations in std units.
    pub const PRESET_STD: f64 = INNOVATION_STD;

    /// Unit direction of the innovation in regime `r`: all channels share
    /// one magnitude, with alternating signs in regime 1.
    pub fn direction(regime: usize, dim: usize) -> Vec<f64> {
        let m = 1.0 / (dim as f64).sqrt();
        (0..dim)
            .map(|d| if regime == 1 && d % 2 == 1 { -m } else { m })
            .collect()
    }

    /// Steps `t` (0-based) at which a new regime is drawn.
    pub fn is_switch_step(t: usize) -> bool {
        t % SEGMENT == 0
    }
}

pub fn generate_synthetic(
    preset: SyntheticPreset,
    n: usize,
    steps: usize,
    dim: usize,
    seed: u64,
) -> Result<SequenceSet> {
    if n == 0 {
        return Err(StcnError::Argument("n must be ≥ 1".into()));
    }
    if steps < 2 {
        return Err(StcnError::Argument("T must be ≥ 2".into()));
    }
    if dim == 0 {
        return Err(StcnError::Argument("D must be ≥ 1".into()));
    }
    if preset == SyntheticPreset::Strokes && dim != 2 {
        return Err(StcnError::Argument(
            "the strokes preset emits (Δx, Δy) and needs D = 2".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sequences = (0..n)
        .map(|_| {
            let s = match preset {
                SyntheticPreset::Sines => sines(steps, dim, &mut rng),
                SyntheticPreset::Switching => switching_sequence(steps, dim, &mut rng),
                SyntheticPreset::Strokes => strokes(steps, &mut rng),
            };
            s.mapv(|v| v as f32)
        })
        .collect();
    let name = match preset {
        SyntheticPreset::Sines => "sines",
        SyntheticPreset::Switching => "switching",
        SyntheticPreset::Strokes => "strokes",
    };
    Ok(SequenceSet::new(sequences, dim)?.with_name(name))
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn sines<R: Rng>(steps: usize, dim: usize, rng: &mut R) -> Array2<f64> {
    let params: Vec<(f64, f64, f64)> = (0..dim)
        .map(|_| {
            (
                rng.random_range(0.5..1.5),
                rng.random_range(8.0..24.0),
                rng.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    Array2::from_shape_fn((steps, dim), |(t, d)| {
        let (amp, period, phase) = params[d];
        amp * (2.0 * PI * t as f64 / period + phase).sin()
    }) + Array2::from_shape_simple_fn((steps, dim), || 0.05 * normal(rng))
}

/// Each segment draws a regime; channel 0 sits at the regime's level and the
/// remaining channels oscillate with a regime-specific period. The per-step
/// innovation is one Gaussian scalar along a regime-specific direction plus
/// small isotropic jitter, so `x_t` given the past is a thin correlated ridge.
fn switching_sequence<R: Rng>(steps: usize, dim: usize, rng: &mut R) -> Array2<f64> {
    use switching::*;
    let mut out = Array2::zeros((steps, dim));
    let mut regime = 0;
    let mut phase = 0.0;
    for t in 0..steps {
        if is_switch_step(t) {
            regime = rng.random_range(0..LEVELS.len());
            phase = rng.random_range(0.0..2.0 * PI);
        }
        let period = if regime == 0 { 8.0 } else { 5.0 };
        let local = (t % SEGMENT) as f64;
        let dir = direction(regime, dim);
        let u = INNOVATION_STD * normal(rng);
        for d in 0..dim {
            let base = if d == 0 {
                LEVELS[regime]
            } else {
                (2.0 * PI * local / period + phase).sin()
            };
            out[[t, d]] = base + u * dir[d] + JITTER_STD * normal(rng);
        }
    }
    out
}

fn strokes<R: Rng>(steps: usize, rng: &mut R) -> Array2<f64> {
    let mut out = Array2::zeros((steps, 2));
    let mut heading = rng.random_range(0.0..2.0 * PI);
    let mut curvature = 0.0;
    let mut speed = rng.random_range(0.5..1.5);
    for t in 0..steps {
        curvature = 0.9 * curvature + 0.15 * normal(rng);
        heading += curvature;
        speed = (0.95 * speed + 0.05 * rng.random_range(0.5f64..1.5)).max(0.05);
        // occasional pen jump to a new stroke
        let jump = if rng.random_bool(0.05) {
            rng.random_range(2.0..4.0)
        } else {
            1.0
        };
        out[[t, 0]] = jump * speed * heading.cos() + 0.02 * normal(rng);
        out[[t, 1]] = jump * speed * heading.sin() + 0.02 * normal(rng);
    }
    out
}

// ---------------------------------------------------------------------------
// Batching

/// A zero-padded batch with its validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBatch<F> {
    pub data: SeqTensor<F>,
    /// `[B × T_max]`, 1 where `t < lengths[b]`.
    pub mask: Array2<F>,
    pub lengths: Vec<usize>,
    /// Index of each row's sequence in the source set.
    pub indices: Vec<usize>,
}

impl<F: Real> SequenceBatch<F> {
    /// Builds a batch from the sequences of `set` at `indices`.
    pub fn from_set(set: &SequenceSet, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(StcnError::Argument("batch needs at least one sequence".into()));
        }
        let seqs: Vec<ArrayView2<f32>> = indices.iter().map(|&i| set.get(i)).collect();
        let mut batch = Self::from_views(&seqs)?;
        batch.indices = indices.to_vec();
        Ok(batch)
    }

    pub fn from_views(seqs: &[ArrayView2<f32>]) -> Result<Self> {
        let first = seqs
            .first()
            .ok_or_else(|| StcnError::Argument("batch needs at least one sequence".into()))?;
        let dim = first.ncols();
        let lengths: Vec<usize> = seqs.iter().map(|s| s.nrows()).collect();
        let t_max = *lengths.iter().max().unwrap();
        let mut data = SeqTensor::zeros(seqs.len(), t_max, dim);
        let mut mask = Array2::zeros((seqs.len(), t_max));
        for (b, s) in seqs.iter().enumerate() {
            if s.ncols() != dim {
                return Err(StcnError::Shape(format!(
                    "sequence {b} has D={}, batch has D={dim}",
                    s.ncols()
                )));
            }
            for t in 0..s.nrows() {
                mask[[b, t]] = F::one();
                for d in 0..dim {
                    *data.at_mut(b, t, d) = F::lit(s[[t, d]] as f64);
                }
            }
        }
        Ok(Self {
            data,
            mask,
            lengths,
            indices: (0..seqs.len()).collect(),
        })
    }

    pub fn from_matrix(x: &Array2<f32>) -> Self {
        Self::from_views(&[x.view()]).expect("single sequence")
    }

    pub fn batch_size(&self) -> usize {
        self.lengths.len()
    }

    pub fn max_len(&self) -> usize {
        self.data.steps()
    }

    pub fn feature_dim(&self) -> usize {
        self.data.channels()
    }

    /// The same batch padded with `extra` additional masked steps.
    pub fn padded(&self, extra: usize) -> Self {
        let (b, t, d) = (self.batch_size(), self.max_len(), self.feature_dim());
        let mut data = SeqTensor::zeros(b, t + extra, d);
        let mut mask = Array2::zeros((b, t + extra));
        for bi in 0..b {
            for ti in 0..t {
                mask[[bi, ti]] = self.mask[[bi, ti]];
                for di in 0..d {
                    *data.at_mut(bi, ti, di) = self.data.at(bi, ti, di);
                }
            }
        }
        Self {
            data,
            mask,
            lengths: self.lengths.clone(),
            indices: self.indices.clone(),
        }
    }
}

/// Partitions `set` into padded batches of at most `batch_size` sequences.
///
/// With `shuffle_seed` the sequence order is a seeded permutation; without it
/// the insertion order is kept.
pub fn make_batches<F: Real>(
    set: &SequenceSet,
    batch_size: usize,
    shuffle_seed: Option<u64>,
) -> Result<Vec<SequenceBatch<F>>> {
    if batch_size == 0 {
        return Err(StcnError::Argument("batch_size must be ≥ 1".into()));
    }
    if set.is_empty() {
        return Err(StcnError::Argument("cannot batch an empty sequence set".into()));
    }
    let mut order: Vec<usize> = (0..set.len()).collect();
    if let Some(seed) = shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    order
        .chunks(batch_size)
        .map(|idx| SequenceBatch::from_set(set, idx))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn synth_shape_contract() {
        let s = generate_synthetic(SyntheticPreset::Sines, 4, 8, 2, 7).unwrap();
        assert_eq!(s.len(), 4);
        assert!(s.sequences().iter().all(|x| x.dim() == (8, 2)));
        assert!(s.sequences().iter().flatten().all(|v| v.is_finite()));
    }

    #[test]
    fn synth_is_deterministic() {
        for preset in [
            SyntheticPreset::Sines,
            SyntheticPreset::Switching,
            SyntheticPreset::Strokes,
        ] {
            let a = generate_synthetic(preset, 3, 20, 2, 11).unwrap();
            let b = generate_synthetic(preset, 3, 20, 2, 11).unwrap();
            assert_eq!(a, b);
            let c = generate_synthetic(preset, 3, 20, 2, 12).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn synth_rejects_bad_dims() {
        assert!(generate_synthetic(SyntheticPreset::Sines, 0, 8, 2, 0).is_err());
        assert!(generate_synthetic(SyntheticPreset::Sines, 1, 1, 2, 0).is_err());
        assert!(generate_synthetic(SyntheticPreset::Sines, 1, 8, 0, 0).is_err());
        assert!(generate_synthetic(SyntheticPreset::Strokes, 1, 8, 3, 0).is_err());
    }

    #[test]
    fn switching_is_bimodal_at_switch_steps() {
        let set = generate_synthetic(SyntheticPreset::Switching, 2000, 64, 2, 1).unwrap();
        // Histogram of channel 0 over all switch steps, bin width 0.25.
        let (lo, width, nbins) = (-8.0f64, 0.25f64, 64usize);
        let mut hist = vec![0usize; nbins];
        let mut total = 0usize;
        for s in set.sequences() {
            for t in (0..64).filter(|&t| switching::is_switch_step(t)) {
                let bin = ((s[[t, 0]] as f64 - lo) / width).floor();
                assert!(bin >= 0.0 && (bin as usize) < nbins);
                hist[bin as usize] += 1;
                total += 1;
            }
        }
        // Modes are the mass-weighted centres of runs of occupied bins that
        // hold at least 1% of the samples.
        let mut modes = Vec::new();
        let mut i = 0;
        while i < nbins {
            if hist[i] == 0 {
                i += 1;
                continue;
            }
            let (mut mass, mut moment) = (0.0, 0.0);
            while i < nbins && hist[i] > 0 {
                mass += hist[i] as f64;
                moment += hist[i] as f64 * (lo + (i as f64 + 0.5) * width);
                i += 1;
            }
            if mass >= 0.01 * total as f64 {
                modes.push(moment / mass);
            }
        }
        assert_eq!(modes.len(), 2, "{hist:?}");
        assert!((modes[1] - modes[0]) / switching::PRESET_STD >= 4.0, "{modes:?}");
        // Next to nothing between the modes.
        let mid = ((0.0 - lo) / width) as usize;
        assert!(hist[mid - 1] + hist[mid] <= total / 1000, "{hist:?}");
    }

    #[test]
    fn container_round_trip_single() {
        let set = SequenceSet::new(vec![array![[1.5f32, -2.0]]], 2).unwrap();
        let back = decode_container(&encode_container(&set).unwrap()).unwrap();
        assert_eq!(back.sequences(), set.sequences());
    }

    #[test]
    fn container_hand_assembled() {
        let mut bytes = b"STCNSEQ1".to_vec();
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&[0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x00, 0x40]);
        let set = decode_container(&bytes).unwrap();
        assert_eq!(set.sequences(), &[array![[1.0f32], [2.0]]]);
    }

    #[test]
    fn container_bad_magic() {
        let err = decode_container(b"XXXXXXXX\x01\0\0\0").unwrap_err();
        assert!(err.to_string().contains("bad magic"), "{err}");
    }

    #[test]
    fn container_truncated_payload_names_field_and_offset() {
        let set = SequenceSet::new(vec![array![[1.0f32], [2.0]]], 1).unwrap();
        let bytes = encode_container(&set).unwrap();
        match decode_container(&bytes[..bytes.len() - 2]) {
            Err(StcnError::Format { field, offset, .. }) => {
                assert_eq!(field, "payload");
                assert_eq!(offset, 20);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn container_count_and_dim_mismatch() {
        let set = SequenceSet::new(vec![array![[1.0f32]], array![[2.0f32]]], 1).unwrap();
        let mut bytes = encode_container(&set).unwrap();
        // announce one record but carry two
        bytes[8..12].copy_from_slice(&1u32.to_le_bytes());
        assert!(matches!(
            decode_container(&bytes),
            Err(StcnError::Format { field: "count", .. })
        ));
        // announce three
        bytes[8..12].copy_from_slice(&3u32.to_le_bytes());
        assert!(matches!(
            decode_container(&bytes),
            Err(StcnError::Format { field: "T", .. })
        ));
        // second record with a different D
        let mut bytes = encode_container(&set).unwrap();
        let second_d = 12 + 4 + 4 + 4 + 4;
        bytes[second_d..second_d + 4].copy_from_slice(&2u32.to_le_bytes());
        match decode_container(&bytes) {
            Err(StcnError::Format { field, offset, .. }) => {
                assert_eq!(field, "D");
                assert_eq!(offset as usize, second_d);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn batches_partition() {
        let set = generate_synthetic(SyntheticPreset::Sines, 5, 4, 1, 0).unwrap();
        let batches = make_batches::<f64>(&set, 2, None).unwrap();
        let sizes: Vec<usize> = batches.iter().map(|b| b.batch_size()).collect();
        assert_eq!(sizes, vec![2, 2, 1]);
        let mut seen: Vec<usize> = batches.iter().flat_map(|b| b.indices.clone()).collect();
        assert_eq!(seen, vec![0, 1, 2, 3, 4]);
        let shuffled = make_batches::<f64>(&set, 2, Some(3)).unwrap();
        seen = shuffled.iter().flat_map(|b| b.indices.clone()).collect();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn batch_mask_and_padding() {
        let set = SequenceSet::new(
            vec![
                Array2::from_elem((3, 2), 1.0f32),
                Array2::from_elem((5, 2), 2.0f32),
            ],
            2,
        )
        .unwrap();
        let batches = make_batches::<f64>(&set, 2, None).unwrap();
        let b = &batches[0];
        assert_eq!(b.max_len(), 5);
        assert_eq!(b.mask.row(0).to_vec(), vec![1.0, 1.0, 1.0, 0.0, 0.0]);
        assert_eq!(b.data.at(0, 3, 0), 0.0);
        assert_eq!(b.data.at(0, 4, 1), 0.0);
        assert_eq!(b.mask.sum(), 8.0);
    }

    #[test]
    fn empty_set_cannot_be_batched() {
        let set = SequenceSet::new(vec![], 2).unwrap();
        assert!(make_batches::<f64>(&set, 2, None).is_err());
        assert!(make_batches::<f64>(
            &generate_synthetic(SyntheticPreset::Sines, 2, 4, 1, 0).unwrap(),
            0,
            None
        )
        .is_err());
    }
}
