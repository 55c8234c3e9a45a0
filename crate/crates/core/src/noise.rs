//! Reproducible Brownian increments.
//!
//! Every Gaussian is a pure function of `(seed, kind, level, index, stream,
//! component)`: a ChaCha20 key is built from the seed, the noise kind, the
//! refinement level and the high bits of the step index; the stream id picks
//! the ChaCha stream and the low index bits pick the block position. Paths are
//! therefore never stored, can be drawn from any number of threads, and can be
//! refined by Brownian-bridge splitting to any level below [`MAX_ABSOLUTE_LEVEL`].
//!
//! Uniforms are turned into normals with Wichura's AS241 (`PPND16`) rational
//! inverse CDF, which is branch-stable and accurate to about 1e-16 relative.

use std::io::{Read, Write};

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::NoiseError;
use crate::linalg::Matrix;

/// Deepest refinement level (absolute) the generator supports.
pub const MAX_ABSOLUTE_LEVEL: u32 = 80;
/// Default cap for [`SharedPath::refine`].
pub const DEFAULT_MAX_REFINEMENT: u32 = 12;

const INDEX_LOW_BITS: u32 = 40;
const WORDS_PER_INDEX_BITS: u32 = 24;
const KEY_TAG: &[u8; 16] = b"spectral-sde/v1\0";

const DUMP_MAGIC: &[u8; 8] = b"SSDENOIS";
const DUMP_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    /// Full `p×p` real Brownian matrix `B`.
    Matrix,
    /// `p` eigenvalue drivers `ν_i` and `p(p−1)/2` pair drivers `β_kj`, `k<j`.
    Spectral,
    /// Complex Brownian matrix `W = B¹ + iB²`.
    ComplexMatrix,
}

impl NoiseKind {
    pub fn code(self) -> u32 {
        match self {
            NoiseKind::Matrix => 0,
            NoiseKind::Spectral => 1,
            NoiseKind::ComplexMatrix => 2,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(NoiseKind::Matrix),
            1 => Some(NoiseKind::Spectral),
            2 => Some(NoiseKind::ComplexMatrix),
            _ => None,
        }
    }

    /// Independent scalar streams per step for dimension `p`.
    pub fn streams_per_step(self, p: usize) -> usize {
        match self {
            NoiseKind::Matrix => p * p,
            NoiseKind::Spectral => p * (p + 1) / 2,
            NoiseKind::ComplexMatrix => 2 * p * p,
        }
    }
}

/// One step's worth of Brownian increments.
#[derive(Clone, Debug, PartialEq)]
pub struct Increments {
    kind: NoiseKind,
    dim: usize,
    values: Vec<f64>,
}

/// Position of `β_kj`, `k < j`, in the packed upper triangle.
#[inline]
pub fn pair_index(p: usize, k: usize, j: usize) -> usize {
    debug_assert!(k < j && j < p);
    k * p - k * (k + 1) / 2 + (j - k - 1)
}

impl Increments {
    pub fn new(kind: NoiseKind, dim: usize, values: Vec<f64>) -> Result<Self, NoiseError> {
        if values.len() != kind.streams_per_step(dim) {
            return Err(NoiseError::InvalidParameters(format!(
                "{:?} increments for p = {dim} need {} values, got {}",
                kind,
                kind.streams_per_step(dim),
                values.len()
            )));
        }
        Ok(Self { kind, dim, values })
    }

    pub fn zeros(kind: NoiseKind, dim: usize) -> Self {
        Self { kind, dim, values: vec![0.0; kind.streams_per_step(dim)] }
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `dB` as a `p×p` matrix (matrix kind) or the real part `dB¹` (complex kind).
    pub fn matrix(&self) -> Matrix {
        assert!(matches!(self.kind, NoiseKind::Matrix | NoiseKind::ComplexMatrix));
        let p = self.dim;
        Matrix::from_row_major(p, p, self.values[..p * p].to_vec())
    }

    /// Imaginary part `dB²` of a complex increment.
    pub fn imaginary_matrix(&self) -> Matrix {
        assert_eq!(self.kind, NoiseKind::ComplexMatrix);
        let p = self.dim;
        Matrix::from_row_major(p, p, self.values[p * p..].to_vec())
    }

    /// Eigenvalue drivers `dν_i`.
    pub fn nu(&self) -> &[f64] {
        assert_eq!(self.kind, NoiseKind::Spectral);
        &self.values[..self.dim]
    }

    /// Packed pair drivers `dβ_kj`, `k<j`, row-major over the strict upper triangle.
    pub fn beta_pairs(&self) -> &[f64] {
        assert_eq!(self.kind, NoiseKind::Spectral);
        &self.values[self.dim..]
    }

    pub fn beta_pairs_mut(&mut self) -> &mut [f64] {
        assert_eq!(self.kind, NoiseKind::Spectral);
        let p = self.dim;
        &mut self.values[p..]
    }

    /// `dβ_kj` with `β_jk ≡ β_kj`.
    pub fn beta(&self, k: usize, j: usize) -> f64 {
        assert!(k != j, "β is only defined off the diagonal");
        let (a, b) = if k < j { (k, j) } else { (j, k) };
        self.beta_pairs()[pair_index(self.dim, a, b)]
    }
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream id for path `path_index` under `seed`.
///
/// For a fixed seed this is a bijection of the path index (a XOR with a
/// seed-dependent constant followed by the SplitMix64 finaliser), so distinct
/// paths never share a stream.
pub fn derive_stream(seed: u64, path_index: u64) -> u64 {
    mix64(path_index ^ mix64(seed ^ 0x9e37_79b9_7f4a_7c15))
}

fn generator(seed: u64, kind: NoiseKind, level: u32, index: u128, stream: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&level.to_le_bytes());
    key[12..16].copy_from_slice(&kind.code().to_le_bytes());
    let high = (index >> INDEX_LOW_BITS) as u64;
    let tag_lo = u64::from_le_bytes(KEY_TAG[..8].try_into().unwrap()) ^ high;
    key[16..24].copy_from_slice(&tag_lo.to_le_bytes());
    key[24..32].copy_from_slice(&KEY_TAG[8..]);
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(stream);
    let low = (index & ((1u128 << INDEX_LOW_BITS) - 1)) as u128;
    rng.set_word_pos(low << WORDS_PER_INDEX_BITS);
    rng
}

#[inline]
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn standard_normals(
    seed: u64,
    kind: NoiseKind,
    level: u32,
    index: u128,
    stream: u64,
    count: usize,
) -> Vec<f64> {
    let mut rng = generator(seed, kind, level, index, stream);
    (0..count).map(|_| inverse_normal_cdf(open_unit(rng.next_u64()))).collect()
}

/// Standard normal quantile, Wichura's AS241 (`PPND16`).
///
/// `p` must lie in `(0, 1)`; returns ±∞ at the endpoints.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_812_8e4) * r
            + 6.726_577_092_700_870_1e4)
            * r
            + 4.592_195_393_154_987_1e4)
            * r
            + 1.373_169_376_550_946_1e4)
            * r
            + 1.971_590_950_306_551_4e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_6;
        let den = ((((((5.226_495_278_852_854_6e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271_1e4)
            * r
            + 2.121_379_430_158_659_6e4)
            * r
            + 5.394_196_021_424_751_1e3)
            * r
            + 6.871_870_074_920_579_1e2)
            * r
            + 4.231_333_070_160_091_1e1)
            * r
            + 1.0;
        return q * num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let value = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414_1e-4 * r + 2.272_384_498_926_918_5e-2) * r
            + 2.417_807_251_774_506_1e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_6)
            * r
            + 5.769_497_221_460_691_4)
            * r
            + 4.630_337_846_156_545_3)
            * r
            + 1.423_437_110_749_683_6;
        let den = ((((((1.050_750_071_644_416_8e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_7e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_758_8)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_3e-2)
            * r
            + 2.965_605_718_285_048_9e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114_4)
            * r
            + 6.657_904_643_501_103_8;
        let den = ((((((2.044_263_103_389_939_8e-15 * r + 1.421_511_758_316_445_9e-7) * r
            + 1.846_318_317_510_054_7e-5)
            * r
            + 7.868_691_311_456_132_6e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_879_4e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -value
    } else {
        value
    }
}

/// Source of Brownian increments on a dyadic grid.
///
/// `increment(k)` covers `[k·dt, (k+1)·dt)` at the source's own resolution;
/// `split` produces the two half-interval increments of any interval, `depth`
/// levels finer than the source, by Brownian-bridge interpolation. The two
/// halves of an interval are a pure function of the parent increment and the
/// interval's position, so recursive splitting is consistent with drawing the
/// finer levels directly.
pub trait IncrementSource: Sync {
    fn kind(&self) -> NoiseKind;
    fn dim(&self) -> usize;
    fn steps(&self) -> u64;
    fn dt(&self) -> f64;
    fn increment(&self, step: u64) -> Result<Increments, NoiseError>;
    /// Splits `parent`, the increment of interval `index` at `depth` levels
    /// below this source (depth 0 = the source's own steps).
    fn split(&self, parent: &Increments, depth: u32, index: u128) -> (Increments, Increments);
    /// Deepest `depth + 1` that [`split`](IncrementSource::split) supports.
    fn max_split_depth(&self) -> u32;
}

/// Seeded description of a Brownian path; increments are generated on demand.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseBundle {
    pub kind: NoiseKind,
    pub dim: usize,
    pub steps: u64,
    pub dt: f64,
    pub seed: u64,
    pub stream: u64,
}

impl NoiseBundle {
    pub fn new(kind: NoiseKind, dim: usize, steps: u64, dt: f64, seed: u64, stream: u64) -> Result<Self, NoiseError> {
        if dim == 0 {
            return Err(NoiseError::InvalidParameters("dimension must be at least 1".into()));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(NoiseError::InvalidParameters(format!("dt must be positive and finite, got {dt}")));
        }
        if 2 * kind.streams_per_step(dim) >= 1 << WORDS_PER_INDEX_BITS {
            return Err(NoiseError::InvalidParameters(format!("dimension {dim} is too large")));
        }
        if steps >= 1 << INDEX_LOW_BITS {
            return Err(NoiseError::InvalidParameters(format!("{steps} steps is too many")));
        }
        Ok(Self { kind, dim, steps, dt, seed, stream })
    }

    pub fn streams_per_step(&self) -> usize {
        self.kind.streams_per_step(self.dim)
    }

    /// Step size at absolute refinement `level`.
    pub fn dt_at(&self, level: u32) -> f64 {
        self.dt / 2f64.powi(level as i32)
    }

    /// Level-0 increments of step `index`, each `~ N(0, dt)`.
    pub fn draw_increments(&self, index: u64) -> Result<Increments, NoiseError> {
        if index >= self.steps {
            return Err(NoiseError::StepOutOfRange { index, steps: self.steps });
        }
        let scale = self.dt.sqrt();
        let mut values =
            standard_normals(self.seed, self.kind, 0, index as u128, self.stream, self.streams_per_step());
        for v in &mut values {
            *v *= scale;
        }
        Ok(Increments { kind: self.kind, dim: self.dim, values })
    }

    /// Brownian-bridge split of the level-`child_level − 1` increment at
    /// `parent_index` into its two level-`child_level` halves.
    ///
    /// Left half is `ΔW/2 + √(dt_parent/4)·Z`, right half is `ΔW − left`, so
    /// the halves sum back to the parent up to one rounding of the final
    /// addition.
    pub fn bridge_split(&self, parent: &Increments, child_level: u32, parent_index: u128) -> (Increments, Increments) {
        assert!(child_level >= 1 && child_level <= MAX_ABSOLUTE_LEVEL, "refinement level out of range");
        let half_sd = 0.5 * self.dt_at(child_level - 1).sqrt();
        let z = standard_normals(
            self.seed,
            self.kind,
            child_level,
            parent_index,
            self.stream,
            self.streams_per_step(),
        );
        let mut left = Vec::with_capacity(z.len());
        let mut right = Vec::with_capacity(z.len());
        for (&w, &zk) in parent.values.iter().zip(&z) {
            let l = 0.5 * w + half_sd * zk;
            left.push(l);
            right.push(w - l);
        }
        (
            Increments { kind: self.kind, dim: self.dim, values: left },
            Increments { kind: self.kind, dim: self.dim, values: right },
        )
    }

    /// Increment of interval `index` at absolute `level`, built by splitting
    /// from level 0.
    pub fn increment_at(&self, level: u32, index: u128) -> Result<Increments, NoiseError> {
        if level > MAX_ABSOLUTE_LEVEL {
            return Err(NoiseError::RefinementTooDeep { level, max: MAX_ABSOLUTE_LEVEL });
        }
        if level == 0 {
            return self.draw_increments(u64::try_from(index).unwrap_or(u64::MAX));
        }
        let parent = self.increment_at(level - 1, index >> 1)?;
        let (left, right) = self.bridge_split(&parent, level, index >> 1);
        Ok(if index & 1 == 0 { left } else { right })
    }
}

impl IncrementSource for NoiseBundle {
    fn kind(&self) -> NoiseKind {
        self.kind
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn steps(&self) -> u64 {
        self.steps
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn increment(&self, step: u64) -> Result<Increments, NoiseError> {
        self.draw_increments(step)
    }

    fn split(&self, parent: &Increments, depth: u32, index: u128) -> (Increments, Increments) {
        self.bridge_split(parent, depth + 1, index)
    }

    fn max_split_depth(&self) -> u32 {
        MAX_ABSOLUTE_LEVEL
    }
}

/// A [`NoiseBundle`] viewed at refinement level `level` (step `dt/2^level`).
///
/// All levels of one bundle describe the same Brownian path.
#[derive(Clone, Debug, PartialEq)]
pub struct SharedPath {
    pub base: NoiseBundle,
    pub level: u32,
    pub max_level: u32,
}

impl SharedPath {
    pub fn new(base: NoiseBundle) -> Self {
        Self { base, level: 0, max_level: DEFAULT_MAX_REFINEMENT }
    }

    pub fn with_max_level(mut self, max_level: u32) -> Self {
        self.max_level = max_level.min(MAX_ABSOLUTE_LEVEL);
        self
    }

    pub fn at_level(base: NoiseBundle, level: u32) -> Result<Self, NoiseError> {
        let mut path = Self::new(base);
        while path.level < level {
            path = path.refine()?;
        }
        Ok(path)
    }

    /// The same path at twice the resolution.
    pub fn refine(&self) -> Result<Self, NoiseError> {
        let level = self.level + 1;
        if level > self.max_level {
            return Err(NoiseError::RefinementTooDeep { level, max: self.max_level });
        }
        Ok(Self { base: self.base.clone(), level, max_level: self.max_level })
    }

    pub fn draw_increments(&self, step: u64) -> Result<Increments, NoiseError> {
        if step >= self.steps() {
            return Err(NoiseError::StepOutOfRange { index: step, steps: self.steps() });
        }
        self.base.increment_at(self.level, step as u128)
    }
}

impl IncrementSource for SharedPath {
    fn kind(&self) -> NoiseKind {
        self.base.kind
    }

    fn dim(&self) -> usize {
        self.base.dim
    }

    fn steps(&self) -> u64 {
        self.base.steps << self.level
    }

    fn dt(&self) -> f64 {
        self.base.dt_at(self.level)
    }

    fn increment(&self, step: u64) -> Result<Increments, NoiseError> {
        self.draw_increments(step)
    }

    fn split(&self, parent: &Increments, depth: u32, index: u128) -> (Increments, Increments) {
        self.base.bridge_split(parent, self.level + depth + 1, index)
    }

    fn max_split_depth(&self) -> u32 {
        MAX_ABSOLUTE_LEVEL - self.level
    }
}

/// Header of a binary noise dump.
#[derive(Clone, Debug, PartialEq)]
pub struct DumpHeader {
    pub version: u32,
    pub dim: u32,
    pub kind: NoiseKind,
    pub steps: u64,
    pub dt: f64,
    pub seed: u64,
}

/// Writes the level-0 increments of `bundle`.
///
/// Layout (all little-endian): magic `SSDENOIS`, version `u32`, p `u32`,
/// kind `u32` (0 matrix, 1 spectral, 2 complex-matrix), n `u64`, dt `f64`,
/// seed `u64`, then `n · streams_per_step` `f64` values, step-major.
pub fn write_dump<W: Write>(bundle: &NoiseBundle, mut out: W) -> Result<(), NoiseError> {
    let io = |e: std::io::Error| NoiseError::Dump(e.to_string());
    out.write_all(DUMP_MAGIC).map_err(io)?;
    out.write_all(&DUMP_VERSION.to_le_bytes()).map_err(io)?;
    out.write_all(&(bundle.dim as u32).to_le_bytes()).map_err(io)?;
    out.write_all(&bundle.kind.code().to_le_bytes()).map_err(io)?;
    out.write_all(&bundle.steps.to_le_bytes()).map_err(io)?;
    out.write_all(&bundle.dt.to_le_bytes()).map_err(io)?;
    out.write_all(&bundle.seed.to_le_bytes()).map_err(io)?;
    for k in 0..bundle.steps {
        for v in bundle.draw_increments(k)?.values() {
            out.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

pub fn read_dump<R: Read>(mut input: R) -> Result<(DumpHeader, Vec<Increments>), NoiseError> {
    let io = |e: std::io::Error| NoiseError::Dump(e.to_string());
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(io)?;
    if &magic != DUMP_MAGIC {
        return Err(NoiseError::Dump("bad magic".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    let mut u32_field = |input: &mut R| -> Result<u32, NoiseError> {
        input.read_exact(&mut b4).map_err(io)?;
        Ok(u32::from_le_bytes(b4))
    };
    let version = u32_field(&mut input)?;
    if version != DUMP_VERSION {
        return Err(NoiseError::Dump(format!("unsupported version {version}")));
    }
    let dim = u32_field(&mut input)?;
    let kind_code = u32_field(&mut input)?;
    let kind = NoiseKind::from_code(kind_code).ok_or_else(|| NoiseError::Dump(format!("unknown kind {kind_code}")))?;
    input.read_exact(&mut b8).map_err(io)?;
    let steps = u64::from_le_bytes(b8);
    input.read_exact(&mut b8).map_err(io)?;
    let dt = f64::from_le_bytes(b8);
    input.read_exact(&mut b8).map_err(io)?;
    let seed = u64::from_le_bytes(b8);

    let per_step = kind.streams_per_step(dim as usize);
    let mut steps_out = Vec::with_capacity(steps as usize);
    for _ in 0..steps {
        let mut values = Vec::with_capacity(per_step);
        for _ in 0..per_step {
            input.read_exact(&mut b8).map_err(io)?;
            values.push(f64::from_le_bytes(b8));
        }
        steps_out.push(Increments { kind, dim: dim as usize, values });
    }
    Ok((DumpHeader { version, dim, kind, steps, dt, seed }, steps_out))
}
