//! Functional model of 1-bit-cell memristor crossbars computing `a * s`.
//!
//! The secret is laid out as its negacyclic matrix: logical row `i` is input
//! coefficient `a_i`, logical column `j` collects output coefficient `j`.
//! Each entry is stored biased (`v + bias`) and bit-sliced over
//! `bits_per_coeff` adjacent physical columns, LSB first. The public operand
//! is streamed one bit plane per cycle. A column whose stored population
//! exceeds half the rows is kept complemented and corrected after readout
//! with the input popcount from the tile's all-ones unit column.
//!
//! Cells are 1-bit, so each physical column is kept as a row bitmask and a
//! bitline current is the popcount of `input & column`.

use serde::{Deserialize, Serialize};

use crate::backend::MulBackend;
use crate::error::{Error, Result};
use crate::noise::{NoiseSource, NoiseSpec};
use crate::ring::{Poly, SecretPoly};
use crate::sac::{build_sac_tree, SacTree, SacVariant, TiaSpec};
use crate::schedule::{build_stagger, required_bits, PrecisionMap};

pub const MAX_TILE_ROWS: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegacyclicMatrix {
    n: usize,
    entries: Vec<i32>,
}

impl NegacyclicMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> i32 {
        self.entries[row * self.n + col]
    }

    pub fn row(&self, row: usize) -> &[i32] {
        &self.entries[row * self.n..(row + 1) * self.n]
    }

    pub fn column(&self, col: usize) -> Vec<i32> {
        (0..self.n).map(|r| self.get(r, col)).collect()
    }

    /// `x^T M` over the integers.
    pub fn apply(&self, x: &[i64]) -> Result<Vec<i64>> {
        if x.len() != self.n {
            return Err(Error::Dimension(format!("input of {} for a {}-row matrix", x.len(), self.n)));
        }
        let mut out = vec![0i64; self.n];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0 {
                continue;
            }
            for (o, &m) in out.iter_mut().zip(self.row(i)) {
                *o += xi * m as i64;
            }
        }
        Ok(out)
    }
}

/// `entry[i][j] = s[j - i]` for `j >= i`, else `-s[n + j - i]`.
pub fn build_negacyclic_matrix(s: &SecretPoly) -> NegacyclicMatrix {
    let n = s.len();
    let c = s.coeffs();
    let mut entries = vec![0i32; n * n];
    for i in 0..n {
        for j in 0..n {
            entries[i * n + j] = if j >= i { c[j - i] } else { -c[n + j - i] };
        }
    }
    NegacyclicMatrix { n, entries }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileGeometry {
    pub rows: usize,
    pub cols: usize,
    pub cell_bits: u32,
}

impl Default for TileGeometry {
    fn default() -> Self {
        TileGeometry {
            rows: 128,
            cols: 128,
            cell_bits: 1,
        }
    }
}

impl TileGeometry {
    pub fn validate(&self, bits_per_coeff: u32) -> Result<()> {
        if self.rows == 0 || self.rows > MAX_TILE_ROWS {
            return Err(Error::Parameter(format!("tile rows must be 1..={MAX_TILE_ROWS}")));
        }
        if self.cell_bits != 1 {
            return Err(Error::Parameter("operand tiles use 1-bit cells".into()));
        }
        if bits_per_coeff == 0 || self.cols < bits_per_coeff as usize || !self.cols.is_multiple_of(bits_per_coeff as usize) {
            return Err(Error::Parameter(format!(
                "{} columns do not hold whole {bits_per_coeff}-bit coefficients",
                self.cols
            )));
        }
        Ok(())
    }

    /// Largest bitline value a flip-encoded column can produce.
    pub fn max_column_value(&self) -> u32 {
        (self.rows / 2) as u32
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossbarTile {
    pub rows: usize,
    pub cols: usize,
    pub cell_bits: u32,
    columns: Vec<u128>,
    flipped: Vec<bool>,
    writes: u64,
}

impl CrossbarTile {
    pub fn new(geometry: TileGeometry) -> Self {
        CrossbarTile {
            rows: geometry.rows,
            cols: geometry.cols,
            cell_bits: geometry.cell_bits,
            columns: vec![0; geometry.cols],
            flipped: vec![false; geometry.cols],
            writes: 0,
        }
    }

    pub fn level(&self, row: usize, col: usize) -> u8 {
        ((self.columns[col] >> row) & 1) as u8
    }

    pub fn column_mask(&self, col: usize) -> u128 {
        self.columns[col]
    }

    pub fn is_flipped(&self, col: usize) -> bool {
        self.flipped[col]
    }

    pub fn flip_count(&self) -> usize {
        self.flipped.iter().filter(|&&f| f).count()
    }

    pub fn writes(&self) -> u64 {
        self.writes
    }

    fn write_column(&mut self, col: usize, mask: u128, flipped: bool) {
        self.columns[col] = mask;
        self.flipped[col] = flipped;
        self.writes += self.rows as u64;
    }

    /// Forces one cell, bypassing the write path.
    pub fn force_cell(&mut self, row: usize, col: usize, level: u8) {
        if level & 1 == 1 {
            self.columns[col] |= 1u128 << row;
        } else {
            self.columns[col] &= !(1u128 << row);
        }
    }
}

fn row_mask(rows: usize) -> u128 {
    if rows >= 128 {
        u128::MAX
    } else {
        (1u128 << rows) - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramLayout {
    pub n_rows: usize,
    pub n_cols: usize,
    pub bits_per_coeff: u32,
    pub bias: i32,
    pub geometry: TileGeometry,
    pub row_blocks: usize,
    pub col_blocks: usize,
}

impl ProgramLayout {
    pub fn new(n: usize, geometry: TileGeometry, bits_per_coeff: u32, bias: i32) -> Result<Self> {
        geometry.validate(bits_per_coeff)?;
        let coeffs_per_tile = geometry.cols / bits_per_coeff as usize;
        Ok(ProgramLayout {
            n_rows: n,
            n_cols: n,
            bits_per_coeff,
            bias,
            geometry,
            row_blocks: n.div_ceil(geometry.rows),
            col_blocks: n.div_ceil(coeffs_per_tile),
        })
    }

    pub fn coeffs_per_tile(&self) -> usize {
        self.geometry.cols / self.bits_per_coeff as usize
    }

    pub fn tiles_used(&self) -> usize {
        self.row_blocks * self.col_blocks
    }

    /// Tiles needed to run `copies` cycles of one multiplication at once.
    pub fn tiles_for_parallelism(&self, copies: usize) -> usize {
        self.tiles_used() * copies.max(1)
    }

    pub fn tile_index(&self, row_block: usize, col_block: usize) -> usize {
        row_block * self.col_blocks + col_block
    }

    /// `(tile, physical row, physical column)` of one bit of one entry.
    pub fn locate(&self, row: usize, coeff: usize, bit: u32) -> (usize, usize, usize) {
        let cpt = self.coeffs_per_tile();
        let tile = self.tile_index(row / self.geometry.rows, coeff / cpt);
        (tile, row % self.geometry.rows, (coeff % cpt) * self.bits_per_coeff as usize + bit as usize)
    }

    pub fn rows_in_block(&self, row_block: usize) -> usize {
        (self.n_rows - row_block * self.geometry.rows).min(self.geometry.rows)
    }

    pub fn logical_cell_bits(&self) -> u64 {
        (self.n_cols * self.bits_per_coeff as usize) as u64
    }

    pub fn physical_cells(&self) -> u64 {
        (self.n_rows * self.n_cols * self.bits_per_coeff as usize) as u64
    }
}

/// Programs `m` into fresh tiles.
pub fn program_operand(
    m: &NegacyclicMatrix,
    geometry: TileGeometry,
    bits_per_coeff: u32,
    bias: i32,
) -> Result<(Vec<CrossbarTile>, ProgramLayout)> {
    let layout = ProgramLayout::new(m.n(), geometry, bits_per_coeff, bias)?;
    let mut tiles = vec![CrossbarTile::new(geometry); layout.tiles_used()];
    program_into(m, &layout, &mut tiles)?;
    Ok((tiles, layout))
}

fn program_into(m: &NegacyclicMatrix, layout: &ProgramLayout, tiles: &mut [CrossbarTile]) -> Result<()> {
    let top = 1i64 << layout.bits_per_coeff;
    if let Some(&v) = m
        .entries
        .iter()
        .find(|&&v| !(0..top).contains(&(v as i64 + layout.bias as i64)))
    {
        return Err(Error::Encoding(format!(
            "entry {v} with bias {} does not fit {} bits",
            layout.bias, layout.bits_per_coeff
        )));
    }
    // Entry (r, j) depends only on j - r, so column j of a row block is a
    // window of the bit planes of the secret read backwards and wrapped.
    let n = m.n;
    let bpc = layout.bits_per_coeff as usize;
    let words = (2 * n).div_ceil(64) + 3;
    let mut planes = vec![vec![0u64; words]; bpc];
    for t in 0..2 * n - 1 {
        let k = 2 * n - 1 - t;
        let v = if k >= n { m.get(0, k - n) } else { m.get(n - k, 0) };
        let stored = (v + layout.bias) as u32;
        for (bit, plane) in planes.iter_mut().enumerate() {
            plane[t / 64] |= (((stored >> bit) & 1) as u64) << (t % 64);
        }
    }
    let window = |plane: &[u64], start: usize| -> u128 {
        let (w, off) = (start / 64, start % 64);
        let x = plane[w] as u128 | (plane[w + 1] as u128) << 64;
        if off == 0 {
            x
        } else {
            x >> off | (plane[w + 2] as u128) << (128 - off)
        }
    };
    for rb in 0..layout.row_blocks {
        let rows = layout.rows_in_block(rb);
        let base = rb * layout.geometry.rows;
        for coeff in 0..layout.n_cols {
            for (bit, plane) in planes.iter().enumerate() {
                let mask = window(plane, n - 1 - coeff + base) & row_mask(rows);
                let (tile, _, col) = layout.locate(base, coeff, bit as u32);
                if mask.count_ones() as usize * 2 > rows {
                    tiles[tile].write_column(col, !mask & row_mask(rows), true);
                } else {
                    tiles[tile].write_column(col, mask, false);
                }
            }
        }
    }
    Ok(())
}

/// Input bit plane per row block as masks.
fn input_masks(input_bits: &[u8], layout: &ProgramLayout) -> Vec<u128> {
    let rows = layout.geometry.rows;
    (0..layout.row_blocks)
        .map(|rb| {
            let mut m = 0u128;
            for r in 0..layout.rows_in_block(rb) {
                if input_bits[rb * rows + r] & 1 == 1 {
                    m |= 1u128 << r;
                }
            }
            m
        })
        .collect()
}

/// One row block of one tile read against one input bit plane.
struct BlockRead<'a> {
    columns: &'a [u128],
    flipped: &'a [bool],
    x: u128,
    unit: i64,
    top: u64,
}

impl BlockRead<'_> {
    /// Adds the flip-corrected, masked and shifted codes into `out`;
    /// `per_k` is `(live, mask, shift)` per bit column. Returns saturations.
    fn accumulate<const B: usize>(&self, out: &mut [i64], per_k: &[(i64, u64, usize)]) -> u64 {
        let per_k: &[(i64, u64, usize); B] = per_k.try_into().expect("one entry per bit column");
        let mut saturated = 0;
        let coeffs = self.columns.chunks_exact(B).zip(self.flipped.chunks_exact(B));
        for (o, (cols, flips)) in out.iter_mut().zip(coeffs) {
            let mut sum = 0i64;
            for k in 0..B {
                let (live, mask, shift) = per_k[k];
                let raw = (self.x & cols[k]).count_ones() as u64;
                saturated += (raw > self.top) as u64 & live as u64;
                let code = (raw.min(self.top) & mask) as i64;
                let f = flips[k] as i64;
                sum += (live * (f * self.unit + (1 - 2 * f) * code)) << shift;
            }
            *o += sum;
        }
        saturated
    }

    fn accumulate_dyn(&self, out: &mut [i64], per_k: &[(i64, u64, usize)]) -> u64 {
        let b = per_k.len();
        let mut saturated = 0;
        let coeffs = self.columns.chunks_exact(b).zip(self.flipped.chunks_exact(b));
        for (o, (cols, flips)) in out.iter_mut().zip(coeffs) {
            for (k, &(live, mask, shift)) in per_k.iter().enumerate() {
                let raw = (self.x & cols[k]).count_ones() as u64;
                saturated += (raw > self.top) as u64 & live as u64;
                let code = (raw.min(self.top) & mask) as i64;
                let f = flips[k] as i64;
                *o += (live * (f * self.unit + (1 - 2 * f) * code)) << shift;
            }
        }
        saturated
    }
}

/// Raw bitline value of every physical column of every tile for one input
/// bit plane. Flipped columns are returned as read; see [`correct_flip`].
pub fn stream_cycle(
    tiles: &[CrossbarTile],
    layout: &ProgramLayout,
    input_bits: &[u8],
    mut noise: Option<&mut NoiseSource>,
) -> Result<Vec<Vec<f64>>> {
    if input_bits.len() != layout.n_rows {
        return Err(Error::Dimension(format!(
            "{} input bits for {} rows",
            input_bits.len(),
            layout.n_rows
        )));
    }
    let masks = input_masks(input_bits, layout);
    Ok(tiles
        .iter()
        .enumerate()
        .map(|(t, tile)| {
            let x = masks[t / layout.col_blocks];
            tile.columns
                .iter()
                .map(|&col| {
                    let raw = (x & col).count_ones();
                    match noise.as_deref_mut() {
                        Some(src) => src.cell_sum(raw),
                        None => raw as f64,
                    }
                })
                .collect()
        })
        .collect())
}

/// Popcount of an input bit plane per row block, as the unit column reads it.
pub fn unit_column_counts(layout: &ProgramLayout, input_bits: &[u8]) -> Vec<u32> {
    input_masks(input_bits, layout).iter().map(|m| m.count_ones()).collect()
}

pub fn correct_flip(value: i64, flipped: bool, unit: u32) -> i64 {
    if flipped {
        unit as i64 - value
    } else {
        value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdcSpec {
    pub bits: u32,
    pub range_max: f64,
    pub samples_per_second: f64,
}

impl AdcSpec {
    pub fn new(bits: u32, range_max: f64) -> Result<Self> {
        if bits == 0 || bits > 62 || range_max <= 0.0 {
            return Err(Error::Parameter(format!("ADC of {bits} bits, range {range_max}")));
        }
        Ok(AdcSpec {
            bits,
            range_max,
            samples_per_second: 1e9,
        })
    }

    /// Narrowest ADC mapping integer levels `0..=max_level` one to one.
    pub fn exact(max_level: u64) -> Self {
        let bits = (64 - max_level.leading_zeros()).max(1);
        AdcSpec {
            bits,
            range_max: ((1u64 << bits) - 1) as f64,
            samples_per_second: 1e9,
        }
    }

    pub fn full_scale(&self) -> u64 {
        (1u64 << self.bits) - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdcReading {
    pub code: u64,
    pub saturated: bool,
}

/// Round-to-nearest on `[0, 2^bits - 1]` with clamping at both ends.
pub fn adc_read(value: f64, adc: &AdcSpec) -> AdcReading {
    let top = adc.full_scale();
    let scaled = (value / adc.range_max * top as f64).round();
    if scaled > top as f64 {
        AdcReading { code: top, saturated: true }
    } else if scaled < 0.0 {
        AdcReading { code: 0, saturated: false }
    } else {
        AdcReading {
            code: scaled as u64,
            saturated: false,
        }
    }
}

/// Width of the single ADC sample that reads a SAC root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum RootAdcPolicy {
    /// Enough bits for the largest ideal root value.
    #[default]
    FullWidth,
    /// Only the low `target_mod_bits` of the root are resolved.
    Modulo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Readout {
    /// Every column sample is converted and shift-added digitally.
    #[default]
    Digital,
    Sac(SacVariant),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossbarConfig {
    pub geometry: TileGeometry,
    pub bits_per_coeff: u32,
    pub bias: i32,
    pub readout: Readout,
    /// Keep only the sample bits that reach the result modulo `2^bits(a)`.
    pub truncate: bool,
    /// Rotate the cycle order of consecutive multiplications.
    pub stagger: bool,
    /// Multiplications in one ADC sharing group.
    pub group: usize,
    pub root_policy: RootAdcPolicy,
    pub noise: NoiseSpec,
    pub tia: TiaSpec,
    pub cache_capacity: usize,
    pub max_cell_bits: u32,
}

impl Default for CrossbarConfig {
    fn default() -> Self {
        CrossbarConfig {
            geometry: TileGeometry::default(),
            bits_per_coeff: 4,
            bias: 4,
            readout: Readout::Digital,
            truncate: false,
            stagger: false,
            group: 3,
            root_policy: RootAdcPolicy::FullWidth,
            noise: NoiseSpec::ideal(),
            tia: TiaSpec::default(),
            cache_capacity: 3,
            max_cell_bits: 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EngineStats {
    pub mults: u64,
    pub programs: u64,
    /// Bits of secret coefficients written, `n * bits_per_coeff` per program.
    pub operand_cell_bits: u64,
    /// Cells rewritten, including every shifted copy in the matrix.
    pub physical_cell_writes: u64,
    pub cycles: u64,
    pub samples: u64,
    pub skipped_samples: u64,
    pub saturations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StuckAt {
    pub slot: usize,
    pub tile: usize,
    pub row: usize,
    pub col: usize,
    pub level: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellMismatch {
    pub slot: usize,
    pub tile: usize,
    pub row: usize,
    pub col: usize,
    pub expected: u8,
    pub actual: u8,
}

#[derive(Debug, Clone)]
struct Programmed {
    key: Vec<i32>,
    matrix: NegacyclicMatrix,
    tiles: Vec<CrossbarTile>,
    last_use: u64,
}

/// A crossbar tile used as a multiplication backend. The secret operands of
/// recent calls stay programmed, so repeated use of one key costs no writes.
#[derive(Debug, Clone)]
pub struct CrossbarEngine {
    pub config: CrossbarConfig,
    layout: Option<ProgramLayout>,
    slots: Vec<Programmed>,
    faults: Vec<StuckAt>,
    noise: Option<NoiseSource>,
    trees: Vec<(usize, SacTree)>,
    stats: EngineStats,
    clock: u64,
}

impl CrossbarEngine {
    pub fn new(config: CrossbarConfig) -> Result<Self> {
        config.geometry.validate(config.bits_per_coeff)?;
        config.noise.validate()?;
        if config.cache_capacity == 0 || config.group == 0 {
            return Err(Error::Parameter("cache capacity and group size must be positive".into()));
        }
        let noise = (!config.noise.is_ideal()).then(|| NoiseSource::new(config.noise));
        Ok(CrossbarEngine {
            config,
            layout: None,
            slots: Vec::new(),
            faults: Vec::new(),
            noise,
            trees: Vec::new(),
            stats: EngineStats::default(),
            clock: 0,
        })
    }

    pub fn ideal() -> Self {
        CrossbarEngine::new(CrossbarConfig::default()).expect("default config is valid")
    }

    pub fn stats(&self) -> EngineStats {
        self.stats
    }

    pub fn reset_stats(&mut self) {
        self.stats = EngineStats::default();
    }

    pub fn layout(&self) -> Option<&ProgramLayout> {
        self.layout.as_ref()
    }

    pub fn tiles(&self, slot: usize) -> Option<&[CrossbarTile]> {
        self.slots.get(slot).map(|p| p.tiles.as_slice())
    }

    /// Replaces the noise model; `None` restores ideal behaviour.
    pub fn set_noise(&mut self, spec: Option<NoiseSpec>) -> Result<()> {
        match spec {
            Some(s) => {
                s.validate()?;
                self.config.noise = s;
                self.noise = (!s.is_ideal()).then(|| NoiseSource::new(s));
            }
            None => {
                self.config.noise = NoiseSpec::ideal();
                self.noise = None;
            }
        }
        Ok(())
    }

    pub fn reseed_noise(&mut self, seed: u64) {
        if let Some(src) = self.noise.as_mut() {
            src.reseed(seed);
        }
    }

    /// Programs secrets ahead of use.
    pub fn preload(&mut self, secrets: &[SecretPoly]) -> Result<()> {
        for s in secrets {
            self.slot_for(s)?;
        }
        Ok(())
    }

    /// Sticks a cell of a cache slot at `level`, now and after reprogramming.
    pub fn inject_fault(&mut self, fault: StuckAt) {
        if let Some(p) = self.slots.get_mut(fault.slot) {
            p.tiles[fault.tile].force_cell(fault.row, fault.col, fault.level);
        }
        self.faults.push(fault);
    }

    pub fn clear_faults(&mut self) {
        self.faults.clear();
    }

    /// Cells whose contents differ from a fresh encoding of their key.
    pub fn audit(&self) -> Result<Vec<CellMismatch>> {
        let Some(layout) = self.layout else {
            return Ok(Vec::new());
        };
        let mut out = Vec::new();
        for (slot, p) in self.slots.iter().enumerate() {
            let (fresh, _) = program_operand(&p.matrix, layout.geometry, layout.bits_per_coeff, layout.bias)?;
            for (t, (want, have)) in fresh.iter().zip(&p.tiles).enumerate() {
                for col in 0..want.cols {
                    let diff = want.columns[col] ^ have.columns[col];
                    for row in (0..want.rows).filter(|r| (diff >> r) & 1 == 1) {
                        out.push(CellMismatch {
                            slot,
                            tile: t,
                            row,
                            col,
                            expected: want.level(row, col),
                            actual: have.level(row, col),
                        });
                    }
                }
            }
        }
        Ok(out)
    }

    fn slot_for(&mut self, s: &SecretPoly) -> Result<usize> {
        self.clock += 1;
        let layout = match self.layout {
            Some(l) if l.n_rows == s.len() => l,
            _ => {
                let l = ProgramLayout::new(s.len(), self.config.geometry, self.config.bits_per_coeff, self.config.bias)?;
                self.layout = Some(l);
                self.slots.clear();
                l
            }
        };
        if let Some(i) = self.slots.iter().position(|p| p.key == s.coeffs()) {
            self.slots[i].last_use = self.clock;
            return Ok(i);
        }
        let matrix = build_negacyclic_matrix(s);
        let slot = if self.slots.len() < self.config.cache_capacity {
            self.slots.push(Programmed {
                key: Vec::new(),
                matrix: NegacyclicMatrix { n: 0, entries: Vec::new() },
                tiles: vec![CrossbarTile::new(layout.geometry); layout.tiles_used()],
                last_use: 0,
            });
            self.slots.len() - 1
        } else {
            self.slots
                .iter()
                .enumerate()
                .min_by_key(|(_, p)| p.last_use)
                .map(|(i, _)| i)
                .expect("non-empty cache")
        };
        let entry = &mut self.slots[slot];
        let before: u64 = entry.tiles.iter().map(CrossbarTile::writes).sum();
        program_into(&matrix, &layout, &mut entry.tiles)?;
        let after: u64 = entry.tiles.iter().map(CrossbarTile::writes).sum();
        entry.key = s.coeffs().to_vec();
        entry.matrix = matrix;
        entry.last_use = self.clock;
        for f in self.faults.iter().filter(|f| f.slot == slot) {
            entry.tiles[f.tile].force_cell(f.row, f.col, f.level);
        }
        self.stats.programs += 1;
        self.stats.operand_cell_bits += layout.logical_cell_bits();
        self.stats.physical_cell_writes += after - before;
        Ok(slot)
    }

    fn tree(&mut self, variant: SacVariant, cycles: usize) -> Result<SacTree> {
        if let Some((_, t)) = self.trees.iter().find(|(c, t)| *c == cycles && t.variant == variant) {
            return Ok(t.clone());
        }
        let t = build_sac_tree(variant, self.config.bits_per_coeff as usize, cycles, self.config.max_cell_bits)?;
        self.trees.push((cycles, t.clone()));
        Ok(t)
    }

    fn cycle_order(&self, cycles: usize, target: u32, sample_bits: u32) -> Result<Vec<usize>> {
        if !self.config.stagger {
            return Ok((0..cycles).collect());
        }
        let map = PrecisionMap::new(cycles, self.config.bits_per_coeff as usize, target, sample_bits);
        let sched = build_stagger(self.config.group, cycles, map.full_precision_cycles())?;
        let member = ((self.stats.mults - 1) % self.config.group as u64) as usize;
        Ok(sched.order(member))
    }

    fn multiply(&mut self, a: &Poly, s: &SecretPoly) -> Result<Poly> {
        if a.len() != s.len() {
            return Err(Error::Dimension(format!("degrees {} and {}", a.len(), s.len())));
        }
        self.stats.mults += 1;
        let slot = self.slot_for(s)?;
        let layout = self.layout.expect("programmed");
        let n = a.len();
        let cycles = a.bits() as usize;
        let target = a.bits();
        let bpc = layout.bits_per_coeff as usize;
        let cpt = layout.coeffs_per_tile();
        let adc = AdcSpec::exact(layout.geometry.max_column_value() as u64);
        let order = self.cycle_order(cycles, target, adc.bits)?;
        let tree = match self.config.readout {
            Readout::Sac(v) => Some(self.tree(v, cycles)?),
            Readout::Digital => None,
        };
        let mut acc = vec![0i64; n];
        let mut leaves = vec![0f64; if tree.is_some() { n * cycles * bpc } else { 0 }];
        let mut bias_term = 0i64;
        let tiles = &self.slots[slot].tiles;
        for &c in &order {
            self.stats.cycles += 1;
            let bits: Vec<u8> = a.coeffs().iter().map(|&v| ((v >> c) & 1) as u8).collect();
            let masks = input_masks(&bits, &layout);
            let units: Vec<u32> = masks.iter().map(|m| m.count_ones()).collect();
            bias_term += (layout.bias as i64 * units.iter().sum::<u32>() as i64) << c;
            if tree.is_none() && self.noise.is_none() {
                let need: Vec<u32> = (0..bpc)
                    .map(|k| if self.config.truncate { required_bits(c, k, target, adc.bits) } else { adc.bits })
                    .collect();
                let top = adc.full_scale();
                let per_k: Vec<(i64, u64, usize)> = (0..bpc)
                    .map(|k| ((need[k] > 0) as i64, (1u64 << need[k]) - 1, c + k))
                    .collect();
                let per_coeff = need.iter().filter(|&&b| b > 0).count() as u64;
                let (mut taken, mut saturated) = (0u64, 0u64);
                for (t, tile) in tiles.iter().enumerate() {
                    let rb = t / layout.col_blocks;
                    let first = (t % layout.col_blocks) * cpt;
                    let count = (n.saturating_sub(first)).min(cpt);
                    let read = BlockRead {
                        columns: &tile.columns[..count * bpc],
                        flipped: &tile.flipped[..count * bpc],
                        x: masks[rb],
                        unit: units[rb] as i64,
                        top,
                    };
                    let out = &mut acc[first..first + count];
                    saturated += match bpc {
                        4 => read.accumulate::<4>(out, &per_k),
                        _ => read.accumulate_dyn(out, &per_k),
                    };
                    taken += per_coeff * count as u64;
                }
                let skipped = (bpc as u64 - per_coeff) * (layout.row_blocks * n) as u64;
                self.stats.samples += taken;
                self.stats.skipped_samples += skipped;
                self.stats.saturations += saturated;
                continue;
            }
            for (t, tile) in tiles.iter().enumerate() {
                let rb = t / layout.col_blocks;
                let cb = t % layout.col_blocks;
                let x = masks[rb];
                for local in 0..cpt {
                    let j = cb * cpt + local;
                    if j >= n {
                        break;
                    }
                    for k in 0..bpc {
                        let pc = local * bpc + k;
                        let raw = (x & tile.columns[pc]).count_ones();
                        let flipped = tile.flipped[pc];
                        if tree.is_some() {
                            let analog = match self.noise.as_mut() {
                                Some(src) => src.cell_sum(raw),
                                None => raw as f64,
                            };
                            let v = if flipped { units[rb] as f64 - analog } else { analog };
                            leaves[(j * cycles + c) * bpc + k] += v;
                            continue;
                        }
                        let need = if self.config.truncate {
                            required_bits(c, k, target, adc.bits)
                        } else {
                            adc.bits
                        };
                        if need == 0 {
                            self.stats.skipped_samples += 1;
                            continue;
                        }
                        let analog = match self.noise.as_mut() {
                            Some(src) => src.cell_sum(raw),
                            None => raw as f64,
                        };
                        let reading = adc_read(analog, &adc);
                        self.stats.samples += 1;
                        self.stats.saturations += reading.saturated as u64;
                        let code = (reading.code & ((1u64 << need) - 1)) as i64;
                        acc[j] += correct_flip(code, flipped, units[rb]) << (c + k);
                    }
                }
            }
        }
        if let Some(tree) = tree {
            let leaf_max = (layout.row_blocks * layout.geometry.rows) as u64;
            let root_adc = AdcSpec::exact((1u64 << tree.root_bits(leaf_max).max(1)) - 1);
            let tia = self.config.tia;
            for (j, chunk) in leaves.chunks(cycles * bpc).enumerate() {
                let roots = tree.eval_roots(chunk, self.noise.as_mut().map(|s| (s, &tia)))?;
                for (value, root) in roots.iter().zip(&tree.roots) {
                    let reading = adc_read(*value, &root_adc);
                    self.stats.samples += 1;
                    self.stats.saturations += reading.saturated as u64;
                    let code = match self.config.root_policy {
                        RootAdcPolicy::FullWidth => reading.code,
                        RootAdcPolicy::Modulo => {
                            let window = target.saturating_sub(root.digital_shift);
                            (value.round().max(0.0) as u64) & ((1u64 << window) - 1)
                        }
                    };
                    acc[j] += (code as i64) << root.digital_shift;
                }
            }
        }
        let out: Vec<i64> = acc.iter().map(|&v| v - bias_term).collect();
        Ok(Poly::from_signed(&out, a.bits()))
    }
}

impl MulBackend for CrossbarEngine {
    fn mul(&mut self, a: &Poly, s: &SecretPoly) -> Result<Poly> {
        self.multiply(a, s)
    }

    fn name(&self) -> String {
        match self.config.readout {
            Readout::Digital => "crossbar".into(),
            Readout::Sac(v) => format!("crossbar-sac-{v}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polymult::schoolbook_mul;
    use rand::{Rng, SeedableRng};

    #[test]
    fn programmed_cells_match_biased_entries() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for n in [256usize, 100, 8] {
            let s = SecretPoly::new((0..n).map(|_| rng.random_range(-4..=4)).collect());
            let m = build_negacyclic_matrix(&s);
            let (tiles, layout) = program_operand(&m, TileGeometry::default(), 4, 4).unwrap();
            for r in 0..n {
                for j in 0..n {
                    let stored = (m.get(r, j) + 4) as u8;
                    for bit in 0..4u32 {
                        let (t, pr, pc) = layout.locate(r, j, bit);
                        let cell = tiles[t].level(pr, pc) ^ tiles[t].is_flipped(pc) as u8;
                        assert_eq!(cell, (stored >> bit) & 1, "n {n} entry ({r}, {j}) bit {bit}");
                    }
                }
            }
        }
    }

    fn random_secret(rng: &mut impl Rng, n: usize) -> SecretPoly {
        SecretPoly::new((0..n).map(|_| rng.random_range(-4..=4)).collect())
    }

    #[test]
    fn degree_three_columns_match_worked_example() {
        let (b0, b1, b2) = (2, 3, 5);
        let m = build_negacyclic_matrix(&SecretPoly::new(vec![b0, b1, b2]));
        // the worked example lists rows for input (a2, a1, a0)
        let reversed = |col: usize| -> Vec<i32> { m.column(col).into_iter().rev().collect() };
        assert_eq!(reversed(0), vec![-b1, -b2, b0]);
        assert_eq!(reversed(1), vec![-b2, b0, b1]);
        assert_eq!(reversed(2), vec![b0, b1, b2]);
    }

    #[test]
    fn constant_one_gives_signed_identity_band() {
        let mut c = vec![0; 4];
        c[0] = 1;
        let m = build_negacyclic_matrix(&SecretPoly::new(c));
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m.get(i, j), (i == j) as i32);
            }
        }
        let mut c = vec![0; 4];
        c[1] = 1;
        let m = build_negacyclic_matrix(&SecretPoly::new(c));
        assert_eq!(m.get(3, 0), -1);
        assert_eq!(m.get(0, 1), 1);
    }

    #[test]
    fn matrix_product_matches_schoolbook() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let s = random_secret(&mut rng, 256);
            let a = Poly::new((0..256).map(|_| rng.random_range(0..8192)).collect(), 13).unwrap();
            let m = build_negacyclic_matrix(&s);
            let y = Poly::from_signed(&m.apply(&a.as_i64()).unwrap(), 13);
            assert_eq!(y, schoolbook_mul(&a, &s.to_poly(13)).unwrap());
        }
    }

    #[test]
    fn tile_counts_for_one_multiplication() {
        let l = ProgramLayout::new(256, TileGeometry::default(), 4, 4).unwrap();
        assert_eq!(l.tiles_used(), 16);
        assert_eq!(3 * l.tiles_used(), 48);
        assert_eq!(l.tiles_for_parallelism(2), 32);
        assert_eq!(l.locate(200, 40, 3), (8 + 1, 72, 8 * 4 + 3));
    }

    fn decoded(tiles: &[CrossbarTile], layout: &ProgramLayout, row: usize, coeff: usize) -> u32 {
        (0..layout.bits_per_coeff)
            .map(|b| {
                let (t, r, col) = layout.locate(row, coeff, b);
                let lvl = tiles[t].level(r, col) as u32;
                let bit = if tiles[t].is_flipped(col) { 1 - lvl } else { lvl };
                bit << b
            })
            .sum()
    }

    #[test]
    fn bias_endpoints() {
        let geom = TileGeometry { rows: 4, cols: 16, cell_bits: 1 };
        let (tiles, layout) =
            program_operand(&build_negacyclic_matrix(&SecretPoly::new(vec![-4, 4, 0, 0])), geom, 4, 4).unwrap();
        assert_eq!(decoded(&tiles, &layout, 0, 0), 0);
        assert_eq!(decoded(&tiles, &layout, 0, 1), 8);
    }

    #[test]
    fn zero_matrix_stores_the_bias_pattern() {
        let geom = TileGeometry { rows: 4, cols: 16, cell_bits: 1 };
        let (tiles, layout) = program_operand(&build_negacyclic_matrix(&SecretPoly::zero(8)), geom, 4, 4).unwrap();
        assert_eq!(layout.tiles_used(), 4);
        for row in 0..8 {
            for coeff in 0..8 {
                assert_eq!(decoded(&tiles, &layout, row, coeff), 4);
            }
        }
        // the all-ones bit-2 columns are the only ones kept complemented
        for t in &tiles {
            for col in 0..t.cols {
                assert_eq!(t.is_flipped(col), col % 4 == 2);
                assert_eq!(t.column_mask(col), 0);
            }
        }
    }

    #[test]
    fn out_of_range_entry_is_rejected() {
        let m = build_negacyclic_matrix(&SecretPoly::new(vec![-5, 0, 0, 0]));
        let geom = TileGeometry { rows: 4, cols: 16, cell_bits: 1 };
        assert!(matches!(program_operand(&m, geom, 4, 4), Err(Error::Encoding(_))));
    }

    #[test]
    fn flip_encoding_bounds_bitline_values() {
        let m = build_negacyclic_matrix(&SecretPoly::new(vec![3; 256]));
        let (tiles, layout) = program_operand(&m, TileGeometry::default(), 4, 4).unwrap();
        let out = stream_cycle(&tiles, &layout, &[1u8; 256], None).unwrap();
        assert!(out.iter().flatten().all(|&v| v <= 64.0));
        assert!(tiles.iter().any(|t| t.flip_count() > 0));
        let zero = stream_cycle(&tiles, &layout, &[0u8; 256], None).unwrap();
        assert!(zero.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn adc_rounding_and_saturation() {
        let adc = AdcSpec::new(6, 63.0).unwrap();
        assert_eq!(adc_read(63.0, &adc).code, 63);
        assert_eq!(adc_read(63.4, &adc).code, 63);
        let sat = adc_read(70.0, &adc);
        assert_eq!(sat, AdcReading { code: 63, saturated: true });
        assert_eq!(AdcSpec::exact(64).bits, 7);
    }

    #[test]
    fn ideal_engine_matches_schoolbook() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let configs = [
            CrossbarConfig::default(),
            CrossbarConfig { truncate: true, stagger: true, ..Default::default() },
            CrossbarConfig { readout: Readout::Sac(SacVariant::Basic), ..Default::default() },
            CrossbarConfig { readout: Readout::Sac(SacVariant::All), ..Default::default() },
            CrossbarConfig {
                readout: Readout::Sac(SacVariant::All),
                root_policy: RootAdcPolicy::Modulo,
                ..Default::default()
            },
        ];
        for cfg in configs {
            let mut e = CrossbarEngine::new(cfg).unwrap();
            for bits in [10, 13] {
                let s = random_secret(&mut rng, 256);
                let a = Poly::new((0..256).map(|_| rng.random_range(0..1 << bits)).collect(), bits).unwrap();
                assert_eq!(e.mul(&a, &s).unwrap(), schoolbook_mul(&a, &s.to_poly(bits)).unwrap(), "{cfg:?}");
            }
            assert_eq!(e.stats().saturations, 0);
        }
    }

    #[test]
    fn cache_avoids_rewrites() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let mut e = CrossbarEngine::ideal();
        let s = random_secret(&mut rng, 256);
        let a = Poly::zero(256, 10);
        e.mul(&a, &s).unwrap();
        let first = e.stats();
        assert_eq!(first.operand_cell_bits, 1024);
        assert_eq!(first.physical_cell_writes, 256 * 256 * 4);
        e.mul(&a, &s).unwrap();
        assert_eq!(e.stats().physical_cell_writes, first.physical_cell_writes);
    }

    #[test]
    fn stuck_cell_is_found_by_audit() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut e = CrossbarEngine::ideal();
        let s = random_secret(&mut rng, 256);
        e.preload(std::slice::from_ref(&s)).unwrap();
        let level = 1 - e.tiles(0).unwrap()[3].level(10, 20);
        e.inject_fault(StuckAt { slot: 0, tile: 3, row: 10, col: 20, level });
        let found = e.audit().unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!((found[0].tile, found[0].row, found[0].col), (3, 10, 20));
    }
}
