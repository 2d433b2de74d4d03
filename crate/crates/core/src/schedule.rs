//! ADC precision planning under a power-of-two modulus, staggered cycle
//! order across crossbars, and routing of samples to shared ADCs.
//!
//! A sample taken at `cycle` from bit column `column` is shifted left by
//! `cycle + column` before accumulation, so only its low
//! `target_mod_bits - cycle - column` bits can reach the final coefficient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn required_bits(cycle: usize, column: usize, target_mod_bits: u32, sample_bits: u32) -> u32 {
    let shift = (cycle + column) as i64;
    (target_mod_bits as i64 - shift).clamp(0, sample_bits as i64) as u32
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionMap {
    pub target_mod_bits: u32,
    pub sample_bits: u32,
    /// `required[cycle][column]`
    pub required: Vec<Vec<u32>>,
}

impl PrecisionMap {
    pub fn new(cycles: usize, columns: usize, target_mod_bits: u32, sample_bits: u32) -> Self {
        let required = (0..cycles)
            .map(|c| (0..columns).map(|k| required_bits(c, k, target_mod_bits, sample_bits)).collect())
            .collect();
        PrecisionMap {
            target_mod_bits,
            sample_bits,
            required,
        }
    }

    pub fn cycles(&self) -> usize {
        self.required.len()
    }

    pub fn columns(&self) -> usize {
        self.required.first().map_or(0, Vec::len)
    }

    /// Cycles whose column 0 needs the full sample width.
    pub fn full_precision_cycles(&self) -> usize {
        self.required.iter().filter(|r| r.first() == Some(&self.sample_bits)).count()
    }

    /// Samples per coefficient that need at least one bit.
    pub fn effective_samples(&self) -> usize {
        self.required.iter().flatten().filter(|&&b| b > 0).count()
    }

    /// Histogram of sample widths, index = bits.
    pub fn width_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.sample_bits as usize + 1];
        for &b in self.required.iter().flatten() {
            h[b as usize] += 1;
        }
        h
    }

    /// Drops the bits of each sample that cannot reach the result.
    pub fn truncate(&self, samples: &[Vec<u64>]) -> Vec<Vec<u64>> {
        samples
            .iter()
            .zip(&self.required)
            .map(|(row, req)| row.iter().zip(req).map(|(&s, &b)| s & ((1u64 << b) - 1)).collect())
            .collect()
    }
}

/// `sum samples[c][k] << (c + k)` reduced mod `2^target_mod_bits`.
pub fn accumulate_coefficient(samples: &[Vec<u64>], target_mod_bits: u32) -> u64 {
    let mut acc = 0u64;
    for (c, row) in samples.iter().enumerate() {
        for (k, &s) in row.iter().enumerate() {
            let shift = c + k;
            if shift < 64 {
                acc = acc.wrapping_add(s.wrapping_shl(shift as u32));
            }
        }
    }
    if target_mod_bits >= 64 {
        acc
    } else {
        acc & ((1u64 << target_mod_bits) - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaggeredSchedule {
    pub num_cycles: usize,
    pub group_size: usize,
    /// Rotation of crossbar `i` within its group.
    pub offsets: Vec<usize>,
}

impl StaggeredSchedule {
    pub fn num_crossbars(&self) -> usize {
        self.offsets.len()
    }

    pub fn group_of(&self, crossbar: usize) -> usize {
        crossbar / self.group_size
    }

    pub fn groups(&self) -> usize {
        self.offsets.len().div_ceil(self.group_size)
    }

    /// Logical cycle that `crossbar` executes at time `slot`.
    pub fn cycle_at(&self, crossbar: usize, slot: usize) -> usize {
        (slot + self.offsets[crossbar]) % self.num_cycles
    }

    pub fn order(&self, crossbar: usize) -> Vec<usize> {
        (0..self.num_cycles).map(|t| self.cycle_at(crossbar, t)).collect()
    }

    /// Largest number of crossbars of one group demanding full precision in
    /// the same slot.
    pub fn max_full_precision_collisions(&self, map: &PrecisionMap) -> usize {
        let mut worst = 0;
        for g in 0..self.groups() {
            let members = (g * self.group_size)..((g + 1) * self.group_size).min(self.num_crossbars());
            for t in 0..self.num_cycles {
                let n = members
                    .clone()
                    .filter(|&x| map.required[self.cycle_at(x, t)].first() == Some(&map.sample_bits))
                    .count();
                worst = worst.max(n);
            }
        }
        worst
    }
}

/// Evenly spread rotations. Groups are sized so that the contiguous
/// full-precision cycles of different members never overlap.
pub fn build_stagger(num_crossbars: usize, num_cycles: usize, full_precision_cycles: usize) -> Result<StaggeredSchedule> {
    if num_crossbars == 0 || num_cycles == 0 {
        return Err(Error::Parameter("stagger needs at least one crossbar and cycle".into()));
    }
    let capacity = if full_precision_cycles == 0 {
        num_crossbars
    } else {
        (num_cycles / full_precision_cycles).max(1)
    };
    let group_size = capacity.min(num_crossbars).min(num_cycles).max(1);
    let offsets = (0..num_crossbars)
        .map(|i| (i % group_size) * num_cycles / group_size)
        .collect();
    Ok(StaggeredSchedule {
        num_cycles,
        group_size,
        offsets,
    })
}

/// ADC sets a sharing group can route to. A crossbar's samples from one slot
/// go to the cheapest port wide enough for the widest of them; inside a port
/// each sample goes to the narrowest ADC that fits it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharingPolicy {
    pub ports: Vec<Vec<u32>>,
}

impl SharingPolicy {
    pub fn single(bits: u32) -> Self {
        SharingPolicy {
            ports: vec![vec![bits]],
        }
    }

    /// One full-width ADC, and a one-bit-narrower ADC split with a two-bit
    /// narrower one.
    pub fn split(sample_bits: u32) -> Self {
        SharingPolicy {
            ports: vec![vec![sample_bits], vec![sample_bits - 1, sample_bits - 2]],
        }
    }

    /// Full, one-bit-narrower and two-bit-narrower ADCs behind one port, so
    /// every sample takes the narrowest that fits.
    pub fn graded(sample_bits: u32) -> Self {
        SharingPolicy {
            ports: vec![(sample_bits.saturating_sub(2).max(1)..=sample_bits).rev().collect()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdcLoad {
    pub bits: u32,
    pub port: usize,
    pub samples: u64,
    /// (crossbar, slot) pairs that sent at least one sample.
    pub slots: u64,
    pub crossbars: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdcAssignment {
    pub adcs: Vec<AdcLoad>,
    pub produced: u64,
    pub skipped: u64,
}

impl AdcAssignment {
    pub fn routed(&self) -> u64 {
        self.adcs.iter().map(|a| a.samples).sum()
    }

    pub fn utilization(&self) -> Vec<f64> {
        let total = self.routed().max(1) as f64;
        self.adcs.iter().map(|a| a.samples as f64 / total).collect()
    }

    pub fn samples_at(&self, bits: u32) -> u64 {
        self.adcs.iter().filter(|a| a.bits == bits).map(|a| a.samples).sum()
    }

    pub fn load(&self, port: usize, bits: u32) -> Option<&AdcLoad> {
        self.adcs.iter().find(|a| a.port == port && a.bits == bits)
    }
}

/// Routes one coefficient's worth of samples per crossbar per slot.
pub fn assign_adcs(schedule: &StaggeredSchedule, map: &PrecisionMap, policy: &SharingPolicy) -> Result<AdcAssignment> {
    if map.cycles() != schedule.num_cycles {
        return Err(Error::Dimension(format!(
            "precision map has {} cycles, schedule {}",
            map.cycles(),
            schedule.num_cycles
        )));
    }
    if policy.ports.is_empty() || policy.ports.iter().any(Vec::is_empty) {
        return Err(Error::Assignment("empty sharing policy".into()));
    }
    let mut adcs: Vec<AdcLoad> = policy
        .ports
        .iter()
        .enumerate()
        .flat_map(|(p, widths)| {
            widths.iter().map(move |&bits| AdcLoad {
                bits,
                port: p,
                samples: 0,
                slots: 0,
                crossbars: Vec::new(),
            })
        })
        .collect();
    let mut produced = 0;
    let mut skipped = 0;
    for x in 0..schedule.num_crossbars() {
        for t in 0..schedule.num_cycles {
            let widths = &map.required[schedule.cycle_at(x, t)];
            let widest = widths.iter().copied().max().unwrap_or(0);
            produced += widths.len() as u64;
            skipped += widths.iter().filter(|&&w| w == 0).count() as u64;
            if widest == 0 {
                continue;
            }
            let port = policy
                .ports
                .iter()
                .enumerate()
                .filter(|(_, ws)| ws.iter().copied().max().unwrap_or(0) >= widest)
                .min_by_key(|(_, ws)| ws.iter().copied().max().unwrap_or(0))
                .map(|(p, _)| p)
                .ok_or_else(|| Error::Assignment(format!("no ADC resolves {widest} bits")))?;
            let mut touched = Vec::new();
            for &w in widths.iter().filter(|&&w| w > 0) {
                let idx = adcs
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| a.port == port && a.bits >= w)
                    .min_by_key(|(_, a)| a.bits)
                    .map(|(i, _)| i)
                    .expect("port max covers every sample");
                adcs[idx].samples += 1;
                if !touched.contains(&idx) {
                    touched.push(idx);
                }
            }
            for idx in touched {
                adcs[idx].slots += 1;
                if !adcs[idx].crossbars.contains(&x) {
                    adcs[idx].crossbars.push(x);
                }
            }
        }
    }
    Ok(AdcAssignment { adcs, produced, skipped })
}
