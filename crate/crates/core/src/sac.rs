//! Shift-and-add crossbars: single-column arrays whose cells hold powers of
//! two, summing weighted input currents in analog before readout.
//!
//! Leaves are identified by `cycle * columns + column` and carry the shift
//! `cycle + column`. A tree consists of one or more roots, each read by its
//! own ADC sample and then shifted digitally by `digital_shift`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SacVariant {
    Basic,
    X2,
    X4,
    All,
}

impl SacVariant {
    pub const ALL: [SacVariant; 4] = [SacVariant::Basic, SacVariant::X2, SacVariant::X4, SacVariant::All];

    /// Cycles grouped under one root, `None` for all of them.
    fn group(&self) -> Option<usize> {
        match self {
            SacVariant::Basic => Some(1),
            SacVariant::X2 => Some(2),
            SacVariant::X4 => Some(4),
            SacVariant::All => None,
        }
    }

    /// Crossbar copies needed to produce grouped cycles in parallel.
    pub fn parallelism(&self, num_cycles: usize) -> usize {
        self.group().unwrap_or(num_cycles).min(num_cycles).max(1)
    }
}

impl fmt::Display for SacVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SacVariant::Basic => "Basic",
            SacVariant::X2 => "2x",
            SacVariant::X4 => "4x",
            SacVariant::All => "All",
        })
    }
}

impl FromStr for SacVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "basic" => Ok(SacVariant::Basic),
            "2x" | "x2" => Ok(SacVariant::X2),
            "4x" | "x4" => Ok(SacVariant::X4),
            "all" => Ok(SacVariant::All),
            other => Err(Error::Config(format!("unknown SAC variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiaSpec {
    pub sense_transfer_ns: f64,
    pub variance: f64,
}

impl Default for TiaSpec {
    fn default() -> Self {
        TiaSpec {
            sense_transfer_ns: 11.0,
            variance: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SacInput {
    Leaf(usize),
    Node(Box<SacNode>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SacNode {
    pub round: usize,
    /// `(input, weight)`, weights `1, 2, 4, ...` in order.
    pub inputs: Vec<(SacInput, u32)>,
}

impl SacNode {
    fn new(inputs: Vec<SacInput>) -> SacNode {
        let round = 1 + inputs
            .iter()
            .map(|i| match i {
                SacInput::Leaf(_) => 0,
                SacInput::Node(n) => n.round,
            })
            .max()
            .unwrap_or(0);
        SacNode {
            round,
            inputs: inputs.into_iter().enumerate().map(|(k, i)| (i, 1u32 << k)).collect(),
        }
    }

    pub fn max_weight(&self) -> u32 {
        self.inputs
            .iter()
            .map(|(i, w)| match i {
                SacInput::Leaf(_) => *w,
                SacInput::Node(n) => (*w).max(n.max_weight()),
            })
            .max()
            .unwrap_or(0)
    }

    /// `(leaf, product of weights from this node down)`.
    pub fn leaf_gains(&self) -> Vec<(usize, u64)> {
        let mut out = Vec::new();
        for (input, w) in &self.inputs {
            match input {
                SacInput::Leaf(l) => out.push((*l, *w as u64)),
                SacInput::Node(n) => out.extend(n.leaf_gains().into_iter().map(|(l, g)| (l, g * *w as u64))),
            }
        }
        out
    }

    pub fn node_count(&self) -> usize {
        1 + self
            .inputs
            .iter()
            .map(|(i, _)| match i {
                SacInput::Leaf(_) => 0,
                SacInput::Node(n) => n.node_count(),
            })
            .sum::<usize>()
    }

    pub fn cell_count(&self) -> usize {
        self.inputs.len()
            + self
                .inputs
                .iter()
                .map(|(i, _)| match i {
                    SacInput::Leaf(_) => 0,
                    SacInput::Node(n) => n.cell_count(),
                })
                .sum::<usize>()
    }

    fn eval(&self, leaves: &[f64], noise: Option<(&mut NoiseSource, f64)>) -> f64 {
        match noise {
            None => self
                .inputs
                .iter()
                .map(|(input, w)| {
                    let v = match input {
                        SacInput::Leaf(l) => leaves[*l],
                        SacInput::Node(n) => n.eval(leaves, None),
                    };
                    v * *w as f64
                })
                .sum(),
            Some((src, tia)) => {
                let cell = src.spec.cell_variance;
                let mut acc = 0.0;
                for (input, w) in &self.inputs {
                    let v = match input {
                        SacInput::Leaf(l) => leaves[*l],
                        SacInput::Node(n) => n.eval(leaves, Some((src, tia))),
                    };
                    if v == 0.0 {
                        continue;
                    }
                    acc += v * src.factor(tia) * *w as f64 * src.factor(cell);
                }
                acc
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SacRoot {
    pub node: SacNode,
    pub digital_shift: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SacTree {
    pub variant: SacVariant,
    pub columns: usize,
    pub cycles: usize,
    pub max_cell_bits: u32,
    pub roots: Vec<SacRoot>,
}

/// Leaf accumulation value bound used for root ADC sizing: a 6-bit column.
pub const NOMINAL_LEAF_MAX: u64 = 63;

impl SacTree {
    pub fn leaf_count(&self) -> usize {
        self.columns * self.cycles
    }

    pub fn leaf_shift(&self, leaf: usize) -> u32 {
        (leaf / self.columns + leaf % self.columns) as u32
    }

    pub fn depth(&self) -> usize {
        self.roots.iter().map(|r| r.node.round).max().unwrap_or(0)
    }

    /// Pipeline stages along the deepest path, one TIA per stage.
    pub fn tia_stages(&self) -> usize {
        self.depth() + 1
    }

    pub fn max_weight(&self) -> u32 {
        self.roots.iter().map(|r| r.node.max_weight()).max().unwrap_or(0)
    }

    pub fn nodes(&self) -> usize {
        self.roots.iter().map(|r| r.node.node_count()).sum()
    }

    pub fn cells(&self) -> usize {
        self.roots.iter().map(|r| r.node.cell_count()).sum()
    }

    pub fn samples_per_coefficient(&self) -> usize {
        self.roots.len()
    }

    /// ADC width that resolves the largest ideal root value when every leaf
    /// is at most `leaf_max`.
    pub fn root_bits(&self, leaf_max: u64) -> u32 {
        self.roots
            .iter()
            .map(|r| {
                let max: u64 = r.node.leaf_gains().iter().map(|(_, g)| g * leaf_max).sum();
                64 - max.leading_zeros()
            })
            .max()
            .unwrap_or(0)
    }

    pub fn adc_bits_at_root(&self) -> u32 {
        self.root_bits(NOMINAL_LEAF_MAX)
    }

    /// Checks that every leaf appears once with total gain `2^shift`.
    pub fn check(&self) -> Result<()> {
        let limit = 1u32 << (self.max_cell_bits - 1);
        if self.max_weight() > limit {
            return Err(Error::Parameter(format!("SAC weight above {limit}")));
        }
        let mut seen = vec![false; self.leaf_count()];
        for root in &self.roots {
            for (leaf, gain) in root.node.leaf_gains() {
                if leaf >= seen.len() || seen[leaf] {
                    return Err(Error::Parameter(format!("leaf {leaf} misplaced")));
                }
                seen[leaf] = true;
                if gain << root.digital_shift != 1u64 << self.leaf_shift(leaf) {
                    return Err(Error::Parameter(format!("leaf {leaf} has the wrong gain")));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Parameter("leaf missing from SAC tree".into()));
        }
        Ok(())
    }

    /// Analog value at each root. With `noise`, every node input passes a TIA
    /// and every SAC cell scales its current.
    pub fn eval_roots(&self, leaves: &[f64], noise: Option<(&mut NoiseSource, &TiaSpec)>) -> Result<Vec<f64>> {
        if leaves.len() != self.leaf_count() {
            return Err(Error::Dimension(format!(
                "{} leaf values for a tree of {}",
                leaves.len(),
                self.leaf_count()
            )));
        }
        Ok(match noise {
            None => self.roots.iter().map(|r| r.node.eval(leaves, None)).collect(),
            Some((src, tia)) => self
                .roots
                .iter()
                .map(|r| r.node.eval(leaves, Some((&mut *src, tia.variance))))
                .collect(),
        })
    }
}

fn cycle_node(cycle: usize, columns: usize) -> SacNode {
    SacNode::new((0..columns).map(|k| SacInput::Leaf(cycle * columns + k)).collect())
}

/// Nodes with increasing shift, combined under the weight limit: the first
/// `fan` items attach directly and the rest recurse into one child placed at
/// weight `2^fan`.
fn chain(mut items: Vec<SacNode>, fan: usize) -> SacNode {
    if items.len() <= fan + 1 {
        return SacNode::new(items.into_iter().map(|n| SacInput::Node(Box::new(n))).collect());
    }
    let rest = items.split_off(fan);
    let mut inputs: Vec<SacInput> = items.into_iter().map(|n| SacInput::Node(Box::new(n))).collect();
    inputs.push(SacInput::Node(Box::new(chain(rest, fan))));
    SacNode::new(inputs)
}

pub fn build_sac_tree(variant: SacVariant, columns_per_coeff: usize, num_cycles: usize, max_cell_bits: u32) -> Result<SacTree> {
    if columns_per_coeff == 0 || num_cycles == 0 {
        return Err(Error::Parameter("SAC tree needs at least one column and cycle".into()));
    }
    if max_cell_bits == 0 || max_cell_bits > 31 {
        return Err(Error::Parameter(format!("max_cell_bits {max_cell_bits}")));
    }
    let limit_log = (max_cell_bits - 1) as usize;
    if columns_per_coeff > limit_log + 1 {
        return Err(Error::Parameter(format!(
            "{columns_per_coeff} columns exceed weight limit 2^{limit_log}"
        )));
    }
    let fan = limit_log.max(1);
    let roots = match variant.group() {
        Some(g) => (0..num_cycles)
            .step_by(g)
            .map(|start| {
                let end = (start + g).min(num_cycles);
                let node = if g == 1 {
                    cycle_node(start, columns_per_coeff)
                } else {
                    chain((start..end).map(|c| cycle_node(c, columns_per_coeff)).collect(), fan)
                };
                SacRoot {
                    node,
                    digital_shift: start as u32,
                }
            })
            .collect(),
        None => vec![SacRoot {
            node: chain((0..num_cycles).map(|c| cycle_node(c, columns_per_coeff)).collect(), fan),
            digital_shift: 0,
        }],
    };
    let tree = SacTree {
        variant,
        columns: columns_per_coeff,
        cycles: num_cycles,
        max_cell_bits,
        roots,
    };
    tree.check()?;
    Ok(tree)
}

/// ADC samples per output coefficient; `None` is the design without SAC.
pub fn adc_samples_per_coefficient(variant: Option<SacVariant>, columns_per_coeff: usize, num_cycles: usize) -> usize {
    match variant {
        None => columns_per_coeff * num_cycles,
        Some(SacVariant::Basic) => num_cycles,
        Some(SacVariant::X2) => num_cycles.div_ceil(2),
        Some(SacVariant::X4) => num_cycles.div_ceil(4),
        Some(SacVariant::All) => 1,
    }
}
