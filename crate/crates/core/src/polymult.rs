//! Polynomial multiplication: schoolbook, Karatsuba, Toom-Cook-4 and their
//! composition.
//!
//! Every fast variant is described by a [`MultPlan`]: an ordered list of
//! splitting stages. [`decompose`] evaluates an operand down to the leaf
//! operands of the plan and [`recombine`] interpolates leaf products back into
//! the full (unreduced) product, so the same plan can drive either a software
//! leaf multiplier or a crossbar mapping. Products are formed over plain
//! integers and reduced negacyclically once at the end.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring::{reduce_negacyclic, Poly, RingParams, SecretPoly};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MultAlgorithm {
    SB,
    K2,
    K4,
    TC4,
    TC4K2,
}

impl MultAlgorithm {
    pub const ALL: [MultAlgorithm; 5] = [
        MultAlgorithm::SB,
        MultAlgorithm::K2,
        MultAlgorithm::K4,
        MultAlgorithm::TC4,
        MultAlgorithm::TC4K2,
    ];

    pub fn stages(&self) -> Vec<Stage> {
        match self {
            MultAlgorithm::SB => vec![],
            MultAlgorithm::K2 => vec![Stage::Karatsuba],
            MultAlgorithm::K4 => vec![Stage::Karatsuba, Stage::Karatsuba],
            MultAlgorithm::TC4 => vec![Stage::ToomCook4],
            MultAlgorithm::TC4K2 => vec![Stage::ToomCook4, Stage::Karatsuba],
        }
    }
}

impl fmt::Display for MultAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MultAlgorithm::SB => "SB",
            MultAlgorithm::K2 => "K2",
            MultAlgorithm::K4 => "K4",
            MultAlgorithm::TC4 => "TC4",
            MultAlgorithm::TC4K2 => "TC4K2",
        };
        f.write_str(s)
    }
}

impl FromStr for MultAlgorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SB" => Ok(MultAlgorithm::SB),
            "K2" => Ok(MultAlgorithm::K2),
            "K4" => Ok(MultAlgorithm::K4),
            "TC4" => Ok(MultAlgorithm::TC4),
            "TC4K2" => Ok(MultAlgorithm::TC4K2),
            other => Err(Error::Config(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// One level of operand splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    /// Two limbs, three products: `lo*lo`, `hi*hi`, `(lo+hi)*(lo+hi)`.
    Karatsuba,
    /// Four limbs evaluated at `0, 1, -1, 2, -2, 3, inf`.
    ToomCook4,
}

const TC4_POINTS: [i64; 6] = [0, 1, -1, 2, -2, 3];

impl Stage {
    pub fn limbs(&self) -> usize {
        match self {
            Stage::Karatsuba => 2,
            Stage::ToomCook4 => 4,
        }
    }

    pub fn points(&self) -> usize {
        match self {
            Stage::Karatsuba => 3,
            Stage::ToomCook4 => 7,
        }
    }

    /// Weight of limb `limb` in the operand evaluated at point `point`.
    pub fn weight(&self, point: usize, limb: usize) -> i64 {
        match self {
            Stage::Karatsuba => match point {
                0 => (limb == 0) as i64,
                1 => (limb == 1) as i64,
                _ => 1,
            },
            Stage::ToomCook4 => {
                if point == 6 {
                    (limb == 3) as i64
                } else {
                    TC4_POINTS[point].pow(limb as u32)
                }
            }
        }
    }

    fn evaluate(&self, operand: &[i64]) -> Vec<Vec<i64>> {
        let d = operand.len() / self.limbs();
        (0..self.points())
            .map(|pt| {
                let mut out = vec![0i64; d];
                for limb in 0..self.limbs() {
                    let w = self.weight(pt, limb);
                    if w == 0 {
                        continue;
                    }
                    for (o, &x) in out.iter_mut().zip(&operand[limb * d..(limb + 1) * d]) {
                        *o += w * x;
                    }
                }
                out
            })
            .collect()
    }

    /// Products at each point (each of length `2d - 1`) to the full product of
    /// length `2 * limbs * d - 1`.
    fn interpolate(&self, products: Vec<Vec<i64>>, d: usize, adds: &mut u64) -> Vec<i64> {
        let width = 2 * d - 1;
        let coeff_polys: Vec<Vec<i64>> = match self {
            Stage::Karatsuba => {
                let (p0, p2) = (&products[0], &products[1]);
                let mid: Vec<i64> = products[2]
                    .iter()
                    .zip(p0)
                    .zip(p2)
                    .map(|((&m, &a), &b)| m - a - b)
                    .collect();
                *adds += 2 * width as u64;
                vec![p0.clone(), mid, p2.clone()]
            }
            Stage::ToomCook4 => tc4_interpolate(&products, width, adds),
        };
        let mut full = vec![0i64; 2 * self.limbs() * d - 1];
        for (k, c) in coeff_polys.iter().enumerate() {
            for (i, &v) in c.iter().enumerate() {
                if full[k * d + i] != 0 {
                    *adds += 1;
                }
                full[k * d + i] += v;
            }
        }
        full
    }
}

#[derive(Debug, Clone, Copy)]
struct Frac {
    num: i128,
    den: i128,
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Frac {
    fn new(num: i128, den: i128) -> Frac {
        let g = gcd(num, den).max(1);
        let s = if den < 0 { -1 } else { 1 };
        Frac {
            num: s * num / g,
            den: s * den / g,
        }
    }
    fn sub(self, o: Frac) -> Frac {
        Frac::new(self.num * o.den - o.num * self.den, self.den * o.den)
    }
    fn mul(self, o: Frac) -> Frac {
        Frac::new(self.num * o.num, self.den * o.den)
    }
    fn div(self, o: Frac) -> Frac {
        Frac::new(self.num * o.den, self.den * o.num)
    }
}

/// Integer rows and a common denominator per row of the inverse of the 6x6
/// Vandermonde matrix of the finite Toom-Cook points.
struct Tc4Inverse {
    rows: [[i64; 6]; 6],
    dens: [i64; 6],
}

fn tc4_inverse() -> &'static Tc4Inverse {
    static INV: std::sync::OnceLock<Tc4Inverse> = std::sync::OnceLock::new();
    INV.get_or_init(|| {
        let mut m = [[Frac::new(0, 1); 12]; 6];
        for (r, &t) in TC4_POINTS.iter().enumerate() {
            for k in 0..6 {
                m[r][k] = Frac::new((t as i128).pow(k as u32), 1);
            }
            m[r][6 + r] = Frac::new(1, 1);
        }
        for col in 0..6 {
            let pivot = (col..6).find(|&r| m[r][col].num != 0).expect("Vandermonde is invertible");
            m.swap(col, pivot);
            let p = m[col][col];
            for k in 0..12 {
                m[col][k] = m[col][k].div(p);
            }
            for r in 0..6 {
                if r != col && m[r][col].num != 0 {
                    let f = m[r][col];
                    for k in 0..12 {
                        m[r][k] = m[r][k].sub(f.mul(m[col][k]));
                    }
                }
            }
        }
        let mut rows = [[0i64; 6]; 6];
        let mut dens = [1i64; 6];
        for r in 0..6 {
            let lcm = (0..6).fold(1i128, |acc, j| {
                let d = m[r][6 + j].den;
                acc / gcd(acc, d) * d
            });
            dens[r] = lcm as i64;
            for j in 0..6 {
                let f = m[r][6 + j];
                rows[r][j] = (f.num * (lcm / f.den)) as i64;
            }
        }
        Tc4Inverse { rows, dens }
    })
}

fn tc4_interpolate(products: &[Vec<i64>], width: usize, adds: &mut u64) -> Vec<Vec<i64>> {
    let inv = tc4_inverse();
    let top = &products[6];
    // remove the leading coefficient's contribution t^6 * c6 at each finite point
    let adjusted: Vec<Vec<i64>> = TC4_POINTS
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let t6 = t.pow(6);
            products[j].iter().zip(top).map(|(&r, &c)| r - t6 * c).collect()
        })
        .collect();
    *adds += 5 * width as u64;
    let mut coeffs: Vec<Vec<i64>> = (0..6)
        .map(|k| {
            (0..width)
                .map(|i| {
                    let acc: i64 = (0..6).map(|j| inv.rows[k][j] * adjusted[j][i]).sum();
                    debug_assert_eq!(acc % inv.dens[k], 0, "Toom-Cook interpolation must be exact");
                    acc / inv.dens[k]
                })
                .collect()
        })
        .collect();
    *adds += (6 * 5 * width) as u64;
    coeffs.push(top.clone());
    coeffs
}

/// Decomposition of one degree-`n` multiplication into leaf multiplications.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultPlan {
    pub algorithm: MultAlgorithm,
    pub stages: Vec<Stage>,
    pub n: usize,
    pub sub_mults: usize,
    pub sub_degree: usize,
    pub recomb_adds: u64,
    /// `leaf_weights[j][i]`: weight of finest limb `i` in leaf operand `j`.
    pub leaf_weights: Vec<Vec<i64>>,
}

impl MultPlan {
    /// Leaf work in coefficient products, `sub_mults * sub_degree^2`.
    pub fn leaf_work(&self) -> u64 {
        (self.sub_mults * self.sub_degree * self.sub_degree) as u64
    }

    /// Largest magnitude a leaf operand can reach when every input coefficient
    /// is bounded by `bound`.
    pub fn leaf_operand_bound(&self, leaf: usize, bound: i64) -> i64 {
        self.leaf_weights[leaf].iter().map(|w| w.abs()).sum::<i64>() * bound
    }

    pub fn max_operand_bound(&self, bound: i64) -> i64 {
        (0..self.sub_mults)
            .map(|j| self.leaf_operand_bound(j, bound))
            .max()
            .unwrap_or(bound)
    }
}

fn check_split(stages: &[Stage], n: usize) -> Result<usize> {
    let limbs: usize = stages.iter().map(Stage::limbs).product();
    if n == 0 || !n.is_multiple_of(limbs) {
        return Err(Error::Parameter(format!(
            "degree {n} cannot be split into {limbs} limbs"
        )));
    }
    Ok(n / limbs)
}

pub fn plan_for_stages(algorithm: MultAlgorithm, stages: Vec<Stage>, n: usize) -> Result<MultPlan> {
    let sub_degree = check_split(&stages, n)?;
    let sub_mults: usize = stages.iter().map(Stage::points).product();
    let total_limbs = n / sub_degree;
    let mut leaf_weights = vec![vec![0i64; total_limbs]; sub_mults];
    for limb in 0..total_limbs {
        let mut unit = vec![0i64; n];
        unit[limb * sub_degree] = 1;
        for (j, leaf) in decompose(&stages, &unit).iter().enumerate() {
            leaf_weights[j][limb] = leaf[0];
        }
    }
    let mut recomb_adds = 0;
    let zeros = vec![vec![0i64; 2 * sub_degree - 1]; sub_mults];
    recombine_counting(&stages, zeros, n, &mut recomb_adds);
    Ok(MultPlan {
        algorithm,
        stages,
        n,
        sub_mults,
        sub_degree,
        recomb_adds,
        leaf_weights,
    })
}

pub fn plan_for(algorithm: MultAlgorithm, params: &RingParams) -> Result<MultPlan> {
    plan_for_stages(algorithm, algorithm.stages(), params.n)
}

/// Evaluates an operand down to the plan's leaf operands, in leaf order.
pub fn decompose(stages: &[Stage], operand: &[i64]) -> Vec<Vec<i64>> {
    match stages.split_first() {
        None => vec![operand.to_vec()],
        Some((stage, rest)) => stage
            .evaluate(operand)
            .iter()
            .flat_map(|e| decompose(rest, e))
            .collect(),
    }
}

fn recombine_counting(stages: &[Stage], leaves: Vec<Vec<i64>>, n: usize, adds: &mut u64) -> Vec<i64> {
    match stages.split_first() {
        None => leaves.into_iter().next().expect("one leaf"),
        Some((stage, rest)) => {
            let per_point = leaves.len() / stage.points();
            let d = n / stage.limbs();
            let mut it = leaves.into_iter();
            let products: Vec<Vec<i64>> = (0..stage.points())
                .map(|_| {
                    let chunk: Vec<Vec<i64>> = it.by_ref().take(per_point).collect();
                    recombine_counting(rest, chunk, d, adds)
                })
                .collect();
            stage.interpolate(products, d, adds)
        }
    }
}

/// Interpolates leaf products (each `2 * sub_degree - 1` long) into the full
/// product of two degree-`n` operands.
pub fn recombine(stages: &[Stage], leaves: Vec<Vec<i64>>, n: usize) -> Vec<i64> {
    let mut adds = 0;
    recombine_counting(stages, leaves, n, &mut adds)
}

/// Full integer convolution, length `2n - 1`.
pub fn convolve(a: &[i64], b: &[i64]) -> Vec<i64> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let peak = |v: &[i64]| v.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0);
    let bound = (peak(a) as u128) * (peak(b) as u128) * a.len().min(b.len()) as u128;
    if bound <= i32::MAX as u128 {
        return convolve_narrow(a, b);
    }
    let mut out = vec![0i64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (o, &y) in out[i..i + b.len()].iter_mut().zip(b) {
            *o += x * y;
        }
    }
    out
}

/// Same as [`convolve`] for operands whose every partial sum fits in `i32`.
fn convolve_narrow(a: &[i64], b: &[i64]) -> Vec<i64> {
    let b32: Vec<i32> = b.iter().map(|&y| y as i32).collect();
    let mut out = vec![0i32; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        let x = x as i32;
        if x == 0 {
            continue;
        }
        for (o, &y) in out[i..i + b32.len()].iter_mut().zip(&b32) {
            *o += x * y;
        }
    }
    out.into_iter().map(i64::from).collect()
}

/// Full product through a plan with a caller-supplied leaf multiplier.
pub fn full_product_with<F>(stages: &[Stage], a: &[i64], b: &[i64], mut leaf: F) -> Result<Vec<i64>>
where
    F: FnMut(&[i64], &[i64]) -> Vec<i64>,
{
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("operand lengths {} and {}", a.len(), b.len())));
    }
    check_split(stages, a.len())?;
    let la = decompose(stages, a);
    let lb = decompose(stages, b);
    let products = la.iter().zip(&lb).map(|(x, y)| leaf(x, y)).collect();
    Ok(recombine(stages, products, a.len()))
}

pub fn full_product(stages: &[Stage], a: &[i64], b: &[i64]) -> Result<Vec<i64>> {
    full_product_with(stages, a, b, convolve)
}

fn check_pair(a: &Poly, b: &Poly) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("degrees {} and {}", a.len(), b.len())));
    }
    if a.bits() != b.bits() {
        return Err(Error::Dimension(format!(
            "moduli 2^{} and 2^{}",
            a.bits(),
            b.bits()
        )));
    }
    Ok(())
}

fn mul_with_stages(a: &Poly, b: &Poly, stages: &[Stage]) -> Result<Poly> {
    check_pair(a, b)?;
    let full = full_product(stages, &a.as_i64(), &b.as_i64())?;
    reduce_negacyclic(&full, a.len(), a.bits())
}

pub fn schoolbook_mul(a: &Poly, b: &Poly) -> Result<Poly> {
    mul_with_stages(a, b, &[])
}

pub fn karatsuba_mul(a: &Poly, b: &Poly, levels: usize) -> Result<Poly> {
    mul_with_stages(a, b, &vec![Stage::Karatsuba; levels])
}

pub fn toomcook4_mul(a: &Poly, b: &Poly) -> Result<Poly> {
    mul_with_stages(a, b, &[Stage::ToomCook4])
}

pub fn multiply(algorithm: MultAlgorithm, a: &Poly, b: &Poly) -> Result<Poly> {
    mul_with_stages(a, b, &algorithm.stages())
}

/// `a * s` in `R_{2^bits(a)}` with `s` taken in centered form.
pub fn multiply_secret(algorithm: MultAlgorithm, a: &Poly, s: &SecretPoly) -> Result<Poly> {
    if a.len() != s.len() {
        return Err(Error::Dimension(format!("degrees {} and {}", a.len(), s.len())));
    }
    let full = full_product(&algorithm.stages(), &a.as_i64(), &s.as_i64())?;
    reduce_negacyclic(&full, a.len(), a.bits())
}
