//! Experiment drivers: oracle verification, noise Monte Carlo, cost sweeps
//! and plain roundtrips, configured from a flat `key = value` text file.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::{CountingBackend, MulBackend, SoftwareBackend};
use crate::cost::{estimate, ArchConfig, Architecture, ComponentCatalog, CostReport, Operation};
use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::pke::{check_frame, frame_message, inner_product, SaberPke, CRC_BYTES};
use crate::polymult::{multiply_secret, schoolbook_mul, MultAlgorithm};
use crate::ring::{Poly, SecretPoly};
use crate::sac::SacVariant;
use crate::sampling::SEED_BYTES;
use crate::schedule::{accumulate_coefficient, PrecisionMap};
use crate::xbar::{CrossbarConfig, CrossbarEngine, Readout, RootAdcPolicy, StuckAt};

pub const CSV_SCHEMA: &str = "saber-xbar-sweep/1";
pub const NOISE_CSV_SCHEMA: &str = "saber-xbar-noise/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown format '{other}'"))),
        }
    }
}

pub fn parse_readout(s: &str) -> Result<Readout> {
    let s = s.to_ascii_lowercase();
    if s == "digital" {
        return Ok(Readout::Digital);
    }
    let v = s.strip_prefix("sac-").or_else(|| s.strip_prefix("sac")).unwrap_or(&s);
    Ok(Readout::Sac(v.parse::<SacVariant>()?))
}

pub fn readout_name(r: Readout) -> String {
    match r {
        Readout::Digital => "digital".into(),
        Readout::Sac(v) => format!("sac-{}", v.to_string().to_ascii_lowercase()),
    }
}

fn parse_policy(s: &str) -> Result<RootAdcPolicy> {
    match s.to_ascii_lowercase().replace('_', "-").as_str() {
        "full-width" | "fullwidth" | "full" => Ok(RootAdcPolicy::FullWidth),
        "modulo" => Ok(RootAdcPolicy::Modulo),
        other => Err(Error::Config(format!("unknown root ADC policy '{other}'"))),
    }
}

fn policy_name(p: RootAdcPolicy) -> &'static str {
    match p {
        RootAdcPolicy::FullWidth => "full-width",
        RootAdcPolicy::Modulo => "modulo",
    }
}

/// Every knob of an experiment run. See [`ExperimentConfig::KEYS`] for the
/// text schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub operation: Operation,
    pub algorithm: MultAlgorithm,
    pub architecture: Architecture,
    pub trials: usize,
    pub max_retries: usize,
    pub seed: u64,
    pub noise: NoiseSpec,
    /// Readout of the noisy decryption engine.
    pub readout: Readout,
    pub root_policy: RootAdcPolicy,
    pub variance_grid: Vec<f64>,
    pub retries_grid: Vec<usize>,
    pub catalog: ComponentCatalog,
    pub out_dir: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            operation: Operation::Dec,
            algorithm: MultAlgorithm::K2,
            architecture: Architecture::AdcShare,
            trials: 10_000,
            max_retries: 0,
            seed: 1,
            noise: NoiseSpec {
                cell_variance: 0.0,
                tia_variance: 0.02,
                seed: 0,
            },
            readout: Readout::Sac(SacVariant::All),
            root_policy: RootAdcPolicy::FullWidth,
            variance_grid: vec![0.0, 0.02, 0.04, 0.05, 0.06, 0.08, 0.10],
            retries_grid: vec![0, 1, 2, 3],
            catalog: ComponentCatalog::default(),
            out_dir: None,
            format: OutputFormat::Csv,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse::<T>()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

impl ExperimentConfig {
    pub const KEYS: &'static [&'static str] = &[
        "operation",
        "algorithm",
        "architecture",
        "trials",
        "max_retries",
        "seed",
        "noise.cell_variance",
        "noise.tia_variance",
        "noise.readout",
        "noise.root_policy",
        "noise.variance_grid",
        "noise.retries_grid",
        "catalog.<field>[.<subfield>]",
        "output.dir",
        "output.format",
    ];

    /// Reads `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "operation" => self.operation = v.parse()?,
            "algorithm" => self.algorithm = v.to_ascii_uppercase().parse()?,
            "architecture" => self.architecture = v.parse()?,
            "trials" => self.trials = parse_num(key, v)?,
            "max_retries" => self.max_retries = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "noise.cell_variance" => self.noise.cell_variance = parse_num(key, v)?,
            "noise.tia_variance" => self.noise.tia_variance = parse_num(key, v)?,
            "noise.readout" => self.readout = parse_readout(v)?,
            "noise.root_policy" => self.root_policy = parse_policy(v)?,
            "noise.variance_grid" => self.variance_grid = parse_list(key, v)?,
            "noise.retries_grid" => self.retries_grid = parse_list(key, v)?,
            "output.dir" => self.out_dir = Some(PathBuf::from(v)),
            "output.format" => self.format = v.parse()?,
            k if k.starts_with("catalog.") => self.set_catalog(&k["catalog.".len()..], v)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    fn set_catalog(&mut self, path: &str, v: &str) -> Result<()> {
        let mut tree = serde_json::to_value(&self.catalog).map_err(|e| Error::Config(e.to_string()))?;
        let mut slot = &mut tree;
        for part in path.split('.') {
            slot = slot
                .get_mut(part)
                .ok_or_else(|| Error::Config(format!("unknown catalog field '{path}'")))?;
        }
        *slot = match slot {
            serde_json::Value::Number(n) if n.is_u64() => serde_json::Value::from(parse_num::<u64>(path, v)?),
            serde_json::Value::Number(_) => {
                let x: f64 = parse_num(path, v)?;
                serde_json::Number::from_f64(x)
                    .map(serde_json::Value::Number)
                    .ok_or_else(|| Error::Config(format!("{path}: not finite")))?
            }
            _ => return Err(Error::Config(format!("catalog field '{path}' is not a number"))),
        };
        self.catalog = serde_json::from_value(tree).map_err(|e| Error::Config(format!("{path}: {e}")))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.variance_grid.is_empty() || self.retries_grid.is_empty() {
            return Err(Error::Config("noise grids must be non-empty".into()));
        }
        if self.variance_grid.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("variances must be non-negative".into()));
        }
        self.noise.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.catalog.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// The resolved config in the text schema, catalog included.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        put("operation", self.operation.to_string());
        put("algorithm", self.algorithm.to_string());
        put("architecture", self.architecture.to_string());
        put("trials", self.trials.to_string());
        put("max_retries", self.max_retries.to_string());
        put("seed", self.seed.to_string());
        put("noise.cell_variance", self.noise.cell_variance.to_string());
        put("noise.tia_variance", self.noise.tia_variance.to_string());
        put("noise.readout", readout_name(self.readout));
        put("noise.root_policy", policy_name(self.root_policy).into());
        put("noise.variance_grid", join(&self.variance_grid));
        put("noise.retries_grid", join(&self.retries_grid));
        if let Ok(serde_json::Value::Object(map)) = serde_json::to_value(&self.catalog) {
            flatten("catalog", &serde_json::Value::Object(map), &mut put);
        }
        if let Some(d) = &self.out_dir {
            put("output.dir", d.display().to_string());
        }
        put(
            "output.format",
            match self.format {
                OutputFormat::Csv => "csv".into(),
                OutputFormat::Json => "json".into(),
            },
        );
        out
    }

    pub fn arch_config(&self) -> ArchConfig {
        ArchConfig::new(self.operation, self.algorithm, self.architecture).with_root_policy(self.root_policy)
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn flatten(prefix: &str, v: &serde_json::Value, put: &mut impl FnMut(&str, String)) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, child) in map {
                flatten(&format!("{prefix}.{k}"), child, put);
            }
        }
        other => put(prefix, other.to_string()),
    }
}

/// Independent stream for one trial of one experiment.
pub fn trial_rng(master: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(trial);
    rng
}

fn seed32(rng: &mut impl RngCore) -> [u8; SEED_BYTES] {
    let mut s = [0u8; SEED_BYTES];
    rng.fill_bytes(&mut s);
    s
}

// ---------------------------------------------------------------- verify

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub cases: u64,
    pub passed: bool,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.suites {
            write!(f, "{} {} ({} cases)", if s.passed { "PASS" } else { "FAIL" }, s.name, s.cases)?;
            if let Some(d) = &s.detail {
                write!(f, ": {d}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    /// Cell faults planted in the crossbar suite's engine.
    pub faults: Vec<StuckAt>,
}

fn random_poly(rng: &mut impl Rng, n: usize, bits: u32) -> Poly {
    Poly::new((0..n).map(|_| rng.random_range(0..1u32 << bits)).collect(), bits).expect("in range")
}

fn random_secret(rng: &mut impl Rng, n: usize, bound: i32) -> SecretPoly {
    SecretPoly::new((0..n).map(|_| rng.random_range(-bound..=bound)).collect())
}

fn first_diff(got: &Poly, want: &Poly) -> Option<String> {
    got.coeffs()
        .iter()
        .zip(want.coeffs())
        .position(|(a, b)| a != b)
        .map(|j| format!("coefficient {j}: got {}, want {}", got.coeffs()[j], want.coeffs()[j]))
}

fn suite(name: &str, cases: u64, detail: Option<String>) -> SuiteResult {
    SuiteResult {
        name: name.into(),
        cases,
        passed: detail.is_none(),
        detail,
    }
}

fn engine_suite(name: &str, config: CrossbarConfig, trials: usize, rng: &mut ChaCha8Rng, faults: &[StuckAt]) -> Result<SuiteResult> {
    let mut eng = CrossbarEngine::new(config)?;
    for f in faults {
        eng.inject_fault(*f);
    }
    let mut cases = 0;
    for t in 0..trials {
        let bits = if t % 2 == 0 { 13 } else { 10 };
        let a = random_poly(rng, 256, bits);
        let s = random_secret(rng, 256, 4);
        let want = schoolbook_mul(&a, &s.to_poly(bits))?;
        let got = eng.mul(&a, &s)?;
        cases += 1;
        let audit = eng.audit()?;
        let cell = audit
            .first()
            .map(|m| format!("; tile {} row {} column {} holds {} (expected {})", m.tile, m.row, m.col, m.actual, m.expected))
            .unwrap_or_default();
        if let Some(d) = first_diff(&got, &want) {
            return Ok(suite(name, cases, Some(format!("trial {t}, {d}{cell}"))));
        }
        if !audit.is_empty() {
            return Ok(suite(name, cases, Some(format!("trial {t}, cell audit{cell}"))));
        }
    }
    Ok(suite(name, cases, None))
}

/// Oracle suites: decomposed multiplication vs schoolbook, crossbar vs
/// schoolbook, SAC readout vs schoolbook, and modulo truncation.
pub fn run_verify(config: &ExperimentConfig, opts: &VerifyOptions) -> Result<VerifyReport> {
    config.validate()?;
    let mut rng = trial_rng(config.seed, u64::MAX);
    let trials = config.trials;
    let mut suites = Vec::new();

    let mut detail = None;
    let mut cases = 0;
    'alg: for t in 0..trials {
        let a = random_poly(&mut rng, 256, 13);
        let s = random_secret(&mut rng, 256, 4);
        let want = schoolbook_mul(&a, &s.to_poly(13))?;
        for alg in MultAlgorithm::ALL {
            cases += 1;
            if let Some(d) = first_diff(&multiply_secret(alg, &a, &s)?, &want) {
                detail = Some(format!("{alg}, trial {t}, {d}"));
                break 'alg;
            }
        }
    }
    suites.push(suite("polymult-vs-schoolbook", cases, detail));

    suites.push(engine_suite("crossbar-vs-schoolbook", CrossbarConfig::default(), trials, &mut rng, &opts.faults)?);
    for v in SacVariant::ALL {
        let cfg = CrossbarConfig {
            readout: Readout::Sac(v),
            ..CrossbarConfig::default()
        };
        suites.push(engine_suite(&format!("sac-{v}-vs-schoolbook"), cfg, trials.div_ceil(4), &mut rng, &[])?);
    }
    let cfg = CrossbarConfig {
        truncate: true,
        stagger: true,
        ..CrossbarConfig::default()
    };
    suites.push(engine_suite("truncated-staggered-crossbar", cfg, trials, &mut rng, &[])?);

    let map = PrecisionMap::new(10, 4, 10, 6);
    let mut detail = None;
    for t in 0..trials * 10 {
        let grid: Vec<Vec<u64>> = (0..10).map(|_| (0..4).map(|_| rng.random_range(0..64)).collect()).collect();
        let full = accumulate_coefficient(&grid, 10);
        let cut = accumulate_coefficient(&map.truncate(&grid), 10);
        if full != cut {
            detail = Some(format!("grid {t}: full {full}, truncated {cut}"));
            break;
        }
    }
    suites.push(suite("truncation-safety", (trials * 10) as u64, detail));
    Ok(VerifyReport { suites })
}

// ---------------------------------------------------------------- roundtrip

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackendKind {
    Software(MultAlgorithm),
    Crossbar,
}

impl BackendKind {
    pub fn all() -> Vec<BackendKind> {
        let mut v: Vec<_> = MultAlgorithm::ALL.iter().map(|&a| BackendKind::Software(a)).collect();
        v.push(BackendKind::Crossbar);
        v
    }

    pub fn instance(&self) -> Box<dyn MulBackend + Send> {
        match self {
            BackendKind::Software(a) => Box::new(SoftwareBackend::new(*a)),
            BackendKind::Crossbar => Box::new(CrossbarEngine::ideal()),
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendKind::Software(a) => write!(f, "{a}"),
            BackendKind::Crossbar => f.write_str("xbar"),
        }
    }
}

impl FromStr for BackendKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xbar" | "crossbar" => Ok(BackendKind::Crossbar),
            other => Ok(BackendKind::Software(other.to_ascii_uppercase().parse()?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    pub backend: String,
    pub trials: u64,
    pub failures: u64,
    /// PolyMults per keygen, encryption and decryption on the first trial.
    pub census: [u64; 3],
}

/// Keygen, encryption and decryption of CRC-framed random payloads.
pub fn run_roundtrip(kind: BackendKind, trials: usize, seed: u64) -> Result<RoundtripReport> {
    let pke = SaberPke::default();
    let n = pke.params.n;
    let mut backend = CountingBackend::new(kind.instance());
    let mut failures = 0;
    let mut census = [0u64; 3];
    for t in 0..trials {
        let mut rng = trial_rng(seed, t as u64);
        let (seed_a, r, r2) = (seed32(&mut rng), seed32(&mut rng), seed32(&mut rng));
        let payload: Vec<u8> = (0..n / 8 - CRC_BYTES).map(|_| rng.random()).collect();
        let m = frame_message(&payload, n)?;
        backend.take();
        let (pk, sk) = pke.keygen(&seed_a, &r, &mut backend)?;
        let k = backend.take();
        let ct = pke.encrypt(&pk, &m, &r2, &mut backend)?;
        let e = backend.take();
        let got = pke.decrypt(&sk, &ct, &mut backend)?;
        let d = backend.take();
        if t == 0 {
            census = [k, e, d];
        }
        if got != m || check_frame(&got).as_deref() != Some(&payload[..]) {
            failures += 1;
        }
    }
    Ok(RoundtripReport {
        backend: kind.to_string(),
        trials: trials as u64,
        failures,
        census,
    })
}

// ---------------------------------------------------------------- noise

/// Two-sided 95% Wilson score interval.
pub fn wilson_interval(failures: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = failures as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub cell_variance: f64,
    pub max_retries: usize,
    pub trials: u64,
    pub failures: u64,
    pub failure_probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl CurvePoint {
    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureCurve {
    pub readout: String,
    pub tia_variance: f64,
    pub seed: u64,
    pub points: Vec<CurvePoint>,
    /// Mean absolute error of the noisy inner product, in units of `2^eps_p`
    /// coefficients, at each variance (first attempt only).
    pub mean_abs_error: Vec<(f64, f64)>,
}

impl FailureCurve {
    pub fn point(&self, variance: f64, retries: usize) -> Option<&CurvePoint> {
        self.points
            .iter()
            .find(|p| (p.cell_variance - variance).abs() < 1e-12 && p.max_retries == retries)
    }

    /// Failure probability never rises with more retries.
    pub fn is_monotone(&self) -> bool {
        self.points.iter().all(|p| {
            self.points
                .iter()
                .filter(|q| q.cell_variance == p.cell_variance && q.max_retries > p.max_retries)
                .all(|q| q.failure_probability <= p.failure_probability)
        })
    }

    pub fn to_csv(&self, config: &ExperimentConfig) -> String {
        let mut out = format!("# {NOISE_CSV_SCHEMA}\n");
        for line in config.to_text().lines() {
            out.push_str(&format!("# {line}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["cell_variance", "max_retries", "trials", "failures", "failure_probability", "ci_low", "ci_high"])
            .expect("in-memory");
        for p in &self.points {
            w.write_record([
                p.cell_variance.to_string(),
                p.max_retries.to_string(),
                p.trials.to_string(),
                p.failures.to_string(),
                format!("{:.6}", p.failure_probability),
                format!("{:.6}", p.ci_low),
                format!("{:.6}", p.ci_high),
            ])
            .expect("in-memory");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("in-memory")).expect("utf8"));
        out
    }
}

/// One trial: software keygen and encryption, then noisy decryption under
/// each noise model on one programmed engine. Per config: attempts needed (1-based) or `None`, and the
/// first attempt's mean absolute inner-product error.
fn noise_trial(pke: &SaberPke, base: CrossbarConfig, models: &[NoiseSpec], master: u64, trial: u64, attempts: usize) -> Result<Vec<(Option<usize>, f64)>> {
    let n = pke.params.n;
    let mut rng = trial_rng(master, trial);
    let (seed_a, r, r2) = (seed32(&mut rng), seed32(&mut rng), seed32(&mut rng));
    let payload: Vec<u8> = (0..n / 8 - CRC_BYTES).map(|_| rng.random()).collect();
    let m = frame_message(&payload, n)?;
    let mut sw = SoftwareBackend::new(MultAlgorithm::TC4K2);
    let (pk, sk) = pke.keygen(&seed_a, &r, &mut sw)?;
    let ct = pke.encrypt(&pk, &m, &r2, &mut sw)?;
    let exact = inner_product(&ct.b_prime, &sk.s, &mut sw)?;
    let p = exact.modulus() as i64;
    let mut eng = CrossbarEngine::new(base)?;
    eng.preload(sk.s.polys())?;
    let mut out = Vec::with_capacity(models.len());
    for &model in models {
        eng.set_noise(Some(model))?;
        let mut err = 0.0;
        let mut needed = None;
        for attempt in 0..attempts {
            eng.reseed_noise(rng.next_u64());
            let v = inner_product(&ct.b_prime, &sk.s, &mut eng)?;
            if attempt == 0 {
                err = v
                    .coeffs()
                    .iter()
                    .zip(exact.coeffs())
                    .map(|(&a, &b)| {
                        let d = (a as i64 - b as i64).rem_euclid(p);
                        d.min(p - d) as f64
                    })
                    .sum::<f64>()
                    / n as f64;
            }
            let got = pke.finish_decrypt(&v, &ct.c_m)?;
            if check_frame(&got).as_deref() == Some(&payload[..]) {
                needed = Some(attempt + 1);
                break;
            }
        }
        out.push((needed, err));
    }
    Ok(out)
}

/// Failure probability of noisy decryption over a variance x retry grid.
/// Key generation and encryption run in software and are shared by every
/// variance of a trial; each decryption attempt draws fresh noise. A cell
/// variance of 0 runs the ideal engine.
pub fn run_noise(config: &ExperimentConfig, variances: &[f64], retries: &[usize]) -> Result<FailureCurve> {
    config.validate()?;
    if variances.is_empty() || retries.is_empty() {
        return Err(Error::Config("noise grids must be non-empty".into()));
    }
    let pke = SaberPke::default();
    let attempts = retries.iter().max().copied().unwrap_or(0) + 1;
    let models = variances
        .iter()
        .map(|&var| match var {
            0.0 => Ok(NoiseSpec::ideal()),
            _ => NoiseSpec::new(var, config.noise.tia_variance, 0),
        })
        .collect::<Result<Vec<_>>>()?;
    let base = CrossbarConfig {
        readout: config.readout,
        root_policy: config.root_policy,
        ..CrossbarConfig::default()
    };
    let outcomes: Vec<Vec<(Option<usize>, f64)>> = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| noise_trial(&pke, base, &models, config.seed, t, attempts))
        .collect::<Result<_>>()?;
    let trials = outcomes.len() as u64;
    let mut points = Vec::new();
    let mut errors = Vec::new();
    for (vi, &var) in variances.iter().enumerate() {
        errors.push((var, outcomes.iter().map(|o| o[vi].1).sum::<f64>() / trials as f64));
        for &r in retries {
            let failures = outcomes.iter().filter(|o| o[vi].0.is_none_or(|k| k > r + 1)).count() as u64;
            let (lo, hi) = wilson_interval(failures, trials);
            points.push(CurvePoint {
                cell_variance: var,
                max_retries: r,
                trials,
                failures,
                failure_probability: failures as f64 / trials as f64,
                ci_low: lo,
                ci_high: hi,
            });
        }
    }
    Ok(FailureCurve {
        readout: readout_name(config.readout),
        tia_variance: config.noise.tia_variance,
        seed: config.seed,
        points,
        mean_abs_error: errors,
    })
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub config: ArchConfig,
    pub report: std::result::Result<CostReport, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema: String,
    pub catalog: ComponentCatalog,
    pub rows: Vec<SweepRow>,
}

/// Every algorithm and architecture for one operation.
pub fn default_sweep(operation: Operation, policy: RootAdcPolicy) -> Vec<ArchConfig> {
    MultAlgorithm::ALL
        .iter()
        .flat_map(|&alg| {
            Architecture::ALL
                .iter()
                .map(move |&arch| ArchConfig::new(operation, alg, arch).with_root_policy(policy))
        })
        .collect()
}

pub fn run_sweep(configs: &[ArchConfig], catalog: &ComponentCatalog) -> Result<SweepReport> {
    if configs.is_empty() {
        return Err(Error::Config("sweep needs at least one design point".into()));
    }
    catalog.validate()?;
    let rows = configs
        .iter()
        .map(|c| SweepRow {
            config: c.clone(),
            report: estimate(c, catalog).map_err(|e| e.to_string()),
        })
        .collect();
    Ok(SweepReport {
        schema: CSV_SCHEMA.into(),
        catalog: catalog.clone(),
        rows,
    })
}

impl SweepReport {
    pub fn find(&self, operation: Operation, algorithm: MultAlgorithm, architecture: Architecture) -> Option<&CostReport> {
        self.rows
            .iter()
            .find(|r| r.config.operation == operation && r.config.algorithm == algorithm && r.config.architecture == architecture)
            .and_then(|r| r.report.as_ref().ok())
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# {}\n", self.schema);
        if let Ok(v) = serde_json::to_value(&self.catalog) {
            flatten("catalog", &v, &mut |k: &str, v: String| out.push_str(&format!("# {k} = {v}\n")));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "operation",
            "algorithm",
            "architecture",
            "root_policy",
            "latency_ns",
            "energy_pj",
            "adc_pj",
            "write_pj",
            "xbar_read_pj",
            "dac_pj",
            "sh_pj",
            "tia_pj",
            "area_um2",
            "arrays",
            "samples",
            "cells_written",
            "operand_cell_bits",
            "ce_gbps_per_mm2",
            "ee_gbit_per_j",
            "error",
        ])
        .expect("in-memory");
        for row in &self.rows {
            let c = &row.config;
            let mut rec = vec![
                c.operation.to_string(),
                c.algorithm.to_string(),
                c.architecture.to_string(),
                policy_name(c.root_policy).to_string(),
            ];
            match &row.report {
                Ok(r) => {
                    let e = &r.energy_pj;
                    rec.extend(
                        [r.latency_ns, r.energy_total_pj(), e.adc, e.write, e.xbar_read, e.dac, e.sh, e.tia, r.area_um2.total()]
                            .iter()
                            .map(|x| format!("{x:.4}")),
                    );
                    rec.extend([r.arrays, r.samples_converted, r.cells_written, r.operand_cell_bits].iter().map(u64::to_string));
                    rec.push(format!("{:.6}", r.ce()));
                    rec.push(format!("{:.6}", r.ee()));
                    rec.push(String::new());
                }
                Err(msg) => {
                    rec.extend(std::iter::repeat_n(String::new(), 15));
                    rec.push(msg.clone());
                }
            }
            w.write_record(&rec).expect("in-memory");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("in-memory")).expect("utf8"));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}
