//! Dataset-scale pairing and batch execution.
//!
//! Every source item `i` is paired with a target drawn from its own random
//! stream, so a plan depends only on `(seed, source list, target list,
//! method)` and never on the order in which items are processed.
//!
//! Generator: ChaCha8 keyed with the 64-bit seed (little-endian in the first
//! eight key bytes, remaining key bytes zero), stream id = item index, word
//! position 0. Per item the first `u64` picks the target by unbiased
//! rejection sampling over `[0, n_t)`, the second one (only for the
//! disjunctive method) becomes a uniform `[0, 1)` value from its top 53 bits
//! and selects FDM when it is below `p`. The name recorded in plan dumps is
//! [`GENERATOR_NAME`].

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::fdm::fdm_image;
use crate::histmatch::hm_image;
use crate::raster::Image;

pub const GENERATOR_NAME: &str = "chacha8-stream-v1";

/// Image extensions picked up when a dataset is given as a directory.
pub const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// Sorted, duplicate-free, nonempty list of dataset items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetRef {
    items: Vec<PathBuf>,
}

impl DatasetRef {
    /// Sorts the items. Duplicates and empty lists are rejected.
    pub fn new(mut items: Vec<PathBuf>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptyDataset("no items".into()));
        }
        items.sort();
        if let Some(w) = items.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateItem(w[0].clone()));
        }
        Ok(Self { items })
    }

    /// A single image file, or every image under a directory (recursive).
    pub fn discover(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if path.is_file() {
            return Self::new(vec![path.to_path_buf()]);
        }
        if !path.is_dir() {
            return Err(Error::ItemLoad {
                path: path.to_path_buf(),
                reason: "no such file or directory".into(),
            });
        }
        let mut items = Vec::new();
        for entry in WalkDir::new(path).follow_links(true) {
            let entry = entry.map_err(|e| Error::ItemLoad {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
            if entry.file_type().is_file() && has_image_extension(entry.path()) {
                items.push(entry.into_path());
            }
        }
        if items.is_empty() {
            return Err(Error::EmptyDataset(format!("no images under {}", path.display())));
        }
        Self::new(items)
    }

    pub fn items(&self) -> &[PathBuf] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|x| e.eq_ignore_ascii_case(x)))
}

/// Requested adaptation method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Fdm,
    Hm,
    /// FDM with probability `p`, HM otherwise, decided per item.
    FdmOrHm(f64),
    FdmThenHm,
}

impl Method {
    pub fn validate(self) -> Result<Self> {
        if let Method::FdmOrHm(p) = self {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidProbability(p));
            }
        }
        Ok(self)
    }

    /// Probability that the FDM stage runs for an item.
    pub fn fdm_probability(self) -> f64 {
        match self {
            Method::Fdm | Method::FdmThenHm => 1.0,
            Method::Hm => 0.0,
            Method::FdmOrHm(p) => p,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Fdm => "fdm",
            Method::Hm => "hm",
            Method::FdmOrHm(_) => "fdm-or-hm",
            Method::FdmThenHm => "fdm-then-hm",
        })
    }
}

/// Method applied to one concrete pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConcreteMethod {
    Fdm,
    Hm,
    FdmThenHm,
}

impl ConcreteMethod {
    pub const ALL: [ConcreteMethod; 3] = [Self::Fdm, Self::Hm, Self::FdmThenHm];

    pub fn name(self) -> &'static str {
        match self {
            Self::Fdm => "fdm",
            Self::Hm => "hm",
            Self::FdmThenHm => "fdm-then-hm",
        }
    }
}

impl fmt::Display for ConcreteMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConcreteMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub source: PathBuf,
    pub target: PathBuf,
    pub method: ConcreteMethod,
}

/// One assignment per source item, in source order.
#[derive(Debug, Clone, PartialEq)]
pub struct PairingPlan {
    pub seed: u64,
    pub method: Method,
    pub assignments: Vec<Assignment>,
}

/// Random stream for source item `index`.
pub fn item_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Unbiased draw from `[0, n)`.
fn draw_index(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    assert!(n > 0);
    // 2^64 mod n; values below it would over-represent small residues
    let threshold = n.wrapping_neg() % n;
    loop {
        let x = rng.next_u64();
        if x >= threshold {
            return x % n;
        }
    }
}

fn draw_unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn resolve(method: Method, rng: &mut ChaCha8Rng) -> ConcreteMethod {
    match method {
        Method::Fdm => ConcreteMethod::Fdm,
        Method::Hm => ConcreteMethod::Hm,
        Method::FdmThenHm => ConcreteMethod::FdmThenHm,
        Method::FdmOrHm(p) => {
            if draw_unit(rng) < p {
                ConcreteMethod::Fdm
            } else {
                ConcreteMethod::Hm
            }
        }
    }
}

/// Draws a target (with replacement) and a concrete method for every source item.
pub fn build_plan(
    source: &DatasetRef,
    target: &DatasetRef,
    method: Method,
    seed: u64,
) -> Result<PairingPlan> {
    let method = method.validate()?;
    if source.is_empty() || target.is_empty() {
        return Err(Error::EmptyDataset("source and target must be nonempty".into()));
    }
    let n_t = target.len() as u64;
    let assignments = source
        .items()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = item_rng(seed, i as u64);
            let t = draw_index(&mut rng, n_t) as usize;
            Assignment {
                source: s.clone(),
                target: target.items()[t].clone(),
                method: resolve(method, &mut rng),
            }
        })
        .collect();
    Ok(PairingPlan {
        seed,
        method,
        assignments,
    })
}

/// Builds a plan from fixed `(source, target)` pairs. Only the method is
/// drawn, from the same per-item streams as [`build_plan`].
pub fn plan_from_pairs(
    pairs: Vec<(PathBuf, PathBuf)>,
    method: Method,
    seed: u64,
) -> Result<PairingPlan> {
    let method = method.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyDataset("manifest lists no pairs".into()));
    }
    let assignments = pairs
        .into_iter()
        .enumerate()
        .map(|(i, (source, target))| {
            let mut rng = item_rng(seed, i as u64);
            // skip the target draw so method draws line up with build_plan
            rng.next_u64();
            Assignment {
                source,
                target,
                method: resolve(method, &mut rng),
            }
        })
        .collect();
    Ok(PairingPlan {
        seed,
        method,
        assignments,
    })
}

/// Parses a `source_path,target_path` manifest. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_manifest(text: &str, origin: &str) -> Result<Vec<(PathBuf, PathBuf)>> {
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let Some((s, t)) = line.split_once(',') else {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: idx + 1,
                reason: "expected source_path,target_path".into(),
            });
        };
        let (s, t) = (s.trim(), t.trim());
        if s.is_empty() || t.is_empty() {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: idx + 1,
                reason: "empty path".into(),
            });
        }
        pairs.push((PathBuf::from(s), PathBuf::from(t)));
    }
    Ok(pairs)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<(PathBuf, PathBuf)>> {
    let path = path.as_ref();
    parse_manifest(&fs::read_to_string(path)?, &path.display().to_string())
}

impl PairingPlan {
    pub fn count(&self, method: ConcreteMethod) -> usize {
        self.assignments.iter().filter(|a| a.method == method).count()
    }

    /// Tab-separated dump preceded by a `# seed=.. generator=.. p=..` header.
    pub fn to_dump(&self) -> String {
        let mut out = format!(
            "# seed={} generator={} p={}\n",
            self.seed,
            GENERATOR_NAME,
            self.method.fdm_probability()
        );
        for a in &self.assignments {
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                a.source.display(),
                a.target.display(),
                a.method
            ));
        }
        out
    }

    pub fn write_dump(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_dump()).map_err(|e| Error::OutputWrite {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

/// Header values and assignments read back from a plan dump.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanDump {
    pub seed: u64,
    pub generator: String,
    pub p: f64,
    pub assignments: Vec<Assignment>,
}

pub fn parse_plan_dump(text: &str) -> Result<PlanDump> {
    let err = |line: usize, reason: String| Error::Parse {
        path: "<plan dump>".into(),
        line,
        reason,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
    let fields: BTreeMap<&str, &str> = header
        .strip_prefix("# ")
        .ok_or_else(|| err(1, "header must start with '# '".into()))?
        .split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .collect();
    let field = |k: &str| fields.get(k).copied().ok_or_else(|| err(1, format!("missing {k}")));
    let seed = field("seed")?.parse().map_err(|e| err(1, format!("seed: {e}")))?;
    let p = field("p")?.parse().map_err(|e| err(1, format!("p: {e}")))?;
    let generator = field("generator")?.to_string();
    let mut assignments = Vec::new();
    for (i, line) in lines.enumerate() {
        let parts: Vec<&str> = line.split('\t').collect();
        let [s, t, m] = parts[..] else {
            return Err(err(i + 2, "expected 3 tab-separated fields".into()));
        };
        assignments.push(Assignment {
            source: PathBuf::from(s),
            target: PathBuf::from(t),
            method: m.parse().map_err(|e| err(i + 2, e))?,
        });
    }
    Ok(PlanDump {
        seed,
        generator,
        p,
        assignments,
    })
}

/// Applies `method` to one pair with the same target image for every stage.
pub fn transform_pair(
    source: &Image,
    target: &Image,
    method: ConcreteMethod,
    epsilon: f64,
    clamp: bool,
) -> Result<Image> {
    match method {
        ConcreteMethod::Fdm => Ok(fdm_image(source, target, epsilon, clamp)?.0),
        ConcreteMethod::Hm => hm_image(source, target),
        ConcreteMethod::FdmThenHm => {
            let (adapted, _) = fdm_image(source, target, epsilon, clamp)?;
            hm_image(&adapted, target)
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExecuteOptions {
    pub epsilon: f64,
    pub clamp: bool,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ItemStatus {
    Written(PathBuf),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemReport {
    pub source: PathBuf,
    pub method: ConcreteMethod,
    pub status: ItemStatus,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub items: Vec<ItemReport>,
    /// Successfully written items per method.
    pub method_counts: BTreeMap<ConcreteMethod, usize>,
    pub wall_time: Duration,
}

impl RunReport {
    pub fn success_count(&self) -> usize {
        self.items
            .iter()
            .filter(|i| matches!(i.status, ItemStatus::Written(_)))
            .count()
    }

    pub fn failure_count(&self) -> usize {
        self.items.len() - self.success_count()
    }
}

/// Output file name for a source item: its file stem with a `.png` suffix.
pub fn output_name(source: &Path) -> PathBuf {
    let stem = source.file_stem().unwrap_or(source.as_os_str());
    let mut name = stem.to_os_string();
    name.push(".png");
    PathBuf::from(name)
}

/// Runs every assignment on a pool of `jobs` threads and writes PNGs into
/// `out_dir`. Load and transform failures are recorded per item; write
/// failures abort the run.
pub fn execute_plan(
    plan: &PairingPlan,
    options: ExecuteOptions,
    out_dir: impl AsRef<Path>,
) -> Result<RunReport> {
    let start = Instant::now();
    let out_dir = out_dir.as_ref();
    let out_err = |path: &Path, e: &dyn fmt::Display| Error::OutputWrite {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };

    let mut seen = HashSet::new();
    for a in &plan.assignments {
        let name = output_name(&a.source);
        if !seen.insert(name.clone()) {
            return Err(out_err(
                &out_dir.join(&name),
                &"two source items map to the same output name",
            ));
        }
    }
    fs::create_dir_all(out_dir).map_err(|e| out_err(out_dir, &e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs.max(1))
        .build()
        .map_err(|e| out_err(out_dir, &e))?;

    let results: Vec<Result<ItemReport>> = pool.install(|| {
        plan.assignments
            .par_iter()
            .map(|a| run_one(a, options, out_dir))
            .collect()
    });

    let mut items = Vec::with_capacity(results.len());
    for r in results {
        items.push(r?);
    }
    let mut method_counts = BTreeMap::new();
    for item in &items {
        if matches!(item.status, ItemStatus::Written(_)) {
            *method_counts.entry(item.method).or_insert(0) += 1;
        }
    }
    Ok(RunReport {
        items,
        method_counts,
        wall_time: start.elapsed(),
    })
}

fn run_one(a: &Assignment, options: ExecuteOptions, out_dir: &Path) -> Result<ItemReport> {
    let report = |status| ItemReport {
        source: a.source.clone(),
        method: a.method,
        status,
    };
    let adapted = Image::load(&a.source)
        .and_then(|s| Ok((s, Image::load(&a.target)?)))
        .and_then(|(s, t)| transform_pair(&s, &t, a.method, options.epsilon, options.clamp));
    let adapted = match adapted {
        Ok(img) => img,
        Err(e) => return Ok(report(ItemStatus::Failed(e.to_string()))),
    };
    let path = out_dir.join(output_name(&a.source));
    let tmp = path.with_extension("png.partial");
    adapted.save_png(&tmp)?;
    fs::rename(&tmp, &path).map_err(|e| Error::OutputWrite {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    Ok(report(ItemStatus::Written(path)))
}

/// Human-readable one-line summary of a run.
pub fn summary_line(report: &RunReport) -> String {
    let mut line = format!(
        "items={} ok={} failed={}",
        report.items.len(),
        report.success_count(),
        report.failure_count()
    );
    for m in ConcreteMethod::ALL {
        line.push_str(&format!(
            " {}={}",
            m,
            report.method_counts.get(&m).copied().unwrap_or(0)
        ));
    }
    line.push_str(&format!(" wall_time={:.3}s", report.wall_time.as_secs_f64()));
    line
}

/// Writes failed items as `source<TAB>reason` lines.
pub fn write_failures(report: &RunReport, mut w: impl Write) -> std::io::Result<()> {
    for item in &report.items {
        if let ItemStatus::Failed(reason) = &item.status {
            writeln!(w, "{}\t{}", item.source.display(), reason)?;
        }
    }
    Ok(())
}
