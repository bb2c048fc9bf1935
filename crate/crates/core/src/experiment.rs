//! Random instances, seeded batches, parameter sweeps and their outputs.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::oracle::{audit_unsuccessful_run, verify_trace, EnumerationLimits, HeuristicAudit, VerificationReport};
use crate::rules::SeparationRuleMatrix;
use crate::strategy::{self, RunStatus, StrategyError, StrategyParams};
use crate::trace::OutcomeClaim;
use crate::yard::{ContainerId, ContainerType, YardConfiguration, YardDimensions, YardError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error("requested {requested} containers but the block holds {capacity}")]
    Capacity { requested: usize, capacity: usize },
    #[error("run {run}: trace verification failed\n{report}")]
    Verification { run: usize, report: VerificationReport },
    #[error("run {run}: {source}")]
    Strategy { run: usize, source: StrategyError },
    #[error("empty sweep value list")]
    EmptySweep,
    #[error(transparent)]
    Yard(#[from] YardError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Percentages of occupied cells per dangerous type; `T5` takes the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeMix {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
}

impl TypeMix {
    pub fn standard() -> Self {
        Self {
            t1: 1.0,
            t2: 7.0,
            t3: 7.0,
            t4: 20.0,
        }
    }

    fn entries(&self) -> [(ContainerType, f64); 4] {
        [
            (ContainerType::T1, self.t1),
            (ContainerType::T2, self.t2),
            (ContainerType::T3, self.t3),
            (ContainerType::T4, self.t4),
        ]
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        let entries = self.entries();
        if entries.iter().any(|(_, p)| !(p.is_finite() && *p >= 0.0)) {
            return Err(ExperimentError::InvalidSpec(format!(
                "mix percentages must be non-negative: {self}"
            )));
        }
        let total: f64 = entries.iter().map(|(_, p)| p).sum();
        if total > 100.0 + 1e-9 {
            return Err(ExperimentError::InvalidSpec(format!("mix exceeds 100%: {self}")));
        }
        Ok(())
    }
}

impl fmt::Display for TypeMix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t1={},t2={},t3={},t4={}", self.t1, self.t2, self.t3, self.t4)
    }
}

impl FromStr for TypeMix {
    type Err = String;

    /// Parses `t1=1,t2=7,t3=7,t4=20`; omitted types are 0.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut mix = TypeMix {
            t1: 0.0,
            t2: 0.0,
            t3: 0.0,
            t4: 0.0,
        };
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format!("expected `tN=percent`, got `{part}`"))?;
            let value: f64 = value.trim().parse().map_err(|_| format!("bad percentage `{value}`"))?;
            match key.trim().to_ascii_lowercase().as_str() {
                "t1" => mix.t1 = value,
                "t2" => mix.t2 = value,
                "t3" => mix.t3 = value,
                "t4" => mix.t4 = value,
                other => return Err(format!("unknown type `{other}` in mix")),
            }
        }
        Ok(mix)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub dims: YardDimensions,
    /// Occupied fraction of the block, in `[0, 1]`.
    pub fill: f64,
    pub mix: TypeMix,
    pub params: StrategyParams,
    pub runs: usize,
    pub master_seed: u64,
    pub matrix: SeparationRuleMatrix,
}

impl ExperimentSpec {
    /// 10×10×4 block, 75% full, 1/7/7/20% mix, default matrix.
    pub fn standard(params: StrategyParams, runs: usize, master_seed: u64) -> Self {
        Self {
            dims: YardDimensions::new(10, 10, 4).expect("valid"),
            fill: 0.75,
            mix: TypeMix::standard(),
            params,
            runs,
            master_seed,
            matrix: SeparationRuleMatrix::standard(),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if !(0.0..=1.0).contains(&self.fill) {
            return Err(ExperimentError::InvalidSpec(format!(
                "fill must be in [0, 1], got {}",
                self.fill
            )));
        }
        if self.runs == 0 {
            return Err(ExperimentError::InvalidSpec("runs must be at least 1".into()));
        }
        self.mix.validate()?;
        self.params
            .validate()
            .map_err(|e| ExperimentError::InvalidSpec(e.to_string()))
    }

    /// Container count per type: `round(fill × capacity × pct / 100)` for
    /// T1..T4 (halves round up), the rest of `round(fill × capacity)` as T5.
    pub fn type_counts(&self) -> Result<BTreeMap<ContainerType, usize>, ExperimentError> {
        let capacity = self.dims.capacity();
        let occupied = self.fill * capacity as f64;
        let total = round_half_up(occupied);
        let mut counts = BTreeMap::new();
        let mut dangerous = 0;
        for (t, pct) in self.mix.entries() {
            let n = round_half_up(occupied * pct / 100.0);
            dangerous += n;
            counts.insert(t, n);
        }
        if dangerous > total || total > capacity {
            return Err(ExperimentError::Capacity {
                requested: dangerous.max(total),
                capacity: total.min(capacity),
            });
        }
        counts.insert(ContainerType::T5, total - dangerous);
        Ok(counts)
    }
}

fn round_half_up(x: f64) -> usize {
    // Products like 0.7 × 400 land a hair off the integer.
    (x + 0.5 + 1e-9).floor().max(0.0) as usize
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent seed for one purpose of one run of a batch.
pub fn derive_seed(master_seed: u64, run_index: usize, stream: u64) -> u64 {
    splitmix64(splitmix64(master_seed ^ splitmix64(run_index as u64)) ^ stream)
}

const INSTANCE_STREAM: u64 = 1;
const SOLVER_STREAM: u64 = 2;

/// Random gravity-valid configuration: repeatedly draws a placeable cell and
/// a remaining container uniformly at random. Ids are assigned by type, T1
/// first.
pub fn generate_instance(spec: &ExperimentSpec, run_index: usize) -> Result<YardConfiguration, ExperimentError> {
    spec.mix.validate()?;
    let counts = spec.type_counts()?;
    let mut pool: Vec<(ContainerId, ContainerType)> = Vec::new();
    for (t, n) in &counts {
        for _ in 0..*n {
            pool.push((ContainerId(pool.len() as u32), *t));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.master_seed, run_index, INSTANCE_STREAM));
    let mut cfg = YardConfiguration::new(spec.dims);
    while !pool.is_empty() {
        let cells = cfg.placeable_cells();
        let cell = cells[rng.random_range(0..cells.len())];
        let (id, t) = pool.swap_remove(rng.random_range(0..pool.len()));
        cfg.place(id, t, cell)?;
    }
    Ok(cfg)
}

/// One line of the per-run CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub strategy: String,
    pub seed: u64,
    pub run: usize,
    pub rows: usize,
    pub slots: usize,
    pub tiers: usize,
    pub fill: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
    pub weighting: String,
    pub status: RunStatus,
    pub movements: usize,
    pub final_worst: u32,
    pub final_sum: u32,
    pub runtime_ms: f64,
}

pub const RUN_CSV_HEADER: &str =
    "strategy,seed,run,rows,slots,tiers,fill,t1,t2,t3,t4,weighting,status,movements,final_worst,final_sum,runtime_ms";

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MovementStats {
    pub min: usize,
    pub max: usize,
    pub avg: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunStatistics {
    pub runs: usize,
    /// Percentage of runs that ended safe.
    pub success_rate: f64,
    /// Over successful runs only; `None` when no run succeeded.
    pub movements: Option<MovementStats>,
    pub status_counts: BTreeMap<&'static str, usize>,
    pub avg_runtime_ms: f64,
}

impl RunStatistics {
    pub fn from_rows(rows: &[RunRow]) -> Self {
        let mut status_counts: BTreeMap<&'static str, usize> = RunStatus::ALL.iter().map(|s| (s.name(), 0)).collect();
        for r in rows {
            *status_counts.entry(r.status.name()).or_default() += 1;
        }
        let successful: Vec<usize> = rows
            .iter()
            .filter(|r| r.status == RunStatus::Safe)
            .map(|r| r.movements)
            .collect();
        let movements = (!successful.is_empty()).then(|| MovementStats {
            min: *successful.iter().min().expect("non-empty"),
            max: *successful.iter().max().expect("non-empty"),
            avg: successful.iter().sum::<usize>() as f64 / successful.len() as f64,
        });
        let n = rows.len().max(1) as f64;
        Self {
            runs: rows.len(),
            success_rate: 100.0 * successful.len() as f64 / n,
            movements,
            status_counts,
            avg_runtime_ms: rows.iter().map(|r| r.runtime_ms).sum::<f64>() / n,
        }
    }

    pub fn avg_movements(&self) -> Option<f64> {
        self.movements.map(|m| m.avg)
    }
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub stats: RunStatistics,
    pub rows: Vec<RunRow>,
    /// Cross-checks of runs that stalled on instances small enough to
    /// enumerate, by run index.
    pub audits: Vec<(usize, HeuristicAudit)>,
}

struct SingleRun {
    row: RunRow,
    audit: Option<HeuristicAudit>,
}

fn solve_one(spec: &ExperimentSpec, run: usize) -> Result<SingleRun, ExperimentError> {
    let initial = generate_instance(spec, run)?;
    let mut params = spec.params.clone();
    params.seed = derive_seed(spec.master_seed, run, SOLVER_STREAM);
    let mut cfg = initial.clone();
    let started = Instant::now();
    let outcome =
        strategy::run(&mut cfg, &spec.matrix, &params).map_err(|source| ExperimentError::Strategy { run, source })?;
    let runtime_ms = started.elapsed().as_secs_f64() * 1000.0;

    let claim = OutcomeClaim::from(&outcome);
    let report = verify_trace(&initial, &outcome.trace, Some(&claim), &spec.matrix);
    if !report.passed() {
        return Err(ExperimentError::Verification { run, report });
    }
    let audit = audit_unsuccessful_run(&initial, outcome.status, &spec.matrix, EnumerationLimits::default())
        .ok()
        .flatten();

    Ok(SingleRun {
        row: RunRow {
            strategy: params.strategy.name().to_string(),
            seed: spec.master_seed,
            run,
            rows: spec.dims.rows,
            slots: spec.dims.slots,
            tiers: spec.dims.tiers,
            fill: spec.fill,
            t1: spec.mix.t1,
            t2: spec.mix.t2,
            t3: spec.mix.t3,
            t4: spec.mix.t4,
            weighting: params.weighting.name().to_string(),
            status: outcome.status,
            movements: outcome.movements,
            final_worst: outcome.final_worst,
            final_sum: outcome.final_sum,
            runtime_ms,
        },
        audit,
    })
}

/// Generates, solves and verifies `spec.runs` instances. Runs execute in
/// parallel; rows come back in run order.
pub fn run_batch(spec: &ExperimentSpec) -> Result<BatchResult, ExperimentError> {
    spec.validate()?;
    spec.type_counts()?;
    let results: Vec<SingleRun> = (0..spec.runs)
        .into_par_iter()
        .map(|run| solve_one(spec, run))
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::with_capacity(results.len());
    let mut audits = Vec::new();
    for r in results {
        if let Some(a) = r.audit {
            audits.push((r.row.run, a));
        }
        rows.push(r.row);
    }
    Ok(BatchResult {
        stats: RunStatistics::from_rows(&rows),
        rows,
        audits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Fill,
    Dims,
    T1Pct,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Fill => "fill",
            SweepAxis::Dims => "dims",
            SweepAxis::T1Pct => "t1_pct",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fill" => Ok(SweepAxis::Fill),
            "dims" => Ok(SweepAxis::Dims),
            "t1_pct" | "t1" => Ok(SweepAxis::T1Pct),
            other => Err(format!("unknown sweep axis `{other}`")),
        }
    }
}

/// One point on a sweep axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepValue {
    /// Fill percentage, e.g. `70`.
    Fill(f64),
    Dims {
        rows: usize,
        slots: usize,
        tiers: usize,
    },
    T1Pct(f64),
}

impl SweepValue {
    pub fn parse(axis: SweepAxis, s: &str) -> Result<Self, String> {
        let number = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("bad sweep value `{s}`"));
        match axis {
            SweepAxis::Fill => Ok(SweepValue::Fill(number(s)?)),
            SweepAxis::T1Pct => Ok(SweepValue::T1Pct(number(s)?)),
            SweepAxis::Dims => {
                let (rows, slots, tiers) = parse_dims(s)?;
                Ok(SweepValue::Dims { rows, slots, tiers })
            }
        }
    }

    /// Label used in the CSV.
    pub fn label(&self) -> String {
        match self {
            SweepValue::Fill(p) | SweepValue::T1Pct(p) => format!("{p}"),
            SweepValue::Dims { rows, slots, tiers } => format!("{rows}x{slots}x{tiers}"),
        }
    }

    /// Numeric x coordinate for plots; block capacity on the dims axis.
    pub fn x(&self) -> f64 {
        match self {
            SweepValue::Fill(p) | SweepValue::T1Pct(p) => *p,
            SweepValue::Dims { rows, slots, tiers } => (rows * slots * tiers) as f64,
        }
    }

    fn apply(&self, base: &ExperimentSpec) -> Result<ExperimentSpec, ExperimentError> {
        let mut spec = base.clone();
        match *self {
            SweepValue::Fill(p) => spec.fill = p / 100.0,
            SweepValue::T1Pct(p) => spec.mix.t1 = p,
            SweepValue::Dims { rows, slots, tiers } => {
                let d = base.dims;
                spec.dims = YardDimensions::with_pitch(rows, slots, tiers, [d.row_pitch, d.slot_pitch, d.tier_pitch])?;
            }
        }
        Ok(spec)
    }
}

/// Parses `RxSxT`.
pub fn parse_dims(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.trim().split(['x', 'X']).collect();
    let [r, sl, t] = parts.as_slice() else {
        return Err(format!("expected RxSxT, got `{s}`"));
    };
    let n = |v: &str| v.parse::<usize>().map_err(|_| format!("bad dimension `{v}` in `{s}`"));
    Ok((n(r)?, n(sl)?, n(t)?))
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: SweepValue,
    pub stats: RunStatistics,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub strategy: String,
    pub points: Vec<SweepPoint>,
}

/// One batch per value. Every batch uses the base master seed, so the same
/// run index sees the same random streams at every point.
pub fn sweep(base: &ExperimentSpec, axis: SweepAxis, values: &[SweepValue]) -> Result<SweepTable, ExperimentError> {
    if values.is_empty() {
        return Err(ExperimentError::EmptySweep);
    }
    let mut points = Vec::with_capacity(values.len());
    for v in values {
        let spec = v.apply(base)?;
        let batch = run_batch(&spec)?;
        points.push(SweepPoint {
            value: *v,
            stats: batch.stats,
        });
    }
    Ok(SweepTable {
        axis,
        strategy: base.params.strategy.name().to_string(),
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    PlotData,
    Svg,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "plotdata" => Ok(OutputFormat::PlotData),
            "svg" => Ok(OutputFormat::Svg),
            other => Err(format!("unknown output format `{other}`")),
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn stats_fields(s: &RunStatistics, timing: bool) -> Vec<String> {
    let mut f = vec![
        s.runs.to_string(),
        format!("{}", s.success_rate),
        s.movements.map(|m| m.min.to_string()).unwrap_or_default(),
        s.movements.map(|m| m.max.to_string()).unwrap_or_default(),
        opt(s.avg_movements()),
    ];
    for st in RunStatus::ALL {
        f.push(s.status_counts.get(st.name()).copied().unwrap_or(0).to_string());
    }
    f.push(if timing {
        format!("{:.3}", s.avg_runtime_ms)
    } else {
        "0".into()
    });
    f
}

const STATS_HEADER: [&str; 10] = [
    "runs",
    "success_rate",
    "min_movements",
    "max_movements",
    "avg_movements",
    "safe",
    "budget_exhausted",
    "local_minimum",
    "cycle_abort",
    "avg_runtime_ms",
];

/// Per-run CSV text. With `timing == false` (comparison mode) runtime
/// columns are written as 0 so identical batches give identical bytes.
pub fn runs_csv(rows: &[RunRow], timing: bool) -> Result<String, ExperimentError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(RUN_CSV_HEADER.split(','))?;
    for r in rows {
        w.write_record([
            r.strategy.clone(),
            r.seed.to_string(),
            r.run.to_string(),
            r.rows.to_string(),
            r.slots.to_string(),
            r.tiers.to_string(),
            format!("{}", r.fill),
            format!("{}", r.t1),
            format!("{}", r.t2),
            format!("{}", r.t3),
            format!("{}", r.t4),
            r.weighting.clone(),
            r.status.name().to_string(),
            r.movements.to_string(),
            r.final_worst.to_string(),
            r.final_sum.to_string(),
            if timing {
                format!("{:.3}", r.runtime_ms)
            } else {
                "0".into()
            },
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| ExperimentError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn summary_csv(
    strategy: &str,
    weighting: &str,
    stats: &RunStatistics,
    timing: bool,
) -> Result<String, ExperimentError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let mut header = vec!["strategy", "weighting"];
    header.extend(STATS_HEADER);
    w.write_record(&header)?;
    let mut row = vec![strategy.to_string(), weighting.to_string()];
    row.extend(stats_fields(stats, timing));
    w.write_record(&row)?;
    let bytes = w
        .into_inner()
        .map_err(|e| ExperimentError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn sweep_csv(table: &SweepTable, timing: bool) -> Result<String, ExperimentError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let mut header = vec!["strategy", "axis", "value", "x"];
    header.extend(STATS_HEADER);
    w.write_record(&header)?;
    for p in &table.points {
        let mut row = vec![
            table.strategy.clone(),
            table.axis.name().to_string(),
            p.value.label(),
            format!("{}", p.value.x()),
        ];
        row.extend(stats_fields(&p.stats, timing));
        w.write_record(&row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| ExperimentError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Whitespace-separated columns `x avg_movements success_rate`, one line
/// per sweep point in ascending x. Missing averages are written as `nan`.
pub fn sweep_plotdata(table: &SweepTable) -> String {
    let mut points: Vec<&SweepPoint> = table.points.iter().collect();
    points.sort_by(|a, b| a.value.x().total_cmp(&b.value.x()));
    let mut out = format!("# {} x avg_movements success_rate\n", table.axis.name());
    for p in points {
        let avg = p
            .stats
            .avg_movements()
            .map(|a| format!("{a}"))
            .unwrap_or_else(|| "nan".into());
        out.push_str(&format!("{} {} {}\n", p.value.x(), avg, p.stats.success_rate));
    }
    out
}

/// Two stacked line charts: average movements and success rate against the
/// sweep variable.
pub fn sweep_svg(table: &SweepTable) -> String {
    let mut points: Vec<&SweepPoint> = table.points.iter().collect();
    points.sort_by(|a, b| a.value.x().total_cmp(&b.value.x()));
    let series = [
        (
            "average movements (successful runs)",
            points
                .iter()
                .map(|p| (p.value.x(), p.stats.avg_movements()))
                .collect::<Vec<_>>(),
        ),
        (
            "success rate (%)",
            points
                .iter()
                .map(|p| (p.value.x(), Some(p.stats.success_rate)))
                .collect::<Vec<_>>(),
        ),
    ];
    let (w, h, pad) = (640.0, 260.0, 50.0);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{}\" font-family=\"sans-serif\" font-size=\"12\">\n",
        h * 2.0
    );
    for (panel, (title, data)) in series.iter().enumerate() {
        let top = panel as f64 * h;
        let xs: Vec<f64> = data.iter().map(|(x, _)| *x).collect();
        let ys: Vec<f64> = data.iter().filter_map(|(_, y)| *y).collect();
        let (xmin, xmax) = bounds(&xs);
        let (_, ymax) = bounds(&ys);
        let ymax = if ymax <= 0.0 { 1.0 } else { ymax };
        let sx = |x: f64| pad + (x - xmin) / (xmax - xmin).max(1e-12) * (w - 2.0 * pad);
        let sy = |y: f64| top + h - pad + -(y / ymax) * (h - 2.0 * pad);
        svg.push_str(&format!(
            "  <text x=\"{pad}\" y=\"{}\">{} vs {}</text>\n",
            top + 20.0,
            title,
            table.axis.name()
        ));
        svg.push_str(&format!(
            "  <line x1=\"{pad}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n  <line x1=\"{pad}\" y1=\"{2}\" x2=\"{pad}\" y2=\"{0}\" stroke=\"black\"/>\n",
            top + h - pad,
            w - pad,
            top + pad
        ));
        svg.push_str(&format!("  <text x=\"5\" y=\"{}\">{ymax:.1}</text>\n", top + pad + 4.0));
        let path: Vec<String> = data
            .iter()
            .filter_map(|(x, y)| y.map(|y| format!("{:.2},{:.2}", sx(*x), sy(y))))
            .collect();
        if !path.is_empty() {
            svg.push_str(&format!(
                "  <polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"{}\"/>\n",
                path.join(" ")
            ));
        }
        for (x, y) in data {
            svg.push_str(&format!(
                "  <text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\">{x}</text>\n",
                sx(*x),
                top + h - pad + 16.0
            ));
            if let Some(y) = y {
                svg.push_str(&format!(
                    "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"steelblue\"/>\n",
                    sx(*x),
                    sy(*y)
                ));
            }
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, ExperimentError> {
    fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| ExperimentError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Writes `summary.csv` (one row) and `runs.csv` (one row per run).
pub fn emit_batch(
    batch: &BatchResult,
    spec: &ExperimentSpec,
    dir: &Path,
    timing: bool,
) -> Result<Vec<PathBuf>, ExperimentError> {
    let summary = summary_csv(
        spec.params.strategy.name(),
        spec.params.weighting.name(),
        &batch.stats,
        timing,
    )?;
    Ok(vec![
        write_file(dir, "summary.csv", &summary)?,
        write_file(dir, "runs.csv", &runs_csv(&batch.rows, timing)?)?,
    ])
}

/// Writes the sweep table as `sweep_<axis>.{csv,dat,svg}`.
pub fn emit_sweep(
    table: &SweepTable,
    format: OutputFormat,
    dir: &Path,
    timing: bool,
) -> Result<Vec<PathBuf>, ExperimentError> {
    if table.points.is_empty() {
        return Err(ExperimentError::EmptySweep);
    }
    let stem = format!("sweep_{}", table.axis.name());
    let file = match format {
        OutputFormat::Csv => write_file(dir, &format!("{stem}.csv"), &sweep_csv(table, timing)?)?,
        OutputFormat::PlotData => write_file(dir, &format!("{stem}.dat"), &sweep_plotdata(table))?,
        OutputFormat::Svg => write_file(dir, &format!("{stem}.svg"), &sweep_svg(table))?,
    };
    Ok(vec![file])
}

/// Rebuilds a sweep table from its CSV, for re-plotting.
pub fn parse_sweep_csv(text: &str) -> Result<SweepTable, String> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut points = Vec::new();
    let mut axis = None;
    let mut strategy = String::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let get = |i: usize| rec.get(i).unwrap_or("").to_string();
        let ax: SweepAxis = get(1).parse()?;
        axis = Some(ax);
        strategy = get(0);
        let value = SweepValue::parse(ax, &get(2))?;
        let num = |i: usize| -> Result<Option<f64>, String> {
            let s = get(i);
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| format!("bad number `{s}`"))
            }
        };
        let runs = num(4)?.unwrap_or(0.0) as usize;
        let movements = match (num(6)?, num(7)?, num(8)?) {
            (Some(min), Some(max), Some(avg)) => Some(MovementStats {
                min: min as usize,
                max: max as usize,
                avg,
            }),
            _ => None,
        };
        let mut status_counts = BTreeMap::new();
        for (k, st) in RunStatus::ALL.iter().enumerate() {
            status_counts.insert(st.name(), num(9 + k)?.unwrap_or(0.0) as usize);
        }
        points.push(SweepPoint {
            value,
            stats: RunStatistics {
                runs,
                success_rate: num(5)?.unwrap_or(0.0),
                movements,
                status_counts,
                avg_runtime_ms: num(13)?.unwrap_or(0.0),
            },
        });
    }
    Ok(SweepTable {
        axis: axis.ok_or("sweep CSV has no rows")?,
        strategy,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::Strategy;

    fn spec(strategy: Strategy) -> ExperimentSpec {
        ExperimentSpec::standard(StrategyParams::new(strategy, 0), 4, 7)
    }

    #[test]
    fn standard_type_counts() {
        let counts = spec(Strategy::Cabs).type_counts().unwrap();
        let got: Vec<usize> = counts.values().copied().collect();
        assert_eq!(got, vec![3, 21, 21, 60, 195]);
    }

    #[test]
    fn t1_counts_on_smaller_block() {
        let mut s = spec(Strategy::Cabs);
        s.dims = YardDimensions::new(10, 10, 3).unwrap();
        s.mix.t1 = 12.0;
        assert_eq!(s.type_counts().unwrap()[&ContainerType::T1], 27);
        s.mix.t1 = 3.0;
        // 225 * 0.03 = 6.75
        assert_eq!(s.type_counts().unwrap()[&ContainerType::T1], 7);
        s.mix.t1 = 2.0;
        // 4.5 rounds up
        assert_eq!(s.type_counts().unwrap()[&ContainerType::T1], 5);
    }

    #[test]
    fn generated_instances_are_valid_and_reproducible() {
        let s = spec(Strategy::Cabs);
        let a = generate_instance(&s, 3).unwrap();
        let b = generate_instance(&s, 3).unwrap();
        let c = generate_instance(&s, 4).unwrap();
        a.validate().unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 300);
        let t1 = a.containers().filter(|r| r.ctype == ContainerType::T1).count();
        assert_eq!(t1, 3);
    }

    #[test]
    fn zero_fill_is_empty() {
        let mut s = spec(Strategy::Cabs);
        s.fill = 0.0;
        assert!(generate_instance(&s, 0).unwrap().is_empty());
    }

    #[test]
    fn overfull_mix_is_rejected() {
        let mut s = spec(Strategy::Cabs);
        s.mix.t4 = 95.0;
        assert!(matches!(generate_instance(&s, 0), Err(ExperimentError::InvalidSpec(_))));
        s.mix.t4 = 20.0;
        s.fill = 1.2;
        assert!(s.validate().is_err());
    }

    #[test]
    fn mix_parsing() {
        let m: TypeMix = "t1=1,t2=7,t3=7,t4=20".parse().unwrap();
        assert_eq!(m, TypeMix::standard());
        assert!("t9=1".parse::<TypeMix>().is_err());
        assert!("t1".parse::<TypeMix>().is_err());
        assert_eq!(parse_dims("10x10x4").unwrap(), (10, 10, 4));
        assert!(parse_dims("10x10").is_err());
    }

    #[test]
    fn statistics_use_successful_runs_only() {
        let base = RunRow {
            strategy: "cabs".into(),
            seed: 0,
            run: 0,
            rows: 1,
            slots: 1,
            tiers: 1,
            fill: 0.5,
            t1: 1.0,
            t2: 0.0,
            t3: 0.0,
            t4: 0.0,
            weighting: "inverse_neighbourhood".into(),
            status: RunStatus::Safe,
            movements: 10,
            final_worst: 0,
            final_sum: 0,
            runtime_ms: 1.0,
        };
        let rows = vec![
            base.clone(),
            RunRow {
                movements: 30,
                ..base.clone()
            },
            RunRow {
                movements: 1000,
                status: RunStatus::BudgetExhausted,
                final_worst: 1,
                ..base.clone()
            },
            RunRow {
                movements: 5,
                status: RunStatus::LocalMinimum,
                final_worst: 2,
                ..base
            },
        ];
        let s = RunStatistics::from_rows(&rows);
        assert_eq!(s.success_rate, 50.0);
        assert_eq!(
            s.movements,
            Some(MovementStats {
                min: 10,
                max: 30,
                avg: 20.0
            })
        );
        assert_eq!(s.status_counts["budget_exhausted"], 1);
        assert_eq!(s.status_counts["cycle_abort"], 0);
    }

    #[test]
    fn empty_sweep_is_an_error() {
        assert!(matches!(
            sweep(&spec(Strategy::Cabs), SweepAxis::Fill, &[]),
            Err(ExperimentError::EmptySweep)
        ));
    }

    #[test]
    fn derived_seeds_differ_by_run_and_stream() {
        assert_ne!(derive_seed(1, 0, 1), derive_seed(1, 1, 1));
        assert_ne!(derive_seed(1, 0, 1), derive_seed(1, 0, 2));
        assert_eq!(derive_seed(9, 5, 2), derive_seed(9, 5, 2));
    }
}
