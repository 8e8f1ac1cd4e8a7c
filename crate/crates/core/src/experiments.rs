//! Monte-Carlo campaigns: parameter sweeps over scenarios, solved in
//! parallel and written out as self-describing CSV files.
//!
//! A campaign file uses the scenario file syntax (`key = value`, `#`
//! comments) with these keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `campaign` | kind, e.g. `rate_vs_epsilon` (required) |
//! | `scenario` | base scenario file, relative to the campaign file |
//! | `trials` | Monte-Carlo trials per sweep point (default 100) |
//! | `seed` | base seed; trial `t` uses `seed + t` (default: scenario `rng_seed`) |
//! | `sweep` | `key: v1, v2, ...` over one scenario key |
//! | `vary.<key>` | extra factor crossed with the sweep |
//! | `set.<key>` | override applied to the base scenario |
//! | `thresholds_db` | CCDF thresholds, a list or `start:step:end` |
//! | `grid_deg` | beampattern angles, a list or `start:step:end` |
//!
//! Value lists are split on `;` when one is present and on `,` otherwise, so
//! list-valued keys can be swept as `target_angles: 10, 30; -40, 20`.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::array_model::Scene;
use crate::bccd::{drip_solve_scene, SolveResult, SolveStatus};
use crate::error::{DripError, Result};
use crate::linalg::CMatrix;
use crate::metrics::{beampattern, papr_ccdf, sum_rate, BoxStats, MetricReport};
use crate::scenario::{load_scenario, ScenarioConfig, KEYS};
use crate::signals::{lfm_chirp, CommBlock};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CampaignKind {
    SinrVsIter,
    MuiVsIter,
    RateVsEpsilon,
    ConstellationScatter,
    SinrVsEpsilon,
    Beampattern,
    PaprCcdf,
    MuiVsEpsilonBox,
    MuiVsEta,
    SimilarityRegions,
}

impl CampaignKind {
    pub const ALL: [CampaignKind; 10] = [
        CampaignKind::SinrVsIter,
        CampaignKind::MuiVsIter,
        CampaignKind::RateVsEpsilon,
        CampaignKind::ConstellationScatter,
        CampaignKind::SinrVsEpsilon,
        CampaignKind::Beampattern,
        CampaignKind::PaprCcdf,
        CampaignKind::MuiVsEpsilonBox,
        CampaignKind::MuiVsEta,
        CampaignKind::SimilarityRegions,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CampaignKind::SinrVsIter => "sinr_vs_iter",
            CampaignKind::MuiVsIter => "mui_vs_iter",
            CampaignKind::RateVsEpsilon => "rate_vs_epsilon",
            CampaignKind::ConstellationScatter => "constellation_scatter",
            CampaignKind::SinrVsEpsilon => "sinr_vs_epsilon",
            CampaignKind::Beampattern => "beampattern",
            CampaignKind::PaprCcdf => "papr_ccdf",
            CampaignKind::MuiVsEpsilonBox => "mui_vs_epsilon_box",
            CampaignKind::MuiVsEta => "mui_vs_eta",
            CampaignKind::SimilarityRegions => "similarity_regions",
        }
    }
}

impl FromStr for CampaignKind {
    type Err = DripError;

    fn from_str(s: &str) -> Result<Self> {
        CampaignKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| DripError::Campaign(format!("unknown campaign kind `{}`", s.trim())))
    }
}

/// One swept scenario key and its textual values.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub key: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Campaign {
    pub name: CampaignKind,
    pub base_scenario: ScenarioConfig,
    pub sweep: Option<Sweep>,
    /// Extra factors, crossed with the sweep (sweep varies fastest).
    pub vary: Vec<Sweep>,
    pub trials: usize,
    pub base_seed: u64,
    pub thresholds_db: Vec<f64>,
    pub grid_deg: Vec<f64>,
    pub out_dir: PathBuf,
}

fn split_values(v: &str) -> Vec<String> {
    let sep = if v.contains(';') { ';' } else { ',' };
    v.split(sep)
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// A list of numbers or an inclusive `start:step:end` range.
fn parse_grid(key: &str, v: &str) -> Result<Vec<f64>> {
    let bad = || DripError::Campaign(format!("`{key}`: cannot parse `{v}`"));
    if v.contains(':') {
        let parts: Vec<f64> = v
            .split(':')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let [start, step, end] = parts[..] else {
            return Err(bad());
        };
        if !(step > 0.0) || end < start {
            return Err(bad());
        }
        let count = ((end - start) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| start + step * i as f64).collect());
    }
    split_values(v)
        .iter()
        .map(|s| s.parse::<f64>().map_err(|_| bad()))
        .collect()
}

fn parse_sweep(key: &str, v: &str, line: usize) -> Result<Sweep> {
    if !KEYS.contains(&key) {
        return Err(DripError::Parse {
            line,
            msg: format!("sweep parameter `{key}` is not a scenario key"),
        });
    }
    let values = split_values(v);
    if values.is_empty() {
        return Err(DripError::Parse {
            line,
            msg: format!("sweep over `{key}` has no values"),
        });
    }
    Ok(Sweep {
        key: key.to_string(),
        values,
    })
}

impl Campaign {
    /// Parse campaign text; `scenario` paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut kind = None;
        let mut base = ScenarioConfig::default();
        let mut sets: Vec<(String, String, usize)> = Vec::new();
        let mut sweep = None;
        let mut vary = Vec::new();
        let mut trials = 100;
        let mut seed = None;
        let mut thresholds = None;
        let mut grid = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return Err(DripError::Parse {
                    line,
                    msg: format!("expected `key = value`, got `{body}`"),
                });
            };
            let (k, v) = (k.trim(), v.trim());
            let perr = |e: DripError| DripError::Parse {
                line,
                msg: e.to_string(),
            };
            match k {
                "campaign" => kind = Some(v.parse::<CampaignKind>().map_err(perr)?),
                "scenario" => {
                    base = load_scenario(base_dir.join(v)).map_err(|e| match e {
                        DripError::Io(io) => DripError::Io(io),
                        other => perr(other),
                    })?
                }
                "trials" => {
                    trials = v
                        .parse()
                        .ok()
                        .filter(|&t: &usize| t >= 1)
                        .ok_or(DripError::Parse {
                            line,
                            msg: format!("trials must be a positive integer, got `{v}`"),
                        })?
                }
                "seed" => {
                    seed = Some(v.parse().map_err(|_| DripError::Parse {
                        line,
                        msg: format!("`{v}` is not a seed"),
                    })?)
                }
                "sweep" => {
                    let Some((key, values)) = v.split_once(':') else {
                        return Err(DripError::Parse {
                            line,
                            msg: "sweep must read `key: v1, v2, ...`".into(),
                        });
                    };
                    sweep = Some(parse_sweep(key.trim(), values, line)?);
                }
                "thresholds_db" => thresholds = Some(parse_grid(k, v).map_err(perr)?),
                "grid_deg" => grid = Some(parse_grid(k, v).map_err(perr)?),
                _ => {
                    if let Some(key) = k.strip_prefix("vary.") {
                        vary.push(parse_sweep(key, v, line)?);
                    } else if let Some(key) = k.strip_prefix("set.") {
                        sets.push((key.to_string(), v.to_string(), line));
                    } else {
                        return Err(DripError::Parse {
                            line,
                            msg: format!("unknown campaign key `{k}`"),
                        });
                    }
                }
            }
        }
        for (key, value, line) in sets {
            base.set(&key, &value).map_err(|e| DripError::Parse {
                line,
                msg: e.to_string(),
            })?;
        }
        let name = kind.ok_or_else(|| DripError::Campaign("missing `campaign = <kind>`".into()))?;
        let c = Campaign {
            name,
            base_seed: seed.unwrap_or(base.rng_seed),
            base_scenario: base,
            sweep,
            vary,
            trials,
            thresholds_db: thresholds
                .unwrap_or_else(|| (0..=120).map(|i| i as f64 * 0.05).collect()),
            grid_deg: grid.unwrap_or_else(|| (0..=360).map(|i| -90.0 + 0.5 * i as f64).collect()),
            out_dir: PathBuf::from("."),
        };
        if c.name == CampaignKind::SimilarityRegions
            && c.sweep.as_ref().is_none_or(|s| s.key != "epsilon")
        {
            return Err(DripError::Campaign(
                "similarity_regions needs `sweep = epsilon: ...`".into(),
            ));
        }
        // surface bad sweep values before any solve starts
        c.points()?;
        Ok(c)
    }

    /// Every sweep point: its `(key, value)` labels and the resulting scenario.
    pub fn points(&self) -> Result<Vec<(Vec<(String, String)>, ScenarioConfig)>> {
        // cartesian product with the sweep varying fastest; labels list the
        // sweep key first, then each `vary` key in file order
        let mut factors: Vec<&Sweep> = self.vary.iter().collect();
        factors.extend(self.sweep.as_ref());
        let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
        for f in &factors {
            let mut next = Vec::new();
            for c in &combos {
                for v in &f.values {
                    let mut e = c.clone();
                    e.push((f.key.clone(), v.clone()));
                    next.push(e);
                }
            }
            combos = next;
        }
        if self.sweep.is_some() {
            for c in &mut combos {
                c.rotate_right(1);
            }
        }
        combos
            .into_iter()
            .map(|labels| {
                let mut cfg = self.base_scenario.clone();
                for (k, v) in &labels {
                    cfg.set(k, v)?;
                }
                let q = cfg.n_targets();
                if q > 1 && cfg.sinr_floors_db.len() == 1 {
                    cfg.sinr_floors_db = vec![cfg.sinr_floors_db[0]; q];
                }
                if q > 1 && cfg.target_powers.len() == 1 {
                    cfg.target_powers = vec![cfg.target_powers[0]; q];
                }
                cfg.validate()?;
                Ok((labels, cfg))
            })
            .collect()
    }
}

pub fn load_campaign(path: impl AsRef<Path>) -> Result<Campaign> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    Campaign::parse(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Everything kept from one solved trial.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub report: MetricReport,
    pub objective: f64,
    pub similarity_sq: f64,
    pub chirp_sum_rate: f64,
    pub max_residual: f64,
    /// Padded to `outer_iters` with the final value after an early exit.
    pub objective_trace: Vec<f64>,
    pub sinr_trace_db: Vec<Vec<f64>>,
    pub mui_trace: Vec<f64>,
    /// `H X`, kept for constellation campaigns.
    pub received: Option<CMatrix>,
    /// Gain in dB on the campaign grid, kept for beampattern campaigns.
    pub pattern_db: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct PointResult {
    pub labels: Vec<(String, String)>,
    pub cfg: ScenarioConfig,
    /// `Err` holds the message of a trial whose solve failed.
    pub trials: Vec<std::result::Result<TrialRecord, String>>,
    /// Beampattern of the chirp itself, for reference.
    pub chirp_pattern_db: Option<Vec<f64>>,
}

impl PointResult {
    pub fn ok(&self) -> impl Iterator<Item = &TrialRecord> {
        self.trials.iter().filter_map(|t| t.as_ref().ok())
    }

    pub fn failures(&self) -> usize {
        self.trials
            .iter()
            .filter(|t| match t {
                Err(_) => true,
                Ok(r) => r.status == SolveStatus::InnerFailure,
            })
            .count()
    }

    pub fn converged(&self) -> usize {
        self.ok()
            .filter(|r| r.status == SolveStatus::Converged)
            .count()
    }

    pub fn label(&self, key: &str) -> Option<&str> {
        self.labels
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn mean(&self, f: impl Fn(&TrialRecord) -> f64) -> f64 {
        let v: Vec<f64> = self.ok().map(f).collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    }

    /// Mean over trials of the target-`q` SINR trace, dB.
    pub fn mean_sinr_trace_db(&self, q: usize) -> Vec<f64> {
        let k = self.cfg.outer_iters;
        (0..k)
            .map(|i| self.mean(|r| r.sinr_trace_db[i][q]))
            .collect()
    }

    pub fn mean_mui_trace(&self) -> Vec<f64> {
        (0..self.cfg.outer_iters)
            .map(|i| self.mean(|r| r.mui_trace[i]))
            .collect()
    }

    /// `10 log10` of the trial-averaged linear beampattern.
    pub fn mean_pattern_db(&self) -> Option<Vec<f64>> {
        let pats: Vec<&Vec<f64>> = self.ok().filter_map(|r| r.pattern_db.as_ref()).collect();
        let first = pats.first()?;
        Some(
            (0..first.len())
                .map(|i| {
                    let m = pats.iter().map(|p| 10f64.powf(p[i] / 10.0)).sum::<f64>()
                        / pats.len() as f64;
                    10.0 * m.log10()
                })
                .collect(),
        )
    }

    pub fn papr_samples_db(&self) -> Vec<f64> {
        self.ok().map(|r| r.report.papr_db).collect()
    }
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub points: Vec<PointResult>,
}

impl CampaignResult {
    pub fn failures(&self) -> usize {
        self.points.iter().map(PointResult::failures).sum()
    }

    pub fn trials(&self) -> usize {
        self.points.iter().map(|p| p.trials.len()).sum()
    }

    pub fn converged(&self) -> usize {
        self.points.iter().map(PointResult::converged).sum()
    }
}

fn pad<T: Clone>(mut v: Vec<T>, len: usize) -> Vec<T> {
    if let Some(last) = v.last().cloned() {
        while v.len() < len {
            v.push(last.clone());
        }
    }
    v
}

fn solve_trial(
    c: &Campaign,
    scene: &Scene,
    trial: usize,
) -> std::result::Result<TrialRecord, String> {
    let cfg = &scene.cfg;
    let seed = c.base_seed.wrapping_add(trial as u64);
    let comm = CommBlock::draw(cfg, seed).map_err(|e| e.to_string())?;
    let x0 = lfm_chirp(cfg);
    let res = drip_solve_scene(scene, &comm, &x0).map_err(|e| e.to_string())?;
    let report = MetricReport::evaluate(
        res.waveform.matrix_form(),
        x0.vector_form().as_slice(),
        &comm,
        &res.beamformers,
        scene,
    )
    .map_err(|e| e.to_string())?;
    let k = cfg.outer_iters;
    let x = res.waveform.vector_form().as_slice();
    let pattern_db = if c.name == CampaignKind::Beampattern {
        Some(
            beampattern(x, scene, &c.grid_deg)
                .map_err(|e| e.to_string())?
                .into_iter()
                .map(|(_, g)| g)
                .collect(),
        )
    } else {
        None
    };
    Ok(TrialRecord {
        trial,
        seed,
        status: res.status,
        iterations: res.iterations(),
        objective: *res.objective_trace.last().unwrap_or(&f64::NAN),
        similarity_sq: report.similarity * report.similarity,
        chirp_sum_rate: sum_rate(
            &comm.channel,
            x0.matrix_form(),
            &comm.symbols,
            comm.symbol_scale,
            cfg.comm_noise_power,
        ),
        max_residual: res.max_residual(),
        objective_trace: pad(res.objective_trace.clone(), k),
        sinr_trace_db: pad(res.sinr_trace.clone(), k),
        mui_trace: pad(res.mui_trace.clone(), k),
        received: (c.name == CampaignKind::ConstellationScatter)
            .then(|| &comm.channel * res.waveform.matrix_form()),
        pattern_db,
        report,
    })
}

/// Solve every `(point, trial)` pair on a pool of `threads` workers.
/// Results are ordered by point then trial regardless of completion order.
pub fn execute(c: &Campaign, threads: usize) -> Result<CampaignResult> {
    let points = c.points()?;
    let scenes: Vec<Scene> = points.iter().map(|(_, cfg)| Scene::new(cfg)).collect();
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..c.trials).map(move |t| (p, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| DripError::Campaign(e.to_string()))?;
    let outcomes: Vec<_> = pool.install(|| {
        jobs.par_iter()
            .map(|&(p, t)| solve_trial(c, &scenes[p], t))
            .collect()
    });
    let mut it = outcomes.into_iter();
    let results = points
        .into_iter()
        .zip(&scenes)
        .map(|((labels, cfg), scene)| {
            let chirp_pattern_db = (c.name == CampaignKind::Beampattern)
                .then(|| {
                    let x0 = lfm_chirp(&cfg);
                    beampattern(x0.vector_form().as_slice(), scene, &c.grid_deg)
                        .map(|v| v.into_iter().map(|(_, g)| g).collect())
                })
                .transpose()?;
            Ok(PointResult {
                trials: it.by_ref().take(c.trials).collect(),
                labels,
                cfg,
                chirp_pattern_db,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CampaignResult { points: results })
}

/// Accumulates a CSV file: `#` comment header, then a header row and data.
struct CsvFile {
    text: String,
}

impl CsvFile {
    fn new(c: &Campaign, title: &str, columns: &[(&str, &str)]) -> Self {
        let mut text = String::new();
        let _ = writeln!(text, "# {title}");
        let _ = writeln!(text, "# campaign = {}", c.name.name());
        let _ = writeln!(text, "# trials_per_point = {}", c.trials);
        let _ = writeln!(
            text,
            "# base_seed = {} (trial t uses base_seed + t at every sweep point)",
            c.base_seed
        );
        if let Some(s) = &c.sweep {
            let _ = writeln!(text, "# sweep = {}: {}", s.key, s.values.join("; "));
        }
        for v in &c.vary {
            let _ = writeln!(text, "# vary.{} = {}", v.key, v.values.join("; "));
        }
        let _ = writeln!(text, "# columns:");
        for (name, doc) in columns {
            let _ = writeln!(text, "#   {name}: {doc}");
        }
        let _ = writeln!(text, "# base scenario:");
        for line in c.base_scenario.to_config_string().lines() {
            let _ = writeln!(text, "#   {line}");
        }
        let names: Vec<&str> = columns.iter().map(|(n, _)| *n).collect();
        let _ = writeln!(text, "{}", names.join(","));
        CsvFile { text }
    }

    fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.text, "{}", fields.join(","));
    }

    fn save(self, path: &Path) -> std::io::Result<()> {
        let mut f = BufWriter::new(fs::File::create(path)?);
        f.write_all(self.text.as_bytes())?;
        f.flush()
    }
}

fn point_columns(c: &Campaign) -> Vec<String> {
    let mut keys = Vec::new();
    if let Some(s) = &c.sweep {
        keys.push(s.key.clone());
    }
    keys.extend(c.vary.iter().map(|v| v.key.clone()));
    keys
}

fn point_fields(c: &Campaign, index: usize, p: &PointResult) -> Vec<String> {
    let mut f = vec![index.to_string()];
    for k in point_columns(c) {
        let v = p.label(&k).unwrap_or("");
        f.push(if v.contains(',') {
            format!("\"{v}\"")
        } else {
            v.to_string()
        });
    }
    f
}

fn g(v: f64) -> String {
    format!("{v:e}")
}

/// Columns common to every per-point file: the point index and the value of
/// each swept key.
fn with_point_columns<'a>(
    rest: &[(&'a str, &'a str)],
    keys: &'a [String],
) -> Vec<(&'a str, &'a str)> {
    let mut cols: Vec<(&str, &str)> = vec![("point", "sweep point index")];
    for k in keys {
        cols.push((k.as_str(), "value of this swept scenario key"));
    }
    cols.extend_from_slice(rest);
    cols
}

/// Write every output file of the campaign into `dir`; returns their paths.
pub fn write_outputs(c: &Campaign, res: &CampaignResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let keys = point_columns(c);
    let n_targets = res.points.first().map_or(0, |p| p.cfg.n_targets());
    let sinr_names: Vec<String> = (0..n_targets).map(|q| format!("sinr_db_{q}")).collect();
    let mut files = Vec::new();

    // trials.csv: one row per trial
    let mut cols = with_point_columns(
        &[
            ("trial", "trial index t"),
            ("seed", "seed of the channel and symbol draw"),
            (
                "status",
                "converged | iteration_budget | inner_failure | monitor_violation | error",
            ),
            ("iterations", "outer iterations run"),
            ("objective", "|x - x_comm|^2 at the returned waveform"),
            ("mui", "|H X - s S|_F^2 with the unit-power symbol scale s"),
            (
                "sum_rate",
                "sum over users of log2(1 + E_s / (E_mui + sigma_c^2)), bps/Hz",
            ),
            ("chirp_sum_rate", "sum rate of the chirp itself"),
            ("papr_db", "peak over mean sample power, dB"),
            ("similarity", "|x - x0|"),
            ("similarity_sq", "|x - x0|^2"),
            (
                "max_residual",
                "largest constraint residual (<= 0 is feasible)",
            ),
        ],
        &keys,
    );
    for s in &sinr_names {
        cols.push((
            s.as_str(),
            "radar SINR of target q with its MVDR beamformer, dB",
        ));
    }
    let mut f = CsvFile::new(c, "per-trial results", &cols);
    for (i, p) in res.points.iter().enumerate() {
        for (t, tr) in p.trials.iter().enumerate() {
            let mut row = point_fields(c, i, p);
            match tr {
                Ok(r) => {
                    row.extend([
                        r.trial.to_string(),
                        r.seed.to_string(),
                        r.status.name().to_string(),
                        r.iterations.to_string(),
                        g(r.objective),
                        g(r.report.mui_energy),
                        g(r.report.sum_rate_bps_hz),
                        g(r.chirp_sum_rate),
                        g(r.report.papr_db),
                        g(r.report.similarity),
                        g(r.similarity_sq),
                        g(r.max_residual),
                    ]);
                    row.extend(r.report.sinr_per_target_db.iter().map(|v| g(*v)));
                }
                Err(_) => {
                    row.extend([
                        t.to_string(),
                        c.base_seed.wrapping_add(t as u64).to_string(),
                        "error".into(),
                    ]);
                    row.extend((0..9 + n_targets).map(|_| String::new()));
                }
            }
            f.row(&row);
        }
    }
    let path = dir.join("trials.csv");
    f.save(&path)?;
    files.push(path);

    // summary.csv: one row per sweep point
    let mut cols = with_point_columns(
        &[
            ("trials", "trials run"),
            ("failed", "trials whose solve errored or failed numerically"),
            ("converged", "trials returned with status converged"),
            (
                "mean_objective",
                "mean |x - x_comm|^2 over trials that returned a waveform",
            ),
            ("mean_mui", "mean MUI energy"),
            ("mean_sum_rate", "mean sum rate, bps/Hz"),
            ("mean_chirp_sum_rate", "mean sum rate of the chirp"),
            ("mean_papr_db", "mean PAPR, dB"),
            ("mean_similarity", "mean |x - x0|"),
            ("mean_similarity_sq", "mean |x - x0|^2"),
        ],
        &keys,
    );
    let mean_sinr: Vec<String> = (0..n_targets)
        .map(|q| format!("mean_sinr_db_{q}"))
        .collect();
    for s in &mean_sinr {
        cols.push((s.as_str(), "mean radar SINR of target q, dB"));
    }
    let mut f = CsvFile::new(c, "per-point averages", &cols);
    for (i, p) in res.points.iter().enumerate() {
        let mut row = point_fields(c, i, p);
        row.extend([
            p.trials.len().to_string(),
            p.failures().to_string(),
            p.converged().to_string(),
            g(p.mean(|r| r.objective)),
            g(p.mean(|r| r.report.mui_energy)),
            g(p.mean(|r| r.report.sum_rate_bps_hz)),
            g(p.mean(|r| r.chirp_sum_rate)),
            g(p.mean(|r| r.report.papr_db)),
            g(p.mean(|r| r.report.similarity)),
            g(p.mean(|r| r.similarity_sq)),
        ]);
        row.extend((0..n_targets).map(|q| g(p.mean(|r| r.report.sinr_per_target_db[q]))));
        f.row(&row);
    }
    let path = dir.join("summary.csv");
    f.save(&path)?;
    files.push(path);

    match c.name {
        CampaignKind::SinrVsIter | CampaignKind::MuiVsIter => {
            let cols = with_point_columns(
                &[
                    (
                        "iteration",
                        "outer iteration k (traces held at their final value after an early exit)",
                    ),
                    ("target", "target index q"),
                    ("mean_sinr_db", "mean over trials of the SINR in dB"),
                    ("mean_objective", "mean |x^(k) - x_comm|^2"),
                    ("mean_mui", "mean MUI energy"),
                ],
                &keys,
            );
            let mut f = CsvFile::new(c, "per-iteration traces", &cols);
            for (i, p) in res.points.iter().enumerate() {
                for q in 0..p.cfg.n_targets() {
                    let sinr = p.mean_sinr_trace_db(q);
                    let mui = p.mean_mui_trace();
                    for k in 0..p.cfg.outer_iters {
                        let mut row = point_fields(c, i, p);
                        row.extend([
                            (k + 1).to_string(),
                            q.to_string(),
                            g(sinr[k]),
                            g(p.mean(|r| r.objective_trace[k])),
                            g(mui[k]),
                        ]);
                        f.row(&row);
                    }
                }
            }
            let path = dir.join(format!("{}.csv", c.name.name()));
            f.save(&path)?;
            files.push(path);
        }
        CampaignKind::ConstellationScatter => {
            let cols = with_point_columns(
                &[
                    ("trial", "trial index"),
                    ("user", "user p"),
                    ("sample", "sample l"),
                    ("re", "in-phase component of [H X]_{p,l}"),
                    ("im", "quadrature component of [H X]_{p,l}"),
                ],
                &keys,
            );
            let mut f = CsvFile::new(c, "received constellation points", &cols);
            for (i, p) in res.points.iter().enumerate() {
                for r in p.ok() {
                    let Some(hx) = &r.received else { continue };
                    for u in 0..hx.nrows() {
                        for l in 0..hx.ncols() {
                            let mut row = point_fields(c, i, p);
                            let z = hx[(u, l)];
                            row.extend([
                                r.trial.to_string(),
                                u.to_string(),
                                l.to_string(),
                                g(z.re),
                                g(z.im),
                            ]);
                            f.row(&row);
                        }
                    }
                }
            }
            let path = dir.join("constellation.csv");
            f.save(&path)?;
            files.push(path);
        }
        CampaignKind::Beampattern => {
            let cols = with_point_columns(
                &[
                    ("angle_deg", "scan angle, degrees"),
                    ("gain_db", "MVDR SINR of a unit-power probe target, trial-averaged in linear scale, dB"),
                    ("chirp_gain_db", "same quantity for the chirp"),
                ],
                &keys,
            );
            let mut f = CsvFile::new(c, "beampattern", &cols);
            for (i, p) in res.points.iter().enumerate() {
                let (Some(mean), Some(chirp)) = (p.mean_pattern_db(), p.chirp_pattern_db.as_ref())
                else {
                    continue;
                };
                for (j, a) in c.grid_deg.iter().enumerate() {
                    let mut row = point_fields(c, i, p);
                    row.extend([format!("{a}"), g(mean[j]), g(chirp[j])]);
                    f.row(&row);
                }
            }
            let path = dir.join("beampattern.csv");
            f.save(&path)?;
            files.push(path);
        }
        CampaignKind::PaprCcdf => {
            let cols = with_point_columns(
                &[
                    ("threshold_db", "PAPR threshold, dB"),
                    ("prob", "fraction of trials with PAPR above the threshold"),
                ],
                &keys,
            );
            let mut f = CsvFile::new(c, "PAPR CCDF", &cols);
            for (i, p) in res.points.iter().enumerate() {
                for (t, pr) in papr_ccdf(&p.papr_samples_db(), &c.thresholds_db) {
                    let mut row = point_fields(c, i, p);
                    row.extend([format!("{t}"), format!("{pr}")]);
                    f.row(&row);
                }
            }
            let path = dir.join("ccdf.csv");
            f.save(&path)?;
            files.push(path);
        }
        CampaignKind::MuiVsEpsilonBox | CampaignKind::MuiVsEta => {
            let cols = with_point_columns(
                &[
                    ("count", "trials that returned a waveform"),
                    ("mean", "mean MUI energy"),
                    ("min", "minimum"),
                    ("q1", "first quartile"),
                    ("median", "median"),
                    ("q3", "third quartile"),
                    ("max", "maximum"),
                    ("whisker_low", "smallest sample >= q1 - 1.5 IQR"),
                    ("whisker_high", "largest sample <= q3 + 1.5 IQR"),
                ],
                &keys,
            );
            let mut f = CsvFile::new(c, "MUI energy distribution", &cols);
            for (i, p) in res.points.iter().enumerate() {
                let samples: Vec<f64> = p.ok().map(|r| r.report.mui_energy).collect();
                let Some(b) = BoxStats::from_samples(&samples) else {
                    continue;
                };
                let mut row = point_fields(c, i, p);
                row.extend([
                    b.count.to_string(),
                    g(b.mean),
                    g(b.min),
                    g(b.q1),
                    g(b.median),
                    g(b.q3),
                    g(b.max),
                    g(b.whisker_low),
                    g(b.whisker_high),
                ]);
                f.row(&row);
            }
            let path = dir.join("mui_box.csv");
            f.save(&path)?;
            files.push(path);
        }
        CampaignKind::SimilarityRegions => {
            let cols = with_point_columns(
                &[
                    ("epsilon_sq", "squared similarity radius"),
                    ("mean_similarity", "mean |x - x0|"),
                    ("mean_similarity_sq", "mean |x - x0|^2"),
                    ("max_similarity", "largest |x - x0| over trials"),
                    ("region", "S when the mean similarity sits on the ball boundary (within 1e-3), C otherwise"),
                ],
                &keys,
            );
            let mut f = CsvFile::new(c, "similarity regions", &cols);
            for (i, p) in res.points.iter().enumerate() {
                let eps = p.cfg.epsilon;
                let sim = p.mean(|r| r.report.similarity);
                let max = p.ok().map(|r| r.report.similarity).fold(0.0, f64::max);
                let mut row = point_fields(c, i, p);
                row.extend([
                    g(eps * eps),
                    g(sim),
                    g(p.mean(|r| r.similarity_sq)),
                    g(max),
                    if eps - sim <= 1e-3 {
                        "S".into()
                    } else {
                        "C".into()
                    },
                ]);
                f.row(&row);
            }
            let path = dir.join("regions.csv");
            f.save(&path)?;
            files.push(path);

            let vary_keys: Vec<String> = c.vary.iter().map(|v| v.key.clone()).collect();
            let mut cols: Vec<(&str, &str)> = vary_keys
                .iter()
                .map(|k| (k.as_str(), "value of this varied scenario key"))
                .collect();
            cols.push(("breakpoint_epsilon", "radius where the mean similarity first leaves the line similarity = epsilon (gap 1e-3, linear interpolation); empty if it never does"));
            cols.push(("breakpoint_epsilon_sq", "its square"));
            let mut f = CsvFile::new(c, "similarity breakpoints", &cols);
            for group in similarity_breakpoints(res) {
                let mut row: Vec<String> = group.labels.iter().map(|(_, v)| v.clone()).collect();
                match group.epsilon {
                    Some(e) => row.extend([g(e), g(e * e)]),
                    None => row.extend([String::new(), String::new()]),
                }
                f.row(&row);
            }
            let path = dir.join("breakpoints.csv");
            f.save(&path)?;
            files.push(path);
        }
        CampaignKind::RateVsEpsilon | CampaignKind::SinrVsEpsilon => {}
    }
    Ok(files)
}

/// S/C breakpoint of one group of points sharing every non-`epsilon` label.
#[derive(Debug, Clone, PartialEq)]
pub struct Breakpoint {
    pub labels: Vec<(String, String)>,
    pub epsilon: Option<f64>,
}

/// Where the mean similarity first falls more than `1e-3` below `epsilon`,
/// interpolating the gap linearly between neighbouring sweep values.
pub fn similarity_breakpoints(res: &CampaignResult) -> Vec<Breakpoint> {
    let mut groups: Vec<(Vec<(String, String)>, Vec<(f64, f64)>)> = Vec::new();
    for p in &res.points {
        let labels: Vec<(String, String)> = p
            .labels
            .iter()
            .filter(|(k, _)| k != "epsilon")
            .cloned()
            .collect();
        let eps = p.cfg.epsilon;
        let gap = eps - p.mean(|r| r.report.similarity);
        match groups.iter_mut().find(|(l, _)| *l == labels) {
            Some((_, v)) => v.push((eps, gap)),
            None => groups.push((labels, vec![(eps, gap)])),
        }
    }
    groups
        .into_iter()
        .map(|(labels, mut pts)| {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let tol = 1e-3;
            let mut epsilon = None;
            for (i, &(e, gap)) in pts.iter().enumerate() {
                if gap > tol {
                    epsilon = Some(if i == 0 {
                        e
                    } else {
                        let (e0, g0) = pts[i - 1];
                        e0 + (e - e0) * (tol - g0) / (gap - g0)
                    });
                    break;
                }
            }
            Breakpoint { labels, epsilon }
        })
        .collect()
}

/// Write `user,sample,re,im` rows of the entries of `H X`, one per
/// (user, sample) pair.
pub fn emit_constellation(result: &SolveResult, h: &CMatrix, out: &Path) -> Result<()> {
    let hx = h * result.waveform.matrix_form();
    let mut f = BufWriter::new(fs::File::create(out)?);
    writeln!(f, "user,sample,re,im")?;
    for u in 0..hx.nrows() {
        for l in 0..hx.ncols() {
            let z = hx[(u, l)];
            writeln!(f, "{u},{l},{:e},{:e}", z.re, z.im)?;
        }
    }
    f.flush()?;
    Ok(())
}

/// Outcome of [`run_campaign`].
#[derive(Debug, Clone)]
pub struct RunReport {
    pub trials: usize,
    pub converged: usize,
    pub failures: usize,
    pub files: Vec<PathBuf>,
}

pub fn run_campaign(c: &Campaign, threads: usize) -> Result<RunReport> {
    let res = execute(c, threads)?;
    let files = write_outputs(c, &res, &c.out_dir)?;
    Ok(RunReport {
        trials: res.trials(),
        converged: res.converged(),
        failures: res.failures(),
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Campaign> {
        Campaign::parse(text, Path::new("."))
    }

    #[test]
    fn parses_sweep_and_overrides() {
        let c = parse(
            "campaign = rate_vs_epsilon\ntrials = 3\nseed = 40\nsweep = epsilon: 0, 0.5\nvary.eta_db = 1, 6\nset.n_tx = 4\nset.n_users = 2\n",
        )
        .unwrap();
        assert_eq!(c.name, CampaignKind::RateVsEpsilon);
        assert_eq!(c.trials, 3);
        assert_eq!(c.base_seed, 40);
        assert_eq!(c.base_scenario.n_tx, 4);
        let pts = c.points().unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(
            pts[0].0,
            vec![
                ("epsilon".to_string(), "0".to_string()),
                ("eta_db".into(), "1".into())
            ]
        );
        assert_eq!(pts[1].1.epsilon, 0.5);
        assert_eq!(pts[1].1.eta_db, 1.0);
        assert_eq!(pts[2].1.eta_db, 6.0);
    }

    #[test]
    fn list_valued_sweep_and_broadcast() {
        let c = parse("campaign = beampattern\nsweep = target_angles: -40, 20; 10, 30\nvary.sinr_floors_db = 25\n").unwrap();
        let pts = c.points().unwrap();
        assert_eq!(pts[0].1.target_angles, vec![-40.0, 20.0]);
        assert_eq!(pts[1].1.target_angles, vec![10.0, 30.0]);
        assert_eq!(pts[0].1.sinr_floors_db, vec![25.0, 25.0]);
    }

    #[test]
    fn grids() {
        assert_eq!(
            parse_grid("g", "0:0.5:2").unwrap(),
            vec![0.0, 0.5, 1.0, 1.5, 2.0]
        );
        assert_eq!(parse_grid("g", "1, 2").unwrap(), vec![1.0, 2.0]);
        assert!(parse_grid("g", "0:-1:2").is_err());
        let c = parse("campaign = beampattern\n").unwrap();
        assert_eq!(c.grid_deg.len(), 361);
    }

    #[test]
    fn rejects_bad_campaigns() {
        assert!(matches!(parse("trials = 3\n"), Err(DripError::Campaign(_))));
        assert!(matches!(
            parse("campaign = nope\n"),
            Err(DripError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse("campaign = papr_ccdf\nsweep = bogus: 1\n"),
            Err(DripError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse("campaign = papr_ccdf\ntrials = 0\n"),
            Err(DripError::Parse { line: 2, .. })
        ));
        assert!(parse("campaign = papr_ccdf\nsweep = n_users: 40\n").is_err());
        assert!(parse("campaign = similarity_regions\nsweep = eta_db: 1\n").is_err());
        assert!(parse("campaign = papr_ccdf\nfoo = 1\n").is_err());
    }

    #[test]
    fn pad_holds_last() {
        assert_eq!(pad(vec![1, 2], 4), vec![1, 2, 2, 2]);
        assert_eq!(pad(Vec::<i32>::new(), 2), Vec::<i32>::new());
    }
}
