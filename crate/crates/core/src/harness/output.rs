//! CSV and manifest emission with atomic writes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{AggregateSeries, Aggregation, ExperimentConfig, PointResult, RunConfig, SweepPoint};
use crate::error::{Error, Result};
use crate::game::{Game, GameSpec};
use crate::record::{Index, Metric};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEntry {
    pub index: usize,
    /// Hex form of the sweep point's seed key.
    pub key: String,
    pub params: SweepPoint,
    pub files: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    /// Union of all points' warnings, in first-seen order.
    pub warnings: Vec<String>,
    pub tool_version: String,
    /// SHA-256 of the canonical JSON form of the resolved game.
    pub game_hash: String,
    pub points: Vec<PointEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn game_spec(game: &Game) -> GameSpec {
    match game {
        Game::Matrix(g) => g.to_spec(),
        Game::Stochastic(g) => g.to_spec(),
    }
}

pub fn game_hash(game: &Game) -> Result<String> {
    let bytes = serde_json::to_vec(&game_spec(game))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// CSV file names of point `index`, one per aggregation statistic.
pub fn point_files(index: usize, mode: Aggregation) -> Vec<(String, Center)> {
    let mean = (format!("point_{index:04}.csv"), Center::Mean);
    let median = (format!("point_{index:04}_median.csv"), Center::Median);
    match mode {
        Aggregation::Mean => vec![mean],
        Aggregation::Median => vec![median],
        Aggregation::Both => vec![mean, median],
    }
}

/// Statistic reported in the `_mean` / `_median` columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Center {
    Mean,
    Median,
}

impl Center {
    fn suffix(self) -> &'static str {
        match self {
            Center::Mean => "mean",
            Center::Median => "median",
        }
    }

    fn pick(self, s: &AggregateSeries, p: usize) -> f64 {
        match self {
            Center::Mean => s.mean[p],
            Center::Median => s.median[p],
        }
    }
}

/// Shortest decimal string that parses back to the same `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:?}")
}

fn series(aggs: &[AggregateSeries], metric: Metric) -> Result<&AggregateSeries> {
    aggs.iter()
        .find(|s| s.metric == metric)
        .ok_or_else(|| Error::GridMismatch(format!("metric {metric} was not recorded")))
}

/// One CSV document for a point. Matrix runs emit
/// `k,ng_*,ng_std,ngtau_*,ngtau_std,min_pi,q_inf`; stochastic runs emit
/// `t,k,ng_*,ng_std,lsum,min_pi,q_inf,v_inf[,v_err]`. `min_pi` is the minimum
/// and `q_inf`, `v_inf` the maximum over trajectories; `lsum` and `v_err` use
/// the centre statistic.
pub fn render_csv(aggs: &[AggregateSeries], stochastic: bool, center: Center) -> Result<String> {
    let ng = series(aggs, Metric::Ng)?;
    let c = center.suffix();
    let min_pi = series(aggs, Metric::MinPi)?;
    let q_inf = series(aggs, Metric::QInf)?;
    let mut columns: Vec<(&AggregateSeries, fn(&AggregateSeries, usize, Center) -> f64)> =
        vec![(ng, |s, p, c| c.pick(s, p)), (ng, |s, p, _| s.std[p])];
    let mut header = if stochastic {
        "t,k".to_string()
    } else {
        "k".to_string()
    };
    write!(header, ",ng_{c},ng_std").unwrap();
    if stochastic {
        columns.push((series(aggs, Metric::LSum)?, |s, p, c| c.pick(s, p)));
        columns.push((min_pi, |s, p, _| s.min[p]));
        columns.push((q_inf, |s, p, _| s.max[p]));
        columns.push((series(aggs, Metric::VInf)?, |s, p, _| s.max[p]));
        header.push_str(",lsum,min_pi,q_inf,v_inf");
        if let Ok(v_err) = series(aggs, Metric::VErr) {
            columns.push((v_err, |s, p, c| c.pick(s, p)));
            header.push_str(",v_err");
        }
    } else {
        let ngtau = series(aggs, Metric::NgTau)?;
        columns.push((ngtau, |s, p, c| c.pick(s, p)));
        columns.push((ngtau, |s, p, _| s.std[p]));
        columns.push((min_pi, |s, p, _| s.min[p]));
        columns.push((q_inf, |s, p, _| s.max[p]));
        write!(header, ",ngtau_{c},ngtau_std,min_pi,q_inf").unwrap();
    }
    for (s, _) in &columns {
        if s.index != ng.index {
            return Err(Error::GridMismatch(format!(
                "{} and ng are recorded on different grids",
                s.metric
            )));
        }
    }
    let mut out = header;
    out.push('\n');
    for (p, &Index { t, k }) in ng.index.iter().enumerate() {
        if stochastic {
            write!(out, "{t},{k}").unwrap();
        } else {
            write!(out, "{k}").unwrap();
        }
        for (s, f) in &columns {
            out.push(',');
            out.push_str(&format_float(f(s, p, center)));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Writes `contents` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("{}: not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, contents).map_err(|e| Error::Io(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn targets(config: &ExperimentConfig, out_dir: &Path) -> Vec<PathBuf> {
    let mut paths = vec![out_dir.join(MANIFEST_NAME)];
    for i in 0..config.sweep_points().len() {
        paths.extend(
            point_files(i, config.aggregation)
                .into_iter()
                .map(|(f, _)| out_dir.join(f)),
        );
    }
    paths
}

/// Fails with `OutputExists` if any file the experiment would write is present.
pub fn check_clobber(config: &ExperimentConfig, out_dir: &Path, force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    match targets(config, out_dir).into_iter().find(|p| p.exists()) {
        Some(p) => Err(Error::OutputExists(p.display().to_string())),
        None => Ok(()),
    }
}

/// Writes one CSV per point and statistic, then the manifest.
pub fn write_experiment(
    config: &ExperimentConfig,
    game: &Game,
    results: &[PointResult],
    out_dir: &Path,
    force: bool,
) -> Result<Manifest> {
    check_clobber(config, out_dir, force)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;
    let stochastic = matches!(config.run, RunConfig::Stochastic(_));
    let mut points = Vec::with_capacity(results.len());
    let mut warnings: Vec<String> = Vec::new();
    for (i, r) in results.iter().enumerate() {
        let mut files = Vec::new();
        for (name, center) in point_files(i, config.aggregation) {
            let csv = render_csv(&r.aggregates, stochastic, center)?;
            write_atomic(&out_dir.join(&name), csv.as_bytes())?;
            files.push(name);
        }
        for w in &r.warnings {
            if !warnings.contains(w) {
                warnings.push(w.clone());
            }
        }
        points.push(PointEntry {
            index: i,
            key: format!("{:016x}", r.point.key()),
            params: r.point,
            files,
            warnings: r.warnings.clone(),
        });
    }
    let manifest = Manifest {
        config: config.clone(),
        warnings,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        game_hash: game_hash(game)?,
        points,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_atomic(&out_dir.join(MANIFEST_NAME), text.as_bytes())?;
    Ok(manifest)
}
