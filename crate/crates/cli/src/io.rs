//! File formats: projection CSV, JSON helpers and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use tomocal_core::fanbeam::FanBeamObservation;
use tomocal_core::parallel::ParallelObservation;
use tomocal_core::{DiracProjection, Geometry, Group};

use crate::error::{CliError, CliResult};

/// Floats are written with 17 significant digits so they parse back to the
/// same double.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {what} {}", path.display()), e))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("malformed {what} {}: {e}", path.display())))
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn write_output(path: Option<&Path>, contents: &str) -> CliResult<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
            }
            fs::write(p, contents).map_err(|e| CliError::io(format!("writing {}", p.display()), e))
        }
        None => std::io::stdout()
            .write_all(contents.as_bytes())
            .map_err(|e| CliError::io("writing stdout", e)),
    }
}

/// One CSV row of detected marker positions.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionRow {
    pub view_index: usize,
    pub group: Group,
    pub marker_index: usize,
    pub position: f64,
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProjectionTable {
    pub rows: Vec<ProjectionRow>,
}

impl ProjectionTable {
    pub fn from_projections(projections: &[DiracProjection]) -> Self {
        let rows = projections
            .iter()
            .flat_map(|p| {
                p.positions.iter().enumerate().map(move |(j, &x)| ProjectionRow {
                    view_index: p.view_index,
                    group: p.group,
                    marker_index: j,
                    position: x,
                    weight: p.weights.as_ref().map(|w| w[j]),
                })
            })
            .collect();
        Self { rows }
    }

    pub fn has_weights(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.weight.is_some())
    }

    pub fn to_csv(&self) -> String {
        let weighted = self.has_weights();
        let mut out = String::from("view_index,group,marker_index,position");
        if weighted {
            out.push_str(",weight");
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}", r.view_index, r.group, r.marker_index, fmt_f64(r.position)));
            if let (true, Some(w)) = (weighted, r.weight) {
                out.push(',');
                out.push_str(&fmt_f64(w));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_csv(text: &str) -> CliResult<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| CliError::input(format!("projection CSV header: {e}")))?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (Some(vi), Some(gi), Some(mi), Some(pi)) =
            (col("view_index"), col("group"), col("marker_index"), col("position"))
        else {
            return Err(CliError::input(
                "projection CSV needs columns view_index,group,marker_index,position[,weight]",
            ));
        };
        let wi = col("weight");
        let mut rows = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let line = line + 2;
            let rec = rec.map_err(|e| CliError::input(format!("projection CSV line {line}: {e}")))?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let bad = |what: &str| CliError::input(format!("projection CSV line {line}: bad {what}"));
            let position: f64 = field(pi).parse().map_err(|_| bad("position"))?;
            if !position.is_finite() {
                return Err(bad("position"));
            }
            let weight = match wi {
                Some(i) if !field(i).is_empty() => Some(field(i).parse::<f64>().map_err(|_| bad("weight"))?),
                _ => None,
            };
            rows.push(ProjectionRow {
                view_index: field(vi).parse().map_err(|_| bad("view_index"))?,
                group: Group::parse(field(gi)).ok_or_else(|| bad("group"))?,
                marker_index: field(mi).parse().map_err(|_| bad("marker_index"))?,
                position,
                weight,
            });
        }
        if rows.is_empty() {
            return Err(CliError::input("projection CSV has no rows"));
        }
        Ok(Self { rows })
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("reading projections {}", path.display()), e))?;
        Self::parse_csv(&text)
    }

    pub fn geometry(&self) -> CliResult<Geometry> {
        let parallel = self.rows.iter().all(|r| matches!(r.group, Group::H | Group::V));
        let fanbeam = self.rows.iter().all(|r| matches!(r.group, Group::A | Group::B));
        match (parallel, fanbeam) {
            (true, false) => Ok(Geometry::Parallel),
            (false, true) => Ok(Geometry::Fanbeam),
            _ => Err(CliError::input("projection CSV mixes parallel (H/V) and fan-beam (A/B) groups")),
        }
    }

    /// Rows grouped per view and group, each sorted by marker index. Views
    /// must be numbered `0..P` without gaps.
    fn by_view(&self) -> CliResult<Vec<BTreeMap<Group, Vec<&ProjectionRow>>>> {
        let count = self.rows.iter().map(|r| r.view_index).max().map_or(0, |m| m + 1);
        let mut views: Vec<BTreeMap<Group, Vec<&ProjectionRow>>> = vec![BTreeMap::new(); count];
        for r in &self.rows {
            views[r.view_index].entry(r.group).or_default().push(r);
        }
        for (i, v) in views.iter_mut().enumerate() {
            if v.is_empty() {
                return Err(CliError::input(format!("view {i} has no rows")));
            }
            for rows in v.values_mut() {
                rows.sort_by_key(|r| r.marker_index);
                if rows.windows(2).any(|w| w[0].marker_index == w[1].marker_index) {
                    return Err(CliError::input(format!("view {i} repeats a marker index")));
                }
            }
        }
        Ok(views)
    }

    fn positions(view: &BTreeMap<Group, Vec<&ProjectionRow>>, g: Group) -> Vec<f64> {
        view.get(&g).map(|rows| rows.iter().map(|r| r.position).collect()).unwrap_or_default()
    }

    fn weights(view: &BTreeMap<Group, Vec<&ProjectionRow>>, g: Group) -> Vec<f64> {
        view.get(&g)
            .map(|rows| rows.iter().filter_map(|r| r.weight).collect())
            .unwrap_or_default()
    }

    pub fn parallel_observations(&self) -> CliResult<Vec<ParallelObservation>> {
        Ok(self
            .by_view()?
            .iter()
            .map(|v| ParallelObservation {
                h: Self::positions(v, Group::H),
                v: Self::positions(v, Group::V),
            })
            .collect())
    }

    pub fn fanbeam_observations(&self) -> CliResult<Vec<FanBeamObservation>> {
        Ok(self
            .by_view()?
            .iter()
            .map(|v| FanBeamObservation {
                a: Self::positions(v, Group::A),
                b: Self::positions(v, Group::B),
            })
            .collect())
    }

    /// Per view: all positions and, for fan-beam tables, matching weights.
    pub fn pooled(&self) -> CliResult<Vec<(Vec<f64>, Vec<f64>)>> {
        Ok(self
            .by_view()?
            .iter()
            .map(|v| {
                let mut pos = Vec::new();
                let mut w = Vec::new();
                for g in v.keys() {
                    pos.extend(Self::positions(v, *g));
                    w.extend(Self::weights(v, *g));
                }
                (pos, w)
            })
            .collect())
    }
}

/// SHA-256 of the JSON value with object keys sorted, so the hash does not
/// depend on key order in the source file.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let value = serde_json::to_value(config).expect("config serializes");
    let canonical = serde_json::to_string(&value).expect("value serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub version: String,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, config_hash: String, seed: Option<u64>, started: chrono::DateTime<chrono::Utc>) -> Self {
        Self {
            command: command.to_string(),
            config_hash,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: started.to_rfc3339(),
            finished_at: chrono::Utc::now().to_rfc3339(),
            outputs: Vec::new(),
        }
    }
}
