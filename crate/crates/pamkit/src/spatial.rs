//! Inverse-distance-weighted call-density surface over an array of
//! recorder sites.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::SoundEvent;

#[derive(Debug, Error)]
pub enum SpatialError {
    #[error("no recorder sites given")]
    NoSites,
    #[error("duplicate site name '{name}'")]
    DuplicateSite { name: String },
    #[error("event source '{source_file}' maps to no recorder site")]
    UnknownSource { source_file: String },
    #[error("{path}:{line}: malformed sites CSV: {reason}")]
    MalformedCsv {
        path: PathBuf,
        line: u64,
        reason: String,
    },
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// One recorder location and the number of calls counted there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecorderSite {
    pub name: String,
    pub x_m: f64,
    pub y_m: f64,
    pub call_count: u32,
}

/// Placement of a rectangular interpolation grid. Node `(ix, iy)`
/// sits at `(x0_m + ix * cell_m, y0_m + iy * cell_m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x0_m: f64,
    pub y0_m: f64,
    pub cell_m: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn check(&self) {
        assert!(self.cell_m > 0.0, "cell_m must be positive");
        assert!(self.nx >= 1 && self.ny >= 1, "grid needs at least one cell");
    }

    /// Smallest grid that covers every site, padded by one cell on
    /// each edge.
    pub fn covering(sites: &[RecorderSite], cell_m: f64) -> Result<GridSpec, SpatialError> {
        assert!(cell_m > 0.0, "cell_m must be positive");
        if sites.is_empty() {
            return Err(SpatialError::NoSites);
        }
        let min_x = sites.iter().map(|s| s.x_m).fold(f64::INFINITY, f64::min);
        let max_x = sites.iter().map(|s| s.x_m).fold(f64::NEG_INFINITY, f64::max);
        let min_y = sites.iter().map(|s| s.y_m).fold(f64::INFINITY, f64::min);
        let max_y = sites.iter().map(|s| s.y_m).fold(f64::NEG_INFINITY, f64::max);
        let nx = ((max_x - min_x) / cell_m).ceil() as usize + 3;
        let ny = ((max_y - min_y) / cell_m).ceil() as usize + 3;
        Ok(GridSpec {
            x0_m: min_x - cell_m,
            y0_m: min_y - cell_m,
            cell_m,
            nx,
            ny,
        })
    }
}

/// Interpolated surface: `values[iy][ix]` is the density at grid node
/// `(ix, iy)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub spec: GridSpec,
    pub values: Vec<Vec<f64>>,
}

impl DensityGrid {
    pub fn min_value(&self) -> f64 {
        self.values.iter().flatten().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Inverse-distance-weighted value at one point: a convex combination
/// of the site counts with weights `d^(-power)`, except that a point
/// sitting exactly on a site takes that site's count.
fn idw_at(sites: &[RecorderSite], x: f64, y: f64, power: f64) -> f64 {
    let mut num = 0.0;
    let mut denom = 0.0;
    for s in sites {
        let d_sq = (x - s.x_m) * (x - s.x_m) + (y - s.y_m) * (y - s.y_m);
        if d_sq == 0.0 {
            return f64::from(s.call_count);
        }
        let w = d_sq.powf(-power / 2.0);
        num += w * f64::from(s.call_count);
        denom += w;
    }
    num / denom
}

/// Interpolates site call counts onto the grid. Every produced value
/// is a convex combination of the inputs, so the surface stays inside
/// `[min count, max count]`.
pub fn idw_interpolate(sites: &[RecorderSite], spec: &GridSpec, power: f64) -> Result<DensityGrid, SpatialError> {
    spec.check();
    assert!(power > 0.0, "power must be positive");
    if sites.is_empty() {
        return Err(SpatialError::NoSites);
    }

    let mut values = Vec::with_capacity(spec.ny);
    for iy in 0..spec.ny {
        let y = spec.y0_m + iy as f64 * spec.cell_m;
        let mut row = Vec::with_capacity(spec.nx);
        for ix in 0..spec.nx {
            let x = spec.x0_m + ix as f64 * spec.cell_m;
            row.push(idw_at(sites, x, y, power));
        }
        values.push(row);
    }
    Ok(DensityGrid { spec: *spec, values })
}

/// Tallies events per recorder site. `site_of_source` maps an event's
/// source string to a site name; every listed site appears in the
/// output even with zero events, and events from unmapped sources are
/// an error.
pub fn counts_from_events(
    events: &[SoundEvent],
    sites: &[(String, f64, f64)],
    site_of_source: &BTreeMap<String, String>,
) -> Result<Vec<RecorderSite>, SpatialError> {
    if sites.is_empty() {
        return Err(SpatialError::NoSites);
    }
    let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
    let mut result: Vec<RecorderSite> = Vec::with_capacity(sites.len());
    for (name, x_m, y_m) in sites {
        if counts.insert(name, 0).is_some() {
            return Err(SpatialError::DuplicateSite { name: name.clone() });
        }
        result.push(RecorderSite {
            name: name.clone(),
            x_m: *x_m,
            y_m: *y_m,
            call_count: 0,
        });
    }

    for e in events {
        let site = site_of_source
            .get(&e.source)
            .ok_or_else(|| SpatialError::UnknownSource {
                source_file: e.source.clone(),
            })?;
        let slot = counts.get_mut(site.as_str()).ok_or_else(|| SpatialError::UnknownSource {
            source_file: e.source.clone(),
        })?;
        *slot += 1;
    }

    for site in &mut result {
        site.call_count = counts[site.name.as_str()];
    }
    Ok(result)
}

/// Parses sites CSV with header `name,x_m,y_m`.
pub fn parse_sites_text(text: &str, origin: &Path) -> Result<Vec<(String, f64, f64)>, SpatialError> {
    let malformed = |line: u64, reason: String| SpatialError::MalformedCsv {
        path: origin.to_path_buf(),
        line,
        reason,
    };
    let csv_err = |e: &csv::Error| {
        let line = e.position().map_or(0, |p| p.line());
        malformed(line, e.to_string())
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    {
        let headers = reader.headers().map_err(|e| csv_err(&e))?;
        if headers.iter().ne(["name", "x_m", "y_m"]) {
            return Err(malformed(1, "expected header 'name,x_m,y_m'".into()));
        }
    }

    let mut sites = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(&e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(malformed(line, format!("expected 3 fields, found {}", record.len())));
        }
        if record[0].is_empty() {
            return Err(malformed(line, "empty site name".into()));
        }
        let number = |field: &str, name: &str| -> Result<f64, SpatialError> {
            field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| malformed(line, format!("bad {name} '{field}'")))
        };
        sites.push((
            record[0].to_string(),
            number(&record[1], "x_m")?,
            number(&record[2], "y_m")?,
        ));
    }
    if sites.is_empty() {
        return Err(SpatialError::NoSites);
    }
    let mut seen = std::collections::BTreeSet::new();
    for (name, _, _) in &sites {
        if !seen.insert(name.as_str()) {
            return Err(SpatialError::DuplicateSite { name: name.clone() });
        }
    }
    Ok(sites)
}

/// Reads a sites CSV file.
pub fn read_sites_csv(path: &Path) -> Result<Vec<(String, f64, f64)>, SpatialError> {
    let text = std::fs::read_to_string(path).map_err(|e| SpatialError::IoFailure {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_sites_text(&text, path)
}

/// Writes the grid as `x,y,value` rows, row-major from the origin.
pub fn write_grid_csv(grid: &DensityGrid, out: &mut dyn io::Write) -> io::Result<()> {
    writeln!(out, "x,y,value")?;
    for (iy, row) in grid.values.iter().enumerate() {
        let y = grid.spec.y0_m + iy as f64 * grid.spec.cell_m;
        for (ix, value) in row.iter().enumerate() {
            let x = grid.spec.x0_m + ix as f64 * grid.spec.cell_m;
            writeln!(out, "{x},{y},{value}")?;
        }
    }
    Ok(())
}
