//! Station files, result tables and the run manifest.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::StationSet;
use crate::grid::FaultGrid;
use crate::posterior::{AxisRange, Marginal, ParameterBox, PosteriorGrid, SlipPosterior};

pub const STATION_HEADER: [&str; 8] = [
    "name",
    "x1_km",
    "x2_km",
    "u1_mm",
    "u2_mm",
    "u3_mm",
    "sigma_hor_mm",
    "sigma_ver_mm",
];

/// Whether displacement columns must be filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StationMode {
    Measured,
    /// Synthetic template: blank displacements read as zero.
    Template,
}

pub fn load_stations(path: &Path, mode: StationMode) -> Result<StationSet> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    parse_stations(&s, &path.display().to_string(), mode)
}

pub fn parse_stations(text: &str, label: &str, mode: StationMode) -> Result<StationSet> {
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: label.to_string(),
        line,
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::Data(format!("{label}: empty station file")));
    }
    if header != STATION_HEADER {
        return Err(parse_err(1, format!("expected header {}", STATION_HEADER.join(","))));
    }
    let (mut names, mut pos, mut disp, mut sh, mut sv) = (vec![], vec![], vec![], vec![], vec![]);
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize, optional: bool| -> Result<f64> {
            let f = rec.get(i).unwrap_or("");
            if f.is_empty() && optional {
                return Ok(0.0);
            }
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(line, format!("column {}: cannot parse '{f}'", STATION_HEADER[i])))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column {}: non-finite value", STATION_HEADER[i])));
            }
            Ok(v)
        };
        let name = rec.get(0).unwrap_or("").to_string();
        if name.is_empty() {
            return Err(parse_err(line, "missing station name".into()));
        }
        if names.contains(&name) {
            return Err(parse_err(line, format!("duplicate station name '{name}'")));
        }
        let opt = mode == StationMode::Template;
        pos.push([field(1, false)?, field(2, false)?]);
        disp.push([field(3, opt)?, field(4, opt)?, field(5, opt)?]);
        let (h, v) = (field(6, false)?, field(7, false)?);
        if !(h > 0.0 && v > 0.0) {
            return Err(parse_err(line, "noise levels must be positive".into()));
        }
        sh.push(h);
        sv.push(v);
        names.push(name);
    }
    if names.is_empty() {
        return Err(Error::Data(format!("{label}: no stations")));
    }
    StationSet::new(names, pos, disp, sh, sv)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn num(v: f64) -> String {
    format!("{v}")
}

pub fn stations_csv(stations: &StationSet) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write_station_rows(&mut w, stations)?;
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_stations(path: &Path, stations: &StationSet) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_station_rows(&mut w, stations)?;
    w.flush()?;
    Ok(())
}

fn write_station_rows<W: Write>(w: &mut csv::Writer<W>, s: &StationSet) -> Result<()> {
    w.write_record(STATION_HEADER)?;
    for i in 0..s.len() {
        let p = s.positions[i];
        let u = s.displacements[i];
        w.write_record([
            s.names[i].clone(),
            num(p[0]),
            num(p[1]),
            num(u[0]),
            num(u[1]),
            num(u[2]),
            num(s.sigma_hor[i]),
            num(s.sigma_ver[i]),
        ])?;
    }
    Ok(())
}

pub fn write_posterior(path: &Path, pg: &PosteriorGrid) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["a", "b", "d", "density", "log_density"])?;
    for f in 0..pg.bx.n_cells() {
        let m = pg.bx.geometry(f);
        w.write_record([
            num(m.a),
            num(m.b),
            num(m.d),
            num(pg.density[f]),
            num(pg.log_density[f]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a posterior table written by [`write_posterior`]. `C` and `τ` are
/// not stored in the table and come back as NaN.
pub fn read_posterior(path: &Path) -> Result<PosteriorGrid> {
    let label = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{label}: {e}")))?;
    let mut rows: Vec<[f64; 4]> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let mut v = [0.0; 5];
        for (i, slot) in v.iter_mut().enumerate() {
            *slot = rec.get(i).and_then(|f| f.trim().parse().ok()).ok_or_else(|| Error::Parse {
                path: label.clone(),
                line,
                msg: format!("column {} missing or malformed", i + 1),
            })?;
        }
        rows.push([v[0], v[1], v[2], v[4]]);
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{label}: empty posterior table")));
    }
    let axis = |i: usize| -> Result<AxisRange> {
        let mut vals: Vec<f64> = rows.iter().map(|r| r[i]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        AxisRange::new(vals[0], vals[vals.len() - 1], vals.len())
    };
    let bx = ParameterBox::new(axis(0)?, axis(1)?, axis(2)?)?;
    if rows.len() != bx.n_cells() {
        return Err(Error::Data(format!("{label}: table is not a full grid")));
    }
    let logs = rows.iter().map(|r| r[3]).collect();
    PosteriorGrid::from_log(bx, f64::NAN, f64::NAN, logs)
}

pub fn write_marginal(path: &Path, m: &Marginal) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["value", "density"])?;
    for (v, p) in m.values.iter().zip(&m.density) {
        w.write_record([num(*v), num(*p)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_slip(path: &Path, grid: &FaultGrid, slip: &SlipPosterior) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["y1_km", "y2_km", "mean_mm", "std_mm"])?;
    for k in 0..grid.q() {
        let y = grid.node(k);
        w.write_record([num(y[0]), num(y[1]), num(slip.mean[k]), num(slip.std[k])])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_reader(std::io::BufReader::new(f))
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}
