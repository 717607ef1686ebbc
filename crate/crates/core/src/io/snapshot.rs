//! Binary snapshots: a plain-text header terminated by `end`, then
//! little-endian `f64` payload.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Label, PhaseSpaceGrid};
use crate::oracles::TrajectoryEnsemble;

pub const GRID_MAGIC: &str = "KHO-GRID 1";
pub const ENSEMBLE_MAGIC: &str = "KHO-ENSEMBLE 1";

/// Free-form `key value` pairs carried in a snapshot header. Keys must not
/// contain whitespace; values must not contain newlines.
pub type Metadata = BTreeMap<String, String>;

fn check_meta(meta: &Metadata) -> Result<()> {
    for (k, v) in meta {
        if k.is_empty() || k.contains(char::is_whitespace) || v.contains('\n') {
            return Err(Error::Format(format!("unrepresentable metadata entry {k:?}")));
        }
    }
    Ok(())
}

fn write_header(w: &mut impl Write, lines: &[(String, String)], meta: &Metadata) -> std::io::Result<()> {
    for (k, v) in lines {
        writeln!(w, "{k} {v}")?;
    }
    for (k, v) in meta {
        writeln!(w, "meta {k} {v}")?;
    }
    writeln!(w, "end")
}

struct Header {
    fields: BTreeMap<String, String>,
    meta: Metadata,
}

impl Header {
    fn get(&self, key: &str) -> Result<&str> {
        self.fields
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Format(format!("header lacks `{key}`")))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .parse()
            .map_err(|_| Error::Format(format!("bad value for `{key}`")))
    }
}

fn read_header(r: &mut impl BufRead, magic: &str) -> Result<Header> {
    let mut line = String::new();
    let mut read_line = |line: &mut String| -> Result<()> {
        line.clear();
        let n = r
            .read_line(line)
            .map_err(|e| Error::Format(format!("reading header: {e}")))?;
        if n == 0 {
            return Err(Error::Format("header ended before `end`".into()));
        }
        Ok(())
    };
    read_line(&mut line)?;
    if line.trim_end() != magic {
        return Err(Error::Format(format!("expected `{magic}`, found {:?}", line.trim_end())));
    }
    let mut fields = BTreeMap::new();
    let mut meta = Metadata::new();
    loop {
        read_line(&mut line)?;
        let text = line.trim_end_matches(['\n', '\r']);
        if text == "end" {
            break;
        }
        let (key, value) = text
            .split_once(' ')
            .ok_or_else(|| Error::Format(format!("malformed header line {text:?}")))?;
        if key == "meta" {
            let (k, v) = value.split_once(' ').unwrap_or((value, ""));
            meta.insert(k.to_string(), v.to_string());
        } else {
            fields.insert(key.to_string(), value.to_string());
        }
    }
    Ok(Header { fields, meta })
}

fn read_f64s(r: &mut impl Read, count: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)
        .map_err(|e| Error::Format(format!("payload shorter than {count} values: {e}")))?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)
        .map_err(|e| Error::Format(format!("reading payload: {e}")))?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes after payload", rest.len())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Writes `grid` with its spec, label and `meta` in the header.
pub fn write_grid(grid: &PhaseSpaceGrid, path: &Path, meta: &Metadata) -> Result<()> {
    check_meta(meta)?;
    let s = grid.spec();
    let lines = vec![
        ("n_q".to_string(), s.n_q.to_string()),
        ("n_p".to_string(), s.n_p.to_string()),
        ("q_min".to_string(), s.q_min.to_string()),
        ("q_max".to_string(), s.q_max.to_string()),
        ("p_min".to_string(), s.p_min.to_string()),
        ("p_max".to_string(), s.p_max.to_string()),
        ("label".to_string(), grid.label().to_string()),
    ];
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(GRID_MAGIC.as_bytes()).map_err(io)?;
    w.write_all(b"\n").map_err(io)?;
    write_header(&mut w, &lines, meta).map_err(io)?;
    for v in grid.values() {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a grid snapshot, returning the grid and its header metadata.
pub fn read_grid(path: &Path) -> Result<(PhaseSpaceGrid, Metadata)> {
    let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let h = read_header(&mut r, GRID_MAGIC)?;
    let spec = GridSpec {
        n_q: h.parse("n_q")?,
        n_p: h.parse("n_p")?,
        q_min: h.parse("q_min")?,
        q_max: h.parse("q_max")?,
        p_min: h.parse("p_min")?,
        p_max: h.parse("p_max")?,
    };
    spec.validate()?;
    let label: Label = h.parse("label")?;
    let values = read_f64s(&mut r, spec.len())?;
    let grid = PhaseSpaceGrid::from_values(spec, values, label)?;
    Ok((grid, h.meta))
}

/// Writes the `(q, p)` columns of an ensemble.
pub fn write_ensemble(ens: &TrajectoryEnsemble, path: &Path, meta: &Metadata) -> Result<()> {
    check_meta(meta)?;
    let lines = vec![
        ("m".to_string(), ens.len().to_string()),
        ("seed".to_string(), ens.seed().to_string()),
        ("steps".to_string(), ens.steps().to_string()),
        ("columns".to_string(), "q p".to_string()),
    ];
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(ENSEMBLE_MAGIC.as_bytes()).map_err(io)?;
    w.write_all(b"\n").map_err(io)?;
    write_header(&mut w, &lines, meta).map_err(io)?;
    for (q, p) in ens.points() {
        w.write_all(&q.to_le_bytes()).map_err(io)?;
        w.write_all(&p.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_ensemble(path: &Path) -> Result<(TrajectoryEnsemble, Metadata)> {
    let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let h = read_header(&mut r, ENSEMBLE_MAGIC)?;
    let m: usize = h.parse("m")?;
    let seed: u64 = h.parse("seed")?;
    let steps: u64 = h.parse("steps")?;
    let flat = read_f64s(&mut r, 2 * m)?;
    let points = flat.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    let ens = TrajectoryEnsemble::from_points(points, seed)?.with_steps(steps);
    Ok((ens, h.meta))
}
