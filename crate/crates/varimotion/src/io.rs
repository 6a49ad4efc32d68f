//! Snapshot, PLY and XYZ files.
//!
//! A snapshot is plain text. The header line is
//!
//! ```text
//! # varimotion v1 dim=2 intrinsic=1 step=40 t=0.02
//! ```
//!
//! followed by one line per point: the `n` coordinates, the mass, the
//! `d * n` frame entries (row by row) and a pin flag `0` or `1`. Floats are
//! written in shortest round-trip form, so reading a snapshot back gives the
//! same bits.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use varimotion_core::{CurvatureField, PointCloudVarifold};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn at(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub varifold: PointCloudVarifold,
    pub step: usize,
    pub time: f64,
}

pub fn snapshot_string(v: &PointCloudVarifold, step: usize, time: f64) -> String {
    let (n, d) = (v.ambient_dim(), v.intrinsic_dim());
    let mut s = format!("# varimotion v1 dim={n} intrinsic={d} step={step} t={time}\n");
    for i in 0..v.len() {
        for x in v.point(i) {
            write!(s, "{x} ").unwrap();
        }
        write!(s, "{}", v.masses[i]).unwrap();
        for t in v.frame(i) {
            write!(s, " {t}").unwrap();
        }
        writeln!(s, " {}", u8::from(v.pinned[i])).unwrap();
    }
    s
}

pub fn write_snapshot(path: &Path, v: &PointCloudVarifold, step: usize, time: f64) -> Result<(), FormatError> {
    std::fs::write(path, snapshot_string(v, step, time))?;
    Ok(())
}

pub fn parse_snapshot(text: &str) -> Result<Snapshot, FormatError> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
    let (_, header) = lines.next().ok_or_else(|| at(1, "empty snapshot"))?;
    let rest = header
        .strip_prefix("# varimotion v1")
        .ok_or_else(|| at(1, "missing `# varimotion v1` header"))?;
    let (mut dim, mut intrinsic, mut step, mut time) = (None, None, None, None);
    for field in rest.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| at(1, format!("header field `{field}` is not key=value")))?;
        let bad = |_| at(1, format!("bad value for `{key}`: `{value}`"));
        match key {
            "dim" => dim = Some(value.parse::<usize>().map_err(bad)?),
            "intrinsic" => intrinsic = Some(value.parse::<usize>().map_err(bad)?),
            "step" => step = Some(value.parse::<usize>().map_err(bad)?),
            "t" => time = Some(value.parse::<f64>().map_err(|_| at(1, format!("bad value for `t`: `{value}`")))?),
            _ => return Err(at(1, format!("unknown header field `{key}`"))),
        }
    }
    let n = dim.ok_or_else(|| at(1, "header lacks dim="))?;
    let d = intrinsic.ok_or_else(|| at(1, "header lacks intrinsic="))?;
    if d == 0 || d >= n {
        return Err(at(1, format!("need 1 <= intrinsic < dim, got intrinsic={d} dim={n}")));
    }
    let width = n + 1 + d * n + 1;
    let (mut pos, mut mass, mut frames, mut pins) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (ln, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != width {
            return Err(at(ln, format!("expected {width} fields, found {}", fields.len())));
        }
        let nums = fields[..width - 1]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| at(ln, format!("not a number: `{f}`"))))
            .collect::<Result<Vec<f64>, _>>()?;
        if let Some(bad) = nums.iter().find(|x| !x.is_finite()) {
            return Err(at(ln, format!("non-finite value {bad}")));
        }
        pos.extend_from_slice(&nums[..n]);
        mass.push(nums[n]);
        frames.extend_from_slice(&nums[n + 1..]);
        pins.push(match fields[width - 1] {
            "0" => false,
            "1" => true,
            f => return Err(at(ln, format!("pin flag must be 0 or 1, found `{f}`"))),
        });
    }
    let mut v = PointCloudVarifold::from_positions(n, d, pos, Some(pins))
        .map_err(|e| FormatError::Invalid(e.to_string()))?;
    v.masses = mass;
    v.tangents = frames;
    Ok(Snapshot {
        varifold: v,
        step: step.unwrap_or(0),
        time: time.unwrap_or(0.0),
    })
}

/// Whitespace-separated coordinates, one point per line. Blank lines and
/// `#` comments are skipped. Every line must have the same column count,
/// which becomes the ambient dimension.
pub fn parse_xyz(text: &str) -> Result<(usize, Vec<f64>), FormatError> {
    let mut dim = None;
    let mut pos = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let ln = k + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|f| !f.is_empty())
            .map(|f| f.parse::<f64>().map_err(|_| at(ln, format!("not a number: `{f}`"))))
            .collect::<Result<Vec<f64>, _>>()?;
        match dim {
            None => dim = Some(row.len()),
            Some(n) if n != row.len() => {
                return Err(at(ln, format!("expected {n} coordinates, found {}", row.len())));
            }
            _ => {}
        }
        if let Some(bad) = row.iter().find(|x| !x.is_finite()) {
            return Err(at(ln, format!("non-finite coordinate {bad}")));
        }
        pos.extend(row);
    }
    let n = dim.ok_or_else(|| FormatError::Invalid("no points in input".into()))?;
    if n < 2 {
        return Err(FormatError::Invalid(format!("points need at least 2 coordinates, found {n}")));
    }
    Ok((n, pos))
}

/// Load a snapshot, or a bare coordinate list as a hypersurface cloud
/// (`d = n - 1`) with nothing pinned.
pub fn load_cloud(path: &Path) -> Result<PointCloudVarifold, FormatError> {
    let text = std::fs::read_to_string(path)?;
    if text.starts_with("# varimotion") {
        return Ok(parse_snapshot(&text)?.varifold);
    }
    let (n, pos) = parse_xyz(&text)?;
    PointCloudVarifold::from_positions(n, n - 1, pos, None).map_err(|e| FormatError::Invalid(e.to_string()))
}

/// ASCII PLY for surfaces in R^3: position, unit normal, mass and the
/// curvature magnitude.
pub fn write_ply<W: Write>(mut w: W, v: &PointCloudVarifold, h: &CurvatureField) -> Result<(), FormatError> {
    if v.ambient_dim() != 3 || v.intrinsic_dim() != 2 {
        return Err(FormatError::Invalid(format!(
            "PLY output needs a surface in R^3, got d = {} in R^{}",
            v.intrinsic_dim(),
            v.ambient_dim()
        )));
    }
    writeln!(w, "ply\nformat ascii 1.0\nelement vertex {}", v.len())?;
    for p in ["x", "y", "z", "nx", "ny", "nz", "mass", "curvature"] {
        writeln!(w, "property double {p}")?;
    }
    writeln!(w, "end_header")?;
    for i in 0..v.len() {
        let x = v.point(i);
        let f = v.frame(i);
        let (a, b) = (&f[..3], &f[3..]);
        let nrm = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
        writeln!(
            w,
            "{} {} {} {} {} {} {} {}",
            x[0],
            x[1],
            x[2],
            nrm[0],
            nrm[1],
            nrm[2],
            v.masses[i],
            h.magnitude(i)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PointCloudVarifold {
        let pos = vec![0.1, 0.2, -3.5e-7, 1.0 / 3.0, 2.0, 0.0];
        let mut v = PointCloudVarifold::from_positions(2, 1, pos, Some(vec![false, true, false])).unwrap();
        v.masses = vec![0.25, 1e-3, 0.7];
        let s = 0.5f64.sqrt();
        v.tangents = vec![s, s, 0.0, 1.0, -0.6, 0.8];
        v
    }

    #[test]
    fn snapshot_roundtrip_is_exact() {
        let v = sample();
        let text = snapshot_string(&v, 12, 0.006);
        assert!(text.starts_with("# varimotion v1 dim=2 intrinsic=1 step=12 t=0.006\n"));
        let back = parse_snapshot(&text).unwrap();
        assert_eq!(back.varifold, v);
        assert_eq!(back.step, 12);
        assert_eq!(back.time, 0.006);
    }

    #[test]
    fn snapshot_errors_carry_line_numbers() {
        let mut text = snapshot_string(&sample(), 0, 0.0);
        text.push_str("1 2 3\n");
        match parse_snapshot(&text) {
            Err(FormatError::Parse { line: 5, .. }) => {}
            other => panic!("{other:?}"),
        }
        let text = "# varimotion v1 dim=2 intrinsic=1\n0 0 1 1 0 2\n";
        match parse_snapshot(text) {
            Err(FormatError::Parse { line: 2, message }) => assert!(message.contains("pin"), "{message}"),
            other => panic!("{other:?}"),
        }
        assert!(parse_snapshot("x y\n").is_err());
        assert!(parse_snapshot("# varimotion v1 dim=2 intrinsic=2\n").is_err());
    }

    #[test]
    fn xyz_parsing() {
        let (n, pos) = parse_xyz("# cloud\n0 0 1\n\n1,2,3\n-1 0.5 2 # tail\n").unwrap();
        assert_eq!(n, 3);
        assert_eq!(pos, vec![0.0, 0.0, 1.0, 1.0, 2.0, 3.0, -1.0, 0.5, 2.0]);
        match parse_xyz("0 0\n1 1\n2 x\n") {
            Err(FormatError::Parse { line: 3, message }) => assert!(message.contains('x')),
            other => panic!("{other:?}"),
        }
        match parse_xyz("0 0\n1 1 1\n") {
            Err(FormatError::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(parse_xyz("\n# nothing\n").is_err());
        assert!(parse_xyz("1\n2\n").is_err());
        assert!(parse_xyz("0 NaN\n").is_err());
    }

    #[test]
    fn ply_layout() {
        let pos = vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let v = PointCloudVarifold::from_positions(3, 2, pos, None).unwrap();
        let h = CurvatureField {
            ambient_dim: 3,
            vectors: vec![0.0, 0.0, 2.0, 0.0, 0.0, 0.0],
            denominators: vec![1.0, 1.0],
            degenerate: vec![false, false],
        };
        let mut out = Vec::new();
        write_ply(&mut out, &v, &h).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[2], "element vertex 2");
        assert_eq!(lines[10], "property double curvature");
        assert_eq!(lines[11], "end_header");
        assert_eq!(lines[12], "0 0 0 0 0 1 1 2");
        assert_eq!(lines.len(), 14);
        assert!(write_ply(Vec::new(), &sample(), &h).is_err());
    }
}
