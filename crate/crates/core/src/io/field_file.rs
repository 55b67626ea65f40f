//! `EBF1` field files: a text header followed by a row-major payload (last
//! index fastest) of little-endian `f64` values or one decimal per line.
//!
//! ```text
//! EBF1
//! version = 1
//! domain = axisym-slab
//! dims = 33,33
//! periods = -,-
//! coords.0 = 0.0e0,...
//! coords.1 = ...
//! knots = 0:0:1
//! data = binary-le-f64
//! end
//! <payload>
//! ```

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex;

use crate::domain::{Axis, AxisRole, DomainKind, GradedGrid, Grading, KnotPoint, ScalarField};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MAGIC: &str = "EBF1";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Encoding {
    Binary,
    Text,
}

impl Encoding {
    pub fn name(self) -> &'static str {
        match self {
            Encoding::Binary => "binary-le-f64",
            Encoding::Text => "text",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "binary-le-f64" | "binary" => Some(Encoding::Binary),
            "text" => Some(Encoding::Text),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldFile {
    pub domain: DomainKind,
    pub dims: Vec<usize>,
    pub coords: Vec<Vec<f64>>,
    pub periods: Vec<Option<f64>>,
    /// `(x, x₃, order)` of each knot.
    pub knots: Vec<(f64, f64, usize)>,
    pub values: Vec<f64>,
}

fn roles(kind: DomainKind) -> Vec<AxisRole> {
    use AxisRole::*;
    match kind {
        DomainKind::OdeLine => vec![Vertical],
        DomainKind::LimitSurface => vec![Horizontal, Horizontal],
        DomainKind::AxisymSlab => vec![Radial, Vertical],
        DomainKind::TorusHalfCylinder | DomainKind::PlaneHalfSpace => vec![Horizontal, Horizontal, Vertical],
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

impl FieldFile {
    pub fn from_field<T: Real>(field: &ScalarField<T>) -> Self {
        let g = field.grid();
        Self {
            domain: g.kind,
            dims: g.shape(),
            coords: g.axes.iter().map(|a| a.nodes.iter().map(|x| x.to_f64_lossy()).collect()).collect(),
            periods: g.axes.iter().map(|a| a.period().map(|p| p.to_f64_lossy())).collect(),
            knots: g
                .knots
                .iter()
                .map(|k| (k.position.re.to_f64_lossy(), k.position.im.to_f64_lossy(), k.order))
                .collect(),
            values: field.values().iter().map(|v| v.to_f64_lossy()).collect(),
        }
    }

    /// Grid described by the header.
    pub fn grid(&self) -> Result<GradedGrid<f64>> {
        let axes = roles(self.domain)
            .into_iter()
            .zip(self.coords.iter().zip(&self.periods))
            .map(|(role, (c, p))| Axis::from_nodes(role, c.clone(), *p))
            .collect::<Result<Vec<_>>>()?;
        let knots = self
            .knots
            .iter()
            .map(|&(x, y, n)| KnotPoint::new(Complex::new(x, y), n))
            .collect::<Result<Vec<_>>>()?;
        let include_y0 = roles(self.domain)
            .iter()
            .position(|r| *r == AxisRole::Vertical)
            .is_some_and(|v| self.coords[v][0] == 0.0);
        let grading = Grading { include_y0, ..Grading::uniform() };
        Ok(GradedGrid::from_axes(self.domain, axes, knots, grading))
    }

    pub fn to_field(&self) -> Result<ScalarField<f64>> {
        ScalarField::new(Arc::new(self.grid()?), self.values.clone())
    }

    pub fn to_bytes(&self, encoding: Encoding) -> Vec<u8> {
        let mut head = format!("{MAGIC}\nversion = {VERSION}\ndomain = {}\n", self.domain.name());
        let join = |v: Vec<String>| v.join(",");
        head += &format!("dims = {}\n", join(self.dims.iter().map(usize::to_string).collect()));
        head += &format!(
            "periods = {}\n",
            join(self.periods.iter().map(|p| p.map_or("-".to_string(), fmt)).collect())
        );
        for (a, c) in self.coords.iter().enumerate() {
            head += &format!("coords.{a} = {}\n", join(c.iter().map(|&x| fmt(x)).collect()));
        }
        let knots: Vec<String> = self.knots.iter().map(|(x, y, n)| format!("{}:{}:{n}", fmt(*x), fmt(*y))).collect();
        head += &format!("knots = {}\n", knots.join(";"));
        head += &format!("data = {}\nend\n", encoding.name());
        let mut out = head.into_bytes();
        match encoding {
            Encoding::Binary => {
                out.reserve(8 * self.values.len());
                for v in &self.values {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            Encoding::Text => {
                for v in &self.values {
                    out.extend_from_slice(fmt(*v).as_bytes());
                    out.push(b'\n');
                }
            }
        }
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut lines = vec![];
        loop {
            let end = bytes[pos..].iter().position(|&b| b == b'\n').ok_or_else(|| bad("header is not terminated by `end`"))?;
            let line = std::str::from_utf8(&bytes[pos..pos + end]).map_err(|_| bad("header is not UTF-8"))?.trim().to_string();
            pos += end + 1;
            if line == "end" {
                break;
            }
            lines.push(line);
        }
        if lines.first().map(String::as_str) != Some(MAGIC) {
            return Err(bad(format!("missing {MAGIC} magic line")));
        }
        let mut get = std::collections::HashMap::new();
        for l in &lines[1..] {
            let (k, v) = l.split_once('=').ok_or_else(|| bad(format!("malformed header line `{l}`")))?;
            get.insert(k.trim().to_string(), v.trim().to_string());
        }
        let key = |k: &str| get.get(k).cloned().ok_or_else(|| bad(format!("header lacks `{k}`")));
        let version: u32 = key("version")?.parse().map_err(|_| bad("malformed version"))?;
        if version != VERSION {
            return Err(bad(format!("version mismatch: file has {version}, reader supports {VERSION}")));
        }
        let domain = DomainKind::parse(&key("domain")?).ok_or_else(|| bad("unknown domain kind"))?;
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(format!("malformed number `{s}`")));
        let dims = key("dims")?
            .split(',')
            .map(|s| s.trim().parse::<usize>().map_err(|_| bad(format!("malformed dimension `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        if dims.len() != domain.axis_count() {
            return Err(bad(format!("{} needs {} dims, header has {}", domain.name(), domain.axis_count(), dims.len())));
        }
        let periods = key("periods")?
            .split(',')
            .map(|s| if s.trim() == "-" { Ok(None) } else { num(s).map(Some) })
            .collect::<Result<Vec<_>>>()?;
        if periods.len() != dims.len() {
            return Err(bad("periods do not match dims"));
        }
        let mut coords = vec![];
        for (a, &n) in dims.iter().enumerate() {
            let c = key(&format!("coords.{a}"))?.split(',').map(num).collect::<Result<Vec<_>>>()?;
            if c.len() != n {
                return Err(bad(format!("coords.{a} has {} entries, dims say {n}", c.len())));
            }
            coords.push(c);
        }
        let knots = match get.get("knots").map(String::as_str) {
            None | Some("") => vec![],
            Some(s) => s
                .split(';')
                .map(|k| {
                    let p: Vec<&str> = k.split(':').collect();
                    if p.len() != 3 {
                        return Err(bad(format!("malformed knot `{k}`")));
                    }
                    let n = p[2].trim().parse::<usize>().map_err(|_| bad(format!("malformed knot order `{}`", p[2])))?;
                    Ok((num(p[0])?, num(p[1])?, n))
                })
                .collect::<Result<Vec<_>>>()?,
        };
        let encoding = Encoding::parse(&key("data")?).ok_or_else(|| bad("unknown data encoding"))?;
        let expected: usize = dims.iter().product();
        let payload = &bytes[pos..];
        let values = match encoding {
            Encoding::Binary => {
                let have = payload.len() / 8;
                if have < expected {
                    return Err(bad(format!("payload short by {} values", expected - have)));
                }
                if payload.len() != 8 * expected {
                    return Err(bad(format!("payload has {} bytes beyond {expected} values", payload.len() - 8 * expected)));
                }
                payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect()
            }
            Encoding::Text => {
                let text = std::str::from_utf8(payload).map_err(|_| bad("text payload is not UTF-8"))?;
                let v = text.lines().filter(|l| !l.trim().is_empty()).map(num).collect::<Result<Vec<_>>>()?;
                if v.len() < expected {
                    return Err(bad(format!("payload short by {} values", expected - v.len())));
                }
                if v.len() > expected {
                    return Err(bad(format!("payload has {} values beyond {expected}", v.len() - expected)));
                }
                v
            }
        };
        Ok(Self { domain, dims, coords, periods, knots, values })
    }
}

pub fn write_field<T: Real>(path: &Path, field: &ScalarField<T>, encoding: Encoding) -> Result<()> {
    std::fs::write(path, FieldFile::from_field(field).to_bytes(encoding))?;
    Ok(())
}

pub fn read_field_file(path: &Path) -> Result<FieldFile> {
    FieldFile::parse(&std::fs::read(path)?)
}

pub fn read_field(path: &Path) -> Result<ScalarField<f64>> {
    read_field_file(path)?.to_field()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, DomainSpec};

    fn sample() -> ScalarField<f64> {
        let g = build_grid(&DomainSpec::torus_half_cylinder(1.0, 2.0, 3.0), &[64, 64, 64], Grading::default()).unwrap();
        ScalarField::from_fn(Arc::new(g), |i| (i as f64 * 0.618).sin() / 3.0 + 1e-300 * i as f64).unwrap()
    }

    #[test]
    fn binary_round_trip_is_bit_identical() {
        let f = sample();
        let back = FieldFile::parse(&FieldFile::from_field(&f).to_bytes(Encoding::Binary)).unwrap();
        let g = back.to_field().unwrap();
        assert!(f.values().iter().zip(g.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(g.grid().shape(), f.grid().shape());
        for (a, b) in f.grid().axes.iter().zip(&g.grid().axes) {
            assert!(a.nodes.iter().zip(&b.nodes).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn text_round_trip() {
        let f = sample();
        let text = FieldFile::parse(&FieldFile::from_field(&f).to_bytes(Encoding::Text)).unwrap();
        let bin = FieldFile::parse(&FieldFile::from_field(&f).to_bytes(Encoding::Binary)).unwrap();
        let diff = text.values.iter().zip(&bin.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-15);
    }

    #[test]
    fn truncated_payload() {
        let f = sample();
        let mut bytes = FieldFile::from_field(&f).to_bytes(Encoding::Binary);
        bytes.truncate(bytes.len() - 8 * 5);
        let e = FieldFile::parse(&bytes).unwrap_err();
        assert!(e.to_string().contains("payload short by 5 values"), "{e}");
    }

    #[test]
    fn version_mismatch() {
        let g = build_grid(&DomainSpec::ode_line(1.0), &[9], Grading::uniform()).unwrap();
        let f = ScalarField::zeros(Arc::new(g));
        let text = String::from_utf8(FieldFile::from_field(&f).to_bytes(Encoding::Text)).unwrap();
        let e = FieldFile::parse(text.replace("version = 1", "version = 2").as_bytes()).unwrap_err();
        assert!(e.to_string().contains("version mismatch"));
        assert!(FieldFile::parse(text.replace("EBF1", "EBF0").as_bytes()).is_err());
    }
}
