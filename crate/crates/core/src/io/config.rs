//! `key = value` run configurations. `#` starts a comment; `knot` and
//! `slice` may repeat, every other key appears at most once. Relative paths
//! are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use num_complex::Complex;

use crate::domain::DomainKind;
use crate::error::{Error, Result};
use crate::io::field_file::Encoding;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Model,
    Ode,
    Spectrum,
    SolveSurface,
    SolveCylinder,
    SolvePlane,
    Verify,
    Distance,
    Study,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Model,
        Command::Ode,
        Command::Spectrum,
        Command::SolveSurface,
        Command::SolveCylinder,
        Command::SolvePlane,
        Command::Verify,
        Command::Distance,
        Command::Study,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Model => "model",
            Command::Ode => "ode",
            Command::Spectrum => "spectrum",
            Command::SolveSurface => "solve-surface",
            Command::SolveCylinder => "solve-cylinder",
            Command::SolvePlane => "solve-plane",
            Command::Verify => "verify",
            Command::Distance => "distance",
            Command::Study => "study",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Where a coefficient comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Constant(f64),
    /// Field file holding nodal values on the horizontal grid.
    File(PathBuf),
}

impl Source {
    fn describe(&self) -> String {
        match self {
            Source::Constant(v) => format!("{v}"),
            Source::File(p) => format!("file:{}", p.display()),
        }
    }
}

/// What `study` measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StudyKind {
    /// Residual of `U_n` on axisymmetric grids.
    Model,
    /// Plane solve for `p = c zⁿ` against `U_n`.
    Plane,
    /// Line solve against the reduced ODE.
    Cylinder,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Model => "model",
            StudyKind::Plane => "plane",
            StudyKind::Cylinder => "cylinder",
        }
    }
}

/// CSV slice through a field: nodes whose coordinate along `axis` is
/// closest to `value`.
#[derive(Clone, Debug, PartialEq)]
pub struct Slice {
    pub axis: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarrierConstants {
    pub a: f64,
    pub a_prime: f64,
    pub a_dprime: f64,
    pub eps: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub tol: f64,
    pub domain: Option<DomainKind>,
    pub extents: Vec<f64>,
    pub y_max: Option<f64>,
    pub resolution: Vec<usize>,
    pub resolutions: Vec<usize>,
    pub grading_y: f64,
    pub grading_r: f64,
    /// `(x, x₃, order)`.
    pub knots: Vec<(f64, f64, usize)>,
    /// Coefficients of `p`, lowest degree first.
    pub poly: Option<Vec<Complex<f64>>>,
    pub curvature: Source,
    pub alpha_sq: Source,
    pub beta_sq: Source,
    pub g0_sq: Source,
    pub lambda: Option<f64>,
    pub max_iterations: Option<usize>,
    pub barrier: Option<BarrierConstants>,
    pub eps: Option<f64>,
    pub use_limit: bool,
    /// Model order `n` (model, spectrum, study).
    pub order: usize,
    pub mode: i64,
    pub count: usize,
    pub spectral_resolution: usize,
    pub input: Option<PathBuf>,
    pub input2: Option<PathBuf>,
    pub study: StudyKind,
    /// Lower `y` cut for residual maxima in `verify`.
    pub verify_y_min: f64,
    pub encoding: Encoding,
    pub slices: Vec<Slice>,
    pub out: Option<PathBuf>,
}

pub const TOL_RANGE: (f64, f64) = (1e-14, 1e-2);

const KEYS: &[&str] = &[
    "command",
    "tol",
    "domain",
    "extents",
    "y_max",
    "resolution",
    "resolutions",
    "grading.y",
    "grading.r",
    "knot",
    "poly",
    "poly.im",
    "curvature",
    "alpha_sq",
    "beta_sq",
    "g0_sq",
    "lambda",
    "max_iterations",
    "barrier.a",
    "barrier.a_prime",
    "barrier.a_dprime",
    "barrier.eps",
    "eps",
    "use_limit",
    "order",
    "mode",
    "count",
    "spectral_resolution",
    "input",
    "input2",
    "study",
    "verify.y_min",
    "output.format",
    "slice",
    "out",
];

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Config { line, message: message.into() }
}

fn number(line: usize, key: &str, v: &str) -> Result<f64> {
    match v.trim().parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(err(line, format!("malformed number `{}` for `{key}`", v.trim()))),
    }
}

fn numbers(line: usize, key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| number(line, key, s)).collect()
}

fn count(line: usize, key: &str, v: &str) -> Result<usize> {
    v.trim().parse::<usize>().map_err(|_| err(line, format!("`{key}` must be a nonnegative integer, got `{}`", v.trim())))
}

fn counts(line: usize, key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',').map(|s| count(line, key, s)).collect()
}

fn order(line: usize, v: &str, allow_zero: bool) -> Result<usize> {
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 || allow_zero => Ok(n),
        _ => Err(err(line, "order must be a positive integer")),
    }
}

fn boolean(line: usize, key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        o => Err(err(line, format!("`{key}` must be true or false, got `{o}`"))),
    }
}

fn resolve(base: &Path, line: usize, v: &str) -> Result<PathBuf> {
    let p = Path::new(v.trim());
    let p = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    if !p.exists() {
        return Err(err(line, format!("referenced file does not exist: {}", p.display())));
    }
    Ok(p)
}

fn source(base: &Path, line: usize, key: &str, v: &str) -> Result<Source> {
    match v.trim().strip_prefix("file:") {
        Some(path) => Ok(Source::File(resolve(base, line, path)?)),
        None => Ok(Source::Constant(number(line, key, v)?)),
    }
}

pub fn check_tol(tol: f64, line: usize) -> Result<f64> {
    if tol > TOL_RANGE.0 && tol < TOL_RANGE.1 {
        Ok(tol)
    } else {
        Err(err(line, format!("tolerance out of range ({:e}, {:e})", TOL_RANGE.0, TOL_RANGE.1)))
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config_str(&text, &base)
}

/// Parses a configuration; the first problem is reported with its line.
pub fn parse_config_str(text: &str, base: &Path) -> Result<RunConfig> {
    let mut seen: Vec<(String, usize)> = vec![];
    let mut cfg = RunConfig {
        command: Command::Ode,
        tol: 0.0,
        domain: None,
        extents: vec![],
        y_max: None,
        resolution: vec![],
        resolutions: vec![],
        grading_y: 1.0,
        grading_r: 1.0,
        knots: vec![],
        poly: None,
        curvature: Source::Constant(0.0),
        alpha_sq: Source::Constant(1.0),
        beta_sq: Source::Constant(0.0),
        g0_sq: Source::Constant(1.0),
        lambda: None,
        max_iterations: None,
        barrier: None,
        eps: None,
        use_limit: true,
        order: 1,
        mode: 0,
        count: 4,
        spectral_resolution: 200,
        input: None,
        input2: None,
        study: StudyKind::Plane,
        verify_y_min: 0.2,
        encoding: Encoding::Binary,
        slices: vec![],
        out: None,
    };
    let mut poly_re: Option<(usize, Vec<f64>)> = None;
    let mut poly_im: Option<(usize, Vec<f64>)> = None;
    let mut barrier = [None; 4];
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| err(line, format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(err(line, format!("unknown key `{key}`")));
        }
        if key != "knot" && key != "slice" {
            if let Some((_, first)) = seen.iter().find(|(s, _)| s == key) {
                return Err(err(line, format!("duplicate key `{key}` (first set on line {first})")));
            }
            seen.push((key.to_string(), line));
        }
        match key {
            "command" => {
                cfg.command = Command::parse(value).ok_or_else(|| err(line, format!("unknown command `{value}`")))?;
            }
            "tol" => cfg.tol = check_tol(number(line, key, value)?, line)?,
            "domain" => {
                cfg.domain = Some(DomainKind::parse(value).ok_or_else(|| err(line, format!("unknown domain kind `{value}`")))?);
            }
            "extents" => cfg.extents = numbers(line, key, value)?,
            "y_max" => cfg.y_max = Some(number(line, key, value)?),
            "resolution" => cfg.resolution = counts(line, key, value)?,
            "resolutions" => cfg.resolutions = counts(line, key, value)?,
            "grading.y" => cfg.grading_y = number(line, key, value)?,
            "grading.r" => cfg.grading_r = number(line, key, value)?,
            "knot" => {
                let parts: Vec<&str> = value.split(',').collect();
                if parts.len() != 3 {
                    return Err(err(line, "knot needs `x, x3, order`"));
                }
                cfg.knots.push((number(line, key, parts[0])?, number(line, key, parts[1])?, order(line, parts[2], false)?));
            }
            "poly" => poly_re = Some((line, numbers(line, key, value)?)),
            "poly.im" => poly_im = Some((line, numbers(line, key, value)?)),
            "curvature" => cfg.curvature = source(base, line, key, value)?,
            "alpha_sq" => cfg.alpha_sq = source(base, line, key, value)?,
            "beta_sq" => cfg.beta_sq = source(base, line, key, value)?,
            "g0_sq" => cfg.g0_sq = source(base, line, key, value)?,
            "lambda" => cfg.lambda = Some(number(line, key, value)?),
            "max_iterations" => cfg.max_iterations = Some(count(line, key, value)?),
            "barrier.a" => barrier[0] = Some(number(line, key, value)?),
            "barrier.a_prime" => barrier[1] = Some(number(line, key, value)?),
            "barrier.a_dprime" => barrier[2] = Some(number(line, key, value)?),
            "barrier.eps" => barrier[3] = Some(number(line, key, value)?),
            "eps" => cfg.eps = Some(number(line, key, value)?),
            "use_limit" => cfg.use_limit = boolean(line, key, value)?,
            "order" => cfg.order = order(line, value, true)?,
            "mode" => cfg.mode = value.parse().map_err(|_| err(line, format!("`mode` must be an integer, got `{value}`")))?,
            "count" => cfg.count = count(line, key, value)?,
            "spectral_resolution" => cfg.spectral_resolution = count(line, key, value)?,
            "input" => cfg.input = Some(resolve(base, line, value)?),
            "input2" => cfg.input2 = Some(resolve(base, line, value)?),
            "study" => {
                cfg.study = match value {
                    "model" => StudyKind::Model,
                    "plane" => StudyKind::Plane,
                    "cylinder" => StudyKind::Cylinder,
                    o => return Err(err(line, format!("unknown study kind `{o}`"))),
                }
            }
            "verify.y_min" => cfg.verify_y_min = number(line, key, value)?,
            "output.format" => {
                cfg.encoding = Encoding::parse(value).ok_or_else(|| err(line, format!("unknown output format `{value}`")))?;
            }
            "slice" => {
                let (axis, v) = value.split_once('=').ok_or_else(|| err(line, "slice needs `axis=value`"))?;
                let axis = axis.trim();
                if !["x", "x3", "r", "y"].contains(&axis) {
                    return Err(err(line, format!("unknown slice axis `{axis}`")));
                }
                cfg.slices.push(Slice { axis: axis.to_string(), value: number(line, key, v)? });
            }
            "out" => cfg.out = Some(base.join(value)),
            _ => unreachable!("key list and match arms agree"),
        }
    }
    for required in ["command", "tol"] {
        if !seen.iter().any(|(s, _)| s == required) {
            return Err(err(0, format!("missing required key `{required}`")));
        }
    }
    if let Some((line, re)) = poly_re {
        let im = match poly_im {
            Some((l, im)) if im.len() != re.len() => return Err(err(l, "`poly.im` must have as many entries as `poly`")),
            Some((_, im)) => im,
            None => vec![0.0; re.len()],
        };
        if re.is_empty() {
            return Err(err(line, "`poly` needs at least one coefficient"));
        }
        cfg.poly = Some(re.into_iter().zip(im).map(|(a, b)| Complex::new(a, b)).collect());
    } else if let Some((line, _)) = poly_im {
        return Err(err(line, "`poly.im` without `poly`"));
    }
    match barrier {
        [None, None, None, None] => {}
        [Some(a), Some(a_prime), Some(a_dprime), Some(eps)] => {
            cfg.barrier = Some(BarrierConstants { a, a_prime, a_dprime, eps });
        }
        _ => {
            let line = seen.iter().filter(|(s, _)| s.starts_with("barrier.")).map(|(_, l)| *l).max().unwrap_or(0);
            return Err(err(line, "barrier constants need all of barrier.a, barrier.a_prime, barrier.a_dprime, barrier.eps"));
        }
    }
    Ok(cfg)
}

impl RunConfig {
    /// Fully resolved configuration as `key = value` pairs.
    pub fn echo(&self) -> Vec<(String, String)> {
        let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let floats = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        let opt = |v: Option<String>| v.unwrap_or_else(|| "default".into());
        let out = vec![
            ("command", self.command.name().to_string()),
            ("tol", format!("{:e}", self.tol)),
            ("domain", opt(self.domain.map(|d| d.name().to_string()))),
            ("extents", floats(&self.extents)),
            ("y_max", opt(self.y_max.map(|v| v.to_string()))),
            ("resolution", list(&self.resolution)),
            ("resolutions", list(&self.resolutions)),
            ("grading.y", self.grading_y.to_string()),
            ("grading.r", self.grading_r.to_string()),
            (
                "knots",
                self.knots.iter().map(|(x, y, n)| format!("{x}:{y}:{n}")).collect::<Vec<_>>().join(";"),
            ),
            (
                "poly",
                self.poly
                    .as_ref()
                    .map(|p| p.iter().map(|c| format!("{}{:+}i", c.re, c.im)).collect::<Vec<_>>().join(","))
                    .unwrap_or_default(),
            ),
            ("curvature", self.curvature.describe()),
            ("alpha_sq", self.alpha_sq.describe()),
            ("beta_sq", self.beta_sq.describe()),
            ("g0_sq", self.g0_sq.describe()),
            ("lambda", opt(self.lambda.map(|v| v.to_string()))),
            ("max_iterations", opt(self.max_iterations.map(|v| v.to_string()))),
            (
                "barrier",
                opt(self.barrier.as_ref().map(|b| format!("{},{},{},{}", b.a, b.a_prime, b.a_dprime, b.eps))),
            ),
            ("eps", opt(self.eps.map(|v| v.to_string()))),
            ("use_limit", self.use_limit.to_string()),
            ("order", self.order.to_string()),
            ("mode", self.mode.to_string()),
            ("count", self.count.to_string()),
            ("spectral_resolution", self.spectral_resolution.to_string()),
            ("input", opt(self.input.as_ref().map(|p| p.display().to_string()))),
            ("input2", opt(self.input2.as_ref().map(|p| p.display().to_string()))),
            ("study", self.study.name().to_string()),
            ("verify.y_min", self.verify_y_min.to_string()),
            ("output.format", self.encoding.name().to_string()),
            (
                "slices",
                self.slices.iter().map(|s| format!("{}={}", s.axis, s.value)).collect::<Vec<_>>().join(";"),
            ),
            ("out", opt(self.out.as_ref().map(|p| p.display().to_string()))),
        ];
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<RunConfig> {
        parse_config_str(s, Path::new("."))
    }

    #[test]
    fn minimal_ode() {
        let c = parse("command = ode\ntol = 1e-10\n").unwrap();
        assert_eq!(c.command, Command::Ode);
        assert_eq!(c.tol, 1e-10);
    }

    #[test]
    fn errors_carry_lines() {
        let e = parse("command = solve-plane\ntol = 1e-10\nknot = 0, 0, 0.5\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 3, .. }));
        assert!(e.to_string().contains("order must be a positive integer"));
        let e = parse("command = ode\ntol = 1\n").unwrap_err();
        assert!(e.to_string().contains("tolerance out of range"));
        let e = parse("command = ode\ntol = 1e-10\nfoo = 2\n").unwrap_err();
        assert!(e.to_string().contains("unknown key") && matches!(e, Error::Config { line: 3, .. }));
        let e = parse("command = ode\ntol = 1e-1x\n").unwrap_err();
        assert!(e.to_string().contains("malformed number"));
        let e = parse("command = ode\n").unwrap_err();
        assert!(e.to_string().contains("missing required key `tol`"));
        let e = parse("command = verify\ntol = 1e-8\ninput = /nonexistent/u.ebf\n").unwrap_err();
        assert!(e.to_string().contains("does not exist"));
        let e = parse("command = ode\ntol = 1e-8\ntol = 1e-9\n").unwrap_err();
        assert!(e.to_string().contains("duplicate key"));
    }

    #[test]
    fn full_config() {
        let c = parse(
            "command = solve-plane # comment\ntol = 1e-9\ndomain = plane-half-space\nextents = 2\ny_max = 2\n\
             resolution = 33,33\nknot = 0,0,1\npoly = 0,1\nbarrier.a = 1\nbarrier.a_prime = 1\nbarrier.a_dprime = 1\n\
             barrier.eps = 0.5\nslice = y=0.5\noutput.format = text\n",
        )
        .unwrap();
        assert_eq!(c.knots, vec![(0.0, 0.0, 1)]);
        assert_eq!(c.poly.as_ref().unwrap().len(), 2);
        assert_eq!(c.barrier.as_ref().unwrap().eps, 0.5);
        assert_eq!(c.encoding, Encoding::Text);
        assert!(c.echo().iter().any(|(k, v)| k == "resolution" && v == "33,33"));
        assert!(parse("command = ode\ntol = 1e-8\nbarrier.a = 1\n").is_err());
    }
}
