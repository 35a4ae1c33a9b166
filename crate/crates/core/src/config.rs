//! TOML run configuration: mesh, problem data and the options of every
//! stage. Relative paths are resolved against the config file's directory.

use crate::diagnostics::DiagnoseOptions;
use crate::error::{Error, Result};
use crate::field::{BoundaryData, QField};
use crate::geometry::{
    build_cone, build_doubled_triangle, build_interval_between, build_product, build_rectangle,
    Chart, MetricComplex,
};
use crate::minimize::SolveConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSpec {
    Interval {
        n: usize,
        #[serde(default)]
        start: f64,
        #[serde(default = "one")]
        end: f64,
    },
    Rectangle {
        nx: usize,
        ny: usize,
        #[serde(default = "one")]
        lx: f64,
        #[serde(default = "one")]
        ly: f64,
    },
    Cone {
        angle: f64,
        nr: usize,
        ntheta: usize,
        #[serde(default = "one")]
        rmax: f64,
    },
    DoubledTriangle {
        #[serde(default = "one")]
        side: f64,
        n: usize,
    },
    /// Chain on `[start, end]` with `n` vertices times a doubled triangle
    /// refined `k` times.
    Product {
        n: usize,
        #[serde(default = "minus_one")]
        start: f64,
        #[serde(default = "one")]
        end: f64,
        #[serde(default = "one")]
        side: f64,
        k: usize,
    },
    File {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

fn minus_one() -> f64 {
    -1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum QSpec {
    Constant {
        value: f64,
    },
    /// One value per line in vertex order; an optional non-numeric header.
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    Zero {
        m: usize,
    },
    /// `g = xi * max(0, offset + gradient . x)` in chart coordinates.
    AffinePlus {
        xi: Vec<f64>,
        #[serde(default)]
        offset: f64,
        gradient: Vec<f64>,
    },
    /// `g = xi * max(0, sin(frequency * theta + phase))` on cone charts.
    ConeSine {
        xi: Vec<f64>,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// CSV with a header and rows `vertex,g_0,...,g_{m-1}`; boundary vertices
    /// not listed get zero data.
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub q: QSpec,
    pub g: DataSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solvers {
    Both,
    Relaxed,
    Setmove,
}

/// Initial mask of the set-move search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetmoveInit {
    /// Positivity set of the relaxed solution (runs the relaxed solver).
    Relaxed,
    /// Every vertex.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub solvers: Solvers,
    pub setmove_init: SetmoveInit,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            solvers: Solvers::Both,
            setmove_init: SetmoveInit::Relaxed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifySection {
    pub enabled: bool,
}

impl Default for CertifySection {
    fn default() -> Self {
        Self { enabled: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseSection {
    /// Center vertex; defaults to the cone apex or the first free-boundary
    /// point.
    pub center: Option<usize>,
    pub options: DiagnoseOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlowupSection {
    pub center: Option<usize>,
    pub r: f64,
    pub nr: usize,
    pub ntheta: usize,
}

impl Default for BlowupSection {
    fn default() -> Self {
        Self {
            center: None,
            r: 0.1,
            nr: 32,
            ntheta: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshSpec,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub solver: SolveConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub certify: CertifySection,
    #[serde(default)]
    pub diagnose: DiagnoseSection,
    #[serde(default)]
    pub blowup: BlowupSection,
    #[serde(default)]
    pub output: OutputSection,
    /// Directory of the config file; not part of the file itself.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// A built instance: complex, weight and boundary data.
#[derive(Debug, Clone)]
pub struct Problem {
    pub complex: MetricComplex,
    pub q: QField,
    pub g: BoundaryData,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| Error::Parse(format!("{}: {}", path.display(), e_msg(&e))))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output.dir)
    }

    pub fn build_mesh(&self) -> Result<MetricComplex> {
        match &self.mesh {
            MeshSpec::Interval { n, start, end } => build_interval_between(*n, *start, *end),
            MeshSpec::Rectangle { nx, ny, lx, ly } => build_rectangle(*nx, *ny, *lx, *ly),
            MeshSpec::Cone {
                angle,
                nr,
                ntheta,
                rmax,
            } => build_cone(*angle, *nr, *ntheta, *rmax),
            MeshSpec::DoubledTriangle { side, n } => build_doubled_triangle(*side, *n),
            MeshSpec::Product {
                n,
                start,
                end,
                side,
                k,
            } => build_product(
                &build_interval_between(*n, *start, *end)?,
                &build_doubled_triangle(*side, *k)?,
            ),
            MeshSpec::File { path } => MetricComplex::read_json(&self.resolve(path)),
        }
    }

    pub fn build(&self) -> Result<Problem> {
        let complex = self.build_mesh()?;
        let q = self.build_q(&complex)?;
        let g = self.build_data(&complex)?;
        Ok(Problem { complex, q, g })
    }

    fn build_q(&self, complex: &MetricComplex) -> Result<QField> {
        let n = complex.num_vertices();
        match &self.problem.q {
            QSpec::Constant { value } => QField::constant(n, *value),
            QSpec::File { path } => {
                let text = std::fs::read_to_string(self.resolve(path))?;
                let values = parse_column(&text)?;
                if values.len() != n {
                    return Err(Error::ShapeMismatch(format!(
                        "Q file has {} values, mesh has {n} vertices",
                        values.len()
                    )));
                }
                QField::new(values)
            }
        }
    }

    fn build_data(&self, complex: &MetricComplex) -> Result<BoundaryData> {
        match &self.problem.g {
            DataSpec::Zero { m } => BoundaryData::zero(complex, *m),
            DataSpec::AffinePlus {
                xi,
                offset,
                gradient,
            } => {
                let dim = complex.coords().first().map_or(0, Vec::len);
                if gradient.len() != dim {
                    return Err(Error::ShapeMismatch(format!(
                        "gradient has {} entries, coordinates have {dim}",
                        gradient.len()
                    )));
                }
                BoundaryData::from_fn(complex, xi.len(), |v| {
                    let s: f64 = offset
                        + gradient
                            .iter()
                            .zip(&complex.coords()[v])
                            .map(|(a, x)| a * x)
                            .sum::<f64>();
                    xi.iter().map(|k| k * s.max(0.0)).collect()
                })
            }
            DataSpec::ConeSine {
                xi,
                frequency,
                phase,
            } => {
                if !matches!(complex.chart(), Chart::Cone { .. }) {
                    return Err(Error::param("cone_sine data needs a cone mesh"));
                }
                BoundaryData::from_fn(complex, xi.len(), |v| {
                    let (_, t) = complex.cone_polar(v).unwrap_or((0.0, 0.0));
                    let s = (frequency * t + phase).sin().max(0.0);
                    xi.iter().map(|k| k * s).collect()
                })
            }
            DataSpec::File { path } => {
                let text = std::fs::read_to_string(self.resolve(path))?;
                data_from_csv(complex, &text)
            }
        }
    }
}

fn e_msg(e: &Error) -> String {
    match e {
        Error::Parse(s) => s.trim_end().to_string(),
        other => other.to_string(),
    }
}

fn parse_column(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<f64>() {
            Ok(x) => out.push(x),
            Err(_) if k == 0 => {}
            Err(_) => {
                return Err(Error::Parse(format!(
                    "line {}: not a number: {line}",
                    k + 1
                )))
            }
        }
    }
    Ok(out)
}

fn data_from_csv(complex: &MetricComplex, text: &str) -> Result<BoundaryData> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty boundary data file".into()))?;
    let m = header.split(',').count().saturating_sub(1);
    let mut rows = std::collections::BTreeMap::new();
    for (k, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = |what: &str| Error::Parse(format!("line {}: {what}", k + 1));
        if fields.len() != m + 1 {
            return Err(bad("wrong number of columns"));
        }
        let v: usize = fields[0].parse().map_err(|_| bad("bad vertex index"))?;
        if v >= complex.num_vertices() || !complex.is_boundary(v) {
            return Err(bad("vertex is not a boundary vertex"));
        }
        let vals = fields[1..]
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| bad("not a number")))
            .collect::<Result<Vec<f64>>>()?;
        rows.insert(v, vals);
    }
    BoundaryData::from_fn(complex, m, |v| {
        rows.get(&v).cloned().unwrap_or_else(|| vec![0.0; m])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_D: &str = r#"
[mesh]
kind = "interval"
n = 101
end = 2.0

[problem]
q = { kind = "constant", value = 4.0 }
g = { kind = "affine_plus", xi = [1.0], offset = 1.0, gradient = [-0.5] }

[solver]
seed = 7
"#;

    #[test]
    fn one_dimensional_config_builds() {
        let cfg = RunConfig::from_toml(ONE_D).unwrap();
        assert_eq!(cfg.solver.seed, 7);
        assert_eq!(cfg.run.solvers, Solvers::Both);
        let p = cfg.build().unwrap();
        assert_eq!(p.complex.num_vertices(), 101);
        let g: Vec<(usize, Vec<f64>)> = p.g.iter().map(|(v, x)| (v, x.to_vec())).collect();
        assert_eq!(g, vec![(0, vec![1.0]), (100, vec![0.0])]);
        assert_eq!(p.q.at(50), 4.0);
    }

    #[test]
    fn round_trip_through_toml() {
        let cfg = RunConfig::from_toml(ONE_D).unwrap();
        let again = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn errors_point_at_the_line() {
        let bad = ONE_D.replace("seed = 7", "seed = \"x\"");
        let msg = RunConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(msg.contains("line 12"), "{msg}");
        let unknown = ONE_D.replace("seed = 7", "sed = 7");
        assert!(RunConfig::from_toml(&unknown).is_err());
    }

    #[test]
    fn nonpositive_q_is_rejected() {
        let cfg = RunConfig::from_toml(&ONE_D.replace("value = 4.0", "value = 0.0")).unwrap();
        assert!(cfg.build().is_err());
    }

    #[test]
    fn cone_sine_data_vanishes_on_half_the_rim() {
        let text = r#"
[mesh]
kind = "cone"
angle = 4.71238898038469
nr = 4
ntheta = 12

[problem]
q = { kind = "constant", value = 1.0 }
g = { kind = "cone_sine", xi = [1.0], frequency = 1.3333333333333333 }
"#;
        let p = RunConfig::from_toml(text).unwrap().build().unwrap();
        let pos = p.g.iter().filter(|(_, x)| x[0] > 1e-12).count();
        assert_eq!(pos, 5);
    }

    #[test]
    fn data_from_file() {
        let c = build_interval_between(5, 0.0, 1.0).unwrap();
        let g = data_from_csv(&c, "vertex,g0,g1\n4,0.5,2\n").unwrap();
        let rows: Vec<(usize, Vec<f64>)> = g.iter().map(|(v, x)| (v, x.to_vec())).collect();
        assert_eq!(rows, vec![(0, vec![0.0, 0.0]), (4, vec![0.5, 2.0])]);
        assert!(data_from_csv(&c, "vertex,g0\n2,1\n").is_err());
        assert_eq!(parse_column("q\n1\n2.5\n").unwrap(), vec![1.0, 2.5]);
    }
}
