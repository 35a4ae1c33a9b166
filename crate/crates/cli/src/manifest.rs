use anyhow::{bail, Context, Result};
use bernoulli::config::RunConfig;
use bernoulli::minimize::SolveResult;
use bernoulli::MetricComplex;
use serde::Serialize;
use std::path::PathBuf;
use std::time::Duration;

#[derive(Debug, Clone, Serialize)]
pub struct MeshSummary {
    pub description: String,
    pub vertices: usize,
    pub edges: usize,
    pub dim: usize,
    pub curvature_bound: f64,
    pub h: f64,
}

impl From<&MetricComplex> for MeshSummary {
    fn from(c: &MetricComplex) -> Self {
        Self {
            description: c.description().to_string(),
            vertices: c.num_vertices(),
            edges: c.num_edges(),
            dim: c.intrinsic_dim(),
            curvature_bound: c.curvature_bound(),
            h: c.mesh_size(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverStats {
    pub solver: String,
    pub iterations: usize,
    pub converged: bool,
    pub energy: f64,
    pub wall_time_s: f64,
}

impl SolverStats {
    pub fn new(name: &str, r: &SolveResult, elapsed: Duration) -> Self {
        Self {
            solver: name.to_string(),
            iterations: r.iterations,
            converged: r.converged,
            energy: r.energy.total,
            wall_time_s: elapsed.as_secs_f64(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub mesh: MeshSummary,
    pub stats: Vec<SolverStats>,
    pub outputs: Vec<String>,
}

/// Output directory that remembers every file written into it.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    pub fn create(dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self {
            dir,
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let body = serde_json::to_string_pretty(value)?;
        self.write(name, &(body + "\n"))
    }

    /// Writes `manifest.json` after checking every listed output.
    pub fn finish(
        self,
        command: &str,
        cfg: &RunConfig,
        complex: &MetricComplex,
        stats: Vec<SolverStats>,
    ) -> Result<()> {
        for f in &self.files {
            let len = std::fs::metadata(self.dir.join(f))?.len();
            if len == 0 {
                bail!("output {f} is empty");
            }
        }
        let manifest = RunManifest {
            tool: "bernoulli".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: cfg.solver.seed,
            config: serde_json::to_value(cfg)?,
            mesh: complex.into(),
            stats,
            outputs: self.files.clone(),
        };
        let body = serde_json::to_string_pretty(&manifest)? + "\n";
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }
}
