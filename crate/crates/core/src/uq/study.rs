use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use super::cache::{CachedSolve, CollocationCache};
use super::config::StudyConfig;
use super::exec::Execution;
use super::solver::CollocationSolver;
use super::{Result, UqError};
use crate::deformation::{DeformationModel, StochasticPoint, Variant};
use crate::sparse_grid::{build_grid, NodeKey};

/// Where a moment estimate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Study,
    /// High-level isotropic run standing in for an exact reference.
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentResult {
    pub mean: f64,
    pub variance: f64,
    /// Number of grid nodes `η`.
    pub knots: usize,
    pub level: u32,
    pub n_s: usize,
    pub mesh_n: usize,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollocationRecord {
    pub key: NodeKey,
    pub y: Vec<f64>,
    pub qoi_raw: f64,
    pub qoi_norm: f64,
    pub iterations: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollocationRun {
    pub result: MomentResult,
    /// One record per grid node, in canonical key order.
    pub records: Vec<CollocationRecord>,
    /// QoI on the undeformed square.
    pub reference_qoi: f64,
    /// Solves actually performed (the rest came from the cache).
    pub new_solves: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n_s: usize,
    pub w: u32,
    pub knots: usize,
    pub mean_error: f64,
    pub var_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationRow {
    pub n_s: usize,
    pub mean_error: f64,
    pub var_error: f64,
    /// Tail `Σ_{l > N_s} a_l sup‖B_l‖` of the discarded modes.
    pub b_t_bound: f64,
}

/// Rejects models whose Jacobian can degenerate on the parameter box or that
/// violate `δ̃ > 0`.
fn check_admissible(model: &DeformationModel) -> Result<()> {
    match model.variant() {
        // The determinant is 1 + c e(y, x₁) ≥ 1 - c Σ a_l sup|φ_l|.
        Variant::UpperHalfStretch => {
            let worst = model.scaling() * model.modes().iter().map(|m| m.amplitude * m.profile_sup).sum::<f64>();
            if worst >= 1.0 {
                return Err(UqError::Inadmissible(format!(
                    "stretch factor can reach {:.6e} <= 0",
                    1.0 - worst
                )));
            }
        }
        Variant::Generic => {
            let b = model.perturbation_bound();
            if b >= 1.0 {
                return Err(UqError::Inadmissible(format!("sup ‖∂F - I‖ can reach {b:.6e} >= 1")));
            }
        }
    }
    let dt = model.delta_tilde();
    if !(dt > 0.0) {
        return Err(UqError::Inadmissible(format!("delta_tilde = {dt:.6e} <= 0")));
    }
    Ok(())
}

/// Shared state of a sequence of runs: the execution policy and one cache
/// per solver fidelity.
#[derive(Debug, Default)]
pub struct Session {
    exec: Execution,
    cache_dir: Option<PathBuf>,
    caches: Mutex<HashMap<String, Arc<CollocationCache>>>,
}

impl Session {
    pub fn new(exec: Execution) -> Self {
        Self {
            exec,
            cache_dir: None,
            caches: Mutex::new(HashMap::new()),
        }
    }

    /// Persists caches under `dir`, one file per fidelity.
    pub fn with_cache_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    pub fn execution(&self) -> Execution {
        self.exec
    }

    pub fn cache(&self, config: &StudyConfig, mesh_n: usize) -> Result<Arc<CollocationCache>> {
        let fp = config.fidelity_fingerprint(mesh_n);
        let mut caches = self.caches.lock().unwrap();
        if let Some(c) = caches.get(&fp) {
            return Ok(c.clone());
        }
        let dim = config.model.n_modes;
        let cache = match &self.cache_dir {
            Some(dir) => CollocationCache::persistent(dir, fp.clone(), dim)?,
            None => CollocationCache::in_memory(fp.clone(), dim),
        };
        let cache = Arc::new(cache);
        caches.insert(fp, cache.clone());
        Ok(cache)
    }

    /// Collocation at `(n_s, w)` on a `mesh_n` mesh, reusing cached nodes.
    pub fn collocate(
        &self,
        config: &StudyConfig,
        n_s: usize,
        w: u32,
        mesh_n: usize,
        provenance: Provenance,
    ) -> Result<CollocationRun> {
        config.validate()?;
        if n_s == 0 || n_s > config.model.n_modes {
            return Err(UqError::Config(format!(
                "n_s = {n_s} must lie in 1..={}",
                config.model.n_modes
            )));
        }
        let solver = CollocationSolver::new(config, mesh_n)?;
        check_admissible(solver.model())?;
        let cache = self.cache(config, mesh_n)?;
        let n = config.model.n_modes;
        let grid = build_grid(n_s, w, config.grid.family)?;
        let padded: Vec<NodeKey> = grid.keys.iter().map(|k| k.padded(n)).collect();
        let center = NodeKey(Vec::new()).padded(n);

        let mut wanted: BTreeSet<NodeKey> = padded.iter().cloned().collect();
        wanted.insert(center.clone());
        let missing: Vec<NodeKey> = wanted.into_iter().filter(|k| cache.get(k).is_none()).collect();
        log::info!(
            "collocation N_s={n_s} w={w} mesh={mesh_n}: {} nodes, {} new solves",
            grid.len(),
            missing.len()
        );
        let solved = self.exec.map(&missing, |key| {
            let y = StochasticPoint::new(key.point())?;
            solver.solve(&y)
        });
        let mut fresh = Vec::with_capacity(missing.len());
        for (key, r) in missing.iter().zip(solved) {
            match r {
                Ok(s) => fresh.push((key.clone(), s)),
                Err(e) => {
                    return Err(UqError::NodeFailed {
                        key: key.clone(),
                        source: Box::new(e),
                    })
                }
            }
        }
        let lookup = |k: &NodeKey| -> CachedSolve {
            fresh
                .iter()
                .find(|(f, _)| f == k)
                .map(|(_, s)| *s)
                .or_else(|| cache.get(k))
                .expect("every wanted node is solved or cached")
        };
        let reference_qoi = lookup(&center).qoi_raw;
        cache.insert_all(&fresh, reference_qoi)?;

        let scale = if config.study.normalize {
            if reference_qoi == 0.0 || !reference_qoi.is_finite() {
                return Err(UqError::Config(format!(
                    "cannot normalize by the undeformed QoI {reference_qoi:e}"
                )));
            }
            reference_qoi
        } else {
            1.0
        };
        let mut records = Vec::with_capacity(grid.len());
        let mut values = Vec::with_capacity(grid.len());
        for (key, pk) in grid.keys.iter().zip(&padded) {
            let s = cache.get(pk).expect("inserted above");
            let norm = s.qoi_raw / scale;
            values.push(norm);
            records.push(CollocationRecord {
                key: key.clone(),
                y: key.point(),
                qoi_raw: s.qoi_raw,
                qoi_norm: norm,
                iterations: s.iterations,
                seconds: s.seconds,
            });
        }
        let m = grid.moments(&values, None)?;
        Ok(CollocationRun {
            result: MomentResult {
                mean: m.mean,
                variance: m.variance,
                knots: grid.len(),
                level: w,
                n_s,
                mesh_n,
                provenance,
            },
            records,
            reference_qoi,
            new_solves: missing.len(),
        })
    }

    /// Collocation with the grid and mesh of `config`.
    pub fn run_collocation(&self, config: &StudyConfig) -> Result<CollocationRun> {
        self.collocate(
            config,
            config.grid.n_s,
            config.grid.level,
            config.solver.mesh_n,
            Provenance::Study,
        )
    }

    /// Isotropic run at level `w_ref` on a `mesh_ref` mesh with the
    /// configured `N_s`, flagged as a reference.
    pub fn reference_moments(&self, config: &StudyConfig, w_ref: u32, mesh_ref: usize) -> Result<MomentResult> {
        if mesh_ref < config.solver.mesh_n {
            return Err(UqError::Config(format!(
                "reference mesh {mesh_ref} is coarser than the study mesh {}",
                config.solver.mesh_n
            )));
        }
        Ok(self
            .collocate(config, config.grid.n_s, w_ref, mesh_ref, Provenance::Reference)?
            .result)
    }

    /// Errors against `reference` for every level in `w_list` at the
    /// configured `N_s` and mesh.
    pub fn convergence_study(
        &self,
        config: &StudyConfig,
        w_list: &[u32],
        reference: &MomentResult,
    ) -> Result<Vec<ConvergenceRow>> {
        let n_s = config.grid.n_s;
        w_list
            .iter()
            .map(|&w| {
                let r = self.collocate(config, n_s, w, config.solver.mesh_n, Provenance::Study)?.result;
                Ok(ConvergenceRow {
                    n_s,
                    w,
                    knots: r.knots,
                    mean_error: (r.mean - reference.mean).abs(),
                    var_error: (r.variance - reference.variance).abs(),
                })
            })
            .collect()
    }

    /// Errors against `reference` for every `N_s` in `ns_list` at the
    /// configured level and mesh, with the analytic tail of each truncation.
    pub fn truncation_study(
        &self,
        config: &StudyConfig,
        ns_list: &[usize],
        reference: &MomentResult,
    ) -> Result<Vec<TruncationRow>> {
        let model = config.model.build()?;
        ns_list
            .iter()
            .map(|&n_s| {
                let r = self
                    .collocate(config, n_s, config.grid.level, config.solver.mesh_n, Provenance::Study)?
                    .result;
                Ok(TruncationRow {
                    n_s,
                    mean_error: (r.mean - reference.mean).abs(),
                    var_error: (r.variance - reference.variance).abs(),
                    b_t_bound: model.tail_bound(n_s),
                })
            })
            .collect()
    }
}

/// [`Session::run_collocation`] with the default execution policy and an
/// in-memory cache.
pub fn run_collocation(config: &StudyConfig) -> Result<CollocationRun> {
    Session::default().run_collocation(config)
}

/// [`Session::reference_moments`] with the default execution policy.
pub fn reference_moments(config: &StudyConfig, w_ref: u32, mesh_ref: usize) -> Result<MomentResult> {
    Session::default().reference_moments(config, w_ref, mesh_ref)
}

fn e(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("N_s,w,knots,mean_error,var_error\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.n_s, r.w, r.knots, e(r.mean_error), e(r.var_error));
    }
    s
}

pub fn truncation_csv(rows: &[TruncationRow]) -> String {
    let mut s = String::from("N_s,mean_error,var_error,B_T_bound\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.n_s, e(r.mean_error), e(r.var_error), e(r.b_t_bound));
    }
    s
}

pub fn moments_csv(results: &[MomentResult]) -> String {
    let mut s = String::from("N_s,w,knots,mesh_n,mean,variance\n");
    for r in results {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.n_s,
            r.level,
            r.knots,
            r.mesh_n,
            e(r.mean),
            e(r.variance)
        );
    }
    s
}

/// Node records without wall times, so the file is reproducible.
pub fn records_csv(records: &[CollocationRecord]) -> String {
    let dim = records.first().map_or(0, |r| r.y.len());
    let mut s = String::from("node_key");
    for n in 1..=dim {
        let _ = write!(s, ",y_{n}");
    }
    s.push_str(",qoi_raw,qoi_norm,iters\n");
    for r in records {
        s.push_str(&r.key.to_string());
        for y in &r.y {
            let _ = write!(s, ",{}", e(*y));
        }
        let _ = writeln!(s, ",{},{},{}", e(r.qoi_raw), e(r.qoi_norm), r.iterations);
    }
    s
}
