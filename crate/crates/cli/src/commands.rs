use std::path::Path;
use std::time::Instant;

use sgcoll::fem::fit_slope;
use sgcoll::uq::{
    complexity_plan, convergence_csv, decreasing_threshold, moments_csv, records_csv, truncation_csv, BoundParams,
    Execution, MomentResult, Provenance, Session, StudyConfig,
};

use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::GlobalArgs;

/// Reads, parses and validates a configuration; returns it with its
/// canonical text.
pub fn load_config(path: &Path) -> Result<(StudyConfig, String), CliError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(CliError::ConfigMissing(path.into())),
        Err(source) => {
            return Err(CliError::Io {
                path: path.into(),
                source,
            })
        }
    };
    let config: StudyConfig = toml::from_str(&text).map_err(|e| CliError::ConfigParse {
        path: path.into(),
        msg: e.message().to_string(),
    })?;
    config.validate()?;
    let canonical = canonical_text(&config);
    Ok((config, canonical))
}

pub fn canonical_text(config: &StudyConfig) -> String {
    toml::to_string(config).expect("configuration is serializable")
}

fn session(g: &GlobalArgs) -> Session {
    Session::new(Execution::from_workers(g.workers)).with_cache_dir(g.out.join("cache"))
}

fn prepare(g: &GlobalArgs, command: &str, canonical: &str) -> Result<RunManifest, CliError> {
    std::fs::create_dir_all(&g.out).map_err(|source| CliError::Io {
        path: g.out.clone(),
        source,
    })?;
    let mut manifest = RunManifest::start(command, canonical);
    manifest.emit(&g.out, "config.toml", "config", canonical)?;
    Ok(manifest)
}

fn e(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn run(g: &GlobalArgs, config_path: &Path) -> Result<(), CliError> {
    let (config, canonical) = load_config(config_path)?;
    let mut manifest = prepare(g, "run", &canonical)?;
    let start = Instant::now();
    let run = session(g).run_collocation(&config)?;
    let elapsed = start.elapsed().as_secs_f64();
    let r = &run.result;
    println!("N_s       {}", r.n_s);
    println!("level     {}", r.level);
    println!("knots     {}", r.knots);
    println!("mesh_n    {}", r.mesh_n);
    println!("mean      {}", e(r.mean));
    println!("variance  {}", e(r.variance));
    println!("Q_ref     {}", e(run.reference_qoi));
    println!("solves    {}", run.new_solves);
    println!("wall_time {elapsed:.3} s");
    manifest.emit(&g.out, "run_moments.csv", "csv", &moments_csv(std::slice::from_ref(r)))?;
    manifest.emit(&g.out, "run_records.csv", "csv", &records_csv(&run.records))?;
    manifest.study("run", "ok", None);
    manifest.finish(&g.out)?;
    Ok(())
}

pub fn converge(
    g: &GlobalArgs,
    config_path: &Path,
    w_max: Option<u32>,
    ns_list: Option<Vec<usize>>,
) -> Result<(), CliError> {
    let (config, canonical) = load_config(config_path)?;
    let w_max = w_max.unwrap_or(config.study.w_max);
    let ns_list = ns_list.unwrap_or_else(|| config.study.converge_ns.clone());
    check_ns_list(&config, &ns_list)?;
    let mut manifest = prepare(g, "converge", &canonical)?;
    let session = session(g);
    let w_ref = w_max + config.study.reference_level_offset;
    let mesh_ref = config.study.reference_mesh_n;

    let shared = match config.study.reference_n_s {
        Some(r) => Some(reference(&session, &config, r, w_ref, mesh_ref)?),
        None => None,
    };
    let mut rows = Vec::new();
    let mut references = Vec::new();
    for &n_s in &ns_list {
        let reference = match &shared {
            Some(r) => r.clone(),
            None => reference(&session, &config, n_s, w_ref, mesh_ref)?,
        };
        let mut c = config.clone();
        c.grid.n_s = n_s;
        let levels: Vec<u32> = (0..=w_max).collect();
        let block = session.convergence_study(&c, &levels, &reference)?;
        let monotone = block.windows(2).all(|w| w[1].var_error <= w[0].var_error);
        println!(
            "N_s = {n_s}: reference mean {} variance {} (w = {w_ref}, mesh {mesh_ref}); var_error non-increasing: {monotone}",
            e(reference.mean),
            e(reference.variance)
        );
        manifest.study(format!("converge N_s={n_s}"), "ok", None);
        rows.extend(block);
        if shared.is_none() || references.is_empty() {
            references.push(reference);
        }
    }
    print!("{}", convergence_csv(&rows));
    manifest.emit(&g.out, "converge.csv", "csv", &convergence_csv(&rows))?;
    manifest.emit(&g.out, "converge_reference.csv", "csv", &moments_csv(&references))?;
    manifest.finish(&g.out)?;
    Ok(())
}

fn reference(session: &Session, config: &StudyConfig, n_s: usize, w: u32, mesh_n: usize) -> Result<MomentResult, CliError> {
    let mut c = config.clone();
    c.grid.n_s = n_s;
    Ok(session.reference_moments(&c, w, mesh_n)?)
}

fn check_ns_list(config: &StudyConfig, ns: &[usize]) -> Result<(), CliError> {
    if ns.is_empty() {
        return Err(CliError::Usage("empty N_s list".into()));
    }
    if let Some(&bad) = ns.iter().find(|&&v| v == 0 || v > config.model.n_modes) {
        return Err(CliError::Usage(format!(
            "N_s = {bad} outside 1..={}",
            config.model.n_modes
        )));
    }
    Ok(())
}

pub fn truncate(g: &GlobalArgs, config_path: &Path, ns_list: Option<Vec<usize>>) -> Result<(), CliError> {
    let (mut config, canonical) = load_config(config_path)?;
    let ns_list = ns_list.unwrap_or_else(|| config.study.truncation_ns.clone());
    check_ns_list(&config, &ns_list)?;
    let mut manifest = prepare(g, "truncate", &canonical)?;
    let session = session(g);
    config.grid.level = config.study.truncation_level;
    let n_ref = config.study.truncation_reference_n_s;
    let reference = session
        .collocate(&config, n_ref, config.grid.level, config.solver.mesh_n, Provenance::Reference)?
        .result;
    let rows = session.truncation_study(&config, &ns_list, &reference)?;
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.mean_error > 0.0)
        .map(|r| ((r.n_s as f64).ln(), r.mean_error.ln()))
        .collect();
    println!(
        "reference N_s = {n_ref}, w = {}: mean {} variance {}",
        config.grid.level,
        e(reference.mean),
        e(reference.variance)
    );
    print!("{}", truncation_csv(&rows));
    if pts.len() >= 2 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let slope = fit_slope(&xs, &ys);
        println!("mean error log-log slope {slope:.4} (faster than linear: {})", slope <= -1.0);
    }
    manifest.emit(&g.out, "truncate.csv", "csv", &truncation_csv(&rows))?;
    manifest.emit(&g.out, "truncate_reference.csv", "csv", &moments_csv(&[reference]))?;
    manifest.study("truncate", "ok", None);
    manifest.finish(&g.out)?;
    Ok(())
}

pub fn plan(config_path: Option<&Path>, tol: f64, work_per_solve: f64) -> Result<(), CliError> {
    let bounds = match config_path {
        Some(p) => load_config(p)?.0.bounds,
        None => BoundParams::default(),
    };
    let plan = complexity_plan(tol, &bounds, work_per_solve)?;
    let n_s = plan.n_s_required;
    println!("tol             {}", e(plan.tol));
    println!("N_s bound       {}", e(plan.n_s_bound));
    println!("N_s             {n_s}");
    println!("mu2(N_s)        {}", e(BoundParams::mu2(n_s)));
    println!("mu3(N_s)        {}", e(bounds.mu3(n_s)));
    println!("ln Q(N_s)       {}", e(bounds.log_prefactor(n_s)));
    println!("eta threshold   {}", e(decreasing_threshold(&bounds, n_s)?));
    println!("eta base        {}", e(plan.eta_base));
    println!("eta exponent    {}", e(plan.eta_exponent));
    println!("eta             {}", e(plan.eta_required));
    println!("W_sol           {}", e(plan.work_per_solve));
    println!("W_total         {}", e(plan.work_total));
    Ok(())
}

pub fn diag(config_path: &Path) -> Result<(), CliError> {
    let (config, _) = load_config(config_path)?;
    let model = config.model.build()?;
    let a = config.solver.diffusion;
    println!("sum sqrt(lambda) sup|B|  {}", e(model.mode_sum()));
    println!("sum a_l sup|B| (y box)   {}", e(model.perturbation_bound()));
    let r = model.region_diagnostics(2, a, a, config.model.region_alpha)?;
    println!("delta_tilde    {}", e(r.delta_tilde));
    println!("c              {}", e(r.c));
    println!("gamma          {}", e(r.gamma));
    println!("beta_sector    {}", e(r.beta_sector));
    println!("beta_coercive  {}", e(r.beta_coercive));
    println!("beta_max       {}", e(r.beta_max));
    println!("tau            {}", e(r.tau));
    println!("sigma_hat      {}", e(r.sigma_hat));
    println!("alpha          {}", e(r.alpha));
    println!("B_tilde        {}", e(r.b_tilde));
    println!("D_tilde        {}", e(r.d_tilde));
    println!("C_tilde        {}", e(r.c_tilde));
    println!("epsilon        {}", e(r.epsilon));
    Ok(())
}

pub fn print_config(config_path: Option<&Path>) -> Result<(), CliError> {
    let text = match config_path {
        Some(p) => load_config(p)?.1,
        None => canonical_text(&StudyConfig::default()),
    };
    print!("{text}");
    Ok(())
}
