//! Experiment orchestration: JSON configuration, grid sweeps, and report
//! persistence as JSON and plot-ready CSV.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{evaluate_bounds, sym_eigenvalues, voigt_reuss, BoundsReport, Matrix};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::material::{
    load_csv_bitmap, load_pgm, sample_material, smooth_pixels, Inclusion, InclusionSpec, Material,
    PixelGridMaterial, Topology,
};
use crate::solver::{
    gani_homogenized, reconstruct_dual, reconstructed_as_solutions, solve_all, AuxiliarySolution, Formulation,
    SolveSettings,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Primal,
    Dual,
    Bounds,
}

/// How the dual correctors entering the lower bound are obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DualSource {
    #[default]
    Solve,
    /// From the primal correctors (odd grids only).
    Reconstruct,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// A coefficient given either as a scalar multiple of the identity or as a full matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

impl Coefficient {
    fn to_matrix(&self, d: usize) -> std::result::Result<DMatrix<f64>, String> {
        match self {
            Coefficient::Scalar(c) => Ok(DMatrix::identity(d, d) * *c),
            Coefficient::Matrix(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(format!("coefficient matrix must be {d}x{d}"));
                }
                Ok(DMatrix::from_row_iterator(d, d, rows.iter().flatten().copied()))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ShapeConfig {
    Rect {
        h: Vec<f64>,
        #[serde(default)]
        closed: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InclusionConfig {
    pub increment: Coefficient,
    pub shape: ShapeConfig,
    #[serde(default)]
    pub center: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum MaterialConfig {
    Inclusions {
        a0: Coefficient,
        #[serde(default)]
        inclusions: Vec<InclusionConfig>,
    },
    /// ASCII PGM (`.pgm`) or 0/1 CSV bitmap; relative paths resolve against the config file.
    Bitmap {
        path: String,
        a_matrix: f64,
        a_inclusion: f64,
        #[serde(default)]
        smooth: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            formats: default_formats(),
        }
    }
}

fn default_out_dir() -> String {
    "out".into()
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

fn default_tasks() -> Vec<Task> {
    vec![Task::Primal, Task::Dual, Task::Bounds]
}

fn default_name() -> String {
    "experiment".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub cell: Vec<f64>,
    pub material: MaterialConfig,
    pub grids: Vec<Vec<usize>>,
    #[serde(default = "default_tasks")]
    pub formulations: Vec<Task>,
    #[serde(default)]
    pub dual_source: DualSource,
    #[serde(default)]
    pub solver: SolveSettings,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn wants(&self, t: Task) -> bool {
        self.formulations.contains(&t)
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canon.as_bytes());
        digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// Parses and checks a configuration, reporting every violation at once.
pub fn validate_config(raw: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        serde_json::from_str(raw).map_err(|e| Error::Config(vec![format!("parse error: {e}")]))?;
    let problems = config_problems(&cfg);
    if problems.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(problems))
    }
}

fn config_problems(cfg: &ExperimentConfig) -> Vec<String> {
    let mut out = Vec::new();
    let d = cfg.cell.len();
    if !(2..=3).contains(&d) {
        out.push(format!("cell: dimension must be 2 or 3, got {d}"));
    }
    if cfg.cell.iter().any(|y| !(*y > 0.0) || !y.is_finite()) {
        out.push(format!("cell: sides must be positive, got {:?}", cfg.cell));
    }
    if cfg.grids.is_empty() {
        out.push("grids: at least one grid is required".into());
    }
    let bounds = cfg.wants(Task::Bounds);
    for n in &cfg.grids {
        if n.len() != d {
            out.push(format!("grids: {n:?} must have {d} entries"));
        }
        if n.contains(&0) {
            out.push(format!("grids: {n:?} has an empty axis"));
        }
        let odd = n.iter().all(|v| v % 2 == 1);
        if bounds && !odd {
            out.push(format!("grids: {n:?} is even but bounds require odd grids"));
        } else if cfg.dual_source == DualSource::Reconstruct && cfg.wants(Task::Dual) && !odd {
            out.push(format!("grids: {n:?} is even but dual reconstruction requires odd grids"));
        }
    }
    if cfg.formulations.is_empty() {
        out.push("formulations: nothing to compute".into());
    }
    if let Err(e) = cfg.solver.validate() {
        out.push(format!("solver: {e}"));
    }
    match &cfg.material {
        MaterialConfig::Inclusions { a0, inclusions } => match inclusion_spec(&cfg.cell, a0, inclusions) {
            Err(p) => out.extend(p.into_iter().map(|p| format!("material: {p}"))),
            Ok(spec) => {
                if bounds && spec.has_overlap() {
                    out.push("material: bounds need non-overlapping inclusions (exact inverse field)".into());
                }
            }
        },
        MaterialConfig::Bitmap {
            a_matrix, a_inclusion, smooth, ..
        } => {
            if !(*a_matrix > 0.0 && *a_inclusion > 0.0) {
                out.push("material: phase coefficients must be positive".into());
            }
            if *smooth && d != 2 {
                out.push("material: smoothing is defined for 2D bitmaps only".into());
            }
        }
    }
    out
}

fn inclusion_spec(
    cell: &[f64],
    a0: &Coefficient,
    inclusions: &[InclusionConfig],
) -> std::result::Result<InclusionSpec, Vec<String>> {
    let d = cell.len();
    let mut problems = Vec::new();
    let a0m = a0.to_matrix(d).map_err(|e| vec![format!("a0: {e}")])?;
    let mut incs = Vec::new();
    for (j, inc) in inclusions.iter().enumerate() {
        match inc.increment.to_matrix(d) {
            Err(e) => problems.push(format!("inclusion {j}: {e}")),
            Ok(increment) => {
                let ShapeConfig::Rect { h, closed } = &inc.shape;
                incs.push(Inclusion {
                    increment,
                    topology: Topology::Rect {
                        h: h.clone(),
                        closed: *closed,
                    },
                    center: inc.center.clone().unwrap_or_else(|| vec![0.0; d]),
                });
            }
        }
    }
    problems.extend(InclusionSpec::problems(cell, &a0m, &incs));
    if !problems.is_empty() {
        return Err(problems);
    }
    InclusionSpec::new(cell, a0m, incs).map_err(|e| vec![e.to_string()])
}

/// Builds the material, reading bitmaps relative to `base_dir`.
pub fn build_material(cfg: &ExperimentConfig, base_dir: &Path) -> Result<Material> {
    match &cfg.material {
        MaterialConfig::Inclusions { a0, inclusions } => Ok(Material::Inclusions(
            inclusion_spec(&cfg.cell, a0, inclusions).map_err(Error::Config)?,
        )),
        MaterialConfig::Bitmap {
            path,
            a_matrix,
            a_inclusion,
            smooth,
        } => {
            let p = base_dir.join(path);
            let (shape, ind) = if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
                load_pgm(&p)?
            } else {
                load_csv_bitmap(&p)?
            };
            let mut pm = PixelGridMaterial::new(&cfg.cell, &shape, ind, *a_matrix, *a_inclusion)?;
            if *smooth {
                pm = smooth_pixels(&pm)?;
            }
            Ok(Material::Pixels(pm))
        }
    }
}

fn collect_diagnostics(sols: &[AuxiliarySolution]) -> (Vec<usize>, Vec<f64>, bool) {
    (
        sols.iter().map(|s| s.iterations).collect(),
        sols.iter().map(|s| s.final_residual).collect(),
        sols.iter().all(|s| s.converged),
    )
}

/// Sample, solve and bound on a single grid.
pub fn run_grid(cfg: &ExperimentConfig, material: &Material, points: &[usize]) -> BoundsReport {
    let mut report = BoundsReport {
        grid: points.to_vec(),
        cell: cfg.cell.clone(),
        ..Default::default()
    };
    if let Err(e) = run_grid_into(cfg, material, points, &mut report) {
        report.failure = Some(e.to_string());
    }
    report
}

fn run_grid_into(cfg: &ExperimentConfig, material: &Material, points: &[usize], r: &mut BoundsReport) -> Result<()> {
    let grid = GridSpec::new(&cfg.cell, points)?;
    match voigt_reuss(material) {
        Ok((v, re)) => {
            r.voigt = Some((&v).into());
            r.reuss = Some((&re).into());
        }
        Err(e) => r.diagnostics.warnings.push(format!("voigt/reuss: {e}")),
    }
    let mg = sample_material(material, &grid)?;
    let bounds = cfg.wants(Task::Bounds);
    let reconstruct = cfg.dual_source == DualSource::Reconstruct && grid.is_odd();
    let need_primal = cfg.wants(Task::Primal) || bounds || (cfg.wants(Task::Dual) && reconstruct);
    let need_dual = cfg.wants(Task::Dual) || bounds;
    r.diagnostics.converged = true;

    let mut primal = None;
    let mut a_gani = None;
    if need_primal {
        let sols = solve_all(&mg, Formulation::Primal, &cfg.solver)?;
        let (it, res, conv) = collect_diagnostics(&sols);
        r.diagnostics.primal_iterations = it;
        r.diagnostics.primal_residuals = res;
        r.diagnostics.converged &= conv;
        let h = gani_homogenized(&mg, &sols, Formulation::Primal)?;
        r.diagnostics.asymmetry = h.asymmetry;
        r.a_gani = Some((&h.matrix).into());
        a_gani = Some(h.matrix);
        primal = Some(sols);
    }
    let mut dual = None;
    if need_dual {
        let sols = match (&primal, &a_gani, reconstruct) {
            (Some(p), Some(a), true) => {
                r.diagnostics.dual_source = Some("reconstructed".into());
                let duals = reconstruct_dual(p, &mg, a)?;
                r.diagnostics.dual_residuals = duals.iter().map(|d| d.optimality_residual).collect();
                r.diagnostics.dual_iterations = vec![0; duals.len()];
                reconstructed_as_solutions(duals)
            }
            _ => {
                r.diagnostics.dual_source = Some("solved".into());
                let sols = solve_all(&mg, Formulation::Dual, &cfg.solver)?;
                let (it, res, conv) = collect_diagnostics(&sols);
                r.diagnostics.dual_iterations = it;
                r.diagnostics.dual_residuals = res;
                r.diagnostics.converged &= conv;
                sols
            }
        };
        let h = gani_homogenized(&mg, &sols, Formulation::Dual)?;
        r.diagnostics.asymmetry = r.diagnostics.asymmetry.max(h.asymmetry);
        let b_inv = crate::material::spd_inverse(&h.matrix)?;
        r.b_gani_inv = Some((&b_inv).into());
        if let Some(a) = &a_gani {
            r.diagnostics.gap_eigenvalues = Some(sym_eigenvalues(&(a - &b_inv)));
        }
        dual = Some(sols);
    }
    if !r.diagnostics.converged {
        r.diagnostics
            .warnings
            .push(format!("CG stopped at max_iter = {} before reaching tol", cfg.solver.max_iter));
    }
    if bounds {
        let (p, d) = (primal.as_deref().unwrap_or(&[]), dual.as_deref().unwrap_or(&[]));
        let ul = evaluate_bounds(material, &grid, p, d)?;
        let (na, nb) = ul.non_spd_points;
        r.diagnostics.non_spd_double_grid_points = vec![na, nb];
        if na + nb > 0 {
            r.diagnostics.warnings.push(format!(
                "truncated double-grid coefficients are not positive definite at {na} (A) and {nb} (A⁻¹) points"
            ));
        }
        r.set_bounds(&ul.a_upper, &ul.b_lower_inv);
    }
    Ok(())
}

/// Runs every grid of the sweep, at most `jobs` at a time; results keep grid order.
pub fn run_experiment(cfg: &ExperimentConfig, material: &Material, jobs: usize) -> Vec<BoundsReport> {
    if jobs <= 1 {
        return cfg.grids.iter().map(|n| run_grid(cfg, material, n)).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| cfg.grids.par_iter().map(|n| run_grid(cfg, material, n)).collect()),
        Err(_) => cfg.grids.iter().map(|n| run_grid(cfg, material, n)).collect(),
    }
}

/// The JSON document written per sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepDocument {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub reports: Vec<BoundsReport>,
}

const MATRIX_COLUMNS: [&str; 8] = [
    "a_gani",
    "b_gani_inv",
    "a_upper",
    "b_lower_inv",
    "mean",
    "error",
    "voigt",
    "reuss",
];

fn report_matrix<'a>(r: &'a BoundsReport, name: &str) -> Option<&'a Matrix> {
    match name {
        "a_gani" => r.a_gani.as_ref(),
        "b_gani_inv" => r.b_gani_inv.as_ref(),
        "a_upper" => r.a_upper.as_ref(),
        "b_lower_inv" => r.b_lower_inv.as_ref(),
        "mean" => r.mean.as_ref(),
        "error" => r.error.as_ref(),
        "voigt" => r.voigt.as_ref(),
        "reuss" => r.reuss.as_ref(),
        _ => None,
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// One header line plus one row per grid. Columns: `grid`, `status`, the
/// row-major entries `<matrix>_<row><col>` (1-based) of each matrix in
/// [`MATRIX_COLUMNS`] order, `gap_min_eig`, `primal_iterations`,
/// `dual_iterations`. Floats carry 17 significant digits; missing values are empty.
pub fn csv_report(reports: &[BoundsReport], d: usize) -> String {
    let mut out = String::from("grid,status");
    for m in MATRIX_COLUMNS {
        for i in 1..=d {
            for j in 1..=d {
                let _ = write!(out, ",{m}_{i}{j}");
            }
        }
    }
    out.push_str(",gap_min_eig,primal_iterations,dual_iterations\n");
    for r in reports {
        let grid: Vec<String> = r.grid.iter().map(|n| n.to_string()).collect();
        out.push_str(&grid.join("x"));
        out.push(',');
        out.push_str(match (&r.failure, r.diagnostics.converged) {
            (Some(_), _) => "failed",
            (None, true) => "ok",
            (None, false) => "unconverged",
        });
        for m in MATRIX_COLUMNS {
            match report_matrix(r, m) {
                Some(mat) => mat.data.iter().for_each(|v| {
                    out.push(',');
                    out.push_str(&num(*v));
                }),
                None => (0..d * d).for_each(|_| out.push(',')),
            }
        }
        out.push(',');
        if let Some(ev) = &r.diagnostics.gap_eigenvalues {
            out.push_str(&num(ev[0]));
        }
        let join = |v: &[usize]| v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";");
        let _ = writeln!(
            out,
            ",{},{}",
            join(&r.diagnostics.primal_iterations),
            join(&r.diagnostics.dual_iterations)
        );
    }
    out
}

/// Writes `<name>.json` and/or `<name>.csv` into `dir`.
pub fn emit_report(
    cfg: &ExperimentConfig,
    reports: &[BoundsReport],
    dir: &Path,
    formats: &[Format],
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for f in formats {
        let (path, body) = match f {
            Format::Json => {
                let doc = SweepDocument {
                    config: cfg.clone(),
                    config_hash: cfg.hash(),
                    reports: reports.to_vec(),
                };
                (dir.join(format!("{}.json", cfg.name)), serde_json::to_string_pretty(&doc)? + "\n")
            }
            Format::Csv => (dir.join(format!("{}.csv", cfg.name)), csv_report(reports, cfg.cell.len())),
        };
        std::fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "cell": [1, 1],
        "material": {"type": "inclusions", "a0": 2.0},
        "grids": [[5, 5]]
    }"#;

    #[test]
    fn minimal_config_is_accepted() {
        let cfg = validate_config(MINIMAL).unwrap();
        assert_eq!(cfg.formulations, default_tasks());
        assert_eq!(cfg.solver, SolveSettings::default());
        assert_eq!(cfg.name, "experiment");
    }

    #[test]
    fn even_grid_with_bounds_is_rejected() {
        let raw = MINIMAL.replace("[[5, 5]]", "[[4, 4], [5, 5]]");
        let Err(Error::Config(p)) = validate_config(&raw) else { panic!() };
        assert_eq!(p.len(), 1);
        assert!(p[0].contains("odd"), "{p:?}");
        let ok = raw.replace(r#""grids""#, r#""formulations": ["primal", "dual"], "grids""#);
        assert!(validate_config(&ok).is_ok());
    }

    #[test]
    fn every_violation_is_listed() {
        let raw = r#"{
            "cell": [2, 2],
            "material": {"type": "inclusions", "a0": 1.0,
                "inclusions": [{"increment": 10.0, "shape": {"type": "rect", "h": [3, 3]}}]},
            "grids": [[4, 4]],
            "solver": {"tol": -1}
        }"#;
        let Err(Error::Config(p)) = validate_config(raw) else { panic!() };
        assert_eq!(p.len(), 3, "{p:?}");
        assert!(p.iter().any(|s| s.contains("exceed") || s.contains("h <= Y")));
    }

    #[test]
    fn parse_errors_carry_position() {
        let Err(Error::Config(p)) = validate_config("{\n \"cell\": [1, 1],\n \"bogus\": 1 }") else {
            panic!()
        };
        assert!(p[0].contains("line"), "{p:?}");
    }

    #[test]
    fn homogeneous_run() {
        let cfg = validate_config(MINIMAL).unwrap();
        let mat = build_material(&cfg, Path::new(".")).unwrap();
        let reports = run_experiment(&cfg, &mat, 1);
        assert_eq!(reports.len(), 1);
        let r = &reports[0];
        assert!(r.failure.is_none());
        let two = DMatrix::identity(2, 2) * 2.0;
        for m in [&r.a_gani, &r.a_upper, &r.b_lower_inv, &r.voigt, &r.reuss] {
            assert!((DMatrix::from(m.as_ref().unwrap()) - &two).amax() < 1e-14);
        }
        assert!(DMatrix::from(r.error.as_ref().unwrap()).amax() < 1e-14);
    }

    #[test]
    fn csv_shape() {
        let cfg = validate_config(&MINIMAL.replace("[[5, 5]]", "[[3, 3], [5, 5], [7, 7]]")).unwrap();
        let mat = build_material(&cfg, Path::new(".")).unwrap();
        let csv = csv_report(&run_experiment(&cfg, &mat, 2), 2);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        let cols = lines[0].split(',').count();
        assert_eq!(cols, 2 + 8 * 4 + 3);
        assert!(lines.iter().all(|l| l.split(',').count() == cols));
        assert!(lines[2].starts_with("5x5,ok,"));
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = validate_config(MINIMAL).unwrap();
        let b = validate_config(MINIMAL).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = validate_config(&MINIMAL.replace("2.0", "3.0")).unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
