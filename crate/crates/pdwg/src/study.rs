//! Refinement-ladder convergence studies.
//!
//! A study runs one problem over a list of nominal resolutions `1/h`
//! (power-of-two multiples of the coarse resolution 2), assembling, solving
//! and analyzing each level, and emits a markdown table, a CSV per the fixed
//! schema, and a raster of the finest solution.

use crate::analysis::{
    conservation_residual, error_norms, flux_jump, load_l2_norm, sample_field, seminorms, ErrorReport,
    LevelReport,
};
use crate::assembly::assemble;
use crate::mesh::{coarse_mesh, Domain, Mesh};
use crate::problem::{builtin, DomainChoice, ExampleId, ProblemSpec};
use crate::solver::{solve, SolveOptions};
use crate::space::WgSpace;
use crate::{Error, Result};
use std::path::PathBuf;
use std::sync::Arc;

/// Coarse nominal resolution of the structured meshes (2 cells per unit).
pub const COARSE_INV_H: usize = 2;

/// Configuration of a single study or solve.
#[derive(Clone)]
pub struct StudyConfig {
    pub example: ExampleId,
    pub k: usize,
    pub l: usize,
    pub tau1: f64,
    pub tau2: f64,
    pub domain: DomainChoice,
    /// Nominal resolutions `1/h`, strictly increasing powers of two.
    pub levels: Vec<usize>,
    pub solver: SolveOptions,
    pub quad_degree: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub raster_resolution: usize,
}

impl StudyConfig {
    /// Defaults mirroring the reference experiments: `tau1 = tau2 = 1`,
    /// direct solver, quadrature exactness `2k + 4`.
    pub fn new(example: ExampleId, k: usize, l: usize, levels: Vec<usize>) -> Self {
        StudyConfig {
            example,
            k,
            l,
            tau1: 1.0,
            tau2: 1.0,
            domain: example.default_domain(),
            levels,
            solver: SolveOptions::direct(),
            quad_degree: None,
            out_dir: None,
            raster_resolution: 201,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::Config("levels list is empty".into()));
        }
        for w in self.levels.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Config("levels must be strictly increasing".into()));
            }
        }
        for &inv_h in &self.levels {
            refinements_for(inv_h)?;
        }
        if self.k < 1 || (self.l != self.k && self.l + 1 != self.k) {
            return Err(Error::InvalidDegrees { k: self.k, l: self.l });
        }
        Ok(())
    }

    pub fn domain_geometry(&self) -> Domain {
        match self.domain {
            DomainChoice::UnitSquare => Domain::unit_square(),
            DomainChoice::LShape => Domain::l_shape(),
        }
    }

    pub fn problem(&self) -> ProblemSpec {
        builtin(self.example)
    }
}

/// Number of uniform refinements from the coarse mesh to resolution `1/h`.
pub fn refinements_for(inv_h: usize) -> Result<usize> {
    if inv_h < COARSE_INV_H || !inv_h.is_power_of_two() {
        return Err(Error::Config(format!(
            "level {inv_h} is not a power-of-two multiple of the coarse resolution {COARSE_INV_H}"
        )));
    }
    Ok(inv_h.trailing_zeros() as usize - COARSE_INV_H.trailing_zeros() as usize)
}

/// Build the tagged mesh of one level.
pub fn level_mesh(config: &StudyConfig, problem: &ProblemSpec, inv_h: usize) -> Result<Mesh> {
    let mut mesh = coarse_mesh(&config.domain_geometry())?;
    for _ in 0..refinements_for(inv_h)? {
        mesh = mesh.refine_uniform();
    }
    let classifier = problem.classifier.clone();
    Ok(mesh.tag_boundary(move |m, n| classifier(m, n)))
}

/// Outcome of one solved level: the report row plus the full coefficient
/// vector and its space (for rasters and further inspection).
pub struct SolvedLevel {
    pub report: LevelReport,
    pub solution: Vec<f64>,
    pub space: WgSpace,
}

/// Assemble, solve and analyze a single level.
pub fn solve_level(config: &StudyConfig, problem: &ProblemSpec, inv_h: usize) -> Result<SolvedLevel> {
    let mesh = Arc::new(level_mesh(config, problem, inv_h)?);
    let mut space = WgSpace::new(mesh, config.k, config.l, config.tau1, config.tau2)?;
    if let Some(d) = config.quad_degree {
        space = space.with_quad_degree(d)?;
    }
    let system = assemble(&space, problem)?;
    let (x, solve_report) = solve(&system, &config.solver)?;
    let solution = system.recover_full(&x);

    let norms = if problem.exact.is_some() {
        Some(error_norms(&solution, problem, &space)?)
    } else {
        None
    };
    let (seminorm_u, seminorm_lambda) = seminorms(&solution, problem, &space)?;
    let cons = conservation_residual(&solution, problem, &space)?;
    let cons_residual = cons.into_iter().fold(0.0, f64::max);
    let jump = flux_jump(&solution, &space);

    let report = LevelReport {
        inv_h,
        h: space.mesh.h,
        n_unknowns: system.n_free(),
        norms,
        seminorm_u,
        seminorm_lambda,
        cons_residual,
        flux_jump: jump,
        solve: solve_report,
    };
    Ok(SolvedLevel { report, solution, space })
}

/// Completed study: all level rows plus where the outputs were written.
pub struct StudyReport {
    pub config: StudyConfig,
    pub report: ErrorReport,
    pub files: Vec<PathBuf>,
}

impl StudyReport {
    pub fn title(&self) -> String {
        format!(
            "{} k={} l={} tau=({}, {})",
            self.config.problem().name,
            self.config.k,
            self.config.l,
            self.config.tau1,
            self.config.tau2
        )
    }
}

/// Run a refinement ladder. Output files are rewritten after every level so
/// partial results survive a failed solve.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    let problem = config.problem();
    let mut report = ErrorReport { rows: Vec::new() };
    let mut files = Vec::new();
    let mut finest: Option<SolvedLevel> = None;

    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir)?;
    }

    for &inv_h in &config.levels {
        let outcome = solve_level(config, &problem, inv_h);
        match outcome {
            Ok(level) => {
                report.rows.push(level.report.clone());
                finest = Some(level);
                write_outputs(config, &problem, &report, finest.as_ref(), &mut files)?;
            }
            Err(err) => {
                // keep partial outputs on failure
                write_outputs(config, &problem, &report, finest.as_ref(), &mut files)?;
                return Err(err);
            }
        }
    }
    Ok(StudyReport { config: config.clone(), report, files })
}

fn write_outputs(
    config: &StudyConfig,
    problem: &ProblemSpec,
    report: &ErrorReport,
    finest: Option<&SolvedLevel>,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let Some(dir) = &config.out_dir else {
        return Ok(());
    };
    let csv = report.to_csv(&problem.name, config.k, config.l, config.tau1, config.tau2);
    let csv_path = dir.join("report.csv");
    std::fs::write(&csv_path, csv)?;
    let title = format!(
        "{} k={} l={} tau=({}, {})",
        problem.name, config.k, config.l, config.tau1, config.tau2
    );
    let md_path = dir.join("report.md");
    std::fs::write(&md_path, report.to_markdown(&title))?;
    for p in [csv_path, md_path] {
        if !files.contains(&p) {
            files.push(p);
        }
    }
    if let Some(level) = finest {
        let raster = sample_field(&level.solution, &level.space, config.raster_resolution);
        let path = dir.join("field.csv");
        std::fs::write(&path, raster.to_csv())?;
        if !files.contains(&path) {
            files.push(path);
        }
    }
    Ok(())
}

/// Max-norm conservation check scaled per the acceptance threshold
/// `1e-8 (1 + ||f||)`.
pub fn conservation_threshold(problem: &ProblemSpec, space: &WgSpace) -> Result<f64> {
    Ok(1e-8 * (1.0 + load_l2_norm(problem, space)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::LoadChoice;

    #[test]
    fn refinement_count() {
        assert_eq!(refinements_for(2).unwrap(), 0);
        assert_eq!(refinements_for(4).unwrap(), 1);
        assert_eq!(refinements_for(64).unwrap(), 5);
        assert!(refinements_for(3).is_err());
        assert!(refinements_for(1).is_err());
    }

    #[test]
    fn empty_levels_rejected() {
        let config = StudyConfig::new(ExampleId::Ex1, 1, 1, vec![]);
        assert!(matches!(config.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn non_increasing_levels_rejected() {
        let config = StudyConfig::new(ExampleId::Ex1, 1, 1, vec![4, 4]);
        assert!(config.validate().is_err());
        let config = StudyConfig::new(ExampleId::Ex1, 1, 1, vec![8, 4]);
        assert!(config.validate().is_err());
    }

    #[test]
    fn small_ladder_runs_and_rates_sane() {
        let config = StudyConfig::new(ExampleId::Ex1, 1, 1, vec![4, 8]);
        let study = run_study(&config).unwrap();
        assert_eq!(study.report.rows.len(), 2);
        let rates = crate::analysis::rates(&study.report);
        let e0_rate = rates[1][3].unwrap();
        assert!(e0_rate > 1.5, "e0 rate {e0_rate}");
    }

    #[test]
    fn study_without_exact_solution_has_no_norms() {
        let config = StudyConfig::new(ExampleId::Ex4 { f: LoadChoice::One }, 1, 0, vec![4]);
        let study = run_study(&config).unwrap();
        assert!(study.report.rows[0].norms.is_none());
        assert!(study.report.rows[0].cons_residual < 1e-8 * 2.0);
    }

    #[test]
    fn outputs_written_and_deterministic() {
        let dir = std::env::temp_dir().join(format!("pdwg-study-{}", std::process::id()));
        let mut config = StudyConfig::new(ExampleId::Ex1, 1, 1, vec![4]);
        config.out_dir = Some(dir.clone());
        config.raster_resolution = 21;
        run_study(&config).unwrap();
        let csv1 = std::fs::read(dir.join("report.csv")).unwrap();
        let md1 = std::fs::read(dir.join("report.md")).unwrap();
        let field1 = std::fs::read(dir.join("field.csv")).unwrap();
        run_study(&config).unwrap();
        assert_eq!(csv1, std::fs::read(dir.join("report.csv")).unwrap());
        assert_eq!(md1, std::fs::read(dir.join("report.md")).unwrap());
        assert_eq!(field1, std::fs::read(dir.join("field.csv")).unwrap());
        std::fs::remove_dir_all(&dir).ok();
    }
}
