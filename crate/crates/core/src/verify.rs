//! The acceptance suite as library code, shared by the CLI and the
//! integration tests. Expensive intermediate results (the `t = 0` spectrum,
//! the origin slopes, the sweep) are computed once per [`Verifier`].

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Mutex, OnceLock};

use serde::Serialize;

use crate::eigensolve::{self, DENSE_LIMIT};
use crate::error::Result;
use crate::fem::{assemble_mass, assemble_stiffness, build_dofmap, double_cover_weight};
use crate::mesh::{
    build_full_disk_mesh, build_half_disk_mesh, unit_square_mesh, BoundaryTag, Mesh,
};
use crate::specfun::{self, bessel_zeros, interlacing_check, BesselOrder};
use crate::spectra::{
    self, ab_spectrum, branch_slope_at_origin, double_cover_spectrum, feynman_hellmann_slope,
    fit_tip_coefficient, mixed_spectrum, plain_disk_dirichlet, sweep, unit_square_dirichlet,
    verify_t1_endpoint, ABSpectrum, MeshLevel, MixedProblemSpec, SlopeEstimate, SweepResult,
    Variant, COARSE_LEVELS, DEFAULT_FD_STEP, DEFAULT_LEVELS,
};

pub const SOLVER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Suite {
    All,
    Specfun,
    Fem,
    Spectra,
}

impl Suite {
    pub fn criteria(self) -> &'static [u8] {
        match self {
            Suite::All => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
            Suite::Specfun => &[1, 2],
            Suite::Fem => &[3, 10],
            Suite::Spectra => &[4, 5, 6, 7, 8, 9],
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "all" => Some(Suite::All),
            "specfun" => Some(Suite::Specfun),
            "fem" => Some(Suite::Fem),
            "spectra" => Some(Suite::Spectra),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub levels: Vec<MeshLevel>,
    pub disk_levels: Vec<u32>,
    pub square_grids: Vec<usize>,
    pub fd_step: f64,
    /// Multiplies every discretization tolerance; 1 for the acceptance run.
    pub tolerance_scale: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            levels: DEFAULT_LEVELS.to_vec(),
            disk_levels: vec![4, 5, 6],
            square_grids: vec![8, 16, 32],
            fd_step: DEFAULT_FD_STEP,
            tolerance_scale: 1.0,
        }
    }
}

impl VerifyConfig {
    /// Cheaper meshes with tolerances widened threefold.
    pub fn coarse() -> Self {
        Self {
            levels: COARSE_LEVELS.to_vec(),
            disk_levels: vec![3, 4, 5],
            square_grids: vec![4, 8, 16],
            fd_step: DEFAULT_FD_STEP,
            tolerance_scale: 3.0,
        }
    }

    pub fn is_widened(&self) -> bool {
        self.tolerance_scale != 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub label: String,
    pub measured: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn relative(label: impl Into<String>, measured: f64, target: f64, tolerance: f64) -> Self {
        let pass = ((measured - target) / target).abs() <= tolerance;
        Self {
            label: label.into(),
            measured,
            target,
            tolerance,
            pass,
        }
    }

    fn absolute(label: impl Into<String>, measured: f64, target: f64, tolerance: f64) -> Self {
        let pass = (measured - target).abs() <= tolerance;
        Self {
            label: label.into(),
            measured,
            target,
            tolerance,
            pass,
        }
    }

    /// `measured ≤ bound`.
    fn at_most(label: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self {
            label: label.into(),
            measured,
            target: bound,
            tolerance: 0.0,
            pass: measured <= bound,
        }
    }

    fn less_than(label: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self {
            pass: measured < bound,
            ..Self::at_most(label, measured, bound)
        }
    }

    fn flag(label: impl Into<String>, pass: bool) -> Self {
        Self {
            label: label.into(),
            measured: if pass { 1.0 } else { 0.0 },
            target: 1.0,
            tolerance: 0.0,
            pass,
        }
    }
}

fn number(x: f64) -> String {
    if x == 0.0 || (1e-3..1e6).contains(&x.abs()) {
        format!("{x:.10}")
    } else {
        format!("{x:.4e}")
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: measured {} target {} tol {:.1e}",
            if self.pass { "ok  " } else { "FAIL" },
            self.label,
            number(self.measured),
            number(self.target),
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub name: &'static str,
    pub checks: Vec<Check>,
    pub widened: bool,
    /// Set when the computation itself failed.
    pub error: Option<String>,
    pub seconds: f64,
}

impl CriterionReport {
    pub fn pass(&self) -> bool {
        self.error.is_none() && !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} [{}] {} ({:.1} s{})",
            self.id,
            if self.pass() { "PASS" } else { "FAIL" },
            self.name,
            self.seconds,
            if self.widened {
                ", widened tolerances"
            } else {
                ""
            }
        )?;
        if let Some(e) = &self.error {
            write!(f, "\n    error: {e}")?;
        }
        for c in &self.checks {
            write!(f, "\n    {c}")?;
        }
        Ok(())
    }
}

pub fn criterion_name(id: u8) -> &'static str {
    match id {
        1 => "Bessel zeros",
        2 => "interlacing chain",
        3 => "FEM validation",
        4 => "double eigenvalue at the centre",
        5 => "double-cover equivalence",
        6 => "branch slopes",
        7 => "Feynman-Hellmann consistency",
        8 => "branch sweep",
        9 => "endpoint t = 1",
        10 => "solver hygiene",
        _ => "unknown",
    }
}

/// Runs criteria on demand, sharing the costly intermediate results.
pub struct Verifier {
    pub config: VerifyConfig,
    centre: OnceLock<Result<ABSpectrum>>,
    slope: OnceLock<Result<SlopeEstimate>>,
    sweep: OnceLock<Result<SweepResult>>,
    worst_residual: Mutex<f64>,
}

impl Verifier {
    pub fn new(config: VerifyConfig) -> Self {
        Self {
            config,
            centre: OnceLock::new(),
            slope: OnceLock::new(),
            sweep: OnceLock::new(),
            worst_residual: Mutex::new(0.0),
        }
    }

    fn note_residual(&self, r: f64) {
        let mut w = self.worst_residual.lock().expect("poisoned");
        *w = w.max(r);
    }

    /// Largest eigensolver residual among all solves run so far.
    pub fn worst_residual(&self) -> f64 {
        *self.worst_residual.lock().expect("poisoned")
    }

    fn centre(&self) -> Result<&ABSpectrum> {
        let r = self.centre.get_or_init(|| {
            let ab = ab_spectrum(0.0, 4, &self.config.levels)?;
            self.note_residual(ab.dn.max_solver_residual().max(ab.nd.max_solver_residual()));
            Ok(ab)
        });
        r.as_ref().map_err(Clone::clone)
    }

    fn slope(&self) -> Result<&SlopeEstimate> {
        self.slope
            .get_or_init(|| {
                branch_slope_at_origin(Variant::ND, self.config.fd_step, &self.config.levels)
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    fn sweep(&self) -> Result<&SweepResult> {
        let r = self.sweep.get_or_init(|| {
            let s = sweep(&spectra::default_grid(), 2, &self.config.levels)?;
            for p in &s.points {
                self.note_residual(p.max_solver_residual);
            }
            Ok(s)
        });
        r.as_ref().map_err(Clone::clone)
    }

    fn scale(&self, tol: f64) -> f64 {
        tol * self.config.tolerance_scale
    }

    pub fn run(&self, id: u8) -> CriterionReport {
        let start = std::time::Instant::now();
        let (widened, outcome) = match id {
            1 => (false, self.bessel_zeros()),
            2 => (false, self.interlacing()),
            3 => (self.config.is_widened(), self.fem_validation()),
            4 => (self.config.is_widened(), self.centre_double()),
            5 => (self.config.is_widened(), self.double_cover()),
            6 => (self.config.is_widened(), self.branch_slopes()),
            7 => (self.config.is_widened(), self.feynman_hellmann()),
            8 => (false, self.branch_sweep()),
            9 => (self.config.is_widened(), self.endpoint()),
            10 => (false, self.hygiene()),
            _ => (false, Ok(Vec::new())),
        };
        let (checks, error) = match outcome {
            Ok(c) => (c, None),
            Err(e) => (Vec::new(), Some(e.to_string())),
        };
        CriterionReport {
            id,
            name: criterion_name(id),
            checks,
            widened,
            error,
            seconds: start.elapsed().as_secs_f64(),
        }
    }

    pub fn run_suite(&self, suite: Suite) -> Vec<CriterionReport> {
        suite.criteria().iter().map(|&id| self.run(id)).collect()
    }

    fn bessel_zeros(&self) -> Result<Vec<Check>> {
        let mut checks = Vec::new();
        let half = bessel_zeros(BesselOrder::half(), 5)?;
        for (k, z) in half.zeros.iter().enumerate() {
            checks.push(Check::absolute(
                format!("z(1/2,{})", k + 1),
                *z,
                (k + 1) as f64 * PI,
                1e-12,
            ));
        }
        let z32 = bessel_zeros(BesselOrder::new(3)?, 1)?.zeros[0];
        checks.push(Check::absolute("z(3/2,1)", z32, 4.493409457909064, 1e-9));
        let z0 = bessel_zeros(BesselOrder::integer(0), 1)?.zeros[0];
        checks.push(Check::absolute("z(0,1)", z0, 2.404825557695773, 1e-9));
        Ok(checks)
    }

    fn interlacing(&self) -> Result<Vec<Check>> {
        let z = |twice: u32, k: usize| -> Result<f64> {
            Ok(bessel_zeros(BesselOrder::new(twice)?, k)?.zeros[k - 1])
        };
        let chain = [z(1, 1)?, z(3, 1)?, z(5, 1)?, z(1, 2)?, z(7, 1)?];
        let labels = ["z(1/2,1)", "z(3/2,1)", "z(5/2,1)", "z(1/2,2)", "z(7/2,1)"];
        let mut checks: Vec<Check> = chain
            .windows(2)
            .zip(labels.windows(2))
            .map(|(w, l)| Check::less_than(format!("{} < {}", l[0], l[1]), w[0], w[1]))
            .collect();
        checks.push(Check::flag(
            "full chain up to order 29/2",
            interlacing_check(29, 10)?.pass,
        ));
        Ok(checks)
    }

    fn fem_validation(&self) -> Result<Vec<Check>> {
        let disk = plain_disk_dirichlet(1, &self.config.disk_levels, SOLVER_TOL)?;
        let square = unit_square_dirichlet(1, &self.config.square_grids, SOLVER_TOL)?;
        let z01 = specfun::zero_squared(BesselOrder::integer(0), 1)?;
        Ok(vec![
            Check::relative(
                "disk Dirichlet lambda1",
                disk.values[0],
                z01,
                self.scale(0.005),
            ),
            Check::relative(
                "unit square lambda1",
                square.values[0],
                2.0 * PI * PI,
                self.scale(0.005),
            ),
        ])
    }

    fn centre_double(&self) -> Result<Vec<Check>> {
        let ab = self.centre()?;
        let z32 = specfun::zero_squared(BesselOrder::new(3)?, 1)?;
        let e = &ab.entries;
        let tol = self.scale(0.01);
        Ok(vec![
            Check::relative("lambda1", e[0].lambda, PI * PI, tol),
            Check::relative("lambda2", e[1].lambda, PI * PI, tol),
            Check::at_most(
                "pair gap below double threshold",
                (e[1].lambda - e[0].lambda).abs(),
                spectra::DOUBLE_FACTOR * (e[0].residual + e[1].residual),
            ),
            Check::relative("lambda3", e[2].lambda, z32, tol),
            Check::relative("lambda4", e[3].lambda, z32, tol),
        ])
    }

    fn double_cover(&self) -> Result<Vec<Check>> {
        let ab = self.centre()?;
        let dc = double_cover_spectrum(7, &self.config.disk_levels, SOLVER_TOL)?;
        for l in &dc.levels {
            self.note_residual(l.max_solver_residual);
        }
        let tol = self.scale(0.01);
        let mut checks = Vec::new();
        for (j, e) in ab.entries.iter().enumerate() {
            let v = dc.antiperiodic.values.get(j).copied().unwrap_or(f64::NAN);
            checks.push(Check::relative(
                format!("antiperiodic {}", j + 1),
                v,
                e.lambda,
                tol,
            ));
        }
        let z01 = specfun::zero_squared(BesselOrder::integer(0), 1)?;
        let z11 = specfun::zero_squared(BesselOrder::integer(1), 1)?;
        for (j, target) in [z01, z11, z11].into_iter().enumerate() {
            let v = dc.periodic.values.get(j).copied().unwrap_or(f64::NAN);
            checks.push(Check::relative(
                format!("periodic {}", j + 1),
                v,
                target,
                tol,
            ));
        }
        checks.push(Check::at_most(
            "parity defect",
            dc.worst_parity_defect(),
            0.05,
        ));
        Ok(checks)
    }

    fn branch_slopes(&self) -> Result<Vec<Check>> {
        let s = self.slope()?;
        let dn = -s.slope;
        let tol = self.scale(0.10);
        Ok(vec![
            Check::relative("ND slope", s.slope, -PI * PI, tol),
            Check::relative("DN slope", dn, PI * PI, tol),
            Check::at_most("slope sum", (s.slope + dn).abs(), 2.0 * s.error_estimate),
        ])
    }

    fn feynman_hellmann(&self) -> Result<Vec<Check>> {
        let ab = self.centre()?;
        let s = self.slope()?;
        let b = fit_tip_coefficient(&ab.nd, 0)?.coefficient;
        let a = fit_tip_coefficient(&ab.dn, 0)?.coefficient;
        let tol = self.scale(0.10);
        Ok(vec![
            Check::relative("B^2", b * b, 2.0 * PI, tol),
            Check::relative("A^2", a * a, 2.0 * PI, tol),
            Check::relative(
                "FH slope branch 1",
                feynman_hellmann_slope(0.0, b),
                s.slope,
                self.scale(0.15),
            ),
            Check::relative(
                "FH slope branch 2",
                feynman_hellmann_slope(a, 0.0),
                -s.slope,
                self.scale(0.15),
            ),
        ])
    }

    fn branch_sweep(&self) -> Result<Vec<Check>> {
        let s = self.sweep()?;
        let v = &s.verdict;
        let min_margin = s
            .points
            .iter()
            .filter(|p| p.t > 0.0)
            .map(|p| p.gap / (p.res1_nd + p.res1_dn))
            .fold(f64::INFINITY, f64::min);
        Ok(vec![
            Check::flag("lambda1 ND non-increasing", v.monotone_nd),
            Check::flag("lambda1 DN non-decreasing", v.monotone_dn),
            Check {
                label: "gap / residual for t >= 0.1".into(),
                measured: min_margin,
                target: spectra::SIMPLICITY_FACTOR,
                tolerance: 0.0,
                pass: v.simple_for_positive_t && min_margin > spectra::SIMPLICITY_FACTOR,
            },
            Check::flag(
                "lambda1 = ND branch, lambda2 = DN branch",
                v.tags_consistent,
            ),
        ])
    }

    fn endpoint(&self) -> Result<Vec<Check>> {
        let r = verify_t1_endpoint(&self.config.levels)?;
        self.note_residual(r.max_solver_residual);
        let tol = self.scale(0.01);
        Ok(vec![
            Check::at_most(
                "DN1 vs ND2 relative difference",
                r.relative_difference,
                self.scale(0.005),
            ),
            Check::relative("lambda1 DN", r.lam1_dn, r.z11_squared, tol),
            Check::relative("lambda2 ND", r.lam2_nd, r.z11_squared, tol),
            Check::relative("lambda1 ND", r.lam1_nd, r.z01_squared, tol),
        ])
    }

    fn hygiene(&self) -> Result<Vec<Check>> {
        let mut checks = Vec::new();
        let mut worst_agreement: f64 = 0.0;
        let mut compared = 0usize;
        for (mesh, dirichlet, weighted) in self.oracle_meshes()? {
            let dofs = build_dofmap(&mesh, &dirichlet)?;
            if dofs.n_free() > DENSE_LIMIT {
                continue;
            }
            let k = assemble_stiffness(&mesh, &dofs)?;
            let w = |p| double_cover_weight(p);
            let m = assemble_mass(&mesh, &dofs, weighted.then_some(&w as &dyn Fn(_) -> f64))?;
            let it = eigensolve::solve_lowest(&k, &m, 5, SOLVER_TOL)?;
            self.note_residual(it.max_residual());
            let dense = eigensolve::dense_eigenvalues(&k, &m)?;
            for (a, b) in it.values().iter().zip(&dense) {
                worst_agreement = worst_agreement.max(((a - b) / b).abs());
            }
            compared += 1;
        }
        checks.push(Check::at_most(
            format!("iterative vs dense on {compared} meshes"),
            worst_agreement,
            1e-8,
        ));

        let spec = MixedProblemSpec::new(0.5, Variant::ND, 2).with_levels(&self.config.levels);
        let a = mixed_spectrum(&spec)?;
        let b = mixed_spectrum(&spec)?;
        self.note_residual(a.max_solver_residual());
        let same = a.per_level() == b.per_level()
            && a.extrapolated
                .iter()
                .zip(&b.extrapolated)
                .all(|(x, y)| x.to_bits() == y.to_bits())
            && a.finest.pairs == b.finest.pairs;
        checks.push(Check::flag("fixed-seed rerun bitwise identical", same));
        checks.push(Check::at_most(
            "worst eigenpair residual",
            self.worst_residual(),
            SOLVER_TOL,
        ));
        Ok(checks)
    }

    fn oracle_meshes(&self) -> Result<Vec<(Mesh, Vec<BoundaryTag>, bool)>> {
        let mut out = Vec::new();
        for &(base, grade) in &self.config.levels {
            for t in [0.0, 0.5] {
                let mesh = build_half_disk_mesh(t, base, grade)?;
                for variant in [Variant::DN, Variant::ND] {
                    out.push((mesh.clone(), variant.dirichlet_tags().to_vec(), false));
                }
            }
            out.push((
                build_half_disk_mesh(1.0, base, grade)?,
                vec![BoundaryTag::Arc, BoundaryTag::DiamLeft],
                false,
            ));
        }
        for &n in &self.config.square_grids {
            out.push((unit_square_mesh(n)?, vec![BoundaryTag::Wall], false));
        }
        for &level in &self.config.disk_levels {
            let mesh = build_full_disk_mesh(level, true)?;
            out.push((mesh.clone(), vec![BoundaryTag::Arc], false));
            out.push((mesh, vec![BoundaryTag::Arc], true));
        }
        Ok(out)
    }
}

/// Runs a suite with a fresh verifier.
pub fn run_suite(suite: Suite, config: VerifyConfig) -> Vec<CriterionReport> {
    Verifier::new(config).run_suite(suite)
}
