//! Mixed Dirichlet/Neumann spectra on the half-disk, the merged
//! Aharonov–Bohm spectrum, the weighted double-cover problem, and the
//! branch diagram along the diameter.
//!
//! Every eigenvalue reported here is the Richardson extrapolant of a
//! sequence of solves on nested graded meshes.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::eigensolve::{self, EigenPair, SolverOptions, DEFAULT_SEED, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::fem::{
    assemble_mass, assemble_stiffness, build_dofmap, double_cover_weight, CsrMatrix, DofMap,
};
use crate::mesh::{
    build_full_disk_mesh, build_half_disk_mesh, unit_square_mesh, BoundaryTag, Mesh,
};
use crate::specfun::{self, BesselOrder};

/// `(base_level, grade_rounds)` of each mesh in an extrapolation sequence.
pub type MeshLevel = (u32, u32);

/// Base mesh size halves and the tip size quarters from one level to the next.
pub const DEFAULT_LEVELS: [MeshLevel; 3] = [(4, 4), (5, 6), (6, 8)];

pub const COARSE_LEVELS: [MeshLevel; 3] = [(3, 2), (4, 4), (5, 6)];

pub const DEFAULT_FD_STEP: f64 = 0.02;

/// Allowed relative deviation of the observed convergence order from 2.
pub const ORDER_TOLERANCE: f64 = 0.3;

/// Two eigenvalues closer than this multiple of their summed residuals count
/// as one double eigenvalue.
pub const DOUBLE_FACTOR: f64 = 10.0;

pub const SIMPLICITY_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Variant {
    /// Dirichlet on `[-1, t)`, Neumann on `(t, 1]`.
    DN,
    /// Neumann on `[-1, t)`, Dirichlet on `(t, 1]`.
    ND,
}

impl Variant {
    pub fn dirichlet_tags(self) -> [BoundaryTag; 2] {
        match self {
            Variant::DN => [BoundaryTag::Arc, BoundaryTag::DiamLeft],
            Variant::ND => [BoundaryTag::Arc, BoundaryTag::DiamRight],
        }
    }

    pub fn mirror(self) -> Self {
        match self {
            Variant::DN => Variant::ND,
            Variant::ND => Variant::DN,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::DN => "DN",
            Variant::ND => "ND",
        })
    }
}

/// Eigensolver tolerance and seed shared by every solve of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveSettings {
    pub tol: f64,
    pub seed: u64,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            seed: DEFAULT_SEED,
        }
    }
}

impl SolveSettings {
    fn options(self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            seed: self.seed,
            ..SolverOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedProblemSpec {
    pub t: f64,
    pub variant: Variant,
    pub k: usize,
    pub levels: Vec<MeshLevel>,
    pub settings: SolveSettings,
}

impl MixedProblemSpec {
    pub fn new(t: f64, variant: Variant, k: usize) -> Self {
        Self {
            t,
            variant,
            k,
            levels: DEFAULT_LEVELS.to_vec(),
            settings: SolveSettings::default(),
        }
    }

    pub fn with_levels(mut self, levels: &[MeshLevel]) -> Self {
        self.levels = levels.to_vec();
        self
    }

    pub fn with_settings(mut self, settings: SolveSettings) -> Self {
        self.settings = settings;
        self
    }
}

/// Richardson extrapolation of eigenvalue sequences on meshes whose size
/// halves from one level to the next.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extrapolation {
    pub values: Vec<f64>,
    /// Difference of the last two extrapolants (or of the last two levels
    /// when extrapolation was rejected).
    pub residuals: Vec<f64>,
    /// Observed order `log2((λ₁−λ₂)/(λ₂−λ₃))`; NaN with only two levels.
    pub orders: Vec<f64>,
    /// False where the finest value was used instead.
    pub accepted: Vec<bool>,
}

/// Extrapolates each eigenvalue index across levels assuming `O(h²)` error.
///
/// With three or more levels the last three are used: the order is
/// diagnosed, and if it is off by more than [`ORDER_TOLERANCE`] or the
/// sequence is not monotone, the finest value is kept with the last
/// level-to-level difference as residual.
pub fn richardson(per_level: &[Vec<f64>]) -> Result<Extrapolation> {
    if per_level.len() < 2 {
        return Err(Error::Dimension(
            "extrapolation needs at least two levels".into(),
        ));
    }
    let k = per_level.iter().map(Vec::len).min().unwrap_or(0);
    let mut out = Extrapolation {
        values: Vec::with_capacity(k),
        residuals: Vec::with_capacity(k),
        orders: Vec::with_capacity(k),
        accepted: Vec::with_capacity(k),
    };
    let n = per_level.len();
    for j in 0..k {
        if n == 2 {
            let (l1, l2) = (per_level[0][j], per_level[1][j]);
            let e = (4.0 * l2 - l1) / 3.0;
            out.values.push(e);
            out.residuals.push((e - l2).abs());
            out.orders.push(f64::NAN);
            out.accepted.push(true);
            continue;
        }
        let (l1, l2, l3) = (
            per_level[n - 3][j],
            per_level[n - 2][j],
            per_level[n - 1][j],
        );
        let d1 = l1 - l2;
        let d2 = l2 - l3;
        let order = (d1 / d2).log2();
        let monotone = d1 * d2 > 0.0;
        let ok = monotone && ((order - 2.0) / 2.0).abs() <= ORDER_TOLERANCE;
        if ok {
            let e1 = (4.0 * l2 - l1) / 3.0;
            let e2 = (4.0 * l3 - l2) / 3.0;
            out.values.push(e2);
            out.residuals.push((e2 - e1).abs());
        } else {
            out.values.push(l3);
            out.residuals.push(d2.abs());
        }
        out.orders.push(order);
        out.accepted.push(ok);
    }
    Ok(out)
}

/// Finest-level discretization kept for post-processing.
#[derive(Debug, Clone, PartialEq)]
pub struct FinestLevel {
    pub mesh: Mesh,
    pub dofs: DofMap,
    pub mass: CsrMatrix,
    pub pairs: Vec<EigenPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSummary {
    pub level: MeshLevel,
    pub n_free: usize,
    pub values: Vec<f64>,
    pub iterations: usize,
    pub max_solver_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSequence {
    pub spec: MixedProblemSpec,
    pub levels: Vec<LevelSummary>,
    pub extrapolated: Vec<f64>,
    pub residuals: Vec<f64>,
    pub orders: Vec<f64>,
    pub accepted: Vec<bool>,
    #[serde(skip)]
    pub finest: FinestLevel,
}

impl SpectrumSequence {
    pub fn per_level(&self) -> Vec<Vec<f64>> {
        self.levels.iter().map(|l| l.values.clone()).collect()
    }

    pub fn max_solver_residual(&self) -> f64 {
        self.levels
            .iter()
            .map(|l| l.max_solver_residual)
            .fold(0.0, f64::max)
    }
}

/// The half-disk pencil for one variant on one mesh.
pub fn mixed_pencil(mesh: &Mesh, variant: Variant) -> Result<(DofMap, CsrMatrix, CsrMatrix)> {
    let dofs = build_dofmap(mesh, &variant.dirichlet_tags())?;
    let k = assemble_stiffness(mesh, &dofs)?;
    let m = assemble_mass(mesh, &dofs, None)?;
    Ok((dofs, k, m))
}

fn solve_level(
    dofs: &DofMap,
    k: &CsrMatrix,
    m: &CsrMatrix,
    count: usize,
    settings: SolveSettings,
    level: MeshLevel,
) -> Result<(LevelSummary, Vec<EigenPair>)> {
    let basis = eigensolve::solve_lowest_with(k, m, count, settings.options())?;
    let summary = LevelSummary {
        level,
        n_free: dofs.n_free(),
        values: basis.values(),
        iterations: basis.iterations,
        max_solver_residual: basis.max_residual(),
    };
    Ok((summary, basis.pairs))
}

pub fn mixed_spectrum(spec: &MixedProblemSpec) -> Result<SpectrumSequence> {
    if spec.levels.len() < 2 {
        return Err(Error::Dimension(
            "at least two mesh levels are required".into(),
        ));
    }
    if spec.k == 0 || spec.k > 8 {
        return Err(Error::Domain(format!("k = {} outside 1..=8", spec.k)));
    }
    let mut levels = Vec::with_capacity(spec.levels.len());
    let mut finest = None;
    for (i, &(base, grade)) in spec.levels.iter().enumerate() {
        let mesh = build_half_disk_mesh(spec.t, base, grade)?;
        let (dofs, k, m) = mixed_pencil(&mesh, spec.variant)?;
        let (summary, pairs) = solve_level(&dofs, &k, &m, spec.k, spec.settings, (base, grade))?;
        levels.push(summary);
        if i + 1 == spec.levels.len() {
            finest = Some(FinestLevel {
                mesh,
                dofs,
                mass: m,
                pairs,
            });
        }
    }
    let per_level: Vec<Vec<f64>> = levels.iter().map(|l| l.values.clone()).collect();
    let ex = richardson(&per_level)?;
    Ok(SpectrumSequence {
        spec: spec.clone(),
        levels,
        extrapolated: ex.values,
        residuals: ex.residuals,
        orders: ex.orders,
        accepted: ex.accepted,
        finest: finest.expect("at least one level"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ABEntry {
    pub lambda: f64,
    pub provenance: Variant,
    /// Position within its own DN or ND sequence.
    pub index: usize,
    pub residual: f64,
    /// Position of the partner entry when numerically double.
    pub double_with: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ABSpectrum {
    pub t: f64,
    pub entries: Vec<ABEntry>,
    pub dn: SpectrumSequence,
    pub nd: SpectrumSequence,
}

impl ABSpectrum {
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.lambda).collect()
    }
}

fn numerically_double(a: f64, ra: f64, b: f64, rb: f64) -> bool {
    (a - b).abs() <= DOUBLE_FACTOR * (ra + rb)
}

/// Sorted union with multiplicity of two sequences, truncated to `k`.
pub fn merge_sequences(t: f64, dn: SpectrumSequence, nd: SpectrumSequence, k: usize) -> ABSpectrum {
    let mut entries: Vec<ABEntry> = Vec::new();
    for (seq, variant) in [(&nd, Variant::ND), (&dn, Variant::DN)] {
        for (j, (&lambda, &residual)) in seq.extrapolated.iter().zip(&seq.residuals).enumerate() {
            entries.push(ABEntry {
                lambda,
                provenance: variant,
                index: j,
                residual,
                double_with: None,
            });
        }
    }
    // stable: ND first on exact ties
    entries.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    entries.truncate(k);
    let mut i = 0;
    while i + 1 < entries.len() {
        let (a, b) = (&entries[i], &entries[i + 1]);
        if a.provenance != b.provenance
            && numerically_double(a.lambda, a.residual, b.lambda, b.residual)
        {
            entries[i].double_with = Some(i + 1);
            entries[i + 1].double_with = Some(i);
            i += 2;
        } else {
            i += 1;
        }
    }
    ABSpectrum { t, entries, dn, nd }
}

/// Lowest `k` eigenvalues of the half-integer AB operator with the pole at
/// `(t, 0)`, as the merged DN and ND spectra.
pub fn ab_spectrum(t: f64, k: usize, levels: &[MeshLevel]) -> Result<ABSpectrum> {
    ab_spectrum_with(t, k, levels, SolveSettings::default())
}

pub fn ab_spectrum_with(
    t: f64,
    k: usize,
    levels: &[MeshLevel],
    settings: SolveSettings,
) -> Result<ABSpectrum> {
    if !(t.abs() < 1.0) {
        return Err(Error::Domain(format!(
            "pole position t = {t} must satisfy |t| < 1"
        )));
    }
    let spec = |variant| {
        MixedProblemSpec::new(t, variant, k)
            .with_levels(levels)
            .with_settings(settings)
    };
    let (dn, nd) = rayon::join(
        || mixed_spectrum(&spec(Variant::DN)),
        || mixed_spectrum(&spec(Variant::ND)),
    );
    Ok(merge_sequences(t, dn?, nd?, k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sector {
    /// Odd under `y ↦ -y`: eigenvalues of the AB operator.
    Antiperiodic,
    /// Even under `y ↦ -y`: Dirichlet eigenvalues of the disk.
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifiedLevel {
    pub level: u32,
    pub n_free: usize,
    pub values: Vec<f64>,
    pub parity_scores: Vec<f64>,
    pub sectors: Vec<Sector>,
    pub projected: bool,
    pub max_solver_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoubleCoverSpectrum {
    pub levels: Vec<ClassifiedLevel>,
    pub antiperiodic: Extrapolation,
    pub periodic: Extrapolation,
}

impl DoubleCoverSpectrum {
    pub fn worst_parity_defect(&self) -> f64 {
        self.levels
            .iter()
            .flat_map(|l| l.parity_scores.iter())
            .map(|s| 1.0 - s.abs())
            .fold(0.0, f64::max)
    }
}

/// Index map of the central symmetry on free dofs.
fn free_pairing(mesh: &Mesh, dofs: &DofMap) -> Result<Vec<usize>> {
    let pairing = mesh
        .symmetry_pairing
        .as_ref()
        .ok_or(Error::MissingPairing)?;
    dofs.free_vertices
        .iter()
        .map(|&v| {
            dofs.free_index[pairing[v]]
                .ok_or_else(|| Error::Mesh(format!("partner of free vertex {v} is constrained")))
        })
        .collect()
}

/// `(uᵀ P u) / (uᵀ u)`.
pub fn parity_score(u: &[f64], pairing: &[usize]) -> f64 {
    let num: f64 = u.iter().enumerate().map(|(i, x)| x * u[pairing[i]]).sum();
    let den: f64 = u.iter().map(|x| x * x).sum();
    num / den
}

/// Rotates a cluster of `M`-orthonormal vectors onto parity eigenvectors.
fn split_cluster_by_parity(pairs: &mut [EigenPair], m: &CsrMatrix, pairing: &[usize]) {
    let c = pairs.len();
    let reflected: Vec<Vec<f64>> = pairs
        .iter()
        .map(|p| (0..p.vector.len()).map(|i| p.vector[pairing[i]]).collect())
        .collect();
    let mut s = vec![0.0; c * c];
    for i in 0..c {
        let mu = m.mul_vec(&pairs[i].vector);
        for j in 0..c {
            s[i * c + j] = mu.iter().zip(&reflected[j]).map(|(a, b)| a * b).sum();
        }
    }
    for i in 0..c {
        for j in 0..i {
            let v = 0.5 * (s[i * c + j] + s[j * c + i]);
            s[i * c + j] = v;
            s[j * c + i] = v;
        }
    }
    let (_, rot) = eigensolve::symmetric_eigen(&s, c, true);
    let rot = rot.expect("vectors requested");
    let n = pairs[0].vector.len();
    let rotated: Vec<Vec<f64>> = (0..c)
        .map(|j| {
            let mut v = vec![0.0; n];
            for (i, p) in pairs.iter().enumerate() {
                let r = rot[i * c + j];
                for (a, b) in v.iter_mut().zip(&p.vector) {
                    *a += r * b;
                }
            }
            v
        })
        .collect();
    for (p, v) in pairs.iter_mut().zip(rotated) {
        p.vector = v;
    }
}

/// Eigenvalues of `−Δψ = 4λ|y|²ψ` on the unit disk (Dirichlet), split by
/// parity under the central symmetry and extrapolated per sector.
pub fn double_cover_spectrum(k: usize, levels: &[u32], tol: f64) -> Result<DoubleCoverSpectrum> {
    if levels.len() < 2 {
        return Err(Error::Dimension(
            "at least two mesh levels are required".into(),
        ));
    }
    let weight = |p: crate::mesh::Point| double_cover_weight(p);
    let mut classified = Vec::with_capacity(levels.len());
    for &level in levels {
        let mesh = build_full_disk_mesh(level, true)?;
        classified.push(classify_level(&mesh, level, k, tol, &weight)?);
    }
    let sector_values = |sector: Sector| -> Vec<Vec<f64>> {
        classified
            .iter()
            .map(|l| {
                l.values
                    .iter()
                    .zip(&l.sectors)
                    .filter(|(_, s)| **s == sector)
                    .map(|(v, _)| *v)
                    .collect()
            })
            .collect()
    };
    let antiperiodic = richardson(&sector_values(Sector::Antiperiodic))?;
    let periodic = richardson(&sector_values(Sector::Periodic))?;
    Ok(DoubleCoverSpectrum {
        levels: classified,
        antiperiodic,
        periodic,
    })
}

fn classify_level(
    mesh: &Mesh,
    level: u32,
    k: usize,
    tol: f64,
    weight: &dyn Fn(crate::mesh::Point) -> f64,
) -> Result<ClassifiedLevel> {
    let dofs = build_dofmap(mesh, &[BoundaryTag::Arc])?;
    let pairing = free_pairing(mesh, &dofs)?;
    let stiff = assemble_stiffness(mesh, &dofs)?;
    let mass = assemble_mass(mesh, &dofs, Some(weight))?;
    let basis = eigensolve::solve_lowest(&stiff, &mass, k, tol)?;
    let max_solver_residual = basis.max_residual();
    let mut pairs = basis.pairs;
    let mut scores: Vec<f64> = pairs
        .iter()
        .map(|p| parity_score(&p.vector, &pairing))
        .collect();
    let mut projected = false;
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len()
            && (pairs[end].lambda - pairs[end - 1].lambda).abs() <= 1e-4 * pairs[end].lambda
        {
            end += 1;
        }
        if end - start > 1 && scores[start..end].iter().any(|s| s.abs() < 0.9) {
            split_cluster_by_parity(&mut pairs[start..end], &mass, &pairing);
            for i in start..end {
                scores[i] = parity_score(&pairs[i].vector, &pairing);
            }
            projected = true;
        }
        start = end;
    }
    let sectors = scores
        .iter()
        .map(|&s| {
            if s < 0.0 {
                Sector::Antiperiodic
            } else {
                Sector::Periodic
            }
        })
        .collect();
    Ok(ClassifiedLevel {
        level,
        n_free: dofs.n_free(),
        values: pairs.iter().map(|p| p.lambda).collect(),
        parity_scores: scores,
        sectors,
        projected,
        max_solver_residual,
    })
}

/// Dirichlet eigenvalues of the unit disk, extrapolated over uniform levels.
pub fn plain_disk_dirichlet(k: usize, levels: &[u32], tol: f64) -> Result<Extrapolation> {
    let mut per_level = Vec::with_capacity(levels.len());
    for &level in levels {
        let mesh = build_full_disk_mesh(level, false)?;
        per_level.push(dirichlet_values(&mesh, k, tol)?);
    }
    richardson(&per_level)
}

/// Dirichlet eigenvalues of the unit square on `n × n` grids.
pub fn unit_square_dirichlet(k: usize, grids: &[usize], tol: f64) -> Result<Extrapolation> {
    let mut per_level = Vec::with_capacity(grids.len());
    for &n in grids {
        let mesh = unit_square_mesh(n)?;
        per_level.push(dirichlet_values(&mesh, k, tol)?);
    }
    richardson(&per_level)
}

fn dirichlet_values(mesh: &Mesh, k: usize, tol: f64) -> Result<Vec<f64>> {
    let dofs = build_dofmap(mesh, &[BoundaryTag::Arc, BoundaryTag::Wall])?;
    let stiff = assemble_stiffness(mesh, &dofs)?;
    let mass = assemble_mass(mesh, &dofs, None)?;
    Ok(eigensolve::solve_lowest(&stiff, &mass, k, tol)?.values())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeEstimate {
    pub variant: Variant,
    pub h: f64,
    pub slope: f64,
    /// Richardson estimate of the central-difference error from a second
    /// pass at `h/2`.
    pub error_estimate: f64,
    pub slope_half_step: f64,
    pub lambda_nd: f64,
    pub lambda_dn: f64,
}

fn central_difference(
    h: f64,
    levels: &[MeshLevel],
    settings: SolveSettings,
) -> Result<(f64, f64, f64)> {
    let ab = ab_spectrum_with(h, 1, levels, settings)?;
    let nd = ab.nd.extrapolated[0];
    let dn = ab.dn.extrapolated[0];
    // λ^ND(−h) = λ^DN(h)
    Ok(((nd - dn) / (2.0 * h), nd, dn))
}

/// Central-difference slope at `t = 0` of the first eigenvalue of `variant`.
pub fn branch_slope_at_origin(
    variant: Variant,
    h: f64,
    levels: &[MeshLevel],
) -> Result<SlopeEstimate> {
    branch_slope_with(variant, h, levels, SolveSettings::default())
}

pub fn branch_slope_with(
    variant: Variant,
    h: f64,
    levels: &[MeshLevel],
    settings: SolveSettings,
) -> Result<SlopeEstimate> {
    if !(0.005..=0.05).contains(&h) {
        return Err(Error::Domain(format!("FD step {h} outside [0.005, 0.05]")));
    }
    let (d_full, nd, dn) = central_difference(h, levels, settings)?;
    let (d_half, _, _) = central_difference(0.5 * h, levels, settings)?;
    let sign = match variant {
        Variant::ND => 1.0,
        Variant::DN => -1.0,
    };
    Ok(SlopeEstimate {
        variant,
        h,
        slope: sign * d_full,
        error_estimate: 4.0 / 3.0 * (d_full - d_half).abs(),
        slope_half_step: sign * d_half,
        lambda_nd: nd,
        lambda_dn: dn,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TipFit {
    /// Coefficient of `r^{1/2}` with the eigenfunction normalised to unit
    /// norm on the full disk.
    pub coefficient: f64,
    pub fit_rms: f64,
    pub annulus: (f64, f64),
    pub samples: usize,
    pub full_disk_normalized: bool,
}

/// Angular profile of the leading tip mode: the cosine of the half-angle
/// measured from the Neumann side of the split.
pub fn tip_mode(variant: Variant, theta: f64) -> f64 {
    let from_neumann = match variant {
        Variant::DN => theta,
        Variant::ND => PI - theta,
    };
    (0.5 * from_neumann).cos()
}

/// Least-squares fit of `c · r^{1/2} · m(θ)` to `(r, θ, u)` samples.
pub fn fit_half_mode(samples: &[(f64, f64, f64)], mode: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    for &(r, theta, u) in samples {
        let m = mode(theta);
        num += u * r.sqrt() * m;
        den += r * m * m;
    }
    let c = num / den;
    let ms: f64 = samples
        .iter()
        .map(|&(r, theta, u)| (u / r.sqrt() - c * mode(theta)).powi(2))
        .sum::<f64>()
        / samples.len() as f64;
    (c, ms.sqrt())
}

/// Tip coefficient of eigenfunction `j` of a mixed problem, read off the
/// finest mesh in the annulus `[2 h_tip, 8 h_tip]` around the split point.
pub fn fit_tip_coefficient(seq: &SpectrumSequence, j: usize) -> Result<TipFit> {
    let t = seq.spec.t;
    if !(t.abs() < 1.0) {
        return Err(Error::Domain(
            "tip fits need an interior split point".into(),
        ));
    }
    let fin = &seq.finest;
    let pair = fin
        .pairs
        .get(j)
        .ok_or_else(|| Error::Dimension(format!("no eigenvector {j} on the finest level")))?;
    let h_tip = fin
        .mesh
        .tip_size()
        .ok_or_else(|| Error::Mesh("mesh has no tip vertex".into()))?;
    let (r0, r1) = (2.0 * h_tip, 8.0 * h_tip);
    let norm2 = fin.mass.bilinear(&pair.vector, &pair.vector);
    // half-disk norm 1/√2, so the reflected extension has unit norm
    let scale = 1.0 / (2.0 * norm2).sqrt();
    let u = fin.dofs.expand(&pair.vector);
    let samples: Vec<(f64, f64, f64)> = fin
        .mesh
        .vertices
        .iter()
        .zip(&u)
        .filter_map(|(p, &val)| {
            let dx = p[0] - t;
            let r = dx.hypot(p[1]);
            (r >= r0 && r <= r1).then(|| (r, p[1].atan2(dx).clamp(0.0, PI), scale * val))
        })
        .collect();
    if samples.len() < 4 {
        return Err(Error::Mesh(format!(
            "only {} vertices in the fit annulus",
            samples.len()
        )));
    }
    let variant = seq.spec.variant;
    let (c, rms) = fit_half_mode(&samples, |th| tip_mode(variant, th));
    if !(rms <= 0.05 * c.abs()) {
        return Err(Error::RejectedFit {
            coefficient: c,
            rms,
        });
    }
    Ok(TipFit {
        coefficient: c.abs(),
        fit_rms: rms,
        annulus: (r0, r1),
        samples: samples.len(),
        full_disk_normalized: true,
    })
}

/// `(π/2)(A² − B²)`.
pub fn feynman_hellmann_slope(a: f64, b: f64) -> f64 {
    FRAC_PI_2 * (a * a - b * b)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub t: f64,
    pub lam1_nd: f64,
    pub lam1_dn: f64,
    pub lam2_nd: f64,
    pub lam2_dn: f64,
    pub lam1: f64,
    pub lam2: f64,
    pub gap: f64,
    pub res1_nd: f64,
    pub res1_dn: f64,
    pub res2_nd: f64,
    pub res2_dn: f64,
    pub lam1_tag: Variant,
    pub lam2_tag: Variant,
    /// λ₁ is the first ND value and λ₂ the first DN value (either order
    /// allowed when the two are numerically double).
    pub tags_ok: bool,
    pub max_solver_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepVerdict {
    pub monotone_nd: bool,
    pub monotone_dn: bool,
    pub simple_for_positive_t: bool,
    pub tags_consistent: bool,
    pub slope_nd_at_0: f64,
    pub slope_dn_at_0: f64,
    pub slope_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub verdict: SweepVerdict,
}

pub fn sweep_point(ab: &ABSpectrum) -> Result<SweepPoint> {
    let (dn, nd) = (&ab.dn, &ab.nd);
    if dn.extrapolated.len() < 2 || nd.extrapolated.len() < 2 || ab.entries.len() < 2 {
        return Err(Error::Dimension(
            "sweep points need two eigenvalues per variant".into(),
        ));
    }
    let (e1, e2) = (&ab.entries[0], &ab.entries[1]);
    let first_nd = e1.provenance == Variant::ND && e1.index == 0;
    let first_dn = e2.provenance == Variant::DN && e2.index == 0;
    let swapped = e1.provenance == Variant::DN && e1.index == 0 && e2.provenance == Variant::ND;
    let tags_ok = (first_nd && first_dn) || (swapped && e1.double_with == Some(1));
    Ok(SweepPoint {
        t: ab.t,
        lam1_nd: nd.extrapolated[0],
        lam1_dn: dn.extrapolated[0],
        lam2_nd: nd.extrapolated[1],
        lam2_dn: dn.extrapolated[1],
        lam1: e1.lambda,
        lam2: e2.lambda,
        gap: e2.lambda - e1.lambda,
        res1_nd: nd.residuals[0],
        res1_dn: dn.residuals[0],
        res2_nd: nd.residuals[1],
        res2_dn: dn.residuals[1],
        lam1_tag: e1.provenance,
        lam2_tag: e2.provenance,
        tags_ok,
        max_solver_residual: dn.max_solver_residual().max(nd.max_solver_residual()),
    })
}

/// Verdicts computed from the stored points alone.
pub fn sweep_verdict(points: &[SweepPoint], slope: &SlopeEstimate) -> SweepVerdict {
    let monotone = |value: fn(&SweepPoint) -> f64, res: fn(&SweepPoint) -> f64, sign: f64| {
        points.windows(2).all(|w| {
            let step = sign * (value(&w[1]) - value(&w[0]));
            step >= -(res(&w[0]) + res(&w[1]))
        })
    };
    let simple = points
        .iter()
        .filter(|p| p.t > 0.0)
        .all(|p| p.gap > SIMPLICITY_FACTOR * (p.res1_nd + p.res1_dn));
    SweepVerdict {
        monotone_nd: monotone(|p| p.lam1_nd, |p| p.res1_nd, -1.0),
        monotone_dn: monotone(|p| p.lam1_dn, |p| p.res1_dn, 1.0),
        simple_for_positive_t: simple,
        tags_consistent: points.iter().all(|p| p.tags_ok),
        slope_nd_at_0: slope.slope,
        slope_dn_at_0: -slope.slope,
        slope_error: slope.error_estimate,
    }
}

/// Branch diagram over an ascending grid in `[0, 0.95]`. Points are solved
/// concurrently and gathered in grid order.
pub fn sweep(grid: &[f64], k: usize, levels: &[MeshLevel]) -> Result<SweepResult> {
    sweep_with(grid, k, levels, SolveSettings::default())
}

pub fn sweep_with(
    grid: &[f64],
    k: usize,
    levels: &[MeshLevel],
    settings: SolveSettings,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::Domain("empty t grid".into()));
    }
    if grid.iter().any(|t| !(0.0..=0.95).contains(t)) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain(
            "t grid must be ascending inside [0, 0.95]".into(),
        ));
    }
    let k = k.max(2);
    let (points, slope) = rayon::join(
        || {
            grid.par_iter()
                .map(|&t| sweep_point(&ab_spectrum_with(t, k, levels, settings)?))
                .collect::<Result<Vec<_>>>()
        },
        || branch_slope_with(Variant::ND, DEFAULT_FD_STEP, levels, settings),
    );
    let points = points?;
    let verdict = sweep_verdict(&points, &slope?);
    Ok(SweepResult { points, verdict })
}

pub fn default_grid() -> Vec<f64> {
    (0..10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndpointReport {
    pub lam1_dn: f64,
    pub lam1_nd: f64,
    pub lam2_nd: f64,
    pub residuals: [f64; 3],
    pub z11_squared: f64,
    pub z01_squared: f64,
    /// `|λ₁^DN − λ₂^ND| / λ₂^ND`.
    pub relative_difference: f64,
    pub max_solver_residual: f64,
}

/// The unsplit endpoint `t = 1`: pure Dirichlet against Neumann-diameter.
pub fn verify_t1_endpoint(levels: &[MeshLevel]) -> Result<EndpointReport> {
    let (dn, nd) = rayon::join(
        || mixed_spectrum(&MixedProblemSpec::new(1.0, Variant::DN, 1).with_levels(levels)),
        || mixed_spectrum(&MixedProblemSpec::new(1.0, Variant::ND, 2).with_levels(levels)),
    );
    let (dn, nd) = (dn?, nd?);
    let z11 = specfun::zero_squared(BesselOrder::integer(1), 1)?;
    let z01 = specfun::zero_squared(BesselOrder::integer(0), 1)?;
    let (a, b) = (dn.extrapolated[0], nd.extrapolated[1]);
    Ok(EndpointReport {
        lam1_dn: a,
        lam1_nd: nd.extrapolated[0],
        lam2_nd: b,
        residuals: [dn.residuals[0], nd.residuals[0], nd.residuals[1]],
        z11_squared: z11,
        z01_squared: z01,
        relative_difference: (a - b).abs() / b,
        max_solver_residual: dn.max_solver_residual().max(nd.max_solver_residual()),
    })
}
