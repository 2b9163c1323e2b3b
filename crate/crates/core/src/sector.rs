//! Fourier-sector radial forms and constrained coercivity.
//!
//! A perturbation is split as `ε = Σ_j ε_j(r) e^{i(j+1)θ}` with `ε_j = a_j + i b_j`.
//! Every form below acts on real radial functions sampled on a graded grid
//! `0 = r_0 < r_1 < … < r_M` and is discretized with staggered first differences
//! (`Σ c_i (e_{i+1} − e_i)²`, `c_i = r_{i+½}/h_i`) and trapezoid masses `m_i ≈ r_i dr`.
//! All radial integrals omit the common factor `2π`.
//!
//! The outer node carries a natural boundary. The `j = 0` potential is the one for
//! which the sampled profile is an exact null vector of the discrete `Q₀`, so the
//! factorization `Q₀(e) = Σ c_i ρ_i ρ_{i+1} (g_{i+1} − g_i)²`, `g = e/ρ`, holds
//! to rounding.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VortexError};
use crate::fields::CutoffSpec;
use crate::profile::VortexProfile;

/// Grid-edge tolerance on `e(r_M)²/r_M²` below which boundary terms are treated as negligible.
pub const EDGE_TOLERANCE: f64 = 1e-3;

/// Graded radial grid starting at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub nodes: usize,
    pub r_max: f64,
    pub core_step: f64,
    pub max_step: f64,
}

impl RadialGrid {
    /// Piecewise uniform grid: each `(end, step)` segment continues from the previous end.
    pub fn from_segments(segments: &[(f64, f64)]) -> Result<Self> {
        if segments.is_empty() {
            return Err(VortexError::usage("radial grid needs at least one segment"));
        }
        let mut nodes = vec![0.0];
        let mut start = 0.0;
        for &(end, step) in segments {
            if !(end > start && step > 0.0 && step.is_finite()) {
                return Err(VortexError::usage(format!("bad radial segment ({end}, {step}) after {start}")));
            }
            let cells = ((end - start) / step).round().max(1.0) as usize;
            let h = (end - start) / cells as f64;
            nodes.extend((1..=cells).map(|k| start + h * k as f64));
            start = end;
        }
        Ok(RadialGrid { nodes })
    }

    /// Steps 0.005 on [0, 5], 0.02 on [5, 20], 0.1 on [20, 60].
    pub fn graded() -> Self {
        Self::graded_refined(1)
    }

    /// The default grid with every step divided by `factor`.
    pub fn graded_refined(factor: usize) -> Self {
        let f = factor.max(1) as f64;
        Self::from_segments(&[(5.0, 0.005 / f), (20.0, 0.02 / f), (60.0, 0.1 / f)]).expect("static segments")
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Index of the last node.
    pub fn last(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn r_max(&self) -> f64 {
        self.nodes[self.last()]
    }

    fn step(&self, i: usize) -> f64 {
        self.nodes[i + 1] - self.nodes[i]
    }

    /// Trapezoid weights for `∫ f r dr`.
    pub fn masses(&self) -> Vec<f64> {
        let m = self.last();
        (0..=m)
            .map(|i| {
                let left = if i > 0 { self.step(i - 1) } else { 0.0 };
                let right = if i < m { self.step(i) } else { 0.0 };
                0.5 * (left + right) * self.nodes[i]
            })
            .collect()
    }

    /// Staggered stiffness coefficients `r_{i+½}/h_i`, one per cell.
    pub fn stiffness(&self) -> Vec<f64> {
        (0..self.last())
            .map(|i| 0.5 * (self.nodes[i] + self.nodes[i + 1]) / self.step(i))
            .collect()
    }

    pub fn meta(&self) -> GridMeta {
        let steps: Vec<f64> = (0..self.last()).map(|i| self.step(i)).collect();
        GridMeta {
            nodes: self.nodes.len(),
            r_max: self.r_max(),
            core_step: steps[0],
            max_step: steps.iter().cloned().fold(0.0, f64::max),
        }
    }

    fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        let core = self
            .nodes
            .windows(2)
            .take_while(|p| p[0] < 1.0)
            .map(|p| p[1] - p[0])
            .fold(0.0, f64::max);
        if core > 0.01 {
            w.push(format!("core step {core} exceeds 0.01"));
        }
        if self.r_max() < 60.0 {
            w.push(format!("grid ends at {} before r = 60", self.r_max()));
        }
        w
    }
}

/// Real radial component `e(r)` of sector `j`, sampled at every grid node including the origin.
#[derive(Debug, Clone)]
pub struct RadialFunction {
    grid: Arc<RadialGrid>,
    j: i32,
    values: Vec<f64>,
}

impl RadialFunction {
    /// For `j ≠ −1` the value at the origin must vanish.
    pub fn new(grid: &Arc<RadialGrid>, j: i32, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.nodes.len() {
            return Err(VortexError::usage(format!(
                "radial function has {} values for {} nodes",
                values.len(),
                grid.nodes.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(VortexError::usage("radial function has non-finite values"));
        }
        if j != -1 {
            let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if values[0].abs() > 1e-10 * scale.max(1e-300) {
                return Err(VortexError::usage(format!("sector {j} requires e(0) = 0, got {}", values[0])));
            }
        }
        Ok(RadialFunction { grid: grid.clone(), j, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: &Arc<RadialGrid>, j: i32, f: F) -> Result<Self> {
        Self::new(grid, j, grid.nodes.iter().map(|&r| f(r)).collect())
    }

    pub fn zeros(grid: &Arc<RadialGrid>, j: i32) -> Self {
        RadialFunction { grid: grid.clone(), j, values: vec![0.0; grid.nodes.len()] }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn j(&self) -> i32 {
        self.j
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Linear interpolation; zero beyond the grid.
    pub fn at(&self, r: f64) -> f64 {
        let n = &self.grid.nodes;
        if r <= 0.0 {
            return self.values[0];
        }
        if r >= self.grid.r_max() {
            return if r == self.grid.r_max() { self.values[self.grid.last()] } else { 0.0 };
        }
        let k = n.partition_point(|&x| x <= r) - 1;
        let t = (r - n[k]) / (n[k + 1] - n[k]);
        self.values[k] * (1.0 - t) + self.values[k + 1] * t
    }

    /// Discrete `‖e‖²_{H_j}`.
    pub fn h_norm_sq(&self) -> f64 {
        sector_gram(&self.grid, self.j).quad(&self.values)
    }

    pub fn scaled(&self, s: f64) -> Self {
        RadialFunction { grid: self.grid.clone(), j: self.j, values: self.values.iter().map(|v| v * s).collect() }
    }

    /// `e(r_M)²/r_M²`, the size of the boundary terms dropped by integration by parts.
    pub fn edge_quantity(&self) -> f64 {
        let r = self.grid.r_max();
        self.values[self.grid.last()].powi(2) / (r * r)
    }
}

/// Symmetric tridiagonal matrix over all grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiag {
    fn stiffness(grid: &RadialGrid) -> Self {
        let c = grid.stiffness();
        let mut diag = vec![0.0; grid.nodes.len()];
        for (i, &ci) in c.iter().enumerate() {
            diag[i] += ci;
            diag[i + 1] += ci;
        }
        Tridiag { diag, off: c.iter().map(|x| -x).collect() }
    }

    fn plus_diag(mut self, d: &[f64]) -> Self {
        for (a, b) in self.diag.iter_mut().zip(d) {
            *a += b;
        }
        self
    }

    pub fn quad(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..x.len() {
            s += self.diag[i] * x[i] * x[i];
            if i + 1 < x.len() {
                s += 2.0 * self.off[i] * x[i] * x[i + 1];
            }
        }
        s
    }
}

fn sector_gram(grid: &RadialGrid, j: i32) -> Tridiag {
    let m = grid.masses();
    let jf = j as f64;
    let w: Vec<f64> = grid
        .nodes
        .iter()
        .zip(&m)
        .map(|(&r, &mi)| {
            if r == 0.0 {
                0.0
            } else {
                mi * (jf * jf / (1.0 + r * r) + (jf + 1.0).powi(2) / (r * r * (1.0 + r * r)))
            }
        })
        .collect();
    Tridiag::stiffness(grid).plus_diag(&w)
}

/// Profile data sampled on a radial grid.
#[derive(Debug, Clone)]
struct Sampled {
    rho: Vec<f64>,
    /// `ρ'`
    drho: Vec<f64>,
    /// `ρ/r`, with its limit at the origin
    q: Vec<f64>,
    /// `ρ' − ρ/r`
    dm: Vec<f64>,
}

fn sample_profile(grid: &RadialGrid, p: &VortexProfile) -> Sampled {
    let mut s = Sampled { rho: vec![], drho: vec![], q: vec![], dm: vec![] };
    for &r in &grid.nodes {
        let f = p.factors(r);
        let v = p.values(r);
        s.rho.push(v[0]);
        s.drho.push(v[1]);
        s.q.push(f.q);
        s.dm.push(f.s * r * r);
    }
    s
}

/// Named linear functional on one or two radial components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    /// Coefficients against the first component, per node.
    pub first: Vec<f64>,
    /// Coefficients against the second component of a coupled block.
    pub second: Option<Vec<f64>>,
}

impl Constraint {
    pub fn apply(&self, e: &[f64], f: Option<&[f64]>) -> f64 {
        let mut s: f64 = self.first.iter().zip(e).map(|(a, b)| a * b).sum();
        if let (Some(c), Some(f)) = (&self.second, f) {
            s += c.iter().zip(f).map(|(a, b)| a * b).sum::<f64>();
        }
        s
    }
}

/// Discretized `∫χ ⟨ε, iV₁⟩` restricted to `b₀`: `∫ χ e ρ₁ r dr`.
pub fn phase_constraint(grid: &RadialGrid, p: &VortexProfile) -> Constraint {
    let chi = CutoffSpec::unit();
    let s = sample_profile(grid, p);
    let m = grid.masses();
    let first = (0..m.len()).map(|i| m[i] * chi.value(grid.nodes[i]) * s.rho[i]).collect();
    Constraint { name: "phase".into(), first, second: None }
}

/// `∫ χ ((e ± f) ρ₁' − (e ∓ f) ρ₁/r) r dr` on the coupled `(1, −1)` block.
/// The `+` sign is the `∂ₓV₁` condition on `(a₁, a₋₁)`, the `−` sign the `∂_yV₁` one on `(b₁, b₋₁)`.
pub fn translation_constraint(grid: &RadialGrid, p: &VortexProfile, sign: f64) -> Constraint {
    let chi = CutoffSpec::unit();
    let s = sample_profile(grid, p);
    let m = grid.masses();
    let mut first = Vec::with_capacity(m.len());
    let mut second = Vec::with_capacity(m.len());
    for i in 0..m.len() {
        let w = m[i] * chi.value(grid.nodes[i]);
        first.push(w * s.dm[i]);
        second.push(sign * w * (s.dm[i] + 2.0 * s.q[i]));
    }
    let name = if sign > 0.0 { "translation-x" } else { "translation-y" };
    Constraint { name: name.into(), first, second: Some(second) }
}

/// Radial forms of one Fourier sector at cutoff scale `R`.
#[derive(Debug, Clone)]
pub struct SectorOperatorBundle {
    pub j: i32,
    pub r_cut: f64,
    grid: Arc<RadialGrid>,
    rho: Vec<f64>,
    /// `Q_{R,j}` on all nodes
    pub q: Tridiag,
    /// `Q₀` on all nodes
    pub q0: Tridiag,
    /// Diagonal of `I_R`: `m_i ρ_i² χ_R(r_i)²`
    pub i_mass: Vec<f64>,
    /// `H_j` Gram form
    pub gram: Tridiag,
    /// The orthogonality functionals that act on this sector
    pub constraints: Vec<Constraint>,
    pub warnings: Vec<String>,
}

/// Assembles `Q_{R,j}`, `I_R` and the `H_j` Gram form.
pub fn assemble_sector(j: i32, r_cut: f64, grid: &Arc<RadialGrid>, p: &VortexProfile) -> Result<SectorOperatorBundle> {
    let chi_r = CutoffSpec::new(r_cut)?;
    let s = sample_profile(grid, p);
    let m = grid.masses();
    let d = Tridiag::stiffness(grid);
    let last = grid.last();
    let mut warnings = grid.warnings();
    if 2.0 * r_cut > grid.r_max() {
        warnings.push(format!("cutoff support 2R = {} exceeds the grid", 2.0 * r_cut));
    }
    if p.r_max() < grid.r_max() {
        warnings.push(format!("profile stored up to {}, tail expansion used beyond", p.r_max()));
    }

    // ρ-consistent potential: (D ρ)_i + v_i ρ_i = 0 for every node i ≥ 1
    let c = grid.stiffness();
    let mut v0 = vec![0.0; last + 1];
    for i in 1..=last {
        let mut flux = c[i - 1] * (s.rho[i] - s.rho[i - 1]);
        if i < last {
            flux += c[i] * (s.rho[i] - s.rho[i + 1]);
        }
        v0[i] = -flux / s.rho[i];
    }
    let jf = j as f64;
    let mut extra = vec![0.0; last + 1];
    for i in 1..=last {
        let r = grid.nodes[i];
        let out = 1.0 - chi_r.value(r);
        extra[i] = m[i] * (jf * jf + 2.0 * jf - 2.0 * jf * out * out * s.rho[i] * s.rho[i]) / (r * r);
    }
    let q0 = d.clone().plus_diag(&v0);
    let q = q0.clone().plus_diag(&extra);
    let i_mass = (0..=last)
        .map(|i| m[i] * (s.rho[i] * chi_r.value(grid.nodes[i])).powi(2))
        .collect();
    let constraints = match j {
        0 => vec![phase_constraint(grid, p)],
        1 | -1 => vec![translation_constraint(grid, p, 1.0), translation_constraint(grid, p, -1.0)],
        _ => vec![],
    };
    Ok(SectorOperatorBundle {
        j,
        r_cut,
        grid: grid.clone(),
        rho: s.rho,
        q,
        q0,
        i_mass,
        gram: sector_gram(grid, j),
        constraints,
        warnings,
    })
}

impl SectorOperatorBundle {
    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    /// First active node: the origin value is free only for `j = −1`.
    pub fn start(&self) -> usize {
        if self.j == -1 {
            0
        } else {
            1
        }
    }

    fn check(&self, e: &RadialFunction) -> Result<()> {
        if !Arc::ptr_eq(&self.grid, &e.grid) && *self.grid != *e.grid {
            return Err(VortexError::usage("radial function lives on a different grid"));
        }
        Ok(())
    }

    pub fn q_form(&self, e: &RadialFunction) -> Result<f64> {
        self.check(e)?;
        Ok(self.q.quad(&e.values))
    }

    pub fn q0_form(&self, e: &RadialFunction) -> Result<f64> {
        self.check(e)?;
        Ok(self.q0.quad(&e.values))
    }

    pub fn i_form(&self, e: &[f64]) -> f64 {
        self.i_mass.iter().zip(e).map(|(m, x)| m * x * x).sum()
    }

    pub fn gram_form(&self, e: &RadialFunction) -> Result<f64> {
        self.check(e)?;
        Ok(self.gram.quad(&e.values))
    }

    /// `∫ w(r) |e|² r dr` by the trapezoid rule used for every potential term.
    pub fn weighted(&self, e: &RadialFunction, w: impl Fn(f64) -> f64) -> f64 {
        let m = self.grid.masses();
        (0..m.len())
            .filter(|&i| self.grid.nodes[i] > 0.0)
            .map(|i| m[i] * w(self.grid.nodes[i]) * e.values[i] * e.values[i])
            .sum()
    }

    /// Right-hand side of the `j = −2` identity: `4 ∫ ρ₁²(1 − χ_R)² |e|²/r² r dr`.
    pub fn far_field_term(&self, e: &RadialFunction) -> f64 {
        let chi = CutoffSpec::new(self.r_cut).expect("validated at assembly");
        let m = self.grid.masses();
        (1..m.len())
            .map(|i| {
                let r = self.grid.nodes[i];
                let out = 1.0 - chi.value(r);
                4.0 * m[i] * (self.rho[i] * out).powi(2) * e.values[i].powi(2) / (r * r)
            })
            .sum()
    }

    /// Writes the assembled matrices as `row col value` lines.
    pub fn write_coordinate(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "# j={} R={} nodes={}", self.j, self.r_cut, self.grid.nodes.len())?;
        for (name, t) in [("Q", &self.q), ("H", &self.gram)] {
            for i in self.start()..t.diag.len() {
                writeln!(out, "{name} {i} {i} {:.16e}", t.diag[i])?;
                if i + 1 < t.diag.len() {
                    writeln!(out, "{name} {i} {} {:.16e}", i + 1, t.off[i])?;
                }
            }
        }
        for i in self.start()..self.i_mass.len() {
            writeln!(out, "I {i} {i} {:.16e}", self.i_mass[i])?;
        }
        Ok(())
    }
}

/// Result of the `Q₀` factorization check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Q0Identity {
    /// `Q₀(e)` from the assembled form
    pub form: f64,
    /// `Σ c_i ρ_i ρ_{i+1} ((e/ρ)_{i+1} − (e/ρ)_i)²`
    pub factorized: f64,
    /// Boundary term `r_M ρ₁'/ρ₁ e(r_M)²` left by integration by parts on the truncated line
    pub boundary_term: f64,
    /// Whether `e(r_M)²/r_M²` passed the grid-edge check
    pub asserted: bool,
    pub diagnostic: Option<String>,
}

impl Q0Identity {
    pub fn residual(&self) -> f64 {
        (self.form - self.factorized).abs()
    }
}

pub fn q0_identity_check(e: &RadialFunction, bundle: &SectorOperatorBundle) -> Result<Q0Identity> {
    bundle.check(e)?;
    let g = &bundle.grid;
    let c = g.stiffness();
    let rho = &bundle.rho;
    let x = &e.values;
    let mut factorized = 0.0;
    for i in 1..g.last() {
        let du = x[i + 1] / rho[i + 1] - x[i] / rho[i];
        factorized += c[i] * rho[i] * rho[i + 1] * du * du;
    }
    let form = bundle.q0.quad(x);
    let last = g.last();
    let r = g.r_max();
    let boundary_term = r * (rho[last] - rho[last - 1]) / (g.nodes[last] - g.nodes[last - 1]) / rho[last] * x[last] * x[last];
    let edge = e.edge_quantity();
    let asserted = edge <= EDGE_TOLERANCE;
    let diagnostic = (!asserted).then(|| format!("e(r_M)²/r_M² = {edge:e} exceeds {EDGE_TOLERANCE:e}"));
    Ok(Q0Identity { form, factorized, boundary_term, asserted, diagnostic })
}

/// Value of `Q_loc^±(u, v)` with the norm it is compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QlocValue {
    pub value: f64,
    /// `‖u‖²_{H₁} + ‖v‖²_{H₋₁} + ∫ρ₁²|u ± v|² r dr`
    pub norm_sq: f64,
    /// False when the inputs are not negligible beyond `0.8 r_M`
    pub compact: bool,
}

/// `∫ (|u'|² + |v'|² + 4|u|²/r² − (1 − ρ₁²)(|u|² + |v|²) + ρ₁²|u ± v|²) r dr`.
pub fn qloc_pm(u: &RadialFunction, v: &RadialFunction, sign: f64, p: &VortexProfile) -> Result<QlocValue> {
    if !Arc::ptr_eq(&u.grid, &v.grid) && *u.grid != *v.grid {
        return Err(VortexError::usage("u and v live on different grids"));
    }
    if u.j != 1 || v.j != -1 {
        return Err(VortexError::usage("Q_loc acts on a sector 1 function u and a sector −1 function v"));
    }
    let g = &u.grid;
    let d = Tridiag::stiffness(g);
    let m = g.masses();
    let mut value = d.quad(&u.values) + d.quad(&v.values);
    let mut coupling = 0.0;
    for i in 1..m.len() {
        let r = g.nodes[i];
        let (a, b) = (u.values[i], v.values[i]);
        let rho = p.rho(r);
        let sum = rho * rho * (a + sign * b).powi(2);
        value += m[i] * (4.0 * a * a / (r * r) - p.one_minus_rho_sq(r) * (a * a + b * b) + sum);
        coupling += m[i] * sum;
    }
    let norm_sq = u.h_norm_sq() + v.h_norm_sq() + coupling;
    let cut = 0.8 * g.r_max();
    let tail = g
        .nodes
        .iter()
        .zip(u.values.iter().zip(&v.values))
        .filter(|(r, _)| **r > cut)
        .fold(0.0f64, |acc, (_, (a, b))| acc.max(a.abs()).max(b.abs()));
    Ok(QlocValue { value, norm_sq, compact: tail <= 1e-12 })
}

// ---------------------------------------------------------------------------
// Banded symmetric algebra

/// Symmetric band matrix, lower storage: `a[i·(bw+1) + k] = A[i, i−k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBanded {
    n: usize,
    bw: usize,
    a: Vec<f64>,
}

impl SymBanded {
    pub fn zeros(n: usize, bw: usize) -> Self {
        SymBanded { n, bw, a: vec![0.0; n * (bw + 1)] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.a[i * (self.bw + 1) + (i - j)]
        }
    }

    /// Adds `v` to `A[i,j]` (and to `A[j,i]`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry outside the band");
        self.a[i * (self.bw + 1) + (i - j)] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            y[i] += self.a[i * (self.bw + 1)] * x[i];
            for k in 1..=self.bw.min(i) {
                let v = self.a[i * (self.bw + 1) + k];
                y[i] += v * x[i - k];
                y[i - k] += v * x[i];
            }
        }
        y
    }

    pub fn quad(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `self − s·other`
    pub fn shifted(&self, s: f64, other: &SymBanded) -> SymBanded {
        assert_eq!((self.n, self.bw), (other.n, other.bw));
        SymBanded { n: self.n, bw: self.bw, a: self.a.iter().zip(&other.a).map(|(x, y)| x - s * y).collect() }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Unpivoted `LDLᵀ`; exact zero pivots are nudged to a tiny positive value.
    pub fn ldlt(&self) -> Ldlt {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let scale = self.a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let mut l = vec![0.0; n * w];
        let mut d = vec![0.0; n];
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for jj in lo..i {
                let mut s = self.a[i * w + (i - jj)];
                for k in lo.max(jj.saturating_sub(bw))..jj {
                    s -= l[i * w + (i - k)] * l[jj * w + (jj - k)] * d[k];
                }
                l[i * w + (i - jj)] = s / d[jj];
            }
            let mut s = self.a[i * w];
            for k in lo..i {
                let lik = l[i * w + (i - k)];
                s -= lik * lik * d[k];
            }
            if s.abs() < 1e-300 * scale || s == 0.0 {
                s = f64::EPSILON * scale;
            }
            d[i] = s;
        }
        Ldlt { n, bw, l, d }
    }
}

pub struct Ldlt {
    n: usize,
    bw: usize,
    l: Vec<f64>,
    d: Vec<f64>,
}

impl Ldlt {
    pub fn negatives(&self) -> usize {
        self.d.iter().filter(|&&x| x < 0.0).count()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let w = self.bw + 1;
        let mut x = b.to_vec();
        for i in 0..self.n {
            for k in i.saturating_sub(self.bw)..i {
                x[i] -= self.l[i * w + (i - k)] * x[k];
            }
        }
        for i in 0..self.n {
            x[i] /= self.d[i];
        }
        for i in (0..self.n).rev() {
            for k in (i + 1)..(i + 1 + self.bw).min(self.n) {
                x[i] -= self.l[k * w + (k - i)] * x[k];
            }
        }
        x
    }
}

// ---------------------------------------------------------------------------
// Coercivity blocks

/// A symmetric pencil `(K, G)` over one sector or a coupled `(j, −j)` pair,
/// with linear constraints expressed in block coordinates.
#[derive(Debug, Clone)]
pub struct Block {
    pub label: String,
    k: SymBanded,
    g: SymBanded,
    constraints: Vec<Vec<f64>>,
    /// Block index of node `i` for each component, `None` where the node is fixed to zero.
    index: Vec<Vec<Option<usize>>>,
    grid: Arc<RadialGrid>,
    sectors: Vec<i32>,
}

impl Block {
    /// `K = Q_{R,j} + i_q I_R`, `G = H_j + i_g I_R`, restricted to the active nodes.
    pub fn single(label: &str, b: &SectorOperatorBundle, i_q: f64, i_g: f64, constraints: &[&Constraint]) -> Block {
        let nodes = b.grid.nodes.len();
        let start = b.start();
        let n = nodes - start;
        let index = vec![(0..nodes).map(|i| (i >= start).then(|| i - start)).collect::<Vec<_>>()];
        let mut k = SymBanded::zeros(n, 1);
        let mut g = SymBanded::zeros(n, 1);
        add_tridiag(&mut k, &b.q, &index[0], 1.0);
        add_tridiag(&mut g, &b.gram, &index[0], 1.0);
        for i in start..nodes {
            let p = index[0][i].unwrap();
            k.add(p, p, i_q * b.i_mass[i]);
            g.add(p, p, i_g * b.i_mass[i]);
        }
        let constraints = constraints.iter().map(|c| scatter(&index, &[&c.first], n)).collect();
        Block { label: label.into(), k, g, constraints, index, grid: b.grid.clone(), sectors: vec![b.j] }
    }

    /// `K = Q_{R,j}(e) + Q_{R,j'}(f) + i_q I_R(e + s f)`, `G = H_j(e) + H_{j'}(f) + i_g I_R(e + s f)`.
    pub fn pair(
        label: &str,
        be: &SectorOperatorBundle,
        bf: &SectorOperatorBundle,
        sign: f64,
        i_q: f64,
        i_g: f64,
        constraints: &[&Constraint],
    ) -> Block {
        let nodes = be.grid.nodes.len();
        let (se, sf) = (be.start(), bf.start());
        let mut ie = vec![None; nodes];
        let mut jf = vec![None; nodes];
        let mut n = 0;
        for i in 0..nodes {
            if i >= se {
                ie[i] = Some(n);
                n += 1;
            }
            if i >= sf {
                jf[i] = Some(n);
                n += 1;
            }
        }
        let mut k = SymBanded::zeros(n, 2);
        let mut g = SymBanded::zeros(n, 2);
        add_tridiag(&mut k, &be.q, &ie, 1.0);
        add_tridiag(&mut k, &bf.q, &jf, 1.0);
        add_tridiag(&mut g, &be.gram, &ie, 1.0);
        add_tridiag(&mut g, &bf.gram, &jf, 1.0);
        for i in 0..nodes {
            let w = be.i_mass[i];
            let terms = [(ie[i], 1.0), (jf[i], sign)];
            for &(a, ca) in &terms {
                for &(b2, cb) in &terms {
                    if let (Some(a), Some(b2)) = (a, b2) {
                        if a >= b2 {
                            k.add(a, b2, i_q * w * ca * cb);
                            g.add(a, b2, i_g * w * ca * cb);
                        }
                    }
                }
            }
        }
        let index = vec![ie, jf];
        let constraints = constraints
            .iter()
            .map(|c| {
                let second = c.second.as_ref().expect("coupled constraint");
                scatter(&index, &[&c.first, second], n)
            })
            .collect();
        Block { label: label.into(), k, g, constraints, index, grid: be.grid.clone(), sectors: vec![be.j, bf.j] }
    }

    pub fn dim(&self) -> usize {
        self.k.n
    }

    pub fn stiffness(&self) -> &SymBanded {
        &self.k
    }

    pub fn gram(&self) -> &SymBanded {
        &self.g
    }

    pub fn constraints(&self) -> &[Vec<f64>] {
        &self.constraints
    }

    /// Splits a block vector into radial functions.
    pub fn components(&self, x: &[f64]) -> Vec<RadialFunction> {
        self.index
            .iter()
            .zip(&self.sectors)
            .map(|(idx, &j)| RadialFunction {
                grid: self.grid.clone(),
                j,
                values: idx.iter().map(|p| p.map_or(0.0, |p| x[p])).collect(),
            })
            .collect()
    }

    /// Gathers radial values into a block vector.
    pub fn gather(&self, parts: &[&[f64]]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        for (idx, vals) in self.index.iter().zip(parts) {
            for (i, p) in idx.iter().enumerate() {
                if let Some(p) = p {
                    x[*p] = vals[i];
                }
            }
        }
        x
    }
}

fn add_tridiag(m: &mut SymBanded, t: &Tridiag, index: &[Option<usize>], s: f64) {
    for i in 0..t.diag.len() {
        if let Some(p) = index[i] {
            m.add(p, p, s * t.diag[i]);
            if i + 1 < t.diag.len() {
                if let Some(q) = index[i + 1] {
                    m.add(q, p, s * t.off[i]);
                }
            }
        }
    }
}

fn scatter(index: &[Vec<Option<usize>>], coeffs: &[&Vec<f64>], n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    for (idx, c) in index.iter().zip(coeffs) {
        for (i, p) in idx.iter().enumerate() {
            if let Some(p) = p {
                v[*p] += c[i];
            }
        }
    }
    v
}

/// Smallest constrained generalized eigenvalue and its eigenvector.
#[derive(Debug, Clone)]
pub struct MinEig {
    pub lambda: f64,
    /// Block vector normalized to unit `G`-norm.
    pub vector: Vec<f64>,
    /// Rayleigh quotient of the returned vector
    pub rayleigh: f64,
}

impl MinEig {
    pub fn witness(&self, block: &Block) -> Vec<RadialFunction> {
        block.components(&self.vector)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EigenMethod {
    /// Inertia bisection with banded `LDLᵀ` and bordered inverse iteration.
    Banded,
    /// Dense eigensolve on an orthonormal basis of the constraint complement.
    Dense,
}

/// Smallest eigenvalue of `K x = λ G x` on `{x : Cᵀx = 0}`.
pub fn min_eig_constrained(block: &Block, method: EigenMethod) -> Result<MinEig> {
    let g_fact = block.g.ldlt();
    if g_fact.negatives() > 0 {
        return Err(VortexError::numerical(format!("Gram matrix of block {} is indefinite", block.label)));
    }
    check_independent(&block.constraints)?;
    match method {
        EigenMethod::Banded => banded_min_eig(block),
        EigenMethod::Dense => dense_min_eig(block),
    }
}

fn check_independent(cs: &[Vec<f64>]) -> Result<()> {
    if cs.is_empty() {
        return Ok(());
    }
    let m = cs.len();
    let gram = DMatrix::from_fn(m, m, |a, b| cs[a].iter().zip(&cs[b]).map(|(x, y)| x * y).sum::<f64>());
    let eig = SymmetricEigen::new(gram);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0) || min <= 1e-14 * max {
        return Err(VortexError::usage("constraints are linearly dependent after discretization"));
    }
    Ok(())
}

struct Bordered {
    fact: Ldlt,
    /// `A⁻¹C`, one column per constraint
    ainv_c: Vec<Vec<f64>>,
    schur: DMatrix<f64>,
}

impl Bordered {
    fn new(block: &Block, sigma: f64) -> Bordered {
        let a = block.k.shifted(sigma, &block.g);
        let fact = a.ldlt();
        let ainv_c: Vec<Vec<f64>> = block.constraints.iter().map(|c| fact.solve(c)).collect();
        let m = ainv_c.len();
        let schur = DMatrix::from_fn(m, m, |i, j| {
            block.constraints[i].iter().zip(&ainv_c[j]).map(|(x, y)| x * y).sum::<f64>()
        });
        Bordered { fact, ainv_c, schur }
    }

    /// Eigenvalues of the constrained pencil strictly below the shift.
    fn count(&self) -> usize {
        let m = self.ainv_c.len();
        let mut neg = self.fact.negatives() as i64;
        if m > 0 {
            let s = SymmetricEigen::new(-self.schur.clone());
            neg += s.eigenvalues.iter().filter(|&&x| x < 0.0).count() as i64;
            neg -= m as i64;
        }
        neg.max(0) as usize
    }

    /// Solves `A x = b` subject to `Cᵀ x = 0`.
    fn solve(&self, block: &Block, b: &[f64]) -> Vec<f64> {
        let mut x = self.fact.solve(b);
        let m = self.ainv_c.len();
        if m > 0 {
            let rhs = DVector::from_fn(m, |i, _| block.constraints[i].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>());
            let mu = self.schur.clone().lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(m));
            for (c, &mu_c) in self.ainv_c.iter().zip(mu.iter()) {
                for (xi, ci) in x.iter_mut().zip(c) {
                    *xi -= mu_c * ci;
                }
            }
        }
        x
    }
}

fn banded_min_eig(block: &Block) -> Result<MinEig> {
    let count = |s: f64| Bordered::new(block, s).count();
    let mut lo = -1.0;
    let mut guard = 0;
    while count(lo) > 0 {
        lo *= 2.0;
        guard += 1;
        if guard > 80 {
            return Err(VortexError::numerical("constrained spectrum unbounded below"));
        }
    }
    let mut hi = 1.0;
    guard = 0;
    while count(hi) == 0 {
        hi *= 2.0;
        guard += 1;
        if guard > 80 {
            return Err(VortexError::numerical("no constrained eigenvalue found"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-13 * hi.abs().max(lo.abs()).max(1e-2) {
            break;
        }
        if count(mid) == 0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let shift = lambda - 1e-8 * lambda.abs().max(1e-3);
    let solver = Bordered::new(block, shift);
    let n = block.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    x = solver.solve(block, &block.g.matvec(&x));
    for _ in 0..6 {
        let norm = block.g.quad(&x).sqrt();
        x.iter_mut().for_each(|v| *v /= norm);
        x = solver.solve(block, &block.g.matvec(&x));
    }
    let norm = block.g.quad(&x).sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
    let rayleigh = block.k.quad(&x);
    fix_sign(&mut x);
    Ok(MinEig { lambda, vector: x, rayleigh })
}

fn fix_sign(x: &mut [f64]) {
    let big = x.iter().cloned().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
    if big < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Orthonormal basis of `{x : Cᵀx = 0}` from Householder reflections of the constraint columns.
pub fn constraint_complement(n: usize, cs: &[Vec<f64>]) -> DMatrix<f64> {
    let m = cs.len();
    let mut c = DMatrix::from_fn(n, m, |i, j| cs[j][i]);
    let mut reflectors: Vec<DVector<f64>> = Vec::with_capacity(m);
    for k in 0..m {
        let col = c.view((k, k), (n - k, 1)).clone_owned();
        let alpha = -col[0].signum() * col.norm();
        let mut v = DVector::zeros(n);
        for i in k..n {
            v[i] = c[(i, k)];
        }
        v[k] -= alpha;
        let vn = v.norm();
        if vn > 0.0 {
            v /= vn;
        }
        let proj = v.transpose() * &c;
        c -= 2.0 * &v * proj;
        reflectors.push(v);
    }
    // Q = H_0 H_1 … applied to the trailing identity columns
    let mut z = DMatrix::zeros(n, n - m);
    for j in 0..(n - m) {
        z[(m + j, j)] = 1.0;
    }
    for v in reflectors.iter().rev() {
        let proj = v.transpose() * &z;
        z -= 2.0 * v * proj;
    }
    z
}

fn dense_min_eig(block: &Block) -> Result<MinEig> {
    let n = block.dim();
    let z = constraint_complement(n, &block.constraints);
    let k = z.transpose() * block.k.to_dense() * &z;
    let g = z.transpose() * block.g.to_dense() * &z;
    let chol = g
        .cholesky()
        .ok_or_else(|| VortexError::numerical(format!("Gram matrix of block {} is not positive definite", block.label)))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| VortexError::numerical("singular Cholesky factor"))?;
    let mut m = &linv * k * linv.transpose();
    m = 0.5 * (&m + m.transpose());
    let eig = SymmetricEigen::new(m);
    let (idx, &lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty block");
    let y = linv.transpose() * eig.eigenvectors.column(idx);
    let mut x: Vec<f64> = (&z * y).iter().cloned().collect();
    let norm = block.g.quad(&x).sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
    let rayleigh = block.k.quad(&x);
    fix_sign(&mut x);
    Ok(MinEig { lambda, vector: x, rayleigh })
}

// ---------------------------------------------------------------------------
// The full constrained form

/// Bundles for sectors `−j_max..=j_max` at one cutoff scale.
pub struct SectorFamily {
    pub r_cut: f64,
    pub grid: Arc<RadialGrid>,
    pub bundles: BTreeMap<i32, SectorOperatorBundle>,
}

impl SectorFamily {
    pub fn new(grid: &Arc<RadialGrid>, p: &VortexProfile, r_cut: f64, j_max: i32) -> Result<Self> {
        if j_max < 1 {
            return Err(VortexError::usage("sector range must include j = ±1"));
        }
        let bundles = (-j_max..=j_max)
            .map(|j| assemble_sector(j, r_cut, grid, p).map(|b| (j, b)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(SectorFamily { r_cut, grid: grid.clone(), bundles })
    }

    pub fn j_max(&self) -> i32 {
        *self.bundles.keys().last().unwrap()
    }

    pub fn bundle(&self, j: i32) -> &SectorOperatorBundle {
        &self.bundles[&j]
    }

    /// The blocks into which `Q_R = 𝒬_R + 2𝓘_R` splits, measured against `‖ε‖²_H + 𝓘_R`
    /// and carrying the three orthogonality conditions.
    pub fn blocks(&self, constrained: bool) -> Vec<Block> {
        let b0 = self.bundle(0);
        let phase = &b0.constraints[0];
        let tx = &self.bundle(1).constraints[0];
        let ty = &self.bundle(1).constraints[1];
        let pick = |c: &'static str| -> Vec<&Constraint> {
            if !constrained {
                return vec![];
            }
            match c {
                "phase" => vec![phase],
                "x" => vec![tx],
                _ => vec![ty],
            }
        };
        let mut blocks = vec![
            Block::single("a0", b0, 2.0, 1.0, &[]),
            Block::single("b0", b0, 0.0, 0.0, &pick("phase")),
            Block::pair("a1", self.bundle(1), self.bundle(-1), 1.0, 1.0, 0.5, &pick("x")),
            Block::pair("b1", self.bundle(1), self.bundle(-1), -1.0, 1.0, 0.5, &pick("y")),
        ];
        for j in 2..=self.j_max() {
            let (e, f) = (self.bundle(j), self.bundle(-j));
            blocks.push(Block::pair(&format!("a{j}"), e, f, 1.0, 1.0, 0.5, &[]));
            blocks.push(Block::pair(&format!("b{j}"), e, f, -1.0, 1.0, 0.5, &[]));
        }
        blocks
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockEig {
    pub label: String,
    pub lambda_min: f64,
}

/// Smallest eigenvalue of each block of the constrained `Q_R` pencil.
pub fn constrained_spectrum(family: &SectorFamily, method: EigenMethod) -> Result<Vec<BlockEig>> {
    use rayon::prelude::*;
    family
        .blocks(true)
        .par_iter()
        .map(|b| min_eig_constrained(b, method).map(|e| BlockEig { label: b.label.clone(), lambda_min: e.lambda }))
        .collect()
}

// ---------------------------------------------------------------------------
// Mode data and the dyadic scan

/// Sector components `ε_j = a_j + i b_j` on a common grid.
#[derive(Debug, Clone)]
pub struct SectorData {
    pub grid: Arc<RadialGrid>,
    pub modes: BTreeMap<i32, (Vec<f64>, Vec<f64>)>,
}

impl SectorData {
    pub fn zero(grid: &Arc<RadialGrid>, j_max: i32) -> Self {
        let n = grid.nodes.len();
        SectorData { grid: grid.clone(), modes: (-j_max..=j_max).map(|j| (j, (vec![0.0; n], vec![0.0; n]))).collect() }
    }

    /// Seeded smooth components with `|ε_j| ~ r^{|j+1|}` at the origin and Gaussian decay.
    pub fn random(grid: &Arc<RadialGrid>, j_max: i32, amplitude: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Self::zero(grid, j_max);
        for (&j, (a, b)) in data.modes.iter_mut() {
            let k = (j + 1).unsigned_abs() as i32;
            for part in [a, b] {
                let c: f64 = amplitude * rng.gen_range(-1.0..1.0);
                let w: f64 = rng.gen_range(2.0..8.0);
                let c2: f64 = amplitude * rng.gen_range(-1.0..1.0);
                let w2: f64 = rng.gen_range(6.0..20.0);
                for (v, &r) in part.iter_mut().zip(&grid.nodes) {
                    let s = (r / (1.0 + r)).powi(k);
                    *v = s * (c * (-(r / w).powi(2)).exp() + c2 * r / (1.0 + r) * (-(r / w2).powi(2)).exp());
                }
            }
        }
        data
    }

    pub fn is_zero(&self) -> bool {
        self.modes.values().all(|(a, b)| a.iter().chain(b).all(|v| *v == 0.0))
    }

    /// Adds multiples of the constraint representers so the three orthogonality conditions hold.
    pub fn enforce_orthogonality(&mut self, p: &VortexProfile) {
        let g = self.grid.clone();
        let chi = CutoffSpec::unit();
        let s = sample_profile(&g, p);
        let phase = phase_constraint(&g, p);
        {
            let b0 = &mut self.modes.get_mut(&0).expect("sector 0").1;
            let dir: Vec<f64> = (0..g.nodes.len()).map(|i| chi.value(g.nodes[i]) * s.rho[i]).collect();
            let t = phase.apply(b0, None) / phase.apply(&dir, None);
            b0.iter_mut().zip(&dir).for_each(|(x, d)| *x -= t * d);
        }
        for (sign, real) in [(1.0, true), (-1.0, false)] {
            let c = translation_constraint(&g, p, sign);
            let de: Vec<f64> = (0..g.nodes.len()).map(|i| chi.value(g.nodes[i]) * s.dm[i]).collect();
            let df: Vec<f64> = (0..g.nodes.len()).map(|i| sign * chi.value(g.nodes[i]) * (s.dm[i] + 2.0 * s.q[i])).collect();
            let pick = |m: &(Vec<f64>, Vec<f64>)| if real { m.0.clone() } else { m.1.clone() };
            let (e, f) = (pick(&self.modes[&1]), pick(&self.modes[&-1]));
            let t = c.apply(&e, Some(&f)) / c.apply(&de, Some(&df));
            for (j, d) in [(1, &de), (-1, &df)] {
                let m = self.modes.get_mut(&j).unwrap();
                let target = if real { &mut m.0 } else { &mut m.1 };
                target.iter_mut().zip(d.iter()).for_each(|(x, d)| *x -= t * d);
            }
        }
    }

    /// The three orthogonality functionals.
    pub fn orthogonality(&self, p: &VortexProfile) -> [f64; 3] {
        let g = &self.grid;
        let ph = phase_constraint(g, p).apply(&self.modes[&0].1, None);
        let tx = translation_constraint(g, p, 1.0).apply(&self.modes[&1].0, Some(&self.modes[&-1].0));
        let ty = translation_constraint(g, p, -1.0).apply(&self.modes[&1].1, Some(&self.modes[&-1].1));
        [tx, ty, ph]
    }

    /// `Σ_j ‖ε_j‖²_{H_j}`.
    pub fn h_norm_sq(&self) -> f64 {
        self.modes
            .iter()
            .map(|(&j, (a, b))| {
                let g = sector_gram(&self.grid, j);
                g.quad(a) + g.quad(b)
            })
            .sum()
    }

    /// `(Q_R(ε), 𝓘_R(ε))` at the family's cutoff.
    pub fn q_and_i(&self, family: &SectorFamily) -> (f64, f64) {
        let mut q = 0.0;
        for (&j, (a, b)) in &self.modes {
            let bj = family.bundle(j);
            q += bj.q.quad(a) + bj.q.quad(b);
        }
        let b0 = family.bundle(0);
        let mut i = b0.i_form(&self.modes[&0].0);
        for j in 1..=self.j_max() {
            let (p, m) = (&self.modes[&j], &self.modes[&-j]);
            let sum: Vec<f64> = p.0.iter().zip(&m.0).map(|(x, y)| x + y).collect();
            let dif: Vec<f64> = p.1.iter().zip(&m.1).map(|(x, y)| x - y).collect();
            i += 0.5 * (b0.i_form(&sum) + b0.i_form(&dif));
        }
        (q + 2.0 * i, i)
    }

    fn j_max(&self) -> i32 {
        *self.modes.keys().last().unwrap()
    }

    /// `∫_R^{2R} (|ε₁|² + |ε₋₁|²)/r² r dr`.
    pub fn window_mass(&self, r_cut: f64) -> f64 {
        let g = &self.grid;
        let m = g.masses();
        let (p, q) = (&self.modes[&1], &self.modes[&-1]);
        let mut s = 0.0;
        for i in 1..m.len() {
            let r = g.nodes[i];
            if r < r_cut || r > 2.0 * r_cut {
                continue;
            }
            // trapezoid restricted to the window: halve the weight of the two end cells' outer parts
            let mut w = m[i];
            if i > 0 && g.nodes[i - 1] < r_cut {
                w -= 0.5 * (g.nodes[i] - g.nodes[i - 1]) * r;
            }
            if i < g.last() && g.nodes[i + 1] > 2.0 * r_cut {
                w -= 0.5 * (g.nodes[i + 1] - g.nodes[i]) * r;
            }
            s += w * (p.0[i].powi(2) + p.1[i].powi(2) + q.0[i].powi(2) + q.1[i].powi(2)) / (r * r);
        }
        s
    }

    /// `‖ε₁‖²_{H₁} + ‖ε₋₁‖²_{H₋₁}`.
    pub fn unit_sector_norm_sq(&self) -> f64 {
        let (g1, gm1) = (sector_gram(&self.grid, 1), sector_gram(&self.grid, -1));
        let (p, q) = (&self.modes[&1], &self.modes[&-1]);
        g1.quad(&p.0) + g1.quad(&p.1) + gm1.quad(&q.0) + gm1.quad(&q.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub r: f64,
    pub window_mass: f64,
    pub q_r: f64,
    pub i_r: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum ScanOutcome {
    /// `ε = 0`: the ratio is undefined.
    ZeroInput,
    Estimate {
        r_selected: f64,
        kappa_estimate: f64,
        window_mass: f64,
        /// `(2/N₀)(‖ε₁‖²_{H₁} + ‖ε₋₁‖²_{H₋₁})`
        pigeonhole_bound: f64,
        rows: Vec<ScanRow>,
    },
}

/// Scans `R = 2^k R₀`, `k = 0..N₀`, selects the `R` minimizing the window mass and
/// returns `Q_R(ε)/(‖ε‖²_H + 𝓘_R(ε))` there.
pub fn coercivity_scan(r0: f64, n0: u32, data: &SectorData, p: &VortexProfile) -> Result<ScanOutcome> {
    if !(r0 >= 1.0) || n0 == 0 {
        return Err(VortexError::usage("coercivity scan needs R₀ ≥ 1 and N₀ ≥ 1"));
    }
    if data.is_zero() {
        return Ok(ScanOutcome::ZeroInput);
    }
    let h = data.h_norm_sq();
    let mut rows = Vec::new();
    for k in 0..=n0 {
        let r = r0 * 2f64.powi(k as i32);
        let family = SectorFamily::new(&data.grid, p, r, data.j_max())?;
        let (q, i) = data.q_and_i(&family);
        rows.push(ScanRow { r, window_mass: data.window_mass(r), q_r: q, i_r: i, ratio: q / (h + i) });
    }
    let best = rows
        .iter()
        .min_by(|a, b| a.window_mass.total_cmp(&b.window_mass))
        .expect("at least one scale")
        .clone();
    Ok(ScanOutcome::Estimate {
        r_selected: best.r,
        kappa_estimate: best.ratio,
        window_mass: best.window_mass,
        pigeonhole_bound: 2.0 / n0 as f64 * data.unit_sector_norm_sq(),
        rows,
    })
}

/// JSON sector report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorReport {
    pub j: i32,
    #[serde(rename = "R")]
    pub r: f64,
    pub grid_meta: GridMeta,
    /// Unconstrained `Q_{R,j}` against `H_j`
    pub lambda_min: f64,
    /// Constrained value of the `Q_R` block containing this sector
    pub kappa_estimate: f64,
    pub identity_residuals: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_segments() {
        let g = RadialGrid::graded();
        assert_eq!(g.nodes().len(), 1000 + 750 + 400 + 1);
        assert!((g.r_max() - 60.0).abs() < 1e-12);
        let m: f64 = g.masses().iter().sum();
        assert!((m - 1800.0).abs() < 1e-9);
        assert!(g.warnings().is_empty());
        assert!(RadialGrid::from_segments(&[(1.0, 0.5), (0.5, 0.1)]).is_err());
    }

    #[test]
    fn banded_ldlt_matches_dense() {
        let n = 9;
        let mut a = SymBanded::zeros(n, 2);
        for i in 0..n {
            a.add(i, i, 4.0 + i as f64 * 0.1 - 3.0);
            if i + 1 < n {
                a.add(i + 1, i, -1.0);
            }
            if i + 2 < n {
                a.add(i + 2, i, 0.3);
            }
        }
        let dense = a.to_dense();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = a.ldlt().solve(&b);
        let r = &dense * DVector::from_vec(x) - DVector::from_vec(b);
        assert!(r.norm() < 1e-12);
        let eig = SymmetricEigen::new(dense);
        let neg = eig.eigenvalues.iter().filter(|v| **v < 0.0).count();
        assert_eq!(a.ldlt().negatives(), neg);
    }

    #[test]
    fn complement_is_orthonormal() {
        let n = 7;
        let cs = vec![(0..n).map(|i| i as f64 + 1.0).collect::<Vec<_>>(), (0..n).map(|i| (i as f64).cos()).collect()];
        let z = constraint_complement(n, &cs);
        let eye = z.transpose() * &z;
        assert!((eye - DMatrix::identity(n - 2, n - 2)).norm() < 1e-12);
        for c in &cs {
            let v = DVector::from_vec(c.clone());
            assert!((z.transpose() * v).norm() < 1e-12);
        }
    }

    #[test]
    fn origin_condition() {
        let g = Arc::new(RadialGrid::from_segments(&[(2.0, 0.5)]).unwrap());
        assert!(RadialFunction::new(&g, 0, vec![1.0, 0.0, 0.0, 0.0, 0.0]).unwrap_err().is_usage());
        assert!(RadialFunction::new(&g, -1, vec![1.0, 0.0, 0.0, 0.0, 0.0]).is_ok());
        let f = RadialFunction::new(&g, 2, vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((f.at(0.75) - 1.5).abs() < 1e-15);
        assert_eq!(f.at(3.0), 0.0);
    }
}
