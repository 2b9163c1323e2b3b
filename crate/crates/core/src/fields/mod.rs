//! Two-dimensional fields `Ψ = e^{iα}V₁(· − c) + w` on the square `[−L, L]²`.
//!
//! The vortex part is evaluated analytically from the profile; the perturbation
//! `w` is a sine series vanishing on the boundary, so its derivatives are
//! spectral. All integrals use the trapezoid rule on the node grid.

mod energy;
mod recipes;

pub use energy::{
    p_r, renormalized_energy_decomposed, renormalized_energy_direct, Decomposition, Sweep,
    SWEEP_FRACTIONS,
};
pub use recipes::{random_compact_perturbation, sector_tail_perturbation, Family, PerturbationRecipe};

use std::sync::Arc;

use ndarray::{Array2, Axis, Zip};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VortexError};
use crate::profile::VortexProfile;
use crate::spectral::{Basis, Spectral2D};

pub type C64 = Complex64;

const I: C64 = C64::new(0.0, 1.0);

/// `⟨a, b⟩ = Re(a b̄)`.
#[inline]
pub fn dot(a: C64, b: C64) -> f64 {
    a.re * b.re + a.im * b.im
}

/// Uniform grid `x_i = −L + i·h`, `h = 2L/(N − 1)`, on both axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    half_width: f64,
    n: usize,
}

impl Grid2D {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(VortexError::usage(format!("half width must be positive, got {half_width}")));
        }
        if n < 16 {
            return Err(VortexError::usage(format!("need at least 16 points per axis, got {n}")));
        }
        Ok(Grid2D { half_width, n })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.n - 1 {
            0.5
        } else {
            1.0
        }
    }
}

/// The radial cutoff `χ_R(r) = χ(r/R)` with `χ` a quintic smoothstep from 1 to 0 on `[1, 2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    scale: f64,
}

impl CutoffSpec {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(VortexError::usage(format!("cutoff scale must be positive, got {scale}")));
        }
        Ok(CutoffSpec { scale })
    }

    /// The undilated cutoff `χ`.
    pub fn unit() -> Self {
        CutoffSpec { scale: 1.0 }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn value(&self, r: f64) -> f64 {
        let s = r / self.scale - 1.0;
        if s <= 0.0 {
            1.0
        } else if s >= 1.0 {
            0.0
        } else {
            1.0 - s * s * s * (s * (6.0 * s - 15.0) + 10.0)
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let s = r / self.scale - 1.0;
        if s <= 0.0 || s >= 1.0 {
            0.0
        } else {
            -30.0 * s * s * (s - 1.0) * (s - 1.0) / self.scale
        }
    }

    pub fn second_derivative(&self, r: f64) -> f64 {
        let s = r / self.scale - 1.0;
        if s <= 0.0 || s >= 1.0 {
            0.0
        } else {
            -60.0 * s * (s - 1.0) * (2.0 * s - 1.0) / (self.scale * self.scale)
        }
    }
}

/// Value and first and second derivatives of a complex function at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: C64,
    pub dx: C64,
    pub dy: C64,
    pub dxx: C64,
    pub dxy: C64,
    pub dyy: C64,
}

impl Jet {
    fn scale(self, c: C64) -> Jet {
        Jet {
            v: self.v * c,
            dx: self.dx * c,
            dy: self.dy * c,
            dxx: self.dxx * c,
            dxy: self.dxy * c,
            dyy: self.dyy * c,
        }
    }

    pub fn laplacian(&self) -> C64 {
        self.dxx + self.dyy
    }
}

/// Node values and gradient of a complex field; the first index is x, the second y.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampled {
    pub val: Array2<C64>,
    pub dx: Array2<C64>,
    pub dy: Array2<C64>,
}

impl Sampled {
    pub fn zeros(n: usize) -> Self {
        Sampled {
            val: Array2::zeros((n, n)),
            dx: Array2::zeros((n, n)),
            dy: Array2::zeros((n, n)),
        }
    }

    /// Samples `f(x, y) = [value, ∂ₓ, ∂ᵧ]` at every node.
    pub fn from_fn<F>(space: &FieldSpace, f: F) -> Self
    where
        F: Fn(f64, f64) -> [C64; 3] + Sync,
    {
        let xs = space.coords();
        let n = xs.len();
        let mut out = Sampled::zeros(n);
        Zip::indexed(&mut out.val)
            .and(&mut out.dx)
            .and(&mut out.dy)
            .par_for_each(|(i, j), v, dx, dy| {
                let [a, b, c] = f(xs[i], xs[j]);
                *v = a;
                *dx = b;
                *dy = c;
            });
        out
    }

    pub fn scaled(&self, t: C64) -> Sampled {
        Sampled {
            val: self.val.mapv(|v| v * t),
            dx: self.dx.mapv(|v| v * t),
            dy: self.dy.mapv(|v| v * t),
        }
    }

    pub fn sub(&self, other: &Sampled) -> Sampled {
        Sampled {
            val: &self.val - &other.val,
            dx: &self.dx - &other.dx,
            dy: &self.dy - &other.dy,
        }
    }

    pub fn add(&self, other: &Sampled) -> Sampled {
        Sampled {
            val: &self.val + &other.val,
            dx: &self.dx + &other.dx,
            dy: &self.dy + &other.dy,
        }
    }
}

/// Grid, profile and the cached vortex data shared by every field on that grid.
#[derive(Debug)]
pub struct FieldSpace {
    grid: Grid2D,
    profile: Arc<VortexProfile>,
    spectral: Spectral2D,
    coords: Vec<f64>,
    vortex: Sampled,
    deficit: Array2<f64>,
}

impl FieldSpace {
    pub fn new(profile: Arc<VortexProfile>, half_width: f64, n: usize) -> Result<Arc<Self>> {
        let grid = Grid2D::new(half_width, n)?;
        let coords = grid.coords();
        let mut space = FieldSpace {
            grid,
            profile,
            spectral: Spectral2D::new(n, half_width),
            coords,
            vortex: Sampled::zeros(n),
            deficit: Array2::zeros((n, n)),
        };
        space.vortex = Sampled::from_fn(&space, |x, y| {
            let j = space.vortex_jet(x, y);
            [j.v, j.dx, j.dy]
        });
        let xs = &space.coords;
        let p = &space.profile;
        space.deficit = Array2::from_shape_fn((n, n), |(i, j)| p.one_minus_rho_sq(xs[i].hypot(xs[j])));
        Ok(Arc::new(space))
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn profile(&self) -> &Arc<VortexProfile> {
        &self.profile
    }

    pub fn spectral(&self) -> &Spectral2D {
        &self.spectral
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    /// `V₁` and its gradient at the nodes.
    pub fn vortex(&self) -> &Sampled {
        &self.vortex
    }

    /// `1 − |V₁|²` at the nodes.
    pub fn deficit(&self) -> &Array2<f64> {
        &self.deficit
    }

    /// Analytic jet of `V₁ = q(r)(x + iy)` at `(x, y)`.
    pub fn vortex_jet(&self, x: f64, y: f64) -> Jet {
        let f = self.profile.factors(x.hypot(y));
        let z = C64::new(x, y);
        let (q, s, t) = (f.q, f.s, f.t);
        Jet {
            v: z * q,
            dx: q + z * (s * x),
            dy: I * q + z * (s * y),
            dxx: C64::new(2.0 * s * x, 0.0) + z * (s + t * x * x),
            dxy: C64::new(s * y, s * x) + z * (t * x * y),
            dyy: C64::new(0.0, 2.0 * s * y) + z * (s + t * y * y),
        }
    }

    /// Trapezoid integral of `f(i, j)` over the box; row sums are combined in a
    /// fixed order so the result does not depend on the thread count.
    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        let n = self.grid.n;
        let g = &self.grid;
        let rows: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += g.weight(j) * f(i, j);
                }
                g.weight(i) * acc
            })
            .collect();
        let h = g.h();
        rows.iter().sum::<f64>() * h * h
    }

    /// Trapezoid integral of an array density.
    pub fn integrate_array(&self, a: &Array2<f64>) -> f64 {
        self.integrate(|i, j| a[[i, j]])
    }

    fn same_as(&self, other: &FieldSpace) -> bool {
        self.grid == other.grid && Arc::ptr_eq(&self.profile, &other.profile)
    }
}

/// A field `Ψ = e^{iα}V₁(· − c) + w` with `w` a sine series.
#[derive(Debug, Clone)]
pub struct Field2D {
    space: Arc<FieldSpace>,
    phase: f64,
    center: [f64; 2],
    coeffs: Array2<C64>,
}

impl Field2D {
    /// The vortex `V₁` itself.
    pub fn vortex(space: &Arc<FieldSpace>) -> Self {
        Self::moved_vortex(space, 0.0, [0.0, 0.0])
    }

    /// `e^{iα}V₁(· − c)`.
    pub fn moved_vortex(space: &Arc<FieldSpace>, phase: f64, center: [f64; 2]) -> Self {
        let m = space.spectral.modes();
        Field2D {
            space: Arc::clone(space),
            phase,
            center,
            coeffs: Array2::zeros((m, m)),
        }
    }

    /// `e^{iα}V₁(· − c) + w` from node values of `w`. Values on the two outer layers
    /// must vanish (up to 1e-12); they are then set to exactly zero.
    pub fn with_perturbation(space: &Arc<FieldSpace>, phase: f64, center: [f64; 2], mut w: Array2<C64>) -> Result<Self> {
        let n = space.n();
        if w.dim() != (n, n) {
            return Err(VortexError::usage(format!("perturbation has shape {:?}, grid is {n}×{n}", w.dim())));
        }
        let mut edge = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i < 2 || j < 2 || i >= n - 2 || j >= n - 2 {
                    edge = edge.max(w[[i, j]].norm());
                    w[[i, j]] = C64::new(0.0, 0.0);
                }
            }
        }
        if edge > 1e-12 {
            return Err(VortexError::usage(format!(
                "perturbation must vanish on the two outer grid layers (found |w| = {edge:.3e})"
            )));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(VortexError::usage("perturbation contains non-finite values"));
        }
        let coeffs = space.spectral.forward(&w);
        Ok(Field2D {
            space: Arc::clone(space),
            phase,
            center,
            coeffs,
        })
    }

    /// Builds `w` by sampling `f` at the nodes.
    pub fn from_fn<F>(space: &Arc<FieldSpace>, phase: f64, center: [f64; 2], f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> C64 + Sync,
    {
        let xs = space.coords();
        let n = xs.len();
        let mut w = Array2::<C64>::zeros((n, n));
        Zip::indexed(&mut w).par_for_each(|(i, j), v| *v = f(xs[i], xs[j]));
        Self::with_perturbation(space, phase, center, w)
    }

    /// Direct constructor from sine coefficients.
    pub fn from_coefficients(space: &Arc<FieldSpace>, phase: f64, center: [f64; 2], coeffs: Array2<C64>) -> Result<Self> {
        let m = space.spectral.modes();
        if coeffs.dim() != (m, m) {
            return Err(VortexError::usage("coefficient array does not match the grid"));
        }
        Ok(Field2D {
            space: Arc::clone(space),
            phase,
            center,
            coeffs,
        })
    }

    pub fn space(&self) -> &Arc<FieldSpace> {
        &self.space
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn center(&self) -> [f64; 2] {
        self.center
    }

    pub fn coefficients(&self) -> &Array2<C64> {
        &self.coeffs
    }

    /// Node values of `w`.
    pub fn perturbation_values(&self) -> Array2<C64> {
        self.space.spectral.inverse(&self.coeffs)
    }

    /// Jet of the analytic part `e^{iα}V₁(· − c)` at `(x, y)`.
    pub fn base_jet(&self, x: f64, y: f64) -> Jet {
        self.space
            .vortex_jet(x - self.center[0], y - self.center[1])
            .scale(C64::from_polar(1.0, self.phase))
    }

    /// Samples of the analytic part.
    pub fn base_sampled(&self) -> Sampled {
        if self.phase == 0.0 && self.center == [0.0, 0.0] {
            return self.space.vortex.clone();
        }
        Sampled::from_fn(&self.space, |x, y| {
            let j = self.base_jet(x, y);
            [j.v, j.dx, j.dy]
        })
    }

    /// Samples of `w` and its spectral gradient.
    pub fn perturbation_sampled(&self) -> Sampled {
        let val = self.perturbation_values();
        let (dx, dy) = self.space.spectral.gradient(&self.coeffs);
        Sampled { val, dx, dy }
    }

    /// Samples of `Ψ`.
    pub fn sample(&self) -> Sampled {
        self.base_sampled().add(&self.perturbation_sampled())
    }

    /// Samples of `ε = Ψ − V₁`.
    pub fn deviation(&self) -> Sampled {
        let w = self.perturbation_sampled();
        if self.phase == 0.0 && self.center == [0.0, 0.0] {
            return w;
        }
        self.base_sampled().sub(&self.space.vortex).add(&w)
    }

    /// `e^{iβ}Ψ`.
    pub fn rotated(&self, beta: f64) -> Field2D {
        let c = C64::from_polar(1.0, beta);
        Field2D {
            space: Arc::clone(&self.space),
            phase: self.phase + beta,
            center: self.center,
            coeffs: self.coeffs.mapv(|v| v * c),
        }
    }

    /// `Ψ(· + d)`. The perturbation is re-evaluated from its sine series; content
    /// moved into the two outer layers is discarded.
    pub fn translated(&self, d: [f64; 2]) -> Field2D {
        let xs: Vec<f64> = self.space.coords.iter().map(|x| x + d[0]).collect();
        let ys: Vec<f64> = self.space.coords.iter().map(|y| y + d[1]).collect();
        let mut w = self.space.spectral.eval_tensor(&self.coeffs, &xs, &ys, Basis::Sin, Basis::Sin);
        let n = self.space.n();
        for i in 0..n {
            for j in 0..n {
                if i < 2 || j < 2 || i >= n - 2 || j >= n - 2 {
                    w[[i, j]] = C64::new(0.0, 0.0);
                }
            }
        }
        Field2D {
            space: Arc::clone(&self.space),
            phase: self.phase,
            center: [self.center[0] - d[0], self.center[1] - d[1]],
            coeffs: self.space.spectral.forward(&w),
        }
    }

    /// `e^{−iφ}Ψ(· + a)`.
    pub fn modulated(&self, a: [f64; 2], phi: f64) -> Field2D {
        self.translated(a).rotated(-phi)
    }

    /// Max of `|w|` over the two outer grid layers.
    pub fn edge_magnitude(&self) -> f64 {
        let w = self.perturbation_values();
        let n = self.space.n();
        let mut m = 0.0f64;
        for ((i, j), v) in w.indexed_iter() {
            if i < 2 || j < 2 || i >= n - 2 || j >= n - 2 {
                m = m.max(v.norm());
            }
        }
        m
    }

    fn check_same(&self, other: &Field2D) -> Result<()> {
        if self.space.same_as(&other.space) {
            Ok(())
        } else {
            Err(VortexError::usage("fields live on different grids or profiles"))
        }
    }
}

/// `‖ε‖²_H = ∫ |∇(εV̄₁)|² + (1 − |V₁|²)|∇ε|²`.
pub fn h_norm_sq(space: &FieldSpace, eps: &Sampled) -> f64 {
    let v = &space.vortex;
    let def = &space.deficit;
    space.integrate(|i, j| {
        let (e, ex, ey) = (eps.val[[i, j]], eps.dx[[i, j]], eps.dy[[i, j]]);
        let vb = v.val[[i, j]].conj();
        let gx = ex * vb + e * v.dx[[i, j]].conj();
        let gy = ey * vb + e * v.dy[[i, j]].conj();
        gx.norm_sqr() + gy.norm_sqr() + def[[i, j]] * (ex.norm_sqr() + ey.norm_sqr())
    })
}

pub fn h_norm(space: &FieldSpace, eps: &Sampled) -> f64 {
    h_norm_sq(space, eps).max(0.0).sqrt()
}

/// `η = −2⟨ε, V₁⟩ − |ε|²` at the nodes.
pub fn eta_of(space: &FieldSpace, eps: &Sampled) -> Array2<f64> {
    let v = &space.vortex.val;
    Array2::from_shape_fn(eps.val.dim(), |(i, j)| {
        let e = eps.val[[i, j]];
        -2.0 * dot(e, v[[i, j]]) - e.norm_sqr()
    })
}

/// `η_ε` for `ε = Ψ − V₁`.
pub fn eta(f: &Field2D) -> Array2<f64> {
    eta_of(&f.space, &f.deviation())
}

/// `d_E(Ψ₁, Ψ₂) = ‖Ψ₁ − Ψ₂‖_H + ‖|Ψ₁|² − |Ψ₂|²‖_{L²}`.
pub fn d_e(f: &Field2D, g: &Field2D) -> Result<f64> {
    f.check_same(g)?;
    let a = f.sample();
    let b = g.sample();
    Ok(d_e_sampled(&f.space, &a, &b))
}

/// `d_E` between two sampled fields on the same space.
pub fn d_e_sampled(space: &FieldSpace, a: &Sampled, b: &Sampled) -> f64 {
    let diff = a.sub(b);
    let dens = space.integrate(|i, j| {
        let d = a.val[[i, j]].norm_sqr() - b.val[[i, j]].norm_sqr();
        d * d
    });
    h_norm(space, &diff) + dens.sqrt()
}

/// `B(ε) = ∫ |∇ε|² − (1 − |V₁|²)|ε|² + 2⟨V₁, ε⟩²`.
pub fn b_form(space: &FieldSpace, eps: &Sampled) -> f64 {
    let v = &space.vortex.val;
    let def = &space.deficit;
    space.integrate(|i, j| {
        let e = eps.val[[i, j]];
        let p = dot(v[[i, j]], e);
        eps.dx[[i, j]].norm_sqr() + eps.dy[[i, j]].norm_sqr() - def[[i, j]] * e.norm_sqr() + 2.0 * p * p
    })
}

/// `∫ |ε|²/(1 + |x|²)^s`.
pub fn weighted_l2_sq(space: &FieldSpace, eps: &Sampled, s: f64) -> f64 {
    let xs = space.coords();
    space.integrate(|i, j| {
        let r2 = xs[i] * xs[i] + xs[j] * xs[j];
        eps.val[[i, j]].norm_sqr() / (1.0 + r2).powf(s)
    })
}

/// `∫ |ε|²`.
pub fn l2_sq(space: &FieldSpace, eps: &Sampled) -> f64 {
    space.integrate(|i, j| eps.val[[i, j]].norm_sqr())
}

/// Maximum modulus of an array (diagnostics).
pub fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Sum of squared moduli along rows, used for cheap checks.
pub fn row_energy(a: &Array2<C64>) -> Vec<f64> {
    a.axis_iter(Axis(0)).map(|r| r.iter().map(|v| v.norm_sqr()).sum()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::solve_profile;
    use std::sync::OnceLock;

    pub(crate) fn space() -> Arc<FieldSpace> {
        static S: OnceLock<Arc<FieldSpace>> = OnceLock::new();
        S.get_or_init(|| {
            let p = Arc::new(solve_profile(60.0, 1e-10).unwrap());
            FieldSpace::new(p, 12.0, 128).unwrap()
        })
        .clone()
    }

    #[test]
    fn cutoff_shape() {
        let c = CutoffSpec::new(2.0).unwrap();
        assert_eq!(c.value(1.9), 1.0);
        assert_eq!(c.value(4.1), 0.0);
        assert!((c.value(3.0) - 0.5).abs() < 1e-15);
        let h = 1e-6;
        for &r in &[2.3, 3.1, 3.9] {
            let fd = (c.value(r + h) - c.value(r - h)) / (2.0 * h);
            assert!((fd - c.derivative(r)).abs() < 1e-8);
            let fd2 = (c.derivative(r + h) - c.derivative(r - h)) / (2.0 * h);
            assert!((fd2 - c.second_derivative(r)).abs() < 1e-7);
        }
        assert!(CutoffSpec::new(0.0).is_err());
    }

    #[test]
    fn vortex_jet_matches_differences() {
        let s = space();
        let h = 1e-5;
        for &(x, y) in &[(0.3, -0.1), (1.7, 2.2), (-5.0, 0.4), (0.05, 0.02)] {
            let j = s.vortex_jet(x, y);
            let jx = (s.vortex_jet(x + h, y).v - s.vortex_jet(x - h, y).v) / (2.0 * h);
            let jy = (s.vortex_jet(x, y + h).v - s.vortex_jet(x, y - h).v) / (2.0 * h);
            assert!((j.dx - jx).norm() < 1e-8, "{x} {y}");
            assert!((j.dy - jy).norm() < 1e-8);
            let jxx = (s.vortex_jet(x + h, y).dx - s.vortex_jet(x - h, y).dx) / (2.0 * h);
            let jxy = (s.vortex_jet(x, y + h).dx - s.vortex_jet(x, y - h).dx) / (2.0 * h);
            let jyy = (s.vortex_jet(x, y + h).dy - s.vortex_jet(x, y - h).dy) / (2.0 * h);
            assert!((j.dxx - jxx).norm() < 1e-7);
            assert!((j.dxy - jxy).norm() < 1e-7);
            assert!((j.dyy - jyy).norm() < 1e-7);
            // V₁ solves the Ginzburg-Landau equation
            let res = j.laplacian() + (1.0 - j.v.norm_sqr()) * j.v;
            assert!(res.norm() < 1e-9);
        }
    }

    #[test]
    fn zero_perturbation_has_zero_norm() {
        let s = space();
        let f = Field2D::vortex(&s);
        assert_eq!(h_norm(&s, &f.deviation()), 0.0);
        assert!(eta(&f).iter().all(|&v| v == 0.0));
        assert_eq!(d_e(&f, &f).unwrap(), 0.0);
    }

    #[test]
    fn rejects_boundary_data() {
        let s = space();
        let n = s.n();
        let mut w = Array2::<C64>::zeros((n, n));
        w[[1, 5]] = C64::new(1e-3, 0.0);
        assert!(Field2D::with_perturbation(&s, 0.0, [0.0, 0.0], w).unwrap_err().is_usage());
    }

    #[test]
    fn translation_of_compact_perturbation() {
        let s = space();
        let g = |x: f64, y: f64| C64::new((-(x * x + y * y)).exp(), 0.0);
        let f = Field2D::from_fn(&s, 0.0, [0.0, 0.0], g).unwrap();
        let t = f.translated([0.37, -0.21]);
        assert_eq!(t.center(), [-0.37, 0.21]);
        let w = t.perturbation_values();
        let xs = s.coords();
        let mut worst = 0.0f64;
        for i in 0..s.n() {
            for j in 0..s.n() {
                worst = worst.max((w[[i, j]] - g(xs[i] + 0.37, xs[j] - 0.21)).norm());
            }
        }
        assert!(worst < 1e-12, "{worst:e}");
    }
}
