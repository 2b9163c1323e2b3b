//! Gross-Pitaevskii evolution of `Ψ = e^{iα}V₁(· − c) + w` and modulation tracking.
//!
//! The analytic part is a stationary solution, so only `w` evolves:
//! `i∂ₜw = −Δw − G`, `G = (1 − |Ψ|²)Ψ − (1 − |V_b|²)V_b`, with `V_b = e^{iα}V₁(· − c)`
//! and `w` a sine series. The default scheme is Crank-Nicolson with the
//! conservative midpoint nonlinearity `(1 − (|Ψⁿ|² + |Ψⁿ⁺¹|²)/2)(Ψⁿ + Ψⁿ⁺¹)/2`,
//! solved by fixed-point iteration; it conserves [`hamiltonian`] up to the
//! iteration tolerance.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VortexError};
use crate::fields::{d_e, dot, h_norm, CutoffSpec, Field2D, FieldSpace, Jet, C64};
use crate::spectral::Basis;

const I: C64 = C64::new(0.0, 1.0);

/// Explicit RK4 is stable on the imaginary axis up to `|dt·λ| ≈ 2.83`.
pub const RK4_STABILITY: f64 = 2.8;
/// Default cap on the condition number of the modulation matrix.
pub const DEFAULT_CONDITION_CAP: f64 = 1e6;
/// Newton stops once `|Ξ|` is below this.
pub const XI_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    CrankNicolson,
    Rk4,
}

impl std::str::FromStr for Scheme {
    type Err = VortexError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cn" | "crank-nicolson" => Ok(Scheme::CrankNicolson),
            "rk4" => Ok(Scheme::Rk4),
            other => Err(VortexError::usage(format!("unknown scheme '{other}' (cn, rk4)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    pub scheme: Scheme,
    /// Fixed-point iterations stop when the node update is below this.
    pub fixed_point_tol: f64,
    pub max_fixed_point: usize,
    /// How many times a step may be split in half before giving up.
    pub max_halvings: usize,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            scheme: Scheme::CrankNicolson,
            fixed_point_tol: 1e-13,
            max_fixed_point: 50,
            max_halvings: 6,
        }
    }
}

/// `h²` for Crank-Nicolson, `0.1·h²` for RK4 (the explicit limit is about `0.14·h²`).
pub fn default_dt(space: &FieldSpace, scheme: Scheme) -> f64 {
    let h = space.grid().h();
    match scheme {
        Scheme::CrankNicolson => h * h,
        Scheme::Rk4 => 0.1 * h * h,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub substeps: usize,
    pub halvings: usize,
    pub max_iterations: usize,
}

impl StepStats {
    fn absorb(&mut self, o: StepStats) {
        self.substeps += o.substeps;
        self.halvings += o.halvings;
        self.max_iterations = self.max_iterations.max(o.max_iterations);
    }
}

/// Time stepper for fields sharing one analytic part.
#[derive(Debug)]
pub struct Stepper {
    space: Arc<FieldSpace>,
    phase: f64,
    center: [f64; 2],
    base: Array2<C64>,
    base_force: Array2<C64>,
    symbol: Array2<f64>,
    cfg: StepConfig,
}

fn gl_force(u: C64) -> C64 {
    (1.0 - u.norm_sqr()) * u
}

fn max_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    Zip::from(a).and(b).fold(0.0f64, |m, x, y| m.max((x - y).norm()))
}

impl Stepper {
    pub fn new(template: &Field2D, cfg: StepConfig) -> Self {
        let space = Arc::clone(template.space());
        let base = template.base_sampled().val;
        let base_force = base.mapv(gl_force);
        Stepper {
            symbol: space.spectral().laplacian_symbol(),
            space,
            phase: template.phase(),
            center: template.center(),
            base,
            base_force,
            cfg,
        }
    }

    pub fn config(&self) -> &StepConfig {
        &self.cfg
    }

    /// Largest `|λ|` of the discrete Laplacian.
    pub fn spectral_radius(&self) -> f64 {
        self.symbol.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Advances `f` by `dt`. A Crank-Nicolson step whose fixed point does not
    /// converge is replaced by two half steps.
    pub fn step(&self, f: &Field2D, dt: f64) -> Result<(Field2D, StepStats)> {
        if f.phase() != self.phase || f.center() != self.center || !Arc::ptr_eq(f.space(), &self.space) {
            return Err(VortexError::usage("field does not share the stepper's analytic part"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(VortexError::usage(format!("time step must be positive, got {dt}")));
        }
        if self.cfg.scheme == Scheme::Rk4 && dt * self.spectral_radius() > RK4_STABILITY {
            return Err(VortexError::usage(format!(
                "dt = {dt:.3e} exceeds the explicit stability limit {:.3e}",
                RK4_STABILITY / self.spectral_radius()
            )));
        }
        let mut stats = StepStats::default();
        let c = self.advance(f.coefficients(), dt, 0, &mut stats)?;
        let out = Field2D::from_coefficients(&self.space, self.phase, self.center, c)?;
        Ok((out, stats))
    }

    fn advance(&self, c0: &Array2<C64>, dt: f64, depth: usize, stats: &mut StepStats) -> Result<Array2<C64>> {
        match self.cfg.scheme {
            Scheme::Rk4 => {
                stats.substeps += 1;
                Ok(self.rk4(c0, dt))
            }
            Scheme::CrankNicolson => {
                if let Some((c1, it)) = self.crank_nicolson(c0, dt) {
                    stats.substeps += 1;
                    stats.max_iterations = stats.max_iterations.max(it);
                    return Ok(c1);
                }
                if depth >= self.cfg.max_halvings {
                    return Err(VortexError::SolverFailure {
                        solver: "Crank-Nicolson fixed point",
                        detail: format!("no convergence after {depth} halvings (dt = {dt:.3e})"),
                    });
                }
                stats.halvings += 1;
                let mut sub = StepStats::default();
                let mid = self.advance(c0, 0.5 * dt, depth + 1, &mut sub)?;
                let end = self.advance(&mid, 0.5 * dt, depth + 1, &mut sub)?;
                stats.absorb(sub);
                Ok(end)
            }
        }
    }

    fn crank_nicolson(&self, c0: &Array2<C64>, dt: f64) -> Option<(Array2<C64>, usize)> {
        let sp = self.space.spectral();
        let psi0 = &self.base + &sp.inverse(c0);
        let half = 0.5 * dt;
        let explicit = Zip::from(c0)
            .and(&self.symbol)
            .map_collect(|&c, &l| c * (1.0 + I * (half * l)) / (1.0 - I * (half * l)));
        let mut psi1 = psi0.clone();
        for it in 1..=self.cfg.max_fixed_point {
            let g = Zip::from(&psi0)
                .and(&psi1)
                .and(&self.base_force)
                .par_map_collect(|&a, &b, &fb| (1.0 - 0.5 * (a.norm_sqr() + b.norm_sqr())) * 0.5 * (a + b) - fb);
            let gh = sp.forward(&g);
            let c1 = Zip::from(&explicit)
                .and(&gh)
                .and(&self.symbol)
                .map_collect(|&e, &g, &l| e + I * dt * g / (1.0 - I * (half * l)));
            let next = &self.base + &sp.inverse(&c1);
            let change = max_diff(&next, &psi1);
            psi1 = next;
            if !change.is_finite() {
                return None;
            }
            if change <= self.cfg.fixed_point_tol {
                return Some((c1, it));
            }
        }
        None
    }

    fn rhs(&self, c: &Array2<C64>) -> Array2<C64> {
        let sp = self.space.spectral();
        let psi = &self.base + &sp.inverse(c);
        let g = Zip::from(&psi)
            .and(&self.base_force)
            .par_map_collect(|&p, &fb| gl_force(p) - fb);
        let gh = sp.forward(&g);
        Zip::from(c)
            .and(&gh)
            .and(&self.symbol)
            .map_collect(|&c, &g, &l| I * (l * c + g))
    }

    fn rk4(&self, c0: &Array2<C64>, dt: f64) -> Array2<C64> {
        let k1 = self.rhs(c0);
        let k2 = self.rhs(&(c0 + &k1.mapv(|v| v * (0.5 * dt))));
        let k3 = self.rhs(&(c0 + &k2.mapv(|v| v * (0.5 * dt))));
        let k4 = self.rhs(&(c0 + &k3.mapv(|v| v * dt)));
        let mut out = c0.clone();
        Zip::from(&mut out)
            .and(&k1)
            .and(&k2)
            .and(&k3)
            .and(&k4)
            .for_each(|o, a, b, c, d| *o += (a + 2.0 * b + 2.0 * c + d) * (dt / 6.0));
        out
    }
}

/// `∫ ½|∇w|² + ¼(1 − |Ψ|²)² − ¼(1 − |V_b|²)² + (1 − |V_b|²)⟨V_b, w⟩` over the box.
///
/// For `w` vanishing on the boundary this is the renormalized energy (the cross
/// term `⟨∇V_b, ∇w⟩` integrated by parts); it is the quantity the default scheme
/// conserves exactly.
pub fn hamiltonian(f: &Field2D) -> f64 {
    let space = f.space();
    let base = f.base_sampled().val;
    let w = f.perturbation_sampled();
    space.integrate(|i, j| {
        let b = base[[i, j]];
        let wv = w.val[[i, j]];
        let db = 1.0 - b.norm_sqr();
        let d = 1.0 - (b + wv).norm_sqr();
        0.5 * (w.dx[[i, j]].norm_sqr() + w.dy[[i, j]].norm_sqr()) + 0.25 * (d * d - db * db) + db * dot(b, wv)
    })
}

/// `∫_box e(Ψ) − e(V_b)`, the renormalized energy of a field whose perturbation
/// vanishes on the boundary (outside the box `Ψ = V_b`, and `𝓔(V_b) = 0`).
pub fn box_energy(f: &Field2D) -> f64 {
    let space = f.space();
    let base = f.base_sampled();
    let psi = f.sample();
    space.integrate(|i, j| {
        let g = psi.dx[[i, j]].norm_sqr() + psi.dy[[i, j]].norm_sqr();
        let g0 = base.dx[[i, j]].norm_sqr() + base.dy[[i, j]].norm_sqr();
        let d = 1.0 - psi.val[[i, j]].norm_sqr();
        let d0 = 1.0 - base.val[[i, j]].norm_sqr();
        0.5 * (g - g0) + 0.25 * (d * d - d0 * d0)
    })
}

/// Values of `ε = e^{−iφ}Ψ(· + a) − V₁` and its derivatives on the nodes of `B₂`.
struct Patch {
    weight: Vec<f64>,
    v: Vec<Jet>,
    e: Vec<C64>,
    ex: Vec<C64>,
    ey: Vec<C64>,
    lap: Vec<C64>,
}

fn patch(f: &Field2D, a: [f64; 2], phi: f64) -> Result<Patch> {
    let space = f.space();
    let g = space.grid();
    let chi = CutoffSpec::unit();
    let reach = 2.0 * chi.scale();
    let xs: Vec<f64> = space.coords().iter().copied().filter(|x| x.abs() < reach).collect();
    let l = g.half_width();
    if a.iter().any(|c| !c.is_finite() || c.abs() + reach + g.h() > l) {
        return Err(VortexError::usage(format!(
            "shift ({:.3}, {:.3}) moves the cutoff support off the grid",
            a[0], a[1]
        )));
    }
    let sx: Vec<f64> = xs.iter().map(|x| x + a[0]).collect();
    let sy: Vec<f64> = xs.iter().map(|y| y + a[1]).collect();
    let sp = space.spectral();
    let c = f.coefficients();
    let w = sp.eval_tensor(c, &sx, &sy, Basis::Sin, Basis::Sin);
    let wx = sp.eval_tensor(c, &sx, &sy, Basis::Cos, Basis::Sin);
    let wy = sp.eval_tensor(c, &sx, &sy, Basis::Sin, Basis::Cos);
    let wxx = sp.eval_tensor(c, &sx, &sy, Basis::SinSecond, Basis::Sin);
    let wyy = sp.eval_tensor(c, &sx, &sy, Basis::Sin, Basis::SinSecond);
    let rot = C64::from_polar(1.0, -phi);
    let h2 = g.h() * g.h();
    let mut p = Patch {
        weight: Vec::new(),
        v: Vec::new(),
        e: Vec::new(),
        ex: Vec::new(),
        ey: Vec::new(),
        lap: Vec::new(),
    };
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in xs.iter().enumerate() {
            let wt = chi.value(x.hypot(y));
            if wt == 0.0 {
                continue;
            }
            let v = space.vortex_jet(x, y);
            let b = f.base_jet(x + a[0], y + a[1]);
            p.weight.push(wt * h2);
            p.e.push(rot * (b.v + w[[i, j]]) - v.v);
            p.ex.push(rot * (b.dx + wx[[i, j]]) - v.dx);
            p.ey.push(rot * (b.dy + wy[[i, j]]) - v.dy);
            p.lap.push(rot * (b.laplacian() + wxx[[i, j]] + wyy[[i, j]]) - v.laplacian());
            p.v.push(v);
        }
    }
    Ok(p)
}

impl Patch {
    fn generators(v: &Jet) -> [C64; 3] {
        [v.dx, v.dy, I * v.v]
    }

    fn xi(&self) -> [f64; 3] {
        let mut out = [0.0; 3];
        for k in 0..self.e.len() {
            let z = Self::generators(&self.v[k]);
            for m in 0..3 {
                out[m] += self.weight[k] * dot(self.e[k], z[m]);
            }
        }
        out
    }

    /// `∂Ξ/∂(b₁, b₂, φ)`.
    fn jacobian(&self) -> Matrix3<f64> {
        let mut j = Matrix3::zeros();
        for k in 0..self.e.len() {
            let v = &self.v[k];
            let z = Self::generators(v);
            let cols = [v.dx + self.ex[k], v.dy + self.ey[k], -I * (v.v + self.e[k])];
            for m in 0..3 {
                for c in 0..3 {
                    j[(m, c)] += self.weight[k] * dot(cols[c], z[m]);
                }
            }
        }
        j
    }

    /// `(𝓜_ε, 𝓕_ε)`: the Jacobian with its phase row negated, and
    /// `∫χ⟨L, iZ⟩` with the same sign change, `L = Δε + F(V₁ + ε) − F(V₁)`.
    fn system(&self) -> (Matrix3<f64>, Vector3<f64>) {
        let mut m = self.jacobian();
        let mut f = Vector3::<f64>::zeros();
        for k in 0..self.e.len() {
            let v = &self.v[k];
            let z = Self::generators(v);
            let l = self.lap[k] + gl_force(v.v + self.e[k]) - gl_force(v.v);
            for r in 0..3 {
                f[r] += self.weight[k] * dot(l, I * z[r]);
            }
        }
        for c in 0..3 {
            m[(2, c)] = -m[(2, c)];
        }
        f[2] = -f[2];
        (m, f)
    }
}

/// `Ξ(Ψ, b, φ) = (∫χ⟨ε, ∂ₓV₁⟩, ∫χ⟨ε, ∂ᵧV₁⟩, ∫χ⟨ε, iV₁⟩)`, `ε = e^{−iφ}Ψ(· + b) − V₁`.
pub fn xi(f: &Field2D, b: [f64; 2], phi: f64) -> Result<[f64; 3]> {
    Ok(patch(f, b, phi)?.xi())
}

/// Analytic Jacobian of [`xi`] in `(b₁, b₂, φ)`, row-major.
pub fn xi_jacobian(f: &Field2D, b: [f64; 2], phi: f64) -> Result<[[f64; 3]; 3]> {
    Ok(to_rows(&patch(f, b, phi)?.jacobian()))
}

fn to_rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    [0, 1, 2].map(|r| [m[(r, 0)], m[(r, 1)], m[(r, 2)]])
}

fn condition(m: &Matrix3<f64>) -> f64 {
    let s = m.singular_values();
    let lo = s.min();
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        s.max() / lo
    }
}

/// `𝓜₀ = diag(∫χ|∂ₓV₁|², ∫χ|∂ᵧV₁|², ∫χ|V₁|²)` as assembled on the grid.
pub fn m_zero(space: &Arc<FieldSpace>) -> Result<[[f64; 3]; 3]> {
    let v = Field2D::vortex(space);
    Ok(to_rows(&patch(&v, [0.0, 0.0], 0.0)?.system().0))
}

/// Modulation parameters of a field and the diagnostics of the modulation system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationState {
    pub t: f64,
    pub a: [f64; 2],
    /// Continuous lift, never wrapped.
    pub phi: f64,
    pub m_matrix: [[f64; 3]; 3],
    pub f_vector: [f64; 3],
    pub condition: f64,
    pub xi: [f64; 3],
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    /// `‖ε‖_H` at the converged parameters.
    pub eps_h_norm: f64,
    /// `‖e^{−iφ_g}Ψ(· + b_g) − V₁‖_H` at the guess.
    pub guess_h_norm: f64,
    /// `d_E(V₁, e^{−iφ_g}Ψ(· + b_g))`.
    pub guess_distance: f64,
    /// `(‖ε‖_H + |a − b_g| + |e^{iφ} − e^{iφ_g}|) / guess_h_norm`.
    pub estimate_ratio: f64,
    pub warnings: Vec<String>,
}

impl ModulationState {
    pub fn xi_norm(&self) -> f64 {
        self.xi.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Newton iteration on `Ξ = 0` from `guess = (b, φ)`.
pub fn modulate(f: &Field2D, guess: ([f64; 2], f64)) -> Result<ModulationState> {
    modulate_with(f, guess, 0.2).map(|(s, _)| s)
}

/// [`modulate`] with a configurable neighborhood radius `alpha`; also returns the
/// modulated field `e^{−iφ}Ψ(· + a)`.
pub fn modulate_with(f: &Field2D, guess: ([f64; 2], f64), alpha: f64) -> Result<(ModulationState, Field2D)> {
    let space = f.space();
    let vortex = Field2D::vortex(space);
    let (bg, pg) = guess;
    let mut warnings = Vec::new();
    let at_guess = f.modulated(bg, pg);
    let guess_h_norm = h_norm(space, &at_guess.deviation());
    let guess_distance = d_e(&vortex, &at_guess)?;
    if guess_distance > alpha {
        warnings.push(format!(
            "d_E at the guess is {guess_distance:.3e}, above the modulation radius {alpha}"
        ));
    }

    let (mut b, mut phi) = (bg, pg);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let fail = |history: &[f64], why: &str| VortexError::SolverFailure {
        solver: "modulation Newton",
        detail: format!(
            "{why}; residual history [{}]",
            history.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    };
    for it in 0..40 {
        let p = patch(f, b, phi).map_err(|e| fail(&history, &e.to_string()))?;
        let x = p.xi();
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !r.is_finite() {
            return Err(fail(&history, "non-finite residual"));
        }
        let stalled = history.last().is_some_and(|&prev| r > 0.5 * prev);
        history.push(r);
        iterations = it;
        if r <= 1e-3 * XI_TOLERANCE || (r <= XI_TOLERANCE && stalled) {
            converged = true;
            break;
        }
        if history.len() > 3 && r > 10.0 * history[0] {
            return Err(fail(&history, "residual grew; the field left the modulation neighborhood"));
        }
        let j = p.jacobian();
        let step: Vector3<f64> = j
            .lu()
            .solve(&Vector3::new(x[0], x[1], x[2]))
            .ok_or_else(|| fail(&history, "singular Jacobian"))?;
        if step.norm() > 2.0 {
            return Err(fail(&history, "Newton step longer than 2; no nearby modulation"));
        }
        b = [b[0] - step[0], b[1] - step[1]];
        phi -= step[2];
    }
    if !converged && history.last().is_none_or(|&r| r > XI_TOLERANCE) {
        return Err(fail(&history, "no convergence in 40 iterations"));
    }

    let p = patch(f, b, phi)?;
    let (m, fv) = p.system();
    let modulated = f.modulated(b, phi);
    let eps_h_norm = h_norm(space, &modulated.deviation());
    let shift = (b[0] - bg[0]).hypot(b[1] - bg[1]);
    let turn = (C64::from_polar(1.0, phi) - C64::from_polar(1.0, pg)).norm();
    let lhs = eps_h_norm + shift + turn;
    let estimate_ratio = if guess_h_norm > 0.0 {
        lhs / guess_h_norm
    } else if lhs < 1e-12 {
        0.0
    } else {
        f64::INFINITY
    };
    let state = ModulationState {
        t: 0.0,
        a: b,
        phi,
        m_matrix: to_rows(&m),
        f_vector: [fv[0], fv[1], fv[2]],
        condition: condition(&m),
        xi: p.xi(),
        iterations,
        residual_history: history,
        eps_h_norm,
        guess_h_norm,
        guess_distance,
        estimate_ratio,
        warnings,
    };
    Ok((state, modulated))
}

/// `(a₁′, a₂′, φ′)` from `𝓜_ε (a′, φ′) = 𝓕_ε` at the parameters of `state`.
pub fn modulation_rhs(f: &Field2D, state: &ModulationState) -> Result<[f64; 3]> {
    modulation_rhs_at(f, state.a, state.phi, DEFAULT_CONDITION_CAP)
}

pub fn modulation_rhs_at(f: &Field2D, a: [f64; 2], phi: f64, cap: f64) -> Result<[f64; 3]> {
    let (m, fv) = patch(f, a, phi)?.system();
    let cond = condition(&m);
    if !(cond <= cap) {
        return Err(VortexError::numerical(format!(
            "modulation matrix condition number {cond:.3e} exceeds {cap:.1e}; the perturbation is too large for modulation"
        )));
    }
    let s = m
        .lu()
        .solve(&fv)
        .ok_or_else(|| VortexError::numerical("singular modulation matrix"))?;
    Ok([s[0], s[1], s[2]])
}

/// Infinitesimal generators of the invariance group at `V₁`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    Dx,
    Dy,
    Phase,
}

pub fn generator_samples(space: &FieldSpace, g: Generator) -> Array2<C64> {
    let v = space.vortex();
    match g {
        Generator::Dx => v.dx.clone(),
        Generator::Dy => v.dy.clone(),
        Generator::Phase => v.val.mapv(|z| I * z),
    }
}

/// `‖Δε + (1 − |V₁|²)ε − 2⟨V₁, ε⟩V₁‖` with a fourth-order difference Laplacian and
/// weight `(1 + |x|²)^{−1}`, over nodes at least two layers inside the box.
pub fn linearized_residual(space: &FieldSpace, eps: &Array2<C64>) -> f64 {
    let n = space.n();
    let h = space.grid().h();
    let xs = space.coords();
    let v = &space.vortex().val;
    let def = space.deficit();
    let c = 1.0 / (12.0 * h * h);
    let mut acc = 0.0;
    for i in 2..n - 2 {
        for j in 2..n - 2 {
            let e = |a: usize, b: usize| eps[[a, b]];
            let lap = (-e(i - 2, j) + 16.0 * e(i - 1, j) - 30.0 * e(i, j) + 16.0 * e(i + 1, j) - e(i + 2, j)
                - e(i, j - 2)
                + 16.0 * e(i, j - 1)
                - 30.0 * e(i, j)
                + 16.0 * e(i, j + 1)
                - e(i, j + 2))
                * c;
            let vv = v[[i, j]];
            let r = lap + def[[i, j]] * e(i, j) - 2.0 * dot(vv, e(i, j)) * vv;
            acc += r.norm_sqr() / (1.0 + xs[i] * xs[i] + xs[j] * xs[j]);
        }
    }
    (acc * h * h).sqrt()
}

/// Nearest representative of `phi` modulo `2π` to `reference`.
pub fn unwrap_near(phi: f64, reference: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    phi - tau * ((phi - reference) / tau).round()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    /// `None` selects [`default_dt`].
    pub dt: Option<f64>,
    pub t_final: f64,
    pub snapshot_every: f64,
    pub step: StepConfig,
    /// Smallness of `d_E(V₁, Ψ₀)` assumed by the stability statement.
    pub delta: f64,
    /// Radius of the modulation neighborhood.
    pub alpha: f64,
    pub condition_cap: f64,
    /// Integrate the modulation equations alongside the Newton track.
    pub track_ode: bool,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            dt: None,
            t_final: 50.0,
            snapshot_every: 0.5,
            step: StepConfig::default(),
            delta: 0.05,
            alpha: 0.2,
            condition_cap: DEFAULT_CONDITION_CAP,
            track_ode: true,
        }
    }
}

/// One snapshot of an evolution run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub t: f64,
    /// [`hamiltonian`].
    pub energy: f64,
    /// [`box_energy`].
    pub box_energy: f64,
    /// `d_E(V₁, e^{−iφ}Ψₜ(· + a))`.
    pub d_e: f64,
    pub ratio: f64,
    pub a: [f64; 2],
    pub phi: f64,
    /// `|a′| + |φ′|` from the modulation equations at the Newton parameters.
    pub rate: f64,
    pub ode_a: [f64; 2],
    pub ode_phi: f64,
    pub xi_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionRun {
    pub config: EvolutionConfig,
    pub dt: f64,
    pub steps: usize,
    pub initial_distance: f64,
    pub initial_energy: f64,
    pub rows: Vec<DiagnosticRow>,
    pub max_ratio: f64,
    /// `max_t |𝓔(Ψₜ) − 𝓔(Ψ₀)|`.
    pub energy_drift: f64,
    /// `max_t (|a′| + |φ′|) / d_E(V₁, Ψ₀)`.
    pub rate_constant: f64,
    /// `max_t |(a, φ)_Newton − (a, φ)_ODE|`.
    pub track_gap: f64,
    pub stats: StepStats,
    pub truncated: Option<String>,
    pub warnings: Vec<String>,
}

impl EvolutionRun {
    /// Relative energy drift, `energy_drift / |𝓔(Ψ₀)|`.
    pub fn relative_drift(&self) -> f64 {
        if self.initial_energy == 0.0 {
            self.energy_drift
        } else {
            self.energy_drift / self.initial_energy.abs()
        }
    }
}

/// Evolves `f0`, modulates every snapshot and records the diagnostics.
pub fn orbital_stability_experiment(f0: &Field2D, cfg: &EvolutionConfig) -> Result<EvolutionRun> {
    orbital_stability_experiment_with(f0, cfg, |_, _| Ok(()))
}

/// As [`orbital_stability_experiment`], calling `on_snapshot` with every row and field.
pub fn orbital_stability_experiment_with<F>(f0: &Field2D, cfg: &EvolutionConfig, mut on_snapshot: F) -> Result<EvolutionRun>
where
    F: FnMut(&DiagnosticRow, &Field2D) -> Result<()>,
{
    if !(cfg.t_final > 0.0 && cfg.snapshot_every > 0.0) {
        return Err(VortexError::usage("horizon and snapshot cadence must be positive"));
    }
    let space = Arc::clone(f0.space());
    let vortex = Field2D::vortex(&space);
    let stepper = Stepper::new(f0, cfg.step);
    let dt_nominal = cfg.dt.unwrap_or_else(|| default_dt(&space, cfg.step.scheme));
    let steps = (cfg.t_final / dt_nominal - 1e-9).ceil().max(1.0) as usize;
    let dt = cfg.t_final / steps as f64;
    let every = ((cfg.snapshot_every / dt).round() as usize).max(1);

    let mut warnings = Vec::new();
    let d0 = d_e(&vortex, f0)?;
    if d0 > cfg.delta {
        warnings.push(format!("d_E(V₁, Ψ₀) = {d0:.3e} exceeds the smallness threshold {}", cfg.delta));
    }
    let e0 = hamiltonian(f0);
    let ratio = |d: f64| {
        if d0 > 0.0 {
            d / d0
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    };

    let mut run = EvolutionRun {
        config: cfg.clone(),
        dt,
        steps: 0,
        initial_distance: d0,
        initial_energy: e0,
        rows: Vec::new(),
        max_ratio: 0.0,
        energy_drift: 0.0,
        rate_constant: 0.0,
        track_gap: 0.0,
        stats: StepStats::default(),
        truncated: None,
        warnings,
    };

    let mut field = f0.clone();
    let mut guess = ([0.0, 0.0], 0.0);
    let mut ode: Option<([f64; 2], f64)> = None;
    let mut max_rate = 0.0f64;
    for n in 0..=steps {
        let t = n as f64 * dt;
        if n % every == 0 || n == steps {
            let outcome = modulate_with(&field, guess, cfg.alpha).and_then(|(s, m)| {
                let rate = modulation_rhs_at(&field, s.a, s.phi, cfg.condition_cap)?;
                Ok((s, m, rate))
            });
            let (state, modulated, rate) = match outcome {
                Ok(v) => v,
                Err(e) => {
                    run.truncated = Some(format!("modulation failed at t = {t:.6}: {e}"));
                    break;
                }
            };
            guess = (state.a, state.phi);
            let track = *ode.get_or_insert((state.a, state.phi));
            let d = d_e(&vortex, &modulated)?;
            let energy = hamiltonian(&field);
            let row = DiagnosticRow {
                t,
                energy,
                box_energy: box_energy(&field),
                d_e: d,
                ratio: ratio(d),
                a: state.a,
                phi: state.phi,
                rate: rate.iter().map(|v| v.abs()).sum(),
                ode_a: track.0,
                ode_phi: track.1,
                xi_norm: state.xi_norm(),
            };
            run.max_ratio = run.max_ratio.max(row.ratio);
            run.energy_drift = run.energy_drift.max((energy - e0).abs());
            max_rate = max_rate.max(row.rate);
            if cfg.track_ode {
                let gap = (row.a[0] - track.0[0]).abs().max((row.a[1] - track.0[1]).abs()).max((row.phi - track.1).abs());
                run.track_gap = run.track_gap.max(gap);
            }
            on_snapshot(&row, &field)?;
            run.rows.push(row);
        }
        if n == steps {
            break;
        }
        let (next, stats) = stepper.step(&field, dt)?;
        run.stats.absorb(stats);
        if cfg.track_ode {
            if let Some((a, phi)) = ode {
                match heun(&field, &next, a, phi, dt, cfg.condition_cap) {
                    Ok(s) => ode = Some(s),
                    Err(e) => {
                        run.truncated = Some(format!("modulation equations failed at t = {t:.6}: {e}"));
                        break;
                    }
                }
            }
        }
        field = next;
        run.steps = n + 1;
    }
    run.rate_constant = if d0 > 0.0 { max_rate / d0 } else { 0.0 };
    Ok(run)
}

/// One Heun step of the modulation equations between two consecutive fields.
fn heun(f0: &Field2D, f1: &Field2D, a: [f64; 2], phi: f64, dt: f64, cap: f64) -> Result<([f64; 2], f64)> {
    let k1 = modulation_rhs_at(f0, a, phi, cap)?;
    let a1 = [a[0] + dt * k1[0], a[1] + dt * k1[1]];
    let k2 = modulation_rhs_at(f1, a1, phi + dt * k1[2], cap)?;
    Ok((
        [a[0] + 0.5 * dt * (k1[0] + k2[0]), a[1] + 0.5 * dt * (k1[1] + k2[1])],
        phi + 0.5 * dt * (k1[2] + k2[2]),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::solve_profile;

    fn space() -> Arc<FieldSpace> {
        let p = Arc::new(solve_profile(40.0, 1e-10).unwrap());
        FieldSpace::new(p, 10.0, 64).unwrap()
    }

    #[test]
    fn unwrap_picks_nearest_branch() {
        let tau = std::f64::consts::TAU;
        assert!((unwrap_near(0.1 + tau, 0.0) - 0.1).abs() < 1e-15);
        assert!((unwrap_near(-0.1, 3.0 * tau) - (3.0 * tau - 0.1)).abs() < 1e-12);
    }

    #[test]
    fn rk4_rejects_large_steps() {
        let s = space();
        let v = Field2D::vortex(&s);
        let st = Stepper::new(&v, StepConfig { scheme: Scheme::Rk4, ..Default::default() });
        let h = s.grid().h();
        assert!(st.step(&v, h * h).unwrap_err().is_usage());
        assert!(st.step(&v, 0.1 * h * h).is_ok());
    }

    #[test]
    fn foreign_field_is_rejected() {
        let s = space();
        let st = Stepper::new(&Field2D::vortex(&s), StepConfig::default());
        let moved = Field2D::moved_vortex(&s, 0.3, [0.0, 0.0]);
        assert!(st.step(&moved, 0.01).unwrap_err().is_usage());
    }

    #[test]
    fn xi_rejects_shifts_off_the_grid() {
        let s = space();
        let v = Field2D::vortex(&s);
        assert!(xi(&v, [8.5, 0.0], 0.0).unwrap_err().is_usage());
    }
}
