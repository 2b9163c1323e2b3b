//! Radial profile of the degree-one vortex.
//!
//! The profile solves `ρ'' + ρ'/r − ρ/r² + ρ(1 − ρ²) = 0` with `ρ(0) = 0` and
//! `ρ(∞) = 1`. It is computed by shooting on the slope at the origin; because
//! the far field is a saddle (perturbations grow like `exp(√2 r)`), the
//! shooting marches outward in stages, re-bracketing the slope each time the
//! two bracketing trajectories separate.

use crate::error::{Result, VortexError};
use crate::ode::{integrate_interval, StepControl};

/// Storage step of the uniform profile grid.
pub const GRID_STEP: f64 = 1e-3;
/// Radius where the shooting starts from the origin series.
pub const SHOOTING_START: f64 = 1e-3;
/// Default radius beyond which the asymptotic tail replaces the grid data.
pub const DEFAULT_MATCH_RADIUS: f64 = 40.0;
/// Largest admissible mismatch between grid data and the tail at the match radius.
pub const STITCH_TOLERANCE: f64 = 1e-8;
/// Smallest `r_max` for which the tail match is considered reliable.
pub const RECOMMENDED_MIN_RMAX: f64 = 20.0;

const SEPARATION_TOL: f64 = 1e-12;
const RESTART_BACKOFF: f64 = 1.0;
const SHOOT_OVERRUN: f64 = 20.0;
const MAX_BISECTIONS: usize = 200;
const SERIES_RADIUS: f64 = 0.02;

/// The solved profile with its derivative on a uniform grid `r_i = (i + 1)·step`.
#[derive(Debug, Clone)]
pub struct VortexProfile {
    step: f64,
    rho: Vec<f64>,
    drho: Vec<f64>,
    slope_at_origin: f64,
    series: [f64; SERIES_TERMS],
    match_radius: f64,
    tol: f64,
    stitch_error: f64,
    warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fate {
    /// ρ exceeded 1: initial slope too large.
    Over,
    /// ρ' turned negative: initial slope too small.
    Under,
    /// Neither event happened before the horizon.
    Undecided,
}

struct Shot {
    fate: Fate,
    rho: Vec<f64>,
    drho: Vec<f64>,
}

fn rhs(r: f64, y: &[f64; 2]) -> [f64; 2] {
    let (p, dp) = (y[0], y[1]);
    [dp, -dp / r + p / (r * r) - p * (1.0 - p * p)]
}

/// Integrates from grid node `first` with data `(p0, dp0)` up to node `last`,
/// stopping early at the first over/undershoot event.
fn shoot(first: usize, p0: f64, dp0: f64, last: usize, step: f64) -> Shot {
    let ctl = StepControl {
        rtol: 1e-12,
        atol: 1e-15,
        max_step: step,
        max_substeps: 1000,
    };
    let mut rho = vec![p0];
    let mut drho = vec![dp0];
    let mut y = [p0, dp0];
    let mut h = step;
    for k in first..last {
        let r0 = (k + 1) as f64 * step;
        let r1 = (k + 2) as f64 * step;
        match integrate_interval(&rhs, r0, y, r1, &mut h, &ctl) {
            Some(next) => y = next,
            None => {
                let fate = if y[0] > 1.0 { Fate::Over } else { Fate::Under };
                return Shot { fate, rho, drho };
            }
        }
        rho.push(y[0]);
        drho.push(y[1]);
        if y[0] > 1.0 || !y[0].is_finite() {
            return Shot { fate: Fate::Over, rho, drho };
        }
        if y[1] < 0.0 {
            return Shot { fate: Fate::Under, rho, drho };
        }
    }
    Shot {
        fate: Fate::Undecided,
        rho,
        drho,
    }
}

/// Bisects a scalar shooting parameter `s` for which `launch(s)` returns the shot.
/// Returns the lower and upper bracketing shots (or a single undecided shot twice).
fn bisect<F>(mut lo: f64, mut hi: f64, tol: f64, launch: F) -> Result<(Shot, Shot, f64)>
where
    F: Fn(f64) -> Shot,
{
    let mut lo_shot = launch(lo);
    let mut hi_shot = launch(hi);
    // widen until the bracket is valid
    for _ in 0..60 {
        if lo_shot.fate == Fate::Under {
            break;
        }
        lo *= 0.5;
        lo_shot = launch(lo);
    }
    for _ in 0..60 {
        if hi_shot.fate == Fate::Over {
            break;
        }
        hi *= 2.0;
        hi_shot = launch(hi);
    }
    if lo_shot.fate != Fate::Under || hi_shot.fate != Fate::Over {
        return Err(VortexError::SolverFailure {
            solver: "profile shooting",
            detail: format!("could not bracket the shooting slope, last bracket [{lo:e}, {hi:e}]"),
        });
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // bracket exhausted at machine precision
            return Ok((lo_shot, hi_shot, mid));
        }
        let shot = launch(mid);
        match shot.fate {
            Fate::Over => {
                hi = mid;
                hi_shot = shot;
            }
            Fate::Under => {
                lo = mid;
                lo_shot = shot;
            }
            Fate::Undecided => {
                let copy = Shot {
                    fate: Fate::Undecided,
                    rho: shot.rho.clone(),
                    drho: shot.drho.clone(),
                };
                return Ok((shot, copy, mid));
            }
        }
    }
    if hi - lo <= tol {
        return Ok((lo_shot, hi_shot, 0.5 * (lo + hi)));
    }
    Err(VortexError::SolverFailure {
        solver: "profile shooting",
        detail: format!(
            "bisection cap of {MAX_BISECTIONS} reached, last bracket [{lo:.17e}, {hi:.17e}]"
        ),
    })
}

const SERIES_TERMS: usize = 14;
/// Below this radius the vortex factors come from the origin series.
const FACTOR_SERIES_RADIUS: f64 = 0.25;

/// Coefficients `c_m` of the odd origin series `ρ = Σ c_m r^{2m+1}`, `c_0 = A`.
///
/// Substituting into the equation gives
/// `c_m ((2m+1)² − 1) = −c_{m−1} + Σ_{i+j+k=m−2} c_i c_j c_k`.
pub fn series_coefficients(a: f64) -> [f64; SERIES_TERMS] {
    let mut c = [0.0; SERIES_TERMS];
    c[0] = a;
    for m in 1..SERIES_TERMS {
        let mut cube = 0.0;
        if m >= 2 {
            for i in 0..=m - 2 {
                for j in 0..=m - 2 - i {
                    cube += c[i] * c[j] * c[m - 2 - i - j];
                }
            }
        }
        let k = (2 * m + 1) as f64;
        c[m] = (cube - c[m - 1]) / (k * k - 1.0);
    }
    c
}

/// Origin series values `[ρ, ρ', ρ'']`.
fn origin_series(c: &[f64; SERIES_TERMS], r: f64) -> [f64; 3] {
    let r2 = r * r;
    let (mut p, mut dp, mut d2p) = (0.0, 0.0, 0.0);
    for m in (0..SERIES_TERMS).rev() {
        let k = (2 * m + 1) as f64;
        p = p * r2 + c[m];
        dp = dp * r2 + k * c[m];
        if m >= 1 {
            d2p = d2p * r2 + k * (k - 1.0) * c[m];
        }
    }
    [p * r, dp, d2p * r]
}

/// Smooth radial factors of `V₁ = q(r)(x + iy)`, free of the `1/r` singularities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VortexFactors {
    pub rho: f64,
    pub drho: f64,
    /// `1 − ρ²`
    pub deficit: f64,
    /// `q = ρ/r`
    pub q: f64,
    /// `s = q'/r = (ρ' − ρ/r)/r²`
    pub s: f64,
    /// `t = s'/r`
    pub t: f64,
}

/// Far-field series for `ρ`, `ρ'`, `ρ''`.
pub fn tail(r: f64) -> [f64; 3] {
    let i2 = 1.0 / (r * r);
    let i4 = i2 * i2;
    [
        1.0 - 0.5 * i2 - 9.0 / 8.0 * i4,
        i2 / r * (1.0 + 4.5 * i2),
        -i4 * (3.0 + 22.5 * i2),
    ]
}

/// Far-field series for `1 − ρ²`.
pub fn tail_one_minus_rho_sq(r: f64) -> f64 {
    let i2 = 1.0 / (r * r);
    i2 + 2.0 * i2 * i2
}

/// Solves the profile equation on `[0, r_max]` by marching bisection shooting.
///
/// `tol` is the required width of the bracket on the slope at the origin.
pub fn solve_profile(r_max: f64, tol: f64) -> Result<VortexProfile> {
    solve_profile_with_match(r_max, tol, DEFAULT_MATCH_RADIUS)
}

/// As [`solve_profile`] with an explicit tail-match radius (clamped to `r_max`).
pub fn solve_profile_with_match(r_max: f64, tol: f64, match_radius: f64) -> Result<VortexProfile> {
    if !(r_max.is_finite() && r_max >= 2.0) {
        return Err(VortexError::usage(format!("r_max must be at least 2, got {r_max}")));
    }
    if !(tol > 0.0 && tol <= 1e-6) {
        return Err(VortexError::usage(format!("tol must lie in (0, 1e-6], got {tol}")));
    }
    if !(match_radius > 1.0) {
        return Err(VortexError::usage("match radius must exceed 1"));
    }
    let mut warnings = Vec::new();
    if r_max < RECOMMENDED_MIN_RMAX {
        warnings.push(format!(
            "r_max = {r_max} is below the recommended {RECOMMENDED_MIN_RMAX}; tail-match radius below recommended"
        ));
    }
    let step = GRID_STEP;
    let n_store = (r_max / step).round() as usize; // nodes r_i = (i+1)·step, i < n_store
    let n_shoot = n_store + (SHOOT_OVERRUN / step) as usize;

    let mut rho: Vec<f64> = Vec::with_capacity(n_store);
    let mut drho: Vec<f64> = Vec::with_capacity(n_store);

    // stage 0: slope at the origin
    let r0 = SHOOTING_START;
    let first = (r0 / step).round() as usize - 1;
    let launch_origin = |a: f64| {
        let s = origin_series(&series_coefficients(a), r0);
        shoot(first, s[0], s[1], n_shoot - 1, step)
    };
    let (lo, hi, slope) = bisect(0.1, 1.0, tol, launch_origin)?;
    let mut accepted = merge(&lo, &hi);
    rho.extend_from_slice(&accepted.0);
    drho.extend_from_slice(&accepted.1);

    // later stages: re-bracket ρ' at a restart node with ρ frozen
    while rho.len() < n_store && !accepted.2 {
        let restart = rho.len() - 1;
        let p0 = rho[restart];
        let dp0 = drho[restart];
        let launch = |s: f64| shoot(restart, p0, s, n_shoot - 1, step);
        let (lo, hi, _) = bisect(0.5 * dp0, 1.5 * dp0, tol, launch)?;
        accepted = merge(&lo, &hi);
        if accepted.0.len() <= 1 {
            return Err(VortexError::SolverFailure {
                solver: "profile shooting",
                detail: format!("no progress past r = {}", (restart + 1) as f64 * step),
            });
        }
        rho.truncate(restart);
        drho.truncate(restart);
        rho.extend_from_slice(&accepted.0);
        drho.extend_from_slice(&accepted.1);
    }
    rho.truncate(n_store);
    drho.truncate(n_store);
    if rho.len() < n_store {
        return Err(VortexError::SolverFailure {
            solver: "profile shooting",
            detail: format!("trajectory stopped at r = {}", rho.len() as f64 * step),
        });
    }

    let match_radius = match_radius.min(rho.len() as f64 * step);
    let mut profile = VortexProfile {
        step,
        rho,
        drho,
        slope_at_origin: slope,
        series: series_coefficients(slope),
        match_radius,
        tol,
        stitch_error: 0.0,
        warnings,
    };
    profile.stitch_error = (profile.grid_value(match_radius)[0] - tail(match_radius)[0]).abs();
    if profile.stitch_error > STITCH_TOLERANCE {
        profile.warnings.push(format!(
            "grid/tail mismatch {:.3e} at r = {} exceeds {STITCH_TOLERANCE:e}",
            profile.stitch_error, match_radius
        ));
    }
    Ok(profile)
}

/// Averages the two bracketing trajectories up to the point where they separate.
/// The flag reports whether the shots never separated (nothing left to resolve).
fn merge(lo: &Shot, hi: &Shot) -> (Vec<f64>, Vec<f64>, bool) {
    let n = lo.rho.len().min(hi.rho.len());
    let mut split = n;
    for k in 0..n {
        if (lo.rho[k] - hi.rho[k]).abs() > SEPARATION_TOL {
            split = k;
            break;
        }
    }
    let undecided = lo.fate == Fate::Undecided && hi.fate == Fate::Undecided;
    let keep = if split == n && undecided {
        n
    } else {
        split.saturating_sub((RESTART_BACKOFF / GRID_STEP) as usize).max(1)
    };
    let rho = (0..keep).map(|k| 0.5 * (lo.rho[k] + hi.rho[k])).collect();
    let drho = (0..keep).map(|k| 0.5 * (lo.drho[k] + hi.drho[k])).collect();
    (rho, drho, split == n && undecided)
}

impl VortexProfile {
    /// Builds a profile from stored grid data (used when importing artifacts).
    pub fn from_parts(
        step: f64,
        rho: Vec<f64>,
        drho: Vec<f64>,
        slope_at_origin: f64,
        match_radius: f64,
        tol: f64,
    ) -> Result<Self> {
        if rho.len() != drho.len() || rho.len() < 4 {
            return Err(VortexError::Format("profile columns have inconsistent length".into()));
        }
        if !(step > 0.0) || !(slope_at_origin > 0.0) {
            return Err(VortexError::Format("profile header has non-positive step or slope".into()));
        }
        let match_radius = match_radius.min(rho.len() as f64 * step);
        let mut p = VortexProfile {
            step,
            rho,
            drho,
            slope_at_origin,
            series: series_coefficients(slope_at_origin),
            match_radius,
            tol,
            stitch_error: 0.0,
            warnings: Vec::new(),
        };
        p.stitch_error = (p.grid_value(match_radius)[0] - tail(match_radius)[0]).abs();
        Ok(p)
    }

    pub fn slope_at_origin(&self) -> f64 {
        self.slope_at_origin
    }

    pub fn match_radius(&self) -> f64 {
        self.match_radius
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn stitch_error(&self) -> f64 {
        self.stitch_error
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Largest stored radius.
    pub fn r_max(&self) -> f64 {
        self.rho.len() as f64 * self.step
    }

    /// Grid radii, values and slopes, in storage order.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.rho
            .iter()
            .zip(&self.drho)
            .enumerate()
            .map(move |(i, (&p, &dp))| ((i + 1) as f64 * self.step, p, dp))
    }

    /// Cubic Hermite evaluation on the stored grid, origin series below the first node.
    fn grid_value(&self, r: f64) -> [f64; 3] {
        if r < SERIES_RADIUS {
            return origin_series(&self.series, r);
        }
        let h = self.step;
        let n = self.rho.len();
        let k = ((r / h).floor() as usize).clamp(1, n - 1) - 1;
        let r0 = (k + 1) as f64 * h;
        let t = (r - r0) / h;
        let (p0, p1) = (self.rho[k], self.rho[k + 1]);
        let (m0, m1) = (self.drho[k] * h, self.drho[k + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let p = (2.0 * t3 - 3.0 * t2 + 1.0) * p0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * p1
            + (t3 - t2) * m1;
        let dp = ((6.0 * t2 - 6.0 * t) * p0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * p1
            + (3.0 * t2 - 2.0 * t) * m1)
            / h;
        let d2p = -dp / r + p / (r * r) - p * (1.0 - p * p);
        [p, dp, d2p]
    }

    /// `[ρ, ρ', ρ'']` at `r ≥ 0`.
    #[inline]
    pub fn values(&self, r: f64) -> [f64; 3] {
        if r > self.match_radius {
            tail(r)
        } else {
            self.grid_value(r)
        }
    }

    #[inline]
    pub fn rho(&self, r: f64) -> f64 {
        self.values(r)[0]
    }

    #[inline]
    pub fn drho(&self, r: f64) -> f64 {
        self.values(r)[1]
    }

    /// Evaluates `ρ`, `ρ'` or `ρ''` (order 0, 1, 2).
    pub fn eval(&self, r: f64, order: u8) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(VortexError::usage(format!("radius must be non-negative, got {r}")));
        }
        match order {
            0..=2 => Ok(self.values(r)[order as usize]),
            _ => Err(VortexError::usage(format!("derivative order must be 0, 1 or 2, got {order}"))),
        }
    }

    /// Radial factors of the vortex at `r ≥ 0`.
    pub fn factors(&self, r: f64) -> VortexFactors {
        if r < FACTOR_SERIES_RADIUS {
            let c = &self.series;
            let r2 = r * r;
            let (mut q, mut dp, mut s, mut t) = (0.0, 0.0, 0.0, 0.0);
            for m in (0..SERIES_TERMS).rev() {
                let k = 2.0 * m as f64;
                q = q * r2 + c[m];
                dp = dp * r2 + (k + 1.0) * c[m];
                if m >= 1 {
                    s = s * r2 + k * c[m];
                }
                if m >= 2 {
                    t = t * r2 + k * (k - 2.0) * c[m];
                }
            }
            let rho = q * r;
            return VortexFactors {
                rho,
                drho: dp,
                deficit: (1.0 - rho) * (1.0 + rho),
                q,
                s,
                t,
            };
        }
        let [rho, drho, _] = self.values(r);
        let deficit = self.one_minus_rho_sq(r);
        let q = rho / r;
        let r2 = r * r;
        let s = (drho - q) / r2;
        // from the profile equation: s' = −q(1 − ρ²)/r − 4s/r
        let t = -(q * deficit + 4.0 * s) / r2;
        VortexFactors {
            rho,
            drho,
            deficit,
            q,
            s,
            t,
        }
    }

    /// `1 − ρ(r)²`, using the dedicated far-field series beyond the match radius.
    #[inline]
    pub fn one_minus_rho_sq(&self, r: f64) -> f64 {
        if r > self.match_radius {
            tail_one_minus_rho_sq(r)
        } else {
            let p = self.grid_value(r)[0];
            (1.0 - p) * (1.0 + p)
        }
    }

    /// Sup-norm of the ODE residual at grid nodes in `[r_lo, r_hi]`, with `ρ''`
    /// taken from a fourth-order centered difference of the stored `ρ'`.
    pub fn ode_residual_sup(&self, r_lo: f64, r_hi: f64) -> f64 {
        let h = self.step;
        let n = self.rho.len();
        let mut worst = 0.0f64;
        for k in 2..n.saturating_sub(2) {
            let r = (k + 1) as f64 * h;
            if r < r_lo || r > r_hi {
                continue;
            }
            let d = &self.drho;
            let d2 = (-d[k + 2] + 8.0 * d[k + 1] - 8.0 * d[k - 1] + d[k - 2]) / (12.0 * h);
            let p = self.rho[k];
            let res = d2 + d[k] / r - p / (r * r) + p * (1.0 - p * p);
            worst = worst.max(res.abs());
        }
        worst
    }

    /// True when the stored data satisfy `0 < ρ < 1` and `ρ' > 0` at every node.
    pub fn is_monotone(&self) -> bool {
        self.rho.iter().all(|&p| p > 0.0 && p < 1.0) && self.drho.iter().all(|&d| d > 0.0)
    }

    /// Finite part `∫₀^r (ρ'²/2 + (1 − ρ²)²/4) r dr` by composite Simpson on the evaluator.
    pub fn finite_energy_part(&self, r: f64) -> f64 {
        let n = ((r / 0.01).ceil() as usize).max(2) & !1;
        let h = r / n as f64;
        let f = |s: f64| {
            let [_, dp, _] = self.values(s);
            let q = self.one_minus_rho_sq(s);
            (0.5 * dp * dp + 0.25 * q * q) * s
        };
        let mut acc = f(0.0) + f(r);
        for i in 1..n {
            acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn profile() -> &'static VortexProfile {
        static P: OnceLock<VortexProfile> = OnceLock::new();
        P.get_or_init(|| solve_profile(60.0, 1e-10).unwrap())
    }

    #[test]
    fn boundary_values() {
        let p = profile();
        assert_eq!(p.eval(0.0, 0).unwrap(), 0.0);
        assert!((p.one_minus_rho_sq(0.0) - 1.0).abs() < 1e-15);
        assert!(p.slope_at_origin() > 0.5 && p.slope_at_origin() < 0.7);
    }

    #[test]
    fn tail_is_used_far_out() {
        let p = profile();
        let expect = 1.0 - 1.0 / (2.0 * 1e4) - 9.0 / (8.0 * 1e8);
        assert!((p.eval(100.0, 0).unwrap() - expect).abs() < 1e-10);
        // the two-term expansion misses 19/r⁶ + 374/r⁸ ≈ 2.3e-5 at r = 10
        let q10 = p.one_minus_rho_sq(10.0);
        assert!((q10 - (0.01 + 2e-4 + 19e-6 + 374e-8)).abs() < 1e-5, "{q10}");
        let q15 = p.one_minus_rho_sq(15.0);
        assert!((q15 - (1.0 / 225.0 + 2.0 / 50625.0)).abs() < 1e-5, "{q15}");
    }

    #[test]
    fn rejects_bad_order_and_radius() {
        let p = profile();
        assert!(p.eval(1.0, 3).unwrap_err().is_usage());
        assert!(p.eval(-1.0, 0).is_err());
        assert!(solve_profile(30.0, 1e-3).unwrap_err().is_usage());
    }

    #[test]
    fn monotone_and_bounded() {
        let p = profile();
        assert!(p.is_monotone());
        let mut prev = 0.0;
        for i in 1..2000 {
            let v = p.rho(i as f64 * 0.1);
            assert!(v > prev && v < 1.0);
            prev = v;
        }
    }

    #[test]
    fn residual_and_stitch() {
        let p = profile();
        let res = p.ode_residual_sup(0.01, 30.0);
        assert!(res < 1e-8, "residual {res:e}");
        assert!(p.stitch_error() < STITCH_TOLERANCE, "stitch {:e}", p.stitch_error());
        let r = p.match_radius();
        let direct = 1.0 - p.eval(r, 0).unwrap().powi(2);
        assert!((p.one_minus_rho_sq(r) - direct).abs() < 1e-12);
    }

    #[test]
    fn factors_are_continuous_at_series_switch() {
        let p = profile();
        let below = p.factors(FACTOR_SERIES_RADIUS * (1.0 - 1e-12));
        let above = p.factors(FACTOR_SERIES_RADIUS);
        assert!((below.rho - above.rho).abs() < 1e-12);
        assert!((below.drho - above.drho).abs() < 1e-11);
        assert!((below.s - above.s).abs() < 1e-9, "{} {}", below.s, above.s);
        assert!((below.t - above.t).abs() < 1e-7, "{} {}", below.t, above.t);
        // t = s'/r checked by differencing s
        let (r, h) = (1.3, 1e-5);
        let ds = (p.factors(r + h).s - p.factors(r - h).s) / (2.0 * h);
        assert!((ds / r - p.factors(r).t).abs() < 1e-7);
    }

    #[test]
    fn origin_series_fit() {
        let p = profile();
        let a = p.slope_at_origin();
        // |ρ − A(r − r³/8)| ≤ C r⁵ near the origin: fitted exponent ≥ 4.5
        let dev = |r: f64| (p.rho(r) - a * (r - r * r * r / 8.0)).abs();
        let (r1, r2) = (0.05, 0.1);
        let slope = (dev(r2) / dev(r1)).ln() / (r2 / r1).ln();
        assert!(slope > 4.5, "fit exponent {slope}");
    }

    #[test]
    fn deficit_decays_like_inverse_square() {
        let p = profile();
        let (r1, r2) = (20.0, 60.0);
        let slope = (p.one_minus_rho_sq(r2) / p.one_minus_rho_sq(r1)).ln() / (r2 / r1).ln();
        assert!((slope + 2.0).abs() < 0.05, "{slope}");
    }

    #[test]
    fn finite_energy_part_converges() {
        let p = profile();
        let e30 = p.finite_energy_part(30.0);
        let e60 = p.finite_energy_part(60.0);
        let e120 = p.finite_energy_part(120.0);
        assert!((e120 - e60).abs() < (e60 - e30).abs());
        assert!((e120 - e60).abs() < 1e-3);
    }

    #[test]
    fn short_domain_warns() {
        let p = solve_profile(5.0, 1e-8).unwrap();
        assert!(!p.warnings().is_empty());
    }
}
