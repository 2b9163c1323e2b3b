//! Reproducible perturbation families.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Field2D, FieldSpace, C64};
use crate::error::{Result, VortexError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// No perturbation.
    None,
    /// A single Gaussian lump `amplitude · exp(−|x − center|²/width²)`.
    Bump,
    /// Three Gaussian lumps with seeded complex weights, centers and widths.
    Random,
    /// Seeded angular sectors with algebraic radial decay and a smooth far cutoff.
    SectorTail,
}

impl std::str::FromStr for Family {
    type Err = VortexError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Family::None),
            "bump" => Ok(Family::Bump),
            "random" => Ok(Family::Random),
            "sector-tail" => Ok(Family::SectorTail),
            other => Err(VortexError::usage(format!(
                "unknown perturbation family '{other}' (none, bump, random, sector-tail)"
            ))),
        }
    }
}

/// What perturbation to add to the vortex, fully determined by its fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRecipe {
    pub family: Family,
    pub amplitude: f64,
    pub width: f64,
    pub center: [f64; 2],
    pub seed: u64,
}

impl Default for PerturbationRecipe {
    fn default() -> Self {
        PerturbationRecipe {
            family: Family::None,
            amplitude: 0.0,
            width: 1.5,
            center: [1.0, 0.5],
            seed: 0,
        }
    }
}

impl PerturbationRecipe {
    /// `e^{iα}V₁(· − c) + ε` with `ε` from this recipe.
    pub fn build(&self, space: &Arc<FieldSpace>, phase: f64, center: [f64; 2]) -> Result<Field2D> {
        if !self.amplitude.is_finite() || !(self.width > 0.0) {
            return Err(VortexError::usage("perturbation amplitude must be finite and width positive"));
        }
        match self.family {
            Family::None => Ok(Field2D::moved_vortex(space, phase, center)),
            Family::Bump => {
                let (a, w, c) = (self.amplitude, self.width, self.center);
                Field2D::from_fn(space, phase, center, move |x, y| {
                    let d2 = (x - c[0]).powi(2) + (y - c[1]).powi(2);
                    C64::new(a * (-d2 / (w * w)).exp(), 0.0)
                })
            }
            Family::Random => random_compact_perturbation(space, self.amplitude, self.seed, phase, center),
            Family::SectorTail => sector_tail_perturbation(space, self.amplitude, self.seed, phase, center),
        }
    }
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-1.0..1.0)
}

/// Sum of three Gaussian lumps with seeded complex weights; lumps sit well inside
/// the smallest truncation window, so the perturbation is compact to rounding.
pub fn random_compact_perturbation(
    space: &Arc<FieldSpace>,
    amplitude: f64,
    seed: u64,
    phase: f64,
    center: [f64; 2],
) -> Result<Field2D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = space.grid().half_width();
    let h = space.grid().h();
    let spread = (0.15 * l).min(4.0);
    let w_lo = (1.0f64).max(8.0 * h);
    let w_hi = (2.0f64).min(0.06 * l).max(w_lo);
    let lumps: Vec<(C64, [f64; 2], f64)> = (0..3)
        .map(|_| {
            let c = C64::new(unit(&mut rng), unit(&mut rng)) * (amplitude / 3.0f64.sqrt());
            let rad = spread * rng.gen_range(0.0f64..1.0).sqrt();
            let ang = rng.gen_range(0.0..std::f64::consts::TAU);
            let w = rng.gen_range(w_lo..=w_hi);
            (c, [rad * ang.cos(), rad * ang.sin()], w)
        })
        .collect();
    Field2D::from_fn(space, phase, center, move |x, y| {
        lumps
            .iter()
            .map(|(c, p, w)| {
                let d2 = (x - p[0]).powi(2) + (y - p[1]).powi(2);
                *c * (-d2 / (w * w)).exp()
            })
            .sum()
    })
}

/// Angular sectors `Σ_j c_j (x ± iy)^{|j+1|} (1 + r²)^{−|j+1|/2 − 3/4} e^{iθ}`-type terms
/// (`|ε| ~ r^{−3/2}`), cut off smoothly between `0.6L` and `0.75L`.
pub fn sector_tail_perturbation(
    space: &Arc<FieldSpace>,
    amplitude: f64,
    seed: u64,
    phase: f64,
    center: [f64; 2],
) -> Result<Field2D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = space.grid().half_width();
    let sectors: Vec<(i32, C64)> = (-3..=3)
        .map(|j| (j, C64::new(unit(&mut rng), unit(&mut rng)) * (amplitude / 7.0f64.sqrt())))
        .collect();
    let (r_in, r_out) = (0.6 * l, 0.75 * l);
    Field2D::from_fn(space, phase, center, move |x, y| {
        let r = x.hypot(y);
        if r >= r_out {
            return C64::new(0.0, 0.0);
        }
        let taper = smooth_step_down((r - r_in) / (r_out - r_in));
        let mut acc = C64::new(0.0, 0.0);
        for &(j, c) in &sectors {
            let m = j + 1;
            let z = if m >= 0 { C64::new(x, y) } else { C64::new(x, -y) };
            let k = m.unsigned_abs() as i32;
            acc += c * z.powi(k) * (1.0 + r * r).powf(-(k as f64) / 2.0 - 0.75);
        }
        acc * taper
    })
}

fn smooth_step_down(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t >= 1.0 {
        return 0.0;
    }
    let g = |u: f64| (-1.0 / u).exp();
    g(1.0 - t) / (g(1.0 - t) + g(t))
}
