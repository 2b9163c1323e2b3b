//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::sync::OnceLock;
use vortex_core::profile::{solve_profile, VortexProfile};

pub fn profile() -> &'static VortexProfile {
    static P: OnceLock<VortexProfile> = OnceLock::new();
    P.get_or_init(|| solve_profile(60.0, 1e-10).expect("profile"))
}

/// Thomas algorithm for a tridiagonal system (sub, diag, sup, rhs), overwriting rhs.
fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = diag.to_vec();
    c[0] = sup[0] / d[0];
    rhs[0] /= d[0];
    for i in 1..n {
        d[i] -= sub[i] * c[i - 1];
        if i + 1 < n {
            c[i] = sup[i] / d[i];
        }
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / d[i];
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] -= c[i] * next;
    }
}

/// Newton relaxation of the profile equation with second-order differences on
/// `[0, r_end]`, `ρ(0) = 0`, `ρ(r_end)` from the two-term tail. Returns node values
/// at `r_i = i·h`.
pub fn relax(h: f64, r_end: f64) -> Vec<f64> {
    let n = (r_end / h).round() as usize;
    let right = 1.0 - 0.5 / (r_end * r_end) - 9.0 / (8.0 * r_end.powi(4));
    let mut u: Vec<f64> = (0..=n).map(|i| (i as f64 * h).tanh().min(right)).collect();
    u[n] = right;
    for _ in 0..50 {
        let m = n - 1;
        let (mut sub, mut diag, mut sup, mut res) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        let mut worst = 0.0f64;
        for k in 0..m {
            let i = k + 1;
            let r = i as f64 * h;
            let lo = 1.0 / (h * h) - 1.0 / (2.0 * h * r);
            let hi = 1.0 / (h * h) + 1.0 / (2.0 * h * r);
            let p = u[i];
            let f = lo * u[i - 1] + hi * u[i + 1] - 2.0 * p / (h * h) - p / (r * r) + p * (1.0 - p * p);
            res[k] = -f;
            worst = worst.max(f.abs());
            sub[k] = lo;
            sup[k] = hi;
            diag[k] = -2.0 / (h * h) - 1.0 / (r * r) + 1.0 - 3.0 * p * p;
        }
        if worst < 1e-13 {
            break;
        }
        thomas(&sub, &diag, &sup, &mut res);
        for k in 0..m {
            u[k + 1] += res[k];
        }
    }
    u
}

/// Richardson-extrapolated relaxation values on the coarse grid of step `2h`.
pub fn relaxation_oracle(h: f64, r_end: f64) -> (f64, Vec<f64>) {
    let coarse = relax(2.0 * h, r_end);
    let fine = relax(h, r_end);
    let vals: Vec<f64> = coarse
        .iter()
        .enumerate()
        .map(|(i, &c)| (4.0 * fine[2 * i] - c) / 3.0)
        .collect();
    // slope at the origin from ρ = A(r − r³/8 + c r⁵), c = (A/8 + A³)/24
    let r = 20.0 * h;
    let v = vals[10];
    let mut a = v / r;
    for _ in 0..20 {
        let c = (a / 8.0 + a * a * a) / 24.0;
        a = v / (r - r.powi(3) / 8.0 + c * r.powi(5));
    }
    (a, vals)
}

use std::sync::Arc;
use vortex_core::fields::FieldSpace;

/// Default energy grid: L = 30, N = 512.
pub fn space_30_512() -> Arc<FieldSpace> {
    static S: OnceLock<Arc<FieldSpace>> = OnceLock::new();
    S.get_or_init(|| FieldSpace::new(Arc::new(profile().clone()), 30.0, 512).unwrap())
        .clone()
}

/// `I₁ = 2π ∫ (2ρρ')² + (1 − ρ²)(ρ'² + ρ²/r²) r dr` on `[0, r_end]` by composite Simpson.
pub fn radial_h_norm_sq(r_end: f64) -> f64 {
    let p = profile();
    let n = 200_000;
    let h = r_end / n as f64;
    let f = |r: f64| {
        if r == 0.0 {
            return 0.0;
        }
        let [rho, d, _] = p.values(r);
        let q = p.one_minus_rho_sq(r);
        ((2.0 * rho * d).powi(2) + q * (d * d + rho * rho / (r * r))) * r
    };
    let mut acc = f(0.0) + f(r_end);
    for i in 1..n {
        acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    2.0 * std::f64::consts::PI * acc * h / 3.0
}
