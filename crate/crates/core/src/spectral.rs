//! Sine-series calculus for fields with homogeneous Dirichlet data on `[−L, L]²`.
//!
//! A grid function vanishing on the boundary nodes is expanded as
//! `w(x, y) = Σ S_kl sin(κ_k (x + L)) sin(κ_l (y + L))` with `κ_k = kπ/(2L)`,
//! `k = 1 … N − 2`. Derivatives are exact for this interpolant, so discrete
//! integration by parts holds to rounding.

use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Axis, Zip};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

type C64 = Complex64;

/// One-dimensional sine/cosine sums of length `n = N − 2` through a `2(N − 1)`-point FFT.
pub struct SineTransform {
    nodes: usize,
    half_width: f64,
    fft: Arc<dyn Fft<f64>>,
    kappa: Vec<f64>,
}

impl std::fmt::Debug for SineTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SineTransform")
            .field("nodes", &self.nodes)
            .field("half_width", &self.half_width)
            .finish()
    }
}

impl SineTransform {
    pub fn new(nodes: usize, half_width: f64) -> Self {
        assert!(nodes >= 4, "need at least four nodes");
        let m = nodes - 1;
        let fft = FftPlanner::new().plan_fft_forward(2 * m);
        let kappa = (1..m)
            .map(|k| k as f64 * std::f64::consts::PI / (2.0 * half_width))
            .collect();
        SineTransform {
            nodes,
            half_width,
            fft,
            kappa,
        }
    }

    /// Number of grid nodes `N` (including both boundary nodes).
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// Number of sine modes, `N − 2`.
    pub fn modes(&self) -> usize {
        self.nodes - 2
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    fn buffers(&self) -> (Vec<C64>, Vec<C64>) {
        let len = 2 * (self.nodes - 1);
        (
            vec![C64::new(0.0, 0.0); len],
            vec![C64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()],
        )
    }

    /// `out_i = Σ_k input_k sin(π k i / M)` for `i = 1 … n`.
    fn sine_sum(&self, input: &[C64], out: &mut [C64], buf: &mut [C64], scratch: &mut [C64]) {
        let m = self.nodes - 1;
        buf[0] = C64::new(0.0, 0.0);
        buf[m] = C64::new(0.0, 0.0);
        for (k, &v) in input.iter().enumerate() {
            buf[k + 1] = v;
            buf[2 * m - k - 1] = -v;
        }
        self.fft.process_with_scratch(buf, scratch);
        let half_i = C64::new(0.0, 0.5);
        for (i, o) in out.iter_mut().enumerate() {
            *o = half_i * buf[i + 1];
        }
    }

    /// `out_i = Σ_k input_k cos(π k i / M)` for `i = 0 … M`.
    fn cosine_sum(&self, input: &[C64], out: &mut [C64], buf: &mut [C64], scratch: &mut [C64]) {
        let m = self.nodes - 1;
        buf[0] = C64::new(0.0, 0.0);
        buf[m] = C64::new(0.0, 0.0);
        for (k, &v) in input.iter().enumerate() {
            buf[k + 1] = v;
            buf[2 * m - k - 1] = v;
        }
        self.fft.process_with_scratch(buf, scratch);
        for (i, o) in out.iter_mut().enumerate() {
            *o = 0.5 * buf[i];
        }
    }

    /// Matrix `A[p, k] = f(κ_k (x_p + L))` for arbitrary abscissae.
    pub fn basis_matrix(&self, points: &[f64], kind: Basis) -> Array2<f64> {
        let n = self.modes();
        Array2::from_shape_fn((points.len(), n), |(p, k)| {
            let kap = self.kappa[k];
            let arg = kap * (points[p] + self.half_width);
            match kind {
                Basis::Sin => arg.sin(),
                Basis::Cos => kap * arg.cos(),
                Basis::SinSecond => -kap * kap * arg.sin(),
            }
        })
    }
}

/// Which derivative of the sine basis a [`SineTransform::basis_matrix`] samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Sin,
    Cos,
    SinSecond,
}

#[derive(Clone, Copy)]
enum Line {
    /// coefficients → interior values (length n → n)
    Sine,
    /// κ-weighted coefficients → values at all nodes (length n → N)
    Cosine,
}

/// Square-grid sine transforms and spectral derivatives.
#[derive(Debug)]
pub struct Spectral2D {
    t: SineTransform,
}

impl Spectral2D {
    pub fn new(nodes: usize, half_width: f64) -> Self {
        Spectral2D {
            t: SineTransform::new(nodes, half_width),
        }
    }

    pub fn axis(&self) -> &SineTransform {
        &self.t
    }

    pub fn nodes(&self) -> usize {
        self.t.nodes
    }

    pub fn modes(&self) -> usize {
        self.t.modes()
    }

    /// Applies a line transform to every row of `data` (axis 1), producing rows of `out_len`.
    fn rows(&self, data: ArrayView2<C64>, line: Line, out_len: usize) -> Array2<C64> {
        let mut out = Array2::<C64>::zeros((data.nrows(), out_len));
        out.axis_iter_mut(Axis(0))
            .into_par_iter()
            .zip(data.axis_iter(Axis(0)).into_par_iter())
            .for_each_init(
                || (self.t.buffers(), Vec::new()),
                |((buf, scratch), input), (mut o, row)| {
                    input.clear();
                    input.extend(row.iter().copied());
                    let o = o.as_slice_mut().expect("standard layout");
                    match line {
                        Line::Sine => self.t.sine_sum(input, o, buf, scratch),
                        Line::Cosine => self.t.cosine_sum(input, o, buf, scratch),
                    }
                },
            );
        out
    }

    /// Applies `first` along axis 1 and `second` along axis 0.
    fn separable(&self, data: ArrayView2<C64>, first: Line, second: Line) -> Array2<C64> {
        let len = |l: Line| match l {
            Line::Sine => self.t.modes(),
            Line::Cosine => self.t.nodes,
        };
        let a = self.rows(data, first, len(first));
        let at = a.t().as_standard_layout().into_owned();
        let b = self.rows(at.view(), second, len(second));
        b.t().as_standard_layout().into_owned()
    }

    /// Sine coefficients of a node array (boundary nodes are ignored).
    pub fn forward(&self, values: &Array2<C64>) -> Array2<C64> {
        let n = self.t.nodes;
        let interior = values.slice(ndarray::s![1..n - 1, 1..n - 1]);
        let mut c = self.separable(interior, Line::Sine, Line::Sine);
        let scale = 2.0 / (n - 1) as f64;
        c.mapv_inplace(|v| v * (scale * scale));
        c
    }

    /// Node values (zero on the boundary) of a sine series.
    pub fn inverse(&self, coeffs: &Array2<C64>) -> Array2<C64> {
        let n = self.t.nodes;
        let inner = self.separable(coeffs.view(), Line::Sine, Line::Sine);
        let mut out = Array2::<C64>::zeros((n, n));
        out.slice_mut(ndarray::s![1..n - 1, 1..n - 1]).assign(&inner);
        out
    }

    /// `(∂ₓw, ∂ᵧw)` at every node. The first array index is x, the second y.
    pub fn gradient(&self, coeffs: &Array2<C64>) -> (Array2<C64>, Array2<C64>) {
        let n = self.t.nodes;
        let kap = &self.t.kappa;
        // ∂ₓ: cosine along axis 0 (x), sine along axis 1 (y)
        let cx = Array2::from_shape_fn(coeffs.dim(), |(k, l)| coeffs[[k, l]] * kap[k]);
        let gx_inner = self.separable(cx.view(), Line::Sine, Line::Cosine);
        let mut gx = Array2::<C64>::zeros((n, n));
        gx.slice_mut(ndarray::s![.., 1..n - 1]).assign(&gx_inner);
        let cy = Array2::from_shape_fn(coeffs.dim(), |(k, l)| coeffs[[k, l]] * kap[l]);
        let gy_inner = self.separable(cy.view(), Line::Cosine, Line::Sine);
        let mut gy = Array2::<C64>::zeros((n, n));
        gy.slice_mut(ndarray::s![1..n - 1, ..]).assign(&gy_inner);
        (gx, gy)
    }

    /// Symbol `−(κ_k² + κ_l²)` of the Laplacian.
    pub fn laplacian_symbol(&self) -> Array2<f64> {
        let kap = &self.t.kappa;
        let n = self.t.modes();
        Array2::from_shape_fn((n, n), |(k, l)| -(kap[k] * kap[k] + kap[l] * kap[l]))
    }

    /// Evaluates the series (or a derivative) on the tensor set `xs × ys`.
    pub fn eval_tensor(&self, coeffs: &Array2<C64>, xs: &[f64], ys: &[f64], kx: Basis, ky: Basis) -> Array2<C64> {
        let ax = self.t.basis_matrix(xs, kx);
        let ay = self.t.basis_matrix(ys, ky);
        let re = coeffs.mapv(|v| v.re);
        let im = coeffs.mapv(|v| v.im);
        let r = ax.dot(&re).dot(&ay.t());
        let i = ax.dot(&im).dot(&ay.t());
        let mut out = Array2::<C64>::zeros((xs.len(), ys.len()));
        Zip::from(&mut out).and(&r).and(&i).for_each(|o, &a, &b| *o = C64::new(a, b));
        out
    }
}
