//! Elliptic problems on the flattened strip (periodic x) × [0, 1] and the
//! surface operators G(η), N(η), K(η) built from them.
//!
//! The fluid domain {0 < y < 1 + η(x)} is mapped to the unit strip by
//! y ↦ y(1 + η). The potential then solves ∇·((I + Q)∇u) = 0 with
//!
//! ```text
//! I + Q = [ 1 + η        −y η′               ]
//!         [ −y η′        (1 + y²η′²)/(1 + η) ]
//! ```
//!
//! which has unit determinant. The weak form is discretized by a Fourier ×
//! Chebyshev–Lobatto Galerkin method. Vertical integrals are evaluated with
//! M + 2 Gauss–Legendre points, which is exact for the flat strip (Lobatto
//! weights alone lose about k²·1e-11 per mode). The discrete stiffness matrix
//! is exactly symmetric and the discrete G, N and K inherit exact symmetry.
//! Systems are solved by preconditioned conjugate gradients, the
//! preconditioner being the exact flat-strip solve
//! (diagonal per Fourier mode after a one-off eigendecomposition in y).

use nalgebra::{DMatrix, SymmetricEigen};
use realfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chebyshev::Chebyshev;
use crate::dispersion::f_multiplier;
use crate::error::{Error, Result};
use crate::spectral::{check_depth, Fourier, PeriodicGrid, SurfaceProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gauge {
    /// Neumann solution normalized to zero strip mean.
    ZeroMean,
    /// Top value prescribed.
    DirichletTop,
}

/// Scalar field on the strip, stored layer by layer: `values[j * N + i] = u(x_i, y_j)`.
#[derive(Debug, Clone)]
pub struct StripField {
    pub grid: PeriodicGrid,
    pub values: Vec<f64>,
    pub gauge: Gauge,
    /// PCG iterations used.
    pub iterations: usize,
}

impl StripField {
    pub fn layer(&self, j: usize) -> &[f64] {
        let n = self.grid.n_modes;
        &self.values[j * n..(j + 1) * n]
    }

    pub fn top(&self) -> &[f64] {
        self.layer(self.grid.n_layers)
    }
}

/// Symmetric 2×2 tensor field on the strip nodes.
#[derive(Debug, Clone)]
pub struct QTensor {
    pub q11: Vec<f64>,
    pub q12: Vec<f64>,
    pub q22: Vec<f64>,
    /// Smallest pointwise eigenvalue of I + Q.
    pub p0: f64,
}

/// Top boundary condition for [`solve_strip`].
#[derive(Debug, Clone, Copy)]
pub enum TopCondition<'a> {
    DirichletTop(&'a [f64]),
    NeumannTop(&'a [f64]),
}

#[derive(Debug, Clone)]
struct Tensor {
    t11: Vec<f64>,
    t12: Vec<f64>,
    t22: Vec<f64>,
}

/// Discretization of the strip and the flat-strip preconditioners.
#[derive(Debug, Clone)]
pub struct Strip {
    pub fourier: Fourier,
    pub cheb: Chebyshev,
    /// Gauss–Legendre quadrature nodes and weights on [0, 1].
    pub yq: Vec<f64>,
    pub wq: Vec<f64>,
    nl: usize,
    nq: usize,
    /// Interpolation from Lobatto nodes to quadrature nodes, and its transpose.
    interp: Vec<f64>,
    interp_t: Vec<f64>,
    /// y-derivative evaluated at quadrature nodes, and its transpose.
    dq: Vec<f64>,
    dq_t: Vec<f64>,
    /// Nodal derivative row at y = 1.
    d_top: Vec<f64>,
    neu_e: Vec<f64>,
    neu_et: Vec<f64>,
    neu_val: Vec<f64>,
    neu_null: usize,
    dir_e: Vec<f64>,
    dir_et: Vec<f64>,
    dir_val: Vec<f64>,
    /// PCG stops when the residual drops below `rtol` times the initial
    /// correction residual.
    pub rtol: f64,
    pub max_iter: usize,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = m.shape();
    let mut v = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            v.push(m[(i, j)]);
        }
    }
    v
}

/// Gauss–Legendre nodes and weights on [0, 1] by Newton iteration on P_n.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
            let dt = p1 / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, t);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
        x[n - 1 - i] = 0.5 * (1.0 + t);
        w[n - 1 - i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

/// E = L⁻ᵀV and Λ for the pencil (K, Mm) with Mm = LLᵀ, so that
/// (k²Mm + K)⁻¹ = E (k² + Λ)⁻¹ Eᵀ. With `null_const` the known null vector
/// (constants) is deflated exactly: it becomes column 0 with Λ₀ = 0.
fn pencil(mass: &DMatrix<f64>, stiff: &DMatrix<f64>, null_const: bool) -> (DMatrix<f64>, Vec<f64>) {
    let n = mass.nrows();
    let l = mass.clone().cholesky().expect("mass matrix is SPD").l();
    let linv = l.clone().try_inverse().expect("Cholesky factor invertible");
    let b = &linv * stiff * linv.transpose();
    let b = 0.5 * (&b + b.transpose());
    if !null_const {
        let eig = SymmetricEigen::new(b);
        let e = linv.transpose() * eig.eigenvectors;
        return (e, eig.eigenvalues.iter().cloned().collect());
    }
    // v0 = Lᵀ1 normalized; Householder H maps e₀ to v0.
    let ones = nalgebra::DVector::from_element(n, 1.0);
    let mut v0 = l.transpose() * &ones;
    let nrm = v0.norm();
    v0 /= nrm;
    let mut w = v0.clone();
    w[0] -= 1.0;
    let wn = w.norm();
    let h = if wn > 0.0 {
        w /= wn;
        DMatrix::identity(n, n) - 2.0 * &w * w.transpose()
    } else {
        DMatrix::identity(n, n)
    };
    let bh = &h * &b * &h;
    let sub = bh.view((1, 1), (n - 1, n - 1)).into_owned();
    let sub = 0.5 * (&sub + sub.transpose());
    let eig = SymmetricEigen::new(sub);
    let mut v = DMatrix::zeros(n, n);
    v[(0, 0)] = 1.0;
    v.view_mut((1, 1), (n - 1, n - 1)).copy_from(&eig.eigenvectors);
    let mut e = linv.transpose() * (&h * v);
    for i in 0..n {
        e[(i, 0)] = 1.0 / nrm;
    }
    let mut vals = vec![0.0];
    vals.extend(eig.eigenvalues.iter().cloned());
    (e, vals)
}

impl Strip {
    pub fn new(grid: PeriodicGrid) -> Self {
        let fourier = Fourier::new(grid);
        let cheb = Chebyshev::new(grid.n_layers);
        let nl = cheb.len();
        let nq = nl + 1;
        let (yq, wq) = gauss_legendre(nq);

        // Barycentric interpolation from Lobatto nodes.
        let lam = |j: usize| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == nl - 1 {
                0.5 * s
            } else {
                s
            }
        };
        let interp = DMatrix::from_fn(nq, nl, |q, j| {
            let tot: f64 = (0..nl).map(|l| lam(l) / (yq[q] - cheb.y[l])).sum();
            lam(j) / (yq[q] - cheb.y[j]) / tot
        });
        let dq = &interp * &cheb.d;
        let wqm = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(wq.clone()));
        let mass = interp.transpose() * &wqm * &interp;
        let kyy = dq.transpose() * &wqm * &dq;

        let (neu_e, neu_val) = pencil(&mass, &kyy, true);
        let neu_null = 0;
        let m = nl - 1;
        let (dir_e, dir_val) = pencil(
            &mass.view((0, 0), (m, m)).into_owned(),
            &kyy.view((0, 0), (m, m)).into_owned(),
            false,
        );
        let d_top = (0..nl).map(|j| cheb.d[(nl - 1, j)]).collect();

        Self {
            nl,
            nq,
            interp: row_major(&interp),
            interp_t: row_major(&interp.transpose()),
            dq: row_major(&dq),
            dq_t: row_major(&dq.transpose()),
            d_top,
            neu_et: row_major(&neu_e.transpose()),
            neu_e: row_major(&neu_e),
            neu_val,
            neu_null,
            dir_et: row_major(&dir_e.transpose()),
            dir_e: row_major(&dir_e),
            dir_val,
            yq,
            wq,
            fourier,
            cheb,
            rtol: 1e-12,
            max_iter: 200,
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.fourier.grid
    }

    fn n(&self) -> usize {
        self.fourier.n()
    }

    /// out[j] = Σ_l mat[j, l] · inp[l] for layer-major fields.
    fn ymul(&self, mat: &[f64], rows: usize, cols: usize, inp: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; rows * n];
        for j in 0..rows {
            let o = &mut out[j * n..(j + 1) * n];
            for l in 0..cols {
                let m = mat[j * cols + l];
                if m == 0.0 {
                    continue;
                }
                let src = &inp[l * n..(l + 1) * n];
                for (a, b) in o.iter_mut().zip(src) {
                    *a += m * b;
                }
            }
        }
        out
    }

    fn layers_deriv(&self, u: &[f64], layers: usize) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; layers * n];
        for j in 0..layers {
            let d = self.fourier.deriv(&u[j * n..(j + 1) * n]);
            out[j * n..(j + 1) * n].copy_from_slice(&d);
        }
        out
    }

    /// (∂ₓu, ∂ᵧu) at the quadrature nodes.
    fn grad_q(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let ug = self.ymul(&self.interp, self.nq, self.nl, u);
        let ux = self.layers_deriv(&ug, self.nq);
        let uy = self.ymul(&self.dq, self.nq, self.nl, u);
        (ux, uy)
    }

    /// Iᵀ Dₓᵀ p + D_qᵀ q, projected onto the retained Fourier modes.
    fn div_t(&self, p: &[f64], q: &[f64]) -> Vec<f64> {
        let n = self.n();
        let px: Vec<f64> = self.layers_deriv(p, self.nq).iter().map(|v| -v).collect();
        let mut r = self.ymul(&self.dq_t, self.nl, self.nq, q);
        let r2 = self.ymul(&self.interp_t, self.nl, self.nq, &px);
        for (a, b) in r.iter_mut().zip(&r2) {
            *a += b;
        }
        for j in 0..self.nl {
            let pr = self.fourier.project(&r[j * n..(j + 1) * n]);
            r[j * n..(j + 1) * n].copy_from_slice(&pr);
        }
        r
    }

    fn stiffness(&self, t: &Tensor, u: &[f64]) -> Vec<f64> {
        let n = self.n();
        let (ux, uy) = self.grad_q(u);
        let mut p = vec![0.0; ux.len()];
        let mut q = vec![0.0; ux.len()];
        for j in 0..self.nq {
            let w = self.wq[j];
            for i in j * n..(j + 1) * n {
                p[i] = w * (t.t11[i] * ux[i] + t.t12[i] * uy[i]);
                q[i] = w * (t.t12[i] * ux[i] + t.t22[i] * uy[i]);
            }
        }
        self.div_t(&p, &q)
    }

    /// Flat-strip solve. `dirichlet` restricts to the interior layers and
    /// returns zero on the top layer; otherwise the pseudo-inverse on the
    /// full strip (constants removed).
    fn flat_solve(&self, r: &[f64], dirichlet: bool) -> Vec<f64> {
        let n = self.n();
        let (m, e, et, vals) = if dirichlet {
            (self.nl - 1, &self.dir_e, &self.dir_et, &self.dir_val)
        } else {
            (self.nl, &self.neu_e, &self.neu_et, &self.neu_val)
        };
        let mut t = self.ymul(et, m, m, &r[..m * n]);
        for l in 0..m {
            let mut c = self.fourier.forward(&t[l * n..(l + 1) * n]);
            for (idx, (ci, &k)) in c.iter_mut().zip(&self.fourier.k).enumerate() {
                if !dirichlet && idx == 0 && l == self.neu_null {
                    *ci = Complex64::new(0.0, 0.0);
                } else {
                    *ci /= k * k + vals[l];
                }
            }
            t[l * n..(l + 1) * n].copy_from_slice(&self.fourier.inverse(&c));
        }
        let mut out = self.ymul(e, m, m, &t);
        out.resize(self.nl * n, 0.0);
        out
    }

    /// Preconditioned CG for `apply`, preconditioned by `prec`.
    fn pcg(
        &self,
        apply: impl Fn(&[f64]) -> Vec<f64>,
        prec: impl Fn(&[f64]) -> Vec<f64>,
        rhs: Vec<f64>,
    ) -> Result<(Vec<f64>, usize)> {
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        let mut r = rhs;
        let r0 = dot(&r, &r).sqrt();
        let mut x = vec![0.0; r.len()];
        if r0 == 0.0 {
            return Ok((x, 0));
        }
        let mut z = prec(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut it = 0;
        let mut res = r0;
        while it < self.max_iter {
            let ap = apply(&p);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            for i in 0..x.len() {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            it += 1;
            res = dot(&r, &r).sqrt();
            if res <= self.rtol * r0 {
                return Ok((x, it));
            }
            z = prec(&r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..p.len() {
                p[i] = z[i] + beta * p[i];
            }
        }
        if res <= 1e-10 * r0 {
            Ok((x, it))
        } else {
            Err(Error::SolveFailure { residual: res / r0, iterations: it })
        }
    }

    fn top_vec(&self, xi: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut b = vec![0.0; self.nl * n];
        b[(self.nl - 1) * n..].copy_from_slice(xi);
        b
    }

    fn strip_mean(&self, u: &[f64]) -> f64 {
        let n = self.n();
        let mut s = 0.0;
        for j in 0..self.nl {
            s += self.cheb.w[j] * u[j * n..(j + 1) * n].iter().sum::<f64>();
        }
        s / n as f64
    }

    /// Tensor I + Q (or Q alone) at the quadrature nodes.
    fn tensor(&self, eta: &[f64], eta_x: &[f64], identity: bool) -> Tensor {
        let n = self.n();
        let size = self.nq * n;
        let mut t = Tensor { t11: vec![0.0; size], t12: vec![0.0; size], t22: vec![0.0; size] };
        let c = if identity { 1.0 } else { 0.0 };
        for j in 0..self.nq {
            let y = self.yq[j];
            for i in 0..n {
                let idx = j * n + i;
                let h = eta[i];
                let s = y * eta_x[i];
                t.t11[idx] = c + h;
                t.t12[idx] = -s;
                t.t22[idx] = (c - (1.0 - c) * h + s * s) / (1.0 + h);
            }
        }
        t
    }

    /// Prepares the variable-coefficient operator for a surface.
    pub fn operator(&self, eta: &[f64]) -> Result<SurfaceOperator<'_>> {
        SurfaceOperator::new(self, eta)
    }

    /// The flat-strip operator (η = 0).
    pub fn flat(&self) -> SurfaceOperator<'_> {
        SurfaceOperator::new(self, &vec![0.0; self.n()]).expect("flat strip is admissible")
    }
}

/// The strip problem for a fixed surface η.
#[derive(Debug, Clone)]
pub struct SurfaceOperator<'a> {
    pub strip: &'a Strip,
    pub eta: Vec<f64>,
    pub eta_x: Vec<f64>,
    a: Tensor,
    q: Tensor,
    /// Load vector a(x, ·) of the linear ramp and its energy a(x, x).
    ramp_c: Vec<f64>,
    ramp_d: f64,
    flat: bool,
}

/// Neumann solution for data ∂ₓζ with its gradient. The full potential is
/// `u + slope · x`, see [`SurfaceOperator::k_solve`].
#[derive(Debug, Clone)]
pub struct KSolution {
    /// K(η)ζ at the surface nodes.
    pub k_zeta: Vec<f64>,
    /// Periodic part, nodal values, layer-major.
    pub u: Vec<f64>,
    pub slope: f64,
    /// Gradient of the full potential at the quadrature nodes.
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
    /// Gradient of the full potential on the surface y = 1.
    pub top_ux: Vec<f64>,
    pub top_uy: Vec<f64>,
    pub iterations: usize,
}

impl<'a> SurfaceOperator<'a> {
    fn new(strip: &'a Strip, eta_in: &[f64]) -> Result<Self> {
        let n = strip.n();
        if eta_in.len() != n {
            return Err(Error::GridMismatch(format!("expected {n} samples, got {}", eta_in.len())));
        }
        check_depth(eta_in)?;
        let eta = strip.fourier.project(eta_in);
        check_depth(&eta)?;
        let eta_x = strip.fourier.deriv(&eta);
        let a = strip.tensor(&eta, &eta_x, true);
        let q = strip.tensor(&eta, &eta_x, false);
        let flat = eta.iter().all(|v| *v == 0.0);
        let (mut p, mut r) = (a.t11.clone(), a.t12.clone());
        for j in 0..strip.nq {
            let w = strip.wq[j];
            for i in j * n..(j + 1) * n {
                p[i] *= w;
                r[i] *= w;
            }
        }
        let ramp_c = strip.div_t(&p, &r);
        let ramp_d = n as f64 + eta.iter().sum::<f64>();
        Ok(Self { strip, eta, eta_x, a, q, ramp_c, ramp_d, flat })
    }

    /// Q at the Lobatto nodes and the smallest eigenvalue of I + Q.
    pub fn q_tensor(&self) -> QTensor {
        let s = self.strip;
        let n = s.n();
        let size = s.nl * n;
        let (mut q11, mut q12, mut q22) = (vec![0.0; size], vec![0.0; size], vec![0.0; size]);
        let mut p0 = f64::INFINITY;
        for j in 0..s.nl {
            let y = s.cheb.y[j];
            for i in 0..n {
                let idx = j * n + i;
                let h = self.eta[i];
                let sx = y * self.eta_x[i];
                q11[idx] = h;
                q12[idx] = -sx;
                q22[idx] = (-h + sx * sx) / (1.0 + h);
                let (a, b, c) = (1.0 + h, -sx, (1.0 + sx * sx) / (1.0 + h));
                let m = 0.5 * (a + c);
                let d = (0.25 * (a - c) * (a - c) + b * b).sqrt();
                p0 = p0.min(m - d);
            }
        }
        QTensor { q11, q12, q22, p0 }
    }

    fn remove_mean(&self, u: &mut [f64]) {
        let m = self.strip.strip_mean(u);
        u.iter_mut().for_each(|x| *x -= m);
    }

    /// Periodic Neumann solve: flat predictor plus PCG correction.
    fn solve_neumann(&self, b: &[f64]) -> Result<(Vec<f64>, usize)> {
        let s = self.strip;
        let x0 = s.flat_solve(b, false);
        if self.flat {
            return Ok((x0, 0));
        }
        let r: Vec<f64> = s.stiffness(&self.q, &x0).iter().map(|v| -v).collect();
        let (v, it) = s.pcg(|p| s.stiffness(&self.a, p), |r| s.flat_solve(r, false), r)?;
        let mut u: Vec<f64> = x0.iter().zip(&v).map(|(a, b)| a + b).collect();
        self.remove_mean(&mut u);
        Ok((u, it))
    }

    /// Neumann solve in the space of periodic fields plus a linear ramp σx.
    /// The extra equation is tested against x itself with right-hand side
    /// `ramp_rhs`; this reproduces the behaviour of the problem on the whole
    /// line, where the potential may tend to different constants at ±∞.
    fn solve_line(&self, b: &[f64], ramp_rhs: f64) -> Result<(Vec<f64>, f64, usize)> {
        let s = self.strip;
        let nf = s.n() as f64;
        let len = b.len();
        let u0 = s.flat_solve(b, false);
        let s0 = ramp_rhs / nf;
        if self.flat {
            return Ok((u0, s0, 0));
        }
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        let c = &self.ramp_c;
        let mut r: Vec<f64> = s.stiffness(&self.q, &u0).iter().zip(c).map(|(v, ci)| -v - s0 * ci).collect();
        r.push(-dot(c, &u0) - (self.ramp_d - nf) * s0);
        let apply = |p: &[f64]| {
            let (pu, ps) = (&p[..len], p[len]);
            let mut out: Vec<f64> = s.stiffness(&self.a, pu).iter().zip(c).map(|(v, ci)| v + ps * ci).collect();
            out.push(dot(c, pu) + self.ramp_d * ps);
            out
        };
        let prec = |r: &[f64]| {
            let mut z = s.flat_solve(&r[..len], false);
            z.push(r[len] / nf);
            z
        };
        let (v, it) = s.pcg(apply, prec, r)?;
        let mut u: Vec<f64> = u0.iter().zip(&v[..len]).map(|(a, b)| a + b).collect();
        self.remove_mean(&mut u);
        Ok((u, s0 + v[len], it))
    }

    /// Dirichlet solve for top data `xi + slope · x`; returns the periodic part.
    fn solve_dirichlet(&self, b: &[f64], xi: &[f64], slope: f64) -> Result<(Vec<f64>, usize)> {
        // Lift the top data as a y-independent field so that the flat
        // residual carries no O(1) cancellation at small k.
        let s = self.strip;
        let n = s.n();
        let top = (s.nl - 1) * n;
        let mut lift = vec![0.0; s.nl * n];
        for j in 0..s.nl {
            lift[j * n..(j + 1) * n].copy_from_slice(xi);
        }
        let zero = vec![0.0; n];
        let ident = s.tensor(&zero, &zero, true);
        let mut r0: Vec<f64> = s.stiffness(&ident, &lift).iter().map(|v| -v).collect();
        for (r, bb) in r0.iter_mut().zip(b) {
            *r += bb;
        }
        let v0 = s.flat_solve(&r0, true);
        let x0: Vec<f64> = lift.iter().zip(&v0).map(|(a, b)| a + b).collect();
        if self.flat {
            return Ok((x0, 0));
        }
        let mut r: Vec<f64> = s.stiffness(&self.q, &x0).iter().map(|v| -v).collect();
        if slope != 0.0 {
            for (ri, ci) in r.iter_mut().zip(&self.ramp_c) {
                *ri -= slope * ci;
            }
        }
        r[top..].iter_mut().for_each(|v| *v = 0.0);
        let apply = |p: &[f64]| {
            let mut ap = s.stiffness(&self.a, p);
            ap[top..].iter_mut().for_each(|v| *v = 0.0);
            ap
        };
        let (v, it) = s.pcg(apply, |r| s.flat_solve(r, true), r)?;
        let u = x0.iter().zip(&v).map(|(a, b)| a + b).collect();
        Ok((u, it))
    }

    /// Weak solution of ∇·((I+Q)∇u) = ∇·F with the given top condition.
    /// The forcing F = (f1, f2) is given at the Lobatto nodes.
    pub fn solve(&self, bc: TopCondition<'_>, forcing: Option<(&[f64], &[f64])>) -> Result<StripField> {
        let s = self.strip;
        let n = s.n();
        let mut b = vec![0.0; s.nl * n];
        if let Some((f1, f2)) = forcing {
            let mut p = s.ymul(&s.interp, s.nq, s.nl, f1);
            let mut q = s.ymul(&s.interp, s.nq, s.nl, f2);
            for j in 0..s.nq {
                let w = s.wq[j];
                for i in j * n..(j + 1) * n {
                    p[i] *= w;
                    q[i] *= w;
                }
            }
            b = s.div_t(&p, &q);
        }
        match bc {
            TopCondition::NeumannTop(xi) => {
                let xi = s.fourier.project(xi);
                let mean = xi.iter().sum::<f64>() / n as f64;
                let scale = xi.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
                if mean.abs() > 1e-12 * scale {
                    return Err(Error::MeanNotZero(mean));
                }
                let top = (s.nl - 1) * n;
                for i in 0..n {
                    b[top + i] += xi[i] - mean;
                }
                let (u, it) = self.solve_neumann(&b)?;
                Ok(StripField { grid: *s.grid(), values: u, gauge: Gauge::ZeroMean, iterations: it })
            }
            TopCondition::DirichletTop(xi) => {
                let xi = s.fourier.project(xi);
                let (u, it) = self.solve_dirichlet(&b, &xi, 0.0)?;
                Ok(StripField { grid: *s.grid(), values: u, gauge: Gauge::DirichletTop, iterations: it })
            }
        }
    }

    /// G(η)ξ: top flux of the Dirichlet solve.
    pub fn dn(&self, xi: &[f64]) -> Result<Vec<f64>> {
        self.dn_ramp(xi, 0.0)
    }

    /// G(η) applied to the non-periodic data `xi + slope · x`.
    pub fn dn_ramp(&self, xi: &[f64], slope: f64) -> Result<Vec<f64>> {
        let s = self.strip;
        let n = s.n();
        let xi = s.fourier.project(xi);
        let (u, _) = self.solve_dirichlet(&vec![0.0; s.nl * n], &xi, slope)?;
        let su = s.stiffness(&self.a, &u);
        let top = (s.nl - 1) * n;
        Ok((0..n).map(|i| su[top + i] + slope * self.ramp_c[top + i]).collect())
    }

    /// N(η)κ: top trace of the periodic Neumann solve, zero surface mean.
    pub fn nd(&self, kappa: &[f64]) -> Result<Vec<f64>> {
        let u = self.solve(TopCondition::NeumannTop(kappa), None)?;
        let mut t = u.top().to_vec();
        let m = t.iter().sum::<f64>() / t.len() as f64;
        t.iter_mut().for_each(|v| *v -= m);
        Ok(t)
    }

    /// N(η)∂ₓζ on the line: the surface trace is `xi + slope · x` with `xi`
    /// periodic of zero mean.
    pub fn nd_line(&self, zeta: &[f64]) -> Result<(Vec<f64>, f64)> {
        let sol = self.k_solve(zeta)?;
        let n = self.strip.n();
        let top = (self.strip.nl - 1) * n;
        let mut t = sol.u[top..].to_vec();
        let m = t.iter().sum::<f64>() / n as f64;
        t.iter_mut().for_each(|v| *v -= m);
        Ok((t, sol.slope))
    }

    fn k_from_field(&self, u: Vec<f64>, slope: f64, iterations: usize) -> KSolution {
        let s = self.strip;
        let n = s.n();
        let top = (s.nl - 1) * n;
        let top_ux: Vec<f64> = s.fourier.deriv(&u[top..]).iter().map(|v| v + slope).collect();
        let k_zeta: Vec<f64> = top_ux.iter().map(|v| -v).collect();
        let mut top_uy = vec![0.0; n];
        for (j, &d) in s.d_top.iter().enumerate() {
            for (t, v) in top_uy.iter_mut().zip(&u[j * n..(j + 1) * n]) {
                *t += d * v;
            }
        }
        let (mut ux, uy) = s.grad_q(&u);
        ux.iter_mut().for_each(|v| *v += slope);
        KSolution { k_zeta, u, slope, ux, uy, top_ux, top_uy, iterations }
    }

    /// K(η)ζ = −∂ₓ N(η) ∂ₓζ together with the strip solution.
    ///
    /// On a periodic cell a plain Neumann solve annihilates the mean of ζ,
    /// whereas on the line K(η) acts on the mean like the flat multiplier
    /// f(0) = 1. The potential is therefore sought as a periodic field plus a
    /// ramp σx, with the ramp equation tested against x: Σ ξᵢ xᵢ = −Σ ζᵢ for
    /// ξ = ζ′. This makes K(0) equal K⁰ on every mode and keeps the discrete
    /// form exactly symmetric.
    pub fn k_solve(&self, zeta: &[f64]) -> Result<KSolution> {
        let s = self.strip;
        let zeta = s.fourier.project(zeta);
        let dz = s.fourier.deriv(&zeta);
        let b = s.top_vec(&dz);
        let (u, slope, it) = self.solve_line(&b, -zeta.iter().sum::<f64>())?;
        Ok(self.k_from_field(u, slope, it))
    }

    pub fn k_apply(&self, zeta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.k_solve(zeta)?.k_zeta)
    }

    /// The exact derivative of the discrete form ⟨ζ₁, K(η)ζ₂⟩ with respect to η,
    /// evaluated from the two strip solutions as a volume integral.
    pub fn hprime_volume(&self, s1: &KSolution, s2: &KSolution) -> Vec<f64> {
        let s = self.strip;
        let n = s.n();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        for j in 0..s.nq {
            let y = s.yq[j];
            let w = s.wq[j];
            for i in 0..n {
                let idx = j * n + i;
                let h = 1.0 + self.eta[i];
                let ex = self.eta_x[i];
                let (u1x, u1y, u2x, u2y) = (s1.ux[idx], s1.uy[idx], s2.ux[idx], s2.uy[idx]);
                let yy = 1.0 + y * y * ex * ex;
                a[i] += w * (u1x * u2x - yy / (h * h) * u1y * u2y);
                b[i] += w * (-y * (u1x * u2y + u1y * u2x) + 2.0 * y * y * ex / h * u1y * u2y);
            }
        }
        let db = s.fourier.deriv(&b);
        let out: Vec<f64> = a.iter().zip(&db).map(|(a, d)| -a + d).collect();
        s.fourier.project(&out)
    }

    /// Boundary form [−u₁ₓu₂ₓ + (1+η′²)/(1+η)² u₁ᵧu₂ᵧ] at y = 1.
    pub fn hprime_boundary(&self, s1: &KSolution, s2: &KSolution) -> Vec<f64> {
        let s = self.strip;
        let out: Vec<f64> = (0..s.n())
            .map(|i| {
                let h = 1.0 + self.eta[i];
                let ex = self.eta_x[i];
                -s1.top_ux[i] * s2.top_ux[i] + (1.0 + ex * ex) / (h * h) * (s1.top_uy[i] * s2.top_uy[i])
            })
            .collect();
        s.fourier.project(&out)
    }

    /// Homogeneous part of degree `order` of Q(εη) in ε, at the quadrature nodes.
    fn q_part(&self, order: usize) -> Tensor {
        let s = self.strip;
        let n = s.n();
        let size = s.nq * n;
        let mut t = Tensor { t11: vec![0.0; size], t12: vec![0.0; size], t22: vec![0.0; size] };
        for j in 0..s.nq {
            let y = s.yq[j];
            for i in 0..n {
                let idx = j * n + i;
                let h = self.eta[i];
                let sx = y * self.eta_x[i];
                if order == 1 {
                    t.t11[idx] = h;
                    t.t12[idx] = -sx;
                }
                let mut v = (-h).powi(order as i32);
                if order >= 2 {
                    v += sx * sx * (-h).powi(order as i32 - 2);
                }
                t.t22[idx] = v;
            }
        }
        t
    }

    /// Terms K⁰ζ, K¹(η)ζ, …, Kⁿ(η)ζ of the expansion of K(εη)ζ in ε.
    /// Only Q¹ couples to the ramp, so the ramp load and energy enter at first order.
    pub fn k_series(&self, zeta: &[f64], order: usize) -> Vec<Vec<f64>> {
        let s = self.strip;
        let n = s.n();
        let nf = n as f64;
        let top = (s.nl - 1) * n;
        let zeta = s.fourier.project(zeta);
        let dz = s.fourier.deriv(&zeta);
        let parts: Vec<Tensor> = (1..=order).map(|k| self.q_part(k)).collect();
        let d1 = self.ramp_d - nf;
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        let mut us: Vec<Vec<f64>> = Vec::with_capacity(order + 1);
        let mut ss: Vec<f64> = Vec::with_capacity(order + 1);
        us.push(s.flat_solve(&s.top_vec(&dz), false));
        ss.push(-zeta.iter().sum::<f64>() / nf);
        for m in 1..=order {
            let mut rhs = vec![0.0; s.nl * n];
            for k in 1..=m {
                let sq = s.stiffness(&parts[k - 1], &us[m - k]);
                for (r, v) in rhs.iter_mut().zip(&sq) {
                    *r -= v;
                }
            }
            for (r, c) in rhs.iter_mut().zip(&self.ramp_c) {
                *r -= ss[m - 1] * c;
            }
            us.push(s.flat_solve(&rhs, false));
            ss.push(-(dot(&self.ramp_c, &us[m - 1]) + d1 * ss[m - 1]) / nf);
        }
        us.iter()
            .zip(&ss)
            .map(|(u, sl)| s.fourier.deriv(&u[top..]).iter().map(|v| -v - sl).collect())
            .collect()
    }
}

/// K⁰ζ: the flat multiplier f(k) = |k| coth |k|.
pub fn apply_k0(fourier: &Fourier, zeta: &SurfaceProfile) -> SurfaceProfile {
    SurfaceProfile::from_values(fourier, fourier.multiplier(&zeta.values, f_multiplier))
        .expect("same grid")
}

pub fn build_q(strip: &Strip, eta: &SurfaceProfile) -> Result<QTensor> {
    Ok(strip.operator(&eta.values)?.q_tensor())
}

pub fn solve_strip(
    strip: &Strip,
    eta: &SurfaceProfile,
    bc: TopCondition<'_>,
    forcing: Option<(&[f64], &[f64])>,
) -> Result<StripField> {
    strip.operator(&eta.values)?.solve(bc, forcing)
}

pub fn dn_apply(strip: &Strip, eta: &SurfaceProfile, xi: &SurfaceProfile) -> Result<SurfaceProfile> {
    let v = strip.operator(&eta.values)?.dn(&xi.values)?;
    SurfaceProfile::from_values(&strip.fourier, v)
}

pub fn nd_apply(strip: &Strip, eta: &SurfaceProfile, kappa: &SurfaceProfile) -> Result<SurfaceProfile> {
    let v = strip.operator(&eta.values)?.nd(&kappa.values)?;
    SurfaceProfile::from_values(&strip.fourier, v)
}

pub fn k_apply(strip: &Strip, eta: &SurfaceProfile, zeta: &SurfaceProfile) -> Result<SurfaceProfile> {
    let v = strip.operator(&eta.values)?.k_apply(&zeta.values)?;
    SurfaceProfile::from_values(&strip.fourier, v)
}

pub fn k_series(
    strip: &Strip,
    eta: &SurfaceProfile,
    zeta: &SurfaceProfile,
    order: usize,
) -> Result<Vec<SurfaceProfile>> {
    let op = strip.operator(&eta.values)?;
    op.k_series(&zeta.values, order)
        .into_iter()
        .map(|v| SurfaceProfile::from_values(&strip.fourier, v))
        .collect()
}

/// ℋ′(η)(ζ₁, ζ₂) evaluated by the boundary formula.
pub fn hprime_form(
    strip: &Strip,
    eta: &SurfaceProfile,
    zeta1: &SurfaceProfile,
    zeta2: &SurfaceProfile,
) -> Result<SurfaceProfile> {
    let op = strip.operator(&eta.values)?;
    let s1 = op.k_solve(&zeta1.values)?;
    let s2 = op.k_solve(&zeta2.values)?;
    SurfaceProfile::from_values(&strip.fourier, op.hprime_boundary(&s1, &s2))
}
