//! Interface matrices, the Krein matrix and the finite-rank corrections that
//! turn unmodified eigenfunctions and resolvents into modified ones.
//!
//! Defect basis, in order: `g = (G(·,b), H(·,b), G(·,a), H(·,a))`. Rows of
//! every 4×4 matrix are ordered `(value at b, slope at b, value at a, slope
//! at a)`.
//!
//! A correction `u = u₀ + Σ eᵢ gᵢ` with `u₀` of class C¹ meets the interface
//! conditions iff `B (Y + Q e) = A e / 2`, where `Y` holds the traces of `u₀`
//! and `Q` the two-sided mean traces of `g` (the printed `q` with its second
//! and fourth columns negated). [`KreinConvention::Corrected`] solves
//! exactly this system; the printed variants are kept for falsification.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::greenfun::{check_wronskian, Endpoint, GreenKernel, GreenTraces, KernelKind, SpectralPoint};
use crate::jost::{jost_traces, GridFunction, JostPair, JostTraces, SpatialGrid};
use crate::potential::Potential;
use crate::C64;

const I: C64 = Complex64 { re: 0.0, im: 1.0 };

/// `|det M| < SINGULAR_REL * 16/h⁸` declares a singular momentum.
pub const SINGULAR_REL: f64 = 1e-6;

pub type Mat4 = Matrix4<C64>;
pub type Vec4 = Vector4<C64>;

/// How the coefficient vector is formed from `M`, `B` and the traces.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KreinConvention {
    /// `(2BQ - A) e = -2BY`, defect `i` weighted by `eᵢ`.
    #[default]
    Corrected,
    /// `e = -(Bq - A)⁻¹ B Γ` with `Γ = Y/2`, defect row index outer.
    Printed,
    /// Printed matrix with the index attachment swapped: `e = -(M⁻¹B)ᵀ Γ`.
    PrintedTransposed,
}

/// `(A, B)` for the given `θ` and `h`.
pub fn interface_matrices(theta: C64, h: f64) -> (Mat4, Mat4) {
    let e = |s: f64| (theta * s).exp();
    let inv_h2 = 1.0 / (h * h);
    let one = C64::new(1.0, 0.0);
    let a = Mat4::from_diagonal(&Vec4::new(
        (one + e(1.5)) * inv_h2,
        (one + e(0.5)) * inv_h2,
        (one + e(-1.5)) * inv_h2,
        (one + e(-0.5)) * inv_h2,
    ));
    let mut b = Mat4::zeros();
    b[(0, 1)] = one - e(1.5);
    b[(1, 0)] = e(0.5) - one;
    b[(2, 3)] = one - e(-1.5);
    b[(3, 2)] = e(-0.5) - one;
    (a, b)
}

/// The trace matrix `q`, entries and signs as printed.
pub fn q_matrix(t: &GreenTraces) -> Mat4 {
    let s = 0.5 / (t.h * t.h);
    Mat4::new(
        t.g_bb,
        -(t.h_bb_minus + s),
        t.g_ba,
        -t.h_ba,
        t.h_bb_minus + s,
        -t.dh_bb,
        t.h_ab,
        -t.dh_ba,
        t.g_ab,
        -t.h_ab,
        t.g_aa,
        -(t.h_aa_plus - s),
        t.h_ba,
        -t.dh_ab,
        t.h_aa_plus - s,
        -t.dh_aa,
    )
}

/// Column signs relating the printed `q` to the mean-trace matrix `Q = qS`.
fn column_signs() -> Mat4 {
    Mat4::from_diagonal(&Vec4::new(
        C64::new(1.0, 0.0),
        C64::new(-1.0, 0.0),
        C64::new(1.0, 0.0),
        C64::new(-1.0, 0.0),
    ))
}

/// Mean traces of the defects: column `i` holds the value and slope of `gᵢ`
/// at `b` and `a`, averaged across any jump.
pub fn mean_trace_matrix(t: &GreenTraces) -> Mat4 {
    q_matrix(t) * column_signs()
}

/// `B q - A` exactly as defined from the printed matrices.
pub fn krein_matrix(theta: C64, h: f64, t: &GreenTraces) -> Mat4 {
    let (a, b) = interface_matrices(theta, h);
    b * q_matrix(t) - a
}

/// `2 B Q - A`, the matrix of the interface conditions.
pub fn corrected_matrix(theta: C64, h: f64, t: &GreenTraces) -> Mat4 {
    let (a, b) = interface_matrices(theta, h);
    b * mean_trace_matrix(t) * C64::new(2.0, 0.0) - a
}

/// `‖M + (2/h²) I‖ / |θ|`, the size of the first-order remainder.
pub fn remainder_norm(m: &Mat4, theta: C64, h: f64) -> f64 {
    let shifted = m + Mat4::identity() * C64::new(2.0 / (h * h), 0.0);
    shifted.norm() / theta.norm()
}

/// Everything needed to correct one spectral point.
#[derive(Clone, Debug)]
pub struct KreinSystem {
    pub h: f64,
    pub theta: C64,
    pub convention: KreinConvention,
    pub a: Mat4,
    pub b: Mat4,
    pub q: Mat4,
    /// Matrix the convention inverts.
    pub m: Mat4,
    m_inv: Mat4,
    pub det_scaled: f64,
}

impl KreinSystem {
    pub fn new(theta: C64, h: f64, t: &GreenTraces, convention: KreinConvention) -> Result<Self> {
        if !(h > 0.0) {
            return Err(invalid("h must be positive"));
        }
        let (a, b) = interface_matrices(theta, h);
        let q = q_matrix(t);
        let m = match convention {
            KreinConvention::Corrected => b * q * column_signs() * C64::new(2.0, 0.0) - a,
            KreinConvention::Printed | KreinConvention::PrintedTransposed => b * q - a,
        };
        let det_scaled = m.determinant().norm() * h.powi(8) / 16.0;
        let k = match t.point {
            SpectralPoint::Limit(k) => k,
            SpectralPoint::Energy(z) => z.norm().sqrt(),
        };
        if !(det_scaled >= SINGULAR_REL) {
            return Err(Error::SingularMomentum { k, det_scaled });
        }
        let m_inv = m.try_inverse().ok_or(Error::SingularMomentum { k, det_scaled })?;
        Ok(Self { h, theta, convention, a, b, q, m, m_inv, det_scaled })
    }

    /// Defect weights for a regular part with traces
    /// `y = (u(b), u'(b), u(a), u'(a))`.
    pub fn coefficients(&self, y: Vec4) -> Vec4 {
        let by = self.b * y;
        match self.convention {
            KreinConvention::Corrected => -(self.m_inv * by) * C64::new(2.0, 0.0),
            KreinConvention::Printed => -(self.m_inv * by) * C64::new(0.5, 0.0),
            KreinConvention::PrintedTransposed => -((self.m_inv * self.b).transpose() * y) * C64::new(0.5, 0.0),
        }
    }

    /// Defect weights for the resolvent correction, where the printed
    /// formula pairs with the traces themselves rather than `Γ = Y/2`.
    pub fn resolvent_coefficients(&self, y: Vec4) -> Vec4 {
        match self.convention {
            KreinConvention::Corrected => self.coefficients(y),
            _ => self.coefficients(y) * C64::new(2.0, 0.0),
        }
    }
}

/// Traces of a real-`k` unmodified eigenfunction as `(b, b', a, a')`.
pub fn eigenfunction_trace_vector(t: &JostTraces, k: f64) -> Vec4 {
    let (ta, tb) = t.eigenfunction_traces(k);
    Vec4::new(tb.value, tb.deriv, ta.value, ta.deriv)
}

/// Defect weights of `ψ_θ(·,k)` from interface data only.
pub fn eigen_coefficients(t: &JostTraces, p: &Potential, theta: C64, k: f64, convention: KreinConvention) -> Result<Vec4> {
    let gt = GreenTraces::from_jost(t, SpectralPoint::Limit(k.abs()), p.a(), p.b());
    let sys = KreinSystem::new(theta, t.h, &gt, convention)?;
    Ok(sys.coefficients(eigenfunction_trace_vector(t, k)))
}

/// The four defect kernels sampled on a grid.
pub fn defect_functions(pair: &JostPair, grid: &SpatialGrid) -> [GridFunction; 4] {
    let t = pair.traces();
    [
        (Endpoint::B, KernelKind::Value),
        (Endpoint::B, KernelKind::Slope),
        (Endpoint::A, KernelKind::Value),
        (Endpoint::A, KernelKind::Slope),
    ]
    .map(|(e, kind)| GreenKernel::new(&t, e, kind).sample(pair, grid))
}

/// `ψ_θ(·,k) = ψ₀(·,k) + Σ eᵢ gᵢ` with the defects of `|k|`.
pub fn modified_eigenfunction(
    p: &Potential,
    h: f64,
    theta: C64,
    k: f64,
    grid: &SpatialGrid,
    convention: KreinConvention,
) -> Result<GridFunction> {
    if k == 0.0 || !k.is_finite() {
        return Err(invalid("k = 0 is a branch-cut endpoint and is excluded"));
    }
    let pair = JostPair::solve(p, h, C64::new(k.abs(), 0.0), grid)?;
    let t = pair.traces();
    let e = eigen_coefficients(&t, p, theta, k, convention)?;
    let mut psi = crate::jost::eigenfunction_from_pair(&pair, k);
    for (c, g) in e.iter().zip(defect_functions(&pair, grid).iter()) {
        psi.axpy(*c, g);
    }
    Ok(psi)
}

/// Residuals of the four interface conditions, each relative to `‖u‖_∞`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct InterfaceResiduals {
    pub value_b: f64,
    pub slope_b: f64,
    pub value_a: f64,
    pub slope_a: f64,
}

impl InterfaceResiduals {
    pub fn max(&self) -> f64 {
        self.value_b.max(self.slope_b).max(self.value_a).max(self.slope_a)
    }
}

/// Checks `e^{-θ/2}u(b⁺) = u(b⁻)`, `e^{-3θ/2}u'(b⁺) = u'(b⁻)`,
/// `e^{θ/2}u(a⁺) = u(a⁻)` and `e^{3θ/2}u'(a⁺) = u'(a⁻)`. Slopes are scaled by
/// `h/(1+|ζ|)` to compare with values.
pub fn interface_residuals(u: &GridFunction, theta: C64, h: f64, momentum: f64) -> InterfaceResiduals {
    let sup = u
        .values
        .iter()
        .chain([&u.at_a.left.value, &u.at_a.right.value, &u.at_b.left.value, &u.at_b.right.value])
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let ds = h / (1.0 + momentum.abs());
    let e = |s: f64| (theta * s).exp();
    InterfaceResiduals {
        value_b: (e(-0.5) * u.at_b.right.value - u.at_b.left.value).norm() / sup,
        slope_b: (e(-1.5) * u.at_b.right.deriv - u.at_b.left.deriv).norm() * ds / sup,
        value_a: (e(0.5) * u.at_a.right.value - u.at_a.left.value).norm() / sup,
        slope_a: (e(1.5) * u.at_a.right.deriv - u.at_a.left.deriv).norm() * ds / sup,
    }
}

/// Max of `|-h²u'' + (V - k²)u|` over nodes at least two steps from `a`, `b`
/// and the box ends, using second differences, relative to `‖u‖_∞ k²`.
pub fn pde_residual(u: &GridFunction, p: &Potential, h: f64, k: f64, grid: &SpatialGrid) -> f64 {
    let d2 = grid.step() * grid.step();
    let skip = [grid.ia(), grid.ia() + 1, grid.ib(), grid.ib() + 1];
    let sup = u.sup_norm();
    (2..grid.n() - 2)
        .filter(|i| !skip.iter().any(|s| s.abs_diff(*i) <= 1))
        .map(|i| {
            let lap = (u.values[i - 1] - 2.0 * u.values[i] + u.values[i + 1]) / d2;
            (-h * h * lap + (p.eval(grid.x(i)) - k * k) * u.values[i]).norm()
        })
        .fold(0.0, f64::max)
        / (sup * (k * k).max(1.0))
}

/// Grid Green's kernels and Jost data at one off-cut `z`.
struct ResolventData {
    pair: JostPair,
    defects: [GridFunction; 4],
}

fn resolvent_data(p: &Potential, h: f64, z: C64, grid: &SpatialGrid) -> Result<ResolventData> {
    let zeta = SpectralPoint::Energy(z).zeta()?;
    let pair = JostPair::solve(p, h, zeta, grid)?;
    check_wronskian(&pair.traces())?;
    let defects = defect_functions(&pair, grid);
    Ok(ResolventData { pair, defects })
}

/// `(H₀ - z)^{-1} f` by separable quadrature of the Green's kernel: midpoint
/// cumulative sums on each side of every node, plus the exact half-cell
/// correction `f δ²/(8h²)`.
pub fn unmodified_resolvent_apply(p: &Potential, h: f64, z: C64, f: &[C64], grid: &SpatialGrid) -> Result<Vec<C64>> {
    let data = resolvent_data(p, h, z, grid)?;
    Ok(green_quadrature(&data.pair, h, f, grid))
}

fn green_quadrature(pair: &JostPair, h: f64, f: &[C64], grid: &SpatialGrid) -> Vec<C64> {
    let n = grid.n();
    let d = grid.step();
    let hw2 = h * h * pair.w;
    let plus = &pair.plus.values;
    let minus = &pair.minus.values;
    let mut left = vec![C64::new(0.0, 0.0); n];
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        let g = minus[i] * f[i] * d;
        left[i] = acc + 0.5 * g;
        acc += g;
    }
    let mut out = vec![C64::new(0.0, 0.0); n];
    let mut acc = C64::new(0.0, 0.0);
    for i in (0..n).rev() {
        let g = plus[i] * f[i] * d;
        let right = acc + 0.5 * g;
        acc += g;
        out[i] = (plus[i] * left[i] + minus[i] * right) / hw2 + f[i] * (d * d / (8.0 * h * h));
    }
    out
}

/// Bilinear traces `(∫G(y,b)f, ∫H(y,b)f, ∫G(y,a)f, ∫H(y,a)f)`; these are the
/// interface traces of `(H₀ - z)^{-1} f` by kernel symmetry.
fn resolvent_traces(defects: &[GridFunction; 4], f: &[C64], grid: &SpatialGrid) -> Vec4 {
    let d = grid.step();
    let pair = |g: &GridFunction| g.values.iter().zip(f).map(|(u, v)| u * v).sum::<C64>() * d;
    Vec4::new(pair(&defects[0]), pair(&defects[1]), pair(&defects[2]), pair(&defects[3]))
}

/// The Krein correction `Σ eᵢ γ_{z,i}` to `(H₀ - z)^{-1} f`.
pub fn resolvent_difference_apply(
    f: &[C64],
    z: C64,
    theta: C64,
    h: f64,
    p: &Potential,
    grid: &SpatialGrid,
    convention: KreinConvention,
) -> Result<Vec<C64>> {
    Ok(krein_resolvent(f, z, theta, h, p, grid, convention)?.1)
}

/// `((H₀ - z)^{-1} f, correction)` from one set of Jost data.
pub fn krein_resolvent(
    f: &[C64],
    z: C64,
    theta: C64,
    h: f64,
    p: &Potential,
    grid: &SpatialGrid,
    convention: KreinConvention,
) -> Result<(Vec<C64>, Vec<C64>)> {
    if f.len() != grid.n() {
        return Err(invalid("state length differs from the grid"));
    }
    let data = resolvent_data(p, h, z, grid)?;
    let gt = GreenTraces::from_jost(&data.pair.traces(), SpectralPoint::Energy(z), p.a(), p.b());
    let sys = KreinSystem::new(theta, h, &gt, convention)?;
    let e = sys.resolvent_coefficients(resolvent_traces(&data.defects, f, grid));
    let mut corr = vec![C64::new(0.0, 0.0); grid.n()];
    for (c, g) in e.iter().zip(data.defects.iter()) {
        for (u, v) in corr.iter_mut().zip(&g.values) {
            *u += c * v;
        }
    }
    Ok((green_quadrature(&data.pair, h, f, grid), corr))
}

/// Momenta where `|det M|` falls below the singular threshold, with the
/// scaled determinant.
pub fn singular_scan(
    p: &Potential,
    theta: C64,
    h: f64,
    k_grid: &[f64],
    convention: KreinConvention,
) -> Result<Vec<(f64, f64)>> {
    let dets: Vec<(f64, f64)> = k_grid
        .par_iter()
        .map(|&k| {
            let t = jost_traces(p, h, C64::new(k.abs(), 0.0))?;
            let gt = GreenTraces::from_jost(&t, SpectralPoint::Limit(k.abs()), p.a(), p.b());
            let (a, b) = interface_matrices(theta, h);
            let m = match convention {
                KreinConvention::Corrected => b * mean_trace_matrix(&gt) * C64::new(2.0, 0.0) - a,
                _ => b * q_matrix(&gt) - a,
            };
            Ok((k, m.determinant().norm() * h.powi(8) / 16.0))
        })
        .collect::<Result<_>>()?;
    Ok(dets.into_iter().filter(|&(_, d)| !(d >= SINGULAR_REL)).collect())
}

/// Relative gap between the derivative of `f` along the real and the
/// imaginary direction at `θ`; zero for holomorphic `f`.
pub fn cauchy_riemann_defect(f: impl Fn(C64) -> C64, theta: C64, eps: f64) -> f64 {
    let re = (f(theta + eps) - f(theta - eps)) / (2.0 * eps);
    let im = (f(theta + I * eps) - f(theta - I * eps)) / (2.0 * I * eps);
    (re - im).norm() / re.norm().max(im.norm()).max(1e-300)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greenfun::boundary_traces;
    use crate::oracle::oracle_solve_scattering;

    fn square() -> Potential {
        Potential::square(0.0, 1.0, 2.0).unwrap()
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn zero_theta_matrices() {
        let (a, b) = interface_matrices(c(0.0), 0.5);
        assert_eq!(a, Mat4::identity() * c(8.0));
        assert_eq!(b, Mat4::zeros());
        let t = boundary_traces(&square(), 0.5, SpectralPoint::Limit(1.3)).unwrap();
        let m = krein_matrix(c(0.0), 0.5, &t);
        assert!((m + Mat4::identity() * c(8.0)).norm() == 0.0);
        assert!((m.determinant() - c(16.0 / 0.5f64.powi(8))).norm() < 1e-12 * 4096.0);
    }

    #[test]
    fn interface_matrix_is_first_order_in_theta() {
        let h = 0.5;
        let theta = c(h * h * h);
        let (_, b) = interface_matrices(theta, h);
        let (_, b2) = interface_matrices(theta * 0.5, h);
        let ratio = b.norm() / b2.norm();
        assert!((ratio - 2.0).abs() < 0.05);
    }

    #[test]
    fn entries_are_holomorphic_in_theta() {
        let t = boundary_traces(&square(), 0.5, SpectralPoint::Limit(1.3)).unwrap();
        let theta = C64::new(0.02, 0.01);
        for (i, j) in [(0, 0), (0, 1), (1, 0), (2, 3), (3, 2), (3, 3)] {
            let d = cauchy_riemann_defect(|th| krein_matrix(th, 0.5, &t)[(i, j)], theta, 1e-5);
            assert!(d < 1e-6, "({i},{j}) {d}");
            let d = cauchy_riemann_defect(|th| interface_matrices(th, 0.5).0[(i, i.min(j))], theta, 1e-5);
            assert!(d < 1e-6);
        }
    }

    #[test]
    fn zero_theta_leaves_eigenfunction_unchanged() {
        let p = square();
        let g = SpatialGrid::new(-2.0, 3.0, 513, 0.0, 1.0).unwrap();
        let psi = modified_eigenfunction(&p, 0.5, c(0.0), 1.5, &g, KreinConvention::Corrected).unwrap();
        let psi0 = crate::jost::unmodified_eigenfunction(&p, 0.5, 1.5, &g).unwrap();
        assert_eq!(psi.values, psi0.values);
    }

    #[test]
    fn corrected_eigenfunction_meets_interface_conditions() {
        let p = square();
        let g = SpatialGrid::new(-2.0, 3.0, 513, 0.0, 1.0).unwrap();
        for theta in [c(0.05), C64::new(0.02, 0.03)] {
            for k in [0.8, -1.5, 3.0] {
                let psi = modified_eigenfunction(&p, 0.5, theta, k, &g, KreinConvention::Corrected).unwrap();
                let r = interface_residuals(&psi, theta, 0.5, k);
                assert!(r.max() < 1e-9, "θ={theta} k={k} {r:?}");
            }
        }
    }

    #[test]
    fn corrected_eigenfunction_matches_oracle() {
        let p = square();
        let g = SpatialGrid::new(-2.0, 3.0, 2049, 0.0, 1.0).unwrap();
        let fine = g.refined(3).unwrap();
        for k in [0.8, 3.0, -1.5] {
            let theta = c(0.05);
            let psi = modified_eigenfunction(&p, 0.5, theta, k, &fine, KreinConvention::Corrected).unwrap();
            let o = oracle_solve_scattering(&p, 0.5, theta, k, &fine).unwrap();
            let gap = psi.values.iter().zip(&o.values).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
            assert!(gap < 1e-4, "k={k} gap={gap}");
        }
    }

    #[test]
    fn printed_convention_misses_the_oracle() {
        let p = square();
        let g = SpatialGrid::new(-2.0, 3.0, 1025, 0.0, 1.0).unwrap();
        let theta = c(0.05);
        let psi = modified_eigenfunction(&p, 0.5, theta, 1.5, &g, KreinConvention::Printed).unwrap();
        let o = oracle_solve_scattering(&p, 0.5, theta, 1.5, &g).unwrap();
        let gap = psi.values.iter().zip(&o.values).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
        assert!(gap > 1e-3, "gap={gap}");
    }

    #[test]
    fn free_resolvent_quadrature_solves_the_equation() {
        use crate::oracle::{gaussian_on, oracle_resolvent_apply, DiscreteHamiltonian};
        let p = square();
        // Wide box: the Dirichlet walls must not see the decaying solution.
        let g = SpatialGrid::with_step(-6.0, 7.0, 5.0 / 2048.0, 0.0, 1.0).unwrap();
        let h = 0.25;
        let f = gaussian_on(&g, 0.5, 0.2, 2.0);
        let z = C64::new(-1.0, 0.5);
        let u = unmodified_resolvent_apply(&p, h, z, &f, &g).unwrap();
        let ham = DiscreteHamiltonian::build(&p, h, c(0.0), &g).unwrap();
        let o = oracle_resolvent_apply(&ham, &f, z).unwrap();
        let rel = (g.norm(&u.iter().zip(&o).map(|(a, b)| a - b).collect::<Vec<_>>())) / g.norm(&o);
        assert!(rel < 1e-4, "{rel}");
    }

    #[test]
    fn zero_theta_resolvent_correction_vanishes() {
        let p = square();
        let g = SpatialGrid::new(-2.0, 3.0, 513, 0.0, 1.0).unwrap();
        let f = crate::oracle::gaussian_on(&g, 0.5, 0.2, 1.0);
        let corr = resolvent_difference_apply(&f, C64::new(-1.0, 0.5), c(0.0), 0.5, &p, &g, KreinConvention::Corrected)
            .unwrap();
        assert!(corr.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn resolvent_correction_conjugation_symmetry() {
        // For real f and real θ the corrections at z and z̄ are conjugate.
        let p = square();
        let g = SpatialGrid::new(-2.0, 3.0, 513, 0.0, 1.0).unwrap();
        let f = crate::oracle::gaussian_on(&g, 0.5, 0.2, 0.0);
        let z = C64::new(-1.0, 0.5);
        let u = resolvent_difference_apply(&f, z, c(0.05), 0.5, &p, &g, KreinConvention::Corrected).unwrap();
        let v = resolvent_difference_apply(&f, z.conj(), c(0.05), 0.5, &p, &g, KreinConvention::Corrected).unwrap();
        let scale = u.iter().map(|x| x.norm()).fold(0.0, f64::max);
        for (x, y) in u.iter().zip(&v) {
            assert!((x - y.conj()).norm() < 1e-9 * scale);
        }
    }

    #[test]
    fn singular_scan_is_empty_for_small_theta() {
        let p = square();
        let ks: Vec<f64> = (1..60).map(|i| 0.05 + 0.2 * i as f64).collect();
        assert!(singular_scan(&p, c(0.0), 0.5, &ks, KreinConvention::Corrected).unwrap().is_empty());
        assert!(singular_scan(&p, c(0.125), 0.5, &ks, KreinConvention::Corrected).unwrap().is_empty());
    }
}
