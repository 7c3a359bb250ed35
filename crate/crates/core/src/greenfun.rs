//! Green's functions of `-h²∂² + V - ζ²` built from Jost solutions, their
//! interface traces, the interior energy estimate and trace-growth sweeps.
//!
//! `G(x,y) = χ₊(max)χ₋(min) / (h²w)` and `H(x,y) = ∂_y G(x,y)`. Both are
//! assembled from stored mantissas; the log scales of `χ₊`, `χ₋` and `w`
//! cancel in every product.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fit::{fit_exponent, PowerFit};
use crate::jost::{jost_traces, GridFunction, InterfaceTrace, JostPair, JostTraces, OneSided, SpatialGrid};
use crate::linalg::BandMatrix;
use crate::potential::Potential;
use crate::C64;

const I: C64 = Complex64 { re: 0.0, im: 1.0 };

/// Slope margin granted to every fitted growth exponent.
pub const SLOPE_MARGIN: f64 = 0.3;

/// A point where Green's functions are evaluated: either `z` off the cut,
/// or the boundary value on the cut at real momentum `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum SpectralPoint {
    /// Boundary value from `Im z > 0` at `z = k²`; only `|k|` matters.
    Limit(f64),
    Energy(C64),
}

impl SpectralPoint {
    /// Momentum `ζ` with `ζ² = z` and `Im ζ >= 0`.
    pub fn zeta(&self) -> Result<C64> {
        match *self {
            SpectralPoint::Limit(k) if k != 0.0 && k.is_finite() => Ok(C64::new(k.abs(), 0.0)),
            SpectralPoint::Limit(k) => Err(invalid(format!("limit label must be a nonzero real, got {k}"))),
            SpectralPoint::Energy(z) => {
                if z.im == 0.0 && z.re >= 0.0 {
                    return Err(invalid(format!("z = {z} lies on the cut")));
                }
                Ok(I * (-z).sqrt())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Endpoint {
    A,
    B,
}

impl Endpoint {
    pub fn position(self, p: &Potential) -> f64 {
        match self {
            Endpoint::A => p.a(),
            Endpoint::B => p.b(),
        }
    }
}

/// Which kernel: `G` itself or `H = ∂_y G`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum KernelKind {
    Value,
    Slope,
}

/// `x -> K(x,y)` written as `left * χ₋(x)` for `x < y` and `right * χ₊(x)` for
/// `x > y`, with coefficients acting on the stored mantissas.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreenKernel {
    pub endpoint: Endpoint,
    pub kind: KernelKind,
    pub left: C64,
    pub right: C64,
}

fn traces_at(t: &JostTraces, e: Endpoint) -> (OneSided, OneSided) {
    match e {
        Endpoint::A => (t.plus_a, t.minus_a),
        Endpoint::B => (t.plus_b, t.minus_b),
    }
}

impl GreenKernel {
    pub fn new(t: &JostTraces, endpoint: Endpoint, kind: KernelKind) -> Self {
        let hw2 = t.h * t.h * t.w;
        let (plus, minus) = traces_at(t, endpoint);
        let (left, right) = match kind {
            KernelKind::Value => (plus.value / hw2, minus.value / hw2),
            KernelKind::Slope => (plus.deriv / hw2, minus.deriv / hw2),
        };
        Self { endpoint, kind, left, right }
    }

    /// One-sided limits of `(K, ∂ₓK)` at `x ∈ {a, b}`; they differ only when
    /// `x` coincides with the kernel's endpoint.
    pub fn trace(&self, t: &JostTraces, x: Endpoint) -> InterfaceTrace {
        let (plus, minus) = traces_at(t, x);
        let below = minus.scale(self.left);
        let above = plus.scale(self.right);
        match (x, self.endpoint) {
            (Endpoint::A, Endpoint::B) => InterfaceTrace::continuous(below),
            (Endpoint::B, Endpoint::A) => InterfaceTrace::continuous(above),
            _ => InterfaceTrace { left: below, right: above },
        }
    }

    pub fn sample(&self, pair: &JostPair, grid: &SpatialGrid) -> GridFunction {
        let cut = match self.endpoint {
            Endpoint::A => grid.ia(),
            Endpoint::B => grid.ib(),
        };
        let (values, derivs) = (0..grid.n())
            .map(|i| {
                let s = if i <= cut {
                    pair.minus.node(i).scale(self.left)
                } else {
                    pair.plus.node(i).scale(self.right)
                };
                (s.value, s.deriv)
            })
            .unzip();
        let t = pair.traces();
        GridFunction {
            values,
            derivs,
            at_a: self.trace(&t, Endpoint::A),
            at_b: self.trace(&t, Endpoint::B),
        }
    }
}

/// Rejects spectral points where `|w|` is numerically zero relative to the
/// free scale `|ζ|/h`.
pub fn check_wronskian(t: &JostTraces) -> Result<()> {
    let log_ratio = t.w.norm().ln() + t.w_log() - (t.zeta.norm() / t.h).ln();
    if !log_ratio.is_finite() || log_ratio < (1e-12f64).ln() {
        return Err(Error::SingularSystem(format!("wronskian vanishes at ζ = {}", t.zeta)));
    }
    Ok(())
}

fn kernel_on_grid(
    p: &Potential,
    h: f64,
    zeta: C64,
    y: Endpoint,
    kind: KernelKind,
    grid: &SpatialGrid,
) -> Result<GridFunction> {
    let pair = JostPair::solve(p, h, zeta, grid)?;
    let t = pair.traces();
    check_wronskian(&t)?;
    Ok(GreenKernel::new(&t, y, kind).sample(&pair, grid))
}

/// `G(·, y)` on the grid with exact one-sided interface traces.
pub fn green_g(p: &Potential, h: f64, zeta: C64, y: Endpoint, grid: &SpatialGrid) -> Result<GridFunction> {
    kernel_on_grid(p, h, zeta, y, KernelKind::Value, grid)
}

/// `H(·, y) = ∂_y G(·, y)` on the grid with exact one-sided interface traces.
pub fn green_h(p: &Potential, h: f64, zeta: C64, y: Endpoint, grid: &SpatialGrid) -> Result<GridFunction> {
    kernel_on_grid(p, h, zeta, y, KernelKind::Slope, grid)
}

/// Measured jumps `K(y⁺) - K(y⁻)` and `∂K(y⁺) - ∂K(y⁻)` against the values
/// prescribed for the kernel kind.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct JumpReport {
    pub endpoint: Endpoint,
    pub kind: KernelKind,
    pub value_jump: C64,
    pub deriv_jump: C64,
    pub expected_value_jump: f64,
    pub expected_deriv_jump: f64,
    /// Deviation from the prescribed jumps in units of `1/h²`.
    pub relative_residual: f64,
}

pub fn expected_jumps(kind: KernelKind, h: f64) -> (f64, f64) {
    let s = 1.0 / (h * h);
    match kind {
        KernelKind::Value => (0.0, -s),
        KernelKind::Slope => (s, 0.0),
    }
}

pub fn jump_report(kernel: &GridFunction, y: Endpoint, kind: KernelKind, h: f64) -> JumpReport {
    let tr = match y {
        Endpoint::A => kernel.at_a,
        Endpoint::B => kernel.at_b,
    };
    let value_jump = tr.right.value - tr.left.value;
    let deriv_jump = tr.right.deriv - tr.left.deriv;
    let (ev, ed) = expected_jumps(kind, h);
    let relative_residual = ((value_jump - ev).norm()).max((deriv_jump - ed).norm()) * h * h;
    JumpReport {
        endpoint: y,
        kind,
        value_jump,
        deriv_jump,
        expected_value_jump: ev,
        expected_deriv_jump: ed,
        relative_residual,
    }
}

/// The same jumps read from the two grid nodes adjacent to `y`, each
/// extrapolated half a step by a third-order Taylor expansion that uses the
/// equation for `u''` and `u'''`. Only meaningful where `V' = 0` near `y`.
pub fn node_jump_report(
    kernel: &GridFunction,
    p: &Potential,
    zeta: C64,
    h: f64,
    y: Endpoint,
    kind: KernelKind,
    grid: &SpatialGrid,
) -> JumpReport {
    let i_left = match y {
        Endpoint::A => grid.ia(),
        Endpoint::B => grid.ib(),
    };
    let d = 0.5 * grid.step();
    let z2 = zeta * zeta;
    let extrap = |i: usize, dx: f64| {
        let (u, du) = (kernel.values[i], kernel.derivs[i]);
        let c = (p.eval(grid.x(i)) - z2) / (h * h);
        let value = u + du * dx + c * u * (dx * dx / 2.0) + c * du * (dx * dx * dx / 6.0);
        let deriv = du + c * u * dx + c * du * (dx * dx / 2.0) + c * c * u * (dx * dx * dx / 6.0);
        (value, deriv)
    };
    let (lv, ld) = extrap(i_left, d);
    let (rv, rd) = extrap(i_left + 1, -d);
    let (ev, ed) = expected_jumps(kind, h);
    let (value_jump, deriv_jump) = (rv - lv, rd - ld);
    JumpReport {
        endpoint: y,
        kind,
        value_jump,
        deriv_jump,
        expected_value_jump: ev,
        expected_deriv_jump: ed,
        relative_residual: ((value_jump - ev).norm()).max((deriv_jump - ed).norm()) * h * h,
    }
}

/// Max relative deviation of the assembled free `G(·, y)` from the closed form
/// `i e^{iζ|x-y|/h} / (2ζh)`; at `ζ = i` this is `e^{-|x-y|/h} / (2h)`.
pub fn free_resolvent_check(h: f64, zeta: C64, y: Endpoint, grid: &SpatialGrid) -> Result<f64> {
    let free = Potential::zero(grid.a(), grid.b())?;
    let g = green_g(&free, h, zeta, y, grid)?;
    let yp = y.position(&free);
    let exact = |x: f64| I * (I * zeta * (x - yp).abs() / h).exp() / (2.0 * zeta * h);
    let peak = exact(yp).norm();
    Ok(grid
        .nodes()
        .zip(&g.values)
        .map(|(x, v)| (v - exact(x)).norm() / peak)
        .fold(0.0, f64::max))
}

/// Compares the assembled `H(x, a)` for `x ∈ (a, b)` with the closed form
/// `-ik χ₊(x,k) e^{-ika/h} / (h³w)` at real `k > 0`; returns the max deviation
/// relative to the sup of the assembly over the barrier.
pub fn interior_trace_identity_check(p: &Potential, h: f64, k: f64, grid: &SpatialGrid) -> Result<f64> {
    let q = k.abs();
    let pair = JostPair::solve(p, h, C64::new(q, 0.0), grid)?;
    let hk = GreenKernel::new(&pair.traces(), Endpoint::A, KernelKind::Slope).sample(&pair, grid);
    // Mantissa form of the closed expression; `χ₋(a)` never enters it.
    let c = -I * q * (-I * q * p.a() / h).exp() * (-pair.minus.log_scale).exp() / (h * h * h * pair.w);
    let inside = grid.ia() + 1..=grid.ib();
    let sup = inside.clone().map(|i| hk.values[i].norm()).fold(0.0, f64::max);
    Ok(inside
        .map(|i| (hk.values[i] - c * pair.plus.values[i]).norm())
        .fold(0.0, f64::max)
        / sup)
}

/// Interface traces of `G`, `H` and `∂ₓH` at all pairs `x, y ∈ {a, b}`.
/// Entry names read `<kernel>_<x><y>`; `_minus`/`_plus` mark one-sided
/// limits in `x` on the diagonal.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GreenTraces {
    pub point: SpectralPoint,
    pub zeta: C64,
    pub h: f64,
    pub a: f64,
    pub b: f64,
    pub g_bb: C64,
    pub g_ba: C64,
    pub g_ab: C64,
    pub g_aa: C64,
    pub h_bb_minus: C64,
    pub h_bb_plus: C64,
    pub h_ba: C64,
    pub h_ab: C64,
    pub h_aa_minus: C64,
    pub h_aa_plus: C64,
    pub dh_bb: C64,
    pub dh_ba: C64,
    pub dh_ab: C64,
    pub dh_aa: C64,
    /// `log |w|`, kept to form closed expressions.
    pub log_abs_wronskian: f64,
}

impl GreenTraces {
    pub fn from_jost(t: &JostTraces, point: SpectralPoint, a: f64, b: f64) -> Self {
        let g = |e| GreenKernel::new(t, e, KernelKind::Value);
        let hk = |e| GreenKernel::new(t, e, KernelKind::Slope);
        let (ga, gb, ha, hb) = (g(Endpoint::A), g(Endpoint::B), hk(Endpoint::A), hk(Endpoint::B));
        let (ta_g, tb_g) = (ga.trace(t, Endpoint::B), gb.trace(t, Endpoint::A));
        let (hbb, haa) = (hb.trace(t, Endpoint::B), ha.trace(t, Endpoint::A));
        let (hba, hab) = (ha.trace(t, Endpoint::B), hb.trace(t, Endpoint::A));
        Self {
            point,
            zeta: t.zeta,
            h: t.h,
            a,
            b,
            g_bb: gb.trace(t, Endpoint::B).left.value,
            g_ba: ta_g.left.value,
            g_ab: tb_g.left.value,
            g_aa: ga.trace(t, Endpoint::A).left.value,
            h_bb_minus: hbb.left.value,
            h_bb_plus: hbb.right.value,
            h_ba: hba.left.value,
            h_ab: hab.left.value,
            h_aa_minus: haa.left.value,
            h_aa_plus: haa.right.value,
            dh_bb: hbb.left.deriv,
            dh_ba: hba.left.deriv,
            dh_ab: hab.left.deriv,
            dh_aa: haa.left.deriv,
            log_abs_wronskian: t.w.norm().ln() + t.w_log(),
        }
    }

    /// `H(b⁻,b) + 1/(2h²)`, the mean of the two one-sided limits at `b`.
    pub fn h_bb_mean(&self) -> C64 {
        self.h_bb_minus + 0.5 / (self.h * self.h)
    }

    /// `H(a⁺,a) - 1/(2h²)`, the mean of the two one-sided limits at `a`.
    pub fn h_aa_mean(&self) -> C64 {
        self.h_aa_plus - 0.5 / (self.h * self.h)
    }

    pub fn entries(&self) -> [C64; 14] {
        [
            self.g_bb,
            self.g_ba,
            self.g_ab,
            self.g_aa,
            self.h_bb_minus,
            self.h_bb_plus,
            self.h_ba,
            self.h_ab,
            self.h_aa_minus,
            self.h_aa_plus,
            self.dh_bb,
            self.dh_ba,
            self.dh_ab,
            self.dh_aa,
        ]
    }

    /// Closed form `G(b,a) = e^{iζ(b-a)/h} / (h²w)`; needs no integration.
    pub fn g_ba_closed_form(&self, w_phase: C64) -> C64 {
        (I * self.zeta * (self.b - self.a) / self.h - self.log_abs_wronskian).exp() / (self.h * self.h * w_phase)
    }

    /// `|G(a,b) - G(b,a)|` relative to `|G(b,a)|`, with `G(b,a)` from the
    /// closed form and `G(a,b)` from the assembled `G(·,b)`.
    pub fn symmetry_defect(&self, w_phase: C64) -> f64 {
        let closed = self.g_ba_closed_form(w_phase);
        (self.g_ab - closed).norm() / closed.norm()
    }
}

/// Unit-modulus phase of the true Wronskian.
pub fn wronskian_phase(t: &JostTraces) -> C64 {
    t.w / t.w.norm()
}

pub fn boundary_traces(p: &Potential, h: f64, point: SpectralPoint) -> Result<GreenTraces> {
    let zeta = point.zeta()?;
    let t = jost_traces(p, h, zeta)?;
    check_wronskian(&t)?;
    Ok(GreenTraces::from_jost(&t, point, p.a(), p.b()))
}

/// Distance of the traces at `z = k² + iε` from the limit traces at `|k|`,
/// per `ε`, as the max entry deviation relative to the largest limit entry.
pub fn limit_coherence(p: &Potential, h: f64, k: f64, eps: &[f64]) -> Result<Vec<(f64, f64)>> {
    let limit = boundary_traces(p, h, SpectralPoint::Limit(k))?.entries();
    let scale = limit.iter().map(|z| z.norm()).fold(0.0, f64::max);
    eps.iter()
        .map(|&e| {
            let near = boundary_traces(p, h, SpectralPoint::Energy(C64::new(k * k, e)))?.entries();
            let d = near.iter().zip(&limit).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
            Ok((e, d / scale))
        })
        .collect()
}

/// Solution of the interior two-point problem with Robin data
/// `(h∂ + iζ)u(a) = γ_a`, `(h∂ - iζ)u(b) = γ_b`.
#[derive(Clone, Debug, Serialize)]
pub struct EnergyEstimate {
    pub nodes: Vec<f64>,
    pub solution: Vec<C64>,
    /// `h^{1/2} sup|u| + ‖hu'‖ + ‖u‖` over `[a, b]`.
    pub lhs: f64,
    /// `(|γ_a| + |γ_b|) / h^{1/2}`.
    pub rhs_scale: f64,
    /// `min V - Re ζ²` over `[a, b]`.
    pub margin: f64,
}

impl EnergyEstimate {
    pub fn ratio(&self) -> f64 {
        if self.rhs_scale == 0.0 {
            0.0
        } else {
            self.lhs / self.rhs_scale
        }
    }
}

/// Second-order finite differences on `[a, b]` at the spacing of `grid`,
/// nodes at `a + iΔ`, with the Robin data imposed through ghost nodes.
pub fn energy_estimate_solve(
    p: &Potential,
    h: f64,
    zeta: C64,
    gamma_a: C64,
    gamma_b: C64,
    grid: &SpatialGrid,
) -> Result<EnergyEstimate> {
    if zeta.im < 0.0 {
        return Err(invalid("energy estimate needs Im ζ >= 0"));
    }
    let (a, b) = (p.a(), p.b());
    let cells = ((b - a) / grid.step()).round() as usize;
    let dx = (b - a) / cells as f64;
    let nodes: Vec<f64> = (0..=cells).map(|i| if i == cells { b } else { a + i as f64 * dx }).collect();
    let z2 = zeta * zeta;
    let margin = nodes.iter().map(|&x| p.eval(x)).fold(f64::INFINITY, f64::min) - z2.re;
    if !(margin > 0.0) {
        return Err(invalid(format!("V - Re ζ² must stay positive on [a, b], min is {margin}")));
    }
    let n = cells + 1;
    let s = h * h / (dx * dx);
    let robin = 2.0 * dx / h;
    let mut m = BandMatrix::zeros(n, 1, 1);
    for (i, &x) in nodes.iter().enumerate() {
        m.set(i, i, C64::new(2.0 * s + p.eval(x), 0.0) - z2);
        if i > 0 {
            m.set(i, i - 1, C64::new(-s, 0.0));
        }
        if i + 1 < n {
            m.set(i, i + 1, C64::new(-s, 0.0));
        }
    }
    // Ghosts: u₋₁ = u₁ - (2Δ/h)(γ_a - iζu₀) and u_{N+1} = u_{N-1} + (2Δ/h)(γ_b + iζu_N).
    m.add(0, 1, C64::new(-s, 0.0));
    m.add(0, 0, -s * robin * I * zeta);
    m.add(n - 1, n - 2, C64::new(-s, 0.0));
    m.add(n - 1, n - 1, -s * robin * I * zeta);
    let mut rhs = vec![C64::new(0.0, 0.0); n];
    rhs[0] = -s * robin * gamma_a;
    rhs[n - 1] = s * robin * gamma_b;
    let solution = m.factor()?.solve(&rhs);

    let sup = solution.iter().map(|u| u.norm()).fold(0.0, f64::max);
    let l2 = {
        let inner: f64 = solution.iter().map(|u| u.norm_sqr()).sum();
        let ends = 0.5 * (solution[0].norm_sqr() + solution[n - 1].norm_sqr());
        ((inner - ends) * dx).sqrt()
    };
    let grad = (solution.windows(2).map(|w| (w[1] - w[0]).norm_sqr()).sum::<f64>() / dx).sqrt() * h;
    Ok(EnergyEstimate {
        nodes,
        solution,
        lhs: h.sqrt() * sup + grad + l2,
        rhs_scale: (gamma_a.norm() + gamma_b.norm()) / h.sqrt(),
        margin,
    })
}

/// One trace family of the growth sweep, sup over `k` per `h`.
#[derive(Clone, Debug, Serialize)]
pub struct TraceFamily {
    pub name: &'static str,
    /// Lower bound on the fitted slope before the margin.
    pub bound_exponent: f64,
    /// Whether acceptance relies on this family.
    pub asserted: bool,
    pub sups: Vec<(f64, f64)>,
    pub fit: PowerFit,
    pub pass: bool,
}

/// Family names, bound exponents and assertion flags, in report order.
pub const TRACE_FAMILIES: [(&str, f64, bool); 6] = [
    ("psi0_bounded", 0.0, true),
    ("psi0_weighted", 0.0, false),
    ("green_weighted", -2.0, true),
    ("h_interior", -2.0, true),
    ("dh_scaled", -2.0, true),
    ("green_total", -2.0, true),
];

/// Per-`(h, k)` values for every family, before the sup over `k`.
fn family_values(p: &Potential, h: f64, k: f64) -> Result<[f64; 6]> {
    let q = k.abs();
    let t = jost_traces(p, h, C64::new(q, 0.0))?;
    check_wronskian(&t)?;
    let gt = GreenTraces::from_jost(&t, SpectralPoint::Limit(q), p.a(), p.b());
    let mut psi_bounded = 0.0f64;
    let mut psi_weighted = 0.0f64;
    for kk in [q, -q] {
        let (ta, tb) = t.eigenfunction_traces(kk);
        for s in [ta, tb] {
            psi_bounded = psi_bounded.max(s.value.norm() + h / q * s.deriv.norm());
            psi_weighted = psi_weighted.max(((1.0 + q) * s.value.norm() + h * s.deriv.norm()) / q);
        }
    }
    let sup = |z: &[C64]| z.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let g = (1.0 + q) * sup(&[gt.g_bb, gt.g_ba, gt.g_ab, gt.g_aa]);
    // Interior one-sided limits on the diagonal.
    let hi = sup(&[gt.h_bb_minus, gt.h_aa_plus, gt.h_ab, gt.h_ba]);
    let dh = h / q * sup(&[gt.dh_bb, gt.dh_ba, gt.dh_ab, gt.dh_aa]);
    Ok([psi_bounded, psi_weighted, g, hi, dh, g + hi + dh])
}

/// Sup over `k_list` of each trace family for every `h`, with a log-log fit.
/// Needs at least 4 values of `h`.
pub fn trace_exponent_sweep(p: &Potential, h_list: &[f64], k_list: &[f64]) -> Result<Vec<TraceFamily>> {
    if h_list.len() < 4 {
        return Err(Error::InsufficientPoints(h_list.len()));
    }
    if k_list.is_empty() || k_list.iter().any(|&k| k == 0.0 || !k.is_finite()) {
        return Err(invalid("k_list must be nonempty with nonzero finite entries"));
    }
    let per_h: Vec<[f64; 6]> = h_list
        .iter()
        .map(|&h| {
            let vals: Vec<[f64; 6]> = k_list.par_iter().map(|&k| family_values(p, h, k)).collect::<Result<_>>()?;
            Ok(vals.iter().fold([0.0f64; 6], |mut acc, v| {
                for (a, b) in acc.iter_mut().zip(v) {
                    *a = a.max(*b);
                }
                acc
            }))
        })
        .collect::<Result<_>>()?;
    TRACE_FAMILIES
        .iter()
        .enumerate()
        .map(|(f, &(name, bound, asserted))| {
            let sups: Vec<(f64, f64)> = h_list.iter().zip(&per_h).map(|(&h, v)| (h, v[f])).collect();
            let fit = fit_exponent(&sups)?;
            let pass = fit.slope >= bound - SLOPE_MARGIN;
            Ok(TraceFamily { name, bound_exponent: bound, asserted, sups, fit, pass })
        })
        .collect()
}
