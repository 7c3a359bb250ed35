//! Jost solutions, Wronskians, scattering data and the unmodified
//! generalized eigenfunctions.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::ode::{JostIntegrator, State};
use crate::potential::Potential;
use crate::C64;

const I: C64 = Complex64 { re: 0.0, im: 1.0 };
/// Amplitudes are folded into a common log scale only beyond this exponent.
const LOG_FOLD: f64 = 600.0;
/// Interior renormalization threshold during integration.
const RENORM: f64 = 1e100;

pub const DEFAULT_RTOL: f64 = 1e-10;
pub const WRONSKIAN_TOL: f64 = 1e-8;

/// Position of a node relative to the barrier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    Left,
    Inside,
    Right,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Left, Region::Inside, Region::Right];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Uniform grid with `a` and `b` exactly midway between adjacent nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialGrid {
    a: f64,
    b: f64,
    step: f64,
    n: usize,
    /// Last node left of `a`.
    ia: usize,
    /// Last node left of `b`.
    ib: usize,
}

/// Nodes kept on each side of the barrier, enough for every stencil.
const MIN_EXTERIOR: usize = 4;

impl SpatialGrid {
    /// Keeps `n`, then shrinks the step so that `b - a` is an integer number
    /// of steps and shifts the nodes so that `a`, `b` fall at midpoints. The
    /// realized box is centered on `[x_min, x_max]` and shorter by at most
    /// `(n - 1) * (nominal step - step)`.
    pub fn new(x_min: f64, x_max: f64, n: usize, a: f64, b: f64) -> Result<Self> {
        if !(x_min < a && a < b && b < x_max) {
            return Err(Error::GridMisaligned(format!(
                "need x_min < a < b < x_max, got {x_min} {a} {b} {x_max}"
            )));
        }
        if n < 16 {
            return Err(invalid(format!("grid needs at least 16 nodes, got {n}")));
        }
        let nominal = (x_max - x_min) / (n - 1) as f64;
        let cells = ((b - a) / nominal).round().max(1.0) as usize;
        let step = (b - a) / cells as f64;
        // Split the realized-box discrepancy evenly between both ends.
        let slack = (x_max - x_min) - (n - 1) as f64 * step;
        let ia = ((a - x_min - 0.5 * slack) / step - 0.5).round();
        if ia < MIN_EXTERIOR as f64 {
            return Err(Error::GridMisaligned("too few nodes left of the barrier".into()));
        }
        Self::from_parts(a, b, step, ia as usize, n)
    }

    /// Same construction from a prescribed step; the node count follows.
    pub fn with_step(x_min: f64, x_max: f64, step: f64, a: f64, b: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(invalid(format!("step must be positive, got {step}")));
        }
        let cells = ((b - a) / step).round().max(1.0) as usize;
        let step = (b - a) / cells as f64;
        let ia = ((a - x_min) / step - 0.5).round().max(0.0) as usize;
        let right = ((x_max - b) / step - 0.5).round().max(0.0) as usize;
        Self::from_parts(a, b, step, ia, ia + cells + 1 + right)
    }

    /// Grid with node `i` at `a + (i - ia - 1/2) * step`.
    pub fn from_parts(a: f64, b: f64, step: f64, ia: usize, n: usize) -> Result<Self> {
        let cells = (b - a) / step;
        if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) {
            return Err(Error::GridMisaligned(format!(
                "barrier length {} is not a multiple of step {step}",
                b - a
            )));
        }
        let ib = ia + cells.round() as usize;
        if ia < MIN_EXTERIOR || ib + MIN_EXTERIOR >= n {
            return Err(Error::GridMisaligned(format!(
                "need {MIN_EXTERIOR} nodes on each side of the barrier (ia={ia}, ib={ib}, n={n})"
            )));
        }
        Ok(Self { a, b, step, n, ia, ib })
    }

    /// Same step and alignment, extended by whole steps on each side.
    pub fn widened(&self, left: f64, right: f64) -> Result<Self> {
        let add_l = (left / self.step).round().max(0.0) as usize;
        let add_r = (right / self.step).round().max(0.0) as usize;
        Self::from_parts(self.a, self.b, self.step, self.ia + add_l, self.n + add_l + add_r)
    }

    /// Step divided by an odd `factor`; coarse node `i` is fine node
    /// `factor * i`, and the interfaces stay at midpoints.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        if factor == 0 || factor.is_multiple_of(2) {
            return Err(invalid(format!("refinement factor must be odd, got {factor}")));
        }
        let f = factor;
        Self::from_parts(self.a, self.b, self.step / f as f64, f * self.ia + (f - 1) / 2, f * (self.n - 1) + 1)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn x_min(&self) -> f64 {
        self.x(0)
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.n - 1)
    }

    /// Index of the last node left of `a` (the `a⁻` node).
    pub fn ia(&self) -> usize {
        self.ia
    }

    /// Index of the last node left of `b` (the `b⁻` node).
    pub fn ib(&self) -> usize {
        self.ib
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.a + (i as f64 - self.ia as f64 - 0.5) * self.step
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.x(i))
    }

    #[inline]
    pub fn region(&self, i: usize) -> Region {
        if i <= self.ia {
            Region::Left
        } else if i <= self.ib {
            Region::Inside
        } else {
            Region::Right
        }
    }

    /// Index ranges of the three regions.
    pub fn region_ranges(&self) -> [std::ops::Range<usize>; 3] {
        [0..self.ia + 1, self.ia + 1..self.ib + 1, self.ib + 1..self.n]
    }

    pub fn mid_node(&self) -> usize {
        (self.ia + 1 + self.ib) / 2
    }

    /// Discrete L² norm with weight `step`.
    pub fn norm(&self, u: &[C64]) -> f64 {
        (u.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.step).sqrt()
    }

    /// Discrete inner product `Σ conj(u) v step`.
    pub fn inner(&self, u: &[C64], v: &[C64]) -> C64 {
        u.iter().zip(v).map(|(p, q)| p.conj() * q).sum::<C64>() * self.step
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Pure `e^{iζx/h}` right of `b`.
    Plus,
    /// Pure `e^{-iζx/h}` left of `a`.
    Minus,
}

/// Value and derivative.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OneSided {
    pub value: C64,
    pub deriv: C64,
}

impl OneSided {
    pub fn new(value: C64, deriv: C64) -> Self {
        Self { value, deriv }
    }

    pub fn scale(self, c: C64) -> Self {
        Self::new(self.value * c, self.deriv * c)
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.value + o.value, self.deriv + o.deriv)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct InterfaceTrace {
    pub left: OneSided,
    pub right: OneSided,
}

impl InterfaceTrace {
    pub fn continuous(t: OneSided) -> Self {
        Self { left: t, right: t }
    }
}

/// Samples of a function and its derivative on a grid, with exact one-sided
/// limits at both interfaces.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub values: Vec<C64>,
    pub derivs: Vec<C64>,
    pub at_a: InterfaceTrace,
    pub at_b: InterfaceTrace,
}

impl GridFunction {
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn axpy(&mut self, c: C64, other: &GridFunction) {
        for (u, v) in self.values.iter_mut().zip(&other.values) {
            *u += c * v;
        }
        for (u, v) in self.derivs.iter_mut().zip(&other.derivs) {
            *u += c * v;
        }
        for (mine, theirs) in [(&mut self.at_a, &other.at_a), (&mut self.at_b, &other.at_b)] {
            mine.left = mine.left.add(theirs.left.scale(c));
            mine.right = mine.right.add(theirs.right.scale(c));
        }
    }
}

/// Grid samples of one Jost solution. Stored values are mantissas; the
/// true function is `values * exp(log_scale)`.
#[derive(Clone, Debug)]
pub struct JostSolution {
    pub zeta: C64,
    pub h: f64,
    pub side: Side,
    pub values: Vec<C64>,
    pub derivs: Vec<C64>,
    pub at_a: OneSided,
    pub at_b: OneSided,
    pub log_scale: f64,
}

impl JostSolution {
    pub fn node(&self, i: usize) -> OneSided {
        OneSided::new(self.values[i], self.derivs[i])
    }
}

/// `(value, deriv, log)` with the true pair `(value, deriv) * exp(log)`.
type Scaled = (C64, C64, f64);

fn fold(samples: Vec<Scaled>, traces: [Scaled; 2]) -> (Vec<C64>, Vec<C64>, [OneSided; 2], f64) {
    let peak = samples
        .iter()
        .chain(traces.iter())
        .map(|(v, d, l)| l + v.norm().max(d.norm()).max(1e-300).ln())
        .fold(f64::NEG_INFINITY, f64::max);
    let shift = if peak > LOG_FOLD { peak } else { 0.0 };
    let apply = |(v, d, l): Scaled| {
        let f = (l - shift).exp();
        (v * f, d * f)
    };
    let (mut values, mut derivs) = (Vec::with_capacity(samples.len()), Vec::with_capacity(samples.len()));
    for s in samples {
        let (v, d) = apply(s);
        values.push(v);
        derivs.push(d);
    }
    let tr = traces.map(|t| {
        let (v, d) = apply(t);
        OneSided::new(v, d)
    });
    (values, derivs, tr, shift)
}

/// Free solution continued outward from an interface trace at `edge`, in
/// log-safe form.
fn free_continuation(edge: f64, trace: Scaled, zeta: C64, h: f64, x: f64) -> Scaled {
    let (u, du, l) = trace;
    let ratio = du * h / (I * zeta);
    let alpha = (u + ratio) * 0.5;
    let beta = (u - ratio) * 0.5;
    let arg = I * zeta * (x - edge) / h;
    let shift = arg.re.abs();
    let ep = (arg - shift).exp();
    let em = (-arg - shift).exp();
    let k = I * zeta / h;
    (alpha * ep + beta * em, k * (alpha * ep - beta * em), l + shift)
}

fn plane_wave(sign: f64, zeta: C64, h: f64, x: f64) -> Scaled {
    let arg = I * zeta * (sign * x / h);
    let phase = C64::new(0.0, arg.im).exp();
    (phase, I * zeta * (sign / h) * phase, arg.re)
}

fn check_zeta(h: f64, zeta: C64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!("h must be positive, got {h}")));
    }
    if zeta.im < 0.0 || zeta.norm() == 0.0 || !zeta.is_finite() {
        return Err(invalid(format!("momentum must be nonzero with Im >= 0, got {zeta}")));
    }
    Ok(())
}

/// Interior sweep with renormalization; returns per-node scaled samples in
/// path order and the trace at the path end.
fn sweep(ode: &mut JostIntegrator<'_>, path: &[f64], start: Scaled) -> (Vec<Scaled>, Scaled) {
    let (u, du, mut log) = start;
    let mut y: State = [u, du];
    let mut out = Vec::with_capacity(path.len().saturating_sub(2));
    for pair in path.windows(2) {
        y = ode.advance(pair[0], pair[1], y);
        let amp = ode.state_amplitude(&y);
        if !amp.is_finite() {
            return (out, (y[0], y[1], f64::INFINITY));
        }
        if amp > RENORM {
            y = [y[0] / amp, y[1] / amp];
            ode.rescale(1.0 / amp);
            log += amp.ln();
        }
        out.push((y[0], y[1], log));
    }
    let end = out.pop().unwrap_or((y[0], y[1], log));
    (out, end)
}

/// Integrates one Jost solution from its free side inward and samples it on
/// the grid. Exterior values come from the closed-form exponentials.
pub fn solve_jost(p: &Potential, h: f64, zeta: C64, grid: &SpatialGrid, side: Side) -> Result<JostSolution> {
    solve_jost_with(p, h, zeta, grid, side, DEFAULT_RTOL)
}

pub fn solve_jost_with(
    p: &Potential,
    h: f64,
    zeta: C64,
    grid: &SpatialGrid,
    side: Side,
    rtol: f64,
) -> Result<JostSolution> {
    check_zeta(h, zeta)?;
    let (a, b) = (p.a(), p.b());
    if (grid.a() - a).abs() > 1e-12 || (grid.b() - b).abs() > 1e-12 {
        return Err(Error::GridMisaligned("grid interfaces differ from the potential's".into()));
    }
    let mut ode = JostIntegrator::new(p, h, zeta, rtol);
    let inner: Vec<usize> = (grid.ia() + 1..=grid.ib()).collect();
    let n = grid.n();
    let mut samples: Vec<Scaled> = vec![(C64::default(), C64::default(), 0.0); n];
    let (trace_a, trace_b) = match side {
        Side::Plus => {
            let start = plane_wave(1.0, zeta, h, b);
            let path: Vec<f64> = std::iter::once(b)
                .chain(inner.iter().rev().map(|&i| grid.x(i)))
                .chain(std::iter::once(a))
                .collect();
            let (interior, end) = sweep(&mut ode, &path, start);
            if !end.2.is_finite() {
                return Err(Error::Overflow { log_scale: f64::INFINITY });
            }
            for (&i, s) in inner.iter().rev().zip(interior) {
                samples[i] = s;
            }
            for i in grid.ib() + 1..n {
                samples[i] = plane_wave(1.0, zeta, h, grid.x(i));
            }
            for i in 0..=grid.ia() {
                samples[i] = free_continuation(a, end, zeta, h, grid.x(i));
            }
            (end, start)
        }
        Side::Minus => {
            let start = plane_wave(-1.0, zeta, h, a);
            let path: Vec<f64> = std::iter::once(a)
                .chain(inner.iter().map(|&i| grid.x(i)))
                .chain(std::iter::once(b))
                .collect();
            let (interior, end) = sweep(&mut ode, &path, start);
            if !end.2.is_finite() {
                return Err(Error::Overflow { log_scale: f64::INFINITY });
            }
            for (&i, s) in inner.iter().zip(interior) {
                samples[i] = s;
            }
            for i in 0..=grid.ia() {
                samples[i] = plane_wave(-1.0, zeta, h, grid.x(i));
            }
            for i in grid.ib() + 1..n {
                samples[i] = free_continuation(b, end, zeta, h, grid.x(i));
            }
            (start, end)
        }
    };
    let (values, derivs, [at_a, at_b], log_scale) = fold(samples, [trace_a, trace_b]);
    if values.iter().chain(&derivs).any(|z| !z.is_finite()) {
        return Err(Error::Overflow { log_scale });
    }
    Ok(JostSolution { zeta, h, side, values, derivs, at_a, at_b, log_scale })
}

/// Interface traces of both Jost solutions without grid sampling.
#[derive(Clone, Copy, Debug)]
pub struct JostTraces {
    pub zeta: C64,
    pub h: f64,
    pub plus_a: OneSided,
    pub plus_b: OneSided,
    pub minus_a: OneSided,
    pub minus_b: OneSided,
    /// Wronskian of the stored mantissas (mean of the two interface values).
    pub w: C64,
    /// Relative difference of the Wronskian between `a` and `b`.
    pub drift: f64,
    /// Log scales of the two solutions; true traces are mantissas times
    /// `exp(log_*)`.
    pub log_plus: f64,
    pub log_minus: f64,
}

impl JostTraces {
    pub fn w_log(&self) -> f64 {
        self.log_plus + self.log_minus
    }

    /// True Wronskian, which may overflow for strongly evanescent regimes.
    pub fn wronskian(&self) -> C64 {
        self.w * self.w_log().exp()
    }

    /// Traces `(at a, at b)` of `ψ₀(·,k)` for real `k` with `|k| = ζ`.
    pub fn eigenfunction_traces(&self, k: f64) -> (OneSided, OneSided) {
        let q = k.abs();
        let t_hat = |other_log: f64| -2.0 * I * q / (self.h * self.w) * (-other_log).exp();
        if k > 0.0 {
            let c = t_hat(self.log_minus);
            (self.plus_a.scale(c), self.plus_b.scale(c))
        } else {
            let c = t_hat(self.log_plus);
            (self.minus_a.scale(c), self.minus_b.scale(c))
        }
    }
}

fn wr(p: OneSided, m: OneSided) -> C64 {
    p.value * m.deriv - p.deriv * m.value
}

pub fn jost_traces(p: &Potential, h: f64, zeta: C64) -> Result<JostTraces> {
    check_zeta(h, zeta)?;
    let (a, b) = (p.a(), p.b());
    let mut ode = JostIntegrator::new(p, h, zeta, DEFAULT_RTOL);
    let start_p = plane_wave(1.0, zeta, h, b);
    let (_, end_p) = sweep(&mut ode, &[b, p.midpoint(), a], start_p);
    let mut ode = JostIntegrator::new(p, h, zeta, DEFAULT_RTOL);
    let start_m = plane_wave(-1.0, zeta, h, a);
    let (_, end_m) = sweep(&mut ode, &[a, p.midpoint(), b], start_m);
    if !(end_p.2.is_finite() && end_m.2.is_finite()) {
        return Err(Error::Overflow { log_scale: f64::INFINITY });
    }
    let (_, _, [plus_a, plus_b], lp) = fold(Vec::new(), [end_p, start_p]);
    let (_, _, [minus_a, minus_b], lm) = fold(Vec::new(), [start_m, end_m]);
    let wa = wr(plus_a, minus_a);
    let wb = wr(plus_b, minus_b);
    let w = 0.5 * (wa + wb);
    Ok(JostTraces {
        zeta,
        h,
        plus_a,
        plus_b,
        minus_a,
        minus_b,
        w,
        drift: (wa - wb).norm() / w.norm(),
        log_plus: lp,
        log_minus: lm,
    })
}

/// Both Jost solutions at one momentum on one grid.
#[derive(Clone, Debug)]
pub struct JostPair {
    pub plus: JostSolution,
    pub minus: JostSolution,
    /// Wronskian of the mantissas at the mid-barrier node.
    pub w: C64,
    /// Max relative deviation of the node Wronskian from `w` over `[a, b]`.
    pub drift: f64,
}

impl JostPair {
    pub fn solve(p: &Potential, h: f64, zeta: C64, grid: &SpatialGrid) -> Result<Self> {
        let plus = solve_jost(p, h, zeta, grid, Side::Plus)?;
        let minus = solve_jost(p, h, zeta, grid, Side::Minus)?;
        let (w, drift) = node_wronskian(&plus, &minus, grid);
        if !(drift <= WRONSKIAN_TOL) {
            return Err(Error::WronskianDrift { drift, tol: WRONSKIAN_TOL });
        }
        Ok(Self { plus, minus, w, drift })
    }

    pub fn zeta(&self) -> C64 {
        self.plus.zeta
    }

    pub fn h(&self) -> f64 {
        self.plus.h
    }

    /// True Wronskian, which may overflow for strongly evanescent regimes.
    pub fn wronskian(&self) -> C64 {
        self.w * (self.plus.log_scale + self.minus.log_scale).exp()
    }

    pub fn traces(&self) -> JostTraces {
        JostTraces {
            zeta: self.zeta(),
            h: self.h(),
            plus_a: self.plus.at_a,
            plus_b: self.plus.at_b,
            minus_a: self.minus.at_a,
            minus_b: self.minus.at_b,
            w: self.w,
            drift: self.drift,
            log_plus: self.plus.log_scale,
            log_minus: self.minus.log_scale,
        }
    }
}

fn node_wronskian(plus: &JostSolution, minus: &JostSolution, grid: &SpatialGrid) -> (C64, f64) {
    let w = wr(plus.node(grid.mid_node()), minus.node(grid.mid_node()));
    let drift = (grid.ia() + 1..=grid.ib())
        .map(|i| wr(plus.node(i), minus.node(i)))
        .chain([wr(plus.at_a, minus.at_a), wr(plus.at_b, minus.at_b)])
        .map(|wi| (wi - w).norm() / w.norm())
        .fold(0.0, f64::max);
    (w, drift)
}

/// Wronskian of two solutions at the mid-barrier node, with the constancy
/// check across `[a, b]`.
pub fn wronskian(plus: &JostSolution, minus: &JostSolution, grid: &SpatialGrid) -> Result<C64> {
    if plus.zeta != minus.zeta || plus.h != minus.h {
        return Err(invalid("wronskian needs solutions at the same momentum and h"));
    }
    let (w, drift) = node_wronskian(plus, minus, grid);
    if !(drift <= WRONSKIAN_TOL) {
        return Err(Error::WronskianDrift { drift, tol: WRONSKIAN_TOL });
    }
    Ok(w * (plus.log_scale + minus.log_scale).exp())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScatteringCoefficients {
    pub k: f64,
    pub transmission: C64,
    pub reflection: C64,
    pub wronskian: C64,
    pub conjugate_wronskian: C64,
}

impl ScatteringCoefficients {
    pub fn unitarity_defect(&self) -> f64 {
        (self.transmission.norm_sqr() + self.reflection.norm_sqr() - 1.0).abs()
    }

    /// Relative defect of `|w|² = c k²/h² + |w₀|²` for a given factor `c`.
    pub fn identity_defect(&self, h: f64, factor: f64) -> f64 {
        let lhs = self.wronskian.norm_sqr();
        let rhs = factor * self.k * self.k / (h * h) + self.conjugate_wronskian.norm_sqr();
        (lhs - rhs).abs() / lhs
    }

    /// Defect of the identity with the literal unit factor on `k²/h²`.
    pub fn literal_identity_defect(&self, h: f64) -> f64 {
        self.identity_defect(h, 1.0)
    }
}

/// Scattering data at real `k != 0` from the interface traces at `|k|`.
/// `T` is the same for `±|k|`; `R` is read on the incoming side.
pub fn scattering_from_traces(k: f64, a: f64, b: f64, t: &JostTraces) -> ScatteringCoefficients {
    let h = t.h;
    let q = k.abs();
    let conj = |s: OneSided| OneSided::new(s.value.conj(), s.deriv.conj());
    let ratio = |s: OneSided| s.deriv * h / (I * q);
    let w_pos = t.wronskian();
    let transmission = -2.0 * I * q / (h * w_pos);
    // T times a mantissa of one solution, with the other solution's log.
    let t_hat = |other_log: f64| -2.0 * I * q / (h * t.w) * (-other_log).exp();
    if k > 0.0 {
        let s = t.plus_a;
        let beta = (s.value - ratio(s)) * 0.5 * (I * q * a / h).exp();
        ScatteringCoefficients {
            k,
            transmission,
            reflection: t_hat(t.log_minus) * beta,
            wronskian: w_pos,
            conjugate_wronskian: wr(conj(t.plus_a), t.minus_a) * t.w_log().exp(),
        }
    } else {
        let s = t.minus_b;
        let alpha = (s.value + ratio(s)) * 0.5 * (-I * q * b / h).exp();
        ScatteringCoefficients {
            k,
            transmission,
            reflection: t_hat(t.log_plus) * alpha,
            wronskian: w_pos.conj(),
            conjugate_wronskian: wr(t.plus_a, conj(t.minus_a)) * t.w_log().exp(),
        }
    }
}

pub fn scattering_coefficients(p: &Potential, h: f64, k: f64, grid: &SpatialGrid) -> Result<ScatteringCoefficients> {
    if k == 0.0 || !k.is_finite() {
        return Err(invalid("k = 0 is a branch-cut endpoint and is excluded"));
    }
    let pair = JostPair::solve(p, h, C64::new(k.abs(), 0.0), grid)?;
    Ok(scattering_from_traces(k, p.a(), p.b(), &pair.traces()))
}

/// `ψ₀(·,k)`: `T χ₊(·,k)` for `k > 0`, `T(|k|) χ₋(·,|k|)` for `k < 0`, from a
/// pair solved at `|k|`.
pub fn eigenfunction_from_pair(pair: &JostPair, k: f64) -> GridFunction {
    let q = k.abs();
    let h = pair.h();
    let (sol, other_log) = if k > 0.0 {
        (&pair.plus, pair.minus.log_scale)
    } else {
        (&pair.minus, pair.plus.log_scale)
    };
    let c = -2.0 * I * q / (h * pair.w) * (-other_log).exp();
    let scale = |s: OneSided| s.scale(c);
    GridFunction {
        values: sol.values.iter().map(|v| v * c).collect(),
        derivs: sol.derivs.iter().map(|v| v * c).collect(),
        at_a: InterfaceTrace::continuous(scale(sol.at_a)),
        at_b: InterfaceTrace::continuous(scale(sol.at_b)),
    }
}

pub fn unmodified_eigenfunction(p: &Potential, h: f64, k: f64, grid: &SpatialGrid) -> Result<GridFunction> {
    if k == 0.0 || !k.is_finite() {
        return Err(invalid("k = 0 is a branch-cut endpoint and is excluded"));
    }
    let pair = JostPair::solve(p, h, C64::new(k.abs(), 0.0), grid)?;
    Ok(eigenfunction_from_pair(&pair, k))
}

/// Solves the unit-`h` problem for `y -> V(h y + (a+b)/2)` on the mapped grid
/// and returns the sup deviation of `χ̃(y)` from `χ(hy + m) e^{-iζm/h}`,
/// relative to the sup of `χ`, together with the phase at `y = 0`.
pub fn rescaling_check(p: &Potential, h: f64, zeta: C64, grid: &SpatialGrid, side: Side) -> Result<(f64, C64)> {
    let m = p.midpoint();
    let original = solve_jost(p, h, zeta, grid, side)?;
    let scaled_p = p.rescaled(h, m)?;
    let scaled_grid = SpatialGrid::from_parts(scaled_p.a(), scaled_p.b(), grid.step() / h, grid.ia(), grid.n())?;
    let scaled = solve_jost(&scaled_p, 1.0, zeta, &scaled_grid, side)?;
    let sign = match side {
        Side::Plus => -1.0,
        Side::Minus => 1.0,
    };
    let phase = (I * zeta * (sign * m / h)).exp();
    let rel = (scaled.log_scale - original.log_scale).exp();
    let sup = original.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let dev = scaled
        .values
        .iter()
        .zip(&original.values)
        .map(|(s, o)| (s * rel - o * phase).norm())
        .fold(0.0, f64::max);
    Ok((dev / sup, phase))
}
