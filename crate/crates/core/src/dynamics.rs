//! Propagators: spectral calculus for frozen potentials, conjugation by the
//! wave operator for `θ ≠ 0`, and frozen-cell composition for time-dependent
//! barriers.
//!
//! Free propagation is used in completed form `φ + F*(e^{−itk²} − 1)Fφ`, so
//! content the quadrature misses is carried unchanged instead of lost; this
//! keeps repeated re-analysis in the stepwise scheme from compounding the
//! completeness residual. The conjugated propagator never re-analyses a
//! propagated state:
//! `W̃ Ũ₀ W̃⁻¹φ = u + F₀*((e − 1) c) + (F_θ − F₀)*(e c)` with
//! `u = W̃⁻¹φ`, `c = F₀u`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::fit::{fit_exponent, PowerFit};
use crate::jost::SpatialGrid;
use crate::krein::KreinConvention;
use crate::oracle::DiscreteHamiltonian;
use crate::potential::TimePotential;
use crate::spectral::{inverse_transform, ModeTable, Packet, SpectralCoeffs, SpectralGrid};
use crate::waveop::WaveOperator;
use crate::C64;

/// Schedule amplitudes closer than this share a cached frozen operator.
pub const AMP_QUANTUM: f64 = 1e-12;
pub const CACHE_CAPACITY: usize = 8;
/// Growth bound `‖U φ‖ ≤ exp(C sup_t ‖V(t)‖_∞) ‖φ‖`, calibrated once.
pub const GROWTH_CONSTANT: f64 = 1.0;
/// Allowed `e_n / envelope` in the convergence study.
pub const ENVELOPE_CONSTANT: f64 = 10.0;
pub const RATE_FLOOR: f64 = 0.8;
pub const SLOPE_MARGIN: f64 = 0.3;
pub const HORIZON_RATIO_LIMIT: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SpectralStatic,
    ConjugatedStatic,
    Stepwise,
    Oracle,
}

#[derive(Clone, Debug, Serialize)]
pub struct PropagatorRun {
    pub h: f64,
    pub theta: [f64; 2],
    pub method: Method,
    pub n_steps: Option<usize>,
    pub times: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<Vec<C64>>,
    pub norms: Vec<f64>,
}

impl PropagatorRun {
    fn new(
        h: f64,
        theta: C64,
        method: Method,
        n_steps: Option<usize>,
        grid: &SpatialGrid,
        times: Vec<f64>,
        states: Vec<Vec<C64>>,
    ) -> Self {
        let norms = states.iter().map(|u| grid.norm(u)).collect();
        Self { h, theta: [theta.re, theta.im], method, n_steps, times, states, norms }
    }

    /// `max_t |‖u(t)‖ − ‖u(0)‖|`.
    pub fn norm_drift(&self) -> f64 {
        let n0 = self.norms.first().copied().unwrap_or(0.0);
        self.norms.iter().map(|n| (n - n0).abs()).fold(0.0, f64::max)
    }
}

fn phase(t: f64) -> impl Fn(f64) -> C64 {
    move |k| C64::from_polar(1.0, -t * k * k)
}

/// `F* e^{−itk²} F φ`.
pub fn static_propagate_unmodified(table: &ModeTable, phi: &[C64], t: f64) -> Result<Vec<C64>> {
    let free = table.unmodified();
    let c = crate::spectral::forward_transform(table, &free, phi)?;
    inverse_transform(table, &free, &c.multiply(phase(t)))
}

/// `φ + F*(e^{−itk²} − 1) F φ`.
pub fn completed_free_propagate(table: &ModeTable, phi: &[C64], t: f64) -> Result<Vec<C64>> {
    let free = table.unmodified();
    let c = crate::spectral::forward_transform(table, &free, phi)?;
    let d = inverse_transform(table, &free, &c.multiply(|k| phase(t)(k) - 1.0))?;
    Ok(phi.iter().zip(d).map(|(u, v)| u + v).collect())
}

/// Precomputed `u = W̃⁻¹φ` and `c = F₀u` for evaluating the conjugated
/// propagator at many times.
pub struct ConjugatedState<'w> {
    op: &'w WaveOperator,
    u: Vec<C64>,
    c: SpectralCoeffs,
}

impl<'w> ConjugatedState<'w> {
    pub fn new(op: &'w WaveOperator, phi: &[C64]) -> Result<Self> {
        let u = if op.theta() == C64::new(0.0, 0.0) { phi.to_vec() } else { op.apply_inverse(phi)?.state };
        // Only the datum is held to the tail precondition; `u` carries the
        // truncation remainder of the inverse.
        let c = if op.theta() == C64::new(0.0, 0.0) { op.analyze(&u)? } else { op.analyze_unchecked(&u) };
        Ok(Self { op, u, c })
    }

    /// Same without the tail-mass precondition, for propagated states.
    pub fn new_unchecked(op: &'w WaveOperator, phi: &[C64]) -> Result<Self> {
        let u = if op.theta() == C64::new(0.0, 0.0) { phi.to_vec() } else { op.apply_inverse_unchecked(phi)?.state };
        let c = op.analyze_unchecked(&u);
        Ok(Self { op, u, c })
    }

    /// `u − F₀*F₀u`: the part of `u` outside the quadrature's reach, which
    /// the completed propagator carries along unchanged.
    pub fn remainder(&self) -> Vec<C64> {
        let synth = inverse_transform(self.op.table(), self.op.free_family(), &self.c)
            .expect("coefficients from the same table");
        self.u.iter().zip(synth).map(|(u, v)| u - v).collect()
    }

    pub fn at(&self, t: f64) -> Vec<C64> {
        let table = self.op.table();
        let free = inverse_transform(table, self.op.free_family(), &self.c.multiply(|k| phase(t)(k) - 1.0))
            .expect("coefficients from the same table");
        let mut out: Vec<C64> = self.u.iter().zip(free).map(|(u, v)| u + v).collect();
        if self.op.theta() != C64::new(0.0, 0.0) {
            let dev = inverse_transform(table, self.op.delta_family(), &self.c.multiply(phase(t)))
                .expect("coefficients from the same table");
            out.iter_mut().zip(dev).for_each(|(o, d)| *o += d);
        }
        out
    }
}

/// `W̃_θ e^{−itH₀} W̃_θ⁻¹ φ`; equals [`completed_free_propagate`] at `θ = 0`.
pub fn static_propagate_modified(op: &WaveOperator, phi: &[C64], t: f64) -> Result<Vec<C64>> {
    Ok(ConjugatedState::new(op, phi)?.at(t))
}

/// The conjugated propagator on a list of times.
pub fn static_run(op: &WaveOperator, phi: &[C64], times: &[f64]) -> Result<PropagatorRun> {
    let state = ConjugatedState::new(op, phi)?;
    let states = times.iter().map(|&t| state.at(t)).collect();
    let table = op.table();
    Ok(PropagatorRun::new(
        table.h(),
        op.theta(),
        Method::ConjugatedStatic,
        None,
        table.grid(),
        times.to_vec(),
        states,
    ))
}

/// `e^{−itH_θ}φ` by Crank-Nicolson on the finite-difference oracle.
pub fn oracle_run(ham: &DiscreteHamiltonian, phi: &[C64], times: &[f64], steps_per_unit: usize) -> Result<PropagatorRun> {
    let mut states = Vec::with_capacity(times.len());
    let mut u = phi.to_vec();
    let mut now = 0.0;
    for &t in times {
        if t < now {
            return Err(invalid("oracle run needs ascending times"));
        }
        let n_t = ((t - now) * steps_per_unit as f64).ceil() as usize;
        u = crate::oracle::oracle_propagate(ham, &u, t - now, n_t.max(1))?;
        now = t;
        states.push(u.clone());
    }
    Ok(PropagatorRun::new(ham.h(), ham.theta(), Method::Oracle, None, ham.grid(), times.to_vec(), states))
}

/// Standard deviations of the packet's momentum spread covered by
/// [`transport_box`].
pub const SPREAD_STDS: f64 = 6.0;
/// Extra distance beyond the farthest travel, in units of length.
pub const BOX_MARGIN: f64 = 1.0;

/// Spatial and spectral grids on which `packet` stays clear of the box ends
/// up to `horizon`: travel at the group velocity `2kh` of the fastest
/// covered momentum, about eight nodes per shortest wavelength at `k_max`,
/// and a momentum step whose aliasing period exceeds twice the box.
pub fn transport_box(
    a: f64,
    b: f64,
    h: f64,
    packet: &Packet,
    horizon: f64,
    k_min_abs: f64,
    k_max: f64,
) -> Result<(SpatialGrid, SpectralGrid)> {
    if !(h > 0.0 && horizon >= 0.0 && packet.width > 0.0) {
        return Err(invalid(format!("need h > 0, horizon >= 0 and a positive width, got {h}, {horizon}")));
    }
    let k_fast = packet.momentum.abs() + SPREAD_STDS * h / (2.0 * packet.width);
    let reach = 2.0 * k_fast * h * horizon + BOX_MARGIN;
    let lo = a.min(packet.center - SPREAD_STDS * packet.width) - reach;
    let hi = b.max(packet.center + SPREAD_STDS * packet.width) + reach;
    // Tail windows take 2% of the nodes at each end.
    let length = (hi - lo) * 1.05;
    let pad = 0.5 * (length - (hi - lo));
    let step = std::f64::consts::PI * h / (4.0 * k_max);
    let n = (length / step).ceil() as usize + 1;
    let grid = SpatialGrid::new(lo - pad, hi + pad, n, a, b)?;
    let dk = std::f64::consts::PI * h / (2.0 * length);
    let n_k = (((k_max - k_min_abs) / dk).ceil() as usize).max(64);
    Ok((grid, crate::spectral::make_k_grid(k_min_abs, k_max, n_k)?))
}

/// Frozen-cell propagators `U_{θ,n}(t,s)` for one time-dependent barrier.
pub struct StepwiseEngine {
    tp: TimePotential,
    h: f64,
    theta: C64,
    convention: KreinConvention,
    grid: SpatialGrid,
    sgrid: Arc<SpectralGrid>,
    cache: Vec<(i64, Arc<WaveOperator>)>,
    hits: usize,
    misses: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub hits: usize,
    pub misses: usize,
}

impl StepwiseEngine {
    pub fn new(
        tp: TimePotential,
        h: f64,
        theta: C64,
        convention: KreinConvention,
        grid: SpatialGrid,
        sgrid: Arc<SpectralGrid>,
    ) -> Result<Self> {
        Ok(Self { tp, h, theta, convention, grid, sgrid, cache: Vec::new(), hits: 0, misses: 0 })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn time_potential(&self) -> &TimePotential {
        &self.tp
    }

    pub fn theta(&self) -> C64 {
        self.theta
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn cache_stats(&self) -> CacheStats {
        CacheStats { hits: self.hits, misses: self.misses }
    }

    /// Frozen operator at schedule amplitude `amp`, built on first use.
    pub fn operator(&mut self, amp: f64) -> Result<Arc<WaveOperator>> {
        let key = amp_key(amp);
        if let Some((_, op)) = self.cache.iter().find(|(k, _)| *k == key) {
            self.hits += 1;
            return Ok(op.clone());
        }
        self.misses += 1;
        let p = self.tp.frozen(amp);
        let table = Arc::new(ModeTable::build(&p, self.h, &self.grid, self.sgrid.clone())?);
        let op = Arc::new(WaveOperator::new(table, self.theta, self.convention)?);
        if self.cache.len() == CACHE_CAPACITY {
            self.cache.remove(0);
        }
        self.cache.push((key, op.clone()));
        Ok(op)
    }

    fn cell_of(&self, t: f64, n: usize) -> usize {
        let x = t / self.tp.horizon() * n as f64;
        ((x + 1e-9).floor().max(0.0) as usize).min(n - 1)
    }

    fn cell_start(&self, j: usize, n: usize) -> f64 {
        self.tp.horizon() * j as f64 / n as f64
    }

    /// Runs of consecutive cells that share a frozen operator are merged
    /// into one segment, since the frozen propagator is a group.
    /// Only the initial datum is held to the tail-mass limit: propagated
    /// states carry the quadrature's small far field, which is harmless
    /// because synthesis samples the whole line rather than reflecting at
    /// the box ends.
    fn segment(&mut self, u: &[C64], amp: f64, tau: f64) -> Result<Vec<C64>> {
        let op = self.operator(amp)?;
        Ok(ConjugatedState::new_unchecked(&op, u)?.at(tau))
    }

    fn check_datum(&self, phi: &[C64]) -> Result<()> {
        if phi.len() != self.grid.n() {
            return Err(invalid(format!("state has {} nodes, grid has {}", phi.len(), self.grid.n())));
        }
        let mass = crate::oracle::tail_mass(phi);
        if !(mass <= crate::spectral::TAIL_LIMIT) {
            return Err(crate::error::Error::TailMass { mass, tol: crate::spectral::TAIL_LIMIT });
        }
        Ok(())
    }

    /// `U_{θ,n}(t,s) φ` with cells `[jT/n, (j+1)T/n)` frozen at their left end.
    /// A datum at `s = 0` is held to the tail-mass limit.
    pub fn propagate(&mut self, phi: &[C64], s: f64, t: f64, n: usize) -> Result<Vec<C64>> {
        let horizon = self.tp.horizon();
        if !(n > 0 && 0.0 <= s && s <= t && t <= horizon * (1.0 + 1e-12)) {
            return Err(invalid(format!("need 0 <= s <= t <= T and n > 0, got s={s}, t={t}, n={n}")));
        }
        if s == 0.0 {
            self.check_datum(phi)?;
        }
        let eps = 1e-12 * horizon;
        let mut pending = Pending::default();
        let mut u = phi.to_vec();
        let mut now = s;
        while now < t - eps {
            let j = self.cell_of(now, n);
            let end = self.cell_start(j + 1, n).min(t);
            let amp = self.tp.amplitude(self.cell_start(j, n));
            if let Some((a, tau)) = pending.push(amp, now, end) {
                u = self.segment(&u, a, tau)?;
            }
            now = end;
        }
        if let Some((a, tau)) = pending.take() {
            u = self.segment(&u, a, tau)?;
        }
        Ok(u)
    }

    /// States `U_{θ,n}(t_i, 0) φ` on ascending times.
    pub fn trajectory(&mut self, phi: &[C64], n: usize, times: &[f64]) -> Result<PropagatorRun> {
        let mut states = Vec::with_capacity(times.len());
        let mut u = phi.to_vec();
        let mut now = 0.0;
        for &t in times {
            if t < now {
                return Err(invalid("trajectory needs ascending times"));
            }
            u = self.propagate(&u, now, t, n)?;
            now = t;
            states.push(u.clone());
        }
        Ok(PropagatorRun::new(self.h, self.theta, Method::Stepwise, Some(n), &self.grid, times.to_vec(), states))
    }

    /// Trajectories of `U_{θ,n}` and `U_{0,n}` on ascending times, both
    /// from `φ` at `t = 0`; each frozen table is built once for both.
    pub fn paired_trajectories(&mut self, phi: &[C64], n: usize, times: &[f64]) -> Result<(PropagatorRun, PropagatorRun)> {
        let horizon = self.tp.horizon();
        if n == 0 || times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|&t| t < 0.0 || t > horizon * (1.0 + 1e-12)) {
            return Err(invalid("paired trajectories need n > 0 and ascending times in [0, T]"));
        }
        self.check_datum(phi)?;
        let eps = 1e-12 * horizon;
        let (mut u, mut v) = (phi.to_vec(), phi.to_vec());
        let (mut mod_states, mut free_states) = (Vec::with_capacity(times.len()), Vec::with_capacity(times.len()));
        let mut now = 0.0;
        for &t in times {
            let mut pending = Pending::default();
            while now < t - eps {
                let j = self.cell_of(now, n);
                let end = self.cell_start(j + 1, n).min(t);
                let amp = self.tp.amplitude(self.cell_start(j, n));
                if let Some((a, tau)) = pending.push(amp, now, end) {
                    (u, v) = self.segment_pair(&u, &v, a, tau)?;
                }
                now = end;
            }
            if let Some((a, tau)) = pending.take() {
                (u, v) = self.segment_pair(&u, &v, a, tau)?;
            }
            mod_states.push(u.clone());
            free_states.push(v.clone());
        }
        let run = |theta, states| PropagatorRun::new(self.h, theta, Method::Stepwise, Some(n), &self.grid, times.to_vec(), states);
        Ok((run(self.theta, mod_states), run(C64::new(0.0, 0.0), free_states)))
    }

    fn segment_pair(&mut self, u: &[C64], v: &[C64], amp: f64, tau: f64) -> Result<(Vec<C64>, Vec<C64>)> {
        let op = self.operator(amp)?;
        let free = WaveOperator::new(op.table().clone(), C64::new(0.0, 0.0), self.convention)?;
        Ok((ConjugatedState::new_unchecked(&op, u)?.at(tau), ConjugatedState::new_unchecked(&free, v)?.at(tau)))
    }

    /// `U_{θ,n}(T, 0) φ` for every `n` in `levels`, sharing each frozen
    /// operator across levels. Every level must divide the largest one.
    pub fn final_states(&mut self, phi: &[C64], levels: &[usize]) -> Result<Vec<Vec<C64>>> {
        let finest = levels.iter().copied().max().ok_or_else(|| invalid("no levels"))?;
        if levels.iter().any(|&n| n == 0 || finest % n != 0) {
            return Err(invalid("every level must divide the finest level"));
        }
        self.check_datum(phi)?;
        let horizon = self.tp.horizon();
        let mut states: Vec<Vec<C64>> = levels.iter().map(|_| phi.to_vec()).collect();
        let mut pending: Vec<Pending> = levels.iter().map(|_| Pending::default()).collect();
        for m in 0..finest {
            let amp = self.tp.amplitude(horizon * m as f64 / finest as f64);
            for ((state, queue), &n) in states.iter_mut().zip(&mut pending).zip(levels) {
                if m % (finest / n) == 0 {
                    let cell = m / (finest / n);
                    let (start, end) = (self.cell_start(cell, n), self.cell_start(cell + 1, n));
                    if let Some((a, tau)) = queue.push(amp, start, end) {
                        *state = self.segment(state, a, tau)?;
                    }
                }
            }
        }
        for (state, queue) in states.iter_mut().zip(&mut pending) {
            if let Some((a, tau)) = queue.take() {
                *state = self.segment(state, a, tau)?;
            }
        }
        Ok(states)
    }
}

fn amp_key(amp: f64) -> i64 {
    (amp / AMP_QUANTUM).round() as i64
}

/// A run of consecutive cells with the same cache key, as
/// `(amplitude, start, end)`; durations are taken as `end − start` so a
/// merged run matches a single cell of the same span bit for bit.
#[derive(Default)]
struct Pending {
    run: Option<(f64, f64, f64)>,
}

impl Pending {
    /// Extends the run, or returns the finished one as `(amplitude,
    /// duration)` when the key changes.
    fn push(&mut self, amp: f64, start: f64, end: f64) -> Option<(f64, f64)> {
        match &mut self.run {
            Some((a, _, stop)) if amp_key(*a) == amp_key(amp) => {
                *stop = end;
                None
            }
            _ => self.run.replace((amp, start, end)).map(|(a, s, e)| (a, e - s)),
        }
    }

    fn take(&mut self) -> Option<(f64, f64)> {
        self.run.take().map(|(a, s, e)| (a, e - s))
    }
}

/// `∫₀ᵀ ‖V(⌊t⌋_n) − V(⌊t⌋_ref)‖_∞ dt`, exact for piecewise-constant cells.
pub fn duhamel_envelope(tp: &TimePotential, n: usize, reference: usize) -> Result<f64> {
    if !reference.is_multiple_of(n) {
        return Err(invalid("n must divide the reference level"));
    }
    let horizon = tp.horizon();
    let dt = horizon / reference as f64;
    let stride = reference / n;
    Ok((0..reference)
        .map(|m| {
            let coarse = tp.amplitude(horizon * (m - m % stride) as f64 / reference as f64);
            let fine = tp.amplitude(horizon * m as f64 / reference as f64);
            (coarse - fine).abs() * dt
        })
        .sum())
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// `‖U_nφ − U_refφ‖/‖φ‖` at the horizon.
    pub error: f64,
    /// Duhamel envelope relative to `‖φ‖`.
    pub envelope: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub h: f64,
    pub theta: [f64; 2],
    pub reference_n: usize,
    pub rows: Vec<ConvergenceRow>,
    /// Fit of `error` against `1/n`; `None` when all errors vanish.
    pub fit: Option<PowerFit>,
    pub max_envelope_ratio: f64,
    /// Whether the last half of the errors is non-increasing.
    pub tail_decreasing: bool,
    pub cache: CacheStats,
    pub pass: bool,
}

/// Errors of `U_n` against the finest level, their rate in `1/n`, and the
/// Duhamel envelope check.
pub fn convergence_study(engine: &mut StepwiseEngine, phi: &[C64], n_list: &[usize], reference: usize) -> Result<ConvergenceReport> {
    if n_list.iter().any(|&n| n >= reference) {
        return Err(invalid("reference level must exceed every tested n"));
    }
    let mut levels = n_list.to_vec();
    levels.push(reference);
    let states = engine.final_states(phi, &levels)?;
    let grid = engine.grid().clone();
    let scale = grid.norm(phi);
    let reference_state = states.last().expect("reference pushed");
    let rows = n_list
        .iter()
        .zip(&states)
        .map(|(&n, u)| {
            let diff: Vec<C64> = u.iter().zip(reference_state).map(|(p, q)| p - q).collect();
            Ok(ConvergenceRow {
                n,
                error: grid.norm(&diff) / scale,
                envelope: duhamel_envelope(engine.time_potential(), n, reference)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let all_zero = rows.iter().all(|r| r.error == 0.0);
    let fit = if all_zero {
        None
    } else {
        Some(fit_exponent(&rows.iter().map(|r| (1.0 / r.n as f64, r.error)).collect::<Vec<_>>())?)
    };
    let max_envelope_ratio = rows
        .iter()
        .map(|r| if r.error == 0.0 { 0.0 } else { r.error / r.envelope })
        .fold(0.0, f64::max);
    let half = rows.len() / 2;
    let tail_decreasing = rows[half..].windows(2).all(|w| w[1].error <= w[0].error);
    let pass = all_zero
        || (fit.as_ref().is_some_and(|f| f.slope >= RATE_FLOOR)
            && max_envelope_ratio <= ENVELOPE_CONSTANT
            && tail_decreasing);
    Ok(ConvergenceReport {
        h: engine.h(),
        theta: [engine.theta().re, engine.theta().im],
        reference_n: reference,
        rows,
        fit,
        max_envelope_ratio,
        tail_decreasing,
        cache: engine.cache_stats(),
        pass,
    })
}

/// `points` equispaced times on `[0, horizon]`.
pub fn time_grid(horizon: f64, points: usize) -> Vec<f64> {
    (0..points).map(|i| horizon * i as f64 / (points - 1) as f64).collect()
}

/// Sup over a run pair of `‖u_θ(t) − u₀(t)‖/‖φ‖`, with the time where it
/// is attained.
pub fn sup_deviation(grid: &SpatialGrid, modified: &PropagatorRun, free: &PropagatorRun, scale: f64) -> (f64, f64) {
    modified
        .states
        .iter()
        .zip(&free.states)
        .zip(&modified.times)
        .map(|((u, v), &t)| {
            let diff: Vec<C64> = u.iter().zip(v).map(|(p, q)| p - q).collect();
            (grid.norm(&diff) / scale, t)
        })
        .fold((0.0, 0.0), |best, cur| if cur.0 > best.0 { cur } else { best })
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionRow {
    pub h: f64,
    pub theta: f64,
    pub horizon: f64,
    pub sup_deviation: f64,
    pub t_at_sup: f64,
    /// `max_t ‖U_θ φ‖/‖φ‖`.
    pub max_growth: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionReport {
    pub n0: f64,
    pub rows: Vec<ExpansionRow>,
    /// One fit per horizon, in the order of `horizons`.
    pub horizons: Vec<f64>,
    pub fits: Vec<PowerFit>,
    /// `C_T = max_h sup_T(h)/h^{N₀−2}` for each horizon.
    pub constants: Vec<f64>,
    /// `C_{T_max}/C_{T_min}`.
    pub constant_ratio: f64,
    pub growth_bound: f64,
    pub pass: bool,
}

/// Assembles the h-sweep from per-`h` runs of `(h, θ, modified run, free
/// run)`; every horizon is a prefix of the runs' time grid.
pub fn expansion_report(
    n0: f64,
    horizons: &[f64],
    points: usize,
    runs: &[(f64, f64, PropagatorRun, PropagatorRun)],
    grid_for: impl Fn(f64) -> SpatialGrid,
    phi_norm: impl Fn(f64) -> f64,
    sup_potential: f64,
) -> Result<ExpansionReport> {
    let mut rows = Vec::new();
    for &horizon in horizons {
        for (h, theta, modified, free) in runs {
            let grid = grid_for(*h);
            let scale = phi_norm(*h);
            let keep = |run: &PropagatorRun| {
                let idx: Vec<usize> =
                    (0..run.times.len()).filter(|&i| run.times[i] <= horizon * (1.0 + 1e-12)).collect();
                PropagatorRun {
                    times: idx.iter().map(|&i| run.times[i]).collect(),
                    states: idx.iter().map(|&i| run.states[i].clone()).collect(),
                    norms: idx.iter().map(|&i| run.norms[i]).collect(),
                    ..run.clone()
                }
            };
            let (m, f) = (keep(modified), keep(free));
            if m.times.len() < points {
                return Err(invalid(format!("runs cover fewer than {points} points of horizon {horizon}")));
            }
            let (sup, t_at) = sup_deviation(&grid, &m, &f, scale);
            let max_growth = m.norms.iter().map(|n| n / scale).fold(0.0, f64::max);
            rows.push(ExpansionRow { h: *h, theta: *theta, horizon, sup_deviation: sup, t_at_sup: t_at, max_growth });
        }
    }
    let mut fits = Vec::new();
    let mut constants = Vec::new();
    for &horizon in horizons {
        let pts: Vec<(f64, f64)> =
            rows.iter().filter(|r| r.horizon == horizon).map(|r| (r.h, r.sup_deviation)).collect();
        fits.push(fit_exponent(&pts)?);
        constants.push(pts.iter().map(|&(h, v)| v / h.powf(n0 - 2.0)).fold(0.0, f64::max));
    }
    let constant_ratio = constants.last().copied().unwrap_or(0.0) / constants[0];
    let growth_bound = (GROWTH_CONSTANT * sup_potential).exp();
    let growth_ok = rows.iter().all(|r| r.max_growth <= growth_bound);
    let pass = fits.iter().all(|f| f.slope >= n0 - 2.0 - SLOPE_MARGIN)
        && constant_ratio <= HORIZON_RATIO_LIMIT
        && growth_ok;
    Ok(ExpansionReport {
        n0,
        rows,
        horizons: horizons.to_vec(),
        fits,
        constants,
        constant_ratio,
        growth_bound,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::tail_window;
    use crate::potential::{make_time_family_with_period, Potential, ScheduleKind};
    use crate::spectral::{make_k_grid, Packet};

    fn setup(h: f64, theta: f64, n: usize, n_k: usize) -> (Arc<WaveOperator>, Vec<C64>) {
        let grid = SpatialGrid::new(-4.0, 5.0, n, 0.0, 1.0).unwrap();
        let sg = Arc::new(make_k_grid(0.05, 12.0, n_k).unwrap());
        let p = Potential::square(0.0, 1.0, 2.0).unwrap();
        let table = Arc::new(ModeTable::build(&p, h, &grid, sg).unwrap());
        let phi = Packet::incoming(3.5, 0.2, 0.0).sample(&grid, h);
        (Arc::new(WaveOperator::new(table, C64::new(theta, 0.0), KreinConvention::Corrected).unwrap()), phi)
    }

    fn gap(grid: &SpatialGrid, u: &[C64], v: &[C64]) -> f64 {
        crate::spectral::relative_gap(grid, u, v)
    }

    #[test]
    fn unmodified_propagation_is_unitary_and_a_group() {
        let (op, phi) = setup(0.5, 0.0, 1025, 512);
        let table = op.table();
        let grid = table.grid();
        let u0 = static_propagate_unmodified(table, &phi, 0.0).unwrap();
        let residual = gap(grid, &u0, &phi);
        assert!(residual < 1e-3, "{residual}");
        let n0 = grid.norm(&u0);
        for t in [0.1, 0.3] {
            let ut = static_propagate_unmodified(table, &phi, t).unwrap();
            assert!((grid.norm(&ut) - n0).abs() <= 1e-8 * n0);
        }
        let two = static_propagate_unmodified(table, &static_propagate_unmodified(table, &phi, 0.1).unwrap(), 0.15)
            .unwrap();
        let one = static_propagate_unmodified(table, &phi, 0.25).unwrap();
        assert!(gap(grid, &two, &one) <= 2.0 * residual.max(1e-6), "{}", gap(grid, &two, &one));
    }

    #[test]
    fn conjugated_reduces_to_free_at_theta_zero() {
        let (op, phi) = setup(0.5, 0.0, 1025, 512);
        let a = static_propagate_modified(&op, &phi, 0.2).unwrap();
        let b = completed_free_propagate(op.table(), &phi, 0.2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn conjugated_matches_oracle_propagation() {
        let h = 0.5;
        let (op, phi) = setup(h, 0.01, 2049, 512);
        let grid = op.table().grid().clone();
        let t = 0.5;
        let spectral = static_propagate_modified(&op, &phi, t).unwrap();
        // Oracle on a wider and 3x finer box; compare on shared nodes.
        let wide = grid.widened(4.0, 4.0).unwrap();
        let offset = wide.ia() - grid.ia();
        let fine = wide.refined(3).unwrap();
        let p = op.table().potential().clone();
        let ham = DiscreteHamiltonian::build(&p, h, C64::new(0.01, 0.0), &fine).unwrap();
        let phi_fine = Packet::incoming(3.5, 0.2, 0.0).sample(&fine, h);
        let n_t = (t * ham.energy_scale(&phi_fine) / 0.01).ceil() as usize;
        let oracle = crate::oracle::oracle_propagate(&ham, &phi_fine, t, n_t).unwrap();
        let on_coarse: Vec<C64> = (0..grid.n()).map(|i| oracle[3 * (i + offset)]).collect();
        let g = gap(&grid, &spectral, &on_coarse);
        assert!(g < 1e-3, "{g}");
    }

    #[test]
    fn conjugated_solves_the_schrodinger_equation() {
        // Residual against the finite-difference H_θ, which is second order.
        let residual = |n: usize| {
            let (h, theta) = (0.5, 0.05);
            let (op, phi) = setup(h, theta, n, 512);
            let grid = op.table().grid().clone();
            let ham = DiscreteHamiltonian::build(op.table().potential(), h, C64::new(theta, 0.0), &grid).unwrap();
            let state = ConjugatedState::new(&op, &phi).unwrap();
            // The remainder is time independent and not resolved by the modes.
            let rest = state.remainder();
            assert!(grid.norm(&rest) < 1e-3 * grid.norm(&phi));
            let (t, dt) = (0.2, 1e-3);
            let du: Vec<C64> =
                state.at(t + dt).iter().zip(state.at(t - dt)).map(|(p, q)| (p - q) / (2.0 * dt)).collect();
            let resolved: Vec<C64> = state.at(t).iter().zip(&rest).map(|(u, r)| u - r).collect();
            let hu = ham.apply(&resolved);
            let w = tail_window(grid.n());
            // Rows next to an interface carry the ghost-elimination stencils,
            // whose local truncation error is of lower order.
            let near = |i: usize, c: usize| i + 2 >= c && i <= c + 3;
            let keep: Vec<usize> = (w..grid.n() - w).filter(|&i| !near(i, grid.ia()) && !near(i, grid.ib())).collect();
            let res: Vec<C64> = keep.iter().map(|&i| C64::i() * du[i] - hu[i]).collect();
            let reference: Vec<C64> = keep.iter().map(|&i| hu[i]).collect();
            grid.norm(&res) / grid.norm(&reference)
        };
        let (coarse, fine) = (residual(1025), residual(2049));
        assert!(fine < 1e-4 && coarse / fine > 3.0, "{coarse} {fine}");
    }

    fn engine(h: f64, theta: f64, amp: f64, horizon: f64) -> (StepwiseEngine, Vec<C64>) {
        let packet = Packet::incoming(3.5, 0.2, 0.0);
        let (grid, sg) = transport_box(0.0, 1.0, h, &packet, horizon, 0.05, 12.0).unwrap();
        let sg = Arc::new(sg);
        let p = Potential::square_with_floor(0.0, 1.0, 2.0, 1.0).unwrap();
        let tp = make_time_family_with_period(&p, 0.1, amp, ScheduleKind::Linear, horizon, horizon).unwrap();
        let phi = packet.sample(&grid, h);
        (StepwiseEngine::new(tp, h, C64::new(theta, 0.0), KreinConvention::Corrected, grid, sg).unwrap(), phi)
    }

    #[test]
    fn stepwise_cocycle_is_exact() {
        let (mut e, phi) = engine(0.5, 0.1, 0.5, 1.0);
        let n = 8;
        let direct = e.propagate(&phi, 0.0, 0.75, n).unwrap();
        let mid = e.propagate(&phi, 0.0, 0.25, n).unwrap();
        let composed = e.propagate(&mid, 0.25, 0.75, n).unwrap();
        let g = gap(e.grid(), &composed, &direct);
        assert!(g <= 1e-12, "{g}");
        assert_eq!(e.propagate(&phi, 0.5, 0.5, n).unwrap(), phi);
    }

    #[test]
    fn stepwise_static_family_matches_conjugated() {
        let (mut e, phi) = engine(0.25, 0.02, 0.0, 1.0);
        let t = 0.5;
        let op = e.operator(0.0).unwrap();
        let reference = static_propagate_modified(&op, &phi, t).unwrap();
        for n in [1, 4, 16] {
            assert_eq!(e.propagate(&phi, 0.0, t, n).unwrap(), reference, "n={n}");
        }
        assert!(e.cache_stats().hits > 0);
    }

    #[test]
    fn final_states_match_single_level_runs() {
        let (mut e, phi) = engine(0.5, 0.1, 0.5, 0.5);
        let both = e.final_states(&phi, &[2, 8]).unwrap();
        for (n, u) in [2usize, 8].iter().zip(&both) {
            let single = e.propagate(&phi, 0.0, 0.5, *n).unwrap();
            assert!(gap(e.grid(), &single, u) <= 1e-12);
        }
    }

    #[test]
    fn static_family_convergence_is_trivial() {
        let (mut e, phi) = engine(0.5, 0.0, 0.0, 0.5);
        let r = convergence_study(&mut e, &phi, &[2, 4, 8, 16], 32).unwrap();
        assert!(r.rows.iter().all(|row| row.error == 0.0), "{r:?}");
        assert!(r.pass);
    }

    #[test]
    fn envelope_of_linear_schedule() {
        let p = Potential::square_with_floor(0.0, 1.0, 2.0, 1.0).unwrap();
        let tp = make_time_family_with_period(&p, 0.1, 0.5, ScheduleKind::Linear, 1.0, 1.0).unwrap();
        // Staircase gap of a unit-slope ramp: (T/n − T/ref) T/2 times amp/T.
        let env = duhamel_envelope(&tp, 8, 64).unwrap();
        let expected = 0.5 * (1.0 / 8.0 - 1.0 / 64.0) / 2.0;
        assert!((env - expected).abs() < 1e-12, "{env} {expected}");
    }

    #[test]
    fn transport_box_keeps_the_packet_clear_of_the_ends() {
        let packet = Packet::incoming(3.5, 0.2, 0.0);
        let (grid, sg) = transport_box(0.0, 1.0, 0.5, &packet, 0.5, 0.05, 12.0).unwrap();
        assert!(grid.x_min() < -6.0 && grid.x_max() > 6.5);
        assert!(std::f64::consts::PI * 0.5 / (sg.nodes[1] - sg.nodes[0]) > grid.x_max() - grid.x_min());
        let table = ModeTable::build(&Potential::square(0.0, 1.0, 2.0).unwrap(), 0.5, &grid, Arc::new(sg)).unwrap();
        let u = completed_free_propagate(&table, &packet.sample(&grid, 0.5), 0.5).unwrap();
        assert!(crate::oracle::tail_mass(&u) < 1e-10);
    }

    #[test]
    fn paired_trajectories_match_separate_engines() {
        let (mut e, phi) = engine(0.5, 0.1, 0.5, 0.5);
        let times = [0.0, 0.25, 0.5];
        let (m, f) = e.paired_trajectories(&phi, 4, &times).unwrap();
        let single = e.trajectory(&phi, 4, &times).unwrap();
        let (mut e0, _) = engine(0.5, 0.0, 0.5, 0.5);
        let free = e0.trajectory(&phi, 4, &times).unwrap();
        for i in 0..times.len() {
            assert_eq!(m.states[i], single.states[i]);
            assert_eq!(f.states[i], free.states[i]);
        }
    }
}
