//! Generalized Fourier transforms over a symmetric trapezoid k-grid.
//!
//! Every eigenfunction used here is, region by region, a combination
//! `P χ₊ + M χ₋` of the two Jost mantissas at `|k|`. A [`ModeTable`] stores
//! the mantissas once per `|k|`; an [`EigenFamily`] stores only the regional
//! coefficients, so the unmodified and θ-modified families share one table.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::greenfun::{check_wronskian, Endpoint, GreenKernel, KernelKind};
use crate::jost::{InterfaceTrace, JostPair, JostTraces, OneSided, Region, SpatialGrid};
use crate::krein::{eigen_coefficients, KreinConvention};
use crate::oracle::tail_mass;
use crate::potential::Potential;
use crate::C64;

/// Largest tail mass a state may carry into [`forward_transform`].
pub const TAIL_LIMIT: f64 = 1e-8;

/// Trapezoid nodes on `±[k_min_abs, k_max]`, ascending: the first `n_k`
/// nodes are negative, the last `n_k` positive, and node `n_k - 1 - j` is
/// the mirror of node `n_k + j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    pub k_min_abs: f64,
    pub k_max: f64,
    /// Nodes per half-line.
    pub n_k: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn make_k_grid(k_min_abs: f64, k_max: f64, n_k: usize) -> Result<SpectralGrid> {
    if !(k_min_abs > 0.0 && k_max > k_min_abs && k_max.is_finite()) {
        return Err(invalid(format!("need 0 < k_min_abs < k_max, got {k_min_abs}, {k_max}")));
    }
    if n_k < 64 {
        return Err(invalid(format!("n_k must be at least 64, got {n_k}")));
    }
    let dk = (k_max - k_min_abs) / (n_k - 1) as f64;
    let half: Vec<(f64, f64)> = (0..n_k)
        .map(|j| {
            let k = if j == n_k - 1 { k_max } else { k_min_abs + j as f64 * dk };
            let w = if j == 0 || j == n_k - 1 { 0.5 * dk } else { dk };
            (k, w)
        })
        .collect();
    let (nodes, weights) = half
        .iter()
        .rev()
        .map(|&(k, w)| (-k, w))
        .chain(half.iter().copied())
        .unzip();
    Ok(SpectralGrid { k_min_abs, k_max, n_k, nodes, weights })
}

impl SpectralGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// The `j`-th positive momentum `|k|`.
    pub fn momentum(&self, j: usize) -> f64 {
        self.nodes[self.n_k + j]
    }

    /// Node indices `(−k_j, +k_j)`.
    pub fn pair_indices(&self, j: usize) -> (usize, usize) {
        (self.n_k - 1 - j, self.n_k + j)
    }

    /// Weighted pairing `Σ w conj(f) g`.
    pub fn inner(&self, f: &[C64], g: &[C64]) -> C64 {
        self.weights.iter().zip(f.iter().zip(g)).map(|(w, (p, q))| p.conj() * q * *w).sum()
    }

    pub fn norm(&self, f: &[C64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, z)| w * z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Values of a transform on a [`SpectralGrid`], in node order.
#[derive(Clone, Debug)]
pub struct SpectralCoeffs {
    pub grid: Arc<SpectralGrid>,
    pub values: Vec<C64>,
}

impl SpectralCoeffs {
    pub fn zeros(grid: Arc<SpectralGrid>) -> Self {
        let values = vec![C64::new(0.0, 0.0); grid.len()];
        Self { grid, values }
    }

    pub fn norm(&self) -> f64 {
        self.grid.norm(&self.values)
    }

    /// Multiplies node `k` by `m(k)`.
    pub fn multiply(&self, m: impl Fn(f64) -> C64) -> Self {
        let values = self.grid.nodes.iter().zip(&self.values).map(|(&k, v)| m(k) * v).collect();
        Self { grid: self.grid.clone(), values }
    }
}

fn normalization(h: f64) -> f64 {
    (2.0 * PI * h).powf(-0.5)
}

/// Jost mantissas at every positive momentum of a grid, sampled on one
/// spatial grid. Storage is momentum-major.
#[derive(Clone, Debug)]
pub struct ModeTable {
    potential: Potential,
    h: f64,
    grid: SpatialGrid,
    sgrid: Arc<SpectralGrid>,
    plus: Vec<C64>,
    minus: Vec<C64>,
    traces: Vec<JostTraces>,
}

impl ModeTable {
    pub fn build(p: &Potential, h: f64, grid: &SpatialGrid, sgrid: Arc<SpectralGrid>) -> Result<Self> {
        if !(h > 0.0) {
            return Err(invalid("h must be positive"));
        }
        let solved: Vec<(Vec<C64>, Vec<C64>, JostTraces)> = (0..sgrid.n_k)
            .into_par_iter()
            .map(|j| {
                let pair = JostPair::solve(p, h, C64::new(sgrid.momentum(j), 0.0), grid)?;
                let t = pair.traces();
                check_wronskian(&t)?;
                Ok((pair.plus.values, pair.minus.values, t))
            })
            .collect::<Result<_>>()?;
        let n = grid.n();
        let mut plus = Vec::with_capacity(n * sgrid.n_k);
        let mut minus = Vec::with_capacity(n * sgrid.n_k);
        let mut traces = Vec::with_capacity(sgrid.n_k);
        for (p_vals, m_vals, t) in solved {
            plus.extend(p_vals);
            minus.extend(m_vals);
            traces.push(t);
        }
        Ok(Self { potential: p.clone(), h, grid: grid.clone(), sgrid, plus, minus, traces })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn spectral_grid(&self) -> &Arc<SpectralGrid> {
        &self.sgrid
    }

    pub fn traces(&self, j: usize) -> &JostTraces {
        &self.traces[j]
    }

    fn plus_row(&self, j: usize) -> &[C64] {
        let n = self.grid.n();
        &self.plus[j * n..(j + 1) * n]
    }

    fn minus_row(&self, j: usize) -> &[C64] {
        let n = self.grid.n();
        &self.minus[j * n..(j + 1) * n]
    }

    pub fn unmodified(&self) -> EigenFamily {
        let coeffs = (0..self.sgrid.len()).map(|node| self.base_coeffs(node)).collect();
        EigenFamily { theta: C64::new(0.0, 0.0), convention: KreinConvention::Corrected, coeffs }
    }

    /// `ψ_θ(·,k)` for every node; fails on the first near-singular momentum.
    pub fn modified(&self, theta: C64, convention: KreinConvention) -> Result<EigenFamily> {
        if theta == C64::new(0.0, 0.0) {
            return Ok(EigenFamily { theta, convention, ..self.unmodified() });
        }
        let coeffs = (0..self.sgrid.len())
            .into_par_iter()
            .map(|node| {
                let k = self.sgrid.nodes[node];
                let t = &self.traces[self.half_index(node)];
                let e = eigen_coefficients(t, &self.potential, theta, k, convention)?;
                let mut rc = self.base_coeffs(node);
                let kernels = [
                    (Endpoint::B, KernelKind::Value),
                    (Endpoint::B, KernelKind::Slope),
                    (Endpoint::A, KernelKind::Value),
                    (Endpoint::A, KernelKind::Slope),
                ];
                for (c, (end, kind)) in e.iter().zip(kernels) {
                    let g = GreenKernel::new(t, end, kind);
                    // Left of its endpoint a kernel follows χ₋, right of it χ₊.
                    let below: &[Region] = match end {
                        Endpoint::A => &[Region::Left],
                        Endpoint::B => &[Region::Left, Region::Inside],
                    };
                    for r in Region::ALL {
                        if below.contains(&r) {
                            rc[r.index()].minus += c * g.left;
                        } else {
                            rc[r.index()].plus += c * g.right;
                        }
                    }
                }
                Ok(rc)
            })
            .collect::<Result<_>>()?;
        Ok(EigenFamily { theta, convention, coeffs })
    }

    fn half_index(&self, node: usize) -> usize {
        let n_k = self.sgrid.n_k;
        if node >= n_k {
            node - n_k
        } else {
            n_k - 1 - node
        }
    }

    fn base_coeffs(&self, node: usize) -> [RegionCoeffs; 3] {
        let k = self.sgrid.nodes[node];
        let t = &self.traces[self.half_index(node)];
        let t_hat = |other_log: f64| -2.0 * C64::i() * k.abs() / (self.h * t.w) * (-other_log).exp();
        let rc = if k > 0.0 {
            RegionCoeffs { plus: t_hat(t.log_minus), minus: C64::new(0.0, 0.0) }
        } else {
            RegionCoeffs { plus: C64::new(0.0, 0.0), minus: t_hat(t.log_plus) }
        };
        [rc; 3]
    }
}

/// `ψ = plus·χ₊ + minus·χ₋` on one region.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RegionCoeffs {
    pub plus: C64,
    pub minus: C64,
}

/// A family of eigenfunctions over the nodes of a [`ModeTable`].
#[derive(Clone, Debug)]
pub struct EigenFamily {
    pub theta: C64,
    pub convention: KreinConvention,
    coeffs: Vec<[RegionCoeffs; 3]>,
}

impl EigenFamily {
    pub fn coeffs(&self, node: usize) -> &[RegionCoeffs; 3] {
        &self.coeffs[node]
    }

    /// Member-wise `self − base`, the kernel of `W_θ − W₀` when `self` is
    /// modified and `base` unmodified.
    pub fn difference(&self, base: &EigenFamily) -> EigenFamily {
        let coeffs = self
            .coeffs
            .iter()
            .zip(&base.coeffs)
            .map(|(c, b)| {
                [0, 1, 2].map(|r| RegionCoeffs { plus: c[r].plus - b[r].plus, minus: c[r].minus - b[r].minus })
            })
            .collect();
        EigenFamily { theta: self.theta, convention: self.convention, coeffs }
    }

    /// The member at `node` evaluated at grid node `i`.
    pub fn eval(&self, table: &ModeTable, node: usize, i: usize) -> C64 {
        let j = table.half_index(node);
        let c = self.coeffs[node][table.grid().region(i).index()];
        c.plus * table.plus_row(j)[i] + c.minus * table.minus_row(j)[i]
    }

    /// One-sided traces `(at a, at b)` of the member at `node`.
    pub fn interface_traces(&self, table: &ModeTable, node: usize) -> (InterfaceTrace, InterfaceTrace) {
        let t = table.traces(table.half_index(node));
        let c = &self.coeffs[node];
        let side = |r: Region, plus: OneSided, minus: OneSided| {
            let rc = c[r.index()];
            plus.scale(rc.plus).add(minus.scale(rc.minus))
        };
        (
            InterfaceTrace {
                left: side(Region::Left, t.plus_a, t.minus_a),
                right: side(Region::Inside, t.plus_a, t.minus_a),
            },
            InterfaceTrace {
                left: side(Region::Inside, t.plus_b, t.minus_b),
                right: side(Region::Right, t.plus_b, t.minus_b),
            },
        )
    }

    /// The family member at `node` sampled on the table's grid.
    pub fn sample(&self, table: &ModeTable, node: usize) -> Vec<C64> {
        let j = table.half_index(node);
        let (pr, mr) = (table.plus_row(j), table.minus_row(j));
        let grid = table.grid();
        (0..grid.n())
            .map(|i| {
                let c = self.coeffs[node][grid.region(i).index()];
                c.plus * pr[i] + c.minus * mr[i]
            })
            .collect()
    }
}

fn check_len(table: &ModeTable, phi: &[C64]) -> Result<()> {
    if phi.len() != table.grid().n() {
        return Err(invalid(format!("state has {} samples, grid has {}", phi.len(), table.grid().n())));
    }
    Ok(())
}

/// Regional pairings `Σ_{x∈r} conj(χ±(x)) φ(x) Δx` at one `|k|`.
fn regional_pairings(table: &ModeTable, j: usize, phi: &[C64]) -> [[C64; 2]; 3] {
    let step = table.grid().step();
    let (pr, mr) = (table.plus_row(j), table.minus_row(j));
    table.grid().region_ranges().map(|range| {
        let (sp, sm) = range.fold((C64::new(0.0, 0.0), C64::new(0.0, 0.0)), |(sp, sm), i| {
            (sp + pr[i].conj() * phi[i], sm + mr[i].conj() * phi[i])
        });
        [sp * step, sm * step]
    })
}

/// `(Fφ)(k) = Σ_x Δx (2πh)^{-1/2} conj(ψ(x,k)) φ(x)`.
pub fn forward_transform(table: &ModeTable, family: &EigenFamily, phi: &[C64]) -> Result<SpectralCoeffs> {
    check_len(table, phi)?;
    let mass = tail_mass(phi);
    if !(mass <= TAIL_LIMIT) {
        return Err(Error::TailMass { mass, tol: TAIL_LIMIT });
    }
    Ok(forward_unchecked(table, family, phi))
}

pub(crate) fn forward_unchecked(table: &ModeTable, family: &EigenFamily, phi: &[C64]) -> SpectralCoeffs {
    let sgrid = table.spectral_grid().clone();
    let norm = normalization(table.h());
    let pairings: Vec<[[C64; 2]; 3]> =
        (0..sgrid.n_k).into_par_iter().map(|j| regional_pairings(table, j, phi)).collect();
    let values = (0..sgrid.len())
        .map(|node| {
            let ip = &pairings[table.half_index(node)];
            let c = family.coeffs(node);
            (0..3).map(|r| c[r].plus.conj() * ip[r][0] + c[r].minus.conj() * ip[r][1]).sum::<C64>() * norm
        })
        .collect();
    SpectralCoeffs { grid: sgrid, values }
}

const CHUNK: usize = 256;

/// `(F*f)(x) = Σ_k w_k (2πh)^{-1/2} ψ(x,k) f(k)`.
pub fn inverse_transform(table: &ModeTable, family: &EigenFamily, coeffs: &SpectralCoeffs) -> Result<Vec<C64>> {
    let sgrid = table.spectral_grid();
    if coeffs.values.len() != sgrid.len() {
        return Err(invalid("coefficients live on a different spectral grid"));
    }
    let norm = normalization(table.h());
    // Per |k| and region: the weights multiplying χ₊ and χ₋.
    let folded: Vec<[RegionCoeffs; 3]> = (0..sgrid.n_k)
        .map(|j| {
            let (neg, pos) = sgrid.pair_indices(j);
            let mut acc = [RegionCoeffs::default(); 3];
            for node in [neg, pos] {
                let s = coeffs.values[node] * sgrid.weights[node] * norm;
                for (a, c) in acc.iter_mut().zip(family.coeffs(node)) {
                    a.plus += c.plus * s;
                    a.minus += c.minus * s;
                }
            }
            acc
        })
        .collect();
    let grid = table.grid();
    let mut out = vec![C64::new(0.0, 0.0); grid.n()];
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(chunk, slot)| {
        let start = chunk * CHUNK;
        for (j, acc) in folded.iter().enumerate() {
            let (pr, mr) = (table.plus_row(j), table.minus_row(j));
            for (off, u) in slot.iter_mut().enumerate() {
                let i = start + off;
                let c = acc[grid.region(i).index()];
                *u += c.plus * pr[i] + c.minus * mr[i];
            }
        }
    });
    Ok(out)
}

/// `‖F*Fφ − φ‖/‖φ‖` with the unmodified family.
pub fn completeness_residual(table: &ModeTable, phi: &[C64]) -> Result<f64> {
    let free = table.unmodified();
    let back = inverse_transform(table, &free, &forward_transform(table, &free, phi)?)?;
    Ok(relative_gap(table.grid(), &back, phi))
}

/// `‖u − v‖/‖v‖` in the grid norm.
pub fn relative_gap(grid: &SpatialGrid, u: &[C64], v: &[C64]) -> f64 {
    let diff: Vec<C64> = u.iter().zip(v).map(|(p, q)| p - q).collect();
    grid.norm(&diff) / grid.norm(v)
}

/// Gaussian `e^{i k₀ x/h} e^{−(x−x₀)²/4σ²}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub momentum: f64,
    pub center: f64,
    pub width: f64,
}

impl Packet {
    /// Packet centered `3σ` left of `a`.
    pub fn incoming(momentum: f64, width: f64, a: f64) -> Self {
        Self { momentum, center: a - 3.0 * width, width }
    }

    pub fn eval(&self, h: f64, x: f64) -> C64 {
        let d = x - self.center;
        C64::from_polar((-d * d / (4.0 * self.width * self.width)).exp(), self.momentum * x / h)
    }

    pub fn sample(&self, grid: &SpatialGrid, h: f64) -> Vec<C64> {
        grid.nodes().map(|x| self.eval(h, x)).collect()
    }

    /// Free transform `(2πh)^{-1/2} ∫ e^{−ikx/h} φ(x) dx` in closed form.
    pub fn free_transform(&self, h: f64, k: f64) -> C64 {
        let s = self.width;
        let dk = k - self.momentum;
        let amp = normalization(h) * (4.0 * PI * s * s).sqrt() * (-s * s * dk * dk / (h * h)).exp();
        C64::from_polar(amp, -dk * self.center / h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn default_box(n: usize) -> SpatialGrid {
        SpatialGrid::new(-2.0, 3.0, n, 0.0, 1.0).unwrap()
    }

    #[test]
    fn grid_construction() {
        let g = make_k_grid(0.05, 8.0, 512).unwrap();
        assert_eq!(g.len(), 1024);
        let total: f64 = g.weights.iter().sum();
        assert!((total - 2.0 * (8.0 - 0.05)).abs() < 1e-12);
        for j in 0..g.n_k {
            let (neg, pos) = g.pair_indices(j);
            assert_eq!(g.nodes[neg], -g.nodes[pos]);
            assert_eq!(g.weights[neg], g.weights[pos]);
        }
        assert!(g.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(g.nodes.iter().all(|k| k.abs() >= 0.05));
        assert!(make_k_grid(0.05, 8.0, 63).is_err());
        assert!(make_k_grid(0.0, 8.0, 64).is_err());
        assert!(make_k_grid(2.0, 1.0, 64).is_err());
    }

    #[test]
    fn free_transform_matches_gaussian_closed_form() {
        let h = 0.5;
        let grid = SpatialGrid::new(-4.0, 5.0, 4097, 0.0, 1.0).unwrap();
        let sg = Arc::new(make_k_grid(0.05, 12.0, 128).unwrap());
        let p = Potential::zero(0.0, 1.0).unwrap();
        let table = ModeTable::build(&p, h, &grid, sg.clone()).unwrap();
        let packet = Packet { momentum: 2.0, center: 0.5, width: 0.3 };
        let f = forward_transform(&table, &table.unmodified(), &packet.sample(&grid, h)).unwrap();
        let worst = sg
            .nodes
            .iter()
            .zip(&f.values)
            .map(|(&k, v)| (v - packet.free_transform(h, k)).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn completeness_of_smooth_packet() {
        let h = 0.5;
        let grid = SpatialGrid::new(-4.0, 5.0, 2049, 0.0, 1.0).unwrap();
        let sg = Arc::new(make_k_grid(0.05, 12.0, 1024).unwrap());
        let p = Potential::square(0.0, 1.0, 2.0).unwrap();
        let table = ModeTable::build(&p, h, &grid, sg).unwrap();
        let phi = Packet::incoming(2.0, 0.3, 0.0).sample(&grid, h);
        let r = completeness_residual(&table, &phi).unwrap();
        assert!(r < 1e-3, "{r}");
    }

    #[test]
    fn low_energy_content_degrades_completeness() {
        let h = 0.5;
        let grid = SpatialGrid::new(-10.0, 11.0, 2049, 0.0, 1.0).unwrap();
        let sg = Arc::new(make_k_grid(0.05, 12.0, 256).unwrap());
        let p = Potential::square(0.0, 1.0, 2.0).unwrap();
        let table = ModeTable::build(&p, h, &grid, sg).unwrap();
        let fast = completeness_residual(&table, &Packet::incoming(2.0, 0.3, 0.0).sample(&grid, h)).unwrap();
        let slow = completeness_residual(&table, &Packet::incoming(0.0, 0.9, 0.0).sample(&grid, h)).unwrap();
        assert!(slow > 10.0 * fast, "{slow} vs {fast}");
    }

    #[test]
    fn adjointness_is_exact() {
        let h = 0.35;
        let grid = default_box(513);
        let sg = Arc::new(make_k_grid(0.05, 12.0, 128).unwrap());
        let p = Potential::square(0.0, 1.0, 2.0).unwrap();
        let table = ModeTable::build(&p, h, &grid, sg.clone()).unwrap();
        let phi = Packet::incoming(3.0, 0.2, 0.0).sample(&grid, h);
        let f = SpectralCoeffs {
            grid: sg.clone(),
            values: sg.nodes.iter().map(|&k| C64::new((-k * k / 8.0).exp(), k.sin())).collect(),
        };
        for fam in [table.unmodified(), table.modified(C64::new(0.05, 0.02), KreinConvention::Corrected).unwrap()] {
            let lhs = grid.inner(&inverse_transform(&table, &fam, &f).unwrap(), &phi);
            let rhs = sg.inner(&f.values, &forward_transform(&table, &fam, &phi).unwrap().values);
            assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm(), "{lhs} {rhs}");
        }
    }

    #[test]
    fn family_sample_matches_jost_eigenfunction() {
        let h = 0.5;
        let grid = default_box(257);
        let sg = Arc::new(make_k_grid(0.5, 4.0, 64).unwrap());
        let p = Potential::square(0.0, 1.0, 2.0).unwrap();
        let table = ModeTable::build(&p, h, &grid, sg.clone()).unwrap();
        let theta = C64::new(0.05, 0.0);
        let fam = table.modified(theta, KreinConvention::Corrected).unwrap();
        for node in [3, 70, 120] {
            let k = sg.nodes[node];
            let direct =
                crate::krein::modified_eigenfunction(&p, h, theta, k, &grid, KreinConvention::Corrected).unwrap();
            let sampled = fam.sample(&table, node);
            let gap = sampled.iter().zip(&direct.values).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
            assert!(gap < 1e-12 * direct.sup_norm(), "node {node}: {gap}");
        }
    }

    #[test]
    fn zero_coefficients_give_zero_state() {
        let grid = default_box(129);
        let sg = Arc::new(make_k_grid(0.05, 6.0, 64).unwrap());
        let p = Potential::square(0.0, 1.0, 2.0).unwrap();
        let table = ModeTable::build(&p, 0.5, &grid, sg.clone()).unwrap();
        let u = inverse_transform(&table, &table.unmodified(), &SpectralCoeffs::zeros(sg)).unwrap();
        assert!(u.iter().all(|z| *z == C64::new(0.0, 0.0)));
    }

    #[test]
    fn leaky_states_are_rejected() {
        let grid = default_box(129);
        let sg = Arc::new(make_k_grid(0.05, 6.0, 64).unwrap());
        let p = Potential::square(0.0, 1.0, 2.0).unwrap();
        let table = ModeTable::build(&p, 0.5, &grid, sg).unwrap();
        let phi = vec![C64::new(1.0, 0.0); grid.n()];
        assert!(matches!(forward_transform(&table, &table.unmodified(), &phi), Err(Error::TailMass { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn forward_is_linear(re in -2.0f64..2.0, im in -2.0f64..2.0, k0 in 1.0f64..4.0) {
            let h = 0.5;
            let grid = default_box(257);
            let sg = Arc::new(make_k_grid(0.05, 8.0, 64).unwrap());
            let p = Potential::square(0.0, 1.0, 2.0).unwrap();
            let table = ModeTable::build(&p, h, &grid, sg).unwrap();
            let fam = table.unmodified();
            let alpha = C64::new(re, im);
            let phi = Packet::incoming(k0, 0.2, 0.0).sample(&grid, h);
            let scaled: Vec<C64> = phi.iter().map(|z| z * alpha).collect();
            let f1 = forward_transform(&table, &fam, &phi).unwrap();
            let f2 = forward_transform(&table, &fam, &scaled).unwrap();
            for (u, v) in f1.values.iter().zip(&f2.values) {
                prop_assert!((u * alpha - v).norm() <= 1e-12 * (1.0 + v.norm()));
            }
        }
    }
}
