//! Stationary wave operators `W_θ = F_θ* F₀`, their inverses, dense
//! matrices and the intertwining and range checks.
//!
//! The quadrature makes `W₀ = F₀* F₀` only approximately the identity. The
//! *completed* operator `W̃_θ = I + (W_θ − W₀)` removes that floor: it equals
//! `W_θ` wherever `F₀* F₀ = I` holds and is exactly `I` at `θ = 0`. Raw and
//! completed forms are both exposed; inverses and propagators use the
//! completed one.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::jost::{GridFunction, InterfaceTrace};
use crate::krein::{interface_residuals, InterfaceResiduals, KreinConvention};
use crate::oracle::{tail_window, DiscreteHamiltonian};
use crate::spectral::{
    forward_transform, forward_unchecked, inverse_transform, relative_gap, EigenFamily, ModeTable, SpectralCoeffs,
};
use crate::C64;

pub const NEUMANN_TOL: f64 = 1e-12;
pub const NEUMANN_MAX_ITER: usize = 200;
pub const DENSE_CAP: usize = 1025;

const ZERO: C64 = C64::new(0.0, 0.0);

/// `W_θ` on one mode table.
#[derive(Clone, Debug)]
pub struct WaveOperator {
    table: Arc<ModeTable>,
    free: EigenFamily,
    modified: EigenFamily,
    delta: EigenFamily,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InverseMethod {
    Neumann,
    Dense,
}

#[derive(Clone, Debug)]
pub struct InverseSolve {
    pub state: Vec<C64>,
    pub method: InverseMethod,
    pub iterations: usize,
}

impl WaveOperator {
    pub fn new(table: Arc<ModeTable>, theta: C64, convention: KreinConvention) -> Result<Self> {
        let free = table.unmodified();
        let modified = table.modified(theta, convention)?;
        let delta = modified.difference(&free);
        Ok(Self { table, free, modified, delta })
    }

    pub fn theta(&self) -> C64 {
        self.modified.theta
    }

    pub fn table(&self) -> &Arc<ModeTable> {
        &self.table
    }

    pub fn free_family(&self) -> &EigenFamily {
        &self.free
    }

    pub fn modified_family(&self) -> &EigenFamily {
        &self.modified
    }

    /// Member-wise `ψ_θ − ψ₀`.
    pub fn delta_family(&self) -> &EigenFamily {
        &self.delta
    }

    /// `F₀ φ`, with the tail-mass precondition.
    pub fn analyze(&self, phi: &[C64]) -> Result<SpectralCoeffs> {
        forward_transform(&self.table, &self.free, phi)
    }

    /// `F_θ* F₀ φ`.
    pub fn apply_raw(&self, phi: &[C64]) -> Result<Vec<C64>> {
        inverse_transform(&self.table, &self.modified, &self.analyze(phi)?)
    }

    /// `F_θ* F₀ φ` without the tail-mass precondition, for derived states.
    pub fn apply_raw_unchecked(&self, phi: &[C64]) -> Vec<C64> {
        let coeffs = forward_unchecked(&self.table, &self.free, phi);
        inverse_transform(&self.table, &self.modified, &coeffs).expect("coefficients from the same table")
    }

    /// `(W̃_θ − I) φ = (F_θ − F₀)* F₀ φ`.
    pub fn deviation(&self, phi: &[C64]) -> Result<Vec<C64>> {
        inverse_transform(&self.table, &self.delta, &self.analyze(phi)?)
    }

    fn deviation_unchecked(&self, phi: &[C64]) -> Vec<C64> {
        let coeffs = forward_unchecked(&self.table, &self.free, phi);
        inverse_transform(&self.table, &self.delta, &coeffs).expect("coefficients from the same table")
    }

    /// `W̃_θ φ`.
    pub fn apply(&self, phi: &[C64]) -> Result<Vec<C64>> {
        let d = self.deviation(phi)?;
        Ok(phi.iter().zip(d).map(|(u, v)| u + v).collect())
    }

    /// `W̃_θ φ` without the tail-mass precondition, for derived states.
    pub fn apply_unchecked(&self, phi: &[C64]) -> Vec<C64> {
        let d = self.deviation_unchecked(phi);
        phi.iter().zip(d).map(|(u, v)| u + v).collect()
    }

    /// Solves `W̃_θ u = φ` by the Neumann series `u ← φ − (W̃_θ − I) u`,
    /// falling back to a dense solve when the series stalls or diverges.
    pub fn apply_inverse(&self, phi: &[C64]) -> Result<InverseSolve> {
        self.inverse_impl(phi, true)
    }

    /// [`Self::apply_inverse`] without the tail-mass precondition, for
    /// states produced by propagation.
    pub fn apply_inverse_unchecked(&self, phi: &[C64]) -> Result<InverseSolve> {
        self.inverse_impl(phi, false)
    }

    /// `F₀ φ` without the tail-mass precondition.
    pub fn analyze_unchecked(&self, phi: &[C64]) -> SpectralCoeffs {
        forward_unchecked(&self.table, &self.free, phi)
    }

    fn inverse_impl(&self, phi: &[C64], checked: bool) -> Result<InverseSolve> {
        let grid = self.table.grid();
        let scale = grid.norm(phi);
        if scale == 0.0 {
            return Ok(InverseSolve { state: phi.to_vec(), method: InverseMethod::Neumann, iterations: 0 });
        }
        // Validates the input once; iterates stay inside the band it spans.
        let mut u = phi.to_vec();
        let mut d = if checked { self.deviation(phi)? } else { self.deviation_unchecked(phi) };
        let mut last = f64::INFINITY;
        for it in 1..=NEUMANN_MAX_ITER {
            let next: Vec<C64> = phi.iter().zip(&d).map(|(p, q)| p - q).collect();
            let inc: Vec<C64> = next.iter().zip(&u).map(|(p, q)| p - q).collect();
            let inc = grid.norm(&inc);
            u = next;
            if inc <= NEUMANN_TOL * scale {
                return Ok(InverseSolve { state: u, method: InverseMethod::Neumann, iterations: it });
            }
            if it > 3 && inc > last {
                break;
            }
            last = inc;
            d = self.deviation_unchecked(&u);
        }
        let dense = self.matrix(WaveMatrixKind::Completed, DENSE_CAP).map_err(|e| {
            Error::InverseFailed(format!("neumann series did not converge and dense fallback failed: {e}"))
        })?;
        let rhs = nalgebra::DVector::from_column_slice(phi);
        let sol = dense
            .matrix
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::InverseFailed("dense wave operator is singular".into()))?;
        Ok(InverseSolve { state: sol.iter().copied().collect(), method: InverseMethod::Dense, iterations: 0 })
    }

    /// `(W̃_θ^{-1} − I) φ`.
    pub fn inverse_deviation(&self, phi: &[C64]) -> Result<Vec<C64>> {
        let inv = self.apply_inverse(phi)?;
        Ok(inv.state.iter().zip(phi).map(|(u, v)| u - v).collect())
    }

    /// Dense matrix on the spatial grid, assembled column by column from the
    /// images of the unit vectors.
    pub fn matrix(&self, kind: WaveMatrixKind, cap: usize) -> Result<OperatorMatrix> {
        let grid = self.table.grid();
        let n = grid.n();
        if n > cap {
            return Err(Error::DenseCap { n, cap });
        }
        let sgrid = self.table.spectral_grid().clone();
        let family = match kind {
            WaveMatrixKind::Raw => &self.modified,
            WaveMatrixKind::Completed => &self.delta,
        };
        let norm = (2.0 * std::f64::consts::PI * self.table.h()).powf(-0.5);
        let columns: Vec<Vec<C64>> = (0..n)
            .into_par_iter()
            .map(|col| {
                // F₀ of the unit vector at `col`.
                let values = (0..sgrid.len())
                    .map(|node| self.free.eval(&self.table, node, col).conj() * grid.step() * norm)
                    .collect();
                let coeffs = SpectralCoeffs { grid: sgrid.clone(), values };
                let mut c = inverse_transform(&self.table, family, &coeffs).expect("same table");
                if kind == WaveMatrixKind::Completed {
                    c[col] += 1.0;
                }
                c
            })
            .collect();
        let matrix = DMatrix::from_fn(n, n, |i, j| columns[j][i]);
        Ok(OperatorMatrix { matrix, h: self.table.h(), theta: self.theta(), provenance: Provenance::WaveOp })
    }

    /// One-sided interface traces `(at a, at b)` of `W_θ φ`.
    pub fn image_traces(&self, phi: &[C64]) -> Result<(InterfaceTrace, InterfaceTrace)> {
        let coeffs = self.analyze(phi)?;
        let sgrid = self.table.spectral_grid();
        let norm = (2.0 * std::f64::consts::PI * self.table.h()).powf(-0.5);
        let zero = InterfaceTrace::default();
        let add = |acc: InterfaceTrace, t: InterfaceTrace, c: C64| InterfaceTrace {
            left: acc.left.add(t.left.scale(c)),
            right: acc.right.add(t.right.scale(c)),
        };
        Ok((0..sgrid.len()).fold((zero, zero), |(ta, tb), node| {
            let c = coeffs.values[node] * sgrid.weights[node] * norm;
            let (a, b) = self.modified.interface_traces(&self.table, node);
            (add(ta, a, c), add(tb, b, c))
        }))
    }

    /// Residuals of the interface conditions for `W_θ φ`, relative to its
    /// sup norm: the testable trace of its range lying in the modified
    /// domain.
    pub fn range_residuals(&self, phi: &[C64]) -> Result<InterfaceResiduals> {
        let (at_a, at_b) = self.image_traces(phi)?;
        let u = GridFunction { values: self.apply_raw(phi)?, derivs: Vec::new(), at_a, at_b };
        // Slopes are compared at the packet's own scale, `|u'| h ~ |k| |u|`.
        Ok(interface_residuals(&u, self.theta(), self.table.h(), 0.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveMatrixKind {
    /// `F_θ* F₀`.
    Raw,
    /// `I + (F_θ − F₀)* F₀`.
    Completed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    WaveOp,
    Identity,
    Composed,
}

/// Dense operator on the spatial grid.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub matrix: DMatrix<C64>,
    pub h: f64,
    pub theta: C64,
    pub provenance: Provenance,
}

impl OperatorMatrix {
    pub fn identity(n: usize, h: f64) -> Self {
        Self { matrix: DMatrix::identity(n, n), h, theta: ZERO, provenance: Provenance::Identity }
    }

    pub fn compose(&self, other: &OperatorMatrix) -> Result<Self> {
        if self.matrix.ncols() != other.matrix.nrows() {
            return Err(invalid("dimension mismatch in composition"));
        }
        Ok(Self {
            matrix: &self.matrix * &other.matrix,
            h: self.h,
            theta: self.theta,
            provenance: Provenance::Composed,
        })
    }

    /// `M − I`.
    pub fn minus_identity(&self) -> DMatrix<C64> {
        let n = self.matrix.nrows();
        &self.matrix - DMatrix::<C64>::identity(n, n)
    }
}

/// Largest singular value from a full SVD.
pub fn spectral_norm_svd(m: &DMatrix<C64>) -> f64 {
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

/// Largest singular value by block power iteration on `MᴴM` from a fixed
/// start, with Rayleigh-Ritz on the block so that clustered top singular
/// values do not stall convergence.
pub fn spectral_norm_power(m: &DMatrix<C64>, max_iter: usize, tol: f64) -> f64 {
    const BLOCK: usize = 8;
    let n = m.ncols();
    let p = BLOCK.min(n);
    let gram = m.adjoint() * m;
    let start = DMatrix::from_fn(n, p, |i, j| {
        C64::new(1.0 + ((i * (j + 3)) % 11) as f64 * 0.1, ((i + 5 * j) % 7) as f64 * 0.05)
    });
    let mut v = start.qr().q();
    let mut est = 0.0;
    for _ in 0..max_iter {
        let z = &gram * &v;
        let ritz = v.adjoint() * &z;
        let top = nalgebra::SymmetricEigen::new(ritz).eigenvalues.iter().copied().fold(0.0, f64::max);
        let next = top.max(0.0).sqrt();
        v = z.qr().q();
        if (next - est).abs() <= tol * next {
            return next;
        }
        est = next;
    }
    est
}

/// `‖H_θ(Wφ) − W(H₀φ)‖/‖H₀φ‖` with the raw operator, `H_θ` from the
/// finite-difference oracle and `H₀` from plain second differences. Norms
/// skip the tail windows at the box ends, where the Dirichlet closure rows
/// act on the small non-decaying remainder of the band-limited image.
pub fn intertwining_residual(op: &WaveOperator, phi: &[C64]) -> Result<f64> {
    let table = op.table();
    let grid = table.grid();
    let h_theta = DiscreteHamiltonian::build(table.potential(), table.h(), op.theta(), grid)?;
    let h_free = DiscreteHamiltonian::build(table.potential(), table.h(), ZERO, grid)?;
    let lhs = h_theta.apply(&op.apply_raw(phi)?);
    // `H₀φ` inherits the decay of `φ` but weights its tails by `(x−x₀)⁴`, so
    // only `φ` itself is held to the tail-mass precondition.
    let h0_phi = h_free.apply(phi);
    let rhs = op.apply_raw_unchecked(&h0_phi);
    let w = tail_window(grid.n());
    let interior = w..grid.n() - w;
    let diff: Vec<C64> = interior.clone().map(|i| lhs[i] - rhs[i]).collect();
    Ok(grid.norm(&diff) / grid.norm(&h0_phi[interior]))
}

/// Norm deviations of one operator on one state.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DeviationReport {
    pub h: f64,
    pub theta_re: f64,
    pub theta_im: f64,
    /// `‖(W̃ − I)φ‖/‖φ‖`.
    pub forward: f64,
    /// `‖(W̃^{-1} − I)φ‖/‖φ‖`.
    pub inverse: f64,
    /// `‖(W_θ − I)φ‖/‖φ‖` for the raw operator, floor included.
    pub raw: f64,
    /// `‖W̃(W̃^{-1}φ) − φ‖/‖φ‖`.
    pub round_trip: f64,
    pub inverse_method: InverseMethod,
}

pub fn deviation_report(op: &WaveOperator, phi: &[C64]) -> Result<DeviationReport> {
    let grid = op.table().grid();
    let scale = grid.norm(phi);
    let rel = |u: &[C64]| grid.norm(u) / scale;
    let forward = rel(&op.deviation(phi)?);
    let inv = op.apply_inverse(phi)?;
    let inv_dev: Vec<C64> = inv.state.iter().zip(phi).map(|(u, v)| u - v).collect();
    let raw = relative_gap(grid, &op.apply_raw(phi)?, phi);
    // The inverse image carries the truncation remainder into the tails.
    let back = op.apply_unchecked(&inv.state);
    Ok(DeviationReport {
        h: op.table().h(),
        theta_re: op.theta().re,
        theta_im: op.theta().im,
        forward,
        inverse: rel(&inv_dev),
        raw,
        round_trip: relative_gap(grid, &back, phi),
        inverse_method: inv.method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jost::SpatialGrid;
    use crate::potential::Potential;
    use crate::spectral::{make_k_grid, Packet};

    fn operator(h: f64, theta: C64, n: usize, n_k: usize) -> (WaveOperator, Vec<C64>) {
        let grid = SpatialGrid::new(-2.0, 3.0, n, 0.0, 1.0).unwrap();
        let sg = Arc::new(make_k_grid(0.05, 12.0, n_k).unwrap());
        let p = Potential::square(0.0, 1.0, 2.0).unwrap();
        let table = Arc::new(ModeTable::build(&p, h, &grid, sg).unwrap());
        let phi = Packet::incoming(3.5, 0.2, 0.0).sample(&grid, h);
        (WaveOperator::new(table, theta, KreinConvention::Corrected).unwrap(), phi)
    }

    #[test]
    fn theta_zero_is_identity() {
        let (op, phi) = operator(0.5, ZERO, 1025, 512);
        assert!(op.deviation(&phi).unwrap().iter().all(|z| *z == ZERO));
        let r = deviation_report(&op, &phi).unwrap();
        assert_eq!(r.forward, 0.0);
        assert_eq!(r.inverse, 0.0);
        assert!(r.raw < 1e-3, "{}", r.raw);
    }

    #[test]
    fn round_trip_and_deviation_size() {
        let h = 0.35;
        let (op, phi) = operator(h, C64::new(h * h * h, 0.0), 1025, 512);
        let r = deviation_report(&op, &phi).unwrap();
        assert!(r.round_trip < 1e-8, "{r:?}");
        assert!(r.forward > 1e-4 && r.forward < 0.5, "{r:?}");
        assert!(r.inverse > 0.5 * r.forward && r.inverse < 2.0 * r.forward, "{r:?}");
        assert_eq!(r.inverse_method, InverseMethod::Neumann);
    }

    #[test]
    fn wave_operator_is_linear() {
        let (op, phi) = operator(0.5, C64::new(0.05, 0.01), 513, 256);
        let alpha = C64::new(0.3, -1.2);
        let scaled: Vec<C64> = phi.iter().map(|z| z * alpha).collect();
        let u = op.apply_raw(&phi).unwrap();
        let v = op.apply_raw(&scaled).unwrap();
        let worst = u.iter().zip(&v).map(|(p, q)| (p * alpha - q).norm()).fold(0.0, f64::max);
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn range_satisfies_interface_conditions() {
        let (op, phi) = operator(0.35, C64::new(0.05, 0.0), 1025, 512);
        let r = op.range_residuals(&phi).unwrap();
        assert!(r.max() < 1e-5, "{r:?}");
    }

    #[test]
    fn intertwining_holds() {
        let h = 0.35;
        let (op, phi) = operator(h, C64::new(h * h * h, 0.0), 2049, 1024);
        let r = intertwining_residual(&op, &phi).unwrap();
        assert!(r < 1e-3, "{r}");
        let (free, _) = operator(h, ZERO, 2049, 1024);
        let r0 = intertwining_residual(&free, &phi).unwrap();
        assert!(r0 < 1e-3, "{r0}");
    }

    #[test]
    fn dense_matrix_agrees_with_apply_and_norms_agree() {
        let (op, phi) = operator(0.5, C64::new(0.1, 0.0), 257, 128);
        let m = op.matrix(WaveMatrixKind::Completed, DENSE_CAP).unwrap();
        let v = &m.matrix * nalgebra::DVector::from_column_slice(&phi);
        let direct = op.apply(&phi).unwrap();
        let gap = v.iter().zip(&direct).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(gap < 1e-10, "{gap}");
        let dev = m.minus_identity();
        let (s, p) = (spectral_norm_svd(&dev), spectral_norm_power(&dev, 5000, 1e-14));
        assert!((s - p).abs() <= 1e-6 * s, "{s} {p}");
        assert!(matches!(op.matrix(WaveMatrixKind::Raw, 100), Err(Error::DenseCap { .. })));
    }

    #[test]
    fn holomorphic_in_theta_entrywise() {
        let h = 0.5;
        let grid = SpatialGrid::new(-2.0, 3.0, 129, 0.0, 1.0).unwrap();
        let sg = Arc::new(make_k_grid(0.05, 8.0, 64).unwrap());
        let p = Potential::square(0.0, 1.0, 2.0).unwrap();
        let table = Arc::new(ModeTable::build(&p, h, &grid, sg).unwrap());
        let theta = C64::new(0.05, 0.02);
        let eps = 1e-4;
        let mat = |t: C64| {
            WaveOperator::new(table.clone(), t, KreinConvention::Corrected)
                .unwrap()
                .matrix(WaveMatrixKind::Raw, DENSE_CAP)
                .unwrap()
                .matrix
        };
        let dx = (mat(theta + eps) - mat(theta - eps)) / C64::new(2.0 * eps, 0.0);
        let dy = (mat(theta + C64::new(0.0, eps)) - mat(theta - C64::new(0.0, eps))) / C64::new(2.0 * eps, 0.0);
        // Cauchy-Riemann: ∂_y = i ∂_x.
        let defect = (&dy - &dx * C64::i()).norm() / dx.norm();
        assert!(defect < 1e-6, "{defect}");
    }
}
