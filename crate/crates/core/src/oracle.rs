//! Finite-difference realization of `-h²Δ_θ + V` on a Dirichlet box, used
//! as brute-force ground truth for resolvents, scattering states and
//! propagation.
//!
//! Each interface sits midway between nodes `p` and `p + 1`. The left piece
//! is continued to a ghost value at `p + 1` and the right piece to a ghost
//! at `p`; averaging and differencing the node/ghost pairs imposes
//! `u(y⁺) = α u(y⁻)` and `u'(y⁺) = β u'(y⁻)` at second order, which keeps the
//! matrix tridiagonal.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fit::{fit_exponent, PowerFit};
use crate::jost::SpatialGrid;
use crate::linalg::{BandLu, BandMatrix};
use crate::potential::Potential;
use crate::C64;

const I: C64 = Complex64 { re: 0.0, im: 1.0 };

/// Box-end tail mass above which a resolvent solve is rejected.
pub const TAIL_TOL: f64 = 1e-6;
/// CN accuracy guard: `dt * ‖Hφ‖/‖φ‖` must not exceed this.
pub const CN_GUARD: f64 = 0.1;
/// Nodes kept between the barrier and each radiation closure.
pub const CLOSURE_MARGIN: usize = 4;

/// `u(y⁺) = value * u(y⁻)` and `u'(y⁺) = slope * u'(y⁻)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InterfaceJump {
    pub value: C64,
    pub slope: C64,
}

impl InterfaceJump {
    /// Conditions at `a` and at `b` for a given `θ`.
    pub fn pair(theta: C64) -> (Self, Self) {
        let at_a = Self { value: (-theta / 2.0).exp(), slope: (-1.5 * theta).exp() };
        let at_b = Self { value: (theta / 2.0).exp(), slope: (1.5 * theta).exp() };
        (at_a, at_b)
    }

    /// Ghost of the left piece at node `p + 1`: `(coef of u_p, coef of u_{p+1})`.
    fn left_ghost(&self) -> (C64, C64) {
        let (al, be) = (self.value, self.slope);
        (-(al - be) / (al + be), 2.0 / (al + be))
    }

    /// Ghost of the right piece at node `p`: `(coef of u_p, coef of u_{p+1})`.
    fn right_ghost(&self) -> (C64, C64) {
        let (al, be) = (self.value, self.slope);
        (2.0 * al * be / (al + be), (al - be) / (al + be))
    }
}

/// Tridiagonal discretization of `-h²Δ_θ + V` with homogeneous Dirichlet
/// closure beyond both box ends.
#[derive(Clone, Debug)]
pub struct DiscreteHamiltonian {
    grid: SpatialGrid,
    h: f64,
    theta: C64,
    matrix: BandMatrix,
}

impl DiscreteHamiltonian {
    pub fn build(p: &Potential, h: f64, theta: C64, grid: &SpatialGrid) -> Result<Self> {
        if (grid.a() - p.a()).abs() > 1e-12 || (grid.b() - p.b()).abs() > 1e-12 {
            return Err(Error::GridMisaligned("grid interfaces differ from the potential's".into()));
        }
        if !(h > 0.0) || !theta.is_finite() {
            return Err(invalid("need h > 0 and finite θ"));
        }
        let n = grid.n();
        let s = h * h / (grid.step() * grid.step());
        let mut m = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            m.set(i, i, C64::new(2.0 * s + p.eval(grid.x(i)), 0.0));
            if i > 0 {
                m.set(i, i - 1, C64::new(-s, 0.0));
            }
            if i + 1 < n {
                m.set(i, i + 1, C64::new(-s, 0.0));
            }
        }
        let (at_a, at_b) = InterfaceJump::pair(theta);
        for (pos, jump) in [(grid.ia(), at_a), (grid.ib(), at_b)] {
            let (l0, l1) = jump.left_ghost();
            let (r0, r1) = jump.right_ghost();
            // Row p: the ghost replaces u_{p+1} in the left stencil.
            m.add(pos, pos, -s * l0);
            m.set(pos, pos + 1, -s * l1);
            // Row p+1: the ghost replaces u_p in the right stencil.
            m.set(pos + 1, pos, -s * r0);
            m.add(pos + 1, pos + 1, -s * r1);
        }
        Ok(Self { grid: grid.clone(), h, theta, matrix: m })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn theta(&self) -> C64 {
        self.theta
    }

    pub fn matrix(&self) -> &BandMatrix {
        &self.matrix
    }

    pub fn apply(&self, u: &[C64]) -> Vec<C64> {
        self.matrix.mul_vec(u)
    }

    /// `scale * H + shift * I`.
    pub fn affine(&self, scale: C64, shift: C64) -> BandMatrix {
        let n = self.grid.n();
        let mut m = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            for j in i.saturating_sub(1)..=(i + 1).min(n - 1) {
                let d = if i == j { shift } else { C64::new(0.0, 0.0) };
                m.set(i, j, scale * self.matrix.get(i, j) + d);
            }
        }
        m
    }

    pub fn hermitian_defect(&self) -> f64 {
        self.matrix.hermitian_defect()
    }

    /// Solves `(H - z) u = f` without any tail check.
    pub fn solve_shifted(&self, z: C64, f: &[C64]) -> Result<Vec<C64>> {
        Ok(self.affine(C64::new(1.0, 0.0), -z).factor()?.solve(f))
    }

    /// Estimate `‖Hφ‖ / ‖φ‖` of the energy scale of a state.
    pub fn energy_scale(&self, phi: &[C64]) -> f64 {
        self.grid.norm(&self.apply(phi)) / self.grid.norm(phi)
    }
}

/// Nodes at each box end that count as tail: 2% of `n`, at least 8.
pub fn tail_window(n: usize) -> usize {
    (n / 50).max(8).min(n / 2)
}

/// Fraction of `Σ|u|²` carried by the outer 2% of nodes (at least 8) at
/// either box end.
pub fn tail_mass(u: &[C64]) -> f64 {
    let n = u.len();
    let w = tail_window(n);
    let total: f64 = u.iter().map(|z| z.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let tail: f64 = u[..w].iter().chain(&u[n - w..]).map(|z| z.norm_sqr()).sum();
    tail / total
}

/// `(H_θ - z)^{-1} f` on the Dirichlet box; rejects solutions whose tail mass
/// shows that the box truncation matters.
pub fn oracle_resolvent_apply(ham: &DiscreteHamiltonian, f: &[C64], z: C64) -> Result<Vec<C64>> {
    if z.im == 0.0 && z.re >= 0.0 {
        return Err(invalid(format!("z = {z} lies on the spectrum")));
    }
    let u = ham.solve_shifted(z, f)?;
    let mass = tail_mass(&u);
    if mass > TAIL_TOL {
        return Err(Error::TailMass { mass, tol: TAIL_TOL });
    }
    Ok(u)
}

/// Scattering state with unit incoming plane wave `e^{ikx/h}` and the
/// coefficients read off the nodes next to the closures.
#[derive(Clone, Debug, Serialize)]
pub struct ScatteringSolve {
    pub k: f64,
    pub values: Vec<C64>,
    pub transmission: C64,
    pub reflection: C64,
}

/// Solves `(H_θ - k²) u = 0` between two radiation closures placed
/// [`CLOSURE_MARGIN`] nodes outside the barrier. The incoming side closes
/// with `(u - inc)_{edge} = E (u - inc)_{edge±1}`, the far side with
/// `u_{edge} = E u_{edge∓1}`, `E = e^{i|k|Δ/h}`. Exterior nodes beyond the
/// closures are filled from the extracted coefficients.
pub fn oracle_solve_scattering(p: &Potential, h: f64, theta: C64, k: f64, grid: &SpatialGrid) -> Result<ScatteringSolve> {
    if k == 0.0 || !k.is_finite() {
        return Err(invalid("k = 0 is excluded"));
    }
    let ham = DiscreteHamiltonian::build(p, h, theta, grid)?;
    let lo = grid
        .ia()
        .checked_sub(CLOSURE_MARGIN - 1)
        .ok_or_else(|| Error::GridMisaligned("no room for the left closure".into()))?;
    let hi = grid.ib() + CLOSURE_MARGIN;
    if hi >= grid.n() {
        return Err(Error::GridMisaligned("no room for the right closure".into()));
    }
    let m = hi - lo + 1;
    let e = (I * (k.abs() * grid.step() / h)).exp();
    let inc = |x: f64| (I * k * x / h).exp();
    let mut a = BandMatrix::zeros(m, 1, 1);
    let mut rhs = vec![C64::new(0.0, 0.0); m];
    let k2 = C64::new(k * k, 0.0);
    for r in 1..m - 1 {
        let i = lo + r;
        for c in r - 1..=r + 1 {
            let shift = if c == r { k2 } else { C64::new(0.0, 0.0) };
            a.set(r, c, ham.matrix().get(i, lo + c) - shift);
        }
    }
    let one = C64::new(1.0, 0.0);
    let (x_lo, x_lo1, x_hi, x_hi1) = (grid.x(lo), grid.x(lo + 1), grid.x(hi), grid.x(hi - 1));
    a.set(0, 0, one);
    a.set(0, 1, -e);
    a.set(m - 1, m - 1, one);
    a.set(m - 1, m - 2, -e);
    if k > 0.0 {
        rhs[0] = inc(x_lo) - e * inc(x_lo1);
    } else {
        rhs[m - 1] = inc(x_hi) - e * inc(x_hi1);
    }
    let local = a.factor()?.solve(&rhs);
    let back = |x: f64| (-I * k * x / h).exp();
    let (transmission, reflection) = if k > 0.0 {
        (local[m - 1] / inc(x_hi), (local[0] - inc(x_lo)) / back(x_lo))
    } else {
        (local[0] / inc(x_lo), (local[m - 1] - inc(x_hi)) / back(x_hi))
    };
    let mut values = vec![C64::new(0.0, 0.0); grid.n()];
    for (i, v) in values.iter_mut().enumerate() {
        let x = grid.x(i);
        *v = if i < lo {
            if k > 0.0 {
                inc(x) + reflection * back(x)
            } else {
                transmission * inc(x)
            }
        } else if i > hi {
            if k > 0.0 {
                transmission * inc(x)
            } else {
                inc(x) + reflection * back(x)
            }
        } else {
            local[i - lo]
        };
    }
    Ok(ScatteringSolve { k, values, transmission, reflection })
}

/// Crank–Nicolson stepping of `i u̇ = H_θ u`, reusable across calls.
pub struct CrankNicolson<'h> {
    ham: &'h DiscreteHamiltonian,
    dt: f64,
    lu: BandLu,
}

impl<'h> CrankNicolson<'h> {
    pub fn new(ham: &'h DiscreteHamiltonian, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(invalid("time step must be positive"));
        }
        let lu = ham.affine(I * (dt / 2.0), C64::new(1.0, 0.0)).factor()?;
        Ok(Self { ham, dt, lu })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, u: &mut Vec<C64>) {
        let hu = self.ham.apply(u);
        for (v, w) in u.iter_mut().zip(&hu) {
            *v -= I * (self.dt / 2.0) * w;
        }
        self.lu.solve_in_place(u);
    }
}

/// `e^{-itH_θ} φ` by `n_t` Crank–Nicolson steps. Rejects step counts with
/// `dt ‖Hφ‖/‖φ‖ > 0.1`.
pub fn oracle_propagate(ham: &DiscreteHamiltonian, phi: &[C64], t: f64, n_t: usize) -> Result<Vec<C64>> {
    if t < 0.0 {
        return Err(invalid("propagation time must be nonnegative"));
    }
    if t == 0.0 {
        return Ok(phi.to_vec());
    }
    let energy = ham.energy_scale(phi);
    let needed = (t * energy / CN_GUARD).ceil() as usize;
    if n_t < needed.max(1) {
        return Err(invalid(format!("n_t = {n_t} too small, accuracy guard needs {needed}")));
    }
    let cn = CrankNicolson::new(ham, t / n_t as f64)?;
    let mut u = phi.to_vec();
    for _ in 0..n_t {
        cn.step(&mut u);
    }
    Ok(u)
}

/// Smooth test function on each side of the barrier satisfying the interface
/// conditions exactly, with analytic first and second derivatives.
pub struct ManufacturedState {
    jumps: (InterfaceJump, InterfaceJump),
    a: f64,
    b: f64,
}

const CORE_WIDTH: f64 = 0.2;
const CORE_MOMENTUM: f64 = 2.0;
const SEAM_WIDTH: f64 = 0.1;

impl ManufacturedState {
    pub fn new(theta: C64, a: f64, b: f64) -> Self {
        Self { jumps: InterfaceJump::pair(theta), a, b }
    }

    /// `(φ, φ', φ'')` of the inner Gaussian `e^{-(x-c)²/w} e^{iκx}`.
    fn core(&self, x: f64) -> [C64; 3] {
        let c = 0.5 * (self.a + self.b);
        let g1 = C64::new(-2.0 * (x - c) / CORE_WIDTH, CORE_MOMENTUM);
        let g2 = -2.0 / CORE_WIDTH;
        let phi = (C64::new(-(x - c).powi(2) / CORE_WIDTH, CORE_MOMENTUM * x)).exp();
        [phi, g1 * phi, (g1 * g1 + g2) * phi]
    }

    /// `(s, s', s'')` of the seam `(x-y) e^{-(x-y)²/w}`, with `s'(y) = 1`.
    fn seam(x: f64, y: f64) -> [f64; 3] {
        let d = x - y;
        let e = (-d * d / SEAM_WIDTH).exp();
        [d * e, e * (1.0 - 2.0 * d * d / SEAM_WIDTH), e * d / SEAM_WIDTH * (4.0 * d * d / SEAM_WIDTH - 6.0)]
    }

    /// `(u, u', u'')` at `x` off the interfaces. Exterior pieces are
    /// `c φ + (d - c) φ'(y) s(x, y)`, which match value factor `c` and slope
    /// factor `d` at `y` relative to the inner piece.
    pub fn eval(&self, x: f64) -> [C64; 3] {
        let core = self.core(x);
        let (ja, jb) = self.jumps;
        let (y, c, d) = if x < self.a {
            (self.a, 1.0 / ja.value, 1.0 / ja.slope)
        } else if x > self.b {
            (self.b, jb.value, jb.slope)
        } else {
            return core;
        };
        let dy = self.core(y)[1];
        let s = Self::seam(x, y);
        let w = (d - c) * dy;
        [c * core[0] + w * s[0], c * core[1] + w * s[1], c * core[2] + w * s[2]]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ManufacturedReport {
    /// `(step, bulk truncation, interface-row truncation, solution error)`.
    pub rows: Vec<(f64, f64, f64, f64)>,
    pub bulk_fit: PowerFit,
    pub solution_fit: PowerFit,
}

/// Refinement study with the [`ManufacturedState`]: bulk truncation error of
/// `H_θ` away from the interface rows, and the error of the resolvent solve
/// `(H_θ - z)^{-1}` applied to the exact right-hand side, over all nodes.
pub fn manufactured_audit(p: &Potential, h: f64, theta: C64, z: C64, steps: &[f64]) -> Result<ManufacturedReport> {
    let ms = ManufacturedState::new(theta, p.a(), p.b());
    let len = p.b() - p.a();
    let mut rows = Vec::with_capacity(steps.len());
    for &dx in steps {
        let grid = SpatialGrid::with_step(p.a() - 2.0 * len, p.b() + 2.0 * len, dx, p.a(), p.b())?;
        let ham = DiscreteHamiltonian::build(p, h, theta, &grid)?;
        let samples: Vec<[C64; 3]> = grid.nodes().map(|x| ms.eval(x)).collect();
        let u: Vec<C64> = samples.iter().map(|s| s[0]).collect();
        let f: Vec<C64> = grid
            .nodes()
            .zip(&samples)
            .map(|(x, s)| -h * h * s[2] + (p.eval(x) - z) * s[0])
            .collect();
        let hu = ham.apply(&u);
        let seam_rows = [grid.ia(), grid.ia() + 1, grid.ib(), grid.ib() + 1];
        let (mut bulk, mut seam) = (0.0f64, 0.0f64);
        // Box-end rows see the Dirichlet closure; the state is negligible there.
        for i in 1..grid.n() - 1 {
            let r = (hu[i] - z * u[i] - f[i]).norm();
            if seam_rows.contains(&i) {
                seam = seam.max(r);
            } else {
                bulk = bulk.max(r);
            }
        }
        let solved = ham.solve_shifted(z, &f)?;
        let err = solved.iter().zip(&u).map(|(s, e)| (s - e).norm()).fold(0.0, f64::max);
        rows.push((grid.step(), bulk, seam, err));
    }
    let bulk_fit = fit_exponent(&rows.iter().map(|r| (r.0, r.1)).collect::<Vec<_>>())?;
    let solution_fit = fit_exponent(&rows.iter().map(|r| (r.0, r.3)).collect::<Vec<_>>())?;
    Ok(ManufacturedReport { rows, bulk_fit, solution_fit })
}

/// Gaussian packet `e^{iκ(x-x₀)} e^{-(x-x₀)²/(4σ²)}` sampled on a grid.
pub fn gaussian_on(grid: &SpatialGrid, center: f64, width: f64, wavenumber: f64) -> Vec<C64> {
    grid.nodes()
        .map(|x| {
            let d = x - center;
            C64::new(-d * d / (4.0 * width * width), wavenumber * d).exp()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoxDoublingReport {
    pub resolvent_change: f64,
    pub propagation_change: f64,
}

/// Relative change of a resolvent solve at `z` and of a short propagation
/// when the box is doubled around the barrier, on the shared nodes.
pub fn box_doubling_audit(
    p: &Potential,
    h: f64,
    theta: C64,
    grid: &SpatialGrid,
    z: C64,
    t: f64,
) -> Result<BoxDoublingReport> {
    let len = grid.x_max() - grid.x_min();
    let wide = grid.widened(len / 2.0, len / 2.0)?;
    let offset = wide.ia() - grid.ia();
    let center = 0.5 * (p.a() + p.b());
    let f_small = gaussian_on(grid, center, 0.25, 1.0 / h);
    let f_wide = gaussian_on(&wide, center, 0.25, 1.0 / h);
    let small = DiscreteHamiltonian::build(p, h, theta, grid)?;
    let big = DiscreteHamiltonian::build(p, h, theta, &wide)?;
    let compare = |u: &[C64], v: &[C64]| {
        let d: f64 = u.iter().enumerate().map(|(i, x)| (x - v[i + offset]).norm_sqr()).sum();
        let n: f64 = u.iter().map(|x| x.norm_sqr()).sum();
        (d / n).sqrt()
    };
    let r_small = oracle_resolvent_apply(&small, &f_small, z)?;
    let r_big = oracle_resolvent_apply(&big, &f_wide, z)?;
    let n_t = (t * small.energy_scale(&f_small) / CN_GUARD).ceil() as usize + 1;
    let p_small = oracle_propagate(&small, &f_small, t, n_t)?;
    let p_big = oracle_propagate(&big, &f_wide, t, n_t)?;
    Ok(BoxDoublingReport {
        resolvent_change: compare(&r_small, &r_big),
        propagation_change: compare(&p_small, &p_big),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jost::unmodified_eigenfunction;

    fn square() -> Potential {
        Potential::square(0.0, 1.0, 2.0).unwrap()
    }

    fn grid() -> SpatialGrid {
        SpatialGrid::new(-2.0, 3.0, 2049, 0.0, 1.0).unwrap()
    }

    #[test]
    fn zero_theta_is_the_standard_laplacian() {
        let p = square();
        let g = grid();
        let ham = DiscreteHamiltonian::build(&p, 0.5, C64::new(0.0, 0.0), &g).unwrap();
        assert!(ham.hermitian_defect() < 1e-12);
        let s = 0.25 / (g.step() * g.step());
        for i in [g.ia(), g.ia() + 1, g.ib(), g.ib() + 1] {
            assert!((ham.matrix().get(i, i + 1) + s).norm() < 1e-9 * s);
            assert!((ham.matrix().get(i + 1, i) + s).norm() < 1e-9 * s);
        }
        let theta = DiscreteHamiltonian::build(&p, 0.5, C64::new(0.05, 0.0), &g).unwrap();
        assert!(theta.hermitian_defect() > 1e-3);
    }

    #[test]
    fn bulk_rows_annihilate_constants() {
        let p = square();
        let g = grid();
        let ham = DiscreteHamiltonian::build(&p, 0.5, C64::new(0.03, 0.0), &g).unwrap();
        let ones = vec![C64::new(1.0, 0.0); g.n()];
        let hu = ham.apply(&ones);
        for i in [10, g.ia() - 2, g.mid_node(), g.ib() + 5, g.n() - 10] {
            assert!((hu[i] - p.eval(g.x(i))).norm() < 1e-6, "row {i}");
        }
    }

    #[test]
    fn free_box_eigenvalues() {
        let p = Potential::zero(0.0, 1.0).unwrap();
        let g = SpatialGrid::new(-2.0, 3.0, 257, 0.0, 1.0).unwrap();
        let h = 0.5;
        let ham = DiscreteHamiltonian::build(&p, h, C64::new(0.0, 0.0), &g).unwrap();
        // Dirichlet walls one step beyond the end nodes.
        let len = (g.n() + 1) as f64 * g.step();
        for m in 1..4 {
            let lam = h * h * (m as f64 * std::f64::consts::PI / len).powi(2);
            let modes: Vec<C64> = (0..g.n())
                .map(|i| C64::new((m as f64 * std::f64::consts::PI * (i + 1) as f64 / (g.n() + 1) as f64).sin(), 0.0))
                .collect();
            let hu = ham.apply(&modes);
            let ratio = g.inner(&modes, &hu).re / g.inner(&modes, &modes).re;
            assert!((ratio - lam).abs() < 1e-3 * lam, "m={m} {ratio} {lam}");
        }
    }

    #[test]
    fn scattering_matches_jost_eigenfunction_at_zero_theta() {
        let p = square();
        let g = grid().refined(3).unwrap();
        for k in [0.8, -1.5, 3.0] {
            let o = oracle_solve_scattering(&p, 0.5, C64::new(0.0, 0.0), k, &g).unwrap();
            let e = unmodified_eigenfunction(&p, 0.5, k, &g).unwrap();
            let gap = o.values.iter().zip(&e.values).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
            assert!(gap < 1e-4, "k={k} gap {gap}");
            assert!((o.transmission.norm_sqr() + o.reflection.norm_sqr() - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn positivity_of_free_resolvent() {
        let p = square();
        let g = grid();
        let ham = DiscreteHamiltonian::build(&p, 0.125, C64::new(0.0, 0.0), &g).unwrap();
        let f: Vec<C64> = gaussian_on(&g, 0.5, 0.2, 0.0);
        let u = oracle_resolvent_apply(&ham, &f, C64::new(-1.0, 0.0)).unwrap();
        assert!(u.iter().all(|v| v.re >= -1e-14 && v.im.abs() < 1e-14));
        let r = ham.apply(&u);
        let res = r.iter().zip(&u).zip(&f).map(|((hu, u), f)| (hu + u - f).norm()).fold(0.0, f64::max);
        assert!(res < 1e-10);
    }

    #[test]
    fn resolvent_rejects_leaky_boxes() {
        let p = square();
        let g = grid();
        let ham = DiscreteHamiltonian::build(&p, 0.5, C64::new(0.0, 0.0), &g).unwrap();
        let f = gaussian_on(&g, 0.5, 0.2, 0.0);
        // Nearly on the spectrum: the solution radiates to the walls.
        let r = oracle_resolvent_apply(&ham, &f, C64::new(4.0, 1e-3));
        assert!(matches!(r, Err(Error::TailMass { .. })));
    }

    #[test]
    fn crank_nicolson_preserves_norm_at_zero_theta() {
        let p = square();
        let g = grid();
        let ham = DiscreteHamiltonian::build(&p, 0.5, C64::new(0.0, 0.0), &g).unwrap();
        let phi = gaussian_on(&g, -0.66, 0.22, 3.5 / 0.5);
        assert!(oracle_propagate(&ham, &phi, 1.0, 10).is_err());
        let n_t = (ham.energy_scale(&phi) / CN_GUARD).ceil() as usize;
        let u = oracle_propagate(&ham, &phi, 1.0, n_t).unwrap();
        assert!((g.norm(&u) - g.norm(&phi)).abs() < 1e-8 * g.norm(&phi));
        assert_eq!(oracle_propagate(&ham, &phi, 0.0, 1).unwrap(), phi);
    }

    #[test]
    fn manufactured_state_satisfies_the_interface_conditions() {
        let theta = C64::new(0.05, 0.02);
        let ms = ManufacturedState::new(theta, 0.0, 1.0);
        let (ja, jb) = InterfaceJump::pair(theta);
        let eps = 1e-9;
        for (y, j) in [(0.0, ja), (1.0, jb)] {
            let (l, r) = (ms.eval(y - eps), ms.eval(y + eps));
            assert!((r[0] - j.value * l[0]).norm() < 1e-7);
            assert!((r[1] - j.slope * l[1]).norm() < 1e-6);
        }
    }

    #[test]
    fn manufactured_convergence_is_second_order() {
        let p = square();
        let rep = manufactured_audit(&p, 0.5, C64::new(0.05, 0.0), C64::new(-1.0, 0.0), &[0.02, 0.01, 0.005, 0.0025])
            .unwrap();
        assert!(rep.bulk_fit.slope >= 1.7, "{:?}", rep);
        assert!(rep.solution_fit.slope >= 1.7, "{:?}", rep);
    }

    #[test]
    fn doubling_the_box_changes_nothing() {
        let p = square();
        let g = SpatialGrid::new(-2.0, 3.0, 1025, 0.0, 1.0).unwrap();
        let r = box_doubling_audit(&p, 0.125, C64::new(0.02, 0.0), &g, C64::new(-1.0, 0.0), 0.1).unwrap();
        assert!(r.resolvent_change <= 1e-6 && r.propagation_change <= 1e-6, "{r:?}");
    }
}
