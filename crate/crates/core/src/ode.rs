//! Adaptive Dormand–Prince 5(4) integrator for the interior Jost system
//! `u' = v, v' = (V(x) - ζ²) u / h²`.

use crate::potential::Potential;
use crate::C64;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// State `(u, u')`.
pub type State = [C64; 2];

/// Integrates the stationary equation across sub-segments of `[a, b]`.
/// `V` is sampled with a one-sided limit from inside the barrier, so that
/// stages landing exactly on `a` or `b` never see the exterior value.
pub struct JostIntegrator<'p> {
    potential: &'p Potential,
    zeta_sq: C64,
    inv_h2: f64,
    lo: f64,
    hi: f64,
    /// Inverse wave-number scale used to weight `u'` in the error norm.
    inv_q: f64,
    rtol: f64,
    step: f64,
    fsal: Option<(f64, State)>,
    pub evaluations: usize,
}

impl<'p> JostIntegrator<'p> {
    pub fn new(potential: &'p Potential, h: f64, zeta: C64, rtol: f64) -> Self {
        let scale = zeta.norm_sqr().max(potential.sup_norm()).max(1e-300).sqrt() / h;
        let len = potential.b() - potential.a();
        Self {
            potential,
            zeta_sq: zeta * zeta,
            inv_h2: 1.0 / (h * h),
            lo: potential.a() + 1e-13 * len,
            hi: potential.b() - 1e-13 * len,
            inv_q: 1.0 / scale,
            rtol,
            step: 0.2 / scale,
            fsal: None,
            evaluations: 0,
        }
    }

    #[inline]
    fn rhs(&mut self, x: f64, y: &State) -> State {
        self.evaluations += 1;
        let v = self.potential.eval(x.clamp(self.lo, self.hi));
        [y[1], (v - self.zeta_sq) * self.inv_h2 * y[0]]
    }

    fn amplitude(&self, y: &State) -> f64 {
        (y[0].norm_sqr() + (y[1] * self.inv_q).norm_sqr()).sqrt()
    }

    /// Advances `y` from `x0` to `x1` (either direction).
    pub fn advance(&mut self, x0: f64, x1: f64, y: State) -> State {
        let span = x1 - x0;
        if span == 0.0 {
            return y;
        }
        let dir = span.signum();
        let mut x = x0;
        let mut y = y;
        let mut k1 = match self.fsal.take() {
            Some((xf, kf)) if xf == x0 => kf,
            _ => self.rhs(x, &y),
        };
        loop {
            let rest = (x1 - x) * dir;
            if rest <= 1e-15 * span.abs() {
                break;
            }
            let last = self.step >= rest;
            let dx = dir * if last { rest } else { self.step };
            let (y_new, k7, err) = self.trial(x, &y, &k1, dx);
            if err <= 1.0 {
                x = if last { x1 } else { x + dx };
                y = y_new;
                k1 = k7;
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !(last && grow < 1.0) {
                    self.step = dx.abs() * grow;
                }
            } else {
                self.step = dx.abs() * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            }
        }
        self.fsal = Some((x1, k1));
        y
    }

    /// Rescales the carried FSAL slope after the caller normalizes the state.
    pub fn rescale(&mut self, factor: f64) {
        if let Some((_, k)) = self.fsal.as_mut() {
            k[0] *= factor;
            k[1] *= factor;
        }
    }

    fn trial(&mut self, x: f64, y: &State, k1: &State, dx: f64) -> (State, State, f64) {
        let comb = |c: &[(f64, &State)]| -> State {
            let mut out = *y;
            for (w, k) in c {
                out[0] += k[0] * (w * dx);
                out[1] += k[1] * (w * dx);
            }
            out
        };
        let k2 = self.rhs(x + C2 * dx, &comb(&[(A21, k1)]));
        let k3 = self.rhs(x + C3 * dx, &comb(&[(A31, k1), (A32, &k2)]));
        let k4 = self.rhs(x + C4 * dx, &comb(&[(A41, k1), (A42, &k2), (A43, &k3)]));
        let k5 = self.rhs(x + C5 * dx, &comb(&[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = self.rhs(
            x + dx,
            &comb(&[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y_new = comb(&[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = self.rhs(x + dx, &y_new);
        let mut e = [C64::new(0.0, 0.0); 2];
        for c in 0..2 {
            e[c] = (k1[c] * E1 + k3[c] * E3 + k4[c] * E4 + k5[c] * E5 + k6[c] * E6 + k7[c] * E7) * dx;
        }
        let scale = self.rtol * self.amplitude(y).max(self.amplitude(&y_new)) + 1e-300;
        let err = (e[0].norm_sqr() + (e[1] * self.inv_q).norm_sqr()).sqrt() / scale;
        (y_new, k7, err)
    }

    pub fn state_amplitude(&self, y: &State) -> f64 {
        self.amplitude(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_plane_wave_in_flat_barrier() {
        // Inside a square barrier with k² > v0 the solution is a plane wave of
        // momentum sqrt(k² - v0).
        let p = Potential::square(0.0, 1.0, 2.0).unwrap();
        let (h, k) = (0.5, 3.0);
        let zeta = C64::new(k, 0.0);
        let q = ((k * k - 2.0)).sqrt() / h;
        let mut ode = JostIntegrator::new(&p, h, zeta, 1e-11);
        let y0 = [C64::new(1.0, 0.0), C64::new(0.0, q)];
        let y1 = ode.advance(0.0, 1.0, y0);
        let exact = C64::new(0.0, q).exp();
        assert!((y1[0] - exact).norm() < 1e-9);
        assert!((y1[1] - exact * C64::new(0.0, q)).norm() < 1e-8 * q);
    }

    #[test]
    fn segments_compose() {
        let p = Potential::smooth(0.0, 1.0, 2.0, 1.0, 0.5).unwrap();
        let zeta = C64::new(1.2, 0.0);
        let y0 = [C64::new(1.0, 0.0), C64::new(0.0, 2.4)];
        let mut one = JostIntegrator::new(&p, 0.5, zeta, 1e-11);
        let direct = one.advance(1.0, 0.0, y0);
        let mut many = JostIntegrator::new(&p, 0.5, zeta, 1e-11);
        let mut y = y0;
        for i in (0..10).rev() {
            y = many.advance((i + 1) as f64 / 10.0, i as f64 / 10.0, y);
        }
        assert!((y[0] - direct[0]).norm() < 1e-8 * direct[0].norm());
    }
}
