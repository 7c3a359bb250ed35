//! Banded complex matrices with an LU factorization using partial pivoting.

use crate::error::{Error, Result};
use crate::C64;

/// Square band matrix with `kl` sub- and `ku` super-diagonals. Storage is
/// column-major with `kl` extra rows above the band for pivoting fill.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    data: Vec<C64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        Self { n, kl, ku, ld, data: vec![C64::new(0.0, 0.0); ld * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ld + (self.kl + self.ku + i - j)
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i <= j + self.kl && j <= i + self.ku
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> C64 {
        if self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    /// Sets entry `(i, j)`, which must lie in the declared band.
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band ({}, {})", self.kl, self.ku);
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: C64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band ({}, {})", self.kl, self.ku);
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.data[self.idx(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// Largest `|a_ij - conj(a_ji)|` over the band.
    pub fn hermitian_defect(&self) -> f64 {
        let w = self.kl.max(self.ku);
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in i..(i + w + 1).min(self.n) {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn factor(mut self) -> Result<BandLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut pivots = Vec::with_capacity(n);
        let scale = self.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for j in 0..n {
            let last = (j + kl).min(n - 1);
            let p = (j..=last)
                .max_by(|&r, &s| self.get(r, j).norm().total_cmp(&self.get(s, j).norm()))
                .unwrap_or(j);
            let pivot = self.get(p, j);
            if pivot.norm() <= scale * 1e-300 || !pivot.is_finite() {
                return Err(Error::SingularSystem(format!("zero pivot in column {j}")));
            }
            pivots.push(p);
            let right = (j + ku + kl).min(n - 1);
            if p != j {
                for c in j..=right {
                    let (ip, ij) = (self.idx(p, c), self.idx(j, c));
                    self.data.swap(ip, ij);
                }
            }
            let inv = 1.0 / self.data[self.idx(j, j)];
            for i in j + 1..=last {
                let ii = self.idx(i, j);
                let l = self.data[ii] * inv;
                self.data[ii] = l;
                if l == C64::new(0.0, 0.0) {
                    continue;
                }
                for c in j + 1..=right {
                    let u = self.data[self.idx(j, c)];
                    let k = self.idx(i, c);
                    self.data[k] -= l * u;
                }
            }
        }
        Ok(BandLu { m: self, pivots })
    }
}

/// Factored form `P A = L U` of a [`BandMatrix`].
#[derive(Clone, Debug)]
pub struct BandLu {
    m: BandMatrix,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, rhs: &[C64]) -> Vec<C64> {
        let mut b = rhs.to_vec();
        self.solve_in_place(&mut b);
        b
    }

    pub fn solve_in_place(&self, b: &mut [C64]) {
        let m = &self.m;
        let n = m.n;
        assert_eq!(b.len(), n);
        for j in 0..n {
            b.swap(j, self.pivots[j]);
            let bj = b[j];
            for i in j + 1..=(j + m.kl).min(n - 1) {
                b[i] -= m.data[m.idx(i, j)] * bj;
            }
        }
        for j in (0..n).rev() {
            b[j] /= m.data[m.idx(j, j)];
            let bj = b[j];
            for i in j.saturating_sub(m.ku + m.kl)..j {
                b[i] -= m.data[m.idx(i, j)] * bj;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn solves_tridiagonal_needing_pivots() {
        // Zero diagonal at row 0 forces a row interchange.
        let n = 5;
        let mut a = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            a.set(i, i, if i == 0 { c(0.0, 0.0) } else { c(2.0, 0.5) });
            if i + 1 < n {
                a.set(i, i + 1, c(1.0, -1.0));
                a.set(i + 1, i, c(-1.0, 0.25));
            }
        }
        let x: Vec<C64> = (0..n).map(|i| c(i as f64 + 1.0, -(i as f64))).collect();
        let b = a.mul_vec(&x);
        let got = a.clone().factor().unwrap().solve(&b);
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_is_reported() {
        let a = BandMatrix::zeros(3, 1, 1);
        assert!(matches!(a.factor(), Err(Error::SingularSystem(_))));
    }

    proptest! {
        #[test]
        fn random_band_round_trip(
            kl in 0usize..3, ku in 0usize..3,
            seed in proptest::collection::vec(-1.0..1.0f64, 2 * 12 * 7),
        ) {
            let n = 12;
            let mut a = BandMatrix::zeros(n, kl, ku);
            let mut s = seed.iter();
            for i in 0..n {
                for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                    let re = *s.next().unwrap();
                    let im = *s.next().unwrap();
                    // Diagonal dominance keeps the draw well-conditioned.
                    let d = if i == j { 8.0 } else { 0.0 };
                    a.set(i, j, c(re + d, im));
                }
            }
            let x: Vec<C64> = (0..n).map(|i| c((i as f64).sin(), (i as f64).cos())).collect();
            let b = a.mul_vec(&x);
            let got = a.factor().unwrap().solve(&b);
            for (g, e) in got.iter().zip(&x) {
                prop_assert!((g - e).norm() < 1e-10);
            }
        }
    }
}
