//! Barrier potentials supported on `[a, b]` and rank-one time families.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

type ProfileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Profile {
    Square { v0: f64 },
    Smooth { v0: f64, bump_amp: f64 },
    /// Evaluated everywhere, not masked to `[a, b]`, so leaks stay visible.
    Custom(ProfileFn),
}

/// C² bump `(1 - u²)³` on `[lo, hi]`; value, first and second derivative
/// vanish at both edges.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VariationProfile {
    lo: f64,
    hi: f64,
}

impl VariationProfile {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(invalid(format!("variation support [{lo}, {hi}] is empty")));
        }
        Ok(Self { lo, hi })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn local(&self, x: f64) -> Option<(f64, f64)> {
        let half = 0.5 * (self.hi - self.lo);
        let u = (x - 0.5 * (self.lo + self.hi)) / half;
        (u.abs() < 1.0).then_some((u, 1.0 / half))
    }

    pub fn value(&self, x: f64) -> f64 {
        self.local(x).map_or(0.0, |(u, _)| (1.0 - u * u).powi(3))
    }

    pub fn deriv(&self, x: f64) -> f64 {
        self.local(x)
            .map_or(0.0, |(u, du)| -6.0 * u * (1.0 - u * u).powi(2) * du)
    }

    pub fn second_deriv(&self, x: f64) -> f64 {
        self.local(x).map_or(0.0, |(u, du)| {
            let s = 1.0 - u * u;
            (-6.0 * s * s + 24.0 * u * u * s) * du * du
        })
    }
}

#[derive(Clone)]
pub struct Potential {
    a: f64,
    b: f64,
    c_floor: f64,
    profile: Profile,
    variation: Option<(f64, VariationProfile)>,
    sup_norm: f64,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.profile {
            Profile::Square { v0 } => format!("square(v0={v0})"),
            Profile::Smooth { v0, bump_amp } => format!("smooth(v0={v0}, bump={bump_amp})"),
            Profile::Custom(_) => "custom".to_string(),
        };
        f.debug_struct("Potential")
            .field("a", &self.a)
            .field("b", &self.b)
            .field("c_floor", &self.c_floor)
            .field("profile", &kind)
            .field("variation", &self.variation)
            .finish()
    }
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if !(a.is_finite() && b.is_finite() && b > a) {
        return Err(invalid(format!("need finite a < b, got a={a}, b={b}")));
    }
    Ok(())
}

impl Potential {
    pub fn square(a: f64, b: f64, v0: f64) -> Result<Self> {
        check_interval(a, b)?;
        if !(v0 > 0.0 && v0.is_finite()) {
            return Err(invalid(format!("barrier height must be positive, got {v0}")));
        }
        Ok(Self::assemble(a, b, v0, Profile::Square { v0 }))
    }

    /// Square barrier with a declared floor `0 < c_floor <= v0`.
    pub fn square_with_floor(a: f64, b: f64, v0: f64, c_floor: f64) -> Result<Self> {
        let mut p = Self::square(a, b, v0)?;
        if !(c_floor > 0.0 && c_floor <= v0) {
            return Err(invalid(format!("floor {c_floor} must lie in (0, {v0}]")));
        }
        p.c_floor = c_floor;
        Ok(p)
    }

    /// `v0 + bump_amp * sin²(π(x-a)/(b-a))` on `[a, b]`.
    pub fn smooth(a: f64, b: f64, v0: f64, c_floor: f64, bump_amp: f64) -> Result<Self> {
        check_interval(a, b)?;
        if !(c_floor > 0.0 && c_floor <= v0 - bump_amp.abs()) {
            return Err(invalid(format!(
                "floor {c_floor} incompatible with v0={v0}, bump={bump_amp}"
            )));
        }
        Ok(Self::assemble(a, b, c_floor, Profile::Smooth { v0, bump_amp }))
    }

    /// Free degenerate profile V = 0; it violates the positivity floor and
    /// exists only as the reference case for free-space checks.
    pub fn zero(a: f64, b: f64) -> Result<Self> {
        check_interval(a, b)?;
        Ok(Self::assemble(a, b, 0.0, Profile::Square { v0: 0.0 }))
    }

    /// Arbitrary profile with a claimed floor; use [`validate_potential`] to
    /// test the claim and the support.
    pub fn custom<F>(a: f64, b: f64, c_floor: f64, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        check_interval(a, b)?;
        Ok(Self::assemble(a, b, c_floor, Profile::Custom(Arc::new(f))))
    }

    fn assemble(a: f64, b: f64, c_floor: f64, profile: Profile) -> Self {
        let mut p = Self { a, b, c_floor, profile, variation: None, sup_norm: 0.0 };
        p.sup_norm = p.sampled_sup();
        p
    }

    fn sampled_sup(&self) -> f64 {
        match (&self.profile, &self.variation) {
            (Profile::Square { v0 }, None) => *v0,
            (Profile::Smooth { v0, bump_amp }, None) => v0 + bump_amp.max(0.0),
            _ => {
                let len = self.b - self.a;
                let n = 8193;
                (0..n)
                    .map(|i| self.a - len + 3.0 * len * i as f64 / (n - 1) as f64)
                    .map(|x| self.eval(x).abs())
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Same base profile plus `amp * variation(x)`.
    pub fn with_variation(&self, amp: f64, variation: VariationProfile) -> Self {
        let mut p = self.clone();
        p.variation = (amp != 0.0).then_some((amp, variation));
        p.sup_norm = p.sampled_sup();
        p
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn c_floor(&self) -> f64 {
        self.c_floor
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn is_free(&self) -> bool {
        matches!(self.profile, Profile::Square { v0 } if v0 == 0.0) && self.variation.is_none()
    }

    /// The closed interval `[a, b]` counts as inside.
    pub fn eval(&self, x: f64) -> f64 {
        let varied = self.variation.map_or(0.0, |(amp, v)| amp * v.value(x));
        match &self.profile {
            Profile::Custom(f) => f(x) + varied,
            _ if x < self.a || x > self.b => 0.0,
            Profile::Square { v0 } => v0 + varied,
            Profile::Smooth { v0, bump_amp } => {
                let s = (PI * (x - self.a) / (self.b - self.a)).sin();
                v0 + bump_amp * s * s + varied
            }
        }
    }

    /// Rescaled copy `y -> V(scale * y + shift)`, supported on the preimage of
    /// `[a, b]`.
    pub fn rescaled(&self, scale: f64, shift: f64) -> Result<Self> {
        let src = self.clone();
        let a = (self.a - shift) / scale;
        let b = (self.b - shift) / scale;
        Potential::custom(a, b, self.c_floor, move |y| src.eval(scale * y + shift))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub min_inside: f64,
    pub argmin: f64,
    pub max_abs: f64,
    pub leak_max: f64,
    pub leak_at: Option<f64>,
    pub floor_ok: bool,
    pub support_ok: bool,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.floor_ok && self.support_ok
    }
}

/// Sampled check of the floor on `[a, b]` and of the support outside.
pub fn validate_potential(p: &Potential, n_samples: usize) -> Result<ValidationReport> {
    if n_samples < 16 {
        return Err(invalid(format!("need at least 16 samples, got {n_samples}")));
    }
    let (a, b) = (p.a(), p.b());
    let len = b - a;
    let mut min_inside = f64::INFINITY;
    let mut argmin = a;
    let mut max_abs: f64 = 0.0;
    for i in 0..n_samples {
        let x = if i + 1 == n_samples { b } else { a + len * i as f64 / (n_samples - 1) as f64 };
        let v = p.eval(x);
        if v < min_inside {
            min_inside = v;
            argmin = x;
        }
        max_abs = max_abs.max(v.abs());
    }
    let eps = 1e-9 * len;
    let outside = (0..n_samples)
        .flat_map(|i| {
            let s = len * (i + 1) as f64 / n_samples as f64;
            [a - s, b + s]
        })
        .chain([a - eps, b + eps]);
    let mut leak_max: f64 = 0.0;
    let mut leak_at = None;
    for x in outside {
        let v = p.eval(x).abs();
        if v > leak_max {
            leak_max = v;
            leak_at = Some(x);
        }
    }
    Ok(ValidationReport {
        min_inside,
        argmin,
        max_abs,
        leak_max,
        leak_at,
        floor_ok: min_inside >= p.c_floor(),
        support_ok: leak_max == 0.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Linear,
    Sinusoidal,
}

/// Scalar amplitude `s(t)` with `s(0) = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub amp: f64,
    /// Linear: `s(period) = amp`. Sinusoidal: half wave, `s(period/2) = amp`.
    pub period: f64,
}

impl Schedule {
    pub fn at(&self, t: f64) -> f64 {
        match self.kind {
            ScheduleKind::Linear => self.amp * t / self.period,
            ScheduleKind::Sinusoidal => self.amp * (PI * t / self.period).sin(),
        }
    }

    /// Lipschitz constant of the schedule.
    pub fn lipschitz(&self) -> f64 {
        match self.kind {
            ScheduleKind::Linear => self.amp.abs() / self.period,
            ScheduleKind::Sinusoidal => PI * self.amp.abs() / self.period,
        }
    }
}

/// `V(t) = base + s(t) * variation`; `V(t) - V(s)` is supported strictly
/// inside `(a, b)`.
#[derive(Clone, Debug)]
pub struct TimePotential {
    base: Potential,
    variation: VariationProfile,
    schedule: Schedule,
    horizon: f64,
}

impl TimePotential {
    pub fn base(&self) -> &Potential {
        &self.base
    }

    pub fn variation(&self) -> VariationProfile {
        self.variation
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn amplitude(&self, t: f64) -> f64 {
        self.schedule.at(t)
    }

    /// Frozen potential at time `t`.
    pub fn at(&self, t: f64) -> Potential {
        self.frozen(self.amplitude(t))
    }

    pub fn frozen(&self, amp: f64) -> Potential {
        self.base.with_variation(amp, self.variation)
    }

    /// Sup over the sampled horizon of `‖V(t)‖_∞`.
    pub fn sup_norm(&self) -> f64 {
        sample_times(self.horizon)
            .map(|t| self.at(t).sup_norm())
            .fold(0.0, f64::max)
    }

    pub fn is_static(&self) -> bool {
        self.schedule.amp == 0.0
    }
}

fn sample_times(horizon: f64) -> impl Iterator<Item = f64> {
    let n = 512;
    (0..=n).map(move |i| horizon * i as f64 / n as f64)
}

/// Rank-one family whose variation is supported on `[a+margin, b-margin]`.
/// The schedule period equals `horizon`.
pub fn make_time_family(
    base: &Potential,
    interior_margin: f64,
    amp: f64,
    kind: ScheduleKind,
    horizon: f64,
) -> Result<TimePotential> {
    make_time_family_with_period(base, interior_margin, amp, kind, horizon, horizon)
}

/// As [`make_time_family`], with the schedule period decoupled from the
/// horizon so that shorter horizons see a prefix of the same family.
pub fn make_time_family_with_period(
    base: &Potential,
    interior_margin: f64,
    amp: f64,
    kind: ScheduleKind,
    horizon: f64,
    period: f64,
) -> Result<TimePotential> {
    if !(horizon > 0.0 && period > 0.0) {
        return Err(invalid(format!("horizon {horizon} and period {period} must be positive")));
    }
    let lo = base.a() + interior_margin;
    let hi = base.b() - interior_margin;
    if !(interior_margin > 0.0 && lo < hi) {
        return Err(invalid(format!("margin {interior_margin} leaves no interior support")));
    }
    let tp = TimePotential {
        base: base.clone(),
        variation: VariationProfile::new(lo, hi)?,
        schedule: Schedule { kind, amp, period },
        horizon,
    };
    let nx = 1025;
    for t in sample_times(horizon) {
        let v = tp.at(t);
        let min = (0..nx)
            .map(|i| base.a() + (base.b() - base.a()) * i as f64 / (nx - 1) as f64)
            .map(|x| v.eval(x))
            .fold(f64::INFINITY, f64::min);
        if min < base.c_floor() {
            return Err(Error::FloorViolated { t, min, floor: base.c_floor() });
        }
    }
    Ok(tp)
}

/// Config-file description of a barrier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Square {
        a: f64,
        b: f64,
        v0: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c_floor: Option<f64>,
    },
    Smooth { a: f64, b: f64, v0: f64, c_floor: f64, bump_amp: f64 },
}

impl PotentialSpec {
    pub fn build(&self) -> Result<Potential> {
        match *self {
            PotentialSpec::Square { a, b, v0, c_floor: None } => Potential::square(a, b, v0),
            PotentialSpec::Square { a, b, v0, c_floor: Some(c) } => Potential::square_with_floor(a, b, v0, c),
            PotentialSpec::Smooth { a, b, v0, c_floor, bump_amp } => {
                Potential::smooth(a, b, v0, c_floor, bump_amp)
            }
        }
    }
}

impl Default for PotentialSpec {
    fn default() -> Self {
        PotentialSpec::Square { a: 0.0, b: 1.0, v0: 2.0, c_floor: Some(1.0) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeFamilySpec {
    pub margin: f64,
    pub amplitude: f64,
    pub schedule: ScheduleKind,
    pub horizon: f64,
    #[serde(default)]
    pub period: Option<f64>,
}

impl Default for TimeFamilySpec {
    fn default() -> Self {
        Self { margin: 0.1, amplitude: 0.5, schedule: ScheduleKind::Linear, horizon: 1.0, period: None }
    }
}

impl TimeFamilySpec {
    pub fn build(&self, base: &Potential) -> Result<TimePotential> {
        make_time_family_with_period(
            base,
            self.margin,
            self.amplitude,
            self.schedule,
            self.horizon,
            self.period.unwrap_or(self.horizon),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn square_barrier_values() {
        let p = Potential::square(0.0, 1.0, 2.0).unwrap();
        assert_eq!(p.eval(-0.5), 0.0);
        assert_eq!(p.eval(0.5), 2.0);
        assert_eq!(p.eval(1.5), 0.0);
        assert_eq!(p.sup_norm(), 2.0);
        assert_eq!(p.c_floor(), 2.0);
    }

    #[test]
    fn square_barrier_rejects_bad_input() {
        assert!(Potential::square(1.0, 1.0, 2.0).is_err());
        assert!(Potential::square(0.0, 1.0, 0.0).is_err());
        assert!(Potential::square(0.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn smooth_barrier_values() {
        let p = Potential::smooth(0.0, 1.0, 2.0, 1.0, 0.5).unwrap();
        assert!((p.eval(0.5) - 2.5).abs() < 1e-15);
        assert!((p.eval(0.0) - 2.0).abs() < 1e-15);
        let r = validate_potential(&p, 4097).unwrap();
        assert!(r.pass());
        assert!((r.min_inside - 2.0).abs() < 1e-15);
        assert!(Potential::smooth(0.0, 1.0, 2.0, 1.8, 0.5).is_err());
    }

    #[test]
    fn validation_flags_dip_and_leak() {
        let dip = Potential::custom(0.0, 1.0, 1.0, |x| {
            if (0.0..=1.0).contains(&x) {
                if (x - 0.3).abs() < 0.05 { 0.5 } else { 2.0 }
            } else {
                0.0
            }
        })
        .unwrap();
        let r = validate_potential(&dip, 257).unwrap();
        assert!(!r.floor_ok);
        assert!((r.argmin - 0.3).abs() < 0.05);

        let leak = Potential::custom(0.0, 1.0, 1.0, |x| if (0.0..=1.001).contains(&x) { 2.0 } else { 0.0 })
            .unwrap();
        let r = validate_potential(&leak, 64).unwrap();
        assert!(r.floor_ok);
        assert!(!r.support_ok);
        assert!(r.leak_at.unwrap() > 1.0);
        assert!(validate_potential(&leak, 8).is_err());
    }

    #[test]
    fn time_family_basics() {
        let base = Potential::square(0.0, 1.0, 2.0).unwrap();
        let flat = make_time_family(&base, 0.1, 0.0, ScheduleKind::Linear, 2.0).unwrap();
        assert!(flat.is_static());
        assert_eq!(flat.at(1.3).eval(0.5), 2.0);

        let lin = make_time_family(&base, 0.1, 0.5, ScheduleKind::Linear, 2.0).unwrap();
        assert!((lin.amplitude(1.0) - 0.25).abs() < 1e-15);
        assert_eq!(lin.amplitude(0.0), 0.0);
        let v = lin.variation();
        for x in [0.0, 1.0] {
            assert_eq!(v.value(x), 0.0);
            assert_eq!(v.deriv(x), 0.0);
        }
        assert!((v.value(0.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn time_family_floor_violation_reports_time() {
        let base = Potential::square(0.0, 1.0, 2.0).unwrap_or_else(|e| panic!("{e}"));
        let base = Potential::custom(0.0, 1.0, 1.0, move |x| base.eval(x)).unwrap();
        match make_time_family(&base, 0.1, -1.5, ScheduleKind::Linear, 2.0) {
            Err(Error::FloorViolated { t, .. }) => assert!(t > 1.0 && t <= 2.0),
            other => panic!("expected floor violation, got {other:?}"),
        }
    }

    #[test]
    fn variation_derivatives_match_differences() {
        let v = VariationProfile::new(0.1, 0.9).unwrap();
        let d = 1e-5;
        for x in [0.2, 0.37, 0.5, 0.81] {
            let fd1 = (v.value(x + d) - v.value(x - d)) / (2.0 * d);
            let fd2 = (v.deriv(x + d) - v.deriv(x - d)) / (2.0 * d);
            assert!((fd1 - v.deriv(x)).abs() < 1e-7);
            assert!((fd2 - v.second_deriv(x)).abs() < 1e-5);
        }
    }

    #[test]
    fn spec_roundtrip() {
        let json = r#"{"kind":"square","a":0.0,"b":1.0,"v0":2.0,"c_floor":1.0}"#;
        let spec: PotentialSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec, PotentialSpec::default());
        assert!(spec.build().is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn square_always_validates(v0 in 1e-3..50.0f64, a in -3.0..3.0f64, len in 0.1..4.0f64) {
            let p = Potential::square(a, a + len, v0).unwrap();
            let r = validate_potential(&p, 64).unwrap();
            prop_assert!(r.pass(), "{:?}", r);
        }

        #[test]
        fn variation_difference_stays_interior(
            margin in 0.01..0.4f64, amp in 0.0..0.9f64, t in 0.0..1.0f64, s in 0.0..1.0f64, x in -1.0..2.0f64,
        ) {
            let base = Potential::square(0.0, 1.0, 2.0).unwrap();
            let tp = make_time_family(&base, margin, amp, ScheduleKind::Sinusoidal, 1.0).unwrap();
            let diff = tp.at(t).eval(x) - tp.at(s).eval(x);
            if x <= margin || x >= 1.0 - margin {
                prop_assert_eq!(diff, 0.0);
            }
            let v = tp.variation();
            prop_assert_eq!(v.value(0.0), 0.0);
            prop_assert_eq!(v.deriv(1.0), 0.0);
        }
    }
}
