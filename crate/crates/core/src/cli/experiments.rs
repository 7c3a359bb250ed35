//! The seven experiments and the acceptance criteria each one decides.
//!
//! Every experiment is a pure function of the config. Parallel work goes
//! through order-preserving `collect`, so reports never depend on the
//! thread count.

use std::sync::Arc;

use rayon::prelude::*;

use crate::dynamics::{
    convergence_study, expansion_report, oracle_run, static_run, time_grid, transport_box, ExpansionReport, PropagatorRun,
    StepwiseEngine,
};
use crate::error::{Context, Result};
use crate::fit::fit_exponent;
use crate::greenfun::{
    boundary_traces, green_g, green_h, jump_report, trace_exponent_sweep, Endpoint, KernelKind, SpectralPoint,
};
use crate::jost::{jost_traces, scattering_from_traces, SpatialGrid};
use crate::krein::{interface_residuals, krein_matrix, krein_resolvent, modified_eigenfunction, KreinConvention};
use crate::oracle::{
    box_doubling_audit, gaussian_on, CN_GUARD, manufactured_audit, oracle_resolvent_apply, oracle_solve_scattering,
    DiscreteHamiltonian,
};
use crate::potential::Potential;
use crate::spectral::{completeness_residual, make_k_grid, ModeTable, Packet, SpectralGrid};
use crate::waveop::{deviation_report, intertwining_residual, WaveOperator};
use crate::C64;

use super::config::{ExperimentConfig, ExperimentName};
use super::report::{Cell, CriterionResult, ExperimentReport, Table};

const CONVENTION: KreinConvention = KreinConvention::Corrected;

/// Decay lengths `h/Im ζ` of the resolvent kernel kept on each side of the
/// barrier in the resolvent comparison.
pub const RESOLVENT_DECAY_LENGTHS: f64 = 20.0;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn pair(z: [f64; 2]) -> C64 {
    C64::new(z[0], z[1])
}

struct Setup<'c> {
    cfg: &'c ExperimentConfig,
    potential: Potential,
}

impl<'c> Setup<'c> {
    fn new(cfg: &'c ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let potential = cfg.potential.build().context(|| "building the potential".into())?;
        Ok(Self { cfg, potential })
    }

    fn grid(&self) -> Result<SpatialGrid> {
        let g = &self.cfg.grid;
        SpatialGrid::new(g.x_min, g.x_max, g.n, self.potential.a(), self.potential.b())
    }

    fn spectral_grid(&self) -> Result<SpectralGrid> {
        let g = &self.cfg.grid;
        make_k_grid(g.k_min_abs, g.k_max, g.n_k)
    }

    fn packet(&self) -> Packet {
        Packet::incoming(self.cfg.packet.momentum, self.cfg.packet.width, self.potential.a())
    }
}

/// Runs one concrete experiment; `All` runs every experiment in order.
pub fn run_experiment(cfg: &ExperimentConfig, name: ExperimentName) -> Result<Vec<ExperimentReport>> {
    let setup = Setup::new(cfg)?;
    name.expand()
        .into_iter()
        .map(|one| {
            let run = match one {
                ExperimentName::JostValidate => jost_validate,
                ExperimentName::TraceSweep => trace_sweep,
                ExperimentName::EigenfunctionCheck => eigenfunction_check,
                ExperimentName::WaveopSweep => waveop_sweep,
                ExperimentName::PropagatorCompare => propagator_compare,
                ExperimentName::NonautonomousConverge => nonautonomous_converge,
                ExperimentName::OracleAudit => oracle_audit,
                ExperimentName::All => unreachable!("expanded above"),
            };
            run(&setup).context(|| format!("experiment {}", one.as_str()))
        })
        .collect()
}

/// Criteria 1-3: unitarity, the Wronskian identity and the Green jumps.
fn jost_validate(s: &Setup) -> Result<ExperimentReport> {
    let name = ExperimentName::JostValidate;
    let tol = &s.cfg.tolerances;
    let (a, b) = (s.potential.a(), s.potential.b());
    let sgrid = s.spectral_grid()?;
    let mut report = ExperimentReport::new(name);

    let mut table = Table::new("scattering", &["h", "k", "unitarity_defect", "literal_identity_defect", "identity_defect_factor4"]);
    let (mut unitarity, mut literal, mut factor4) = (0.0f64, 0.0f64, 0.0f64);
    for &h in &s.cfg.h_list {
        let rows: Vec<[f64; 3]> = sgrid
            .nodes
            .par_iter()
            .map(|&k| {
                let t = jost_traces(&s.potential, h, c(k.abs())).context(|| format!("Jost traces at h={h}, k={k}"))?;
                let sc = scattering_from_traces(k, a, b, &t);
                Ok([sc.unitarity_defect(), sc.literal_identity_defect(h), sc.identity_defect(h, 4.0)])
            })
            .collect::<Result<_>>()?;
        for (&k, r) in sgrid.nodes.iter().zip(&rows) {
            unitarity = unitarity.max(r[0]);
            literal = literal.max(r[1]);
            factor4 = factor4.max(r[2]);
            table.push(vec![h.into(), k.into(), r[0].into(), r[1].into(), r[2].into()]);
        }
    }
    report.tables.push(table);
    report.criteria.push(CriterionResult::at_most(1, "scattering unitarity", name, unitarity, tol.unitarity));
    report.criteria.push(
        CriterionResult::at_most(2, "Wronskian identity (unit factor on k^2/h^2)", name, literal, tol.wronskian_identity)
            .with_detail(format!("with factor 4 the max relative defect is {factor4:.3e}")),
    );

    let mut jumps = Table::new("green_jumps", &["h", "zeta_re", "zeta_im", "endpoint", "kind", "relative_residual"]);
    let grid = s.grid()?;
    let mut worst = 0.0f64;
    for &h in &s.cfg.h_list {
        for &zeta in &s.cfg.jost.green_points {
            let zeta = pair(zeta);
            for y in [Endpoint::A, Endpoint::B] {
                let g = green_g(&s.potential, h, zeta, y, &grid).context(|| format!("G at h={h}, zeta={zeta}"))?;
                let hh = green_h(&s.potential, h, zeta, y, &grid).context(|| format!("H at h={h}, zeta={zeta}"))?;
                for (kernel, kind, label) in [(&g, KernelKind::Value, "value"), (&hh, KernelKind::Slope, "slope")] {
                    let r = jump_report(kernel, y, kind, h).relative_residual;
                    worst = worst.max(r);
                    let ep = match y {
                        Endpoint::A => "a",
                        Endpoint::B => "b",
                    };
                    jumps.push(vec![h.into(), zeta.re.into(), zeta.im.into(), ep.into(), label.into(), r.into()]);
                }
            }
        }
    }
    report.tables.push(jumps);
    report.criteria.push(CriterionResult::at_most(3, "Green jump conditions", name, worst, tol.green_jump));
    Ok(report)
}

/// Criterion 4: growth exponents of the boundary-trace families.
fn trace_sweep(s: &Setup) -> Result<ExperimentReport> {
    let name = ExperimentName::TraceSweep;
    let t = &s.cfg.trace;
    let ks: Vec<f64> = (0..t.k_count)
        .map(|i| t.k_min * (t.k_max / t.k_min).powf(i as f64 / (t.k_count - 1) as f64))
        .collect();
    let fams = trace_exponent_sweep(&s.potential, &s.cfg.h_list, &ks)?;
    let mut report = ExperimentReport::new(name);
    let mut table = Table::new("families", &["family", "asserted", "bound_exponent", "h", "sup_over_k"]);
    let margin = s.cfg.tolerances.trace_slope_margin;
    let mut excess = f64::INFINITY;
    let mut parts = Vec::new();
    for f in &fams {
        for &(h, v) in &f.sups {
            table.push(vec![f.name.into(), (f.asserted as usize).into(), f.bound_exponent.into(), h.into(), v.into()]);
        }
        report.fit(f.name, &f.fit);
        if f.asserted {
            excess = excess.min(f.fit.slope - f.bound_exponent);
            parts.push(format!("{} {:.3}", f.name, f.fit.slope));
        }
    }
    report.tables.push(table);
    report.criteria.push(
        CriterionResult::at_least(4, "trace-estimate slopes minus their bounds", name, excess, -margin)
            .with_detail(parts.join(", ")),
    );
    Ok(report)
}

/// Criteria 5-8: the Krein matrix at θ=0, eigenfunctions against the
/// oracle, interface conditions and the resolvent identity.
fn eigenfunction_check(s: &Setup) -> Result<ExperimentReport> {
    let name = ExperimentName::EigenfunctionCheck;
    let tol = &s.cfg.tolerances;
    let e = &s.cfg.eigen;
    let p = &s.potential;
    let mut report = ExperimentReport::new(name);

    let mut zero = Table::new("krein_zero_theta", &["h", "k", "matrix_rel", "det_rel"]);
    let mut exact = 0.0f64;
    for &h in &s.cfg.h_list {
        for &k in &e.momenta {
            let t = boundary_traces(p, h, SpectralPoint::Limit(k))?;
            let m = krein_matrix(c(0.0), h, &t);
            let scale = 2.0 / (h * h);
            let mat_rel = (m + crate::krein::Mat4::identity() * c(scale)).norm() / scale;
            let det = 16.0 / h.powi(8);
            let det_rel = (m.determinant() - c(det)).norm() / det;
            exact = exact.max(mat_rel).max(det_rel);
            zero.push(vec![h.into(), k.into(), mat_rel.into(), det_rel.into()]);
        }
    }
    report.tables.push(zero);
    report.criteria.push(CriterionResult::at_most(5, "Krein matrix exact at theta=0", name, exact, tol.krein_exact));

    // Oracle comparison on the refined grid at the configured h.
    let fine = s.grid()?.refined(e.refine)?;
    let cases: Vec<(f64, f64)> = e.thetas.iter().flat_map(|&th| e.momenta.iter().map(move |&k| (th, k))).collect();
    let gaps: Vec<(f64, f64)> = cases
        .par_iter()
        .map(|&(th, k)| {
            let psi = modified_eigenfunction(p, e.h, c(th), k, &fine, CONVENTION)?;
            let o = oracle_solve_scattering(p, e.h, c(th), k, &fine)?;
            let gap = psi.values.iter().zip(&o.values).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
            Ok((gap, interface_residuals(&psi, c(th), e.h, k).max()))
        })
        .collect::<Result<_>>()
        .context(|| "eigenfunction against the oracle".into())?;
    let mut eigen = Table::new("eigen_oracle", &["h", "theta", "k", "sup_gap", "interface_residual"]);
    for (&(th, k), &(gap, res)) in cases.iter().zip(&gaps) {
        eigen.push(vec![e.h.into(), th.into(), k.into(), gap.into(), res.into()]);
    }
    report.tables.push(eigen);
    let gap = gaps.iter().map(|g| g.0).fold(0.0, f64::max);
    report.criteria.push(CriterionResult::at_most(6, "eigenfunction vs oracle sup gap", name, gap, tol.eigen_gap));

    // Interface conditions across the h sweep on the default grid.
    let grid = s.grid()?;
    let sweep: Vec<(f64, f64, f64)> = s
        .cfg
        .h_list
        .iter()
        .flat_map(|&h| cases.iter().map(move |&(th, k)| (h, th, k)))
        .collect();
    let residuals: Vec<f64> = sweep
        .par_iter()
        .map(|&(h, th, k)| Ok(interface_residuals(&modified_eigenfunction(p, h, c(th), k, &grid, CONVENTION)?, c(th), h, k).max()))
        .collect::<Result<_>>()?;
    let mut iface = Table::new("interface", &["h", "theta", "k", "residual"]);
    for (&(h, th, k), &r) in sweep.iter().zip(&residuals) {
        iface.push(vec![h.into(), th.into(), k.into(), r.into()]);
    }
    report.tables.push(iface);
    let worst = residuals.iter().chain(gaps.iter().map(|g| &g.1)).copied().fold(0.0, f64::max);
    report.criteria.push(CriterionResult::at_most(7, "interface residuals", name, worst, tol.interface));

    // Resolvent identity: Krein composite against the oracle solve.
    let step = (s.cfg.grid.x_max - s.cfg.grid.x_min) / (s.cfg.grid.n - 1) as f64 / e.refine as f64;
    let theta = c(e.resolvent_theta);
    let mut resolvent = Table::new("resolvent", &["z_re", "z_im", "box_margin", "nodes", "relative_l2_error"]);
    let mut worst = 0.0f64;
    for &z in &e.resolvent_points {
        let z = pair(z);
        let zeta = SpectralPoint::Energy(z).zeta()?;
        let margin = RESOLVENT_DECAY_LENGTHS * e.h / zeta.im;
        let g = SpatialGrid::with_step(p.a() - margin, p.b() + margin, step, p.a(), p.b())?;
        let f = gaussian_on(&g, p.midpoint(), 0.25, 1.0 / e.h);
        let (free, corr) = krein_resolvent(&f, z, theta, e.h, p, &g, CONVENTION).context(|| format!("Krein resolvent at z={z}"))?;
        let krein: Vec<C64> = free.iter().zip(&corr).map(|(u, v)| u + v).collect();
        let ham = DiscreteHamiltonian::build(p, e.h, theta, &g)?;
        let o = oracle_resolvent_apply(&ham, &f, z).context(|| format!("oracle resolvent at z={z}"))?;
        let diff: Vec<C64> = krein.iter().zip(&o).map(|(u, v)| u - v).collect();
        let err = g.norm(&diff) / g.norm(&o);
        worst = worst.max(err);
        resolvent.push(vec![z.re.into(), z.im.into(), margin.into(), g.n().into(), err.into()]);
    }
    report.tables.push(resolvent);
    report.criteria.push(CriterionResult::at_most(8, "Krein resolvent vs oracle", name, worst, tol.resolvent));
    Ok(report)
}

/// Criteria 9-11 over the h sweep with θ from the configured rule.
fn waveop_sweep(s: &Setup) -> Result<ExperimentReport> {
    let name = ExperimentName::WaveopSweep;
    let tol = &s.cfg.tolerances;
    let grid = s.grid()?;
    let sgrid = Arc::new(s.spectral_grid()?);
    let thetas = s.cfg.thetas();
    let mut report = ExperimentReport::new(name);
    let mut table = Table::new(
        "sweep",
        &["h", "theta_re", "theta_im", "completeness", "forward", "inverse", "raw", "round_trip", "intertwining"],
    );
    let mut rows = Vec::new();
    for (&h, &theta) in s.cfg.h_list.iter().zip(&thetas) {
        let row = (|| {
            let table = Arc::new(ModeTable::build(&s.potential, h, &grid, sgrid.clone())?);
            let phi = s.packet().sample(&grid, h);
            let completeness = completeness_residual(&table, &phi)?;
            let op = WaveOperator::new(table, theta, CONVENTION)?;
            let dev = deviation_report(&op, &phi)?;
            let inter = intertwining_residual(&op, &phi)?;
            Ok::<_, crate::Error>((h, theta, completeness, dev, inter))
        })()
        .context(|| format!("wave operator at h={h}"))?;
        rows.push(row);
    }
    for (h, theta, comp, d, inter) in &rows {
        table.push(vec![
            (*h).into(),
            theta.re.into(),
            theta.im.into(),
            (*comp).into(),
            d.forward.into(),
            d.inverse.into(),
            d.raw.into(),
            d.round_trip.into(),
            (*inter).into(),
        ]);
    }
    report.tables.push(table);

    let completeness = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    report.criteria.push(CriterionResult::at_most(9, "completeness", name, completeness, tol.completeness));

    let forward = fit_exponent(&rows.iter().map(|r| (r.0, r.3.forward)).collect::<Vec<_>>())?;
    let inverse = fit_exponent(&rows.iter().map(|r| (r.0, r.3.inverse)).collect::<Vec<_>>())?;
    report.fit("forward_deviation", &forward);
    report.fit("inverse_deviation", &inverse);
    let stderr = forward.stderr.max(inverse.stderr);
    report.criteria.push(
        CriterionResult::at_least(10, "wave-operator deviation slope", name, forward.slope.min(inverse.slope), tol.waveop_slope)
            .and(stderr <= tol.waveop_stderr, &format!("stderr {stderr:.3} exceeds {}", tol.waveop_stderr))
            .with_detail(format!(
                "forward {:.3} +- {:.3}, inverse {:.3} +- {:.3}",
                forward.slope, forward.stderr, inverse.slope, inverse.stderr
            )),
    );

    let inter = rows.iter().map(|r| r.4).fold(0.0, f64::max);
    report.criteria.push(CriterionResult::at_most(11, "intertwining residual", name, inter, tol.intertwining));
    Ok(report)
}

fn expansion_table(rep: &ExpansionReport) -> Table {
    let mut t = Table::new("expansion", &["h", "theta", "horizon", "sup_deviation", "t_at_sup", "max_growth"]);
    for r in &rep.rows {
        t.push(vec![r.h.into(), r.theta.into(), r.horizon.into(), r.sup_deviation.into(), r.t_at_sup.into(), r.max_growth.into()]);
    }
    t
}

/// Grid pair per h for a packet carried up to `horizon`.
fn transport_grids(s: &Setup, h: f64, horizon: f64) -> Result<(SpatialGrid, SpectralGrid)> {
    let g = &s.cfg.grid;
    transport_box(s.potential.a(), s.potential.b(), h, &s.packet(), horizon, g.k_min_abs, g.k_max)
}

/// Criterion 12: conjugated against free propagation, sup over the time grid.
fn propagator_compare(s: &Setup) -> Result<ExperimentReport> {
    let name = ExperimentName::PropagatorCompare;
    let pr = &s.cfg.propagation;
    let times = time_grid(pr.horizon, pr.points);
    let thetas = s.cfg.thetas();
    let mut runs = Vec::new();
    let mut grids = Vec::new();
    for (&h, &theta) in s.cfg.h_list.iter().zip(&thetas) {
        let (grid, sgrid) = transport_grids(s, h, pr.horizon)?;
        let table = Arc::new(ModeTable::build(&s.potential, h, &grid, Arc::new(sgrid))?);
        let phi = s.packet().sample(&grid, h);
        let modified = static_run(&WaveOperator::new(table.clone(), theta, CONVENTION)?, &phi, &times)
            .context(|| format!("conjugated propagation at h={h}"))?;
        let free = static_run(&WaveOperator::new(table, c(0.0), CONVENTION)?, &phi, &times)?;
        runs.push((h, theta.re, modified, free));
        grids.push((h, grid, phi));
    }
    let rep = expansion_report(
        s.cfg.n0,
        &[pr.horizon],
        pr.points,
        &runs,
        |h| grids.iter().find(|g| g.0 == h).expect("grid per h").1.clone(),
        |h| {
            let g = grids.iter().find(|g| g.0 == h).expect("grid per h");
            g.1.norm(&g.2)
        },
        s.potential.sup_norm(),
    )?;
    let mut report = ExperimentReport::new(name);
    report.tables.push(expansion_table(&rep));
    report.fit(format!("sup_deviation_T{}", pr.horizon), &rep.fits[0]);
    report.criteria.push(
        CriterionResult::at_least(12, "autonomous propagator h-slope", name, rep.fits[0].slope, s.cfg.tolerances.propagator_slope)
            .with_detail(format!("stderr {:.3}", rep.fits[0].stderr)),
    );
    Ok(report)
}

/// Criteria 13-14: stepwise convergence in n and the non-autonomous
/// expansion in h over two horizons.
fn nonautonomous_converge(s: &Setup) -> Result<ExperimentReport> {
    let name = ExperimentName::NonautonomousConverge;
    let tol = &s.cfg.tolerances;
    let mut report = ExperimentReport::new(name);

    let cv = &s.cfg.convergence;
    let tp = cv.family.build(&s.potential)?;
    let (grid, sgrid) = transport_grids(s, cv.h, tp.horizon())?;
    let phi = s.packet().sample(&grid, cv.h);
    let theta = s.cfg.theta_at(cv.h)?;
    let mut engine = StepwiseEngine::new(tp, cv.h, theta, CONVENTION, grid, Arc::new(sgrid))?;
    let study = convergence_study(&mut engine, &phi, &cv.n_list, cv.reference).context(|| "stepwise convergence".into())?;
    let mut table = Table::new("convergence", &["n", "error", "envelope", "ratio"]);
    for r in &study.rows {
        table.push(vec![r.n.into(), r.error.into(), r.envelope.into(), (r.error / r.envelope).into()]);
    }
    report.tables.push(table);
    let rate = match &study.fit {
        Some(f) => {
            report.fit("stepwise_error_vs_inverse_n", f);
            f.slope
        }
        None => f64::INFINITY,
    };
    report.criteria.push(
        CriterionResult::at_least(13, "stepwise convergence rate in 1/n", name, rate, tol.stepwise_rate)
            .and(
                study.max_envelope_ratio <= tol.envelope_constant,
                &format!("error/envelope {:.3} exceeds {}", study.max_envelope_ratio, tol.envelope_constant),
            )
            .with_detail(format!(
                "max error/envelope {:.3}, tail decreasing {}",
                study.max_envelope_ratio, study.tail_decreasing
            )),
    );

    let ex = &s.cfg.expansion;
    let t_max = ex.family.horizon;
    let t_min = ex.horizons.iter().copied().fold(f64::INFINITY, f64::min);
    let points = (ex.points_per_unit as f64 * t_max).round() as usize + 1;
    let times = time_grid(t_max, points);
    let n = (ex.cells_per_unit as f64 * t_max).round() as usize;
    let thetas = s.cfg.thetas();
    let mut runs: Vec<(f64, f64, PropagatorRun, PropagatorRun)> = Vec::new();
    let mut grids = Vec::new();
    for (&h, &theta) in s.cfg.h_list.iter().zip(&thetas) {
        let tp = ex.family.build(&s.potential)?;
        let (grid, sgrid) = transport_grids(s, h, t_max)?;
        let phi = s.packet().sample(&grid, h);
        let mut engine = StepwiseEngine::new(tp, h, theta, CONVENTION, grid.clone(), Arc::new(sgrid))?;
        let (modified, free) =
            engine.paired_trajectories(&phi, n, &times).context(|| format!("paired trajectories at h={h}"))?;
        runs.push((h, theta.re, modified, free));
        grids.push((h, grid, phi));
    }
    let min_points = (ex.points_per_unit as f64 * t_min).round() as usize + 1;
    let rep = expansion_report(
        s.cfg.n0,
        &ex.horizons,
        min_points,
        &runs,
        |h| grids.iter().find(|g| g.0 == h).expect("grid per h").1.clone(),
        |h| {
            let g = grids.iter().find(|g| g.0 == h).expect("grid per h");
            g.1.norm(&g.2)
        },
        ex.family.build(&s.potential)?.sup_norm(),
    )?;
    report.tables.push(expansion_table(&rep));
    for (hz, f) in rep.horizons.iter().zip(&rep.fits) {
        report.fit(format!("sup_deviation_T{hz}"), f);
    }
    let slope = rep.fits.iter().map(|f| f.slope).fold(f64::INFINITY, f64::min);
    let bound = s.cfg.n0 - 2.0 - tol.expansion_slope_margin;
    let growth_ok = rep.rows.iter().all(|r| r.max_growth <= rep.growth_bound);
    report.criteria.push(
        CriterionResult::at_least(14, "non-autonomous expansion h-slope", name, slope, bound)
            .and(
                rep.constant_ratio <= tol.horizon_ratio,
                &format!("constant ratio {:.3} exceeds {}", rep.constant_ratio, tol.horizon_ratio),
            )
            .and(growth_ok, "norm growth above the energy bound")
            .with_detail(format!("constant ratio T_max/T_min {:.4}", rep.constant_ratio)),
    );
    Ok(report)
}

/// Criterion 15: the oracle's own convergence, unitarity and box checks.
fn oracle_audit(s: &Setup) -> Result<ExperimentReport> {
    let name = ExperimentName::OracleAudit;
    let tol = &s.cfg.tolerances;
    let o = &s.cfg.oracle;
    let p = &s.potential;
    let mut report = ExperimentReport::new(name);

    let mfg = manufactured_audit(p, o.h, c(o.theta), pair(o.z), &o.steps)?;
    let mut table = Table::new("manufactured", &["step", "bulk_truncation", "interface_truncation", "solution_error"]);
    for r in &mfg.rows {
        table.push(vec![r.0.into(), r.1.into(), r.2.into(), r.3.into()]);
    }
    report.tables.push(table);
    report.fit("bulk_truncation", &mfg.bulk_fit);
    report.fit("solution_error", &mfg.solution_fit);

    let grid = s.grid()?;
    let ham = DiscreteHamiltonian::build(p, o.h, c(0.0), &grid)?;
    let phi = s.packet().sample(&grid, o.h);
    // Steps per unit time at the oracle's own accuracy guard.
    let per_unit = (ham.energy_scale(&phi) / CN_GUARD).ceil() as usize + 1;
    let run = oracle_run(&ham, &phi, &[o.drift_horizon], per_unit)?;
    let norm0 = grid.norm(&phi);
    let drift = (run.norms[0] - norm0).abs() / norm0;

    let doubling_theta = s.cfg.theta_at(o.doubling_h)?;
    let boxed = box_doubling_audit(p, o.doubling_h, doubling_theta, &grid, pair(o.z), o.doubling_time)?;
    let doubling = boxed.resolvent_change.max(boxed.propagation_change);

    let mut audit = Table::new("audit", &["quantity", "value", "bound"]);
    audit.push(vec!["bulk_slope".into(), mfg.bulk_fit.slope.into(), tol.manufactured_slope.into()]);
    audit.push(vec!["norm_drift".into(), drift.into(), tol.norm_drift.into()]);
    audit.push(vec!["box_doubling_resolvent".into(), boxed.resolvent_change.into(), tol.box_doubling.into()]);
    audit.push(vec!["box_doubling_propagation".into(), boxed.propagation_change.into(), tol.box_doubling.into()]);
    audit.push(vec![Cell::from("hermitian_defect"), ham.hermitian_defect().into(), Cell::Num(0.0)]);
    report.tables.push(audit);

    report.criteria.push(
        CriterionResult::at_least(15, "oracle self-audit (manufactured slope)", name, mfg.bulk_fit.slope, tol.manufactured_slope)
            .and(drift <= tol.norm_drift, &format!("norm drift {drift:.3e} exceeds {}", tol.norm_drift))
            .and(doubling <= tol.box_doubling, &format!("box doubling {doubling:.3e} exceeds {}", tol.box_doubling))
            .with_detail(format!("norm drift {drift:.3e}, box doubling {doubling:.3e}")),
    );
    Ok(report)
}
