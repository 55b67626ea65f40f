//! Command dispatch: builds grids and data from a [`RunConfig`], runs the
//! requested computation, writes field files and CSV slices, and returns the
//! report.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex;

use crate::domain::{build_grid, DomainKind, DomainSpec, GradedGrid, Grading, KnotPoint, NodeClass, ScalarField};
use crate::error::{Error, Result};
use crate::gauge::{
    boundary_asymptotics_check, check_subharmonic, ebe_residual, hermitian_residual, metric_from_scalar, sigma_distance,
    unitary_triplet, Background, HiggsField,
};
use crate::higgs::{AlphaSource, Coefficient, HiggsData, Polynomial};
use crate::io::config::{Command, RunConfig, Slice, Source, StudyKind};
use crate::io::field_file::{read_field, read_field_file, write_field};
use crate::io::report::{num, Report, Table};
use crate::model::barrier::BarrierParams;
use crate::model::closed_form::{eval_model_phi, eval_sn, un_value};
use crate::model::ode::{invert, solve_mikhaylov_ode, Quadrature};
use crate::solver::cylinder::{default_y_max, limit_data, solve_half_cylinder, CylinderOptions};
use crate::solver::plane::{single_center, solve_knot_plane, PlaneOptions};
use crate::solver::{convergence_study, scalar_residual, solve_limit_surface, SolveReport};
use crate::spectral::eigen_j;

pub const DEFAULT_OUT: &str = "nahmpole-out";

/// Runs a configuration, writing artifacts into its output directory.
pub fn run(cfg: &RunConfig) -> Result<Report> {
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    std::fs::create_dir_all(&out)?;
    let mut rep = Report::new();
    for (k, v) in cfg.echo() {
        rep.set(&format!("config.{k}"), v);
    }
    match cfg.command {
        Command::Model => model(cfg, &out, &mut rep)?,
        Command::Ode => ode(cfg, &out, &mut rep)?,
        Command::Spectrum => spectrum(cfg, &mut rep)?,
        Command::SolveSurface => solve_surface(cfg, &out, &mut rep)?,
        Command::SolveCylinder => solve_cylinder(cfg, &out, &mut rep)?,
        Command::SolvePlane => solve_plane(cfg, &out, &mut rep)?,
        Command::Verify => verify(cfg, &out, &mut rep)?,
        Command::Distance => distance(cfg, &out, &mut rep)?,
        Command::Study => study(cfg, &mut rep)?,
    }
    Ok(rep)
}

fn missing(key: &str) -> Error {
    Error::Config { line: 0, message: format!("missing required key `{key}`") }
}

fn grading(cfg: &RunConfig) -> Grading<f64> {
    Grading { y_exponent: cfg.grading_y, radial_exponent: cfg.grading_r, include_y0: true }
}

fn knots(cfg: &RunConfig) -> Result<Vec<KnotPoint<f64>>> {
    cfg.knots.iter().map(|&(x, y, n)| KnotPoint::at(x, y, n)).collect()
}

fn extent(cfg: &RunConfig, k: usize, default: f64) -> f64 {
    cfg.extents.get(k).copied().unwrap_or(default)
}

fn spec_for(cfg: &RunConfig, kind: DomainKind, y_max: f64) -> Result<DomainSpec<f64>> {
    Ok(match kind {
        DomainKind::OdeLine => DomainSpec::ode_line(y_max),
        DomainKind::LimitSurface => DomainSpec::limit_surface(extent(cfg, 0, 1.0), extent(cfg, 1, 1.0)),
        DomainKind::TorusHalfCylinder => DomainSpec::torus_half_cylinder(extent(cfg, 0, 1.0), extent(cfg, 1, 1.0), y_max),
        DomainKind::AxisymSlab => {
            let mut s = DomainSpec::axisym_slab(extent(cfg, 0, 2.0), y_max, cfg.order);
            if cfg.order == 0 {
                s.knots.clear();
            }
            s
        }
        DomainKind::PlaneHalfSpace => DomainSpec::plane_half_space(extent(cfg, 0, 2.0), y_max, knots(cfg)?),
    })
}

fn grid_for(cfg: &RunConfig, kind: DomainKind, y_max: f64) -> Result<Arc<GradedGrid<f64>>> {
    if cfg.resolution.is_empty() {
        return Err(missing("resolution"));
    }
    Ok(Arc::new(build_grid(&spec_for(cfg, kind, y_max)?, &cfg.resolution, grading(cfg))?))
}

fn coefficient(src: &Source, horizontal: usize) -> Result<Coefficient<f64>> {
    match src {
        Source::Constant(v) => Ok(Coefficient::Constant(*v)),
        Source::File(p) => {
            let f = read_field_file(p)?;
            if f.values.len() != horizontal {
                return Err(Error::invalid(format!(
                    "{} holds {} values but the horizontal grid has {horizontal} nodes",
                    p.display(),
                    f.values.len()
                )));
            }
            Ok(Coefficient::Nodal(f.values))
        }
    }
}

fn polynomial(cfg: &RunConfig) -> Result<Option<Polynomial<f64>>> {
    cfg.poly.as_ref().map(|c| Polynomial::new(c.clone())).transpose()
}

/// Higgs data on `grid`: `α = p(z)` when a polynomial is configured,
/// prescribed coefficients otherwise.
fn data_for(cfg: &RunConfig, grid: &GradedGrid<f64>) -> Result<HiggsData<f64>> {
    if let Some(p) = polynomial(cfg)? {
        let k = if grid.is_axisymmetric() { grid.knots.clone() } else { knots(cfg)? };
        return HiggsData::plane(p, k);
    }
    let nh = grid.horizontal_len();
    let data = HiggsData {
        curvature: coefficient(&cfg.curvature, nh)?,
        alpha: AlphaSource::Field(coefficient(&cfg.alpha_sq, nh)?),
        beta_sq: coefficient(&cfg.beta_sq, nh)?,
        g0_sq: coefficient(&cfg.g0_sq, nh)?,
        knots: vec![],
    };
    data.validate_for(grid)?;
    Ok(data)
}

fn barrier(cfg: &RunConfig) -> Option<BarrierParams<f64>> {
    cfg.barrier.as_ref().map(|b| BarrierParams { a: b.a, a_prime: b.a_prime, a_dprime: b.a_dprime, eps: b.eps })
}

fn axis_of(grid: &GradedGrid<f64>, name: &str) -> Result<usize> {
    let a = match name {
        "y" => grid.vertical_axis(),
        "x" | "r" => (grid.kind != DomainKind::OdeLine).then_some(0),
        "x3" => matches!(grid.kind, DomainKind::LimitSurface | DomainKind::TorusHalfCylinder | DomainKind::PlaneHalfSpace)
            .then_some(1),
        _ => None,
    };
    a.ok_or_else(|| Error::invalid(format!("grid has no `{name}` axis for a slice")))
}

fn axis_name(grid: &GradedGrid<f64>, a: usize) -> &'static str {
    if Some(a) == grid.vertical_axis() {
        "y"
    } else if grid.is_axisymmetric() {
        "r"
    } else if a == 0 {
        "x"
    } else {
        "x3"
    }
}

/// CSV rows of the nodes nearest to the slice plane.
pub fn slice_csv(field: &ScalarField<f64>, slice: &Slice) -> Result<String> {
    let grid = field.grid();
    let a = axis_of(grid, &slice.axis)?;
    let nodes = &grid.axes[a].nodes;
    let k = (0..nodes.len())
        .min_by(|&i, &j| (nodes[i] - slice.value).abs().total_cmp(&(nodes[j] - slice.value).abs()))
        .unwrap_or(0);
    let names: Vec<&str> = (0..grid.axes.len()).map(|b| axis_name(grid, b)).collect();
    let mut s = format!("{},value\n", names.join(","));
    for i in 0..grid.len() {
        let m = grid.unravel(i);
        if m[a] != k {
            continue;
        }
        let coords: Vec<String> = (0..grid.axes.len()).map(|b| num(grid.axes[b].nodes[m[b]])).collect();
        s += &format!("{},{}\n", coords.join(","), num(field.values()[i]));
    }
    Ok(s)
}

fn emit(cfg: &RunConfig, out: &Path, name: &str, field: &ScalarField<f64>, rep: &mut Report) -> Result<()> {
    let path = out.join(format!("{name}.ebf"));
    write_field(&path, field, cfg.encoding)?;
    rep.set(&format!("file.{name}"), path.display());
    for (k, s) in cfg.slices.iter().enumerate() {
        let p = out.join(format!("{name}_slice{k}.csv"));
        std::fs::write(&p, slice_csv(field, s)?)?;
        rep.set(&format!("file.{name}_slice{k}"), p.display());
    }
    Ok(())
}

fn solve_stats(rep: &mut Report, prefix: &str, s: &SolveReport<f64>) {
    rep.set(&format!("{prefix}.iterations"), s.iterations);
    rep.set_num(&format!("{prefix}.final_residual"), s.final_residual);
    rep.set(&format!("{prefix}.all_monotone"), s.all_monotone());
    rep.set(&format!("{prefix}.all_bracketed"), s.all_bracketed());
    rep.set(&format!("{prefix}.linear_iterations"), s.linear_iterations);
}

fn max_residual(res: &[Option<f64>], grid: &GradedGrid<f64>, y_min: f64) -> f64 {
    (0..grid.len())
        .filter(|&i| grid.y(i) >= y_min || grid.kind == DomainKind::LimitSurface)
        .filter_map(|i| res[i])
        .fold(0.0, |m, r| m.max(r.abs()))
}

/// `U_n` on an axisymmetric slab without `y = 0`.
fn model_field(n: usize, grid: &Arc<GradedGrid<f64>>) -> Result<ScalarField<f64>> {
    ScalarField::from_fn(grid.clone(), |i| un_value(n, grid.z(i).re, grid.y(i)))
}

fn model_grid(cfg: &RunConfig, res: &[usize]) -> Result<Arc<GradedGrid<f64>>> {
    let spec = spec_for(cfg, DomainKind::AxisymSlab, cfg.y_max.unwrap_or(2.0))?;
    Ok(Arc::new(build_grid(&spec, res, grading(cfg).excluding_y0())?))
}

fn model_data(n: usize) -> Result<HiggsData<f64>> {
    let mut c = vec![Complex::new(0.0, 0.0); n + 1];
    c[n] = Complex::new(1.0, 0.0);
    let knots = if n == 0 { vec![] } else { vec![KnotPoint::at(0.0, 0.0, n)?] };
    HiggsData::plane(Polynomial::new(c)?, knots)
}

/// Lower edge of the region where model residuals are measured; a node of
/// every dyadic slab with `y_max = 2` and at least 8 vertical cells.
pub const MODEL_Y_MIN: f64 = 0.25;

/// Largest residual of `U_n` over `y ≥ MODEL_Y_MIN`.
pub fn model_residual(n: usize, grid: &Arc<GradedGrid<f64>>) -> Result<f64> {
    let u = model_field(n, grid)?;
    Ok(max_residual(&scalar_residual(&u, &model_data(n)?)?, grid, MODEL_Y_MIN))
}

fn model(cfg: &RunConfig, out: &Path, rep: &mut Report) -> Result<()> {
    let n = cfg.order;
    let res = if cfg.resolution.is_empty() { vec![65, 64] } else { cfg.resolution.clone() };
    let grid = model_grid(cfg, &res)?;
    let u = model_field(n, &grid)?;
    emit(cfg, out, "u_model", &u, rep)?;
    let data = model_data(n)?;
    rep.set("model.n", n);
    rep.set_num("model.h", grid.max_spacing());
    rep.set_num("model.y_min", MODEL_Y_MIN);
    rep.set_num("model.residual_max", max_residual(&scalar_residual(&u, &data)?, &grid, MODEL_Y_MIN));
    let mut t = Table::new("sn", &["psi", "S_n"]);
    for k in 1..=10 {
        let psi = std::f64::consts::FRAC_PI_2 * k as f64 / 10.0;
        t.row(vec![num(psi), num(eval_sn(n, psi))]);
    }
    rep.table(t);
    let metric = metric_from_scalar(&u, Background::from_data(&data, &grid))?;
    let triplet = unitary_triplet(&metric, &HiggsField::from_data(&data, &grid)?)?;
    let (mut phi_err, mut phi1_err) = (0.0f64, 0.0f64);
    for i in 0..grid.len() {
        let (r, y) = (grid.z(i).re, grid.y(i));
        if r <= 0.0 {
            continue;
        }
        let (phi, phi1) = eval_model_phi(n, r.hypot(y), (y / r).atan())?;
        phi_err = phi_err.max((triplet.phi_z.values[i].norm() - phi).abs() / (1.0 + phi));
        if triplet.phi1.valid[i] && y >= MODEL_Y_MIN {
            phi1_err = phi1_err.max((triplet.phi1.values[i].m[0][0].im - phi1).abs());
        }
    }
    rep.set_num("model.phi_z_crosscheck", phi_err);
    rep.set_num("model.phi1_difference", phi1_err);
    rep.set_num("model.unitarity_defect", triplet.unitarity_defect());
    let (m, h, p) = ebe_residual(&triplet).max_where(|i| grid.y(i) >= MODEL_Y_MIN);
    rep.set_num("model.ebe_moment_max", m);
    rep.set_num("model.ebe_holomorphic_max", h);
    rep.set_num("model.ebe_parallel_max", p);
    Ok(())
}

fn ode(cfg: &RunConfig, out: &Path, rep: &mut Report) -> Result<()> {
    let tol = cfg.tol.min(1e-5);
    let s = solve_mikhaylov_ode(tol)?;
    let sqrt2 = std::f64::consts::SQRT_2;
    rep.set_num("ode.rate", s.rate);
    rep.set_num("ode.rate_relative_error", (s.rate - sqrt2).abs() / sqrt2);
    rep.set_num("ode.c", s.c);
    rep.set_num("ode.inversion_defect", s.inversion_defect);
    rep.set_num("ode.first_integral_defect", s.first_integral_defect(&[1e-2, 0.1, 1.0, 3.0])?);
    rep.set_num("ode.u_plus_log_y_at_1e-3", s.eval(1e-3)? + 1e-3f64.ln());
    let a = invert(1.0, Quadrature::GaussKronrod15, tol)?;
    let b = invert(1.0, Quadrature::AdaptiveSimpson, tol)?;
    rep.set_num("ode.u_at_1", a);
    rep.set_num("ode.quadrature_agreement_at_1", (a - b).abs());
    rep.set("ode.monotone_positive", s.is_monotone_positive());
    let mut csv = String::from("y,u,du\n");
    let mut t = Table::new("ode", &["y", "u"]);
    for k in (0..s.y.len()).step_by(40) {
        csv += &format!("{},{},{}\n", num(s.y[k]), num(s.u[k]), num(s.du[k]));
        t.row(vec![num(s.y[k]), num(s.u[k])]);
    }
    let p = out.join("ode.csv");
    std::fs::write(&p, csv)?;
    rep.set("file.ode", p.display());
    rep.table(t);
    Ok(())
}

fn spectrum(cfg: &RunConfig, rep: &mut Report) -> Result<()> {
    let s = eigen_j::<f64>(cfg.order, cfg.mode, cfg.count, cfg.spectral_resolution)?;
    let ind = s.indicial()?;
    rep.set("spectrum.n", s.n);
    rep.set("spectrum.m", s.m);
    rep.set("spectrum.resolution", s.resolution);
    rep.set_num("spectrum.lambda0", s.values[0]);
    rep.set_num("spectrum.boundary_root_plus", ind.boundary[0]);
    rep.set_num("spectrum.boundary_root_minus", ind.boundary[1]);
    let mut t = Table::new("spectrum", &["k", "lambda", "richardson_gap", "delta_plus", "delta_minus"]);
    for k in 0..s.values.len() {
        t.row(vec![
            k.to_string(),
            num(s.values[k]),
            num(s.extrapolation_gap[k]),
            num(ind.delta_plus[k]),
            num(ind.delta_minus[k]),
        ]);
    }
    rep.table(t);
    Ok(())
}

fn solve_surface(cfg: &RunConfig, out: &Path, rep: &mut Report) -> Result<()> {
    let grid = grid_for(cfg, cfg.domain.unwrap_or(DomainKind::LimitSurface), 1.0)?;
    if grid.kind != DomainKind::LimitSurface {
        return Err(Error::invalid("solve-surface needs domain = limit-surface"));
    }
    let data = data_for(cfg, &grid)?;
    let s = solve_limit_surface(&data, grid.clone(), cfg.tol)?;
    rep.set_num("surface.barrier_offset", s.barrier_offset);
    rep.set_num("surface.mean_curvature", s.mean_curvature);
    solve_stats(rep, "monotone", &s.monotone);
    solve_stats(rep, "newton", &s.newton);
    rep.set_num("surface.u_min", s.u.min());
    rep.set_num("surface.u_max", s.u.max());
    emit(cfg, out, "u", &s.u, rep)
}

fn solve_cylinder(cfg: &RunConfig, out: &Path, rep: &mut Report) -> Result<()> {
    let kind = cfg.domain.ok_or_else(|| missing("domain"))?;
    if !matches!(kind, DomainKind::TorusHalfCylinder | DomainKind::OdeLine) {
        return Err(Error::invalid("solve-cylinder needs domain = torus-half-cylinder or ode-line"));
    }
    let y_max = match cfg.y_max {
        Some(y) => y,
        None => {
            let probe = grid_for(cfg, kind, 1.0)?;
            let data = data_for(cfg, &probe)?;
            default_y_max(&data, &limit_data(&data, &probe, 1e-12)?, &probe)
        }
    };
    let grid = grid_for(cfg, kind, y_max)?;
    let data = data_for(cfg, &grid)?;
    let mut opts = CylinderOptions::new(cfg.tol);
    opts.use_limit = cfg.use_limit;
    opts.barrier = barrier(cfg);
    opts.lambda = cfg.lambda;
    if let Some(e) = cfg.eps {
        opts.eps = e;
    }
    if let Some(m) = cfg.max_iterations {
        opts.max_iterations = m;
    }
    let s = solve_half_cylinder(&data, grid.clone(), &opts)?;
    rep.set_num("cylinder.y_max", y_max);
    rep.set("cylinder.barrier_valid", s.barrier_report.is_valid());
    rep.set("cylinder.barrier_violations", s.barrier_report.violations.len());
    rep.set_num("cylinder.barrier_a", s.barriers.params.a);
    rep.set_num("cylinder.barrier_a_prime", s.barriers.params.a_prime);
    solve_stats(rep, "monotone", &s.monotone);
    if let Some(n) = &s.newton {
        solve_stats(rep, "newton", n);
    }
    let constants = (data.curvature.constant_value(), data.beta_sq.constant_value());
    let alpha = match &data.alpha {
        AlphaSource::Field(c) => c.constant_value(),
        AlphaSource::Poly(_) => None,
    };
    if constants == (Some(-1.0), Some(0.0)) && alpha == Some(1.0) {
        let ode = solve_mikhaylov_ode(1e-12)?;
        let mut err = 0.0f64;
        for i in 0..s.u.grid().len() {
            err = err.max((s.u.values()[i] - ode.eval(s.u.grid().y(i))?).abs());
        }
        rep.set_num("cylinder.ode_max_error", err);
    }
    emit(cfg, out, "u", &s.u, rep)?;
    emit(cfg, out, "v", &s.v, rep)
}

fn solve_plane(cfg: &RunConfig, out: &Path, rep: &mut Report) -> Result<()> {
    let p = polynomial(cfg)?.ok_or_else(|| missing("poly"))?;
    let kind = cfg.domain.unwrap_or(DomainKind::PlaneHalfSpace);
    let spec = spec_for(cfg, kind, cfg.y_max.unwrap_or(2.0))?;
    let mut spec = spec;
    if kind == DomainKind::AxisymSlab {
        spec.knots = knots(cfg)?;
        spec.far_field_degree = Some(p.degree());
    }
    if cfg.resolution.is_empty() {
        return Err(missing("resolution"));
    }
    let mut opts = PlaneOptions::new(cfg.tol, cfg.resolution.clone());
    opts.grading = grading(cfg);
    opts.barrier = barrier(cfg);
    opts.lambda = cfg.lambda;
    if let Some(m) = cfg.max_iterations {
        opts.max_iterations = m;
    }
    let s = solve_knot_plane(&p, &spec, &opts)?;
    rep.set("plane.axisymmetric", s.axisymmetric);
    rep.set("plane.barrier_valid", s.barrier_report.is_valid());
    rep.set("plane.barrier_violations", s.barrier_report.violations.len());
    solve_stats(rep, "monotone", &s.monotone);
    if let Some(n) = &s.newton {
        solve_stats(rep, "newton", n);
    }
    if let Some((center, n)) = single_center(&p) {
        let shift = p.leading().norm().ln();
        let g = s.u.grid();
        let mut err = 0.0f64;
        for i in 0..g.len() {
            if g.classify(i) == NodeClass::Interior {
                let r = if s.axisymmetric { g.z(i).re } else { (g.z(i) - center).norm() };
                err = err.max((s.u.values()[i] - (un_value(n, r, g.y(i)) - shift)).abs());
            }
        }
        rep.set_num("plane.model_max_error", err);
        rep.set_num("plane.h", g.max_spacing());
    }
    emit(cfg, out, "u", &s.u, rep)?;
    emit(cfg, out, "v", &s.v, rep)
}

fn verify(cfg: &RunConfig, out: &Path, rep: &mut Report) -> Result<()> {
    let input = cfg.input.as_ref().ok_or_else(|| missing("input"))?;
    let u = read_field(input)?;
    let grid = u.grid().clone();
    let data = data_for(cfg, &grid)?;
    let y_min = cfg.verify_y_min;
    let sr = scalar_residual(&u, &data)?;
    rep.set_num("verify.scalar_residual_max", max_residual(&sr, &grid, y_min));
    let metric = metric_from_scalar(&u, Background::from_data(&data, &grid))?;
    let phi = HiggsField::from_data(&data, &grid)?;
    let hr = hermitian_residual(&metric, &phi)?;
    let gap = (0..grid.len())
        .filter_map(|i| match (hr.values[i], sr[i]) {
            (Some(m), Some(s)) => Some((m.m[0][0].re - s).abs() / (1.0 + s.abs())),
            _ => None,
        })
        .fold(0.0, f64::max);
    rep.set_num("verify.hermitian_vs_scalar", gap);
    match unitary_triplet(&metric, &phi) {
        Ok(t) => {
            rep.set_num("verify.unitarity_defect", t.unitarity_defect());
            let (m, h, p) = ebe_residual(&t).max_where(|i| grid.y(i) >= y_min);
            rep.set_num("verify.ebe_moment_max", m);
            rep.set_num("verify.ebe_holomorphic_max", h);
            rep.set_num("verify.ebe_parallel_max", p);
        }
        Err(e) => rep.set("verify.triplet", format!("unavailable: {e}")),
    }
    match boundary_asymptotics_check(&metric, &data) {
        Ok(a) => {
            rep.set_num("verify.y_exponent", a.y_exponent);
            rep.set_num("verify.y_exponent_min", a.y_exponent_range.0);
            rep.set_num("verify.y_exponent_max", a.y_exponent_range.1);
            rep.set_num("verify.y_coefficient_error", a.coefficient_error);
            rep.set("verify.nahm_pole", a.nahm_pole);
            for k in &a.knots {
                rep.set_num(&format!("verify.knot{}.r_exponent", k.knot), k.r_exponent);
                rep.set_num(&format!("verify.knot{}.coefficient_error", k.knot), k.coefficient_error);
            }
        }
        Err(e) => rep.set("verify.asymptotics", format!("unavailable: {e}")),
    }
    let r = ScalarField::new(grid.clone(), sr.iter().map(|v| v.unwrap_or(0.0)).collect())?;
    emit(cfg, out, "residual", &r, rep)
}

fn distance(cfg: &RunConfig, out: &Path, rep: &mut Report) -> Result<()> {
    let a = read_field(cfg.input.as_ref().ok_or_else(|| missing("input"))?)?;
    let b = read_field(cfg.input2.as_ref().ok_or_else(|| missing("input2"))?)?;
    let ha = metric_from_scalar(&a, Background::flat(a.grid()))?;
    let hb = metric_from_scalar(&b, Background::flat(b.grid()))?;
    let sigma = sigma_distance(&ha, &hb)?;
    rep.set_num("distance.sigma_sup", sigma.max());
    rep.set_num("distance.sigma_min", sigma.min());
    let g0 = coefficient(&cfg.g0_sq, a.grid().horizontal_len())?;
    let sub = check_subharmonic(&sigma, &g0, cfg.tol);
    rep.set_num("distance.subharmonic_min", sub.min);
    rep.set("distance.subharmonic_violations", sub.violations.len());
    rep.set_num("distance.h", a.grid().max_spacing());
    emit(cfg, out, "sigma", &sigma, rep)
}

fn study(cfg: &RunConfig, rep: &mut Report) -> Result<()> {
    if cfg.resolutions.is_empty() {
        return Err(missing("resolutions"));
    }
    let table = match cfg.study {
        StudyKind::Model => convergence_study(&cfg.resolutions, |n| {
            let g = model_grid(cfg, &[n + 1, n])?;
            Ok((g.max_spacing(), model_residual(cfg.order, &g)?))
        })?,
        StudyKind::Plane => {
            let p = polynomial(cfg)?.ok_or_else(|| missing("poly"))?;
            let (_, n) = single_center(&p).ok_or_else(|| Error::UnsupportedData("plane studies need p = c (z - a)^n".into()))?;
            let spec = spec_for(cfg, DomainKind::PlaneHalfSpace, cfg.y_max.unwrap_or(2.0))?;
            let shift = p.leading().norm().ln();
            convergence_study(&cfg.resolutions, |res| {
                let mut opts = PlaneOptions::new(cfg.tol, vec![res + 1, res + 1]);
                opts.grading = grading(cfg);
                let s = solve_knot_plane(&p, &spec, &opts)?;
                let g = s.u.grid();
                let err = (0..g.len())
                    .filter(|&i| g.classify(i) == NodeClass::Interior)
                    .map(|i| (s.u.values()[i] - (un_value(n, g.z(i).re, g.y(i)) - shift)).abs())
                    .fold(0.0, f64::max);
                Ok((g.max_spacing(), err))
            })?
        }
        StudyKind::Cylinder => {
            let ode = solve_mikhaylov_ode(1e-12)?;
            let y_max = cfg.y_max.unwrap_or(12.0);
            convergence_study(&cfg.resolutions, |res| {
                let g = Arc::new(build_grid(&DomainSpec::ode_line(y_max), &[res + 1], grading(cfg))?);
                let s = solve_half_cylinder(&HiggsData::constant(-1.0, 1.0, 0.0), g, &CylinderOptions::new(cfg.tol))?;
                let ug = s.u.grid();
                let mut err = 0.0f64;
                for i in 0..ug.len() {
                    err = err.max((s.u.values()[i] - ode.eval(ug.y(i))?).abs());
                }
                Ok((ug.max_spacing(), err))
            })?
        }
    };
    rep.set("study.kind", cfg.study.name());
    rep.set_num("study.order", table.order);
    let mut t = Table::new("study", &["resolution", "h", "error", "pairwise_order"]);
    for (k, r) in table.rows.iter().enumerate() {
        let pw = if k == 0 { "-".to_string() } else { num(table.pairwise[k - 1]) };
        t.row(vec![r.resolution.to_string(), num(r.h), num(r.error), pw]);
    }
    rep.table(t);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::config::parse_config_str;

    fn tmp(name: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("nahmpole-run-{name}-{}", std::process::id()));
        std::fs::create_dir_all(&d).unwrap();
        d
    }

    fn cfg(text: &str, out: &Path) -> RunConfig {
        let mut c = parse_config_str(text, out).unwrap();
        c.out = Some(out.to_path_buf());
        c
    }

    fn value(rep: &Report, key: &str) -> f64 {
        rep.get(key).unwrap_or_else(|| panic!("{key} missing")).parse().unwrap()
    }

    #[test]
    fn ode_report_has_rate() {
        let d = tmp("ode");
        let rep = run(&cfg("command = ode\ntol = 1e-10\n", &d)).unwrap();
        assert!(value(&rep, "ode.rate_relative_error") < 0.01);
        assert!(rep.render().ends_with("status=ok\n"));
        assert_eq!(rep.get("config.tol"), Some("1e-10"));
    }

    #[test]
    fn solve_then_verify_and_distance() {
        let d = tmp("plane");
        let rep = run(&cfg(
            "command = solve-plane\ntol = 1e-10\ndomain = plane-half-space\nextents = 2\ny_max = 2\nresolution = 65,65\n\
             knot = 0,0,1\npoly = 0,1\nslice = y=0.5\n",
            &d,
        ))
        .unwrap();
        assert!(value(&rep, "plane.model_max_error") < 5e-2);
        assert_eq!(rep.get("monotone.all_monotone"), Some("true"));
        let csv = std::fs::read_to_string(d.join("u_slice0.csv")).unwrap();
        assert!(csv.starts_with("r,y,value\n") && csv.lines().count() == 66);

        let u = d.join("u.ebf");
        let text = format!("command = verify\ntol = 1e-10\npoly = 0,1\ninput = {}\n", u.display());
        let rep = run(&cfg(&text, &d)).unwrap();
        assert!(value(&rep, "verify.hermitian_vs_scalar") < 1e-10);
        assert!(value(&rep, "verify.unitarity_defect") < 1e-10);
        assert_eq!(rep.get("verify.nahm_pole"), Some("true"));

        let text = format!("command = distance\ntol = 1e-10\ninput = {0}\ninput2 = {0}\n", u.display());
        let rep = run(&cfg(&text, &d)).unwrap();
        assert!(value(&rep, "distance.sigma_sup") <= 1e-12);
    }

    #[test]
    fn model_and_spectrum() {
        let d = tmp("model");
        let rep = run(&cfg("command = model\ntol = 1e-10\norder = 1\nresolution = 33,32\n", &d)).unwrap();
        assert!(value(&rep, "model.phi_z_crosscheck") < 1e-12);
        let rep = run(&cfg("command = spectrum\ntol = 1e-10\norder = 0\ncount = 1\nspectral_resolution = 100\n", &d)).unwrap();
        assert!((value(&rep, "spectrum.lambda0") - 6.0).abs() < 1e-4);
    }

    #[test]
    fn missing_keys_are_config_errors() {
        let d = tmp("missing");
        let e = run(&cfg("command = solve-plane\ntol = 1e-10\n", &d)).unwrap_err();
        assert_eq!(e.exit_code(), 1);
    }
}
