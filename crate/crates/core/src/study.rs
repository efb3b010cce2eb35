//! Dyadic refinement studies: per-level solves, error norms, convergence
//! orders, qualitative verdicts, and plot-ready CSV emission.
//!
//! Levels are indexed from zero with 2^(level+1) spans per direction, so a
//! study always starts at two spans and doubles from there. All emitters
//! iterate in fixed orders and print floats through the shortest-roundtrip
//! formatter, which makes reruns byte-identical.

use crate::biharmonic::{
    assemble, manufactured, measure_errors, solve, BiharmonicError, BiharmonicProblem,
    ErrorReport, ReferenceField,
};
use crate::c1space::{
    build_c0_space, build_c1_basis_with, relation_sample_rows, trace_component_dims,
    BoundaryCondition, C0Space, C1SpaceError, DEFAULT_CANDIDATE_TOL,
};
use crate::geometry::{GeometryError, InterfaceFrame, MultiPatchGeometry};
use crate::gluing::{
    all_gluing_data, classify_as_g1, AsG1Report, GluingData, GluingError, DEFAULT_AS_TOL,
};
use crate::splines::SplineSpace1D;
use std::fmt::Write as _;
use thiserror::Error;

/// A run is optimal when the final-interval H2 order reaches the expected
/// slope minus this slack.
pub const OPTIMAL_SLOPE_SLACK: f64 = 0.25;

/// A run is locked when the error decreases by less than this fraction per
/// level on the final interval.
pub const LOCKED_DECREASE: f64 = 0.10;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Space(#[from] C1SpaceError),
    #[error(transparent)]
    Gluing(#[from] GluingError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solve(#[from] BiharmonicError),
    #[error("trace dimensions need a single-interface geometry (found {0} interfaces)")]
    NotSingleInterface(usize),
    #[error("no manufactured problem for geometry {0:?}")]
    NoProblem(String),
}

/// Spans per direction at a refinement level.
pub fn dyadic_spans(level: usize) -> usize {
    2 << level
}

/// Qualitative outcome of a refinement study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyVerdict {
    Optimal,
    Suboptimal,
    Locked,
}

impl std::fmt::Display for StudyVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StudyVerdict::Optimal => "OPTIMAL",
            StudyVerdict::Suboptimal => "SUBOPTIMAL",
            StudyVerdict::Locked => "LOCKED",
        })
    }
}

/// One refinement level of a study.
#[derive(Debug, Clone)]
pub struct LevelRecord {
    pub level: usize,
    pub spans: usize,
    pub h: f64,
    pub dim_v0: usize,
    pub dim_v1: usize,
    /// Penalty spectrum over the coupled block, ascending.
    pub penalty_spectrum: Vec<f64>,
    /// Eigenvalue ratio across the chosen null split.
    pub gap_ratio: f64,
    pub split_ambiguous: bool,
    pub null_dim: usize,
    pub errors: Option<ErrorReport>,
    /// Solve failure for this level; the study continues.
    pub failure: Option<String>,
}

/// A full refinement study for one (geometry, p, r) cell.
#[derive(Debug, Clone)]
pub struct StudyResult {
    pub geometry: String,
    pub p: usize,
    pub r: usize,
    pub levels: Vec<LevelRecord>,
    /// Orders between consecutive levels; entry i compares levels i-1 and i.
    pub eoc_l2: Vec<Option<f64>>,
    pub eoc_h2: Vec<Option<f64>>,
    /// None when the final interval has no error pair to judge.
    pub verdict: Option<StudyVerdict>,
}

/// Discrete stand-in for an exact solution: the same problem solved in a
/// strictly richer space (one extra dyadic level, degree p+1, regularity p-1).
pub struct OverkillReference<'g> {
    pub space: C0Space<'g>,
    pub raw: Vec<f64>,
}

/// Build the overkill reference for a study of `levels` levels at degree `p`.
pub fn overkill_reference<'g>(
    geom: &'g MultiPatchGeometry,
    problem: &BiharmonicProblem,
    p: usize,
    levels: usize,
) -> Result<OverkillReference<'g>, StudyError> {
    overkill_reference_with(geom, problem, p, levels, DEFAULT_CANDIDATE_TOL)
}

fn overkill_reference_with<'g>(
    geom: &'g MultiPatchGeometry,
    problem: &BiharmonicProblem,
    p: usize,
    levels: usize,
    candidate_tol: f64,
) -> Result<OverkillReference<'g>, StudyError> {
    let degree = p + 1;
    let spans = 2 << levels;
    let gluings = all_gluing_data(geom)?;
    let space = build_c0_space(geom, degree, degree - 2, spans, BoundaryCondition::Clamped)?;
    let basis = build_c1_basis_with(&space, &gluings, candidate_tol)?;
    let system = assemble(problem, &space)?;
    let sol = solve(&system, &space, &basis)?;
    Ok(OverkillReference {
        space,
        raw: sol.raw,
    })
}

/// Run one (geometry, p, r) study cell over `levels` dyadic levels.
///
/// Space construction failures abort the study; solver failures are recorded
/// on their level and the remaining levels still run.
pub fn run_study(
    geom: &MultiPatchGeometry,
    geometry_name: &str,
    p: usize,
    r: usize,
    levels: usize,
    problem: &BiharmonicProblem,
    reference: Option<&OverkillReference>,
) -> Result<StudyResult, StudyError> {
    run_study_with(
        geom,
        geometry_name,
        p,
        r,
        levels,
        problem,
        reference,
        DEFAULT_CANDIDATE_TOL,
    )
}

/// [`run_study`] with an explicit candidate cut for null-space selection.
#[allow(clippy::too_many_arguments)]
pub fn run_study_with(
    geom: &MultiPatchGeometry,
    geometry_name: &str,
    p: usize,
    r: usize,
    levels: usize,
    problem: &BiharmonicProblem,
    reference: Option<&OverkillReference>,
    candidate_tol: f64,
) -> Result<StudyResult, StudyError> {
    if problem.exact.is_none() && reference.is_none() {
        return Err(StudyError::NoProblem(geometry_name.to_string()));
    }
    let gluings = all_gluing_data(geom)?;
    let mut records = Vec::with_capacity(levels);
    for level in 0..levels {
        let spans = dyadic_spans(level);
        let space = build_c0_space(geom, p, r, spans, BoundaryCondition::Clamped)?;
        let basis = build_c1_basis_with(&space, &gluings, candidate_tol)?;
        let (errors, failure) = match solve_level(problem, &space, &basis, reference) {
            Ok(errors) => (Some(errors), None),
            Err(e) => (None, Some(e.to_string())),
        };
        records.push(LevelRecord {
            level,
            spans,
            h: 1.0 / spans as f64,
            dim_v0: space.dim,
            dim_v1: basis.dim_v1,
            gap_ratio: basis.spectrum.ratio_at(basis.null_dim),
            penalty_spectrum: basis.spectrum.eigenvalues.clone(),
            split_ambiguous: basis.ambiguous,
            null_dim: basis.null_dim,
            errors,
            failure,
        });
    }

    let eoc = |pick: fn(&ErrorReport) -> f64| -> Vec<Option<f64>> {
        let mut out = vec![None; records.len()];
        for i in 1..records.len() {
            if let (Some(a), Some(b)) = (&records[i - 1].errors, &records[i].errors) {
                out[i] = Some((pick(a) / pick(b)).log2());
            }
        }
        out
    };
    let eoc_l2 = eoc(|e| e.l2);
    let eoc_h2 = eoc(|e| e.h2);

    let verdict = match (records.len() >= 2, eoc_h2.last().copied().flatten()) {
        (true, Some(last)) => {
            if last >= (p - 1) as f64 - OPTIMAL_SLOPE_SLACK {
                Some(StudyVerdict::Optimal)
            } else if last <= -(1.0f64 - LOCKED_DECREASE).log2() {
                Some(StudyVerdict::Locked)
            } else {
                Some(StudyVerdict::Suboptimal)
            }
        }
        _ => None,
    };

    Ok(StudyResult {
        geometry: geometry_name.to_string(),
        p,
        r,
        levels: records,
        eoc_l2,
        eoc_h2,
        verdict,
    })
}

fn solve_level(
    problem: &BiharmonicProblem,
    space: &C0Space,
    basis: &crate::c1space::C1Basis,
    reference: Option<&OverkillReference>,
) -> Result<ErrorReport, BiharmonicError> {
    let system = assemble(problem, space)?;
    let sol = solve(&system, space, basis)?;
    let field = match (problem.exact.as_ref(), reference) {
        (Some(exact), _) => ReferenceField::Exact(exact),
        (None, Some(r)) => ReferenceField::Discrete {
            space: &r.space,
            raw: &r.raw,
        },
        (None, None) => unreachable!("run_study rejects this combination at entry"),
    };
    measure_errors(space, &sol.raw, &field)
}

/// Study of a named catalog geometry with its manufactured problem, building
/// the overkill reference when no closed form exists.
pub fn run_named_study(
    geom: &MultiPatchGeometry,
    name: &str,
    p: usize,
    r: usize,
    levels: usize,
) -> Result<StudyResult, StudyError> {
    run_named_study_with(geom, name, p, r, levels, DEFAULT_CANDIDATE_TOL)
}

/// [`run_named_study`] with an explicit candidate cut for null-space
/// selection.
pub fn run_named_study_with(
    geom: &MultiPatchGeometry,
    name: &str,
    p: usize,
    r: usize,
    levels: usize,
    candidate_tol: f64,
) -> Result<StudyResult, StudyError> {
    let problem = manufactured(name).ok_or_else(|| StudyError::NoProblem(name.to_string()))?;
    let reference = match problem.exact {
        Some(_) => None,
        None => Some(overkill_reference_with(
            geom,
            &problem,
            p,
            levels,
            candidate_tol,
        )?),
    };
    run_study_with(
        geom,
        name,
        p,
        r,
        levels,
        &problem,
        reference.as_ref(),
        candidate_tol,
    )
}

/// One row of a trace-dimension table.
#[derive(Debug, Clone)]
pub struct TraceDimsRecord {
    pub level: usize,
    pub spans: usize,
    pub g0: usize,
    pub g1: usize,
    pub dim_v1: usize,
    pub ambiguous: bool,
    pub theory_g0: Option<usize>,
    pub theory_g1: Option<usize>,
}

fn dim1(p: usize, r: usize, n: usize) -> usize {
    SplineSpace1D::new(p, r, n).dim()
}

/// Interface value/derivative trace dimensions predicted from the classified
/// gluing degrees, when the single-interface characterization applies
/// (first-order smoothness with known data degrees).
pub fn predicted_trace_dims(
    p: usize,
    r: usize,
    spans: usize,
    report: &AsG1Report,
) -> (Option<usize>, Option<usize>) {
    if r != 1 {
        return (None, None);
    }
    let (Some(pa), Some(pb)) = (report.p_alpha, report.p_beta) else {
        return (None, None);
    };
    let pa = pa.max(0) as usize;
    if pa > p {
        return (None, None);
    }
    let g1 = dim1(p - pa, r, spans);
    let g0 = if pb < 0 {
        dim1(p, r, spans)
    } else {
        dim1(p.min(p - pb as usize + 1), r + 1, spans)
    };
    (Some(g0), Some(g1))
}

/// Measured and predicted trace-component dimensions per level, on the
/// boundary-free space of a single-interface geometry.
pub fn run_trace_dims(
    geom: &MultiPatchGeometry,
    p: usize,
    r: usize,
    levels: usize,
) -> Result<Vec<TraceDimsRecord>, StudyError> {
    run_trace_dims_with(geom, p, r, levels, DEFAULT_CANDIDATE_TOL)
}

/// [`run_trace_dims`] with an explicit candidate cut for null-space
/// selection.
pub fn run_trace_dims_with(
    geom: &MultiPatchGeometry,
    p: usize,
    r: usize,
    levels: usize,
    candidate_tol: f64,
) -> Result<Vec<TraceDimsRecord>, StudyError> {
    if geom.interfaces.len() != 1 {
        return Err(StudyError::NotSingleInterface(geom.interfaces.len()));
    }
    let frame = InterfaceFrame::new(geom, 0)?;
    let gluings = all_gluing_data(geom)?;
    let report = classify_as_g1(&frame, DEFAULT_AS_TOL);
    let mut rows = Vec::with_capacity(levels);
    for level in 0..levels {
        let spans = dyadic_spans(level);
        let space = build_c0_space(geom, p, r, spans, BoundaryCondition::Free)?;
        let basis = build_c1_basis_with(&space, &gluings, candidate_tol)?;
        let dims = trace_component_dims(&space, &basis, &frame, &gluings[0]);
        let (theory_g0, theory_g1) = predicted_trace_dims(p, r, spans, &report);
        rows.push(TraceDimsRecord {
            level,
            spans,
            g0: dims.g0,
            g1: dims.g1,
            dim_v1: basis.dim_v1,
            ambiguous: dims.ambiguous || basis.ambiguous,
            theory_g0,
            theory_g1,
        });
    }
    Ok(rows)
}

/// Penalty spectrum rows per level for one cell.
pub struct SpectrumLevel {
    pub level: usize,
    pub spans: usize,
    pub eigenvalues: Vec<f64>,
    pub gap_ratio: f64,
    pub null_dim: usize,
}

/// Coupled-block constraint spectra across levels, on the boundary-free
/// space so the full interface construction is visible.
///
/// Reports the singular values of the sampled interface-relation matrix,
/// whose zero/nonzero magnitudes are comparable across levels; the split
/// index comes from the verified null-space selection.
pub fn run_spectrum(
    geom: &MultiPatchGeometry,
    p: usize,
    r: usize,
    levels: usize,
) -> Result<Vec<SpectrumLevel>, StudyError> {
    run_spectrum_with(geom, p, r, levels, DEFAULT_CANDIDATE_TOL)
}

/// [`run_spectrum`] with an explicit candidate cut for null-space selection.
pub fn run_spectrum_with(
    geom: &MultiPatchGeometry,
    p: usize,
    r: usize,
    levels: usize,
    candidate_tol: f64,
) -> Result<Vec<SpectrumLevel>, StudyError> {
    let gluings = all_gluing_data(geom)?;
    let mut out = Vec::with_capacity(levels);
    for level in 0..levels {
        let spans = dyadic_spans(level);
        let space = build_c0_space(geom, p, r, spans, BoundaryCondition::Free)?;
        let basis = build_c1_basis_with(&space, &gluings, candidate_tol)?;
        let rows = relation_sample_rows(&space, &gluings)?;
        let ncols = rows.ncols();
        let mut values: Vec<f64> = rows.svd(false, false).singular_values.iter().copied().collect();
        values.sort_by(f64::total_cmp);
        // A thinner-than-square stack would hide part of the kernel; pad so
        // indices keep counting kernel directions from zero.
        while values.len() < ncols {
            values.insert(0, 0.0);
        }
        let spectrum = crate::linalg::Spectrum {
            eigenvalues: values,
            gap_index: None,
        };
        out.push(SpectrumLevel {
            level,
            spans,
            gap_ratio: spectrum.ratio_at(basis.null_dim),
            eigenvalues: spectrum.eigenvalues,
            null_dim: basis.null_dim,
        });
    }
    Ok(out)
}

/// Gluing data of every interface of a geometry, for classification reports.
pub fn classification_reports(
    geom: &MultiPatchGeometry,
) -> Result<Vec<(AsG1Report, GluingData)>, StudyError> {
    let mut out = Vec::with_capacity(geom.interfaces.len());
    for k in 0..geom.interfaces.len() {
        let frame = InterfaceFrame::new(geom, k)?;
        let report = classify_as_g1(&frame, DEFAULT_AS_TOL);
        let gluing = crate::gluing::compute_gluing_data(&frame)?;
        out.push((report, gluing));
    }
    Ok(out)
}

fn push_f64(line: &mut String, x: f64) {
    let _ = write!(line, "{x}");
}

fn push_opt(line: &mut String, x: Option<f64>) {
    if let Some(x) = x {
        push_f64(line, x);
    }
}

/// Study rows: one line per level of every result, in input order.
pub fn study_csv(results: &[StudyResult]) -> String {
    let mut out = String::from("geometry,p,r,level,h,dim_V1,L2_error,H2_error,EOC_L2,EOC_H2\n");
    for res in results {
        for (i, rec) in res.levels.iter().enumerate() {
            let mut line = format!(
                "{},{},{},{},",
                res.geometry, res.p, res.r, rec.level
            );
            push_f64(&mut line, rec.h);
            let _ = write!(line, ",{},", rec.dim_v1);
            match &rec.errors {
                Some(e) => {
                    push_f64(&mut line, e.l2);
                    line.push(',');
                    push_f64(&mut line, e.h2);
                }
                None => line.push_str("NaN,NaN"),
            }
            line.push(',');
            push_opt(&mut line, res.eoc_l2[i]);
            line.push(',');
            push_opt(&mut line, res.eoc_h2[i]);
            line.push('\n');
            out.push_str(&line);
        }
    }
    out
}

/// Per-patch error rows: one line per (level, patch).
pub fn per_patch_csv(results: &[StudyResult]) -> String {
    let mut out = String::from("geometry,p,r,level,h,patch,L2_error,H2_error\n");
    for res in results {
        for rec in &res.levels {
            let Some(errors) = &rec.errors else { continue };
            for (pi, pe) in errors.per_patch.iter().enumerate() {
                let mut line = format!(
                    "{},{},{},{},",
                    res.geometry, res.p, res.r, rec.level
                );
                push_f64(&mut line, rec.h);
                let _ = write!(line, ",{pi},");
                push_f64(&mut line, pe.l2);
                line.push(',');
                push_f64(&mut line, pe.h2);
                line.push('\n');
                out.push_str(&line);
            }
        }
    }
    out
}

/// Spectrum rows: one line per eigenvalue per level.
pub fn spectrum_csv(geometry: &str, p: usize, r: usize, levels: &[SpectrumLevel]) -> String {
    let mut out =
        String::from("geometry,p,r,level,eigenvalue_index,eigenvalue,null_dim,gap_ratio\n");
    for lvl in levels {
        for (k, &ev) in lvl.eigenvalues.iter().enumerate() {
            let mut line = format!("{geometry},{p},{r},{},{k},", lvl.level);
            push_f64(&mut line, ev);
            let _ = write!(line, ",{},", lvl.null_dim);
            push_f64(&mut line, lvl.gap_ratio);
            line.push('\n');
            out.push_str(&line);
        }
    }
    out
}

/// Trace-dimension rows with predictions where the characterization applies.
pub fn trace_dims_csv(geometry: &str, p: usize, r: usize, rows: &[TraceDimsRecord]) -> String {
    let mut out =
        String::from("geometry,p,r,level,dim_G0,dim_G1,dim_V1,theory_G0,theory_G1\n");
    for row in rows {
        let mut line = format!(
            "{geometry},{p},{r},{},{},{},{},",
            row.level, row.g0, row.g1, row.dim_v1
        );
        if let Some(t) = row.theory_g0 {
            let _ = write!(line, "{t}");
        }
        line.push(',');
        if let Some(t) = row.theory_g1 {
            let _ = write!(line, "{t}");
        }
        line.push('\n');
        out.push_str(&line);
    }
    out
}

/// One human-readable summary line per study cell.
pub fn summary_line(res: &StudyResult) -> String {
    let verdict = match res.verdict {
        Some(v) => v.to_string(),
        None => "NO-VERDICT".to_string(),
    };
    let last_eoc = res
        .eoc_h2
        .last()
        .copied()
        .flatten()
        .map(|e| format!("{e:.3}"))
        .unwrap_or_else(|| "-".to_string());
    format!(
        "{} p={} r={}: {} (final H2 EOC {})",
        res.geometry, res.p, res.r, verdict, last_eoc
    )
}
