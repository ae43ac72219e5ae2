//! Spatial-to-spectral degrees of freedom and inverse beam steering.
//!
//! Each architecture's progressive phase is linear in a small control vector
//! `x`: `y = A x` with one row per harmonic.
//!
//! | kind      | columns of `A`     | `x`                                              |
//! |-----------|--------------------|--------------------------------------------------|
//! | HMA       | `[m]`              | `2*pi*f_hm*d_tau`                                |
//! | HM-JPTA-2 | `[1, m]`           | `(d_phi_rf, 2*pi*f_hm*d_tau)`                    |
//! | HM-JPTA-3 | `[1, sgn(m), m]`   | `(d_phi_rf + 2*pi*f_rf*d_tau, d_phi_lo, 2*pi*f_hm*d_tau)` |
//!
//! The rank of `A` over the chosen harmonics is the number of beams that can
//! be steered independently. For HM-JPTA-3 the raw unknowns mix RF and delay
//! terms; the elementary matrix `E` maps them onto the hardware controls
//! without changing the rank.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use crate::analysis::{array_factor, theta_grid, DEFAULT_GRID_STEP_DEG};
use crate::architecture::{phase_profile, steering_phase, ArchitectureConfig, ArchitectureKind, ChannelControls};
use crate::error::{invalid, Error, Result};
use crate::{sgn, wrap_phase};

/// Default relative tolerance on singular values.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Largest wrap offset `|k|` tried per target when the search is exhaustive.
pub const MAX_WRAP_OFFSET: i32 = 4;

/// Default angular tolerance for [`verify_steering`].
pub const DEFAULT_VERIFY_TOL_DEG: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct DofMatrix {
    pub kind: ArchitectureKind,
    /// Harmonic of each row, ascending.
    pub rows: Vec<i32>,
    pub columns: Vec<&'static str>,
    pub a: DMatrix<f64>,
}

impl DofMatrix {
    pub fn row_of(&self, m: i32) -> Option<usize> {
        self.rows.iter().position(|&r| r == m)
    }
}

fn column_labels(kind: ArchitectureKind) -> Vec<&'static str> {
    match kind {
        ArchitectureKind::Tma => vec![],
        ArchitectureKind::Hma => vec!["m"],
        ArchitectureKind::HmJpta2 => vec!["1", "m"],
        ArchitectureKind::HmJpta3 => vec!["1", "sgn(m)", "m"],
    }
}

fn row_entries(kind: ArchitectureKind, m: i32) -> Vec<f64> {
    let mf = m as f64;
    match kind {
        ArchitectureKind::Tma => vec![],
        ArchitectureKind::Hma => vec![mf],
        ArchitectureKind::HmJpta2 => vec![1.0, mf],
        ArchitectureKind::HmJpta3 => vec![1.0, sgn(m) as f64, mf],
    }
}

/// DoF matrix over distinct `harmonics`; rows sorted ascending. A TMA has
/// no tunable control and yields zero columns.
pub fn build_dof_matrix(kind: ArchitectureKind, harmonics: &[i32]) -> Result<DofMatrix> {
    if harmonics.is_empty() {
        return Err(invalid("DoF matrix needs at least one harmonic"));
    }
    let set: BTreeSet<i32> = harmonics.iter().copied().collect();
    if set.len() != harmonics.len() {
        return Err(invalid(format!("duplicate harmonics in {harmonics:?}")));
    }
    let rows: Vec<i32> = set.into_iter().collect();
    let columns = column_labels(kind);
    let a = DMatrix::from_fn(rows.len(), columns.len(), |i, j| row_entries(kind, rows[i])[j]);
    Ok(DofMatrix { kind, rows, columns, a })
}

/// Numerical rank: singular values above `tol * sigma_max`.
pub fn matrix_rank(a: &DMatrix<f64>, tol: f64) -> usize {
    assert!(tol > 0.0, "rank tolerance must be positive");
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

pub fn dof_rank(a: &DofMatrix, tol: f64) -> usize {
    matrix_rank(&a.a, tol)
}

/// `E` and `E^-1` relating the raw HM-JPTA-3 unknowns `x` to hardware
/// controls `x' = E x = (d_phi_rf, d_phi_lo, 2*pi*f_hm*d_tau)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementaryTransform {
    pub e: Matrix3<f64>,
    pub e_inv: Matrix3<f64>,
}

impl ElementaryTransform {
    /// `B = A E^-1`, so that `y = B x'`.
    pub fn hardware_basis(&self, a: &DofMatrix) -> Result<DMatrix<f64>> {
        if a.a.ncols() != 3 {
            return Err(invalid(format!(
                "elementary transform applies to 3-column matrices, got {}",
                a.a.ncols()
            )));
        }
        let e_inv = DMatrix::from_column_slice(3, 3, self.e_inv.as_slice());
        Ok(&a.a * e_inv)
    }
}

pub fn elementary_transform(f_rf: f64, f_hm: f64) -> Result<ElementaryTransform> {
    if !(f_hm > 0.0 && f_hm.is_finite()) || !f_rf.is_finite() {
        return Err(invalid(format!("elementary transform needs f_hm > 0, got f_hm={f_hm}, f_rf={f_rf}")));
    }
    let r = f_rf / f_hm;
    let mut e = Matrix3::identity();
    e[(0, 2)] = -r;
    let mut e_inv = Matrix3::identity();
    e_inv[(0, 2)] = r;
    Ok(ElementaryTransform { e, e_inv })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteeringTarget {
    pub m: i32,
    pub theta_deg: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteeringProblem {
    pub targets: Vec<SteeringTarget>,
}

impl SteeringProblem {
    pub fn new(targets: impl IntoIterator<Item = (i32, f64)>) -> Self {
        Self {
            targets: targets
                .into_iter()
                .map(|(m, theta_deg)| SteeringTarget { m, theta_deg })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteeringSolution {
    pub controls: ChannelControls,
    /// Solved unknowns in the DoF-matrix basis, before mapping to hardware.
    pub raw_x: Vec<f64>,
    /// Wrapped achieved progressive phase at each target harmonic.
    pub achieved_profile: Vec<(i32, f64)>,
    /// Largest wrapped phase error over the targets (radians).
    pub residual_rad: f64,
    pub rank: usize,
}

/// Offsets `k` to try for each of `count` targets, ordered by total `|k|`
/// so the unwrapped solution is preferred on ties.
fn wrap_offsets(count: usize) -> Vec<Vec<i32>> {
    let limit = match count {
        0 => return vec![vec![]],
        1..=4 => MAX_WRAP_OFFSET,
        5..=8 => 1,
        _ => 0,
    };
    let span = (2 * limit + 1) as usize;
    let total = span.pow(count as u32);
    let mut out: Vec<Vec<i32>> = (0..total)
        .map(|mut idx| {
            (0..count)
                .map(|_| {
                    let k = (idx % span) as i32 - limit;
                    idx /= span;
                    k
                })
                .collect()
        })
        .collect();
    out.sort_by_key(|ks| ks.iter().map(|k| k.abs()).sum::<i32>());
    out
}

fn controls_from_raw(cfg: &ArchitectureConfig, x: &DVector<f64>) -> Result<ChannelControls> {
    let f_hm = cfg.f_hm();
    Ok(match cfg.kind() {
        ArchitectureKind::Tma => ChannelControls::default(),
        ArchitectureKind::Hma => ChannelControls::delay(x[0] / (TAU * f_hm)),
        ArchitectureKind::HmJpta2 => ChannelControls::new(x[1] / (TAU * f_hm), wrap_phase(x[0]), 0.0),
        ArchitectureKind::HmJpta3 => {
            let et = elementary_transform(cfg.f_rf(), f_hm)?;
            let xh = et.e * nalgebra::Vector3::new(x[0], x[1], x[2]);
            ChannelControls::new(xh[2] / (TAU * f_hm), wrap_phase(xh[0]), wrap_phase(xh[1]))
        }
    })
}

fn delay_column(kind: ArchitectureKind) -> Option<usize> {
    match kind {
        ArchitectureKind::Tma => None,
        ArchitectureKind::Hma => Some(0),
        ArchitectureKind::HmJpta2 => Some(1),
        ArchitectureKind::HmJpta3 => Some(2),
    }
}

fn achieved(cfg: &ArchitectureConfig, ctl: &ChannelControls, problem: &SteeringProblem) -> Result<(Vec<(i32, f64)>, f64)> {
    let ms: Vec<i32> = problem.targets.iter().map(|t| t.m).collect();
    let profile = phase_profile(cfg, ctl, &ms)?;
    let mut residual: f64 = 0.0;
    let mut out = Vec::with_capacity(ms.len());
    for t in &problem.targets {
        let got = profile.get(t.m).expect("profile covers every target").d_phi_wrapped_rad;
        let want = steering_phase(t.theta_deg, cfg.spacing_d());
        residual = residual.max(wrap_phase(got - want).abs());
        out.push((t.m, got));
    }
    Ok((out, residual))
}

/// Solve for controls placing each target harmonic's beam at its angle.
///
/// Targets are phases `2*pi*d*sin(theta)` modulo `2*pi`. Every combination
/// of wrap offsets `|k| <= 4` is tried (fewer for large problems); among
/// exact solutions the one with the smallest `|d_tau|` wins, ties going to
/// the smaller total offset. Overdetermined but consistent problems are
/// accepted; anything else is reported as infeasible with the matrix rank.
pub fn solve_steering(cfg: &ArchitectureConfig, problem: &SteeringProblem) -> Result<SteeringSolution> {
    if cfg.spacing_d() > 0.5 {
        return Err(invalid(format!(
            "steering assumes spacing_d <= 0.5 (no grating lobes), got {}",
            cfg.spacing_d()
        )));
    }
    for t in &problem.targets {
        if !(t.theta_deg.abs() <= 90.0) {
            return Err(invalid(format!("target angle {} deg at m={} is outside [-90, 90]", t.theta_deg, t.m)));
        }
    }
    if problem.targets.is_empty() {
        return Ok(SteeringSolution {
            controls: ChannelControls::default(),
            raw_x: vec![0.0; cfg.kind().dof_count()],
            achieved_profile: vec![],
            residual_rad: 0.0,
            rank: 0,
        });
    }
    let ms: Vec<i32> = problem.targets.iter().map(|t| t.m).collect();
    let dm = build_dof_matrix(cfg.kind(), &ms)?;
    let rank = dof_rank(&dm, DEFAULT_RANK_TOL);
    let count = problem.targets.len();

    // Target phases in matrix row order.
    let mut base = DVector::zeros(count);
    for t in &problem.targets {
        base[dm.row_of(t.m).unwrap()] = steering_phase(t.theta_deg, cfg.spacing_d());
    }

    if dm.a.ncols() == 0 {
        let ctl = ChannelControls::default();
        let (achieved_profile, residual_rad) = achieved(cfg, &ctl, problem)?;
        if residual_rad > 1e-9 {
            return Err(Error::Infeasible { rank: 0, targets: count, residual_rad });
        }
        return Ok(SteeringSolution {
            controls: ctl,
            raw_x: vec![],
            achieved_profile,
            residual_rad,
            rank: 0,
        });
    }

    let pinv = dm
        .a
        .clone()
        .pseudo_inverse(DEFAULT_RANK_TOL)
        .map_err(|e| invalid(format!("pseudo-inverse failed: {e}")))?;
    let tau_col = delay_column(cfg.kind()).unwrap();

    let mut best_exact: Option<DVector<f64>> = None;
    let mut best_any: Option<(f64, DVector<f64>)> = None;
    for ks in wrap_offsets(count) {
        let y = DVector::from_fn(count, |i, _| base[i] + TAU * ks[i] as f64);
        let x = &pinv * &y;
        let lin_residual = (&dm.a * &x - &y).amax();
        if lin_residual <= 1e-9 * (1.0 + y.amax()) {
            let better = match &best_exact {
                None => true,
                Some(b) => x[tau_col].abs() < b[tau_col].abs() - 1e-12 * (1.0 + b[tau_col].abs()),
            };
            if better {
                best_exact = Some(x);
            }
        } else if best_any.as_ref().is_none_or(|(r, _)| lin_residual < *r) {
            best_any = Some((lin_residual, x));
        }
    }

    let x = match best_exact {
        Some(x) => x,
        None => {
            let (_, x) = best_any.expect("at least one offset combination");
            let ctl = controls_from_raw(cfg, &x)?;
            let (_, residual_rad) = achieved(cfg, &ctl, problem)?;
            return Err(Error::Infeasible { rank, targets: count, residual_rad });
        }
    };
    let controls = controls_from_raw(cfg, &x)?;
    let (achieved_profile, residual_rad) = achieved(cfg, &controls, problem)?;
    Ok(SteeringSolution {
        controls,
        raw_x: x.iter().copied().collect(),
        achieved_profile,
        residual_rad,
        rank,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyEntry {
    pub m: i32,
    pub target_theta_deg: f64,
    /// `None` when the harmonic carries no LO power, so no beam exists.
    pub peak_theta_deg: Option<f64>,
    pub error_deg: Option<f64>,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteeringReport {
    pub entries: Vec<VerifyEntry>,
    pub max_error_deg: f64,
    pub tolerance_deg: f64,
    pub pass: bool,
}

/// Forward check: the array-factor peak at every target harmonic must land
/// within `tolerance_deg` of its target.
pub fn verify_steering(
    cfg: &ArchitectureConfig,
    solution: &SteeringSolution,
    problem: &SteeringProblem,
    tolerance_deg: f64,
) -> Result<SteeringReport> {
    let grid = theta_grid(DEFAULT_GRID_STEP_DEG);
    let mut entries = Vec::with_capacity(problem.targets.len());
    let mut max_error: f64 = 0.0;
    for t in &problem.targets {
        let entry = if cfg.waveform().is_occupied(t.m) {
            let p = array_factor(cfg, &solution.controls, t.m, &grid)?;
            let err = (p.refined_peak_theta_deg - t.theta_deg).abs();
            max_error = max_error.max(err);
            VerifyEntry {
                m: t.m,
                target_theta_deg: t.theta_deg,
                peak_theta_deg: Some(p.refined_peak_theta_deg),
                error_deg: Some(err),
                within_tolerance: err <= tolerance_deg,
            }
        } else {
            max_error = f64::INFINITY;
            VerifyEntry {
                m: t.m,
                target_theta_deg: t.theta_deg,
                peak_theta_deg: None,
                error_deg: None,
                within_tolerance: false,
            }
        };
        entries.push(entry);
    }
    let pass = entries.iter().all(|e| e.within_tolerance);
    Ok(SteeringReport {
        entries,
        max_error_deg: max_error,
        tolerance_deg,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::{CombPhases, HarmonicWaveform};
    use std::f64::consts::PI;

    const F_HM: f64 = 1e9;
    const F_RF: f64 = 28e9;

    fn cfg(kind: ArchitectureKind, n: usize) -> ArchitectureConfig {
        let w = HarmonicWaveform::comb(&[-3, -2, -1, 0, 1, 2, 3], 1.0, CombPhases::Zero, F_HM).unwrap();
        ArchitectureConfig::new(kind, n, 0.5, F_RF, w).unwrap()
    }

    /// Exact rank by fraction-free Gaussian elimination over integers.
    fn integer_rank(rows: &[Vec<i64>]) -> usize {
        let mut m: Vec<Vec<i64>> = rows.to_vec();
        let ncols = m.first().map_or(0, |r| r.len());
        let mut rank = 0;
        for c in 0..ncols {
            let Some(p) = (rank..m.len()).find(|&r| m[r][c] != 0) else { continue };
            m.swap(rank, p);
            for r in 0..m.len() {
                if r != rank && m[r][c] != 0 {
                    let (a, b) = (m[rank][c], m[r][c]);
                    for k in 0..ncols {
                        m[r][k] = m[r][k] * a - m[rank][k] * b;
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    fn as_int(a: &DofMatrix) -> Vec<Vec<i64>> {
        (0..a.a.nrows())
            .map(|i| (0..a.a.ncols()).map(|j| a.a[(i, j)] as i64).collect())
            .collect()
    }

    #[test]
    fn matrices_match_construction_rule() {
        let a = build_dof_matrix(ArchitectureKind::HmJpta2, &[1, 0]).unwrap();
        assert_eq!(a.rows, vec![0, 1]);
        assert_eq!(as_int(&a), vec![vec![1, 0], vec![1, 1]]);
        let a = build_dof_matrix(ArchitectureKind::HmJpta3, &[0, 1, 2]).unwrap();
        assert_eq!(as_int(&a), vec![vec![1, 0, 0], vec![1, 1, 1], vec![1, 1, 2]]);
        let a = build_dof_matrix(ArchitectureKind::Hma, &[0, 1, 2]).unwrap();
        assert_eq!(as_int(&a), vec![vec![0], vec![1], vec![2]]);
        assert_eq!(a.columns, vec!["m"]);
        let a = build_dof_matrix(ArchitectureKind::HmJpta3, &[-2, -1]).unwrap();
        assert_eq!(as_int(&a), vec![vec![1, -1, -2], vec![1, -1, -1]]);
    }

    #[test]
    fn duplicate_or_empty_harmonics_rejected() {
        assert!(build_dof_matrix(ArchitectureKind::Hma, &[1, 1]).is_err());
        assert!(build_dof_matrix(ArchitectureKind::Hma, &[]).is_err());
    }

    #[test]
    fn ranks_agree_with_exact_elimination() {
        let sets: Vec<Vec<i32>> = vec![
            vec![0, 1],
            vec![0, 1, 2],
            vec![-2, -1, 0, 1, 2],
            vec![1, 2, 3],
            vec![-1, 1],
            vec![0],
            vec![2],
            vec![-3, 2, 5],
        ];
        for kind in ArchitectureKind::all() {
            for s in &sets {
                let a = build_dof_matrix(kind, s).unwrap();
                assert_eq!(dof_rank(&a, DEFAULT_RANK_TOL), integer_rank(&as_int(&a)), "{kind} {s:?}");
                assert!(dof_rank(&a, DEFAULT_RANK_TOL) <= s.len().min(kind.dof_count()));
            }
        }
        let full = build_dof_matrix(ArchitectureKind::HmJpta2, &[-2, -1, 0, 1, 2]).unwrap();
        assert_eq!(dof_rank(&full, DEFAULT_RANK_TOL), 2);
        let three = build_dof_matrix(ArchitectureKind::HmJpta3, &[0, 1, 2]).unwrap();
        assert_eq!(dof_rank(&three, DEFAULT_RANK_TOL), 3);
        let tma = build_dof_matrix(ArchitectureKind::Tma, &[0, 1]).unwrap();
        assert_eq!(dof_rank(&tma, DEFAULT_RANK_TOL), 0);
    }

    #[test]
    fn elementary_transform_properties() {
        let et = elementary_transform(28e9, 1e9).unwrap();
        assert!((et.e * et.e_inv - Matrix3::identity()).amax() < 1e-12);
        assert_eq!(elementary_transform(0.0, 1e9).unwrap().e, Matrix3::identity());
        assert!(elementary_transform(1.0, 0.0).is_err());
        let a = build_dof_matrix(ArchitectureKind::HmJpta3, &[0, 1, 2]).unwrap();
        let b = et.hardware_basis(&a).unwrap();
        assert_eq!(matrix_rank(&b, DEFAULT_RANK_TOL), 3);
        // x' = E x recovers the hardware controls.
        let (d_tau, rf, lo) = (1.7e-12, 0.3, -0.8);
        let x = nalgebra::Vector3::new(rf + TAU * 28e9 * d_tau, lo, TAU * 1e9 * d_tau);
        let xh = et.e * x;
        assert!((xh[0] - rf).abs() < 1e-9);
        assert!((xh[1] - lo).abs() < 1e-15);
    }

    #[test]
    fn worked_three_beam_example() {
        let c = cfg(ArchitectureKind::HmJpta3, 16);
        let problem = SteeringProblem::new([(0, 0.0), (1, 30.0), (2, -30.0)]);
        let sol = solve_steering(&c, &problem).unwrap();
        // Hand solve of [[1,0,0],[1,1,1],[1,1,2]] x = (0, pi/2, -pi/2).
        assert!(sol.raw_x[0].abs() < 1e-12);
        assert!((sol.raw_x[1] - 1.5 * PI).abs() < 1e-12);
        assert!((sol.raw_x[2] + PI).abs() < 1e-12);
        let t_hm = 1.0 / F_HM;
        assert!((sol.controls.d_tau_s + t_hm / 2.0).abs() < 1e-22);
        assert!((wrap_phase(sol.controls.d_phi_lo_rad - 1.5 * PI)).abs() < 1e-12);
        assert!(wrap_phase(sol.controls.d_phi_rf_rad + TAU * F_RF * sol.controls.d_tau_s).abs() < 1e-6);
        assert!(sol.residual_rad < 1e-9);
        assert_eq!(sol.rank, 3);
        let report = verify_steering(&c, &sol, &problem, DEFAULT_VERIFY_TOL_DEG).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn extra_harmonic_is_determined() {
        let c = cfg(ArchitectureKind::HmJpta3, 16);
        let problem = SteeringProblem::new([(0, 10.0), (1, -20.0), (2, 35.0)]);
        let sol = solve_steering(&c, &problem).unwrap();
        let ctl = sol.controls;
        let predicted = TAU * (F_RF + 3.0 * F_HM) * ctl.d_tau_s + ctl.d_phi_rf_rad + ctl.d_phi_lo_rad;
        let p = phase_profile(&c, &ctl, &[3]).unwrap();
        assert!(wrap_phase(p.entries[0].d_phi_rad - predicted).abs() < 1e-6);
    }

    #[test]
    fn broadside_identity_for_jpta2() {
        let c = cfg(ArchitectureKind::HmJpta2, 8);
        let sol = solve_steering(&c, &SteeringProblem::new([(0, 0.0), (1, 0.0)])).unwrap();
        assert_eq!(sol.controls.d_phi_rf_rad, 0.0);
        assert_eq!(sol.controls.d_tau_s, 0.0);
    }

    #[test]
    fn hma_two_independent_targets_infeasible() {
        let c = cfg(ArchitectureKind::Hma, 8);
        let err = solve_steering(&c, &SteeringProblem::new([(1, 20.0), (2, 20.0)])).unwrap_err();
        assert!(matches!(err, Error::Infeasible { rank: 1, targets: 2, .. }), "{err:?}");
        // A second target consistent with the first is fine.
        let phase1 = steering_phase(20.0, 0.5);
        let implied = beam_angle(2.0 * phase1);
        let ok = solve_steering(&c, &SteeringProblem::new([(1, 20.0), (2, implied)])).unwrap();
        assert!(ok.residual_rad < 1e-9);
    }

    fn beam_angle(phase: f64) -> f64 {
        crate::architecture::beam_angle_deg(wrap_phase(phase), 0.5).unwrap()
    }

    #[test]
    fn tma_cannot_be_steered() {
        let tma = ArchitectureConfig::tma(4, F_HM, F_RF).unwrap();
        assert!(matches!(
            solve_steering(&tma, &SteeringProblem::new([(1, 10.0)])),
            Err(Error::Infeasible { rank: 0, .. })
        ));
        // Its own fixed beam at m=1 is reachable: dphi = pi/2 -> 30 deg.
        assert!(solve_steering(&tma, &SteeringProblem::new([(1, 30.0)])).is_ok());
    }

    #[test]
    fn precondition_errors() {
        let c = cfg(ArchitectureKind::HmJpta3, 8);
        assert!(matches!(
            solve_steering(&c, &SteeringProblem::new([(1, 10.0), (1, 20.0)])),
            Err(Error::InvalidParameter(_))
        ));
        assert!(solve_steering(&c, &SteeringProblem::new([(1, 95.0)])).is_err());
        let wide = ArchitectureConfig::new(ArchitectureKind::Hma, 8, 0.7, F_RF, c.waveform().clone()).unwrap();
        assert!(solve_steering(&wide, &SteeringProblem::new([(1, 10.0)])).is_err());
    }

    #[test]
    fn empty_problem() {
        let c = cfg(ArchitectureKind::HmJpta3, 8);
        let problem = SteeringProblem::default();
        let sol = solve_steering(&c, &problem).unwrap();
        let report = verify_steering(&c, &sol, &problem, DEFAULT_VERIFY_TOL_DEG).unwrap();
        assert!(report.entries.is_empty());
        assert!(report.pass);
    }

    #[test]
    fn perturbed_delay_is_flagged() {
        let c = cfg(ArchitectureKind::HmJpta3, 16);
        let problem = SteeringProblem::new([(0, 5.0), (1, 25.0), (2, -15.0)]);
        let mut sol = solve_steering(&c, &problem).unwrap();
        sol.controls.d_tau_s *= 1.1;
        let report = verify_steering(&c, &sol, &problem, DEFAULT_VERIFY_TOL_DEG).unwrap();
        assert!(!report.pass);
        assert!(report.entries.iter().any(|e| e.m != 0 && !e.within_tolerance));
    }

    #[test]
    fn unpowered_harmonic_fails_verification() {
        let w = HarmonicWaveform::comb(&[0, 1], 1.0, CombPhases::Zero, F_HM).unwrap();
        let c = ArchitectureConfig::new(ArchitectureKind::HmJpta3, 8, 0.5, F_RF, w).unwrap();
        let problem = SteeringProblem::new([(0, 0.0), (1, 10.0), (2, 20.0)]);
        let sol = solve_steering(&c, &problem).unwrap();
        let report = verify_steering(&c, &sol, &problem, DEFAULT_VERIFY_TOL_DEG).unwrap();
        assert!(!report.pass);
        assert_eq!(report.entries[2].peak_theta_deg, None);
    }

    #[test]
    fn wrap_offsets_prefer_small_shifts() {
        let offs = wrap_offsets(2);
        assert_eq!(offs.len(), 81);
        assert_eq!(offs[0], vec![0, 0]);
        assert_eq!(wrap_offsets(9).len(), 1);
    }
}
