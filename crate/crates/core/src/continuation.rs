//! Branch tracing in the volume parameter: Euler predictor along the tangent,
//! minimum-norm Newton corrector, step adaptation, stability monitoring,
//! bifurcation localization and branch switching.

use log::{debug, info, warn};

use crate::error::{CmcError, Result};
use crate::geometry::Surface;
use crate::system::{
    jacobian, max_abs, min_norm_solve, normal_graph, residual, stability, stability_with_mode,
    tangent, BaseState, Discretization, StabilityReport, UnknownTriple,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationConfig {
    /// Arc-length step; its sign picks the direction of travel.
    pub step_length: f64,
    pub max_steps: usize,
    /// Tolerance on `‖f_d‖∞`.
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub min_step: f64,
    /// Tolerance on `V` when localizing a bifurcation.
    pub bifurcation_refine_tol: f64,
    /// Halve on failure, grow by 1.3 after three fast steps.
    pub adapt_step: bool,
    /// Localize every sign change of the stability functional while tracing.
    pub refine_bifurcations: bool,
    /// Stop once `V` leaves `[volume_min, volume_max]`.
    pub volume_min: Option<f64>,
    pub volume_max: Option<f64>,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            step_length: 0.1,
            max_steps: 100,
            newton_tol: 1e-10,
            newton_max_iters: 10,
            min_step: 1e-6,
            bifurcation_refine_tol: 1e-7,
            adapt_step: true,
            refine_bifurcations: true,
            volume_min: None,
            volume_max: None,
        }
    }
}

impl ContinuationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CmcError::InvalidArgument(msg));
        if !self.step_length.is_finite() || self.step_length.abs() < self.min_step {
            return bad(format!(
                "step length {} must be finite with magnitude at least min_step {}",
                self.step_length, self.min_step
            ));
        }
        if !(self.min_step > 0.0) {
            return bad(format!("min_step must be positive, got {}", self.min_step));
        }
        if !(self.newton_tol > 0.0) {
            return bad(format!("newton_tol must be positive, got {}", self.newton_tol));
        }
        if self.newton_max_iters == 0 {
            return bad("newton_max_iters must be positive".into());
        }
        if !(self.bifurcation_refine_tol > 0.0) {
            return bad(format!(
                "bifurcation_refine_tol must be positive, got {}",
                self.bifurcation_refine_tol
            ));
        }
        Ok(())
    }

    fn inside_window(&self, volume: f64) -> bool {
        self.volume_min.is_none_or(|lo| volume >= lo) && self.volume_max.is_none_or(|hi| volume <= hi)
    }
}

/// A converged surface on a branch.
#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub surface: Surface,
    pub lambda: f64,
    pub volume: f64,
    pub stability: StabilityReport,
    pub arc_index: usize,
    /// Tangent (at the previous point) used to predict this one.
    pub tangent_used: Vec<f64>,
    /// Oriented tangent at this point.
    pub tangent: Vec<f64>,
    /// Normal displacement from the previous point.
    pub phi_last: Vec<f64>,
    /// Arc-length step that produced this point.
    pub step_length: f64,
    pub newton_iters: usize,
    /// `‖f_d‖∞` at acceptance.
    pub residual: f64,
}

impl BranchPoint {
    pub fn base(&self, disc: &Discretization) -> Result<BaseState> {
        BaseState::new(self.surface.clone(), self.lambda, self.volume, disc)
    }

    /// Builds a point from a converged base (no predecessor).
    pub fn from_base(base: &BaseState, disc: &Discretization, orientation: Option<&[f64]>) -> Result<Self> {
        let stab = stability(base, disc)?;
        let mut t = tangent(base, disc)?;
        if let Some(o) = orientation {
            if dot(&t, o) < 0.0 {
                negate(&mut t);
            }
        }
        let r = residual(base, &base.origin(), disc)?;
        Ok(Self {
            surface: base.surface0.clone(),
            lambda: base.lambda0,
            volume: base.volume0,
            stability: stab,
            arc_index: 0,
            tangent_used: t.clone(),
            tangent: t,
            phi_last: vec![0.0; base.len()],
            step_length: 0.0,
            newton_iters: 0,
            residual: max_abs(&r),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// The volume component of the tangent changed sign.
    FoldSuspected,
    /// The stability functional changed sign in at least one sector.
    BetaSignChange,
    /// The corrector failed down to the minimum step.
    StepFailure,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::FoldSuspected => "fold-suspected",
            EventKind::BetaSignChange => "beta-sign-change",
            EventKind::StepFailure => "step-failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchEvent {
    /// Arc index of the first point after the event (or of the failing step).
    pub step: usize,
    pub kind: EventKind,
    /// Sectors whose sign flipped (beta events only).
    pub sectors: Vec<usize>,
    pub refined_volume: Option<f64>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    MaxSteps,
    LeftVolumeWindow,
    StepFailure(CmcError),
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    pub events: Vec<BranchEvent>,
    /// Localized bifurcation points, in the order of their beta events.
    pub bifurcations: Vec<BranchPoint>,
    pub stop: StopReason,
}

impl Branch {
    pub fn beta_events(&self) -> impl Iterator<Item = &BranchEvent> {
        self.events.iter().filter(|e| e.kind == EventKind::BetaSignChange)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn negate(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = -*x);
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Newton corrections below this multiple of `ε·max(1, ‖η‖∞)` are treated
/// as rounding noise.
pub const ROUNDING_STEP: f64 = 16.0 * f64::EPSILON;

/// A stagnated iterate is accepted only if its residual is within this
/// factor of `newton_tol`.
pub const STAGNATION_FACTOR: f64 = 1e3;

/// Minimum-norm Newton iteration from `start` (length `k + 2`).
/// Returns the converged unknowns, the iteration count and the residual.
///
/// Stops when `‖f_d‖∞ < newton_tol`, or when the correction has dropped to
/// rounding level with the residual within [`STAGNATION_FACTOR`] of the
/// tolerance.
pub fn correct(
    base: &BaseState,
    start: &[f64],
    config: &ContinuationConfig,
    disc: &Discretization,
) -> Result<(UnknownTriple, usize, f64)> {
    let mut x = start.to_vec();
    let mut last = f64::NAN;
    for it in 0..=config.newton_max_iters {
        let trial = UnknownTriple::from_slice(&x);
        let f = residual(base, &trial, disc)?;
        let r = max_abs(&f);
        if !r.is_finite() {
            break;
        }
        last = r;
        if r < config.newton_tol {
            return Ok((trial, it, r));
        }
        if it == config.newton_max_iters {
            break;
        }
        let j = jacobian(base, &trial, disc)?;
        let d = min_norm_solve(&j, &f)?;
        // The correction no longer changes the iterate: the residual is at
        // the rounding floor of the discretization and cannot be reduced.
        let scale = max_abs(&x).max(1.0);
        if max_abs(&d) <= ROUNDING_STEP * scale && r < STAGNATION_FACTOR * config.newton_tol {
            return Ok((trial, it, r));
        }
        x.iter_mut().zip(&d).for_each(|(xi, di)| *xi -= di);
    }
    Err(CmcError::StepFailure {
        iterations: config.newton_max_iters,
        residual: last,
    })
}

/// Predicts `(0, λ₀, V₀) + h t` and corrects. `t` must be the oriented unit
/// tangent at the base.
pub fn step(
    base: &BaseState,
    tangent_at_base: &[f64],
    h: f64,
    config: &ContinuationConfig,
    disc: &Discretization,
) -> Result<BranchPoint> {
    step_in(base, tangent_at_base, h, config, disc, None)
}

/// [`step`], optionally averaging the corrected displacement with its mirror
/// image under a node reflection. On a reflection-symmetric branch this
/// removes the odd rounding noise that the corrector amplifies when an odd
/// mode is close to critical; the residual changes only at second order.
fn step_in(
    base: &BaseState,
    tangent_at_base: &[f64],
    h: f64,
    config: &ContinuationConfig,
    disc: &Discretization,
    mirror: Option<&[usize]>,
) -> Result<BranchPoint> {
    let origin = base.origin().to_vec();
    let pred: Vec<f64> = origin.iter().zip(tangent_at_base).map(|(o, t)| o + h * t).collect();
    let (mut sol, iters, mut res) = correct(base, &pred, config, disc)?;
    if let Some(map) = mirror {
        sol.phi = map.iter().enumerate().map(|(i, &j)| 0.5 * (sol.phi[i] + sol.phi[j])).collect();
        res = max_abs(&residual(base, &sol, disc)?);
    }
    let delta: Vec<f64> = sol.to_vec().iter().zip(&origin).map(|(a, b)| a - b).collect();
    let moved = norm(&delta);
    if moved > 2.0 * h.abs().max(config.newton_tol) {
        return Err(CmcError::StepFailure {
            iterations: iters,
            residual: res,
        });
    }
    let surface = normal_graph(base, &sol.phi)?;
    let new_base = BaseState::new(surface, sol.lambda, sol.volume, disc)?;
    let stab = stability(&new_base, disc)?;
    let mut t = match tangent(&new_base, disc) {
        Ok(t) => t,
        // exactly on a branch point: carry the previous direction over it
        Err(CmcError::AtBifurcation { .. }) => tangent_at_base.to_vec(),
        Err(e) => return Err(e),
    };
    if dot(&t, tangent_at_base) < 0.0 {
        negate(&mut t);
    }
    Ok(BranchPoint {
        surface: new_base.surface0,
        lambda: sol.lambda,
        volume: sol.volume,
        stability: stab,
        arc_index: 0,
        tangent_used: tangent_at_base.to_vec(),
        tangent: t,
        phi_last: sol.phi,
        step_length: h,
        newton_iters: iters,
        residual: res,
    })
}

/// Traces a branch from `start` (whose tangent sets the initial direction
/// together with the sign of the configured step).
pub fn trace(start: BranchPoint, config: &ContinuationConfig, disc: &Discretization) -> Result<Branch> {
    config.validate()?;
    let k = disc.len();
    let mut points = vec![start];
    let mut events = Vec::new();
    let mut bifurcations = Vec::new();
    let mut h = config.step_length;
    let mut fast = 0usize;
    let mut stop = StopReason::MaxSteps;

    for n in 1..=config.max_steps {
        let prev = points.last().expect("branch has a start point");
        let base = prev.base(disc)?;
        let mut attempt = h;
        let next = loop {
            match step(&base, &prev.tangent, attempt, config, disc) {
                Ok(p) => break Ok(p),
                Err(e) => {
                    debug!("step {n} with h = {attempt:e} failed: {e}");
                    if !config.adapt_step || attempt.abs() / 2.0 < config.min_step {
                        break Err(e);
                    }
                    attempt /= 2.0;
                    fast = 0;
                }
            }
        };
        let mut next = match next {
            Ok(p) => p,
            Err(e) => {
                warn!("giving up at step {n}: {e}");
                events.push(BranchEvent {
                    step: n,
                    kind: EventKind::StepFailure,
                    sectors: vec![],
                    refined_volume: None,
                    message: Some(e.to_string()),
                });
                stop = StopReason::StepFailure(e);
                break;
            }
        };
        next.arc_index = n;
        h = attempt;
        if config.adapt_step {
            if next.newton_iters <= 3 {
                fast += 1;
                if fast >= 3 {
                    h = h.signum() * (h.abs() * 1.3).min(config.step_length.abs());
                    fast = 0;
                }
            } else {
                fast = 0;
            }
        }

        if next.tangent[k + 1].signum() != prev.tangent[k + 1].signum() {
            events.push(BranchEvent {
                step: n,
                kind: EventKind::FoldSuspected,
                sectors: vec![],
                refined_volume: None,
                message: None,
            });
        }
        let flipped = next.stability.sign_changes(&prev.stability);
        let beta_event = !flipped.is_empty();
        info!(
            "step {n}: V = {:.10}, λ = {:.10}, μ_min = {:.6e}, index {}, {} Newton iterations",
            next.volume,
            next.lambda,
            next.stability.mu_min(),
            next.stability.index,
            next.newton_iters
        );
        points.push(next);
        if beta_event {
            let mut event = BranchEvent {
                step: n,
                kind: EventKind::BetaSignChange,
                sectors: flipped.clone(),
                refined_volume: None,
                message: None,
            };
            if config.refine_bifurcations {
                match locate_bifurcation(&points[n - 1], &points[n], flipped[0], config, disc) {
                    Ok(point) => {
                        event.refined_volume = Some(point.volume);
                        bifurcations.push(point);
                    }
                    Err(e) => {
                        warn!("could not localize the sign change before step {n}: {e}");
                        event.message = Some(e.to_string());
                    }
                }
            }
            events.push(event);
        }
        if !config.inside_window(points[n].volume) {
            stop = StopReason::LeftVolumeWindow;
            break;
        }
    }
    Ok(Branch {
        points,
        events,
        bifurcations,
        stop,
    })
}

fn sector_mu(report: &StabilityReport, sector: usize, reference: &StabilityReport) -> f64 {
    let same = report.sectors.len() == reference.sectors.len()
        && report
            .sectors
            .iter()
            .zip(&reference.sectors)
            .all(|(a, b)| a.parity == b.parity);
    if same {
        report.sectors[sector].critical()
    } else {
        report
            .eigenvalues
            .iter()
            .copied()
            .min_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(f64::NAN)
    }
}

/// Localizes a sign change of the stability functional between two
/// consecutive points by a safeguarded secant iteration on the critical
/// eigenvalue of the flipping sector, as a function of the arc step from `a`.
/// Returns the converged point at the crossing; its volume is `V*`.
pub fn locate_bifurcation(
    a: &BranchPoint,
    b: &BranchPoint,
    sector: usize,
    config: &ContinuationConfig,
    disc: &Discretization,
) -> Result<BranchPoint> {
    if b.stability.sign_changes(&a.stability).is_empty() {
        return Err(CmcError::RefinementFailure(
            "the stability functional has the same sign at both ends".into(),
        ));
    }
    let base = a.base(disc)?;
    let t = &b.tangent_used;
    let reference = &a.stability;
    let mirror = reference.reflection.map(|r| r.node_map(&disc.ops));
    let eval = |s: f64| -> Result<(BranchPoint, f64)> {
        let p = step_in(&base, t, s, config, disc, mirror.as_deref())?;
        let mu = sector_mu(&p.stability, sector, reference);
        Ok((p, mu))
    };
    let (mut s0, mut f0) = (0.0, sector_mu(&a.stability, sector, reference));
    let (mut s1, mut f1) = (b.step_length, sector_mu(&b.stability, sector, reference));
    if f0.signum() == f1.signum() {
        return Err(CmcError::RefinementFailure(format!(
            "critical eigenvalue does not change sign across the bracket ({f0:e}, {f1:e})"
        )));
    }
    let mut v_prev = f64::NAN;
    // Illinois variant of regula falsi
    let mut side = 0i8;
    for _ in 0..60 {
        let mut s = s1 - f1 * (s1 - s0) / (f1 - f0);
        let (lo, hi) = if s0 < s1 { (s0, s1) } else { (s1, s0) };
        if !(s > lo && s < hi) {
            s = 0.5 * (s0 + s1);
        }
        let (p, f) = eval(s)?;
        let v = p.volume;
        debug!("bifurcation search: s = {s:.12e}, V = {v:.12}, μ = {f:e}");
        let done = (v - v_prev).abs() < config.bifurcation_refine_tol || f == 0.0;
        v_prev = v;
        if f.signum() == f1.signum() {
            s1 = s;
            f1 = f;
            if side == 1 {
                f0 /= 2.0;
            }
            side = 1;
        } else {
            s0 = s;
            f0 = f;
            if side == -1 {
                f1 /= 2.0;
            }
            side = -1;
        }
        if done {
            let mut p = p;
            p.arc_index = a.arc_index;
            return Ok(p);
        }
    }
    Err(CmcError::RefinementFailure(
        "secant iteration did not settle within 60 evaluations".into(),
    ))
}

/// Steps off a located bifurcation along the critical eigenvector of the
/// given sector (with no pressure or volume component) and corrects. The
/// step doubles up to three times while the corrector falls back onto the
/// symmetric branch, as judged by `defect`.
pub fn branch_switch(
    at: &BranchPoint,
    sector: Option<usize>,
    direction: f64,
    config: &ContinuationConfig,
    disc: &Discretization,
    defect: &dyn Fn(&Surface) -> f64,
) -> Result<BranchPoint> {
    let base = at.base(disc)?;
    let sector = sector.unwrap_or_else(|| at.stability.most_critical_sector());
    let (_, mode) = stability_with_mode(&base, disc, sector)?;
    let reference = defect(&at.surface);
    let sign = if direction < 0.0 { -1.0 } else { 1.0 };
    let mut h = config.step_length.abs();
    let mut last_err = None;
    for attempt in 0..4 {
        let mut pred = base.origin().to_vec();
        for (p, v) in pred.iter_mut().zip(&mode) {
            *p += sign * h * v;
        }
        match correct(&base, &pred, config, disc) {
            Ok((sol, iters, res)) => {
                let surface = normal_graph(&base, &sol.phi)?;
                let d = defect(&surface);
                debug!("switch attempt {attempt}: h = {h:e}, defect {d:e}");
                if d - reference > 10.0 * config.newton_tol {
                    let new_base = BaseState::new(surface, sol.lambda, sol.volume, disc)?;
                    let stab = stability(&new_base, disc)?;
                    let mut t = tangent(&new_base, disc)?;
                    // keep moving away from the symmetric branch
                    if dot(&t[..mode.len()], &sol.phi) < 0.0 {
                        negate(&mut t);
                    }
                    let mut used = vec![0.0; mode.len() + 2];
                    for (u, v) in used.iter_mut().zip(&mode) {
                        *u = sign * v;
                    }
                    return Ok(BranchPoint {
                        surface: new_base.surface0,
                        lambda: sol.lambda,
                        volume: sol.volume,
                        stability: stab,
                        arc_index: 0,
                        tangent_used: used,
                        tangent: t,
                        phi_last: sol.phi,
                        step_length: sign * h,
                        newton_iters: iters,
                        residual: res,
                    });
                }
                last_err = Some(format!("corrector returned to the symmetric branch (defect {d:e})"));
            }
            Err(e) => last_err = Some(e.to_string()),
        }
        h *= 2.0;
    }
    Err(CmcError::SwitchFailure(last_err.unwrap_or_default()))
}
