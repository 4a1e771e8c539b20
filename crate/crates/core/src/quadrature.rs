//! Gauss quadrature rules and the radial integration engines built on
//! them.
//!
//! Everything the operator modules integrate reduces to four shapes:
//!
//! * a smooth integrand on an interval, possibly with interior derivative
//!   kinks and an oscillation length scale ([`panel_chain`]);
//! * an integrand with one algebraic endpoint singularity `(rho - a)^beta`,
//!   `beta > -1` ([`jacobi_panel`]);
//! * annular integrals `int_r^inf g(rho) (rho^2 - r^2)^(-s) drho`, plain or
//!   with the pure power `rho^(-2s)` subtracted ([`annulus_integral`],
//!   [`annulus_minus_power`]);
//! * principal-value ray integrals `int_0^inf h(rho) rho^(-1-2s) drho` for
//!   `h` vanishing to second order at the origin ([`ray_pv_integral`]).
//!
//! Infinite upper limits are resolved by a declared [`TailBehavior`]:
//! either a decay bound that yields a truncation radius with the dropped
//! tail below `truncation_tol`, or an explicit power-law limit whose tail
//! is added in closed form.  Truncation radii are capped at
//! `max_radius_cap`; a capped tail is reported, not silently accepted.
//!
//! Nodes and weights come from the Golub-Welsch eigenvalue method and are
//! memoized per `(nodes, alpha, beta)`, as are the product rules on the
//! unit sphere.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::constants::{check_dim, check_s, gamma};
use crate::geom::{self, Vector};
use crate::{Error, Evaluation, Result};

/// Resolution and truncation settings shared by every integral in the
/// crate.  The defaults are sized so that quadrature error sits well below
/// the tolerances of the asymptotic checks; `doubled` produces the
/// refinement used by the optional self check.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSpec {
    /// Nodes for panels with an algebraic endpoint singularity.
    pub jacobi_nodes: usize,
    /// Nodes for smooth panels.
    pub smooth_nodes: usize,
    /// Angular resolution: azimuthal count on the circle and sphere, with
    /// half as many polar nodes in dimension three.
    pub sphere_order: usize,
    /// Absolute tolerance allotted to each dropped far-field tail.
    pub truncation_tol: f64,
    /// Hard ceiling on truncation radii; reaching it flags the result.
    pub max_radius_cap: f64,
    /// Override for the near-origin switch radius of second-difference
    /// integrands; `None` derives it from the field's smoothness scale.
    pub inner_cutoff: Option<f64>,
    /// Re-run evaluations at doubled resolution and fail on disagreement.
    pub self_check: bool,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            jacobi_nodes: 64,
            smooth_nodes: 128,
            sphere_order: 64,
            truncation_tol: 1e-9,
            max_radius_cap: 1e6,
            inner_cutoff: None,
            self_check: false,
        }
    }
}

impl QuadratureSpec {
    /// Validates node counts and tolerances.
    pub fn validate(&self) -> Result<()> {
        if self.jacobi_nodes < 4 || self.smooth_nodes < 4 || self.sphere_order < 4 {
            return Err(Error::Domain(
                "quadrature node counts must be at least 4".into(),
            ));
        }
        if self.jacobi_nodes > 4096 || self.smooth_nodes > 4096 || self.sphere_order > 4096 {
            return Err(Error::Domain(
                "quadrature node counts above 4096 are not supported".into(),
            ));
        }
        if !(self.truncation_tol > 0.0 && self.truncation_tol.is_finite()) {
            return Err(Error::Domain(
                "truncation tolerance must be positive".into(),
            ));
        }
        if !(self.max_radius_cap >= 10.0 && self.max_radius_cap.is_finite()) {
            return Err(Error::Domain("max radius cap must be at least 10".into()));
        }
        if let Some(eps) = self.inner_cutoff {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::Domain("inner cutoff must be positive".into()));
            }
        }
        Ok(())
    }

    /// The refinement used by the self check: doubled node counts, same
    /// tail policy so that truncation bias cancels in the comparison.
    pub fn doubled(&self) -> QuadratureSpec {
        QuadratureSpec {
            jacobi_nodes: (self.jacobi_nodes * 2).min(4096),
            smooth_nodes: (self.smooth_nodes * 2).min(4096),
            sphere_order: (self.sphere_order * 2).min(4096),
            ..*self
        }
    }
}

/// Runs `eval` as configured and, when the spec asks for a self check,
/// once more at doubled resolution; disagreement beyond the combined
/// truncation budget is a convergence failure.
pub fn self_checked<F>(spec: &QuadratureSpec, eval: F) -> Result<Evaluation>
where
    F: Fn(&QuadratureSpec) -> Result<Evaluation>,
{
    let base = eval(spec)?;
    if !spec.self_check {
        return Ok(base);
    }
    let fine = eval(&spec.doubled())?;
    let tol = 1e4 * spec.truncation_tol * (1.0 + base.value.abs().max(fine.value.abs()));
    if (base.value - fine.value).abs() > tol {
        return Err(Error::Convergence(format!(
            "self check failed: {} at base resolution vs {} doubled",
            base.value, fine.value
        )));
    }
    Ok(fine)
}

type LineRule = Arc<Vec<(f64, f64)>>;
type SphereRule = Arc<Vec<(Vector, f64)>>;

fn line_rule_cache() -> &'static Mutex<HashMap<(usize, u64, u64), LineRule>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64, u64), LineRule>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn sphere_rule_cache() -> &'static Mutex<HashMap<(usize, usize), SphereRule>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), SphereRule>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Nodes and weights of the symmetric tridiagonal Jacobi matrix with the
/// given diagonal and off-diagonal, scaled to total mass `mu0`.
fn golub_welsch(diag: &[f64], offdiag: &[f64], mu0: f64) -> Vec<(f64, f64)> {
    let n = diag.len();
    let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
    for (i, &d) in diag.iter().enumerate() {
        m[(i, i)] = d;
    }
    for (i, &e) in offdiag.iter().enumerate() {
        m[(i, i + 1)] = e;
        m[(i + 1, i)] = e;
    }
    let eig = nalgebra::SymmetricEigen::new(m);
    let mut rule: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let first = eig.eigenvectors[(0, j)];
            (eig.eigenvalues[j], mu0 * first * first)
        })
        .collect();
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

/// Gauss-Jacobi rule for the weight `(1 - x)^alpha (1 + x)^beta` on
/// `[-1, 1]`; `alpha = beta = 0` reduces to Gauss-Legendre.
pub fn gauss_jacobi(nodes: usize, alpha: f64, beta: f64) -> Result<LineRule> {
    if nodes == 0 || nodes > 4096 {
        return Err(Error::Domain(format!(
            "Jacobi rule size must lie in 1..=4096, got {nodes}"
        )));
    }
    if !(alpha > -1.0 && beta > -1.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(Error::Domain(format!(
            "Jacobi exponents must exceed -1, got alpha = {alpha}, beta = {beta}"
        )));
    }
    let key = (nodes, alpha.to_bits(), beta.to_bits());
    if let Some(rule) = line_rule_cache().lock().unwrap().get(&key) {
        return Ok(rule.clone());
    }
    let ab = alpha + beta;
    let mut diag = Vec::with_capacity(nodes);
    let mut offdiag = Vec::with_capacity(nodes.saturating_sub(1));
    diag.push((beta - alpha) / (ab + 2.0));
    for k in 1..nodes {
        let kf = k as f64;
        let denom = (2.0 * kf + ab) * (2.0 * kf + ab + 2.0);
        diag.push((beta * beta - alpha * alpha) / denom);
        let num = 4.0 * kf * (kf + alpha) * (kf + beta) * (kf + ab);
        let den = (2.0 * kf + ab).powi(2) * (2.0 * kf + ab + 1.0) * (2.0 * kf + ab - 1.0);
        offdiag.push((num / den).sqrt());
    }
    offdiag.truncate(nodes - 1);
    let mu0 = 2f64.powf(ab + 1.0) * gamma(alpha + 1.0) * gamma(beta + 1.0) / gamma(ab + 2.0);
    let rule = Arc::new(golub_welsch(&diag, &offdiag, mu0));
    line_rule_cache().lock().unwrap().insert(key, rule.clone());
    Ok(rule)
}

/// Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(nodes: usize) -> Result<LineRule> {
    gauss_jacobi(nodes, 0.0, 0.0)
}

/// Product rule integrating over the unit sphere in dimension `n`.  For
/// `n = 1` this is the two-point set, for `n = 2` the periodic trapezoid
/// rule, and for `n = 3` Gauss-Legendre in the polar cosine crossed with a
/// trapezoid in azimuth.
pub fn sphere_rule(n: usize, order: usize) -> Result<SphereRule> {
    check_dim(n)?;
    if order < 4 || order > 4096 {
        return Err(Error::Domain(format!(
            "sphere order must lie in 4..=4096, got {order}"
        )));
    }
    if let Some(rule) = sphere_rule_cache().lock().unwrap().get(&(n, order)) {
        return Ok(rule.clone());
    }
    let mut nodes: Vec<(Vector, f64)> = Vec::new();
    match n {
        1 => {
            nodes.push(([1.0, 0.0, 0.0], 1.0));
            nodes.push(([-1.0, 0.0, 0.0], 1.0));
        }
        2 => {
            let w = 2.0 * std::f64::consts::PI / order as f64;
            for j in 0..order {
                let th = w * j as f64;
                nodes.push(([th.cos(), th.sin(), 0.0], w));
            }
        }
        _ => {
            let polar = gauss_legendre(order / 2)?;
            let w_az = 2.0 * std::f64::consts::PI / order as f64;
            for &(t, wt) in polar.iter() {
                let sin_phi = (1.0 - t * t).max(0.0).sqrt();
                for j in 0..order {
                    let psi = w_az * j as f64;
                    nodes.push(([sin_phi * psi.cos(), sin_phi * psi.sin(), t], wt * w_az));
                }
            }
        }
    }
    let rule = Arc::new(nodes);
    sphere_rule_cache()
        .lock()
        .unwrap()
        .insert((n, order), rule.clone());
    Ok(rule)
}

/// Product rule on the one-sided cap `{omega : omega . axis > threshold}`,
/// rotated so its pole sits on the given unit axis.  Dimension one has no
/// cap and is rejected.
pub fn cap_rule(
    n: usize,
    axis: Vector,
    threshold: f64,
    order: usize,
) -> Result<Vec<(Vector, f64)>> {
    check_dim(n)?;
    if n == 1 {
        return Err(Error::Domain(
            "cap rules are defined for dimensions two and three only".into(),
        ));
    }
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::Domain(format!(
            "cap threshold must lie in [0, 1), got {threshold}"
        )));
    }
    let axis = geom::normalize(axis, 1e-14)
        .ok_or_else(|| Error::Domain("cap axis must be a nonzero direction".into()))?;
    let mut nodes = Vec::new();
    if n == 2 {
        let theta_c = threshold.acos();
        let tangent = geom::perp2(axis);
        for &(x, w) in gauss_legendre(order)?.iter() {
            let th = theta_c * x;
            let omega = geom::add(geom::scale(th.cos(), axis), geom::scale(th.sin(), tangent));
            nodes.push((omega, w * theta_c));
        }
    } else {
        let (e1, e2) = geom::orthonormal_complement(axis);
        let half = (1.0 - threshold) / 2.0;
        let w_az = 2.0 * std::f64::consts::PI / order as f64;
        for &(x, wt) in gauss_legendre((order / 2).max(4))?.iter() {
            let t = threshold + half * (x + 1.0);
            let sin_phi = (1.0 - t * t).max(0.0).sqrt();
            for j in 0..order {
                let psi = w_az * j as f64;
                let omega = geom::add(
                    geom::scale(t, axis),
                    geom::add(
                        geom::scale(sin_phi * psi.cos(), e1),
                        geom::scale(sin_phi * psi.sin(), e2),
                    ),
                );
                nodes.push((omega, wt * half * w_az));
            }
        }
    }
    Ok(nodes)
}

/// Integrates a function of the direction over the whole unit sphere.
pub fn sphere_integral<F>(h: F, n: usize, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(Vector) -> Result<f64>,
{
    let rule = sphere_rule(n, spec.sphere_order)?;
    let mut acc = 0.0;
    for &(omega, w) in rule.iter() {
        let v = h(omega)?;
        if !v.is_finite() {
            return Err(Error::Convergence(
                "non-finite sample in a sphere integral".into(),
            ));
        }
        acc += w * v;
    }
    Ok(acc)
}

/// Integrates a function of the direction over a one-sided cap.
pub fn cap_integral<F>(
    h: F,
    n: usize,
    axis: Vector,
    threshold: f64,
    spec: &QuadratureSpec,
) -> Result<f64>
where
    F: Fn(Vector) -> Result<f64>,
{
    let rule = cap_rule(n, axis, threshold, spec.sphere_order)?;
    let mut acc = 0.0;
    for &(omega, w) in rule.iter() {
        let v = h(omega)?;
        if !v.is_finite() {
            return Err(Error::Convergence(
                "non-finite sample in a cap integral".into(),
            ));
        }
        acc += w * v;
    }
    Ok(acc)
}

/// Interior structure of a radial integrand: derivative kinks the panels
/// must not straddle, and an optional oscillation-driven width ceiling.
#[derive(Clone, Copy, Debug, Default)]
pub struct RadialHints<'a> {
    pub breakpoints: &'a [f64],
    pub max_panel_width: Option<f64>,
}

impl RadialHints<'static> {
    /// No kinks, no width ceiling.
    pub const NONE: RadialHints<'static> = RadialHints {
        breakpoints: &[],
        max_panel_width: None,
    };
}

/// Smallest radius at which a tail bounded by `bound * rho^(-1-exponent)`
/// integrates to at most `tol`, floored at 1 and capped at
/// `max_radius_cap`; the flag reports whether the cap was hit.
pub fn truncation_radius(spec: &QuadratureSpec, bound: f64, exponent: f64) -> Result<(f64, bool)> {
    if !(exponent > 0.0 && exponent.is_finite()) {
        return Err(Error::TailDivergent(format!(
            "tail exponent must be positive for the integral to converge, got {exponent}"
        )));
    }
    if bound <= 0.0 {
        return Ok((1.0, false));
    }
    let radius = (bound / (spec.truncation_tol * exponent))
        .powf(1.0 / exponent)
        .max(1.0);
    if radius > spec.max_radius_cap {
        Ok((spec.max_radius_cap, true))
    } else {
        Ok((radius, false))
    }
}

const GRADING_LEVELS: i32 = 45;
const PANEL_BUDGET: usize = 500_000;

/// Merges boundaries closer than floating-point resolution allows.
fn dedup_close(pts: &mut Vec<f64>) {
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|b, a| (*b - *a).abs() <= 1e-13 * b.abs().max(a.abs()));
}

/// Panel boundaries for `[a, b]`: geometric growth panels when requested,
/// graded refinement into every interior cusp from both sides (and into
/// the left endpoint when it carries a kink of its own), and a uniform
/// split of any panel wider than the oscillation ceiling.
fn build_boundaries(
    a: f64,
    b: f64,
    cusps: &[f64],
    geometric: bool,
    refine_left: bool,
    max_width: Option<f64>,
) -> Result<Vec<f64>> {
    debug_assert!(a < b);
    let mut pts = vec![a, b];
    let inner: Vec<f64> = cusps
        .iter()
        .copied()
        .filter(|&c| c > a * (1.0 + 1e-13) && c < b * (1.0 - 1e-13))
        .collect();
    pts.extend(inner.iter().copied());
    if geometric && a > 0.0 {
        let mut x = 2.0 * a;
        while x < b {
            pts.push(x);
            x *= 2.0;
        }
    }
    dedup_close(&mut pts);
    let mut graded = Vec::new();
    for &c in &inner {
        let i = match pts.binary_search_by(|x| x.total_cmp(&c)) {
            Ok(i) => i,
            Err(_) => continue,
        };
        if i == 0 || i + 1 == pts.len() {
            continue;
        }
        let prev = pts[i - 1];
        let next = pts[i + 1];
        for k in 1..=GRADING_LEVELS {
            let f = 0.5f64.powi(k);
            graded.push(c - (c - prev) * f);
            graded.push(c + (next - c) * f);
        }
    }
    if refine_left {
        let next = pts[1];
        for k in 1..=GRADING_LEVELS {
            graded.push(a + (next - a) * 0.5f64.powi(k));
        }
    }
    pts.extend(graded);
    dedup_close(&mut pts);
    if let Some(w) = max_width {
        if !(w > 0.0) {
            return Err(Error::Domain("panel width ceiling must be positive".into()));
        }
        let mut split = Vec::with_capacity(pts.len());
        for pair in pts.windows(2) {
            let (u, v) = (pair[0], pair[1]);
            split.push(u);
            if v - u > w {
                let pieces = ((v - u) / w).ceil() as usize;
                if split.len() + pieces > PANEL_BUDGET {
                    return Err(Error::Convergence(format!(
                        "panel budget exceeded splitting [{u}, {v}] at width {w}"
                    )));
                }
                let h = (v - u) / pieces as f64;
                for i in 1..pieces {
                    split.push(u + h * i as f64);
                }
            }
        }
        split.push(b);
        pts = split;
    }
    if pts.len() > PANEL_BUDGET {
        return Err(Error::Convergence(
            "panel budget exceeded building an integration mesh".into(),
        ));
    }
    Ok(pts)
}

/// Gauss-Legendre sum of `f` over `[a, b]`.
fn gl_sum<F>(rule: &[(f64, f64)], a: f64, b: f64, f: &F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for &(x, w) in rule {
        let rho = mid + half * x;
        let v = f(rho)?;
        if !v.is_finite() {
            return Err(Error::Convergence(format!(
                "non-finite integrand sample at rho = {rho}"
            )));
        }
        acc += w * v;
    }
    Ok(acc * half)
}

/// Result of a chained Gauss-Legendre sweep: the total plus the last
/// panel's value and left edge, which the decay checks inspect.
struct ChainOutcome {
    total: f64,
    last_panel: f64,
    last_start: f64,
}

/// Integrates `f` over `[a, b]` on panels built by [`build_boundaries`].
fn chained_gl<F>(
    f: &F,
    a: f64,
    b: f64,
    cusps: &[f64],
    geometric: bool,
    refine_left: bool,
    max_width: Option<f64>,
    spec: &QuadratureSpec,
) -> Result<ChainOutcome>
where
    F: Fn(f64) -> Result<f64>,
{
    let rule = gauss_legendre(spec.smooth_nodes)?;
    let bounds = build_boundaries(a, b, cusps, geometric, refine_left, max_width)?;
    let mut out = ChainOutcome {
        total: 0.0,
        last_panel: 0.0,
        last_start: a,
    };
    for pair in bounds.windows(2) {
        out.last_panel = gl_sum(&rule, pair[0], pair[1], f)?;
        out.last_start = pair[0];
        out.total += out.last_panel;
    }
    Ok(out)
}

/// Integrates a smooth function over `[a, b]` on panels that respect the
/// given kinks and width ceiling, with geometric panel growth when the
/// interval spans many octaves of a decaying integrand.
pub fn panel_chain<F>(
    f: F,
    a: f64,
    b: f64,
    geometric: bool,
    hints: &RadialHints,
    spec: &QuadratureSpec,
) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::Domain(format!(
            "panel chain needs finite bounds with a < b, got [{a}, {b}]"
        )));
    }
    chained_gl(
        &f,
        a,
        b,
        hints.breakpoints,
        geometric,
        false,
        hints.max_panel_width,
        spec,
    )
    .map(|out| out.total)
}

/// Integrates `(rho - a)^exponent g(rho)` over `[a, b]` with a Gauss-Jacobi
/// rule matched to the endpoint singularity, `exponent > -1`.
pub fn jacobi_panel<F>(g: F, a: f64, b: f64, exponent: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::Domain(format!(
            "Jacobi panel needs finite bounds with a < b, got [{a}, {b}]"
        )));
    }
    let rule = gauss_jacobi(spec.jacobi_nodes, 0.0, exponent)?;
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for &(x, w) in rule.iter() {
        let rho = a + half * (1.0 + x);
        let v = g(rho)?;
        if !v.is_finite() {
            return Err(Error::Convergence(format!(
                "non-finite integrand sample at rho = {rho}"
            )));
        }
        acc += w * v;
    }
    Ok(acc * half.powf(exponent + 1.0))
}

/// Declared far-field behavior of the smooth factor in a radial integral.
#[derive(Clone, Copy, Debug)]
pub enum TailBehavior {
    /// `|g(rho)| <= bound * rho^growth` beyond the integration range; the
    /// tail is truncated once its bound drops below the tolerance.
    Decay { bound: f64, growth: f64 },
    /// `g(rho) = coeff * rho^power` up to negligible error for
    /// `rho >= from`; the tail is added in closed form.
    PowerLimit { coeff: f64, power: f64, from: f64 },
}

/// Coefficients of `(1 - q)^(-s) = sum_k c_k q^k`.
fn binom_coeffs(s: f64) -> [f64; 5] {
    let c1 = s;
    let c2 = s * (s + 1.0) / 2.0;
    let c3 = s * (s + 1.0) * (s + 2.0) / 6.0;
    let c4 = s * (s + 1.0) * (s + 2.0) * (s + 3.0) / 24.0;
    [1.0, c1, c2, c3, c4]
}

/// `int_r^inf g(rho) (rho^2 - r^2)^(-s) drho`.
///
/// The octave `[r, 2r]` runs on a Gauss-Jacobi panel absorbing the
/// `(rho - r)^(-s)` singularity; the rest runs on geometric panels up to a
/// radius where the declared tail either drops below the truncation
/// tolerance or is replaced by the closed-form integral of its power-law
/// limit.
pub fn annulus_integral<F>(
    g: F,
    r: f64,
    s: f64,
    tail: &TailBehavior,
    hints: &RadialHints,
    spec: &QuadratureSpec,
) -> Result<Evaluation>
where
    F: Fn(f64) -> Result<f64>,
{
    check_s(s)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!(
            "annulus radius must be positive, got {r}"
        )));
    }
    let kernel = |rho: f64| ((rho - r) * (rho + r)).powf(-s);
    let mut capped = false;
    let mut analytic = 0.0;
    let mut decay_check: Option<(f64, f64)> = None;
    let far = match *tail {
        TailBehavior::Decay { bound, growth } => {
            if !bound.is_finite() || bound < 0.0 {
                return Err(Error::TailDivergent(format!(
                    "tail bound must be finite and nonnegative, got {bound}"
                )));
            }
            let e = 2.0 * s - 1.0 - growth;
            let scale = bound * (4.0f64 / 3.0).powf(s);
            let (radius, hit) = truncation_radius(spec, scale, e)?;
            capped = hit;
            decay_check = Some((scale, e));
            radius.max(2.0 * r)
        }
        TailBehavior::PowerLimit { coeff, power, from } => {
            let e = 2.0 * s - 1.0 - power;
            if e <= 0.0 {
                return Err(Error::TailDivergent(format!(
                    "power-law limit rho^{power} is not integrable against the annulus kernel"
                )));
            }
            let c = binom_coeffs(s);
            let mut radius = from.max(2.0 * r);
            if coeff != 0.0 {
                let rem_target = 0.1 * spec.truncation_tol;
                let need = (4.0 * coeff.abs() * c[4] * r.powi(8) / (rem_target * (e + 8.0)))
                    .powf(1.0 / (e + 8.0));
                radius = radius.max(need);
            }
            if radius > spec.max_radius_cap {
                radius = spec.max_radius_cap.max(2.0 * r);
                capped = true;
            }
            if coeff != 0.0 {
                for (k, ck) in c.iter().enumerate().take(4) {
                    let ek = e + 2.0 * k as f64;
                    analytic += coeff * ck * r.powi(2 * k as i32) * radius.powf(-ek) / ek;
                }
            }
            radius
        }
    };
    let mut total = 0.0;
    // Singular octave [r, min(2r, far)].
    let octave_end = far.min(2.0 * r);
    let mut first_end = octave_end;
    for &c in hints.breakpoints {
        if c > r * (1.0 + 1e-13) && c < first_end {
            first_end = c;
        }
    }
    if let Some(w) = hints.max_panel_width {
        first_end = first_end.min(r + w);
    }
    total += jacobi_panel(
        |rho| g(rho).map(|v| v * (rho + r).powf(-s)),
        r,
        first_end,
        -s,
        spec,
    )?;
    if first_end < octave_end {
        total += chained_gl(
            &|rho: f64| g(rho).map(|v| v * kernel(rho)),
            first_end,
            octave_end,
            hints.breakpoints,
            false,
            true,
            hints.max_panel_width,
            spec,
        )?
        .total;
    }
    // Geometric panels beyond the octave.
    if far > octave_end * (1.0 + 1e-13) {
        let out = chained_gl(
            &|rho: f64| g(rho).map(|v| v * kernel(rho)),
            octave_end,
            far,
            hints.breakpoints,
            true,
            false,
            hints.max_panel_width,
            spec,
        )?;
        total += out.total;
        if let Some((scale, e)) = decay_check {
            let claimed = scale * (out.last_start.powf(-e) - far.powf(-e)) / e;
            if out.last_panel.abs() > 1.5 * claimed + 1e-13 * (1.0 + total.abs()) {
                return Err(Error::TailDivergent(format!(
                    "last annulus panel {} exceeds its declared decay bound {claimed}",
                    out.last_panel
                )));
            }
        }
    }
    Ok(Evaluation {
        value: total + analytic,
        tail_truncated: capped,
    })
}

/// `int_r^inf f(rho) [(rho^2 - r^2)^(-s) - rho^(-2s)] drho`.
///
/// The kernel difference is evaluated as
/// `rho^(-2s) expm1(-s ln1p(-(r/rho)^2))` beyond the first octave, where
/// direct subtraction would cancel; on `[r, 2r]` the two parts integrate
/// separately, the singular one on a Jacobi panel.
pub fn annulus_minus_power<F>(
    f: F,
    r: f64,
    s: f64,
    tail: &TailBehavior,
    hints: &RadialHints,
    spec: &QuadratureSpec,
) -> Result<Evaluation>
where
    F: Fn(f64) -> Result<f64>,
{
    check_s(s)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!(
            "annulus radius must be positive, got {r}"
        )));
    }
    let mut capped = false;
    let mut analytic = 0.0;
    let mut decay_check: Option<(f64, f64)> = None;
    let far = match *tail {
        TailBehavior::Decay { bound, growth } => {
            if !bound.is_finite() || bound < 0.0 {
                return Err(Error::TailDivergent(format!(
                    "tail bound must be finite and nonnegative, got {bound}"
                )));
            }
            let e = 2.0 * s + 1.0 - growth;
            if e <= 0.0 {
                return Err(Error::TailDivergent(format!(
                    "growth rho^{growth} defeats the r^2 gain of the kernel difference"
                )));
            }
            let scale = bound * 2.0 * s * r * r * (4.0f64 / 3.0).powf(s + 1.0);
            let (radius, hit) = truncation_radius(spec, scale, e)?;
            capped = hit;
            decay_check = Some((scale, e));
            radius.max(2.0 * r)
        }
        TailBehavior::PowerLimit { coeff, power, from } => {
            let e = 2.0 * s - 1.0 - power;
            if e + 2.0 <= 0.0 {
                return Err(Error::TailDivergent(format!(
                    "power-law limit rho^{power} is not integrable against the kernel difference"
                )));
            }
            let c = binom_coeffs(s);
            let mut radius = from.max(2.0 * r);
            if coeff != 0.0 {
                let rem_target = 0.1 * spec.truncation_tol;
                let need = (4.0 * coeff.abs() * c[4] * r.powi(8) / (rem_target * (e + 8.0)))
                    .powf(1.0 / (e + 8.0));
                radius = radius.max(need);
            }
            if radius > spec.max_radius_cap {
                radius = spec.max_radius_cap.max(2.0 * r);
                capped = true;
            }
            if coeff != 0.0 {
                for (k, ck) in c.iter().enumerate().take(4).skip(1) {
                    let ek = e + 2.0 * k as f64;
                    analytic += coeff * ck * r.powi(2 * k as i32) * radius.powf(-ek) / ek;
                }
            }
            radius
        }
    };
    let mut total = 0.0;
    let octave_end = far.min(2.0 * r);
    let mut first_end = octave_end;
    for &c in hints.breakpoints {
        if c > r * (1.0 + 1e-13) && c < first_end {
            first_end = c;
        }
    }
    if let Some(w) = hints.max_panel_width {
        first_end = first_end.min(r + w);
    }
    // Singular part minus plain part on [r, first_end].
    total += jacobi_panel(
        |rho| f(rho).map(|v| v * (rho + r).powf(-s)),
        r,
        first_end,
        -s,
        spec,
    )?;
    total -= chained_gl(
        &|rho: f64| f(rho).map(|v| v * rho.powf(-2.0 * s)),
        r,
        first_end,
        hints.breakpoints,
        false,
        false,
        hints.max_panel_width,
        spec,
    )?
    .total;
    if first_end < octave_end {
        total += chained_gl(
            &|rho: f64| f(rho).map(|v| v * (((rho - r) * (rho + r)).powf(-s) - rho.powf(-2.0 * s))),
            first_end,
            octave_end,
            hints.breakpoints,
            false,
            true,
            hints.max_panel_width,
            spec,
        )?
        .total;
    }
    if far > octave_end * (1.0 + 1e-13) {
        let difference = |rho: f64| {
            let q = (r / rho) * (r / rho);
            rho.powf(-2.0 * s) * (-s * (-q).ln_1p()).exp_m1()
        };
        let out = chained_gl(
            &|rho: f64| f(rho).map(|v| v * difference(rho)),
            octave_end,
            far,
            hints.breakpoints,
            true,
            false,
            hints.max_panel_width,
            spec,
        )?;
        total += out.total;
        if let Some((scale, e)) = decay_check {
            let claimed = scale * (out.last_start.powf(-e) - far.powf(-e)) / e;
            if out.last_panel.abs() > 1.5 * claimed + 1e-13 * (1.0 + total.abs()) {
                return Err(Error::TailDivergent(format!(
                    "last kernel-difference panel {} exceeds its declared bound {claimed}",
                    out.last_panel
                )));
            }
        }
    }
    Ok(Evaluation {
        value: total + analytic,
        tail_truncated: capped,
    })
}

/// Near-origin model of a principal-value integrand:
/// `h(rho) = linear * rho + quadratic * rho^2 + O(rho^3)`.
///
/// `magnitude` scales the floating-point floor of the consistency check;
/// pass something like the field's sup norm.
#[derive(Clone, Copy, Debug)]
pub struct NearModel {
    pub linear: f64,
    pub quadratic: f64,
    pub magnitude: f64,
}

/// `int_0^inf h(rho) rho^(-1-2s) drho` for `h` with the declared
/// near-origin expansion.
///
/// Below `switch_radius` the integral uses the model in closed form, which
/// sidesteps the catastrophic cancellation of sampled second differences
/// at tiny radii; the engine cross-checks `h` against the model at the
/// switch scale and refuses to proceed on disagreement.  A nonzero linear
/// term is only integrable for `s < 1/2`.
pub fn ray_pv_integral<F>(
    h: F,
    s: f64,
    near: &NearModel,
    switch_radius: f64,
    tail: &TailBehavior,
    hints: &RadialHints,
    spec: &QuadratureSpec,
) -> Result<Evaluation>
where
    F: Fn(f64) -> Result<f64>,
{
    check_s(s)?;
    if !(switch_radius > 0.0 && switch_radius.is_finite()) {
        return Err(Error::Domain(format!(
            "switch radius must be positive, got {switch_radius}"
        )));
    }
    let mut analytic = 0.0;
    if near.linear != 0.0 {
        if 2.0 * s >= 1.0 {
            return Err(Error::NearOrigin(format!(
                "linear term {} at the origin is not integrable for s = {s}",
                near.linear
            )));
        }
        analytic += near.linear * switch_radius.powf(1.0 - 2.0 * s) / (1.0 - 2.0 * s);
    }
    analytic += near.quadratic * switch_radius.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
    // The model must reproduce h at the switch scale.
    let mut misses = 0;
    let mut detail = String::new();
    for k in 0..3 {
        let rho = switch_radius * 0.5f64.powi(k);
        let sample = h(rho)?;
        let model = near.linear * rho + near.quadratic * rho * rho;
        let err = (sample - model).abs();
        let tol = 0.1 * (sample.abs() + model.abs()) + 1e-13 * near.magnitude.abs();
        if err > tol {
            misses += 1;
            if detail.is_empty() {
                detail = format!("h({rho}) = {sample} vs model {model}");
            }
        }
    }
    if misses >= 2 {
        return Err(Error::NearOrigin(format!(
            "integrand disagrees with its declared near-origin expansion: {detail}"
        )));
    }
    let mut capped = false;
    let mut decay_check: Option<(f64, f64)> = None;
    let far = match *tail {
        TailBehavior::Decay { bound, growth } => {
            if !bound.is_finite() || bound < 0.0 {
                return Err(Error::TailDivergent(format!(
                    "tail bound must be finite and nonnegative, got {bound}"
                )));
            }
            let e = 2.0 * s - growth;
            let (radius, hit) = truncation_radius(spec, bound, e)?;
            capped = hit;
            decay_check = Some((bound, e));
            radius.max(2.0 * switch_radius)
        }
        TailBehavior::PowerLimit { coeff, power, from } => {
            let e = 2.0 * s - power;
            if e <= 0.0 {
                return Err(Error::TailDivergent(format!(
                    "power-law limit rho^{power} is not integrable against the ray kernel"
                )));
            }
            let radius = from.max(2.0 * switch_radius);
            analytic += coeff * radius.powf(-e) / e;
            radius
        }
    };
    let out = chained_gl(
        &|rho: f64| h(rho).map(|v| v * rho.powf(-1.0 - 2.0 * s)),
        switch_radius,
        far,
        hints.breakpoints,
        true,
        false,
        hints.max_panel_width,
        spec,
    )?;
    if let Some((bound, e)) = decay_check {
        let claimed = bound * (out.last_start.powf(-e) - far.powf(-e)) / e;
        if out.last_panel.abs() > 1.5 * claimed + 1e-13 * (1.0 + out.total.abs()) {
            return Err(Error::TailDivergent(format!(
                "last ray panel {} exceeds its declared decay bound {claimed}",
                out.last_panel
            )));
        }
    }
    Ok(Evaluation {
        value: analytic + out.total,
        tail_truncated: capped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const SPEC: QuadratureSpec = QuadratureSpec {
        jacobi_nodes: 64,
        smooth_nodes: 128,
        sphere_order: 64,
        truncation_tol: 1e-9,
        max_radius_cap: 1e6,
        inner_cutoff: None,
        self_check: false,
    };

    #[test]
    fn legendre_rule_is_exact_on_polynomials() {
        let rule = gauss_legendre(8).unwrap();
        for k in 0..16usize {
            let exact = if k % 2 == 0 {
                2.0 / (k as f64 + 1.0)
            } else {
                0.0
            };
            let got: f64 = rule.iter().map(|&(x, w)| w * x.powi(k as i32)).sum();
            assert_relative_eq!(got, exact, epsilon = 1e-14);
        }
    }

    #[test]
    fn legendre_two_point_rule_is_the_classical_one() {
        let rule = gauss_legendre(2).unwrap();
        assert_relative_eq!(rule[0].0, -(1.0f64 / 3.0).sqrt(), epsilon = 1e-14);
        assert_relative_eq!(rule[1].0, (1.0f64 / 3.0).sqrt(), epsilon = 1e-14);
        assert_relative_eq!(rule[0].1, 1.0, epsilon = 1e-14);
        assert_relative_eq!(rule[1].1, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn jacobi_rule_integrates_its_weight_moments() {
        // Weight (1 + x)^(-1/2): total mass 2 sqrt(2), first moment
        // -2 sqrt(2) / 3.
        let rule = gauss_jacobi(12, 0.0, -0.5).unwrap();
        let mass: f64 = rule.iter().map(|&(_, w)| w).sum();
        let first: f64 = rule.iter().map(|&(x, w)| w * x).sum();
        assert_relative_eq!(mass, 2.0 * 2.0f64.sqrt(), epsilon = 1e-13);
        assert_relative_eq!(first, -2.0 * 2.0f64.sqrt() / 3.0, epsilon = 1e-13);
    }

    #[test]
    fn rules_are_memoized() {
        let a = gauss_jacobi(32, 0.0, -0.25).unwrap();
        let b = gauss_jacobi(32, 0.0, -0.25).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        let s1 = sphere_rule(3, 32).unwrap();
        let s2 = sphere_rule(3, 32).unwrap();
        assert!(Arc::ptr_eq(&s1, &s2));
    }

    #[test]
    fn jacobi_panel_matches_reference_integrals() {
        // int_0^1 t^(-1/2) e^t dt.
        let v = jacobi_panel(|t| Ok(t.exp()), 0.0, 1.0, -0.5, &SPEC).unwrap();
        assert_relative_eq!(v, 2.925_303_491_814_363_203_5, max_relative = 1e-13);
        // int_1^3 (rho - 1)^(-0.3) cos(rho) drho.
        let v = jacobi_panel(|r| Ok(r.cos()), 1.0, 3.0, -0.3, &SPEC).unwrap();
        assert_relative_eq!(v, -0.458_039_124_841_594_318_81, max_relative = 1e-13);
        // A positive singular exponent also works: int_0^2 t^1.5 dt.
        let v = jacobi_panel(|_| Ok(1.0), 0.0, 2.0, 1.5, &SPEC).unwrap();
        assert_relative_eq!(v, 2.0f64.powf(2.5) / 2.5, max_relative = 1e-13);
    }

    #[test]
    fn panel_chain_handles_kinks_and_oscillation() {
        // Kink at 2: int_1^4 |rho - 2| drho = 0.5 + 2.
        let v = panel_chain(
            |r| Ok((r - 2.0f64).abs()),
            1.0,
            4.0,
            false,
            &RadialHints {
                breakpoints: &[2.0],
                max_panel_width: None,
            },
            &SPEC,
        )
        .unwrap();
        assert_relative_eq!(v, 2.5, max_relative = 1e-12);
        // Oscillation: int_0^317 cos = sin(317), forced onto narrow panels.
        let v = panel_chain(
            |r| Ok(r.cos()),
            1e-3,
            317.0,
            true,
            &RadialHints {
                breakpoints: &[],
                max_panel_width: Some(6.0 * 2.0 * std::f64::consts::PI),
            },
            &SPEC,
        )
        .unwrap();
        assert_relative_eq!(
            v,
            0.296_339_788_497_322_419_15 - (1e-3f64).sin(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn annulus_integral_matches_beta_function() {
        // int_r^inf (rho^2 - r^2)^(-s) rho^(-1) drho
        //     = r^(-2s) pi / (2 sin(pi s)).
        for (s, expect) in [
            (0.25, 4.055_778_675_973_611_896_9),
            (0.6, 7.004_353_332_546_080_372_8),
        ] {
            let tail = TailBehavior::PowerLimit {
                coeff: 1.0,
                power: -1.0,
                from: 0.6,
            };
            let v = annulus_integral(
                |rho| Ok(1.0 / rho),
                0.3,
                s,
                &tail,
                &RadialHints::NONE,
                &SPEC,
            )
            .unwrap();
            assert!(!v.tail_truncated);
            assert_relative_eq!(v.value, expect, max_relative = 1e-9);
        }
    }

    #[test]
    fn annulus_integral_with_decay_tail_agrees_with_power_limit() {
        let exact = 4.055_778_675_973_611_896_9;
        let tail = TailBehavior::Decay {
            bound: 1.0,
            growth: -1.0,
        };
        let v = annulus_integral(
            |rho| Ok(1.0 / rho),
            0.3,
            0.25,
            &tail,
            &RadialHints::NONE,
            &SPEC,
        )
        .unwrap();
        // s = 0.25 gives tail exponent 2s = 0.5, whose truncation radius
        // exceeds the cap; the capped bias must stay within the documented
        // bound * R^(-E) / E.
        assert!(v.tail_truncated);
        let bias = (4.0f64 / 3.0).powf(0.25) * 1e6f64.powf(-0.5) / 0.5;
        assert!((v.value - exact).abs() < bias);
        assert_relative_eq!(v.value, exact, max_relative = 1e-2);
    }

    #[test]
    fn annulus_minus_power_matches_closed_form() {
        // int_r^inf [(rho^2 - r^2)^(-s) - rho^(-2s)] rho^(-1) drho
        //     = r^(-2s) [pi / (2 sin(pi s)) - 1 / (2s)].
        for (s, expect) in [
            (0.25, 0.404_294_959_272_504_473_91),
            (0.6, 3.470_298_786_603_324_529_3),
        ] {
            let tail = TailBehavior::PowerLimit {
                coeff: 1.0,
                power: -1.0,
                from: 0.6,
            };
            let v = annulus_minus_power(
                |rho| Ok(1.0 / rho),
                0.3,
                s,
                &tail,
                &RadialHints::NONE,
                &SPEC,
            )
            .unwrap();
            assert!(!v.tail_truncated);
            // The truncated power-limit series is budgeted at a tenth of
            // the truncation tolerance, which dominates quadrature error.
            assert_relative_eq!(v.value, expect, max_relative = 1e-9);
        }
    }

    #[test]
    fn ray_pv_integral_matches_reference_values() {
        // int_0^inf min(rho^2, 1) rho^(-5/2) drho = 8/3, kink at rho = 1.
        let near = NearModel {
            linear: 0.0,
            quadratic: 1.0,
            magnitude: 1.0,
        };
        let v = ray_pv_integral(
            |rho| Ok(rho.powi(2).min(1.0)),
            0.75,
            &near,
            1e-4,
            &TailBehavior::Decay {
                bound: 1.0,
                growth: 0.0,
            },
            &RadialHints {
                breakpoints: &[1.0],
                max_panel_width: None,
            },
            &SPEC,
        )
        .unwrap();
        assert_relative_eq!(v.value, 8.0 / 3.0, max_relative = 1e-9);
        // int_0^inf rho^2 e^(-rho) rho^(-1-1.2) drho = Gamma(0.8).
        let v = ray_pv_integral(
            |rho| Ok(rho * rho * (-rho).exp()),
            0.6,
            &near,
            1e-5,
            &TailBehavior::Decay {
                bound: 0.6,
                growth: 0.0,
            },
            &RadialHints::NONE,
            &SPEC,
        )
        .unwrap();
        assert_relative_eq!(v.value, 1.164_229_713_725_303_373_6, max_relative = 1e-9);
    }

    #[test]
    fn ray_pv_integral_rejects_undeclared_linear_part() {
        let near = NearModel {
            linear: 0.0,
            quadratic: 0.0,
            magnitude: 1.0,
        };
        let err = ray_pv_integral(
            |rho| Ok(rho),
            0.75,
            &near,
            1e-4,
            &TailBehavior::Decay {
                bound: 1.0,
                growth: 1.0,
            },
            &RadialHints::NONE,
            &SPEC,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NearOrigin(_)));
        // A declared linear part is likewise rejected when s >= 1/2.
        let near = NearModel {
            linear: 1.0,
            quadratic: 0.0,
            magnitude: 1.0,
        };
        let err = ray_pv_integral(
            |rho| Ok(rho),
            0.75,
            &near,
            1e-4,
            &TailBehavior::Decay {
                bound: 1.0,
                growth: 1.0,
            },
            &RadialHints::NONE,
            &SPEC,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NearOrigin(_)));
    }

    #[test]
    fn tail_divergence_is_reported() {
        let err = annulus_integral(
            |rho| Ok(rho),
            0.5,
            0.25,
            &TailBehavior::PowerLimit {
                coeff: 1.0,
                power: 1.0,
                from: 1.0,
            },
            &RadialHints::NONE,
            &SPEC,
        )
        .unwrap_err();
        assert!(matches!(err, Error::TailDivergent(_)));
        let err = truncation_radius(&SPEC, 1.0, -0.5).unwrap_err();
        assert!(matches!(err, Error::TailDivergent(_)));
    }

    #[test]
    fn mis_declared_decay_is_caught_by_the_last_panel_check() {
        // The integrand decays like rho^(-1) but the tail claims rho^(-3).
        let err = ray_pv_integral(
            |rho| Ok(rho * rho / (1.0 + rho)),
            0.75,
            &NearModel {
                linear: 0.0,
                quadratic: 1.0,
                magnitude: 1.0,
            },
            1e-4,
            &TailBehavior::Decay {
                bound: 1.0,
                growth: -3.0,
            },
            &RadialHints::NONE,
            &SPEC,
        );
        assert!(matches!(err, Err(Error::TailDivergent(_))));
    }

    #[test]
    fn sphere_rules_integrate_low_moments() {
        for n in 1..=3usize {
            let rule = sphere_rule(n, 64).unwrap();
            let area: f64 = rule.iter().map(|&(_, w)| w).sum();
            assert_relative_eq!(
                area,
                crate::constants::sphere_area(n).unwrap(),
                max_relative = 1e-12
            );
            // int omega_1^2 = |S^(n-1)| / n.
            let second: f64 = rule.iter().map(|&(o, w)| w * o[0] * o[0]).sum();
            assert_relative_eq!(second, area / n as f64, max_relative = 1e-12);
            // Odd moments vanish.
            let odd: f64 = rule.iter().map(|&(o, w)| w * o[0]).sum();
            assert!(odd.abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_rule_matches_p_moment_constant() {
        // Odd p leaves |omega_1|^(p-2) with derivative kinks on the great
        // circle omega_1 = 0, so the product rules converge at second
        // order there instead of spectrally; the tolerance reflects that.
        for n in 2..=3usize {
            for &(p, tol) in &[(2.0, 1e-12), (3.0, 2e-3), (4.0, 1e-10)] {
                let rule = sphere_rule(n, 64).unwrap();
                let got: f64 = rule
                    .iter()
                    .map(|&(o, w)| w * o[0].abs().powf(p - 2.0))
                    .sum();
                assert_relative_eq!(
                    got,
                    crate::constants::sphere_p_moment(n, p).unwrap(),
                    max_relative = tol
                );
            }
        }
    }

    #[test]
    fn cap_rule_reproduces_cap_moments() {
        for n in 2..=3usize {
            let c = 0.418_111_148_984_287_385_39;
            let axis = geom::normalize([0.3, -0.7, if n == 3 { 0.5 } else { 0.0 }], 0.0).unwrap();
            let rule = cap_rule(n, axis, c, 64).unwrap();
            let m = crate::constants::cap_moments(n, c).unwrap();
            let area: f64 = rule.iter().map(|&(_, w)| w).sum();
            assert_relative_eq!(area, 1.0 / m.gamma_cap, max_relative = 1e-10);
            // All nodes lie on the sphere and inside the cap.
            for &(o, _) in rule.iter() {
                assert_relative_eq!(geom::norm(o), 1.0, epsilon = 1e-12);
                assert!(geom::dot(o, axis) >= c - 1e-12);
            }
            // Axial second moment: half of it is beta + alpha per the
            // moment definitions.
            let axial: f64 = rule
                .iter()
                .map(|&(o, w)| w * geom::dot(o, axis).powi(2))
                .sum();
            assert_relative_eq!(0.5 * axial, m.beta + m.alpha, max_relative = 1e-10);
        }
    }

    #[test]
    fn self_check_flags_resolution_dependence() {
        let spec = QuadratureSpec {
            self_check: true,
            ..SPEC
        };
        // A well-resolved integral passes and returns the finer value.
        let v = self_checked(&spec, |sp| {
            panel_chain(|r| Ok(r.cos()), 0.0, 1.0, false, &RadialHints::NONE, sp).map(|value| {
                Evaluation {
                    value,
                    tail_truncated: false,
                }
            })
        })
        .unwrap();
        assert_relative_eq!(v.value, 1.0f64.sin(), max_relative = 1e-13);
        // An integrand whose value depends on the node count fails.
        let err = self_checked(&spec, |sp| {
            Ok(Evaluation {
                value: sp.smooth_nodes as f64,
                tail_truncated: false,
            })
        });
        assert!(matches!(err, Err(Error::Convergence(_))));
    }

    #[test]
    fn spec_validation_rejects_nonsense() {
        let mut spec = QuadratureSpec::default();
        spec.validate().unwrap();
        spec.smooth_nodes = 2;
        assert!(spec.validate().is_err());
        let mut spec = QuadratureSpec::default();
        spec.truncation_tol = -1.0;
        assert!(spec.validate().is_err());
        let mut spec = QuadratureSpec::default();
        spec.inner_cutoff = Some(0.0);
        assert!(spec.validate().is_err());
    }
}
