//! The fractional p-Laplacian and its annular mean-value kernel.
//!
//! Three numerical devices carry this module.  First, the operator's
//! principal value is evaluated through a symmetrized near-ball integrand
//! that pairs `u(x - y)` with `u(x + y)`; the paired form is `O(|y|^p)`
//! and integrates against the kernel without any principal-value limit.
//! Second, every radial integral declares a far-field policy derived from
//! the field's tail profile, so truncation is either exact (localized
//! fields), bounded below the tolerance, or honestly flagged when the
//! radius cap bites.  Third, the expansion residual is computed from a
//! difference-form integrand rather than by subtracting two large
//! quadratures, which would erase the very quantity being measured.

use crate::fields::{Field, FieldOps, TailProfile};
use crate::geom::{self, Matrix, Vector};
use crate::quadrature::{self, QuadratureSpec, RadialHints, TailBehavior};
use crate::{constants, Error, Evaluation, Result};
use rayon::prelude::*;

/// Evaluation-point parameters shared by the fractional operators.
#[derive(Clone, Copy, Debug)]
pub struct OperatorParams {
    pub n: usize,
    pub s: f64,
    pub p: f64,
    pub x: Vector,
    pub r: f64,
}

impl OperatorParams {
    pub fn new(n: usize, s: f64, p: f64, x: Vector, r: f64) -> Self {
        OperatorParams { n, s, p, x, r }
    }

    /// Checks the parameter ranges against the field; returns the
    /// smoothness radius at `x`.
    pub fn validate(&self, u: &Field) -> Result<f64> {
        constants::check_dim(self.n)?;
        constants::check_s(self.s)?;
        constants::check_p(self.p)?;
        if self.n != u.dim() {
            return Err(Error::Domain(format!(
                "parameter dimension {} does not match the field dimension {}",
                self.n,
                u.dim()
            )));
        }
        let eta = u.smooth_radius(self.x);
        if !(self.r > 0.0 && self.r < 0.5 * eta) {
            return Err(Error::Domain(format!(
                "kernel radius must lie in (0, {}), got {}",
                0.5 * eta,
                self.r
            )));
        }
        Ok(eta)
    }
}

/// `a^q - b^q` for nonnegative `a`, `b` without cancellation when the
/// bases are close.
fn pow_diff(a: f64, b: f64, q: f64) -> f64 {
    if q == 0.0 || a == b {
        return 0.0;
    }
    if b == 0.0 {
        return a.powf(q);
    }
    if a == 0.0 {
        return -b.powf(q);
    }
    let rel = (a - b) / b;
    if rel.abs() < 0.25 {
        b.powf(q) * (q * rel.ln_1p()).exp_m1()
    } else {
        a.powf(q) - b.powf(q)
    }
}

/// Everything fixed over one operator evaluation: the point data, the
/// local Taylor model, and the declared far-field shape.
struct Scene<'a> {
    u: &'a Field,
    x: Vector,
    ux: f64,
    n: usize,
    s: f64,
    p: f64,
    sp: f64,
    eta: f64,
    sup: f64,
    grad: Vector,
    hess: Matrix,
    profile: TailProfile,
    width_cap: Option<f64>,
}

impl<'a> Scene<'a> {
    fn new(u: &'a Field, params: &OperatorParams) -> Result<Self> {
        let eta = params.validate(u)?;
        let x = params.x;
        Ok(Scene {
            u,
            x,
            ux: u.value(x),
            n: params.n,
            s: params.s,
            p: params.p,
            sp: params.s * params.p,
            eta,
            sup: u.sup_norm(),
            grad: u.gradient(x)?,
            hess: u.hessian(x)?,
            profile: u.tail_profile(),
            width_cap: u.oscillation_wavelength().map(|l| 6.0 * l),
        })
    }

    /// `u(x) - u(x - rho w)`.
    fn delta_minus(&self, w: Vector, rho: f64) -> f64 {
        self.ux - self.u.value(geom::axpy(self.x, -rho, w))
    }

    /// `u(x) - u(x + rho w)`.
    fn delta_plus(&self, w: Vector, rho: f64) -> f64 {
        self.ux - self.u.value(geom::axpy(self.x, rho, w))
    }

    /// Reduced Taylor coefficients along `w`: `u(x) - u(x - rho w)` is
    /// `a1 rho - b1 rho^2 + O(rho^3)`.
    fn taylor(&self, w: Vector) -> (f64, f64) {
        (
            geom::dot(self.grad, w),
            0.5 * geom::quad_form(&self.hess, w),
        )
    }

    /// Derivative kinks of `rho -> u(x - rho w)`.
    fn ray_kinks(&self, w: Vector, flip: bool) -> Vec<f64> {
        let dir = if flip { geom::scale(-1.0, w) } else { w };
        self.u.ray_breakpoints(self.x, dir)
    }

    /// `(coeff, growth)` with `|u(x) - u(x -/+ rho w)| <= coeff rho^growth`
    /// for `rho >= 1`, from the declared profile.
    fn delta_bound(&self) -> (f64, f64) {
        match self.profile {
            TailProfile::Localized { .. } | TailProfile::Bounded => (self.ux.abs() + self.sup, 0.0),
            TailProfile::PowerGrowth { coeff, exponent } => {
                let e = exponent.max(0.0);
                (
                    self.ux.abs() + coeff * (2.0 + geom::norm(self.x)).powf(e),
                    e,
                )
            }
        }
    }

    /// Constant difference value and onset radius once a localized field
    /// has flattened out along every ray from `x`.
    fn settled_difference(&self) -> Option<(f64, f64)> {
        match self.profile {
            TailProfile::Localized {
                far_radius,
                far_value,
            } => Some((self.ux - far_value, far_radius + geom::norm(self.x))),
            _ => None,
        }
    }
}

/// Signed power `|t|^(p-2) t`.
fn phi(t: f64, p: f64) -> f64 {
    t.abs().powf(p - 2.0) * t
}

/// Symmetrized kernel numerator divided by `rho^p`: analytic in `rho`
/// near zero, evaluated from the Taylor model below the switch radius
/// where sampled differences would lose all digits.
fn s_cofactor(sc: &Scene, w: Vector, rho: f64, switch: f64) -> f64 {
    let q = sc.p - 2.0;
    if rho < switch {
        let (a1, b1) = sc.taylor(w);
        let am = (a1 - b1 * rho).abs();
        let ap = (a1 + b1 * rho).abs();
        am.powf(q) * (-2.0 * b1) + pow_diff(ap, am, q) * (-(a1 + b1 * rho)) / rho
    } else {
        let dm = sc.delta_minus(w, rho);
        let dp = sc.delta_plus(w, rho);
        (dm.abs().powf(q) * (dm + dp) + pow_diff(dp.abs(), dm.abs(), q) * dp) / rho.powf(sc.p)
    }
}

/// Radii in `(lo, hi)` where the one-sided differences change sign; the
/// odd-exponent power terms have derivative kinks there.
fn difference_sign_changes(sc: &Scene, w: Vector, lo: f64, hi: f64, switch: f64) -> Vec<f64> {
    let branch = |side: f64, rho: f64| -> f64 {
        if rho < switch {
            let (a1, b1) = sc.taylor(w);
            a1 - side * b1 * rho
        } else if side > 0.0 {
            sc.delta_minus(w, rho)
        } else {
            -sc.delta_plus(w, rho)
        }
    };
    let mut out = Vec::new();
    let samples = 48;
    let ratio = (hi / lo).powf(1.0 / samples as f64);
    for &side in &[1.0, -1.0] {
        let mut prev_rho = lo;
        let mut prev = branch(side, lo);
        for k in 1..=samples {
            let rho = if k == samples { hi } else { lo * ratio.powi(k) };
            let cur = branch(side, rho);
            if prev != 0.0 && cur != 0.0 && prev.signum() != cur.signum() {
                let (mut a, mut b) = (prev_rho, rho);
                for _ in 0..60 {
                    let mid = 0.5 * (a + b);
                    if branch(side, mid).signum() == prev.signum() {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                out.push(0.5 * (a + b));
            }
            prev_rho = rho;
            prev = cur;
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup_by(|b, a| (*b - *a).abs() <= 1e-9 * hi);
    out.retain(|&k| k > lo * (1.0 + 1e-12) && k < hi * (1.0 - 1e-12));
    out
}

/// `(1/2) int_{B_radius} S(y) |y|^(-n-sp) dy` with the symmetrized
/// numerator `S`: the principal-value part of the operator over a ball
/// inside the smoothness radius.
fn symmetrized_ball(sc: &Scene, radius: f64, spec: &QuadratureSpec) -> Result<f64> {
    let beta = sc.p * (1.0 - sc.s) - 1.0;
    let switch = 1e-4 * sc.eta;
    let rule = quadrature::sphere_rule(sc.n, spec.sphere_order)?;
    let parts: Result<Vec<f64>> = rule
        .par_iter()
        .map(|&(w, wt)| {
            let g = |rho: f64| Ok(s_cofactor(sc, w, rho, switch));
            let kinks = difference_sign_changes(sc, w, 1e-6 * radius, radius, switch);
            let first = kinks.first().copied().unwrap_or(radius);
            let mut acc = quadrature::jacobi_panel(&g, 0.0, first, beta, spec)?;
            if first < radius {
                let f = |rho: f64| Ok(s_cofactor(sc, w, rho, switch) * rho.powf(beta));
                let hints = RadialHints {
                    breakpoints: &kinks[1..],
                    max_panel_width: sc.width_cap,
                };
                acc += quadrature::panel_chain(&f, first, radius, false, &hints, spec)?;
            }
            Ok(wt * acc)
        })
        .collect();
    Ok(0.5 * parts?.iter().sum::<f64>())
}

/// `int_{|y| > rho0} phi(u(x) - u(x - y)) |y|^(-n-sp) dy` with the tail
/// policy tied to the field's declared profile.
fn far_field(sc: &Scene, rho0: f64, spec: &QuadratureSpec) -> Result<Evaluation> {
    let (end, truncated, analytic) = match sc.profile {
        TailProfile::Localized { .. } => {
            let (diff, from) = sc.settled_difference().expect("localized profile");
            let end = from.max(2.0 * rho0);
            let area = constants::sphere_area(sc.n)?;
            (
                end,
                false,
                area * phi(diff, sc.p) * end.powf(-sc.sp) / sc.sp,
            )
        }
        TailProfile::Bounded => {
            let bound = (2.0 * sc.sup).powf(sc.p - 1.0);
            let (end, capped) = quadrature::truncation_radius(spec, bound, sc.sp)?;
            let end = end.max(2.0 * rho0);
            // For p = 2 the kernel is linear in the difference, so the
            // u(x) part of the truncated tail integrates in closed form;
            // only the zero-centered remainder is dropped.
            let analytic = if sc.p == 2.0 {
                constants::sphere_area(sc.n)? * sc.ux * end.powf(-sc.sp) / sc.sp
            } else {
                0.0
            };
            (end, capped, analytic)
        }
        TailProfile::PowerGrowth { .. } => {
            let (coeff, growth) = sc.delta_bound();
            let e = sc.sp - growth * (sc.p - 1.0);
            if e <= 0.0 {
                return Err(Error::TailDivergent(format!(
                    "difference growth rho^{} defeats the kernel decay rho^{}",
                    growth * (sc.p - 1.0),
                    -1.0 - sc.sp
                )));
            }
            let (end, capped) = quadrature::truncation_radius(spec, coeff.powf(sc.p - 1.0), e)?;
            (end.max(2.0 * rho0), capped, 0.0)
        }
    };
    let rule = quadrature::sphere_rule(sc.n, spec.sphere_order)?;
    let parts: Result<Vec<f64>> = rule
        .par_iter()
        .map(|&(w, wt)| {
            let f = |rho: f64| Ok(phi(sc.delta_minus(w, rho), sc.p) * rho.powf(-1.0 - sc.sp));
            let kinks = sc.ray_kinks(w, true);
            let hints = RadialHints {
                breakpoints: &kinks,
                max_panel_width: sc.width_cap,
            };
            Ok(wt * quadrature::panel_chain(&f, rho0, end, true, &hints, spec)?)
        })
        .collect();
    Ok(Evaluation {
        value: parts?.iter().sum::<f64>() + analytic,
        tail_truncated: truncated,
    })
}

/// The fractional p-Laplacian at `params.x`, split at
/// `min(params.r, smooth_radius / 4)` into the symmetrized near ball and
/// the direct far field.  The split radius only steers the numerics; the
/// value is independent of it.
pub fn frac_p_laplacian(
    u: &Field,
    params: &OperatorParams,
    spec: &QuadratureSpec,
) -> Result<Evaluation> {
    let sc = Scene::new(u, params)?;
    let rho0 = params.r.min(0.25 * sc.eta);
    let near = symmetrized_ball(&sc, rho0, spec)?;
    let far = far_field(&sc, rho0, spec)?;
    Ok(Evaluation {
        value: near + far.value,
        tail_truncated: far.tail_truncated,
    })
}

enum Flavor {
    /// `|delta|^(p-2)`, the kernel weight.
    Weight,
    /// `|delta|^(p-2) u(x - y)`, the mean's numerator.
    Numerator,
    /// `|delta|^(p-2) delta`, the signed difference form.
    Signed,
}

/// Tail behavior of the radial cofactor `g(rho)` for the given flavor,
/// where the full annular integrand is `g(rho) (rho^2 - r^2)^(-s)`.
fn annulus_tail(sc: &Scene, flavor: &Flavor) -> Result<TailBehavior> {
    let q = sc.p - 2.0;
    let radial = -(1.0 + sc.s * q);
    if let Some((diff, from)) = sc.settled_difference() {
        let far_value = match sc.profile {
            TailProfile::Localized { far_value, .. } => far_value,
            _ => unreachable!(),
        };
        let coeff = match flavor {
            Flavor::Weight => diff.abs().powf(q),
            Flavor::Numerator => diff.abs().powf(q) * far_value,
            Flavor::Signed => phi(diff, sc.p),
        };
        return Ok(TailBehavior::PowerLimit {
            coeff,
            power: radial,
            from,
        });
    }
    let (m, e) = sc.delta_bound();
    let (bound, growth) = match flavor {
        Flavor::Weight => (m.powf(q), e * q + radial),
        Flavor::Numerator => (m.powf(q + 1.0), e * (q + 1.0) + radial),
        Flavor::Signed => (m.powf(q + 1.0), e * (q + 1.0) + radial),
    };
    Ok(TailBehavior::Decay { bound, growth })
}

fn annular_sum<G>(sc: &Scene, spec: &QuadratureSpec, per_direction: G) -> Result<Evaluation>
where
    G: Fn(Vector) -> Result<Evaluation> + Sync,
{
    let rule = quadrature::sphere_rule(sc.n, spec.sphere_order)?;
    let parts: Result<Vec<Evaluation>> = rule
        .par_iter()
        .map(|&(w, wt)| {
            per_direction(w).map(|ev| Evaluation {
                value: wt * ev.value,
                tail_truncated: ev.tail_truncated,
            })
        })
        .collect();
    let parts = parts?;
    Ok(Evaluation {
        value: parts.iter().map(|e| e.value).sum(),
        tail_truncated: parts.iter().any(|e| e.tail_truncated),
    })
}

/// The annular kernel weight: the integral of
/// `(|u(x) - u(x-y)| / |y|^s)^(p-2) |y|^(-n) (|y|^2 - r^2)^(-s)` over
/// `{|y| > r}`.  Strictly positive whenever the field is non-constant
/// somewhere on the annulus; zero for constants with p > 2.
pub fn weight_integral(
    u: &Field,
    params: &OperatorParams,
    spec: &QuadratureSpec,
) -> Result<Evaluation> {
    let sc = Scene::new(u, params)?;
    let q = sc.p - 2.0;
    let tail = annulus_tail(&sc, &Flavor::Weight)?;
    annular_sum(&sc, spec, |w| {
        let g = |rho: f64| Ok(sc.delta_minus(w, rho).abs().powf(q) * rho.powf(-(1.0 + sc.s * q)));
        let kinks = sc.ray_kinks(w, true);
        let hints = RadialHints {
            breakpoints: &kinks,
            max_panel_width: sc.width_cap,
        };
        quadrature::annulus_integral(&g, params.r, sc.s, &tail, &hints, spec)
    })
}

fn mean_numerator(
    sc: &Scene,
    params: &OperatorParams,
    spec: &QuadratureSpec,
) -> Result<Evaluation> {
    let q = sc.p - 2.0;
    let tail = annulus_tail(sc, &Flavor::Numerator)?;
    annular_sum(sc, spec, |w| {
        let g = |rho: f64| {
            let uy = sc.u.value(geom::axpy(sc.x, -rho, w));
            Ok((sc.ux - uy).abs().powf(q) * uy * rho.powf(-(1.0 + sc.s * q)))
        };
        let kinks = sc.ray_kinks(w, true);
        let hints = RadialHints {
            breakpoints: &kinks,
            max_panel_width: sc.width_cap,
        };
        quadrature::annulus_integral(&g, params.r, sc.s, &tail, &hints, spec)
    })
}

/// Weighted-difference integral: the annular integral of the signed
/// kernel difference, equal to `weight * (u(x) - mean)` by construction
/// and used to guard the two quadrature paths against each other.
#[cfg(test)]
fn weighted_difference(
    sc: &Scene,
    params: &OperatorParams,
    spec: &QuadratureSpec,
) -> Result<Evaluation> {
    let tail = annulus_tail(sc, &Flavor::Signed)?;
    annular_sum(sc, spec, |w| {
        let g = |rho: f64| {
            Ok(phi(sc.delta_minus(w, rho), sc.p) * rho.powf(-(1.0 + sc.s * (sc.p - 2.0))))
        };
        let kinks = sc.ray_kinks(w, true);
        let hints = RadialHints {
            breakpoints: &kinks,
            max_panel_width: sc.width_cap,
        };
        quadrature::annulus_integral(&g, params.r, sc.s, &tail, &hints, spec)
    })
}

/// The kernel-weighted average of `u(x - y)` over the annulus: the
/// numerator normalized by [`weight_integral`].  Degenerates when the
/// weight vanishes (constant fields with p > 2).
pub fn frac_p_mean(
    u: &Field,
    params: &OperatorParams,
    spec: &QuadratureSpec,
) -> Result<Evaluation> {
    let denom = weight_integral(u, params, spec)?;
    if denom.value.abs() < 1e-14 {
        return Err(Error::DegenerateWeight(format!(
            "kernel weight {} below 1e-14; the weighted mean is undefined",
            denom.value
        )));
    }
    let numer = mean_numerator(&Scene::new(u, params)?, params, spec)?;
    Ok(Evaluation {
        value: numer.value / denom.value,
        tail_truncated: numer.tail_truncated || denom.tail_truncated,
    })
}

/// Expansion residual `weight * (u(x) - mean) - frac_p_laplacian`, as the
/// difference of two genuinely small integrals: the annular excess of the
/// singular kernel over its power-law limit, minus the near-ball part of
/// the operator.  Each piece vanishes with `r`; subtracting the assembled
/// large quantities instead would lose every significant digit.
pub fn mean_value_residual(
    u: &Field,
    params: &OperatorParams,
    spec: &QuadratureSpec,
) -> Result<Evaluation> {
    let sc = Scene::new(u, params)?;
    let tail = annulus_tail(&sc, &Flavor::Signed)?;
    let excess = annular_sum(&sc, spec, |w| {
        let f = |rho: f64| {
            Ok(phi(sc.delta_minus(w, rho), sc.p) * rho.powf(-(1.0 + sc.s * (sc.p - 2.0))))
        };
        let kinks = sc.ray_kinks(w, true);
        let hints = RadialHints {
            breakpoints: &kinks,
            max_panel_width: sc.width_cap,
        };
        quadrature::annulus_minus_power(&f, params.r, sc.s, &tail, &hints, spec)
    })?;
    let near = symmetrized_ball(&sc, params.r, spec)?;
    Ok(Evaluation {
        value: excess.value - near,
        tail_truncated: excess.tail_truncated,
    })
}
