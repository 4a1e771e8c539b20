//! Gradient-directed nonlocal operators: the cap-restricted fractional
//! p-Laplacian, the fractional infinity Laplacian, and their mean kernels.
//!
//! All four operators aim their kernels along the gradient direction.
//! Away from critical points that direction is determined and the plus
//! and minus variants coincide through the same code path.  At critical
//! points the axis becomes an optimization variable: the cap operators
//! take a supremum or infimum over the axis, and the infinity operators a
//! sup-inf over an ordered pair of ray directions.  The optimizers are
//! grid-plus-refinement heuristics; nothing sharper is available since
//! the extremal direction has no closed form.
//!
//! Every radial integral is a one-dimensional ray integral, so second
//! differences near the origin are replaced by their Taylor model below a
//! switch radius and the far field follows the field's declared tail
//! profile, exactly as in the radially symmetric operators.

use crate::constants::{self, CapConstants};
use crate::fields::{self, Field, FieldOps, TailProfile};
use crate::geom::{self, Matrix, Vector};
use crate::local_ops::Variant;
use crate::quadrature::{self, NearModel, QuadratureSpec, RadialHints, TailBehavior};
use crate::{Error, Evaluation, Result};
use rayon::prelude::*;

/// Axis of the directional cap: fixed along the gradient, or left to an
/// optimizer at critical points.
#[derive(Clone, Copy, Debug)]
pub enum CapAxis {
    Fixed(Vector),
    OptimizeSup,
    OptimizeInf,
}

/// The directional cap kernel `{y : (y/|y|) . axis >= threshold}` with
/// the moment normalizers belonging to its exponent p.
#[derive(Clone, Copy, Debug)]
pub struct CapKernel {
    pub axis: CapAxis,
    pub threshold: f64,
    pub alpha: f64,
    pub gamma_cap: f64,
}

impl CapKernel {
    /// Kernel for the field at `x`: the axis follows the normalized
    /// gradient away from critical points; at a critical point the
    /// requested variant decides the optimization sense, and the
    /// direction-neutral default is refused.
    pub fn for_field(u: &Field, x: Vector, p: f64, variant: Variant) -> Result<Self> {
        let caps = CapConstants::new(u.dim(), p)?;
        let floor = fields::critical_gradient_floor(u);
        let axis = match geom::normalize(u.gradient(x)?, floor) {
            Some(z) => CapAxis::Fixed(z),
            None => match variant {
                Variant::Plus => CapAxis::OptimizeSup,
                Variant::Minus => CapAxis::OptimizeInf,
                Variant::Auto => {
                    return Err(Error::Domain(
                        "critical point: select the plus or minus variant".into(),
                    ))
                }
            },
        };
        Ok(CapKernel {
            axis,
            threshold: caps.threshold,
            alpha: caps.alpha,
            gamma_cap: caps.gamma_cap,
        })
    }
}

/// Shared per-call context: point data, local model, declared far field.
struct Gv<'a> {
    u: &'a Field,
    x: Vector,
    ux: f64,
    n: usize,
    s: f64,
    eta: f64,
    sup: f64,
    grad: Vector,
    hess: Matrix,
    profile: TailProfile,
    width_cap: Option<f64>,
}

impl<'a> Gv<'a> {
    fn new(u: &'a Field, x: Vector, s: f64) -> Result<Self> {
        let n = u.dim();
        if n == 1 {
            return Err(Error::Domain(
                "directional operators are defined for dimensions two and three only".into(),
            ));
        }
        constants::check_s(s)?;
        if s <= 0.5 {
            return Err(Error::Domain(format!(
                "s must lie in (1/2, 1) for the directional operators, got {s}"
            )));
        }
        Ok(Gv {
            u,
            x,
            ux: u.value(x),
            n,
            s,
            eta: u.smooth_radius(x),
            sup: u.sup_norm(),
            grad: u.gradient(x)?,
            hess: u.hessian(x)?,
            profile: u.tail_profile(),
            width_cap: u.oscillation_wavelength().map(|l| 6.0 * l),
        })
    }

    fn check_radius(&self, r: f64) -> Result<()> {
        if !(r > 0.0 && r < 0.5 * self.eta) {
            return Err(Error::Domain(format!(
                "kernel radius must lie in (0, {}), got {r}",
                0.5 * self.eta
            )));
        }
        Ok(())
    }

    /// Gradient direction, or None at a critical point.
    fn gradient_axis(&self) -> Option<Vector> {
        geom::normalize(self.grad, fields::critical_gradient_floor(self.u))
    }

    /// Derivative breakpoints of `rho -> u(x + rho omega)` and
    /// `rho -> u(x - rho zeta)`, merged.
    fn pair_kinks(&self, omega: Vector, zeta: Vector) -> Vec<f64> {
        let mut out = self.u.ray_breakpoints(self.x, omega);
        out.extend(self.u.ray_breakpoints(self.x, geom::scale(-1.0, zeta)));
        out.sort_by(f64::total_cmp);
        out.dedup_by(|b, a| (*b - *a).abs() <= 1e-12 * (1.0 + a.abs()));
        out
    }

    /// Tail of the paired second difference
    /// `u(x + rho omega) + u(x - rho zeta) - 2 u(x)`.
    fn second_difference_tail(&self) -> Result<TailBehavior> {
        match self.profile {
            TailProfile::Localized {
                far_radius,
                far_value,
            } => Ok(TailBehavior::PowerLimit {
                coeff: 2.0 * (far_value - self.ux),
                power: 0.0,
                from: far_radius + geom::norm(self.x),
            }),
            TailProfile::Bounded => Ok(TailBehavior::Decay {
                bound: 4.0 * self.sup,
                growth: 0.0,
            }),
            TailProfile::PowerGrowth { coeff, exponent } => {
                let e = exponent.max(0.0);
                if 2.0 * self.s <= e {
                    return Err(Error::TailDivergent(format!(
                        "field growth rho^{e} defeats the ray kernel decay rho^{}",
                        -1.0 - 2.0 * self.s
                    )));
                }
                Ok(TailBehavior::Decay {
                    bound: 2.0 * (self.ux.abs() + coeff * (2.0 + geom::norm(self.x)).powf(e)),
                    growth: e,
                })
            }
        }
    }

    /// Tail of the paired sum divided by rho,
    /// `(u(x + rho omega) + u(x - rho zeta)) / rho`, as it enters the
    /// annular mean kernels.
    fn pair_sum_tail(&self) -> Result<TailBehavior> {
        match self.profile {
            TailProfile::Localized {
                far_radius,
                far_value,
            } => Ok(TailBehavior::PowerLimit {
                coeff: 2.0 * far_value,
                power: -1.0,
                from: far_radius + geom::norm(self.x),
            }),
            TailProfile::Bounded => Ok(TailBehavior::Decay {
                bound: 2.0 * self.sup,
                growth: -1.0,
            }),
            TailProfile::PowerGrowth { coeff, exponent } => {
                let e = exponent.max(0.0);
                if 2.0 * self.s <= e {
                    return Err(Error::TailDivergent(format!(
                        "field growth rho^{e} defeats the annular kernel decay"
                    )));
                }
                Ok(TailBehavior::Decay {
                    bound: 2.0 * (self.ux.abs() + coeff * (2.0 + geom::norm(self.x)).powf(e)),
                    growth: e - 1.0,
                })
            }
        }
    }

    /// `int_0^inf (u(x + rho omega) + u(x - rho zeta) - 2u(x))
    /// rho^(-1-2s) drho` with the near-origin Taylor model.
    fn pair_ray_integral(
        &self,
        omega: Vector,
        zeta: Vector,
        spec: &QuadratureSpec,
    ) -> Result<Evaluation> {
        let h = |rho: f64| {
            let a = self.u.value(geom::axpy(self.x, rho, omega));
            let b = self.u.value(geom::axpy(self.x, -rho, zeta));
            Ok(a + b - 2.0 * self.ux)
        };
        let model = NearModel {
            linear: geom::dot(self.grad, omega) - geom::dot(self.grad, zeta),
            quadratic: 0.5
                * (geom::quad_form(&self.hess, omega) + geom::quad_form(&self.hess, zeta)),
            magnitude: self.sup + self.ux.abs(),
        };
        let tail = self.second_difference_tail()?;
        let kinks = self.pair_kinks(omega, zeta);
        let hints = RadialHints {
            breakpoints: &kinks,
            max_panel_width: self.width_cap,
        };
        quadrature::ray_pv_integral(&h, self.s, &model, 1e-3 * self.eta, &tail, &hints, spec)
    }

    /// `int_r^inf (u(x + rho omega) + u(x - rho zeta)) rho^(-1)
    /// (rho^2 - r^2)^(-s) drho`.
    fn pair_mean_integral(
        &self,
        omega: Vector,
        zeta: Vector,
        r: f64,
        spec: &QuadratureSpec,
    ) -> Result<Evaluation> {
        let g = |rho: f64| {
            let a = self.u.value(geom::axpy(self.x, rho, omega));
            let b = self.u.value(geom::axpy(self.x, -rho, zeta));
            Ok((a + b) / rho)
        };
        let tail = self.pair_sum_tail()?;
        let kinks = self.pair_kinks(omega, zeta);
        let hints = RadialHints {
            breakpoints: &kinks,
            max_panel_width: self.width_cap,
        };
        quadrature::annulus_integral(&g, r, self.s, &tail, &hints, spec)
    }
}

/// Cap integral of the paired ray integrals around a fixed axis,
/// normalized by `-1/alpha`: the cap operator for a determined direction.
fn cap_operator_value(
    cx: &Gv,
    kernel: &CapKernel,
    axis: Vector,
    spec: &QuadratureSpec,
) -> Result<Evaluation> {
    let rule = quadrature::cap_rule(cx.n, axis, kernel.threshold, spec.sphere_order)?;
    let parts: Result<Vec<Evaluation>> = rule
        .par_iter()
        .map(|&(w, wt)| {
            cx.pair_ray_integral(w, w, spec).map(|ev| Evaluation {
                value: wt * ev.value,
                tail_truncated: ev.tail_truncated,
            })
        })
        .collect();
    let parts = parts?;
    Ok(Evaluation {
        value: -parts.iter().map(|e| e.value).sum::<f64>() / kernel.alpha,
        tail_truncated: parts.iter().any(|e| e.tail_truncated),
    })
}

/// Cap-averaged annular mean around a fixed axis.
fn cap_mean_value(
    cx: &Gv,
    kernel: &CapKernel,
    axis: Vector,
    r: f64,
    spec: &QuadratureSpec,
) -> Result<Evaluation> {
    let rule = quadrature::cap_rule(cx.n, axis, kernel.threshold, spec.sphere_order)?;
    let parts: Result<Vec<Evaluation>> = rule
        .par_iter()
        .map(|&(w, wt)| {
            cx.pair_mean_integral(w, w, r, spec).map(|ev| Evaluation {
                value: wt * ev.value,
                tail_truncated: ev.tail_truncated,
            })
        })
        .collect();
    let parts = parts?;
    let c = constants::radial_tail_constant(cx.s)? * kernel.gamma_cap;
    Ok(Evaluation {
        value: 0.5 * c * r.powf(2.0 * cx.s) * parts.iter().map(|e| e.value).sum::<f64>(),
        tail_truncated: parts.iter().any(|e| e.tail_truncated),
    })
}

/// Directions on the unit sphere: the full sphere when `center` is None,
/// otherwise a spread of the given angular width around the center.
fn direction_grid(n: usize, center: Option<(Vector, f64)>, count: usize) -> Vec<Vector> {
    let mut out = Vec::with_capacity(count);
    match (n, center) {
        (2, None) => {
            for k in 0..count {
                let th = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                out.push([th.cos(), th.sin(), 0.0]);
            }
        }
        (2, Some((axis, width))) => {
            let base = axis[1].atan2(axis[0]);
            for k in 0..count {
                let th = base + width * (2.0 * k as f64 / (count - 1) as f64 - 1.0);
                out.push([th.cos(), th.sin(), 0.0]);
            }
        }
        (_, None) => {
            let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
            for k in 0..count {
                let t = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                let phi = golden * k as f64;
                let rad = (1.0 - t * t).max(0.0).sqrt();
                out.push([rad * phi.cos(), rad * phi.sin(), t]);
            }
        }
        (_, Some((axis, width))) => {
            let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
            let (e1, e2) = geom::orthonormal_complement(axis);
            let lo = width.min(std::f64::consts::PI).cos();
            for k in 0..count {
                let t = 1.0 - (1.0 - lo) * (k as f64 + 0.5) / count as f64;
                let phi = golden * k as f64;
                let rad = (1.0 - t * t).max(0.0).sqrt();
                let v = geom::add(
                    geom::scale(t, axis),
                    geom::add(
                        geom::scale(rad * phi.cos(), e1),
                        geom::scale(rad * phi.sin(), e2),
                    ),
                );
                out.push(v);
            }
        }
    }
    out
}

fn grid_count(n: usize, order: usize) -> usize {
    (order / 4).max(if n == 2 { 16 } else { 24 })
}

/// Maximizes `score` over the unit sphere: coarse grid, then
/// golden-section refinement along one angle (two alternating tangent
/// angles in dimension three).  Returns the best direction's evaluation.
fn maximize_over_axis<F>(n: usize, order: usize, score: &F) -> Result<(f64, Evaluation)>
where
    F: Fn(Vector) -> Result<(f64, Evaluation)>,
{
    let count = grid_count(n, order);
    let coarse = direction_grid(n, None, count);
    let mut best = None;
    for axis in coarse {
        let (v, ev) = score(axis)?;
        if best.as_ref().map_or(true, |&(bv, _, _)| v > bv) {
            best = Some((v, axis, ev));
        }
    }
    let (_, mut axis, _) = best.expect("nonempty direction grid");
    let spacing = 2.0 * std::f64::consts::PI / count as f64;
    let golden = |lo: f64, hi: f64, line: &dyn Fn(f64) -> Result<(f64, Evaluation)>| {
        let inv = (5.0f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (lo, hi);
        let mut c = b - inv * (b - a);
        let mut d = a + inv * (b - a);
        let mut fc = line(c)?;
        let mut fd = line(d)?;
        for _ in 0..32 {
            if fc.0 >= fd.0 {
                b = d;
                d = c;
                fd = fc;
                c = b - inv * (b - a);
                fc = line(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv * (b - a);
                fd = line(d)?;
            }
        }
        if fc.0 >= fd.0 {
            Ok((c, fc))
        } else {
            Ok((d, fd))
        }
    };
    let rounds = if n == 2 { 1 } else { 2 };
    let mut result = None;
    for _ in 0..rounds {
        if n == 2 {
            let base = axis[1].atan2(axis[0]);
            let line = |th: f64| score([th.cos(), th.sin(), 0.0]);
            let (th, out) = golden(base - spacing, base + spacing, &line)?;
            axis = [th.cos(), th.sin(), 0.0];
            result = Some(out);
        } else {
            let (e1, e2) = geom::orthonormal_complement(axis);
            for tangent in [e1, e2] {
                let center = axis;
                let line = |th: f64| {
                    let v = geom::add(
                        geom::scale(th.cos(), center),
                        geom::scale(th.sin(), tangent),
                    );
                    score(v)
                };
                let (th, out) = golden(-spacing, spacing, &line)?;
                axis = geom::add(
                    geom::scale(th.cos(), center),
                    geom::scale(th.sin(), tangent),
                );
                result = Some(out);
            }
        }
    }
    Ok(result.expect("refinement ran"))
}

/// Optimizes the cap axis at a critical point: supremum for the plus
/// variant, infimum for the minus variant, through one maximizer so the
/// two variants explore mirrored landscapes identically.
fn optimize_cap_axis<G>(n: usize, order: usize, maximize: bool, eval: &G) -> Result<Evaluation>
where
    G: Fn(Vector) -> Result<Evaluation>,
{
    let sign = if maximize { 1.0 } else { -1.0 };
    let score = |axis: Vector| eval(axis).map(|ev| (sign * ev.value, ev));
    let (best, ev) = maximize_over_axis(n, order, &score)?;
    Ok(Evaluation {
        value: sign * best,
        tail_truncated: ev.tail_truncated,
    })
}

/// Sup over the first ray of the inf over the second: the critical-point
/// rule for the infinity operators.  Solved on a coarse product grid with
/// inner-exact sweeps, then three localized refinement rounds; the value
/// must settle by the last round.
fn sup_inf<F>(n: usize, order: usize, f: &F) -> Result<Evaluation>
where
    F: Fn(Vector, Vector) -> Result<Evaluation> + Sync,
{
    let count = grid_count(n, order);
    let coarse = direction_grid(n, None, count);
    let solve = |omegas: &[Vector], zetas: &[Vector]| -> Result<(f64, Vector, Vector, bool)> {
        let rows: Result<Vec<(f64, Vector, bool)>> = omegas
            .par_iter()
            .map(|&omega| {
                let mut inner: Option<(f64, Vector, bool)> = None;
                for &zeta in zetas {
                    let ev = f(omega, zeta)?;
                    if inner.as_ref().map_or(true, |&(v, _, _)| ev.value < v) {
                        let flag = ev.tail_truncated || inner.map_or(false, |(_, _, fl)| fl);
                        inner = Some((ev.value, zeta, flag));
                    } else if ev.tail_truncated {
                        inner = inner.map(|(v, z, _)| (v, z, true));
                    }
                }
                Ok(inner.expect("nonempty inner grid"))
            })
            .collect();
        let rows = rows?;
        let mut out: Option<(f64, Vector, Vector, bool)> = None;
        for (k, &(v, zeta, flag)) in rows.iter().enumerate() {
            if out.as_ref().map_or(true, |&(bv, _, _, _)| v > bv) {
                out = Some((v, omegas[k], zeta, flag));
            }
        }
        Ok(out.expect("nonempty outer grid"))
    };
    let (mut value, mut omega, mut zeta, mut flag) = solve(&coarse, &coarse)?;
    let mut previous = value;
    for round in 1..=3 {
        let width = std::f64::consts::PI / 4.0f64.powi(round);
        let local_omega = direction_grid(n, Some((omega, width)), count);
        let mut zetas = coarse.clone();
        zetas.extend(direction_grid(n, Some((zeta, width)), count));
        previous = value;
        let (v, o, z, fl) = solve(&local_omega, &zetas)?;
        value = v;
        omega = o;
        zeta = z;
        flag = fl;
    }
    if (value - previous).abs() > 1e-3 * (1.0 + value.abs()) {
        return Err(Error::Convergence(format!(
            "sup-inf still moving after refinement: {previous} -> {value} on a {count}-direction grid"
        )));
    }
    Ok(Evaluation {
        value,
        tail_truncated: flag,
    })
}

/// The cap-restricted fractional p-Laplacian: the second-difference
/// integral against `|y|^(-n-2s)` over the cap around the gradient,
/// normalized by the cap moment alpha.  At critical points the axis is
/// optimized according to the variant.
pub fn grad_frac_p_laplacian(
    u: &Field,
    x: Vector,
    s: f64,
    p: f64,
    variant: Variant,
    spec: &QuadratureSpec,
) -> Result<Evaluation> {
    let cx = Gv::new(u, x, s)?;
    let kernel = CapKernel::for_field(u, x, p, variant)?;
    match kernel.axis {
        CapAxis::Fixed(z) => cap_operator_value(&cx, &kernel, z, spec),
        CapAxis::OptimizeSup => optimize_cap_axis(cx.n, spec.sphere_order, true, &|axis| {
            cap_operator_value(&cx, &kernel, axis, spec)
        }),
        CapAxis::OptimizeInf => optimize_cap_axis(cx.n, spec.sphere_order, false, &|axis| {
            cap_operator_value(&cx, &kernel, axis, spec)
        }),
    }
}

/// The cap mean: the annular average of `u(x+y) + u(x-y)` under the cap
/// kernel, normalized to reproduce constants.
pub fn grad_frac_p_mean(
    u: &Field,
    x: Vector,
    s: f64,
    p: f64,
    r: f64,
    variant: Variant,
    spec: &QuadratureSpec,
) -> Result<Evaluation> {
    let cx = Gv::new(u, x, s)?;
    cx.check_radius(r)?;
    let kernel = CapKernel::for_field(u, x, p, variant)?;
    match kernel.axis {
        CapAxis::Fixed(z) => cap_mean_value(&cx, &kernel, z, r, spec),
        CapAxis::OptimizeSup => optimize_cap_axis(cx.n, spec.sphere_order, true, &|axis| {
            cap_mean_value(&cx, &kernel, axis, r, spec)
        }),
        CapAxis::OptimizeInf => optimize_cap_axis(cx.n, spec.sphere_order, false, &|axis| {
            cap_mean_value(&cx, &kernel, axis, r, spec)
        }),
    }
}

/// The fractional infinity Laplacian: a single paired-ray integral along
/// the gradient direction, or the sup-inf over ray pairs at critical
/// points.
pub fn infinity_frac_laplacian(
    u: &Field,
    x: Vector,
    s: f64,
    spec: &QuadratureSpec,
) -> Result<Evaluation> {
    let cx = Gv::new(u, x, s)?;
    match cx.gradient_axis() {
        Some(z) => {
            let ev = cx.pair_ray_integral(z, z, spec)?;
            Ok(Evaluation {
                value: -ev.value,
                tail_truncated: ev.tail_truncated,
            })
        }
        None => sup_inf(cx.n, spec.sphere_order, &|omega, zeta| {
            cx.pair_ray_integral(omega, zeta, spec)
                .map(|ev| Evaluation {
                    value: -ev.value,
                    tail_truncated: ev.tail_truncated,
                })
        }),
    }
}

/// The infinity mean kernel: the normalized annular average of
/// `u(x + rho omega) + u(x - rho zeta)` along the gradient pair, or its
/// sup-inf at critical points.
pub fn infinity_frac_mean(
    u: &Field,
    x: Vector,
    s: f64,
    r: f64,
    spec: &QuadratureSpec,
) -> Result<Evaluation> {
    let cx = Gv::new(u, x, s)?;
    cx.check_radius(r)?;
    let c = constants::infinity_tail_constant(s)?;
    let assemble = |ev: Evaluation| Evaluation {
        value: c * r.powf(2.0 * s) * ev.value,
        tail_truncated: ev.tail_truncated,
    };
    match cx.gradient_axis() {
        Some(z) => Ok(assemble(cx.pair_mean_integral(z, z, r, spec)?)),
        None => sup_inf(cx.n, spec.sphere_order, &|omega, zeta| {
            cx.pair_mean_integral(omega, zeta, r, spec).map(assemble)
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{
        make_affine, make_cone, make_constant, make_gaussian, make_windowed_poly, scaled,
    };
    use crate::local_ops;
    use approx::assert_relative_eq;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    fn saddle() -> Field {
        let mut q = [[0.0; 3]; 3];
        q[0][0] = 2.0;
        q[1][1] = -1.0;
        make_windowed_poly(2, geom::ZERO, 0.0, geom::ZERO, q, 0.4, 0.9).unwrap()
    }

    #[test]
    fn constant_and_linear_fields_are_annihilated() {
        let c = make_constant(2, 0.7).unwrap();
        let x = [0.2, -0.1, 0.0];
        // A constant field is critical everywhere; the variants agree on 0.
        let v = grad_frac_p_laplacian(&c, x, 0.75, 3.0, Variant::Plus, &spec()).unwrap();
        assert_eq!(v.value, 0.0);
        let lin = make_affine(2, 0.3, [1.0, -0.5, 0.0]).unwrap();
        let v = grad_frac_p_laplacian(&lin, x, 0.75, 3.0, Variant::Auto, &spec()).unwrap();
        assert!(v.value.abs() < 1e-9, "linear field gave {}", v.value);
        let v = infinity_frac_laplacian(&lin, x, 0.75, &spec()).unwrap();
        assert!(v.value.abs() < 1e-9, "linear field gave {}", v.value);
    }

    #[test]
    fn means_reproduce_constants_and_linear_values() {
        let x = [0.2, -0.1, 0.0];
        for n in [2usize, 3] {
            let c = make_constant(n, 1.7).unwrap();
            let m = grad_frac_p_mean(&c, x, 0.75, 3.0, 0.1, Variant::Plus, &spec()).unwrap();
            assert_relative_eq!(m.value, 1.7, max_relative = 1e-9);
            let m = infinity_frac_mean(&c, x, 0.6, 0.1, &spec()).unwrap();
            assert_relative_eq!(m.value, 1.7, max_relative = 1e-9);
        }
        let lin = make_affine(2, 0.3, [1.0, -0.5, 0.0]).unwrap();
        let ux = lin.value(x);
        let m = grad_frac_p_mean(&lin, x, 0.75, 3.0, 0.1, Variant::Auto, &spec()).unwrap();
        assert_relative_eq!(m.value, ux, max_relative = 1e-9);
        let m = infinity_frac_mean(&lin, x, 0.75, 0.1, &spec()).unwrap();
        assert_relative_eq!(m.value, ux, max_relative = 1e-9);
    }

    #[test]
    fn cone_profiles_are_harmonic_for_the_infinity_operator() {
        for &(s, d) in &[(0.75, 1.0), (0.6, 0.5)] {
            let u = make_cone(2, 1.0, 0.3, geom::ZERO, s).unwrap();
            let x = [d, 0.0, 0.0];
            let v = infinity_frac_laplacian(&u, x, s, &spec()).unwrap();
            assert!(
                v.value.abs() < 1e-4,
                "cone at distance {d}, s = {s} gave {}",
                v.value
            );
        }
    }

    #[test]
    fn sharp_s_recovers_the_local_operators() {
        let u = make_gaussian(2, geom::ZERO, 1.0).unwrap();
        let x = [0.6, -0.3, 0.0];
        let s = 0.999;
        let scale = 1.0 - s;
        let got = grad_frac_p_laplacian(&u, x, s, 3.0, Variant::Auto, &spec()).unwrap();
        let local = local_ops::normalized_p_laplacian(&u, x, 3.0, Variant::Auto).unwrap();
        assert_relative_eq!(scale * got.value, -local, max_relative = 0.05);
        // The ray integral concentrates at the origin and halves the
        // curvature coefficient relative to the local operator.
        let got = infinity_frac_laplacian(&u, x, s, &spec()).unwrap();
        let local = local_ops::infinity_laplacian(&u, x, Variant::Auto).unwrap();
        assert_relative_eq!(scale * got.value, -0.5 * local, max_relative = 0.05);
        let r = 0.1;
        let got = infinity_frac_mean(&u, x, s, r, &spec()).unwrap();
        let z = geom::normalize(u.gradient(x).unwrap(), 0.0).unwrap();
        let pinned = 0.5 * (u.value(geom::axpy(x, r, z)) + u.value(geom::axpy(x, -r, z)));
        assert!(
            (got.value - pinned).abs() < 1e-3,
            "sharp-s mean {} vs pinned average {pinned}",
            got.value
        );
    }

    #[test]
    fn variants_coincide_away_from_critical_points() {
        let u = make_gaussian(2, geom::ZERO, 1.0).unwrap();
        let x = [0.5, 0.2, 0.0];
        let plus = grad_frac_p_laplacian(&u, x, 0.75, 3.0, Variant::Plus, &spec()).unwrap();
        let minus = grad_frac_p_laplacian(&u, x, 0.75, 3.0, Variant::Minus, &spec()).unwrap();
        assert_eq!(plus.value, minus.value);
        let plus = grad_frac_p_mean(&u, x, 0.75, 3.0, 0.1, Variant::Plus, &spec()).unwrap();
        let minus = grad_frac_p_mean(&u, x, 0.75, 3.0, 0.1, Variant::Minus, &spec()).unwrap();
        assert_eq!(plus.value, minus.value);
    }

    #[test]
    fn operators_are_odd_in_the_field() {
        let u = make_gaussian(2, geom::ZERO, 1.0).unwrap();
        let neg = scaled(u.clone(), -1.0);
        let x = [0.5, 0.2, 0.0];
        let v = infinity_frac_laplacian(&u, x, 0.75, &spec()).unwrap().value;
        let w = infinity_frac_laplacian(&neg, x, 0.75, &spec())
            .unwrap()
            .value;
        assert_relative_eq!(w, -v, max_relative = 1e-12);
        let v = grad_frac_p_laplacian(&u, x, 0.75, 3.0, Variant::Auto, &spec())
            .unwrap()
            .value;
        let w = grad_frac_p_laplacian(&neg, x, 0.75, 3.0, Variant::Auto, &spec())
            .unwrap()
            .value;
        assert_relative_eq!(w, -v, max_relative = 1e-12);
    }

    #[test]
    fn critical_points_split_the_variants() {
        let u = saddle();
        let x = geom::ZERO;
        let small = QuadratureSpec {
            sphere_order: 32,
            ..QuadratureSpec::default()
        };
        assert!(matches!(
            grad_frac_p_laplacian(&u, x, 0.75, 3.0, Variant::Auto, &small),
            Err(Error::Domain(_))
        ));
        let plus = grad_frac_p_laplacian(&u, x, 0.75, 3.0, Variant::Plus, &small).unwrap();
        let minus = grad_frac_p_laplacian(&u, x, 0.75, 3.0, Variant::Minus, &small).unwrap();
        assert!(
            plus.value >= minus.value,
            "variant ordering violated: {} < {}",
            plus.value,
            minus.value
        );
        // Negating the field swaps the optimized variants exactly.
        let neg = scaled(u.clone(), -1.0);
        let swapped = grad_frac_p_laplacian(&neg, x, 0.75, 3.0, Variant::Minus, &small).unwrap();
        assert_relative_eq!(swapped.value, -plus.value, max_relative = 1e-12);
    }

    #[test]
    fn critical_sup_inf_brackets_the_gradient_free_mean() {
        let u = saddle();
        let small = QuadratureSpec {
            sphere_order: 32,
            ..QuadratureSpec::default()
        };
        let m = infinity_frac_mean(&u, geom::ZERO, 0.75, 0.05, &small).unwrap();
        assert!(m.value.is_finite());
        let v = infinity_frac_laplacian(&u, geom::ZERO, 0.75, &small).unwrap();
        assert!(v.value.is_finite());
    }

    #[test]
    fn domain_restrictions_are_enforced() {
        let u1 = make_gaussian(1, geom::ZERO, 1.0).unwrap();
        assert!(matches!(
            grad_frac_p_laplacian(&u1, geom::ZERO, 0.75, 3.0, Variant::Auto, &spec()),
            Err(Error::Domain(_))
        ));
        let u = make_gaussian(2, geom::ZERO, 1.0).unwrap();
        let x = [0.4, 0.1, 0.0];
        assert!(matches!(
            grad_frac_p_laplacian(&u, x, 0.5, 3.0, Variant::Auto, &spec()),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            infinity_frac_laplacian(&u, x, 0.3, &spec()),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            grad_frac_p_mean(&u, x, 0.75, 3.0, 3.0, Variant::Auto, &spec()),
            Err(Error::Domain(_))
        ));
    }
}
