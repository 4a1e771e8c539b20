//! Classical (local) operators and mean-value kernels: the p-Laplacian,
//! its normalized variant, the infinity-Laplacian, and the sphere and cap
//! averages whose expansions they drive.
//!
//! These serve two roles: limit targets for the fractional operators as
//! s tends to one, and baselines for the expansion-order checks.  All
//! derivatives come from the field's analytic gradient and Hessian; the
//! only quadrature happening here is over spheres and spherical caps.

use crate::constants;
use crate::fields::{critical_gradient_floor, Field, FieldOps};
use crate::geom::{self, Matrix, Vector};
use crate::quadrature::{self, QuadratureSpec};
use crate::{Error, Result};

/// Branch selector for operators whose definition at a critical point
/// takes a supremum or infimum over directions.  `Auto` follows the
/// gradient and refuses to guess when there is none.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Variant {
    Plus,
    Minus,
    #[default]
    Auto,
}

/// Parameters shared by the local mean kernels.
#[derive(Clone, Copy, Debug)]
pub struct LocalMeanParams {
    pub r: f64,
    pub p: f64,
    pub variant: Variant,
}

impl LocalMeanParams {
    /// Checks the radius against the field's smoothness scale at `x`.
    pub fn validate(&self, u: &Field, x: Vector) -> Result<()> {
        constants::check_p(self.p)?;
        let eta = u.smooth_radius(x);
        if !(self.r > 0.0 && self.r < 0.5 * eta) {
            return Err(Error::Domain(format!(
                "mean radius must lie in (0, {}), got {}",
                0.5 * eta,
                self.r
            )));
        }
        Ok(())
    }
}

/// Whether `x` counts as a critical point of `u` under the global
/// gradient floor.
pub fn is_critical(u: &Field, x: Vector) -> Result<bool> {
    let g = u.gradient(x)?;
    Ok(geom::norm(g) < critical_gradient_floor(u))
}

fn extreme_eigenpair(h: &Matrix, n: usize, plus: bool) -> (f64, Vector) {
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| h[i][j]);
    let eig = nalgebra::SymmetricEigen::new(m);
    let mut idx = 0;
    for i in 1..n {
        let better = if plus {
            eig.eigenvalues[i] > eig.eigenvalues[idx]
        } else {
            eig.eigenvalues[i] < eig.eigenvalues[idx]
        };
        if better {
            idx = i;
        }
    }
    let mut dir = geom::ZERO;
    for i in 0..n {
        dir[i] = eig.eigenvectors[(i, idx)];
    }
    (eig.eigenvalues[idx], dir)
}

/// Unit direction steering gradient-dependent kernels at `x`: the
/// normalized gradient away from critical points, the extreme Hessian
/// eigenvector at them.  The flag reports whether the critical branch was
/// taken.
pub fn kernel_axis(u: &Field, x: Vector, variant: Variant) -> Result<(Vector, bool)> {
    let g = u.gradient(x)?;
    if let Some(z) = geom::normalize(g, critical_gradient_floor(u)) {
        return Ok((z, false));
    }
    let plus = match variant {
        Variant::Plus => true,
        Variant::Minus => false,
        Variant::Auto => {
            return Err(Error::Domain(
                "critical point: select the plus or minus variant".into(),
            ))
        }
    };
    let h = u.hessian(x)?;
    let (_, dir) = extreme_eigenpair(&h, u.dim(), plus);
    Ok((dir, true))
}

/// Second derivative of `u` at `x` along the unit direction `dir`.
pub fn directional_second(u: &Field, x: Vector, dir: Vector) -> Result<f64> {
    let h = u.hessian(x)?;
    Ok(geom::quad_form(&h, dir))
}

/// Infinity-Laplacian: the second derivative along the gradient, or the
/// extreme Hessian eigenvalue at critical points.
pub fn infinity_laplacian(u: &Field, x: Vector, variant: Variant) -> Result<f64> {
    let g = u.gradient(x)?;
    if let Some(z) = geom::normalize(g, critical_gradient_floor(u)) {
        return directional_second(u, x, z);
    }
    let plus = match variant {
        Variant::Plus => true,
        Variant::Minus => false,
        Variant::Auto => {
            return Err(Error::Domain(
                "critical point: select the plus or minus variant".into(),
            ))
        }
    };
    let h = u.hessian(x)?;
    Ok(extreme_eigenpair(&h, u.dim(), plus).0)
}

/// Normalized p-Laplacian `lap u + (p - 2) inf-lap u`.
pub fn normalized_p_laplacian(u: &Field, x: Vector, p: f64, variant: Variant) -> Result<f64> {
    constants::check_p(p)?;
    let h = u.hessian(x)?;
    let lap = geom::trace(&h, u.dim());
    if p == 2.0 {
        return Ok(lap);
    }
    Ok(lap + (p - 2.0) * infinity_laplacian(u, x, variant)?)
}

/// Variational p-Laplacian `|grad u|^(p-2) (lap u + (p - 2) inf-lap u)`.
/// Undefined at critical points for p > 2.
pub fn p_laplacian(u: &Field, x: Vector, p: f64) -> Result<f64> {
    constants::check_p(p)?;
    let h = u.hessian(x)?;
    let lap = geom::trace(&h, u.dim());
    if p == 2.0 {
        return Ok(lap);
    }
    let g = u.gradient(x)?;
    match geom::normalize(g, critical_gradient_floor(u)) {
        Some(z) => {
            let len = geom::norm(g);
            Ok(len.powf(p - 2.0) * (lap + (p - 2.0) * geom::quad_form(&h, z)))
        }
        None => Err(Error::Domain(
            "p-laplacian is degenerate at a critical point; use the normalized variants".into(),
        )),
    }
}

/// Spherical integral of the signed power difference
/// `|u(x) - u(x + r w)|^(p-2) (u(x) - u(x + r w))`.  The odd leading term
/// cancels over the sphere, so the integral decays like `r^p` at
/// non-critical points.
pub fn signed_difference_integral(
    u: &Field,
    x: Vector,
    r: f64,
    p: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    crate::constants::check_p(p)?;
    let eta = u.smooth_radius(x);
    if !(r > 0.0 && r < eta) {
        return Err(Error::Domain(format!(
            "sphere radius must lie in (0, {eta}), got {r}"
        )));
    }
    let ux = u.value(x);
    quadrature::sphere_integral(
        &|w: Vector| {
            let d = ux - u.value(geom::axpy(x, r, w));
            Ok(d.abs().powf(p - 2.0) * d)
        },
        u.dim(),
        spec,
    )
}

/// Sphere average with weights `|u(x) - u(x + r w)|^(p-2)`.  Errors on
/// locally constant data, where the weight integral degenerates.
pub fn local_p_mean(
    u: &Field,
    x: Vector,
    params: LocalMeanParams,
    spec: &QuadratureSpec,
) -> Result<f64> {
    params.validate(u, x)?;
    let n = u.dim();
    let ux = u.value(x);
    let weight = |w: Vector| -> Result<f64> {
        let uy = u.value(geom::axpy(x, params.r, w));
        Ok((ux - uy).abs().powf(params.p - 2.0))
    };
    let denom = quadrature::sphere_integral(&weight, n, spec)?;
    if denom < 1e-14 {
        return Err(Error::DegenerateWeight(format!(
            "weight integral {denom} below 1e-14; field is locally constant"
        )));
    }
    let numer = quadrature::sphere_integral(
        &|w: Vector| {
            let uy = u.value(geom::axpy(x, params.r, w));
            Ok((ux - uy).abs().powf(params.p - 2.0) * uy)
        },
        n,
        spec,
    )?;
    Ok(numer / denom)
}

/// Cap-weighted average of `u(x + y) + u(x - y)` over the spherical cap
/// around the kernel axis, normalized to fix constants.
pub fn local_grad_p_mean(
    u: &Field,
    x: Vector,
    params: LocalMeanParams,
    spec: &QuadratureSpec,
) -> Result<f64> {
    params.validate(u, x)?;
    let n = u.dim();
    let cap = constants::CapConstants::new(n, params.p)?;
    let (axis, _) = kernel_axis(u, x, params.variant)?;
    let sum = quadrature::cap_integral(
        &|w: Vector| Ok(u.value(geom::axpy(x, params.r, w)) + u.value(geom::axpy(x, -params.r, w))),
        n,
        axis,
        cap.threshold,
        spec,
    )?;
    Ok(0.5 * cap.gamma_cap * sum)
}

/// Two-point average along the kernel axis; expands the infinity
/// Laplacian.
pub fn local_infinity_mean(u: &Field, x: Vector, r: f64, variant: Variant) -> Result<f64> {
    let eta = u.smooth_radius(x);
    if !(r > 0.0 && r < 0.5 * eta) {
        return Err(Error::Domain(format!(
            "mean radius must lie in (0, {}), got {r}",
            0.5 * eta
        )));
    }
    let (axis, _) = kernel_axis(u, x, variant)?;
    Ok(0.5 * (u.value(geom::axpy(x, r, axis)) + u.value(geom::axpy(x, -r, axis))))
}
