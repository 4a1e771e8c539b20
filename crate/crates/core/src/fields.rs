//! The corpus of test fields: bounded C^2 scalar functions with analytic
//! gradients and Hessians.
//!
//! Each field carries everything the operator modules need beyond point
//! values: a sup-norm bound, a local smoothness scale, a declared far-field
//! profile for tail truncation, derivative kinks along rays, and a witness
//! ball certifying non-constancy where one exists.  The cone field is the
//! one deliberate boundary case: it is smooth away from its pole, grows
//! sublinearly, and rejects derivative queries inside a guard ball.
//!
//! Wrapper variants add offsets, scalar factors, and translations on top
//! of any base field; the invariance checks of the operators are phrased
//! through them.

use crate::geom::{self, Matrix, Vector, MAX_DIM};
use crate::{Error, Result};

/// Far-field behavior declared by a field, consumed by the tail policies
/// of the radial integrators.
#[derive(Clone, Copy, Debug)]
pub enum TailProfile {
    /// `u(y)` equals `far_value` up to floating-point negligible error for
    /// `|y| > far_radius` (radius measured from the origin).
    Localized { far_radius: f64, far_value: f64 },
    /// `|u| <= sup_norm` everywhere with no usable decay.
    Bounded,
    /// `|u(y)| <= coeff * (1 + |y|)^exponent`.
    PowerGrowth { coeff: f64, exponent: f64 },
}

/// Interface the operators program against.  The concrete corpus lives in
/// [`Field`]; the trait exists so that validation code and tests can also
/// exercise deliberately broken implementations.
pub trait FieldOps {
    /// Active spatial dimension.
    fn dim(&self) -> usize;
    /// Point value; defined on all of space.
    fn value(&self, x: Vector) -> f64;
    /// Analytic gradient; may be rejected at non-smooth points.
    fn gradient(&self, x: Vector) -> Result<Vector>;
    /// Analytic Hessian; may be rejected at non-smooth points.
    fn hessian(&self, x: Vector) -> Result<Matrix>;
    /// Upper bound for |u| over the experiment's bounding box.
    fn sup_norm(&self) -> f64;
    /// Radius of guaranteed C^2 control around `x`.
    fn smooth_radius(&self, x: Vector) -> f64;
}

/// Gradient magnitude below which a point counts as critical, following
/// the convention that the branch on `grad u(x) = 0` must be a measurable
/// numerical event rather than an exact-zero test.
pub fn critical_gradient_floor(field: &dyn FieldOps) -> f64 {
    1e-10 * (1.0 + field.sup_norm())
}

/// Radius of the box over which unbounded corpus members report their
/// sup-norm.
const BOUNDING_BOX_RADIUS: f64 = 16.0;

/// A corpus field.  Construct through the `make_*` functions, which
/// validate parameters; wrap with [`offset`], [`scaled`], [`translated`].
#[derive(Clone, Debug)]
pub enum Field {
    Constant {
        level: f64,
        n: usize,
    },
    Affine {
        base: f64,
        slope: Vector,
        n: usize,
    },
    Gaussian {
        center: Vector,
        width: f64,
        n: usize,
    },
    Cone {
        pole: Vector,
        amplitude: f64,
        offset: f64,
        exponent: f64,
        n: usize,
    },
    Bump {
        center: Vector,
        radius: f64,
        n: usize,
    },
    WindowedPoly {
        center: Vector,
        constant: f64,
        linear: Vector,
        quadratic: Matrix,
        inner: f64,
        outer: f64,
        n: usize,
    },
    Cosine {
        wave: Vector,
        n: usize,
    },
    Offset {
        base: Box<Field>,
        delta: f64,
    },
    Scaled {
        base: Box<Field>,
        factor: f64,
    },
    Translated {
        base: Box<Field>,
        shift: Vector,
    },
}

/// Constant field `u = level`.
pub fn make_constant(n: usize, level: f64) -> Result<Field> {
    crate::constants::check_dim(n)?;
    if !level.is_finite() {
        return Err(Error::Domain("constant level must be finite".into()));
    }
    Ok(Field::Constant { level, n })
}

/// Affine field `u = base + slope . x`.
pub fn make_affine(n: usize, base: f64, slope: Vector) -> Result<Field> {
    crate::constants::check_dim(n)?;
    if !base.is_finite() || !geom::norm(slope).is_finite() {
        return Err(Error::Domain("affine coefficients must be finite".into()));
    }
    Ok(Field::Affine {
        base,
        slope: clip_dim(slope, n),
        n,
    })
}

/// Gaussian `u = exp(-|x - center|^2 / width^2)`.
pub fn make_gaussian(n: usize, center: Vector, width: f64) -> Result<Field> {
    crate::constants::check_dim(n)?;
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::Domain(format!(
            "gaussian width must be positive, got {width}"
        )));
    }
    Ok(Field::Gaussian {
        center: clip_dim(center, n),
        width,
        n,
    })
}

/// Radial power cone `u = amplitude |x - pole|^(2s - 1) + offset`, the
/// model field annihilated by the nonlocal infinity-Laplacian away from
/// its pole; requires `s` in (1/2, 1).
pub fn make_cone(n: usize, amplitude: f64, offset: f64, pole: Vector, s: f64) -> Result<Field> {
    crate::constants::check_dim(n)?;
    if !(s > 0.5 && s < 1.0) {
        return Err(Error::Domain(format!(
            "cone exponent comes from s in (1/2, 1), got s = {s}"
        )));
    }
    if !amplitude.is_finite() || !offset.is_finite() {
        return Err(Error::Domain("cone coefficients must be finite".into()));
    }
    Ok(Field::Cone {
        pole: clip_dim(pole, n),
        amplitude,
        offset,
        exponent: 2.0 * s - 1.0,
        n,
    })
}

/// Compactly supported bump `u = exp(1 - 1/(1 - t))` with
/// `t = |x - center|^2 / radius^2`, zero outside the support ball.
pub fn make_bump(n: usize, center: Vector, radius: f64) -> Result<Field> {
    crate::constants::check_dim(n)?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Domain(format!(
            "bump radius must be positive, got {radius}"
        )));
    }
    Ok(Field::Bump {
        center: clip_dim(center, n),
        radius,
        n,
    })
}

/// Quadratic polynomial under a C-infinity window: the polynomial is exact
/// on the inner ball and fades to zero before the outer radius.
pub fn make_windowed_poly(
    n: usize,
    center: Vector,
    constant: f64,
    linear: Vector,
    quadratic: Matrix,
    inner: f64,
    outer: f64,
) -> Result<Field> {
    crate::constants::check_dim(n)?;
    if !(inner > 0.0 && outer.is_finite() && outer > inner) {
        return Err(Error::Domain(format!(
            "window must satisfy 0 < inner < outer, got inner = {inner}, outer = {outer}"
        )));
    }
    for i in 0..MAX_DIM {
        for j in 0..MAX_DIM {
            if (quadratic[i][j] - quadratic[j][i]).abs() > 1e-12 {
                return Err(Error::Domain(
                    "quadratic coefficient matrix must be symmetric".into(),
                ));
            }
        }
    }
    Ok(Field::WindowedPoly {
        center: clip_dim(center, n),
        constant,
        linear: clip_dim(linear, n),
        quadratic,
        inner,
        outer,
        n,
    })
}

/// Plane wave `u = cos(wave . x)`, the Fourier-multiplier oracle for the
/// linear fractional Laplacian.
pub fn make_cosine(n: usize, wave: Vector) -> Result<Field> {
    crate::constants::check_dim(n)?;
    let wave = clip_dim(wave, n);
    if !(geom::norm(wave) > 0.0) {
        return Err(Error::Domain("cosine wave vector must be nonzero".into()));
    }
    Ok(Field::Cosine { wave, n })
}

/// `u + delta`.
pub fn offset(base: Field, delta: f64) -> Field {
    Field::Offset {
        base: Box::new(base),
        delta,
    }
}

/// `factor * u`.
pub fn scaled(base: Field, factor: f64) -> Field {
    Field::Scaled {
        base: Box::new(base),
        factor,
    }
}

/// `u(. - shift)`.
pub fn translated(base: Field, shift: Vector) -> Field {
    Field::Translated {
        base: Box::new(base),
        shift,
    }
}

fn clip_dim(v: Vector, n: usize) -> Vector {
    let mut out = geom::ZERO;
    out[..n].copy_from_slice(&v[..n]);
    out
}

/// Smooth step used by the windowed polynomial: 0 at 0, 1 at 1, flat to
/// all orders at both ends.  Returns (sigma, sigma', sigma'').
fn smooth_step(t: f64) -> (f64, f64, f64) {
    if t <= 1e-4 {
        return (0.0, 0.0, 0.0);
    }
    if t >= 1.0 - 1e-4 {
        return (1.0, 0.0, 0.0);
    }
    let u = 1.0 - t;
    let a = (-1.0 / t).exp();
    let b = (-1.0 / u).exp();
    let da = a / (t * t);
    let db = -b / (u * u);
    let d2a = a * (1.0 / t.powi(4) - 2.0 / t.powi(3));
    let d2b = b * (1.0 / u.powi(4) - 2.0 / u.powi(3));
    let d = a + b;
    let s = a / d;
    let ds = (da * b - a * db) / (d * d);
    let d2s = (d2a * b - a * d2b) / (d * d) - 2.0 * (da * b - a * db) * (da + db) / (d * d * d);
    (s, ds, d2s)
}

impl Field {
    /// Declared far-field profile, used to budget integral tails.
    pub fn tail_profile(&self) -> TailProfile {
        match self {
            Field::Constant { level, .. } => TailProfile::Localized {
                far_radius: 1.0,
                far_value: *level,
            },
            Field::Affine { base, slope, .. } => TailProfile::PowerGrowth {
                coeff: base.abs() + geom::norm(*slope),
                exponent: 1.0,
            },
            Field::Gaussian { center, width, .. } => TailProfile::Localized {
                far_radius: geom::norm(*center) + 6.5 * width,
                far_value: 0.0,
            },
            Field::Cone {
                pole,
                amplitude,
                offset,
                exponent,
                ..
            } => TailProfile::PowerGrowth {
                coeff: amplitude.abs() * (1.0 + geom::norm(*pole)).powf(*exponent) + offset.abs(),
                exponent: *exponent,
            },
            Field::Bump { center, radius, .. } => TailProfile::Localized {
                far_radius: geom::norm(*center) + radius,
                far_value: 0.0,
            },
            Field::WindowedPoly { center, outer, .. } => TailProfile::Localized {
                far_radius: geom::norm(*center) + outer,
                far_value: 0.0,
            },
            Field::Cosine { .. } => TailProfile::Bounded,
            Field::Offset { base, delta } => match base.tail_profile() {
                TailProfile::Localized {
                    far_radius,
                    far_value,
                } => TailProfile::Localized {
                    far_radius,
                    far_value: far_value + delta,
                },
                TailProfile::Bounded => TailProfile::Bounded,
                TailProfile::PowerGrowth { coeff, exponent } => TailProfile::PowerGrowth {
                    coeff: coeff + delta.abs(),
                    exponent,
                },
            },
            Field::Scaled { base, factor } => match base.tail_profile() {
                TailProfile::Localized {
                    far_radius,
                    far_value,
                } => TailProfile::Localized {
                    far_radius,
                    far_value: factor * far_value,
                },
                TailProfile::Bounded => TailProfile::Bounded,
                TailProfile::PowerGrowth { coeff, exponent } => TailProfile::PowerGrowth {
                    coeff: coeff * factor.abs(),
                    exponent,
                },
            },
            Field::Translated { base, shift } => match base.tail_profile() {
                TailProfile::Localized {
                    far_radius,
                    far_value,
                } => TailProfile::Localized {
                    far_radius: far_radius + geom::norm(*shift),
                    far_value,
                },
                TailProfile::Bounded => TailProfile::Bounded,
                TailProfile::PowerGrowth { coeff, exponent } => TailProfile::PowerGrowth {
                    coeff: coeff * (1.0 + geom::norm(*shift)).powf(exponent.max(0.0)),
                    exponent,
                },
            },
        }
    }

    /// Wavelength of the fastest oscillation, when the field has one; the
    /// radial integrators cap panel widths at a few multiples of it.
    pub fn oscillation_wavelength(&self) -> Option<f64> {
        match self {
            Field::Cosine { wave, .. } => Some(2.0 * std::f64::consts::PI / geom::norm(*wave)),
            Field::Offset { base, .. }
            | Field::Scaled { base, .. }
            | Field::Translated { base, .. } => base.oscillation_wavelength(),
            _ => None,
        }
    }

    /// Radii `rho > 0` at which `rho -> u(x + rho d)` loses smoothness,
    /// for a unit direction `d`: the cone contributes its pole passage,
    /// every other corpus member is smooth along rays.
    pub fn ray_breakpoints(&self, x: Vector, dir: Vector) -> Vec<f64> {
        match self {
            Field::Cone { pole, .. } => {
                let to_pole = geom::sub(*pole, x);
                let along = geom::dot(to_pole, dir);
                if along <= 0.0 {
                    return Vec::new();
                }
                let closest2 = geom::dot(to_pole, to_pole) - along * along;
                if closest2.max(0.0).sqrt() <= 1e-3 * along.max(1.0) {
                    vec![along]
                } else {
                    Vec::new()
                }
            }
            Field::Offset { base, .. } | Field::Scaled { base, .. } => base.ray_breakpoints(x, dir),
            Field::Translated { base, shift } => base.ray_breakpoints(geom::sub(x, *shift), dir),
            _ => Vec::new(),
        }
    }

    /// A ball `(center, radius)` on which `|u - u(x)|` stays bounded away
    /// from zero, certifying that the field is not constant around `x`.
    /// `None` for the constant field.
    pub fn nonconstant_witness(&self, x: Vector) -> Option<(Vector, f64)> {
        match self {
            Field::Constant { .. } => None,
            Field::Affine { slope, n, .. } => {
                let len = geom::norm(*slope);
                if len == 0.0 {
                    return None;
                }
                let _ = n;
                let dir = geom::scale(1.0 / len, *slope);
                Some((geom::axpy(x, 1.0 / len, dir), 0.25 / len))
            }
            Field::Gaussian { center, width, .. } => {
                let d = geom::norm(geom::sub(x, *center));
                if d > 0.75 * width {
                    Some((*center, 0.25 * width))
                } else {
                    let probe = geom::axpy(*center, 1.5 * width, first_axis());
                    Some((probe, 0.25 * width))
                }
            }
            Field::Cone {
                pole, amplitude, ..
            } => {
                if *amplitude == 0.0 {
                    return None;
                }
                let d = geom::norm(geom::sub(x, *pole));
                let probe = geom::axpy(*pole, 4.0 * (1.0 + d), first_axis());
                Some((probe, 0.5))
            }
            Field::Bump { center, radius, .. } => {
                let d = geom::norm(geom::sub(x, *center));
                if d > 0.75 * radius {
                    Some((*center, 0.2 * radius))
                } else {
                    let probe = geom::axpy(*center, 2.0 * radius, first_axis());
                    Some((probe, 0.25 * radius))
                }
            }
            Field::WindowedPoly { center, outer, .. } => {
                let probe = geom::axpy(*center, 2.0 * outer, first_axis());
                if (self.value(probe) - self.value(x)).abs() > 1e-6 * (1.0 + self.sup_norm()) {
                    Some((probe, 0.1 * outer))
                } else {
                    None
                }
            }
            Field::Cosine { wave, .. } => {
                let len = geom::norm(*wave);
                let dir = geom::scale(1.0 / len, *wave);
                let u0 = self.value(x);
                let half = geom::axpy(x, std::f64::consts::PI / len, dir);
                let quarter = geom::axpy(x, 0.5 * std::f64::consts::PI / len, dir);
                let probe = if (self.value(half) - u0).abs() >= (self.value(quarter) - u0).abs() {
                    half
                } else {
                    quarter
                };
                Some((probe, 0.125 * std::f64::consts::PI / len))
            }
            Field::Offset { base, .. } | Field::Scaled { base, .. } => base.nonconstant_witness(x),
            Field::Translated { base, shift } => base
                .nonconstant_witness(geom::sub(x, *shift))
                .map(|(z, r)| (geom::add(z, *shift), r)),
        }
    }
}

fn first_axis() -> Vector {
    [1.0, 0.0, 0.0]
}

impl FieldOps for Field {
    fn dim(&self) -> usize {
        match self {
            Field::Constant { n, .. }
            | Field::Affine { n, .. }
            | Field::Gaussian { n, .. }
            | Field::Cone { n, .. }
            | Field::Bump { n, .. }
            | Field::WindowedPoly { n, .. }
            | Field::Cosine { n, .. } => *n,
            Field::Offset { base, .. }
            | Field::Scaled { base, .. }
            | Field::Translated { base, .. } => base.dim(),
        }
    }

    fn value(&self, x: Vector) -> f64 {
        match self {
            Field::Constant { level, .. } => *level,
            Field::Affine { base, slope, .. } => base + geom::dot(*slope, x),
            Field::Gaussian { center, width, .. } => {
                let d = geom::sub(x, *center);
                (-geom::dot(d, d) / (width * width)).exp()
            }
            Field::Cone {
                pole,
                amplitude,
                offset,
                exponent,
                ..
            } => {
                let rho = geom::norm(geom::sub(x, *pole));
                amplitude * rho.powf(*exponent) + offset
            }
            Field::Bump { center, radius, .. } => {
                let d = geom::sub(x, *center);
                let t = geom::dot(d, d) / (radius * radius);
                if t >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - t)).exp()
                }
            }
            Field::WindowedPoly {
                center,
                constant,
                linear,
                quadratic,
                inner,
                outer,
                ..
            } => {
                let d = geom::sub(x, *center);
                let rho = geom::norm(d);
                if rho >= *outer {
                    return 0.0;
                }
                let q = constant + geom::dot(*linear, d) + 0.5 * geom::quad_form(quadratic, d);
                if rho <= *inner {
                    q
                } else {
                    let (sig, _, _) = smooth_step((rho - inner) / (outer - inner));
                    q * (1.0 - sig)
                }
            }
            Field::Cosine { wave, .. } => geom::dot(*wave, x).cos(),
            Field::Offset { base, delta } => base.value(x) + delta,
            Field::Scaled { base, factor } => factor * base.value(x),
            Field::Translated { base, shift } => base.value(geom::sub(x, *shift)),
        }
    }

    fn gradient(&self, x: Vector) -> Result<Vector> {
        match self {
            Field::Constant { .. } => Ok(geom::ZERO),
            Field::Affine { slope, .. } => Ok(*slope),
            Field::Gaussian { center, width, .. } => {
                let d = geom::sub(x, *center);
                let u = (-geom::dot(d, d) / (width * width)).exp();
                Ok(geom::scale(-2.0 * u / (width * width), d))
            }
            Field::Cone {
                pole,
                amplitude,
                exponent,
                ..
            } => {
                let d = geom::sub(x, *pole);
                let rho = geom::norm(d);
                self.cone_guard(rho)?;
                Ok(geom::scale(
                    amplitude * exponent * rho.powf(exponent - 2.0),
                    d,
                ))
            }
            Field::Bump { center, radius, .. } => {
                let d = geom::sub(x, *center);
                let t = geom::dot(d, d) / (radius * radius);
                if t >= 1.0 {
                    return Ok(geom::ZERO);
                }
                let f = (1.0 - 1.0 / (1.0 - t)).exp();
                let df = -f / ((1.0 - t) * (1.0 - t));
                Ok(geom::scale(2.0 * df / (radius * radius), d))
            }
            Field::WindowedPoly {
                center,
                constant,
                linear,
                quadratic,
                inner,
                outer,
                ..
            } => {
                let d = geom::sub(x, *center);
                let rho = geom::norm(d);
                if rho >= *outer {
                    return Ok(geom::ZERO);
                }
                let grad_q = geom::add(*linear, geom::mat_vec(quadratic, d));
                if rho <= *inner {
                    return Ok(grad_q);
                }
                let q = constant + geom::dot(*linear, d) + 0.5 * geom::quad_form(quadratic, d);
                let width = outer - inner;
                let (sig, dsig, _) = smooth_step((rho - inner) / width);
                let w = 1.0 - sig;
                let dw = -dsig / width;
                let radial = geom::scale(dw / rho, d);
                Ok(geom::add(geom::scale(w, grad_q), geom::scale(q, radial)))
            }
            Field::Cosine { wave, .. } => Ok(geom::scale(-geom::dot(*wave, x).sin(), *wave)),
            Field::Offset { base, .. } => base.gradient(x),
            Field::Scaled { base, factor } => base.gradient(x).map(|g| geom::scale(*factor, g)),
            Field::Translated { base, shift } => base.gradient(geom::sub(x, *shift)),
        }
    }

    fn hessian(&self, x: Vector) -> Result<Matrix> {
        match self {
            Field::Constant { .. } | Field::Affine { .. } => Ok([[0.0; MAX_DIM]; MAX_DIM]),
            Field::Gaussian {
                center, width, n, ..
            } => {
                let d = geom::sub(x, *center);
                let w2 = width * width;
                let u = (-geom::dot(d, d) / w2).exp();
                let mut h = [[0.0; MAX_DIM]; MAX_DIM];
                for i in 0..*n {
                    for j in 0..*n {
                        h[i][j] = u * (4.0 * d[i] * d[j] / (w2 * w2));
                        if i == j {
                            h[i][j] -= u * 2.0 / w2;
                        }
                    }
                }
                Ok(h)
            }
            Field::Cone {
                pole,
                amplitude,
                exponent,
                n,
                ..
            } => {
                let d = geom::sub(x, *pole);
                let rho = geom::norm(d);
                self.cone_guard(rho)?;
                let a = *exponent;
                let scale = amplitude * a * rho.powf(a - 2.0);
                let radial = amplitude * a * (a - 2.0) * rho.powf(a - 4.0);
                let mut h = [[0.0; MAX_DIM]; MAX_DIM];
                for i in 0..*n {
                    for j in 0..*n {
                        h[i][j] = radial * d[i] * d[j];
                        if i == j {
                            h[i][j] += scale;
                        }
                    }
                }
                Ok(h)
            }
            Field::Bump {
                center, radius, n, ..
            } => {
                let d = geom::sub(x, *center);
                let r2 = radius * radius;
                let t = geom::dot(d, d) / r2;
                let mut h = [[0.0; MAX_DIM]; MAX_DIM];
                if t >= 1.0 {
                    return Ok(h);
                }
                let one = 1.0 - t;
                let f = (1.0 - 1.0 / one).exp();
                let df = -f / (one * one);
                let d2f = f * (1.0 / one.powi(4) - 2.0 / one.powi(3));
                for i in 0..*n {
                    for j in 0..*n {
                        h[i][j] = 4.0 * d2f * d[i] * d[j] / (r2 * r2);
                        if i == j {
                            h[i][j] += 2.0 * df / r2;
                        }
                    }
                }
                Ok(h)
            }
            Field::WindowedPoly {
                center,
                constant,
                linear,
                quadratic,
                inner,
                outer,
                n,
            } => {
                let d = geom::sub(x, *center);
                let rho = geom::norm(d);
                let mut h = [[0.0; MAX_DIM]; MAX_DIM];
                if rho >= *outer {
                    return Ok(h);
                }
                if rho <= *inner {
                    for i in 0..*n {
                        for j in 0..*n {
                            h[i][j] = quadratic[i][j];
                        }
                    }
                    return Ok(h);
                }
                let q = constant + geom::dot(*linear, d) + 0.5 * geom::quad_form(quadratic, d);
                let grad_q = geom::add(*linear, geom::mat_vec(quadratic, d));
                let width = outer - inner;
                let (sig, dsig, d2sig) = smooth_step((rho - inner) / width);
                let w = 1.0 - sig;
                let dw = -dsig / width;
                let d2w = -d2sig / (width * width);
                for i in 0..*n {
                    for j in 0..*n {
                        let radial2 = d[i] * d[j] / (rho * rho);
                        let mut v = w * quadratic[i][j];
                        v += dw / rho * (grad_q[i] * d[j] + grad_q[j] * d[i]);
                        v += q * (d2w * radial2);
                        v += q * dw * (((i == j) as usize as f64) - radial2) / rho;
                        h[i][j] = v;
                    }
                }
                Ok(h)
            }
            Field::Cosine { wave, n, .. } => {
                let c = geom::dot(*wave, x).cos();
                let mut h = [[0.0; MAX_DIM]; MAX_DIM];
                for i in 0..*n {
                    for j in 0..*n {
                        h[i][j] = -c * wave[i] * wave[j];
                    }
                }
                Ok(h)
            }
            Field::Offset { base, .. } => base.hessian(x),
            Field::Scaled { base, factor } => base.hessian(x).map(|m| {
                let mut out = m;
                for row in out.iter_mut() {
                    for v in row.iter_mut() {
                        *v *= factor;
                    }
                }
                out
            }),
            Field::Translated { base, shift } => base.hessian(geom::sub(x, *shift)),
        }
    }

    fn sup_norm(&self) -> f64 {
        match self {
            Field::Constant { level, .. } => level.abs(),
            Field::Affine { base, slope, .. } => {
                base.abs() + BOUNDING_BOX_RADIUS * geom::norm(*slope)
            }
            Field::Gaussian { .. } | Field::Bump { .. } => 1.0,
            Field::Cone {
                pole,
                amplitude,
                offset,
                exponent,
                ..
            } => {
                amplitude.abs() * (geom::norm(*pole) + BOUNDING_BOX_RADIUS).powf(*exponent)
                    + offset.abs()
            }
            Field::WindowedPoly {
                constant,
                linear,
                quadratic,
                outer,
                ..
            } => {
                let mut frob = 0.0;
                for row in quadratic {
                    for v in row {
                        frob += v * v;
                    }
                }
                constant.abs() + geom::norm(*linear) * outer + 0.5 * frob.sqrt() * outer * outer
            }
            Field::Cosine { .. } => 1.0,
            Field::Offset { base, delta } => base.sup_norm() + delta.abs(),
            Field::Scaled { base, factor } => factor.abs() * base.sup_norm(),
            Field::Translated { base, .. } => base.sup_norm(),
        }
    }

    fn smooth_radius(&self, x: Vector) -> f64 {
        match self {
            Field::Constant { .. } | Field::Affine { .. } => 1.0,
            Field::Gaussian { width, .. } => *width,
            Field::Cone { pole, .. } => 0.5 * geom::norm(geom::sub(x, *pole)),
            Field::Bump { center, radius, .. } => {
                // Derivatives steepen like powers of 1/(1 - t) toward the
                // support boundary; the control scale shrinks accordingly.
                let d = geom::sub(x, *center);
                let t = geom::dot(d, d) / (radius * radius);
                if t >= 1.0 {
                    (geom::norm(d) - radius).max(1e-3 * radius)
                } else {
                    (0.5 * radius * (1.0 - t) * (1.0 - t)).max(1e-3 * radius)
                }
            }
            Field::WindowedPoly {
                center,
                inner,
                outer,
                ..
            } => {
                let base = 0.5 * (outer - inner).min(*inner);
                let rho = geom::norm(geom::sub(x, *center));
                if rho <= *inner || rho >= *outer {
                    base
                } else {
                    // Same steepening inside the window transition.
                    let t = (rho - inner) / (outer - inner);
                    let m = t.min(1.0 - t);
                    (base * (4.0 * m * m).min(1.0)).max(1e-3 * base)
                }
            }
            Field::Cosine { wave, .. } => 2.0 * std::f64::consts::PI / geom::norm(*wave),
            Field::Offset { base, .. } | Field::Scaled { base, .. } => base.smooth_radius(x),
            Field::Translated { base, shift } => base.smooth_radius(geom::sub(x, *shift)),
        }
    }
}

impl Field {
    fn cone_guard(&self, rho: f64) -> Result<()> {
        if let Field::Cone { pole, .. } = self {
            let guard = 1e-12 * (1.0 + geom::norm(*pole));
            if rho < guard {
                return Err(Error::Domain(format!(
                    "cone derivatives are rejected inside the guard ball (rho = {rho})"
                )));
            }
        }
        Ok(())
    }
}

/// Worst relative disagreement between analytic and central-difference
/// derivatives over the sample points; errors are measured against the
/// natural scales `sup / eta` and `sup / eta^2`.
#[derive(Clone, Copy, Debug)]
pub struct DerivativeReport {
    pub max_gradient_error: f64,
    pub max_hessian_error: f64,
}

/// Compares analytic gradient and Hessian against central differences with
/// step `h_rel` times the local smoothness radius.
pub fn validate_derivatives(
    field: &impl FieldOps,
    points: &[Vector],
    h_rel: f64,
) -> Result<DerivativeReport> {
    if !(h_rel > 0.0 && h_rel < 0.1) {
        return Err(Error::Domain(format!(
            "finite-difference step must lie in (0, 0.1), got {h_rel}"
        )));
    }
    let n = field.dim();
    let mut report = DerivativeReport {
        max_gradient_error: 0.0,
        max_hessian_error: 0.0,
    };
    for &x in points {
        let eta = field.smooth_radius(x);
        if !(eta > 0.0) {
            return Err(Error::Domain(
                "sample point has no smooth neighborhood".into(),
            ));
        }
        let h = h_rel * eta;
        let grad_scale = field.sup_norm() / eta + 1e-300;
        let hess_scale = field.sup_norm() / (eta * eta) + 1e-300;
        let grad = field.gradient(x)?;
        let hess = field.hessian(x)?;
        let step = |i: usize, t: f64| {
            let mut y = x;
            y[i] += t;
            y
        };
        for i in 0..n {
            let fd = (field.value(step(i, h)) - field.value(step(i, -h))) / (2.0 * h);
            report.max_gradient_error = report
                .max_gradient_error
                .max((fd - grad[i]).abs() / grad_scale);
            let fd2 = (field.value(step(i, h)) - 2.0 * field.value(x) + field.value(step(i, -h)))
                / (h * h);
            report.max_hessian_error = report
                .max_hessian_error
                .max((fd2 - hess[i][i]).abs() / hess_scale);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let probe = |si: f64, sj: f64| {
                    let mut y = x;
                    y[i] += si * h;
                    y[j] += sj * h;
                    field.value(y)
                };
                let fd = (probe(1.0, 1.0) - probe(1.0, -1.0) - probe(-1.0, 1.0)
                    + probe(-1.0, -1.0))
                    / (4.0 * h * h);
                report.max_hessian_error = report
                    .max_hessian_error
                    .max((fd - hess[i][j]).abs() / hess_scale);
            }
        }
    }
    Ok(report)
}
