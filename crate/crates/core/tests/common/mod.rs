//! Shared helpers for the acceptance suite: an independent
//! double-exponential quadrature for oracle integrals and the
//! per-criterion reporting harness.
//!
//! The quadrature here deliberately shares nothing with the library's
//! Gauss-Jacobi machinery so that agreement between the two is
//! evidence, not tautology.

/// Double-exponential (tanh-sinh) rule on (a, b).  The integrand
/// receives the node along with its distances from both endpoints,
/// computed without cancellation, so endpoint singularities like
/// `(x - a)^(-s)` can be evaluated stably.
pub fn tanh_sinh<F: Fn(f64, f64, f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let steps = 2400i64;
    let cut = 4.0f64;
    let h = cut / steps as f64;
    let mut total = 0.0;
    for k in -steps..=steps {
        let u = k as f64 * h;
        let su = std::f64::consts::FRAC_PI_2 * u.sinh();
        let dist_a = half * 2.0 / (1.0 + (-2.0 * su).exp());
        let dist_b = half * 2.0 / (1.0 + (2.0 * su).exp());
        let weight = half * std::f64::consts::FRAC_PI_2 * u.cosh() / su.cosh().powi(2);
        if !(weight > 0.0) || dist_a == 0.0 || dist_b == 0.0 {
            continue;
        }
        let v = f(a + dist_a, dist_a, dist_b);
        if v.is_finite() {
            total += weight * v;
        }
    }
    total * h
}

/// `int_1^inf t^(-1) (t^2 - 1)^(-s) dt`, the radial mass of the annular
/// mean kernel, evaluated from its definition.  The head keeps the
/// algebraic singularity at t = 1; the tail maps to (0, 1] through
/// t = 2/v, where the integrand becomes `v^(2s-1) (4 - v^2)^(-s)`.
pub fn annular_kernel_mass(s: f64) -> f64 {
    let head = tanh_sinh(|t, da, _| (da * (t + 1.0)).powf(-s) / t, 1.0, 2.0);
    let tail = tanh_sinh(
        |v, da, _| da.powf(2.0 * s - 1.0) * (4.0 - v * v).powf(-s),
        0.0,
        1.0,
    );
    head + tail
}

/// Prints the per-criterion verdict line and fails the test when any
/// check inside the criterion missed its tolerance.
pub fn conclude(tag: &str, failures: Vec<String>) {
    if failures.is_empty() {
        println!("{tag}: pass");
    } else {
        println!("{tag}: FAIL");
        panic!(
            "{tag} failed {} check(s):\n{}",
            failures.len(),
            failures.join("\n")
        );
    }
}

/// Records a failure line when `value` and `target` disagree beyond the
/// relative tolerance.
pub fn check_rel(failures: &mut Vec<String>, label: &str, value: f64, target: f64, tol: f64) {
    let scale = target.abs().max(1e-300);
    let err = (value - target).abs() / scale;
    if !(err <= tol) {
        failures.push(format!(
            "{label}: got {value:.12e}, want {target:.12e} (relative error {err:.3e} > {tol:.1e})"
        ));
    }
}

/// Records a failure line when `value` exceeds the absolute bound.
pub fn check_abs(failures: &mut Vec<String>, label: &str, value: f64, bound: f64) {
    if !(value.abs() <= bound) {
        failures.push(format!(
            "{label}: |{value:.12e}| exceeds the bound {bound:.1e}"
        ));
    }
}

/// Records a failure line when `ok` is false.
pub fn check_that(failures: &mut Vec<String>, label: &str, ok: bool, detail: String) {
    if !ok {
        failures.push(format!("{label}: {detail}"));
    }
}
