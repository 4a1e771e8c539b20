//! Closed-form normalizing constants shared by the operator modules.
//!
//! Every quantity here is an explicit Gamma-function expression or an
//! elementary spherical-cap integral.  The defining integral is documented
//! next to each item, and the tests re-derive each value by independent
//! quadrature so that a typo in a closed form cannot hide behind its own
//! reuse.
//!
//! Conventions: the dimension `n` ranges over 1..=3, the differentiability
//! order `s` over (0, 1), and the exponent `p` over the reals with
//! `p >= 2`.  In dimension one the "sphere" is the two-point set {-1, +1}
//! with counting weight one on each point, and all formulas below are valid
//! verbatim under that convention.

use crate::{Error, Result};

/// Validates the spatial dimension.
pub(crate) fn check_dim(n: usize) -> Result<()> {
    if (1..=3).contains(&n) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "dimension must be 1, 2, or 3, got {n}"
        )))
    }
}

/// Validates the differentiability order `s`.
pub(crate) fn check_s(s: f64) -> Result<()> {
    if s.is_finite() && s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "order s must lie in (0, 1), got {s}"
        )))
    }
}

/// Validates the integrability exponent `p`.
pub(crate) fn check_p(p: f64) -> Result<()> {
    if p.is_finite() && p >= 2.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "exponent p must satisfy p >= 2, got {p}"
        )))
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function via the Lanczos approximation (g = 7, nine terms),
/// extended to negative non-integer arguments by reflection.
///
/// Relative accuracy is better than 1e-13 across (0, 30), which covers
/// every argument produced by the constants below.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Gamma(x) Gamma(1 - x) = pi / sin(pi x).
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x))
    } else {
        let z = x - 1.0;
        let mut acc = LANCZOS_COEFFS[0];
        for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
            acc += c / (z + i as f64);
        }
        let t = z + LANCZOS_G + 0.5;
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * acc
    }
}

/// Surface measure of the unit sphere: 2, 2 pi, 4 pi for n = 1, 2, 3.
pub fn sphere_area(n: usize) -> Result<f64> {
    check_dim(n)?;
    Ok(2.0 * std::f64::consts::PI.powf(n as f64 / 2.0) / gamma(n as f64 / 2.0))
}

/// Normalizing constant of the annular mean-value weight,
/// `c(n, s) = Gamma(n/2) sin(pi s) / pi^(n/2 + 1)`.
///
/// It is the reciprocal of the full-space kernel mass
/// `int_{|y| > 1} (|y|^2 - 1)^(-s) |y|^(-n) dy`, so the weight it scales
/// integrates to exactly one on every annulus.
pub fn mean_kernel_constant(n: usize, s: f64) -> Result<f64> {
    check_dim(n)?;
    check_s(s)?;
    let half = n as f64 / 2.0;
    Ok(gamma(half) * (std::f64::consts::PI * s).sin() / std::f64::consts::PI.powf(half + 1.0))
}

/// Normalizing constant of the linear fractional Laplacian,
/// `C(n, s) = 4^s s Gamma(n/2 + s) / (pi^(n/2) Gamma(1 - s))`.
///
/// With this factor the operator has Fourier symbol `|xi|^(2s)`, which the
/// tests exercise against cosine fields.
pub fn frac_laplacian_normalizer(n: usize, s: f64) -> Result<f64> {
    check_dim(n)?;
    check_s(s)?;
    let half = n as f64 / 2.0;
    Ok(4.0f64.powf(s) * s * gamma(half + s) / (std::f64::consts::PI.powf(half) * gamma(1.0 - s)))
}

/// Tail constant `2 sin(pi s) / pi` of the one-dimensional annular weight.
///
/// It normalizes `int_r^inf (rho^2 - r^2)^(-s) rho^(2s - 1) drho` to 1/2
/// per ray, hence to one over the two rays of a line.
pub fn radial_tail_constant(s: f64) -> Result<f64> {
    check_s(s)?;
    Ok(2.0 * (std::f64::consts::PI * s).sin() / std::f64::consts::PI)
}

/// Tail constant `sin(pi s) / pi` of the single-ray mean used by the
/// nonlocal infinity-Laplacian; half of [`radial_tail_constant`] because
/// the supremum and infimum rays are averaged separately.
pub fn infinity_tail_constant(s: f64) -> Result<f64> {
    check_s(s)?;
    Ok((std::f64::consts::PI * s).sin() / std::f64::consts::PI)
}

/// Directional moments of the unit sphere against `|omega_1|^(p-2)`:
///
/// * transverse: `gamma_p = int_{S^{n-1}} |omega_1|^(p-2) omega_2^2 domega`
///   (for n = 1 the convention makes it `2 / (p - 1)`),
/// * axial: `gamma_p' = int_{S^{n-1}} |omega_1|^p domega`.
///
/// Both are Beta-integral evaluations,
/// `gamma_p = 2 Gamma((p-1)/2) Gamma(1/2)^(n-2) Gamma(3/2) / Gamma((p+n)/2)`
/// and
/// `gamma_p' = 2 Gamma((p+1)/2) Gamma(1/2)^(n-1) / Gamma((p+n)/2)`,
/// and they satisfy `gamma_p' = (p - 1) gamma_p` exactly.
pub fn directional_moments(n: usize, p: f64) -> Result<(f64, f64)> {
    check_dim(n)?;
    check_p(p)?;
    let sqrt_pi = gamma(0.5);
    let transverse = 2.0 * gamma((p - 1.0) / 2.0) * sqrt_pi.powi(n as i32 - 2) * gamma(1.5)
        / gamma((p + n as f64) / 2.0);
    let axial =
        2.0 * gamma((p + 1.0) / 2.0) * sqrt_pi.powi(n as i32 - 1) / gamma((p + n as f64) / 2.0);
    Ok((transverse, axial))
}

/// Full sphere moment `C_{n,p} = int_{S^{n-1}} |omega_1|^(p-2) domega`,
/// in closed form `2 pi^((n-1)/2) Gamma((p-1)/2) / Gamma((n+p-2)/2)`.
///
/// It ties the directional moments together through
/// `(n - 1) gamma_p + gamma_p' = C_{n,p}`.
pub fn sphere_p_moment(n: usize, p: f64) -> Result<f64> {
    check_dim(n)?;
    check_p(p)?;
    Ok(
        2.0 * std::f64::consts::PI.powf((n as f64 - 1.0) / 2.0) * gamma((p - 1.0) / 2.0)
            / gamma((n as f64 + p - 2.0) / 2.0),
    )
}

/// Moments of the one-sided spherical cap `{omega : omega . e > c}`, for a
/// unit axis `e` and threshold `c` in [0, 1):
///
/// * `alpha`: `(1/2) int_cap <e_2, omega>^2 domega` (transverse),
/// * `beta`: `(1/2) int_cap (<e, omega>^2 - <e_2, omega>^2) domega` (axial
///   excess),
/// * `gamma_cap`: reciprocal of the cap's surface measure.
///
/// The ratio `beta / alpha` increases from 0 at `c = 0` and selects the
/// threshold for a given exponent via [`solve_cap_threshold`].
#[derive(Clone, Copy, Debug)]
pub struct CapMoments {
    pub alpha: f64,
    pub beta: f64,
    pub gamma_cap: f64,
}

/// Evaluates the cap moments in closed form.
///
/// In dimension two, with `theta_c = acos(c)`,
/// `alpha = (theta_c - c sqrt(1 - c^2)) / 2`,
/// `beta = c sqrt(1 - c^2)`, and the cap measure is `2 theta_c`.
/// In dimension three,
/// `alpha = pi (2 - 3c + c^3) / 6`, `beta = pi c (1 - c^2) / 2`, and the
/// cap measure is `2 pi (1 - c)`.  Caps need a transverse direction, so
/// dimension one is rejected.
pub fn cap_moments(n: usize, threshold: f64) -> Result<CapMoments> {
    check_dim(n)?;
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::Domain(format!(
            "cap threshold must lie in [0, 1), got {threshold}"
        )));
    }
    let c = threshold;
    match n {
        2 => {
            let theta_c = c.acos();
            let sin_c = (1.0 - c * c).sqrt();
            Ok(CapMoments {
                alpha: (theta_c - c * sin_c) / 2.0,
                beta: c * sin_c,
                gamma_cap: 1.0 / (2.0 * theta_c),
            })
        }
        3 => Ok(CapMoments {
            alpha: std::f64::consts::PI * (2.0 - 3.0 * c + c * c * c) / 6.0,
            beta: std::f64::consts::PI * c * (1.0 - c * c) / 2.0,
            gamma_cap: 1.0 / (2.0 * std::f64::consts::PI * (1.0 - c)),
        }),
        _ => Err(Error::Domain(
            "cap moments need a transverse direction, so dimension one is not allowed".into(),
        )),
    }
}

/// Solves `beta / alpha = p - 2` for the cap threshold by bisection.
///
/// The ratio is continuous and strictly increasing on [0, 1), zero at the
/// equator, so the root is unique; `p = 2` yields the half sphere
/// (`c = 0`) and larger `p` narrows the cap around the axis.
pub fn solve_cap_threshold(n: usize, p: f64) -> Result<f64> {
    check_dim(n)?;
    check_p(p)?;
    if n == 1 {
        return Err(Error::Domain(
            "cap thresholds are defined for dimensions two and three only".into(),
        ));
    }
    let target = p - 2.0;
    if target == 0.0 {
        return Ok(0.0);
    }
    let ratio = |c: f64| -> Result<f64> {
        let m = cap_moments(n, c)?;
        Ok(m.beta / m.alpha)
    };
    let mut lo = 0.0;
    let mut hi = 1.0 - 1e-6;
    if ratio(hi)? < target {
        return Err(Error::Domain(format!(
            "exponent p = {p} pushes the cap threshold beyond the supported range"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ratio(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    let c = 0.5 * (lo + hi);
    let achieved = ratio(c)?;
    if (achieved - target).abs() > 1e-10 * (1.0 + target) {
        return Err(Error::Convergence(format!(
            "cap threshold bisection stalled: ratio {achieved} vs target {target}"
        )));
    }
    Ok(c)
}

/// Cap data attached to a `(n, p)` pair: the solved threshold plus its
/// moments.
#[derive(Clone, Copy, Debug)]
pub struct CapConstants {
    pub threshold: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma_cap: f64,
}

impl CapConstants {
    /// Solves the threshold for `(n, p)` and attaches the cap moments.
    pub fn new(n: usize, p: f64) -> Result<Self> {
        let threshold = solve_cap_threshold(n, p)?;
        let m = cap_moments(n, threshold)?;
        Ok(CapConstants {
            threshold,
            alpha: m.alpha,
            beta: m.beta,
            gamma_cap: m.gamma_cap,
        })
    }
}

/// All constants needed to evaluate the operators at one `(n, s, p)`
/// triple, computed once and passed around by value.
#[derive(Clone, Copy, Debug)]
pub struct Constants {
    pub n: usize,
    pub s: f64,
    pub p: f64,
    /// `c(n, s)`, the annular mean-kernel normalizer.
    pub mean_kernel: f64,
    /// `C(n, s)`, the linear fractional Laplacian normalizer.
    pub normalizer: f64,
    /// `2 sin(pi s) / pi`, the two-ray radial tail constant.
    pub radial_tail: f64,
    /// `sin(pi s) / pi`, the single-ray tail constant.
    pub infinity_tail: f64,
    /// Transverse directional moment `gamma_p`.
    pub gamma_dir: f64,
    /// Axial directional moment `gamma_p' = (p - 1) gamma_p`.
    pub gamma_dir_axial: f64,
    /// Sphere moment `C_{n,p}`.
    pub sphere_moment: f64,
    /// Cap threshold and moments; absent in dimension one.
    pub cap: Option<CapConstants>,
}

impl Constants {
    /// Computes the full constant set, solving the cap threshold when the
    /// dimension admits one.
    pub fn new(n: usize, s: f64, p: f64) -> Result<Self> {
        check_dim(n)?;
        check_s(s)?;
        check_p(p)?;
        let (gamma_dir, gamma_dir_axial) = directional_moments(n, p)?;
        let cap = if n >= 2 {
            Some(CapConstants::new(n, p)?)
        } else {
            None
        };
        Ok(Constants {
            n,
            s,
            p,
            mean_kernel: mean_kernel_constant(n, s)?,
            normalizer: frac_laplacian_normalizer(n, s)?,
            radial_tail: radial_tail_constant(s)?,
            infinity_tail: infinity_tail_constant(s)?,
            gamma_dir,
            gamma_dir_axial,
            sphere_moment: sphere_p_moment(n, p)?,
            cap,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_matches_reference_values() {
        // Reference values from a 50-digit arbitrary-precision evaluation.
        let cases = [
            (0.5, 1.772_453_850_905_516_027_3),
            (1.0, 1.0),
            (1.5, 0.886_226_925_452_758_013_65),
            (3.7, 4.170_651_783_796_603_165_4),
            (5.5, 52.342_777_784_553_520_181),
            (10.0, 362_880.0),
            (29.5, 1.634_812_519_827_426_644_4e30),
        ];
        for (x, expect) in cases {
            assert_relative_eq!(gamma(x), expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn gamma_handles_small_and_negative_arguments() {
        assert_relative_eq!(
            gamma(0.001),
            999.423_772_484_595_466_11,
            max_relative = 1e-12
        );
        // Gamma(-0.5) = -2 sqrt(pi).
        assert_relative_eq!(
            gamma(-0.5),
            -2.0 * std::f64::consts::PI.sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn gamma_satisfies_recurrence() {
        for &x in &[0.2, 0.9, 2.3, 7.7, 15.1] {
            assert_relative_eq!(gamma(x + 1.0), x * gamma(x), max_relative = 1e-13);
        }
    }

    #[test]
    fn sphere_areas_are_the_classical_values() {
        assert_relative_eq!(sphere_area(1).unwrap(), 2.0, max_relative = 1e-14);
        assert_relative_eq!(
            sphere_area(2).unwrap(),
            2.0 * std::f64::consts::PI,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            sphere_area(3).unwrap(),
            4.0 * std::f64::consts::PI,
            max_relative = 1e-14
        );
    }

    #[test]
    fn mean_kernel_constant_matches_reference_values() {
        let cases = [
            (1, 0.25, 0.225_079_079_039_276_517_39),
            (1, 0.5, 0.318_309_886_183_790_671_54),
            (1, 0.75, 0.225_079_079_039_276_517_39),
            (2, 0.25, 0.071_644_896_031_344_532_858),
            (2, 0.5, 0.101_321_183_642_337_771_44),
            (3, 0.5, 0.050_660_591_821_168_885_722),
        ];
        for (n, s, expect) in cases {
            assert_relative_eq!(
                mean_kernel_constant(n, s).unwrap(),
                expect,
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn frac_laplacian_normalizer_matches_reference_values() {
        let cases = [
            (1, 0.4, 0.281_958_452_999_990_379_07),
            (1, 0.6, 0.333_549_429_912_248_113_86),
            (2, 0.999, 0.001_270_399_747_015_928_142_4),
        ];
        for (n, s, expect) in cases {
            assert_relative_eq!(
                frac_laplacian_normalizer(n, s).unwrap(),
                expect,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn tail_constants_match_reference_values() {
        assert_relative_eq!(
            radial_tail_constant(0.25).unwrap(),
            0.450_158_158_078_553_034_78,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            radial_tail_constant(0.5).unwrap(),
            0.636_619_772_367_581_343_08,
            max_relative = 1e-14
        );
        for &s in &[0.3, 0.55, 0.9] {
            assert_relative_eq!(
                2.0 * infinity_tail_constant(s).unwrap(),
                radial_tail_constant(s).unwrap(),
                max_relative = 1e-15
            );
        }
    }

    #[test]
    fn directional_moments_match_reference_values() {
        // (n, p, transverse); the axial value is (p - 1) times it.
        let cases = [
            (2, 2.0, std::f64::consts::PI),
            (2, 3.0, 4.0 / 3.0),
            (2, 4.0, std::f64::consts::PI / 4.0),
            (3, 2.0, 4.0 * std::f64::consts::PI / 3.0),
            (3, 3.0, std::f64::consts::PI / 2.0),
            (3, 4.0, 0.837_758_040_957_278_196_92),
        ];
        for (n, p, expect) in cases {
            let (t, a) = directional_moments(n, p).unwrap();
            assert_relative_eq!(t, expect, max_relative = 1e-13);
            assert_relative_eq!(a, (p - 1.0) * expect, max_relative = 1e-13);
        }
    }

    #[test]
    fn directional_moments_hold_in_dimension_one() {
        // On {-1, +1} the transverse moment degenerates to 2 / (p - 1) and
        // the axial one to 2; the Gamma formulas reproduce both verbatim.
        for &p in &[2.0, 3.0, 4.5] {
            let (t, a) = directional_moments(1, p).unwrap();
            assert_relative_eq!(t, 2.0 / (p - 1.0), max_relative = 1e-13);
            assert_relative_eq!(a, 2.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn moment_identity_ties_sphere_and_directions() {
        for n in 1..=3usize {
            for &p in &[2.0, 2.5, 3.0, 4.0, 6.0] {
                let (t, a) = directional_moments(n, p).unwrap();
                let full = sphere_p_moment(n, p).unwrap();
                assert_relative_eq!((n as f64 - 1.0) * t + a, full, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn sphere_p_moment_matches_reference_values() {
        let cases = [
            (1, 3.0, 2.0),
            (2, 2.0, 2.0 * std::f64::consts::PI),
            (2, 3.0, 4.0),
            (2, 4.0, std::f64::consts::PI),
            (3, 2.0, 4.0 * std::f64::consts::PI),
            (3, 3.0, 2.0 * std::f64::consts::PI),
            (3, 4.0, 4.0 * std::f64::consts::PI / 3.0),
        ];
        for (n, p, expect) in cases {
            assert_relative_eq!(sphere_p_moment(n, p).unwrap(), expect, max_relative = 1e-13);
        }
    }

    #[test]
    fn mean_kernel_constant_inverts_its_defining_integral() {
        // int_{|y| > 1} (|y|^2 - 1)^(-s) |y|^(-n) dy, radially
        // |S^{n-1}| int_1^inf (rho^2 - 1)^(-s) rho^(-1) drho; substitute
        // t = rho^(-2) to land on a Beta integrand over (0, 1) and apply
        // composite Simpson in a cancellation-free form.
        for (n, s) in [(1usize, 0.25), (1, 0.5), (2, 0.25), (2, 0.5), (3, 0.5)] {
            let integrand = |t: f64| -> f64 {
                // (1 - t)^(-s) t^(s - 1) / 2 after the substitution.
                0.5 * (1.0 - t).powf(-s) * t.powf(s - 1.0)
            };
            // The endpoints are integrable-singular; split dyadically
            // toward both and use Simpson on each panel.
            let mut total = 0.0;
            let mut a = 1e-12f64;
            while a < 0.5 {
                let b = (2.0 * a).min(0.5);
                total += simpson(integrand, a, b, 512);
                a = b;
            }
            let mut b = 1e-12f64;
            while b < 0.5 {
                let c = (2.0 * b).min(0.5);
                total += simpson(integrand, 1.0 - c, 1.0 - b, 512);
                b = c;
            }
            // Endpoint remainders: int_0^eps t^(s-1)/2 = eps^s / (2s), and
            // symmetrically eps^(1-s) / (2(1-s)); both below 1e-3 already,
            // refined by the closed forms.
            total += 1e-12f64.powf(s) / (2.0 * s) + 1e-12f64.powf(1.0 - s) / (2.0 * (1.0 - s));
            let mass = sphere_area(n).unwrap() * total;
            assert_relative_eq!(
                mean_kernel_constant(n, s).unwrap(),
                1.0 / mass,
                max_relative = 1e-8
            );
        }
    }

    #[test]
    fn directional_moments_match_simpson_on_the_circle() {
        // n = 2: gamma_p = int_0^{2pi} |cos|^{p-2} sin^2, gamma_p' with
        // cos^2 in place of sin^2.
        for &p in &[2.0, 3.0, 4.0, 5.5] {
            let (t, a) = directional_moments(2, p).unwrap();
            let ft = |th: f64| th.cos().abs().powf(p - 2.0) * th.sin().powi(2);
            let fa = |th: f64| th.cos().abs().powf(p);
            assert_relative_eq!(
                simpson(ft, 0.0, 2.0 * std::f64::consts::PI, 20_000),
                t,
                max_relative = 1e-8
            );
            assert_relative_eq!(
                simpson(fa, 0.0, 2.0 * std::f64::consts::PI, 20_000),
                a,
                max_relative = 1e-8
            );
        }
    }

    #[test]
    fn cap_moments_match_reference_values() {
        // Half sphere (c = 0).
        let m2 = cap_moments(2, 0.0).unwrap();
        assert_relative_eq!(m2.alpha, std::f64::consts::PI / 4.0, max_relative = 1e-14);
        assert_relative_eq!(m2.beta, 0.0);
        assert_relative_eq!(
            m2.gamma_cap,
            1.0 / std::f64::consts::PI,
            max_relative = 1e-14
        );
        let m3 = cap_moments(3, 0.0).unwrap();
        assert_relative_eq!(m3.alpha, std::f64::consts::PI / 3.0, max_relative = 1e-14);
        assert_relative_eq!(m3.beta, 0.0);
        // Solved thresholds for p = 3.
        let m = cap_moments(2, 0.418_111_148_984_287_385_39).unwrap();
        assert_relative_eq!(m.alpha, 0.379_810_443_345_971_385_45, max_relative = 1e-12);
        assert_relative_eq!(m.beta, m.alpha, max_relative = 1e-12);
        assert_relative_eq!(
            m.gamma_cap,
            0.438_815_386_955_669_092_24,
            max_relative = 1e-12
        );
        let m = cap_moments(3, 0.366_025_403_784_438_646_76).unwrap();
        assert_relative_eq!(m.alpha, 0.497_922_483_508_340_770_45, max_relative = 1e-12);
        assert_relative_eq!(m.beta, m.alpha, max_relative = 1e-12);
        assert_relative_eq!(
            m.gamma_cap,
            0.251_043_092_328_860_677_35,
            max_relative = 1e-12
        );
    }

    #[test]
    fn cap_moments_match_simpson_integrals() {
        // Dimension two: the cap is the arc theta in (-theta_c, theta_c)
        // around the axis, and each moment is half the arc integral.
        let c: f64 = 0.37;
        let theta_c = c.acos();
        let m = cap_moments(2, c).unwrap();
        let alpha = |th: f64| th.sin().powi(2);
        let beta = |th: f64| th.cos().powi(2) - th.sin().powi(2);
        assert_relative_eq!(
            0.5 * simpson(alpha, -theta_c, theta_c, 4_000),
            m.alpha,
            max_relative = 1e-10
        );
        assert_relative_eq!(
            0.5 * simpson(beta, -theta_c, theta_c, 4_000),
            m.beta,
            max_relative = 1e-10
        );
        // Dimension three in the polar variable t = cos phi: integrating
        // the azimuth first leaves alpha = (pi/2) int_c^1 (1 - t^2) dt and
        // beta = (pi/2) int_c^1 (3t^2 - 1) dt.
        let m = cap_moments(3, c).unwrap();
        let half_pi = std::f64::consts::PI / 2.0;
        assert_relative_eq!(
            half_pi * simpson(|t: f64| 1.0 - t * t, c, 1.0, 2_000),
            m.alpha,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            half_pi * simpson(|t: f64| 3.0 * t * t - 1.0, c, 1.0, 2_000),
            m.beta,
            max_relative = 1e-12
        );
    }

    #[test]
    fn solved_thresholds_match_reference_values() {
        let cases = [
            (2, 3.0, 0.418_111_148_984_287_385_39),
            (2, 4.0, 0.583_514_128_302_554_959_40),
            // Exact algebraic roots: (-1 + sqrt(3)) / 2 and
            // (-5 + sqrt(105)) / 10.
            (3, 3.0, 0.366_025_403_784_438_646_76),
            (3, 4.0, 0.524_695_076_595_959_838_32),
        ];
        for (n, p, expect) in cases {
            assert_relative_eq!(
                solve_cap_threshold(n, p).unwrap(),
                expect,
                max_relative = 1e-10
            );
        }
        assert_eq!(solve_cap_threshold(2, 2.0).unwrap(), 0.0);
        assert_eq!(solve_cap_threshold(3, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn constants_bundle_is_consistent() {
        let k = Constants::new(2, 0.6, 3.0).unwrap();
        let cap = k.cap.unwrap();
        assert_relative_eq!(cap.beta / cap.alpha, 1.0, max_relative = 1e-10);
        assert_relative_eq!(k.gamma_dir_axial / k.gamma_dir, 2.0, max_relative = 1e-13);
        assert!(Constants::new(1, 0.6, 3.0).unwrap().cap.is_none());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(matches!(Constants::new(4, 0.5, 2.0), Err(Error::Domain(_))));
        assert!(matches!(Constants::new(2, 1.0, 2.0), Err(Error::Domain(_))));
        assert!(matches!(Constants::new(2, 0.0, 2.0), Err(Error::Domain(_))));
        assert!(matches!(Constants::new(2, 0.5, 1.5), Err(Error::Domain(_))));
        assert!(matches!(cap_moments(1, 0.3), Err(Error::Domain(_))));
        assert!(matches!(cap_moments(2, 1.0), Err(Error::Domain(_))));
        assert!(matches!(solve_cap_threshold(1, 3.0), Err(Error::Domain(_))));
    }

    /// Composite Simpson rule used as the independent oracle in this
    /// module; deliberately naive so it shares nothing with the Gauss
    /// machinery under test.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        let mut acc = f(a) + f(b);
        for i in 1..panels {
            let w = if i % 2 == 0 { 2.0 } else { 4.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }
}
