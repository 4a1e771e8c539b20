//! Declarative experiment configuration: a JSON file, flag overrides,
//! and the corpus registry that turns field names into fields.

use std::path::{Path, PathBuf};

use fraclab_core::fields::{self, Field};
use fraclab_core::geom::{self, Matrix, Vector};
use fraclab_core::quadrature::QuadratureSpec;
use fraclab_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// One experiment: a field, an operator, its parameters, and where the
/// tables go.  Every entry is optional so that a config file and the
/// command line can each fill in part of the picture; the command line
/// wins where both speak.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub field: Option<FieldConfig>,
    pub operator: Option<String>,
    pub n: Option<usize>,
    pub s: Option<f64>,
    pub p: Option<f64>,
    pub r: Option<f64>,
    pub x: Option<Vec<f64>>,
    pub variant: Option<String>,
    pub r_grid: Option<Vec<f64>>,
    pub s_grid: Option<Vec<f64>>,
    pub tolerance: Option<f64>,
    pub quadrature: Option<QuadratureSpec>,
    pub output: Option<OutputConfig>,
}

/// Where artifacts go and which of them are written.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// "csv", "json", "both", or "none".
    pub format: Option<String>,
}

/// A corpus member by name plus whichever parameters it takes; unset
/// parameters fall back to the defaults listed by `fraclab corpus`.
/// Parameters that a field does not take are ignored.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub name: Option<String>,
    pub level: Option<f64>,
    pub base: Option<f64>,
    pub slope: Option<Vec<f64>>,
    pub center: Option<Vec<f64>>,
    pub width: Option<f64>,
    pub amplitude: Option<f64>,
    pub offset: Option<f64>,
    pub pole: Option<Vec<f64>>,
    pub radius: Option<f64>,
    pub constant: Option<f64>,
    pub linear: Option<Vec<f64>>,
    /// Row-major second-order coefficients, up to nine entries.
    pub quadratic: Option<Vec<f64>>,
    pub inner: Option<f64>,
    pub outer: Option<f64>,
    pub wave: Option<Vec<f64>>,
}

impl ExperimentConfig {
    /// Reads a JSON config; parse errors keep serde's line and column.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Domain(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Domain(format!("config parse error in {}: {e}", path.display())))
    }

    /// Lays `over` on top of `self`, entry by entry; the field block is
    /// merged per parameter.
    pub fn merged_with(self, over: ExperimentConfig) -> ExperimentConfig {
        ExperimentConfig {
            field: match (self.field, over.field) {
                (Some(under), Some(over)) => Some(under.merged_with(over)),
                (under, over) => over.or(under),
            },
            operator: over.operator.or(self.operator),
            n: over.n.or(self.n),
            s: over.s.or(self.s),
            p: over.p.or(self.p),
            r: over.r.or(self.r),
            x: over.x.or(self.x),
            variant: over.variant.or(self.variant),
            r_grid: over.r_grid.or(self.r_grid),
            s_grid: over.s_grid.or(self.s_grid),
            tolerance: over.tolerance.or(self.tolerance),
            quadrature: over.quadrature.or(self.quadrature),
            output: match (self.output, over.output) {
                (Some(under), Some(over)) => Some(OutputConfig {
                    dir: over.dir.or(under.dir),
                    format: over.format.or(under.format),
                }),
                (under, over) => over.or(under),
            },
        }
    }

    /// Fills every entry with its default so the echoed config in the
    /// JSON summary is complete.
    pub fn populated(&self, eta: f64) -> ExperimentConfig {
        let mut field = self.field.clone().unwrap_or_default();
        if field.name.is_none() {
            field.name = Some(DEFAULT_FIELD.into());
        }
        let out = self.output.clone().unwrap_or_default();
        ExperimentConfig {
            field: Some(field),
            operator: self.operator.clone(),
            n: Some(self.n()),
            s: Some(self.s()),
            p: Some(self.p()),
            r: Some(self.r(eta)),
            x: Some(self.x(self.n())[..self.n()].to_vec()),
            variant: Some(self.variant.clone().unwrap_or_else(|| "auto".into())),
            r_grid: Some(self.r_grid(eta)),
            s_grid: Some(self.s_grid()),
            tolerance: self.tolerance,
            quadrature: Some(self.quadrature()),
            output: Some(out),
        }
    }

    pub fn n(&self) -> usize {
        self.n.unwrap_or(2)
    }

    pub fn s(&self) -> f64 {
        self.s.unwrap_or(0.75)
    }

    pub fn p(&self) -> f64 {
        self.p.unwrap_or(2.0)
    }

    fn x_slice(&self) -> &[f64] {
        self.x.as_deref().unwrap_or(DEFAULT_POINT)
    }

    /// Evaluation point, zeroed beyond the active dimension.
    pub fn x(&self, n: usize) -> Vector {
        let mut v = geom::vector(self.x_slice());
        for c in v.iter_mut().skip(n) {
            *c = 0.0;
        }
        v
    }

    /// Radius for mean-value operators; defaults to an eighth of the
    /// smoothness radius at the evaluation point.
    pub fn r(&self, eta: f64) -> f64 {
        self.r.unwrap_or(eta / 8.0)
    }

    /// Ascending dyadic radius grid `r0 * 2^-k` for k = 0..7 with
    /// `r0 = eta / 8` unless the config pins its own grid.
    pub fn r_grid(&self, eta: f64) -> Vec<f64> {
        match &self.r_grid {
            Some(grid) => grid.clone(),
            None => {
                let r0 = eta / 8.0;
                (0..8).rev().map(|k| r0 * 0.5f64.powi(k)).collect()
            }
        }
    }

    /// Exponent grid marching toward s = 1.
    pub fn s_grid(&self) -> Vec<f64> {
        self.s_grid
            .clone()
            .unwrap_or_else(|| vec![0.9, 0.99, 0.999])
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        self.quadrature.unwrap_or_default()
    }

    /// Builds the corpus field; `s` feeds the cone's exponent.
    pub fn build_field(&self) -> Result<Field> {
        self.field
            .clone()
            .unwrap_or_default()
            .build(self.n(), self.s())
    }
}

const DEFAULT_FIELD: &str = "gaussian";
const DEFAULT_POINT: &[f64] = &[0.5, -0.3, 0.4];

fn vec_or(given: &Option<Vec<f64>>, fallback: [f64; 3]) -> Vector {
    match given {
        Some(v) => geom::vector(v),
        None => fallback,
    }
}

fn matrix_or(given: &Option<Vec<f64>>, fallback: Matrix) -> Matrix {
    match given {
        Some(entries) => {
            let mut m = [[0.0; 3]; 3];
            for (k, &v) in entries.iter().take(9).enumerate() {
                m[k / 3][k % 3] = v;
            }
            m
        }
        None => fallback,
    }
}

impl FieldConfig {
    fn merged_with(self, over: FieldConfig) -> FieldConfig {
        FieldConfig {
            name: over.name.or(self.name),
            level: over.level.or(self.level),
            base: over.base.or(self.base),
            slope: over.slope.or(self.slope),
            center: over.center.or(self.center),
            width: over.width.or(self.width),
            amplitude: over.amplitude.or(self.amplitude),
            offset: over.offset.or(self.offset),
            pole: over.pole.or(self.pole),
            radius: over.radius.or(self.radius),
            constant: over.constant.or(self.constant),
            linear: over.linear.or(self.linear),
            quadratic: over.quadratic.or(self.quadratic),
            inner: over.inner.or(self.inner),
            outer: over.outer.or(self.outer),
            wave: over.wave.or(self.wave),
        }
    }

    pub fn build(&self, n: usize, s: f64) -> Result<Field> {
        match self.name.as_deref().unwrap_or(DEFAULT_FIELD) {
            "constant" => fields::make_constant(n, self.level.unwrap_or(1.0)),
            "affine" => fields::make_affine(
                n,
                self.base.unwrap_or(0.0),
                vec_or(&self.slope, [1.0, 0.5, -0.25]),
            ),
            "gaussian" => fields::make_gaussian(
                n,
                vec_or(&self.center, geom::ZERO),
                self.width.unwrap_or(1.0),
            ),
            "cone" => fields::make_cone(
                n,
                self.amplitude.unwrap_or(1.0),
                self.offset.unwrap_or(0.0),
                vec_or(&self.pole, geom::ZERO),
                s,
            ),
            "bump" => fields::make_bump(
                n,
                vec_or(&self.center, geom::ZERO),
                self.radius.unwrap_or(1.0),
            ),
            "windowed-poly" => fields::make_windowed_poly(
                n,
                vec_or(&self.center, geom::ZERO),
                self.constant.unwrap_or(0.0),
                vec_or(&self.linear, [0.4, -0.2, 0.1]),
                matrix_or(
                    &self.quadratic,
                    [[2.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 0.5]],
                ),
                self.inner.unwrap_or(1.0),
                self.outer.unwrap_or(2.0),
            ),
            "cosine" => fields::make_cosine(n, vec_or(&self.wave, [1.0, 0.0, 0.0])),
            other => Err(Error::Domain(format!(
                "unknown field '{other}'; known fields: constant, affine, gaussian, \
                 cone, bump, windowed-poly, cosine"
            ))),
        }
    }
}

/// Rows for the `corpus` listing: name, parameters with defaults, and
/// the far-field behavior that drives tail handling.
pub const CORPUS: &[(&str, &str, &str)] = &[
    (
        "constant",
        "level=1",
        "localized: equal to the level everywhere",
    ),
    (
        "affine",
        "base=0 slope=1,0.5,-0.25",
        "power growth: linear at infinity",
    ),
    (
        "gaussian",
        "center=0,0,0 width=1",
        "localized: negligible beyond 6.5 widths",
    ),
    (
        "cone",
        "amplitude=1 offset=0 pole=0,0,0 (exponent 2s-1)",
        "power growth with exponent 2s-1",
    ),
    (
        "bump",
        "center=0,0,0 radius=1",
        "localized: zero outside the support ball",
    ),
    (
        "windowed-poly",
        "center=0,0,0 constant=0 linear=0.4,-0.2,0.1 \
         quadratic=2,0,0,0,-1,0,0,0,0.5 inner=1 outer=2",
        "localized: constant outside the outer radius",
    ),
    ("cosine", "wave=1,0,0", "bounded: oscillates without decay"),
];
