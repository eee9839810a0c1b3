//! Metric catalog and numerical validation of the Finsler axioms.
//!
//! A metric is always handled through its square `G = F²`: builtin families
//! (Euclidean, Riemannian with expression coefficients, Randers, m-th-root)
//! and free-form DSL expressions all evaluate to a jet of `G` at a sample
//! point, which is everything downstream tensor work needs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{SampleError, Sampler, SamplerConfig};
use crate::jets::{DerivSpec, Jet, JetError};
use crate::mexpr::{self, EvalError, Expr, VarSet};
use crate::product::ProductMetric;
use crate::tensors::linalg::{spd_inverse, symmetric_eigenvalues, SqMat};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("jet arithmetic failed: {0}")]
    Jet(#[from] JetError),
    #[error("factor norm vanishes: {which} = {value:.3e} at the sample point")]
    FactorNormVanishes { which: &'static str, value: f64 },
    #[error("invalid metric definition: {0}")]
    BadDefinition(String),
    #[error("fiber coordinates must not all vanish")]
    ZeroFiber,
}

/// A point of the slit tangent bundle where tensors are evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl SamplePoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self, MetricError> {
        if x.len() != y.len() {
            return Err(MetricError::Dimension { expected: x.len(), got: y.len() });
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(MetricError::BadDefinition("coordinates must be finite".into()));
        }
        if y.iter().all(|&v| v == 0.0) {
            return Err(MetricError::ZeroFiber);
        }
        Ok(Self { x, y })
    }

    /// Coordinates of one factor of a product, as its own sample point.
    pub fn project(&self, range: std::ops::Range<usize>) -> Result<Self, MetricError> {
        SamplePoint::new(self.x[range.clone()].to_vec(), self.y[range].to_vec())
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Symmetric matrix of coefficient expressions; only the upper triangle is
/// read, which makes symmetry structural rather than something to verify.
#[derive(Clone, Debug)]
pub struct CoeffMatrix {
    dim: usize,
    entries: Vec<Vec<Expr>>,
}

impl CoeffMatrix {
    pub fn new(entries: Vec<Vec<Expr>>) -> Result<Self, MetricError> {
        let dim = entries.len();
        if entries.iter().any(|row| row.len() != dim) {
            return Err(MetricError::BadDefinition("coefficient matrix must be square".into()));
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        &self.entries[i][j]
    }
}

#[derive(Clone, Debug)]
pub enum MetricKind {
    Euclidean,
    Riemannian { g: CoeffMatrix },
    Randers { a: CoeffMatrix, b: Vec<Expr> },
    MRoot { root: i64, coeffs: Vec<f64> },
    Custom { g: Expr },
    Product(Box<ProductMetric>),
}

/// A Finsler metric definition with its dimension metadata.
#[derive(Clone, Debug)]
pub struct MetricSpec {
    pub name: String,
    pub dim: usize,
    pub kind: MetricKind,
}

impl MetricSpec {
    pub fn new(name: impl Into<String>, dim: usize, kind: MetricKind) -> Result<Self, MetricError> {
        if dim == 0 {
            return Err(MetricError::BadDefinition("dimension must be at least 1".into()));
        }
        match &kind {
            MetricKind::Riemannian { g } if g.dim() != dim => {
                return Err(MetricError::Dimension { expected: dim, got: g.dim() });
            }
            MetricKind::Randers { a, b } => {
                if a.dim() != dim {
                    return Err(MetricError::Dimension { expected: dim, got: a.dim() });
                }
                if b.len() != dim {
                    return Err(MetricError::Dimension { expected: dim, got: b.len() });
                }
            }
            MetricKind::MRoot { root, coeffs } => {
                if *root < 2 || *root % 2 != 0 {
                    return Err(MetricError::BadDefinition(
                        "m-th root metrics need an even root ≥ 2".into(),
                    ));
                }
                if !coeffs.is_empty() && coeffs.len() != dim {
                    return Err(MetricError::Dimension { expected: dim, got: coeffs.len() });
                }
            }
            MetricKind::Product(pm) if pm.dim() != dim => {
                return Err(MetricError::Dimension { expected: dim, got: pm.dim() });
            }
            _ => {}
        }
        Ok(Self { name: name.into(), dim, kind })
    }

    pub fn as_product(&self) -> Option<&ProductMetric> {
        match &self.kind {
            MetricKind::Product(pm) => Some(pm),
            _ => None,
        }
    }
}

/// Jet of `G = F²` at `p`, to the orders requested in `deriv`.
pub fn eval_g_jet(m: &MetricSpec, p: &SamplePoint, deriv: DerivSpec) -> Result<Jet, MetricError> {
    if p.dim() != m.dim || deriv.dim_y() != m.dim {
        return Err(MetricError::Dimension { expected: m.dim, got: p.dim().min(deriv.dim_y()) });
    }
    let mut xj = Vec::with_capacity(m.dim);
    let mut yj = Vec::with_capacity(m.dim);
    for (i, &v) in p.x.iter().enumerate() {
        xj.push(Jet::variable(deriv, deriv.x_slot(i), v)?);
    }
    for (i, &v) in p.y.iter().enumerate() {
        yj.push(Jet::variable(deriv, deriv.y_slot(i), v)?);
    }
    eval_g_with(m, &xj, &yj)
}

/// Same as [`eval_g_jet`] but with caller-provided coordinate jets; this is
/// how product factors are evaluated inside the slot layout of the product.
pub(crate) fn eval_g_with(m: &MetricSpec, xj: &[Jet], yj: &[Jet]) -> Result<Jet, MetricError> {
    debug_assert_eq!(xj.len(), m.dim);
    debug_assert_eq!(yj.len(), m.dim);
    match &m.kind {
        MetricKind::Euclidean => {
            let mut acc = yj[0].powi(2)?;
            for v in &yj[1..] {
                acc = &acc + &v.powi(2)?;
            }
            Ok(acc)
        }
        MetricKind::Riemannian { g } => quadratic_form(g, xj, yj),
        MetricKind::Randers { a, b } => {
            let alpha_sq = quadratic_form(a, xj, yj)?;
            let alpha = alpha_sq.sqrt().map_err(|_| MetricError::FactorNormVanishes {
                which: "alpha",
                value: alpha_sq.value(),
            })?;
            let mut beta = &b[0].eval_jet(xj)? * &yj[0];
            for (bi, yi) in b.iter().zip(yj).skip(1) {
                beta = &beta + &(&bi.eval_jet(xj)? * yi);
            }
            Ok((&alpha + &beta).powi(2)?)
        }
        MetricKind::MRoot { root, coeffs } => {
            let mut acc: Option<Jet> = None;
            for (i, y) in yj.iter().enumerate() {
                let c = coeffs.get(i).copied().unwrap_or(1.0);
                let term = y.powi(*root)?.scale(c);
                acc = Some(match acc {
                    None => term,
                    Some(a) => &a + &term,
                });
            }
            let sum = acc.expect("dim >= 1");
            if sum.value() <= 0.0 {
                return Err(MetricError::FactorNormVanishes {
                    which: "root sum",
                    value: sum.value(),
                });
            }
            sum.powf(2.0 / *root as f64).map_err(MetricError::Jet)
        }
        MetricKind::Custom { g } => {
            let mut bindings = xj.to_vec();
            bindings.extend_from_slice(yj);
            Ok(g.eval_jet(&bindings)?)
        }
        MetricKind::Product(pm) => {
            let m1 = pm.factor1().dim;
            let k = eval_g_with(pm.factor1(), &xj[..m1], &yj[..m1])?;
            let h = eval_g_with(pm.factor2(), &xj[m1..], &yj[m1..])?;
            if k.value() <= 0.0 {
                return Err(MetricError::FactorNormVanishes { which: "K", value: k.value() });
            }
            if h.value() <= 0.0 {
                return Err(MetricError::FactorNormVanishes { which: "H", value: h.value() });
            }
            Ok(pm.f().eval_jet_st(&k, &h)?)
        }
    }
}

fn quadratic_form(g: &CoeffMatrix, xj: &[Jet], yj: &[Jet]) -> Result<Jet, MetricError> {
    let dim = g.dim();
    let mut acc: Option<Jet> = None;
    for i in 0..dim {
        for j in i..dim {
            let coeff = g.entry(i, j).eval_jet(xj)?;
            let mut term = &coeff * &(&yj[i] * &yj[j]);
            if i != j {
                term = term.scale(2.0);
            }
            acc = Some(match acc {
                None => term,
                Some(a) => &a + &term,
            });
        }
    }
    Ok(acc.expect("dim >= 1"))
}

/// Plain value of `G` at `(x, y)` — f64 arithmetic only, used by samplers
/// and finite-difference oracles.
pub fn eval_g_value(m: &MetricSpec, x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    debug_assert_eq!(x.len(), m.dim);
    match &m.kind {
        MetricKind::Euclidean => Ok(y.iter().map(|v| v * v).sum()),
        MetricKind::Riemannian { g } => quadratic_form_value(g, x, y),
        MetricKind::Randers { a, b } => {
            let alpha_sq = quadratic_form_value(a, x, y)?;
            if alpha_sq < 0.0 {
                return Err(MetricError::FactorNormVanishes { which: "alpha", value: alpha_sq });
            }
            let mut beta = 0.0;
            for (bi, yi) in b.iter().zip(y) {
                beta += bi.eval_f64(x)? * yi;
            }
            let f = alpha_sq.sqrt() + beta;
            Ok(f * f)
        }
        MetricKind::MRoot { root, coeffs } => {
            let sum: f64 = y
                .iter()
                .enumerate()
                .map(|(i, v)| coeffs.get(i).copied().unwrap_or(1.0) * v.powi(*root as i32))
                .sum();
            if sum <= 0.0 {
                return Err(MetricError::FactorNormVanishes { which: "root sum", value: sum });
            }
            Ok(sum.powf(2.0 / *root as f64))
        }
        MetricKind::Custom { g } => {
            let mut vars = x.to_vec();
            vars.extend_from_slice(y);
            Ok(g.eval_f64(&vars)?)
        }
        MetricKind::Product(pm) => {
            let m1 = pm.factor1().dim;
            let k = eval_g_value(pm.factor1(), &x[..m1], &y[..m1])?;
            let h = eval_g_value(pm.factor2(), &x[m1..], &y[m1..])?;
            if k <= 0.0 {
                return Err(MetricError::FactorNormVanishes { which: "K", value: k });
            }
            if h <= 0.0 {
                return Err(MetricError::FactorNormVanishes { which: "H", value: h });
            }
            Ok(pm.f().eval_value(k, h)?)
        }
    }
}

fn quadratic_form_value(g: &CoeffMatrix, x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    let dim = g.dim();
    let mut acc = 0.0;
    for i in 0..dim {
        for j in i..dim {
            let c = g.entry(i, j).eval_f64(x)?;
            let w = if i == j { 1.0 } else { 2.0 };
            acc += w * c * y[i] * y[j];
        }
    }
    Ok(acc)
}

/// The fiber Hessian `G_{αβ} = ∂²G/∂y^α∂y^β` as a matrix.
pub fn hessian_from_jet(g: &Jet) -> Result<SqMat, MetricError> {
    let spec = g.spec();
    let dim = spec.dim_y();
    let mut out = SqMat::zeros(dim);
    for a in 0..dim {
        for b in 0..dim {
            out[(a, b)] = g.partial(&[spec.y_slot(a), spec.y_slot(b)])?;
        }
    }
    Ok(out)
}

/// Whether negative-λ homogeneity failures fail validation or are only
/// flagged. Standard Finsler geometry needs positive homogeneity only;
/// reversible metrics additionally satisfy `F(x, -y) = F(x, y)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reversibility {
    #[default]
    PositiveOnly,
    Required,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationFailure {
    pub sample_index: usize,
    pub check: String,
    pub detail: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub metric: String,
    pub dim: usize,
    pub samples: usize,
    pub seed: u64,
    pub reversibility: Reversibility,
    pub tolerance: f64,
    /// Max relative residual of `G(x, λy) = λ²G(x, y)` over λ ∈ {0.5, 3}.
    pub homogeneity_positive_max: f64,
    /// Same for λ ∈ {−2, −1}; fails validation only in `Required` mode.
    pub homogeneity_negative_max: f64,
    /// Max relative residual of the Euler identity `G_α y^α = 2G`.
    pub euler_max: f64,
    /// Smallest fiber-Hessian eigenvalue seen over all samples.
    pub min_hessian_eigenvalue: f64,
    pub failures: Vec<ValidationFailure>,
    pub passed: bool,
}

/// Check the Finsler axioms on sampled points: positivity of `G`, absolute
/// 2-homogeneity, the Euler identity, and positive definiteness of the
/// fiber Hessian. Failures are report content, not errors.
pub fn validate(m: &MetricSpec, sampler: &SamplerConfig) -> Result<ValidationReport, SampleError> {
    validate_with(m, sampler, Reversibility::default(), 1e-10)
}

pub fn validate_with(
    m: &MetricSpec,
    sampler: &SamplerConfig,
    reversibility: Reversibility,
    tol: f64,
) -> Result<ValidationReport, SampleError> {
    let mut s = Sampler::new(sampler, m.dim);
    let deriv = DerivSpec::new(m.dim, m.dim, 0, 2).expect("order-2 spec");
    let mut report = ValidationReport {
        metric: m.name.clone(),
        dim: m.dim,
        samples: sampler.count,
        seed: sampler.seed,
        reversibility,
        tolerance: tol,
        homogeneity_positive_max: 0.0,
        homogeneity_negative_max: 0.0,
        euler_max: 0.0,
        min_hessian_eigenvalue: f64::INFINITY,
        failures: Vec::new(),
        passed: true,
    };

    for idx in 0..sampler.count {
        let p = s.draw(m)?;
        let fail = |report: &mut ValidationReport, check: &str, detail: String| {
            report.failures.push(ValidationFailure {
                sample_index: idx,
                check: check.to_string(),
                detail,
                x: p.x.clone(),
                y: p.y.clone(),
            });
            report.passed = false;
        };

        let g = match eval_g_jet(m, &p, deriv) {
            Ok(g) => g,
            Err(e) => {
                fail(&mut report, "evaluation", e.to_string());
                continue;
            }
        };
        let g_val = g.value();
        if g_val.is_nan() || g_val <= 0.0 {
            fail(&mut report, "positivity", format!("G = {g_val:.6e}"));
        }

        // Absolute 2-homogeneity, tested by re-evaluation at scaled fibers.
        for &lambda in &[0.5f64, 3.0, -2.0, -1.0] {
            let scaled: Vec<f64> = p.y.iter().map(|v| v * lambda).collect();
            let expected = lambda * lambda * g_val;
            let res = match eval_g_value(m, &p.x, &scaled) {
                Ok(v) => (v - expected).abs() / expected.abs().max(1e-300),
                Err(e) => {
                    if lambda > 0.0 {
                        fail(&mut report, "homogeneity", format!("λ={lambda}: {e}"));
                    } else if reversibility == Reversibility::Required {
                        fail(&mut report, "reversibility", format!("λ={lambda}: {e}"));
                    }
                    continue;
                }
            };
            if lambda > 0.0 {
                report.homogeneity_positive_max = report.homogeneity_positive_max.max(res);
                if res > tol {
                    fail(&mut report, "homogeneity", format!("λ={lambda}: rel {res:.3e}"));
                }
            } else {
                report.homogeneity_negative_max = report.homogeneity_negative_max.max(res);
                if res > tol && reversibility == Reversibility::Required {
                    fail(&mut report, "reversibility", format!("λ={lambda}: rel {res:.3e}"));
                }
            }
        }

        // Euler identity G_α y^α = 2G.
        let mut contraction = 0.0;
        for a in 0..m.dim {
            contraction += g.partial(&[deriv.y_slot(a)]).expect("order-1 partial") * p.y[a];
        }
        let euler = (contraction - 2.0 * g_val).abs() / (2.0 * g_val).abs().max(1e-300);
        report.euler_max = report.euler_max.max(euler);
        if euler > tol {
            fail(&mut report, "euler", format!("rel {euler:.3e}"));
        }

        // Positive definiteness of the fiber Hessian.
        let hess = hessian_from_jet(&g).expect("hessian extraction");
        let min_eig = symmetric_eigenvalues(&hess)[0];
        report.min_hessian_eigenvalue = report.min_hessian_eigenvalue.min(min_eig);
        if min_eig <= 0.0 {
            fail(&mut report, "positive_definite", format!("min eigenvalue {min_eig:.6e}"));
        }

        // Randers metrics additionally need ‖β‖_α < 1 for positivity.
        if let MetricKind::Randers { a, b } = &m.kind {
            let amat =
                SqMat::from_fn(m.dim, |i, j| a.entry(i, j).eval_f64(&p.x).unwrap_or(f64::NAN));
            if let Ok(ainv) = spd_inverse(&amat) {
                if let Ok(bv) = b.iter().map(|bi| bi.eval_f64(&p.x)).collect::<Result<Vec<_>, _>>()
                {
                    let norm_sq: f64 = (0..m.dim)
                        .flat_map(|i| (0..m.dim).map(move |j| (i, j)))
                        .map(|(i, j)| bv[i] * ainv[(i, j)] * bv[j])
                        .sum();
                    if norm_sq >= 1.0 {
                        fail(&mut report, "randers_norm", format!("‖β‖²_α = {norm_sq:.6} ≥ 1"));
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Builtin metric definitions; doubles as the `--catalog` content.
pub mod builtins {
    use super::*;

    fn expr_matrix(dim: usize, entries: &[&[&str]]) -> CoeffMatrix {
        let vars = VarSet::base_only(dim);
        let rows = entries
            .iter()
            .map(|row| row.iter().map(|s| mexpr::parse(s, &vars).expect("builtin expr")).collect())
            .collect();
        CoeffMatrix::new(rows).expect("builtin matrix")
    }

    /// `G = Σ (yⁱ)²`.
    pub fn euclidean(dim: usize) -> MetricSpec {
        MetricSpec::new(format!("euclidean_{dim}"), dim, MetricKind::Euclidean).unwrap()
    }

    /// Round 2-sphere in polar coordinates: `g = diag(1, sin²x¹)`,
    /// valid for `x¹ ∈ (0, π)`.
    pub fn sphere() -> MetricSpec {
        let g = expr_matrix(2, &[&["1", "0"], &["0", "sin(x1)^2"]]);
        MetricSpec::new("sphere", 2, MetricKind::Riemannian { g }).unwrap()
    }

    /// Randers metric with Euclidean α and a constant β of norm 1/2:
    /// locally Minkowski, hence Berwald but not Riemannian.
    pub fn randers_const() -> MetricSpec {
        let a = expr_matrix(2, &[&["1", "0"], &["0", "1"]]);
        let vars = VarSet::base_only(2);
        let b = vec![mexpr::parse("0.5", &vars).unwrap(), mexpr::parse("0", &vars).unwrap()];
        MetricSpec::new("randers_const", 2, MetricKind::Randers { a, b }).unwrap()
    }

    /// Randers metric with `b₂ = 0.3 sin x¹`: the 1-form is not parallel,
    /// so the metric is not (weakly) Berwald.
    pub fn randers_sin() -> MetricSpec {
        let a = expr_matrix(2, &[&["1", "0"], &["0", "1"]]);
        let vars = VarSet::base_only(2);
        let b = vec![mexpr::parse("0", &vars).unwrap(), mexpr::parse("0.3*sin(x1)", &vars).unwrap()];
        MetricSpec::new("randers_sin", 2, MetricKind::Randers { a, b }).unwrap()
    }

    /// Fourth-root metric `G = (Σ (yⁱ)⁴)^{1/2}`; x-independent, hence
    /// locally Minkowski and Berwald. Its Hessian degenerates on the
    /// coordinate axes, which random sampling avoids almost surely.
    pub fn mroot4(dim: usize) -> MetricSpec {
        MetricSpec::new(
            format!("mroot4_{dim}"),
            dim,
            MetricKind::MRoot { root: 4, coeffs: Vec::new() },
        )
        .unwrap()
    }

    /// Names and DSL expansions for documentation and `--catalog`.
    pub fn catalog() -> Vec<(&'static str, String)> {
        vec![
            ("euclidean(m)", "G = y1^2 + ... + ym^2".to_string()),
            ("sphere", "G = y1^2 + sin(x1)^2 * y2^2".to_string()),
            ("randers_const", "G = (sqrt(y1^2 + y2^2) + 0.5*y1)^2".to_string()),
            ("randers_sin", "G = (sqrt(y1^2 + y2^2) + 0.3*sin(x1)*y2)^2".to_string()),
            ("mroot4(m)", "G = (y1^4 + ... + ym^4)^(1/2)".to_string()),
        ]
    }
}
