//! Product functions `f(s, t)` and the Minkowskian product constructor.
//!
//! A product function must be 1-homogeneous, smooth on the open quadrant,
//! have nonvanishing partials there, and keep the discriminant
//! `Δ = f_K f_H − 2 f f_KH` away from zero. Those conditions are what the
//! closed-form block inverse and the whole block structure of the product
//! tensors rely on, so [`check_product_function`] verifies them numerically
//! before a product metric is assembled.
//!
//! All partial derivatives of `f` come from evaluating its expression in
//! `(s, t)` jets — for builtins too. One differentiation path, no hand-coded
//! derivative tables.

use serde::Serialize;
use thiserror::Error;

use crate::classify::{SampleError, SamplerConfig};
use crate::jets::{DerivSpec, Jet};
use crate::mexpr::{self, EvalError, Expr, ParseError, VarSet};
use crate::metrics::{self, MetricError, MetricKind, MetricSpec, ValidationReport};

#[derive(Debug, Error)]
pub enum ProductError {
    #[error("factor dimensions must be at least 1")]
    Dimension,
    #[error("product function failed its condition checks: {0:?}")]
    FunctionInvalid(Box<ConditionReport>),
    #[error("factor metric `{which}` failed validation")]
    FactorInvalid { which: String, report: Box<ValidationReport> },
    #[error("assembled product metric failed validation (positive definiteness is not implied by the function conditions)")]
    ProductInvalid { report: Box<ValidationReport> },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Sample(#[from] SampleError),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProductKind {
    /// `f = s + t` — the direct sum.
    Sum,
    /// `f = (s^p + t^p)^(1/p)`.
    PNorm(f64),
    /// `f = s + t + 2ε√(st)`, `|ε| < 1`.
    EpsSqrt(f64),
    /// Any 1-homogeneous expression in `s`, `t`.
    Custom(String),
}

/// A 1-homogeneous product function with derivative access through jets.
#[derive(Clone, Debug)]
pub struct ProductFunction {
    kind: ProductKind,
    expr: Expr,
}

/// First and second partials of `f` at a point, plus the discriminant.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FPartials {
    pub f: f64,
    pub f_k: f64,
    pub f_h: f64,
    pub f_kk: f64,
    pub f_kh: f64,
    pub f_hh: f64,
    pub delta: f64,
}

impl ProductFunction {
    pub fn sum() -> Self {
        Self::from_kind(ProductKind::Sum).expect("builtin")
    }

    pub fn p_norm(p: f64) -> Self {
        Self::from_kind(ProductKind::PNorm(p)).expect("builtin")
    }

    pub fn eps_sqrt(eps: f64) -> Self {
        Self::from_kind(ProductKind::EpsSqrt(eps)).expect("builtin")
    }

    pub fn custom(src: &str) -> Result<Self, ProductError> {
        Self::from_kind(ProductKind::Custom(src.to_string()))
    }

    pub fn from_kind(kind: ProductKind) -> Result<Self, ProductError> {
        let src = match &kind {
            ProductKind::Sum => "s + t".to_string(),
            ProductKind::PNorm(p) => format!("(s^{p} + t^{p})^(1/{p})"),
            ProductKind::EpsSqrt(eps) => format!("s + t + 2*{eps}*sqrt(s*t)"),
            ProductKind::Custom(src) => src.clone(),
        };
        let expr = mexpr::parse(&src, &VarSet::st())?;
        Ok(Self { kind, expr })
    }

    pub fn kind(&self) -> &ProductKind {
        &self.kind
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    /// The function as DSL text.
    pub fn dsl(&self) -> String {
        self.expr.print(&VarSet::st())
    }

    pub fn eval_value(&self, s: f64, t: f64) -> Result<f64, EvalError> {
        self.expr.eval_f64(&[s, t])
    }

    /// Jet of `f` in `(s, t)` to the requested total order (≤ 5 is the
    /// supported range for everything downstream).
    pub fn partials_jet(&self, s: f64, t: f64, order: usize) -> Result<Jet, ProductError> {
        let spec = DerivSpec::new(2, 2, 0, order).expect("st spec");
        let sj = Jet::variable(spec, spec.y_slot(0), s).expect("slot");
        let tj = Jet::variable(spec, spec.y_slot(1), t).expect("slot");
        Ok(self.expr.eval_jet(&[sj, tj])?)
    }

    /// Value, first and second partials, and `Δ = f_K f_H − 2 f f_KH`.
    pub fn partials(&self, s: f64, t: f64) -> Result<FPartials, ProductError> {
        let j = self.partials_jet(s, t, 2)?;
        let spec = j.spec();
        let (ss, ts) = (spec.y_slot(0), spec.y_slot(1));
        let f = j.value();
        let f_k = j.partial(&[ss]).expect("partial");
        let f_h = j.partial(&[ts]).expect("partial");
        let f_kk = j.partial(&[ss, ss]).expect("partial");
        let f_kh = j.partial(&[ss, ts]).expect("partial");
        let f_hh = j.partial(&[ts, ts]).expect("partial");
        Ok(FPartials { f, f_k, f_h, f_kk, f_kh, f_hh, delta: f_k * f_h - 2.0 * f * f_kh })
    }

    /// Compose `f` with jet-valued arguments (the factor norms `K`, `H`).
    pub fn eval_jet_st(&self, k: &Jet, h: &Jet) -> Result<Jet, EvalError> {
        self.expr.eval_jet(&[k.clone(), h.clone()])
    }
}

/// The Minkowskian product metric data: two factors and a product function.
/// Factor-1 coordinates occupy slots `0..m`, factor-2 slots `m..m+n`.
#[derive(Clone, Debug)]
pub struct ProductMetric {
    factor1: MetricSpec,
    factor2: MetricSpec,
    f: ProductFunction,
}

impl ProductMetric {
    pub fn new(factor1: MetricSpec, factor2: MetricSpec, f: ProductFunction) -> Self {
        Self { factor1, factor2, f }
    }

    pub fn factor1(&self) -> &MetricSpec {
        &self.factor1
    }

    pub fn factor2(&self) -> &MetricSpec {
        &self.factor2
    }

    pub fn f(&self) -> &ProductFunction {
        &self.f
    }

    pub fn m(&self) -> usize {
        self.factor1.dim
    }

    pub fn n(&self) -> usize {
        self.factor2.dim
    }

    pub fn dim(&self) -> usize {
        self.m() + self.n()
    }

    /// Index ranges of the two factors inside the product slot layout.
    pub fn split(&self) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        (0..self.m(), self.m()..self.dim())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionFailure {
    pub s: f64,
    pub t: f64,
    pub condition: String,
    pub detail: String,
}

/// Outcome of checking conditions (a)–(e) plus the Euler identities of a
/// product function on a grid of positive `(s, t)` samples.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub function: String,
    pub grid_points: usize,
    /// Max relative residual of `f(λs, λt) = λ f(s, t)`, λ ∈ {0.5, 2, 7}.
    pub homogeneity_max: f64,
    /// Max relative residual of `f_K K + f_H H = f`.
    pub euler_first_max: f64,
    /// Max normalized residual of `f_KK K + f_KH H = 0` and its mirror.
    pub euler_second_max: f64,
    /// Max normalized residual of `f_KH² = f_KK f_HH`.
    pub det_identity_max: f64,
    pub min_abs_fk: f64,
    pub min_abs_fh: f64,
    pub min_abs_delta: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    /// `f` along the rays s=0 / t=0 where the formula extends continuously.
    pub boundary_values: Vec<(f64, f64, f64)>,
    pub failures: Vec<ConditionFailure>,
    pub passed: bool,
}

const NONZERO_THRESHOLD: f64 = 1e-12;

/// Verify the product-function conditions at each grid point. Failures are
/// report content; the only errors are evaluation blowups.
pub fn check_product_function(
    f: &ProductFunction,
    grid: &[(f64, f64)],
    tol: f64,
) -> Result<ConditionReport, ProductError> {
    let mut report = ConditionReport {
        function: f.dsl(),
        grid_points: grid.len(),
        homogeneity_max: 0.0,
        euler_first_max: 0.0,
        euler_second_max: 0.0,
        det_identity_max: 0.0,
        min_abs_fk: f64::INFINITY,
        min_abs_fh: f64::INFINITY,
        min_abs_delta: f64::INFINITY,
        delta_min: f64::INFINITY,
        delta_max: f64::NEG_INFINITY,
        boundary_values: Vec::new(),
        failures: Vec::new(),
        passed: true,
    };
    let fail = |report: &mut ConditionReport, s: f64, t: f64, cond: &str, detail: String| {
        report.failures.push(ConditionFailure {
            s,
            t,
            condition: cond.to_string(),
            detail,
        });
        report.passed = false;
    };

    for &(s, t) in grid {
        assert!(s > 0.0 && t > 0.0, "grid must stay in the open quadrant");
        let p = f.partials(s, t)?;

        for &lambda in &[0.5f64, 2.0, 7.0] {
            let scaled = f.eval_value(lambda * s, lambda * t)?;
            let res = (scaled - lambda * p.f).abs() / (lambda * p.f).abs().max(1e-300);
            report.homogeneity_max = report.homogeneity_max.max(res);
            if res > tol {
                fail(&mut report, s, t, "homogeneity", format!("λ={lambda}: rel {res:.3e}"));
            }
        }

        let e1 = (p.f_k * s + p.f_h * t - p.f).abs() / p.f.abs().max(1e-300);
        report.euler_first_max = report.euler_first_max.max(e1);
        if e1 > tol {
            fail(&mut report, s, t, "euler_first", format!("rel {e1:.3e}"));
        }

        let scale2 = (p.f_kk * s).abs() + (p.f_kh * t).abs() + 1e-300;
        let e2a = (p.f_kk * s + p.f_kh * t).abs() / scale2.max(p.f / s.min(t));
        let scale2b = (p.f_kh * s).abs() + (p.f_hh * t).abs() + 1e-300;
        let e2b = (p.f_kh * s + p.f_hh * t).abs() / scale2b.max(p.f / s.min(t));
        report.euler_second_max = report.euler_second_max.max(e2a.max(e2b));
        if e2a > tol || e2b > tol {
            fail(&mut report, s, t, "euler_second", format!("rel {:.3e}", e2a.max(e2b)));
        }

        let det_scale = (p.f_kh * p.f_kh).abs().max((p.f_kk * p.f_hh).abs()).max(p.f * p.f / (s * t));
        let det = (p.f_kh * p.f_kh - p.f_kk * p.f_hh).abs() / det_scale;
        report.det_identity_max = report.det_identity_max.max(det);
        if det > tol {
            fail(&mut report, s, t, "det_identity", format!("rel {det:.3e}"));
        }

        report.min_abs_fk = report.min_abs_fk.min(p.f_k.abs());
        report.min_abs_fh = report.min_abs_fh.min(p.f_h.abs());
        report.min_abs_delta = report.min_abs_delta.min(p.delta.abs());
        report.delta_min = report.delta_min.min(p.delta);
        report.delta_max = report.delta_max.max(p.delta);
        if p.f_k.abs() <= NONZERO_THRESHOLD || p.f_h.abs() <= NONZERO_THRESHOLD {
            fail(&mut report, s, t, "partials_nonzero",
                format!("f_K={:.3e}, f_H={:.3e}", p.f_k, p.f_h));
        }
        if p.delta.abs() <= NONZERO_THRESHOLD {
            fail(&mut report, s, t, "delta_nonzero", format!("Δ={:.3e}", p.delta));
        }
    }

    // Condition (a) along the boundary rays, where the formula extends
    // continuously; points where evaluation fails are skipped, matching the
    // smoothness conditions which only cover the open quadrant.
    for &(s, t) in &[(0.7, 0.0), (2.5, 0.0), (0.0, 0.7), (0.0, 2.5), (0.0, 0.0)] {
        if let Ok(v) = f.eval_value(s, t) {
            report.boundary_values.push((s, t, v));
            let should_vanish = s == 0.0 && t == 0.0;
            if should_vanish && v.abs() > 1e-12 {
                fail(&mut report, s, t, "zero_only_at_origin", format!("f(0,0) = {v:.3e}"));
            }
            if !should_vanish && v <= 0.0 {
                fail(&mut report, s, t, "zero_only_at_origin", format!("f = {v:.3e} on a ray"));
            }
        }
    }

    Ok(report)
}

/// A small grid covering the open quadrant across two decades.
pub fn default_grid() -> Vec<(f64, f64)> {
    let pts = [0.1, 0.5, 1.0, 3.0, 9.0];
    let mut grid = Vec::with_capacity(25);
    for &s in &pts {
        for &t in &pts {
            grid.push((s, t));
        }
    }
    grid
}

/// Sampler used when (re)validating metrics during product construction.
fn construction_sampler(_dim: usize) -> SamplerConfig {
    SamplerConfig { count: 50, seed: 0x5EED, ..SamplerConfig::default() }
}

/// Assemble the Minkowskian product of two validated factor metrics.
///
/// The factor metrics and the product function are checked first; the
/// resulting product is then validated as a metric in its own right, since
/// positive definiteness of the product Hessian is not implied by the
/// function conditions alone.
pub fn minkowski_product(
    m1: MetricSpec,
    m2: MetricSpec,
    f: ProductFunction,
) -> Result<MetricSpec, ProductError> {
    if m1.dim == 0 || m2.dim == 0 {
        return Err(ProductError::Dimension);
    }
    let fr = check_product_function(&f, &default_grid(), 1e-10)?;
    if !fr.passed {
        return Err(ProductError::FunctionInvalid(Box::new(fr)));
    }
    for m in [&m1, &m2] {
        let r = metrics::validate(m, &construction_sampler(m.dim))?;
        if !r.passed {
            return Err(ProductError::FactorInvalid {
                which: m.name.clone(),
                report: Box::new(r),
            });
        }
    }
    let spec = minkowski_product_unchecked(m1, m2, f);
    let r = metrics::validate(&spec, &construction_sampler(spec.dim))?;
    if !r.passed {
        return Err(ProductError::ProductInvalid { report: Box::new(r) });
    }
    Ok(spec)
}

/// Product assembly without the validation passes; for callers that have
/// already run them (or deliberately build degenerate inputs in tests).
pub fn minkowski_product_unchecked(
    m1: MetricSpec,
    m2: MetricSpec,
    f: ProductFunction,
) -> MetricSpec {
    let dim = m1.dim + m2.dim;
    let name = format!("{} x {} via {}", m1.name, m2.name, f.dsl());
    let pm = ProductMetric::new(m1, m2, f);
    MetricSpec::new(name, dim, MetricKind::Product(Box::new(pm))).expect("dims checked")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{builtins, eval_g_value, SamplePoint};
    use approx::assert_relative_eq;

    #[test]
    fn sum_conditions_are_exact() {
        let f = ProductFunction::sum();
        let r = check_product_function(&f, &default_grid(), 1e-10).unwrap();
        assert!(r.passed, "{:?}", r.failures);
        assert_relative_eq!(r.delta_min, 1.0, epsilon = 1e-14);
        assert_relative_eq!(r.delta_max, 1.0, epsilon = 1e-14);
        assert!(r.homogeneity_max <= 1e-15);
    }

    #[test]
    fn p_norm_partials_at_3_4() {
        let f = ProductFunction::p_norm(2.0);
        let p = f.partials(3.0, 4.0).unwrap();
        assert_relative_eq!(p.f, 5.0, epsilon = 1e-12);
        // Δ = 3st/f² for the 2-norm.
        assert_relative_eq!(p.delta, 1.44, epsilon = 1e-12);
        let r = check_product_function(&f, &default_grid(), 1e-10).unwrap();
        assert!(r.passed, "{:?}", r.failures);
    }

    #[test]
    fn eps_sqrt_partials_at_3_4() {
        let f = ProductFunction::eps_sqrt(0.5);
        let p = f.partials(3.0, 4.0).unwrap();
        // Δ = 1 − ε² independent of the point.
        assert_relative_eq!(p.delta, 0.75, epsilon = 1e-12);
        assert_relative_eq!(p.f_kh, 0.5 / (2.0 * 12.0f64.sqrt()), epsilon = 1e-12);
        let r = check_product_function(&f, &default_grid(), 1e-10).unwrap();
        assert!(r.passed, "{:?}", r.failures);
    }

    #[test]
    fn non_homogeneous_function_fails() {
        let f = ProductFunction::custom("s + t + 1").unwrap();
        let r = check_product_function(&f, &default_grid(), 1e-10).unwrap();
        assert!(!r.passed);
        assert!(r.failures.iter().any(|c| c.condition == "homogeneity"));
    }

    #[test]
    fn sum_of_euclideans_equals_direct_euclidean() {
        let spec = minkowski_product(
            builtins::euclidean(1),
            builtins::euclidean(1),
            ProductFunction::sum(),
        )
        .unwrap();
        let direct = builtins::euclidean(2);
        for (x, y) in [
            (vec![0.1, -0.4], vec![1.0, 2.0]),
            (vec![0.0, 0.0], vec![-0.3, 0.9]),
            (vec![1.0, 1.0], vec![2.0, -0.1]),
        ] {
            let a = eval_g_value(&spec, &x, &y).unwrap();
            let b = eval_g_value(&direct, &x, &y).unwrap();
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn eps_sqrt_product_value_at_unit_factors() {
        let spec = minkowski_product(
            builtins::euclidean(2),
            builtins::euclidean(2),
            ProductFunction::eps_sqrt(0.5),
        )
        .unwrap();
        let g = eval_g_value(&spec, &[0.0; 4], &[1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_relative_eq!(g, 3.0, epsilon = 1e-14);
    }

    #[test]
    fn sphere_cross_euclidean_p_norm_value() {
        let spec = minkowski_product_unchecked(
            builtins::sphere(),
            builtins::euclidean(2),
            ProductFunction::p_norm(2.0),
        );
        // Sphere factor at x=(π/4, 0), y=(1, 1) has K = 1.5; Euclidean
        // factor at y=(3, 4) has H = 25.
        let x = vec![std::f64::consts::FRAC_PI_4, 0.0, 0.0, 0.0];
        let y = vec![1.0, 1.0, 3.0, 4.0];
        let g = eval_g_value(&spec, &x, &y).unwrap();
        assert_relative_eq!(g, (2.25f64 + 625.0).sqrt(), epsilon = 1e-12);
        assert_relative_eq!(g, 25.04496, epsilon = 1e-5);
    }

    #[test]
    fn product_rejects_vanishing_factor() {
        let spec = minkowski_product_unchecked(
            builtins::euclidean(1),
            builtins::euclidean(1),
            ProductFunction::sum(),
        );
        let err = eval_g_value(&spec, &[0.0, 0.0], &[0.0, 1.0]).unwrap_err();
        assert!(matches!(err, MetricError::FactorNormVanishes { which: "K", .. }));
    }

    #[test]
    fn euler_relations_on_seeded_samples() {
        // (2.4)–(2.5): jet-evaluated partials on 100 positive samples.
        let mut state = 0x12345678u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            0.05 + 10.0 * ((state >> 11) as f64 / (1u64 << 53) as f64)
        };
        for f in [
            ProductFunction::sum(),
            ProductFunction::p_norm(2.0),
            ProductFunction::p_norm(3.0),
            ProductFunction::eps_sqrt(0.5),
            ProductFunction::eps_sqrt(-0.3),
        ] {
            for _ in 0..100 {
                let (s, t) = (next(), next());
                let p = f.partials(s, t).unwrap();
                assert!(
                    (p.f_k * s + p.f_h * t - p.f).abs() <= 1e-10 * p.f.abs(),
                    "{} at ({s}, {t})",
                    f.dsl()
                );
                let scale = (p.f_kk * s).abs().max((p.f_kh * t).abs()).max(1e-3 * p.f / s.max(t));
                assert!((p.f_kk * s + p.f_kh * t).abs() <= 1e-10 * scale.max(1e-300) * 10.0);
                let dscale = (p.f_kh * p.f_kh).abs().max((p.f_kk * p.f_hh).abs()).max(1e-300);
                assert!((p.f_kh * p.f_kh - p.f_kk * p.f_hh).abs() <= 1e-8 * dscale.max(1e-12));
            }
        }
    }

    #[test]
    fn product_hessian_cross_block_structure() {
        // G_{ij'} = f_KH K_i H_{j'}, comparing the jet Hessian of the
        // product against separately evaluated factor gradients.
        use crate::jets::DerivSpec;
        use crate::metrics::{eval_g_jet, hessian_from_jet};
        let spec = minkowski_product_unchecked(
            builtins::sphere(),
            builtins::euclidean(2),
            ProductFunction::eps_sqrt(0.5),
        );
        let pm = spec.as_product().unwrap();
        let p = SamplePoint::new(
            vec![0.9, 0.2, 0.0, 0.0],
            vec![0.6, 0.8, 0.5, -0.7],
        )
        .unwrap();
        let deriv = DerivSpec::new(4, 4, 0, 2).unwrap();
        let g = eval_g_jet(&spec, &p, deriv).unwrap();
        let hess = hessian_from_jet(&g).unwrap();

        let p1 = p.project(0..2).unwrap();
        let p2 = p.project(2..4).unwrap();
        let d2 = DerivSpec::new(2, 2, 0, 1).unwrap();
        let kj = eval_g_jet(pm.factor1(), &p1, d2).unwrap();
        let hj = eval_g_jet(pm.factor2(), &p2, d2).unwrap();
        let fp = pm.f().partials(kj.value(), hj.value()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let ki = kj.partial(&[d2.y_slot(i)]).unwrap();
                let hjp = hj.partial(&[d2.y_slot(j)]).unwrap();
                let expected = fp.f_kh * ki * hjp;
                let got = hess[(i, 2 + j)];
                assert!(
                    (got - expected).abs() <= 1e-10 * expected.abs().max(1.0),
                    "cross block ({i},{j}): {got} vs {expected}"
                );
            }
        }
    }
}
