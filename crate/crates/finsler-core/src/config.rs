//! JSON configuration schema: metric definitions, sampler settings and
//! tolerances, with compilation into runtime metric specs.
//!
//! Unknown keys are rejected everywhere so a typo in a config fails loudly
//! instead of silently running with defaults.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::SamplerConfig;
use crate::mexpr::{self, ParseError, VarSet};
use crate::metrics::{CoeffMatrix, MetricError, MetricKind, MetricSpec, Reversibility};
use crate::product::{ProductFunction, ProductKind, ProductMetric};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("in `{context}`: {source}")]
    Expr {
        context: String,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{0}")]
    Invalid(String),
}

/// Serialized form of a metric. Expressions are strings in the DSL; the
/// variables in scope depend on the field (`x1..xm` for coefficient
/// functions, `x1..xm, y1..ym` for custom metric squares, `s, t` for
/// product functions).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricConfig {
    Euclidean {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    Riemannian {
        dim: usize,
        g: Vec<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    Randers {
        dim: usize,
        a: Vec<Vec<String>>,
        b: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    MRoot {
        dim: usize,
        root: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coeffs: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    Custom {
        dim: usize,
        g: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    Product {
        f: ProductFunctionConfig,
        factor1: Box<MetricConfig>,
        factor2: Box<MetricConfig>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProductFunctionConfig {
    Sum,
    PNorm { p: f64 },
    EpsSqrt { eps: f64 },
    Custom { expr: String },
}

impl ProductFunctionConfig {
    pub fn compile(&self) -> Result<ProductFunction, ConfigError> {
        let kind = match self {
            Self::Sum => ProductKind::Sum,
            Self::PNorm { p } => ProductKind::PNorm(*p),
            Self::EpsSqrt { eps } => ProductKind::EpsSqrt(*eps),
            Self::Custom { expr } => ProductKind::Custom(expr.clone()),
        };
        ProductFunction::from_kind(kind).map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

fn parse_matrix(
    raw: &[Vec<String>],
    dim: usize,
    what: &str,
) -> Result<CoeffMatrix, ConfigError> {
    if raw.len() != dim || raw.iter().any(|r| r.len() != dim) {
        return Err(ConfigError::Invalid(format!("`{what}` must be a {dim}x{dim} matrix")));
    }
    let vars = VarSet::base_only(dim);
    let mut rows = Vec::with_capacity(dim);
    for (i, row) in raw.iter().enumerate() {
        let mut out = Vec::with_capacity(dim);
        for (j, src) in row.iter().enumerate() {
            out.push(mexpr::parse(src, &vars).map_err(|source| ConfigError::Expr {
                context: format!("{what}[{i}][{j}] = `{src}`"),
                source,
            })?);
        }
        rows.push(out);
    }
    Ok(CoeffMatrix::new(rows)?)
}

impl MetricConfig {
    pub fn dim(&self) -> usize {
        match self {
            Self::Euclidean { dim, .. }
            | Self::Riemannian { dim, .. }
            | Self::Randers { dim, .. }
            | Self::MRoot { dim, .. }
            | Self::Custom { dim, .. } => *dim,
            Self::Product { factor1, factor2, .. } => factor1.dim() + factor2.dim(),
        }
    }

    fn default_name(&self) -> String {
        match self {
            Self::Euclidean { dim, .. } => format!("euclidean_{dim}"),
            Self::Riemannian { dim, .. } => format!("riemannian_{dim}"),
            Self::Randers { dim, .. } => format!("randers_{dim}"),
            Self::MRoot { dim, root, .. } => format!("mroot{root}_{dim}"),
            Self::Custom { dim, .. } => format!("custom_{dim}"),
            Self::Product { factor1, factor2, .. } => {
                format!("{} x {}", factor1.default_name(), factor2.default_name())
            }
        }
    }

    /// Parse all expressions and build the runtime metric.
    pub fn compile(&self) -> Result<MetricSpec, ConfigError> {
        let name = match self {
            Self::Euclidean { name, .. }
            | Self::Riemannian { name, .. }
            | Self::Randers { name, .. }
            | Self::MRoot { name, .. }
            | Self::Custom { name, .. }
            | Self::Product { name, .. } => {
                name.clone().unwrap_or_else(|| self.default_name())
            }
        };
        let dim = self.dim();
        let kind = match self {
            Self::Euclidean { .. } => MetricKind::Euclidean,
            Self::Riemannian { g, .. } => {
                MetricKind::Riemannian { g: parse_matrix(g, dim, "g")? }
            }
            Self::Randers { a, b, .. } => {
                if b.len() != dim {
                    return Err(ConfigError::Invalid(format!(
                        "`b` must have {dim} entries"
                    )));
                }
                let vars = VarSet::base_only(dim);
                let b_exprs = b
                    .iter()
                    .enumerate()
                    .map(|(i, src)| {
                        mexpr::parse(src, &vars).map_err(|source| ConfigError::Expr {
                            context: format!("b[{i}] = `{src}`"),
                            source,
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                MetricKind::Randers { a: parse_matrix(a, dim, "a")?, b: b_exprs }
            }
            Self::MRoot { root, coeffs, .. } => MetricKind::MRoot {
                root: *root,
                coeffs: coeffs.clone().unwrap_or_default(),
            },
            Self::Custom { g, .. } => {
                let vars = VarSet::tangent(dim);
                let expr = mexpr::parse(g, &vars).map_err(|source| ConfigError::Expr {
                    context: format!("g = `{g}`"),
                    source,
                })?;
                MetricKind::Custom { g: expr }
            }
            Self::Product { f, factor1, factor2, .. } => {
                let m1 = factor1.compile()?;
                let m2 = factor2.compile()?;
                let pf = f.compile()?;
                MetricKind::Product(Box::new(ProductMetric::new(m1, m2, pf)))
            }
        };
        Ok(MetricSpec::new(name, dim, kind)?)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub format: OutputFormat,
    /// Report destination; stdout when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

/// One experiment bundle: a metric, how to sample it, which tolerances to
/// apply and where results go.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub metric: MetricConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    /// Check-name → tolerance overrides; all values must be positive.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub reversibility: Reversibility,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        for (k, v) in &cfg.tolerances {
            if v.is_nan() || *v <= 0.0 {
                return Err(ConfigError::Invalid(format!(
                    "tolerance `{k}` must be positive, got {v}"
                )));
            }
        }
        if cfg.sampler.count == 0 {
            return Err(ConfigError::Invalid("sampler.count must be at least 1".into()));
        }
        if let Some(bx) = &cfg.sampler.x_box {
            if bx.len() != cfg.metric.dim() {
                return Err(ConfigError::Invalid(format!(
                    "sampler.x_box must have {} intervals",
                    cfg.metric.dim()
                )));
            }
            if bx.iter().any(|[lo, hi]| lo.is_nan() || hi.is_nan() || lo > hi) {
                return Err(ConfigError::Invalid("sampler.x_box intervals must be nonempty".into()));
            }
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::eval_g_value;

    #[test]
    fn product_fragment_round_trips() {
        let text = r#"{
            "metric": {
                "kind": "product",
                "f": {"kind": "eps_sqrt", "eps": 0.5},
                "factor1": {"kind": "euclidean", "dim": 2},
                "factor2": {"kind": "m_root", "dim": 2, "root": 4}
            },
            "sampler": {"count": 10, "seed": 3}
        }"#;
        let cfg = RunConfig::from_json(text).unwrap();
        let m = cfg.metric.compile().unwrap();
        assert_eq!(m.dim, 4);
        assert!(m.as_product().is_some());
        let g = eval_g_value(&m, &[0.0; 4], &[1.0, 0.0, 1.0, 1.0]).unwrap();
        // K = 1, H = 2^(1/2): f = K + H + 2·0.5·sqrt(K·H).
        let h = 2.0f64.sqrt();
        assert!((g - (1.0 + h + h.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{
            "metric": {"kind": "euclidean", "dim": 2, "extra": 1}
        }"#;
        assert!(RunConfig::from_json(text).is_err());
        let text = r#"{
            "metric": {"kind": "euclidean", "dim": 2},
            "bogus": true
        }"#;
        assert!(RunConfig::from_json(text).is_err());
    }

    #[test]
    fn nonpositive_tolerances_are_rejected() {
        let text = r#"{
            "metric": {"kind": "euclidean", "dim": 2},
            "tolerances": {"classification": 0.0}
        }"#;
        assert!(matches!(RunConfig::from_json(text), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn bad_expression_reports_context() {
        let text = r#"{
            "metric": {"kind": "riemannian", "dim": 1, "g": [["sin(x1"]]}
        }"#;
        let cfg = RunConfig::from_json(text).unwrap();
        let err = cfg.metric.compile().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("g[0][0]"), "{msg}");
    }

    #[test]
    fn riemannian_sphere_config_compiles() {
        let text = r#"{
            "metric": {
                "kind": "riemannian",
                "dim": 2,
                "g": [["1", "0"], ["0", "sin(x1)^2"]],
                "name": "sphere"
            }
        }"#;
        let cfg = RunConfig::from_json(text).unwrap();
        let m = cfg.metric.compile().unwrap();
        assert_eq!(m.name, "sphere");
        let g = eval_g_value(&m, &[std::f64::consts::FRAC_PI_2, 0.0], &[3.0, 4.0]).unwrap();
        assert!((g - 25.0).abs() < 1e-12);
    }
}
