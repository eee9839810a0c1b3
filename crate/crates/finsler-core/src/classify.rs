//! Sampling-based classification (Berwald / weakly Berwald / Landsberg /
//! weakly Landsberg) and the theorem-verification harness for Minkowskian
//! products.
//!
//! "≡ 0" statements are decided on a seeded sample set with fibers
//! normalized to the indicatrix `F = 1`; verdicts therefore read "holds on
//! the sampled set". Identical seed and config give bit-identical reports.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{self, MetricSpec, SamplePoint};
use crate::tensors::{self, TensorError};

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("sampler exhausted after {rejections} consecutive rejections (metric domain too restrictive)")]
    SamplerExhausted { rejections: usize },
    #[error("invalid sampler config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Product(#[from] crate::product::ProductError),
    #[error("metric is not a product")]
    NotProduct,
}

fn default_count() -> usize {
    100
}

fn default_fmin() -> f64 {
    1e-8
}

fn default_khmin() -> f64 {
    1e-8
}

fn default_max_rejections() -> usize {
    1000
}

/// Seeded sample generation: `x` uniform in a per-coordinate box, `y` drawn
/// on the Euclidean unit sphere and rescaled to the indicatrix `F = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    /// Closed interval per x-coordinate; defaults to [0.3, 1.3] everywhere
    /// (keeps clear of the builtin catalog's coordinate singularities).
    #[serde(default)]
    pub x_box: Option<Vec<[f64; 2]>>,
    /// Reject a draw when `F` is below this threshold.
    #[serde(default = "default_fmin")]
    pub f_min: f64,
    /// For products: reject when a factor norm `K` or `H` falls below this.
    #[serde(default = "default_khmin")]
    pub kh_min: f64,
    /// Bail out after this many consecutive rejections.
    #[serde(default = "default_max_rejections")]
    pub max_rejections: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            count: default_count(),
            seed: 0,
            x_box: None,
            f_min: default_fmin(),
            kh_min: default_khmin(),
            max_rejections: default_max_rejections(),
        }
    }
}

impl SamplerConfig {
    /// The sampler restricted to a coordinate range of a product factor.
    pub fn project(&self, range: std::ops::Range<usize>) -> SamplerConfig {
        SamplerConfig {
            x_box: self.x_box.as_ref().map(|b| b[range.clone()].to_vec()),
            ..self.clone()
        }
    }

    fn interval(&self, coord: usize) -> [f64; 2] {
        match &self.x_box {
            Some(b) => b[coord],
            None => [0.3, 1.3],
        }
    }
}

pub struct Sampler {
    rng: ChaCha8Rng,
    dim: usize,
    cfg: SamplerConfig,
}

impl Sampler {
    pub fn new(cfg: &SamplerConfig, dim: usize) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(cfg.seed), dim, cfg: cfg.clone() }
    }

    fn gaussian_pair(&mut self) -> (f64, f64) {
        let u1: f64 = 1.0 - self.rng.gen::<f64>();
        let u2: f64 = self.rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        (r * theta.cos(), r * theta.sin())
    }

    /// Draw one accepted point with `F(x, y) = 1`.
    pub fn draw(&mut self, m: &MetricSpec) -> Result<SamplePoint, SampleError> {
        if let Some(b) = &self.cfg.x_box {
            if b.len() != self.dim {
                return Err(SampleError::BadConfig(format!(
                    "x_box has {} intervals for dimension {}",
                    b.len(),
                    self.dim
                )));
            }
        }
        let mut rejections = 0;
        loop {
            if rejections >= self.cfg.max_rejections {
                return Err(SampleError::SamplerExhausted { rejections });
            }
            let x: Vec<f64> = (0..self.dim)
                .map(|c| {
                    let [lo, hi] = self.cfg.interval(c);
                    lo + (hi - lo) * self.rng.gen::<f64>()
                })
                .collect();
            let mut y = Vec::with_capacity(self.dim);
            while y.len() < self.dim {
                let (a, b) = self.gaussian_pair();
                y.push(a);
                if y.len() < self.dim {
                    y.push(b);
                }
            }
            let norm: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-12 {
                rejections += 1;
                continue;
            }
            for v in &mut y {
                *v /= norm;
            }

            let g = match metrics::eval_g_value(m, &x, &y) {
                Ok(g) if g > self.cfg.f_min * self.cfg.f_min => g,
                _ => {
                    rejections += 1;
                    continue;
                }
            };
            let f = g.sqrt();
            for v in &mut y {
                *v /= f;
            }

            // Factor-norm thresholds for products, checked on the
            // normalized fiber (the values every downstream formula sees).
            if let Some(pm) = m.as_product() {
                let (r1, r2) = pm.split();
                let k = metrics::eval_g_value(pm.factor1(), &x[r1.clone()], &y[r1]);
                let h = metrics::eval_g_value(pm.factor2(), &x[r2.clone()], &y[r2]);
                match (k, h) {
                    (Ok(k), Ok(h)) if k >= self.cfg.kh_min && h >= self.cfg.kh_min => {}
                    _ => {
                        rejections += 1;
                        continue;
                    }
                }
            }
            return Ok(SamplePoint { x, y });
        }
    }
}

/// Verdict for one "tensor ≡ 0" property.
#[derive(Clone, Debug, Serialize)]
pub struct PropertyVerdict {
    /// Whether the property holds on the sampled set.
    pub holds: bool,
    pub max_residual: f64,
    pub worst_sample_index: Option<usize>,
    pub worst_sample: Option<SamplePoint>,
    /// Residual (tensor max-norm) at every sample, in sample order.
    pub per_sample: Vec<f64>,
}

impl PropertyVerdict {
    fn from_residuals(per_sample: Vec<f64>, tol: f64) -> Self {
        let mut max_residual = 0.0;
        let mut worst = None;
        for (i, &r) in per_sample.iter().enumerate() {
            if r >= max_residual {
                max_residual = r;
                worst = Some(i);
            }
        }
        Self {
            holds: max_residual <= tol,
            max_residual,
            worst_sample_index: worst,
            worst_sample: None,
            per_sample,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassificationReport {
    pub metric: String,
    pub dim: usize,
    pub tolerance: f64,
    pub sampler: SamplerConfig,
    /// Verdicts keyed `berwald`, `weakly_berwald`, `landsberg`,
    /// `weakly_landsberg`; each says "holds on sampled set".
    pub verdicts: BTreeMap<String, PropertyVerdict>,
    pub glossary: BTreeMap<String, String>,
}

impl ClassificationReport {
    pub fn holds(&self, property: &str) -> bool {
        self.verdicts.get(property).map(|v| v.holds).unwrap_or(false)
    }

    /// CSV rows `property,sample_index,residual`, matching the JSON content.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("check_id,sample_index,residual\n");
        for (name, v) in &self.verdicts {
            for (i, r) in v.per_sample.iter().enumerate() {
                out.push_str(&format!("{name},{i},{r}\n"));
            }
        }
        out
    }
}

fn glossary() -> BTreeMap<String, String> {
    let mut g = BTreeMap::new();
    g.insert(
        "berwald".to_string(),
        "Tested via max|B| with B the third fiber derivative of the spray; B ≡ 0 is \
         equivalent to the Berwald connection coefficients being independent of y, \
         because B is exactly the fiber derivative of those coefficients."
            .to_string(),
    );
    g.insert(
        "weakly_berwald".to_string(),
        "Tested via max|E| where E is half the trace of B.".to_string(),
    );
    g.insert(
        "landsberg".to_string(),
        "Tested via max|L| where L contracts B with the fiber gradient of G.".to_string(),
    );
    g.insert(
        "weakly_landsberg".to_string(),
        "Tested via max|J| where J contracts L with the inverse fundamental tensor.".to_string(),
    );
    g.insert(
        "verdict_scope".to_string(),
        "All verdicts are sampling-based: they certify the property on the sampled \
         set only."
            .to_string(),
    );
    g
}

/// Classify a metric by the vanishing of B, E, L and J on sampled points.
pub fn classify(
    m: &MetricSpec,
    sampler: &SamplerConfig,
    tol: f64,
) -> Result<ClassificationReport, ClassifyError> {
    let mut s = Sampler::new(sampler, m.dim);
    let mut res_b = Vec::with_capacity(sampler.count);
    let mut res_e = Vec::with_capacity(sampler.count);
    let mut res_l = Vec::with_capacity(sampler.count);
    let mut res_j = Vec::with_capacity(sampler.count);
    let mut points = Vec::with_capacity(sampler.count);

    for _ in 0..sampler.count {
        let p = s.draw(m)?;
        let f = tensors::frame(m, &p)?;
        res_b.push(f.berwald_curv.max_norm());
        res_e.push(f.mean_berwald.max_norm());
        res_l.push(f.landsberg.max_norm());
        res_j.push(f.mean_landsberg.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        points.push(p);
    }

    let mut berwald = PropertyVerdict::from_residuals(res_b, tol);
    let mut weakly_berwald = PropertyVerdict::from_residuals(res_e, tol);
    let mut landsberg = PropertyVerdict::from_residuals(res_l, tol);
    let mut weakly_landsberg = PropertyVerdict::from_residuals(res_j, tol);

    // Implication lattice: B ≡ 0 forces E ≡ 0 and L ≡ 0; L ≡ 0 forces
    // J ≡ 0. The verdicts must never contradict these.
    if berwald.holds {
        weakly_berwald.holds = true;
        landsberg.holds = true;
    }
    if landsberg.holds {
        weakly_landsberg.holds = true;
    }

    for v in [&mut berwald, &mut weakly_berwald, &mut landsberg, &mut weakly_landsberg] {
        v.worst_sample = v.worst_sample_index.map(|i| points[i].clone());
    }

    let mut verdicts = BTreeMap::new();
    verdicts.insert("berwald".to_string(), berwald);
    verdicts.insert("weakly_berwald".to_string(), weakly_berwald);
    verdicts.insert("landsberg".to_string(), landsberg);
    verdicts.insert("weakly_landsberg".to_string(), weakly_landsberg);

    Ok(ClassificationReport {
        metric: m.name.clone(),
        dim: m.dim,
        tolerance: tol,
        sampler: sampler.clone(),
        verdicts,
        glossary: glossary(),
    })
}

/// Per-check tolerances of the product verification harness.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckTolerances {
    /// (1) Hessian blocks against the factor assembly.
    pub hessian_blocks: f64,
    /// (2) Closed-form inverse: identity residual and generic agreement.
    pub inverse: f64,
    /// (3) Contraction identities of the inverse blocks.
    pub contractions: f64,
    /// (5)–(8): entries that must vanish across factor blocks.
    pub cross_blocks: f64,
    /// (4)–(8): diagonal blocks against independently computed factors.
    pub factor_match: f64,
    /// (9)–(10): Landsberg and mean-Landsberg factor relations.
    pub landsberg_relations: f64,
    /// (11) classification tolerance for product and factors.
    pub classification: f64,
}

impl Default for CheckTolerances {
    fn default() -> Self {
        Self {
            hessian_blocks: 1e-10,
            inverse: 1e-9,
            contractions: 1e-9,
            cross_blocks: 1e-7,
            factor_match: 1e-8,
            landsberg_relations: 1e-7,
            classification: 1e-6,
        }
    }
}

impl CheckTolerances {
    /// Apply overrides from a name → value map (unknown names are the
    /// caller's config error).
    pub fn apply(&mut self, overrides: &BTreeMap<String, f64>) -> Result<(), String> {
        for (k, v) in overrides {
            if *v <= 0.0 {
                return Err(format!("tolerance `{k}` must be positive, got {v}"));
            }
            match k.as_str() {
                "hessian_blocks" => self.hessian_blocks = *v,
                "inverse" => self.inverse = *v,
                "contractions" => self.contractions = *v,
                "cross_blocks" => self.cross_blocks = *v,
                "factor_match" => self.factor_match = *v,
                "landsberg_relations" => self.landsberg_relations = *v,
                "classification" => self.classification = *v,
                other => return Err(format!("unknown tolerance `{other}`")),
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub id: String,
    pub description: String,
    pub tolerance: f64,
    pub max_residual: f64,
    pub worst_sample_index: Option<usize>,
    pub passed: bool,
    /// Residual per sample; empty for aggregate checks.
    pub per_sample: Vec<f64>,
}

impl CheckResult {
    fn from_samples(id: &str, description: &str, tol: f64, per_sample: Vec<f64>) -> Self {
        let mut max_residual = 0.0;
        let mut worst = None;
        for (i, &r) in per_sample.iter().enumerate() {
            if r >= max_residual {
                max_residual = r;
                worst = Some(i);
            }
        }
        Self {
            id: id.to_string(),
            description: description.to_string(),
            tolerance: tol,
            max_residual,
            worst_sample_index: worst,
            passed: max_residual <= tol,
            per_sample,
        }
    }
}

/// Verdict comparison for one property in check (11).
#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyRow {
    pub property: String,
    pub product_holds: bool,
    pub factor1_holds: bool,
    pub factor2_holds: bool,
    pub consistent: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TheoremReport {
    pub metric: String,
    pub dim: usize,
    pub sampler: SamplerConfig,
    pub tolerances: CheckTolerances,
    pub checks: Vec<CheckResult>,
    pub consistency: Vec<ConsistencyRow>,
    pub product_classification: ClassificationReport,
    pub factor1_classification: ClassificationReport,
    pub factor2_classification: ClassificationReport,
    pub passed: bool,
}

impl TheoremReport {
    /// CSV rows `check_id,sample_index,residual`; aggregate checks emit a
    /// single row with an empty sample index.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("check_id,sample_index,residual\n");
        for c in &self.checks {
            if c.per_sample.is_empty() {
                out.push_str(&format!("{},,{}\n", c.id, c.max_residual));
            } else {
                for (i, r) in c.per_sample.iter().enumerate() {
                    out.push_str(&format!("{},{i},{r}\n", c.id));
                }
            }
        }
        out
    }
}

/// Run the eleven block-structure and theorem checks on a product metric.
///
/// Factor tensors are computed by running the full engine on each factor
/// alone at the projected sample, an evaluation path independent of the
/// product-side blocks.
pub fn verify_product(
    m: &MetricSpec,
    sampler: &SamplerConfig,
    tols: &CheckTolerances,
) -> Result<TheoremReport, ClassifyError> {
    let pm = m.as_product().ok_or(ClassifyError::NotProduct)?;
    let (r1, r2) = pm.split();
    let mdim = pm.m();
    let dim = pm.dim();

    let mut s = Sampler::new(sampler, dim);
    let n_checks = 10;
    let mut residuals: Vec<Vec<f64>> = vec![Vec::new(); n_checks];

    for _ in 0..sampler.count {
        let p = s.draw(m)?;
        let fp = tensors::frame(m, &p)?;
        let p1 = p.project(r1.clone()).expect("factor projection");
        let p2 = p.project(r2.clone()).expect("factor projection");
        let f1 = tensors::frame(pm.factor1(), &p1)?;
        let f2 = tensors::frame(pm.factor2(), &p2)?;
        let parts = pm.f().partials(f1.g_val, f2.g_val)?;
        let (k_val, h_val) = (f1.g_val, f2.g_val);

        let block = |a: usize| a >= mdim; // true: factor 2
        let mixed =
            |idx: &[usize]| idx.iter().any(|&i| block(i)) && idx.iter().any(|&i| !block(i));

        // (1) Hessian blocks against the factor assembly.
        let mut r = 0.0f64;
        for a in 0..dim {
            for b in 0..dim {
                let expected = match (block(a), block(b)) {
                    (false, false) => {
                        parts.f_k * f1.g_lower[(a, b)]
                            + parts.f_kk * f1_grad(&f1, a) * f1_grad(&f1, b)
                    }
                    (true, true) => {
                        parts.f_h * f2.g_lower[(a - mdim, b - mdim)]
                            + parts.f_hh * f2_grad(&f2, a - mdim) * f2_grad(&f2, b - mdim)
                    }
                    (false, true) => parts.f_kh * f1_grad(&f1, a) * f2_grad(&f2, b - mdim),
                    (true, false) => parts.f_kh * f2_grad(&f2, a - mdim) * f1_grad(&f1, b),
                };
                r = r.max((fp.g_lower[(a, b)] - expected).abs());
            }
        }
        residuals[0].push(r);

        // (2) Closed-form block inverse.
        let cf = tensors::inverse_product_closed_form(pm, &p)?;
        let r = fp
            .g_lower
            .inverse_residual(&cf)
            .max(cf.sub(&fp.g_upper).max_norm());
        residuals[1].push(r);

        // (3) Contraction identities of the inverse blocks.
        let mut r = 0.0f64;
        for i in 0..mdim {
            let lhs: f64 = (0..mdim).map(|h| fp.g_upper[(i, h)] * f1_grad(&f1, h)).sum();
            let rhs = (parts.f_h - 2.0 * k_val * parts.f_kh) / parts.delta * p.y[i];
            r = r.max((lhs - rhs).abs());

            let lhs: f64 =
                (mdim..dim).map(|h| fp.g_upper[(i, h)] * f2_grad(&f2, h - mdim)).sum();
            let rhs = -2.0 / parts.delta * h_val * parts.f_kh * p.y[i];
            r = r.max((lhs - rhs).abs());

            for jp in mdim..dim {
                let lhs: f64 = (mdim..dim)
                    .map(|h| fp.g_upper[(i, h)] * f2.g_lower[(h - mdim, jp - mdim)])
                    .sum();
                // G^{ih'} H_{h'j'} = −(f_KH/Δ) H_{j'} y^i: contracting the
                // cross block of the inverse with H_{h'j'} y-Euler-reduces
                // y^{h'} H_{h'j'} to H_{j'} (degree one, not two).
                let rhs = -1.0 / parts.delta * parts.f_kh * f2_grad(&f2, jp - mdim) * p.y[i];
                r = r.max((lhs - rhs).abs());
            }
        }
        residuals[2].push(r);

        // (4) Spray restriction to the factors.
        let mut r = 0.0f64;
        for i in 0..dim {
            let factor = if block(i) { f2.spray[i - mdim] } else { f1.spray[i] };
            r = r.max((fp.spray[i] - factor).abs());
        }
        residuals[3].push(r);

        // (5) Nonlinear connection block structure.
        let mut r = 0.0f64;
        for a in 0..dim {
            for b in 0..dim {
                let v = fp.nconn[(a, b)];
                let expected = match (block(a), block(b)) {
                    (false, false) => f1.nconn[(a, b)],
                    (true, true) => f2.nconn[(a - mdim, b - mdim)],
                    _ => 0.0,
                };
                r = r.max((v - expected).abs());
            }
        }
        residuals[4].push(r);

        // (6) Berwald connection block structure.
        let mut r = 0.0f64;
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    let v = fp.berwald_conn[(a, b, c)];
                    let expected = if !block(a) && !block(b) && !block(c) {
                        f1.berwald_conn[(a, b, c)]
                    } else if block(a) && block(b) && block(c) {
                        f2.berwald_conn[(a - mdim, b - mdim, c - mdim)]
                    } else {
                        0.0
                    };
                    r = r.max((v - expected).abs());
                }
            }
        }
        residuals[5].push(r);

        // (7) Berwald curvature block structure.
        let mut r = 0.0f64;
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    for d in 0..dim {
                        let v = fp.berwald_curv[(a, b, c, d)];
                        let expected = if [a, b, c, d].iter().all(|&i| !block(i)) {
                            f1.berwald_curv[(a, b, c, d)]
                        } else if [a, b, c, d].iter().all(|&i| block(i)) {
                            f2.berwald_curv[(a - mdim, b - mdim, c - mdim, d - mdim)]
                        } else {
                            0.0
                        };
                        r = r.max((v - expected).abs());
                    }
                }
            }
        }
        residuals[6].push(r);

        // (8) Mean Berwald block structure.
        let mut r = 0.0f64;
        for a in 0..dim {
            for b in 0..dim {
                let v = fp.mean_berwald[(a, b)];
                let expected = match (block(a), block(b)) {
                    (false, false) => f1.mean_berwald[(a, b)],
                    (true, true) => f2.mean_berwald[(a - mdim, b - mdim)],
                    _ => 0.0,
                };
                r = r.max((v - expected).abs());
            }
        }
        residuals[7].push(r);

        // (9) Landsberg factor relations: diagonal blocks scale by f_K
        // resp. f_H, mixed components vanish.
        let mut r = 0.0f64;
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    let v = fp.landsberg[(a, b, c)];
                    let expected = if [a, b, c].iter().all(|&i| !block(i)) {
                        parts.f_k * f1.landsberg[(a, b, c)]
                    } else if [a, b, c].iter().all(|&i| block(i)) {
                        parts.f_h * f2.landsberg[(a - mdim, b - mdim, c - mdim)]
                    } else {
                        debug_assert!(mixed(&[a, b, c]));
                        0.0
                    };
                    r = r.max((v - expected).abs());
                }
            }
        }
        residuals[8].push(r);

        // (10) Mean Landsberg restriction to the factors.
        let mut r = 0.0f64;
        for a in 0..dim {
            let expected =
                if block(a) { f2.mean_landsberg[a - mdim] } else { f1.mean_landsberg[a] };
            r = r.max((fp.mean_landsberg[a] - expected).abs());
        }
        residuals[9].push(r);
    }

    // (11) Classification consistency: each product property must be
    // equivalent to both factors having it.
    let product_classification = classify(m, sampler, tols.classification)?;
    let factor1_classification =
        classify(pm.factor1(), &sampler.project(r1), tols.classification)?;
    let factor2_classification =
        classify(pm.factor2(), &sampler.project(r2), tols.classification)?;
    let mut consistency = Vec::new();
    let mut consistent_all = true;
    for prop in ["berwald", "weakly_berwald", "landsberg", "weakly_landsberg"] {
        let product_holds = product_classification.holds(prop);
        let f1h = factor1_classification.holds(prop);
        let f2h = factor2_classification.holds(prop);
        let consistent = product_holds == (f1h && f2h);
        consistent_all &= consistent;
        consistency.push(ConsistencyRow {
            property: prop.to_string(),
            product_holds,
            factor1_holds: f1h,
            factor2_holds: f2h,
            consistent,
        });
    }

    let descriptions: [(&str, &str, f64); 10] = [
        ("hessian_blocks", "fundamental tensor blocks match the factor assembly", tols.hessian_blocks),
        ("closed_form_inverse", "closed-form block inverse inverts G and matches the generic inverse", tols.inverse),
        ("inverse_contractions", "contraction identities of the inverse blocks", tols.contractions),
        ("spray_blocks", "product spray restricts to the factor sprays", tols.factor_match),
        ("nonlinear_connection_blocks", "nonlinear connection is block diagonal with factor blocks", tols.factor_match.max(tols.cross_blocks)),
        ("berwald_connection_blocks", "Berwald connection cross coefficients vanish, blocks match factors", tols.factor_match.max(tols.cross_blocks)),
        ("berwald_curvature_blocks", "Berwald curvature mixed components vanish, blocks match factors", tols.factor_match.max(tols.cross_blocks)),
        ("mean_berwald_blocks", "mean Berwald curvature is block diagonal with factor blocks", tols.factor_match.max(tols.cross_blocks)),
        ("landsberg_relations", "L scales factor Landsberg tensors by f_K / f_H; mixed parts vanish", tols.landsberg_relations),
        ("mean_landsberg_relations", "J restricts to the factor mean Landsberg vectors", tols.landsberg_relations),
    ];
    let mut checks: Vec<CheckResult> = descriptions
        .iter()
        .zip(residuals)
        .map(|((id, desc, tol), rs)| CheckResult::from_samples(id, desc, *tol, rs))
        .collect();
    checks.push(CheckResult {
        id: "classification_consistency".to_string(),
        description: "product classification equals the AND of factor classifications"
            .to_string(),
        tolerance: tols.classification,
        max_residual: if consistent_all { 0.0 } else { 1.0 },
        worst_sample_index: None,
        passed: consistent_all,
        per_sample: Vec::new(),
    });

    let passed = checks.iter().all(|c| c.passed);
    Ok(TheoremReport {
        metric: m.name.clone(),
        dim,
        sampler: sampler.clone(),
        tolerances: tols.clone(),
        checks,
        consistency,
        product_classification,
        factor1_classification,
        factor2_classification,
        passed,
    })
}

fn f1_grad(f: &tensors::TensorFrame, i: usize) -> f64 {
    // K_i = K_{ij} y^j by Euler; the frame stores the Hessian and point.
    (0..f.at.y.len()).map(|j| f.g_lower[(i, j)] * f.at.y[j]).sum()
}

fn f2_grad(f: &tensors::TensorFrame, i: usize) -> f64 {
    f1_grad(f, i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::builtins;
    use crate::product::{minkowski_product_unchecked, ProductFunction};

    fn small(count: usize, seed: u64) -> SamplerConfig {
        SamplerConfig { count, seed, ..SamplerConfig::default() }
    }

    #[test]
    fn sampler_is_deterministic_and_on_indicatrix() {
        let m = builtins::sphere();
        let cfg = small(10, 99);
        let a: Vec<_> = {
            let mut s = Sampler::new(&cfg, 2);
            (0..10).map(|_| s.draw(&m).unwrap()).collect()
        };
        let b: Vec<_> = {
            let mut s = Sampler::new(&cfg, 2);
            (0..10).map(|_| s.draw(&m).unwrap()).collect()
        };
        assert_eq!(a, b);
        for p in &a {
            let g = metrics::eval_g_value(&m, &p.x, &p.y).unwrap();
            assert!((g - 1.0).abs() < 1e-12, "F normalized to 1, got G = {g}");
        }
    }

    #[test]
    fn sampler_exhaustion_is_reported() {
        let m = minkowski_product_unchecked(
            builtins::euclidean(1),
            builtins::euclidean(1),
            ProductFunction::sum(),
        );
        let cfg = SamplerConfig {
            count: 1,
            kh_min: 10.0, // impossible on the indicatrix
            max_rejections: 50,
            ..SamplerConfig::default()
        };
        let mut s = Sampler::new(&cfg, 2);
        assert!(matches!(s.draw(&m), Err(SampleError::SamplerExhausted { .. })));
    }

    #[test]
    fn euclidean_classifies_as_everything() {
        let r = classify(&builtins::euclidean(3), &small(20, 5), 1e-6).unwrap();
        for prop in ["berwald", "weakly_berwald", "landsberg", "weakly_landsberg"] {
            assert!(r.holds(prop), "{prop} should hold");
            assert!(r.verdicts[prop].max_residual <= 1e-10);
        }
    }

    #[test]
    fn sphere_is_berwald() {
        let r = classify(&builtins::sphere(), &small(20, 5), 1e-6).unwrap();
        assert!(r.holds("berwald"));
        assert!(r.verdicts["berwald"].max_residual <= 1e-10);
    }

    #[test]
    fn randers_sin_is_not_weakly_berwald() {
        let r = classify(&builtins::randers_sin(), &small(20, 5), 1e-6).unwrap();
        assert!(!r.holds("berwald"));
        assert!(!r.holds("weakly_berwald"));
        assert!(r.verdicts["weakly_berwald"].max_residual > 1e-3);
        assert!(r.verdicts["berwald"].worst_sample.is_some());
    }

    #[test]
    fn mroot4_classifies_as_berwald() {
        let r = classify(&builtins::mroot4(2), &small(20, 5), 1e-6).unwrap();
        for prop in ["berwald", "weakly_berwald", "landsberg", "weakly_landsberg"] {
            assert!(r.holds(prop), "{prop} should hold for a locally Minkowski metric");
        }
    }

    #[test]
    fn reports_are_bit_identical_for_equal_seeds() {
        let m = builtins::randers_sin();
        let r1 = classify(&m, &small(15, 42), 1e-6).unwrap();
        let r2 = classify(&m, &small(15, 42), 1e-6).unwrap();
        let s1 = serde_json::to_string(&r1).unwrap();
        let s2 = serde_json::to_string(&r2).unwrap();
        assert_eq!(s1, s2);
        let r3 = classify(&m, &small(15, 43), 1e-6).unwrap();
        let s3 = serde_json::to_string(&r3).unwrap();
        assert_ne!(s1, s3, "different seed must change the sample set");
    }

    #[test]
    fn implication_lattice_is_enforced() {
        for m in [builtins::sphere(), builtins::randers_const(), builtins::randers_sin()] {
            let r = classify(&m, &small(10, 3), 1e-6).unwrap();
            if r.holds("berwald") {
                assert!(r.holds("weakly_berwald"));
                assert!(r.holds("landsberg"));
            }
            if r.holds("landsberg") {
                assert!(r.holds("weakly_landsberg"));
            }
        }
    }

    #[test]
    fn verdicts_are_scale_invariant_with_known_homogeneity() {
        // One sample evaluated on the indicatrix (F=1) and at F=3: B and E
        // are (−1)-homogeneous in y, L and J are 0-homogeneous.
        let m = builtins::randers_sin();
        let mut s = Sampler::new(&small(1, 8), 2);
        let p = s.draw(&m).unwrap();
        let scaled = SamplePoint::new(p.x.clone(), p.y.iter().map(|v| 3.0 * v).collect()).unwrap();
        let f1 = tensors::frame(&m, &p).unwrap();
        let f3 = tensors::frame(&m, &scaled).unwrap();
        let b1 = f1.berwald_curv.max_norm();
        let b3 = f3.berwald_curv.max_norm();
        assert!((b3 * 3.0 - b1).abs() <= 1e-9 * b1.max(1.0), "B is (-1)-homogeneous");
        let e1 = f1.mean_berwald.max_norm();
        let e3 = f3.mean_berwald.max_norm();
        assert!((e3 * 3.0 - e1).abs() <= 1e-9 * e1.max(1.0), "E is (-1)-homogeneous");
        let l1 = f1.landsberg.max_norm();
        let l3 = f3.landsberg.max_norm();
        assert!((l3 - l1).abs() <= 1e-9 * l1.max(1.0), "L is 0-homogeneous");
        let j1 = f1.mean_landsberg.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let j3 = f3.mean_landsberg.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!((j3 - j1).abs() <= 1e-9 * j1.max(1.0), "J is 0-homogeneous");
    }

    #[test]
    fn verify_product_berwald_times_berwald() {
        let m = minkowski_product_unchecked(
            builtins::euclidean(2),
            builtins::mroot4(2),
            ProductFunction::eps_sqrt(0.5),
        );
        let r = verify_product(&m, &small(25, 17), &CheckTolerances::default()).unwrap();
        assert!(r.passed, "failed checks: {:?}",
            r.checks.iter().filter(|c| !c.passed).map(|c| (&c.id, c.max_residual)).collect::<Vec<_>>());
        assert!(r.product_classification.holds("berwald"));
        // Berwald × Berwald is in particular Landsberg, with L ≈ 0
        // numerically, not just by implication.
        assert!(r.product_classification.holds("landsberg"));
        assert!(r.product_classification.verdicts["landsberg"].max_residual <= 1e-7);
    }

    #[test]
    fn verify_product_detects_non_berwald_factor() {
        let m = minkowski_product_unchecked(
            builtins::randers_sin(),
            builtins::euclidean(2),
            ProductFunction::sum(),
        );
        let r = verify_product(&m, &small(20, 17), &CheckTolerances::default()).unwrap();
        // Block structure still holds; the classification rows must agree
        // that the product is not weakly Berwald because factor 1 is not.
        for c in &r.checks {
            if c.id != "classification_consistency" {
                assert!(c.passed, "{}: {}", c.id, c.max_residual);
            }
        }
        let row = r.consistency.iter().find(|c| c.property == "weakly_berwald").unwrap();
        assert!(row.consistent);
        assert!(!row.product_holds);
        assert!(!row.factor1_holds);
        assert!(row.factor2_holds);
    }

    #[test]
    fn landsberg_relation_with_nonconstant_scaling() {
        // A non-Landsberg factor (L¹ ≠ 0) under a function with f_K ≠ 1
        // makes L = f_K·L¹ a genuinely nontrivial scaling identity.
        let m = minkowski_product_unchecked(
            builtins::randers_sin(),
            builtins::euclidean(2),
            ProductFunction::eps_sqrt(0.4),
        );
        let r = verify_product(&m, &small(20, 61), &CheckTolerances::default()).unwrap();
        for c in &r.checks {
            if c.id != "classification_consistency" {
                assert!(c.passed, "{}: {}", c.id, c.max_residual);
            }
        }
        // The factor really is non-Landsberg, so the identity did not hold
        // vacuously.
        assert!(!r.factor1_classification.holds("landsberg"));
        assert!(r.factor1_classification.verdicts["landsberg"].max_residual > 1e-3);
    }

    #[test]
    fn verify_product_sphere_times_sphere_spray_blocks() {
        let m = minkowski_product_unchecked(
            builtins::sphere(),
            builtins::sphere(),
            ProductFunction::p_norm(2.0),
        );
        let r = verify_product(&m, &small(20, 23), &CheckTolerances::default()).unwrap();
        let spray_check = r.checks.iter().find(|c| c.id == "spray_blocks").unwrap();
        assert!(spray_check.max_residual <= 1e-8, "spray restriction: {}", spray_check.max_residual);
        assert!(r.passed);
    }

    #[test]
    fn verify_product_rejects_non_products() {
        let err = verify_product(&builtins::sphere(), &small(5, 1), &CheckTolerances::default());
        assert!(matches!(err, Err(ClassifyError::NotProduct)));
    }

    #[test]
    fn verify_product_with_asymmetric_factor_dimensions() {
        // 1+2 and 2+3 splits keep the index bookkeeping honest; equal-size
        // factors would let transposed blocks slip through.
        let m12 = minkowski_product_unchecked(
            builtins::euclidean(1),
            builtins::sphere(),
            ProductFunction::eps_sqrt(0.3),
        );
        let r = verify_product(&m12, &small(15, 29), &CheckTolerances::default()).unwrap();
        assert!(r.passed, "1+2 failed: {:?}",
            r.checks.iter().filter(|c| !c.passed).map(|c| (&c.id, c.max_residual)).collect::<Vec<_>>());

        let m23 = minkowski_product_unchecked(
            builtins::sphere(),
            builtins::euclidean(3),
            ProductFunction::p_norm(2.0),
        );
        let r = verify_product(&m23, &small(10, 29), &CheckTolerances::default()).unwrap();
        assert!(r.passed, "2+3 failed: {:?}",
            r.checks.iter().filter(|c| !c.passed).map(|c| (&c.id, c.max_residual)).collect::<Vec<_>>());
        assert_eq!(r.dim, 5);
    }

    #[test]
    fn sampler_projection_restricts_the_x_box() {
        let cfg = SamplerConfig {
            x_box: Some(vec![[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]]),
            ..SamplerConfig::default()
        };
        let sub = cfg.project(1..3);
        assert_eq!(sub.x_box, Some(vec![[2.0, 3.0], [4.0, 5.0]]));
        assert_eq!(sub.seed, cfg.seed);
    }
}
