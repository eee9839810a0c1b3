//! The tensor engine: fundamental tensor, spray, connections and curvatures
//! of a Finsler metric at a sample point.
//!
//! Everything reduces to one jet of `G = F²` carried to x-order 1 and
//! y-order 5, which is exactly what the deepest consumer needs: the Berwald
//! curvature is the third fiber derivative of the spray, and the spray
//! already contains `G^{αβ}` and first x-derivatives. The spray assembly —
//! including the matrix inverse — runs in jet arithmetic over y, so the
//! spray's fiber derivatives are exact at truncation order instead of
//! finite-difference estimates:
//!
//! * `𝔾^α = ½ G^{αβ}(G_{β;γ} y^γ − G_{;β})`, inverse via Newton iteration
//!   on the jet-valued Hessian;
//! * `Γ^α_β`, `Γ̌^α_{β;γ}`, `B^α_{βγη}` are its first/second/third fiber
//!   derivatives;
//! * `E`, `L`, `J` are contractions of `B` with `G` and `G⁻¹`;
//! * Cartan coefficients use `δ_γ = ∂_γ − Γ^α_γ ∂̇_α` on the Hessian.

pub mod linalg;

use thiserror::Error;

use crate::jets::{DerivSpec, Jet};
use crate::metrics::{self, MetricError, MetricSpec, SamplePoint};
use crate::product::ProductMetric;
use linalg::{spd_inverse, JetMat, SingularMatrix, SqMat, Tensor3, Tensor4};

#[derive(Debug, Error)]
pub enum TensorError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("fundamental tensor is degenerate: {0}")]
    Singular(#[from] SingularMatrix),
    #[error("product discriminant too small: Δ = {delta:.3e} (condition (e) violated at the sample)")]
    DeltaNearZero { delta: f64 },
    #[error("operation requires a product metric")]
    NotProduct,
    #[error(transparent)]
    Product(#[from] crate::product::ProductError),
}

/// Every tensor the engine produces at one point `(x, y)`.
#[derive(Clone, Debug)]
pub struct TensorFrame {
    pub at: SamplePoint,
    pub g_val: f64,
    /// `G_{αβ}`, the fiber Hessian of `G`.
    pub g_lower: SqMat,
    /// `G^{αβ}` with `G^{αβ}G_{βγ} = δ^α_γ`.
    pub g_upper: SqMat,
    /// Spray coefficients `𝔾^α`.
    pub spray: Vec<f64>,
    /// Nonlinear connection `Γ^α_β = ∂̇_β 𝔾^α`.
    pub nconn: SqMat,
    /// Cartan horizontal coefficients `Γ^α_{β;γ}`, indexed `[α][β][γ]`.
    pub cartan_h: Tensor3,
    /// Cartan vertical coefficients `Γ^α_{βγ}` (the Cartan tensor with one
    /// index raised), symmetric in the lower pair.
    pub cartan_v: Tensor3,
    /// Berwald connection `Γ̌^α_{β;γ} = ∂̇_β Γ^α_γ`, indexed `[α][β][γ]`.
    pub berwald_conn: Tensor3,
    /// Berwald curvature `B^α_{βγη} = ∂³𝔾^α/∂y^β∂y^γ∂y^η`.
    pub berwald_curv: Tensor4,
    /// Mean Berwald curvature `E_{βγ} = ½ B^α_{βγα}`.
    pub mean_berwald: SqMat,
    /// Landsberg curvature `L_{βγη} = −¼ y^ν G_{να} B^α_{βγη}`.
    pub landsberg: Tensor3,
    /// Mean Landsberg curvature `J_α = 2 G^{βγ} L_{αβγ}`.
    pub mean_landsberg: Vec<f64>,
}

/// Compute the full frame at `p`. This is the one pipeline every public
/// tensor operation shares.
pub fn frame(m: &MetricSpec, p: &SamplePoint) -> Result<TensorFrame, TensorError> {
    let dim = m.dim;
    let g_full = metrics::eval_g_jet(m, p, DerivSpec::tangent(dim))?;
    let full = g_full.spec();
    let g_val = g_full.value();

    let g_lower = metrics::hessian_from_jet(&g_full)?;
    let g_upper = spd_inverse(&g_lower)?;

    // Spray assembly in fiber jets of order 3.
    let sy = DerivSpec::new(dim, dim, 0, 3).expect("spray spec");
    let gl_jets = JetMat::from_fn(dim, |a, b| {
        g_full
            .deriv(full.y_slot(a))
            .and_then(|j| j.deriv(full.y_slot(b)))
            .and_then(|j| j.truncate(sy))
            .expect("hessian jets within bounds")
    });
    let gu_jets = gl_jets.inverse_from(&g_upper);

    let y_jets: Vec<Jet> = (0..dim)
        .map(|c| Jet::variable(sy, sy.y_slot(c), p.y[c]).expect("slot"))
        .collect();
    let rhs: Vec<Jet> = (0..dim)
        .map(|b| {
            let g_b = g_full.deriv(full.y_slot(b)).expect("y deriv");
            let mut acc: Option<Jet> = None;
            for (c, y_c) in y_jets.iter().enumerate() {
                let g_bc = g_b
                    .deriv(full.x_slot(c))
                    .and_then(|j| j.truncate(sy))
                    .expect("x deriv");
                let term = &g_bc * y_c;
                acc = Some(match acc {
                    None => term,
                    Some(a) => &a + &term,
                });
            }
            let g_x = g_full
                .deriv(full.x_slot(b))
                .and_then(|j| j.truncate(sy))
                .expect("x deriv");
            &acc.expect("dim >= 1") - &g_x
        })
        .collect();

    let spray_jets: Vec<Jet> = (0..dim)
        .map(|a| {
            let mut acc: Option<Jet> = None;
            for (b, rhs_b) in rhs.iter().enumerate() {
                let term = gu_jets.at(a, b) * rhs_b;
                acc = Some(match acc {
                    None => term,
                    Some(s) => &s + &term,
                });
            }
            acc.expect("dim >= 1").scale(0.5)
        })
        .collect();

    let spray: Vec<f64> = spray_jets.iter().map(Jet::value).collect();
    let nconn = SqMat::from_fn(dim, |a, b| {
        spray_jets[a].partial(&[sy.y_slot(b)]).expect("order 1")
    });
    let berwald_conn = Tensor3::from_fn(dim, |a, b, c| {
        spray_jets[a].partial(&[sy.y_slot(b), sy.y_slot(c)]).expect("order 2")
    });
    let berwald_curv = Tensor4::from_fn(dim, |a, b, c, d| {
        spray_jets[a]
            .partial(&[sy.y_slot(b), sy.y_slot(c), sy.y_slot(d)])
            .expect("order 3")
    });

    let mean_berwald = SqMat::from_fn(dim, |b, c| {
        0.5 * (0..dim).map(|a| berwald_curv[(a, b, c, a)]).sum::<f64>()
    });

    // y^ν G_{να} — by Euler this equals the fiber gradient G_α.
    let y_g: Vec<f64> = (0..dim)
        .map(|a| (0..dim).map(|nu| p.y[nu] * g_lower[(nu, a)]).sum())
        .collect();
    let landsberg = Tensor3::from_fn(dim, |b, c, e| {
        -0.25 * (0..dim).map(|a| y_g[a] * berwald_curv[(a, b, c, e)]).sum::<f64>()
    });
    let mean_landsberg: Vec<f64> = (0..dim)
        .map(|a| {
            2.0 * (0..dim)
                .flat_map(|b| (0..dim).map(move |c| (b, c)))
                .map(|(b, c)| g_upper[(b, c)] * landsberg[(a, b, c)])
                .sum::<f64>()
        })
        .collect();

    // Cartan coefficients from scalar partials of the G-jet.
    let mut d3y = Tensor3::zeros(dim);
    for a in 0..dim {
        for b in a..dim {
            for c in b..dim {
                let v = g_full
                    .partial(&[full.y_slot(a), full.y_slot(b), full.y_slot(c)])
                    .expect("order 3");
                // Totally symmetric: fill all permutations.
                for (i, j, k) in
                    [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]
                {
                    d3y[(i, j, k)] = v;
                }
            }
        }
    }
    let d2y1x = Tensor3::from_fn(dim, |a, b, c| {
        g_full
            .partial(&[full.y_slot(a), full.y_slot(b), full.x_slot(c)])
            .expect("mixed partial")
    });
    // δ_γ(G_{μβ}) = ∂_γ G_{μβ} − Γ^ν_γ ∂̇_ν G_{μβ}.
    let delta_g = Tensor3::from_fn(dim, |mu, b, c| {
        d2y1x[(mu, b, c)] - (0..dim).map(|nu| nconn[(nu, c)] * d3y[(mu, b, nu)]).sum::<f64>()
    });
    let cartan_h = Tensor3::from_fn(dim, |a, b, c| {
        0.5 * (0..dim)
            .map(|mu| {
                g_upper[(a, mu)]
                    * (delta_g[(mu, b, c)] + delta_g[(mu, c, b)] - delta_g[(b, c, mu)])
            })
            .sum::<f64>()
    });
    let cartan_v = Tensor3::from_fn(dim, |a, b, c| {
        0.5 * (0..dim).map(|mu| g_upper[(a, mu)] * d3y[(mu, b, c)]).sum::<f64>()
    });

    Ok(TensorFrame {
        at: p.clone(),
        g_val,
        g_lower,
        g_upper,
        spray,
        nconn,
        cartan_h,
        cartan_v,
        berwald_conn,
        berwald_curv,
        mean_berwald,
        landsberg,
        mean_landsberg,
    })
}

/// `(G(x,y), G_{αβ}(x,y))` without the rest of the frame.
pub fn fundamental_tensor(m: &MetricSpec, p: &SamplePoint) -> Result<(f64, SqMat), TensorError> {
    let deriv = DerivSpec::new(m.dim, m.dim, 0, 2).expect("order-2 spec");
    let g = metrics::eval_g_jet(m, p, deriv)?;
    Ok((g.value(), metrics::hessian_from_jet(&g)?))
}

/// Numerical inverse of a symmetric positive-definite fundamental tensor.
pub fn inverse_generic(g_lower: &SqMat) -> Result<SqMat, TensorError> {
    Ok(spd_inverse(g_lower)?)
}

/// Closed-form block inverse of a product fundamental tensor:
///
/// ```text
/// G^{ji}   = (1/f_K)(K^{ji} − (f_H f_KK / Δ) y^j y^i)
/// G^{ji'}  = −(f_KH / Δ) y^j y^{i'}          (and symmetrically)
/// G^{j'i'} = (1/f_H)(H^{j'i'} − (f_K f_HH / Δ) y^{j'} y^{i'})
/// ```
pub fn inverse_product_closed_form(
    pm: &ProductMetric,
    p: &SamplePoint,
) -> Result<SqMat, TensorError> {
    let (r1, r2) = pm.split();
    let m = pm.m();
    let dim = pm.dim();
    let p1 = p.project(r1)?;
    let p2 = p.project(r2)?;

    let d1 = DerivSpec::new(p1.dim(), p1.dim(), 0, 2).expect("factor spec");
    let d2 = DerivSpec::new(p2.dim(), p2.dim(), 0, 2).expect("factor spec");
    let kj = metrics::eval_g_jet(pm.factor1(), &p1, d1)?;
    let hj = metrics::eval_g_jet(pm.factor2(), &p2, d2)?;
    let k_upper = spd_inverse(&metrics::hessian_from_jet(&kj)?)?;
    let h_upper = spd_inverse(&metrics::hessian_from_jet(&hj)?)?;

    let fp = pm.f().partials(kj.value(), hj.value())?;
    if fp.delta.abs() <= 1e-12 {
        return Err(TensorError::DeltaNearZero { delta: fp.delta });
    }

    let mut out = SqMat::zeros(dim);
    for j in 0..m {
        for i in 0..m {
            out[(j, i)] =
                (k_upper[(j, i)] - fp.f_h * fp.f_kk / fp.delta * p.y[j] * p.y[i]) / fp.f_k;
        }
    }
    for j in 0..m {
        for i in m..dim {
            let v = -fp.f_kh / fp.delta * p.y[j] * p.y[i];
            out[(j, i)] = v;
            out[(i, j)] = v;
        }
    }
    for j in m..dim {
        for i in m..dim {
            out[(j, i)] = (h_upper[(j - m, i - m)]
                - fp.f_k * fp.f_hh / fp.delta * p.y[j] * p.y[i])
                / fp.f_h;
        }
    }
    Ok(out)
}

/// Spray coefficients `𝔾^α` at `p`.
pub fn spray(m: &MetricSpec, p: &SamplePoint) -> Result<Vec<f64>, TensorError> {
    Ok(frame(m, p)?.spray)
}

/// Nonlinear connection `Γ^α_β` at `p`.
pub fn nonlinear_connection(m: &MetricSpec, p: &SamplePoint) -> Result<SqMat, TensorError> {
    Ok(frame(m, p)?.nconn)
}

/// Cartan connection coefficients `(Γ^α_{β;γ}, Γ^α_{βγ})` at `p`.
pub fn cartan_coeffs(m: &MetricSpec, p: &SamplePoint) -> Result<(Tensor3, Tensor3), TensorError> {
    let f = frame(m, p)?;
    Ok((f.cartan_h, f.cartan_v))
}

/// Berwald connection coefficients `Γ̌^α_{β;γ}` at `p`.
pub fn berwald_connection(m: &MetricSpec, p: &SamplePoint) -> Result<Tensor3, TensorError> {
    Ok(frame(m, p)?.berwald_conn)
}

/// Berwald curvature `B^α_{βγη}` at `p`.
pub fn berwald_curvature(m: &MetricSpec, p: &SamplePoint) -> Result<Tensor4, TensorError> {
    Ok(frame(m, p)?.berwald_curv)
}

/// Mean Berwald curvature `E_{βγ}` at `p`.
pub fn mean_berwald(m: &MetricSpec, p: &SamplePoint) -> Result<SqMat, TensorError> {
    Ok(frame(m, p)?.mean_berwald)
}

/// Landsberg curvature `L_{βγη}` at `p`.
pub fn landsberg(m: &MetricSpec, p: &SamplePoint) -> Result<Tensor3, TensorError> {
    Ok(frame(m, p)?.landsberg)
}

/// Mean Landsberg curvature `J_α` at `p`.
pub fn mean_landsberg(m: &MetricSpec, p: &SamplePoint) -> Result<Vec<f64>, TensorError> {
    Ok(frame(m, p)?.mean_landsberg)
}
