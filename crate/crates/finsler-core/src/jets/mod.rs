//! Truncated multivariate Taylor arithmetic ("jets").
//!
//! A [`Jet`] carries the Taylor coefficients of a scalar quantity at a base
//! point, over a block of base (`x`) coordinates and a block of fiber (`y`)
//! coordinates. The truncation bounds are per group: total x-order and total
//! y-order are limited separately by the [`DerivSpec`], which is how mixed
//! partials like `∂²G/∂y^α∂x^β` stay cheap while y-orders run up to 5.
//!
//! Coefficients are factorial-normalized (`coeff = partial / idx!`), so
//! multiplication is a plain truncated convolution and all elementary
//! functions reduce to composing a univariate Taylor series with a jet whose
//! constant term is zero. Everything is exact at the truncation order; there
//! are no step sizes and no cancellation beyond ordinary f64 rounding.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

mod fd;
pub use fd::{fd_default_step, fd_oracle};

/// Hard cap on the total x-derivative order.
pub const MAX_ORDER_X: usize = 2;

#[derive(Debug, Error)]
pub enum JetError {
    /// The sample point leaves the domain where the operation is smooth.
    #[error("domain error: {op} of {value} (operand outside smooth domain)")]
    Domain { op: &'static str, value: f64 },
    #[error("coordinate slot {slot} out of range for {dims} slots")]
    SlotOutOfRange { slot: usize, dims: usize },
    #[error("multi-index exceeds the jet's derivative bounds")]
    IndexOutOfBounds,
    #[error("invalid derivative spec: {0}")]
    BadSpec(String),
}

/// Derivative bounds for a jet: how many coordinates of each kind, and the
/// maximal total derivative order tracked in each group.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct DerivSpec {
    dim_x: usize,
    dim_y: usize,
    order_x: usize,
    order_y: usize,
}

impl DerivSpec {
    pub fn new(dim_x: usize, dim_y: usize, order_x: usize, order_y: usize) -> Result<Self, JetError> {
        if dim_x != dim_y {
            return Err(JetError::BadSpec(format!(
                "dim_x ({dim_x}) must equal dim_y ({dim_y}): tangent-bundle coordinates come in pairs"
            )));
        }
        if order_x > MAX_ORDER_X {
            return Err(JetError::BadSpec(format!(
                "order_x ({order_x}) exceeds the supported maximum {MAX_ORDER_X}"
            )));
        }
        Ok(Self { dim_x, dim_y, order_x, order_y })
    }

    /// The default spec for tensor work on a `dim`-manifold: first-order in
    /// x, fifth-order in y (enough for third y-derivatives of the spray).
    pub fn tangent(dim: usize) -> Self {
        Self { dim_x: dim, dim_y: dim, order_x: 1, order_y: 5 }
    }

    pub fn dim_x(&self) -> usize {
        self.dim_x
    }

    pub fn dim_y(&self) -> usize {
        self.dim_y
    }

    pub fn order_x(&self) -> usize {
        self.order_x
    }

    pub fn order_y(&self) -> usize {
        self.order_y
    }

    /// Number of coordinate slots (x block first, then y block).
    pub fn dims(&self) -> usize {
        self.dim_x + self.dim_y
    }

    /// Slot index of the i-th base coordinate.
    pub fn x_slot(&self, i: usize) -> usize {
        debug_assert!(i < self.dim_x);
        i
    }

    /// Slot index of the i-th fiber coordinate.
    pub fn y_slot(&self, i: usize) -> usize {
        debug_assert!(i < self.dim_y);
        self.dim_x + i
    }

    fn is_x_slot(&self, slot: usize) -> bool {
        slot < self.dim_x
    }

    fn max_total_order(&self) -> usize {
        self.order_x + self.order_y
    }

    fn admits(&self, idx: &[u8]) -> bool {
        let dx: usize = idx[..self.dim_x].iter().map(|&v| v as usize).sum();
        let dy: usize = idx[self.dim_x..].iter().map(|&v| v as usize).sum();
        dx <= self.order_x && dy <= self.order_y
    }
}

/// Everything derived from a spec that jets share: the admissible
/// multi-indices in graded order, their factorials, and the truncated
/// convolution plan for multiplication.
struct IndexTable {
    spec: DerivSpec,
    indices: Vec<Box<[u8]>>,
    position: HashMap<Box<[u8]>, u32>,
    factorial: Vec<f64>,
    /// (pos_a, pos_b, pos_out) triples with idx[a] + idx[b] = idx[out].
    mul_plan: Vec<(u32, u32, u32)>,
}

fn enumerate_indices(spec: &DerivSpec) -> Vec<Box<[u8]>> {
    // All multi-indices over dims() slots with group totals within bounds,
    // in graded order (total degree, then lexicographic).
    let dims = spec.dims();
    let mut out: Vec<Box<[u8]>> = Vec::new();
    let mut cur = vec![0u8; dims];
    fn rec(spec: &DerivSpec, slot: usize, cur: &mut Vec<u8>, out: &mut Vec<Box<[u8]>>) {
        if slot == cur.len() {
            out.push(cur.clone().into_boxed_slice());
            return;
        }
        let group_used: usize = if spec.is_x_slot(slot) {
            cur[..slot].iter().map(|&v| v as usize).sum()
        } else {
            cur[spec.dim_x..slot].iter().map(|&v| v as usize).sum()
        };
        let group_max = if spec.is_x_slot(slot) { spec.order_x } else { spec.order_y };
        for v in 0..=(group_max - group_used) {
            cur[slot] = v as u8;
            rec(spec, slot + 1, cur, out);
        }
        cur[slot] = 0;
    }
    rec(spec, 0, &mut cur, &mut out);
    out.sort_by(|a, b| {
        let da: usize = a.iter().map(|&v| v as usize).sum();
        let db: usize = b.iter().map(|&v| v as usize).sum();
        da.cmp(&db).then_with(|| a.cmp(b))
    });
    out
}

fn multi_factorial(idx: &[u8]) -> f64 {
    idx.iter()
        .map(|&v| (1..=v as u64).product::<u64>() as f64)
        .product()
}

impl IndexTable {
    fn build(spec: DerivSpec) -> Self {
        let indices = enumerate_indices(&spec);
        let mut position = HashMap::with_capacity(indices.len());
        for (k, idx) in indices.iter().enumerate() {
            position.insert(idx.clone(), k as u32);
        }
        let factorial = indices.iter().map(|idx| multi_factorial(idx)).collect();

        let degrees: Vec<(usize, usize)> = indices
            .iter()
            .map(|idx| {
                let dx = idx[..spec.dim_x].iter().map(|&v| v as usize).sum();
                let dy = idx[spec.dim_x..].iter().map(|&v| v as usize).sum();
                (dx, dy)
            })
            .collect();

        let mut mul_plan = Vec::new();
        let mut sum = vec![0u8; spec.dims()];
        for (a, ia) in indices.iter().enumerate() {
            let (dxa, dya) = degrees[a];
            for (b, ib) in indices.iter().enumerate() {
                let (dxb, dyb) = degrees[b];
                if dxa + dxb > spec.order_x || dya + dyb > spec.order_y {
                    continue;
                }
                for (s, (&va, &vb)) in sum.iter_mut().zip(ia.iter().zip(ib.iter())) {
                    *s = va + vb;
                }
                let out = position[sum.as_slice()];
                mul_plan.push((a as u32, b as u32, out));
            }
        }
        mul_plan.sort_by_key(|&(a, _, out)| (out, a));

        Self { spec, indices, position, factorial, mul_plan }
    }
}

fn table_for(spec: DerivSpec) -> Arc<IndexTable> {
    static CACHE: OnceLock<Mutex<HashMap<DerivSpec, Arc<IndexTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry(spec)
        .or_insert_with(|| Arc::new(IndexTable::build(spec)))
        .clone()
}

/// A truncated Taylor expansion of a scalar at a base point.
///
/// Immutable after construction; all operations are pure and return fresh
/// jets, so values can be shared freely across threads.
#[derive(Clone)]
pub struct Jet {
    table: Arc<IndexTable>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("spec", &self.table.spec)
            .field("value", &self.coeffs[0])
            .finish()
    }
}

/// Jet of the coordinate function for `slot`, based at `base_value`.
pub fn jet_variable(spec: DerivSpec, slot: usize, base_value: f64) -> Result<Jet, JetError> {
    if slot >= spec.dims() {
        return Err(JetError::SlotOutOfRange { slot, dims: spec.dims() });
    }
    let mut j = Jet::constant(spec, base_value);
    let group_order = if spec.is_x_slot(slot) { spec.order_x } else { spec.order_y };
    if group_order >= 1 {
        let mut idx = vec![0u8; spec.dims()];
        idx[slot] = 1;
        let pos = j.table.position[idx.as_slice()] as usize;
        j.coeffs[pos] = 1.0;
    }
    Ok(j)
}

impl Jet {
    pub fn constant(spec: DerivSpec, value: f64) -> Jet {
        let table = table_for(spec);
        let mut coeffs = vec![0.0; table.indices.len()];
        coeffs[0] = value;
        Jet { table, coeffs }
    }

    /// See [`jet_variable`].
    pub fn variable(spec: DerivSpec, slot: usize, base_value: f64) -> Result<Jet, JetError> {
        jet_variable(spec, slot, base_value)
    }

    pub fn spec(&self) -> DerivSpec {
        self.table.spec
    }

    /// The function value at the base point (empty multi-index coefficient).
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// The true partial derivative for a full-length multi-index
    /// (coefficient times multi-index factorial).
    pub fn extract(&self, idx: &[u8]) -> Result<f64, JetError> {
        if idx.len() != self.table.spec.dims() || !self.table.spec.admits(idx) {
            return Err(JetError::IndexOutOfBounds);
        }
        let pos = self.table.position[idx] as usize;
        Ok(self.coeffs[pos] * self.table.factorial[pos])
    }

    /// Partial derivative named by a list of slots, e.g. `&[ys, ys]` for a
    /// second derivative in fiber slot `ys`.
    pub fn partial(&self, slots: &[usize]) -> Result<f64, JetError> {
        let dims = self.table.spec.dims();
        let mut idx = vec![0u8; dims];
        for &s in slots {
            if s >= dims {
                return Err(JetError::SlotOutOfRange { slot: s, dims });
            }
            idx[s] += 1;
        }
        self.extract(&idx)
    }

    fn assert_same_spec(&self, other: &Jet) {
        assert!(
            self.table.spec == other.table.spec,
            "jet spec mismatch: {:?} vs {:?}",
            self.table.spec,
            other.table.spec
        );
    }

    pub fn scale(&self, c: f64) -> Jet {
        let mut out = self.clone();
        for v in &mut out.coeffs {
            *v *= c;
        }
        out
    }

    pub fn add_scalar(&self, c: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += c;
        out
    }

    fn mul_impl(&self, other: &Jet) -> Jet {
        self.assert_same_spec(other);
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for &(a, b, out) in &self.table.mul_plan {
            coeffs[out as usize] += self.coeffs[a as usize] * other.coeffs[b as usize];
        }
        Jet { table: self.table.clone(), coeffs }
    }

    /// Compose a univariate Taylor series with this jet: `series[k]` must be
    /// `f⁽ᵏ⁾(a₀)/k!` where `a₀` is this jet's value. Evaluated by Horner in
    /// jet arithmetic; exact at truncation order.
    fn compose(&self, series: &[f64]) -> Jet {
        let mut u = self.clone();
        u.coeffs[0] = 0.0;
        let mut acc = Jet::constant(self.table.spec, *series.last().unwrap());
        for k in (0..series.len() - 1).rev() {
            acc = acc.mul_impl(&u);
            acc.coeffs[0] += series[k];
        }
        acc
    }

    fn series_len(&self) -> usize {
        self.table.spec.max_total_order() + 1
    }

    pub fn recip(&self) -> Result<Jet, JetError> {
        let b0 = self.value();
        if b0 == 0.0 {
            return Err(JetError::Domain { op: "div", value: b0 });
        }
        let n = self.series_len();
        let mut series = Vec::with_capacity(n);
        let mut c = 1.0 / b0;
        for _ in 0..n {
            series.push(c);
            c *= -1.0 / b0;
        }
        Ok(self.compose(&series))
    }

    pub fn div(&self, other: &Jet) -> Result<Jet, JetError> {
        Ok(self.mul_impl(&other.recip()?))
    }

    pub fn sqrt(&self) -> Result<Jet, JetError> {
        let b0 = self.value();
        if b0 <= 0.0 {
            return Err(JetError::Domain { op: "sqrt", value: b0 });
        }
        Ok(self.compose(&pow_series(b0, 0.5, self.series_len())))
    }

    /// Integer power by repeated squaring; negative exponents go through the
    /// reciprocal and need a nonzero value.
    pub fn powi(&self, n: i64) -> Result<Jet, JetError> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut acc = Jet::constant(self.table.spec, 1.0);
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul_impl(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul_impl(&base);
            }
        }
        Ok(acc)
    }

    /// Real power; requires a positive value.
    pub fn powf(&self, r: f64) -> Result<Jet, JetError> {
        let b0 = self.value();
        if b0 <= 0.0 {
            return Err(JetError::Domain { op: "pow", value: b0 });
        }
        Ok(self.compose(&pow_series(b0, r, self.series_len())))
    }

    pub fn exp(&self) -> Jet {
        let e0 = self.value().exp();
        let n = self.series_len();
        let mut series = Vec::with_capacity(n);
        let mut c = e0;
        for k in 0..n {
            series.push(c);
            c /= (k + 1) as f64;
        }
        self.compose(&series)
    }

    pub fn log(&self) -> Result<Jet, JetError> {
        let b0 = self.value();
        if b0 <= 0.0 {
            return Err(JetError::Domain { op: "log", value: b0 });
        }
        let n = self.series_len();
        let mut series = Vec::with_capacity(n);
        series.push(b0.ln());
        // d^k/dx^k ln x = (-1)^{k+1} (k-1)! / x^k, so the Taylor coefficient
        // is (-1)^{k+1} / (k b0^k).
        let mut p = 1.0;
        for k in 1..n {
            p *= b0;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            series.push(sign / (k as f64 * p));
        }
        Ok(self.compose(&series))
    }

    pub fn sin(&self) -> Jet {
        self.compose(&trig_series(self.value(), false, self.series_len()))
    }

    pub fn cos(&self) -> Jet {
        self.compose(&trig_series(self.value(), true, self.series_len()))
    }

    /// Single partial derivative in `slot`; the result's order bound in that
    /// slot's group drops by one.
    pub fn deriv(&self, slot: usize) -> Result<Jet, JetError> {
        let spec = self.table.spec;
        if slot >= spec.dims() {
            return Err(JetError::SlotOutOfRange { slot, dims: spec.dims() });
        }
        let reduced = if spec.is_x_slot(slot) {
            if spec.order_x == 0 {
                return Err(JetError::IndexOutOfBounds);
            }
            DerivSpec { order_x: spec.order_x - 1, ..spec }
        } else {
            if spec.order_y == 0 {
                return Err(JetError::IndexOutOfBounds);
            }
            DerivSpec { order_y: spec.order_y - 1, ..spec }
        };
        let table = table_for(reduced);
        let mut coeffs = vec![0.0; table.indices.len()];
        let mut shifted = vec![0u8; spec.dims()];
        for (k, idx) in table.indices.iter().enumerate() {
            shifted.copy_from_slice(idx);
            shifted[slot] += 1;
            let src = self.table.position[shifted.as_slice()] as usize;
            coeffs[k] = self.coeffs[src] * (idx[slot] as f64 + 1.0);
        }
        Ok(Jet { table, coeffs })
    }

    /// Project onto a spec with equal dims and order bounds not exceeding
    /// this jet's, dropping higher coefficients.
    pub fn truncate(&self, spec: DerivSpec) -> Result<Jet, JetError> {
        let own = self.table.spec;
        if spec.dim_x != own.dim_x
            || spec.dim_y != own.dim_y
            || spec.order_x > own.order_x
            || spec.order_y > own.order_y
        {
            return Err(JetError::BadSpec(
                "truncation target must keep dims and shrink orders".into(),
            ));
        }
        let table = table_for(spec);
        let mut coeffs = vec![0.0; table.indices.len()];
        for (k, idx) in table.indices.iter().enumerate() {
            coeffs[k] = self.coeffs[self.table.position[idx] as usize];
        }
        Ok(Jet { table, coeffs })
    }
}

fn pow_series(b0: f64, r: f64, n: usize) -> Vec<f64> {
    // Taylor coefficients of x^r about b0: binom(r, k) * b0^(r-k).
    let mut series = Vec::with_capacity(n);
    let mut binom = 1.0;
    for k in 0..n {
        series.push(binom * b0.powf(r - k as f64));
        binom *= (r - k as f64) / (k as f64 + 1.0);
    }
    series
}

fn trig_series(b0: f64, cosine: bool, n: usize) -> Vec<f64> {
    let (s, c) = b0.sin_cos();
    let cycle = if cosine { [c, -s, -c, s] } else { [s, c, -s, -c] };
    let mut series = Vec::with_capacity(n);
    let mut kfac = 1.0;
    for k in 0..n {
        if k > 0 {
            kfac *= k as f64;
        }
        series.push(cycle[k % 4] / kfac);
    }
    series
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.assert_same_spec(rhs);
        let coeffs = self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect();
        Jet { table: self.table.clone(), coeffs }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.assert_same_spec(rhs);
        let coeffs = self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect();
        Jet { table: self.table.clone(), coeffs }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_impl(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}
