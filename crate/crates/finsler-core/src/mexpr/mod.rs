//! A small expression language for metric squares, coefficient functions and
//! product functions.
//!
//! Grammar (standard precedence, `^` binds tightest and is right-associative,
//! then unary minus, then `* /`, then `+ -`; parentheses allowed):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! number := digits ('.' digits?)? (('e' | 'E') ('+' | '-')? digits)?
//! ident  := letter (letter | digit | '_')*
//! ```
//!
//! Functions: `sqrt`, `sin`, `cos`, `exp`, `log`. There is deliberately no
//! `abs` and no piecewise construct: everything written here must be smooth
//! on the sampled domain, so metrics that would need `|·|` have to be
//! expressed as `sqrt` of squares. A `^` whose exponent is not an integer
//! constant is evaluated as `exp(r·log(base))` and needs a positive base.

mod parse;

use std::fmt;

use thiserror::Error;

use crate::jets::{Jet, JetError};

pub use parse::parse;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("function `{name}` at offset {offset} takes {expected} argument(s), got {got}")]
    Arity { offset: usize, name: String, expected: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("variable slot {0} has no binding")]
    UnboundVariable(usize),
    #[error("domain error in `{expr}`: {source}")]
    Domain {
        expr: String,
        #[source]
        source: JetError,
    },
}

/// The set of variable names an expression may reference. Evaluation binds
/// values positionally: variable `k` maps to the k-th binding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarSet {
    names: Vec<String>,
}

impl VarSet {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        Self { names: names.into_iter().map(Into::into).collect() }
    }

    /// `x1..xm, y1..ym` — evaluation order matches jet slot order.
    pub fn tangent(dim: usize) -> Self {
        let mut names = Vec::with_capacity(2 * dim);
        for i in 1..=dim {
            names.push(format!("x{i}"));
        }
        for i in 1..=dim {
            names.push(format!("y{i}"));
        }
        Self { names }
    }

    /// `x1..xm` for coefficient functions on the base manifold.
    pub fn base_only(dim: usize) -> Self {
        Self { names: (1..=dim).map(|i| format!("x{i}")).collect() }
    }

    /// `s, t` for product functions.
    pub fn st() -> Self {
        Self::new(["s", "t"])
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Sin,
    Cos,
    Exp,
    Log,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            _ => return None,
        })
    }
}

/// Abstract syntax tree of a parsed expression. Variables are stored as
/// indices into the [`VarSet`] the expression was parsed against.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Plain floating-point evaluation. Domain violations (negative sqrt
    /// argument, log of a non-positive value, division by zero) surface as
    /// errors rather than NaN so samplers can reject the point.
    pub fn eval_f64(&self, vars: &[f64]) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var(k) => *vars.get(*k).ok_or(EvalError::UnboundVariable(*k))?,
            Expr::Neg(e) => -e.eval_f64(vars)?,
            Expr::Bin(op, a, b) => {
                let x = a.eval_f64(vars)?;
                match op {
                    BinOp::Add => x + b.eval_f64(vars)?,
                    BinOp::Sub => x - b.eval_f64(vars)?,
                    BinOp::Mul => x * b.eval_f64(vars)?,
                    BinOp::Div => {
                        let y = b.eval_f64(vars)?;
                        if y == 0.0 {
                            return Err(self.domain("div", y));
                        }
                        x / y
                    }
                    BinOp::Pow => {
                        let y = b.eval_f64(vars)?;
                        match as_integer(y) {
                            Some(n) => {
                                if x == 0.0 && n < 0 {
                                    return Err(self.domain("pow", x));
                                }
                                x.powi(n as i32)
                            }
                            None => {
                                if x <= 0.0 {
                                    return Err(self.domain("pow", x));
                                }
                                x.powf(y)
                            }
                        }
                    }
                }
            }
            Expr::Call(f, a) => {
                let x = a.eval_f64(vars)?;
                match f {
                    Func::Sqrt => {
                        // 0 is allowed here (continuous extension); jets
                        // reject it because the derivative blows up.
                        if x < 0.0 {
                            return Err(self.domain("sqrt", x));
                        }
                        x.sqrt()
                    }
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(self.domain("log", x));
                        }
                        x.ln()
                    }
                }
            }
        })
    }

    /// Evaluation in jet arithmetic; the chain rule is carried by the jets.
    pub fn eval_jet(&self, vars: &[Jet]) -> Result<Jet, EvalError> {
        match self {
            Expr::Num(v) => {
                let spec = vars.first().expect("eval_jet needs at least one binding").spec();
                Ok(Jet::constant(spec, *v))
            }
            Expr::Var(k) => vars.get(*k).cloned().ok_or(EvalError::UnboundVariable(*k)),
            Expr::Neg(e) => Ok(-&e.eval_jet(vars)?),
            Expr::Bin(op, a, b) => {
                let ja = a.eval_jet(vars)?;
                match op {
                    BinOp::Add => Ok(&ja + &b.eval_jet(vars)?),
                    BinOp::Sub => Ok(&ja - &b.eval_jet(vars)?),
                    BinOp::Mul => Ok(&ja * &b.eval_jet(vars)?),
                    BinOp::Div => ja.div(&b.eval_jet(vars)?).map_err(|e| self.wrap(e)),
                    BinOp::Pow => match b.const_value() {
                        Some(r) => match as_integer(r) {
                            Some(n) => ja.powi(n).map_err(|e| self.wrap(e)),
                            None => ja.powf(r).map_err(|e| self.wrap(e)),
                        },
                        None => {
                            // Variable exponent: exp(b · log(a)).
                            let jb = b.eval_jet(vars)?;
                            let ln = ja.log().map_err(|e| self.wrap(e))?;
                            Ok((&jb * &ln).exp())
                        }
                    },
                }
            }
            Expr::Call(f, a) => {
                let ja = a.eval_jet(vars)?;
                match f {
                    Func::Sqrt => ja.sqrt().map_err(|e| self.wrap(e)),
                    Func::Sin => Ok(ja.sin()),
                    Func::Cos => Ok(ja.cos()),
                    Func::Exp => Ok(ja.exp()),
                    Func::Log => ja.log().map_err(|e| self.wrap(e)),
                }
            }
        }
    }

    /// Value of a constant subexpression (no variables), if it is one.
    pub fn const_value(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            Expr::Var(_) => None,
            Expr::Neg(e) => e.const_value().map(|v| -v),
            Expr::Bin(op, a, b) => {
                let x = a.const_value()?;
                let y = b.const_value()?;
                Some(match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                    BinOp::Pow => x.powf(y),
                })
            }
            Expr::Call(..) => None,
        }
    }

    /// Render against the variable names used at parse time.
    pub fn print(&self, vars: &VarSet) -> String {
        let mut s = String::new();
        self.fmt_prec(&|k| vars.name(k).to_string(), 0, &mut s);
        s
    }

    /// Render with positional placeholder names; used for error messages
    /// where the original variable set is not at hand.
    fn print_positional(&self) -> String {
        let mut s = String::new();
        self.fmt_prec(&|k| format!("v{k}"), 0, &mut s);
        s
    }

    // Precedence levels: 0 add, 1 mul, 2 unary, 3 pow, 4 atom.
    fn fmt_prec(&self, vars: &dyn Fn(usize) -> String, parent: u8, out: &mut String) {
        let prec = match self {
            Expr::Num(v) if *v < 0.0 => 2,
            Expr::Num(_) | Expr::Var(_) | Expr::Call(..) => 4,
            Expr::Neg(_) => 2,
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 0,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 1,
            Expr::Bin(BinOp::Pow, ..) => 3,
        };
        let need_parens = prec < parent;
        if need_parens {
            out.push('(');
        }
        match self {
            Expr::Num(v) => {
                let _ = fmt::Write::write_fmt(out, format_args!("{v}"));
            }
            Expr::Var(k) => out.push_str(&vars(*k)),
            Expr::Neg(e) => {
                out.push('-');
                e.fmt_prec(vars, 2, out);
            }
            Expr::Bin(op, a, b) => {
                let (sym, lp, rp) = match op {
                    BinOp::Add => (" + ", 0, 1),
                    BinOp::Sub => (" - ", 0, 1),
                    BinOp::Mul => ("*", 1, 2),
                    BinOp::Div => ("/", 1, 2),
                    BinOp::Pow => ("^", 4, 2),
                };
                a.fmt_prec(vars, lp, out);
                out.push_str(sym);
                b.fmt_prec(vars, rp, out);
            }
            Expr::Call(f, a) => {
                out.push_str(f.name());
                out.push('(');
                a.fmt_prec(vars, 0, out);
                out.push(')');
            }
        }
        if need_parens {
            out.push(')');
        }
    }

    fn domain(&self, op: &'static str, value: f64) -> EvalError {
        EvalError::Domain {
            expr: self.print_positional(),
            source: JetError::Domain { op, value },
        }
    }

    fn wrap(&self, source: JetError) -> EvalError {
        EvalError::Domain { expr: self.print_positional(), source }
    }
}

fn as_integer(v: f64) -> Option<i64> {
    let r = v.round();
    if (v - r).abs() < 1e-12 && r.abs() < 1e15 {
        Some(r as i64)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::{fd_default_step, fd_oracle, DerivSpec, Jet};
    use approx::assert_relative_eq;

    fn tangent_bindings(dim: usize, order_y: usize, x: &[f64], y: &[f64]) -> Vec<Jet> {
        let spec = DerivSpec::new(dim, dim, 1, order_y).unwrap();
        let mut out = Vec::new();
        for (i, &v) in x.iter().enumerate() {
            out.push(Jet::variable(spec, spec.x_slot(i), v).unwrap());
        }
        for (i, &v) in y.iter().enumerate() {
            out.push(Jet::variable(spec, spec.y_slot(i), v).unwrap());
        }
        out
    }

    #[test]
    fn parse_sphere_square() {
        let vars = VarSet::tangent(2);
        let e = parse("y1^2 + sin(x1)^2 * y2^2", &vars).unwrap();
        let v = e.eval_f64(&[std::f64::consts::FRAC_PI_2, 0.0, 3.0, 4.0]).unwrap();
        assert_relative_eq!(v, 25.0, epsilon = 1e-12);
    }

    #[test]
    fn parse_eps_sqrt_product_function() {
        let vars = VarSet::st();
        let e = parse("s + t + 2*0.5*sqrt(s*t)", &vars).unwrap();
        assert_relative_eq!(e.eval_f64(&[1.0, 1.0]).unwrap(), 3.0, epsilon = 1e-14);
    }

    #[test]
    fn double_plus_is_a_syntax_error_at_offset_5() {
        let vars = VarSet::tangent(2);
        match parse("y1 + + y2", &vars) {
            Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_identifier_and_arity() {
        let vars = VarSet::tangent(1);
        assert!(matches!(
            parse("y1 + z3", &vars),
            Err(ParseError::UnknownIdentifier { name, .. }) if name == "z3"
        ));
        // abs is deliberately not a function.
        assert!(matches!(
            parse("abs(y1)", &vars),
            Err(ParseError::UnknownIdentifier { name, .. }) if name == "abs"
        ));
        assert!(matches!(
            parse("sqrt(y1, x1)", &vars),
            Err(ParseError::Arity { expected: 1, got: 2, .. })
        ));
    }

    #[test]
    fn eval_jet_matches_hand_derivative() {
        let vars = VarSet::tangent(2);
        let e = parse("y1^2 + y2^2", &vars).unwrap();
        let j = e.eval_jet(&tangent_bindings(2, 2, &[0.0, 0.0], &[3.0, 4.0])).unwrap();
        assert_eq!(j.value(), 25.0);
        assert_eq!(j.partial(&[2]).unwrap(), 6.0);
    }

    #[test]
    fn sqrt_st_mixed_partial_matches_fd() {
        // d²/ds dt of sqrt(s t) at (3, 4), jets vs finite differences.
        let vars = VarSet::st();
        let e = parse("sqrt(s*t)", &vars).unwrap();
        let spec = DerivSpec::new(2, 2, 0, 3).unwrap();
        let s = Jet::variable(spec, spec.y_slot(0), 3.0).unwrap();
        let t = Jet::variable(spec, spec.y_slot(1), 4.0).unwrap();
        let j = e.eval_jet(&[s, t]).unwrap();
        let mixed = j.partial(&[spec.y_slot(0), spec.y_slot(1)]).unwrap();
        let e2 = e.clone();
        let fd = fd_oracle(
            &move |p: &[f64]| e2.eval_f64(p).unwrap(),
            &[3.0, 4.0],
            &[1, 1],
            fd_default_step(3.0, 2),
        );
        assert_relative_eq!(mixed, fd, max_relative = 1e-9);
        // Hand check: d²/dsdt sqrt(st) = 1/(4 sqrt(st)) = 0.0721687836...
        assert_relative_eq!(mixed, 0.25 / 12.0f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(mixed, 0.0721687836, epsilon = 1e-9);
    }

    #[test]
    fn log_at_zero_is_domain_error() {
        let vars = VarSet::tangent(1);
        let e = parse("log(y1)", &vars).unwrap();
        let b = tangent_bindings(1, 2, &[0.0], &[0.0]);
        assert!(matches!(e.eval_jet(&b), Err(EvalError::Domain { .. })));
    }

    #[test]
    fn integer_power_of_negative_base_is_fine() {
        let vars = VarSet::tangent(1);
        let e = parse("y1^3", &vars).unwrap();
        let b = tangent_bindings(1, 3, &[0.0], &[-2.0]);
        assert_eq!(e.eval_jet(&b).unwrap().value(), -8.0);
        // Non-integer exponent on a negative base must fail.
        let e = parse("y1^0.5", &vars).unwrap();
        assert!(e.eval_jet(&b).is_err());
        assert!(e.eval_f64(&[0.0, -2.0]).is_err());
    }

    #[test]
    fn scientific_notation_literals() {
        let vars = VarSet::st();
        let e = parse("1e-3 * s + 2.5E2", &vars).unwrap();
        assert_relative_eq!(e.eval_f64(&[2.0, 0.0]).unwrap(), 250.002, epsilon = 1e-12);
    }

    #[test]
    fn zero_order_jet_equals_plain_eval() {
        let vars = VarSet::tangent(2);
        let exprs = [
            "y1^2 + sin(x1)^2 * y2^2",
            "sqrt(y1^2 + y2^2) + 0.5*y1",
            "exp(x1*y1/(1 + y2^2))",
            "(y1^4 + y2^4)^(1/2)",
        ];
        let (x, y) = ([0.6, 0.2], [0.7, 1.3]);
        let spec = DerivSpec::new(2, 2, 0, 0).unwrap();
        for src in exprs {
            let e = parse(src, &vars).unwrap();
            let mut b = Vec::new();
            for (i, &v) in x.iter().enumerate() {
                b.push(Jet::variable(spec, spec.x_slot(i), v).unwrap());
            }
            for (i, &v) in y.iter().enumerate() {
                b.push(Jet::variable(spec, spec.y_slot(i), v).unwrap());
            }
            let all = [x[0], x[1], y[0], y[1]];
            assert_eq!(e.eval_jet(&b).unwrap().value(), e.eval_f64(&all).unwrap(), "{src}");
        }
    }

    #[test]
    fn print_parse_round_trip_on_catalog() {
        let vars = VarSet::tangent(2);
        let catalog = [
            "y1^2 + sin(x1)^2 * y2^2",
            "(sqrt(y1^2 + y2^2) + 0.5*y1)^2",
            "(y1^4 + y2^4)^(1/2)",
            "-y1*(y2 - x1)/(1 + x2^2)",
            "y1^2^3",
            "-(y1 + y2)^2",
        ];
        for src in catalog {
            let e1 = parse(src, &vars).unwrap();
            let printed = e1.print(&vars);
            let e2 = parse(&printed, &vars).unwrap();
            assert_eq!(e1, e2, "round trip failed for `{src}` -> `{printed}`");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_expr(vars: usize) -> impl Strategy<Value = Expr> {
            let leaf = prop_oneof![
                (0..vars).prop_map(Expr::Var),
                (0.1f64..9.9).prop_map(|v| Expr::Num((v * 100.0).round() / 100.0)),
            ];
            leaf.prop_recursive(4, 32, 3, |inner| {
                prop_oneof![
                    (inner.clone(), inner.clone(), prop_oneof![
                        Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div),
                    ])
                        .prop_map(|(a, b, op)| Expr::Bin(op, Box::new(a), Box::new(b))),
                    inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                    inner.clone().prop_map(|e| Expr::Call(Func::Sin, Box::new(e))),
                    (inner, 1u8..4).prop_map(|(a, n)| Expr::Bin(
                        BinOp::Pow,
                        Box::new(a),
                        Box::new(Expr::Num(n as f64)),
                    )),
                ]
            })
        }

        proptest! {
            #[test]
            fn print_then_parse_is_identity(e in arb_expr(4)) {
                let vars = VarSet::tangent(2);
                let printed = e.print(&vars);
                let reparsed = parse(&printed, &vars).unwrap();
                prop_assert_eq!(&reparsed, &e, "printed: {}", printed);
            }
        }
    }
}
