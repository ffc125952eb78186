//! Runtime values, expression evaluation and window aggregation.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AggregateOp, BinaryOp, Expr, ExprKind, FieldBase, Literal, PrimType, UnaryOp, ValueType};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Long(i64),
    Double(f64),
    Str(String),
    Bool(bool),
}

/// Field name to value; sorted so serialized payloads are stable.
pub type Payload = BTreeMap<String, Value>;

impl Value {
    pub fn value_type(&self) -> ValueType {
        match self {
            Value::Long(_) => ValueType::Long,
            Value::Double(_) => ValueType::Double,
            Value::Str(_) => ValueType::String,
            Value::Bool(_) => ValueType::Bool,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Long(v) => Some(*v as f64),
            Value::Double(v) => Some(*v),
            _ => None,
        }
    }

    /// Converts to a declared field type; longs widen to doubles.
    pub fn coerce(self, ty: PrimType) -> Option<Value> {
        match (self, ty) {
            (Value::Long(v), PrimType::Double) => Some(Value::Double(v as f64)),
            (v @ Value::Long(_), PrimType::Long) => Some(v),
            (v @ Value::Double(_), PrimType::Double) => Some(v),
            (v @ Value::Str(_), PrimType::String) => Some(v),
            _ => None,
        }
    }

    /// The zero value of a field type.
    pub fn zero(ty: PrimType) -> Value {
        match ty {
            PrimType::Double => Value::Double(0.0),
            PrimType::Long => Value::Long(0),
            PrimType::String => Value::Str(String::new()),
        }
    }

    /// Text used as a lookup key for storages and request tables.
    pub fn key_text(&self) -> String {
        match self {
            Value::Str(s) => s.clone(),
            other => other.to_string(),
        }
    }

    /// Converts a JSON scalar; integers become longs.
    pub fn from_json(v: &serde_json::Value) -> Option<Value> {
        match v {
            serde_json::Value::String(s) => Some(Value::Str(s.clone())),
            serde_json::Value::Bool(b) => Some(Value::Bool(*b)),
            serde_json::Value::Number(n) => n.as_i64().map(Value::Long).or_else(|| n.as_f64().map(Value::Double)),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Long(v) => write!(f, "{v}"),
            Value::Double(v) => write!(f, "{v:?}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

impl From<&Literal> for Value {
    fn from(l: &Literal) -> Self {
        match l {
            Literal::Long(v) => Value::Long(*v),
            Literal::Double(v) => Value::Double(*v),
            Literal::Str(s) => Value::Str(s.clone()),
            Literal::Bool(b) => Value::Bool(*b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("field `{0}` is not set")]
    MissingField(String),
    #[error("type error: {0}")]
    TypeError(String),
    #[error("long division by zero")]
    DivisionByZero,
    #[error("long overflow in `{0}`")]
    Overflow(&'static str),
}

/// What field references resolve against. Bare names read `bare`.
#[derive(Clone, Copy, Debug, Default)]
pub struct EvalEnv<'a> {
    pub bare: Option<&'a Payload>,
    pub event: Option<&'a Payload>,
    pub state: Option<&'a Payload>,
    pub response: Option<&'a Payload>,
}

fn qualified(base: FieldBase, name: &str) -> String {
    match base.prefix() {
        Some(p) => format!("{p}.{name}"),
        None => name.to_string(),
    }
}

/// Evaluates both operands of every operator before combining them.
pub fn eval_expr(e: &Expr, env: &EvalEnv<'_>) -> Result<Value, EvalError> {
    match &e.kind {
        ExprKind::Literal(l) => Ok(l.into()),
        ExprKind::Field { base, name } => {
            let scope = match base {
                FieldBase::Bare => env.bare,
                FieldBase::Event => env.event,
                FieldBase::State => env.state,
                FieldBase::Response => env.response,
            };
            scope
                .and_then(|p| p.get(name))
                .cloned()
                .ok_or_else(|| EvalError::MissingField(qualified(*base, name)))
        }
        ExprKind::Unary { op, operand } => {
            let v = eval_expr(operand, env)?;
            match (op, v) {
                (UnaryOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                (UnaryOp::Neg, Value::Long(v)) => v.checked_neg().map(Value::Long).ok_or(EvalError::Overflow("-")),
                (UnaryOp::Neg, Value::Double(v)) => Ok(Value::Double(-v)),
                (op, v) => Err(EvalError::TypeError(format!(
                    "operator `{}` does not apply to {}",
                    if *op == UnaryOp::Not { "!" } else { "-" },
                    v.value_type()
                ))),
            }
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let a = eval_expr(lhs, env)?;
            let b = eval_expr(rhs, env)?;
            binary(*op, a, b)
        }
    }
}

fn binary(op: BinaryOp, a: Value, b: Value) -> Result<Value, EvalError> {
    use BinaryOp::*;
    let mismatch = |a: &Value, b: &Value| {
        EvalError::TypeError(format!(
            "operator `{}` does not apply to {} and {}",
            op.symbol(),
            a.value_type(),
            b.value_type()
        ))
    };
    match op {
        Add | Sub | Mul | Div => match (&a, &b) {
            (Value::Long(x), Value::Long(y)) => {
                let r = match op {
                    Add => x.checked_add(*y),
                    Sub => x.checked_sub(*y),
                    Mul => x.checked_mul(*y),
                    _ if *y == 0 => return Err(EvalError::DivisionByZero),
                    _ => x.checked_div(*y),
                };
                r.map(Value::Long).ok_or(EvalError::Overflow(op.symbol()))
            }
            _ => {
                let (Some(x), Some(y)) = (a.as_f64(), b.as_f64()) else {
                    return Err(mismatch(&a, &b));
                };
                Ok(Value::Double(match op {
                    Add => x + y,
                    Sub => x - y,
                    Mul => x * y,
                    _ => x / y,
                }))
            }
        },
        Lt | Le | Gt | Ge => {
            let ord = match (&a, &b) {
                (Value::Long(x), Value::Long(y)) => x.partial_cmp(y),
                _ => match (a.as_f64(), b.as_f64()) {
                    (Some(x), Some(y)) => x.partial_cmp(&y),
                    _ => return Err(mismatch(&a, &b)),
                },
            };
            Ok(Value::Bool(match (op, ord) {
                (_, None) => false,
                (Lt, Some(o)) => o.is_lt(),
                (Le, Some(o)) => o.is_le(),
                (Gt, Some(o)) => o.is_gt(),
                (_, Some(o)) => o.is_ge(),
            }))
        }
        Eq | Ne => {
            let same = match (&a, &b) {
                (Value::Long(x), Value::Long(y)) => x == y,
                (Value::Str(x), Value::Str(y)) => x == y,
                (Value::Bool(x), Value::Bool(y)) => x == y,
                _ => match (a.as_f64(), b.as_f64()) {
                    (Some(x), Some(y)) => x == y,
                    _ => return Err(mismatch(&a, &b)),
                },
            };
            Ok(Value::Bool(if op == Eq { same } else { !same }))
        }
        And | Or => match (&a, &b) {
            (Value::Bool(x), Value::Bool(y)) => Ok(Value::Bool(if op == And { *x && *y } else { *x || *y })),
            _ => Err(mismatch(&a, &b)),
        },
    }
}

/// Aggregates `field` over one full window. AVG is a double, SUM stays a
/// long when every sample is a long, COUNT is the window size.
///
/// Samples missing the field or holding a non-number count as 0.
pub fn compute_common(op: AggregateOp, n: u32, field: &str, buffer: &[Payload]) -> Value {
    debug_assert_eq!(buffer.len(), n as usize);
    let values: Vec<&Value> = buffer.iter().filter_map(|p| p.get(field)).collect();
    match op {
        AggregateOp::CountBySample => Value::Long(n as i64),
        AggregateOp::SumBySample if values.len() == buffer.len() && values.iter().all(|v| matches!(v, Value::Long(_))) => {
            Value::Long(
                values
                    .iter()
                    .map(|v| if let Value::Long(x) = v { *x } else { 0 })
                    .fold(0i64, i64::wrapping_add),
            )
        }
        AggregateOp::SumBySample => Value::Double(values.iter().filter_map(|v| v.as_f64()).sum()),
        AggregateOp::AvgBySample => {
            let sum: f64 = values.iter().filter_map(|v| v.as_f64()).sum();
            Value::Double(sum / n as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_expr;

    fn eval(text: &str, bare: &Payload) -> Result<Value, EvalError> {
        let e = parse_expr(text).0.unwrap();
        eval_expr(
            &e,
            &EvalEnv {
                bare: Some(bare),
                ..Default::default()
            },
        )
    }

    #[test]
    fn smoke_condition() {
        let p = Payload::from([("smokeValue".to_string(), Value::Double(700.0))]);
        assert_eq!(eval("smokeValue > 650", &p), Ok(Value::Bool(true)));
        assert_eq!(eval("1 == 1", &p), Ok(Value::Bool(true)));
    }

    #[test]
    fn unset_state_is_missing() {
        let e = parse_expr("state.smoke").0.unwrap();
        let state = Payload::new();
        let env = EvalEnv {
            state: Some(&state),
            ..Default::default()
        };
        assert_eq!(eval_expr(&e, &env), Err(EvalError::MissingField("state.smoke".into())));
    }

    #[test]
    fn division() {
        let p = Payload::new();
        assert_eq!(eval("1 / 0", &p), Err(EvalError::DivisionByZero));
        assert_eq!(eval("1.0 / 0", &p), Ok(Value::Double(f64::INFINITY)));
        assert_eq!(eval("7 / 2", &p), Ok(Value::Long(3)));
        assert_eq!(eval("7 / 2.0", &p), Ok(Value::Double(3.5)));
    }

    #[test]
    fn strict_and_typed() {
        let p = Payload::new();
        assert!(matches!(eval("false && missing > 1", &p), Err(EvalError::MissingField(_))));
        assert!(matches!(eval("1 + \"a\"", &p), Err(EvalError::TypeError(_))));
        assert_eq!(eval("1 == 1.0", &p), Ok(Value::Bool(true)));
        assert_eq!(eval("-(2 - 5)", &p), Ok(Value::Long(3)));
    }

    #[test]
    fn aggregates() {
        let buf = |xs: &[Value]| -> Vec<Payload> {
            xs.iter().map(|x| Payload::from([("v".to_string(), x.clone())])).collect()
        };
        let temps = buf(&[20.0, 22.0, 24.0, 26.0, 28.0].map(Value::Double));
        assert_eq!(compute_common(AggregateOp::AvgBySample, 5, "v", &temps), Value::Double(24.0));
        let ints = buf(&[1, 2, 3].map(Value::Long));
        assert_eq!(compute_common(AggregateOp::SumBySample, 3, "v", &ints), Value::Long(6));
        assert_eq!(compute_common(AggregateOp::CountBySample, 5, "v", &temps), Value::Long(5));
    }

    #[test]
    fn serializes_untagged() {
        let p = Payload::from([
            ("a".to_string(), Value::Double(30.0)),
            ("b".to_string(), Value::Long(3)),
            ("c".to_string(), Value::Str("x".into())),
        ]);
        let text = serde_json::to_string(&p).unwrap();
        assert_eq!(text, r#"{"a":30.0,"b":3,"c":"x"}"#);
        let back: Payload = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
    }
}
