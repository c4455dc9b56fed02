//! Reading point documents and writing result documents.

use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use normcone::{ConeError, ConePoint, GaugeSpec};
use serde_json::{Map, Number, Value};

/// A failure with the process exit status it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError { code: EXIT_VALIDATION, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ConeError> for CliError {
    fn from(e: ConeError) -> Self {
        let code = match e {
            ConeError::SolverFailure { .. } | ConeError::Internal(_) => EXIT_SOLVER,
            _ => EXIT_VALIDATION,
        };
        CliError { code, message: e.to_string() }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// A point read from disk, with the exponent it carries (if any).
pub struct PointDoc {
    pub point: ConePoint,
    pub p: Option<GaugeSpec>,
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str, path: &Path) -> CliResult<&'a Value> {
    obj.get(name)
        .ok_or_else(|| CliError::validation(format!("{}: missing field \"{name}\"", path.display())))
}

fn number(v: &Value, what: &str, path: &Path) -> CliResult<f64> {
    v.as_f64()
        .ok_or_else(|| CliError::validation(format!("{}: field {what} must be a number", path.display())))
}

fn parse_p(v: &Value, path: &Path) -> CliResult<GaugeSpec> {
    let text = match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        _ => return Err(CliError::validation(format!("{}: field \"p\" must be \"1\", \"inf\" or a number", path.display()))),
    };
    text.parse::<GaugeSpec>()
        .map_err(|e| CliError::validation(format!("{}: field \"p\": {e}", path.display())))
}

/// Reads `{"m": .., "A": .., "s": .., "p": ..}`. `A` may be nested rows or a flat row-major list.
pub fn read_point(path: &Path) -> CliResult<PointDoc> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| {
        CliError::validation(format!("{}: line {} column {}: {e}", path.display(), e.line(), e.column()))
    })?;
    let obj = doc
        .as_object()
        .ok_or_else(|| CliError::validation(format!("{}: expected an object at the top level", path.display())))?;
    let m = field(obj, "m", path)?
        .as_u64()
        .filter(|&m| m >= 1)
        .ok_or_else(|| CliError::validation(format!("{}: field \"m\" must be a positive integer", path.display())))?
        as usize;
    let raw = field(obj, "A", path)?
        .as_array()
        .ok_or_else(|| CliError::validation(format!("{}: field \"A\" must be an array", path.display())))?;
    let mut entries = Vec::with_capacity(m * m);
    if raw.iter().all(Value::is_array) {
        if raw.len() != m {
            return Err(CliError::validation(format!("{}: field \"A\" has {} rows, expected {m}", path.display(), raw.len())));
        }
        for (i, row) in raw.iter().enumerate() {
            let row = row.as_array().expect("checked above");
            if row.len() != m {
                return Err(CliError::validation(format!(
                    "{}: field \"A\" row {i} has {} entries, expected {m}",
                    path.display(),
                    row.len()
                )));
            }
            for (j, v) in row.iter().enumerate() {
                entries.push(number(v, &format!("\"A\"[{i}][{j}]"), path)?);
            }
        }
    } else {
        if raw.len() != m * m {
            return Err(CliError::validation(format!(
                "{}: field \"A\" has {} entries, expected {}",
                path.display(),
                raw.len(),
                m * m
            )));
        }
        for (k, v) in raw.iter().enumerate() {
            entries.push(number(v, &format!("\"A\"[{k}]"), path)?);
        }
    }
    let s = number(field(obj, "s", path)?, "\"s\"", path)?;
    let p = obj.get("p").map(|v| parse_p(v, path)).transpose()?;
    let a = DMatrix::from_row_slice(m, m, &entries);
    let point = ConePoint::new(a, s)
        .map_err(|e| CliError::validation(format!("{}: field \"A\": {e}", path.display())))?;
    Ok(PointDoc { point, p })
}

/// A JSON number with 17 significant digits; non-finite values become `null`.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let text = format!("{x:.16e}");
    Value::Number(text.parse::<Number>().expect("formatted float is valid JSON"))
}

pub fn matrix(a: &DMatrix<f64>) -> Value {
    Value::Array((0..a.nrows()).map(|i| Value::Array((0..a.ncols()).map(|j| num(a[(i, j)])).collect())).collect())
}

pub fn vector(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| num(x)).collect())
}

/// `X` and `t` fields of a point.
pub fn point_fields(out: &mut Map<String, Value>, z: &ConePoint) {
    out.insert("X".into(), matrix(&z.a));
    out.insert("t".into(), num(z.s));
}

pub fn emit(doc: &Value) {
    println!("{}", serde_json::to_string_pretty(doc).expect("serializable document"));
}
