//! Byte layout of fuzzer inputs and a Rust mirror of the harness decoder.
//!
//! An input is the concatenation of the managed globals (in interface order)
//! followed by the parameters, each little-endian. Short inputs are padded
//! with zeros, so every byte string decodes to some assignment.

use crate::corpus::{CType, FunctionInterface, Scalar};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldRole {
    Global(usize),
    Param(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Field {
    /// Name shown in counterexamples (`*p` for pointer parameters).
    pub display: String,
    /// Struct member name in generated code (`g0`, `p1`, ...).
    pub member: String,
    pub role: FieldRole,
    pub ctype: CType,
    pub offset: usize,
    pub size: usize,
}

/// Encoded size of a supported type.
pub fn encoded_size(t: &CType, string_cap: usize) -> usize {
    match t {
        CType::Scalar { scalar } => scalar.width(),
        CType::Pointer { pointee, .. } => pointee.width(),
        CType::Array { elem, len } => elem.width() * len,
        CType::Str { .. } => string_cap,
    }
}

/// Input fields of a fuzzable interface. Returns `None` for unsupported ones.
pub fn input_layout(iface: &FunctionInterface, string_cap: usize) -> Option<Vec<Field>> {
    if !iface.is_fuzzable() {
        return None;
    }
    let mut out = Vec::new();
    let mut off = 0;
    for (j, g) in iface.managed_globals().enumerate() {
        let t = g.ty.ctype()?.clone();
        let size = encoded_size(&t, string_cap);
        out.push(Field { display: g.name.clone(), member: format!("g{j}"), role: FieldRole::Global(j), ctype: t, offset: off, size });
        off += size;
    }
    for (i, p) in iface.params.iter().enumerate() {
        let t = p.ty.ctype()?.clone();
        let size = encoded_size(&t, string_cap);
        let display = if matches!(t, CType::Pointer { .. }) { format!("*{}", p.name) } else { p.name.clone() };
        out.push(Field { display, member: format!("p{i}"), role: FieldRole::Param(i), ctype: t, offset: off, size });
        off += size;
    }
    Some(out)
}

pub fn input_len(fields: &[Field]) -> usize {
    fields.iter().map(|f| f.size).sum()
}

/// A decoded value, kept in the C representation.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    UInt(u64),
    F32(u32),
    F64(u64),
    Bool(bool),
    Char(i8),
    Array(Vec<Value>),
    Str(Vec<u8>),
}

pub fn decode_scalar(s: Scalar, b: &[u8]) -> Value {
    let mut buf = [0u8; 8];
    buf[..b.len().min(8)].copy_from_slice(&b[..b.len().min(8)]);
    match s {
        Scalar::I8 => Value::Int(i64::from(buf[0] as i8)),
        Scalar::I16 => Value::Int(i64::from(i16::from_le_bytes([buf[0], buf[1]]))),
        Scalar::I32 => Value::Int(i64::from(i32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]))),
        Scalar::I64 => Value::Int(i64::from_le_bytes(buf)),
        Scalar::U8 => Value::UInt(u64::from(buf[0])),
        Scalar::U16 => Value::UInt(u64::from(u16::from_le_bytes([buf[0], buf[1]]))),
        Scalar::U32 => Value::UInt(u64::from(u32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]))),
        Scalar::U64 => Value::UInt(u64::from_le_bytes(buf)),
        Scalar::F32 => Value::F32(u32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]])),
        Scalar::F64 => Value::F64(u64::from_le_bytes(buf)),
        Scalar::Bool => Value::Bool(buf[0] & 1 == 1),
        Scalar::Char => Value::Char(buf[0] as i8),
    }
}

/// Inverse of [`decode_scalar`] for values of the matching scalar type.
pub fn encode_scalar(s: Scalar, v: &Value) -> Vec<u8> {
    let w = s.width();
    let bytes: [u8; 8] = match v {
        Value::Int(x) => x.to_le_bytes(),
        Value::UInt(x) => x.to_le_bytes(),
        Value::F32(b) => u64::from(*b).to_le_bytes(),
        Value::F64(b) => b.to_le_bytes(),
        Value::Bool(b) => u64::from(*b).to_le_bytes(),
        Value::Char(c) => u64::from(*c as u8).to_le_bytes(),
        Value::Array(_) | Value::Str(_) => [0; 8],
    };
    bytes[..w].to_vec()
}

/// Decodes a string field: bytes are masked to 7 bits and end at the first NUL.
pub fn decode_str(b: &[u8], cap: usize) -> Vec<u8> {
    b.iter().take(cap).map(|x| x & 0x7f).take_while(|&x| x != 0).collect()
}

pub fn decode_field(t: &CType, b: &[u8], string_cap: usize) -> Value {
    match t {
        CType::Scalar { scalar } | CType::Pointer { pointee: scalar, .. } => decode_scalar(*scalar, b),
        CType::Array { elem, len } => {
            let w = elem.width();
            Value::Array((0..*len).map(|i| decode_scalar(*elem, b.get(i * w..).unwrap_or(&[]))).collect())
        }
        CType::Str { .. } => Value::Str(decode_str(b, string_cap)),
    }
}

/// Decodes any byte string into one value per field.
pub fn decode_input(fields: &[Field], data: &[u8], string_cap: usize) -> Vec<(String, Value)> {
    let total = input_len(fields);
    let mut padded = data[..data.len().min(total)].to_vec();
    padded.resize(total, 0);
    fields
        .iter()
        .map(|f| (f.display.clone(), decode_field(&f.ctype, &padded[f.offset..f.offset + f.size], string_cap)))
        .collect()
}

pub fn encode_field(t: &CType, v: &Value, string_cap: usize) -> Vec<u8> {
    match (t, v) {
        (CType::Array { elem, .. }, Value::Array(items)) => items.iter().flat_map(|x| encode_scalar(*elem, x)).collect(),
        (CType::Str { .. }, Value::Str(s)) => {
            let mut b = s.clone();
            b.resize(string_cap, 0);
            b
        }
        (CType::Scalar { scalar } | CType::Pointer { pointee: scalar, .. }, v) => encode_scalar(*scalar, v),
        _ => vec![0; encoded_size(t, string_cap)],
    }
}

pub fn encode_input(fields: &[Field], values: &[Value], string_cap: usize) -> Vec<u8> {
    fields.iter().zip(values).flat_map(|(f, v)| encode_field(&f.ctype, v, string_cap)).collect()
}

pub(crate) fn escape_bytes(s: &[u8]) -> String {
    let mut out = String::from("\"");
    for &c in s {
        match c {
            b'"' => out.push_str("\\\""),
            b'\\' => out.push_str("\\\\"),
            b'\n' => out.push_str("\\n"),
            b'\t' => out.push_str("\\t"),
            b'\r' => out.push_str("\\r"),
            0x20..=0x7e => out.push(c as char),
            _ => out.push_str(&format!("\\x{c:02x}")),
        }
    }
    out.push('"');
    out
}

fn fmt_g17(x: f64) -> String {
    // mirrors printf("%.17g") closely enough for human feedback
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:?}")
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(x) => write!(f, "{x}"),
            Value::UInt(x) => write!(f, "{x}"),
            Value::F32(b) => write!(f, "{}", fmt_g17(f64::from(f32::from_bits(*b)))),
            Value::F64(b) => write!(f, "{}", fmt_g17(f64::from_bits(*b))),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Char(c) => write!(f, "{c}"),
            Value::Array(items) => {
                write!(f, "[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, "]")
            }
            Value::Str(s) => write!(f, "{}", escape_bytes(s)),
        }
    }
}

impl Value {
    /// Exact rendering used to cross-check the C decoder (floats as raw bits).
    pub fn canonical(&self) -> String {
        match self {
            Value::F32(b) => format!("0x{b:08x}"),
            Value::F64(b) => format!("0x{b:016x}"),
            Value::Array(items) => format!("[{}]", items.iter().map(Value::canonical).collect::<Vec<_>>().join(", ")),
            other => other.to_string(),
        }
    }
}
