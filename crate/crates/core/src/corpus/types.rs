use serde::{Deserialize, Serialize};
use std::fmt;

/// Scalar C types the harness knows how to decode, convert and compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scalar {
    I8,
    I16,
    I32,
    I64,
    U8,
    U16,
    U32,
    U64,
    F32,
    F64,
    Bool,
    /// Plain `char` (signed on the supported targets).
    Char,
}

impl Scalar {
    pub const ALL: [Scalar; 12] = [
        Scalar::I8,
        Scalar::I16,
        Scalar::I32,
        Scalar::I64,
        Scalar::U8,
        Scalar::U16,
        Scalar::U32,
        Scalar::U64,
        Scalar::F32,
        Scalar::F64,
        Scalar::Bool,
        Scalar::Char,
    ];

    /// Encoded width in the fuzzer input, in bytes.
    pub fn width(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 | Scalar::Bool | Scalar::Char => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::I64 | Scalar::U64 | Scalar::F64 => 8,
        }
    }

    pub fn is_float(self) -> bool {
        matches!(self, Scalar::F32 | Scalar::F64)
    }

    pub fn is_signed_int(self) -> bool {
        matches!(self, Scalar::I8 | Scalar::I16 | Scalar::I32 | Scalar::I64 | Scalar::Char)
    }

    /// Fixed-width C spelling used in generated harness code.
    pub fn c_fixed(self) -> &'static str {
        match self {
            Scalar::I8 | Scalar::Char => "int8_t",
            Scalar::I16 => "int16_t",
            Scalar::I32 => "int32_t",
            Scalar::I64 => "int64_t",
            Scalar::U8 | Scalar::Bool => "uint8_t",
            Scalar::U16 => "uint16_t",
            Scalar::U32 => "uint32_t",
            Scalar::U64 => "uint64_t",
            Scalar::F32 => "float",
            Scalar::F64 => "double",
        }
    }

    /// Rust spelling of the same fixed-width representation.
    pub fn rust_ffi(self) -> &'static str {
        match self {
            Scalar::I8 | Scalar::Char => "i8",
            Scalar::I16 => "i16",
            Scalar::I32 => "i32",
            Scalar::I64 => "i64",
            Scalar::U8 | Scalar::Bool => "u8",
            Scalar::U16 => "u16",
            Scalar::U32 => "u32",
            Scalar::U64 => "u64",
            Scalar::F32 => "f32",
            Scalar::F64 => "f64",
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scalar::I8 => "i8",
            Scalar::I16 => "i16",
            Scalar::I32 => "i32",
            Scalar::I64 => "i64",
            Scalar::U8 => "u8",
            Scalar::U16 => "u16",
            Scalar::U32 => "u32",
            Scalar::U64 => "u64",
            Scalar::F32 => "f32",
            Scalar::F64 => "f64",
            Scalar::Bool => "bool",
            Scalar::Char => "char",
        };
        f.write_str(s)
    }
}

/// The closed set of C types supported at a fuzzing boundary.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CType {
    Scalar { scalar: Scalar },
    /// Pointer to a single scalar; the pointee is an in/out value.
    Pointer { pointee: Scalar, is_const: bool },
    Array { elem: Scalar, len: usize },
    /// NUL-terminated `char *`.
    Str { is_const: bool },
}

impl CType {
    pub fn scalar(s: Scalar) -> Self {
        CType::Scalar { scalar: s }
    }

    /// Whether the callee can observably modify the value through this parameter.
    pub fn is_writable(&self) -> bool {
        match self {
            CType::Scalar { .. } => false,
            CType::Pointer { is_const, .. } | CType::Str { is_const } => !is_const,
            CType::Array { .. } => true,
        }
    }
}

impl fmt::Display for CType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CType::Scalar { scalar } => write!(f, "{scalar}"),
            CType::Pointer { pointee, is_const: true } => write!(f, "*const {pointee}"),
            CType::Pointer { pointee, is_const: false } => write!(f, "*mut {pointee}"),
            CType::Array { elem, len } => write!(f, "[{elem}; {len}]"),
            CType::Str { .. } => write!(f, "cstr"),
        }
    }
}

/// A declared type as found in the source: void, supported, or not.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DeclType {
    Void,
    Supported { ctype: CType },
    Unsupported { spelling: String },
}

impl DeclType {
    pub fn supported(ctype: CType) -> Self {
        DeclType::Supported { ctype }
    }

    pub fn ctype(&self) -> Option<&CType> {
        match self {
            DeclType::Supported { ctype } => Some(ctype),
            _ => None,
        }
    }

    pub fn is_unsupported(&self) -> bool {
        matches!(self, DeclType::Unsupported { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub ty: DeclType,
}

/// A file-scope variable as seen from one function's interface.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalRef {
    pub name: String,
    pub ty: DeclType,
    /// Some function reachable from this one may write it.
    pub written: bool,
    pub is_const: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionInterface {
    pub name: String,
    pub return_type: DeclType,
    pub params: Vec<Param>,
    pub globals: Vec<GlobalRef>,
    pub macro_like: bool,
    pub includes: Vec<String>,
    pub is_static: bool,
    pub variadic: bool,
}

impl FunctionInterface {
    /// Reasons the harness generator cannot handle this interface.
    pub fn unsupported_reasons(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.macro_like {
            out.push(format!("`{}` is a function-like macro", self.name));
        }
        if self.variadic {
            out.push(format!("`{}` is variadic", self.name));
        }
        match &self.return_type {
            DeclType::Void => {}
            DeclType::Supported { ctype: CType::Scalar { .. } } => {}
            DeclType::Supported { ctype } => out.push(format!("return type {ctype} of `{}`", self.name)),
            DeclType::Unsupported { spelling } => out.push(format!("return type `{spelling}` of `{}`", self.name)),
        }
        for p in &self.params {
            if let DeclType::Unsupported { spelling } = &p.ty {
                out.push(format!("parameter `{}: {spelling}` of `{}`", p.name, self.name));
            }
            if p.ty == DeclType::Void {
                out.push(format!("parameter `{}` of `{}` has type void", p.name, self.name));
            }
        }
        for g in self.globals.iter().filter(|g| g.written && !g.is_const) {
            match &g.ty {
                DeclType::Supported { ctype: CType::Scalar { .. } | CType::Array { .. } } => {}
                DeclType::Supported { ctype } => out.push(format!("global `{}` of type {ctype}", g.name)),
                DeclType::Unsupported { spelling } => out.push(format!("global `{}` of type `{spelling}`", g.name)),
                DeclType::Void => out.push(format!("global `{}` of type void", g.name)),
            }
        }
        out
    }

    pub fn is_fuzzable(&self) -> bool {
        self.unsupported_reasons().is_empty()
    }

    /// Globals the harness seeds before each call and compares afterwards.
    pub fn managed_globals(&self) -> impl Iterator<Item = &GlobalRef> {
        self.globals.iter().filter(|g| g.written && !g.is_const)
    }
}

/// Size and complexity metrics of one source file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeMetrics {
    pub loc: usize,
    pub nloc: usize,
    pub tokens: usize,
    pub cc_avg: Option<f64>,
    pub cc_max: Option<u32>,
    pub functions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceUnit {
    /// Path relative to the corpus root, `/`-separated.
    pub id: String,
    pub group: String,
    pub text: String,
    pub interfaces: Vec<FunctionInterface>,
    pub warnings: Vec<String>,
}

impl SourceUnit {
    /// Builds a unit from in-memory text, extracting interfaces.
    pub fn from_text(id: impl Into<String>, group: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let parsed = super::parse::parse(&text);
        let interfaces = super::parse::interfaces_of(&parsed);
        SourceUnit { id: id.into(), group: group.into(), text, interfaces, warnings: parsed.warnings }
    }

    /// Functions the differential fuzzer checks: externally callable, not `main`,
    /// falling back to `static` definitions when the file exports nothing.
    pub fn fuzz_targets(&self) -> Vec<&FunctionInterface> {
        let defs: Vec<&FunctionInterface> =
            self.interfaces.iter().filter(|f| !f.macro_like && f.name != "main").collect();
        let exported: Vec<&FunctionInterface> = defs.iter().copied().filter(|f| !f.is_static).collect();
        if exported.is_empty() {
            defs
        } else {
            exported
        }
    }

    /// True when every fuzz target has a supported interface and there is at least one.
    pub fn is_fuzzable(&self) -> bool {
        let targets = self.fuzz_targets();
        !targets.is_empty() && targets.iter().all(|f| f.is_fuzzable())
    }
}
