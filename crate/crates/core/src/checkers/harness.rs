//! Source generation for differential-fuzzing harnesses.
//!
//! Side A is always the original C file. Each side B is either the Rust
//! translation (reached through a generated FFI shim appended to it) or a
//! perturbed copy of the C file. Every side exposes, per target function `k`,
//! `int fz_side_<side>_<k>(const void *in, void *out)` over shared
//! `fz_in_<k>` / `fz_out_<k>` structs; the driver decodes fuzzer bytes into
//! `fz_in_<k>`, calls side A and then each side B, and compares the outputs.

use super::layout::{input_layout, input_len, Field, FieldRole};
use crate::corpus::{CType, DeclType, FunctionInterface, Scalar};
use std::fmt::Write;

/// One function under test together with its input layout.
#[derive(Debug, Clone)]
pub struct Target {
    pub iface: FunctionInterface,
    pub fields: Vec<Field>,
}

impl Target {
    pub fn new(iface: &FunctionInterface, string_cap: usize) -> Option<Self> {
        Some(Target { fields: input_layout(iface, string_cap)?, iface: iface.clone() })
    }

    pub fn input_len(&self) -> usize {
        input_len(&self.fields)
    }

    /// Output members: return value, writable parameters, managed globals.
    pub fn outputs(&self) -> Vec<(String, String, CType)> {
        let mut out = Vec::new();
        if let DeclType::Supported { ctype } = &self.iface.return_type {
            out.push(("return".to_string(), "ret".to_string(), ctype.clone()));
        }
        for f in &self.fields {
            if let FieldRole::Param(_) = f.role {
                if f.ctype.is_writable() {
                    out.push((f.display.clone(), f.member.clone(), f.ctype.clone()));
                }
            }
        }
        for f in &self.fields {
            if let FieldRole::Global(_) = f.role {
                out.push((f.display.clone(), f.member.clone(), f.ctype.clone()));
            }
        }
        out
    }
}

/// How a C side B reaches the target: callee and global names in the variant
/// file, and the parameter permutation (`perm[i]` = original index passed at
/// position `i`).
#[derive(Debug, Clone)]
pub struct CCall {
    pub callee: String,
    pub globals: Vec<String>,
    pub perm: Vec<usize>,
}

fn c_scalar(s: Scalar) -> &'static str {
    match s {
        Scalar::Bool => "_Bool",
        other => other.c_fixed(),
    }
}

fn rust_scalar(s: Scalar) -> &'static str {
    match s {
        Scalar::Bool => "bool",
        Scalar::Char => "CChar",
        other => other.rust_ffi(),
    }
}

fn c_member(t: &CType, name: &str) -> String {
    match t {
        CType::Scalar { scalar } | CType::Pointer { pointee: scalar, .. } => format!("{} {name};", c_scalar(*scalar)),
        CType::Array { elem, len } => format!("{} {name}[{len}];", c_scalar(*elem)),
        CType::Str { .. } => format!("char {name}[FZ_STRCAP + 1];"),
    }
}

fn rust_member(t: &CType, name: &str) -> String {
    match t {
        CType::Scalar { scalar } | CType::Pointer { pointee: scalar, .. } => format!("pub {name}: {},", rust_scalar(*scalar)),
        CType::Array { elem, len } => format!("pub {name}: [{}; {len}],", rust_scalar(*elem)),
        CType::Str { .. } => format!("pub {name}: [u8; FZ_STRCAP + 1],"),
    }
}

/// Shared struct declarations (`fz_types.h`).
pub fn types_header(targets: &[Target], string_cap: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "#ifndef FZ_TYPES_H\n#define FZ_TYPES_H\n#include <stdint.h>\n#define FZ_STRCAP {string_cap}");
    for (k, t) in targets.iter().enumerate() {
        let _ = writeln!(s, "typedef struct {{");
        for f in &t.fields {
            let _ = writeln!(s, "  {}", c_member(&f.ctype, &f.member));
        }
        if t.fields.is_empty() {
            let _ = writeln!(s, "  char fz_unused;");
        }
        let _ = writeln!(s, "}} fz_in_{k};\ntypedef struct {{");
        let outs = t.outputs();
        for (_, m, ty) in &outs {
            let _ = writeln!(s, "  {}", c_member(ty, m));
        }
        if outs.is_empty() {
            let _ = writeln!(s, "  char fz_unused;");
        }
        let _ = writeln!(s, "}} fz_out_{k};");
    }
    s.push_str("#endif\n");
    s
}

/// Wrapper translation unit for a C side: renames the file's symbols with
/// `prefix`, includes the source, and defines the per-target entry points.
pub fn c_side_source(side: &str, prefix: &str, source_file: &str, renames: &[String], targets: &[Target], calls: &[CCall]) -> String {
    let mut s = String::new();
    s.push_str("#include <stdint.h>\n#include <stdio.h>\n#include <stdlib.h>\n#include <string.h>\n#include \"fz_types.h\"\n");
    s.push_str("#define FZ_STRBUF (4 * FZ_STRCAP + 1)\n");
    s.push_str("extern void fz_c_exit(int) __attribute__((noreturn));\n#define exit fz_c_exit\n");
    for r in renames {
        let _ = writeln!(s, "#define {r} {prefix}{r}");
    }
    let _ = writeln!(s, "#include \"{source_file}\"");
    for r in renames {
        let _ = writeln!(s, "#undef {r}");
    }
    s.push_str("#undef exit\n");
    let pre = |n: &str| if renames.iter().any(|r| r == n) { format!("{prefix}{n}") } else { n.to_string() };
    for (k, (t, call)) in targets.iter().zip(calls).enumerate() {
        let _ = writeln!(s, "int fz_side_{side}_{k}(const void *vin, void *vout) {{");
        let _ = writeln!(s, "  const fz_in_{k} *in = (const fz_in_{k} *)vin;\n  fz_out_{k} *out = (fz_out_{k} *)vout;\n  (void)in; (void)out;");
        let mut args: Vec<String> = vec![String::new(); t.iface.params.len()];
        for f in &t.fields {
            match f.role {
                FieldRole::Global(j) => {
                    let g = pre(&call.globals[j]);
                    match f.ctype {
                        CType::Array { .. } => {
                            let _ = writeln!(s, "  memcpy({g}, in->{m}, sizeof(in->{m}));", m = f.member);
                        }
                        _ => {
                            let _ = writeln!(s, "  {g} = in->{};", f.member);
                        }
                    }
                }
                FieldRole::Param(i) => {
                    let v = format!("fz_{}", f.member);
                    match &f.ctype {
                        CType::Scalar { scalar } => {
                            let _ = writeln!(s, "  {} {v} = in->{};", c_scalar(*scalar), f.member);
                            args[i] = v;
                        }
                        CType::Pointer { pointee, .. } => {
                            let _ = writeln!(s, "  {} {v} = in->{};", c_scalar(*pointee), f.member);
                            args[i] = format!("&{v}");
                        }
                        CType::Array { elem, len } => {
                            let _ = writeln!(s, "  {} {v}[{len}];\n  memcpy({v}, in->{m}, sizeof({v}));", c_scalar(*elem), m = f.member);
                            args[i] = v;
                        }
                        CType::Str { .. } => {
                            let _ = writeln!(
                                s,
                                "  char {v}[FZ_STRBUF];\n  memset({v}, 0, sizeof({v}));\n  memcpy({v}, in->{m}, FZ_STRCAP + 1);",
                                m = f.member
                            );
                            args[i] = v;
                        }
                    }
                }
            }
        }
        let ordered: Vec<&str> = call.perm.iter().map(|&i| args[i].as_str()).collect();
        let invoke = format!("{}({})", pre(&call.callee), ordered.join(", "));
        if t.iface.return_type == DeclType::Void {
            let _ = writeln!(s, "  {invoke};");
        } else {
            let _ = writeln!(s, "  out->ret = {invoke};");
        }
        for (_, m, ty) in t.outputs() {
            if m == "ret" {
                continue;
            }
            let src = if let Some(j) = m.strip_prefix('g') {
                pre(&call.globals[j.parse::<usize>().unwrap()])
            } else {
                format!("fz_{m}")
            };
            match ty {
                CType::Scalar { .. } | CType::Pointer { .. } => {
                    let _ = writeln!(s, "  out->{m} = {src};");
                }
                CType::Array { .. } => {
                    let _ = writeln!(s, "  memcpy(out->{m}, {src}, sizeof(out->{m}));");
                }
                CType::Str { .. } => {
                    let _ = writeln!(s, "  memcpy(out->{m}, {src}, FZ_STRCAP + 1);\n  out->{m}[FZ_STRCAP] = 0;");
                }
            }
        }
        s.push_str("  return 0;\n}\n");
    }
    s
}

const SHIM_SUPPORT: &str = r#"    use std::ffi::{c_char, c_void, CStr, CString};
    use std::sync::atomic::*;
    use std::sync::Mutex;

    #[repr(transparent)]
    #[derive(Clone, Copy, PartialEq, Default, Debug)]
    pub struct CChar(pub i8);

    pub trait ConvFrom<S>: Sized {
        fn conv(v: S) -> Option<Self>;
    }
    macro_rules! conv_int {
        (@row $s:ty; $($d:ty),*) => { $( impl ConvFrom<$s> for $d { fn conv(v: $s) -> Option<$d> { <$d>::try_from(v).ok() } } )* };
        ($($s:ty),*) => { $( conv_int!(@row $s; i8, i16, i32, i64, i128, isize, u8, u16, u32, u64, u128, usize); )* };
    }
    conv_int!(i8, i16, i32, i64, i128, isize, u8, u16, u32, u64, u128, usize);
    macro_rules! conv_bool {
        ($($d:ty),*) => { $(
            impl ConvFrom<bool> for $d { fn conv(v: bool) -> Option<$d> { Some(v as u8 as $d) } }
            impl ConvFrom<$d> for bool { fn conv(v: $d) -> Option<bool> { if v == 0 as $d { Some(false) } else if v == 1 as $d { Some(true) } else { None } } }
        )* };
    }
    conv_bool!(i8, i16, i32, i64, i128, isize, u8, u16, u32, u64, u128, usize);
    impl ConvFrom<bool> for bool { fn conv(v: bool) -> Option<bool> { Some(v) } }
    impl ConvFrom<f32> for f32 { fn conv(v: f32) -> Option<f32> { Some(v) } }
    impl ConvFrom<f64> for f64 { fn conv(v: f64) -> Option<f64> { Some(v) } }
    impl ConvFrom<f32> for f64 { fn conv(v: f32) -> Option<f64> { Some(v as f64) } }
    impl ConvFrom<f64> for f32 { fn conv(v: f64) -> Option<f32> { Some(v as f32) } }
    impl ConvFrom<CChar> for CChar { fn conv(v: CChar) -> Option<CChar> { Some(v) } }
    impl ConvFrom<CChar> for u8 { fn conv(v: CChar) -> Option<u8> { Some(v.0 as u8) } }
    impl ConvFrom<CChar> for char { fn conv(v: CChar) -> Option<char> { Some(v.0 as u8 as char) } }
    impl ConvFrom<CChar> for bool { fn conv(v: CChar) -> Option<bool> { bool::conv(v.0) } }
    impl ConvFrom<u8> for CChar { fn conv(v: u8) -> Option<CChar> { Some(CChar(v as i8)) } }
    impl ConvFrom<char> for CChar { fn conv(v: char) -> Option<CChar> { if (v as u32) < 256 { Some(CChar(v as u32 as u8 as i8)) } else { None } } }
    impl ConvFrom<bool> for CChar { fn conv(v: bool) -> Option<CChar> { Some(CChar(v as i8)) } }
    macro_rules! conv_cchar {
        ($($t:ty),*) => { $(
            impl ConvFrom<CChar> for $t { fn conv(v: CChar) -> Option<$t> { <$t>::try_from(v.0).ok() } }
            impl ConvFrom<$t> for CChar { fn conv(v: $t) -> Option<CChar> { i8::try_from(v).ok().map(CChar).or_else(|| u8::try_from(v).ok().map(|b| CChar(b as i8))) } }
        )* };
    }
    conv_cchar!(i8, i16, i32, i64, i128, isize, u16, u32, u64, u128, usize);

    pub trait ToC<D> {
        fn to_c(self) -> Option<D>;
    }
    impl<T, D: ConvFrom<T>> ToC<D> for T {
        fn to_c(self) -> Option<D> { D::conv(self) }
    }

    pub trait FromC<'a, S>: Sized {
        fn from_c(s: &'a mut S) -> Option<Self>;
    }
    pub struct Val<S>(pub S);
    impl<'a, S: Copy, T: ConvFrom<S>> FromC<'a, Val<S>> for T {
        fn from_c(s: &'a mut Val<S>) -> Option<T> { T::conv(s.0) }
    }

    pub struct PtrSlot<T>(pub T);
    impl<'a, T> FromC<'a, PtrSlot<T>> for &'a mut T { fn from_c(s: &'a mut PtrSlot<T>) -> Option<Self> { Some(&mut s.0) } }
    impl<'a, T> FromC<'a, PtrSlot<T>> for &'a T { fn from_c(s: &'a mut PtrSlot<T>) -> Option<Self> { Some(&s.0) } }
    impl<'a, T> FromC<'a, PtrSlot<T>> for Option<&'a mut T> { fn from_c(s: &'a mut PtrSlot<T>) -> Option<Self> { Some(Some(&mut s.0)) } }
    impl<'a, T> FromC<'a, PtrSlot<T>> for Option<&'a T> { fn from_c(s: &'a mut PtrSlot<T>) -> Option<Self> { Some(Some(&s.0)) } }
    impl<'a, T> FromC<'a, PtrSlot<T>> for *mut T { fn from_c(s: &'a mut PtrSlot<T>) -> Option<Self> { Some(&mut s.0 as *mut T) } }
    impl<'a, T> FromC<'a, PtrSlot<T>> for *const T { fn from_c(s: &'a mut PtrSlot<T>) -> Option<Self> { Some(&s.0 as *const T) } }
    impl<'a, T> FromC<'a, PtrSlot<T>> for &'a mut [T] { fn from_c(s: &'a mut PtrSlot<T>) -> Option<Self> { Some(std::slice::from_mut(&mut s.0)) } }
    impl<'a, T> FromC<'a, PtrSlot<T>> for &'a [T] { fn from_c(s: &'a mut PtrSlot<T>) -> Option<Self> { Some(std::slice::from_ref(&s.0)) } }

    pub struct ArrSlot<T, const N: usize>(pub [T; N]);
    impl<'a, T, const N: usize> FromC<'a, ArrSlot<T, N>> for &'a mut [T; N] { fn from_c(s: &'a mut ArrSlot<T, N>) -> Option<Self> { Some(&mut s.0) } }
    impl<'a, T, const N: usize> FromC<'a, ArrSlot<T, N>> for &'a [T; N] { fn from_c(s: &'a mut ArrSlot<T, N>) -> Option<Self> { Some(&s.0) } }
    impl<'a, T, const N: usize> FromC<'a, ArrSlot<T, N>> for &'a mut [T] { fn from_c(s: &'a mut ArrSlot<T, N>) -> Option<Self> { Some(&mut s.0[..]) } }
    impl<'a, T, const N: usize> FromC<'a, ArrSlot<T, N>> for &'a [T] { fn from_c(s: &'a mut ArrSlot<T, N>) -> Option<Self> { Some(&s.0[..]) } }
    impl<'a, T, const N: usize> FromC<'a, ArrSlot<T, N>> for *mut T { fn from_c(s: &'a mut ArrSlot<T, N>) -> Option<Self> { Some(s.0.as_mut_ptr()) } }
    impl<'a, T, const N: usize> FromC<'a, ArrSlot<T, N>> for *const T { fn from_c(s: &'a mut ArrSlot<T, N>) -> Option<Self> { Some(s.0.as_ptr()) } }
    impl<'a, T: Copy, const N: usize> FromC<'a, ArrSlot<T, N>> for [T; N] { fn from_c(s: &'a mut ArrSlot<T, N>) -> Option<Self> { Some(s.0) } }
    impl<'a, T: Clone, const N: usize> FromC<'a, ArrSlot<T, N>> for Vec<T> { fn from_c(s: &'a mut ArrSlot<T, N>) -> Option<Self> { Some(s.0.to_vec()) } }
    impl<'a, const N: usize> FromC<'a, ArrSlot<CChar, N>> for &'a mut [u8; N] { fn from_c(s: &'a mut ArrSlot<CChar, N>) -> Option<Self> { Some(unsafe { &mut *(&mut s.0 as *mut [CChar; N] as *mut [u8; N]) }) } }
    impl<'a, const N: usize> FromC<'a, ArrSlot<CChar, N>> for &'a [u8; N] { fn from_c(s: &'a mut ArrSlot<CChar, N>) -> Option<Self> { Some(unsafe { &*(&s.0 as *const [CChar; N] as *const [u8; N]) }) } }
    impl<'a, const N: usize> FromC<'a, ArrSlot<CChar, N>> for &'a mut [u8] { fn from_c(s: &'a mut ArrSlot<CChar, N>) -> Option<Self> { Some(unsafe { &mut *(&mut s.0 as *mut [CChar; N] as *mut [u8; N]) }) } }
    impl<'a, const N: usize> FromC<'a, ArrSlot<CChar, N>> for &'a [u8] { fn from_c(s: &'a mut ArrSlot<CChar, N>) -> Option<Self> { Some(unsafe { &*(&s.0 as *const [CChar; N] as *const [u8; N]) }) } }
    impl<'a, const N: usize> FromC<'a, ArrSlot<CChar, N>> for &'a mut [i8; N] { fn from_c(s: &'a mut ArrSlot<CChar, N>) -> Option<Self> { Some(unsafe { &mut *(&mut s.0 as *mut [CChar; N] as *mut [i8; N]) }) } }
    impl<'a, const N: usize> FromC<'a, ArrSlot<CChar, N>> for &'a [i8; N] { fn from_c(s: &'a mut ArrSlot<CChar, N>) -> Option<Self> { Some(unsafe { &*(&s.0 as *const [CChar; N] as *const [i8; N]) }) } }
    impl<'a, const N: usize> FromC<'a, ArrSlot<CChar, N>> for &'a mut [i8] { fn from_c(s: &'a mut ArrSlot<CChar, N>) -> Option<Self> { Some(unsafe { &mut *(&mut s.0 as *mut [CChar; N] as *mut [i8; N]) }) } }
    impl<'a, const N: usize> FromC<'a, ArrSlot<CChar, N>> for &'a [i8] { fn from_c(s: &'a mut ArrSlot<CChar, N>) -> Option<Self> { Some(unsafe { &*(&s.0 as *const [CChar; N] as *const [i8; N]) }) } }
    impl<'a, const N: usize> FromC<'a, ArrSlot<CChar, N>> for *mut u8 { fn from_c(s: &'a mut ArrSlot<CChar, N>) -> Option<Self> { Some(s.0.as_mut_ptr() as *mut u8) } }
    impl<'a, const N: usize> FromC<'a, ArrSlot<CChar, N>> for *const u8 { fn from_c(s: &'a mut ArrSlot<CChar, N>) -> Option<Self> { Some(s.0.as_ptr() as *const u8) } }
    impl<'a, const N: usize> FromC<'a, ArrSlot<CChar, N>> for *mut i8 { fn from_c(s: &'a mut ArrSlot<CChar, N>) -> Option<Self> { Some(s.0.as_mut_ptr() as *mut i8) } }
    impl<'a, const N: usize> FromC<'a, ArrSlot<CChar, N>> for *const i8 { fn from_c(s: &'a mut ArrSlot<CChar, N>) -> Option<Self> { Some(s.0.as_ptr() as *const i8) } }

    pub struct StrSlot {
        pub buf: [u8; FZ_STRCAP + 1],
        string: Option<String>,
        bytes: Option<Vec<u8>>,
        cstring: Option<CString>,
    }
    impl StrSlot {
        pub fn new(b: &[u8; FZ_STRCAP + 1]) -> Self { StrSlot { buf: *b, string: None, bytes: None, cstring: None } }
        fn len(&self) -> usize { self.buf.iter().position(|&c| c == 0).unwrap_or(FZ_STRCAP) }
        fn store(&mut self, b: &[u8]) {
            let n = b.iter().position(|&c| c == 0).unwrap_or(b.len()).min(FZ_STRCAP);
            self.buf[..n].copy_from_slice(&b[..n]);
            self.buf[n] = 0;
        }
        pub fn finish(&mut self) {
            if let Some(s) = self.string.take() { self.store(s.as_bytes()); }
            if let Some(v) = self.bytes.take() { self.store(&v); }
            self.buf[FZ_STRCAP] = 0;
        }
    }
    impl<'a> FromC<'a, StrSlot> for &'a str { fn from_c(s: &'a mut StrSlot) -> Option<Self> { let n = s.len(); std::str::from_utf8(&s.buf[..n]).ok() } }
    impl<'a> FromC<'a, StrSlot> for Option<&'a str> { fn from_c(s: &'a mut StrSlot) -> Option<Self> { let n = s.len(); std::str::from_utf8(&s.buf[..n]).ok().map(Some) } }
    impl<'a> FromC<'a, StrSlot> for &'a mut str { fn from_c(s: &'a mut StrSlot) -> Option<Self> { let n = s.len(); std::str::from_utf8_mut(&mut s.buf[..n]).ok() } }
    impl<'a> FromC<'a, StrSlot> for String { fn from_c(s: &'a mut StrSlot) -> Option<Self> { let n = s.len(); String::from_utf8(s.buf[..n].to_vec()).ok() } }
    impl<'a> FromC<'a, StrSlot> for &'a String { fn from_c(s: &'a mut StrSlot) -> Option<Self> { let n = s.len(); s.string = Some(String::from_utf8(s.buf[..n].to_vec()).ok()?); s.string.as_ref() } }
    impl<'a> FromC<'a, StrSlot> for &'a mut String { fn from_c(s: &'a mut StrSlot) -> Option<Self> { let n = s.len(); s.string = Some(String::from_utf8(s.buf[..n].to_vec()).ok()?); s.string.as_mut() } }
    impl<'a> FromC<'a, StrSlot> for Vec<u8> { fn from_c(s: &'a mut StrSlot) -> Option<Self> { let n = s.len(); Some(s.buf[..n].to_vec()) } }
    impl<'a> FromC<'a, StrSlot> for &'a mut Vec<u8> { fn from_c(s: &'a mut StrSlot) -> Option<Self> { let n = s.len(); s.bytes = Some(s.buf[..n].to_vec()); s.bytes.as_mut() } }
    impl<'a> FromC<'a, StrSlot> for &'a Vec<u8> { fn from_c(s: &'a mut StrSlot) -> Option<Self> { let n = s.len(); s.bytes = Some(s.buf[..n].to_vec()); s.bytes.as_ref() } }
    impl<'a> FromC<'a, StrSlot> for &'a [u8] { fn from_c(s: &'a mut StrSlot) -> Option<Self> { let n = s.len(); Some(&s.buf[..n]) } }
    impl<'a> FromC<'a, StrSlot> for &'a mut [u8] { fn from_c(s: &'a mut StrSlot) -> Option<Self> { let n = s.len(); Some(&mut s.buf[..n]) } }
    impl<'a> FromC<'a, StrSlot> for &'a CStr { fn from_c(s: &'a mut StrSlot) -> Option<Self> { CStr::from_bytes_until_nul(&s.buf).ok() } }
    impl<'a> FromC<'a, StrSlot> for CString { fn from_c(s: &'a mut StrSlot) -> Option<Self> { Some(CStr::from_bytes_until_nul(&s.buf).ok()?.to_owned()) } }
    impl<'a> FromC<'a, StrSlot> for &'a CString { fn from_c(s: &'a mut StrSlot) -> Option<Self> { s.cstring = Some(CStr::from_bytes_until_nul(&s.buf).ok()?.to_owned()); s.cstring.as_ref() } }
    impl<'a> FromC<'a, StrSlot> for *const c_char { fn from_c(s: &'a mut StrSlot) -> Option<Self> { Some(s.buf.as_ptr() as *const c_char) } }
    impl<'a> FromC<'a, StrSlot> for *mut c_char { fn from_c(s: &'a mut StrSlot) -> Option<Self> { Some(s.buf.as_mut_ptr() as *mut c_char) } }
    impl<'a> FromC<'a, StrSlot> for *const u8 { fn from_c(s: &'a mut StrSlot) -> Option<Self> { Some(s.buf.as_ptr()) } }
    impl<'a> FromC<'a, StrSlot> for *mut u8 { fn from_c(s: &'a mut StrSlot) -> Option<Self> { Some(s.buf.as_mut_ptr()) } }

    pub trait GlobalSlot<S> {
        unsafe fn fz_set(p: *const Self, v: S) -> Option<()>;
        unsafe fn fz_get(p: *const Self) -> Option<S>;
    }
    macro_rules! prim_global {
        ($($t:ty),*) => { $(
            impl<S: Copy> GlobalSlot<S> for $t where $t: ConvFrom<S>, S: ConvFrom<$t> {
                unsafe fn fz_set(p: *const Self, v: S) -> Option<()> { unsafe { (p as *mut $t).write(<$t>::conv(v)?) }; Some(()) }
                unsafe fn fz_get(p: *const Self) -> Option<S> { S::conv(unsafe { p.read() }) }
            }
        )* };
    }
    prim_global!(i8, i16, i32, i64, i128, isize, u8, u16, u32, u64, u128, usize, f32, f64, bool, char, CChar);
    impl<S: Copy + Default, T: Copy + ConvFrom<S>, const N: usize> GlobalSlot<[S; N]> for [T; N] where S: ConvFrom<T> {
        unsafe fn fz_set(p: *const Self, v: [S; N]) -> Option<()> {
            let mut tmp = unsafe { p.read() };
            for i in 0..N { tmp[i] = T::conv(v[i])?; }
            unsafe { (p as *mut [T; N]).write(tmp) };
            Some(())
        }
        unsafe fn fz_get(p: *const Self) -> Option<[S; N]> {
            let cur = unsafe { p.read() };
            let mut out = [S::default(); N];
            for i in 0..N { out[i] = S::conv(cur[i])?; }
            Some(out)
        }
    }
    macro_rules! atomic_global {
        ($($a:ty => $t:ty),*) => { $(
            impl<S: Copy> GlobalSlot<S> for $a where $t: ConvFrom<S>, S: ConvFrom<$t> {
                unsafe fn fz_set(p: *const Self, v: S) -> Option<()> { unsafe { (*p).store(<$t>::conv(v)?, Ordering::SeqCst) }; Some(()) }
                unsafe fn fz_get(p: *const Self) -> Option<S> { S::conv(unsafe { (*p).load(Ordering::SeqCst) }) }
            }
        )* };
    }
    atomic_global!(AtomicI8 => i8, AtomicI16 => i16, AtomicI32 => i32, AtomicI64 => i64, AtomicIsize => isize,
        AtomicU8 => u8, AtomicU16 => u16, AtomicU32 => u32, AtomicU64 => u64, AtomicUsize => usize, AtomicBool => bool);
    impl<S: Copy, T: Copy + ConvFrom<S>> GlobalSlot<S> for Mutex<T> where S: ConvFrom<T> {
        unsafe fn fz_set(p: *const Self, v: S) -> Option<()> {
            let m = unsafe { &*p };
            *m.lock().unwrap_or_else(|e| e.into_inner()) = T::conv(v)?;
            Some(())
        }
        unsafe fn fz_get(p: *const Self) -> Option<S> {
            let m = unsafe { &*p };
            S::conv(*m.lock().unwrap_or_else(|e| e.into_inner()))
        }
    }

    thread_local! {
        static FZ_LAST_PANIC: std::cell::RefCell<String> = const { std::cell::RefCell::new(String::new()) };
    }
    pub fn fz_init() {
        static ONCE: std::sync::Once = std::sync::Once::new();
        ONCE.call_once(|| {
            std::panic::set_hook(Box::new(|info| {
                let msg = info.payload_as_str().unwrap_or("explicit panic").to_string();
                let at = info.location().map(|l| format!(" (line {})", l.line())).unwrap_or_default();
                FZ_LAST_PANIC.with(|c| *c.borrow_mut() = format!("{msg}{at}"));
            }));
        });
    }
    #[no_mangle]
    pub unsafe extern "C" fn fz_rust_last_panic(buf: *mut u8, cap: usize) -> usize {
        FZ_LAST_PANIC.with(|c| {
            let s = c.borrow();
            let n = s.len().min(cap.saturating_sub(1));
            unsafe {
                std::ptr::copy_nonoverlapping(s.as_ptr(), buf, n);
                *buf.add(n) = 0;
            }
            n
        })
    }
    #[allow(unused_imports)]
    use c_void as _;
"#;

/// FFI shim appended to a Rust translation as a child module. `side` names the
/// entry points (`fz_side_<side>_<k>`).
pub fn rust_shim(side: &str, targets: &[Target], string_cap: usize) -> String {
    let mut s = String::new();
    s.push_str("\n\n#[allow(warnings, clippy::all, unused, non_snake_case, non_camel_case_types)]\nmod __fz_shim {\n");
    let _ = writeln!(s, "    pub const FZ_STRCAP: usize = {string_cap};");
    s.push_str(SHIM_SUPPORT);
    for (k, t) in targets.iter().enumerate() {
        let _ = writeln!(s, "    #[repr(C)]\n    pub struct FzIn{k} {{");
        for f in &t.fields {
            let _ = writeln!(s, "        {}", rust_member(&f.ctype, &f.member));
        }
        if t.fields.is_empty() {
            s.push_str("        pub fz_unused: u8,\n");
        }
        let _ = writeln!(s, "    }}\n    #[repr(C)]\n    pub struct FzOut{k} {{");
        let outs = t.outputs();
        for (_, m, ty) in &outs {
            let _ = writeln!(s, "        {}", rust_member(ty, m));
        }
        if outs.is_empty() {
            s.push_str("        pub fz_unused: u8,\n");
        }
        s.push_str("    }\n");
        let _ = writeln!(
            s,
            "    #[no_mangle]\n    pub unsafe extern \"C\" fn fz_side_{side}_{k}(vi: *const c_void, vo: *mut c_void) -> i32 {{"
        );
        let _ = writeln!(s, "        fz_init();\n        let i = unsafe {{ &*(vi as *const FzIn{k}) }};\n        let o = unsafe {{ &mut *(vo as *mut FzOut{k}) }};");
        let globals: Vec<&str> = t.iface.managed_globals().map(|g| g.name.as_str()).collect();
        let mut args = Vec::new();
        for f in &t.fields {
            match f.role {
                FieldRole::Global(j) => {
                    let _ = writeln!(
                        s,
                        "        if unsafe {{ GlobalSlot::fz_set(&raw const super::{}, i.{}) }}.is_none() {{ return 2; }}",
                        globals[j], f.member
                    );
                }
                FieldRole::Param(_) => {
                    let slot = format!("s_{}", f.member);
                    let init = match f.ctype {
                        CType::Scalar { .. } => format!("Val(i.{})", f.member),
                        CType::Pointer { .. } => format!("PtrSlot(i.{})", f.member),
                        CType::Array { .. } => format!("ArrSlot(i.{})", f.member),
                        CType::Str { .. } => format!("StrSlot::new(&i.{})", f.member),
                    };
                    let _ = writeln!(s, "        let mut {slot} = {init};");
                    args.push(format!("FromC::from_c(&mut {slot}).ok_or(2)?"));
                }
            }
        }
        let call = format!("super::{}({})", t.iface.name, args.join(", "));
        let is_void = t.iface.return_type == DeclType::Void;
        let _ = writeln!(s, "        let r = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| -> Result<_, i32> {{");
        if is_void {
            let _ = writeln!(s, "            let _ = unsafe {{ {call} }};\n            Ok(())");
        } else {
            let _ = writeln!(s, "            let v = unsafe {{ {call} }};\n            Ok(v)");
        }
        s.push_str("        }));\n        let ret = match r { Err(_) => return 1, Ok(Err(c)) => return c, Ok(Ok(v)) => v };\n");
        if is_void {
            s.push_str("        let _ = ret;\n");
        } else {
            s.push_str("        o.ret = match ToC::to_c(ret) { Some(v) => v, None => return 3 };\n");
        }
        for (_, m, ty) in &outs {
            if m == "ret" {
                continue;
            }
            if let Some(j) = m.strip_prefix('g') {
                let g = globals[j.parse::<usize>().unwrap()];
                let _ = writeln!(
                    s,
                    "        o.{m} = match unsafe {{ GlobalSlot::fz_get(&raw const super::{g}) }} {{ Some(v) => v, None => return 3 }};"
                );
            } else if matches!(ty, CType::Str { .. }) {
                let _ = writeln!(s, "        s_{m}.finish();\n        o.{m} = s_{m}.buf;");
            } else {
                let _ = writeln!(s, "        o.{m} = s_{m}.0;");
            }
        }
        s.push_str("        0\n    }\n");
    }
    s.push_str("}\n");
    s
}

fn c_print_scalar(s: Scalar, expr: &str, canonical: bool) -> String {
    match s {
        Scalar::I8 | Scalar::I16 | Scalar::I32 | Scalar::I64 | Scalar::Char => {
            format!("fprintf(stderr, \"%lld\", (long long)({expr}));")
        }
        Scalar::U8 | Scalar::U16 | Scalar::U32 | Scalar::U64 => {
            format!("fprintf(stderr, \"%llu\", (unsigned long long)({expr}));")
        }
        Scalar::Bool => format!("fputs(({expr}) ? \"true\" : \"false\", stderr);"),
        Scalar::F32 if canonical => format!("{{ uint32_t b; float v = ({expr}); memcpy(&b, &v, 4); fprintf(stderr, \"0x%08x\", b); }}"),
        Scalar::F64 if canonical => {
            format!("{{ uint64_t b; double v = ({expr}); memcpy(&b, &v, 8); fprintf(stderr, \"0x%016llx\", (unsigned long long)b); }}")
        }
        Scalar::F32 => format!("fprintf(stderr, \"%.9g\", (double)({expr}));"),
        Scalar::F64 => format!("fprintf(stderr, \"%.17g\", ({expr}));"),
    }
}

fn c_print_value(t: &CType, expr: &str, canonical: bool) -> String {
    match t {
        CType::Scalar { scalar } | CType::Pointer { pointee: scalar, .. } => c_print_scalar(*scalar, expr, canonical),
        CType::Array { elem, len } => format!(
            "fputc('[', stderr); for (int fz_i = 0; fz_i < {len}; fz_i++) {{ if (fz_i) fputs(\", \", stderr); {} }} fputc(']', stderr);",
            c_print_scalar(*elem, &format!("{expr}[fz_i]"), canonical)
        ),
        CType::Str { .. } => format!("fz_print_str({expr});"),
    }
}

fn c_equal(t: &CType, a: &str, b: &str) -> String {
    let scalar_eq = |s: Scalar, x: &str, y: &str| match s {
        Scalar::F32 => format!("fz_feq32({x}, {y})"),
        Scalar::F64 => format!("fz_feq64({x}, {y})"),
        _ => format!("(({x}) == ({y}))"),
    };
    match t {
        CType::Scalar { scalar } | CType::Pointer { pointee: scalar, .. } => scalar_eq(*scalar, a, b),
        CType::Array { elem, len } => {
            format!(
                "({{ int fz_eq = 1; for (int fz_i = 0; fz_i < {len}; fz_i++) if (!{}) fz_eq = 0; fz_eq; }})",
                scalar_eq(*elem, &format!("{a}[fz_i]"), &format!("{b}[fz_i]"))
            )
        }
        CType::Str { .. } => format!("(strncmp({a}, {b}, FZ_STRCAP + 1) == 0)"),
    }
}

const DRIVER_PRELUDE: &str = r#"#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <signal.h>
#include <setjmp.h>
#include <sys/time.h>
#include "fz_types.h"

extern size_t fz_rust_last_panic(char *buf, size_t cap) __attribute__((weak));

static sigjmp_buf fz_jmp;
static volatile sig_atomic_t fz_active;
static volatile sig_atomic_t fz_phase;
static long fz_call_ms = 1000;
static unsigned long long fz_disabled;
static double fz_ulps_f32 = 0, fz_ulps_f64 = 0;
static int fz_trace;
static const int fz_sigs[] = {SIGFPE, SIGSEGV, SIGBUS, SIGILL, SIGABRT, SIGVTALRM};
#define FZ_NSIG 6

void fz_c_exit(int code) {
  if (fz_active) { fz_active = 0; siglongjmp(fz_jmp, 1000 + (code & 0xff)); }
  exit(code);
}

static void fz_on_signal(int sig) {
  if (fz_active) { fz_active = 0; siglongjmp(fz_jmp, sig); }
  signal(sig, SIG_DFL);
  raise(sig);
}

static int fz_guarded(int (*fn)(const void *, void *), const void *in, void *out, int *trap) {
  struct sigaction sa, old[FZ_NSIG];
  memset(&sa, 0, sizeof sa);
  sa.sa_handler = fz_on_signal;
  sigemptyset(&sa.sa_mask);
  sa.sa_flags = SA_NODEFER | SA_ONSTACK;
  for (int i = 0; i < FZ_NSIG; i++) sigaction(fz_sigs[i], &sa, &old[i]);
  struct itimerval it;
  memset(&it, 0, sizeof it);
  it.it_value.tv_sec = fz_call_ms / 1000;
  it.it_value.tv_usec = (fz_call_ms % 1000) * 1000;
  setitimer(ITIMER_VIRTUAL, &it, NULL);
  volatile int st = -1;
  int sig = sigsetjmp(fz_jmp, 1);
  if (sig == 0) {
    fz_active = 1;
    st = fn(in, out);
    fz_active = 0;
  }
  struct itimerval zero;
  memset(&zero, 0, sizeof zero);
  setitimer(ITIMER_VIRTUAL, &zero, NULL);
  for (int i = 0; i < FZ_NSIG; i++) sigaction(fz_sigs[i], &old[i], NULL);
  *trap = sig;
  return st;
}

static int fz_feq64(double a, double b) {
  if (a != a && b != b) return 1;
  uint64_t x, y;
  memcpy(&x, &a, 8);
  memcpy(&y, &b, 8);
  if (x == y) return 1;
  if (fz_ulps_f64 <= 0 || a != a || b != b) return 0;
  int64_t ix = (int64_t)x, iy = (int64_t)y;
  if (ix < 0) ix = INT64_MIN - ix;
  if (iy < 0) iy = INT64_MIN - iy;
  double d = (double)ix - (double)iy;
  return (d < 0 ? -d : d) <= fz_ulps_f64;
}

static int fz_feq32(float a, float b) {
  if (a != a && b != b) return 1;
  uint32_t x, y;
  memcpy(&x, &a, 4);
  memcpy(&y, &b, 4);
  if (x == y) return 1;
  if (fz_ulps_f32 <= 0 || a != a || b != b) return 0;
  int32_t ix = (int32_t)x, iy = (int32_t)y;
  if (ix < 0) ix = INT32_MIN - ix;
  if (iy < 0) iy = INT32_MIN - iy;
  double d = (double)ix - (double)iy;
  return (d < 0 ? -d : d) <= fz_ulps_f32;
}

static void fz_print_str(const char *s) {
  fputc('"', stderr);
  for (int i = 0; i <= FZ_STRCAP && s[i]; i++) {
    unsigned char c = (unsigned char)s[i];
    if (c == '"') fputs("\\\"", stderr);
    else if (c == '\\') fputs("\\\\", stderr);
    else if (c == '\n') fputs("\\n", stderr);
    else if (c == '\t') fputs("\\t", stderr);
    else if (c == '\r') fputs("\\r", stderr);
    else if (c >= 0x20 && c < 0x7f) fputc(c, stderr);
    else fprintf(stderr, "\\x%02x", c);
  }
  fputc('"', stderr);
}

struct fz_fn {
  const char *name;
  size_t len;
  void (*decode)(void *, const uint8_t *);
  void (*print_in)(const void *);
  void (*print_out)(const char *, const void *);
  int (*equal)(const void *, const void *);
  int (*a)(const void *, void *);
  int (*b[FZ_NV])(const void *, void *);
};
"#;

/// The libFuzzer driver. `sides_b` lists side-B names (`b0`, `b1`, ...).
pub fn driver_source(targets: &[Target], sides_b: &[String]) -> String {
    let mut s = String::new();
    let nv = sides_b.len().max(1);
    let _ = writeln!(s, "#define FZ_NV {nv}");
    s.push_str(DRIVER_PRELUDE);
    let max_len = targets.iter().map(Target::input_len).max().unwrap_or(0);
    let _ = writeln!(s, "#define FZ_MAXLEN {}", max_len.max(1));
    s.push_str("typedef union {\n  long double fz_align;\n");
    for k in 0..targets.len() {
        let _ = writeln!(s, "  fz_in_{k} t{k};");
    }
    s.push_str("} fz_in_any;\ntypedef union {\n  long double fz_align;\n");
    for k in 0..targets.len() {
        let _ = writeln!(s, "  fz_out_{k} t{k};");
    }
    s.push_str("} fz_out_any;\n");

    for (k, t) in targets.iter().enumerate() {
        let _ = writeln!(s, "int fz_side_a_{k}(const void *, void *);");
        for b in sides_b {
            let _ = writeln!(s, "int fz_side_{b}_{k}(const void *, void *);");
        }
        // decode
        let _ = writeln!(s, "static void fz_decode_{k}(void *vin, const uint8_t *d) {{\n  fz_in_{k} *in = (fz_in_{k} *)vin;\n  (void)in; (void)d;");
        for f in &t.fields {
            let (m, off) = (&f.member, f.offset);
            match &f.ctype {
                CType::Scalar { scalar: Scalar::Bool } | CType::Pointer { pointee: Scalar::Bool, .. } => {
                    let _ = writeln!(s, "  in->{m} = d[{off}] & 1;");
                }
                CType::Array { elem: Scalar::Bool, len } => {
                    let _ = writeln!(s, "  for (int i = 0; i < {len}; i++) in->{m}[i] = d[{off} + i] & 1;");
                }
                CType::Scalar { .. } | CType::Pointer { .. } => {
                    let _ = writeln!(s, "  memcpy(&in->{m}, d + {off}, {});", f.size);
                }
                CType::Array { .. } => {
                    let _ = writeln!(s, "  memcpy(in->{m}, d + {off}, {});", f.size);
                }
                CType::Str { .. } => {
                    let _ = writeln!(
                        s,
                        "  memset(in->{m}, 0, sizeof(in->{m}));\n  for (int i = 0; i < FZ_STRCAP; i++) {{ char c = (char)(d[{off} + i] & 0x7f); if (!c) break; in->{m}[i] = c; }}"
                    );
                }
            }
        }
        s.push_str("}\n");
        // print inputs
        let _ = writeln!(s, "static void fz_print_in_{k}(const void *vin) {{\n  const fz_in_{k} *in = (const fz_in_{k} *)vin;\n  (void)in;");
        for f in &t.fields {
            let _ = writeln!(
                s,
                "  fputs(\"FZ-IN {}=\", stderr); {} fputc('\\n', stderr);",
                f.display,
                c_print_value(&f.ctype, &format!("in->{}", f.member), true)
            );
        }
        s.push_str("}\n");
        // print outputs
        let outs = t.outputs();
        let _ = writeln!(
            s,
            "static void fz_print_out_{k}(const char *tag, const void *vo) {{\n  const fz_out_{k} *o = (const fz_out_{k} *)vo;\n  (void)o; (void)tag;"
        );
        for (disp, m, ty) in &outs {
            let _ = writeln!(
                s,
                "  fprintf(stderr, \"%s {disp}=\", tag); {} fputc('\\n', stderr);",
                c_print_value(ty, &format!("o->{m}"), false)
            );
        }
        s.push_str("}\n");
        // compare
        let _ = writeln!(
            s,
            "static int fz_equal_{k}(const void *va, const void *vb) {{\n  const fz_out_{k} *a = (const fz_out_{k} *)va;\n  const fz_out_{k} *b = (const fz_out_{k} *)vb;\n  (void)a; (void)b;"
        );
        for (_, m, ty) in &outs {
            let _ = writeln!(s, "  if (!{}) return 0;", c_equal(ty, &format!("a->{m}"), &format!("b->{m}")));
        }
        s.push_str("  return 1;\n}\n");
    }
    s.push_str("static const struct fz_fn fz_fns[] = {\n");
    for (k, t) in targets.iter().enumerate() {
        let bs: Vec<String> = if sides_b.is_empty() {
            vec!["0".into()]
        } else {
            sides_b.iter().map(|b| format!("fz_side_{b}_{k}")).collect()
        };
        let _ = writeln!(
            s,
            "  {{\"{}\", {}, fz_decode_{k}, fz_print_in_{k}, fz_print_out_{k}, fz_equal_{k}, fz_side_a_{k}, {{{}}}}},",
            t.iface.name,
            t.input_len(),
            bs.join(", ")
        );
    }
    s.push_str("};\n");
    let _ = writeln!(s, "static const int fz_nfns = {};\nstatic const int fz_nv = {};", targets.len(), sides_b.len());
    s.push_str(DRIVER_MAIN);
    s
}

const DRIVER_MAIN: &str = r#"
static const struct fz_fn *fz_sel;
static const void *fz_cur_in;
static void *fz_cur_out_a;
static int fz_cur_variant;

static void fz_report(int variant, const char *kind, const char *detail, const void *in, const void *oa, const void *ob) {
  fprintf(stderr, "\nFZ-CEX kind=%s fn=%s variant=%d\n", kind, fz_sel->name, variant);
  fz_sel->print_in(in);
  fz_sel->print_out("FZ-C", oa);
  if (ob) fz_sel->print_out("FZ-R", ob);
  if (detail) fprintf(stderr, "FZ-DETAIL %s\n", detail);
  fputs("FZ-END\n", stderr);
  fflush(stderr);
  abort();
}

static void fz_at_exit(void) {
  if (fz_phase == 2 && fz_sel) {
    fz_phase = 0;
    fz_report(fz_cur_variant, "rust-only-runtime-error", "process exit called", fz_cur_in, fz_cur_out_a, NULL);
  }
}

static char fz_altstack[1 << 16];

int LLVMFuzzerInitialize(int *argc, char ***argv) {
  (void)argc; (void)argv;
  const char *f = getenv("FZ_FUNC");
  int k = f ? atoi(f) : 0;
  if (k < 0 || k >= fz_nfns) { fprintf(stderr, "FZ: function index %d out of range\n", k); exit(2); }
  fz_sel = &fz_fns[k];
  const char *d = getenv("FZ_DISABLED");
  if (d) fz_disabled = strtoull(d, NULL, 10);
  const char *ms = getenv("FZ_CALL_MS");
  if (ms) fz_call_ms = atol(ms);
  if (fz_call_ms <= 0) fz_call_ms = 1000;
  const char *u = getenv("FZ_ULPS");
  if (u) { fz_ulps_f64 = atof(u); fz_ulps_f32 = fz_ulps_f64; }
  fz_trace = getenv("FZ_TRACE") != NULL;
  stack_t ss;
  memset(&ss, 0, sizeof ss);
  ss.ss_sp = fz_altstack;
  ss.ss_size = sizeof fz_altstack;
  sigaltstack(&ss, NULL);
  atexit(fz_at_exit);
  return 0;
}

int LLVMFuzzerTestOneInput(const uint8_t *data, size_t size) {
  uint8_t buf[FZ_MAXLEN];
  memset(buf, 0, sizeof buf);
  memcpy(buf, data, size < fz_sel->len ? size : fz_sel->len);
  static fz_in_any in;
  static fz_out_any oa, ob;
  memset(&in, 0, sizeof in);
  memset(&oa, 0, sizeof oa);
  fz_sel->decode(&in, buf);
  fz_cur_in = &in;
  fz_cur_out_a = &oa;
  int trap = 0;
  fz_phase = 1;
  fz_guarded(fz_sel->a, &in, &oa, &trap);
  fz_phase = 0;
  if (trap) return 0;
  char detail[512];
  for (int j = 0; j < fz_nv; j++) {
    if (j < 64 && (fz_disabled >> j) & 1) continue;
    memset(&ob, 0, sizeof ob);
    fz_cur_variant = j;
    fz_phase = 2;
    int st = fz_guarded(fz_sel->b[j], &in, &ob, &trap);
    fz_phase = 0;
    if (trap == SIGVTALRM) {
      snprintf(detail, sizeof detail, "timeout: exceeded %ld ms of CPU time", fz_call_ms);
      fz_report(j, "rust-only-runtime-error", detail, &in, &oa, NULL);
    } else if (trap >= 1000) {
      snprintf(detail, sizeof detail, "exit(%d) called", trap - 1000);
      fz_report(j, "rust-only-runtime-error", detail, &in, &oa, NULL);
    } else if (trap) {
      snprintf(detail, sizeof detail, "crashed with signal %d (%s)", trap, strsignal(trap));
      fz_report(j, "rust-only-runtime-error", detail, &in, &oa, NULL);
    } else if (st == 1) {
      char msg[400] = "panic";
      if (fz_rust_last_panic) fz_rust_last_panic(msg, sizeof msg);
      snprintf(detail, sizeof detail, "panic: %s", msg);
      fz_report(j, "rust-only-runtime-error", detail, &in, &oa, NULL);
    } else if (st == 2) {
      fz_report(j, "value-mismatch", "an input value is not representable in the Rust parameter or global types", &in, &oa, NULL);
    } else if (st == 3) {
      fz_report(j, "value-mismatch", "a Rust result is not representable in the C type", &in, &oa, NULL);
    } else if (!fz_sel->equal(&oa, &ob)) {
      fz_report(j, "value-mismatch", NULL, &in, &oa, &ob);
    }
    if (fz_trace) {
      fz_sel->print_out("FZ-TRACE-C", &oa);
      fz_sel->print_out("FZ-TRACE-R", &ob);
    }
  }
  return 0;
}
"#;
