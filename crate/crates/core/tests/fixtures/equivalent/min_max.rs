pub fn min_max(a: i32, b: i32, lo: &mut i32, hi: &mut i32) {
    if a < b {
        *lo = a;
        *hi = b;
    } else {
        *lo = b;
        *hi = a;
    }
}
