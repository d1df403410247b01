pub fn clamp(value: i32, mut lo: i32, mut hi: i32) -> i32 {
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    if value < lo {
        lo
    } else if value > hi {
        hi
    } else {
        value
    }
}
