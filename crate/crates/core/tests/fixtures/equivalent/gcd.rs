fn gcd_step(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

pub fn gcd(x: i32, y: i32) -> u32 {
    gcd_step(x.unsigned_abs(), y.unsigned_abs())
}
