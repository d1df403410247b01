pub fn checksum(data: &[u8; 16], skip_zero: i32) -> u16 {
    let (mut s1, mut s2) = (0u32, 0u32);
    for &d in data.iter() {
        if skip_zero != 0 && d == 0 {
            continue;
        }
        s1 = (s1 + u32::from(d)) % 255;
        s2 = (s2 + s1) % 255;
    }
    ((s2 << 8) | s1) as u16
}
