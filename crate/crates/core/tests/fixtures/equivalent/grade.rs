pub fn grade(score: i32) -> u8 {
    if !(0..=100).contains(&score) {
        return b'?';
    }
    match score / 10 {
        9 | 10 => b'A',
        8 => b'B',
        7 => b'C',
        _ if score >= 60 => b'D',
        _ => b'F',
    }
}
