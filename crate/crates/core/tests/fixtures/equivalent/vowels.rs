pub fn count_vowels(text: &str) -> i32 {
    text.bytes()
        .filter(|b| matches!(b.to_ascii_lowercase(), b'a' | b'e' | b'i' | b'o' | b'u'))
        .count() as i32
}
