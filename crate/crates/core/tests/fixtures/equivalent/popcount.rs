pub fn popcount(word: u32) -> i32 {
    word.count_ones() as i32
}
