pub fn sum_positive(values: &[i32; 8], limit: u32) -> u32 {
    let mut total_sum: u32 = 0;
    for &v in values.iter() {
        if v > 0 && total_sum < limit {
            total_sum = total_sum.wrapping_add(v as u32);
        }
    }
    total_sum
}
