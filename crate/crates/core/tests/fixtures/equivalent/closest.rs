pub fn closest_index(values: &[f64; 6], count: i32, target: f64) -> i32 {
    let n = count.min(6);
    let mut best = -1;
    let mut best_dist = 0.0;
    for i in 0..n.max(0) {
        let d = (values[i as usize] - target).abs();
        if best < 0 || d < best_dist {
            best = i;
            best_dist = d;
        }
    }
    best
}
