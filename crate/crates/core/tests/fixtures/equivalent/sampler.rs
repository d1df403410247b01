#[allow(non_upper_case_globals)]
pub static mut call_count: i32 = 0;
#[allow(non_upper_case_globals)]
pub static mut high_water: i32 = 0;

pub fn record_sample(sample: i32) -> i32 {
    unsafe {
        if call_count < 1000 {
            call_count += 1;
        }
        if sample > high_water {
            high_water = sample;
            1
        } else {
            0
        }
    }
}
