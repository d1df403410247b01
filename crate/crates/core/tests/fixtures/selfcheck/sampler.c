static int call_count = 0;
int high_water = 0;

/* Records a sample; returns 1 when it raised the high-water mark. */
int record_sample(int sample)
{
    call_count = call_count < 1000 ? call_count + 1 : call_count;
    if (sample > high_water) {
        high_water = sample;
        return 1;
    }
    return 0;
}
