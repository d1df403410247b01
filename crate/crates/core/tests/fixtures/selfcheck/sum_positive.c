// Sum of the positive entries of a fixed-size buffer.
unsigned int sum_positive(int values[8], unsigned int limit)
{
    unsigned int total_sum = 0;
    for (int i = 0; i < 8; i++) {
        if (values[i] > 0 && total_sum < limit) {
            total_sum += (unsigned int)values[i];
        }
    }
    return total_sum;
}
