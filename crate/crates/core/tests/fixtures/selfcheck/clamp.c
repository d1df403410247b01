#include <stdlib.h>

/* Clamp a value into the closed range [lo, hi]. */
int clamp(int value, int lo, int hi)
{
    if (lo > hi) {
        int tmp = lo;
        lo = hi;
        hi = tmp;
    }
    if (value < lo) {
        return lo;
    } else if (value > hi) {
        return hi;
    }
    return value;
}
