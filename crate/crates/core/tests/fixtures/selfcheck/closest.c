#include <math.h>

/* Index of the element closest to target, or -1 when count <= 0. */
int closest_index(double values[6], int count, double target)
{
    int best = -1;
    double best_dist = 0.0;
    int n = count < 6 ? count : 6;
    for (int i = 0; i < n; i++) {
        double d = fabs(values[i] - target);
        if (best < 0 || d < best_dist) {
            best = i;
            best_dist = d;
        }
    }
    return best;
}
