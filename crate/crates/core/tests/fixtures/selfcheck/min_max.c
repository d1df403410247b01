/* Writes the smaller and larger of a and b through the pointers. */
void min_max(int a, int b, int *lo, int *hi)
{
    if (a < b && !(a == b)) {
        *lo = a;
        *hi = b;
    } else {
        *lo = b;
        *hi = a;
    }
}
