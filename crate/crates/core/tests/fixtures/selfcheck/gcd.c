#include <stdlib.h>

static unsigned int gcd_step(unsigned int a, unsigned int b)
{
    while (b != 0) {
        unsigned int r = a % b;
        a = b;
        b = r;
    }
    return a;
}

/* Greatest common divisor of two signed values. */
unsigned int gcd(int x, int y)
{
    unsigned int ux = x < 0 ? 0u - (unsigned int)x : (unsigned int)x;
    unsigned int uy = y < 0 ? 0u - (unsigned int)y : (unsigned int)y;
    return gcd_step(ux, uy);
}
