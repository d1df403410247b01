#include <stdint.h>

#define BLOCK 16

/* Fletcher-style checksum over a fixed block. */
uint16_t checksum(uint8_t data[16], int skip_zero)
{
    uint16_t s1 = 0;
    uint16_t s2 = 0;
    for (int i = 0; i < BLOCK; i++) {
        if (skip_zero && data[i] == 0) {
            continue;
        }
        s1 = (uint16_t)((s1 + data[i]) % 255);
        s2 = (uint16_t)((s2 + s1) % 255);
    }
    return (uint16_t)((s2 << 8) | s1);
}
