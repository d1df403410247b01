int classify(int c)
{
    switch (c) {
    case 0:
        return 10;
    case 1:
    case 2:
        return 20;
    default:
        break;
    }
    while (c > 100 || c < -100) {
        c /= 2;
    }
    return c;
}
