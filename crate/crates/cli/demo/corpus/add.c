/* Sum of two values. */
int add(int a, int b) {
    return a + b;
}
