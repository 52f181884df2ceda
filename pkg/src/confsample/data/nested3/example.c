int compute(int x)
{
#ifdef A
    x += 1;                 /* code 1 */
#ifdef B
    x *= 2;                 /* code 2 */
#else
    x -= 3;                 /* code 3 */
#endif
#endif
#ifdef C
    x ^= 0x5a;              /* code 4 */
#endif
    return x;
}
