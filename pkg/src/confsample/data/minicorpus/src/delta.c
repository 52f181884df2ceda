int delta(int x)
{
#ifdef G
    x = x * 3;
#else
    x = x / 3;
#endif
#ifdef H
    x = -x;
#endif
    return x;
}
