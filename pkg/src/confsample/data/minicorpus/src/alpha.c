int alpha(int v)
{
#ifdef A
    v = v << 1;
#endif
    return v;
}
