void theta(int *a)
{
#ifdef P
    a[0] = 1;
#endif
#ifdef Q
    a[1] = 1;
#endif
#ifdef R
    a[2] = 1;
#endif
}
