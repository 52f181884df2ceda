#ifdef M
int eta(void) { return 1; }
#elif defined(N)
int eta(void) { return 2; }
#endif
