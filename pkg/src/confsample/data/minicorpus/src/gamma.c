#if defined(D) && defined(E) && defined(F)
int gamma_fast(void) { return 3; }
#endif
#ifndef D
int gamma_slow(void) { return 0; }
#endif
