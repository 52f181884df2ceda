#ifdef B
static int buffered;
#ifdef C
static int compressed;
#endif
#endif

int beta(void) { return 0; }
