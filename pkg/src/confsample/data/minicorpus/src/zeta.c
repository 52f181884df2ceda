#ifndef L
static const char *zeta_name = "zeta";
#endif
