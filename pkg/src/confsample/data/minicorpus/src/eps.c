#if I && J
#if !K
#define EPS_MODE 1
#endif
#endif
#if !I && !J && K
#define EPS_MODE 2
#endif
