/* Reduced from a suggested-palette setter: the index variable only exists
 * when pointer indexing is available, but the fallback path uses it too. */
#include <stddef.h>

#ifdef SPLT
void set_split_palette(entry_t *entries, size_t n)
{
#ifdef POINTER
    entry_t *p;
    for (p = entries; p < entries + n; p++)
        p->depth = 8;
#else
    size_t i;
    for (i = 0; i < n; i++)
        entries[i].depth = 8;
    p = entries;            /* p is undeclared here */
#endif
    register_entries(entries, n);
}
#endif
