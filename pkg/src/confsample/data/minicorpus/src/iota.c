int iota(int n) { return n + 1; }
