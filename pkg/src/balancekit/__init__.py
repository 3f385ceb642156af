"""Max-norm matrix balancing, instrumented."""
