import os

# Single-threaded BLAS: the matrices here are small enough that thread
# spin-up and contention dominate (the full suite runs ~40% faster), and the
# runtime-bounded acceptance checks need stable timings.  Must be set before
# numpy is imported anywhere.
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
             "NUMEXPR_NUM_THREADS"):
    os.environ.setdefault(_var, "1")
