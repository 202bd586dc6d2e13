# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled version of gykit._quad_py.scaled_integral_batch (same algorithm)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sinh, sin, log, fabs, tanh, M_PI, INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef double XGK[8]
cdef double WGK[8]
cdef double WG[4]
XGK[:] = [0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
          0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
          0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
          0.207784955007898467600689403773245, 0.0]
WGK[:] = [0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
          0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
          0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
          0.204432940075298892414161999234649, 0.209482141084727828012999174891714]
WG[:] = [0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
         0.381830050505118944950369775488975, 0.417959183673469387755102040816327]

cdef double EPS = 2.220446049250313e-16
cdef int FLAG_TRUNCATED = 1
cdef int FLAG_SUBDIVISION_LIMIT = 2
cdef long MAX_HALF_PERIODS = 100000


cdef inline double integrand(double xi, double z, double t) nogil:
    cdef double s = sinh(0.5 * xi)
    return exp(-xi * xi / (2.0 * t) - 2.0 * z * s * s) * sinh(xi) * sin(M_PI * xi / t)


cdef inline double log_env(double xi, double z, double t) nogil:
    if xi <= 0.0:
        return -INFINITY
    cdef double s = sinh(0.5 * xi)
    return -xi * xi / (2.0 * t) - 2.0 * z * s * s + log(sinh(xi))


cdef double peak(double z, double t) nogil:
    cdef double lo = 0.0, hi = 1.0, mid
    cdef int i
    while -hi / t - z * sinh(hi) + 1.0 / tanh(hi) > 0.0:
        lo = hi
        hi = 2.0 * hi
    for i in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if -mid / t - z * sinh(mid) + 1.0 / tanh(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


cdef void gk15(double a, double b, double z, double t, double* k, double* e, double* ak) nogil:
    cdef double c = 0.5 * (a + b), h = 0.5 * (b - a)
    cdef double fc = integrand(c, z, t)
    cdef double resk = WGK[7] * fc, resg = WG[3] * fc, resa = WGK[7] * fabs(fc)
    cdef double f1, f2
    cdef int j
    for j in range(7):
        f1 = integrand(c - h * XGK[j], z, t)
        f2 = integrand(c + h * XGK[j], z, t)
        resk += WGK[j] * (f1 + f2)
        resa += WGK[j] * (fabs(f1) + fabs(f2))
        if j % 2 == 1:
            resg += WG[j // 2] * (f1 + f2)
    k[0] = h * resk
    e[0] = fabs(h * (resk - resg))
    ak[0] = h * resa


cdef int half_period(double a, double b, double z, double t, double rel_tol, double abs_tol,
                     int max_sub, double* stack, double* out) nogil:
    """Adaptive GK15 on [a, b]; out = (value, error, abs value).  Returns limit flag."""
    cdef double length = b - a
    cdef int top = 0, n = 0, limited = 0
    cdef double lo, hi, k, e, ak, tol, mid, y, s
    cdef double val = 0.0, comp = 0.0, err = 0.0, aval = 0.0
    stack[0] = a
    stack[1] = b
    top = 1
    while top > 0:
        top -= 1
        lo = stack[2 * top]
        hi = stack[2 * top + 1]
        gk15(lo, hi, z, t, &k, &e, &ak)
        n += 1
        tol = abs_tol * (hi - lo) / length
        if rel_tol * ak > tol:
            tol = rel_tol * ak
        if 50.0 * EPS * ak > tol:
            tol = 50.0 * EPS * ak
        if e <= tol or n + top >= max_sub or hi - lo < 1e-12 * length:
            if e > tol:
                limited = 1
            y = k - comp
            s = val + y
            comp = (s - val) - y
            val = s
            err += e
            aval += ak
        else:
            mid = 0.5 * (lo + hi)
            stack[2 * top] = mid
            stack[2 * top + 1] = hi
            stack[2 * top + 2] = lo
            stack[2 * top + 3] = mid
            top += 2
    out[0] = val
    out[1] = err
    out[2] = aval
    return limited


cdef int scaled_integral(double z, double t, double abs_tol, double rel_tol, int max_sub,
                         double log_cut, double* stack, double* res) nogil:
    cdef double pk = peak(z, t)
    cdef double log_max = log_env(pk, z, t)
    cdef double total = 0.0, comp = 0.0, err = 0.0, aval = 0.0, s, v, a, b
    cdef double out[3]
    cdef int flags = 0
    cdef long m = 0
    while True:
        a = m * t
        b = (m + 1) * t
        if half_period(a, b, z, t, rel_tol, abs_tol, max_sub, stack, out):
            flags |= FLAG_SUBDIVISION_LIMIT
        v = out[0]
        s = total + v
        if fabs(total) >= fabs(v):
            comp += (total - s) + v
        else:
            comp += (v - s) + total
        total = s
        err += out[1]
        aval += out[2]
        m += 1
        if b > pk and log_env(b, z, t) - log_max < log_cut:
            break
        if m >= MAX_HALF_PERIODS:
            flags |= FLAG_TRUNCATED
            break
    res[0] = total + comp
    res[1] = err
    res[2] = aval
    return flags


def scaled_integral_batch(z, double t, double abs_tol, double rel_tol, int max_sub,
                          double tail_cutoff):
    """(values, errors, abs integrals, flags) for every entry of z at one time t."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] zz = np.ascontiguousarray(z, dtype=np.float64).ravel()
    cdef Py_ssize_t n = zz.shape[0], i
    cdef cnp.ndarray[cnp.float64_t, ndim=1] val = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] err = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] aval = np.empty(n)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] flags = np.zeros(n, dtype=np.int32)
    cdef double log_cut = log(tail_cutoff)
    cdef double res[3]
    cdef double* stack = <double*> malloc(2 * (max_sub + 4) * sizeof(double))
    if stack == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(n):
                flags[i] = scaled_integral(zz[i], t, abs_tol, rel_tol, max_sub, log_cut,
                                           stack, res)
                val[i] = res[0]
                err[i] = res[1]
                aval[i] = res[2]
    finally:
        free(stack)
    shape = np.shape(z)
    return val.reshape(shape), err.reshape(shape), aval.reshape(shape), flags.reshape(shape)
