# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled transient Newton stepper.

Semantics must match rfsim.engine.transient._run_steps_python exactly;
the cross-backend equivalence test enforces this.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, exp, log, fmod, M_PI, fabs
from libc.string cimport memcpy
from scipy.linalg.cython_lapack cimport dgesv

cnp.import_array()

DEF WAVE_SIN = 1
DEF WAVE_PULSE = 2


cdef inline double _wave(long kind, double* p, double t) nogil:
    cdef double v1, v2, delay, rise, fall, width, period, tau
    if kind == WAVE_SIN:
        return p[0] + p[1] * sin(2.0 * M_PI * p[2] * t + p[3] * M_PI / 180.0)
    if kind == WAVE_PULSE:
        v1 = p[0]; v2 = p[1]; delay = p[2]; rise = p[3]
        fall = p[4]; width = p[5]; period = p[6]
        if t < delay:
            return v1
        tau = t - delay
        if period > 0.0:
            tau = fmod(tau, period)
        if tau < rise:
            return v1 + (v2 - v1) * (tau / rise if rise > 0.0 else 1.0)
        tau -= rise
        if tau < width:
            return v2
        tau -= width
        if tau < fall:
            return v2 + (v1 - v2) * (tau / fall if fall > 0.0 else 1.0)
        return v1
    return p[0]


cdef inline double _xv(double* x, long idx) nogil:
    return x[idx] if idx >= 0 else 0.0


cdef void _stamp(double* x, double* f, double* Jt, long n,
                 long nmos, long* mo_d, long* mo_g, long* mo_s,
                 double* mo_beta, double* mo_vth, double* mo_lam,
                 double* mo_sign,
                 long nsw, long* sw_p, long* sw_m, long* sw_cp, long* sw_cm,
                 double* sw_gon, double* sw_goff, double* sw_vt,
                 double* sw_eps,
                 long npo, long* po_br, long* po_ip, long* po_im,
                 double* po_a1, double* po_a3) nogil:
    cdef long k, d, g, s, p, m, cp, cm, br, ip, im, row, j
    cdef double sign, vgs, vds, beta, vth, lam, vov, mm
    cdef double ids, gm, gds, tmp
    cdef double vc, vpm, cond, dg, t, ss, ds, lg_on, lg_off, i
    cdef double vin, a1, a3, dfd, sgn

    for k in range(nmos):
        d = mo_d[k]; g = mo_g[k]; s = mo_s[k]
        sign = mo_sign[k]
        vgs = sign * (_xv(x, g) - _xv(x, s))
        vds = sign * (_xv(x, d) - _xv(x, s))
        beta = mo_beta[k]; vth = mo_vth[k]; lam = mo_lam[k]
        if vds < 0.0:
            # drain/source swap (symmetric device)
            vgs = vgs - vds
            vds = -vds
            vov = vgs - vth
            if vov <= 0.0:
                ids = 0.0; gm = 0.0; gds = 0.0
            elif vds < vov:
                mm = 1.0 + lam * vds
                ids = beta * (vov * vds - 0.5 * vds * vds) * mm
                gm = beta * vds * mm
                gds = beta * ((vov - vds) * mm
                              + lam * (vov * vds - 0.5 * vds * vds))
            else:
                mm = 1.0 + lam * vds
                ids = 0.5 * beta * vov * vov * mm
                gm = beta * vov * mm
                gds = 0.5 * beta * vov * vov * lam
            tmp = gm
            ids = -sign * ids
            gm = -tmp
            gds = tmp + gds
        else:
            vov = vgs - vth
            if vov <= 0.0:
                ids = 0.0; gm = 0.0; gds = 0.0
            elif vds < vov:
                mm = 1.0 + lam * vds
                ids = beta * (vov * vds - 0.5 * vds * vds) * mm
                gm = beta * vds * mm
                gds = beta * ((vov - vds) * mm
                              + lam * (vov * vds - 0.5 * vds * vds))
            else:
                mm = 1.0 + lam * vds
                ids = 0.5 * beta * vov * vov * mm
                gm = beta * vov * mm
                gds = 0.5 * beta * vov * vov * lam
            ids = sign * ids
        for j in range(2):
            row = d if j == 0 else s
            sgn = 1.0 if j == 0 else -1.0
            if row < 0:
                continue
            f[row] += sgn * ids
            if g >= 0:
                Jt[g * n + row] += sgn * gm
            if d >= 0:
                Jt[d * n + row] += sgn * gds
            if s >= 0:
                Jt[s * n + row] -= sgn * (gm + gds)

    for k in range(nsw):
        p = sw_p[k]; m = sw_m[k]; cp = sw_cp[k]; cm = sw_cm[k]
        vc = _xv(x, cp) - _xv(x, cm)
        lg_on = log(sw_gon[k])
        lg_off = log(sw_goff[k])
        t = (vc - sw_vt[k]) / sw_eps[k] + 0.5
        if t <= 0.0:
            cond = sw_goff[k]; dg = 0.0
        elif t >= 1.0:
            cond = sw_gon[k]; dg = 0.0
        else:
            ss = t * t * (3.0 - 2.0 * t)
            ds = 6.0 * t * (1.0 - t)
            cond = exp(lg_off + (lg_on - lg_off) * ss)
            dg = cond * (lg_on - lg_off) * ds / sw_eps[k]
        vpm = _xv(x, p) - _xv(x, m)
        i = cond * vpm
        for j in range(2):
            row = p if j == 0 else m
            sgn = 1.0 if j == 0 else -1.0
            if row < 0:
                continue
            f[row] += sgn * i
            if p >= 0:
                Jt[p * n + row] += sgn * cond
            if m >= 0:
                Jt[m * n + row] -= sgn * cond
            if cp >= 0:
                Jt[cp * n + row] += sgn * dg * vpm
            if cm >= 0:
                Jt[cm * n + row] -= sgn * dg * vpm

    for k in range(npo):
        br = po_br[k]; ip = po_ip[k]; im = po_im[k]
        vin = _xv(x, ip) - _xv(x, im)
        a1 = po_a1[k]; a3 = po_a3[k]
        f[br] -= a1 * vin + a3 * vin * vin * vin
        dfd = a1 + 3.0 * a3 * vin * vin
        if ip >= 0:
            Jt[ip * n + br] -= dfd
        if im >= 0:
            Jt[im * n + br] += dfd


def run_steps(double[:, ::1] A_base, double h, double kappa, long step0,
              long n_steps,
              double[::1] x, double[::1] cap_v, double[::1] cap_i,
              long[::1] cap_p, long[::1] cap_m, double[::1] cap_geq,
              long[::1] ind_br, long[::1] ind_p, long[::1] ind_m,
              double[::1] ind_zeta,
              long[::1] vs_br, long[::1] vs_kind, double[:, ::1] vs_wave,
              long[::1] is_p, long[::1] is_m, long[::1] is_kind,
              double[:, ::1] is_wave,
              long[::1] mo_d, long[::1] mo_g, long[::1] mo_s,
              double[::1] mo_beta, double[::1] mo_vth, double[::1] mo_lam,
              double[::1] mo_sign,
              long[::1] sw_p, long[::1] sw_m, long[::1] sw_cp,
              long[::1] sw_cm,
              double[::1] sw_gon, double[::1] sw_goff, double[::1] sw_vt,
              double[::1] sw_eps,
              long[::1] po_br, long[::1] po_ip, long[::1] po_im,
              double[::1] po_a1, double[::1] po_a3,
              long n_nodes, double abstol, double vntol, long max_iter,
              long max_damp,
              double[:, ::1] out):
    """Returns -1 on success, else the 0-based failing step index."""
    cdef long n = A_base.shape[0]
    cdef long ncap = cap_p.shape[0]
    cdef long nind = ind_br.shape[0]
    cdef long nvs = vs_br.shape[0]
    cdef long nis = is_p.shape[0]
    cdef long nmos = mo_d.shape[0]
    cdef long nsw = sw_p.shape[0]
    cdef long npo = po_br.shape[0]

    # transposed copy for LAPACK (column-major view of Jt == J)
    A_T_np = np.ascontiguousarray(np.asarray(A_base).T)
    cdef double[:, ::1] A_T = A_T_np
    Jt_np = np.empty((n, n))
    cdef double[:, ::1] Jt = Jt_np
    cdef cnp.ndarray[double, ndim=1] b = np.zeros(n)
    cdef cnp.ndarray[double, ndim=1] f = np.zeros(n)
    cdef cnp.ndarray[double, ndim=1] f_try = np.zeros(n)
    cdef cnp.ndarray[double, ndim=1] dx = np.zeros(n)
    cdef cnp.ndarray[double, ndim=1] xn = np.zeros(n)
    cdef cnp.ndarray[double, ndim=1] x_try = np.zeros(n)
    cdef cnp.ndarray[double, ndim=1] lin = np.zeros(n)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] ipiv = np.zeros(n, dtype=np.int32)
    cdef double* bp = <double*> b.data
    cdef double* fp = <double*> f.data
    cdef double* ftp = <double*> f_try.data
    cdef double* dxp = <double*> dx.data
    cdef double* xnp = <double*> xn.data
    cdef double* xtp = <double*> x_try.data
    cdef double* xp = &x[0]
    cdef double* Jtp = &Jt[0, 0]
    cdef double* Atp = &A_T[0, 0]
    cdef double* Abp = &A_base[0, 0]
    cdef int* ipivp = <int*> ipiv.data
    cdef int info = 0, nrhs = 1, ni = <int> n

    cdef long i, k, it, damp, p, m, br, row, col
    cdef double t1, ieq, v_prev, v_new, fnorm, fnorm_try, step_len, dv, acc
    cdef bint converged

    for i in range(n_steps):
        t1 = (step0 + i + 1) * h
        for k in range(n):
            bp[k] = 0.0
        for k in range(nvs):
            bp[vs_br[k]] = _wave(vs_kind[k], &vs_wave[k, 0], t1)
        for k in range(nis):
            acc = _wave(is_kind[k], &is_wave[k, 0], t1)
            if is_p[k] >= 0:
                bp[is_p[k]] -= acc
            if is_m[k] >= 0:
                bp[is_m[k]] += acc
        for k in range(ncap):
            ieq = cap_geq[k] * cap_v[k] + kappa * cap_i[k]
            if cap_p[k] >= 0:
                bp[cap_p[k]] += ieq
            if cap_m[k] >= 0:
                bp[cap_m[k]] -= ieq
        for k in range(nind):
            p = ind_p[k]; m = ind_m[k]; br = ind_br[k]
            v_prev = _xv(xp, p) - _xv(xp, m)
            bp[br] = -kappa * v_prev - ind_zeta[k] * xp[br]

        memcpy(xnp, xp, n * sizeof(double))
        converged = False

        # initial residual/Jacobian
        memcpy(Jtp, Atp, n * n * sizeof(double))
        for row in range(n):
            acc = -bp[row]
            for col in range(n):
                acc += Abp[row * n + col] * xnp[col]
            fp[row] = acc
        _stamp(xnp, fp, Jtp, n,
               nmos, <long*> (&mo_d[0] if nmos else NULL),
               <long*> (&mo_g[0] if nmos else NULL),
               <long*> (&mo_s[0] if nmos else NULL),
               <double*> (&mo_beta[0] if nmos else NULL),
               <double*> (&mo_vth[0] if nmos else NULL),
               <double*> (&mo_lam[0] if nmos else NULL),
               <double*> (&mo_sign[0] if nmos else NULL),
               nsw, <long*> (&sw_p[0] if nsw else NULL),
               <long*> (&sw_m[0] if nsw else NULL),
               <long*> (&sw_cp[0] if nsw else NULL),
               <long*> (&sw_cm[0] if nsw else NULL),
               <double*> (&sw_gon[0] if nsw else NULL),
               <double*> (&sw_goff[0] if nsw else NULL),
               <double*> (&sw_vt[0] if nsw else NULL),
               <double*> (&sw_eps[0] if nsw else NULL),
               npo, <long*> (&po_br[0] if npo else NULL),
               <long*> (&po_ip[0] if npo else NULL),
               <long*> (&po_im[0] if npo else NULL),
               <double*> (&po_a1[0] if npo else NULL),
               <double*> (&po_a3[0] if npo else NULL))
        fnorm = 0.0
        for k in range(n):
            if fabs(fp[k]) > fnorm:
                fnorm = fabs(fp[k])

        for it in range(max_iter):
            if fnorm < abstol:
                converged = True
                break
            for k in range(n):
                dxp[k] = -fp[k]
            dgesv(&ni, &nrhs, Jtp, &ni, ipivp, dxp, &ni, &info)
            if info != 0:
                return i
            step_len = 1.0
            for damp in range(max_damp + 1):
                for k in range(n):
                    xtp[k] = xnp[k] + step_len * dxp[k]
                memcpy(Jtp, Atp, n * n * sizeof(double))
                for row in range(n):
                    acc = -bp[row]
                    for col in range(n):
                        acc += Abp[row * n + col] * xtp[col]
                    ftp[row] = acc
                _stamp(xtp, ftp, Jtp, n,
                       nmos, <long*> (&mo_d[0] if nmos else NULL),
                       <long*> (&mo_g[0] if nmos else NULL),
                       <long*> (&mo_s[0] if nmos else NULL),
                       <double*> (&mo_beta[0] if nmos else NULL),
                       <double*> (&mo_vth[0] if nmos else NULL),
                       <double*> (&mo_lam[0] if nmos else NULL),
                       <double*> (&mo_sign[0] if nmos else NULL),
                       nsw, <long*> (&sw_p[0] if nsw else NULL),
                       <long*> (&sw_m[0] if nsw else NULL),
                       <long*> (&sw_cp[0] if nsw else NULL),
                       <long*> (&sw_cm[0] if nsw else NULL),
                       <double*> (&sw_gon[0] if nsw else NULL),
                       <double*> (&sw_goff[0] if nsw else NULL),
                       <double*> (&sw_vt[0] if nsw else NULL),
                       <double*> (&sw_eps[0] if nsw else NULL),
                       npo, <long*> (&po_br[0] if npo else NULL),
                       <long*> (&po_ip[0] if npo else NULL),
                       <long*> (&po_im[0] if npo else NULL),
                       <double*> (&po_a1[0] if npo else NULL),
                       <double*> (&po_a3[0] if npo else NULL))
                fnorm_try = 0.0
                for k in range(n):
                    if fabs(ftp[k]) > fnorm_try:
                        fnorm_try = fabs(ftp[k])
                if fnorm_try <= fnorm or fnorm_try < abstol:
                    break
                step_len *= 0.5
            dv = 0.0
            for k in range(n_nodes):
                if fabs(step_len * dxp[k]) > dv:
                    dv = fabs(step_len * dxp[k])
            memcpy(xnp, xtp, n * sizeof(double))
            memcpy(fp, ftp, n * sizeof(double))
            fnorm = fnorm_try
            if fnorm < abstol and dv < vntol:
                converged = True
                break
        if not converged:
            return i

        for k in range(ncap):
            v_new = _xv(xnp, cap_p[k]) - _xv(xnp, cap_m[k])
            cap_i[k] = cap_geq[k] * (v_new - cap_v[k]) - kappa * cap_i[k]
            cap_v[k] = v_new
        memcpy(xp, xnp, n * sizeof(double))
        memcpy(&out[i, 0], xnp, n * sizeof(double))
    return -1
