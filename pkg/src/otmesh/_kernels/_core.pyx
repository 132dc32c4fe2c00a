# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled geometry kernels.

Mirrors the conventions of ``_core_py`` (same signatures, same results up to
floating-point summation order); see that module for documentation.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, floor, sqrt

cnp.import_array()

ctypedef cnp.int64_t i64
ctypedef cnp.float64_t f64


cdef inline double _wrap(double x, double half) nogil:
    return x - 2.0 * half * floor((x + half) / (2.0 * half))


cdef inline void _cross3(double ax, double ay, double az,
                         double bx, double by, double bz,
                         double* out) nogil:
    out[0] = ay * bz - az * by
    out[1] = az * bx - ax * bz
    out[2] = ax * by - ay * bx


def plane_cell_geometry(double[:, ::1] vertices, i64[:, ::1] cell_vertices,
                        i64[::1] cell_nv, double lx, double ly):
    cdef Py_ssize_t c = cell_vertices.shape[0]
    cdef Py_ssize_t kmax = cell_vertices.shape[1]
    if kmax > 64:
        raise ValueError("cells with more than 64 vertices are not supported")
    area_np = np.empty(c, dtype=np.float64)
    cen_np = np.empty((c, 2), dtype=np.float64)
    cdef double[::1] area = area_np
    cdef double[:, ::1] cen = cen_np
    cdef Py_ssize_t i, j, nv, jn
    cdef double refx, refy, a2, cx, cy, crs
    cdef double x0, y0, x1, y1
    cdef double relx[64]
    cdef double rely[64]

    with nogil:
        for i in range(c):
            nv = cell_nv[i]
            refx = vertices[cell_vertices[i, 0], 0]
            refy = vertices[cell_vertices[i, 0], 1]
            for j in range(nv):
                relx[j] = _wrap(vertices[cell_vertices[i, j], 0] - refx, lx)
                rely[j] = _wrap(vertices[cell_vertices[i, j], 1] - refy, ly)
            a2 = 0.0
            cx = 0.0
            cy = 0.0
            for j in range(nv):
                jn = j + 1 if j + 1 < nv else 0
                x0 = relx[j]
                y0 = rely[j]
                x1 = relx[jn]
                y1 = rely[jn]
                crs = x0 * y1 - x1 * y0
                a2 += crs
                cx += (x0 + x1) * crs
                cy += (y0 + y1) * crs
            area[i] = 0.5 * a2
            if a2 != 0.0:
                cen[i, 0] = _wrap(cx / (3.0 * a2) + refx, lx)
                cen[i, 1] = _wrap(cy / (3.0 * a2) + refy, ly)
            else:
                cen[i, 0] = refx
                cen[i, 1] = refy
    return area_np, cen_np


def sphere_cell_geometry(double[:, ::1] vertices, i64[:, ::1] cell_vertices,
                         i64[::1] cell_nv, double radius):
    cdef Py_ssize_t c = cell_vertices.shape[0]
    if cell_vertices.shape[1] > 64:
        raise ValueError("cells with more than 64 vertices are not supported")
    area_np = np.empty(c, dtype=np.float64)
    cen_np = np.empty((c, 3), dtype=np.float64)
    cdef double[::1] area = area_np
    cdef double[:, ::1] cen = cen_np
    cdef Py_ssize_t i, j, nv, jn
    cdef double px[64]
    cdef double py[64]
    cdef double pz[64]
    cdef double hx, hy, hz, nrm, tri, asum
    cdef double sx, sy, sz, num, den
    cdef double cr[3]
    cdef double p2x, p2y, p2z, p3x, p3y, p3z

    with nogil:
        for i in range(c):
            nv = cell_nv[i]
            hx = 0.0
            hy = 0.0
            hz = 0.0
            for j in range(nv):
                px[j] = vertices[cell_vertices[i, j], 0]
                py[j] = vertices[cell_vertices[i, j], 1]
                pz[j] = vertices[cell_vertices[i, j], 2]
                nrm = sqrt(px[j] * px[j] + py[j] * py[j] + pz[j] * pz[j])
                px[j] /= nrm
                py[j] /= nrm
                pz[j] /= nrm
                hx += px[j]
                hy += py[j]
                hz += pz[j]
            nrm = sqrt(hx * hx + hy * hy + hz * hz)
            hx /= nrm
            hy /= nrm
            hz /= nrm
            asum = 0.0
            sx = 0.0
            sy = 0.0
            sz = 0.0
            for j in range(nv):
                jn = j + 1 if j + 1 < nv else 0
                p2x = px[j]
                p2y = py[j]
                p2z = pz[j]
                p3x = px[jn]
                p3y = py[jn]
                p3z = pz[jn]
                _cross3(p2x, p2y, p2z, p3x, p3y, p3z, cr)
                num = hx * cr[0] + hy * cr[1] + hz * cr[2]
                den = (1.0 + hx * p2x + hy * p2y + hz * p2z
                       + p2x * p3x + p2y * p3y + p2z * p3z
                       + p3x * hx + p3y * hy + p3z * hz)
                tri = 2.0 * atan2(num, den)
                asum += tri
                sx += tri * (hx + p2x + p3x) / 3.0
                sy += tri * (hy + p2y + p3y) / 3.0
                sz += tri * (hz + p2z + p3z) / 3.0
            area[i] = asum * radius * radius
            nrm = sqrt(sx * sx + sy * sy + sz * sz)
            if nrm > 0.0:
                cen[i, 0] = radius * sx / nrm
                cen[i, 1] = radius * sy / nrm
                cen[i, 2] = radius * sz / nrm
            else:
                cen[i, 0] = radius * hx
                cen[i, 1] = radius * hy
                cen[i, 2] = radius * hz
    return area_np, cen_np


def plane_face_geometry(double[:, ::1] vertices, i64[:, ::1] face_vertices,
                        i64[::1] owner, i64[::1] neighbour,
                        double[:, ::1] centroids, double lx, double ly):
    cdef Py_ssize_t f = face_vertices.shape[0]
    s_np = np.empty((f, 2), dtype=np.float64)
    fc_np = np.empty((f, 2), dtype=np.float64)
    d_np = np.empty((f, 2), dtype=np.float64)
    dm_np = np.empty(f, dtype=np.float64)
    lam_np = np.empty(f, dtype=np.float64)
    cdef double[:, ::1] s = s_np
    cdef double[:, ::1] fc = fc_np
    cdef double[:, ::1] d = d_np
    cdef double[::1] dm = dm_np
    cdef double[::1] lam = lam_np
    cdef Py_ssize_t i
    cdef double ex, ey, fx, fy, dx, dy, nx, ny

    with nogil:
        for i in range(f):
            ex = _wrap(vertices[face_vertices[i, 1], 0] - vertices[face_vertices[i, 0], 0], lx)
            ey = _wrap(vertices[face_vertices[i, 1], 1] - vertices[face_vertices[i, 0], 1], ly)
            s[i, 0] = ey
            s[i, 1] = -ex
            fx = vertices[face_vertices[i, 0], 0] + 0.5 * ex
            fy = vertices[face_vertices[i, 0], 1] + 0.5 * ey
            fc[i, 0] = _wrap(fx, lx)
            fc[i, 1] = _wrap(fy, ly)
            dx = _wrap(centroids[neighbour[i], 0] - centroids[owner[i], 0], lx)
            dy = _wrap(centroids[neighbour[i], 1] - centroids[owner[i], 1], ly)
            d[i, 0] = dx
            d[i, 1] = dy
            dm[i] = sqrt(dx * dx + dy * dy)
            nx = _wrap(centroids[neighbour[i], 0] - fc[i, 0], lx)
            ny = _wrap(centroids[neighbour[i], 1] - fc[i, 1], ly)
            if dm[i] > 0.0:
                lam[i] = sqrt(nx * nx + ny * ny) / dm[i]
            else:
                lam[i] = 0.5
    return s_np, fc_np, d_np, dm_np, lam_np


def sphere_face_geometry(double[:, ::1] vertices, i64[:, ::1] face_vertices,
                         i64[::1] owner, i64[::1] neighbour,
                         double[:, ::1] centroids, double radius):
    cdef Py_ssize_t f = face_vertices.shape[0]
    s_np = np.empty((f, 3), dtype=np.float64)
    fc_np = np.empty((f, 3), dtype=np.float64)
    d_np = np.empty((f, 3), dtype=np.float64)
    dm_np = np.empty(f, dtype=np.float64)
    lam_np = np.empty(f, dtype=np.float64)
    cdef double[:, ::1] s = s_np
    cdef double[:, ::1] fc = fc_np
    cdef double[:, ::1] d = d_np
    cdef double[::1] dm = dm_np
    cdef double[::1] lam = lam_np
    cdef Py_ssize_t i, m
    cdef double p1[3]
    cdef double p2[3]
    cdef double co[3]
    cdef double cn[3]
    cdef double cr[3]
    cdef double mid[3]
    cdef double tang[3]
    cdef double sdir[3]
    cdef double nrm, sin_t, cos_t, theta, arc, fn

    with nogil:
        for i in range(f):
            for m in range(3):
                p1[m] = vertices[face_vertices[i, 0], m]
                p2[m] = vertices[face_vertices[i, 1], m]
            nrm = sqrt(p1[0] * p1[0] + p1[1] * p1[1] + p1[2] * p1[2])
            for m in range(3):
                p1[m] /= nrm
            nrm = sqrt(p2[0] * p2[0] + p2[1] * p2[1] + p2[2] * p2[2])
            for m in range(3):
                p2[m] /= nrm
            _cross3(p1[0], p1[1], p1[2], p2[0], p2[1], p2[2], cr)
            sin_t = sqrt(cr[0] * cr[0] + cr[1] * cr[1] + cr[2] * cr[2])
            cos_t = p1[0] * p2[0] + p1[1] * p2[1] + p1[2] * p2[2]
            theta = atan2(sin_t, cos_t)
            arc = radius * theta
            for m in range(3):
                mid[m] = p1[m] + p2[m]
            nrm = sqrt(mid[0] * mid[0] + mid[1] * mid[1] + mid[2] * mid[2])
            for m in range(3):
                mid[m] /= nrm
            if sin_t > 0.0:
                for m in range(3):
                    cr[m] /= sin_t
            _cross3(cr[0], cr[1], cr[2], mid[0], mid[1], mid[2], tang)
            _cross3(tang[0], tang[1], tang[2], mid[0], mid[1], mid[2], sdir)
            for m in range(3):
                s[i, m] = arc * sdir[m]
                fc[i, m] = radius * mid[m]

            for m in range(3):
                co[m] = centroids[owner[i], m]
                cn[m] = centroids[neighbour[i], m]
            nrm = sqrt(co[0] * co[0] + co[1] * co[1] + co[2] * co[2])
            for m in range(3):
                co[m] /= nrm
            nrm = sqrt(cn[0] * cn[0] + cn[1] * cn[1] + cn[2] * cn[2])
            for m in range(3):
                cn[m] /= nrm
            for m in range(3):
                d[i, m] = radius * (cn[m] - co[m])
            _cross3(co[0], co[1], co[2], cn[0], cn[1], cn[2], cr)
            sin_t = sqrt(cr[0] * cr[0] + cr[1] * cr[1] + cr[2] * cr[2])
            cos_t = co[0] * cn[0] + co[1] * cn[1] + co[2] * cn[2]
            dm[i] = radius * atan2(sin_t, cos_t)
            _cross3(mid[0], mid[1], mid[2], cn[0], cn[1], cn[2], cr)
            sin_t = sqrt(cr[0] * cr[0] + cr[1] * cr[1] + cr[2] * cr[2])
            cos_t = mid[0] * cn[0] + mid[1] * cn[1] + mid[2] * cn[2]
            fn = radius * atan2(sin_t, cos_t)
            if dm[i] > 0.0:
                lam[i] = fn / dm[i]
            else:
                lam[i] = 0.5
    return s_np, fc_np, d_np, dm_np, lam_np
