"""Numba kernels for the velocity-grid collision quadratures.

All heavy loops live here: the linearized gain operator, the bilinear
gain term, and pairwise loss/convolution sums.  Layout conventions:

* nodes: (M, 3) cell-centered coordinates, M = N^3, C-order over (x, y, z);
* fields are passed both flat (M,) and cubic (N, N, N) where interpolation
  at post-collisional points is needed;
* the sphere rule is a Gauss-Legendre x uniform-azimuth product rule on the
  hemisphere around e = (v-u)/|v-u|; the integrand is even in omega, and
  the angular factor |cos theta| is folded into the rule weights.

The collisional geometry of an unordered node pair {i, j} is shared by the
two ordered contributions (the integrand bracket is symmetric under the
(u', v') swap induced by reversing the pair), so each kernel walks ordered
pairs i < j once and scatters into per-thread output buffers.

Post-collisional points falling outside the grid contribute zero; the
dropped quadrature weight is accumulated ("leakage").
"""

import numpy as np
import numba
from numba import njit, prange

# chi modes for the near-diagonal cutoff split
CHI_NONE = 0
CHI_FAR = 1    # multiply by chi        (support |v-u| >= eps)
CHI_NEAR = 2   # multiply by 1 - chi    (support |v-u| <= 2 eps)


@njit(cache=True, inline="always")
def chi_smoothstep(r, eps):
    if r <= eps:
        return 0.0
    if r >= 2.0 * eps:
        return 1.0
    x = (r - eps) / eps
    return x * x * (3.0 - 2.0 * x)


@njit(cache=True, inline="always")
def _chi_factor(r, eps, mode):
    if mode == CHI_NONE:
        return 1.0
    c = chi_smoothstep(r, eps)
    return c if mode == CHI_FAR else 1.0 - c


@njit(cache=True, inline="always")
def _cubic_weights(s):
    # Catmull-Rom weights for fractional offset s in [0, 1)
    s2 = s * s
    s3 = s2 * s
    w0 = -0.5 * s3 + s2 - 0.5 * s
    w1 = 1.5 * s3 - 2.5 * s2 + 1.0
    w2 = -1.5 * s3 + 2.0 * s2 + 0.5 * s
    w3 = 0.5 * s3 - 0.5 * s2
    return w0, w1, w2, w3


@njit(cache=True, fastmath=True)
def _interp3(F3, n, R, h, x, y, z, order):
    """Interpolate the cell-centered field F3 at (x, y, z).

    Returns (value, ok); ok is False when the point has no full trilinear
    stencil inside the grid.  Cubic interpolation falls back to trilinear
    near the boundary.
    """
    tx = (x + R) / h - 0.5
    ty = (y + R) / h - 0.5
    tz = (z + R) / h - 0.5
    ix = int(np.floor(tx))
    iy = int(np.floor(ty))
    iz = int(np.floor(tz))
    if ix < 0 or ix > n - 2 or iy < 0 or iy > n - 2 or iz < 0 or iz > n - 2:
        return 0.0, False
    sx = tx - ix
    sy = ty - iy
    sz = tz - iz
    if (order >= 3 and 1 <= ix <= n - 3 and 1 <= iy <= n - 3
            and 1 <= iz <= n - 3):
        wx = _cubic_weights(sx)
        wy = _cubic_weights(sy)
        wz0, wz1, wz2, wz3 = _cubic_weights(sz)
        val = 0.0
        for a in range(4):
            wa = wx[a]
            ia = ix - 1 + a
            for b in range(4):
                wab = wa * wy[b]
                ib = iy - 1 + b
                val += wab * (wz0 * F3[ia, ib, iz - 1] +
                              wz1 * F3[ia, ib, iz] +
                              wz2 * F3[ia, ib, iz + 1] +
                              wz3 * F3[ia, ib, iz + 2])
        return val, True
    # trilinear
    c00 = F3[ix, iy, iz] * (1 - sx) + F3[ix + 1, iy, iz] * sx
    c10 = F3[ix, iy + 1, iz] * (1 - sx) + F3[ix + 1, iy + 1, iz] * sx
    c01 = F3[ix, iy, iz + 1] * (1 - sx) + F3[ix + 1, iy, iz + 1] * sx
    c11 = F3[ix, iy + 1, iz + 1] * (1 - sx) + F3[ix + 1, iy + 1, iz + 1] * sx
    c0 = c00 * (1 - sy) + c10 * sy
    c1 = c01 * (1 - sy) + c11 * sy
    return c0 * (1 - sz) + c1 * sz, True


@njit(cache=True, inline="always")
def _frame(ex, ey, ez):
    """Orthonormal pair (e1, e2) completing the unit vector e."""
    if abs(ex) < 0.9:
        ax, ay, az = 1.0, 0.0, 0.0
    else:
        ax, ay, az = 0.0, 1.0, 0.0
    d = ax * ex + ay * ey + az * ez
    bx = ax - d * ex
    by = ay - d * ey
    bz = az - d * ez
    bn = np.sqrt(bx * bx + by * by + bz * bz)
    bx /= bn
    by /= bn
    bz /= bn
    cx = ey * bz - ez * by
    cy = ez * bx - ex * bz
    cz = ex * by - ey * bx
    return bx, by, bz, cx, cy, cz


@njit(cache=True, parallel=True, fastmath=True)
def k2_apply(f_flat, f3, nodes, speed_sq, sqmu, h3, gamma,
             eps, chi_mode, prune, self_coef, mu_norm34,
             cw, cnod, cphi, sphi, n, R, h, order, out_buf, leak_buf):
    """Linearized gain operator K2 applied to f.

    (K2 f)(v) = int int |v-u|^g q0 sqrt(mu(u)) [sqrt(mu(v')) f(u')
                + sqrt(mu(u')) f(v')] dw du

    sqrt(mu) at the post-collisional points is evaluated exactly using
    |u'|^2 + |v'|^2 = |u|^2 + |v|^2 (one exp per pair plus one per omega
    node).  Pairs where both endpoints have sqrt(mu) below ``prune`` are
    skipped.  ``self_coef`` is the radial integral of the chi-weighted
    |eta|^gamma over the equal-volume ball of the central cell.
    """
    M = nodes.shape[0]
    nc = cnod.shape[0]
    nphi = cphi.shape[0]
    for i in prange(M):
        tid = numba.get_thread_id()
        vx = nodes[i, 0]
        vy = nodes[i, 1]
        vz = nodes[i, 2]
        v2 = speed_sq[i]
        smu_i = sqmu[i]
        for j in range(i + 1, M):
            smu_j = sqmu[j]
            if smu_i < prune and smu_j < prune:
                continue
            dx = vx - nodes[j, 0]
            dy = vy - nodes[j, 1]
            dz = vz - nodes[j, 2]
            dn2 = dx * dx + dy * dy + dz * dz
            dn = np.sqrt(dn2)
            cf = _chi_factor(dn, eps, chi_mode)
            if cf == 0.0:
                continue
            base = h3 * cf * dn ** gamma * mu_norm34
            e4 = np.exp(-0.25 * (v2 + speed_sq[j]))
            ex = dx / dn
            ey = dy / dn
            ez = dz / dn
            b1x, b1y, b1z, b2x, b2y, b2z = _frame(ex, ey, ez)
            ssum = 0.0
            lsum = 0.0
            for ip in range(nphi):
                qx = cphi[ip] * b1x + sphi[ip] * b2x
                qy = cphi[ip] * b1y + sphi[ip] * b2y
                qz = cphi[ip] * b1z + sphi[ip] * b2z
                for ic in range(nc):
                    c = cnod[ic]
                    s = np.sqrt(1.0 - c * c)
                    proj = dn * c
                    wx = c * ex + s * qx
                    wy = c * ey + s * qy
                    wz = c * ez + s * qz
                    vpx = vx - proj * wx
                    vpy = vy - proj * wy
                    vpz = vz - proj * wz
                    # u' = u + proj*w = v - d + proj*w
                    upx = vx - dx + proj * wx
                    upy = vy - dy + proj * wy
                    upz = vz - dz + proj * wz
                    vp2 = vpx * vpx + vpy * vpy + vpz * vpz
                    a = np.exp(-0.25 * vp2)
                    smu_up = e4 / a
                    fu, oku = _interp3(f3, n, R, h, upx, upy, upz, order)
                    fv, okv = _interp3(f3, n, R, h, vpx, vpy, vpz, order)
                    # symmetric bracket, shared by both pair orientations
                    term = 0.0
                    if oku:
                        term += a * fu
                    else:
                        lsum += cw[ic] * a
                    if okv:
                        term += smu_up * fv
                    else:
                        lsum += cw[ic] * smu_up
                    ssum += cw[ic] * term
            out_buf[tid, i] += base * smu_j * ssum
            out_buf[tid, j] += base * smu_i * ssum
            leak_buf[tid, i] += base * smu_j * lsum
            leak_buf[tid, j] += base * smu_i * lsum
        # self cell: u = v, hence u' = u and v' = v at the cell center
        mu_v = smu_i * smu_i
        out_buf[tid, i] += self_coef * 2.0 * np.pi * 2.0 * mu_v * f_flat[i]


@njit(cache=True, parallel=True, fastmath=True)
def gain_apply(G3, F3, G_flat, F_flat, nodes, h3, gamma, prune_g, prune_f,
               same_field, self_coef, cw, cnod, cphi, sphi,
               n, R, h, order, out_buf, leak_buf):
    """Bilinear gain term Q+(G, F)(v) = int int B G(u') F(v') dw du.

    Pair {i, j} is skipped when max(|G|, |F|) at both endpoints is below
    the pruning thresholds (the integrand is a product of interpolated
    values near those endpoints only in the aggregate; pruning is by the
    magnitude of the fields themselves and is safe for fields with
    Maxwellian-type tails).  When ``same_field`` both orientations share
    the product G(u')G(v').
    """
    M = nodes.shape[0]
    nc = cnod.shape[0]
    nphi = cphi.shape[0]
    for i in prange(M):
        tid = numba.get_thread_id()
        vx = nodes[i, 0]
        vy = nodes[i, 1]
        vz = nodes[i, 2]
        gi = abs(G_flat[i])
        fi = abs(F_flat[i])
        for j in range(i + 1, M):
            if ((abs(G_flat[j]) < prune_g and fi < prune_f)
                    and (gi < prune_g and abs(F_flat[j]) < prune_f)):
                continue
            dx = vx - nodes[j, 0]
            dy = vy - nodes[j, 1]
            dz = vz - nodes[j, 2]
            dn2 = dx * dx + dy * dy + dz * dz
            dn = np.sqrt(dn2)
            base = h3 * dn ** gamma
            ex = dx / dn
            ey = dy / dn
            ez = dz / dn
            b1x, b1y, b1z, b2x, b2y, b2z = _frame(ex, ey, ez)
            acc_ij = 0.0
            acc_ji = 0.0
            lsum = 0.0
            for ip in range(nphi):
                qx = cphi[ip] * b1x + sphi[ip] * b2x
                qy = cphi[ip] * b1y + sphi[ip] * b2y
                qz = cphi[ip] * b1z + sphi[ip] * b2z
                for ic in range(nc):
                    c = cnod[ic]
                    s = np.sqrt(1.0 - c * c)
                    proj = dn * c
                    wx = c * ex + s * qx
                    wy = c * ey + s * qy
                    wz = c * ez + s * qz
                    vpx = vx - proj * wx
                    vpy = vy - proj * wy
                    vpz = vz - proj * wz
                    upx = vx - dx + proj * wx
                    upy = vy - dy + proj * wy
                    upz = vz - dz + proj * wz
                    gu, oku = _interp3(G3, n, R, h, upx, upy, upz, order)
                    fv, okv = _interp3(F3, n, R, h, vpx, vpy, vpz, order)
                    if oku and okv:
                        acc_ij += cw[ic] * gu * fv
                    else:
                        lsum += cw[ic]
                    if not same_field:
                        gv, okg = _interp3(G3, n, R, h, vpx, vpy, vpz, order)
                        fu, okf = _interp3(F3, n, R, h, upx, upy, upz, order)
                        if okg and okf:
                            acc_ji += cw[ic] * gv * fu
                        else:
                            lsum += cw[ic]
            if same_field:
                acc_ji = acc_ij
            out_buf[tid, i] += base * acc_ij
            out_buf[tid, j] += base * acc_ji
            leak_buf[tid, i] += base * lsum
            leak_buf[tid, j] += base * lsum
        out_buf[tid, i] += self_coef * 2.0 * np.pi * G_flat[i] * F_flat[i]


@njit(cache=True, parallel=True, fastmath=True)
def pairwise_gamma_sum(g_flat, nodes, h3, gamma, eps, chi_mode,
                       self_coef, out_buf):
    """out(v) = h3 * sum_u chi_w(|v-u|) |v-u|^gamma g(u) + self_coef * g(v).

    Building block for the loss integral and for K1 (angular constant not
    included).  The near-diagonal radial cell integral is folded into
    self_coef by the caller.
    """
    M = nodes.shape[0]
    for i in prange(M):
        tid = numba.get_thread_id()
        vx = nodes[i, 0]
        vy = nodes[i, 1]
        vz = nodes[i, 2]
        for j in range(i + 1, M):
            dx = vx - nodes[j, 0]
            dy = vy - nodes[j, 1]
            dz = vz - nodes[j, 2]
            dn = np.sqrt(dx * dx + dy * dy + dz * dz)
            cf = _chi_factor(dn, eps, chi_mode)
            if cf == 0.0:
                continue
            w = h3 * cf * dn ** gamma
            out_buf[tid, i] += w * g_flat[j]
            out_buf[tid, j] += w * g_flat[i]
        out_buf[tid, i] += self_coef * g_flat[i]
