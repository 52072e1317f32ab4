"""Coefficient form of the discrete metric and its exact derivatives.

For one ambient component, every bilinear form used here can be written in
edge variables ``ubar_i = (u_i + u_{i+1})/2`` and ``du_i = u_{i+1} - u_i`` as

    ubar^T A vbar + du^T B vbar + dv^T B ubar + du^T C dv

with ``(n, n)`` edge matrices ``A, B, C`` that depend on the curve only.  The
same scalar matrix acts on every component, so the Gram matrix over vertex
coordinates is ``kron(M, I_m)``.

The pair contributions to ``A, B, C`` come from four coefficient arrays

    c0_ij  multiplies <ubar_j - ubar_i, vbar_j - vbar_i>
    c1_ij  multiplies <ubar_j - ubar_i, dv_i> + <vbar_j - vbar_i, du_i>
    c2_ij  multiplies <du_i, dv_i>
    c3_ij  multiplies <du_j, dv_j>

each a sum of monomials ``k * a^pa * d^pd * li^pli * lj^plj`` in the chord
component along the first edge ``a``, the chord length ``d`` and the two edge
lengths.  Derivatives with respect to the curve follow by the chain rule
through those four pair variables.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .kernel import PairTable, rs_apply, self_correction_constant

FORMS = ("B1", "B2", "B3", "H1", "L2")


def metric_weights(s: float) -> dict:
    return {"B1": 2.0, "B2": 2.0 * s + 1.0, "B3": 1.0, "H1": 1.0, "L2": 1.0}


def _monomials(s):
    q = -1.0 - 2.0 * s
    return {
        "B1": {
            "c0": [(1.0, 0, q, 1, 1)],
            "c1": [(-1.0, 1, q, 0, 1)],
            "c2": [(1.0, 2, q, -1, 1)],
        },
        # |R gamma|^2 w / d^2 = (d^2 - a^2) li lj d^(q-2)
        "B2": {"c0": [(1.0, 0, q, 1, 1), (-1.0, 2, q - 2, 1, 1)]},
        "B3": {
            "c2": [(1.0, 0, q + 2, -1, 1), (-1.0, 2, q, -1, 1)],
            "c3": [(1.0, 0, q + 2, 1, -1), (-1.0, 2, q, 1, -1)],
        },
    }


@lru_cache(maxsize=16)
def _edge_operators(n):
    eye = np.eye(n)
    shift = np.roll(eye, 1, axis=1)  # shift[i, i+1] = 1
    return 0.5 * (eye + shift), shift - eye


def _laplacian(k):
    return np.diag(k.sum(axis=0) + k.sum(axis=1)) - k - k.T


def _roll(x, k):
    return np.roll(x, k, axis=0)


def _dot(x, y):
    return np.einsum("ik,ik->i", x, y)


class Assembly:
    """Weighted sum of the metric forms at one curve.

    ``weights`` maps form names (``B1 B2 B3 H1 L2``) to coefficients; missing
    names count as zero.
    """

    def __init__(self, table: PairTable, weights: dict):
        unknown = set(weights) - set(FORMS)
        if unknown:
            raise ValueError(f"unknown forms {sorted(unknown)}")
        self.table = table
        self.s = s = table.s
        self.w = {f: float(weights.get(f, 0.0)) for f in FORMS}
        terms = {"c0": [], "c1": [], "c2": [], "c3": []}
        for form, coeffs in _monomials(s).items():
            wf = self.w[form]
            if wf == 0.0:
                continue
            for name, monos in coeffs.items():
                terms[name].extend((wf * k, pa, pd, pli, plj) for k, pa, pd, pli, plj in monos)
        self._terms = terms
        self._eval()
        self._setup_self_terms()

    # -- pair coefficients -------------------------------------------------

    def _eval(self):
        t = self.table
        d = t.safe_dist
        a = t.along
        li = t.lengths[:, None]
        lj = t.lengths[None, :]
        mask = t.mask.astype(float)
        dpow = {}
        self.coef = {}
        self.partials = {}
        for name, monos in self._terms.items():
            val = np.zeros_like(d)
            da = np.zeros_like(d)
            dd = np.zeros_like(d)
            dli = np.zeros_like(d)
            dlj = np.zeros_like(d)
            for k, pa, pd, pli, plj in monos:
                if pd not in dpow:
                    dpow[pd] = d**pd
                rest = k * dpow[pd] * li**pli * lj**plj * mask
                term = rest * a**pa
                val += term
                if pa:
                    da += pa * rest * a ** (pa - 1)
                dd += pd * term / d
                dli += pli * term / li
                dlj += plj * term / lj
            self.coef[name] = val
            self.partials[name] = (da, dd, dli, dlj)

    # -- singular self-correction ----------------------------------------

    def _setup_self_terms(self):
        t = self.table
        self.has_self = t.quad.self_correction and (
            self.w["B1"] != 0.0 or self.w["B2"] != 0.0 or self.w["B3"] != 0.0
        )
        if not self.has_self:
            return
        s = self.s
        ell = t.lengths
        x = t.vertices
        self.zc = self_correction_constant(s)
        self.sigma = self.zc * ell ** (5 - 2 * s)
        self.lam = 0.5 * _roll(ell, 1) + ell + 0.5 * _roll(ell, -1)
        self.alpha = 1.0 / (_roll(ell, -1) * self.lam)
        self.beta = 1.0 / (_roll(ell, 1) * self.lam)
        self.edges = _roll(x, -1) - x
        self.d2gamma = self._second(self.edges)
        self.kappa2 = _dot(self.d2gamma, self.d2gamma)
        self.w23 = self.w["B2"] + 2.0 * self.w["B3"]

    def _second(self, du, alpha=None, beta=None):
        alpha = self.alpha if alpha is None else alpha
        beta = self.beta if beta is None else beta
        return alpha[:, None] * _roll(du, -1) - beta[:, None] * _roll(du, 1)

    def _stencil_matrix(self, alpha, beta):
        n = alpha.size
        idx = np.arange(n)
        out = np.zeros((n, n))
        out[idx, (idx + 1) % n] += alpha
        out[idx, (idx - 1) % n] -= beta
        return out

    # -- assembly ---------------------------------------------------------

    def edge_matrices(self):
        ell = self.table.lengths
        A = _laplacian(self.coef["c0"]) + self.w["L2"] * np.diag(ell)
        c1 = self.coef["c1"]
        B = c1 - np.diag(c1.sum(axis=1))
        C = np.diag(self.coef["c2"].sum(axis=1) + self.coef["c3"].sum(axis=0) + self.w["H1"] / ell)
        if self.has_self:
            S = self._stencil_matrix(self.alpha, self.beta)
            C = C + self.w["B1"] * (S.T * self.sigma) @ S
            C = C + np.diag(self.w23 * self.zc * ell ** (3 - 2 * self.s) * self.kappa2)
        return A, B, C

    @staticmethod
    def _to_vertices(A, B, C):
        avg, diff = _edge_operators(A.shape[0])
        cross = diff.T @ B @ avg
        M = avg.T @ A @ avg + cross + cross.T + diff.T @ C @ diff
        return 0.5 * (M + M.T)

    def scalar_matrix(self) -> np.ndarray:
        return self._to_vertices(*self.edge_matrices())

    def value(self, u, v) -> float:
        """Form value from the pairwise definitions.

        Summing the expanded coefficient form instead loses digits to
        cancellation between near-diagonal terms, roughly ``n^2`` eps.
        """
        t = self.table
        w = self.w
        ell = t.lengths
        ub, vb = 0.5 * (u + _roll(u, -1)), 0.5 * (v + _roll(v, -1))
        du, dv = _roll(u, -1) - u, _roll(v, -1) - v
        p2 = _dot(du, dv)
        total = w["H1"] * np.sum(p2 / ell) + w["L2"] * np.sum(_dot(ub, vb) * ell)
        if w["B1"]:
            ru, rv = rs_apply(t, u), rs_apply(t, v)
            total += w["B1"] * np.sum(np.einsum("ijk,ijk->ij", ru, rv) * t.weights)
        if w["B2"] or w["B3"]:
            dens = np.einsum("ijk,ijk->ij", t.rs_gamma, t.rs_gamma) * t.weights
            if w["B2"]:
                g = _dot(ub, vb)
                gm = ub @ vb.T
                chord = g[:, None] + g[None, :] - gm - gm.T
                total += w["B2"] * np.sum(dens * chord / t.safe_dist**2)
            if w["B3"]:
                q = p2 / ell**2
                total += w["B3"] * np.sum(dens * (q[:, None] + q[None, :]))
        if self.has_self:
            total += w["B1"] * np.sum(self.sigma * _dot(self._second(du), self._second(dv)))
            total += self.w23 * np.sum(self.zc * ell ** (3 - 2 * self.s) * self.kappa2 * p2)
        return float(total)

    # -- reverse mode: gradient of gamma -> form(u, v) ---------------------

    def vjp(self, u, v) -> np.ndarray:
        t = self.table
        ell = t.lengths
        ub, vb = 0.5 * (u + _roll(u, -1)), 0.5 * (v + _roll(v, -1))
        du, dv = _roll(u, -1) - u, _roll(v, -1) - v
        g = _dot(ub, vb)
        gm = ub @ vb.T
        p0 = g[:, None] + g[None, :] - gm - gm.T
        p1 = dv @ ub.T - _dot(ub, dv)[:, None] + du @ vb.T - _dot(vb, du)[:, None]
        p2 = _dot(du, dv)
        adj = {"c0": p0, "c1": p1, "c2": p2[:, None], "c3": p2[None, :]}

        abar = np.zeros_like(p0)
        dbar = np.zeros_like(p0)
        lbar = np.zeros_like(ell)
        for name, (da, dd, dli, dlj) in self.partials.items():
            pc = adj[name]
            abar += da * pc
            dbar += dd * pc
            lbar += (dli * pc).sum(axis=1) + (dlj * pc).sum(axis=0)
        lbar += -self.w["H1"] * p2 / ell**2 + self.w["L2"] * g
        ebar = np.zeros_like(u)
        if self.has_self:
            lbar_s, ebar_s = self._self_vjp(du, dv, p2)
            lbar += lbar_s
            ebar += ebar_s
        return self._geometry_vjp(dbar, abar, lbar, ebar)

    def _self_vjp(self, du, dv, p2):
        s = self.s
        ell = self.table.lengths
        sigma, alpha, beta = self.sigma, self.alpha, self.beta
        w1 = self.w["B1"]
        d2u, d2v = self._second(du), self._second(dv)
        sbar = w1 * _dot(d2u, d2v)
        abar = w1 * sigma * (_dot(_roll(du, -1), d2v) + _dot(d2u, _roll(dv, -1)))
        bbar = -w1 * sigma * (_dot(_roll(du, 1), d2v) + _dot(d2u, _roll(dv, 1)))

        lbar = self.w23 * self.zc * (3 - 2 * s) * ell ** (2 - 2 * s) * self.kappa2 * p2
        kbar = self.w23 * self.zc * ell ** (3 - 2 * s) * p2
        dg = self.d2gamma
        abar = abar + 2 * kbar * _dot(dg, _roll(self.edges, -1))
        bbar = bbar - 2 * kbar * _dot(dg, _roll(self.edges, 1))
        ebar = _roll(2 * (kbar * alpha)[:, None] * dg, 1) - _roll(2 * (kbar * beta)[:, None] * dg, -1)

        lbar = lbar + sbar * (5 - 2 * s) * sigma / ell
        lbar = lbar + _roll(-abar * alpha / _roll(ell, -1), 1) + _roll(-bbar * beta / _roll(ell, 1), -1)
        lam_bar = -(abar * alpha + bbar * beta) / self.lam
        lbar = lbar + lam_bar + 0.5 * (_roll(lam_bar, 1) + _roll(lam_bar, -1))
        return lbar, ebar

    def _geometry_vjp(self, dbar, abar, lbar, ebar):
        t = self.table
        tau, ell, chords = t.tangents, t.lengths, t.chords
        unit = chords / t.safe_dist[:, :, None]
        # chord adjoint: dbar * chord/|chord| + abar * tau_i
        col = np.einsum("ij,ijk->jk", dbar, unit) + abar.T @ tau
        row = np.einsum("ij,ijk->ik", dbar, unit) + abar.sum(axis=1)[:, None] * tau
        pbar = col - row
        ebar = (
            ebar
            + (np.einsum("ij,ijk->ik", abar, chords) - (abar * t.along).sum(axis=1)[:, None] * tau)
            / ell[:, None]
            + lbar[:, None] * tau
        )
        return _roll(ebar, 1) - ebar + 0.5 * (pbar + _roll(pbar, 1))

    # -- forward mode: derivative of the scalar Gram matrix -----------------

    def jvp_matrix(self, w) -> np.ndarray:
        t = self.table
        tau, ell, chords = t.tangents, t.lengths, t.chords
        edot = _roll(w, -1) - w
        pdot = 0.5 * (w + _roll(w, -1))
        ldot = _dot(tau, edot)
        chdot = pdot[None, :, :] - pdot[:, None, :]
        ddot = np.einsum("ijk,ijk->ij", chords, chdot) / t.safe_dist
        adot = np.einsum("ik,ijk->ij", tau, chdot) + (
            np.einsum("ik,ijk->ij", edot, chords) - t.along * ldot[:, None]
        ) / ell[:, None]
        cdot = {}
        for name, (da, dd, dli, dlj) in self.partials.items():
            cdot[name] = da * adot + dd * ddot + dli * ldot[:, None] + dlj * ldot[None, :]
        A = _laplacian(cdot["c0"]) + self.w["L2"] * np.diag(ldot)
        B = cdot["c1"] - np.diag(cdot["c1"].sum(axis=1))
        C = np.diag(cdot["c2"].sum(axis=1) + cdot["c3"].sum(axis=0) - self.w["H1"] * ldot / ell**2)
        if self.has_self:
            C = C + self._self_jvp(ldot, edot)
        return self._to_vertices(A, B, C)

    def _self_jvp(self, ldot, edot):
        s = self.s
        ell = self.table.lengths
        sigma, alpha, beta, lam = self.sigma, self.alpha, self.beta, self.lam
        sdot = (5 - 2 * s) * sigma * ldot / ell
        lamdot = ldot + 0.5 * (_roll(ldot, 1) + _roll(ldot, -1))
        adot = -alpha * (_roll(ldot, -1) / _roll(ell, -1) + lamdot / lam)
        bdot = -beta * (_roll(ldot, 1) / _roll(ell, 1) + lamdot / lam)
        S = self._stencil_matrix(alpha, beta)
        Sdot = self._stencil_matrix(adot, bdot)
        cross = (Sdot.T * sigma) @ S
        out = self.w["B1"] * (cross + cross.T + (S.T * sdot) @ S)
        e = self.edges
        kdot = 2 * _dot(
            self.d2gamma,
            adot[:, None] * _roll(e, -1)
            + alpha[:, None] * _roll(edot, -1)
            - bdot[:, None] * _roll(e, 1)
            - beta[:, None] * _roll(edot, 1),
        )
        diag = self.zc * ((3 - 2 * s) * ell ** (2 - 2 * s) * ldot * self.kappa2 + ell ** (3 - 2 * s) * kdot)
        return out + np.diag(self.w23 * diag)
