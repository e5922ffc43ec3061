"""Geostrophic limit dynamics and the singular wave operator diagnostics.

Three pieces live here:

* the penalized wave operator ``(r, V) -> (div V, c e3 x V + grad (Id - lap) r)``
  together with residuals measuring distance to its kernel (the geostrophic
  states);
* the constant-rotation limit equation, a quasi-geostrophic evolution for the
  stream-ish scalar r with q = (Id - lap + lap^2) r, X = (Id - lap) r:

      dq/dt + J(X, q) + (nu/2) lap^2 X = 0,

  integrated by an integrating-factor RK4 (the linear symbol is handled by an
  exact exponential);
* the variable-rotation limit equation, which is linear but has a
  variable-coefficient operator calculus:

      d/dt M(r) = -nu Dc^T Dc (X(r)),   M(r) = r - div(c^-2 grad X(r)),

  where Dc(f) = (grad v + grad v^T)/2 with v = c^-1 perp-grad f, and
  Dc^T G = curl_h(c^-1 div G). M is inverted by preconditioned CG in the
  substituted variable s = X(r), where the operator is symmetric positive
  definite; time stepping is Crank-Nicolson with the dissipative term lagged
  and iterated to tolerance.

All scalars of the limit dynamics live on a horizontal grid (nz = 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CflError, GridError, SolverError
from .grid import (
    SpectralField,
    VecField,
    apply_multiplier,
    check_same_grid,
    curl_h,
    diff,
    div_h,
    inner,
    invert_multiplier,
    jacobian,
    l2_norm,
    linf_norm,
    perp_grad,
    vertical_mean,
    zero_field,
)


def _horizontal_only(f):
    if f.grid.nz != 1:
        raise GridError("limit dynamics lives on a horizontal grid (nz = 1)")


def sym_X(grid):
    """Symbol of X = Id - lap."""
    return 1.0 + grid.ksq


def sym_q(grid):
    """Symbol of Id - lap + lap^2."""
    return 1.0 + grid.ksq + grid.ksq**2


def x_of(r):
    return apply_multiplier(r, sym_X(r.grid))


# -- singular wave operator ----------------------------------------------------


def apply_wave_operator(r, V, rotation):
    """(div V, c e3 x V + grad (Id - lap) r) on a shared grid."""
    check_same_grid(r, *V.components)
    if len(V) != 3:
        raise GridError("the wave operator acts on 3-component vector fields")
    g = r.grid
    c = rotation.c_field(g)
    X = x_of(r)
    comp1 = -(c * V[1]).dealias() + diff(X, 0)
    comp2 = (c * V[0]).dealias() + diff(X, 1)
    comp3 = diff(X, 2)
    from .grid import div as div3

    return div3(V), VecField(comp1, comp2, comp3)


def kernel_residual(r, V, rotation):
    """L2 distances of (r, V) from the geostrophic kernel structure.

    Returns five residuals: horizontal divergence of V^h, the vertical
    component, the vertical fluctuation of V, the geostrophic balance
    c <V^h> - perp-grad (Id - lap_h) <r>, and the transport compatibility
    <V^h> . grad_h c.
    """
    check_same_grid(r, *V.components)
    g = r.grid

    res_div = l2_norm(div_h(V))
    res_v3 = l2_norm(V[2]) if len(V) == 3 else 0.0

    if g.nz > 1:
        fluct = 0.0
        for comp in V:
            mean2d = vertical_mean(comp)
            from .grid import lift_horizontal

            fluct += l2_norm(comp - lift_horizontal(mean2d, g)) ** 2
        res_fluct = float(np.sqrt(fluct))
    else:
        res_fluct = 0.0

    v1 = vertical_mean(V[0])
    v2 = vertical_mean(V[1])
    rbar = vertical_mean(r)
    gh = v1.grid
    c = rotation.c_field(gh)
    X = x_of(rbar)
    pg = perp_grad(X)
    b1 = (c * v1).dealias() - pg[0]
    b2 = (c * v2).dealias() - pg[1]
    res_geo = float(np.sqrt(l2_norm(b1) ** 2 + l2_norm(b2) ** 2))

    gc = rotation.grad_h(gh)
    trans = (v1 * gc[0] + v2 * gc[1]).dealias()
    res_transport = l2_norm(trans)

    return {
        "div_h": res_div,
        "vertical_component": res_v3,
        "vertical_fluctuation": res_fluct,
        "geostrophic_balance": res_geo,
        "transport_compat": res_transport,
    }


# -- constant-rotation limit dynamics -------------------------------------------


@dataclass(frozen=True)
class QgState:
    r: SpectralField
    t: float = 0.0


def qg_rhs_const(r, nu):
    """dr/dt of the constant-rotation limit equation.

    Evaluated in the q form; the raw form (transport of lap^2 r) is
    algebraically identical since J(X, X) = 0.
    """
    _horizontal_only(r)
    g = r.grid
    q = apply_multiplier(r, sym_q(g))
    X = apply_multiplier(r, sym_X(g))
    dq = -1.0 * jacobian(X, q) - (0.5 * nu) * apply_multiplier(X, g.ksq**2)
    return invert_multiplier(dq, sym_q(g))


def qg_rhs_const_forms(r, nu):
    """Both algebraic forms of dq/dt, for cross-checking."""
    _horizontal_only(r)
    g = r.grid
    q = apply_multiplier(r, sym_q(g))
    X = apply_multiplier(r, sym_X(g))
    diss = (0.5 * nu) * apply_multiplier(X, g.ksq**2)
    dq_qform = -1.0 * jacobian(X, q) - diss
    lap2r = apply_multiplier(r, g.ksq**2)
    dq_raw = -1.0 * jacobian(X, lap2r) - diss
    return dq_qform, dq_raw


def qg_energy_const(r):
    """Quadratic invariant (1/2) sum (1+|k|^2)(1+|k|^2+|k|^4) |r_k|^2."""
    g = r.grid
    c = r.coeffs
    return 0.5 * float(np.sum(sym_X(g) * sym_q(g) * np.abs(c) ** 2)) * g.measure


def check_cfl_qg(r, dt):
    X = x_of(r)
    vel = perp_grad(X)
    umax = max(linf_norm(vel[0]), linf_norm(vel[1]))
    if umax > 1e-14:
        bound = 0.5 * r.grid.min_spacing() / umax
        if dt > bound:
            raise CflError(f"dt={dt:.3e} exceeds the advective bound {bound:.3e}")


def qg_step_const(state, nu, dt):
    """Integrating-factor RK4 on q; the linear symbol is integrated exactly."""
    r = state.r
    _horizontal_only(r)
    check_cfl_qg(r, dt)
    g = r.grid
    sq = sym_q(g)
    sx = sym_X(g)
    L = 0.5 * nu * g.ksq**2 * sx / sq
    E1 = np.exp(-0.5 * dt * L)
    E2 = np.exp(-dt * L)

    def N(qc):
        qf = SpectralField.from_spec(g, qc)
        Xf = SpectralField.from_spec(g, qc * sx / sq)
        return -jacobian(Xf, qf).coeffs

    q = r.coeffs * sq
    k1 = N(q)
    k2 = N(E1 * (q + 0.5 * dt * k1))
    k3 = N(E1 * q + 0.5 * dt * k2)
    k4 = N(E2 * q + dt * E1 * k3)
    qn = E2 * q + (dt / 6.0) * (E2 * k1 + 2.0 * E1 * (k2 + k3) + k4)
    rn = SpectralField.from_spec(g, qn / sq)
    return QgState(rn, state.t + dt)


# -- variable-rotation limit dynamics --------------------------------------------


def _cinv_field(grid, rotation, power=1):
    c = rotation.c_field(grid)
    return SpectralField.from_phys(grid, c.values ** (-float(power)))


def dc_operator(f, rotation):
    """Symmetric gradient of v = c^-1 perp-grad f: returns (D11, D12, D22)."""
    _horizontal_only(f)
    g = f.grid
    cinv = _cinv_field(g, rotation)
    pg = perp_grad(f)
    v1 = (cinv * pg[0]).dealias()
    v2 = (cinv * pg[1]).dealias()
    D11 = diff(v1, 0)
    D22 = diff(v2, 1)
    D12 = 0.5 * (diff(v2, 0) + diff(v1, 1))
    return D11, D12, D22


def dc_frobenius_sq(D):
    """Integral of the squared Frobenius norm of a symmetric 2x2 field."""
    D11, D12, D22 = D
    return inner(D11, D11) + 2.0 * inner(D12, D12) + inner(D22, D22)


def transpose_dc_dc(f, rotation):
    """The operator Dc^T Dc: curl_h(c^-1 div Dc(f)). Reduces to lap^2/2 at c=1."""
    _horizontal_only(f)
    g = f.grid
    D11, D12, D22 = dc_operator(f, rotation)
    w1 = diff(D11, 0) + diff(D12, 1)
    w2 = diff(D12, 0) + diff(D22, 1)
    cinv = _cinv_field(g, rotation)
    z1 = (cinv * w1).dealias()
    z2 = (cinv * w2).dealias()
    return diff(z2, 0) - diff(z1, 1)


def mass_operator_apply(r, rotation):
    """M(r) = r - div(c^-2 grad X(r)) with dealiased coefficient products."""
    _horizontal_only(r)
    g = r.grid
    X = x_of(r)
    cinv2 = _cinv_field(g, rotation, power=2)
    g1 = (cinv2 * diff(X, 0)).dealias()
    g2 = (cinv2 * diff(X, 1)).dealias()
    return r - (diff(g1, 0) + diff(g2, 1))


def solve_mass_operator(b, rotation, tol=1e-10, maxit=500):
    """Solve M(r) = b.

    Constant rotation inverts the diagonal symbol directly. Otherwise the
    substitution s = X(r) turns M into the symmetric positive definite
    operator s -> (Id - lap)^-1 s - div(c^-2 grad s), solved by CG with the
    mean-coefficient Fourier inverse as preconditioner.
    """
    _horizontal_only(b)
    g = b.grid
    if rotation.is_constant:
        cval = rotation.mean(g)
        sym = 1.0 + g.ksq * (1.0 + g.ksq) / cval**2
        return invert_multiplier(b, sym)

    b = b.dealias()
    cinv2 = _cinv_field(g, rotation, power=2)
    sx = sym_X(g)

    def op(s):
        t1 = invert_multiplier(s, sx)
        g1 = (cinv2 * diff(s, 0)).dealias()
        g2 = (cinv2 * diff(s, 1)).dealias()
        return t1 - (diff(g1, 0) + diff(g2, 1))

    cbar = rotation.mean(g)
    precond_sym = 1.0 / (1.0 / sx + g.ksq / cbar**2)

    def precond(s):
        return apply_multiplier(s, precond_sym)

    bnorm = l2_norm(b)
    if bnorm == 0.0:
        return zero_field(g)

    s = zero_field(g)
    res = b
    z = precond(res)
    p = z
    rz = inner(res, z)
    for it in range(1, maxit + 1):
        Ap = op(p)
        alpha = rz / inner(p, Ap)
        s = s + alpha * p
        res = res - alpha * Ap
        if l2_norm(res) <= tol * bnorm:
            return invert_multiplier(s, sx)
        z = precond(res)
        rz_new = inner(res, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(
        f"mass-operator CG did not reach tol={tol:.1e} in {maxit} iterations",
        residual=l2_norm(res) / bnorm,
        iterations=maxit,
    )


def qg_energy_var(r, rotation):
    """Energy (1/2) <M(r), X(r)>, the quadratic form the dynamics dissipates."""
    return 0.5 * inner(mass_operator_apply(r, rotation), x_of(r))


def qg_energy_var_parts(r, rotation):
    g = r.grid
    X = x_of(r)
    cinv = _cinv_field(g, rotation)
    gx1 = (cinv * diff(X, 0)).dealias()
    gx2 = (cinv * diff(X, 1)).dealias()
    return {
        "l2": 0.5 * inner(r, r),
        "h1": 0.5 * (inner(diff(r, 0), diff(r, 0)) + inner(diff(r, 1), diff(r, 1))),
        "weighted": 0.5 * (inner(gx1, gx1) + inner(gx2, gx2)),
    }


def qg_step_var(state, rotation, nu, dt, tol=1e-9, maxit=60, cg_tol=1e-11):
    """Crank-Nicolson step of d/dt M(r) = -nu Dc^T Dc(X(r)).

    The dissipative term is lagged and the step iterated to ``tol``; each
    pass solves one mass-operator system. nu = 0 returns the state unchanged
    (the dynamics is trivial), advancing only time.
    """
    r = state.r
    _horizontal_only(r)
    if nu == 0.0:
        return QgState(r, state.t + dt)

    def G(rf):
        return transpose_dc_dc(x_of(rf), rotation)

    half = 0.5 * nu * dt
    b = mass_operator_apply(r, rotation) - half * G(r)
    rnorm = max(l2_norm(r), 1e-30)
    cur = r
    for _ in range(maxit):
        nxt = solve_mass_operator(b - half * G(cur), rotation, tol=cg_tol)
        delta = l2_norm(nxt - cur)
        cur = nxt
        if delta <= tol * rnorm:
            return QgState(cur, state.t + dt)
    raise SolverError(
        f"lagged CN iteration stalled above tol={tol:.1e} (try a smaller dt)",
        residual=delta / rnorm,
        iterations=maxit,
    )


# -- initial data reconstruction --------------------------------------------------


def reconstruct_limit_datum(r0, u0, rotation, axis):
    """Limit scalar datum from (r0, u0) by vertical averaging.

    constant axis:  (Id - lap + lap^2) rt = <curl_h u0^h> + <r0>
    variable axis:  M(rt) = <curl_h (c^-1 u0^h)> + <r0>

    Returns a field on the horizontal grid.
    """
    check_same_grid(r0, *u0.components)
    rbar = vertical_mean(r0)
    u1 = vertical_mean(u0[0])
    u2 = vertical_mean(u0[1])
    gh = rbar.grid
    if axis == "constant":
        source = curl_h(VecField(u1, u2)) + rbar
        return invert_multiplier(source, sym_q(gh))
    if axis == "variable":
        cinv = _cinv_field(gh, rotation)
        w1 = (cinv * u1).dealias()
        w2 = (cinv * u2).dealias()
        source = curl_h(VecField(w1, w2)) + rbar
        return solve_mass_operator(source, rotation)
    raise ValueError(f"axis must be 'constant' or 'variable', got {axis!r}")
