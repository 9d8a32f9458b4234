"""Galerkin projection of the subdomain operators onto POD bases.

For subdomain ``i`` the reduced velocity is ``u = ubar * l + V a`` with the
(supremizer-enriched) basis ``V = [Phi_u, Phi_s]`` and the lifting ``l`` kept
as an exact offset; the pressure is ``p = P b``. Every form is projected once
and the online problem only rescales by ``nu`` and ``ubar``.
"""
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from ..errors import DimensionMismatch

SUB_FIELDS = ("Kv", "kl", "Bv", "bl", "T", "Ladv", "Lgrad", "fll", "Rv", "rl", "Q",
              "Kx", "X1", "X2", "XL1", "XL2", "Rx", "V", "P", "Xi", "lift")


def quad_fields(space, Phi):
    """Values ``(nq_tot, 2, N)`` and gradients ``(nq_tot, 2, 2, N)`` of velocity columns."""
    Phi = np.asarray(Phi, dtype=float)
    if Phi.ndim == 1:
        Phi = Phi[:, None]
    if Phi.shape[0] != space.n_u:
        raise DimensionMismatch(f"fields of length {Phi.shape[0]} on a space with {space.n_u} velocity dofs")
    N = Phi.shape[1]
    wl = Phi.reshape(2, space.n_nodes, N)[:, space.cell_nodes, :]            # (2, m, 6, N)
    val = np.einsum("qi,amin->mqan", space.phi, wl, optimize=True)
    grad = np.einsum("mqib,amin->mqabn", space.dphi, wl, optimize=True)
    nq = val.shape[0] * val.shape[1]
    return val.reshape(nq, 2, N), grad.reshape(nq, 2, 2, N)


def trilinear(space, A, B, C):
    """``T[m, j, k] = c(A_j, B_k, C_m)`` for column sets ``A``, ``B``, ``C``."""
    ua, _ = quad_fields(space, A)
    _, gb = quad_fields(space, B)
    vc, _ = quad_fields(space, C)
    return _kernels.trilinear_tensor(ua, gb, vc, space.wts.ravel())


@dataclass
class SubdomainOperators:
    """Reduced blocks of one subdomain (see module docstring for the expansion)."""

    sign: float
    Kv: np.ndarray       # V^T K V
    kl: np.ndarray       # V^T K l
    Bv: np.ndarray       # P^T B V
    bl: np.ndarray       # P^T B l
    T: np.ndarray        # c(V_j, V_k, V_m) at [m, j, k]
    Ladv: np.ndarray     # c(l, V_k, V_m) at [m, k]
    Lgrad: np.ndarray    # c(V_j, l, V_m) at [m, j]
    fll: np.ndarray      # c(l, l, V_m)
    Rv: np.ndarray       # interface trace of V
    rl: np.ndarray       # interface trace of l
    Q: np.ndarray        # Rv^T M2 G, interface load per control mode
    Kx: np.ndarray       # adjoint basis blocks
    X1: np.ndarray       # c(Xi_b, V_j, Xi_a) at [b, a, j]
    X2: np.ndarray       # c(V_j, Xi_b, Xi_a) at [b, a, j]
    XL1: np.ndarray      # c(Xi_b, l, Xi_a) at [b, a]
    XL2: np.ndarray      # c(l, Xi_b, Xi_a) at [b, a]
    Rx: np.ndarray       # interface trace of Xi
    V: np.ndarray
    P: np.ndarray
    Xi: np.ndarray
    lift: np.ndarray

    @property
    def n_v(self):
        return self.Kv.shape[0]

    @property
    def n_p(self):
        return self.Bv.shape[0]

    @property
    def n_xi(self):
        return self.Kx.shape[0]


@dataclass
class ReducedOperators:
    subs: list
    G: np.ndarray                 # control modes on the interface trace
    M2: np.ndarray                # interface mass (dense, small)
    n_modes: dict = field(default_factory=dict)
    supremizers: bool = True

    @property
    def n_g(self):
        return self.G.shape[1]

    @property
    def Mg(self):
        return self.G.T @ self.M2 @ self.G


def select_modes(basis, n_modes):
    """Clip requested counts to the available modes."""
    out = {}
    for key in ("u", "s", "p", "xi"):
        for i in (1, 2):
            out[f"{key}{i}"] = min(int(n_modes[key]), basis.n(f"{key}{i}"))
    out["g"] = min(int(n_modes["g"]), basis.n("g"))
    return out


def project_subdomain(space, sign, lift, V, P, Xi, R, M2, G):
    K, B = space.K, space.B
    lift = np.asarray(lift, dtype=float)
    Kv = V.T @ (K @ V)
    Bv = P.T @ (B @ V)
    T = trilinear(space, V, V, V)
    Ladv = trilinear(space, lift, V, V)[:, 0, :]
    Lgrad = trilinear(space, V, lift, V)[:, :, 0]
    fll = trilinear(space, lift, lift, V)[:, 0, 0]
    Rv = (R @ V)
    X1 = trilinear(space, Xi, V, Xi).transpose(1, 0, 2)
    X2 = trilinear(space, V, Xi, Xi).transpose(2, 0, 1)
    XL1 = trilinear(space, Xi, lift, Xi)[:, :, 0].T
    XL2 = trilinear(space, lift, Xi, Xi)[:, 0, :].T
    return SubdomainOperators(
        sign=sign, Kv=0.5 * (Kv + Kv.T), kl=V.T @ (K @ lift), Bv=Bv, bl=P.T @ (B @ lift),
        T=T, Ladv=Ladv, Lgrad=Lgrad, fll=fll, Rv=Rv, rl=R @ lift, Q=Rv.T @ (M2 @ G),
        Kx=Xi.T @ (K @ Xi), X1=X1, X2=X2, XL1=XL1, XL2=XL2, Rx=R @ Xi,
        V=V, P=P, Xi=Xi, lift=lift,
    )


def project_operators(basis, coupled, liftings, n_modes, supremizers=True):
    """Project every form of both subdomains onto the selected POD modes.

    Parameters
    ----------
    basis : PodBasis
    coupled : CoupledProblem
        Supplies the finite-element spaces and interface.
    liftings : sequence of arrays
        Unit-magnitude liftings of the two subdomains.
    n_modes : dict
        Counts for ``u``, ``s``, ``p``, ``xi`` and ``g``.
    supremizers : bool
        Append the supremizer modes to the velocity basis.
    """
    N = select_modes(basis, n_modes)
    M2 = coupled.interface.M2
    G = basis.modes["g"][:, : N["g"]]
    subs = []
    for i, (space, prob, lift) in enumerate(zip(coupled.spaces, coupled.problems, liftings), start=1):
        V = basis.modes[f"u{i}"][:, : N[f"u{i}"]]
        if supremizers:
            V = np.hstack([V, basis.modes[f"s{i}"][:, : N[f"s{i}"]]])
        P = basis.modes[f"p{i}"][:, : N[f"p{i}"]]
        Xi = basis.modes[f"xi{i}"][:, : N[f"xi{i}"]]
        if len(lift) != space.n_u:
            raise DimensionMismatch("lifting does not match the subdomain space")
        subs.append(project_subdomain(space, prob.sign, lift, V, P, Xi, coupled.interface.restriction(i),
                                      M2, G))
    return ReducedOperators(subs, G, M2.toarray(), N, supremizers)


def operators_to_arrays(ops):
    out = {"G": ops.G, "M2": ops.M2, "supremizers": np.array(ops.supremizers)}
    for k, v in ops.n_modes.items():
        out[f"n_{k}"] = np.array(v)
    for i, s in enumerate(ops.subs, start=1):
        out[f"sub{i}_sign"] = np.array(s.sign)
        for f in SUB_FIELDS:
            out[f"sub{i}_{f}"] = getattr(s, f)
    return out


def operators_from_arrays(arr):
    subs = []
    for i in (1, 2):
        kw = {f: np.asarray(arr[f"sub{i}_{f}"]) for f in SUB_FIELDS}
        subs.append(SubdomainOperators(sign=float(arr[f"sub{i}_sign"]), **kw))
    n_modes = {k[2:]: int(arr[k]) for k in arr if k.startswith("n_")}
    return ReducedOperators(subs, np.asarray(arr["G"]), np.asarray(arr["M2"]), n_modes, bool(arr["supremizers"]))
