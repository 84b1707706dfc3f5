"""Pure numpy element kernels (fallback when the compiled extension is absent)."""
import numpy as np


def ns_element_matrices(phi, G, psi, nu, P, w, dA, tau, visc, pen):
    """Element blocks of the penalized Navier-Stokes step.

    Parameters
    ----------
    phi : (Q, n) velocity basis values
    G : (E, Q, n, 3) velocity basis surface gradients
    psi : (Q, m) pressure basis values
    nu, w : (E, Q, 3) normal and convecting velocity
    P : (E, Q, 3, 3) tangential projection
    dA : (E, Q) quadrature weight times area element
    tau, visc, pen : time step, tau/Re and beta*tau

    Returns
    -------
    A : (E, 3n, 3n) velocity block, rows/cols ordered (node, component)
    D : (E, m, 3n) divergence block (psi_m, div_P phi_j e_c)
    """
    E, Q, n, _ = G.shape
    mass = np.einsum("eq,qi,qj->eqij", dA, phi, phi)
    wG = np.einsum("eqk,eqjk->eqj", w, G)
    scal = np.einsum("eqij->eij", mass) + tau * np.einsum("eq,qi,eqj->eij", dA, phi, wG)
    A = np.zeros((E, n, 3, n, 3))
    for c in range(3):
        A[:, :, c, :, c] = scal
    GG = np.einsum("eqik,eqjk->eqij", G, G)
    A += visc * np.einsum("eq,eqdc,eqij->eidjc", dA, P, GG, optimize=True)
    A += visc * np.einsum("eq,eqic,eqjd->eidjc", dA, G, G, optimize=True)
    A += pen * np.einsum("eqij,eqd,eqc->eidjc", mass, nu, nu, optimize=True)
    D = np.einsum("eq,qm,eqjc->emjc", dA, psi, G).reshape(E, psi.shape[1], 3 * n)
    return A.reshape(E, 3 * n, 3 * n), D
