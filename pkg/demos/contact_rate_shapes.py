"""Shape of the contact-fraction rate function with and without a field.

For geometric(1/2) waits the homogeneous free energy F(h) vanishes at and
below the critical field and solves sum_s p(s) e^{-F s} = e^{-h} above it.
Conjugating phi -> F(h + phi) gives the rate function of the fraction of
pinned sites; adding back z(0) = F(h) normalizes it to a true rate with
infimum zero.  At h = h_c the curve is affine (identically zero) up to
the contact fraction u and strictly convex beyond; above criticality the
affine stretch survives but tilts to slope h_c - h, vanishing instead at
the typical fraction F'(h).
"""

import numpy as np

from qldp import (
    cgf_curve,
    legendre,
    pinning_contact_fraction_u,
    pinning_free_energy_homogeneous,
    waiting_law,
)


def rate(law, h, ws, phis):
    """Normalized conjugate of phi -> F(h + phi) on the w grid."""
    curve = cgf_curve(
        [(float(p), pinning_free_energy_homogeneous(law, h + float(p)), "perron") for p in phis]
    )
    z0 = pinning_free_energy_homogeneous(law, h)
    return [float(legendre(curve, float(w))) + z0 for w in ws]


def main():
    law = waiting_law({s: 0.5**s for s in range(1, 61)})
    u = pinning_contact_fraction_u(law)
    print(f"geometric(1/2) waits: contact fraction u = {u:.6f}")
    phis = np.arange(-2.0, 6.0 + 1e-9, 0.01)
    ws = np.arange(0.05, 0.95 + 1e-9, 0.05)
    at_hc = rate(law, 0.0, ws, phis)
    above = rate(law, 0.4, ws, phis)
    print(f"\n{'w':>6} {'J at h=h_c':>12} {'J at h=h_c+0.4':>15}")
    for w, j0, j1 in zip(ws, at_hc, above):
        marker = "  <- affine stretch ends at u" if abs(w - u) < 1e-9 else ""
        print(f"{w:6.2f} {j0:12.6f} {j1:15.6f}{marker}")
    flat = max(abs(j) for w, j in zip(ws, at_hc) if w <= u + 1e-9)
    seg = [j for w, j in zip(ws, at_hc) if w > u + 1e-9]
    second = np.diff(seg, n=2)
    tilted = [j for w, j in zip(ws, above) if w <= u + 1e-9]
    slope = np.diff(tilted) / 0.05
    print(f"\nmax |J| on (0, u] at h_c     : {flat:.2e}  (flat affine stretch)")
    print(f"min second difference above u: {second.min():.2e}  (strict convexity)")
    print(
        f"stretch slope at h_c + 0.4   : {slope.min():+.6f}..{slope.max():+.6f}"
        f"  (tilted to h_c - h = -0.4)"
    )


if __name__ == "__main__":
    main()
