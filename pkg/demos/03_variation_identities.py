#!/usr/bin/env python3
"""First-variation identities, verified against centered differences.

Realizes tangent vectors of the space of Finsler metrics as metric families
(a Randers drift path and conformal paths), then checks: the measure and
volume variation formulas, the nonlinear-connection variation relation, the
adjointness of the divergence operator against the Lie derivative, and the
conformal functional-derivative identity (which holds in the scaling
direction and measurably fails for general k(x) on the torus).
"""

import numpy as np

import finslerflow as ff
from finslerflow.fields import GridStructure
from finslerflow.jets import cos_, sin_
from finslerflow.variations import (
    adjointness_residual,
    conformal_family,
    family_variation,
    randers_family,
    variation_residuals,
)

TWO_PI = 2 * np.pi
entry = ff.get_entry("randers-torus", b=0.3)
bg, fg = ff.build_grid(2, 48, TWO_PI, 48)
gs = GridStructure(entry.structure, bg, fg, base_mode="fd4")

fam = randers_family(entry.structure, lambda xs: (0.06 * cos_(xs[1]), 0.06 * sin_(xs[0])))
rep = variation_residuals(fam, gs, t_step=1e-4)
print("Randers drift path on a curved background (residuals vs centered FD):")
print(rep.summary())

h = family_variation(fam, gs)
print("\nmembership residuals of h = dg/dt:",
      f"zero-homog {h.zero_homogeneity_residual:.2e}, symmetry {h.symmetry_residual:.2e}")


def X(xn):
    return np.stack([np.sin(xn[..., 0]), np.cos(xn[..., 1])], axis=-1)


print("adjointness  |(L_X g, h)/2 - (X, delta h)| :",
      f"{adjointness_residual(X, h, gs):.2e}")

print("\nConformal directions of the functional (n = 2):")
conf = ff.get_entry("conformal-torus")
gsc = GridStructure(conf.structure, bg, fg, base_mode="fd4")
for label, k in (("k = const (scaling)", lambda xs: 0.3 + 0.0 * xs[0]),
                 ("k = sin x1 cos x2", lambda xs: sin_(xs[0]) * cos_(xs[1]))):
    crep = variation_residuals(conformal_family(conf.structure, k), gsc, t_step=1e-4)
    print(f"  {label:22s} dI/dt = {crep.values['dI_dt']:+.3e}   "
          f"int H(u,u) tr(h) eta = {crep.values['int Huu tr(h)']:+.3e}")
print("  (the closed form matches dI/dt only where volume scaling is the")
print("   whole story; on the torus dI/dt vanishes identically by the")
print("   Gauss-Bonnet cancellation while the closed form does not)")
