"""Cutoffs, the product partition of unity, and local-to-global Sobolev assembly.

Run: python3 demos/partition.py
"""

import numpy as np

from sobocomp.domain import build_grid, lebesgue
from sobocomp.forms import build_cutoff, identity_form, partition_gradient_norms, partition_of_unity
from sobocomp.geometry import Quasimetric, ball
from sobocomp.pipelines import sobolev_assembly, _bump_family


def main():
    dom = build_grid(2, [0, 1], 48)
    d = Quasimetric("euclidean")
    w = lebesgue(dom)
    Q = identity_form(dom)
    centers = [(x, y) for x in (0.4, 0.6) for y in (0.3667, 0.5, 0.6333)]
    cuts = [build_cutoff(d, dom, ball(d, list(c), 0.3, dom), 0.15, Q=Q, mu=w, s=np.inf) for c in centers]
    inner = np.any([c.inner for c in cuts], axis=0)
    K = inner & (np.abs(dom.centers[:, 0] - 0.5) < 0.15) & (np.abs(dom.centers[:, 1] - 0.5) < 0.15)
    fam = partition_of_unity(K, cuts)
    tot = fam.total()
    print(f"{fam.J} cutoffs; sum psi on K: min={tot[K].min():.15f} max={tot[K].max():.15f}")
    print(f"max |sum psi - (1 - prod(1 - phi))| = {np.abs(tot - fam.product_form()).max():.2e}")
    print("sup |grad psi_j|:", np.round(partition_gradient_norms(fam, Q, w, np.inf), 3).tolist())

    train = _bump_family(dom, K, 12, (0.05, 0.15), 0)
    test = _bump_family(dom, K, 12, (0.05, 0.15), 1)
    out = sobolev_assembly(dom, w, w, w, Q, K, cuts, train, test, 2, 1.5, np.inf)
    print(f"\nassembled C(Omega') = {out['C_Omega_prime']:.4f} (C-bar = {out['C_bar']:.4f})")
    print(f"held-out members violating the assembled bound: {out['violations']}")


if __name__ == "__main__":
    main()
