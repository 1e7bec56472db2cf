"""Exact arithmetic for epipelagic representation checks in equal characteristic.

Subpackages split by what they compute:

* finite fields and their residue symbols (`finite_field`)
* the cyclotomic integer ring Z[zeta_p] and additive characters (`cyclotomic`)
* quadratic-form Gauss sums and their signed-quartic-unit calculus (`quadratic_gauss`)
* point counts on Artin-Schreier-style hypersurfaces (`artin_schreier`)
* sparse Hahn series with certified precision caps (`hahn_series`)
* the additive formal module, its torsion tower and CM point (`lubin_tate`)
* congruence actions of matrix, division and Weil elements (`group_action`)
* character identities tying the two sides together (`correspondence`)
"""

__version__ = "0.1.0"
