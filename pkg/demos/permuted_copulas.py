"""Six bivariate models with identical margins and different dependence.

The second sub-intensity is the first one with its diagonal permuted, so
both margins are the same phase-type law in every model; only the way the
shared start state couples the two chains changes.
"""
import itertools

import numpy as np

import mph

rates = (5.0, 20.0, 140.0)
pi = np.full(3, 1 / 3)


def with_diagonal(diag):
    T = np.ones((3, 3))
    np.fill_diagonal(T, -np.asarray(diag))
    return T


T1 = with_diagonal(rates)
models = {perm: mph.MphModel(pi, [T1, with_diagonal(perm)])
          for perm in itertools.permutations(rates)}

# Same margins everywhere: compare mean and sd of the second component
for perm, m in models.items():
    mean = mph.moment(m, [0.0, 1.0])
    print(perm, "mean %.5f sd %.5f" % (mean, mph.marginal_sd(m, 1)))

# ...but the dependence moves from positive to negative
print("\n%-22s %9s %9s %9s" % ("diagonal of T2", "pearson", "kendall", "spearman"))
for perm, m in models.items():
    print("%-22s %+9.4f %+9.4f %+9.4f" % (perm, mph.pearson(m, 0, 1),
                                         mph.kendall(m, 0, 1), mph.spearman(m, 0, 1)))

# The two cyclic permutations are mirror images of each other: same tau,
# transposed copula
a, b = models[(20.0, 140.0, 5.0)], models[(140.0, 5.0, 20.0)]
print("\ncopula at (0.2, 0.7) vs mirrored (0.7, 0.2):",
      mph.copula_density_grid(a, 0, 1, [[0.2, 0.7]])[0],
      mph.copula_density_grid(b, 0, 1, [[0.7, 0.2]])[0])

# Copula density on an interior grid, ready for a contour plot
R = 40
levels = (np.arange(R) + 0.5) / R
U, V = np.meshgrid(levels, levels, indexing="ij")
c = mph.copula_density_grid(models[rates], 0, 1, np.column_stack([U.ravel(), V.ravel()]))
c = c.reshape(R, R)
print("\nidentity permutation: copula density ranges over [%.3f, %.3f]" % (c.min(), c.max()))
print("mean over the grid (should be close to 1): %.4f" % c.mean())
