"""Geometry of the two weighting estimands.

Build a small effect-covariance matrix by hand, then pull proxy weights
out of it two ways: the regression route (solve the S-block against the
S-to-Y column) and the smallest-whitened-direction route (whiten by a
noise shape, take the eigenvector with the smallest eigenvalue). The
demo shows where the two agree, where they split apart, and what the
diagnostics on the result object mean.

Run:  python3 demos/weights_from_covariance.py
"""
import numpy as np

from proxycov import CovEstimate, NoiseModel, ols_weights, symmetric_inverse_sqrt, tls_weights

np.set_printoptions(precision=5, suppress=True)

# A two-proxy world. Y first, then S1, S2. Effects on S1 push Y down,
# effects on S2 barely matter.
beta = np.array([-0.5, 0.05])
s_cov = np.array([[1.0, 0.3], [0.3, 2.0]])

lam = np.empty((3, 3))
lam[1:, 1:] = s_cov
lam[1:, 0] = s_cov @ beta
lam[0, 1:] = lam[1:, 0]
lam[0, 0] = beta @ s_cov @ beta  # fully mediated: no leftover variance on Y

truth = CovEstimate(lam, provenance="exact")
print("effect covariance (fully mediated):")
print(truth.matrix)

w1 = ols_weights(truth)
print("\nregression weights:", w1.weights, " (the structural slopes)", )

# Any noise shape gives the same answer under full mediation, because the
# matrix is singular along (1, -beta) and whitening cannot move a null vector.
for psi in (np.eye(3), np.diag([4.0, 1.0, 0.25])):
    w2 = tls_weights(truth, NoiseModel(psi))
    print("smallest-direction weights under psi diag",
          np.diag(psi), "->", w2.weights)

# Now break mediation: add variance to Y that no proxy carries.
lam_direct = lam.copy()
lam_direct[0, 0] += 0.8
direct = CovEstimate(lam_direct, provenance="exact")

w1d = ols_weights(direct)
w2d = tls_weights(direct, NoiseModel(np.eye(3)))
print("\nwith unexplained Y variance 0.8:")
print("  regression weights ", w1d.weights, "(unchanged: S-block algebra only)")
print("  smallest direction ", w2d.weights, "(moves: Y is no longer the null direction)")
print("  smallest whitened eigenvalue kappa =", round(w2d.kappa, 5))
print("  residual of the generalized eigen equation:", w2d.residual_norm)

# The whitening matrix itself, for the curious: symmetric, and its square
# inverts the noise shape.
psi = np.array([[2.0, 0.5, 0.0], [0.5, 1.0, 0.2], [0.0, 0.2, 0.5]])
m = symmetric_inverse_sqrt(psi)
print("\nwhitener check, max |m @ psi @ m - I| =", np.abs(m @ psi @ m - np.eye(3)).max())
