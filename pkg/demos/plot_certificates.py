"""
Curvature constants and certificates
====================================

Estimate the geometric constants of several shipped models, turn them into
curvature-dimension parameters, and read off the Myers compactness margin,
the spectral gap lower bound and the Poincare constant.
"""

from contactcd.cd import analyze, c_lambda, cd_params, estimate_constants
from contactcd.models import heisenberg, sheared, twisted

####################################################################
# Constants and parameters
# ------------------------
for model in (heisenberg(1), twisted(-1, 1), twisted(0, 1), sheared()):
    c = estimate_constants(model)
    print(f"{model.name:28s} constants {tuple(round(v, 4) for v in c.as_tuple())}  "
          f"CD {tuple(round(v, 4) for v in cd_params(c).as_tuple())}")

####################################################################
# The compact model
# -----------------
# For ``twisted(-1,1)`` the margin function peaks at ``lambda^2 = 3/2``
# where it equals 1/3, so the model is compact.
rep = analyze(twisted(-1, 1))
p = cd_params(estimate_constants(twisted(-1, 1)))
for lam2 in (0.5, 1.0, 1.5, 2.0, 3.0):
    print(f"lambda^2 = {lam2}: c = {c_lambda(p, lam2 ** 0.5, 0.0, 0.0):.4f}")
print("Myers margin", rep.myers["margin"], "gap", rep.spectralGapLowerBound, "Poincare", rep.poincareConstant)

####################################################################
# Without positive curvature every certificate is reported absent.
for model in (heisenberg(1), twisted(0, 1)):
    print(model.name, "certificates absent:", analyze(model).certificates_absent())
