"""Fitting a bivariate mPH model by EM.

Without the original loss/expense data at hand we simulate from a p=4 model
of the kind such data produce (both margins in units of 10,000) and refit.
Pass a CSV path as first argument to fit real data instead; a censoring
column, if present, is dropped and those rows are treated as observed.
"""
import sys
import time

import numpy as np
from scipy import stats

import mph
from mph import em, io

pi = np.array([0.408, 0.441, 0.135, 0.016])
T1 = np.array([[-0.381, 0.336, 0.0, 0.0],
               [0.0, -1.797, 0.0, 0.005],
               [0.007, 0.014, -0.077, 0.0],
               [0.024, 0.0, 0.0, -0.025]])
T2 = np.array([[-1.481, 0.9, 0.043, 0.0],
               [0.0, -2.526, 0.017, 0.004],
               [0.236, 0.025, -0.417, 0.0],
               [0.0, 0.0, 0.085, -0.085]])
truth = mph.MphModel(pi, [T1, T2])

if len(sys.argv) > 1:
    _, X = io.read_csv(sys.argv[1])
    X = X / 1e4
else:
    X = mph.sample(truth, 1500, seed=2)
    print("generating model loglik on this sample: %.2f" % mph.log_likelihood(truth, X))

print("n = %d, sample means %s" % (len(X), np.round(X.mean(axis=0), 3)))

t0 = time.perf_counter()
result = em.fit(X, em.FitConfig(p=4, restarts=3, max_iters=500, seed=0))
report = em.fit_report(result, len(X))
print("best restart %d after %d iterations (%.0f s)" % (
    report["restart_index"], report["iterations"], time.perf_counter() - t0))
print("loglik %.2f  df %d  AIC %.2f  BIC %.2f" % (
    report["loglik"], report["df"], report["aic"], report["bic"]))

# The trace never goes down
trace = np.array(report["trace"])
print("smallest step in the trace: %.2e" % np.diff(trace).min())

fitted = result.model
print("\nfitted pi:", np.round(fitted.pi, 3))
for i, T in enumerate(fitted.T):
    print("T%d =\n%s" % (i + 1, np.round(T, 3)))

# Dependence implied by the fit versus the sample
print("\nkendall  model %.4f  sample %.4f"
      % (mph.kendall(fitted, 0, 1), stats.kendalltau(X[:, 0], X[:, 1]).statistic))
print("spearman model %.4f  sample %.4f"
      % (mph.spearman(fitted, 0, 1), stats.spearmanr(X[:, 0], X[:, 1]).statistic))
