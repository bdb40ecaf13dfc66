"""
Four kernels on a ring-shaped problem
=====================================

The inner disc is one class and the surrounding ring the other.  Only
kernels that can bend the boundary separate them.
"""

import numpy as np

from pdstl.svm import KernelSpec, TrainConfig, predict, train

rng = np.random.default_rng(0)
r = np.r_[rng.uniform(0, 1, 100), rng.uniform(1.5, 2.5, 100)]
t = rng.uniform(0, 2 * np.pi, 200)
X = np.c_[r * np.cos(t), r * np.sin(t)]
y = np.arange(200) < 100

for spec in (KernelSpec("linear"), KernelSpec("polynomial", degree=2),
             KernelSpec("rbf", gamma=1.0), KernelSpec("sigmoid", gamma=0.5)):
    trace = []
    model = train(X, y, spec, TrainConfig(c=10.0), trace=trace)
    acc = np.mean(predict(model, X) == y)
    print(f"{spec.kind:10s} accuracy {acc:.3f}  support vectors {len(model.dual_coefs):3d}  "
          f"SMO steps {len(trace):5d}  dual objective {model.extra['dual_objective']:.3f}")
