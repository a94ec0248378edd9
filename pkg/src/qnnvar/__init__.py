"""Variance-regularized quantum neural network regression on a statevector simulator.

Modules
-------
sim
    Statevector, gates, exact probabilities and seeded shot sampling.
observables
    Diagonal cost operators and count-based estimators.
qnn
    Circuit construction, evaluation and parameter-shift gradients.
training
    Losses, alpha schedule, shot scheduler, ADAM and the training loop.
experiments
    Benchmark datasets, PES pipeline, R^2 and confidence intervals.
cli
    Command-line front end (``qnnvar``).
"""

from __future__ import annotations

__version__ = "0.1.0"
