# services/__init__.py
"""
Numerical services: kernels, smoothed risk, the l1 path solver, active sampling,
model selection, simulation models and error metrics.
"""
