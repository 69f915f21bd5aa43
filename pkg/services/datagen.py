# services/datagen.py
"""
Simulation models and dataset CSV I/O.

All variates come from keyed Philox streams (infra.random_streams) and normals
are produced by inverse CDF, so a (seed, key) pair pins a pool exactly.

Models (margin m = X - theta*'Z, Y = sign(.) with sign(0) = +1):
- logistic: X ~ N(0,1), Z ~ N_d(0, I), Y = sign(m + eps), eps standard logistic
- binary_response: eps ~ N(0, sigma^2 (1 + 2 m^2)), Y = sign(m + eps)
- conditional_mean: Y uniform on {-1, +1}, X = mu Y + theta*'Z + N(0, eps_sd^2)
"""
import logging
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import pandas as pd

from contracts.errors import ArgumentError
from contracts.models import TruthSpec, UnlabeledPool
from infra.logging import log_event
from infra.random_streams import Key, logistics, normals, stream, uniforms

logger = logging.getLogger(__name__)

MODELS = ("logistic", "binary_response", "conditional_mean")


def sign_pos(v) -> np.ndarray:
    """sign with sign(0) = +1."""
    return np.where(np.asarray(v) >= 0, 1.0, -1.0)


def theta_magnitudes(gen: np.random.Generator, s: int) -> np.ndarray:
    """Unnormalized nonzero entries, U(1, 2)."""
    return 1.0 + uniforms(gen, s)


def gen_theta(d: int, s: int, seed: int) -> np.ndarray:
    """s-sparse unit-norm vector: uniform random support, U(1,2) entries, then normalized."""
    if d < 1:
        raise ArgumentError(f"d must be at least 1, got {d}")
    if not 1 <= s <= d:
        raise ArgumentError(f"s must lie in [1, d={d}], got {s}")
    gen = stream(seed, "theta")
    support = np.sort(gen.permutation(d)[:s])
    theta = np.zeros(d)
    theta[support] = theta_magnitudes(gen, s)
    return theta / np.linalg.norm(theta)


def make_truth(model: str, d: int, s: int, seed: int, sigma: float = 0.5, mu: float = 2.0,
               eps_sd: float = 0.1) -> TruthSpec:
    if model not in MODELS:
        raise ArgumentError(f"unknown model '{model}', expected one of {', '.join(MODELS)}")
    theta = gen_theta(d, s, seed)
    # Renormalizing pins the l2 norm to 1 within rounding.
    theta = theta / np.sqrt(np.dot(theta, theta))
    return TruthSpec(d=d, s=s, theta_star=theta, model=model, sigma=sigma, mu=mu, eps_sd=eps_sd)


def _covariates(n: int, d: int, seed: int, key: Key) -> Tuple[np.random.Generator, np.ndarray]:
    gen = stream(seed, "pool", key)
    return gen, normals(gen, (n, d))


def gen_logistic(n: int, truth: TruthSpec, seed: int, key: Key = "pool") -> UnlabeledPool:
    gen, z = _covariates(n, truth.d, seed, key)
    x = normals(gen, n)
    eps = logistics(gen, n)
    y = sign_pos(x - z @ truth.theta_star + eps)
    return UnlabeledPool.from_arrays(x, z, hidden_y=y)


def gen_binary_response(n: int, truth: TruthSpec, seed: int, key: Key = "pool",
                        sigma: float = None) -> UnlabeledPool:
    sigma = truth.sigma if sigma is None else sigma
    if not sigma > 0:
        raise ArgumentError(f"sigma must be positive, got {sigma}")
    gen, z = _covariates(n, truth.d, seed, key)
    x = normals(gen, n)
    margin = x - z @ truth.theta_star
    eps = sigma * np.sqrt(1.0 + 2.0 * margin ** 2) * normals(gen, n)
    y = sign_pos(margin + eps)
    return UnlabeledPool.from_arrays(x, z, hidden_y=y)


def gen_conditional_mean(n: int, truth: TruthSpec, seed: int, key: Key = "pool",
                         mu: float = None, eps_sd: float = None) -> UnlabeledPool:
    mu = truth.mu if mu is None else mu
    eps_sd = truth.eps_sd if eps_sd is None else eps_sd
    if not mu > 0:
        raise ArgumentError(f"mu must be positive, got {mu}")
    gen, z = _covariates(n, truth.d, seed, key)
    y = np.where(uniforms(gen, n) < 0.5, -1.0, 1.0)
    x = mu * y + z @ truth.theta_star + eps_sd * normals(gen, n)
    return UnlabeledPool.from_arrays(x, z, hidden_y=y)


def generate_pool(truth: TruthSpec, n: int, seed: int, key: Key = "pool") -> UnlabeledPool:
    """Draw n rows of truth.model."""
    if n < 1:
        raise ArgumentError(f"n must be at least 1, got {n}")
    if truth.model == "logistic":
        pool = gen_logistic(n, truth, seed, key)
    elif truth.model == "binary_response":
        pool = gen_binary_response(n, truth, seed, key)
    elif truth.model == "conditional_mean":
        pool = gen_conditional_mean(n, truth, seed, key)
    else:
        raise ArgumentError(f"unknown model '{truth.model}'")
    logger.debug("generated %s pool n=%d d=%d key=%s", truth.model, n, truth.d, key)
    return pool


# ============================================================================
# CSV I/O
# ============================================================================

def pool_frame(pool: UnlabeledPool, include_labels: bool = True) -> pd.DataFrame:
    """DataFrame with columns x, z1..zd and, when labels exist, y."""
    frame = pd.DataFrame(pool.z, columns=[f"z{j}" for j in range(1, pool.d + 1)])
    frame.insert(0, "x", pool.x)
    if include_labels and pool.hidden_y is not None:
        frame["y"] = pool.hidden_y.unseal().astype(int)
    return frame


def write_pool_csv(pool: UnlabeledPool, path: Union[str, Path], include_labels: bool = True) -> Path:
    path = Path(path)
    try:
        pool_frame(pool, include_labels).to_csv(path, index=False, float_format="%.17g")
    except OSError as e:
        raise ArgumentError(f"cannot write dataset to {path}: {e}") from e
    log_event("pool_written", path=str(path), rows=len(pool), d=pool.d)
    return path


def read_pool_csv(path: Union[str, Path]) -> Tuple[UnlabeledPool, bool]:
    """
    Load covariates from a dataset CSV with header x,z1..zd[,y].

    Labels are left on disk; a FileLabelOracle reads them on request.

    Returns:
        (pool, has_label_column)
    """
    path = Path(path)
    try:
        header = pd.read_csv(path, nrows=0).columns.tolist()
    except OSError as e:
        raise ArgumentError(f"cannot read dataset {path}: {e}") from e
    if not header or header[0] != "x":
        raise ArgumentError(f"{path}: first column must be 'x', got {header[:1]}")
    z_cols = [c for c in header if c.startswith("z")]
    expected = [f"z{j}" for j in range(1, len(z_cols) + 1)]
    if z_cols != expected or not z_cols:
        raise ArgumentError(f"{path}: covariate columns must be z1..zd")
    frame = pd.read_csv(path, usecols=["x"] + z_cols)
    pool = UnlabeledPool.from_arrays(frame["x"].to_numpy(dtype=float), frame[z_cols].to_numpy(dtype=float))
    return pool, "y" in header
