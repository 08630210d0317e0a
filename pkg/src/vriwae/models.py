"""Reparameterized models exposing log-weights and their partial derivatives.

Two analytically tractable instances are provided. Both use standard normal
noise and an affine reparameterization, so every log-weight is a quadratic
form in the noise and all partials have closed forms. A central
finite-difference fallback covers user-supplied models and doubles as the
ground-truth oracle for the built-in analytic partials.

Derivative conventions (``mode``):

* ``"rep"``  - total derivative: the selected component moves in the model
  parameters and, for variational components, in the reparameterization map
  as well.
* ``"drep"`` - partial derivative: only the sample point moves through the
  reparameterization map, evaluated back at the unperturbed variational
  parameters. Defined for variational components only.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "REP",
    "DREP",
    "Psi",
    "ReparamModel",
    "GaussianModel",
    "LinearGaussianModel",
    "LinGaussDataset",
    "gaussian_offset",
    "lingauss_offset",
    "fd_d_psi_log_weight",
]

REP = "rep"
DREP = "drep"

_SQRT_2_3 = math.sqrt(2.0 / 3.0)
_SQRT_6 = math.sqrt(6.0)


@dataclass(frozen=True)
class Psi:
    """One component of the stacked parameter vector (theta first, then phi).

    ``block`` names the parameter group ("theta", "phi" for the Gaussian
    model; "theta", "a", "b" for the linear Gaussian one) and ``k`` is the
    coordinate within that group.
    """

    block: str
    k: int

    def label(self) -> str:
        return f"{self.block}_{self.k}"


def _as_vector(v, d: int, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.shape != (d,):
        raise ValueError(f"{name} must have shape ({d},), got {arr.shape}")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


class ReparamModel:
    """Interface shared by the built-in models.

    Implementations are immutable after construction and safe to share
    across replicate workers; RNG state is always owned by the caller.
    """

    d: int

    def psi_blocks(self) -> dict[str, int]:
        """Ordered mapping block name -> size, theta blocks first."""
        raise NotImplementedError

    def variational_blocks(self) -> tuple[str, ...]:
        """Block names belonging to the variational parameters."""
        raise NotImplementedError

    def psi_from_index(self, index: int) -> Psi:
        """Translate a flat index over the stacked parameters into a Psi."""
        offset = 0
        for block, size in self.psi_blocks().items():
            if index < offset + size:
                return Psi(block, index - offset)
            offset += size
        raise ValueError(f"psi index {index} out of range (size {offset})")

    def sample_noise(self, rng: np.random.Generator, shape=()) -> np.ndarray:
        """Standard normal noise with trailing dimension d."""
        if isinstance(shape, int):
            shape = (shape,)
        return rng.standard_normal(tuple(shape) + (self.d,))

    def log_weight(self, eps: np.ndarray, phi_prime=None):
        raise NotImplementedError

    def d_psi_log_weight(self, eps: np.ndarray, psi: Psi, mode: str):
        """Analytic partial when available, finite differences otherwise."""
        return fd_d_psi_log_weight(self, eps, psi, mode)

    def _check_mode(self, psi: Psi, mode: str) -> None:
        if mode not in (REP, DREP):
            raise ValueError(f"unknown mode {mode!r}")
        if mode == DREP and psi.block not in self.variational_blocks():
            raise ValueError(
                "DREP defined for variational components only, "
                f"got psi block {psi.block!r}"
            )


@dataclass(frozen=True)
class GaussianModel(ReparamModel):
    """Unit-covariance Gaussian target and proposal, shifted reparameterization.

    Target density N(theta, I_d), proposal N(phi, I_d), sample map
    f(eps, phi') = eps + phi'. The joint weight carries an arbitrary constant
    ``log_px`` (default 0) for the marginal term; every self-normalized
    quantity downstream is invariant to it.
    """

    d: int
    theta: np.ndarray
    phi: np.ndarray
    log_px: float = 0.0
    x: np.ndarray | None = None  # carried for interface uniformity, unused

    def __post_init__(self):
        object.__setattr__(self, "theta", _as_vector(self.theta, self.d, "theta"))
        object.__setattr__(self, "phi", _as_vector(self.phi, self.d, "phi"))

    def psi_blocks(self) -> dict[str, int]:
        return {"theta": self.d, "phi": self.d}

    def variational_blocks(self) -> tuple[str, ...]:
        return ("phi",)

    @property
    def b_d(self) -> float:
        """Standard deviation of the log-weight under the proposal."""
        return float(np.linalg.norm(self.theta - self.phi))

    def log_weight(self, eps, phi_prime=None):
        eps = np.asarray(eps, dtype=float)
        if eps.shape[-1] != self.d:
            raise ValueError(f"noise must end in dimension {self.d}")
        phi_p = self.phi if phi_prime is None else np.asarray(phi_prime, dtype=float)
        if phi_p.shape != (self.d,):
            raise ValueError(f"phi_prime must have shape ({self.d},)")
        z = eps + phi_p
        out = (
            self.log_px
            - 0.5 * np.sum((z - self.theta) ** 2, axis=-1)
            + 0.5 * np.sum((z - self.phi) ** 2, axis=-1)
        )
        return float(out) if out.ndim == 0 else out

    def d_psi_log_weight(self, eps, psi: Psi, mode: str):
        self._check_mode(psi, mode)
        eps = np.asarray(eps, dtype=float)
        k = psi.k
        resid = eps[..., k] + self.phi[k] - self.theta[k]
        if mode == REP:
            out = resid if psi.block == "theta" else -resid
        else:  # drep on phi_k; constant in the noise
            out = np.broadcast_to(self.theta[k] - self.phi[k], eps.shape[:-1]).copy()
        return float(out) if np.ndim(out) == 0 else out

    def replace_psi(self, psi: Psi, value: float) -> "GaussianModel":
        vec = np.array(getattr(self, psi.block))
        vec[psi.k] = value
        return replace(self, **{psi.block: vec})

    # -- sufficient-statistic batch samplers ------------------------------
    #
    # The log-weight depends on eps only through s = <eps, phi - theta> and
    # the partials only through eps_k, so a replicate batch needs two
    # correlated scalars per sample instead of a length-d vector. The joint
    # law of (s/sigma, eps_k) is bivariate normal with correlation
    # (phi_k - theta_k)/sigma, sampled exactly below.

    def grad_batch(self, rng, n_rep: int, n_samples: int, psi: Psi, mode: str):
        self._check_mode(psi, mode)
        diff = self.phi - self.theta
        sigma = float(np.linalg.norm(diff))
        diff_k = float(diff[psi.k])
        s = rng.standard_normal((n_rep, n_samples))
        eta = rng.standard_normal((n_rep, n_samples))
        rho = diff_k / sigma if sigma > 0.0 else 0.0
        eps_k = rho * s + math.sqrt(max(0.0, 1.0 - rho * rho)) * eta
        log_ws = self.log_px - 0.5 * sigma * sigma - sigma * s
        if mode == DREP:
            partials = np.full((n_rep, n_samples), -diff_k)
        elif psi.block == "theta":
            partials = eps_k + diff_k
        else:
            partials = -(eps_k + diff_k)
        return log_ws, partials

    def bound_batch(self, rng, n_rep: int, n_samples: int):
        sigma = float(np.linalg.norm(self.phi - self.theta))
        s = rng.standard_normal((n_rep, n_samples))
        return self.log_px - 0.5 * sigma * sigma - sigma * s


@dataclass(frozen=True)
class LinearGaussianModel(ReparamModel):
    """Linear Gaussian model with diagonal affine proposal.

    Latent prior N(theta, I_d), likelihood N(x; z, I_d), proposal
    N(diag(a) x + b, 2/3 I_d) and sample map
    f(eps, phi') = sqrt(2/3) eps + A' x + b'. The marginal N(x; theta, 2 I_d)
    is available in closed form, so the joint weight is exact.
    """

    d: int
    theta: np.ndarray
    a: np.ndarray
    b: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        for name in ("theta", "a", "b", "x"):
            object.__setattr__(self, name, _as_vector(getattr(self, name), self.d, name))

    def psi_blocks(self) -> dict[str, int]:
        return {"theta": self.d, "a": self.d, "b": self.d}

    def variational_blocks(self) -> tuple[str, ...]:
        return ("a", "b")

    @property
    def proposal_mean(self) -> np.ndarray:
        return self.a * self.x + self.b

    @property
    def mu(self) -> np.ndarray:
        """Posterior-mismatch vector 4(Ax+b) - 2(theta+x); zero at the optimum."""
        return 4.0 * self.proposal_mean - 2.0 * (self.theta + self.x)

    @property
    def b_d(self) -> float:
        mu2 = float(np.dot(self.mu, self.mu))
        return math.sqrt(self.d / 18.0 + mu2 / 6.0)

    def log_marginal(self) -> float:
        """log N(x; theta, 2 I_d)."""
        r2 = float(np.sum((self.x - self.theta) ** 2))
        return -0.5 * self.d * math.log(4.0 * math.pi) - 0.25 * r2

    def _split_phi(self, phi_prime):
        if phi_prime is None:
            return self.a, self.b
        arr = np.asarray(phi_prime, dtype=float)
        if arr.shape != (2 * self.d,):
            raise ValueError(f"phi_prime must have shape ({2 * self.d},)")
        return arr[: self.d], arr[self.d :]

    def phi_flat(self) -> np.ndarray:
        return np.concatenate([self.a, self.b])

    def log_weight(self, eps, phi_prime=None):
        eps = np.asarray(eps, dtype=float)
        if eps.shape[-1] != self.d:
            raise ValueError(f"noise must end in dimension {self.d}")
        a_p, b_p = self._split_phi(phi_prime)
        z = _SQRT_2_3 * eps + a_p * self.x + b_p
        log_joint = -self.d * math.log(2.0 * math.pi) - 0.5 * (
            np.sum((z - self.theta) ** 2, axis=-1) + np.sum((self.x - z) ** 2, axis=-1)
        )
        log_q = -0.5 * self.d * math.log(4.0 * math.pi / 3.0) - 0.75 * np.sum(
            (z - self.proposal_mean) ** 2, axis=-1
        )
        out = log_joint - log_q
        return float(out) if out.ndim == 0 else out

    def d_psi_log_weight(self, eps, psi: Psi, mode: str):
        self._check_mode(psi, mode)
        eps = np.asarray(eps, dtype=float)
        k = psi.k
        z_k = _SQRT_2_3 * eps[..., k] + self.proposal_mean[k]
        if psi.block == "theta":
            out = z_k - self.theta[k]
        else:
            base = self.theta[k] + self.x[k] - 2.0 * z_k
            if mode == DREP:
                base = base + math.sqrt(1.5) * eps[..., k]
            out = base * self.x[k] if psi.block == "a" else base
        return float(out) if np.ndim(out) == 0 else out

    def replace_psi(self, psi: Psi, value: float) -> "LinearGaussianModel":
        vec = np.array(getattr(self, psi.block))
        vec[psi.k] = value
        return replace(self, **{psi.block: vec})

    # -- sufficient-statistic batch samplers ------------------------------
    #
    # At phi' = phi the log-weight is
    #   c - |eps|^2/6 - <eps, mu>/sqrt(6),
    # so a replicate batch needs (eps_k, the projection of the remaining
    # coordinates on mu, and the residual chi-square mass), sampled exactly
    # as (normal, normal, 2*Gamma((d-2)/2)).

    def _log_weight_const(self) -> float:
        mu2 = float(np.dot(self.mu, self.mu))
        r2 = float(np.sum((self.x - self.theta) ** 2))
        return -0.5 * self.d * math.log(3.0 * math.pi) - mu2 / 16.0 - 0.25 * r2

    def _suff_batch(self, rng, n_rep: int, n_samples: int, k: int):
        mu = self.mu
        mu_k = float(mu[k])
        mu_perp = math.sqrt(max(0.0, float(np.dot(mu, mu)) - mu_k * mu_k))
        e1 = rng.standard_normal((n_rep, n_samples))
        if self.d >= 2:
            t = rng.standard_normal((n_rep, n_samples))
            if self.d > 2:
                q_extra = 2.0 * rng.standard_gamma(0.5 * (self.d - 2), (n_rep, n_samples))
            else:
                q_extra = 0.0
            q2 = e1 * e1 + t * t + q_extra
            ip = mu_k * e1 + mu_perp * t
        else:
            q2 = e1 * e1
            ip = mu_k * e1
        log_ws = self._log_weight_const() - q2 / 6.0 - ip / _SQRT_6
        return log_ws, e1

    def grad_batch(self, rng, n_rep: int, n_samples: int, psi: Psi, mode: str):
        self._check_mode(psi, mode)
        k = psi.k
        log_ws, e1 = self._suff_batch(rng, n_rep, n_samples, k)
        mu_k = float(self.mu[k])
        if psi.block == "theta":
            partials = _SQRT_2_3 * e1 + float(self.proposal_mean[k] - self.theta[k])
        else:
            if mode == DREP:
                partials = -0.5 * mu_k - e1 / _SQRT_6
            else:
                partials = -0.5 * mu_k - 2.0 * _SQRT_2_3 * e1
            if psi.block == "a":
                partials = partials * float(self.x[k])
        return log_ws, partials

    def bound_batch(self, rng, n_rep: int, n_samples: int):
        log_ws, _ = self._suff_batch(rng, n_rep, n_samples, 0)
        return log_ws


def fd_d_psi_log_weight(model, eps, psi: Psi, mode: str, step: float = 1e-5):
    """Central finite difference of the log-weight in the selected component.

    REP perturbs the component in the model itself (parameters and sample map
    move together); DREP perturbs only the phi' argument of the sample map.
    """
    model._check_mode(psi, mode)
    if mode == REP:
        base = getattr(model, psi.block)[psi.k]
        hi = model.replace_psi(psi, base + step).log_weight(eps)
        lo = model.replace_psi(psi, base - step).log_weight(eps)
    else:
        if isinstance(model, GaussianModel):
            phi = np.array(model.phi)
            offset = psi.k
        else:
            phi = model.phi_flat()
            blocks = [b for b in model.psi_blocks() if b in model.variational_blocks()]
            offset = blocks.index(psi.block) * model.d + psi.k
        up, dn = phi.copy(), phi.copy()
        up[offset] += step
        dn[offset] -= step
        hi = model.log_weight(eps, phi_prime=up)
        lo = model.log_weight(eps, phi_prime=dn)
    return (np.asarray(hi) - np.asarray(lo)) / (2.0 * step)


def gaussian_offset(d: int, eps_offset: float, log_px: float = 0.0) -> GaussianModel:
    """Perturbed Gaussian model: theta = eps_offset * ones, phi = 0."""
    return GaussianModel(
        d=d, theta=np.full(d, eps_offset), phi=np.zeros(d), log_px=log_px
    )


@dataclass(frozen=True)
class LinGaussDataset:
    """Seeded dataset x_1..x_T ~ N(0, 2 I_d) with its derived optimum.

    theta_star is the sample mean; the optimal proposal parameters are
    a_star = 1/2 and b_star = theta_star / 2.
    """

    d: int
    seed: int
    points: np.ndarray
    t: int = 1024

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.shape != (self.t, self.d):
            raise ValueError(f"points must have shape ({self.t}, {self.d})")
        pts = pts.copy()
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @classmethod
    def generate(cls, d: int, seed: int, t: int = 1024) -> "LinGaussDataset":
        rng = np.random.default_rng(seed)
        points = math.sqrt(2.0) * rng.standard_normal((t, d))
        return cls(d=d, seed=seed, points=points, t=t)

    @property
    def theta_star(self) -> np.ndarray:
        return self.points.mean(axis=0)

    @property
    def b_star(self) -> np.ndarray:
        return 0.5 * self.theta_star

    def save_csv(self, path) -> None:
        """CSV dump: two header lines (seed/d/t, column names), 17 significant
        digits per value - loaders round-trip bit-exactly."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self._to_csv())

    def _to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# lingauss-dataset seed={self.seed} d={self.d} t={self.t}\n")
        buf.write(",".join(f"x{j}" for j in range(self.d)) + "\n")
        for row in self.points:
            buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
        return buf.getvalue()

    @classmethod
    def load_csv(cls, path) -> "LinGaussDataset":
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
            if not header.startswith("# lingauss-dataset"):
                raise ValueError(f"not a lingauss dataset file: {path}")
            meta = dict(kv.split("=") for kv in header.split()[2:])
            fh.readline()  # column names
            rows = [
                [float(v) for v in line.strip().split(",")]
                for line in fh
                if line.strip()
            ]
        return cls(
            d=int(meta["d"]),
            seed=int(meta["seed"]),
            points=np.array(rows),
            t=int(meta["t"]),
        )


def lingauss_offset(
    dataset: LinGaussDataset, x_index: int, eps_offset: float
) -> LinearGaussianModel:
    """Perturbed linear Gaussian model around the dataset optimum.

    theta = theta_star + 2 eps, a = a_star, b = b_star + 2 eps, so the
    proposal mean sits at (theta + x)/2 + eps * ones.
    """
    d = dataset.d
    theta = dataset.theta_star + 2.0 * eps_offset
    b = dataset.b_star + 2.0 * eps_offset
    return LinearGaussianModel(
        d=d, theta=theta, a=np.full(d, 0.5), b=b, x=dataset.points[x_index]
    )
