"""Random state ensembles: uniform, Gaussian, and Gaussian-adjusted-projected.

The Gaussian-adjusted-projected (GAP) distribution of a density matrix rho
is realized three independent ways, which agree exactly in law:

* ``sample_gap``: draw coordinates in the eigenbasis of rho from the
  size-biased mixture that the norm-square adjustment of a product of
  complex Gaussians factors into, then project to the unit sphere.  One
  mixture index J is drawn with probability p_J, coordinate J gets its
  squared modulus from Gamma(shape 2, scale p_J) with a uniform phase, and
  every other coordinate stays an unbiased complex Gaussian.  Exact, O(dim)
  per draw, no rejection.
* ``sample_gap_via_dap``: push the uniform sphere distribution through
  sqrt(dim * rho), apply the norm-square adjustment by exact rejection
  (the adjusted weight is bounded by dim * max eigenvalue), and project.
* ``sample_gap_via_purification``: build a purification of rho on a
  doubled space, draw the ancilla vector from the norm-square-biased
  uniform distribution by exact rejection, and normalize the partial inner
  product with the purification.

``rejection_oracle_ga`` provides a deliberately naive fourth route to the
adjusted (pre-projection) ensemble for cross-checks in tests.

All draws flow through ``RandomStream``: a (seed, stream_index) pair that
deterministically names one PCG64 sequence, so every sampler is bit-for-bit
reproducible and independent streams can be assigned to parallel trials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hilbert import (
    DensityMatrix,
    OrthonormalBasis,
    SpaceFactorization,
    StateVector,
    partial_inner_product,
    single_factor,
)
from . import kernels

METHOD_TAGS = ("GAP_def1", "DAP_def2", "purification_def3", "rejection_oracle")


class AcceptanceStarvationError(RuntimeError):
    """Raised when a rejection loop accepts far less often than it should."""


@dataclass(frozen=True)
class RandomStream:
    """Deterministic name of one random sequence: a seed plus a stream index.

    Equal (seed, stream_index) pairs always reproduce the same draws, and
    distinct stream indexes give statistically independent sequences, so
    per-trial substreams make results independent of scheduling.
    """

    seed: int
    stream_index: int = 0

    def __post_init__(self):
        if self.seed < 0 or self.stream_index < 0:
            raise ValueError("seed and stream_index must be nonnegative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=self.seed, spawn_key=(self.stream_index,)
        )
        return np.random.Generator(np.random.PCG64(ss))

    def substream(self, index: int) -> "RandomStream":
        return RandomStream(self.seed, index)


@dataclass(frozen=True)
class GapSampleBatch:
    """Normalized sample vectors (rows) drawn from one GAP realization."""

    amplitudes: np.ndarray
    source_rho: DensityMatrix
    method_tag: str

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=np.complex128)
        if a.ndim != 2 or a.shape[1] != self.source_rho.dim:
            raise ValueError(f"bad sample array shape {a.shape}")
        if self.method_tag not in METHOD_TAGS:
            raise ValueError(f"unknown method tag {self.method_tag!r}")
        norms = np.linalg.norm(a, axis=1)
        if norms.size and np.max(np.abs(norms - 1.0)) > 1e-12:
            raise ValueError("batch contains a non-normalized sample")
        a = np.ascontiguousarray(a)
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    def __len__(self) -> int:
        return self.amplitudes.shape[0]

    def __getitem__(self, i: int) -> StateVector:
        return StateVector(
            self.amplitudes[i], self.source_rho.factorization, normalized=True
        )


def _eigensystem(rho: DensityMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues as a probability vector (clipped, renormalized) plus basis."""
    vals, vecs = rho.eigensystem()
    p = np.clip(vals, 0.0, None)
    p = p / p.sum()
    return p, vecs


def sample_complex_gaussian(
    stream_or_rng, variances, size: int | None = None
) -> np.ndarray:
    """Complex Gaussian draws: real and imaginary parts are independent
    N(0, variance/2), so E|X|^2 equals the requested variance."""
    rng = _rng_of(stream_or_rng)
    var = np.atleast_1d(np.asarray(variances, dtype=np.float64))
    if np.any(var < 0):
        raise ValueError("variances must be nonnegative")
    shape = (var.shape[0],) if size is None else (size, var.shape[0])
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return z * np.sqrt(var / 2.0)


def _rng_of(stream_or_rng) -> np.random.Generator:
    if isinstance(stream_or_rng, RandomStream):
        return stream_or_rng.generator()
    if isinstance(stream_or_rng, np.random.Generator):
        return stream_or_rng
    raise TypeError("expected a RandomStream or numpy Generator")


def _space_of(space) -> SpaceFactorization:
    if isinstance(space, SpaceFactorization):
        return space
    return single_factor("H", int(space))


def sample_uniform_sphere(stream_or_rng, space, size: int | None = None):
    """Uniform distribution on the unit sphere of a dim-n space.

    With ``size`` given, returns a (size, dim) array of normalized rows;
    otherwise a single normalized StateVector.
    """
    fact = _space_of(space)
    rng = _rng_of(stream_or_rng)
    n = size if size is not None else 1
    z = rng.standard_normal((n, fact.total_dim)) + 1j * rng.standard_normal(
        (n, fact.total_dim)
    )
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    if size is None:
        return StateVector(z[0], fact, normalized=True)
    return z


def sample_g(stream_or_rng, rho: DensityMatrix, size: int | None = None):
    """The Gaussian ensemble of rho: unnormalized vectors with covariance rho.

    Coordinates in the eigenbasis of rho are independent complex Gaussians
    whose variances are the eigenvalues; E |Psi|^2 = tr rho = 1.
    """
    p, vecs = _eigensystem(rho)
    rng = _rng_of(stream_or_rng)
    coeffs = sample_complex_gaussian(rng, p, size=size if size is not None else 1)
    samples = coeffs @ vecs.T
    if size is None:
        return StateVector(samples[0], rho.factorization)
    return samples


def _ga_coefficients(rng: np.random.Generator, p: np.ndarray, n: int) -> np.ndarray:
    """Unnormalized eigenbasis coordinates of n draws from the norm-square
    adjusted Gaussian ensemble, via its exact mixture decomposition."""
    d = p.shape[0]
    j_idx = rng.choice(d, size=n, p=p)
    coeffs = sample_complex_gaussian(rng, p, size=n)
    r = rng.gamma(2.0, scale=p[j_idx])
    theta = rng.uniform(0.0, 2.0 * math.pi, size=n)
    coeffs[np.arange(n), j_idx] = np.sqrt(r) * np.exp(1j * theta)
    return coeffs


def sample_ga(stream_or_rng, rho: DensityMatrix, size: int | None = None):
    """The adjusted (size-biased) Gaussian ensemble of rho, not yet projected.

    Each draw picks one eigendirection J with probability p_J, gives it
    squared modulus Gamma(2, p_J) with a uniform phase, and keeps plain
    complex Gaussians elsewhere; this is exactly the |psi|^2-reweighted
    Gaussian ensemble.  Draws are unnormalized.
    """
    p, vecs = _eigensystem(rho)
    rng = _rng_of(stream_or_rng)
    coeffs = _ga_coefficients(rng, p, size if size is not None else 1)
    samples = coeffs @ vecs.T
    if size is None:
        return StateVector(samples[0], rho.factorization)
    return samples


def sample_gap(stream_or_rng, rho: DensityMatrix, size: int | None = None):
    """GAP(rho) by the exact mixture construction: adjusted draw, projected."""
    p, vecs = _eigensystem(rho)
    rng = _rng_of(stream_or_rng)
    coeffs = _ga_coefficients(rng, p, size if size is not None else 1)
    coeffs /= np.linalg.norm(coeffs, axis=1, keepdims=True)
    samples = coeffs @ vecs.T
    samples /= np.linalg.norm(samples, axis=1, keepdims=True)
    if size is None:
        return StateVector(samples[0], rho.factorization, normalized=True)
    return GapSampleBatch(samples, rho, "GAP_def1")


def sample_d(stream_or_rng, rho: DensityMatrix, size: int | None = None):
    """Pushforward of the uniform sphere measure through sqrt(dim * rho)."""
    p, vecs = _eigensystem(rho)
    rng = _rng_of(stream_or_rng)
    n = size if size is not None else 1
    u = sample_uniform_sphere(rng, rho.dim, size=n)
    coeffs = u * np.sqrt(rho.dim * p)
    samples = coeffs @ vecs.T
    if size is None:
        return StateVector(samples[0], rho.factorization)
    return samples


def _accept_biased_sphere(
    rng: np.random.Generator, weights_of, dim: int, bound: float, n: int
) -> np.ndarray:
    """Draw n uniform-sphere coordinate rows accepted with probability
    weights_of(row) / bound.  Exact rejection; bound must dominate."""
    have = []
    count = 0
    expected_rate = max(1.0 / bound, 1e-6)
    while count < n:
        need = n - count
        chunk = max(256, int(1.6 * need / expected_rate) + 16)
        z = rng.standard_normal((chunk, dim)) + 1j * rng.standard_normal((chunk, dim))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        w = weights_of(z)
        if np.any(w > bound * (1 + 1e-9)):
            raise RuntimeError("rejection bound violated; bound does not dominate")
        keep = rng.uniform(0.0, 1.0, size=chunk) * bound < w
        accepted = z[keep]
        have.append(accepted)
        count += accepted.shape[0]
    return np.concatenate(have, axis=0)[:n]


def sample_gap_via_dap(stream_or_rng, rho: DensityMatrix, size: int | None = None):
    """GAP(rho) as adjust-then-project applied to the sqrt(dim*rho) pushforward.

    The adjustment density |psi|^2 on D(rho) draws is bounded by
    dim * max-eigenvalue, so plain rejection realizes it exactly.
    """
    p, vecs = _eigensystem(rho)
    rng = _rng_of(stream_or_rng)
    n = size if size is not None else 1
    d = rho.dim
    scale2 = d * p  # squared coordinate scaling of the pushforward
    bound = float(scale2.max())

    def weights(u):
        return (np.abs(u) ** 2) @ scale2

    u = _accept_biased_sphere(rng, weights, d, bound, n)
    coeffs = u * np.sqrt(scale2)
    samples = coeffs @ vecs.T
    samples /= np.linalg.norm(samples, axis=1, keepdims=True)
    if size is None:
        return StateVector(samples[0], rho.factorization, normalized=True)
    return GapSampleBatch(samples, rho, "DAP_def2")


_PURIFIER_LABEL = "_purifier"


def purification_of(rho: DensityMatrix) -> StateVector:
    """A canonical purification of rho on rho's space joined with an ancilla.

    Uses sqrt(p_j) |v_j> (x) |e_j> over the eigensystem of rho, with the
    ancilla in its computational basis under the label ``_purifier``.
    """
    p, vecs = _eigensystem(rho)
    d = rho.dim
    amps = (vecs * np.sqrt(p)).reshape(-1)  # sum_j sqrt(p_j) v_j (x) e_j
    fact = rho.factorization.joined_with(single_factor(_PURIFIER_LABEL, d))
    return StateVector(amps, fact, normalized=True)


def sample_gap_via_purification(
    stream_or_rng, rho: DensityMatrix, size: int | None = None
):
    """GAP(rho) by conditioning a purification on a biased ancilla draw.

    The ancilla vector is drawn from the uniform sphere reweighted by the
    squared norm of the partial inner product with the purification (exact
    rejection; the weight is bounded by the top eigenvalue of rho), and the
    partial inner product is then normalized.
    """
    p, vecs = _eigensystem(rho)
    rng = _rng_of(stream_or_rng)
    d = rho.dim
    bound = float(p.max())

    if size is None:
        phi = purification_of(rho)
        while True:
            psi2 = sample_uniform_sphere(rng, d, size=1)[0]
            reduced = partial_inner_product(psi2, phi, _PURIFIER_LABEL)
            w = reduced.norm() ** 2
            if rng.uniform(0.0, 1.0) * bound < w:
                return reduced.normalized_copy()

    def weights(u):
        return (np.abs(u) ** 2) @ p

    psi2 = _accept_biased_sphere(rng, weights, d, bound, size)
    # <psi2|Phi> in the eigenbasis: coordinate j is sqrt(p_j) * conj(psi2_j).
    coeffs = np.sqrt(p) * psi2.conj()
    samples = coeffs @ vecs.T
    samples /= np.linalg.norm(samples, axis=1, keepdims=True)
    return GapSampleBatch(samples, rho, "purification_def3")


@dataclass(frozen=True)
class RejectionOracleResult:
    """Unnormalized adjusted-ensemble draws plus rejection diagnostics."""

    samples: np.ndarray
    source_rho: DensityMatrix
    cap: float
    acceptance_rate: float
    proposals: int
    tail_fraction: float  # fraction of proposals with |psi|^2 above the cap

    def normalized_batch(self) -> GapSampleBatch:
        s = self.samples / np.linalg.norm(self.samples, axis=1, keepdims=True)
        return GapSampleBatch(s, self.source_rho, "rejection_oracle")


def rejection_oracle_ga(
    stream_or_rng, rho: DensityMatrix, cap: float = 50.0, size: int = 1
) -> RejectionOracleResult:
    """Slow reference sampler for the norm-square-adjusted Gaussian ensemble.

    Accepts Gaussian-ensemble draws with probability min(|psi|^2, cap)/cap.
    The capped weight truncates the (unbounded) adjustment, biasing the
    result by at most the tail probability of |psi|^2 beyond the cap, which
    is estimated from the proposals and reported.  Intended for tests only.
    """
    if cap < 50.0:
        raise ValueError("cap must be at least 50")
    rng = _rng_of(stream_or_rng)
    p, vecs = _eigensystem(rho)
    kept = []
    count = 0
    proposals = 0
    tail = 0
    while count < size:
        need = size - count
        chunk = max(512, int(1.3 * need * cap) + 16)
        coeffs = sample_complex_gaussian(rng, p, size=chunk)
        w = np.einsum("ij,ij->i", coeffs.real, coeffs.real) + np.einsum(
            "ij,ij->i", coeffs.imag, coeffs.imag
        )
        proposals += chunk
        tail += int(np.count_nonzero(w > cap))
        keep = rng.uniform(0.0, 1.0, size=chunk) * cap < np.minimum(w, cap)
        kept.append(coeffs[keep])
        count += int(np.count_nonzero(keep))
        # Starvation guard: the long-run acceptance rate sits near 1/cap
        # because the adjustment has unit mean; far below that means the
        # proposal ensemble is broken.
        if proposals >= 50 * cap and count / proposals < 0.2 / cap:
            raise AcceptanceStarvationError(
                f"acceptance rate {count / proposals:.2e} with cap {cap}"
            )
    coeffs = np.concatenate(kept, axis=0)[:size]
    samples = coeffs @ vecs.T
    return RejectionOracleResult(
        samples=samples,
        source_rho=rho,
        cap=float(cap),
        acceptance_rate=count / proposals,
        proposals=proposals,
        tail_fraction=tail / proposals,
    )


def sample_haar_unitary(stream_or_rng, dim: int) -> np.ndarray:
    """Haar-distributed unitary: QR of a complex Ginibre matrix with the
    R diagonal's phases absorbed so the factorization is unique."""
    rng = _rng_of(stream_or_rng)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
    z /= math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))


def sample_haar_onb(stream_or_rng, dim: int, factor_label: str) -> OrthonormalBasis:
    """Haar-random orthonormal basis of one labeled factor."""
    return OrthonormalBasis(sample_haar_unitary(stream_or_rng, dim), factor_label)


def empirical_covariance(vectors: np.ndarray) -> np.ndarray:
    """Mean outer product of the rows, symmetrized against roundoff."""
    n = vectors.shape[0]
    m = kernels.sum_outer(np.ascontiguousarray(vectors)) / n
    return 0.5 * (m + m.conj().T)


GAP_SAMPLERS = {
    "GAP_def1": sample_gap,
    "DAP_def2": sample_gap_via_dap,
    "purification_def3": sample_gap_via_purification,
}
