"""Encoders, the induced joint over (D, Y, Z) and exact IDG risks."""

import logging
from collections.abc import Sequence
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict

from idg_lab.constants import SUPPORT_TOL
from idg_lab.theory.finite_prob import CondKernel, JointTable
from idg_lab.theory.losses import LossSpec
from idg_lab.theory.world import DomainSlice, World, bayes_risk_from_x
from idg_lab.utils.arrays import ExtendedMatrix, ExtendedReal, FloatArray
from idg_lab.utils.error_handler import DimensionMismatchError

logger = logging.getLogger("idg_lab.encoder_risk")


class Encoder(BaseModel):
    """Stochastic map p(Z|X) as an [n_inputs x n_codes] kernel."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kernel: CondKernel

    @property
    def n_inputs(self) -> int:
        return self.kernel.n_in

    @property
    def n_codes(self) -> int:
        return self.kernel.n_out

    @property
    def deterministic(self) -> bool:
        return self.kernel.is_deterministic

    def codes(self) -> list[int]:
        """Code of each input; only meaningful for deterministic encoders."""
        if not self.deterministic:
            raise ValueError("codes() requires a deterministic encoder")
        return [int(z) for z in self.kernel.rows.argmax(axis=1)]

    @classmethod
    def from_assignment(cls, codes: Sequence[int], n_codes: int) -> "Encoder":
        return cls(kernel=CondKernel.from_assignment(codes, n_codes))

    @classmethod
    def identity(cls, n_inputs: int) -> "Encoder":
        return cls(kernel=CondKernel.identity(n_inputs))

    @classmethod
    def constant(cls, n_inputs: int, n_codes: int = 1, code: int = 0) -> "Encoder":
        return cls.from_assignment([code] * n_inputs, n_codes)


class InducedJoint(BaseModel):
    """p(D, Y, Z) and its conditionals; undefined conditionals are zero rows."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    joint: JointTable
    p_z: FloatArray
    p_z_given_d: FloatArray
    p_y_given_z: FloatArray
    p_y_given_zd: FloatArray

    def defined(self, domain: int | None = None) -> np.ndarray:
        """Mask of codes with positive mass (in ``domain`` if given)."""
        if domain is None:
            return self.p_z > SUPPORT_TOL
        return self.p_z_given_d[domain] > SUPPORT_TOL


def _safe_divide(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > SUPPORT_TOL)
    return out


def _check_encoder(w: World, e: Encoder) -> None:
    if e.n_inputs != w.n_inputs:
        raise DimensionMismatchError("encoder inputs", w.n_inputs, e.n_inputs)


def induced_joint(w: World, e: Encoder) -> InducedJoint:
    """Push the world through the encoder, marginalizing X out exactly."""
    _check_encoder(w, e)
    mass = np.einsum(
        "d,dx,dxy,xz->dyz", w.p_d.probs, w.p_x_given_d.rows, w.label_tensor(), e.kernel.rows
    )
    p_dz = mass.sum(axis=1)
    p_yz = mass.sum(axis=0)
    p_z = p_yz.sum(axis=0)
    return InducedJoint(
        joint=JointTable(mass=mass),
        p_z=p_z,
        p_z_given_d=p_dz / w.p_d.probs[:, None],
        p_y_given_z=_safe_divide(p_yz.T, p_z[:, None]),
        p_y_given_zd=_safe_divide(np.transpose(mass, (0, 2, 1)), p_dz[:, :, None]),
    )


def support_match(w: World, e: Encoder) -> bool:
    """True iff supp p(Z|d) = supp p(Z) for every domain."""
    ij = induced_joint(w, e)
    overall = ij.defined()
    return all(np.array_equal(ij.defined(d), overall) for d in range(w.n_domains))


def risk_from_z(w: World, e: Encoder, domain: int | None = None) -> float:
    """R[Y|Z]: expected loss of the best predictor from Z (in ``domain`` if given)."""
    ij = induced_joint(w, e)
    if domain is None:
        weights, rows = ij.p_z, ij.p_y_given_z
    else:
        weights, rows = ij.p_z_given_d[domain], ij.p_y_given_zd[domain]
    total = 0.0
    for z in np.flatnonzero(weights > SUPPORT_TOL):
        total += weights[z] * w.loss.min_loss(rows[z])
    return float(total)


class FamilyKind(str, Enum):
    FIXED = "fixed"
    TIE_SET = "tie_set"
    FREE = "free"


class CodeFamily(BaseModel):
    """Source risk minimizers' admissible actions at one code."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: FamilyKind
    actions: list[FloatArray] = []


class PredictorSetSpec(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    families: list[CodeFamily]

    def __getitem__(self, code: int) -> CodeFamily:
        return self.families[code]


def _slice_code_laws(s: DomainSlice, e: Encoder) -> tuple[np.ndarray, np.ndarray]:
    """p(z|d) and p(Y|z,d) for a domain slice."""
    if e.n_inputs != s.n_inputs:
        raise DimensionMismatchError("encoder inputs", s.n_inputs, e.n_inputs)
    joint_zy = np.einsum("x,xy,xz->zy", s.p_x.probs, s.p_y_given_x.rows, e.kernel.rows)
    p_z = joint_zy.sum(axis=1)
    return p_z, _safe_divide(joint_zy, p_z[:, None])


def code_families(source: DomainSlice, e: Encoder, loss: LossSpec) -> list[CodeFamily]:
    """Source-optimal action family per code for a domain slice."""
    p_z, p_y_given_z = _slice_code_laws(source, e)
    families = []
    for z in range(e.n_codes):
        if p_z[z] <= SUPPORT_TOL:
            families.append(CodeFamily(kind=FamilyKind.FREE))
            continue
        actions = loss.optimal_actions(p_y_given_z[z])
        kind = FamilyKind.FIXED if len(actions) == 1 else FamilyKind.TIE_SET
        families.append(CodeFamily(kind=kind, actions=actions))
    return families


def source_optimal_family(w: World, e: Encoder, ds: int) -> PredictorSetSpec:
    """Per-code description of the source-risk-minimizing predictors for domain ``ds``."""
    _check_encoder(w, e)
    return PredictorSetSpec(families=code_families(w.domain_slice(ds), e, w.loss))


def domain_pair_risk(
    source: DomainSlice, target: DomainSlice, e: Encoder, loss: LossSpec, worst: bool = True
) -> float:
    """Worst (or best) target risk over the source-optimal predictors from Z.

    Free codes take the sup (or inf) over the full action space in closed form.
    """
    families = code_families(source, e, loss)
    p_z, p_y_given_z = _slice_code_laws(target, e)
    total = 0.0
    for z in np.flatnonzero(p_z > SUPPORT_TOL):
        p = p_y_given_z[z]
        family = families[z]
        if family.kind is FamilyKind.FREE:
            value = loss.worst_free_loss(p) if worst else loss.min_loss(p)
        else:
            values = [loss.expected_loss(p, a) for a in family.actions]
            value = max(values) if worst else min(values)
        total += p_z[z] * value
    return float(total)


def _pair_matrix(w: World, e: Encoder, worst: bool) -> np.ndarray:
    _check_encoder(w, e)
    slices = [w.domain_slice(d) for d in range(w.n_domains)]
    return np.array(
        [[domain_pair_risk(s, t, e, w.loss, worst) for t in slices] for s in slices]
    )


def _pair_expectation(pair_mass: np.ndarray, risks: np.ndarray) -> float:
    on = pair_mass > SUPPORT_TOL
    if np.any(np.isinf(risks[on])):
        return float("inf")
    return float((pair_mass[on] * risks[on]).sum())


class IdgReport(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    idg_risk: ExtendedReal
    pair_risks: ExtendedMatrix
    support_match: bool
    risk_from_z: ExtendedReal


def idg_risk(w: World, e: Encoder) -> IdgReport:
    """Expected worst-case target risk of source risk minimizers from Z.

    Assumptions are not enforced here; callers gate on ``validate_world``.
    """
    pairs = _pair_matrix(w, e, worst=True)
    return IdgReport(
        idg_risk=_pair_expectation(w.pair_dist.mass, pairs),
        pair_risks=pairs,
        support_match=support_match(w, e),
        risk_from_z=risk_from_z(w, e),
    )


def best_case_risk(w: World, e: Encoder) -> float:
    """As :func:`idg_risk` but with the most favourable source minimizer."""
    return _pair_expectation(w.pair_dist.mass, _pair_matrix(w, e, worst=False))


def target_marginal(w: World) -> np.ndarray:
    """Law of the target domain under the pair distribution."""
    return w.pair_dist.mass.sum(axis=0)


def target_risk_lower_bound(w: World, e: Encoder) -> float:
    """E_{Dt}[R_{Dt}[Y|Z]], the best any predictor from Z can do per target."""
    p_t = target_marginal(w)
    return float(sum(p_t[d] * risk_from_z(w, e, d) for d in range(w.n_domains)))


def target_bayes_risk(w: World) -> float:
    """E_{Dt}[R_{Dt}[Y|X]]; equals ``bayes_risk_from_x`` when the target law is p(D)."""
    p_t = target_marginal(w)
    return float(sum(p_t[d] * bayes_risk_from_x(w, d) for d in range(w.n_domains)))
