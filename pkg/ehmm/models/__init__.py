"""Validated parameter schemas for ehmm."""

from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ehmm.core.config import settings


class PoolStrategy(str, Enum):
    """How Gaussian pool distributions are chosen."""

    FIXED = "fixed"
    PER_OBS = "per-obs"


class SamplerKind(str, Enum):
    EHMM = "ehmm"
    METROPOLIS = "metropolis"


class ProposalKind(str, Enum):
    """Single-site Metropolis proposal families."""

    INDEPENDENCE = "independence"
    RANDOM_WALK = "random-walk"
    UNIFORM = "uniform"  # finite state spaces only


class TanhModelParams(BaseModel):
    """Parameters of the tanh-drift Gaussian state-space model."""

    model_config = ConfigDict(frozen=True)

    sigma: float = Field(gt=0, allow_inf_nan=False)
    eta: float = Field(allow_inf_nan=False)
    tau: float = Field(gt=0, allow_inf_nan=False)
    # P(x_0) = N(init_mean, init_sd**2)
    init_mean: float = Field(default=0.0, allow_inf_nan=False)
    init_sd: float = Field(default=1.0, gt=0, allow_inf_nan=False)


class GaussPoolParams(BaseModel):
    """Gaussian pool distribution N(mu, nu**2) with AR(1) coefficient alpha."""

    model_config = ConfigDict(frozen=True)

    mu: float = Field(allow_inf_nan=False)
    nu: float = Field(gt=0, allow_inf_nan=False)
    alpha: float = Field(default=0.0, gt=-1, lt=1)


class GridSpec(BaseModel):
    """Grid of m cell midpoints covering [lo, hi]."""

    model_config = ConfigDict(frozen=True)

    lo: float = Field(default=-3.0, allow_inf_nan=False)
    hi: float = Field(default=3.0, allow_inf_nan=False)
    m: int = Field(default=400, ge=2)

    @model_validator(mode="after")
    def _ordered(self) -> "GridSpec":
        if not self.lo < self.hi:
            raise ValueError(f"grid needs lo < hi (got {self.lo}, {self.hi})")
        return self


class MetropolisConfig(BaseModel):
    """Single-site Metropolis baseline settings (sweep order is 0..n-1)."""

    model_config = ConfigDict(frozen=True)

    proposal: ProposalKind = ProposalKind.INDEPENDENCE
    proposal_mean: float = Field(default=0.0, allow_inf_nan=False)
    proposal_sd: float = Field(default=1.0, gt=0, allow_inf_nan=False)
    iterations: int = Field(default=0, ge=0)
    burn_in: int = Field(default=0, ge=0)
    thin: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    chain: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _burn_in_fits(self) -> "MetropolisConfig":
        if self.burn_in > self.iterations:
            raise ValueError("burn_in must not exceed iterations")
        return self


_OPTIONAL_FIELDS = ("dump_pools", "data", "samples", "oracle")


class RunConfig(BaseModel):
    """Fully resolved parameters of one CLI run."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    # Model
    sigma: float = Field(default=2.5, gt=0, allow_inf_nan=False)
    eta: float = Field(default=2.5, allow_inf_nan=False)
    tau: float = Field(default=0.4, gt=0, allow_inf_nan=False)
    init_mean: float = Field(default=0.0, allow_inf_nan=False)
    init_sd: float = Field(default=1.0, gt=0, allow_inf_nan=False)
    n: int = Field(default=1000, ge=1)

    # Sampler
    sampler: SamplerKind = SamplerKind.EHMM
    K: int = Field(default=10, ge=1)
    alpha: float = Field(default=0.0, gt=-1, lt=1)
    pool: PoolStrategy = PoolStrategy.FIXED
    mu: float = Field(default=0.0, allow_inf_nan=False)
    nu: float = Field(default=1.0, gt=0, allow_inf_nan=False)
    proposal: ProposalKind = ProposalKind.INDEPENDENCE
    proposal_mean: float = Field(default=0.0, allow_inf_nan=False)
    proposal_sd: float = Field(default=1.0, gt=0, allow_inf_nan=False)

    # Chain
    iters: int = Field(default=100, ge=0)
    burnin: int = Field(default=0, ge=0)
    thin: int = Field(default=1, ge=1)
    seed: int = Field(default=1, ge=0, lt=2**64)
    chains: int = Field(default=1, ge=1)
    init: str = "data"
    dump_pools: Optional[int] = Field(default=None, ge=1)

    # Oracle and report
    grid_lo: float = Field(default=-3.0, allow_inf_nan=False)
    grid_hi: float = Field(default=3.0, allow_inf_nan=False)
    grid_m: int = Field(default=400, ge=2)
    strict: bool = False
    probe: List[int] = Field(default_factory=lambda: [200, 675])
    max_lag: int = Field(default=20, ge=1)

    # Files
    out: str = Field(default_factory=lambda: settings.output_dir)
    data: Optional[str] = None
    samples: Optional[str] = None
    oracle: Optional[str] = None

    @field_validator(*_OPTIONAL_FIELDS, mode="before")
    @classmethod
    def _blank_is_none(cls, value: Any) -> Any:
        if isinstance(value, str) and not value.strip():
            return None
        return value

    @field_validator("probe", mode="before")
    @classmethod
    def _split_probe(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [int(tok) for tok in value.replace(",", " ").split()]
        return value

    @field_validator("probe")
    @classmethod
    def _probe_non_negative(cls, value: List[int]) -> List[int]:
        if any(t < 0 for t in value):
            raise ValueError("probe times must be non-negative")
        return value

    @field_validator("init")
    @classmethod
    def _init_rule(cls, value: str) -> str:
        if value in ("data", "zero") or (value.startswith("file=") and len(value) > 5):
            return value
        raise ValueError("init must be 'data', 'zero' or 'file=PATH'")

    @model_validator(mode="after")
    def _consistent(self) -> "RunConfig":
        if self.burnin > self.iters:
            raise ValueError("burnin must not exceed iters")
        if not self.grid_lo < self.grid_hi:
            raise ValueError("grid needs grid_lo < grid_hi")
        return self

    def tanh_params(self) -> TanhModelParams:
        return TanhModelParams(
            sigma=self.sigma,
            eta=self.eta,
            tau=self.tau,
            init_mean=self.init_mean,
            init_sd=self.init_sd,
        )

    def grid(self) -> GridSpec:
        return GridSpec(lo=self.grid_lo, hi=self.grid_hi, m=self.grid_m)

    def metropolis(self, chain: int = 0) -> MetropolisConfig:
        return MetropolisConfig(
            proposal=self.proposal,
            proposal_mean=self.proposal_mean,
            proposal_sd=self.proposal_sd,
            iterations=self.iters,
            burn_in=self.burnin,
            thin=self.thin,
            seed=self.seed,
            chain=chain,
        )

    def to_flat(self) -> Dict[str, str]:
        """Every field rendered in the flat ``key = value`` grammar."""
        flat: Dict[str, str] = {}
        for name in type(self).model_fields:
            value = getattr(self, name)
            if value is None:
                flat[name] = ""
            elif isinstance(value, bool):
                flat[name] = "true" if value else "false"
            elif isinstance(value, Enum):
                flat[name] = str(value.value)
            elif isinstance(value, float):
                flat[name] = repr(value)
            elif isinstance(value, list):
                flat[name] = " ".join(str(v) for v in value)
            else:
                flat[name] = str(value)
        return flat
