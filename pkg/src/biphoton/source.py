"""Monte Carlo generator of correlated Stokes / anti-Stokes time tags.

The source is modeled phenomenologically: pairs are emitted as a homogeneous
Poisson process, the anti-Stokes photon trails the Stokes photon by an
exponentially distributed delay, the OAM state is projected by the chosen
(Stokes, anti-Stokes) modes, each arm is thinned by its collection efficiency,
and uncorrelated noise is added per arm. No atomic physics is modeled; all
rates are inputs.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError
from .states import (
    MeasurementMode,
    Setting,
    check_density_matrix,
    format_setting,
    parse_state,
    projector,
    single_projector,
)
from .timetag import Channel, TimeTagStream

RNG_ALGORITHM = "numpy.random.Philox(4x64-10)"
PS = 1e-12
MAX_DURATION_PS = 2**62


class Arm(enum.Enum):
    STOKES = "stokes"
    ANTI_STOKES = "anti_stokes"


@dataclass(frozen=True)
class SourceConfig:
    """Parameters of one simulated run.

    ``state`` is either a label understood by :func:`biphoton.states.parse_state`
    or an explicit 4x4 density matrix. ``setting=None`` means no projection.
    """

    pair_rate_hz: float = 1e5
    tau_co_ps: float = 40_000.0
    eta_s: float = 0.040
    eta_as: float = 0.032
    noise_s_hz: float = 0.0
    noise_as_hz: float = 0.0
    duration_ps: int = 160 * 10**12
    state: str | np.ndarray = "bell"
    setting: Setting | None = None
    seed: int = 0
    # Reserved for detector non-idealities; must stay zero for now.
    dead_time_ps: int = field(default=0)
    jitter_ps: int = field(default=0)

    @property
    def rho(self) -> np.ndarray:
        if isinstance(self.state, str):
            return parse_state(self.state)
        return np.asarray(self.state, dtype=complex)

    @property
    def duration_s(self) -> float:
        return self.duration_ps * PS

    def validate(self) -> SourceConfig:
        for name in ("pair_rate_hz", "noise_s_hz", "noise_as_hz"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValidationError(f"{name} must be finite and >= 0, got {v!r}")
        if not np.isfinite(self.tau_co_ps) or self.tau_co_ps <= 0:
            raise ValidationError(f"tau_co_ps must be > 0, got {self.tau_co_ps!r}")
        for name in ("eta_s", "eta_as"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValidationError(f"{name} must lie in [0, 1], got {v!r}")
        if int(self.duration_ps) != self.duration_ps or self.duration_ps <= 0:
            raise ValidationError(f"duration_ps must be a positive integer, got {self.duration_ps!r}")
        if self.duration_ps >= MAX_DURATION_PS:
            raise ValidationError(f"duration_ps={self.duration_ps} overflows the time axis")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.dead_time_ps or self.jitter_ps:
            raise ValidationError("dead time and jitter are not modeled")
        check_density_matrix(self.rho, name="state")
        return self

    def to_dict(self) -> dict:
        if isinstance(self.state, str):
            state = self.state
        else:
            rho = np.asarray(self.state, dtype=complex)
            state = [[[float(z.real), float(z.imag)] for z in row] for row in rho]
        return {
            "pair_rate_hz": float(self.pair_rate_hz),
            "tau_co_ps": float(self.tau_co_ps),
            "eta_s": float(self.eta_s),
            "eta_as": float(self.eta_as),
            "noise_s_hz": float(self.noise_s_hz),
            "noise_as_hz": float(self.noise_as_hz),
            "duration_ps": int(self.duration_ps),
            "state": state,
            "setting": format_setting(self.setting),
            "seed": int(self.seed),
        }

    def config_hash(self) -> str:
        """Digest of every field except the seed."""
        d = self.to_dict()
        d.pop("seed")
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def with_(self, **changes) -> SourceConfig:
        return replace(self, **changes)


@dataclass(frozen=True)
class PairEvents:
    """Pairs with at least one surviving photon.

    Arrays are parallel; ``t_as_ps >= t_s_ps`` always, even for pairs whose
    anti-Stokes photon did not survive.
    """

    t_s_ps: np.ndarray
    t_as_ps: np.ndarray
    survived_s: np.ndarray
    survived_as: np.ndarray

    def __len__(self) -> int:
        return int(self.t_s_ps.size)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def derive_seed(master: int, index: int) -> int:
    """Independent 64-bit seed for sub-run ``index`` of a master seed."""
    ss = np.random.SeedSequence([int(master), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def delay_from_uniform(u, tau_co_ps: float):
    """Inverse-CDF map of a uniform draw in (0, 1] to an integer delay in ps."""
    if not tau_co_ps > 0:
        raise ValidationError(f"tau_co_ps must be > 0, got {tau_co_ps!r}")
    d = np.rint(-tau_co_ps * np.log(u)).astype(np.int64)
    return d if np.ndim(d) else int(d)


def sample_pair_delay(rng: np.random.Generator, tau_co_ps: float, size=None):
    """Exponential anti-Stokes delay with mean ``tau_co_ps``, rounded to ps."""
    u = 1.0 - rng.random(size)  # (0, 1]
    return delay_from_uniform(u, tau_co_ps)


def _real_expectation(rho: np.ndarray, op: np.ndarray) -> float:
    rho = check_density_matrix(rho)
    val = np.trace(rho @ op)
    if abs(val.imag) > 1e-12:
        raise ValidationError(f"expectation value has imaginary part {val.imag:.3g}")
    return float(min(1.0, max(0.0, val.real)))


def joint_pass_probability(rho, m_s: MeasurementMode, m_as: MeasurementMode) -> float:
    """<m_s m_as| rho |m_s m_as>."""
    return _real_expectation(rho, projector((m_s, m_as)))


def marginal_pass_probability(rho, m: MeasurementMode, arm: Arm) -> float:
    """Probability that one arm's photon passes its projection, whatever the other does."""
    p = single_projector(m)
    eye = np.eye(2)
    op = np.kron(p, eye) if Arm(arm) is Arm.STOKES else np.kron(eye, p)
    return _real_expectation(rho, op)


def projection_probabilities(config: SourceConfig, setting: Setting | None
                             ) -> tuple[float, float, float]:
    """(joint, Stokes marginal, anti-Stokes marginal) pass probabilities."""
    if setting is None:
        return 1.0, 1.0, 1.0
    rho = config.rho
    pj = joint_pass_probability(rho, *setting)
    ps = marginal_pass_probability(rho, setting[0], Arm.STOKES)
    pas = marginal_pass_probability(rho, setting[1], Arm.ANTI_STOKES)
    return pj, max(ps, pj), max(pas, pj)


def detection_probabilities(config: SourceConfig) -> tuple[float, float, float]:
    """Per emitted pair: P(both detected), P(Stokes only), P(anti-Stokes only)."""
    pj, ps, pas = projection_probabilities(config, config.setting)
    both = config.eta_s * config.eta_as * pj
    s_only = config.eta_s * ps - both
    as_only = config.eta_as * pas - both
    return both, max(s_only, 0.0), max(as_only, 0.0)


def poisson_arrivals(rng: np.random.Generator, rate_hz: float, duration_ps: int) -> np.ndarray:
    """Sorted arrival times (ps) of a homogeneous Poisson process on [0, duration).

    The count is Poisson; given the count, the times are uniform order
    statistics, drawn already sorted as normalized partial sums of
    exponential gaps.
    """
    n = int(rng.poisson(rate_hz * duration_ps * PS))
    gaps = rng.standard_exponential(n + 1)
    cs = np.cumsum(gaps)
    t = np.floor(cs[:n] * (duration_ps / cs[n])).astype(np.int64)
    return np.minimum(t, duration_ps - 1)


def sample_pair_events(config: SourceConfig, rng: np.random.Generator) -> PairEvents:
    """Emission times, delays and survival flags of all pairs that leave a trace.

    Pairs whose two photons are both lost are never materialized: thinning a
    Poisson process gives a Poisson process, so only the pairs with at least
    one detected photon are drawn (rate R * P(any)), and each is then assigned
    to "both", "Stokes only" or "anti-Stokes only" with the conditional
    probabilities. Output is sorted by emission time.
    """
    both, s_only, as_only = detection_probabilities(config)
    p_any = both + s_only + as_only
    t_s = poisson_arrivals(rng, config.pair_rate_hz * p_any, config.duration_ps)
    n = t_s.size
    delay = np.asarray(sample_pair_delay(rng, config.tau_co_ps, size=n), dtype=np.int64)
    u = rng.random(n) * p_any
    surv_s = u < both + s_only
    surv_as = (u < both) | (u >= both + s_only)
    return PairEvents(t_s, t_s + delay, surv_s, surv_as)


def simulate(config: SourceConfig) -> tuple[TimeTagStream, TimeTagStream]:
    """Stokes and anti-Stokes streams for one run; a pure function of the config."""
    config.validate()
    rng = make_rng(config.seed)
    pairs = sample_pair_events(config, rng)
    noise_s = poisson_arrivals(rng, config.noise_s_hz, config.duration_ps)
    noise_as = poisson_arrivals(rng, config.noise_as_hz, config.duration_ps)

    t_as = pairs.t_as_ps[pairs.survived_as]
    # anti-Stokes photons delayed past the end of the run are not recorded
    t_as = t_as[t_as < config.duration_ps]
    # timsort merges the (nearly) sorted runs in about linear time
    s = np.sort(np.concatenate([pairs.t_s_ps[pairs.survived_s], noise_s]), kind="stable")
    a = np.sort(np.concatenate([t_as, noise_as]), kind="stable")

    meta = {
        "rng": RNG_ALGORITHM,
        "seed": str(int(config.seed)),
        "config_hash": config.config_hash(),
        "setting": format_setting(config.setting),
    }
    stokes = TimeTagStream.single_channel(Channel.STOKES, s, config.duration_ps,
                                          {**meta, "channel": "stokes"})
    anti = TimeTagStream.single_channel(Channel.ANTI_STOKES, a, config.duration_ps,
                                        {**meta, "channel": "anti_stokes"})
    return stokes, anti


# --- analytic expectations ---------------------------------------------------

def expected_setting_counts(config: SourceConfig, setting: Setting | None) -> float:
    """Expected true coincidences R*T*eta_s*eta_as*p_joint for a setting."""
    config.validate()
    pj, _, _ = projection_probabilities(config, setting)
    return config.pair_rate_hz * config.duration_s * config.eta_s * config.eta_as * pj


def expected_singles_rates(config: SourceConfig) -> tuple[float, float]:
    """Mean detected singles rates (Hz) per arm, noise included."""
    _, ps, pas = projection_probabilities(config, config.setting)
    r_s = config.pair_rate_hz * config.eta_s * ps + config.noise_s_hz
    r_as = config.pair_rate_hz * config.eta_as * pas + config.noise_as_hz
    return r_s, r_as


def expected_peak_g2(config: SourceConfig, bin_width_ps: int) -> float:
    """Expected normalized cross-correlation in the first delay bin [0, dt).

    Ratio of correlated to accidental counts in that bin, plus one.
    """
    pj, _, _ = projection_probabilities(config, config.setting)
    r_s, r_as = expected_singles_rates(config)
    if r_s == 0 or r_as == 0:
        raise ValidationError("zero singles rate; g2 undefined")
    frac = -np.expm1(-bin_width_ps / config.tau_co_ps)
    correlated = config.pair_rate_hz * config.eta_s * config.eta_as * pj * frac
    return 1.0 + correlated / (r_s * r_as * bin_width_ps * PS)
