"""Level schedules 0 < t_1 < ... < t_L = 1 with their splitting policy."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConfigError

POLICIES = ("fixed_factor", "fixed_effort")


@dataclass(frozen=True)
class LevelSchedule:
    times: tuple[float, ...]
    policy: str = "fixed_effort"
    s: int = 1000

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        object.__setattr__(self, "times", times)
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown splitting policy {self.policy!r}")
        if int(self.s) != self.s or self.s < 2:
            raise ConfigError(f"splitting parameter s must be an integer >= 2, got {self.s}")
        object.__setattr__(self, "s", int(self.s))
        if not times:
            raise ConfigError("a schedule needs at least one level")
        if times[0] <= 0:
            raise ConfigError("the first level time must be positive")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("level times must be strictly increasing")
        if times[-1] != 1.0:
            raise ConfigError("the last level time must be 1")

    @property
    def L(self) -> int:
        return len(self.times)

    @classmethod
    def uniform(cls, L: int = 10, policy: str = "fixed_effort", s: int = 1000) -> "LevelSchedule":
        if L < 1:
            raise ConfigError("L must be at least 1")
        return cls(tuple((i + 1) / L for i in range(L - 1)) + (1.0,), policy, s)

    def with_policy(self, policy: str, s: int | None = None) -> "LevelSchedule":
        return LevelSchedule(self.times, policy, self.s if s is None else s)

    def dumps(self) -> str:
        lines = [f"# policy={self.policy} s={self.s}"]
        lines += [repr(t) for t in self.times]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "LevelSchedule":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("#"):
            raise ConfigError("schedule file must start with a '# policy=... s=...' header")
        fields = dict(tok.split("=", 1) for tok in lines[0][1:].split() if "=" in tok)
        try:
            policy, s = fields["policy"], int(fields["s"])
            times = tuple(float(ln) for ln in lines[1:])
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"malformed schedule file: {exc}") from exc
        return cls(times, policy, s)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "LevelSchedule":
        with open(path) as fh:
            return cls.loads(fh.read())
