"""Ingest bookkeeping shared by the dataset loaders and the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class IngestReport:
    dataset: str = ""
    split: str = ""
    n_samples: int = 0
    skipped: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def skip(self, message: str) -> None:
        self.skipped.append(message)

    def warn(self, message: str) -> None:
        self.warnings.append(message)

    def summary(self) -> str:
        return (
            f"dataset={self.dataset} split={self.split} "
            f"samples={self.n_samples} skipped={len(self.skipped)} "
            f"warnings={len(self.warnings)}"
        )

    def lines(self) -> list[str]:
        out = [self.summary()]
        out += [f"skip: {s}" for s in self.skipped]
        out += [f"warning: {w}" for w in self.warnings]
        return out
