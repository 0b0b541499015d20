"""Cost accounting containers shared by the network and analysis modules."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class CostRow:
    path: str
    params: int
    flops: int


@dataclass(frozen=True)
class CostReport:
    """Per-layer parameter and FLOPs accounting.

    counting_mode "macs" treats one multiply-add as one FLOP; "flops2x"
    doubles multiplies and counts bias adds separately.
    """

    rows: tuple[CostRow, ...]
    counting_mode: str = "macs"
    n_points: int = 0
    k: int = 0
    strides: tuple[int, ...] = ()
    label: str = ""

    @property
    def total_params(self) -> int:
        return sum(r.params for r in self.rows)

    @property
    def total_flops(self) -> int:
        return sum(r.flops for r in self.rows)

    def param_by_path(self) -> dict[str, int]:
        return {r.path: r.params for r in self.rows if r.params}

    def records(self) -> list[str]:
        """Machine-readable emission: one key=value record per row."""
        out = [
            f"label={self.label or '-'} path={r.path} params={r.params} flops={r.flops}"
            for r in self.rows
        ]
        out.append(
            f"label={self.label or '-'} path=TOTAL params={self.total_params} "
            f"flops={self.total_flops} n_points={self.n_points} mode={self.counting_mode}"
        )
        return out


TSV_HEADER = "variant\tparams\tflops\tn_points\tmode"


def to_tsv(reports) -> str:
    """Tab-separated summary table, one row per report."""
    lines = [TSV_HEADER]
    for rep in reports:
        lines.append(
            f"{rep.label or '-'}\t{rep.total_params}\t{rep.total_flops}"
            f"\t{rep.n_points}\t{rep.counting_mode}"
        )
    return "\n".join(lines)
