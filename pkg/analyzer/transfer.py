"""
analyzer/transfer.py - how robustness to one corruption carries to others.
"""
from typing import Mapping

import numpy as np

from analyzer.tables import SimilarityReport
from checkpoint_store import Checkpoint
from desk_trainer import DeskNet, EvalContext


def transfer_gain_matrix(models: Mapping[str, Checkpoint], std: Checkpoint, ctx: EvalContext) -> SimilarityReport:
    """(r, c) = RA(model trained on r, tested on c) - RA(std, tested on c), in points."""
    std_net = DeskNet.from_checkpoint(std)
    baseline = np.array([ctx.accuracy(std_net, c) for c in ctx.kinds])
    rows = []
    for name, model in models.items():
        net = DeskNet.from_checkpoint(model)
        rows.append([ctx.accuracy(net, c) for c in ctx.kinds])
    values = (np.array(rows, dtype=np.float64).reshape(len(models), len(ctx.kinds)) - baseline) * 100.0
    return SimilarityReport(tuple(models), ctx.kinds, values, f"transfer:severity-{ctx.severity}")
