import sys
from datetime import date, timedelta
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from carshare.csrp_models import CsrpInstance  # noqa: E402
from carshare.ingest import DemandPanel  # noqa: E402

# Synthetic bimodal demand world shared by the evaluation tests and the
# acceptance suite: three locations, each a two-Poisson mixture with 70%
# mass on the low mode. Transfers are priced near revenue so relocation
# rarely pays and plan quality hinges on per-location quantile estimates.
BIMODAL_LAMBDAS = ((6, 45), (8, 50), (4, 30))
BIMODAL_W_LO = 0.7
BIMODAL_R = len(BIMODAL_LAMBDAS)


def bimodal_panels(seed, train_days=400, test_days=100):
    rng = np.random.default_rng(seed)
    total = train_days + test_days
    cols = []
    for lo, hi in BIMODAL_LAMBDAS:
        pick_hi = rng.random(total) >= BIMODAL_W_LO
        cols.append(rng.poisson(np.where(pick_hi, hi, lo)))
    counts = np.column_stack(cols)
    base = date(2021, 1, 1)
    dates = [base + timedelta(days=d) for d in range(total)]
    ids = list(range(BIMODAL_R))
    train = DemandPanel(dates[:train_days], ids, counts[:train_days])
    test = DemandPanel(dates[train_days:], ids, counts[train_days:])
    return train, test


def bimodal_instance() -> CsrpInstance:
    t = np.full((BIMODAL_R, BIMODAL_R), 95.0)
    np.fill_diagonal(t, 0.0)
    return CsrpInstance(list(range(BIMODAL_R)), [100.0] * BIMODAL_R,
                        [20.0] * BIMODAL_R, t, 160)
