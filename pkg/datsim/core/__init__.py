class Tags:
    """Purpose tags keying the random streams of a run."""

    def __init__(self):
        raise RuntimeError("Do not instantiate")

    BATCH = "batch"
    ATTACK = "attack"
    QUANTIZE = "quantize"
    SERVER_QUANTIZE = "server-quantize"
    EVAL = "eval"
    DATA = "data"
    INIT = "init"
    PROBE = "probe"
    SPLIT = "split"
    SHARD = "shard"


from .params import LayeredParams  # pylint: disable=wrong-import-position
from .rng import SeededRng  # pylint: disable=wrong-import-position
