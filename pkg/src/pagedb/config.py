from dataclasses import dataclass

BLOCK_SIZE = 4096
HEADER_SIZE = 4
INT_WIDTH = 4
VARCHAR_WIDTH = 20

POOL_SIZE = 8
POLL_INTERVAL = 1.0
WAIT_TIMEOUT = 10.0

DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 7878

LOCK_MODES = ("global", "table")
JOIN_IMPLS = ("nested", "hash")


@dataclass
class Config:
    """Engine settings. Durations are in seconds."""

    data_dir: str = "data"
    block_size: int = BLOCK_SIZE
    varchar_width: int = VARCHAR_WIDTH
    pool_size: int = POOL_SIZE
    lock_mode: str = "global"
    join_impl: str = "nested"
    poll_interval: float = POLL_INTERVAL
    wait_timeout: float = WAIT_TIMEOUT
    record_history: bool = False

    def __post_init__(self):
        if self.lock_mode not in LOCK_MODES:
            raise ValueError(f"lock_mode must be one of {LOCK_MODES}")
        if self.join_impl not in JOIN_IMPLS:
            raise ValueError(f"join_impl must be one of {JOIN_IMPLS}")
        if self.pool_size < 1:
            raise ValueError("pool_size must be positive")
        if self.block_size <= HEADER_SIZE:
            raise ValueError("block_size too small")


def parse_address(text):
    """'host:port' -> (host, port); a bare port means localhost."""
    host, sep, port = text.rpartition(":")
    if not sep:
        return DEFAULT_HOST, int(text)
    return host or DEFAULT_HOST, int(port)
