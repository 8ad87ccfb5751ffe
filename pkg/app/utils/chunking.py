def clamp_chunk_size(chunk_size: int, total: int, max_chunk: int = 1 << 20) -> int:
    return max(1, min(chunk_size, max_chunk, max(total, 1)))


def chunk_ranges(total: int, chunk_size: int) -> list[tuple[int, int]]:
    """[start, stop) bin ranges of fixed size; the last one may be shorter."""
    chunk_size = clamp_chunk_size(chunk_size, total)
    return [(start, min(start + chunk_size, total)) for start in range(0, total, chunk_size)]
